//! Tabular ingestion and per-node least-squares fitting of linear mechanisms.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeRole};
use crate::mediation::LinearCoefficients;
use crate::scm::{Mechanism, NoiseModel, Scm, Valuation};

/// Smallest eigenvalue of the parent correlation matrix accepted as full rank.
const RANK_TOLERANCE: f64 = 1e-10;

/// Numeric observations, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    dropped_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_header(&columns)?;
        if let Some(bad) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::HeaderMismatch(format!(
                "row {bad} has {} values for {} columns",
                rows[bad].len(),
                columns.len()
            )));
        }
        Ok(Dataset {
            columns,
            rows,
            dropped_rows: 0,
        })
    }

    /// One row per valuation, one column per node.
    pub fn from_valuations(valuations: &[Valuation]) -> Result<Self> {
        let first = valuations.first().ok_or(Error::EmptyTable)?;
        let columns = first.iter().map(|(n, _)| n.to_string()).collect();
        Self::new(columns, valuations.iter().map(|v| v.as_slice().to_vec()).collect())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Rows discarded during ingestion for missing or non-numeric cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_header(columns: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in columns {
        if !seen.insert(c.as_str()) {
            return Err(Error::HeaderMismatch(format!("duplicate column `{c}`")));
        }
    }
    Ok(())
}

/// Reads a comma-separated table with a header row. Rows with a missing,
/// non-numeric or non-finite cell are dropped with a warning.
pub fn load_table<R: Read>(source: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(Error::EmptyTable);
    }
    check_header(&columns)?;

    let mut rows = Vec::new();
    let mut dropped = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let parsed: Option<Vec<f64>> = (record.len() == columns.len())
            .then(|| {
                record
                    .iter()
                    .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect()
            })
            .flatten();
        match parsed {
            Some(row) => rows.push(row),
            None => {
                // header is line 1
                log::warn!("dropping data row at line {}: missing or non-numeric cell", line + 2);
                dropped += 1;
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(Dataset {
        columns,
        rows,
        dropped_rows: dropped,
    })
}

pub fn load_table_path(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_table(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Resample the fitted residuals.
    #[default]
    Empirical,
    /// Zero-mean Gaussian with the residual standard deviation.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFit {
    pub node: String,
    pub intercept: f64,
    /// Parent names, in the order used by `coefficient_covariance`.
    pub parents: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
    pub coefficient_std_errors: BTreeMap<String, f64>,
    pub coefficient_covariance: Vec<Vec<f64>>,
    pub residual_stddev: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub nodes: Vec<NodeFit>,
    pub n_rows: usize,
    pub dropped_rows: usize,
}

impl FitReport {
    pub fn node(&self, name: &str) -> Option<&NodeFit> {
        self.nodes.iter().find(|n| n.node == name)
    }
}

struct OlsFit {
    intercept: f64,
    beta: Vec<f64>,
    covariance: DMatrix<f64>,
    residuals: Vec<f64>,
    residual_stddev: f64,
    r_squared: f64,
}

/// Least squares of `y` on the columns of `x` plus an intercept. Columns are
/// centred and scaled before solving, and a near-singular correlation
/// matrix is reported as rank deficient.
fn ols(node: &str, x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = x.len();
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;

    let means: Vec<f64> = x.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let scales: Vec<f64> = x
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt())
        .collect();
    for (s, m) in scales.iter().zip(&means) {
        if s.is_nan() || *s <= 1e-12 * m.abs().max(1.0) {
            return Err(Error::RankDeficient(node.to_string()));
        }
    }

    let z = DMatrix::from_fn(n, p, |i, j| (x[j][i] - means[j]) / scales[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let corr = (z.transpose() * &z) / nf;
    let min_eig = if p == 0 {
        1.0
    } else {
        corr.clone().symmetric_eigenvalues().min()
    };
    if min_eig.is_nan() || min_eig <= RANK_TOLERANCE {
        return Err(Error::RankDeficient(node.to_string()));
    }
    let corr_inv = corr
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(node.to_string()))?
        .inverse();
    let beta_scaled = &corr_inv * (z.transpose() * &yc / nf);
    let beta: Vec<f64> = (0..p).map(|j| beta_scaled[j] / scales[j]).collect();
    let intercept = y_mean - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - (0..p).map(|j| beta[j] * x[j][i]).sum::<f64>())
        .collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let dof = (n - p - 1) as f64;
    let sigma2 = ssr / dof;
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    // Cov(β) = σ² (XcᵀXc)⁻¹ = σ²/n · D⁻¹ R⁻¹ D⁻¹
    let covariance = DMatrix::from_fn(p, p, |a, b| sigma2 / nf * corr_inv[(a, b)] / (scales[a] * scales[b]));

    Ok(OlsFit {
        intercept,
        beta,
        covariance,
        residuals,
        residual_stddev: sigma2.sqrt(),
        r_squared,
    })
}

/// Fits a linear-additive mechanism for every non-treatment node by
/// regressing it on its parents.
pub fn fit_scm(dag: &CausalDag, dataset: &Dataset, noise_mode: NoiseMode) -> Result<(Scm, FitReport)> {
    for node in dag.nodes() {
        if dataset.column_index(&node.name).is_err() {
            return Err(Error::HeaderMismatch(format!(
                "data has no column for node `{}`",
                node.name
            )));
        }
    }
    let n = dataset.n_rows();
    let mut mechanisms = BTreeMap::new();
    let mut noise = BTreeMap::new();
    let mut fits = Vec::new();
    for idx in dag.topo_indices().iter().copied() {
        if dag.role(idx) == NodeRole::Treatment {
            continue;
        }
        let name = dag.name(idx);
        let parents: Vec<String> = dag.parent_names(idx).into_iter().map(str::to_string).collect();
        if n <= parents.len() + 1 {
            return Err(Error::InsufficientRows {
                node: name.to_string(),
                needed: parents.len() + 1,
                available: n,
            });
        }
        let x: Vec<Vec<f64>> = parents.iter().map(|p| dataset.column(p)).collect::<Result<_>>()?;
        let y = dataset.column(name)?;
        let fit = ols(name, &x, &y)?;

        let coefficients: BTreeMap<String, f64> = parents.iter().cloned().zip(fit.beta.iter().copied()).collect();
        let coefficient_std_errors = parents
            .iter()
            .enumerate()
            .map(|(j, p)| (p.clone(), fit.covariance[(j, j)].sqrt()))
            .collect();
        let covariance = (0..parents.len())
            .map(|a| (0..parents.len()).map(|b| fit.covariance[(a, b)]).collect())
            .collect();
        mechanisms.insert(
            name.to_string(),
            Mechanism::LinearAdditive {
                intercept: fit.intercept,
                coefficients: coefficients.clone(),
            },
        );
        let model = match noise_mode {
            NoiseMode::Empirical => NoiseModel::empirical(fit.residuals),
            NoiseMode::Gaussian => NoiseModel::gaussian(0.0, fit.residual_stddev),
        };
        noise.insert(name.to_string(), model);
        fits.push(NodeFit {
            node: name.to_string(),
            intercept: fit.intercept,
            parents,
            coefficients,
            coefficient_std_errors,
            coefficient_covariance: covariance,
            residual_stddev: fit.residual_stddev,
            r_squared: fit.r_squared,
        });
    }
    let scm = Scm::new(dag.clone(), mechanisms, noise)?;
    Ok((
        scm,
        FitReport {
            nodes: fits,
            n_rows: n,
            dropped_rows: dataset.dropped_rows(),
        },
    ))
}

/// Delta-method standard error of the closed-form linear NIE that stems from
/// coefficient estimation error. Coefficients of different nodes come from
/// separate regressions and are treated as independent.
pub fn linear_nie_fit_std_error(
    scm: &Scm,
    report: &FitReport,
    treatment: &str,
    mediator: &str,
    delta: f64,
) -> Result<f64> {
    let dag = scm.dag();
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    let m = dag.expect_role(mediator, NodeRole::Mediator)?;
    let base = LinearCoefficients::from_scm(scm)?;
    let at = base.nie(dag, t, m, delta);
    let mut variance = 0.0;
    for fit in &report.nodes {
        let idx = dag.index_of(&fit.node)?;
        // the NIE is affine in each single coefficient, so a unit step gives
        // the exact partial derivative
        let grad: Vec<f64> = fit
            .parents
            .iter()
            .map(|p| {
                let pi = dag.index_of(p)?;
                let mut bumped = base.clone();
                let term = bumped.terms[idx]
                    .iter_mut()
                    .find(|(q, _)| *q == pi)
                    .ok_or_else(|| Error::UnknownNode(p.clone()))?;
                term.1 += 1.0;
                Ok(bumped.nie(dag, t, m, delta) - at)
            })
            .collect::<Result<_>>()?;
        for (a, ga) in grad.iter().enumerate() {
            for (b, gb) in grad.iter().enumerate() {
                variance += ga * fit.coefficient_covariance[a][b] * gb;
            }
        }
    }
    Ok(variance.max(0.0).sqrt())
}

/// Resampling handle over one observed column.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBaseline {
    column: String,
    values: Arc<[f64]>,
}

impl EmpiricalBaseline {
    pub fn new(column: impl Into<String>, values: impl Into<Arc<[f64]>>) -> Result<Self> {
        let column = column.into();
        let values = values.into();
        if values.is_empty() {
            return Err(Error::EmptyColumn(column));
        }
        Ok(EmpiricalBaseline { column, values })
    }

    pub fn column(&self) -> &str {
        &self.column
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.values[rng.random_range(0..self.values.len())]
    }
}

pub fn observed_baseline(dataset: &Dataset, node: &str) -> Result<EmpiricalBaseline> {
    EmpiricalBaseline::new(node, dataset.column(node)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_dag;
    use crate::rng::SeedStream;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use NodeRole::*;

    #[test]
    fn load_examples() {
        let d = load_table("a,b,c\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.column("b").unwrap(), [2.0, 5.0]);

        let d = load_table("a,b,c\n1,2,3\n4,x,6\n7,8,9\n".as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.dropped_rows(), 1);

        let d = load_table("a,b\n1,\n2,3\n1\n".as_bytes()).unwrap();
        assert_eq!(d.n_rows(), 1);
        assert_eq!(d.dropped_rows(), 2);

        assert_eq!(load_table("".as_bytes()).unwrap_err(), Error::EmptyTable);
        assert_eq!(load_table("a,b\n".as_bytes()).unwrap_err(), Error::EmptyTable);
        assert_eq!(
            load_table("a,a\n1,2\n".as_bytes()).unwrap_err().kind(),
            "HeaderMismatch"
        );
    }

    fn mediator_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let t: f64 = StandardNormal.sample(&mut rng);
                let e1: f64 = StandardNormal.sample(&mut rng);
                let e2: f64 = StandardNormal.sample(&mut rng);
                let m = 2.0 * t + e1;
                let o = -1.0 + 0.5 * m + e2;
                vec![t, m, o]
            })
            .collect();
        Dataset::new(vec!["T".into(), "M".into(), "O".into()], rows).unwrap()
    }

    fn chain() -> CausalDag {
        build_dag(
            [("T", Treatment), ("M", Mediator), ("O", Outcome)],
            [("T", "M"), ("M", "O")],
        )
        .unwrap()
    }

    #[test]
    fn fit_recovers_coefficient() {
        let (scm, report) = fit_scm(&chain(), &mediator_data(10_000, 1), NoiseMode::Empirical).unwrap();
        let m = report.node("M").unwrap();
        assert!((m.coefficients["T"] - 2.0).abs() <= 0.1);
        assert!((m.coefficient_std_errors["T"] - 0.01).abs() < 0.002);
        let o = report.node("O").unwrap();
        assert!((o.intercept + 1.0).abs() < 0.1);
        assert_eq!(report.nodes.len(), 2);
        assert!(matches!(scm.noise_models()["M"], NoiseModel::Empirical { .. }));

        let (scm, _) = fit_scm(&chain(), &mediator_data(500, 1), NoiseMode::Gaussian).unwrap();
        assert!(matches!(scm.noise_models()["O"], NoiseModel::Gaussian { .. }));
    }

    #[test]
    fn residual_mean_is_small() {
        let d = mediator_data(5_000, 4);
        let (scm, report) = fit_scm(&chain(), &d, NoiseMode::Empirical).unwrap();
        let NoiseModel::Empirical { residuals } = &scm.noise_models()["O"] else {
            panic!("empirical residuals expected")
        };
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let sd = report.node("O").unwrap().residual_stddev;
        assert!(mean.abs() <= 3.0 * sd / (residuals.len() as f64).sqrt());
    }

    #[test]
    fn exact_fit() {
        let rows = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37 - 3.0;
                let m = 1.5 - 0.25 * t;
                vec![t, m, 4.0 * m + 2.0]
            })
            .collect();
        let d = Dataset::new(vec!["T".into(), "M".into(), "O".into()], rows).unwrap();
        let (_, report) = fit_scm(&chain(), &d, NoiseMode::Gaussian).unwrap();
        for fit in &report.nodes {
            assert!(fit.residual_stddev <= 1e-9, "{fit:?}");
            assert!(fit.r_squared >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn degenerate_designs() {
        let rows = (0..20).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let d = Dataset::new(vec!["T".into(), "M".into(), "O".into()], rows).unwrap();
        assert_eq!(
            fit_scm(&chain(), &d, NoiseMode::Empirical).unwrap_err(),
            Error::RankDeficient("M".into())
        );

        let collinear = build_dag(
            [("A", Treatment), ("B", Treatment), ("O", Outcome)],
            [("A", "O"), ("B", "O")],
        )
        .unwrap();
        let rows = (0..20)
            .map(|i| vec![i as f64, 2.0 * i as f64 + 1.0, (i * i) as f64])
            .collect();
        let d = Dataset::new(vec!["A".into(), "B".into(), "O".into()], rows).unwrap();
        assert_eq!(
            fit_scm(&collinear, &d, NoiseMode::Empirical).unwrap_err(),
            Error::RankDeficient("O".into())
        );

        let tiny = Dataset::new(
            vec!["T".into(), "M".into(), "O".into()],
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]],
        )
        .unwrap();
        assert_eq!(
            fit_scm(&chain(), &tiny, NoiseMode::Empirical).unwrap_err().kind(),
            "InsufficientRows"
        );

        let missing = Dataset::new(vec!["T".into(), "M".into()], vec![vec![0.0, 1.0]]).unwrap();
        let e = fit_scm(&chain(), &missing, NoiseMode::Empirical).unwrap_err();
        assert!(matches!(&e, Error::HeaderMismatch(m) if m.contains("`O`")), "{e}");
    }

    #[test]
    fn baseline_examples() {
        let d = Dataset::new(vec!["x".into()], vec![vec![4.5]; 10]).unwrap();
        let b = observed_baseline(&d, "x").unwrap();
        let mut rng = SeedStream::new(1).rng_for("x");
        assert!((0..100).all(|_| b.sample(&mut rng) == 4.5));

        let values: Vec<f64> = (0..1000).map(|i| (i % 37) as f64).collect();
        let d = Dataset::new(vec!["x".into()], values.iter().map(|v| vec![*v]).collect()).unwrap();
        let b = observed_baseline(&d, "x").unwrap();
        let m = b.mean();
        let sd = (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt();
        let n = 100_000;
        let mean = (0..n).map(|_| b.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - m).abs() <= 3.0 * sd / (n as f64).sqrt());

        assert_eq!(observed_baseline(&d, "y").unwrap_err().kind(), "UnknownColumn");
        let empty = Dataset::new(vec!["x".into()], vec![]).unwrap();
        assert_eq!(observed_baseline(&empty, "x").unwrap_err().kind(), "EmptyColumn");
    }

    #[test]
    fn fit_std_error_matches_single_path() {
        // NIE = b_TM · b_MO · δ; Var ≈ (b_MO δ)² Var(b_TM) + (b_TM δ)² Var(b_MO)
        let d = mediator_data(4_000, 9);
        let (scm, report) = fit_scm(&chain(), &d, NoiseMode::Empirical).unwrap();
        let m = report.node("M").unwrap();
        let o = report.node("O").unwrap();
        let (a, b) = (m.coefficients["T"], o.coefficients["M"]);
        let expected =
            ((b * m.coefficient_std_errors["T"]).powi(2) + (a * o.coefficient_std_errors["M"]).powi(2)).sqrt();
        let got = linear_nie_fit_std_error(&scm, &report, "T", "M", 1.0).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}
