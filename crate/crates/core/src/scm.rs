//! Structural causal models: one mechanism and one exogenous noise model per
//! non-treatment node, evaluated in topological order.
//!
//! Treatments carry neither. They are set points supplied by each
//! evaluation, either explicitly or through a configured untreated default.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalDag, NodeRole};
use crate::rng::SeedStream;

/// Exogenous noise distribution of a single node.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    DiscretePmf {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
    /// Residuals resampled uniformly with replacement.
    Empirical {
        residuals: Arc<[f64]>,
    },
    /// Always zero.
    Degenerate,
}

impl NoiseModel {
    pub fn gaussian(mean: f64, stddev: f64) -> Self {
        NoiseModel::Gaussian { mean, stddev }
    }

    pub fn standard_normal() -> Self {
        NoiseModel::Gaussian { mean: 0.0, stddev: 1.0 }
    }

    pub fn pmf(values: Vec<f64>, probabilities: Vec<f64>) -> Self {
        NoiseModel::DiscretePmf { values, probabilities }
    }

    /// Two-point {0, 1} noise with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Self {
        NoiseModel::DiscretePmf {
            values: vec![0.0, 1.0],
            probabilities: vec![1.0 - p, p],
        }
    }

    pub fn empirical(residuals: impl Into<Arc<[f64]>>) -> Self {
        NoiseModel::Empirical {
            residuals: residuals.into(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match self {
            NoiseModel::Gaussian { mean, stddev } => {
                if !mean.is_finite() || !stddev.is_finite() || *stddev < 0.0 {
                    return Err(format!(
                        "gaussian needs finite mean and stddev >= 0, got ({mean}, {stddev})"
                    ));
                }
            }
            NoiseModel::DiscretePmf { values, probabilities } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err("pmf needs matching, non-empty value and probability lists".into());
                }
                if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err("pmf probabilities must be non-negative".into());
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(format!("pmf probabilities sum to {total}, not 1"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err("pmf values must be finite".into());
                }
            }
            NoiseModel::Empirical { residuals } => {
                if residuals.is_empty() {
                    return Err("empirical residual list is empty".into());
                }
            }
            NoiseModel::Degenerate => {}
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseModel::Gaussian { mean, stddev } => {
                if *stddev == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *stddev).expect("validated stddev").sample(rng)
                }
            }
            NoiseModel::DiscretePmf { values, probabilities } => {
                let x: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if x < acc {
                        return *v;
                    }
                }
                // x landed in the rounding gap above the last cumulative sum
                let last = probabilities.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                values[last]
            }
            NoiseModel::Empirical { residuals } => residuals[rng.random_range(0..residuals.len())],
            NoiseModel::Degenerate => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { mean, .. } => *mean,
            NoiseModel::DiscretePmf { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| v * p).sum()
            }
            NoiseModel::Empirical { residuals } => residuals.iter().sum::<f64>() / residuals.len() as f64,
            NoiseModel::Degenerate => 0.0,
        }
    }

    /// `(value, probability)` atoms when the support is finite.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            NoiseModel::Gaussian { mean, stddev } if *stddev == 0.0 => Some(vec![(*mean, 1.0)]),
            NoiseModel::Gaussian { .. } => None,
            NoiseModel::DiscretePmf { values, probabilities } => Some(
                values
                    .iter()
                    .zip(probabilities)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, p)| (*v, *p))
                    .collect(),
            ),
            NoiseModel::Empirical { residuals } => {
                let w = 1.0 / residuals.len() as f64;
                Some(residuals.iter().map(|r| (*r, w)).collect())
            }
            NoiseModel::Degenerate => Some(vec![(0.0, 1.0)]),
        }
    }
}

/// How a discrete table output is combined with the node's noise value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseCombine {
    /// `out + u`
    Add,
    /// Boolean XOR of `out != 0` and `u != 0`, as 0/1.
    Xor,
    /// Boolean OR, as 0/1.
    Or,
    /// Boolean AND, as 0/1.
    And,
}

impl NoiseCombine {
    fn apply(self, out: f64, u: f64) -> f64 {
        let b = |x: f64| x != 0.0;
        let f = |x: bool| if x { 1.0 } else { 0.0 };
        match self {
            NoiseCombine::Add => out + u,
            NoiseCombine::Xor => f(b(out) ^ b(u)),
            NoiseCombine::Or => f(b(out) || b(u)),
            NoiseCombine::And => f(b(out) && b(u)),
        }
    }
}

/// Lookup table keyed by integer parent values, listed in `parents` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTable {
    pub parents: Vec<String>,
    pub entries: BTreeMap<Vec<i64>, f64>,
    pub combine: NoiseCombine,
}

impl DiscreteTable {
    /// Builds a table over `{0,1}^parents` from an output function.
    pub fn binary(parents: Vec<String>, combine: NoiseCombine, f: impl Fn(&[i64]) -> f64) -> Self {
        let k = parents.len();
        let entries = (0..1u64 << k)
            .map(|mask| {
                let key: Vec<i64> = (0..k).map(|b| (mask >> (k - 1 - b) & 1) as i64).collect();
                let v = f(&key);
                (key, v)
            })
            .collect();
        DiscreteTable {
            parents,
            entries,
            combine,
        }
    }
}

pub type OpaqueFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Arbitrary deterministic function of the parent values (in `parents`
/// order) and the node's noise value.
#[derive(Clone)]
pub struct OpaqueMechanism {
    pub label: String,
    pub parents: Vec<String>,
    pub func: Arc<OpaqueFn>,
}

impl OpaqueMechanism {
    pub fn new(
        label: impl Into<String>,
        parents: Vec<String>,
        func: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        OpaqueMechanism {
            label: label.into(),
            parents,
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for OpaqueMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpaqueMechanism")
            .field("label", &self.label)
            .field("parents", &self.parents)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Mechanism {
    /// `intercept + Σ coefficient·parent + u`
    LinearAdditive {
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
    },
    DiscreteTable(DiscreteTable),
    Opaque(OpaqueMechanism),
}

impl Mechanism {
    pub fn linear<S: Into<String>>(intercept: f64, coefficients: impl IntoIterator<Item = (S, f64)>) -> Self {
        Mechanism::LinearAdditive {
            intercept,
            coefficients: coefficients.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    fn family(&self) -> &'static str {
        match self {
            Mechanism::LinearAdditive { .. } => "linear",
            Mechanism::DiscreteTable(_) => "table",
            Mechanism::Opaque(_) => "opaque",
        }
    }
}

#[derive(Clone)]
enum Equation {
    Linear {
        intercept: f64,
        terms: Vec<(usize, f64)>,
    },
    Table {
        parents: Vec<usize>,
        entries: BTreeMap<Vec<i64>, f64>,
        combine: NoiseCombine,
    },
    Opaque {
        parents: Vec<usize>,
        func: Arc<OpaqueFn>,
    },
}

/// A causal DAG with one structural equation `X = f(Pa(X), u)` per
/// non-treatment node.
#[derive(Clone)]
pub struct Scm {
    dag: CausalDag,
    names: Arc<[String]>,
    mechanisms: BTreeMap<String, Mechanism>,
    noise: BTreeMap<String, NoiseModel>,
    defaults: BTreeMap<String, f64>,
    equations: Vec<Option<Equation>>,
    noise_by_index: Vec<Option<NoiseModel>>,
}

impl fmt::Debug for Scm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scm")
            .field("dag", &self.dag)
            .field("mechanisms", &self.mechanisms)
            .field("noise", &self.noise)
            .field("defaults", &self.defaults)
            .finish()
    }
}

fn same_parent_set(dag: &CausalDag, idx: usize, listed: &[&String]) -> bool {
    let mut want: Vec<&str> = dag.parent_names(idx);
    let mut got: Vec<&str> = listed.iter().map(|s| s.as_str()).collect();
    want.sort_unstable();
    got.sort_unstable();
    got.windows(2).all(|w| w[0] != w[1]) && want == got
}

impl Scm {
    pub fn new(
        dag: CausalDag,
        mechanisms: BTreeMap<String, Mechanism>,
        noise: BTreeMap<String, NoiseModel>,
    ) -> Result<Self> {
        let invalid = |node: &str, reason: String| Error::InvalidModel {
            node: node.to_string(),
            reason,
        };
        for name in mechanisms.keys().chain(noise.keys()) {
            dag.index_of(name)?;
        }

        let mut equations = Vec::with_capacity(dag.len());
        let mut noise_by_index = Vec::with_capacity(dag.len());
        for (idx, node) in dag.nodes().iter().enumerate() {
            let name = node.name.as_str();
            if node.role == NodeRole::Treatment {
                if mechanisms.contains_key(name) || noise.contains_key(name) {
                    return Err(invalid(
                        name,
                        "treatments are set points and take no mechanism or noise".into(),
                    ));
                }
                equations.push(None);
                noise_by_index.push(None);
                continue;
            }
            let mech = mechanisms
                .get(name)
                .ok_or_else(|| invalid(name, "missing mechanism".into()))?;
            let nm = noise
                .get(name)
                .ok_or_else(|| invalid(name, "missing noise model".into()))?;
            nm.validate().map_err(|r| invalid(name, r))?;

            let equation = match mech {
                Mechanism::LinearAdditive {
                    intercept,
                    coefficients,
                } => {
                    let keys: Vec<&String> = coefficients.keys().collect();
                    if !same_parent_set(&dag, idx, &keys) {
                        return Err(invalid(
                            name,
                            format!(
                                "linear coefficients {:?} must match the parents {:?}",
                                keys,
                                dag.parent_names(idx)
                            ),
                        ));
                    }
                    if !intercept.is_finite() || coefficients.values().any(|c| !c.is_finite()) {
                        return Err(invalid(name, "non-finite coefficient".into()));
                    }
                    let terms = dag
                        .parents(idx)
                        .iter()
                        .map(|&p| (p, coefficients[dag.name(p)]))
                        .collect();
                    Equation::Linear {
                        intercept: *intercept,
                        terms,
                    }
                }
                Mechanism::DiscreteTable(table) => {
                    let listed: Vec<&String> = table.parents.iter().collect();
                    if !same_parent_set(&dag, idx, &listed) {
                        return Err(invalid(
                            name,
                            format!(
                                "table parents {:?} must match {:?}",
                                table.parents,
                                dag.parent_names(idx)
                            ),
                        ));
                    }
                    if table.entries.is_empty() {
                        return Err(invalid(name, "table has no entries".into()));
                    }
                    if table.entries.keys().any(|k| k.len() != table.parents.len()) {
                        return Err(invalid(name, "table key length differs from parent count".into()));
                    }
                    Equation::Table {
                        parents: table.parents.iter().map(|p| dag.index_of(p)).collect::<Result<_>>()?,
                        entries: table.entries.clone(),
                        combine: table.combine,
                    }
                }
                Mechanism::Opaque(op) => {
                    let listed: Vec<&String> = op.parents.iter().collect();
                    if !same_parent_set(&dag, idx, &listed) {
                        return Err(invalid(
                            name,
                            format!("opaque parents {:?} must match {:?}", op.parents, dag.parent_names(idx)),
                        ));
                    }
                    Equation::Opaque {
                        parents: op.parents.iter().map(|p| dag.index_of(p)).collect::<Result<_>>()?,
                        func: op.func.clone(),
                    }
                }
            };
            equations.push(Some(equation));
            noise_by_index.push(Some(nm.clone()));
        }

        let names: Arc<[String]> = dag.nodes().iter().map(|n| n.name.clone()).collect();
        Ok(Scm {
            dag,
            names,
            mechanisms,
            noise,
            defaults: BTreeMap::new(),
            equations,
            noise_by_index,
        })
    }

    /// Value a treatment takes when an evaluation does not set it.
    pub fn with_default_untreated(mut self, treatment: &str, value: f64) -> Result<Self> {
        self.dag.expect_role(treatment, NodeRole::Treatment)?;
        self.defaults.insert(treatment.to_string(), value);
        Ok(self)
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn mechanisms(&self) -> &BTreeMap<String, Mechanism> {
        &self.mechanisms
    }

    pub fn noise_models(&self) -> &BTreeMap<String, NoiseModel> {
        &self.noise
    }

    pub fn default_untreated(&self) -> &BTreeMap<String, f64> {
        &self.defaults
    }

    pub(crate) fn noise_model_at(&self, idx: usize) -> Option<&NoiseModel> {
        self.noise_by_index[idx].as_ref()
    }

    /// `(intercept, [(parent index, coefficient)])` for a linear node.
    pub(crate) fn linear_terms(&self, idx: usize) -> Option<(f64, &[(usize, f64)])> {
        match &self.equations[idx] {
            Some(Equation::Linear { intercept, terms }) => Some((*intercept, terms)),
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.mechanisms.values().all(|m| m.family() == "linear")
    }

    pub(crate) fn draw_noise_indexed(&self, stream: &SeedStream) -> Vec<f64> {
        self.noise_by_index
            .iter()
            .zip(self.names.iter())
            .map(|(nm, name)| match nm {
                Some(nm) => nm.sample(&mut stream.rng_for(name)),
                None => 0.0,
            })
            .collect()
    }

    /// Core evaluation. `forced[i]` overrides node `i` (do-semantics);
    /// treatments without a forced value fall back to their default.
    pub(crate) fn evaluate_indexed(&self, forced: &[Option<f64>], noise: &[f64], out: &mut [f64]) -> Result<()> {
        for &idx in self.dag.topo_indices() {
            if let Some(v) = forced[idx] {
                out[idx] = v;
                continue;
            }
            let u = noise[idx];
            out[idx] = match &self.equations[idx] {
                None => *self
                    .defaults
                    .get(self.dag.name(idx))
                    .ok_or_else(|| Error::MissingTreatmentValue(self.dag.name(idx).to_string()))?,
                Some(Equation::Linear { intercept, terms }) => {
                    terms.iter().fold(*intercept, |acc, &(p, c)| acc + c * out[p]) + u
                }
                Some(Equation::Table {
                    parents,
                    entries,
                    combine,
                }) => {
                    let mut key = Vec::with_capacity(parents.len());
                    for &p in parents {
                        let v = out[p];
                        if v.fract() != 0.0 || !v.is_finite() {
                            return Err(self.lookup_miss(idx, parents, out));
                        }
                        key.push(v as i64);
                    }
                    let base = entries.get(&key).ok_or_else(|| self.lookup_miss(idx, parents, out))?;
                    combine.apply(*base, u)
                }
                Some(Equation::Opaque { parents, func }) => {
                    let args: Vec<f64> = parents.iter().map(|&p| out[p]).collect();
                    func(&args, u)
                }
            };
        }
        Ok(())
    }

    fn lookup_miss(&self, idx: usize, parents: &[usize], out: &[f64]) -> Error {
        Error::DomainError {
            node: self.dag.name(idx).to_string(),
            key: parents.iter().map(|&p| out[p]).collect(),
        }
    }

    pub(crate) fn forced_from_map(&self, interventions: &BTreeMap<String, f64>) -> Result<Vec<Option<f64>>> {
        let mut forced = vec![None; self.dag.len()];
        for (name, v) in interventions {
            forced[self.dag.index_of(name)?] = Some(*v);
        }
        Ok(forced)
    }
}

/// One exogenous draw: a value for every non-treatment node.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector {
    names: Arc<[String]>,
    roles: Vec<bool>,
    values: Vec<f64>,
}

impl NoiseVector {
    pub(crate) fn from_indexed(scm: &Scm, values: Vec<f64>) -> Self {
        let roles = (0..scm.dag.len()).map(|i| scm.equations[i].is_some()).collect();
        NoiseVector {
            names: scm.names.clone(),
            roles,
            values,
        }
    }

    /// Builds a noise vector whose keys must be exactly the non-treatment nodes.
    pub fn from_map(scm: &Scm, values: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = vec![0.0; scm.dag.len()];
        for (name, v) in values {
            let idx = scm.dag.index_of(name)?;
            if scm.equations[idx].is_none() {
                return Err(Error::InvalidModel {
                    node: name.clone(),
                    reason: "treatments take no noise value".into(),
                });
            }
            out[idx] = *v;
        }
        for (idx, eq) in scm.equations.iter().enumerate() {
            if eq.is_some() && !values.contains_key(scm.dag.name(idx)) {
                return Err(Error::InvalidModel {
                    node: scm.dag.name(idx).to_string(),
                    reason: "noise vector lacks a value".into(),
                });
            }
        }
        Ok(Self::from_indexed(scm, out))
    }

    pub fn zeros(scm: &Scm) -> Self {
        Self::from_indexed(scm, vec![0.0; scm.dag.len()])
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let idx = self.names.iter().position(|n| n == name)?;
        self.roles[idx].then_some(self.values[idx])
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.names
            .iter()
            .zip(&self.values)
            .zip(&self.roles)
            .filter(|(_, has)| **has)
            .map(|((n, v), _)| (n.clone(), *v))
            .collect()
    }

    /// Values indexed by node; treatment slots hold 0 and are never read.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// A complete assignment of node values.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    names: Arc<[String]>,
    values: Vec<f64>,
}

impl Valuation {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.iter().map(|(n, v)| (n.to_string(), v)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// One independent noise draw per non-treatment node.
pub fn draw_noise(scm: &Scm, stream: &SeedStream) -> NoiseVector {
    NoiseVector::from_indexed(scm, scm.draw_noise_indexed(stream))
}

/// Evaluates every node under `interventions` and a fixed noise draw.
/// Intervened nodes take their forced value verbatim.
pub fn evaluate(scm: &Scm, interventions: &BTreeMap<String, f64>, noise: &NoiseVector) -> Result<Valuation> {
    let forced = scm.forced_from_map(interventions)?;
    let mut out = vec![0.0; scm.dag.len()];
    scm.evaluate_indexed(&forced, noise.as_slice(), &mut out)?;
    Ok(Valuation {
        names: scm.names.clone(),
        values: out,
    })
}

/// `n` evaluations under fresh noise; draw `k` uses the stream at index `k`.
pub fn simulate(scm: &Scm, treatment_values: &BTreeMap<String, f64>, n: usize, seed: u64) -> Result<Vec<Valuation>> {
    if n == 0 {
        return Err(Error::InvalidConfig("simulation needs at least one draw".into()));
    }
    let forced = scm.forced_from_map(treatment_values)?;
    (0..n as u64)
        .map(|k| {
            let noise = scm.draw_noise_indexed(&SeedStream::at(seed, k));
            let mut out = vec![0.0; scm.dag.len()];
            scm.evaluate_indexed(&forced, &noise, &mut out)?;
            Ok(Valuation {
                names: scm.names.clone(),
                values: out,
            })
        })
        .collect()
}
