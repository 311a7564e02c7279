//! Paired Monte Carlo estimation of natural indirect, direct and total effects.
//!
//! Every estimate is the mean of per-draw differences between two arms
//! evaluated under the same noise draw. Draw `k` is generated from the seed
//! stream at index `k` on whichever worker handles it, and the differences
//! are reduced sequentially in draw order, so results are bit-identical for
//! any worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counterfactual::{resolve_all, spec_indices, specs_are_identity, ArmEvaluator, Resolved, TreatmentSpec};
use crate::error::{Error, Result};
use crate::graph::{mediation_relevant, CausalDag, NodeRole};
use crate::rng::SeedStream;
use crate::scm::Scm;

pub const DEFAULT_DRAWS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectKind {
    #[serde(rename = "NIE")]
    Nie,
    #[serde(rename = "NDE")]
    Nde,
    #[serde(rename = "TE")]
    Te,
}

impl EffectKind {
    pub fn label(self) -> &'static str {
        match self {
            EffectKind::Nie => "NIE",
            EffectKind::Nde => "NDE",
            EffectKind::Te => "TE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub point: f64,
    /// Sample standard deviation of the per-draw differences over `sqrt(n_draws)`.
    pub std_error: f64,
    pub n_draws: u64,
    pub kind: EffectKind,
}

impl EffectEstimate {
    fn exact_zero(n_draws: u64, kind: EffectKind) -> Self {
        EffectEstimate {
            point: 0.0,
            std_error: 0.0,
            n_draws,
            kind,
        }
    }

    /// Summarises per-draw differences.
    pub fn from_differences(diffs: &[f64], kind: EffectKind) -> Self {
        let n = diffs.len();
        let mean = compensated_sum(diffs.iter().copied()) / n as f64;
        let std_error = if n > 1 {
            let ss = compensated_sum(diffs.iter().map(|d| (d - mean) * (d - mean)));
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        EffectEstimate {
            point: mean,
            std_error,
            n_draws: n as u64,
            kind,
        }
    }
}

/// Neumaier summation.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, comp) = values.into_iter().fold((0.0f64, 0.0f64), |(sum, comp), x| {
        let t = sum + x;
        let comp = if sum.abs() >= x.abs() {
            comp + ((sum - t) + x)
        } else {
            comp + ((x - t) + sum)
        };
        (t, comp)
    });
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McConfig {
    pub n_draws: u64,
    pub seed: u64,
    pub parallel_workers: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_draws: DEFAULT_DRAWS,
            seed: 0,
            parallel_workers: None,
        }
    }
}

impl McConfig {
    pub fn new(n_draws: u64, seed: u64) -> Self {
        McConfig {
            n_draws,
            seed,
            parallel_workers: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.parallel_workers = Some(workers);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::InvalidConfig("n_draws must be at least 1".into()));
        }
        if self.parallel_workers == Some(0) {
            return Err(Error::InvalidConfig("parallel_workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// NIE estimates for every (treatment, mediator) pair, row-major by
/// treatment declaration order then mediator order.
#[derive(Debug, Clone, PartialEq)]
pub struct NieMatrix {
    pub treatments: Vec<String>,
    pub mediators: Vec<String>,
    estimates: Vec<EffectEstimate>,
    pub warnings: Vec<String>,
}

impl NieMatrix {
    pub fn get(&self, treatment: &str, mediator: &str) -> Option<&EffectEstimate> {
        let i = self.treatments.iter().position(|t| t == treatment)?;
        let j = self.mediators.iter().position(|m| m == mediator)?;
        self.estimates.get(i * self.mediators.len() + j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &EffectEstimate)> {
        let j = self.mediators.len();
        self.estimates
            .iter()
            .enumerate()
            .map(move |(k, e)| (self.treatments[k / j].as_str(), self.mediators[k % j].as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }
}

/// Runs `arm_difference` on every draw and summarises the differences.
fn paired_estimate<F>(
    scm: &Scm,
    specs: &[TreatmentSpec],
    cfg: &McConfig,
    kind: EffectKind,
    arm_difference: F,
) -> Result<EffectEstimate>
where
    F: Fn(&mut ArmEvaluator<'_>, &[Resolved], &[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let indices = spec_indices(scm.dag(), specs)?;
    let draw = |ev: &mut ArmEvaluator<'_>, k: u64| -> Result<f64> {
        let stream = SeedStream::at(cfg.seed, k);
        let noise = scm.draw_noise_indexed(&stream);
        let resolved = resolve_all(specs, &indices, Some(&stream), &BTreeMap::new())?;
        arm_difference(ev, &resolved, &noise)
    };
    let diffs: Vec<f64> = match cfg.parallel_workers {
        None | Some(1) => {
            let mut ev = ArmEvaluator::new(scm);
            (0..cfg.n_draws).map(|k| draw(&mut ev, k)).collect::<Result<_>>()?
        }
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| {
                (0..cfg.n_draws)
                    .into_par_iter()
                    .map_init(|| ArmEvaluator::new(scm), |ev, k| draw(ev, k))
                    .collect::<Result<Vec<f64>>>()
            })?
        }
    };
    Ok(EffectEstimate::from_differences(&diffs, kind))
}

/// NIE of `treatment` through `mediator`: mean over draws of the aleph arm
/// minus the all-untreated baseline.
pub fn estimate_nie(
    scm: &Scm,
    treatment: &str,
    mediator: &str,
    specs: &[TreatmentSpec],
    cfg: &McConfig,
) -> Result<EffectEstimate> {
    estimate_nie_inner(scm, treatment, mediator, specs, cfg, &mut Vec::new())
}

fn estimate_nie_inner(
    scm: &Scm,
    treatment: &str,
    mediator: &str,
    specs: &[TreatmentSpec],
    cfg: &McConfig,
    warnings: &mut Vec<String>,
) -> Result<EffectEstimate> {
    cfg.validate()?;
    let dag = scm.dag();
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    let m = dag.expect_role(mediator, NodeRole::Mediator)?;
    spec_indices(dag, specs)?;
    if !mediation_relevant(dag, treatment, mediator)? {
        let msg = format!("IrrelevantPair: {treatment} -> {mediator} has no mediated path to the outcome; NIE is 0");
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(EffectEstimate::exact_zero(cfg.n_draws, EffectKind::Nie));
    }
    paired_estimate(scm, specs, cfg, EffectKind::Nie, |ev, resolved, noise| {
        let aleph = ev.aleph(resolved, t, m, noise)?;
        let base = ev.baseline(resolved, noise)?;
        Ok(aleph - base)
    })
}

pub fn estimate_all_nies(scm: &Scm, specs: &[TreatmentSpec], cfg: &McConfig) -> Result<NieMatrix> {
    let dag = scm.dag();
    let treatments: Vec<String> = dag.treatments().iter().map(|&t| dag.name(t).to_string()).collect();
    let mediators: Vec<String> = dag.mediators().iter().map(|&m| dag.name(m).to_string()).collect();
    if treatments.is_empty() || mediators.is_empty() {
        return Err(Error::InvalidConfig(
            "NIE matrix needs at least one treatment and one mediator".into(),
        ));
    }
    let mut warnings = Vec::new();
    let mut estimates = Vec::with_capacity(treatments.len() * mediators.len());
    for t in &treatments {
        for m in &mediators {
            estimates.push(estimate_nie_inner(scm, t, m, specs, cfg, &mut warnings)?);
        }
    }
    Ok(NieMatrix {
        treatments,
        mediators,
        estimates,
        warnings,
    })
}

/// Treated (others untreated) minus baseline, all mediators free.
pub fn estimate_total_effect(
    scm: &Scm,
    treatment: &str,
    specs: &[TreatmentSpec],
    cfg: &McConfig,
) -> Result<EffectEstimate> {
    let t = scm.dag().expect_role(treatment, NodeRole::Treatment)?;
    paired_estimate(scm, specs, cfg, EffectKind::Te, |ev, resolved, noise| {
        let treated = ev.treated(resolved, t, noise)?;
        let base = ev.baseline(resolved, noise)?;
        Ok(treated - base)
    })
}

/// Treated with every mediator frozen at its baseline natural value, minus
/// baseline. Single-treatment graphs only.
pub fn estimate_nde(scm: &Scm, treatment: &str, specs: &[TreatmentSpec], cfg: &McConfig) -> Result<EffectEstimate> {
    let dag = scm.dag();
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    let count = dag.treatments().len();
    if count != 1 {
        return Err(Error::MultiTreatmentNdeUnsupported(count));
    }
    paired_estimate(scm, specs, cfg, EffectKind::Nde, |ev, resolved, noise| {
        let direct = ev.direct(resolved, t, noise)?;
        let base = ev.baseline(resolved, noise)?;
        Ok(direct - base)
    })
}

/// `true` when the spec for `treatment` leaves its value unchanged, so every
/// paired difference for it is exactly zero.
pub fn is_identity_treatment(specs: &[TreatmentSpec], treatment: &str) -> bool {
    specs_are_identity(specs, treatment)
}

/// Coefficient view of an all-linear SCM, indexed by node.
#[derive(Debug, Clone)]
pub(crate) struct LinearCoefficients {
    pub terms: Vec<Vec<(usize, f64)>>,
}

impl LinearCoefficients {
    pub fn from_scm(scm: &Scm) -> Result<Self> {
        let dag = scm.dag();
        let terms = (0..dag.len())
            .map(|i| {
                if dag.role(i) == NodeRole::Treatment {
                    return Ok(Vec::new());
                }
                scm.linear_terms(i)
                    .map(|(_, t)| t.to_vec())
                    .ok_or_else(|| Error::NotLinear(dag.name(i).to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(LinearCoefficients { terms })
    }

    /// d(node)/d(source) for every node, with `source` intervened on and all
    /// other treatments held fixed.
    fn sensitivities(&self, dag: &CausalDag, source: usize) -> Vec<f64> {
        let mut d = vec![0.0; dag.len()];
        d[source] = 1.0;
        for &i in dag.topo_indices() {
            if i == source || dag.role(i) == NodeRole::Treatment {
                continue;
            }
            d[i] = self.terms[i].iter().map(|&(p, c)| c * d[p]).sum();
        }
        d
    }

    pub fn nie(&self, dag: &CausalDag, t: usize, m: usize, delta: f64) -> f64 {
        let to_mediator = self.sensitivities(dag, t)[m];
        let to_outcome = self.sensitivities(dag, m)[dag.outcome()];
        to_mediator * to_outcome * delta
    }

    pub fn total_effect(&self, dag: &CausalDag, t: usize, delta: f64) -> f64 {
        self.sensitivities(dag, t)[dag.outcome()] * delta
    }
}

/// Exact NIE for an all-linear SCM by path-coefficient algebra: (effect of
/// the treatment on the mediator) × (effect of `do(mediator)` on the
/// outcome) × `delta`, where `delta` is treated minus untreated.
pub fn closed_form_linear_nie(scm: &Scm, treatment: &str, mediator: &str, delta: f64) -> Result<f64> {
    let dag = scm.dag();
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    let m = dag.expect_role(mediator, NodeRole::Mediator)?;
    Ok(LinearCoefficients::from_scm(scm)?.nie(dag, t, m, delta))
}

/// Exact total effect for an all-linear SCM: the sum over directed paths of
/// coefficient products, times `delta`.
pub fn closed_form_linear_total_effect(scm: &Scm, treatment: &str, delta: f64) -> Result<f64> {
    let dag = scm.dag();
    let t = dag.expect_role(treatment, NodeRole::Treatment)?;
    Ok(LinearCoefficients::from_scm(scm)?.total_effect(dag, t, delta))
}
