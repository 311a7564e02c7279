//! Exact expectations for models whose noise has finite support.
//!
//! Every joint noise configuration is enumerated, evaluated with the same
//! arm logic the Monte Carlo estimators use, and weighted by its
//! probability. Used as ground truth for the estimators.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::counterfactual::{resolve_all, spec_indices, AlephSpec, ArmEvaluator, Resolved, TreatmentSpec};
use crate::error::{Error, Result};
use crate::graph::NodeRole;
use crate::scm::Scm;

/// Largest joint noise support evaluated exactly.
pub const SUPPORT_CAP: u128 = 1_000_000;

const CHUNK: u64 = 4096;

/// Which arm's expected outcome to compute.
#[derive(Debug, Clone, Copy)]
pub enum OracleArm<'a> {
    /// Plain intervention map; every treatment must be set or defaulted.
    Interventions(&'a BTreeMap<String, f64>),
    /// All treatments untreated.
    Baseline(&'a [TreatmentSpec]),
    Aleph(&'a AlephSpec),
}

struct Support {
    nodes: Vec<usize>,
    atoms: Vec<Vec<(f64, f64)>>,
    total: u64,
}

fn joint_support(scm: &Scm) -> Result<Support> {
    let dag = scm.dag();
    let mut nodes = Vec::new();
    let mut atoms = Vec::new();
    let mut total: u128 = 1;
    for idx in 0..dag.len() {
        let Some(model) = scm.noise_model_at(idx) else { continue };
        let support = model
            .finite_support()
            .ok_or_else(|| Error::InfiniteSupport(dag.name(idx).to_string()))?;
        total = total.saturating_mul(support.len() as u128);
        if total > SUPPORT_CAP {
            return Err(Error::SupportTooLarge(total));
        }
        nodes.push(idx);
        atoms.push(support);
    }
    Ok(Support {
        nodes,
        atoms,
        total: total as u64,
    })
}

impl Support {
    /// Mixed-radix decode of configuration `c` into a noise vector and its
    /// probability.
    fn configuration(&self, mut c: u64, noise: &mut [f64]) -> f64 {
        let mut p = 1.0;
        for (k, &node) in self.nodes.iter().enumerate().rev() {
            let radix = self.atoms[k].len() as u64;
            let (v, w) = self.atoms[k][(c % radix) as usize];
            c /= radix;
            noise[node] = v;
            p *= w;
        }
        p
    }
}

enum PreparedArm {
    Forced(Vec<Option<f64>>),
    Baseline(Vec<Resolved>),
    Aleph(Vec<Resolved>, usize, usize),
}

fn prepare(scm: &Scm, arm: OracleArm<'_>) -> Result<PreparedArm> {
    let dag = scm.dag();
    let no_obs = BTreeMap::new();
    Ok(match arm {
        OracleArm::Interventions(map) => PreparedArm::Forced(scm.forced_from_map(map)?),
        OracleArm::Baseline(specs) => {
            let idx = spec_indices(dag, specs)?;
            PreparedArm::Baseline(resolve_all(specs, &idx, None, &no_obs)?)
        }
        OracleArm::Aleph(spec) => {
            let t = dag.expect_role(&spec.treatment_of_interest, NodeRole::Treatment)?;
            let m = dag.expect_role(&spec.mediator_of_interest, NodeRole::Mediator)?;
            let idx = spec_indices(dag, &spec.all_treatments)?;
            PreparedArm::Aleph(resolve_all(&spec.all_treatments, &idx, None, &no_obs)?, t, m)
        }
    })
}

fn outcome(scm: &Scm, ev: &mut ArmEvaluator<'_>, arm: &PreparedArm, noise: &[f64], out: &mut [f64]) -> Result<f64> {
    match arm {
        PreparedArm::Forced(forced) => {
            scm.evaluate_indexed(forced, noise, out)?;
            Ok(out[scm.dag().outcome()])
        }
        PreparedArm::Baseline(r) => ev.baseline(r, noise),
        PreparedArm::Aleph(r, t, m) => ev.aleph(r, *t, *m, noise),
    }
}

/// Running Neumaier sum.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: Accumulator) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn accumulate(
    scm: &Scm,
    support: &Support,
    arm: &PreparedArm,
    configs: impl Iterator<Item = u64>,
) -> Result<Accumulator> {
    let n = scm.dag().len();
    let mut ev = ArmEvaluator::new(scm);
    let mut noise = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut acc = Accumulator::default();
    for c in configs {
        let p = support.configuration(c, &mut noise);
        acc.add(p * outcome(scm, &mut ev, arm, &noise, &mut out)?);
    }
    Ok(acc)
}

/// `Σ_u P(u) · outcome(arm, u)` over the joint noise support. Work is split
/// into fixed chunks merged in order, so the result does not depend on the
/// thread count.
pub fn exact_expected_outcome(scm: &Scm, arm: OracleArm<'_>) -> Result<f64> {
    let support = joint_support(scm)?;
    let prepared = prepare(scm, arm)?;
    let chunks: Vec<Accumulator> = (0..support.total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|k| {
            accumulate(
                scm,
                &support,
                &prepared,
                k * CHUNK..((k + 1) * CHUNK).min(support.total),
            )
        })
        .collect::<Result<_>>()?;
    let mut total = Accumulator::default();
    for c in chunks {
        total.merge(c);
    }
    Ok(total.value())
}

/// Same expectation, visiting configurations in the order given by
/// `permutation` (a permutation of `0..support size`).
pub fn exact_expected_outcome_in_order(scm: &Scm, arm: OracleArm<'_>, permutation: &[u64]) -> Result<f64> {
    let support = joint_support(scm)?;
    if permutation.len() as u64 != support.total {
        return Err(Error::InvalidConfig(format!(
            "permutation has {} entries for a support of {}",
            permutation.len(),
            support.total
        )));
    }
    let prepared = prepare(scm, arm)?;
    Ok(accumulate(scm, &support, &prepared, permutation.iter().copied())?.value())
}

/// Number of joint noise configurations, or an error past the cap.
pub fn support_size(scm: &Scm) -> Result<u64> {
    Ok(joint_support(scm)?.total)
}

/// Exact NIE: expected aleph outcome minus expected baseline outcome.
pub fn exact_nie(scm: &Scm, treatment: &str, mediator: &str, specs: &[TreatmentSpec]) -> Result<f64> {
    let aleph = AlephSpec::new(scm.dag(), treatment, mediator, specs.to_vec())?;
    let treated = exact_expected_outcome(scm, OracleArm::Aleph(&aleph))?;
    let baseline = exact_expected_outcome(scm, OracleArm::Baseline(specs))?;
    Ok(treated - baseline)
}
