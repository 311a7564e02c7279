//! Nested counterfactual evaluation under a single shared noise draw.
//!
//! The aleph assignment for a (treatment, mediator) pair is evaluated in two
//! passes over the same noise vector:
//!
//! 1. the treatment of interest at its treated value, every other treatment
//!    untreated; the mediator of interest's natural value `m*` is recorded;
//! 2. every treatment untreated and `do(mediator = m*)`; all other mediators
//!    respond freely and the outcome is read off.
//!
//! The paired baseline is a single pass with every treatment untreated.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::EmpiricalBaseline;
use crate::graph::{mediation_relevant, CausalDag, NodeRole};
use crate::rng::SeedStream;
use crate::scm::{NoiseVector, Scm};

#[derive(Debug, Clone, PartialEq)]
pub enum UntreatedValue {
    Fixed(f64),
    /// Resampled from an observed column once per draw.
    Observed(EmpiricalBaseline),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreatedValue {
    Fixed(f64),
    /// `untreated × multiplier`
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentSpec {
    pub node: String,
    pub untreated: UntreatedValue,
    pub treated: TreatedValue,
}

impl TreatmentSpec {
    /// Untreated 0, treated 1.
    pub fn binary(node: impl Into<String>) -> Self {
        Self::absolute(node, 0.0, 1.0)
    }

    pub fn absolute(node: impl Into<String>, untreated: f64, treated: f64) -> Self {
        TreatmentSpec {
            node: node.into(),
            untreated: UntreatedValue::Fixed(untreated),
            treated: TreatedValue::Fixed(treated),
        }
    }

    /// Untreated value drawn from `baseline`, treated value scaled by `multiplier`.
    pub fn relative_to_observed(node: impl Into<String>, baseline: EmpiricalBaseline, multiplier: f64) -> Self {
        TreatmentSpec {
            node: node.into(),
            untreated: UntreatedValue::Observed(baseline),
            treated: TreatedValue::Relative(multiplier),
        }
    }

    pub fn needs_observation(&self) -> bool {
        matches!(self.untreated, UntreatedValue::Observed(_))
    }

    /// The observation this spec consumes at the stream's current draw.
    pub fn draw_observation(&self, stream: &SeedStream) -> Option<f64> {
        match &self.untreated {
            UntreatedValue::Observed(b) => Some(b.sample(&mut stream.rng_for(&observation_key(&self.node)))),
            UntreatedValue::Fixed(_) => None,
        }
    }

    fn is_identity(&self) -> bool {
        match (&self.untreated, self.treated) {
            (UntreatedValue::Fixed(u), TreatedValue::Fixed(t)) => u == &t,
            (_, TreatedValue::Relative(k)) => k == 1.0,
            _ => false,
        }
    }
}

fn observation_key(node: &str) -> String {
    format!("\u{0}observed/{node}")
}

/// `(untreated, treated)` for one draw.
pub fn resolve_treatment_values(spec: &TreatmentSpec, observed: Option<f64>) -> Result<(f64, f64)> {
    let untreated = match &spec.untreated {
        UntreatedValue::Fixed(v) => *v,
        UntreatedValue::Observed(_) => observed.ok_or_else(|| Error::MissingObservation(spec.node.clone()))?,
    };
    let treated = match spec.treated {
        TreatedValue::Fixed(v) => v,
        TreatedValue::Relative(k) => untreated * k,
    };
    Ok((untreated, treated))
}

#[derive(Debug, Clone)]
pub struct AlephSpec {
    pub treatment_of_interest: String,
    pub mediator_of_interest: String,
    pub all_treatments: Vec<TreatmentSpec>,
}

impl AlephSpec {
    pub fn new(
        dag: &CausalDag,
        treatment: impl Into<String>,
        mediator: impl Into<String>,
        all_treatments: Vec<TreatmentSpec>,
    ) -> Result<Self> {
        let spec = AlephSpec {
            treatment_of_interest: treatment.into(),
            mediator_of_interest: mediator.into(),
            all_treatments,
        };
        spec.indices(dag)?;
        Ok(spec)
    }

    fn indices(&self, dag: &CausalDag) -> Result<(usize, usize)> {
        let t = dag.expect_role(&self.treatment_of_interest, NodeRole::Treatment)?;
        let m = dag.expect_role(&self.mediator_of_interest, NodeRole::Mediator)?;
        if !self.all_treatments.iter().any(|s| s.node == self.treatment_of_interest) {
            return Err(Error::MissingTreatmentSpec(self.treatment_of_interest.clone()));
        }
        Ok((t, m))
    }

    /// Whether the pair has any mediated path at all.
    pub fn is_relevant(&self, dag: &CausalDag) -> Result<bool> {
        mediation_relevant(dag, &self.treatment_of_interest, &self.mediator_of_interest)
    }
}

/// Checks that `specs` name every treatment exactly once and nothing else;
/// returns the node index of each spec.
pub(crate) fn spec_indices(dag: &CausalDag, specs: &[TreatmentSpec]) -> Result<Vec<usize>> {
    let mut seen = vec![false; dag.len()];
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let idx = dag.expect_role(&spec.node, NodeRole::Treatment)?;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::DuplicateTreatmentSpec(spec.node.clone()));
        }
        out.push(idx);
    }
    if let Some(t) = dag.treatments().into_iter().find(|&t| !seen[t]) {
        return Err(Error::MissingTreatmentSpec(dag.name(t).to_string()));
    }
    Ok(out)
}

pub(crate) fn specs_are_identity(specs: &[TreatmentSpec], node: &str) -> bool {
    specs
        .iter()
        .find(|s| s.node == node)
        .is_some_and(TreatmentSpec::is_identity)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Resolved {
    pub node: usize,
    pub untreated: f64,
    pub treated: f64,
}

/// Resolves every spec for one draw; observed columns are resampled from
/// `stream` when given, else looked up in `observed` by node name.
pub(crate) fn resolve_all(
    specs: &[TreatmentSpec],
    indices: &[usize],
    stream: Option<&SeedStream>,
    observed: &BTreeMap<String, f64>,
) -> Result<Vec<Resolved>> {
    specs
        .iter()
        .zip(indices)
        .map(|(spec, &node)| {
            let obs = match stream {
                Some(s) => spec.draw_observation(s),
                None => observed.get(&spec.node).copied(),
            };
            let (untreated, treated) = resolve_treatment_values(spec, obs)?;
            Ok(Resolved {
                node,
                untreated,
                treated,
            })
        })
        .collect()
}

/// Scratch buffers for repeated arm evaluations under one SCM.
pub(crate) struct ArmEvaluator<'a> {
    scm: &'a Scm,
    forced: Vec<Option<f64>>,
    out: Vec<f64>,
}

impl<'a> ArmEvaluator<'a> {
    pub fn new(scm: &'a Scm) -> Self {
        let n = scm.dag().len();
        ArmEvaluator {
            scm,
            forced: vec![None; n],
            out: vec![0.0; n],
        }
    }

    fn untreated(&mut self, treatments: &[Resolved]) {
        self.forced.iter_mut().for_each(|f| *f = None);
        for r in treatments {
            self.forced[r.node] = Some(r.untreated);
        }
    }

    fn run(&mut self, noise: &[f64]) -> Result<f64> {
        self.scm.evaluate_indexed(&self.forced, noise, &mut self.out)?;
        Ok(self.out[self.scm.dag().outcome()])
    }

    /// All treatments untreated, everything else free. Leaves the full
    /// valuation in `self.out`.
    pub fn baseline(&mut self, treatments: &[Resolved], noise: &[f64]) -> Result<f64> {
        self.untreated(treatments);
        self.run(noise)
    }

    /// Treatment `t` treated, the rest untreated, mediators free.
    pub fn treated(&mut self, treatments: &[Resolved], t: usize, noise: &[f64]) -> Result<f64> {
        self.untreated(treatments);
        self.forced[t] = Some(treated_value(treatments, t));
        self.run(noise)
    }

    pub fn aleph(&mut self, treatments: &[Resolved], t: usize, m: usize, noise: &[f64]) -> Result<f64> {
        self.treated(treatments, t, noise)?;
        let natural = self.out[m];
        self.untreated(treatments);
        self.forced[m] = Some(natural);
        self.run(noise)
    }

    /// Treatment `t` treated with every mediator frozen at its untreated
    /// natural value under the same noise.
    pub fn direct(&mut self, treatments: &[Resolved], t: usize, noise: &[f64]) -> Result<f64> {
        self.baseline(treatments, noise)?;
        let frozen: Vec<(usize, f64)> = self.scm.dag().mediators().iter().map(|&m| (m, self.out[m])).collect();
        self.forced[t] = Some(treated_value(treatments, t));
        for (m, v) in frozen {
            self.forced[m] = Some(v);
        }
        self.run(noise)
    }
}

fn treated_value(treatments: &[Resolved], t: usize) -> f64 {
    treatments
        .iter()
        .find(|r| r.node == t)
        .map(|r| r.treated)
        .expect("treatment of interest is covered by the resolved specs")
}

/// Outcome under the aleph assignment for `spec` and one noise draw.
/// Observed-column treatments are looked up in `observed`.
pub fn evaluate_aleph_observed(
    scm: &Scm,
    spec: &AlephSpec,
    observed: &BTreeMap<String, f64>,
    noise: &NoiseVector,
) -> Result<f64> {
    let dag = scm.dag();
    let (t, m) = spec.indices(dag)?;
    let indices = spec_indices(dag, &spec.all_treatments)?;
    if !spec.is_relevant(dag)? {
        log::warn!(
            "IrrelevantPair: no mediated path {} -> {} -> {}; aleph arm equals the baseline",
            spec.treatment_of_interest,
            spec.mediator_of_interest,
            dag.name(dag.outcome())
        );
    }
    let resolved = resolve_all(&spec.all_treatments, &indices, None, observed)?;
    ArmEvaluator::new(scm).aleph(&resolved, t, m, noise.as_slice())
}

pub fn evaluate_aleph(scm: &Scm, spec: &AlephSpec, noise: &NoiseVector) -> Result<f64> {
    evaluate_aleph_observed(scm, spec, &BTreeMap::new(), noise)
}

pub fn evaluate_baseline_observed(
    scm: &Scm,
    all_treatments: &[TreatmentSpec],
    observed: &BTreeMap<String, f64>,
    noise: &NoiseVector,
) -> Result<f64> {
    let indices = spec_indices(scm.dag(), all_treatments)?;
    let resolved = resolve_all(all_treatments, &indices, None, observed)?;
    ArmEvaluator::new(scm).baseline(&resolved, noise.as_slice())
}

/// Outcome with every treatment untreated and all mediators free.
pub fn evaluate_baseline(scm: &Scm, all_treatments: &[TreatmentSpec], noise: &NoiseVector) -> Result<f64> {
    evaluate_baseline_observed(scm, all_treatments, &BTreeMap::new(), noise)
}
