//! JSON model specification shared by the CLI and the C API.
//!
//! ```json
//! {
//!   "nodes": [{"name": "T", "role": "treatment"}, {"name": "M", "role": "mediator"},
//!             {"name": "O", "role": "outcome"}],
//!   "edges": [["T", "M"], ["M", "O"], ["T", "O"]],
//!   "mechanisms": {
//!     "M": {"family": "linear", "intercept": 0.0, "coefficients": {"T": 2.0}},
//!     "O": {"family": "linear", "coefficients": {"M": 3.0, "T": 1.0}}
//!   },
//!   "noise": {
//!     "M": {"family": "gaussian", "mean": 0.0, "stddev": 1.0},
//!     "O": {"family": "pmf", "values": [0, 1], "probabilities": [0.5, 0.5]}
//!   },
//!   "treatments": [{"node": "T", "untreated": 0, "treated": 1}],
//!   "observations": {"T": [12.0, 40.0, 7.5]}
//! }
//! ```
//!
//! Only `nodes` and `edges` are required for graph-level commands.
//! `mechanisms` and `noise` must cover every non-treatment node before the
//! model can be simulated. A treatment entry without `untreated` takes its
//! untreated value from `observations`; `relative` scales it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{TreatedValue, TreatmentSpec, UntreatedValue};
use crate::error::{Error, Result};
use crate::fitting::EmpiricalBaseline;
use crate::graph::{build_dag_with_order, CausalDag, NodeRole};
use crate::scm::{DiscreteTable, Mechanism, NoiseCombine, NoiseModel, Scm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub key: Vec<i64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum MechanismEntry {
    Linear {
        #[serde(default)]
        intercept: f64,
        coefficients: BTreeMap<String, f64>,
    },
    Table {
        parents: Vec<String>,
        combine: NoiseCombine,
        rows: Vec<TableRow>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseEntry {
    Gaussian {
        #[serde(default)]
        mean: f64,
        stddev: f64,
    },
    Pmf {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
    Empirical {
        residuals: Vec<f64>,
    },
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentEntry {
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub untreated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treated: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    pub nodes: Vec<NodeEntry>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mediator_order: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mechanisms: BTreeMap<String, MechanismEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub noise: BTreeMap<String, NoiseEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub treatments: Vec<TreatmentEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observations: BTreeMap<String, Vec<f64>>,
}

impl ModelSpecFile {
    /// Parses JSON; errors carry the line and column of the problem.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serialises")
    }

    pub fn to_dag(&self) -> Result<CausalDag> {
        build_dag_with_order(
            self.nodes.iter().map(|n| (n.name.clone(), n.role)),
            self.edges.iter().cloned(),
            self.mediator_order.clone(),
        )
    }

    pub fn has_parameters(&self) -> bool {
        !self.mechanisms.is_empty() || !self.noise.is_empty()
    }

    pub fn to_scm(&self) -> Result<Scm> {
        let dag = self.to_dag()?;
        let mechanisms = self
            .mechanisms
            .iter()
            .map(|(name, m)| (name.clone(), m.to_mechanism()))
            .collect();
        let noise = self
            .noise
            .iter()
            .map(|(name, n)| (name.clone(), n.to_noise()))
            .collect();
        Scm::new(dag, mechanisms, noise)
    }

    pub fn observed(&self, node: &str) -> Result<EmpiricalBaseline> {
        let values = self
            .observations
            .get(node)
            .ok_or_else(|| Error::MissingObservation(node.to_string()))?;
        EmpiricalBaseline::new(node, values.clone())
    }

    /// Treatment specs from the `treatments` section. Treatments the file
    /// does not mention default to untreated 0, treated 1.
    pub fn treatment_specs(&self, dag: &CausalDag) -> Result<Vec<TreatmentSpec>> {
        let mut out = Vec::new();
        for t in dag.treatments() {
            let name = dag.name(t);
            let spec = match self.treatments.iter().find(|e| e.node == name) {
                Some(entry) => entry.to_spec(self)?,
                None => TreatmentSpec::binary(name),
            };
            out.push(spec);
        }
        for entry in &self.treatments {
            dag.expect_role(&entry.node, NodeRole::Treatment)?;
        }
        Ok(out)
    }

    /// Serialises a fitted or hand-built SCM. Opaque mechanisms cannot be
    /// written.
    pub fn from_scm(scm: &Scm) -> Result<Self> {
        let dag = scm.dag();
        let nodes = dag
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                name: n.name.clone(),
                role: n.role,
            })
            .collect();
        let edges = dag.edges().map(|(s, t)| (s.to_string(), t.to_string())).collect();
        let declared: Vec<usize> = dag.with_role(NodeRole::Mediator);
        let mediator_order = (dag.mediators() != declared.as_slice())
            .then(|| dag.mediators().iter().map(|&m| dag.name(m).to_string()).collect());
        let mechanisms = scm
            .mechanisms()
            .iter()
            .map(|(name, m)| Ok((name.clone(), MechanismEntry::from_mechanism(name, m)?)))
            .collect::<Result<_>>()?;
        let noise = scm
            .noise_models()
            .iter()
            .map(|(name, n)| (name.clone(), NoiseEntry::from_noise(n)))
            .collect();
        Ok(ModelSpecFile {
            nodes,
            edges,
            mediator_order,
            mechanisms,
            noise,
            treatments: Vec::new(),
            observations: BTreeMap::new(),
        })
    }
}

impl TreatmentEntry {
    fn to_spec(&self, file: &ModelSpecFile) -> Result<TreatmentSpec> {
        let invalid = |reason: &str| Error::InvalidModel {
            node: self.node.clone(),
            reason: reason.to_string(),
        };
        let treated = match (self.treated, self.relative) {
            (Some(v), None) => TreatedValue::Fixed(v),
            (None, Some(k)) => TreatedValue::Relative(k),
            (None, None) => TreatedValue::Fixed(1.0),
            (Some(_), Some(_)) => return Err(invalid("treatment sets both `treated` and `relative`")),
        };
        let untreated = match self.untreated {
            Some(v) => UntreatedValue::Fixed(v),
            None if self.relative.is_some() || file.observations.contains_key(&self.node) => {
                UntreatedValue::Observed(file.observed(&self.node)?)
            }
            None => UntreatedValue::Fixed(0.0),
        };
        Ok(TreatmentSpec {
            node: self.node.clone(),
            untreated,
            treated,
        })
    }
}

impl MechanismEntry {
    fn to_mechanism(&self) -> Mechanism {
        match self {
            MechanismEntry::Linear {
                intercept,
                coefficients,
            } => Mechanism::LinearAdditive {
                intercept: *intercept,
                coefficients: coefficients.clone(),
            },
            MechanismEntry::Table { parents, combine, rows } => Mechanism::DiscreteTable(DiscreteTable {
                parents: parents.clone(),
                entries: rows.iter().map(|r| (r.key.clone(), r.value)).collect(),
                combine: *combine,
            }),
        }
    }

    fn from_mechanism(node: &str, m: &Mechanism) -> Result<Self> {
        Ok(match m {
            Mechanism::LinearAdditive {
                intercept,
                coefficients,
            } => MechanismEntry::Linear {
                intercept: *intercept,
                coefficients: coefficients.clone(),
            },
            Mechanism::DiscreteTable(t) => MechanismEntry::Table {
                parents: t.parents.clone(),
                combine: t.combine,
                rows: t
                    .entries
                    .iter()
                    .map(|(k, v)| TableRow {
                        key: k.clone(),
                        value: *v,
                    })
                    .collect(),
            },
            Mechanism::Opaque(_) => {
                return Err(Error::InvalidModel {
                    node: node.to_string(),
                    reason: "opaque mechanisms cannot be serialised".into(),
                })
            }
        })
    }
}

impl NoiseEntry {
    fn to_noise(&self) -> NoiseModel {
        match self {
            NoiseEntry::Gaussian { mean, stddev } => NoiseModel::gaussian(*mean, *stddev),
            NoiseEntry::Pmf { values, probabilities } => NoiseModel::pmf(values.clone(), probabilities.clone()),
            NoiseEntry::Empirical { residuals } => NoiseModel::empirical(residuals.clone()),
            NoiseEntry::Degenerate => NoiseModel::Degenerate,
        }
    }

    fn from_noise(n: &NoiseModel) -> Self {
        match n {
            NoiseModel::Gaussian { mean, stddev } => NoiseEntry::Gaussian {
                mean: *mean,
                stddev: *stddev,
            },
            NoiseModel::DiscretePmf { values, probabilities } => NoiseEntry::Pmf {
                values: values.clone(),
                probabilities: probabilities.clone(),
            },
            NoiseModel::Empirical { residuals } => NoiseEntry::Empirical {
                residuals: residuals.to_vec(),
            },
            NoiseModel::Degenerate => NoiseEntry::Degenerate,
        }
    }
}
