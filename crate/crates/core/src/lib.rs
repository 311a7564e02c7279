//! Structural causal models and generalized natural indirect effects (NIEs)
//! for DAGs with any number of treatments and mediators.
//!
//! The pipeline runs graph → structural model → paired counterfactual arms →
//! Monte Carlo effect estimates, with an exact enumeration oracle for
//! finite-noise models and a least-squares path from observational data.
//!
//! ```
//! use std::collections::BTreeMap;
//! use causal_nie::prelude::*;
//!
//! let dag = build_dag(
//!     [("T", NodeRole::Treatment), ("M", NodeRole::Mediator), ("O", NodeRole::Outcome)],
//!     [("T", "M"), ("M", "O"), ("T", "O")],
//! )?;
//! let scm = Scm::new(
//!     dag,
//!     BTreeMap::from([
//!         ("M".into(), Mechanism::linear(0.0, [("T", 2.0)])),
//!         ("O".into(), Mechanism::linear(0.0, [("M", 3.0), ("T", 1.0)])),
//!     ]),
//!     BTreeMap::from([
//!         ("M".into(), NoiseModel::standard_normal()),
//!         ("O".into(), NoiseModel::standard_normal()),
//!     ]),
//! )?;
//! let nie = estimate_nie(&scm, "T", "M", &[TreatmentSpec::binary("T")], &McConfig::new(1_000, 7))?;
//! assert!((nie.point - 6.0).abs() < 1e-9);
//! # Ok::<(), causal_nie::Error>(())
//! ```

pub mod cli;
pub mod counterfactual;
pub mod error;
pub mod fitting;
pub mod graph;
pub mod mediation;
pub mod model_file;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod scm;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::counterfactual::{
        evaluate_aleph, evaluate_baseline, resolve_treatment_values, AlephSpec, TreatedValue, TreatmentSpec,
        UntreatedValue,
    };
    pub use crate::error::{Error, Result};
    pub use crate::fitting::{
        fit_scm, load_table, observed_baseline, Dataset, EmpiricalBaseline, FitReport, NoiseMode,
    };
    pub use crate::graph::{
        build_dag, build_dag_with_order, classify_edges, count_dag_configurations, enumerate_dag_configurations,
        mediation_relevant, topological_order, CausalDag, EdgeCatalog, NodeRole,
    };
    pub use crate::mediation::{
        closed_form_linear_nie, closed_form_linear_total_effect, estimate_all_nies, estimate_nde, estimate_nie,
        estimate_total_effect, EffectEstimate, EffectKind, McConfig, NieMatrix,
    };
    pub use crate::oracle::{exact_expected_outcome, exact_nie, OracleArm};
    pub use crate::rng::SeedStream;
    pub use crate::scm::{
        draw_noise, evaluate, simulate, DiscreteTable, Mechanism, NoiseCombine, NoiseModel, NoiseVector,
        OpaqueMechanism, Scm, Valuation,
    };
}
