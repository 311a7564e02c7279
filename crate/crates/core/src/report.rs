//! Analysis reports: the full NIE matrix plus per-treatment total (and, for
//! single-treatment graphs, direct) effects, with run metadata.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counterfactual::{TreatedValue, TreatmentSpec, UntreatedValue};
use crate::error::Result;
use crate::mediation::{estimate_all_nies, estimate_nde, estimate_total_effect, EffectKind, McConfig};
use crate::scm::Scm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentLine {
    pub node: String,
    pub untreated: String,
    pub treated: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NieRow {
    pub treatment: String,
    pub mediator: String,
    pub nie: f64,
    pub std_error: f64,
    pub n_draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub treatment: String,
    pub effect: EffectKind,
    pub estimate: f64,
    pub std_error: f64,
    pub n_draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub seed: u64,
    pub n_draws: u64,
    pub model_sha256: String,
    pub treatments: Vec<TreatmentLine>,
    pub nie: Vec<NieRow>,
    pub effects: Vec<EffectRow>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn describe(spec: &TreatmentSpec) -> TreatmentLine {
    let untreated = match &spec.untreated {
        UntreatedValue::Fixed(v) => format!("{v}"),
        UntreatedValue::Observed(b) => format!("observed({})", b.column()),
    };
    let treated = match spec.treated {
        TreatedValue::Fixed(v) => format!("{v}"),
        TreatedValue::Relative(k) => format!("untreated*{k}"),
    };
    TreatmentLine {
        node: spec.node.clone(),
        untreated,
        treated,
    }
}

impl AnalysisReport {
    pub fn build(scm: &Scm, specs: &[TreatmentSpec], cfg: &McConfig, model_sha256: String) -> Result<Self> {
        let matrix = estimate_all_nies(scm, specs, cfg)?;
        let nie = matrix
            .iter()
            .map(|(t, m, e)| NieRow {
                treatment: t.to_string(),
                mediator: m.to_string(),
                nie: e.point,
                std_error: e.std_error,
                n_draws: e.n_draws,
            })
            .collect();
        let single = matrix.treatments.len() == 1;
        let mut effects = Vec::new();
        for t in &matrix.treatments {
            let mut estimates = vec![estimate_total_effect(scm, t, specs, cfg)?];
            if single {
                estimates.push(estimate_nde(scm, t, specs, cfg)?);
            }
            effects.extend(estimates.into_iter().map(|e| EffectRow {
                treatment: t.clone(),
                effect: e.kind,
                estimate: e.point,
                std_error: e.std_error,
                n_draws: e.n_draws,
            }));
        }
        Ok(AnalysisReport {
            seed: cfg.seed,
            n_draws: cfg.n_draws,
            model_sha256,
            treatments: specs.iter().map(describe).collect(),
            nie,
            effects,
            warnings: matrix.warnings,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Tab-separated report; numbers at six significant digits.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# seed\t{}", self.seed);
        let _ = writeln!(s, "# n_draws\t{}", self.n_draws);
        let _ = writeln!(s, "# model_sha256\t{}", self.model_sha256);
        for t in &self.treatments {
            let _ = writeln!(s, "# treatment\t{}\t{}\t{}", t.node, t.untreated, t.treated);
        }
        let _ = writeln!(s, "treatment\tmediator\tnie\tstd_error\tn_draws");
        for r in &self.nie {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.treatment,
                r.mediator,
                format_sig6(r.nie),
                format_sig6(r.std_error),
                r.n_draws
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "treatment\teffect\testimate\tstd_error\tn_draws");
        for r in &self.effects {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                r.treatment,
                r.effect.label(),
                format_sig6(r.estimate),
                format_sig6(r.std_error),
                r.n_draws
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "# warning\t{w}");
        }
        s
    }
}

/// Six significant digits; positional notation for magnitudes in
/// [1e-4, 1e6), scientific otherwise.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // round first so 9.999996 is classed by its rounded exponent
    let sci = format!("{x:.5e}");
    let rounded: f64 = sci.parse().expect("formatted float parses");
    let exp = rounded.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        format!("{rounded:.decimals$}")
    } else {
        sci
    }
}
