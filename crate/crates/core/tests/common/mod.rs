#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use causal_nie::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn nonzero_coef(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.2..2.5);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

pub fn chain_names(len: usize) -> Vec<String> {
    (1..=len).map(|j| format!("M{j}")).collect()
}

/// T → M1 → … → Mlen → O with a random mix of linear and monotone
/// nonlinear mechanisms.
pub fn random_chain(rng: &mut ChaCha8Rng, len: usize) -> Scm {
    let mediators = chain_names(len);
    let mut nodes = vec![("T".to_string(), NodeRole::Treatment)];
    nodes.extend(mediators.iter().map(|m| (m.clone(), NodeRole::Mediator)));
    nodes.push(("O".to_string(), NodeRole::Outcome));
    let path: Vec<String> = nodes.iter().map(|(n, _)| n.clone()).collect();
    let edges: Vec<(String, String)> = path.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let dag = build_dag(nodes, edges).unwrap();

    let mut mechanisms = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for w in path.windows(2) {
        let (parent, child) = (w[0].clone(), w[1].clone());
        let a = nonzero_coef(rng);
        let b = rng.random_range(-1.0..1.0);
        let mech = match rng.random_range(0..4) {
            0 => Mechanism::linear(b, [(parent.clone(), a)]),
            1 => Mechanism::Opaque(OpaqueMechanism::new("tanh", vec![parent.clone()], move |p, u| {
                (a * p[0]).tanh() + b + u
            })),
            2 => Mechanism::Opaque(OpaqueMechanism::new("cubic", vec![parent.clone()], move |p, u| {
                a.abs() * p[0] * p[0] * p[0] + p[0] + b.abs() * u
            })),
            _ => Mechanism::Opaque(OpaqueMechanism::new("exp", vec![parent.clone()], move |p, u| {
                (0.3 * p[0]).clamp(-20.0, 20.0).exp() * a.abs() + u
            })),
        };
        mechanisms.insert(child.clone(), mech);
        noise.insert(child, NoiseModel::gaussian(0.0, rng.random_range(0.3..1.5)));
    }
    Scm::new(dag, mechanisms, noise).unwrap()
}

/// T → Mj → O for every j, no direct edge, random linear coefficients.
pub fn random_linear_parallel(rng: &mut ChaCha8Rng, width: usize) -> Scm {
    let mediators = chain_names(width);
    let mut nodes = vec![("T".to_string(), NodeRole::Treatment)];
    nodes.extend(mediators.iter().map(|m| (m.clone(), NodeRole::Mediator)));
    nodes.push(("O".to_string(), NodeRole::Outcome));
    let mut edges = Vec::new();
    let mut mechanisms = BTreeMap::new();
    let mut noise = BTreeMap::new();
    let mut outcome_terms = Vec::new();
    for m in &mediators {
        edges.push(("T".to_string(), m.clone()));
        edges.push((m.clone(), "O".to_string()));
        mechanisms.insert(
            m.clone(),
            Mechanism::linear(rng.random_range(-1.0..1.0), [("T", nonzero_coef(rng))]),
        );
        noise.insert(m.clone(), NoiseModel::gaussian(0.0, rng.random_range(0.3..2.0)));
        outcome_terms.push((m.clone(), nonzero_coef(rng)));
    }
    mechanisms.insert(
        "O".to_string(),
        Mechanism::linear(rng.random_range(-1.0..1.0), outcome_terms),
    );
    noise.insert("O".to_string(), NoiseModel::gaussian(0.0, 1.0));
    Scm::new(build_dag(nodes, edges).unwrap(), mechanisms, noise).unwrap()
}

/// Random linear-Gaussian mechanisms on a fixed DAG.
pub fn random_linear_on(rng: &mut ChaCha8Rng, dag: CausalDag) -> Scm {
    let mut mechanisms = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for idx in 0..dag.len() {
        if dag.role(idx) == NodeRole::Treatment {
            continue;
        }
        let terms: Vec<(String, f64)> = dag
            .parent_names(idx)
            .into_iter()
            .map(|p| (p.to_string(), nonzero_coef(rng)))
            .collect();
        mechanisms.insert(
            dag.name(idx).to_string(),
            Mechanism::linear(rng.random_range(-1.0..1.0), terms),
        );
        noise.insert(
            dag.name(idx).to_string(),
            NoiseModel::gaussian(0.0, rng.random_range(0.3..1.5)),
        );
    }
    Scm::new(dag, mechanisms, noise).unwrap()
}

/// Binary SCM with at most six nodes: random permitted edges, random
/// truth tables, Bernoulli noise folded in by XOR, OR or AND.
pub fn random_binary(rng: &mut ChaCha8Rng) -> Scm {
    let n_t = rng.random_range(1..=2usize);
    let n_m = rng.random_range(1..=(5 - n_t));
    let candidates = causal_nie::graph::permitted_edges(n_t, n_m);
    loop {
        let edges: Vec<(String, String)> = candidates.iter().filter(|_| rng.random_bool(0.55)).cloned().collect();
        let mut nodes: Vec<(String, NodeRole)> = (1..=n_t).map(|i| (format!("T{i}"), NodeRole::Treatment)).collect();
        nodes.extend((1..=n_m).map(|j| (format!("M{j}"), NodeRole::Mediator)));
        nodes.push(("O".to_string(), NodeRole::Outcome));
        let dag = build_dag(nodes, edges).unwrap();
        // keep graphs where T1 reaches O through M1 so most cases carry an effect
        if !mediation_relevant(&dag, "T1", "M1").unwrap() {
            continue;
        }
        let mut mechanisms = BTreeMap::new();
        let mut noise = BTreeMap::new();
        for idx in 0..dag.len() {
            if dag.role(idx) == NodeRole::Treatment {
                continue;
            }
            let parents: Vec<String> = dag.parent_names(idx).into_iter().map(String::from).collect();
            let table: Vec<f64> = (0..1usize << parents.len())
                .map(|_| f64::from(rng.random::<bool>() as u8))
                .collect();
            let combine = match rng.random_range(0..3) {
                0 => NoiseCombine::Xor,
                1 => NoiseCombine::Or,
                _ => NoiseCombine::And,
            };
            let p_one = if combine == NoiseCombine::And {
                rng.random_range(0.6..0.95)
            } else {
                rng.random_range(0.05..0.4)
            };
            let mech = DiscreteTable::binary(parents, combine, move |key| {
                let slot = key.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                table[slot]
            });
            mechanisms.insert(dag.name(idx).to_string(), Mechanism::DiscreteTable(mech));
            noise.insert(dag.name(idx).to_string(), NoiseModel::bernoulli(p_one));
        }
        return Scm::new(dag, mechanisms, noise).unwrap();
    }
}

pub fn binary_specs(scm: &Scm) -> Vec<TreatmentSpec> {
    let dag = scm.dag();
    dag.treatments()
        .into_iter()
        .map(|t| TreatmentSpec::binary(dag.name(t)))
        .collect()
}

/// Rounding allowance for effects whose paired differences are constant,
/// where the reported standard error is pure float noise.
pub fn floor(target: f64) -> f64 {
    1e-9 * (1.0 + target.abs())
}

pub fn within_3se(estimate: f64, se: f64, target: f64) -> bool {
    (estimate - target).abs() <= 3.0 * se + floor(target)
}
