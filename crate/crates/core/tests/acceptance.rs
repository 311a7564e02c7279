//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use causal_nie::fitting::linear_nie_fit_std_error;
use causal_nie::graph::permitted_edges;
use causal_nie::model_file::ModelSpecFile;
use causal_nie::oracle::exact_expected_outcome_in_order;
use causal_nie::prelude::*;
use causal_nie::report::AnalysisReport;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn check_time(elapsed: Duration, budget: Duration, mut o: Outcome) -> Outcome {
    if elapsed > budget {
        o.pass = false;
        o.detail = format!("{}; took {:.2?}, budget {:.0?}", o.detail, elapsed, budget);
    }
    o
}

fn dag_count_vs_enumeration() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checked = 0;
    for i in 1..=2u64 {
        for j in 0..=3u64 {
            let exponent = causal_nie::graph::configuration_exponent(i, j).unwrap();
            if exponent > 20 {
                continue;
            }
            let count = count_dag_configurations(i, j).unwrap();
            let listed = enumerate_dag_configurations(i as usize, j as usize, None)
                .unwrap()
                .count();
            // every listed graph must be a valid, distinct subset of the permitted edges
            if count != BigUint::from(listed) || permitted_edges(i as usize, j as usize).len() as u64 != exponent {
                failures.push(format!("(I={i},J={j}) formula {count} vs enumerated {listed}"));
            }
            checked += 1;
        }
    }
    let o = if failures.is_empty() {
        outcome(true, format!("{checked} (I,J) pairs match"))
    } else {
        outcome(false, failures.join("; "))
    };
    check_time(start.elapsed(), Duration::from_secs(5), o)
}

fn three_node_recovery() -> Outcome {
    let start = Instant::now();
    let scm = ModelSpecFile::parse(&std::fs::read_to_string(fixture("three_node.json")).unwrap())
        .unwrap()
        .to_scm()
        .unwrap();
    let specs = [TreatmentSpec::binary("T")];
    let cfg = McConfig::new(100_000, 2024);
    let nie = estimate_nie(&scm, "T", "M", &specs, &cfg).unwrap();
    let nde = estimate_nde(&scm, "T", &specs, &cfg).unwrap();
    let te = estimate_total_effect(&scm, "T", &specs, &cfg).unwrap();
    let gap = nde.point + nie.point - te.point;
    let combined = (nde.std_error.powi(2) + nie.std_error.powi(2) + te.std_error.powi(2)).sqrt();
    let pass = within_3se(nie.point, nie.std_error, 6.0)
        && (nie.point - 6.0).abs() <= 0.06
        && within_3se(nde.point, nde.std_error, 1.0)
        && within_3se(gap, combined, 0.0);
    let o = outcome(
        pass,
        format!(
            "NIE {:.6} (se {:.2e}), NDE {:.6} (se {:.2e}), TE {:.6}, NDE+NIE-TE {:.2e}",
            nie.point, nie.std_error, nde.point, nde.std_error, te.point, gap
        ),
    );
    check_time(start.elapsed(), Duration::from_secs(2), o)
}

fn series_equality() -> Outcome {
    let mut rng = rng(301);
    let specs = [TreatmentSpec::binary("T")];
    let mut failures = Vec::new();
    for case in 0..20 {
        let len = rng.random_range(2..=5usize);
        let scm = random_chain(&mut rng, len);
        let alephs: Vec<AlephSpec> = chain_names(len)
            .into_iter()
            .map(|m| AlephSpec::new(scm.dag(), "T", m, specs.to_vec()).unwrap())
            .collect();
        let mut stream = SeedStream::new(case);
        let mut draws_equal = true;
        for _ in 0..200 {
            let noise = draw_noise(&scm, &stream);
            let outcomes: Vec<u64> = alephs
                .iter()
                .map(|a| evaluate_aleph(&scm, a, &noise).unwrap().to_bits())
                .collect();
            draws_equal &= outcomes.windows(2).all(|w| w[0] == w[1]);
            stream.advance();
        }
        let cfg = McConfig::new(5_000, case);
        let nies: Vec<u64> = chain_names(len)
            .iter()
            .map(|m| estimate_nie(&scm, "T", m, &specs, &cfg).unwrap().point.to_bits())
            .collect();
        let estimates_equal = nies.windows(2).all(|w| w[0] == w[1]);
        if !(draws_equal && estimates_equal) {
            failures.push(format!("case {case} (length {len})"));
        }
    }
    if failures.is_empty() {
        outcome(
            true,
            "20 chains: per-draw aleph outcomes and NIE estimates bit-identical",
        )
    } else {
        outcome(false, failures.join(", "))
    }
}

fn parallel_decomposition() -> Outcome {
    let mut rng = rng(404);
    let specs = [TreatmentSpec::binary("T")];
    let mut failures = Vec::new();
    let mut worst_closed_form = 0.0f64;
    for case in 0..20 {
        let width = rng.random_range(2..=4usize);
        let scm = random_linear_parallel(&mut rng, width);
        let cfg = McConfig::new(20_000, case);
        let matrix = estimate_all_nies(&scm, &specs, &cfg).unwrap();
        let te = estimate_total_effect(&scm, "T", &specs, &cfg).unwrap();
        let sum: f64 = matrix.iter().map(|(_, _, e)| e.point).sum();
        let var: f64 = matrix.iter().map(|(_, _, e)| e.std_error.powi(2)).sum::<f64>() + te.std_error.powi(2);
        if !within_3se(sum, var.sqrt(), te.point) {
            failures.push(format!("case {case}: sum {sum} vs TE {}", te.point));
        }
        for (t, m, e) in matrix.iter() {
            let closed = closed_form_linear_nie(&scm, t, m, 1.0).unwrap();
            // the per-draw difference is the same linear sum for every draw
            let diff = (closed - e.point).abs();
            worst_closed_form = worst_closed_form.max(diff);
            if diff > 1e-12 {
                failures.push(format!("case {case} {m}: closed form {closed} vs {}", e.point));
            }
        }
    }
    if failures.is_empty() {
        outcome(
            true,
            format!("20 parallel SCMs decompose; worst closed-form gap {worst_closed_form:.1e}"),
        )
    } else {
        outcome(false, failures.join("; "))
    }
}

fn confounder_case() -> Outcome {
    let scm = ModelSpecFile::parse(&std::fs::read_to_string(fixture("confounder.json")).unwrap())
        .unwrap()
        .to_scm()
        .unwrap();
    let specs = [TreatmentSpec::binary("T")];
    let cfg = McConfig::new(100_000, 5);
    let m1 = estimate_nie(&scm, "T", "M1", &specs, &cfg).unwrap();
    let m2 = estimate_nie(&scm, "T", "M2", &specs, &cfg).unwrap();
    outcome(
        within_3se(m1.point, m1.std_error, 1.0) && within_3se(m2.point, m2.std_error, 2.5),
        format!("NIE(T,M1) {:.6}, NIE(T,M2) {:.6}", m1.point, m2.point),
    )
}

fn discrete_oracle_equivalence() -> Outcome {
    let mut rng = rng(606);
    let mut agree = 0;
    let mut order_failures = Vec::new();
    let mut misses = Vec::new();
    for case in 0..100u64 {
        let scm = random_binary(&mut rng);
        let specs = binary_specs(&scm);
        let dag = scm.dag();
        let treatments = dag.treatments();
        let t = dag.name(treatments[rng.random_range(0..treatments.len())]).to_string();
        let mediators = dag.mediators();
        let m = dag.name(mediators[rng.random_range(0..mediators.len())]).to_string();

        let exact = exact_nie(&scm, &t, &m, &specs).unwrap();
        let mc = estimate_nie(&scm, &t, &m, &specs, &McConfig::new(50_000, case)).unwrap();
        if within_3se(mc.point, mc.std_error, exact) {
            agree += 1;
        } else {
            misses.push(format!("case {case}: mc {:.4} exact {:.4}", mc.point, exact));
        }

        let aleph = AlephSpec::new(dag, &t, &m, specs.clone()).unwrap();
        let size = causal_nie::oracle::support_size(&scm).unwrap();
        let mut order: Vec<u64> = (0..size).collect();
        order.shuffle(&mut rng);
        for arm in [OracleArm::Aleph(&aleph), OracleArm::Baseline(&specs)] {
            let forward = exact_expected_outcome(&scm, arm).unwrap();
            let shuffled = exact_expected_outcome_in_order(&scm, arm, &order).unwrap();
            if (forward - shuffled).abs() > 1e-12 {
                order_failures.push(format!("case {case}: {forward} vs {shuffled}"));
            }
        }
    }
    let mut detail = format!("{agree}/100 within 3 se of the exact NIE");
    if !misses.is_empty() {
        detail.push_str(&format!(" (misses: {})", misses.join("; ")));
    }
    if !order_failures.is_empty() {
        detail.push_str(&format!(
            "; enumeration order changed results: {}",
            order_failures.join("; ")
        ));
    }
    outcome(agree >= 97 && order_failures.is_empty(), detail)
}

const MEDIATORS: [&str; 3] = ["RouteAffinity", "ArrivalTime", "LoadingTime"];

fn fit_round_trip() -> Outcome {
    let start = Instant::now();
    let generator = ModelSpecFile::parse(&std::fs::read_to_string(fixture("logistics_model.json")).unwrap())
        .unwrap()
        .to_scm()
        .unwrap();

    // observational rows: experience spread uniformly over 20..220
    let mut rng = rng(707);
    let mut rows = Vec::with_capacity(10_000);
    for k in 0..10_000u64 {
        let experience = rng.random_range(20.0..220.0);
        let noise = draw_noise(&generator, &SeedStream::at(707, k));
        let values = evaluate(
            &generator,
            &BTreeMap::from([("DriverExp".to_string(), experience)]),
            &noise,
        )
        .unwrap();
        rows.push(values);
    }
    let mut csv = Vec::new();
    Dataset::from_valuations(&rows).unwrap().write_csv(&mut csv).unwrap();
    let data = load_table(csv.as_slice()).unwrap();

    let (fitted, report) = fit_scm(generator.dag(), &data, NoiseMode::Empirical).unwrap();
    let mut failures = Vec::new();
    let mut worst_coef = 0.0f64;
    for (node, mech) in generator.mechanisms() {
        let Mechanism::LinearAdditive { coefficients, .. } = mech else {
            unreachable!()
        };
        let fit = report.node(node).unwrap();
        for (parent, truth) in coefficients {
            let fitted = fit.coefficients[parent];
            let rel = ((fitted - truth) / truth).abs();
            worst_coef = worst_coef.max(rel);
            if rel > 0.05 {
                failures.push(format!("{parent}->{node} fitted {fitted} vs {truth}"));
            }
        }
    }

    // analyse through the serialised model, as the command line does
    let mut model = ModelSpecFile::from_scm(&fitted).unwrap();
    model
        .observations
        .insert("DriverExp".into(), data.column("DriverExp").unwrap());
    let model = ModelSpecFile::parse(&model.to_json()).unwrap();
    let scm = model.to_scm().unwrap();
    let specs = vec![TreatmentSpec::relative_to_observed(
        "DriverExp",
        model.observed("DriverExp").unwrap(),
        1.5,
    )];
    let analysis = AnalysisReport::build(&scm, &specs, &McConfig::new(100_000, 7), "fit-round-trip".into()).unwrap();

    let experience = data.column("DriverExp").unwrap();
    let delta = 0.5 * experience.iter().sum::<f64>() / experience.len() as f64;
    let mut nies = Vec::new();
    for row in &analysis.nie {
        let truth = closed_form_linear_nie(&generator, "DriverExp", &row.mediator, delta).unwrap();
        let fit_se = linear_nie_fit_std_error(&scm, &report, "DriverExp", &row.mediator, delta).unwrap();
        let combined = (row.std_error.powi(2) + fit_se.powi(2)).sqrt();
        if !within_3se(row.nie, combined, truth) {
            failures.push(format!(
                "NIE {} {:.4} vs generator {truth:.4} (se {combined:.3})",
                row.mediator, row.nie
            ));
        }
        if row.nie >= 0.0 || truth >= 0.0 {
            failures.push(format!("NIE {} not negative: {:.4}", row.mediator, row.nie));
        }
        nies.push(format!("{} {:.3}", row.mediator, row.nie));
    }
    if nies.len() != MEDIATORS.len() {
        failures.push(format!("expected {} NIE rows, got {}", MEDIATORS.len(), nies.len()));
    }
    let o = if failures.is_empty() {
        outcome(
            true,
            format!(
                "worst coefficient error {:.2}%; NIEs {}",
                100.0 * worst_coef,
                nies.join(", ")
            ),
        )
    } else {
        outcome(false, failures.join("; "))
    };
    check_time(start.elapsed(), Duration::from_secs(10), o)
}

fn determinism() -> Outcome {
    let run = |workers: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_causal-nie"));
        cmd.args(["analyze", "--model"])
            .arg(fixture("logistics_model.json"))
            .args(["--treatment", "DriverExp=*1.5", "--samples", "20000", "--seed", "99"]);
        if let Some(w) = workers {
            cmd.args(["--workers", w]);
        }
        let out = cmd.output().expect("binary runs");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let reference = run(None);
    let variants = [run(None), run(Some("1")), run(Some("3")), run(Some("8"))];
    let identical = variants.iter().all(|v| *v == reference);
    outcome(
        identical && !reference.is_empty(),
        format!("{} reports of {} bytes compared", variants.len() + 1, reference.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("dag count vs enumeration", dag_count_vs_enumeration),
        ("three-node recovery", three_node_recovery),
        ("series equality", series_equality),
        ("parallel decomposition", parallel_decomposition),
        ("confounder case", confounder_case),
        ("discrete oracle equivalence", discrete_oracle_equivalence),
        ("fit round trip", fit_round_trip),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        println!(
            "{} [{}] {name} ({:.2?}): {}",
            if result.pass { "PASS" } else { "FAIL" },
            n + 1,
            elapsed,
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
