//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage
//! or parse error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::json;

use crate::counterfactual::{TreatedValue, TreatmentSpec, UntreatedValue};
use crate::error::{Error, Result};
use crate::fitting::{fit_scm, load_table_path, Dataset, NoiseMode};
use crate::graph::{count_dag_configurations, enumerate_dag_configurations, topological_order, NodeRole};
use crate::mediation::{McConfig, DEFAULT_DRAWS};
use crate::model_file::ModelSpecFile;
use crate::oracle::exact_nie;
use crate::report::{sha256_hex, AnalysisReport};
use crate::rng::SeedStream;
use crate::scm::Scm;

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "CAUSAL_NIE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "causal-nie",
    version,
    about = "Generalized natural indirect effects for treatment/mediator DAGs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a graph or model file and print its edge catalog.
    Validate {
        /// Graph or model specification (JSON).
        graph: PathBuf,
    },
    /// Count (and optionally list) every DAG configuration for I treatments and J mediators.
    CountDags {
        #[arg(long)]
        treatments: u64,
        #[arg(long)]
        mediators: u64,
        /// List every edge set, one per line.
        #[arg(long)]
        enumerate: bool,
        /// Stop the listing after this many graphs.
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Fit linear mechanisms for a graph from tabular data.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = NoiseMode::Empirical)]
        noise: NoiseMode,
    },
    /// Estimate every NIE plus total and direct effects.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        /// `NAME=U:T` for absolute values, `NAME=*K` to scale the observed value by K.
        #[arg(long = "treatment")]
        treatments: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        samples: u64,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::Tsv)]
        format: ReportFormat,
        /// Worker threads; results do not depend on this.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Exact NIEs by enumerating a finite noise support.
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "treatment")]
        treatments: Vec<String>,
    },
    /// Draw synthetic observational rows from a model as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { graph } => return cmd_validate(&graph, stdout, stderr),
        Command::CountDags {
            treatments,
            mediators,
            enumerate,
            limit,
        } => cmd_count_dags(treatments, mediators, enumerate, limit, stdout, stderr),
        Command::Fit {
            graph,
            data,
            out,
            noise,
        } => cmd_fit(&graph, &data, &out, noise, stdout),
        Command::Analyze {
            model,
            treatments,
            samples,
            seed,
            format,
            workers,
        } => cmd_analyze(&model, &treatments, samples, seed, format, workers, stdout),
        Command::Oracle { model, treatments } => cmd_oracle(&model, &treatments, stdout),
        Command::Simulate { model, rows, seed, out } => cmd_simulate(&model, rows, seed, out.as_deref(), stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => report_error(&e, stderr),
    }
}

fn report_error(e: &Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error[{}]: {e}", e.kind());
    if e.is_domain_error() {
        1
    } else {
        2
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_out(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_validate(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let failure = |e: &Error, stdout: &mut dyn Write, stderr: &mut dyn Write| {
        let body = json!({
            "valid": false,
            "errors": [{"kind": e.kind(), "message": e.to_string()}],
        });
        let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&body).expect("json"));
        report_error(e, stderr)
    };
    let file = match read_text(path).and_then(|t| ModelSpecFile::parse(&t)) {
        Ok(f) => f,
        Err(e) => return failure(&e, stdout, stderr),
    };
    let dag = match file.to_dag() {
        Ok(d) => d,
        Err(e) => return failure(&e, stdout, stderr),
    };
    if file.has_parameters() {
        if let Err(e) = file.to_scm() {
            return failure(&e, stdout, stderr);
        }
    }

    let mut catalog: BTreeMap<&str, Vec<[&str; 2]>> = [
        "root_to_mediator",
        "root_to_outcome",
        "mediator_to_mediator",
        "mediator_to_outcome",
        "covariate",
    ]
    .into_iter()
    .map(|k| (k, Vec::new()))
    .collect();
    for (s, t) in dag.edges() {
        let key = match (
            dag.role(dag.index_of(s).expect("edge node")),
            dag.role(dag.index_of(t).expect("edge node")),
        ) {
            (NodeRole::Treatment, NodeRole::Mediator) => "root_to_mediator",
            (NodeRole::Treatment, NodeRole::Outcome) => "root_to_outcome",
            (NodeRole::Mediator, NodeRole::Mediator) => "mediator_to_mediator",
            (NodeRole::Mediator, NodeRole::Outcome) => "mediator_to_outcome",
            _ => "covariate",
        };
        catalog.get_mut(key).expect("known key").push([s, t]);
    }
    let body = json!({
        "valid": true,
        "nodes": dag.len(),
        "edges": dag.edges().count(),
        "topological_order": topological_order(&dag),
        "mediator_order": dag.mediators().iter().map(|&m| dag.name(m)).collect::<Vec<_>>(),
        "edge_catalog": catalog,
    });
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&body).expect("json"));
    0
}

fn cmd_count_dags(
    treatments: u64,
    mediators: u64,
    enumerate: bool,
    limit: Option<u64>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let count = count_dag_configurations(treatments, mediators)?;
    if !enumerate {
        return write_out(stdout, &format!("{count}\n"));
    }
    let _ = writeln!(stderr, "# {count} configurations");
    let graphs = enumerate_dag_configurations(treatments as usize, mediators as usize, limit)?;
    let mut out = String::new();
    for dag in graphs {
        let edges: Vec<String> = dag.edges().map(|(s, t)| format!("{s}->{t}")).collect();
        out.push('{');
        out.push_str(&edges.join(", "));
        out.push_str("}\n");
    }
    write_out(stdout, &out)
}

fn cmd_fit(graph: &Path, data: &Path, out: &Path, noise: NoiseMode, stdout: &mut dyn Write) -> Result<()> {
    let graph_file = ModelSpecFile::parse(&read_text(graph)?)?;
    let dag = graph_file.to_dag()?;
    let dataset = load_table_path(data)?;
    let (scm, report) = fit_scm(&dag, &dataset, noise)?;

    let mut model = ModelSpecFile::from_scm(&scm)?;
    model.mediator_order = graph_file.mediator_order.clone();
    model.treatments = graph_file.treatments.clone();
    for t in dag.treatments() {
        let name = dag.name(t);
        model.observations.insert(name.to_string(), dataset.column(name)?);
    }
    std::fs::write(out, model.to_json()).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    write_out(
        stdout,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("json")),
    )
}

/// Parses one `--treatment` flag: `NAME=U:T` or `NAME=*K`.
pub fn parse_treatment_flag(flag: &str, file: &ModelSpecFile) -> Result<TreatmentSpec> {
    let malformed = || Error::Parse(format!("malformed treatment `{flag}`; expected NAME=U:T or NAME=*K"));
    let (name, value) = flag.split_once('=').ok_or_else(malformed)?;
    let name = name.trim();
    if name.is_empty() {
        return Err(malformed());
    }
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(malformed)
    };
    if let Some(k) = value.trim().strip_prefix('*') {
        let k = number(k)?;
        return Ok(TreatmentSpec {
            node: name.to_string(),
            untreated: UntreatedValue::Observed(file.observed(name)?),
            treated: TreatedValue::Relative(k),
        });
    }
    let (u, t) = value.split_once(':').ok_or_else(malformed)?;
    Ok(TreatmentSpec::absolute(name, number(u)?, number(t)?))
}

/// Model-file defaults overridden by command-line flags.
fn resolve_specs(file: &ModelSpecFile, scm: &Scm, flags: &[String]) -> Result<Vec<TreatmentSpec>> {
    let dag = scm.dag();
    // check names before touching observations so typos report as unknown nodes
    for flag in flags {
        if let Some((name, _)) = flag.split_once('=') {
            dag.expect_role(name.trim(), NodeRole::Treatment)?;
        }
    }
    let parsed: Vec<TreatmentSpec> = flags
        .iter()
        .map(|f| parse_treatment_flag(f, file))
        .collect::<Result<_>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for p in &parsed {
        if !seen.insert(p.node.as_str()) {
            return Err(Error::DuplicateTreatmentSpec(p.node.clone()));
        }
    }
    let mut defaults = file.treatment_specs(dag)?;
    for spec in defaults.iter_mut() {
        if let Some(p) = parsed.iter().find(|p| p.node == spec.node) {
            *spec = p.clone();
        }
    }
    Ok(defaults)
}

fn load_model(path: &Path) -> Result<(ModelSpecFile, Scm, String)> {
    let text = read_text(path)?;
    let hash = sha256_hex(text.as_bytes());
    let file = ModelSpecFile::parse(&text)?;
    let scm = file.to_scm()?;
    Ok((file, scm, hash))
}

fn cmd_analyze(
    model: &Path,
    flags: &[String],
    samples: u64,
    seed: u64,
    format: ReportFormat,
    workers: Option<usize>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let (file, scm, hash) = load_model(model)?;
    let specs = resolve_specs(&file, &scm, flags)?;
    let cfg = McConfig {
        n_draws: samples,
        seed,
        parallel_workers: workers,
    };
    let report = AnalysisReport::build(&scm, &specs, &cfg, hash)?;
    let text = match format {
        ReportFormat::Tsv => report.to_tsv(),
        ReportFormat::Json => report.to_json(),
    };
    write_out(stdout, &text)
}

fn cmd_oracle(model: &Path, flags: &[String], stdout: &mut dyn Write) -> Result<()> {
    let (file, scm, _) = load_model(model)?;
    let specs = resolve_specs(&file, &scm, flags)?;
    let dag = scm.dag();
    let mut out = String::from("treatment\tmediator\texact_nie\n");
    for t in dag.treatments() {
        for &m in dag.mediators() {
            let v = exact_nie(&scm, dag.name(t), dag.name(m), &specs)?;
            out.push_str(&format!("{}\t{}\t{v:?}\n", dag.name(t), dag.name(m)));
        }
    }
    write_out(stdout, &out)
}

fn cmd_simulate(model: &Path, rows: usize, seed: u64, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let (file, scm, _) = load_model(model)?;
    if rows == 0 {
        return Err(Error::InvalidConfig("--rows must be at least 1".into()));
    }
    let dag = scm.dag();
    let specs = file.treatment_specs(dag)?;
    let mut table = Vec::with_capacity(rows);
    for k in 0..rows as u64 {
        let stream = SeedStream::at(seed, k);
        let mut interventions = BTreeMap::new();
        for spec in &specs {
            let mut rng = stream.rng_for(&format!("\u{0}simulate/{}", spec.node));
            let value = match (&spec.untreated, spec.treated) {
                (UntreatedValue::Observed(b), _) => b.sample(&mut rng),
                (UntreatedValue::Fixed(u), TreatedValue::Fixed(t)) => {
                    if rng.random::<bool>() {
                        t
                    } else {
                        *u
                    }
                }
                (UntreatedValue::Fixed(u), TreatedValue::Relative(m)) => {
                    if rng.random::<bool>() {
                        u * m
                    } else {
                        *u
                    }
                }
            };
            interventions.insert(spec.node.clone(), value);
        }
        let noise = crate::scm::draw_noise(&scm, &stream);
        table.push(crate::scm::evaluate(&scm, &interventions, &noise)?);
    }
    let dataset = Dataset::from_valuations(&table)?;
    match out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            dataset.write_csv(f)
        }
        None => dataset.write_csv(stdout),
    }
}
