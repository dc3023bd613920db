//! `psi` subcommands. Exit codes: 0 success, 1 validation or acceptance
//! failure, 2 usage error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use psi_core::catalog::{bundled_example, bundled_examples, list_bundled_examples, BundledExample};
use psi_core::graph::{validate_with_evidence, Evidence, Observation, Severity};
use psi_core::inference::{infer, DiscretizationConfig, PosteriorSet};
use psi_core::io::{render_results, write_results, ResultDocument, ResultFormat};
use psi_core::oracle::{compare, likelihood_weighted_posterior, ComparisonPolicy};

use crate::models::{compile, resolve_config, resolve_evidence, resolve_model, LoadError};
use crate::service;

#[derive(Debug, Parser)]
#[command(name = "psi", version, about = "Hybrid Bayesian network engine for product-safety assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ResultFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ResultFormat::Json,
            Format::Csv => ResultFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model for structural and numeric problems.
    Validate {
        /// Model file or bundled example name.
        model: String,
        #[arg(long)]
        evidence: Option<String>,
    },
    /// Compute posteriors with the discretization engine.
    Infer {
        model: String,
        #[arg(long)]
        evidence: Option<String>,
        /// DiscretizationConfig JSON; defaults to $PSI_CONFIG.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Estimate posteriors by likelihood-weighted sampling.
    Oracle {
        model: String,
        #[arg(long)]
        evidence: Option<String>,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run the engine and the sampler and compare their means.
    Compare {
        model: String,
        #[arg(long)]
        evidence: Option<String>,
        #[arg(long)]
        config: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allowed difference in oracle standard errors.
        #[arg(long, default_value_t = 3.0)]
        standard_errors: f64,
    },
    /// Bundled example models.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
    /// Tabulate posterior summaries while one node is set to each value.
    Sweep {
        model: String,
        #[arg(long)]
        node: String,
        /// Comma-separated numbers or state labels.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        evidence: Option<String>,
        #[arg(long)]
        config: Option<String>,
    },
    /// Start the HTTP scenario service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for scenario snapshots, restored on start and written on shutdown.
        #[arg(long)]
        persist: Option<PathBuf>,
        /// Per-request inference timeout in seconds.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        #[arg(long)]
        config: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum ExamplesAction {
    List,
    Run { name: String },
    RunAll,
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Failed(e.to_string())
        }
    }
}

type Outcome = Result<bool, Failure>;

/// Runs `psi` with `args` (program name first). Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Failed(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}\n\nUsage: psi <COMMAND>\nRun 'psi --help' for the list of commands.");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match command {
        Command::Validate { model, evidence } => validate(&model, evidence.as_deref(), out),
        Command::Infer { model, evidence, config, out: path, format } => {
            run_infer(&model, evidence.as_deref(), config.as_deref(), path, format.into(), out)
        }
        Command::Oracle { model, evidence, samples, seed } => run_oracle(&model, evidence.as_deref(), samples, seed, out),
        Command::Compare { model, evidence, config, samples, seed, standard_errors } => {
            let policy = ComparisonPolicy { standard_errors, ..Default::default() };
            run_compare(&model, evidence.as_deref(), config.as_deref(), samples, seed, &policy, out)
        }
        Command::Examples { action: ExamplesAction::List } => {
            for e in list_bundled_examples() {
                emit(out, format_args!("{:<34} {}", e.id, e.title));
            }
            Ok(true)
        }
        Command::Examples { action: ExamplesAction::Run { name } } => {
            let ex = bundled_example(&name).ok_or_else(|| Failure::Usage(format!("no bundled example named '{name}'")))?;
            Ok(run_example(&ex, true, out))
        }
        Command::Examples { action: ExamplesAction::RunAll } => {
            let mut all = true;
            for ex in bundled_examples() {
                all &= run_example(&ex, false, out);
            }
            Ok(all)
        }
        Command::Sweep { model, node, values, evidence, config } => {
            sweep(&model, &node, &values, evidence.as_deref(), config.as_deref(), out)
        }
        Command::Serve { port, host, persist, timeout, config } => {
            let config = resolve_config(config.as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Failure::Usage(format!("bad address '{host}:{port}': {e}")))?;
            let options = service::Options { config, timeout: Duration::from_secs(timeout), persist };
            let _ = writeln!(err, "listening on http://{addr}");
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Failed(e.to_string()))?;
            rt.block_on(service::serve(addr, options)).map_err(|e| Failure::Failed(e.to_string()))?;
            Ok(true)
        }
    }
}

fn emit(out: &mut dyn Write, args: std::fmt::Arguments<'_>) {
    let _ = out.write_fmt(args);
    let _ = out.write_all(b"\n");
}

fn validate(model: &str, evidence: Option<&str>, out: &mut dyn Write) -> Outcome {
    let spec = resolve_model(model)?;
    let evidence = resolve_evidence(evidence)?;
    let compiled = match compile(model, spec) {
        Ok(m) => m,
        Err(e) => {
            emit(out, format_args!("error: {e}"));
            return Ok(false);
        }
    };
    let report = validate_with_evidence(&compiled, &evidence);
    for d in &report.diagnostics {
        let level = if d.severity == Severity::Error { "error" } else { "warning" };
        let node = d.node.as_deref().map(|n| format!(" [{n}]")).unwrap_or_default();
        emit(out, format_args!("{level}{node}: {}", d.message));
    }
    let ok = !report.has_errors();
    emit(out, format_args!("{}: {} nodes, {}", model, compiled.nodes().len(), if ok { "valid" } else { "invalid" }));
    Ok(ok)
}

fn engine(model: &str, evidence: &Evidence, config: &DiscretizationConfig) -> Result<PosteriorSet, Failure> {
    let compiled = compile(model, resolve_model(model)?)?;
    infer(&compiled, evidence, config).map_err(|e| Failure::Failed(e.to_string()))
}

fn run_infer(
    model: &str,
    evidence: Option<&str>,
    config: Option<&str>,
    path: Option<PathBuf>,
    format: ResultFormat,
    out: &mut dyn Write,
) -> Outcome {
    let evidence = resolve_evidence(evidence)?;
    let config = resolve_config(config)?;
    let ps = engine(model, &evidence, &config)?;
    let doc = ResultDocument::new(&ps, &evidence, &config);
    match path {
        Some(p) => write_results(&doc, &p, format).map_err(|e| Failure::Failed(e.to_string()))?,
        None => {
            let _ = out.write_all(render_results(&doc, format).as_bytes());
        }
    }
    Ok(true)
}

fn run_oracle(model: &str, evidence: Option<&str>, samples: usize, seed: u64, out: &mut dyn Write) -> Outcome {
    let evidence = resolve_evidence(evidence)?;
    let compiled = compile(model, resolve_model(model)?)?;
    let est = likelihood_weighted_posterior(&compiled, &evidence, samples, seed).map_err(|e| Failure::Failed(e.to_string()))?;
    emit(out, format_args!("{}", serde_json::to_string_pretty(&est).expect("estimate serializes")));
    Ok(true)
}

fn run_compare(
    model: &str,
    evidence: Option<&str>,
    config: Option<&str>,
    samples: usize,
    seed: u64,
    policy: &ComparisonPolicy,
    out: &mut dyn Write,
) -> Outcome {
    let evidence = resolve_evidence(evidence)?;
    let config = resolve_config(config)?;
    let compiled = compile(model, resolve_model(model)?)?;
    let ps = infer(&compiled, &evidence, &config).map_err(|e| Failure::Failed(e.to_string()))?;
    let est = likelihood_weighted_posterior(&compiled, &evidence, samples, seed).map_err(|e| Failure::Failed(e.to_string()))?;
    let report = compare(&ps, &est, policy);
    emit(out, format_args!("{}", serde_json::to_string_pretty(&report).expect("report serializes")));
    Ok(report.passed())
}

/// Prints an example's outcomes; `detail` adds every node's summary.
fn run_example(ex: &BundledExample, detail: bool, out: &mut dyn Write) -> bool {
    let config = DiscretizationConfig::default();
    let outcomes = ex.check(&config);
    let pass = outcomes.iter().all(|o| o.pass);
    if !detail {
        let n = outcomes.iter().filter(|o| o.pass).count();
        emit(out, format_args!("{} {:<34} {n}/{}", if pass { "PASS" } else { "FAIL" }, ex.id, outcomes.len()));
        return pass;
    }
    emit(out, format_args!("{}: {}", ex.id, ex.title()));
    if let Ok(model) = compile(ex.id, ex.spec.clone()) {
        if let Ok(ps) = infer(&model, &ex.evidence, &config) {
            for (id, p) in &ps.nodes {
                emit(out, format_args!("  {id:<28} mean {:<14.6e} variance {:.6e}", p.mean, p.variance));
            }
        }
    }
    for o in &outcomes {
        let value = o.value.map_or_else(|| "none".to_string(), |v| format!("{v:.6e}"));
        let note = o.message.as_deref().map(|m| format!(" ({m})")).unwrap_or_default();
        emit(out, format_args!("{} {} {value} in [{}, {}]{note}", if o.pass { "PASS" } else { "FAIL" }, o.key, o.range[0], o.range[1]));
    }
    pass
}

fn parse_value(text: &str) -> Observation {
    match text.trim().parse::<f64>() {
        Ok(v) => Observation::Value(v),
        Err(_) => Observation::State(text.trim().to_string()),
    }
}

fn sweep(
    model: &str,
    node: &str,
    values: &[String],
    evidence: Option<&str>,
    config: Option<&str>,
    out: &mut dyn Write,
) -> Outcome {
    let base = resolve_evidence(evidence)?;
    let config = resolve_config(config)?;
    let compiled = compile(model, resolve_model(model)?)?;
    if compiled.index_of(node).is_none() {
        return Err(Failure::Usage(format!("model has no node '{node}'")));
    }
    emit(out, format_args!("{node},node,mean,variance,p05,p50,p95"));
    for v in values {
        let mut ev = base.clone();
        ev.insert(node.to_string(), parse_value(v));
        let ps = infer(&compiled, &ev, &config).map_err(|e| Failure::Failed(format!("{node} = {v}: {e}")))?;
        for (id, p) in ps.nodes.iter().filter(|(id, _)| id.as_str() != node) {
            let q = p.percentiles;
            emit(out, format_args!("{v},{id},{},{},{},{},{}", p.mean, p.variance, q.p05, q.p50, q.p95));
        }
    }
    Ok(true)
}
