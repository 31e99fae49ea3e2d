use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use webprov::bench::{measure_startup, run_benchmark, BenchConfig};
use webprov::{load_scenario, oracle_attribution, run_session, ChainMode, IndicatorConfig, ScenarioError, SessionError, Tracking};

#[derive(Parser)]
#[command(name = "webprov", version, about = "Run page sessions with element-level provenance tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Extension,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and emit the annotated page and report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_html: Option<PathBuf>,
        #[arg(long)]
        out_report: Option<PathBuf>,
        #[arg(long, default_value = "red")]
        border_color: String,
        #[arg(long, value_enum, default_value = "extension")]
        chain_mode: Mode,
        #[arg(long)]
        no_provenance: bool,
    },
    /// Time a synthetic workload with tracking on and off.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        elements: usize,
        #[arg(long, default_value_t = 50)]
        scripts: usize,
        #[arg(long, default_value_t = 5)]
        extensions: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Print the naive interpreter's per-node attribution.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Scenario(ScenarioError::Io { .. }) => Failure::Io(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        SessionError::from(e).into()
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out_html,
            out_report,
            border_color,
            chain_mode,
            no_provenance,
        } => {
            let cfg = IndicatorConfig::with_color(&border_color);
            cfg.validate().map_err(Failure::Invalid)?;
            let mode = match chain_mode {
                Mode::Full => ChainMode::FullChain,
                Mode::Extension => ChainMode::ExtensionOnly,
            };
            let tracking = if no_provenance { Tracking::Off } else { Tracking::On };
            let s = load_scenario(&scenario)?;
            let result = run_session(&s, &cfg, mode, tracking)?;
            let report = result.report.to_json();
            match &out_html {
                Some(p) => write(p, &result.annotated_html)?,
                None if out_report.is_some() => {}
                None => println!("{}", result.annotated_html),
            }
            match &out_report {
                Some(p) => write(p, &report)?,
                None => print!("{report}"),
            }
            let st = &result.stats;
            eprintln!(
                "{} roots, {} nodes, {} dom ops, {} labels, {} script errors, {:.3} ms",
                result.report.roots.len(),
                st.nodes,
                st.mutations,
                st.labels_interned,
                st.script_errors,
                st.elapsed.as_secs_f64() * 1e3
            );
        }
        Command::Bench {
            elements,
            scripts,
            extensions,
            reps,
        } => {
            let cfg = BenchConfig {
                elements,
                scripts,
                extensions,
                reps,
            };
            cfg.validate().map_err(Failure::Invalid)?;
            let b = run_benchmark(&cfg)?;
            println!("dom ops:      {}", b.dom_ops);
            println!("nodes:        {}", b.nodes);
            println!("repetitions:  {reps}");
            println!("tracking on:  {:.3} ms", b.mean_on().as_secs_f64() * 1e3);
            println!("tracking off: {:.3} ms", b.mean_off().as_secs_f64() * 1e3);
            println!("overhead:     {:.1}%", b.overhead() * 100.0);
            let st = measure_startup(200)?;
            println!(
                "startup:      {:.1} us on, {:.1} us off, noise {:.1} us",
                st.mean_on.as_secs_f64() * 1e6,
                st.mean_off.as_secs_f64() * 1e6,
                st.noise.as_secs_f64() * 1e6
            );
        }
        Command::Oracle { scenario } => {
            let s = load_scenario(&scenario)?;
            let o = oracle_attribution(&s)?;
            for (id, node) in &o.nodes {
                let path = o.tree.path(*id).unwrap_or_else(|| "(detached)".into());
                let principals: Vec<String> = node.principals.iter().map(ToString::to_string).collect();
                println!("{id}\t{path}\t{{{}}}", principals.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
