use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Map;

use mixchar::family::{family, sized_family_key, DEFAULT_SEED};
use mixchar::report::{analyze, parse_quantities, AnalyzeConfig};
use mixchar::verify::{run, Suite, VerifyConfig, VerifyReport};
use mixchar::{load_spec, ChainModel};

#[derive(Parser)]
#[command(name = "mixchar", version, about = "Mixing times and hitting-time characterizations of finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute quantities for one chain and write a JSON report.
    Analyze {
        #[arg(long)]
        chain: PathBuf,
        /// Comma-separated names, e.g. `tau2,rho,kappa,c_ls`, or `all`.
        #[arg(long)]
        quantities: String,
        /// Convergence tolerance of the log-Sobolev optimizer.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_subsets: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Include per-quantity wall-clock times (output is then not reproducible).
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an inequality suite and write the verification records.
    Verify {
        #[arg(long)]
        chain: PathBuf,
        /// core, discrete, trees or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        max_subsets: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate quantities over a size parameter of a named family.
    Sweep {
        #[arg(long)]
        family: String,
        /// Inclusive integer range `A..B`.
        #[arg(long)]
        param_range: String,
        #[arg(long)]
        quantities: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failures that should exit with status 2.
struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MIXCHAR_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| anyhow!("MIXCHAR_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load_chain(path: &Path) -> Result<ChainModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_spec(&text).with_context(|| format!("loading {}", path.display()))
}

fn chain_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "chain".into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once("..").ok_or_else(|| anyhow!("range '{s}' is not of the form A..B"))?;
    let a: usize = a.trim().parse().with_context(|| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().parse().with_context(|| format!("bad range end in '{s}'"))?;
    if a > b {
        bail!("empty range '{s}'");
    }
    Ok((a, b))
}

/// Returns whether every verification passed.
fn execute(cmd: Command) -> std::result::Result<bool, InputError> {
    configure_threads()?;
    match cmd {
        Command::Analyze {
            chain,
            quantities,
            tol,
            max_subsets,
            seed,
            timings,
            out,
        } => {
            let model = load_chain(&chain)?;
            let qs = parse_quantities(&quantities)?;
            let mut cfg = AnalyzeConfig {
                seed,
                timings,
                ..AnalyzeConfig::default()
            };
            if let Some(t) = tol {
                cfg.ls.tol = t;
            }
            if let Some(m) = max_subsets {
                cfg.max_subsets = m;
            }
            let report = analyze(&model, &qs, &cfg)?;
            emit(out.as_deref(), &report.to_json())?;
            Ok(true)
        }
        Command::Verify {
            chain,
            suite,
            slack,
            seed,
            max_subsets,
            out,
        } => {
            let model = load_chain(&chain)?;
            let which: Suite = suite.parse()?;
            let mut cfg = VerifyConfig {
                slack,
                seed,
                ..VerifyConfig::default()
            };
            cfg.ls.seed = seed;
            if let Some(m) = max_subsets {
                cfg.max_subsets = m;
            }
            let id = chain_id(&chain);
            let records = run(&model, &id, which, &cfg)?;
            let report = VerifyReport::new(&id, &suite, &cfg, records);
            for r in report.records.iter().filter(|r| !r.passed()) {
                eprintln!("FAIL {}: {} <= {} ({})", r.id, r.lhs, r.rhs, r.anchor);
            }
            emit(out.as_deref(), &report.to_json())?;
            Ok(report.pass)
        }
        Command::Sweep {
            family: name,
            param_range,
            quantities,
            seed,
            out,
        } => {
            let key = sized_family_key(&name).ok_or_else(|| anyhow!("family '{name}' has no integer size parameter"))?;
            let (a, b) = parse_range(&param_range)?;
            let qs = parse_quantities(&quantities)?;
            let cfg = AnalyzeConfig {
                seed,
                keep_going: true,
                ..AnalyzeConfig::default()
            };
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                let mut header = vec!["family".to_string(), key.to_string()];
                header.extend(qs.iter().map(|q| q.name()));
                w.write_record(&header)?;
                for v in a..=b {
                    let mut params = Map::new();
                    params.insert(key.into(), v.into());
                    let model = family(&name, &params)?;
                    let report = analyze(&model, &qs, &cfg)?;
                    let mut row = vec![name.clone(), v.to_string()];
                    for q in &qs {
                        let qn = q.name();
                        if let Some(e) = report.errors.get(&qn) {
                            eprintln!("{name}({key}={v}) {qn}: {e}");
                        }
                        row.push(match report.quantities.get(&qn) {
                            Some(serde_json::Value::Number(x)) => x.to_string(),
                            Some(other) => other.to_string(),
                            None => String::new(),
                        });
                    }
                    w.write_record(&row)?;
                }
                w.flush()?;
            }
            let text = String::from_utf8(buf)?;
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
