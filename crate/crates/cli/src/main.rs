use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use speclab_core::inequality::{
    check_cor34, check_multiplier_lemma, prop32_corpus, run_prop32_corpus, CheckResult, Cor34Params, Cor34Variant,
    Partition, Prop32Item, ScalarMultiplier,
};
use speclab_core::lp::IterationConfig;
use speclab_core::manifolds::{random_operator, ModelSpec};
use speclab_core::perturbation::{run_perturb, PerturbConfig};
use speclab_core::spectral::OperatorJson;
use speclab_core::sweep::{fit_series, run_sweep, Format, LambdaGrid, Quantity, Report, Schedule, Statistic, SweepConfig};
use speclab_core::{Error, SpectralOperator};

const CACHE_ENV: &str = "SPECLAB_CACHE_DIR";

#[derive(Parser)]
#[command(name = "speclab", version, about = "Spectral cluster and resolvent estimate laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or cache model operators.
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Bracket a single norm.
    Norms {
        /// TOML file with a `[model]` table.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "cluster-2q")]
        quantity: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        /// Defaults to `eps`.
        #[arg(long)]
        mu: Option<f64>,
        /// `inf` is accepted.
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Run inequality checks on the seeded random corpus; one JSON line per check.
    Verify {
        /// `3.3`..`3.8`, `L3.1`, `C3.4`, or `all`.
        #[arg(long, default_value = "all")]
        estimate: String,
        #[arg(long, default_value_t = 24)]
        instances: usize,
        #[arg(long, default_value_t = 0xc0ffee)]
        seed: u64,
    },
    /// Run a parameter sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Run a perturbation stability experiment.
    Perturb {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit a JSON report in another format.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ModelAction {
    /// Build a model and print a summary (optionally writing the operator JSON).
    Build {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build into (or load from) the cache directory.
    Cache {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Deserialize)]
struct ModelFile {
    model: ModelSpec,
}

fn read_model(path: &Path) -> anyhow::Result<ModelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let f: ModelFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    Ok(f.model)
}

fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".speclab-cache"))
}

fn summary(op: &SpectralOperator) -> anyhow::Result<serde_json::Value> {
    let ev = op.eigenvalues();
    Ok(serde_json::json!({
        "label": op.label(),
        "points": op.space().len(),
        "rank": op.rank(),
        "complete": op.is_complete(),
        "min_eigenvalue": ev.first(),
        "max_eigenvalue": ev.last(),
        "orthonormality_residual": op.validate()?,
    }))
}

fn emit_line(out: &mut impl Write, r: &CheckResult) -> anyhow::Result<()> {
    writeln!(out, "{}", serde_json::to_string(r)?)?;
    Ok(())
}

fn verify(estimate: &str, instances: usize, seed: u64) -> anyhow::Result<bool> {
    let cfg = IterationConfig::default();
    let corpus = prop32_corpus(instances, seed);
    let mut stdout = std::io::stdout().lock();
    let mut all_pass = true;
    let mut record = |r: &CheckResult, out: &mut std::io::StdoutLock| -> anyhow::Result<()> {
        all_pass &= r.pass;
        emit_line(out, r)
    };
    let want = |id: &str| estimate == "all" || estimate == id;
    let items: Vec<Prop32Item> = if estimate == "all" {
        Prop32Item::ALL.to_vec()
    } else if estimate.starts_with("3.") {
        vec![Prop32Item::parse(estimate)?]
    } else {
        Vec::new()
    };
    if !items.is_empty() {
        for r in run_prop32_corpus(&corpus, &items, 1.0, &cfg)? {
            record(&r, &mut stdout)?;
        }
    }
    if want("L3.1") {
        for inst in &corpus {
            let p = &inst.params;
            let op = random_operator(inst.dim, inst.seed, 2.0 * p.lambda)?;
            let part = Partition::new(p.lambda, p.eps)?;
            for alpha in [0.5, 1.0] {
                let m = ScalarMultiplier::resolvent(p.lambda, p.eps, alpha);
                let r = check_multiplier_lemma(&op, &part, p.q, &m, &m, &cfg)?;
                record(&r, &mut stdout)?;
            }
        }
    }
    if want("C3.4") {
        for inst in &corpus {
            let p = &inst.params;
            let op = random_operator(inst.dim, inst.seed, 2.0 * p.lambda)?;
            let params = Cor34Params {
                lambda: p.lambda,
                eps: p.eps,
                mu: p.mu,
                q: p.q,
                samples: 4,
                seed: inst.seed,
            };
            for v in Cor34Variant::ALL {
                record(&check_cor34(&op, v, &params, &cfg)?, &mut stdout)?;
            }
        }
    }
    if items.is_empty() && !want("L3.1") && !want("C3.4") {
        bail!(Error::Config(format!("unknown estimate `{estimate}`")));
    }
    Ok(all_pass)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Model { action } => match action {
            ModelAction::Build { spec, out } => {
                let model = read_model(&spec)?.build()?;
                println!("{}", serde_json::to_string_pretty(&summary(&model.op)?)?);
                if let Some(out) = out {
                    std::fs::write(&out, serde_json::to_string(&model.op.to_json())?)?;
                }
                Ok(true)
            }
            ModelAction::Cache { spec } => {
                let spec = read_model(&spec)?;
                let dir = cache_dir();
                let path = dir.join(format!("{}.json", spec.label()));
                let (op, hit) = if path.exists() {
                    let doc: OperatorJson = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
                    (SpectralOperator::from_json(&doc)?, true)
                } else {
                    let op = spec.build()?.op;
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(&path, serde_json::to_string(&op.to_json())?)?;
                    (op, false)
                };
                let mut s = summary(&op)?;
                s["cache"] = serde_json::json!({ "path": path, "hit": hit });
                println!("{}", serde_json::to_string_pretty(&s)?);
                Ok(true)
            }
        },
        Command::Norms {
            spec,
            quantity,
            lambda,
            eps,
            mu,
            q,
            seed,
        } => {
            let quantity: Quantity = serde_json::from_value(serde_json::Value::String(quantity.clone()))
                .map_err(|_| Error::Config(format!("unknown quantity `{quantity}`")))?;
            let cfg = SweepConfig {
                model: read_model(&spec)?,
                quantity,
                q: vec![q],
                lambda: LambdaGrid::Values { values: vec![lambda] },
                eps: Schedule::Constant { value: eps },
                mu: mu.map(|value| Schedule::Constant { value }),
                seed,
                allow_untrusted: true,
                iteration: Default::default(),
            };
            for r in run_sweep(&cfg)? {
                println!("{}", serde_json::to_string(&r)?);
            }
            Ok(true)
        }
        Command::Verify {
            estimate,
            instances,
            seed,
        } => verify(&estimate, instances, seed),
        Command::Sweep { config, out, format } => {
            let format: Format = format.parse()?;
            let cfg = SweepConfig::load(&config)?;
            let records = run_sweep(&cfg)?;
            let fits = fit_series(&records, Statistic::Midpoint);
            let report = Report::new(Some(cfg), records, fits, Vec::new());
            for p in speclab_core::sweep::emit(&report, format, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Perturb { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let outcome = run_perturb(&PerturbConfig::from_toml(&text)?)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            Ok(outcome.stability.verified)
        }
        Command::Report { input, format, out } => {
            let format: Format = format.parse()?;
            let report = Report::load(&input)?;
            for p in speclab_core::sweep::emit(&report, format, &out)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
