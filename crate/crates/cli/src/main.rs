//! Command-line front end: generate demonstrations, train and evaluate
//! models, run whole scenarios and serve live sessions.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use reprise_core::harness::{evaluate, generate_demos, run_scenario, train_assistant, Assistant, Dataset, Method, Scenario};
use reprise_core::intent::{train_bundle, ModelBundle};
use reprise_teleop::{Session, SessionConfig};
use tracing::info;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "reprise", version, about = "Shared autonomy learned from repeated teleoperation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Record unassisted demonstrations from simulated operators into dataset.jsonl.
    DemoGenerate(Common),
    /// Fit a model bundle on a dataset and write bundle.ckpt.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset to train on; defaults to the scenario's demonstrations.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score one method on the scenario's schedule without retraining.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ours")]
        method: Method,
        /// Bundle to evaluate with `--method ours`; otherwise one is trained
        /// on the scenario's demonstrations.
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Run the full continual-learning loop of a scenario.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Keep only the schedule entries of this method.
        #[arg(long)]
        method: Option<Method>,
    },
    /// Start the live teleoperation service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ours")]
        method: Method,
        /// Initial dataset; defaults to the scenario's demonstrations.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn load(common: &Common) -> Result<Scenario> {
    let mut sc = Scenario::load(&common.scenario).with_context(|| format!("loading {}", common.scenario.display()))?;
    if let Some(seed) = common.seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(&common.out)
}

fn dataset(sc: &Scenario, path: Option<&Path>) -> Result<Dataset> {
    Ok(match path {
        Some(p) => Dataset::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => generate_demos(sc)?,
    })
}

fn write_bundle(dir: &Path, assistant: &Assistant) -> Result<()> {
    if let Assistant::Ours { bundle, arbitration } = assistant {
        fs::write(dir.join("bundle.ckpt"), bundle.to_json(Some(arbitration.clone()))?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::DemoGenerate(common) => {
            let sc = load(&common)?;
            let data = generate_demos(&sc)?;
            let path = out_dir(&common)?.join("dataset.jsonl");
            data.save(&path)?;
            println!("{} demonstrations -> {}", data.len(), path.display());
        }
        Command::Train { common, data } => {
            let sc = load(&common)?;
            let data = dataset(&sc, data.as_deref())?;
            let dir = out_dir(&common)?;
            let cfg = sc.training.bundle.reseeded(sc.seed);
            let (bundle, curves) = train_bundle(data.records(), &cfg, sc.scene.sim.v_max, 0)?;
            fs::write(dir.join("bundle.ckpt"), bundle.to_json(Some(sc.training.arbitration.clone()))?)?;
            fs::write(dir.join("autoencoder_loss.csv"), curves.autoencoder.to_csv())?;
            fs::write(dir.join("discriminator_loss.csv"), curves.discriminator.to_csv())?;
            println!("trained on {} interactions; bundle {} -> {}", data.len(), &bundle.fingerprint()[..12], dir.join("bundle.ckpt").display());
        }
        Command::Eval { common, method, bundle } => {
            let sc = load(&common)?;
            let assistant = match (method, bundle) {
                (Method::Ours, Some(path)) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let (bundle, arbitration) = ModelBundle::from_json(&text)?;
                    Assistant::Ours { bundle: Arc::new(bundle), arbitration: arbitration.unwrap_or_else(|| sc.training.arbitration.clone()) }
                }
                (_, Some(_)) => bail!("--bundle only applies to --method ours"),
                (m, None) => train_assistant(m, generate_demos(&sc)?.records(), &sc.training, &sc.scene, 0, sc.seed)?,
            };
            let report = evaluate(&sc, &assistant)?;
            let dir = out_dir(&common)?;
            report.write(dir)?;
            print!("{}", report.summary_csv()?);
        }
        Command::Experiment { common, method } => {
            let mut sc = load(&common)?;
            if let Some(m) = method {
                sc.schedule.retain(|e| e.method == m);
                if let Some(a) = &mut sc.autonomy_prefix {
                    a.methods.retain(|&x| x == m);
                }
            }
            let out = run_scenario(&sc)?;
            let dir = out_dir(&common)?;
            out.report.write(dir)?;
            for (m, data) in &out.datasets {
                let name = if out.datasets.len() == 1 { "dataset.jsonl".to_string() } else { format!("dataset_{m}.jsonl") };
                data.save(&dir.join(name))?;
            }
            if let Some(a) = out.assistants.iter().find(|a| a.method() == Method::Ours) {
                write_bundle(dir, a)?;
            }
            fs::write(dir.join("retrains.json"), serde_json::to_string_pretty(&out.retrains)?)?;
            print!("{}", out.report.summary_csv()?);
        }
        Command::Serve { common, method, data, addr } => {
            let sc = load(&common)?;
            let initial = dataset(&sc, data.as_deref())?;
            let dir = out_dir(&common)?;
            let mut cfg = SessionConfig::new(sc.scene.clone(), sc.training.clone());
            cfg.cadence = sc.cadence;
            cfg.seed = sc.seed;
            cfg.method = method;
            cfg.dataset_path = Some(dir.join("dataset.jsonl"));
            info!(interactions = initial.len(), "training the initial model");
            let session = Session::new(cfg, initial)?;
            tokio::runtime::Runtime::new()?.block_on(reprise_teleop::serve(session, addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
