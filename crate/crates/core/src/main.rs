use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use entroflux::cli::{self, ModelChoice};
use entroflux::config::{preset, RunConfig, PRESETS};
use entroflux::Error;

#[derive(Parser)]
#[command(name = "entroflux", version, about = "Entropy-matching diffusion models and neural entropy estimates")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file or preset name.
    #[arg(long, short)]
    config: String,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Network checkpoint to evaluate.
    #[arg(long, conflicts_with_all = ["exact", "zero"])]
    checkpoint: Option<PathBuf>,
    /// Use the exact optimal model of the configured mixture.
    #[arg(long)]
    exact: bool,
    /// Use ε ≡ 0.
    #[arg(long, conflicts_with = "exact")]
    zero: bool,
}

impl ModelArgs {
    fn choice(&self) -> anyhow::Result<ModelChoice> {
        Ok(match (&self.checkpoint, self.exact, self.zero) {
            (Some(p), _, _) => ModelChoice::Checkpoint(p.clone()),
            (None, true, _) => ModelChoice::Exact,
            (None, _, true) => ModelChoice::Zero,
            _ => bail!(Error::Config("choose one of --checkpoint, --exact, --zero".into())),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Discrete-state entropy production at several lattice spacings.
    Lattice(Common),
    /// Train a network, tracking entropy and KL over epochs.
    Transport(Common),
    /// Final neural entropy against training-set size.
    SweepN {
        #[command(flatten)]
        common: Common,
        /// Comma-separated training-set sizes.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Ideal, score-matching and (optionally) neural entropy curves.
    EntropyCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Draw samples by integrating the reverse dynamics.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Probability-flow ODE instead of the reverse SDE.
        #[arg(long)]
        ode: bool,
    },
    /// Log-likelihood lower bounds and the KL upper-bound estimate.
    Density {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// List presets, or write them as JSON files into a directory.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = if Path::new(&c.config).exists() {
        RunConfig::load(Path::new(&c.config))?
    } else if PRESETS.contains(&c.config.as_str()) {
        preset(&c.config)?
    } else {
        bail!(Error::Config(format!("{} is neither a file nor a preset", c.config)));
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Lattice(c) => {
            let s = cli::run_lattice(&load_config(&c)?, &c.out)?;
            println!("observed order {:.3}", s.observed_order);
        }
        Command::Transport(c) => {
            let o = cli::transport(&load_config(&c)?, Some(&c.out))?;
            println!(
                "S_NN(T) = {} ; ideal S_tot = {} ; KL upper-bound estimate = {}",
                o.neural.total(),
                o.ideal.total(),
                o.final_density.kl
            );
        }
        Command::SweepN { common, n } => {
            let cfg = load_config(&common)?;
            let ns = n.unwrap_or_else(|| cfg.sweep_n.clone());
            if ns.is_empty() || ns.contains(&0) {
                bail!(Error::Config("--n needs positive sizes".into()));
            }
            for r in cli::sweep_n(&cfg, &ns, &common.out)? {
                println!("n = {:>6}: S_NN(T) = {}", r.n, r.s_nn);
            }
        }
        Command::EntropyCurve { common, checkpoint } => {
            cli::run_entropy_curve(&load_config(&common)?, checkpoint.as_deref(), &common.out)?;
        }
        Command::Sample { common, model, ode } => {
            let pts = cli::run_sample(&load_config(&common)?, &model.choice()?, ode, &common.out)?;
            println!("wrote {} samples", pts.len());
        }
        Command::Density { common, model } => {
            let r = cli::run_density(&load_config(&common)?, &model.choice()?, None, &common.out)?;
            println!("{} = {}", r.label, r.kl);
        }
        Command::Presets { write } => match write {
            Some(dir) => {
                std::fs::create_dir_all(&dir)?;
                for name in PRESETS {
                    std::fs::write(dir.join(format!("{name}.json")), preset(name)?.to_json() + "\n")?;
                }
            }
            None => PRESETS.iter().for_each(|p| println!("{p}")),
        },
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::InvalidSpec(_)) => 2,
        Some(err) if err.is_numerical() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
