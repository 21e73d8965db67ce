//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage problems (bad flags, missing or
//! malformed input files, invalid configuration), 1 for failures during a
//! run. Diagnostics are a single line on stderr.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::baselines::{bc_train, BcConfig, BcPolicy};
use crate::checkpoint::Checkpoint;
use crate::demos::{generate, DemoDataset, DEFAULT_NUM_DEMOS};
use crate::envs::{EnvKind, ExpertMode};
use crate::error::{Error, Result};
use crate::harness::kl::{analyze_kl, curve_csv};
use crate::harness::{evaluate, load_demos, train, ExperimentConfig, RunOptions, RunPolicy};
use crate::numcore::{SeededRng, Stream};

#[derive(Parser, Debug)]
#[command(name = "dgnlab", about = "Data-guided exploration noise laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roll out the scripted expert and write a demo file.
    GenDemos {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = DEFAULT_NUM_DEMOS)]
        count: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Mode weights, e.g. `A:0.5,B:0.5`.
        #[arg(long, default_value = "A:0.5,B:0.5")]
        modes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method; trailing `key=value` arguments override the config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        overrides: Vec<String>,
    },
    /// Evaluate the mean policy stored in a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the env the checkpoint was trained on.
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit a BC policy to a demo file and save it as a checkpoint.
    TrainBc {
        #[arg(long)]
        demos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stop after 100 optimizer steps.
        #[arg(long)]
        underfit: bool,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// KL(method || BC) over demo states for every checkpoint of a run.
    AnalyzeKl {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        bc: PathBuf,
        #[arg(long)]
        demos: PathBuf,
    },
    /// Run the built-in oracle and property checks.
    Selftest,
}

fn parse_modes(text: &str) -> Result<Vec<(ExpertMode, f64)>> {
    text.split(',')
        .map(|part| {
            let (m, w) = part
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("mode weight `{part}` is not MODE:WEIGHT")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad weight in `{part}`")))?;
            Ok((m.trim().parse()?, w))
        })
        .collect()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Parse { .. } | Error::Config(_) | Error::UnknownEnv(_) => 2,
        _ => 1,
    }
}

fn require_file(path: &std::path::Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenDemos {
            env,
            count,
            noise,
            modes,
            seed,
            out,
        } => {
            let kind: EnvKind = env.parse()?;
            let d = generate(&kind.spec(), count, noise, &parse_modes(&modes)?, seed)?;
            d.save(&out)?;
            println!(
                "wrote {} demos ({} transitions) to {}",
                d.trajectories.len(),
                d.num_transitions(),
                out.display()
            );
        }
        Command::Train {
            config,
            seed,
            overrides,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply_overrides(&overrides)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            require_file(&cfg.demos)?;
            let demos = load_demos(&cfg)?;
            let out = train(&cfg, &demos, &RunOptions::default())?;
            let last = out.rows.last().expect("step-0 row always exists");
            println!(
                "{} on {} seed {}: {} env steps, {} episodes, final success {}",
                cfg.method, cfg.env, cfg.seed, out.env_steps, out.episodes, last.success
            );
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let (policy, cfg, step) = RunPolicy::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let kind = match env {
                Some(e) => e.parse()?,
                None => cfg.env,
            };
            let r = evaluate(&kind.spec(), episodes, seed, |_, obs| policy.act_eval(obs))?;
            println!(
                "{} step {step} on {kind}: success {} return {} ep_len {}",
                cfg.method, r.success_rate, r.mean_return, r.mean_length
            );
        }
        Command::TrainBc {
            demos,
            out,
            underfit,
            epochs,
            seed,
        } => {
            let d = DemoDataset::load(&demos)?;
            let (obs, actions) = d.state_action_pairs();
            let cfg = if underfit {
                BcConfig::underfit()
            } else {
                BcConfig {
                    epochs,
                    ..BcConfig::default()
                }
            };
            let bc = bc_train(&obs, &actions, &cfg, &mut SeededRng::with_stream(seed, Stream::Bc))?;
            bc.save(&out)?;
            println!("wrote BC policy ({} steps) to {}", bc.steps, out.display());
        }
        Command::AnalyzeKl { run_dir, bc, demos } => {
            let bc = BcPolicy::load(&bc)?;
            let d = DemoDataset::load(&demos)?;
            let curve = analyze_kl(&run_dir, &bc, &d)?;
            let path = run_dir.join("kl.csv");
            std::fs::write(&path, curve_csv(&curve)).map_err(|e| Error::io(&path, e))?;
            print!("{}", curve_csv(&curve));
        }
        Command::Selftest => {
            let outcomes = crate::harness::selftest::run_selftest();
            let mut failed = 0;
            for c in &outcomes {
                match &c.result {
                    Ok(()) => println!("PASS {}", c.name),
                    Err(e) => {
                        failed += 1;
                        println!("FAIL {}: {e}", c.name);
                    }
                }
            }
            if failed > 0 {
                return Err(Error::Contract(format!("{failed} of {} checks failed", outcomes.len())));
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            eprintln!("{first}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
