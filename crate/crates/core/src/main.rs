use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use structdm::harness::{
    self, gradcheck::GradcheckOptions, ChatAgent, ChatSession, EvalRequest, ExperimentConfig, Progress,
};
use structdm::learn::{GoalOptions, Mode};
use structdm::policy::PolicyKind;

#[derive(Parser)]
#[command(name = "structdm", version, about = "Multi-domain dialogue policies: train, evaluate, inspect")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OntologyArgs {
    /// Ontology JSON (defaults to the bundled seven-domain ontology).
    #[arg(long)]
    ontology: Option<PathBuf>,
    /// Comma-separated domains to keep, e.g. restaurant,hotel.
    #[arg(long, value_delimiter = ',')]
    domains: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment into a run directory (resumes finished seeds).
    Train {
        /// TOML experiment config; a run's manifest.toml works too.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Named preset (acgos).
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long, conflicts_with_all = ["config", "preset"])]
        policy: Option<PolicyKind>,
        #[arg(long, conflicts_with_all = ["config", "preset"])]
        mode: Option<Mode>,
        /// Run this single seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dialogues: Option<usize>,
        #[arg(long)]
        eval_every: Option<usize>,
        #[arg(long)]
        eval_dialogues: Option<usize>,
        #[command(flatten)]
        ontology: OntologyArgs,
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy evaluation of a checkpoint, or of the oracle without one.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        dialogues: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = GoalOptions::default().max_domains)]
        max_goal_domains: usize,
        #[command(flatten)]
        ontology: OntologyArgs,
        /// Write per-turn JSON lines here.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Quartiles, whiskers and outliers across seeds, as CSV.
    Aggregate {
        /// Run directories or metrics CSV files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Talk to a policy (or the oracle) by typing user acts.
    Chat {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        ontology: OntologyArgs,
    },
    /// Ontology, state sizes and parameter table of a policy.
    Describe {
        #[arg(long, default_value = "uhgnn")]
        policy: PolicyKind,
        #[command(flatten)]
        ontology: OntologyArgs,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        /// A policy kind, or `all`.
        #[arg(long, default_value = "all")]
        policy: String,
        /// A learning mode, or `all`.
        #[arg(long, default_value = "all")]
        mode: String,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        ontology: OntologyArgs,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train {
            config,
            preset,
            policy,
            mode,
            seed,
            dialogues,
            eval_every,
            eval_dialogues,
            ontology,
            out,
        } => {
            let mut cfg = match (&config, &preset) {
                (Some(path), _) => ExperimentConfig::load(path)?,
                (None, Some(p)) => ExperimentConfig::from_toml_str(&format!("preset = {p:?}"), None)?,
                (None, None) => ExperimentConfig::new(policy.unwrap_or(PolicyKind::Uhgnn), mode.unwrap_or(Mode::Ilfos)),
            };
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(v) = dialogues {
                cfg.train_dialogues = v;
            }
            if let Some(v) = eval_every {
                cfg.eval_every = v;
            }
            if let Some(v) = eval_dialogues {
                cfg.eval_dialogues = v;
            }
            if ontology.ontology.is_some() {
                cfg.ontology = ontology.ontology;
            }
            if ontology.domains.is_some() {
                cfg.domains = ontology.domains;
            }
            let start = Instant::now();
            let rows = harness::train(&cfg, &out, &mut |p| match p {
                Progress::SeedSkipped(s) => eprintln!("seed {s}: already finished"),
                Progress::Evaluated(r) => eprintln!(
                    "[{:>7.1}s] seed {} after {:>6} dialogues: success {:.3} complete {:.3} turns {:.1}",
                    start.elapsed().as_secs_f64(),
                    r.seed,
                    r.dialogues_trained,
                    r.success,
                    r.complete,
                    r.avg_turns_all
                ),
            })?;
            eprintln!("wrote {} metric rows to {}", rows.len(), out.display());
        }
        Command::Evaluate {
            checkpoint,
            dialogues,
            seed,
            max_goal_domains,
            ontology,
            trajectories,
        } => {
            let label = checkpoint
                .as_ref()
                .map_or("oracle".to_string(), |p| p.display().to_string().replace(',', "_"));
            let request = EvalRequest {
                checkpoint,
                ontology: ontology.ontology,
                domains: ontology.domains,
                dialogues,
                seed,
                goals: GoalOptions {
                    max_domains: max_goal_domains,
                    ..GoalOptions::default()
                },
                trajectories,
                label,
            };
            let (row, _) = harness::evaluate(&request)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            w.serialize(&row)?;
            w.flush()?;
        }
        Command::Aggregate { runs, out } => {
            let rows = harness::aggregate(&runs)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    harness::write_aggregate(BufWriter::new(f), &rows)?;
                }
                None => harness::write_aggregate(io::stdout(), &rows)?,
            }
        }
        Command::Chat { checkpoint, ontology } => {
            let (ont, agent) = match checkpoint {
                Some(path) => {
                    let p = harness::load_policy(&path, ontology.ontology.as_deref(), ontology.domains.as_deref())?;
                    (p.ontology().clone(), ChatAgent::Policy(Box::new(p)))
                }
                None => (
                    harness::load_ontology(ontology.ontology.as_deref(), ontology.domains.as_deref())?,
                    ChatAgent::Oracle,
                ),
            };
            let mut session = ChatSession::new(ont, agent);
            harness::run_chat(&mut session, io::stdin().lock(), io::stdout().lock())?;
        }
        Command::Describe { policy, ontology } => {
            let ont = harness::load_ontology(ontology.ontology.as_deref(), ontology.domains.as_deref())?;
            print!("{}", harness::describe(policy, &ont)?);
        }
        Command::Gradcheck {
            policy,
            mode,
            seeds,
            seed,
            ontology,
        } => {
            let kinds: Vec<PolicyKind> = if policy == "all" {
                PolicyKind::ALL.to_vec()
            } else {
                vec![policy.parse()?]
            };
            let modes: Vec<Mode> = if mode == "all" { Mode::ALL.to_vec() } else { vec![mode.parse()?] };
            if seeds == 0 {
                bail!("--seeds must be positive");
            }
            let ont = harness::load_ontology(ontology.ontology.as_deref(), ontology.domains.as_deref())?;
            let mut failed = 0;
            let mut out = io::stdout().lock();
            for &k in &kinds {
                for &m in &modes {
                    for s in seed..seed + seeds {
                        let r = harness::gradcheck(k, m, s, &ont, GradcheckOptions::default())?;
                        failed += usize::from(!r.passed());
                        writeln!(
                            out,
                            "{:<4} {:<8} {:<6} seed {:>3}: {:>4} coords ({} at kinks skipped), max rel err {:.2e} at {}[{}]",
                            if r.passed() { "ok" } else { "FAIL" },
                            k,
                            m,
                            s,
                            r.coordinates,
                            r.kinks,
                            r.max_rel_error,
                            r.worst.0,
                            r.worst.1
                        )?;
                    }
                }
            }
            if failed > 0 {
                writeln!(out, "{failed} check(s) failed")?;
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
