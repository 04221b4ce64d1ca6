use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pgsmdp::harness::{self, exit, GradcheckOptions, RunConfig};
use pgsmdp::offense::Scenario;
use pgsmdp::policy::ActionMode;
use pgsmdp::smdp::RewardMode;
use pgsmdp::Result;

#[derive(Parser)]
#[command(name = "pgsmdp", version, about = "Train and evaluate risk-aware skill policies on the mini offense task")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides learner.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u32>,
    /// Training episodes per trial, or evaluation episodes for `eval`.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    #[arg(long, global = true)]
    scenario: Option<Scenario>,
    /// Argmax skill choice and mean RAP during evaluation.
    #[arg(long, global = true)]
    greedy: bool,
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train the probabilistic-goal agent.
    Train,
    /// Train the expected-return comparison agent.
    ErTrain,
    /// Evaluate checkpoints and print a metrics table.
    Eval {
        #[arg(required = true)]
        checkpoints: Vec<PathBuf>,
    },
    /// Check analytic gradients against finite differences and the
    /// enumeration oracle.
    Gradcheck {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, hide = true)]
        inject_rad_sign_flip: bool,
    },
    /// Write the dribble-power field of a checkpoint.
    Heatmap {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        resolution: usize,
        /// Accumulated reward at which the field is evaluated.
        #[arg(long, default_value_t = 0.5)]
        w: f64,
        /// Elapsed timesteps at which the field is evaluated.
        #[arg(long, default_value_t = 30)]
        t: u32,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.learner.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.learner.trials = trials;
    }
    if let Some(scenario) = common.scenario {
        cfg.env.scenario = scenario;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn action_mode(greedy: bool) -> ActionMode {
    if greedy {
        ActionMode::Greedy
    } else {
        ActionMode::Sample
    }
}

fn train(common: &Common, mode: RewardMode) -> Result<i32> {
    let mut cfg = load_config(common)?;
    if let Some(episodes) = common.episodes {
        cfg.learner.episodes = episodes;
    }
    cfg.validate()?;
    let run = harness::cmd_train(&cfg, mode, cfg.env.scenario, &common.out)?;
    print!("{}", run.table);
    for t in &run.manifest.trials {
        for w in &t.warnings {
            eprintln!("trial {}: {w}", t.trial);
        }
    }
    println!("manifest: {}", common.out.join(harness::MANIFEST_FILE).display());
    Ok(exit::OK)
}

fn run(cli: Cli) -> Result<i32> {
    let common = &cli.common;
    match cli.command {
        Command::Train => train(common, RewardMode::ProbabilisticGoal),
        Command::ErTrain => train(common, RewardMode::ExpectedReturn),
        Command::Eval { checkpoints } => {
            let cfg = load_config(common)?;
            let n = common.episodes.unwrap_or(cfg.learner.eval_episodes);
            let report = harness::cmd_eval(
                &checkpoints,
                &cfg,
                cfg.env.scenario,
                n,
                action_mode(common.greedy),
                cfg.learner.seed,
                Some(&common.out),
            )?;
            print!("{}", report.table);
            Ok(exit::OK)
        }
        Command::Gradcheck {
            instances,
            inject_rad_sign_flip,
        } => {
            let report = harness::cmd_gradcheck(GradcheckOptions {
                instances,
                seed: common.seed.unwrap_or(1),
                inject_rad_sign_flip,
            })?;
            print!("{}", report.to_text());
            Ok(if report.passed() { exit::OK } else { exit::CHECK_FAILED })
        }
        Command::Heatmap {
            checkpoint,
            resolution,
            w,
            t,
        } => {
            let cfg = load_config(common)?;
            let cells = harness::cmd_heatmap(&checkpoint, &cfg, cfg.env.scenario, resolution, w, t)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("heatmap.tsv");
            harness::write_heatmap(&cells, std::fs::File::create(&path)?)?;
            let (halfway, goal) = harness::region_means(&cells);
            let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
            println!("dribble power near halfway {} near goal {}", show(halfway), show(goal));
            println!("heatmap: {}", display(&path));
            Ok(exit::OK)
        }
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml()?);
            Ok(exit::OK)
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            harness::exit_code(&err)
        }
    };
    ExitCode::from(code as u8)
}
