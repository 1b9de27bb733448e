//! `cpf`: synthetic scenes, contact annotation, grasp refinement and evaluation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpf::optim::Mode;

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "cpf", version, about = "Contact potential field grasp refinement")]
struct Cli {
    /// Pipeline configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// hand_alone or hand_object.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Repulsive spring stiffness.
    #[arg(long = "k-rpl", global = true, allow_negative_numbers = true)]
    k_rpl: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads across samples; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Twist-splay-bend frame table of a hand model.
    Frames {
        /// Hand model document; the built-in synthetic hand when omitted.
        hand_model: Option<PathBuf>,
    },
    /// Anchor set of a hand model.
    Anchors { hand_model: Option<PathBuf> },
    /// Sphere-grasp scenes with ground-truth contact labels.
    Synth {
        /// Number of scenes, seeds `seed..seed + count`.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Contact labels from each scene's ground-truth pose.
    Annotate {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
    },
    /// Refines each scene's initial pose against its contact labels.
    Refine {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
    },
    /// Grasp metrics against each scene's ground truth.
    Eval {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        /// Output directory of `refine`; scores the initial poses when omitted.
        #[arg(long)]
        pred: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<cpf::Error> for Failure {
    fn from(e: cpf::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure::Usage(format!("config: {e}")))?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(k) = cli.k_rpl {
        cfg.cpf.k_rpl = k;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out.clone_from(&cli.out);
    }
    match &cli.command {
        Command::Frames { hand_model } | Command::Anchors { hand_model } if hand_model.is_some() => {
            cfg.hand_model.clone_from(hand_model);
        }
        Command::Synth { count: Some(c) } => cfg.count = *c,
        _ => {}
    }
    cfg.validate().map_err(|e| Failure::Usage(format!("config: {e}")))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Frames { .. } => commands::frames(&cfg),
        Command::Anchors { .. } => commands::anchors(&cfg),
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Annotate { scenes } => commands::annotate_cmd(&cfg, scenes),
        Command::Refine { scenes } => commands::refine_cmd(&cfg, scenes),
        Command::Eval { scenes, pred } => commands::eval(&cfg, scenes, pred.as_deref()),
    })
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head: Vec<&str> = msg.lines().take_while(|l| !l.starts_with("Usage:")).collect();
            eprintln!("cpf: {}", one_line(head.join(" ").trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("cpf: {}", one_line(&m));
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("cpf: {}", one_line(&m));
            ExitCode::from(2)
        }
    }
}
