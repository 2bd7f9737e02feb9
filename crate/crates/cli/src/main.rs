//! `delaystab`: config-driven experiments on singularly perturbed gradient flows.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delaystab::limit::{MuRule, Side};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "delaystab", version, about = "Delayed loss of stability in gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses on the model.
    Validate(Common),
    /// Compute t_c, t* and the spectral profile.
    Analyze(Common),
    /// List the critical points of F(t, ·).
    Critical {
        #[command(flatten)]
        common: Common,
        /// Time of the search; t* when omitted.
        #[arg(long)]
        time: Option<f64>,
    },
    /// Run the ε-sweep, fit the delay and locate the jump.
    Sweep(Common),
    /// Shoot both heteroclinics of the flow frozen at t*.
    Heteroclinic(Common),
    /// Print the default configuration.
    Defaults {
        #[arg(long, value_enum, default_value_t = Format::Toml)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Toml,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum MuRuleArg {
    Auto,
}

#[derive(Args)]
struct Common {
    /// Configuration file, JSON or TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model: quartic-1d, quartic-2d, commuting or rotating.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    sign: Option<SignArg>,
    /// Fixed detection radius.
    #[arg(long, conflicts_with = "mu_rule")]
    mu: Option<f64>,
    #[arg(long, value_enum)]
    mu_rule: Option<MuRuleArg>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(name) = &self.model {
            cfg.model = ModelSpec::preset(name)?;
        }
        if let Some(eps) = &self.eps_list {
            cfg.eps = eps.clone();
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        if let Some(sign) = self.sign {
            cfg.sign = match sign {
                SignArg::Plus => Side::Plus,
                SignArg::Minus => Side::Minus,
            };
        }
        if let Some(mu) = self.mu {
            cfg.mu = MuRule::Fixed(mu);
        }
        if self.mu_rule.is_some() {
            cfg.mu = MuRule::Auto;
        }
        if let Some(delta0) = self.delta0 {
            cfg.delta0 = delta0;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        cfg.validate()?;
        cfg.prepare_output()?;
        Ok(cfg)
    }
}

fn summary(name: &str, cfg: &ExperimentConfig, status: &str, body: (&str, Value)) -> Value {
    let model = cfg.model.build().map(|m| m.name().to_string()).ok();
    let mut v = json!({
        "tool": "delaystab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "config_hash": cfg.hash(),
        "config": cfg,
        "model": model,
        "status": status,
    });
    v[body.0] = body.1;
    v
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(&path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run_command(name: &str, cfg: &ExperimentConfig, outcome: Result<commands::Report, CliError>) -> ExitCode {
    let (doc, files, failure) = match outcome {
        Ok(report) => {
            let status = if report.failure.is_some() { "failed" } else { "ok" };
            let mut doc = summary(name, cfg, status, ("result", report.result));
            if let Some(f) = &report.failure {
                doc["error"] = json!({ "kind": f.kind(), "message": f.to_string() });
            }
            (doc, report.files, report.failure)
        }
        Err(e) => {
            let doc = summary(
                name,
                cfg,
                "error",
                ("error", json!({ "kind": e.kind(), "message": e.to_string() })),
            );
            (doc, Vec::new(), Some(e))
        }
    };
    let text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    let mut result = Ok(());
    for (rel, bytes) in &files {
        result = result.and_then(|_| write(cfg.output.join(rel), bytes));
    }
    result = result.and_then(|_| {
        write(
            cfg.output.join(format!("{name}_summary.json")),
            format!("{text}\n").as_bytes(),
        )
    });
    println!("{text}");
    let failure = failure.or(result.err());
    match failure {
        Some(e) => {
            eprintln!("delaystab {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        None => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, time) = match &cli.command {
        Command::Defaults { format } => {
            let cfg = ExperimentConfig::default();
            let text = match format {
                Format::Toml => toml::to_string_pretty(&cfg).expect("defaults serialize"),
                Format::Json => serde_json::to_string_pretty(&cfg).expect("defaults serialize"),
            };
            println!("{text}");
            return ExitCode::SUCCESS;
        }
        Command::Validate(c) => ("validate", c, None),
        Command::Analyze(c) => ("analyze", c, None),
        Command::Critical { common, time } => ("critical", common, *time),
        Command::Sweep(c) => ("sweep", c, None),
        Command::Heteroclinic(c) => ("heteroclinic", c, None),
    };
    let cfg = match common.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("delaystab {name}: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match name {
        "validate" => commands::validate(&cfg),
        "analyze" => commands::analyze(&cfg),
        "critical" => commands::critical(&cfg, time),
        "sweep" => commands::sweep(&cfg),
        _ => commands::heteroclinics(&cfg),
    };
    run_command(name, &cfg, outcome)
}
