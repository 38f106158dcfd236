use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use crowdirt::commands::{
    compare, fit_command, loo_command, pipeline, ppc_command, simulate, train_experiment, variants_table,
    CompareArgs, FitArgs, LooArgs, PipelineArgs, PpcArgs, SimulateArgs,
};
use crowdirt::{CliError, Result};
use crowdirt_core::evaluate::LooUnit;
use crowdirt_core::sampler::SamplerConfig;
use crowdirt_core::trainlab::ExperimentConfig;

/// Bayesian models for crowdsourced binary ratings.
#[derive(Parser)]
#[command(name = "crowdirt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ratings CSV with ground-truth sidecars
    Simulate {
        #[arg(long, default_value = "Full")]
        model: String,
        #[arg(long)]
        allow_adversarial: bool,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        raters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed prevalence; drawn from the prior when omitted
        #[arg(long)]
        prevalence: Option<f64>,
        /// Difficulty standard deviation; prior when omitted
        #[arg(long)]
        difficulty_sd: Option<f64>,
        /// Ratings per rater (incomplete design)
        #[arg(long)]
        budget: Option<usize>,
        /// Number of raters replaced by spammers
        #[arg(long, default_value_t = 0)]
        spam: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the posterior of one model
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior predictive checks from a saved fit
    Ppc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; defaults to the fit directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PSIS leave-one-out cross-validation from a saved fit
    Loo {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, value_enum, default_value_t = Unit::Rating)]
        unit: Unit,
        /// Output directory; defaults to the fit directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit, check and cross-validate one model
    Pipeline {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_enum, default_value_t = Unit::Rating)]
        unit: Unit,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare models on one dataset
    Compare {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated model names; all distinct models when omitted
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long)]
        allow_adversarial: bool,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_enum, default_value_t = Unit::Rating)]
        unit: Unit,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downstream regression trained from probabilistic labels
    TrainExperiment {
        #[arg(long, default_value_t = 32)]
        trials: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1024)]
        rows: usize,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the distinct models
    Variants {
        #[arg(long, default_value_t = 1)]
        items: usize,
        #[arg(long, default_value_t = 1)]
        raters: usize,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model name such as ABC or Full
    #[arg(long)]
    model: String,
    /// Drop the sens + spec > 0 constraint
    #[arg(long)]
    allow_adversarial: bool,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    target_accept: f64,
    #[arg(long, default_value_t = 10)]
    max_tree_depth: usize,
}

impl SamplerArgs {
    fn config(&self) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            warmup_iters: self.warmup,
            sampling_iters: self.samples,
            seed: self.seed,
            target_accept: self.target_accept,
            max_tree_depth: self.max_tree_depth,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Rating,
    Item,
}

impl From<Unit> for LooUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Rating => LooUnit::Rating,
            Unit::Item => LooUnit::Item,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            allow_adversarial,
            items,
            raters,
            seed,
            prevalence,
            difficulty_sd,
            budget,
            spam,
            out,
        } => {
            let data = simulate(&SimulateArgs {
                model,
                allow_adversarial,
                items,
                raters,
                seed,
                prevalence,
                difficulty_sd,
                budget,
                spam,
                out,
            })?;
            eprintln!("simulated {} ratings", data.len());
        }
        Command::Fit { model, data, sampler, out } => {
            let f = fit_command(&FitArgs {
                data,
                model: model.model,
                allow_adversarial: model.allow_adversarial,
                sampler: sampler.config(),
                out,
            })?;
            let d = &f.diagnostics;
            eprintln!(
                "max R-hat {}, min bulk ESS {}, {} divergences",
                d.max_rhat.map_or("n/a".into(), |v| format!("{v:.4}")),
                d.min_ess_bulk.map_or("n/a".into(), |v| format!("{v:.0}")),
                d.divergences
            );
            if !d.converged() {
                eprintln!("warning: chains have not converged");
            }
        }
        Command::Ppc { data, fit, seed, out } => {
            let out = out.unwrap_or_else(|| fit.clone());
            let r = ppc_command(&PpcArgs { data, fit_dir: fit, seed, out })?;
            println!("rater p-value {}\nratings p-value {}", r.rater_p_value, r.ratings_p_value);
        }
        Command::Loo { data, fit, unit, out } => {
            let out = out.unwrap_or_else(|| fit.clone());
            let r = loo_command(&LooArgs { data, fit_dir: fit, unit: unit.into(), out })?;
            println!("elpd_loo {} (se {}), {} high Pareto k", r.elpd_loo, r.se_elpd_loo, r.num_high_k);
        }
        Command::Pipeline { model, data, sampler, unit, out } => {
            let (_, ppc, loo) = pipeline(&PipelineArgs {
                data,
                model: model.model,
                allow_adversarial: model.allow_adversarial,
                sampler: sampler.config(),
                unit: unit.into(),
                out,
            })?;
            println!(
                "rater p-value {}\nratings p-value {}\nelpd_loo {} (se {})",
                ppc.rater_p_value, ppc.ratings_p_value, loo.elpd_loo, loo.se_elpd_loo
            );
        }
        Command::Compare { data, models, allow_adversarial, sampler, unit, out } => {
            let table = compare(&CompareArgs {
                data,
                models,
                allow_adversarial,
                sampler: sampler.config(),
                unit: unit.into(),
                out,
            })?;
            print!("{}", String::from_utf8_lossy(&table.csv_bytes()));
        }
        Command::TrainExperiment { trials, dim, rows, rho, sampler, out } => {
            let config = ExperimentConfig { trials, dim, rows, rho, seed: sampler.seed, sampler: sampler.config() };
            let (_, summary) = train_experiment(&config, &out)?;
            println!("estimator\tstrategy\tq1\tmedian\tq3");
            for r in summary {
                println!("{}\t{}\t{:.4}\t{:.4}\t{:.4}", r.estimator.name(), r.strategy.name(), r.q1, r.median, r.q3);
            }
        }
        Command::Variants { items, raters } => print!("{}", variants_table(items, raters)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
