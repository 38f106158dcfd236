//! Command implementations. Each is a pure function of its input files,
//! arguments and seed.

use std::path::{Path, PathBuf};

use crowdirt_core::datagen::{inject_spam, simulate_dataset, ItemParam, Missingness, PopulationSpec};
use crowdirt_core::evaluate::{elpd_loo, ppc_report, LooReport, LooUnit, PpcReport};
use crowdirt_core::math::derive_seed;
use crowdirt_core::model::category_posterior;
use crowdirt_core::sampler::{fit, Fit, SamplerConfig};
use crowdirt_core::spec::enumerate_variants;
use crowdirt_core::trainlab::{run_experiment, summarize, ExperimentConfig, StrategyResult, SummaryRow};
use crowdirt_core::{ModelSpec, RatingDataset};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{
    atomic_write, csv_bytes, fmt_f64, load_fit, load_ratings_csv, save_fit, write_id_maps, write_json,
    write_ratings_csv, Manifest,
};

/// Label of the posterior predictive stream derived from a command seed.
const PPC_STREAM: u64 = 1;
const SPAM_STREAM: u64 = 2;

pub fn resolve_model(name: &str, allow_adversarial: bool) -> Result<ModelSpec> {
    Ok(ModelSpec::parse(name)?.with_adversarial(allow_adversarial))
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub model: String,
    pub allow_adversarial: bool,
    pub items: usize,
    pub raters: usize,
    pub seed: u64,
    pub prevalence: Option<f64>,
    /// Difficulty SD; the prior SD when unset.
    pub difficulty_sd: Option<f64>,
    /// Ratings per rater; complete design when unset.
    pub budget: Option<usize>,
    pub spam: usize,
    pub out: PathBuf,
}

/// Writes `ratings.csv` plus ground-truth sidecars.
pub fn simulate(args: &SimulateArgs) -> Result<RatingDataset> {
    let spec = resolve_model(&args.model, args.allow_adversarial)?;
    if args.items == 0 || args.raters == 0 {
        return Err(CliError::Usage("--items and --raters must be positive".into()));
    }
    let mut pop = PopulationSpec::from_prior(args.items, args.raters);
    pop.prevalence = args.prevalence;
    if let Some(sd) = args.difficulty_sd {
        pop.difficulty = ItemParam::Normal { mean: 0.0, sd };
    }
    if let Some(b) = args.budget {
        pop.missingness = Missingness::PerRaterBudget(b);
    }
    if args.spam > 0 {
        pop = inject_spam(&pop, args.spam, derive_seed(args.seed, &[SPAM_STREAM]))?;
    }
    let sim = simulate_dataset(spec, &pop, args.seed)?;
    write_ratings_csv(&args.out.join("ratings.csv"), &sim.data)?;

    let p = &sim.params;
    let opt = |v: &[f64], i: usize| v.get(i).map_or(String::new(), |&x| fmt_f64(x));
    let items = (0..args.items).map(|i| {
        [
            sim.data.item_ids()[i].clone(),
            sim.truth[i].to_string(),
            opt(&p.difficulty, i),
            opt(&p.discrimination, i),
            opt(&p.guessing, i),
        ]
    });
    atomic_write(&args.out.join("truth_items.csv"), &csv_bytes(&["item", "z", "beta", "delta", "lambda"], items))?;
    let raters = (0..p.alpha_sens.len()).map(|j| {
        let id = if spec.identical_raters() { "*".to_string() } else { sim.data.rater_ids()[j].clone() };
        [id, fmt_f64(p.alpha_sens[j]), fmt_f64(p.alpha_spec[j])]
    });
    atomic_write(&args.out.join("truth_raters.csv"), &csv_bytes(&["rater", "alpha_sens", "alpha_spec"], raters))?;
    write_json(
        &args.out.join("truth.json"),
        &serde_json::json!({
            "model": spec.name(),
            "allow_adversarial": spec.allow_adversarial(),
            "seed": args.seed,
            "prevalence": p.prevalence,
            "num_items": args.items,
            "num_raters": args.raters,
            "num_ratings": sim.data.len(),
        }),
    )?;
    Ok(sim.data)
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub data: PathBuf,
    pub model: String,
    pub allow_adversarial: bool,
    pub sampler: SamplerConfig,
    pub out: PathBuf,
}

/// Samples one model and writes draws, manifest, diagnostics and
/// per-item category posteriors.
pub fn fit_command(args: &FitArgs) -> Result<Fit> {
    let spec = resolve_model(&args.model, args.allow_adversarial)?;
    let data = load_ratings_csv(&args.data)?;
    fit_and_save(spec, &data, &args.sampler, &args.out)
}

fn fit_and_save(spec: ModelSpec, data: &RatingDataset, config: &SamplerConfig, out: &Path) -> Result<Fit> {
    config.validate()?;
    let f = fit(spec, data, config)?;
    let manifest = Manifest {
        model: spec.name(),
        allow_adversarial: spec.allow_adversarial(),
        num_items: data.num_items(),
        num_raters: data.num_raters(),
        num_ratings: data.len(),
        chains: config.chains,
        warmup_iters: config.warmup_iters,
        sampling_iters: config.sampling_iters,
        seed: config.seed,
        target_accept: config.target_accept,
        max_tree_depth: config.max_tree_depth,
        columns: f.layout.column_names(),
        adaptation: f.draws.adaptation.clone(),
        warmup_divergences: f.draws.warmup_divergences,
    };
    save_fit(out, &f, &manifest)?;
    write_json(&out.join("diagnostics.json"), &f.diagnostics)?;
    write_id_maps(out, data)?;
    write_category_posterior(&out.join("category_posterior.csv"), &f, data)?;
    Ok(f)
}

/// Posterior probability of a positive category per item, averaged over draws.
pub fn mean_category_posterior(f: &Fit, data: &RatingDataset) -> Result<Vec<f64>> {
    let spec = f.spec();
    let mut acc = vec![0.0; data.num_items()];
    for s in 0..f.draws.total() {
        let p = f.param_block(s)?;
        for (a, v) in acc.iter_mut().zip(category_posterior(&spec, &p, data)) {
            *a += v;
        }
    }
    let n = f.draws.total() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

fn write_category_posterior(path: &Path, f: &Fit, data: &RatingDataset) -> Result<()> {
    let post = mean_category_posterior(f, data)?;
    let rows = post.iter().enumerate().map(|(i, &v)| [data.item_ids()[i].clone(), fmt_f64(v)]);
    atomic_write(path, &csv_bytes(&["item", "pr_positive"], rows))
}

fn check_matches(manifest: &Manifest, data: &RatingDataset, dir: &Path) -> Result<()> {
    if manifest.num_items != data.num_items()
        || manifest.num_raters != data.num_raters()
        || manifest.num_ratings != data.len()
    {
        return Err(CliError::data(dir, "fit artifacts were produced from a different dataset"));
    }
    Ok(())
}

fn write_ppc(out: &Path, report: &PpcReport) -> Result<()> {
    write_json(&out.join("ppc.json"), report)?;
    let h = &report.histogram;
    let rows = (0..h.k.len()).map(|b| {
        [h.k[b].to_string(), fmt_f64(h.observed[b]), fmt_f64(h.replicate_mean[b]), fmt_f64(h.lo90[b]), fmt_f64(h.hi90[b])]
    });
    atomic_write(&out.join("vote_histogram.csv"), &csv_bytes(&["k", "observed", "replicate_mean", "lo90", "hi90"], rows))
}

#[derive(Debug, Clone)]
pub struct PpcArgs {
    pub data: PathBuf,
    pub fit_dir: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
}

/// Posterior predictive checks from saved draws.
pub fn ppc_command(args: &PpcArgs) -> Result<PpcReport> {
    let data = load_ratings_csv(&args.data)?;
    let (f, manifest) = load_fit(&args.fit_dir)?;
    check_matches(&manifest, &data, &args.fit_dir)?;
    let report = ppc_report(&f, &data, args.seed)?;
    write_ppc(&args.out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct LooArgs {
    pub data: PathBuf,
    pub fit_dir: PathBuf,
    pub unit: LooUnit,
    pub out: PathBuf,
}

/// PSIS leave-one-out from saved draws.
pub fn loo_command(args: &LooArgs) -> Result<LooReport> {
    let data = load_ratings_csv(&args.data)?;
    let (f, manifest) = load_fit(&args.fit_dir)?;
    check_matches(&manifest, &data, &args.fit_dir)?;
    let report = elpd_loo(&f, &data, args.unit)?;
    write_json(&args.out.join("loo.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineArgs {
    pub data: PathBuf,
    pub model: String,
    pub allow_adversarial: bool,
    pub sampler: SamplerConfig,
    pub unit: LooUnit,
    pub out: PathBuf,
}

/// Fit, PPC and LOO of one model into one directory. The PPC seed is
/// derived from the sampler seed.
pub fn pipeline(args: &PipelineArgs) -> Result<(Fit, PpcReport, LooReport)> {
    let spec = resolve_model(&args.model, args.allow_adversarial)?;
    let data = load_ratings_csv(&args.data)?;
    let f = fit_and_save(spec, &data, &args.sampler, &args.out)?;
    let ppc = ppc_report(&f, &data, derive_seed(args.sampler.seed, &[PPC_STREAM]))?;
    write_ppc(&args.out, &ppc)?;
    let loo = elpd_loo(&f, &data, args.unit)?;
    write_json(&args.out.join("loo.json"), &loo)?;
    Ok((f, ppc, loo))
}

/// One model's line in a comparison table. Failed fits keep their row
/// with the error and no numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub status: String,
    pub error: Option<String>,
    pub rater_p_value: Option<f64>,
    pub ratings_p_value: Option<f64>,
    pub elpd_loo: Option<f64>,
    pub se_elpd_loo: Option<f64>,
    pub num_high_k: Option<usize>,
    pub divergences: Option<usize>,
    pub max_rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub loo_unit: LooUnit,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let o = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
        let rows = self.rows.iter().map(|r| {
            vec![
                r.model.clone(),
                r.status.clone(),
                o(r.rater_p_value),
                o(r.ratings_p_value),
                o(r.elpd_loo),
                o(r.se_elpd_loo),
                r.num_high_k.map_or(String::new(), |v| v.to_string()),
                r.divergences.map_or(String::new(), |v| v.to_string()),
                o(r.max_rhat),
                r.error.clone().unwrap_or_default(),
            ]
        });
        csv_bytes(
            &[
                "model",
                "status",
                "rater_p_value",
                "ratings_p_value",
                "elpd_loo",
                "se_elpd_loo",
                "num_high_k",
                "divergences",
                "max_rhat",
                "error",
            ],
            rows,
        )
    }
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub data: PathBuf,
    /// Model names; all 18 distinct models when empty.
    pub models: Vec<String>,
    pub allow_adversarial: bool,
    pub sampler: SamplerConfig,
    pub unit: LooUnit,
    pub out: PathBuf,
}

fn compare_one(spec: ModelSpec, data: &RatingDataset, args: &CompareArgs) -> Result<ComparisonRow> {
    args.sampler.validate()?;
    let f = fit(spec, data, &args.sampler)?;
    let ppc = ppc_report(&f, data, derive_seed(args.sampler.seed, &[PPC_STREAM]))?;
    let loo = elpd_loo(&f, data, args.unit)?;
    Ok(ComparisonRow {
        model: spec.name(),
        status: "ok".into(),
        error: None,
        rater_p_value: Some(ppc.rater_p_value),
        ratings_p_value: Some(ppc.ratings_p_value),
        elpd_loo: Some(loo.elpd_loo),
        se_elpd_loo: Some(loo.se_elpd_loo),
        num_high_k: Some(loo.num_high_k),
        divergences: Some(f.diagnostics.divergences),
        max_rhat: f.diagnostics.max_rhat,
    })
}

/// Fits every requested model with the same seed and tabulates predictive
/// checks, LOO and diagnostics. Writes `comparison.csv` and `comparison.json`.
pub fn compare(args: &CompareArgs) -> Result<ComparisonTable> {
    let specs: Vec<ModelSpec> = if args.models.is_empty() {
        enumerate_variants().into_iter().map(|s| s.with_adversarial(args.allow_adversarial)).collect()
    } else {
        args.models.iter().map(|m| resolve_model(m, args.allow_adversarial)).collect::<Result<_>>()?
    };
    let data = load_ratings_csv(&args.data)?;
    let rows = specs
        .into_iter()
        .map(|spec| {
            compare_one(spec, &data, args).unwrap_or_else(|e| ComparisonRow {
                model: spec.name(),
                status: "failed".into(),
                error: Some(e.to_string()),
                rater_p_value: None,
                ratings_p_value: None,
                elpd_loo: None,
                se_elpd_loo: None,
                num_high_k: None,
                divergences: None,
                max_rhat: None,
            })
        })
        .collect();
    let table = ComparisonTable { loo_unit: args.unit, seed: args.sampler.seed, rows };
    atomic_write(&args.out.join("comparison.csv"), &table.csv_bytes())?;
    write_json(&args.out.join("comparison.json"), &table)?;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub config: ExperimentConfig,
    pub summary: Vec<SummaryRow>,
}

/// Runs the probabilistic-label training experiment. Writes one CSV row
/// per (trial, strategy, estimator) and a JSON summary of quartiles.
pub fn train_experiment(config: &ExperimentConfig, out: &Path) -> Result<(Vec<StrategyResult>, Vec<SummaryRow>)> {
    config.sampler.validate()?;
    let results = run_experiment(config)?;
    let rows = results.iter().map(|r| {
        [
            r.trial.to_string(),
            r.trial_seed.to_string(),
            r.strategy.name().to_string(),
            r.estimator.name().to_string(),
            fmt_f64(r.l2_error),
        ]
    });
    atomic_write(
        &out.join("train_results.csv"),
        &csv_bytes(&["trial", "trial_seed", "strategy", "estimator", "l2_error"], rows),
    )?;
    let summary = summarize(&results);
    write_json(&out.join("train_summary.json"), &TrainSummary { config: config.clone(), summary: summary.clone() })?;
    Ok((results, summary))
}

/// Table of the distinct models: name, family, and parameter count for
/// the given data shape.
pub fn variants_table(num_items: usize, num_raters: usize) -> String {
    let mut out = String::from("model\tgroup\tdimension\tnote\n");
    for spec in enumerate_variants() {
        let dim = crowdirt_core::params::param_dimension(spec, num_items, num_raters);
        let group = match spec.group() {
            crowdirt_core::spec::VariantGroup::TiedSensSpec => "tied_sens_spec",
            crowdirt_core::spec::VariantGroup::FreeSensSpec => "free_sens_spec",
            crowdirt_core::spec::VariantGroup::NoRaterEffects => "no_rater_effects",
        };
        out.push_str(&format!("{}\t{}\t{}\t{}\n", spec.name(), group, dim, spec.note().unwrap_or("")));
    }
    out
}
