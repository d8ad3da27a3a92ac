//! One full run: every seed trains its own ensembles on a fresh train/validation split and is
//! scored on the shared test pool.

use anyhow::Context;
use eauq::data::{load_csv_auto, split_run, synthesize, Dataset, Split};
use eauq::estimators::{
    build_ce, build_eae, estimate_all, mcmc_from_checkpoints, CeConfig, DropoutSettings, Ensemble,
    EstimateContext,
};
use eauq::eval::{compare_report, rejection_curve, MethodSummary, MetricsReport, ScoredPrediction, SeedResult};
use eauq::nn::{finetune_to_experts, DropoutMode, Mlp};
use eauq::{seed, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, Effective, RunConfig, ScalarKind};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Everything written to `report.json`. Contains no timestamps or paths of its own, so equal
/// configurations give byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub notes: Vec<String>,
    pub config: RunConfig,
    pub effective: Effective,
    pub dataset: DatasetInfo,
    pub seeds: Vec<SeedRecord>,
    pub summary: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub n_examples: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub test_fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: usize,
    pub run_seed: u64,
    pub metrics: Vec<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub finetune: Option<FinetuneDiagnostics>,
}

/// Validation MSE of the designated expert-aware network against the mean expert vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneDiagnostics {
    pub val_mse_before: f64,
    pub val_mse_after: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.estimator == method)
    }

    /// Per-seed AAC of one method, in seed order.
    pub fn aac_by_seed(&self, method: &str) -> Vec<f64> {
        self.seeds
            .iter()
            .filter_map(|s| s.metrics.iter().find(|m| m.estimator == method).map(|m| m.aac))
            .collect()
    }
}

fn header_notes(cfg: &RunConfig, eff: &Effective) -> Vec<String> {
    vec![
        format!(
            "desk scale {}: classification training runs {} of {} epochs; snapshot interval {} of {} epochs",
            cfg.desk_scale, eff.train.epochs, cfg.train.epochs, eff.mcmc_interval, cfg.ensembles.mcmc_interval
        ),
        format!(
            "learning rates multiplied by {} for plain SGD on a small MLP: training {}, fine-tuning {}",
            cfg.lr_scale, eff.train.initial_lr, eff.finetune.initial_lr
        ),
        "predictions for every method come from the classification ensemble mean".into(),
        "rejection ties broken by example id; AAC is the mean of (1 - accuracy) over rejection counts 0..N-1".into(),
        "test pool fixed by the master seed; train/validation resplit per seed".into(),
    ]
}

fn load_dataset<T: Real>(source: &DataSource) -> anyhow::Result<Dataset<T>> {
    Ok(match source {
        DataSource::Synthetic(s) => synthesize(s)?,
        DataSource::Csv { path } => load_csv_auto(path).with_context(|| format!("loading {}", path.display()))?,
    })
}

/// Runs the configured experiment. `jobs` caps worker threads; results do not depend on it.
pub fn run_experiment(cfg: &RunConfig, jobs: Option<usize>) -> anyhow::Result<RunReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    pool.install(|| match cfg.scalar {
        ScalarKind::F64 => run_typed::<f64>(cfg),
        ScalarKind::F32 => run_typed::<f32>(cfg),
    })
}

fn run_typed<T: Real>(cfg: &RunConfig) -> anyhow::Result<RunReport> {
    let dataset = load_dataset::<T>(&cfg.data)?;
    cfg.check_data_supports_methods(dataset.has_votes(), dataset.has_oracle())?;
    let eff = cfg.effective();
    let spec = cfg.split_spec(cfg.master_seed);
    let (n_train, n_val, n_test) = spec.sizes(dataset.len());

    let seeds: Vec<(SeedRecord, Vec<SeedResult>)> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|s| run_seed(cfg, &eff, &dataset, s).with_context(|| format!("seed {s}")))
        .collect::<anyhow::Result<_>>()?;

    let all: Vec<SeedResult> = seeds.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    let summary = compare_report(&all)?;
    let test_fingerprint = all[0].report.test_fingerprint;
    Ok(RunReport {
        format_version: REPORT_FORMAT_VERSION,
        notes: header_notes(cfg, &eff),
        config: cfg.clone(),
        effective: eff,
        dataset: DatasetInfo {
            n_examples: dataset.len(),
            n_features: dataset.n_features(),
            n_train,
            n_val,
            n_test,
            test_fingerprint,
        },
        seeds: seeds.into_iter().map(|(r, _)| r).collect(),
        summary,
    })
}

fn val_mse<T: Real>(model: &Mlp<T>, val: &Dataset<T>) -> anyhow::Result<f64> {
    let mut total = 0.0;
    for e in val.examples() {
        let target = e.mean_vote().context("validation example without votes")?;
        let p = model.forward(&e.features, DropoutMode::Deterministic)?;
        let d = (p - target).to_f64().unwrap_or(f64::NAN);
        total += d * d;
    }
    Ok(total / val.len() as f64)
}

fn run_seed<T: Real>(
    cfg: &RunConfig,
    eff: &Effective,
    dataset: &Dataset<T>,
    s: usize,
) -> anyhow::Result<(SeedRecord, Vec<SeedResult>)> {
    let run_seed = seed::derive(cfg.master_seed, "run", s as u64);
    let Split { train, val, test } = split_run(dataset, &cfg.split_spec(cfg.master_seed), run_seed)?;
    let train_sets = [train];
    let methods = &cfg.methods;

    let ce = build_ce(
        &train_sets,
        &CeConfig {
            k: cfg.ensembles.k_ce,
            hidden: cfg.model.hidden.clone(),
            dropout_rate: cfg.model.dropout_rate,
            train: eff.train.clone(),
            master_seed: seed::derive(run_seed, "ce", 0),
        },
    )?;

    let mcmc: Vec<Ensemble<T>> = if methods.iter().any(|m| m.needs_mcmc()) {
        ce.checkpoints
            .iter()
            .map(|cps| mcmc_from_checkpoints(cps, cfg.ensembles.mcmc_keep))
            .collect::<eauq::Result<_>>()?
    } else {
        Vec::new()
    };

    let ft_config = eff.finetune.clone().with_seed(seed::derive(run_seed, "finetune", 0));
    let base = &ce.ensemble.members()[0];
    let (eae, ean) = if methods.iter().any(|m| m.needs_eae()) {
        let eae = build_eae(&ce.ensemble, &train_sets, &ft_config)?;
        let ean = eae.members()[0].clone();
        (Some(eae), Some(ean))
    } else if methods.iter().any(|m| m.needs_finetuning()) {
        // Same substream as member 0 of a full expert-aware ensemble.
        let cfg0 = ft_config.clone().with_seed(seed::derive(ft_config.seed, "eae-finetune", 0));
        (None, Some(finetune_to_experts(base, &train_sets[0], &cfg0)?))
    } else {
        (None, None)
    };
    let finetune = match &ean {
        Some(ean) => Some(FinetuneDiagnostics { val_mse_before: val_mse(base, &val)?, val_mse_after: val_mse(ean, &val)? }),
        None => None,
    };

    let ctx = EstimateContext {
        ce: Some(&ce.ensemble),
        eae: eae.as_ref(),
        ean: ean.as_ref(),
        mcmc: &mcmc,
        dropout: DropoutSettings {
            n_passes: cfg.ensembles.dropout_passes,
            rate: cfg.ensembles.dropout_p,
            seed: seed::derive(run_seed, "mc-dropout", 0),
        },
    };
    let examples = test.examples();
    let predicted: Vec<T> = examples.iter().map(|e| ctx.predict(&e.features)).collect::<eauq::Result<_>>()?;
    let fingerprint = test.id_fingerprint();

    let mut results = Vec::with_capacity(methods.len());
    for &method in methods {
        let scores = estimate_all(method, &ctx, examples, cfg.combination).with_context(|| format!("scoring {method}"))?;
        let preds: Vec<ScoredPrediction<T>> = examples
            .iter()
            .zip(&predicted)
            .zip(scores)
            .map(|((e, &p), u)| ScoredPrediction {
                example_id: e.id.clone(),
                predicted_prob: p,
                label: e.label,
                uncertainty: u.value,
            })
            .collect();
        let curve = rejection_curve(&preds)?;
        let report = MetricsReport::from_curve(&curve, method.name(), s as u64, fingerprint)?;
        results.push(SeedResult::new(&curve, report));
    }
    let record = SeedRecord {
        seed: s,
        run_seed,
        metrics: results.iter().map(|r| r.report.clone()).collect(),
        finetune,
    };
    Ok((record, results))
}
