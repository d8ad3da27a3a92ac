//! Subcommand implementations. Each returns an error instead of exiting; `main` maps errors to
//! exit codes.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use eauq::data::{csv_columns, synthesize, write_csv_to, DatasetManifest, SyntheticConfig};
use eauq::eval::{curve_csv, format_table, rejection_curve, render_rejection_svg, MetricsReport, ScoredPrediction};
use eauq::seed;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::experiment::{run_experiment, RunReport};
use crate::output::{method_file_stem, write_atomic};
use crate::{UsageError, OUTPUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "eauq", version, about = "Expert-aware uncertainty estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with simulated expert votes.
    Synth(SynthArgs),
    /// Train, fine-tune and score every configured method over all seeds.
    Run(RunArgs),
    /// Compute rejection metrics for externally produced scores.
    Evaluate(EvaluateArgs),
    /// Print the table of a finished run and optionally redraw its plot.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub features: usize,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u16).range(1..))]
    pub experts: u16,
    #[arg(long, default_value_t = 0.15)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    /// Fraction of examples placed inside the ambiguous band around the class boundary.
    #[arg(long, default_value_t = 0.3)]
    pub band: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to $EAUQ_OUTPUT_DIR, then `eauq-out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base name of the CSV and manifest files.
    #[arg(long, default_value = "synthetic")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `desk_scale` from the config.
    #[arg(long)]
    pub desk_scale: Option<f64>,
    /// Overrides `n_seeds` from the config.
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with `example_id,uncertainty` and optionally `estimator`.
    #[arg(long)]
    pub scores: PathBuf,
    /// CSV with `example_id,predicted_prob,label`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` written by `run`.
    pub report: PathBuf,
    /// Also write the rejection-curve plot here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(|_| ()),
        Command::Run(a) => cmd_run(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Report(a) => cmd_report(&a),
    }
}

fn resolve_out(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    flag.or(configured)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("eauq-out"))
}

/// Writes `<name>.csv` and `<name>.manifest.json`; returns the CSV path.
pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<PathBuf> {
    let config = SyntheticConfig {
        n_examples: args.n,
        n_features: args.features,
        class_separation: args.separation,
        aleatoric_band_fraction: args.band,
        n_experts: args.experts as usize,
        expert_noise_sd: args.noise_sd,
        seed: args.seed,
    };
    config.validate().map_err(|e| UsageError(e.to_string()))?;
    let dataset = synthesize::<f64>(&config)?;
    let mut csv = Vec::new();
    write_csv_to(&dataset, &mut csv)?;
    let manifest = DatasetManifest {
        format_version: 1,
        provenance: "synthetic Gaussian mixture with simulated expert votes".into(),
        n_examples: dataset.len(),
        n_features: dataset.n_features(),
        n_experts: config.n_experts,
        columns: csv_columns(&dataset),
        synthetic: Some(config),
        split: None,
    };
    let dir = resolve_out(args.out.as_deref(), None);
    let csv_path = dir.join(format!("{}.csv", args.name));
    write_atomic(&csv_path, &csv)?;
    write_atomic(&dir.join(format!("{}.manifest.json", args.name)), manifest.to_json()?.as_bytes())?;
    eprintln!("wrote {} ({} rows)", csv_path.display(), dataset.len());
    Ok(csv_path)
}

/// Runs the experiment and writes `report.json`, `table.txt`, `curves/*.csv` and
/// `rejection_curves.svg`. Returns the report and the output directory.
pub fn cmd_run(args: &RunArgs) -> anyhow::Result<(RunReport, PathBuf)> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(d) = args.desk_scale {
        cfg.desk_scale = d;
    }
    if let Some(n) = args.seeds {
        cfg.n_seeds = n;
    }
    if args.jobs == Some(0) {
        bail!(UsageError("--jobs must be positive".into()));
    }
    cfg.validate()?;
    let dir = resolve_out(args.out.as_deref(), cfg.output_dir.as_deref());
    let report = run_experiment(&cfg, args.jobs)?;
    write_run_outputs(&report, &dir)?;
    print!("{}", format_table(&report.summary));
    Ok((report, dir))
}

pub fn write_run_outputs(report: &RunReport, dir: &Path) -> anyhow::Result<()> {
    for s in &report.summary {
        let path = dir.join("curves").join(format!("{}.csv", method_file_stem(&s.estimator)));
        write_atomic(&path, curve_csv(&s.curve_points()).as_bytes())?;
    }
    write_atomic(&dir.join("table.txt"), table_with_notes(report).as_bytes())?;
    write_atomic(&dir.join("rejection_curves.svg"), svg_of(report).as_bytes())?;
    // Last, so its presence marks a complete run.
    write_atomic(&dir.join("report.json"), report.to_json().as_bytes())
}

fn table_with_notes(report: &RunReport) -> String {
    let mut out = String::new();
    for n in &report.notes {
        out.push_str(&format!("# {n}\n"));
    }
    out.push_str(&format!(
        "# {} seeds, {} test examples\n",
        report.seeds.len(),
        report.dataset.n_test
    ));
    out + &format_table(&report.summary)
}

fn svg_of(report: &RunReport) -> String {
    let series: Vec<(String, Vec<(f64, f64)>)> =
        report.summary.iter().map(|s| (s.estimator.clone(), s.curve_points())).collect();
    render_rejection_svg(&series)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    example_id: String,
    #[serde(default)]
    estimator: Option<String>,
    uncertainty: f64,
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    example_id: String,
    predicted_prob: f64,
    label: u8,
}

fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<R>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| UsageError(format!("{} row {}: {e}", path.display(), i + 2)).into()))
        .collect()
}

/// Joins scores with predictions on `example_id` and writes `metrics.json`, one report per
/// estimator in order of first appearance.
pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<Vec<MetricsReport>> {
    let scores: Vec<ScoreRow> = read_rows(&args.scores)?;
    if scores.is_empty() {
        bail!(UsageError(format!("{} contains no scores", args.scores.display())));
    }
    let preds: Vec<PredictionRow> = read_rows(&args.predictions)?;
    let mut by_id: HashMap<&str, &PredictionRow> = HashMap::with_capacity(preds.len());
    for p in &preds {
        if p.label > 1 {
            bail!(UsageError(format!("label of `{}` must be 0 or 1", p.example_id)));
        }
        if by_id.insert(p.example_id.as_str(), p).is_some() {
            bail!(UsageError(format!("duplicate prediction for `{}`", p.example_id)));
        }
    }

    let mut groups: Vec<(String, Vec<&ScoreRow>)> = Vec::new();
    for row in &scores {
        let name = row.estimator.clone().unwrap_or_else(|| "SCORE".into());
        match groups.iter_mut().find(|(n, _)| *n == name) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((name, vec![row])),
        }
    }

    let mut reports = Vec::with_capacity(groups.len());
    for (name, rows) in &groups {
        let missing: Vec<&str> = rows
            .iter()
            .map(|r| r.example_id.as_str())
            .filter(|id| !by_id.contains_key(id))
            .collect();
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(5).copied().collect();
            bail!(UsageError(format!(
                "{name}: {} score ids have no prediction, first: {}",
                missing.len(),
                shown.join(", ")
            )));
        }
        let mut seen = BTreeMap::new();
        let joined: Vec<ScoredPrediction<f64>> = rows
            .iter()
            .map(|r| {
                if seen.insert(r.example_id.as_str(), ()).is_some() {
                    bail!(UsageError(format!("{name}: duplicate score for `{}`", r.example_id)));
                }
                let p = by_id[r.example_id.as_str()];
                Ok(ScoredPrediction {
                    example_id: r.example_id.clone(),
                    predicted_prob: p.predicted_prob,
                    label: p.label == 1,
                    uncertainty: r.uncertainty,
                })
            })
            .collect::<anyhow::Result<_>>()?;
        let ids: Vec<&str> = seen.keys().copied().collect();
        let fingerprint = seed::stable_hash(ids.join("\n").as_bytes());
        let curve = rejection_curve(&joined).map_err(|e| UsageError(format!("{name}: {e}")))?;
        reports.push(MetricsReport::from_curve(&curve, name.clone(), 0, fingerprint)?);
    }

    let dir = resolve_out(args.out.as_deref(), None);
    let json = serde_json::to_string_pretty(&reports)? + "\n";
    write_atomic(&dir.join("metrics.json"), json.as_bytes())?;
    for r in &reports {
        let omit = r.fraction_to_99pct.map_or("unreachable".to_string(), |f| format!("{:.1}%", f * 100.0));
        println!(
            "{}: AAC x1e-4 {:.1}, acc@10% {:.2}%, omit to 99% {omit}",
            r.estimator,
            r.aac * 1e4,
            r.acc_at_10pct_discard * 100.0
        );
    }
    Ok(reports)
}

pub fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", args.report.display())))?;
    let report: RunReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.report.display()))?;
    print!("{}", table_with_notes(&report));
    if let Some(fine) = report.seeds.iter().map(|s| s.finetune).collect::<Option<Vec<_>>>() {
        let better = fine.iter().filter(|f| f.val_mse_after < f.val_mse_before).count();
        println!("fine-tuning lowered validation MSE to the mean vote in {better}/{} seeds", fine.len());
    }
    if let Some(path) = &args.svg {
        write_atomic(path, svg_of(&report).as_bytes())?;
    }
    Ok(())
}
