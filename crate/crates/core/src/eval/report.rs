use serde::{Deserialize, Serialize};

use super::curve::{aac, accuracy_at_discard, fraction_to_accuracy, RejectionCurve};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DISCARD_FRACTION: f64 = 0.10;
pub const TARGET_ACCURACY: f64 = 0.99;

/// The three scalar metrics of one estimator on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub estimator: String,
    pub seed: u64,
    pub n_test: usize,
    /// Order-independent hash of the test ids; equal across seeds under a fixed test pool.
    pub test_fingerprint: u64,
    pub aac: f64,
    pub acc_at_10pct_discard: f64,
    #[serde(with = "reach_serde")]
    pub fraction_to_99pct: Option<f64>,
}

impl MetricsReport {
    pub fn from_curve<T: Scalar>(
        curve: &RejectionCurve<T>,
        estimator: impl Into<String>,
        seed: u64,
        test_fingerprint: u64,
    ) -> Result<Self> {
        let f = |v: T| v.to_f64().ok_or_else(|| Error::input("metric not representable as f64"));
        Ok(Self {
            estimator: estimator.into(),
            seed,
            n_test: curve.n_total(),
            test_fingerprint,
            aac: f(aac(curve))?,
            acc_at_10pct_discard: f(accuracy_at_discard(curve, DISCARD_FRACTION)?)?,
            fraction_to_99pct: fraction_to_accuracy(curve, T::lit(TARGET_ACCURACY))?
                .fraction()
                .map(f)
                .transpose()?,
        })
    }
}

/// `null`-free encoding: a number, or the string `"unreachable"`.
mod reach_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Value(*x),
            None => Repr::Word("unreachable".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Word(w) if w == "unreachable" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("unexpected `{w}`"))),
        }
    }
}

/// Metrics plus the accuracy series of one estimator on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub report: MetricsReport,
    pub accuracies: Vec<f64>,
}

impl SeedResult {
    pub fn new<T: Scalar>(curve: &RejectionCurve<T>, report: MetricsReport) -> Self {
        Self {
            accuracies: curve.accuracies().map(|a| a.to_f64().unwrap_or(f64::NAN)).collect(),
            report,
        }
    }
}

/// Per-estimator means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub estimator: String,
    pub n_seeds: usize,
    pub n_test: usize,
    pub mean_aac: f64,
    pub mean_acc_at_10pct_discard: f64,
    /// Mean over the seeds where 99% accuracy was reachable.
    #[serde(with = "reach_serde")]
    pub mean_fraction_to_99pct: Option<f64>,
    pub n_seeds_reaching_99pct: usize,
    /// Pointwise mean accuracy at rejected fraction `m / n_test`.
    pub mean_curve: Vec<f64>,
}

impl MethodSummary {
    pub fn curve_points(&self) -> Vec<(f64, f64)> {
        let n = self.n_test as f64;
        self.mean_curve.iter().enumerate().map(|(m, &a)| (m as f64 / n, a)).collect()
    }
}

/// Averages per estimator, in order of first appearance.
///
/// Every record must come from the same test pool (same size and id fingerprint).
pub fn compare_report(results: &[SeedResult]) -> Result<Vec<MethodSummary>> {
    let first = results
        .first()
        .ok_or_else(|| Error::Aggregation("no results to aggregate".into()))?;
    let (n_test, fp) = (first.report.n_test, first.report.test_fingerprint);
    if let Some(bad) = results
        .iter()
        .find(|r| r.report.n_test != n_test || r.report.test_fingerprint != fp)
    {
        return Err(Error::Aggregation(format!(
            "{} seed {} was evaluated on a different test set ({} examples, fingerprint {:016x}) than \
             the first record ({n_test} examples, fingerprint {fp:016x})",
            bad.report.estimator, bad.report.seed, bad.report.n_test, bad.report.test_fingerprint
        )));
    }
    if let Some(bad) = results.iter().find(|r| r.accuracies.len() != n_test) {
        return Err(Error::Aggregation(format!(
            "{} seed {} has {} curve points, expected {n_test}",
            bad.report.estimator,
            bad.report.seed,
            bad.accuracies.len()
        )));
    }

    let mut names: Vec<&str> = Vec::new();
    for r in results {
        if !names.contains(&r.report.estimator.as_str()) {
            names.push(&r.report.estimator);
        }
    }
    Ok(names
        .into_iter()
        .map(|name| {
            let rs: Vec<&SeedResult> = results.iter().filter(|r| r.report.estimator == name).collect();
            let k = rs.len() as f64;
            let reach: Vec<f64> = rs.iter().filter_map(|r| r.report.fraction_to_99pct).collect();
            let mut curve = vec![0.0; n_test];
            for r in &rs {
                curve.iter_mut().zip(&r.accuracies).for_each(|(c, a)| *c += a);
            }
            curve.iter_mut().for_each(|c| *c /= k);
            MethodSummary {
                estimator: name.to_string(),
                n_seeds: rs.len(),
                n_test,
                mean_aac: rs.iter().map(|r| r.report.aac).sum::<f64>() / k,
                mean_acc_at_10pct_discard: rs.iter().map(|r| r.report.acc_at_10pct_discard).sum::<f64>() / k,
                mean_fraction_to_99pct: (!reach.is_empty())
                    .then(|| reach.iter().sum::<f64>() / reach.len() as f64),
                n_seeds_reaching_99pct: reach.len(),
                mean_curve: curve,
            }
        })
        .collect())
}

/// `rejected_fraction,accuracy` rows.
pub fn curve_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("rejected_fraction,accuracy\n");
    for (f, a) in points {
        out.push_str(&format!("{f},{a}\n"));
    }
    out
}

/// Fixed-width text table in the layout of the comparison table (AAC scaled by 1e4).
pub fn format_table(summaries: &[MethodSummary]) -> String {
    let width = summaries.iter().map(|s| s.estimator.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>14}  {:>12}  {:>5}\n",
        "Method", "AAC x1e-4", "Acc@10% disc.", "Omit to 99%", "Seeds"
    );
    for s in summaries {
        let omit = s
            .mean_fraction_to_99pct
            .map_or_else(|| "unreachable".to_string(), |f| format!("{:.1}%", f * 100.0));
        out.push_str(&format!(
            "{:<width$}  {:>10.1}  {:>13.2}%  {:>12}  {:>5}\n",
            s.estimator,
            s.mean_aac * 1e4,
            s.mean_acc_at_10pct_discard * 100.0,
            omit,
            s.n_seeds
        ));
    }
    out
}
