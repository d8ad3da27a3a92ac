use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A prediction joined with its uncertainty score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction<T> {
    pub example_id: String,
    pub predicted_prob: T,
    pub label: bool,
    pub uncertainty: T,
}

impl<T: Scalar> ScoredPrediction<T> {
    /// Class one is predicted when the probability is at least one half.
    pub fn predicted_label(&self) -> bool {
        self.predicted_prob >= T::half()
    }

    pub fn is_correct(&self) -> bool {
        self.predicted_label() == self.label
    }
}

/// Order in which predictions are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Highest uncertainty first; equal scores rejected in ascending `example_id` order.
    UncertaintyDescIdAsc,
}

/// Accuracy of the retained predictions after rejecting the `m` most uncertain ones, for
/// `m = 0..n`. Point `m` sits at rejected fraction `m / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionCurve<T> {
    points: Vec<(T, T)>,
    n_total: usize,
    tie_policy: TiePolicy,
}

impl<T: Scalar> RejectionCurve<T> {
    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    pub fn accuracies(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

/// Rejection order of `preds` under [`TiePolicy::UncertaintyDescIdAsc`], as indices.
pub fn rejection_order<T: Scalar>(preds: &[ScoredPrediction<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&preds[a], &preds[b]);
        pb.uncertainty
            .partial_cmp(&pa.uncertainty)
            .unwrap_or(Ordering::Equal)
            .then_with(|| pa.example_id.cmp(&pb.example_id))
    });
    order
}

pub fn rejection_curve<T: Scalar>(preds: &[ScoredPrediction<T>]) -> Result<RejectionCurve<T>> {
    if preds.is_empty() {
        return Err(Error::input("rejection curve of an empty prediction set"));
    }
    for p in preds {
        let finite = p.uncertainty.to_f64().is_some_and(f64::is_finite);
        if !finite || p.uncertainty < T::zero() {
            return Err(Error::input(format!(
                "example `{}` has invalid uncertainty {:?}",
                p.example_id, p.uncertainty
            )));
        }
    }
    let n = preds.len();
    let order = rejection_order(preds);

    // correct[m] = correct predictions among order[m..]
    let mut correct = vec![0usize; n + 1];
    for m in (0..n).rev() {
        correct[m] = correct[m + 1] + usize::from(preds[order[m]].is_correct());
    }
    let total = T::from_count(n);
    let points = (0..n)
        .map(|m| (T::from_count(m) / total, T::from_count(correct[m]) / T::from_count(n - m)))
        .collect();
    Ok(RejectionCurve {
        points,
        n_total: n,
        tie_policy: TiePolicy::UncertaintyDescIdAsc,
    })
}

/// Area between the curve and perfect accuracy: `(1/n) * sum_m (1 - a_m)`.
pub fn aac<T: Scalar>(curve: &RejectionCurve<T>) -> T {
    let gap = curve
        .accuracies()
        .fold(T::zero(), |acc, a| acc + (T::one() - a));
    gap / T::from_count(curve.n_total)
}

fn discard_index(fraction: f64, n: usize) -> usize {
    // Guard against products such as 0.29 * 100 = 28.999999999999996.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Accuracy after rejecting `floor(fraction * n)` predictions.
pub fn accuracy_at_discard<T: Scalar>(curve: &RejectionCurve<T>, fraction: f64) -> Result<T> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::input(format!("discard fraction {fraction} outside [0, 1)")));
    }
    let m = discard_index(fraction, curve.n_total).min(curve.n_total - 1);
    Ok(curve.points[m].1)
}

/// Outcome of [`fraction_to_accuracy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reach<T> {
    Fraction(T),
    Unreachable,
}

impl<T: Copy> Reach<T> {
    pub fn fraction(self) -> Option<T> {
        match self {
            Reach::Fraction(f) => Some(f),
            Reach::Unreachable => None,
        }
    }
}

/// Smallest rejected fraction whose retained accuracy reaches `target`.
pub fn fraction_to_accuracy<T: Scalar>(curve: &RejectionCurve<T>, target: T) -> Result<Reach<T>> {
    if !(target > T::zero() && target <= T::one()) {
        return Err(Error::input(format!("target accuracy {target:?} outside (0, 1]")));
    }
    Ok(curve
        .points
        .iter()
        .find(|p| p.1 >= target)
        .map_or(Reach::Unreachable, |p| Reach::Fraction(p.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use num_traits::FromPrimitive;

    type Q = Ratio<i64>;

    fn pred(id: &str, correct: bool, u: f64) -> ScoredPrediction<f64> {
        ScoredPrediction { example_id: id.into(), predicted_prob: 0.9, label: correct, uncertainty: u }
    }

    fn single_error() -> Vec<ScoredPrediction<f64>> {
        vec![pred("a", true, 0.1), pred("b", false, 0.9), pred("c", true, 0.2), pred("d", true, 0.0)]
    }

    #[test]
    fn single_error_curve() {
        let c = rejection_curve(&single_error()).unwrap();
        let acc: Vec<f64> = c.accuracies().collect();
        assert_eq!(acc, vec![0.75, 1.0, 1.0, 1.0]);
        let fr: Vec<f64> = c.points().iter().map(|p| p.0).collect();
        assert_eq!(fr, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(aac(&c), 0.0625);
        assert_eq!(accuracy_at_discard(&c, 0.25).unwrap(), 1.0);
        assert_eq!(accuracy_at_discard(&c, 0.0).unwrap(), 0.75);
        assert_eq!(fraction_to_accuracy(&c, 0.99).unwrap(), Reach::Fraction(0.25));
    }

    #[test]
    fn perfect_and_hopeless() {
        let good: Vec<_> = (0..5).map(|i| pred(&i.to_string(), true, i as f64)).collect();
        let c = rejection_curve(&good).unwrap();
        assert!(c.accuracies().all(|a| a == 1.0));
        assert_eq!(aac(&c), 0.0);
        assert_eq!(accuracy_at_discard(&c, 0.6).unwrap(), 1.0);
        assert_eq!(fraction_to_accuracy(&c, 0.99).unwrap(), Reach::Fraction(0.0));

        let bad: Vec<_> = (0..5).map(|i| pred(&i.to_string(), false, i as f64)).collect();
        let c = rejection_curve(&bad).unwrap();
        assert_eq!(aac(&c), 1.0);
        assert_eq!(fraction_to_accuracy(&c, 0.99).unwrap(), Reach::Unreachable);
    }

    #[test]
    fn ties_break_by_id() {
        // Equal scores: "a" (wrong) is rejected before "b" (right).
        let p = vec![pred("b", true, 0.5), pred("a", false, 0.5)];
        let acc: Vec<f64> = rejection_curve(&p).unwrap().accuracies().collect();
        assert_eq!(acc, vec![0.5, 1.0]);
        let p = vec![pred("a", true, 0.5), pred("b", false, 0.5)];
        let acc: Vec<f64> = rejection_curve(&p).unwrap().accuracies().collect();
        assert_eq!(acc, vec![0.5, 0.0]);
    }

    #[test]
    fn threshold_at_half() {
        let p = ScoredPrediction { example_id: "x".into(), predicted_prob: 0.5, label: true, uncertainty: 0.0 };
        assert!(p.is_correct());
        let p = ScoredPrediction { predicted_prob: 0.4999, ..p };
        assert!(!p.is_correct());
    }

    #[test]
    fn exact_rational_metrics() {
        let preds: Vec<ScoredPrediction<Q>> = single_error()
            .into_iter()
            .map(|p| ScoredPrediction {
                example_id: p.example_id,
                predicted_prob: Q::new(9, 10),
                label: p.label,
                uncertainty: Q::from_f64(p.uncertainty).unwrap(),
            })
            .collect();
        let c = rejection_curve(&preds).unwrap();
        assert_eq!(aac(&c), Q::new(1, 16));
        assert_eq!(fraction_to_accuracy(&c, Q::new(99, 100)).unwrap(), Reach::Fraction(Q::new(1, 4)));
    }

    #[test]
    fn input_errors() {
        assert!(rejection_curve::<f64>(&[]).is_err());
        assert!(rejection_curve(&[pred("a", true, f64::NAN)]).is_err());
        assert!(rejection_curve(&[pred("a", true, -1.0)]).is_err());
        let c = rejection_curve(&single_error()).unwrap();
        assert!(accuracy_at_discard(&c, 1.0).is_err());
        assert!(fraction_to_accuracy(&c, 0.0).is_err());
    }

    #[test]
    fn discard_index_is_robust_to_rounding() {
        assert_eq!(discard_index(0.29, 100), 29);
        assert_eq!(discard_index(0.1, 1600), 160);
        assert_eq!(discard_index(0.1, 9), 0);
    }
}
