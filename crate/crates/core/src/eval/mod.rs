//! Rejection curves and the metrics derived from them.

mod curve;
mod report;
mod svg;

pub use curve::{
    aac, accuracy_at_discard, fraction_to_accuracy, rejection_curve, rejection_order, Reach, RejectionCurve,
    ScoredPrediction, TiePolicy,
};
pub use report::{
    compare_report, curve_csv, format_table, MethodSummary, MetricsReport, SeedResult, DISCARD_FRACTION,
    TARGET_ACCURACY,
};
pub use svg::render_rejection_svg;
