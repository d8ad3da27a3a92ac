//! Examples, expert votes, CSV ingest, splitting and the synthetic generator.

mod csv_io;
mod example;
mod split;
mod synth;

pub use csv_io::{csv_columns, load_csv, load_csv_auto, write_csv, write_csv_to, CsvSchema, ORACLE_COLUMN};
pub use example::{mean_vote, Dataset, DatasetManifest, Example, Vote};
pub use split::{split, split_run, Split, SplitSpec};
pub use synth::{simulate_experts, synthesize, SyntheticConfig};
