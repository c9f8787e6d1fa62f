//! Error labeling, proof-length statistics, de-bloating and reports.

pub mod debloat;
pub mod labels;
pub mod length;
pub mod name_index;
pub mod report;

pub use debloat::{debloat, DebloatError, DebloatResult};
pub use labels::{auto_label, ingest_manual_labels, ErrorLabelSet, Flag, Provenance};
pub use length::{bucket_of, length_stats, LengthBucket, LengthStats, BUCKETS};
pub use name_index::{build_name_index, NameIndex};
pub use report::{accuracy_by_length, build_report, write_report, LengthAccuracy};
