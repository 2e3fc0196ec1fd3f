//! Tables, cleaning, encoding and the synthetic cohort.

mod clean;
mod csv_io;
mod encode;
mod synth;
mod table;

pub use clean::{
    clean_table, drop_incomplete_rows, filter_missing_columns, DroppedColumn, PreprocessReport,
    DEFAULT_MISSING_THRESHOLD,
};
pub use csv_io::{
    load_csv, read_csv_str, schema_path_for, write_csv, write_csv_string, Schema,
    DEFAULT_LABEL_COLUMN, DEFAULT_SCORE_COLUMN,
};
pub use encode::{one_hot_encode, EncodedColumn, FeatureEncoding, FeatureMatrix, ManifestEntry};
pub use synth::{
    generate_separable_fixture, generate_synthetic_cohort, generate_synthetic_cohort_detailed,
    quotas, ClassPriors, SyntheticCohort, SyntheticSpec,
};
pub use table::{Cell, ColumnKind, ColumnSpec, RawTable};
