//! Table files, CSV samples and run configuration.

mod config;
mod samples;
mod table;

pub use config::{
    parse_config, parse_config_str, CsvTarget, EvalConfig, GenerateConfig, MetricKind, RunConfig, Target,
};
pub use samples::{encode_csv, read_csv_samples, write_csv_samples};
pub use table::{decode_table, encode_table, read_table, write_atomic, write_table, MAGIC, VERSION};
