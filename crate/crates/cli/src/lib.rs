//! File formats, the synthetic example generator, report rendering and the
//! `contrastkit` command line.

pub mod cli;
pub mod generator;
pub mod io;
pub mod report;

pub use generator::{generate_synthetic_example, GeneratorConfig, OutcomeModel, Outlier};
pub use io::{load_csv, read_csv, write_csv, CsvError, CsvSchema};
pub use report::{render_balance, render_report, Format, MethodReport};
