//! The `contrastkit` command line.
//!
//! Exit status: 0 on success, 1 for usage and validation errors, 2 when a
//! solver reports the problem infeasible.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use contrastkit_core::{
    pipeline, Analysis, Method, Metric, PipelineOptions, ProfileMatchOptions, SbwConfig,
    ToleranceScale,
};

use crate::generator::{generate_synthetic_example, GeneratorConfig, OutcomeModel};
use crate::io::{load_csv, write_csv, CsvSchema};
use crate::report::{render_balance, render_report, Format, MethodReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "contrastkit",
    version,
    about = "Weighted-contrast ATT analysis of observational data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one or more methods and report estimates with diagnostics.
    Analyze(AnalysisArgs),
    /// Emit per-unit weights as csv.
    Weights(AnalysisArgs),
    /// Emit the balance table of each method.
    Balance(AnalysisArgs),
    /// Run every method (or the listed ones) concurrently into one report.
    Compare(AnalysisArgs),
    /// Write the synthetic running example as csv.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Uri,
    Mri,
    Ipw,
    Sbw,
    Pair,
    Profile,
    Uniform,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Mahalanobis,
    Euclidean,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Att,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Curved,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    /// Input csv with a header row.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "id")]
    id: String,
    #[arg(long, default_value = "treatment")]
    treatment: String,
    #[arg(long, default_value = "outcome")]
    outcome: String,
    /// Comma-separated covariate columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Comma-separated methods.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    method: Vec<MethodArg>,
    /// SBW balance tolerance in pooled sds, one value or one per covariate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delta: Vec<f64>,
    /// Profile matching tolerance in pooled sds, one value or one per covariate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tolerance: Vec<f64>,
    #[arg(long, value_enum, default_value = "mahalanobis")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "att")]
    target: TargetArg,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Output path; `-` is standard output.
    #[arg(long, default_value = "-")]
    out: String,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_treated: usize,
    #[arg(long, default_value_t = 200)]
    n_control: usize,
    #[arg(long, value_enum, default_value = "curved")]
    outcome_model: ModelArg,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    true_att: f64,
    /// Leave out the high-income control.
    #[arg(long)]
    no_outlier: bool,
    #[arg(long, default_value = "-")]
    out: String,
}

enum Failure {
    Invalid(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

impl From<contrastkit_core::Error> for Failure {
    fn from(e: contrastkit_core::Error) -> Self {
        if e.is_infeasibility() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(&a, Mode::Analyze),
        Command::Weights(a) => analyze(&a, Mode::Weights),
        Command::Balance(a) => analyze(&a, Mode::Balance),
        Command::Compare(a) => analyze(&a, Mode::Compare),
        Command::Generate(g) => generate(&g),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Invalid(m) | Failure::Infeasible(m)) = &f;
            eprintln!("error: {m}");
            f.code()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Analyze,
    Weights,
    Balance,
    Compare,
}

fn core_method(m: MethodArg) -> Option<Method> {
    Some(match m {
        MethodArg::Uri => Method::Uri,
        MethodArg::Mri => Method::Mri,
        MethodArg::Ipw => Method::Ipw,
        MethodArg::Sbw => Method::Sbw,
        MethodArg::Pair => Method::PairMatch,
        MethodArg::Profile => Method::ProfileMatch,
        MethodArg::Uniform => Method::Uniform,
        MethodArg::All => return None,
    })
}

/// Requested methods, deduplicated, in canonical order.
fn selected_methods(requested: &[MethodArg]) -> Vec<Method> {
    if requested.is_empty() || requested.contains(&MethodArg::All) {
        return Method::PIPELINE.to_vec();
    }
    let chosen: Vec<Method> = requested.iter().filter_map(|&m| core_method(m)).collect();
    Method::PIPELINE
        .into_iter()
        .filter(|m| chosen.contains(m))
        .collect()
}

fn options(a: &AnalysisArgs) -> PipelineOptions {
    let mut o = PipelineOptions::default();
    if !a.delta.is_empty() {
        o.sbw = SbwConfig::with_delta(a.delta.clone());
    }
    if !a.tolerance.is_empty() {
        o.profile =
            ProfileMatchOptions::with_tolerance(a.tolerance.clone(), ToleranceScale::PooledSd);
    }
    o.metric = match a.metric {
        MetricArg::Mahalanobis => Metric::Mahalanobis,
        MetricArg::Euclidean => Metric::NormalizedEuclidean,
    };
    o
}

fn format_of(f: FormatArg) -> Format {
    match f {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
        FormatArg::Svg => Format::Svg,
    }
}

fn analyze(a: &AnalysisArgs, mode: Mode) -> Result<(), Failure> {
    let TargetArg::Att = a.target;
    let schema = CsvSchema {
        id: a.id.clone(),
        treatment: a.treatment.clone(),
        outcome: a.outcome.clone(),
        covariates: a.covariates.clone(),
    };
    let data = load_csv(&a.data, &schema).map_err(|e| Failure::Invalid(e.to_string()))?;
    let methods = selected_methods(&a.method);
    let opts = options(a);

    let results: Vec<(Method, contrastkit_core::Result<Analysis>)> = if mode == Mode::Compare {
        let (data, opts) = (&data, &opts);
        std::thread::scope(|s| {
            let handles: Vec<_> = methods
                .iter()
                .map(|&m| (m, s.spawn(move || pipeline(data, m, opts))))
                .collect();
            handles
                .into_iter()
                .map(|(m, h)| (m, h.join().expect("method thread panicked")))
                .collect()
        })
    } else {
        methods
            .iter()
            .map(|&m| (m, pipeline(&data, m, &opts)))
            .collect()
    };

    let single = results.len() == 1;
    let mut analyses = Vec::new();
    let mut infeasible = Vec::new();
    for (m, r) in results {
        match r {
            Ok(an) => analyses.push(an),
            Err(e) if e.is_infeasibility() && !single => infeasible.push(format!("{m}: {e}")),
            Err(e) => return Err(Failure::from(e)),
        }
    }
    for msg in &infeasible {
        eprintln!("warning: skipped {msg}");
    }
    if analyses.is_empty() {
        return Err(Failure::Infeasible(
            "every requested method was infeasible".into(),
        ));
    }

    let bytes = match mode {
        Mode::Weights => weights_csv(&analyses),
        Mode::Balance => {
            let reports: Vec<MethodReport> =
                analyses.iter().map(MethodReport::from_analysis).collect();
            render_balance(&reports, format_of(a.format))
        }
        Mode::Analyze | Mode::Compare => {
            let reports: Vec<MethodReport> =
                analyses.iter().map(MethodReport::from_analysis).collect();
            render_report(&reports, format_of(a.format))
        }
    };
    emit(&a.out, |w| w.write_all(&bytes))
}

fn weights_csv(analyses: &[Analysis]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "treatment", "method", "weight"])
        .expect("in-memory csv");
    for a in analyses {
        let wv = &a.weights;
        for i in 0..wv.len() {
            let z = if wv.is_treated(i) { "1" } else { "0" };
            w.write_record([
                wv.id(i),
                z,
                wv.method().name(),
                &wv.weights()[i].to_string(),
            ])
            .expect("in-memory csv");
        }
    }
    w.into_inner().expect("in-memory csv")
}

fn generate(g: &GenerateArgs) -> Result<(), Failure> {
    let mut config = GeneratorConfig {
        n_treated: g.n_treated,
        n_control: g.n_control,
        true_att: g.true_att,
        outcome_model: match g.outcome_model {
            ModelArg::Linear => OutcomeModel::Linear,
            ModelArg::Curved => OutcomeModel::Curved,
        },
        seed: g.seed,
        ..GeneratorConfig::default()
    };
    if g.no_outlier {
        config.outlier = None;
    }
    let data = generate_synthetic_example(&config).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut buf = Vec::new();
    write_csv(&data, &mut buf).map_err(|e| Failure::Invalid(e.to_string()))?;
    emit(&g.out, |w| w.write_all(&buf))
}

fn emit(out: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let result = if out == "-" {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        body(&mut lock).and_then(|_| lock.flush())
    } else {
        File::create(out).and_then(|f| {
            let mut w = BufWriter::new(f);
            body(&mut w)?;
            w.flush()
        })
    };
    result.map_err(|e| Failure::Invalid(format!("cannot write {out}: {e}")))
}
