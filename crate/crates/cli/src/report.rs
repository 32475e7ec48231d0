//! Dashboard rendering: text, json, csv and svg encodings of per-method
//! results.

use std::fmt::Write as _;
use std::str::FromStr;

use contrastkit_core::{Analysis, Group};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
    Svg,
}

#[derive(Debug, thiserror::Error)]
#[error("unknown report format {0:?} (expected text, json, csv or svg)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPair<T> {
    pub treated: T,
    pub control: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceEntry {
    pub name: String,
    pub treated: f64,
    pub control: f64,
    pub target: f64,
    /// Standardized differences from the target; `None` when infinite.
    pub sd_t: Option<f64>,
    pub sd_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeWeights {
    pub count: usize,
    pub ids: Vec<String>,
}

/// One method's dashboard. The serialized fields form the json schema;
/// the rest feed the text and svg views only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub att: f64,
    pub ess: GroupPair<f64>,
    pub nominal: GroupPair<usize>,
    pub balance: Vec<BalanceEntry>,
    pub negative_weights: NegativeWeights,
    pub sample_bounded: bool,
    #[serde(skip)]
    pub implied_profile: Option<Vec<f64>>,
    #[serde(skip)]
    pub control_weights: Vec<f64>,
    #[serde(skip)]
    pub notes: Vec<String>,
}

impl MethodReport {
    pub fn from_analysis(a: &Analysis) -> MethodReport {
        let t = &a.estimate.diagnostics;
        MethodReport {
            method: a.estimate.method.name().to_string(),
            att: a.estimate.att,
            ess: GroupPair {
                treated: t.ess_treated,
                control: t.ess_control,
            },
            nominal: GroupPair {
                treated: t.nominal_treated,
                control: t.nominal_control,
            },
            balance: t
                .rows
                .iter()
                .map(|r| BalanceEntry {
                    name: r.name.clone(),
                    treated: r.treated_mean,
                    control: r.control_mean,
                    target: r.target_mean,
                    sd_t: r.std_diff_treated.value(),
                    sd_c: r.std_diff_control.value(),
                })
                .collect(),
            negative_weights: NegativeWeights {
                count: a.negative_weights.count,
                ids: a.negative_weights.ids.clone(),
            },
            sample_bounded: a.estimate.sample_bounded,
            implied_profile: a.implied_profile.clone(),
            control_weights: a.weights.group(Group::Control),
            notes: a.notes.clone(),
        }
    }
}

/// Number for human eyes: three decimals with trailing zeros dropped.
fn num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn std_diff(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |x| format!("{x:+.3}"))
}

fn balance_lines(out: &mut String, r: &MethodReport) {
    let _ = writeln!(
        out,
        "{:<16}{:>12}{:>12}{:>12}{:>10}{:>10}",
        "covariate", "treated", "control", "target", "sd(t)", "sd(c)"
    );
    for b in &r.balance {
        let _ = writeln!(
            out,
            "{:<16}{:>12}{:>12}{:>12}{:>10}{:>10}",
            b.name,
            num(b.treated),
            num(b.control),
            num(b.target),
            std_diff(b.sd_t),
            std_diff(b.sd_c)
        );
    }
    let _ = writeln!(
        out,
        "effective sample size: treated {} of {}, control {} of {}",
        num(r.ess.treated),
        r.nominal.treated,
        num(r.ess.control),
        r.nominal.control
    );
}

fn render_text(reports: &[MethodReport]) -> String {
    let mut out = String::new();
    for (k, r) in reports.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "== {} ==", r.method);
        let _ = writeln!(out, "estimate (ATT): {}", num(r.att));
        balance_lines(&mut out, r);
        let _ = write!(out, "negative weights: {}", r.negative_weights.count);
        if let Some(first) = r.negative_weights.ids.first() {
            let _ = write!(out, " (most negative: {first})");
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "sample bounded: {}",
            if r.sample_bounded { "yes" } else { "no" }
        );
        if let Some(p) = &r.implied_profile {
            let shown: Vec<String> = p.iter().map(|v| num(*v)).collect();
            let target: Vec<String> = r.balance.iter().map(|b| num(b.target)).collect();
            let _ = write!(out, "implied target profile: ({})", shown.join(", "));
            if shown != target {
                let _ = write!(
                    out,
                    "  WARNING: differs from the target ({})",
                    target.join(", ")
                );
            }
            out.push('\n');
        }
        for n in &r.notes {
            let _ = writeln!(out, "note: {n}");
        }
    }
    out
}

fn render_csv(reports: &[MethodReport]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "method",
        "att",
        "ess_treated",
        "ess_control",
        "nominal_treated",
        "nominal_control",
        "negative_count",
        "negative_ids",
        "sample_bounded",
        "covariate",
        "treated",
        "control",
        "target",
        "sd_t",
        "sd_c",
    ];
    w.write_record(header).expect("in-memory csv");
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for r in reports {
        for b in &r.balance {
            w.write_record([
                r.method.clone(),
                r.att.to_string(),
                r.ess.treated.to_string(),
                r.ess.control.to_string(),
                r.nominal.treated.to_string(),
                r.nominal.control.to_string(),
                r.negative_weights.count.to_string(),
                r.negative_weights.ids.join(";"),
                r.sample_bounded.to_string(),
                b.name.clone(),
                b.treated.to_string(),
                b.control.to_string(),
                b.target.to_string(),
                opt(b.sd_t),
                opt(b.sd_c),
            ])
            .expect("in-memory csv");
        }
    }
    w.into_inner().expect("in-memory csv")
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Left: standardized distance of each group's mean from the target, one
/// row per covariate. Right: histogram of control weights. Methods are
/// stacked vertically within the fixed canvas.
fn render_svg(reports: &[MethodReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let band = HEIGHT / reports.len().max(1) as f64;
    for (k, r) in reports.iter().enumerate() {
        let top = k as f64 * band;
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.1}" font-weight="bold">{} (ATT {})</text>"#,
            top + 14.0,
            esc(&r.method),
            num(r.att)
        );
        // dot plot
        let (x0, x1) = (120.0, 460.0);
        let limit = r
            .balance
            .iter()
            .flat_map(|b| [b.sd_t, b.sd_c])
            .flatten()
            .fold(0.25f64, |m, v| m.max(v.abs()))
            .min(10.0);
        let xpos = |v: Option<f64>| {
            let v = v.unwrap_or(f64::INFINITY).clamp(-limit, limit);
            x0 + (v + limit) / (2.0 * limit) * (x1 - x0)
        };
        let mid = (x0 + x1) / 2.0;
        let rows = r.balance.len().max(1) as f64;
        let step = (band - 30.0) / rows;
        let _ = writeln!(
            s,
            r##"<line x1="{mid:.1}" y1="{:.1}" x2="{mid:.1}" y2="{:.1}" stroke="#888" stroke-dasharray="3,3"/>"##,
            top + 20.0,
            top + band - 6.0
        );
        for (j, b) in r.balance.iter().enumerate() {
            let y = top + 24.0 + step * (j as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<text x="10" y="{:.1}">{}</text>"#,
                y + 4.0,
                esc(&b.name)
            );
            let _ = writeln!(
                s,
                r##"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="#d62728"/>"##,
                xpos(b.sd_t)
            );
            let _ = writeln!(
                s,
                r##"<circle cx="{:.1}" cy="{y:.1}" r="4" fill="#1f77b4"/>"##,
                xpos(b.sd_c)
            );
        }
        // histogram
        let (h0, h1) = (540.0, 940.0);
        let w = &r.control_weights;
        if !w.is_empty() {
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
            let hi = w
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
                .max(lo + 1e-9);
            let bins = 30;
            let mut counts = vec![0usize; bins];
            for &v in w {
                let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
                counts[b.min(bins - 1)] += 1;
            }
            let peak = *counts.iter().max().unwrap_or(&1) as f64;
            let bw = (h1 - h0) / bins as f64;
            let base = top + band - 18.0;
            let height = band - 44.0;
            for (b, &c) in counts.iter().enumerate() {
                let bh = height * c as f64 / peak;
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="#1f77b4"/>"##,
                    h0 + b as f64 * bw,
                    base - bh,
                    bw - 1.0
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{h0:.1}" y="{:.1}">{}</text>"#,
                base + 13.0,
                num(lo)
            );
            let _ = writeln!(
                s,
                r#"<text x="{h1:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                base + 13.0,
                num(hi)
            );
            let _ = writeln!(
                s,
                r#"<text x="{h0:.1}" y="{:.1}">control weights</text>"#,
                top + 14.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Balance tables only: the covariate rows and the effective sample sizes.
pub fn render_balance(reports: &[MethodReport], format: Format) -> Vec<u8> {
    #[derive(Serialize)]
    struct Table<'a> {
        method: &'a str,
        ess: GroupPair<f64>,
        nominal: GroupPair<usize>,
        balance: &'a [BalanceEntry],
    }
    match format {
        Format::Text => {
            let mut out = String::new();
            for (k, r) in reports.iter().enumerate() {
                if k > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "== {} ==", r.method);
                balance_lines(&mut out, r);
            }
            out.into_bytes()
        }
        Format::Json => {
            let tables: Vec<Table> = reports
                .iter()
                .map(|r| Table {
                    method: &r.method,
                    ess: r.ess,
                    nominal: r.nominal,
                    balance: &r.balance,
                })
                .collect();
            let mut v = serde_json::to_vec_pretty(&tables).expect("tables serialize");
            v.push(b'\n');
            v
        }
        Format::Csv | Format::Svg => render_report(reports, format),
    }
}

/// Encodes the reports. Json is a single object for one report and an array
/// otherwise.
pub fn render_report(reports: &[MethodReport], format: Format) -> Vec<u8> {
    match format {
        Format::Text => render_text(reports).into_bytes(),
        Format::Json => {
            let mut v = if reports.len() == 1 {
                serde_json::to_vec_pretty(&reports[0])
            } else {
                serde_json::to_vec_pretty(reports)
            }
            .expect("reports serialize");
            v.push(b'\n');
            v
        }
        Format::Csv => render_csv(reports),
        Format::Svg => render_svg(reports).into_bytes(),
    }
}
