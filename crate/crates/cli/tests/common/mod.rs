#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use contrastkit::report::{BalanceEntry, GroupPair, NegativeWeights};
use contrastkit::MethodReport;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contrastkit"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn entry(name: &str, treated: f64, control: f64, target: f64) -> BalanceEntry {
    BalanceEntry {
        name: name.into(),
        treated,
        control,
        target,
        sd_t: Some(0.12),
        sd_c: Some(0.12),
    }
}

fn fixture(method: &str, att: f64, means: (f64, f64), negatives: usize) -> MethodReport {
    MethodReport {
        method: method.into(),
        att,
        ess: GroupPair {
            treated: 100.0,
            control: 140.5,
        },
        nominal: GroupPair {
            treated: 100,
            control: 200,
        },
        balance: vec![
            entry("income", means.0, means.0, 27.2),
            entry("visits", means.1, means.1, 4.6),
        ],
        negative_weights: NegativeWeights {
            count: negatives,
            ids: (0..negatives).map(|k| format!("c{k:03}")).collect(),
        },
        sample_bounded: true,
        implied_profile: None,
        control_weights: vec![1.0; 200],
        notes: Vec::new(),
    }
}

/// Dashboard state after the single regression in the running example.
pub fn uri_fixture() -> MethodReport {
    let mut r = fixture("uri", 557.0, (29.6, 4.3), 1);
    r.negative_weights.ids = vec!["c264".into()];
    r.implied_profile = Some(vec![29.6, 4.3]);
    r
}

pub fn weighting_fixtures() -> Vec<MethodReport> {
    vec![
        fixture("mri", 763.0, (27.2, 4.6), 3),
        fixture("sbw", -985.0, (27.3, 4.6), 0),
        fixture("pair", -1114.0, (27.4, 4.58), 0),
        fixture("profile", -989.0, (27.25, 4.61), 0),
    ]
}

/// Two 0/1 groups with covariates `x` and `v`.
pub const SMALL_CSV: &str = "id,treatment,outcome,x,v
a,1,5.0,1.0,2.0
b,1,6.5,2.0,1.0
c,1,7.0,3.0,3.5
d,0,3.0,1.5,2.0
e,0,2.0,2.5,1.5
f,0,4.0,0.5,3.0
g,0,3.5,3.0,2.5
h,0,1.0,2.0,0.5
";
