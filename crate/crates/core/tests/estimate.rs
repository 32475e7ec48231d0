#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use contrastkit_core::{
    build_design_matrix, effective_sample_size, implied_target_profile, mri_weights,
    negative_weight_report, ols_fit, pipeline, uri_weights, weighted_contrast, DesignSpec, Group,
    Method, PipelineOptions,
};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn uri_pipeline_equals_one_shot_ols() {
    let mut r = rng(40);
    for _ in 0..20 {
        let p = r.gen_range(1..=4);
        let d = random_dataset(&mut r, 120, p);
        let a = pipeline(&d, Method::Uri, &PipelineOptions::default()).unwrap();
        let spec = DesignSpec::additive(p);
        let fit = ols_fit(&build_design_matrix(&d, &spec).unwrap(), d.outcomes()).unwrap();
        assert!((a.estimate.att - fit.coefficients[spec.treatment_index().unwrap()]).abs() <= 1e-8);
    }
}

#[test]
fn every_method_runs_through_the_same_contrast() {
    let mut r = rng(41);
    let d = random_dataset(&mut r, 150, 2);
    let opts = PipelineOptions::default();
    for m in Method::PIPELINE {
        let a = match pipeline(&d, m, &opts) {
            Ok(a) => a,
            Err(e) if e.is_infeasibility() => continue,
            Err(e) => panic!("{m}: {e:?}"),
        };
        assert_eq!(a.estimate.method, m);
        let direct = contrast(&d, a.weights.weights(), d.outcomes());
        assert!((a.estimate.att - direct).abs() < 1e-12);
        if m.is_nonnegative() {
            assert_eq!(a.negative_weights.count, 0);
        }
    }
}

#[test]
fn pair_match_contrast_is_mean_pair_difference() {
    let mut r = rng(42);
    let d = loop {
        let d = random_dataset(&mut r, 60, 2);
        if d.n_treated() <= d.n_control() {
            break d;
        }
    };
    let a = pipeline(&d, Method::PairMatch, &PipelineOptions::default()).unwrap();
    let m = a.match_result.unwrap();
    let pos = |id: &str| d.ids().iter().position(|x| x == id).unwrap();
    let mean: f64 = m
        .pairs
        .iter()
        .map(|(t, c)| d.outcome(pos(t)) - d.outcome(pos(c)))
        .sum::<f64>()
        / m.pairs.len() as f64;
    assert!((a.estimate.att - mean).abs() <= 1e-10);
    assert!((a.estimate.diagnostics.ess_control - m.pairs.len() as f64).abs() < 1e-9);
}

#[test]
fn uniform_pipeline_is_raw_gap_with_imbalance() {
    let mut r = rng(43);
    let d = random_dataset(&mut r, 100, 2);
    let a = pipeline(&d, Method::Uniform, &PipelineOptions::default()).unwrap();
    let yt = d
        .group_indices(Group::Treated)
        .iter()
        .map(|&i| d.outcome(i))
        .sum::<f64>()
        / d.n_treated() as f64;
    let yc = d
        .group_indices(Group::Control)
        .iter()
        .map(|&i| d.outcome(i))
        .sum::<f64>()
        / d.n_control() as f64;
    assert!((a.estimate.att - (yt - yc)).abs() < 1e-12);
    assert_eq!(a.estimate.n_used, (d.n_treated(), d.n_control()));
}

#[test]
fn implied_profile_is_the_common_uri_mean() {
    let mut r = rng(44);
    let d = random_dataset(&mut r, 90, 3);
    let w = uri_weights(&d, &DesignSpec::additive(3)).unwrap();
    let prof = implied_target_profile(&d, &w).unwrap();
    for g in [Group::Treated, Group::Control] {
        for (a, b) in weighted_means(&d, &w, g).iter().zip(&prof) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
    let a = pipeline(&d, Method::Uri, &PipelineOptions::default()).unwrap();
    assert_eq!(a.implied_profile.unwrap(), prof);
}

#[test]
fn ess_of_regression_weights_is_below_nominal() {
    let mut r = rng(45);
    let d = random_dataset(&mut r, 120, 2);
    for w in [
        uri_weights(&d, &DesignSpec::additive(2)).unwrap(),
        mri_weights(&d, &DesignSpec::additive(2)).unwrap(),
    ] {
        assert!(effective_sample_size(&w, Group::Control).unwrap() < d.n_control() as f64);
        let rep = negative_weight_report(&w);
        assert_eq!(rep.count, w.weights().iter().filter(|&&x| x < 0.0).count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contrast_is_linear_in_the_outcome(seed in 0u64..10_000, a in -50.0f64..50.0, b in -1e3f64..1e3) {
        let mut r = rng(seed);
        let d = random_dataset(&mut r, 60, 2);
        let y2: Vec<f64> = d.outcomes().iter().map(|y| a * y + b).collect();
        let d2 = d.with_outcome(y2).unwrap();
        for w in [uri_weights(&d, &DesignSpec::additive(2)).unwrap(), mri_weights(&d, &DesignSpec::additive(2)).unwrap()] {
            let e1 = weighted_contrast(&d, &w).unwrap().att;
            let e2 = weighted_contrast(&d2, &w).unwrap().att;
            prop_assert!((e2 - a * e1).abs() <= 1e-9 * (1.0 + b.abs() + a.abs()));
        }
    }
}
