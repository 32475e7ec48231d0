//! Synthetic replica of the running example: a hospital program whose
//! treated patients have lower incomes (in $K) and more visits than the
//! controls, plus one very rich control.
//!
//! Randomness comes from PCG-64 (XSL-RR 128/64) seeded with `seed` as the
//! 128-bit state. Each purpose draws from its own stream: stream 1 for
//! treated covariates, stream 2 for control covariates, stream 3 for outcome
//! noise. Normals use the cosine branch of Box–Muller on two 53-bit
//! uniforms, so the corpus is reproducible from any language with a PCG-64.

use contrastkit_core::{Dataset, Group};
use rand_core::RngCore;
use rand_pcg::Pcg64;

const TREATED_STREAM: u128 = 1;
const CONTROL_STREAM: u128 = 2;
const NOISE_STREAM: u128 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeModel {
    /// Baseline linear in the covariates.
    Linear,
    /// Adds a convex income term, so linear adjustment is misspecified.
    Curved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outlier {
    pub profile: Vec<f64>,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_treated: usize,
    pub n_control: usize,
    pub treated_mean_profile: Vec<f64>,
    pub control_mean_profile: Vec<f64>,
    pub covariate_sds: Vec<f64>,
    /// Appended verbatim after the drawn units.
    pub outlier: Option<Outlier>,
    pub true_att: f64,
    pub outcome_model: OutcomeModel,
    /// Coefficient of `income²` in curved mode.
    pub curvature: f64,
    /// Standard deviation of the outcome noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_treated: 100,
            n_control: 200,
            treated_mean_profile: vec![27.2, 4.6],
            control_mean_profile: vec![45.0, 4.1],
            covariate_sds: vec![12.0, 1.0],
            outlier: Some(Outlier {
                profile: vec![264.0, 4.0],
                group: Group::Control,
            }),
            true_att: -5.0,
            outcome_model: OutcomeModel::Curved,
            curvature: 0.003,
            noise_sd: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid generator configuration: {0}")]
pub struct ConfigError(String);

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.covariate_sds.len();
        if p == 0 {
            return Err(ConfigError("at least one covariate is required".into()));
        }
        if self.treated_mean_profile.len() != p || self.control_mean_profile.len() != p {
            return Err(ConfigError(
                "mean profiles and sds must have the same length".into(),
            ));
        }
        if self
            .covariate_sds
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(ConfigError("covariate sds must be positive".into()));
        }
        if self.n_treated < 2 || self.n_control < 2 {
            return Err(ConfigError("each group needs at least 2 units".into()));
        }
        if let Some(o) = &self.outlier {
            if o.profile.len() != p {
                return Err(ConfigError("outlier profile has the wrong length".into()));
            }
        }
        if !self.noise_sd.is_finite()
            || self.noise_sd < 0.0
            || !self.true_att.is_finite()
            || !self.curvature.is_finite()
        {
            return Err(ConfigError("noise sd and effect must be finite".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normal(rng: &mut Pcg64) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn covariate_names(p: usize) -> Vec<String> {
    (0..p)
        .map(|j| match j {
            0 => "income".to_string(),
            1 => "visits".to_string(),
            _ => format!("x{j}"),
        })
        .collect()
}

/// Untreated outcome: linear in every covariate, plus `curvature · income²`
/// in curved mode.
pub fn baseline_outcome(x: &[f64], model: OutcomeModel, curvature: f64) -> f64 {
    let mut y = 20.0 + 0.1 * x[0];
    if let Some(v) = x.get(1) {
        y += 1.5 * v;
    }
    y += x.iter().skip(2).map(|v| 0.5 * v).sum::<f64>();
    if model == OutcomeModel::Curved {
        y += curvature * x[0] * x[0];
    }
    y
}

/// Draws the synthetic sample. Income (the first covariate) is kept strictly
/// positive by redrawing.
pub fn generate_synthetic_example(config: &GeneratorConfig) -> Result<Dataset, ConfigError> {
    config.validate()?;
    let p = config.covariate_sds.len();
    let draw = |rng: &mut Pcg64, mean: &[f64]| -> Vec<f64> {
        (0..p)
            .map(|j| loop {
                let v = mean[j] + config.covariate_sds[j] * normal(rng);
                if j != 0 || v > 0.0 {
                    break v;
                }
            })
            .collect()
    };
    let state = config.seed as u128;
    let mut t_rng = Pcg64::new(state, TREATED_STREAM);
    let mut c_rng = Pcg64::new(state, CONTROL_STREAM);
    let mut noise = Pcg64::new(state, NOISE_STREAM);

    let mut treated = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..config.n_treated {
        rows.push(draw(&mut t_rng, &config.treated_mean_profile));
        treated.push(true);
    }
    for _ in 0..config.n_control {
        rows.push(draw(&mut c_rng, &config.control_mean_profile));
        treated.push(false);
    }
    if let Some(o) = &config.outlier {
        rows.push(o.profile.clone());
        treated.push(o.group == Group::Treated);
    }
    let outcome = rows
        .iter()
        .zip(&treated)
        .map(|(x, &z)| {
            let effect = if z { config.true_att } else { 0.0 };
            baseline_outcome(x, config.outcome_model, config.curvature)
                + effect
                + config.noise_sd * normal(&mut noise)
        })
        .collect();
    let ids = (1..=rows.len()).map(|i| format!("u{i:04}")).collect();
    Dataset::new(ids, treated, rows, outcome, covariate_names(p))
        .map_err(|e| ConfigError(e.to_string()))
}
