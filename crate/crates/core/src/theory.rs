//! Expected value of the minimum over an ensemble of unbiased, noisy
//! estimates: closed forms, the order-statistic density, and Monte Carlo
//! checks of both.
//!
//! For two iid `N(0, sigma^2)` errors, `min(G1, G2) = (G1 + G2 - |G1 - G2|)/2`
//! and `G1 - G2 ~ N(0, 2 sigma^2)`, so `E[min] = -sigma / sqrt(pi)`.
//! For `N` iid `U[-delta, delta]` errors the minimum has density
//! `N/(2 delta) * ((delta - x)/(2 delta))^(N-1)` on `(-delta, delta)` and
//! mean `-(N-1)/(N+1) * delta`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::agents::weighted_bracket;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseKind {
    Gaussian { sigma: f64 },
    Uniform { delta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub ensemble_size: usize,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, ensemble_size: usize) -> Result<Self> {
        Self::new(NoiseKind::Gaussian { sigma }, ensemble_size)
    }

    pub fn uniform(delta: f64, ensemble_size: usize) -> Result<Self> {
        Self::new(NoiseKind::Uniform { delta }, ensemble_size)
    }

    pub fn new(kind: NoiseKind, ensemble_size: usize) -> Result<Self> {
        let scale = match kind {
            NoiseKind::Gaussian { sigma } => sigma,
            NoiseKind::Uniform { delta } => delta,
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise scale must be positive, got {scale}")));
        }
        if ensemble_size == 0 {
            return Err(Error::InvalidArgument("ensemble size must be >= 1".into()));
        }
        Ok(Self { kind, ensemble_size })
    }

    pub fn scale(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma } => sigma,
            NoiseKind::Uniform { delta } => delta,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::Uniform { .. } => "uniform",
        }
    }

    /// One draw of a single estimation error.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Uniform { delta } => rng.random_range(-delta..=delta),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasEstimate {
    pub empirical_mean: f64,
    /// Sample standard deviation over `sqrt(sample_count)`.
    pub standard_error: f64,
    pub sample_count: usize,
    /// `None` where no closed form is available (gaussian with N != 2).
    pub closed_form: Option<f64>,
}

impl BiasEstimate {
    /// Whether the empirical mean sits within `k` standard errors of the
    /// closed form. False when there is no closed form.
    pub fn within(&self, k: f64) -> bool {
        self.closed_form
            .is_some_and(|cf| (self.empirical_mean - cf).abs() <= k * self.standard_error)
    }
}

/// `E[min_i Z_i]` in closed form.
pub fn closed_form_min_bias(model: &NoiseModel) -> Result<f64> {
    let n = model.ensemble_size as f64;
    match model.kind {
        NoiseKind::Gaussian { sigma } if model.ensemble_size == 2 => Ok(-sigma / PI.sqrt()),
        NoiseKind::Gaussian { .. } => Err(Error::Unsupported(format!(
            "closed form for the gaussian minimum exists only for pairs, got N = {}",
            model.ensemble_size
        ))),
        NoiseKind::Uniform { delta } => Ok(-(n - 1.0) / (n + 1.0) * delta),
    }
}

/// Density of `min_i Z_i` for the uniform model.
pub fn min_density_uniform(x: f64, model: &NoiseModel) -> Result<f64> {
    let NoiseKind::Uniform { delta } = model.kind else {
        return Err(Error::Unsupported("min density is defined for the uniform model".into()));
    };
    if x < -delta || x > delta {
        return Ok(0.0);
    }
    let n = model.ensemble_size as i32;
    Ok(n as f64 / (2.0 * delta) * ((delta - x) / (2.0 * delta)).powi(n - 1))
}

/// Predicted bias of `beta * min + (1 - beta) * mean` under zero-mean noise.
pub fn weighted_bias_prediction(model: &NoiseModel, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
    }
    // The mean of unbiased estimates contributes nothing.
    Ok(beta * closed_form_min_bias(model)?)
}

/// Running mean/variance (Welford).
#[derive(Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64).sqrt() / (self.count as f64).sqrt()
    }
}

fn check_samples(sample_count: usize) -> Result<()> {
    if sample_count < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {sample_count}"
        )));
    }
    Ok(())
}

/// Average of the per-ensemble minimum over `sample_count` iid ensembles.
pub fn monte_carlo_min_bias(model: &NoiseModel, sample_count: usize, rng_seed: u64) -> Result<BiasEstimate> {
    check_samples(sample_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut moments = Moments::default();
    for _ in 0..sample_count {
        let m = (0..model.ensemble_size)
            .map(|_| model.sample(&mut rng))
            .fold(f64::INFINITY, f64::min);
        moments.push(m);
    }
    Ok(BiasEstimate {
        empirical_mean: moments.mean,
        standard_error: moments.standard_error(),
        sample_count,
        closed_form: closed_form_min_bias(model).ok(),
    })
}

/// Monte Carlo of the weighted pair bracket applied to two noisy copies of
/// a true value of zero.
pub fn monte_carlo_weighted_bias(
    model: &NoiseModel,
    beta: f64,
    sample_count: usize,
    rng_seed: u64,
) -> Result<BiasEstimate> {
    check_samples(sample_count)?;
    if model.ensemble_size != 2 {
        return Err(Error::Unsupported("the weighted bracket needs a pair of estimates".into()));
    }
    let prediction = weighted_bias_prediction(model, beta).ok();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut moments = Moments::default();
    for _ in 0..sample_count {
        let (a, b) = (model.sample(&mut rng), model.sample(&mut rng));
        moments.push(weighted_bracket(a, b, beta));
    }
    Ok(BiasEstimate {
        empirical_mean: moments.mean,
        standard_error: moments.standard_error(),
        sample_count,
        closed_form: prediction,
    })
}

/// One line of the verification table.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryRow {
    pub model: NoiseModel,
    pub estimate: BiasEstimate,
    pub pass: bool,
}

pub const THEORY_HEADER: &str = "kind,N,scale,closed_form,mc_mean,std_err,pass";

impl fmt::Display for TheoryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cf = self
            .estimate
            .closed_form
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
        write!(
            f,
            "{},{},{},{},{:.6},{:.6},{}",
            self.model.kind_name(),
            self.model.ensemble_size,
            self.model.scale(),
            cf,
            self.estimate.empirical_mean,
            self.estimate.standard_error,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

/// The default models: the gaussian pair and four uniform ensembles.
pub fn default_models() -> Vec<NoiseModel> {
    let mut models = vec![NoiseModel {
        kind: NoiseKind::Gaussian { sigma: 1.0 },
        ensemble_size: 2,
    }];
    for (n, delta) in [(2, 1.0), (3, 1.0), (5, 1.0), (2, 0.5)] {
        models.push(NoiseModel {
            kind: NoiseKind::Uniform { delta },
            ensemble_size: n,
        });
    }
    models
}

/// Runs the Monte Carlo check for each model; a row passes when the
/// empirical mean lies within 3 standard errors of the closed form.
pub fn verification_table(models: &[NoiseModel], sample_count: usize, rng_seed: u64) -> Result<Vec<TheoryRow>> {
    models
        .iter()
        .enumerate()
        .map(|(i, model)| {
            let estimate = monte_carlo_min_bias(model, sample_count, rng_seed.wrapping_add(i as u64))?;
            Ok(TheoryRow {
                model: *model,
                pass: estimate.within(3.0),
                estimate,
            })
        })
        .collect()
}
