#![allow(dead_code)]

use rand::Rng;
use wd3_core::nn::{init_params, MlpParams, OutputActivation};

/// Straight-line forward pass written against the raw layer arrays.
/// Returns the outputs and every hidden pre-activation.
pub fn reference_forward(net: &MlpParams, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut h = x.to_vec();
    let mut pre_all = Vec::new();
    let last = net.layers().len() - 1;
    for (li, layer) in net.layers().iter().enumerate() {
        let w = layer.weights();
        let b = layer.biases();
        let mut next = vec![0.0; layer.fan_out()];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut z = b[o];
            for i in 0..layer.fan_in() {
                z += w[o * layer.fan_in() + i] * h[i];
            }
            *slot = if li == last {
                match net.output_activation() {
                    OutputActivation::Identity => z,
                    OutputActivation::TanhScaled { bound } => bound * z.tanh(),
                }
            } else {
                pre_all.push(z);
                z.max(0.0)
            };
        }
        h = next;
    }
    (h, pre_all)
}

/// `sum_rows upstream . f(x_row)` with the reference forward pass, plus the
/// sign pattern of the hidden units.
pub fn scalar_objective(net: &MlpParams, inputs: &[f64], upstream: &[f64]) -> (f64, Vec<bool>) {
    let d_in = net.input_dim();
    let d_out = net.output_dim();
    let mut total = 0.0;
    let mut pattern = Vec::new();
    for (row, u) in inputs.chunks_exact(d_in).zip(upstream.chunks_exact(d_out)) {
        let (out, pre) = reference_forward(net, row);
        total += out.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        pattern.extend(pre.iter().map(|z| *z > 0.0));
    }
    (total, pattern)
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flipped a ReLU.
    pub skipped: usize,
}

impl FdReport {
    pub fn merge(&mut self, other: FdReport) {
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.checked += other.checked;
        self.skipped += other.skipped;
    }
}

pub fn random_net<R: Rng>(rng: &mut R, max_in: usize, max_hidden: usize, max_out: usize) -> MlpParams {
    let d_in = rng.random_range(1..=max_in);
    let hidden = rng.random_range(1..=max_hidden);
    let d_out = rng.random_range(1..=max_out);
    let act = if rng.random_bool(0.5) {
        OutputActivation::Identity
    } else {
        OutputActivation::TanhScaled {
            bound: rng.random_range(0.5..3.0),
        }
    };
    let mut net = init_params(d_in, hidden, d_out, act, rng.random()).unwrap();
    // Non-zero biases so the check covers them.
    for p in net.params_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    net
}

/// Central-difference check of `backward_batch` on parameters and inputs.
pub fn check_network<R: Rng>(net: &MlpParams, n: usize, h: f64, rng: &mut R) -> FdReport {
    let inputs: Vec<f64> = (0..n * net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
    let upstream: Vec<f64> = (0..n * net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grads = net.backward_batch(&inputs, &upstream, n).unwrap();
    let (_, base_pattern) = scalar_objective(net, &inputs, &upstream);
    let mut report = FdReport::default();

    let analytic = grads.param_grads.flatten();
    let count = net.param_count();
    assert_eq!(analytic.len(), count);
    for k in 0..count {
        let eval = |delta: f64| {
            let mut p = net.clone();
            *p.params_mut().nth(k).unwrap() += delta;
            scalar_objective(&p, &inputs, &upstream)
        };
        let (fp, pp) = eval(h);
        let (fm, pm) = eval(-h);
        if pp != base_pattern || pm != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        report.max_rel_err = report.max_rel_err.max(rel_err(analytic[k], numeric));
        report.checked += 1;
    }

    for k in 0..inputs.len() {
        let eval = |delta: f64| {
            let mut x = inputs.clone();
            x[k] += delta;
            scalar_objective(net, &x, &upstream)
        };
        let (fp, pp) = eval(h);
        let (fm, pm) = eval(-h);
        if pp != base_pattern || pm != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        report.max_rel_err = report.max_rel_err.max(rel_err(grads.input_grad[k], numeric));
        report.checked += 1;
    }
    report
}

/// 100 random networks up to 6-8-8-2, batches of 1 to 3 rows.
pub fn gradient_suite(seed: u64) -> FdReport {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = FdReport::default();
    for _ in 0..100 {
        let net = random_net(&mut rng, 6, 8, 2);
        let n = rng.random_range(1..=3);
        report.merge(check_network(&net, n, 1e-5, &mut rng));
    }
    report
}

/// Composite Simpson rule with `intervals` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[derive(Debug)]
pub struct SyntheticBias {
    pub mean: f64,
    pub standard_error: f64,
    pub draws: usize,
}

/// Adds independent `N(0, sigma^2)` offsets to the outputs of two identical
/// frozen target critics and measures the average shift of the bootstrap
/// bracket, `(y_noisy - y_clean) / gamma`, over `draws` noise draws.
pub fn synthetic_target_bias(beta: f64, sigma: f64, draws: usize, seed: u64) -> SyntheticBias {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use wd3_core::agents::{Agent, AgentConfig, Variant};
    use wd3_core::replay::{Batch, Transition};

    let spec = wd3_core::envs::EnvKind::Pendulum.spec();
    let cfg = AgentConfig {
        beta,
        target_noise_std: 0.0,
        hidden_dim: 16,
        ..AgentConfig::for_variant(Variant::Wd3)
    };
    let actor = init_params(3, 16, 1, OutputActivation::TanhScaled { bound: 2.0 }, seed).unwrap();
    let critic = init_params(4, 16, 1, OutputActivation::Identity, seed ^ 0x5eed).unwrap();
    let clean = Agent::from_networks(cfg.clone(), &spec, actor, vec![critic.clone(), critic]);
    let batch = Batch::from_transitions(&[Transition {
        state: vec![1.0, 0.0, 0.0],
        action: vec![0.0],
        reward: -1.0,
        next_state: vec![0.6, 0.8, -0.5],
        done_mask: 0.0,
    }])
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let y_clean = clean.compute_target(&batch, &mut rng).unwrap()[0];
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut noisy = clean.clone();
    let base: Vec<f64> = noisy.critic_targets().iter().map(|c| c.layers()[2].biases()[0]).collect();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        for (c, b) in noisy.critic_targets_mut().iter_mut().zip(&base) {
            c.layers_mut()[2].biases_mut()[0] = b + normal.sample(&mut rng);
        }
        let shift = (noisy.compute_target(&batch, &mut rng).unwrap()[0] - y_clean) / cfg.gamma;
        sum += shift;
        sum_sq += shift * shift;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    SyntheticBias {
        mean,
        standard_error: (var / n).sqrt(),
        draws,
    }
}
