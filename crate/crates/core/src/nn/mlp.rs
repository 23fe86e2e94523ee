use matrixmultiply::dgemm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// Number of weight layers: two hidden layers plus the output layer.
pub const LAYER_COUNT: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputActivation {
    /// Raw linear output (critics).
    Identity,
    /// `bound * tanh(z)`, kept strictly inside `(-bound, bound)` (actors).
    TanhScaled { bound: f64 },
}

impl OutputActivation {
    fn validate(self) -> Result<Self> {
        match self {
            OutputActivation::TanhScaled { bound } if !(bound > 0.0 && bound.is_finite()) => Err(
                Error::InvalidArgument(format!("tanh_scaled bound must be positive, got {bound}")),
            ),
            other => Ok(other),
        }
    }
}

/// One dense layer, weights stored row-major as `fan_out x fan_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(fan_in: usize, fan_out: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if fan_in == 0 || fan_out == 0 {
            return Err(Error::InvalidArgument("layer dimensions must be >= 1".into()));
        }
        check_dim("layer weights", fan_in * fan_out, weights.len())?;
        check_dim("layer biases", fan_out, biases.len())?;
        Ok(Self {
            fan_in,
            fan_out,
            weights,
            biases,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.fan_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// `out = input * W^T + b` for `n` row-major input rows.
    fn forward_into(&self, input: &[f64], n: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(n * self.fan_out);
        for _ in 0..n {
            out.extend_from_slice(&self.biases);
        }
        // SAFETY: input is n x fan_in, weights fan_out x fan_in (read transposed
        // through the strides), out is n x fan_out; all lengths checked by callers.
        unsafe {
            dgemm(
                n,
                self.fan_in,
                self.fan_out,
                1.0,
                input.as_ptr(),
                self.fan_in as isize,
                1,
                self.weights.as_ptr(),
                1,
                self.fan_in as isize,
                1.0,
                out.as_mut_ptr(),
                self.fan_out as isize,
                1,
            );
        }
    }

    /// Accumulates weight/bias gradients for this layer and returns the
    /// gradient with respect to its input.
    fn backward(
        &self,
        input: &[f64],
        grad_out: &[f64],
        n: usize,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) -> Vec<f64> {
        // dW = dZ^T * X
        // SAFETY: grad_out is n x fan_out, input n x fan_in, grad_w fan_out x fan_in.
        unsafe {
            dgemm(
                self.fan_out,
                n,
                self.fan_in,
                1.0,
                grad_out.as_ptr(),
                1,
                self.fan_out as isize,
                input.as_ptr(),
                self.fan_in as isize,
                1,
                0.0,
                grad_w.as_mut_ptr(),
                self.fan_in as isize,
                1,
            );
        }
        grad_b.iter_mut().for_each(|b| *b = 0.0);
        for row in grad_out.chunks_exact(self.fan_out) {
            for (b, g) in grad_b.iter_mut().zip(row) {
                *b += g;
            }
        }
        // dX = dZ * W
        let mut grad_in = vec![0.0; n * self.fan_in];
        // SAFETY: grad_out n x fan_out, weights fan_out x fan_in, grad_in n x fan_in.
        unsafe {
            dgemm(
                n,
                self.fan_out,
                self.fan_in,
                1.0,
                grad_out.as_ptr(),
                self.fan_out as isize,
                1,
                self.weights.as_ptr(),
                self.fan_in as isize,
                1,
                0.0,
                grad_in.as_mut_ptr(),
                self.fan_in as isize,
                1,
            );
        }
        grad_in
    }
}

/// Parameters of a two-hidden-layer ReLU perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
    output: OutputActivation,
}

/// Gradients shaped like [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradBundle {
    pub param_grads: ParamGrads,
    /// Row-major `n x input_dim`; for critics fed `[state | action]` the
    /// trailing columns are the action gradient.
    pub input_grad: Vec<f64>,
}

/// Intermediate activations kept from a forward pass.
pub(crate) struct Trace<'a> {
    n: usize,
    input: &'a [f64],
    pre: [Vec<f64>; LAYER_COUNT],
    hidden: [Vec<f64>; 2],
    pub(crate) output: Vec<f64>,
}

/// Draws weights uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` with zero biases.
pub fn init_params(
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    output: OutputActivation,
    rng_seed: u64,
) -> Result<MlpParams> {
    if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "network dimensions must be >= 1, got {input_dim}-{hidden_dim}-{hidden_dim}-{output_dim}"
        )));
    }
    let output = output.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dims = [input_dim, hidden_dim, hidden_dim, output_dim];
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-scale..=scale))
                .collect();
            Layer::new(fan_in, fan_out, weights, vec![0.0; fan_out])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MlpParams { layers, output })
}

fn relu_in_place(values: &mut [f64]) {
    for v in values {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
}

fn relu_mask(grad: &mut [f64], pre: &[f64]) {
    for (g, z) in grad.iter_mut().zip(pre) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
}

impl MlpParams {
    /// Builds a network from explicit layers, checking the architecture.
    pub fn from_layers(layers: Vec<Layer>, output: OutputActivation) -> Result<Self> {
        check_dim("layer count", LAYER_COUNT, layers.len())?;
        for pair in layers.windows(2) {
            check_dim("layer chain", pair[0].fan_out, pair[1].fan_in)?;
        }
        if layers[0].fan_out != layers[1].fan_out {
            return Err(Error::InvalidArgument(
                "both hidden layers must have the same width".into(),
            ));
        }
        let output = output.validate()?;
        let params = Self { layers, output };
        if !params.is_finite() {
            return Err(Error::NumericalFailure("non-finite parameter".into()));
        }
        Ok(params)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].fan_out
    }

    pub fn output_dim(&self) -> usize {
        self.layers[LAYER_COUNT - 1].fan_out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            flat.extend_from_slice(&l.weights);
            flat.extend_from_slice(&l.biases);
        }
        flat
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    /// FNV-1a over the raw bits of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut hash = 0xcbf2_9ce4_8422_2325_u64;
        for v in self.flatten() {
            for byte in v.to_bits().to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        hash
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Evaluates `n` row-major inputs at once.
    pub fn forward_batch(&self, inputs: &[f64], n: usize) -> Result<Vec<f64>> {
        Ok(self.forward_trace(inputs, n)?.output)
    }

    pub(crate) fn forward_trace<'a>(&self, inputs: &'a [f64], n: usize) -> Result<Trace<'a>> {
        check_dim("network input", n * self.input_dim(), inputs.len())?;
        let mut pre: [Vec<f64>; LAYER_COUNT] = Default::default();
        let mut hidden: [Vec<f64>; 2] = Default::default();

        self.layers[0].forward_into(inputs, n, &mut pre[0]);
        hidden[0] = pre[0].clone();
        relu_in_place(&mut hidden[0]);

        self.layers[1].forward_into(&hidden[0], n, &mut pre[1]);
        hidden[1] = pre[1].clone();
        relu_in_place(&mut hidden[1]);

        self.layers[2].forward_into(&hidden[1], n, &mut pre[2]);
        let output = match self.output {
            OutputActivation::Identity => pre[2].clone(),
            OutputActivation::TanhScaled { bound } => {
                let limit = bound.next_down();
                pre[2]
                    .iter()
                    .map(|z| (bound * z.tanh()).clamp(-limit, limit))
                    .collect()
            }
        };
        Ok(Trace {
            n,
            input: inputs,
            pre,
            hidden,
            output,
        })
    }

    /// Gradients of `upstream . output` for a single input.
    pub fn backward(&self, input: &[f64], upstream_grad: &[f64]) -> Result<GradBundle> {
        self.backward_batch(input, upstream_grad, 1)
    }

    /// Batched backward pass; parameter gradients are summed over the batch,
    /// input gradients are kept per row.
    pub fn backward_batch(
        &self,
        inputs: &[f64],
        upstream_grad: &[f64],
        n: usize,
    ) -> Result<GradBundle> {
        let trace = self.forward_trace(inputs, n)?;
        self.backward_trace(&trace, upstream_grad)
    }

    pub(crate) fn backward_trace(&self, trace: &Trace<'_>, upstream: &[f64]) -> Result<GradBundle> {
        let n = trace.n;
        check_dim("upstream gradient", n * self.output_dim(), upstream.len())?;
        let mut grads = ParamGrads::zeros_like(self);

        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::TanhScaled { bound } => upstream
                .iter()
                .zip(&trace.pre[2])
                .map(|(g, z)| {
                    let t = z.tanh();
                    g * bound * (1.0 - t * t)
                })
                .collect(),
        };

        let layer_inputs: [&[f64]; LAYER_COUNT] = [trace.input, &trace.hidden[0], &trace.hidden[1]];
        for k in (0..LAYER_COUNT).rev() {
            let mut grad_in = self.layers[k].backward(
                layer_inputs[k],
                &delta,
                n,
                &mut grads.weights[k],
                &mut grads.biases[k],
            );
            if k > 0 {
                relu_mask(&mut grad_in, &trace.pre[k - 1]);
            }
            delta = grad_in;
        }
        Ok(GradBundle {
            param_grads: grads,
            input_grad: delta,
        })
    }
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: params.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b))
            .copied()
            .collect()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn matches(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.layers.len()
            && self.biases.len() == params.layers.len()
            && params.layers.iter().enumerate().all(|(k, l)| {
                self.weights[k].len() == l.weights.len() && self.biases[k].len() == l.biases.len()
            })
    }
}

/// Polyak averaging: `target <- eta * online + (1 - eta) * target`.
pub fn soft_update(target: &mut MlpParams, online: &MlpParams, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "soft update rate must lie in (0, 1], got {eta}"
        )));
    }
    if !target.same_shape(online) {
        return Err(Error::InvalidArgument(
            "soft update between differently shaped networks".into(),
        ));
    }
    let keep = 1.0 - eta;
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        for (tv, ov) in t
            .weights
            .iter_mut()
            .chain(t.biases.iter_mut())
            .zip(o.weights.iter().chain(&o.biases))
        {
            *tv = eta * ov + keep * *tv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeroed(input: usize, hidden: usize, output: usize, act: OutputActivation) -> MlpParams {
        let mut p = init_params(input, hidden, output, act, 0).unwrap();
        p.params_mut().for_each(|v| *v = 0.0);
        p
    }

    /// Straight-line evaluator, independent of the dgemm path.
    fn reference_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (k, l) in p.layers().iter().enumerate() {
            let mut z = vec![0.0; l.fan_out()];
            for (j, zj) in z.iter_mut().enumerate() {
                let mut s = l.biases()[j];
                for i in 0..l.fan_in() {
                    s += l.weights()[j * l.fan_in() + i] * a[i];
                }
                *zj = s;
            }
            if k < LAYER_COUNT - 1 {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        match p.output_activation() {
            OutputActivation::Identity => a,
            OutputActivation::TanhScaled { bound } => a.iter().map(|z| bound * z.tanh()).collect(),
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = init_params(3, 16, 2, OutputActivation::Identity, 42).unwrap();
        let b = init_params(3, 16, 2, OutputActivation::Identity, 42).unwrap();
        assert_eq!(a, b);
        let c = init_params(3, 16, 2, OutputActivation::Identity, 43).unwrap();
        assert_ne!(a.flatten(), c.flatten());
    }

    #[test]
    fn init_respects_fan_in_range_and_zero_biases() {
        let p = init_params(3, 256, 1, OutputActivation::Identity, 7).unwrap();
        let bound = 1.0 / 3f64.sqrt();
        assert!(p.layers()[0].weights().iter().all(|w| w.abs() <= bound));
        let bound2 = 1.0 / 256f64.sqrt();
        assert!(p.layers()[1].weights().iter().all(|w| w.abs() <= bound2));
        assert!(p.layers().iter().all(|l| l.biases().iter().all(|b| *b == 0.0)));
    }

    #[test]
    fn init_rejects_zero_dims_and_bad_bound() {
        assert!(init_params(0, 4, 1, OutputActivation::Identity, 0).is_err());
        assert!(init_params(2, 0, 1, OutputActivation::Identity, 0).is_err());
        assert!(init_params(2, 4, 1, OutputActivation::TanhScaled { bound: 0.0 }, 0).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = zeroed(4, 8, 2, OutputActivation::Identity);
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        let p = zeroed(4, 8, 2, OutputActivation::TanhScaled { bound: 2.0 });
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_reference_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let act = if seed % 2 == 0 {
                OutputActivation::Identity
            } else {
                OutputActivation::TanhScaled { bound: 1.5 }
            };
            let p = init_params(5, 7, 3, act, seed).unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = p.forward(&x).unwrap();
            let want = reference_forward(&p, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn batch_rows_match_single_evaluations() {
        let p = init_params(3, 10, 2, OutputActivation::Identity, 3).unwrap();
        let xs = [0.1, -0.4, 0.9, 1.2, 0.3, -0.7, -1.0, 0.0, 0.5];
        let batch = p.forward_batch(&xs, 3).unwrap();
        for (r, row) in xs.chunks(3).enumerate() {
            let single = p.forward(row).unwrap();
            assert!((batch[2 * r] - single[0]).abs() < 1e-14);
            assert!((batch[2 * r + 1] - single[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn tanh_output_stays_strictly_inside_bound() {
        let mut p = init_params(1, 4, 1, OutputActivation::TanhScaled { bound: 2.0 }, 1).unwrap();
        p.params_mut().for_each(|v| *v = 10.0);
        let y = p.forward(&[10.0]).unwrap()[0];
        assert!(y < 2.0 && y > 1.99);
        let y = p.forward(&[-10.0]).unwrap()[0];
        assert!(y > -2.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = init_params(3, 4, 1, OutputActivation::Identity, 0).unwrap();
        assert!(matches!(
            p.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(p.backward(&[1.0, 2.0, 3.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = init_params(3, 5, 2, OutputActivation::TanhScaled { bound: 1.0 }, 5).unwrap();
        let g = p.backward(&[0.3, -0.2, 0.8], &[0.0, 0.0]).unwrap();
        assert!(g.param_grads.flatten().iter().all(|v| *v == 0.0));
        assert!(g.input_grad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn from_layers_checks_chain() {
        let l1 = Layer::new(2, 3, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let l2 = Layer::new(3, 3, vec![0.0; 9], vec![0.0; 3]).unwrap();
        let bad = Layer::new(2, 1, vec![0.0; 2], vec![0.0; 1]).unwrap();
        let good = Layer::new(3, 1, vec![0.0; 3], vec![0.0; 1]).unwrap();
        assert!(MlpParams::from_layers(
            vec![l1.clone(), l2.clone(), bad],
            OutputActivation::Identity
        )
        .is_err());
        assert!(MlpParams::from_layers(vec![l1, l2, good], OutputActivation::Identity).is_ok());
    }

    #[test]
    fn soft_update_endpoints_and_scalar_case() {
        let online = init_params(2, 3, 1, OutputActivation::Identity, 1).unwrap();
        let mut target = init_params(2, 3, 1, OutputActivation::Identity, 2).unwrap();
        soft_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);

        let mut t = zeroed(1, 1, 1, OutputActivation::Identity);
        let mut o = t.clone();
        o.params_mut().for_each(|v| *v = 1.0);
        soft_update(&mut t, &o, 0.005).unwrap();
        assert!(t.flatten().iter().all(|v| (*v - 0.005).abs() < 1e-15));
    }

    #[test]
    fn soft_update_decays_geometrically() {
        let mut t = zeroed(1, 1, 1, OutputActivation::Identity);
        let mut o = t.clone();
        o.params_mut().for_each(|v| *v = 1.0);
        let eta = 0.05;
        for k in 1..=200 {
            soft_update(&mut t, &o, eta).unwrap();
            let gap = 1.0 - t.flatten()[0];
            let expected = (1.0 - eta).powi(k);
            assert!((gap - expected).abs() < 1e-12, "step {k}: {gap} vs {expected}");
        }
    }

    #[test]
    fn soft_update_rejects_bad_rate_and_shape() {
        let o = init_params(2, 3, 1, OutputActivation::Identity, 1).unwrap();
        let mut t = o.clone();
        assert!(soft_update(&mut t, &o, 0.0).is_err());
        assert!(soft_update(&mut t, &o, 1.5).is_err());
        let other = init_params(2, 4, 1, OutputActivation::Identity, 1).unwrap();
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }
}
