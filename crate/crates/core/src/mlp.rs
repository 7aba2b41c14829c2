//! Fully connected feed-forward regression network: tanh hidden layers,
//! linear output, mean-squared-error loss, backpropagation, SGD and Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::ScaledSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlpError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(&'static str),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("loss became non-finite during epoch {epoch}")]
    NanLoss { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(z),
            Activation::Identity => z,
        }
    }
}

/// One affine layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.inputs + col]
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    #[cfg(test)]
    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.biases)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    /// Applied after every layer except the last.
    pub hidden_activation: Activation,
}

/// Per-parameter gradient, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.params().copied())
    }
}

impl Mlp {
    /// Weights uniform in `(-1/√fan_in, 1/√fan_in)`, zero biases, tanh hidden.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        if layer_sizes.len() < 2 {
            return Err(MlpError::InvalidArchitecture(
                "need at least input and output layers",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(MlpError::InvalidArchitecture(
                "layer sizes must be at least 1",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / libm::sqrt(w[0] as f64);
                let mut d = Dense::zeros(w[0], w[1]);
                for v in &mut d.weights {
                    *v = rng.gen_range(-bound..bound);
                }
                d
            })
            .collect();
        Ok(Self {
            layers,
            hidden_activation: Activation::Tanh,
        })
    }

    pub fn from_layers(
        layers: Vec<Dense>,
        hidden_activation: Activation,
    ) -> Result<Self, MlpError> {
        if layers.is_empty() {
            return Err(MlpError::InvalidArchitecture("no layers"));
        }
        for l in &layers {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(MlpError::InvalidArchitecture(
                    "layer sizes must be at least 1",
                ));
            }
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(MlpError::InvalidArchitecture(
                    "parameter array length disagrees with shape",
                ));
            }
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(MlpError::InvalidArchitecture(
                    "consecutive layer sizes disagree",
                ));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
        })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.n_inputs() {
            return Err(MlpError::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.len(),
            });
        }
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(l);
            a = (0..layer.outputs)
                .map(|j| {
                    let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                    act.apply(layer.biases[j] + dot(row, &a))
                })
                .collect();
        }
        Ok(a)
    }

    pub fn predict_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MlpError> {
        inputs.iter().map(|x| self.forward(x)).collect()
    }

    fn check_shape(&self, grads: &Gradients) -> Result<(), MlpError> {
        if grads.layers.len() != self.layers.len()
            || !grads
                .layers
                .iter()
                .zip(&self.layers)
                .all(|(g, l)| g.same_shape(l))
        {
            return Err(MlpError::DimensionMismatch {
                expected: self.n_params(),
                actual: grads
                    .layers
                    .iter()
                    .map(|l| l.weights.len() + l.biases.len())
                    .sum(),
            });
        }
        Ok(())
    }
}

/// Mean over samples and output components of the squared difference.
pub fn mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MlpError> {
    if predictions.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    if predictions.len() != targets.len() {
        return Err(MlpError::DimensionMismatch {
            expected: targets.len(),
            actual: predictions.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(MlpError::DimensionMismatch {
                expected: t.len(),
                actual: p.len(),
            });
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += p.len();
    }
    if count == 0 {
        return Err(MlpError::EmptyBatch);
    }
    Ok(sum / count as f64)
}

/// Batch-major activation buffers reused across minibatches.
struct Workspace {
    /// `acts[l]` holds `batch x size_l`; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(mlp: &Mlp, batch: usize) -> Self {
        let sizes = mlp.layer_sizes();
        Self {
            acts: sizes.iter().map(|&s| vec![0.0; s * batch]).collect(),
            deltas: sizes.iter().map(|&s| vec![0.0; s * batch]).collect(),
        }
    }
}

fn check_batch(mlp: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(), MlpError> {
    if inputs.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    if inputs.len() != targets.len() {
        return Err(MlpError::DimensionMismatch {
            expected: inputs.len(),
            actual: targets.len(),
        });
    }
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != mlp.n_inputs() {
            return Err(MlpError::DimensionMismatch {
                expected: mlp.n_inputs(),
                actual: x.len(),
            });
        }
        if t.len() != mlp.n_outputs() {
            return Err(MlpError::DimensionMismatch {
                expected: mlp.n_outputs(),
                actual: t.len(),
            });
        }
    }
    Ok(())
}

/// Forward pass over the first `batch` rows of `acts[0]`, filling the other
/// activation buffers. Matches [`Mlp::forward`] bit for bit.
fn forward_batch(mlp: &Mlp, batch: usize, acts: &mut [Vec<f64>]) {
    for (l, layer) in mlp.layers.iter().enumerate() {
        let act = mlp.activation_of(l);
        let (before, after) = acts.split_at_mut(l + 1);
        let a_in = &before[l];
        let a_out = &mut after[0];
        let (n_in, n_out) = (layer.inputs, layer.outputs);
        let mut s = 0;
        while s < batch {
            let pair = s + 1 < batch;
            let x0 = &a_in[s * n_in..(s + 1) * n_in];
            let x1 = if pair {
                &a_in[(s + 1) * n_in..(s + 2) * n_in]
            } else {
                x0
            };
            for j in 0..n_out {
                let row = &layer.weights[j * n_in..(j + 1) * n_in];
                let (d0, d1) = dot2(row, x0, x1);
                a_out[s * n_out + j] = act.apply(layer.biases[j] + d0);
                if pair {
                    a_out[(s + 1) * n_out + j] = act.apply(layer.biases[j] + d1);
                }
            }
            s += 2;
        }
    }
}

/// Full-set MSE through reusable buffers, in chunks of `ws` capacity.
fn batched_mse(mlp: &Mlp, set: &ScaledSet, ws: &mut Workspace, capacity: usize) -> f64 {
    let (n_in, n_out) = (mlp.n_inputs(), mlp.n_outputs());
    let last = mlp.layers.len();
    let mut sum = 0.0;
    let mut start = 0;
    while start < set.len() {
        let end = (start + capacity).min(set.len());
        for (s, x) in set.inputs[start..end].iter().enumerate() {
            ws.acts[0][s * n_in..(s + 1) * n_in].copy_from_slice(x);
        }
        forward_batch(mlp, end - start, &mut ws.acts);
        for (s, t) in set.targets[start..end].iter().enumerate() {
            let y = &ws.acts[last][s * n_out..(s + 1) * n_out];
            sum += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        start = end;
    }
    sum / (set.len() * n_out) as f64
}

/// Forward and backward pass over `rows` of the set; accumulates into `grads`
/// (overwritten) and returns the batch MSE.
fn loss_and_gradients(
    mlp: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    rows: &[usize],
    ws: &mut Workspace,
    grads: &mut Gradients,
) -> f64 {
    let batch = rows.len();
    let n_in = mlp.n_inputs();
    for (s, &r) in rows.iter().enumerate() {
        ws.acts[0][s * n_in..(s + 1) * n_in].copy_from_slice(&inputs[r]);
    }
    forward_batch(mlp, batch, &mut ws.acts);

    let last = mlp.layers.len();
    let n_out = mlp.n_outputs();
    let scale = 2.0 / (batch * n_out) as f64;
    let mut loss = 0.0;
    for (s, &r) in rows.iter().enumerate() {
        let y = &ws.acts[last][s * n_out..(s + 1) * n_out];
        let d = &mut ws.deltas[last][s * n_out..(s + 1) * n_out];
        for ((dj, &yj), &tj) in d.iter_mut().zip(y).zip(&targets[r]) {
            let e = yj - tj;
            loss += e * e;
            *dj = scale * e;
        }
    }

    for l in (0..last).rev() {
        let layer = &mlp.layers[l];
        let g = &mut grads.layers[l];
        g.weights.iter_mut().for_each(|v| *v = 0.0);
        g.biases.iter_mut().for_each(|v| *v = 0.0);
        let (d_lo, d_hi) = ws.deltas.split_at_mut(l + 1);
        let delta = &d_hi[0];
        let a_in = &ws.acts[l];
        // Row-outer loops keep one weight row hot across the whole batch.
        let (n_in, n_out) = (layer.inputs, layer.outputs);
        for j in 0..n_out {
            let gw = &mut g.weights[j * n_in..(j + 1) * n_in];
            for s in 0..batch {
                g.biases[j] += delta[s * n_out + j];
            }
            accumulate_rows(gw, batch, |s| {
                (delta[s * n_out + j], &a_in[s * n_in..(s + 1) * n_in])
            });
        }
        if l == 0 {
            break;
        }
        let prev = &mut d_lo[l];
        prev[..batch * layer.inputs]
            .iter_mut()
            .for_each(|v| *v = 0.0);
        for j in 0..n_out {
            let w = &layer.weights[j * n_in..(j + 1) * n_in];
            for s in 0..batch {
                axpy(delta[s * n_out + j], w, &mut prev[s * n_in..(s + 1) * n_in]);
            }
        }
        let tanh_hidden = mlp.hidden_activation == Activation::Tanh;
        for s in 0..batch {
            let p = &mut prev[s * layer.inputs..(s + 1) * layer.inputs];
            if tanh_hidden {
                let a = &a_in[s * layer.inputs..(s + 1) * layer.inputs];
                for (pi, &ai) in p.iter_mut().zip(a) {
                    *pi *= 1.0 - ai * ai;
                }
            }
        }
    }
    loss / (batch * n_out) as f64
}

/// Exact gradient of the batch MSE with respect to every weight and bias.
pub fn backward(
    mlp: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<Gradients, MlpError> {
    check_batch(mlp, inputs, targets)?;
    let rows: Vec<usize> = (0..inputs.len()).collect();
    let mut ws = Workspace::new(mlp, rows.len());
    let mut grads = Gradients::zeros_like(mlp);
    loss_and_gradients(mlp, inputs, targets, &rows, &mut ws, &mut grads);
    Ok(grads)
}

/// `θ ← θ - lr·g`.
pub fn sgd_step(mlp: &mut Mlp, grads: &Gradients, learning_rate: f64) -> Result<(), MlpError> {
    mlp.check_shape(grads)?;
    for (layer, g) in mlp.layers.iter_mut().zip(&grads.layers) {
        axpy(-learning_rate, &g.weights, &mut layer.weights);
        axpy(-learning_rate, &g.biases, &mut layer.biases);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        Self {
            m: Gradients::zeros_like(mlp),
            v: Gradients::zeros_like(mlp),
            t: 0,
        }
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(
    mlp: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    learning_rate: f64,
    params: &AdamParams,
) -> Result<(), MlpError> {
    mlp.check_shape(grads)?;
    mlp.check_shape(&state.m)?;
    mlp.check_shape(&state.v)?;
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(params.beta1, t);
    let c2 = 1.0 - libm::pow(params.beta2, t);
    let (b1, b2, eps) = (params.beta1, params.beta2, params.epsilon);
    for (((layer, g), m), v) in mlp
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m.layers)
        .zip(&mut state.v.layers)
    {
        let slices = [
            (
                &mut layer.weights,
                &g.weights,
                &mut m.weights,
                &mut v.weights,
            ),
            (&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases),
        ];
        for (p, g, m, v) in slices {
            let n = p.len();
            let (g, m, v) = (&g[..n], &mut m[..n], &mut v[..n]);
            for i in 0..n {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sgd" => Some(Optimizer::Sgd),
            "adam" => Some(Optimizer::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub adam: AdamParams,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let fail = |why| Err(MlpError::InvalidConfig(why));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        let a = &self.adam;
        if !(a.beta1 > 0.0 && a.beta1 < 1.0) {
            return fail("beta1 must lie in (0, 1)");
        }
        if !(a.beta2 > 0.0 && a.beta2 < 1.0) {
            return fail("beta2 must lie in (0, 1)");
        }
        if !(a.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    /// Sample-weighted mean of the minibatch losses seen during each epoch.
    pub train_mse: Vec<f64>,
    /// Full test-set MSE at the end of each epoch, when a test set is given.
    pub test_mse: Option<Vec<f64>>,
}

/// Minibatch training on pre-scaled data. Deterministic for a fixed config.
pub fn train(
    mut mlp: Mlp,
    train_set: &ScaledSet,
    test_set: Option<&ScaledSet>,
    config: &TrainConfig,
) -> Result<(Mlp, TrainHistory), MlpError> {
    config.validate()?;
    let mut history = TrainHistory {
        train_mse: Vec::with_capacity(config.epochs),
        test_mse: test_set.map(|_| Vec::with_capacity(config.epochs)),
    };
    if config.epochs == 0 {
        return Ok((mlp, history));
    }
    check_batch(&mlp, &train_set.inputs, &train_set.targets)?;
    if let Some(t) = test_set {
        check_batch(&mlp, &t.inputs, &t.targets)?;
    }

    let n = train_set.len();
    let batch = config.batch_size.min(n);
    let mut ws = Workspace::new(&mlp, batch);
    let eval_capacity = 64;
    let mut eval_ws = test_set.map(|_| Workspace::new(&mlp, eval_capacity));
    let mut grads = Gradients::zeros_like(&mlp);
    let mut adam = AdamState::new(&mlp);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for rows in order.chunks(batch) {
            let loss = loss_and_gradients(
                &mlp,
                &train_set.inputs,
                &train_set.targets,
                rows,
                &mut ws,
                &mut grads,
            );
            if !loss.is_finite() {
                return Err(MlpError::NanLoss { epoch });
            }
            weighted += loss * rows.len() as f64;
            match config.optimizer {
                Optimizer::Sgd => sgd_step(&mut mlp, &grads, config.learning_rate)?,
                Optimizer::Adam => adam_step(
                    &mut mlp,
                    &grads,
                    &mut adam,
                    config.learning_rate,
                    &config.adam,
                )?,
            }
        }
        history.train_mse.push(weighted / n as f64);
        if let (Some(t), Some(h), Some(ews)) =
            (test_set, history.test_mse.as_mut(), eval_ws.as_mut())
        {
            let loss = batched_mse(&mlp, t, ews, eval_capacity);
            if !loss.is_finite() {
                return Err(MlpError::NanLoss { epoch });
            }
            h.push(loss);
        }
    }
    Ok((mlp, history))
}

/// Central-difference check of [`backward`].
///
/// Each one-sided change `L(θ ± h) - L(θ)` is evaluated by propagating the
/// perturbation through the network as an explicit difference, so the
/// quotient `(ΔL₊ - ΔL₋) / 2h` carries truncation error only. Returns the
/// largest `|g_a - g_n| / max(1e-12, |g_a| + |g_n|)` over all parameters.
pub fn grad_check(
    mlp: &Mlp,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    h: f64,
) -> Result<f64, MlpError> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(MlpError::InvalidConfig(
            "grad_check step must lie in [1e-8, 1e-4]",
        ));
    }
    let analytic = backward(mlp, inputs, targets)?;
    let base = BaseTrace::new(mlp, inputs, targets);
    let mut worst: f64 = 0.0;
    for (l, layer) in mlp.layers.iter().enumerate() {
        let g = &analytic.layers[l];
        for j in 0..layer.outputs {
            for i in 0..=layer.inputs {
                // i == inputs denotes the bias of neuron j
                let ga = if i == layer.inputs {
                    g.biases[j]
                } else {
                    g.weights[j * layer.inputs + i]
                };
                let up = base.loss_change(mlp, l, j, i, h);
                let down = base.loss_change(mlp, l, j, i, -h);
                let gn = (up - down) / (2.0 * h);
                let denom = (libm::fabs(ga) + libm::fabs(gn)).max(1e-12);
                worst = worst.max(libm::fabs(ga - gn) / denom);
            }
        }
    }
    Ok(worst)
}

/// Unperturbed pre-activations, activations and residuals per sample.
struct BaseTrace {
    /// `z[s][l]` pre-activation of layer `l`.
    z: Vec<Vec<Vec<f64>>>,
    /// `a[s][l]`, with `a[s][0]` the input.
    a: Vec<Vec<Vec<f64>>>,
    residual: Vec<Vec<f64>>,
    denom: f64,
}

impl BaseTrace {
    fn new(mlp: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Self {
        let mut z_all = Vec::new();
        let mut a_all = Vec::new();
        let mut residual = Vec::new();
        for (x, t) in inputs.iter().zip(targets) {
            let mut zs = Vec::new();
            let mut acts = vec![x.clone()];
            for (l, layer) in mlp.layers.iter().enumerate() {
                let prev = &acts[l];
                let z: Vec<f64> = (0..layer.outputs)
                    .map(|j| {
                        layer.biases[j]
                            + dot(
                                &layer.weights[j * layer.inputs..(j + 1) * layer.inputs],
                                prev,
                            )
                    })
                    .collect();
                let act = mlp.activation_of(l);
                acts.push(z.iter().map(|&v| act.apply(v)).collect());
                zs.push(z);
            }
            residual.push(
                acts[acts.len() - 1]
                    .iter()
                    .zip(t)
                    .map(|(y, t)| y - t)
                    .collect(),
            );
            z_all.push(zs);
            a_all.push(acts);
        }
        Self {
            z: z_all,
            a: a_all,
            residual,
            denom: (inputs.len() * mlp.n_outputs()) as f64,
        }
    }

    /// `L(θ + step·e_p) - L(θ)` for the parameter of layer `l`, neuron `j`,
    /// input `i` (bias when `i == inputs`).
    fn loss_change(&self, mlp: &Mlp, l: usize, j: usize, i: usize, step: f64) -> f64 {
        let layer = &mlp.layers[l];
        let mut total = 0.0;
        for s in 0..self.z.len() {
            let mut dz = vec![0.0; layer.outputs];
            dz[j] = if i == layer.inputs {
                step
            } else {
                step * self.a[s][l][i]
            };
            let mut layer_idx = l;
            loop {
                let da = act_difference(mlp.activation_of(layer_idx), &self.z[s][layer_idx], &dz);
                if layer_idx + 1 == mlp.layers.len() {
                    total += da
                        .iter()
                        .zip(&self.residual[s])
                        .map(|(&d, &r)| d * (2.0 * r + d))
                        .sum::<f64>();
                    break;
                }
                layer_idx += 1;
                let next = &mlp.layers[layer_idx];
                dz = (0..next.outputs)
                    .map(|k| dot(&next.weights[k * next.inputs..(k + 1) * next.inputs], &da))
                    .collect();
            }
        }
        total / self.denom
    }
}

/// `σ(z + dz) - σ(z)` without cancellation.
fn act_difference(act: Activation, z: &[f64], dz: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => dz.to_vec(),
        Activation::Tanh => z
            .iter()
            .zip(dz)
            .map(|(&z, &d)| {
                if d == 0.0 {
                    0.0
                } else {
                    libm::tanh(d) * (1.0 - libm::tanh(z) * libm::tanh(z + d))
                }
            })
            .collect(),
    }
}

/// Dot product with eight independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Same summation order as [`dot`] applied to each of `x0` and `x1`.
fn dot2(a: &[f64], x0: &[f64], x1: &[f64]) -> (f64, f64) {
    let mut acc0 = [0.0; 8];
    let mut acc1 = [0.0; 8];
    let ca = a.chunks_exact(8);
    let c0 = x0.chunks_exact(8);
    let c1 = x1.chunks_exact(8);
    let (ra, r0, r1) = (ca.remainder(), c0.remainder(), c1.remainder());
    for ((w, p), q) in ca.zip(c0).zip(c1) {
        for k in 0..8 {
            acc0[k] += w[k] * p[k];
            acc1[k] += w[k] * q[k];
        }
    }
    let (mut t0, mut t1) = (0.0, 0.0);
    for ((w, p), q) in ra.iter().zip(r0).zip(r1) {
        t0 += w * p;
        t1 += w * q;
    }
    let fold = |c: [f64; 8]| ((c[0] + c[4]) + (c[1] + c[5])) + ((c[2] + c[6]) + (c[3] + c[7]));
    (fold(acc0) + t0, fold(acc1) + t1)
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y += Σ_s c_s·x_s` for `s` in `0..count`, added one term at a time in
/// order, four rows per pass over `y`.
fn accumulate_rows<'a>(y: &mut [f64], count: usize, term: impl Fn(usize) -> (f64, &'a [f64])) {
    let n = y.len();
    let mut s = 0;
    while s + 4 <= count {
        let (c0, x0) = term(s);
        let (c1, x1) = term(s + 1);
        let (c2, x2) = term(s + 2);
        let (c3, x3) = term(s + 3);
        let (x0, x1, x2, x3) = (&x0[..n], &x1[..n], &x2[..n], &x3[..n]);
        for i in 0..n {
            y[i] = (((y[i] + c0 * x0[i]) + c1 * x1[i]) + c2 * x2[i]) + c3 * x3[i];
        }
        s += 4;
    }
    while s < count {
        let (c, x) = term(s);
        axpy(c, x, y);
        s += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(w: f64, b: f64) -> Mlp {
        Mlp::from_layers(
            vec![Dense {
                inputs: 1,
                outputs: 1,
                weights: vec![w],
                biases: vec![b],
            }],
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn init_shapes_bounds_and_determinism() {
        let a = Mlp::init(&[1, 100, 100, 1], 9).unwrap();
        assert_eq!(a, Mlp::init(&[1, 100, 100, 1], 9).unwrap());
        let shapes: Vec<(usize, usize)> = a.layers.iter().map(|l| (l.outputs, l.inputs)).collect();
        assert_eq!(shapes, vec![(100, 1), (100, 100), (1, 100)]);
        for l in &a.layers {
            let bound = 1.0 / libm::sqrt(l.inputs as f64);
            assert!(l.weights.iter().all(|w| w.abs() < bound));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
        assert_eq!(a.layer_sizes(), vec![1, 100, 100, 1]);
        assert!(matches!(
            Mlp::init(&[3], 0),
            Err(MlpError::InvalidArchitecture(_))
        ));
        assert!(matches!(
            Mlp::init(&[1, 0, 1], 0),
            Err(MlpError::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn forward_cases() {
        let mut zero = Mlp::init(&[2, 4, 3], 1).unwrap();
        zero.layers
            .iter_mut()
            .for_each(|l| l.weights.iter_mut().for_each(|w| *w = 0.0));
        assert_eq!(zero.forward(&[0.3, -2.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(affine(2.0, 1.0).forward(&[3.0]).unwrap(), vec![7.0]);
        assert!(matches!(
            affine(2.0, 1.0).forward(&[1.0, 2.0]),
            Err(MlpError::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn forward_by_hand() {
        // [1,2,1]: hidden tanh(0.5x + 0.1), tanh(-0.3x + 0.2); out 1.5 h1 - 2 h2 + 0.05
        let net = Mlp::from_layers(
            vec![
                Dense {
                    inputs: 1,
                    outputs: 2,
                    weights: vec![0.5, -0.3],
                    biases: vec![0.1, 0.2],
                },
                Dense {
                    inputs: 2,
                    outputs: 1,
                    weights: vec![1.5, -2.0],
                    biases: vec![0.05],
                },
            ],
            Activation::Tanh,
        )
        .unwrap();
        // x = 0.7: tanh(0.45) = 0.421899005250008..., tanh(-0.01) = -0.00999966667999946...
        let expected = 1.5 * 0.421_899_005_250_007_9 - 2.0 * -0.009_999_666_679_999_458 + 0.05;
        let y = net.forward(&[0.7]).unwrap()[0];
        assert!((y - expected).abs() < 1e-15, "{y} vs {expected}");
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_eq!(
            mse(&[vec![0.0], vec![0.0]], &[vec![1.0], vec![1.0]]).unwrap(),
            1.0
        );
        let m = mse(
            &[vec![1.0], vec![2.0], vec![3.0]],
            &[vec![1.0], vec![2.0], vec![5.0]],
        )
        .unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(mse(&[], &[]), Err(MlpError::EmptyBatch));
        assert!(matches!(
            mse(&[vec![1.0]], &[vec![1.0, 2.0]]),
            Err(MlpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn affine_gradient_by_hand() {
        let (w, b, x, t) = (0.8, -0.2, 1.5, 0.3);
        let g = backward(&affine(w, b), &[vec![x]], &[vec![t]]).unwrap();
        let r = w * x + b - t;
        assert!((g.layers[0].weights[0] - 2.0 * x * r).abs() < 1e-15);
        assert!((g.layers[0].biases[0] - 2.0 * r).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let net = Mlp::init(&[1, 6, 2], 4).unwrap();
        let x = vec![vec![0.3], vec![-0.7]];
        let t = net.predict_all(&x).unwrap();
        let g = backward(&net, &x, &t).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn sgd_cases() {
        let mut net = affine(1.0, 0.0);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights[0] = 0.5;
        let before = net.clone();
        sgd_step(&mut net, &g, 0.0).unwrap();
        assert_eq!(net, before);
        sgd_step(&mut net, &g, 0.1).unwrap();
        assert_eq!(net.layers[0].weights[0], 0.95);

        let mut twice = affine(0.3, 0.1);
        let mut once = twice.clone();
        g.layers[0].biases[0] = -0.25;
        sgd_step(&mut twice, &g, 0.125).unwrap();
        sgd_step(&mut twice, &g, 0.125).unwrap();
        sgd_step(&mut once, &g, 0.25).unwrap();
        assert_eq!(twice, once);

        let wrong = Gradients::zeros_like(&Mlp::init(&[2, 1], 0).unwrap());
        assert!(sgd_step(&mut once, &wrong, 0.1).is_err());
    }

    #[test]
    fn adam_first_step_is_sign() {
        let mut net = Mlp::init(&[2, 3, 1], 5).unwrap();
        let before = net.clone();
        let mut g = Gradients::zeros_like(&net);
        for (k, v) in g.layers.iter_mut().flat_map(|l| l.params_mut()).enumerate() {
            *v = if k % 2 == 0 {
                0.3 + k as f64
            } else {
                -0.02 * (k + 1) as f64
            };
        }
        let mut state = AdamState::new(&net);
        adam_step(&mut net, &g, &mut state, 1e-3, &AdamParams::default()).unwrap();
        for ((a, b), gi) in net
            .layers
            .iter()
            .flat_map(|l| l.params())
            .zip(before.layers.iter().flat_map(|l| l.params()))
            .zip(g.values())
        {
            assert!(((a - b) + 1e-3 * gi.signum()).abs() < 1e-9);
        }
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut net = Mlp::init(&[1, 4, 1], 2).unwrap();
        let before = net.clone();
        let g = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net);
        for _ in 0..5 {
            adam_step(&mut net, &g, &mut state, 1e-2, &AdamParams::default()).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn adam_constant_gradient_trace() {
        // Scalar reference: with constant g the bias-corrected m̂ = g and
        // v̂ = g² at every step, so each update is lr·g/(|g| + ε).
        let (g0, lr, eps) = (0.5, 1e-3, 1e-8);
        let mut reference = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=10 {
            m = 0.9 * m + 0.1 * g0;
            v = 0.999 * v + 0.001 * g0 * g0;
            let m_hat = m / (1.0 - libm::pow(0.9, t as f64));
            let v_hat = v / (1.0 - libm::pow(0.999, t as f64));
            reference -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
        assert!((reference - (1.0 - 10.0 * lr * g0 / (g0 + eps))).abs() < 1e-12);

        let mut net = affine(1.0, 0.0);
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].weights[0] = g0;
        let mut state = AdamState::new(&net);
        for _ in 0..10 {
            adam_step(&mut net, &g, &mut state, lr, &AdamParams::default()).unwrap();
        }
        assert_eq!(net.layers[0].weights[0], reference);
        assert!(state.v.values().all(|v| v >= 0.0));
    }

    #[test]
    fn grad_check_small_nets() {
        let net = Mlp::init(&[1, 10, 1], 17).unwrap();
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![-1.0 + 0.5 * i as f64]).collect();
        let t: Vec<Vec<f64>> = (0..5).map(|i| vec![(i as f64 * 0.9).sin()]).collect();
        let err = grad_check(&net, &x, &t, 1e-6).unwrap();
        assert!(err < 1e-6, "{err}");

        let a = affine(0.4, -0.3);
        let err = grad_check(&a, &x, &t, 1e-6).unwrap();
        assert!(err < 1e-9, "{err}");

        assert!(grad_check(&a, &x, &t, 1e-2).is_err());
    }

    #[test]
    fn grad_check_zero_gradient_batch() {
        let mut net = Mlp::init(&[1, 5, 1], 3).unwrap();
        net.layers
            .iter_mut()
            .for_each(|l| l.weights.iter_mut().for_each(|w| *w = 0.0));
        let x = vec![vec![0.5], vec![-1.0]];
        let t = vec![vec![0.0], vec![0.0]];
        assert_eq!(backward(&net, &x, &t).unwrap().max_abs(), 0.0);
        assert_eq!(grad_check(&net, &x, &t, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn train_zero_epochs_is_identity() {
        let net = Mlp::init(&[1, 3, 1], 0).unwrap();
        let data = ScaledSet {
            inputs: vec![vec![0.0], vec![1.0]],
            targets: vec![vec![0.0], vec![1.0]],
        };
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 0.1,
            batch_size: 2,
            epochs: 0,
            seed: 0,
            adam: AdamParams::default(),
        };
        let (out, hist) = train(net.clone(), &data, None, &cfg).unwrap();
        assert_eq!(out, net);
        assert!(hist.train_mse.is_empty());
    }

    #[test]
    fn train_reports_divergence() {
        let net = affine(1.0, 0.0);
        let data = ScaledSet {
            inputs: vec![vec![100.0], vec![-50.0]],
            targets: vec![vec![1.0], vec![2.0]],
        };
        let cfg = TrainConfig {
            optimizer: Optimizer::Sgd,
            learning_rate: 10.0,
            batch_size: 2,
            epochs: 500,
            seed: 0,
            adam: AdamParams::default(),
        };
        assert!(matches!(
            train(net, &data, None, &cfg),
            Err(MlpError::NanLoss { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 0,
            epochs: 1,
            seed: 0,
            adam: AdamParams::default(),
        };
        assert!(cfg.validate().is_err());
        cfg.batch_size = 4;
        cfg.adam.beta1 = 1.0;
        assert!(cfg.validate().is_err());
        cfg.adam.beta1 = 0.9;
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
    }
}
