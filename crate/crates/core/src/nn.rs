//! From-scratch feedforward network: tanh hidden layers, softmax output,
//! cross-entropy loss, analytic backpropagation, and two batch trainers
//! (Møller's scaled conjugate gradient, plain minibatch gradient descent).

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::channel::SubcarrierObservation;
use crate::modem::PROB_FLOOR;
use crate::rng::RandomSource;
use crate::{Error, Result};

/// Optional fixed affine transform applied to inputs before layer 1,
/// x' = (x - shift) * scale. Recorded in the model file when present.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaler {
    /// Standardize each column to zero mean and unit variance. Columns with
    /// (near-)zero spread keep their scale at 1 so constants pass through.
    pub fn fit(inputs: ArrayView2<'_, f64>) -> InputScaler {
        let n = inputs.nrows().max(1) as f64;
        let shift: Vec<f64> = inputs.columns().into_iter().map(|c| c.sum() / n).collect();
        let scale = inputs
            .columns()
            .into_iter()
            .zip(&shift)
            .map(|(c, &m)| {
                let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                if var.sqrt() > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        InputScaler { shift, scale }
    }
}

/// Feedforward net. `weights[l]` has shape (d_l + 1, d_{l+1}); row 0 holds
/// the biases (the bias activation a_0 is fixed to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNet {
    layer_dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    input_scaler: Option<InputScaler>,
}

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Uniform(-r, r) with r = 1 / sqrt(fan-in). Default.
    SymmetricUniform,
    /// Uniform(0, 1) on every weight and bias.
    Uniform01,
}

/// Batch training algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Scg,
    Gd,
}

/// Training-run knobs. `epochs` counts SCG iterations or GD epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub epochs: usize,
    /// GD learning rate; unused by SCG.
    pub learning_rate: f64,
    /// GD minibatch size; SCG is always full-batch.
    pub batch_size: usize,
    pub seed: u64,
    /// Fraction of records held out for early stopping (0 disables).
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Stop when the full-batch gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::Scg,
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 128,
            seed: 0,
            validation_fraction: 0.1,
            patience: 20,
            grad_tol: 1e-6,
        }
    }
}

/// Supervised set of (input vector, target class index) records.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub inputs: Array2<f64>,
    pub targets: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Summary of one training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub initial_ce: f64,
    pub final_ce: f64,
    pub validation_ce: Option<f64>,
    pub epochs_run: usize,
    pub grad_norm: f64,
}

/// All per-layer activations of one forward pass; `activations[0]` is the
/// (scaled) input and the last entry is the output PMF.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Array1<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array1<f64> {
        self.activations.last().unwrap()
    }
}

impl NeuralNet {
    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn input_scaler(&self) -> Option<&InputScaler> {
        self.input_scaler.as_ref()
    }

    pub fn set_input_scaler(&mut self, scaler: Option<InputScaler>) {
        self.input_scaler = scaler;
    }

    fn scaled_input(&self, input: &[f64]) -> Result<Array1<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::NetInput { expected: self.input_dim(), got: input.len() });
        }
        let mut a = Array1::from_iter(input.iter().cloned());
        if let Some(s) = &self.input_scaler {
            for (i, v) in a.iter_mut().enumerate() {
                *v = (*v - s.shift[i]) * s.scale[i];
            }
        }
        Ok(a)
    }

    /// Forward pass keeping every layer's activations.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        let mut activations = Vec::with_capacity(self.layer_dims.len());
        activations.push(self.scaled_input(input)?);
        let last = self.weights.len() - 1;
        for (l, w) in self.weights.iter().enumerate() {
            let prev = activations.last().unwrap();
            // x_j = w_0j + sum_i a_i w_ij
            let mut x: Array1<f64> = w.row(0).to_owned();
            for (i, &a) in prev.iter().enumerate() {
                x.scaled_add(a, &w.row(i + 1));
            }
            let a = if l == last { softmax(&x) } else { x.mapv(f64::tanh) };
            activations.push(a);
        }
        Ok(ForwardPass { activations })
    }

    /// Forward pass returning only the output PMF.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output().to_vec())
    }
}

fn softmax(x: &Array1<f64>) -> Array1<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = x.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e.mapv_inplace(|v| v / sum);
    e
}

/// Initialize a network of the given layer sizes.
pub fn init_network<R: Rng>(layer_dims: &[usize], scheme: InitScheme, rng: &mut R) -> NeuralNet {
    assert!(layer_dims.len() >= 2, "need at least input and output layers");
    assert!(layer_dims.iter().all(|&d| d > 0), "layer sizes must be positive");
    let weights = layer_dims
        .windows(2)
        .map(|w| {
            let (d_in, d_out) = (w[0], w[1]);
            let mut m = Array2::zeros((d_in + 1, d_out));
            let r = 1.0 / (d_in as f64).sqrt();
            for v in m.iter_mut() {
                *v = match scheme {
                    InitScheme::SymmetricUniform => rng.random_range(-r..r),
                    InitScheme::Uniform01 => rng.random_range(0.0..1.0),
                };
            }
            m
        })
        .collect();
    NeuralNet { layer_dims: layer_dims.to_vec(), weights, input_scaler: None }
}

/// Cross-entropy of one output PMF against a one-hot target: -log p[target].
pub fn cross_entropy(output: &[f64], target: usize) -> f64 {
    -output[target].max(PROB_FLOOR).ln()
}

/// Analytic gradients of the cross-entropy loss for a single record,
/// layer-aligned with `net.weights()`.
pub fn backprop(net: &NeuralNet, input: &[f64], target: usize) -> Result<Vec<Array2<f64>>> {
    let pass = net.forward(input)?;
    let acts = &pass.activations;
    let layers = net.weights.len();

    // Output delta: softmax + cross-entropy collapse to (p - onehot).
    let mut delta = acts[layers].to_owned();
    delta[target] -= 1.0;

    let mut grads: Vec<Array2<f64>> = Vec::with_capacity(layers);
    for l in (0..layers).rev() {
        let prev = &acts[l];
        let mut g = Array2::zeros((prev.len() + 1, delta.len()));
        for (j, &d) in delta.iter().enumerate() {
            g[(0, j)] = d;
            for (i, &a) in prev.iter().enumerate() {
                g[(i + 1, j)] = a * d;
            }
        }
        grads.push(g);
        if l > 0 {
            // delta_i = tanh'(x_i) * sum_j w_ij delta_j, tanh' = 1 - a^2.
            let w = &net.weights[l];
            let mut next = Array1::zeros(prev.len());
            for i in 0..prev.len() {
                let mut s = 0.0;
                for (j, &d) in delta.iter().enumerate() {
                    s += w[(i + 1, j)] * d;
                }
                next[i] = s * (1.0 - prev[i] * prev[i]);
            }
            delta = next;
        }
    }
    grads.reverse();
    Ok(grads)
}

/// One gradient-descent step: w <- w - eta * grad.
pub fn gd_step(net: &mut NeuralNet, grads: &[Array2<f64>], eta: f64) {
    for (w, g) in net.weights.iter_mut().zip(grads) {
        w.scaled_add(-eta, g);
    }
}

// --- batched full-set evaluation -----------------------------------------

struct BatchView<'a> {
    inputs: ArrayView2<'a, f64>,
    targets: &'a [usize],
}

fn apply_scaler(net: &NeuralNet, inputs: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut a = inputs.to_owned();
    if let Some(s) = &net.input_scaler {
        for mut row in a.rows_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = (*v - s.shift[i]) * s.scale[i];
            }
        }
    }
    a
}

fn augment(a: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = a.dim();
    let mut out = Array2::ones((rows, cols + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(a);
    out
}

/// Mean cross-entropy over the batch.
fn batch_ce(net: &NeuralNet, batch: &BatchView) -> f64 {
    let mut a = apply_scaler(net, batch.inputs);
    let last = net.weights.len() - 1;
    for (l, w) in net.weights.iter().enumerate() {
        let x = augment(&a).dot(w);
        a = if l == last { softmax_rows(x) } else { x.mapv_into(f64::tanh) };
    }
    let mut loss = 0.0;
    for (b, &t) in batch.targets.iter().enumerate() {
        loss -= a[(b, t)].max(PROB_FLOOR).ln();
    }
    loss / batch.targets.len() as f64
}

fn softmax_rows(mut x: Array2<f64>) -> Array2<f64> {
    for mut row in x.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    x
}

/// Mean cross-entropy and its gradient over the batch, flattened.
fn batch_ce_grad(net: &NeuralNet, batch: &BatchView) -> (f64, Vec<Array2<f64>>) {
    let layers = net.weights.len();
    let mut augs: Vec<Array2<f64>> = Vec::with_capacity(layers);
    let mut a = apply_scaler(net, batch.inputs);
    for (l, w) in net.weights.iter().enumerate() {
        let aug = augment(&a);
        let x = aug.dot(w);
        augs.push(aug);
        a = if l == layers - 1 { softmax_rows(x) } else { x.mapv_into(f64::tanh) };
    }
    let b = batch.targets.len() as f64;
    let mut loss = 0.0;
    for (row, &t) in batch.targets.iter().enumerate() {
        loss -= a[(row, t)].max(PROB_FLOOR).ln();
    }
    loss /= b;

    // delta at output: (p - onehot) / B
    let mut delta = a;
    for (row, &t) in batch.targets.iter().enumerate() {
        delta[(row, t)] -= 1.0;
    }
    delta.mapv_inplace(|v| v / b);

    let mut grads: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); layers];
    for l in (0..layers).rev() {
        grads[l] = augs[l].t().dot(&delta);
        if l > 0 {
            let w_no_bias = net.weights[l].slice(ndarray::s![1.., ..]);
            let back = delta.dot(&w_no_bias.t());
            let hidden = augs[l].slice(ndarray::s![.., 1..]);
            delta = &back * &hidden.mapv(|v| 1.0 - v * v);
        }
    }
    (loss, grads)
}

fn flatten(grads: &[Array2<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grads.iter().map(|g| g.len()).sum());
    for g in grads {
        out.extend(g.iter());
    }
    out
}

fn set_params(net: &mut NeuralNet, flat: &[f64]) {
    let mut off = 0;
    for w in &mut net.weights {
        let len = w.len();
        for (dst, src) in w.iter_mut().zip(&flat[off..off + len]) {
            *dst = *src;
        }
        off += len;
    }
    debug_assert_eq!(off, flat.len());
}

fn get_params(net: &NeuralNet) -> Vec<f64> {
    flatten(&net.weights)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Split off a seeded validation subset; returns (train, validation).
fn split_validation(
    set: &TrainingSet,
    fraction: f64,
    seed: u64,
) -> (TrainingSet, Option<TrainingSet>) {
    let n = set.len();
    let n_val = ((n as f64) * fraction).floor() as usize;
    if n_val == 0 || n_val >= n {
        return (set.clone(), None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RandomSource::new(seed).stream("validation-split");
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let pick = |idx: &[usize]| TrainingSet {
        inputs: ndarray::stack(
            Axis(0),
            &idx.iter().map(|&i| set.inputs.row(i)).collect::<Vec<_>>(),
        )
        .unwrap(),
        targets: idx.iter().map(|&i| set.targets[i]).collect(),
    };
    let val = pick(&order[..n_val]);
    let train = pick(&order[n_val..]);
    (train, Some(val))
}

/// Train with the configured optimizer. SCG is full-batch; GD uses seeded
/// shuffled minibatches. Both stop early on a stalled validation loss and
/// restore the best-validation weights.
pub fn train(net: &mut NeuralNet, set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if set.inputs.ncols() != net.input_dim() {
        return Err(Error::NetInput { expected: net.input_dim(), got: set.inputs.ncols() });
    }
    if let Some(&t) = set.targets.iter().max() {
        if t >= net.output_dim() {
            return Err(Error::Config(format!(
                "target class {t} outside output layer of size {}",
                net.output_dim()
            )));
        }
    }
    match cfg.optimizer {
        Optimizer::Scg => scg_train(net, set, cfg),
        Optimizer::Gd => gd_train(net, set, cfg),
    }
}

/// Møller's scaled conjugate gradient on the full-batch cross-entropy.
pub fn scg_train(net: &mut NeuralNet, set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    let (train_set, val_set) = split_validation(set, cfg.validation_fraction, cfg.seed);
    let tb = BatchView { inputs: train_set.inputs.view(), targets: &train_set.targets };

    let mut w = get_params(net);
    let dim = w.len();
    let (e0, g0) = batch_ce_grad(net, &tb);
    let initial_ce = e0;
    if !e0.is_finite() {
        return Err(Error::TrainingDiverged(0));
    }

    let eval_grad = |net: &mut NeuralNet, w: &[f64]| -> Vec<f64> {
        set_params(net, w);
        flatten(&batch_ce_grad(net, &tb).1)
    };
    let eval_loss = |net: &mut NeuralNet, w: &[f64]| -> f64 {
        set_params(net, w);
        batch_ce(net, &tb)
    };
    let eval_val = |net: &mut NeuralNet, w: &[f64], vs: &TrainingSet| -> f64 {
        set_params(net, w);
        batch_ce(net, &BatchView { inputs: vs.inputs.view(), targets: &vs.targets })
    };

    let sigma0 = 1e-4;
    let mut lambda = 1e-6f64;
    let mut lambda_bar = 0.0f64;
    let mut e = e0;
    let mut g: Vec<f64> = flatten(&g0);
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut success = true;
    let mut delta = 0.0f64;
    let mut s: Vec<f64> = vec![0.0; dim];

    let mut best_val = f64::INFINITY;
    let mut best_w: Option<Vec<f64>> = None;
    let mut stall = 0usize;
    let mut epochs_run = 0usize;

    for k in 1..=cfg.epochs.max(1) {
        epochs_run = k;
        let p_norm2 = norm2(&p);
        if p_norm2 == 0.0 {
            break;
        }
        if success {
            let sigma = sigma0 / p_norm2.sqrt();
            let w_probe: Vec<f64> = w.iter().zip(&p).map(|(wi, pi)| wi + sigma * pi).collect();
            let g_probe = eval_grad(net, &w_probe);
            for i in 0..dim {
                s[i] = (g_probe[i] - g[i]) / sigma;
            }
            delta = dot(&p, &s);
        }
        delta += (lambda - lambda_bar) * p_norm2;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p_norm2);
            delta = -delta + lambda * p_norm2;
            lambda = lambda_bar;
        }
        let mu = dot(&p, &r);
        let alpha = mu / delta;
        let w_new: Vec<f64> = w.iter().zip(&p).map(|(wi, pi)| wi + alpha * pi).collect();
        let e_new = eval_loss(net, &w_new);
        let comparison = if e_new.is_finite() {
            2.0 * delta * (e - e_new) / (mu * mu)
        } else {
            -1.0
        };

        if comparison >= 0.0 {
            w = w_new;
            e = e_new;
            let g_new = eval_grad(net, &w);
            let r_new: Vec<f64> = g_new.iter().map(|v| -v).collect();
            lambda_bar = 0.0;
            success = true;
            if k % dim == 0 {
                p = r_new.clone();
            } else {
                let beta = (norm2(&r_new) - dot(&r_new, &r)) / mu;
                for i in 0..dim {
                    p[i] = r_new[i] + beta * p[i];
                }
            }
            r = r_new;
            g = g_new;
            if comparison >= 0.75 {
                lambda *= 0.25;
            }

            if let Some(vs) = &val_set {
                let vce = eval_val(net, &w, vs);
                if vce < best_val - 1e-12 {
                    best_val = vce;
                    best_w = Some(w.clone());
                    stall = 0;
                } else {
                    stall += 1;
                    if stall >= cfg.patience {
                        break;
                    }
                }
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < 0.25 {
            lambda += delta * (1.0 - comparison) / p_norm2;
        }
        lambda = lambda.min(1e100);
        if !e.is_finite() {
            return Err(Error::TrainingDiverged(k));
        }
        if norm2(&r).sqrt() < cfg.grad_tol {
            break;
        }
    }

    if let Some(bw) = best_w {
        w = bw;
    }
    set_params(net, &w);
    let final_ce = batch_ce(net, &tb);
    let validation_ce = val_set.as_ref().map(|vs| eval_val(net, &w, vs));
    set_params(net, &w);
    let grad_norm = norm2(&flatten(&batch_ce_grad(net, &tb).1)).sqrt();
    Ok(TrainReport { initial_ce, final_ce, validation_ce, epochs_run, grad_norm })
}

/// Plain minibatch gradient descent with seeded shuffling.
pub fn gd_train(net: &mut NeuralNet, set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    let (train_set, val_set) = split_validation(set, cfg.validation_fraction, cfg.seed);
    let tb = BatchView { inputs: train_set.inputs.view(), targets: &train_set.targets };
    let initial_ce = batch_ce(net, &tb);
    let n = train_set.len();
    let bs = cfg.batch_size.clamp(1, n);

    let mut best_val = f64::INFINITY;
    let mut best_w: Option<Vec<f64>> = None;
    let mut stall = 0usize;
    let mut epochs_run = 0usize;
    let src = RandomSource::new(cfg.seed);

    for epoch in 1..=cfg.epochs.max(1) {
        epochs_run = epoch;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = src.indexed_stream("gd-shuffle", epoch as u64);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(bs) {
            let inputs = ndarray::stack(
                Axis(0),
                &chunk.iter().map(|&i| train_set.inputs.row(i)).collect::<Vec<_>>(),
            )
            .unwrap();
            let targets: Vec<usize> = chunk.iter().map(|&i| train_set.targets[i]).collect();
            let (loss, grads) =
                batch_ce_grad(net, &BatchView { inputs: inputs.view(), targets: &targets });
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged(epoch));
            }
            gd_step(net, &grads, cfg.learning_rate);
        }
        if let Some(vs) = &val_set {
            let vce = batch_ce(net, &BatchView { inputs: vs.inputs.view(), targets: &vs.targets });
            if vce < best_val - 1e-12 {
                best_val = vce;
                best_w = Some(get_params(net));
                stall = 0;
            } else {
                stall += 1;
                if stall >= cfg.patience {
                    break;
                }
            }
        }
    }
    if let Some(bw) = best_w {
        set_params(net, &bw);
    }
    let final_ce = batch_ce(net, &tb);
    let validation_ce = val_set
        .as_ref()
        .map(|vs| batch_ce(net, &BatchView { inputs: vs.inputs.view(), targets: &vs.targets }));
    let grad_norm = norm2(&flatten(&batch_ce_grad(net, &tb).1)).sqrt();
    Ok(TrainReport { initial_ce, final_ce, validation_ce, epochs_run, grad_norm })
}

/// Likelihood vector p(y | s_j) for one observation. The softmax posterior
/// doubles as the likelihood up to a constant because training symbols are
/// equiprobable, and every downstream LLR is invariant to that constant.
/// Networks whose input layer is wider than 3 consume the observation's
/// prior PMF as extra inputs and require it to be present.
pub fn infer_likelihoods(net: &NeuralNet, obs: &SubcarrierObservation) -> Result<Vec<f64>> {
    let d0 = net.input_dim();
    let mut input = Vec::with_capacity(d0);
    input.extend_from_slice(&[obs.y.re, obs.y.im, obs.sigma_n2]);
    if d0 > 3 {
        let prior = obs.prior.as_ref().ok_or(Error::MissingPrior)?;
        if prior.0.len() != d0 - 3 {
            return Err(Error::NetInput { expected: d0, got: 3 + prior.0.len() });
        }
        input.extend_from_slice(&prior.0);
    }
    net.infer(&input)
}

// --- model file format ----------------------------------------------------

const MODEL_MAGIC: &[u8; 8] = b"DCOSIMNN";
const MODEL_VERSION: u32 = 1;

/// Serialize: magic, version, layer count, layer dims, optional input
/// scaler, then per-layer row-major weight blocks (little-endian f64).
pub fn save_model(net: &NeuralNet, path: &std::path::Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.layer_dims.len() as u32).to_le_bytes());
    for &d in &net.layer_dims {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match &net.input_scaler {
        None => buf.push(0),
        Some(s) => {
            buf.push(1);
            for v in s.shift.iter().chain(&s.scale) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for w in &net.weights {
        for v in w.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

/// Load a model written by [`save_model`].
pub fn load_model(path: &std::path::Path) -> Result<NeuralNet> {
    let buf = std::fs::read(path)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > buf.len() {
            return Err(Error::Model(format!(
                "truncated file: wanted {n} bytes at offset {off}, file has {}",
                buf.len()
            )));
        }
        let s = &buf[*off..*off + n];
        *off += n;
        Ok(s)
    };
    let magic = take(&mut off, 8)?;
    if magic != MODEL_MAGIC {
        return Err(Error::Model("bad magic; not a model file".into()));
    }
    let version = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::Model(format!(
            "unsupported version {version}, this build reads version {MODEL_VERSION}"
        )));
    }
    let n_layers = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
    if n_layers < 2 || n_layers > 64 {
        return Err(Error::Model(format!("implausible layer count {n_layers}")));
    }
    let mut layer_dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let d = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
        if d == 0 {
            return Err(Error::Model("zero-sized layer".into()));
        }
        layer_dims.push(d);
    }
    let read_f64 = |off: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(off, 8)?.try_into().unwrap()))
    };
    let scaler_flag = take(&mut off, 1)?[0];
    let input_scaler = match scaler_flag {
        0 => None,
        1 => {
            let d0 = layer_dims[0];
            let mut shift = Vec::with_capacity(d0);
            let mut scale = Vec::with_capacity(d0);
            for _ in 0..d0 {
                shift.push(read_f64(&mut off)?);
            }
            for _ in 0..d0 {
                scale.push(read_f64(&mut off)?);
            }
            Some(InputScaler { shift, scale })
        }
        other => return Err(Error::Model(format!("bad scaler flag {other}"))),
    };
    let mut weights = Vec::with_capacity(n_layers - 1);
    for w in layer_dims.windows(2) {
        let (d_in, d_out) = (w[0], w[1]);
        let mut m = Array2::zeros((d_in + 1, d_out));
        for v in m.iter_mut() {
            *v = read_f64(&mut off)?;
        }
        weights.push(m);
    }
    if off != buf.len() {
        return Err(Error::Model(format!("{} trailing bytes after weights", buf.len() - off)));
    }
    Ok(NeuralNet { layer_dims, weights, input_scaler })
}
