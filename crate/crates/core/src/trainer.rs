//! AdamW with a single cosine-annealed learning-rate cycle.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{encode_input, Gradients, LossConfig, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub betas: (f64, f64),
    pub eps: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub loss: LossConfig,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 4e-6,
            weight_decay: 1e-2,
            epochs: 6,
            batch_size: 4,
            betas: (0.9, 0.999),
            eps: 1e-8,
            seed: 0,
            shuffle: true,
            loss: LossConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0.is_finite() && self.lr0 > 0.0) {
            return Err(Error::config("lr0", "must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be >= 0"));
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::config("betas", "must lie in [0, 1)"));
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::config("eps", "must be > 0"));
        }
        self.loss.validate()
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// `0.5·lr0·(1 + cos(π·step/total_steps))`, annealing to zero at the end of the run.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::config(
            "step",
            format!("step {step} outside schedule of {total_steps} steps"),
        ));
    }
    Ok(0.5 * lr0 * (1.0 + (PI * step as f64 / total_steps as f64).cos()))
}

/// First and second moment estimates, one slot per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl AdamWState {
    pub fn new(net: &Mlp) -> Self {
        AdamWState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            t: 0,
        }
    }
}

fn check_finite(grads: &Gradients) -> Result<()> {
    for (kind, set) in [("weight", &grads.weights), ("bias", &grads.biases)] {
        for (layer, g) in set.iter().enumerate() {
            if let Some((index, &value)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    layer,
                    kind,
                    index,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// Constants of one AdamW step for one parameter group.
struct StepRule {
    b1: f64,
    b2: f64,
    eps: f64,
    /// Bias-correction denominators `(1 - β1^t, 1 - β2^t)`.
    c1: f64,
    c2: f64,
    lr: f64,
    decay: f64,
}

impl StepRule {
    fn new(cfg: &TrainConfig, t: u64, lr: f64, decay: f64) -> Self {
        let (b1, b2) = cfg.betas;
        StepRule {
            b1,
            b2,
            eps: cfg.eps,
            c1: 1.0 - b1.powi(t as i32),
            c2: 1.0 - b2.powi(t as i32),
            lr,
            decay,
        }
    }

    #[inline]
    fn apply(&self, p: &mut f64, g: f64, m: &mut f64, v: &mut f64) {
        *m = self.b1 * *m + (1.0 - self.b1) * g;
        *v = self.b2 * *v + (1.0 - self.b2) * g * g;
        let m_hat = *m / self.c1;
        let v_hat = *v / self.c2;
        *p -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.decay * *p);
    }
}

/// AdamW update of a single decayed scalar parameter at step `t` (1-based).
pub fn adamw_scalar(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, t: u64, lr: f64, cfg: &TrainConfig) {
    StepRule::new(cfg, t, lr, cfg.weight_decay).apply(p, g, m, v);
}

/// One decoupled-weight-decay Adam update. Biases are not decayed.
pub fn adamw_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamWState, lr: f64, cfg: &TrainConfig) -> Result<()> {
    check_finite(grads)?;
    state.t += 1;
    let decayed = StepRule::new(cfg, state.t, lr, cfg.weight_decay);
    let plain = StepRule::new(cfg, state.t, lr, 0.0);
    for (k, layer) in net.layers.iter_mut().enumerate() {
        let (m, v) = (&mut state.m.weights[k], &mut state.v.weights[k]);
        for (i, p) in layer.weights.iter_mut().enumerate() {
            decayed.apply(p, grads.weights[k][i], &mut m[i], &mut v[i]);
        }
        let (m, v) = (&mut state.m.biases[k], &mut state.v.biases[k]);
        for (i, p) in layer.bias.iter_mut().enumerate() {
            plain.apply(p, grads.biases[k][i], &mut m[i], &mut v[i]);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub losses: Vec<f64>,
    pub lrs: Vec<f64>,
    pub epochs: Vec<EpochSummary>,
}

impl TrainLog {
    pub fn steps(&self) -> usize {
        self.losses.len()
    }

    /// CSV with header `step,lr,loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,lr,loss\n");
        for (i, (lr, l)) in self.lrs.iter().zip(&self.losses).enumerate() {
            out.push_str(&format!("{i},{lr},{l}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reusable per-sample gradient buffers, so a training step allocates nothing large.
#[derive(Debug, Clone)]
pub struct GradWorkspace {
    per_sample: Vec<Gradients>,
    /// Batch-mean gradient after [`batch_gradients_into`].
    pub total: Gradients,
}

impl GradWorkspace {
    pub fn new(net: &Mlp, batch_size: usize) -> Self {
        GradWorkspace {
            per_sample: vec![Gradients::zeros_like(net); batch_size],
            total: Gradients::zeros_like(net),
        }
    }
}

/// Mean loss over one batch; the mean gradient lands in `ws.total`.
/// Per-sample work may run in parallel; the reduction is in sample order.
pub fn batch_gradients_into(
    net: &Mlp,
    inputs: &[Vec<f64>],
    ds: &Dataset,
    batch: &[usize],
    loss: &LossConfig,
    execution: Execution,
    ws: &mut GradWorkspace,
) -> Result<f64> {
    if ws.per_sample.len() < batch.len() {
        ws.per_sample.resize(batch.len(), Gradients::zeros_like(net));
    }
    let losses = execution.map_mut(&mut ws.per_sample[..batch.len()], |j, g| {
        let i = batch[j];
        net.backward(&inputs[i], &ds.samples[i].gt_future, loss, g)
    });
    ws.total.fill(0.0);
    let mut loss_sum = 0.0;
    for (l, g) in losses.into_iter().zip(&ws.per_sample) {
        loss_sum += l?;
        ws.total.add(g);
    }
    let n = batch.len() as f64;
    ws.total.scale(1.0 / n);
    Ok(loss_sum / n)
}

/// Allocating form of [`batch_gradients_into`].
pub fn batch_gradients(
    net: &Mlp,
    inputs: &[Vec<f64>],
    ds: &Dataset,
    batch: &[usize],
    loss: &LossConfig,
    execution: Execution,
) -> Result<(f64, Gradients)> {
    let mut ws = GradWorkspace::new(net, batch.len());
    let l = batch_gradients_into(net, inputs, ds, batch, loss, execution, &mut ws)?;
    Ok((l, ws.total))
}

/// Trains `net` in place; `(dataset, config, initial net)` fully determine the result.
pub fn train(ds: &Dataset, net: &mut Mlp, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs: Vec<Vec<f64>> = ds.samples.iter().map(|s| encode_input(s, &net.mask)).collect();
    if let Some(x) = inputs.first() {
        if x.len() != net.input_dim() {
            return Err(Error::Dimension {
                context: "train input mask vs network",
                expected: net.input_dim(),
                actual: x.len(),
            });
        }
    }
    let per_epoch = cfg.steps_per_epoch(ds.len());
    let total_steps = cfg.epochs * per_epoch;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut state = AdamWState::new(net);
    let mut ws = GradWorkspace::new(net, cfg.batch_size);
    let mut log = TrainLog::default();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let lr = cosine_lr(step, total_steps, cfg.lr0)?;
            let l = batch_gradients_into(net, &inputs, ds, batch, &cfg.loss, cfg.execution, &mut ws)?;
            adamw_step(net, &ws.total, &mut state, lr, cfg)?;
            log.losses.push(l);
            log.lrs.push(lr);
            epoch_loss += l;
            step += 1;
        }
        log.epochs.push(EpochSummary {
            epoch,
            mean_loss: epoch_loss / per_epoch as f64,
            steps: per_epoch,
        });
    }
    Ok(log)
}
