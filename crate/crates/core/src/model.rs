//! Ego-state MLP planner.
//!
//! `Linear(d_in, 512) - ReLU - Linear(512, 512) - ReLU - Linear(512, 18)`, where
//! the 18 outputs are `(x, y, θ)` for each of the 6 future frames. Inputs are
//! the flattened history poses, velocity, acceleration and the one-hot
//! command, each group switchable through [`InputMask`].
//!
//! Training loss is the mean over waypoints of the per-waypoint L1 distance,
//! with waypoints whose predicted `(x, y)` fall in the same absolute grid cell
//! as the ground truth down-weighted.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EgoSample, Trajectory, FUTURE_FRAMES, HISTORY_FRAMES};

pub const HIDDEN: usize = 512;
pub const OUTPUT_DIM: usize = FUTURE_FRAMES * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputMask {
    pub use_trajectory: bool,
    pub use_velocity: bool,
    pub use_acceleration: bool,
    pub use_command: bool,
}

impl Default for InputMask {
    fn default() -> Self {
        InputMask::full()
    }
}

impl InputMask {
    pub const fn full() -> Self {
        InputMask {
            use_trajectory: true,
            use_velocity: true,
            use_acceleration: true,
            use_command: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        3 * HISTORY_FRAMES * self.use_trajectory as usize
            + 3 * self.use_velocity as usize
            + 3 * self.use_acceleration as usize
            + 3 * self.use_command as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim() == 0 {
            return Err(Error::config("input_mask", "at least one input group must be enabled"));
        }
        Ok(())
    }

    fn to_bits(self) -> u8 {
        self.use_trajectory as u8
            | (self.use_velocity as u8) << 1
            | (self.use_acceleration as u8) << 2
            | (self.use_command as u8) << 3
    }

    fn from_bits(bits: u8) -> Option<Self> {
        (bits < 16).then_some(InputMask {
            use_trajectory: bits & 1 != 0,
            use_velocity: bits & 2 != 0,
            use_acceleration: bits & 4 != 0,
            use_command: bits & 8 != 0,
        })
    }
}

/// Input vector in fixed group order: history, velocity, acceleration, command.
pub fn encode_input(sample: &EgoSample, mask: &InputMask) -> Vec<f64> {
    let mut x = Vec::with_capacity(mask.input_dim());
    if mask.use_trajectory {
        for p in &sample.history.waypoints {
            x.extend([p.x, p.y, p.theta]);
        }
    }
    if mask.use_velocity {
        x.extend(sample.kinematics.velocity());
    }
    if mask.use_acceleration {
        x.extend(sample.kinematics.acceleration());
    }
    if mask.use_command {
        x.extend(sample.command.one_hot());
    }
    x
}

/// Fully connected layer, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in self.weights.chunks_exact(self.in_dim).enumerate() {
            out[o] += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub mask: InputMask,
    pub seed: u64,
}

/// Parameter gradients matching an [`Mlp`]'s layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|v| v.fill(value));
    }

    /// `self += other`.
    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self
            .weights
            .iter_mut()
            .zip(&other.weights)
            .chain(self.biases.iter_mut().zip(&other.biases))
        {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .for_each(|v| v.iter_mut().for_each(|x| *x *= k));
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Per-layer outputs of a forward pass (post-ReLU for hidden layers).
#[derive(Debug, Clone, Default)]
pub struct Activations {
    outputs: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn hidden(&self, layer: usize) -> &[f64] {
        &self.outputs[layer]
    }
}

impl Mlp {
    /// The planner network `[d_in, 512, 512, 18]` for `mask`.
    pub fn planner(mask: InputMask, seed: u64) -> Result<Self> {
        Mlp::init(&[mask.input_dim(), HIDDEN, HIDDEN, OUTPUT_DIM], mask, seed)
    }

    /// Weights uniform in `[-1/√fan_in, 1/√fan_in]`, biases zero.
    pub fn init(sizes: &[usize], mask: InputMask, seed: u64) -> Result<Self> {
        mask.validate()?;
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(
                "sizes",
                format!("need at least two positive sizes, got {sizes:?}"),
            ));
        }
        if sizes[0] != mask.input_dim() {
            return Err(Error::Dimension {
                context: "network input size vs input mask",
                expected: mask.input_dim(),
                actual: sizes[0],
            });
        }
        if *sizes.last().unwrap() != OUTPUT_DIM {
            return Err(Error::Dimension {
                context: "network output size",
                expected: OUTPUT_DIM,
                actual: *sizes.last().unwrap(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Dense {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights: (0..fan_in * fan_out)
                        .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
                        .collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Mlp { layers, mask, seed })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.out_dim));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer's output for backpropagation.
    pub fn forward_cached(&self, x: &[f64], acts: &mut Activations) -> Result<()> {
        self.check_input(x)?;
        acts.outputs.resize_with(self.layers.len(), Vec::new);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.outputs.split_at_mut(k);
            let input = if k == 0 { x } else { &done[k - 1] };
            let out = &mut rest[0];
            layer.forward(input, out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(())
    }

    /// Raw 18-value output.
    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut acts = Activations::default();
        self.forward_cached(x, &mut acts)?;
        Ok(acts.outputs.pop().unwrap_or_default())
    }

    /// Planned future trajectory (headings wrapped).
    pub fn forward(&self, x: &[f64]) -> Result<Trajectory> {
        Ok(Trajectory::from_flat(&self.forward_raw(x)?))
    }

    pub fn predict(&self, sample: &EgoSample) -> Result<Trajectory> {
        self.forward(&encode_input(sample, &self.mask))
    }

    /// Loss and gradients for one sample; `grads` is overwritten.
    pub fn backward(&self, x: &[f64], gt: &Trajectory, cfg: &LossConfig, grads: &mut Gradients) -> Result<f64> {
        let mut acts = Activations::default();
        self.forward_cached(x, &mut acts)?;
        let gt_flat = target_flat(gt)?;
        let weights = coincidence_weights(acts.output(), &gt_flat, cfg);
        self.backward_from(x, &acts, &gt_flat, &weights, grads)?;
        Ok(weighted_l1(acts.output(), &gt_flat, &weights))
    }

    /// Backpropagates the weighted L1 loss with per-waypoint `weights` held
    /// constant. The L1 subgradient at zero is zero.
    pub fn backward_from(
        &self,
        x: &[f64],
        acts: &Activations,
        gt_flat: &[f64],
        weights: &[f64; FUTURE_FRAMES],
        grads: &mut Gradients,
    ) -> Result<()> {
        self.check_input(x)?;
        let out = acts.output();
        if out.len() != OUTPUT_DIM || gt_flat.len() != OUTPUT_DIM {
            return Err(Error::Dimension {
                context: "backward output",
                expected: OUTPUT_DIM,
                actual: out.len().min(gt_flat.len()),
            });
        }
        let scale = 1.0 / FUTURE_FRAMES as f64;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(gt_flat)
            .enumerate()
            .map(|(i, (p, g))| {
                let d = p - g;
                let sign = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                weights[i / 3] * sign * scale
            })
            .collect();

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input: &[f64] = if k == 0 { x } else { &acts.outputs[k - 1] };
            let gw = &mut grads.weights[k];
            for (o, d) in delta.iter().enumerate() {
                let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                if *d == 0.0 {
                    row.fill(0.0);
                } else {
                    row.iter_mut().zip(input).for_each(|(g, v)| *g = d * v);
                }
            }
            grads.biases[k].copy_from_slice(&delta);
            if k == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.in_dim];
            for (o, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += w * d);
                }
            }
            // ReLU: gradient passes only where the unit was active.
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(())
    }

    /// Visits every parameter alongside its gradient: `(layer, is_bias, param, grad)`.
    pub fn for_each_param_mut(&mut self, grads: &Gradients, mut f: impl FnMut(usize, bool, &mut f64, f64)) {
        for (k, layer) in self.layers.iter_mut().enumerate() {
            for (p, g) in layer.weights.iter_mut().zip(&grads.weights[k]) {
                f(k, false, p, *g);
            }
            for (p, g) in layer.bias.iter_mut().zip(&grads.biases[k]) {
                f(k, true, p, *g);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Cell size (m) for the coincidence test.
    pub grid_size: f64,
    /// Weight applied to waypoints in the same cell as the ground truth.
    pub coincident_weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            grid_size: 0.5,
            coincident_weight: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_size.is_finite() && self.grid_size > 0.0) {
            return Err(Error::config("grid_size", "must be > 0"));
        }
        if !(self.coincident_weight > 0.0 && self.coincident_weight <= 1.0) {
            return Err(Error::config("coincident_weight", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub weights: [f64; FUTURE_FRAMES],
}

fn target_flat(gt: &Trajectory) -> Result<Vec<f64>> {
    if gt.len() != FUTURE_FRAMES {
        return Err(Error::Dimension {
            context: "loss ground-truth waypoints",
            expected: FUTURE_FRAMES,
            actual: gt.len(),
        });
    }
    Ok(gt.to_flat())
}

/// Per-waypoint weights: `coincident_weight` when prediction and ground truth
/// share the absolute cell `floor(x/g), floor(y/g)`, else 1.
pub fn coincidence_weights(pred_flat: &[f64], gt_flat: &[f64], cfg: &LossConfig) -> [f64; FUTURE_FRAMES] {
    let g = cfg.grid_size;
    let mut w = [1.0; FUTURE_FRAMES];
    for (i, wi) in w.iter_mut().enumerate() {
        let (px, py) = (pred_flat[3 * i], pred_flat[3 * i + 1]);
        let (gx, gy) = (gt_flat[3 * i], gt_flat[3 * i + 1]);
        if (px / g).floor() == (gx / g).floor() && (py / g).floor() == (gy / g).floor() {
            *wi = cfg.coincident_weight;
        }
    }
    w
}

/// `(1/N_f) Σ_i w_i ‖pred_i − gt_i‖₁` over `(x, y, θ)` of each waypoint.
pub fn weighted_l1(pred_flat: &[f64], gt_flat: &[f64], weights: &[f64; FUTURE_FRAMES]) -> f64 {
    pred_flat
        .chunks_exact(3)
        .zip(gt_flat.chunks_exact(3))
        .zip(weights)
        .map(|((p, g), w)| w * p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum::<f64>()
        / FUTURE_FRAMES as f64
}

/// Loss on a raw network output.
pub fn loss_raw(pred_flat: &[f64], gt: &Trajectory, cfg: &LossConfig) -> Result<LossOutput> {
    let gt_flat = target_flat(gt)?;
    if pred_flat.len() != OUTPUT_DIM {
        return Err(Error::Dimension {
            context: "loss prediction values",
            expected: OUTPUT_DIM,
            actual: pred_flat.len(),
        });
    }
    let weights = coincidence_weights(pred_flat, &gt_flat, cfg);
    Ok(LossOutput {
        loss: weighted_l1(pred_flat, &gt_flat, &weights),
        weights,
    })
}

pub fn loss(pred: &Trajectory, gt: &Trajectory, cfg: &LossConfig) -> Result<LossOutput> {
    if pred.len() != FUTURE_FRAMES {
        return Err(Error::Dimension {
            context: "loss predicted waypoints",
            expected: FUTURE_FRAMES,
            actual: pred.len(),
        });
    }
    loss_raw(&pred.to_flat(), gt, cfg)
}

// Checkpoint layout (all integers and floats little-endian):
//   magic    8 bytes  "OLMLPCK\0"
//   version  u32      1
//   mask     u32      bit0 trajectory, bit1 velocity, bit2 acceleration, bit3 command
//   seed     u64
//   n_sizes  u32, then n_sizes × u32 layer sizes
//   per layer: out×in f64 weights (row-major), then out f64 biases
const MAGIC: &[u8; 8] = b"OLMLPCK\0";
const VERSION: u32 = 1;

impl Mlp {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.sizes();
        let mut buf = Vec::with_capacity(32 + 4 * sizes.len() + 8 * self.num_params());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.mask.to_bits() as u32).to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let bits = r.u32()?;
        let mask = u8::try_from(bits)
            .ok()
            .and_then(InputMask::from_bits)
            .ok_or_else(|| format!("bad input mask bits {bits}"))?;
        let seed = r.u64()?;
        let n = r.u32()? as usize;
        if !(2..=64).contains(&n) {
            return Err(format!("bad layer count {n}"));
        }
        let sizes = (0..n)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if sizes[0] != mask.input_dim() || sizes[n - 1] != OUTPUT_DIM || sizes.contains(&0) {
            return Err(format!(
                "sizes {sizes:?} inconsistent with mask (d_in {})",
                mask.input_dim()
            ));
        }
        let mut layers = Vec::with_capacity(n - 1);
        for w in sizes.windows(2) {
            let (i, o) = (w[0], w[1]);
            let weights = (0..i * o).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            let bias = (0..o).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            layers.push(Dense {
                in_dim: i,
                out_dim: o,
                weights,
                bias,
            });
        }
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Mlp { layers, mask, seed })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Mlp::from_bytes(&bytes).map_err(|reason| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or("truncated")?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
