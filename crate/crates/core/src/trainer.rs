//! Gradient training of tied networks.
//!
//! Gradients are computed per block on the realized dense matrices and then
//! summed into the free parameters through each block's sharing pattern, so
//! every update keeps the tying intact. All randomness derives from the
//! configured seed; evaluation is single-threaded in a fixed order, which
//! makes runs bitwise reproducible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::Network;
use crate::perm_group::Permutation;
use crate::scalar::Real;
use crate::targets::Target;

/// Largest evaluation grid accepted by [`grid_sup_error`].
pub const GRID_POINT_CAP: usize = 1_000_000;

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DATA: u64 = 2;
const STREAM_PROBE: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub min_learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// SGD momentum.
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop once the grid sup-error reaches this value.
    pub target_sup_error: Option<f64>,
    /// Stop after this many evaluations without improvement.
    pub patience: Option<usize>,
    /// Evaluate the grid sup-error every this many epochs (and at the end).
    pub eval_every: usize,
    /// Random inputs used for the equivariance residual column.
    pub residual_inputs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-2,
            lr_decay: 1.0,
            min_learning_rate: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
            batch_size: 64,
            max_epochs: 100,
            seed: 0,
            target_sup_error: None,
            patience: None,
            eval_every: 1,
            residual_inputs: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch size and evaluation period must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("Adam constants out of range");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.patience == Some(0) {
            return bad("patience must be positive");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Sampling {
    Uniform { samples: usize },
    Grid { points_per_axis: usize },
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub target: String,
    pub sampling: Sampling,
    pub degree: usize,
    pub domain: [f64; 2],
    pub seed: u64,
    /// Set when every input's orbit images were appended.
    pub orbit_closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    descriptor: DatasetDescriptor,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, descriptor: DatasetDescriptor) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::SizeMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        let [lo, hi] = descriptor.domain;
        for x in &inputs {
            if x.len() != descriptor.degree {
                return Err(Error::SizeMismatch {
                    expected: descriptor.degree,
                    found: x.len(),
                });
            }
            if x.iter().any(|v| !v.is_finite() || *v < lo || *v > hi) {
                return Err(Error::Config(format!("input {x:?} lies outside [{lo}, {hi}]^n")));
            }
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset target".into()));
        }
        Ok(Self {
            inputs,
            targets,
            descriptor,
        })
    }

    /// Samples `target` on `[lo, hi]ⁿ`.
    pub fn sample(target: Target, degree: usize, domain: [f64; 2], sampling: Sampling, seed: u64) -> Result<Self> {
        let inputs = match sampling {
            Sampling::Uniform { samples } => {
                let mut r = rng(seed, STREAM_DATA);
                (0..samples)
                    .map(|_| (0..degree).map(|_| r.random_range(domain[0]..=domain[1])).collect())
                    .collect()
            }
            Sampling::Grid { points_per_axis } => GridSpec {
                points_per_axis,
                lo: domain[0],
                hi: domain[1],
            }
            .points(degree)?,
        };
        let targets = inputs.iter().map(|x: &Vec<f64>| target.eval(x)).collect();
        Self::new(
            inputs,
            targets,
            DatasetDescriptor {
                target: target.name().into(),
                sampling,
                degree,
                domain,
                seed,
                orbit_closed: false,
            },
        )
    }

    /// Appends `σ·x` with the matching transformed target for every input
    /// and every element, skipping exact duplicates.
    pub fn close_under(&mut self, elements: &[Permutation], equivariant: bool) -> Result<()> {
        let mut seen: std::collections::HashSet<Vec<u64>> =
            self.inputs.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            for s in elements {
                let sx = s.act_on_slice(x)?;
                if seen.insert(sx.iter().map(|v| v.to_bits()).collect()) {
                    ys.push(if equivariant { s.act_on_slice(y)? } else { y.clone() });
                    xs.push(sx);
                }
            }
        }
        self.inputs.extend(xs);
        self.targets.extend(ys);
        self.descriptor.orbit_closed = true;
        Ok(())
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn descriptor(&self) -> &DatasetDescriptor {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Regular grid with `points_per_axis` points per coordinate, endpoints
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    pub fn unit(points_per_axis: usize) -> Self {
        Self {
            points_per_axis,
            lo: 0.0,
            hi: 1.0,
        }
    }

    pub fn size(&self, degree: usize) -> Option<usize> {
        self.points_per_axis.checked_pow(degree as u32)
    }

    pub fn points(&self, degree: usize) -> Result<Vec<Vec<f64>>> {
        let size = self.size(degree).filter(|&s| s <= GRID_POINT_CAP).ok_or(Error::CapExceeded {
            what: "grid points",
            limit: GRID_POINT_CAP,
            requested: self.size(degree).unwrap_or(usize::MAX),
        })?;
        let k = self.points_per_axis;
        if k == 0 {
            return Ok(Vec::new());
        }
        let axis: Vec<f64> = (0..k)
            .map(|i| {
                if k == 1 {
                    self.lo
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / (k - 1) as f64
                }
            })
            .collect();
        Ok((0..size)
            .map(|mut flat| {
                let mut x = vec![0.0; degree];
                for slot in x.iter_mut().rev() {
                    *slot = axis[flat % k];
                    flat /= k;
                }
                x
            })
            .collect())
    }
}

fn to_t<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::from_f64_lossy(v)).collect()
}

/// `max_x ‖net(x) − target(x)‖_∞` over the grid.
pub fn grid_sup_error<T: Real>(
    net: &Network<T>,
    target: &dyn Fn(&[f64]) -> Vec<f64>,
    grid: &GridSpec,
) -> Result<f64> {
    let ev = net.evaluator();
    let mut worst: f64 = 0.0;
    for x in grid.points(net.input_dim())? {
        let y = ev.forward(&to_t(&x))?;
        let t = target(&x);
        if y.len() != t.len() {
            return Err(Error::SizeMismatch {
                expected: t.len(),
                found: y.len(),
            });
        }
        for (a, b) in y.iter().zip(&t) {
            let d = (a.to_f64_lossy() - b).abs();
            if !d.is_finite() {
                return Err(Error::NonFinite("grid residual".into()));
            }
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Mean squared error over all output entries of the batch, and its gradient
/// with respect to the free parameters.
pub fn backprop<T: Real>(net: &Network<T>, inputs: &[Vec<T>], targets: &[Vec<T>]) -> Result<(T, Vec<T>)> {
    if inputs.len() != targets.len() {
        return Err(Error::SizeMismatch {
            expected: inputs.len(),
            found: targets.len(),
        });
    }
    let mut grad = vec![T::zero(); net.params().len()];
    if inputs.is_empty() {
        return Ok((T::zero(), grad));
    }
    let ev = net.evaluator();
    let mut dense = ev.new_grads();
    let entries = T::from_count(inputs.len() * net.output_dim());
    let two = T::one() + T::one();
    let mut loss = T::zero();
    for (x, t) in inputs.iter().zip(targets) {
        let (y, tape) = ev.forward_taped(x)?;
        if t.len() != y.len() {
            return Err(Error::SizeMismatch {
                expected: y.len(),
                found: t.len(),
            });
        }
        let mut dy = Vec::with_capacity(y.len());
        for (a, b) in y.iter().zip(t) {
            if !a.is_finite() {
                return Err(Error::NonFinite("network output".into()));
            }
            let r = *a - *b;
            loss += r * r;
            dy.push(two * r / entries);
        }
        ev.backward(&tape, &dy, &mut dense);
    }
    ev.scatter(&dense, &mut grad);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((loss / entries, grad))
}

/// Mean squared error of `net` on the whole dataset.
pub fn dataset_mse<T: Real>(net: &Network<T>, data: &Dataset) -> Result<f64> {
    let ev = net.evaluator();
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, t) in data.inputs().iter().zip(data.targets()) {
        let y = ev.forward(&to_t(x))?;
        for (a, b) in y.iter().zip(t) {
            total += (a.to_f64_lossy() - b).powi(2);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Glorot-uniform weights from each block's realized fan, zero biases.
pub fn initialize<T: Real>(net: &mut Network<T>, seed: u64) {
    let mut r = rng(seed, STREAM_INIT);
    let blocks = net.blocks().to_vec();
    let params = net.params_mut();
    for b in &blocks {
        let p = &b.pattern;
        let limit = (6.0 / (p.in_size() + p.out_size()) as f64).sqrt();
        let base = b.offset;
        for k in 0..p.weight_orbits() {
            params[base + k] = T::from_f64_lossy(r.random_range(-limit..limit));
        }
        for k in 0..p.bias_orbits() {
            params[base + p.weight_orbits() + k] = T::zero();
        }
    }
}

enum OptState<T> {
    Sgd { velocity: Vec<T> },
    Adam { m: Vec<T>, v: Vec<T>, t: i32 },
}

struct Optimizer<T> {
    state: OptState<T>,
    beta1: T,
    beta2: T,
    eps: T,
    momentum: T,
}

impl<T: Real> Optimizer<T> {
    fn new(config: &TrainConfig, len: usize) -> Self {
        let state = match config.optimizer {
            OptimizerKind::Sgd => OptState::Sgd {
                velocity: vec![T::zero(); len],
            },
            OptimizerKind::Adam => OptState::Adam {
                m: vec![T::zero(); len],
                v: vec![T::zero(); len],
                t: 0,
            },
        };
        Self {
            state,
            beta1: T::from_f64_lossy(config.beta1),
            beta2: T::from_f64_lossy(config.beta2),
            eps: T::from_f64_lossy(config.eps),
            momentum: T::from_f64_lossy(config.momentum),
        }
    }

    fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        match &mut self.state {
            OptState::Sgd { velocity } => {
                for ((p, g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                    *v = self.momentum * *v + *g;
                    *p -= lr * *v;
                }
            }
            OptState::Adam { m, v, t } => {
                *t += 1;
                let one = T::one();
                let c1 = one - self.beta1.powi(*t);
                let c2 = one - self.beta2.powi(*t);
                for i in 0..params.len() {
                    let g = grad[i];
                    m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                    v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    params[i] -= lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub grid_sup_error: Option<f64>,
    pub equivariance_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Completed,
    TargetReached,
    EarlyStopped,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub status: TrainStatus,
    pub epochs_run: usize,
    pub steps: usize,
    pub log: Vec<EpochRecord>,
    pub initial_sup_error: f64,
    /// Best grid sup-error seen; the network is left at these parameters.
    pub best_sup_error: f64,
    pub best_epoch: usize,
    pub final_train_mse: f64,
    pub final_equivariance_residual: f64,
    pub divergence: Option<String>,
}

impl TrainReport {
    /// CSV with columns `epoch,train_mse,grid_sup_error,equivariance_residual`;
    /// epochs without a grid evaluation leave that field empty.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_mse", "grid_sup_error", "equivariance_residual"])?;
        for r in &self.log {
            w.write_record([
                r.epoch.to_string(),
                format!("{:e}", r.train_mse),
                r.grid_sup_error.map(|v| format!("{v:e}")).unwrap_or_default(),
                format!("{:e}", r.equivariance_residual),
            ])?;
        }
        w.flush()
    }
}

/// Runs minibatch training and leaves `net` at the parameters with the best
/// grid sup-error. Divergence stops the run with status
/// [`TrainStatus::Diverged`] instead of an error.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &Dataset,
    config: &TrainConfig,
    target: &dyn Fn(&[f64]) -> Vec<f64>,
    grid: &GridSpec,
) -> Result<TrainReport> {
    config.validate()?;
    if data.descriptor().degree != net.input_dim() {
        return Err(Error::DegreeMismatch {
            expected: net.input_dim(),
            found: data.descriptor().degree,
        });
    }
    let xs: Vec<Vec<T>> = data.inputs().iter().map(|x| to_t(x)).collect();
    let ys: Vec<Vec<T>> = data.targets().iter().map(|y| to_t(y)).collect();
    let probes: Vec<Vec<T>> = {
        let mut r = rng(config.seed, STREAM_PROBE);
        let (lo, hi) = net.domain();
        (0..config.residual_inputs)
            .map(|_| (0..net.input_dim()).map(|_| T::from_f64_lossy(r.random_range(lo..=hi))).collect())
            .collect()
    };
    let elements = net.check_elements();
    let residual = |net: &Network<T>| net.equivariance_residual(&elements, &probes);

    let initial_sup = grid_sup_error(net, target, grid)?;
    let mut log = vec![EpochRecord {
        epoch: 0,
        train_mse: dataset_mse(net, data)?,
        grid_sup_error: Some(initial_sup),
        equivariance_residual: residual(net)?,
    }];
    let mut best = (initial_sup, 0usize, net.params().to_vec());
    let mut stale = 0usize;
    let mut status = if config.target_sup_error.is_some_and(|t| initial_sup <= t) {
        TrainStatus::TargetReached
    } else {
        TrainStatus::Completed
    };
    let mut divergence = None;
    let mut shuffle = rng(config.seed, STREAM_SHUFFLE);
    let mut opt = Optimizer::<T>::new(config, net.params().len());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut lr = config.learning_rate;
    let mut steps = 0;
    let mut epochs_run = 0;

    'epochs: for epoch in 1..=config.max_epochs {
        if status != TrainStatus::Completed {
            break;
        }
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(config.batch_size) {
            let bx: Vec<Vec<T>> = chunk.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<Vec<T>> = chunk.iter().map(|&i| ys[i].clone()).collect();
            match backprop(net, &bx, &by) {
                Ok((_, grad)) => {
                    opt.step(net.params_mut(), &grad, T::from_f64_lossy(lr));
                    steps += 1;
                }
                Err(Error::NonFinite(what)) => {
                    divergence = Some(format!("non-finite {what} at epoch {epoch}"));
                    status = TrainStatus::Diverged;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        epochs_run = epoch;
        lr = (lr * config.lr_decay).max(config.min_learning_rate);
        if net.params().iter().any(|p| !p.is_finite()) {
            divergence = Some(format!("non-finite parameters at epoch {epoch}"));
            status = TrainStatus::Diverged;
            break;
        }
        let evaluate = epoch % config.eval_every == 0 || epoch == config.max_epochs;
        let sup = if evaluate {
            match grid_sup_error(net, target, grid) {
                Ok(v) => Some(v),
                Err(Error::NonFinite(what)) => {
                    divergence = Some(format!("non-finite {what} at epoch {epoch}"));
                    status = TrainStatus::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        log.push(EpochRecord {
            epoch,
            train_mse: dataset_mse(net, data)?,
            grid_sup_error: sup,
            equivariance_residual: residual(net)?,
        });
        if let Some(s) = sup {
            if s < best.0 {
                best = (s, epoch, net.params().to_vec());
                stale = 0;
            } else {
                stale += 1;
            }
            if config.target_sup_error.is_some_and(|t| s <= t) {
                status = TrainStatus::TargetReached;
            } else if config.patience.is_some_and(|p| stale >= p) {
                status = TrainStatus::EarlyStopped;
            }
        }
    }
    net.set_params(best.2)?;
    Ok(TrainReport {
        status,
        epochs_run,
        steps,
        initial_sup_error: initial_sup,
        best_sup_error: best.0,
        best_epoch: best.1,
        final_train_mse: dataset_mse(net, data)?,
        final_equivariance_residual: residual(net)?,
        divergence,
        log,
    })
}
