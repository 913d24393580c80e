//! Invariant and equivariant architectures assembled from tied affine blocks.

mod bounds;
mod build;
mod encoder;
mod engine;
mod first_layer;
mod spec;
mod symmetrize;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::equi_linear::ParamCount;
use crate::error::{Error, Result};
use crate::perm_group::{CosetDecomposition, Permutation, PermutationGroup};
use crate::scalar::Real;

pub use bounds::{network_parameter_bound, report_bounds, BoundsReport};
pub use build::{
    build_dense_net, build_equivariant_net, build_invariant_sum_net, build_invariant_tensor_net,
    build_stab_invariant_net, HeadTemplate, PhiSpec,
};
pub use encoder::ka_encoder;
pub use engine::{AffineBlock, Head, LayerRange, Phi};
pub use first_layer::{first_layer_g, FirstLayerG};
pub use spec::{Checkpoint, NetworkSpec, TensorLayerSpec};
pub use symmetrize::{symmetrize_equivariant, symmetrize_invariant};

use engine::{DenseGrads, HeadTape, Realized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Widths `d₀, …, d_H` of a feed-forward stack with one activation per
/// affine map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    /// Defaults to ReLU on every map except the last.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activations: Option<Vec<Activation>>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>) -> Self {
        Self {
            widths,
            activations: None,
        }
    }

    /// `input → hidden… → output` with ReLU on the hidden maps.
    pub fn with_hidden(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        Self::new(widths)
    }

    pub fn depth(&self) -> usize {
        self.widths.len().saturating_sub(1)
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(0)
    }

    pub fn input(&self) -> usize {
        self.widths[0]
    }

    pub fn output(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    pub fn hidden(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    pub fn activations(&self) -> Vec<Activation> {
        match &self.activations {
            Some(a) => a.clone(),
            None => (0..self.depth())
                .map(|k| {
                    if k + 1 == self.depth() {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    }
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Architecture("an MLP needs at least two widths".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Architecture("MLP widths must be positive".into()));
        }
        let acts = self.activations();
        if acts.len() != self.depth() {
            return Err(Error::Architecture(format!(
                "{} activations for {} layers",
                acts.len(),
                self.depth()
            )));
        }
        if acts.last() != Some(&Activation::Identity) {
            return Err(Error::Architecture("the last activation must be the identity".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetKind {
    InvariantSum,
    InvariantTensor,
    StabInvariant,
    Equivariant,
    Dense,
}

/// Architecture regime: bounded depth with free width, or bounded lane width
/// with free depth. `Free` skips both structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[serde(alias = "wide_shallow")]
    Wide,
    #[serde(alias = "narrow_deep")]
    Deep,
    #[default]
    Free,
}

/// How outputs transform under the net's symmetry group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Invariant,
    Equivariant,
    None,
}

/// One orbit of an equivariant net: output `orbit[k]` is `head(τ_k·x)`.
#[derive(Debug, Clone)]
pub struct Lane {
    pub cosets: CosetDecomposition,
    pub head: Head,
}

#[derive(Debug, Clone)]
pub enum Body {
    Single(Head),
    Lanes(Vec<Lane>),
}

/// An instantiated architecture: wiring plus a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub(crate) kind: NetKind,
    pub(crate) mode: Mode,
    pub(crate) degree: usize,
    pub(crate) group: Arc<PermutationGroup>,
    pub(crate) symmetry: Symmetry,
    pub(crate) blocks: Vec<AffineBlock>,
    pub(crate) body: Body,
    pub(crate) params: Vec<T>,
    pub(crate) domain: (f64, f64),
}

pub(crate) enum NetTape<T> {
    Single(HeadTape<T>),
    Lanes(Vec<HeadTape<T>>),
}

/// A network with realized weights, for repeated evaluation.
pub struct Evaluator<'a, T> {
    net: &'a Network<T>,
    realized: Realized<T>,
}

impl<T: Real> Network<T> {
    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn input_dim(&self) -> usize {
        self.degree
    }

    pub fn output_dim(&self) -> usize {
        match &self.body {
            Body::Single(h) => h.output_dim(&self.blocks),
            Body::Lanes(_) => self.degree,
        }
    }

    /// Symmetry group of the net. For stabilizer nets this is the stabilizer
    /// of the base point inside `Sₙ`.
    pub fn group(&self) -> &Arc<PermutationGroup> {
        &self.group
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn blocks(&self) -> &[AffineBlock] {
        &self.blocks
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn set_domain(&mut self, lo: f64, hi: f64) -> Result<()> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("invalid domain [{lo}, {hi}]")));
        }
        self.domain = (lo, hi);
        Ok(())
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::SizeMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params = params;
        Ok(())
    }

    pub fn param_count(&self) -> ParamCount {
        self.blocks.iter().map(|b| b.pattern.param_count()).sum()
    }

    /// Total entries of the realized matrices and biases, i.e. the count
    /// an untied implementation of the same wiring would store.
    pub fn realized_entry_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.pattern.in_size() * b.pattern.out_size() + b.pattern.out_size())
            .sum()
    }

    pub fn evaluator(&self) -> Evaluator<'_, T> {
        Evaluator {
            net: self,
            realized: engine::realize(&self.blocks, &self.params),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.evaluator().forward(x)
    }

    pub fn forward_batch(&self, xs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        let ev = self.evaluator();
        xs.iter().map(|x| ev.forward(x)).collect()
    }

    /// Largest `‖N(σ·x) − σ·N(x)‖_∞` (or `‖N(σ·x) − N(x)‖_∞` for invariant
    /// nets) over `elements` and `inputs`.
    pub fn equivariance_residual(&self, elements: &[Permutation], inputs: &[Vec<T>]) -> Result<f64> {
        if self.symmetry == Symmetry::None {
            return Ok(0.0);
        }
        let ev = self.evaluator();
        let mut worst: f64 = 0.0;
        for x in inputs {
            let y = ev.forward(x)?;
            for s in elements {
                let moved = ev.forward(&s.act_on_slice(x)?)?;
                let expect = match self.symmetry {
                    Symmetry::Equivariant => s.act_on_slice(&y)?,
                    _ => y.clone(),
                };
                for (a, b) in moved.iter().zip(&expect) {
                    worst = worst.max((*a - *b).abs().to_f64_lossy());
                }
            }
        }
        Ok(worst)
    }

    /// Elements used for residual checks: the whole group when small,
    /// otherwise its generators.
    pub fn check_elements(&self) -> Vec<Permutation> {
        if self.group.order() <= 720 {
            self.group.elements().to_vec()
        } else {
            self.group.generators().to_vec()
        }
    }

    /// Widths of the equivalent plain MLP, input first. Per-coordinate lanes
    /// are counted side by side, sums are folded into the next linear map,
    /// and a pass-through coordinate counts as one unit.
    pub fn layer_widths(&self) -> Vec<usize> {
        bounds::layer_widths(self)
    }
}

impl<'a, T: Real> Evaluator<'a, T> {
    pub fn network(&self) -> &Network<T> {
        self.net
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_taped(x)?.0)
    }

    pub(crate) fn forward_taped(&self, x: &[T]) -> Result<(Vec<T>, NetTape<T>)> {
        let net = self.net;
        if x.len() != net.degree {
            return Err(Error::SizeMismatch {
                expected: net.degree,
                found: x.len(),
            });
        }
        match &net.body {
            Body::Single(h) => {
                let (y, t) = h.forward(&net.blocks, &self.realized, x);
                Ok((y, NetTape::Single(t)))
            }
            Body::Lanes(lanes) => {
                let mut y = vec![T::zero(); net.degree];
                let mut tapes = Vec::with_capacity(net.degree);
                for lane in lanes {
                    for (k, tau) in lane.cosets.representatives().iter().enumerate() {
                        let (out, t) = lane.head.forward(&net.blocks, &self.realized, &tau.act_on_slice(x)?);
                        y[lane.cosets.orbit()[k]] = out[0];
                        tapes.push(t);
                    }
                }
                Ok((y, NetTape::Lanes(tapes)))
            }
        }
    }

    /// Adds `∂⟨dy, N(x)⟩/∂θ` to `grads`.
    pub(crate) fn backward(&self, tape: &NetTape<T>, dy: &[T], grads: &mut DenseGrads<T>) {
        let net = self.net;
        match (&net.body, tape) {
            (Body::Single(h), NetTape::Single(t)) => {
                h.backward(&net.blocks, &self.realized, t, dy, grads)
            }
            (Body::Lanes(lanes), NetTape::Lanes(tapes)) => {
                let mut tapes = tapes.iter();
                for lane in lanes {
                    for &p in lane.cosets.orbit() {
                        let t = tapes.next().expect("one tape per output");
                        lane.head.backward(&net.blocks, &self.realized, t, &[dy[p]], grads);
                    }
                }
            }
            _ => unreachable!("tape produced by a different network"),
        }
    }

    pub(crate) fn new_grads(&self) -> DenseGrads<T> {
        DenseGrads::zeros(&self.net.blocks)
    }

    pub(crate) fn scatter(&self, grads: &DenseGrads<T>, out: &mut [T]) {
        grads.scatter_into(&self.net.blocks, out);
    }
}

#[cfg(test)]
mod tests;
