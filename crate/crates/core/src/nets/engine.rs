//! Forward and reverse-mode evaluation over a flat parameter vector.
//!
//! Every affine map is an [`AffineBlock`]: a sharing pattern plus the offset
//! of its free parameters. Evaluation realizes each block into a dense
//! `(W, b)` once, runs dense arithmetic, and gradients are scattered back
//! through the pattern so tied placements accumulate.

use std::sync::Arc;

use crate::equi_linear::SharingPattern;
use crate::linalg::Matrix;
use crate::perm_group::Permutation;
use crate::scalar::Real;

use super::encoder::ka_encoder;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineBlock {
    pub pattern: Arc<SharingPattern>,
    pub offset: usize,
    pub relu: bool,
}

impl AffineBlock {
    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.pattern.free_param_count()
    }
}

/// Consecutive blocks forming one feed-forward stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerRange {
    pub start: usize,
    pub end: usize,
}

impl LayerRange {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Per-coordinate feature map of Kolmogorov–Arnold style heads.
#[derive(Debug, Clone, PartialEq)]
pub enum Phi {
    /// Fixed moment map `x ↦ (1, x, …, x^degree)`.
    Exact { degree: usize },
    /// Trainable scalar-input MLP.
    Mlp(LayerRange),
}

/// A scalar-input-vector to output-vector map on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Plain stack on the full input.
    Mlp(LayerRange),
    /// `ρ(Σᵢ φ(xᵢ))`.
    Sum { phi: Phi, rho: LayerRange },
    /// `ρ(x_base, Σ_{i≠base} φ(xᵢ))`.
    Stab {
        base: usize,
        phi: Phi,
        rho: LayerRange,
    },
    /// `(1/|H|) Σ_{h∈H} inner(h·x)`.
    Symmetrized {
        elements: Vec<Permutation>,
        inner: Box<Head>,
    },
    /// Tied layers followed by per-channel sum pooling.
    Tensor { layers: LayerRange, channels: usize },
}

pub(crate) type Realized<T> = Vec<(Matrix<T>, Vec<T>)>;

/// Dense gradient buffers, one `(dW, db)` per block.
pub(crate) struct DenseGrads<T> {
    pub blocks: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> DenseGrads<T> {
    pub fn zeros(blocks: &[AffineBlock]) -> Self {
        Self {
            blocks: blocks
                .iter()
                .map(|b| {
                    let p = &b.pattern;
                    (
                        vec![T::zero(); p.in_size() * p.out_size()],
                        vec![T::zero(); p.out_size()],
                    )
                })
                .collect(),
        }
    }

    pub fn scatter_into(&self, blocks: &[AffineBlock], grad: &mut [T]) {
        for (b, (dw, db)) in blocks.iter().zip(&self.blocks) {
            b.pattern.scatter_add(dw, db, &mut grad[b.param_range()]);
        }
    }
}

pub(crate) fn realize<T: Real>(blocks: &[AffineBlock], params: &[T]) -> Realized<T> {
    blocks
        .iter()
        .map(|b| {
            b.pattern
                .realize(&params[b.param_range()])
                .expect("block parameter ranges are consistent")
        })
        .collect()
}

/// Inputs and post-activation outputs of each block in a stack.
#[derive(Debug, Clone)]
pub(crate) struct StackTape<T> {
    acts: Vec<Vec<T>>,
}

impl<T> StackTape<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("tape holds the input")
    }
}

pub(crate) fn stack_forward<T: Real>(
    blocks: &[AffineBlock],
    realized: &Realized<T>,
    range: LayerRange,
    x: Vec<T>,
) -> StackTape<T> {
    let mut acts = Vec::with_capacity(range.len() + 1);
    acts.push(x);
    for k in range.iter() {
        let (w, b) = &realized[k];
        let input = acts.last().expect("non-empty");
        let mut out = Vec::with_capacity(w.rows());
        for i in 0..w.rows() {
            let mut s = b[i];
            for (a, v) in w.row(i).iter().zip(input) {
                s += *a * *v;
            }
            if blocks[k].relu && s < T::zero() {
                s = T::zero();
            }
            out.push(s);
        }
        acts.push(out);
    }
    StackTape { acts }
}

pub(crate) fn stack_backward<T: Real>(
    blocks: &[AffineBlock],
    realized: &Realized<T>,
    range: LayerRange,
    tape: &StackTape<T>,
    mut dy: Vec<T>,
    grads: &mut DenseGrads<T>,
) -> Vec<T> {
    for (pos, k) in range.iter().enumerate().rev() {
        let (w, _) = &realized[k];
        let input = &tape.acts[pos];
        let output = &tape.acts[pos + 1];
        if blocks[k].relu {
            // ReLU'(0) = 0
            for (g, &o) in dy.iter_mut().zip(output) {
                if o <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        let (dw, db) = &mut grads.blocks[k];
        let cols = w.cols();
        let mut dx = vec![T::zero(); cols];
        for (i, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            db[i] += g;
            let row = w.row(i);
            let drow = &mut dw[i * cols..(i + 1) * cols];
            for j in 0..cols {
                drow[j] += g * input[j];
                dx[j] += row[j] * g;
            }
        }
        dy = dx;
    }
    dy
}

#[derive(Debug, Clone)]
pub(crate) enum PhiTape<T> {
    Exact,
    Mlp(StackTape<T>),
}

#[derive(Debug, Clone)]
pub(crate) enum HeadTape<T> {
    Mlp(StackTape<T>),
    Pooled {
        phis: Vec<PhiTape<T>>,
        rho: StackTape<T>,
    },
    Symmetrized(Vec<HeadTape<T>>),
    Tensor(StackTape<T>),
}

fn phi_forward<T: Real>(
    phi: &Phi,
    blocks: &[AffineBlock],
    realized: &Realized<T>,
    x: T,
) -> (Vec<T>, PhiTape<T>) {
    match phi {
        Phi::Exact { degree } => (ka_encoder(x, *degree), PhiTape::Exact),
        Phi::Mlp(range) => {
            let tape = stack_forward(blocks, realized, *range, vec![x]);
            (tape.output().to_vec(), PhiTape::Mlp(tape))
        }
    }
}

fn phi_backward<T: Real>(
    phi: &Phi,
    blocks: &[AffineBlock],
    realized: &Realized<T>,
    tape: &PhiTape<T>,
    dy: &[T],
    grads: &mut DenseGrads<T>,
) {
    if let (Phi::Mlp(range), PhiTape::Mlp(t)) = (phi, tape) {
        stack_backward(blocks, realized, *range, t, dy.to_vec(), grads);
    }
}

impl Head {
    pub(crate) fn forward<T: Real>(
        &self,
        blocks: &[AffineBlock],
        realized: &Realized<T>,
        x: &[T],
    ) -> (Vec<T>, HeadTape<T>) {
        match self {
            Head::Mlp(range) => {
                let tape = stack_forward(blocks, realized, *range, x.to_vec());
                (tape.output().to_vec(), HeadTape::Mlp(tape))
            }
            Head::Sum { phi, rho } => self.pooled_forward(phi, *rho, None, blocks, realized, x),
            Head::Stab { base, phi, rho } => {
                self.pooled_forward(phi, *rho, Some(*base), blocks, realized, x)
            }
            Head::Symmetrized { elements, inner } => {
                let scale = T::one() / T::from_count(elements.len());
                let mut acc: Option<Vec<T>> = None;
                let mut tapes = Vec::with_capacity(elements.len());
                for h in elements {
                    let hx = h.act_on_slice(x).expect("input length matches degree");
                    let (y, t) = inner.forward(blocks, realized, &hx);
                    match &mut acc {
                        Some(a) => a.iter_mut().zip(&y).for_each(|(a, v)| *a += *v),
                        None => acc = Some(y),
                    }
                    tapes.push(t);
                }
                let y = acc
                    .unwrap_or_default()
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
                (y, HeadTape::Symmetrized(tapes))
            }
            Head::Tensor { layers, channels } => {
                let tape = stack_forward(blocks, realized, *layers, x.to_vec());
                let mut y = vec![T::zero(); *channels];
                for (p, v) in tape.output().iter().enumerate() {
                    y[p % channels] += *v;
                }
                (y, HeadTape::Tensor(tape))
            }
        }
    }

    fn pooled_forward<T: Real>(
        &self,
        phi: &Phi,
        rho: LayerRange,
        base: Option<usize>,
        blocks: &[AffineBlock],
        realized: &Realized<T>,
        x: &[T],
    ) -> (Vec<T>, HeadTape<T>) {
        let mut pooled: Option<Vec<T>> = None;
        let mut phis = Vec::with_capacity(x.len());
        for (i, &xi) in x.iter().enumerate() {
            if Some(i) == base {
                continue;
            }
            let (f, t) = phi_forward(phi, blocks, realized, xi);
            match &mut pooled {
                Some(p) => p.iter_mut().zip(&f).for_each(|(a, v)| *a += *v),
                None => pooled = Some(f),
            }
            phis.push(t);
        }
        let pooled = pooled.unwrap_or_else(|| vec![T::zero(); self.phi_width(blocks)]);
        let rho_in = match base {
            Some(b) => std::iter::once(x[b]).chain(pooled).collect(),
            None => pooled,
        };
        let tape = stack_forward(blocks, realized, rho, rho_in);
        (
            tape.output().to_vec(),
            HeadTape::Pooled { phis, rho: tape },
        )
    }

    fn phi_width(&self, blocks: &[AffineBlock]) -> usize {
        match self {
            Head::Sum { phi, .. } | Head::Stab { phi, .. } => match phi {
                Phi::Exact { degree } => degree + 1,
                Phi::Mlp(r) => blocks[r.end - 1].pattern.out_size(),
            },
            _ => 0,
        }
    }

    /// Accumulates parameter gradients for output cotangent `dy`.
    pub(crate) fn backward<T: Real>(
        &self,
        blocks: &[AffineBlock],
        realized: &Realized<T>,
        tape: &HeadTape<T>,
        dy: &[T],
        grads: &mut DenseGrads<T>,
    ) {
        match (self, tape) {
            (Head::Mlp(range), HeadTape::Mlp(t)) => {
                stack_backward(blocks, realized, *range, t, dy.to_vec(), grads);
            }
            (Head::Sum { phi, rho }, HeadTape::Pooled { phis, rho: t }) => {
                let dpool = stack_backward(blocks, realized, *rho, t, dy.to_vec(), grads);
                for pt in phis {
                    phi_backward(phi, blocks, realized, pt, &dpool, grads);
                }
            }
            (Head::Stab { phi, rho, .. }, HeadTape::Pooled { phis, rho: t }) => {
                let drho = stack_backward(blocks, realized, *rho, t, dy.to_vec(), grads);
                let dpool = &drho[1..];
                for pt in phis {
                    phi_backward(phi, blocks, realized, pt, dpool, grads);
                }
            }
            (Head::Symmetrized { elements, inner }, HeadTape::Symmetrized(tapes)) => {
                let scale = T::one() / T::from_count(elements.len());
                let scaled: Vec<T> = dy.iter().map(|&g| g * scale).collect();
                for t in tapes {
                    inner.backward(blocks, realized, t, &scaled, grads);
                }
            }
            (Head::Tensor { layers, channels }, HeadTape::Tensor(t)) => {
                let width = t.output().len();
                let dout = (0..width).map(|p| dy[p % channels]).collect();
                stack_backward(blocks, realized, *layers, t, dout, grads);
            }
            _ => unreachable!("tape produced by a different head"),
        }
    }

    pub fn output_dim(&self, blocks: &[AffineBlock]) -> usize {
        match self {
            Head::Mlp(r) => blocks[r.end - 1].pattern.out_size(),
            Head::Sum { rho, .. } | Head::Stab { rho, .. } => blocks[rho.end - 1].pattern.out_size(),
            Head::Symmetrized { inner, .. } => inner.output_dim(blocks),
            Head::Tensor { channels, .. } => *channels,
        }
    }
}
