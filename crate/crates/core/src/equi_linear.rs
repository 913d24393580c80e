//! Equivariant affine maps between acted-on index sets.
//!
//! The space `{W : W·P_in(σ) = P_out(σ)·W ∀σ}` is spanned by indicator
//! matrices of the orbits of `G` on index pairs `(i, j)` acting by
//! `(i, j) ↦ (φ_out(σ)(i), φ_in(σ)(j))`. A [`SharingPattern`] records the
//! orbit of every weight and bias entry; a [`TiedLinearLayer`] assigns one
//! free parameter per orbit and copies it into every placement.

use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::actions::GroupAction;
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::linalg::{orthogonalize, Matrix, SparseVec};
use crate::scalar::Field;

/// Placeholder id for entries constrained to zero. Plain orbit tying never
/// produces it.
pub const ZERO_ORBIT: u32 = u32::MAX;

/// Cap on `N·M` for the brute-force oracles.
pub const ORACLE_ENTRY_CAP: usize = 4096;

/// Orbit id per weight entry (row-major `N×M`) and per bias entry.
///
/// Ids form one range: weights use `0..weight_orbits`, biases use
/// `weight_orbits..weight_orbits + bias_orbits`, so the parameter vector of a
/// tied layer is "weights, then biases".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharingPattern {
    in_size: usize,
    out_size: usize,
    weight_orbit_id: Vec<u32>,
    bias_orbit_id: Vec<u32>,
    weight_orbits: usize,
    bias_orbits: usize,
}

/// Free parameters of a pattern, split as weights and biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub weights: usize,
    pub biases: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.weights + self.biases
    }
}

impl std::ops::Add for ParamCount {
    type Output = ParamCount;

    fn add(self, rhs: ParamCount) -> ParamCount {
        ParamCount {
            weights: self.weights + rhs.weights,
            biases: self.biases + rhs.biases,
        }
    }
}

impl std::iter::Sum for ParamCount {
    fn sum<I: Iterator<Item = ParamCount>>(iter: I) -> ParamCount {
        iter.fold(ParamCount { weights: 0, biases: 0 }, |a, b| a + b)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Dense ids numbered by first appearance.
    fn labels(&mut self, offset: usize) -> (Vec<u32>, usize) {
        let n = self.parent.len();
        let mut id_of_root = vec![u32::MAX; n];
        let mut next = 0usize;
        let mut out = Vec::with_capacity(n);
        for x in 0..n {
            let r = self.find(x);
            if id_of_root[r] == u32::MAX {
                id_of_root[r] = (offset + next) as u32;
                next += 1;
            }
            out.push(id_of_root[r]);
        }
        (out, next)
    }
}

/// Weight-sharing pattern of the equivariant affine maps from `input` to
/// `output`.
pub fn pair_orbits(input: &GroupAction, output: &GroupAction) -> Result<SharingPattern> {
    if !input.same_group(output) {
        return Err(Error::GroupMismatch);
    }
    let (m, n) = (input.points(), output.points());
    let mut weights = UnionFind::new(n * m);
    let mut biases = UnionFind::new(n);
    for &g in input.group().generator_indices() {
        let (ti, to) = (input.table(g), output.table(g));
        for i in 0..n {
            let gi = to.apply(i);
            biases.union(i, gi);
            for j in 0..m {
                weights.union(i * m + j, gi * m + ti.apply(j));
            }
        }
    }
    let (weight_orbit_id, weight_orbits) = weights.labels(0);
    let (bias_orbit_id, bias_orbits) = biases.labels(weight_orbits);
    Ok(SharingPattern {
        in_size: m,
        out_size: n,
        weight_orbit_id,
        bias_orbit_id,
        weight_orbits,
        bias_orbits,
    })
}

/// Number of free parameters of a pattern (weights and biases separately).
pub fn count_free_params(pattern: &SharingPattern) -> ParamCount {
    pattern.param_count()
}

impl SharingPattern {
    /// Fully free `N×M` layer (trivial group).
    pub fn dense(in_size: usize, out_size: usize) -> Self {
        let w = in_size * out_size;
        Self {
            in_size,
            out_size,
            weight_orbit_id: (0..w as u32).collect(),
            bias_orbit_id: (w as u32..(w + out_size) as u32).collect(),
            weight_orbits: w,
            bias_orbits: out_size,
        }
    }

    /// Block-diagonal layer applying one shared `out×in` dense map to each of
    /// `lanes` independent lanes; input lane `l` occupies
    /// `l·in..(l+1)·in`.
    pub fn shared_lanes(lanes: usize, in_size: usize, out_size: usize) -> Self {
        let (m, n) = (lanes * in_size, lanes * out_size);
        let w = in_size * out_size;
        let mut weight_orbit_id = vec![ZERO_ORBIT; n * m];
        let mut bias_orbit_id = vec![0; n];
        for l in 0..lanes {
            for i in 0..out_size {
                bias_orbit_id[l * out_size + i] = (w + i) as u32;
                for j in 0..in_size {
                    weight_orbit_id[(l * out_size + i) * m + l * in_size + j] = (i * in_size + j) as u32;
                }
            }
        }
        Self {
            in_size: m,
            out_size: n,
            weight_orbit_id,
            bias_orbit_id,
            weight_orbits: w,
            bias_orbits: out_size,
        }
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn weight_orbit_id(&self, i: usize, j: usize) -> u32 {
        self.weight_orbit_id[i * self.in_size + j]
    }

    pub fn weight_orbit_ids(&self) -> &[u32] {
        &self.weight_orbit_id
    }

    pub fn bias_orbit_ids(&self) -> &[u32] {
        &self.bias_orbit_id
    }

    pub fn weight_orbits(&self) -> usize {
        self.weight_orbits
    }

    pub fn bias_orbits(&self) -> usize {
        self.bias_orbits
    }

    pub fn free_param_count(&self) -> usize {
        self.weight_orbits + self.bias_orbits
    }

    pub fn param_count(&self) -> ParamCount {
        ParamCount {
            weights: self.weight_orbits,
            biases: self.bias_orbits,
        }
    }

    /// Placements per weight orbit (realized fan used for initialization).
    pub fn weight_orbit_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.weight_orbits];
        for &id in &self.weight_orbit_id {
            if id != ZERO_ORBIT {
                sizes[id as usize] += 1;
            }
        }
        sizes
    }

    /// Copies parameters into a dense `(W, b)`.
    pub fn realize<T: Field>(&self, params: &[T]) -> Result<(Matrix<T>, Vec<T>)> {
        if params.len() != self.free_param_count() {
            return Err(Error::SizeMismatch {
                expected: self.free_param_count(),
                found: params.len(),
            });
        }
        let data = self
            .weight_orbit_id
            .iter()
            .map(|&id| {
                if id == ZERO_ORBIT {
                    T::zero()
                } else {
                    params[id as usize].clone()
                }
            })
            .collect();
        let bias = self
            .bias_orbit_id
            .iter()
            .map(|&id| params[id as usize].clone())
            .collect();
        Ok((Matrix::from_row_major(self.out_size, self.in_size, data), bias))
    }

    /// Adds dense gradients `(dW, db)` into `grad` (length
    /// `free_param_count`); tied placements accumulate.
    pub fn scatter_add<T: Field>(&self, d_weight: &[T], d_bias: &[T], grad: &mut [T]) {
        for (&id, g) in self.weight_orbit_id.iter().zip(d_weight) {
            if id != ZERO_ORBIT {
                grad[id as usize] = grad[id as usize].clone() + g.clone();
            }
        }
        for (&id, g) in self.bias_orbit_id.iter().zip(d_bias) {
            grad[id as usize] = grad[id as usize].clone() + g.clone();
        }
    }

    pub fn to_export(&self) -> PatternExport {
        let id = |v: u32| if v == ZERO_ORBIT { -1 } else { i64::from(v) };
        PatternExport {
            m: self.in_size,
            n: self.out_size,
            weight_orbit_id: self
                .weight_orbit_id
                .chunks(self.in_size.max(1))
                .take(self.out_size)
                .map(|row| row.iter().map(|&v| id(v)).collect())
                .collect(),
            bias_orbit_id: self.bias_orbit_id.iter().map(|&v| id(v)).collect(),
            free_params: self.free_param_count(),
        }
    }

    pub fn from_export(export: &PatternExport) -> Result<Self> {
        let (m, n) = (export.m, export.n);
        if export.weight_orbit_id.len() != n || export.bias_orbit_id.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: export.weight_orbit_id.len(),
            });
        }
        let conv = |v: i64| -> Result<u32> {
            match v {
                -1 => Ok(ZERO_ORBIT),
                v if v >= 0 && (v as usize) < export.free_params => Ok(v as u32),
                v => Err(Error::Parse(format!("orbit id {v} out of range"))),
            }
        };
        let mut weight_orbit_id = Vec::with_capacity(n * m);
        for row in &export.weight_orbit_id {
            if row.len() != m {
                return Err(Error::SizeMismatch {
                    expected: m,
                    found: row.len(),
                });
            }
            for &v in row {
                weight_orbit_id.push(conv(v)?);
            }
        }
        let bias_orbit_id = export
            .bias_orbit_id
            .iter()
            .map(|&v| conv(v))
            .collect::<Result<Vec<_>>>()?;
        let weight_orbits = weight_orbit_id
            .iter()
            .filter(|&&v| v != ZERO_ORBIT)
            .map(|&v| v as usize + 1)
            .max()
            .unwrap_or(0);
        let bias_orbits = export.free_params - weight_orbits;
        if bias_orbit_id.iter().any(|&v| (v as usize) < weight_orbits) {
            return Err(Error::Parse("bias ids must follow weight ids".into()));
        }
        Ok(Self {
            in_size: m,
            out_size: n,
            weight_orbit_id,
            bias_orbit_id,
            weight_orbits,
            bias_orbits,
        })
    }

    /// SHA-256 of the canonical JSON export.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.to_export()).expect("pattern serializes");
        sha256_hex(&json)
    }
}

/// Tying-compiler output:
/// `{"M":…, "N":…, "weight_orbit_id": [[…]], "bias_orbit_id": […], "free_params": k}`.
/// Zero-constrained entries are written as `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternExport {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub weight_orbit_id: Vec<Vec<i64>>,
    pub bias_orbit_id: Vec<i64>,
    pub free_params: usize,
}

/// A tied affine layer: one parameter per orbit, realized by copying.
#[derive(Debug, Clone, PartialEq)]
pub struct TiedLinearLayer<T> {
    pattern: Arc<SharingPattern>,
    params: Vec<T>,
}

impl<T: Field> TiedLinearLayer<T> {
    pub fn new(pattern: Arc<SharingPattern>, params: Vec<T>) -> Result<Self> {
        if params.len() != pattern.free_param_count() {
            return Err(Error::SizeMismatch {
                expected: pattern.free_param_count(),
                found: params.len(),
            });
        }
        Ok(Self { pattern, params })
    }

    pub fn zeros(pattern: Arc<SharingPattern>) -> Self {
        let params = vec![T::zero(); pattern.free_param_count()];
        Self { pattern, params }
    }

    /// Reads parameters back from a realized `(W, b)`; fails when two
    /// placements of one orbit disagree.
    pub fn from_realized(pattern: Arc<SharingPattern>, weight: &Matrix<T>, bias: &[T]) -> Result<Self> {
        let mut params: Vec<Option<T>> = vec![None; pattern.free_param_count()];
        let mut place = |id: u32, v: &T| -> Result<()> {
            if id == ZERO_ORBIT {
                return if v.negligible() {
                    Ok(())
                } else {
                    Err(Error::Config("nonzero entry in a zero-constrained slot".into()))
                };
            }
            match &params[id as usize] {
                Some(existing) if existing != v => Err(Error::Config(format!(
                    "orbit {id} holds inconsistent values"
                ))),
                Some(_) => Ok(()),
                None => {
                    params[id as usize] = Some(v.clone());
                    Ok(())
                }
            }
        };
        for (id, v) in pattern.weight_orbit_ids().iter().zip(weight.as_slice()) {
            place(*id, v)?;
        }
        for (id, v) in pattern.bias_orbit_ids().iter().zip(bias) {
            place(*id, v)?;
        }
        let params = params
            .into_iter()
            .map(|p| p.ok_or_else(|| Error::Internal("orbit without placement".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pattern, params })
    }

    pub fn pattern(&self) -> &Arc<SharingPattern> {
        &self.pattern
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn realize(&self) -> (Matrix<T>, Vec<T>) {
        self.pattern
            .realize(&self.params)
            .expect("parameter length checked at construction")
    }

    /// `W·x + b`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.pattern.in_size() {
            return Err(Error::SizeMismatch {
                expected: self.pattern.in_size(),
                found: x.len(),
            });
        }
        let (w, b) = self.realize();
        Ok(w.mul_vec(x)
            .into_iter()
            .zip(b)
            .map(|(a, c)| a + c)
            .collect())
    }
}

impl<T: crate::scalar::Real> TiedLinearLayer<T> {
    /// `ReLU(W·x + b)`.
    pub fn forward_relu(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self
            .forward(x)?
            .into_iter()
            .map(|v| v.max(T::zero()))
            .collect())
    }
}

/// Largest `|W[φ_out(g)(i)][φ_in(g)(j)] − W[i][j]|` and bias analogue over all
/// group elements; zero exactly when `(W, b)` is equivariant.
pub fn equivariance_defect<T: Field>(
    weight: &Matrix<T>,
    bias: &[T],
    input: &GroupAction,
    output: &GroupAction,
) -> Result<f64> {
    if !input.same_group(output) {
        return Err(Error::GroupMismatch);
    }
    let (m, n) = (input.points(), output.points());
    if weight.rows() != n || weight.cols() != m || bias.len() != n {
        return Err(Error::SizeMismatch {
            expected: n * m,
            found: weight.rows() * weight.cols(),
        });
    }
    let mut worst: f64 = 0.0;
    for g in 0..input.group().order() {
        let (ti, to) = (input.table(g), output.table(g));
        for i in 0..n {
            let gi = to.apply(i);
            worst = worst.max((bias[gi].clone() - bias[i].clone()).magnitude());
            for j in 0..m {
                let d = weight[(gi, ti.apply(j))].clone() - weight[(i, j)].clone();
                worst = worst.max(d.magnitude());
            }
        }
    }
    Ok(worst)
}

fn oracle_cap(input: &GroupAction, output: &GroupAction, cap: usize) -> Result<()> {
    let entries = input.points() * output.points();
    if entries > cap {
        return Err(Error::CapExceeded {
            what: "oracle matrix entries",
            limit: cap,
            requested: entries,
        });
    }
    Ok(())
}

/// Basis of `{W : P_out(σ)·W = W·P_in(σ) ∀σ}` obtained by averaging every
/// elementary matrix over the group (Reynolds operator), removing duplicates
/// and orthogonalizing. Independent of [`pair_orbits`].
pub fn brute_force_equivariant_basis<T: Field>(
    input: &GroupAction,
    output: &GroupAction,
) -> Result<Vec<Matrix<T>>> {
    if !input.same_group(output) {
        return Err(Error::GroupMismatch);
    }
    oracle_cap(input, output, ORACLE_ENTRY_CAP)?;
    let (m, n) = (input.points(), output.points());
    let order = input.group().order();
    let weight = T::one() / T::from_count(order);
    let mut averaged: Vec<SparseVec<T>> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            // P_out(σ)·E_ij·P_in(σ)⁻¹ = E_{φ_out(σ)(i), φ_in(σ)(j)}
            let mut v = SparseVec::new();
            for g in 0..order {
                let key = output.table(g).apply(i) * m + input.table(g).apply(j);
                let e = v.entry(key).or_insert_with(T::zero);
                *e = e.clone() + weight.clone();
            }
            if !averaged.contains(&v) {
                averaged.push(v);
            }
        }
    }
    Ok(orthogonalize(averaged)
        .into_iter()
        .map(|v| {
            let mut mat = Matrix::zeros(n, m);
            for (k, x) in v {
                mat.as_mut_slice()[k] = x;
            }
            mat
        })
        .collect())
}

/// Dimension of the equivariant space from the stacked linear constraints
/// `W[φ_out(g)⁻¹(r)][c] − W[r][φ_in(g)(c)] = 0` over the generators.
pub fn constraint_nullspace_dimension<T: Field>(input: &GroupAction, output: &GroupAction) -> Result<usize> {
    if !input.same_group(output) {
        return Err(Error::GroupMismatch);
    }
    oracle_cap(input, output, 1024)?;
    let (m, n) = (input.points(), output.points());
    let gens = input.group().generator_indices();
    let mut rows = Vec::new();
    for &g in gens {
        let out_inv = output.table(g).inverse();
        for r in 0..n {
            for c in 0..m {
                let mut row = vec![T::zero(); n * m];
                let a = out_inv.apply(r) * m + c;
                let b = r * m + input.table(g).apply(c);
                row[a] = row[a].clone() + T::one();
                row[b] = row[b].clone() - T::one();
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Ok(n * m);
    }
    let count = rows.len();
    let system = Matrix::from_row_major(count, n * m, rows.into_iter().flatten().collect());
    Ok(system.nullity())
}

/// Free-parameter bound `M^{2D}·(2/n²)^d` next to the usual count `M^{2D}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterBound {
    pub max_width: usize,
    pub depth: usize,
    pub degree: usize,
    /// Exponent applied to `2/n²` (`d` for invariant models, `D` for
    /// equivariant ones).
    pub tied_layers: usize,
    /// `M^{2D}` as a decimal string.
    pub usual: String,
    /// Exact bound as a reduced fraction string.
    pub bound: String,
    /// Bound as `f64` (may be `inf` when out of range).
    pub bound_f64: f64,
    /// Set when `bound_f64` had to saturate.
    pub saturated: bool,
    pub exact_count: Option<usize>,
    pub within_bound: Option<bool>,
}

/// Evaluates the bound for a net with layer `widths` (input first), acting
/// group `Sₙ`, and `tied_layers` equivariant layers. For an equivariant model
/// pass `tied_layers = widths.len() - 1`.
pub fn parameter_bound(
    widths: &[usize],
    n: usize,
    tied_layers: usize,
    exact_count: Option<usize>,
) -> Result<ParameterBound> {
    if widths.len() < 2 {
        return Err(Error::Architecture("need at least an input and an output width".into()));
    }
    if n == 0 {
        return Err(Error::Config("group degree must be positive".into()));
    }
    let depth = widths.len() - 1;
    if tied_layers > depth {
        return Err(Error::Config(format!(
            "{tied_layers} tied layers exceed depth {depth}"
        )));
    }
    let max_width = *widths.iter().max().expect("non-empty");
    let usual = BigUint::from(max_width).pow((2 * depth) as u32);
    let factor = BigRational::new(2u32.into(), (n * n).into());
    let mut bound = BigRational::from_integer(usual.clone().into());
    for _ in 0..tied_layers {
        bound *= factor.clone();
    }
    let (numer, denom) = (bound.numer().to_f64(), bound.denom().to_f64());
    let (bound_f64, saturated) = match (numer, denom) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && b != 0.0 => (a / b, false),
        _ => (f64::INFINITY, true),
    };
    let within_bound = exact_count.map(|c| {
        BigRational::from_integer(c.into()) <= bound || bound.is_zero() && c == 0
    });
    Ok(ParameterBound {
        max_width,
        depth,
        degree: n,
        tied_layers,
        usual: usual.to_string(),
        bound: if bound.denom().is_one() {
            bound.numer().to_string()
        } else {
            format!("{}/{}", bound.numer(), bound.denom())
        },
        bound_f64,
        saturated,
        exact_count,
        within_bound,
    })
}
