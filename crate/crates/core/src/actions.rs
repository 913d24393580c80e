//! Concrete group actions on flat index sets.
//!
//! A [`GroupAction`] materializes `φ(σ) ∈ S_m` for every group element. On
//! vectors it acts by `(σ·x)[φ(σ)(p)] = x[p]`, i.e. `(σ·x)[q] = x[φ(σ)⁻¹(q)]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm_group::{CosetDecomposition, GroupSpec, Permutation, PermutationGroup};

/// Upper bound on the number of points an action may act on.
pub const DEFAULT_POINT_CAP: usize = 4096;

/// Mixed-radix description of how structured indices flatten to `0..m`.
///
/// The flat index of `(a₀, a₁, …)` is row-major over `dims`
/// (the last coordinate varies fastest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexScheme {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
}

impl IndexScheme {
    pub fn flat(m: usize) -> Self {
        Self {
            dims: vec![m],
            labels: vec!["point".into()],
        }
    }

    /// `(i₁, …, i_k, j)` for `ℝ^{n^k × a}`.
    pub fn tensor(n: usize, order: usize, channels: usize) -> Self {
        let mut dims = vec![n; order];
        dims.push(channels);
        let mut labels: Vec<String> = (1..=order).map(|k| format!("i{k}")).collect();
        labels.push("channel".into());
        Self { dims, labels }
    }

    /// `(i, j)` for an n-tuple of D-vectors; block `i`, entry `j`.
    pub fn tuple(n: usize, dim: usize) -> Self {
        Self {
            dims: vec![n, dim],
            labels: vec!["vector".into(), "entry".into()],
        }
    }

    /// `(block, entry)` for `n` stacked copies of `ℝⁿ`.
    pub fn stacked(blocks: usize, n: usize) -> Self {
        Self {
            dims: vec![blocks, n],
            labels: vec!["block".into(), "entry".into()],
        }
    }

    /// Appends a channel coordinate to an existing scheme.
    pub fn with_channels(&self, channels: usize) -> Self {
        let mut s = self.clone();
        s.dims.push(channels);
        s.labels.push("channel".into());
        s
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn flatten(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::SizeMismatch {
                expected: self.dims.len(),
                found: idx.len(),
            });
        }
        let mut flat = 0;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, bound: d });
            }
            flat = flat * d + i;
        }
        Ok(flat)
    }

    pub fn unflatten(&self, mut flat: usize) -> Result<Vec<usize>> {
        let size = self.size();
        if flat >= size {
            return Err(Error::IndexOutOfRange {
                index: flat,
                bound: size,
            });
        }
        let mut idx = vec![0; self.dims.len()];
        for (slot, &d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        Ok(idx)
    }
}

/// Homomorphism `φ: G → S_m` stored as one image table per group element
/// (same order as `group.elements()`).
#[derive(Debug, Clone)]
pub struct GroupAction {
    group: Arc<PermutationGroup>,
    points: usize,
    tables: Vec<Permutation>,
    scheme: IndexScheme,
}

/// Witness of a failed homomorphism check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomomorphismViolation {
    pub left: usize,
    pub right: usize,
}

impl GroupAction {
    pub(crate) fn from_parts(
        group: Arc<PermutationGroup>,
        points: usize,
        tables: Vec<Permutation>,
        scheme: IndexScheme,
    ) -> Self {
        debug_assert_eq!(tables.len(), group.order());
        debug_assert_eq!(scheme.size(), points);
        Self {
            group,
            points,
            tables,
            scheme,
        }
    }

    /// Wraps caller-supplied tables after checking shapes and the identity.
    /// The homomorphism property is checked separately.
    pub fn new(group: Arc<PermutationGroup>, tables: Vec<Permutation>) -> Result<Self> {
        if tables.len() != group.order() {
            return Err(Error::SizeMismatch {
                expected: group.order(),
                found: tables.len(),
            });
        }
        let points = tables.first().map_or(0, Permutation::degree);
        for t in &tables {
            if t.degree() != points {
                return Err(Error::DegreeMismatch {
                    expected: points,
                    found: t.degree(),
                });
            }
        }
        if !tables[group.identity_index()].is_identity() {
            return Err(Error::Config("identity does not act trivially".into()));
        }
        Ok(Self::from_parts(group, points, tables, IndexScheme::flat(points)))
    }

    pub fn group(&self) -> &Arc<PermutationGroup> {
        &self.group
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn scheme(&self) -> &IndexScheme {
        &self.scheme
    }

    pub fn tables(&self) -> &[Permutation] {
        &self.tables
    }

    /// `φ(g)` for the group element with index `g`.
    pub fn table(&self, g: usize) -> &Permutation {
        &self.tables[g]
    }

    /// `φ(σ)`.
    pub fn table_of(&self, sigma: &Permutation) -> Result<&Permutation> {
        let g = self
            .group
            .index_of(sigma)
            .ok_or_else(|| Error::NotInGroup(sigma.to_string()))?;
        Ok(&self.tables[g])
    }

    /// Whether `other` is defined over the same group (same element order).
    pub fn same_group(&self, other: &GroupAction) -> bool {
        Arc::ptr_eq(&self.group, &other.group)
            || self.group.elements() == other.group.elements()
    }

    /// `σ·x` for `σ` given by element index. Pure index shuffle.
    pub fn apply_index<T: Clone>(&self, g: usize, x: &[T]) -> Result<Vec<T>> {
        self.tables[g].act_on_slice(x).map_err(|_| Error::SizeMismatch {
            expected: self.points,
            found: x.len(),
        })
    }

    pub fn apply<T: Clone>(&self, sigma: &Permutation, x: &[T]) -> Result<Vec<T>> {
        let g = self
            .group
            .index_of(sigma)
            .ok_or_else(|| Error::NotInGroup(sigma.to_string()))?;
        self.apply_index(g, x)
    }

    /// Exhaustive check of `φ(gh) = φ(g)∘φ(h)` and `φ(e) = id`.
    pub fn check_homomorphism(&self) -> std::result::Result<(), HomomorphismViolation> {
        let e = self.group.identity_index();
        if !self.tables[e].is_identity() {
            return Err(HomomorphismViolation { left: e, right: e });
        }
        for a in 0..self.group.order() {
            for b in 0..self.group.order() {
                let ab = self.group.multiply(a, b);
                if self.tables[ab] != self.tables[a].compose_unchecked(&self.tables[b]) {
                    return Err(HomomorphismViolation { left: a, right: b });
                }
            }
        }
        Ok(())
    }

    /// Distinct elements have distinct tables.
    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.tables.iter().all(|t| seen.insert(t))
    }

    /// No non-identity element fixes any point.
    pub fn is_free(&self) -> bool {
        let e = self.group.identity_index();
        self.tables
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != e)
            .all(|(_, t)| t.images().iter().enumerate().all(|(p, &q)| p != q))
    }

    /// Same action restricted to a subgroup of the acting group.
    pub fn restrict(&self, subgroup: &Arc<PermutationGroup>) -> Result<GroupAction> {
        let tables = subgroup
            .elements()
            .iter()
            .map(|h| self.table_of(h).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(
            Arc::clone(subgroup),
            self.points,
            tables,
            self.scheme.clone(),
        ))
    }

    /// Orbits of the points under this action.
    pub fn point_orbits(&self) -> Vec<Vec<usize>> {
        let mut orbit_of = vec![usize::MAX; self.points];
        let mut orbits = Vec::new();
        for start in 0..self.points {
            if orbit_of[start] != usize::MAX {
                continue;
            }
            let id = orbits.len();
            let mut members = vec![start];
            orbit_of[start] = id;
            let mut k = 0;
            while k < members.len() {
                let p = members[k];
                for &g in self.group.generator_indices() {
                    let q = self.tables[g].apply(p);
                    if orbit_of[q] == usize::MAX {
                        orbit_of[q] = id;
                        members.push(q);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            orbits.push(members);
        }
        orbits
    }

    pub fn to_export(&self) -> ActionExport {
        ActionExport {
            group: self.group.to_spec(),
            points: self.points,
            tables: self.tables.iter().map(|t| t.images().to_vec()).collect(),
        }
    }
}

/// JSON export: `{"group": …, "points": m, "tables": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionExport {
    pub group: GroupSpec,
    pub points: usize,
    pub tables: Vec<Vec<usize>>,
}

fn check_cap(requested: usize, cap: usize) -> Result<()> {
    if requested > cap {
        return Err(Error::CapExceeded {
            what: "action point count",
            limit: cap,
            requested,
        });
    }
    Ok(())
}

/// `σ·x = (x_{σ⁻¹(0)}, …, x_{σ⁻¹(n-1)})`.
pub fn natural_action(group: &Arc<PermutationGroup>) -> GroupAction {
    let n = group.degree();
    GroupAction::from_parts(
        Arc::clone(group),
        n,
        group.elements().to_vec(),
        IndexScheme::flat(n),
    )
}

/// Action on `ℝ^{n^k × a}`: `(i₁,…,i_k,j) ↦ (σ(i₁),…,σ(i_k),j)`, so that
/// `(σ·X)_{i₁…i_k j} = X_{σ⁻¹(i₁)…σ⁻¹(i_k) j}`.
pub fn tensor_action(group: &Arc<PermutationGroup>, order: usize, channels: usize) -> Result<GroupAction> {
    tensor_action_with_cap(group, order, channels, DEFAULT_POINT_CAP)
}

pub fn tensor_action_with_cap(
    group: &Arc<PermutationGroup>,
    order: usize,
    channels: usize,
    cap: usize,
) -> Result<GroupAction> {
    if channels == 0 {
        return Err(Error::Config("tensor action needs at least one channel".into()));
    }
    let n = group.degree();
    let points = u32::try_from(order)
        .ok()
        .and_then(|k| n.checked_pow(k))
        .and_then(|p| p.checked_mul(channels))
        .unwrap_or(usize::MAX);
    check_cap(points, cap)?;
    let scheme = IndexScheme::tensor(n, order, channels);
    let tables = group
        .elements()
        .iter()
        .map(|sigma| {
            let images = (0..points)
                .map(|flat| {
                    let mut idx = scheme.unflatten(flat).expect("flat index in range");
                    for i in idx.iter_mut().take(order) {
                        *i = sigma.apply(*i);
                    }
                    scheme.flatten(&idx).expect("image in range")
                })
                .collect();
            Permutation::from_images(images).expect("tensor relabeling is bijective")
        })
        .collect();
    Ok(GroupAction::from_parts(Arc::clone(group), points, tables, scheme))
}

/// Permutes `n` blocks of length `dim`: `(i, j) ↦ (σ(i), j)`.
pub fn tuple_action(group: &Arc<PermutationGroup>, dim: usize) -> Result<GroupAction> {
    let n = group.degree();
    check_cap(n * dim, DEFAULT_POINT_CAP)?;
    let scheme = IndexScheme::tuple(n, dim);
    let tables = group
        .elements()
        .iter()
        .map(|sigma| {
            let images = (0..n * dim)
                .map(|flat| sigma.apply(flat / dim) * dim + flat % dim)
                .collect();
            Permutation { images }.checked()
        })
        .collect();
    Ok(GroupAction::from_parts(Arc::clone(group), n * dim, tables, scheme))
}

/// Acts on `(p, v)` by `(φ(p), v)`; the channel index is the fastest.
pub fn extend_with_trivial_channels(action: &GroupAction, channels: usize) -> Result<GroupAction> {
    if channels == 0 {
        return Err(Error::Config("at least one channel is required".into()));
    }
    let m = action.points * channels;
    check_cap(m, DEFAULT_POINT_CAP)?;
    let tables = action
        .tables
        .iter()
        .map(|t| {
            let images = (0..m)
                .map(|flat| t.apply(flat / channels) * channels + flat % channels)
                .collect();
            Permutation { images }.checked()
        })
        .collect();
    Ok(GroupAction::from_parts(
        Arc::clone(&action.group),
        m,
        tables,
        action.scheme.with_channels(channels),
    ))
}

/// `copies` blocks of `n` points, each block permuted naturally:
/// `(c, i) ↦ (c, σ(i))`, flat index `c·n + i`.
pub fn union_of_permutations(group: &Arc<PermutationGroup>, copies: usize) -> Result<GroupAction> {
    if copies == 0 {
        return Err(Error::Config("a union of permutations needs at least one copy".into()));
    }
    let n = group.degree();
    check_cap(n * copies, DEFAULT_POINT_CAP)?;
    let tables = group
        .elements()
        .iter()
        .map(|sigma| {
            let images = (0..n * copies)
                .map(|flat| (flat / n) * n + sigma.apply(flat % n))
                .collect();
            Permutation { images }.checked()
        })
        .collect();
    Ok(GroupAction::from_parts(
        Arc::clone(group),
        n * copies,
        tables,
        IndexScheme::stacked(copies, n),
    ))
}

impl Permutation {
    fn checked(self) -> Self {
        debug_assert!(Permutation::from_images(self.images().to_vec()).is_ok());
        self
    }
}

/// The twisting element `σ̃ ∈ Stab(base)` attached to orbit point `point`:
/// `τ_point ∘ σ = σ̃ ∘ τ_{σ⁻¹(point)}`.
///
/// With the transposition representatives `τ_i = (base i)` of `Sₙ` this is
/// `(base i)σ = σ̃ᵢ (base σ⁻¹(i))`.
pub fn sigma_tilde(
    group: &PermutationGroup,
    cosets: &CosetDecomposition,
    sigma: &Permutation,
    point: usize,
) -> Result<Permutation> {
    if !group.contains(sigma) {
        return Err(Error::NotInGroup(sigma.to_string()));
    }
    let tau = cosets.representative_for(point).ok_or(Error::IndexOutOfRange {
        index: point,
        bound: group.degree(),
    })?;
    let source = sigma.inverse().apply(point);
    let tau_source = cosets
        .representative_for(source)
        .ok_or_else(|| Error::Internal(format!("{source} left the orbit of {}", cosets.base())))?;
    let tilde = tau.compose_unchecked(sigma).compose_unchecked(&tau_source.inverse());
    if tilde.apply(cosets.base()) != cosets.base() {
        return Err(Error::Internal(format!("{tilde} does not fix {}", cosets.base())));
    }
    Ok(tilde)
}

/// Coset data for every orbit, indexed by point: entry `p` is the
/// decomposition of the orbit containing `p`.
pub(crate) fn cosets_by_point(
    n: usize,
    cosets: &[CosetDecomposition],
) -> Result<Vec<&CosetDecomposition>> {
    let mut by_point: Vec<Option<&CosetDecomposition>> = vec![None; n];
    for c in cosets {
        for &p in c.orbit() {
            if by_point[p].is_some() {
                return Err(Error::Config(format!("point {p} covered by two orbits")));
            }
            by_point[p] = Some(c);
        }
    }
    by_point
        .into_iter()
        .enumerate()
        .map(|(p, c)| c.ok_or_else(|| Error::Config(format!("point {p} not covered by any orbit"))))
        .collect()
}

/// The induced action `∗` on `n` stacked copies of `ℝⁿ`:
/// block `p` of `σ∗X` is `σ̃_p · (block σ⁻¹(p) of X)`.
///
/// Flat index `p·n + i` holds entry `i` of block `p`.
pub fn induced_star_action(group: &Arc<PermutationGroup>) -> Result<GroupAction> {
    let cosets = group.all_coset_decompositions()?;
    induced_star_action_with(group, &cosets)
}

/// Same as [`induced_star_action`] with caller-chosen coset representatives.
pub fn induced_star_action_with(
    group: &Arc<PermutationGroup>,
    cosets: &[CosetDecomposition],
) -> Result<GroupAction> {
    let n = group.degree();
    check_cap(n * n, DEFAULT_POINT_CAP)?;
    let by_point = cosets_by_point(n, cosets)?;
    let tables = group
        .elements()
        .iter()
        .map(|sigma| {
            // φ(σ)(q, i) = (σ(q), σ̃_{σ(q)}(i))
            let mut images = vec![0; n * n];
            for q in 0..n {
                let p = sigma.apply(q);
                let tilde = sigma_tilde(group, by_point[p], sigma, p)?;
                for i in 0..n {
                    images[q * n + i] = p * n + tilde.apply(i);
                }
            }
            Ok(Permutation { images }.checked())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupAction::from_parts(
        Arc::clone(group),
        n * n,
        tables,
        IndexScheme::stacked(n, n),
    ))
}
