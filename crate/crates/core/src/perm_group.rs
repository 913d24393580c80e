//! Finite permutation groups given by explicit element lists.
//!
//! Conventions used throughout the crate:
//!
//! * indices are 0-based;
//! * `p.compose(&q)` is `p ∘ q`, i.e. `q` is applied first;
//! * a group element `σ` moves the value sitting at index `i` to index `σ(i)`,
//!   so on vectors `(σ·x)[i] = x[σ⁻¹(i)]`. With this convention
//!   `(σ∘τ)·x = σ·(τ·x)`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::{GroupAction, IndexScheme};
use crate::error::{Error, Result};

/// Default cap on the number of group elements (|S₇| = 5040, doubled).
pub const DEFAULT_GROUP_CAP: usize = 10080;

/// A bijection of `0..n` stored as its image table.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    pub(crate) images: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &v in &images {
            if v >= n || seen[v] {
                return Err(Error::NotABijection { degree: n });
            }
            seen[v] = true;
        }
        Ok(Self { images })
    }

    /// The transposition swapping `a` and `b` (identity when `a == b`).
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        for i in [a, b] {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, bound: n });
            }
        }
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Ok(Self { images })
    }

    /// Builds `c₁ ∘ c₂ ∘ …` from cycles; each cycle `(a b c)` maps a→b→c→a.
    pub fn from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut result = Self::identity(n);
        for cycle in cycles {
            let mut images: Vec<usize> = (0..n).collect();
            let mut seen = vec![false; n];
            for (k, &a) in cycle.iter().enumerate() {
                if a >= n {
                    return Err(Error::IndexOutOfRange { index: a, bound: n });
                }
                if seen[a] {
                    return Err(Error::Parse(format!("index {a} repeated inside a cycle")));
                }
                seen[a] = true;
                images[a] = cycle[(k + 1) % cycle.len()];
            }
            result = result.compose_unchecked(&Self { images });
        }
        Ok(result)
    }

    /// Parses cycle notation such as `"(0 1)(2 3)"`; `"()"` or `""` is the identity.
    pub fn parse_cycles(n: usize, text: &str) -> Result<Self> {
        let mut cycles = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::Parse(format!("expected '(' in {text:?}")))?;
            let close = open
                .find(')')
                .ok_or_else(|| Error::Parse(format!("unbalanced parenthesis in {text:?}")))?;
            let cycle = open[..close]
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad index {s:?} in {text:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if !cycle.is_empty() {
                cycles.push(cycle);
            }
            rest = open[close + 1..].trim_start();
        }
        Self::from_cycles(n, &cycles)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch {
                expected: self.degree(),
                found: other.degree(),
            });
        }
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Self) -> Self {
        Self {
            images: other.images.iter().map(|&j| self.images[j]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.degree()];
        for (i, &v) in self.images.iter().enumerate() {
            images[v] = i;
        }
        Self { images }
    }

    /// `(σ·x)[i] = x[σ⁻¹(i)]`, i.e. the entry at `i` moves to `σ(i)`.
    pub fn act_on_slice<T: Clone>(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.degree() {
            return Err(Error::SizeMismatch {
                expected: self.degree(),
                found: x.len(),
            });
        }
        let mut out = x.to_vec();
        for (i, v) in x.iter().enumerate() {
            out[self.images[i]] = v.clone();
        }
        Ok(out)
    }

    /// Disjoint-cycle decomposition, omitting fixed points.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.degree()];
        let mut out = Vec::new();
        for start in 0..self.degree() {
            if seen[start] || self.images[start] == start {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut j = self.images[start];
            while j != start {
                seen[j] = true;
                cycle.push(j);
                j = self.images[j];
            }
            out.push(cycle);
        }
        out
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Self::from_images(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            write!(f, "(")?;
            for (k, v) in c.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{v}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// JSON description of a group: `{"degree": n, "generators": [[images...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub degree: usize,
    pub generators: Vec<Vec<usize>>,
}

impl GroupSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Parse("empty group specification".into()));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<PermutationGroup> {
        let gens = self
            .generators
            .iter()
            .map(|g| Permutation::from_images(g.clone()))
            .collect::<Result<Vec<_>>>()?;
        PermutationGroup::generate(self.degree, gens)
    }
}

/// A subgroup of `Sₙ` with its full element list.
///
/// Elements are stored in breadth-first discovery order; the identity is
/// always element `0`.
#[derive(Clone, PartialEq, Eq)]
pub struct PermutationGroup {
    degree: usize,
    generators: Vec<Permutation>,
    generator_indices: Vec<usize>,
    elements: Vec<Permutation>,
    index: HashMap<Permutation, usize>,
}

impl fmt::Debug for PermutationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PermutationGroup")
            .field("degree", &self.degree)
            .field("order", &self.order())
            .field("generators", &self.generators)
            .finish()
    }
}

impl PermutationGroup {
    pub fn generate(degree: usize, generators: Vec<Permutation>) -> Result<Self> {
        Self::generate_with_cap(degree, generators, DEFAULT_GROUP_CAP)
    }

    /// Closure of `generators` by breadth-first right multiplication.
    pub fn generate_with_cap(degree: usize, generators: Vec<Permutation>, cap: usize) -> Result<Self> {
        for g in &generators {
            if g.degree() != degree {
                return Err(Error::DegreeMismatch {
                    expected: degree,
                    found: g.degree(),
                });
            }
        }
        let identity = Permutation::identity(degree);
        let mut elements = vec![identity.clone()];
        let mut index = HashMap::from([(identity, 0usize)]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for g in &generators {
                let next = elements[i].compose_unchecked(g);
                if index.contains_key(&next) {
                    continue;
                }
                if elements.len() >= cap {
                    return Err(Error::CapExceeded {
                        what: "group order",
                        limit: cap,
                        requested: elements.len() + 1,
                    });
                }
                index.insert(next.clone(), elements.len());
                queue.push_back(elements.len());
                elements.push(next);
            }
        }
        let generator_indices = generators.iter().map(|g| index[g]).collect();
        Ok(Self {
            degree,
            generators,
            generator_indices,
            elements,
            index,
        })
    }

    /// Builds a group from a list already known to be closed; generators are
    /// extracted greedily.
    fn from_closed_elements(degree: usize, mut elements: Vec<Permutation>) -> Self {
        let identity = Permutation::identity(degree);
        if let Some(pos) = elements.iter().position(|e| *e == identity) {
            elements.swap(0, pos);
        }
        let index: HashMap<Permutation, usize> = elements
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        let mut generators: Vec<Permutation> = Vec::new();
        let mut reached = HashMap::from([(identity, ())]);
        for e in &elements {
            if reached.contains_key(e) {
                continue;
            }
            generators.push(e.clone());
            let sub = Self::generate_with_cap(degree, generators.clone(), usize::MAX)
                .expect("uncapped closure");
            reached = sub.elements.into_iter().map(|p| (p, ())).collect();
        }
        let generator_indices = generators.iter().map(|g| index[g]).collect();
        Self {
            degree,
            generators,
            generator_indices,
            elements,
            index,
        }
    }

    pub fn trivial(n: usize) -> Self {
        Self::generate(n, Vec::new()).expect("trivial group fits any cap")
    }

    pub fn symmetric(n: usize) -> Result<Self> {
        let mut gens = Vec::new();
        if n >= 2 {
            gens.push(Permutation::transposition(n, 0, 1)?);
        }
        if n >= 3 {
            gens.push(Permutation::from_cycles(n, &[(0..n).collect()])?);
        }
        Self::generate(n, gens)
    }

    /// Cyclic group generated by the n-cycle `(0 1 … n-1)`.
    pub fn cyclic(n: usize) -> Result<Self> {
        let gens = if n >= 2 {
            vec![Permutation::from_cycles(n, &[(0..n).collect()])?]
        } else {
            Vec::new()
        };
        Self::generate(n, gens)
    }

    /// Symmetries of a regular n-gon with vertices `0..n` in cyclic order.
    pub fn dihedral(n: usize) -> Result<Self> {
        let mut gens = Vec::new();
        if n >= 2 {
            gens.push(Permutation::from_cycles(n, &[(0..n).collect()])?);
            let reflection: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
            gens.push(Permutation::from_images(reflection)?);
        }
        Self::generate(n, gens)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Permutation] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Permutation {
        &self.elements[i]
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    /// Element indices of the generators.
    pub fn generator_indices(&self) -> &[usize] {
        &self.generator_indices
    }

    pub fn identity_index(&self) -> usize {
        0
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.index.contains_key(p)
    }

    /// Index of the product `elements[a] ∘ elements[b]`.
    pub fn multiply(&self, a: usize, b: usize) -> usize {
        self.index[&self.elements[a].compose_unchecked(&self.elements[b])]
    }

    pub fn inverse_index(&self, a: usize) -> usize {
        self.index[&self.elements[a].inverse()]
    }

    pub fn to_spec(&self) -> GroupSpec {
        GroupSpec {
            degree: self.degree,
            generators: self.generators.iter().map(|g| g.images().to_vec()).collect(),
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.degree {
            return Err(Error::IndexOutOfRange {
                index: i,
                bound: self.degree,
            });
        }
        Ok(())
    }

    /// `O_i = {σ⁻¹(i) : σ ∈ G}`, sorted ascending.
    pub fn orbit(&self, i: usize) -> Result<Vec<usize>> {
        self.check_index(i)?;
        let mut seen = vec![false; self.degree];
        seen[i] = true;
        let mut stack = vec![i];
        while let Some(p) = stack.pop() {
            for g in &self.generators {
                // generator images suffice: inverses are positive powers
                let q = g.apply(p);
                if !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        Ok((0..self.degree).filter(|&p| seen[p]).collect())
    }

    pub fn orbit_decomposition(&self) -> OrbitDecomposition {
        let mut orbit_of = vec![usize::MAX; self.degree];
        let mut orbits = Vec::new();
        for i in 0..self.degree {
            if orbit_of[i] != usize::MAX {
                continue;
            }
            let orbit = self.orbit(i).expect("index in range");
            for &p in &orbit {
                orbit_of[p] = orbits.len();
            }
            orbits.push(orbit);
        }
        OrbitDecomposition::from_orbits(self.degree, orbits, orbit_of)
    }

    /// `Stab_G(i) = {g ∈ G : g(i) = i}`.
    pub fn stabilizer(&self, i: usize) -> Result<PermutationGroup> {
        self.check_index(i)?;
        let elements = self
            .elements
            .iter()
            .filter(|g| g.apply(i) == i)
            .cloned()
            .collect();
        Ok(Self::from_closed_elements(self.degree, elements))
    }

    /// Subgroup fixing every index in `points`.
    pub fn pointwise_stabilizer(&self, points: &[usize]) -> Result<PermutationGroup> {
        for &p in points {
            self.check_index(p)?;
        }
        let elements = self
            .elements
            .iter()
            .filter(|g| points.iter().all(|&p| g.apply(p) == p))
            .cloned()
            .collect();
        Ok(Self::from_closed_elements(self.degree, elements))
    }

    /// Whether every element of `self` lies in `other`.
    pub fn is_subgroup_of(&self, other: &PermutationGroup) -> bool {
        self.degree == other.degree && self.elements.iter().all(|e| other.contains(e))
    }

    /// Canonical right-coset decomposition `G = ⨆ₖ Stab(base)·τₖ` with
    /// `τₖ⁻¹(base) = orbit[k]`; each `τₖ` is the lexicographically smallest
    /// image table among valid candidates.
    pub fn coset_decomposition(&self, base: usize) -> Result<CosetDecomposition> {
        let orbit = self.orbit(base)?;
        let stabilizer = self.stabilizer(base)?;
        let mut representatives: Vec<Option<&Permutation>> = vec![None; orbit.len()];
        for g in &self.elements {
            // τ⁻¹(base) = p  ⟺  τ(p) = base
            let p = g.inverse().apply(base);
            let k = orbit
                .binary_search(&p)
                .map_err(|_| Error::Internal(format!("{p} missing from orbit of {base}")))?;
            match representatives[k] {
                Some(best) if best <= g => {}
                _ => representatives[k] = Some(g),
            }
        }
        let representatives = representatives
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                r.cloned().ok_or_else(|| {
                    Error::Internal(format!("no coset representative for orbit point {}", orbit[k]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CosetDecomposition {
            base,
            orbit,
            stabilizer,
            representatives,
        })
    }

    /// Coset decompositions for the base point of every orbit.
    pub fn all_coset_decompositions(&self) -> Result<Vec<CosetDecomposition>> {
        self.orbit_decomposition()
            .base_points()
            .iter()
            .map(|&b| self.coset_decomposition(b))
            .collect()
    }

    /// The conjugate group `{r ∘ g ∘ r⁻¹}`: the same group with indices
    /// renamed by `relabel` (old index `i` becomes `relabel(i)`).
    pub fn relabeled(&self, relabel: &Permutation) -> Result<PermutationGroup> {
        if relabel.degree() != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: relabel.degree(),
            });
        }
        let inv = relabel.inverse();
        let conj = |g: &Permutation| relabel.compose_unchecked(g).compose_unchecked(&inv);
        let generators: Vec<Permutation> = self.generators.iter().map(conj).collect();
        let elements: Vec<Permutation> = self.elements.iter().map(conj).collect();
        let index = elements.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        Ok(Self {
            degree: self.degree,
            generator_indices: self.generator_indices.clone(),
            generators,
            elements,
            index,
        })
    }

    /// Checks closure, identity, inverses and (exhaustively for small groups,
    /// otherwise on a deterministic sample) associativity.
    pub fn check_axioms(&self) -> std::result::Result<(), String> {
        let id = Permutation::identity(self.degree);
        if self.elements[0] != id {
            return Err("identity is not element 0".into());
        }
        for (a, ga) in self.elements.iter().enumerate() {
            if !self.contains(&ga.inverse()) {
                return Err(format!("inverse of {ga} missing"));
            }
            for gb in &self.elements {
                if !self.contains(&ga.compose_unchecked(gb)) {
                    return Err(format!("product {ga}·{gb} missing"));
                }
            }
            if self.order() <= 24 {
                for gb in &self.elements {
                    for gc in &self.elements {
                        let left = ga.compose_unchecked(gb).compose_unchecked(gc);
                        let right = ga.compose_unchecked(&gb.compose_unchecked(gc));
                        if left != right {
                            return Err(format!("associativity fails at {a}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Realization of the group as permutations of its own element list by
    /// left multiplication: element `g` sends slot `i` to the slot of `g ∘ gᵢ`.
    pub fn cayley_embedding(self: &Arc<Self>) -> GroupAction {
        let tables = self
            .elements
            .iter()
            .map(|g| Permutation {
                images: self
                    .elements
                    .iter()
                    .map(|h| self.index[&g.compose_unchecked(h)])
                    .collect(),
            })
            .collect();
        GroupAction::from_parts(
            Arc::clone(self),
            self.order(),
            tables,
            IndexScheme::flat(self.order()),
        )
    }
}

/// Partition of `0..n` into orbits, with base points and the relabeling that
/// makes every orbit contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitDecomposition {
    orbits: Vec<Vec<usize>>,
    orbit_of: Vec<usize>,
    relabel: Permutation,
}

impl OrbitDecomposition {
    fn from_orbits(n: usize, orbits: Vec<Vec<usize>>, orbit_of: Vec<usize>) -> Self {
        let mut images = vec![0; n];
        let mut next = 0;
        for orbit in &orbits {
            for &p in orbit {
                images[p] = next;
                next += 1;
            }
        }
        Self {
            orbits,
            orbit_of,
            relabel: Permutation { images },
        }
    }

    /// Orbits ordered by base point, each sorted ascending.
    pub fn orbits(&self) -> &[Vec<usize>] {
        &self.orbits
    }

    /// Minimal index of each orbit.
    pub fn base_points(&self) -> Vec<usize> {
        self.orbits.iter().map(|o| o[0]).collect()
    }

    pub fn orbit_of(&self, i: usize) -> usize {
        self.orbit_of[i]
    }

    /// Old index `i` ↦ new index under which orbits occupy consecutive ranges.
    pub fn relabel(&self) -> &Permutation {
        &self.relabel
    }

    pub fn is_contiguous(&self) -> bool {
        self.relabel.is_identity()
    }
}

/// `G = ⨆ₖ Stab(base)·τₖ` with `τₖ⁻¹(base) = orbit[k]`.
///
/// When orbits are contiguous and `base` is the orbit minimum this is the
/// familiar normalization `τₖ⁻¹(base) = base + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetDecomposition {
    base: usize,
    orbit: Vec<usize>,
    stabilizer: PermutationGroup,
    representatives: Vec<Permutation>,
}

impl CosetDecomposition {
    /// Validates a caller-chosen representative system, e.g. the
    /// transpositions `(0 k)` for `Sₙ`.
    pub fn with_representatives(
        group: &PermutationGroup,
        base: usize,
        representatives: Vec<Permutation>,
    ) -> Result<Self> {
        let orbit = group.orbit(base)?;
        if representatives.len() != orbit.len() {
            return Err(Error::SizeMismatch {
                expected: orbit.len(),
                found: representatives.len(),
            });
        }
        for (k, tau) in representatives.iter().enumerate() {
            if !group.contains(tau) {
                return Err(Error::NotInGroup(tau.to_string()));
            }
            if tau.inverse().apply(base) != orbit[k] {
                return Err(Error::Config(format!(
                    "representative {tau} does not send orbit point {} to base {base}",
                    orbit[k]
                )));
            }
        }
        Ok(Self {
            base,
            orbit,
            stabilizer: group.stabilizer(base)?,
            representatives,
        })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn orbit(&self) -> &[usize] {
        &self.orbit
    }

    pub fn stabilizer(&self) -> &PermutationGroup {
        &self.stabilizer
    }

    pub fn representatives(&self) -> &[Permutation] {
        &self.representatives
    }

    /// Position of `point` inside the orbit.
    pub fn position(&self, point: usize) -> Option<usize> {
        self.orbit.binary_search(&point).ok()
    }

    /// The representative `τ` with `τ⁻¹(base) = point`.
    pub fn representative_for(&self, point: usize) -> Option<&Permutation> {
        self.position(point).map(|k| &self.representatives[k])
    }

    /// Writes `g = h ∘ τₖ` with `h ∈ Stab(base)`; returns `(k, h)`.
    pub fn locate(&self, g: &Permutation) -> Result<(usize, Permutation)> {
        if g.degree() != self.stabilizer.degree() {
            return Err(Error::DegreeMismatch {
                expected: self.stabilizer.degree(),
                found: g.degree(),
            });
        }
        let p = g.inverse().apply(self.base);
        let k = self
            .position(p)
            .ok_or_else(|| Error::NotInGroup(g.to_string()))?;
        let h = g.compose_unchecked(&self.representatives[k].inverse());
        if !self.stabilizer.contains(&h) {
            return Err(Error::NotInGroup(g.to_string()));
        }
        Ok((k, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(images: &[usize]) -> Permutation {
        Permutation::from_images(images.to_vec()).unwrap()
    }

    fn fixtures() -> Vec<(&'static str, PermutationGroup, usize)> {
        vec![
            ("S2", PermutationGroup::symmetric(2).unwrap(), 2),
            ("S3", PermutationGroup::symmetric(3).unwrap(), 6),
            ("S4", PermutationGroup::symmetric(4).unwrap(), 24),
            ("C4", PermutationGroup::cyclic(4).unwrap(), 4),
            ("D4", PermutationGroup::dihedral(4).unwrap(), 8),
            (
                "S2 in S3",
                PermutationGroup::generate(3, vec![perm(&[1, 0, 2])]).unwrap(),
                2,
            ),
        ]
    }

    #[test]
    fn cycle_notation() {
        let p = Permutation::parse_cycles(3, "(0 1)(1 2)").unwrap();
        assert_eq!(p.images(), &[1, 2, 0]);
        assert_eq!(p.to_string(), "(0 1 2)");
        assert!(Permutation::parse_cycles(4, "()").unwrap().is_identity());
        assert!(Permutation::parse_cycles(4, "").unwrap().is_identity());
        assert_eq!(Permutation::parse_cycles(4, "(0,3)").unwrap().images(), &[3, 1, 2, 0]);
        assert!(Permutation::parse_cycles(3, "(0 1").is_err());
        assert!(Permutation::parse_cycles(3, "(0 5)").is_err());
        assert!(Permutation::parse_cycles(3, "(0 1 0)").is_err());
        assert!(Permutation::parse_cycles(3, "0 1").is_err());
    }

    #[test]
    fn bijection_is_enforced() {
        assert!(matches!(
            Permutation::from_images(vec![0, 0, 1]),
            Err(Error::NotABijection { degree: 3 })
        ));
        assert!(Permutation::from_images(vec![0, 3, 1]).is_err());
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
        assert_eq!(serde_json::from_str::<Permutation>("[1,0]").unwrap(), perm(&[1, 0]));
    }

    #[test]
    fn slice_action_moves_entries_forward() {
        let s = perm(&[1, 2, 0]);
        assert_eq!(s.act_on_slice(&['a', 'b', 'c']).unwrap(), vec!['c', 'a', 'b']);
        assert!(s.act_on_slice(&[1, 2]).is_err());
    }

    #[test]
    fn orders_and_axioms() {
        for (name, g, order) in fixtures() {
            assert_eq!(g.order(), order, "{name}");
            g.check_axioms().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(g.element(g.identity_index()).is_identity());
            for a in 0..g.order() {
                let inv = g.inverse_index(a);
                assert_eq!(g.multiply(a, inv), 0);
            }
        }
        assert_eq!(PermutationGroup::trivial(5).order(), 1);
        assert_eq!(PermutationGroup::symmetric(5).unwrap().order(), 120);
    }

    #[test]
    fn group_cap() {
        assert!(matches!(
            PermutationGroup::symmetric(8),
            Err(Error::CapExceeded { limit: DEFAULT_GROUP_CAP, .. })
        ));
        let gens = PermutationGroup::symmetric(4).unwrap().generators().to_vec();
        assert!(PermutationGroup::generate_with_cap(4, gens, 10).is_err());
    }

    #[test]
    fn orbit_stabilizer() {
        for (name, g, _) in fixtures() {
            for i in 0..g.degree() {
                let o = g.orbit(i).unwrap();
                let s = g.stabilizer(i).unwrap();
                assert_eq!(o.len() * s.order(), g.order(), "{name} point {i}");
                assert!(s.is_subgroup_of(&g));
                s.check_axioms().unwrap();
            }
        }
        let e = PermutationGroup::generate(3, vec![perm(&[1, 0, 2])]).unwrap();
        assert_eq!(e.orbit_decomposition().orbits(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn cosets_partition_the_group() {
        for (name, g, _) in fixtures() {
            for c in g.all_coset_decompositions().unwrap() {
                for (k, tau) in c.representatives().iter().enumerate() {
                    assert_eq!(tau.inverse().apply(c.base()), c.orbit()[k], "{name}");
                }
                let mut hit = vec![0usize; c.orbit().len()];
                for e in g.elements() {
                    let (k, h) = c.locate(e).unwrap();
                    assert_eq!(h.compose(&c.representatives()[k]).unwrap(), *e);
                    assert_eq!(h.apply(c.base()), c.base());
                    hit[k] += 1;
                }
                assert!(hit.iter().all(|&m| m == c.stabilizer().order()), "{name}");
            }
        }
    }

    #[test]
    fn transposition_representatives() {
        let g = PermutationGroup::symmetric(4).unwrap();
        let reps = (0..4).map(|k| Permutation::transposition(4, 0, k).unwrap()).collect();
        let c = CosetDecomposition::with_representatives(&g, 0, reps).unwrap();
        assert_eq!(c.representative_for(2).unwrap().images(), &[2, 1, 0, 3]);
        let bad = (0..4).map(|_| Permutation::identity(4)).collect();
        assert!(CosetDecomposition::with_representatives(&g, 0, bad).is_err());
    }

    #[test]
    fn canonical_representatives_are_lexicographically_minimal() {
        let g = PermutationGroup::symmetric(3).unwrap();
        let c = g.coset_decomposition(0).unwrap();
        assert_eq!(c.representatives()[0].images(), &[0, 1, 2]);
        assert_eq!(c.representatives()[1].images(), &[1, 0, 2]);
        assert_eq!(c.representatives()[2].images(), &[1, 2, 0]);
    }

    #[test]
    fn non_contiguous_orbits() {
        let g = PermutationGroup::generate(3, vec![perm(&[2, 1, 0])]).unwrap();
        let d = g.orbit_decomposition();
        assert_eq!(d.orbits(), &[vec![0, 2], vec![1]]);
        assert!(!d.is_contiguous());
        let h = g.relabeled(d.relabel()).unwrap();
        assert!(h.orbit_decomposition().is_contiguous());
        assert_eq!(h.order(), 2);
        let c = g.coset_decomposition(0).unwrap();
        assert_eq!(c.representative_for(2).unwrap().images(), &[2, 1, 0]);
    }

    #[test]
    fn group_spec_json() {
        assert!(matches!(GroupSpec::from_json(""), Err(Error::Parse(_))));
        assert!(GroupSpec::from_json("{\"degree\": 3}").is_err());
        let spec = GroupSpec::from_json("{\"degree\": 4, \"generators\": [[1,2,3,0]]}").unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.to_spec(), spec);
        let bad = GroupSpec::from_json("{\"degree\": 3, \"generators\": [[0,0,1]]}").unwrap();
        assert!(bad.build().is_err());
        let short = GroupSpec::from_json("{\"degree\": 3, \"generators\": [[1,0]]}").unwrap();
        assert!(matches!(short.build(), Err(Error::DegreeMismatch { .. })));
    }

    #[test]
    fn cayley_embedding_is_a_faithful_free_action() {
        for (_, g, _) in fixtures() {
            let g = Arc::new(g);
            let c = g.cayley_embedding();
            c.check_homomorphism().unwrap();
            assert!(c.is_injective());
            assert!(c.is_free());
        }
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n).collect::<Vec<usize>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_images(v).unwrap())
    }

    proptest! {
        #[test]
        fn composition_laws(a in arb_perm(6), b in arb_perm(6), c in arb_perm(6)) {
            let ab_c = a.compose(&b).unwrap().compose(&c).unwrap();
            let a_bc = a.compose(&b.compose(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert!(a.compose(&a.inverse()).unwrap().is_identity());
            let x: Vec<usize> = (10..16).collect();
            let lhs = a.compose(&b).unwrap().act_on_slice(&x).unwrap();
            let rhs = a.act_on_slice(&b.act_on_slice(&x).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn cycles_round_trip(a in arb_perm(7)) {
            let back = Permutation::parse_cycles(7, &a.to_string()).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn random_subgroups_satisfy_orbit_stabilizer(a in arb_perm(5), b in arb_perm(5)) {
            let g = PermutationGroup::generate(5, vec![a, b]).unwrap();
            prop_assert_eq!(120 % g.order(), 0);
            for i in 0..5 {
                prop_assert_eq!(g.orbit(i).unwrap().len() * g.stabilizer(i).unwrap().order(), g.order());
            }
        }
    }
}
