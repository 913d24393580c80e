//! Reynolds averaging of arbitrary maps, used to manufacture exactly
//! invariant or equivariant reference functions.

use crate::perm_group::Permutation;
use crate::scalar::Real;

/// `(1/|H|) Σ_h f(h·x)`.
pub fn symmetrize_invariant<T: Real>(
    elements: &[Permutation],
    f: impl Fn(&[T]) -> T,
) -> impl Fn(&[T]) -> T {
    let elements = elements.to_vec();
    move |x: &[T]| {
        let mut acc = T::zero();
        for h in &elements {
            acc += f(&h.act_on_slice(x).expect("degree matches input"));
        }
        acc / T::from_count(elements.len())
    }
}

/// `(1/|G|) Σ_g g⁻¹·F(g·x)` for the natural action on both sides.
pub fn symmetrize_equivariant<T: Real>(
    elements: &[Permutation],
    f: impl Fn(&[T]) -> Vec<T>,
) -> impl Fn(&[T]) -> Vec<T> {
    let elements = elements.to_vec();
    move |x: &[T]| {
        let mut acc = vec![T::zero(); x.len()];
        for g in &elements {
            let y = f(&g.act_on_slice(x).expect("degree matches input"));
            let back = g.inverse().act_on_slice(&y).expect("output has degree entries");
            acc.iter_mut().zip(back).for_each(|(a, v)| *a += v);
        }
        let k = T::from_count(elements.len());
        acc.into_iter().map(|v| v / k).collect()
    }
}
