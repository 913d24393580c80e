use std::sync::Arc;

use crate::actions::{cosets_by_point, natural_action};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::perm_group::{CosetDecomposition, PermutationGroup};
use crate::scalar::{Field, Real};

/// `g : ℝⁿ → ℝ^{n²}` whose block `p` is `ReLU(l(τ_p · x))`.
///
/// When `l` commutes with every stabilizer of an orbit base, `g` intertwines
/// the natural action on the input with the induced `∗` action on the
/// output.
#[derive(Debug, Clone)]
pub struct FirstLayerG<T> {
    group: Arc<PermutationGroup>,
    cosets: Vec<CosetDecomposition>,
    l: Matrix<T>,
}

/// Builds `g` from `l` and the coset data of every orbit, rejecting an `l`
/// that is not stabilizer-equivariant beyond `tol`.
pub fn first_layer_g<T: Field>(
    group: &Arc<PermutationGroup>,
    cosets: &[CosetDecomposition],
    l: Matrix<T>,
    tol: f64,
) -> Result<FirstLayerG<T>> {
    let n = group.degree();
    if l.rows() != n || l.cols() != n {
        return Err(Error::SizeMismatch {
            expected: n * n,
            found: l.rows() * l.cols(),
        });
    }
    cosets_by_point(n, cosets)?;
    for c in cosets {
        let stab = Arc::new(c.stabilizer().clone());
        let act = natural_action(&stab);
        let defect = crate::equi_linear::equivariance_defect(&l, &vec![T::zero(); n], &act, &act)?;
        if defect > tol {
            return Err(Error::Architecture(format!(
                "l is not Stab({})-equivariant (defect {defect:e})",
                c.base()
            )));
        }
    }
    Ok(FirstLayerG {
        group: group.clone(),
        cosets: cosets.to_vec(),
        l,
    })
}

impl<T: Field> FirstLayerG<T> {
    pub fn group(&self) -> &Arc<PermutationGroup> {
        &self.group
    }

    pub fn cosets(&self) -> &[CosetDecomposition] {
        &self.cosets
    }

    pub fn linear(&self) -> &Matrix<T> {
        &self.l
    }
}

impl<T: Real> FirstLayerG<T> {
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.group.degree();
        if x.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let by_point = cosets_by_point(n, &self.cosets)?;
        let mut out = Vec::with_capacity(n * n);
        for (p, c) in by_point.iter().enumerate() {
            let tau = c.representative_for(p).expect("point lies in its orbit");
            let moved = tau.act_on_slice(x)?;
            out.extend(self.l.mul_vec(&moved).into_iter().map(|v| v.max(T::zero())));
        }
        Ok(out)
    }
}
