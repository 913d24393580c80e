//! Built-in target functions on `ℝⁿ`.

use serde::{Deserialize, Serialize};

use crate::nets::Symmetry;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `Πxᵢ + Σxᵢ²`, invariant under `Sₙ`.
    ProdPlusSumSquares,
    /// `F(x)ᵢ = xᵢ² + Σⱼxⱼ`, equivariant under `Sₙ`.
    SquarePlusSum,
    /// `x₀² + Σⱼxⱼ`, invariant under the stabilizer of 0.
    BaseSquarePlusSum,
    /// `Σxᵢ`.
    Sum,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::ProdPlusSumSquares => "prod_plus_sum_squares",
            Target::SquarePlusSum => "square_plus_sum",
            Target::BaseSquarePlusSum => "base_square_plus_sum",
            Target::Sum => "sum",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Target::ProdPlusSumSquares,
            Target::SquarePlusSum,
            Target::BaseSquarePlusSum,
            Target::Sum,
        ]
        .into_iter()
        .find(|t| t.name() == name)
    }

    pub fn output_dim(&self, n: usize) -> usize {
        match self {
            Target::SquarePlusSum => n,
            _ => 1,
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            Target::SquarePlusSum => Symmetry::Equivariant,
            _ => Symmetry::Invariant,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let sum: f64 = x.iter().sum();
        match self {
            Target::ProdPlusSumSquares => {
                vec![x.iter().product::<f64>() + x.iter().map(|v| v * v).sum::<f64>()]
            }
            Target::SquarePlusSum => x.iter().map(|v| v * v + sum).collect(),
            Target::BaseSquarePlusSum => vec![x[0] * x[0] + sum],
            Target::Sum => vec![sum],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let x = [0.5, 1.0, 0.2];
        assert!((Target::ProdPlusSumSquares.eval(&x)[0] - (0.1 + 0.25 + 1.0 + 0.04)).abs() < 1e-15);
        let f = Target::SquarePlusSum.eval(&x);
        assert!((f[0] - (0.25 + 1.7)).abs() < 1e-15);
        assert!((f[2] - (0.04 + 1.7)).abs() < 1e-15);
        assert_eq!(Target::parse("sum"), Some(Target::Sum));
        assert_eq!(Target::parse("nope"), None);
    }
}
