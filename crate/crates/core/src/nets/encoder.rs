use crate::scalar::Field;

/// Moment map `x ↦ (1, x, x², …, x^degree)`.
///
/// Powers are formed by repeated multiplication, so over an exact field the
/// result is exact. Large `|x|` overflows in floating point; inputs are
/// expected in `[0, 1]`.
pub fn ka_encoder<T: Field>(x: T, degree: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(degree + 1);
    let mut p = T::one();
    for _ in 0..degree {
        let next = p.clone() * x.clone();
        out.push(p);
        p = next;
    }
    out.push(p);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::big_ratio;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert_eq!(ka_encoder(0.0f64, 4), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(ka_encoder(1.0f64, 3), vec![1.0; 4]);
        assert_eq!(ka_encoder(7.0f64, 0), vec![1.0]);
    }

    #[test]
    fn half_cubed() {
        assert_eq!(ka_encoder(0.5f64, 3), vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(
            ka_encoder(big_ratio(1, 2), 3),
            vec![big_ratio(1, 1), big_ratio(1, 2), big_ratio(1, 4), big_ratio(1, 8)]
        );
    }

    proptest! {
        #[test]
        fn matches_powi(x in 0.0f64..1.0, d in 0usize..8) {
            let v = ka_encoder(x, d);
            prop_assert_eq!(v.len(), d + 1);
            for (k, e) in v.iter().enumerate() {
                prop_assert!((e - x.powi(k as i32)).abs() <= 1e-15);
            }
        }
    }
}
