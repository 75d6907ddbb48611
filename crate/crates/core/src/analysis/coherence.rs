use crate::error::{Error, Result};
use crate::space::{Dictionary, Vector};

/// `M(D) = max_{g != h} |F_g(h)|` over ordered pairs of atoms.
pub fn coherence(dict: &Dictionary) -> Result<f64> {
    if dict.n_atoms() < 2 {
        return Err(Error::TooFewAtoms { needed: 2 });
    }
    let cross = dict.duals().tr_mul(dict.atoms());
    let mut m = 0.0f64;
    for j in 0..cross.ncols() {
        for i in 0..cross.nrows() {
            if i != j {
                m = m.max(cross[(i, j)].abs());
            }
        }
    }
    Ok(m)
}

/// `||f||_D = max_g |F_g(f)|`.
pub fn d_norm(f: &Vector, dict: &Dictionary) -> Result<f64> {
    if f.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: f.len(),
        });
    }
    Ok(dict.dual_scores(f).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{lp_norm, norming_functional, normalize_dictionary, SpaceSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn identity_is_incoherent() {
        let d = Dictionary::identity(SpaceSpec::new(4, 2.0).unwrap());
        assert_eq!(coherence(&d).unwrap(), 0.0);
    }

    #[test]
    fn hilbert_pair() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let raw = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, h, h]);
        let d = normalize_dictionary(&raw, SpaceSpec::new(2, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(coherence(&d).unwrap(), h, epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_pair_l4() {
        let s = SpaceSpec::new(2, 4.0).unwrap();
        let raw = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let d = normalize_dictionary(&raw, s).unwrap();
        let g1 = d.atom(0);
        let g2 = d.atom(1);
        let a = norming_functional(&g1, &s).unwrap().apply(&g2).abs();
        let b = norming_functional(&g2, &s).unwrap().apply(&g1).abs();
        // F_{e1}(g2) = 2^{-1/4}, F_{g2}(e1) = 2^{-3/4}
        assert_abs_diff_eq!(a, 2f64.powf(-0.25), epsilon = 1e-14);
        assert_abs_diff_eq!(b, 2f64.powf(-0.75), epsilon = 1e-14);
        assert_abs_diff_eq!(coherence(&d).unwrap(), a.max(b), epsilon = 1e-15);
    }

    #[test]
    fn single_atom_rejected() {
        let raw = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let d = normalize_dictionary(&raw, SpaceSpec::new(2, 2.0).unwrap()).unwrap();
        assert_eq!(coherence(&d), Err(Error::TooFewAtoms { needed: 2 }));
    }

    #[test]
    fn d_norm_examples() {
        let d = Dictionary::identity(SpaceSpec::new(3, 2.0).unwrap());
        assert_eq!(d_norm(&Vector::zeros(3), &d).unwrap(), 0.0);
        assert_eq!(d_norm(&Vector::from_vec(vec![3.0, 1.0, 0.0]), &d).unwrap(), 3.0);
    }

    fn dict_strategy() -> impl Strategy<Value = (Dictionary, Vec<f64>)> {
        (2usize..6, 2usize..7, prop::sample::select(vec![2.0, 3.0, 4.0])).prop_flat_map(
            |(m, n, p)| {
                (
                    prop::collection::vec(-1.0f64..1.0, m * n),
                    prop::collection::vec(-3.0f64..3.0, 3 * m),
                    Just((m, n, p)),
                )
                    .prop_filter_map("degenerate", |(raw, f, (m, n, p))| {
                        let raw = DMatrix::from_vec(m, n, raw);
                        if raw.column_iter().any(|c| c.amax() < 1e-3) {
                            return None;
                        }
                        let d = normalize_dictionary(&raw, SpaceSpec::new(m, p).unwrap()).ok()?;
                        Some((d, f))
                    })
            },
        )
    }

    proptest! {
        #[test]
        fn coherence_permutation_and_sign_invariant((d, _) in dict_strategy(), rot in 0usize..10) {
            let n = d.n_atoms();
            let mut perm = d.atoms().clone();
            for j in 0..n {
                let src = d.atoms().column((j + rot) % n);
                let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                perm.column_mut(j).copy_from(&(src * sign));
            }
            let d2 = Dictionary::from_normalized(perm, *d.space(), 1e-12).unwrap();
            prop_assert!((coherence(&d).unwrap() - coherence(&d2).unwrap()).abs() <= 1e-14);
            prop_assert!(coherence(&d).unwrap() <= 1.0 + 1e-12);
        }

        #[test]
        fn d_norm_is_a_norm((d, v) in dict_strategy(), alpha in -5.0f64..5.0) {
            let m = d.dim();
            let f = Vector::from_column_slice(&v[..m]);
            let g = Vector::from_column_slice(&v[m..2 * m]);
            let nf = d_norm(&f, &d).unwrap();
            prop_assert!((d_norm(&(&f * alpha), &d).unwrap() - alpha.abs() * nf).abs() <= 1e-10);
            prop_assert!(d_norm(&(&f + &g), &d).unwrap() <= nf + d_norm(&g, &d).unwrap() + 1e-10);
            prop_assert!(nf <= lp_norm(&f, d.space()).unwrap() + 1e-10);
        }
    }
}
