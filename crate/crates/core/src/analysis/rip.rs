use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{binomial, check_budget, Budgets};
use crate::error::{Error, Result};
use crate::space::Dictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethod {
    Exhaustive,
    Sampled,
}

/// Estimate of the isometric constant `delta_S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub sparsity: usize,
    pub delta: f64,
    pub method: RipMethod,
    /// Number of sampled supports; zero for exhaustive estimates.
    pub trials: u64,
}

fn require_hilbert(dict: &Dictionary) -> Result<()> {
    if !dict.space().is_hilbert() {
        return Err(Error::RequiresHilbert(dict.space().p()));
    }
    Ok(())
}

/// `max(lambda_max - 1, 1 - lambda_min)` of the Gram block on `support`.
fn support_deviation(gram: &DMatrix<f64>, support: &[usize]) -> f64 {
    if support.len() == 1 {
        return (gram[(support[0], support[0])] - 1.0).abs();
    }
    let block = gram.select_rows(support).select_columns(support);
    let eig = SymmetricEigen::new(block).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - 1.0).max(1.0 - lo).max(0.0)
}

fn effective_sparsity(dict: &Dictionary, s: usize) -> Result<usize> {
    if s == 0 {
        return Err(Error::InvalidArgument("sparsity S must be >= 1".into()));
    }
    // interlacing: the worst support of size <= S has size exactly min(S, N)
    Ok(s.min(dict.n_atoms()))
}

/// Exact `delta_S` by sweeping every support of size `min(S, N)`.
pub fn rip_constant_exhaustive(dict: &Dictionary, s: usize) -> Result<RipEstimate> {
    rip_constant_exhaustive_with_budget(dict, s, Budgets::default().rip_subsets)
}

pub fn rip_constant_exhaustive_with_budget(
    dict: &Dictionary,
    s: usize,
    budget: u128,
) -> Result<RipEstimate> {
    require_hilbert(dict)?;
    let k = effective_sparsity(dict, s)?;
    let n = dict.n_atoms();
    check_budget(binomial(n, k), budget)?;
    let gram = dict.atoms().tr_mul(dict.atoms());
    let delta = (0..n)
        .combinations(k)
        .map(|sup| support_deviation(&gram, &sup))
        .fold(0.0, f64::max);
    Ok(RipEstimate {
        sparsity: s,
        delta,
        method: RipMethod::Exhaustive,
        trials: 0,
    })
}

/// Lower bound on `delta_S` from `trials` uniformly drawn supports. When
/// `trials` covers every support the exact sweep is run instead.
pub fn rip_lower_bound_sampled(
    dict: &Dictionary,
    s: usize,
    trials: u64,
    seed: u64,
) -> Result<RipEstimate> {
    require_hilbert(dict)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let k = effective_sparsity(dict, s)?;
    let n = dict.n_atoms();
    if trials as u128 >= binomial(n, k) {
        return rip_constant_exhaustive_with_budget(dict, s, u128::MAX);
    }
    let gram = dict.atoms().tr_mul(dict.atoms());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut delta = 0.0f64;
    for _ in 0..trials {
        let mut sup = sample(&mut rng, n, k).into_vec();
        sup.sort_unstable();
        delta = delta.max(support_deviation(&gram, &sup));
    }
    Ok(RipEstimate {
        sparsity: s,
        delta,
        method: RipMethod::Sampled,
        trials,
    })
}

/// `(delta_S, delta_2S, delta_2S <= 3 delta_S + 1e-9)`.
pub fn rip_doubling_check(dict: &Dictionary, s: usize) -> Result<(f64, f64, bool)> {
    let a = rip_constant_exhaustive(dict, s)?.delta;
    let b = rip_constant_exhaustive(dict, 2 * s)?.delta;
    Ok((a, b, b <= 3.0 * a + 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{normalize_dictionary, SpaceSpec};
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn three_atoms() -> Dictionary {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let raw = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, h, h]);
        normalize_dictionary(&raw, SpaceSpec::new(2, 2.0).unwrap()).unwrap()
    }

    /// Brute force: min/max of ||Phi x||^2 over unit x on a fine angle grid
    /// for each pair of atoms.
    fn pair_delta_by_angles(d: &Dictionary) -> f64 {
        let mut worst = 0.0f64;
        for sup in (0..d.n_atoms()).combinations(2) {
            let a = d.atom(sup[0]);
            let b = d.atom(sup[1]);
            for k in 0..20000 {
                let th = k as f64 * std::f64::consts::PI / 20000.0;
                let v = &a * th.cos() + &b * th.sin();
                worst = worst.max((v.norm_squared() - 1.0).abs());
            }
        }
        worst
    }

    #[test]
    fn orthonormal_is_zero() {
        let d = Dictionary::identity(SpaceSpec::new(5, 2.0).unwrap());
        for s in 1..=5 {
            assert_eq!(rip_constant_exhaustive(&d, s).unwrap().delta, 0.0);
            assert_eq!(rip_lower_bound_sampled(&d, s, 3, 1).unwrap().delta, 0.0);
        }
        assert_eq!(rip_doubling_check(&d, 2).unwrap(), (0.0, 0.0, true));
    }

    #[test]
    fn three_atom_pairs() {
        let d = three_atoms();
        let est = rip_constant_exhaustive(&d, 2).unwrap();
        let oracle = pair_delta_by_angles(&d);
        assert_abs_diff_eq!(oracle, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
        assert_abs_diff_eq!(est.delta, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(rip_constant_exhaustive(&d, 1).unwrap().delta, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn doubling_flags_trivial_s1() {
        let (d1, d2, ok) = rip_doubling_check(&three_atoms(), 1).unwrap();
        assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d2, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert!(!ok);
    }

    #[test]
    fn gaussian_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let raw = DMatrix::from_fn(8, 16, |_, _| StandardNormal.sample(&mut rng));
        let d = normalize_dictionary(&raw, SpaceSpec::new(8, 2.0).unwrap()).unwrap();
        let (d2, d4, ok) = rip_doubling_check(&d, 2).unwrap();
        assert!(d4 >= d2);
        assert!(ok, "delta_2 = {d2}, delta_4 = {d4}");
    }

    #[test]
    fn sampled_is_deterministic_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw = DMatrix::from_fn(6, 10, |_, _| StandardNormal.sample(&mut rng));
        let d = normalize_dictionary(&raw, SpaceSpec::new(6, 2.0).unwrap()).unwrap();
        let exact = rip_constant_exhaustive(&d, 3).unwrap();
        let a = rip_lower_bound_sampled(&d, 3, 20, 42).unwrap();
        let b = rip_lower_bound_sampled(&d, 3, 20, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, RipMethod::Sampled);
        assert!(a.delta <= exact.delta + 1e-12);
        let full = rip_lower_bound_sampled(&d, 3, binomial(10, 3) as u64, 1).unwrap();
        assert_eq!(full.delta, exact.delta);
        assert_eq!(full.method, RipMethod::Exhaustive);
    }

    #[test]
    fn errors() {
        let d = Dictionary::identity(SpaceSpec::new(3, 4.0).unwrap());
        assert_eq!(rip_constant_exhaustive(&d, 1), Err(Error::RequiresHilbert(4.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw = DMatrix::from_fn(10, 40, |_, _| StandardNormal.sample(&mut rng));
        let d = normalize_dictionary(&raw, SpaceSpec::new(10, 2.0).unwrap()).unwrap();
        assert!(matches!(
            rip_constant_exhaustive_with_budget(&d, 5, 1000),
            Err(Error::BudgetExceeded { needed: 658008, budget: 1000 })
        ));
    }
}
