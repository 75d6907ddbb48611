use itertools::Itertools;
use rayon::prelude::*;

use super::{binomial, check_budget, Budgets, SparseSignal};
use crate::error::{Error, Result};
use crate::projection::{best_approximation, ProjectionOptions};
use crate::space::{pnorm, Dictionary};

/// Largest support accepted by the exhaustive `C_1` sweep.
pub const MAX_NIKOLSKII_SUPPORT: usize = 20;

/// Unconditionality constant implied by a Riesz (RIP) bound:
/// `((1 + delta) / (1 - delta))^{1/2}`.
pub fn riesz_to_unconditionality(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
    }
    Ok(((1.0 + delta) / (1.0 - delta)).sqrt())
}

/// `N(x, nu)`: the largest `n` such that the `n` smallest squared
/// coefficients sum to at most `nu`. Every sub-support of size `>= N + 1`
/// then carries energy `> nu`.
pub fn n_of_x(x: &SparseSignal, nu: f64) -> usize {
    let mut sq: Vec<f64> = x.coeffs().iter().map(|c| c * c).collect();
    sq.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut n = 0;
    for v in sq {
        acc += v;
        if acc > nu {
            break;
        }
        n += 1;
    }
    n
}

/// Smallest `C_1` with `sum_{i in A} |x_i| <= C_1 |A|^r ||f_A||` for every
/// nonempty `A` in the support.
pub fn nikolskii_constant(f: &SparseSignal, dict: &Dictionary, r: f64) -> Result<f64> {
    nikolskii_constant_with_budget(f, dict, r, Budgets::default().nikolskii_subsets)
}

pub fn nikolskii_constant_with_budget(
    f: &SparseSignal,
    dict: &Dictionary,
    r: f64,
    budget: u128,
) -> Result<f64> {
    if !(r >= 0.5) {
        return Err(Error::InvalidArgument(format!("r must be >= 1/2, got {r}")));
    }
    f.check_fits(dict)?;
    let k = f.sparsity();
    if k > MAX_NIKOLSKII_SUPPORT {
        return Err(Error::BudgetExceeded {
            needed: 1u128 << k,
            budget: 1u128 << MAX_NIKOLSKII_SUPPORT,
        });
    }
    let subsets = (1u64 << k) - 1;
    check_budget(subsets as u128, budget)?;
    let p = dict.space().p();
    let best = (1..=subsets)
        .into_par_iter()
        .map(|mask| {
            let (idx, coeffs) = f.restrict_mask(mask);
            let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
            let norm = pnorm(dict.synthesize(&idx, &coeffs).as_slice(), p);
            if norm == 0.0 {
                f64::INFINITY
            } else {
                l1 / ((idx.len() as f64).powf(r) * norm)
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Smallest `U` with `||f_A - sum_{i in Lambda} c_i g_i|| >= ||f_A|| / U` for
/// all disjoint `A` (nonempty, inside the support) and `Lambda`, with
/// `|A| + |Lambda| <= D` and all coefficients `c`.
///
/// The residual only shrinks as `Lambda` grows, so only maximal `Lambda`
/// (size `min(D - |A|, N - |A|)`) are evaluated. Returns `f64::INFINITY`
/// when some `f_A` lies in the span of a `Lambda`.
pub fn incoherence_constant(f: &SparseSignal, dict: &Dictionary, d: usize) -> Result<f64> {
    incoherence_constant_with_budget(f, dict, d, Budgets::default().incoherence_evaluations)
}

pub fn incoherence_constant_with_budget(
    f: &SparseSignal,
    dict: &Dictionary,
    d: usize,
    budget: u128,
) -> Result<f64> {
    f.check_fits(dict)?;
    let k = f.sparsity();
    if k > 63 {
        return Err(Error::BudgetExceeded {
            needed: u128::MAX,
            budget,
        });
    }
    let n = dict.n_atoms();
    let masks: Vec<u64> = (1..(1u64 << k))
        .filter(|m| m.count_ones() as usize <= d)
        .collect();
    let lambda_size = |a: usize| (d - a).min(n - a);
    let needed: u128 = masks
        .iter()
        .map(|m| {
            let a = m.count_ones() as usize;
            binomial(n - a, lambda_size(a)).max(1)
        })
        .sum();
    check_budget(needed, budget)?;

    let p = dict.space().p();
    let opts = ProjectionOptions::default();
    let mut jobs: Vec<(u64, Vec<usize>)> = Vec::new();
    for &mask in &masks {
        let (a_idx, _) = f.restrict_mask(mask);
        let rest: Vec<usize> = (0..n).filter(|i| a_idx.binary_search(i).is_err()).collect();
        let l = lambda_size(a_idx.len());
        for lambda in rest.into_iter().combinations(l) {
            jobs.push((mask, lambda));
        }
    }
    let worst = jobs
        .par_iter()
        .map(|(mask, lambda)| -> Result<f64> {
            let (a_idx, a_coeffs) = f.restrict_mask(*mask);
            let fa = dict.synthesize(&a_idx, &a_coeffs);
            let fa_norm = pnorm(fa.as_slice(), p);
            if fa_norm == 0.0 {
                return Ok(f64::INFINITY);
            }
            if lambda.is_empty() {
                return Ok(1.0);
            }
            let pr = best_approximation(&fa, &dict.columns(lambda), p, &opts, None)?;
            if pr.residual_norm == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(fa_norm / pr.residual_norm)
        })
        .try_reduce(|| 1.0, |a, b| Ok(a.max(b)))?;
    Ok(worst.max(1.0))
}
