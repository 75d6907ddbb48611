use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{binomial, check_budget, Budgets};
use crate::error::{Error, Result};
use crate::projection::{best_approximation, ProjectionOptions};
use crate::space::{pnorm, Dictionary, Vector};

/// Norm in which the best `m`-term error is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxNorm {
    /// The ambient `l_p` norm.
    Space,
    /// `||.||_D = max_g |F_g(.)|`.
    DNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTerm {
    pub sigma: f64,
    pub support: Vec<usize>,
}

/// Exact `sigma_m(f)` by enumerating every support of size `m`.
///
/// Ties are resolved toward the lexicographically smallest support.
pub fn best_m_term_oracle(f: &Vector, dict: &Dictionary, m: usize, norm: ApproxNorm) -> Result<BestTerm> {
    best_m_term_oracle_with_budget(f, dict, m, norm, Budgets::default().best_term_supports)
}

pub fn best_m_term_oracle_with_budget(
    f: &Vector,
    dict: &Dictionary,
    m: usize,
    norm: ApproxNorm,
    budget: u128,
) -> Result<BestTerm> {
    if f.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: f.len(),
        });
    }
    let n = dict.n_atoms();
    let m = m.min(n);
    check_budget(binomial(n, m), budget)?;
    let p = dict.space().p();
    // F_g(f) and F_g(g_i) for every atom g
    let dual_f = dict.dual_scores(f);
    let dual_atoms = dict.duals().tr_mul(dict.atoms());
    let opts = ProjectionOptions::default();

    let mut best: Option<BestTerm> = None;
    for support in (0..n).combinations(m) {
        let sigma = match norm {
            ApproxNorm::Space => {
                best_approximation(f, &dict.columns(&support), p, &opts, None)?.residual_norm
            }
            ApproxNorm::DNorm => {
                let rows = dual_atoms.select_columns(&support);
                minimax(&rows, &dual_f)
            }
        };
        let improves = match &best {
            None => true,
            Some(b) => sigma < b.sigma - 1e-12 * b.sigma.max(1.0),
        };
        if improves {
            best = Some(BestTerm { sigma, support });
        }
    }
    let mut best = best.expect("at least one support");
    if m == 0 {
        best.sigma = match norm {
            ApproxNorm::Space => pnorm(f.as_slice(), p),
            ApproxNorm::DNorm => dual_f.amax(),
        };
    }
    Ok(best)
}

/// `min_c max_g |b_g - a_g . c|` for the rows `a_g` of `a`.
///
/// The epigraph LP attains its optimum at a vertex where `m + 1` of the
/// constraints `s = sigma_g (b_g - a_g . c)` are tight, so enumerating all
/// `(m + 1)`-row subsets and sign patterns and evaluating the objective at
/// each solution yields the exact minimum.
fn minimax(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let rows = a.nrows();
    let m = a.ncols();
    let objective = |c: &DVector<f64>| (b - a * c).amax();
    if m == 0 {
        return b.amax();
    }
    let mut best = objective(&DVector::zeros(m));
    if rows <= m {
        if let Some(c) = a.clone().full_piv_lu().solve(b) {
            best = best.min(objective(&c));
        }
        return best;
    }
    let mut sys = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for subset in (0..rows).combinations(m + 1) {
        for signs in 0u32..(1 << m) {
            for (k, &g) in subset.iter().enumerate() {
                let sigma = if k > 0 && signs >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 };
                for j in 0..m {
                    sys[(k, j)] = sigma * a[(g, j)];
                }
                sys[(k, m)] = 1.0;
                rhs[k] = sigma * b[g];
            }
            let lu = sys.clone().full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            if let Some(sol) = lu.solve(&rhs) {
                let c = sol.rows(0, m).into_owned();
                if c.iter().all(|x| x.is_finite()) {
                    best = best.min(objective(&c));
                }
            }
        }
    }
    best
}
