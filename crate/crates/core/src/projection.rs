//! Best approximation from a finite-dimensional subspace of `l_p`.
//!
//! For `p = 2` this is ordinary least squares via Householder QR. For `p > 2`
//! the strictly convex objective `sum |f0 - B c|_i^p` is minimized by Newton
//! steps with an exact line search along each step direction; the iteration
//! terminates on the scale-free first-order condition
//! `max_j |F_r(b_j)| <= tol`, where `F_r` is the norming functional of the
//! current residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{norming_weights, pnorm};

/// Relative size of `R`'s smallest diagonal below which columns count as dependent.
const RANK_TOL: f64 = 1e-10;
/// A residual this small relative to `||f0||` is treated as exactly zero.
const ZERO_RESIDUAL_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Bound on the first-order residual `max_j |F_r(b_j)|`.
    pub tol: f64,
    pub max_newton_steps: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_newton_steps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    pub newton_steps: usize,
}

/// Least-squares coefficients of `f0` on the columns of `basis`.
pub fn least_squares(basis: &DMatrix<f64>, f0: &DVector<f64>) -> Result<DVector<f64>> {
    let k = basis.ncols();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    if basis.nrows() < k {
        return Err(Error::DegenerateSystem);
    }
    let qr = basis.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if diag_max == 0.0 || diag_min <= RANK_TOL * diag_max {
        return Err(Error::DegenerateSystem);
    }
    let qtb = qr.q().tr_mul(f0);
    r.solve_upper_triangular(&qtb).ok_or(Error::DegenerateSystem)
}

/// Minimizes `||f0 - basis * c||_p` over `c`.
///
/// `warm` is an optional starting point for `p > 2`; the better of it and
/// the least-squares solution is used.
pub fn best_approximation(
    f0: &DVector<f64>,
    basis: &DMatrix<f64>,
    p: f64,
    opts: &ProjectionOptions,
    warm: Option<&DVector<f64>>,
) -> Result<Projection> {
    if basis.nrows() != f0.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.nrows(),
            found: f0.len(),
        });
    }
    if f0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let ls = least_squares(basis, f0)?;
    if p == 2.0 || basis.ncols() == 0 {
        let residual = f0 - basis * &ls;
        let residual_norm = pnorm(residual.as_slice(), p);
        return Ok(Projection {
            coeffs: ls,
            residual,
            residual_norm,
            newton_steps: 0,
        });
    }

    let mut c = ls;
    if let Some(w) = warm {
        if w.len() == c.len() {
            let r_ls = pnorm((f0 - basis * &c).as_slice(), p);
            let r_w = pnorm((f0 - basis * w).as_slice(), p);
            if r_w < r_ls {
                c = w.clone();
            }
        }
    }

    let f0_norm = pnorm(f0.as_slice(), p);
    let zero_level = ZERO_RESIDUAL_REL * f0_norm.max(f64::MIN_POSITIVE);
    let mut last_cert = f64::INFINITY;
    for step in 0..=opts.max_newton_steps {
        let r = f0 - basis * &c;
        let n = pnorm(r.as_slice(), p);
        if n <= zero_level {
            return Ok(finish(c, r, n, step));
        }
        let u = &r / n;
        let phi = DVector::from_vec(norming_weights(u.as_slice(), p));
        let grad = basis.tr_mul(&phi);
        let cert = grad.amax();
        if cert <= opts.tol {
            return Ok(finish(c, r, n, step));
        }
        last_cert = cert;
        if step == opts.max_newton_steps {
            break;
        }
        let d = newton_direction(basis, &u, &grad, p) * n;
        let v = basis * &d;
        let s = line_search(&r, &v, p);
        if s == 0.0 {
            break;
        }
        c.axpy(s, &d, 1.0);
    }
    Err(Error::SolverStagnation {
        iterations: opts.max_newton_steps,
        residual: last_cert,
    })
}

fn finish(coeffs: DVector<f64>, residual: DVector<f64>, norm: f64, steps: usize) -> Projection {
    Projection {
        coeffs,
        residual,
        residual_norm: norm,
        newton_steps: steps,
    }
}

/// Solves `(p - 1) B^T diag(|u|^{p-2}) B d = B^T phi(u)` for the normalized residual `u`.
fn newton_direction(basis: &DMatrix<f64>, u: &DVector<f64>, grad: &DVector<f64>, p: f64) -> DVector<f64> {
    let mut weighted = basis.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= u[i].abs().powf(p - 2.0);
    }
    let h = basis.tr_mul(&weighted) * (p - 1.0);
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    for ridge in [0.0, 1e-12, 1e-8, 1e-4] {
        let mut hr = h.clone();
        if ridge > 0.0 {
            for i in 0..hr.nrows() {
                hr[(i, i)] += ridge * scale;
            }
        }
        if let Some(ch) = hr.cholesky() {
            let d = ch.solve(grad);
            if d.iter().all(|x| x.is_finite()) {
                return d;
            }
        }
    }
    grad.clone()
}

/// Minimizer over all real `s` of `||r - s v||_p`.
pub(crate) fn best_scalar(r: &DVector<f64>, v: &DVector<f64>, p: f64) -> f64 {
    let up = line_search(r, v, p);
    if up > 0.0 {
        return up;
    }
    let neg = -v;
    -line_search(r, &neg, p)
}

/// Exact minimizer over `s >= 0` of `sum |r_i - s v_i|^p`, found by
/// safeguarded Newton on the derivative, which is increasing in `s`.
fn line_search(r: &DVector<f64>, v: &DVector<f64>, p: f64) -> f64 {
    let deriv = |s: f64| -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (ri, vi) in r.iter().zip(v.iter()) {
            let e = ri - s * vi;
            let a = e.abs();
            d1 -= e.signum() * a.powf(p - 1.0) * vi;
            d2 += (p - 1.0) * a.powf(p - 2.0) * vi * vi;
        }
        (d1, d2)
    };
    let (d0, _) = deriv(0.0);
    if !(d0 < 0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while deriv(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return lo;
        }
    }
    let mut s = if lo == 0.0 { 0.5 * hi } else { lo };
    for _ in 0..200 {
        let (g, h) = deriv(s);
        if g == 0.0 {
            return s;
        }
        if g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let mut next = if h > 0.0 { s - g / h } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * s.abs().max(1e-300) || hi - lo <= 1e-15 * hi {
            return next;
        }
        s = next;
    }
    s
}
