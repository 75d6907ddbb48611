use serde::{Deserialize, Serialize};

use crate::analysis::{
    best_m_term_oracle, coherence, d_norm, incoherence_constant_with_budget, n_of_x,
    nikolskii_constant, rip_constant_exhaustive_with_budget, ApproxNorm, Budgets, SparseSignal,
};
use crate::error::{Error, Result};
use crate::greedy::{run_wcga, run_womp, run_wqoga, GreedyConfig, GreedyTrace};
use crate::space::{lp_norm, smoothness_gamma, Dictionary, Vector};

/// Relative slack (times `||f_0||`) allowed on each checked inequality to
/// absorb rounding in the residual norms.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    /// Diagnostic only; nothing is asserted.
    Report,
}

fn residual_of(f0: &Vector, dict: &Dictionary, trace: &GreedyTrace) -> Vector {
    f0 - dict.synthesize(&trace.selected, &trace.final_coeffs)
}

fn require_depth(k: usize, d: usize) -> Result<usize> {
    if d <= k {
        return Err(Error::InvalidArgument(format!("depth D = {d} leaves no iterations for K = {k}")));
    }
    Ok(d - k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub status: CheckStatus,
    pub sparsity: usize,
    pub depth: usize,
    pub r: f64,
    pub t: f64,
    pub c1: f64,
    /// `None` when some `f_A` lies in the span of a competing set.
    pub u: Option<f64>,
    pub gamma: f64,
    /// `t^2 / (32 gamma C_1^2 U^2)`.
    pub rate: f64,
    /// `||f_0 - f^eps||`.
    pub eps: f64,
    pub residual_norms: Vec<f64>,
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs` over the checked pairs, with its `(k, m)`.
    pub tightest_margin: Option<f64>,
    pub tightest_pair: Option<(usize, usize)>,
}

/// Certifies `C_1` and `U` exhaustively, runs the WCGA and checks
/// `||f_m|| <= ||f_k|| exp(-c_1 (m - k) / K^{2r}) + 2 eps` for every
/// `k < m` with `K + m <= D` reached by the run.
pub fn decay_check(
    f0: &Vector,
    dict: &Dictionary,
    truth: &SparseSignal,
    cfg: &GreedyConfig,
    r: f64,
    budget_d: usize,
) -> Result<DecayReport> {
    let k = truth.sparsity();
    let max_m = require_depth(k, budget_d)?;
    let c1 = nikolskii_constant(truth, dict, r)?;
    let u = incoherence_constant_with_budget(truth, dict, budget_d, Budgets::default().incoherence_evaluations)?;
    let gamma = smoothness_gamma(dict.space());
    let t = cfg.weakness_t();
    let rate = if u.is_finite() {
        t * t / (32.0 * gamma * c1 * c1 * u * u)
    } else {
        0.0
    };
    let eps = lp_norm(&(f0 - truth.synthesize(dict)?), dict.space())?;
    let run_cfg = GreedyConfig::new(t, cfg.max_iterations().min(max_m), cfg.residual_tolerance())?
        .with_projection(*cfg.projection());
    let trace = run_wcga(f0, dict, &run_cfg, Some(truth))?;
    let norms = &trace.residual_norms;
    let scale = (k as f64).powf(2.0 * r);
    let slack = REL_SLACK * norms[0].max(1.0);

    let mut pairs = 0;
    let mut violations = 0;
    let mut tightest: Option<(f64, (usize, usize))> = None;
    for m in 1..norms.len() {
        for kk in 0..m {
            let rhs = norms[kk] * (-rate * (m - kk) as f64 / scale).exp() + 2.0 * eps;
            let margin = rhs - norms[m];
            pairs += 1;
            if margin < -slack {
                violations += 1;
            }
            if tightest.is_none_or(|(best, _)| margin < best) {
                tightest = Some((margin, (kk, m)));
            }
        }
    }
    Ok(DecayReport {
        status: if violations == 0 { CheckStatus::Pass } else { CheckStatus::Fail },
        sparsity: k,
        depth: budget_d,
        r,
        t,
        c1,
        u: u.is_finite().then_some(u),
        gamma,
        rate,
        eps,
        residual_norms: norms.clone(),
        pairs_checked: pairs,
        violations,
        tightest_margin: tightest.map(|x| x.0),
        tightest_pair: tightest.map(|x| x.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LebesgueReport {
    pub status: CheckStatus,
    pub sparsity: usize,
    pub u: f64,
    pub big_c: f64,
    /// `ceil(big_c U^2 ln(U + 1) K^{2r})`.
    pub m_star: usize,
    /// `K + m_star <= D`.
    pub within_depth: bool,
    pub eps: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `||f_{m*}|| / eps`, absent when `eps = 0`.
    pub ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

/// Runs the WCGA for `m*` iterations and compares `||f_{m*}||` with `eps`.
/// With `eps = 0` exact recovery (`<= 1e-9`) is required; otherwise the
/// ratio is checked against `max_ratio` when one is given.
#[allow(clippy::too_many_arguments)]
pub fn lebesgue_check(
    f0: &Vector,
    dict: &Dictionary,
    truth_eps: &SparseSignal,
    cfg: &GreedyConfig,
    r: f64,
    big_c: f64,
    budget_d: usize,
    max_ratio: Option<f64>,
) -> Result<LebesgueReport> {
    if !(big_c > 0.0 && big_c.is_finite()) {
        return Err(Error::InvalidArgument(format!("big_c must be positive, got {big_c}")));
    }
    let k = truth_eps.sparsity();
    require_depth(k, budget_d)?;
    let u = incoherence_constant_with_budget(truth_eps, dict, budget_d, Budgets::default().incoherence_evaluations)?;
    if !u.is_finite() {
        return Err(Error::InvalidArgument("incoherence constant is infinite for this signal".into()));
    }
    let m_real = big_c * u * u * (u + 1.0).ln() * (k as f64).powf(2.0 * r);
    if m_real > 1e7 {
        return Err(Error::InvalidArgument(format!("iteration count {m_real:.3e} is too large")));
    }
    let m_star = (m_real - 1e-9).ceil().max(1.0) as usize;
    let eps = lp_norm(&(f0 - truth_eps.synthesize(dict)?), dict.space())?;
    let run_cfg = GreedyConfig::new(cfg.weakness_t(), m_star, cfg.residual_tolerance())?
        .with_projection(*cfg.projection());
    let trace = run_wcga(f0, dict, &run_cfg, Some(truth_eps))?;
    let residual_norm = trace.final_residual_norm();
    let exact = eps <= REL_SLACK * lp_norm(f0, dict.space())?.max(1.0);
    let ratio = (!exact).then(|| residual_norm / eps);
    let status = match (exact, ratio, max_ratio) {
        (true, _, _) => pass_if(residual_norm <= 1e-9),
        (false, Some(q), Some(limit)) => pass_if(q <= limit),
        _ => CheckStatus::Report,
    };
    Ok(LebesgueReport {
        status,
        sparsity: k,
        u,
        big_c,
        m_star,
        within_depth: k + m_star <= budget_d,
        eps,
        iterations: trace.iterations(),
        residual_norm,
        ratio,
        max_ratio,
    })
}

fn pass_if(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QogaDnormReport {
    pub status: CheckStatus,
    pub m: usize,
    pub coherence: f64,
    /// `1 / (3 M)`; infinite for an orthogonal dictionary.
    pub m_limit: Option<f64>,
    pub d_norm_residual: Option<f64>,
    pub sigma_m: Option<f64>,
    /// `13.5 sigma_m + 1e-9`.
    pub bound: Option<f64>,
}

/// Runs QOGA (`t = 1`) for `m` steps and checks
/// `||f_m||_D <= 13.5 sigma_m(f_0)_D + 1e-9`. Skipped when `m > 1/(3M)`.
pub fn qoga_lebesgue_dnorm_check(f0: &Vector, dict: &Dictionary, m: usize) -> Result<QogaDnormReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let mu = coherence(dict)?;
    let m_limit = (mu > 0.0).then(|| 1.0 / (3.0 * mu));
    let mut report = QogaDnormReport {
        status: CheckStatus::Skipped,
        m,
        coherence: mu,
        m_limit,
        d_norm_residual: None,
        sigma_m: None,
        bound: None,
    };
    if m_limit.is_some_and(|lim| m as f64 > lim) {
        return Ok(report);
    }
    let sigma = best_m_term_oracle(f0, dict, m, ApproxNorm::DNorm)?.sigma;
    let cfg = GreedyConfig::new(1.0, m, 0.0)?;
    let trace = run_wqoga(f0, dict, &cfg, None)?;
    let dn = d_norm(&residual_of(f0, dict, &trace), dict)?;
    let bound = 13.5 * sigma + 1e-9;
    report.status = pass_if(dn <= bound);
    report.d_norm_residual = Some(dn);
    report.sigma_m = Some(sigma);
    report.bound = Some(bound);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm21Row {
    pub c: f64,
    /// `c delta^{1/2} K`.
    pub nu: f64,
    pub n_of_x: usize,
    /// `K + 6 N(x, nu)`.
    pub bound: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm21Report {
    pub status: CheckStatus,
    pub sparsity: usize,
    pub delta_2k: f64,
    pub iterations_to_zero: Option<usize>,
    pub rows: Vec<Thm21Row>,
    /// Smallest `c` for which `K + 6 N(x, c delta^{1/2} K)` covers the
    /// observed iteration count; `None` if no `c` does.
    pub minimal_c: Option<f64>,
}

/// Runs OMP to a zero residual and tabulates the iteration count against
/// `K + 6 N(x, c delta_{2K}^{1/2} K)` for each `c` in `c_grid`.
pub fn theorem21_diagnostic(
    dict: &Dictionary,
    signal: &SparseSignal,
    delta_budget: u128,
    c_grid: &[f64],
) -> Result<Thm21Report> {
    let k = signal.sparsity();
    let delta = rip_constant_exhaustive_with_budget(dict, 2 * k, delta_budget)?.delta;
    let f0 = signal.synthesize(dict)?;
    let tol = 1e-10 * f0.norm().max(1.0);
    let cfg = GreedyConfig::new(1.0, dict.dim().min(dict.n_atoms()), tol)?;
    let trace = run_womp(&f0, dict, &cfg, Some(signal))?;
    let iters = trace.first_below(tol);
    let scale = delta.sqrt() * k as f64;
    let rows = c_grid
        .iter()
        .map(|&c| {
            let nu = c * scale;
            let n = n_of_x(signal, nu);
            let bound = k + 6 * n;
            Thm21Row {
                c,
                nu,
                n_of_x: n,
                bound,
                holds: iters.is_some_and(|it| it <= bound),
            }
        })
        .collect();
    Ok(Thm21Report {
        status: CheckStatus::Report,
        sparsity: k,
        delta_2k: delta,
        iterations_to_zero: iters,
        rows,
        minimal_c: iters.and_then(|it| minimal_c(signal, it, scale)),
    })
}

/// `N(x, nu) >= n` exactly when `nu` reaches the sum of the `n` smallest
/// squared coefficients, which gives the threshold in closed form.
fn minimal_c(signal: &SparseSignal, iterations: usize, scale: f64) -> Option<f64> {
    let k = signal.sparsity();
    let needed = iterations.saturating_sub(k).div_ceil(6);
    if needed == 0 {
        return Some(0.0);
    }
    if needed > k || scale == 0.0 {
        return None;
    }
    let mut sq: Vec<f64> = signal.coeffs().iter().map(|c| c * c).collect();
    sq.sort_by(f64::total_cmp);
    let nu: f64 = sq[..needed].iter().sum();
    Some(nu / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{normalize_dictionary, SpaceSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    #[test]
    fn decay_orthonormal_p2() {
        let d = Dictionary::identity(SpaceSpec::new(12, 2.0).unwrap());
        let x = SparseSignal::new(vec![1, 4, 7], vec![1.0, -0.5, 0.25]).unwrap();
        let f0 = x.synthesize(&d).unwrap();
        let cfg = GreedyConfig::new(1.0, 12, 0.0).unwrap();
        let rep = decay_check(&f0, &d, &x, &cfg, 0.5, 12).unwrap();
        assert_eq!(rep.u, Some(1.0));
        assert_eq!(rep.gamma, 0.5);
        assert_abs_diff_eq!(rep.rate, 1.0 / (16.0 * rep.c1 * rep.c1), epsilon = 1e-15);
        assert_eq!(rep.status, CheckStatus::Pass);
        assert_eq!(rep.eps, 0.0);
        assert!(rep.pairs_checked >= 6);

        let half = GreedyConfig::new(0.5, 12, 0.0).unwrap();
        let rep_half = decay_check(&f0, &d, &x, &half, 0.5, 12).unwrap();
        assert_abs_diff_eq!(rep_half.rate, rep.rate / 4.0, epsilon = 1e-15);
        assert_eq!(rep_half.status, CheckStatus::Pass);
    }

    #[test]
    fn lebesgue_single_atom() {
        let d = Dictionary::identity(SpaceSpec::new(5, 2.0).unwrap());
        let x = SparseSignal::new(vec![2], vec![3.0]).unwrap();
        let f0 = x.synthesize(&d).unwrap();
        let cfg = GreedyConfig::new(1.0, 1, 0.0).unwrap();
        let rep = lebesgue_check(&f0, &d, &x, &cfg, 0.5, 2.0, 5, None).unwrap();
        // U = 1, K = 1: m* = ceil(2 ln 2) = 2
        assert_eq!(rep.m_star, 2);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.status, CheckStatus::Pass);
    }

    #[test]
    fn lebesgue_noisy_ratio() {
        let d = Dictionary::identity(SpaceSpec::new(6, 2.0).unwrap());
        let x = SparseSignal::new(vec![0, 1], vec![1.0, 1.0]).unwrap();
        let mut f0 = x.synthesize(&d).unwrap();
        f0[5] = 0.01;
        let cfg = GreedyConfig::new(1.0, 1, 0.0).unwrap();
        let rep = lebesgue_check(&f0, &d, &x, &cfg, 0.5, 1.0, 6, Some(1.5)).unwrap();
        assert_abs_diff_eq!(rep.eps, 0.01, epsilon = 1e-15);
        assert!(rep.ratio.unwrap() <= 1.0 + 1e-12);
        assert_eq!(rep.status, CheckStatus::Pass);
    }

    #[test]
    fn qoga_orthonormal_matches_sigma() {
        let d = Dictionary::identity(SpaceSpec::new(5, 4.0).unwrap());
        let f0 = Vector::from_vec(vec![0.3, -2.0, 0.1, 1.0, 0.5]);
        let rep = qoga_lebesgue_dnorm_check(&f0, &d, 2).unwrap();
        assert_eq!(rep.status, CheckStatus::Pass);
        assert_eq!(rep.d_norm_residual, Some(0.5));
        assert_abs_diff_eq!(rep.sigma_m.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn qoga_skipped_when_coherent() {
        let raw = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let d = normalize_dictionary(&raw, SpaceSpec::new(2, 2.0).unwrap()).unwrap();
        let rep = qoga_lebesgue_dnorm_check(&Vector::from_vec(vec![1.0, 2.0]), &d, 1).unwrap();
        assert_eq!(rep.status, CheckStatus::Skipped);
        assert!(rep.bound.is_none());
    }

    #[test]
    fn thm21_orthonormal() {
        let d = Dictionary::identity(SpaceSpec::new(8, 2.0).unwrap());
        let x = SparseSignal::new(vec![0, 3, 5], vec![1.0, -1.0, 1.0]).unwrap();
        let rep = theorem21_diagnostic(&d, &x, 1_000_000, &[0.0, 1.0, 10.0]).unwrap();
        assert_eq!(rep.iterations_to_zero, Some(3));
        assert_eq!(rep.delta_2k, 0.0);
        assert!(rep.rows.iter().all(|r| r.holds));
        assert_eq!(rep.minimal_c, Some(0.0));
    }

    #[test]
    fn minimal_c_closed_form() {
        let x = SparseSignal::new(vec![0, 1, 2], vec![1.0, 0.5, 0.25]).unwrap();
        // 4 extra iterations need N >= 1: nu >= 0.0625
        assert_abs_diff_eq!(minimal_c(&x, 7, 0.5).unwrap(), 0.125, epsilon = 1e-15);
        // 7 extra need N >= 2: nu >= 0.0625 + 0.25
        assert_abs_diff_eq!(minimal_c(&x, 10, 1.0).unwrap(), 0.3125, epsilon = 1e-15);
        assert_eq!(minimal_c(&x, 3 + 6 * 3 + 1, 1.0), None);
        assert_eq!(minimal_c(&x, 5, 0.0), None);
    }
}
