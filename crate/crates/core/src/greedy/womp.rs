use nalgebra::DMatrix;

use super::{check_input, Algorithm, Driver, GreedyConfig, GreedyTrace, IterationState, Pursuit};
use crate::analysis::SparseSignal;
use crate::error::{Error, Result};
use crate::space::{Dictionary, Vector};

/// Rebuild the factorization from scratch after this many updates.
const REFRESH_EVERY: usize = 50;
/// A new atom whose component orthogonal to the current span is shorter
/// than this (atoms have unit norm) is treated as dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Weak Orthogonal Matching Pursuit.
pub fn run_womp(
    f0: &Vector,
    dict: &Dictionary,
    cfg: &GreedyConfig,
    truth: Option<&SparseSignal>,
) -> Result<GreedyTrace> {
    run_womp_observed(f0, dict, cfg, truth, &mut |_| {})
}

pub fn run_womp_observed(
    f0: &Vector,
    dict: &Dictionary,
    cfg: &GreedyConfig,
    truth: Option<&SparseSignal>,
    observer: &mut dyn FnMut(&IterationState<'_>),
) -> Result<GreedyTrace> {
    if !dict.space().is_hilbert() {
        return Err(Error::RequiresHilbert(dict.space().p()));
    }
    check_input(f0, dict.dim())?;
    let mut state = IncrementalQr::new(dict, f0);
    let norm = |v: &Vector| v.norm();
    Driver {
        algorithm: Algorithm::Womp,
        cfg,
        truth,
        norm: &norm,
    }
    .run(f0, &mut state, observer)
}

/// Thin QR of the selected columns, `B = Q R`, grown one column at a time by
/// twice-applied modified Gram-Schmidt.
struct IncrementalQr<'a> {
    dict: &'a Dictionary,
    f0: &'a Vector,
    q: Vec<Vector>,
    r: DMatrix<f64>,
    residual: Vector,
    updates_since_refresh: usize,
}

impl<'a> IncrementalQr<'a> {
    fn new(dict: &'a Dictionary, f0: &'a Vector) -> Self {
        Self {
            dict,
            f0,
            q: Vec::new(),
            r: DMatrix::zeros(0, 0),
            residual: f0.clone(),
            updates_since_refresh: 0,
        }
    }

    fn append(&mut self, atom: usize) -> Result<()> {
        let a = self.dict.atoms().column(atom);
        let k = self.q.len();
        let mut v: Vector = a.into_owned();
        let mut coeffs = Vector::zeros(k);
        for _ in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let h = qj.dot(&v);
                coeffs[j] += h;
                v.axpy(-h, qj, 1.0);
            }
        }
        let rho = v.norm();
        if !(rho > DEPENDENCE_TOL) {
            return Err(Error::DegenerateSystem);
        }
        v /= rho;
        self.r = self.r.clone().resize(k + 1, k + 1, 0.0);
        for j in 0..k {
            self.r[(j, k)] = coeffs[j];
        }
        self.r[(k, k)] = rho;
        let h = v.dot(&self.residual);
        self.residual.axpy(-h, &v, 1.0);
        self.q.push(v);
        Ok(())
    }

    fn refresh(&mut self, selected: &[usize]) -> Result<()> {
        let b = self.dict.columns(selected);
        let qr = b.qr();
        let r = qr.r();
        let k = selected.len();
        let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..k).any(|i| r[(i, i)].abs() <= DEPENDENCE_TOL * diag_max) {
            return Err(Error::DegenerateSystem);
        }
        let q = qr.q();
        self.q = q.column_iter().map(|c| c.into_owned()).collect();
        self.r = r;
        let proj = &q * q.tr_mul(self.f0);
        self.residual = self.f0 - proj;
        self.updates_since_refresh = 0;
        Ok(())
    }

    fn coefficients(&self) -> Result<Vector> {
        let k = self.q.len();
        let mut qtf = Vector::zeros(k);
        for (j, qj) in self.q.iter().enumerate() {
            qtf[j] = qj.dot(self.f0);
        }
        self.r
            .solve_upper_triangular(&qtf)
            .ok_or(Error::DegenerateSystem)
    }
}

impl Pursuit for IncrementalQr<'_> {
    fn scores(&self, residual: &Vector, residual_norm: f64) -> (Vector, f64) {
        (self.dict.atoms().tr_mul(residual), 1e-14 * residual_norm)
    }

    fn refit(&mut self, selected: &[usize], new_atom: usize) -> Result<(Vector, Vector)> {
        self.append(new_atom)?;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= REFRESH_EVERY {
            let mut all = selected.to_vec();
            all.push(new_atom);
            self.refresh(&all)?;
        }
        Ok((self.coefficients()?, self.residual.clone()))
    }
}
