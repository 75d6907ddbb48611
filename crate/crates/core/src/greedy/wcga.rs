use super::{check_input, Algorithm, Driver, GreedyConfig, GreedyTrace, IterationState, Pursuit};
use crate::analysis::SparseSignal;
use crate::error::{Error, Result};
use crate::projection::{best_approximation, best_scalar, ProjectionOptions};
use crate::space::{norming_weights, pnorm, Dictionary, Vector};

/// Best `l_p` approximation of `f0` from the span of the listed atoms.
///
/// Returns the coefficients (aligned with `atoms`) and the residual. The
/// result satisfies `|F_r(g_j)| <= tol` for every listed atom unless the
/// residual vanishes.
pub fn chebyshev_project(
    f0: &Vector,
    atoms: &[usize],
    dict: &Dictionary,
    tol: f64,
) -> Result<(Vector, Vector)> {
    check_input(f0, dict.dim())?;
    check_indices(atoms, dict.n_atoms())?;
    let opts = ProjectionOptions {
        tol,
        ..ProjectionOptions::default()
    };
    let pr = best_approximation(f0, &dict.columns(atoms), dict.space().p(), &opts, None)?;
    Ok((pr.coeffs, pr.residual))
}

fn check_indices(atoms: &[usize], n: usize) -> Result<()> {
    if let Some(&bad) = atoms.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("atom index {bad} out of range (N = {n})")));
    }
    let mut sorted = atoms.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DegenerateSystem);
    }
    Ok(())
}

/// Weak Chebyshev Greedy Algorithm.
pub fn run_wcga(
    f0: &Vector,
    dict: &Dictionary,
    cfg: &GreedyConfig,
    truth: Option<&SparseSignal>,
) -> Result<GreedyTrace> {
    run_wcga_observed(f0, dict, cfg, truth, &mut |_| {})
}

pub fn run_wcga_observed(
    f0: &Vector,
    dict: &Dictionary,
    cfg: &GreedyConfig,
    truth: Option<&SparseSignal>,
    observer: &mut dyn FnMut(&IterationState<'_>),
) -> Result<GreedyTrace> {
    check_input(f0, dict.dim())?;
    let p = dict.space().p();
    let mut state = Chebyshev {
        dict,
        f0,
        opts: *cfg.projection(),
        coeffs: Vector::zeros(0),
        residual: f0.clone(),
    };
    let norm = move |v: &Vector| pnorm(v.as_slice(), p);
    Driver {
        algorithm: Algorithm::Wcga,
        cfg,
        truth,
        norm: &norm,
    }
    .run(f0, &mut state, observer)
}

struct Chebyshev<'a> {
    dict: &'a Dictionary,
    f0: &'a Vector,
    opts: ProjectionOptions,
    coeffs: Vector,
    residual: Vector,
}

impl Pursuit for Chebyshev<'_> {
    fn scores(&self, residual: &Vector, residual_norm: f64) -> (Vector, f64) {
        if residual_norm == 0.0 {
            return (Vector::zeros(self.dict.n_atoms()), 0.0);
        }
        let w = Vector::from_vec(norming_weights(residual.as_slice(), self.dict.space().p()));
        (self.dict.atoms().tr_mul(&w), 1e-14)
    }

    fn refit(&mut self, selected: &[usize], new_atom: usize) -> Result<(Vector, Vector)> {
        let p = self.dict.space().p();
        let g = self.dict.atom(new_atom);
        // previous optimum, extended by the best coefficient along the new atom
        let step = best_scalar(&self.residual, &g, p);
        let mut warm = self.coeffs.clone().resize_vertically(selected.len() + 1, 0.0);
        warm[selected.len()] = step;

        let mut all = selected.to_vec();
        all.push(new_atom);
        let pr = best_approximation(self.f0, &self.dict.columns(&all), p, &self.opts, Some(&warm))?;
        self.coeffs = pr.coeffs.clone();
        self.residual = pr.residual.clone();
        Ok((pr.coeffs, pr.residual))
    }
}
