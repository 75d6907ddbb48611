//! Weak greedy pursuits: WOMP (Hilbert case), WCGA and WQOGA (any `p >= 2`).
//!
//! All three share one loop: score every unused atom against the current
//! residual, take the smallest index whose score reaches `t` times the best
//! score, then refit the coefficients on the selected atoms. They differ in
//! how atoms are scored and how coefficients are refit:
//!
//! | algorithm | score of atom `g`          | refit                                  |
//! |-----------|----------------------------|----------------------------------------|
//! | WOMP      | `|<f_m, g>|`               | orthogonal projection (updated QR)     |
//! | WCGA      | `|F_{f_m}(g)|`             | best `l_p` approximation               |
//! | WQOGA     | `|F_g(f_m)|`               | solve `F_{phi_j}(f - sum c_i phi_i) = 0` |

mod select;
mod wcga;
mod womp;
mod wqoga;

use serde::{Deserialize, Serialize};

use crate::analysis::SparseSignal;
use crate::error::{Error, Result};
use crate::projection::ProjectionOptions;
use crate::space::Vector;

pub use select::{select_atom, ScoreMode};
pub use wcga::{chebyshev_project, run_wcga, run_wcga_observed};
pub use womp::{run_womp, run_womp_observed};
pub use wqoga::{run_wqoga, run_wqoga_observed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    weakness_t: f64,
    max_iterations: usize,
    residual_tolerance: f64,
    #[serde(skip, default)]
    projection: ProjectionOptions,
}

impl GreedyConfig {
    pub fn new(weakness_t: f64, max_iterations: usize, residual_tolerance: f64) -> Result<Self> {
        if !(weakness_t > 0.0 && weakness_t <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "weakness t must lie in (0, 1], got {weakness_t}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if !(residual_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "residual tolerance must be nonnegative, got {residual_tolerance}"
            )));
        }
        Ok(Self {
            weakness_t,
            max_iterations,
            residual_tolerance,
            projection: ProjectionOptions::default(),
        })
    }

    pub fn with_projection(mut self, projection: ProjectionOptions) -> Self {
        self.projection = projection;
        self
    }

    pub fn weakness_t(&self) -> f64 {
        self.weakness_t
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.residual_tolerance
    }

    pub fn projection(&self) -> &ProjectionOptions {
        &self.projection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Womp,
    Wcga,
    Wqoga,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "womp" | "omp" => Ok(Self::Womp),
            "wcga" => Ok(Self::Wcga),
            "wqoga" | "qoga" => Ok(Self::Wqoga),
            other => Err(Error::InvalidArgument(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    DegenerateSystem,
}

/// Record of one pursuit run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub algorithm: Algorithm,
    /// Atom indices in selection order.
    pub selected: Vec<usize>,
    /// `||f_m||` for `m = 0..=iterations`.
    pub residual_norms: Vec<f64>,
    /// `|T \ T^m|` for each `m`, present when the true support was supplied.
    pub gamma_sizes: Option<Vec<usize>>,
    /// Coefficients of the final approximant, aligned with `selected`.
    pub final_coeffs: Vec<f64>,
    pub stop_reason: StopReason,
}

impl GreedyTrace {
    pub fn iterations(&self) -> usize {
        self.selected.len()
    }

    pub fn final_residual_norm(&self) -> f64 {
        *self.residual_norms.last().expect("trace has f_0")
    }

    /// First `m` with `||f_m|| <= level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.residual_norms.iter().position(|&r| r <= level)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// State visible to observers after every completed iteration.
pub struct IterationState<'a> {
    pub iteration: usize,
    pub selected: &'a [usize],
    pub coeffs: &'a Vector,
    pub residual: &'a Vector,
    pub residual_norm: f64,
}

/// `|T \ T^m|` for `m = 0..=iterations`.
pub fn trace_gamma_sizes(trace: &GreedyTrace, truth: &SparseSignal) -> Vec<usize> {
    let support = truth.support();
    let mut remaining = support.len();
    let mut out = Vec::with_capacity(trace.selected.len() + 1);
    out.push(remaining);
    for idx in &trace.selected {
        if support.binary_search(idx).is_ok() {
            remaining -= 1;
        }
        out.push(remaining);
    }
    out
}

pub(crate) fn check_input(f0: &Vector, dim: usize) -> Result<()> {
    if f0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f0.len(),
        });
    }
    if f0.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Shared driver. `refit` receives the new atom index and returns the new
/// coefficients and residual, or `Err(DegenerateSystem)` to stop the run.
pub(crate) struct Driver<'a> {
    pub algorithm: Algorithm,
    pub cfg: &'a GreedyConfig,
    pub truth: Option<&'a SparseSignal>,
    pub norm: &'a dyn Fn(&Vector) -> f64,
}

pub(crate) trait Pursuit {
    /// Selection scores for every atom against `residual`, plus the scale at
    /// which a maximal score counts as zero.
    fn scores(&self, residual: &Vector, residual_norm: f64) -> (Vector, f64);

    fn refit(&mut self, selected: &[usize], new_atom: usize) -> Result<(Vector, Vector)>;
}

impl Driver<'_> {
    pub fn run(
        &self,
        f0: &Vector,
        pursuit: &mut dyn Pursuit,
        observer: &mut dyn FnMut(&IterationState<'_>),
    ) -> Result<GreedyTrace> {
        let tol = self.cfg.residual_tolerance();
        let mut residual = f0.clone();
        let mut norm = (self.norm)(&residual);
        let mut selected: Vec<usize> = Vec::new();
        let mut coeffs = Vector::zeros(0);
        let mut residual_norms = vec![norm];
        let mut stop = StopReason::MaxIterations;
        let mut used = Vec::new();

        if norm <= tol {
            stop = StopReason::Tolerance;
        } else {
            while selected.len() < self.cfg.max_iterations() {
                let (scores, zero_scale) = pursuit.scores(&residual, norm);
                if used.len() < scores.len() {
                    used.resize(scores.len(), false);
                }
                let Some(next) =
                    select::pick(scores.as_slice(), self.cfg.weakness_t(), &used, zero_scale)
                else {
                    stop = StopReason::DegenerateSystem;
                    break;
                };
                match pursuit.refit(&selected, next) {
                    Ok((c, r)) => {
                        selected.push(next);
                        used[next] = true;
                        coeffs = c;
                        residual = r;
                    }
                    Err(Error::DegenerateSystem) => {
                        stop = StopReason::DegenerateSystem;
                        break;
                    }
                    Err(e) => return Err(e),
                }
                norm = (self.norm)(&residual);
                residual_norms.push(norm);
                observer(&IterationState {
                    iteration: selected.len(),
                    selected: &selected,
                    coeffs: &coeffs,
                    residual: &residual,
                    residual_norm: norm,
                });
                if norm <= tol {
                    stop = StopReason::Tolerance;
                    break;
                }
            }
        }

        let mut trace = GreedyTrace {
            algorithm: self.algorithm,
            selected,
            residual_norms,
            gamma_sizes: None,
            final_coeffs: coeffs.iter().copied().collect(),
            stop_reason: stop,
        };
        if let Some(truth) = self.truth {
            trace.gamma_sizes = Some(trace_gamma_sizes(&trace, truth));
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GreedyConfig::new(0.0, 5, 0.0).is_err());
        assert!(GreedyConfig::new(1.1, 5, 0.0).is_err());
        assert!(GreedyConfig::new(0.5, 0, 0.0).is_err());
        assert!(GreedyConfig::new(0.5, 1, -1.0).is_err());
        assert!(GreedyConfig::new(1.0, 1, 0.0).is_ok());
    }

    fn trace(selected: Vec<usize>) -> GreedyTrace {
        let n = selected.len();
        GreedyTrace {
            algorithm: Algorithm::Womp,
            selected,
            residual_norms: vec![1.0; n + 1],
            gamma_sizes: None,
            final_coeffs: vec![0.0; n],
            stop_reason: StopReason::MaxIterations,
        }
    }

    #[test]
    fn gamma_sizes() {
        let truth = SparseSignal::new(vec![1, 4, 7], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(trace_gamma_sizes(&trace(vec![4, 1, 7]), &truth), vec![3, 2, 1, 0]);
        assert_eq!(trace_gamma_sizes(&trace(vec![0, 2, 3, 5]), &truth), vec![3; 5]);
        assert_eq!(trace_gamma_sizes(&trace(vec![4, 9, 7]), &truth), vec![3, 2, 2, 1]);
    }

    #[test]
    fn trace_json_shape() {
        let t = trace(vec![2, 0]);
        let v: serde_json::Value = serde_json::from_str(&t.to_json_line()).unwrap();
        assert_eq!(v["algorithm"], "womp");
        assert_eq!(v["stop_reason"], "max_iterations");
        assert_eq!(v["selected"], serde_json::json!([2, 0]));
        assert!(v["gamma_sizes"].is_null());
    }

    #[test]
    fn algorithm_parse() {
        assert_eq!("wcga".parse::<Algorithm>().unwrap(), Algorithm::Wcga);
        assert_eq!("omp".parse::<Algorithm>().unwrap(), Algorithm::Womp);
        assert!("lasso".parse::<Algorithm>().is_err());
    }
}
