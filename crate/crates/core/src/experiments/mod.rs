//! Seeded experiment drivers: Monte Carlo recovery sweeps, the small
//! coefficient count, and single-instance checks of the decay and
//! Lebesgue-type bounds.
//!
//! Every trial draws from its own ChaCha8 stream seeded with
//! [`mix`]`(base_seed, trial)`, so results do not depend on scheduling.

mod checks;
mod monte_carlo;

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::SparseSignal;
use crate::error::{Error, Result};
use crate::space::{normalize_dictionary, Dictionary, SpaceSpec, Vector};

pub use checks::{
    decay_check, lebesgue_check, qoga_lebesgue_dnorm_check, theorem21_diagnostic, CheckStatus,
    DecayReport, LebesgueReport, QogaDnormReport, Thm21Report, Thm21Row,
};
pub use monte_carlo::{
    mc_recovery, mc_recovery_with_jobs, small_coeff_check, McResult, SmallCoeffReport, TrialRecord,
    CSV_HEADER, GAUSSIAN_NOTE, RECOVERY_TOL,
};

/// SplitMix64 finalizer applied to `base + (trial + 1) * golden`.
pub fn mix(base_seed: u64, trial: u64) -> u64 {
    let mut z = base_seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    /// Uniform on `[-1, 1]`.
    UniformPm1,
    /// `+1` or `-1` with equal probability.
    Rademacher,
    /// Uniform on `[-1, 1] \ (-eps1, eps1)`.
    UniformFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryLaw {
    /// Standard normal entries, columns scaled to unit `l_2` norm. A fresh
    /// dictionary is drawn for every trial.
    GaussianNormalized,
    /// The canonical basis; requires `n_atoms == dim_m`.
    Identity,
    /// One dictionary read from `dictionary_path` and shared by all trials.
    FromFile,
}

/// Monte Carlo configuration. Construct with [`McConfig::new`] and adjust
/// the public fields, then call [`McConfig::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dim_m: usize,
    pub n_atoms: usize,
    pub sparsity_k: usize,
    pub epsilon: f64,
    pub epsilon1: Option<f64>,
    pub trials: u64,
    pub base_seed: u64,
    pub coefficient_law: CoefficientLaw,
    pub dictionary_law: DictionaryLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary_path: Option<PathBuf>,
    /// Levels at which `N(x, nu)` is recorded per trial.
    pub nu_grid: Vec<f64>,
}

impl McConfig {
    pub fn new(dim_m: usize, n_atoms: usize, sparsity_k: usize, epsilon: f64, trials: u64, base_seed: u64) -> Self {
        Self {
            dim_m,
            n_atoms,
            sparsity_k,
            epsilon,
            epsilon1: None,
            trials,
            base_seed,
            coefficient_law: CoefficientLaw::UniformPm1,
            dictionary_law: DictionaryLaw::GaussianNormalized,
            dictionary_path: None,
            nu_grid: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sparsity_k == 0 {
            return bad("sparsity K must be >= 1".into());
        }
        if !(self.sparsity_k <= self.dim_m && self.dim_m <= self.n_atoms) {
            return bad(format!(
                "need K <= M <= N, got K={} M={} N={}",
                self.sparsity_k, self.dim_m, self.n_atoms
            ));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        match (self.coefficient_law, self.epsilon1) {
            (CoefficientLaw::UniformFloor, None) => return bad("uniform_floor requires epsilon1".into()),
            (_, Some(e)) if !(e > 0.0 && e < 1.0) => {
                return bad(format!("epsilon1 must lie in (0, 1), got {e}"))
            }
            _ => {}
        }
        if self.dictionary_law == DictionaryLaw::Identity && self.n_atoms != self.dim_m {
            return bad("identity dictionary requires N == M".into());
        }
        if self.dictionary_law == DictionaryLaw::FromFile && self.dictionary_path.is_none() {
            return bad("from_file dictionary requires a path".into());
        }
        if self.nu_grid.iter().any(|v| !(*v >= 0.0)) {
            return bad("nu values must be nonnegative".into());
        }
        Ok(())
    }

    /// `ceil(K (1 + epsilon))`, guarded against the product landing a few
    /// ulps above an integer.
    pub fn iteration_budget(&self) -> usize {
        (self.sparsity_k as f64 * (1.0 + self.epsilon) - 1e-9).ceil() as usize
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        mix(self.base_seed, trial)
    }
}

/// One generated problem: dictionary, `K`-sparse signal and `f0 = Phi x`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub dict: Dictionary,
    pub signal: SparseSignal,
    pub f0: Vector,
}

/// Draws `k` coefficients according to `law`. Exact zeros are redrawn.
pub fn draw_coefficients<R: Rng>(law: CoefficientLaw, k: usize, eps1: Option<f64>, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| match law {
            CoefficientLaw::Rademacher => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            CoefficientLaw::UniformPm1 => loop {
                let x: f64 = rng.random_range(-1.0..=1.0);
                if x != 0.0 {
                    break x;
                }
            },
            CoefficientLaw::UniformFloor => {
                let lo = eps1.expect("validated");
                let mag: f64 = rng.random_range(lo..=1.0);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect()
}

/// Standard normal `dim x n` matrix with unit `l_p` columns.
pub fn gaussian_dictionary<R: Rng>(dim: usize, n: usize, p: f64, rng: &mut R) -> Result<Dictionary> {
    let raw = DMatrix::from_fn(dim, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    normalize_dictionary(&raw, SpaceSpec::new(dim, p)?)
}

pub(crate) fn load_fixed_dictionary(cfg: &McConfig) -> Result<Option<Dictionary>> {
    if cfg.dictionary_law != DictionaryLaw::FromFile {
        return Ok(None);
    }
    let path = cfg.dictionary_path.as_ref().expect("validated");
    let dict = Dictionary::read_json(path).map_err(|e| Error::Format(format!("{}: {e:#}", path.display())))?;
    if dict.dim() != cfg.dim_m || dict.n_atoms() != cfg.n_atoms {
        return Err(Error::InvalidArgument(format!(
            "dictionary file is {}x{}, config asks for {}x{}",
            dict.dim(),
            dict.n_atoms(),
            cfg.dim_m,
            cfg.n_atoms
        )));
    }
    Ok(Some(dict))
}

/// Generates trial `trial` of `cfg`. Draw order from the trial stream:
/// dictionary entries (column-major), support, coefficients.
pub fn gen_instance(cfg: &McConfig, trial: u64) -> Result<Instance> {
    cfg.validate()?;
    let fixed = load_fixed_dictionary(cfg)?;
    gen_instance_with(cfg, trial, fixed.as_ref())
}

pub(crate) fn gen_instance_with(cfg: &McConfig, trial: u64, fixed: Option<&Dictionary>) -> Result<Instance> {
    if trial >= cfg.trials {
        return Err(Error::InvalidArgument(format!(
            "trial {trial} out of range (trials = {})",
            cfg.trials
        )));
    }
    let seed = cfg.trial_seed(trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dict = match cfg.dictionary_law {
        DictionaryLaw::GaussianNormalized => gaussian_dictionary(cfg.dim_m, cfg.n_atoms, 2.0, &mut rng)?,
        DictionaryLaw::Identity => Dictionary::identity(SpaceSpec::new(cfg.dim_m, 2.0)?),
        DictionaryLaw::FromFile => fixed
            .ok_or_else(|| Error::InvalidArgument("dictionary not loaded".into()))?
            .clone(),
    };
    let mut support = sample(&mut rng, cfg.n_atoms, cfg.sparsity_k).into_vec();
    support.sort_unstable();
    let coeffs = draw_coefficients(cfg.coefficient_law, cfg.sparsity_k, cfg.epsilon1, &mut rng);
    let signal = SparseSignal::new(support, coeffs)?;
    let f0 = signal.synthesize(&dict)?;
    Ok(Instance { seed, dict, signal, f0 })
}

/// Wilson score interval at 95% confidence.
pub fn wilson_ci95(successes: u64, n: u64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}

/// Standard deviation of a binomial frequency estimate.
pub fn binomial_sigma(frequency: f64, n: u64) -> f64 {
    (frequency * (1.0 - frequency) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> McConfig {
        McConfig::new(8, 16, 3, 0.5, 10, 99)
    }

    #[test]
    fn mix_is_a_bijection_on_samples() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|t| mix(1, t)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(mix(1, 0), mix(2, 0));
        // reference value of the SplitMix64 output for state 0 + golden
        assert_eq!(mix(0, 0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn budget_rounding() {
        let mut c = McConfig::new(256, 512, 20, 0.5, 1, 0);
        assert_eq!(c.iteration_budget(), 30);
        c.epsilon = 0.1;
        assert_eq!(c.iteration_budget(), 22);
        c.epsilon = 0.01;
        assert_eq!(c.iteration_budget(), 21);
    }

    #[test]
    fn instances_are_reproducible() {
        let cfg = small_cfg();
        let a = gen_instance(&cfg, 3).unwrap();
        let b = gen_instance(&cfg, 3).unwrap();
        assert_eq!(a.dict.atoms(), b.dict.atoms());
        assert_eq!(a.signal, b.signal);
        assert_eq!(a.f0, b.f0);
        let c = gen_instance(&cfg, 4).unwrap();
        assert_ne!(a.signal, c.signal);
        assert_eq!(a.f0, a.signal.synthesize(&a.dict).unwrap());
    }

    #[test]
    fn coefficient_laws() {
        let mut cfg = small_cfg();
        cfg.coefficient_law = CoefficientLaw::Rademacher;
        for t in 0..10 {
            let inst = gen_instance(&cfg, t).unwrap();
            assert!(inst.signal.coeffs().iter().all(|c| c.abs() == 1.0));
        }
        cfg.coefficient_law = CoefficientLaw::UniformFloor;
        cfg.epsilon1 = Some(0.3);
        for t in 0..10 {
            let inst = gen_instance(&cfg, t).unwrap();
            assert!(inst.signal.coeffs().iter().all(|c| (0.3..=1.0).contains(&c.abs())));
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg();
        assert!(c.validate().is_ok());
        c.sparsity_k = 9;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.coefficient_law = CoefficientLaw::UniformFloor;
        assert!(c.validate().is_err());
        c.epsilon1 = Some(1.0);
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.dictionary_law = DictionaryLaw::Identity;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        assert!(gen_instance(&small_cfg(), 10).is_err());
    }

    #[test]
    fn wilson_interval() {
        let [lo, hi] = wilson_ci95(200, 200);
        assert!(hi == 1.0 && lo > 0.98 && lo < 0.99);
        let [lo, hi] = wilson_ci95(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }
}
