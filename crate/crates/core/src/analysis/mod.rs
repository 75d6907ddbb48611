//! Dictionary and signal certificates: coherence, RIP constants, the
//! Nikol'skii-type constant `C_1` (assumption A1), the incoherence constant
//! `U` (assumption A2), `N(x, nu)`, the `D`-norm and exact best `m`-term
//! errors.
//!
//! Exhaustive routines enumerate subsets and refuse to run past a
//! combinatorial budget; sampled routines only ever produce lower bounds.

mod best_term;
mod coherence;
mod constants;
mod report;
mod rip;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Dictionary, Vector};

pub use best_term::{best_m_term_oracle, best_m_term_oracle_with_budget, ApproxNorm, BestTerm};
pub use coherence::{coherence, d_norm};
pub use constants::{
    incoherence_constant, incoherence_constant_with_budget, n_of_x, nikolskii_constant,
    nikolskii_constant_with_budget, riesz_to_unconditionality, MAX_NIKOLSKII_SUPPORT,
};
pub use report::{certify, C1Entry, CertificateReport, CertifyRequest, RipEntry, UEntry};
pub use rip::{
    rip_constant_exhaustive, rip_constant_exhaustive_with_budget, rip_doubling_check,
    rip_lower_bound_sampled, RipEstimate, RipMethod,
};

/// Combinatorial limits for the exhaustive sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub rip_subsets: u128,
    pub nikolskii_subsets: u128,
    pub incoherence_evaluations: u128,
    pub best_term_supports: u128,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            rip_subsets: 1_000_000,
            nikolskii_subsets: 1_000_000,
            incoherence_evaluations: 100_000,
            best_term_supports: 100_000,
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub(crate) fn check_budget(needed: u128, budget: u128) -> Result<()> {
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// A `K`-sparse coefficient vector: sorted support `T` and nonzero
/// coefficients `x_i`, `i in T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalFile", into = "SignalFile")]
pub struct SparseSignal {
    support: Vec<usize>,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SignalFile {
    support: Vec<usize>,
    coeffs: Vec<f64>,
}

impl TryFrom<SignalFile> for SparseSignal {
    type Error = Error;

    fn try_from(f: SignalFile) -> Result<Self> {
        SparseSignal::new(f.support, f.coeffs)
    }
}

impl From<SparseSignal> for SignalFile {
    fn from(s: SparseSignal) -> Self {
        SignalFile {
            support: s.support,
            coeffs: s.coeffs,
        }
    }
}

impl SparseSignal {
    /// Pairs need not be sorted; they are reordered by index.
    pub fn new(support: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if support.len() != coeffs.len() {
            return Err(Error::InvalidSignal(format!(
                "{} indices but {} coefficients",
                support.len(),
                coeffs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidSignal("empty support".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite() || **c == 0.0) {
            return Err(Error::InvalidSignal(format!("coefficient {c} is not a finite nonzero")));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(coeffs).collect();
        pairs.sort_by_key(|&(i, _)| i);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSignal("repeated support index".into()));
        }
        let (support, coeffs) = pairs.into_iter().unzip();
        Ok(Self { support, coeffs })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sparsity `K = |T|`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn check_fits(&self, dict: &Dictionary) -> Result<()> {
        match self.support.last() {
            Some(&i) if i >= dict.n_atoms() => Err(Error::InvalidSignal(format!(
                "support index {i} out of range for {} atoms",
                dict.n_atoms()
            ))),
            _ => Ok(()),
        }
    }

    /// `f = sum_{i in T} x_i g_i`.
    pub fn synthesize(&self, dict: &Dictionary) -> Result<Vector> {
        self.check_fits(dict)?;
        Ok(dict.synthesize(&self.support, &self.coeffs))
    }

    /// `f_A` for the positions `mask` (bit `k` selects `support[k]`).
    pub(crate) fn restrict_mask(&self, mask: u64) -> (Vec<usize>, Vec<f64>) {
        (0..self.support.len())
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| (self.support[k], self.coeffs[k]))
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_validation() {
        let s = SparseSignal::new(vec![5, 1, 3], vec![1.0, -2.0, 0.5]).unwrap();
        assert_eq!(s.support(), &[1, 3, 5]);
        assert_eq!(s.coeffs(), &[-2.0, 0.5, 1.0]);
        assert!(SparseSignal::new(vec![], vec![]).is_err());
        assert!(SparseSignal::new(vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseSignal::new(vec![1], vec![0.0]).is_err());
        assert!(SparseSignal::new(vec![1, 2], vec![1.0]).is_err());
    }

    #[test]
    fn signal_json() {
        let s: SparseSignal = serde_json::from_str(r#"{"support":[4,2],"coeffs":[1.5,-1.0]}"#).unwrap();
        assert_eq!(s.support(), &[2, 4]);
        assert!(serde_json::from_str::<SparseSignal>(r#"{"support":[2],"coeffs":[0.0]}"#).is_err());
        let back: SparseSignal = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(60, 30), 118264581564861424);
    }
}
