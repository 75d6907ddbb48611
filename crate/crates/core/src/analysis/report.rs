use serde::{Deserialize, Serialize};

use super::{
    coherence, incoherence_constant_with_budget, nikolskii_constant_with_budget,
    rip_constant_exhaustive_with_budget, rip_lower_bound_sampled, Budgets, RipMethod, SparseSignal,
};
use crate::error::{Error, Result};
use crate::space::Dictionary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEntry {
    #[serde(rename = "S")]
    pub s: usize,
    /// `None` when the entry was skipped.
    pub delta: Option<f64>,
    /// `"exhaustive"`, `"sampled"` or `"skipped"`.
    pub method: String,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Entry {
    pub r: f64,
    pub value: Option<f64>,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UEntry {
    #[serde(rename = "D")]
    pub d: usize,
    /// `None` when skipped or infinite.
    pub value: Option<f64>,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

/// Measured constants with method provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub coherence: Option<f64>,
    pub rip: Vec<RipEntry>,
    pub c1: Option<C1Entry>,
    pub u: Option<UEntry>,
}

/// What to compute in [`certify`].
#[derive(Debug, Clone, Default)]
pub struct CertifyRequest {
    /// `(S, sampled trials)`; `None` trials requests the exhaustive sweep.
    pub rip: Vec<(usize, Option<u64>)>,
    pub rip_seed: u64,
    pub signal: Option<SparseSignal>,
    pub c1_r: Option<f64>,
    pub u_d: Option<usize>,
    pub budgets: Budgets,
}

fn skipped(e: &Error) -> (String, Option<String>) {
    ("skipped".to_string(), Some(e.to_string()))
}

/// Computes the requested certificates. Budget overruns and inapplicable
/// requests become `"skipped"` entries rather than errors.
pub fn certify(dict: &Dictionary, req: &CertifyRequest) -> Result<CertificateReport> {
    let coherence = coherence(dict).ok();

    let rip = req
        .rip
        .iter()
        .map(|&(s, trials)| {
            let est = match trials {
                None => rip_constant_exhaustive_with_budget(dict, s, req.budgets.rip_subsets),
                Some(t) => rip_lower_bound_sampled(dict, s, t, req.rip_seed),
            };
            match est {
                Ok(e) => RipEntry {
                    s,
                    delta: Some(e.delta),
                    method: match e.method {
                        RipMethod::Exhaustive => "exhaustive".into(),
                        RipMethod::Sampled => "sampled".into(),
                    },
                    trials: e.trials,
                    reason: None,
                },
                Err(e) => {
                    let (method, reason) = skipped(&e);
                    RipEntry {
                        s,
                        delta: None,
                        method,
                        trials: 0,
                        reason,
                    }
                }
            }
        })
        .collect();

    let need_signal = |what: &str| -> Result<&SparseSignal> {
        req.signal
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{what} requires a signal")))
    };

    let c1 = match req.c1_r {
        None => None,
        Some(r) => {
            let sig = need_signal("C1")?;
            Some(match nikolskii_constant_with_budget(sig, dict, r, req.budgets.nikolskii_subsets) {
                Ok(v) => C1Entry {
                    r,
                    value: Some(v).filter(|v| v.is_finite()),
                    method: "exhaustive".into(),
                    reason: None,
                },
                Err(e @ Error::BudgetExceeded { .. }) => {
                    let (method, reason) = skipped(&e);
                    C1Entry { r, value: None, method, reason }
                }
                Err(e) => return Err(e),
            })
        }
    };

    let u = match req.u_d {
        None => None,
        Some(d) => {
            let sig = need_signal("U")?;
            Some(
                match incoherence_constant_with_budget(sig, dict, d, req.budgets.incoherence_evaluations) {
                    Ok(v) => UEntry {
                        d,
                        value: Some(v).filter(|v| v.is_finite()),
                        method: "exhaustive".into(),
                        reason: (!v.is_finite()).then(|| "f_A lies in the span of some Lambda".into()),
                    },
                    Err(e @ Error::BudgetExceeded { .. }) => {
                        let (method, reason) = skipped(&e);
                        UEntry { d, value: None, method, reason }
                    }
                    Err(e) => return Err(e),
                },
            )
        }
    };

    Ok(CertificateReport { coherence, rip, c1, u })
}
