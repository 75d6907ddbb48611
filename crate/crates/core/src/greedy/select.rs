use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{norming_functional, Dictionary, Vector};

/// How atoms are scored against a residual `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// `|<r, g>|`; meaningful only for `p = 2`.
    InnerProduct,
    /// `|F_r(g)|`.
    NormingFunctional,
}

/// Weak greedy selection: the smallest index `i` with
/// `s_i >= t * max_j s_j`.
pub fn select_atom(residual: &Vector, dict: &Dictionary, t: f64, mode: ScoreMode) -> Result<usize> {
    if residual.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: residual.len(),
        });
    }
    if residual.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let scores = match mode {
        ScoreMode::InnerProduct => dict.atoms().tr_mul(residual),
        ScoreMode::NormingFunctional => {
            let w = norming_functional(residual, dict.space())?;
            dict.atoms().tr_mul(w.weights())
        }
    };
    pick(scores.as_slice(), t, &[], 0.0).ok_or(Error::DegenerateSystem)
}

/// Applies the selection rule to raw scores, skipping `used` atoms. Returns
/// `None` when the best score is `<= zero_level`.
pub(crate) fn pick(scores: &[f64], t: f64, used: &[bool], zero_level: f64) -> Option<usize> {
    let is_free = |i: usize| !used.get(i).copied().unwrap_or(false);
    let best = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| is_free(i))
        .map(|(_, s)| s.abs())
        .fold(0.0f64, f64::max);
    if !(best > zero_level) {
        return None;
    }
    let threshold = t * best;
    scores
        .iter()
        .enumerate()
        .position(|(i, s)| is_free(i) && s.abs() >= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{normalize_dictionary, SpaceSpec};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_matching_basis_vector() {
        let d = Dictionary::identity(SpaceSpec::new(3, 2.0).unwrap());
        let r = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(select_atom(&r, &d, 1.0, ScoreMode::InnerProduct).unwrap(), 1);
    }

    #[test]
    fn weak_rule_smallest_qualifying() {
        assert_eq!(pick(&[0.9, 1.0, 0.95], 0.9, &[], 0.0), Some(0));
        assert_eq!(pick(&[0.9, 1.0, 0.95], 1.0, &[], 0.0), Some(1));
        assert_eq!(pick(&[0.9, 1.0, 0.95], 0.91, &[], 0.0), Some(1));
        assert_eq!(pick(&[0.9, -1.0, 0.95], 0.94, &[false, true], 0.0), Some(0));
        assert_eq!(pick(&[0.9, -1.0, 0.95], 0.95, &[false, true], 0.0), Some(2));
        assert_eq!(pick(&[1.0, 1.0], 1.0, &[], 0.0), Some(0));
        assert_eq!(pick(&[0.0, 0.0], 1.0, &[], 0.0), None);
    }

    #[test]
    fn zero_residual_is_error() {
        let d = Dictionary::identity(SpaceSpec::new(2, 2.0).unwrap());
        assert_eq!(
            select_atom(&Vector::zeros(2), &d, 1.0, ScoreMode::InnerProduct),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn modes_agree_at_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = SpaceSpec::new(6, 2.0).unwrap();
        for _ in 0..100 {
            let raw = DMatrix::from_fn(6, 10, |_, _| rng.random_range(-1.0..1.0));
            let d = normalize_dictionary(&raw, s).unwrap();
            let r = Vector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let t = rng.random_range(0.5..=1.0);
            assert_eq!(
                select_atom(&r, &d, t, ScoreMode::InnerProduct).unwrap(),
                select_atom(&r, &d, t, ScoreMode::NormingFunctional).unwrap()
            );
        }
    }
}
