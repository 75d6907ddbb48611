//! Finite-dimensional `l_p` spaces: norms, norming functionals and
//! dictionaries of unit-norm atoms.
//!
//! Everything here assumes `p >= 2`, where the modulus of smoothness obeys
//! `rho(u) <= gamma * u^2` with `gamma = (p - 1) / 2`.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate vector in `l_p^M`.
pub type Vector = DVector<f64>;

/// Tolerance for the unit-norm check on constructed dictionaries.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance applied when reading a dictionary from disk.
pub const FILE_UNIT_NORM_TOL: f64 = 1e-9;

/// The ambient space `l_p^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    dim: usize,
    p: f64,
    gamma: f64,
}

impl SpaceSpec {
    pub fn new(dim: usize, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpace("dim must be >= 1".into()));
        }
        if !p.is_finite() || p < 2.0 {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self {
            dim,
            p,
            gamma: (p - 1.0) / 2.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Smoothness constant `gamma = (p - 1) / 2`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dual exponent `p / (p - 1)`.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn is_hilbert(&self) -> bool {
        self.p == 2.0
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }
}

/// `(sum |f_i|^p)^(1/p)`, scaled by the largest entry so large `p` does not
/// overflow.
pub(crate) fn pnorm(f: &[f64], p: f64) -> f64 {
    let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    if p == 2.0 {
        let s: f64 = f.iter().map(|x| (x / scale) * (x / scale)).sum();
        return scale * s.sqrt();
    }
    let s: f64 = f.iter().map(|x| (x.abs() / scale).powf(p)).sum();
    scale * s.powf(1.0 / p)
}

/// Representer of the norming functional of `f` (caller guarantees `f != 0`).
pub(crate) fn norming_weights(f: &[f64], p: f64) -> Vec<f64> {
    let norm = pnorm(f, p);
    if p == 2.0 {
        return f.iter().map(|x| x / norm).collect();
    }
    f.iter()
        .map(|&x| {
            if x == 0.0 {
                0.0
            } else {
                x.signum() * (x.abs() / norm).powf(p - 1.0)
            }
        })
        .collect()
}

/// `l_p` norm of `f`.
pub fn lp_norm(f: &Vector, space: &SpaceSpec) -> Result<f64> {
    space.check_len(f.len())?;
    Ok(pnorm(f.as_slice(), space.p))
}

/// The unique norming functional `F_f`: `||F_f||_{p'} = 1` and `F_f(f) = ||f||_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormingFunctional {
    weights: Vector,
}

impl NormingFunctional {
    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn apply(&self, g: &Vector) -> f64 {
        self.weights.dot(g)
    }

    pub fn dual_norm(&self, space: &SpaceSpec) -> f64 {
        pnorm(self.weights.as_slice(), space.dual_exponent())
    }
}

pub fn norming_functional(f: &Vector, space: &SpaceSpec) -> Result<NormingFunctional> {
    space.check_len(f.len())?;
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if f.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(NormingFunctional {
        weights: Vector::from_vec(norming_weights(f.as_slice(), space.p)),
    })
}

pub fn smoothness_gamma(space: &SpaceSpec) -> f64 {
    space.gamma()
}

/// A finite dictionary: `dim x N` matrix of unit-norm columns, together with
/// the representers of their norming functionals (the dual dictionary).
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    duals: DMatrix<f64>,
    space: SpaceSpec,
}

impl Dictionary {
    /// Wraps already-normalized atoms, verifying every column norm is within
    /// `tol` of one. Atoms are never rescaled.
    pub fn from_normalized(atoms: DMatrix<f64>, space: SpaceSpec, tol: f64) -> Result<Self> {
        if atoms.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: atoms.nrows(),
            });
        }
        if atoms.ncols() == 0 {
            return Err(Error::TooFewAtoms { needed: 1 });
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        for (j, col) in atoms.column_iter().enumerate() {
            let norm = pnorm(col.as_slice(), space.p());
            if (norm - 1.0).abs() > tol {
                return Err(Error::NotUnitNorm { index: j, norm });
            }
        }
        check_distinct(&atoms)?;
        let mut duals = DMatrix::zeros(atoms.nrows(), atoms.ncols());
        for (j, col) in atoms.column_iter().enumerate() {
            let w = norming_weights(col.as_slice(), space.p());
            duals.column_mut(j).copy_from_slice(&w);
        }
        Ok(Self {
            atoms,
            duals,
            space,
        })
    }

    /// `dim x dim` canonical basis.
    pub fn identity(space: SpaceSpec) -> Self {
        let n = space.dim();
        Self::from_normalized(DMatrix::identity(n, n), space, UNIT_NORM_TOL)
            .expect("canonical basis is a valid dictionary")
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> Vector {
        self.atoms.column(i).into_owned()
    }

    /// Columns are the representers of `F_{g_i}`.
    pub fn duals(&self) -> &DMatrix<f64> {
        &self.duals
    }

    /// `F_{g_i}(v)` for every atom.
    pub fn dual_scores(&self, v: &Vector) -> Vector {
        self.duals.tr_mul(v)
    }

    /// Submatrix of the listed columns, in the given order.
    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.atoms.select_columns(idx)
    }

    /// `sum_i coeffs[i] * g_{support[i]}`.
    pub fn synthesize(&self, support: &[usize], coeffs: &[f64]) -> Vector {
        let mut f = Vector::zeros(self.dim());
        for (&i, &c) in support.iter().zip(coeffs) {
            f.axpy(c, &self.atoms.column(i), 1.0);
        }
        f
    }

    pub fn to_json(&self) -> String {
        let file = DictionaryFile {
            dim: self.dim(),
            n_atoms: self.n_atoms(),
            p: self.space.p(),
            atoms: self
                .atoms
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("dictionary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DictionaryFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_dictionary()
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn read_json(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json(&text)?)
    }
}

fn check_distinct(atoms: &DMatrix<f64>) -> Result<()> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.ncols());
    for (j, col) in atoms.column_iter().enumerate() {
        // +0.0 and -0.0 compare equal
        let key: Vec<u64> = col.iter().map(|x| (x + 0.0).to_bits()).collect();
        if let Some(&i) = seen.get(&key) {
            return Err(Error::DuplicateColumns(i, j));
        }
        seen.insert(key, j);
    }
    Ok(())
}

/// Divides each column of `raw` by its `l_p` norm.
pub fn normalize_dictionary(raw: &DMatrix<f64>, space: SpaceSpec) -> Result<Dictionary> {
    if raw.nrows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: raw.nrows(),
        });
    }
    let mut atoms = raw.clone();
    for (j, mut col) in atoms.column_iter_mut().enumerate() {
        let norm = pnorm(col.as_slice(), space.p());
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    Dictionary::from_normalized(atoms, space, UNIT_NORM_TOL)
}

/// On-disk dictionary layout; `atoms` is a list of columns.
#[derive(Debug, Serialize, Deserialize)]
struct DictionaryFile {
    dim: usize,
    n_atoms: usize,
    p: f64,
    atoms: Vec<Vec<f64>>,
}

impl DictionaryFile {
    fn into_dictionary(self) -> Result<Dictionary> {
        let space = SpaceSpec::new(self.dim, self.p)?;
        if self.atoms.len() != self.n_atoms {
            return Err(Error::Format(format!(
                "n_atoms = {} but {} columns present",
                self.n_atoms,
                self.atoms.len()
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.n_atoms);
        for (j, col) in self.atoms.iter().enumerate() {
            if col.len() != self.dim {
                return Err(Error::Format(format!(
                    "column {j} has length {}, expected {}",
                    col.len(),
                    self.dim
                )));
            }
            m.column_mut(j).copy_from_slice(col);
        }
        Dictionary::from_normalized(m, space, FILE_UNIT_NORM_TOL)
    }
}
