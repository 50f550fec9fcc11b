//! Classical linear algebra for the thresholding pipeline: singular triples,
//! the Gram matrix, the classical thresholding operator and the vectorized
//! quantum states built from them.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{QsvtError, Result};
use crate::sim::{UnitaryMatrix, C64};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEGENERACY_TOL: f64 = 1e-9;
const ORTHONORMAL_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;

/// A finite, non-empty real `p x q` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    data: DMatrix<f64>,
}

impl InputMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(QsvtError::ZeroMatrix);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(QsvtError::NonFiniteInput);
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let q = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != q) {
            return Err(QsvtError::Parse("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(p, q, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Parses `"p q"` followed by `p` rows of `q` whitespace-separated numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| QsvtError::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| QsvtError::Parse(format!("bad dimension {t:?}")))
            })
            .collect::<Result<_>>()?;
        let [p, q] = dims[..] else {
            return Err(QsvtError::Parse("header must be \"p q\"".into()));
        };
        let mut rows = Vec::with_capacity(p);
        for i in 0..p {
            let line = lines
                .next()
                .ok_or_else(|| QsvtError::Parse(format!("missing row {i}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| QsvtError::Parse(format!("bad number {t:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != q {
                return Err(QsvtError::Parse(format!(
                    "row {i} has {} entries, expected {q}",
                    row.len()
                )));
            }
            rows.push(row);
        }
        if lines.next().is_some() {
            return Err(QsvtError::Parse("trailing data after matrix".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows(), self.cols());
        for i in 0..self.rows() {
            let row: Vec<String> = (0..self.cols())
                .map(|j| format!("{:e}", self.data[(i, j)]))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Singular triples `(sigma_k, u_k, v_k)` with strictly descending `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    rows: usize,
    cols: usize,
    sigma: Vec<f64>,
    left: Vec<DVector<f64>>,
    right: Vec<DVector<f64>>,
    rank_tol: f64,
}

impl SpectralData {
    /// Builds spectral data from explicit triples, validating ordering,
    /// non-degeneracy and orthonormality.
    pub fn from_triples(
        sigma: Vec<f64>,
        left: Vec<DVector<f64>>,
        right: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let r = sigma.len();
        if r == 0 || left.len() != r || right.len() != r {
            return Err(QsvtError::InvalidConfig(
                "triple lists must be non-empty and equally long".into(),
            ));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(QsvtError::InvalidConfig(
                "singular values must be positive".into(),
            ));
        }
        check_descending(&sigma)?;
        let rows = left[0].len();
        let cols = right[0].len();
        check_orthonormal(&left, rows)?;
        check_orthonormal(&right, cols)?;
        Ok(Self {
            rows,
            cols,
            sigma,
            left,
            right,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn left(&self) -> &[DVector<f64>] {
        &self.left
    }

    pub fn right(&self) -> &[DVector<f64>] {
        &self.right
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `N1 = sum sigma_k^2`.
    pub fn frobenius_sqr(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }

    /// Qubits for the u- and v-factors of the data register; each factor is
    /// padded to a power of two independently, with at least one qubit.
    pub fn factor_bits(&self) -> (usize, usize) {
        (ceil_log2(self.rows), ceil_log2(self.cols))
    }

    /// `sum_k w_k u_k v_k^T` for arbitrary weights.
    pub fn reconstruct_weighted(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for ((w, u), v) in weights.iter().zip(&self.left).zip(&self.right) {
            out += u * v.transpose() * *w;
        }
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_weighted(&self.sigma)
    }

    pub fn to_matrix(&self) -> Result<InputMatrix> {
        InputMatrix::new(self.reconstruct())
    }
}

fn ceil_log2(n: usize) -> usize {
    (n.next_power_of_two().trailing_zeros() as usize).max(1)
}

fn check_descending(sigma: &[f64]) -> Result<()> {
    for w in sigma.windows(2) {
        if w[1] >= w[0] || (w[0] - w[1]) <= DEGENERACY_TOL * w[0] {
            return Err(QsvtError::DegenerateSpectrum {
                first: w[0],
                second: w[1],
            });
        }
    }
    Ok(())
}

fn check_orthonormal(vectors: &[DVector<f64>], dim: usize) -> Result<()> {
    for (i, a) in vectors.iter().enumerate() {
        if a.len() != dim {
            return Err(QsvtError::DimensionMismatch {
                expected: dim,
                actual: a.len(),
            });
        }
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - expect).abs() > ORTHONORMAL_TOL {
                return Err(QsvtError::InvalidConfig(
                    "singular vectors are not orthonormal".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Singular value decomposition keeping values above `tol * sigma_1`.
pub fn decompose(matrix: &InputMatrix, tol: f64) -> Result<SpectralData> {
    let a = matrix.data();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    if !(sigma_max > 0.0) {
        return Err(QsvtError::ZeroMatrix);
    }
    let mut sigma = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &i in &order {
        let s = svd.singular_values[i];
        if s <= tol * sigma_max {
            break;
        }
        let mut uk: DVector<f64> = u.column(i).into_owned();
        let mut vk: DVector<f64> = v_t.row(i).transpose();
        // Sign convention: the largest-magnitude entry of u_k is positive.
        let pivot = uk
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            uk = -uk;
            vk = -vk;
        }
        sigma.push(s);
        left.push(uk);
        right.push(vk);
    }
    check_descending(&sigma)?;
    Ok(SpectralData {
        rows: a.nrows(),
        cols: a.ncols(),
        sigma,
        left,
        right,
        rank_tol: tol,
    })
}

/// `A = A0 A0^T = sum sigma_k^2 u_k u_k^T`, a `p x p` symmetric matrix.
pub fn gram(spec: &SpectralData) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(spec.rows, spec.rows);
    for (s, u) in spec.sigma.iter().zip(&spec.left) {
        a += u * u.transpose() * (s * s);
    }
    a
}

/// The Gram matrix embedded in the padded u-factor space as a complex Hermitian matrix.
pub fn gram_padded(spec: &SpectralData) -> DMatrix<C64> {
    let dim = 1 << spec.factor_bits().0;
    let a = gram(spec);
    DMatrix::from_fn(dim, dim, |i, j| {
        if i < spec.rows && j < spec.rows {
            C64::new(a[(i, j)], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Threshold `tau` validated against `(0, sigma_1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec {
    tau: f64,
}

impl ThresholdSpec {
    pub fn new(tau: f64, spec: &SpectralData) -> Result<Self> {
        let sigma_max = spec.sigma[0];
        if !(tau > 0.0 && tau < sigma_max) {
            return Err(QsvtError::ThresholdOutOfRange { tau, sigma_max });
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// `(sigma_k - tau)_+` for every triple.
pub fn shrunk_singular_values(spec: &SpectralData, tau: f64) -> Vec<f64> {
    spec.sigma.iter().map(|s| (s - tau).max(0.0)).collect()
}

/// `D_tau(A0) = sum (sigma_k - tau)_+ u_k v_k^T`.
pub fn classical_svt(spec: &SpectralData, thr: &ThresholdSpec) -> DMatrix<f64> {
    spec.reconstruct_weighted(&shrunk_singular_values(spec, thr.tau()))
}

/// `sum_k w_k (u_k (x) v_k)`, normalized, laid out as `u_index * 2^v_bits + v_index`.
pub fn to_state(spec: &SpectralData, weights: &[f64]) -> Result<Vec<C64>> {
    if weights.len() != spec.rank() {
        return Err(QsvtError::DimensionMismatch {
            expected: spec.rank(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(QsvtError::InvalidConfig(
            "weights must be finite and non-negative".into(),
        ));
    }
    let (u_bits, v_bits) = spec.factor_bits();
    let v_dim = 1 << v_bits;
    let mut amps = vec![C64::new(0.0, 0.0); (1 << u_bits) * v_dim];
    for ((w, u), v) in weights.iter().zip(&spec.left).zip(&spec.right) {
        for i in 0..spec.rows {
            for j in 0..spec.cols {
                amps[i * v_dim + j] += C64::new(w * u[i] * v[j], 0.0);
            }
        }
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QsvtError::ZeroWeights);
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(amps)
}

/// The basis vector `u_k (x) v_k` in the padded data-register layout.
pub fn triple_state(spec: &SpectralData, k: usize) -> Vec<C64> {
    let mut w = vec![0.0; spec.rank()];
    w[k] = 1.0;
    to_state(spec, &w).expect("unit weight")
}

/// `exp(i A t)` through an exact Hermitian eigendecomposition.
pub fn herm_exp(a: &DMatrix<C64>, t: f64) -> Result<UnitaryMatrix> {
    if !a.is_square() {
        return Err(QsvtError::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let deviation = (a - a.adjoint())
        .iter()
        .fold(0.0f64, |m, x| m.max(x.norm()));
    if deviation > HERMITIAN_TOL {
        return Err(QsvtError::NotHermitian { deviation });
    }
    let eig = a.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from_polar(1.0, l * t)));
    UnitaryMatrix::new(v * phases * v.adjoint())
}
