//! Dense state-vector simulation.
//!
//! Qubit `q` of an `n`-qubit state corresponds to bit `n - 1 - q` of the
//! amplitude index, so qubit 0 is the most significant bit and a register
//! `[start, start + len)` reads its integer label most-significant-bit first.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QsvtError, Result};

pub type C64 = Complex64;

pub const DEFAULT_MAX_QUBITS: usize = 26;
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-10;

/// A contiguous range of qubits, most significant first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitRange {
    pub start: usize,
    pub len: usize,
}

impl QubitRange {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn qubits(&self) -> Vec<usize> {
        (self.start..self.end()).collect()
    }

    pub fn dim(&self) -> usize {
        1 << self.len
    }

    /// Qubit carrying weight `2^j` of the register label.
    pub fn qubit_of_weight(&self, j: usize) -> usize {
        self.end() - 1 - j
    }
}

/// Qubit layout of the thresholding circuit: ancilla, threshold register L,
/// eigenvalue register C and data register B = (u-factor, v-factor), in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterLayout {
    pub ancilla: usize,
    pub reg_l: QubitRange,
    pub reg_c: QubitRange,
    pub reg_b: QubitRange,
    pub reg_bu: QubitRange,
    pub reg_bv: QubitRange,
}

impl RegisterLayout {
    pub fn new(m_bits: usize, t_bits: usize, u_bits: usize, v_bits: usize) -> Self {
        let reg_l = QubitRange::new(1, m_bits);
        let reg_c = QubitRange::new(reg_l.end(), t_bits);
        let reg_bu = QubitRange::new(reg_c.end(), u_bits);
        let reg_bv = QubitRange::new(reg_bu.end(), v_bits);
        Self {
            ancilla: 0,
            reg_l,
            reg_c,
            reg_b: QubitRange::new(reg_bu.start, u_bits + v_bits),
            reg_bu,
            reg_bv,
        }
    }

    pub fn n_qubits(&self) -> usize {
        1 + self.reg_l.len + self.reg_c.len + self.reg_b.len
    }
}

/// A square unitary acting on `log2(dim)` qubits. Row/column index `j` reads
/// the target list most-significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    matrix: DMatrix<C64>,
    n_targets: usize,
}

impl UnitaryMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim || !dim.is_power_of_two() {
            return Err(QsvtError::InvalidTargets(format!(
                "unitary must be square with power-of-two size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOL {
            return Err(QsvtError::NotUnitary { deviation });
        }
        Ok(Self {
            n_targets: dim.trailing_zeros() as usize,
            matrix,
        })
    }

    pub fn identity(n_targets: usize) -> Self {
        let dim = 1 << n_targets;
        Self {
            matrix: DMatrix::identity(dim, dim),
            n_targets,
        }
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_2x2([[h, h], [h, -h]].map(|r| r.map(|x| C64::new(x, 0.0))))
    }

    pub fn pauli_x() -> Self {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        Self::from_2x2([[o, l], [l, o]])
    }

    /// `R_y(angle) = exp(-i angle Y / 2)`, so `R_y(2 phi)|0> = cos(phi)|0> + sin(phi)|1>`.
    pub fn ry(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Self::from_2x2([[c, -s], [s, c]].map(|r| r.map(|x| C64::new(x, 0.0))))
    }

    /// `diag(1, e^{i phi})`.
    pub fn phase(phi: f64) -> Self {
        let o = C64::new(0.0, 0.0);
        Self::from_2x2([[C64::new(1.0, 0.0), o], [o, C64::from_polar(1.0, phi)]])
    }

    fn from_2x2(m: [[C64; 2]; 2]) -> Self {
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]),
            n_targets: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            n_targets: self.n_targets,
        }
    }
}

pub(crate) fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let prod = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let expect = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - C64::new(expect, 0.0)).norm());
        }
    }
    dev
}

/// A permutation of the `2^width` basis labels of a register set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisPermutation {
    width: usize,
    image: Vec<usize>,
}

impl BasisPermutation {
    pub fn identity(width: usize) -> Self {
        Self {
            width,
            image: (0..1usize << width).collect(),
        }
    }

    /// Builds a permutation from a full image table, rejecting non-bijections.
    pub fn from_table(width: usize, image: Vec<usize>) -> Result<Self> {
        let dim = 1usize << width;
        if image.len() != dim {
            return Err(QsvtError::DimensionMismatch {
                expected: dim,
                actual: image.len(),
            });
        }
        let mut seen = vec![false; dim];
        for &y in &image {
            if y >= dim {
                return Err(QsvtError::LabelOutOfRange { label: y, width });
            }
            if std::mem::replace(&mut seen[y], true) {
                return Err(QsvtError::NotInjective { label: y });
            }
        }
        Ok(Self { width, image })
    }

    /// Completes a partial injective map to a permutation.
    ///
    /// Canonical completion: an unspecified label that is not already used as
    /// an image stays fixed; the remaining unspecified labels are paired, in
    /// ascending order, with the unused images in ascending order.
    pub fn from_partial(width: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let dim = 1usize << width;
        let mut image: Vec<Option<usize>> = vec![None; dim];
        let mut used = vec![false; dim];
        for &(x, y) in pairs {
            for label in [x, y] {
                if label >= dim {
                    return Err(QsvtError::LabelOutOfRange { label, width });
                }
            }
            match image[x] {
                Some(prev) if prev == y => continue,
                Some(_) => {
                    return Err(QsvtError::InvalidTargets(format!(
                        "label {x} is mapped twice"
                    )))
                }
                None => {}
            }
            if std::mem::replace(&mut used[y], true) {
                return Err(QsvtError::NotInjective { label: y });
            }
            image[x] = Some(y);
        }
        let mut pending = Vec::new();
        for x in 0..dim {
            if image[x].is_none() {
                if used[x] {
                    pending.push(x);
                } else {
                    image[x] = Some(x);
                    used[x] = true;
                }
            }
        }
        let free = (0..dim).filter(|&y| !used[y]);
        for (x, y) in pending.into_iter().zip(free) {
            image[x] = Some(y);
        }
        Ok(Self {
            width,
            image: image.into_iter().map(|y| y.expect("completed")).collect(),
        })
    }

    /// `|o>|x> -> |o XOR f(x)>|x>` over a joint register whose first `out_width`
    /// bits are the output and whose last `in_width` bits are the input.
    pub fn xor_function(out_width: usize, in_width: usize, f: &[usize]) -> Result<Self> {
        if f.len() != 1 << in_width {
            return Err(QsvtError::DimensionMismatch {
                expected: 1 << in_width,
                actual: f.len(),
            });
        }
        if let Some(&bad) = f.iter().find(|&&v| v >= 1 << out_width) {
            return Err(QsvtError::LabelOutOfRange {
                label: bad,
                width: out_width,
            });
        }
        let width = out_width + in_width;
        let in_mask = (1usize << in_width) - 1;
        let image = (0..1usize << width)
            .map(|label| {
                let x = label & in_mask;
                let o = label >> in_width;
                ((o ^ f[x]) << in_width) | x
            })
            .collect();
        Ok(Self { width, image })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn apply_label(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.image.len()];
        for (x, &y) in self.image.iter().enumerate() {
            inv[y] = x;
        }
        Self {
            width: self.width,
            image: inv,
        }
    }

    pub fn compose(&self, then: &BasisPermutation) -> Self {
        Self {
            width: self.width,
            image: self.image.iter().map(|&y| then.image[y]).collect(),
        }
    }
}

/// Full complex amplitude vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl QuantumState {
    /// `|0...0>` with the default qubit budget.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_budget(n_qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn zero_with_budget(n_qubits: usize, budget: usize) -> Result<Self> {
        if n_qubits > budget {
            return Err(QsvtError::QubitBudgetExceeded {
                requested: n_qubits,
                budget,
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(QsvtError::DimensionMismatch {
                expected: len.next_power_of_two().max(1),
                actual: len,
            });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(QsvtError::NotNormalized { norm_sqr });
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_range(&self, range: QubitRange) -> Result<()> {
        if range.end() > self.n_qubits {
            return Err(QsvtError::InvalidTargets(format!(
                "range {}..{} exceeds {} qubits",
                range.start,
                range.end(),
                self.n_qubits
            )));
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &q) in targets.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(QsvtError::InvalidTargets(format!("qubit {q} out of range")));
            }
            if targets[..i].contains(&q) {
                return Err(QsvtError::InvalidTargets(format!("qubit {q} repeated")));
            }
        }
        Ok(())
    }

    /// Reads the label of `qubits` (most significant first) out of a basis index.
    fn gather(&self, index: usize, qubits: &[usize]) -> usize {
        qubits.iter().fold(0, |acc, &q| {
            (acc << 1) | usize::from(index & self.mask(q) != 0)
        })
    }

    /// Writes `label` onto `qubits` within a basis index.
    fn scatter(&self, mut index: usize, qubits: &[usize], label: usize) -> usize {
        let k = qubits.len();
        for (i, &q) in qubits.iter().enumerate() {
            let m = self.mask(q);
            if (label >> (k - 1 - i)) & 1 == 1 {
                index |= m;
            } else {
                index &= !m;
            }
        }
        index
    }

    /// Prepares `amplitudes` on `range`, which must be the only register not in `|0>`.
    pub fn load_register(&mut self, range: QubitRange, amplitudes: &[C64]) -> Result<()> {
        self.check_range(range)?;
        if amplitudes.len() != range.dim() {
            return Err(QsvtError::DimensionMismatch {
                expected: range.dim(),
                actual: amplitudes.len(),
            });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(QsvtError::NotNormalized { norm_sqr });
        }
        let qubits = range.qubits();
        let range_mask = qubits.iter().fold(0, |acc, &q| acc | self.mask(q));
        let outside: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & !range_mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if outside > NORM_TOL {
            return Err(QsvtError::RegisterNotCleared);
        }
        self.amplitudes
            .iter_mut()
            .for_each(|a| *a = C64::new(0.0, 0.0));
        for (label, &a) in amplitudes.iter().enumerate() {
            let idx = self.scatter(0, &qubits, label);
            self.amplitudes[idx] = a;
        }
        Ok(())
    }

    pub fn apply_unitary(&mut self, u: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
        self.apply_kernel(u, targets, None)
    }

    pub fn apply_controlled(
        &mut self,
        u: &UnitaryMatrix,
        control: usize,
        control_value: bool,
        targets: &[usize],
    ) -> Result<()> {
        if control >= self.n_qubits {
            return Err(QsvtError::InvalidTargets(format!(
                "control {control} out of range"
            )));
        }
        if targets.contains(&control) {
            return Err(QsvtError::ControlOverlap(control));
        }
        self.apply_kernel(u, targets, Some((control, control_value)))
    }

    fn apply_kernel(
        &mut self,
        u: &UnitaryMatrix,
        targets: &[usize],
        control: Option<(usize, bool)>,
    ) -> Result<()> {
        if targets.len() != u.n_targets() {
            return Err(QsvtError::InvalidTargets(format!(
                "{} targets for a {}-qubit unitary",
                targets.len(),
                u.n_targets()
            )));
        }
        self.check_targets(targets)?;
        let k = targets.len();
        let dim = 1usize << k;
        let offsets: Vec<usize> = (0..dim).map(|j| self.scatter(0, targets, j)).collect();
        let target_mask = offsets[dim - 1];
        let (cmask, cwant) = match control {
            Some((c, v)) => (self.mask(c), if v { self.mask(c) } else { 0 }),
            None => (0, 0),
        };
        let m = u.matrix();
        let mut local = vec![C64::new(0.0, 0.0); dim];
        for base in 0..self.amplitudes.len() {
            if base & target_mask != 0 || base & cmask != cwant {
                continue;
            }
            for (j, &off) in offsets.iter().enumerate() {
                local[j] = self.amplitudes[base | off];
            }
            for (i, &off) in offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, &a) in local.iter().enumerate() {
                    acc += m[(i, j)] * a;
                }
                self.amplitudes[base | off] = acc;
            }
        }
        Ok(())
    }

    /// Moves the amplitude of label `x` on `qubits` to label `perm(x)`.
    pub fn apply_basis_oracle(&mut self, qubits: &[usize], perm: &BasisPermutation) -> Result<()> {
        self.check_targets(qubits)?;
        if perm.width() != qubits.len() {
            return Err(QsvtError::DimensionMismatch {
                expected: qubits.len(),
                actual: perm.width(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let x = self.gather(i, qubits);
            out[self.scatter(i, qubits, perm.apply_label(x))] = a;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// Probability that `qubit` measures `value`.
    pub fn probability(&self, qubit: usize, value: bool) -> f64 {
        let m = self.mask(qubit);
        let want = if value { m } else { 0 };
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m == want)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Marginal distribution of the label held by `range`.
    pub fn register_distribution(&self, range: QubitRange) -> Vec<f64> {
        let qubits = range.qubits();
        let mut dist = vec![0.0; range.dim()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            dist[self.gather(i, &qubits)] += a.norm_sqr();
        }
        dist
    }

    /// Amplitudes of `range` with every other qubit fixed as in `background`.
    pub fn register_amplitudes(&self, range: QubitRange, background: usize) -> Vec<C64> {
        let qubits = range.qubits();
        (0..range.dim())
            .map(|label| self.amplitudes[self.scatter(background, &qubits, label)])
            .collect()
    }

    /// Basis index with `label` written on `range` and zeros elsewhere.
    pub fn index_of(&self, range: QubitRange, label: usize) -> usize {
        self.scatter(0, &range.qubits(), label)
    }

    pub fn post_select(&self, qubit: usize, value: bool) -> Result<(QuantumState, f64)> {
        self.post_select_with_floor(qubit, value, DEFAULT_PROBABILITY_FLOOR)
    }

    /// Conditional state after observing `qubit == value`, plus the outcome probability.
    pub fn post_select_with_floor(
        &self,
        qubit: usize,
        value: bool,
        floor: f64,
    ) -> Result<(QuantumState, f64)> {
        if qubit >= self.n_qubits {
            return Err(QsvtError::InvalidTargets(format!(
                "qubit {qubit} out of range"
            )));
        }
        let p = self.probability(qubit, value);
        if p < floor {
            return Err(QsvtError::FullyThresholded { probability: p });
        }
        let m = self.mask(qubit);
        let want = if value { m } else { 0 };
        let scale = 1.0 / p.sqrt();
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i & m == want {
                    a * scale
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        Ok((
            QuantumState {
                n_qubits: self.n_qubits,
                amplitudes,
            },
            p,
        ))
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(QsvtError::DimensionMismatch {
                expected: self.amplitudes.len(),
                actual: other.amplitudes.len(),
            });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }
}

/// `<a|b>` for raw amplitude vectors of equal length.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn new_state(layout: &RegisterLayout) -> Result<QuantumState> {
    QuantumState::zero(layout.n_qubits())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn assert_amps(state: &QuantumState, expected: &[C64], tol: f64) {
        for (i, (a, e)) in state.amplitudes().iter().zip(expected).enumerate() {
            assert!((a - e).norm() < tol, "index {i}: {a} vs {e}");
        }
    }

    fn random_state(n: usize, seed: u64) -> QuantumState {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<C64> = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        QuantumState::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn new_state_is_all_zero_basis() {
        let s = QuantumState::zero(2).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(
            QuantumState::zero(1).unwrap().amplitudes(),
            &[c(1.0), c(0.0)]
        );
        let s = QuantumState::zero(7).unwrap();
        assert_eq!(s.amplitudes().len(), 128);
        assert_eq!(s.amplitudes()[0], c(1.0));
    }

    #[test]
    fn qubit_budget_enforced() {
        assert!(matches!(
            QuantumState::zero(27),
            Err(QsvtError::QubitBudgetExceeded {
                requested: 27,
                budget: 26
            })
        ));
        let layout = RegisterLayout::new(20, 6, 1, 1);
        assert!(new_state(&layout).is_err());
    }

    #[test]
    fn layout_ranges_are_disjoint_and_cover() {
        let l = RegisterLayout::new(3, 3, 1, 2);
        assert_eq!(l.n_qubits(), 10);
        let mut all = vec![l.ancilla];
        all.extend(l.reg_l.qubits());
        all.extend(l.reg_c.qubits());
        all.extend(l.reg_b.qubits());
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(l.reg_bu.qubits(), vec![7]);
        assert_eq!(l.reg_bv.qubits(), vec![8, 9]);
    }

    #[test]
    fn load_register_cases() {
        let mut s = QuantumState::zero(3).unwrap();
        s.load_register(QubitRange::new(1, 2), &[c(1.0), c(0.0), c(0.0), c(0.0)])
            .unwrap();
        assert_eq!(s, QuantumState::zero(3).unwrap());

        let mut s = QuantumState::zero(3).unwrap();
        s.load_register(QubitRange::new(1, 2), &[c(0.5); 4])
            .unwrap();
        let dist = s.register_distribution(QubitRange::new(1, 2));
        for p in dist {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((s.probability(0, false) - 1.0).abs() < 1e-15);

        let mut s = QuantumState::zero(2).unwrap();
        assert!(matches!(
            s.load_register(QubitRange::new(0, 2), &[c(1.0), c(1.0), c(0.0), c(0.0)]),
            Err(QsvtError::NotNormalized { .. })
        ));
        assert!(matches!(
            s.load_register(QubitRange::new(0, 1), &[c(1.0), c(0.0), c(0.0), c(0.0)]),
            Err(QsvtError::DimensionMismatch { .. })
        ));
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        assert_eq!(
            s.load_register(QubitRange::new(1, 1), &[c(1.0), c(0.0)]),
            Err(QsvtError::RegisterNotCleared)
        );
    }

    #[test]
    fn single_qubit_gates() {
        let mut s = QuantumState::zero(1).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        assert_amps(&s, &[c(0.0), c(1.0)], 1e-15);

        let mut s = QuantumState::zero(1).unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[0]).unwrap();
        assert_amps(&s, &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)], 1e-15);

        let before = random_state(3, 1);
        let mut s = before.clone();
        s.apply_unitary(&UnitaryMatrix::identity(2), &[2, 0])
            .unwrap();
        assert_amps(&s, before.amplitudes(), 1e-15);
    }

    #[test]
    fn target_ordering_is_msb_first() {
        // X on qubit 1 of |00> gives |01> = index 1.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[1]).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
        // A two-qubit unitary sees targets [1, 0] as (msb=q1, lsb=q0).
        let swap01 = {
            let mut m = DMatrix::zeros(4, 4);
            m[(0, 0)] = c(1.0);
            m[(1, 2)] = c(1.0);
            m[(2, 1)] = c(1.0);
            m[(3, 3)] = c(1.0);
            UnitaryMatrix::new(m).unwrap()
        };
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        s.apply_unitary(&swap01, &[1, 0]).unwrap();
        assert_eq!(s.amplitudes()[1], c(1.0));
    }

    #[test]
    fn bad_unitaries_and_targets_rejected() {
        let m = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            UnitaryMatrix::new(m),
            Err(QsvtError::NotUnitary { .. })
        ));
        let mut s = QuantumState::zero(2).unwrap();
        assert!(s
            .apply_unitary(&UnitaryMatrix::identity(2), &[0, 0])
            .is_err());
        assert!(s.apply_unitary(&UnitaryMatrix::identity(2), &[0]).is_err());
        assert!(s.apply_unitary(&UnitaryMatrix::hadamard(), &[5]).is_err());
        assert_eq!(
            s.apply_controlled(&UnitaryMatrix::hadamard(), 1, true, &[1]),
            Err(QsvtError::ControlOverlap(1))
        );
    }

    #[test]
    fn controlled_gates() {
        // Control in |0>, control_value = 1: no-op.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_controlled(&UnitaryMatrix::pauli_x(), 0, true, &[1])
            .unwrap();
        assert_eq!(s, QuantumState::zero(2).unwrap());

        // CNOT |10> -> |11>.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        s.apply_controlled(&UnitaryMatrix::pauli_x(), 0, true, &[1])
            .unwrap();
        assert_amps(&s, &[c(0.0), c(0.0), c(0.0), c(1.0)], 1e-15);

        // Controlled R_y(pi) on (|0>+|1>)/sqrt2 (x) |0>: by hand the 4x4 operator is
        // diag(I, R_y(pi)) with R_y(pi)|0> = |1>, giving (|00> + |11>)/sqrt2.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[0]).unwrap();
        s.apply_controlled(&UnitaryMatrix::ry(PI), 0, true, &[1])
            .unwrap();
        assert_amps(
            &s,
            &[c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)],
            1e-15,
        );

        // control_value = 0 fires on |0>.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_controlled(&UnitaryMatrix::pauli_x(), 0, false, &[1])
            .unwrap();
        assert_amps(&s, &[c(0.0), c(1.0), c(0.0), c(0.0)], 1e-15);
    }

    #[test]
    fn partial_map_completion_matches_worked_example() {
        // 100 -> 110, 001 -> 100 on a 3-qubit register.
        let perm = BasisPermutation::from_partial(3, &[(0b100, 0b110), (0b001, 0b100)]).unwrap();
        assert_eq!(perm.apply_label(0b100), 0b110);
        assert_eq!(perm.apply_label(0b001), 0b100);
        // Labels neither specified nor used as images stay fixed; 110 takes the free 001.
        for x in [0, 2, 3, 5, 7] {
            assert_eq!(perm.apply_label(x), x);
        }
        assert_eq!(perm.apply_label(0b110), 0b001);

        let mut amps = vec![c(0.0); 8];
        amps[0b100] = c(2.0 / 5f64.sqrt());
        amps[0b001] = c(1.0 / 5f64.sqrt());
        let mut s = QuantumState::from_amplitudes(amps).unwrap();
        s.apply_basis_oracle(&[0, 1, 2], &perm).unwrap();
        let mut expect = vec![c(0.0); 8];
        expect[0b110] = c(2.0 / 5f64.sqrt());
        expect[0b100] = c(1.0 / 5f64.sqrt());
        assert_amps(&s, &expect, 1e-15);
    }

    #[test]
    fn oracle_rejects_non_injective_maps() {
        assert_eq!(
            BasisPermutation::from_partial(2, &[(0, 3), (1, 3)]),
            Err(QsvtError::NotInjective { label: 3 })
        );
        assert!(BasisPermutation::from_table(1, vec![0, 0]).is_err());
        assert!(BasisPermutation::from_partial(2, &[(0, 4)]).is_err());
    }

    #[test]
    fn identity_oracle_is_noop() {
        let before = random_state(4, 9);
        let mut s = before.clone();
        s.apply_basis_oracle(&[3, 1], &BasisPermutation::identity(2))
            .unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn xor_oracle_is_self_inverse() {
        let perm = BasisPermutation::xor_function(2, 2, &[3, 1, 0, 2]).unwrap();
        assert_eq!(perm.compose(&perm), BasisPermutation::identity(4));
        assert_eq!(perm.apply_label(0b00_01), 0b01_01);
    }

    #[test]
    fn post_selection() {
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[1]).unwrap();
        let (post, p) = s.post_select(0, true).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert_amps(&post, s.amplitudes(), 1e-15);

        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[0]).unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[1]).unwrap();
        let (post, p) = s.post_select(0, true).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert_amps(
            &post,
            &[c(0.0), c(0.0), c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            1e-15,
        );

        let s = QuantumState::zero(2).unwrap();
        assert!(matches!(
            s.post_select(0, true),
            Err(QsvtError::FullyThresholded { .. })
        ));
    }

    #[test]
    fn overlaps() {
        let a = random_state(3, 4);
        assert!((a.overlap(&a).unwrap() - c(1.0)).norm() < 1e-12);
        let z = QuantumState::zero(3).unwrap();
        let mut one = z.clone();
        one.apply_unitary(&UnitaryMatrix::pauli_x(), &[2]).unwrap();
        assert_eq!(z.overlap(&one).unwrap(), c(0.0));
        assert!(z.overlap(&QuantumState::zero(2).unwrap()).is_err());
    }

    fn gate_strategy() -> impl Strategy<Value = (u8, usize, usize, f64)> {
        (0u8..4, 0usize..4, 0usize..4, -PI..PI)
    }

    fn apply_gate(s: &mut QuantumState, (kind, a, b, angle): (u8, usize, usize, f64)) {
        match kind {
            0 => s.apply_unitary(&UnitaryMatrix::hadamard(), &[a]).unwrap(),
            1 => s.apply_unitary(&UnitaryMatrix::ry(angle), &[a]).unwrap(),
            2 if a != b => s
                .apply_controlled(&UnitaryMatrix::phase(angle), a, true, &[b])
                .unwrap(),
            _ => {
                let perm = BasisPermutation::from_partial(2, &[(0, 3), (1, 2)]).unwrap();
                if a != b {
                    s.apply_basis_oracle(&[a, b], &perm).unwrap();
                }
            }
        }
    }

    proptest! {
        #[test]
        fn norm_is_preserved(seed in 0u64..1000, gates in prop::collection::vec(gate_strategy(), 1..20)) {
            let mut s = random_state(4, seed);
            for g in gates {
                apply_gate(&mut s, g);
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn oracle_then_inverse_restores(seed in 0u64..1000) {
            let before = random_state(4, seed);
            let perm = BasisPermutation::from_table(3, shuffle_table(seed)).unwrap();
            let mut s = before.clone();
            s.apply_basis_oracle(&[0, 2, 3], &perm).unwrap();
            s.apply_basis_oracle(&[0, 2, 3], &perm.inverse()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn gates_act_linearly(seed in 0u64..1000, g in gate_strategy()) {
            let psi = random_state(4, seed);
            let mut whole = psi.clone();
            apply_gate(&mut whole, g);
            let mut sum = vec![c(0.0); 16];
            for (i, &a) in psi.amplitudes().iter().enumerate() {
                let mut basis = vec![c(0.0); 16];
                basis[i] = c(1.0);
                let mut b = QuantumState::from_amplitudes(basis).unwrap();
                apply_gate(&mut b, g);
                for (acc, x) in sum.iter_mut().zip(b.amplitudes()) {
                    *acc += a * x;
                }
            }
            for (a, b) in whole.amplitudes().iter().zip(&sum) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn controlled_identity_is_noop(seed in 0u64..1000, ctrl in 0usize..4, value: bool) {
            let before = random_state(4, seed);
            let mut s = before.clone();
            let targets: Vec<usize> = (0..4).filter(|&q| q != ctrl).take(2).collect();
            s.apply_controlled(&UnitaryMatrix::identity(2), ctrl, value, &targets).unwrap();
            prop_assert_eq!(s, before);
        }

        #[test]
        fn post_select_probability_is_marginal(seed in 0u64..1000, qubit in 0usize..4, value: bool) {
            let s = random_state(4, seed);
            let mask = 1 << (3 - qubit);
            let want = if value { mask } else { 0 };
            let direct: f64 = s.amplitudes().iter().enumerate()
                .filter(|(i, _)| i & mask == want).map(|(_, a)| a.norm_sqr()).sum();
            let (post, p) = s.post_select(qubit, value).unwrap();
            prop_assert!((p - direct).abs() < 1e-15);
            prop_assert!((post.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    fn shuffle_table(seed: u64) -> Vec<usize> {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<usize> = (0..8).collect();
        v.shuffle(&mut rng);
        v
    }
}
