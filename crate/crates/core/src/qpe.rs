//! Quantum Fourier transform and phase estimation of `A = A0 A0^T`.
//!
//! The evolution convention is `sum_tau |tau><tau| (x) exp(i A tau t0 / T)`, so
//! an eigenvalue `lambda` lands on register label `c = lambda * t0 / (2 pi)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{QsvtError, Result};
use crate::sim::{BasisPermutation, QuantumState, QubitRange, RegisterLayout, UnitaryMatrix, C64};
use crate::spectral::herm_exp;

const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimationConfig {
    pub t_bits: usize,
    pub t0: f64,
    /// Every in-scope eigenvalue sits exactly on an integer label below `T`.
    pub exact: bool,
}

impl PhaseEstimationConfig {
    pub fn new(t_bits: usize, t0: f64, eigenvalues: &[f64]) -> Result<Self> {
        if t_bits == 0 || !(t0 > 0.0) || !t0.is_finite() {
            return Err(QsvtError::InvalidConfig(format!(
                "t_bits = {t_bits}, t0 = {t0}"
            )));
        }
        let mut cfg = Self {
            t_bits,
            t0,
            exact: false,
        };
        cfg.exact = eigenvalues.iter().all(|&l| {
            let c = cfg.label_value(l);
            is_integral(c) && c.round() < cfg.period() as f64
        });
        Ok(cfg)
    }

    /// `T = 2^t_bits`.
    pub fn period(&self) -> usize {
        1 << self.t_bits
    }

    /// Real-valued label of an eigenvalue before rounding.
    pub fn label_value(&self, lambda: f64) -> f64 {
        lambda * self.t0 / (2.0 * PI)
    }

    /// Eigenvalue represented by register label `c`.
    pub fn decode(&self, c: usize) -> f64 {
        2.0 * PI * c as f64 / self.t0
    }
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= INTEGRAL_TOL * x.abs().max(1.0)
}

fn validate_eigenvalues(eigenvalues: &[f64]) -> Result<()> {
    if eigenvalues.is_empty() {
        return Err(QsvtError::InvalidEigenvalues("empty".into()));
    }
    if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(QsvtError::InvalidEigenvalues(
            "eigenvalues must be positive and finite".into(),
        ));
    }
    for (i, a) in eigenvalues.iter().enumerate() {
        if eigenvalues[..i].contains(a) {
            return Err(QsvtError::InvalidEigenvalues(format!(
                "repeated eigenvalue {a}"
            )));
        }
    }
    Ok(())
}

/// Picks the evolution time for `t_bits` of eigenvalue register.
///
/// Integer eigenvalues below `T` use `t0 = 2 pi` (label = eigenvalue). Otherwise
/// the largest label `c <= T - 1` that puts every eigenvalue on an integer is
/// searched; failing that, `lambda_max` is mapped to `T - 1` and labels are
/// rounded, which leaves the encoding inexact.
pub fn choose_t0(eigenvalues: &[f64], t_bits: usize) -> Result<PhaseEstimationConfig> {
    choose_t0_with_floor(eigenvalues, t_bits, 0.0)
}

/// [`choose_t0`] where eigenvalues at or below `floor` may share a label.
pub fn choose_t0_with_floor(
    eigenvalues: &[f64],
    t_bits: usize,
    floor: f64,
) -> Result<PhaseEstimationConfig> {
    validate_eigenvalues(eigenvalues)?;
    if t_bits == 0 || t_bits > 20 {
        return Err(QsvtError::InvalidConfig(format!("t_bits = {t_bits}")));
    }
    let top = ((1usize << t_bits) - 1) as f64;
    let lambda_max = eigenvalues.iter().copied().fold(f64::MIN, f64::max);

    let integral = eigenvalues.iter().all(|&l| is_integral(l));
    if integral && lambda_max.round() <= top {
        return PhaseEstimationConfig::new(t_bits, 2.0 * PI, eigenvalues);
    }
    for c_max in (1..=top as usize).rev() {
        let scale = c_max as f64 / lambda_max;
        if eigenvalues.iter().all(|&l| is_integral(l * scale)) {
            let cfg = PhaseEstimationConfig::new(t_bits, 2.0 * PI * scale, eigenvalues)?;
            if EigenEncoding::with_floor(cfg, eigenvalues, floor).is_ok() {
                return Ok(cfg);
            }
        }
    }
    let cfg = PhaseEstimationConfig::new(t_bits, 2.0 * PI * top / lambda_max, eigenvalues)?;
    EigenEncoding::with_floor(cfg, eigenvalues, floor)?;
    Ok(cfg)
}

/// Register labels assigned to the in-scope eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenEncoding {
    pub config: PhaseEstimationConfig,
    pub eigenvalues: Vec<f64>,
    pub labels: Vec<usize>,
}

impl EigenEncoding {
    pub fn new(config: PhaseEstimationConfig, eigenvalues: &[f64]) -> Result<Self> {
        Self::with_floor(config, eigenvalues, 0.0)
    }

    /// Eigenvalues at or below `floor` may share a label; they all map to a
    /// zero threshold fraction, so merging them loses nothing.
    pub fn with_floor(
        config: PhaseEstimationConfig,
        eigenvalues: &[f64],
        floor: f64,
    ) -> Result<Self> {
        validate_eigenvalues(eigenvalues)?;
        let mut labels: Vec<usize> = Vec::with_capacity(eigenvalues.len());
        for (i, &l) in eigenvalues.iter().enumerate() {
            let c = config.label_value(l).round();
            if c < 0.0 || c >= config.period() as f64 {
                return Err(QsvtError::LabelOutOfRange {
                    label: c as usize,
                    width: config.t_bits,
                });
            }
            let c = c as usize;
            let below = |x: f64| x <= floor;
            if let Some(j) = labels
                .iter()
                .position(|&x| x == c)
                .filter(|&j| !(below(l) && below(eigenvalues[j])))
            {
                return Err(QsvtError::LabelCollision {
                    first: eigenvalues[j],
                    second: eigenvalues[i],
                    label: c,
                });
            }
            labels.push(c);
        }
        Ok(Self {
            config,
            eigenvalues: eigenvalues.to_vec(),
            labels,
        })
    }

    pub fn from_eigenvalues(eigenvalues: &[f64], t_bits: usize) -> Result<Self> {
        Self::new(choose_t0(eigenvalues, t_bits)?, eigenvalues)
    }

    pub fn is_in_scope(&self, label: usize) -> bool {
        self.labels.contains(&label)
    }
}

fn bit_reversal(width: usize) -> BasisPermutation {
    let table = (0..1usize << width)
        .map(|x| x.reverse_bits() >> (usize::BITS as usize - width))
        .collect();
    BasisPermutation::from_table(width, table).expect("bit reversal is a permutation")
}

/// `|x> -> 2^{-n/2} sum_y exp(2 pi i x y / 2^n) |y>` on `range`.
pub fn qft(state: &mut QuantumState, range: QubitRange) -> Result<()> {
    let q = range.qubits();
    let h = UnitaryMatrix::hadamard();
    for i in 0..q.len() {
        state.apply_unitary(&h, &[q[i]])?;
        for j in i + 1..q.len() {
            let phi = 2.0 * PI / (1u64 << (j - i + 1)) as f64;
            state.apply_controlled(&UnitaryMatrix::phase(phi), q[j], true, &[q[i]])?;
        }
    }
    if q.len() > 1 {
        state.apply_basis_oracle(&q, &bit_reversal(q.len()))?;
    }
    Ok(())
}

/// Exact inverse of [`qft`]: the same gates reversed with conjugated phases.
pub fn iqft(state: &mut QuantumState, range: QubitRange) -> Result<()> {
    let q = range.qubits();
    if q.len() > 1 {
        state.apply_basis_oracle(&q, &bit_reversal(q.len()))?;
    }
    let h = UnitaryMatrix::hadamard();
    for i in (0..q.len()).rev() {
        for j in (i + 1..q.len()).rev() {
            let phi = -2.0 * PI / (1u64 << (j - i + 1)) as f64;
            state.apply_controlled(&UnitaryMatrix::phase(phi), q[j], true, &[q[i]])?;
        }
        state.apply_unitary(&h, &[q[i]])?;
    }
    Ok(())
}

/// Applies `exp(i A tau t0 / T)` to `reg_bu` for each label `tau` of `reg_c`,
/// as one controlled power `exp(i A 2^j t0 / T)` per eigenvalue-register qubit.
pub fn conditional_evolution(
    state: &mut QuantumState,
    cfg: &PhaseEstimationConfig,
    reg_c: QubitRange,
    reg_bu: QubitRange,
    a: &DMatrix<C64>,
) -> Result<()> {
    evolve(state, cfg, reg_c, reg_bu, a, 1.0)
}

fn evolve(
    state: &mut QuantumState,
    cfg: &PhaseEstimationConfig,
    reg_c: QubitRange,
    reg_bu: QubitRange,
    a: &DMatrix<C64>,
    sign: f64,
) -> Result<()> {
    if a.nrows() != reg_bu.dim() {
        return Err(QsvtError::DimensionMismatch {
            expected: reg_bu.dim(),
            actual: a.nrows(),
        });
    }
    if reg_c.len != cfg.t_bits {
        return Err(QsvtError::DimensionMismatch {
            expected: cfg.t_bits,
            actual: reg_c.len,
        });
    }
    let targets = reg_bu.qubits();
    let period = cfg.period() as f64;
    for j in 0..reg_c.len {
        let time = sign * (1u64 << j) as f64 * cfg.t0 / period;
        let u = herm_exp(a, time)?;
        state.apply_controlled(&u, reg_c.qubit_of_weight(j), true, &targets)?;
    }
    Ok(())
}

/// `U_PE = (iQFT (x) I)(sum |tau><tau| (x) e^{i A tau t0/T})(H^t (x) I)`.
pub fn phase_estimate(
    state: &mut QuantumState,
    cfg: &PhaseEstimationConfig,
    layout: &RegisterLayout,
    a: &DMatrix<C64>,
) -> Result<()> {
    let cleared = state.register_distribution(layout.reg_c)[0];
    if (cleared - 1.0).abs() > 1e-10 {
        return Err(QsvtError::RegisterNotCleared);
    }
    let h = UnitaryMatrix::hadamard();
    for q in layout.reg_c.qubits() {
        state.apply_unitary(&h, &[q])?;
    }
    evolve(state, cfg, layout.reg_c, layout.reg_bu, a, 1.0)?;
    iqft(state, layout.reg_c)
}

/// `U_PE^dagger`, the gates of [`phase_estimate`] reversed and conjugated.
pub fn phase_estimate_inverse(
    state: &mut QuantumState,
    cfg: &PhaseEstimationConfig,
    layout: &RegisterLayout,
    a: &DMatrix<C64>,
) -> Result<()> {
    qft(state, layout.reg_c)?;
    evolve(state, cfg, layout.reg_c, layout.reg_bu, a, -1.0)?;
    let h = UnitaryMatrix::hadamard();
    for q in layout.reg_c.qubits() {
        state.apply_unitary(&h, &[q])?;
    }
    Ok(())
}

/// Probability mass of the eigenvalue register outside the encoded labels.
pub fn label_leakage(state: &QuantumState, reg_c: QubitRange, encoding: &EigenEncoding) -> f64 {
    let dist = state.register_distribution(reg_c);
    let mut labels = encoding.labels.clone();
    labels.sort_unstable();
    labels.dedup();
    let on: f64 = labels.iter().map(|&c| dist[c]).sum();
    (1.0 - on).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gram_padded, to_state, SpectralData};
    use nalgebra::DVector;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> QuantumState {
        let raw: Vec<C64> = (0..1 << n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        QuantumState::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    fn worked_spec(v_first: [f64; 3], v_second: [f64; 3]) -> SpectralData {
        let s2 = 0.5f64.sqrt();
        SpectralData::from_triples(
            vec![2.0, 1.0],
            vec![
                DVector::from_vec(vec![s2, s2]),
                DVector::from_vec(vec![s2, -s2]),
            ],
            vec![
                DVector::from_row_slice(&v_first),
                DVector::from_row_slice(&v_second),
            ],
        )
        .unwrap()
    }

    fn default_spec() -> SpectralData {
        worked_spec(
            [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0],
            [2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0],
        )
    }

    #[test]
    fn t0_for_integer_eigenvalues() {
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        assert!(cfg.exact);
        assert!((cfg.t0 - 2.0 * PI).abs() < 1e-15);
        let enc = EigenEncoding::new(cfg, &[4.0, 1.0]).unwrap();
        assert_eq!(enc.labels, vec![0b100, 0b001]);
        assert!((cfg.decode(4) - 4.0).abs() < 1e-12);

        let cfg = choose_t0(&[1.0], 1).unwrap();
        assert!(cfg.exact);
        assert_eq!(EigenEncoding::new(cfg, &[1.0]).unwrap().labels, vec![1]);
    }

    #[test]
    fn t0_for_rational_eigenvalues() {
        // 2.25 : 1 = 9 : 4, so the largest fitting label with integer partner is 9.
        let cfg = choose_t0(&[2.25, 1.0], 4).unwrap();
        assert!(cfg.exact);
        let enc = EigenEncoding::new(cfg, &[2.25, 1.0]).unwrap();
        assert_eq!(enc.labels, vec![9, 4]);
        assert!((cfg.decode(9) - 2.25).abs() < 1e-12);
    }

    #[test]
    fn t0_for_irrational_ratio_is_inexact() {
        let cfg = choose_t0(&[3.7, 1.2], 5).unwrap();
        assert!(!cfg.exact);
        // lambda_max -> 31; 1.2 * 31 / 3.7 = 10.054... -> 10.
        let enc = EigenEncoding::new(cfg, &[3.7, 1.2]).unwrap();
        assert_eq!(enc.labels, vec![31, 10]);
    }

    #[test]
    fn label_collisions_reported() {
        assert!(matches!(
            choose_t0(&[1.0, 1.01], 2),
            Err(QsvtError::LabelCollision { .. })
        ));
        assert!(choose_t0(&[1.0, 1.0], 3).is_err());
        assert!(choose_t0(&[-1.0], 3).is_err());
    }

    #[test]
    fn qft_of_zero_is_uniform() {
        let mut s = QuantumState::zero(3).unwrap();
        qft(&mut s, QubitRange::new(0, 3)).unwrap();
        for a in s.amplitudes() {
            assert!((a - C64::new(8f64.sqrt().recip(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn qft_matches_hand_computed_dft() {
        // x = 1, T = 4: amplitudes exp(2 pi i y / 4) / 2 = (1, i, -1, -i) / 2.
        let mut s = QuantumState::zero(2).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[1]).unwrap();
        qft(&mut s, QubitRange::new(0, 2)).unwrap();
        let expect = [
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(-0.5, 0.0),
            C64::new(0.0, -0.5),
        ];
        for (a, e) in s.amplitudes().iter().zip(expect) {
            assert!((a - e).norm() < 1e-14);
        }
    }

    #[test]
    fn qft_matches_dft_matrix_on_subregister() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state(5, &mut rng);
        let range = QubitRange::new(1, 3);
        let mut s = psi.clone();
        qft(&mut s, range).unwrap();
        // Direct DFT over the middle three qubits for every background.
        let t = 8usize;
        for bg_hi in 0..2usize {
            for bg_lo in 0..2usize {
                let bg = (bg_hi << 4) | bg_lo;
                let input = psi.register_amplitudes(range, bg);
                let output = s.register_amplitudes(range, bg);
                for (y, out) in output.iter().enumerate() {
                    let expect: C64 = (0..t)
                        .map(|x| {
                            input[x] * C64::from_polar(1.0, 2.0 * PI * (x * y) as f64 / t as f64)
                        })
                        .sum::<C64>()
                        / (t as f64).sqrt();
                    assert!((out - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn iqft_inverts_qft() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=5 {
            let psi = random_state(n + 1, &mut rng);
            let mut s = psi.clone();
            qft(&mut s, QubitRange::new(1, n)).unwrap();
            iqft(&mut s, QubitRange::new(1, n)).unwrap();
            for (a, b) in s.amplitudes().iter().zip(psi.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    fn diag41() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]).map(|x| C64::new(x, 0.0))
    }

    #[test]
    fn conditional_evolution_phases() {
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        let layout = RegisterLayout::new(0, 3, 1, 0);
        // C = |001>, data qubit in (|0> + |1>)/sqrt2.
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.apply_unitary(
            &UnitaryMatrix::pauli_x(),
            &[layout.reg_c.qubit_of_weight(0)],
        )
        .unwrap();
        s.apply_unitary(&UnitaryMatrix::hadamard(), &[layout.reg_bu.start])
            .unwrap();
        let before = s.clone();
        conditional_evolution(&mut s, &cfg, layout.reg_c, layout.reg_bu, &diag41()).unwrap();
        let i0 = before.index_of(layout.reg_c, 1) | before.index_of(layout.reg_bu, 0);
        let i1 = before.index_of(layout.reg_c, 1) | before.index_of(layout.reg_bu, 1);
        let ph0 = C64::from_polar(1.0, 4.0 * cfg.t0 / 8.0);
        let ph1 = C64::from_polar(1.0, 1.0 * cfg.t0 / 8.0);
        assert!((s.amplitudes()[i0] - before.amplitudes()[i0] * ph0).norm() < 1e-12);
        assert!((s.amplitudes()[i1] - before.amplitudes()[i1] * ph1).norm() < 1e-12);

        // Zero evolution time is the identity.
        let zero = PhaseEstimationConfig {
            t_bits: 3,
            t0: 0.0,
            exact: false,
        };
        let mut s2 = before.clone();
        conditional_evolution(&mut s2, &zero, layout.reg_c, layout.reg_bu, &diag41()).unwrap();
        for (a, b) in s2.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }

        let wrong = DMatrix::<C64>::identity(4, 4);
        assert!(conditional_evolution(&mut s2, &cfg, layout.reg_c, layout.reg_bu, &wrong).is_err());
    }

    fn worked_state(spec: &SpectralData) -> (QuantumState, RegisterLayout) {
        let (ub, vb) = spec.factor_bits();
        let layout = RegisterLayout::new(0, 3, ub, vb);
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.load_register(layout.reg_b, &to_state(spec, spec.sigma()).unwrap())
            .unwrap();
        (s, layout)
    }

    #[test]
    fn phase_estimation_on_worked_example() {
        let spec = default_spec();
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        let (mut s, layout) = worked_state(&spec);
        let a = gram_padded(&spec);
        phase_estimate(&mut s, &cfg, &layout, &a).unwrap();

        let mut expect = vec![C64::new(0.0, 0.0); s.amplitudes().len()];
        for (k, (label, weight)) in [(0b100usize, 2.0), (0b001, 1.0)].into_iter().enumerate() {
            let tk = crate::spectral::triple_state(&spec, k);
            for (b, amp) in tk.iter().enumerate() {
                let idx = s.index_of(layout.reg_c, label) | s.index_of(layout.reg_b, b);
                expect[idx] += amp * weight / 5f64.sqrt();
            }
        }
        for (a, e) in s.amplitudes().iter().zip(&expect) {
            assert!((a - e).norm() < 1e-9, "{a} vs {e}");
        }
        let enc = EigenEncoding::new(cfg, &[4.0, 1.0]).unwrap();
        assert!(label_leakage(&s, layout.reg_c, &enc) < 1e-9);
    }

    #[test]
    fn single_eigenvector_gives_deterministic_label() {
        let spec = default_spec();
        let (ub, vb) = spec.factor_bits();
        let layout = RegisterLayout::new(0, 3, ub, vb);
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.load_register(layout.reg_b, &crate::spectral::triple_state(&spec, 0))
            .unwrap();
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        phase_estimate(&mut s, &cfg, &layout, &gram_padded(&spec)).unwrap();
        assert!((s.register_distribution(layout.reg_c)[4] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn register_must_be_cleared() {
        let spec = default_spec();
        let (mut s, layout) = worked_state(&spec);
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[layout.reg_c.start])
            .unwrap();
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        assert_eq!(
            phase_estimate(&mut s, &cfg, &layout, &gram_padded(&spec)),
            Err(QsvtError::RegisterNotCleared)
        );
    }

    #[test]
    fn phase_estimation_round_trip_on_random_states() {
        let spec = default_spec();
        let a = gram_padded(&spec);
        let layout = RegisterLayout::new(0, 3, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for cfg in [
            choose_t0(&[4.0, 1.0], 3).unwrap(),
            choose_t0(&[3.7, 1.2], 3).unwrap(),
        ] {
            for _ in 0..20 {
                // Arbitrary content on C as well: the operator identity holds on the full space.
                let psi = random_state(layout.n_qubits(), &mut rng);
                let mut s = psi.clone();
                qft(&mut s, layout.reg_c).unwrap();
                iqft(&mut s, layout.reg_c).unwrap();
                let mut s = psi.clone();
                let h = UnitaryMatrix::hadamard();
                for q in layout.reg_c.qubits() {
                    s.apply_unitary(&h, &[q]).unwrap();
                }
                conditional_evolution(&mut s, &cfg, layout.reg_c, layout.reg_bu, &a).unwrap();
                iqft(&mut s, layout.reg_c).unwrap();
                phase_estimate_inverse(&mut s, &cfg, &layout, &a).unwrap();
                let dev = s
                    .amplitudes()
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(dev < 1e-10);
            }
        }
    }

    #[test]
    fn exact_encoding_puts_all_mass_on_labels() {
        let spec = default_spec();
        let cfg = choose_t0(&[4.0, 1.0], 4).unwrap();
        let enc = EigenEncoding::new(cfg, &[4.0, 1.0]).unwrap();
        let (ub, vb) = spec.factor_bits();
        let layout = RegisterLayout::new(0, 4, ub, vb);
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.load_register(layout.reg_b, &to_state(&spec, spec.sigma()).unwrap())
            .unwrap();
        phase_estimate(&mut s, &cfg, &layout, &gram_padded(&spec)).unwrap();
        assert!(label_leakage(&s, layout.reg_c, &enc) < 1e-9);
        for (&c, &l) in enc.labels.iter().zip(&enc.eigenvalues) {
            assert!((cfg.decode(c) - l).abs() < 1e-9);
        }
    }

    #[test]
    fn label_distribution_ignores_v_factor() {
        let cfg = choose_t0(&[4.0, 1.0], 3).unwrap();
        let specs = [
            default_spec(),
            worked_spec([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
            worked_spec([0.6, 0.8, 0.0], [0.0, 0.0, -1.0]),
        ];
        let dists: Vec<Vec<f64>> = specs
            .iter()
            .map(|spec| {
                let (mut s, layout) = worked_state(spec);
                phase_estimate(&mut s, &cfg, &layout, &gram_padded(spec)).unwrap();
                s.register_distribution(layout.reg_c)
            })
            .collect();
        for d in &dists[1..] {
            for (a, b) in d.iter().zip(&dists[0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inexact_encoding_reports_leakage() {
        let spec = SpectralData::from_triples(
            vec![3.7f64.sqrt(), 1.2f64.sqrt()],
            vec![
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
            vec![
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        let eigs = [3.7, 1.2];
        let cfg = choose_t0(&eigs, 5).unwrap();
        let enc = EigenEncoding::new(cfg, &eigs).unwrap();
        let layout = RegisterLayout::new(0, 5, 1, 1);
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.load_register(layout.reg_b, &to_state(&spec, spec.sigma()).unwrap())
            .unwrap();
        phase_estimate(&mut s, &cfg, &layout, &gram_padded(&spec)).unwrap();
        let leak = label_leakage(&s, layout.reg_c, &enc);
        assert!(leak > 1e-6 && leak < 0.5);
        let dist = s.register_distribution(layout.reg_c);
        let argmax = |lo: usize, hi: usize| {
            (lo..hi)
                .max_by(|&i, &j| dist[i].total_cmp(&dist[j]))
                .unwrap()
        };
        assert_eq!(argmax(20, 32), 31);
        assert_eq!(argmax(0, 20), 10);
    }
}
