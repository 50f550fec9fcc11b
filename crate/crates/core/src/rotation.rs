//! Controlled rotation: a Newton-iteration threshold oracle that writes
//! `y = (1 - tau/sigma)_+` into register L, and the rotation cascade that moves
//! `y` into the ancilla amplitude `sin(alpha y)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{QsvtError, Result};
use crate::qpe::{phase_estimate_inverse, EigenEncoding, PhaseEstimationConfig};
use crate::sim::{BasisPermutation, QuantumState, QubitRange, RegisterLayout, UnitaryMatrix, C64};

pub const DEFAULT_M_BITS: usize = 8;
pub const DEFAULT_MAX_ITERATIONS: usize = 40;
pub const DEFAULT_CLAMP_GUARD: usize = 2;
pub const UNCOMPUTE_TOL: f64 = 1e-9;

/// An `m`-bit binary fraction `raw / 2^m` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointCode {
    m_bits: usize,
    raw: usize,
}

impl FixedPointCode {
    pub fn new(m_bits: usize, raw: usize) -> Result<Self> {
        if m_bits == 0 || m_bits > 30 {
            return Err(QsvtError::InvalidConfig(format!("m_bits = {m_bits}")));
        }
        if raw >= 1 << m_bits {
            return Err(QsvtError::LabelOutOfRange {
                label: raw,
                width: m_bits,
            });
        }
        Ok(Self { m_bits, raw })
    }

    /// Rounds to nearest with ties upward, then clamps into `[0, 1 - 2^-m]`.
    pub fn from_value(m_bits: usize, value: f64) -> Self {
        Self::round_clamped(m_bits, value).0
    }

    /// Also reports whether the rounded value had to be clamped.
    fn round_clamped(m_bits: usize, value: f64) -> (Self, bool) {
        let top = ((1u64 << m_bits) - 1) as f64;
        let scaled = (value * (1u64 << m_bits) as f64 + 0.5).floor();
        let clamped = !(0.0..=top).contains(&scaled);
        let raw = if scaled.is_nan() {
            top
        } else {
            scaled.clamp(0.0, top)
        } as usize;
        (Self { m_bits, raw }, clamped)
    }

    pub fn half(m_bits: usize) -> Self {
        Self {
            m_bits,
            raw: 1 << (m_bits - 1),
        }
    }

    pub fn m_bits(&self) -> usize {
        self.m_bits
    }

    pub fn raw(&self) -> usize {
        self.raw
    }

    pub fn value(&self) -> f64 {
        self.raw as f64 / (1u64 << self.m_bits) as f64
    }

    pub fn ulp(&self) -> f64 {
        1.0 / (1u64 << self.m_bits) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub m_bits: usize,
    pub max_iterations: usize,
    pub initial: FixedPointCode,
    /// Number of clamped steps after which the iteration is declared divergent.
    pub clamp_guard: usize,
}

impl NewtonConfig {
    /// Starts every iteration from `1/2`.
    pub fn new(m_bits: usize) -> Result<Self> {
        FixedPointCode::new(m_bits, 0)?;
        Ok(Self {
            m_bits,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            initial: FixedPointCode::half(m_bits),
            clamp_guard: DEFAULT_CLAMP_GUARD,
        })
    }

    /// Starts from `1 - tau / sqrt(lambda_cap)`, where `lambda_cap` is the largest
    /// eigenvalue the eigenvalue register can represent. Every representable
    /// eigenvalue then starts inside its quadratic basin; the start is kept at
    /// least two grid steps below 1, where rounding would otherwise pin it.
    pub fn for_register(m_bits: usize, tau: f64, pe: &PhaseEstimationConfig) -> Result<Self> {
        let mut cfg = Self::new(m_bits)?;
        let lambda_cap = pe.decode(pe.period() - 1);
        let ulp = 1.0 / (1u64 << m_bits) as f64;
        let distance = (tau / lambda_cap.sqrt()).clamp(2.0 * ulp, 1.0);
        cfg.initial = FixedPointCode::from_value(m_bits, 1.0 - distance);
        Ok(cfg)
    }

    pub fn with_initial(mut self, initial: FixedPointCode) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n.max(1);
        self
    }
}

/// The cubic `y -> -(sigma^2 / 2 tau^2)(y - 1)^3 + 3y/2 - 1/2` in full precision.
pub fn newton_map(y: f64, tau: f64, sigma_sq: f64) -> f64 {
    -(sigma_sq / (2.0 * tau * tau)) * (y - 1.0).powi(3) + 1.5 * y - 0.5
}

/// Derivative of [`newton_map`]; zero at the attracting fixed point `1 - tau/sigma`.
fn newton_map_slope(y: f64, tau: f64, sigma_sq: f64) -> f64 {
    -1.5 * (sigma_sq / (tau * tau)) * (y - 1.0).powi(2) + 1.5
}

/// One Newton step, rounded to the code's grid and clamped into range.
pub fn newton_step(y: FixedPointCode, tau: f64, sigma_sq: f64) -> FixedPointCode {
    FixedPointCode::from_value(y.m_bits, newton_map(y.value(), tau, sigma_sq))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub code: FixedPointCode,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates [`newton_step`] until two successive codes agree.
///
/// Non-convergence is reported, not raised: either the clamp guard tripped, the
/// iteration budget ran out, or the iterate settled on the repelling fixed point
/// `y = 1` (detected by a map slope of magnitude at least one).
pub fn newton_iterate(cfg: &NewtonConfig, tau: f64, sigma_sq: f64) -> NewtonOutcome {
    let zero = FixedPointCode {
        m_bits: cfg.m_bits,
        raw: 0,
    };
    if sigma_sq.sqrt() <= tau {
        return NewtonOutcome {
            code: zero,
            iterations: 0,
            converged: true,
        };
    }
    let mut y = cfg.initial;
    let mut clamps = 0;
    for i in 1..=cfg.max_iterations {
        let (next, clamped) =
            FixedPointCode::round_clamped(cfg.m_bits, newton_map(y.value(), tau, sigma_sq));
        if clamped {
            clamps += 1;
            if clamps >= cfg.clamp_guard {
                return NewtonOutcome {
                    code: next,
                    iterations: i,
                    converged: false,
                };
            }
        }
        if next == y {
            let attracting = newton_map_slope(next.value(), tau, sigma_sq).abs() < 1.0;
            return NewtonOutcome {
                code: next,
                iterations: i,
                converged: attracting,
            };
        }
        y = next;
    }
    NewtonOutcome {
        code: y,
        iterations: cfg.max_iterations,
        converged: false,
    }
}

/// `|0>^L |c>^C -> |y(lambda(c))>^L |c>^C`, realized as an XOR-write permutation.
#[derive(Debug, Clone)]
pub struct SigmaTauOracle {
    pub tau: f64,
    pub m_bits: usize,
    pub t_bits: usize,
    /// Threshold code written for each eigenvalue-register label.
    pub codes: Vec<FixedPointCode>,
    pub iterations: Vec<usize>,
    /// Labels outside the encoding whose iteration failed; they write zero.
    pub unresolved_labels: Vec<usize>,
    permutation: BasisPermutation,
}

impl SigmaTauOracle {
    /// Largest Newton iteration count over the in-scope labels.
    pub fn max_iterations_in_scope(&self, encoding: &EigenEncoding) -> usize {
        encoding
            .labels
            .iter()
            .map(|&c| self.iterations[c])
            .max()
            .unwrap_or(0)
    }

    pub fn code_for_label(&self, c: usize) -> FixedPointCode {
        self.codes[c]
    }

    pub fn permutation(&self) -> &BasisPermutation {
        &self.permutation
    }

    /// XOR-writes the codes; applying it twice is the identity.
    pub fn apply(&self, state: &mut QuantumState, layout: &RegisterLayout) -> Result<()> {
        if layout.reg_l.len != self.m_bits || layout.reg_c.len != self.t_bits {
            return Err(QsvtError::DimensionMismatch {
                expected: self.m_bits + self.t_bits,
                actual: layout.reg_l.len + layout.reg_c.len,
            });
        }
        let mut qubits = layout.reg_l.qubits();
        qubits.extend(layout.reg_c.qubits());
        state.apply_basis_oracle(&qubits, &self.permutation)
    }
}

pub fn build_sigma_tau_oracle(
    encoding: &EigenEncoding,
    cfg: &NewtonConfig,
    tau: f64,
) -> Result<SigmaTauOracle> {
    if !(tau > 0.0) {
        return Err(QsvtError::InvalidConfig(format!("tau = {tau}")));
    }
    let pe = &encoding.config;
    let outcomes: Vec<NewtonOutcome> = (0..pe.period())
        .into_par_iter()
        .map(|c| newton_iterate(cfg, tau, pe.decode(c)))
        .collect();
    let mut unresolved_labels = Vec::new();
    let mut codes = Vec::with_capacity(outcomes.len());
    for (c, out) in outcomes.iter().enumerate() {
        if out.converged {
            codes.push(out.code);
        } else if encoding.is_in_scope(c) {
            return Err(QsvtError::NewtonDiverged {
                label: c,
                sigma_sq: pe.decode(c),
            });
        } else {
            unresolved_labels.push(c);
            codes.push(FixedPointCode {
                m_bits: cfg.m_bits,
                raw: 0,
            });
        }
    }
    let table: Vec<usize> = codes.iter().map(FixedPointCode::raw).collect();
    let permutation = BasisPermutation::xor_function(cfg.m_bits, pe.t_bits, &table)?;
    Ok(SigmaTauOracle {
        tau,
        m_bits: cfg.m_bits,
        t_bits: pe.t_bits,
        iterations: outcomes.iter().map(|o| o.iterations).collect(),
        codes,
        unresolved_labels,
        permutation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationConfig {
    pub alpha: f64,
    pub d_bits: usize,
}

impl RotationConfig {
    /// Requires `alpha > 0` and `alpha * y_max <= pi`, with `y_max` the largest
    /// threshold fraction the cascade will read, so `sin(alpha y)` stays on its
    /// first lobe.
    pub fn new(alpha: f64, d_bits: usize, y_max: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(QsvtError::InvalidConfig(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        if alpha * y_max > PI * (1.0 + 1e-12) {
            return Err(QsvtError::InvalidConfig(format!(
                "alpha * y_max = {} exceeds pi",
                alpha * y_max
            )));
        }
        Ok(Self { alpha, d_bits })
    }
}

/// For each L value `theta = 0.theta_1...theta_d`, rotates the ancilla to
/// `cos(alpha theta)|0> + sin(alpha theta)|1>` with one rotation `R_y(alpha / 2^(j-1))`
/// per L bit `theta_j`.
pub fn ry_cascade(
    state: &mut QuantumState,
    layout: &RegisterLayout,
    cfg: &RotationConfig,
) -> Result<()> {
    if layout.reg_l.len != cfg.d_bits {
        return Err(QsvtError::DimensionMismatch {
            expected: cfg.d_bits,
            actual: layout.reg_l.len,
        });
    }
    if state.probability(layout.ancilla, true) > 1e-12 {
        return Err(QsvtError::AncillaNotCleared);
    }
    apply_cascade(state, layout, cfg)
}

fn apply_cascade(
    state: &mut QuantumState,
    layout: &RegisterLayout,
    cfg: &RotationConfig,
) -> Result<()> {
    for (j, q) in layout.reg_l.qubits().into_iter().enumerate() {
        let angle = cfg.alpha / (1u64 << j) as f64;
        state.apply_controlled(&UnitaryMatrix::ry(angle), q, true, &[layout.ancilla])?;
    }
    Ok(())
}

/// Everything needed to undo the oracle and phase estimation.
#[derive(Debug, Clone, Copy)]
pub struct ForwardPass<'a> {
    pub layout: &'a RegisterLayout,
    pub oracle: &'a SigmaTauOracle,
    pub pe: &'a PhaseEstimationConfig,
    pub hamiltonian: &'a DMatrix<C64>,
}

/// Applies the oracle again and `U_PE^dagger`, returning the probability mass
/// left with L or C away from zero. Fails when that mass exceeds `tol`.
pub fn uncompute(state: &mut QuantumState, pass: ForwardPass<'_>, tol: f64) -> Result<f64> {
    pass.oracle.apply(state, pass.layout)?;
    phase_estimate_inverse(state, pass.pe, pass.layout, pass.hamiltonian)?;
    let residual = work_register_mass(state, pass.layout);
    if residual > tol {
        return Err(QsvtError::ResidualMass { residual });
    }
    Ok(residual)
}

/// Probability that L or C is nonzero. The two registers are adjacent in the layout.
pub fn work_register_mass(state: &QuantumState, layout: &RegisterLayout) -> f64 {
    let work = QubitRange::new(layout.reg_l.start, layout.reg_l.len + layout.reg_c.len);
    (1.0 - state.register_distribution(work)[0]).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpe::choose_t0;

    fn code(m: usize, raw: usize) -> FixedPointCode {
        FixedPointCode::new(m, raw).unwrap()
    }

    #[test]
    fn fixed_point_rounding() {
        assert_eq!(FixedPointCode::from_value(3, 0.75).raw(), 6);
        // 0.6875 * 8 = 5.5 ties upward.
        assert_eq!(FixedPointCode::from_value(3, 0.6875).raw(), 6);
        assert_eq!(FixedPointCode::from_value(3, 1.25).raw(), 7);
        assert_eq!(FixedPointCode::from_value(3, -0.2).raw(), 0);
        assert_eq!(code(8, 180).value(), 0.703125);
        assert!(FixedPointCode::new(3, 8).is_err());
    }

    #[test]
    fn newton_step_examples() {
        // y* = 1 - tau/sigma = 0.75 for sigma = 2, tau = 1/2 is a fixed point.
        assert_eq!(newton_step(code(8, 192), 0.5, 4.0), code(8, 192));
        // From 1/2: -(4 / 0.5)(-1/8) + 3/4 - 1/2 = 1.25, clamped to the top code.
        assert!((newton_map(0.5, 0.5, 4.0) - 1.25).abs() < 1e-15);
        assert_eq!(newton_step(code(8, 128), 0.5, 4.0).raw(), 255);
        // tau = sigma: the fixed point is y = 0.
        assert_eq!(newton_step(code(8, 0), 0.7, 0.49), code(8, 0));
    }

    #[test]
    fn newton_iterate_examples() {
        let pe = choose_t0(&[4.0, 1.0], 3).unwrap();
        let cfg = NewtonConfig::for_register(3, 0.5, &pe).unwrap();
        let out = newton_iterate(&cfg, 0.5, 4.0);
        assert!(out.converged);
        assert_eq!(out.code.raw(), 6);
        let out = newton_iterate(&cfg, 0.5, 1.0);
        assert!(out.converged);
        assert_eq!(out.code.raw(), 4);
        let out = newton_iterate(&cfg, 0.5, 0.16);
        assert!(out.converged);
        assert_eq!(out.code.raw(), 0);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn half_start_escapes_for_sigma_over_tau_of_four() {
        // sigma/tau = 4 lies outside the basin of the 1/2 start.
        let out = newton_iterate(&NewtonConfig::new(3).unwrap(), 0.5, 4.0);
        assert!(!out.converged);
        let out = newton_iterate(&NewtonConfig::new(8).unwrap(), 0.5, 4.0);
        assert!(!out.converged);
        // Inside the basin the 1/2 start is fine.
        let out = newton_iterate(&NewtonConfig::new(8).unwrap(), 0.5, 1.0);
        assert!(out.converged);
        assert_eq!(out.code.raw(), 128);
    }

    #[test]
    fn register_start_converges_where_half_start_fails() {
        let pe = choose_t0(&[49.0, 4.0], 6).unwrap();
        let cfg = NewtonConfig::for_register(8, 0.5, &pe).unwrap();
        for c in 1..pe.period() {
            let lambda = pe.decode(c);
            let out = newton_iterate(&cfg, 0.5, lambda);
            assert!(out.converged, "label {c}");
            let exact = (1.0 - 0.5 / lambda.sqrt()).max(0.0);
            assert!((out.code.value() - exact).abs() <= out.code.ulp() + 1e-12);
        }
    }

    fn worked_encoding() -> EigenEncoding {
        EigenEncoding::from_eigenvalues(&[4.0, 1.0], 3).unwrap()
    }

    #[test]
    fn oracle_on_worked_example() {
        let enc = worked_encoding();
        let cfg = NewtonConfig::for_register(3, 0.5, &enc.config).unwrap();
        let oracle = build_sigma_tau_oracle(&enc, &cfg, 0.5).unwrap();
        assert_eq!(oracle.code_for_label(0b100).raw(), 0b110);
        assert_eq!(oracle.code_for_label(0b001).raw(), 0b100);
        // Label 0 means sigma = 0 <= tau.
        assert_eq!(oracle.code_for_label(0).raw(), 0);

        let layout = RegisterLayout::new(3, 3, 0, 0);
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        amps[0b100] = C64::new(2.0 / 5f64.sqrt(), 0.0);
        amps[0b001] = C64::new(1.0 / 5f64.sqrt(), 0.0);
        s.load_register(layout.reg_c, &amps).unwrap();
        let before = s.clone();
        oracle.apply(&mut s, &layout).unwrap();
        let idx = |l: usize, c: usize| s.index_of(layout.reg_l, l) | s.index_of(layout.reg_c, c);
        assert!((s.amplitudes()[idx(0b110, 0b100)].re - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((s.amplitudes()[idx(0b100, 0b001)].re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        oracle.apply(&mut s, &layout).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn oracle_aborts_on_in_scope_divergence() {
        let enc = worked_encoding();
        let cfg = NewtonConfig::new(8).unwrap();
        assert!(matches!(
            build_sigma_tau_oracle(&enc, &cfg, 0.5),
            Err(QsvtError::NewtonDiverged { label: 4, .. })
        ));
    }

    #[test]
    fn thresholded_labels_write_zero() {
        let enc = worked_encoding();
        let cfg = NewtonConfig::for_register(4, 1.5, &enc.config).unwrap();
        let oracle = build_sigma_tau_oracle(&enc, &cfg, 1.5).unwrap();
        assert_eq!(oracle.code_for_label(1).raw(), 0);
        assert!(oracle.code_for_label(4).raw() > 0);
    }

    fn rotation_block(alpha: f64, d: usize, theta: usize) -> [[f64; 2]; 2] {
        let y = theta as f64 / (1 << d) as f64;
        let (s, c) = (alpha * y).sin_cos();
        [[c, -s], [s, c]]
    }

    #[test]
    fn cascade_equals_monolithic_rotation() {
        for d in 1..=6 {
            let alpha = 2.0944 * (1.0 + d as f64 / 10.0);
            let cfg = RotationConfig { alpha, d_bits: d };
            let layout = RegisterLayout::new(d, 0, 0, 0);
            let mut dev: f64 = 0.0;
            for theta in 0..1usize << d {
                for a_in in [false, true] {
                    let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
                    let mut amps = vec![C64::new(0.0, 0.0); 1 << d];
                    amps[theta] = C64::new(1.0, 0.0);
                    s.load_register(layout.reg_l, &amps).unwrap();
                    if a_in {
                        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
                    }
                    apply_cascade(&mut s, &layout, &cfg).unwrap();
                    let block = rotation_block(alpha, d, theta);
                    let col = usize::from(a_in);
                    for (row, entries) in block.iter().enumerate() {
                        let idx = s.index_of(QubitRange::new(0, 1), row)
                            | s.index_of(layout.reg_l, theta);
                        dev = dev.max((s.amplitudes()[idx] - C64::new(entries[col], 0.0)).norm());
                    }
                }
            }
            assert!(dev < 1e-12, "d = {d}: {dev}");
        }
    }

    #[test]
    fn cascade_examples() {
        let layout = RegisterLayout::new(3, 0, 0, 0);
        let cfg = RotationConfig::new(std::f64::consts::PI / 1.5, 3, 0.75).unwrap();
        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        ry_cascade(&mut s, &layout, &cfg).unwrap();
        assert_eq!(s.probability(0, true), 0.0);

        for (theta, expect) in [(6usize, 1.0), (4, 0.8660254037844386)] {
            let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
            let mut amps = vec![C64::new(0.0, 0.0); 8];
            amps[theta] = C64::new(1.0, 0.0);
            s.load_register(layout.reg_l, &amps).unwrap();
            ry_cascade(&mut s, &layout, &cfg).unwrap();
            let idx = s.index_of(QubitRange::new(0, 1), 1) | s.index_of(layout.reg_l, theta);
            assert!((s.amplitudes()[idx].re - expect).abs() < 1e-12);
        }

        let mut s = QuantumState::zero(layout.n_qubits()).unwrap();
        s.apply_unitary(&UnitaryMatrix::pauli_x(), &[0]).unwrap();
        assert_eq!(
            ry_cascade(&mut s, &layout, &cfg),
            Err(QsvtError::AncillaNotCleared)
        );
    }

    #[test]
    fn rotation_config_bounds() {
        assert!(RotationConfig::new(0.0, 3, 0.5).is_err());
        assert!(RotationConfig::new(4.0, 3, 0.875).is_err());
        assert!(RotationConfig::new(std::f64::consts::PI / 0.875, 3, 0.875).is_ok());
    }
}
