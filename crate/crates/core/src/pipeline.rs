//! End-to-end circuit: state preparation, phase estimation, the threshold
//! oracle, the rotation cascade, uncomputation and post-selection on the ancilla.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::alpha::{self, AlphaMethod, SpectrumProfile};
use crate::error::{QsvtError, Result};
use crate::qpe::{
    choose_t0_with_floor, label_leakage, phase_estimate, EigenEncoding, PhaseEstimationConfig,
};
use crate::rotation::{
    build_sigma_tau_oracle, ry_cascade, uncompute, FixedPointCode, ForwardPass, NewtonConfig,
    RotationConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_M_BITS, UNCOMPUTE_TOL,
};
use crate::sim::{inner, QuantumState, QubitRange, RegisterLayout, C64, DEFAULT_MAX_QUBITS};
use crate::spectral::{
    classical_svt, decompose, gram_padded, shrunk_singular_values, to_state, triple_state,
    InputMatrix, SpectralData, ThresholdSpec, DEFAULT_RANK_TOL,
};

/// Largest eigenvalue register tried when `t_bits` is left to the pipeline.
pub const MAX_AUTO_T_BITS: usize = 10;
/// Register width used when no exact encoding exists up to [`MAX_AUTO_T_BITS`].
pub const FALLBACK_T_BITS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaChoice {
    Method(AlphaMethod),
    Explicit(f64),
}

/// Where every Newton iteration starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonStart {
    /// `1/2` for every label.
    Half,
    /// Just below 1, inside the basin of every representable eigenvalue.
    Register,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tau: f64,
    pub alpha: AlphaChoice,
    /// `None` picks the smallest register that encodes every eigenvalue exactly.
    pub t_bits: Option<usize>,
    pub m_bits: usize,
    pub max_iterations: usize,
    pub newton_start: NewtonStart,
    pub max_qubits: usize,
    /// Samples the ancilla this many times in addition to the exact probability.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            alpha: AlphaChoice::Method(AlphaMethod::Intuitive),
            t_bits: None,
            m_bits: DEFAULT_M_BITS,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            newton_start: NewtonStart::Register,
            max_qubits: DEFAULT_MAX_QUBITS,
            shots: None,
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: AlphaChoice) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_t_bits(mut self, t_bits: usize) -> Self {
        self.t_bits = Some(t_bits);
        self
    }

    pub fn with_m_bits(mut self, m_bits: usize) -> Self {
        self.m_bits = m_bits;
        self
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub tau: f64,
    pub alpha: f64,
    pub alpha_method: Option<AlphaMethod>,
    pub sigma: Vec<f64>,
    /// `(1 - tau/sigma_k)_+` in full precision.
    pub y: Vec<f64>,
    /// Threshold fractions the oracle wrote for each singular value.
    pub y_codes: Vec<FixedPointCode>,
    pub labels: Vec<usize>,
    pub t_bits: usize,
    pub m_bits: usize,
    pub t0: f64,
    pub n_qubits: usize,
    /// Every eigenvalue sits on an integer label.
    pub exact_encoding: bool,
    /// Every `y_k` is representable with `m_bits`.
    pub y_representable: bool,
    pub p_sim: f64,
    pub f_sim: f64,
    pub p_analytic: f64,
    pub f_analytic: f64,
    /// Analytic values at the fixed-point `y` codes; `None` when rounding merged `y_1` and `y_2`.
    pub p_quantized: Option<f64>,
    pub f_quantized: Option<f64>,
    /// `N_alpha` from the simulation: `P_sim * sum sigma_k^2`.
    pub n_alpha: f64,
    /// `<u_k v_k | out>` on the normalized output.
    pub triple_amplitudes: Vec<C64>,
    /// Triple amplitudes scaled by `sqrt(N_alpha)`, comparable to `sigma_k sin(y_k alpha)`.
    pub unnormalized_amplitudes: Vec<f64>,
    pub residual: f64,
    pub leakage: f64,
    pub newton_iterations: usize,
    pub p_sampled: Option<f64>,
    /// Post-selected data register, normalized.
    pub output: Vec<C64>,
}

pub fn run_pipeline(matrix: &InputMatrix, cfg: &PipelineConfig) -> Result<SimulationResult> {
    let spec = decompose(matrix, DEFAULT_RANK_TOL)?;
    run_on_spectrum(&spec, cfg)
}

/// Eigenvalues at or below `floor = tau^2` may share a label.
fn resolve_encoding(
    eigenvalues: &[f64],
    t_bits: Option<usize>,
    floor: f64,
) -> Result<EigenEncoding> {
    let config = match t_bits {
        Some(t) => choose_t0_with_floor(eigenvalues, t, floor)?,
        None => auto_t0(eigenvalues, floor)?,
    };
    EigenEncoding::with_floor(config, eigenvalues, floor)
}

fn auto_t0(eigenvalues: &[f64], floor: f64) -> Result<PhaseEstimationConfig> {
    for t in 1..=MAX_AUTO_T_BITS {
        if let Ok(cfg) = choose_t0_with_floor(eigenvalues, t, floor) {
            if cfg.exact {
                return Ok(cfg);
            }
        }
    }
    choose_t0_with_floor(eigenvalues, FALLBACK_T_BITS, floor)
}

pub fn run_on_spectrum(spec: &SpectralData, cfg: &PipelineConfig) -> Result<SimulationResult> {
    let thr = ThresholdSpec::new(cfg.tau, spec)?;
    let tau = thr.tau();
    let profile = SpectrumProfile::new(spec.sigma(), tau)?;
    let (alpha, alpha_method) = match cfg.alpha {
        AlphaChoice::Method(m) => (alpha::solve(&profile, m)?.alpha, Some(m)),
        AlphaChoice::Explicit(a) => (a, None),
    };

    let eigenvalues: Vec<f64> = spec.sigma().iter().map(|s| s * s).collect();
    let encoding = resolve_encoding(&eigenvalues, cfg.t_bits, tau * tau)?;
    let pe = encoding.config;

    let (u_bits, v_bits) = spec.factor_bits();
    let layout = RegisterLayout::new(cfg.m_bits, pe.t_bits, u_bits, v_bits);
    if layout.n_qubits() > cfg.max_qubits {
        return Err(QsvtError::QubitBudgetExceeded {
            requested: layout.n_qubits(),
            budget: cfg.max_qubits,
        });
    }

    let newton = match cfg.newton_start {
        NewtonStart::Half => NewtonConfig::new(cfg.m_bits)?,
        NewtonStart::Register => NewtonConfig::for_register(cfg.m_bits, tau, &pe)?,
    }
    .with_max_iterations(cfg.max_iterations);
    let oracle = build_sigma_tau_oracle(&encoding, &newton, tau)?;
    let y_codes: Vec<FixedPointCode> = encoding
        .labels
        .iter()
        .map(|&c| oracle.code_for_label(c))
        .collect();
    let y_max = y_codes
        .iter()
        .map(FixedPointCode::value)
        .fold(0.0, f64::max);
    let rotation = RotationConfig::new(alpha, cfg.m_bits, y_max)?;

    let hamiltonian = gram_padded(spec);
    let mut state = QuantumState::zero_with_budget(layout.n_qubits(), cfg.max_qubits)?;
    state.load_register(layout.reg_b, &to_state(spec, spec.sigma())?)?;

    phase_estimate(&mut state, &pe, &layout, &hamiltonian)?;
    let leakage = label_leakage(&state, layout.reg_c, &encoding);
    oracle.apply(&mut state, &layout)?;
    ry_cascade(&mut state, &layout, &rotation)?;
    let tol = if pe.exact {
        UNCOMPUTE_TOL
    } else {
        f64::INFINITY
    };
    let pass = ForwardPass {
        layout: &layout,
        oracle: &oracle,
        pe: &pe,
        hamiltonian: &hamiltonian,
    };
    let residual = uncompute(&mut state, pass, tol)?;

    let (post, p_sim) = state.post_select(layout.ancilla, true)?;
    let background = post.index_of(QubitRange::new(layout.ancilla, 1), 1);
    let mut output = post.register_amplitudes(layout.reg_b, background);
    let slice_norm = output.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if slice_norm == 0.0 {
        return Err(QsvtError::FullyThresholded { probability: 0.0 });
    }
    output.iter_mut().for_each(|a| *a /= slice_norm);

    let target = to_state(spec, &shrunk_singular_values(spec, tau))?;
    let f_sim = inner(&target, &output).norm().min(1.0);

    let n_alpha = p_sim * spec.frobenius_sqr();
    let triple_amplitudes: Vec<C64> = (0..spec.rank())
        .map(|k| inner(&triple_state(spec, k), &output))
        .collect();
    let unnormalized_amplitudes = triple_amplitudes
        .iter()
        .map(|a| a.re * n_alpha.sqrt())
        .collect();

    let p_analytic = alpha::probability(&profile, alpha);
    let f_analytic = alpha::fidelity_analytic(&profile, alpha)?;
    let quantized = SpectrumProfile::from_parts(
        spec.sigma().to_vec(),
        y_codes.iter().map(FixedPointCode::value).collect(),
    )
    .ok();
    let p_quantized = quantized.as_ref().map(|q| alpha::probability(q, alpha));
    let f_quantized = quantized
        .as_ref()
        .and_then(|q| alpha::fidelity_analytic(q, alpha).ok());
    let y_representable = profile
        .y()
        .iter()
        .zip(&y_codes)
        .all(|(y, c)| (y - c.value()).abs() < 1e-12);

    let p_sampled = cfg.shots.map(|shots| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let hits = Binomial::new(shots, p_sim.clamp(0.0, 1.0))
            .expect("valid binomial")
            .sample(&mut rng);
        hits as f64 / shots.max(1) as f64
    });

    Ok(SimulationResult {
        tau,
        alpha,
        alpha_method,
        sigma: spec.sigma().to_vec(),
        y: profile.y().to_vec(),
        y_codes,
        labels: encoding.labels.clone(),
        t_bits: pe.t_bits,
        m_bits: cfg.m_bits,
        t0: pe.t0,
        n_qubits: layout.n_qubits(),
        exact_encoding: pe.exact,
        y_representable,
        p_sim,
        f_sim,
        p_analytic,
        f_analytic,
        p_quantized,
        f_quantized,
        n_alpha,
        triple_amplitudes,
        unnormalized_amplitudes,
        residual,
        leakage,
        newton_iterations: oracle.max_iterations_in_scope(&encoding),
        p_sampled,
        output,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleRow {
    pub k: usize,
    pub sigma: f64,
    pub y: f64,
    /// `sigma_k sin(y_k alpha) / sqrt(N_alpha)` with the oracle's `y` code.
    pub expected: f64,
    pub simulated: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `|<psi_S | out>|` with the target built from the classical SVT matrix.
    pub f_classical: f64,
    pub f_sim: f64,
    pub rows: Vec<TripleRow>,
    /// Largest output amplitude on a triple with `sigma_k <= tau`.
    pub thresholded_max: f64,
}

impl VerificationReport {
    pub fn f_agreement(&self) -> f64 {
        (self.f_classical - self.f_sim).abs()
    }
}

/// Recomputes the fidelity from the classical thresholded matrix and tabulates
/// the per-triple output amplitudes.
pub fn verify_against_classical(
    result: &SimulationResult,
    spec: &SpectralData,
    tau: f64,
) -> Result<VerificationReport> {
    let thr = ThresholdSpec::new(tau, spec)?;
    let svt = classical_svt(spec, &thr);
    let (u_bits, v_bits) = spec.factor_bits();
    let v_dim = 1usize << v_bits;
    let mut target = vec![C64::new(0.0, 0.0); (1usize << u_bits) * v_dim];
    for i in 0..svt.nrows() {
        for j in 0..svt.ncols() {
            target[i * v_dim + j] = C64::new(svt[(i, j)], 0.0);
        }
    }
    let norm = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QsvtError::ZeroWeights);
    }
    target.iter_mut().for_each(|a| *a /= norm);
    if target.len() != result.output.len() {
        return Err(QsvtError::DimensionMismatch {
            expected: target.len(),
            actual: result.output.len(),
        });
    }
    let f_classical = inner(&target, &result.output).norm();

    let weights: Vec<f64> = spec
        .sigma()
        .iter()
        .zip(&result.y_codes)
        .map(|(s, c)| s * (c.value() * result.alpha).sin())
        .collect();
    let n_alpha: f64 = weights.iter().map(|w| w * w).sum();
    let rows = (0..spec.rank())
        .map(|k| TripleRow {
            k,
            sigma: spec.sigma()[k],
            y: result.y_codes[k].value(),
            expected: weights[k] / n_alpha.sqrt(),
            simulated: result.triple_amplitudes[k],
        })
        .collect::<Vec<_>>();
    let thresholded_max = rows
        .iter()
        .filter(|r| r.sigma <= tau)
        .map(|r| r.simulated.norm())
        .fold(0.0, f64::max);
    Ok(VerificationReport {
        f_classical,
        f_sim: result.f_sim,
        rows,
        thresholded_max,
    })
}
