//! Subcommand bodies, kept free of argument parsing so tests can call them.

use std::fmt;

use nalgebra::DVector;

use crate::alpha::{self, AlphaMethod, AlphaSolution, SpectrumProfile};
use crate::error::Result;
use crate::pipeline::{
    run_pipeline, verify_against_classical, AlphaChoice, PipelineConfig, SimulationResult,
    VerificationReport,
};
use crate::spectral::{decompose, InputMatrix, SpectralData, DEFAULT_RANK_TOL};

pub const EXAMPLE_P: f64 = 0.9499;
pub const EXAMPLE_F: f64 = 0.9962;
pub const EXAMPLE_N_ALPHA: f64 = 4.7495;
pub const EXAMPLE_AMPLITUDES: [f64; 2] = [1.9999, 0.8660];
pub const EXAMPLE_TOL: f64 = 1e-3;

/// The 2x3 matrix with `sigma = (2, 1)`, `u = (1, +-1)/sqrt 2`,
/// `v_1 = (1, 2, 2)/3` and `v_2 = (2, 1, -2)/3`.
pub fn example_spectrum() -> SpectralData {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SpectralData::from_triples(
        vec![2.0, 1.0],
        vec![
            DVector::from_vec(vec![s, s]),
            DVector::from_vec(vec![s, -s]),
        ],
        vec![
            DVector::from_vec(vec![1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]),
            DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0]),
        ],
    )
    .expect("orthonormal by construction")
}

pub fn example_matrix() -> InputMatrix {
    example_spectrum().to_matrix().expect("finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, expected: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tol
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<12} = {:.6} (expected {} +- {:e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.expected,
            self.tol
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleOptions {
    pub tau: f64,
    pub alpha: Option<f64>,
    pub alpha_method: AlphaMethod,
    pub t_bits: usize,
    pub m_bits: usize,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        // y = (0.75, 0.5) is exact in two bits: 1 + 2 + 3 + 1 + 2 = 9 qubits.
        Self {
            tau: 0.5,
            alpha: None,
            alpha_method: AlphaMethod::Intuitive,
            t_bits: 3,
            m_bits: 2,
        }
    }
}

impl ExampleOptions {
    /// Checks apply only to the default threshold and rotation scale.
    pub fn reporting_only(&self) -> bool {
        self.alpha.is_some() || self.alpha_method != AlphaMethod::Intuitive || self.tau != 0.5
    }
}

#[derive(Debug, Clone)]
pub struct ExampleReport {
    pub result: SimulationResult,
    pub verification: VerificationReport,
    pub checks: Vec<Check>,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

pub fn cmd_example(opts: &ExampleOptions) -> Result<ExampleReport> {
    let alpha = match opts.alpha {
        Some(a) => AlphaChoice::Explicit(a),
        None => AlphaChoice::Method(opts.alpha_method),
    };
    let cfg = PipelineConfig::new(opts.tau)
        .with_alpha(alpha)
        .with_t_bits(opts.t_bits)
        .with_m_bits(opts.m_bits);
    let matrix = example_matrix();
    let result = run_pipeline(&matrix, &cfg)?;
    let spec = decompose(&matrix, DEFAULT_RANK_TOL)?;
    let verification = verify_against_classical(&result, &spec, opts.tau)?;
    let checks = if opts.reporting_only() {
        Vec::new()
    } else {
        vec![
            Check::new("P_sim", result.p_sim, EXAMPLE_P, EXAMPLE_TOL),
            Check::new("F_sim", result.f_sim, EXAMPLE_F, EXAMPLE_TOL),
            Check::new("N_alpha", result.n_alpha, EXAMPLE_N_ALPHA, EXAMPLE_TOL),
            Check::new(
                "amplitude_1",
                result.unnormalized_amplitudes[0],
                EXAMPLE_AMPLITUDES[0],
                EXAMPLE_TOL,
            ),
            Check::new(
                "amplitude_2",
                result.unnormalized_amplitudes[1],
                EXAMPLE_AMPLITUDES[1],
                EXAMPLE_TOL,
            ),
        ]
    };
    Ok(ExampleReport {
        result,
        verification,
        checks,
    })
}

pub fn format_result(r: &SimulationResult, v: &VerificationReport) -> String {
    let mut s = String::new();
    let method = r
        .alpha_method
        .map(|m| m.to_string())
        .unwrap_or_else(|| "explicit".into());
    s += &format!("qubits        {}\n", r.n_qubits);
    s += &format!(
        "t_bits        {} (t0 = {:.6}, labels {:?}, exact = {})\n",
        r.t_bits, r.t0, r.labels, r.exact_encoding
    );
    s += &format!(
        "m_bits        {} (y codes {:?})\n",
        r.m_bits,
        r.y_codes.iter().map(|c| c.value()).collect::<Vec<_>>()
    );
    s += &format!("tau           {}\n", r.tau);
    s += &format!("alpha         {:.6} ({method})\n", r.alpha);
    s += &format!(
        "P_sim         {:.6}   P_analytic {:.6}\n",
        r.p_sim, r.p_analytic
    );
    s += &format!(
        "F_sim         {:.6}   F_analytic {:.6}   F_classical {:.6}\n",
        r.f_sim, r.f_analytic, v.f_classical
    );
    s += &format!("N_alpha       {:.6}\n", r.n_alpha);
    s += &format!(
        "residual      {:.3e}   leakage {:.3e}   newton iterations {}\n",
        r.residual, r.leakage, r.newton_iterations
    );
    if let Some(p) = r.p_sampled {
        s += &format!("P_sampled     {p:.6}\n");
    }
    s += "k   sigma        y         expected      simulated     unnormalized\n";
    for (row, un) in v.rows.iter().zip(&r.unnormalized_amplitudes) {
        s += &format!(
            "{:<3} {:<12.6} {:<9.6} {:<13.6} {:<13.6} {:.6}\n",
            row.k + 1,
            row.sigma,
            row.y,
            row.expected,
            row.simulated.re,
            un
        );
    }
    s
}

impl fmt::Display for ExampleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_result(&self.result, &self.verification))?;
        if self.checks.is_empty() {
            return write!(f, "reporting mode: no checks");
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "example PASS"
            } else {
                "example FAIL"
            }
        )
    }
}

/// All four rotation scales for a spectrum.
pub fn cmd_alpha(sigma: &[f64], tau: f64) -> Result<Vec<AlphaSolution>> {
    let profile = SpectrumProfile::new(sigma, tau)?;
    AlphaMethod::ALL
        .iter()
        .map(|&m| alpha::solve(&profile, m))
        .collect()
}

pub fn format_alpha_table(solutions: &[AlphaSolution]) -> String {
    let mut s = format!(
        "{:<10} {:>12} {:>12} {:>12} {:>12}\n",
        "method", "alpha", "P", "F", "G"
    );
    for sol in solutions {
        s += &format!(
            "{:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6}{}\n",
            sol.method.name(),
            sol.alpha,
            sol.p,
            sol.f,
            sol.g,
            if sol.fallback {
                "  (taylor2 fallback)"
            } else {
                ""
            }
        );
    }
    s
}

pub fn cmd_pipeline(
    matrix: &InputMatrix,
    cfg: &PipelineConfig,
) -> Result<(SimulationResult, VerificationReport)> {
    let result = run_pipeline(matrix, cfg)?;
    let spec = decompose(matrix, DEFAULT_RANK_TOL)?;
    let verification = verify_against_classical(&result, &spec, cfg.tau)?;
    Ok((result, verification))
}
