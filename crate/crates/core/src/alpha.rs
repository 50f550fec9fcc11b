//! Choice of the rotation scale `alpha`.
//!
//! With `y_k = (1 - tau/sigma_k)_+`, post-selection succeeds with probability
//! `P = sum sigma_k^2 sin^2(y_k alpha) / N1` and the output overlaps the exact
//! thresholded state with fidelity `F`. `alpha` is chosen to make
//! `G = sqrt(P) F` large; the closed forms here approximate `argmax G`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{QsvtError, Result};

const GRID_POINTS: usize = 1 << 12;
const GOLDEN_TOL: f64 = 1e-8;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Singular values with their threshold fractions `y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumProfile {
    sigma: Vec<f64>,
    y: Vec<f64>,
    n1: f64,
    n2: f64,
}

impl SpectrumProfile {
    /// `y_k = (1 - tau / sigma_k)_+` for a strictly descending spectrum.
    pub fn new(sigma: &[f64], tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(QsvtError::InvalidConfig(format!(
                "tau = {tau} must be positive"
            )));
        }
        let y: Vec<f64> = sigma.iter().map(|s| (1.0 - tau / s).max(0.0)).collect();
        Self::from_parts(sigma.to_vec(), y)
    }

    /// Uses the given threshold fractions directly, e.g. fixed-point rounded ones.
    pub fn from_parts(sigma: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() || sigma.len() != y.len() {
            return Err(QsvtError::DegenerateProfile(
                "sigma and y must be non-empty and equally long".into(),
            ));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(QsvtError::DegenerateProfile(
                "singular values must be positive".into(),
            ));
        }
        if sigma.windows(2).any(|w| w[1] >= w[0]) {
            return Err(QsvtError::DegenerateProfile(
                "singular values must be strictly descending".into(),
            ));
        }
        if y.iter().any(|v| !(0.0..1.0).contains(v)) {
            return Err(QsvtError::DegenerateProfile(
                "threshold fractions must lie in [0, 1)".into(),
            ));
        }
        if !(y[0] > 0.0) {
            return Err(QsvtError::DegenerateProfile(
                "every singular value is at or below tau".into(),
            ));
        }
        if y.len() > 1 && !(y[0] > y[1]) {
            return Err(QsvtError::DegenerateProfile(
                "y_1 must strictly exceed y_2".into(),
            ));
        }
        let n1 = compensated_sum(sigma.iter().map(|s| s * s));
        let n2 = compensated_sum(sigma.iter().zip(&y).map(|(s, v)| s * s * v * v));
        Ok(Self { sigma, y, n1, n2 })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n1(&self) -> f64 {
        self.n1
    }

    pub fn n2(&self) -> f64 {
        self.n2
    }

    fn weighted(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        compensated_sum(self.sigma.iter().zip(&self.y).map(|(&s, &y)| f(s * s, y)))
    }
}

/// `N_alpha = sum sigma_k^2 sin^2(y_k alpha)`.
pub fn n_alpha(profile: &SpectrumProfile, alpha: f64) -> f64 {
    profile.weighted(|s2, y| s2 * (y * alpha).sin().powi(2))
}

pub fn probability(profile: &SpectrumProfile, alpha: f64) -> f64 {
    n_alpha(profile, alpha) / profile.n1
}

pub fn fidelity_analytic(profile: &SpectrumProfile, alpha: f64) -> Result<f64> {
    if profile.n2 <= 0.0 {
        return Err(QsvtError::DegenerateProfile("N2 = 0".into()));
    }
    let na = n_alpha(profile, alpha);
    if na <= 0.0 {
        return Err(QsvtError::DegenerateProfile(format!(
            "P(alpha = {alpha}) = 0"
        )));
    }
    let cross = profile.weighted(|s2, y| s2 * y * (y * alpha).sin());
    Ok(cross / (profile.n2 * na).sqrt())
}

/// `G = sum sigma_k^2 y_k sin(y_k alpha) / sqrt(N1 N2)`.
pub fn g_objective(profile: &SpectrumProfile, alpha: f64) -> f64 {
    profile.weighted(|s2, y| s2 * y * (y * alpha).sin()) / (profile.n1 * profile.n2).sqrt()
}

/// `G' = sum sigma_k^2 y_k^2 cos(y_k alpha) / sqrt(N1 N2)`.
pub fn g_derivative(profile: &SpectrumProfile, alpha: f64) -> f64 {
    profile.weighted(|s2, y| s2 * y * y * (y * alpha).cos()) / (profile.n1 * profile.n2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlphaMethod {
    Intuitive,
    Taylor2,
    Taylor4,
    Numeric,
}

impl AlphaMethod {
    pub const ALL: [AlphaMethod; 4] =
        [Self::Intuitive, Self::Taylor2, Self::Taylor4, Self::Numeric];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Intuitive => "intuitive",
            Self::Taylor2 => "taylor2",
            Self::Taylor4 => "taylor4",
            Self::Numeric => "numeric",
        }
    }
}

impl fmt::Display for AlphaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlphaMethod {
    type Err = QsvtError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| QsvtError::Parse(format!("unknown alpha method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSolution {
    pub method: AlphaMethod,
    pub alpha: f64,
    pub p: f64,
    pub f: f64,
    pub g: f64,
    /// Set when Taylor-4 fell back to Taylor-2 on a negative discriminant.
    pub fallback: bool,
}

impl AlphaSolution {
    pub fn evaluate(profile: &SpectrumProfile, method: AlphaMethod, alpha: f64) -> Result<Self> {
        let p = probability(profile, alpha);
        let f = fidelity_analytic(profile, alpha)?;
        Ok(Self {
            method,
            alpha,
            p,
            f,
            g: p.sqrt() * f,
            fallback: false,
        })
    }
}

/// `alpha = pi / (2 y_1)`: the leading component sits on the sine peak.
pub fn alpha_intuitive(profile: &SpectrumProfile) -> Result<AlphaSolution> {
    AlphaSolution::evaluate(profile, AlphaMethod::Intuitive, PI / (2.0 * profile.y[0]))
}

/// Second-order truncation of `G' = 0`: `alpha^2 = 2 sum s^2 y^2 / sum s^2 y^4`.
pub fn alpha_taylor2(profile: &SpectrumProfile) -> Result<AlphaSolution> {
    let num = profile.weighted(|s2, y| s2 * y.powi(2));
    let den = profile.weighted(|s2, y| s2 * y.powi(4));
    if !(den > 0.0) {
        return Err(QsvtError::DegenerateProfile("sum sigma^2 y^4 = 0".into()));
    }
    AlphaSolution::evaluate(profile, AlphaMethod::Taylor2, (2.0 * num / den).sqrt())
}

/// Fourth-order truncation: the smaller root of `a x^2 - b x + c = 0` in `x = alpha^2`.
pub fn alpha_taylor4(profile: &SpectrumProfile) -> Result<AlphaSolution> {
    let a = profile.weighted(|s2, y| s2 * y.powi(6)) / 24.0;
    let b = profile.weighted(|s2, y| s2 * y.powi(4)) / 2.0;
    let c = profile.weighted(|s2, y| s2 * y.powi(2));
    if !(a > 0.0) {
        return Err(QsvtError::DegenerateProfile("sum sigma^2 y^6 = 0".into()));
    }
    let discriminant = b * b - 4.0 * a * c;
    if discriminant < 0.0 {
        return Err(QsvtError::NegativeDiscriminant { discriminant });
    }
    let x = (b - discriminant.sqrt()) / (2.0 * a);
    AlphaSolution::evaluate(profile, AlphaMethod::Taylor4, x.sqrt())
}

/// Taylor-4, falling back to Taylor-2 when the discriminant is negative.
pub fn alpha_taylor4_or_fallback(profile: &SpectrumProfile) -> Result<AlphaSolution> {
    match alpha_taylor4(profile) {
        Err(QsvtError::NegativeDiscriminant { .. }) => {
            let mut sol = alpha_taylor2(profile)?;
            sol.method = AlphaMethod::Taylor4;
            sol.fallback = true;
            Ok(sol)
        }
        other => other,
    }
}

/// Maximizes `G` on `(0, pi / y_1]`: a uniform grid of 4096 points, then
/// golden-section refinement around the best grid point.
pub fn alpha_numeric(profile: &SpectrumProfile) -> Result<AlphaSolution> {
    let hi = PI / profile.y[0];
    let g = |a: f64| g_objective(profile, a);
    let step = hi / GRID_POINTS as f64;
    let best =
        (1..=GRID_POINTS)
            .map(|i| (i, g(i as f64 * step)))
            .fold(
                (1, f64::MIN),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    let lo_edge = (best.0 - 1) as f64 * step;
    let hi_edge = ((best.0 + 1).min(GRID_POINTS)) as f64 * step;
    let refined = golden_section_max(g, lo_edge, hi_edge, GOLDEN_TOL);
    let grid_alpha = best.0 as f64 * step;
    let alpha = if g(refined) >= best.1 {
        refined
    } else {
        grid_alpha
    };
    AlphaSolution::evaluate(profile, AlphaMethod::Numeric, alpha)
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub fn solve(profile: &SpectrumProfile, method: AlphaMethod) -> Result<AlphaSolution> {
    match method {
        AlphaMethod::Intuitive => alpha_intuitive(profile),
        AlphaMethod::Taylor2 => alpha_taylor2(profile),
        AlphaMethod::Taylor4 => alpha_taylor4_or_fallback(profile),
        AlphaMethod::Numeric => alpha_numeric(profile),
    }
}
