//! Random-input sweep comparing rotation-scale methods.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generate::random_spectral;
use crate::alpha::{self, AlphaMethod, SpectrumProfile};
use crate::error::{QsvtError, Result};
use crate::pipeline::{run_on_spectrum, AlphaChoice, PipelineConfig};
use crate::rotation::DEFAULT_M_BITS;
use crate::spectral::SpectralData;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_INSTANCES: usize = 120;
/// Largest median probability gap accepted as "almost the same".
pub const P_TOLERANCE: f64 = 0.02;
/// Largest shortfall of the intuitive median fidelity accepted as "slightly better".
pub const F_MARGIN: f64 = 0.005;
pub const SIMULATE_MAX_T_BITS: usize = 8;
pub const SIMULATE_MAX_RANK: usize = 8;

pub const COLUMNS: [&str; 18] = [
    "instance",
    "seed",
    "p",
    "q",
    "r",
    "tau",
    "alpha_method",
    "alpha",
    "p_analytic",
    "f_analytic",
    "p_sim",
    "f_sim",
    "newton_iterations",
    "t_bits",
    "m_bits",
    "exact",
    "wall_time",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Fixed(f64),
    /// `tau = fraction * sigma_1`.
    Fraction(f64),
}

impl TauPolicy {
    pub fn resolve(&self, sigma_1: f64) -> f64 {
        match *self {
            Self::Fixed(t) => t,
            Self::Fraction(f) => f * sigma_1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_instances: usize,
    pub p_range: (usize, usize),
    pub q_range: (usize, usize),
    pub rank_range: (usize, usize),
    pub tau: TauPolicy,
    pub methods: Vec<AlphaMethod>,
    pub seed: u64,
    pub simulate: bool,
    pub t_bits: Option<usize>,
    pub m_bits: usize,
    pub jobs: Option<usize>,
    pub timing: bool,
    /// Replaces the drawn singular values of every instance.
    pub sigma: Option<Vec<f64>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_instances: DEFAULT_INSTANCES,
            p_range: (2, 8),
            q_range: (2, 8),
            rank_range: (2, 8),
            tau: TauPolicy::Fraction(0.5),
            methods: vec![AlphaMethod::Intuitive, AlphaMethod::Taylor2],
            seed: 0,
            simulate: false,
            t_bits: None,
            m_bits: DEFAULT_M_BITS,
            jobs: None,
            timing: false,
            sigma: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QsvtError::InvalidConfig(msg));
        if self.n_instances == 0 {
            return bad("n_instances must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one alpha method is required".into());
        }
        for (name, (lo, hi)) in [
            ("p", self.p_range),
            ("q", self.q_range),
            ("rank", self.rank_range),
        ] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty"));
            }
        }
        if self.rank_range.0 > self.p_range.1.min(self.q_range.1) {
            return bad("minimum rank exceeds the largest matrix shape".into());
        }
        match self.tau {
            TauPolicy::Fraction(f) if !(f > 0.0 && f < 1.0) => {
                return bad(format!("tau fraction {f} outside (0, 1)"))
            }
            TauPolicy::Fixed(t) if !(t > 0.0) => return bad(format!("tau = {t} must be positive")),
            _ => {}
        }
        if self.sigma.as_ref().is_some_and(|s| s.is_empty()) {
            return bad("sigma override is empty".into());
        }
        if self.simulate {
            if self.rank_range.1 > SIMULATE_MAX_RANK {
                return bad(format!(
                    "simulation is limited to rank <= {SIMULATE_MAX_RANK}"
                ));
            }
            if self.t_bits.is_some_and(|t| t > SIMULATE_MAX_T_BITS) {
                return bad(format!(
                    "simulation is limited to t_bits <= {SIMULATE_MAX_T_BITS}"
                ));
            }
        }
        Ok(())
    }

    /// Seed of instance `id`; with the recorded shape it reproduces the matrix
    /// through [`super::generate::random_lowrank`].
    pub fn instance_seed(&self, id: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(id as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub instance: usize,
    pub seed: u64,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub tau: f64,
    pub alpha_method: AlphaMethod,
    pub alpha: f64,
    pub p_analytic: f64,
    pub f_analytic: f64,
    pub p_sim: Option<f64>,
    pub f_sim: Option<f64>,
    pub newton_iterations: Option<usize>,
    pub t_bits: Option<usize>,
    pub m_bits: Option<usize>,
    pub exact: Option<bool>,
    pub wall_time: Option<f64>,
    pub error: Option<String>,
}

impl ExperimentRecord {
    /// Simulated probability when present, analytic otherwise.
    pub fn probability(&self) -> f64 {
        self.p_sim.unwrap_or(self.p_analytic)
    }

    pub fn fidelity(&self) -> f64 {
        self.f_sim.unwrap_or(self.f_analytic)
    }

    /// `|P_sim - P_analytic| < 4 alpha 2^-m`; vacuous without a simulation.
    pub fn within_fixed_point_bound(&self) -> bool {
        match (self.p_sim, self.m_bits) {
            (Some(p), Some(m)) => {
                (p - self.p_analytic).abs() < 4.0 * self.alpha / (1u64 << m) as f64
            }
            _ => true,
        }
    }
}

fn shape(cfg: &SweepConfig, seed: u64) -> (usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0053_4841_5045);
    let r = match &cfg.sigma {
        Some(s) => s.len(),
        None => rng.random_range(cfg.rank_range.0..=cfg.rank_range.1),
    };
    let p = rng.random_range(cfg.p_range.0.max(r)..=cfg.p_range.1.max(r));
    let q = rng.random_range(cfg.q_range.0.max(r)..=cfg.q_range.1.max(r));
    (p, q, r)
}

fn run_instance(cfg: &SweepConfig, id: usize) -> Vec<ExperimentRecord> {
    let seed = cfg.instance_seed(id);
    let (p, q, r) = shape(cfg, seed);
    let spec = random_spectral(p, q, r, seed, cfg.sigma.as_deref());
    let tau = spec
        .as_ref()
        .map(|s| cfg.tau.resolve(s.sigma()[0]))
        .unwrap_or(f64::NAN);
    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let mut rec = ExperimentRecord {
                instance: id,
                seed,
                p,
                q,
                r,
                tau,
                alpha_method: method,
                alpha: f64::NAN,
                p_analytic: f64::NAN,
                f_analytic: f64::NAN,
                p_sim: None,
                f_sim: None,
                newton_iterations: None,
                t_bits: None,
                m_bits: None,
                exact: None,
                wall_time: None,
                error: None,
            };
            let outcome = spec
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| fill_record(cfg, s, tau, method, &mut rec));
            if let Err(e) = outcome {
                rec.error = Some(e.to_string());
            }
            if cfg.timing {
                rec.wall_time = Some(start.elapsed().as_secs_f64());
            }
            rec
        })
        .collect()
}

fn fill_record(
    cfg: &SweepConfig,
    spec: &SpectralData,
    tau: f64,
    method: AlphaMethod,
    rec: &mut ExperimentRecord,
) -> Result<()> {
    let profile = SpectrumProfile::new(spec.sigma(), tau)?;
    let sol = alpha::solve(&profile, method)?;
    rec.alpha = sol.alpha;
    rec.p_analytic = sol.p;
    rec.f_analytic = sol.f;
    if cfg.simulate {
        let mut pc = PipelineConfig::new(tau)
            .with_alpha(AlphaChoice::Explicit(sol.alpha))
            .with_m_bits(cfg.m_bits);
        pc.t_bits = Some(cfg.t_bits.unwrap_or(SIMULATE_MAX_T_BITS.min(6)));
        pc.seed = rec.seed;
        let res = run_on_spectrum(spec, &pc)?;
        rec.p_sim = Some(res.p_sim);
        rec.f_sim = Some(res.f_sim);
        rec.newton_iterations = Some(res.newton_iterations);
        rec.t_bits = Some(res.t_bits);
        rec.m_bits = Some(res.m_bits);
        rec.exact = Some(res.exact_encoding);
    }
    Ok(())
}

/// Runs every instance on a pool of `cfg.jobs` workers; records come back
/// ordered by instance, then by method as listed.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| QsvtError::InvalidConfig(e.to_string()))?;
    let mut per_instance: Vec<(usize, Vec<ExperimentRecord>)> = pool.install(|| {
        (0..cfg.n_instances)
            .into_par_iter()
            .map(|id| (id, run_instance(cfg, id)))
            .collect()
    });
    per_instance.sort_by_key(|(id, _)| *id);
    Ok(per_instance.into_iter().flat_map(|(_, r)| r).collect())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn fmt_opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// CSV with a `#schema=1` first line, a provenance comment, then a header row.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<()> {
    writeln!(out, "#schema={SCHEMA_VERSION}")?;
    writeln!(
        out,
        "#source=synthetic low-rank matrices, sigma log-uniform in [0.1, 10], Haar-like orthonormal factors"
    )?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| QsvtError::Io(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for r in records {
        w.write_record([
            r.instance.to_string(),
            r.seed.to_string(),
            r.p.to_string(),
            r.q.to_string(),
            r.r.to_string(),
            fmt_float(r.tau),
            r.alpha_method.to_string(),
            fmt_float(r.alpha),
            fmt_float(r.p_analytic),
            fmt_float(r.f_analytic),
            fmt_opt(r.p_sim, fmt_float),
            fmt_opt(r.f_sim, fmt_float),
            fmt_opt(r.newton_iterations, |n| n.to_string()),
            fmt_opt(r.t_bits, |n| n.to_string()),
            fmt_opt(r.m_bits, |n| n.to_string()),
            fmt_opt(r.exact, |b| b.to_string()),
            fmt_opt(r.wall_time, fmt_float),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: AlphaMethod,
    pub rows: usize,
    pub errors: usize,
    pub median_p: f64,
    pub median_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub methods: Vec<MethodSummary>,
    /// `|median P(intuitive) - median P(taylor2)|`.
    pub p_difference: Option<f64>,
    /// `median F(intuitive) - median F(taylor2)`.
    pub f_margin: Option<f64>,
    pub bound_violations: usize,
}

impl SweepSummary {
    pub fn from_records(records: &[ExperimentRecord]) -> Self {
        let mut methods: Vec<AlphaMethod> = records.iter().map(|r| r.alpha_method).collect();
        methods.sort();
        methods.dedup();
        let methods: Vec<MethodSummary> = methods
            .into_iter()
            .map(|m| {
                let ok: Vec<&ExperimentRecord> = records
                    .iter()
                    .filter(|r| r.alpha_method == m && r.error.is_none())
                    .collect();
                let rows = records.iter().filter(|r| r.alpha_method == m).count();
                MethodSummary {
                    method: m,
                    rows,
                    errors: rows - ok.len(),
                    median_p: median(&mut ok.iter().map(|r| r.probability()).collect::<Vec<_>>())
                        .unwrap_or(f64::NAN),
                    median_f: median(&mut ok.iter().map(|r| r.fidelity()).collect::<Vec<_>>())
                        .unwrap_or(f64::NAN),
                }
            })
            .collect();
        let find = |m| methods.iter().find(|s| s.method == m);
        let pair = find(AlphaMethod::Intuitive).zip(find(AlphaMethod::Taylor2));
        Self {
            p_difference: pair.map(|(i, t)| (i.median_p - t.median_p).abs()),
            f_margin: pair.map(|(i, t)| i.median_f - t.median_f),
            bound_violations: records
                .iter()
                .filter(|r| !r.within_fixed_point_bound())
                .count(),
            methods,
        }
    }

    pub fn probability_verdict(&self) -> Option<bool> {
        self.p_difference.map(|d| d <= P_TOLERANCE)
    }

    pub fn fidelity_verdict(&self) -> Option<bool> {
        self.f_margin.map(|m| m >= -F_MARGIN)
    }
}

impl fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:>5} {:>6} {:>12} {:>12}",
            "method", "rows", "errors", "median P", "median F"
        )?;
        for m in &self.methods {
            writeln!(
                f,
                "{:<10} {:>5} {:>6} {:>12.6} {:>12.6}",
                m.method.name(),
                m.rows,
                m.errors,
                m.median_p,
                m.median_f
            )?;
        }
        let verdict = |v: Option<bool>| match v {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "n/a",
        };
        if let (Some(d), Some(m)) = (self.p_difference, self.f_margin) {
            writeln!(
                f,
                "|median P(intuitive) - median P(taylor2)| = {d:.6} (tolerance {P_TOLERANCE}): {}",
                verdict(self.probability_verdict())
            )?;
            writeln!(
                f,
                "median F(intuitive) - median F(taylor2) = {m:.6} (margin -{F_MARGIN}): {}",
                verdict(self.fidelity_verdict())
            )?;
        }
        write!(
            f,
            "rows outside the fixed-point bound: {}",
            self.bound_violations
        )
    }
}
