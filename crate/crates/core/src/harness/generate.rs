//! Seeded random inputs.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{QsvtError, Result};
use crate::spectral::{InputMatrix, SpectralData};

pub const SIGMA_MIN: f64 = 0.1;
pub const SIGMA_MAX: f64 = 10.0;
const MIN_RELATIVE_GAP: f64 = 1e-6;

/// `k` orthonormal columns of a Gaussian matrix's QR factor, signs fixed by `R`.
pub fn random_orthonormal(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
    let g = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    (0..k)
        .map(|j| {
            let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
            q.column(j).into_owned() * sign
        })
        .collect()
}

/// `r` values log-uniform in `[0.1, 10]`, sorted descending with a relative gap
/// of at least `1e-6` between neighbours.
pub fn random_sigma(r: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
    let mut sigma: Vec<f64> = (0..r).map(|_| rng.random_range(lo..hi).exp()).collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    for k in 1..r {
        let cap = sigma[k - 1] * (1.0 - MIN_RELATIVE_GAP);
        if sigma[k] > cap {
            sigma[k] = cap;
        }
    }
    sigma
}

fn check_shape(p: usize, q: usize, r: usize) -> Result<()> {
    if r == 0 || p == 0 || q == 0 || r > p.min(q) {
        return Err(QsvtError::InvalidConfig(format!(
            "cannot build a rank-{r} matrix of shape {p}x{q}"
        )));
    }
    Ok(())
}

/// Singular triples of a random `p x q` rank-`r` matrix. `sigma` replaces the
/// drawn singular values when given.
pub fn random_spectral(
    p: usize,
    q: usize,
    r: usize,
    seed: u64,
    sigma: Option<&[f64]>,
) -> Result<SpectralData> {
    check_shape(p, q, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = random_orthonormal(p, r, &mut rng);
    let right = random_orthonormal(q, r, &mut rng);
    let drawn = random_sigma(r, &mut rng);
    let sigma = match sigma {
        Some(s) if s.len() != r => {
            return Err(QsvtError::DimensionMismatch {
                expected: r,
                actual: s.len(),
            })
        }
        Some(s) => s.to_vec(),
        None => drawn,
    };
    SpectralData::from_triples(sigma, left, right)
}

/// `U diag(sigma) V^T` with Haar-like orthonormal factors; identical per seed.
pub fn random_lowrank(p: usize, q: usize, r: usize, seed: u64) -> Result<InputMatrix> {
    random_spectral(p, q, r, seed, None)?.to_matrix()
}

/// A spectrum whose eigenvalues all land on integer labels and whose `y_k` are
/// exact `m_bits` fixed-point numbers.
#[derive(Debug, Clone)]
pub struct ExactInstance {
    pub spec: SpectralData,
    pub tau: f64,
    pub m_bits: usize,
    pub denominators: Vec<usize>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn subsets(pool: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << pool.len()) {
        if mask.count_ones() as usize <= max_len {
            out.push(
                pool.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &d)| d)
                    .collect(),
            );
        }
    }
    out
}

/// `(m_bits, d)` pairs with `sigma_k = tau 2^m / d_k`, so `y_k = 1 - d_k / 2^m`.
///
/// The labels `lambda_k t0 / 2 pi` are proportional to `1 / d_k^2`; a set is kept
/// when the smallest integer labelling fits in `t_bits_max` qubits. `d` stays above
/// `2^m / (2 sqrt 3)` so each `sigma / tau` is inside the Newton basin.
pub fn exact_candidates(max_rank: usize, t_bits_max: usize) -> Vec<(usize, Vec<usize>)> {
    let top = (1usize << t_bits_max) - 1;
    let mut out = Vec::new();
    for m in 2..=5usize {
        let n = 1usize << m;
        let d_lo = (n as f64 / (2.0 * 3f64.sqrt())).floor() as usize + 1;
        let pool: Vec<usize> = (d_lo..n).collect();
        for set in subsets(&pool, max_rank) {
            let lcm = set
                .iter()
                .fold(1usize, |acc, d| acc / gcd(acc, d * d) * d * d);
            if lcm / (set[0] * set[0]) <= top {
                out.push((m, set));
            }
        }
    }
    out
}

/// Draws one exactly encodable instance of rank at most 4 and shape at most 4x4.
pub fn exact_instance(seed: u64) -> Result<ExactInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = exact_candidates(4, 6);
    let (m_bits, denominators) = candidates[rng.random_range(0..candidates.len())].clone();
    let r = denominators.len();
    let p = rng.random_range(r.max(2)..=4);
    let q = rng.random_range(r.max(2)..=4);
    let tau = rng.random_range(0.25..2.0);
    let n = (1usize << m_bits) as f64;
    let sigma: Vec<f64> = denominators.iter().map(|&d| tau * n / d as f64).collect();
    let spec = random_spectral(p, q, r, rng.random(), Some(&sigma))?;
    Ok(ExactInstance {
        spec,
        tau,
        m_bits,
        denominators,
    })
}
