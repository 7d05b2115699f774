//! Seeded Monte Carlo: reproducible streams, Beta sampling, and the two
//! estimators of `P(X > Y)` from independent samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::beta_math::BetaParams;
use crate::error::{usage, Result};

/// The concrete generator behind every stream.
pub type StreamRng = ChaCha8Rng;

/// A reproducible random stream: ChaCha8 keyed by `master_seed`, with
/// `stream_id` selecting one of its 2⁶⁴ independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Derived stream for sub-task `index` (e.g. one replicate). The key of a
    /// child depends on the whole parent spec, so children of distinct
    /// parents do not collide.
    pub fn child(&self, index: u64) -> RngSpec {
        let key = splitmix64(self.master_seed ^ splitmix64(self.stream_id ^ 0xA076_1D64_78BD_642F));
        RngSpec {
            master_seed: key,
            stream_id: index,
        }
    }
}

/// A Monte Carlo estimate with its standard error and per-sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl McEstimate {
    /// Normal-approximation interval `value ± z·std_error`, clipped to [0, 1].
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (
            (self.value - z * self.std_error).max(0.0),
            (self.value + z * self.std_error).min(1.0),
        )
    }
}

/// Default per-estimate sample size.
pub const DEFAULT_MC_N: usize = 1000;

/// `n` independent Beta variates from the stream `rng`.
pub fn sample_beta(params: BetaParams, n: usize, rng: RngSpec) -> Result<Vec<f64>> {
    let mut r = rng.rng();
    sample_beta_with(params, n, &mut r)
}

pub fn sample_beta_with<R: rand::Rng + ?Sized>(params: BetaParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    let d = beta_dist(params)?;
    Ok((0..n).map(|_| d.sample(rng)).collect())
}

pub(crate) fn beta_dist(params: BetaParams) -> Result<Beta<f64>> {
    params.validate()?;
    Beta::new(params.alpha, params.beta).map_err(|e| crate::error::domain(e.to_string()))
}

fn same_len(xs: &[f64], ys: &[f64]) -> Result<usize> {
    if xs.len() != ys.len() {
        return Err(usage(format!("sample lengths differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.is_empty() {
        return Err(usage("samples must be non-empty"));
    }
    Ok(xs.len())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `#{j : v[j] < x}` in the sorted slice.
fn count_below(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|&v| v < x)
}

/// `(1/n²) #{(j, k) : X_j > Y_k}` by sort and binary search, `O(n log n)`.
/// Ties count as "not greater".
pub fn p_greater_full(xs: &[f64], ys: &[f64]) -> Result<McEstimate> {
    let n = same_len(xs, ys)?;
    let ys_sorted = sorted(ys);
    let count: usize = xs.iter().map(|&x| count_below(&ys_sorted, x)).sum();
    let value = count as f64 / (n as f64 * n as f64);
    let std_error = if n >= 2 {
        (asymptotic_var_full(xs, ys)? / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate { value, std_error, n })
}

/// Fraction of index-wise pairs with `X_k > Y_k`.
pub fn p_greater_naive(xs: &[f64], ys: &[f64]) -> Result<McEstimate> {
    let n = same_len(xs, ys)?;
    let hits = xs.iter().zip(ys).filter(|(x, y)| x > y).count();
    let value = hits as f64 / n as f64;
    let std_error = (asymptotic_var_naive(value)? / n as f64).sqrt();
    Ok(McEstimate { value, std_error, n })
}

fn sample_variance(v: impl Iterator<Item = f64> + Clone, n: usize) -> f64 {
    let mean = v.clone().sum::<f64>() / n as f64;
    v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0)
}

/// Plug-in `σ² = Var(F(Y)) + Var(G(X))` with empirical CDFs `F_n` of the
/// xs and `G_n` of the ys (sample variances, `n − 1` denominator).
pub fn asymptotic_var_full(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = same_len(xs, ys)?;
    if n < 2 {
        return Err(usage("asymptotic variance needs at least two samples"));
    }
    let xs_sorted = sorted(xs);
    let ys_sorted = sorted(ys);
    let nf = n as f64;
    let f_of_y = ys.iter().map(|&y| count_below(&xs_sorted, y) as f64 / nf);
    let g_of_x = xs.iter().map(|&x| count_below(&ys_sorted, x) as f64 / nf);
    Ok(sample_variance(f_of_y, n) + sample_variance(g_of_x, n))
}

/// `η² = p (1 − p)`.
pub fn asymptotic_var_naive(p_hat: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(usage(format!("p_hat must lie in [0, 1], got {p_hat}")));
    }
    Ok(p_hat * (1.0 - p_hat))
}

/// `P(θ₀ + shift > θ₁)` for independent Beta laws from `n` draws per arm,
/// with the full-comparison estimator.
pub fn p_shifted_greater(p0: BetaParams, p1: BetaParams, shift: f64, n: usize, rng: RngSpec) -> Result<McEstimate> {
    let mut r = rng.rng();
    let xs: Vec<f64> = sample_beta_with(p0, n, &mut r)?
        .into_iter()
        .map(|x| x + shift)
        .collect();
    let ys = sample_beta_with(p1, n, &mut r)?;
    p_greater_full(&xs, &ys)
}
