//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_092_816,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], .., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerance and budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        res_k += w * pair;
        if j % 2 == 1 {
            res_g += WG[j / 2] * pair;
        }
    }
    let value = res_k * half;
    let err = ((res_k - res_g) * half).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]`, pre-splitting at the interior `breaks`.
///
/// Non-finite integrand values are treated as zero contributions; callers
/// evaluate densities in log space and return `0` where they underflow.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    ctl: QuadControl,
) -> Result<QuadResult> {
    if b <= a {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let guarded = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut points: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    points.push(a);
    points.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut heap = BinaryHeap::with_capacity(64);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        let (value, err) = gk21(&guarded, w[0], w[1]);
        total += value;
        total_err += err;
        heap.push(Piece {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    loop {
        let tol = ctl.abs_tol.max(ctl.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= ctl.max_intervals {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: total,
                abs_error: total_err,
                intervals: heap.len(),
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            heap.push(Piece { err: 0.0, ..worst });
            total_err -= worst.err;
            continue;
        }
        let (v1, e1) = gk21(&guarded, worst.a, mid);
        let (v2, e2) = gk21(&guarded, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    // Re-sum to shed the drift of the running updates.
    let (value, abs_error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    Ok(QuadResult {
        value,
        abs_error,
        intervals: heap.len(),
    })
}
