//! Gauss `₂F₁` and unit-argument `₃F₂` series.

use serde::{Deserialize, Serialize};

use super::special::ln_gamma_signed;
use crate::error::{domain, Error, Result};

/// Truncation policy for hypergeometric series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 100_000,
        }
    }
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(domain(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
        }
        if max_terms == 0 {
            return Err(domain("max_terms must be at least 1"));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

/// `Some(n)` when `x` is the non-positive integer `-n`.
fn non_positive_integer(x: f64) -> Option<usize> {
    if x <= 0.0 && x == x.floor() && x > -1e15 {
        Some((-x) as usize)
    } else {
        None
    }
}

/// Gauss hypergeometric function `₂F₁(a, b; c; x)` by direct summation.
///
/// At `x = 1` (with `c − a − b > 0`) Gauss's summation theorem is used.
pub fn gauss_2f1(a: f64, b: f64, c: f64, x: f64, ctl: SeriesControl) -> Result<f64> {
    if non_positive_integer(c).is_some() {
        return Err(domain(format!("c = {c} is a non-positive integer")));
    }
    if !x.is_finite() || x.abs() > 1.0 {
        return Err(domain(format!("|x| must not exceed 1, got {x}")));
    }
    let terminates = non_positive_integer(a).or(non_positive_integer(b));
    if x == 1.0 && terminates.is_none() {
        if c - a - b <= 0.0 {
            return Err(domain(format!(
                "at x = 1 the series needs c - a - b > 0, got {}",
                c - a - b
            )));
        }
        return gauss_sum_at_unit(a, b, c);
    }
    if x == -1.0 && terminates.is_none() {
        return Err(domain("x = -1 is outside the supported domain"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }

    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..ctl.max_terms {
        if let Some(n) = terminates {
            if k >= n {
                return Ok(sum);
            }
        }
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * x;
        term *= ratio;
        sum += term;
        if terminates.is_none() && ratio.abs() < 1.0 {
            // geometric bound on the remainder once the ratio is below one
            let bound = term.abs() * ratio.abs().max(x.abs()) / (1.0 - ratio.abs().max(x.abs()));
            if bound <= ctl.rel_tol * sum.abs() {
                return Ok(sum);
            }
        }
    }
    Err(Error::Convergence {
        partial_sum: sum,
        terms: ctl.max_terms,
    })
}

fn gauss_sum_at_unit(a: f64, b: f64, c: f64) -> Result<f64> {
    let num_c = ln_gamma_signed(c);
    let num_s = ln_gamma_signed(c - a - b);
    let den_a = ln_gamma_signed(c - a);
    let den_b = ln_gamma_signed(c - b);
    match (num_c, num_s, den_a, den_b) {
        (Some(gc), Some(gs), Some(ga), Some(gb)) => {
            let sign = gc.1 * gs.1 * ga.1 * gb.1;
            Ok(sign * (gc.0 + gs.0 - ga.0 - gb.0).exp())
        }
        // 1/Γ vanishes at a pole in the denominator
        (Some(_), Some(_), _, _) => Ok(0.0),
        _ => Err(domain("Gauss summation hit a pole")),
    }
}

/// Generalized hypergeometric `₃F₂(a₁, a₂, a₃; b₁, b₂; 1)`.
///
/// Requires the parameter excess `b₁ + b₂ − a₁ − a₂ − a₃ > 0` unless an upper
/// parameter is a non-positive integer (terminating series). Slowly
/// converging sums are accelerated by Richardson extrapolation in the
/// term count.
pub fn f3_2_at_unit(a1: f64, a2: f64, a3: f64, b1: f64, b2: f64, ctl: SeriesControl) -> Result<f64> {
    let s = ThreeF2::new([a1, a2, a3], [b1, b2])?;
    let (ln_scale, sum) = s.sum_scaled(ctl)?;
    Ok(sum * ln_scale.exp())
}

/// Parameters of a unit-argument `₃F₂` series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ThreeF2 {
    pub upper: [f64; 3],
    pub lower: [f64; 2],
}

impl ThreeF2 {
    pub fn new(upper: [f64; 3], lower: [f64; 2]) -> Result<Self> {
        if upper.iter().chain(&lower).any(|v| !v.is_finite()) {
            return Err(domain("3F2 parameters must be finite"));
        }
        if lower.iter().any(|&b| non_positive_integer(b).is_some()) {
            return Err(domain("3F2 lower parameter is a non-positive integer"));
        }
        let s = Self { upper, lower };
        if s.terminates().is_none() && s.excess() <= 0.0 {
            return Err(domain(format!(
                "3F2 at unit argument needs b1 + b2 - a1 - a2 - a3 > 0, got {}",
                s.excess()
            )));
        }
        Ok(s)
    }

    pub fn excess(&self) -> f64 {
        self.lower.iter().sum::<f64>() - self.upper.iter().sum::<f64>()
    }

    fn terminates(&self) -> Option<usize> {
        self.upper.iter().filter_map(|&a| non_positive_integer(a)).min()
    }

    fn ratio(&self, k: f64) -> f64 {
        let [a1, a2, a3] = self.upper;
        let [b1, b2] = self.lower;
        (a1 + k) * (a2 + k) * (a3 + k) / ((b1 + k) * (b2 + k) * (k + 1.0))
    }

    /// Two-term relation
    /// `₃F₂(a,b,c;d,e;1) = Γ(d)Γ(s) / (Γ(d−a)Γ(s+a)) · ₃F₂(a, e−b, e−c; e, s+a; 1)`
    /// for every choice of pivot `a` (upper) and `d` (lower). Returns the
    /// transformed series with its log prefactor, skipping versions that would
    /// introduce non-positive parameters.
    pub fn positive_transforms(&self) -> Vec<(f64, ThreeF2)> {
        let s = self.excess();
        let mut out = Vec::new();
        for pi in 0..3 {
            for di in 0..2 {
                let a = self.upper[pi];
                let (b, c) = match pi {
                    0 => (self.upper[1], self.upper[2]),
                    1 => (self.upper[0], self.upper[2]),
                    _ => (self.upper[0], self.upper[1]),
                };
                let d = self.lower[di];
                let e = self.lower[1 - di];
                let upper = [a, e - b, e - c];
                let lower = [e, s + a];
                if upper.iter().chain(&lower).any(|&v| v <= 0.0) || d - a <= 0.0 {
                    continue;
                }
                let ln_pref = super::special::ln_gamma(d) + super::special::ln_gamma(s)
                    - super::special::ln_gamma(d - a)
                    - super::special::ln_gamma(s + a);
                out.push((ln_pref, ThreeF2 { upper, lower }));
            }
        }
        out
    }

    /// Returns `(ln_scale, sum)` with the series value equal to `sum · e^{ln_scale}`.
    ///
    /// Terms decay like `k^{−1−s}` with `s` the excess, so the truncation error
    /// of the `n`-th partial sum expands in powers `n^{−s}, n^{−s−1}, …`.
    /// Partial sums at `n = N, 2N, 4N, …` are combined by Richardson
    /// elimination of those powers when direct summation would be too slow.
    pub fn sum_scaled(&self, ctl: SeriesControl) -> Result<(f64, f64)> {
        let terminate_at = self.terminates();
        let s = self.excess();
        let largest = self
            .upper
            .iter()
            .chain(&self.lower)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let mut next_level = (2.0 * largest).ceil().max(32.0) as usize;
        let mut ln_scale = 0.0f64;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut levels: Vec<f64> = Vec::new();
        let mut diag: Vec<f64> = Vec::new();
        for k in 0..ctl.max_terms {
            if let Some(n) = terminate_at {
                if k >= n {
                    return Ok((ln_scale, sum));
                }
            }
            let kf = k as f64;
            let r = self.ratio(kf);
            term *= r;
            sum += term;
            if sum.abs() > 1e250 {
                term *= 1e-250;
                sum *= 1e-250;
                ln_scale += 250.0 * std::f64::consts::LN_10;
                levels.iter_mut().for_each(|p| *p *= 1e-250);
                diag.iter_mut().for_each(|p| *p *= 1e-250);
            }
            if term == 0.0 {
                return Ok((ln_scale, sum));
            }
            if terminate_at.is_some() {
                continue;
            }
            if r.abs() < 1.0 {
                // algebraic tail: Σ_{j>k} t_j ≈ t_k · k / s once the ratio is ≈ 1 − (1+s)/k
                let tail = term.abs() * ((kf + 1.0) / s).max(r.abs() / (1.0 - r.abs()));
                if tail <= ctl.rel_tol * sum.abs() {
                    return Ok((ln_scale, sum));
                }
            }
            if k + 1 == next_level {
                next_level *= 2;
                levels.push(sum);
                let est = richardson(&levels, s);
                diag.push(est);
                if let [.., a, b] = diag[..] {
                    if diag.len() >= 3 && (b - a).abs() <= ctl.rel_tol * b.abs() {
                        return Ok((ln_scale, b));
                    }
                }
            }
        }
        Err(Error::Convergence {
            partial_sum: sum * ln_scale.exp(),
            terms: ctl.max_terms,
        })
    }
}

/// Last diagonal entry of the Richardson table for partial sums taken at
/// doubling lengths, eliminating error terms `n^{−s}, n^{−s−1}, …`.
fn richardson(levels: &[f64], s: f64) -> f64 {
    let mut row = levels.to_vec();
    let mut p = s;
    while row.len() > 1 {
        let f = 2f64.powf(p);
        row = row.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
        p += 1.0;
    }
    row[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{LN_2, PI};

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    #[test]
    fn two_f_one_examples() {
        assert_eq!(gauss_2f1(0.7, 1.3, 1.3, 0.0, ctl()).unwrap(), 1.0);
        assert_relative_eq!(gauss_2f1(1.0, 1.0, 2.0, 0.5, ctl()).unwrap(), 2.0 * LN_2, max_relative = 1e-12);
        assert_relative_eq!(gauss_2f1(0.5, 0.5, 1.5, 1.0, ctl()).unwrap(), PI / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn binomial_identity() {
        // (1 − x)^{−a} = ₂F₁(a, b; b; x)
        for &a in &[0.5, 1.0, 2.5, 7.0] {
            for &x in &[-0.8, -0.3, 0.1, 0.5, 0.9] {
                let got = gauss_2f1(a, 3.3, 3.3, x, ctl()).unwrap();
                assert_relative_eq!(got, (1.0 - x).powf(-a), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn terminating_series_is_polynomial() {
        // ₂F₁(−2, b; c; x) = 1 − 2bx/c + b(b+1)x²/(c(c+1))
        let (b, c, x) = (1.5, 2.5, 0.7);
        let want = 1.0 - 2.0 * b * x / c + b * (b + 1.0) * x * x / (c * (c + 1.0));
        assert_relative_eq!(gauss_2f1(-2.0, b, c, x, ctl()).unwrap(), want, max_relative = 1e-14);
        assert_relative_eq!(gauss_2f1(b, -2.0, c, x, ctl()).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn two_f_one_errors() {
        assert!(matches!(gauss_2f1(1.0, 1.0, -2.0, 0.5, ctl()), Err(Error::Domain(_))));
        assert!(matches!(gauss_2f1(1.0, 1.0, 1.5, 1.0, ctl()), Err(Error::Domain(_))));
        assert!(matches!(gauss_2f1(1.0, 1.0, 2.0, 1.5, ctl()), Err(Error::Domain(_))));
        let tight = SeriesControl::new(1e-12, 5).unwrap();
        match gauss_2f1(1.0, 1.0, 2.0, 0.99, tight) {
            Err(Error::Convergence { terms, .. }) => assert_eq!(terms, 5),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn three_f_two_examples() {
        assert_eq!(f3_2_at_unit(1.3, 0.0, 2.2, 3.1, 4.5, ctl()).unwrap(), 1.0);
        assert_relative_eq!(
            f3_2_at_unit(1.0, 1.0, 1.0, 2.0, 2.0, ctl()).unwrap(),
            PI * PI / 6.0,
            max_relative = 1e-11
        );
    }

    #[test]
    fn three_f_two_against_reference() {
        // mpmath hyp3f2(..., 1)
        let cases = [
            ([2.3, 1.0, 3.1], [3.3, 7.9], 1.454_017_529_468_096_691),
            ([0.5, 0.5, 0.5], [1.5, 1.5], 1.088_793_045_151_801_065),
            ([4.0, 1.0, 6.0], [5.0, 30.0], 1.198_666_666_666_666_667),
        ];
        for (u, l, want) in cases {
            let got = f3_2_at_unit(u[0], u[1], u[2], l[0], l[1], ctl()).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn three_f_two_domain() {
        assert!(matches!(f3_2_at_unit(1.0, 1.0, 1.0, 1.5, 1.5, ctl()), Err(Error::Domain(_))));
        assert!(matches!(f3_2_at_unit(1.0, 1.0, 1.0, -1.0, 5.0, ctl()), Err(Error::Domain(_))));
    }

    #[test]
    fn transforms_preserve_value() {
        let s = ThreeF2::new([2.3, 1.0, 3.1], [3.3, 7.9]).unwrap();
        let (l0, v0) = s.sum_scaled(ctl()).unwrap();
        let base = v0 * l0.exp();
        let ts = s.positive_transforms();
        assert!(!ts.is_empty());
        for (ln_pref, t) in ts {
            let (l, v) = t.sum_scaled(ctl()).unwrap();
            assert_relative_eq!(v * (l + ln_pref).exp(), base, max_relative = 1e-10);
        }
    }

    #[test]
    fn control_validation() {
        assert!(SeriesControl::new(0.0, 10).is_err());
        assert!(SeriesControl::new(1.0, 10).is_err());
        assert!(SeriesControl::new(1e-8, 0).is_err());
    }
}
