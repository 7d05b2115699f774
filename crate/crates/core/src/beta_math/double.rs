//! `P(θ₁ < θ₀ + Δ)` and friends for independent `θ₀ ~ Beta(p0)`, `θ₁ ~ Beta(p1)`.

use super::hypergeometric::{gauss_2f1, SeriesControl, ThreeF2};
use super::quadrature::{integrate, QuadControl};
use super::special::{beta_ln_pdf, ln_beta_unchecked, reg_inc_beta_unchecked};
use super::BetaParams;
use crate::error::{domain, Error, Result};

/// Tolerance of the 1-D tail integrals.
pub(crate) fn tail_quad_control() -> QuadControl {
    QuadControl {
        abs_tol: 1e-11,
        rel_tol: 0.0,
        max_intervals: 4000,
    }
}

/// Split points around the bulk of a Beta density, so the adaptive scheme
/// starts with panels matched to its scale.
pub(crate) fn beta_breaks(p: BetaParams) -> Vec<f64> {
    let m = p.mean();
    let sd = p.variance().sqrt();
    let mut out = Vec::with_capacity(9);
    out.push(m);
    for k in [1.0, 3.0, 6.0, 10.0] {
        out.push(m - k * sd);
        out.push(m + k * sd);
    }
    out.retain(|&x| x > 0.0 && x < 1.0);
    out
}

fn pdf(p: BetaParams) -> impl Fn(f64) -> f64 {
    let ln_b = ln_beta_unchecked(p.alpha, p.beta);
    move |x: f64| beta_ln_pdf(x, p.alpha, p.beta, ln_b).exp()
}

fn check(p: &BetaParams) -> Result<()> {
    p.validate()
}

fn clamp_prob(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Series for `P(θ₁ < θ₀)`:
/// `B(α₀+α₁, β₀+β₁) / (α₁ B(α₀,β₀) B(α₁,β₁)) · ₃F₂(α₁+β₁, 1, α₀+α₁; α₁+1, S; 1)`
/// with `S = α₀+α₁+β₀+β₁`, together with all of its two-term transforms.
fn lt_series_candidates(p0: BetaParams, p1: BetaParams) -> Result<Vec<(f64, ThreeF2)>> {
    let (a0, b0, a1, b1) = (p0.alpha, p0.beta, p1.alpha, p1.beta);
    let s = a0 + a1 + b0 + b1;
    let ln_pref = ln_beta_unchecked(a0 + a1, b0 + b1)
        - ln_beta_unchecked(a0, b0)
        - ln_beta_unchecked(a1, b1)
        - a1.ln();
    let base = ThreeF2::new([a1 + b1, 1.0, a0 + a1], [a1 + 1.0, s])?;
    let mut out = vec![(ln_pref, base)];
    out.extend(
        base.positive_transforms()
            .into_iter()
            .map(|(lp, t)| (ln_pref + lp, t)),
    );
    Ok(out)
}

fn best_candidate(c: Vec<(f64, ThreeF2)>) -> Option<(f64, ThreeF2)> {
    c.into_iter()
        .max_by(|x, y| x.1.excess().total_cmp(&y.1.excess()))
}

/// `P(θ₁ < θ₀)` from the unit-argument `₃F₂` closed form only.
///
/// Among the direct series, its two-term transforms, and the same set for the
/// complementary event, the representation with the largest parameter excess
/// (fastest decaying terms) is summed. Errors are returned, never masked.
pub fn prob_t1_lt_t0_closed_form(p0: BetaParams, p1: BetaParams, ctl: SeriesControl) -> Result<f64> {
    check(&p0)?;
    check(&p1)?;
    let direct = best_candidate(lt_series_candidates(p0, p1)?);
    let comp = best_candidate(lt_series_candidates(p1, p0)?);
    let (use_comp, (ln_pref, series)) = match (direct, comp) {
        (Some(d), Some(c)) if c.1.excess() > d.1.excess() + 0.5 => (true, c),
        (Some(d), _) => (false, d),
        (None, Some(c)) => (true, c),
        (None, None) => return Err(domain("no convergent representation")),
    };
    let (ln_scale, sum) = series.sum_scaled(ctl)?;
    let v = sum * (ln_scale + ln_pref).exp();
    if !v.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&v) {
        return Err(Error::Convergence {
            partial_sum: v,
            terms: ctl.max_terms,
        });
    }
    Ok(clamp_prob(if use_comp { 1.0 - v } else { v }))
}

/// `P(θ₁ < θ₀)` for independent Beta variables.
///
/// Uses the `₃F₂` closed form; if that series does not reach `ctl.rel_tol`
/// within budget, falls back to the 1-D quadrature route instead of
/// returning a low-accuracy value.
pub fn prob_t1_lt_t0(p0: BetaParams, p1: BetaParams, ctl: SeriesControl) -> Result<f64> {
    match prob_t1_lt_t0_closed_form(p0, p1, ctl) {
        Ok(v) => Ok(v),
        Err(Error::Convergence { .. }) => {
            log::debug!("3F2 route did not converge for {p0:?} vs {p1:?}; using quadrature");
            shifted_quadrature(p0, p1, 0.0)
        }
        Err(e) => Err(e),
    }
}

/// `P(θ₁ < c·θ₀)` for `c > 0`, by quadrature of `I_{min(1, cx)}(α₁, β₁)`
/// against the density of `θ₀`.
pub fn prob_t1_lt_c_t0(p0: BetaParams, p1: BetaParams, c: f64, ctl: SeriesControl) -> Result<f64> {
    check(&p0)?;
    check(&p1)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(domain(format!("c must be positive and finite, got {c}")));
    }
    if c == 1.0 {
        return prob_t1_lt_t0(p0, p1, ctl);
    }
    let f0 = pdf(p0);
    let upper = (1.0 / c).min(1.0);
    let mut breaks = beta_breaks(p0);
    breaks.extend(beta_breaks(p1).into_iter().map(|y| y / c));
    let inner = |x: f64| {
        let v = f0(x);
        if v == 0.0 {
            return 0.0;
        }
        v * reg_inc_beta_unchecked((c * x).min(1.0), p1.alpha, p1.beta).unwrap_or(f64::NAN)
    };
    let r = integrate(inner, 0.0, upper, &breaks, tail_quad_control())?;
    let tail = if upper < 1.0 {
        1.0 - reg_inc_beta_unchecked(upper, p0.alpha, p0.beta)?
    } else {
        0.0
    };
    Ok(clamp_prob(r.value + tail))
}

/// `∫ p₀(x) I_{x+Δ}(α₁, β₁) dx`, the quadrature route for any real `Δ`.
///
/// Outside `[max(0, −Δ), min(1, 1 − Δ)]` the inner CDF is 0 or 1, so the
/// integrand is only integrated where it is smooth and the remaining mass is
/// added in closed form.
fn shifted_quadrature(p0: BetaParams, p1: BetaParams, delta: f64) -> Result<f64> {
    if delta >= 1.0 {
        return Ok(1.0);
    }
    if delta <= -1.0 {
        return Ok(0.0);
    }
    let lo = (-delta).max(0.0);
    let hi = (1.0 - delta).min(1.0);
    let f0 = pdf(p0);
    let mut breaks = beta_breaks(p0);
    breaks.extend(beta_breaks(p1).into_iter().map(|y| y - delta));
    let integrand = |x: f64| {
        let v = f0(x);
        if v == 0.0 {
            return 0.0;
        }
        let y = (x + delta).clamp(0.0, 1.0);
        v * reg_inc_beta_unchecked(y, p1.alpha, p1.beta).unwrap_or(f64::NAN)
    };
    let r = integrate(integrand, lo, hi, &breaks, tail_quad_control())?;
    let tail = if hi < 1.0 {
        1.0 - reg_inc_beta_unchecked(hi, p0.alpha, p0.beta)?
    } else {
        0.0
    };
    Ok(clamp_prob(r.value + tail))
}

/// `P(θ₁ < θ₀ + Δ)`; nondecreasing in `Δ`, 0 for `Δ ≤ −1` and 1 for `Δ ≥ 1`.
///
/// `Δ = 0` goes through [`prob_t1_lt_t0`]; every other margin is integrated
/// by adaptive Gauss–Kronrod with absolute tolerance `1e-11`.
pub fn prob_t1_lt_t0_plus_delta(
    p0: BetaParams,
    p1: BetaParams,
    delta: f64,
    ctl: SeriesControl,
) -> Result<f64> {
    check(&p0)?;
    check(&p1)?;
    if delta.is_nan() {
        return Err(domain("delta is NaN"));
    }
    if delta == 0.0 {
        return prob_t1_lt_t0(p0, p1, ctl);
    }
    shifted_quadrature(p0, p1, delta)
}

/// Regularized `I_x(a, b)` through the positive-term Gauss series
/// `x^a (1−x)^b / a · ₂F₁(a+b, 1; a+1; x)`, reflected above the mode-side
/// switch point where the series would converge slowly.
fn inc_beta_hyp(x: f64, a: f64, b: f64, ctl: SeriesControl) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return Ok(1.0 - inc_beta_hyp(1.0 - x, b, a, ctl)?);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - a.ln() - ln_beta_unchecked(a, b);
    Ok(ln_front.exp() * gauss_2f1(a + b, 1.0, a + 1.0, x, ctl)?)
}

/// The three Gauss-series forms of the regularized incomplete Beta function:
///
/// 1. `x^a/a · ₂F₁(a, 1−b; a+1; x) / B(a,b)`
/// 2. `x^a (1−x)^b/a · ₂F₁(a+b, 1; a+1; x) / B(a,b)`
/// 3. `1 − (1−x)^b/b · ₂F₁(b, 1−a; b+1; 1−x) / B(a,b)`
///
/// Each is summed directly (no reflection), so callers should keep `x` away
/// from the end where a given form converges slowly.
pub fn incomplete_beta_representations(x: f64, a: f64, b: f64, ctl: SeriesControl) -> Result<[f64; 3]> {
    BetaParams::new(a, b)?;
    if !(0.0..1.0).contains(&x) || x == 0.0 {
        return Err(domain(format!("x must lie in (0, 1), got {x}")));
    }
    let ln_b = ln_beta_unchecked(a, b);
    let first = (a * x.ln() - a.ln() - ln_b).exp() * gauss_2f1(a, 1.0 - b, a + 1.0, x, ctl)?;
    let second = (a * x.ln() + b * (-x).ln_1p() - a.ln() - ln_b).exp()
        * gauss_2f1(a + b, 1.0, a + 1.0, x, ctl)?;
    let third =
        1.0 - (b * (-x).ln_1p() - b.ln() - ln_b).exp() * gauss_2f1(b, 1.0 - a, b + 1.0, 1.0 - x, ctl)?;
    Ok([first, second, third])
}

/// `P(θ₁ < θ₀ + Δ)` from the hypergeometric expansion: for `Δ > 0`,
///
/// `∫₀^{1−Δ} p₀(x) I_{x+Δ}(α₁,β₁) dx + Δ^{β₀} / (β₀ B(α₀,β₀)) · ₂F₁(β₀, 1−α₀; β₀+1; Δ)`
///
/// with the inner incomplete Beta from its Gauss series and the boundary
/// mass in closed form. Negative margins use the complementary event.
/// Intended as a cross-check of [`prob_t1_lt_t0_plus_delta`] for moderate
/// shapes and `|Δ| ≤ 0.5`.
pub fn prob_t1_lt_t0_plus_delta_series(
    p0: BetaParams,
    p1: BetaParams,
    delta: f64,
    ctl: SeriesControl,
) -> Result<f64> {
    check(&p0)?;
    check(&p1)?;
    if delta.is_nan() {
        return Err(domain("delta is NaN"));
    }
    if delta >= 1.0 {
        return Ok(1.0);
    }
    if delta <= -1.0 {
        return Ok(0.0);
    }
    if delta == 0.0 {
        return prob_t1_lt_t0_closed_form(p0, p1, ctl);
    }
    if delta < 0.0 {
        // P(θ₁ < θ₀ − |Δ|) = 1 − P(θ₀ < θ₁ + |Δ|)
        return Ok(clamp_prob(1.0 - prob_t1_lt_t0_plus_delta_series(p1, p0, -delta, ctl)?));
    }
    let f0 = pdf(p0);
    let mut breaks = beta_breaks(p0);
    breaks.extend(beta_breaks(p1).into_iter().map(|y| y - delta));
    let integrand = |x: f64| {
        let v = f0(x);
        if v == 0.0 {
            return 0.0;
        }
        v * inc_beta_hyp(x + delta, p1.alpha, p1.beta, ctl).unwrap_or(f64::NAN)
    };
    let r = integrate(integrand, 0.0, 1.0 - delta, &breaks, tail_quad_control())?;
    // Δ^{β₀}/β₀ ₂F₁(β₀, 1−α₀; β₀+1; Δ) / B(α₀, β₀) = I_Δ(β₀, α₀)
    let tail = inc_beta_hyp(delta, p0.beta, p0.alpha, ctl)?;
    Ok(clamp_prob(r.value + tail))
}

/// Brute-force `P(θ₁ < θ₀ + Δ)`: nested adaptive quadrature of the joint
/// density over `{y < x + Δ}`, sharing no code with the incomplete Beta
/// routines. Slow; meant for tests.
pub fn quad_oracle(p0: BetaParams, p1: BetaParams, delta: f64) -> Result<f64> {
    check(&p0)?;
    check(&p1)?;
    if delta.is_nan() {
        return Err(domain("delta is NaN"));
    }
    if delta >= 1.0 {
        return Ok(1.0);
    }
    if delta <= -1.0 {
        return Ok(0.0);
    }
    let f0 = pdf(p0);
    let f1 = pdf(p1);
    let inner_ctl = QuadControl {
        abs_tol: 1e-13,
        rel_tol: 0.0,
        max_intervals: 20_000,
    };
    let outer_ctl = QuadControl {
        abs_tol: 1e-12,
        rel_tol: 0.0,
        max_intervals: 20_000,
    };
    let b1 = beta_breaks(p1);
    let mut failure: std::cell::Cell<Option<Error>> = std::cell::Cell::new(None);
    let cdf1 = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        // integrate the smaller side for accuracy near 1
        match integrate(&f1, 0.0, t, &b1, inner_ctl) {
            Ok(r) => r.value,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };
    let mut breaks = beta_breaks(p0);
    breaks.extend(b1.iter().map(|y| y - delta));
    breaks.push(1.0 - delta);
    breaks.push(-delta);
    let outer = |x: f64| {
        let v = f0(x);
        if v == 0.0 {
            return 0.0;
        }
        v * cdf1(x + delta)
    };
    let r = integrate(outer, 0.0, 1.0, &breaks, outer_ctl)?;
    if let Some(e) = failure.get_mut().take() {
        return Err(e);
    }
    Ok(clamp_prob(r.value))
}
