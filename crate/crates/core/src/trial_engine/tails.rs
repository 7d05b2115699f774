//! Cached posterior tails for one design.
//!
//! The efficacy tail `P(θ₁ − θ₀ ≤ Δ | D)` decreases in the experimental
//! success count and the futility tail `P(θ₁ − θ₀ ≥ 0 | D)` increases in it,
//! so for fixed `(n₀, s₀, n₁)` each rule triggers on a contiguous range of
//! `s₁`. The engine stores the two switch points per key and finds them by a
//! galloping search seeded from neighbouring keys, which keeps a full trial
//! at a handful of tail evaluations per new key.

use dashmap::DashMap;

use super::data::Counts;
use super::design::{PriorPair, TrialDesign};
use crate::beta_math::{prob_t1_lt_t0, prob_t1_lt_t0_plus_delta, SeriesControl};
use crate::error::Result;

type Key = (u32, u32, u32);

/// Exact tails at one data point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tails {
    /// `P_{π_e}(θ₁ − θ₀ ≤ Δ | D)`.
    pub efficacy: f64,
    /// `P_{π_f}(θ₁ − θ₀ ≥ 0 | D)`.
    pub futility: f64,
}

#[derive(Debug)]
pub struct TailEngine {
    prior_e: PriorPair,
    prior_f: PriorPair,
    delta: f64,
    eps_e: f64,
    eps_f: f64,
    /// Smallest `s₁` at which efficacy triggers (`n₁ + 1` if none).
    eff_switch: DashMap<Key, u32>,
    /// Smallest `s₁` at which futility no longer triggers.
    fut_switch: DashMap<Key, u32>,
    eff_f: DashMap<Counts, f64>,
    exact: DashMap<Counts, Tails>,
}

impl TailEngine {
    pub fn new(design: &TrialDesign) -> Self {
        Self {
            prior_e: design.prior_e,
            prior_f: design.prior_f,
            delta: design.delta,
            eps_e: design.eps_e,
            eps_f: design.eps_f,
            eff_switch: DashMap::new(),
            fut_switch: DashMap::new(),
            eff_f: DashMap::new(),
            exact: DashMap::new(),
        }
    }

    fn efficacy_tail_under(&self, prior: &PriorPair, c: Counts) -> Result<f64> {
        let post = c.posterior(prior);
        prob_t1_lt_t0_plus_delta(post.control(), post.experimental(), self.delta, SeriesControl::default())
    }

    fn futility_tail_under(&self, prior: &PriorPair, c: Counts) -> Result<f64> {
        let post = c.posterior(prior);
        prob_t1_lt_t0(post.experimental(), post.control(), SeriesControl::default())
    }

    /// Both decision tails, memoized by counts.
    pub fn tails(&self, c: Counts) -> Result<Tails> {
        if let Some(t) = self.exact.get(&c) {
            return Ok(*t);
        }
        let t = Tails {
            efficacy: self.efficacy_tail_under(&self.prior_e, c)?,
            futility: self.futility_tail_under(&self.prior_f, c)?,
        };
        self.exact.insert(c, t);
        Ok(t)
    }

    /// `P_{π_f}(θ₁ − θ₀ ≤ Δ | D)`, the tail in the efficacy utility.
    pub fn efficacy_tail_f(&self, c: Counts) -> Result<f64> {
        if self.prior_f == self.prior_e {
            return Ok(self.tails(c)?.efficacy);
        }
        if let Some(v) = self.eff_f.get(&c) {
            return Ok(*v);
        }
        let v = self.efficacy_tail_under(&self.prior_f, c)?;
        self.eff_f.insert(c, v);
        Ok(v)
    }

    /// `P_{π_f}(θ₁ − θ₀ ≥ 0 | D)`.
    pub fn futility_tail_f(&self, c: Counts) -> Result<f64> {
        Ok(self.tails(c)?.futility)
    }

    /// Whether the efficacy and futility rules trigger at `c`.
    pub fn triggers(&self, c: Counts) -> Result<(bool, bool)> {
        let key = (c.n0, c.s0, c.n1);
        Ok((c.s1 >= self.eff_switch_at(key)?, c.s1 < self.fut_switch_at(key)?))
    }

    fn eff_switch_at(&self, key: Key) -> Result<u32> {
        if let Some(v) = self.eff_switch.get(&key) {
            return Ok(*v);
        }
        let (n0, s0, n1) = key;
        let v = if self.eps_e <= 0.0 {
            n1 + 1
        } else {
            let hint = self.neighbour_hint(&self.eff_switch, key);
            first_true(n1 + 1, hint, |s1| {
                Ok(self.efficacy_tail_under(&self.prior_e, Counts { n0, s0, n1, s1 })? < self.eps_e)
            })?
        };
        self.eff_switch.insert(key, v);
        Ok(v)
    }

    fn fut_switch_at(&self, key: Key) -> Result<u32> {
        if let Some(v) = self.fut_switch.get(&key) {
            return Ok(*v);
        }
        let (n0, s0, n1) = key;
        let v = if self.eps_f <= 0.0 {
            0
        } else {
            let hint = self.neighbour_hint(&self.fut_switch, key);
            first_true(n1 + 1, hint, |s1| {
                Ok(self.futility_tail_under(&self.prior_f, Counts { n0, s0, n1, s1 })? >= self.eps_f)
            })?
        };
        self.fut_switch.insert(key, v);
        Ok(v)
    }

    fn neighbour_hint(&self, map: &DashMap<Key, u32>, (n0, s0, n1): Key) -> Option<u32> {
        let near = [
            (n0, s0.wrapping_sub(1), n1),
            (n0, s0 + 1, n1),
            (n0, s0, n1.wrapping_sub(1)),
            (n0.wrapping_sub(1), s0, n1),
            (n0.wrapping_sub(1), s0.wrapping_sub(1), n1),
        ];
        near.iter().find_map(|k| map.get(k).map(|v| *v))
    }

    /// Number of exact tail pairs held.
    pub fn cached_points(&self) -> usize {
        self.exact.len()
    }
}

/// Smallest `s` in `0..=hi` with `pred(s)`, for a predicate that is monotone
/// (false then true) and treated as true at `hi`. Gallops outward from `hint`.
fn first_true<F>(hi: u32, hint: Option<u32>, mut pred: F) -> Result<u32>
where
    F: FnMut(u32) -> Result<bool>,
{
    let mut eval = |s: u32| if s >= hi { Ok(true) } else { pred(s) };
    let start = hint.unwrap_or(hi / 2).min(hi);
    // invariant: pred false below `lo`, true at `up`
    let (mut lo, mut up);
    if eval(start)? {
        up = start;
        let mut step = 1;
        loop {
            if up == 0 {
                return Ok(0);
            }
            let probe = up.saturating_sub(step);
            if eval(probe)? {
                up = probe;
                step *= 2;
            } else {
                lo = probe + 1;
                break;
            }
        }
    } else {
        lo = start + 1;
        let mut step = 1;
        loop {
            let probe = (lo + step - 1).min(hi);
            if eval(probe)? {
                up = probe;
                break;
            }
            lo = probe + 1;
            step *= 2;
        }
    }
    while lo < up {
        let mid = lo + (up - lo) / 2;
        if eval(mid)? {
            up = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(up)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gallop_finds_switch() {
        for hi in 0..40u32 {
            for target in 0..=hi {
                for hint in [None, Some(0), Some(target), Some(hi), Some(hi / 3)] {
                    let got = first_true(hi, hint, |s| Ok(s >= target)).unwrap();
                    assert_eq!(got, target, "hi {hi} target {target} hint {hint:?}");
                }
            }
        }
    }

    #[test]
    fn triggers_match_exact_tails() {
        let design = TrialDesign::standard();
        let engine = TailEngine::new(&design);
        for n0 in [5u32, 20, 40] {
            for n1 in [n0 - 1, n0, n0 + 1] {
                for s0 in (0..=n0).step_by(3) {
                    for s1 in 0..=n1 {
                        let c = Counts { n0, s0, n1, s1 };
                        let (e, f) = engine.triggers(c).unwrap();
                        let t = engine.tails(c).unwrap();
                        assert_eq!(e, t.efficacy < design.eps_e, "{c:?} {t:?}");
                        assert_eq!(f, t.futility < design.eps_f, "{c:?} {t:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_threshold_never_triggers() {
        let design = TrialDesign {
            eps_e: 0.0,
            eps_f: 0.0,
            ..TrialDesign::standard()
        };
        let engine = TailEngine::new(&design);
        let c = Counts { n0: 30, s0: 0, n1: 30, s1: 30 };
        assert_eq!(engine.triggers(c).unwrap(), (false, false));
    }
}
