use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::PriorPair;
use crate::error::{domain, Result};
use crate::mc_engine::RngSpec;
use crate::posterior::{Arm, ArmPairPosterior, Outcome};

/// Sufficient statistics: patients and successes per arm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub n0: u32,
    pub s0: u32,
    pub n1: u32,
    pub s1: u32,
}

impl Counts {
    pub fn new(n0: u32, s0: u32, n1: u32, s1: u32) -> Result<Self> {
        if s0 > n0 || s1 > n1 {
            return Err(domain("successes exceed patients on an arm"));
        }
        Ok(Self { n0, s0, n1, s1 })
    }

    pub fn n(&self) -> u32 {
        self.n0 + self.n1
    }

    pub fn observe(&mut self, arm: Arm, outcome: Outcome) {
        let win = u32::from(outcome == Outcome::Success);
        match arm {
            Arm::Control => {
                self.n0 += 1;
                self.s0 += win;
            }
            Arm::Experimental => {
                self.n1 += 1;
                self.s1 += win;
            }
        }
    }

    pub fn posterior(&self, prior: &PriorPair) -> ArmPairPosterior {
        // counts are internally consistent, so only the prior can fail and
        // designs validate their priors up front
        ArmPairPosterior::from_counts(prior.control, prior.experimental, (self.n0, self.s0), (self.n1, self.s1))
            .expect("validated prior")
    }
}

/// Randomization in blocks of two: one patient per arm, order random.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockState {
    /// Arm owed to the second patient of the open block.
    pub pending: Option<Arm>,
}

impl BlockState {
    pub fn next_arm<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Arm {
        match self.pending.take() {
            Some(arm) => arm,
            None => {
                let first = if rng.random::<bool>() { Arm::Experimental } else { Arm::Control };
                self.pending = Some(first.other());
                first
            }
        }
    }
}

/// Arm of the `index`-th patient (0-based) in a schedule where block `k`
/// draws its order from `spec.child(k)`. Stateless, so a service can
/// recompute any assignment after a restart.
pub fn block_assignment(spec: RngSpec, index: u64) -> Arm {
    let mut rng = spec.child(index / 2).rng();
    let first = if rng.random::<bool>() { Arm::Experimental } else { Arm::Control };
    if index % 2 == 0 {
        first
    } else {
        first.other()
    }
}

/// Accrued data of an ongoing trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialData {
    pub counts: Counts,
    pub block: BlockState,
}

impl TrialData {
    pub fn from_counts(counts: Counts) -> Self {
        // an even total means every block is closed
        let pending = match (counts.n(), counts.n0.cmp(&counts.n1)) {
            (n, _) if n % 2 == 0 => None,
            (_, std::cmp::Ordering::Greater) => Some(Arm::Experimental),
            _ => Some(Arm::Control),
        };
        Self { counts, block: BlockState { pending } }
    }

    pub fn n(&self) -> u32 {
        self.counts.n()
    }

    pub fn observe(&mut self, arm: Arm, outcome: Outcome) {
        self.counts.observe(arm, outcome);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn blocks_balance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut b = BlockState::default();
        let mut c = Counts::default();
        for i in 0..101 {
            c.observe(b.next_arm(&mut rng), Outcome::Failure);
            assert!(c.n0.abs_diff(c.n1) <= 1);
            if i % 2 == 1 {
                assert_eq!(c.n0, c.n1);
            }
        }
    }

    #[test]
    fn stateless_assignment_is_balanced_and_stable() {
        let spec = RngSpec::new(11, 0);
        let arms: Vec<_> = (0..40).map(|i| block_assignment(spec, i)).collect();
        for pair in arms.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
        assert_eq!(arms, (0..40).map(|i| block_assignment(spec, i)).collect::<Vec<_>>());
        assert!(arms.iter().step_by(2).any(|a| *a == Arm::Control));
        assert!(arms.iter().step_by(2).any(|a| *a == Arm::Experimental));
    }

    #[test]
    fn counts_validation() {
        assert!(Counts::new(3, 4, 0, 0).is_err());
        let d = TrialData::from_counts(Counts::new(3, 1, 2, 2).unwrap());
        assert_eq!(d.block.pending, Some(Arm::Experimental));
    }
}
