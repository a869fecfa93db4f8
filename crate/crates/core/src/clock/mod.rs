//! Logical time: vector clocks, packed epochs, last-access values and
//! critical-section lists with late-filled release cells.

mod cell;
mod epoch;
mod vc;

pub use cell::{cs_pop_finalize, cs_push, ClockCell, CsList, CsNode};
pub use epoch::Epoch;
pub use vc::{vc_join, vc_leq, VectorClock};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("lock {0} is already in the critical-section list")]
    LockAlreadyHeld(u32),
    #[error("release with no active critical section")]
    EmptyList,
    #[error("release cell finalized twice")]
    AlreadyFinal,
}

/// `R_x` in the epoch-optimized tiers: one last reader, or one entry per thread.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AccessValue {
    Epoch(Epoch),
    Vector(VectorClock),
}

impl AccessValue {
    pub fn leq(&self, c: &VectorClock) -> bool {
        match self {
            AccessValue::Epoch(e) => e.leq_vc(c),
            AccessValue::Vector(v) => v.leq(c),
        }
    }
}

/// `e ⪯ C`: ⊥ is ordered before everything, a pending (∞) epoch before nothing.
pub fn epoch_leq_vc(e: Epoch, c: &VectorClock) -> bool {
    e.leq_vc(c)
}
