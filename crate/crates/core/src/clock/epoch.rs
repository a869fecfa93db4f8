use std::fmt;

use super::VectorClock;
use crate::trace::ThreadId;

const CLOCK_BITS: u32 = 48;
const CLOCK_MASK: u64 = (1 << CLOCK_BITS) - 1;
const BOTTOM_TID: u64 = 0xFFFF;

/// `c@t` packed into one word: thread id in the high 16 bits, clock in the
/// low 48. ⊥ uses the reserved thread id `0xFFFF` with clock 0; a clock
/// field of all ones means ∞ (a release that has not happened yet).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Epoch(u64);

impl Epoch {
    pub const BOTTOM: Epoch = Epoch(BOTTOM_TID << CLOCK_BITS);

    #[inline]
    pub fn new(t: ThreadId, c: u64) -> Epoch {
        assert!(c < CLOCK_MASK, "clock overflow on thread {}: {c}", t.0);
        assert!(
            (t.0 as u64) < BOTTOM_TID,
            "thread id {} out of epoch range",
            t.0
        );
        Epoch(((t.0 as u64) << CLOCK_BITS) | c)
    }

    pub fn infinite(t: ThreadId) -> Epoch {
        Epoch(((t.0 as u64) << CLOCK_BITS) | CLOCK_MASK)
    }

    #[inline]
    pub fn tid(self) -> ThreadId {
        ThreadId((self.0 >> CLOCK_BITS) as u32)
    }

    #[inline]
    pub fn clock(self) -> u64 {
        self.0 & CLOCK_MASK
    }

    #[inline]
    pub fn is_bottom(self) -> bool {
        self == Epoch::BOTTOM
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        !self.is_bottom() && self.clock() == CLOCK_MASK
    }

    pub fn to_bits(self) -> u64 {
        self.0
    }

    pub fn from_bits(bits: u64) -> Epoch {
        Epoch(bits)
    }

    #[inline]
    pub fn leq_vc(self, c: &VectorClock) -> bool {
        if self.is_bottom() {
            return true;
        }
        if self.is_infinite() {
            return false;
        }
        self.clock() <= c.get(self.tid())
    }
}

impl Default for Epoch {
    fn default() -> Self {
        Epoch::BOTTOM
    }
}

impl fmt::Debug for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_bottom() {
            f.write_str("⊥")
        } else if self.is_infinite() {
            write!(f, "∞@{}", self.tid().0)
        } else {
            write!(f, "{}@{}", self.clock(), self.tid().0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::epoch_leq_vc;
    use proptest::prelude::*;

    fn vc(pairs: &[(u32, u64)]) -> VectorClock {
        let mut v = VectorClock::default();
        for &(t, c) in pairs {
            v.set(ThreadId(t), c);
        }
        v
    }

    #[test]
    fn examples() {
        assert!(epoch_leq_vc(Epoch::BOTTOM, &vc(&[])));
        assert!(epoch_leq_vc(Epoch::new(ThreadId(1), 3), &vc(&[(1, 5)])));
        assert!(!epoch_leq_vc(Epoch::new(ThreadId(1), 3), &vc(&[(1, 2)])));
        assert!(!epoch_leq_vc(
            Epoch::infinite(ThreadId(0)),
            &vc(&[(0, 1_000_000_000)])
        ));
    }

    #[test]
    fn special_values_are_distinct() {
        assert!(Epoch::BOTTOM.is_bottom() && !Epoch::BOTTOM.is_infinite());
        let inf = Epoch::infinite(ThreadId(2));
        assert!(inf.is_infinite() && inf.tid() == ThreadId(2));
        assert!(!Epoch::new(ThreadId(0), 0).is_bottom());
    }

    #[test]
    #[should_panic(expected = "clock overflow")]
    fn overflow_aborts() {
        Epoch::new(ThreadId(0), CLOCK_MASK);
    }

    proptest! {
        #[test]
        fn pack_roundtrip(t in 0u32..0xFFFF, c in 0u64..CLOCK_MASK) {
            let e = Epoch::new(ThreadId(t), c);
            prop_assert_eq!(e.tid(), ThreadId(t));
            prop_assert_eq!(e.clock(), c);
            prop_assert_eq!(Epoch::from_bits(e.to_bits()), e);
        }

        #[test]
        fn agrees_with_singleton_vc(t in 0u32..4, c in 0u64..8, v in proptest::collection::vec(0u64..8, 0..5)) {
            let e = Epoch::new(ThreadId(t), c);
            let mut single = VectorClock::default();
            single.set(ThreadId(t), c);
            let v = VectorClock::from_slice(&v);
            prop_assert_eq!(e.leq_vc(&v), single.leq(&v));
        }
    }
}
