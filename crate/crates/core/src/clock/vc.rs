use std::fmt;

use crate::trace::ThreadId;

/// Dense vector clock indexed by thread id. Missing components read as 0.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct VectorClock(Vec<u64>);

impl VectorClock {
    pub fn new(threads: usize) -> Self {
        VectorClock(vec![0; threads])
    }

    pub fn from_slice(v: &[u64]) -> Self {
        VectorClock(v.to_vec())
    }

    #[inline]
    pub fn get(&self, t: ThreadId) -> u64 {
        self.0.get(t.index()).copied().unwrap_or(0)
    }

    #[inline]
    pub fn set(&mut self, t: ThreadId, c: u64) {
        let i = t.index();
        if i >= self.0.len() {
            self.0.resize(i + 1, 0);
        }
        self.0[i] = c;
    }

    #[inline]
    pub fn increment(&mut self, t: ThreadId) {
        let c = self.get(t) + 1;
        self.set(t, c);
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    /// Pointwise max into `self`.
    #[inline]
    pub fn join(&mut self, other: &VectorClock) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0);
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            if b > *a {
                *a = b;
            }
        }
    }

    /// Pointwise `≤`.
    #[inline]
    pub fn leq(&self, other: &VectorClock) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(i, &a)| a <= other.0.get(i).copied().unwrap_or(0))
    }

    pub fn copy_from(&mut self, other: &VectorClock) {
        self.0.clear();
        self.0.extend_from_slice(&other.0);
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Debug for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (i, &c) in self.0.iter().enumerate() {
            if c != 0 {
                m.entry(&i, &c);
            }
        }
        m.finish()
    }
}

pub fn vc_join(a: &VectorClock, b: &VectorClock) -> VectorClock {
    let mut out = a.clone();
    out.join(b);
    out
}

pub fn vc_leq(a: &VectorClock, b: &VectorClock) -> bool {
    a.leq(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vc(pairs: &[(u32, u64)]) -> VectorClock {
        let mut v = VectorClock::default();
        for &(t, c) in pairs {
            v.set(ThreadId(t), c);
        }
        v
    }

    #[test]
    fn join_examples() {
        assert_eq!(vc_join(&vc(&[]), &vc(&[])), vc(&[]));
        assert_eq!(
            vc_join(&vc(&[(0, 3)]), &vc(&[(0, 1), (1, 5)])),
            vc(&[(0, 3), (1, 5)])
        );
    }

    #[test]
    fn leq_examples() {
        assert!(vc_leq(&vc(&[]), &vc(&[(0, 1)])));
        assert!(!vc_leq(&vc(&[(0, 2)]), &vc(&[(0, 1)])));
        // Trailing zeros do not matter.
        assert!(vc_leq(&VectorClock::new(4), &VectorClock::new(1)));
    }

    fn arb_vc() -> impl Strategy<Value = VectorClock> {
        proptest::collection::vec(0u64..6, 0..5).prop_map(VectorClock)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn join_is_upper_bound(a in arb_vc(), b in arb_vc()) {
            let j = vc_join(&a, &b);
            prop_assert!(vc_leq(&a, &j) && vc_leq(&b, &j));
        }

        #[test]
        fn leq_antisymmetric(a in arb_vc(), b in arb_vc()) {
            if vc_leq(&a, &b) && vc_leq(&b, &a) {
                prop_assert!(vc_leq(&vc_join(&a, &b), &a));
                let n = a.0.len().max(b.0.len());
                for i in 0..n {
                    prop_assert_eq!(a.get(ThreadId(i as u32)), b.get(ThreadId(i as u32)));
                }
            }
        }

        #[test]
        fn semilattice(a in arb_vc(), b in arb_vc(), c in arb_vc()) {
            let ab = vc_join(&a, &b);
            let ba = vc_join(&b, &a);
            prop_assert!(vc_leq(&ab, &ba) && vc_leq(&ba, &ab));
            prop_assert!(vc_leq(&vc_join(&a, &a), &a));
            let l = vc_join(&ab, &c);
            let r = vc_join(&a, &vc_join(&b, &c));
            prop_assert!(vc_leq(&l, &r) && vc_leq(&r, &l));
            // Least: anything above both is above the join.
            if vc_leq(&a, &c) && vc_leq(&b, &c) {
                prop_assert!(vc_leq(&ab, &c));
            }
        }
    }
}
