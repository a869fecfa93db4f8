use std::fmt;

use super::{LockId, Op, ThreadId, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// Acquire of a lock that is already held (by anyone, including the acquirer).
    DoubleAcquire,
    /// Release of a lock held by another thread.
    ForeignRelease,
    /// Release of a lock nobody holds.
    ReleaseWithoutHold,
    /// Release of a held lock that is not the thread's innermost one.
    NonNestedRelease,
    /// Event of a thread that is later forked, or fork of a thread that already ran.
    EventBeforeFork,
    /// Event of a thread after it was joined.
    EventAfterJoin,
    /// Second fork of the same thread.
    DuplicateFork,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::DoubleAcquire => "double-acquire",
            ViolationKind::ForeignRelease => "foreign-release",
            ViolationKind::ReleaseWithoutHold => "release-without-hold",
            ViolationKind::NonNestedRelease => "non-nested-release",
            ViolationKind::EventBeforeFork => "event-before-fork",
            ViolationKind::EventAfterJoin => "event-after-join",
            ViolationKind::DuplicateFork => "duplicate-fork",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// Lock still held when the trace ends.
    DanglingHold { thread: ThreadId, lock: LockId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WellFormedReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl WellFormedReport {
    pub fn is_well_formed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check lock discipline and fork/join placement.
pub fn validate(trace: &Trace) -> WellFormedReport {
    let mut report = WellFormedReport::default();
    let mut holder: Vec<Option<ThreadId>> = vec![None; trace.lock_count()];
    let mut stacks: Vec<Vec<LockId>> = vec![Vec::new(); trace.thread_count()];
    let mut started = vec![false; trace.thread_count()];
    let mut forked = vec![false; trace.thread_count()];
    let mut joined = vec![false; trace.thread_count()];

    // A thread that is forked somewhere must not run before its fork.
    let mut fork_index: Vec<Option<usize>> = vec![None; trace.thread_count()];
    for ev in trace.events() {
        if let Op::Fork(u) = ev.op {
            fork_index[u.index()].get_or_insert(ev.index);
        }
    }

    let mut violate = |index, kind| report.violations.push(Violation { index, kind });
    for ev in trace.events() {
        let t = ev.thread.index();
        if joined[t] {
            violate(ev.index, ViolationKind::EventAfterJoin);
        }
        if let Some(fi) = fork_index[t] {
            if ev.index < fi && !started[t] {
                violate(ev.index, ViolationKind::EventBeforeFork);
            }
        }
        started[t] = true;
        match ev.op {
            Op::Acquire(m) => {
                if holder[m.index()].is_some() {
                    violate(ev.index, ViolationKind::DoubleAcquire);
                } else {
                    holder[m.index()] = Some(ev.thread);
                    stacks[t].push(m);
                }
            }
            Op::Release(m) => match holder[m.index()] {
                None => violate(ev.index, ViolationKind::ReleaseWithoutHold),
                Some(h) if h != ev.thread => violate(ev.index, ViolationKind::ForeignRelease),
                Some(_) => {
                    if stacks[t].last() != Some(&m) {
                        violate(ev.index, ViolationKind::NonNestedRelease);
                    } else {
                        stacks[t].pop();
                        holder[m.index()] = None;
                    }
                }
            },
            Op::Fork(u) => {
                let u = u.index();
                // Events that ran before this fork were flagged as they were seen.
                if forked[u] {
                    violate(ev.index, ViolationKind::DuplicateFork);
                }
                forked[u] = true;
            }
            Op::Join(u) => {
                joined[u.index()] = true;
            }
            Op::Read(_) | Op::Write(_) => {}
        }
    }
    for (t, stack) in stacks.iter().enumerate() {
        for &lock in stack {
            report.warnings.push(Warning::DanglingHold {
                thread: ThreadId(t as u32),
                lock,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::trace::parse_trace;

    fn kinds(text: &str) -> Vec<(usize, ViolationKind)> {
        validate(&parse_trace(text).unwrap())
            .violations
            .into_iter()
            .map(|v| (v.index, v.kind))
            .collect()
    }

    #[test]
    fn fixtures_are_well_formed() {
        for text in [fixtures::TR_FIG1, fixtures::TR_FIG2, &fixtures::tr_capo()] {
            let r = validate(&parse_trace(text).unwrap());
            assert!(r.is_well_formed(), "{:?}", r.violations);
            assert!(r.warnings.is_empty());
        }
    }

    #[test]
    fn lock_violations() {
        assert_eq!(
            kinds("T1 acq m; T2 acq m"),
            vec![(1, ViolationKind::DoubleAcquire)]
        );
        assert_eq!(
            kinds("T1 acq m; T2 rel m"),
            vec![(1, ViolationKind::ForeignRelease)]
        );
        assert_eq!(
            kinds("T1 rel m"),
            vec![(0, ViolationKind::ReleaseWithoutHold)]
        );
        assert_eq!(
            kinds("T1 acq m; T1 acq m"),
            vec![(1, ViolationKind::DoubleAcquire)]
        );
        assert_eq!(
            kinds("T1 acq m; T1 acq n; T1 rel m"),
            vec![(2, ViolationKind::NonNestedRelease)]
        );
    }

    #[test]
    fn fork_join_violations() {
        assert_eq!(
            kinds("T2 rd x; T1 fork T2"),
            vec![(0, ViolationKind::EventBeforeFork)]
        );
        assert_eq!(
            kinds("T1 fork T2; T1 join T2; T2 rd x"),
            vec![(2, ViolationKind::EventAfterJoin)]
        );
        assert!(kinds("T1 fork T2; T2 rd x; T1 join T2").is_empty());
    }

    #[test]
    fn dangling_hold_is_a_warning() {
        let r = validate(&parse_trace("T1 acq m; T1 rd x").unwrap());
        assert!(r.is_well_formed());
        assert_eq!(r.warnings.len(), 1);
    }
}
