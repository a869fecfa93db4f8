//! Thread clocks, lock synchronization, fork/join and the release-release
//! rule, shared by all tiers.

use std::collections::VecDeque;
use std::rc::Rc;

use super::Relation;
use crate::clock::{Epoch, VectorClock};
use crate::trace::{LockId, ThreadId};

/// How queued acquire times are stored and compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum AcqRepr {
    Vector,
    Epoch,
}

struct DcEntry {
    acq_epoch: Epoch,
    acq_vc: Option<Rc<VectorClock>>,
    rel: Option<Rc<VectorClock>>,
}

struct WcpEntry {
    acq: Epoch,
    rel: Rc<VectorClock>,
}

pub(crate) struct SyncCore {
    pub relation: Relation,
    n: usize,
    acq_repr: AcqRepr,
    /// C_t for HB/DC/WDC, the HB clock H_t for WCP.
    clocks: Vec<VectorClock>,
    /// WCP ordering clock P_t; empty for other relations.
    wcp: Vec<VectorClock>,
    /// Locks held per thread, outermost first.
    pub held: Vec<Vec<LockId>>,
    /// HB: clock of the last release. WCP: H and P at the last release.
    lock_hb: Vec<VectorClock>,
    lock_p: Vec<VectorClock>,
    /// Acquire epoch of the open critical section, per lock.
    open_acq: Vec<Epoch>,
    /// DC: queue of (acquire, release) per lock, checking thread, acquiring thread.
    dc_queues: Vec<VecDeque<DcEntry>>,
    /// WCP: queue per lock and checking thread.
    wcp_queues: Vec<VecDeque<WcpEntry>>,
    /// Whether the thread's last event bumped its own clock.
    bumped: Vec<bool>,
}

impl SyncCore {
    pub fn new(relation: Relation, n: usize, locks: usize, acq_repr: AcqRepr) -> Self {
        let clocks = (0..n)
            .map(|t| {
                let mut c = VectorClock::new(n);
                c.set(ThreadId(t as u32), 1);
                c
            })
            .collect();
        let wcp = if relation == Relation::Wcp {
            vec![VectorClock::new(n); n]
        } else {
            Vec::new()
        };
        let per_lock = |k: bool| {
            if k {
                vec![VectorClock::new(n); locks]
            } else {
                Vec::new()
            }
        };
        let dc_queues = if relation == Relation::Dc {
            (0..locks * n * n).map(|_| VecDeque::new()).collect()
        } else {
            Vec::new()
        };
        let wcp_queues = if relation == Relation::Wcp {
            (0..locks * n).map(|_| VecDeque::new()).collect()
        } else {
            Vec::new()
        };
        SyncCore {
            relation,
            n,
            acq_repr,
            clocks,
            wcp,
            held: vec![Vec::new(); n],
            lock_hb: per_lock(matches!(relation, Relation::Hb | Relation::Wcp)),
            lock_p: per_lock(relation == Relation::Wcp),
            open_acq: vec![Epoch::BOTTOM; locks],
            dc_queues,
            wcp_queues,
            bumped: vec![false; n],
        }
    }

    pub fn threads(&self) -> usize {
        self.n
    }

    /// Current local time of `t`.
    #[inline]
    pub fn local(&self, t: ThreadId) -> u64 {
        self.clocks[t.index()].get(t)
    }

    #[inline]
    pub fn epoch(&self, t: ThreadId) -> Epoch {
        Epoch::new(t, self.local(t))
    }

    /// The clock access checks compare against.
    #[inline]
    pub fn ord(&self, t: ThreadId) -> &VectorClock {
        if self.relation == Relation::Wcp {
            &self.wcp[t.index()]
        } else {
            &self.clocks[t.index()]
        }
    }

    /// Join a released clock into the ordering clock of `t`.
    #[inline]
    pub fn join_ord(&mut self, t: ThreadId, c: &VectorClock) {
        if self.relation == Relation::Wcp {
            self.wcp[t.index()].join(c);
        } else {
            self.clocks[t.index()].join(c);
        }
    }

    #[inline]
    pub fn held(&self, t: ThreadId) -> &[LockId] {
        &self.held[t.index()]
    }

    #[inline]
    pub fn holds(&self, t: ThreadId, m: LockId) -> bool {
        self.held[t.index()].contains(&m)
    }

    #[inline]
    pub fn note_access(&mut self, t: ThreadId) {
        self.bumped[t.index()] = false;
    }

    fn bump(&mut self, t: ThreadId) {
        self.clocks[t.index()].increment(t);
        self.bumped[t.index()] = true;
    }

    fn dc_q(&mut self, m: LockId, checker: usize, acquirer: usize) -> &mut VecDeque<DcEntry> {
        let n = self.n;
        &mut self.dc_queues[(m.index() * n + checker) * n + acquirer]
    }

    pub fn acquire(&mut self, t: ThreadId, m: LockId) {
        let ti = t.index();
        match self.relation {
            Relation::Hb => {
                let l = &self.lock_hb[m.index()];
                self.clocks[ti].join(l);
            }
            Relation::Wcp => {
                self.clocks[ti].join(&self.lock_hb[m.index()]);
                self.wcp[ti].join(&self.lock_p[m.index()]);
            }
            Relation::Dc => {
                let acq_epoch = self.epoch(t);
                let acq_vc = match self.acq_repr {
                    AcqRepr::Vector => Some(Rc::new(self.clocks[ti].clone())),
                    AcqRepr::Epoch => None,
                };
                for u in 0..self.n {
                    if u != ti {
                        self.dc_q(m, u, ti).push_back(DcEntry {
                            acq_epoch,
                            acq_vc: acq_vc.clone(),
                            rel: None,
                        });
                    }
                }
            }
            Relation::Wdc => {}
        }
        self.open_acq[m.index()] = self.epoch(t);
        self.held[ti].push(m);
        self.bump(t);
    }

    /// Release `m` by `t`. `capture` sees the release time after the
    /// release-release rule has been applied and before the clock moves on.
    pub fn release(&mut self, t: ThreadId, m: LockId, capture: impl FnOnce(&VectorClock)) {
        let ti = t.index();
        match self.relation {
            Relation::Dc => self.discharge_dc(t, m),
            Relation::Wcp => self.discharge_wcp(t, m),
            _ => {}
        }
        capture(&self.clocks[ti]);
        match self.relation {
            Relation::Hb => self.lock_hb[m.index()].copy_from(&self.clocks[ti]),
            Relation::Wcp => {
                self.lock_hb[m.index()].copy_from(&self.clocks[ti]);
                self.lock_p[m.index()].copy_from(&self.wcp[ti]);
                let rel = Rc::new(self.clocks[ti].clone());
                let acq = self.open_acq[m.index()];
                for u in 0..self.n {
                    self.wcp_queues[m.index() * self.n + u].push_back(WcpEntry {
                        acq,
                        rel: rel.clone(),
                    });
                }
            }
            Relation::Dc => {
                let rel = Rc::new(self.clocks[ti].clone());
                for u in 0..self.n {
                    if u != ti {
                        if let Some(e) = self.dc_q(m, u, ti).back_mut() {
                            e.rel = Some(rel.clone());
                        }
                    }
                }
            }
            Relation::Wdc => {}
        }
        if let Some(pos) = self.held[ti].iter().rposition(|&l| l == m) {
            self.held[ti].remove(pos);
        }
        self.bump(t);
    }

    fn discharge_dc(&mut self, t: ThreadId, m: LockId) {
        let ti = t.index();
        let n = self.n;
        loop {
            let mut changed = false;
            for u in 0..n {
                if u == ti {
                    continue;
                }
                let idx = (m.index() * n + ti) * n + u;
                loop {
                    let q = &self.dc_queues[idx];
                    let Some(front) = q.front() else { break };
                    let Some(rel) = front.rel.clone() else { break };
                    let c = &self.clocks[ti];
                    let ordered = match &front.acq_vc {
                        Some(vc) => vc.leq(c),
                        None => front.acq_epoch.leq_vc(c),
                    };
                    if !ordered {
                        break;
                    }
                    self.dc_queues[idx].pop_front();
                    self.clocks[ti].join(&rel);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn discharge_wcp(&mut self, t: ThreadId, m: LockId) {
        let ti = t.index();
        let idx = m.index() * self.n + ti;
        while let Some(front) = self.wcp_queues[idx].front() {
            if !front.acq.leq_vc(&self.wcp[ti]) {
                break;
            }
            let rel = front.rel.clone();
            self.wcp_queues[idx].pop_front();
            self.wcp[ti].join(&rel);
        }
    }

    /// Own clock of `u` at its last event.
    fn last_clock(&self, u: ThreadId) -> VectorClock {
        let mut c = self.clocks[u.index()].clone();
        if self.bumped[u.index()] {
            c.set(u, c.get(u) - 1);
        }
        c
    }

    pub fn fork(&mut self, t: ThreadId, u: ThreadId) {
        let parent = self.clocks[t.index()].clone();
        self.clocks[u.index()].join(&parent);
        if self.relation == Relation::Wcp {
            self.wcp[u.index()].join(&parent);
        }
        self.bump(t);
    }

    pub fn join(&mut self, t: ThreadId, u: ThreadId) {
        let child = self.last_clock(u);
        self.clocks[t.index()].join(&child);
        if self.relation == Relation::Wcp {
            self.wcp[t.index()].join(&child);
        }
        self.bump(t);
    }
}
