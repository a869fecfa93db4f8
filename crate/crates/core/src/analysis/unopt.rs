//! Reference tier: full vector clocks for every last-access slot.

use super::ccs::CcsMaps;
use super::sync::{AcqRepr, SyncCore};
use super::{CaseKind, Engine, RaceKind, RawRace, Relation, Tag};
use crate::clock::VectorClock;
use crate::stats::CaseStats;
use crate::trace::{Event, Op, ThreadId, VarId};

pub struct UnoptEngine {
    core: SyncCore,
    ccs: Option<CcsMaps>,
    /// R_x holds reads and writes; W_x only writes.
    r: Vec<VectorClock>,
    r_tag: Vec<Vec<Tag>>,
    w: Vec<VectorClock>,
    w_tag: Vec<Vec<Tag>>,
    stats: CaseStats,
}

impl UnoptEngine {
    pub fn new(relation: Relation, n: usize, locks: usize, vars: usize) -> Self {
        UnoptEngine {
            core: SyncCore::new(relation, n, locks, AcqRepr::Vector),
            ccs: relation
                .has_rule_a()
                .then(|| CcsMaps::new(relation, n, locks, vars)),
            r: vec![VectorClock::new(n); vars],
            r_tag: vec![vec![Tag::default(); n]; vars],
            w: vec![VectorClock::new(n); vars],
            w_tag: vec![vec![Tag::default(); n]; vars],
            stats: CaseStats::default(),
        }
    }

    /// Latest entry of `slot` not ordered before `t`.
    fn unordered_prior(&self, slot: &VectorClock, tags: &[Tag], t: ThreadId) -> Option<Tag> {
        let ord = self.core.ord(t);
        (0..self.core.threads())
            .filter(|&u| u != t.index())
            .filter(|&u| slot.get(ThreadId(u as u32)) > ord.get(ThreadId(u as u32)))
            .map(|u| tags[u])
            .max_by_key(|tag| tag.index)
    }

    fn read(&mut self, t: ThreadId, x: VarId, i: usize) -> Option<RawRace> {
        let (ti, xi) = (t.index(), x.index());
        let local = self.core.local(t);
        let depth = self.core.held(t).len();
        if self.r[xi].get(t) == local {
            self.r_tag[xi][ti] = Tag::new(i, false);
            self.stats.record_case(CaseKind::ReadSameEpoch, depth);
            return None;
        }
        if let Some(ccs) = &mut self.ccs {
            ccs.access(&mut self.core, t, x, false);
        }
        let race = self.unordered_prior(&self.w[xi], &self.w_tag[xi], t);
        self.r[xi].set(t, local);
        self.r_tag[xi][ti] = Tag::new(i, false);
        let kind = if race.is_some() {
            CaseKind::WriteReadRace
        } else {
            CaseKind::ReadShared
        };
        self.stats.record_case(kind, depth);
        race.map(|p| RawRace {
            prior: p.index as usize,
            curr: i,
            kind: RaceKind::WriteRead,
            var: x,
        })
    }

    fn write(&mut self, t: ThreadId, x: VarId, i: usize) -> Option<RawRace> {
        let (ti, xi) = (t.index(), x.index());
        let local = self.core.local(t);
        let depth = self.core.held(t).len();
        if self.w[xi].get(t) == local {
            self.w_tag[xi][ti] = Tag::new(i, true);
            self.r_tag[xi][ti] = Tag::new(i, true);
            self.stats.record_case(CaseKind::WriteSameEpoch, depth);
            return None;
        }
        if let Some(ccs) = &mut self.ccs {
            ccs.access(&mut self.core, t, x, true);
        }
        let race = self.unordered_prior(&self.r[xi], &self.r_tag[xi], t);
        self.w[xi].set(t, local);
        self.r[xi].set(t, local);
        self.w_tag[xi][ti] = Tag::new(i, true);
        self.r_tag[xi][ti] = Tag::new(i, true);
        let kind = if race.is_some() {
            CaseKind::WriteSharedRace
        } else {
            CaseKind::WriteShared
        };
        self.stats.record_case(kind, depth);
        race.map(|p| RawRace {
            prior: p.index as usize,
            curr: i,
            kind: RaceKind::of(p.write, true),
            var: x,
        })
    }
}

impl Engine for UnoptEngine {
    fn step(&mut self, ev: &Event) -> Option<RawRace> {
        let t = ev.thread;
        match ev.op {
            Op::Read(x) => {
                self.core.note_access(t);
                self.read(t, x, ev.index)
            }
            Op::Write(x) => {
                self.core.note_access(t);
                self.write(t, x, ev.index)
            }
            Op::Acquire(m) => {
                self.core.acquire(t, m);
                None
            }
            Op::Release(m) => {
                let ccs = &mut self.ccs;
                self.core.release(t, m, |c| {
                    if let Some(ccs) = ccs {
                        ccs.release(t, m, c);
                    }
                });
                None
            }
            Op::Fork(u) => {
                self.core.fork(t, u);
                None
            }
            Op::Join(u) => {
                self.core.join(t, u);
                None
            }
        }
    }

    fn ordering_clock(&self, t: ThreadId) -> &VectorClock {
        self.core.ord(t)
    }

    fn stats(&self) -> &CaseStats {
        &self.stats
    }

    fn into_stats(self: Box<Self>) -> CaseStats {
        self.stats
    }
}
