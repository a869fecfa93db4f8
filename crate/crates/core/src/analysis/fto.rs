//! Epoch and ownership tier: last-access slots are epochs until reads
//! from unordered threads force a vector.

use super::ccs::CcsMaps;
use super::sync::{AcqRepr, SyncCore};
use super::{CaseKind, Engine, RaceKind, RawRace, Relation, Tag};
use crate::clock::{Epoch, VectorClock};
use crate::stats::CaseStats;
use crate::trace::{Event, Op, ThreadId, VarId};

#[derive(Clone)]
pub(crate) enum ReadSlot {
    Epoch(Epoch, Tag),
    Shared(VectorClock, Vec<Tag>),
}

#[derive(Clone)]
pub(crate) struct VarState {
    pub w: Epoch,
    pub w_tag: Tag,
    pub r: ReadSlot,
}

impl Default for VarState {
    fn default() -> Self {
        VarState {
            w: Epoch::BOTTOM,
            w_tag: Tag::default(),
            r: ReadSlot::Epoch(Epoch::BOTTOM, Tag::default()),
        }
    }
}

/// Latest component of a shared read slot not ordered before `ord`.
pub(crate) fn unordered_shared(
    vc: &VectorClock,
    tags: &[Tag],
    ord: &VectorClock,
    t: ThreadId,
) -> Option<Tag> {
    vc.as_slice()
        .iter()
        .enumerate()
        .filter(|&(u, &c)| u != t.index() && c > ord.get(ThreadId(u as u32)))
        .map(|(u, _)| tags[u])
        .max_by_key(|tag| tag.index)
}

pub(crate) fn shared_from(n: usize, a: (Epoch, Tag), b: (Epoch, Tag)) -> ReadSlot {
    let mut vc = VectorClock::new(n);
    let mut tags = vec![Tag::default(); n];
    for (e, tag) in [a, b] {
        vc.set(e.tid(), e.clock());
        tags[e.tid().index()] = tag;
    }
    ReadSlot::Shared(vc, tags)
}

pub struct FtoEngine {
    core: SyncCore,
    ccs: Option<CcsMaps>,
    vars: Vec<VarState>,
    stats: CaseStats,
}

impl FtoEngine {
    pub fn new(relation: Relation, n: usize, locks: usize, vars: usize) -> Self {
        FtoEngine {
            core: SyncCore::new(relation, n, locks, AcqRepr::Vector),
            ccs: relation
                .has_rule_a()
                .then(|| CcsMaps::new(relation, n, locks, vars)),
            vars: vec![VarState::default(); vars],
            stats: CaseStats::default(),
        }
    }

    fn read(&mut self, t: ThreadId, x: VarId, i: usize) -> Option<RawRace> {
        let e = self.core.epoch(t);
        let c = e.clock();
        let depth = self.core.held(t).len();
        let tag = Tag::new(i, false);
        {
            let v = &mut self.vars[x.index()];
            match &mut v.r {
                ReadSlot::Epoch(re, rt) if *re == e => {
                    *rt = tag;
                    self.stats.record_case(CaseKind::ReadSameEpoch, depth);
                    return None;
                }
                ReadSlot::Shared(vc, tags) if vc.get(t) == c => {
                    tags[t.index()] = tag;
                    self.stats.record_case(CaseKind::ReadSharedSameEpoch, depth);
                    return None;
                }
                _ => {}
            }
        }
        if let Some(ccs) = &mut self.ccs {
            ccs.access(&mut self.core, t, x, false);
        }
        let n = self.core.threads();
        let ord = self.core.ord(t);
        let v = &mut self.vars[x.index()];
        let w_ok = v.w.is_bottom() || v.w.tid() == t || v.w.leq_vc(ord);
        let mut race = None;
        let owned = match &v.r {
            ReadSlot::Epoch(re, _) => !re.is_bottom() && re.tid() == t,
            ReadSlot::Shared(vc, _) => vc.get(t) != 0,
        };
        let kind = match &mut v.r {
            ReadSlot::Epoch(..) if owned => {
                v.r = ReadSlot::Epoch(e, tag);
                CaseKind::ReadOwned
            }
            ReadSlot::Shared(vc, tags) if owned => {
                vc.set(t, c);
                tags[t.index()] = tag;
                CaseKind::ReadSharedOwned
            }
            &mut ReadSlot::Epoch(re, rt) => {
                if re.leq_vc(ord) {
                    v.r = ReadSlot::Epoch(e, tag);
                    CaseKind::ReadExclusive
                } else {
                    v.r = shared_from(n, (re, rt), (e, tag));
                    if w_ok {
                        CaseKind::ReadShare
                    } else {
                        race = Some(v.w_tag);
                        CaseKind::WriteReadRace
                    }
                }
            }
            ReadSlot::Shared(vc, tags) => {
                vc.set(t, c);
                tags[t.index()] = tag;
                if w_ok {
                    CaseKind::ReadShared
                } else {
                    race = Some(v.w_tag);
                    CaseKind::WriteReadRace
                }
            }
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
        let e = self.core.epoch(t);
        let depth = self.core.held(t).len();
        let tag = Tag::new(i, true);
        {
            let v = &mut self.vars[x.index()];
            if v.w == e {
                v.w_tag = tag;
                match &mut v.r {
                    ReadSlot::Epoch(re, rt) if *re == e => *rt = tag,
                    ReadSlot::Shared(vc, tags) if vc.get(t) == e.clock() => tags[t.index()] = tag,
                    _ => {}
                }
                self.stats.record_case(CaseKind::WriteSameEpoch, depth);
                return None;
            }
        }
        if let Some(ccs) = &mut self.ccs {
            ccs.access(&mut self.core, t, x, true);
        }
        let ord = self.core.ord(t);
        let v = &mut self.vars[x.index()];
        let mut race = None;
        let kind = match &v.r {
            ReadSlot::Epoch(re, _) if !re.is_bottom() && re.tid() == t => CaseKind::WriteOwned,
            ReadSlot::Epoch(re, rt) => {
                if re.leq_vc(ord) {
                    CaseKind::WriteExclusive
                } else {
                    race = Some(*rt);
                    CaseKind::WriteExclusiveRace
                }
            }
            ReadSlot::Shared(vc, tags) => match unordered_shared(vc, tags, ord, t) {
                None => CaseKind::WriteShared,
                Some(p) => {
                    race = Some(p);
                    CaseKind::WriteSharedRace
                }
            },
        };
        v.w = e;
        v.w_tag = tag;
        v.r = ReadSlot::Epoch(e, tag);
        self.stats.record_case(kind, depth);
        race.map(|p| RawRace {
            prior: p.index as usize,
            curr: i,
            kind: RaceKind::of(p.write, true),
            var: x,
        })
    }
}

impl Engine for FtoEngine {
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
