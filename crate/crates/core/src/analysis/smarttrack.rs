//! SmartTrack tier: critical-section lists stored next to the last-access
//! epochs replace the per lock-variable maps.

use super::fto::{shared_from, unordered_shared, ReadSlot};
use super::sync::{AcqRepr, SyncCore};
use super::{AnalysisOptions, CaseKind, Engine, RaceKind, RawRace, Relation, Tag};
use crate::clock::{cs_pop_finalize, cs_push, ClockCell, CsList, Epoch, VectorClock};
use crate::stats::CaseStats;
use crate::trace::{Event, LockId, Op, ThreadId, VarId};

#[derive(Clone)]
struct Extra {
    cell: ClockCell,
    lock: LockId,
}

/// CS lists of the last reads; shaped like `ReadSlot`.
#[derive(Clone)]
enum ReadLists {
    Single(CsList),
    PerThread(Vec<CsList>),
}

#[derive(Clone)]
struct StVar {
    w: Epoch,
    w_tag: Tag,
    r: ReadSlot,
    lw: CsList,
    lr: ReadLists,
    /// Displaced critical sections around earlier reads or writes (`er`)
    /// and earlier writes (`ew`) not yet ordered before the last access.
    er: Vec<Extra>,
    ew: Vec<Extra>,
}

impl Default for StVar {
    fn default() -> Self {
        StVar {
            w: Epoch::BOTTOM,
            w_tag: Tag::default(),
            r: ReadSlot::Epoch(Epoch::BOTTOM, Tag::default()),
            lw: CsList::empty(),
            lr: ReadLists::Single(CsList::empty()),
            er: Vec::new(),
            ew: Vec::new(),
        }
    }
}

impl StVar {
    fn shapes_agree(&self) -> bool {
        matches!(
            (&self.r, &self.lr),
            (ReadSlot::Epoch(..), ReadLists::Single(_))
                | (ReadSlot::Shared(..), ReadLists::PerThread(_))
        )
    }
}

fn push_unique(out: &mut Vec<Extra>, e: &Extra) {
    if !out.iter().any(|o| o.cell.ptr_eq(&e.cell)) {
        out.push(e.clone());
    }
}

/// Walk `list` outermost first. Stops at the first critical section that
/// is already ordered before `t` or is on a lock `t` holds (joining its
/// release time). Sections passed over go to `residual`.
/// Returns whether a section matched.
fn multi_check(
    core: &mut SyncCore,
    t: ThreadId,
    list: &CsList,
    mut residual: Option<&mut Vec<Extra>>,
) -> bool {
    use std::ops::ControlFlow;
    let flow = list.visit_outermost_first(&mut |node| {
        if node.cell.ordered_before(core.ord(t)) {
            return ControlFlow::Break(());
        }
        if core.holds(t, node.lock) {
            let time = node
                .cell
                .time()
                .expect("held-lock match on an open critical section");
            core.join_ord(t, time);
            return ControlFlow::Break(());
        }
        if let Some(res) = residual.as_deref_mut() {
            push_unique(
                res,
                &Extra {
                    cell: node.cell.clone(),
                    lock: node.lock,
                },
            );
        }
        ControlFlow::Continue(())
    });
    flow.is_break()
}

pub struct StEngine {
    core: SyncCore,
    hlist: Vec<CsList>,
    vars: Vec<StVar>,
    stats: CaseStats,
    drop_coupling: bool,
}

impl StEngine {
    pub fn new(
        relation: Relation,
        n: usize,
        locks: usize,
        vars: usize,
        opts: AnalysisOptions,
    ) -> Self {
        assert!(relation != Relation::Hb, "SmartTrack has no HB variant");
        StEngine {
            core: SyncCore::new(relation, n, locks, AcqRepr::Epoch),
            hlist: vec![CsList::empty(); n],
            vars: vec![StVar::default(); vars],
            stats: CaseStats::default(),
            drop_coupling: opts.st_drop_read_share_coupling,
        }
    }

    fn read(&mut self, t: ThreadId, x: VarId, i: usize) -> Option<RawRace> {
        let e = self.core.epoch(t);
        let c = e.clock();
        let depth = self.core.held(t).len();
        let tag = Tag::new(i, false);
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

        let core = &mut self.core;
        if depth > 0 {
            for ex in &v.ew {
                if ex.cell.owner() != t
                    && core.holds(t, ex.lock)
                    && !ex.cell.ordered_before(core.ord(t))
                {
                    core.join_ord(
                        t,
                        ex.cell
                            .time()
                            .expect("extra metadata holds closed sections"),
                    );
                }
            }
        }
        let w_other = !v.w.is_bottom() && v.w.tid() != t;
        let h = self.hlist[t.index()].clone();
        let owned = match &v.r {
            ReadSlot::Epoch(re, _) => !re.is_bottom() && re.tid() == t,
            ReadSlot::Shared(vc, _) => vc.get(t) != 0,
        };

        if owned {
            // The last write's critical sections may include a lock that
            // was not held at this thread's previous read.
            if w_other && depth > 0 {
                multi_check(core, t, &v.lw, None);
            }
            let kind = match (&mut v.r, &mut v.lr) {
                (ReadSlot::Shared(vc, tags), ReadLists::PerThread(lists)) => {
                    vc.set(t, c);
                    tags[t.index()] = tag;
                    lists[t.index()] = h;
                    CaseKind::ReadSharedOwned
                }
                _ => {
                    v.r = ReadSlot::Epoch(e, tag);
                    v.lr = ReadLists::Single(h);
                    CaseKind::ReadOwned
                }
            };
            self.stats.record_case(kind, depth);
            return None;
        }

        if w_other {
            multi_check(core, t, &v.lw, None);
        }
        let race = w_other && !v.w.leq_vc(core.ord(t));
        let kind = match &mut v.r {
            &mut ReadSlot::Epoch(re, rt) => {
                let ReadLists::Single(prior_list) = &v.lr else {
                    unreachable!("read lists out of shape")
                };
                let lists_ordered = self.drop_coupling
                    || prior_list
                        .outermost()
                        .map_or(true, |n| n.cell.ordered_before(core.ord(t)));
                if re.leq_vc(core.ord(t)) && lists_ordered {
                    v.r = ReadSlot::Epoch(e, tag);
                    v.lr = ReadLists::Single(h);
                    CaseKind::ReadExclusive
                } else {
                    let n = core.threads();
                    let mut lists = vec![CsList::empty(); n];
                    lists[re.tid().index()] = prior_list.clone();
                    lists[t.index()] = h;
                    v.r = shared_from(n, (re, rt), (e, tag));
                    v.lr = ReadLists::PerThread(lists);
                    CaseKind::ReadShare
                }
            }
            ReadSlot::Shared(vc, tags) => {
                vc.set(t, c);
                tags[t.index()] = tag;
                match &mut v.lr {
                    ReadLists::PerThread(lists) => lists[t.index()] = h,
                    ReadLists::Single(_) => unreachable!("read lists out of shape"),
                }
                CaseKind::ReadShared
            }
        };
        self.stats
            .record_case(if race { CaseKind::WriteReadRace } else { kind }, depth);
        race.then(|| RawRace {
            prior: v.w_tag.index as usize,
            curr: i,
            kind: RaceKind::WriteRead,
            var: x,
        })
    }

    fn write(&mut self, t: ThreadId, x: VarId, i: usize) -> Option<RawRace> {
        let e = self.core.epoch(t);
        let depth = self.core.held(t).len();
        let tag = Tag::new(i, true);
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

        let core = &mut self.core;
        let mut er = Vec::new();
        let mut ew = Vec::new();
        // Earlier displaced sections: drop own and ordered ones, take the
        // edge for held locks, keep the rest.
        for (src, dst) in [(&v.er, &mut er), (&v.ew, &mut ew)] {
            for ex in src {
                if ex.cell.owner() == t || ex.cell.ordered_before(core.ord(t)) {
                    continue;
                }
                if core.holds(t, ex.lock) {
                    core.join_ord(
                        t,
                        ex.cell
                            .time()
                            .expect("extra metadata holds closed sections"),
                    );
                    continue;
                }
                push_unique(dst, ex);
            }
        }

        if !v.w.is_bottom() && v.w.tid() != t {
            let mut res = Vec::new();
            multi_check(core, t, &v.lw, Some(&mut res));
            for ex in &res {
                push_unique(&mut er, ex);
                push_unique(&mut ew, ex);
            }
        }

        let mut race = None;
        let kind = match (&v.r, &v.lr) {
            (ReadSlot::Epoch(re, _), _) if !re.is_bottom() && re.tid() == t => CaseKind::WriteOwned,
            (&ReadSlot::Epoch(re, rt), ReadLists::Single(list)) => {
                if !re.is_bottom() {
                    let mut res = Vec::new();
                    multi_check(core, t, list, Some(&mut res));
                    for ex in &res {
                        push_unique(&mut er, ex);
                        if rt.write {
                            push_unique(&mut ew, ex);
                        }
                    }
                }
                if re.leq_vc(core.ord(t)) {
                    CaseKind::WriteExclusive
                } else {
                    race = Some(rt);
                    CaseKind::WriteExclusiveRace
                }
            }
            (ReadSlot::Shared(vc, tags), ReadLists::PerThread(lists)) => {
                for (u, list) in lists.iter().enumerate() {
                    if u == t.index() || vc.get(ThreadId(u as u32)) == 0 {
                        continue;
                    }
                    let mut res = Vec::new();
                    multi_check(core, t, list, Some(&mut res));
                    for ex in &res {
                        push_unique(&mut er, ex);
                        if tags[u].write {
                            push_unique(&mut ew, ex);
                        }
                    }
                }
                match unordered_shared(vc, tags, core.ord(t), t) {
                    None => CaseKind::WriteShared,
                    Some(p) => {
                        race = Some(p);
                        CaseKind::WriteSharedRace
                    }
                }
            }
            _ => unreachable!("read lists out of shape"),
        };

        let h = self.hlist[t.index()].clone();
        v.w = e;
        v.w_tag = tag;
        v.r = ReadSlot::Epoch(e, tag);
        v.lw = h.clone();
        v.lr = ReadLists::Single(h);
        v.er = er;
        v.ew = ew;
        self.stats.record_case(kind, depth);
        race.map(|p| RawRace {
            prior: p.index as usize,
            curr: i,
            kind: RaceKind::of(p.write, true),
            var: x,
        })
    }
}

impl Engine for StEngine {
    fn step(&mut self, ev: &Event) -> Option<RawRace> {
        let t = ev.thread;
        match ev.op {
            Op::Read(x) => {
                self.core.note_access(t);
                let r = self.read(t, x, ev.index);
                debug_assert!(self.vars[x.index()].shapes_agree());
                r
            }
            Op::Write(x) => {
                self.core.note_access(t);
                let r = self.write(t, x, ev.index);
                debug_assert!(self.vars[x.index()].shapes_agree());
                r
            }
            Op::Acquire(m) => {
                self.core.acquire(t, m);
                let (h, _) =
                    cs_push(&self.hlist[t.index()], m, t).expect("nested acquire of a held lock");
                self.hlist[t.index()] = h;
                None
            }
            Op::Release(m) => {
                let hlist = &mut self.hlist[t.index()];
                self.core.release(t, m, |c| {
                    debug_assert_eq!(hlist.head().map(|n| n.lock), Some(m));
                    *hlist = cs_pop_finalize(hlist, c).expect("release without critical section");
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
