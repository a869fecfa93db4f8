//! Lock-variable metadata for the ordering rule between critical sections
//! with conflicting accesses, as kept by the unoptimized and epoch tiers.

use super::sync::SyncCore;
use super::Relation;
use crate::clock::VectorClock;
use crate::trace::{LockId, ThreadId, VarId};

enum Slot {
    Joined(VectorClock),
    /// WCP only orders critical sections of different threads, so the
    /// release times are kept apart per releasing thread.
    PerThread(Vec<Option<VectorClock>>),
}

impl Slot {
    fn new(per_thread: bool, n: usize) -> Slot {
        if per_thread {
            Slot::PerThread(vec![None; n])
        } else {
            Slot::Joined(VectorClock::new(n))
        }
    }

    fn add(&mut self, t: ThreadId, c: &VectorClock) {
        match self {
            Slot::Joined(v) => v.join(c),
            Slot::PerThread(v) => match &mut v[t.index()] {
                Some(old) => old.join(c),
                slot @ None => *slot = Some(c.clone()),
            },
        }
    }

    fn join_into(&self, core: &mut SyncCore, t: ThreadId) {
        match self {
            Slot::Joined(v) => core.join_ord(t, v),
            Slot::PerThread(v) => {
                for (u, c) in v.iter().enumerate() {
                    if u != t.index() {
                        if let Some(c) = c {
                            core.join_ord(t, c);
                        }
                    }
                }
            }
        }
    }
}

/// L^r_{m,x} and L^w_{m,x} for one lock m of a variable x.
struct Entry {
    lock: LockId,
    /// Critical sections on m that read or wrote x.
    r: Slot,
    /// Critical sections on m that wrote x.
    w: Option<Slot>,
}

pub(crate) struct CcsMaps {
    per_thread: bool,
    n: usize,
    /// Per variable, one entry per lock it was accessed under.
    vars: Vec<Vec<Entry>>,
    /// Accesses in the open critical section on m, with duplicates; the
    /// sets R_m and W_m are formed at release.
    rm: Vec<Vec<(VarId, bool)>>,
}

impl CcsMaps {
    pub fn new(relation: Relation, n: usize, locks: usize, vars: usize) -> Self {
        CcsMaps {
            per_thread: relation == Relation::Wcp,
            n,
            vars: (0..vars).map(|_| Vec::new()).collect(),
            rm: vec![Vec::new(); locks],
        }
    }

    /// Join prior conflicting critical sections on every held lock and
    /// record the access in the open ones.
    pub fn access(&mut self, core: &mut SyncCore, t: ThreadId, x: VarId, write: bool) {
        let entries = &self.vars[x.index()];
        for i in 0..core.held(t).len() {
            let m = core.held(t)[i];
            if let Some(e) = entries.iter().find(|e| e.lock == m) {
                if let Some(w) = &e.w {
                    w.join_into(core, t);
                }
                if write {
                    e.r.join_into(core, t);
                }
            }
            self.rm[m.index()].push((x, write));
        }
    }

    pub fn release(&mut self, t: ThreadId, m: LockId, c: &VectorClock) {
        let (per_thread, n) = (self.per_thread, self.n);
        let accessed = &mut self.rm[m.index()];
        accessed.sort_unstable();
        let mut i = 0;
        while i < accessed.len() {
            let x = accessed[i].0;
            let mut wrote = false;
            while i < accessed.len() && accessed[i].0 == x {
                wrote |= accessed[i].1;
                i += 1;
            }
            let entries = &mut self.vars[x.index()];
            let pos = match entries.iter().position(|e| e.lock == m) {
                Some(p) => p,
                None => {
                    entries.push(Entry {
                        lock: m,
                        r: Slot::new(per_thread, n),
                        w: None,
                    });
                    entries.len() - 1
                }
            };
            let e = &mut entries[pos];
            e.r.add(t, c);
            if wrote {
                e.w.get_or_insert_with(|| Slot::new(per_thread, n))
                    .add(t, c);
            }
        }
        accessed.clear();
    }
}
