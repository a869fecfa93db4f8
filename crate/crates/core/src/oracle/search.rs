use rustc_hash::FxHashSet;

use super::{cap_from_env, last_writer_map, OracleError, SEARCH_CAP};
use crate::trace::{Op, ThreadId, Trace};

/// A predicted trace: `schedule` (original event indices) followed by the
/// two conflicting events of `pair`, back to back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub schedule: Vec<usize>,
    pub pair: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Race(Witness),
    /// After `schedule`, the listed threads each wait for a lock held by the next.
    Deadlock {
        schedule: Vec<usize>,
        threads: Vec<ThreadId>,
    },
}

struct Search<'a> {
    trace: &'a Trace,
    per: Vec<Vec<usize>>,
    /// Position of each event within its thread.
    slot: Vec<usize>,
    fork_of: Vec<Option<usize>>,
    /// Original last writer of each read, `None` for other events.
    orig_lw: Vec<Option<Option<usize>>>,
    pos: Vec<usize>,
    lw: Vec<Option<usize>>,
    holder: Vec<Option<usize>>,
    schedule: Vec<usize>,
    seen: FxHashSet<Vec<u32>>,
    deadlock: Option<SearchOutcome>,
}

impl Search<'_> {
    fn executed(&self, e: usize) -> bool {
        let t = self.trace.events()[e].thread.index();
        self.pos[t] > self.slot[e]
    }

    fn next(&self, t: usize) -> Option<usize> {
        self.per[t].get(self.pos[t]).copied()
    }

    fn enabled(&self, t: usize) -> Option<usize> {
        let e = self.next(t)?;
        if let Some(f) = self.fork_of[t] {
            if !self.executed(f) {
                return None;
            }
        }
        let ok = match self.trace.events()[e].op {
            Op::Acquire(m) => self.holder[m.index()].is_none(),
            Op::Read(x) => Some(self.lw[x.index()]) == self.orig_lw[e],
            Op::Join(u) => self.pos[u.index()] == self.per[u.index()].len(),
            _ => true,
        };
        ok.then_some(e)
    }

    /// Apply `e`; returns what `undo` needs.
    fn apply(&mut self, e: usize) -> Option<usize> {
        let ev = &self.trace.events()[e];
        let t = ev.thread.index();
        self.pos[t] += 1;
        self.schedule.push(e);
        match ev.op {
            Op::Acquire(m) => {
                self.holder[m.index()] = Some(t);
                None
            }
            Op::Release(m) => {
                self.holder[m.index()] = None;
                None
            }
            Op::Write(x) => std::mem::replace(&mut self.lw[x.index()], Some(e)),
            _ => None,
        }
    }

    fn undo(&mut self, e: usize, saved: Option<usize>) {
        let ev = &self.trace.events()[e];
        let t = ev.thread.index();
        self.pos[t] -= 1;
        self.schedule.pop();
        match ev.op {
            Op::Acquire(m) => self.holder[m.index()] = None,
            Op::Release(m) => self.holder[m.index()] = Some(t),
            Op::Write(x) => self.lw[x.index()] = saved,
            _ => {}
        }
    }

    fn key(&self) -> Vec<u32> {
        self.pos
            .iter()
            .map(|&p| p as u32)
            .chain(self.lw.iter().map(|w| w.map_or(u32::MAX, |w| w as u32)))
            .collect()
    }

    fn find_race(&mut self) -> Option<Witness> {
        let n = self.per.len();
        let events = self.trace.events();
        for t1 in 0..n {
            let Some(e1) = self.enabled(t1) else { continue };
            for t2 in 0..n {
                if t2 == t1 {
                    continue;
                }
                let Some(e2) = self.next(t2) else { continue };
                if !events[e1].conflicts_with(&events[e2]) {
                    continue;
                }
                let saved = self.apply(e1);
                let ok = self.enabled(t2) == Some(e2);
                self.undo(e1, saved);
                if ok {
                    return Some(Witness {
                        schedule: self.schedule.clone(),
                        pair: (e1, e2),
                    });
                }
            }
        }
        None
    }

    fn find_deadlock(&self) -> Option<Vec<ThreadId>> {
        let waits_on = |t: usize| -> Option<usize> {
            let e = self.next(t)?;
            match self.trace.events()[e].op {
                Op::Acquire(m) => self.holder[m.index()].filter(|&u| u != t),
                _ => None,
            }
        };
        for start in 0..self.per.len() {
            let mut path = vec![start];
            let mut cur = start;
            while let Some(u) = waits_on(cur) {
                if u == start {
                    return Some(path.into_iter().map(|t| ThreadId(t as u32)).collect());
                }
                if path.contains(&u) {
                    break;
                }
                path.push(u);
                cur = u;
            }
        }
        None
    }

    fn dfs(&mut self) -> Option<Witness> {
        if !self.seen.insert(self.key()) {
            return None;
        }
        if let Some(w) = self.find_race() {
            return Some(w);
        }
        if self.deadlock.is_none() {
            if let Some(threads) = self.find_deadlock() {
                self.deadlock = Some(SearchOutcome::Deadlock {
                    schedule: self.schedule.clone(),
                    threads,
                });
            }
        }
        for t in 0..self.per.len() {
            if let Some(e) = self.enabled(t) {
                let saved = self.apply(e);
                let found = self.dfs();
                self.undo(e, saved);
                if found.is_some() {
                    return found;
                }
            }
        }
        None
    }
}

/// Exhaustively look for a predicted trace in which two conflicting events
/// are adjacent. A predicted trace runs a prefix of each thread's events,
/// respects locks, fork and join, and gives every included read the same
/// last writer (or none) as in `trace`. Falls back to reporting a reachable
/// lock cycle when no race exists.
pub fn predictable_race_search(trace: &Trace) -> Result<Option<SearchOutcome>, OracleError> {
    let cap = cap_from_env(SEARCH_CAP);
    if trace.len() > cap {
        return Err(OracleError::TooLarge {
            len: trace.len(),
            cap,
        });
    }
    let per = trace.per_thread();
    let mut slot = vec![0; trace.len()];
    for idxs in &per {
        for (k, &e) in idxs.iter().enumerate() {
            slot[e] = k;
        }
    }
    let mut fork_of = vec![None; trace.thread_count()];
    for e in trace.events() {
        if let Op::Fork(u) = e.op {
            fork_of[u.index()].get_or_insert(e.index);
        }
    }
    let mut orig_lw = vec![None; trace.len()];
    for (r, w) in last_writer_map(trace) {
        orig_lw[r] = Some(w);
    }
    let mut s = Search {
        trace,
        pos: vec![0; per.len()],
        per,
        slot,
        fork_of,
        orig_lw,
        lw: vec![None; trace.var_count()],
        holder: vec![None; trace.lock_count()],
        schedule: Vec::new(),
        seen: FxHashSet::default(),
        deadlock: None,
    };
    Ok(match s.dfs() {
        Some(w) => Some(SearchOutcome::Race(w)),
        None => s.deadlock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::trace::parse_trace;

    fn search(text: &str) -> Option<SearchOutcome> {
        predictable_race_search(&parse_trace(text).unwrap()).unwrap()
    }

    #[test]
    fn lock_elision_reorders_the_critical_section_first() {
        let Some(SearchOutcome::Race(w)) = search(fixtures::TR_FIG1) else {
            panic!("no witness")
        };
        assert_eq!(w.schedule, vec![4, 5, 6]);
        assert_eq!(w.pair, (0, 7));
    }

    #[test]
    fn capo_has_no_predictable_race() {
        assert_eq!(search(&fixtures::tr_capo()), None);
    }

    #[test]
    fn single_thread_has_none() {
        assert_eq!(
            search("T1 wr x; T1 rd x; T1 acq m; T1 wr x; T1 rel m"),
            None
        );
    }

    #[test]
    fn reads_keep_their_writer() {
        // T2's read must see T1's write, so the two can never be adjacent
        // the other way round, but write-then-read adjacency is fine.
        let Some(SearchOutcome::Race(w)) = search("T1 wr x; T2 rd x") else {
            panic!()
        };
        assert_eq!(w.pair, (0, 1));
        // Ordered by a lock and a value flowing through y: no race on x.
        assert_eq!(
            search("T1 wr x; T1 acq m; T1 wr y; T1 rel m; T2 acq m; T2 rd y; T2 rel m; T2 rd x"),
            None
        );
    }

    #[test]
    fn lock_cycle_is_a_deadlock() {
        let out = search(
            "T1 acq m; T1 acq n; T1 rel n; T1 rel m; T2 acq n; T2 acq m; T2 rel m; T2 rel n",
        );
        assert!(
            matches!(out, Some(SearchOutcome::Deadlock { .. })),
            "{out:?}"
        );
    }
}
