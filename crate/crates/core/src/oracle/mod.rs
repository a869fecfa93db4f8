//! Ground truth for the analyses: relation closures computed by fixpoint
//! over explicit edges, and exhaustive search over reorderings.

mod closure;
mod search;

use thiserror::Error;

pub use closure::{closure_order, OrderMatrix};
pub use search::{predictable_race_search, SearchOutcome, Witness};

use crate::analysis::RaceKind;
use crate::trace::{Op, Trace};

/// Default event caps; `PREDRACE_ORACLE_CAP` overrides both.
pub const CLOSURE_CAP: usize = 400;
pub const SEARCH_CAP: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("trace has {len} events, over the oracle cap of {cap} (set PREDRACE_ORACLE_CAP to raise it)")]
    TooLarge { len: usize, cap: usize },
}

pub(crate) fn cap_from_env(default: usize) -> usize {
    std::env::var("PREDRACE_ORACLE_CAP")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

/// All conflicting pairs `(i, j)`, `i < j`, that `m` leaves unordered.
pub fn races_from_order(trace: &Trace, m: &OrderMatrix) -> Vec<(usize, usize)> {
    let ev = trace.events();
    let mut out = Vec::new();
    for j in 0..ev.len() {
        for i in 0..j {
            if ev[i].conflicts_with(&ev[j]) && !m.get(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// One entry per racing access: the latest unordered conflicting prior access.
pub fn access_races(trace: &Trace, m: &OrderMatrix) -> Vec<(usize, usize, RaceKind)> {
    let ev = trace.events();
    let mut out = Vec::new();
    for j in 0..ev.len() {
        if let Some(i) = (0..j)
            .rev()
            .find(|&i| ev[i].conflicts_with(&ev[j]) && !m.get(i, j))
        {
            out.push((i, j, RaceKind::of(ev[i].op.is_write(), ev[j].op.is_write())));
        }
    }
    out
}

/// Local time of each event: one plus the number of acquires, releases,
/// forks and joins its thread performed before it.
pub fn local_clocks(trace: &Trace) -> Vec<u64> {
    let mut now = vec![1u64; trace.thread_count()];
    trace
        .events()
        .iter()
        .map(|e| {
            let t = e.thread.index();
            let c = now[t];
            if !e.op.is_access() {
                now[t] += 1;
            }
            c
        })
        .collect()
}

/// For each event `j`, the latest local time of every thread's events
/// ordered before `j`.
pub fn predecessor_clocks(trace: &Trace, m: &OrderMatrix) -> Vec<Vec<u64>> {
    let clocks = local_clocks(trace);
    let n = trace.thread_count();
    let ev = trace.events();
    (0..ev.len())
        .map(|j| {
            let mut v = vec![0u64; n];
            for i in 0..j {
                if m.get(i, j) {
                    let u = ev[i].thread.index();
                    v[u] = v[u].max(clocks[i]);
                }
            }
            v
        })
        .collect()
}

/// For each read, the latest earlier write to the same variable.
pub fn last_writer_map(trace: &Trace) -> Vec<(usize, Option<usize>)> {
    let mut last = vec![None; trace.var_count()];
    let mut out = Vec::new();
    for e in trace.events() {
        match e.op {
            Op::Read(x) => out.push((e.index, last[x.index()])),
            Op::Write(x) => last[x.index()] = Some(e.index),
            _ => {}
        }
    }
    out
}

/// Critical sections in trace order of their acquires.
#[derive(Clone, Debug)]
pub(crate) struct CriticalSection {
    pub lock: usize,
    pub acq: usize,
    pub rel: Option<usize>,
    /// Events of the owning thread inside the section, acquire and release included.
    pub events: Vec<usize>,
}

pub(crate) fn critical_sections(trace: &Trace) -> Vec<CriticalSection> {
    let mut out: Vec<CriticalSection> = Vec::new();
    let mut open: Vec<Vec<usize>> = vec![Vec::new(); trace.thread_count()];
    for e in trace.events() {
        let t = e.thread.index();
        if let Op::Acquire(m) = e.op {
            out.push(CriticalSection {
                lock: m.index(),
                acq: e.index,
                rel: None,
                events: Vec::new(),
            });
            open[t].push(out.len() - 1);
        }
        for &cs in &open[t] {
            out[cs].events.push(e.index);
        }
        if let Op::Release(m) = e.op {
            if let Some(pos) = open[t].iter().rposition(|&cs| out[cs].lock == m.index()) {
                let cs = open[t].remove(pos);
                out[cs].rel = Some(e.index);
            }
        }
    }
    out
}
