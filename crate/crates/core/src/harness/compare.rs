//! What "the same verdict" means across tiers and against the oracle.
//!
//! Engines keep going after a race with ordinary metadata updates, and the
//! epoch tiers legitimately forget older accesses to a variable once it has
//! raced. The comparisons therefore cover, per relation:
//! - the first racing access of the trace (prior, current, kind), all tiers;
//! - the first race on each variable, for the unoptimized and epoch tiers;
//! - the ordering clock after each access, for the unoptimized and epoch
//!   tiers over the whole trace and for SmartTrack before its first race.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::analysis::{analyze_with_clocks, AnalysisOptions, RaceKind, Relation, Tier};
use crate::clock::VectorClock;
use crate::oracle::{access_races, closure_order, predecessor_clocks};
use crate::trace::Trace;

pub type RaceKey = (usize, usize, RaceKind);

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub relation: Relation,
    pub tier: Tier,
    /// Tier or "oracle" the result was compared against.
    pub against: String,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} vs {}: {}",
            self.relation, self.tier, self.against, self.detail
        )
    }
}

/// Race list and per-access clocks of one run, in comparable form.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub races: Vec<RaceKey>,
    /// Components of other threads only; `None` for non-access events.
    pub clocks: Vec<Option<Vec<u64>>>,
}

impl Outcome {
    pub fn first(&self) -> Option<RaceKey> {
        self.races.first().copied()
    }

    pub fn first_per_var(&self, trace: &Trace) -> BTreeMap<u32, RaceKey> {
        let mut out = BTreeMap::new();
        for &r in &self.races {
            let x = trace.events()[r.1].op.var().expect("race on an access").0;
            out.entry(x).or_insert(r);
        }
        out
    }
}

fn strip_own(trace: &Trace, j: usize, c: &VectorClock, n: usize) -> Vec<u64> {
    let t = trace.events()[j].thread;
    (0..n)
        .map(|u| {
            if u == t.index() {
                0
            } else {
                c.get(crate::trace::ThreadId(u as u32))
            }
        })
        .collect()
}

pub fn engine_outcome(
    trace: &Trace,
    relation: Relation,
    tier: Tier,
    opts: AnalysisOptions,
) -> Outcome {
    let (verdict, clocks) =
        analyze_with_clocks(trace, relation, tier, opts).expect("supported configuration");
    let n = trace.thread_count();
    Outcome {
        races: verdict.race_keys(),
        clocks: clocks
            .iter()
            .enumerate()
            .map(|(j, c)| c.as_ref().map(|c| strip_own(trace, j, c, n)))
            .collect(),
    }
}

pub fn oracle_outcome(trace: &Trace, relation: Relation) -> Option<Outcome> {
    let m = closure_order(trace, relation).ok()?;
    let pred = predecessor_clocks(trace, &m);
    let races = access_races(trace, &m);
    Some(Outcome {
        races,
        clocks: trace
            .events()
            .iter()
            .map(|e| {
                e.op.is_access().then(|| {
                    let mut v = pred[e.index].clone();
                    v[e.thread.index()] = 0;
                    v
                })
            })
            .collect(),
    })
}

/// Compare `got` (from `tier`) against `want`. The clock audit covers
/// events before `clocks_until`; `per_var` enables the per-variable
/// comparison.
fn compare(
    trace: &Trace,
    relation: Relation,
    tier: Tier,
    against: &str,
    got: &Outcome,
    want: &Outcome,
    per_var: bool,
    clocks_until: usize,
) -> Option<Mismatch> {
    let mk = |detail: String| Mismatch {
        relation,
        tier,
        against: against.to_string(),
        detail,
    };
    if got.first() != want.first() {
        return Some(mk(format!(
            "first race {:?} vs {:?}",
            got.first(),
            want.first()
        )));
    }
    if per_var {
        let (g, w) = (got.first_per_var(trace), want.first_per_var(trace));
        if g != w {
            return Some(mk(format!("first race per variable {g:?} vs {w:?}")));
        }
    }
    for j in 0..trace.len().min(clocks_until) {
        if let (Some(g), Some(w)) = (&got.clocks[j], &want.clocks[j]) {
            if g != w {
                return Some(mk(format!("clock after event {j}: {g:?} vs {w:?}")));
            }
        }
    }
    None
}

fn clock_horizon(tier: Tier, o: &Outcome) -> usize {
    match tier {
        Tier::SmartTrack => o.first().map_or(usize::MAX, |r| r.1),
        _ => usize::MAX,
    }
}

/// Run every requested tier for `relation` and compare each with the
/// unoptimized tier and, when `oracle` is set, with the closure oracle.
pub fn check_relation(
    trace: &Trace,
    relation: Relation,
    tiers: &[Tier],
    oracle: bool,
    opts: AnalysisOptions,
) -> Vec<Mismatch> {
    let mut out = Vec::new();
    let base = engine_outcome(trace, relation, Tier::Unopt, opts);
    if oracle {
        if let Some(want) = oracle_outcome(trace, relation) {
            for &tier in tiers.iter().filter(|t| t.supports(relation)) {
                let got = if tier == Tier::Unopt {
                    base.clone()
                } else {
                    engine_outcome(trace, relation, tier, opts)
                };
                let per_var = tier != Tier::SmartTrack;
                if let Some(m) = compare(
                    trace,
                    relation,
                    tier,
                    "oracle",
                    &got,
                    &want,
                    per_var,
                    clock_horizon(tier, &got),
                ) {
                    out.push(m);
                }
            }
            return out;
        }
    }
    for &tier in tiers
        .iter()
        .filter(|&&t| t != Tier::Unopt && t.supports(relation))
    {
        let got = engine_outcome(trace, relation, tier, opts);
        let per_var = tier != Tier::SmartTrack;
        if let Some(m) = compare(
            trace,
            relation,
            tier,
            "unopt",
            &got,
            &base,
            per_var,
            clock_horizon(tier, &got),
        ) {
            out.push(m);
        }
    }
    out
}
