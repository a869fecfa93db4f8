//! Vector-clock race analyses for HB, WCP, DC and WDC at three tiers.

mod ccs;
mod fto;
mod smarttrack;
mod sync;
mod unopt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::VectorClock;
use crate::stats::CaseStats;
use crate::trace::{Event, ThreadId, Trace, VarId};

pub use fto::FtoEngine;
pub use smarttrack::StEngine;
pub use unopt::UnoptEngine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Hb,
    Wcp,
    Dc,
    Wdc,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::Hb, Relation::Wcp, Relation::Dc, Relation::Wdc];

    pub fn name(self) -> &'static str {
        match self {
            Relation::Hb => "hb",
            Relation::Wcp => "wcp",
            Relation::Dc => "dc",
            Relation::Wdc => "wdc",
        }
    }

    /// Whether the relation has the lock-variable ordering rule.
    pub fn has_rule_a(self) -> bool {
        self != Relation::Hb
    }

    /// Whether the relation has the release-release ordering rule.
    pub fn has_rule_b(self) -> bool {
        matches!(self, Relation::Wcp | Relation::Dc)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hb" => Ok(Relation::Hb),
            "wcp" => Ok(Relation::Wcp),
            "dc" => Ok(Relation::Dc),
            "wdc" => Ok(Relation::Wdc),
            _ => Err(AnalysisError::UnknownRelation(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Unopt,
    Fto,
    #[serde(rename = "smarttrack")]
    SmartTrack,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Unopt, Tier::Fto, Tier::SmartTrack];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Unopt => "unopt",
            Tier::Fto => "fto",
            Tier::SmartTrack => "smarttrack",
        }
    }

    pub fn supports(self, r: Relation) -> bool {
        !(self == Tier::SmartTrack && r == Relation::Hb)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tier {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unopt" => Ok(Tier::Unopt),
            "fto" => Ok(Tier::Fto),
            "smarttrack" | "st" => Ok(Tier::SmartTrack),
            _ => Err(AnalysisError::UnknownTier(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("unknown relation `{0}` (expected hb, wcp, dc or wdc)")]
    UnknownRelation(String),
    #[error("unknown tier `{0}` (expected unopt, fto or smarttrack)")]
    UnknownTier(String),
    #[error("{tier} does not support {relation}")]
    Unsupported { relation: Relation, tier: Tier },
    #[error("trace is not well formed: {0}")]
    IllFormed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaceKind {
    WriteWrite,
    WriteRead,
    ReadWrite,
}

impl RaceKind {
    /// Kind of a race between a prior access and the current one.
    pub fn of(prior_write: bool, curr_write: bool) -> RaceKind {
        match (prior_write, curr_write) {
            (true, true) => RaceKind::WriteWrite,
            (true, false) => RaceKind::WriteRead,
            _ => RaceKind::ReadWrite,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RaceKind::WriteWrite => "write-write",
            RaceKind::WriteRead => "write-read",
            RaceKind::ReadWrite => "read-write",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceReport {
    pub kind: RaceKind,
    pub var: String,
    pub prior_index: usize,
    pub prior_site: String,
    pub prior_thread: String,
    pub curr_index: usize,
    pub curr_site: String,
    pub curr_thread: String,
    pub relation: Relation,
    pub tier: Tier,
}

impl RaceReport {
    pub fn key(&self) -> (usize, usize, RaceKind) {
        (self.prior_index, self.curr_index, self.kind)
    }
}

/// Per-case counters, one per non-skipped access family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseKind {
    ReadSameEpoch,
    ReadSharedSameEpoch,
    WriteSameEpoch,
    ReadOwned,
    ReadSharedOwned,
    WriteOwned,
    ReadExclusive,
    ReadShare,
    ReadShared,
    WriteExclusive,
    WriteShared,
    WriteExclusiveRace,
    WriteSharedRace,
    WriteReadRace,
}

impl CaseKind {
    pub const ALL: [CaseKind; 14] = [
        CaseKind::ReadSameEpoch,
        CaseKind::ReadSharedSameEpoch,
        CaseKind::WriteSameEpoch,
        CaseKind::ReadOwned,
        CaseKind::ReadSharedOwned,
        CaseKind::WriteOwned,
        CaseKind::ReadExclusive,
        CaseKind::ReadShare,
        CaseKind::ReadShared,
        CaseKind::WriteExclusive,
        CaseKind::WriteShared,
        CaseKind::WriteExclusiveRace,
        CaseKind::WriteSharedRace,
        CaseKind::WriteReadRace,
    ];

    pub fn is_same_epoch(self) -> bool {
        matches!(
            self,
            CaseKind::ReadSameEpoch | CaseKind::ReadSharedSameEpoch | CaseKind::WriteSameEpoch
        )
    }

    pub fn is_write(self) -> bool {
        matches!(
            self,
            CaseKind::WriteSameEpoch
                | CaseKind::WriteOwned
                | CaseKind::WriteExclusive
                | CaseKind::WriteShared
                | CaseKind::WriteExclusiveRace
                | CaseKind::WriteSharedRace
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::ReadSameEpoch => "ReadSameEpoch",
            CaseKind::ReadSharedSameEpoch => "ReadSharedSameEpoch",
            CaseKind::WriteSameEpoch => "WriteSameEpoch",
            CaseKind::ReadOwned => "ReadOwned",
            CaseKind::ReadSharedOwned => "ReadSharedOwned",
            CaseKind::WriteOwned => "WriteOwned",
            CaseKind::ReadExclusive => "ReadExclusive",
            CaseKind::ReadShare => "ReadShare",
            CaseKind::ReadShared => "ReadShared",
            CaseKind::WriteExclusive => "WriteExclusive",
            CaseKind::WriteShared => "WriteShared",
            CaseKind::WriteExclusiveRace => "WriteExclusiveRace",
            CaseKind::WriteSharedRace => "WriteSharedRace",
            CaseKind::WriteReadRace => "WriteReadRace",
        }
    }
}

/// Index and kind of the most recent access recorded in a last-access slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Tag {
    pub index: u32,
    pub write: bool,
}

impl Tag {
    pub fn new(index: usize, write: bool) -> Tag {
        Tag {
            index: index as u32,
            write,
        }
    }
}

/// A race found by an engine step, before site names are attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawRace {
    pub prior: usize,
    pub curr: usize,
    pub kind: RaceKind,
    pub var: VarId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnalysisOptions {
    /// Stop after the first racing access instead of continuing.
    pub stop_at_first_race: bool,
    /// SmartTrack only: let reads take the exclusive case whenever the last
    /// access is ordered, ignoring its critical sections. Unsound; used to
    /// check that the differential harness notices.
    pub st_drop_read_share_coupling: bool,
}

/// One analysis instance over one trace.
pub trait Engine {
    fn step(&mut self, ev: &Event) -> Option<RawRace>;

    /// The clock that access checks compare against (the WCP clock for WCP).
    fn ordering_clock(&self, t: ThreadId) -> &VectorClock;

    fn stats(&self) -> &CaseStats;

    fn into_stats(self: Box<Self>) -> CaseStats;
}

pub fn new_engine(
    trace: &Trace,
    relation: Relation,
    tier: Tier,
    opts: AnalysisOptions,
) -> Result<Box<dyn Engine>, AnalysisError> {
    if !tier.supports(relation) {
        return Err(AnalysisError::Unsupported { relation, tier });
    }
    let (n, l, v) = (trace.thread_count(), trace.lock_count(), trace.var_count());
    Ok(match tier {
        Tier::Unopt => Box::new(UnoptEngine::new(relation, n, l, v)),
        Tier::Fto => Box::new(FtoEngine::new(relation, n, l, v)),
        Tier::SmartTrack => Box::new(StEngine::new(relation, n, l, v, opts)),
    })
}

#[derive(Clone, Debug)]
pub struct EngineVerdict {
    pub relation: Relation,
    pub tier: Tier,
    pub races: Vec<RaceReport>,
    pub stats: CaseStats,
}

impl EngineVerdict {
    pub fn race_keys(&self) -> Vec<(usize, usize, RaceKind)> {
        self.races.iter().map(RaceReport::key).collect()
    }
}

fn report(trace: &Trace, raw: RawRace, relation: Relation, tier: Tier) -> RaceReport {
    let (p, c) = (&trace.events()[raw.prior], &trace.events()[raw.curr]);
    RaceReport {
        kind: raw.kind,
        var: trace.var_name(raw.var).to_string(),
        prior_index: raw.prior,
        prior_site: p.site_label(),
        prior_thread: trace.thread_name(p.thread).to_string(),
        curr_index: raw.curr,
        curr_site: c.site_label(),
        curr_thread: trace.thread_name(c.thread).to_string(),
        relation,
        tier,
    }
}

/// Run one analysis over a trace. Ill-formed traces are rejected.
pub fn analyze(
    trace: &Trace,
    relation: Relation,
    tier: Tier,
    opts: AnalysisOptions,
) -> Result<EngineVerdict, AnalysisError> {
    let wf = crate::trace::validate(trace);
    if let Some(v) = wf.violations.first() {
        return Err(AnalysisError::IllFormed(format!(
            "event {}: {}",
            v.index, v.kind
        )));
    }
    let mut engine = new_engine(trace, relation, tier, opts)?;
    let mut races = Vec::new();
    for ev in trace.events() {
        if let Some(raw) = engine.step(ev) {
            races.push(report(trace, raw, relation, tier));
            if opts.stop_at_first_race {
                break;
            }
        }
    }
    Ok(EngineVerdict {
        relation,
        tier,
        races,
        stats: engine.into_stats(),
    })
}

/// Like [`analyze`], also returning each access's ordering clock right after
/// its step (`None` for non-access events and for events never reached).
pub fn analyze_with_clocks(
    trace: &Trace,
    relation: Relation,
    tier: Tier,
    opts: AnalysisOptions,
) -> Result<(EngineVerdict, Vec<Option<VectorClock>>), AnalysisError> {
    let mut engine = new_engine(trace, relation, tier, opts)?;
    let mut races = Vec::new();
    let mut clocks = vec![None; trace.len()];
    for ev in trace.events() {
        let raced = engine.step(ev);
        if ev.op.is_access() {
            clocks[ev.index] = Some(engine.ordering_clock(ev.thread).clone());
        }
        if let Some(raw) = raced {
            races.push(report(trace, raw, relation, tier));
            if opts.stop_at_first_race {
                break;
            }
        }
    }
    Ok((
        EngineVerdict {
            relation,
            tier,
            races,
            stats: engine.into_stats(),
        },
        clocks,
    ))
}
