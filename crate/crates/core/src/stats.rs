//! Case-frequency counters and lock-nesting histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::{CaseKind, Relation, Tier};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CaseStats {
    pub counts: [u64; 14],
    pub reads: u64,
    pub writes: u64,
    pub nsea_reads: u64,
    pub nsea_writes: u64,
    /// Non-same-epoch accesses made while holding at least 1, 2, 3 locks.
    pub locks_held: [u64; 3],
}

impl CaseStats {
    #[inline]
    pub fn record_case(&mut self, kind: CaseKind, held_depth: usize) {
        self.counts[kind as usize] += 1;
        let write = kind.is_write();
        if write {
            self.writes += 1;
        } else {
            self.reads += 1;
        }
        if kind.is_same_epoch() {
            return;
        }
        if write {
            self.nsea_writes += 1;
        } else {
            self.nsea_reads += 1;
        }
        for (i, slot) in self.locks_held.iter_mut().enumerate() {
            if held_depth > i {
                *slot += 1;
            }
        }
    }

    pub fn count(&self, kind: CaseKind) -> u64 {
        self.counts[kind as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &CaseStats) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.reads += other.reads;
        self.writes += other.writes;
        self.nsea_reads += other.nsea_reads;
        self.nsea_writes += other.nsea_writes;
        for (a, b) in self.locks_held.iter_mut().zip(other.locks_held) {
            *a += b;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatsFormat {
    Json,
    Table,
}

#[derive(Serialize)]
struct Nsea {
    read: u64,
    write: u64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LocksHeld {
    ge1: u64,
    ge2: u64,
    ge3: u64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StatsJson<'a> {
    relation: &'a str,
    tier: &'a str,
    cases: BTreeMap<&'static str, u64>,
    nsea: Nsea,
    locks_held: LocksHeld,
}

pub fn stats_json_value(stats: &CaseStats, relation: Relation, tier: Tier) -> serde_json::Value {
    let doc = StatsJson {
        relation: relation.name(),
        tier: tier.name(),
        cases: CaseKind::ALL
            .iter()
            .map(|&k| (k.name(), stats.count(k)))
            .collect(),
        nsea: Nsea {
            read: stats.nsea_reads,
            write: stats.nsea_writes,
        },
        locks_held: LocksHeld {
            ge1: stats.locks_held[0],
            ge2: stats.locks_held[1],
            ge3: stats.locks_held[2],
        },
    };
    serde_json::to_value(doc).expect("stats serialize")
}

/// Percentage with one decimal place; tiny nonzero shares print as `<0.001`.
pub fn format_percent(part: u64, whole: u64) -> String {
    if whole == 0 || part == 0 {
        return "0.0".to_string();
    }
    let p = 100.0 * part as f64 / whole as f64;
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.1}")
    }
}

pub fn emit_stats(
    stats: &CaseStats,
    relation: Relation,
    tier: Tier,
    format: StatsFormat,
) -> String {
    match format {
        StatsFormat::Json => serde_json::to_string_pretty(&stats_json_value(stats, relation, tier))
            .expect("stats serialize"),
        StatsFormat::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "{relation}/{tier} case frequencies");
            let _ = writeln!(out, "{:<22}{:>12}{:>9}", "case", "count", "% NSEA");
            for &k in CaseKind::ALL.iter() {
                let denom = if k.is_write() {
                    stats.nsea_writes
                } else {
                    stats.nsea_reads
                };
                let pct = if k.is_same_epoch() {
                    "-".to_string()
                } else {
                    format_percent(stats.count(k), denom)
                };
                let _ = writeln!(out, "{:<22}{:>12}{:>9}", k.name(), stats.count(k), pct);
            }
            let _ = writeln!(out, "{:<22}{:>12}", "NSEA reads", stats.nsea_reads);
            let _ = writeln!(out, "{:<22}{:>12}", "NSEA writes", stats.nsea_writes);
            let nsea = stats.nsea_reads + stats.nsea_writes;
            for (i, &c) in stats.locks_held.iter().enumerate() {
                let label = format!("locks held >={}", i + 1);
                let _ = writeln!(out, "{:<22}{:>12}{:>9}", label, c, format_percent(c, nsea));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_histogram() {
        let mut s = CaseStats::default();
        s.record_case(CaseKind::ReadExclusive, 3);
        s.record_case(CaseKind::ReadSameEpoch, 3);
        s.record_case(CaseKind::WriteOwned, 1);
        assert_eq!(s.total(), 3);
        assert_eq!(
            (s.reads, s.writes, s.nsea_reads, s.nsea_writes),
            (2, 1, 1, 1)
        );
        assert_eq!(s.locks_held, [2, 1, 1]);
        assert_eq!(s.nsea_reads, s.reads - s.count(CaseKind::ReadSameEpoch));
    }

    #[test]
    fn percent_format() {
        assert_eq!(format_percent(1, 3), "33.3");
        assert_eq!(format_percent(1, 1_000_000_000), "<0.001");
        assert_eq!(format_percent(0, 0), "0.0");
    }

    #[test]
    fn empty_stats_render_zeros() {
        let s = CaseStats::default();
        let table = emit_stats(&s, Relation::Dc, Tier::Fto, StatsFormat::Table);
        assert!(table.lines().skip(2).all(|l| l.contains(" 0")), "{table}");
        let json = stats_json_value(&s, Relation::Dc, Tier::Fto);
        assert_eq!(json["nsea"]["read"], 0);
        assert_eq!(json["locksHeld"]["ge3"], 0);
        assert_eq!(json["cases"]["WriteShared"], 0);
        assert_eq!(json["relation"], "dc");
    }
}
