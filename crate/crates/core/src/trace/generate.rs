use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LockId, Op, ThreadId, Trace, TraceBuilder, VarId};

/// Parameters for random trace generation.
///
/// The PRNG is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
/// `seed_from_u64(seed)`, so a config maps to one trace bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub threads: usize,
    pub vars: usize,
    pub locks: usize,
    pub events: usize,
    /// Chance that an access outside any critical section opens one first.
    pub p_critical_section: f64,
    /// Chance that an access inside a critical section nests another lock first.
    pub p_nested: f64,
    pub p_write: f64,
    /// Chance of emitting an `acq l; rd lVar; wr lVar; rel l` block.
    pub p_sync: f64,
    /// Chance that a step inside a critical section releases the innermost lock.
    pub p_release: f64,
    /// Thread 0 forks every other thread up front and joins them at the end.
    pub fork_join: bool,
    /// Inside a critical section on lock `k`, touch only variables `x` with
    /// `x % locks == k` (outermost lock decides).
    pub lock_affinity: bool,
    /// Outside critical sections, touch only thread-private variables
    /// (`T1_p0`, ...); together with `lock_affinity` this yields race-free
    /// traces.
    pub disciplined: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            threads: 3,
            vars: 3,
            locks: 2,
            events: 40,
            p_critical_section: 0.5,
            p_nested: 0.2,
            p_write: 0.5,
            p_sync: 0.1,
            p_release: 0.3,
            fork_join: false,
            lock_affinity: false,
            disciplined: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("probability `{name}` = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("cannot generate {events} events: {reason}")]
    Unsatisfiable { events: usize, reason: &'static str },
}

impl GenConfig {
    pub fn check(&self) -> Result<(), GenError> {
        for (name, value) in [
            ("p_critical_section", self.p_critical_section),
            ("p_nested", self.p_nested),
            ("p_write", self.p_write),
            ("p_sync", self.p_sync),
            ("p_release", self.p_release),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(GenError::Probability { name, value });
            }
        }
        if self.events > 0 && self.threads == 0 {
            return Err(GenError::Unsatisfiable {
                events: self.events,
                reason: "no threads",
            });
        }
        if self.events > 0 && self.vars == 0 && self.locks == 0 {
            return Err(GenError::Unsatisfiable {
                events: self.events,
                reason: "no variables and no locks",
            });
        }
        Ok(())
    }

    fn header_line(&self) -> String {
        format!(
            " predrace-gen seed={} threads={} vars={} locks={} events={} p_cs={} p_nested={} p_write={} p_sync={} p_release={} fork_join={} lock_affinity={} disciplined={}",
            self.seed,
            self.threads,
            self.vars,
            self.locks,
            self.events,
            self.p_critical_section,
            self.p_nested,
            self.p_write,
            self.p_sync,
            self.p_release,
            self.fork_join,
            self.lock_affinity,
            self.disciplined
        )
    }
}

const PRIVATE_VARS: usize = 4;

struct Gen<'a> {
    cfg: &'a GenConfig,
    rng: ChaCha8Rng,
    b: TraceBuilder,
    threads: Vec<ThreadId>,
    locks: Vec<LockId>,
    vars: Vec<VarId>,
    sync_vars: Vec<VarId>,
    /// Private variables per thread, for `disciplined`.
    private: Vec<Vec<VarId>>,
    holder: Vec<Option<usize>>,
    stacks: Vec<Vec<usize>>,
    emitted: usize,
    /// Events already promised: releases of held locks and pending joins.
    reserved: usize,
}

impl Gen<'_> {
    fn budget(&self) -> usize {
        self.cfg.events - self.emitted - self.reserved
    }

    fn emit(&mut self, t: usize, op: Op) {
        self.b.push(self.threads[t], op, None);
        self.emitted += 1;
    }

    fn free_lock(&mut self) -> Option<usize> {
        let free = self.holder.iter().filter(|h| h.is_none()).count();
        if free == 0 {
            return None;
        }
        let pick = self.rng.gen_range(0..free);
        (0..self.locks.len())
            .filter(|&k| self.holder[k].is_none())
            .nth(pick)
    }

    fn acquire(&mut self, t: usize, k: usize) {
        self.emit(t, Op::Acquire(self.locks[k]));
        self.holder[k] = Some(t);
        self.stacks[t].push(k);
        self.reserved += 1;
    }

    fn release_top(&mut self, t: usize) {
        let k = self.stacks[t].pop().expect("release with empty stack");
        self.reserved -= 1;
        self.emit(t, Op::Release(self.locks[k]));
        self.holder[k] = None;
    }

    fn access(&mut self, t: usize) {
        if self.cfg.disciplined && self.stacks[t].is_empty() {
            let j = self.rng.gen_range(0..self.private[t].len());
            let x = self.private[t][j];
            let op = if self.rng.gen_bool(self.cfg.p_write) {
                Op::Write(x)
            } else {
                Op::Read(x)
            };
            self.emit(t, op);
            return;
        }
        let nvars = self.vars.len();
        let x = match (self.cfg.lock_affinity, self.stacks[t].first()) {
            (true, Some(&k)) if !self.locks.is_empty() => {
                // Variables k, k + nl, k + 2nl, ... below nvars.
                let nl = self.locks.len();
                let count = if k < nvars {
                    (nvars - k).div_ceil(nl)
                } else {
                    0
                };
                if count == 0 {
                    self.rng.gen_range(0..nvars)
                } else {
                    k + nl * self.rng.gen_range(0..count)
                }
            }
            _ => self.rng.gen_range(0..nvars),
        };
        let op = if self.rng.gen_bool(self.cfg.p_write) {
            Op::Write(self.vars[x])
        } else {
            Op::Read(self.vars[x])
        };
        self.emit(t, op);
    }

    fn sync_block(&mut self, t: usize, k: usize) {
        let (l, v) = (self.locks[k], self.sync_vars[k]);
        self.emit(t, Op::Acquire(l));
        self.emit(t, Op::Read(v));
        self.emit(t, Op::Write(v));
        self.emit(t, Op::Release(l));
    }

    /// One scheduling step for thread `t`. Returns false when nothing fits.
    fn step(&mut self, t: usize) -> bool {
        let has_vars = !self.vars.is_empty();
        if !self.stacks[t].is_empty() {
            let r: f64 = self.rng.gen();
            if r < self.cfg.p_release || (!has_vars && self.budget() < 2) {
                self.release_top(t);
                return true;
            }
            if self.budget() >= 2 && self.rng.gen_bool(self.cfg.p_nested) {
                if let Some(k) = self.free_lock() {
                    self.acquire(t, k);
                    return true;
                }
            }
            if has_vars {
                self.access(t);
            } else {
                self.release_top(t);
            }
            return true;
        }
        if self.budget() >= 4 && self.rng.gen_bool(self.cfg.p_sync) {
            if let Some(k) = self.free_lock() {
                self.sync_block(t, k);
                return true;
            }
        }
        if self.budget() >= 2 && (!has_vars || self.rng.gen_bool(self.cfg.p_critical_section)) {
            if let Some(k) = self.free_lock() {
                self.acquire(t, k);
                return true;
            }
        }
        if has_vars {
            self.access(t);
            true
        } else {
            false
        }
    }
}

/// Generate a well-formed trace from `cfg`.
pub fn generate_trace(cfg: &GenConfig) -> Result<Trace, GenError> {
    cfg.check()?;
    let mut b = TraceBuilder::new();
    b.header(vec![cfg.header_line()]);
    if cfg.events == 0 {
        return Ok(b.finish());
    }
    let threads: Vec<ThreadId> = (0..cfg.threads)
        .map(|i| b.thread(&format!("T{}", i + 1)))
        .collect();
    let locks: Vec<LockId> = (0..cfg.locks).map(|i| b.lock(&format!("m{i}"))).collect();
    let vars: Vec<VarId> = (0..cfg.vars).map(|i| b.var(&format!("x{i}"))).collect();
    let sync_vars: Vec<VarId> = (0..cfg.locks).map(|i| b.var(&format!("m{i}Var"))).collect();
    let private: Vec<Vec<VarId>> = if cfg.disciplined {
        (0..cfg.threads)
            .map(|t| {
                (0..PRIVATE_VARS)
                    .map(|j| b.var(&format!("T{}_p{j}", t + 1)))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    let n = cfg.threads;
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        b,
        threads,
        locks,
        vars,
        sync_vars,
        private,
        holder: vec![None; cfg.locks],
        stacks: vec![Vec::new(); n],
        emitted: 0,
        reserved: 0,
    };

    let fork_join = cfg.fork_join && n > 1 && cfg.events >= 2 * (n - 1) + 1;
    if fork_join {
        for u in 1..n {
            g.emit(0, Op::Fork(g.threads[u]));
        }
        g.reserved += n - 1;
    }

    let mut stalled = 0;
    while g.budget() > 0 && stalled < 64 {
        let t = g.rng.gen_range(0..n);
        if g.step(t) {
            stalled = 0;
        } else {
            stalled += 1;
        }
    }

    for t in 0..n {
        while !g.stacks[t].is_empty() {
            g.release_top(t);
        }
    }
    if fork_join {
        g.reserved -= n - 1;
        for u in 1..n {
            g.emit(0, Op::Join(g.threads[u]));
        }
    }
    Ok(g.b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::validate;

    #[test]
    fn empty_when_no_events() {
        let cfg = GenConfig {
            threads: 1,
            events: 0,
            seed: 7,
            ..GenConfig::default()
        };
        assert!(generate_trace(&cfg).unwrap().is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GenConfig {
            threads: 2,
            events: 40,
            p_critical_section: 0.8,
            seed: 42,
            ..GenConfig::default()
        };
        let a = generate_trace(&cfg).unwrap().serialize();
        let b = generate_trace(&cfg).unwrap().serialize();
        assert_eq!(a, b);
        assert!(a.starts_with("# predrace-gen seed=42"));
        let other = generate_trace(&GenConfig { seed: 43, ..cfg })
            .unwrap()
            .serialize();
        assert_ne!(a, other);
    }

    #[test]
    fn large_trace_is_well_formed() {
        let cfg = GenConfig {
            threads: 4,
            events: 10_000,
            seed: 1,
            ..GenConfig::default()
        };
        let tr = generate_trace(&cfg).unwrap();
        assert_eq!(tr.len(), 10_000);
        let r = validate(&tr);
        assert!(
            r.is_well_formed(),
            "{:?}",
            &r.violations[..r.violations.len().min(5)]
        );
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn fork_join_shape() {
        let cfg = GenConfig {
            threads: 3,
            events: 30,
            fork_join: true,
            seed: 5,
            ..GenConfig::default()
        };
        let tr = generate_trace(&cfg).unwrap();
        assert!(validate(&tr).is_well_formed());
        assert!(matches!(tr.events()[0].op, Op::Fork(_)));
        assert!(matches!(tr.events().last().unwrap().op, Op::Join(_)));
        assert_eq!(tr.len(), 30);
    }

    #[test]
    fn disciplined_traces_are_race_free() {
        use crate::analysis::{analyze, AnalysisOptions, Relation, Tier};
        for seed in 0..20 {
            let cfg = GenConfig {
                threads: 4,
                vars: 8,
                locks: 3,
                events: 400,
                lock_affinity: true,
                disciplined: true,
                fork_join: seed % 2 == 0,
                seed,
                ..GenConfig::default()
            };
            let tr = generate_trace(&cfg).unwrap();
            assert!(validate(&tr).is_well_formed());
            let v = analyze(&tr, Relation::Hb, Tier::Unopt, AnalysisOptions::default()).unwrap();
            assert!(v.races.is_empty(), "seed {seed}: {:?}", v.races.first());
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let zero = GenConfig {
            threads: 0,
            events: 3,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_trace(&zero),
            Err(GenError::Unsatisfiable { .. })
        ));
        let p = GenConfig {
            p_write: 1.5,
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_trace(&p),
            Err(GenError::Probability { .. })
        ));
    }
}
