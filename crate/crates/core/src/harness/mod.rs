//! Differential testing of the analyses against each other and against the
//! oracle, with shrinking of counterexamples and a coarse timing table.

mod compare;

use std::ops::Range;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use compare::{check_relation, engine_outcome, oracle_outcome, Mismatch, Outcome, RaceKey};

use crate::analysis::{new_engine, AnalysisOptions, Relation, Tier};
use crate::trace::{generate_trace, shrink_trace, validate, GenConfig, Op, Trace, TraceBuilder};

/// Where the traces of a run come from.
#[derive(Clone, Debug)]
pub enum Corpus {
    /// `generate_trace` with the seed substituted. With `vary`, each seed
    /// also draws its own shape: threads in 2..=threads, events in
    /// 4..=events, locks in 0..=locks, vars in 1..=vars, random
    /// probabilities and fork/join.
    Generated { config: GenConfig, vary: bool },
    /// Random perturbations of a fixed trace: dropped accesses, inserted
    /// accesses, swapped thread names. Seed 0 is the trace itself.
    Around(Trace),
}

#[derive(Clone, Debug)]
pub struct DiffConfig {
    pub seeds: Range<u64>,
    pub corpus: Corpus,
    pub relations: Vec<Relation>,
    pub tiers: Vec<Tier>,
    /// Compare against the closure oracle when the trace is under its cap.
    pub oracle: bool,
    pub options: AnalysisOptions,
    pub shrink: bool,
    /// Write one repro file per disagreement here.
    pub repro_dir: Option<PathBuf>,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            seeds: 0..0,
            corpus: Corpus::Generated {
                config: GenConfig::default(),
                vary: true,
            },
            relations: vec![Relation::Dc],
            tiers: Tier::ALL.to_vec(),
            oracle: false,
            options: AnalysisOptions::default(),
            shrink: true,
            repro_dir: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Disagreement {
    pub seed: u64,
    pub mismatches: Vec<Mismatch>,
    /// Serialized (shrunk, if enabled) trace with a `#` header.
    pub repro: String,
    pub repro_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub traces_run: usize,
    pub disagreements: Vec<Disagreement>,
    pub timings: Timings,
}

#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timings {
    pub total_ms: f64,
}

/// Shape drawn for one seed of a varied corpus.
pub fn varied_config(base: &GenConfig, seed: u64) -> GenConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let threads = rng.gen_range(2..=base.threads.max(2));
    let events = rng.gen_range(4.min(base.events)..=base.events);
    GenConfig {
        threads,
        vars: rng.gen_range(1..=base.vars.max(1)),
        locks: rng.gen_range(0..=base.locks),
        events,
        p_critical_section: rng.gen_range(0.0..=1.0),
        p_nested: rng.gen_range(0.0..=0.6),
        p_write: rng.gen_range(0.2..=0.8),
        p_sync: rng.gen_range(0.0..=0.3),
        p_release: rng.gen_range(0.1..=0.6),
        fork_join: rng.gen_bool(0.25),
        lock_affinity: rng.gen_bool(0.3),
        disciplined: rng.gen_bool(0.15),
        seed,
    }
}

/// Trace number `seed` of `corpus`.
pub fn corpus_trace(corpus: &Corpus, seed: u64) -> Trace {
    match corpus {
        Corpus::Generated { config, vary } => {
            let cfg = if *vary {
                varied_config(config, seed)
            } else {
                GenConfig {
                    seed,
                    ..config.clone()
                }
            };
            generate_trace(&cfg).expect("valid generator config")
        }
        Corpus::Around(base) => perturb(base, seed),
    }
}

fn perturb(base: &Trace, seed: u64) -> Trace {
    if seed == 0 {
        return base.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..base.thread_count()).collect();
            if rng.gen_bool(0.3) && p.len() > 1 {
                let (a, b) = (rng.gen_range(0..p.len()), rng.gen_range(0..p.len()));
                p.swap(a, b);
            }
            p
        };
        let mut b = TraceBuilder::new();
        b.header(vec![format!(" perturbed seed={seed}")]);
        // Intern names in the original order so ids stay stable.
        for t in 0..base.thread_count() {
            b.thread(base.thread_name(crate::trace::ThreadId(perm[t] as u32)));
        }
        let name_t = |t: crate::trace::ThreadId| {
            base.thread_name(crate::trace::ThreadId(perm[t.index()] as u32))
        };
        for ev in base.events() {
            if rng.gen_bool(0.1) {
                let t = base.events()[rng.gen_range(0..base.len())].thread;
                let x = format!("x{}", rng.gen_range(0..base.var_count().max(1)));
                let x = if base.var_count() > 0 && rng.gen_bool(0.7) {
                    base.var_name(crate::trace::VarId(
                        rng.gen_range(0..base.var_count()) as u32
                    ))
                    .to_string()
                } else {
                    x
                };
                if rng.gen_bool(0.5) {
                    b.write(name_t(t), &x);
                } else {
                    b.read(name_t(t), &x);
                }
            }
            if ev.op.is_access() && rng.gen_bool(0.15) {
                continue;
            }
            let t = b.thread(name_t(ev.thread));
            let op = match ev.op {
                Op::Read(x) => Op::Read(b.var(base.var_name(x))),
                Op::Write(x) => Op::Write(b.var(base.var_name(x))),
                Op::Acquire(m) => Op::Acquire(b.lock(base.lock_name(m))),
                Op::Release(m) => Op::Release(b.lock(base.lock_name(m))),
                Op::Fork(u) => Op::Fork(b.thread(name_t(u))),
                Op::Join(u) => Op::Join(b.thread(name_t(u))),
            };
            b.push(t, op, ev.site.clone());
        }
        let tr = b.finish();
        if validate(&tr).is_well_formed() {
            return tr;
        }
    }
    base.clone()
}

/// All mismatches for one trace across the requested relations.
pub fn check_trace(trace: &Trace, cfg: &DiffConfig) -> Vec<Mismatch> {
    cfg.relations
        .iter()
        .flat_map(|&r| check_relation(trace, r, &cfg.tiers, cfg.oracle, cfg.options))
        .collect()
}

fn repro_text(trace: &Trace, seed: u64, mismatches: &[Mismatch]) -> String {
    let mut t = trace.clone();
    let mut header = vec![format!(" predrace-diff seed={seed}")];
    for m in mismatches {
        header.push(format!(" failing: {m}"));
    }
    header.extend(trace.header.iter().cloned());
    t.header = header;
    t.serialize()
}

fn run_seed(cfg: &DiffConfig, seed: u64) -> Option<Disagreement> {
    let trace = corpus_trace(&cfg.corpus, seed);
    let mismatches = check_trace(&trace, cfg);
    let first = mismatches.first()?.clone();
    let small = if cfg.shrink {
        let focus = DiffConfig {
            relations: vec![first.relation],
            ..cfg.clone()
        };
        shrink_trace(&trace, |t| {
            check_trace(t, &focus)
                .iter()
                .any(|m| m.tier == first.tier && m.against == first.against)
        })
    } else {
        trace
    };
    let final_mismatches = {
        let again = check_trace(&small, cfg);
        if again.is_empty() {
            mismatches
        } else {
            again
        }
    };
    let repro = repro_text(&small, seed, &final_mismatches);
    let repro_path = cfg.repro_dir.as_ref().and_then(|dir| {
        let path = dir.join(format!("repro-{seed}.trace"));
        std::fs::create_dir_all(dir).ok()?;
        std::fs::write(&path, &repro).ok()?;
        Some(path)
    });
    Some(Disagreement {
        seed,
        mismatches: final_mismatches,
        repro,
        repro_path,
    })
}

/// Run every seed, in parallel, and collect disagreements in seed order.
pub fn differential_run(cfg: &DiffConfig) -> Report {
    let start = Instant::now();
    let seeds: Vec<u64> = cfg.seeds.clone().collect();
    let disagreements: Vec<Disagreement> = seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Report {
        traces_run: seeds.len(),
        disagreements,
        timings: Timings {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfRow {
    pub relation: Relation,
    pub tier: Tier,
    pub runs_ms: Vec<f64>,
    pub median_ms: f64,
    pub races: usize,
}

/// Time each engine over the whole trace, single-threaded. Every engine
/// gets one discarded warmup run, then `runs` rounds run each engine once
/// in turn; the median per engine is reported.
pub fn perf_compare(trace: &Trace, pairs: &[(Relation, Tier)], runs: usize) -> Vec<PerfRow> {
    let mut races = vec![0; pairs.len()];
    for (k, &(relation, tier)) in pairs.iter().enumerate() {
        races[k] = time_engine(trace, relation, tier).1;
    }
    let mut runs_ms = vec![Vec::new(); pairs.len()];
    for _ in 0..runs.max(1) {
        for (k, &(relation, tier)) in pairs.iter().enumerate() {
            runs_ms[k].push(time_engine(trace, relation, tier).0);
        }
    }
    pairs
        .iter()
        .zip(runs_ms)
        .zip(races)
        .map(|((&(relation, tier), runs_ms), races)| {
            let mut sorted = runs_ms.clone();
            sorted.sort_by(f64::total_cmp);
            let median_ms = sorted[sorted.len() / 2];
            PerfRow {
                relation,
                tier,
                runs_ms,
                median_ms,
                races,
            }
        })
        .collect()
}

/// Wall time of one full pass (engine setup included, teardown excluded)
/// and the number of racing accesses.
fn time_engine(trace: &Trace, relation: Relation, tier: Tier) -> (f64, usize) {
    let start = Instant::now();
    let mut engine = new_engine(trace, relation, tier, AnalysisOptions::default())
        .expect("supported configuration");
    let mut races = 0;
    for ev in trace.events() {
        if engine.step(ev).is_some() {
            races += 1;
        }
    }
    let ms = start.elapsed().as_secs_f64() * 1e3;
    drop(engine);
    (ms, races)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::trace::parse_trace;

    #[test]
    fn empty_seed_range() {
        let r = differential_run(&DiffConfig::default());
        assert_eq!(r.traces_run, 0);
        assert!(r.disagreements.is_empty());
    }

    #[test]
    fn small_run_agrees() {
        let cfg = DiffConfig {
            seeds: 0..40,
            corpus: Corpus::Generated {
                config: GenConfig {
                    threads: 4,
                    events: 30,
                    ..GenConfig::default()
                },
                vary: true,
            },
            relations: Relation::ALL.to_vec(),
            oracle: true,
            ..DiffConfig::default()
        };
        let r = differential_run(&cfg);
        assert_eq!(r.traces_run, 40);
        assert!(r.disagreements.is_empty(), "{:#?}", r.disagreements.first());
    }

    #[test]
    fn perturbations_stay_well_formed() {
        let base = parse_trace(&fixtures::tr_st_b()).unwrap();
        for s in 0..50 {
            assert!(validate(&corpus_trace(&Corpus::Around(base.clone()), s)).is_well_formed());
        }
        assert_eq!(corpus_trace(&Corpus::Around(base.clone()), 0), base);
    }

    #[test]
    fn varied_shapes_respect_bounds() {
        let base = GenConfig {
            threads: 6,
            events: 60,
            vars: 4,
            locks: 3,
            ..GenConfig::default()
        };
        for s in 0..200 {
            let c = varied_config(&base, s);
            assert!((2..=6).contains(&c.threads) && (4..=60).contains(&c.events) && c.locks <= 3);
        }
    }
}
