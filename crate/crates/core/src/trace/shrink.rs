use super::{validate, Op, Trace};

/// Greedily remove events from `trace` while `keep_failing` still holds
/// and the result stays well-formed.
///
/// Candidates, tried in order: whole threads, whole critical sections,
/// the acquire/release pair of a critical section, then single accesses,
/// forks and joins. Runs until no candidate can be removed.
pub fn shrink_trace(trace: &Trace, keep_failing: impl Fn(&Trace) -> bool) -> Trace {
    let mut cur = trace.clone();
    loop {
        let mut progressed = false;
        for cand in candidates(&cur) {
            let keep: Vec<usize> = {
                let mut drop = vec![false; cur.len()];
                for &i in &cand {
                    drop[i] = true;
                }
                (0..cur.len()).filter(|&i| !drop[i]).collect()
            };
            let next = cur.retain_indices(&keep);
            if validate(&next).is_well_formed() && keep_failing(&next) {
                cur = next;
                progressed = true;
                break;
            }
        }
        if !progressed {
            return cur;
        }
    }
}

fn candidates(tr: &Trace) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let events = tr.events();

    for t in 0..tr.thread_count() {
        let group: Vec<usize> = events
            .iter()
            .filter(|e| {
                e.thread.index() == t || matches!(e.op, Op::Fork(u) | Op::Join(u) if u.index() == t)
            })
            .map(|e| e.index)
            .collect();
        if !group.is_empty() && group.len() < events.len() {
            out.push(group);
        }
    }

    // Matching acquire/release pairs per thread.
    let mut pairs = Vec::new();
    let mut open: Vec<Vec<usize>> = vec![Vec::new(); tr.thread_count()];
    for e in events {
        match e.op {
            Op::Acquire(_) => open[e.thread.index()].push(e.index),
            Op::Release(_) => {
                if let Some(a) = open[e.thread.index()].pop() {
                    pairs.push((a, e.index));
                }
            }
            _ => {}
        }
    }
    for &(a, r) in &pairs {
        let t = events[a].thread;
        out.push((a..=r).filter(|&i| events[i].thread == t).collect());
    }
    for &(a, r) in &pairs {
        out.push(vec![a, r]);
    }

    for e in events {
        if matches!(e.op, Op::Read(_) | Op::Write(_) | Op::Fork(_) | Op::Join(_)) {
            out.push(vec![e.index]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    #[test]
    fn keeps_only_what_the_predicate_needs() {
        let tr = parse_trace(
            "T1 acq m; T1 rd y; T1 wr x; T1 rel m; T2 rd z; T2 acq n; T2 rd x; T2 rel n; T3 wr q",
        )
        .unwrap();
        let has_xx = |t: &Trace| {
            let ws = t
                .events()
                .iter()
                .filter(|e| matches!(e.op, Op::Write(_)))
                .count();
            t.var_id("x").is_some()
                && t.events()
                    .iter()
                    .filter(|e| e.op.var() == t.var_id("x"))
                    .count()
                    == 2
                && ws >= 1
        };
        let small = shrink_trace(&tr, has_xx);
        assert_eq!(small.len(), 2, "{small}");
        assert!(validate(&small).is_well_formed());
    }

    #[test]
    fn no_shrink_when_predicate_needs_everything() {
        let tr = parse_trace("T1 wr x; T2 rd x").unwrap();
        let same = shrink_trace(&tr, |t| t.len() == 2);
        assert_eq!(same, tr);
    }
}
