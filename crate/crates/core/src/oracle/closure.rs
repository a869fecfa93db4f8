use std::fmt;

use super::{cap_from_env, critical_sections, CriticalSection, OracleError, CLOSURE_CAP};
use crate::analysis::Relation;
use crate::trace::{Op, Trace};

/// `M[i][j]`: event `i` is ordered before event `j`. Rows are bitsets.
#[derive(Clone, PartialEq, Eq)]
pub struct OrderMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl OrderMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        OrderMatrix {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    fn or_into(&mut self, dst: usize, src: &[u64]) {
        let w = self.words;
        for (d, s) in self.bits[dst * w..(dst + 1) * w].iter_mut().zip(src) {
            *d |= s;
        }
    }

    fn or_row(&mut self, dst: usize, src: usize) {
        let row = self.row(src).to_vec();
        self.or_into(dst, &row);
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.get(i, j))
    }

    /// Irreflexive and transitive.
    pub fn is_strict_partial_order(&self) -> bool {
        (0..self.n).all(|i| {
            !self.get(i, i)
                && self.successors(i).all(|j| {
                    self.row(j)
                        .iter()
                        .zip(self.row(i))
                        .all(|(rj, ri)| rj & !ri == 0)
                })
        })
    }

    /// Every pair ordered here is also ordered in `other`.
    pub fn is_subset_of(&self, other: &OrderMatrix) -> bool {
        self.n == other.n && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }
}

impl fmt::Debug for OrderMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            let row: Vec<usize> = self.successors(i).collect();
            writeln!(f, "{i} -> {row:?}")?;
        }
        Ok(())
    }
}

/// Transitive closure of forward edges (`i < j` for every edge).
fn forward_closure(n: usize, adj: &[Vec<usize>]) -> OrderMatrix {
    let mut m = OrderMatrix::new(n);
    for i in (0..n).rev() {
        for &j in &adj[i] {
            debug_assert!(i < j, "edge {i}->{j} points backwards");
            m.set(i, j);
            m.or_row(i, j);
        }
    }
    m
}

struct Edges {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Edges {
    fn new(n: usize) -> Self {
        Edges {
            n,
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, i: usize, j: usize) {
        if !self.adj[i].contains(&j) {
            self.adj[i].push(j);
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
    }
}

fn program_order(trace: &Trace, e: &mut Edges) {
    for idxs in trace.per_thread() {
        for w in idxs.windows(2) {
            e.add(w[0], w[1]);
        }
    }
}

fn fork_join(trace: &Trace, e: &mut Edges) {
    let per = trace.per_thread();
    for ev in trace.events() {
        match ev.op {
            Op::Fork(u) => {
                if let Some(&first) = per[u.index()].iter().find(|&&k| k > ev.index) {
                    e.add(ev.index, first);
                }
            }
            Op::Join(u) => {
                if let Some(&last) = per[u.index()].iter().rev().find(|&&k| k < ev.index) {
                    e.add(last, ev.index);
                }
            }
            _ => {}
        }
    }
}

fn release_acquire(trace: &Trace, e: &mut Edges) {
    let ev = trace.events();
    for r in ev {
        if let Op::Release(m) = r.op {
            for a in &ev[r.index + 1..] {
                if a.op == Op::Acquire(m) {
                    e.add(r.index, a.index);
                }
            }
        }
    }
}

/// Release of an earlier critical section to each access in a later one on
/// the same lock, by another thread, that conflicts with an access in it.
fn conflicting_sections(trace: &Trace, cs: &[CriticalSection], e: &mut Edges) {
    let ev = trace.events();
    for c1 in cs {
        let Some(r1) = c1.rel else { continue };
        for c2 in cs {
            if c2.lock != c1.lock || c2.acq < r1 {
                continue;
            }
            for &e2 in &c2.events {
                if c1.events.iter().any(|&e1| ev[e1].conflicts_with(&ev[e2])) {
                    e.add(r1, e2);
                }
            }
        }
    }
}

/// Pairs of closed sections on one lock, earlier first.
fn section_pairs(cs: &[CriticalSection]) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for c1 in cs {
        let Some(r1) = c1.rel else { continue };
        for c2 in cs {
            if let Some(r2) = c2.rel {
                if c2.lock == c1.lock && c2.acq > r1 {
                    out.push((c1.acq, r1, c2.acq, r2));
                }
            }
        }
    }
    out
}

/// Strict order of `relation` over the events of `trace`.
pub fn closure_order(trace: &Trace, relation: Relation) -> Result<OrderMatrix, OracleError> {
    let cap = cap_from_env(CLOSURE_CAP);
    let n = trace.len();
    if n > cap {
        return Err(OracleError::TooLarge { len: n, cap });
    }
    let cs = critical_sections(trace);
    let pairs = section_pairs(&cs);

    let mut hb = Edges::new(n);
    program_order(trace, &mut hb);
    fork_join(trace, &mut hb);
    release_acquire(trace, &mut hb);
    if relation == Relation::Hb {
        return Ok(forward_closure(n, &hb.adj));
    }

    let mut base = Edges::new(n);
    fork_join(trace, &mut base);
    conflicting_sections(trace, &cs, &mut base);

    if relation == Relation::Wcp {
        let h = forward_closure(n, &hb.adj);
        loop {
            let m = compose_hb(&h, &base);
            let mut grew = false;
            for &(a1, r1, _, r2) in &pairs {
                if m.get(a1, r2) && !base.adj[r1].contains(&r2) {
                    base.add(r1, r2);
                    grew = true;
                }
            }
            if !grew {
                return Ok(m);
            }
        }
    }

    program_order(trace, &mut base);
    loop {
        let m = forward_closure(n, &base.adj);
        if relation == Relation::Wdc {
            return Ok(m);
        }
        let mut grew = false;
        for &(a1, r1, _, r2) in &pairs {
            if m.get(a1, r2) && !m.get(r1, r2) {
                base.add(r1, r2);
                grew = true;
            }
        }
        if !grew {
            return Ok(m);
        }
    }
}

/// `HB* ; base ; HB*`.
fn compose_hb(h: &OrderMatrix, base: &Edges) -> OrderMatrix {
    let n = base.n;
    let mut m = OrderMatrix::new(n);
    for (a, b) in base.pairs() {
        let mut after = h.row(b).to_vec();
        after[b / 64] |= 1 << (b % 64);
        for x in 0..=a {
            if x == a || h.get(x, a) {
                m.or_into(x, &after);
            }
        }
    }
    m
}
