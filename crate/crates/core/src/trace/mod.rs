//! Execution traces: events, interning, text format, well-formedness,
//! seeded generation and counterexample shrinking.

mod generate;
mod parse;
mod shrink;
mod validate;

use std::fmt;

pub use generate::{generate_trace, GenConfig, GenError};
pub use parse::{parse_trace, ParseError};
pub use shrink::shrink_trace;
pub use validate::{validate, Violation, ViolationKind, Warning, WellFormedReport};

macro_rules! dense_id {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

dense_id!(
    /// Dense thread identifier, interned from a name such as `T1`.
    ThreadId
);
dense_id!(
    /// Dense lock identifier.
    LockId
);
dense_id!(
    /// Dense shared-variable identifier.
    VarId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Read(VarId),
    Write(VarId),
    Acquire(LockId),
    Release(LockId),
    Fork(ThreadId),
    Join(ThreadId),
}

impl Op {
    pub fn keyword(&self) -> &'static str {
        match self {
            Op::Read(_) => "rd",
            Op::Write(_) => "wr",
            Op::Acquire(_) => "acq",
            Op::Release(_) => "rel",
            Op::Fork(_) => "fork",
            Op::Join(_) => "join",
        }
    }

    pub fn is_access(&self) -> bool {
        matches!(self, Op::Read(_) | Op::Write(_))
    }

    /// Variable touched by an access, if any.
    pub fn var(&self) -> Option<VarId> {
        match *self {
            Op::Read(x) | Op::Write(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_write(&self) -> bool {
        matches!(self, Op::Write(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub index: usize,
    pub thread: ThreadId,
    pub op: Op,
    /// Explicit site label; `None` means the index is the label.
    pub site: Option<String>,
}

impl Event {
    pub fn site_label(&self) -> String {
        match &self.site {
            Some(s) => s.clone(),
            None => self.index.to_string(),
        }
    }

    /// Two events conflict when they access the same variable from
    /// different threads and at least one of them writes.
    pub fn conflicts_with(&self, other: &Event) -> bool {
        match (self.op.var(), other.op.var()) {
            (Some(a), Some(b)) => {
                a == b && self.thread != other.thread && (self.op.is_write() || other.op.is_write())
            }
            _ => false,
        }
    }
}

/// Name table for one identifier namespace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    lookup: rustc_hash::FxHashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// A totally ordered sequence of events from one execution.
///
/// Traces are immutable once built; `TraceBuilder` is the only way to
/// append events, which keeps `index` equal to the position.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<Event>,
    threads: Interner,
    locks: Interner,
    vars: Interner,
    /// `#` header lines, without the leading `#`.
    pub header: Vec<String>,
}

impl Trace {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn lock_count(&self) -> usize {
        self.locks.len()
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        self.threads.name(t.0)
    }

    pub fn lock_name(&self, m: LockId) -> &str {
        self.locks.name(m.0)
    }

    pub fn var_name(&self, x: VarId) -> &str {
        self.vars.name(x.0)
    }

    pub fn thread_id(&self, name: &str) -> Option<ThreadId> {
        self.threads.get(name).map(ThreadId)
    }

    pub fn lock_id(&self, name: &str) -> Option<LockId> {
        self.locks.get(name).map(LockId)
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.get(name).map(VarId)
    }

    /// Render the trace in the line-oriented text format. Header lines
    /// come first, then one event per line.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for h in &self.header {
            out.push('#');
            out.push_str(h);
            out.push('\n');
        }
        for ev in &self.events {
            out.push_str(&self.render_event(ev));
            out.push('\n');
        }
        out
    }

    pub fn render_event(&self, ev: &Event) -> String {
        let operand = match ev.op {
            Op::Read(x) | Op::Write(x) => self.var_name(x),
            Op::Acquire(m) | Op::Release(m) => self.lock_name(m),
            Op::Fork(u) | Op::Join(u) => self.thread_name(u),
        };
        let mut s = format!(
            "{} {} {}",
            self.thread_name(ev.thread),
            ev.op.keyword(),
            operand
        );
        if let Some(site) = &ev.site {
            s.push_str(" @");
            s.push_str(site);
        }
        s
    }

    /// Rebuild a trace from a subset of this trace's events, in order.
    /// Identifiers are re-interned so the result is dense again.
    pub fn retain_indices(&self, keep: &[usize]) -> Trace {
        let mut b = TraceBuilder::new();
        b.header(self.header.clone());
        for &i in keep {
            let ev = &self.events[i];
            b.push_named(self, ev);
        }
        b.finish()
    }

    /// Events of each thread, in program order.
    pub fn per_thread(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.thread_count()];
        for ev in &self.events {
            out[ev.thread.index()].push(ev.index);
        }
        out
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Incremental trace construction by symbolic names.
#[derive(Debug, Default)]
pub struct TraceBuilder {
    trace: Trace,
}

impl TraceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn header(&mut self, lines: Vec<String>) -> &mut Self {
        self.trace.header = lines;
        self
    }

    pub fn thread(&mut self, name: &str) -> ThreadId {
        ThreadId(self.trace.threads.intern(name))
    }

    pub fn lock(&mut self, name: &str) -> LockId {
        LockId(self.trace.locks.intern(name))
    }

    pub fn var(&mut self, name: &str) -> VarId {
        VarId(self.trace.vars.intern(name))
    }

    pub fn push(&mut self, thread: ThreadId, op: Op, site: Option<String>) -> usize {
        let index = self.trace.events.len();
        self.trace.events.push(Event {
            index,
            thread,
            op,
            site,
        });
        index
    }

    pub fn read(&mut self, t: &str, x: &str) -> usize {
        let (t, x) = (self.thread(t), self.var(x));
        self.push(t, Op::Read(x), None)
    }

    pub fn write(&mut self, t: &str, x: &str) -> usize {
        let (t, x) = (self.thread(t), self.var(x));
        self.push(t, Op::Write(x), None)
    }

    pub fn acquire(&mut self, t: &str, m: &str) -> usize {
        let (t, m) = (self.thread(t), self.lock(m));
        self.push(t, Op::Acquire(m), None)
    }

    pub fn release(&mut self, t: &str, m: &str) -> usize {
        let (t, m) = (self.thread(t), self.lock(m));
        self.push(t, Op::Release(m), None)
    }

    fn push_named(&mut self, src: &Trace, ev: &Event) {
        let t = self.thread(src.thread_name(ev.thread));
        let op = match ev.op {
            Op::Read(x) => Op::Read(self.var(src.var_name(x))),
            Op::Write(x) => Op::Write(self.var(src.var_name(x))),
            Op::Acquire(m) => Op::Acquire(self.lock(src.lock_name(m))),
            Op::Release(m) => Op::Release(self.lock(src.lock_name(m))),
            Op::Fork(u) => Op::Fork(self.thread(src.thread_name(u))),
            Op::Join(u) => Op::Join(self.thread(src.thread_name(u))),
        };
        self.push(t, op, ev.site.clone());
    }

    pub fn finish(self) -> Trace {
        self.trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_interns_densely() {
        let mut b = TraceBuilder::new();
        b.read("T1", "x");
        b.write("T2", "x");
        b.acquire("T1", "m");
        let tr = b.finish();
        assert_eq!(tr.thread_count(), 2);
        assert_eq!(tr.var_count(), 1);
        assert_eq!(tr.lock_count(), 1);
        assert!(tr.events()[0].conflicts_with(&tr.events()[1]));
        assert_eq!(tr.events()[2].site_label(), "2");
    }

    #[test]
    fn retain_reinterns() {
        let tr = parse_trace("T1 rd x; T2 rd y; T3 wr y").unwrap();
        let sub = tr.retain_indices(&[1, 2]);
        assert_eq!(sub.thread_count(), 2);
        assert_eq!(sub.var_count(), 1);
        assert_eq!(sub.thread_name(ThreadId(0)), "T2");
        assert_eq!(sub.events()[1].index, 1);
    }

    #[test]
    fn program_order_is_increasing() {
        let tr = parse_trace(crate::fixtures::TR_FIG2).unwrap();
        for idxs in tr.per_thread() {
            assert!(idxs.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
