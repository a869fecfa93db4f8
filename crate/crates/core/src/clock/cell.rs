use std::cell::OnceCell;
use std::fmt;
use std::ops::ControlFlow;
use std::rc::Rc;

use super::{ClockError, Epoch, VectorClock};
use crate::trace::{LockId, ThreadId};

struct CellInner {
    owner: ThreadId,
    time: OnceCell<VectorClock>,
}

/// Release time of one critical section, shared by every CS list that
/// captured it. Reads as ∞ on the owner's component until finalized.
#[derive(Clone)]
pub struct ClockCell(Rc<CellInner>);

impl ClockCell {
    pub fn new(owner: ThreadId) -> Self {
        ClockCell(Rc::new(CellInner {
            owner,
            time: OnceCell::new(),
        }))
    }

    pub fn owner(&self) -> ThreadId {
        self.0.owner
    }

    pub fn time(&self) -> Option<&VectorClock> {
        self.0.time.get()
    }

    pub fn is_final(&self) -> bool {
        self.0.time.get().is_some()
    }

    /// `c@owner` of the release, or ∞@owner while pending.
    #[inline]
    pub fn release_epoch(&self) -> Epoch {
        match self.0.time.get() {
            Some(vc) => Epoch::new(self.0.owner, vc.get(self.0.owner)),
            None => Epoch::infinite(self.0.owner),
        }
    }

    /// Whether the release is ordered before a thread at time `c`.
    #[inline]
    pub fn ordered_before(&self, c: &VectorClock) -> bool {
        self.release_epoch().leq_vc(c)
    }

    pub fn finalize(&self, release: VectorClock) -> Result<(), ClockError> {
        self.0
            .time
            .set(release)
            .map_err(|_| ClockError::AlreadyFinal)
    }

    pub fn ptr_eq(&self, other: &ClockCell) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for ClockCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.time() {
            Some(vc) => write!(f, "Cell(T{}: {:?})", self.0.owner.0, vc),
            None => write!(f, "Cell(T{}: ∞)", self.0.owner.0),
        }
    }
}

pub struct CsNode {
    pub cell: ClockCell,
    pub lock: LockId,
    pub next: CsList,
}

/// Persistent list of active critical sections, innermost first.
/// Cloning shares the nodes.
#[derive(Clone, Default)]
pub struct CsList(Option<Rc<CsNode>>);

impl CsList {
    pub fn empty() -> Self {
        CsList(None)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn head(&self) -> Option<&CsNode> {
        self.0.as_deref()
    }

    /// Innermost to outermost.
    pub fn iter(&self) -> impl Iterator<Item = &CsNode> {
        std::iter::successors(self.head(), |n| n.next.head())
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn outermost(&self) -> Option<&CsNode> {
        self.iter().last()
    }

    pub fn contains(&self, lock: LockId) -> bool {
        self.iter().any(|n| n.lock == lock)
    }

    pub fn locks(&self) -> Vec<LockId> {
        self.iter().map(|n| n.lock).collect()
    }

    /// Visit nodes outermost first, stopping at the first `Break`.
    pub fn visit_outermost_first<B>(
        &self,
        f: &mut impl FnMut(&CsNode) -> ControlFlow<B>,
    ) -> ControlFlow<B> {
        match self.head() {
            None => ControlFlow::Continue(()),
            Some(n) => {
                n.next.visit_outermost_first(f)?;
                f(n)
            }
        }
    }
}

impl fmt::Debug for CsList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.iter().map(|n| (n.lock.0, &n.cell)))
            .finish()
    }
}

/// Prepend a fresh pending cell for `lock`.
pub fn cs_push(
    h: &CsList,
    lock: LockId,
    owner: ThreadId,
) -> Result<(CsList, ClockCell), ClockError> {
    if h.contains(lock) {
        return Err(ClockError::LockAlreadyHeld(lock.0));
    }
    let cell = ClockCell::new(owner);
    let node = CsNode {
        cell: cell.clone(),
        lock,
        next: h.clone(),
    };
    Ok((CsList(Some(Rc::new(node))), cell))
}

/// Finalize the innermost cell with `release` and drop it from the list.
pub fn cs_pop_finalize(h: &CsList, release: &VectorClock) -> Result<CsList, ClockError> {
    let node = h.head().ok_or(ClockError::EmptyList)?;
    node.cell.finalize(release.clone())?;
    Ok(node.next.clone())
}
