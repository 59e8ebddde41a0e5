//! Conformance instrumentation: a transport wrapper that records the
//! sequence of collectives a rank takes part in, so tests can audit that
//! every rank of a group invokes the same collectives in the same order.

use std::cell::RefCell;

use super::{CommGroup, RankId, ReduceOp, Transport};
use crate::error::Result;
use crate::scalar::Scalar;

/// One collective call as seen from a single rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectiveEvent {
    pub kind: &'static str,
    pub group: u64,
    pub root: Option<RankId>,
}

pub struct TracingTransport<'a, T: Transport> {
    inner: &'a T,
    events: RefCell<Vec<CollectiveEvent>>,
}

impl<'a, T: Transport> TracingTransport<'a, T> {
    pub fn new(inner: &'a T) -> Self {
        TracingTransport {
            inner,
            events: RefCell::new(Vec::new()),
        }
    }

    pub fn events(&self) -> Vec<CollectiveEvent> {
        self.events.borrow().clone()
    }

    fn log(&self, kind: &'static str, group: &CommGroup, root: Option<RankId>) {
        self.events.borrow_mut().push(CollectiveEvent {
            kind,
            group: group_key(group),
            root,
        });
    }
}

fn group_key(group: &CommGroup) -> u64 {
    let mut k = 0xcbf2_9ce4_8422_2325u64;
    for &m in group.members() {
        k ^= m as u64 + 1;
        k = k.wrapping_mul(0x1000_0000_01b3);
    }
    k
}

impl<T: Transport> Transport for TracingTransport<'_, T> {
    fn rank(&self) -> RankId {
        self.inner.rank()
    }

    fn world_size(&self) -> usize {
        self.inner.world_size()
    }

    fn send(&self, dest: RankId, tag: u64, payload: &[u8]) -> Result<()> {
        self.inner.send(dest, tag, payload)
    }

    fn recv(&self, source: RankId, tag: u64) -> Result<Vec<u8>> {
        self.inner.recv(source, tag)
    }

    fn broadcast(&self, group: &CommGroup, root: RankId, payload: &[u8]) -> Result<Vec<u8>> {
        self.log("broadcast", group, Some(root));
        self.inner.broadcast(group, root, payload)
    }

    fn allreduce_vec<S: Scalar>(
        &self,
        group: &CommGroup,
        op: ReduceOp,
        values: &[S],
    ) -> Result<Vec<S>> {
        self.log(
            match op {
                ReduceOp::Sum => "allreduce_sum",
                ReduceOp::Max => "allreduce_max",
            },
            group,
            None,
        );
        self.inner.allreduce_vec(group, op, values)
    }

    fn allreduce_maxabsloc<S: Scalar>(
        &self,
        group: &CommGroup,
        value: S,
        index: u64,
    ) -> Result<(S, u64)> {
        self.log("allreduce_maxabsloc", group, None);
        self.inner.allreduce_maxabsloc(group, value, index)
    }

    fn barrier(&self, group: &CommGroup) -> Result<()> {
        self.log("barrier", group, None);
        self.inner.barrier(group)
    }
}
