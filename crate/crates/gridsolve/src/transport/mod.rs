//! Message-passing contract between ranks.
//!
//! [`Transport`] is the conformance interface a real network transport would
//! implement; [`inprocess::launch`] provides the reference implementation
//! that runs every rank as a thread inside one process. Collectives are
//! provided as default methods built on send/recv with a fixed reduction
//! order (ascending member index, sequential fold), so floating-point
//! reductions are bitwise reproducible run to run.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub mod inprocess;
pub mod tracing;
pub mod wire;

pub use inprocess::{launch, launch_with_config, LaunchConfig, RankHandle};
pub use tracing::TracingTransport;

/// Identity of one rank within a launch, in `[0, world_size)`.
pub type RankId = usize;

/// Tag reserved for collective-internal traffic.
pub const COLLECTIVE_TAG: u64 = u64::MAX;

/// A delivered point-to-point message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub source: RankId,
    pub tag: u64,
    pub payload: Vec<u8>,
}

/// Reduction operator for [`Transport::allreduce_scalar`] and
/// [`Transport::allreduce_vec`]. The pivot-search reduction lives in
/// [`Transport::allreduce_maxabsloc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
}

impl ReduceOp {
    fn code(self) -> u8 {
        match self {
            ReduceOp::Sum => 1,
            ReduceOp::Max => 2,
        }
    }
}

const OP_BCAST: u8 = 10;
const OP_MAXABSLOC: u8 = 3;
const OP_BARRIER: u8 = 4;

/// An ordered set of ranks over which collectives are defined. Every member
/// must hold an identical member list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGroup {
    members: Vec<RankId>,
    my_index: usize,
    fingerprint: u64,
}

impl CommGroup {
    pub fn new(members: Vec<RankId>, my_rank: RankId) -> Result<Self> {
        let my_index = members.iter().position(|&r| r == my_rank).ok_or_else(|| {
            Error::CollectiveMisuse(format!("rank {my_rank} is not a member of {members:?}"))
        })?;
        let mut fingerprint = 0xcbf2_9ce4_8422_2325u64;
        for &m in &members {
            fingerprint ^= m as u64;
            fingerprint = fingerprint.wrapping_mul(0x1000_0000_01b3);
        }
        Ok(CommGroup {
            members,
            my_index,
            fingerprint,
        })
    }

    pub fn members(&self) -> &[RankId] {
        &self.members
    }

    pub fn my_index(&self) -> usize {
        self.my_index
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn header(&self, op: u8, root: RankId) -> Vec<u8> {
        let mut h = Vec::with_capacity(17);
        h.push(op);
        h.extend_from_slice(&self.fingerprint.to_le_bytes());
        h.extend_from_slice(&(root as u64).to_le_bytes());
        h
    }

    fn check_header(&self, msg: &[u8], op: u8, root: RankId) -> Result<()> {
        if msg.len() < 17 {
            return Err(Error::CollectiveMisuse("truncated collective header".into()));
        }
        let got_op = msg[0];
        let got_fp = u64::from_le_bytes(msg[1..9].try_into().unwrap());
        let got_root = u64::from_le_bytes(msg[9..17].try_into().unwrap());
        if got_op != op {
            return Err(Error::CollectiveMisuse(format!(
                "collective op mismatch: expected {op}, peer sent {got_op}"
            )));
        }
        if got_fp != self.fingerprint {
            return Err(Error::CollectiveMisuse("collective group mismatch".into()));
        }
        if got_root != root as u64 {
            return Err(Error::CollectiveMisuse(format!(
                "collective root mismatch: expected {root}, peer used {got_root}"
            )));
        }
        Ok(())
    }
}

/// The message-passing operations available to one rank. A handle is usable
/// only by its owning rank; all cross-rank effects flow through it.
pub trait Transport {
    fn rank(&self) -> RankId;
    fn world_size(&self) -> usize;

    /// Enqueues `payload` for `dest`. Buffered: never blocks on the
    /// receiver. FIFO order holds per (source, dest, tag).
    fn send(&self, dest: RankId, tag: u64, payload: &[u8]) -> Result<()>;

    /// Blocks until a message with matching (source, tag) arrives.
    fn recv(&self, source: RankId, tag: u64) -> Result<Vec<u8>>;

    /// Every member returns the root's payload. Collective.
    fn broadcast(&self, group: &CommGroup, root: RankId, payload: &[u8]) -> Result<Vec<u8>> {
        if !group.members.contains(&root) {
            return Err(Error::CollectiveMisuse(format!(
                "broadcast root {root} not in group"
            )));
        }
        if group.len() == 1 {
            return Ok(payload.to_vec());
        }
        let me = self.rank();
        if me == root {
            let mut msg = group.header(OP_BCAST, root);
            msg.extend_from_slice(payload);
            for &m in &group.members {
                if m != me {
                    self.send(m, COLLECTIVE_TAG, &msg)?;
                }
            }
            Ok(payload.to_vec())
        } else {
            let msg = self.recv(root, COLLECTIVE_TAG)?;
            group.check_header(&msg, OP_BCAST, root)?;
            Ok(msg[17..].to_vec())
        }
    }

    /// Combines one scalar per member; every member receives the identical
    /// result, reduced in ascending member order.
    fn allreduce_scalar<S: Scalar>(&self, group: &CommGroup, op: ReduceOp, value: S) -> Result<S>
    where
        Self: Sized,
    {
        let combined = self.allreduce_vec(group, op, &[value])?;
        Ok(combined[0])
    }

    /// Elementwise reduction of equal-length vectors, deterministic fold
    /// order. Used for the distributed partial-sum reductions.
    fn allreduce_vec<S: Scalar>(
        &self,
        group: &CommGroup,
        op: ReduceOp,
        values: &[S],
    ) -> Result<Vec<S>>
    where
        Self: Sized,
    {
        if group.len() == 1 {
            return Ok(values.to_vec());
        }
        let me = self.rank();
        let leader = group.members[0];
        if me == leader {
            let mut acc: Vec<S> = values.to_vec();
            for &m in &group.members[1..] {
                let msg = self.recv(m, COLLECTIVE_TAG)?;
                group.check_header(&msg, op.code(), leader)?;
                let contrib = wire::decode_scalars::<S>(&msg[17..])?;
                if contrib.len() != acc.len() {
                    return Err(Error::CollectiveMisuse(format!(
                        "allreduce length mismatch: {} vs {}",
                        contrib.len(),
                        acc.len()
                    )));
                }
                for (a, c) in acc.iter_mut().zip(contrib) {
                    match op {
                        ReduceOp::Sum => *a += c,
                        ReduceOp::Max => {
                            if c > *a {
                                *a = c;
                            }
                        }
                    }
                }
            }
            let mut msg = group.header(op.code(), leader);
            wire::encode_scalars(&acc, &mut msg);
            for &m in &group.members[1..] {
                self.send(m, COLLECTIVE_TAG, &msg)?;
            }
            Ok(acc)
        } else {
            let mut msg = group.header(op.code(), leader);
            wire::encode_scalars(values, &mut msg);
            self.send(leader, COLLECTIVE_TAG, &msg)?;
            let reply = self.recv(leader, COLLECTIVE_TAG)?;
            group.check_header(&reply, op.code(), leader)?;
            wire::decode_scalars::<S>(&reply[17..])
        }
    }

    /// Returns the (value, index) whose |value| is maximal across members,
    /// ties broken by smallest index. Implements the cross-rank pivot search.
    fn allreduce_maxabsloc<S: Scalar>(
        &self,
        group: &CommGroup,
        value: S,
        index: u64,
    ) -> Result<(S, u64)>
    where
        Self: Sized,
    {
        if group.len() == 1 {
            return Ok((value, index));
        }
        let me = self.rank();
        let leader = group.members[0];
        let encode = |v: S, i: u64, out: &mut Vec<u8>| {
            v.write_le(out);
            out.extend_from_slice(&i.to_le_bytes());
        };
        let width = S::PRECISION.width();
        let decode = |bytes: &[u8]| -> Result<(S, u64)> {
            if bytes.len() != width + 8 {
                return Err(Error::CollectiveMisuse("bad maxabsloc payload".into()));
            }
            let v = S::read_le(&bytes[..width]);
            let i = u64::from_le_bytes(bytes[width..].try_into().unwrap());
            Ok((v, i))
        };
        if me == leader {
            let (mut bv, mut bi) = (value, index);
            for &m in &group.members[1..] {
                let msg = self.recv(m, COLLECTIVE_TAG)?;
                group.check_header(&msg, OP_MAXABSLOC, leader)?;
                let (v, i) = decode(&msg[17..])?;
                if v.abs() > bv.abs() || (v.abs() == bv.abs() && i < bi) {
                    bv = v;
                    bi = i;
                }
            }
            let mut msg = group.header(OP_MAXABSLOC, leader);
            encode(bv, bi, &mut msg);
            for &m in &group.members[1..] {
                self.send(m, COLLECTIVE_TAG, &msg)?;
            }
            Ok((bv, bi))
        } else {
            let mut msg = group.header(OP_MAXABSLOC, leader);
            encode(value, index, &mut msg);
            self.send(leader, COLLECTIVE_TAG, &msg)?;
            let reply = self.recv(leader, COLLECTIVE_TAG)?;
            group.check_header(&reply, OP_MAXABSLOC, leader)?;
            decode(&reply[17..])
        }
    }

    /// No member returns before all have entered.
    fn barrier(&self, group: &CommGroup) -> Result<()> {
        if group.len() == 1 {
            return Ok(());
        }
        let me = self.rank();
        let leader = group.members[0];
        let msg = group.header(OP_BARRIER, leader);
        if me == leader {
            for &m in &group.members[1..] {
                let got = self.recv(m, COLLECTIVE_TAG)?;
                group.check_header(&got, OP_BARRIER, leader)?;
            }
            for &m in &group.members[1..] {
                self.send(m, COLLECTIVE_TAG, &msg)?;
            }
        } else {
            self.send(leader, COLLECTIVE_TAG, &msg)?;
            let got = self.recv(leader, COLLECTIVE_TAG)?;
            group.check_header(&got, OP_BARRIER, leader)?;
        }
        Ok(())
    }
}
