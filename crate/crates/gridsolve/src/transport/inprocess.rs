//! Reference transport: every rank is a thread inside one process.
//!
//! Messages go through per-destination mailboxes keyed by (source, tag), so
//! FIFO order holds per (source, dest, tag). Blocking receives carry a
//! deadline; when it expires the launch is treated as deadlocked and every
//! blocked rank fails with `CollectiveMisuse` instead of hanging.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::{Envelope, RankId, Transport};
use crate::error::{Error, Result};

/// Environment variable overriding the deadlock watchdog, in seconds.
pub const DEADLOCK_TIMEOUT_ENV: &str = "GRIDSOLVE_DEADLOCK_TIMEOUT_S";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct LaunchConfig {
    pub deadlock_timeout: Duration,
}

impl Default for LaunchConfig {
    fn default() -> Self {
        LaunchConfig {
            deadlock_timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl LaunchConfig {
    /// Default config with the `GRIDSOLVE_DEADLOCK_TIMEOUT_S` override applied.
    pub fn from_env() -> Self {
        let mut cfg = LaunchConfig::default();
        if let Ok(v) = std::env::var(DEADLOCK_TIMEOUT_ENV) {
            if let Ok(secs) = v.trim().parse::<f64>() {
                if secs > 0.0 {
                    cfg.deadlock_timeout = Duration::from_secs_f64(secs);
                }
            }
        }
        cfg
    }
}

struct Mailbox {
    queues: Mutex<HashMap<(RankId, u64), VecDeque<Envelope>>>,
    arrived: Condvar,
}

impl Mailbox {
    fn new() -> Self {
        Mailbox {
            queues: Mutex::new(HashMap::new()),
            arrived: Condvar::new(),
        }
    }
}

struct Core {
    mailboxes: Vec<Mailbox>,
    aborted: AtomicBool,
    timeout: Duration,
}

impl Core {
    fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        for mb in &self.mailboxes {
            // taking the lock orders the store before any waiter re-checks
            drop(mb.queues.lock().unwrap());
            mb.arrived.notify_all();
        }
    }
}

/// The transport handle owned by one rank for the duration of a launch.
pub struct RankHandle<'a> {
    rank: RankId,
    core: &'a Core,
}

impl Transport for RankHandle<'_> {
    fn rank(&self) -> RankId {
        self.rank
    }

    fn world_size(&self) -> usize {
        self.core.mailboxes.len()
    }

    fn send(&self, dest: RankId, tag: u64, payload: &[u8]) -> Result<()> {
        if dest == self.rank {
            return Err(Error::CollectiveMisuse(format!(
                "rank {dest} attempted to send to itself"
            )));
        }
        if dest >= self.world_size() {
            return Err(Error::CollectiveMisuse(format!(
                "send to rank {dest} outside world of {}",
                self.world_size()
            )));
        }
        let mb = &self.core.mailboxes[dest];
        let mut queues = mb.queues.lock().unwrap();
        queues.entry((self.rank, tag)).or_default().push_back(Envelope {
            source: self.rank,
            tag,
            payload: payload.to_vec(),
        });
        drop(queues);
        mb.arrived.notify_all();
        Ok(())
    }

    fn recv(&self, source: RankId, tag: u64) -> Result<Vec<u8>> {
        let mb = &self.core.mailboxes[self.rank];
        let deadline = Instant::now() + self.core.timeout;
        let mut queues = mb.queues.lock().unwrap();
        loop {
            if let Some(q) = queues.get_mut(&(source, tag)) {
                if let Some(envelope) = q.pop_front() {
                    debug_assert_eq!((envelope.source, envelope.tag), (source, tag));
                    return Ok(envelope.payload);
                }
            }
            if self.core.aborted.load(Ordering::SeqCst) {
                return Err(Error::CollectiveMisuse(
                    "launch aborted while waiting for a message".into(),
                ));
            }
            let now = Instant::now();
            if now >= deadline {
                // release our own mailbox before aborting: abort() locks
                // every mailbox to order the flag store against waiters
                drop(queues);
                self.core.abort();
                return Err(Error::CollectiveMisuse(format!(
                    "deadlock watchdog: rank {} waited {:?} for (source {source}, tag {tag})",
                    self.rank, self.core.timeout
                )));
            }
            let (guard, _) = mb.arrived.wait_timeout(queues, deadline - now).unwrap();
            queues = guard;
        }
    }
}

/// Runs `program` once per rank concurrently and returns the per-rank
/// results in rank order. A panic or error in any rank aborts the launch.
pub fn launch<R, F>(ranks: usize, program: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&RankHandle<'_>) -> Result<R> + Sync,
{
    launch_with_config(ranks, &LaunchConfig::from_env(), program)
}

pub fn launch_with_config<R, F>(ranks: usize, cfg: &LaunchConfig, program: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&RankHandle<'_>) -> Result<R> + Sync,
{
    if ranks == 0 {
        return Err(Error::InvalidInput("launch needs at least one rank".into()));
    }
    let core = Core {
        mailboxes: (0..ranks).map(|_| Mailbox::new()).collect(),
        aborted: AtomicBool::new(false),
        timeout: cfg.deadlock_timeout,
    };
    let program = &program;
    let core_ref = &core;
    let results: Vec<Result<R>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..ranks)
            .map(|rank| {
                scope.spawn(move || {
                    let handle = RankHandle { rank, core: core_ref };
                    let out = catch_unwind(AssertUnwindSafe(|| program(&handle)));
                    match out {
                        Ok(Ok(v)) => Ok(v),
                        Ok(Err(e)) => {
                            core_ref.abort();
                            Err(e)
                        }
                        Err(panic) => {
                            core_ref.abort();
                            let what = panic
                                .downcast_ref::<&str>()
                                .map(|s| s.to_string())
                                .or_else(|| panic.downcast_ref::<String>().cloned())
                                .unwrap_or_else(|| "opaque panic".into());
                            Err(Error::CollectiveMisuse(format!("rank {rank} panicked: {what}")))
                        }
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| match h.join() {
                Ok(r) => r,
                Err(_) => Err(Error::CollectiveMisuse("rank thread died".into())),
            })
            .collect()
    });

    let mut collected = Vec::with_capacity(ranks);
    let mut first_abort: Option<Error> = None;
    let mut root_cause: Option<Error> = None;
    for r in results {
        match r {
            Ok(v) => collected.push(v),
            Err(e) => {
                let is_abort = matches!(&e, Error::CollectiveMisuse(msg) if msg.contains("aborted"));
                if is_abort {
                    if first_abort.is_none() {
                        first_abort = Some(e);
                    }
                } else if root_cause.is_none() {
                    root_cause = Some(e);
                }
            }
        }
    }
    match root_cause.or(first_abort) {
        None => Ok(collected),
        Some(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::CommGroup;

    fn short() -> LaunchConfig {
        LaunchConfig {
            deadlock_timeout: Duration::from_millis(300),
        }
    }

    #[test]
    fn launch_returns_rank_ids_in_order() {
        let out = launch(1, |t| Ok(t.rank())).unwrap();
        assert_eq!(out, vec![0]);
        let out = launch(4, |t| Ok(t.rank())).unwrap();
        assert_eq!(out, vec![0, 1, 2, 3]);
    }

    #[test]
    fn send_recv_delivers_payload() {
        let out = launch(2, |t| {
            if t.rank() == 0 {
                t.send(1, 7, b"hi")?;
                Ok(Vec::new())
            } else {
                t.recv(0, 7)
            }
        })
        .unwrap();
        assert_eq!(out[1], b"hi");
    }

    #[test]
    fn fifo_per_source_dest_tag() {
        let out = launch(2, |t| {
            if t.rank() == 0 {
                t.send(1, 1, b"first")?;
                t.send(1, 1, b"second")?;
                Ok(Vec::new())
            } else {
                let a = t.recv(0, 1)?;
                let b = t.recv(0, 1)?;
                Ok([a, b].concat())
            }
        })
        .unwrap();
        assert_eq!(out[1], b"firstsecond");
    }

    #[test]
    fn tags_match_independently_of_arrival_order() {
        let out = launch(2, |t| {
            if t.rank() == 0 {
                t.send(1, 5, b"five")?;
                t.send(1, 6, b"six")?;
                Ok(Vec::new())
            } else {
                // receive in the opposite order of sending
                let six = t.recv(0, 6)?;
                let five = t.recv(0, 5)?;
                Ok([six, five].concat())
            }
        })
        .unwrap();
        assert_eq!(out[1], b"sixfive");
    }

    #[test]
    fn send_outside_world_is_misuse() {
        let err = launch(2, |t| {
            if t.rank() == 0 {
                t.send(5, 0, b"nowhere")?;
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMisuse(_)));
    }

    #[test]
    fn send_to_self_is_misuse() {
        let err = launch(2, |t| {
            if t.rank() == 0 {
                t.send(0, 0, b"loop")?;
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMisuse(_)));
    }

    #[test]
    fn recv_with_no_sender_times_out() {
        let err = launch_with_config(2, &short(), |t| {
            if t.rank() == 1 {
                t.recv(0, 99)?;
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMisuse(_)));
    }

    #[test]
    fn panic_aborts_launch() {
        let err = launch_with_config(2, &short(), |t| -> Result<()> {
            if t.rank() == 0 {
                panic!("boom");
            }
            t.recv(0, 0)?; // would deadlock without the abort
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMisuse(_)));
    }

    #[test]
    fn broadcast_distributes_root_payload() {
        let out = launch(4, |t| {
            let g = CommGroup::new(vec![0, 1, 2, 3], t.rank())?;
            t.broadcast(&g, 2, &[9])
        })
        .unwrap();
        assert!(out.iter().all(|p| p == &[9]));
    }

    #[test]
    fn consecutive_broadcasts_with_different_roots() {
        let out = launch(3, |t| {
            let g = CommGroup::new(vec![0, 1, 2], t.rank())?;
            let a = t.broadcast(&g, 0, &[t.rank() as u8])?;
            let b = t.broadcast(&g, 1, &[t.rank() as u8 + 10])?;
            Ok((a, b))
        })
        .unwrap();
        for (a, b) in out {
            assert_eq!(a, vec![0]);
            assert_eq!(b, vec![11]);
        }
    }

    #[test]
    fn allreduce_sum_of_ranks() {
        let out = launch(4, |t| {
            let g = CommGroup::new(vec![0, 1, 2, 3], t.rank())?;
            t.allreduce_scalar(&g, super::super::ReduceOp::Sum, t.rank() as f64)
        })
        .unwrap();
        assert!(out.iter().all(|&v| v == 6.0));
    }

    #[test]
    fn maxabsloc_picks_value_and_ties_by_index() {
        let out = launch(3, |t| {
            let g = CommGroup::new(vec![0, 1, 2], t.rank())?;
            let contributions = [3.0f64, 9.0, 1.0];
            let indices = [10u64, 11, 12];
            t.allreduce_maxabsloc(&g, contributions[t.rank()], indices[t.rank()])
        })
        .unwrap();
        assert!(out.iter().all(|&r| r == (9.0, 11)));

        let out = launch(2, |t| {
            let g = CommGroup::new(vec![0, 1], t.rank())?;
            let contributions = [-5.0f64, 5.0];
            t.allreduce_maxabsloc(&g, contributions[t.rank()], t.rank() as u64)
        })
        .unwrap();
        assert!(out.iter().all(|&r| r == (-5.0, 0)));
    }

    #[test]
    fn barrier_orders_timestamps() {
        let out = launch(4, |t| {
            let g = CommGroup::new(vec![0, 1, 2, 3], t.rank())?;
            if t.rank() == 2 {
                std::thread::sleep(Duration::from_millis(20));
            }
            let before = Instant::now();
            t.barrier(&g)?;
            let after = Instant::now();
            Ok((before, after))
        })
        .unwrap();
        let latest_before = out.iter().map(|(b, _)| *b).max().unwrap();
        for (_, after) in &out {
            assert!(*after >= latest_before);
        }
    }

    #[test]
    fn skipped_collective_detected_as_timeout() {
        let err = launch_with_config(3, &short(), |t| {
            let g = CommGroup::new(vec![0, 1, 2], t.rank())?;
            if t.rank() != 2 {
                t.barrier(&g)?; // rank 2 never joins
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::CollectiveMisuse(_)));
    }

    #[test]
    fn group_of_one_collectives_return_immediately() {
        let out = launch(2, |t| {
            let g = CommGroup::new(vec![t.rank()], t.rank())?;
            t.barrier(&g)?;
            let v = t.allreduce_scalar(&g, super::super::ReduceOp::Max, t.rank() as f64 + 0.5)?;
            let b = t.broadcast(&g, t.rank(), b"own")?;
            Ok((v, b))
        })
        .unwrap();
        assert_eq!(out[0].0, 0.5);
        assert_eq!(out[1].0, 1.5);
        assert!(out.iter().all(|(_, b)| b == b"own"));
    }

    /// Row-then-column nested barriers complete when all ranks use the same
    /// order.
    #[test]
    fn nested_group_barriers_complete() {
        let out = launch(4, |t| {
            let r = t.rank();
            let row = CommGroup::new(if r < 2 { vec![0, 1] } else { vec![2, 3] }, r)?;
            let col = CommGroup::new(if r % 2 == 0 { vec![0, 2] } else { vec![1, 3] }, r)?;
            for _ in 0..50 {
                t.barrier(&row)?;
                t.barrier(&col)?;
            }
            Ok(())
        });
        assert!(out.is_ok());
    }
}
