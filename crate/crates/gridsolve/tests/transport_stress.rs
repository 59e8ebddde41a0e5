//! Randomized-schedule stress of the in-process transport: point-to-point
//! and collective traffic under jittered timing, checked for misdelivery
//! and for bitwise-reproducible reductions.

use std::time::Duration;

use gridsolve::rng::SplitMix64;
use gridsolve::transport::{
    launch, launch_with_config, CommGroup, LaunchConfig, RankId, ReduceOp, Transport,
};

/// One full mixed-traffic round per iteration on every rank; returns the
/// reduction results so runs can be compared bitwise.
fn stress_round<T: Transport>(
    t: &T,
    world: &CommGroup,
    iter: u64,
    jitter_salt: u64,
) -> gridsolve::Result<(f64, f64, (f64, u64))> {
    let ranks = t.world_size();
    let me = t.rank();
    let mut jitter = SplitMix64::new(jitter_salt ^ (iter << 8) ^ me as u64);
    if jitter.next_range(3) == 0 {
        std::thread::sleep(Duration::from_micros(jitter.next_range(40) as u64));
    }

    // ring exchange with content checks: payload encodes (source, iter)
    let dest = (me + 1 + (iter as usize % (ranks - 1))) % ranks;
    let source = (me + ranks - 1 - (iter as usize % (ranks - 1))) % ranks;
    let tag = iter % 5;
    let mut payload = Vec::new();
    payload.extend_from_slice(&(me as u64).to_le_bytes());
    payload.extend_from_slice(&iter.to_le_bytes());
    t.send(dest, tag, &payload)?;
    let got = t.recv(source, tag)?;
    let got_src = u64::from_le_bytes(got[0..8].try_into().unwrap()) as RankId;
    let got_iter = u64::from_le_bytes(got[8..16].try_into().unwrap());
    assert_eq!(got_src, source, "misdelivered message");
    assert_eq!(got_iter, iter, "stale message matched");

    // deterministic-value collectives under the schedule noise
    let mut values = SplitMix64::new(1000 + iter * 31 + me as u64);
    let mine = values.next_f64() * 2.0 - 1.0;
    let sum = t.allreduce_scalar(world, ReduceOp::Sum, mine)?;
    let max = t.allreduce_scalar(world, ReduceOp::Max, mine)?;
    let loc = t.allreduce_maxabsloc(world, mine, me as u64)?;
    let payload = t.broadcast(world, (iter % ranks as u64) as RankId, &iter.to_le_bytes())?;
    assert_eq!(u64::from_le_bytes(payload.try_into().unwrap()), iter);
    if iter % 7 == 0 {
        t.barrier(world)?;
    }
    Ok((sum, max, loc))
}

fn run_stress(ranks: usize, iters: u64, jitter_salt: u64) -> Vec<Vec<(f64, f64, (f64, u64))>> {
    launch(ranks, |t| {
        let world = CommGroup::new((0..ranks).collect(), t.rank())?;
        let mut results = Vec::with_capacity(iters as usize);
        for iter in 0..iters {
            results.push(stress_round(t, &world, iter, jitter_salt)?);
        }
        Ok(results)
    })
    .unwrap()
}

#[test]
fn randomized_schedule_stress_is_reproducible() {
    let ranks = 8;
    let iters = 200; // the acceptance suite runs the full 1000
    let run1 = run_stress(ranks, iters, 0xAAAA);
    let run2 = run_stress(ranks, iters, 0x5555); // different timing jitter
    for rank in 0..ranks {
        for i in 0..iters as usize {
            let (s1, m1, l1) = run1[rank][i];
            let (s2, m2, l2) = run2[rank][i];
            assert_eq!(s1.to_bits(), s2.to_bits(), "sum differs at rank {rank} iter {i}");
            assert_eq!(m1.to_bits(), m2.to_bits());
            assert_eq!(l1.0.to_bits(), l2.0.to_bits());
            assert_eq!(l1.1, l2.1);
        }
    }
    // every rank agrees within one run as well
    for i in 0..iters as usize {
        for rank in 1..ranks {
            assert_eq!(run1[rank][i].0.to_bits(), run1[0][i].0.to_bits());
        }
    }
}

#[test]
fn collective_op_mismatch_is_detected() {
    let err = launch_with_config(
        2,
        &LaunchConfig {
            deadlock_timeout: Duration::from_millis(400),
        },
        |t| {
            let g = CommGroup::new(vec![0, 1], t.rank())?;
            if t.rank() == 0 {
                t.allreduce_scalar(&g, ReduceOp::Sum, 1.0f64)?;
            } else {
                t.allreduce_scalar(&g, ReduceOp::Max, 1.0f64)?;
            }
            Ok(())
        },
    )
    .unwrap_err();
    assert_eq!(err.kind(), gridsolve::ErrorKind::CollectiveMisuse);
}
