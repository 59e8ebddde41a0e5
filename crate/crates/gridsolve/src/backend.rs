//! Compute-offload staging contract.
//!
//! Every kernel executes through a [`Backend`]. The `direct` backend runs the
//! kernel in place on host buffers. The `staged` backend simulates a device:
//! it allocates separate buffers, copies inputs host-to-device, executes the
//! kernel on the device copies, copies outputs back, and frees everything —
//! the full allocate / copy-in / launch / copy-out / cleanup flow — while a
//! [`TransferLog`] records each copy and allocation. Both backends produce
//! bitwise-identical outputs.

use crate::error::{Error, Result};
use crate::kernels::FlopCounter;
use crate::scalar::Scalar;

/// Which execution strategy a [`Backend`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Execute kernels in place on host memory; no transfers.
    Direct,
    /// Simulate device offload with explicit buffer copies.
    Staged,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Direct => "direct",
            BackendKind::Staged => "staged",
        }
    }
}

/// Device grid layout for a kernel launch.
///
/// The reference backends validate the layout but execute sequentially; a
/// real device backend would hand it to its launcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchLayout {
    pub blocks: usize,
    pub threads_per_block: usize,
}

impl LaunchLayout {
    pub const DEFAULT_THREADS_PER_BLOCK: usize = 256;

    /// Layout covering `elements` work items with the default block size.
    pub fn for_elements(elements: usize) -> Self {
        let tpb = Self::DEFAULT_THREADS_PER_BLOCK;
        LaunchLayout {
            blocks: elements.div_ceil(tpb).max(1),
            threads_per_block: tpb,
        }
    }

    pub fn covers(&self, elements: usize) -> bool {
        self.blocks >= 1
            && self.threads_per_block >= 1
            && self.blocks.saturating_mul(self.threads_per_block) >= elements
    }
}

/// Counts and byte totals of the copies and allocations a staged execution
/// performed. The direct backend leaves it empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferLog {
    pub h2d_copies: u64,
    pub h2d_bytes: u64,
    pub d2h_copies: u64,
    pub d2h_bytes: u64,
    pub device_allocs: u64,
    pub device_frees: u64,
}

impl TransferLog {
    pub fn is_empty(&self) -> bool {
        *self == TransferLog::default()
    }

    pub fn merge(&mut self, other: &TransferLog) {
        self.h2d_copies += other.h2d_copies;
        self.h2d_bytes += other.h2d_bytes;
        self.d2h_copies += other.d2h_copies;
        self.d2h_bytes += other.d2h_bytes;
        self.device_allocs += other.device_allocs;
        self.device_frees += other.device_frees;
    }
}

/// An output host buffer of a staged call.
///
/// `upload` marks a buffer whose current contents are also a kernel input
/// (e.g. `C` of a gemm with nonzero beta); it is then copied host-to-device
/// in addition to being copied back.
pub struct HostOut<'a, S> {
    pub data: &'a mut [S],
    pub upload: bool,
}

/// Execution context for kernels: backend choice, flop counter, and the
/// cumulative transfer log. One per rank; never shared.
#[derive(Debug)]
pub struct Backend {
    kind: BackendKind,
    flops: FlopCounter,
    transfers: TransferLog,
}

impl Backend {
    pub fn direct() -> Self {
        Backend::new(BackendKind::Direct)
    }

    pub fn staged() -> Self {
        Backend::new(BackendKind::Staged)
    }

    pub fn new(kind: BackendKind) -> Self {
        Backend {
            kind,
            flops: FlopCounter::new(),
            transfers: TransferLog::default(),
        }
    }

    /// Backend selection by name, as exposed on the command line.
    pub fn select(name: &str) -> Result<Self> {
        match name {
            "direct" => Ok(Backend::direct()),
            "staged" => Ok(Backend::staged()),
            other => Err(Error::InvalidInput(format!(
                "unknown backend `{other}` (expected `direct` or `staged`)"
            ))),
        }
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn flops(&self) -> u64 {
        self.flops.count()
    }

    pub fn add_flops(&mut self, n: u64) {
        self.flops.add(n);
    }

    pub fn reset_flops(&mut self) {
        self.flops.reset();
    }

    /// Cumulative transfer log over all staged executions on this backend.
    pub fn transfer_log(&self) -> &TransferLog {
        &self.transfers
    }

    pub fn reset_transfer_log(&mut self) {
        self.transfers = TransferLog::default();
    }

    /// Runs one kernel through the staging flow and returns the per-call
    /// transfer log (also merged into the cumulative log).
    ///
    /// `elements` is the kernel's output element count, validated against
    /// `layout`. `kernel` receives the input slices and output slices in the
    /// order given; under the staged backend those are device copies, under
    /// the direct backend the host buffers themselves.
    pub fn stage_execute<S: Scalar>(
        &mut self,
        layout: LaunchLayout,
        elements: usize,
        ins: &[&[S]],
        outs: &mut [HostOut<'_, S>],
        kernel: impl FnOnce(&[&[S]], &mut [&mut [S]]) -> Result<()>,
    ) -> Result<TransferLog> {
        if !layout.covers(elements) {
            return Err(Error::DimensionMismatch(format!(
                "launch layout {}x{} does not cover {elements} elements",
                layout.blocks, layout.threads_per_block
            )));
        }
        match self.kind {
            BackendKind::Direct => {
                let mut views: Vec<&mut [S]> = outs.iter_mut().map(|o| &mut *o.data).collect();
                kernel(ins, &mut views)?;
                Ok(TransferLog::default())
            }
            BackendKind::Staged => {
                let width = S::PRECISION.width() as u64;
                let mut delta = TransferLog::default();

                let device_ins: Vec<Vec<S>> = ins
                    .iter()
                    .map(|s| {
                        delta.device_allocs += 1;
                        delta.h2d_copies += 1;
                        delta.h2d_bytes += s.len() as u64 * width;
                        s.to_vec()
                    })
                    .collect();

                let mut device_outs: Vec<Vec<S>> = outs
                    .iter()
                    .map(|o| {
                        delta.device_allocs += 1;
                        if o.upload {
                            delta.h2d_copies += 1;
                            delta.h2d_bytes += o.data.len() as u64 * width;
                            o.data.to_vec()
                        } else {
                            vec![S::ZERO; o.data.len()]
                        }
                    })
                    .collect();

                let in_views: Vec<&[S]> = device_ins.iter().map(|v| v.as_slice()).collect();
                let mut out_views: Vec<&mut [S]> =
                    device_outs.iter_mut().map(|v| v.as_mut_slice()).collect();
                let run = kernel(&in_views, &mut out_views);

                if run.is_ok() {
                    for (host, dev) in outs.iter_mut().zip(device_outs.iter()) {
                        delta.d2h_copies += 1;
                        delta.d2h_bytes += dev.len() as u64 * width;
                        host.data.copy_from_slice(dev);
                    }
                }
                // device buffers released on both success and error paths
                delta.device_frees += delta.device_allocs;
                self.transfers.merge(&delta);
                run.map(|()| delta).inspect_err(|_| {})
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_by_name() {
        assert_eq!(Backend::select("direct").unwrap().kind(), BackendKind::Direct);
        assert_eq!(Backend::select("staged").unwrap().kind(), BackendKind::Staged);
        assert!(Backend::select("cuda").is_err());
    }

    #[test]
    fn layout_coverage() {
        let l = LaunchLayout::for_elements(1000);
        assert!(l.covers(1000));
        assert_eq!(l.blocks, 4);
        assert!(LaunchLayout::for_elements(0).covers(0));
        let bad = LaunchLayout {
            blocks: 1,
            threads_per_block: 8,
        };
        assert!(!bad.covers(9));
    }

    #[test]
    fn staged_counts_and_frees() {
        let mut be = Backend::staged();
        let x = [1.0f64, 2.0];
        let mut y = [3.0f64, 4.0];
        let log = be
            .stage_execute(
                LaunchLayout::for_elements(2),
                2,
                &[&x],
                &mut [HostOut {
                    data: &mut y,
                    upload: true,
                }],
                |ins, outs| {
                    for (o, i) in outs[0].iter_mut().zip(ins[0]) {
                        *o += i;
                    }
                    Ok(())
                },
            )
            .unwrap();
        assert_eq!(y, [4.0, 6.0]);
        assert_eq!(log.h2d_copies, 2);
        assert_eq!(log.d2h_copies, 1);
        assert_eq!(log.device_allocs, log.device_frees);
        assert_eq!(log.h2d_bytes, 32);
    }

    #[test]
    fn error_path_frees_buffers() {
        let mut be = Backend::staged();
        let mut y = [0.0f64; 4];
        let err = be.stage_execute(
            LaunchLayout::for_elements(4),
            4,
            &[],
            &mut [HostOut {
                data: &mut y,
                upload: false,
            }],
            |_, _| -> Result<()> { Err(Error::SingularPivot { col: 0 }) },
        );
        assert!(err.is_err());
        let log = be.transfer_log();
        assert_eq!(log.device_allocs, log.device_frees);
        assert_eq!(log.d2h_copies, 0);
    }

    #[test]
    fn direct_leaves_log_empty() {
        let mut be = Backend::direct();
        let mut y = [0.0f64; 2];
        be.stage_execute(
            LaunchLayout::for_elements(2),
            2,
            &[],
            &mut [HostOut {
                data: &mut y,
                upload: false,
            }],
            |_, outs| {
                outs[0][0] = 5.0;
                Ok(())
            },
        )
        .unwrap();
        assert!(be.transfer_log().is_empty());
        assert_eq!(y[0], 5.0);
    }
}
