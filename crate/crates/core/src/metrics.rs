//! Speedup, efficiency and the size-steps-per-rank-time throughput metric.
//!
//! ```text
//! speedup    = t_serial / t_parallel
//! efficiency = speedup / np
//! ssspnt     = s · size · steps / (np · time),   s = 1e-7
//! ```

use std::cell::Cell;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::decomp::{DecompMode, Dims, GrowthType};
use crate::halo::Strategy;

/// Scale factor `s` of the throughput metric.
pub const SSSPNT_SCALE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("wall time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("rank count must be at least 1")]
    NoRanks,
}

fn check_time(t: f64) -> Result<(), MetricsError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::NonPositiveTime(t))
    }
}

/// `s · size · steps / (np · time)`.
pub fn ssspnt(size: f64, steps: f64, np: usize, time: f64, s: f64) -> Result<f64, MetricsError> {
    check_time(time)?;
    if np == 0 {
        return Err(MetricsError::NoRanks);
    }
    Ok(s * size * steps / (np as f64 * time))
}

/// `(t_serial / t_parallel, speedup / np)`.
pub fn speedup_efficiency(t_serial: f64, t_parallel: f64, np: usize) -> Result<(f64, f64), MetricsError> {
    check_time(t_serial)?;
    check_time(t_parallel)?;
    if np == 0 {
        return Err(MetricsError::NoRanks);
    }
    let speedup = t_serial / t_parallel;
    Ok((speedup, speedup / np as f64))
}

/// One benchmark point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub np: usize,
    pub mode: DecompMode,
    pub dims: Dims,
    pub strategy: Strategy,
    pub overlap: bool,
    pub growth: Option<GrowthType>,
    /// Global interior node count.
    pub size: u64,
    /// Timed iterations (warm-up excluded).
    pub steps: u64,
    /// Slowest rank's time over the timed iterations, in seconds.
    pub wall_time: f64,
    pub ssspnt: Option<f64>,
    pub speedup: Option<f64>,
    pub efficiency: Option<f64>,
    /// Halo bytes sent per iteration, summed over ranks.
    pub bytes_sent: u64,
    /// More ranks than schedulable cores.
    pub oversubscribed: bool,
}

impl RunRecord {
    /// Fills `ssspnt` from size, steps, np and wall time when they allow it.
    pub fn compute_ssspnt(&mut self) {
        self.ssspnt = if self.steps > 0 {
            ssspnt(self.size as f64, self.steps as f64, self.np, self.wall_time, SSSPNT_SCALE).ok()
        } else {
            None
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Fixed total size.
    Strong,
    /// Total size grows with np.
    Weak,
}

/// Records sharing one scaling protocol, ordered by np.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    pub scaling: Scaling,
    pub records: Vec<RunRecord>,
}

impl ScalingSeries {
    pub fn new(scaling: Scaling, mut records: Vec<RunRecord>) -> Self {
        records.sort_by_key(|r| r.np);
        ScalingSeries { scaling, records }
    }

    /// Speedup and efficiency relative to the np = 1 record, if present.
    ///
    /// Strong: `speedup = t1/tnp`, `efficiency = speedup/np`.
    /// Weak: `efficiency = t1/tnp`, `speedup = np · efficiency`.
    pub fn fill_relative(&mut self) {
        let Some(t1) = self.records.iter().find(|r| r.np == 1).map(|r| r.wall_time) else {
            return;
        };
        for r in &mut self.records {
            let Ok((s, e)) = speedup_efficiency(t1, r.wall_time, r.np) else { continue };
            match self.scaling {
                Scaling::Strong => {
                    r.speedup = Some(s);
                    r.efficiency = Some(e);
                }
                Scaling::Weak => {
                    r.efficiency = Some(s);
                    r.speedup = Some(s * r.np as f64);
                }
            }
        }
    }
}

thread_local! {
    static TIMING: Cell<bool> = const { Cell::new(false) };
    static IO_IN_TIMED: Cell<usize> = const { Cell::new(0) };
}

/// Marks an I/O operation. Returns `false` (and counts a violation on this
/// thread) if it happens while a [`Stopwatch`] is running here.
pub fn io_guard() -> bool {
    if TIMING.with(Cell::get) {
        IO_IN_TIMED.with(|c| c.set(c.get() + 1));
        false
    } else {
        true
    }
}

/// I/O operations observed inside timed regions on this thread.
pub fn io_violations() -> usize {
    IO_IN_TIMED.with(Cell::get)
}

/// Accumulating wall-clock timer that flags its thread as "timed" while running.
#[derive(Debug, Default)]
pub struct Stopwatch {
    elapsed: Duration,
    started: Option<Instant>,
}

impl Stopwatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start(&mut self) {
        if self.started.is_none() {
            self.started = Some(Instant::now());
            TIMING.with(|t| t.set(true));
        }
    }

    pub fn pause(&mut self) {
        if let Some(s) = self.started.take() {
            self.elapsed += s.elapsed();
            TIMING.with(|t| t.set(false));
        }
    }

    pub fn is_running(&self) -> bool {
        self.started.is_some()
    }

    pub fn elapsed(&self) -> Duration {
        self.elapsed + self.started.map_or(Duration::ZERO, |s| s.elapsed())
    }
}

impl Drop for Stopwatch {
    fn drop(&mut self) {
        self.pause();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssspnt_arithmetic() {
        assert_eq!(ssspnt(1e7, 10.0, 1, 10.0, SSSPNT_SCALE).unwrap(), 1.0);
        let a = ssspnt(1e7, 10.0, 2, 10.0, SSSPNT_SCALE).unwrap();
        assert_eq!(a, 0.5);
        assert!(ssspnt(1e7, 10.0, 1, 0.0, SSSPNT_SCALE).is_err());
        assert!(ssspnt(1e7, 10.0, 0, 1.0, SSSPNT_SCALE).is_err());
    }

    #[test]
    fn speedup_arithmetic() {
        assert_eq!(speedup_efficiency(3.0, 3.0, 1).unwrap(), (1.0, 1.0));
        assert_eq!(speedup_efficiency(10.0, 2.5, 8).unwrap(), (4.0, 0.5));
        assert!(speedup_efficiency(-1.0, 2.5, 8).is_err());
    }

    #[test]
    fn single_gpu_reference_row() {
        // 256³ nodes at an iteration rate chosen to give 93.8
        let size = 256f64.powi(3);
        let steps = 1000.0;
        let time = SSSPNT_SCALE * size * steps / 93.8;
        let v = ssspnt(size, steps, 1, time, SSSPNT_SCALE).unwrap();
        assert!((v - 93.8).abs() < 1e-12);
    }

    #[test]
    fn stopwatch_flags_io() {
        let before = io_violations();
        let mut sw = Stopwatch::new();
        assert!(io_guard());
        sw.start();
        assert!(!io_guard());
        sw.pause();
        assert!(io_guard());
        assert_eq!(io_violations(), before + 1);
    }
}
