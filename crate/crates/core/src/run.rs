//! Drives one rank worker per block to completion on in-process transport.
//!
//! Per iteration every rank does, in order:
//!
//! 1. wall ghosts from the boundary conditions,
//! 2. inter-block ghosts from the exchange (optionally overlapped with the
//!    internal-region residual),
//! 3. the residual and its global norms (exact, so rank-count independent),
//! 4. the convergence test, which ends the run *before* stepping,
//! 5. the global time step (min-reduction) and a forward Euler update,
//! 6. pressure re-pinning to the cavity centre value.
//!
//! Every step is a pure function of the ghosted block state, so the interior
//! evolves bitwise identically for any decomposition or strategy.

use std::thread;

use thiserror::Error;

use crate::decomp::{BlockMap, DecompError, Dims, NeighborTable};
use crate::halo::{
    build_plan, center_pressure_broadcast, compute_overlap_regions, ByteLedger, ExchangeError, ExchangeFault,
    Exchanger, Strategy,
};
use crate::mesh::{interior_box, FieldSet, Grid3, MeshError, Var, GHOST};
use crate::metrics::{io_guard, io_violations, Stopwatch};
use crate::scalar::Real;
use crate::solver::{
    apply_boundary_conditions, compute_dt, compute_residual, compute_residual_region, euler_step,
    residual_norm, rescale_pressure, ConvergenceMonitor, FluidParams, NormAccumulator, ResidualNorms,
    SolverConfig, SolverError,
};
use crate::transport::{world, InProcessTransport, Transport, TransportError, TransportOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("initial state has grid {found:?}, run expects {expected:?}")]
    InitialGrid { expected: [usize; 3], found: [usize; 3] },
    #[error("rank {0} panicked")]
    Panicked(usize),
}

/// Starting state of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState<T> {
    /// Fluid at rest, zero pressure, temperature at the reference value.
    Rest,
    /// Global interior values; ghosts are ignored.
    Global(Box<FieldSet<T>>),
}

/// Everything that defines one run.
#[derive(Debug, Clone)]
pub struct RunSpec<T> {
    /// Global interior nodes per axis.
    pub n: [usize; 3],
    pub dims: Dims,
    pub strategy: Strategy,
    pub overlap: bool,
    pub params: FluidParams<T>,
    pub config: SolverConfig,
    pub transport: TransportOptions,
    pub initial: InitialState<T>,
    /// Leave the first iteration out of the timing.
    pub warmup: bool,
    /// Rank 0 prints the norms every this many iterations, outside the timer.
    pub progress: Option<usize>,
    /// Corrupts the exchange on one rank.
    pub fault: Option<(usize, ExchangeFault)>,
}

impl<T: Real> RunSpec<T> {
    /// Cavity defaults on an `n` grid with a single rank.
    pub fn new(n: [usize; 3]) -> Self {
        RunSpec {
            n,
            dims: Dims([1, 1, 1]),
            strategy: Strategy::V3,
            overlap: false,
            params: FluidParams::cavity(),
            config: SolverConfig::default(),
            transport: TransportOptions::default(),
            initial: InitialState::Rest,
            warmup: true,
            progress: None,
            fault: None,
        }
    }

    pub fn global_grid(&self) -> Result<Grid3<T>, MeshError> {
        Grid3::new(self.n, [self.params.length; 3])
    }
}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    /// Gathered global state; wall ghosts filled, interior as computed.
    pub fields: FieldSet<T>,
    /// Global norms, one entry per residual evaluation.
    pub history: Vec<ResidualNorms>,
    /// Global time step of each Euler update.
    pub dts: Vec<f64>,
    /// Euler updates performed.
    pub steps: usize,
    pub converged: bool,
    /// Slowest rank's wall time over the timed iterations (s).
    pub wall_time: f64,
    /// Iterations inside the timer.
    pub timed_steps: usize,
    /// Traffic summed over ranks.
    pub ledger: ByteLedger,
    /// I/O operations observed inside timed regions, summed over ranks.
    pub io_violations: usize,
}

impl<T> RunOutcome<T> {
    /// Halo bytes sent per exchange, summed over ranks.
    pub fn bytes_per_iteration(&self) -> u64 {
        self.ledger.bytes() / self.ledger.exchanges.max(1)
    }
}

struct RankResult<T> {
    fields: FieldSet<T>,
    history: Vec<ResidualNorms>,
    dts: Vec<f64>,
    steps: usize,
    converged: bool,
    wall_time: f64,
    timed_steps: usize,
    ledger: ByteLedger,
    io_violations: usize,
}

/// Runs `spec` with one thread per rank of `spec.dims`.
pub fn run<T: Real>(spec: &RunSpec<T>) -> Result<RunOutcome<T>, RunError> {
    spec.params.validate()?;
    spec.config.validate()?;
    let map = BlockMap::new(spec.global_grid()?, spec.dims)?;
    let global = initial_global(spec, &map.global)?;
    let locals = (0..map.ranks()).map(|r| scatter(&global, &map, r)).collect::<Result<Vec<_>, _>>()?;
    let endpoints = world(map.ranks(), spec.transport);

    let results: Vec<Result<RankResult<T>, RunError>> = thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .zip(locals)
            .map(|(mut tr, fields)| {
                let map = &map;
                s.spawn(move || {
                    let out = rank_main(spec, map, fields, &mut tr);
                    if out.is_err() {
                        tr.abort_all();
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(r, h)| h.join().unwrap_or(Err(RunError::Panicked(r))))
            .collect()
    });

    let is_abort = |e: &RunError| {
        matches!(
            e,
            RunError::Transport(TransportError::Aborted { .. })
                | RunError::Exchange(ExchangeError::Transport(TransportError::Aborted { .. }))
        )
    };
    let mut oks = Vec::with_capacity(results.len());
    let mut errs = Vec::new();
    for r in results {
        match r {
            Ok(v) => oks.push(v),
            Err(e) => errs.push(e),
        }
    }
    // ranks that only saw the abort report a consequence, not the cause
    if let Some(i) = errs.iter().position(|e| !is_abort(e)) {
        return Err(errs.swap_remove(i));
    }
    if let Some(e) = errs.into_iter().next() {
        return Err(e);
    }

    let mut fields = FieldSet::new(map.global);
    let mut ledger = ByteLedger::default();
    let mut wall_time = 0f64;
    let mut io = 0;
    for (rank, r) in oks.iter().enumerate() {
        gather(&r.fields, &map, rank, &mut fields);
        ledger.merge(&r.ledger);
        wall_time = wall_time.max(r.wall_time);
        io += r.io_violations;
    }
    apply_boundary_conditions(&mut fields, &NeighborTable::all_walls(), &spec.params);
    let first = oks.swap_remove(0);
    Ok(RunOutcome {
        fields,
        history: first.history,
        dts: first.dts,
        steps: first.steps,
        converged: first.converged,
        wall_time,
        timed_steps: first.timed_steps,
        ledger,
        io_violations: io,
    })
}

fn rank_main<T: Real>(
    spec: &RunSpec<T>,
    map: &BlockMap<T>,
    mut fields: FieldSet<T>,
    tr: &mut InProcessTransport,
) -> Result<RankResult<T>, RunError> {
    let rank = tr.rank();
    let table = map.tables[rank];
    let plan = build_plan(&map.extents[rank], &table, spec.strategy);
    let n = plan.n;
    let mut exchanger = Exchanger::new(plan);
    if let Some((r, f)) = spec.fault {
        if r == rank {
            exchanger.set_fault(Some(f));
        }
    }
    let regions = compute_overlap_regions(n, &table);
    let interior = interior_box(n);
    let mut res = FieldSet::new(*fields.grid());
    let mut monitor = ConvergenceMonitor::default();
    let mut history = Vec::new();
    let mut dts = Vec::new();
    let mut sw = Stopwatch::new();
    let mut timed_steps = 0;
    let mut steps = 0;
    let mut converged = false;
    let io_before = io_violations();
    let cfl = T::lit(spec.config.cfl);
    let multi = tr.size() > 1;

    for it in 0..spec.config.max_steps {
        let timed = !(spec.warmup && it == 0);
        if timed {
            sw.start();
        }

        apply_boundary_conditions(&mut fields, &table, &spec.params);
        if spec.overlap {
            exchanger.begin(&fields, tr)?;
            compute_residual_region(&fields, &spec.params, &regions.internal, &mut res);
            exchanger.finish(&mut fields, tr)?;
            for b in &regions.external {
                compute_residual_region(&fields, &spec.params, b, &mut res);
            }
        } else {
            exchanger.exchange(&mut fields, tr)?;
            compute_residual(&fields, &spec.params, &mut res);
        }

        let norms = if multi {
            let mut acc = NormAccumulator::default();
            acc.add_region(&res, &interior);
            tr.allreduce_fixed_order(acc, |mut a, b| {
                a.merge(&b);
                a
            })?
            .finish(it)
        } else {
            residual_norm(&res, it)
        };
        history.push(norms);
        if !norms.is_finite() {
            return Err(SolverError::Diverged { iteration: it }.into());
        }
        let rel = monitor.observe(&norms);

        if ConvergenceMonitor::converged(&rel, spec.config.conv_tol) && it > 0 {
            converged = true;
        } else {
            let local_dt = match compute_dt(&fields, &spec.params, cfl) {
                Ok(dt) => dt,
                Err(_) => return Err(SolverError::Diverged { iteration: it }.into()),
            };
            let dt = if multi { tr.allreduce_fixed_order(local_dt, T::min)? } else { local_dt };
            euler_step(&mut fields, &res, dt);
            if spec.config.rescale_pressure {
                let pc = center_pressure_broadcast(&fields, map, tr)?;
                rescale_pressure(&mut fields, pc);
            }
            dts.push(dt.as_f64());
            steps += 1;
        }

        if timed {
            sw.pause();
            timed_steps += 1;
        }
        if let Some(every) = spec.progress {
            if rank == 0 && every > 0 && it % every == 0 && io_guard() {
                eprintln!(
                    "iter {it:>7}  p {:.3e}  u {:.3e}  v {:.3e}  w {:.3e}  T {:.3e}",
                    rel[0], rel[1], rel[2], rel[3], rel[4]
                );
            }
        }
        if converged {
            break;
        }
    }

    Ok(RankResult {
        fields,
        history,
        dts,
        steps,
        converged,
        wall_time: sw.elapsed().as_secs_f64(),
        timed_steps,
        ledger: *exchanger.ledger(),
        io_violations: io_violations() - io_before,
    })
}

/// Single-block reference: the same iteration with no decomposition,
/// transport or exchange.
pub fn run_serial<T: Real>(spec: &RunSpec<T>) -> Result<RunOutcome<T>, RunError> {
    spec.params.validate()?;
    spec.config.validate()?;
    let grid = spec.global_grid()?;
    let mut fields = initial_global(spec, &grid)?;
    let walls = NeighborTable::all_walls();
    let mut res = FieldSet::new(grid);
    let mut monitor = ConvergenceMonitor::default();
    let (mut history, mut dts) = (Vec::new(), Vec::new());
    let center = grid.n().map(|m| (m - 1) / 2 + GHOST);
    let mut converged = false;
    let mut sw = Stopwatch::new();
    let mut timed_steps = 0;
    for it in 0..spec.config.max_steps {
        let timed = !(spec.warmup && it == 0);
        if timed {
            sw.start();
        }
        apply_boundary_conditions(&mut fields, &walls, &spec.params);
        compute_residual(&fields, &spec.params, &mut res);
        let norms = residual_norm(&res, it);
        history.push(norms);
        if !norms.is_finite() {
            return Err(SolverError::Diverged { iteration: it }.into());
        }
        let rel = monitor.observe(&norms);
        if ConvergenceMonitor::converged(&rel, spec.config.conv_tol) && it > 0 {
            converged = true;
        } else {
            let dt = compute_dt(&fields, &spec.params, T::lit(spec.config.cfl))
                .map_err(|_| SolverError::Diverged { iteration: it })?;
            euler_step(&mut fields, &res, dt);
            if spec.config.rescale_pressure {
                let pc = fields[Var::P].get(center[0], center[1], center[2]);
                rescale_pressure(&mut fields, pc);
            }
            dts.push(dt.as_f64());
        }
        if timed {
            sw.pause();
            timed_steps += 1;
        }
        if converged {
            break;
        }
    }
    apply_boundary_conditions(&mut fields, &walls, &spec.params);
    Ok(RunOutcome {
        fields,
        steps: dts.len(),
        history,
        dts,
        converged,
        wall_time: sw.elapsed().as_secs_f64(),
        timed_steps,
        ledger: ByteLedger::default(),
        io_violations: 0,
    })
}

fn initial_global<T: Real>(spec: &RunSpec<T>, grid: &Grid3<T>) -> Result<FieldSet<T>, RunError> {
    match &spec.initial {
        InitialState::Rest => {
            let mut f = FieldSet::new(*grid);
            f[Var::T].fill(spec.params.t_inf);
            Ok(f)
        }
        InitialState::Global(g) => {
            if g.grid().n() != grid.n() {
                return Err(RunError::InitialGrid { expected: grid.n(), found: g.grid().n() });
            }
            let mut f = FieldSet::new(*grid);
            for var in Var::ALL {
                let (src, dst) = (&g[var], &mut f[var]);
                interior_box(grid.n()).for_each(|i, j, k| dst.set(i, j, k, src.get(i, j, k)));
            }
            Ok(f)
        }
    }
}

/// Interior of rank `rank`'s block, cut from a global state.
pub fn scatter<T: Real>(global: &FieldSet<T>, map: &BlockMap<T>, rank: usize) -> Result<FieldSet<T>, RunError> {
    let mut local = FieldSet::new(map.local_grid(rank)?);
    let s = map.extents[rank].start;
    let n = local.grid().n();
    for var in Var::ALL {
        let (src, dst) = (&global[var], &mut local[var]);
        interior_box(n).for_each(|i, j, k| dst.set(i, j, k, src.get(i + s[0], j + s[1], k + s[2])));
    }
    Ok(local)
}

/// Copies rank `rank`'s interior into the global state.
pub fn gather<T: Real>(local: &FieldSet<T>, map: &BlockMap<T>, rank: usize, global: &mut FieldSet<T>) {
    let s = map.extents[rank].start;
    for var in Var::ALL {
        let (src, dst) = (&local[var], &mut global[var]);
        interior_box(local.grid().n()).for_each(|i, j, k| dst.set(i + s[0], j + s[1], k + s[2], src.get(i, j, k)));
    }
}

/// Largest interior difference per variable, in [`Var`] order. NaN anywhere
/// yields NaN.
pub fn interior_max_abs_diff<T: Real>(a: &FieldSet<T>, b: &FieldSet<T>) -> [f64; 5] {
    assert_eq!(a.grid().n(), b.grid().n(), "grids differ");
    std::array::from_fn(|v| {
        let var = Var::ALL[v];
        let mut m = 0f64;
        interior_box(a.grid().n()).for_each(|i, j, k| {
            let d = (a[var].get(i, j, k).as_f64() - b[var].get(i, j, k).as_f64()).abs();
            m = if d.is_nan() || m.is_nan() { f64::NAN } else { m.max(d) };
        });
        m
    })
}

/// Interior values bitwise identical (so NaN never matches).
pub fn interiors_identical<T: Real>(a: &FieldSet<T>, b: &FieldSet<T>) -> bool {
    a.grid().n() == b.grid().n()
        && Var::ALL.iter().all(|&var| {
            let mut same = true;
            interior_box(a.grid().n()).for_each(|i, j, k| same &= a[var].get(i, j, k) == b[var].get(i, j, k));
            same
        })
}
