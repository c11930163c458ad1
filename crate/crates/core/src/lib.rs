//! Domain-decomposed 3D buoyancy-driven cavity solver.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: ghosted storage and face-slab copy kernels
//! * [`solver`]: residuals, wall conditions, explicit marching, norms
//! * [`decomp`]: process grids, block extents, neighbour tables, weak-scaling growth
//! * [`transport`]: rank-addressed non-blocking messaging, in-process backend
//! * [`halo`]: exchange plans for the four strategies, overlap regions, byte accounting
//! * [`metrics`]: speedup, efficiency, ssspnt and run records
//! * [`run`]: one rank worker per block, driven to completion in-process
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the
//! scalar type.

pub mod decomp;
pub mod halo;
pub mod mesh;
pub mod metrics;
pub mod run;
pub mod scalar;
pub mod solver;
pub mod transport;

pub use scalar::Real;

pub type Grid3f64 = mesh::Grid3<f64>;
pub type Grid3f32 = mesh::Grid3<f32>;
pub type Field3f64 = mesh::Field3<f64>;
pub type Field3f32 = mesh::Field3<f32>;
pub type FieldSetf64 = mesh::FieldSet<f64>;
pub type FieldSetf32 = mesh::FieldSet<f32>;
pub type FluidParamsf64 = solver::FluidParams<f64>;
pub type FluidParamsf32 = solver::FluidParams<f32>;
pub type BlockMapf64 = decomp::BlockMap<f64>;
pub type BlockMapf32 = decomp::BlockMap<f32>;
