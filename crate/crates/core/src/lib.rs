//! Core library of the hetmap toolkit.
//!
//! The pipeline goes: instruction trace -> dynamic dataflow graph ->
//! multifractal node features -> autoencoder-based kernel partition ->
//! per-kernel CPU/GPU classification -> greedy placement on a mesh
//! platform -> simulated makespan and speedup.
//!
//! Modules follow that order:
//! - [`trace`]: executed-instruction traces, their text format, and a
//!   synthetic trace generator.
//! - [`dfg`]: weighted, typed dataflow graph construction from a trace.
//! - [`fractal`]: random-walk multifractal node features.
//! - [`nn`]: dense matrix kernel, reverse-mode autodiff, GCN/GAT/GGNN
//!   layers, Adam.
//! - [`gae`]: graph autoencoder partitioning with spectral clustering.
//! - [`mapper`]: graph-level CPU/GPU classifier with cross-validation
//!   and ablation sweeps.
//! - [`sched`]: heterogeneous platform cost model, greedy mesh mapping
//!   and schedule simulation.

pub mod dfg;
pub mod fractal;
pub mod gae;
pub mod mapper;
pub mod nn;
pub mod sched;
pub mod seed;
pub mod trace;
