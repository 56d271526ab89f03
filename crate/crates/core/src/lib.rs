//! Constructive global approximation of CR functions on Bloom-Graham model
//! graphs by entire functions.
//!
//! The pipeline: parse a model graph ([`graph_model`]), pick kernel
//! constants and audit the kernel estimate ([`kernel`]), evaluate the
//! approximation operators by quadrature ([`quadrature`]) and run the
//! convergence and slice-fixing experiments ([`verify`]).

pub mod cli;
pub mod expr;
pub mod graph_model;
pub mod kernel;
pub mod quadrature;
pub mod rng;
pub mod verify;

pub use graph_model::{build_compact_spec, parse_graph_spec, BoxK, CompactSpec, GrowthBound, ModelGraph};
pub use kernel::{KernelParams, SelectionTrace};
pub use quadrature::{QuadConfig, TestFunction};
