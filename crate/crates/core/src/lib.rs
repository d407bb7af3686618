//! Multi-horizon planning of residential PV and battery investments under
//! strategic and operational uncertainty.
//!
//! The crate builds mixed-integer models over multi-horizon scenario trees,
//! solves them with HiGHS, and provides matheuristics (scenario-fixing
//! rolling and rolling horizon), lower bounds from scenario decomposition,
//! and expected-value analyses.

pub mod bounds;
pub mod cli;
pub mod experiment;
pub mod heuristics;
pub mod instance;
pub mod io;
pub mod milp;
pub mod model;
pub mod pool;
pub mod scengen;
pub mod tree;

pub use instance::{load_instance, Instance, InstanceError};
pub use milp::{SolveOutcome, SolveStatus, SolverControls};
pub use model::{build_model, check_feasibility, solve_monolithic, Fixings, Scope, Solution, Variant};
pub use tree::{MultiHorizonTree, NodeId};
