//! Exact joint Gaussian simulation of spot Brownian increments and Volterra
//! factors, spot and spot-variance paths, and the running integral entering `X`.

mod covariance;
mod dump;
mod grid;
mod paths;
mod reduce;
mod rng;

pub use covariance::{build_joint_covariance, GaussianVariable, JointCovariance, LowerFactor};
pub use dump::{read_path_dump, write_path_dump, PathDumpHeader};
pub use grid::TimeGrid;
pub use paths::{
    generate_paths, kernel_cell_weights, GaussianDraw, PathBundle, PathGenerator, PathTerminal,
    Scenario,
};
pub use reduce::{tree_reduce, Executor, Moments, CHUNK_UNITS};
pub use rng::{RngStreamSpec, StreamDomain};
