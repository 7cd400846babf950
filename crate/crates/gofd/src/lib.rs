//! Grid-overlay finite differences (GoFD) for the Dirichlet problem of the
//! fractional Laplacian `(-Δ)^s u = f` on a bounded domain.
//!
//! A uniform finite-difference grid is laid over an unstructured simplicial
//! mesh. The fractional Laplacian is discretized on the uniform grid, where
//! its stiffness matrix is multilevel Toeplitz and can be applied by FFT, and
//! the result is transferred back to the mesh by piecewise-linear
//! interpolation.
//!
//! ```
//! use gofd::{analytic_1d, FractionalOrder};
//!
//! let s = FractionalOrder::new(0.5)?;
//! let kernel = analytic_1d(s, 8)?;
//! assert!((kernel.coeff(&[0]) - 4.0 / std::f64::consts::PI).abs() < 1e-14);
//! # Ok::<(), gofd::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod special;
pub mod stiffness;
pub mod solver;
pub mod toeplitz;
pub mod transfer;

pub use error::{Error, Result};
pub use grid::{symbol_psi, FractionalOrder, OverlayGrid};
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use stiffness::{
    analytic_1d, decay_profile, fft_uniform, modified_spectral, nonuniform, spectral,
    DecayProfile, KernelSpec, Scheme, StiffnessKernel,
};
pub use toeplitz::{dense_materialize, dft, Direction, GridVector, ToeplitzPlan};
pub use mesh::{generate_ball_mesh, load_mesh, mesh_quality, save_mesh, MeshQuality, SimplicialMesh};
pub use solver::{
    assemble_rhs, cg_solve, exact_solution, operator_apply, solve_bvp, BvpConfig, BvpSolution,
    GoFDOperator, Preconditioner, PreconditionerKind, SolveReport,
};
pub use transfer::{build_transfer, choose_grid, column_rank_check, GridCondition, TransferMatrix};
