//! Dual-rail bosonic qubits on extended Bose-Hubbard walk graphs.
//!
//! Logical qubit `i` lives on the two sites of column `i`: one excitation in
//! row 0 is `|0>_L`, in row 1 it is `|1>_L`. Gates are piecewise-constant
//! Hamiltonians built from colored walk graphs (hopping, detuning, ZZ and
//! on-site terms) and are checked by exact propagation in the Fock basis.
//!
//! Units: hbar = 1, energies in units of a reference coupling, times in its
//! inverse.

pub mod circuitparams;
pub mod circuits;
pub mod error;
pub mod fock;
pub mod gates;
pub mod metrics;
pub mod noisesim;
pub mod propagate;
pub mod walkgraph;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use fock::{enumerate_basis, FockBasis, FockState, SiteIndex, SubspaceProjector};
pub use gates::{BlockSpectrum, GateParams, GateReport, GateSchedule, ScheduleStep};
pub use metrics::FidelityResult;
pub use propagate::{DensityMatrix, LindbladOperatorSet, PropagatorCache, StateVector};
pub use walkgraph::{build_hamiltonian, EdgeKind, HamiltonianMatrix, WalkGraph};

/// Dense complex matrix used for Hamiltonians, propagators and density matrices.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<Complex64>;
