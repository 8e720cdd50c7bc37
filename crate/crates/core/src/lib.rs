//! Finite-matrix laboratory for the quantum shifting superoperator, its
//! force and hyperforce densities, and the equilibrium and dynamical sum
//! rules they obey.
//!
//! Every identity is realized on a finite truncation: a position grid or a
//! truncated oscillator number basis, with one or two particles. Identities
//! that follow from trace cyclicity hold to machine precision
//! ([`RuleClass::Exact`]); identities that need the canonical commutator are
//! checked by residual decay under basis doubling ([`RuleClass::Convergence`]).

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod hyperdft;
pub mod operator;
pub mod profile;
pub mod sumrule;
pub mod system;
pub mod thermal;

pub use basis::{build_single_particle, BasisKind, BasisSpec, Boundary, MomentumScheme, SingleParticleBasis};
pub use error::{Error, Result};
pub use operator::{
    adjoint, commutator, max_abs, random_hermitian, random_matrix, residual_norm, spectral_decompose, CMatrix,
    MaxAbsResidual, Operator, SpectralDecomposition,
};
pub use profile::Profile;
pub use sumrule::{ReportRow, RuleClass, SumRuleReport};
pub use system::{build_fock, build_many_body, gaussian_pair_potential, ManyBodySystem, Sector, Statistics};
pub use thermal::{make_grand_state, make_thermal_state, mori_covariance, mori_product, thermal_average, ThermalState};
