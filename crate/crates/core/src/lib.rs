//! Exact symbolic engine for Lie bracket tables of polynomial vector fields
//! and for extending a Lie algebra action order by order onto a one-parameter
//! formal deformation.
//!
//! All arithmetic is exact (arbitrary-precision rationals); an extension step
//! either succeeds with the solved correction terms or produces an
//! inconsistency certificate that can be checked independently.

pub mod dsl;
pub mod extend;
pub mod linsolve;
pub mod poly;
pub mod rational;
pub mod vars;
pub mod vfield;

pub use extend::{
    AnsatzTemplate, ExtensionProblem, ExtensionResult, LieAlgebraSpec, ObstructionReport,
    OrderStage, VerificationReport,
};
pub use linsolve::{
    AffineForm, Constraint, FreePolicy, LinearSystem, Provenance, SolutionSet, Unknown, UnknownSet,
};
pub use poly::{Coefficient, Cutoff, Monomial, PolyError, Polynomial, Valuation};
pub use rational::Rational;
pub use vars::{VarList, Variable};
pub use vfield::{FieldError, VectorField};
