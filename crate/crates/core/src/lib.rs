//! Numerical laboratory for global transverse Poincare sections of
//! Hamiltonian flows and the cosymplectic structures they induce.
//!
//! Everything lives on flat charts (Euclidean or periodic coordinates).
//! Sign convention throughout: `i_{X_H} w = dH`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod cosym;
pub mod forms;
pub mod linalg;
pub mod obstruct;
pub mod par;
pub mod phase;
pub mod quad;
pub mod section;
pub mod tischler;

pub use forms::{ChartMap, KForm, TangentVector};
pub use par::Execution;
pub use phase::{ChartManifold, EnergySurface, HamiltonianSystem, Topology};
pub use section::{SectionChart, SectionSpec};
