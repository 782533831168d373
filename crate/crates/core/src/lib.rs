//! Computational workbench for finite-dimensional operator algebras.
//!
//! The library represents a finite-dimensional C*-algebra as a direct sum of
//! complex matrix algebras and builds, on top of that:
//!
//! * commutative subalgebras ("contexts"), their finite spectra, and spatial
//!   diagrams linking contexts by inclusions and inner automorphisms;
//! * generalized diagram (co)limits for abelian groups, finite sets, and
//!   finite meet-semilattices, via exact Smith-normal-form arithmetic;
//! * operator K₀ computed two independent ways (rank tuples vs. a colimit
//!   over the context diagram) together with an executable natural
//!   isomorphism between them;
//! * the correspondence between invariant families of projections and
//!   central projections, made constructive by a refutation oracle;
//! * Kochen–Specker global-section searches and Born-rule distribution
//!   families for density matrices.

pub mod algebra;
pub mod contexts;
pub mod diagcat;
pub mod foundations;
pub mod ideals;
pub mod io;
pub mod ktheory;

pub use algebra::{AlgElement, FdAlgebra, Hom, Projection, RankTuple, Unitary};
pub use contexts::{Context, ContextMorphism, FinSpace, SpaceMap, SpatialDiagram};
pub use diagcat::{AbGroup, AbPresentation, IntMatrix};
