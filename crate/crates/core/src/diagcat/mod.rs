//! Diagram machinery over exact integer arithmetic: Smith normal form,
//! finitely presented abelian groups, generalized colimits for diagrams of
//! varying shape, and limits in sets and finite meet-semilattices.

mod abgroup;
mod colimit;
mod intmat;
mod limits;

pub use abgroup::{grothendieck_group, AbGroup, AbPresentation, MonoidRelation};
pub use colimit::{
    colimit_ab, colimit_induced_map, AbArrow, ColimitAb, DiagMorphism, DiagramAb, DiagramError,
};
pub use intmat::{integer_kernel, smith_normal_form, solve_left, IntMatrix, Snf};
pub use limits::{
    limit_meet_semilattice, limit_set, DiagramLat, DiagramSet, FinLattice, LatArrow, LimitError,
    LimitLattice, SetArrow,
};
