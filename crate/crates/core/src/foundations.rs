//! Global-section searches over spatial diagrams (the contextuality side)
//! and probability-distribution families of density matrices (the state
//! side).

use thiserror::Error;

use crate::algebra::linalg::{eig_hermitian_desc, C64, CMatrix};
use crate::algebra::{AlgElement, AlgebraError, FdAlgebra, Projection};
use crate::contexts::{generate_context, spectrum_map, Context, ContextError, SpatialDiagram};
use crate::diagcat::{limit_set, LimitError};

#[derive(Debug, Error)]
pub enum FoundationsError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error("basis {basis} is not orthonormal (defect {defect:.3e})")]
    NotOrthonormal { basis: usize, defect: f64 },
    #[error("vector {vector} of basis {basis} has wrong length")]
    BadVectorLength { basis: usize, vector: usize },
    #[error("state lives in a different algebra than the diagram")]
    AlgebraMismatch,
}

/// A density matrix: positive semidefinite with unit trace.
#[derive(Clone, Debug)]
pub struct DensityMatrix(AlgElement);

impl DensityMatrix {
    pub fn try_new(e: AlgElement) -> Result<Self, FoundationsError> {
        let tol = e.parent().tolerance();
        let herm = e.sub(&e.adjoint()).max_norm();
        if herm > tol {
            return Err(FoundationsError::Algebra(AlgebraError::NotAProjection {
                defect: herm,
            }));
        }
        for b in e.blocks() {
            let (vals, _) = eig_hermitian_desc(b);
            if vals.iter().any(|&v| v < -tol) {
                return Err(FoundationsError::Algebra(AlgebraError::NotAProjection {
                    defect: -vals.iter().cloned().fold(f64::INFINITY, f64::min),
                }));
            }
        }
        if (e.trace().re - 1.0).abs() > tol || e.trace().im.abs() > tol {
            return Err(FoundationsError::Algebra(AlgebraError::ShapeMismatch));
        }
        Ok(DensityMatrix(e))
    }

    pub fn element(&self) -> &AlgElement {
        &self.0
    }

    /// Convex combination; stays a density matrix.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> DensityMatrix {
        assert!((0.0..=1.0).contains(&lambda));
        DensityMatrix(
            self.0
                .scale(C64::new(lambda, 0.0))
                .add(&other.0.scale(C64::new(1.0 - lambda, 0.0))),
        )
    }
}

/// One probability vector over the atoms of each context of a diagram.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DistributionFamily {
    pub probs: Vec<Vec<f64>>,
}

impl DistributionFamily {
    pub fn validate(&self, d: &SpatialDiagram) -> bool {
        let tol = d.algebra.tolerance();
        self.probs.len() == d.contexts().len()
            && self.probs.iter().zip(d.contexts()).all(|(p, c)| {
                p.len() == c.num_atoms()
                    && p.iter().all(|&x| x >= -tol)
                    && (p.iter().sum::<f64>() - 1.0).abs() <= 10.0 * tol
            })
    }
}

/// Born probabilities of a state over every context: the probability of atom
/// a in context V is tr(ρ·a).  Marginalization holds along every inclusion
/// arrow; along a genuine Ad-arrow the family instead transforms covariantly
/// (the pushforward computes the family of the conjugated state u*ρu).
pub fn born_family(
    rho: &DensityMatrix,
    d: &SpatialDiagram,
) -> Result<DistributionFamily, FoundationsError> {
    if rho.element().parent() != &d.algebra {
        return Err(FoundationsError::AlgebraMismatch);
    }
    let probs = d
        .contexts()
        .iter()
        .map(|c| {
            c.atoms()
                .iter()
                .map(|a| rho.element().mul(a.element()).trace().re)
                .collect()
        })
        .collect();
    Ok(DistributionFamily { probs })
}

/// A violated pushforward equation.
#[derive(Clone, Debug)]
pub struct CompatibilityViolation {
    pub arrow: usize,
    pub src_atom: usize,
    pub expected: f64,
    pub got: f64,
}

/// Checks the pushforward equation along every inclusion-acting arrow of the
/// diagram: the source probability of an atom equals the summed target
/// probabilities of its refinements.  Arrows with a nontrivial unitary
/// action are not marginalization constraints and are skipped.
pub fn check_compatibility(
    fam: &DistributionFamily,
    d: &SpatialDiagram,
    tol: f64,
) -> Result<Option<CompatibilityViolation>, FoundationsError> {
    for (k, a) in d.arrows().iter().enumerate() {
        if !d.is_inclusion_arrow(k) {
            continue;
        }
        let smap = spectrum_map(&d.morphism(k))?;
        for p in 0..d.contexts()[a.src].num_atoms() {
            let pushed: f64 = smap
                .assignment
                .iter()
                .enumerate()
                .filter(|&(_, &img)| img == p)
                .map(|(q, _)| fam.probs[a.dst][q])
                .sum();
            let direct = fam.probs[a.src][p];
            if (pushed - direct).abs() > tol {
                return Ok(Some(CompatibilityViolation {
                    arrow: k,
                    src_atom: p,
                    expected: direct,
                    got: pushed,
                }));
            }
        }
    }
    Ok(None)
}

/// A restriction-compatible choice of one spectrum point per context,
/// recorded by atom identifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuationSection {
    pub choices: Vec<u64>,
}

/// All global sections of the spectra of a diagram, in canonical order:
/// the limit of the underlying diagram of finite sets.
pub fn global_sections(d: &SpatialDiagram) -> Result<Vec<ValuationSection>, FoundationsError> {
    let (spaces, set_diag) = d.spectra_set_diagram()?;
    let tuples = limit_set(&set_diag)?;
    Ok(tuples
        .into_iter()
        .map(|t| ValuationSection {
            choices: t.iter().enumerate().map(|(c, &x)| spaces[c].points[x]).collect(),
        })
        .collect())
}

/// Builds the spatial diagram of a family of orthonormal bases of ℂ^dim:
/// one maximal context per basis (rank-1 projectors), plus, for each pair of
/// bases sharing projectors, the shared coarse context with inclusion arrows
/// into both.
pub fn ks_diagram(
    dim: usize,
    bases: &[Vec<Vec<C64>>],
    tolerance: f64,
) -> Result<SpatialDiagram, FoundationsError> {
    let algebra = FdAlgebra::with_tolerance(vec![dim], tolerance)?;
    // Orthonormality gate: the fixture certifies itself.
    for (bi, basis) in bases.iter().enumerate() {
        if basis.len() != dim {
            return Err(FoundationsError::NotOrthonormal { basis: bi, defect: f64::NAN });
        }
        for (vi, v) in basis.iter().enumerate() {
            if v.len() != dim {
                return Err(FoundationsError::BadVectorLength { basis: bi, vector: vi });
            }
        }
        for i in 0..dim {
            for j in i..dim {
                let dot: C64 =
                    (0..dim).map(|l| basis[i][l].conj() * basis[j][l]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                let defect = (dot - C64::new(expect, 0.0)).norm();
                if defect > tolerance {
                    return Err(FoundationsError::NotOrthonormal { basis: bi, defect });
                }
            }
        }
    }

    let projector = |v: &[C64]| -> Projection {
        let mut m = CMatrix::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = v[r] * v[c].conj();
            }
        }
        Projection::try_new(AlgElement::from_blocks(algebra.clone(), vec![m]).unwrap())
            .expect("unit vector gives a rank-1 projection")
    };

    let mut d = SpatialDiagram::new(algebra.clone());
    let basis_projs: Vec<Vec<Projection>> =
        bases.iter().map(|b| b.iter().map(|v| projector(v)).collect()).collect();
    let basis_ctx: Vec<usize> = basis_projs
        .iter()
        .map(|atoms| {
            d.add_context(
                Context::new(algebra.clone(), atoms.clone()).expect("basis atoms partition"),
            )
        })
        .collect();

    let tol = 10.0 * tolerance;
    for i in 0..basis_projs.len() {
        for j in i + 1..basis_projs.len() {
            let shared: Vec<Projection> = basis_projs[i]
                .iter()
                .filter(|p| {
                    basis_projs[j].iter().any(|q| p.element().approx_eq(q.element(), tol))
                })
                .cloned()
                .collect();
            if shared.is_empty() || shared.len() == dim {
                continue;
            }
            let coarse = generate_context(&algebra, &shared, false)?;
            let ci = d.add_context(coarse);
            let one = crate::algebra::Unitary::identity(&algebra);
            d.add_arrow(ci, basis_ctx[i], one.clone())?;
            d.add_arrow(ci, basis_ctx[j], one)?;
        }
    }
    Ok(d)
}
