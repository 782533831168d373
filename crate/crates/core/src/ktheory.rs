//! Operator K₀ computed two independent ways — the rank-tuple/Grothendieck
//! route and the colimit over a spatial diagram of contexts — together with
//! the executable natural isomorphism between them.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{rank_profile, unitalisation, FdAlgebra, Hom, Projection, RankTuple};
use crate::contexts::{
    context_of, core_diagram, enrich_with_context, spectrum_map, Context, ContextError, FinSpace,
    SpaceMap, SpatialDiagram,
};
use crate::diagcat::{
    colimit_ab, colimit_induced_map, grothendieck_group, integer_kernel, AbArrow, AbGroup,
    AbPresentation, ColimitAb, DiagMorphism, DiagramAb, DiagramError, IntMatrix,
};

#[derive(Debug, Error)]
pub enum KtheoryError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Algebra(#[from] crate::algebra::AlgebraError),
    #[error("the diagram has no context for the queried projection (ranks {ranks})")]
    ContextMissing { ranks: RankTuple },
    #[error("the two K-groups are not isomorphic on generator {generator}")]
    IsoFailure { generator: String },
    #[error("naturality square fails on generator {generator}")]
    NaturalityFailure { generator: String },
    #[error("colimit group has unexpected torsion: {factors}")]
    UnexpectedTorsion { factors: String },
}

/// An element of a K-group in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KClass {
    pub group: AbGroup,
    pub coords: Vec<BigInt>,
}

/// K of a finite discrete space: one free generator per point.
pub fn k_top(x: &FinSpace) -> AbGroup {
    AbGroup::free(x.points.len())
}

/// Contravariant action on a map of finite spaces: a dimension vector d over
/// the target pulls back to d∘f over the source (one 1 per row).
pub fn k_top_pullback(f: &SpaceMap) -> IntMatrix {
    let mut m = IntMatrix::zeros(f.source.points.len(), f.target.points.len());
    for (x, &fx) in f.assignment.iter().enumerate() {
        m[(x, fx)] = BigInt::from(1);
    }
    m
}

/// The standard route: the projection monoid is classified by rank tuples,
/// so K₀ is the Grothendieck completion of ℕ^k.
pub struct K0Computation {
    pub group: AbGroup,
}

pub fn k0_standard(a: &FdAlgebra) -> K0Computation {
    K0Computation { group: grothendieck_group(a.num_blocks(), &[]) }
}

impl K0Computation {
    pub fn class_of(&self, p: &Projection) -> KClass {
        let ranks = rank_profile(p);
        let word: Vec<BigInt> = ranks.0.iter().map(|&r| BigInt::from(r)).collect();
        KClass { group: self.group.clone(), coords: self.group.project(&word) }
    }
}

/// Action of a unital homomorphism on K₀: its multiplicity matrix acting on
/// rank tuples.
pub fn k0_hom(phi: &Hom) -> Result<IntMatrix, KtheoryError> {
    if !phi.is_unital() {
        return Err(KtheoryError::Algebra(crate::algebra::AlgebraError::NotUnital));
    }
    Ok(phi.multiplicity_matrix())
}

/// The diagram route: K₀ as the colimit of the K-groups of the spectra of a
/// spatial diagram of contexts.
pub struct KtildeComputation {
    pub group: AbGroup,
    pub colimit: ColimitAb,
    pub diagram: SpatialDiagram,
}

/// The abelian-group diagram K∘Σ over a spatial diagram: one free group per
/// context spectrum, with the pullback matrices as structure maps.  Arrow
/// directions match the context arrows again (two contravariant steps).
fn ab_diagram_of(d: &SpatialDiagram) -> Result<DiagramAb, ContextError> {
    let objects: Vec<AbPresentation> =
        d.contexts().iter().map(|c| AbPresentation::free(c.num_atoms())).collect();
    let mut arrows = Vec::with_capacity(d.arrows().len());
    for k in 0..d.arrows().len() {
        let a = &d.arrows()[k];
        let smap = spectrum_map(&d.morphism(k))?;
        arrows.push(AbArrow { src: a.src, dst: a.dst, map: k_top_pullback(&smap) });
    }
    Ok(DiagramAb { objects, arrows })
}

pub fn ktilde_f(a: &FdAlgebra, d: &SpatialDiagram) -> Result<KtildeComputation, KtheoryError> {
    assert_eq!(&d.algebra, a, "diagram must live over the queried algebra");
    let ab = ab_diagram_of(d)?;
    let colimit = colimit_ab(&ab)?;
    Ok(KtildeComputation { group: colimit.group.clone(), colimit, diagram: d.clone() })
}

impl KtildeComputation {
    /// Class of a projection: the sum of the injections of the atoms of its
    /// own context that lie below it.  The context must be in the diagram.
    pub fn class_of_u(&self, p: &Projection) -> Result<KClass, KtheoryError> {
        let v = context_of(&self.diagram.algebra, p)?;
        let idx = self
            .diagram
            .find_context(v.key())
            .ok_or_else(|| KtheoryError::ContextMissing { ranks: rank_profile(p) })?;
        Ok(self.class_of_atom_sum(idx, self.diagram.contexts()[idx].mask_below(p)))
    }

    /// Class of a sum of atoms of context `ctx` given by a bitmask.
    pub fn class_of_atom_sum(&self, ctx: usize, mask: u64) -> KClass {
        let inj = &self.colimit.injections[ctx];
        let mut coords = vec![BigInt::zero(); self.group.canonical_rank()];
        for t in 0..self.diagram.contexts()[ctx].num_atoms() {
            if mask >> t & 1 == 1 {
                for (r, c) in coords.iter_mut().enumerate() {
                    *c += inj[(r, t)].clone();
                }
            }
        }
        KClass { group: self.group.clone(), coords: self.group.reduce_vec(&coords) }
    }
}

/// A homomorphism applied to whole diagrams: the image contexts and arrows
/// are grafted onto the codomain diagram (a monotone enrichment), and the
/// induced map between the colimits is computed from the diagram morphism.
pub struct HomInducedMap {
    pub source: KtildeComputation,
    pub target: KtildeComputation,
    pub matrix: IntMatrix,
}

/// Image of a context under a unital homomorphism: the nonzero images of the
/// atoms, which again partition the target identity.
fn image_context(phi: &Hom, v: &Context) -> Result<Context, KtheoryError> {
    let tol = phi.target.tolerance();
    let mut atoms = Vec::new();
    for a in v.atoms() {
        let img = phi.apply(a.element())?;
        if img.max_norm() > 10.0 * tol {
            atoms.push(Projection::try_new(img)?);
        }
    }
    Ok(Context::new(phi.target.clone(), atoms)?)
}

pub fn ktilde_hom_map(
    phi: &Hom,
    d_src: &SpatialDiagram,
    d_dst: &SpatialDiagram,
) -> Result<HomInducedMap, KtheoryError> {
    assert!(phi.is_unital(), "diagram transport needs a unital homomorphism");
    let mut enriched = d_dst.clone();
    let mut object_map = Vec::with_capacity(d_src.contexts().len());
    for v in d_src.contexts() {
        let img = image_context(phi, v)?;
        object_map.push(enrich_with_context(&mut enriched, img));
    }
    // Image arrows; identity arrows land on identities already present, so
    // every source arrow has a well-defined image index.
    let mut arrow_map = Vec::with_capacity(d_src.arrows().len());
    for a in d_src.arrows() {
        let phi_u = phi.apply_unitary(&a.u)?;
        let k = enriched.add_arrow(object_map[a.src], object_map[a.dst], phi_u)?;
        arrow_map.push(k);
    }
    // Components on spectrum generators: atom a of V maps to the atom of the
    // image context equal to φ(a), or to zero when φ kills it.
    let tol = 10.0 * phi.target.tolerance();
    let mut components = Vec::with_capacity(d_src.contexts().len());
    for (vi, v) in d_src.contexts().iter().enumerate() {
        let img_ctx = &enriched.contexts()[object_map[vi]];
        let mut comp = IntMatrix::zeros(img_ctx.num_atoms(), v.num_atoms());
        for (t, a) in v.atoms().iter().enumerate() {
            let img = phi.apply(a.element())?;
            if img.max_norm() <= tol {
                continue;
            }
            let pos = img_ctx
                .atoms()
                .iter()
                .position(|b| b.element().approx_eq(&img, tol))
                .expect("nonzero atom image is an atom of the image context");
            comp[(pos, t)] = BigInt::from(1);
        }
        components.push(comp);
    }

    let ab_src = ab_diagram_of(d_src)?;
    let ab_dst = ab_diagram_of(&enriched)?;
    let colim_src = colimit_ab(&ab_src)?;
    let colim_dst = colimit_ab(&ab_dst)?;
    let morphism = DiagMorphism { object_map, arrow_map, components };
    let matrix = colimit_induced_map(&morphism, &ab_src, &ab_dst, &colim_src, &colim_dst)?;
    Ok(HomInducedMap {
        source: KtildeComputation {
            group: colim_src.group.clone(),
            colimit: colim_src,
            diagram: d_src.clone(),
        },
        target: KtildeComputation {
            group: colim_dst.group.clone(),
            colimit: colim_dst,
            diagram: enriched,
        },
        matrix,
    })
}

/// Extension to the non-unital calling convention: the group of A computed
/// inside its unitalisation as the kernel of the induced map onto the
/// scalars' group.
pub fn ktilde_f_kernel(a: &FdAlgebra) -> Result<AbGroup, KtheoryError> {
    let (plus, _incl, character) = unitalisation(a);
    let d_plus = core_diagram(&plus)?;
    let scalars = character.target.clone();
    let d_scalars = core_diagram(&scalars)?;
    let induced = ktilde_hom_map(&character, &d_plus, &d_scalars)?;
    if !induced.source.group.torsion_factors().is_empty() {
        return Err(KtheoryError::UnexpectedTorsion {
            factors: induced.source.group.factors_string(),
        });
    }
    let basis = integer_kernel(&induced.matrix);
    Ok(AbGroup::free(basis.cols()))
}

#[derive(Clone, Debug, Serialize)]
pub struct GeneratorRow {
    pub label: String,
    pub k0: Vec<i64>,
    pub ktilde_f: Vec<i64>,
}

/// Report of the executable natural isomorphism between the two K₀ routes.
#[derive(Clone, Debug, Serialize)]
pub struct NaturalIsoReport {
    pub algebra: String,
    pub k0: String,
    pub ktilde_f: String,
    pub iso: bool,
    pub naturality: Option<bool>,
    pub generator_table: Vec<GeneratorRow>,
}

fn to_i64_vec(v: &[BigInt]) -> Vec<i64> {
    v.iter().map(|x| i64::try_from(x).unwrap_or(i64::MAX)).collect()
}

/// Builds the isomorphism matrix sending the standard class of each
/// block-indicator projection to its diagram class, then checks that it is a
/// unimodular square matching the two classes on every atom of the diagram.
fn build_iso(
    a: &FdAlgebra,
    k0: &K0Computation,
    kt: &KtildeComputation,
) -> Result<(IntMatrix, Vec<GeneratorRow>), KtheoryError> {
    let k = a.num_blocks();
    if !kt.group.torsion_factors().is_empty() || kt.group.canonical_rank() != k {
        return Err(KtheoryError::IsoFailure {
            generator: format!("group {}", kt.group.factors_string()),
        });
    }
    let mut eta = IntMatrix::zeros(k, k);
    let mut table = Vec::with_capacity(k);
    for i in 0..k {
        let p = crate::algebra::random::block_indicator(a, i);
        let cls = kt.class_of_u(&p)?;
        for r in 0..k {
            eta[(r, i)] = cls.coords[r].clone();
        }
        table.push(GeneratorRow {
            label: format!("block {} rank-1 projection", i + 1),
            k0: to_i64_vec(&k0.class_of(&p).coords),
            ktilde_f: to_i64_vec(&cls.coords),
        });
    }
    if !eta.is_unimodular() {
        return Err(KtheoryError::IsoFailure { generator: "eta determinant".into() });
    }
    // Generator images must match exactly: for every atom of every context,
    // eta carries the rank-tuple class onto the diagram class.
    for (ci, v) in kt.diagram.contexts().iter().enumerate() {
        for (t, atom) in v.atoms().iter().enumerate() {
            let word: Vec<BigInt> =
                rank_profile(atom).0.iter().map(|&r| BigInt::from(r)).collect();
            let via_eta = eta.mul_vec(&word);
            let direct = kt.class_of_atom_sum(ci, 1 << t).coords;
            if via_eta != direct {
                return Err(KtheoryError::IsoFailure {
                    generator: format!("context {ci} atom {t}"),
                });
            }
        }
    }
    Ok((eta, table))
}

/// Object-level check: the two K₀ routes agree over the given diagram.
pub fn natural_iso_check(
    a: &FdAlgebra,
    d: &SpatialDiagram,
) -> Result<NaturalIsoReport, KtheoryError> {
    let k0 = k0_standard(a);
    let kt = ktilde_f(a, d)?;
    let (_eta, table) = build_iso(a, &k0, &kt)?;
    Ok(NaturalIsoReport {
        algebra: a.to_string(),
        k0: k0.group.factors_string(),
        ktilde_f: kt.group.factors_string(),
        iso: true,
        naturality: None,
        generator_table: table,
    })
}

/// Full check for a unital homomorphism φ: A → B: both object-level
/// isomorphisms plus the square  K̃(φ) ∘ η_A  =  η_B ∘ K₀(φ)  as an exact
/// integer-matrix identity (η_B computed over the enriched codomain diagram).
pub fn natural_iso_check_hom(
    phi: &Hom,
    d_a: &SpatialDiagram,
    d_b: &SpatialDiagram,
) -> Result<NaturalIsoReport, KtheoryError> {
    let k0_a = k0_standard(&phi.source);
    let induced = ktilde_hom_map(phi, d_a, d_b)?;
    let (eta_a, table) = build_iso(&phi.source, &k0_a, &induced.source)?;
    let k0_b = k0_standard(&phi.target);
    let (eta_b, _) = build_iso(&phi.target, &k0_b, &induced.target)?;
    let lhs = induced.matrix.mul(&eta_a);
    let rhs = eta_b.mul(&k0_hom(phi)?);
    if lhs != rhs {
        let col = (0..lhs.cols())
            .find(|&j| (0..lhs.rows()).any(|i| lhs[(i, j)] != rhs[(i, j)]))
            .unwrap_or(0);
        return Err(KtheoryError::NaturalityFailure {
            generator: format!("block {} rank-1 projection", col + 1),
        });
    }
    Ok(NaturalIsoReport {
        algebra: format!("{} -> {}", phi.source, phi.target),
        k0: k0_a.group.factors_string(),
        ktilde_f: induced.source.group.factors_string(),
        iso: true,
        naturality: Some(true),
        generator_table: table,
    })
}
