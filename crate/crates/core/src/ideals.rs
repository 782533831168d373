//! Ideal lattices, families of projections over spatial diagrams, invariance
//! checking, and the constructive correspondence between invariant families
//! and central projections driven by a refutation oracle.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    cover_orbit, rank_profile, unitary_equiv_certificate, AlgebraError,
    FdAlgebra, Hom, Projection, Unitary,
};
use crate::contexts::{
    build_inclusion_diagram, center_context, default_seeds,
    enrich_with_context, enrich_with_projection, generate_context, ContextError, SpatialDiagram,
};

#[derive(Debug, Error)]
pub enum IdealsError {
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("conjugated context is not resolvable in the diagram")]
    UnresolvableContext,
    #[error("projection is already central")]
    AlreadyCentral,
    #[error("refutation produced no invariance violation")]
    RefutationFailed,
    #[error("saturation did not terminate within {cap} rounds ({remaining} non-central families left)")]
    SaturationCapExceeded { cap: usize, remaining: usize },
}

/// The lattice of ideals of a multi-matrix algebra: subsets of the summands,
/// as bitmasks ordered by inclusion.
#[derive(Clone, Debug)]
pub struct IdealLattice {
    pub algebra: FdAlgebra,
    pub elements: Vec<u32>,
}

pub fn ideal_lattice(a: &FdAlgebra) -> IdealLattice {
    let k = a.num_blocks();
    IdealLattice { algebra: a.clone(), elements: (0..(1u32 << k)).collect() }
}

impl IdealLattice {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Preimage map on ideal lattices induced by a homomorphism: a source
/// summand survives exactly when every target summand it feeds lies in the
/// ideal.
#[derive(Clone, Debug)]
pub struct IdealPreimage {
    source_blocks: usize,
    target_blocks: usize,
    multiplicity: Vec<Vec<usize>>,
}

pub fn ideal_preimage(phi: &Hom) -> IdealPreimage {
    IdealPreimage {
        source_blocks: phi.source.num_blocks(),
        target_blocks: phi.target.num_blocks(),
        multiplicity: phi.multiplicity.clone(),
    }
}

impl IdealPreimage {
    pub fn apply(&self, target_ideal: u32) -> u32 {
        let mut out = 0u32;
        for j in 0..self.source_blocks {
            let all_in = (0..self.target_blocks).all(|i| {
                self.multiplicity[i][j] == 0 || target_ideal >> i & 1 == 1
            });
            if all_in {
                out |= 1 << j;
            }
        }
        out
    }

    /// Meets (intersections) are preserved; checked exhaustively in tests.
    pub fn preserves_meets(&self) -> bool {
        let n = 1u32 << self.target_blocks;
        for a in 0..n {
            for b in 0..n {
                if self.apply(a & b) != (self.apply(a) & self.apply(b)) {
                    return false;
                }
            }
        }
        true
    }
}

/// An assignment of one projection (a sum of atoms) per context of a
/// diagram, consistent along every inclusion arrow.
#[derive(Clone, Debug)]
pub struct FamilyOfProjections {
    masks: Vec<u64>,
    /// The projection this family was restricted from, when applicable; used
    /// to resolve conjugated contexts that are absent from the diagram.
    origin: Option<Projection>,
}

impl FamilyOfProjections {
    pub fn new(d: &SpatialDiagram, assignment: Vec<Projection>) -> Result<Self, IdealsError> {
        if assignment.len() != d.contexts().len() {
            return Err(IdealsError::UnresolvableContext);
        }
        let masks = assignment
            .iter()
            .zip(d.contexts())
            .map(|(p, c)| c.mask_below(p))
            .collect();
        let fam = FamilyOfProjections { masks, origin: None };
        fam.check_consistency(d)?;
        Ok(fam)
    }

    pub fn from_masks(d: &SpatialDiagram, masks: Vec<u64>) -> Result<Self, IdealsError> {
        let fam = FamilyOfProjections { masks, origin: None };
        fam.check_consistency(d)?;
        Ok(fam)
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn value(&self, d: &SpatialDiagram, ctx: usize) -> Projection {
        d.contexts()[ctx].mask_projection(self.masks[ctx])
    }

    /// Consistency along every inclusion arrow: the source value is the
    /// restriction of the target value.
    pub fn check_consistency(&self, d: &SpatialDiagram) -> Result<(), IdealsError> {
        for (k, a) in d.arrows().iter().enumerate() {
            if !d.is_inclusion_arrow(k) {
                continue;
            }
            let target_value = self.value(d, a.dst);
            let expect = d.contexts()[a.src].mask_below(&target_value);
            if expect != self.masks[a.src] {
                return Err(IdealsError::UnresolvableContext);
            }
        }
        Ok(())
    }

    /// The central projection the family selects at the center context.
    pub fn central_value(&self, d: &SpatialDiagram) -> Projection {
        let center = center_context(&d.algebra);
        let ci = d.find_context(center.key()).expect("diagram carries the center context");
        self.value(d, ci)
    }

    /// True when the family is exactly the restriction family of its own
    /// central value.
    pub fn is_central_generated(&self, d: &SpatialDiagram) -> bool {
        let z = self.central_value(d);
        d.contexts()
            .iter()
            .zip(self.masks.iter())
            .all(|(c, &m)| c.mask_below(&z) == m)
    }
}

/// Restriction family of a projection: at each context, the largest
/// projection of the context below p.
pub fn family_from_projection(p: &Projection, d: &SpatialDiagram) -> FamilyOfProjections {
    let masks = d.contexts().iter().map(|c| c.mask_below(p)).collect();
    FamilyOfProjections { masks, origin: Some(p.clone()) }
}

/// Evidence of a failed invariance or consistency equation; re-evaluating
/// the payload reproduces the violation.
#[derive(Clone, Debug)]
pub enum Witness {
    /// An arrow of the diagram whose invariance equation fails.
    Arrow { src: usize, dst: usize, u: Unitary, lhs: Projection, rhs: Projection },
    /// A supplied unitary u and a context where uΠ(V)u* ≠ Π(uVu*).
    Unitary { context: usize, u: Unitary, lhs: Projection, rhs: Projection },
}

impl Witness {
    pub fn unitary(&self) -> &Unitary {
        match self {
            Witness::Arrow { u, .. } | Witness::Unitary { u, .. } => u,
        }
    }

    /// Recomputes both sides of the violated equation.
    pub fn reverify(&self, d: &SpatialDiagram, fam: &FamilyOfProjections) -> bool {
        let tol = 10.0 * d.algebra.tolerance();
        let (ctx, u) = match self {
            Witness::Arrow { src, u, .. } => (*src, u),
            Witness::Unitary { context, u, .. } => (*context, u),
        };
        match resolve_conjugate(d, fam, ctx, u) {
            Ok(rhs) => {
                let lhs = u.conjugate(fam.value(d, ctx).element());
                !lhs.approx_eq(rhs.element(), tol)
            }
            Err(_) => false,
        }
    }

    pub fn summary(&self) -> WitnessSummary {
        let (kind, context, u, lhs, rhs) = match self {
            Witness::Arrow { src, u, lhs, rhs, .. } => ("arrow", *src, u, lhs, rhs),
            Witness::Unitary { context, u, lhs, rhs } => ("unitary", *context, u, lhs, rhs),
        };
        let _ = u;
        WitnessSummary {
            kind: kind.to_string(),
            context,
            lhs_ranks: rank_profile(lhs).to_string(),
            rhs_ranks: rank_profile(rhs).to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSummary {
    pub kind: String,
    pub context: usize,
    pub lhs_ranks: String,
    pub rhs_ranks: String,
}

/// Value of the family at the conjugated context u·V·u*: directly when that
/// context is present, through the defining restriction rule when the family
/// has an origin projection.
fn resolve_conjugate(
    d: &SpatialDiagram,
    fam: &FamilyOfProjections,
    ctx: usize,
    u: &Unitary,
) -> Result<Projection, IdealsError> {
    let image = d.contexts()[ctx].conjugate(u);
    if let Some(j) = d.find_context(image.key()) {
        return Ok(fam.value(d, j));
    }
    match &fam.origin {
        Some(p) => Ok(image.restrict(p)),
        None => Err(IdealsError::UnresolvableContext),
    }
}

/// Checks u·Π(V)·u* = Π(u·V·u*) along every non-inclusion arrow of the
/// diagram and for every extra unitary against every context.  Returns the
/// first violation as a witness.
pub fn is_invariant(
    fam: &FamilyOfProjections,
    d: &SpatialDiagram,
    extra_unitaries: &[Unitary],
) -> Result<Option<Witness>, IdealsError> {
    let tol = 10.0 * d.algebra.tolerance();
    for (k, a) in d.arrows().iter().enumerate() {
        if d.is_inclusion_arrow(k) {
            continue;
        }
        let lhs = a.u.conjugate(fam.value(d, a.src).element());
        let rhs = resolve_conjugate(d, fam, a.src, &a.u)?;
        if !lhs.approx_eq(rhs.element(), tol) {
            return Ok(Some(Witness::Arrow {
                src: a.src,
                dst: a.dst,
                u: a.u.clone(),
                lhs: Projection::try_new(lhs).expect("conjugate of a projection"),
                rhs,
            }));
        }
    }
    for u in extra_unitaries {
        for ctx in 0..d.contexts().len() {
            let lhs = u.conjugate(fam.value(d, ctx).element());
            let rhs = resolve_conjugate(d, fam, ctx, u)?;
            if !lhs.approx_eq(rhs.element(), tol) {
                return Ok(Some(Witness::Unitary {
                    context: ctx,
                    u: u.clone(),
                    lhs: Projection::try_new(lhs).expect("conjugate of a projection"),
                    rhs,
                }));
            }
        }
    }
    Ok(None)
}

/// All families satisfying the arrow equations of the diagram, ordered by
/// their mask tuples.  Inclusion arrows impose consistency and Ad arrows
/// impose the diagram-restricted invariance condition.
pub fn invariant_family_lattice(d: &SpatialDiagram) -> Result<Vec<FamilyOfProjections>, IdealsError> {
    let n = d.contexts().len();
    // For every arrow precompute, per source atom, the mask of target atoms
    // under its conjugate: the arrow equation reads
    //   mask_src = { t : image_mask[t] ⊆ mask_dst }.
    struct ArrowData {
        src: usize,
        dst: usize,
        image_masks: Vec<u64>,
    }
    let mut arrows: Vec<ArrowData> = Vec::with_capacity(d.arrows().len());
    for a in d.arrows() {
        let image_masks: Vec<u64> = d.contexts()[a.src]
            .atoms()
            .iter()
            .map(|atom| {
                let img = a.u.conjugate_projection(atom);
                d.contexts()[a.dst].mask_below(&img)
            })
            .collect();
        // Drop trivially satisfied self-arrows (identity action).
        if a.src == a.dst
            && image_masks.iter().enumerate().all(|(t, &m)| m == 1 << t)
        {
            continue;
        }
        arrows.push(ArrowData { src: a.src, dst: a.dst, image_masks });
    }
    fn eval(ad: &ArrowData, dst_mask: u64) -> u64 {
        let mut m = 0u64;
        for (t, &im) in ad.image_masks.iter().enumerate() {
            if im & dst_mask == im {
                m |= 1 << t;
            }
        }
        m
    }

    let mut degree = vec![0usize; n];
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, a) in arrows.iter().enumerate() {
        degree[a.src] += 1;
        degree[a.dst] += 1;
        touching[a.src].push(k);
        if a.dst != a.src {
            touching[a.dst].push(k);
        }
    }

    struct Search<'a> {
        d: &'a SpatialDiagram,
        arrows: &'a [ArrowData],
        touching: &'a [Vec<usize>],
        degree: &'a [usize],
        assignment: Vec<Option<u64>>,
        results: Vec<Vec<u64>>,
    }

    impl Search<'_> {
        /// Arrows incident to `var` with both endpoints assigned must hold.
        fn ok_around(&self, var: usize) -> bool {
            self.touching[var].iter().all(|&k| {
                let ad = &self.arrows[k];
                match (self.assignment[ad.src], self.assignment[ad.dst]) {
                    (Some(s), Some(t)) => eval(ad, t) == s,
                    _ => true,
                }
            })
        }

        fn run(&mut self) {
            let forced = self.arrows.iter().find_map(|ad| {
                if self.assignment[ad.src].is_none() {
                    self.assignment[ad.dst].map(|t| (ad.src, eval(ad, t)))
                } else {
                    None
                }
            });
            if let Some((var, value)) = forced {
                self.assignment[var] = Some(value);
                if self.ok_around(var) {
                    self.run();
                }
                self.assignment[var] = None;
                return;
            }
            let next = (0..self.assignment.len())
                .filter(|&i| self.assignment[i].is_none())
                .max_by_key(|&i| (self.degree[i], usize::MAX - i));
            let Some(var) = next else {
                self.results.push(self.assignment.iter().map(|m| m.unwrap()).collect());
                return;
            };
            let size = self.d.contexts()[var].num_atoms();
            for mask in 0..(1u64 << size) {
                self.assignment[var] = Some(mask);
                if self.ok_around(var) {
                    self.run();
                }
            }
            self.assignment[var] = None;
        }
    }

    let mut search = Search {
        d,
        arrows: &arrows,
        touching: &touching,
        degree: &degree,
        assignment: vec![None; n],
        results: Vec::new(),
    };
    search.run();
    let mut results = search.results;
    results.sort();
    results.dedup();
    Ok(results
        .into_iter()
        .map(|masks| FamilyOfProjections { masks, origin: None })
        .collect())
}

/// Enriches the diagram with the orbit-cover contexts of a non-central
/// projection and the connecting Ad arrows, yielding a diagram on which no
/// consistent invariant family can assign q at its own context; returns the
/// concrete violation for the restriction family of q.
pub fn refute_noncentral(
    q: &Projection,
    d: &SpatialDiagram,
) -> Result<(SpatialDiagram, Witness), IdealsError> {
    if q.is_central() {
        return Err(IdealsError::AlreadyCentral);
    }
    let algebra = d.algebra.clone();
    let cover = cover_orbit(q)?;
    let mut enriched = d.clone();
    let iq = enrich_with_projection(&mut enriched, q)?;
    // Members of the cover, with Ad arrows both ways.  A member may share
    // q's context (identity certificates then dedup against the identity
    // arrow); the arrows for genuinely moved members are the constraints
    // that force the family upward.
    for m in &cover.members {
        let im = enrich_with_projection(&mut enriched, m)?;
        let u = unitary_equiv_certificate(m, q)?.expect("members share q's ranks");
        enriched.add_arrow(iq, im, u.clone())?;
        enriched.add_arrow(im, iq, u.adjoint())?;
    }
    // The translated copy dominating the remainder.
    let moved = cover.witness.conjugate_projection(q);
    let imoved = enrich_with_projection(&mut enriched, &moved)?;
    enriched.add_arrow(iq, imoved, cover.witness.clone())?;
    enriched.add_arrow(imoved, iq, cover.witness.adjoint())?;
    // Join contexts carrying the supremum argument.
    let mut commuting = cover.members.clone();
    commuting.push(moved.clone());
    let big = generate_context(&algebra, &commuting, true)?;
    enrich_with_context(&mut enriched, big);
    let sup_ctx = generate_context(&algebra, &[cover.sup.clone(), moved.clone()], true)?;
    enrich_with_context(&mut enriched, sup_ctx);
    enrich_with_projection(&mut enriched, &cover.sup)?;

    let fam = family_from_projection(q, &enriched);
    match is_invariant(&fam, &enriched, &[])? {
        Some(w) => Ok((enriched, w)),
        None => Err(IdealsError::RefutationFailed),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    pub algebra: String,
    pub central_projections: Vec<String>,
    pub invariant_families: usize,
    pub bijection: bool,
    pub rounds: usize,
    pub witnesses: Vec<WitnessSummary>,
}

/// One round cap guard: how many refutation targets to process per round.
const MAX_TARGETS_PER_ROUND: usize = 64;

/// Integer-only view of a diagram's atoms for the saturation hot loop:
/// per-block atom ranks and the expected mask of every central family.
struct MaskInfo {
    center_ctx: usize,
    /// per context, per atom, per block: rank of the atom's block component
    atom_ranks: Vec<Vec<Vec<usize>>>,
    /// per central block pattern, per context: the mask of the restriction
    /// family of that central projection
    central_family: Vec<Vec<u64>>,
}

impl MaskInfo {
    fn new(d: &SpatialDiagram) -> Self {
        let k = d.algebra.num_blocks();
        let atom_ranks: Vec<Vec<Vec<usize>>> = d
            .contexts()
            .iter()
            .map(|c| {
                c.atoms()
                    .iter()
                    .map(|a| {
                        (0..k).map(|b| a.block(b).trace().re.round().max(0.0) as usize).collect()
                    })
                    .collect()
            })
            .collect();
        let central_family: Vec<Vec<u64>> = (0..(1u32 << k))
            .map(|pattern| {
                atom_ranks
                    .iter()
                    .map(|ctx| {
                        let mut mask = 0u64;
                        for (t, ranks) in ctx.iter().enumerate() {
                            let inside = ranks
                                .iter()
                                .enumerate()
                                .all(|(b, &r)| r == 0 || pattern >> b & 1 == 1);
                            if inside {
                                mask |= 1 << t;
                            }
                        }
                        mask
                    })
                    .collect()
            })
            .collect();
        let center_ctx = d
            .find_context(center_context(&d.algebra).key())
            .expect("saturation diagrams carry the center context");
        MaskInfo { center_ctx, atom_ranks, central_family }
    }

    /// Block pattern of the central projection a family selects at the
    /// center context.
    fn central_pattern(&self, fam: &FamilyOfProjections) -> u32 {
        let mut pattern = 0u32;
        let mask = fam.masks()[self.center_ctx];
        for (t, ranks) in self.atom_ranks[self.center_ctx].iter().enumerate() {
            if mask >> t & 1 == 1 {
                for (b, &r) in ranks.iter().enumerate() {
                    if r > 0 {
                        pattern |= 1 << b;
                    }
                }
            }
        }
        pattern
    }

    fn is_central_generated(&self, fam: &FamilyOfProjections) -> bool {
        fam.masks() == self.central_family[self.central_pattern(fam) as usize]
    }

    /// Per-block rank vector of a mask value.
    fn value_ranks(&self, ctx: usize, mask: u64, k: usize) -> Vec<usize> {
        let mut total = vec![0usize; k];
        for (t, ranks) in self.atom_ranks[ctx].iter().enumerate() {
            if mask >> t & 1 == 1 {
                for (b, &r) in ranks.iter().enumerate() {
                    total[b] += r;
                }
            }
        }
        total
    }
}

struct SaturationOutcome {
    diagram: SpatialDiagram,
    families: Vec<FamilyOfProjections>,
    rounds: usize,
    witnesses: Vec<WitnessSummary>,
}

/// The refutation-closure loop: compute the family lattice over an
/// inclusion-only diagram, refute the smallest-rank non-central values that
/// survive, and repeat until only central families remain (or the round cap
/// is exceeded, which is a hard failure).
fn run_saturation(a: &FdAlgebra, max_rounds: usize) -> Result<SaturationOutcome, IdealsError> {
    assert!(max_rounds >= 1);
    let sizes = a.block_sizes().to_vec();
    let k = sizes.len();
    let mut d = build_inclusion_diagram(a, &default_seeds(a))?;
    let mut witnesses = Vec::new();
    let mut refuted: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    for round in 1..=max_rounds {
        let info = MaskInfo::new(&d);
        let families = invariant_family_lattice(&d)?;
        let noncentral: Vec<&FamilyOfProjections> =
            families.iter().filter(|f| !info.is_central_generated(f)).collect();
        if noncentral.is_empty() {
            return Ok(SaturationOutcome { diagram: d, families, rounds: round, witnesses });
        }
        if round == max_rounds {
            return Err(IdealsError::SaturationCapExceeded {
                cap: max_rounds,
                remaining: noncentral.len(),
            });
        }
        // Refutation targets: distinct non-central values of the survivors,
        // smallest total rank first.  The signature of a value is the sorted
        // list of the hashes of the atoms it sums.
        let mut candidates: Vec<(usize, Vec<u64>, usize, u64)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for fam in &noncentral {
            for ctx in 0..d.contexts().len() {
                let mask = fam.masks()[ctx];
                let ranks = info.value_ranks(ctx, mask, k);
                let central = ranks.iter().zip(&sizes).all(|(&r, &n)| r == 0 || r == n);
                if central {
                    continue;
                }
                let mut sig: Vec<u64> = d.contexts()[ctx]
                    .key()
                    .iter()
                    .enumerate()
                    .filter(|&(t, _)| mask >> t & 1 == 1)
                    .map(|(_, &h)| h)
                    .collect();
                sig.sort_unstable();
                if !refuted.contains(&sig) && seen.insert(sig.clone()) {
                    candidates.push((ranks.iter().sum(), sig, ctx, mask));
                }
            }
        }
        candidates.sort();
        let min_rank = candidates.first().map(|(r, ..)| *r).unwrap_or(0);
        let mut taken = 0;
        for (rank, sig, ctx, mask) in candidates {
            if taken >= MAX_TARGETS_PER_ROUND && rank > min_rank {
                break;
            }
            let p = d.contexts()[ctx].mask_projection(mask);
            let (enriched, w) = refute_noncentral(&p, &d)?;
            d = enriched;
            witnesses.push(w.summary());
            refuted.insert(sig);
            taken += 1;
        }
    }
    unreachable!("loop returns or errors at the cap");
}

pub fn saturate(a: &FdAlgebra, max_rounds: usize) -> Result<SaturationReport, IdealsError> {
    let outcome = run_saturation(a, max_rounds)?;
    let k = a.num_blocks();
    let bijection = check_bijection(a, &outcome.diagram, &outcome.families);
    Ok(SaturationReport {
        algebra: a.to_string(),
        central_projections: (0..(1u32 << k))
            .map(|m| (0..k).map(|i| if m >> i & 1 == 1 { '1' } else { '0' }).collect())
            .collect(),
        invariant_families: outcome.families.len(),
        bijection,
        rounds: outcome.rounds,
        witnesses: outcome.witnesses,
    })
}

/// After saturation: exactly 2^k families, each generated by a distinct
/// central projection, with the componentwise order matching inclusion of
/// central supports.
fn check_bijection(a: &FdAlgebra, d: &SpatialDiagram, families: &[FamilyOfProjections]) -> bool {
    let k = a.num_blocks();
    if families.len() != 1 << k {
        return false;
    }
    // Central patterns realized, each exactly once.
    let mut patterns = Vec::new();
    for fam in families {
        let z = fam.central_value(d);
        let ranks = rank_profile(&z);
        let pattern: Vec<bool> = ranks
            .0
            .iter()
            .zip(a.block_sizes())
            .map(|(&r, &n)| {
                debug_assert!(r == 0 || r == n);
                r == n
            })
            .collect();
        patterns.push(pattern);
    }
    let mut sorted = patterns.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != 1 << k {
        return false;
    }
    // Order isomorphism: family order (componentwise masks) must match
    // support inclusion of the central patterns.
    for (i, fi) in families.iter().enumerate() {
        for (j, fj) in families.iter().enumerate() {
            let mask_le =
                fi.masks().iter().zip(fj.masks()).all(|(&x, &y)| x & y == x);
            let pat_le = patterns[i]
                .iter()
                .zip(patterns[j].iter())
                .all(|(&x, &y)| !x || y);
            if mask_le != pat_le {
                return false;
            }
        }
    }
    true
}

/// The family lattice of the saturated diagram, together with the diagram.
pub fn saturated_family_lattice(
    a: &FdAlgebra,
    max_rounds: usize,
) -> Result<(SpatialDiagram, Vec<FamilyOfProjections>), IdealsError> {
    let outcome = run_saturation(a, max_rounds)?;
    Ok((outcome.diagram, outcome.families))
}
