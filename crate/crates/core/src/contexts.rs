//! Contexts (commutative subalgebras given by their atoms), finite Gel'fand
//! spectra, morphisms restricted from inner automorphisms, and finite spatial
//! diagrams of contexts.

use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::linalg::{C64, CMatrix};
use crate::algebra::rank_profile;
use crate::algebra::{AlgElement, AlgebraError, FdAlgebra, Projection, Unitary};
use crate::diagcat::{DiagramSet, SetArrow};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("generators do not commute (commutator norm {norm:.3e})")]
    NonCommutingGenerators { norm: f64 },
    #[error("atoms do not partition the identity")]
    NotAPartition,
    #[error("morphism does not map source atoms into sums of target atoms (atom {atom})")]
    InvalidMorphism { atom: usize },
    #[error("no single atom of the source dominates target atom {atom}")]
    NoDominatingAtom { atom: usize },
    #[error("arrow endpoint out of range")]
    BadArrowIndex,
}

fn round6(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

/// Stable 64-bit FNV-1a hash of the rounded matrix entries of an element.
/// Used as a canonical point identity for spectra; stable across runs.
pub fn atom_hash(e: &AlgElement) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for b in e.blocks() {
        eat(&(b.nrows() as u64).to_le_bytes());
        for z in b.iter() {
            eat(&round6(z.re).to_le_bytes());
            eat(&round6(z.im).to_le_bytes());
        }
    }
    h
}

/// Per-block rank of a validated projection by trace, avoiding an
/// eigendecomposition on the hot paths.
fn trace_ranks(p: &Projection) -> Vec<usize> {
    p.blocks().iter().map(|b| b.trace().re.round().max(0.0) as usize).collect()
}

fn atom_sort_key(p: &Projection) -> (Vec<usize>, Vec<(i64, i64)>) {
    let entries = p
        .blocks()
        .iter()
        .flat_map(|b| b.iter().map(|z| (round6(z.re), round6(z.im))))
        .collect();
    (trace_ranks(p), entries)
}

/// Snap a near-projection to an exact one through its spectral decomposition,
/// keeping the eigenspaces above 1/2.
fn snap_projection(e: &AlgElement) -> Projection {
    let blocks: Vec<CMatrix> = e
        .blocks()
        .iter()
        .map(|b| {
            let (vals, basis) = crate::algebra::linalg::eig_hermitian_desc(b);
            let r = vals.iter().filter(|&&v| v > 0.5).count();
            let range = basis.columns(0, r).into_owned();
            &range * range.adjoint()
        })
        .collect();
    Projection::try_new(AlgElement::from_blocks(e.parent().clone(), blocks).expect("same shapes"))
        .expect("spectral truncation is a projection")
}

/// A commutative subalgebra, stored as its minimal projections (atoms) in
/// canonical order.
#[derive(Clone, Debug)]
pub struct Context {
    parent: FdAlgebra,
    atoms: Vec<Projection>,
    hashes: Vec<u64>,
}

impl Context {
    pub fn new(parent: FdAlgebra, mut atoms: Vec<Projection>) -> Result<Self, ContextError> {
        let tol = parent.tolerance();
        if atoms.is_empty() {
            return Err(ContextError::NotAPartition);
        }
        atoms.sort_by_cached_key(atom_sort_key);
        let mut sum = parent.zero();
        for (i, a) in atoms.iter().enumerate() {
            if a.is_zero() {
                return Err(ContextError::NotAPartition);
            }
            for b in atoms.iter().skip(i + 1) {
                if !a.orthogonal_to(b, 10.0 * tol) {
                    return Err(ContextError::NotAPartition);
                }
            }
            sum = sum.add(a.element());
        }
        if !sum.approx_eq(&parent.identity(), 10.0 * tol) {
            return Err(ContextError::NotAPartition);
        }
        let hashes = atoms.iter().map(|a| atom_hash(a.element())).collect();
        Ok(Context { parent, atoms, hashes })
    }

    pub fn parent(&self) -> &FdAlgebra {
        &self.parent
    }

    pub fn atoms(&self) -> &[Projection] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Ordered atom hashes; equal keys mean equal contexts.
    pub fn key(&self) -> &[u64] {
        &self.hashes
    }

    /// Largest projection of the context below p: the sum of the atoms
    /// dominated by p.
    pub fn restrict(&self, p: &Projection) -> Projection {
        self.mask_projection(self.mask_below(p))
    }

    /// Atom subset dominated by p, as a bitmask.
    pub fn mask_below(&self, p: &Projection) -> u64 {
        let tol = 10.0 * self.parent.tolerance();
        let mut mask = 0u64;
        for (i, a) in self.atoms.iter().enumerate() {
            if a.leq(p, tol) {
                mask |= 1 << i;
            }
        }
        mask
    }

    /// Sum of the atoms selected by a bitmask.
    pub fn mask_projection(&self, mask: u64) -> Projection {
        let mut sum = self.parent.zero();
        for (i, a) in self.atoms.iter().enumerate() {
            if mask >> i & 1 == 1 {
                sum = sum.add(a.element());
            }
        }
        Projection::try_new(sum).expect("sum of orthogonal atoms")
    }

    pub fn conjugate(&self, u: &Unitary) -> Context {
        let atoms = self.atoms.iter().map(|a| u.conjugate_projection(a)).collect();
        Context::new(self.parent.clone(), atoms).expect("conjugation preserves partitions")
    }

    /// other ⊆ self: every atom of other is a sum of atoms of self.  An atom
    /// equals the sum of the atoms it dominates exactly when the ranks agree.
    pub fn contains(&self, other: &Context) -> bool {
        let tol = 10.0 * self.parent.tolerance();
        other.atoms.iter().all(|a| {
            let covered: usize = self
                .atoms
                .iter()
                .filter(|b| b.leq(a, tol))
                .map(|b| trace_ranks(b).iter().sum::<usize>())
                .sum();
            covered == trace_ranks(a).iter().sum::<usize>()
        })
    }
}

/// Atoms of the generated commutative subalgebra: nonzero minimal products
/// over the choices g or g⊥, optionally refined by the central projections.
pub fn generate_context(
    parent: &FdAlgebra,
    generators: &[Projection],
    include_center: bool,
) -> Result<Context, ContextError> {
    let tol = parent.tolerance();
    for (i, p) in generators.iter().enumerate() {
        for q in generators.iter().skip(i + 1) {
            let comm = p.element().mul(q.element()).sub(&q.element().mul(p.element()));
            let norm = comm.max_norm();
            if norm > 100.0 * tol {
                return Err(ContextError::NonCommutingGenerators { norm });
            }
        }
    }
    let mut gens: Vec<Projection> = Vec::new();
    if include_center {
        for i in 0..parent.num_blocks() {
            let pattern: Vec<bool> = (0..parent.num_blocks()).map(|j| j == i).collect();
            gens.push(parent.central_projection(&pattern));
        }
    }
    gens.extend(generators.iter().cloned());

    let mut atoms: Vec<Projection> = vec![Projection::identity(parent)];
    for g in &gens {
        let mut next = Vec::new();
        for a in &atoms {
            let meet = a.element().mul(g.element());
            for part in [meet.clone(), a.element().sub(&meet)] {
                let snapped = snap_projection(&part);
                if !snapped.is_zero() {
                    next.push(snapped);
                }
            }
        }
        atoms = next;
    }
    Context::new(parent.clone(), atoms)
}

/// The context of the central projections.
pub fn center_context(parent: &FdAlgebra) -> Context {
    generate_context(parent, &[], true).expect("center always generates")
}

/// The maximal diagonal context: one atom per diagonal matrix unit.
pub fn maximal_diagonal_context(parent: &FdAlgebra) -> Context {
    let mut atoms = Vec::new();
    for (i, &n) in parent.block_sizes().iter().enumerate() {
        for j in 0..n {
            let blocks: Vec<CMatrix> = parent
                .block_sizes()
                .iter()
                .enumerate()
                .map(|(l, &m)| {
                    let mut b = CMatrix::zeros(m, m);
                    if l == i {
                        b[(j, j)] = C64::new(1.0, 0.0);
                    }
                    b
                })
                .collect();
            atoms.push(
                Projection::try_new(AlgElement::from_blocks(parent.clone(), blocks).unwrap())
                    .unwrap(),
            );
        }
    }
    Context::new(parent.clone(), atoms).expect("diagonal units partition the identity")
}

/// V⟨p⟩: the context generated by p together with the center.
pub fn context_of(algebra: &FdAlgebra, p: &Projection) -> Result<Context, ContextError> {
    generate_context(algebra, std::slice::from_ref(p), true)
}

/// A morphism of contexts: conjugation by u followed by inclusion, i.e.
/// u·V·u* ⊆ V'.
#[derive(Clone, Debug)]
pub struct ContextMorphism {
    pub src: Context,
    pub dst: Context,
    pub u: Unitary,
}

impl ContextMorphism {
    pub fn new(src: Context, dst: Context, u: Unitary) -> Result<Self, ContextError> {
        let m = ContextMorphism { src, dst, u };
        m.validate()?;
        Ok(m)
    }

    /// Every source atom must conjugate to a sum of a subset of target atoms.
    pub fn validate(&self) -> Result<(), ContextError> {
        let tol = 10.0 * self.src.parent().tolerance();
        for (i, a) in self.src.atoms().iter().enumerate() {
            let img = self.u.conjugate_projection(a);
            let covered: usize = self
                .dst
                .atoms()
                .iter()
                .filter(|b| b.leq(&img, tol))
                .map(|b| trace_ranks(b).iter().sum::<usize>())
                .sum();
            if covered != trace_ranks(&img).iter().sum::<usize>() {
                return Err(ContextError::InvalidMorphism { atom: i });
            }
        }
        Ok(())
    }

    pub fn is_inclusion(&self) -> bool {
        let tol = 10.0 * self.src.parent().tolerance();
        self.src.atoms().iter().all(|a| self.u.fixes(a.element(), tol))
    }
}

/// A finite discrete spectrum: one point per atom, identified by the atom's
/// canonical hash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinSpace {
    pub points: Vec<u64>,
}

/// A total map between finite spectra, by point index.
#[derive(Clone, Debug)]
pub struct SpaceMap {
    pub source: FinSpace,
    pub target: FinSpace,
    pub assignment: Vec<usize>,
}

impl SpaceMap {
    /// self ∘ earlier
    pub fn compose_after(&self, earlier: &SpaceMap) -> SpaceMap {
        assert_eq!(earlier.target, self.source);
        SpaceMap {
            source: earlier.source.clone(),
            target: self.target.clone(),
            assignment: earlier.assignment.iter().map(|&i| self.assignment[i]).collect(),
        }
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.target.points.len()];
        for &i in &self.assignment {
            hit[i] = true;
        }
        hit.into_iter().all(|b| b)
    }
}

/// The Gel'fand spectrum of a context: points in canonical atom order.
pub fn spectrum(v: &Context) -> FinSpace {
    FinSpace { points: v.key().to_vec() }
}

/// Contravariant spectrum map of a morphism: a target atom is sent to the
/// unique source atom whose conjugate dominates it.
pub fn spectrum_map(m: &ContextMorphism) -> Result<SpaceMap, ContextError> {
    let tol = 10.0 * m.src.parent().tolerance();
    let images: Vec<Projection> =
        m.src.atoms().iter().map(|a| m.u.conjugate_projection(a)).collect();
    let mut assignment = Vec::with_capacity(m.dst.num_atoms());
    for (qi, q) in m.dst.atoms().iter().enumerate() {
        let found = images.iter().position(|img| q.leq(img, tol));
        match found {
            Some(pi) => assignment.push(pi),
            None => return Err(ContextError::NoDominatingAtom { atom: qi }),
        }
    }
    Ok(SpaceMap { source: spectrum(&m.dst), target: spectrum(&m.src), assignment })
}

/// An arrow of a spatial diagram, referring to contexts by index.
#[derive(Clone, Debug)]
pub struct DiagramArrow {
    pub src: usize,
    pub dst: usize,
    pub u: Unitary,
}

/// A finite diagram of contexts with inclusion and inner-automorphism
/// morphisms, closed under identity arrows.
#[derive(Clone, Debug)]
pub struct SpatialDiagram {
    pub algebra: FdAlgebra,
    contexts: Vec<Context>,
    arrows: Vec<DiagramArrow>,
}

impl SpatialDiagram {
    pub fn new(algebra: FdAlgebra) -> Self {
        SpatialDiagram { algebra, contexts: Vec::new(), arrows: Vec::new() }
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    pub fn arrows(&self) -> &[DiagramArrow] {
        &self.arrows
    }

    pub fn find_context(&self, key: &[u64]) -> Option<usize> {
        self.contexts.iter().position(|c| c.key() == key)
    }

    /// Adds a context (dedup by canonical key) together with its identity
    /// arrow; returns its index.
    pub fn add_context(&mut self, c: Context) -> usize {
        if let Some(i) = self.find_context(c.key()) {
            return i;
        }
        self.contexts.push(c);
        let i = self.contexts.len() - 1;
        self.arrows.push(DiagramArrow { src: i, dst: i, u: Unitary::identity(&self.algebra) });
        i
    }

    /// Adds an arrow after validating the underlying morphism; duplicates
    /// (same endpoints, same unitary up to tolerance) are collapsed.  Returns
    /// the arrow index.
    pub fn add_arrow(&mut self, src: usize, dst: usize, u: Unitary) -> Result<usize, ContextError> {
        if src >= self.contexts.len() || dst >= self.contexts.len() {
            return Err(ContextError::BadArrowIndex);
        }
        let tol = 10.0 * self.algebra.tolerance();
        if let Some(k) = self
            .arrows
            .iter()
            .position(|a| a.src == src && a.dst == dst && a.u.element().approx_eq(u.element(), tol))
        {
            return Ok(k);
        }
        ContextMorphism::new(self.contexts[src].clone(), self.contexts[dst].clone(), u.clone())?;
        self.arrows.push(DiagramArrow { src, dst, u });
        Ok(self.arrows.len() - 1)
    }

    pub fn morphism(&self, k: usize) -> ContextMorphism {
        let a = &self.arrows[k];
        ContextMorphism {
            src: self.contexts[a.src].clone(),
            dst: self.contexts[a.dst].clone(),
            u: a.u.clone(),
        }
    }

    pub fn is_inclusion_arrow(&self, k: usize) -> bool {
        let a = &self.arrows[k];
        let tol = 10.0 * self.algebra.tolerance();
        self.contexts[a.src].atoms().iter().all(|x| a.u.fixes(x.element(), tol))
    }

    pub fn validate(&self) -> Result<(), ContextError> {
        for k in 0..self.arrows.len() {
            self.morphism(k).validate()?;
        }
        let tol = 10.0 * self.algebra.tolerance();
        for i in 0..self.contexts.len() {
            let has_identity = self.arrows.iter().any(|a| {
                a.src == i
                    && a.dst == i
                    && self.contexts[i].atoms().iter().all(|x| a.u.fixes(x.element(), tol))
            });
            if !has_identity {
                return Err(ContextError::BadArrowIndex);
            }
        }
        Ok(())
    }

    /// The full diagonal context, when present.
    pub fn full_diagonal_context(&self) -> Option<usize> {
        let target = maximal_diagonal_context(&self.algebra);
        self.find_context(target.key())
    }

    /// Underlying diagram of spectra as finite sets.  Arrow directions flip:
    /// a context arrow V → V' yields a set map Σ(V') → Σ(V).
    pub fn spectra_set_diagram(&self) -> Result<(Vec<FinSpace>, DiagramSet), ContextError> {
        let spaces: Vec<FinSpace> = self.contexts.iter().map(spectrum).collect();
        let mut arrows = Vec::with_capacity(self.arrows.len());
        for k in 0..self.arrows.len() {
            let a = &self.arrows[k];
            let smap = spectrum_map(&self.morphism(k))?;
            arrows.push(SetArrow { src: a.dst, dst: a.src, map: smap.assignment });
        }
        let sizes = spaces.iter().map(|s| s.points.len()).collect();
        Ok((spaces, DiagramSet { sizes, arrows }))
    }

    /// Deterministic DOT rendering: one node per context labeled with its
    /// atom rank tuples, one edge per arrow labeled "incl" or "Ad".
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph contexts {\n");
        for (i, c) in self.contexts.iter().enumerate() {
            let label: Vec<String> =
                c.atoms().iter().map(|a| rank_profile(a).to_string()).collect();
            let _ = writeln!(out, "  c{} [label=\"{{{}}}\"];", i, label.join(","));
        }
        for (k, a) in self.arrows.iter().enumerate() {
            let kind = if self.is_inclusion_arrow(k) { "incl" } else { "Ad" };
            let _ = writeln!(out, "  c{} -> c{} [label=\"{}\"];", a.src, a.dst, kind);
        }
        out.push_str("}\n");
        out
    }
}

/// Common diagonalizer of a context's atoms: the eigenbasis of a weighted
/// sum of the atoms simultaneously diagonalizes each of them.
fn common_diagonalizer(v: &Context) -> Unitary {
    let parent = v.parent().clone();
    let blocks: Vec<CMatrix> = (0..parent.num_blocks())
        .map(|i| {
            let n = parent.block_sizes()[i];
            let mut h = CMatrix::zeros(n, n);
            for (m, a) in v.atoms().iter().enumerate() {
                h += a.block(i).map(|z| z * C64::new((m + 1) as f64, 0.0));
            }
            let (_, basis) = crate::algebra::linalg::eig_hermitian_desc(&h);
            basis.adjoint()
        })
        .collect();
    Unitary::try_new(AlgElement::from_blocks(parent, blocks).unwrap())
        .expect("eigenbasis adjoint is unitary")
}

fn add_inclusions(d: &mut SpatialDiagram) {
    let n = d.contexts().len();
    for i in 0..n {
        for j in 0..n {
            if i != j && d.contexts()[j].contains(&d.contexts()[i]) {
                let _ = d.add_arrow(i, j, Unitary::identity(&d.algebra));
            }
        }
    }
}

fn add_ad_arrows(d: &mut SpatialDiagram, unitaries: &[Unitary]) {
    let tol = 10.0 * d.algebra.tolerance();
    let vmax = d.full_diagonal_context();
    for u in unitaries {
        for i in 0..d.contexts().len() {
            let fixes_all = d.contexts()[i].atoms().iter().all(|a| u.fixes(a.element(), tol));
            if fixes_all {
                continue;
            }
            let image = d.contexts()[i].conjugate(u);
            if let Some(j) = d.find_context(image.key()) {
                let _ = d.add_arrow(i, j, u.clone());
            } else if let Some(j) = vmax {
                let _ = d.add_arrow(i, j, u.clone());
            }
        }
    }
}

/// Ensures every context is linked into the full diagonal context by some
/// arrow, adding a diagonalizing Ad arrow where no inclusion exists.
fn add_diagonal_links(d: &mut SpatialDiagram) {
    let Some(vmax) = d.full_diagonal_context() else { return };
    for i in 0..d.contexts().len() {
        if i == vmax || d.arrows().iter().any(|a| a.src == i && a.dst == vmax) {
            continue;
        }
        let w = common_diagonalizer(&d.contexts()[i]);
        let _ = d.add_arrow(i, vmax, w);
    }
}

/// The blessed finite stand-in for the full context category: the contexts
/// generated by each seed (with the center), their pairwise-commuting joins,
/// the center, and the full diagonal context; arrows are all inclusions, Ad
/// arrows for the per-block cyclic shift and any extra unitaries, and
/// diagonalizing links into the diagonal context.
pub fn build_core_diagram(
    algebra: &FdAlgebra,
    seeds: &[Projection],
    extra_unitaries: &[Unitary],
) -> Result<SpatialDiagram, ContextError> {
    let mut d = SpatialDiagram::new(algebra.clone());
    d.add_context(center_context(algebra));
    for p in seeds {
        d.add_context(generate_context(algebra, std::slice::from_ref(p), true)?);
    }
    for (i, p) in seeds.iter().enumerate() {
        for q in seeds.iter().skip(i + 1) {
            if let Ok(join) = generate_context(algebra, &[p.clone(), q.clone()], true) {
                d.add_context(join);
            }
        }
    }
    d.add_context(maximal_diagonal_context(algebra));
    add_inclusions(&mut d);
    let mut unitaries = vec![crate::algebra::random::cyclic_shift_unitary(algebra)];
    unitaries.extend(extra_unitaries.iter().cloned());
    add_ad_arrows(&mut d, &unitaries);
    add_diagonal_links(&mut d);
    Ok(d)
}

/// Default seeds for core diagrams: one block-indicator projection per
/// summand, whose contexts carry the K-theory generators.
pub fn default_seeds(algebra: &FdAlgebra) -> Vec<Projection> {
    (0..algebra.num_blocks())
        .map(|i| crate::algebra::random::block_indicator(algebra, i))
        .collect()
}

/// Core diagram over the default seeds.
pub fn core_diagram(algebra: &FdAlgebra) -> Result<SpatialDiagram, ContextError> {
    build_core_diagram(algebra, &default_seeds(algebra), &[])
}

/// Inclusion-only diagram over the same context family as the core diagram;
/// the starting point for the ideals saturation loop, which discovers its
/// own invariance constraints through refutation.
pub fn build_inclusion_diagram(
    algebra: &FdAlgebra,
    seeds: &[Projection],
) -> Result<SpatialDiagram, ContextError> {
    let mut d = SpatialDiagram::new(algebra.clone());
    d.add_context(center_context(algebra));
    for p in seeds {
        d.add_context(generate_context(algebra, std::slice::from_ref(p), true)?);
    }
    d.add_context(maximal_diagonal_context(algebra));
    add_inclusions(&mut d);
    Ok(d)
}

/// Adds the context of a projection (plus inclusions and a diagonal link) to
/// an existing diagram; monotone enrichment, so downstream colimit groups are
/// unchanged.  Returns the context index.
pub fn enrich_with_projection(
    d: &mut SpatialDiagram,
    p: &Projection,
) -> Result<usize, ContextError> {
    let v = context_of(&d.algebra, p)?;
    Ok(enrich_with_context(d, v))
}

/// Adds a fully formed context with the same linking rules, touching only
/// the pairs involving the new context.
pub fn enrich_with_context(d: &mut SpatialDiagram, v: Context) -> usize {
    if let Some(i) = d.find_context(v.key()) {
        return i;
    }
    let idx = d.add_context(v);
    let one = Unitary::identity(&d.algebra);
    for j in 0..idx {
        if d.contexts()[j].contains(&d.contexts()[idx]) {
            let _ = d.add_arrow(idx, j, one.clone());
        }
        if d.contexts()[idx].contains(&d.contexts()[j]) {
            let _ = d.add_arrow(j, idx, one.clone());
        }
    }
    if let Some(vmax) = d.full_diagonal_context() {
        if idx != vmax && !d.arrows().iter().any(|a| a.src == idx && a.dst == vmax) {
            let w = common_diagonalizer(&d.contexts()[idx]);
            let _ = d.add_arrow(idx, vmax, w);
        }
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{block_indicator, cyclic_shift_unitary, haar_unitary, random_projection};
    use crate::algebra::RankTuple;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn alg(spec: &str) -> FdAlgebra {
        spec.parse().unwrap()
    }

    #[test]
    fn generate_context_examples() {
        // Center of M2+M3: two atoms.
        let m23 = alg("M2+M3");
        let c = generate_context(&m23, &[], true).unwrap();
        assert_eq!(c.num_atoms(), 2);
        let mut ranks: Vec<RankTuple> = c.atoms().iter().map(rank_profile).collect();
        ranks.sort();
        assert_eq!(ranks, vec![RankTuple(vec![0, 3]), RankTuple(vec![2, 0])]);

        // S = {e11} in M2: atoms {e11, e22}.
        let m2 = alg("M2");
        let e11 = Projection::from_diag_ranks(&m2, &[1]).unwrap();
        let c = generate_context(&m2, &[e11], false).unwrap();
        assert_eq!(c.num_atoms(), 2);
        assert!(c.atoms().iter().all(|a| rank_profile(a) == RankTuple(vec![1])));

        // Common refinement of two nested diagonal projections in M3.
        let m3 = alg("M3");
        let p1 = Projection::from_diag_ranks(&m3, &[2]).unwrap();
        let p2 = Projection::from_diag_ranks(&m3, &[1]).unwrap();
        let c = generate_context(&m3, &[p1, p2], false).unwrap();
        assert_eq!(c.num_atoms(), 3);

        // Non-commuting generators are rejected.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rot = haar_unitary(&m3, &mut rng)
            .conjugate_projection(&Projection::from_diag_ranks(&m3, &[1]).unwrap());
        let fixed = Projection::from_diag_ranks(&m3, &[1]).unwrap();
        assert!(matches!(
            generate_context(&m3, &[rot, fixed], false),
            Err(ContextError::NonCommutingGenerators { .. })
        ));
    }

    #[test]
    fn generate_context_is_idempotent() {
        let m23 = alg("M2+M3");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_projection(&m23, &mut rng);
            let c = generate_context(&m23, &[p], true).unwrap();
            let again = generate_context(&m23, c.atoms(), false).unwrap();
            assert_eq!(c.key(), again.key());
        }
    }

    #[test]
    fn spectrum_examples() {
        let m3 = alg("M3");
        let trivial = Context::new(m3.clone(), vec![Projection::identity(&m3)]).unwrap();
        assert_eq!(spectrum(&trivial).points.len(), 1);
        assert_eq!(spectrum(&maximal_diagonal_context(&m3)).points.len(), 3);

        let m2 = alg("M2");
        let e11 = Projection::from_diag_ranks(&m2, &[1]).unwrap();
        let c = generate_context(&m2, &[e11], false).unwrap();
        assert_eq!(spectrum(&c).points.len(), 2);
    }

    #[test]
    fn spectrum_map_examples() {
        let m3 = alg("M3");
        let v = maximal_diagonal_context(&m3);
        let m = ContextMorphism::new(v.clone(), v.clone(), Unitary::identity(&m3)).unwrap();
        let s = spectrum_map(&m).unwrap();
        assert_eq!(s.assignment, vec![0, 1, 2]);

        // Inclusion of {e11, 1−e11} into the diagonal of M3: exactly one
        // fine atom restricts to e11, the other two to 1−e11.
        let e11 = Projection::from_diag_ranks(&m3, &[1]).unwrap();
        let coarse = generate_context(&m3, std::slice::from_ref(&e11), false).unwrap();
        let m = ContextMorphism::new(coarse.clone(), v.clone(), Unitary::identity(&m3)).unwrap();
        let s = spectrum_map(&m).unwrap();
        let coarse_of_e11 =
            coarse.atoms().iter().position(|a| a.element().approx_eq(e11.element(), 1e-9));
        let hits = s.assignment.iter().filter(|&&x| Some(x) == coarse_of_e11).count();
        assert_eq!(hits, 1);
        assert_eq!(s.assignment.len(), 3);
        assert!(s.is_surjective());

        // Ad by the swap on the diagonal context of M2 exchanges the points.
        let m2 = alg("M2");
        let swap = cyclic_shift_unitary(&m2);
        let v2 = maximal_diagonal_context(&m2);
        let m = ContextMorphism::new(v2.clone(), v2.clone(), swap).unwrap();
        let s = spectrum_map(&m).unwrap();
        assert_eq!(s.assignment, vec![1, 0]);
    }

    #[test]
    fn core_diagram_m2() {
        let m2 = alg("M2");
        let e11 = Projection::from_diag_ranks(&m2, &[1]).unwrap();
        let d = build_core_diagram(&m2, &[e11], &[]).unwrap();
        assert_eq!(d.contexts().len(), 2);
        let non_identity: Vec<usize> = (0..d.arrows().len())
            .filter(|&k| {
                let a = &d.arrows()[k];
                !(a.src == a.dst && d.is_inclusion_arrow(k))
            })
            .collect();
        // The inclusion {1} ⊆ diagonal and the swap Ad-arrow.
        assert_eq!(non_identity.len(), 2);
        let inclusions = non_identity.iter().filter(|&&k| d.is_inclusion_arrow(k)).count();
        assert_eq!(inclusions, 1);
        d.validate().unwrap();
    }

    #[test]
    fn core_diagram_scalars() {
        let c = alg("C");
        let d = core_diagram(&c).unwrap();
        assert_eq!(d.contexts().len(), 1);
        assert_eq!(d.arrows().len(), 1); // identity only
        d.validate().unwrap();
    }

    #[test]
    fn core_diagram_m2_m3_deterministic_counts() {
        let m23 = alg("M2+M3");
        let d = core_diagram(&m23).unwrap();
        // Frozen replay of the construction: center, two seed contexts,
        // their join, and the full diagonal context are all distinct.
        assert_eq!(d.contexts().len(), 5);
        assert_eq!(d.arrows().len(), 18);
        d.validate().unwrap();
    }

    #[test]
    fn spectrum_maps_are_functorial_on_core_diagrams() {
        let m23 = alg("M2+M3");
        let d = core_diagram(&m23).unwrap();
        let maps: Vec<SpaceMap> =
            (0..d.arrows().len()).map(|k| spectrum_map(&d.morphism(k)).unwrap()).collect();
        let mut checked = 0;
        for (i, a) in d.arrows().iter().enumerate() {
            for (j, b) in d.arrows().iter().enumerate() {
                if a.dst != b.src {
                    continue;
                }
                let u = b.u.compose(&a.u);
                let Ok(comp) = ContextMorphism::new(
                    d.contexts()[a.src].clone(),
                    d.contexts()[b.dst].clone(),
                    u,
                ) else {
                    continue;
                };
                let direct = spectrum_map(&comp).unwrap();
                let chained = maps[i].compose_after(&maps[j]);
                assert_eq!(direct.assignment, chained.assignment);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn inclusion_spectrum_maps_are_surjective() {
        let m23 = alg("M2+M3");
        let d = core_diagram(&m23).unwrap();
        for k in 0..d.arrows().len() {
            if d.is_inclusion_arrow(k) {
                assert!(spectrum_map(&d.morphism(k)).unwrap().is_surjective());
            }
        }
    }

    #[test]
    fn dot_output_is_stable() {
        let m2 = alg("M2");
        let d = core_diagram(&m2).unwrap();
        let a = d.to_dot();
        let b = core_diagram(&m2).unwrap().to_dot();
        assert_eq!(a, b);
        assert!(a.contains("label=\"incl\""));
        assert!(a.contains("label=\"Ad\""));
        assert!(a.starts_with("digraph contexts {"));
    }

    #[test]
    fn enrichment_links_rotated_contexts() {
        let m3 = alg("M3");
        let mut d = core_diagram(&m3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = haar_unitary(&m3, &mut rng).conjugate_projection(&block_indicator(&m3, 0));
        let idx = enrich_with_projection(&mut d, &p).unwrap();
        let vmax = d.full_diagonal_context().unwrap();
        assert!(d.arrows().iter().any(|a| a.src == idx && a.dst == vmax));
        d.validate().unwrap();
    }
}

#[cfg(test)]
mod morphism_error_tests {
    use super::*;
    use crate::algebra::random::haar_unitary;
    use crate::algebra::Projection;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bad_morphism_has_no_dominating_atom() {
        // Hand-built morphism whose unitary does not carry the source into
        // the target: the spectrum map detects the orphaned atom.
        let m2: FdAlgebra = "M2".parse().unwrap();
        let v = maximal_diagonal_context(&m2);
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let u = haar_unitary(&m2, &mut rng);
        let bogus = ContextMorphism { src: v.clone(), dst: v.clone(), u };
        assert!(bogus.validate().is_err());
        assert!(matches!(
            spectrum_map(&bogus),
            Err(ContextError::NoDominatingAtom { .. })
        ));
    }

    #[test]
    fn context_rejects_non_partitions() {
        let m2: FdAlgebra = "M2".parse().unwrap();
        let e11 = Projection::from_diag_ranks(&m2, &[1]).unwrap();
        // Missing mass: atoms do not sum to the identity.
        assert!(matches!(
            Context::new(m2.clone(), vec![e11.clone()]),
            Err(ContextError::NotAPartition)
        ));
        // Overlapping atoms.
        assert!(matches!(
            Context::new(m2.clone(), vec![e11.clone(), e11.clone()]),
            Err(ContextError::NotAPartition)
        ));
    }
}
