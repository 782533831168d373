//! Finite-dimensional C*-algebras as direct sums of complex matrix algebras,
//! with projections, unitaries, homomorphisms, and the comparison machinery
//! for projections (central carriers, partial orthogonality, orbit covers).

pub mod linalg;
pub mod random;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use thiserror::Error;

use crate::diagcat::IntMatrix;
use linalg::{
    approx_eq, eig_hermitian_desc, max_norm, permutation_matrix, range_projector,
    C64, CMatrix,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("invalid algebra spec `{0}`")]
    ParseError(String),
    #[error("algebra must have at least one block of positive size")]
    EmptyAlgebra,
    #[error("element does not satisfy the projection invariants (defect {defect:.3e})")]
    NotAProjection { defect: f64 },
    #[error("element does not satisfy the unitary invariants (defect {defect:.3e})")]
    NotAUnitary { defect: f64 },
    #[error("block shapes do not match the parent algebra")]
    ShapeMismatch,
    #[error("elements belong to different algebras")]
    ParentMismatch,
    #[error("operation requires a nonzero projection")]
    ZeroProjection,
    #[error("homomorphism multiplicities overflow the target block {block}")]
    MultiplicityOverflow { block: usize },
    #[error("operation requires a unital homomorphism")]
    NotUnital,
}

/// A direct sum of complex matrix algebras, given by its block sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct FdAlgebra {
    block_sizes: Vec<usize>,
    tolerance: f64,
}

impl FdAlgebra {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self, AlgebraError> {
        Self::with_tolerance(block_sizes, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(block_sizes: Vec<usize>, tolerance: f64) -> Result<Self, AlgebraError> {
        if block_sizes.is_empty() || block_sizes.contains(&0) || !(tolerance > 0.0) {
            return Err(AlgebraError::EmptyAlgebra);
        }
        Ok(FdAlgebra { block_sizes, tolerance })
    }

    /// The one-block size-1 algebra (the complex numbers).
    pub fn scalars() -> Self {
        FdAlgebra { block_sizes: vec![1], tolerance: DEFAULT_TOLERANCE }
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn set_tolerance(&mut self, tol: f64) {
        assert!(tol > 0.0);
        self.tolerance = tol;
    }

    /// The algebra of m×m matrices over this one: every block size times m.
    pub fn amplification(&self, m: usize) -> FdAlgebra {
        assert!(m >= 1);
        FdAlgebra {
            block_sizes: self.block_sizes.iter().map(|n| n * m).collect(),
            tolerance: self.tolerance,
        }
    }

    pub fn zero(&self) -> AlgElement {
        AlgElement {
            parent: self.clone(),
            blocks: self.block_sizes.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn identity(&self) -> AlgElement {
        AlgElement {
            parent: self.clone(),
            blocks: self.block_sizes.iter().map(|&n| CMatrix::identity(n, n)).collect(),
        }
    }

    /// Central projection supported on the listed blocks.
    pub fn central_projection(&self, blocks: &[bool]) -> Projection {
        assert_eq!(blocks.len(), self.num_blocks());
        let mut e = self.zero();
        for (i, &on) in blocks.iter().enumerate() {
            if on {
                e.blocks[i] = CMatrix::identity(self.block_sizes[i], self.block_sizes[i]);
            }
        }
        Projection(e)
    }
}

impl fmt::Display for FdAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.block_sizes.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("+"))
    }
}

impl FromStr for FdAlgebra {
    type Err = AlgebraError;

    /// Grammar: `M<n>` terms joined by `+`; `C` is an alias for `M1`.
    fn from_str(s: &str) -> Result<Self, AlgebraError> {
        let mut sizes = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            if term == "C" {
                sizes.push(1);
                continue;
            }
            let digits = term
                .strip_prefix('M')
                .ok_or_else(|| AlgebraError::ParseError(s.to_string()))?;
            let n: usize =
                digits.parse().map_err(|_| AlgebraError::ParseError(s.to_string()))?;
            if n == 0 {
                return Err(AlgebraError::ParseError(s.to_string()));
            }
            sizes.push(n);
        }
        FdAlgebra::new(sizes).map_err(|_| AlgebraError::ParseError(s.to_string()))
    }
}

/// A block-diagonal element of a finite-dimensional algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgElement {
    parent: FdAlgebra,
    blocks: Vec<CMatrix>,
}

impl AlgElement {
    pub fn from_blocks(parent: FdAlgebra, blocks: Vec<CMatrix>) -> Result<Self, AlgebraError> {
        if blocks.len() != parent.num_blocks()
            || blocks
                .iter()
                .zip(parent.block_sizes())
                .any(|(b, &n)| b.nrows() != n || b.ncols() != n)
        {
            return Err(AlgebraError::ShapeMismatch);
        }
        Ok(AlgElement { parent, blocks })
    }

    pub fn parent(&self) -> &FdAlgebra {
        &self.parent
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMatrix {
        &self.blocks[i]
    }

    fn same_parent(&self, other: &AlgElement) -> Result<(), AlgebraError> {
        if self.parent == other.parent {
            Ok(())
        } else {
            Err(AlgebraError::ParentMismatch)
        }
    }

    fn zip_blocks(&self, other: &AlgElement, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Self {
        AlgElement {
            parent: self.parent.clone(),
            blocks: self
                .blocks
                .iter()
                .zip(other.blocks.iter())
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &AlgElement) -> AlgElement {
        self.same_parent(other).expect("addition across algebras");
        self.zip_blocks(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &AlgElement) -> AlgElement {
        self.same_parent(other).expect("subtraction across algebras");
        self.zip_blocks(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &AlgElement) -> AlgElement {
        self.same_parent(other).expect("product across algebras");
        self.zip_blocks(other, |a, b| a * b)
    }

    pub fn adjoint(&self) -> AlgElement {
        AlgElement {
            parent: self.parent.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn scale(&self, z: C64) -> AlgElement {
        AlgElement {
            parent: self.parent.clone(),
            blocks: self.blocks.iter().map(|b| b.map(|w| w * z)).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.blocks.iter().map(max_norm).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &AlgElement, tol: f64) -> bool {
        self.parent == other.parent
            && self
                .blocks
                .iter()
                .zip(other.blocks.iter())
                .all(|(a, b)| approx_eq(a, b, tol))
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_norm() <= tol
    }
}

/// A projection: self-adjoint idempotent within the parent tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection(AlgElement);

impl Projection {
    pub fn try_new(e: AlgElement) -> Result<Self, AlgebraError> {
        let tol = e.parent.tolerance();
        let idem = e.mul(&e).sub(&e).max_norm();
        let herm = e.sub(&e.adjoint()).max_norm();
        let defect = idem.max(herm);
        if defect <= tol {
            Ok(Projection(e))
        } else {
            Err(AlgebraError::NotAProjection { defect })
        }
    }

    pub fn zero(parent: &FdAlgebra) -> Self {
        Projection(parent.zero())
    }

    pub fn identity(parent: &FdAlgebra) -> Self {
        Projection(parent.identity())
    }

    /// Diagonal projection with the first `ranks[i]` basis vectors per block.
    pub fn from_diag_ranks(parent: &FdAlgebra, ranks: &[usize]) -> Result<Self, AlgebraError> {
        if ranks.len() != parent.num_blocks()
            || ranks.iter().zip(parent.block_sizes()).any(|(&r, &n)| r > n)
        {
            return Err(AlgebraError::ShapeMismatch);
        }
        let blocks = parent
            .block_sizes()
            .iter()
            .zip(ranks.iter())
            .map(|(&n, &r)| range_projector(n, 0, r))
            .collect();
        Ok(Projection(AlgElement { parent: parent.clone(), blocks }))
    }

    pub fn complement(&self) -> Projection {
        Projection(self.parent().identity().sub(&self.0))
    }

    pub fn element(&self) -> &AlgElement {
        &self.0
    }

    pub fn into_element(self) -> AlgElement {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero(self.parent().tolerance())
    }

    /// True when every block is 0 or the identity (within tolerance).
    pub fn is_central(&self) -> bool {
        let tol = self.parent().tolerance();
        self.0.blocks.iter().zip(self.parent().block_sizes()).all(|(b, &n)| {
            max_norm(b) <= tol || approx_eq(b, &CMatrix::identity(n, n), tol)
        })
    }

    /// p ≤ q, i.e. qp = p within tolerance.  For projections the Frobenius
    /// defect satisfies ‖qp − p‖² = tr(p) − tr(qp), so the test is a pair of
    /// trace sums with no allocated product.
    pub fn leq(&self, other: &Projection, tol: f64) -> bool {
        let mut defect = 0.0;
        for (pb, qb) in self.0.blocks.iter().zip(other.0.blocks.iter()) {
            let n = pb.nrows();
            let mut tr_p = 0.0;
            let mut tr_qp = 0.0;
            for i in 0..n {
                tr_p += pb[(i, i)].re;
                for j in 0..n {
                    tr_qp += (qb[(i, j)] * pb[(j, i)]).re;
                }
            }
            defect += tr_p - tr_qp;
        }
        defect.abs() <= tol
    }

    /// Orthogonality: pq = 0 within tolerance.
    pub fn orthogonal_to(&self, other: &Projection, tol: f64) -> bool {
        self.0.mul(&other.0).max_norm() <= tol
    }

    /// Sum of orthogonal projections, revalidated.
    pub fn orthogonal_sum(&self, other: &Projection) -> Result<Projection, AlgebraError> {
        Projection::try_new(self.0.add(&other.0))
    }
}

impl Deref for Projection {
    type Target = AlgElement;
    fn deref(&self) -> &AlgElement {
        &self.0
    }
}

/// A unitary element: uu* = 1 within the parent tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(AlgElement);

impl Unitary {
    pub fn try_new(e: AlgElement) -> Result<Self, AlgebraError> {
        let tol = e.parent.tolerance();
        let defect = e.mul(&e.adjoint()).sub(&e.parent.identity()).max_norm();
        if defect <= tol {
            Ok(Unitary(e))
        } else {
            Err(AlgebraError::NotAUnitary { defect })
        }
    }

    pub fn identity(parent: &FdAlgebra) -> Self {
        Unitary(parent.identity())
    }

    pub fn from_block_matrices(
        parent: &FdAlgebra,
        blocks: Vec<CMatrix>,
    ) -> Result<Self, AlgebraError> {
        Unitary::try_new(AlgElement::from_blocks(parent.clone(), blocks)?)
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    pub fn element(&self) -> &AlgElement {
        &self.0
    }

    /// u x u*
    pub fn conjugate(&self, x: &AlgElement) -> AlgElement {
        self.0.mul(x).mul(&self.0.adjoint())
    }

    pub fn conjugate_projection(&self, p: &Projection) -> Projection {
        // Conjugation preserves the projection property exactly up to float
        // noise already covered by the tolerance.
        Projection(self.conjugate(&p.0))
    }

    pub fn compose(&self, other: &Unitary) -> Unitary {
        Unitary(self.0.mul(&other.0))
    }

    /// True when conjugation fixes x within tolerance.
    pub fn fixes(&self, x: &AlgElement, tol: f64) -> bool {
        self.conjugate(x).approx_eq(x, tol)
    }
}

impl Deref for Unitary {
    type Target = AlgElement;
    fn deref(&self) -> &AlgElement {
        &self.0
    }
}

/// Per-block ranks of a projection; the complete Murray–von Neumann datum in
/// finite dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RankTuple(pub Vec<usize>);

impl RankTuple {
    pub fn le(&self, other: &RankTuple) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for RankTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Number of eigenvalues above 1/2 in each block; every downstream rank
/// decision routes through this thresholding.
pub fn rank_profile(p: &Projection) -> RankTuple {
    RankTuple(
        p.blocks()
            .iter()
            .map(|b| {
                let (vals, _) = eig_hermitian_desc(b);
                vals.iter().filter(|&&v| v > 0.5).count()
            })
            .collect(),
    )
}

/// Murray–von Neumann equivalence: returns a partial isometry v with
/// p = vv* and q = v*v when the rank profiles agree, and None otherwise.
pub fn mvn_equivalent(p: &Projection, q: &Projection) -> Result<Option<AlgElement>, AlgebraError> {
    p.element().same_parent(q.element())?;
    if rank_profile(p) != rank_profile(q) {
        return Ok(None);
    }
    let blocks = p
        .blocks()
        .iter()
        .zip(q.blocks().iter())
        .map(|(pb, qb)| {
            let (pv, pbasis) = eig_hermitian_desc(pb);
            let (_qv, qbasis) = eig_hermitian_desc(qb);
            let r = pv.iter().filter(|&&v| v > 0.5).count();
            let pr = pbasis.columns(0, r).into_owned();
            let qr = qbasis.columns(0, r).into_owned();
            &pr * qr.adjoint()
        })
        .collect();
    Ok(Some(AlgElement { parent: p.parent().clone(), blocks }))
}

/// Unitary equivalence certificate: u with p = u q u*, built by matching the
/// sorted eigenbases of p and q blockwise.  Exists iff rank profiles agree.
pub fn unitary_equiv_certificate(
    p: &Projection,
    q: &Projection,
) -> Result<Option<Unitary>, AlgebraError> {
    p.element().same_parent(q.element())?;
    if rank_profile(p) != rank_profile(q) {
        return Ok(None);
    }
    let blocks = p
        .blocks()
        .iter()
        .zip(q.blocks().iter())
        .map(|(pb, qb)| {
            let (_, pbasis) = eig_hermitian_desc(pb);
            let (_, qbasis) = eig_hermitian_desc(qb);
            &pbasis * qbasis.adjoint()
        })
        .collect();
    Ok(Some(Unitary(AlgElement { parent: p.parent().clone(), blocks })))
}

/// Smallest central projection above p: the identity on every block where p
/// is nonzero.
pub fn central_carrier(p: &Projection) -> Projection {
    let ranks = rank_profile(p);
    let pattern: Vec<bool> = ranks.0.iter().map(|&r| r > 0).collect();
    p.parent().central_projection(&pattern)
}

/// Central projection z with rank(z·p) ≥ rank(z·q) and rank(z⊥·p) ≤
/// rank(z⊥·q) componentwise: the identity exactly on the blocks where p's
/// rank dominates.
pub fn comparison(p: &Projection, q: &Projection) -> Result<Projection, AlgebraError> {
    p.element().same_parent(q.element())?;
    let rp = rank_profile(p);
    let rq = rank_profile(q);
    let pattern: Vec<bool> = rp.0.iter().zip(rq.0.iter()).map(|(a, b)| a >= b).collect();
    Ok(p.parent().central_projection(&pattern))
}

/// Central z with z·p = z·q and z⊥·p ⊥ z⊥·q, when one exists.  Blockwise:
/// possible iff each block has p = q or pq = 0 (preferring equality).
pub fn partially_orthogonal(
    p: &Projection,
    q: &Projection,
) -> Result<Option<Projection>, AlgebraError> {
    p.element().same_parent(q.element())?;
    let tol = p.parent().tolerance();
    let mut pattern = Vec::with_capacity(p.parent().num_blocks());
    for (pb, qb) in p.blocks().iter().zip(q.blocks().iter()) {
        if approx_eq(pb, qb, tol) {
            pattern.push(true);
        } else if max_norm(&(pb * qb)) <= tol {
            pattern.push(false);
        } else {
            return Ok(None);
        }
    }
    Ok(Some(p.parent().central_projection(&pattern)))
}

/// Output of [`cover_orbit`]: a commuting family from the unitary orbit of q
/// covering as much of the central carrier as possible.
#[derive(Clone, Debug)]
pub struct CoverOrbit {
    /// Pairwise partially orthogonal members, all unitarily equivalent to q;
    /// the first member is q itself.
    pub members: Vec<Projection>,
    /// Supremum of the members.
    pub sup: Projection,
    /// Remainder C(q) − sup, dominated by u q u*.
    pub remainder: Projection,
    /// Witness u with remainder ≤ u q u*.
    pub witness: Unitary,
}

/// Packs ⌊n_i/r_i⌋ orthogonal copies of q per active block, reusing the last
/// copy when a block runs out of orthogonal room, so that the supremum
/// covers all of C(q) except a remainder of rank n_i mod r_i that is carried
/// by one more unitary translate of q.
pub fn cover_orbit(q: &Projection) -> Result<CoverOrbit, AlgebraError> {
    let parent = q.parent().clone();
    let ranks = rank_profile(q);
    if ranks.total() == 0 {
        return Err(AlgebraError::ZeroProjection);
    }
    let sizes = parent.block_sizes().to_vec();
    let k = sizes.len();
    // Per block: eigenbasis of q (w), slot count t_i.
    let mut bases = Vec::with_capacity(k);
    for b in q.blocks() {
        let (_, w) = eig_hermitian_desc(b);
        bases.push(w);
    }
    let slots: Vec<usize> = (0..k)
        .map(|i| if ranks.0[i] > 0 { sizes[i] / ranks.0[i] } else { 0 })
        .collect();
    let copies = slots.iter().copied().max().unwrap_or(0).max(1);

    let member_block = |i: usize, j: usize| -> CMatrix {
        let (n, r) = (sizes[i], ranks.0[i]);
        if r == 0 {
            return CMatrix::zeros(n, n);
        }
        let s = j.min(slots[i] - 1); // reuse the last genuine slot
        let proj = range_projector(n, s * r, (s + 1) * r);
        &bases[i] * proj * bases[i].adjoint()
    };

    let mut members = Vec::with_capacity(copies);
    members.push(q.clone());
    for j in 1..copies {
        let blocks = (0..k).map(|i| member_block(i, j)).collect();
        members.push(Projection(AlgElement { parent: parent.clone(), blocks }));
    }

    let sup_blocks: Vec<CMatrix> = (0..k)
        .map(|i| {
            let (n, r) = (sizes[i], ranks.0[i]);
            if r == 0 {
                return CMatrix::zeros(n, n);
            }
            let proj = range_projector(n, 0, slots[i] * r);
            &bases[i] * proj * bases[i].adjoint()
        })
        .collect();
    let sup = Projection(AlgElement { parent: parent.clone(), blocks: sup_blocks });

    let rem_blocks: Vec<CMatrix> = (0..k)
        .map(|i| {
            let (n, r) = (sizes[i], ranks.0[i]);
            if r == 0 {
                return CMatrix::zeros(n, n);
            }
            let proj = range_projector(n, slots[i] * r, n);
            &bases[i] * proj * bases[i].adjoint()
        })
        .collect();
    let remainder = Projection(AlgElement { parent: parent.clone(), blocks: rem_blocks });

    // Witness unitary: rotate each active block so q's range lands on the
    // last r_i coordinates, which contain the remainder's range.
    let witness_blocks: Vec<CMatrix> = (0..k)
        .map(|i| {
            let (n, r) = (sizes[i], ranks.0[i]);
            if r == 0 {
                return CMatrix::identity(n, n);
            }
            let shift = n - r;
            let sigma: Vec<usize> = (0..n).map(|l| (l + shift) % n).collect();
            let perm = permutation_matrix(&sigma);
            &bases[i] * perm * bases[i].adjoint()
        })
        .collect();
    let witness = Unitary(AlgElement { parent, blocks: witness_blocks });

    Ok(CoverOrbit { members, sup, remainder, witness })
}

/// A *-homomorphism between finite-dimensional algebras, classified by a
/// nonnegative multiplicity matrix plus an intertwining unitary in the
/// target.  Each target block receives a block-diagonal assembly of source
/// blocks (padded with zeros when the multiplicities do not fill it); the
/// map is unital exactly when no padding occurs.
#[derive(Clone, Debug)]
pub struct Hom {
    pub source: FdAlgebra,
    pub target: FdAlgebra,
    /// target blocks × source blocks
    pub multiplicity: Vec<Vec<usize>>,
    pub intertwiner: Unitary,
}

impl Hom {
    pub fn new(
        source: FdAlgebra,
        target: FdAlgebra,
        multiplicity: Vec<Vec<usize>>,
        intertwiner: Unitary,
    ) -> Result<Self, AlgebraError> {
        if multiplicity.len() != target.num_blocks()
            || multiplicity.iter().any(|row| row.len() != source.num_blocks())
        {
            return Err(AlgebraError::ShapeMismatch);
        }
        if intertwiner.parent() != &target {
            return Err(AlgebraError::ParentMismatch);
        }
        for (i, row) in multiplicity.iter().enumerate() {
            let used: usize =
                row.iter().zip(source.block_sizes()).map(|(&m, &n)| m * n).sum();
            if used > target.block_sizes()[i] {
                return Err(AlgebraError::MultiplicityOverflow { block: i });
            }
        }
        Ok(Hom { source, target, multiplicity, intertwiner })
    }

    /// Requires the multiplicities to exactly fill every target block.
    pub fn new_unital(
        source: FdAlgebra,
        target: FdAlgebra,
        multiplicity: Vec<Vec<usize>>,
        intertwiner: Unitary,
    ) -> Result<Self, AlgebraError> {
        let hom = Hom::new(source, target, multiplicity, intertwiner)?;
        if !hom.is_unital() {
            return Err(AlgebraError::NotUnital);
        }
        Ok(hom)
    }

    pub fn identity(algebra: &FdAlgebra) -> Self {
        let k = algebra.num_blocks();
        let mult = (0..k)
            .map(|i| (0..k).map(|j| usize::from(i == j)).collect())
            .collect();
        Hom {
            source: algebra.clone(),
            target: algebra.clone(),
            multiplicity: mult,
            intertwiner: Unitary::identity(algebra),
        }
    }

    pub fn is_unital(&self) -> bool {
        self.multiplicity.iter().enumerate().all(|(i, row)| {
            row.iter()
                .zip(self.source.block_sizes())
                .map(|(&m, &n)| m * n)
                .sum::<usize>()
                == self.target.block_sizes()[i]
        })
    }

    pub fn multiplicity_matrix(&self) -> IntMatrix {
        let rows: Vec<Vec<i64>> = self
            .multiplicity
            .iter()
            .map(|row| row.iter().map(|&m| m as i64).collect())
            .collect();
        IntMatrix::from_rows(&rows)
    }

    /// Applies the homomorphism to an element of the source.
    pub fn apply(&self, a: &AlgElement) -> Result<AlgElement, AlgebraError> {
        if a.parent() != &self.source {
            return Err(AlgebraError::ParentMismatch);
        }
        let blocks: Vec<CMatrix> = self
            .multiplicity
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n = self.target.block_sizes()[i];
                let mut out = CMatrix::zeros(n, n);
                let mut offset = 0;
                for (j, &copies) in row.iter().enumerate() {
                    let nj = self.source.block_sizes()[j];
                    for _ in 0..copies {
                        out.view_mut((offset, offset), (nj, nj)).copy_from(a.block(j));
                        offset += nj;
                    }
                }
                let u = &self.intertwiner.blocks()[i];
                u * out * u.adjoint()
            })
            .collect();
        AlgElement::from_blocks(self.target.clone(), blocks)
    }

    pub fn apply_projection(&self, p: &Projection) -> Result<Projection, AlgebraError> {
        Projection::try_new(self.apply(p.element())?)
    }

    /// Image of a unitary; requires unitality (padding breaks unitarity).
    pub fn apply_unitary(&self, u: &Unitary) -> Result<Unitary, AlgebraError> {
        if !self.is_unital() {
            return Err(AlgebraError::NotUnital);
        }
        Unitary::try_new(self.apply(u.element())?)
    }

    /// Integer action on rank tuples: multiplicity × ranks.
    pub fn transport_ranks(&self, ranks: &RankTuple) -> RankTuple {
        RankTuple(
            self.multiplicity
                .iter()
                .map(|row| row.iter().zip(ranks.0.iter()).map(|(m, r)| m * r).sum())
                .collect(),
        )
    }
}

/// Minimal unitalisation A⁺ ≅ A ⊕ ℂ for unital finite-dimensional A, with
/// the (non-unital) inclusion into the original blocks and the character onto
/// the adjoined block.  The two maps form a short exact sequence on elements.
pub fn unitalisation(a: &FdAlgebra) -> (FdAlgebra, Hom, Hom) {
    let mut sizes = a.block_sizes().to_vec();
    sizes.push(1);
    let plus = FdAlgebra::with_tolerance(sizes, a.tolerance()).expect("valid sizes");
    let k = a.num_blocks();
    let mut incl_mult = vec![vec![0usize; k]; k + 1];
    for (i, row) in incl_mult.iter_mut().enumerate().take(k) {
        row[i] = 1;
    }
    let incl = Hom::new(a.clone(), plus.clone(), incl_mult, Unitary::identity(&plus))
        .expect("inclusion shape");
    let mut char_mult = vec![vec![0usize; k + 1]];
    char_mult[0][k] = 1;
    let scalars = FdAlgebra::with_tolerance(vec![1], a.tolerance()).expect("valid sizes");
    let character = Hom::new_unital(plus.clone(), scalars, char_mult, {
        let s = FdAlgebra::with_tolerance(vec![1], a.tolerance()).unwrap();
        Unitary::identity(&s)
    })
    .expect("character shape");
    (plus, incl, character)
}

#[cfg(test)]
mod tests {
    use super::random::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alg(spec: &str) -> FdAlgebra {
        spec.parse().unwrap()
    }

    fn diag_proj(parent: &FdAlgebra, ranks: &[usize]) -> Projection {
        Projection::from_diag_ranks(parent, ranks).unwrap()
    }

    /// Independent rank oracle: the trace of a projection equals its rank.
    fn trace_ranks(p: &Projection) -> Vec<usize> {
        p.blocks().iter().map(|b| b.trace().re.round() as usize).collect()
    }

    #[test]
    fn spec_parsing() {
        assert_eq!(alg("M2+M3").block_sizes(), &[2, 3]);
        assert_eq!(alg("C").block_sizes(), &[1]);
        assert_eq!(alg("M2+C+M1").block_sizes(), &[2, 1, 1]);
        assert!("M0+M2".parse::<FdAlgebra>().is_err());
        assert!("Q3".parse::<FdAlgebra>().is_err());
        assert!("".parse::<FdAlgebra>().is_err());
        assert_eq!(alg("M2+M3").to_string(), "M2+M3");
    }

    #[test]
    fn rank_profile_examples() {
        let m3 = alg("M3");
        assert_eq!(rank_profile(&Projection::identity(&m3)), RankTuple(vec![3]));
        let m22 = alg("M2+M2");
        assert_eq!(rank_profile(&Projection::zero(&m22)), RankTuple(vec![0, 0]));
        let m23 = alg("M2+M3");
        let p = diag_proj(&m23, &[1, 2]);
        assert_eq!(rank_profile(&p), RankTuple(vec![1, 2]));
        assert_eq!(trace_ranks(&p), vec![1, 2]);
        // Rank decisions survive Haar conjugation.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = haar_unitary(&m23, &mut rng);
        assert_eq!(rank_profile(&u.conjugate_projection(&p)), RankTuple(vec![1, 2]));
    }

    #[test]
    fn projection_invariants_are_enforced() {
        let m2 = alg("M2");
        let mut e = m2.identity();
        e.blocks[0][(0, 1)] = C64::new(0.5, 0.0);
        assert!(matches!(
            Projection::try_new(e),
            Err(AlgebraError::NotAProjection { .. })
        ));
    }

    #[test]
    fn mvn_examples() {
        let m2 = alg("M2");
        let p = diag_proj(&m2, &[1]);
        // Reflexivity: the certificate reconstructs p.
        let v = mvn_equivalent(&p, &p).unwrap().unwrap();
        assert!(v.approx_eq(p.element(), 1e-9));

        // e11 vs e22: the certificate is the matrix unit e12 up to phase.
        let e11 = diag_proj(&m2, &[1]);
        let e22 = e11.complement();
        let v = mvn_equivalent(&e11, &e22).unwrap().unwrap();
        assert!(v.mul(&v.adjoint()).approx_eq(e11.element(), 1e-9));
        assert!(v.adjoint().mul(&v).approx_eq(e22.element(), 1e-9));
        assert!((v.block(0)[(0, 1)].norm() - 1.0).abs() < 1e-9);
        assert!(v.block(0)[(0, 0)].norm() < 1e-9);
        assert!(v.block(0)[(1, 1)].norm() < 1e-9);
        assert!(v.block(0)[(1, 0)].norm() < 1e-9);

        // Rank obstruction in M3; independent oracle: a partial isometry
        // forces tr(p) = tr(vv*) = tr(v*v) = tr(q), but the traces differ.
        let m3 = alg("M3");
        let p1 = diag_proj(&m3, &[1]);
        let p2 = diag_proj(&m3, &[2]);
        assert!((p1.trace().re - 1.0).abs() < 1e-12);
        assert!((p2.trace().re - 2.0).abs() < 1e-12);
        assert!(mvn_equivalent(&p1, &p2).unwrap().is_none());
    }

    #[test]
    fn unitary_equivalence_examples() {
        let m2 = alg("M2");
        let p = diag_proj(&m2, &[1]);
        let u = unitary_equiv_certificate(&p, &p).unwrap().unwrap();
        assert!(u.conjugate(p.element()).approx_eq(p.element(), 1e-9));

        let e11 = diag_proj(&m2, &[1]);
        let e22 = e11.complement();
        let u = unitary_equiv_certificate(&e11, &e22).unwrap().unwrap();
        assert!(u.conjugate(e22.element()).approx_eq(e11.element(), 1e-9));
        // Swap shape: off-diagonal moduli one, diagonal zero.
        assert!((u.block(0)[(0, 1)].norm() - 1.0).abs() < 1e-9);
        assert!((u.block(0)[(1, 0)].norm() - 1.0).abs() < 1e-9);
        assert!(u.block(0)[(0, 0)].norm() < 1e-9);

        // Per-summand rank invariance blocks cross-summand equivalence.
        let m22 = alg("M2+M2");
        let a = diag_proj(&m22, &[1, 0]);
        let b = diag_proj(&m22, &[0, 1]);
        assert!(unitary_equiv_certificate(&a, &b).unwrap().is_none());
    }

    /// Oracle for the central carrier: the infimum of all central
    /// projections dominating p, found by enumerating block patterns.
    fn central_carrier_oracle(p: &Projection) -> Vec<bool> {
        let k = p.parent().num_blocks();
        let tol = p.parent().tolerance();
        let mut best = vec![true; k];
        for mask in 0..(1u32 << k) {
            let pattern: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            let z = p.parent().central_projection(&pattern);
            if p.leq(&z, 10.0 * tol) {
                for i in 0..k {
                    best[i] &= pattern[i];
                }
            }
        }
        best
    }

    #[test]
    fn central_carrier_examples() {
        let m2 = alg("M2");
        assert!(central_carrier(&Projection::zero(&m2)).is_zero());
        let e11 = diag_proj(&m2, &[1]);
        assert!(central_carrier(&e11).element().approx_eq(&m2.identity(), 1e-12));

        let m23 = alg("M2+M3");
        let p = diag_proj(&m23, &[1, 0]);
        let c = central_carrier(&p);
        assert_eq!(rank_profile(&c), RankTuple(vec![2, 0]));
        assert_eq!(central_carrier_oracle(&p), vec![true, false]);
    }

    #[test]
    fn comparison_examples() {
        let m3 = alg("M3");
        let p = diag_proj(&m3, &[1]);
        let z = comparison(&p, &p).unwrap();
        assert!(z.element().approx_eq(&m3.identity(), 1e-12));

        let q = diag_proj(&m3, &[2]);
        let z = comparison(&p, &q).unwrap();
        assert!(z.is_zero());

        let m32 = alg("M3+M2");
        let p = diag_proj(&m32, &[2, 0]);
        let q = diag_proj(&m32, &[1, 1]);
        let z = comparison(&p, &q).unwrap();
        assert_eq!(rank_profile(&z), RankTuple(vec![3, 0]));
    }

    fn comparison_postconditions(p: &Projection, q: &Projection) -> bool {
        let z = comparison(p, q).unwrap();
        let zc = z.complement();
        let zp = rank_profile(&Projection::try_new(z.element().mul(p.element())).unwrap());
        let zq = rank_profile(&Projection::try_new(z.element().mul(q.element())).unwrap());
        let cp = rank_profile(&Projection::try_new(zc.element().mul(p.element())).unwrap());
        let cq = rank_profile(&Projection::try_new(zc.element().mul(q.element())).unwrap());
        zq.le(&zp) && cp.le(&cq)
    }

    #[test]
    fn comparison_postconditions_hold_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_algebra(&mut rng, 3, 4);
            let u = haar_unitary(&a, &mut rng);
            let p = u.conjugate_projection(&random_projection(&a, &mut rng));
            let q = u.conjugate_projection(&random_projection(&a, &mut rng));
            assert!(comparison_postconditions(&p, &q));
        }
    }

    #[test]
    fn partial_orthogonality_examples() {
        let m2 = alg("M2");
        let p = diag_proj(&m2, &[1]);
        let z = partially_orthogonal(&p, &p).unwrap().unwrap();
        assert!(z.element().approx_eq(&m2.identity(), 1e-12));

        let q = p.complement();
        let z = partially_orthogonal(&p, &q).unwrap().unwrap();
        assert!(z.is_zero());

        let m22 = alg("M2+M2");
        let p = diag_proj(&m22, &[1, 1]); // e11 ⊕ e11
        let mut qe = p.element().clone();
        qe.blocks[1] = range_projector(2, 1, 2); // e11 ⊕ e22
        let q = Projection::try_new(qe).unwrap();
        let z = partially_orthogonal(&p, &q).unwrap().unwrap();
        assert_eq!(rank_profile(&z), RankTuple(vec![2, 0]));

        // Postconditions.
        let tol = 1e-9;
        assert!(z.element().mul(p.element()).approx_eq(&z.element().mul(q.element()), tol));
        let zc = z.complement();
        let a = zc.element().mul(p.element());
        let b = zc.element().mul(q.element());
        assert!(a.mul(&b).max_norm() <= tol);

        // Non-commuting inputs return none.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_unitary(&m2, &mut rng);
        let rotated = u.conjugate_projection(&diag_proj(&m2, &[1]));
        assert!(partially_orthogonal(&diag_proj(&m2, &[1]), &rotated).unwrap().is_none());
    }

    #[test]
    fn partial_orthogonality_symmetry_and_splicing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let a = random_algebra(&mut rng, 3, 3);
            let ps = random_commuting_projections(&a, 2, &mut rng);
            let fwd = partially_orthogonal(&ps[0], &ps[1]).unwrap();
            let bwd = partially_orthogonal(&ps[1], &ps[0]).unwrap();
            assert_eq!(fwd.is_some(), bwd.is_some());
        }
        // Splicing: pairs partially orthogonal on z and on z⊥ separately are
        // partially orthogonal outright.  Build blockwise: on each block make
        // the pair equal or orthogonal, choosing independently per block.
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let a = random_algebra(&mut rng, 3, 4);
            let u = haar_unitary(&a, &mut rng);
            let mut pb = Vec::new();
            let mut qb = Vec::new();
            for &n in a.block_sizes() {
                let r = rng.random_range(0..=n / 2);
                let p_block = range_projector(n, 0, r);
                if rng.random_bool(0.5) {
                    qb.push(p_block.clone()); // equal on this block
                } else {
                    qb.push(range_projector(n, r, (2 * r).min(n))); // orthogonal
                }
                pb.push(p_block);
            }
            let p = u.conjugate_projection(
                &Projection::try_new(AlgElement::from_blocks(a.clone(), pb).unwrap()).unwrap(),
            );
            let q = u.conjugate_projection(
                &Projection::try_new(AlgElement::from_blocks(a.clone(), qb).unwrap()).unwrap(),
            );
            assert!(partially_orthogonal(&p, &q).unwrap().is_some());
        }
    }

    /// Supremum oracle for commuting projections: p ∨ q = p + q − pq.
    fn sup_commuting(ps: &[Projection]) -> Projection {
        let mut s = Projection::zero(ps[0].parent());
        for p in ps {
            let e = s.element().add(p.element()).sub(&s.element().mul(p.element()));
            s = Projection::try_new(e).unwrap();
        }
        s
    }

    fn check_cover(q: &Projection) {
        let cover = cover_orbit(q).unwrap();
        let tol = 1e-7;
        let rq = rank_profile(q);
        // q is the first member; members share q's ranks and are pairwise
        // partially orthogonal.
        assert!(cover.members[0].element().approx_eq(q.element(), tol));
        for m in &cover.members {
            assert_eq!(rank_profile(m), rq);
        }
        for i in 0..cover.members.len() {
            for j in i + 1..cover.members.len() {
                assert!(
                    partially_orthogonal(&cover.members[i], &cover.members[j])
                        .unwrap()
                        .is_some(),
                    "members {i},{j} not partially orthogonal"
                );
            }
        }
        // sup and remainder.
        assert!(cover.sup.element().approx_eq(sup_commuting(&cover.members).element(), tol));
        let expected_rem = central_carrier(q).element().sub(cover.sup.element());
        assert!(cover.remainder.element().approx_eq(&expected_rem, tol));
        // remainder ≤ u q u*.
        let uqu = cover.witness.conjugate(q.element());
        assert!(uqu.mul(cover.remainder.element()).approx_eq(cover.remainder.element(), tol));
    }

    #[test]
    fn cover_orbit_examples() {
        let m2 = alg("M2");
        let one = Projection::identity(&m2);
        let cover = cover_orbit(&one).unwrap();
        assert_eq!(cover.members.len(), 1);
        assert!(cover.sup.element().approx_eq(&m2.identity(), 1e-12));
        assert!(cover.remainder.is_zero());
        check_cover(&one);

        // Rank 2 in M5: two copies, sup rank 4, remainder rank 1.
        let m5 = alg("M5");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_projection_with_ranks(&m5, &[2], &mut rng);
        let cover = cover_orbit(&q).unwrap();
        assert_eq!(cover.members.len(), 2);
        assert_eq!(rank_profile(&cover.sup), RankTuple(vec![4]));
        assert_eq!(rank_profile(&cover.remainder), RankTuple(vec![1]));
        check_cover(&q);

        // Ranks (1,2) in M2+M3: the size-3 block cannot hold two orthogonal
        // rank-2 projections, so the second member reuses the same block.
        let m23 = alg("M2+M3");
        let q = diag_proj(&m23, &[1, 2]);
        let cover = cover_orbit(&q).unwrap();
        assert_eq!(cover.members.len(), 2);
        assert_eq!(rank_profile(&cover.sup), RankTuple(vec![2, 2]));
        assert_eq!(rank_profile(&cover.remainder), RankTuple(vec![0, 1]));
        assert!(cover.members[0]
            .block(1)
            .clone()
            .eq(cover.members[1].block(1)));
        check_cover(&q);

        // Zero projection is rejected.
        assert!(matches!(
            cover_orbit(&Projection::zero(&m2)),
            Err(AlgebraError::ZeroProjection)
        ));
    }

    #[test]
    fn cover_orbit_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let a = random_algebra(&mut rng, 3, 6);
            let q = random_projection(&a, &mut rng);
            if rank_profile(&q).total() == 0 {
                continue;
            }
            check_cover(&q);
        }
    }

    #[test]
    fn unitalisation_examples() {
        // The (a, z) multiplication law transported through the embedding
        // (a, z) ↦ ι(a) + z·1 must agree with the direct-sum product.
        let check_law = |a: &FdAlgebra, seed: u64| {
            let (plus, incl, character) = unitalisation(a);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let embed = |x: &AlgElement, z: C64| -> AlgElement {
                incl.apply(x).unwrap().add(&plus.identity().scale(z))
            };
            for _ in 0..10 {
                let x = random_density(a, &mut rng).scale(C64::new(3.0, 1.0));
                let y = random_density(a, &mut rng).scale(C64::new(-1.0, 2.0));
                let (zx, zy) = (C64::new(0.5, -1.5), C64::new(2.0, 0.25));
                // law: (x, zx)(y, zy) = (xy + zy·x + zx·y, zx·zy)
                let law_first =
                    x.mul(&y).add(&x.scale(zy)).add(&y.scale(zx));
                let lhs = embed(&law_first, zx * zy);
                let rhs = embed(&x, zx).mul(&embed(&y, zy));
                assert!(lhs.approx_eq(&rhs, 1e-8));
                // The character reads off the adjoined coordinate.
                let img = character.apply(&embed(&x, zx)).unwrap();
                assert!((img.block(0)[(0, 0)] - zx).norm() < 1e-9);
            }
        };
        check_law(&alg("C"), 1);
        check_law(&alg("M2"), 2);

        let (plus, incl, character) = unitalisation(&alg("M2"));
        assert_eq!(plus.block_sizes(), &[2, 1]);
        assert!(!incl.is_unital());
        assert!(character.is_unital());
        // Exactness on elements: the character kills the included copy.
        let m2 = alg("M2");
        let x = m2.identity();
        let through = character.apply(&incl.apply(&x).unwrap()).unwrap();
        assert!(through.max_norm() < 1e-12);
    }

    #[test]
    fn hom_application_examples() {
        let m2 = alg("M2");
        // Identity hom.
        let id = Hom::identity(&m2);
        let e11 = diag_proj(&m2, &[1]);
        assert!(id.apply(e11.element()).unwrap().approx_eq(e11.element(), 1e-12));

        // Multiplicity-2 embedding M2 -> M4 doubles ranks.
        let m4 = alg("M4");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = haar_unitary(&m4, &mut rng);
        let phi = Hom::new_unital(m2.clone(), m4.clone(), vec![vec![2]], u).unwrap();
        let img = phi.apply_projection(&e11).unwrap();
        assert_eq!(rank_profile(&img), RankTuple(vec![2]));
        assert_eq!(phi.transport_ranks(&rank_profile(&e11)), RankTuple(vec![2]));
        // Unitality: the identity maps to the identity.
        assert!(phi.apply(&m2.identity()).unwrap().approx_eq(&m4.identity(), 1e-9));

        // A hom into M2+C that ignores one source block still transports
        // ranks by the multiplicity matrix.
        let src = alg("M1+M2");
        let dst = alg("M2+C");
        let u = haar_unitary(&dst, &mut rng);
        let phi = Hom::new_unital(
            src.clone(),
            dst.clone(),
            vec![vec![0, 1], vec![1, 0]],
            u,
        )
        .unwrap();
        let p = diag_proj(&src, &[1, 1]);
        let img = phi.apply_projection(&p).unwrap();
        assert_eq!(rank_profile(&img), RankTuple(vec![1, 1]));
        assert_eq!(phi.transport_ranks(&RankTuple(vec![1, 1])), RankTuple(vec![1, 1]));
        assert_eq!(phi.transport_ranks(&RankTuple(vec![0, 2])), RankTuple(vec![2, 0]));
    }

    #[test]
    fn rank_transport_identity_on_random_homs() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let a = random_algebra(&mut rng, 2, 3);
            let (_b, phi) = random_unital_hom(&a, &mut rng, 2, 2);
            let p = random_projection(&a, &mut rng);
            let img = phi.apply_projection(&p).unwrap();
            assert_eq!(rank_profile(&img), phi.transport_ranks(&rank_profile(&p)));
        }
    }

    #[test]
    fn unitary_certificate_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..40 {
            let a = random_algebra(&mut rng, 3, 4);
            let ranks: Vec<usize> =
                a.block_sizes().iter().map(|&n| rng.random_range(0..=n)).collect();
            let p = random_projection_with_ranks(&a, &ranks, &mut rng);
            let q = random_projection_with_ranks(&a, &ranks, &mut rng);
            let u = unitary_equiv_certificate(&p, &q).unwrap().expect("equal ranks");
            let diff = p.element().sub(&u.conjugate(q.element())).max_norm();
            assert!(diff <= 10.0 * a.tolerance(), "defect {diff}");
        }
    }

    #[test]
    fn amplification_realizes_matrix_semigroup_addition() {
        // Orthogonal direct sums inside M2(A) add rank tuples.
        let a = alg("M2+M3");
        let amp = a.amplification(2);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let p = random_projection_with_ranks(&a, &[1, 2], &mut rng);
        let q = random_projection_with_ranks(&a, &[1, 0], &mut rng);
        let blocks: Vec<CMatrix> = (0..a.num_blocks())
            .map(|i| {
                let n = a.block_sizes()[i];
                let mut big = CMatrix::zeros(2 * n, 2 * n);
                big.view_mut((0, 0), (n, n)).copy_from(p.block(i));
                big.view_mut((n, n), (n, n)).copy_from(q.block(i));
                big
            })
            .collect();
        let sum =
            Projection::try_new(AlgElement::from_blocks(amp, blocks).unwrap()).unwrap();
        assert_eq!(rank_profile(&sum), RankTuple(vec![2, 2]));
    }
}
