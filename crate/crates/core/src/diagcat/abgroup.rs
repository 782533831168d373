//! Finitely presented abelian groups in invariant-factor form.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::intmat::{smith_normal_form, IntMatrix};

/// A presentation: `num_generators` generators modulo the rows of `relations`.
#[derive(Clone, Debug)]
pub struct AbPresentation {
    pub num_generators: usize,
    pub relations: IntMatrix,
}

impl AbPresentation {
    pub fn new(num_generators: usize, relations: IntMatrix) -> Self {
        assert_eq!(relations.cols(), num_generators, "relation width must match generator count");
        AbPresentation { num_generators, relations }
    }

    pub fn free(num_generators: usize) -> Self {
        AbPresentation { num_generators, relations: IntMatrix::zeros(0, num_generators) }
    }
}

/// An abelian group in canonical form.
///
/// `invariant_factors` lists the torsion factors (each ≥ 2, divisibility
/// chained) followed by zeros, one per free rank.  `generator_images` writes
/// the original presentation generators in these canonical coordinates, one
/// column per generator; `canonical_lifts` goes the other way, giving for
/// each canonical generator an explicit word in the presentation generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbGroup {
    pub invariant_factors: Vec<BigInt>,
    pub generator_images: IntMatrix,
    pub canonical_lifts: IntMatrix,
}

impl AbGroup {
    /// Quotient of ℤ^n by the rows of the presentation's relation matrix.
    pub fn from_presentation(p: &AbPresentation) -> Self {
        let n = p.num_generators;
        let snf = smith_normal_form(&p.relations);
        let diag = snf.diagonal();
        // Canonical coordinates are y = v⁻¹·x; coordinate i is killed when
        // d_i = 1, cyclic of order d_i when d_i ≥ 2, free when d_i = 0/absent.
        let mut torsion = Vec::new();
        let mut torsion_rows = Vec::new();
        let mut free_rows = Vec::new();
        for i in 0..n {
            let di = diag.get(i).cloned().unwrap_or_else(BigInt::zero);
            if di.is_zero() {
                free_rows.push(i);
            } else if !is_one_abs(&di) {
                torsion.push(di);
                torsion_rows.push(i);
            }
        }
        let mut keep = torsion_rows;
        keep.extend(free_rows);
        // The relation lattice becomes ⊕ d_i·ℤ in the coordinates y = vᵀ·x,
        // so generator g has canonical coordinates (row g of v) at the kept
        // indices, and canonical generator j lifts to row keep[j] of v⁻¹.
        let images = snf.v.select_cols(&keep).transpose();
        let lifts = snf.v_inv.select_rows(&keep).transpose();
        let mut factors = torsion;
        factors.extend(std::iter::repeat_n(BigInt::zero(), keep.len() - factors.len()));
        let mut g = AbGroup {
            invariant_factors: factors,
            generator_images: images,
            canonical_lifts: lifts,
        };
        let reduced = g.reduce_matrix(&g.generator_images);
        g.generator_images = reduced;
        g
    }

    pub fn free(rank: usize) -> Self {
        AbGroup {
            invariant_factors: vec![BigInt::zero(); rank],
            generator_images: IntMatrix::identity(rank),
            canonical_lifts: IntMatrix::identity(rank),
        }
    }

    pub fn trivial() -> Self {
        AbGroup {
            invariant_factors: Vec::new(),
            generator_images: IntMatrix::zeros(0, 0),
            canonical_lifts: IntMatrix::zeros(0, 0),
        }
    }

    /// Number of canonical coordinates (torsion plus free).
    pub fn canonical_rank(&self) -> usize {
        self.invariant_factors.len()
    }

    pub fn free_rank(&self) -> usize {
        self.invariant_factors.iter().filter(|d| d.is_zero()).count()
    }

    pub fn torsion_factors(&self) -> Vec<BigInt> {
        self.invariant_factors.iter().filter(|d| !d.is_zero()).cloned().collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.invariant_factors.is_empty()
    }

    /// Two groups are isomorphic exactly when canonical factor lists agree.
    pub fn is_isomorphic(&self, other: &AbGroup) -> bool {
        self.invariant_factors == other.invariant_factors
    }

    /// Reduces an element's canonical coordinates modulo the torsion factors.
    pub fn reduce_vec(&self, coords: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(coords.len(), self.canonical_rank());
        coords
            .iter()
            .zip(self.invariant_factors.iter())
            .map(|(c, d)| if d.is_zero() { c.clone() } else { c.mod_floor_big(d) })
            .collect()
    }

    /// Columnwise `reduce_vec` over a matrix of canonical coordinates.
    pub fn reduce_matrix(&self, m: &IntMatrix) -> IntMatrix {
        assert_eq!(m.rows(), self.canonical_rank());
        let mut out = m.clone();
        for i in 0..m.rows() {
            let d = &self.invariant_factors[i];
            if d.is_zero() {
                continue;
            }
            for j in 0..m.cols() {
                out[(i, j)] = out[(i, j)].mod_floor_big(d);
            }
        }
        out
    }

    /// Canonical coordinates of a word in the original generators.
    pub fn project(&self, word: &[BigInt]) -> Vec<BigInt> {
        self.reduce_vec(&self.generator_images.mul_vec(word))
    }

    /// Human-readable form, e.g. `Z^2 (+) Z/4` or `0`.
    pub fn factors_string(&self) -> String {
        let free = self.free_rank();
        let torsion = self.torsion_factors();
        let mut parts = Vec::new();
        match free {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for d in &torsion {
            parts.push(format!("Z/{d}"));
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(" (+) ")
        }
    }
}

trait ModFloor {
    fn mod_floor_big(&self, m: &BigInt) -> BigInt;
}

impl ModFloor for BigInt {
    fn mod_floor_big(&self, m: &BigInt) -> BigInt {
        let r = self % m;
        if r.is_negative() {
            r + m.abs()
        } else {
            r
        }
    }
}

fn is_one_abs(x: &BigInt) -> bool {
    x.abs() == BigInt::from(1)
}

/// One monoid relation `lhs = rhs` over nonnegative generator combinations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonoidRelation {
    pub lhs: Vec<u64>,
    pub rhs: Vec<u64>,
}

/// Group completion of the abelian monoid presented by `generators` and the
/// given equations: the group on the same generators with relations lhs − rhs.
pub fn grothendieck_group(generators: usize, relations: &[MonoidRelation]) -> AbGroup {
    let mut rows = IntMatrix::zeros(relations.len(), generators);
    for (i, rel) in relations.iter().enumerate() {
        assert_eq!(rel.lhs.len(), generators);
        assert_eq!(rel.rhs.len(), generators);
        for j in 0..generators {
            rows[(i, j)] = BigInt::from(rel.lhs[j]) - BigInt::from(rel.rhs[j]);
        }
    }
    AbGroup::from_presentation(&AbPresentation::new(generators, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn free_monoid_on_one_generator_completes_to_z() {
        let g = grothendieck_group(1, &[]);
        assert_eq!(g.factors_string(), "Z");
        assert_eq!(g.invariant_factors, vec![BigInt::zero()]);
        assert!(g.generator_images.mul_vec(&[BigInt::one()])[0].abs().is_one());
    }

    #[test]
    fn free_monoid_on_two_generators() {
        let g = grothendieck_group(2, &[]);
        assert_eq!(g.factors_string(), "Z^2");
    }

    #[test]
    fn idempotent_generator_collapses() {
        // a + a = a forces a = 0 in the completion.
        let g = grothendieck_group(
            1,
            &[MonoidRelation { lhs: vec![2], rhs: vec![1] }],
        );
        assert!(g.is_trivial());
        assert_eq!(g.factors_string(), "0");
    }

    #[test]
    fn torsion_presentation() {
        // <a, b | 2a = 0, a + 3b = 0> has relations matrix rows (2,0), (1,3).
        let p = AbPresentation::new(2, IntMatrix::from_rows(&[vec![2, 0], vec![1, 3]]));
        let g = AbGroup::from_presentation(&p);
        assert_eq!(g.factors_string(), "Z/6");
        // Generator images live in Z/6 and satisfy the relations.
        let r1 = g.project(&[BigInt::from(2), BigInt::zero()]);
        let r2 = g.project(&[BigInt::one(), BigInt::from(3)]);
        assert!(r1.iter().all(|x| x.is_zero()));
        assert!(r2.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn factors_string_mixed() {
        let p = AbPresentation::new(3, IntMatrix::from_rows(&[vec![2, 0, 0]]));
        let g = AbGroup::from_presentation(&p);
        assert_eq!(g.factors_string(), "Z^2 (+) Z/2");
    }
}
