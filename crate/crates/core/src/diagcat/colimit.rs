//! Colimits of finite diagrams of finitely presented abelian groups, and the
//! induced maps between colimits of diagrams of different shapes.

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use super::abgroup::{AbGroup, AbPresentation};
use super::intmat::IntMatrix;

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("arrow {arrow} is ill-typed: {reason}")]
    IllTypedArrow { arrow: usize, reason: String },
    #[error("naturality square fails on arrow {arrow} of the source diagram")]
    NotWellDefined { arrow: usize },
    #[error("object map out of range at object {object}")]
    BadObjectMap { object: usize },
    #[error("arrow map out of range or endpoint mismatch at arrow {arrow}")]
    BadArrowMap { arrow: usize },
}

/// An arrow of a diagram of abelian groups: a generator-level integer matrix
/// from the source presentation to the target presentation.
#[derive(Clone, Debug)]
pub struct AbArrow {
    pub src: usize,
    pub dst: usize,
    /// target generators × source generators
    pub map: IntMatrix,
}

/// A finite diagram of finitely presented abelian groups.  Composition
/// closure of the arrows is not required; relations are generated per arrow.
#[derive(Clone, Debug, Default)]
pub struct DiagramAb {
    pub objects: Vec<AbPresentation>,
    pub arrows: Vec<AbArrow>,
}

impl DiagramAb {
    pub fn validate(&self) -> Result<(), DiagramError> {
        for (k, a) in self.arrows.iter().enumerate() {
            let ok = a.src < self.objects.len()
                && a.dst < self.objects.len()
                && a.map.rows() == self.objects[a.dst].num_generators
                && a.map.cols() == self.objects[a.src].num_generators;
            if !ok {
                return Err(DiagramError::IllTypedArrow { arrow: k, reason: "shape".into() });
            }
        }
        Ok(())
    }

    fn offsets(&self) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(self.objects.len());
        let mut total = 0;
        for obj in &self.objects {
            offsets.push(total);
            total += obj.num_generators;
        }
        (offsets, total)
    }

    /// Presentation of the colimit: the direct sum of the objects modulo each
    /// object's own relations and one row g_src − map(g)_dst per arrow and
    /// source generator.
    pub fn colimit_presentation(&self) -> AbPresentation {
        let (offsets, total) = self.offsets();
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        for (i, obj) in self.objects.iter().enumerate() {
            for r in 0..obj.relations.rows() {
                let mut row = vec![BigInt::zero(); total];
                for c in 0..obj.num_generators {
                    row[offsets[i] + c] = obj.relations[(r, c)].clone();
                }
                rows.push(row);
            }
        }
        for a in &self.arrows {
            let n_src = self.objects[a.src].num_generators;
            let n_dst = self.objects[a.dst].num_generators;
            for g in 0..n_src {
                let mut row = vec![BigInt::zero(); total];
                row[offsets[a.src] + g] += 1;
                for h in 0..n_dst {
                    row[offsets[a.dst] + h] -= a.map[(h, g)].clone();
                }
                rows.push(row);
            }
        }
        let mut relations = IntMatrix::zeros(rows.len(), total);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                relations[(i, j)] = v.clone();
            }
        }
        AbPresentation::new(total, relations)
    }
}

/// A computed colimit: the canonical group plus one injection matrix per
/// object (canonical coordinates × object generators).
#[derive(Clone, Debug)]
pub struct ColimitAb {
    pub group: AbGroup,
    pub injections: Vec<IntMatrix>,
}

pub fn colimit_ab(d: &DiagramAb) -> Result<ColimitAb, DiagramError> {
    d.validate()?;
    let (offsets, _) = d.offsets();
    let pres = d.colimit_presentation();
    let group = AbGroup::from_presentation(&pres);
    let injections = d
        .objects
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            let cols: Vec<usize> = (offsets[i]..offsets[i] + obj.num_generators).collect();
            group.reduce_matrix(&group.generator_images.select_cols(&cols))
        })
        .collect();
    Ok(ColimitAb { group, injections })
}

/// A morphism of diagrams of possibly different shapes: an object map, an
/// arrow map, and per-object components on generators.
#[derive(Clone, Debug)]
pub struct DiagMorphism {
    pub object_map: Vec<usize>,
    pub arrow_map: Vec<usize>,
    /// components[a]: generators of E(object_map[a]) × generators of D(a)
    pub components: Vec<IntMatrix>,
}

impl DiagMorphism {
    /// Checks typing and every naturality square
    /// `components[dst] · D(h) = E(f(h)) · components[src]`.
    pub fn validate(&self, d: &DiagramAb, e: &DiagramAb) -> Result<(), DiagramError> {
        if self.object_map.len() != d.objects.len() || self.components.len() != d.objects.len() {
            return Err(DiagramError::BadObjectMap { object: usize::MAX });
        }
        for (i, &fi) in self.object_map.iter().enumerate() {
            if fi >= e.objects.len() {
                return Err(DiagramError::BadObjectMap { object: i });
            }
            let comp = &self.components[i];
            if comp.rows() != e.objects[fi].num_generators
                || comp.cols() != d.objects[i].num_generators
            {
                return Err(DiagramError::BadObjectMap { object: i });
            }
        }
        if self.arrow_map.len() != d.arrows.len() {
            return Err(DiagramError::BadArrowMap { arrow: usize::MAX });
        }
        for (k, h) in d.arrows.iter().enumerate() {
            let fk = self.arrow_map[k];
            if fk >= e.arrows.len() {
                return Err(DiagramError::BadArrowMap { arrow: k });
            }
            let eh = &e.arrows[fk];
            if eh.src != self.object_map[h.src] || eh.dst != self.object_map[h.dst] {
                return Err(DiagramError::BadArrowMap { arrow: k });
            }
            let lhs = self.components[h.dst].mul(&h.map);
            let rhs = eh.map.mul(&self.components[h.src]);
            if lhs != rhs {
                return Err(DiagramError::NotWellDefined { arrow: k });
            }
        }
        Ok(())
    }
}

/// The homomorphism `colim D → colim E` induced by a diagram morphism, as a
/// matrix in canonical coordinates.  Verifies well-definedness by checking
/// that every relation of `colim D` maps to zero in `colim E`.
pub fn colimit_induced_map(
    m: &DiagMorphism,
    d: &DiagramAb,
    e: &DiagramAb,
    colim_d: &ColimitAb,
    colim_e: &ColimitAb,
) -> Result<IntMatrix, DiagramError> {
    m.validate(d, e)?;
    let (offsets_d, total_d) = d.offsets();
    // Direct-sum-level map: generator (a, g) ↦ injection_{f(a)}(η_a(g)).
    let mut h = IntMatrix::zeros(colim_e.group.canonical_rank(), total_d);
    for (a, obj) in d.objects.iter().enumerate() {
        let img = colim_e.injections[m.object_map[a]].mul(&m.components[a]);
        for g in 0..obj.num_generators {
            for r in 0..h.rows() {
                h[(r, offsets_d[a] + g)] = img[(r, g)].clone();
            }
        }
    }
    // Well-definedness: relation rows of colim D must die in colim E.
    let pres = d.colimit_presentation();
    for r in 0..pres.relations.rows() {
        let row = pres.relations.row(r);
        let img = colim_e.group.reduce_vec(&h.mul_vec(&row));
        if img.iter().any(|x| !x.is_zero()) {
            return Err(DiagramError::NotWellDefined { arrow: r });
        }
    }
    // Express on canonical coordinates of colim D: canonical generator j is
    // the class of the explicit direct-sum word stored in canonical_lifts.
    Ok(colim_e.group.reduce_matrix(&h.mul(&colim_d.group.canonical_lifts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, Signed};

    fn free_obj(n: usize) -> AbPresentation {
        AbPresentation::free(n)
    }

    #[test]
    fn single_object_colimit_is_the_object() {
        let d = DiagramAb { objects: vec![free_obj(1)], arrows: vec![] };
        let c = colimit_ab(&d).unwrap();
        assert_eq!(c.group.factors_string(), "Z");
        assert!(c.injections[0][(0, 0)].abs().is_one());
    }

    #[test]
    fn doubling_arrow() {
        // Z --×2--> Z has colimit Z with generator images 2 and 1 (up to a
        // global sign from the canonical form).
        let d = DiagramAb {
            objects: vec![free_obj(1), free_obj(1)],
            arrows: vec![AbArrow { src: 0, dst: 1, map: IntMatrix::from_rows(&[vec![2]]) }],
        };
        let c = colimit_ab(&d).unwrap();
        assert_eq!(c.group.factors_string(), "Z");
        let a = c.injections[0][(0, 0)].clone();
        let b = c.injections[1][(0, 0)].clone();
        assert_eq!(a, BigInt::from(2) * &b);
        assert!(b.abs().is_one());
    }

    #[test]
    fn span_colimit() {
        // a → b by ×1 and a → c by ×2 over Z's: invariant factors of the
        // relation rows (1,-1,0), (1,0,-2) are 1,1 so the colimit is Z.
        let d = DiagramAb {
            objects: vec![free_obj(1), free_obj(1), free_obj(1)],
            arrows: vec![
                AbArrow { src: 0, dst: 1, map: IntMatrix::from_rows(&[vec![1]]) },
                AbArrow { src: 0, dst: 2, map: IntMatrix::from_rows(&[vec![2]]) },
            ],
        };
        let c = colimit_ab(&d).unwrap();
        assert_eq!(c.group.factors_string(), "Z");
        // Cocone equations: injection_src = injection_dst ∘ map.
        for arrow in &d.arrows {
            let lhs = c.injections[arrow.src].clone();
            let rhs = c.group.reduce_matrix(&c.injections[arrow.dst].mul(&arrow.map));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn identity_morphism_induces_identity() {
        let d = DiagramAb {
            objects: vec![free_obj(2), free_obj(1)],
            arrows: vec![AbArrow {
                src: 0,
                dst: 1,
                map: IntMatrix::from_rows(&[vec![1, 1]]),
            }],
        };
        let c = colimit_ab(&d).unwrap();
        let m = DiagMorphism {
            object_map: vec![0, 1],
            arrow_map: vec![0],
            components: vec![IntMatrix::identity(2), IntMatrix::identity(1)],
        };
        let t = colimit_induced_map(&m, &d, &d, &c, &c).unwrap();
        assert!(t.is_identity());
    }

    #[test]
    fn cofinal_subdiagram_inclusion_is_an_isomorphism() {
        // The terminal object of Z --×2--> Z is cofinal; including it as a
        // one-object diagram induces an isomorphism of colimits.
        let sub = DiagramAb { objects: vec![free_obj(1)], arrows: vec![] };
        let full = DiagramAb {
            objects: vec![free_obj(1), free_obj(1)],
            arrows: vec![AbArrow { src: 0, dst: 1, map: IntMatrix::from_rows(&[vec![2]]) }],
        };
        let cs = colimit_ab(&sub).unwrap();
        let cf = colimit_ab(&full).unwrap();
        let m = DiagMorphism {
            object_map: vec![1],
            arrow_map: vec![],
            components: vec![IntMatrix::identity(1)],
        };
        let t = colimit_induced_map(&m, &sub, &full, &cs, &cf).unwrap();
        // Invariant factors and generator images agree through t.
        assert!(cs.group.is_isomorphic(&cf.group));
        assert!(t.is_unimodular());
        let img = cf.group.reduce_vec(&t.mul_vec(&cs.injections[0].column(0)));
        assert_eq!(img, cf.injections[1].column(0));
    }

    #[test]
    fn collapse_of_parallel_objects() {
        // Two objects b, c with no arrows map onto a single object via an
        // arrow-identified diagram; the induced map is the canonical
        // projection identifying the two generators.
        let d = DiagramAb { objects: vec![free_obj(1), free_obj(1)], arrows: vec![] };
        let e = DiagramAb {
            objects: vec![free_obj(1), free_obj(1)],
            arrows: vec![AbArrow { src: 0, dst: 1, map: IntMatrix::from_rows(&[vec![1]]) }],
        };
        let cd = colimit_ab(&d).unwrap();
        let ce = colimit_ab(&e).unwrap();
        assert_eq!(cd.group.factors_string(), "Z^2");
        assert_eq!(ce.group.factors_string(), "Z");
        let m = DiagMorphism {
            object_map: vec![0, 1],
            arrow_map: vec![],
            components: vec![IntMatrix::identity(1), IntMatrix::identity(1)],
        };
        let t = colimit_induced_map(&m, &d, &e, &cd, &ce).unwrap();
        // Both generators of Z^2 land on the single generator of Z.
        let g0 = ce.group.reduce_vec(&t.mul_vec(&cd.injections[0].column(0)));
        let g1 = ce.group.reduce_vec(&t.mul_vec(&cd.injections[1].column(0)));
        assert_eq!(g0, g1);
        assert!(g0[0].abs().is_one());
    }
}
