//! JSON wire formats: elements, spatial diagrams, orthonormal-basis files,
//! and abelian-group presentations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::linalg::{C64, CMatrix};
use crate::algebra::{AlgElement, AlgebraError, FdAlgebra, Projection, Unitary};
use crate::contexts::{Context, ContextError, SpatialDiagram};
use crate::diagcat::{AbArrow, AbPresentation, DiagramAb, IntMatrix};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error("matrix entry is not a finite number")]
    BadNumber,
    #[error("relation matrix is ragged")]
    RaggedMatrix,
}

type BlockJson = Vec<Vec<[f64; 2]>>;

fn block_to_json(m: &CMatrix) -> BlockJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn block_from_json(rows: &BlockJson) -> Result<CMatrix, IoError> {
    let n = rows.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(IoError::RaggedMatrix);
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(IoError::BadNumber);
            }
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

/// An element serialized as nested arrays of [re, im] pairs per block.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementJson {
    pub algebra: String,
    pub blocks: Vec<BlockJson>,
}

pub fn element_to_json(e: &AlgElement) -> ElementJson {
    ElementJson {
        algebra: e.parent().to_string(),
        blocks: e.blocks().iter().map(block_to_json).collect(),
    }
}

pub fn element_from_json(j: &ElementJson, tolerance: f64) -> Result<AlgElement, IoError> {
    let algebra: FdAlgebra = j.algebra.parse()?;
    let algebra = FdAlgebra::with_tolerance(algebra.block_sizes().to_vec(), tolerance)?;
    let blocks = j.blocks.iter().map(block_from_json).collect::<Result<Vec<_>, _>>()?;
    Ok(AlgElement::from_blocks(algebra, blocks)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MorphismJson {
    pub src: usize,
    pub dst: usize,
    pub u: Vec<BlockJson>,
}

/// Diagram file: contexts as lists of atom elements, morphisms with their
/// witnessing unitaries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagramJson {
    pub algebra: String,
    pub contexts: Vec<Vec<Vec<BlockJson>>>,
    pub morphisms: Vec<MorphismJson>,
}

pub fn diagram_to_json(d: &SpatialDiagram) -> DiagramJson {
    DiagramJson {
        algebra: d.algebra.to_string(),
        contexts: d
            .contexts()
            .iter()
            .map(|c| {
                c.atoms()
                    .iter()
                    .map(|a| a.blocks().iter().map(block_to_json).collect())
                    .collect()
            })
            .collect(),
        morphisms: d
            .arrows()
            .iter()
            .map(|a| MorphismJson {
                src: a.src,
                dst: a.dst,
                u: a.u.blocks().iter().map(block_to_json).collect(),
            })
            .collect(),
    }
}

/// Rebuilds and fully validates a diagram: every context must partition the
/// identity and every morphism must validate.
pub fn diagram_from_json(j: &DiagramJson, tolerance: f64) -> Result<SpatialDiagram, IoError> {
    let algebra: FdAlgebra = j.algebra.parse()?;
    let algebra = FdAlgebra::with_tolerance(algebra.block_sizes().to_vec(), tolerance)?;
    let mut d = SpatialDiagram::new(algebra.clone());
    for ctx in &j.contexts {
        let atoms = ctx
            .iter()
            .map(|atom| {
                let blocks =
                    atom.iter().map(block_from_json).collect::<Result<Vec<_>, _>>()?;
                Ok(Projection::try_new(AlgElement::from_blocks(algebra.clone(), blocks)?)?)
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        d.add_context(Context::new(algebra.clone(), atoms)?);
    }
    for m in &j.morphisms {
        let blocks = m.u.iter().map(block_from_json).collect::<Result<Vec<_>, _>>()?;
        let u = Unitary::try_new(AlgElement::from_blocks(algebra.clone(), blocks)?)?;
        if m.src >= d.contexts().len() || m.dst >= d.contexts().len() {
            return Err(IoError::Context(ContextError::BadArrowIndex));
        }
        d.add_arrow(m.src, m.dst, u)?;
    }
    Ok(d)
}

/// Orthonormal-basis file for contextuality checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasesJson {
    pub dim: usize,
    pub bases: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn bases_from_json(j: &BasesJson) -> Result<Vec<Vec<Vec<C64>>>, IoError> {
    j.bases
        .iter()
        .map(|basis| {
            basis
                .iter()
                .map(|v| {
                    v.iter()
                        .map(|&[re, im]| {
                            if re.is_finite() && im.is_finite() {
                                Ok(C64::new(re, im))
                            } else {
                                Err(IoError::BadNumber)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Presentation of an abelian group, relations row-major as decimal strings
/// (arbitrary precision).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresentationJson {
    pub num_generators: usize,
    pub relations: Vec<Vec<String>>,
}

pub fn presentation_to_json(p: &AbPresentation) -> PresentationJson {
    PresentationJson {
        num_generators: p.num_generators,
        relations: (0..p.relations.rows())
            .map(|i| (0..p.relations.cols()).map(|j| p.relations[(i, j)].to_string()).collect())
            .collect(),
    }
}

pub fn presentation_from_json(j: &PresentationJson) -> Result<AbPresentation, IoError> {
    let mut m = IntMatrix::zeros(j.relations.len(), j.num_generators);
    for (i, row) in j.relations.iter().enumerate() {
        if row.len() != j.num_generators {
            return Err(IoError::RaggedMatrix);
        }
        for (jx, s) in row.iter().enumerate() {
            m[(i, jx)] = s.parse().map_err(|_| IoError::BadNumber)?;
        }
    }
    Ok(AbPresentation::new(j.num_generators, m))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbArrowJson {
    pub src: usize,
    pub dst: usize,
    pub map: Vec<Vec<String>>,
}

/// A diagram of presented abelian groups.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagramAbJson {
    pub objects: Vec<PresentationJson>,
    pub arrows: Vec<AbArrowJson>,
}

pub fn diagram_ab_to_json(d: &DiagramAb) -> DiagramAbJson {
    DiagramAbJson {
        objects: d.objects.iter().map(presentation_to_json).collect(),
        arrows: d
            .arrows
            .iter()
            .map(|a| AbArrowJson {
                src: a.src,
                dst: a.dst,
                map: (0..a.map.rows())
                    .map(|i| (0..a.map.cols()).map(|j| a.map[(i, j)].to_string()).collect())
                    .collect(),
            })
            .collect(),
    }
}

pub fn diagram_ab_from_json(j: &DiagramAbJson) -> Result<DiagramAb, IoError> {
    let objects = j
        .objects
        .iter()
        .map(presentation_from_json)
        .collect::<Result<Vec<_>, _>>()?;
    let mut arrows = Vec::with_capacity(j.arrows.len());
    for a in &j.arrows {
        let rows = a.map.len();
        let cols = a.map.first().map_or(0, |r| r.len());
        let mut m = IntMatrix::zeros(rows, cols);
        for (i, row) in a.map.iter().enumerate() {
            if row.len() != cols {
                return Err(IoError::RaggedMatrix);
            }
            for (jx, s) in row.iter().enumerate() {
                m[(i, jx)] = s.parse().map_err(|_| IoError::BadNumber)?;
            }
        }
        arrows.push(AbArrow { src: a.src, dst: a.dst, map: m });
    }
    Ok(DiagramAb { objects, arrows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::{haar_unitary, random_projection};
    use crate::contexts::core_diagram;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn element_round_trip() {
        let m23: FdAlgebra = "M2+M3".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_projection(&m23, &mut rng);
        let j = element_to_json(p.element());
        let text = serde_json::to_string(&j).unwrap();
        let back: ElementJson = serde_json::from_str(&text).unwrap();
        let e = element_from_json(&back, 1e-9).unwrap();
        assert!(e.approx_eq(p.element(), 1e-12));
    }

    #[test]
    fn diagram_round_trip_validates() {
        let m2: FdAlgebra = "M2".parse().unwrap();
        let d = core_diagram(&m2).unwrap();
        let j = diagram_to_json(&d);
        let text = serde_json::to_string(&j).unwrap();
        let back: DiagramJson = serde_json::from_str(&text).unwrap();
        let d2 = diagram_from_json(&back, 1e-9).unwrap();
        assert_eq!(d2.contexts().len(), d.contexts().len());
        assert_eq!(d2.arrows().len(), d.arrows().len());
        assert_eq!(d2.to_dot(), d.to_dot());
    }

    #[test]
    fn diagram_rejects_broken_unitary() {
        let m2: FdAlgebra = "M2".parse().unwrap();
        let d = core_diagram(&m2).unwrap();
        let mut j = diagram_to_json(&d);
        // Corrupt a morphism unitary.
        if let Some(m) = j.morphisms.last_mut() {
            m.u[0][0][0][0] += 0.5;
        }
        assert!(diagram_from_json(&j, 1e-9).is_err());
    }

    #[test]
    fn element_rejects_nan() {
        let m2: FdAlgebra = "M2".parse().unwrap();
        let mut j = element_to_json(&m2.identity());
        j.blocks[0][0][0][0] = f64::NAN;
        assert!(matches!(element_from_json(&j, 1e-9), Err(IoError::BadNumber)));
    }

    proptest! {
        #[test]
        fn unitary_json_round_trip(seed in 0u64..500) {
            let m23: FdAlgebra = "M2+M3".parse().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_unitary(&m23, &mut rng);
            let j = element_to_json(u.element());
            let back = element_from_json(&j, 1e-9).unwrap();
            prop_assert!(back.approx_eq(u.element(), 1e-12));
        }

        #[test]
        fn presentation_json_round_trip(rows in 0usize..4, cols in 1usize..4, fill in -40i64..40) {
            let mut m = IntMatrix::zeros(rows, cols);
            for i in 0..rows {
                for j in 0..cols {
                    m[(i, j)] = num_bigint::BigInt::from(fill + (i * cols + j) as i64);
                }
            }
            let p = AbPresentation::new(cols, m);
            let j = presentation_to_json(&p);
            let text = serde_json::to_string(&j).unwrap();
            let back: PresentationJson = serde_json::from_str(&text).unwrap();
            let q = presentation_from_json(&back).unwrap();
            prop_assert_eq!(p.relations, q.relations);
            prop_assert_eq!(p.num_generators, q.num_generators);
        }
    }
}
