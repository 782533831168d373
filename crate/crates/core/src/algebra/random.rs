//! Seeded pseudo-random algebras, unitaries, projections, and homomorphisms.
//!
//! All randomness flows through a caller-supplied RNG; tests seed a ChaCha
//! generator with an explicit 64-bit value so every fixture replays exactly.

use rand::Rng;

use super::linalg::{range_projector, C64, CMatrix};
use super::{AlgElement, FdAlgebra, Hom, Projection, Unitary};

/// Standard normal via Box–Muller.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn gaussian_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

/// Haar-distributed unitary from the QR decomposition of a complex Gaussian
/// matrix, with the R-diagonal phases folded into Q.
fn haar_block(n: usize, rng: &mut impl Rng) -> CMatrix {
    let g = gaussian_matrix(n, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_algebra(rng: &mut impl Rng, max_blocks: usize, max_size: usize) -> FdAlgebra {
    let k = rng.random_range(1..=max_blocks);
    let sizes = (0..k).map(|_| rng.random_range(1..=max_size)).collect();
    FdAlgebra::new(sizes).expect("sizes are positive")
}

pub fn haar_unitary(parent: &FdAlgebra, rng: &mut impl Rng) -> Unitary {
    let blocks = parent.block_sizes().iter().map(|&n| haar_block(n, rng)).collect();
    Unitary::try_new(AlgElement { parent: parent.clone(), blocks })
        .expect("QR of a Gaussian matrix is unitary")
}

/// Projection with the given per-block ranks in Haar-random position.
pub fn random_projection_with_ranks(
    parent: &FdAlgebra,
    ranks: &[usize],
    rng: &mut impl Rng,
) -> Projection {
    assert_eq!(ranks.len(), parent.num_blocks());
    let u = haar_unitary(parent, rng);
    let diag = Projection::from_diag_ranks(parent, ranks).expect("ranks within bounds");
    u.conjugate_projection(&diag)
}

pub fn random_projection(parent: &FdAlgebra, rng: &mut impl Rng) -> Projection {
    let ranks: Vec<usize> =
        parent.block_sizes().iter().map(|&n| rng.random_range(0..=n)).collect();
    random_projection_with_ranks(parent, &ranks, rng)
}

/// Nonzero, non-central projection; the parent must have a block of size ≥ 2.
pub fn random_noncentral_projection(parent: &FdAlgebra, rng: &mut impl Rng) -> Projection {
    assert!(
        parent.block_sizes().iter().any(|&n| n >= 2),
        "no room for a non-central projection"
    );
    loop {
        let ranks: Vec<usize> =
            parent.block_sizes().iter().map(|&n| rng.random_range(0..=n)).collect();
        if ranks
            .iter()
            .zip(parent.block_sizes())
            .any(|(&r, &n)| r > 0 && r < n)
        {
            return random_projection_with_ranks(parent, &ranks, rng);
        }
    }
}

/// Random density matrix: a normalized Gaussian Gram element.
pub fn random_density(parent: &FdAlgebra, rng: &mut impl Rng) -> AlgElement {
    let blocks: Vec<CMatrix> = parent
        .block_sizes()
        .iter()
        .map(|&n| {
            let g = gaussian_matrix(n, rng);
            &g * g.adjoint()
        })
        .collect();
    let raw = AlgElement::from_blocks(parent.clone(), blocks).expect("shapes match");
    let tr = raw.trace().re;
    raw.scale(C64::new(1.0 / tr, 0.0))
}

/// Random unital homomorphism out of `source`: draws a positive multiplicity
/// pattern, derives the target block sizes from it, and conjugates by a Haar
/// unitary of the target.
pub fn random_unital_hom(
    source: &FdAlgebra,
    rng: &mut impl Rng,
    max_target_blocks: usize,
    max_copies: usize,
) -> (FdAlgebra, Hom) {
    let k = source.num_blocks();
    let kt = rng.random_range(1..=max_target_blocks);
    loop {
        let mult: Vec<Vec<usize>> = (0..kt)
            .map(|_| (0..k).map(|_| rng.random_range(0..=max_copies)).collect())
            .collect();
        if mult.iter().any(|row| row.iter().all(|&m| m == 0)) {
            continue; // every target block must receive something
        }
        let sizes: Vec<usize> = mult
            .iter()
            .map(|row| row.iter().zip(source.block_sizes()).map(|(&m, &n)| m * n).sum())
            .collect();
        let target = FdAlgebra::with_tolerance(sizes, source.tolerance()).expect("positive");
        let u = haar_unitary(&target, rng);
        let hom = Hom::new_unital(source.clone(), target.clone(), mult, u)
            .expect("multiplicities fill the target by construction");
        return (target, hom);
    }
}

/// A commuting family of diagonal-pattern projections conjugated by one
/// common Haar unitary.
pub fn random_commuting_projections(
    parent: &FdAlgebra,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Projection> {
    let u = haar_unitary(parent, rng);
    (0..count)
        .map(|_| {
            let blocks: Vec<CMatrix> = parent
                .block_sizes()
                .iter()
                .map(|&n| {
                    let mut d = CMatrix::zeros(n, n);
                    for i in 0..n {
                        if rng.random_bool(0.5) {
                            d[(i, i)] = C64::new(1.0, 0.0);
                        }
                    }
                    d
                })
                .collect();
            let diag =
                Projection::try_new(AlgElement::from_blocks(parent.clone(), blocks).unwrap())
                    .unwrap();
            u.conjugate_projection(&diag)
        })
        .collect()
}

/// Deterministic per-block cyclic-shift unitary; identity on size-1 blocks.
pub fn cyclic_shift_unitary(parent: &FdAlgebra) -> Unitary {
    let blocks = parent
        .block_sizes()
        .iter()
        .map(|&n| {
            let sigma: Vec<usize> = (0..n).map(|l| (l + 1) % n).collect();
            super::linalg::permutation_matrix(&sigma)
        })
        .collect();
    Unitary::try_new(AlgElement { parent: parent.clone(), blocks })
        .expect("permutations are unitary")
}

/// First-basis-vector projection of one block, zero elsewhere.
pub fn block_indicator(parent: &FdAlgebra, block: usize) -> Projection {
    let blocks = parent
        .block_sizes()
        .iter()
        .enumerate()
        .map(|(i, &n)| if i == block { range_projector(n, 0, 1) } else { CMatrix::zeros(n, n) })
        .collect();
    Projection::try_new(AlgElement { parent: parent.clone(), blocks }).expect("diagonal 0/1")
}
