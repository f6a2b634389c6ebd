//! Random operator ensembles for property suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::calculus::NormalOperator;
use crate::linalg::CMatrix;
use crate::scalar::SchurMap;

/// Unitary factor of the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    g.qr().q()
}

/// A point drawn uniformly from the disk of radius `radius`.
pub fn random_disk_point<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Normal matrix with eigenvalue 1 of multiplicity `ones` and the remaining
/// eigenvalues uniform in the disk of radius `interior_radius`.
pub fn random_normal_with_unit_eigenvalue<R: Rng>(
    rng: &mut R,
    dim: usize,
    ones: usize,
    interior_radius: f64,
) -> NormalOperator {
    let mut eigs = vec![Complex64::new(1.0, 0.0); ones.min(dim)];
    while eigs.len() < dim {
        eigs.push(random_disk_point(rng, interior_radius));
    }
    let u = random_unitary(rng, dim);
    NormalOperator::from_parts(eigs, u).expect("QR factor is unitary")
}

/// A layer that fixes 1 and maps the disk into itself, with parameters kept
/// away from the degenerate ends of their ranges.
pub fn random_admissible_layer<R: Rng>(rng: &mut R) -> SchurMap {
    match rng.random_range(0..3) {
        0 => SchurMap::affine(rng.random_range(0.05..0.7)).expect("t inside (0, 1)"),
        1 => SchurMap::blaschke(rng.random_range(0.0..0.7)).expect("t inside [0, 1)"),
        _ => SchurMap::normalized_blaschke(random_disk_point(rng, 0.7))
            .expect("zero inside the disk"),
    }
}

/// Dimension in `2..=max_dim`, multiplicity of 1 in `1..=3`, interior
/// eigenvalues of modulus at most 0.9.
pub fn random_projection_case<R: Rng>(rng: &mut R, max_dim: usize) -> NormalOperator {
    let dim = rng.random_range(2..=max_dim.max(2));
    let ones = rng.random_range(1..=3.min(dim));
    random_normal_with_unit_eigenvalue(rng, dim, ones, 0.9)
}
