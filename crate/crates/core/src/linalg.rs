//! Dense complex linear-algebra helpers shared by the calculus and engine
//! modules. Everything works on `DMatrix<Complex64>`.

use nalgebra::{DMatrix, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Steps and relative tolerance for the operator 2-norm power iteration.
pub const NORM_POWER_STEPS: usize = 200;
pub const NORM_POWER_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diagonal(entries: &[Complex64]) -> CMatrix {
    let n = entries.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            entries[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn start_vector(n: usize) -> nalgebra::DVector<Complex64> {
    let v = nalgebra::DVector::from_fn(n, |i, _| {
        let x = i as f64;
        Complex64::new(
            1.0 + 0.618_033_988_75 * x,
            0.271_828_182_8 * (x * x + 1.0).sqrt(),
        )
    });
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Operator 2-norm estimated by power iteration on `A* A`.
pub fn op_norm(m: &CMatrix) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let adj = m.adjoint();
    let mut v = start_vector(n);
    let mut estimate = (m * &v).norm();
    if estimate == 0.0 {
        return 0.0;
    }
    for _ in 0..NORM_POWER_STEPS {
        let w = &adj * (m * &v);
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / Complex64::new(wn, 0.0);
        let next = (m * &v).norm();
        let change = (next - estimate).abs();
        estimate = estimate.max(next);
        if change <= NORM_POWER_TOL * estimate {
            break;
        }
    }
    estimate
}

/// Eigenvalues from the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Complex Schur decomposition `m = q t q*`, returned as `(q, t)`.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    // The deflation test at machine epsilon occasionally stalls on
    // matrices with clustered eigenvalues; loosen it a little and retry.
    for eps in [1.0, 8.0, 64.0].map(|k| k * f64::EPSILON) {
        if let Some(s) = Schur::try_new(m.clone(), eps, 1_000 * n.max(1)) {
            return Ok(s.unpack());
        }
    }
    Err(Error::SolverFailure(
        "Schur iteration did not converge".into(),
    ))
}

pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Inverse together with a 1-norm condition estimate.
pub fn inverse_with_condition(m: &CMatrix) -> Option<(CMatrix, f64)> {
    let inv = m.clone().try_inverse()?;
    if !all_finite(&inv) {
        return None;
    }
    Some((inv.clone(), one_norm(m) * one_norm(&inv)))
}

pub fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular value is below `rank_tol * sigma_max`, or below the absolute
/// `floor`. A matrix with `sigma_max <= floor` is treated as zero.
pub fn numerical_kernel(m: &CMatrix, rank_tol: f64, floor: f64) -> CMatrix {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max <= floor {
        return identity(n);
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < (rank_tol * sigma_max).max(floor) {
            cols.push(v_t.row(i).adjoint());
        }
    }
    // Rows of v_t beyond min(m, n) are absent only for wide matrices, which
    // callers never pass; stacked kernels are tall.
    if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the column space, keeping singular values above
/// `threshold` (absolute).
pub fn column_space(m: &CMatrix, threshold: f64) -> CMatrix {
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(m.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Largest principal angle between the spans of two orthonormal bases.
/// Computed from `‖(I - Q₂Q₂*)Q₁‖₂`, which stays accurate for tiny angles.
pub fn subspace_angle(q1: &CMatrix, q2: &CMatrix) -> f64 {
    if q1.ncols() != q2.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let residual = q1 - q2 * (q2.adjoint() * q1);
    op_norm(&residual).min(1.0).asin()
}

/// Max distance under a greedy closest-pair matching of two multisets.
/// Returns infinity when the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(d);
        }
    }
    worst
}

/// Order-independent pairwise summation of equally shaped matrices.
pub fn pairwise_sum(terms: &[CMatrix]) -> Option<CMatrix> {
    match terms.len() {
        0 => None,
        1 => Some(terms[0].clone()),
        n => {
            let (left, right) = terms.split_at(n / 2);
            Some(pairwise_sum(left)? + pairwise_sum(right)?)
        }
    }
}

pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a * b - b * a))
}

pub fn normality_residual(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    frobenius(&(m * &adj - &adj * m))
}

pub fn scale(m: &CMatrix, s: Complex64) -> CMatrix {
    m.map(|z| z * s)
}
