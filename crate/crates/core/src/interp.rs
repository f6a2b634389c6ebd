//! Two-point Schur interpolation with an interior zero at `t` and the
//! boundary value `s(1) = 1`, built from a Blaschke factor and the first
//! step of the Schur algorithm.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::{check_grid, verify_schur_bound, SchurMap, DEFAULT_ANGULAR, DEFAULT_RADIAL};

pub const RESIDUAL_AT_T: f64 = 1e-10;
pub const RESIDUAL_AT_ONE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationProblem {
    t: f64,
}

impl InterpolationProblem {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::ParamOutOfRange {
                name: "t",
                value: t,
                range: "(0, 1)",
            });
        }
        Ok(InterpolationProblem { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub residual_at_t: f64,
    pub residual_at_1: f64,
    pub sup_estimate: f64,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.residual_at_t < RESIDUAL_AT_T
            && self.residual_at_1 < RESIDUAL_AT_ONE
            && self.sup_estimate <= 1.0 + crate::scalar::SCHUR_SLACK
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurSolution {
    pub s: SchurMap,
    pub certificate: Certificate,
}

/// The disk automorphism `b_t(z) = (z - t) / (1 - t z)`.
pub fn blaschke(t: f64) -> Result<SchurMap> {
    SchurMap::blaschke(t)
}

/// First Schur step: divide `R` (with `R(0) = 0`) by `z`.
///
/// Works on coefficient lists, so the input must reduce to a rational
/// function; compositions are rejected.
pub fn schur_step(r: &SchurMap, tol: f64) -> Result<SchurMap> {
    let at_zero = r.eval(Complex64::new(0.0, 0.0))?;
    if at_zero.norm() >= tol {
        return Err(Error::NonzeroAtOrigin(at_zero));
    }
    let (num, den) = r.to_rational()?;
    let quotient: Vec<Complex64> = if num.len() > 1 {
        num[1..].to_vec()
    } else {
        vec![Complex64::new(0.0, 0.0)]
    };
    let is_poly = den.len() == 1 && den[0] == Complex64::new(1.0, 0.0);
    if is_poly {
        SchurMap::polynomial(quotient)
    } else {
        Ok(SchurMap::Rational { num: quotient, den })
    }
}

/// `s(z) = b_t(z) Φ(b_t(z))`, represented as `b_t` followed by `w ↦ w Φ(w)`.
pub fn solve_two_point(problem: &InterpolationProblem, phi: &SchurMap) -> Result<SchurSolution> {
    let bound = verify_schur_bound(phi, DEFAULT_RADIAL, DEFAULT_ANGULAR)?;
    if !bound.pass {
        return Err(Error::NotSchur(bound.sup));
    }
    let at_one = (phi.eval(Complex64::new(1.0, 0.0))? - 1.0).norm();
    if at_one >= 1e-8 {
        return Err(Error::BoundaryConditionFailed(at_one));
    }
    let outer = SchurMap::product(vec![SchurMap::Identity, phi.clone()])?;
    let s = SchurMap::composition(vec![blaschke(problem.t)?, outer])?;
    let certificate = certify(&s, problem.t)?;
    Ok(SchurSolution { s, certificate })
}

fn certify(s: &SchurMap, t: f64) -> Result<Certificate> {
    let residual_at_t = match s.eval(Complex64::new(t, 0.0)) {
        Ok(v) => v.norm(),
        Err(_) => f64::INFINITY,
    };
    let residual_at_1 = match s.eval(Complex64::new(1.0, 0.0)) {
        Ok(v) => (v - 1.0).norm(),
        Err(_) => f64::INFINITY,
    };
    let sup_estimate = verify_schur_bound(s, DEFAULT_RADIAL, DEFAULT_ANGULAR)?.sup;
    Ok(Certificate {
        residual_at_t,
        residual_at_1,
        sup_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationReport {
    pub pass: bool,
    pub residuals: Certificate,
}

pub fn verify_interpolation(s: &SchurMap, t: f64) -> InterpolationReport {
    let residuals = certify(s, t).unwrap_or(Certificate {
        residual_at_t: f64::INFINITY,
        residual_at_1: f64::INFINITY,
        sup_estimate: f64::INFINITY,
    });
    InterpolationReport {
        pass: residuals.passes(),
        residuals,
    }
}

/// Max `|z Φ(z) - R(z)|` on the 64-point check grid.
pub fn factorization_residual(r: &SchurMap, phi: &SchurMap) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in check_grid() {
        worst = worst.max((z * phi.eval(z)? - r.eval(z)?).norm());
    }
    Ok(worst)
}
