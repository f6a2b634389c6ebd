//! Scalar dynamics of Schur maps: evaluation, layer cycles, iteration and
//! limit classification, grid-sampled Schur-bound and peripheral fixed-point
//! checks, Denjoy-Wolff point estimation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Denominator magnitude at or below which a map is treated as having a pole.
pub const POLE_TOL: f64 = 1e-14;
/// Sup-bound slack accepted by [`verify_schur_bound`].
pub const SCHUR_SLACK: f64 = 1e-9;
/// Tolerance for the layer condition `p(1) = 1`.
pub const LAYER_FIX_TOL: f64 = 1e-9;
/// Consecutive quiet steps required before a trace counts as converged.
pub const QUIET_STEPS: usize = 3;
/// Number of previous iterates searched for a repeat.
pub const CYCLE_WINDOW: usize = 8;
pub const CYCLE_TOL: f64 = 1e-10;
pub const DEFAULT_SCALAR_TOL: f64 = 1e-12;
pub const DEFAULT_RADIAL: usize = 32;
pub const DEFAULT_ANGULAR: usize = 128;
pub const DEFAULT_FPP_ANGULAR: usize = 256;

/// A holomorphic map on (a neighborhood of) the closed unit disk.
///
/// Build maps through the checked constructors; the variants are public so
/// callers can pattern-match on them.
#[derive(Debug, Clone, PartialEq)]
pub enum SchurMap {
    Identity,
    /// `t + (1 - t) z`.
    Affine(f64),
    /// `(z - t) / (1 - t z)`.
    Blaschke(f64),
    /// `(a z + b) / (c z + d)`.
    Mobius {
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    },
    /// Coefficients in increasing degree.
    Polynomial(Vec<Complex64>),
    Rational {
        num: Vec<Complex64>,
        den: Vec<Complex64>,
    },
    /// Maps applied left to right: `maps[0]` first.
    Composition(Vec<SchurMap>),
    /// Pointwise product of the factors.
    Product(Vec<SchurMap>),
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn trim(coeffs: &[Complex64]) -> &[Complex64] {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1] == Complex64::new(0.0, 0.0) {
        end -= 1;
    }
    &coeffs[..end]
}

/// Roots of a polynomial from the eigenvalues of its companion matrix.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let p = trim(coeffs);
    let degree = p.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = p[degree];
    let mut companion = linalg::CMatrix::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -p[i] / lead;
    }
    linalg::eigenvalues(&companion)
}

/// Polar sample grid over the closed disk: the origin plus `radial` rings.
pub fn disk_grid(radial: usize, angular: usize) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(radial * angular + 1);
    pts.push(Complex64::new(0.0, 0.0));
    for k in 1..=radial {
        let r = k as f64 / radial as f64;
        for j in 0..angular {
            pts.push(Complex64::from_polar(
                r,
                2.0 * PI * j as f64 / angular as f64,
            ));
        }
    }
    pts
}

/// Equispaced points on the unit circle starting at 1.
pub fn circle_grid(angular: usize) -> Vec<Complex64> {
    (0..angular)
        .map(|j| {
            // Exact values at the compass points keep `1`, `i`, `-1` on the grid.
            match (4 * j) % angular {
                0 => match (4 * j) / angular {
                    0 => Complex64::new(1.0, 0.0),
                    1 => Complex64::new(0.0, 1.0),
                    2 => Complex64::new(-1.0, 0.0),
                    _ => Complex64::new(0.0, -1.0),
                },
                _ => Complex64::from_polar(1.0, 2.0 * PI * j as f64 / angular as f64),
            }
        })
        .collect()
}

/// The 64-point check grid used for pointwise identities (4 rings x 16 rays).
pub fn check_grid() -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(64);
    for k in 1..=4 {
        let r = k as f64 / 4.0;
        for j in 0..16 {
            pts.push(Complex64::from_polar(r, 2.0 * PI * j as f64 / 16.0));
        }
    }
    pts
}

impl SchurMap {
    pub fn affine(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::ParamOutOfRange {
                name: "t",
                value: t,
                range: "(0, 1)",
            });
        }
        Ok(SchurMap::Affine(t))
    }

    pub fn blaschke(t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::ParamOutOfRange {
                name: "t",
                value: t,
                range: "[0, 1)",
            });
        }
        Ok(SchurMap::Blaschke(t))
    }

    pub fn mobius(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        if c == Complex64::new(0.0, 0.0) && d == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidMap(
                "Mobius denominator is identically zero".into(),
            ));
        }
        if (c + d).norm() <= POLE_TOL {
            return Err(Error::InvalidMap("Mobius map has a pole at 1".into()));
        }
        Ok(SchurMap::Mobius { a, b, c, d })
    }

    /// Disk automorphism vanishing at `a` and normalized so that it fixes 1.
    pub fn normalized_blaschke(a: Complex64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::ParamOutOfRange {
                name: "|a|",
                value: a.norm(),
                range: "[0, 1)",
            });
        }
        let one = Complex64::new(1.0, 0.0);
        let unimodular = (one - a.conj()) / (one - a);
        Self::mobius(unimodular, -unimodular * a, -a.conj(), one)
    }

    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidMap(
                "polynomial needs at least one coefficient".into(),
            ));
        }
        Ok(SchurMap::Polynomial(coeffs))
    }

    /// Rational map; the denominator is sampled on the closed disk and must
    /// stay away from zero there.
    pub fn rational(num: Vec<Complex64>, den: Vec<Complex64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidMap("rational map needs coefficients".into()));
        }
        let scale = den.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::InvalidMap(
                "rational denominator is identically zero".into(),
            ));
        }
        let floor = (1e-10 * scale).max(POLE_TOL);
        for z in disk_grid(DEFAULT_RADIAL, DEFAULT_ANGULAR) {
            if horner(&den, z).norm() <= floor {
                return Err(Error::InvalidMap(format!(
                    "rational denominator vanishes near {z} in the closed disk"
                )));
            }
        }
        Ok(SchurMap::Rational { num, den })
    }

    pub fn composition(maps: Vec<SchurMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::EmptyCycle);
        }
        Ok(SchurMap::Composition(maps))
    }

    pub fn product(factors: Vec<SchurMap>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidMap(
                "product needs at least one factor".into(),
            ));
        }
        Ok(SchurMap::Product(factors))
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        eval_map(self, z)
    }

    /// Value, or NaN at a pole. Convenient for matrix functions.
    pub fn eval_or_nan(&self, z: Complex64) -> Complex64 {
        eval_map(self, z).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    /// Coefficients when the map is a polynomial in `z`.
    pub fn polynomial_coeffs(&self) -> Option<Vec<Complex64>> {
        match self {
            SchurMap::Identity => Some(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
            SchurMap::Affine(t) => {
                Some(vec![Complex64::new(*t, 0.0), Complex64::new(1.0 - t, 0.0)])
            }
            SchurMap::Polynomial(p) => Some(p.clone()),
            _ => None,
        }
    }

    /// Numerator and denominator coefficients, for every variant except
    /// compositions.
    pub fn to_rational(&self) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let one = Complex64::new(1.0, 0.0);
        Ok(match self {
            SchurMap::Identity | SchurMap::Affine(_) | SchurMap::Polynomial(_) => (
                self.polynomial_coeffs().expect("polynomial variant"),
                vec![one],
            ),
            SchurMap::Blaschke(t) => (
                vec![Complex64::new(-t, 0.0), one],
                vec![one, Complex64::new(-t, 0.0)],
            ),
            SchurMap::Mobius { a, b, c, d } => (vec![*b, *a], vec![*d, *c]),
            SchurMap::Rational { num, den } => (num.clone(), den.clone()),
            SchurMap::Product(factors) => {
                let mut num = vec![one];
                let mut den = vec![one];
                for f in factors {
                    let (n, d) = f.to_rational()?;
                    num = poly_mul(&num, &n);
                    den = poly_mul(&den, &d);
                }
                (num, den)
            }
            SchurMap::Composition(_) => return Err(Error::UnsupportedVariant("Composition")),
        })
    }

    /// Poles in the finite plane. `None` for compositions, whose poles are
    /// not tracked.
    pub fn poles(&self) -> Option<Vec<Complex64>> {
        match self {
            SchurMap::Identity | SchurMap::Affine(_) | SchurMap::Polynomial(_) => Some(Vec::new()),
            SchurMap::Blaschke(t) => Some(if *t == 0.0 {
                Vec::new()
            } else {
                vec![Complex64::new(1.0 / t, 0.0)]
            }),
            SchurMap::Mobius { c, d, .. } => Some(if c.norm() == 0.0 {
                Vec::new()
            } else {
                vec![-d / c]
            }),
            SchurMap::Rational { den, .. } => polynomial_roots(den).ok(),
            SchurMap::Product(factors) => {
                let mut all = Vec::new();
                for f in factors {
                    all.extend(f.poles()?);
                }
                Some(all)
            }
            SchurMap::Composition(_) => None,
        }
    }

    /// True when the map agrees with `z ↦ z` on the check grid.
    pub fn is_identity_on_grid(&self) -> bool {
        check_grid()
            .into_iter()
            .chain(std::iter::once(Complex64::new(0.0, 0.0)))
            .all(|z| matches!(self.eval(z), Ok(w) if (w - z).norm() < 1e-12))
    }
}

pub fn eval_map(map: &SchurMap, z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let one = Complex64::new(1.0, 0.0);
    match map {
        SchurMap::Identity => Ok(z),
        // Written so that z = 1 maps to 1 exactly.
        SchurMap::Affine(t) => Ok(z + *t * (1.0 - z)),
        SchurMap::Blaschke(t) => {
            let den = one - *t * z;
            if den.norm() <= POLE_TOL {
                return Err(Error::PoleAtPoint(z));
            }
            Ok((z - *t) / den)
        }
        SchurMap::Mobius { a, b, c, d } => {
            let den = c * z + d;
            if den.norm() <= POLE_TOL {
                return Err(Error::PoleAtPoint(z));
            }
            Ok((a * z + b) / den)
        }
        SchurMap::Polynomial(p) => Ok(horner(p, z)),
        SchurMap::Rational { num, den } => {
            let q = horner(den, z);
            if q.norm() <= POLE_TOL {
                return Err(Error::PoleAtPoint(z));
            }
            Ok(horner(num, z) / q)
        }
        SchurMap::Composition(maps) => maps.iter().try_fold(z, |w, m| eval_map(m, w)),
        SchurMap::Product(factors) => factors
            .iter()
            .try_fold(one, |acc, f| Ok(acc * eval_map(f, z)?)),
    }
}

/// Central-difference derivative.
pub fn numeric_derivative(map: &SchurMap, z: Complex64, h: f64) -> Result<Complex64> {
    let h = Complex64::new(h, 0.0);
    Ok((map.eval(z + h)? - map.eval(z - h)?) / (2.0 * h))
}

/// Largest `|a(z) - b(z)|` over `points`.
pub fn max_deviation(a: &SchurMap, b: &SchurMap, points: &[Complex64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in points {
        worst = worst.max((a.eval(z)? - b.eval(z)?).norm());
    }
    Ok(worst)
}

/// Composition node for `p_K ∘ ⋯ ∘ p_1`, with `layers[0] = p_1`.
pub fn compose_cycle(layers: &[SchurMap]) -> Result<SchurMap> {
    SchurMap::composition(layers.to_vec())
}

/// One cycle of layers, each a Schur map fixing 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCycle {
    layers: Vec<SchurMap>,
    composite: SchurMap,
}

impl LayerCycle {
    pub fn new(layers: Vec<SchurMap>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyCycle);
        }
        for (index, layer) in layers.iter().enumerate() {
            let at_one =
                layer
                    .eval(Complex64::new(1.0, 0.0))
                    .map_err(|e| Error::LayerNotAdmissible {
                        index,
                        reason: e.to_string(),
                    })?;
            if (at_one - 1.0).norm() >= LAYER_FIX_TOL {
                return Err(Error::LayerNotAdmissible {
                    index,
                    reason: format!("layer maps 1 to {at_one}"),
                });
            }
            let bound = verify_schur_bound(layer, DEFAULT_RADIAL, DEFAULT_ANGULAR)?;
            if !bound.pass {
                return Err(Error::LayerNotAdmissible {
                    index,
                    reason: format!("sup |p| on the disk is {:.6}", bound.sup),
                });
            }
        }
        let composite = compose_cycle(&layers)?;
        Ok(LayerCycle { layers, composite })
    }

    /// The parametric two-layer cycle `[t + (1-t)z, b_t]` with composite
    /// `z / (1 + t - t z)`.
    pub fn parametric(t: f64) -> Result<Self> {
        Self::new(vec![SchurMap::affine(t)?, SchurMap::blaschke(t)?])
    }

    pub fn layers(&self) -> &[SchurMap] {
        &self.layers
    }

    pub fn composite(&self) -> &SchurMap {
        &self.composite
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.composite.eval(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    Budget,
    Nonconvergent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrace {
    pub start: Complex64,
    pub values: Vec<Complex64>,
    pub terminated: Termination,
    /// Period of a detected orbit repeat.
    pub period: Option<usize>,
}

impl ScalarTrace {
    pub fn last(&self) -> Complex64 {
        *self
            .values
            .last()
            .expect("trace holds at least the start value")
    }
}

/// Iterate an arbitrary map. Unlike [`iterate_scalar`], the map need not
/// belong to a layer cycle.
pub fn iterate_map(
    map: &SchurMap,
    z0: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<ScalarTrace> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::ParamOutOfRange {
            name: "tol/max_iter",
            value: tol,
            range: "tol > 0, max_iter >= 1",
        });
    }
    let mut values = vec![z0];
    let mut quiet = 0;
    for _ in 0..max_iter {
        let prev = *values.last().expect("nonempty");
        let next = map.eval(prev)?;
        let step = (next - prev).norm();
        values.push(next);
        if step < tol {
            quiet += 1;
            if quiet >= QUIET_STEPS {
                return Ok(ScalarTrace {
                    start: z0,
                    values,
                    terminated: Termination::Converged,
                    period: None,
                });
            }
            continue;
        }
        quiet = 0;
        if step > 100.0 * CYCLE_TOL {
            let n = values.len();
            for lag in 2..=CYCLE_WINDOW {
                if n > lag && (next - values[n - 1 - lag]).norm() < CYCLE_TOL {
                    return Ok(ScalarTrace {
                        start: z0,
                        values,
                        terminated: Termination::Nonconvergent,
                        period: Some(lag),
                    });
                }
            }
        }
    }
    Ok(ScalarTrace {
        start: z0,
        values,
        terminated: Termination::Budget,
        period: None,
    })
}

/// Iterate the cycle's composite from `z0`, which must lie in the closed disk.
pub fn iterate_scalar(
    cycle: &LayerCycle,
    z0: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<ScalarTrace> {
    if z0.norm() > 1.0 + 1e-12 {
        return Err(Error::ParamOutOfRange {
            name: "|z0|",
            value: z0.norm(),
            range: "[0, 1]",
        });
    }
    iterate_map(cycle.composite(), z0, tol, max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitClass {
    Zero,
    One,
    InteriorPoint(Complex64),
    NonConvergent,
}

pub fn classify_limit(trace: &ScalarTrace, tol: f64) -> LimitClass {
    if trace.terminated == Termination::Nonconvergent {
        return LimitClass::NonConvergent;
    }
    let last = trace.last();
    if (last - 1.0).norm() < tol {
        LimitClass::One
    } else if last.norm() < tol {
        LimitClass::Zero
    } else if trace.terminated == Termination::Converged && last.norm() < 1.0 - tol {
        LimitClass::InteriorPoint(last)
    } else {
        LimitClass::NonConvergent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub sup: f64,
    pub argmax: Complex64,
    pub pass: bool,
    /// First grid point where evaluation hit a pole.
    pub pole: Option<Complex64>,
}

pub fn verify_schur_bound(map: &SchurMap, radial: usize, angular: usize) -> Result<BoundReport> {
    if radial < 16 || angular < 64 {
        return Err(Error::ParamOutOfRange {
            name: "grid",
            value: radial.min(angular) as f64,
            range: "radial >= 16, angular >= 64",
        });
    }
    let mut sup: f64 = 0.0;
    let mut argmax = Complex64::new(0.0, 0.0);
    for z in disk_grid(radial, angular) {
        match map.eval(z) {
            Ok(w) => {
                let m = w.norm();
                if !m.is_finite() {
                    return Ok(BoundReport {
                        sup: f64::INFINITY,
                        argmax: z,
                        pass: false,
                        pole: Some(z),
                    });
                }
                if m > sup {
                    sup = m;
                    argmax = z;
                }
            }
            Err(_) => {
                return Ok(BoundReport {
                    sup: f64::INFINITY,
                    argmax: z,
                    pass: false,
                    pole: Some(z),
                })
            }
        }
    }
    Ok(BoundReport {
        sup,
        argmax,
        pass: sup <= 1.0 + SCHUR_SLACK,
        pole: None,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FppReport {
    /// `(λ, map(λ))` for unit-circle samples that keep modulus one without
    /// being fixed. Poles are recorded with an infinite value.
    pub violations: Vec<(Complex64, Complex64)>,
}

impl FppReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn verify_peripheral_fpp(map: &SchurMap, angular: usize) -> Result<FppReport> {
    if angular < 256 {
        return Err(Error::ParamOutOfRange {
            name: "angular",
            value: angular as f64,
            range: ">= 256",
        });
    }
    let mut report = FppReport::default();
    for lambda in circle_grid(angular) {
        match map.eval(lambda) {
            Ok(w) => {
                if w.norm() > 1.0 - 1e-9 && (w - lambda).norm() >= 1e-9 {
                    report.violations.push((lambda, w));
                }
            }
            Err(_) => report
                .violations
                .push((lambda, Complex64::new(f64::INFINITY, 0.0))),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenjoyWolff {
    pub point: Complex64,
    pub interior: bool,
}

/// Denjoy-Wolff point by forward iteration from 0, cross-checked from 0.5i.
pub fn denjoy_wolff(cycle: &LayerCycle, tol: f64, max_iter: usize) -> Result<DenjoyWolff> {
    if cycle.composite().is_identity_on_grid() {
        return Err(Error::IdentityCycle);
    }
    let seeds = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.5)];
    let mut limits = Vec::with_capacity(seeds.len());
    for z0 in seeds {
        let trace = iterate_scalar(cycle, z0, tol, max_iter)?;
        if trace.terminated != Termination::Converged {
            return Err(Error::NonConvergent(format!(
                "orbit of {z0} did not settle within {max_iter} steps"
            )));
        }
        limits.push(trace.last());
    }
    if (limits[0] - limits[1]).norm() >= 10.0 * tol {
        return Err(Error::NonConvergent(format!(
            "seeds settle at different points {} and {}",
            limits[0], limits[1]
        )));
    }
    let point = limits[0];
    Ok(DenjoyWolff {
        point,
        interior: point.norm() < 1.0 - tol,
    })
}

/// Closed-form `m`-th iterate of `z / (1 + t - t z)`:
/// `μ^m z / (1 - (1 - μ^m) z)` with `μ = 1/(1+t)`.
pub fn closed_form_param_iterate(t: f64, m: u32, z: Complex64) -> Result<Complex64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::ParamOutOfRange {
            name: "t",
            value: t,
            range: "(0, 1)",
        });
    }
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::ParamOutOfRange {
            name: "|z|",
            value: z.norm(),
            range: "[0, 1]",
        });
    }
    let mu_m = (1.0 / (1.0 + t)).powi(m as i32);
    // Same denominator as 1 - (1 - μ^m) z, without cancellation near z = 1.
    let den = (1.0 - z) + mu_m * z;
    // |den| >= μ^m on the closed disk, so only underflow can make it vanish.
    if den.norm() == 0.0 {
        return Err(Error::PoleAtPoint(z));
    }
    Ok(mu_m * z / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Layers (1+z²)/2 then b_{1/2}, whose printed composite is wrong.
    fn square_mean_layers() -> Vec<SchurMap> {
        vec![
            SchurMap::polynomial(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap(),
            SchurMap::blaschke(0.5).unwrap(),
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(
            SchurMap::Blaschke(0.5).eval(c(0.5, 0.0)).unwrap(),
            c(0.0, 0.0)
        );
        assert_eq!(SchurMap::Identity.eval(c(0.3, 0.4)).unwrap(), c(0.3, 0.4));
        assert_eq!(
            SchurMap::Affine(0.5).eval(c(0.0, 0.0)).unwrap(),
            c(0.5, 0.0)
        );
    }

    #[test]
    fn eval_reports_poles() {
        let b = SchurMap::Blaschke(0.5);
        assert_eq!(b.eval(c(2.0, 0.0)), Err(Error::PoleAtPoint(c(2.0, 0.0))));
        let m = SchurMap::mobius(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)).unwrap();
        assert!(matches!(m.eval(c(-3.0, 0.0)), Err(Error::PoleAtPoint(_))));
    }

    #[test]
    fn constructors_validate() {
        assert!(SchurMap::affine(1.5).is_err());
        assert!(SchurMap::blaschke(1.0).is_err());
        assert!(SchurMap::mobius(c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)).is_err());
        assert!(SchurMap::mobius(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).is_err());
        // Denominator 1 - 2z vanishes at 1/2.
        assert!(SchurMap::rational(vec![c(1.0, 0.0)], vec![c(1.0, 0.0), c(-2.0, 0.0)]).is_err());
        assert!(SchurMap::rational(vec![c(1.0, 0.0)], vec![c(3.0, 0.0), c(-1.0, 0.0)]).is_ok());
        assert_eq!(compose_cycle(&[]), Err(Error::EmptyCycle));
    }

    #[test]
    fn parametric_composite_matches_closed_formula() {
        let composite = compose_cycle(&[SchurMap::Affine(0.5), SchurMap::Blaschke(0.5)]).unwrap();
        for z in check_grid() {
            let expected = z / (1.5 - 0.5 * z);
            assert!((composite.eval(z).unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_composite() {
        let composite = compose_cycle(&[SchurMap::Identity, SchurMap::Identity]).unwrap();
        assert!(composite.is_identity_on_grid());
    }

    #[test]
    fn square_mean_composite_is_not_the_printed_formula() {
        let composite = compose_cycle(&square_mean_layers()).unwrap();
        for z in check_grid() {
            // Direct algebra: ((1+z²)/2 - 1/2) / (1 - (1+z²)/4) = 2z²/(3 - z²).
            let oracle = 2.0 * z * z / (3.0 - z * z);
            assert!((composite.eval(z).unwrap() - oracle).norm() < 1e-12);
        }
        let z = c(0.5, 0.0);
        let printed = z * z / (2.0 - z * z);
        assert!((composite.eval(z).unwrap() - printed).norm() > 0.01);
    }

    #[test]
    fn composite_equals_sequential_application() {
        let layers = square_mean_layers();
        let cycle = LayerCycle::new(layers.clone()).unwrap();
        for z in check_grid() {
            let sequential = layers.iter().fold(z, |w, m| m.eval(w).unwrap());
            assert!((cycle.eval(z).unwrap() - sequential).norm() < 1e-12);
        }
    }

    #[test]
    fn cycle_rejects_bad_layers() {
        let rotation = SchurMap::polynomial(vec![c(0.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert!(matches!(
            LayerCycle::new(vec![rotation]),
            Err(Error::LayerNotAdmissible { index: 0, .. })
        ));
        let doubling = SchurMap::polynomial(vec![c(-1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert!(LayerCycle::new(vec![SchurMap::Identity, doubling]).is_err());
        assert_eq!(LayerCycle::new(vec![]), Err(Error::EmptyCycle));
    }

    #[test]
    fn iterate_examples() {
        let cycle = LayerCycle::parametric(0.5).unwrap();
        let fixed = iterate_scalar(&cycle, c(1.0, 0.0), 1e-12, 50).unwrap();
        assert!(fixed.values.iter().all(|&v| v == c(1.0, 0.0)));
        assert_eq!(fixed.terminated, Termination::Converged);
        assert_eq!(fixed.values.len(), 4);

        let trace = iterate_scalar(&cycle, c(0.5, 0.0), 1e-12, 200).unwrap();
        assert!((trace.values[1] - c(0.4, 0.0)).norm() < 1e-15);
        let mu: f64 = 2.0 / 3.0;
        for (m, v) in trace.values.iter().enumerate() {
            let mu_m = mu.powi(m as i32);
            let expected = mu_m * 0.5 / (1.0 - (1.0 - mu_m) * 0.5);
            assert!((v - expected).norm() < 1e-13, "m = {m}");
        }
        assert_eq!(trace.terminated, Termination::Converged);
    }

    #[test]
    fn iterate_rejects_points_outside_disk() {
        let cycle = LayerCycle::parametric(0.5).unwrap();
        assert!(iterate_scalar(&cycle, c(1.1, 0.0), 1e-12, 10).is_err());
        assert!(iterate_scalar(&cycle, c(0.1, 0.0), 0.0, 10).is_err());
    }

    #[test]
    fn classify_examples() {
        let cycle = LayerCycle::parametric(0.5).unwrap();
        let one = iterate_scalar(&cycle, c(1.0, 0.0), 1e-12, 100).unwrap();
        assert_eq!(classify_limit(&one, 1e-9), LimitClass::One);

        let zeros = ScalarTrace {
            start: c(0.0, 0.0),
            values: vec![c(0.0, 0.0); 4],
            terminated: Termination::Converged,
            period: None,
        };
        assert_eq!(classify_limit(&zeros, 1e-9), LimitClass::Zero);

        let quarter_turn = SchurMap::polynomial(vec![c(0.0, 0.0), c(0.0, 1.0)]).unwrap();
        let orbit = iterate_map(&quarter_turn, c(1.0, 0.0), 1e-12, 100).unwrap();
        assert_eq!(orbit.period, Some(4));
        assert_eq!(classify_limit(&orbit, 1e-9), LimitClass::NonConvergent);

        let half = SchurMap::mobius(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)).unwrap();
        let shrink = SchurMap::composition(vec![half, SchurMap::Affine(0.5)]).unwrap();
        // z ↦ 1/2 + z/4 has interior fixed point 2/3.
        let interior = iterate_map(&shrink, c(0.0, 0.0), 1e-13, 500).unwrap();
        match classify_limit(&interior, 1e-9) {
            LimitClass::InteriorPoint(tau) => assert!((tau - c(2.0 / 3.0, 0.0)).norm() < 1e-11),
            other => panic!("expected interior point, got {other:?}"),
        }
    }

    #[test]
    fn schur_bound_examples() {
        let b = verify_schur_bound(&SchurMap::Blaschke(0.5), 32, 128).unwrap();
        assert!(b.pass && (b.sup - 1.0).abs() < 1e-12);
        let twice = SchurMap::polynomial(vec![c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        let r = verify_schur_bound(&twice, 32, 128).unwrap();
        assert!(!r.pass && (r.sup - 2.0).abs() < 1e-12);
        let avg = SchurMap::polynomial(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        let r = verify_schur_bound(&avg, 32, 128).unwrap();
        assert!(r.pass && (r.sup - 1.0).abs() < 1e-12);
        assert!(verify_schur_bound(&avg, 8, 128).is_err());
    }

    #[test]
    fn schur_bound_flags_pole_location() {
        let m = SchurMap::Mobius {
            a: c(1.0, 0.0),
            b: c(0.0, 0.0),
            c: c(2.0, 0.0),
            d: c(-1.0, 0.0),
        };
        let r = verify_schur_bound(&m, 16, 64).unwrap();
        assert!(!r.pass);
        assert_eq!(r.pole, Some(c(0.5, 0.0)));
    }

    #[test]
    fn peripheral_fpp_examples() {
        assert!(verify_peripheral_fpp(&SchurMap::Identity, 256)
            .unwrap()
            .holds());
        assert!(verify_peripheral_fpp(&SchurMap::Affine(0.5), 256)
            .unwrap()
            .holds());
        let report = verify_peripheral_fpp(&SchurMap::Blaschke(0.5), 256).unwrap();
        let at_i = report
            .violations
            .iter()
            .find(|(l, _)| (*l - c(0.0, 1.0)).norm() < 1e-15)
            .expect("λ = i must violate");
        assert!((at_i.1 - c(-0.8, 0.6)).norm() < 1e-15);
        // Only ±1 are fixed by the automorphism.
        assert_eq!(report.violations.len(), 254);
    }

    #[test]
    fn denjoy_wolff_examples() {
        let dw = denjoy_wolff(&LayerCycle::parametric(0.5).unwrap(), 1e-12, 10_000).unwrap();
        assert!(dw.interior && dw.point.norm() < 1e-11);

        let midpoint = LayerCycle::new(vec![SchurMap::Affine(0.5)]).unwrap();
        let dw = denjoy_wolff(&midpoint, 1e-12, 10_000).unwrap();
        assert!(!dw.interior && (dw.point - 1.0).norm() < 1e-11);

        let id = LayerCycle::new(vec![SchurMap::Identity]).unwrap();
        assert_eq!(denjoy_wolff(&id, 1e-12, 100), Err(Error::IdentityCycle));
    }

    #[test]
    fn closed_form_examples() {
        let z = c(0.3, -0.2);
        assert_eq!(closed_form_param_iterate(0.5, 0, z).unwrap(), z);
        let v = closed_form_param_iterate(0.5, 2, c(0.5, 0.0)).unwrap();
        assert!((v - c(4.0 / 13.0, 0.0)).norm() < 1e-15);
        assert!(closed_form_param_iterate(1.0, 2, z).is_err());
    }

    #[test]
    fn rational_form_and_poles() {
        let (n, d) = SchurMap::Blaschke(0.25).to_rational().unwrap();
        assert_eq!(n, vec![c(-0.25, 0.0), c(1.0, 0.0)]);
        assert_eq!(d, vec![c(1.0, 0.0), c(-0.25, 0.0)]);
        assert_eq!(SchurMap::Blaschke(0.25).poles().unwrap(), vec![c(4.0, 0.0)]);
        let r = SchurMap::rational(
            vec![c(1.0, 0.0)],
            vec![c(6.0, 0.0), c(-5.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let mut poles: Vec<f64> = r.poles().unwrap().iter().map(|p| p.re).collect();
        poles.sort_by(f64::total_cmp);
        assert!((poles[0] - 2.0).abs() < 1e-12 && (poles[1] - 3.0).abs() < 1e-12);
        let prod = SchurMap::product(vec![SchurMap::Blaschke(0.5), SchurMap::Identity]).unwrap();
        let (pn, pd) = prod.to_rational().unwrap();
        let z = c(0.2, 0.7);
        let direct = prod.eval(z).unwrap();
        assert!((horner(&pn, z) / horner(&pd, z) - direct).norm() < 1e-15);
        assert!(SchurMap::Composition(vec![SchurMap::Identity])
            .to_rational()
            .is_err());
    }

    #[test]
    fn normalized_blaschke_fixes_one() {
        let b = SchurMap::normalized_blaschke(c(0.3, 0.4)).unwrap();
        assert!((b.eval(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        assert!(b.eval(c(0.3, 0.4)).unwrap().norm() < 1e-15);
        assert!(verify_schur_bound(&b, 32, 128).unwrap().pass);
    }

    #[test]
    fn dichotomy_for_parametric_cycle() {
        let cycle = LayerCycle::parametric(0.5).unwrap();
        for z in disk_grid(32, 128) {
            let trace = iterate_scalar(&cycle, z, 1e-12, 100_000).unwrap();
            let class = classify_limit(&trace, 1e-9);
            if z == c(1.0, 0.0) {
                assert_eq!(class, LimitClass::One);
            } else {
                assert_eq!(class, LimitClass::Zero, "z = {z}");
            }
        }
    }

    #[test]
    fn limit_values_are_fixed_by_composite() {
        for t in [0.1, 0.5, 0.9] {
            let cycle = LayerCycle::parametric(t).unwrap();
            assert!(cycle.eval(c(0.0, 0.0)).unwrap().norm() < 1e-12);
            assert!((cycle.eval(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-12);
        }
        let cycle = LayerCycle::new(square_mean_layers()).unwrap();
        assert!(cycle.eval(c(0.0, 0.0)).unwrap().norm() < 1e-12);
        assert!((cycle.eval(c(1.0, 0.0)).unwrap() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn geometric_rate_matches_multiplier() {
        let t = 0.5;
        let cycle = LayerCycle::parametric(t).unwrap();
        let log_mu = (1.0f64 / (1.0 + t)).ln();
        for z in disk_grid(4, 16)
            .into_iter()
            .skip(1)
            .filter(|z| z.norm() <= 0.5)
        {
            let trace = iterate_map(cycle.composite(), z, f64::MIN_POSITIVE, 40).unwrap();
            let pts: Vec<(f64, f64)> = (5..=40)
                .map(|m| (m as f64, trace.values[m].norm().ln()))
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let slope = sxy / sxx;
            assert!(
                ((slope - log_mu) / log_mu).abs() < 0.01,
                "z = {z}, slope {slope}"
            );
        }
    }

    proptest! {
        #[test]
        fn traces_stay_in_the_disk(t in 0.01f64..0.99, s in 0.0f64..0.99, r in 0.0f64..=1.0, theta in 0.0f64..6.3) {
            let cycle = LayerCycle::new(vec![
                SchurMap::Affine(t),
                SchurMap::Blaschke(s),
                SchurMap::polynomial(vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap(),
            ]).unwrap();
            let trace = iterate_scalar(&cycle, Complex64::from_polar(r, theta), 1e-12, 500).unwrap();
            for v in &trace.values {
                prop_assert!(v.norm() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn closed_form_matches_iteration(t in 0.01f64..0.99, r in 0.0f64..=1.0, theta in 0.0f64..6.3) {
            let cycle = LayerCycle::parametric(t).unwrap();
            let z = Complex64::from_polar(r, theta);
            prop_assume!((z - 1.0).norm() > 1e-3 || z == c(1.0, 0.0));
            let trace = iterate_map(cycle.composite(), z, f64::MIN_POSITIVE, 40).unwrap();
            for (m, v) in trace.values.iter().enumerate() {
                let cf = closed_form_param_iterate(t, m as u32, z).unwrap();
                prop_assert!((v - cf).norm() < 1e-12);
            }
        }
    }
}
