//! Finite-dimensional functional calculus.
//!
//! Normal matrices are carried in diagonal form and support the Borel
//! calculus `g(A) = U diag(g(λ)) U*`. General matrices use the Cauchy
//! integral of the resolvent over a circle, approximated by the trapezoid
//! rule with node doubling. Riesz projections, Ritt-constant sampling and
//! power bounds live here as well.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{classify_limit, iterate_scalar, LayerCycle, LimitClass, SchurMap};

/// Eigenvalues closer than this are orthonormalized as one eigenspace.
pub const CLUSTER_RADIUS: f64 = 1e-8;
/// Minimum distance between a contour and any eigenvalue.
pub const GAP_TOL: f64 = 1e-6;
pub const MIN_NODES: usize = 16;
pub const MAX_NODES: usize = 4096;
/// Relative Frobenius change accepted between successive node doublings.
pub const QUADRATURE_TOL: f64 = 1e-10;
pub const DEFAULT_NODES: usize = 32;
/// Power norms beyond this stop [`power_bound_estimate`].
pub const POWER_OVERFLOW: f64 = 1e12;
/// Ritt estimates above this are reported as unbounded.
pub const RITT_BLOWUP: f64 = 1e3;

/// A normal matrix in the form `U diag(λ) U*`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalOperator {
    eigenvalues: Vec<Complex64>,
    basis: CMatrix,
}

impl NormalOperator {
    pub fn from_parts(eigenvalues: Vec<Complex64>, basis: CMatrix) -> Result<Self> {
        let n = eigenvalues.len();
        if basis.nrows() != n || basis.ncols() != n {
            return Err(Error::IncompatibleDims(format!(
                "{} eigenvalues with a {}x{} basis",
                n,
                basis.nrows(),
                basis.ncols()
            )));
        }
        let defect = linalg::frobenius(&(basis.adjoint() * &basis - linalg::identity(n)));
        if defect >= 1e-10 {
            return Err(Error::SolverFailure(format!(
                "basis is not orthonormal (defect {defect:.3e})"
            )));
        }
        if eigenvalues
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite);
        }
        Ok(NormalOperator { eigenvalues, basis })
    }

    pub fn diagonal(eigenvalues: Vec<Complex64>) -> Self {
        let n = eigenvalues.len();
        NormalOperator {
            eigenvalues,
            basis: linalg::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn matrix(&self) -> CMatrix {
        reconstruct(&self.basis, &self.eigenvalues)
    }

    /// Same eigenbasis, eigenvalues replaced by `g(λ)`.
    pub fn map_eigenvalues(&self, g: impl Fn(Complex64) -> Complex64) -> Result<NormalOperator> {
        let mut mapped = Vec::with_capacity(self.dim());
        for &lambda in &self.eigenvalues {
            let v = g(lambda);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::FunctionUndefinedAtEigenvalue(lambda));
            }
            mapped.push(v);
        }
        Ok(NormalOperator {
            eigenvalues: mapped,
            basis: self.basis.clone(),
        })
    }

    /// Spectral measure of a set of eigenvalue indices: `Σ u_i u_i*`.
    pub fn eigenprojection(&self, selected: impl Fn(usize, Complex64) -> bool) -> CMatrix {
        let mask: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if selected(i, l) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        reconstruct(&self.basis, &mask)
    }
}

fn reconstruct(basis: &CMatrix, values: &[Complex64]) -> CMatrix {
    let mut scaled = basis.clone();
    for (j, &v) in values.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= v;
        }
    }
    scaled * basis.adjoint()
}

/// A general square matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    entries: CMatrix,
}

impl DenseOperator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::IncompatibleDims(format!(
                "{}x{} matrix is not square",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !linalg::all_finite(&entries) {
            return Err(Error::NonFinite);
        }
        Ok(DenseOperator { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        linalg::eigenvalues(&self.entries)
    }
}

impl From<&NormalOperator> for DenseOperator {
    fn from(a: &NormalOperator) -> Self {
        DenseOperator {
            entries: a.matrix(),
        }
    }
}

/// Selection of eigenvalues for a spectral projection.
#[derive(Debug, Clone)]
pub enum SpectralSet {
    /// Eigenvalues within `radius` of any listed point.
    ExplicitPoints { points: Vec<Complex64>, radius: f64 },
    /// Eigenvalues whose scalar orbit under `cycle` classifies as `target`.
    CharacteristicOfLimit {
        cycle: LayerCycle,
        target: LimitClass,
        tol: f64,
        max_iter: usize,
    },
}

impl SpectralSet {
    pub fn points(points: Vec<Complex64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::ParamOutOfRange {
                name: "radius",
                value: radius,
                range: "> 0",
            });
        }
        Ok(SpectralSet::ExplicitPoints { points, radius })
    }

    /// The eigenvalues the cycle drives to 1.
    pub fn fixed_by(cycle: LayerCycle) -> Self {
        SpectralSet::CharacteristicOfLimit {
            cycle,
            target: LimitClass::One,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }

    pub fn contains(&self, lambda: Complex64) -> bool {
        match self {
            SpectralSet::ExplicitPoints { points, radius } => {
                points.iter().any(|p| (p - lambda).norm() <= *radius)
            }
            SpectralSet::CharacteristicOfLimit {
                cycle,
                target,
                tol,
                max_iter,
            } => {
                match iterate_scalar(cycle, lambda, crate::scalar::DEFAULT_SCALAR_TOL, *max_iter) {
                    Ok(trace) => same_class(&classify_limit(&trace, *tol), target),
                    Err(_) => false,
                }
            }
        }
    }
}

fn same_class(a: &LimitClass, b: &LimitClass) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

/// Circle used for contour integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::ParamOutOfRange {
                name: "radius",
                value: radius,
                range: "> 0",
            });
        }
        if nodes < MIN_NODES {
            return Err(Error::ParamOutOfRange {
                name: "nodes",
                value: nodes as f64,
                range: ">= 16",
            });
        }
        Ok(ContourSpec {
            center,
            radius,
            nodes,
        })
    }

    /// Circle around `center` with radius half the distance to the nearest
    /// eigenvalue not equal to `center` (within `GAP_TOL`). With nothing to
    /// exclude the radius is 0.5.
    pub fn isolating(eigenvalues: &[Complex64], center: Complex64) -> Result<Self> {
        let nearest = eigenvalues
            .iter()
            .map(|l| (l - center).norm())
            .filter(|&d| d > GAP_TOL)
            .fold(f64::INFINITY, f64::min);
        let radius = if nearest.is_finite() {
            nearest / 2.0
        } else {
            0.5
        };
        Self::new(center, radius, DEFAULT_NODES)
    }

    /// Circle enclosing every eigenvalue while excluding every pole of the
    /// integrand. Tries the spectral centroid and the origin as centers and
    /// keeps the one with the wider annulus of analyticity.
    pub fn enclosing(eigenvalues: &[Complex64], poles: &[Complex64]) -> Result<Self> {
        let n = eigenvalues.len().max(1) as f64;
        let centroid = eigenvalues.iter().sum::<Complex64>() / n;
        let mut best: Option<(f64, ContourSpec)> = None;
        for center in [centroid, Complex64::new(0.0, 0.0)] {
            let r_in = eigenvalues
                .iter()
                .map(|l| (l - center).norm())
                .fold(0.0, f64::max);
            let r_out = poles
                .iter()
                .map(|p| (p - center).norm())
                .fold(f64::INFINITY, f64::min);
            let radius = if r_out.is_infinite() {
                (1.5 * r_in).max(r_in + 0.25)
            } else if r_in <= GAP_TOL {
                (r_out / 2.0).min(0.25)
            } else if r_out > r_in * (1.0 + 4.0 * GAP_TOL) {
                (r_in * r_out).sqrt()
            } else {
                continue;
            };
            let score = if r_in <= GAP_TOL {
                f64::INFINITY
            } else {
                (radius / r_in).min(r_out / radius)
            };
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, ContourSpec::new(center, radius, DEFAULT_NODES)?));
            }
        }
        best.map(|(_, spec)| spec).ok_or_else(|| {
            let worst = eigenvalues
                .iter()
                .cloned()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap_or_default();
            Error::ContourTooClose {
                eigenvalue: worst,
                distance: 0.0,
            }
        })
    }
}

/// Normal-matrix diagonalization from the complex Schur form, with
/// orthonormalization inside eigenvalue clusters.
pub fn diagonalize_normal(m: &CMatrix, tol: f64) -> Result<NormalOperator> {
    if m.nrows() != m.ncols() {
        return Err(Error::IncompatibleDims("matrix is not square".into()));
    }
    let scale = linalg::frobenius(m);
    let residual = linalg::normality_residual(m);
    if residual >= tol * scale * scale && residual > 0.0 {
        return Err(Error::NotNormal(residual));
    }
    let n = m.nrows();
    let (q, t) = linalg::schur(m)?;
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // Single-linkage clusters of numerically equal eigenvalues.
    let mut cluster = vec![usize::MAX; n];
    let mut next_id = 0;
    for i in 0..n {
        if cluster[i] != usize::MAX {
            continue;
        }
        cluster[i] = next_id;
        let mut stack = vec![i];
        while let Some(k) = stack.pop() {
            for j in 0..n {
                if cluster[j] == usize::MAX
                    && (eigenvalues[j] - eigenvalues[k]).norm() < CLUSTER_RADIUS
                {
                    cluster[j] = next_id;
                    stack.push(j);
                }
            }
        }
        next_id += 1;
    }
    let mut basis = q;
    for id in 0..next_id {
        let members: Vec<usize> = (0..n).filter(|&j| cluster[j] == id).collect();
        for (pos, &j) in members.iter().enumerate() {
            for &k in &members[..pos] {
                let proj = basis.column(k).dotc(&basis.column(j));
                let ck = basis.column(k).into_owned();
                let mut cj = basis.column_mut(j);
                cj -= ck * proj;
            }
            let norm = basis.column(j).norm();
            if norm == 0.0 {
                return Err(Error::SolverFailure("degenerate eigenvector".into()));
            }
            basis.column_mut(j).unscale_mut(norm);
        }
    }
    let op = NormalOperator::from_parts(eigenvalues, basis)?;
    let err = linalg::frobenius(&(op.matrix() - m));
    if err > 1e-8 * scale.max(f64::MIN_POSITIVE) && err > 1e-300 {
        return Err(Error::SolverFailure(format!(
            "reconstruction error {err:.3e}"
        )));
    }
    Ok(op)
}

/// Borel calculus `U diag(g(λ_i)) U*`.
pub fn apply_borel(a: &NormalOperator, g: impl Fn(Complex64) -> Complex64) -> Result<CMatrix> {
    Ok(a.map_eigenvalues(g)?.matrix())
}

/// Orthogonal projection onto the eigenvectors whose eigenvalue lies in `s`.
pub fn spectral_projection(a: &NormalOperator, s: &SpectralSet) -> CMatrix {
    a.eigenprojection(|_, l| s.contains(l))
}

fn distance_to_spectrum(eigenvalues: &[Complex64], z: Complex64) -> f64 {
    eigenvalues
        .iter()
        .map(|l| (l - z).norm())
        .fold(f64::INFINITY, f64::min)
}

/// `(ζI - A)^{-1}` with spectrum and conditioning guards.
pub fn resolvent(a: &DenseOperator, zeta: Complex64) -> Result<CMatrix> {
    let eigs = a.eigenvalues()?;
    if distance_to_spectrum(&eigs, zeta) <= 1e-12 {
        return Err(Error::SpectrumHit(zeta));
    }
    let n = a.dim();
    let shifted = linalg::identity(n) * zeta - a.matrix();
    let (inv, cond) = linalg::inverse_with_condition(&shifted).ok_or(Error::SpectrumHit(zeta))?;
    if cond > 1e12 {
        return Err(Error::IllConditioned(cond));
    }
    let residual = linalg::frobenius(&(&shifted * &inv - linalg::identity(n)));
    if residual >= 1e-8 {
        return Err(Error::IllConditioned(cond));
    }
    Ok(inv)
}

fn check_contour(eigs: &[Complex64], contour: &ContourSpec) -> Result<()> {
    for &l in eigs {
        let d = ((l - contour.center).norm() - contour.radius).abs();
        if d < GAP_TOL {
            return Err(Error::ContourTooClose {
                eigenvalue: l,
                distance: d,
            });
        }
    }
    Ok(())
}

/// One trapezoid term at node `ζ = c + r e^{iθ}`: `g(ζ) r e^{iθ} (ζI - A)^{-1}`.
fn quadrature_term(
    a: &CMatrix,
    g: &impl Fn(Complex64) -> Complex64,
    contour: &ContourSpec,
    theta: f64,
) -> Result<CMatrix> {
    let e = Complex64::from_polar(1.0, theta);
    let zeta = contour.center + contour.radius * e;
    let gz = g(zeta);
    if !(gz.re.is_finite() && gz.im.is_finite()) {
        return Err(Error::PoleAtPoint(zeta));
    }
    let n = a.nrows();
    let shifted = linalg::identity(n) * zeta - a;
    let inv = shifted.try_inverse().ok_or(Error::SpectrumHit(zeta))?;
    Ok(inv * (gz * contour.radius * e))
}

fn node_sum(
    a: &CMatrix,
    g: &impl Fn(Complex64) -> Complex64,
    contour: &ContourSpec,
    nodes: usize,
    stride: usize,
    offset: usize,
) -> Result<CMatrix> {
    let terms = (offset..nodes)
        .step_by(stride)
        .map(|j| quadrature_term(a, g, contour, 2.0 * PI * j as f64 / nodes as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(linalg::pairwise_sum(&terms).unwrap_or_else(|| CMatrix::zeros(a.nrows(), a.ncols())))
}

/// Result of an adaptive quadrature run.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub value: CMatrix,
    pub nodes: usize,
    /// Frobenius change at the final doubling.
    pub last_change: f64,
}

/// `(1/2πi) ∮ g(ζ)(ζI - A)^{-1} dζ` by the trapezoid rule, doubling the node
/// count until the relative change drops below `QUADRATURE_TOL`.
pub fn contour_quadrature(
    a: &DenseOperator,
    g: impl Fn(Complex64) -> Complex64,
    contour: &ContourSpec,
) -> Result<Quadrature> {
    check_contour(&a.eigenvalues()?, contour)?;
    let m = a.matrix();
    let mut nodes = contour.nodes.max(MIN_NODES);
    let mut sum = node_sum(m, &g, contour, nodes, 1, 0)?;
    let mut value = linalg::scale(&sum, Complex64::new(1.0 / nodes as f64, 0.0));
    loop {
        let doubled = nodes * 2;
        if doubled > MAX_NODES {
            return Err(Error::NoConvergence {
                nodes,
                change: f64::NAN,
            });
        }
        // New nodes are the odd indices of the refined grid.
        sum += node_sum(m, &g, contour, doubled, 2, 1)?;
        let next = linalg::scale(&sum, Complex64::new(1.0 / doubled as f64, 0.0));
        let change = linalg::frobenius(&(&next - &value));
        let scale = linalg::frobenius(&next).max(1.0);
        nodes = doubled;
        value = next;
        if change < QUADRATURE_TOL * scale {
            return Ok(Quadrature {
                value,
                nodes,
                last_change: change,
            });
        }
        if nodes * 2 > MAX_NODES {
            return Err(Error::NoConvergence { nodes, change });
        }
    }
}

pub fn contour_calculus(
    a: &DenseOperator,
    g: impl Fn(Complex64) -> Complex64,
    contour: &ContourSpec,
) -> Result<CMatrix> {
    contour_quadrature(a, g, contour).map(|q| q.value)
}

/// Holomorphic calculus of a Schur map on a general matrix. Polynomial maps
/// are evaluated exactly by Horner's rule, compositions layer by layer,
/// everything else by contour quadrature on an automatically chosen circle.
pub fn apply_map_dense(a: &DenseOperator, map: &SchurMap) -> Result<CMatrix> {
    if let SchurMap::Affine(t) = map {
        let gap = linalg::identity(a.dim()) - a.matrix();
        return Ok(a.matrix() + gap * Complex64::new(*t, 0.0));
    }
    if let Some(coeffs) = map.polynomial_coeffs() {
        let n = a.dim();
        let mut acc = CMatrix::zeros(n, n);
        for &coef in coeffs.iter().rev() {
            acc = acc * a.matrix() + linalg::identity(n) * coef;
        }
        return Ok(acc);
    }
    match map {
        SchurMap::Composition(maps) => {
            let mut current = a.clone();
            for m in maps {
                current = DenseOperator::new(apply_map_dense(&current, m)?)?;
            }
            Ok(current.into_matrix())
        }
        SchurMap::Product(factors) => {
            let n = a.dim();
            let mut acc = linalg::identity(n);
            for f in factors {
                acc *= apply_map_dense(a, f)?;
            }
            Ok(acc)
        }
        _ => {
            let poles = map.poles().unwrap_or_default();
            let contour = ContourSpec::enclosing(&a.eigenvalues()?, &poles)?;
            contour_calculus(a, |z| map.eval_or_nan(z), &contour)
        }
    }
}

/// Riesz projection for the eigenvalues inside `contour`.
pub fn riesz_projection(a: &DenseOperator, contour: &ContourSpec) -> Result<CMatrix> {
    contour_calculus(a, |_| Complex64::new(1.0, 0.0), contour)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RittEstimate {
    pub constant: f64,
    /// Maximum over the angular samples at radius `1 + 2^-k`, k = 1, 2, ...
    pub per_radius: Vec<f64>,
    pub bounded: bool,
}

/// Samples `(|z| - 1) ‖(zI - A)^{-1}‖₂` on radii `1 + 2^-k`.
pub fn ritt_constant(a: &DenseOperator, radial: usize, angular: usize) -> Result<RittEstimate> {
    let rho = linalg::spectral_radius(a.matrix())?;
    if rho > 1.0 + 1e-9 {
        return Err(Error::SpectralRadiusExceedsOne(rho));
    }
    let n = a.dim();
    let mut per_radius = Vec::with_capacity(radial);
    for k in 1..=radial {
        let gap = 0.5f64.powi(k as i32);
        let mut worst: f64 = 0.0;
        for j in 0..angular.max(1) {
            let z = Complex64::from_polar(1.0 + gap, 2.0 * PI * j as f64 / angular.max(1) as f64);
            let shifted = linalg::identity(n) * z - a.matrix();
            let value = match shifted.try_inverse() {
                Some(inv) if linalg::all_finite(&inv) => gap * linalg::op_norm(&inv),
                _ => f64::INFINITY,
            };
            worst = worst.max(value);
        }
        per_radius.push(worst);
    }
    let constant = per_radius.iter().cloned().fold(0.0, f64::max);
    Ok(RittEstimate {
        constant,
        per_radius,
        bounded: constant < RITT_BLOWUP,
    })
}

/// `max_{1 ≤ n ≤ N} ‖Aⁿ‖₂`.
pub fn power_bound_estimate(a: &DenseOperator, n_max: usize) -> Result<f64> {
    if n_max == 0 {
        return Err(Error::ParamOutOfRange {
            name: "N",
            value: 0.0,
            range: ">= 1",
        });
    }
    let mut power = a.matrix().clone();
    let mut sup: f64 = 0.0;
    for step in 1..=n_max {
        if step > 1 {
            power = &power * a.matrix();
        }
        let norm = linalg::op_norm(&power);
        if !(norm <= POWER_OVERFLOW) {
            return Err(Error::Overflow { step, norm });
        }
        sup = sup.max(norm);
    }
    Ok(sup)
}

/// `{g(λ_i)}` as a multiset.
pub fn spectrum_image(
    a: &NormalOperator,
    g: impl Fn(Complex64) -> Complex64,
) -> Result<Vec<Complex64>> {
    Ok(a.map_eigenvalues(g)?.eigenvalues)
}
