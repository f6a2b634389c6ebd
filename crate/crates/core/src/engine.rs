//! Operator-level iteration: function iteration, powers, Cesàro means and
//! conjugation cycles, with convergence, cycle and divergence detection.
//! The checks on limits (projection laws, stabilization, Riesz products,
//! fixed spaces, boundary separation) live here too.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::calculus::{self, ContourSpec, DenseOperator, NormalOperator, GAP_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{circle_grid, LayerCycle, SchurMap, QUIET_STEPS};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STAGES: usize = 5000;
pub const DEFAULT_CYCLE_WINDOW: usize = 8;
/// Matching tolerance for a repeat within the cycle window.
pub const CYCLE_MATCH_TOL: f64 = 1e-10;
/// Frobenius norm beyond which an iteration counts as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Largest condition estimate accepted for a conjugator.
pub const CONJUGATOR_COND_LIMIT: f64 = 1e8;
/// Composite fixed-point test on the circle.
pub const COMPOSITE_FIX_TOL: f64 = 1e-9;
/// Layer fixed-point test on the circle.
pub const LAYER_FIX_TOL: f64 = 1e-8;
/// Largest `‖Tⁿ‖` (n ≤ 50) accepted before Cesàro averaging.
pub const POWER_BOUND_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FunctionIteration,
    PowerIteration,
    Cesaro,
    ConjugationCycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub mode: Mode,
    pub tol: f64,
    pub max_stages: usize,
    pub cycle_window: usize,
    pub conjugator: Option<CMatrix>,
}

impl IterationConfig {
    pub fn new(mode: Mode) -> Self {
        IterationConfig {
            mode,
            tol: DEFAULT_TOL,
            max_stages: DEFAULT_MAX_STAGES,
            cycle_window: DEFAULT_CYCLE_WINDOW,
            conjugator: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_stages(mut self, max_stages: usize) -> Self {
        self.max_stages = max_stages;
        self
    }

    pub fn with_cycle_window(mut self, window: usize) -> Self {
        self.cycle_window = window;
        self
    }

    pub fn with_conjugator(mut self, s: CMatrix) -> Self {
        self.conjugator = Some(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::ParamOutOfRange {
                name: "tol",
                value: self.tol,
                range: "> 0",
            });
        }
        if self.cycle_window < 2 {
            return Err(Error::ParamOutOfRange {
                name: "cycle_window",
                value: self.cycle_window as f64,
                range: ">= 2",
            });
        }
        if let Some(s) = &self.conjugator {
            if self.mode != Mode::ConjugationCycle {
                return Err(Error::WrongMode(
                    "a conjugator needs conjugation_cycle mode",
                ));
            }
            conjugator_inverse(s)?;
        }
        Ok(())
    }
}

fn conjugator_inverse(s: &CMatrix) -> Result<CMatrix> {
    if s.nrows() != s.ncols() {
        return Err(Error::IncompatibleDims("conjugator is not square".into()));
    }
    match linalg::inverse_with_condition(s) {
        Some((inv, cond)) if cond < CONJUGATOR_COND_LIMIT => Ok(inv),
        Some((_, cond)) => Err(Error::SingularConjugator(cond)),
        None => Err(Error::SingularConjugator(f64::INFINITY)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Cycle(usize),
    Diverged,
    BudgetExhausted,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Cycle(_) => "cycle",
            Status::Diverged => "diverged",
            Status::BudgetExhausted => "budget_exhausted",
        }
    }

    pub fn period(&self) -> Option<usize> {
        match self {
            Status::Cycle(p) => Some(*p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub residual: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn below(residual: f64, tol: f64) -> Self {
        CheckResult {
            residual,
            pass: residual < tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub status: Status,
    /// Converged: first stage after which every delta stays below tol.
    /// Cycle: stage of the repeated iterate. Diverged: stage exceeding the
    /// norm guard. Cesàro runs count doublings, so stage k means N = 2^k.
    pub stage: usize,
    pub limit: Option<CMatrix>,
    /// `residual_history[m] = ‖A^{(m+1)} - A^{(m)}‖_F`.
    pub residual_history: Vec<f64>,
    /// Distance between the repeated iterates of a detected cycle.
    pub cycle_residual: Option<f64>,
    pub check_results: BTreeMap<String, CheckResult>,
    /// Every computed iterate, starting with stage 0.
    pub iterates: Vec<CMatrix>,
}

impl ConvergenceReport {
    pub fn final_iterate(&self) -> &CMatrix {
        self.iterates
            .last()
            .expect("a report holds the initial iterate")
    }

    pub fn stages(&self) -> usize {
        self.iterates.len()
    }
}

/// Generic driver shared by every iteration mode.
fn drive(
    initial: CMatrix,
    config: &IterationConfig,
    mut step: impl FnMut(&CMatrix) -> Result<CMatrix>,
) -> Result<ConvergenceReport> {
    config.validate()?;
    let mut iterates = vec![initial];
    let mut history = Vec::new();
    let mut quiet = 0;
    let finish = |status, stage, limit, cycle_residual, iterates, history| ConvergenceReport {
        status,
        stage,
        limit,
        residual_history: history,
        cycle_residual,
        check_results: BTreeMap::new(),
        iterates,
    };
    if linalg::frobenius(&iterates[0]) > DIVERGENCE_NORM {
        return Ok(finish(Status::Diverged, 0, None, None, iterates, history));
    }
    for m in 0..config.max_stages {
        let next = step(&iterates[m])?;
        if !linalg::all_finite(&next) {
            return Ok(finish(
                Status::Diverged,
                m + 1,
                None,
                None,
                iterates,
                history,
            ));
        }
        let delta = linalg::frobenius(&(&next - &iterates[m]));
        let norm = linalg::frobenius(&next);
        history.push(delta);
        iterates.push(next);
        if norm > DIVERGENCE_NORM {
            return Ok(finish(
                Status::Diverged,
                m + 1,
                None,
                None,
                iterates,
                history,
            ));
        }
        if delta < config.tol {
            quiet += 1;
            if quiet >= QUIET_STEPS {
                let limit = iterates.last().cloned();
                return Ok(finish(
                    Status::Converged,
                    m + 1 - QUIET_STEPS,
                    limit,
                    None,
                    iterates,
                    history,
                ));
            }
            continue;
        }
        quiet = 0;
        // Slowly converging oscillations have tiny lagged differences too;
        // only a step of macroscopic size can belong to a genuine cycle.
        if delta > 1e-6 * norm.max(1.0) {
            let newest = &iterates[m + 1];
            for lag in 2..=config.cycle_window.min(m + 1) {
                let residual = linalg::frobenius(&(newest - &iterates[m + 1 - lag]));
                if residual < CYCLE_MATCH_TOL * norm.max(1.0) {
                    return Ok(finish(
                        Status::Cycle(lag),
                        m + 1,
                        None,
                        Some(residual),
                        iterates,
                        history,
                    ));
                }
            }
        }
    }
    let stage = config.max_stages;
    Ok(finish(
        Status::BudgetExhausted,
        stage,
        None,
        None,
        iterates,
        history,
    ))
}

/// Operand of a function iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Normal(NormalOperator),
    Dense(DenseOperator),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Normal(a) => a.dim(),
            Operator::Dense(a) => a.dim(),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Operator::Normal(a) => a.matrix(),
            Operator::Dense(a) => a.matrix().clone(),
        }
    }
}

/// `A^{(m+1)} = f(A^{(m)})` for the cycle composite `f`.
pub fn iterate_operator(
    a: &Operator,
    cycle: &LayerCycle,
    config: &IterationConfig,
) -> Result<ConvergenceReport> {
    if config.mode != Mode::FunctionIteration {
        return Err(Error::WrongMode(
            "iterate_operator needs function_iteration mode",
        ));
    }
    let f = cycle.composite();
    match a {
        Operator::Normal(n) => {
            // Track eigenvalues and rebuild the matrix in the fixed eigenbasis.
            let mut current = n.clone();
            drive(n.matrix(), config, |_| {
                current = current.map_eigenvalues(|z| f.eval_or_nan(z))?;
                Ok(current.matrix())
            })
        }
        Operator::Dense(d) => drive(d.matrix().clone(), config, |x| {
            calculus::apply_map_dense(&DenseOperator::new(x.clone())?, f)
        }),
    }
}

/// Powers `Tⁿ` starting from `T⁰ = I`, so stage n holds `Tⁿ`.
pub fn power_limit(t: &DenseOperator, tol: f64, max_n: usize) -> Result<ConvergenceReport> {
    if max_n == 0 {
        return Err(Error::ParamOutOfRange {
            name: "max_n",
            value: 0.0,
            range: ">= 1",
        });
    }
    let config = IterationConfig::new(Mode::PowerIteration)
        .with_tol(tol)
        .with_max_stages(max_n);
    let m = t.matrix();
    let mut report = drive(linalg::identity(t.dim()), &config, |x| Ok(x * m))?;
    if report.status == Status::Diverged {
        let norm = linalg::frobenius(report.final_iterate());
        if !norm.is_finite() {
            return Err(Error::Overflow {
                step: report.stage,
                norm,
            });
        }
    }
    report.check_results = match &report.limit {
        Some(p) => ergodic_checks(p, m, 10.0 * tol),
        None => BTreeMap::new(),
    };
    Ok(report)
}

/// Cesàro means `S_N = (1/N) Σ_{n<N} Tⁿ` over `N = 1, 2, 4, …` using the
/// exact doubling `S_{2N} = (I + T^N) S_N / 2`.
pub fn cesaro_projection(t: &DenseOperator, tol: f64, max_n: usize) -> Result<ConvergenceReport> {
    if !(tol > 0.0) {
        return Err(Error::ParamOutOfRange {
            name: "tol",
            value: tol,
            range: "> 0",
        });
    }
    let bound = match calculus::power_bound_estimate(t, 50) {
        Ok(b) => b,
        Err(Error::Overflow { norm, .. }) => return Err(Error::NotPowerBounded(norm)),
        Err(e) => return Err(e),
    };
    if bound >= POWER_BOUND_LIMIT {
        return Err(Error::NotPowerBounded(bound));
    }
    let n = t.dim();
    let id = linalg::identity(n);
    let half = Complex64::new(0.5, 0.0);
    let mut power = t.matrix().clone();
    let mut mean = id.clone();
    let mut iterates = vec![mean.clone()];
    let mut history = Vec::new();
    let mut terms = 1usize;
    let mut status = Status::BudgetExhausted;
    let mut stage = 0;
    while terms.saturating_mul(2) <= max_n {
        let next = linalg::scale(&((&id + &power) * &mean), half);
        let delta = linalg::frobenius(&(&next - &mean));
        history.push(delta);
        iterates.push(next.clone());
        mean = next;
        if delta < tol {
            status = Status::Converged;
            break;
        }
        power = &power * &power;
        terms *= 2;
        stage += 1;
    }
    if status == Status::BudgetExhausted {
        stage = history.len();
    }
    let limit = (status == Status::Converged).then(|| mean.clone());
    let check_results = match &limit {
        Some(p) => ergodic_checks(p, t.matrix(), 10.0 * tol),
        None => BTreeMap::new(),
    };
    Ok(ConvergenceReport {
        status,
        stage,
        limit,
        residual_history: history,
        cycle_residual: None,
        check_results,
        iterates,
    })
}

/// `‖PT - P‖_F` and `‖TP - P‖_F`.
pub fn ergodic_checks(p: &CMatrix, t: &CMatrix, tol: f64) -> BTreeMap<String, CheckResult> {
    let mut out = BTreeMap::new();
    out.insert(
        "right_invariance".into(),
        CheckResult::below(linalg::frobenius(&(p * t - p)), tol),
    );
    out.insert(
        "left_invariance".into(),
        CheckResult::below(linalg::frobenius(&(t * p - p)), tol),
    );
    out
}

/// Orthonormal basis of a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub dim: usize,
    pub basis: CMatrix,
    pub rank_tol: f64,
}

impl SubspaceBasis {
    fn from_columns(basis: CMatrix, rank_tol: f64) -> Self {
        SubspaceBasis {
            dim: basis.ncols(),
            basis,
            rank_tol,
        }
    }

    /// Range of a projection-like matrix (singular values above 1/2).
    pub fn range_of_projection(p: &CMatrix) -> Self {
        Self::from_columns(linalg::column_space(p, 0.5), 0.5)
    }

    pub fn angle_to(&self, other: &SubspaceBasis) -> f64 {
        linalg::subspace_angle(&self.basis, &other.basis)
    }
}

/// Size of the roundoff left in `I - T` when `T` fixes a vector.
fn cancellation_floor(t: &CMatrix) -> f64 {
    1e-12 * linalg::frobenius(t).max(1.0)
}

/// Numerical kernel of `I - T`.
pub fn fixed_space(t: &DenseOperator, rank_tol: f64) -> SubspaceBasis {
    let gap = linalg::identity(t.dim()) - t.matrix();
    let floor = cancellation_floor(t.matrix());
    SubspaceBasis::from_columns(linalg::numerical_kernel(&gap, rank_tol, floor), rank_tol)
}

/// `∩_k ker(I - T_k)` from the kernel of the stacked blocks `I - T_k`.
pub fn joint_fixed_space(layers: &[DenseOperator], rank_tol: f64) -> Result<SubspaceBasis> {
    let n = layers
        .first()
        .ok_or_else(|| Error::IncompatibleDims("no layers".into()))?
        .dim();
    if layers.iter().any(|l| l.dim() != n) {
        return Err(Error::IncompatibleDims("layers differ in dimension".into()));
    }
    let mut stacked = CMatrix::zeros(n * layers.len(), n);
    for (k, layer) in layers.iter().enumerate() {
        let block = linalg::identity(n) - layer.matrix();
        stacked.view_mut((k * n, 0), (n, n)).copy_from(&block);
    }
    let floor = layers
        .iter()
        .map(|l| cancellation_floor(l.matrix()))
        .fold(0.0, f64::max);
    Ok(SubspaceBasis::from_columns(
        linalg::numerical_kernel(&stacked, rank_tol, floor),
        rank_tol,
    ))
}

/// Idempotence, commutation with `A`, spectrum in {0, 1}, and self-adjointness
/// when `A` is normal.
pub fn check_limit_properties(
    p: &CMatrix,
    a: &CMatrix,
    tol: f64,
) -> Result<BTreeMap<String, CheckResult>> {
    if p.shape() != a.shape() {
        return Err(Error::IncompatibleDims(format!(
            "{:?} vs {:?}",
            p.shape(),
            a.shape()
        )));
    }
    let mut out = BTreeMap::new();
    out.insert(
        "idempotence".into(),
        CheckResult::below(linalg::frobenius(&(p * p - p)), tol),
    );
    out.insert(
        "commutation".into(),
        CheckResult::below(linalg::commutator_norm(p, a), tol),
    );
    let spread = linalg::eigenvalues(p)?
        .iter()
        .map(|z| z.norm().min((z - 1.0).norm()))
        .fold(0.0, f64::max);
    out.insert("spectrum_in_01".into(), CheckResult::below(spread, tol));
    let scale = linalg::frobenius(a).max(1.0);
    if linalg::normality_residual(a) < tol * scale * scale {
        out.insert(
            "self_adjoint".into(),
            CheckResult::below(linalg::frobenius(&(p - p.adjoint())), tol),
        );
    }
    Ok(out)
}

pub fn all_pass(checks: &BTreeMap<String, CheckResult>) -> bool {
    checks.values().all(|c| c.pass)
}

/// Apply a map to a matrix, diagonalizing when the matrix is normal.
pub fn apply_map_auto(m: &CMatrix, map: &SchurMap) -> Result<CMatrix> {
    let scale = linalg::frobenius(m).max(1.0);
    if linalg::normality_residual(m) < 1e-12 * scale * scale {
        if let Ok(normal) = calculus::diagonalize_normal(m, 1e-10) {
            return calculus::apply_borel(&normal, |z| map.eval_or_nan(z));
        }
    }
    calculus::apply_map_dense(&DenseOperator::new(m.clone())?, map)
}

/// `‖f(P) - P‖_F` for one more full cycle applied to a limit.
pub fn stage_omega_check(p: &CMatrix, cycle: &LayerCycle, tol: f64) -> Result<CheckResult> {
    let next = apply_map_auto(p, cycle.composite())?;
    Ok(CheckResult::below(linalg::frobenius(&(next - p)), tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RieszProductReport {
    pub product_residual: f64,
    /// `‖Q_j Q_k - Q_k Q_j‖_F` for j < k.
    pub commutators: Vec<((usize, usize), f64)>,
    pub projections: Vec<CMatrix>,
    pub composite_projection: CMatrix,
    pub pass: bool,
}

impl RieszProductReport {
    pub fn worst(&self) -> f64 {
        self.commutators
            .iter()
            .map(|(_, r)| *r)
            .fold(self.product_residual, f64::max)
    }
}

fn riesz_at_one(t: &DenseOperator, contour: &ContourSpec) -> Result<CMatrix> {
    let one = Complex64::new(1.0, 0.0);
    for l in t.eigenvalues()? {
        if (l - contour.center).norm() < contour.radius && (l - one).norm() > GAP_TOL {
            return Err(Error::IsolationFailed(l));
        }
    }
    calculus::riesz_projection(t, contour)
}

/// Compares the Riesz projection of `Ψ(A)` at 1 with the product
/// `Q_K ⋯ Q_1` of the layer projections.
pub fn riesz_product_identity(
    a: &DenseOperator,
    layers: &[SchurMap],
    contour_at_1: &ContourSpec,
    tol: f64,
) -> Result<RieszProductReport> {
    let one = Complex64::new(1.0, 0.0);
    let mut projections = Vec::with_capacity(layers.len());
    for layer in layers {
        let image = DenseOperator::new(apply_map_auto(a.matrix(), layer)?)?;
        let gamma = ContourSpec::isolating(&image.eigenvalues()?, one)?;
        projections.push(riesz_at_one(&image, &gamma)?);
    }
    let composite = SchurMap::composition(layers.to_vec())?;
    let psi = DenseOperator::new(apply_map_auto(a.matrix(), &composite)?)?;
    let composite_projection = riesz_at_one(&psi, contour_at_1)?;
    let n = a.dim();
    let product = projections
        .iter()
        .fold(linalg::identity(n), |acc, q| q * acc);
    let product_residual = linalg::frobenius(&(&composite_projection - product));
    let mut commutators = Vec::new();
    for j in 0..projections.len() {
        for k in j + 1..projections.len() {
            commutators.push((
                (j, k),
                linalg::commutator_norm(&projections[j], &projections[k]),
            ));
        }
    }
    let pass = product_residual < tol && commutators.iter().all(|(_, r)| *r < tol);
    Ok(RieszProductReport {
        product_residual,
        commutators,
        projections,
        composite_projection,
        pass,
    })
}

/// `X ↦ S X S⁻¹`.
pub fn conjugation_cycle(
    a: &DenseOperator,
    s: &DenseOperator,
    config: &IterationConfig,
) -> Result<ConvergenceReport> {
    if config.mode != Mode::ConjugationCycle {
        return Err(Error::WrongMode(
            "conjugation_cycle needs conjugation_cycle mode",
        ));
    }
    if a.dim() != s.dim() {
        return Err(Error::IncompatibleDims(
            "operator and conjugator differ in dimension".into(),
        ));
    }
    let inv = conjugator_inverse(s.matrix())?;
    let sm = s.matrix();
    drive(a.matrix().clone(), config, |x| Ok(sm * x * &inv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Circle samples fixed by the composite.
    pub composite_fixed: Vec<Complex64>,
    /// Composite-fixed samples moved by some layer, with the layer index.
    pub violations: Vec<(Complex64, usize)>,
}

impl SeparationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// On the unit circle, a point fixed by the composite must be fixed by every
/// layer.
pub fn boundary_separation_check(layers: &[SchurMap], angular: usize) -> Result<SeparationReport> {
    if angular < 256 {
        return Err(Error::ParamOutOfRange {
            name: "angular",
            value: angular as f64,
            range: ">= 256",
        });
    }
    let composite = SchurMap::composition(layers.to_vec())?;
    let mut report = SeparationReport {
        composite_fixed: Vec::new(),
        violations: Vec::new(),
    };
    for lambda in circle_grid(angular) {
        let image = composite.eval_or_nan(lambda);
        if !((image - lambda).norm() < COMPOSITE_FIX_TOL) {
            continue;
        }
        report.composite_fixed.push(lambda);
        for (k, layer) in layers.iter().enumerate() {
            if !((layer.eval_or_nan(lambda) - lambda).norm() < LAYER_FIX_TOL) {
                report.violations.push((lambda, k));
            }
        }
    }
    Ok(report)
}
