//! Scenario execution: dispatch by mode, requested checks, trace and report
//! files, exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::calculus::{self, ContourSpec, DenseOperator, NormalOperator, SpectralSet};
use crate::engine::{
    self, CheckResult, ConvergenceReport, IterationConfig, Mode, Operator, Status, SubspaceBasis,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{check_grid, LayerCycle, SchurMap};
use crate::scenario::{Scenario, ScenarioError, ScenarioMode, MAX_DOUBLINGS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_STATUS_MISMATCH: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Relative tolerance on per-stage off-diagonal growth.
pub const GROWTH_TOL: f64 = 0.01;
/// Longest Cesàro mean used by `ergodic_agreement`.
const AGREEMENT_MAX_TERMS: usize = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TraceFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Files go to `<out_dir>/<scenario name>/`; `None` writes nothing.
    pub out_dir: Option<PathBuf>,
    pub format: TraceFormat,
    /// Report `wall_ms` as 0 so repeated runs are byte-identical.
    pub reproducible: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            format: TraceFormat::Csv,
            reproducible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub residual: f64,
    pub pass: bool,
    /// The scenario declares this check as an expected failure.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub expected_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub status: String,
    pub period: Option<usize>,
    pub stage: usize,
    pub checks: BTreeMap<String, CheckEntry>,
    pub wall_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub expected_status: String,
    pub exit_code: i32,
    /// Written file names, relative to `<out>/<scenario>/`.
    pub files: Vec<String>,
    #[serde(skip)]
    pub convergence: Option<ConvergenceReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Everything the checks need after the main run.
struct Context<'a> {
    scenario: &'a Scenario,
    a: CMatrix,
    normal: Option<NormalOperator>,
    cycle: Option<LayerCycle>,
    /// `Ψ(A)`, or `A` itself when there are no map layers.
    image: CMatrix,
    report: Option<ConvergenceReport>,
    limit: Option<CMatrix>,
}

fn normal_form(a: &CMatrix) -> Option<NormalOperator> {
    let scale = linalg::frobenius(a).max(1.0);
    if linalg::normality_residual(a) >= 1e-12 * scale * scale {
        return None;
    }
    calculus::diagonalize_normal(a, 1e-10).ok()
}

fn is_diagonal(a: &CMatrix) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] == Complex64::new(0.0, 0.0)))
}

fn cesaro_terms(s: &Scenario) -> usize {
    1usize << s.max_stages.min(MAX_DOUBLINGS)
}

fn main_run(s: &Scenario, ctx: &mut Context) -> Result<()> {
    let config = IterationConfig::new(Mode::FunctionIteration)
        .with_tol(s.tolerance)
        .with_max_stages(s.max_stages)
        .with_cycle_window(s.cycle_window);
    match s.mode {
        ScenarioMode::FunctionIteration => {
            let cycle = ctx.cycle.as_ref().expect("validated: map layers present");
            let op = match &ctx.normal {
                Some(n) => Operator::Normal(n.clone()),
                None => Operator::Dense(DenseOperator::new(ctx.a.clone())?),
            };
            let report = engine::iterate_operator(&op, cycle, &config)?;
            ctx.limit = report.limit.clone();
            ctx.report = Some(report);
        }
        ScenarioMode::PowerIteration => {
            let report = engine::power_limit(
                &DenseOperator::new(ctx.image.clone())?,
                s.tolerance,
                s.max_stages,
            )?;
            ctx.limit = report.limit.clone();
            ctx.report = Some(report);
        }
        ScenarioMode::Cesaro => {
            let report = engine::cesaro_projection(
                &DenseOperator::new(ctx.image.clone())?,
                s.tolerance,
                cesaro_terms(s),
            )?;
            ctx.limit = report.limit.clone();
            ctx.report = Some(report);
        }
        ScenarioMode::ConjugationCycle => {
            let conj = s
                .conjugator()
                .map_err(|e| Error::InvalidMap(e.to_string()))?
                .expect("validated: one conjugation layer");
            let config = IterationConfig {
                mode: Mode::ConjugationCycle,
                conjugator: Some(conj.clone()),
                ..config
            };
            let report = engine::conjugation_cycle(
                &DenseOperator::new(ctx.a.clone())?,
                &DenseOperator::new(conj)?,
                &config,
            )?;
            ctx.limit = report.limit.clone();
            ctx.report = Some(report);
        }
        ScenarioMode::Riesz => {
            let image = DenseOperator::new(ctx.image.clone())?;
            let contour = match s
                .contour_spec()
                .map_err(|e| Error::InvalidMap(e.to_string()))?
            {
                Some(c) => c,
                None => ContourSpec::isolating(&image.eigenvalues()?, Complex64::new(1.0, 0.0))?,
            };
            let q = calculus::riesz_projection(&image, &contour)?;
            ctx.limit = Some(q);
        }
    }
    Ok(())
}

fn status_of(ctx: &Context) -> Status {
    match &ctx.report {
        Some(r) => r.status,
        None => Status::Converged,
    }
}

fn needs_limit<'c>(ctx: &'c Context) -> Result<&'c CMatrix> {
    ctx.limit
        .as_ref()
        .ok_or(Error::WrongMode("the run produced no limit"))
}

fn needs_cycle<'c>(ctx: &'c Context) -> Result<&'c LayerCycle> {
    ctx.cycle
        .as_ref()
        .ok_or(Error::WrongMode("the scenario has no map layers"))
}

fn contour_at_one(ctx: &Context, t: &DenseOperator) -> Result<ContourSpec> {
    match ctx
        .scenario
        .contour_spec()
        .map_err(|e| Error::InvalidMap(e.to_string()))?
    {
        Some(c) => Ok(c),
        None => ContourSpec::isolating(&t.eigenvalues()?, Complex64::new(1.0, 0.0)),
    }
}

/// Projection the limit should equal.
fn expected_projection(ctx: &Context) -> Result<CMatrix> {
    let one = Complex64::new(1.0, 0.0);
    if ctx.scenario.mode == ScenarioMode::FunctionIteration {
        if let Some(n) = &ctx.normal {
            let cycle = needs_cycle(ctx)?;
            return Ok(calculus::spectral_projection(
                n,
                &SpectralSet::fixed_by(cycle.clone()),
            ));
        }
        let a = DenseOperator::new(ctx.a.clone())?;
        return calculus::riesz_projection(&a, &ContourSpec::isolating(&a.eigenvalues()?, one)?);
    }
    let t = DenseOperator::new(ctx.image.clone())?;
    if let Some(n) = normal_form(&ctx.image) {
        let set = SpectralSet::points(vec![one], 1e-9)?;
        return Ok(calculus::spectral_projection(&n, &set));
    }
    calculus::riesz_projection(&t, &ContourSpec::isolating(&t.eigenvalues()?, one)?)
}

fn layer_images(ctx: &Context) -> Result<Vec<DenseOperator>> {
    let cycle = needs_cycle(ctx)?;
    cycle
        .layers()
        .iter()
        .map(|l| DenseOperator::new(engine::apply_map_auto(&ctx.a, l)?))
        .collect()
}

fn run_check(name: &str, ctx: &Context) -> Result<CheckResult> {
    let s = ctx.scenario;
    let tol = s.check_tolerance;
    match name {
        "limit_properties" => {
            let p = needs_limit(ctx)?;
            let base = if s.mode == ScenarioMode::FunctionIteration {
                &ctx.a
            } else {
                &ctx.image
            };
            let checks = engine::check_limit_properties(p, base, tol)?;
            let worst = checks.values().map(|c| c.residual).fold(0.0, f64::max);
            Ok(CheckResult {
                residual: worst,
                pass: engine::all_pass(&checks),
            })
        }
        "stage_omega" => {
            let p = needs_limit(ctx)?;
            if s.mode == ScenarioMode::FunctionIteration {
                engine::stage_omega_check(p, needs_cycle(ctx)?, tol)
            } else {
                Ok(CheckResult::below(
                    linalg::frobenius(&(&ctx.image * p - p)),
                    tol,
                ))
            }
        }
        "spectral_projection" => {
            let p = needs_limit(ctx)?;
            Ok(CheckResult::below(
                linalg::frobenius(&(p - expected_projection(ctx)?)),
                tol,
            ))
        }
        "spectral_mapping" => {
            let report = ctx.report.as_ref().ok_or(Error::WrongMode("no iterates"))?;
            let cycle = needs_cycle(ctx)?;
            let eigs = linalg::eigenvalues(&ctx.a)?;
            let m = report.stage.min(20).min(report.iterates.len() - 1);
            let mapped: Vec<Complex64> = eigs
                .iter()
                .map(|&l| (0..m).fold(l, |z, _| cycle.composite().eval_or_nan(z)))
                .collect();
            let got = linalg::eigenvalues(&report.iterates[m])?;
            Ok(CheckResult::below(
                linalg::multiset_distance(&got, &mapped),
                tol,
            ))
        }
        "boundary_separation" => {
            let cycle = needs_cycle(ctx)?;
            let sep = engine::boundary_separation_check(cycle.layers(), 256)?;
            let worst = sep
                .composite_fixed
                .iter()
                .flat_map(|&z| {
                    cycle
                        .layers()
                        .iter()
                        .map(move |l| (l.eval_or_nan(z) - z).norm())
                })
                .fold(0.0, f64::max);
            Ok(CheckResult {
                residual: worst,
                pass: sep.pass(),
            })
        }
        "reference_composite" => {
            let reference = s
                .reference_composite
                .as_ref()
                .expect("validated: reference present")
                .to_map()?;
            let maps = s.maps().map_err(|e| Error::InvalidMap(e.to_string()))?;
            let composite = SchurMap::composition(maps)?;
            let dev = crate::scalar::max_deviation(&composite, &reference, &check_grid())?;
            Ok(CheckResult::below(dev, tol))
        }
        "layer_image" => {
            let expected = s
                .expect_operator
                .as_ref()
                .expect("validated: expect_operator present")
                .to_matrix()
                .map_err(|e| Error::InvalidMap(e.to_string()))?;
            Ok(CheckResult::below(
                linalg::frobenius(&(&ctx.image - expected)),
                tol,
            ))
        }
        "expected_limit" => {
            let p = needs_limit(ctx)?;
            let expected = s
                .expect_limit
                .as_ref()
                .expect("validated: expect_limit present")
                .to_matrix()
                .map_err(|e| Error::InvalidMap(e.to_string()))?;
            Ok(CheckResult::below(linalg::frobenius(&(p - expected)), tol))
        }
        "riesz_product" => {
            let cycle = needs_cycle(ctx)?;
            let a = DenseOperator::new(ctx.a.clone())?;
            let gamma = contour_at_one(ctx, &DenseOperator::new(ctx.image.clone())?)?;
            let r = engine::riesz_product_identity(&a, cycle.layers(), &gamma, tol)?;
            Ok(CheckResult {
                residual: r.worst(),
                pass: r.pass,
            })
        }
        "fixed_space" => {
            let p = needs_limit(ctx)?;
            let fixed = engine::fixed_space(
                &DenseOperator::new(ctx.image.clone())?,
                engine::DEFAULT_RANK_TOL,
            );
            let range = SubspaceBasis::range_of_projection(p);
            Ok(CheckResult::below(range.angle_to(&fixed), tol))
        }
        "joint_fixed_space" => {
            let joint = engine::joint_fixed_space(&layer_images(ctx)?, engine::DEFAULT_RANK_TOL)?;
            let fixed = engine::fixed_space(
                &DenseOperator::new(ctx.image.clone())?,
                engine::DEFAULT_RANK_TOL,
            );
            Ok(CheckResult::below(joint.angle_to(&fixed), tol))
        }
        "ergodic_agreement" => {
            let t = DenseOperator::new(ctx.image.clone())?;
            let power = engine::power_limit(&t, s.tolerance, s.max_stages)?;
            let cesaro = engine::cesaro_projection(&t, tol / 4.0, AGREEMENT_MAX_TERMS)?;
            let residual = match (&power.limit, &cesaro.limit) {
                (Some(p), Some(q)) => linalg::frobenius(&(p - q)),
                _ => f64::INFINITY,
            };
            Ok(CheckResult::below(residual, tol))
        }
        "offdiag_growth" => {
            let report = ctx.report.as_ref().ok_or(Error::WrongMode("no iterates"))?;
            let cycle = needs_cycle(ctx)?;
            if ctx.a.nrows() < 2 {
                return Err(Error::IncompatibleDims(
                    "off-diagonal growth needs dimension >= 2".into(),
                ));
            }
            let eig = ctx.a[(0, 0)];
            let rate = crate::scalar::numeric_derivative(cycle.composite(), eig, 1e-6)?.norm();
            let mut worst: f64 = 0.0;
            for w in report.iterates.windows(2) {
                let ratio = w[1][(0, 1)].norm() / w[0][(0, 1)].norm();
                worst = worst.max((ratio - rate).abs() / rate);
            }
            if report.iterates.len() < 2 {
                worst = f64::INFINITY;
            }
            Ok(CheckResult::below(worst, GROWTH_TOL))
        }
        "period" => {
            let report = ctx.report.as_ref().ok_or(Error::WrongMode("no iterates"))?;
            let residual = report.cycle_residual.unwrap_or(f64::INFINITY);
            let period_ok = match (report.status, s.expect_period) {
                (Status::Cycle(p), Some(q)) => p == q,
                (Status::Cycle(_), None) => true,
                _ => false,
            };
            Ok(CheckResult {
                residual,
                pass: period_ok && residual < s.tolerance,
            })
        }
        other => Err(Error::InvalidMap(format!("unknown check {other}"))),
    }
}

fn build_context(s: &Scenario) -> std::result::Result<Context<'_>, ScenarioError> {
    let a = s.operator_matrix()?;
    let cycle = s.cycle()?;
    // Diagonal inputs stay exact; other normal inputs are diagonalized.
    let normal = if is_diagonal(&a) {
        Some(NormalOperator::diagonal(
            (0..a.nrows()).map(|i| a[(i, i)]).collect(),
        ))
    } else {
        normal_form(&a)
    };
    let image = match &cycle {
        Some(c) => match &normal {
            Some(n) => calculus::apply_borel(n, |z| c.composite().eval_or_nan(z)),
            None => calculus::apply_map_dense(
                &DenseOperator::new(a.clone()).map_err(|e| {
                    crate::scenario::ScenarioError::Validation {
                        field: "operator".into(),
                        message: e.to_string(),
                    }
                })?,
                c.composite(),
            ),
        }
        .map_err(|e| ScenarioError::Validation {
            field: "layers".into(),
            message: e.to_string(),
        })?,
        None => a.clone(),
    };
    Ok(Context {
        scenario: s,
        a,
        normal,
        cycle,
        image,
        report: None,
        limit: None,
    })
}

fn expected_label(s: &Scenario) -> String {
    serde_json::to_value(s.expect)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Run a validated scenario. Configuration problems surface as `Err`;
/// engine failures are recorded in the report with exit code 1.
pub fn run_scenario(
    s: &Scenario,
    options: &RunOptions,
) -> std::result::Result<RunReport, ScenarioError> {
    let started = Instant::now();
    let mut ctx = build_context(s)?;
    let outcome = main_run(s, &mut ctx);
    let mut checks = BTreeMap::new();
    let mut error = outcome.err().map(|e| e.to_string());
    if error.is_none() {
        for name in &s.checks {
            let expected_failure = s.expect_check_failures.contains(name);
            let result = run_check(name, &ctx).unwrap_or_else(|e| {
                error.get_or_insert_with(|| format!("{name}: {e}"));
                CheckResult {
                    residual: f64::INFINITY,
                    pass: false,
                }
            });
            checks.insert(
                name.clone(),
                CheckEntry {
                    residual: result.residual,
                    pass: result.pass,
                    expected_failure,
                },
            );
        }
    }
    let status = status_of(&ctx);
    let exit_code = if error.is_some() {
        EXIT_CHECK_FAILED
    } else if !s.expect.matches(&status) {
        EXIT_STATUS_MISMATCH
    } else if checks.values().any(|c| c.pass == c.expected_failure) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    };
    let stage = ctx.report.as_ref().map_or(0, |r| r.stage);
    let wall_ms = if options.reproducible {
        0
    } else {
        started.elapsed().as_millis() as u64
    };
    let mut report = RunReport {
        scenario: s.name.clone(),
        status: if error.is_some() && ctx.report.is_none() && ctx.limit.is_none() {
            "error".to_string()
        } else {
            status.label().to_string()
        },
        period: status.period(),
        stage,
        checks,
        wall_ms,
        error,
        expected_status: expected_label(s),
        exit_code,
        files: Vec::new(),
        convergence: ctx.report.take(),
    };
    if let Some(dir) = &options.out_dir {
        write_outputs(&mut report, &dir.join(&s.name), options.format).map_err(|e| {
            ScenarioError::Io {
                path: dir.display().to_string(),
                source: e,
            }
        })?;
    }
    Ok(report)
}

fn write_outputs(report: &mut RunReport, dir: &Path, format: TraceFormat) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(conv) = &report.convergence {
        let (trace, eigs) = match format {
            TraceFormat::Csv => ("trace.csv", "eigs.csv"),
            TraceFormat::Json => ("trace.json", "eigs.json"),
        };
        emit_trace(conv, &dir.join(trace), format)?;
        emit_eigs(conv, &dir.join(eigs), format)?;
        report.files.push(trace.to_string());
        report.files.push(eigs.to_string());
    }
    let path = dir.join("report.json");
    report.files.push("report.json".to_string());
    fs::write(&path, report.to_json() + "\n")
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Stages written to a trace: 0 through the reported stage.
fn traced_stages(report: &ConvergenceReport) -> usize {
    (report.stage + 1).min(report.iterates.len())
}

#[derive(Serialize)]
struct TraceRow {
    stage: usize,
    frobenius_delta: f64,
    distance_to_final: f64,
    norm: f64,
}

fn trace_rows(report: &ConvergenceReport) -> Vec<TraceRow> {
    let last = report
        .limit
        .as_ref()
        .unwrap_or_else(|| report.final_iterate());
    (0..traced_stages(report))
        .map(|s| TraceRow {
            stage: s,
            frobenius_delta: if s == 0 {
                0.0
            } else {
                report.residual_history[s - 1]
            },
            distance_to_final: linalg::frobenius(&(&report.iterates[s] - last)),
            norm: linalg::frobenius(&report.iterates[s]),
        })
        .collect()
}

/// Write `stage,frobenius_delta,distance_to_final,norm`, one row per stage.
/// Row 0 has delta 0; row s holds `‖A^{(s)} - A^{(s-1)}‖_F`.
pub fn emit_trace(report: &ConvergenceReport, path: &Path, format: TraceFormat) -> io::Result<()> {
    if report.iterates.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "report has no stages",
        ));
    }
    let rows = trace_rows(report);
    match format {
        TraceFormat::Json => fs::write(path, serde_json::to_string_pretty(&rows)? + "\n"),
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["stage", "frobenius_delta", "distance_to_final", "norm"])?;
            for r in rows {
                w.write_record([
                    r.stage.to_string(),
                    num(r.frobenius_delta),
                    num(r.distance_to_final),
                    num(r.norm),
                ])?;
            }
            w.flush()
        }
    }
}

#[derive(Serialize)]
struct EigRow {
    stage: usize,
    index: usize,
    re: f64,
    im: f64,
}

/// Eigenvalues of each traced stage, sorted by decreasing modulus then
/// argument.
pub fn emit_eigs(report: &ConvergenceReport, path: &Path, format: TraceFormat) -> io::Result<()> {
    let mut rows = Vec::new();
    for s in 0..traced_stages(report) {
        let mut eigs = linalg::eigenvalues(&report.iterates[s])
            .map_err(|e| io::Error::other(e.to_string()))?;
        eigs.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(a.arg().total_cmp(&b.arg()))
        });
        rows.extend(eigs.into_iter().enumerate().map(|(index, z)| EigRow {
            stage: s,
            index,
            re: z.re,
            im: z.im,
        }));
    }
    match format {
        TraceFormat::Json => fs::write(path, serde_json::to_string_pretty(&rows)? + "\n"),
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["stage", "index", "re", "im"])?;
            for r in rows {
                w.write_record([
                    r.stage.to_string(),
                    r.index.to_string(),
                    num(r.re),
                    num(r.im),
                ])?;
            }
            w.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::fixture;

    #[test]
    fn every_fixture_exits_zero() {
        for (name, _) in crate::scenario::FIXTURES {
            let s = fixture(name).unwrap();
            let r = run_scenario(&s, &RunOptions::default()).unwrap();
            assert_eq!(r.exit_code, EXIT_OK, "{name}: {}", r.to_json());
            for check in &s.checks {
                assert!(r.checks.contains_key(check), "{name} lacks {check}");
            }
        }
    }

    #[test]
    fn c4_fixture_converges_to_indicator() {
        let r = run_scenario(&fixture("c4_t05").unwrap(), &RunOptions::default()).unwrap();
        assert_eq!(r.status, "converged");
        let limit = r.convergence.unwrap().limit.unwrap();
        let expected = linalg::diagonal(&[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        assert!(linalg::frobenius(&(limit - expected)) < 1e-9);
    }

    #[test]
    fn counterexample_fixtures() {
        let r = run_scenario(&fixture("swap_cycle").unwrap(), &RunOptions::default()).unwrap();
        assert_eq!((r.status.as_str(), r.period), ("cycle", Some(2)));
        let r = run_scenario(&fixture("jordan_diverge").unwrap(), &RunOptions::default()).unwrap();
        assert_eq!(r.status, "diverged");
    }

    #[test]
    fn printed_composite_is_flagged() {
        let r = run_scenario(&fixture("ex41_printed").unwrap(), &RunOptions::default()).unwrap();
        let entry = &r.checks["reference_composite"];
        assert!(!entry.pass && entry.expected_failure && entry.residual > 0.1);
        assert_eq!(r.exit_code, EXIT_OK);
        let r = run_scenario(&fixture("ex41_recomputed").unwrap(), &RunOptions::default()).unwrap();
        assert!(r.checks["reference_composite"].pass);
    }

    #[test]
    fn status_mismatch_exit_code() {
        let mut s = fixture("swap_cycle").unwrap();
        s.expect = crate::scenario::Expectation::Converged;
        assert_eq!(
            run_scenario(&s, &RunOptions::default()).unwrap().exit_code,
            EXIT_STATUS_MISMATCH
        );
    }

    #[test]
    fn unexpected_check_failure_exit_code() {
        let mut s = fixture("ex41_printed").unwrap();
        s.expect_check_failures.clear();
        assert_eq!(
            run_scenario(&s, &RunOptions::default()).unwrap().exit_code,
            EXIT_CHECK_FAILED
        );
    }

    #[test]
    fn trace_files_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let options = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            format: TraceFormat::Csv,
            reproducible: true,
        };
        let s = fixture("c4_t05").unwrap();
        run_scenario(&s, &options).unwrap();
        let read = |f: &str| fs::read(dir.path().join("c4_t05").join(f)).unwrap();
        let first = (read("trace.csv"), read("eigs.csv"), read("report.json"));
        run_scenario(&s, &options).unwrap();
        assert_eq!(
            first,
            (read("trace.csv"), read("eigs.csv"), read("report.json"))
        );

        let text = String::from_utf8(first.0).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("stage,frobenius_delta,distance_to_final,norm")
        );
        let deltas: Vec<f64> = lines
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        // Late-stage ratios approach μ = 2/3.
        let n = deltas.len();
        let ratio = deltas[n - 1] / deltas[n - 2];
        assert!((ratio - 2.0 / 3.0).abs() < 0.01, "ratio {ratio}");
    }
}
