//! Randomized property suites behind `spectral-cascade verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{self, ContourSpec, DenseOperator, NormalOperator, SpectralSet};
use crate::engine::{self, IterationConfig, Mode, Operator, Status, SubspaceBasis};
use crate::ensemble;
use crate::error::Result;
use crate::interp::{solve_two_point, InterpolationProblem};
use crate::linalg::{self, CMatrix};
use crate::scalar::{self, closed_form_param_iterate, LayerCycle, LimitClass, SchurMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Scalar,
    Matrix,
    Engine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub trials: usize,
    /// Largest residual observed (or failure count for counting properties).
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl std::fmt::Display for PropertyOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} trials={:<4} worst={:.3e} threshold={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.worst,
            self.threshold
        )
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs `trial` for each seed and keeps the worst residual. Errors count as
/// infinite residuals.
fn property(
    name: &'static str,
    seed: u64,
    trials: usize,
    threshold: f64,
    trial: impl Fn(u64) -> Result<f64>,
) -> PropertyOutcome {
    let worst = (0..trials as u64)
        .map(|i| trial(seed.wrapping_add(i)).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    PropertyOutcome {
        name,
        trials,
        worst,
        threshold,
        pass: worst < threshold,
    }
}

/// Worst `|iterate - closed form|` over the check grid, m ≤ 40, for a
/// random t.
pub fn closed_form_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let t = rng.random_range(0.05..0.95);
    closed_form_residual(t)
}

pub fn closed_form_residual(t: f64) -> Result<f64> {
    let cycle = LayerCycle::parametric(t)?;
    let mut worst: f64 = 0.0;
    for z in scalar::check_grid() {
        let mut w = z;
        for m in 1..=40u32 {
            w = cycle.eval(w)?;
            worst = worst.max((w - closed_form_param_iterate(t, m, z)?).norm());
        }
    }
    Ok(worst)
}

/// Misclassified points (out of 1 + 20) for the dichotomy under a random t.
pub fn dichotomy_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let cycle = LayerCycle::parametric(rng.random_range(0.1..0.9))?;
    let mut wrong = 0;
    let one = scalar::iterate_scalar(
        &cycle,
        Complex64::new(1.0, 0.0),
        scalar::DEFAULT_SCALAR_TOL,
        100_000,
    )?;
    if scalar::classify_limit(&one, 1e-9) != LimitClass::One {
        wrong += 1;
    }
    for _ in 0..20 {
        let z = ensemble::random_disk_point(&mut rng, 0.999);
        let trace = scalar::iterate_scalar(&cycle, z, scalar::DEFAULT_SCALAR_TOL, 100_000)?;
        if scalar::classify_limit(&trace, 1e-9) != LimitClass::Zero {
            wrong += 1;
        }
    }
    Ok(wrong as f64)
}

/// Worst certificate violation for Φ a random finite Blaschke product
/// normalized to fix 1. Returns 0 when every bound holds.
pub fn interpolation_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let t = rng.random_range(0.05..0.95);
    let factors = (0..rng.random_range(1..=4))
        .map(|_| SchurMap::normalized_blaschke(ensemble::random_disk_point(&mut rng, 0.9)))
        .collect::<Result<Vec<_>>>()?;
    let phi = SchurMap::product(factors)?;
    let sol = solve_two_point(&InterpolationProblem::new(t)?, &phi)?;
    let c = sol.certificate;
    Ok((c.residual_at_t / 1e-10)
        .max(c.residual_at_1 / 1e-8)
        .max((c.sup_estimate - 1.0).max(0.0) / 1e-9))
}

/// `‖g(h(A)) - (g∘h)(A)‖_F` with `h(A)` re-diagonalized.
pub fn composition_law_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let g = ensemble::random_admissible_layer(&mut rng);
    let h = ensemble::random_admissible_layer(&mut rng);
    let h_of_a = calculus::apply_borel(&a, |z| h.eval_or_nan(z))?;
    let rediagonalized = calculus::diagonalize_normal(&h_of_a, 1e-10)?;
    let outer = calculus::apply_borel(&rediagonalized, |z| g.eval_or_nan(z))?;
    let gh = SchurMap::composition(vec![h, g])?;
    let direct = calculus::apply_borel(&a, |z| gh.eval_or_nan(z))?;
    Ok(linalg::frobenius(&(outer - direct)))
}

/// With `g_n = f_t^n`: checks the uniform bound `|g_n(λ)| ≤ 1` for n ≤ 200
/// and returns `‖g_200(A) - χ(A)‖_F`, or infinity if the bound fails or
/// the distances grow along the way.
pub fn dominated_convergence_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let t = rng.random_range(0.3..0.9);
    let chi = calculus::spectral_projection(
        &a,
        &SpectralSet::points(vec![Complex64::new(1.0, 0.0)], 1e-12)?,
    );
    let mut previous = f64::INFINITY;
    let mut distance = f64::INFINITY;
    for n in (10..=200).step_by(10) {
        let image = a.map_eigenvalues(|z| {
            closed_form_param_iterate(t, n, z).unwrap_or(Complex64::new(f64::NAN, 0.0))
        })?;
        if image.eigenvalues().iter().any(|z| z.norm() > 1.0 + 1e-12) {
            return Ok(f64::INFINITY);
        }
        distance = linalg::frobenius(&(image.matrix() - &chi));
        if distance > previous + 1e-12 {
            return Ok(f64::INFINITY);
        }
        previous = distance;
    }
    Ok(distance)
}

/// Riesz projection at 1 of `Ψ(A)` for random layers: idempotence and
/// commutation residuals, the latter relative to `‖Ψ(A)‖_F`.
pub fn riesz_projection_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let psi = random_image(&mut rng, &a)?;
    let q = calculus::riesz_projection(
        &psi,
        &ContourSpec::isolating(&psi.eigenvalues()?, Complex64::new(1.0, 0.0))?,
    )?;
    let idem = linalg::frobenius(&(&q * &q - &q));
    let comm = linalg::commutator_norm(&q, psi.matrix()) / linalg::frobenius(psi.matrix()).max(1.0);
    Ok(idem.max(comm))
}

fn random_layers<R: Rng>(rng: &mut R) -> Vec<SchurMap> {
    (0..rng.random_range(1..=3))
        .map(|_| ensemble::random_admissible_layer(rng))
        .collect()
}

fn random_image<R: Rng>(rng: &mut R, a: &NormalOperator) -> Result<DenseOperator> {
    let cycle = LayerCycle::new(random_layers(rng))?;
    DenseOperator::new(calculus::apply_borel(a, |z| {
        cycle.eval(z).unwrap_or(Complex64::new(f64::NAN, 0.0))
    })?)
}

/// Eigenvalues of `f^m(A)` against `f^m(σ(A))`, m ≤ 20.
pub fn spectral_mapping_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let cycle = LayerCycle::parametric(0.5)?;
    let mut current = a.clone();
    let mut worst: f64 = 0.0;
    for _ in 1..=20 {
        current = current.map_eigenvalues(|z| cycle.composite().eval_or_nan(z))?;
        let eigs = linalg::eigenvalues(&current.matrix())?;
        worst = worst.max(linalg::multiset_distance(&eigs, current.eigenvalues()));
    }
    Ok(worst)
}

/// Function-iteration limit against the spectral projection at 1, plus the
/// projection-law and stage-ω residuals.
pub fn projection_limit_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let cycle = LayerCycle::parametric(0.5)?;
    let report = engine::iterate_operator(
        &Operator::Normal(a.clone()),
        &cycle,
        &IterationConfig::new(Mode::FunctionIteration),
    )?;
    let Some(p) = report.limit else {
        return Ok(f64::INFINITY);
    };
    let target = calculus::spectral_projection(
        &a,
        &SpectralSet::points(vec![Complex64::new(1.0, 0.0)], 1e-12)?,
    );
    let laws = engine::check_limit_properties(&p, &a.matrix(), 1e-8)?;
    let omega = engine::stage_omega_check(&p, &cycle, 1e-8)?;
    Ok(laws.values().map(|c| c.residual).fold(
        linalg::frobenius(&(&p - target)).max(omega.residual),
        f64::max,
    ))
}

/// Power and Cesàro limits of `Ψ(A)` and their ranges against the fixed
/// space.
pub fn ergodic_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let cycle = LayerCycle::parametric(0.5)?;
    let psi = DenseOperator::new(calculus::apply_borel(&a, |z| {
        cycle.composite().eval_or_nan(z)
    })?)?;
    let power = engine::power_limit(&psi, 1e-12, 100_000)?;
    let cesaro = engine::cesaro_projection(&psi, 7e-8, 1 << 40)?;
    let (Some(p), Some(s)) = (power.limit, cesaro.limit) else {
        return Ok(f64::INFINITY);
    };
    let fixed = engine::fixed_space(&psi, engine::DEFAULT_RANK_TOL);
    let angle = SubspaceBasis::range_of_projection(&s).angle_to(&fixed);
    Ok(linalg::frobenius(&(p - s)).max(angle))
}

/// Riesz product identity for random layers.
pub fn riesz_product_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let layers = random_layers(&mut rng);
    let psi = DenseOperator::new(calculus::apply_borel(&a, |z| {
        layers.iter().fold(z, |w, l| l.eval_or_nan(w))
    })?)?;
    let gamma = ContourSpec::isolating(&psi.eigenvalues()?, Complex64::new(1.0, 0.0))?;
    Ok(engine::riesz_product_identity(&DenseOperator::from(&a), &layers, &gamma, 1e-6)?.worst())
}

/// Angle between `ker(I - Ψ(A))` and the joint kernel of the layer images,
/// after the boundary separation check passes.
pub fn fixed_space_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let a = ensemble::random_projection_case(&mut rng, 16);
    let layers = random_layers(&mut rng);
    if !engine::boundary_separation_check(&layers, 256)?.pass() {
        return Ok(f64::INFINITY);
    }
    let images = layers
        .iter()
        .map(|l| DenseOperator::new(calculus::apply_borel(&a, |z| l.eval_or_nan(z))?))
        .collect::<Result<Vec<_>>>()?;
    let composite = SchurMap::composition(layers)?;
    let psi = DenseOperator::new(calculus::apply_borel(&a, |z| composite.eval_or_nan(z))?)?;
    let joint = engine::joint_fixed_space(&images, engine::DEFAULT_RANK_TOL)?;
    Ok(joint.angle_to(&engine::fixed_space(&psi, engine::DEFAULT_RANK_TOL)))
}

/// 1 when a conjugation by a random involution yields anything but a
/// 2-cycle or immediate convergence.
pub fn involution_trial(seed: u64) -> Result<f64> {
    let mut rng = rng_for(seed);
    let n = rng.random_range(2..=8);
    let u = ensemble::random_unitary(&mut rng, n);
    let signs = (0..n)
        .map(|i| {
            Complex64::new(
                if i == 0 || rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                },
                0.0,
            )
        })
        .collect();
    let s = NormalOperator::from_parts(signs, u)?.matrix();
    let a = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let report = engine::conjugation_cycle(
        &DenseOperator::new(a)?,
        &DenseOperator::new(s)?,
        &IterationConfig::new(Mode::ConjugationCycle),
    )?;
    Ok(match report.status {
        Status::Cycle(2) | Status::Converged => 0.0,
        _ => 1.0,
    })
}

pub fn run_suite(suite: Suite, seed: u64, trials: usize) -> Vec<PropertyOutcome> {
    let mut out = Vec::new();
    if matches!(suite, Suite::All | Suite::Scalar) {
        out.push(property(
            "closed_form_iterates",
            seed,
            trials,
            1e-12,
            closed_form_trial,
        ));
        out.push(property(
            "scalar_dichotomy",
            seed,
            trials,
            0.5,
            dichotomy_trial,
        ));
        out.push(property(
            "two_point_interpolation",
            seed,
            trials,
            1.0,
            interpolation_trial,
        ));
    }
    if matches!(suite, Suite::All | Suite::Matrix) {
        out.push(property(
            "composition_law",
            seed,
            trials,
            1e-8,
            composition_law_trial,
        ));
        out.push(property(
            "dominated_convergence",
            seed,
            trials,
            1e-8,
            dominated_convergence_trial,
        ));
        out.push(property(
            "riesz_idempotence",
            seed,
            trials,
            1e-8,
            riesz_projection_trial,
        ));
        out.push(property(
            "spectral_mapping",
            seed,
            trials,
            1e-8,
            spectral_mapping_trial,
        ));
    }
    if matches!(suite, Suite::All | Suite::Engine) {
        out.push(property(
            "projection_limit",
            seed,
            trials,
            1e-8,
            projection_limit_trial,
        ));
        out.push(property(
            "ergodic_consistency",
            seed,
            trials,
            1e-7,
            ergodic_trial,
        ));
        out.push(property(
            "riesz_product",
            seed,
            trials,
            1e-6,
            riesz_product_trial,
        ));
        out.push(property(
            "fixed_space_identity",
            seed,
            trials,
            1e-8,
            fixed_space_trial,
        ));
        out.push(property(
            "involution_period",
            seed,
            trials,
            0.5,
            involution_trial,
        ));
    }
    out
}
