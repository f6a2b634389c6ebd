//! Scenario documents: schema, defaults, validation and the shipped
//! fixtures.
//!
//! | field                 | default              |
//! |-----------------------|----------------------|
//! | `mode`                | `function_iteration` |
//! | `tolerance`           | `1e-10`              |
//! | `max_stages`          | `5000`               |
//! | `cycle_window`        | `8`                  |
//! | `check_tolerance`     | `1e-8`               |
//! | `checks`              | none                 |
//! | `expect`              | `converged`          |
//! | contour `nodes`       | `64`                 |
//!
//! In `cesaro` mode `max_stages` caps the number of doublings, so the
//! longest mean has `2^max_stages` terms (at most `2^60`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::ContourSpec;
use crate::engine::{Status, DEFAULT_CYCLE_WINDOW, DEFAULT_MAX_STAGES, DEFAULT_TOL};
use crate::error::Error;
use crate::exchange::{complex, ExchangeError, MatrixDocument, MAX_DIM};
use crate::interp::{solve_two_point, InterpolationProblem};
use crate::linalg::{self, CMatrix};
use crate::scalar::{LayerCycle, SchurMap};

pub const DEFAULT_CHECK_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_CONTOUR_NODES: usize = 64;
/// Cap on Cesàro doublings regardless of `max_stages`.
pub const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Diagonal {
        entries: Vec<[f64; 2]>,
    },
    Dense {
        dim: usize,
        rows: Vec<Vec<[f64; 2]>>,
    },
    JordanBlock {
        eigenvalue: [f64; 2],
        size: usize,
    },
}

impl OperatorSpec {
    pub fn matrix(&self) -> Result<CMatrix, ScenarioError> {
        let m = match self {
            OperatorSpec::Diagonal { entries } => {
                check_dim(entries.len())?;
                for (i, e) in entries.iter().enumerate() {
                    if !(e[0].is_finite() && e[1].is_finite()) {
                        return Err(invalid(format!("operator.entries[{i}]"), "not finite"));
                    }
                }
                linalg::diagonal(&entries.iter().map(|&e| complex(e)).collect::<Vec<_>>())
            }
            OperatorSpec::Dense { dim, rows } => matrix_from_rows("operator", *dim, rows)?,
            OperatorSpec::JordanBlock { eigenvalue, size } => {
                check_dim(*size)?;
                if !(eigenvalue[0].is_finite() && eigenvalue[1].is_finite()) {
                    return Err(invalid("operator.eigenvalue", "not finite"));
                }
                let mut m = linalg::identity(*size) * complex(*eigenvalue);
                for i in 1..*size {
                    m[(i - 1, i)] = Complex64::new(1.0, 0.0);
                }
                m
            }
        };
        Ok(m)
    }
}

fn check_dim(n: usize) -> Result<(), ScenarioError> {
    if n == 0 || n > MAX_DIM {
        return Err(invalid(
            "operator",
            format!("dimension {n} outside 1..={MAX_DIM}"),
        ));
    }
    Ok(())
}

fn matrix_from_rows(
    field: &str,
    dim: usize,
    rows: &[Vec<[f64; 2]>],
) -> Result<CMatrix, ScenarioError> {
    let doc = MatrixDocument {
        dim,
        rows: rows.to_vec(),
    };
    doc.to_matrix()
        .map_err(|e: ExchangeError| invalid(field, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Identity,
    Affine {
        t: f64,
    },
    Blaschke {
        t: f64,
    },
    /// Blaschke factor vanishing at `a`, rotated to fix 1.
    NormalizedBlaschke {
        a: [f64; 2],
    },
    Mobius {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
    },
    Polynomial {
        coeffs: Vec<[f64; 2]>,
    },
    Rational {
        num: Vec<[f64; 2]>,
        den: Vec<[f64; 2]>,
    },
    Composition {
        maps: Vec<LayerSpec>,
    },
    Product {
        factors: Vec<LayerSpec>,
    },
    /// Two-point interpolant `b_t(z) Φ(b_t(z))`.
    SchurSolution {
        t: f64,
        phi: Box<LayerSpec>,
    },
    Conjugation {
        dim: usize,
        rows: Vec<Vec<[f64; 2]>>,
    },
}

impl LayerSpec {
    /// The Schur map described, or an error for conjugation layers.
    pub fn to_map(&self) -> Result<SchurMap, Error> {
        let coeffs = |v: &[[f64; 2]]| v.iter().map(|&p| complex(p)).collect::<Vec<_>>();
        match self {
            LayerSpec::Identity => Ok(SchurMap::Identity),
            LayerSpec::Affine { t } => SchurMap::affine(*t),
            LayerSpec::Blaschke { t } => SchurMap::blaschke(*t),
            LayerSpec::NormalizedBlaschke { a } => SchurMap::normalized_blaschke(complex(*a)),
            LayerSpec::Mobius { a, b, c, d } => {
                SchurMap::mobius(complex(*a), complex(*b), complex(*c), complex(*d))
            }
            LayerSpec::Polynomial { coeffs: p } => SchurMap::polynomial(coeffs(p)),
            LayerSpec::Rational { num, den } => SchurMap::rational(coeffs(num), coeffs(den)),
            LayerSpec::Composition { maps } => {
                SchurMap::composition(maps.iter().map(|m| m.to_map()).collect::<Result<_, _>>()?)
            }
            LayerSpec::Product { factors } => SchurMap::product(
                factors
                    .iter()
                    .map(|m| m.to_map())
                    .collect::<Result<_, _>>()?,
            ),
            LayerSpec::SchurSolution { t, phi } => {
                let problem = InterpolationProblem::new(*t)?;
                Ok(solve_two_point(&problem, &phi.to_map()?)?.s)
            }
            LayerSpec::Conjugation { .. } => {
                Err(Error::UnsupportedVariant("conjugation layers are matrices"))
            }
        }
    }

    pub fn is_conjugation(&self) -> bool {
        matches!(self, LayerSpec::Conjugation { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    FunctionIteration,
    PowerIteration,
    Cesaro,
    ConjugationCycle,
    /// Riesz projections of the layer images at 1.
    Riesz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Converged,
    Cycle,
    Diverged,
    BudgetExhausted,
}

impl Expectation {
    pub fn matches(&self, status: &Status) -> bool {
        matches!(
            (self, status),
            (Expectation::Converged, Status::Converged)
                | (Expectation::Cycle, Status::Cycle(_))
                | (Expectation::Diverged, Status::Diverged)
                | (Expectation::BudgetExhausted, Status::BudgetExhausted)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourDocument {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl ContourDocument {
    pub fn to_spec(&self) -> Result<ContourSpec, Error> {
        ContourSpec::new(complex(self.center), self.radius, self.nodes)
    }
}

/// Names accepted in `checks` and `expect_check_failures`.
pub const CHECK_NAMES: &[&str] = &[
    "limit_properties",
    "stage_omega",
    "spectral_projection",
    "spectral_mapping",
    "boundary_separation",
    "reference_composite",
    "layer_image",
    "expected_limit",
    "riesz_product",
    "fixed_space",
    "joint_fixed_space",
    "ergodic_agreement",
    "offdiag_growth",
    "period",
];

fn default_mode() -> ScenarioMode {
    ScenarioMode::FunctionIteration
}
fn default_tolerance() -> f64 {
    DEFAULT_TOL
}
fn default_max_stages() -> usize {
    DEFAULT_MAX_STAGES
}
fn default_cycle_window() -> usize {
    DEFAULT_CYCLE_WINDOW
}
fn default_check_tolerance() -> f64 {
    DEFAULT_CHECK_TOLERANCE
}
fn default_nodes() -> usize {
    DEFAULT_CONTOUR_NODES
}
fn default_expect() -> Expectation {
    Expectation::Converged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_mode")]
    pub mode: ScenarioMode,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_stages")]
    pub max_stages: usize,
    #[serde(default = "default_cycle_window")]
    pub cycle_window: usize,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default = "default_check_tolerance")]
    pub check_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourDocument>,
    #[serde(default = "default_expect")]
    pub expect: Expectation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_period: Option<usize>,
    /// Map the composed layers are compared against (`reference_composite`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_composite: Option<LayerSpec>,
    /// Expected image of the operator under the composed layers (`layer_image`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_operator: Option<MatrixDocument>,
    /// Expected limit (`expected_limit`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_limit: Option<MatrixDocument>,
    /// Checks that are meant to fail; the run still exits 0 when they do.
    #[serde(default)]
    pub expect_check_failures: Vec<String>,
}

impl Scenario {
    pub fn operator_matrix(&self) -> Result<CMatrix, ScenarioError> {
        self.operator.matrix()
    }

    /// The Schur-map layers, in application order.
    pub fn maps(&self) -> Result<Vec<SchurMap>, ScenarioError> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_conjugation())
            .map(|(i, l)| l.to_map().map_err(|e| invalid(format!("layers[{i}]"), e)))
            .collect()
    }

    pub fn cycle(&self) -> Result<Option<LayerCycle>, ScenarioError> {
        let maps = self.maps()?;
        if maps.is_empty() {
            return Ok(None);
        }
        LayerCycle::new(maps)
            .map(Some)
            .map_err(|e| invalid("layers", e))
    }

    pub fn conjugator(&self) -> Result<Option<CMatrix>, ScenarioError> {
        for (i, layer) in self.layers.iter().enumerate() {
            if let LayerSpec::Conjugation { dim, rows } = layer {
                return matrix_from_rows(&format!("layers[{i}]"), *dim, rows).map(Some);
            }
        }
        Ok(None)
    }

    pub fn contour_spec(&self) -> Result<Option<ContourSpec>, ScenarioError> {
        self.contour
            .as_ref()
            .map(|c| c.to_spec().map_err(|e| invalid("contour", e)))
            .transpose()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
        {
            return Err(invalid("name", "use letters, digits, '_' or '-'"));
        }
        let a = self.operator_matrix()?;
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if !(self.check_tolerance > 0.0 && self.check_tolerance.is_finite()) {
            return Err(invalid("check_tolerance", "must be positive"));
        }
        if self.max_stages == 0 {
            return Err(invalid("max_stages", "must be at least 1"));
        }
        if self.cycle_window < 2 {
            return Err(invalid("cycle_window", "must be at least 2"));
        }
        let conjugations = self.layers.iter().filter(|l| l.is_conjugation()).count();
        let cycle = self.cycle()?;
        match self.mode {
            ScenarioMode::ConjugationCycle => {
                if conjugations != 1 || cycle.is_some() {
                    return Err(invalid(
                        "layers",
                        "conjugation_cycle takes exactly one conjugation layer",
                    ));
                }
            }
            ScenarioMode::FunctionIteration | ScenarioMode::Riesz => {
                if conjugations > 0 {
                    return Err(invalid(
                        "layers",
                        "conjugation layers need conjugation_cycle mode",
                    ));
                }
                if cycle.is_none() {
                    return Err(invalid("layers", "at least one layer is required"));
                }
            }
            ScenarioMode::PowerIteration | ScenarioMode::Cesaro => {
                if conjugations > 0 {
                    return Err(invalid(
                        "layers",
                        "conjugation layers need conjugation_cycle mode",
                    ));
                }
            }
        }
        if let Some(s) = self.conjugator()? {
            if s.nrows() != a.nrows() {
                return Err(invalid(
                    "layers",
                    "conjugator dimension differs from the operator",
                ));
            }
        }
        self.contour_spec()?;
        if let Some(r) = &self.reference_composite {
            r.to_map().map_err(|e| invalid("reference_composite", e))?;
        }
        for (field, doc) in [
            ("expect_operator", &self.expect_operator),
            ("expect_limit", &self.expect_limit),
        ] {
            if let Some(doc) = doc {
                let m = doc.to_matrix().map_err(|e| invalid(field, e))?;
                if m.nrows() != a.nrows() {
                    return Err(invalid(field, "dimension differs from the operator"));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &self.checks {
            if !CHECK_NAMES.contains(&name.as_str()) {
                return Err(invalid("checks", format!("unknown check {name:?}")));
            }
            if !seen.insert(name) {
                return Err(invalid("checks", format!("{name:?} listed twice")));
            }
        }
        for name in &self.expect_check_failures {
            if !seen.contains(name) {
                return Err(invalid(
                    "expect_check_failures",
                    format!("{name:?} is not a requested check"),
                ));
            }
        }
        let needs = |check: &str, ok: bool, why: &str| -> Result<(), ScenarioError> {
            if seen.contains(&check.to_string()) && !ok {
                return Err(invalid("checks", format!("{check} {why}")));
            }
            Ok(())
        };
        needs(
            "reference_composite",
            self.reference_composite.is_some(),
            "needs reference_composite",
        )?;
        needs(
            "layer_image",
            self.expect_operator.is_some(),
            "needs expect_operator",
        )?;
        needs(
            "expected_limit",
            self.expect_limit.is_some(),
            "needs expect_limit",
        )?;
        let has_maps = cycle.is_some();
        for check in [
            "stage_omega",
            "boundary_separation",
            "riesz_product",
            "joint_fixed_space",
            "spectral_mapping",
        ] {
            needs(check, has_maps, "needs at least one map layer")?;
        }
        Ok(())
    }
}

fn parse_error(e: serde_json::Error) -> ScenarioError {
    ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parse and validate a scenario document, filling defaults.
pub fn parse_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(document).map_err(parse_error)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenarios always serialize")
}

/// Fixture documents shipped with the crate, `(name, document)`.
pub const FIXTURES: &[(&str, &str)] = &[
    ("c4_t05", include_str!("../fixtures/c4_t05.json")),
    ("swap_cycle", include_str!("../fixtures/swap_cycle.json")),
    ("c5_swap", include_str!("../fixtures/c5_swap.json")),
    (
        "jordan_diverge",
        include_str!("../fixtures/jordan_diverge.json"),
    ),
    (
        "ex41_printed",
        include_str!("../fixtures/ex41_printed.json"),
    ),
    (
        "ex41_recomputed",
        include_str!("../fixtures/ex41_recomputed.json"),
    ),
    ("ex42_t01", include_str!("../fixtures/ex42_t01.json")),
    ("ex42_t05", include_str!("../fixtures/ex42_t05.json")),
    ("ex42_t09", include_str!("../fixtures/ex42_t09.json")),
    (
        "ex43_schur_family",
        include_str!("../fixtures/ex43_schur_family.json"),
    ),
    (
        "ex44_power_diag",
        include_str!("../fixtures/ex44_power_diag.json"),
    ),
    (
        "ex44_square_layer",
        include_str!("../fixtures/ex44_square_layer.json"),
    ),
    (
        "ex44_half_layer",
        include_str!("../fixtures/ex44_half_layer.json"),
    ),
    ("cesaro_flip", include_str!("../fixtures/cesaro_flip.json")),
    ("riesz_c4", include_str!("../fixtures/riesz_c4.json")),
];

pub fn fixture(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, doc) = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownFixture(name.to_string()))?;
    parse_scenario(doc)
}

/// A scenario from a file path, or a fixture name when no such file exists.
pub fn load(source: &str) -> Result<Scenario, ScenarioError> {
    let path = std::path::Path::new(source);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: source.to_string(),
            source: e,
        })?;
        return parse_scenario(&text);
    }
    if FIXTURES.iter().any(|(n, _)| *n == source) {
        return fixture(source);
    }
    Err(ScenarioError::Io {
        path: source.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or fixture"),
    })
}
