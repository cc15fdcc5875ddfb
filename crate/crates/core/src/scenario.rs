//! Scenario files, the built-in example registry and per-scenario sampling.
//!
//! File layout: top-level `name` and `dimension`, then `key = value` lines in
//! `[domain]`, `[metric]`, `[field]` and `[numerics]` sections. `#` starts a comment.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Domain;
use crate::error::{FinslerError, Result};
use crate::expr::{parse_expression_at, parse_list_at, ExprFunction, ExprMatrixField, ExprVectorField, Expression, ListValue};
use crate::field::{MatrixField, ScalarField, Vector, VectorField};
use crate::foliation::{GridLevelSampler, LevelSampler, ParametricLevelSampler};
use crate::geodesic::GeodesicOptions;
use crate::metric::{DerivativeMode, MetricSpec, RiemannianMetric, WindField, WIND_LIMIT};
use crate::transnormal::TransnormalOptions;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricConfig {
    Riemannian { h: Vec<Vec<Expression>> },
    Randers { h: Vec<Vec<Expression>>, wind: Vec<Expression> },
}

impl MetricConfig {
    pub fn h(&self) -> &[Vec<Expression>] {
        match self {
            MetricConfig::Riemannian { h } | MetricConfig::Randers { h, .. } => h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    pub step: f64,
    pub tolerance: f64,
    pub parallel_tolerance: f64,
    pub probes: usize,
    pub derivatives: DerivativeMode,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { step: 1e-3, tolerance: 1e-6, parallel_tolerance: 1e-4, probes: 32, derivatives: DerivativeMode::Analytic }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub dimension: usize,
    pub domain: Domain,
    pub metric: MetricConfig,
    pub field: Expression,
    pub numerics: NumericsConfig,
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    dimension: Option<usize>,
    domain_kind: Option<(String, usize)>,
    radius: Option<f64>,
    inner: Option<f64>,
    outer: Option<f64>,
    min_height: Option<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    metric_kind: Option<(String, usize)>,
    h: Option<Vec<Vec<Expression>>>,
    wind: Option<Vec<Expression>>,
    field: Option<Expression>,
    numerics: NumericsConfig,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> FinslerError {
    FinslerError::Parse { line, column, message: message.into() }
}

fn constant_at(text: &str, line: usize, col: usize) -> Result<f64> {
    let e = parse_expression_at(text, line, col)?;
    if e.arity() > 0 {
        return Err(parse_error(line, col, "expected a constant"));
    }
    let v = e.eval(&[]);
    if !v.is_finite() {
        return Err(parse_error(line, col, "constant is not finite"));
    }
    Ok(v)
}

fn list_at(text: &str, line: usize, col: usize) -> Result<Vec<ListValue>> {
    match parse_list_at(text, line, col)? {
        ListValue::List(items) => Ok(items),
        ListValue::Scalar(_) => Err(parse_error(line, col, "expected a bracketed list")),
    }
}

fn scalars(items: Vec<ListValue>, line: usize, col: usize) -> Result<Vec<Expression>> {
    items
        .into_iter()
        .map(|i| match i {
            ListValue::Scalar(e) => Ok(e),
            ListValue::List(_) => Err(parse_error(line, col, "expected a flat list of expressions")),
        })
        .collect()
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut draft = Draft::default();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') {
                return Err(parse_error(line, lead + trimmed.len() + 1, "expected ']' closing the section header"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            if !matches!(name, "domain" | "metric" | "field" | "numerics") {
                return Err(parse_error(line, lead + 2, format!("unknown section '{name}'")));
            }
            section = name.to_string();
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parse_error(line, lead + 1, "expected 'key = value'"));
        };
        let key = content[..eq].trim();
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let vcol = eq + 2 + (value_raw.len() - value_raw.trim_start().len());
        if value.is_empty() {
            return Err(parse_error(line, vcol, "missing value"));
        }
        let kcol = lead + 1;
        match (section.as_str(), key) {
            ("", "name") => draft.name = Some(value.to_string()),
            ("", "dimension") => {
                let d: usize = value.parse().map_err(|_| parse_error(line, vcol, "dimension must be a positive integer"))?;
                if d == 0 || d > 3 {
                    return Err(parse_error(line, vcol, "dimension must be 1, 2 or 3"));
                }
                draft.dimension = Some(d);
            }
            ("domain", "kind") => draft.domain_kind = Some((value.to_string(), line)),
            ("domain", "radius") => draft.radius = Some(constant_at(value, line, vcol)?),
            ("domain", "inner") => draft.inner = Some(constant_at(value, line, vcol)?),
            ("domain", "outer") => draft.outer = Some(constant_at(value, line, vcol)?),
            ("domain", "min_height") => draft.min_height = Some(constant_at(value, line, vcol)?),
            ("domain", "lower") | ("domain", "upper") => {
                let items = scalars(list_at(value, line, vcol)?, line, vcol)?;
                let mut out = Vec::new();
                for e in items {
                    if e.arity() > 0 {
                        return Err(parse_error(line, vcol, "box bounds must be constants"));
                    }
                    out.push(e.eval(&[]));
                }
                if key == "lower" {
                    draft.lower = Some(out);
                } else {
                    draft.upper = Some(out);
                }
            }
            ("metric", "kind") => draft.metric_kind = Some((value.to_string(), line)),
            ("metric", "h") => {
                let rows = list_at(value, line, vcol)?
                    .into_iter()
                    .map(|r| match r {
                        ListValue::List(items) => scalars(items, line, vcol),
                        ListValue::Scalar(_) => Err(parse_error(line, vcol, "h must be a list of rows")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                draft.h = Some(rows);
            }
            ("metric", "wind") => draft.wind = Some(scalars(list_at(value, line, vcol)?, line, vcol)?),
            ("field", "f") => draft.field = Some(parse_expression_at(value, line, vcol)?),
            ("numerics", "step") => draft.numerics.step = constant_at(value, line, vcol)?,
            ("numerics", "tolerance") => draft.numerics.tolerance = constant_at(value, line, vcol)?,
            ("numerics", "parallel_tolerance") => draft.numerics.parallel_tolerance = constant_at(value, line, vcol)?,
            ("numerics", "probes") => {
                draft.numerics.probes =
                    value.parse().map_err(|_| parse_error(line, vcol, "probes must be a positive integer"))?
            }
            ("numerics", "derivatives") => {
                draft.numerics.derivatives = match value {
                    "analytic" => DerivativeMode::Analytic,
                    "finite-difference" => DerivativeMode::FiniteDifference,
                    _ => return Err(parse_error(line, vcol, "derivatives must be 'analytic' or 'finite-difference'")),
                }
            }
            _ => {
                let place = if section.is_empty() { "top level".to_string() } else { format!("section [{section}]") };
                return Err(parse_error(line, kcol, format!("unknown key '{key}' at {place}")));
            }
        }
    }
    let config = draft.finish()?;
    config.validate()?;
    Ok(config)
}

fn missing(what: &str) -> FinslerError {
    FinslerError::Validation(format!("missing {what}"))
}

impl Draft {
    fn finish(self) -> Result<ScenarioConfig> {
        let name = self.name.ok_or_else(|| missing("name"))?;
        let dimension = self.dimension.ok_or_else(|| missing("dimension"))?;
        let (kind, kline) = self.domain_kind.unwrap_or_else(|| ("unbounded".into(), 0));
        let domain = match kind.as_str() {
            "unbounded" => Domain::Unbounded,
            "disc" => Domain::Disc { radius: self.radius.ok_or_else(|| missing("domain radius"))? },
            "annulus" => Domain::Annulus {
                inner: self.inner.ok_or_else(|| missing("domain inner radius"))?,
                outer: self.outer.ok_or_else(|| missing("domain outer radius"))?,
            },
            "sphere-chart" => Domain::SphereChart { min_height: self.min_height.ok_or_else(|| missing("domain min_height"))? },
            "box" => Domain::Box {
                lower: self.lower.ok_or_else(|| missing("domain lower corner"))?,
                upper: self.upper.ok_or_else(|| missing("domain upper corner"))?,
            },
            other => return Err(parse_error(kline, 1, format!("unknown domain kind '{other}'"))),
        };
        let (mkind, mline) = self.metric_kind.ok_or_else(|| missing("metric kind"))?;
        let h = self.h.ok_or_else(|| missing("metric h"))?;
        let metric = match mkind.as_str() {
            "riemannian" => {
                if self.wind.is_some() {
                    return Err(FinslerError::Validation("a riemannian metric takes no wind".into()));
                }
                MetricConfig::Riemannian { h }
            }
            "randers" => MetricConfig::Randers { h, wind: self.wind.ok_or_else(|| missing("metric wind"))? },
            other => return Err(parse_error(mline, 1, format!("unknown metric kind '{other}'"))),
        };
        let field = self.field.ok_or_else(|| missing("field f"))?;
        Ok(ScenarioConfig { name, dimension, domain, metric, field, numerics: self.numerics })
    }
}

fn fmt_list(items: &[Expression]) -> String {
    let parts: Vec<String> = items.iter().map(|e| e.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_floats(items: &[f64]) -> String {
    let parts: Vec<String> = items.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl ScenarioConfig {
    /// Canonical text form; `parse_scenario(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "dimension = {}\n", self.dimension);
        s.push_str("[domain]\n");
        match &self.domain {
            Domain::Unbounded => s.push_str("kind = unbounded\n"),
            Domain::Disc { radius } => {
                let _ = writeln!(s, "kind = disc\nradius = {radius}");
            }
            Domain::Annulus { inner, outer } => {
                let _ = writeln!(s, "kind = annulus\ninner = {inner}\nouter = {outer}");
            }
            Domain::SphereChart { min_height } => {
                let _ = writeln!(s, "kind = sphere-chart\nmin_height = {min_height}");
            }
            Domain::Box { lower, upper } => {
                let _ = writeln!(s, "kind = box\nlower = {}\nupper = {}", fmt_floats(lower), fmt_floats(upper));
            }
        }
        s.push_str("\n[metric]\n");
        let rows: Vec<String> = self.metric.h().iter().map(|r| fmt_list(r)).collect();
        match &self.metric {
            MetricConfig::Riemannian { .. } => s.push_str("kind = riemannian\n"),
            MetricConfig::Randers { .. } => s.push_str("kind = randers\n"),
        }
        let _ = writeln!(s, "h = [{}]", rows.join(", "));
        if let MetricConfig::Randers { wind, .. } = &self.metric {
            let _ = writeln!(s, "wind = {}", fmt_list(wind));
        }
        let _ = writeln!(s, "\n[field]\nf = {}\n", self.field);
        let n = &self.numerics;
        let mode = match n.derivatives {
            DerivativeMode::Analytic => "analytic",
            DerivativeMode::FiniteDifference => "finite-difference",
        };
        let _ = writeln!(
            s,
            "[numerics]\nstep = {}\ntolerance = {}\nparallel_tolerance = {}\nprobes = {}\nderivatives = {mode}",
            n.step, n.tolerance, n.parallel_tolerance, n.probes
        );
        s
    }

    fn h_field(&self) -> Result<Arc<dyn MatrixField>> {
        Ok(Arc::new(ExprMatrixField::new(self.metric.h().to_vec())?))
    }

    pub fn metric_spec(&self) -> Result<MetricSpec> {
        let h = RiemannianMetric::new(self.h_field()?);
        let spec = match &self.metric {
            MetricConfig::Riemannian { .. } => MetricSpec::riemannian(h),
            MetricConfig::Randers { wind, .. } => {
                let w: Arc<dyn VectorField> = Arc::new(ExprVectorField::new(wind.clone())?);
                MetricSpec::randers(h, WindField::new(w))
            }
        };
        Ok(spec.with_mode(self.numerics.derivatives))
    }

    pub fn scalar_field(&self) -> Result<ScalarField> {
        let f = ScalarField::new(self.field.to_string(), Arc::new(ExprFunction::new(self.field.clone(), self.dimension)?));
        Ok(match self.numerics.derivatives {
            DerivativeMode::Analytic => f,
            DerivativeMode::FiniteDifference => f.finite_difference(),
        })
    }

    /// Grid points of the domain used for validation and range estimates.
    pub fn domain_grid(&self, per_axis: usize) -> Vec<Vector> {
        let n = self.dimension;
        let extent = self.domain.extent().unwrap_or(5.0);
        let total = per_axis.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut v = Vector::zeros(n);
                for k in 0..n {
                    v[k] = -extent + 2.0 * extent * (idx % per_axis) as f64 / (per_axis - 1) as f64;
                    idx /= per_axis;
                }
                v
            })
            .filter(|v| self.domain.contains(v))
            .collect()
    }

    /// Dimensions, symmetry and positivity of `h`, and `h(W,W) <= 1 - 1e-6` on a domain grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        let h = self.metric.h();
        if h.len() != n || h.iter().any(|r| r.len() != n) {
            return Err(FinslerError::Validation(format!("h must be a {n}x{n} matrix")));
        }
        let mut exprs: Vec<&Expression> = h.iter().flatten().collect();
        exprs.push(&self.field);
        if let MetricConfig::Randers { wind, .. } = &self.metric {
            if wind.len() != n {
                return Err(FinslerError::Validation(format!("wind must have {n} components, got {}", wind.len())));
            }
            exprs.extend(wind.iter());
        }
        if let Some(e) = exprs.iter().find(|e| e.arity() > n) {
            return Err(FinslerError::Validation(format!("expression '{e}' uses variables beyond dimension {n}")));
        }
        match &self.domain {
            Domain::Box { lower, upper } if lower.len() != n || upper.len() != n => {
                return Err(FinslerError::Validation("box corners must match the dimension".into()));
            }
            Domain::Disc { radius } if !(*radius > 0.0) => {
                return Err(FinslerError::Validation("disc radius must be positive".into()));
            }
            Domain::Annulus { inner, outer } if !(*inner >= 0.0 && outer > inner) => {
                return Err(FinslerError::Validation("annulus needs 0 <= inner < outer".into()));
            }
            _ => {}
        }
        let per_axis = match n {
            1 => 401,
            2 => 61,
            _ => 17,
        };
        let hfield = self.h_field()?;
        for x in self.domain_grid(per_axis) {
            let hx = hfield.value(&x);
            if hx.iter().any(|v| !v.is_finite()) || hx.clone().cholesky().is_none() {
                return Err(FinslerError::Validation(format!("h is not positive definite at {:?}", x.as_slice())));
            }
            if let MetricConfig::Randers { wind, .. } = &self.metric {
                let w = Vector::from_iterator(n, wind.iter().map(|e| e.eval(x.as_slice())));
                let norm_sq = w.dot(&(&hx * &w));
                if !(norm_sq <= WIND_LIMIT) {
                    return Err(FinslerError::Validation(format!(
                        "wind norm h(W,W) = {norm_sq} exceeds 1 - 1e-6 at {:?}",
                        x.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }
}

type Oracle = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A runnable chart: metric, function, sampler and the test ranges used by the checks.
#[derive(Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub metric: MetricSpec,
    pub f: ScalarField,
    pub sampler: Arc<dyn LevelSampler>,
    /// f-range sampled for the transnormality check.
    pub level_range: (f64, f64),
    pub critical_points: Vec<Vector>,
    pub b_oracle: Option<Oracle>,
    pub partition_levels: Vec<f64>,
    pub distance_pair: (f64, f64),
    /// f-range for Hessian identity samples, away from critical values.
    pub hessian_range: (f64, f64),
    pub morse_seeds: Vec<Vector>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scenario({})", self.config.name)
    }
}

impl Scenario {
    /// Generic scenario from a config: contour sampling and grid-estimated ranges.
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let metric = config.metric_spec()?;
        let f = config.scalar_field()?;
        let grid = config.domain_grid(if config.dimension == 2 { 41 } else { 15 });
        let values: Vec<f64> = grid.iter().map(|x| f.eval(x)).filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            return Err(FinslerError::Validation("f is not finite anywhere on the domain grid".into()));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.05 * (hi - lo);
        let level_range = (lo + pad, hi - pad);
        let third = (level_range.1 - level_range.0) / 3.0;
        let seeds = config.domain_grid(if config.dimension == 2 { 7 } else { 5 });
        Ok(Self {
            sampler: Arc::new(GridLevelSampler { domain: config.domain.clone() }),
            partition_levels: vec![level_range.0 + third, level_range.0 + 1.5 * third, level_range.0 + 2.0 * third],
            distance_pair: (level_range.0 + third, level_range.0 + 2.0 * third),
            hessian_range: (level_range.0 + 0.5 * third, level_range.1 - 0.5 * third),
            level_range,
            critical_points: Vec::new(),
            b_oracle: None,
            morse_seeds: seeds,
            metric,
            f,
            config,
        })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn domain(&self) -> &Domain {
        &self.config.domain
    }

    pub fn geodesic_options(&self) -> GeodesicOptions {
        GeodesicOptions::new(self.config.numerics.step, self.config.domain.clone())
    }

    pub fn transnormal_options(&self) -> TransnormalOptions {
        TransnormalOptions { tolerance: self.config.numerics.tolerance, ..TransnormalOptions::default() }
    }

    /// `count` evenly spaced values in `range`, end points included.
    pub fn levels_in(range: (f64, f64), count: usize) -> Vec<f64> {
        if count <= 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        (0..count).map(|i| range.0 + (range.1 - range.0) * i as f64 / (count - 1) as f64).collect()
    }

    /// Points on `levels` evenly spaced level sets plus the known critical points.
    pub fn transnormal_samples(&self, levels: usize, per_level: usize) -> Result<Vec<Vector>> {
        let mut out = Vec::new();
        for c in Self::levels_in(self.level_range, levels) {
            match self.sampler.sample(&self.f, c, per_level) {
                Ok(s) => out.extend(s.points.iter().map(|p| p.to_vector())),
                Err(FinslerError::LevelNotFound { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        out.extend(self.critical_points.iter().cloned());
        Ok(out)
    }

    /// One point on each of `count` levels in the Hessian range, rotating around the level.
    pub fn hessian_samples(&self, count: usize) -> Result<Vec<Vector>> {
        let mut out = Vec::new();
        for (i, c) in Self::levels_in(self.hessian_range, count).into_iter().enumerate() {
            let s = self.sampler.sample(&self.f, c, 7)?;
            out.push(s.points[i % s.points.len()].to_vector());
        }
        Ok(out)
    }

    /// Seeded uniform points of the domain whose f-value lies in the level range.
    pub fn random_regular_points(&self, count: usize, seed: u64) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.config.dimension;
        let extent = self.domain().extent().unwrap_or(5.0);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < 1000 * count {
            attempts += 1;
            let x = Vector::from_fn(n, |_, _| rng.gen_range(-extent..extent));
            if !self.domain().contains(&x) {
                continue;
            }
            let t = self.f.eval(&x);
            if t >= self.level_range.0 && t <= self.level_range.1 && self.f.differential(&x).norm() > 1e-6 {
                out.push(x);
            }
        }
        out
    }
}

/// A registry entry: one or more charts of the same geometric example.
#[derive(Clone, Debug)]
pub struct Example {
    pub name: &'static str,
    pub description: &'static str,
    pub charts: Vec<Scenario>,
}

impl Example {
    pub fn primary(&self) -> &Scenario {
        &self.charts[0]
    }
}

pub const EXAMPLE_NAMES: [&str; 10] = [
    "minkowski-randers-distance",
    "minkowski-randers-distance-w03",
    "minkowski-randers-distance-w08",
    "disc-radial",
    "disc-linear",
    "randers-sphere-height",
    "round-sphere",
    "euclidean-linear",
    "euclidean-circles",
    "euclidean-paraboloid-fd",
];

pub fn describe_example(name: &str) -> Option<&'static str> {
    Some(match name {
        "minkowski-randers-distance" => "constant wind |W| = 0.5 on the plane, f = forward distance from the origin",
        "minkowski-randers-distance-w03" => "constant wind |W| = 0.3, f = forward distance from the origin",
        "minkowski-randers-distance-w08" => "constant wind |W| = 0.8, f = forward distance from the origin",
        "disc-radial" => "h Euclidean, W = (x, y) on the disc r <= 0.9, f = x^2 + y^2",
        "disc-linear" => "h Euclidean, W = (x, y) on the disc r <= 0.9, f = x",
        "randers-sphere-height" => "round sphere with rotational Killing wind of magnitude <= 0.5, f = height; two polar charts",
        "round-sphere" => "round sphere in a stereographic chart, f = height",
        "euclidean-linear" => "Euclidean plane, f = x",
        "euclidean-circles" => "Euclidean plane, f = x^2 + y^2",
        "euclidean-paraboloid-fd" => "Euclidean plane, f = x^2 + y^2, finite-difference derivatives",
        _ => return None,
    })
}

fn circle_points(radius: f64, n: usize, center: (f64, f64)) -> Vec<Vector> {
    (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64;
            Vector::from_vec(vec![center.0 + radius * th.cos(), center.1 + radius * th.sin()])
        })
        .collect()
}

fn config_text(name: &str, domain: &str, metric: &str, f: &str, numerics: &str) -> String {
    format!("name = {name}\ndimension = 2\n\n[domain]\n{domain}\n\n[metric]\n{metric}\n\n[field]\nf = {f}\n\n[numerics]\n{numerics}\n")
}

const SPHERE_H: &str = "h = [[4/(1 + x^2 + y^2)^2, 0], [0, 4/(1 + x^2 + y^2)^2]]";

/// Registry text of a built-in chart; every example chart is an ordinary scenario file.
pub fn chart_text(chart: &str) -> Option<String> {
    let numerics = "step = 0.001\ntolerance = 0.000001\nparallel_tolerance = 0.0001\nprobes = 32\nderivatives = analytic";
    let euclid = "kind = riemannian\nh = [[1, 0], [0, 1]]";
    let minkowski = |name: &str, w: f64| {
        let l = 1.0 - w * w;
        config_text(
            name,
            "kind = annulus\ninner = 0.05\nouter = 5",
            &format!("kind = randers\nh = [[1, 0], [0, 1]]\nwind = [{w}, 0]"),
            &format!("(sqrt({l}*(x^2 + y^2) + ({w}*x)^2) - {w}*x)/{l}"),
            numerics,
        )
    };
    Some(match chart {
        "minkowski-randers-distance" => minkowski(chart, 0.5),
        "minkowski-randers-distance-w03" => minkowski(chart, 0.3),
        "minkowski-randers-distance-w08" => minkowski(chart, 0.8),
        "disc-radial" => config_text(
            chart,
            "kind = disc\nradius = 0.9",
            "kind = randers\nh = [[1, 0], [0, 1]]\nwind = [x, y]",
            "x^2 + y^2",
            numerics,
        ),
        "disc-linear" => config_text(
            chart,
            "kind = disc\nradius = 0.9",
            "kind = randers\nh = [[1, 0], [0, 1]]\nwind = [x, y]",
            "x",
            numerics,
        ),
        "randers-sphere-height" => config_text(
            chart,
            "kind = sphere-chart\nmin_height = -0.8",
            &format!("kind = randers\n{SPHERE_H}\nwind = [-0.5*y, 0.5*x]"),
            "(1 - x^2 - y^2)/(1 + x^2 + y^2)",
            numerics,
        ),
        "randers-sphere-height-south" => config_text(
            chart,
            "kind = sphere-chart\nmin_height = -0.8",
            &format!("kind = randers\n{SPHERE_H}\nwind = [-0.5*y, 0.5*x]"),
            "(x^2 + y^2 - 1)/(1 + x^2 + y^2)",
            numerics,
        ),
        "round-sphere" => config_text(
            chart,
            "kind = sphere-chart\nmin_height = -0.8",
            &format!("kind = riemannian\n{SPHERE_H}"),
            "(1 - x^2 - y^2)/(1 + x^2 + y^2)",
            numerics,
        ),
        "euclidean-linear" => config_text(
            chart,
            "kind = box\nlower = [-1, -1]\nupper = [1, 1]",
            euclid,
            "x",
            numerics,
        ),
        "euclidean-circles" => config_text(chart, "kind = disc\nradius = 1.5", euclid, "x^2 + y^2", numerics),
        "euclidean-paraboloid-fd" => config_text(
            chart,
            "kind = disc\nradius = 1.5",
            euclid,
            "x^2 + y^2",
            "step = 0.001\ntolerance = 0.0001\nparallel_tolerance = 0.0001\nprobes = 32\nderivatives = finite-difference",
        ),
        _ => return None,
    })
}

/// Names of every chart file in the registry.
pub fn chart_names() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = EXAMPLE_NAMES.to_vec();
    v.insert(6, "randers-sphere-height-south");
    v
}

fn chart_config(name: &str) -> Result<ScenarioConfig> {
    parse_scenario(&chart_text(name).ok_or_else(|| FinslerError::InvalidArgument(format!("unknown example '{name}'")))?)
}

fn seeds_around(p: &Vector) -> Vec<Vector> {
    vec![p + Vector::from_vec(vec![0.05, -0.03]), p + Vector::from_vec(vec![-0.02, 0.04])]
}

fn radial_scenario(
    config: ScenarioConfig,
    radius_of_level: impl Fn(f64) -> f64 + Send + Sync + 'static,
    level_range: (f64, f64),
    hessian_range: (f64, f64),
    partition_levels: Vec<f64>,
    distance_pair: (f64, f64),
    b: Option<Oracle>,
) -> Result<Scenario> {
    let base = Scenario::from_config(config)?;
    let origin = Vector::zeros(2);
    Ok(Scenario {
        sampler: Arc::new(ParametricLevelSampler::new(move |c, n| {
            let r = radius_of_level(c);
            (r.is_finite() && r > 0.0).then(|| circle_points(r, n, (0.0, 0.0)))
        })),
        level_range,
        hessian_range,
        partition_levels,
        distance_pair,
        b_oracle: b,
        morse_seeds: seeds_around(&origin),
        critical_points: vec![origin],
        ..base
    })
}

/// Builds a registry example.
pub fn example(name: &str) -> Result<Example> {
    let description = describe_example(name).ok_or_else(|| FinslerError::InvalidArgument(format!("unknown example '{name}'")))?;
    let name: &'static str = EXAMPLE_NAMES.iter().find(|n| **n == name).copied().unwrap();
    let charts = match name {
        "minkowski-randers-distance" | "minkowski-randers-distance-w03" | "minkowski-randers-distance-w08" => {
            let w = match name {
                "minkowski-randers-distance-w03" => 0.3,
                "minkowski-randers-distance-w08" => 0.8,
                _ => 0.5,
            };
            let base = Scenario::from_config(chart_config(name)?)?;
            // The level f = c is the wind-shifted circle c (u + W), |u| = 1.
            vec![Scenario {
                sampler: Arc::new(ParametricLevelSampler::new(move |c, n| {
                    (c > 0.0).then(|| circle_points(c, n, (c * w, 0.0)))
                })),
                level_range: (0.5, 2.5),
                hessian_range: (0.6, 2.4),
                partition_levels: vec![1.0, 1.5, 2.0],
                distance_pair: (1.0, 2.0),
                b_oracle: Some(Arc::new(|_| 1.0)),
                morse_seeds: vec![Vector::from_vec(vec![0.5, 0.5]), Vector::from_vec(vec![-1.0, 0.3])],
                critical_points: Vec::new(),
                ..base
            }]
        }
        "disc-radial" => vec![radial_scenario(
            chart_config(name)?,
            |t: f64| t.sqrt(),
            (0.005, 0.8),
            (0.05, 0.75),
            vec![0.1, 0.3, 0.5],
            (0.04, 0.25),
            Some(Arc::new(|t: f64| (2.0 * t.sqrt() + 2.0 * t).powi(2))),
        )?],
        "euclidean-circles" | "euclidean-paraboloid-fd" => vec![radial_scenario(
            chart_config(name)?,
            |t: f64| t.sqrt(),
            (0.005, 2.0),
            (0.05, 1.9),
            vec![0.25, 0.5, 1.0],
            (0.25, 1.0),
            Some(Arc::new(|t: f64| 4.0 * t)),
        )?],
        "randers-sphere-height" | "round-sphere" => {
            let north = radial_scenario(
                chart_config(name)?,
                |z: f64| ((1.0 - z) / (1.0 + z)).sqrt(),
                (-0.75, 0.995),
                (-0.6, 0.9),
                vec![-0.5, 0.0, 0.5],
                (0.0, 1.0),
                Some(Arc::new(|z: f64| 1.0 - z * z)),
            )?;
            let mut charts = vec![north];
            if name == "randers-sphere-height" {
                charts.push(radial_scenario(
                    chart_config("randers-sphere-height-south")?,
                    |z: f64| ((1.0 + z) / (1.0 - z)).sqrt(),
                    (-0.995, 0.75),
                    (-0.9, 0.6),
                    vec![-0.5, 0.0, 0.5],
                    (-0.5, 0.0),
                    Some(Arc::new(|z: f64| 1.0 - z * z)),
                )?);
            }
            charts
        }
        "euclidean-linear" => {
            let base = Scenario::from_config(chart_config(name)?)?;
            vec![Scenario {
                sampler: Arc::new(ParametricLevelSampler::new(|c, n| {
                    (c.abs() < 1.0).then(|| {
                        (0..n).map(|k| Vector::from_vec(vec![c, -0.9 + 1.8 * (k as f64 + 0.5) / n as f64])).collect()
                    })
                })),
                level_range: (-0.9, 0.9),
                hessian_range: (-0.8, 0.8),
                partition_levels: vec![-0.5, 0.0, 0.5],
                distance_pair: (-0.5, 0.5),
                b_oracle: Some(Arc::new(|_| 1.0)),
                morse_seeds: vec![Vector::from_vec(vec![0.2, 0.1])],
                critical_points: Vec::new(),
                ..base
            }]
        }
        "disc-linear" => {
            let base = Scenario::from_config(chart_config(name)?)?;
            vec![Scenario {
                sampler: Arc::new(ParametricLevelSampler::new(|c: f64, n| {
                    (c.abs() < 0.9).then(|| {
                        let half = 0.95 * (0.81 - c * c).sqrt();
                        (0..n).map(|k| Vector::from_vec(vec![c, -half + 2.0 * half * (k as f64 + 0.5) / n as f64])).collect()
                    })
                })),
                level_range: (-0.85, 0.85),
                hessian_range: (-0.6, 0.6),
                partition_levels: vec![-0.3, 0.0, 0.3],
                distance_pair: (-0.3, 0.3),
                b_oracle: None,
                morse_seeds: vec![Vector::from_vec(vec![0.2, 0.1])],
                critical_points: Vec::new(),
                ..base
            }]
        }
        _ => unreachable!(),
    };
    Ok(Example { name, description, charts })
}

/// Largest mismatch between the two polar charts of the sphere over the band `0.5 < r < 2`
/// of the north chart, under `u = x / |x|^2`: values of `f`, of `F` on pushed-forward
/// vectors, and of the pushed-forward gradient.
pub fn sphere_chart_overlap(north: &Scenario, south: &Scenario, samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let r = 0.5 + 1.5 * (i as f64 + 0.5) / samples as f64;
        let th = 2.399963229728653 * i as f64;
        let x = Vector::from_vec(vec![r * th.cos(), r * th.sin()]);
        let r2 = x.norm_squared();
        let u = &x / r2;
        let jac = (crate::field::Matrix::identity(2, 2) * r2 - &x * x.transpose() * 2.0) / (r2 * r2);
        worst = worst.max((north.f.eval(&x) - south.f.eval(&u)).abs());
        for k in 0..4 {
            let a = 1.3 * k as f64 + 0.4 * i as f64;
            let v = Vector::from_vec(vec![a.cos(), a.sin()]);
            let fv = north.metric.eval_at(&x, &v)?;
            let gv = south.metric.eval_at(&u, &(&jac * &v))?;
            worst = worst.max((fv - gv).abs() / fv);
        }
        let gn = crate::calculus::gradient_vector(&north.metric, &north.f, &x)?;
        let gs = crate::calculus::gradient_vector(&south.metric, &south.f, &u)?;
        worst = worst.max((&jac * &gn - &gs).norm() / gs.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_chart_parses_and_round_trips() {
        for name in chart_names() {
            let cfg = chart_config(name).unwrap();
            let again = parse_scenario(&cfg.to_text()).unwrap();
            assert_eq!(cfg, again, "{name}");
            assert_eq!(again.to_text(), cfg.to_text());
        }
    }

    #[test]
    fn dangling_operator_in_field() {
        let text = chart_text("disc-radial").unwrap().replace("f = x^2 + y^2", "f = x^2 +");
        match parse_scenario(&text).unwrap_err() {
            FinslerError::Parse { line, column, .. } => {
                assert_eq!(line, 14);
                assert_eq!(column, 10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strong_wind_is_rejected() {
        let text = chart_text("disc-radial").unwrap().replace("radius = 0.9", "radius = 1").replace("wind = [x, y]", "wind = [2*x, 0]");
        assert!(matches!(parse_scenario(&text), Err(FinslerError::Validation(m)) if m.contains("wind")));
    }

    #[test]
    fn unknown_keys_and_variables() {
        let text = chart_text("disc-radial").unwrap().replace("radius = 0.9", "radius = 0.9\ncolour = red");
        assert!(matches!(parse_scenario(&text), Err(FinslerError::Parse { line: 7, column: 1, .. })));
        let text = chart_text("disc-radial").unwrap().replace("f = x^2 + y^2", "f = x^2 + z");
        assert!(matches!(parse_scenario(&text), Err(FinslerError::Validation(_))));
    }

    #[test]
    fn registry_samplers_land_on_levels() {
        for name in EXAMPLE_NAMES {
            let ex = example(name).unwrap();
            for chart in &ex.charts {
                let (lo, hi) = chart.level_range;
                let mid = 0.5 * (lo + hi);
                let s = chart.sampler.sample(&chart.f, mid, 8).unwrap();
                for p in &s.points {
                    assert!((chart.f.eval(&p.to_vector()) - mid).abs() <= 1e-10, "{name}");
                }
            }
        }
    }

    #[test]
    fn sphere_charts_agree_on_the_overlap() {
        let ex = example("randers-sphere-height").unwrap();
        let d = sphere_chart_overlap(&ex.charts[0], &ex.charts[1], 40).unwrap();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn random_points_are_reproducible() {
        let ex = example("disc-radial").unwrap();
        let a = ex.primary().random_regular_points(10, 7);
        let b = ex.primary().random_regular_points(10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
    }
}
