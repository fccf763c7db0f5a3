//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DecayBound, SourceDensity};
use crate::domain::{ConvexPolygonDomain, DiskDomain, Domain};
use crate::expr::Expr;
use crate::geometry::Vec2;
use crate::target::{truncation_radius_for, SiteLayout, TargetRegion};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }

    pub fn path(&self) -> &str {
        match self {
            ConfigError::Invalid { path, .. } | ConfigError::Io { path, .. } => path,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    SphereBenchmark,
    Blowup,
    OracleCompare,
    Lemmas,
    Export,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk { center: [f64; 2], radius: f64 },
    /// Counterclockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub c0: f64,
    pub delta: f64,
    pub r0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<DecaySpec>,
    },
    /// Expression over `x1`, `x2` and `d` (distance to the boundary).
    Expression {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decay: Option<DecaySpec>,
    },
    /// `K = c0 d^-delta`, saturating at `d >= r0`.
    Decay { c0: f64, delta: f64, r0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    ChartDisk { center: [f64; 2], radius: f64 },
    ChartPolygon { vertices: Vec<[f64; 2]> },
    /// Either the chart radius or the hemisphere mass left outside it.
    FullHemisphere {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation_radius: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    /// CSV with header `p1,p2,nu`; masses are rescaled to the source mass.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereSection {
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupSection {
    pub samples: usize,
    pub delta: f64,
    pub c0: f64,
    pub truncation_mass: f64,
    pub analytic_samples: usize,
    pub analytic_range: [f64; 2],
    pub analytic_tol: f64,
    pub rays: usize,
}

impl Default for BlowupSection {
    fn default() -> Self {
        let p = crate::experiments::BlowupParams::default();
        Self {
            samples: p.samples,
            delta: p.delta,
            c0: p.c0,
            truncation_mass: p.truncation_mass,
            analytic_samples: p.analytic_samples,
            analytic_range: [p.analytic_range.0, p.analytic_range.1],
            analytic_tol: p.analytic_tol,
            rays: p.rays,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaSection {
    pub trials: usize,
    pub points: usize,
    pub thetas: Vec<f64>,
    pub estar_samples: usize,
    pub slice_points: usize,
    pub t_values: usize,
    pub monte_carlo_samples: usize,
    pub triples: usize,
}

impl Default for LemmaSection {
    fn default() -> Self {
        let l = crate::experiments::LemmaParams::default();
        let c = crate::experiments::ChartParams::default();
        Self {
            trials: l.trials,
            points: l.points,
            thetas: l.thetas,
            estar_samples: l.estar_samples,
            slice_points: l.slice_points,
            t_values: l.t_values,
            monte_carlo_samples: c.monte_carlo_samples,
            triples: c.triples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub grid_m: usize,
    pub min_agreement: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { grid_m: 15, min_agreement: 0.95 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<SiteLayout>,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// `solution.csv` to lift when exporting without solving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere: Option<SphereSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

fn default_n() -> usize {
    1000
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    50
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn vec2(v: &[f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn finite(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(path, "must be finite"))
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(path, format!("must be positive, got {v}")))
    }
}

fn value_at<'a>(root: &'a mut serde_json::Value, path: &[String]) -> Option<&'a mut serde_json::Value> {
    path.iter().try_fold(root, |v, key| match v {
        serde_json::Value::Object(m) => m.get_mut(key),
        serde_json::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
        _ => None,
    })
}

/// Tagged sections are buffered before their fields are read, so the path
/// tracker stops at the section. Descend by dropping one key at a time and
/// keeping the first whose removal changes the error.
fn refine_path(root: &serde_json::Value, path: &mut Vec<String>) {
    let message = |v: serde_json::Value| serde_json::from_value::<ExperimentConfig>(v).err().map(|e| e.to_string());
    let Some(original) = message(root.clone()) else { return };
    if path.is_empty() || original.starts_with("missing field") {
        return;
    }
    loop {
        let mut probe = root.clone();
        let keys: Vec<String> = match value_at(&mut probe, path) {
            Some(serde_json::Value::Object(m)) => m.keys().filter(|k| *k != "type").cloned().collect(),
            _ => return,
        };
        let culprit = keys.into_iter().find(|k| {
            let mut v = root.clone();
            if let Some(serde_json::Value::Object(m)) = value_at(&mut v, path) {
                m.remove(k);
            }
            message(v).as_ref() != Some(&original)
        });
        match culprit {
            Some(k) => path.push(k),
            None => return,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, reporting the field path of the first type error.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut segments: Vec<String> = e.path().iter().filter_map(|s| match s {
                serde_path_to_error::Segment::Map { key } => Some(key.clone()),
                serde_path_to_error::Segment::Seq { index } => Some(index.to_string()),
                _ => None,
            }).collect();
            if let Ok(root) = serde_json::from_str::<serde_json::Value>(text) {
                refine_path(&root, &mut segments);
            }
            let path = if segments.is_empty() { "$".to_string() } else { segments.join(".") };
            ConfigError::invalid(path, e.into_inner().to_string())
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks and construction of every section the command reads.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::invalid("n", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(ConfigError::invalid("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(ConfigError::invalid("max_iter", "must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(ConfigError::invalid("jitter", "must lie in [0, 0.5)"));
        }
        if let Some(d) = &self.domain {
            self.build_domain_from(d)?;
        }
        if let Some(k) = &self.density {
            build_density(k)?;
        }
        if let Some(t) = &self.target {
            if let TargetSpec::File { path } = t {
                if !path.exists() {
                    return Err(ConfigError::invalid("target.path", format!("{} does not exist", path.display())));
                }
            } else {
                build_region(t)?;
            }
        }
        match self.command {
            Command::Solve | Command::OracleCompare => {
                if self.domain.is_none() {
                    return Err(ConfigError::invalid("domain", "required"));
                }
                if self.target.is_none() {
                    return Err(ConfigError::invalid("target", "required"));
                }
            }
            Command::SphereBenchmark => {
                let r = self.sphere.as_ref().map_or(0.6, |s| s.radius);
                if !(r > 0.0 && r < 1.0) {
                    return Err(ConfigError::invalid("sphere.radius", format!("must lie in (0, 1), got {r}")));
                }
            }
            Command::Blowup | Command::Lemmas => {
                if let Some(d) = &self.domain {
                    if !matches!(d, DomainSpec::Disk { .. }) {
                        return Err(ConfigError::invalid("domain.type", "this command needs a disk"));
                    }
                }
            }
            Command::Export => {
                if self.domain.is_none() {
                    return Err(ConfigError::invalid("domain", "required"));
                }
                match &self.solution_file {
                    Some(p) if !p.exists() => {
                        return Err(ConfigError::invalid("solution_file", format!("{} does not exist", p.display())))
                    }
                    Some(_) => {}
                    None if self.target.is_none() => {
                        return Err(ConfigError::invalid("solution_file", "required unless a target is given"))
                    }
                    None => {}
                }
            }
        }
        if let Some(b) = &self.blowup {
            if b.samples == 0 {
                return Err(ConfigError::invalid("blowup.samples", "must be at least 1"));
            }
            if !(b.delta > 0.0 && b.delta < 1.0) {
                return Err(ConfigError::invalid("blowup.delta", "must lie in (0, 1)"));
            }
            positive("blowup.c0", b.c0)?;
            positive("blowup.truncation_mass", b.truncation_mass)?;
            if !(0.0 < b.analytic_range[0] && b.analytic_range[0] < b.analytic_range[1]) {
                return Err(ConfigError::invalid("blowup.analytic_range", "need 0 < lo < hi"));
            }
        }
        if let Some(l) = &self.lemmas {
            for (k, &t) in l.thetas.iter().enumerate() {
                if !(t > 0.0 && t < 1.0 / 6f64.sqrt()) {
                    return Err(ConfigError::invalid(format!("lemmas.thetas[{k}]"), "must lie in (0, 1/sqrt(6))"));
                }
            }
            if l.trials == 0 || l.points == 0 || l.estar_samples == 0 {
                return Err(ConfigError::invalid("lemmas", "sample counts must be positive"));
            }
        }
        if let Some(o) = &self.oracle {
            if o.grid_m == 0 || o.grid_m * o.grid_m > 1000 {
                return Err(ConfigError::invalid("oracle.grid_m", "need 1 <= grid_m² <= 1000"));
            }
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Option<Domain>, ConfigError> {
        self.domain.as_ref().map(|d| self.build_domain_from(d)).transpose()
    }

    fn build_domain_from(&self, d: &DomainSpec) -> Result<Domain, ConfigError> {
        match d {
            DomainSpec::Disk { center, radius } => {
                finite("domain.center[0]", center[0])?;
                finite("domain.center[1]", center[1])?;
                positive("domain.radius", *radius)?;
                Ok(DiskDomain::new(vec2(center), *radius).map_err(|e| ConfigError::invalid("domain", e.to_string()))?.into())
            }
            DomainSpec::Polygon { vertices } => {
                let v = vertices.iter().map(vec2).collect();
                Ok(ConvexPolygonDomain::new(v).map_err(|e| ConfigError::invalid("domain.vertices", e.to_string()))?.into())
            }
        }
    }

    pub fn build_density(&self) -> Result<SourceDensity, ConfigError> {
        self.density.as_ref().map_or(Ok(SourceDensity::constant(1.0)), build_density)
    }

    pub fn build_region(&self) -> Result<Option<TargetRegion>, ConfigError> {
        match &self.target {
            None | Some(TargetSpec::File { .. }) => Ok(None),
            Some(t) => build_region(t).map(Some),
        }
    }
}

fn build_decay(path: &str, d: &DecaySpec) -> Result<DecayBound, ConfigError> {
    positive(&format!("{path}.c0"), d.c0)?;
    positive(&format!("{path}.r0"), d.r0)?;
    if !(d.delta > 0.0 && d.delta < 1.0) {
        return Err(ConfigError::invalid(format!("{path}.delta"), "must lie in (0, 1)"));
    }
    Ok(DecayBound { c0: d.c0, delta: d.delta, r0: d.r0 })
}

pub fn build_density(spec: &DensitySpec) -> Result<SourceDensity, ConfigError> {
    match spec {
        DensitySpec::Constant { value, decay } => {
            let mut k = SourceDensity::constant(positive("density.value", *value)?);
            if let Some(d) = decay {
                k = k.with_decay(build_decay("density.decay", d)?);
            }
            Ok(k)
        }
        DensitySpec::Expression { expr, lower, upper, decay } => {
            let e = Expr::parse(expr).map_err(|e| ConfigError::invalid("density.expr", e.to_string()))?;
            let mut k = SourceDensity::expr(e);
            if lower.is_some() || upper.is_some() {
                let lo = lower.unwrap_or(0.0);
                let hi = upper.unwrap_or(f64::INFINITY);
                if !(lo >= 0.0 && lo <= hi) {
                    return Err(ConfigError::invalid("density.lower", "need 0 <= lower <= upper"));
                }
                k = k.with_bounds(lo, hi);
            }
            if let Some(d) = decay {
                k = k.with_decay(build_decay("density.decay", d)?);
            }
            Ok(k)
        }
        DensitySpec::Decay { c0, delta, r0 } => {
            let bound = build_decay("density", &DecaySpec { c0: *c0, delta: *delta, r0: *r0 })?;
            let (c0, delta, r0) = (bound.c0, bound.delta, bound.r0);
            Ok(SourceDensity::custom(move |_: &Vec2, d: f64| c0 * d.max(1e-300).min(r0).powf(-delta), true)
                .with_decay(bound))
        }
    }
}

pub fn build_region(spec: &TargetSpec) -> Result<TargetRegion, ConfigError> {
    let region = match spec {
        TargetSpec::ChartDisk { center, radius } => {
            finite("target.center[0]", center[0])?;
            finite("target.center[1]", center[1])?;
            TargetRegion::chart_disk(vec2(center), positive("target.radius", *radius)?)
        }
        TargetSpec::ChartPolygon { vertices } => Ok(TargetRegion::ChartPolygon { vertices: vertices.iter().map(vec2).collect() }),
        TargetSpec::FullHemisphere { truncation_radius, epsilon } => {
            let r = match (truncation_radius, epsilon) {
                (Some(r), None) => positive("target.truncation_radius", *r)?,
                (None, Some(e)) => {
                    let e = positive("target.epsilon", *e)?;
                    if e >= std::f64::consts::PI {
                        return Err(ConfigError::invalid("target.epsilon", "must be below π"));
                    }
                    truncation_radius_for(e)
                }
                _ => return Err(ConfigError::invalid("target", "give exactly one of truncation_radius and epsilon")),
            };
            TargetRegion::full_hemisphere(r)
        }
        TargetSpec::File { .. } => return Err(ConfigError::invalid("target", "file targets have no region")),
    };
    let region = region.map_err(|e| ConfigError::invalid("target", e.to_string()))?;
    region.validate().map_err(|e| ConfigError::invalid("target", e.to_string()))?;
    if !region.is_chart_convex() {
        return Err(ConfigError::invalid("target", "region is not geodesically convex"));
    }
    Ok(region)
}
