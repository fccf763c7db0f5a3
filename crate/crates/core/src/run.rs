//! Command pipelines behind the `hemiot` binary: each one writes its
//! artifacts and a `report.json` with verdicts and content hashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Command, ConfigError, DomainSpec, ExperimentConfig, TargetSpec};
use crate::density::{total_mass, SourceDensity};
use crate::domain::{DiskDomain, Domain};
use crate::experiments::{
    blowup_experiment, chart_identities, gauss_map_image_check, lemma_suite, sphere_benchmark, BlowupParams, ChartParams,
    ExperimentError, LemmaParams,
};
use crate::export::{diagram_csv, export_mesh, parse_solution_csv, solution_csv, Mesh};
use crate::geometry::Vec2;
use crate::laguerre::{check_sites, laguerre_diagram, LaguerreError};
use crate::oracle::{semidiscrete_agreement, OracleError};
use crate::solver::{solve_with_diagram, SolveError, SolveOptions};
use crate::target::{discretize_with, DiscreteTarget, DiscretizeOptions, TargetRegion};

/// Process outcome, mapped to the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    ContractFailure,
    ValidationError,
    NonConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::ContractFailure => 1,
            Status::ValidationError => 2,
            Status::NonConvergence => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Failure(String),
}

impl RunError {
    fn status(&self) -> Status {
        match self {
            RunError::Validation(_) => Status::ValidationError,
            RunError::NonConvergence(_) => Status::NonConvergence,
            RunError::Failure(_) => Status::ContractFailure,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Validation(e.to_string())
    }
}

impl From<SolveError> for RunError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Laguerre(_) | SolveError::MassMismatch { .. } | SolveError::NonPositiveMass(_) => {
                RunError::Validation(e.to_string())
            }
            SolveError::CannotOpenCell(_) => RunError::NonConvergence(e.to_string()),
            SolveError::Density(_) => RunError::Failure(e.to_string()),
        }
    }
}

impl From<ExperimentError> for RunError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Solve(s) => s.into(),
            ExperimentError::NotCritical { .. } | ExperimentError::Parameter(_) | ExperimentError::Target(_) => {
                RunError::Validation(e.to_string())
            }
            ExperimentError::Domain(_) => RunError::Validation(e.to_string()),
            ExperimentError::Density(_) | ExperimentError::Quadrature(_) => RunError::Failure(e.to_string()),
        }
    }
}

impl From<OracleError> for RunError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solve(s) => s.into(),
            OracleError::PivotLimit(_) | OracleError::Density(_) => RunError::Failure(e.to_string()),
            _ => RunError::Validation(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// What a pipeline hands back before anything is written.
#[derive(Default)]
struct Output {
    verdicts: BTreeMap<String, bool>,
    results: BTreeMap<String, Value>,
    files: Vec<(String, String)>,
    converged: bool,
    timings: BTreeMap<String, f64>,
}

impl Output {
    fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    fn result<T: Serialize>(&mut self, name: &str, value: &T) {
        self.results.insert(name.to_string(), serde_json::to_value(value).expect("serializable result"));
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(phase.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub report: Value,
    pub out_dir: PathBuf,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Runs the configured command, writes the artifacts to `cfg.output_dir`
/// and returns the status. Errors are reported inside `report.json`.
pub fn run(cfg: &ExperimentConfig) -> RunOutcome {
    let start = Instant::now();
    let mut out = Output::default();
    let result = cfg.validate().map_err(RunError::from).and_then(|_| match cfg.command {
        Command::Solve => run_solve(cfg, &mut out),
        Command::SphereBenchmark => run_sphere(cfg, &mut out),
        Command::Blowup => run_blowup(cfg, &mut out),
        Command::OracleCompare => run_oracle(cfg, &mut out),
        Command::Lemmas => run_lemmas(cfg, &mut out),
        Command::Export => run_export(cfg, &mut out),
    });
    let (status, error) = match &result {
        Ok(()) if !out.converged => (Status::NonConvergence, Some("solver did not reach the tolerance".to_string())),
        Ok(()) if out.verdicts.values().all(|v| *v) => (Status::Pass, None),
        Ok(()) => (Status::ContractFailure, None),
        Err(e) => (e.status(), Some(e.to_string())),
    };

    let dir = cfg.output_dir.clone();
    let mut artifacts = Vec::new();
    let mut write_error = None;
    if let Err(e) = std::fs::create_dir_all(&dir) {
        write_error = Some(format!("cannot create {}: {e}", dir.display()));
    } else {
        for (name, contents) in &out.files {
            if let Err(e) = std::fs::write(dir.join(name), contents) {
                write_error = Some(format!("cannot write {name}: {e}"));
                break;
            }
            artifacts.push(Artifact { file: name.clone(), bytes: contents.len(), sha256: sha256_hex(contents.as_bytes()) });
        }
    }
    let status = if write_error.is_some() && status == Status::Pass { Status::ContractFailure } else { status };
    out.timings.insert("total_seconds".into(), start.elapsed().as_secs_f64());

    let mut config = serde_json::to_value(cfg).expect("config serializes");
    if let Value::Object(m) = &mut config {
        m.remove("output_dir");
    }
    let report = json!({
        "command": cfg.command,
        "status": status,
        "exit_code": status.exit_code(),
        "passed": status == Status::Pass,
        "error": error.or(write_error),
        "config": config,
        "verdicts": out.verdicts,
        "results": out.results,
        "artifacts": artifacts,
        "timings": out.timings,
    });
    if dir.is_dir() {
        let _ = std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report).expect("report serializes") + "\n");
    }
    RunOutcome { status, report, out_dir: dir }
}

/// `report.json` without its timing section, for reproducibility checks.
pub fn without_timings(report: &Value) -> Value {
    let mut r = report.clone();
    if let Value::Object(m) = &mut r {
        m.remove("timings");
    }
    r
}

fn solve_options(cfg: &ExperimentConfig) -> SolveOptions {
    SolveOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..Default::default() }
}

fn discretize_options(cfg: &ExperimentConfig) -> DiscretizeOptions {
    DiscretizeOptions { layout: cfg.layout, jitter: cfg.jitter }
}

fn required_domain(cfg: &ExperimentConfig) -> Result<Domain, RunError> {
    cfg.build_domain()?.ok_or_else(|| RunError::Validation("domain: required".into()))
}

fn disk_or_unit(cfg: &ExperimentConfig) -> Result<DiskDomain, RunError> {
    match &cfg.domain {
        None => Ok(DiskDomain::unit()),
        Some(DomainSpec::Disk { center, radius }) => {
            DiskDomain::new(Vec2::new(center[0], center[1]), *radius).map_err(|e| RunError::Validation(format!("domain: {e}")))
        }
        Some(_) => Err(RunError::Validation("domain.type: this command needs a disk".into())),
    }
}

fn build_target(cfg: &ExperimentConfig, domain: &Domain, density: &SourceDensity) -> Result<DiscreteTarget, RunError> {
    let mass = total_mass(domain, density, 1e-12).map_err(|e| RunError::Validation(format!("density: {e}")))?.mass;
    let target = match &cfg.target {
        Some(TargetSpec::File { path }) => {
            let text = std::fs::read_to_string(path).map_err(|e| RunError::Validation(format!("target.path: {e}")))?;
            DiscreteTarget::from_csv(&text).map_err(|e| RunError::Validation(format!("target.path: {e}")))?.rescaled_to(mass)
        }
        Some(_) => {
            let region: TargetRegion = cfg.build_region()?.expect("region target");
            discretize_with(&region, cfg.n, mass, cfg.seed, &discretize_options(cfg))
                .map_err(|e| RunError::Validation(format!("target: {e}")))?
        }
        None => return Err(RunError::Validation("target: required".into())),
    };
    check_sites(&target.sites).map_err(|e: LaguerreError| RunError::Validation(format!("target: {e}")))?;
    Ok(target)
}

fn mesh_verdicts(out: &mut Output, mesh: &Mesh) {
    out.verdict("mesh_watertight", mesh.is_watertight());
    out.verdict("mesh_euler_characteristic", mesh.euler_characteristic() == 1);
    let normals_ok = (0..mesh.face_count()).all(|k| {
        let n = mesh.cross_product_normal(k);
        let g = mesh.face_normals[k];
        (0..3).all(|i| (n[i] + g[i]).abs() <= 1e-6)
    });
    out.verdict("mesh_normals_match_gauss_map", normals_ok);
    out.result("mesh", &json!({ "faces": mesh.face_count(), "vertices": mesh.vertices.len() }));
}

fn run_solve(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let domain = required_domain(cfg)?;
    let density = cfg.build_density()?;
    let target = out.timed("discretize_seconds", || build_target(cfg, &domain, &density))?;
    let sol = out.timed("solve_seconds", || solve_with_diagram(&domain, &density, &target, &solve_options(cfg)))?;
    out.converged = sol.report.converged;
    let masses = sol.diagram.masses();
    out.file("solution.csv", solution_csv(&target.sites, &target.masses, &sol.psi, &masses));
    out.file("cells.csv", diagram_csv(&sol.diagram));
    let mesh = export_mesh(&sol.diagram, &target.sites, &sol.psi);
    out.file("mesh.obj", mesh.to_obj());
    let area_err = (sol.diagram.total_area() - domain.area()).abs() / domain.area();
    let image = gauss_map_image_check(&sol.diagram, &target);
    out.verdict("converged", sol.report.converged);
    out.verdict("residual_within_tol", sol.report.final_residual <= cfg.tol);
    out.verdict("cells_partition_domain", area_err <= 1e-9);
    out.verdict("gauss_map_image", image.passed);
    mesh_verdicts(out, &mesh);
    out.result("solve", &sol.report);
    out.result("target", &json!({
        "sites": target.len(),
        "total": target.total,
        "region_mass": target.region_mass,
        "rescale_factor": target.rescale_factor,
        "sphere_spacing": target.sphere_spacing,
        "warnings": target.warnings,
    }));
    out.result("area_rel_error", &area_err);
    out.result("gauss_map_image", &image);
    Ok(())
}

fn run_sphere(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let r = cfg.sphere.as_ref().map_or(0.6, |s| s.radius);
    let bench = out.timed("solve_seconds", || sphere_benchmark(r, cfg.n, cfg.seed, &solve_options(cfg)))?;
    let rep = &bench.report;
    out.converged = rep.solve.converged;
    let sol = &bench.solution;
    out.file("solution.csv", solution_csv(&bench.target.sites, &bench.target.masses, &sol.psi, &sol.diagram.masses()));
    let mesh = export_mesh(&sol.diagram, &bench.target.sites, &sol.psi);
    out.file("mesh.obj", mesh.to_obj());
    let mut samples = String::from("cell,x1,x2,p1,p2,exact1,exact2,error\n");
    for cell in sol.diagram.cells.iter().filter(|c| !c.is_empty()) {
        let x = cell.moment / cell.mass;
        let p = bench.target.sites[cell.site_index];
        let e = x / (1.0 - x.norm_squared()).sqrt();
        let _ = writeln!(samples, "{},{},{},{},{},{},{},{}", cell.site_index, x.x, x.y, p.x, p.y, e.x, e.y, (p - e).norm());
    }
    out.file("samples.csv", samples);
    out.verdict("converged", rep.solve.converged);
    out.verdict("residual_within_tol", rep.solve.final_residual <= cfg.tol);
    out.verdict("iterations_within_limit", rep.solve.iterations <= cfg.max_iter);
    out.verdict("gradient_error", rep.gradient_sup_error <= crate::experiments::SPHERE_ERROR_TOL);
    out.verdict("height_error", rep.height_sup_error <= crate::experiments::SPHERE_ERROR_TOL);
    out.verdict("gauss_map_cap", rep.cap_violations == 0);
    out.verdict("gauss_map_image", rep.image.passed);
    mesh_verdicts(out, &mesh);
    out.result("sphere_benchmark", rep);
    Ok(())
}

fn run_blowup(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let disk = disk_or_unit(cfg)?;
    let density = cfg.build_density()?;
    let s = cfg.blowup.clone().unwrap_or_default();
    let params = BlowupParams {
        samples: s.samples,
        delta: s.delta,
        c0: s.c0,
        sites: cfg.n,
        truncation_mass: s.truncation_mass,
        analytic_samples: s.analytic_samples,
        analytic_range: (s.analytic_range[0], s.analytic_range[1]),
        analytic_tol: s.analytic_tol,
        rays: s.rays,
        seed: cfg.seed,
    };
    let rep = out.timed("solve_seconds", || blowup_experiment(&disk, &density, &params, &solve_options(cfg)))?;
    out.converged = rep.solve.converged;
    out.file("samples.csv", rep.samples_csv());
    out.verdict("no_violations", rep.violations.is_empty());
    out.verdict("capped_fraction_below_5_percent", rep.capped_fraction < 0.05);
    out.verdict("analytic_gradient", rep.analytic_max_rel_error <= params.analytic_tol);
    out.verdict("monotone_along_rays", rep.rays_monotone);
    let mut summary = serde_json::to_value(&rep).expect("report serializes");
    if let Value::Object(m) = &mut summary {
        // raw samples live in samples.csv
        m.remove("samples");
        m.remove("analytic");
    }
    out.results.insert("blowup".into(), summary);
    Ok(())
}

fn run_oracle(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let domain = required_domain(cfg)?;
    let density = cfg.build_density()?;
    let section = cfg.oracle.clone().unwrap_or_default();
    let target = build_target(cfg, &domain, &density)?;
    let (rep, plan) =
        out.timed("solve_seconds", || semidiscrete_agreement(&domain, &density, &target, section.grid_m, &solve_options(cfg)))?;
    out.converged = rep.semidiscrete_converged;
    out.file("plan.csv", plan.to_csv());
    out.file("target.csv", target.to_csv());
    out.verdict("agreement", rep.fraction >= section.min_agreement);
    out.verdict("lp_certified", rep.certified);
    out.result("oracle", &rep);
    Ok(())
}

fn run_lemmas(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let disk = disk_or_unit(cfg)?;
    let s = cfg.lemmas.clone().unwrap_or_default();
    let params = LemmaParams {
        trials: s.trials,
        points: s.points,
        thetas: s.thetas.clone(),
        estar_samples: s.estar_samples,
        slice_points: s.slice_points,
        t_values: s.t_values,
        seed: cfg.seed,
    };
    let suite = out.timed("lemmas_seconds", || lemma_suite(&disk, &params))?;
    let chart = out.timed("chart_seconds", || {
        chart_identities(&ChartParams {
            monte_carlo_samples: s.monte_carlo_samples,
            triples: s.triples,
            seed: cfg.seed,
            ..Default::default()
        })
    })?;
    out.converged = true;
    let mut samples = String::from("kind,param,value,bound,passed\n");
    for sl in &suite.slices {
        for p in &sl.samples {
            let _ = writeln!(samples, "slice_d0_{},{},{},{},{}", sl.d0, p.t, p.closed_form, p.bound, p.holds);
        }
    }
    for e in &suite.estar {
        let _ = writeln!(samples, "estar,{},{},{},{}", e.theta, e.measured, e.bound, e.passed);
    }
    out.file("samples.csv", samples);
    out.verdict("cone_inclusion", suite.cone.passed);
    out.verdict("cone_negative_control_detects", suite.cone_control.max_excess > 0.0);
    out.verdict("slice_estimate", suite.slices.iter().all(|s| s.passed));
    for e in &suite.estar {
        out.verdict(&format!("estar_volume_theta_{}", e.theta), e.passed);
    }
    out.verdict("hemisphere_mass", chart.hemisphere_mass_error <= 1e-6);
    out.verdict("pushforward_rectangle", chart.rectangle_rel_error <= 1e-3);
    out.verdict("metric_determinant", chart.metric_max_rel_error <= 1e-12);
    out.verdict("great_circle_deviation", chart.great_circle_max_deviation <= 1e-12);
    out.result("lemmas", &suite);
    out.result("chart", &chart);
    Ok(())
}

fn run_export(cfg: &ExperimentConfig, out: &mut Output) -> Result<(), RunError> {
    let Some(path) = &cfg.solution_file else {
        // no saved solution: solve first
        return run_solve(cfg, out);
    };
    let domain = required_domain(cfg)?;
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Validation(format!("solution_file: {e}")))?;
    let (sites, _, psi) = parse_solution_csv(&text).map_err(|line| RunError::Validation(format!("solution_file: bad line {line}")))?;
    let diagram = laguerre_diagram(&domain, &sites, &psi).map_err(|e| RunError::Validation(format!("solution_file: {e}")))?;
    out.converged = true;
    let mesh = export_mesh(&diagram, &sites, &psi);
    out.file("mesh.obj", mesh.to_obj());
    out.file("cells.csv", diagram_csv(&diagram));
    mesh_verdicts(out, &mesh);
    Ok(())
}

/// Reads `report.json` from a run directory.
pub fn read_report(dir: &Path) -> Option<Value> {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).ok()?).ok()
}
