//! Numerical experiments on the hemisphere benchmark, the gradient blowup
//! near the boundary in the critical case, and the geometric lemmas behind it.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::density::{total_mass, DensityError, MassRegime, SourceDensity};
use crate::domain::{lambda_constant, unit_ball_volume, ConeSpec, DiskDomain, Domain, DomainError};
use crate::export::export_mesh;
use crate::geometry::{CellShape, ConvexPolygon, Vec2};
use crate::laguerre::{potential, LaguerreDiagram};
use crate::quadrature::{integrate_segment, integrate_shape, QuadratureError, QuadratureOptions};
use crate::solver::{solve_with_diagram, Solution, SolveError, SolveOptions, SolveReport};
use crate::sphere::{c_exp2, chart_density_sq, great_circle_deviation, metric_in_chart, ChartVector, Dimension};
use crate::target::{discretize, region_mass, truncation_radius_for, DiscreteTarget, TargetError, TargetRegion};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("critical mass condition violated: ∫K = {mass}, expected ω₂ = {omega}")]
    NotCritical { mass: f64, omega: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Number of independent random streams used by the Monte Carlo loops.
const STREAMS: u64 = 64;

/// Splits `samples` over fixed seeded streams, evaluates them in parallel and
/// reduces in stream order, so results do not depend on the thread count.
fn monte_carlo<T, F>(seed: u64, samples: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    (0..STREAMS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let lo = samples * k as usize / STREAMS as usize;
            let hi = samples * (k as usize + 1) / STREAMS as usize;
            f(&mut rng, hi - lo)
        })
        .collect()
}

fn geodesic(a: &Vec2, b: &Vec2) -> f64 {
    let (ya, yb) = (c_exp2(a), c_exp2(b));
    let dot: f64 = (0..3).map(|k| ya[k] * yb[k]).sum();
    let cross = [
        ya[1] * yb[2] - ya[2] * yb[1],
        ya[2] * yb[0] - ya[0] * yb[2],
        ya[0] * yb[1] - ya[1] * yb[0],
    ];
    (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt().atan2(dot)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussMapImage {
    /// From images of nonempty cells to all target sites (geodesic angle).
    pub nonempty_to_target: f64,
    /// From all target sites to images of nonempty cells.
    pub target_to_nonempty: f64,
    /// Cells with `ν_i > 0` that are empty.
    pub empty_required: usize,
    pub spacing: f64,
    pub passed: bool,
}

/// Compares `{c_exp(p_i) : cell i nonempty}` with the whole discretized target.
pub fn gauss_map_image_check(diagram: &LaguerreDiagram, target: &DiscreteTarget) -> GaussMapImage {
    let nonempty: Vec<usize> = (0..target.len()).filter(|&i| !diagram.cells[i].is_empty()).collect();
    let empty_required = (0..target.len()).filter(|&i| diagram.cells[i].is_empty() && target.masses[i] > 0.0).count();
    let one_sided = |from: &[usize], to: &[usize]| -> f64 {
        from.iter()
            .map(|&i| to.iter().map(|&j| geodesic(&target.sites[i], &target.sites[j])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let all: Vec<usize> = (0..target.len()).collect();
    let a = one_sided(&nonempty, &all);
    // only empty sites can be away from the nonempty set
    let empty: Vec<usize> = (0..target.len()).filter(|&i| diagram.cells[i].is_empty()).collect();
    let b = if nonempty.is_empty() { f64::INFINITY } else { one_sided(&empty, &nonempty) };
    let spacing = target.sphere_spacing;
    GaussMapImage {
        nonempty_to_target: a,
        target_to_nonempty: b,
        empty_required,
        spacing,
        passed: empty_required == 0 && a <= 2.0 * spacing && b <= 2.0 * spacing,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SphereBenchmarkReport {
    pub radius: f64,
    pub requested_sites: usize,
    pub sites: usize,
    pub chart_radius: f64,
    pub source_mass: f64,
    pub region_mass: f64,
    pub solve: SolveReport,
    /// `sup |∇u - x / sqrt(1 - |x|²)|` over cell vertices and a grid.
    pub gradient_sup_error: f64,
    /// `sup |u - (-sqrt(1 - |x|²) + c)|` over mesh vertices, `c` matched at the centroid.
    pub height_sup_error: f64,
    pub gradient_points: usize,
    /// Sites whose image lies above the cap `y₃ <= -sqrt(1 - r²)` by more than the spacing.
    pub cap_violations: usize,
    pub image: GaussMapImage,
    pub passed: bool,
}

pub struct SphereBenchmark {
    pub report: SphereBenchmarkReport,
    pub domain: Domain,
    pub target: DiscreteTarget,
    pub solution: Solution,
}

pub const SPHERE_ERROR_TOL: f64 = 5e-2;

fn exact_gradient(x: &Vec2) -> Vec2 {
    x / (1.0 - x.norm_squared()).sqrt()
}

/// Solves on the disk of radius `r` with `K ≡ 1` towards the chart disk of
/// radius `r / sqrt(1 - r²)`; the exact potential is `-sqrt(1 - |x|²)`.
pub fn sphere_benchmark(r: f64, n: usize, seed: u64, opts: &SolveOptions) -> Result<SphereBenchmark, ExperimentError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ExperimentError::Parameter(format!("radius must lie in (0, 1), got {r}")));
    }
    let domain: Domain = DiskDomain::new(Vec2::zeros(), r)?.into();
    let density = SourceDensity::constant(1.0);
    let s = r / (1.0 - r * r).sqrt();
    let region = TargetRegion::chart_disk(Vec2::zeros(), s)?;
    let region_mass = region_mass(&region)?;
    let source_mass = domain.area();
    let target = discretize(&region, n, source_mass, seed)?;
    let solution = solve_with_diagram(&domain, &density, &target, opts)?;
    let (psi, diagram) = (&solution.psi, &solution.diagram);

    let mut worst: f64 = 0.0;
    let mut points = 0;
    for cell in diagram.cells.iter().filter(|c| !c.is_empty()) {
        let p = target.sites[cell.site_index];
        let inner = cell.shape.interior_point();
        for v in cell.shape.polyline(PI / 90.0) {
            let x = v + (inner - v) * 1e-9;
            worst = worst.max((p - exact_gradient(&x)).norm());
            points += 1;
        }
    }
    let m = 200;
    for j in 0..m {
        for i in 0..m {
            let x = Vec2::new(-r + 2.0 * r * (i as f64 + 0.5) / m as f64, -r + 2.0 * r * (j as f64 + 0.5) / m as f64);
            if x.norm() < r {
                let (_, g, _) = potential(&target.sites, psi, &x);
                worst = worst.max((g - exact_gradient(&x)).norm());
                points += 1;
            }
        }
    }

    let mesh = export_mesh(diagram, &target.sites, psi);
    let (u0, _, _) = potential(&target.sites, psi, &Vec2::zeros());
    let c = u0 + 1.0;
    let height = mesh
        .vertices
        .iter()
        .map(|v| (v[2] - (c - (1.0 - v[0] * v[0] - v[1] * v[1]).max(0.0).sqrt())).abs())
        .fold(0.0, f64::max);

    let cap = -(1.0 - r * r).sqrt();
    let cap_violations = target
        .sites
        .iter()
        .filter(|p| {
            let y = c_exp2(p);
            // angular excess above the cap boundary
            (-y[2]).acos() - (-cap).acos() > target.sphere_spacing
        })
        .count();
    let image = gauss_map_image_check(diagram, &target);
    let rep = &solution.report;
    let passed = rep.converged
        && rep.final_residual <= opts.tol
        && worst <= SPHERE_ERROR_TOL
        && height <= SPHERE_ERROR_TOL
        && cap_violations == 0
        && image.passed;
    let report = SphereBenchmarkReport {
        radius: r,
        requested_sites: n,
        sites: target.len(),
        chart_radius: s,
        source_mass,
        region_mass,
        solve: rep.clone(),
        gradient_sup_error: worst,
        height_sup_error: height,
        gradient_points: points,
        cap_violations,
        image,
        passed,
    };
    Ok(SphereBenchmark { report, domain, target, solution })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlowupParams {
    pub samples: usize,
    pub delta: f64,
    pub c0: f64,
    pub sites: usize,
    /// Hemisphere mass left outside the truncated chart disk.
    pub truncation_mass: f64,
    pub analytic_samples: usize,
    pub analytic_range: (f64, f64),
    pub analytic_tol: f64,
    pub rays: usize,
    pub seed: u64,
}

impl Default for BlowupParams {
    fn default() -> Self {
        Self {
            samples: 1000,
            delta: 0.5,
            c0: 1.0,
            sites: 4000,
            truncation_mass: PI / 1e4,
            analytic_samples: 200,
            analytic_range: (0.05, 0.3),
            analytic_tol: 0.1,
            rays: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupSample {
    pub x1: f64,
    pub x2: f64,
    pub d: f64,
    pub grad_norm: f64,
    pub bound: f64,
    /// The bound exceeds `P_max - 1`, so the sample is out of reach of the grid.
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalyticSample {
    pub d: f64,
    pub grad_norm: f64,
    pub exact: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupReport {
    pub samples: Vec<BlowupSample>,
    pub delta: f64,
    pub c0: f64,
    pub lipschitz: f64,
    pub r0: f64,
    pub lambda: f64,
    pub exponent: f64,
    pub d_max: f64,
    pub p_max: f64,
    pub sites: usize,
    /// Indices into `samples`.
    pub violations: Vec<usize>,
    pub capped: usize,
    pub capped_fraction: f64,
    pub analytic: Vec<AnalyticSample>,
    pub analytic_max_rel_error: f64,
    pub rays_monotone: bool,
    pub solve: SolveReport,
    pub passed: bool,
}

impl BlowupReport {
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("kind,x1,x2,d,grad_norm,bound,capped\n");
        for p in &self.samples {
            let _ = writeln!(s, "boundary,{},{},{},{},{},{}", p.x1, p.x2, p.d, p.grad_norm, p.bound, p.capped);
        }
        for a in &self.analytic {
            let _ = writeln!(s, "analytic,,,{},{},{},false", a.d, a.grad_norm, a.exact);
        }
        s
    }
}

/// Largest `r₀` with `K <= C₀ d^-δ` for `d < r₀`.
fn decay_radius(density: &SourceDensity, c0: f64, delta: f64) -> Result<f64, ExperimentError> {
    if let Some(b) = density.decay {
        return Ok(b.r0);
    }
    match density.as_constant() {
        Some(k) if k > 0.0 => Ok((c0 / k).powf(1.0 / delta)),
        _ => Err(ExperimentError::Parameter("the density needs a decay bound K <= C0 d^-delta".into())),
    }
}

/// Critical-mass run on a disk: checks `|∇u| >= Λ d^{-(1-δ)/4} - 2` near the
/// boundary and compares with the exact hemisphere gradient further inside.
pub fn blowup_experiment(
    disk: &DiskDomain,
    density: &SourceDensity,
    params: &BlowupParams,
    opts: &SolveOptions,
) -> Result<BlowupReport, ExperimentError> {
    let domain: Domain = (*disk).into();
    let mass = total_mass(&domain, density, 1e-10)?;
    if mass.regime != MassRegime::Critical {
        return Err(ExperimentError::NotCritical { mass: mass.mass, omega: unit_ball_volume(2) });
    }
    if !(params.delta > 0.0 && params.delta < 1.0) || params.c0 <= 0.0 || params.samples == 0 {
        return Err(ExperimentError::Parameter(format!("delta = {}, C0 = {}, samples = {}", params.delta, params.c0, params.samples)));
    }
    let geometry = domain.boundary_geometry();
    let r0 = geometry.enclosing_radius()?;
    let decay_r0 = decay_radius(density, params.c0, params.delta)?;
    let d_max = geometry.d0_threshold(decay_r0)?;
    let lambda = lambda_constant(Dimension::new(2).unwrap(), params.delta, params.c0, geometry.lipschitz, r0)?;
    let exponent = -(1.0 - params.delta) / 4.0;
    let p_max = truncation_radius_for(params.truncation_mass);
    let region = TargetRegion::full_hemisphere(p_max)?;
    let target = discretize(&region, params.sites, mass.mass, params.seed)?;
    let solution = solve_with_diagram(&domain, density, &target, opts)?;
    let psi = &solution.psi;
    let (center, radius) = (disk.center(), disk.radius());
    let at = |a: f64, d: f64| center + Vec2::new(a.cos(), a.sin()) * (radius - d);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut samples = Vec::with_capacity(params.samples);
    let mut violations = Vec::new();
    let mut capped = 0;
    for k in 0..params.samples {
        let a = rng.gen_range(0.0..2.0 * PI);
        let d = d_max * (1.0 - rng.gen::<f64>());
        let x = at(a, d);
        let d = domain.distance_to_boundary(&x);
        let (_, g, _) = potential(&target.sites, psi, &x);
        let bound = lambda * d.powf(exponent) - 2.0;
        let is_capped = bound > p_max - 1.0;
        if is_capped {
            capped += 1;
        } else if g.norm() < bound {
            violations.push(k);
        }
        samples.push(BlowupSample { x1: x.x, x2: x.y, d, grad_norm: g.norm(), bound, capped: is_capped });
    }

    let (lo, hi) = params.analytic_range;
    let mut analytic = Vec::with_capacity(params.analytic_samples);
    for k in 0..params.analytic_samples {
        let a = rng.gen_range(0.0..2.0 * PI);
        let d = lo + (hi - lo) * k as f64 / (params.analytic_samples.max(2) - 1) as f64;
        let x = at(a, d);
        let (_, g, _) = potential(&target.sites, psi, &x);
        // the exact solution on the unit disk, rescaled to the disk radius
        let t = d / radius;
        let exact = (1.0 - t) / (2.0 * t - t * t).sqrt();
        analytic.push(AnalyticSample { d, grad_norm: g.norm(), exact, rel_error: (g.norm() - exact).abs() / exact });
    }
    let analytic_max = analytic.iter().map(|a| a.rel_error).fold(0.0, f64::max);

    // along each ray the gradient norm may only grow as the boundary approaches
    let mut rays_monotone = true;
    for k in 0..params.rays {
        let a = 2.0 * PI * (k as f64 + 0.5) / params.rays as f64;
        let mut prev = 0.0;
        for j in 0..400 {
            let d = hi * (1e-6 / hi).powf(j as f64 / 399.0);
            let (_, g, _) = potential(&target.sites, psi, &at(a, d));
            if g.norm() < prev - 1e-12 {
                rays_monotone = false;
            }
            prev = g.norm();
        }
    }

    let capped_fraction = capped as f64 / params.samples as f64;
    let passed = solution.report.converged
        && violations.is_empty()
        && capped_fraction < 0.05
        && analytic_max <= params.analytic_tol
        && rays_monotone;
    Ok(BlowupReport {
        samples,
        delta: params.delta,
        c0: params.c0,
        lipschitz: geometry.lipschitz,
        r0,
        lambda,
        exponent,
        d_max,
        p_max,
        sites: target.len(),
        violations,
        capped,
        capped_fraction,
        analytic,
        analytic_max_rel_error: analytic_max,
        rays_monotone,
        solve: solution.report,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeInclusionReport {
    pub trials: usize,
    pub points_per_trial: usize,
    pub theta_scale: f64,
    pub d_max: f64,
    /// `max(0, |x - x_∂| - sqrt((1 + 4R₀) d₀))` over all samples.
    pub max_excess: f64,
    /// Largest `|x - x_∂| / sqrt((1 + 4R₀) d₀)` seen.
    pub max_ratio: f64,
    pub passed: bool,
}

/// Samples `E_θ ∩ Ω` around random `x₀` with `d₀ <= d_max` and measures how
/// far it reaches from the boundary point `x_∂`. `theta_scale` multiplies
/// `θ = sqrt(d₀ / 6R₀)`; values above 1 give a negative control.
pub fn cone_inclusion_check(
    disk: &DiskDomain,
    trials: usize,
    points: usize,
    theta_scale: f64,
    seed: u64,
) -> Result<ConeInclusionReport, ExperimentError> {
    let domain: Domain = (*disk).into();
    let geometry = domain.boundary_geometry();
    let r0 = geometry.enclosing_radius()?;
    let d_max = geometry.d0_threshold(f64::INFINITY)?;
    let (c, radius) = (disk.center(), disk.radius());
    let results = monte_carlo(seed, trials, |rng, count| -> Result<(f64, f64), ExperimentError> {
        let (mut excess, mut ratio) = (0.0f64, 0.0f64);
        for _ in 0..count {
            let a = rng.gen_range(0.0..2.0 * PI);
            let d0 = d_max * (1.0 - rng.gen::<f64>());
            let x0 = c + Vec2::new(a.cos(), a.sin()) * (radius - d0);
            let spec = ConeSpec::new(&domain, x0, r0)?;
            let spec = spec.with_theta(spec.theta * theta_scale);
            let xb = spec.boundary_point();
            let w = ((1.0 + 4.0 * r0) * spec.d0).sqrt();
            let half = 0.5 * PI + spec.theta.min(1.0).asin();
            let base = spec.v0.y.atan2(spec.v0.x);
            let mut taken = 0;
            while taken < points {
                // the extreme directions first, then uniform in angle
                let phi = match taken {
                    0 => base + half,
                    1 => base - half,
                    _ => base + rng.gen_range(-half..=half),
                };
                let dir = Vec2::new(phi.cos(), phi.sin());
                // exit distance along the ray from x0
                let q = x0 - c;
                let b = q.dot(&dir);
                let exit = -b + (b * b - q.norm_squared() + radius * radius).max(0.0).sqrt();
                let s = exit * if taken < 2 { 1.0 - 1e-12 } else { rng.gen::<f64>().sqrt() };
                let x = x0 + dir * s;
                taken += 1;
                if !(domain.contains(&x) && spec.in_e_theta(&x)) {
                    continue;
                }
                let dist = (x - xb).norm();
                excess = excess.max(dist - w);
                ratio = ratio.max(dist / w);
            }
        }
        Ok((excess, ratio))
    });
    let (mut max_excess, mut max_ratio) = (0.0f64, 0.0f64);
    for r in results {
        let (e, q) = r?;
        max_excess = max_excess.max(e);
        max_ratio = max_ratio.max(q);
    }
    Ok(ConeInclusionReport {
        trials,
        points_per_trial: points,
        theta_scale,
        d_max,
        max_excess,
        max_ratio,
        passed: max_excess == 0.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceSample {
    pub t: f64,
    pub closed_form: f64,
    pub polyline: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceReport {
    pub d0: f64,
    pub half_width: f64,
    pub bound: f64,
    pub samples: Vec<SliceSample>,
    /// `t` values outside `(0, 2d₀)`.
    pub skipped: Vec<f64>,
    /// `|length(2d₀(1 - 1e-9)) - length(2d₀(1 - 1e-6))|`.
    pub continuity_gap: f64,
    pub passed: bool,
}

impl SliceReport {
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("t,closed_form,polyline,bound,holds\n");
        for p in &self.samples {
            let _ = writeln!(s, "{},{},{},{},{}", p.t, p.closed_form, p.polyline, p.bound, p.holds);
        }
        s
    }
}

/// Length of the circle `|x - c| = R - t` inside the box of half-width `w`
/// centred at `x_∂` in the tangent/normal frame there.
fn slice_closed_form(radius: f64, t: f64, w: f64) -> f64 {
    let rt = radius - t;
    if rt <= 0.0 || t >= w {
        return 0.0;
    }
    let by_width = (w / rt).min(1.0).asin();
    let by_height = ((radius - w) / rt).clamp(-1.0, 1.0).acos();
    2.0 * rt * by_width.min(by_height)
}

fn slice_polyline(disk: &DiskDomain, spec: &ConeSpec, t: f64, w: f64, segments: usize) -> f64 {
    let c = disk.center();
    let rt = disk.radius() - t;
    let xb = spec.boundary_point();
    let normal = -spec.v0;
    let tangent = Vec2::new(-normal.y, normal.x);
    let inside = |x: &Vec2| {
        let r = x - xb;
        r.dot(&tangent).abs() <= w && r.dot(&normal).abs() <= w
    };
    let mut len = 0.0;
    let mut prev = c + Vec2::new(rt, 0.0);
    for k in 1..=segments {
        let a = 2.0 * PI * k as f64 / segments as f64;
        let cur = c + Vec2::new(a.cos(), a.sin()) * rt;
        if inside(&prev) && inside(&cur) {
            len += (cur - prev).norm();
        }
        prev = cur;
    }
    len
}

/// Length of `∂Ω_t ∩ C̃` for a disk against `(1 + 4R₀)^{1/2} ω₁ (1 + L) d₀^{1/2}`.
pub fn slice_estimate_check(disk: &DiskDomain, t_values: &[f64], spec: &ConeSpec) -> Result<SliceReport, ExperimentError> {
    let domain: Domain = (*disk).into();
    let geometry = domain.boundary_geometry();
    let r0 = geometry.enclosing_radius()?;
    let d0 = spec.d0;
    let w = ((1.0 + 4.0 * r0) * d0).sqrt();
    let bound = (1.0 + 4.0 * r0).sqrt() * unit_ball_volume(1) * (1.0 + geometry.lipschitz) * d0.sqrt();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let radius = disk.radius();
    for &t in t_values {
        if !(t > 0.0 && t < 2.0 * d0) {
            skipped.push(t);
            continue;
        }
        let closed_form = slice_closed_form(radius, t, w);
        let polyline = slice_polyline(disk, spec, t, w, 1 << 20);
        samples.push(SliceSample { t, closed_form, polyline, bound, holds: closed_form <= bound && polyline <= bound });
    }
    let continuity_gap =
        (slice_closed_form(radius, 2.0 * d0 * (1.0 - 1e-9), w) - slice_closed_form(radius, 2.0 * d0 * (1.0 - 1e-6), w)).abs();
    // the polyline error is about one chord per crossing
    let chord = 2.0 * PI * radius / (1u64 << 20) as f64;
    let consistent = samples.iter().all(|s| (s.closed_form - s.polyline).abs() <= 4.0 * chord);
    let passed = !samples.is_empty() && samples.iter().all(|s| s.holds) && consistent && continuity_gap <= 1e-5 * w;
    Ok(SliceReport { d0, half_width: w, bound, samples, skipped, continuity_gap, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstarVolume {
    pub theta: f64,
    pub dimension: usize,
    pub samples: usize,
    pub measured: f64,
    pub std_error: f64,
    pub bound: f64,
    /// Exact volume where known (`n = 2`: `2 asin(θ/2)`).
    pub exact: Option<f64>,
    pub passed: bool,
}

/// Monte Carlo volume of `{p : |p/|p| - e₁| <= θ, |p| <= 1}` against
/// `ω_{n-1} θ^{n-1} / (n 2^{n-1})`; passes when `measured - 3σ >= bound`.
pub fn estar_volume_check(theta: f64, n: Dimension, samples: usize, seed: u64) -> Result<EstarVolume, ExperimentError> {
    if !(theta > 0.0 && theta < 1.0 / 6f64.sqrt()) {
        return Err(ExperimentError::Parameter(format!("θ must lie in (0, 1/√6), got {theta}")));
    }
    if samples == 0 {
        return Err(ExperimentError::Parameter("need at least one sample".into()));
    }
    let dim = n.get();
    let hits: u64 = monte_carlo(seed, samples, |rng, count| {
        let mut p = vec![0.0; dim];
        let mut h = 0u64;
        for _ in 0..count {
            for v in p.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let len = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len == 0.0 || len > 1.0 {
                continue;
            }
            let dist2: f64 = p.iter().enumerate().map(|(k, v)| (v / len - if k == 0 { 1.0 } else { 0.0 }).powi(2)).sum();
            if dist2 <= theta * theta {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    let cube = 2f64.powi(dim as i32);
    let f = hits as f64 / samples as f64;
    let measured = cube * f;
    let std_error = cube * (f * (1.0 - f) / samples as f64).sqrt();
    let nf = dim as f64;
    let bound = unit_ball_volume(dim - 1) * theta.powf(nf - 1.0) / (nf * 2f64.powf(nf - 1.0));
    Ok(EstarVolume {
        theta,
        dimension: dim,
        samples,
        measured,
        std_error,
        bound,
        exact: (dim == 2).then(|| 2.0 * (0.5 * theta).asin()),
        passed: measured - 3.0 * std_error >= bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaSuite {
    pub cone: ConeInclusionReport,
    pub cone_control: ConeInclusionReport,
    pub slices: Vec<SliceReport>,
    pub estar: Vec<EstarVolume>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaParams {
    pub trials: usize,
    pub points: usize,
    pub thetas: Vec<f64>,
    pub estar_samples: usize,
    pub slice_points: usize,
    pub t_values: usize,
    pub seed: u64,
}

impl Default for LemmaParams {
    fn default() -> Self {
        Self {
            trials: 100,
            points: 10_000,
            thetas: vec![0.05, 0.1, 0.2, 0.4],
            estar_samples: 1_000_000,
            slice_points: 5,
            t_values: 16,
            seed: 0,
        }
    }
}

/// All three boundary lemmas on one disk. The control run doubles θ and is
/// expected to leave the ball.
pub fn lemma_suite(disk: &DiskDomain, params: &LemmaParams) -> Result<LemmaSuite, ExperimentError> {
    let domain: Domain = (*disk).into();
    let geometry = domain.boundary_geometry();
    let r0 = geometry.enclosing_radius()?;
    let d_max = geometry.d0_threshold(f64::INFINITY)?;
    let cone = cone_inclusion_check(disk, params.trials, params.points, 1.0, params.seed)?;
    let cone_control = cone_inclusion_check(disk, params.trials.min(10), params.points, 2.0, params.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
    let mut slices = Vec::new();
    for k in 0..params.slice_points {
        let a = rng.gen_range(0.0..2.0 * PI);
        let d0 = d_max * (k as f64 + 1.0) / params.slice_points as f64;
        let x0 = disk.center() + Vec2::new(a.cos(), a.sin()) * (disk.radius() - d0);
        let spec = ConeSpec::new(&domain, x0, r0)?;
        let ts: Vec<f64> = (1..=params.t_values).map(|j| 2.0 * spec.d0 * j as f64 / (params.t_values + 1) as f64).collect();
        slices.push(slice_estimate_check(disk, &ts, &spec)?);
    }
    let estar = params
        .thetas
        .iter()
        .enumerate()
        .map(|(k, &t)| estar_volume_check(t, Dimension::new(2).unwrap(), params.estar_samples, params.seed + k as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = cone.passed && slices.iter().all(|s| s.passed) && estar.iter().all(|e| e.passed);
    Ok(LemmaSuite { cone, cone_control, slices, estar, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartIdentities {
    /// `∫_{R²} (1 + |p|²)^{-2} dp`.
    pub hemisphere_mass: f64,
    pub hemisphere_mass_error: f64,
    pub rectangle: [f64; 4],
    /// `∫_Q (1 + |p|²)^{-2} dp` by adaptive quadrature.
    pub rectangle_quadrature: f64,
    /// `∫_{c_exp(Q)} (-y₃) dA` by Monte Carlo.
    pub rectangle_monte_carlo: f64,
    pub rectangle_rel_error: f64,
    pub monte_carlo_samples: usize,
    pub metric_max_rel_error: f64,
    pub great_circle_max_deviation: f64,
    pub triples: usize,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChartParams {
    pub rectangle: [f64; 4],
    pub monte_carlo_samples: usize,
    pub triples: usize,
    pub seed: u64,
}

impl Default for ChartParams {
    fn default() -> Self {
        Self { rectangle: [-4.0, -3.5, 5.0, 4.0], monte_carlo_samples: 1_000_000, triples: 10_000, seed: 0 }
    }
}

/// Identities of the chart `p ↦ (p, -1)/sqrt(1 + |p|²)`: total mass of the
/// chart density, its pushforward on a rectangle, the metric determinant and
/// straightness of chart segments on the sphere.
pub fn chart_identities(params: &ChartParams) -> Result<ChartIdentities, ExperimentError> {
    let n2 = Dimension::new(2).unwrap();
    // r = t / (1 - t) maps [0, 1) onto [0, ∞)
    let radial = |x: &Vec2| {
        let t = x.x;
        let s = 1.0 - t;
        2.0 * PI * t * s / (s * s + t * t).powi(2)
    };
    let hemisphere_mass = integrate_segment(&radial, Vec2::zeros(), Vec2::new(1.0, 0.0), 1e-14)?;

    let [x0, y0, x1, y1] = params.rectangle;
    if !(x0 < x1 && y0 < y1) {
        return Err(ExperimentError::Parameter(format!("degenerate rectangle {:?}", params.rectangle)));
    }
    let q = CellShape::from_polygon(&ConvexPolygon::rectangle(Vec2::new(x0, y0), Vec2::new(x1, y1)));
    let quad = integrate_shape(&|p: &Vec2| chart_density_sq(p.norm_squared(), n2), &q, &QuadratureOptions::with_tol(1e-13))?;
    // uniform points of the unit disk lift to the hemisphere with density -y₃
    let hits: u64 = monte_carlo(params.seed, params.monte_carlo_samples, |rng, count| {
        let mut h = 0u64;
        let mut done = 0;
        while done < count {
            let y = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r2 = y.norm_squared();
            if r2 >= 1.0 {
                continue;
            }
            done += 1;
            let p = y / (1.0 - r2).sqrt();
            if p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1 {
                h += 1;
            }
        }
        h
    })
    .into_iter()
    .sum();
    let mc = PI * hits as f64 / params.monte_carlo_samples as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut metric_err: f64 = 0.0;
    let mut deviation: f64 = 0.0;
    for _ in 0..params.triples {
        let p = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let det = metric_in_chart(&ChartVector::planar(p)).determinant();
        let exact = (1.0 + p.norm_squared()).powi(-3);
        metric_err = metric_err.max((det - exact).abs() / exact);
        let p0 = ChartVector::planar(Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)));
        let p1 = ChartVector::planar(Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)));
        deviation = deviation.max(great_circle_deviation(&p0, &p1, rng.gen()));
    }
    let rel = (mc - quad).abs() / quad;
    let err = (hemisphere_mass - PI).abs();
    Ok(ChartIdentities {
        hemisphere_mass,
        hemisphere_mass_error: err,
        rectangle: params.rectangle,
        rectangle_quadrature: quad,
        rectangle_monte_carlo: mc,
        rectangle_rel_error: rel,
        monte_carlo_samples: params.monte_carlo_samples,
        metric_max_rel_error: metric_err,
        great_circle_max_deviation: deviation,
        triples: params.triples,
        passed: err <= 1e-6 && rel <= 1e-3 && metric_err <= 1e-12 && deviation <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estar_theta_point_one() {
        let e = estar_volume_check(0.1, Dimension::new(2).unwrap(), 200_000, 3).unwrap();
        assert!((e.bound - 0.05).abs() < 1e-15);
        assert!(e.passed, "{e:?}");
        assert!((e.measured - e.exact.unwrap()).abs() < 4.0 * e.std_error + 1e-3);
    }

    #[test]
    fn estar_three_dimensions() {
        let e = estar_volume_check(0.3, Dimension::new(3).unwrap(), 200_000, 1).unwrap();
        assert!(e.passed, "{e:?}");
    }

    #[test]
    fn slice_closed_form_matches_polyline() {
        let disk = DiskDomain::unit();
        let domain: Domain = disk.into();
        let spec = ConeSpec::new(&domain, Vec2::new(0.0, -1.0 + 1e-3), 1.0).unwrap();
        let r = slice_estimate_check(&disk, &[5e-4, 1e-3, 1.9e-3, 3e-3], &spec).unwrap();
        assert_eq!(r.skipped, vec![3e-3]);
        assert!(r.passed, "{r:?}");
        // roughly 2w for small t
        assert!((r.samples[0].closed_form / (2.0 * r.half_width) - 1.0).abs() < 0.05);
    }

    #[test]
    fn cone_control_leaves_the_ball() {
        let disk = DiskDomain::unit();
        let ok = cone_inclusion_check(&disk, 8, 2000, 1.0, 5).unwrap();
        assert_eq!(ok.max_excess, 0.0);
        let bad = cone_inclusion_check(&disk, 8, 2000, 2.0, 5).unwrap();
        assert!(bad.max_excess > 0.0, "{bad:?}");
    }

    #[test]
    fn monte_carlo_independent_of_threads() {
        let run = || monte_carlo(9, 1000, |rng, n| (0..n).map(|_| rng.gen::<f64>()).sum::<f64>());
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn chart_identity_values() {
        let c = chart_identities(&ChartParams { monte_carlo_samples: 200_000, triples: 2000, ..Default::default() }).unwrap();
        assert!(c.hemisphere_mass_error < 1e-10, "{c:?}");
        assert!(c.metric_max_rel_error < 1e-12);
        assert!(c.great_circle_max_deviation < 1e-12);
        assert!(c.rectangle_rel_error < 3e-3);
    }

    #[test]
    fn refuses_subcritical_blowup() {
        let disk = DiskDomain::new(Vec2::zeros(), 0.9).unwrap();
        let e = blowup_experiment(&disk, &SourceDensity::constant(1.0), &BlowupParams::default(), &SolveOptions::default());
        assert!(matches!(e, Err(ExperimentError::NotCritical { .. })));
        assert!(e.unwrap_err().to_string().contains("critical mass"));
    }

    #[test]
    fn small_sphere_benchmark() {
        let b = sphere_benchmark(0.6, 200, 0, &SolveOptions::default()).unwrap();
        assert!(b.report.solve.converged);
        assert!(b.report.gradient_sup_error < 0.2, "{:?}", b.report.gradient_sup_error);
        assert_eq!(b.report.image.empty_required, 0);
        assert!((b.report.source_mass - b.report.region_mass).abs() < 1e-14);
    }
}
