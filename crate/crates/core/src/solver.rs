//! Damped Newton iteration on the dual weights of the semi-discrete problem.

use serde::Serialize;
use thiserror::Error;

use crate::density::{DensityError, SourceDensity};
use crate::domain::Domain;
use crate::geometry::Vec2;
use crate::laguerre::{cell_masses, facet_weights, laguerre_diagram_hinted, DualWeights, LaguerreDiagram, LaguerreError};
use crate::quadrature::QuadratureOptions;
use crate::target::DiscreteTarget;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Laguerre(#[from] LaguerreError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("target mass {target} differs from source mass {source_mass}")]
    MassMismatch { source_mass: f64, target: f64 },
    #[error("target mass at site {0} is not positive")]
    NonPositiveMass(usize),
    #[error("cell {0} carries positive mass but cannot be opened")]
    CannotOpenCell(usize),
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Stop once `‖G - ν‖₁ <= tol · total`.
    pub tol: f64,
    pub max_iter: usize,
    /// Mismatch allowed between source and target totals, relative.
    pub mass_tol: f64,
    /// Per-cell quadrature tolerance; `None` scales it from `tol`.
    pub quad_tol: Option<f64>,
    pub cg_tol: f64,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 50, mass_tol: 1e-12, quad_tol: None, cg_tol: 1e-12, max_halvings: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖G - ν‖₁ / total` after the step.
    pub residual: f64,
    pub step: f64,
    pub halvings: usize,
    pub min_cell_mass: f64,
    pub dual_objective: f64,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub damping_events: usize,
    pub min_cell_mass_history: Vec<f64>,
    pub converged: bool,
    /// Whether the final cell adjacency graph is connected.
    pub connected: bool,
    /// `zero` or `scaled_voronoi`.
    pub initialization: String,
    pub opened_cells: usize,
    pub trace: Vec<IterationRecord>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub psi: DualWeights,
    pub report: SolveReport,
    pub diagram: LaguerreDiagram,
}

struct State {
    psi: Vec<f64>,
    diagram: LaguerreDiagram,
    masses: Vec<f64>,
    residual: f64,
    phi: f64,
    min_mass: f64,
}

struct Problem<'a> {
    domain: &'a Domain,
    density: &'a SourceDensity,
    sites: &'a [Vec2],
    nu: &'a [f64],
    quad: QuadratureOptions,
}

impl Problem<'_> {
    fn eval(&self, psi: Vec<f64>, hints: Option<&[Vec<usize>]>) -> Result<State, SolveError> {
        let mut diagram = laguerre_diagram_hinted(self.domain, self.sites, &DualWeights { psi: psi.clone() }, hints)?;
        let masses = cell_masses(self.domain, &mut diagram, self.density, &self.quad)?;
        let mut residual = 0.0;
        let mut phi = 0.0;
        for (i, c) in diagram.cells.iter().enumerate() {
            residual += (masses[i] - self.nu[i]).abs();
            phi += c.moment.dot(&self.sites[i]) - psi[i] * masses[i] + psi[i] * self.nu[i];
        }
        let min_mass = masses.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(State { psi, diagram, masses, residual, phi, min_mass })
    }
}

/// `ψ_i = λ |q_i|² / 2` makes the diagram the Voronoi diagram of
/// `q_i = c + (p_i - m) / λ`, with the `q_i` scaled into a disk inside Ω.
fn scaled_voronoi(domain: &Domain, sites: &[Vec2]) -> Vec<f64> {
    let shape = domain.shape();
    let c = shape.centroid().unwrap_or_else(|| shape.interior_point());
    let r = 0.9 * domain.distance_to_boundary(&c);
    let m = sites.iter().fold(Vec2::zeros(), |a, p| a + p) / sites.len() as f64;
    let spread = sites.iter().map(|p| (p - m).norm()).fold(0.0, f64::max);
    let lambda = if spread > 0.0 { spread / r } else { 1.0 };
    sites.iter().map(|p| {
        let q = c + (p - m) / lambda;
        0.5 * lambda * q.norm_squared()
    }).collect()
}

fn scaled_point(domain: &Domain, sites: &[Vec2], i: usize) -> Vec2 {
    let shape = domain.shape();
    let c = shape.centroid().unwrap_or_else(|| shape.interior_point());
    let r = 0.9 * domain.distance_to_boundary(&c);
    let m = sites.iter().fold(Vec2::zeros(), |a, p| a + p) / sites.len() as f64;
    let spread = sites.iter().map(|p| (p - m).norm()).fold(0.0, f64::max);
    if spread > 0.0 {
        c + (sites[i] - m) * (r / spread)
    } else {
        c
    }
}

/// Sparse symmetric matrix stored by rows.
struct Sparse {
    rows: Vec<Vec<(usize, f64)>>,
}

impl Sparse {
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(a: &Sparse, b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = b.len();
    let diag: Vec<f64> = a.rows.iter().enumerate().map(|(r, row)| {
        row.iter().find(|e| e.0 == r).map(|e| e.1).filter(|v| *v > 0.0).unwrap_or(1.0)
    }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return (x, 0);
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return (x, it);
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rtol * bnorm {
            return (x, it + 1);
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    (x, max_iter)
}

/// Newton direction from `L d = G - ν` with `d_0 = 0`, where `L` is the
/// facet-weighted graph Laplacian (minus the Jacobian of `G`).
fn newton_direction(problem: &Problem, state: &State, cg_tol: f64) -> Result<(Vec<f64>, usize), SolveError> {
    let n = problem.sites.len();
    let tol = problem.quad.tol.max(1e-14);
    let weights = facet_weights(problem.domain, &state.diagram, problem.sites, problem.density, tol)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n - 1];
    let mut diag = vec![0.0; n];
    for &(i, j, w) in &weights {
        diag[i] += w;
        diag[j] += w;
        if i > 0 && j > 0 {
            rows[i - 1].push((j - 1, -w));
            rows[j - 1].push((i - 1, -w));
        }
    }
    // a tiny shift keeps disconnected or isolated pieces solvable
    let scale = diag.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 1..n {
        rows[i - 1].push((i - 1, diag[i] + 1e-12 * scale));
        rows[i - 1].sort_by_key(|e| e.0);
    }
    let b: Vec<f64> = (1..n).map(|i| state.masses[i] - problem.nu[i]).collect();
    let (x, iters) = pcg(&Sparse { rows }, &b, cg_tol, 20 * n + 100);
    let mut d = vec![0.0; n];
    d[1..].copy_from_slice(&x);
    Ok((d, iters))
}

/// Opens empty cells one at a time by lowering their weight until their
/// affine piece wins at the scaled site point.
fn open_empty_cells(problem: &Problem, mut state: State) -> Result<(State, usize), SolveError> {
    let mut opened = 0;
    for _pass in 0..20 {
        let empty = state.diagram.empty_cells();
        if empty.is_empty() {
            return Ok((state, opened));
        }
        let mut psi = state.psi.clone();
        for &i in &empty {
            let q = scaled_point(problem.domain, problem.sites, i);
            let best_other = problem
                .sites
                .iter()
                .zip(&psi)
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, (p, w))| q.dot(p) - w)
                .fold(f64::NEG_INFINITY, f64::max);
            let margin = 1e-6 * (1.0 + best_other.abs());
            psi[i] = q.dot(&problem.sites[i]) - best_other - margin;
            opened += 1;
        }
        let hints = state.diagram.neighbor_lists();
        state = problem.eval(DualWeights::gauged(psi).psi, Some(&hints))?;
    }
    match state.diagram.empty_cells().first() {
        Some(&i) => Err(SolveError::CannotOpenCell(i)),
        None => Ok((state, opened)),
    }
}

/// Finds weights with `‖G(ψ) - ν‖₁ <= tol · total`.
pub fn solve(
    domain: &Domain,
    density: &SourceDensity,
    target: &DiscreteTarget,
    opts: &SolveOptions,
) -> Result<(DualWeights, SolveReport), SolveError> {
    let s = solve_with_diagram(domain, density, target, opts)?;
    Ok((s.psi, s.report))
}

pub fn solve_with_diagram(
    domain: &Domain,
    density: &SourceDensity,
    target: &DiscreteTarget,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    let n = target.len();
    if let Some(i) = target.masses.iter().position(|m| !(*m > 0.0)) {
        return Err(SolveError::NonPositiveMass(i));
    }
    let total: f64 = target.masses.iter().sum();
    let quad_tol = opts.quad_tol.unwrap_or(1e-3 * opts.tol * total / n as f64);
    let problem = Problem {
        domain,
        density,
        sites: &target.sites,
        nu: &target.masses,
        quad: QuadratureOptions { tol: quad_tol, ..Default::default() },
    };
    let mut state = problem.eval(vec![0.0; n], None)?;
    let source: f64 = state.masses.iter().sum();
    let allowed = opts.mass_tol * total + if density.as_constant().is_some() { 0.0 } else { quad_tol * n as f64 };
    if (source - total).abs() > allowed.max(4.0 * f64::EPSILON * total) {
        return Err(SolveError::MassMismatch { source_mass: source, target: total });
    }
    let mut initialization = "zero".to_string();
    let mut opened = 0;
    if !state.diagram.empty_cells().is_empty() {
        initialization = "scaled_voronoi".to_string();
        state = problem.eval(DualWeights::gauged(scaled_voronoi(domain, &target.sites)).psi, None)?;
        (state, opened) = open_empty_cells(&problem, state)?;
    }
    let nu_min = target.masses.iter().copied().fold(f64::INFINITY, f64::min);
    let eps0 = 0.5 * nu_min.min(state.min_mass);
    let mut report = SolveReport {
        iterations: 0,
        final_residual: state.residual / total,
        damping_events: 0,
        min_cell_mass_history: vec![state.min_mass],
        converged: false,
        connected: true,
        initialization,
        opened_cells: opened,
        trace: Vec::new(),
    };
    loop {
        if state.residual <= opts.tol * total {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter {
            break;
        }
        let (d, cg_iterations) = newton_direction(&problem, &state, opts.cg_tol)?;
        let hints = state.diagram.neighbor_lists();
        let mut t = 1.0;
        let mut halvings = 0;
        let accepted = loop {
            let psi: Vec<f64> = state.psi.iter().zip(&d).map(|(p, d)| p + t * d).collect();
            let trial = problem.eval(psi, Some(&hints))?;
            let phi_ok = trial.phi <= state.phi + 1e-12 * (1.0 + state.phi.abs());
            if trial.min_mass >= eps0 && trial.residual <= (1.0 - 0.5 * t) * state.residual && phi_ok {
                break Some(trial);
            }
            if halvings >= opts.max_halvings {
                break None;
            }
            t *= 0.5;
            halvings += 1;
        };
        report.damping_events += halvings;
        let Some(next) = accepted else { break };
        state = next;
        report.iterations += 1;
        report.min_cell_mass_history.push(state.min_mass);
        report.trace.push(IterationRecord {
            iteration: report.iterations,
            residual: state.residual / total,
            step: t,
            halvings,
            min_cell_mass: state.min_mass,
            dual_objective: state.phi,
            cg_iterations,
        });
    }
    report.final_residual = state.residual / total;
    report.connected = state.diagram.is_connected();
    Ok(Solution { psi: DualWeights { psi: state.psi }, report, diagram: state.diagram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ConvexPolygonDomain, DiskDomain};
    use approx::assert_relative_eq;

    #[test]
    fn single_site_needs_no_iteration() {
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        let t = DiscreteTarget::from_sites(vec![Vec2::new(0.2, 0.1)], vec![1.0]).unwrap();
        let (psi, rep) = solve(&sq, &SourceDensity::constant(1.0), &t, &SolveOptions::default()).unwrap();
        assert_eq!(psi.psi, vec![0.0]);
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn symmetric_pair_keeps_equal_weights() {
        let sq: Domain = ConvexPolygonDomain::rectangle(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5)).unwrap().into();
        let t = DiscreteTarget::from_sites(vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)], vec![0.5, 0.5]).unwrap();
        let (psi, rep) = solve(&sq, &SourceDensity::constant(1.0), &t, &SolveOptions::default()).unwrap();
        assert_eq!(psi.psi, vec![0.0, 0.0]);
        assert!(rep.converged);
    }

    #[test]
    fn unequal_pair_converges() {
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        let t = DiscreteTarget::from_sites(vec![Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)], vec![0.3, 0.7]).unwrap();
        let (psi, rep) = solve(&sq, &SourceDensity::constant(1.0), &t, &SolveOptions { tol: 1e-12, ..Default::default() }).unwrap();
        assert!(rep.converged);
        // bisector 2 x1 = ψ₂ - ψ₁ must sit at x1 = 0.3
        assert_relative_eq!(psi.psi[1], 0.6, max_relative = 1e-10);
    }

    #[test]
    fn mass_mismatch_is_rejected() {
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        let t = DiscreteTarget::from_sites(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)], vec![0.5, 0.6]).unwrap();
        assert!(matches!(solve(&sq, &SourceDensity::constant(1.0), &t, &SolveOptions::default()), Err(SolveError::MassMismatch { .. })));
    }

    #[test]
    fn disk_grid_target_converges_with_decreasing_objective() {
        let disk: Domain = DiskDomain::new(Vec2::zeros(), 0.6).unwrap().into();
        let region = crate::target::TargetRegion::chart_disk(Vec2::zeros(), 0.75).unwrap();
        let t = crate::target::discretize(&region, 60, disk.area(), 0).unwrap();
        let (_, rep) = solve(&disk, &SourceDensity::constant(1.0), &t, &SolveOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        for w in rep.trace.windows(2) {
            assert!(w[1].dual_objective <= w[0].dual_objective + 1e-12);
        }
    }
}
