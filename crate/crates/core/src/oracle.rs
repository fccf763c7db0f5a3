//! Exact discrete transport by the transportation simplex, with
//! certificates used to cross-check the semi-discrete solver.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::density::{DensityError, SourceDensity};
use crate::domain::Domain;
use crate::geometry::{ConvexPolygon, Vec2};
use crate::laguerre::{potential, DualWeights};
use crate::quadrature::QuadratureOptions;
use crate::solver::{solve_with_diagram, SolveError, SolveOptions};
use crate::sphere::c_exp2;
use crate::target::DiscreteTarget;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("marginals differ: sources {sources}, targets {targets}")]
    Infeasible { sources: f64, targets: f64 },
    #[error("negative or non-finite mass at {0}")]
    BadMass(String),
    #[error("empty instance")]
    Empty,
    #[error("instance {0} x {1} exceeds the 1000 x 1000 cap")]
    TooLarge(usize, usize),
    #[error("grid {0}² exceeds 1000 atoms")]
    GridTooLarge(usize),
    #[error("simplex made no progress after {0} pivots")]
    PivotLimit(usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

/// Optimal plan with the dual pair `u_j + v_i <= C_ji`, tight on the basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscretePlan {
    /// `(source, target, mass)` for every positive entry, row-major.
    pub entries: Vec<(usize, usize, f64)>,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    pub cost: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Smallest reduced cost `C_ji - u_j - v_i` over all pairs.
    pub min_reduced_cost: f64,
    pub pivots: usize,
}

impl DiscretePlan {
    pub fn is_certified(&self) -> bool {
        self.min_reduced_cost >= -1e-10
    }

    /// Target weights `ψ_i = -v_i` in the gauge `ψ_0 = 0`.
    pub fn psi(&self) -> DualWeights {
        DualWeights::gauged(self.v.iter().map(|v| -v).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("source,target,mass\n");
        for &(j, i, m) in &self.entries {
            let _ = writeln!(s, "{j},{i},{m}");
        }
        s
    }
}

/// `C_ji = -⟨x_j, p_i⟩`.
pub fn surplus_cost(xs: &[Vec2], ps: &[Vec2]) -> Vec<Vec<f64>> {
    xs.iter().map(|x| ps.iter().map(|p| -x.dot(p)).collect()).collect()
}

fn check_masses(mu: &[f64], nu: &[f64]) -> Result<(), OracleError> {
    if mu.is_empty() || nu.is_empty() {
        return Err(OracleError::Empty);
    }
    if mu.len() > 1000 || nu.len() > 1000 {
        return Err(OracleError::TooLarge(mu.len(), nu.len()));
    }
    for (name, v) in [("source", mu), ("target", nu)] {
        if let Some(k) = v.iter().position(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(OracleError::BadMass(format!("{name} {k}")));
        }
    }
    let (a, b): (f64, f64) = (mu.iter().sum(), nu.iter().sum());
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
        return Err(OracleError::Infeasible { sources: a, targets: b });
    }
    Ok(())
}

/// Exact transport between `(x_j, μ_j)` and `(p_i, ν_i)` for the cost `-⟨x, p⟩`.
pub fn lp_transport(sources: &[(Vec2, f64)], targets: &[(Vec2, f64)]) -> Result<DiscretePlan, OracleError> {
    let xs: Vec<Vec2> = sources.iter().map(|s| s.0).collect();
    let ps: Vec<Vec2> = targets.iter().map(|t| t.0).collect();
    let mu: Vec<f64> = sources.iter().map(|s| s.1).collect();
    let nu: Vec<f64> = targets.iter().map(|t| t.1).collect();
    transport_simplex(&surplus_cost(&xs, &ps), &mu, &nu)
}

/// Transportation simplex on a general cost matrix `cost[j][i]`.
///
/// Starts from the northwest-corner basis, prices with MODI potentials,
/// enters the most negative reduced cost and switches to Bland's rule
/// (lowest index enters and leaves) during runs of degenerate pivots.
pub fn transport_simplex(cost: &[Vec<f64>], mu: &[f64], nu: &[f64]) -> Result<DiscretePlan, OracleError> {
    check_masses(mu, nu)?;
    let (m, n) = (mu.len(), nu.len());
    // nu is rescaled by at most a rounding error so both sides agree exactly
    let scale = mu.iter().sum::<f64>() / nu.iter().sum::<f64>();
    let mut supply = mu.to_vec();
    let mut demand: Vec<f64> = nu.iter().map(|v| v * scale).collect();
    let cmax = cost.iter().flatten().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
    let eps = 1e-13 * cmax;

    // basis: flow on (row, col); exactly m + n - 1 cells forming a tree
    let mut flow = vec![vec![0.0; n]; m];
    let mut basic = vec![vec![false; n]; m];
    let (mut r, mut c) = (0, 0);
    while r < m && c < n {
        let q = supply[r].min(demand[c]);
        flow[r][c] = q;
        basic[r][c] = true;
        supply[r] -= q;
        demand[c] -= q;
        if r == m - 1 {
            c += 1;
        } else if c == n - 1 || supply[r] <= demand[c] {
            r += 1;
        } else {
            c += 1;
        }
    }

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut pivots = 0;
    let mut degenerate_run = 0;
    let limit = 50 * (m + n) * (m + n) + 1000;
    loop {
        potentials(cost, &basic, &mut u, &mut v);
        let bland = degenerate_run > 0;
        let mut enter: Option<(usize, usize, f64)> = None;
        'search: for (r, row) in cost.iter().enumerate() {
            for (c, &cij) in row.iter().enumerate() {
                if basic[r][c] {
                    continue;
                }
                let red = cij - u[r] - v[c];
                if red < -eps {
                    if bland {
                        enter = Some((r, c, red));
                        break 'search;
                    }
                    if enter.is_none_or(|e| red < e.2) {
                        enter = Some((r, c, red));
                    }
                }
            }
        }
        let Some((er, ec, _)) = enter else { break };
        pivots += 1;
        if pivots > limit {
            return Err(OracleError::PivotLimit(pivots));
        }
        let cycle = tree_path(&basic, m, n, er, ec);
        // cycle alternates: entering (+), then (-), (+), ...
        let mut theta = f64::INFINITY;
        let mut leave = (usize::MAX, usize::MAX);
        for (k, &(r, c)) in cycle.iter().enumerate() {
            if k % 2 == 1 {
                let f = flow[r][c];
                if f < theta || (f == theta && (r, c) < leave) {
                    theta = f;
                    leave = (r, c);
                }
            }
        }
        for (k, &(r, c)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                flow[r][c] += theta;
            } else {
                flow[r][c] -= theta;
            }
        }
        flow[leave.0][leave.1] = 0.0;
        basic[er][ec] = true;
        basic[leave.0][leave.1] = false;
        if theta == 0.0 {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
    potentials(cost, &basic, &mut u, &mut v);
    let mut min_red = f64::INFINITY;
    let mut entries = Vec::new();
    let mut total = 0.0;
    let mut row_sums = vec![0.0; m];
    let mut col_sums = vec![0.0; n];
    for r in 0..m {
        for c in 0..n {
            min_red = min_red.min(cost[r][c] - u[r] - v[c]);
            let f = flow[r][c].max(0.0);
            if f > 0.0 {
                entries.push((r, c, f));
                total += f * cost[r][c];
                row_sums[r] += f;
                col_sums[c] += f;
            }
        }
    }
    Ok(DiscretePlan { entries, row_sums, col_sums, cost: total, u, v, min_reduced_cost: min_red, pivots })
}

/// MODI potentials on the basis tree with `u_0 = 0`.
fn potentials(cost: &[Vec<f64>], basic: &[Vec<bool>], u: &mut [f64], v: &mut [f64]) {
    let (m, n) = (u.len(), v.len());
    let mut seen_r = vec![false; m];
    let mut seen_c = vec![false; n];
    let mut queue = VecDeque::new();
    // a disconnected basis cannot happen, but start every component anyway
    for start in 0..m {
        if seen_r[start] {
            continue;
        }
        seen_r[start] = true;
        u[start] = 0.0;
        queue.push_back((true, start));
        while let Some((is_row, k)) = queue.pop_front() {
            if is_row {
                for c in 0..n {
                    if basic[k][c] && !seen_c[c] {
                        seen_c[c] = true;
                        v[c] = cost[k][c] - u[k];
                        queue.push_back((false, c));
                    }
                }
            } else {
                for r in 0..m {
                    if basic[r][k] && !seen_r[r] {
                        seen_r[r] = true;
                        u[r] = cost[r][k] - v[k];
                        queue.push_back((true, r));
                    }
                }
            }
        }
    }
}

/// Cycle created by adding `(er, ec)` to the basis tree, starting with the
/// entering cell and alternating between row and column moves.
fn tree_path(basic: &[Vec<bool>], m: usize, n: usize, er: usize, ec: usize) -> Vec<(usize, usize)> {
    // BFS from column ec to row er through basic cells; nodes: rows 0..m, cols m..m+n
    let total = m + n;
    let mut prev = vec![usize::MAX; total];
    let start = m + ec;
    let goal = er;
    prev[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        if node >= m {
            let c = node - m;
            for r in 0..m {
                if basic[r][c] && prev[r] == usize::MAX {
                    prev[r] = node;
                    queue.push_back(r);
                }
            }
        } else {
            for c in 0..n {
                if basic[node][c] && prev[m + c] == usize::MAX {
                    prev[m + c] = node;
                    queue.push_back(m + c);
                }
            }
        }
    }
    let mut nodes = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = prev[cur];
        nodes.push(cur);
    }
    // nodes: er, ..., col ec; cells between consecutive nodes
    let mut cycle = vec![(er, ec)];
    for w in nodes.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        let cell = if a < m { (a, b - m) } else { (b, a - m) };
        cycle.push(cell);
    }
    cycle
}

/// `min ⟨x - x', p - p'⟩` over pairs of supported entries; `+∞` if fewer than two.
pub fn monotonicity_certificate(plan: &DiscretePlan, xs: &[Vec2], ps: &[Vec2]) -> f64 {
    let support: Vec<(usize, usize)> = plan.entries.iter().filter(|e| e.2 > 1e-14).map(|e| (e.0, e.1)).collect();
    let mut best = f64::INFINITY;
    for (a, &(j, i)) in support.iter().enumerate() {
        for &(k, l) in &support[a + 1..] {
            best = best.min((xs[j] - xs[k]).dot(&(ps[i] - ps[l])));
        }
    }
    best
}

/// Samples `z̄ = (z, u(z) + s)` and checks `⟨z̄ - (x, u(x)), c_exp(p)⟩ <= 1e-10`
/// with `p = ∇u(x)`.
pub fn normal_cone_check(domain: &Domain, sites: &[Vec2], psi: &DualWeights, x: &Vec2, num_samples: usize, seed: u64) -> bool {
    let (ux, p, _) = potential(sites, psi, x);
    let n = c_exp2(&p);
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    while done < num_samples {
        let z = Vec2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if !domain.contains(&z) {
            continue;
        }
        let s: f64 = if done % 2 == 0 { 0.0 } else { rng.gen_range(0.0..10.0) };
        let (uz, _, _) = potential(sites, psi, &z);
        let dot = (z.x - x.x) * n[0] + (z.y - x.y) * n[1] + (uz + s - ux) * n[2];
        if dot > 1e-10 {
            return false;
        }
        done += 1;
    }
    true
}

/// One source atom per grid square meeting `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAtom {
    /// Centroid of `K` over the clipped square.
    pub position: Vec2,
    pub mass: f64,
    pub square: (Vec2, Vec2),
}

/// Atoms at the centroids of the `m × m` grid squares clipped to `Ω`,
/// carrying `∫ K` over the clipped square.
pub fn grid_atoms(domain: &Domain, density: &SourceDensity, m: usize, quad: &QuadratureOptions) -> Result<Vec<GridAtom>, OracleError> {
    let (lo, hi) = domain.bounding_box();
    let h = (hi - lo) / m as f64;
    let mut atoms = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let a = lo + Vec2::new(h.x * i as f64, h.y * j as f64);
            let shape = domain.intersect(&ConvexPolygon::rectangle(a, a + h));
            if shape.is_empty() || shape.area() <= 1e-12 * h.x * h.y {
                continue;
            }
            let (mass, moment) = density.integrate_with_moment(domain, &shape, quad)?;
            if mass > 0.0 {
                atoms.push(GridAtom { position: moment / mass, mass, square: (a, a + h) });
            }
        }
    }
    Ok(atoms)
}

/// Whether `x` lies in the closed Laguerre cell `i`: its affine piece attains
/// the maximum up to rounding. Atoms on a shared edge belong to both cells.
pub fn in_closed_cell(sites: &[Vec2], psi: &DualWeights, x: &Vec2, i: usize) -> bool {
    let (u, _, _) = potential(sites, psi, x);
    let scale = 1.0 + u.abs() + x.norm() * sites[i].norm();
    x.dot(&sites[i]) - psi.psi[i] >= u - 1e-12 * scale
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementReport {
    /// LP mass sent to a closed Laguerre cell containing the atom, over the total.
    pub fraction: f64,
    pub atoms: usize,
    pub targets: usize,
    pub certificate: f64,
    pub certified: bool,
    pub lp_cost: f64,
    pub semidiscrete_converged: bool,
}

/// Mass fraction of grid atoms whose LP destination is a Laguerre cell
/// containing the atom in the semi-discrete solution.
pub fn semidiscrete_agreement(
    domain: &Domain,
    density: &SourceDensity,
    target: &DiscreteTarget,
    grid_m: usize,
    opts: &SolveOptions,
) -> Result<(AgreementReport, DiscretePlan), OracleError> {
    if grid_m * grid_m > 1000 {
        return Err(OracleError::GridTooLarge(grid_m));
    }
    let sol = solve_with_diagram(domain, density, target, opts)?;
    let quad = QuadratureOptions::with_tol(1e-12);
    let atoms = grid_atoms(domain, density, grid_m, &quad)?;
    let total: f64 = target.masses.iter().sum();
    let scale = total / atoms.iter().map(|a| a.mass).sum::<f64>();
    let sources: Vec<(Vec2, f64)> = atoms.iter().map(|a| (a.position, a.mass * scale)).collect();
    let targets: Vec<(Vec2, f64)> = target.sites.iter().copied().zip(target.masses.iter().copied()).collect();
    let plan = lp_transport(&sources, &targets)?;
    let mut agree = 0.0;
    for &(j, i, mass) in &plan.entries {
        if in_closed_cell(&target.sites, &sol.psi, &atoms[j].position, i) {
            agree += mass;
        }
    }
    let xs: Vec<Vec2> = atoms.iter().map(|a| a.position).collect();
    let certificate = monotonicity_certificate(&plan, &xs, &target.sites);
    let report = AgreementReport {
        fraction: agree / total,
        atoms: atoms.len(),
        targets: target.len(),
        certificate,
        certified: plan.is_certified() && certificate >= -1e-10,
        lp_cost: plan.cost,
        semidiscrete_converged: sol.report.converged,
    };
    Ok((report, plan))
}
