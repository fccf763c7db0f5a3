//! Laguerre (power) diagrams of affine functions `x ↦ ⟨x, p_i⟩ - ψ_i`
//! restricted to the source domain.

use rayon::prelude::*;
use thiserror::Error;

use crate::density::{DensityError, SourceDensity};
use crate::domain::Domain;
use crate::geometry::{CellShape, ConvexPolygon, EdgeLabel, HalfPlane, Piece, Vec2};
use crate::quadrature::{integrate_segment, QuadratureOptions};
use crate::sphere::{c_exp, ChartVector, HemispherePoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaguerreError {
    #[error("sites {0} and {1} coincide")]
    DuplicateSites(usize, usize),
    #[error("site {0} is not finite")]
    NonFiniteSite(usize),
    #[error("{sites} sites but {weights} weights")]
    LengthMismatch { sites: usize, weights: usize },
    #[error("no sites")]
    NoSites,
}

/// Dual weights with the gauge `ψ_0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWeights {
    pub psi: Vec<f64>,
}

impl DualWeights {
    pub fn zeros(n: usize) -> Self {
        Self { psi: vec![0.0; n] }
    }

    /// Shifts all weights so the first one is zero.
    pub fn gauged(mut psi: Vec<f64>) -> Self {
        if let Some(&p0) = psi.first() {
            for v in &mut psi {
                *v -= p0;
            }
        }
        Self { psi }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LaguerreCell {
    pub site_index: usize,
    /// The cell before restriction to a curved boundary.
    pub polygon: ConvexPolygon,
    pub shape: CellShape,
    pub area: f64,
    pub mass: f64,
    /// `∫_cell x K dx`.
    pub moment: Vec2,
    pub neighbors: Vec<usize>,
}

impl LaguerreCell {
    pub fn is_empty(&self) -> bool {
        self.shape.is_empty() || self.area <= 0.0
    }

    /// Shared edges `(neighbour, a, b)`.
    pub fn facets(&self) -> impl Iterator<Item = (usize, Vec2, Vec2)> + '_ {
        self.shape.pieces.iter().filter_map(|p| match *p {
            Piece::Segment { a, b, label: EdgeLabel::Site(j) } => Some((j, a, b)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct LaguerreDiagram {
    pub cells: Vec<LaguerreCell>,
}

impl LaguerreDiagram {
    pub fn masses(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mass).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn empty_cells(&self) -> Vec<usize> {
        self.cells.iter().filter(|c| c.is_empty()).map(|c| c.site_index).collect()
    }

    /// Whether the nonempty cells form one connected adjacency graph.
    pub fn is_connected(&self) -> bool {
        let open: Vec<usize> = self.cells.iter().filter(|c| !c.is_empty()).map(|c| c.site_index).collect();
        let Some(&start) = open.first() else { return false };
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(i) = stack.pop() {
            count += 1;
            for &j in &self.cells[i].neighbors {
                if !seen[j] && !self.cells[j].is_empty() {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        count == open.len()
    }

    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        self.cells.iter().map(|c| c.neighbors.clone()).collect()
    }
}

pub fn check_sites(sites: &[Vec2]) -> Result<(), LaguerreError> {
    if sites.is_empty() {
        return Err(LaguerreError::NoSites);
    }
    if let Some(i) = sites.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(LaguerreError::NonFiniteSite(i));
    }
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| sites[a].x.total_cmp(&sites[b].x).then(sites[a].y.total_cmp(&sites[b].y)));
    for w in order.windows(2) {
        if (sites[w[0]] - sites[w[1]]).norm() <= 1e-12 {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(LaguerreError::DuplicateSites(a, b));
        }
    }
    Ok(())
}

/// Half-plane `{x : ⟨x, p_j - p_i⟩ <= ψ_j - ψ_i}` where site `i` beats site `j`.
fn dominance(sites: &[Vec2], psi: &[f64], i: usize, j: usize) -> HalfPlane {
    HalfPlane::new(sites[j] - sites[i], psi[j] - psi[i])
}

fn clip_cell(domain: &Domain, sites: &[Vec2], psi: &[f64], i: usize, order: &[usize]) -> (ConvexPolygon, CellShape) {
    let mut poly = domain.initial_polygon();
    let (mut c, mut r) = poly.bounding_circle();
    for &j in order {
        if j == i {
            continue;
        }
        let hp = dominance(sites, psi, i, j);
        if hp.normal.dot(&c) + r * hp.normal.norm() <= hp.offset + 1e-12 {
            continue;
        }
        if poly.is_cut_by(&hp) {
            poly = poly.clip(&hp, EdgeLabel::Site(j));
            if poly.is_empty() {
                break;
            }
            (c, r) = poly.bounding_circle();
        }
    }
    let shape = if poly.is_empty() { CellShape::empty() } else { domain.restrict_clipped(&poly) };
    (poly, shape)
}

/// Clipping order: hinted neighbours first and then everything else by
/// index; without hints, everything by site distance.
fn clip_order(sites: &[Vec2], i: usize, hint: Option<&[usize]>) -> Vec<usize> {
    let n = sites.len();
    match hint {
        Some(h) => {
            let mut used = vec![false; n];
            used[i] = true;
            let mut order: Vec<usize> = Vec::with_capacity(n);
            for &j in h {
                if !used[j] {
                    used[j] = true;
                    order.push(j);
                }
            }
            order.extend((0..n).filter(|&j| !used[j]));
            order
        }
        None => {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| (sites[a] - sites[i]).norm_squared().total_cmp(&(sites[b] - sites[i]).norm_squared()).then(a.cmp(&b)));
            order
        }
    }
}

/// Geometry only; masses are filled by [`cell_masses`].
pub fn laguerre_diagram(domain: &Domain, sites: &[Vec2], psi: &DualWeights) -> Result<LaguerreDiagram, LaguerreError> {
    laguerre_diagram_hinted(domain, sites, psi, None)
}

pub fn laguerre_diagram_hinted(
    domain: &Domain,
    sites: &[Vec2],
    psi: &DualWeights,
    hints: Option<&[Vec<usize>]>,
) -> Result<LaguerreDiagram, LaguerreError> {
    check_sites(sites)?;
    if psi.len() != sites.len() {
        return Err(LaguerreError::LengthMismatch { sites: sites.len(), weights: psi.len() });
    }
    let cells = (0..sites.len())
        .into_par_iter()
        .map(|i| {
            let order = clip_order(sites, i, hints.map(|h| h[i].as_slice()));
            let (polygon, shape) = clip_cell(domain, sites, &psi.psi, i, &order);
            let (area, moment) = shape.area_and_moment();
            let mut neighbors: Vec<usize> = shape
                .pieces
                .iter()
                .filter_map(|p| match p {
                    Piece::Segment { label: EdgeLabel::Site(j), .. } => Some(*j),
                    _ => None,
                })
                .collect();
            neighbors.sort_unstable();
            neighbors.dedup();
            LaguerreCell { site_index: i, polygon, shape, area: area.max(0.0), mass: area.max(0.0), moment, neighbors }
        })
        .collect();
    Ok(LaguerreDiagram { cells })
}

/// Fills `mass` and `moment` of every cell with `∫ K` and `∫ x K`.
pub fn cell_masses(
    domain: &Domain,
    diagram: &mut LaguerreDiagram,
    density: &SourceDensity,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>, DensityError> {
    let results: Vec<Result<(f64, Vec2), DensityError>> = diagram
        .cells
        .par_iter()
        .map(|c| if c.is_empty() { Ok((0.0, Vec2::zeros())) } else { density.integrate_with_moment(domain, &c.shape, opts) })
        .collect();
    for (c, r) in diagram.cells.iter_mut().zip(results) {
        let (m, mom) = r?;
        c.mass = m.max(0.0);
        c.moment = mom;
    }
    Ok(diagram.masses())
}

/// Off-diagonal Hessian weights `∫_{facet} K / |p_i - p_j|`, one entry per
/// unordered neighbour pair, averaged over both sides.
pub fn facet_weights(
    domain: &Domain,
    diagram: &LaguerreDiagram,
    sites: &[Vec2],
    density: &SourceDensity,
    tol: f64,
) -> Result<Vec<(usize, usize, f64)>, DensityError> {
    let per_cell: Vec<Result<Vec<(usize, usize, f64)>, DensityError>> = diagram
        .cells
        .par_iter()
        .map(|c| {
            let i = c.site_index;
            let mut out = Vec::new();
            for (j, a, b) in c.facets() {
                let len = (b - a).norm();
                if len == 0.0 {
                    continue;
                }
                let integral = match density.as_constant() {
                    Some(k) => k * len,
                    None => integrate_segment(&|x: &Vec2| density.eval(domain, x), a, b, tol)?,
                };
                out.push((i.min(j), i.max(j), 0.5 * integral / (sites[i] - sites[j]).norm()));
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_cell {
        all.extend(r?);
    }
    all.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(all.len());
    for (i, j, w) in all {
        match merged.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += w,
            _ => merged.push((i, j, w)),
        }
    }
    Ok(merged)
}

/// `(value, gradient, index)` of `u_ψ(x) = max_i (⟨x, p_i⟩ - ψ_i)`; ties go
/// to the lowest index.
pub fn potential(sites: &[Vec2], psi: &DualWeights, x: &Vec2) -> (f64, Vec2, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, (p, w)) in sites.iter().zip(&psi.psi).enumerate() {
        let v = x.dot(p) - w;
        if v > best.0 {
            best = (v, i);
        }
    }
    (best.0, sites[best.1], best.1)
}

/// Like [`potential`] but also reports whether the maximum is attained twice.
pub fn potential_with_tie(sites: &[Vec2], psi: &DualWeights, x: &Vec2) -> (f64, Vec2, usize, bool) {
    let (v, g, i) = potential(sites, psi, x);
    let tie = sites.iter().zip(&psi.psi).enumerate().any(|(j, (p, w))| j != i && (x.dot(p) - w - v).abs() <= 1e-14 * (1.0 + v.abs()));
    (v, g, i, tie)
}

/// `c_exp(∇u_ψ(x))`.
pub fn gauss_map(sites: &[Vec2], psi: &DualWeights, x: &Vec2) -> HemispherePoint {
    let (_, g, _) = potential(sites, psi, x);
    c_exp(&ChartVector::planar(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ConvexPolygonDomain, DiskDomain};
    use approx::assert_relative_eq;

    fn square() -> Domain {
        ConvexPolygonDomain::unit_square().into()
    }

    #[test]
    fn single_cell_is_domain() {
        let d = square();
        let dia = laguerre_diagram(&d, &[Vec2::new(0.3, 0.1)], &DualWeights::zeros(1)).unwrap();
        assert_relative_eq!(dia.cells[0].area, 1.0, max_relative = 1e-15);
        let disk: Domain = DiskDomain::unit().into();
        let dia = laguerre_diagram(&disk, &[Vec2::new(0.3, 0.1)], &DualWeights::zeros(1)).unwrap();
        assert_relative_eq!(dia.cells[0].area, std::f64::consts::PI, max_relative = 1e-14);
    }

    #[test]
    fn symmetric_split() {
        // on [0,1]² the bisector moves to x1 = 1/2 once ψ₂ - ψ₁ = 1
        let d = square();
        let sites = [Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)];
        let psi = DualWeights { psi: vec![0.0, 1.0] };
        let dia = laguerre_diagram(&d, &sites, &psi).unwrap();
        assert_relative_eq!(dia.cells[0].area, 0.5, max_relative = 1e-14);
        assert_relative_eq!(dia.cells[1].area, 0.5, max_relative = 1e-14);
        assert_eq!(dia.cells[0].neighbors, vec![1]);
        assert!(dia.is_connected());
        let centred: Domain = ConvexPolygonDomain::rectangle(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5)).unwrap().into();
        let dia = laguerre_diagram(&centred, &sites, &DualWeights::zeros(2)).unwrap();
        assert_relative_eq!(dia.cells[0].area, 0.5, max_relative = 1e-14);
        let (_, g, i, tie) = potential_with_tie(&sites, &DualWeights::zeros(2), &Vec2::new(0.0, 0.2));
        assert!(tie);
        assert_eq!(i, 0);
        assert_eq!(g, sites[0]);
    }

    #[test]
    fn dominated_cell_empties() {
        let d = square();
        let sites = [Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)];
        let dia = laguerre_diagram(&d, &sites, &DualWeights { psi: vec![0.0, 1e6] }).unwrap();
        assert!(dia.cells[1].is_empty());
        assert_eq!(dia.empty_cells(), vec![1]);
    }

    #[test]
    fn duplicate_sites_rejected() {
        let d = square();
        let sites = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0)];
        assert_eq!(laguerre_diagram(&d, &sites, &DualWeights::zeros(3)).unwrap_err(), LaguerreError::DuplicateSites(0, 2));
    }

    #[test]
    fn disk_cells_tile_the_disk() {
        let disk: Domain = DiskDomain::new(Vec2::new(0.1, -0.2), 0.8).unwrap().into();
        let sites: Vec<Vec2> = (0..40).map(|k| {
            let a = k as f64 * 2.399;
            Vec2::new(a.cos(), a.sin()) * (0.05 + 0.02 * k as f64)
        }).collect();
        let psi = DualWeights { psi: (0..40).map(|k| 0.01 * ((k * 7) % 5) as f64).collect() };
        let mut dia = laguerre_diagram(&disk, &sites, &psi).unwrap();
        let g = cell_masses(&disk, &mut dia, &SourceDensity::constant(1.0), &QuadratureOptions::default()).unwrap();
        assert_relative_eq!(g.iter().sum::<f64>(), std::f64::consts::PI * 0.64, max_relative = 1e-12);
        let w = facet_weights(&disk, &dia, &sites, &SourceDensity::constant(2.0), 1e-10).unwrap();
        assert!(w.iter().all(|e| e.0 < e.1 && e.2 > 0.0));
    }

    #[test]
    fn potential_examples() {
        let sites = [Vec2::new(1.0, 0.0)];
        let (v, g, i) = potential(&sites, &DualWeights::zeros(1), &Vec2::new(2.0, 3.0));
        assert_eq!((v, g, i), (2.0, Vec2::new(1.0, 0.0), 0));
        let south = gauss_map(&[Vec2::zeros()], &DualWeights::zeros(1), &Vec2::new(0.3, 0.3));
        assert_eq!(south.y_last(), -1.0);
    }
}
