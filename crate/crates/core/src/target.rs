//! Target regions `Ω* ⊂ S²_-` described in the chart, and their
//! discretisation into weighted point clouds.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{cross, polygon_disk_intersection, CellShape, Circle, ConvexPolygon, EdgeLabel, HalfPlane, Vec2};
use crate::quadrature::{integrate_shape, integrate_shape_moments, QuadratureError, QuadratureOptions};
use crate::sphere::{c_exp, chart_density_sq, ChartVector, Dimension};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("invalid target region: {0}")]
    Invalid(String),
    #[error("target region is not geodesically convex")]
    NotConvex,
    #[error("no nonempty cell for N = {0}")]
    NoCells(usize),
    #[error("layout {0:?} is not available for this region")]
    Layout(SiteLayout),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("malformed target CSV at line {0}")]
    Csv(usize),
}

/// Target set in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum TargetRegion {
    ChartDisk { center: Vec2, radius: f64 },
    ChartPolygon { vertices: Vec<Vec2> },
    /// The whole lower hemisphere, represented by the chart disk `|p| <= truncation_radius`.
    FullHemisphere { truncation_radius: f64 },
    /// Only meaningful for convexity checks; cannot be discretised.
    Union(Vec<TargetRegion>),
}

impl TargetRegion {
    pub fn chart_disk(center: Vec2, radius: f64) -> Result<Self, TargetError> {
        let r = TargetRegion::ChartDisk { center, radius };
        r.validate()?;
        Ok(r)
    }

    pub fn full_hemisphere(truncation_radius: f64) -> Result<Self, TargetError> {
        let r = TargetRegion::FullHemisphere { truncation_radius };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), TargetError> {
        match self {
            TargetRegion::ChartDisk { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.x.is_finite() || !center.y.is_finite() {
                    return Err(TargetError::Invalid(format!("chart disk radius {radius}")));
                }
            }
            TargetRegion::ChartPolygon { vertices } => {
                if vertices.len() < 3 || vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
                    return Err(TargetError::Invalid("chart polygon needs 3 finite vertices".into()));
                }
            }
            TargetRegion::FullHemisphere { truncation_radius } => {
                if !(truncation_radius.is_finite() && *truncation_radius > 0.0) {
                    return Err(TargetError::Invalid(format!("truncation radius {truncation_radius}")));
                }
            }
            TargetRegion::Union(parts) => {
                if parts.is_empty() {
                    return Err(TargetError::Invalid("empty union".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Convexity of the chart description.
    pub fn is_chart_convex(&self) -> bool {
        match self {
            TargetRegion::ChartDisk { .. } | TargetRegion::FullHemisphere { .. } => true,
            TargetRegion::ChartPolygon { vertices } => polygon_is_convex(vertices),
            TargetRegion::Union(parts) => union_is_convex(parts),
        }
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        match self {
            TargetRegion::ChartDisk { center, radius } => (p - center).norm() <= *radius,
            TargetRegion::FullHemisphere { truncation_radius } => p.norm() <= *truncation_radius,
            TargetRegion::ChartPolygon { vertices } => ccw_polygon(vertices).contains(p, 1e-12),
            TargetRegion::Union(parts) => parts.iter().any(|r| r.contains(p)),
        }
    }

    fn circle(&self) -> Option<Circle> {
        match *self {
            TargetRegion::ChartDisk { center, radius } => Some(Circle { center, radius }),
            TargetRegion::FullHemisphere { truncation_radius } => Some(Circle { center: Vec2::zeros(), radius: truncation_radius }),
            _ => None,
        }
    }

    fn shape(&self) -> Result<CellShape, TargetError> {
        match self {
            TargetRegion::ChartPolygon { vertices } => Ok(CellShape::from_polygon(&ccw_polygon(vertices))),
            TargetRegion::Union(_) => Err(TargetError::NotConvex),
            _ => Ok(CellShape::full_circle(self.circle().unwrap())),
        }
    }

    fn intersect(&self, rect: &ConvexPolygon) -> CellShape {
        match self {
            TargetRegion::ChartPolygon { vertices } => {
                let poly = ccw_polygon(vertices);
                let mut cur = rect.clone();
                for k in 0..poly.len() {
                    let (a, b) = poly.edge(k);
                    let e = b - a;
                    let n = Vec2::new(e.y, -e.x);
                    cur = cur.clip(&HalfPlane::new(n, n.dot(&a)), EdgeLabel::Boundary);
                    if cur.is_empty() {
                        break;
                    }
                }
                CellShape::from_polygon(&cur)
            }
            _ => polygon_disk_intersection(rect, &self.circle().unwrap()),
        }
    }

    /// Radius of the centred chart disk, when the region is one.
    fn centred_radius(&self) -> Option<f64> {
        match *self {
            TargetRegion::ChartDisk { center, radius } if center == Vec2::zeros() => Some(radius),
            TargetRegion::FullHemisphere { truncation_radius } => Some(truncation_radius),
            _ => None,
        }
    }
}

fn ccw_polygon(vertices: &[Vec2]) -> ConvexPolygon {
    let poly = ConvexPolygon::new(vertices.to_vec());
    if poly.area() < 0.0 {
        ConvexPolygon::new(vertices.iter().rev().copied().collect())
    } else {
        poly
    }
}

fn polygon_is_convex(v: &[Vec2]) -> bool {
    let n = v.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0;
    let mut turning = 0.0;
    for k in 0..n {
        let e0 = v[k] - v[(k + n - 1) % n];
        let e1 = v[(k + 1) % n] - v[k];
        let c = cross(&e0, &e1);
        if c.abs() <= 1e-14 * e0.norm() * e1.norm() {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
        turning += c.atan2(e0.dot(&e1));
    }
    sign != 0.0 && (turning.abs() - TAU).abs() < 1e-9
}

/// Midpoint test over boundary samples of all members.
fn union_is_convex(parts: &[TargetRegion]) -> bool {
    if parts.iter().any(|p| !p.is_chart_convex()) {
        return false;
    }
    let mut pts = Vec::new();
    for p in parts {
        match p.shape() {
            Ok(s) => pts.extend(s.polyline(TAU / 128.0)),
            Err(_) => return false,
        }
    }
    let union = TargetRegion::Union(parts.to_vec());
    for (i, a) in pts.iter().enumerate() {
        for b in pts.iter().skip(i + 1) {
            for t in [0.25, 0.5, 0.75] {
                let m = a + (b - a) * t;
                if !union.contains(&m) && parts.iter().all(|r| !near(r, &m)) {
                    return false;
                }
            }
        }
    }
    true
}

fn near(r: &TargetRegion, p: &Vec2) -> bool {
    match r {
        TargetRegion::ChartDisk { center, radius } => (p - center).norm() <= radius * (1.0 + 1e-9),
        TargetRegion::FullHemisphere { truncation_radius } => p.norm() <= truncation_radius * (1.0 + 1e-9),
        TargetRegion::ChartPolygon { vertices } => ccw_polygon(vertices).contains(p, 1e-9),
        TargetRegion::Union(_) => false,
    }
}

fn density2(p: &Vec2) -> f64 {
    chart_density_sq(p.norm_squared(), Dimension::PLANE)
}

/// `∫_{chart(region)} (1+|p|²)^{-2} dp`. Centred disks use the closed form
/// `π s² / (1 + s²)`; everything else is integrated adaptively.
pub fn region_mass(region: &TargetRegion) -> Result<f64, TargetError> {
    region.validate()?;
    if let Some(s) = region.centred_radius() {
        return Ok(PI * s * s / (1.0 + s * s));
    }
    let shape = region.shape()?;
    Ok(integrate_shape(&density2, &shape, &QuadratureOptions::with_tol(1e-13))?)
}

/// Smallest `P` whose tail mass `π / (1 + P²)` is at most `epsilon`.
pub fn truncation_radius_for(epsilon: f64) -> f64 {
    assert!(epsilon > 0.0 && epsilon < PI, "epsilon must lie in (0, π)");
    (PI / epsilon - 1.0).sqrt()
}

/// Placement of target sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteLayout {
    /// Regular `m × m` grid on the chart bounding box, clipped to the region.
    ChartGrid,
    /// Equal-mass annular sectors in the orthographic coordinate
    /// `y = p / sqrt(1 + |p|²)`, where the target measure is Lebesgue.
    /// Centred disks and the hemisphere only.
    OrthographicRings,
}

#[derive(Clone, Copy, Debug)]
pub struct DiscretizeOptions {
    /// `None` picks rings for the hemisphere and the grid otherwise.
    pub layout: Option<SiteLayout>,
    /// Site displacement as a fraction of the grid spacing; 0 disables.
    pub jitter: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        Self { layout: None, jitter: 0.0 }
    }
}

/// Weighted sites `ν = Σ ν_i δ_{p_i}` with `Σ ν_i = total`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTarget {
    pub sites: Vec<Vec2>,
    pub masses: Vec<f64>,
    pub total: f64,
    /// Sum of cell masses before rescaling.
    pub pre_rescale_mass: f64,
    /// Exact (or adaptively integrated) mass of the region.
    pub region_mass: f64,
    pub rescale_factor: f64,
    /// Largest geodesic angle from a site to a point of its cell.
    pub sphere_spacing: f64,
    /// Cell width in the layout coordinate.
    pub spacing: f64,
    pub layout: SiteLayout,
    pub warnings: Vec<String>,
}

impl DiscreteTarget {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Builds a target from explicit sites and masses (`total` = their sum).
    pub fn from_sites(sites: Vec<Vec2>, masses: Vec<f64>) -> Result<Self, TargetError> {
        if sites.is_empty() || sites.len() != masses.len() {
            return Err(TargetError::Invalid("sites and masses must be nonempty and of equal length".into()));
        }
        if masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(TargetError::Invalid("masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        Ok(Self {
            sites,
            masses,
            total,
            pre_rescale_mass: total,
            region_mass: total,
            rescale_factor: 1.0,
            sphere_spacing: 0.0,
            spacing: 0.0,
            layout: SiteLayout::ChartGrid,
            warnings: Vec::new(),
        })
    }

    /// Rescales every mass by one factor so the total equals `mass`.
    pub fn rescaled_to(&self, mass: f64) -> Self {
        let factor = mass / self.masses.iter().sum::<f64>();
        let mut out = self.clone();
        for m in &mut out.masses {
            *m *= factor;
        }
        out.total = mass;
        out.rescale_factor *= factor;
        out
    }

    /// `p1,p2,nu` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p1,p2,nu\n");
        for (p, m) in self.sites.iter().zip(&self.masses) {
            let _ = writeln!(s, "{},{},{}", p.x, p.y, m);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, TargetError> {
        let mut sites = Vec::new();
        let mut masses = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| TargetError::Csv(i + 1))?;
            if vals.len() != 3 {
                return Err(TargetError::Csv(i + 1));
            }
            sites.push(Vec2::new(vals[0], vals[1]));
            masses.push(vals[2]);
        }
        Self::from_sites(sites, masses)
    }
}

struct RawCell {
    site: Vec2,
    mass: f64,
    /// boundary points used for the spacing estimate
    corners: Vec<Vec2>,
}

pub fn discretize(region: &TargetRegion, n: usize, source_mass: f64, seed: u64) -> Result<DiscreteTarget, TargetError> {
    discretize_with(region, n, source_mass, seed, &DiscretizeOptions::default())
}

/// Cells carry `ν_i = ∫_cell (1+|p|²)^{-2} dp`; empty cells are dropped and
/// one factor rescales the masses to `source_mass`.
pub fn discretize_with(
    region: &TargetRegion,
    n: usize,
    source_mass: f64,
    seed: u64,
    opts: &DiscretizeOptions,
) -> Result<DiscreteTarget, TargetError> {
    region.validate()?;
    if !region.is_chart_convex() {
        return Err(TargetError::NotConvex);
    }
    if n == 0 {
        return Err(TargetError::NoCells(0));
    }
    let layout = opts.layout.unwrap_or(match region {
        TargetRegion::FullHemisphere { .. } => SiteLayout::OrthographicRings,
        _ => SiteLayout::ChartGrid,
    });
    let (cells, spacing) = match layout {
        SiteLayout::ChartGrid => grid_cells(region, n, opts.jitter, seed)?,
        SiteLayout::OrthographicRings => {
            let s = region.centred_radius().ok_or(TargetError::Layout(layout))?;
            ring_cells(s, n)
        }
    };
    if cells.is_empty() {
        return Err(TargetError::NoCells(n));
    }
    let region_mass = region_mass(region)?;
    let pre: f64 = cells.iter().map(|c| c.mass).sum();
    let factor = source_mass / pre;
    let mut warnings = Vec::new();
    if !(0.5..=2.0).contains(&factor) {
        warnings.push(format!("rescale factor {factor:.4} outside [0.5, 2]: discretisation too coarse for the requested mass"));
    }
    let mut sphere_spacing: f64 = 0.0;
    for c in &cells {
        let ys = c_exp(&ChartVector::planar(c.site));
        for q in &c.corners {
            sphere_spacing = sphere_spacing.max(ys.angle_to(&c_exp(&ChartVector::planar(*q))));
        }
    }
    let mut masses: Vec<f64> = cells.iter().map(|c| c.mass * factor).collect();
    // make the sum exact to rounding by absorbing the residue in the largest mass
    let sum: f64 = masses.iter().sum();
    let imax = (0..masses.len()).max_by(|&a, &b| masses[a].total_cmp(&masses[b])).unwrap();
    masses[imax] += source_mass - sum;
    Ok(DiscreteTarget {
        sites: cells.iter().map(|c| c.site).collect(),
        masses,
        total: source_mass,
        pre_rescale_mass: pre,
        region_mass,
        rescale_factor: factor,
        sphere_spacing,
        spacing,
        layout,
        warnings,
    })
}

fn grid_cells(region: &TargetRegion, n: usize, jitter: f64, seed: u64) -> Result<(Vec<RawCell>, f64), TargetError> {
    let shape = region.shape()?;
    let (lo, hi) = shape.bounding_box();
    let ext = hi - lo;
    let nonempty = |m: usize| -> Vec<(ConvexPolygon, CellShape)> {
        let h = ext / m as f64;
        let mut out = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let a = lo + Vec2::new(h.x * i as f64, h.y * j as f64);
                let rect = ConvexPolygon::rectangle(a, a + h);
                let cell = region.intersect(&rect);
                if !cell.is_empty() && cell.area() > 1e-10 * h.x * h.y {
                    out.push((rect, cell));
                }
            }
        }
        out
    };
    let fill = shape.area() / (ext.x * ext.y);
    let mut m = ((n as f64 / fill).sqrt().ceil() as usize).max(1);
    let mut cells = nonempty(m);
    while cells.len() > n && m > 1 {
        m -= 1;
        cells = nonempty(m);
    }
    let h = ext / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quad = QuadratureOptions { tol: 1e-16, rel_tol: 1e-13, ..Default::default() };
    let mut out = Vec::with_capacity(cells.len());
    for (_, cell) in cells {
        let [mass, mx, my] = integrate_shape_moments(&density2, &cell, &quad)?;
        let mut site = Vec2::new(mx, my) / mass;
        if jitter > 0.0 {
            let cand = site + Vec2::new((rng.gen::<f64>() - 0.5) * jitter * h.x, (rng.gen::<f64>() - 0.5) * jitter * h.y);
            if cell.contains(&cand, 0.0) {
                site = cand;
            }
        }
        out.push(RawCell { site, mass, corners: cell.polyline(0.2) });
    }
    Ok((out, h.x.max(h.y)))
}

/// Equal-area annular sectors of the orthographic disk of radius
/// `s / sqrt(1 + s²)`, `rings × sectors <= n`.
fn ring_cells(chart_radius: f64, n: usize) -> (Vec<RawCell>, f64) {
    let y_max = chart_radius / (1.0 + chart_radius * chart_radius).sqrt();
    let rings = (n as f64).sqrt().round().max(1.0) as usize;
    let sectors = (n / rings).max(1);
    let to_chart = |y: Vec2| y / (1.0 - y.norm_squared()).sqrt();
    let mut out = Vec::with_capacity(rings * sectors);
    for k in 0..rings {
        let r0 = y_max * (k as f64 / rings as f64).sqrt();
        let r1 = y_max * ((k + 1) as f64 / rings as f64).sqrt();
        let dphi = TAU / sectors as f64;
        let phase = if k % 2 == 1 { 0.5 * dphi } else { 0.0 };
        // radial centroid of an annular sector
        let rc = 2.0 / 3.0 * (r1.powi(3) - r0.powi(3)) / (r1 * r1 - r0 * r0) * if sectors == 1 { 0.0 } else { (0.5 * dphi).sin() / (0.5 * dphi) };
        for j in 0..sectors {
            let a0 = phase + dphi * j as f64;
            let am = a0 + 0.5 * dphi;
            let yc = Vec2::new(am.cos(), am.sin()) * rc;
            let mass = 0.5 * dphi * (r1 * r1 - r0 * r0);
            let corners = [(r0, a0), (r1, a0), (r0, a0 + dphi), (r1, a0 + dphi), (r1, am)]
                .iter()
                .map(|&(r, a)| to_chart(Vec2::new(a.cos(), a.sin()) * r))
                .collect();
            out.push(RawCell { site: to_chart(yc), mass, corners });
        }
    }
    (out, y_max / rings as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn region_mass_examples() {
        for s in [0.3, 0.75, 1.0, 4.0] {
            let r = TargetRegion::chart_disk(Vec2::zeros(), s).unwrap();
            assert_relative_eq!(region_mass(&r).unwrap(), PI * s * s / (1.0 + s * s), max_relative = 1e-15);
        }
        let p = 1e4;
        let h = TargetRegion::full_hemisphere(p).unwrap();
        assert_relative_eq!(PI - region_mass(&h).unwrap(), PI / (1.0 + p * p), max_relative = 1e-6);
    }

    #[test]
    fn off_centre_disk_mass_by_quadrature() {
        // the centred closed form is rotation invariant, so compare a shifted
        // disk against its rotated copy instead
        let a = TargetRegion::chart_disk(Vec2::new(0.5, 0.0), 0.4).unwrap();
        let b = TargetRegion::chart_disk(Vec2::new(0.0, -0.5), 0.4).unwrap();
        assert_relative_eq!(region_mass(&a).unwrap(), region_mass(&b).unwrap(), max_relative = 1e-12);
        assert!(region_mass(&a).unwrap() < PI * 0.16);
    }

    #[test]
    fn truncation_examples() {
        assert_relative_eq!(truncation_radius_for(PI / 100.0), 99f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(truncation_radius_for(PI / 2.0), 1.0, max_relative = 1e-14);
        assert!(truncation_radius_for(1e-3) > truncation_radius_for(1e-2));
    }

    #[test]
    fn single_site_at_centroid() {
        let r = TargetRegion::chart_disk(Vec2::zeros(), 0.75).unwrap();
        let t = discretize(&r, 1, 2.0, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.sites[0].norm() < 1e-12);
        assert_eq!(t.masses[0], 2.0);
    }

    #[test]
    fn masses_sum_exactly() {
        let r = TargetRegion::ChartPolygon { vertices: vec![Vec2::new(-1.0, -0.5), Vec2::new(1.0, -0.3), Vec2::new(0.2, 1.0)] };
        for n in [1, 7, 50, 333] {
            let t = discretize(&r, n, 0.37, 3).unwrap();
            assert!(t.len() <= n);
            let s: f64 = t.masses.iter().sum();
            assert!(((s - 0.37) / 0.37).abs() <= 1e-14, "{s}");
            assert!(t.masses.iter().all(|m| *m > 0.0));
            assert!(t.sites.iter().all(|p| r.contains(p)));
        }
    }

    #[test]
    fn rejects_non_convex_and_zero_n() {
        let l = TargetRegion::ChartPolygon {
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 1.0), Vec2::new(1.0, 0.2), Vec2::new(0.0, 1.0)],
        };
        assert!(!l.is_chart_convex());
        assert!(matches!(discretize(&l, 10, 1.0, 0), Err(TargetError::NotConvex)));
        let d = TargetRegion::chart_disk(Vec2::zeros(), 1.0).unwrap();
        assert!(matches!(discretize(&d, 0, 1.0, 0), Err(TargetError::NoCells(0))));
        let off = TargetRegion::chart_disk(Vec2::new(1.0, 0.0), 1.0).unwrap();
        let opts = DiscretizeOptions { layout: Some(SiteLayout::OrthographicRings), ..Default::default() };
        assert!(matches!(discretize_with(&off, 10, 1.0, 0, &opts), Err(TargetError::Layout(_))));
    }

    #[test]
    fn coarse_rescale_warns() {
        let d = TargetRegion::chart_disk(Vec2::zeros(), 1.0).unwrap();
        let t = discretize(&d, 10, 10.0, 0).unwrap();
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn rings_have_equal_masses() {
        let h = TargetRegion::full_hemisphere(100.0).unwrap();
        let t = discretize(&h, 400, PI, 0).unwrap();
        assert_eq!(t.layout, SiteLayout::OrthographicRings);
        assert_eq!(t.len(), 400);
        assert_relative_eq!(t.pre_rescale_mass, t.region_mass, max_relative = 1e-12);
        let m0 = t.masses[0];
        assert!(t.masses.iter().all(|m| (m - m0).abs() < 1e-12));
        assert!(t.sites.iter().all(|p| h.contains(p)));
    }

    #[test]
    fn csv_round_trip() {
        let d = TargetRegion::chart_disk(Vec2::new(0.1, 0.2), 0.5).unwrap();
        let t = discretize(&d, 30, 1.0, 0).unwrap();
        let back = DiscreteTarget::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.sites, t.sites);
        assert_eq!(back.masses, t.masses);
        assert!(DiscreteTarget::from_csv("p1,p2,nu\n1,2\n").is_err());
    }
}
