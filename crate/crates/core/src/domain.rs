//! Convex source domains, their boundary constants, inner parallel bodies
//! and the cone constructions used near the boundary.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{cross, polygon_disk_intersection, CellShape, Circle, ConvexPolygon, EdgeLabel, HalfPlane, Vec2};
use crate::sphere::Dimension;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex and counterclockwise at vertex {0}")]
    NotConvex(usize),
    #[error("repeated vertex {0}")]
    RepeatedVertex(usize),
    #[error("disk radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("θ = sqrt(d0 / 6 R0) needs 0 < d0 < 6 R0 (d0 = {d0}, R0 = {r0})")]
    ThetaRange { d0: f64, r0: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("the enclosing-ball radius is unavailable for polygonal domains")]
    NoEnclosingBall,
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygonDomain {
    vertices: Vec<Vec2>,
}

impl ConvexPolygonDomain {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, DomainError> {
        let n = vertices.len();
        if n < 3 {
            return Err(DomainError::TooFewVertices(n));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(DomainError::NonFinite);
        }
        for i in 0..n {
            for j in i + 1..n {
                if (vertices[i] - vertices[j]).norm() == 0.0 {
                    return Err(DomainError::RepeatedVertex(j));
                }
            }
        }
        for k in 0..n {
            let a = vertices[(k + n - 1) % n];
            let b = vertices[k];
            let c = vertices[(k + 1) % n];
            if cross(&(b - a), &(c - b)) <= 0.0 {
                return Err(DomainError::NotConvex(k));
            }
        }
        // consistent left turns can still wind more than once
        let turning: f64 = (0..n)
            .map(|k| {
                let e0 = vertices[k] - vertices[(k + n - 1) % n];
                let e1 = vertices[(k + 1) % n] - vertices[k];
                cross(&e0, &e1).atan2(e0.dot(&e1))
            })
            .sum();
        if (turning - 2.0 * PI).abs() > 1e-9 {
            return Err(DomainError::NotConvex(0));
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self, DomainError> {
        Self::new(vec![min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap()
    }

    /// Regular polygon inscribed in the circle of the given radius.
    pub fn regular(center: Vec2, radius: f64, sides: usize, phase: f64) -> Result<Self, DomainError> {
        let verts = (0..sides)
            .map(|k| {
                let a = phase + 2.0 * PI * k as f64 / sides as f64;
                center + Vec2::new(a.cos(), a.sin()) * radius
            })
            .collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::new(self.vertices.clone())
    }

    fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    /// Interior angle at each vertex.
    pub fn interior_angles(&self) -> Vec<f64> {
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let to_prev = self.vertices[(k + n - 1) % n] - self.vertices[k];
                let to_next = self.vertices[(k + 1) % n] - self.vertices[k];
                cross(&to_next, &to_prev).atan2(to_next.dot(&to_prev))
            })
            .collect()
    }

    /// Inward half-planes `{<n, x> <= c}` of the edges (unit normals).
    fn half_planes(&self) -> Vec<HalfPlane> {
        self.edges()
            .map(|(a, b)| {
                let e = (b - a).normalize();
                let outward = Vec2::new(e.y, -e.x);
                HalfPlane::new(outward, outward.dot(&a))
            })
            .collect()
    }

    /// Smallest extent of the polygon across any edge direction.
    pub fn min_width(&self) -> f64 {
        self.half_planes()
            .iter()
            .map(|hp| self.vertices.iter().map(|v| -hp.excess(v)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskDomain {
    center: Vec2,
    radius: f64,
}

impl DiskDomain {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, DomainError> {
        if !center.x.is_finite() || !center.y.is_finite() || !radius.is_finite() {
            return Err(DomainError::NonFinite);
        }
        if radius <= 0.0 {
            return Err(DomainError::BadRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self { center: Vec2::zeros(), radius: 1.0 }
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn circle(&self) -> Circle {
        Circle { center: self.center, radius: self.radius }
    }
}

/// Bounded convex source domain `Ω ⊂ R²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Polygon(ConvexPolygonDomain),
    Disk(DiskDomain),
}

impl From<ConvexPolygonDomain> for Domain {
    fn from(p: ConvexPolygonDomain) -> Self {
        Domain::Polygon(p)
    }
}

impl From<DiskDomain> for Domain {
    fn from(d: DiskDomain) -> Self {
        Domain::Disk(d)
    }
}

impl Domain {
    pub fn area(&self) -> f64 {
        match self {
            Domain::Polygon(p) => p.polygon().area(),
            Domain::Disk(d) => PI * d.radius * d.radius,
        }
    }

    pub fn shape(&self) -> CellShape {
        match self {
            Domain::Polygon(p) => CellShape::from_polygon(&p.polygon()),
            Domain::Disk(d) => CellShape::full_circle(d.circle()),
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            Domain::Polygon(p) => {
                let mut lo = Vec2::repeat(f64::INFINITY);
                let mut hi = Vec2::repeat(f64::NEG_INFINITY);
                for v in p.vertices() {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                (lo, hi)
            }
            Domain::Disk(d) => (d.center - Vec2::repeat(d.radius), d.center + Vec2::repeat(d.radius)),
        }
    }

    /// Polygon every Laguerre cell starts from before clipping.
    pub fn initial_polygon(&self) -> ConvexPolygon {
        match self {
            Domain::Polygon(p) => p.polygon(),
            Domain::Disk(d) => {
                let h = Vec2::repeat(1.25 * d.radius);
                ConvexPolygon::rectangle(d.center - h, d.center + h)
            }
        }
    }

    /// `poly ∩ Ω` for a polygon already clipped from [`Domain::initial_polygon`].
    pub fn restrict_clipped(&self, poly: &ConvexPolygon) -> CellShape {
        match self {
            Domain::Polygon(_) => CellShape::from_polygon(poly),
            Domain::Disk(d) => polygon_disk_intersection(poly, &d.circle()),
        }
    }

    /// `poly ∩ Ω` for an arbitrary convex polygon.
    pub fn intersect(&self, poly: &ConvexPolygon) -> CellShape {
        match self {
            Domain::Polygon(p) => {
                let mut cur = poly.clone();
                for hp in p.half_planes() {
                    if cur.is_empty() {
                        break;
                    }
                    cur = cur.clip(&hp, EdgeLabel::Boundary);
                }
                CellShape::from_polygon(&cur)
            }
            Domain::Disk(d) => polygon_disk_intersection(poly, &d.circle()),
        }
    }

    pub fn contains(&self, x: &Vec2) -> bool {
        self.signed_distance(x) >= 0.0
    }

    /// Euclidean distance to `∂Ω`; negative outside.
    pub fn signed_distance(&self, x: &Vec2) -> f64 {
        match self {
            Domain::Disk(d) => d.radius - (x - d.center).norm(),
            Domain::Polygon(p) => {
                let inside = p.half_planes().iter().all(|hp| hp.excess(x) <= 0.0);
                let dist = p.edges().map(|(a, b)| segment_distance(x, &a, &b)).fold(f64::INFINITY, f64::min);
                if inside {
                    dist
                } else {
                    -dist
                }
            }
        }
    }

    /// Alias of [`Domain::signed_distance`] matching the usual `d(x, ∂Ω)`.
    pub fn distance_to_boundary(&self, x: &Vec2) -> f64 {
        self.signed_distance(x)
    }

    /// A closest point of `∂Ω` to `x`.
    pub fn nearest_boundary_point(&self, x: &Vec2) -> Vec2 {
        match self {
            Domain::Disk(d) => {
                let r = x - d.center;
                let dir = if r.norm() > 0.0 { r.normalize() } else { Vec2::new(1.0, 0.0) };
                d.center + dir * d.radius
            }
            Domain::Polygon(p) => p
                .edges()
                .map(|(a, b)| closest_on_segment(x, &a, &b))
                .min_by(|u, v| (u - x).norm().total_cmp(&(v - x).norm()))
                .unwrap(),
        }
    }

    pub fn inradius(&self) -> f64 {
        match self {
            Domain::Disk(d) => d.radius,
            Domain::Polygon(p) => {
                // maximise min distance: the erosion at the inradius collapses;
                // bisection on area keeps this free of an LP
                let (mut lo, mut hi) = (0.0, 0.5 * p.min_width());
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if erode_polygon(p, mid).is_some() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    }

    /// Inner parallel body `Ω_t = {x ∈ Ω : d(x, ∂Ω) >= t}`; `None` once empty.
    pub fn erode(&self, t: f64) -> Option<Domain> {
        assert!(t >= 0.0, "erosion depth must be non-negative");
        if t == 0.0 {
            return Some(self.clone());
        }
        match self {
            Domain::Disk(d) => (d.radius > t).then(|| Domain::Disk(DiskDomain { center: d.center, radius: d.radius - t })),
            Domain::Polygon(p) => erode_polygon(p, t).map(Domain::Polygon),
        }
    }

    pub fn translated(&self, w: &Vec2) -> Domain {
        match self {
            Domain::Disk(d) => Domain::Disk(DiskDomain { center: d.center + w, radius: d.radius }),
            Domain::Polygon(p) => Domain::Polygon(ConvexPolygonDomain { vertices: p.vertices.iter().map(|v| v + w).collect() }),
        }
    }

    /// Points spread along `∂Ω` by arc length.
    pub fn boundary_samples(&self, count: usize) -> Vec<Vec2> {
        match self {
            Domain::Disk(d) => (0..count).map(|k| d.circle().point_at(2.0 * PI * k as f64 / count as f64)).collect(),
            Domain::Polygon(p) => {
                let lens: Vec<f64> = p.edges().map(|(a, b)| (b - a).norm()).collect();
                let total: f64 = lens.iter().sum();
                let mut out = Vec::with_capacity(count);
                for k in 0..count {
                    let mut s = total * k as f64 / count as f64;
                    for (e, (a, b)) in p.edges().enumerate() {
                        if s <= lens[e] || e + 1 == lens.len() {
                            out.push(a + (b - a) * (s / lens[e]).min(1.0));
                            break;
                        }
                        s -= lens[e];
                    }
                }
                out
            }
        }
    }

    pub fn boundary_geometry(&self) -> BoundaryGeometry {
        match self {
            Domain::Disk(d) => BoundaryGeometry::for_disk(d),
            Domain::Polygon(p) => BoundaryGeometry::for_polygon(p),
        }
    }
}

fn erode_polygon(p: &ConvexPolygonDomain, t: f64) -> Option<ConvexPolygonDomain> {
    let mut cur = p.polygon();
    for hp in p.half_planes() {
        let shifted = HalfPlane::new(hp.normal, hp.offset - t);
        cur = cur.clip(&shifted, EdgeLabel::Boundary);
        if cur.is_empty() {
            return None;
        }
    }
    // drop vertices made collinear or coincident by the offset
    let mut verts: Vec<Vec2> = Vec::with_capacity(cur.len());
    for v in cur.vertices {
        if verts.last().map_or(true, |l: &Vec2| (l - v).norm() > 1e-12) {
            verts.push(v);
        }
    }
    while verts.len() > 1 && (verts[0] - verts[verts.len() - 1]).norm() <= 1e-12 {
        verts.pop();
    }
    let n = verts.len();
    let kept: Vec<Vec2> = (0..n)
        .filter(|&k| {
            let a = verts[(k + n - 1) % n];
            let c = verts[(k + 1) % n];
            cross(&(verts[k] - a), &(c - verts[k])) > 1e-14
        })
        .map(|k| verts[k])
        .collect();
    ConvexPolygonDomain::new(kept).ok()
}

pub fn closest_on_segment(x: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let e = b - a;
    let t = ((x - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
    a + e * t
}

pub fn segment_distance(x: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (x - closest_on_segment(x, a, b)).norm()
}

/// Boundary chart constants: every `z ∈ ∂Ω` lies in the half-size cylinder
/// of a rotated frame where `Ω` is the epigraph of an `L`-Lipschitz graph
/// `φ: B_ρ → (-C₁ρ, C₁ρ)` inside `B_ρ × (-2C₁ρ, 2C₁ρ)`. `r0` is the largest
/// enclosing-ball radius; polygons have none.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGeometry {
    pub rho: f64,
    pub lipschitz: f64,
    pub c1: f64,
    pub r0: Option<f64>,
}

/// One boundary chart: origin, tangent `e1`, inward normal `e2`, graph.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryChart {
    pub origin: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
    kind: ChartGraph,
}

#[derive(Clone, Copy, Debug)]
enum ChartGraph {
    /// `φ(s) = R - sqrt(R² - s²)`
    Circle { radius: f64 },
    /// `φ(s) = |s| cot(α/2)`
    Corner { slope: f64 },
    Flat,
}

impl BoundaryChart {
    pub fn graph(&self, s: f64) -> f64 {
        match self.kind {
            ChartGraph::Circle { radius } => radius - (radius * radius - s * s).max(0.0).sqrt(),
            ChartGraph::Corner { slope } => s.abs() * slope,
            ChartGraph::Flat => 0.0,
        }
    }

    pub fn to_local(&self, x: &Vec2) -> (f64, f64) {
        let r = x - self.origin;
        (r.dot(&self.tangent), r.dot(&self.normal))
    }

    pub fn to_world(&self, s: f64, h: f64) -> Vec2 {
        self.origin + self.tangent * s + self.normal * h
    }
}

impl BoundaryGeometry {
    /// Circle of radius `R` as a graph over its tangent line: with
    /// `ρ = R / (2√2)` the slope stays below `1/√7`, so `L = 1`; `C₁ = 2`
    /// keeps both `φ(ρ) < C₁ρ` and the far side of the circle above `2C₁ρ`.
    pub fn for_disk(d: &DiskDomain) -> Self {
        let rho = (d.radius / (2.0 * 2f64.sqrt())).min(0.9);
        Self { rho, lipschitz: 1.0, c1: 2.0, r0: Some(d.radius) }
    }

    /// Vertex charts in the bisector frame and flat charts along edges.
    pub fn for_polygon(p: &ConvexPolygonDomain) -> Self {
        let angles = p.interior_angles();
        let lipschitz = angles.iter().map(|a| 1.0 / (0.5 * a).tan()).fold(0.0, f64::max).max(1e-3);
        let c1 = (2.0 * lipschitz).max(2.0);
        let min_edge = p.edges().map(|(a, b)| (b - a).norm()).fold(f64::INFINITY, f64::min);
        let min_sin = angles.iter().map(|a| (0.5 * a).sin()).fold(1.0, f64::min);
        let rho = (0.25 * min_edge * min_sin).min(p.min_width() / (8.0 * c1)).min(0.9);
        Self { rho, lipschitz, c1, r0: None }
    }

    pub fn enclosing_radius(&self) -> Result<f64, DomainError> {
        self.r0.ok_or(DomainError::NoEnclosingBall)
    }

    /// The boundary-distance threshold `min(ρ²/(16(1+4R₀)), r₀/2, 1/4)`.
    pub fn d0_threshold(&self, decay_r0: f64) -> Result<f64, DomainError> {
        let r0 = self.enclosing_radius()?;
        Ok((self.rho * self.rho / (16.0 * (1.0 + 4.0 * r0))).min(0.5 * decay_r0).min(0.25))
    }

    /// Chart whose half-size cylinder contains the boundary point `z`.
    pub fn chart_for(&self, domain: &Domain, z: &Vec2) -> BoundaryChart {
        match domain {
            Domain::Disk(d) => {
                let normal = (d.center - z).normalize();
                BoundaryChart {
                    origin: *z,
                    tangent: Vec2::new(normal.y, -normal.x),
                    normal,
                    kind: ChartGraph::Circle { radius: d.radius },
                }
            }
            Domain::Polygon(p) => {
                let n = p.vertices.len();
                let angles = p.interior_angles();
                for k in 0..n {
                    let v = p.vertices[k];
                    let half = 0.5 * angles[k];
                    if (z - v).norm() * half.sin() < 0.5 * self.rho * 0.999 {
                        let to_prev = (p.vertices[(k + n - 1) % n] - v).normalize();
                        let to_next = (p.vertices[(k + 1) % n] - v).normalize();
                        let normal = (to_prev + to_next).normalize();
                        return BoundaryChart {
                            origin: v,
                            tangent: Vec2::new(normal.y, -normal.x),
                            normal,
                            kind: ChartGraph::Corner { slope: 1.0 / half.tan() },
                        };
                    }
                }
                let (a, b) = p
                    .edges()
                    .min_by(|e, f| segment_distance(z, &e.0, &e.1).total_cmp(&segment_distance(z, &f.0, &f.1)))
                    .unwrap();
                let e = b - a;
                let len = e.norm();
                let tangent = e / len;
                let t = (z - a).dot(&tangent).clamp(self.rho, len - self.rho);
                BoundaryChart {
                    origin: a + tangent * t,
                    tangent,
                    normal: Vec2::new(-tangent.y, tangent.x),
                    kind: ChartGraph::Flat,
                }
            }
        }
    }

    /// Sampling check of the chart covering property at `boundary_points`
    /// boundary samples with a `grid × grid` lattice in each cylinder.
    pub fn certify(&self, domain: &Domain, boundary_points: usize, grid: usize) -> Result<(), String> {
        if !(self.rho > 0.0 && self.rho < 1.0) || self.lipschitz <= 0.0 || self.c1 <= 1.0 {
            return Err(format!("constants out of range: {self:?}"));
        }
        for z in domain.boundary_samples(boundary_points) {
            let ch = self.chart_for(domain, &z);
            let (sz, hz) = ch.to_local(&z);
            if sz.abs() >= 0.5 * self.rho || hz.abs() >= self.c1 * self.rho {
                return Err(format!("boundary point {z:?} outside the half cylinder"));
            }
            let h_max = 2.0 * self.c1 * self.rho;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=grid {
                let s = -self.rho + 2.0 * self.rho * (i as f64 + 0.5) / (grid as f64 + 1.0);
                let phi = ch.graph(s);
                if phi.abs() >= self.c1 * self.rho {
                    return Err(format!("graph leaves (-C1ρ, C1ρ) at s = {s}"));
                }
                if let Some((ps, pphi)) = prev {
                    if (phi - pphi).abs() > self.lipschitz * (s - ps).abs() * (1.0 + 1e-9) {
                        return Err(format!("graph slope exceeds L near s = {s}"));
                    }
                }
                prev = Some((s, phi));
                for j in 0..=grid {
                    let h = -h_max + 2.0 * h_max * (j as f64 + 0.5) / (grid as f64 + 1.0);
                    if (h - phi).abs() < 1e-9 {
                        continue;
                    }
                    let inside = domain.signed_distance(&ch.to_world(s, h)) > 0.0;
                    if inside != (h > phi) {
                        return Err(format!("cylinder mismatch at local ({s}, {h}) around {z:?}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `θ = sqrt(d0 / (6 R0))`.
pub fn theta_of(d0: f64, r0: f64) -> Result<f64, DomainError> {
    if !(d0 > 0.0 && r0 > 0.0 && d0 < 6.0 * r0) {
        return Err(DomainError::ThetaRange { d0, r0 });
    }
    Ok((d0 / (6.0 * r0)).sqrt())
}

/// `Λ = ((1-δ) / (n 2ⁿ C₀ (1+L)^{n-1} (6R₀ + 24R₀²)^{(n-1)/2}))^{1/(n+2)}`.
pub fn lambda_constant(n: Dimension, delta: f64, c0: f64, lipschitz: f64, r0: f64) -> Result<f64, DomainError> {
    if !(delta > 0.0 && delta < 1.0) || c0 <= 0.0 || lipschitz < 0.0 || r0 <= 0.0 {
        return Err(DomainError::Parameter(format!("δ = {delta}, C0 = {c0}, L = {lipschitz}, R0 = {r0}")));
    }
    let nf = n.get() as f64;
    let denom = nf
        * 2f64.powf(nf)
        * c0
        * (1.0 + lipschitz).powf(nf - 1.0)
        * (6.0 * r0 + 24.0 * r0 * r0).powf(0.5 * (nf - 1.0));
    Ok(((1.0 - delta) / denom).powf(1.0 / (nf + 2.0)))
}

/// `x0`, the unit direction `v0` to a closest boundary point, `d0` and `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeSpec {
    pub x0: Vec2,
    pub v0: Vec2,
    pub d0: f64,
    pub theta: f64,
}

impl ConeSpec {
    pub fn new(domain: &Domain, x0: Vec2, r0: f64) -> Result<Self, DomainError> {
        let d0 = domain.signed_distance(&x0);
        if d0 <= 0.0 {
            return Err(DomainError::Parameter(format!("x0 = {x0:?} is not interior")));
        }
        let xb = domain.nearest_boundary_point(&x0);
        let v0 = (xb - x0) / d0;
        Ok(Self { x0, v0, d0, theta: theta_of(d0, r0)? })
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    /// `x_∂ = x0 + d0 v0`.
    pub fn boundary_point(&self) -> Vec2 {
        self.x0 + self.v0 * self.d0
    }

    /// `x ∈ E_θ`: `<x - x0, -v0> <= θ |x - x0|` (membership of `Ω` not checked).
    pub fn in_e_theta(&self, x: &Vec2) -> bool {
        let r = x - self.x0;
        r.dot(&-self.v0) <= self.theta * r.norm()
    }

    /// `p ∈ E*_θ`: direction within `θ` of `v0` and `|p - p0| <= 1`.
    pub fn in_e_star_theta(&self, p: &Vec2, p0: &Vec2) -> bool {
        let r = p - p0;
        let len = r.norm();
        if len == 0.0 {
            return false;
        }
        (r / len - self.v0).norm() <= self.theta && len <= 1.0
    }
}

/// Both cone tests at once; `x` must additionally lie in `Ω` for `E_θ`.
pub fn cone_memberships(domain: &Domain, spec: &ConeSpec, x: &Vec2, p: &Vec2, p0: &Vec2) -> (bool, bool) {
    (domain.contains(x) && spec.in_e_theta(x), spec.in_e_star_theta(p, p0))
}
