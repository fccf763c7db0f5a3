//! Planar primitives: labelled convex polygons, half-plane clipping, and
//! regions bounded by straight segments and circular arcs.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

/// Absolute slack applied to half-plane offsets while clipping.
pub const CLIP_EPS: f64 = 1e-12;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `{x : <normal, x> <= offset}`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: Vec2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Vec2, offset: f64) -> Self {
        Self { normal, offset }
    }

    #[inline]
    pub fn excess(&self, x: &Vec2) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

/// What generated an edge of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    /// Part of the domain boundary.
    Boundary,
    /// Shared with the cell of another site.
    Site(usize),
}

/// Convex polygon in counterclockwise order; `labels[k]` tags the edge
/// `vertices[k] -> vertices[k + 1]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
    pub labels: Vec<EdgeLabel>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        let labels = vec![EdgeLabel::Boundary; vertices.len()];
        Self { vertices, labels }
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Self {
        Self::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, k: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let o = self.vertices[0];
        let mut twice = 0.0;
        for k in 1..self.vertices.len() - 1 {
            twice += cross(&(self.vertices[k] - o), &(self.vertices[k + 1] - o));
        }
        0.5 * twice
    }

    pub fn centroid(&self) -> Vec2 {
        let o = self.vertices[0];
        let mut acc = Vec2::zeros();
        let mut twice = 0.0;
        for k in 1..self.vertices.len() - 1 {
            let a = self.vertices[k] - o;
            let b = self.vertices[k + 1] - o;
            let w = cross(&a, &b);
            acc += (a + b) * w;
            twice += w;
        }
        o + acc / (3.0 * twice)
    }

    /// Closed containment test with absolute slack `eps`.
    pub fn contains(&self, x: &Vec2, eps: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        (0..self.len()).all(|k| {
            let (a, b) = self.edge(k);
            let e = b - a;
            cross(&e, &(x - a)) >= -eps * e.norm()
        })
    }

    /// Centre and radius of a circle enclosing every vertex.
    pub fn bounding_circle(&self) -> (Vec2, f64) {
        let n = self.vertices.len() as f64;
        let c = self.vertices.iter().fold(Vec2::zeros(), |acc, v| acc + v) / n;
        let r = self
            .vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max);
        (c, r)
    }

    /// True when the half-plane leaves some vertex outside (beyond the slack).
    pub fn is_cut_by(&self, hp: &HalfPlane) -> bool {
        self.vertices.iter().any(|v| hp.excess(v) > CLIP_EPS)
    }

    /// Sutherland-Hodgman clip; edges created along the clip line get `label`.
    pub fn clip(&self, hp: &HalfPlane, label: EdgeLabel) -> ConvexPolygon {
        let n = self.vertices.len();
        let mut out = ConvexPolygon {
            vertices: Vec::with_capacity(n + 1),
            labels: Vec::with_capacity(n + 1),
        };
        if n < 3 {
            return out;
        }
        let excess: Vec<f64> = self.vertices.iter().map(|v| hp.excess(v)).collect();
        let inside = |s: f64| s <= CLIP_EPS;
        for k in 0..n {
            let next = (k + 1) % n;
            let (cur, nxt) = (self.vertices[k], self.vertices[next]);
            let (sc, sn) = (excess[k], excess[next]);
            let lab = self.labels[k];
            let crossing = || {
                let t = (sc / (sc - sn)).clamp(0.0, 1.0);
                cur + (nxt - cur) * t
            };
            if inside(sc) {
                push_vertex(&mut out, cur, lab);
                if !inside(sn) {
                    push_vertex(&mut out, crossing(), label);
                }
            } else if inside(sn) {
                push_vertex(&mut out, crossing(), lab);
            }
        }
        // close the loop
        while out.vertices.len() >= 2
            && (out.vertices[0] - out.vertices[out.vertices.len() - 1]).norm() < 1e-14
        {
            let lab = out.labels.pop().unwrap();
            out.vertices.pop();
            let last = out.labels.len() - 1;
            out.labels[last] = lab;
        }
        if out.vertices.len() < 3 || out.area() <= 0.0 {
            out.vertices.clear();
            out.labels.clear();
        }
        out
    }
}

fn push_vertex(poly: &mut ConvexPolygon, v: Vec2, label: EdgeLabel) {
    if let Some(last) = poly.vertices.last() {
        if (last - v).norm() < 1e-14 {
            *poly.labels.last_mut().unwrap() = label;
            return;
        }
    }
    poly.vertices.push(v);
    poly.labels.push(label);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn point_at(&self, angle: f64) -> Vec2 {
        self.center + Vec2::new(angle.cos(), angle.sin()) * self.radius
    }

    pub fn angle_of(&self, x: &Vec2) -> f64 {
        let d = x - self.center;
        d.y.atan2(d.x)
    }
}

/// One oriented piece of a region boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Piece {
    Segment { a: Vec2, b: Vec2, label: EdgeLabel },
    /// Counterclockwise arc of `circle` from `start` sweeping `sweep >= 0` radians.
    Arc { circle: Circle, start: f64, sweep: f64 },
}

impl Piece {
    pub fn start_point(&self) -> Vec2 {
        match *self {
            Piece::Segment { a, .. } => a,
            Piece::Arc { circle, start, .. } => circle.point_at(start),
        }
    }

    pub fn end_point(&self) -> Vec2 {
        match *self {
            Piece::Segment { b, .. } => b,
            Piece::Arc { circle, start, sweep } => circle.point_at(start + sweep),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Segment { a, b, .. } => (b - a).norm(),
            Piece::Arc { circle, sweep, .. } => circle.radius * sweep,
        }
    }

    /// Green's-theorem contributions `(area, ∫x dA, ∫y dA)` with coordinates
    /// taken relative to `origin`.
    fn green(&self, origin: &Vec2) -> (f64, f64, f64) {
        match *self {
            Piece::Segment { a, b, .. } => {
                let a = a - origin;
                let d = b - origin - a;
                let area = 0.5 * cross(&a, &(a + d));
                let mx = 0.5 * d.y * (a.x * a.x + a.x * d.x + d.x * d.x / 3.0);
                let my = -0.5 * d.x * (a.y * a.y + a.y * d.y + d.y * d.y / 3.0);
                (area, mx, my)
            }
            Piece::Arc { circle, start, sweep } => {
                let c = circle.center - origin;
                let r = circle.radius;
                let m = start + 0.5 * sweep;
                let h = 0.5 * sweep;
                let (s0, c0) = start.sin_cos();
                let (s1, c1) = (start + sweep).sin_cos();
                let dsin = 2.0 * m.cos() * h.sin();
                let dcos = -2.0 * m.sin() * h.sin();
                let dsin2 = 2.0 * (2.0 * m).cos() * (2.0 * h).sin();
                let area = 0.5 * (r * c.x * dsin - r * c.y * dcos + r * r * sweep);
                // ∫cos² and ∫sin² over the sweep
                let cos2 = 0.5 * sweep + 0.25 * dsin2;
                let sin2 = 0.5 * sweep - 0.25 * dsin2;
                // ∫cos³ = Δ(sin - sin³/3), ∫sin³ = Δ(-cos + cos³/3)
                let cos3 = dsin - dsin * (s1 * s1 + s1 * s0 + s0 * s0) / 3.0;
                let sin3 = -dcos + dcos * (c1 * c1 + c1 * c0 + c0 * c0) / 3.0;
                let mx = 0.5 * r * (c.x * c.x * dsin + 2.0 * c.x * r * cos2 + r * r * cos3);
                let my = 0.5 * r * (-c.y * c.y * dcos + 2.0 * c.y * r * sin2 + r * r * sin3);
                (area, mx, my)
            }
        }
    }
}

/// A convex region given by its closed, counterclockwise boundary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellShape {
    pub pieces: Vec<Piece>,
}

impl CellShape {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn from_polygon(poly: &ConvexPolygon) -> Self {
        let pieces = (0..poly.len())
            .map(|k| {
                let (a, b) = poly.edge(k);
                Piece::Segment { a, b, label: poly.labels[k] }
            })
            .collect();
        Self { pieces }
    }

    pub fn full_circle(circle: Circle) -> Self {
        Self { pieces: vec![Piece::Arc { circle, start: 0.0, sweep: TAU }] }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    fn reference(&self) -> Vec2 {
        self.pieces.first().map(|p| p.start_point()).unwrap_or_else(Vec2::zeros)
    }

    pub fn area(&self) -> f64 {
        self.area_and_moment().0
    }

    /// `(area, ∫x dA)`.
    pub fn area_and_moment(&self) -> (f64, Vec2) {
        if self.is_empty() {
            return (0.0, Vec2::zeros());
        }
        let o = self.reference();
        let (mut a, mut mx, mut my) = (0.0, 0.0, 0.0);
        for p in &self.pieces {
            let (da, dx, dy) = p.green(&o);
            a += da;
            mx += dx;
            my += dy;
        }
        (a, Vec2::new(mx, my) + o * a)
    }

    pub fn centroid(&self) -> Option<Vec2> {
        let (a, m) = self.area_and_moment();
        (a > 0.0).then(|| m / a)
    }

    /// Average of piece endpoints and arc midpoints; interior for convex shapes.
    pub fn interior_point(&self) -> Vec2 {
        let mut acc = Vec2::zeros();
        let mut count = 0.0;
        for p in &self.pieces {
            acc += p.start_point();
            count += 1.0;
            if let Piece::Arc { circle, start, sweep } = *p {
                for k in 1..4 {
                    acc += circle.point_at(start + sweep * k as f64 / 4.0);
                    count += 1.0;
                }
            }
        }
        acc / count
    }

    pub fn perimeter(&self) -> f64 {
        self.pieces.iter().map(Piece::length).sum()
    }

    /// Boundary as a closed polyline; arcs use at most `max_angle` radians per chord.
    pub fn polyline(&self, max_angle: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match *p {
                Piece::Segment { a, .. } => out.push(a),
                Piece::Arc { circle, start, sweep } => {
                    let steps = ((sweep / max_angle).ceil() as usize).max(1);
                    for k in 0..steps {
                        out.push(circle.point_at(start + sweep * k as f64 / steps as f64));
                    }
                }
            }
        }
        out
    }

    /// Closed containment with slack `eps`.
    pub fn contains(&self, x: &Vec2, eps: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        self.pieces.iter().all(|p| match *p {
            Piece::Segment { a, b, .. } => {
                let e = b - a;
                let len = e.norm();
                len == 0.0 || cross(&e, &(x - a)) >= -eps * len
            }
            Piece::Arc { circle, .. } => (x - circle.center).norm() <= circle.radius + eps,
        })
    }

    /// Exact box: piece endpoints plus the axis extremes of every arc.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        let mut add = |v: Vec2| {
            lo = lo.inf(&v);
            hi = hi.sup(&v);
        };
        for piece in &self.pieces {
            add(piece.start_point());
            add(piece.end_point());
            if let Piece::Arc { circle, start, sweep } = *piece {
                let first = (start / FRAC_PI_2).ceil() as i64;
                let mut k = first;
                while k as f64 * FRAC_PI_2 <= start + sweep {
                    add(circle.point_at(k as f64 * FRAC_PI_2));
                    k += 1;
                }
            }
        }
        (lo, hi)
    }
}

/// Intersection of a convex polygon with a closed disk.
pub fn polygon_disk_intersection(poly: &ConvexPolygon, circle: &Circle) -> CellShape {
    if poly.is_empty() {
        return CellShape::empty();
    }
    let r2 = circle.radius * circle.radius;
    let mut segments: Vec<Piece> = Vec::new();
    for k in 0..poly.len() {
        let (a, b) = poly.edge(k);
        let d = b - a;
        let f = a - circle.center;
        let qa = d.dot(&d);
        if qa == 0.0 {
            continue;
        }
        let qb = 2.0 * f.dot(&d);
        let qc = f.dot(&f) - r2;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        // numerically stable roots
        let q = -0.5 * (qb + qb.signum() * sq);
        let (mut t0, mut t1) = if q == 0.0 {
            (-sq / (2.0 * qa), sq / (2.0 * qa))
        } else {
            let u = q / qa;
            let v = qc / q;
            (u.min(v), u.max(v))
        };
        t0 = t0.max(0.0);
        t1 = t1.min(1.0);
        if t1 - t0 <= 1e-15 {
            continue;
        }
        let pa = if t0 == 0.0 { a } else { a + d * t0 };
        let pb = if t1 == 1.0 { b } else { a + d * t1 };
        segments.push(Piece::Segment { a: pa, b: pb, label: poly.labels[k] });
    }
    if segments.is_empty() {
        return if poly.contains(&circle.center, 0.0) {
            CellShape::full_circle(*circle)
        } else {
            CellShape::empty()
        };
    }
    let mut pieces = Vec::with_capacity(segments.len() * 2);
    let m = segments.len();
    for k in 0..m {
        let seg = segments[k];
        pieces.push(seg);
        let end = seg.end_point();
        let next_start = segments[(k + 1) % m].start_point();
        if (end - next_start).norm() > 1e-13 {
            let start = circle.angle_of(&end);
            let mut sweep = (circle.angle_of(&next_start) - start).rem_euclid(TAU);
            if m == 1 && sweep == 0.0 {
                sweep = TAU;
            }
            pieces.push(Piece::Arc { circle: *circle, start, sweep });
        }
    }
    let shape = CellShape { pieces };
    if shape.area() <= 0.0 {
        CellShape::empty()
    } else {
        shape
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::rectangle(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0))
    }

    #[test]
    fn square_area_and_centroid() {
        let sq = unit_square();
        assert_abs_diff_eq!(sq.area(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.centroid(), Vec2::new(0.5, 0.5), epsilon = 1e-15);
        let shape = CellShape::from_polygon(&sq);
        let (a, m) = shape.area_and_moment();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m, Vec2::new(0.5, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn clip_labels_new_edge() {
        let hp = HalfPlane::new(Vec2::new(1.0, 0.0), 0.25);
        let clipped = unit_square().clip(&hp, EdgeLabel::Site(7));
        assert_abs_diff_eq!(clipped.area(), 0.25, epsilon = 1e-15);
        let site_edges: Vec<_> = (0..clipped.len())
            .filter(|&k| clipped.labels[k] == EdgeLabel::Site(7))
            .map(|k| clipped.edge(k))
            .collect();
        assert_eq!(site_edges.len(), 1);
        let (a, b) = site_edges[0];
        assert_abs_diff_eq!(a.x, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn clip_away_everything() {
        let hp = HalfPlane::new(Vec2::new(1.0, 0.0), -1.0);
        assert!(unit_square().clip(&hp, EdgeLabel::Site(0)).is_empty());
        let hp = HalfPlane::new(Vec2::new(1.0, 0.0), 2.0);
        assert_eq!(unit_square().clip(&hp, EdgeLabel::Site(0)), unit_square());
    }

    #[test]
    fn full_disk_area_and_moment() {
        let c = Circle { center: Vec2::new(0.3, -0.2), radius: 0.7 };
        let shape = CellShape::full_circle(c);
        let (a, m) = shape.area_and_moment();
        assert_abs_diff_eq!(a, PI * 0.49, epsilon = 1e-14);
        assert_abs_diff_eq!(m / a, c.center, epsilon = 1e-14);
    }

    #[test]
    fn half_disk_from_clip() {
        let c = Circle { center: Vec2::zeros(), radius: 1.0 };
        let box_ = ConvexPolygon::rectangle(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0));
        let half = box_.clip(&HalfPlane::new(Vec2::new(0.0, -1.0), 0.0), EdgeLabel::Site(1));
        let shape = polygon_disk_intersection(&half, &c);
        let (a, m) = shape.area_and_moment();
        assert_abs_diff_eq!(a, PI / 2.0, epsilon = 1e-14);
        // centroid of a half disk: 4/(3π)
        assert_abs_diff_eq!(m.y / a, 4.0 / (3.0 * PI), epsilon = 1e-14);
        assert_abs_diff_eq!(m.x / a, 0.0, epsilon = 1e-14);
        assert_eq!(shape.pieces.len(), 2);
    }

    #[test]
    fn polygon_inside_disk_is_unchanged() {
        let c = Circle { center: Vec2::new(0.5, 0.5), radius: 2.0 };
        let shape = polygon_disk_intersection(&unit_square(), &c);
        assert_eq!(shape.pieces.len(), 4);
        assert_abs_diff_eq!(shape.area(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_polygon_and_disk() {
        let c = Circle { center: Vec2::new(5.0, 5.0), radius: 1.0 };
        assert!(polygon_disk_intersection(&unit_square(), &c).is_empty());
    }

    #[test]
    fn circular_segment_area() {
        // chord at height h of the unit disk: area = acos(h) - h sqrt(1-h²)
        let c = Circle { center: Vec2::zeros(), radius: 1.0 };
        for &h in &[0.0, 0.3, 0.9, 0.999] {
            let poly = ConvexPolygon::rectangle(Vec2::new(-3.0, h), Vec2::new(3.0, 3.0));
            let shape = polygon_disk_intersection(&poly, &c);
            let expect = h.acos() - h * (1.0 - h * h).sqrt();
            assert_abs_diff_eq!(shape.area(), expect, epsilon = 1e-14);
        }
    }
}
