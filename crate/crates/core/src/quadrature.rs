//! Adaptive quadrature on triangles and on curved sectors bounded by a
//! circular arc.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{cross, CellShape, Circle, Piece, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge (estimated error {estimate:.3e}, target {target:.3e})")]
    NotConverged { estimate: f64, target: f64 },
    #[error("integrand returned a non-finite value at ({x}, {y})")]
    NonFinite { x: f64, y: f64 },
}

/// Per-call controls for the adaptive integrators.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureOptions {
    /// Absolute error target for the whole integral.
    pub tol: f64,
    /// Relative error target; the effective target is the larger of the two.
    pub rel_tol: f64,
    /// Upper bound on the number of panels kept in the adaptive queue.
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { tol: 1e-10, rel_tol: 1e-13, max_panels: 200_000 }
    }
}

impl QuadratureOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Radon's seven-point rule, exact for degree 5. Barycentric nodes with
/// weights summing to one.
pub fn triangle_rule() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

fn checked(v: f64, x: &Vec2) -> Result<f64, QuadratureError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadratureError::NonFinite { x: x.x, y: x.y })
    }
}

/// Straight or circular base of a fan panel, parametrised over `t ∈ [0, 1]`.
#[derive(Clone, Copy, Debug)]
enum Base {
    Line(Vec2, Vec2),
    Arc { circle: Circle, start: f64, sweep: f64 },
}

impl Base {
    fn at(&self, t: f64) -> (Vec2, Vec2) {
        match *self {
            Base::Line(a, b) => (a + (b - a) * t, b - a),
            Base::Arc { circle, start, sweep } => {
                let (sn, cs) = (start + sweep * t).sin_cos();
                (circle.center + Vec2::new(cs, sn) * circle.radius, Vec2::new(-sn, cs) * (circle.radius * sweep))
            }
        }
    }
}

/// `x = apex + s(u) (base(t) - apex)` with the graded radial map
/// `s(u) = 1 - (1 - u)²`, which tames integrable blow-up at the base.
#[derive(Clone, Copy, Debug)]
struct Panel {
    apex: Vec2,
    base: Base,
    u: (f64, f64),
    t: (f64, f64),
}

/// Integral of `(f, x f, y f)` plus estimated errors of `f` in each direction.
struct Estimate {
    value: [f64; 3],
    err_u: f64,
    err_t: f64,
}

struct Rules {
    fine: Vec<(f64, f64)>,
    coarse: Vec<(f64, f64)>,
}

impl Panel {
    fn sum<F: Fn(&Vec2) -> f64>(&self, f: &F, ru: &[(f64, f64)], rt: &[(f64, f64)]) -> Result<[f64; 3], QuadratureError> {
        let (du, dt) = (self.u.1 - self.u.0, self.t.1 - self.t.0);
        let mut acc = [0.0; 3];
        for &(xt, wt) in rt {
            let (g, dg) = self.base.at(self.t.0 + dt * xt);
            let rel = g - self.apex;
            let jt = cross(&rel, &dg).abs();
            for &(xu, wu) in ru {
                let v = 1.0 - (self.u.0 + du * xu);
                let s = 1.0 - v * v;
                let x = self.apex + rel * s;
                let w = wt * wu * jt * s * 2.0 * v * checked(f(&x), &x)?;
                acc[0] += w;
                acc[1] += w * x.x;
                acc[2] += w * x.y;
            }
        }
        Ok(acc.map(|a| a * du * dt))
    }

    fn estimate<F: Fn(&Vec2) -> f64>(&self, f: &F, r: &Rules) -> Result<Estimate, QuadratureError> {
        let value = self.sum(f, &r.fine, &r.fine)?;
        let cu = self.sum(f, &r.coarse, &r.fine)?[0];
        let ct = self.sum(f, &r.fine, &r.coarse)?[0];
        Ok(Estimate { value, err_u: (value[0] - cu).abs(), err_t: (value[0] - ct).abs() })
    }

    fn split(&self, radial: bool) -> [Panel; 2] {
        let mut a = *self;
        let mut b = *self;
        if radial {
            let m = 0.5 * (self.u.0 + self.u.1);
            a.u.1 = m;
            b.u.0 = m;
        } else {
            let m = 0.5 * (self.t.0 + self.t.1);
            a.t.1 = m;
            b.t.0 = m;
        }
        [a, b]
    }
}

struct Scored {
    err: f64,
    est: Estimate,
    panel: Panel,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Scored {}
impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn scored<F: Fn(&Vec2) -> f64>(f: &F, panel: Panel, rules: &Rules) -> Result<Scored, QuadratureError> {
    let est = panel.estimate(f, rules)?;
    Ok(Scored { err: est.err_u + est.err_t, est, panel })
}

/// Global adaptive driver: always bisects the panel with the largest error
/// estimate, along its worse direction, until the summed estimate drops below
/// the tolerance.
fn adaptive<F: Fn(&Vec2) -> f64>(f: &F, panels: Vec<Panel>, opts: &QuadratureOptions) -> Result<[f64; 3], QuadratureError> {
    let rules = Rules { fine: gauss_legendre(RULE_POINTS), coarse: gauss_legendre(RULE_POINTS / 2) };
    let mut heap = std::collections::BinaryHeap::with_capacity(panels.len() * 4);
    let mut total_err = 0.0;
    let mut total = 0.0;
    for p in panels {
        let s = scored(f, p, &rules)?;
        total_err += s.err;
        total += s.est.value[0];
        heap.push(s);
    }
    let target = |total: f64| opts.tol.max(opts.rel_tol * total.abs());
    while total_err > target(total) {
        if heap.len() >= opts.max_panels {
            // drop accumulated round-off before giving up
            total_err = heap.iter().map(|s| s.err).sum();
            total = heap.iter().map(|s| s.est.value[0]).sum();
            if total_err <= target(total) {
                break;
            }
            return Err(QuadratureError::NotConverged { estimate: total_err, target: target(total) });
        }
        let Some(worst) = heap.pop() else { break };
        total_err -= worst.err;
        total -= worst.est.value[0];
        for ch in worst.panel.split(worst.est.err_u >= worst.est.err_t) {
            let s = scored(f, ch, &rules)?;
            total_err += s.err;
            total += s.est.value[0];
            heap.push(s);
        }
    }
    // fixed-order summation keeps results independent of heap layout
    let mut parts: Vec<(f64, [f64; 3])> = heap.into_iter().map(|s| (s.err, s.est.value)).collect();
    parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[0].total_cmp(&b.1[0])));
    let mut out = [0.0; 3];
    for (_, v) in parts {
        for k in 0..3 {
            out[k] += v[k];
        }
    }
    Ok(out)
}

const RULE_POINTS: usize = 6;

fn full(apex: Vec2, base: Base) -> Panel {
    Panel { apex, base, u: (0.0, 1.0), t: (0.0, 1.0) }
}

/// Integral of `f` over the triangle `abc`, graded towards the edge `bc`.
pub fn integrate_triangle<F>(f: &F, a: Vec2, b: Vec2, c: Vec2, opts: &QuadratureOptions) -> Result<f64, QuadratureError>
where
    F: Fn(&Vec2) -> f64,
{
    Ok(adaptive(f, vec![full(a, Base::Line(b, c))], opts)?[0])
}

fn shape_panels(shape: &CellShape) -> Vec<Panel> {
    let apex = shape.interior_point();
    let mut panels = Vec::new();
    for piece in &shape.pieces {
        match *piece {
            Piece::Segment { a, b, .. } => {
                if cross(&(a - apex), &(b - apex)) > 0.0 {
                    panels.push(full(apex, Base::Line(a, b)));
                }
            }
            Piece::Arc { circle, start, sweep } => {
                // at most a quarter turn per panel
                let count = ((sweep / (0.5 * PI)).ceil() as usize).max(1);
                let h = sweep / count as f64;
                for k in 0..count {
                    panels.push(full(apex, Base::Arc { circle, start: start + h * k as f64, sweep: h }));
                }
            }
        }
    }
    panels
}

/// Integral of `f` over a convex [`CellShape`], fanning from an interior
/// point. Each fan panel is graded towards the cell boundary.
pub fn integrate_shape<F>(f: &F, shape: &CellShape, opts: &QuadratureOptions) -> Result<f64, QuadratureError>
where
    F: Fn(&Vec2) -> f64,
{
    Ok(integrate_shape_moments(f, shape, opts)?[0])
}

/// `(∫ f, ∫ x₁ f, ∫ x₂ f)` over the shape; the tolerance applies to `∫ f`.
pub fn integrate_shape_moments<F>(f: &F, shape: &CellShape, opts: &QuadratureOptions) -> Result<[f64; 3], QuadratureError>
where
    F: Fn(&Vec2) -> f64,
{
    if shape.is_empty() {
        return Ok([0.0; 3]);
    }
    adaptive(f, shape_panels(shape), opts)
}

/// Line integral of `f` along the segment `ab` by adaptive Gauss-Legendre.
pub fn integrate_segment<F>(f: &F, a: Vec2, b: Vec2, tol: f64) -> Result<f64, QuadratureError>
where
    F: Fn(&Vec2) -> f64,
{
    let rule = gauss_legendre(5);
    let len = (b - a).norm();
    let once = |t0: f64, t1: f64| -> Result<f64, QuadratureError> {
        let mut acc = 0.0;
        for &(u, w) in &rule {
            let x = a + (b - a) * (t0 + (t1 - t0) * u);
            acc += w * checked(f(&x), &x)?;
        }
        Ok(acc * (t1 - t0) * len)
    };
    fn go<G: Fn(f64, f64) -> Result<f64, QuadratureError>>(
        once: &G,
        t0: f64,
        t1: f64,
        coarse: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64, QuadratureError> {
        let m = 0.5 * (t0 + t1);
        let (l, r) = (once(t0, m)?, once(m, t1)?);
        if (l + r - coarse).abs() <= tol || depth > 40 {
            return Ok(l + r);
        }
        Ok(go(once, t0, m, l, 0.5 * tol, depth + 1)? + go(once, m, t1, r, 0.5 * tol, depth + 1)?)
    }
    let coarse = once(0.0, 1.0)?;
    go(&once, 0.0, 1.0, coarse, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use approx::assert_relative_eq;

    fn triangle_once<F: Fn(&Vec2) -> f64>(f: &F, a: &Vec2, b: &Vec2, c: &Vec2) -> Result<f64, QuadratureError> {
        let area = 0.5 * cross(&(b - a), &(c - a)).abs();
        let mut acc = 0.0;
        for (l, w) in triangle_rule() {
            let x = a * l[0] + b * l[1] + c * l[2];
            acc += w * checked(f(&x), &x)?;
        }
        Ok(acc * area)
    }

    #[test]
    fn seven_point_rule_is_degree_five() {
        // ∫_T x^i y^j over the reference triangle = i! j! / (i+j+2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        let c = Vec2::new(0.0, 1.0);
        for i in 0..=5u32 {
            for j in 0..=(5 - i) {
                let f = |x: &Vec2| x.x.powi(i as i32) * x.y.powi(j as i32);
                let got = triangle_once(&f, &a, &b, &c).unwrap();
                let exact = fact(i) * fact(j) / fact(i + j + 2);
                assert_relative_eq!(got, exact, max_relative = 1e-13);
            }
        }
        let f = |x: &Vec2| x.x.powi(6);
        let got = triangle_once(&f, &a, &b, &c).unwrap();
        assert!((got - fact(6) / fact(8)).abs() > 1e-8);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(6);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(11)).sum();
        assert_relative_eq!(s, 1.0 / 12.0, max_relative = 1e-13);
        let sum_w: f64 = rule.iter().map(|r| r.1).sum();
        assert_relative_eq!(sum_w, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_triangle_handles_edge_singularity() {
        // ∫_0^1∫_0^{1-x} y^{-1/2} dy dx = ∫_0^1 2 sqrt(1-x) dx = 4/3
        let f = |x: &Vec2| x.y.powf(-0.5);
        let opts = QuadratureOptions::with_tol(1e-7);
        let v = integrate_triangle(&f, Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), &opts).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn shape_integral_matches_exact_area_and_moments() {
        let circle = Circle { center: Vec2::new(0.2, 0.1), radius: 0.9 };
        let poly = ConvexPolygon::rectangle(Vec2::new(-0.3, -2.0), Vec2::new(3.0, 0.5));
        let shape = crate::geometry::polygon_disk_intersection(&poly, &circle);
        let (area, m) = shape.area_and_moment();
        let opts = QuadratureOptions::with_tol(1e-12);
        assert_relative_eq!(integrate_shape(&|_| 1.0, &shape, &opts).unwrap(), area, max_relative = 1e-11);
        assert_relative_eq!(integrate_shape(&|x| x.x, &shape, &opts).unwrap(), m.x, max_relative = 1e-10);
        assert_relative_eq!(integrate_shape(&|x| x.y, &shape, &opts).unwrap(), m.y, max_relative = 1e-10);
    }

    #[test]
    fn segment_integral() {
        let v = integrate_segment(&|x: &Vec2| x.x * x.x, Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0), 1e-12).unwrap();
        // ∫_0^1 (3t)^2 · 5 dt = 15
        assert_relative_eq!(v, 15.0, max_relative = 1e-13);
    }
}
