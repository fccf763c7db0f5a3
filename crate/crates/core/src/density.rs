//! Curvature densities `K` on the source domain and their total mass.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{unit_ball_volume, Domain};
use crate::expr::{Expr, Var};
use crate::geometry::{CellShape, Vec2};
use crate::quadrature::{integrate_shape, integrate_shape_moments, triangle_rule, QuadratureError, QuadratureOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("decay exponent δ = {0} makes d^-δ non-integrable near the boundary")]
    NonIntegrable(f64),
    #[error("K = {value} < 0 at ({x}, {y})")]
    Negative { value: f64, x: f64, y: f64 },
    #[error("K = {value} violates the bounds [{lower}, {upper}] at ({x}, {y})")]
    Bounds { value: f64, lower: f64, upper: f64, x: f64, y: f64 },
    #[error("K = {value} exceeds C0 d^-δ = {bound} at ({x}, {y})")]
    Decay { value: f64, bound: f64, x: f64, y: f64 },
    #[error("K vanishes at every sampled node of the domain")]
    Vanishing,
}

/// `K(x) <= c0 d(x, ∂Ω)^-δ` wherever `d(x, ∂Ω) < r0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayBound {
    pub c0: f64,
    pub delta: f64,
    pub r0: f64,
}

type DensityFn = dyn Fn(&Vec2, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum DensityKind {
    Constant(f64),
    Expr(Expr),
    /// Closure of `(x, d(x, ∂Ω))`; the flag tells whether `d` is read.
    Custom(Arc<DensityFn>, bool),
}

impl fmt::Debug for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::Constant(c) => write!(f, "Constant({c})"),
            DensityKind::Expr(e) => write!(f, "{e:?}"),
            DensityKind::Custom(..) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SourceDensity {
    pub kind: DensityKind,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub decay: Option<DecayBound>,
}

impl SourceDensity {
    pub fn constant(value: f64) -> Self {
        Self::from_kind(DensityKind::Constant(value))
    }

    pub fn expr(expr: Expr) -> Self {
        Self::from_kind(DensityKind::Expr(expr))
    }

    pub fn custom<F>(f: F, uses_distance: bool) -> Self
    where
        F: Fn(&Vec2, f64) -> f64 + Send + Sync + 'static,
    {
        Self::from_kind(DensityKind::Custom(Arc::new(f), uses_distance))
    }

    fn from_kind(kind: DensityKind) -> Self {
        Self { kind, lower: None, upper: None, decay: None }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    pub fn with_decay(mut self, decay: DecayBound) -> Self {
        self.decay = Some(decay);
        self
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            DensityKind::Constant(c) => Some(c),
            _ => None,
        }
    }

    fn needs_distance(&self) -> bool {
        match &self.kind {
            DensityKind::Constant(_) => false,
            DensityKind::Expr(e) => e.uses(Var::Dist),
            DensityKind::Custom(_, d) => *d,
        }
    }

    pub fn eval(&self, domain: &Domain, x: &Vec2) -> f64 {
        match &self.kind {
            DensityKind::Constant(c) => *c,
            DensityKind::Expr(e) => {
                let d = if self.needs_distance() { domain.signed_distance(x) } else { 0.0 };
                e.eval(x.x, x.y, d)
            }
            DensityKind::Custom(f, uses_d) => {
                let d = if *uses_d { domain.signed_distance(x) } else { 0.0 };
                f(x, d)
            }
        }
    }

    fn check_integrable(&self) -> Result<(), DensityError> {
        match self.decay {
            Some(b) if b.delta >= 1.0 => Err(DensityError::NonIntegrable(b.delta)),
            _ => Ok(()),
        }
    }

    /// `∫_shape K dx`; exact for constant densities.
    pub fn integrate(&self, domain: &Domain, shape: &CellShape, opts: &QuadratureOptions) -> Result<f64, DensityError> {
        if let Some(c) = self.as_constant() {
            return Ok(c * shape.area());
        }
        self.check_integrable()?;
        Ok(integrate_shape(&|x: &Vec2| self.eval(domain, x), shape, opts)?)
    }

    /// `(∫ K dx, ∫ x K dx)` over the shape.
    pub fn integrate_with_moment(
        &self,
        domain: &Domain,
        shape: &CellShape,
        opts: &QuadratureOptions,
    ) -> Result<(f64, Vec2), DensityError> {
        if let Some(c) = self.as_constant() {
            let (a, m) = shape.area_and_moment();
            return Ok((c * a, m * c));
        }
        self.check_integrable()?;
        let [mass, mx, my] = integrate_shape_moments(&|x: &Vec2| self.eval(domain, x), shape, opts)?;
        Ok((mass, Vec2::new(mx, my)))
    }

    /// Pointwise hypotheses at a fixed set of sample nodes: non-negativity,
    /// the optional bounds `λ₁ <= K <= λ₂`, and the optional decay bound.
    pub fn validate(&self, domain: &Domain) -> Result<(), DensityError> {
        self.check_integrable()?;
        let mut any_positive = false;
        for x in sample_nodes(domain) {
            let value = self.eval(domain, &x);
            if !(value >= 0.0) {
                return Err(DensityError::Negative { value, x: x.x, y: x.y });
            }
            any_positive |= value > 0.0;
            if let (Some(lower), Some(upper)) = (self.lower, self.upper) {
                if value < lower || value > upper {
                    return Err(DensityError::Bounds { value, lower, upper, x: x.x, y: x.y });
                }
            }
            if let Some(b) = self.decay {
                let d = domain.signed_distance(&x);
                if d > 0.0 && d < b.r0 {
                    let bound = b.c0 * d.powf(-b.delta);
                    if value > bound * (1.0 + 1e-12) {
                        return Err(DensityError::Decay { value, bound, x: x.x, y: x.y });
                    }
                }
            }
        }
        if !any_positive {
            return Err(DensityError::Vanishing);
        }
        Ok(())
    }
}

/// Seven-point nodes of a uniformly refined fan triangulation plus points
/// graded geometrically towards the boundary.
fn sample_nodes(domain: &Domain) -> Vec<Vec2> {
    let ring = domain.shape().polyline(0.05);
    let c = ring.iter().fold(Vec2::zeros(), |a, v| a + v) / ring.len() as f64;
    let rule = triangle_rule();
    let levels = 8usize;
    let mut out = Vec::new();
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        for i in 0..levels {
            for j in 0..levels - i {
                let corners = |u: usize, v: usize| c + (a - c) * (u as f64 / levels as f64) + (b - c) * (v as f64 / levels as f64);
                let tris = [[corners(i, j), corners(i + 1, j), corners(i, j + 1)]];
                let mut all = tris.to_vec();
                if i + j + 2 <= levels {
                    all.push([corners(i + 1, j), corners(i + 1, j + 1), corners(i, j + 1)]);
                }
                for t in all {
                    for (l, _) in rule {
                        out.push(t[0] * l[0] + t[1] * l[1] + t[2] * l[2]);
                    }
                }
            }
        }
    }
    for z in domain.boundary_samples(64) {
        let dir = (c - z).normalize();
        for k in 1..30 {
            out.push(z + dir * 0.5f64.powi(k));
        }
    }
    out.retain(|x| domain.signed_distance(x) > 0.0);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassRegime {
    Subcritical,
    Critical,
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassReport {
    pub mass: f64,
    pub regime: MassRegime,
}

/// `∫_Ω K dx`, classified against `ω₂ = π`.
pub fn total_mass(domain: &Domain, density: &SourceDensity, tol: f64) -> Result<MassReport, DensityError> {
    let mass = density.integrate(domain, &domain.shape(), &QuadratureOptions::with_tol(tol))?;
    Ok(MassReport { mass, regime: classify_mass(mass, tol) })
}

pub fn classify_mass(mass: f64, tol: f64) -> MassRegime {
    let omega = unit_ball_volume(2);
    if (mass - omega).abs() <= tol {
        MassRegime::Critical
    } else if mass > omega + tol {
        MassRegime::Infeasible
    } else {
        MassRegime::Subcritical
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ConvexPolygonDomain, DiskDomain};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn mass_examples() {
        let unit: Domain = DiskDomain::unit().into();
        let r = total_mass(&unit, &SourceDensity::constant(1.0), 1e-10).unwrap();
        assert_relative_eq!(r.mass, PI, max_relative = 1e-14);
        assert_eq!(r.regime, MassRegime::Critical);
        let small: Domain = DiskDomain::new(Vec2::zeros(), 0.6).unwrap().into();
        let r = total_mass(&small, &SourceDensity::constant(1.0), 1e-10).unwrap();
        assert_relative_eq!(r.mass, 0.36 * PI, max_relative = 1e-14);
        assert_eq!(r.regime, MassRegime::Subcritical);
        let r = total_mass(&unit, &SourceDensity::constant(1.1), 1e-10).unwrap();
        assert_eq!(r.regime, MassRegime::Infeasible);
    }

    #[test]
    fn smooth_density_on_disk() {
        // ∫_{B_1} (1 + x1²) dx = π + π/4
        let unit: Domain = DiskDomain::unit().into();
        let k = SourceDensity::expr(Expr::parse("1 + x1^2").unwrap());
        let r = total_mass(&unit, &k, 1e-11).unwrap();
        assert_relative_eq!(r.mass, 1.25 * PI, max_relative = 1e-10);
    }

    #[test]
    fn singular_density_on_square() {
        // ∫_{[0,1]²} x1^{-1/2} dx = 2
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        let k = SourceDensity::custom(|x, _| x.x.powf(-0.5), false);
        let r = total_mass(&sq, &k, 1e-7).unwrap();
        assert!((r.mass - 2.0).abs() < 1e-6, "{}", r.mass);
    }

    #[test]
    fn singular_density_on_disk() {
        // ∫_{B_1} (1-|x|)^{-1/2} dx = 2π ∫_0^1 r (1-r)^{-1/2} dr = 2π · 4/3
        let unit: Domain = DiskDomain::unit().into();
        let k = SourceDensity::custom(|_, d| d.powf(-0.5), true)
            .with_decay(DecayBound { c0: 1.0, delta: 0.5, r0: 1.0 });
        let r = total_mass(&unit, &k, 1e-7).unwrap();
        assert!((r.mass - 8.0 * PI / 3.0).abs() < 1e-6, "{}", r.mass);
        k.validate(&unit).unwrap();
    }

    #[test]
    fn non_integrable_decay_is_an_error() {
        let unit: Domain = DiskDomain::unit().into();
        let k = SourceDensity::custom(|_, d| 1.0 / d, true).with_decay(DecayBound { c0: 1.0, delta: 1.0, r0: 1.0 });
        assert!(matches!(total_mass(&unit, &k, 1e-6), Err(DensityError::NonIntegrable(_))));
    }

    #[test]
    fn validators() {
        let sq: Domain = ConvexPolygonDomain::unit_square().into();
        SourceDensity::constant(1.0).with_bounds(0.5, 2.0).validate(&sq).unwrap();
        let k = SourceDensity::expr(Expr::parse("1 + x1").unwrap()).with_bounds(1.0, 1.5);
        assert!(matches!(k.validate(&sq), Err(DensityError::Bounds { .. })));
        let neg = SourceDensity::expr(Expr::parse("x1 - 0.5").unwrap());
        assert!(matches!(neg.validate(&sq), Err(DensityError::Negative { .. })));
        let zero = SourceDensity::constant(0.0);
        assert!(matches!(zero.validate(&sq), Err(DensityError::Vanishing)));
        let k = SourceDensity::expr(Expr::parse("2 * d^-0.5").unwrap()).with_decay(DecayBound { c0: 1.0, delta: 0.5, r0: 0.3 });
        assert!(matches!(k.validate(&sq), Err(DensityError::Decay { .. })));
    }

    #[test]
    fn mass_is_additive_over_halves() {
        let unit: Domain = DiskDomain::unit().into();
        let k = SourceDensity::expr(Expr::parse("exp(x1) * (1 + x2^2)").unwrap());
        let opts = QuadratureOptions::with_tol(1e-12);
        let whole = k.integrate(&unit, &unit.shape(), &opts).unwrap();
        let h = crate::geometry::HalfPlane::new(Vec2::new(0.3, 1.0), 0.2);
        let big = unit.initial_polygon();
        let left = unit.restrict_clipped(&big.clip(&h, crate::geometry::EdgeLabel::Site(1)));
        let hn = crate::geometry::HalfPlane::new(-h.normal, -h.offset);
        let right = unit.restrict_clipped(&big.clip(&hn, crate::geometry::EdgeLabel::Site(0)));
        let parts = k.integrate(&unit, &left, &opts).unwrap() + k.integrate(&unit, &right, &opts).unwrap();
        assert_relative_eq!(parts, whole, max_relative = 1e-8);
    }
}
