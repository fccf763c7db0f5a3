//! Pointwise geometry of the lower hemisphere `S^n_- = {ȳ ∈ S^n : y_{n+1} < 0}`
//! seen through the gradient chart `ȳ ↦ -y / y_{n+1}`.
//!
//! The cost is `c(x, ȳ) = <x, y / y_{n+1}>`. Because `-D_x c(x, ȳ)` does not
//! depend on `x`, the c-exponential is the same map at every source point:
//! `p ↦ (p, -1) / sqrt(1 + |p|²)`.
//!
//! Equator points (`y_{n+1} = 0`) are not representable; they correspond to
//! `|p| → ∞` in the chart.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::target::TargetRegion;

/// Tolerance on `|ȳ|² = 1` accepted by [`HemispherePoint::new`].
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("point is not on the unit sphere (|ȳ|² - 1 = {0:.3e})")]
    NotUnit(f64),
    #[error("point is not in the open lower hemisphere (y_last = {0})")]
    NotLower(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Ambient source dimension `n` (the sphere is `S^n ⊂ R^{n+1}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dimension(usize);

impl Dimension {
    pub const PLANE: Dimension = Dimension(2);

    pub fn new(n: usize) -> Option<Self> {
        (n >= 1).then_some(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// Unit vector `(y, y_last)` with `y_last < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HemispherePoint {
    y: DVector<f64>,
    y_last: f64,
}

impl HemispherePoint {
    pub fn new(y: DVector<f64>, y_last: f64) -> Result<Self, SphereError> {
        if !y_last.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(SphereError::NonFinite);
        }
        let dev = y.norm_squared() + y_last * y_last - 1.0;
        if dev.abs() > UNIT_TOL {
            return Err(SphereError::NotUnit(dev));
        }
        if y_last >= 0.0 {
            return Err(SphereError::NotLower(y_last));
        }
        Ok(Self { y, y_last })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self, SphereError> {
        let (last, head) = coords.split_last().ok_or(SphereError::Dimension { expected: 2, got: 0 })?;
        Self::new(DVector::from_column_slice(head), *last)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn y_last(&self) -> f64 {
        self.y_last
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Full coordinates in `R^{n+1}`.
    pub fn to_ambient(&self) -> DVector<f64> {
        let n = self.y.len();
        DVector::from_fn(n + 1, |i, _| if i < n { self.y[i] } else { self.y_last })
    }

    /// Great-circle distance.
    pub fn angle_to(&self, other: &HemispherePoint) -> f64 {
        let d = self.y.dot(&other.y) + self.y_last * other.y_last;
        // atan2 form stays accurate for nearby points
        let a = self.to_ambient();
        let b = other.to_ambient();
        let cr = (&a - &b * d).norm();
        cr.atan2(d)
    }
}

/// A point of the gradient plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartVector(pub DVector<f64>);

impl ChartVector {
    pub fn new(p: DVector<f64>) -> Self {
        Self(p)
    }

    pub fn from_slice(p: &[f64]) -> Self {
        Self(DVector::from_column_slice(p))
    }

    pub fn planar(p: Vec2) -> Self {
        Self::from_slice(&[p.x, p.y])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vec2(&self) -> Option<Vec2> {
        (self.0.len() == 2).then(|| Vec2::new(self.0[0], self.0[1]))
    }
}

/// `c(x, ȳ) = <x, y> / y_last`.
pub fn cost(x: &DVector<f64>, ybar: &HemispherePoint) -> f64 {
    x.dot(&ybar.y) / ybar.y_last
}

/// `p ↦ (p, -1) / sqrt(1 + |p|²)`.
pub fn c_exp(p: &ChartVector) -> HemispherePoint {
    let s = (1.0 + p.0.norm_squared()).sqrt();
    HemispherePoint { y: &p.0 / s, y_last: -1.0 / s }
}

/// Planar specialisation of [`c_exp`] returning ambient coordinates.
#[inline]
pub fn c_exp2(p: &Vec2) -> [f64; 3] {
    let s = (1.0 + p.norm_squared()).sqrt();
    [p.x / s, p.y / s, -1.0 / s]
}

/// Inverse of [`c_exp`]: `ȳ ↦ -y / y_last`.
pub fn chart(ybar: &HemispherePoint) -> ChartVector {
    ChartVector(&ybar.y / -ybar.y_last)
}

/// `(1 + |p|²)^{-(n+2)/2}`: the pull-back of `-y_{n+1} dVol` to the chart.
pub fn chart_density(p: &ChartVector, n: Dimension) -> f64 {
    chart_density_sq(p.0.norm_squared(), n)
}

#[inline]
pub fn chart_density_sq(norm_sq: f64, n: Dimension) -> f64 {
    (1.0 + norm_sq).powf(-0.5 * (n.0 as f64 + 2.0))
}

/// Round metric of the hemisphere in the chart,
/// `g_ij = (δ_ij (1+|p|²) - p_i p_j) / (1+|p|²)²`.
pub fn metric_in_chart(p: &ChartVector) -> DMatrix<f64> {
    let n = p.dim();
    let q = 1.0 + p.0.norm_squared();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { q } else { 0.0 };
        (delta - p.0[i] * p.0[j]) / (q * q)
    })
}

/// Area factor of the graph map `x ↦ (x, u(x))`.
pub fn graph_area_jacobian(grad: &DVector<f64>) -> f64 {
    (1.0 + grad.norm_squared()).sqrt()
}

/// `det(D²u) / (1 + |∇u|²)^{(n+2)/2}`.
pub fn gauss_curvature(hessian: &DMatrix<f64>, grad: &DVector<f64>) -> f64 {
    let n = grad.len() as f64;
    hessian.determinant() / (1.0 + grad.norm_squared()).powf(0.5 * (n + 2.0))
}

/// Distance of `c_exp((1-t) p0 + t p1)` from the plane spanned by
/// `c_exp(p0)` and `c_exp(p1)`: the norm of its component along an
/// orthonormal basis of the normal space. Zero when the endpoints coincide.
pub fn great_circle_deviation(p0: &ChartVector, p1: &ChartVector, t: f64) -> f64 {
    let y0 = c_exp(p0).to_ambient();
    let y1 = c_exp(p1).to_ambient();
    let m = y0.len();
    let pt = ChartVector(&p0.0 * (1.0 - t) + &p1.0 * t);
    let v = c_exp(&pt).to_ambient();

    // Gram-Schmidt completion of span(ȳ0, ȳ1) with the standard basis
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(m);
    let push = |mut w: DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dot(&w);
                w -= b * c;
            }
        }
        let nrm = w.norm();
        if nrm > 1e-10 {
            basis.push(w / nrm);
            true
        } else {
            false
        }
    };
    push(y0, &mut basis);
    if !push(y1, &mut basis) {
        return 0.0;
    }
    for k in 0..m {
        if basis.len() == m {
            break;
        }
        push(DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 }), &mut basis);
    }
    basis[2..].iter().map(|nrm| nrm.dot(&v).powi(2)).sum::<f64>().sqrt()
}

/// Geodesic convexity decided in the chart: a subset of `S^n_-` is
/// geodesically convex exactly when its chart image is convex.
pub fn is_geodesically_convex(region: &TargetRegion) -> bool {
    region.is_chart_convex()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn hp(c: &[f64]) -> HemispherePoint {
        HemispherePoint::from_slice(c).unwrap()
    }

    #[test]
    fn cost_examples() {
        let x = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(cost(&x, &hp(&[0.0, 0.0, -1.0])), 0.0);
        let x = DVector::from_column_slice(&[1.0, 2.0]);
        let y = hp(&[FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2]);
        assert_abs_diff_eq!(cost(&x, &y), -1.0, epsilon = 1e-15);
        assert_eq!(cost(&DVector::zeros(2), &y), 0.0);
    }

    #[test]
    fn c_exp_and_chart_examples() {
        let south = c_exp(&ChartVector::from_slice(&[0.0, 0.0]));
        assert_eq!(south.to_ambient().as_slice(), &[0.0, 0.0, -1.0]);
        let q = c_exp(&ChartVector::from_slice(&[1.0, 0.0]));
        assert_abs_diff_eq!(q.to_ambient(), DVector::from_column_slice(&[FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2]), epsilon = 1e-15);
        assert_eq!(chart(&hp(&[0.0, 0.0, -1.0])).0.as_slice(), &[0.0, 0.0]);
        assert_abs_diff_eq!(chart(&hp(&[FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2])).0[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_invalid_points() {
        assert!(matches!(HemispherePoint::from_slice(&[0.0, 0.0, 1.0]), Err(SphereError::NotLower(_))));
        assert!(matches!(HemispherePoint::from_slice(&[1.0, 0.0, 0.0]), Err(SphereError::NotLower(_))));
        assert!(matches!(HemispherePoint::from_slice(&[0.5, 0.0, -0.5]), Err(SphereError::NotUnit(_))));
        assert!(matches!(HemispherePoint::from_slice(&[f64::NAN, 0.0, -1.0]), Err(SphereError::NonFinite)));
    }

    #[test]
    fn density_examples() {
        let n2 = Dimension::PLANE;
        assert_eq!(chart_density(&ChartVector::from_slice(&[0.0, 0.0]), n2), 1.0);
        assert_abs_diff_eq!(chart_density(&ChartVector::from_slice(&[0.6, 0.8]), n2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn metric_examples() {
        let g = metric_in_chart(&ChartVector::from_slice(&[0.0, 0.0, 0.0]));
        assert_eq!(g, DMatrix::identity(3, 3));
    }

    #[test]
    fn jacobian_and_curvature_examples() {
        assert_eq!(graph_area_jacobian(&DVector::zeros(2)), 1.0);
        assert_abs_diff_eq!(graph_area_jacobian(&DVector::from_column_slice(&[0.0, 1.0])), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(gauss_curvature(&DMatrix::identity(2, 2), &DVector::zeros(2)), 1.0);
        let k = gauss_curvature(&DMatrix::identity(2, 2), &DVector::from_column_slice(&[1.0, 0.0]));
        assert_abs_diff_eq!(k, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn curvature_is_homogeneous() {
        let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8]);
        let g = DVector::from_column_slice(&[0.4, -1.0, 0.3]);
        let s: f64 = 1.7;
        let k1 = gauss_curvature(&h, &g);
        let k2 = gauss_curvature(&(&h * s), &g);
        assert_abs_diff_eq!(k2, k1 * s.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn great_circle_examples() {
        let p0 = ChartVector::from_slice(&[1.0, 0.0]);
        let p1 = ChartVector::from_slice(&[-1.0, 0.0]);
        assert!(great_circle_deviation(&p0, &p1, 0.5) <= 1e-15);
        let p2 = ChartVector::from_slice(&[0.3, 4.0]);
        assert!(great_circle_deviation(&p0, &p2, 0.0) <= 1e-15);
        assert_eq!(great_circle_deviation(&p0, &p0, 0.3), 0.0);
    }

    #[test]
    fn angle_between_points() {
        let a = c_exp(&ChartVector::from_slice(&[0.0, 0.0]));
        let b = c_exp(&ChartVector::from_slice(&[1.0, 0.0]));
        assert_abs_diff_eq!(a.angle_to(&b), std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(a.angle_to(&a), 0.0);
    }
}
