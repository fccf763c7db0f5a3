//! The south-pole chart `p ↦ (p, -1) / sqrt(1 + |p|²)` and the identities the
//! rest of the crate relies on.
//!
//! ```bash
//! cargo run --release --example chart_identities
//! ```

use hemisphere_ot::experiments::{chart_identities, ChartParams};
use hemisphere_ot::sphere::{c_exp, chart, chart_density, cost, ChartVector, Dimension};
use nalgebra::DVector;

fn main() {
    let p = ChartVector::from_slice(&[0.3, -1.2]);
    let y = c_exp(&p);
    println!("c_exp(0.3, -1.2) = {:?}", y.to_ambient().as_slice());
    println!("chart(c_exp(p))   = {:?}", chart(&y).0.as_slice());
    println!("chart density     = {:.6}", chart_density(&p, Dimension::PLANE));

    // the cost is affine in x, so the MTW tensor vanishes
    let x = DVector::from_vec(vec![0.2, 0.1]);
    println!("cost(x, ȳ)        = {:.6}", cost(&x, &y));

    let c = chart_identities(&ChartParams::default()).expect("chart identities");
    println!();
    println!("hemisphere mass   = {:.12} (error {:.1e})", c.hemisphere_mass, c.hemisphere_mass_error);
    println!(
        "rectangle {:?}: quadrature {:.6}, Monte Carlo {:.6} ({} samples, rel. error {:.1e})",
        c.rectangle, c.rectangle_quadrature, c.rectangle_monte_carlo, c.monte_carlo_samples, c.rectangle_rel_error
    );
    println!("metric determinant max rel. error {:.1e}", c.metric_max_rel_error);
    println!("great-circle deviation over {} triples: {:.1e}", c.triples, c.great_circle_max_deviation);
    println!("passed: {}", c.passed);
}
