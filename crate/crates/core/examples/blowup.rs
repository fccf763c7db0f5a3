//! Critical mass on the unit disk: the Gauss map covers the whole lower
//! hemisphere and `|∇u|` blows up at the boundary.
//!
//! ```bash
//! cargo run --release --example blowup
//! ```

use hemisphere_ot::density::SourceDensity;
use hemisphere_ot::domain::DiskDomain;
use hemisphere_ot::experiments::{blowup_experiment, BlowupParams};
use hemisphere_ot::solver::SolveOptions;

fn main() {
    let params = BlowupParams::default();
    let r = blowup_experiment(&DiskDomain::unit(), &SourceDensity::constant(1.0), &params, &SolveOptions::default())
        .expect("critical run");

    println!("Λ = {:.8}, exponent {}, d_max = {:.3e}, P_max = {:.3}", r.lambda, r.exponent, r.d_max, r.p_max);
    println!("{} sites after truncation, solver residual {:.1e}", r.sites, r.solve.final_residual);

    let mut near: Vec<_> = r.samples.iter().collect();
    near.sort_by(|a, b| a.d.total_cmp(&b.d));
    println!("\n{:>12} {:>12} {:>12}", "d", "|∇u|", "bound");
    for s in near.iter().step_by(near.len().max(8) / 8) {
        println!("{:>12.3e} {:>12.4} {:>12.4}", s.d, s.grad_norm, s.bound);
    }

    println!("\n{:>8} {:>10} {:>10}", "d", "|∇u|", "exact");
    for a in r.analytic.iter().step_by(r.analytic.len().max(6) / 6) {
        println!("{:>8.3} {:>10.4} {:>10.4}", a.d, a.grad_norm, a.exact);
    }
    println!(
        "\nviolations {}, capped {} ({:.1}%), analytic max rel. error {:.3}, rays monotone {}",
        r.violations.len(),
        r.capped,
        100.0 * r.capped_fraction,
        r.analytic_max_rel_error,
        r.rays_monotone
    );

    // a disk that is too small carries less than ω₂ and is refused
    let small = DiskDomain::new(nalgebra::Vector2::zeros(), 0.8).unwrap();
    if let Err(e) = blowup_experiment(&small, &SourceDensity::constant(1.0), &params, &SolveOptions::default()) {
        println!("radius 0.8: {e}");
    }
}
