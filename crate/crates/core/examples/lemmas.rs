//! The boundary lemmas behind the blowup estimate, checked numerically on
//! the unit disk.
//!
//! ```bash
//! cargo run --release --example lemmas
//! ```

use hemisphere_ot::domain::DiskDomain;
use hemisphere_ot::experiments::{lemma_suite, LemmaParams};

fn main() {
    let s = lemma_suite(&DiskDomain::unit(), &LemmaParams::default()).expect("lemma suite");

    println!(
        "cone inclusion: {} trials x {} points, max excess {:e}, max ratio {:.3}",
        s.cone.trials, s.cone.points_per_trial, s.cone.max_excess, s.cone.max_ratio
    );
    println!("  with θ doubled: max excess {:.3e} (should be positive)", s.cone_control.max_excess);

    for sl in &s.slices {
        let worst = sl.samples.iter().map(|p| p.closed_form / p.bound).fold(0.0, f64::max);
        println!("slices at d0 = {:.3e}: {} values of t, worst length/bound {:.3}", sl.d0, sl.samples.len(), worst);
    }
    for e in &s.estar {
        println!(
            "E* volume θ = {:<5} measured {:.5} ± {:.1e}, exact {:.5}, bound {:.5}",
            e.theta,
            e.measured,
            e.std_error,
            e.exact.unwrap_or(f64::NAN),
            e.bound
        );
    }
    println!("passed: {}", s.passed);
}
