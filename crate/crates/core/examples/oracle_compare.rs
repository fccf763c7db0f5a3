//! Cross-check of the semi-discrete solver against an exact transport LP on
//! a grid atomization of the source.
//!
//! ```bash
//! cargo run --release --example oracle_compare
//! ```

use hemisphere_ot::density::SourceDensity;
use hemisphere_ot::domain::{DiskDomain, Domain};
use hemisphere_ot::geometry::Vec2;
use hemisphere_ot::oracle::{lp_transport, monotonicity_certificate, semidiscrete_agreement};
use hemisphere_ot::solver::SolveOptions;
use hemisphere_ot::target::{discretize_with, DiscretizeOptions, SiteLayout, TargetRegion};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a tiny LP first: two sources, two targets
    let src = [(Vec2::new(-1.0, 0.0), 0.5), (Vec2::new(1.0, 0.0), 0.5)];
    let tgt = [(Vec2::new(2.0, 0.0), 0.5), (Vec2::new(-2.0, 0.0), 0.5)];
    let plan = lp_transport(&src, &tgt)?;
    print!("{}", plan.to_csv());
    let xs: Vec<Vec2> = src.iter().map(|s| s.0).collect();
    let ps: Vec<Vec2> = tgt.iter().map(|t| t.0).collect();
    println!("cost {:.3}, certificate {:.1e}\n", plan.cost, monotonicity_certificate(&plan, &xs, &ps));

    let disk: Domain = DiskDomain::new(Vec2::zeros(), 0.6)?.into();
    let region = TargetRegion::chart_disk(Vec2::zeros(), 0.75)?;
    let opts = DiscretizeOptions { layout: Some(SiteLayout::OrthographicRings), jitter: 0.0 };
    let target = discretize_with(&region, 20, disk.area(), 0, &opts)?;
    for m in [8, 12, 15, 20] {
        let (rep, _) = semidiscrete_agreement(&disk, &SourceDensity::constant(1.0), &target, m, &SolveOptions::default())?;
        println!(
            "m = {m:2}: {:3} atoms, agreement {:.4}, LP cost {:.6}, certified {}",
            rep.atoms, rep.fraction, rep.lp_cost, rep.certified
        );
    }
    Ok(())
}
