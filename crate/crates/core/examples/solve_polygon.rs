//! Prescribed Gauss curvature on a square: a smooth non-constant `K`, a
//! quadrilateral target in the chart, and the Laguerre diagram of the result.
//!
//! ```bash
//! cargo run --release --example solve_polygon
//! ```

use hemisphere_ot::density::{total_mass, SourceDensity};
use hemisphere_ot::domain::{ConvexPolygonDomain, Domain};
use hemisphere_ot::experiments::gauss_map_image_check;
use hemisphere_ot::expr::Expr;
use hemisphere_ot::geometry::Vec2;
use hemisphere_ot::laguerre::{gauss_map, potential};
use hemisphere_ot::solver::{solve_with_diagram, SolveOptions};
use hemisphere_ot::target::{discretize, TargetRegion};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let domain: Domain = ConvexPolygonDomain::unit_square().into();
    let density = SourceDensity::expr(Expr::parse("1 + 0.5 * sin(3 * x1) * x2")?);
    let mass = total_mass(&domain, &density, 1e-12)?.mass;

    let region = TargetRegion::ChartPolygon {
        vertices: vec![Vec2::new(-0.5, -0.4), Vec2::new(0.6, -0.5), Vec2::new(0.7, 0.6), Vec2::new(-0.4, 0.5)],
    };
    let target = discretize(&region, 400, mass, 1)?;
    println!("source mass {mass:.6}, {} target sites", target.len());

    let sol = solve_with_diagram(&domain, &density, &target, &SolveOptions::default())?;
    for it in &sol.report.trace {
        println!("  iter {:2}  residual {:.3e}  step {:.3}  cg {}", it.iteration, it.residual, it.step, it.cg_iterations);
    }
    println!("converged: {}, connected: {}", sol.report.converged, sol.report.connected);

    let x = Vec2::new(0.25, 0.75);
    let (u, grad, cell) = potential(&target.sites, &sol.psi, &x);
    let n = gauss_map(&target.sites, &sol.psi, &x);
    println!("u({}, {}) = {u:.5}, ∇u = ({:.4}, {:.4}) from cell {cell}", x.x, x.y, grad.x, grad.y);
    println!("Gauss map there: {:?}", n.to_ambient().as_slice());

    let image = gauss_map_image_check(&sol.diagram, &target);
    println!(
        "Gauss-map image vs target: {:.4} / {:.4} (spacing {:.4}), empty cells {}",
        image.nonempty_to_target, image.target_to_nonempty, image.spacing, image.empty_required
    );
    Ok(())
}
