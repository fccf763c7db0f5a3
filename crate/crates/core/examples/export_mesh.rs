//! Lift a solution to a polygonal surface and write OBJ and CSV files.
//!
//! ```bash
//! cargo run --release --example export_mesh -- /tmp/cap
//! ```

use std::path::PathBuf;

use hemisphere_ot::export::{diagram_csv, export_mesh, parse_solution_csv, solution_csv};
use hemisphere_ot::experiments::sphere_benchmark;
use hemisphere_ot::solver::SolveOptions;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hemiot-mesh"));
    std::fs::create_dir_all(&dir)?;

    let b = sphere_benchmark(0.6, 300, 0, &SolveOptions::default()).expect("benchmark");
    let sites = &b.target.sites;
    let psi = &b.solution.psi;
    let mesh = export_mesh(&b.solution.diagram, sites, psi);
    println!(
        "{} faces, {} vertices, Euler characteristic {}, watertight {}",
        mesh.face_count(),
        mesh.vertices.len(),
        mesh.euler_characteristic(),
        mesh.is_watertight()
    );

    // each face normal agrees with the Gauss map of its cell
    let worst = (0..mesh.face_count())
        .map(|k| {
            let (n, g) = (mesh.cross_product_normal(k), mesh.face_normals[k]);
            (0..3).map(|i| (n[i] + g[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    println!("max |Newell normal + Gauss map| = {worst:.1e}");

    let csv = solution_csv(sites, &b.target.masses, psi, &b.solution.diagram.masses());
    std::fs::write(dir.join("mesh.obj"), mesh.to_obj())?;
    std::fs::write(dir.join("cells.csv"), diagram_csv(&b.solution.diagram))?;
    std::fs::write(dir.join("solution.csv"), &csv)?;
    let (back, _, _) = parse_solution_csv(&csv).expect("round trip");
    println!("wrote {} ({} sites)", dir.display(), back.len());
    Ok(())
}
