//! The spherical cap: on the disk of radius `r` with `K ≡ 1` the exact
//! solution is `u = -sqrt(1 - |x|²)`. Runs the benchmark at a few sizes and
//! prints the errors.
//!
//! ```bash
//! cargo run --release --example sphere_benchmark -- 0.6 500 1000 2000
//! ```

use hemisphere_ot::experiments::sphere_benchmark;
use hemisphere_ot::solver::SolveOptions;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let r: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let sizes: Vec<usize> = if args.len() > 1 { args[1..].iter().filter_map(|s| s.parse().ok()).collect() } else { vec![250, 500, 1000, 2000] };

    println!("{:>6} {:>6} {:>5} {:>10} {:>10} {:>10}", "N", "sites", "iters", "residual", "grad err", "height err");
    for n in sizes {
        let t = std::time::Instant::now();
        let b = match sphere_benchmark(r, n, 0, &SolveOptions::default()) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("N = {n}: {e}");
                continue;
            }
        };
        let rep = &b.report;
        println!(
            "{:>6} {:>6} {:>5} {:>10.2e} {:>10.2e} {:>10.2e}   {:.2} s",
            n,
            rep.sites,
            rep.solve.iterations,
            rep.solve.final_residual,
            rep.gradient_sup_error,
            rep.height_sup_error,
            t.elapsed().as_secs_f64()
        );
    }
}
