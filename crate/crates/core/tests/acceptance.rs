//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero if any of them fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use hemisphere_ot::config::ExperimentConfig;
use hemisphere_ot::density::{total_mass, SourceDensity};
use hemisphere_ot::domain::{ConvexPolygonDomain, DiskDomain, Domain};
use hemisphere_ot::experiments::{
    blowup_experiment, chart_identities, lemma_suite, sphere_benchmark, BlowupParams, ChartParams, LemmaParams,
};
use hemisphere_ot::expr::Expr;
use hemisphere_ot::geometry::Vec2;
use hemisphere_ot::laguerre::{cell_masses, laguerre_diagram};
use hemisphere_ot::oracle::{lp_transport, monotonicity_certificate, semidiscrete_agreement};
use hemisphere_ot::quadrature::QuadratureOptions;
use hemisphere_ot::run::{run, without_timings};
use hemisphere_ot::solver::{solve_with_diagram, SolveOptions};
use hemisphere_ot::target::{discretize, discretize_with, truncation_radius_for, DiscretizeOptions, SiteLayout, TargetRegion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn require(ok: bool, what: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn sphere() -> Outcome {
    let start = Instant::now();
    let b = single_threaded(|| sphere_benchmark(0.6, 2000, 0, &SolveOptions::default())).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let r = &b.report;
    require((r.chart_radius - 0.75).abs() <= 1e-12, format!("chart radius {}", r.chart_radius))?;
    require(r.solve.converged && r.solve.final_residual <= 1e-6, format!("residual {:e}", r.solve.final_residual))?;
    require(r.solve.iterations <= 50, format!("{} iterations", r.solve.iterations))?;
    require(r.gradient_sup_error <= 5e-2, format!("gradient error {:e}", r.gradient_sup_error))?;
    require(r.height_sup_error <= 5e-2, format!("height error {:e}", r.height_sup_error))?;
    require(secs <= 60.0, format!("{secs:.1} s"))?;
    Ok(format!(
        "{} sites, {} iterations, residual {:.1e}, gradient {:.2e}, height {:.2e}, {:.1} s",
        r.sites, r.solve.iterations, r.solve.final_residual, r.gradient_sup_error, r.height_sup_error, secs
    ))
}

fn random_instance(seed: u64) -> (Domain, SourceDensity, TargetRegion, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    let r = rng.gen_range(0.3..1.0);
    let domain: Domain = match seed % 3 {
        0 => DiskDomain::new(c, r).unwrap().into(),
        1 => ConvexPolygonDomain::regular(c, r, rng.gen_range(3..9), rng.gen_range(0.0..1.0)).unwrap().into(),
        _ => ConvexPolygonDomain::rectangle(c, c + Vec2::new(r, rng.gen_range(0.3..1.0))).unwrap().into(),
    };
    let density = match rng.gen_range(0..3) {
        0 => SourceDensity::constant(rng.gen_range(0.2..2.0)),
        1 => SourceDensity::expr(Expr::parse("1 + 0.5 * sin(3 * x1) * x2").unwrap()),
        _ => SourceDensity::expr(Expr::parse("0.5 + x1 * x1 + 0.25 * cos(2 * x2)").unwrap()),
    };
    let center = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let region = TargetRegion::chart_disk(center, rng.gen_range(0.3..1.5)).unwrap();
    (domain, density, region, rng.gen_range(20..200))
}

fn mass_balance() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut worst_area: f64 = 0.0;
    for seed in 0..20 {
        let (domain, density, region, n) = random_instance(seed);
        let mass = total_mass(&domain, &density, 1e-13).map_err(|e| e.to_string())?.mass;
        let target = discretize(&region, n, mass, seed).map_err(|e| e.to_string())?;
        let sol = solve_with_diagram(&domain, &density, &target, &SolveOptions::default()).map_err(|e| format!("instance {seed}: {e}"))?;
        require(sol.report.converged, format!("instance {seed} did not converge"))?;
        let mut diagram = laguerre_diagram(&domain, &target.sites, &sol.psi).map_err(|e| e.to_string())?;
        let g = cell_masses(&domain, &mut diagram, &density, &QuadratureOptions::with_tol(1e-13)).map_err(|e| e.to_string())?;
        let l1: f64 = g.iter().zip(&target.masses).map(|(a, b)| (a - b).abs()).sum();
        let residual = l1 / target.total;
        let area = (diagram.total_area() - domain.area()).abs() / domain.area();
        require(residual <= 1e-6, format!("instance {seed}: residual {residual:e}"))?;
        require(area <= 1e-9, format!("instance {seed}: area error {area:e}"))?;
        worst_residual = worst_residual.max(residual);
        worst_area = worst_area.max(area);
    }
    Ok(format!("20 instances, worst residual {worst_residual:.1e}, worst area error {worst_area:.1e}"))
}

fn oracle() -> Outcome {
    let disk: Domain = DiskDomain::new(Vec2::zeros(), 0.6).unwrap().into();
    let density = SourceDensity::constant(1.0);
    let region = TargetRegion::chart_disk(Vec2::zeros(), 0.75).unwrap();
    let opts = DiscretizeOptions { layout: Some(SiteLayout::OrthographicRings), jitter: 0.0 };
    let target = discretize_with(&region, 20, disk.area(), 0, &opts).map_err(|e| e.to_string())?;
    require(target.len() == 20, format!("{} targets", target.len()))?;
    let (rep, _) = semidiscrete_agreement(&disk, &density, &target, 15, &SolveOptions::default()).map_err(|e| e.to_string())?;
    require(rep.fraction >= 0.95, format!("agreement {:.4}", rep.fraction))?;
    require(rep.certificate >= -1e-10 && rep.certified, format!("certificate {:e}", rep.certificate))?;

    // and on a batch of random transport problems
    let mut worst = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let ns = rng.gen_range(1..30);
        let nt = rng.gen_range(1..30);
        let pt = |rng: &mut ChaCha8Rng| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let mut src: Vec<(Vec2, f64)> = (0..ns).map(|_| (pt(&mut rng), rng.gen_range(0.1..1.0))).collect();
        let tgt: Vec<(Vec2, f64)> = (0..nt).map(|_| (pt(&mut rng), rng.gen_range(0.1..1.0))).collect();
        let ratio = tgt.iter().map(|t| t.1).sum::<f64>() / src.iter().map(|s| s.1).sum::<f64>();
        src.iter_mut().for_each(|s| s.1 *= ratio);
        let plan = lp_transport(&src, &tgt).map_err(|e| e.to_string())?;
        let xs: Vec<Vec2> = src.iter().map(|s| s.0).collect();
        let ps: Vec<Vec2> = tgt.iter().map(|t| t.0).collect();
        let c = monotonicity_certificate(&plan, &xs, &ps).min(plan.min_reduced_cost);
        require(c >= -1e-10, format!("random LP certificate {c:e}"))?;
        worst = worst.min(c);
    }
    Ok(format!("agreement {:.4} over {} atoms, certificate {:.1e}, worst random certificate {:.1e}", rep.fraction, rep.atoms, rep.certificate, worst))
}

fn chart() -> Outcome {
    let params = ChartParams { monte_carlo_samples: 1_000_000, triples: 10_000, ..Default::default() };
    let c = chart_identities(&params).map_err(|e| e.to_string())?;
    require(c.hemisphere_mass_error <= 1e-6, format!("hemisphere mass error {:e}", c.hemisphere_mass_error))?;
    require(c.rectangle_rel_error <= 1e-3, format!("rectangle error {:e}", c.rectangle_rel_error))?;
    require(c.metric_max_rel_error <= 1e-12, format!("metric error {:e}", c.metric_max_rel_error))?;
    require(c.great_circle_max_deviation <= 1e-12, format!("great-circle deviation {:e}", c.great_circle_max_deviation))?;
    Ok(format!(
        "mass error {:.1e}, rectangle {:.1e}, metric {:.1e}, great circle {:.1e}",
        c.hemisphere_mass_error, c.rectangle_rel_error, c.metric_max_rel_error, c.great_circle_max_deviation
    ))
}

fn blowup() -> Outcome {
    let params = BlowupParams::default();
    require(params.sites == 4000 && params.samples == 1000 && params.delta == 0.5 && params.c0 == 1.0, "defaults changed")?;
    let r = blowup_experiment(&DiskDomain::unit(), &SourceDensity::constant(1.0), &params, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    require(r.p_max == truncation_radius_for(std::f64::consts::PI / 1e4), "truncation radius")?;
    require(r.samples.len() == 1000, format!("{} samples", r.samples.len()))?;
    require(r.samples.iter().all(|s| s.d <= r.d_max), "sample beyond d_max")?;
    require(r.violations.is_empty(), format!("{} violations", r.violations.len()))?;
    require(r.capped_fraction < 0.05, format!("capped fraction {}", r.capped_fraction))?;
    require(r.analytic.iter().all(|a| (0.05..=0.3).contains(&a.d)), "analytic sample outside [0.05, 0.3]")?;
    require(r.analytic_max_rel_error <= 0.1, format!("analytic error {:.3}", r.analytic_max_rel_error))?;
    Ok(format!(
        "0 violations, {} capped, Λ = {:.6}, analytic error {:.3}",
        r.capped, r.lambda, r.analytic_max_rel_error
    ))
}

fn lemmas() -> Outcome {
    let params = LemmaParams::default();
    require(params.trials == 100, "trial count changed")?;
    let s = lemma_suite(&DiskDomain::unit(), &params).map_err(|e| e.to_string())?;
    require(s.cone.trials == 100 && s.cone.max_excess == 0.0, format!("cone excess {:e}", s.cone.max_excess))?;
    let tested: usize = s.slices.iter().map(|sl| sl.samples.len()).sum();
    for sl in &s.slices {
        require(sl.samples.iter().all(|p| p.holds && p.t > 0.0 && p.t < 2.0 * sl.d0), format!("slice bound fails at d0 = {:e}", sl.d0))?;
        require(sl.passed, format!("slice check fails at d0 = {:e}", sl.d0))?;
    }
    let thetas: Vec<f64> = s.estar.iter().map(|e| e.theta).collect();
    require(thetas == [0.05, 0.1, 0.2, 0.4], format!("thetas {thetas:?}"))?;
    for e in &s.estar {
        require(e.measured - 3.0 * e.std_error >= e.bound, format!("θ = {}: {} - 3·{} < {}", e.theta, e.measured, e.std_error, e.bound))?;
    }
    Ok(format!("cone excess 0 over 100 trials, {tested} slice points, E* volumes above bound with 3σ margin"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn determinism() -> Outcome {
    let names = ["sphere-benchmark.json", "oracle-compare.json", "solve-square.json", "blowup.json", "lemmas.json"];
    for name in names {
        let mut cfg = ExperimentConfig::from_file(&configs_dir().join(name)).map_err(|e| e.to_string())?;
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut reports = Vec::new();
        for (k, threads) in [1, 4].into_iter().enumerate() {
            cfg.output_dir = dirs[k].path().to_path_buf();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            reports.push(pool.install(|| run(&cfg)));
        }
        require(reports[0].report["passed"] == true, format!("{name} did not pass: {}", reports[0].report["error"]))?;
        require(reports[0].report["verdicts"] == reports[1].report["verdicts"], format!("{name}: verdicts differ"))?;
        require(without_timings(&reports[0].report) == without_timings(&reports[1].report), format!("{name}: reports differ"))?;
        for file in ["solution.csv", "samples.csv", "plan.csv"] {
            let a = std::fs::read(dirs[0].path().join(file)).ok();
            let b = std::fs::read(dirs[1].path().join(file)).ok();
            require(a == b, format!("{name}: {file} differs"))?;
        }
    }
    Ok(format!("{} configs, 1 vs 4 threads, identical artifacts and verdicts", names.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("sphere benchmark", sphere),
        ("mass balance", mass_balance),
        ("oracle agreement", oracle),
        ("chart identities", chart),
        ("blowup bound", blowup),
        ("lemma suite", lemmas),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
