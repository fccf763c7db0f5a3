use hemisphere_ot::density::{total_mass, SourceDensity};
use hemisphere_ot::domain::{ConvexPolygonDomain, DiskDomain, Domain};
use hemisphere_ot::experiments::gauss_map_image_check;
use hemisphere_ot::expr::Expr;
use hemisphere_ot::geometry::{ConvexPolygon, EdgeLabel, HalfPlane, Vec2};
use hemisphere_ot::laguerre::{cell_masses, laguerre_diagram, potential, DualWeights, LaguerreDiagram};
use hemisphere_ot::oracle::normal_cone_check;
use hemisphere_ot::quadrature::QuadratureOptions;
use hemisphere_ot::solver::{solve_with_diagram, SolveOptions};
use hemisphere_ot::target::{discretize, DiscreteTarget, TargetRegion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Instance {
    domain: Domain,
    density: SourceDensity,
    target: DiscreteTarget,
}

fn random_domain(rng: &mut ChaCha8Rng) -> Domain {
    let c = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    let r = rng.gen_range(0.3..1.0);
    match rng.gen_range(0..3) {
        0 => DiskDomain::new(c, r).unwrap().into(),
        1 => ConvexPolygonDomain::regular(c, r, rng.gen_range(3..9), rng.gen_range(0.0..1.0)).unwrap().into(),
        _ => ConvexPolygonDomain::rectangle(c, c + Vec2::new(r, rng.gen_range(0.3..1.0))).unwrap().into(),
    }
}

fn random_density(rng: &mut ChaCha8Rng) -> SourceDensity {
    match rng.gen_range(0..3) {
        0 => SourceDensity::constant(rng.gen_range(0.2..2.0)),
        1 => SourceDensity::expr(Expr::parse("1 + 0.5 * sin(3 * x1) * x2").unwrap()),
        _ => SourceDensity::expr(Expr::parse("0.5 + x1 * x1 + 0.25 * cos(2 * x2)").unwrap()),
    }
}

fn random_region(rng: &mut ChaCha8Rng) -> TargetRegion {
    let c = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    if rng.gen_bool(0.5) {
        TargetRegion::chart_disk(c, rng.gen_range(0.3..1.5)).unwrap()
    } else {
        let r = rng.gen_range(0.4..1.5);
        let k = rng.gen_range(3..7);
        let phase: f64 = rng.gen_range(0.0..1.0);
        let vertices = (0..k)
            .map(|j| {
                let a = phase + 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                c + Vec2::new(a.cos(), a.sin()) * r
            })
            .collect();
        TargetRegion::ChartPolygon { vertices }
    }
}

fn instance(seed: u64, max_sites: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = random_domain(&mut rng);
    let density = random_density(&mut rng);
    let mass = total_mass(&domain, &density, 1e-13).unwrap().mass;
    let region = random_region(&mut rng);
    let n = rng.gen_range(2..=max_sites);
    let target = discretize(&region, n, mass, seed).unwrap();
    Instance { domain, density, target }
}

fn random_psi(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DualWeights {
    DualWeights { psi: (0..n).map(|_| rng.gen_range(-scale..scale)).collect() }
}

fn domain_points(domain: &Domain, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let (lo, hi) = domain.bounding_box();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if domain.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn intersection_area(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    let mut out = a.clone();
    let n = b.vertices.len();
    for k in 0..n {
        let (p, q) = (b.vertices[k], b.vertices[(k + 1) % n]);
        let e = q - p;
        let outward = Vec2::new(e.y, -e.x);
        out = out.clip(&HalfPlane::new(outward, outward.dot(&p)), EdgeLabel::Boundary);
        if out.is_empty() {
            return 0.0;
        }
    }
    out.area()
}

fn check_partition(domain: &Domain, diagram: &LaguerreDiagram, rng: &mut ChaCha8Rng) -> Result<(), TestCaseError> {
    let area = domain.area();
    prop_assert!((diagram.total_area() - area).abs() <= 1e-9 * area, "{} vs {}", diagram.total_area(), area);
    let cells: Vec<_> = diagram.cells.iter().filter(|c| !c.is_empty()).collect();
    for (k, a) in cells.iter().enumerate() {
        for b in &cells[k + 1..] {
            prop_assert!(intersection_area(&a.polygon, &b.polygon) <= 1e-12);
        }
    }
    for x in domain_points(domain, 500, rng) {
        let inside = cells.iter().filter(|c| c.shape.contains(&x, 1e-9)).count();
        let strictly = cells.iter().filter(|c| c.shape.contains(&x, -1e-9)).count();
        prop_assert!(inside >= 1 && strictly <= 1);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cells_tile_the_domain_at_random_weights(seed in any::<u64>()) {
        let inst = instance(seed, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let psi = random_psi(&mut rng, inst.target.len(), 0.3);
        let diagram = laguerre_diagram(&inst.domain, &inst.target.sites, &psi).unwrap();
        check_partition(&inst.domain, &diagram, &mut rng)?;
    }

    #[test]
    fn masses_conserved_at_random_weights(seed in any::<u64>()) {
        let inst = instance(seed, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let psi = random_psi(&mut rng, inst.target.len(), 0.3);
        let mut diagram = laguerre_diagram(&inst.domain, &inst.target.sites, &psi).unwrap();
        let quad = QuadratureOptions::with_tol(1e-12);
        let masses = cell_masses(&inst.domain, &mut diagram, &inst.density, &quad).unwrap();
        let total = total_mass(&inst.domain, &inst.density, 1e-13).unwrap().mass;
        let sum: f64 = masses.iter().sum();
        prop_assert!((sum - total).abs() <= 1e-12 * masses.len() as f64 + 1e-12 * total);
        prop_assert!(masses.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn cell_vertices_are_monotone(seed in any::<u64>()) {
        let inst = instance(seed, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let psi = random_psi(&mut rng, inst.target.len(), 0.3);
        let diagram = laguerre_diagram(&inst.domain, &inst.target.sites, &psi).unwrap();
        let sites = &inst.target.sites;
        let pts: Vec<(usize, Vec<Vec2>)> = diagram.cells.iter().filter(|c| !c.is_empty()).map(|c| (c.site_index, c.shape.polyline(0.1))).collect();
        for (i, xs) in &pts {
            for (j, ys) in &pts {
                let dp = sites[*i] - sites[*j];
                for x in xs {
                    for y in ys {
                        prop_assert!((x - y).dot(&dp) >= -1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn potential_is_convex_and_supported(seed in any::<u64>()) {
        let inst = instance(seed, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let psi = random_psi(&mut rng, inst.target.len(), 0.3);
        let sites = &inst.target.sites;
        let pts = domain_points(&inst.domain, 60, &mut rng);
        for w in pts.windows(2) {
            let t: f64 = rng.gen_range(0.0..1.0);
            let mid = w[0] * t + w[1] * (1.0 - t);
            let (um, _, _) = potential(sites, &psi, &mid);
            let (u0, _, _) = potential(sites, &psi, &w[0]);
            let (u1, _, _) = potential(sites, &psi, &w[1]);
            prop_assert!(um <= t * u0 + (1.0 - t) * u1 + 1e-12);
        }
        for (k, x) in pts.iter().take(8).enumerate() {
            prop_assert!(normal_cone_check(&inst.domain, sites, &psi, x, 400, seed.wrapping_add(k as u64)));
        }
    }
}

fn opts(tol: f64) -> SolveOptions {
    SolveOptions { tol, ..Default::default() }
}

/// Cell masses recomputed from scratch at a tighter quadrature tolerance.
fn independent_masses(inst: &Instance, psi: &DualWeights) -> Vec<f64> {
    let mut diagram = laguerre_diagram(&inst.domain, &inst.target.sites, psi).unwrap();
    cell_masses(&inst.domain, &mut diagram, &inst.density, &QuadratureOptions::with_tol(1e-13)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn converged_solutions_push_forward(seed in any::<u64>()) {
        let inst = instance(seed, 60);
        let tol = 1e-6;
        let sol = solve_with_diagram(&inst.domain, &inst.density, &inst.target, &opts(tol)).unwrap();
        prop_assert!(sol.report.converged);
        let masses = independent_masses(&inst, &sol.psi);
        let nu = &inst.target.masses;
        let total = inst.target.total;
        let l1: f64 = masses.iter().zip(nu).map(|(g, v)| (g - v).abs()).sum();
        prop_assert!(l1 <= tol * total, "residual {}", l1 / total);
        let n = nu.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        for _ in 0..50 {
            let subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            let g: f64 = subset.iter().map(|&i| masses[i]).sum();
            let v: f64 = subset.iter().map(|&i| nu[i]).sum();
            prop_assert!((g - v).abs() <= n as f64 * tol);
        }
        let image = gauss_map_image_check(&sol.diagram, &inst.target);
        prop_assert!(image.passed, "{image:?}");
        check_partition(&inst.domain, &sol.diagram, &mut rng)?;
    }

    #[test]
    fn translating_the_domain_shifts_the_weights(seed in any::<u64>(), wx in -2.0f64..2.0, wy in -2.0f64..2.0) {
        let inst = instance(seed, 25);
        let inst = Instance { density: SourceDensity::constant(1.0), ..inst };
        let mass = inst.domain.area();
        let target = inst.target.rescaled_to(mass);
        let w = Vec2::new(wx, wy);
        let moved = inst.domain.translated(&w);
        let a = solve_with_diagram(&inst.domain, &inst.density, &target, &opts(1e-11)).unwrap();
        let b = solve_with_diagram(&moved, &inst.density, &target, &opts(1e-11)).unwrap();
        let p = &target.sites;
        let shifted = DualWeights::gauged(a.psi.psi.iter().zip(p).map(|(s, pi)| s + w.dot(pi)).collect());
        let again = DualWeights::gauged(b.psi.psi.clone());
        for (x, y) in shifted.psi.iter().zip(&again.psi) {
            prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
        for (ca, cb) in a.diagram.cells.iter().zip(&b.diagram.cells) {
            prop_assert!((ca.area - cb.area).abs() <= 1e-6 * mass);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let inst = instance(7, 80);
    let solve_in = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve_with_diagram(&inst.domain, &inst.density, &inst.target, &opts(1e-8)).unwrap())
    };
    let one = solve_in(1);
    let four = solve_in(4);
    let bits = |psi: &DualWeights| psi.psi.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.psi), bits(&four.psi));
    assert_eq!(one.report, four.report);
    assert_eq!(one.diagram.masses(), four.diagram.masses());
}
