mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use common::{random_f, random_rho, random_srw, random_weighted_chain};
use curvkit::curvature::{bisection_curvature, lichnerowicz_check, pencil_curvature};
use curvkit::entropic::{finite_difference_gradient, objective_and_gradient};
use curvkit::forms::assemble_forms_local;
use curvkit::gamma::{a_form, b_form, check_geometric_green, gamma, gamma2, gamma2_rho, gamma_rho};
use curvkit::generate::{complete, cycle, hypercube, path};
use curvkit::geometry::d_gamma;
use curvkit::heat::{probe_gradient_estimate, spectral_decompose, verify_gradient_estimate};
use curvkit::inequalities::{inequality_battery, BatteryOptions, CurvatureEvidence, Verdict};
use curvkit::optimal::{check_equilibrium_optimality, optimal_complex};
use curvkit::{bakry_emery_vertex, curvature_estimate, DomainClass, EntropicOptions, MarkovChain, Mean};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn hypercube_sharpness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for dim in 1..=4 {
        let c = hypercube(dim).unwrap();
        let target = 2.0 / dim as f64;
        let l1 = spectral_decompose(&c).lambda1();
        worst = worst.max((l1 - target).abs());
        for x in 0..c.len() {
            let k = bakry_emery_vertex(&c, x, f64::INFINITY).unwrap().value;
            worst = worst.max((k - target).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-8 && secs < 5.0, format!("max |K - 2/N| = {worst:.2e}, {secs:.2} s"))
}

fn cycle_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_k = 0.0f64;
    let mut worst_form = 0.0f64;
    for n in 5..=8 {
        let c = cycle(n).unwrap();
        for x in 0..n {
            worst_k = worst_k.max(bakry_emery_vertex(&c, x, f64::INFINITY).unwrap().value.abs());
        }
        for _ in 0..50 {
            let f = random_f(&mut rng, n);
            let g1 = gamma(&c, &f, &f).unwrap();
            let g2 = gamma2(&c, &f, &f).unwrap();
            for x in 0..n {
                let at = |i: i64| f[(x as i64 + i).rem_euclid(n as i64) as usize];
                let a = |i: i64| at(i) - at(i - 1);
                let gamma_cf = 0.25 * (a(1).powi(2) + a(0).powi(2));
                let gamma2_cf = ((a(2) - a(1)).powi(2) + 2.0 * (a(1) - a(0)).powi(2) + (a(0) - a(-1)).powi(2)) / 16.0;
                worst_form = worst_form.max((g1[x] - gamma_cf).abs()).max((g2[x] - gamma2_cf).abs());
            }
        }
    }
    outcome(
        worst_k <= 1e-8 && worst_form <= 1e-12,
        format!("max |K_inf(x)| = {worst_k:.2e}, max closed-form error = {worst_form:.2e}"),
    )
}

fn entropic_convergence() -> Outcome {
    let start = Instant::now();
    let opts = EntropicOptions { starts: 32, seed: 7, ..EntropicOptions::default() };
    let mut details = Vec::new();
    let mut pass = true;
    for dim in 1..=2 {
        let c = hypercube(dim).unwrap();
        let target = 2.0 / dim as f64;
        let est = curvature_estimate(&c, &Mean::Logarithmic, f64::INFINITY, &opts).unwrap();
        let lowest = est.per_start.iter().map(|s| s.k.min(s.initial_k)).fold(est.k_hat, f64::min);
        pass &= est.starts == 32 && (est.k_hat - target).abs() <= 1e-3 && lowest >= target - 1e-6;
        details.push(format!("Q{dim}: k_hat = {:.9}, lowest evaluation = {:.9}", est.k_hat, lowest));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    outcome(pass, format!("{}, {secs:.2} s", details.join("; ")))
}

fn dimension_two_lower_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(0.1..0.8);
        let c = random_srw(&mut rng, n, p);
        for x in 0..n {
            worst = worst.min(bakry_emery_vertex(&c, x, 2.0).unwrap().value);
        }
    }
    outcome(worst >= -1.0 - 1e-9, format!("min K_2(x) = {worst:.12}"))
}

fn form_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let means = [Mean::Arithmetic, Mean::Logarithmic, Mean::Geometric];
    let mut worst = 0.0f64;
    let mut worst_green = 0.0f64;
    for i in 0..100 {
        let n = rng.random_range(2..=9);
        let c = random_weighted_chain(&mut rng, n);
        let mean = &means[i % 3];
        let rho = random_rho(&mut rng, n, mean.domain_class() == DomainClass::Closed);
        let f = random_f(&mut rng, n);
        let a = a_form(&c, mean, &rho, &f).unwrap();
        let a_ref = c.inner(&rho, &gamma_rho(&c, mean, &rho, &f, &f).unwrap());
        let b = b_form(&c, mean, &rho, &f).unwrap();
        let b_ref = c.inner(&rho, &gamma2_rho(&c, mean, &rho, &f, &f).unwrap());
        worst = worst.max(rel(a, a_ref)).max(rel(b, b_ref));
        let positive = random_rho(&mut rng, n, false);
        let green = check_geometric_green(&c, &positive, 5, i as u64).unwrap();
        worst_green = worst_green.max(green.max_relative_residual);
    }
    outcome(
        worst <= 1e-11 && worst_green <= 1e-11,
        format!("max form identity error = {worst:.2e}, max Green residual = {worst_green:.2e}"),
    )
}

fn gradient_estimate_suite() -> Outcome {
    let t_grid = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0];
    let mut pass = true;
    let mut details = Vec::new();
    for dim in 1..=3 {
        let c = hypercube(dim).unwrap();
        let sys = spectral_decompose(&c);
        let k = 2.0 / dim as f64;
        let check =
            verify_gradient_estimate(&c, &sys, &Mean::Logarithmic, k, f64::INFINITY, 200, &t_grid, 10 + dim as u64)
                .unwrap();
        let probe =
            probe_gradient_estimate(&c, &sys, &Mean::Logarithmic, k + 0.05, f64::INFINITY, &[], 200, dim as u64)
                .unwrap();
        pass &= check.trials == 200 && check.worst_residual >= -1e-9 && probe.violated;
        details.push(format!(
            "Q{dim}: worst residual {:.2e}, probe at K+0.05 {:.2e}",
            check.worst_residual, probe.worst_residual
        ));
    }
    outcome(pass, details.join("; "))
}

/// Maximal members of `{X - N[m] - N[M] : m != M}` on the cycle.
fn cycle_facets_oracle(n: usize) -> Vec<Vec<usize>> {
    let closed = |v: usize| [(v + n - 1) % n, v, (v + 1) % n];
    let mut family: BTreeSet<Vec<usize>> = BTreeSet::new();
    for m in 0..n {
        for big in 0..n {
            if m == big {
                continue;
            }
            let removed: BTreeSet<usize> = closed(m).into_iter().chain(closed(big)).collect();
            let set: Vec<usize> = (0..n).filter(|x| !removed.contains(x)).collect();
            if !set.is_empty() {
                family.insert(set);
            }
        }
    }
    let sets: Vec<Vec<usize>> = family.into_iter().collect();
    sets.iter()
        .filter(|a| !sets.iter().any(|b| b.len() > a.len() && a.iter().all(|x| b.contains(x))))
        .cloned()
        .collect()
}

fn cycle_complexes() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for n in 5..=8 {
        let c = cycle(n).unwrap();
        let cx = optimal_complex(&c, f64::INFINITY, n).unwrap();
        let mut complements: Vec<Vec<usize>> = (0..n)
            .map(|m| {
                let run: Vec<usize> = (0..4).map(|i| (m + i) % n).collect();
                (0..n).filter(|x| !run.contains(x)).collect()
            })
            .collect();
        complements.sort();
        complements.dedup();
        let top: Vec<Vec<usize>> = cx.facets.iter().filter(|f| f.len() == n - 4).cloned().collect();
        let mut oracle = cycle_facets_oracle(n);
        oracle.sort();
        let ok = top == complements && complements.len() == n && cx.dimension == n as i64 - 5 && cx.facets == oracle;
        pass &= ok;
        details.push(format!(
            "C{n}: dim {}, {} top facets, {} facets (oracle {})",
            cx.dimension,
            top.len(),
            cx.facets.len(),
            oracle.len()
        ));
    }
    outcome(pass, details.join("; "))
}

fn equilibrium_agreement() -> Outcome {
    let chains: Vec<(&str, MarkovChain)> = vec![
        ("Q1", hypercube(1).unwrap()),
        ("Q2", hypercube(2).unwrap()),
        ("Q3", hypercube(3).unwrap()),
        ("C5", cycle(5).unwrap()),
        ("C6", cycle(6).unwrap()),
        ("C7", cycle(7).unwrap()),
        ("C8", cycle(8).unwrap()),
        ("K4", complete(4).unwrap()),
        ("P4", path(4).unwrap()),
    ];
    let mut agree = 0;
    let mut failures = Vec::new();
    for (name, c) in &chains {
        let rep = check_equilibrium_optimality(c).unwrap();
        let lich = lichnerowicz_check(c, &Mean::Arithmetic, 0).unwrap();
        if rep.equilibrium_optimal == lich.sharp {
            agree += 1;
        } else {
            failures.push(*name);
        }
    }
    let mut detail = format!("{agree}/{} agree", chains.len());
    if !failures.is_empty() {
        detail.push_str(&format!(", disagree on {}", failures.join(",")));
    }
    outcome(agree == chains.len(), detail)
}

fn hypercube_battery() -> Outcome {
    let start = Instant::now();
    let opts = BatteryOptions::default();
    let mut violations = Vec::new();
    let mut held = 0;
    let mut total = 0;
    for dim in 1..=5 {
        let c = hypercube(dim).unwrap();
        let evidence = CurvatureEvidence::exact(2.0 / dim as f64, "hypercube");
        for r in inequality_battery(&c, &evidence, &opts).unwrap() {
            total += 1;
            match r.verdict {
                Verdict::Holds => held += 1,
                Verdict::Violated => violations.push(format!("Q{dim}:{}", r.name)),
                Verdict::NotApplicable => {}
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations.is_empty() && held > 0 && secs < 180.0,
        format!("{held}/{total} hold, violations: [{}], {secs:.1} s", violations.join(", ")),
    )
}

fn dual_solvers() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let means = [Mean::Arithmetic, Mean::Logarithmic, Mean::Geometric];
    let dims = [0.5, 1.0, 2.0, 4.0, f64::INFINITY];
    let mut worst = 0.0f64;
    for i in 0..200 {
        let n = rng.random_range(2..=8);
        let c = random_weighted_chain(&mut rng, n);
        let mean = &means[i % 3];
        let rho = random_rho(&mut rng, n, mean.domain_class() == DomainClass::Closed);
        let rho = if rho.iter().all(|&v| v == 0.0) { c.ones() } else { rho };
        let dim = dims[rng.random_range(0..dims.len())];
        let forms = assemble_forms_local(&c, mean, &rho, dim).unwrap();
        let p = pencil_curvature(&forms.m, &forms.n).unwrap().value;
        let (b, _, _) = bisection_curvature(&forms.m, &forms.n, c.stats().q_min);
        let err = if p == b { 0.0 } else { (p - b).abs() / p.abs().max(1.0) };
        worst = worst.max(err);
    }
    let mut samples = 0;
    let mut worst_grad = 0.0f64;
    let mut attempts = 0;
    while samples < 50 && attempts < 500 {
        attempts += 1;
        let n = rng.random_range(2..=7);
        let c = random_weighted_chain(&mut rng, n);
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let (_, g, analytic) = objective_and_gradient(&c, &Mean::Logarithmic, f64::INFINITY, &u).unwrap();
        if !analytic {
            continue;
        }
        let fd = finite_difference_gradient(&c, &Mean::Logarithmic, f64::INFINITY, &u).unwrap();
        let scale = fd.amax().max(g.amax());
        if scale == 0.0 {
            continue;
        }
        worst_grad = worst_grad.max((&g - &fd).amax() / scale);
        samples += 1;
    }
    outcome(
        worst <= 1e-8 && samples == 50 && worst_grad <= 1e-5,
        format!("pencil vs bisection {worst:.2e} over 200; gradient vs FD {worst_grad:.2e} over {samples}"),
    )
}

fn dgamma_correctness() -> Outcome {
    let two = d_gamma(&hypercube(1).unwrap(), 0, 1).unwrap().value;
    let mut chains = vec![
        hypercube(1).unwrap(),
        hypercube(2).unwrap(),
        hypercube(3).unwrap(),
        cycle(5).unwrap(),
        cycle(6).unwrap(),
        cycle(7).unwrap(),
        cycle(8).unwrap(),
        complete(4).unwrap(),
        path(4).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let n = rng.random_range(3..=6);
        chains.push(random_weighted_chain(&mut rng, n));
    }
    let mut failures = 0;
    let mut pairs = 0;
    for c in &chains {
        let n = c.len();
        let dist = c.distance_matrix();
        let factor = (c.stats().deg_weighted_max / 2.0).sqrt();
        let m: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| d_gamma(c, x, y).unwrap().value).collect()).collect();
        for x in 0..n {
            for y in 0..n {
                pairs += 1;
                let v = m[x][y];
                let mut ok = (v - m[y][x]).abs() <= 1e-8 * v.max(1.0)
                    && ((x == y) == (v == 0.0))
                    && dist[x][y] as f64 <= factor * v + 1e-9
                    && factor * v <= v / 2f64.sqrt() + 1e-12;
                ok &= (0..n).all(|z| m[x][z] <= v + m[y][z] + 1e-8);
                if !ok {
                    failures += 1;
                }
            }
        }
    }
    let two_err = (two - 2f64.sqrt()).abs();
    outcome(
        two_err <= 1e-8 && failures == 0,
        format!("two-state error {two_err:.2e}; {failures} failing of {pairs} pairs over {} chains", chains.len()),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("hypercube Lichnerowicz sharpness", hypercube_sharpness),
        ("cycle curvature and closed forms", cycle_closed_forms),
        ("entropic estimate convergence", entropic_convergence),
        ("dimension-two lower bound on random graphs", dimension_two_lower_bound),
        ("form identities and Green formula", form_identities),
        ("heat-flow gradient estimate and sharpness probe", gradient_estimate_suite),
        ("optimal complexes of cycles", cycle_complexes),
        ("equilibrium optimality vs Lichnerowicz sharpness", equilibrium_agreement),
        ("inequality battery on hypercubes", hypercube_battery),
        ("dual solver and gradient agreement", dual_solvers),
        ("d_Gamma correctness", dgamma_correctness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("criterion {}: {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
