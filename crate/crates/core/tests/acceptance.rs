mod common;

use std::process::ExitCode;
use std::time::Instant;

use ambiguity_core::dispatch::{run_case_study, BatteryScenario, CaseStudyConfig, DispatchProblem, Generator, BatteryUnit, BatteryCell};
use ambiguity_core::distributions::{GaussianMixture1D, NoiseNormBounds};
use ambiguity_core::linalg::{dmat, dvec};
use ambiguity_core::montecarlo::{coverage_experiment, folded_gaussian_exceedance, DEFAULT_REFERENCE_SIZE};
use ambiguity_core::radius::*;
use ambiguity_core::system::{design_gain_time_invariant, matrix_bound_certificate, FilterDesign, LtvSystem, TransitionProducts};
use ambiguity_core::wasserstein::{optimal_plan, wasserstein_p, DiscreteMeasure};
use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;

use common::rng;

const EXPECTED_FAILURES: &[usize] = &[2, 3];

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn battery_model_parts() -> (LtvSystem, ambiguity_core::system::ObserverDesign, TransitionProducts, NoiseNormBounds, f64) {
    let sc = BatteryScenario::reference().unwrap();
    let sys = sc.system().unwrap();
    let obs = sc.observer(&sys).unwrap();
    let products = TransitionProducts::new(&sys, &obs, sys.horizon()).unwrap();
    let bounds = sc.noise_bounds().unwrap();
    let rho0 = sc.initial_deviation_law().unwrap().sup_radius();
    (sys, obs, products, bounds, rho0)
}

/// The four coefficients of `ψ_N = k₀ + a N^{−1/6} + b (ln β_nom⁻¹)^{1/4} N^{−1/4} + k₃ (ln(2/β_ns))^{1/2} N^{−1/2}`.
struct RadiusCoefficients {
    constant: f64,
    a: f64,
    b: f64,
    noise: f64,
    r2_over_c: f64,
    frak: FrakConstants,
    max_formula_gap: f64,
}

fn battery_radius_coefficients() -> RadiusCoefficients {
    let (sys, obs, products, bounds, rho0) = battery_model_parts();
    let model = RadiusModel::new(&sys, &obs, &products, bounds, rho0, 0.0);
    let ell = sys.horizon();
    let fc = model.frak(ell).unwrap();
    let rho = model.support_radius(ell).unwrap();
    let coef = explicit_coefficients(rho, sys.d(), 2.0).unwrap();
    let scale = 2f64.sqrt();
    let r2_over_c = fc.frak_r * fc.frak_r / C_PRIME;
    let out = RadiusCoefficients {
        constant: scale * (fc.big_m_w + fc.big_m_v),
        a: coef.a,
        b: coef.b,
        noise: scale * fc.big_m_v * r2_over_c.sqrt(),
        r2_over_c,
        frak: fc,
        max_formula_gap: 0.0,
    };
    let mut gap: f64 = 0.0;
    for n in [1000, 10_000, 100_000] {
        for (bn, bs) in [(0.05, 0.05), (0.01, 0.09)] {
            let split = ConfidenceSplit::new(bn, bs).unwrap();
            let got = model.total_radius(ell, n, split).unwrap().psi_total;
            let nf = n as f64;
            let formula = out.constant
                + out.a * nf.powf(-1.0 / 6.0)
                + out.b * (1.0f64 / bn).ln().powf(0.25) * nf.powf(-0.25)
                + out.noise * (2.0f64 / bs).ln().sqrt() * nf.powf(-0.5);
            gap = gap.max(rel(got, formula));
        }
    }
    RadiusCoefficients { max_formula_gap: gap, ..out }
}

fn nominal_constants() -> Outcome {
    let coef = explicit_coefficients(0.225, 6, 2.0).unwrap();
    let pass = rel(coef.a, 4.02) <= 0.01 && rel(coef.b, 1.31) <= 0.01;
    Outcome {
        id: 1,
        name: "nominal-radius coefficients",
        pass,
        detail: format!("a = {:.4} (target 4.02), b = {:.4} (target 1.31), tol 1%", coef.a, coef.b),
    }
}

fn noise_constants(rc: &RadiusCoefficients) -> Outcome {
    let fc = &rc.frak;
    let checks = [
        rel(fc.big_m_w, 0.325) <= 0.05,
        rel(fc.big_m_v, 0.008) <= 0.05,
        rel(fc.frak_r, 2.72) <= 0.05,
        rel(rc.constant, 0.47) <= 0.05,
        rel(fc.big_m_v * 2f64.sqrt(), 0.0113) <= 0.05,
        rel(rc.r2_over_c, 74.98) <= 0.02,
        rc.max_formula_gap <= 1e-9,
    ];
    Outcome {
        id: 2,
        name: "noise-radius constants",
        pass: checks.iter().all(|c| *c),
        detail: format!(
            "M_w = {:.4} (0.325), M_v = {:.5} (0.008), r = {:.3} (2.72), tol 5%; constant {:.4} (0.47), \
             slope {:.5} (0.0113), r²/c' = {:.2} (74.98, tol 2%)",
            fc.big_m_w,
            fc.big_m_v,
            fc.frak_r,
            rc.constant,
            fc.big_m_v * 2f64.sqrt(),
            rc.r2_over_c
        ),
    }
}

fn total_radius(rc: &RadiusCoefficients) -> Outcome {
    let pass = rel(rc.constant, 0.47) <= 0.05
        && rel(rc.a, 4.02) <= 0.01
        && rel(rc.b, 1.31) <= 0.01
        && rel(rc.noise, 0.0973) <= 0.05
        && rc.max_formula_gap <= 1e-9;
    Outcome {
        id: 3,
        name: "total-radius coefficients",
        pass,
        detail: format!(
            "{:.4} + {:.4} N^-1/6 + {:.4} (ln 1/b_nom)^1/4 N^-1/4 + {:.4} (ln 2/b_ns)^1/2 N^-1/2 \
             vs 0.47, 4.02, 1.31, 0.0973; formula gap {:.1e}",
            rc.constant, rc.a, rc.b, rc.noise, rc.max_formula_gap
        ),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

fn transport_oracle() -> Outcome {
    let mut r = rng(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = r.random_range(1..=6);
        let d = r.random_range(1..=4);
        let p = [1.0, 2.0, 3.0][r.random_range(0..3)];
        let x: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0))).collect();
        let y: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0))).collect();
        let brute = permutations(n)
            .iter()
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| (&x[i] - &y[j]).norm().powf(p)).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min)
            .powf(1.0 / p);
        let mu = DiscreteMeasure::uniform(x).unwrap();
        let nu = DiscreteMeasure::uniform(y).unwrap();
        let assignment = wasserstein_p(&mu, &nu, p).unwrap();
        let simplex = optimal_plan(&mu, &nu, p).unwrap().cost.max(0.0).powf(1.0 / p);
        worst = worst.max((assignment - brute).abs()).max((simplex - brute).abs());
    }
    Outcome {
        id: 4,
        name: "optimal-transport oracle",
        pass: worst <= 1e-9,
        detail: format!("500 instances, max |solver − brute force| = {worst:.2e}, tol 1e-9"),
    }
}

fn concentration() -> Outcome {
    let mut worst_margin = f64::INFINITY;
    let mut points = 0;
    for p in [1.0, 2.0] {
        let z = GaussianMixture1D::normal(0.0, 1.0).unwrap();
        let r = z.psi_norm(p).unwrap() / z.lp_norm(p).unwrap() + 1.0 / std::f64::consts::LN_2;
        for n in [5, 20, 100] {
            for t in [0.05, 0.2, 0.5, 1.0, 2.0] {
                let freq = folded_gaussian_exceedance(n, t, p, 10_000, 77 + points as u64).unwrap();
                let bound = concentration_tail_bound(n, t, p, r).unwrap();
                worst_margin = worst_margin.min(bound - freq);
                points += 1;
            }
        }
    }
    Outcome {
        id: 5,
        name: "concentration around the p-th mean",
        pass: worst_margin >= 0.0,
        detail: format!("{points} grid points x 10^4 repetitions, min(bound − frequency) = {worst_margin:.4}"),
    }
}

fn coverage() -> Outcome {
    let mut spec = common::toy_spec(20, 200, 99);
    spec.reference_size = DEFAULT_REFERENCE_SIZE;
    let report = coverage_experiment(&spec).unwrap();
    Outcome {
        id: 6,
        name: "coverage guarantee",
        pass: report.coverage >= 0.836,
        detail: format!(
            "beta = 0.1, N = 20, T = 200: coverage {:.3} (floor 0.836), psi = {:.4}",
            report.coverage, report.psi
        ),
    }
}

fn random_discrete(r: &mut impl Rng, n: usize, d: usize) -> DiscreteMeasure {
    let atoms: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(d, |_, _| r.random_range(-2.0..2.0))).collect();
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteMeasure::new(atoms, raw.iter().map(|w| w / total).collect()).unwrap()
}

fn propagation() -> Outcome {
    let a = dmat(&[&[2.0, 0.0], &[0.0, 1.0]]);
    let sys = LtvSystem::time_invariant(a, DMatrix::identity(2, 2), DMatrix::identity(1, 2), 3).unwrap();
    let base = DiscreteMeasure::uniform(vec![dvec(&[1.0, 1.0]), dvec(&[-1.0, 0.5])]).unwrap();
    let unknown = pointwise_propagation(&sys, base.clone(), 1.0, 0, &PropagationMode::UnknownNoise { q_w: 0.1 }, 3).unwrap();
    let mut hand = vec![1.0];
    for _ in 0..3 {
        let next = 2.0 * hand.last().unwrap() + 0.1;
        hand.push(next);
    }
    let unknown_ok = unknown.iter().zip(&hand).all(|(s, h)| s.radius == *h)
        && (unknown[2].radius - 4.3).abs() < 1e-15
        && unknown[3].center.atoms()[0] == dvec(&[8.0, 1.0]);
    let laws = vec![
        DiscreteMeasure::dirac(dvec(&[0.5, 0.0])),
        DiscreteMeasure::dirac(dvec(&[0.0, -0.5])),
        DiscreteMeasure::dirac(dvec(&[0.25, 0.25])),
    ];
    let known = pointwise_propagation(&sys, base, 1.0, 0, &PropagationMode::KnownNoise { laws }, 3).unwrap();
    let known_ok = known.iter().enumerate().all(|(k, s)| s.radius == 2f64.powi(k as i32))
        && known[3].center.atoms()[0] == dvec(&[2.0 * (2.0 * (2.0 * 1.0 + 0.5)) + 0.25, 1.0 - 0.5 + 0.25]);

    let mut r = rng(4);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let d = r.random_range(1..=3);
        let p = [1.0, 2.0, 3.0][r.random_range(0..3)];
        let (n1, n2, nq) = (r.random_range(1..=5), r.random_range(1..=5), r.random_range(1..=4));
        let p1 = random_discrete(&mut r, n1, d);
        let p2 = random_discrete(&mut r, n2, d);
        let q = random_discrete(&mut r, nq, d);
        let base = wasserstein_p(&p1, &p2, p).unwrap();
        let smoothed = wasserstein_p(&p1.convolve(&q).unwrap(), &p2.convolve(&q).unwrap(), p).unwrap();
        let perturbed = wasserstein_p(&p1, &p2.convolve(&q).unwrap(), p).unwrap();
        worst = worst.max(smoothed - base).max(perturbed - base - q.moment_radius(p));
    }
    Outcome {
        id: 7,
        name: "pointwise propagation",
        pass: unknown_ok && known_ok && worst <= 1e-10,
        detail: format!(
            "hand recursion unknown-noise {unknown_ok}, known-noise {known_ok}; convolution inequalities max violation {worst:.2e}"
        ),
    }
}

fn uniform_dominance() -> Outcome {
    let sys = common::toy_system(120);
    let design = FilterDesign::new(DMatrix::identity(2, 2) * 0.01, DMatrix::identity(1, 1) * 0.0025);
    let obs = design_gain_time_invariant(&sys, &design).unwrap();
    let products = TransitionProducts::new(&sys, &obs, 120).unwrap();
    let cert = matrix_bound_certificate(&sys, &obs, &products, 0..30).unwrap();
    let bounds = NoiseNormBounds::new(0.05, 0.05, 0.08, 2.0).unwrap();
    let (rho0, rho_w) = (2f64.sqrt(), 0.05 * 2f64.sqrt());
    let ti = uniform_noise_bounds(&sys, &obs, &cert, &bounds, rho0, rho_w, true).unwrap();
    let general = uniform_noise_bounds(&sys, &obs, &cert, &bounds, rho0, rho_w, false).unwrap();
    let sharper = ti.big_m_w <= general.big_m_w && ti.big_m_v <= general.big_m_v && ti.frak_r <= general.frak_r;
    let mut dominated = true;
    for ell in cert.s0..=cert.s0 + 20 {
        let fc = frak_constants(&sys, &obs, &products, &bounds, rho0, rho_w, ell).unwrap();
        for ub in [&ti, &general] {
            dominated &= fc.big_m_w <= ub.big_m_w && fc.big_m_v <= ub.big_m_v && fc.frak_r <= ub.frak_r;
        }
    }
    Outcome {
        id: 8,
        name: "uniform-bound dominance",
        pass: sharper && dominated,
        detail: format!(
            "s0 = {}, exact constants dominated on [s0, s0+20]: {dominated}; sharpened <= general: {sharper}",
            cert.s0
        ),
    }
}

fn psi2_inversion() -> Outcome {
    let z = GaussianMixture1D::normal(0.0, 1.0).unwrap();
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if z.orlicz_expectation(mid, 2.0).unwrap() > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let inverted = 0.5 * (lo + hi);
    let direct = z.psi_norm(2.0).unwrap();
    let target = (8.0f64 / 3.0).sqrt();
    let err = (inverted - target).abs().max((direct - target).abs());
    Outcome {
        id: 9,
        name: "psi_2 norm of N(0,1)",
        pass: err <= 1e-6,
        detail: format!("inverted {inverted:.9}, norm {direct:.9}, sqrt(8/3) = {target:.9}, tol 1e-6"),
    }
}

fn dispatch_out_of_sample() -> Outcome {
    let config = CaseStudyConfig {
        scenario: BatteryScenario::reference().unwrap(),
        n: 40,
        radius: 0.0354,
        realizations: 100,
        seed: 2025,
        true_samples: 20_000,
    };
    let rows = run_case_study(&config).unwrap();
    let certified = rows.iter().filter(|r| r.dro_certified()).count();
    let overpromised = rows.iter().filter(|r| r.saa_overpromised()).count();
    Outcome {
        id: 10,
        name: "dispatch out-of-sample behaviour",
        pass: certified >= 95 && overpromised >= 50,
        detail: format!(
            "N = 40, radius 0.0354: DRO value >= true cost in {certified}/100 (need 95), \
             SAA value < true cost in {overpromised}/100 (need 50)"
        ),
    }
}

fn random_instance(r: &mut impl Rng) -> DispatchProblem {
    let n_gen = r.random_range(1..=4);
    let generators: Vec<Generator> = (0..n_gen)
        .map(|_| Generator {
            weight: r.random_range(0.1..1.0),
            target: r.random_range(0.0..0.3),
            p_min: 0.2,
            p_max: r.random_range(0.3..0.8),
        })
        .collect();
    let n_bat = r.random_range(1..=3);
    let batteries: Vec<BatteryUnit> = (0..n_bat)
        .map(|_| {
            let current = r.random_range(1.0..9.0);
            let cell = BatteryCell::from_decay(
                r.random_range(0.85..0.99),
                0.34,
                0.17,
                500.0,
                r.random_range(1.0..6.0),
                1.43,
                1.0,
                vec![current],
                Vector2::new(1.6, 0.6),
            )
            .unwrap();
            BatteryUnit { cell, cost_alpha: r.random_range(0.5..1.5), cost_beta: 0.0 }
        })
        .collect();
    let n = r.random_range(5..=40);
    let atoms: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(2 * n_bat, |_, _| r.random_range(-0.1..0.1))).collect();
    DispatchProblem::new(
        generators,
        batteries,
        9,
        r.random_range(1.0..8.0),
        r.random_range(0.1..2.0),
        DiscreteMeasure::uniform(atoms).unwrap(),
        0.0,
    )
    .unwrap()
}

fn degeneracy() -> Outcome {
    let mut r = rng(31);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let prob = random_instance(&mut r);
        let saa = prob.solve_saa().unwrap().value;
        let dro = prob.solve_dro().unwrap().value;
        worst = worst.max((saa - dro).abs() / saa.abs().max(1e-12));
    }
    Outcome {
        id: 11,
        name: "DRO/SAA degeneracy at radius 0",
        pass: worst <= 1e-6,
        detail: format!("20 instances, max relative gap {worst:.2e}, tol 1e-6"),
    }
}

fn main() -> ExitCode {
    let rc = battery_radius_coefficients();
    let checks: Vec<Box<dyn Fn() -> Outcome>> = vec![
        Box::new(nominal_constants),
        Box::new(|| noise_constants(&rc)),
        Box::new(|| total_radius(&rc)),
        Box::new(transport_oracle),
        Box::new(concentration),
        Box::new(coverage),
        Box::new(propagation),
        Box::new(uniform_dominance),
        Box::new(psi2_inversion),
        Box::new(dispatch_out_of_sample),
        Box::new(degeneracy),
    ];
    let mut unexpected = Vec::new();
    for check in &checks {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{:>2}] {}: {} ({:.1}s)", o.id, o.name, o.detail, start.elapsed().as_secs_f64());
        if !o.pass && !EXPECTED_FAILURES.contains(&o.id) {
            unexpected.push(o.id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no failures outside the expected set {EXPECTED_FAILURES:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
