use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxlab::born_infeld::{
    bi_hamiltonian, bi_hamiltonian_forms, bi_hamiltonian_grad, bi_lagrangian, bi_step, bi_velocity_via_e,
    bi_velocity_zero_lambda, maxwell_limit_check, run_bi, theta_abs_velocity, BiInitial, BiParams, BiState,
    BornInfeld,
};
use relaxlab::fields::grid3::{Grid3, VecField3};
use relaxlab::gradient_flow::{
    defect, defect_numeric, general_dissipation_residual, legendre_transform, FormTrajectory, SearchGrid, Theta,
    VectorEntropy,
};
use relaxlab::RelaxError;

const TAU: f64 = 2.0 * PI;

fn rand_vec(rng: &mut ChaCha8Rng, r: f64) -> [f64; 3] {
    [rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r)]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[test]
fn hamiltonian_forms_agree_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let (d, b) = (rand_vec(&mut rng, 3.0), rand_vec(&mut rng, 3.0));
        let lam = rng.random_range(0.0..3.0);
        let (h1, h2) = bi_hamiltonian_forms(d, b, lam);
        assert!((h1 - h2).abs() <= 1e-12 * h1.max(1.0), "{h1} {h2}");
    }
}

#[test]
fn hamiltonian_matches_brute_force_legendre() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let grid = SearchGrid::default();
    let zero = legendre_transform(&BornInfeld { lambda: 1.3 }, &[0.0; 3], &[0.0; 3], &grid).unwrap();
    assert!((zero - 1.3).abs() < 1e-6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (d, b) = (rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 1.0));
        let lam = rng.random_range(0.5..2.0);
        let brute = legendre_transform(&BornInfeld { lambda: lam }, &d, &b, &grid).unwrap();
        worst = worst.max((brute - bi_hamiltonian(d, b, lam)).abs());
    }
    assert!(worst <= 1e-3, "worst {worst}");
}

#[test]
fn defect_vanishes_at_closed_form_gradient() {
    let (d, b) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let l = BornInfeld { lambda: 1.0 };
    let e = bi_hamiltonian_grad(d, b, 1.0);
    assert!(defect(&l, &b, &e, &d).unwrap().abs() <= 1e-12);
    let brute = defect_numeric(&l, &b, &e, &d, &SearchGrid::default()).unwrap();
    assert!(brute.abs() <= 1e-6, "{brute}");
}

#[test]
fn fenchel_young_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 10_000 {
        let (d, b, e) = (rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0), rand_vec(&mut rng, 2.0));
        let l = BornInfeld { lambda: rng.random_range(0.2..2.0) };
        if !bi_lagrangian(e, b, l.lambda).is_finite() {
            continue;
        }
        assert!(defect(&l, &b, &e, &d).unwrap() >= -1e-9);
        let star = bi_hamiltonian_grad(d, b, l.lambda);
        assert!(defect(&l, &b, &star, &d).unwrap().abs() <= 1e-6);
        checked += 1;
    }
}

#[test]
fn lagrangian_outside_domain_is_flagged() {
    let l = BornInfeld { lambda: 1.0 };
    assert!(matches!(defect(&l, &[0.0; 3], &[2.0, 0.0, 0.0], &[0.0; 3]), Err(RelaxError::DomainViolation(_))));
}

#[test]
fn zero_lambda_velocity_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20_000 {
        let (d, b) = (rand_vec(&mut rng, 5.0), rand_vec(&mut rng, 2.0));
        let v = bi_velocity_zero_lambda(d, b);
        assert!(norm(v) < 1.0 - 1e-12);
        if norm(b) >= 1e-3 {
            let w = bi_velocity_via_e(d, b);
            for a in 0..3 {
                assert!((v[a] - w[a]).abs() <= 1e-8, "{v:?} {w:?}");
            }
        }
    }
}

#[test]
fn maxwell_limits() {
    let lams = [10.0, 100.0, 1000.0];
    let m = maxwell_limit_check([0.0; 3], [1.0, 0.0, 0.0], &lams).unwrap();
    assert_eq!(m.limit, -0.5);
    assert!((m.slope.unwrap() + 2.0).abs() <= 0.1);
    let e = maxwell_limit_check([1.0, 0.0, 0.0], [0.0; 3], &lams).unwrap();
    assert_eq!(e.limit, 0.5);
    assert!((e.g[2] - 0.5).abs() < 1e-6);
    assert!((e.slope.unwrap() + 2.0).abs() <= 0.1);
    let mixed = maxwell_limit_check([0.3, 0.4, 0.0], [0.0, 0.5, 1.0], &lams).unwrap();
    assert!((mixed.slope.unwrap() + 2.0).abs() <= 0.1);
    assert!(matches!(
        maxwell_limit_check([0.0; 3], [0.0; 3], &[0.0]),
        Err(RelaxError::InvalidArgument(_))
    ));
}

#[test]
fn uniform_field_has_zero_dissipation_terms() {
    let g = Grid3::cube(8).unwrap();
    let b = VecField3::from_fn(g, |_| [0.6, 0.0, 0.8]);
    let e = VecField3::from_fn(g, |_| [0.0; 3]);
    let (bs, es) = (vec![b.clone(), b], vec![e]);
    let traj = FormTrajectory::TwoForm { times: &[0.0, 0.1], b: &bs, e: &es };
    for theta in [VectorEntropy::Quadratic, VectorEntropy::Abs { delta: 1e-3 }] {
        let rep = general_dissipation_residual(2, 3, &traj, &BornInfeld { lambda: 0.0 }, Theta::Vector(theta)).unwrap();
        assert!(rep.residual[0].abs() <= 1e-12, "{:?}", rep.residual);
        assert!(rep.action[0].abs() <= 1e-12);
    }
}

#[test]
fn theta_abs_uniform_field() {
    let g = Grid3::cube(8).unwrap();
    let b = VecField3::from_fn(g, |_| [1.0, 2.0, -0.5]);
    let r = theta_abs_velocity(&b, 1e-3).unwrap();
    assert!(r.divergence_form.max_magnitude() <= 1e-12);
    assert!(r.cross_form.max_magnitude() <= 1e-12);
    assert!(theta_abs_velocity(&b, 0.0).is_err());
}

#[test]
fn theta_abs_routes_agree_on_offset_shear() {
    let g = Grid3::cube(64).unwrap();
    let b = VecField3::from_fn(g, |x| [3.0 + 2.0 * (TAU * x[2]).sin(), 0.0, 0.0]);
    let mut prev = f64::INFINITY;
    for delta in [0.4, 0.2, 0.1, 0.05] {
        let r = theta_abs_velocity(&b, delta).unwrap();
        assert!(r.discrepancy < prev, "δ = {delta}: {} after {prev}", r.discrepancy);
        prev = r.discrepancy;
    }
    assert!(theta_abs_velocity(&b, 1e-3).unwrap().discrepancy <= 5e-2);
}

#[test]
fn theta_abs_routes_agree_on_helical_field() {
    // unit helix: both routes give (B·∇)B/H₀ up to the δ smoothing
    let g = Grid3::cube(64).unwrap();
    let (a, c) = (0.6, 0.8);
    let b = BiInitial::Helical { a, c }.field(g);
    let r = theta_abs_velocity(&b, 1e-3).unwrap();
    let flow = r.cross_form.max_magnitude();
    assert!(flow > 0.5, "{flow}");
    assert!(r.discrepancy <= 5e-2);
    let mut prev = f64::INFINITY;
    for delta in [0.4, 0.2, 0.1, 0.05, 0.025] {
        let d = theta_abs_velocity(&b, delta).unwrap().discrepancy;
        assert!(d < prev, "δ = {delta}: {d} after {prev}");
        prev = d;
    }
}

fn one_step(p: &BiParams) -> (BiState, BiState) {
    let g = p.validate().unwrap();
    let s = BiState { time: 0.0, b: p.initial.field(g) };
    let (next, _) = bi_step(&s, p).unwrap();
    (s, next)
}

#[test]
fn uniform_field_is_a_fixed_point() {
    let p = BiParams {
        n: 16,
        initial: BiInitial::Uniform { b: [1.0, -0.5, 2.0] },
        ..BiParams::default()
    };
    let (s, next) = one_step(&p);
    for i in 0..s.b.grid().len() {
        for a in 0..3 {
            assert!((next.b.at(i)[a] - s.b.at(i)[a]).abs() <= 1e-12);
        }
    }
}

#[test]
fn beltrami_field_is_stationary_for_quadratic_theta() {
    let p = BiParams {
        n: 16,
        initial: BiInitial::Abc { perturbation: 0.0 },
        ..BiParams::default()
    };
    let (s, next) = one_step(&p);
    let scale = s.b.max_magnitude();
    for i in 0..s.b.grid().len() {
        for a in 0..3 {
            assert!((next.b.at(i)[a] - s.b.at(i)[a]).abs() <= 1e-10 * scale);
        }
    }
}

#[test]
fn step_rejects_large_dt() {
    let p = BiParams { n: 16, dt: 0.1, ..BiParams::default() };
    let g = p.validate().unwrap();
    let s = BiState { time: 0.0, b: p.initial.field(g) };
    assert!(matches!(bi_step(&s, &p), Err(RelaxError::CflViolation { .. })));
}

#[test]
fn quadratic_single_mode_decay_rate() {
    // Linearising about (b0, 0, 0) gives ∂tB1 = b0 ∂₃²B1, so ∫θ above its
    // mean part decays at 2·4π²b0.
    let (b0, eps) = (1.0, 0.01);
    let p = BiParams {
        n: 32,
        dt: 1e-4,
        t_final: 0.01,
        snap_every: 100,
        initial: BiInitial::Sheared { background: b0, amplitude: eps },
        ..BiParams::default()
    };
    let run = run_bi(&p).unwrap();
    let rows = &run.ledger.rows;
    assert!(run.ledger.max_theta_rise() <= 0.0);
    let mean = 0.5 * b0 * b0;
    let (e0, e1) = (rows[0].theta_b - mean, rows.last().unwrap().theta_b - mean);
    let rate = -(e1 / e0).ln() / p.t_final;
    let linear = 2.0 * 4.0 * PI * PI * b0;
    assert!((rate / linear - 1.0).abs() < 1e-2, "rate {rate} vs {linear}");
    // regression baseline at n = 32³, dt = 1e-4
    assert!((rate - 78.8752).abs() < 1e-3, "rate {rate}");
    for r in rows {
        assert!(r.max_v < 1.0);
        assert!(r.e_dot_b_max <= 1e-10);
        assert!(r.div_b_max <= 1e-10);
    }
}

#[test]
fn abc_demo_at_32_cubed() {
    let p = BiParams::default();
    assert_eq!(p.n, 32);
    let start = Instant::now();
    let run = run_bi(&p).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 120.0, "{secs} s");
    let rows = &run.ledger.rows;
    assert_eq!(rows.len(), 501);
    let t0 = rows[0].theta_b;
    for w in rows.windows(2) {
        assert!(w[1].theta_b - w[0].theta_b <= 1e-8 * t0, "{} -> {}", w[0].theta_b, w[1].theta_b);
    }
    assert!(rows.last().unwrap().theta_b < t0);
    for r in &rows[1..] {
        assert!(r.max_v < 1.0 && r.max_v > 0.0);
        assert!(r.e_dot_b_max <= 1e-10, "{}", r.e_dot_b_max);
        assert!(r.div_b_max <= 1e-10 * run.snapshots[0].b.max_magnitude(), "{}", r.div_b_max);
    }
}

#[test]
fn abs_theta_run_dissipates() {
    let p = BiParams {
        n: 16,
        theta: VectorEntropy::Abs { delta: 0.05 },
        dt: 2e-4,
        t_final: 0.02,
        initial: BiInitial::Abc { perturbation: 0.5 },
        ..BiParams::default()
    };
    let run = run_bi(&p).unwrap();
    let t0 = run.ledger.rows[0].theta_b;
    for w in run.ledger.rows.windows(2) {
        assert!(w[1].theta_b - w[0].theta_b <= 1e-8 * t0);
    }
    let mut buf = Vec::new();
    run.ledger.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("time,thetaB,maxv,divB_max,EdotB_max\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn velocity_is_subluminal(d in prop::array::uniform3(-1e3..1e3f64), b in prop::array::uniform3(-1e3..1e3f64)) {
        prop_assert!(norm(bi_velocity_zero_lambda(d, b)) < 1.0);
    }

    #[test]
    fn hamiltonian_grad_is_finite_difference(
        d in prop::array::uniform3(-2.0..2.0f64),
        b in prop::array::uniform3(-2.0..2.0f64),
        lam in 0.1..2.0f64,
    ) {
        let g = bi_hamiltonian_grad(d, b, lam);
        let h = 1e-6;
        for a in 0..3 {
            let (mut p, mut m) = (d, d);
            p[a] += h;
            m[a] -= h;
            let fd = (bi_hamiltonian(p, b, lam) - bi_hamiltonian(m, b, lam)) / (2.0 * h);
            prop_assert!((fd - g[a]).abs() <= 1e-6);
        }
    }

    #[test]
    fn lagrangian_is_convex_in_e(
        e1 in prop::array::uniform3(-1.0..1.0f64),
        e2 in prop::array::uniform3(-1.0..1.0f64),
        b in prop::array::uniform3(-1.0..1.0f64),
        lam in 0.5..2.0f64,
    ) {
        let (l1, l2) = (bi_lagrangian(e1, b, lam), bi_lagrangian(e2, b, lam));
        prop_assume!(l1.is_finite() && l2.is_finite());
        let mid = [(e1[0] + e2[0]) / 2.0, (e1[1] + e2[1]) / 2.0, (e1[2] + e2[2]) / 2.0];
        prop_assert!(bi_lagrangian(mid, b, lam) <= 0.5 * (l1 + l2) + 1e-12);
    }
}
