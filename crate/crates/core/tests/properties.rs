use proptest::prelude::*;

use rbsmc::examples;
use rbsmc::linalg::{eigenvalues, singular_values, RMatrix};
use rbsmc::lmi::{assemble_linear_lmi, minimize_gamma, solve_feasibility, LmiProblem};
use rbsmc::rota_baxter::{rb_residual, RotaBaxterOperator};
use rbsmc::sim::{delta_v_check, simulate, Disturbance, Mode, SimSpec};
use rbsmc::smc::{deform, reaching_time, run_design, DelayedSystem};
use rbsmc::spectral::{build_companion, is_schur_stable};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = RMatrix> {
    proptest::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| RMatrix::new(rows, cols, v).unwrap())
}

fn system() -> impl Strategy<Value = DelayedSystem> {
    (2usize..=4, 1usize..=2)
        .prop_flat_map(|(n, tau)| {
            let m = 1..n;
            (Just(n), Just(tau), m)
        })
        .prop_flat_map(|(n, tau, m)| {
            (matrix(n, n), matrix(n, n), matrix(n, m), matrix(m, n), matrix(n, 1), Just(tau))
        })
        .prop_filter_map("C B must be well conditioned", |(a, ad, b, c, d, tau)| {
            let cb = c.matmul(&b).ok()?;
            let sv = singular_values(&cb);
            (*sv.last()? > 0.1).then(|| DelayedSystem::new(a, ad, b, c, d, tau, 0.1).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_identities(sys in system(), lambda in 0.2f64..2.0) {
        let def = deform(&sys, &RotaBaxterOperator::scalar(lambda)).unwrap();
        let n = sys.n();
        let pi2 = def.pi.matmul(&def.pi).unwrap();
        prop_assert!((&pi2 - &def.pi).max_abs() < 1e-9);
        prop_assert!(sys.c.matmul(&def.pi).unwrap().max_abs() < 1e-9);
        prop_assert!(def.pi.matmul(&def.b_p).unwrap().max_abs() < 1e-9);
        prop_assert!(sys.c.matmul(&def.a_bar).unwrap().max_abs() < 1e-9);
        // rank(Π) = n − m shows up as m zero eigenvalues
        let zeros = eigenvalues(&def.pi).unwrap().iter().filter(|z| z.norm() < 1e-8).count();
        prop_assert_eq!(zeros, sys.m());
        prop_assert_eq!(def.pi.shape(), (n, n));
    }

    #[test]
    fn square_invertible_actuation_is_degenerate(a in matrix(3, 3), d in matrix(3, 1), lambda in 0.2f64..2.0) {
        let b = RMatrix::identity(3);
        let sys = DelayedSystem::new(a.clone(), a, b.clone(), b, d, 1, 0.1).unwrap();
        let def = deform(&sys, &RotaBaxterOperator::scalar(lambda)).unwrap();
        prop_assert!(def.is_degenerate());
    }

    #[test]
    fn scalar_operator_satisfies_identity(lambda in -2.0f64..2.0, x in matrix(3, 3), y in matrix(3, 3)) {
        let p = RotaBaxterOperator::scalar(lambda);
        prop_assert!(rb_residual(&p, &x.to_complex(), &y.to_complex()).unwrap() < 1e-12);
    }

    #[test]
    fn reaching_time_is_monotone_in_initial_surface(phi in 0.1f64..1.0, beta in 0.01f64..0.9, frac in 0.0f64..0.9, s0 in 0.0f64..10.0, ds in 0.0f64..5.0) {
        let s_star = frac * phi;
        prop_assert!(reaching_time(s0, phi, beta, s_star) <= reaching_time(s0 + ds, phi, beta, s_star));
        if s0 > phi {
            // β^T (s0 − s*) + s* ≤ φ
            let t = reaching_time(s0, phi, beta, s_star) as i32;
            prop_assert!(beta.powi(t) * (s0 - s_star) + s_star <= phi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn reduced_dynamics_stay_on_the_manifold(sys in system(), seed in any::<u64>()) {
        let def = deform(&sys, &RotaBaxterOperator::scalar(0.5)).unwrap();
        let hist: Vec<Vec<f64>> = (0..=sys.tau).map(|i| (0..sys.n()).map(|j| 0.1 * (i + j) as f64 - 0.2).collect()).collect();
        let spec = SimSpec { horizon: 15, mode: Mode::Reduced, disturbance: Disturbance::Uniform { radius: None }, initial_history: hist };
        let mut design = examples::underactuated_design();
        design.k = RMatrix::zeros(sys.m(), sys.n());
        let a = simulate(&sys, &def, &design, None, &spec, seed).unwrap();
        let b = simulate(&sys, &def, &design, None, &spec, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for k in 1..=15isize {
            let s = a.sliding_norm(k);
            let x = a.state(k).iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(s <= 1e-9 * x, "s({}) = {}", k, s);
        }
    }
}

#[test]
fn design_flags_are_a_prefix() {
    let sys = examples::underactuated_system();
    let p = RotaBaxterOperator::scalar(examples::LAMBDA);
    for rho in [0.0, 0.1, 0.2, 0.3] {
        for phi in [0.2, 0.5, 1.0] {
            let mut d = examples::underactuated_design();
            d.rho = rho;
            d.phi = phi;
            let st = run_design(&sys, &p, &d, None);
            let first_fail = st.step_flags.iter().position(|f| !f).unwrap_or(6);
            assert!(st.step_flags[first_fail..].iter().all(|f| !f), "{:?}", st.step_flags);
        }
    }
}

#[test]
fn lmi_feasibility_implies_spectral_stability() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let mut r = |s: f64| RMatrix::from_fn(n, n, |_, _| rng.gen_range(-s..s));
        let (a, ad) = (r(0.6), r(0.3));
        let d = RMatrix::from_fn(n, 1, |i, _| 0.1 * (i + 1) as f64);
        let prob = LmiProblem::new(a.clone(), ad.clone(), d).unwrap();
        if let Some((q, y)) = solve_feasibility(&prob, 1.0).unwrap() {
            feasible += 1;
            let lmi = assemble_linear_lmi(&prob, &q, &y, 1.0).unwrap();
            let top = rbsmc::linalg::symmetric_eigenvalues(&lmi).unwrap();
            assert!(*top.last().unwrap() < 0.0);
            let form = build_companion(&a, &ad, 1).unwrap();
            assert!(is_schur_stable(&form).unwrap().stable);
        }
    }
    assert!(feasible > 5, "only {feasible} feasible draws");
}

#[test]
fn certified_reduced_run_decreases_lyapunov() {
    let sys = examples::underactuated_system();
    let def = deform(&sys, &RotaBaxterOperator::scalar(examples::LAMBDA)).unwrap();
    let prob = LmiProblem::from_deformed(&def).unwrap();
    let cert = minimize_gamma(&prob, 1.0).unwrap();
    let spec = SimSpec {
        horizon: 25,
        mode: Mode::Reduced,
        disturbance: Disturbance::Zero,
        initial_history: vec![vec![1.0, -0.5], vec![0.3, 0.2]],
    };
    let traj = simulate(&sys, &def, &examples::underactuated_design(), Some(&cert), &spec, 0).unwrap();
    let rep = delta_v_check(&traj, &cert, &def).unwrap();
    assert!(rep.max_violation <= 1e-10, "{rep:?}");
    assert!(rep.telescoping_residual <= 1e-10, "{rep:?}");
}
