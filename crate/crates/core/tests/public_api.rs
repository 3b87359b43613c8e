use approx::assert_relative_eq;
use lmshoot::{
    eigenvalue, eval_phi, eval_phi_inv, find_solutions, integrate_shoot, DoubleDouble,
    IntegratorSettings, NonlinearitySpec, Octuple, Problem, ProblemConfig, Real, ScanOptions,
    Side, System,
};

fn cubic<T: Real>(n: usize, r: f64) -> Problem<T> {
    Problem::new(
        NonlinearitySpec::cubic_pinned(),
        ProblemConfig::new(n, T::lit(r)).unwrap(),
    )
    .unwrap()
}

#[test]
fn interval_eigenvalues_are_squares() {
    let s = IntegratorSettings::<f64>::default();
    let config = ProblemConfig::new(1, 2.0).unwrap();
    for k in 2..=4 {
        let exact = ((k - 1) as f64 * std::f64::consts::PI / 2.0).powi(2);
        let got = eigenvalue(k, &config, &s).unwrap().lambda;
        assert_relative_eq!(got, exact, max_relative = 1e-8);
    }
}

#[test]
fn curvature_operator_inverts() {
    for s in [-0.999, -0.3, 0.0, 0.5, 0.9999] {
        let t = eval_phi(s).unwrap();
        assert_relative_eq!(t, s / ((1.0f64 - s) * (1.0 + s)).sqrt(), max_relative = 1e-14);
        assert_relative_eq!(eval_phi_inv(t), s, max_relative = 1e-14, epsilon = 1e-300);
    }
    assert!(eval_phi(1.0f64).is_err());
}

#[test]
fn constant_datum_stays_constant() {
    let p = cubic::<f64>(2, 5.0);
    let tr = integrate_shoot(&p, &IntegratorSettings::default(), 1.0, System::Original).unwrap();
    assert!(tr.u.iter().all(|u| *u == 1.0));
    assert_eq!(tr.sign_changes(), 0);
}

#[test]
fn planar_energy_is_conserved() {
    let p = cubic::<f64>(1, 8.0);
    let s = IntegratorSettings::default();
    for d in [0.2, 0.7, 1.4, 2.5] {
        let tr = integrate_shoot(&p, &s, d, System::Original).unwrap();
        let energy = |u: f64, v: f64| {
            let x = u.max(0.0) - 1.0;
            (1.0 + v * v).sqrt() + x.powi(5) / 5.0 + x.powi(4) / 4.0
        };
        let e0 = energy(tr.u[0], tr.v[0]);
        for (u, v) in tr.u.iter().zip(&tr.v) {
            assert_relative_eq!(energy(*u, *v), e0, max_relative = 1e-8);
        }
    }
}

#[test]
fn speed_stays_below_light_cone() {
    let p = cubic::<f64>(3, 20.0);
    let s = IntegratorSettings::default();
    for i in 1..40 {
        let d = 21.0 * i as f64 / 40.0;
        let tr = integrate_shoot(&p, &s, d, System::Original).unwrap();
        assert!(tr.max_speed < 1.0, "d = {d}: {}", tr.max_speed);
    }
}

#[test]
fn four_branches_above_first_threshold() {
    let p = cubic::<DoubleDouble>(2, 12.0);
    let set = find_solutions(
        &p,
        &IntegratorSettings::default(),
        1,
        &ScanOptions::default(),
    )
    .unwrap();
    assert!(set.pattern_holds(1), "{:?}", set.branches.iter().map(|b| b.zeros).collect::<Vec<_>>());
    for side in [Side::BelowOne, Side::AboveOne] {
        assert!(set.zeros_on(side).len() >= 2);
    }
    for b in &set.branches {
        assert!(b.residual.as_f64() < 1e-9);
        assert!(b.min_u.as_f64() > 0.0);
        assert_eq!(Side::of(b.d_star), b.label.side);
    }
}

#[test]
fn no_branches_below_first_threshold() {
    let p = cubic::<f64>(2, 4.0);
    let set = find_solutions(&p, &IntegratorSettings::default(), 1, &ScanOptions::default())
        .unwrap();
    assert!(!set.pattern_holds(1));
}

#[test]
fn wide_conversions_round_trip() {
    let x = DoubleDouble::lit(1.0) / DoubleDouble::lit(3.0);
    assert_eq!(DoubleDouble::narrow(x.widen()), x);
    let y = 0.1f64;
    assert_eq!(f64::narrow(y.widen()), y);
    let third = Octuple::lit(1.0) / Octuple::lit(3.0);
    assert!((DoubleDouble::narrow(third) - x).as_f64().abs() < 1e-31);
}
