use isslab::admissibility::{ladder_verdict, scalar_convolution_norm, Verdict};
use isslab::lyapunov::{DiagQuadratic, IntegralHomogeneous, LyapunovFunction, SupExp};
use isslab::mild_solution::trajectory;
use isslab::scenarios::{build_diagonal_minus_n, build_heat_dirichlet, build_scalar_toy};
use isslab::signals::GridSignal;
use isslab::spectral::{DiagonalGenerator, EigenRule, LinearSystem, StateVector};
use isslab::Exponent;
use proptest::prelude::*;

const MODES: usize = 16;

fn minus_n() -> LinearSystem {
    build_diagonal_minus_n(MODES).unwrap().system
}

fn generator() -> DiagonalGenerator {
    DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, MODES).unwrap()
}

fn state() -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-10.0..10.0f64, MODES).prop_map(StateVector::new)
}

fn nonzero_state() -> impl Strategy<Value = StateVector> {
    state().prop_filter("nonzero state", |x| x.norm() > 1e-3)
}

/// Piecewise-constant multiplier input with up to six pieces on `[0, 4]`.
fn input() -> impl Strategy<Value = GridSignal> {
    prop::collection::vec((0.05..1.0f64, prop::collection::vec(-3.0..3.0f64, MODES)), 1..6).prop_map(|pieces| {
        let mut bps = vec![0.0];
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        for (w, _) in &pieces {
            bps.push(bps.last().unwrap() + 4.0 * w / total);
        }
        *bps.last_mut().unwrap() = 4.0;
        GridSignal::new(bps, pieces.into_iter().map(|p| p.1).collect(), vec![0.0; MODES]).unwrap()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn assert_states_close(a: &StateVector, b: &StateVector, rel: f64) -> Result<(), TestCaseError> {
    let scale = a.norm().max(b.norm()).max(1e-12);
    prop_assert!(a.sub(b).norm() <= rel * scale, "{:?} vs {:?}", a, b);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law(x in state(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let g = generator();
        let lhs = g.semigroup_apply(s + t, &x).unwrap();
        let rhs = g.semigroup_apply(s, &g.semigroup_apply(t, &x).unwrap()).unwrap();
        assert_states_close(&lhs, &rhs, 1e-13)?;
    }

    #[test]
    fn mild_solution_is_linear(x in state(), y in state(), u in input(), v in input(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let sys = minus_n();
        let t = [4.0];
        let phi = |x: &StateVector, u: &GridSignal| trajectory(&sys, x, u, &t).unwrap().final_state().clone();
        let combo = GridSignal::linear_combination(a, &u, b, &v).unwrap();
        let lhs = phi(&x.scaled(a).add(&y.scaled(b)), &combo);
        let rhs = phi(&x, &u).scaled(a).add(&phi(&y, &v).scaled(b));
        assert_states_close(&lhs, &rhs, 1e-11)?;
    }

    #[test]
    fn restarting_reproduces_the_flow(x in state(), u in input(), s in 0.1..3.0f64, t in 0.1..2.0f64) {
        let sys = minus_n();
        let direct = trajectory(&sys, &x, &u, &[s + t]).unwrap().final_state().clone();
        let mid = trajectory(&sys, &x, &u, &[s]).unwrap().final_state().clone();
        let restarted = trajectory(&sys, &mid, &u.shifted(s).unwrap(), &[t]).unwrap().final_state().clone();
        assert_states_close(&direct, &restarted, 1e-12)?;
    }

    #[test]
    fn lp_norm_is_absolutely_homogeneous(u in input(), a in -5.0..5.0f64, p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY])) {
        let p = Exponent::new(p).unwrap();
        let lhs = u.scaled(a).lp_norm(p, 4.0).unwrap();
        let rhs = a.abs() * u.lp_norm(p, 4.0).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn lyapunov_functions_are_homogeneous(x in state(), a in -4.0..4.0f64) {
        let g = generator();
        let fs: Vec<Box<dyn LyapunovFunction>> = vec![
            Box::new(DiagQuadratic::new(&g)),
            Box::new(IntegralHomogeneous::new(&g, 2).unwrap()),
            Box::new(IntegralHomogeneous::new(&g, 3).unwrap()),
            Box::new(SupExp::new(&g, 0.5).unwrap()),
        ];
        for v in &fs {
            let lhs = v.value(&x.scaled(a)).unwrap();
            let rhs = a.abs().powf(v.degree()) * v.value(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "{:?}", v.construction());
        }
    }

    #[test]
    fn lyapunov_coercivity_bounds_hold(x in nonzero_state()) {
        let g = generator();
        let heat = build_heat_dirichlet(1.0, MODES).unwrap();
        let hv = isslab::lyapunov::HeatQuadratic::new(&heat.system, 1.0, isslab::lyapunov::HeatRoute::Spectral).unwrap();
        let fs: Vec<Box<dyn LyapunovFunction>> = vec![
            Box::new(DiagQuadratic::new(&g)),
            Box::new(IntegralHomogeneous::new(&g, 2).unwrap()),
            Box::new(SupExp::new(&g, 0.5).unwrap()),
            Box::new(hv),
        ];
        for v in &fs {
            let (lo, hi) = v.coercivity();
            prop_assert!(lo <= hi);
            let nq = x.norm().powf(v.degree());
            let val = v.value(&x).unwrap();
            prop_assert!(val >= lo * nq * (1.0 - 1e-12) && val <= hi * nq * (1.0 + 1e-12), "{:?}", v.construction());
        }
    }

    #[test]
    fn quadratic_integral_is_half_the_diagonal_form(x in state()) {
        let g = generator();
        let diag = DiagQuadratic::new(&g).value(&x).unwrap();
        let integral = IntegralHomogeneous::new(&g, 2).unwrap().value(&x).unwrap();
        prop_assert!(close(integral, diag / 2.0, 1e-9));
    }

    #[test]
    fn increment_matches_value_difference(x in state(), d in state()) {
        let g = generator();
        let v = DiagQuadratic::new(&g);
        let d = d.scaled(1e-3);
        let inc = v.increment(&x, &d).unwrap();
        let diff = v.value(&x.add(&d)).unwrap() - v.value(&x).unwrap();
        prop_assert!((inc - diff).abs() <= 1e-9 * v.value(&x).unwrap().max(1.0));
    }

    #[test]
    fn scalar_convolution_norm_is_monotone_and_capped(r in 0.05..50.0f64, t in 0.01..50.0f64) {
        let a = scalar_convolution_norm(r, t);
        let b = scalar_convolution_norm(r, 2.0 * t);
        prop_assert!(a > 0.0 && a <= b * (1.0 + 1e-12));
        prop_assert!(b <= (1.0 / r) * (1.0 + 1e-12));
        prop_assert!(a <= t * (1.0 + 1e-12));
    }

    #[test]
    fn flat_ladders_plateau(c0 in 0.1..10.0f64, drift in 0.0..0.01f64) {
        let horizons = [1.0, 2.0, 4.0, 8.0, 16.0];
        let c: Vec<f64> = (0..5).map(|k| c0 * (1.0 + drift * k as f64)).collect();
        prop_assert_eq!(ladder_verdict(&horizons, &c).3, Verdict::InfiniteTimeConsistent);
        let grow: Vec<f64> = horizons.iter().map(|t| c0 * t.sqrt()).collect();
        prop_assert_eq!(ladder_verdict(&horizons, &grow).3, Verdict::Divergent);
    }

    #[test]
    fn exponent_round_trips(v in 1.0..1e6f64) {
        let e = Exponent::new(v).unwrap();
        let parsed: Exponent = e.to_string().parse().unwrap();
        prop_assert_eq!(parsed, e);
    }

    #[test]
    fn scalar_state_decays_without_input(x0 in -10.0..10.0f64, t in 0.0..20.0f64) {
        let sys = build_scalar_toy().system;
        let zero = GridSignal::zero(1, 1.0).unwrap();
        let x = trajectory(&sys, &StateVector::new(vec![x0]), &zero, &[t]).unwrap();
        prop_assert!(close(x.final_state().coefficients()[0], x0 * (-t).exp(), 1e-13) || x0 == 0.0);
    }
}
