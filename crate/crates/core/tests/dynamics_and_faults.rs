use qgauge::dynamics::{check_hypercurrent, check_shift_current_zero, propagate, Protocol};
use qgauge::sumrule::{check_force_balance, check_hyperforce, check_product_rule, decimated_points};
use qgauge::thermal::state_of_system;
use qgauge::{
    build_many_body, gaussian_pair_potential, random_hermitian, BasisSpec, Boundary, ManyBodySystem, MomentumScheme,
    Statistics,
};

fn pair_system(stats: Statistics) -> ManyBodySystem {
    let u = gaussian_pair_potential(1.0, 0.8);
    build_many_body(
        &BasisSpec::grid(12, 10.0, Boundary::HardWall, MomentumScheme::CentralDifference),
        2,
        stats,
        &u,
        &|x| 0.5 * x * x,
    )
    .unwrap()
}

#[test]
fn dynamical_rules_for_interacting_pairs() {
    for stats in [Statistics::Boson, Statistics::Fermion] {
        let sys = pair_system(stats);
        let st = state_of_system(&sys, 1.0, None).unwrap();
        let protocols = [
            Protocol::undriven(&sys, 3.0).unwrap(),
            Protocol::quench("trap", &sys, |x| 2.0 * x * x, 3.0).unwrap(),
            Protocol::quench("tilt", &sys, |x| 0.5 * x * x + 0.5 * x, 3.0).unwrap(),
        ];
        let times = [0.0, 0.5, 1.0, 2.0, 3.0];
        let points = decimated_points(&sys, 3);
        let a = random_hermitian(sys.dim(), 5);
        for p in &protocols {
            let sc = check_shift_current_zero(&st, &sys, p, &times, &points).unwrap();
            assert!(sc.pass, "{stats:?} {}: {}", p.label(), sc.max_residual);
            let hc = check_hypercurrent(&st, &sys, p, &a, &times, &points).unwrap();
            assert!(hc.pass, "{stats:?} {}: {}", p.label(), hc.max_residual);
        }
    }
}

#[test]
fn undriven_evolution_keeps_the_state_stationary() {
    let sys = pair_system(Statistics::Boson);
    let st = state_of_system(&sys, 2.0, None).unwrap();
    let p = Protocol::undriven(&sys, 2.0).unwrap();
    let u = propagate(&p, 1.7).unwrap();
    let rho = st.density_matrix();
    let evolved = u.u.entries() * rho * u.u.entries().adjoint();
    assert!(qgauge::max_abs(&(evolved - rho)) < 1e-12);
}

#[test]
fn multi_segment_protocol_matches_piecewise_products() {
    let sys = pair_system(Statistics::Fermion);
    let h0 = sys.hamiltonian().clone();
    let tilt = (&h0 + &sys.lift_position_function(|x| 0.2 * x).unwrap()).hermitian_part();
    let p = Protocol::new("two-step", sys.hbar(), &[(1.0, &tilt), (1.0, &h0)]).unwrap();
    let first = Protocol::new("first", sys.hbar(), &[(1.0, &tilt)]).unwrap();
    let second = Protocol::new("second", sys.hbar(), &[(0.5, &h0)]).unwrap();
    let full = propagate(&p, 1.5).unwrap();
    let composed = propagate(&second, 0.5).unwrap().u.entries() * propagate(&first, 1.0).unwrap().u.entries();
    assert!(qgauge::max_abs(&(full.u.entries() - composed)) < 1e-12);
}

#[test]
fn injected_asymmetry_is_detected() {
    let spec = BasisSpec::oscillator(30, 1.0);
    let sys = build_many_body(&spec, 1, Statistics::Distinguishable, &|_, _| 0.0, &|x| 0.5 * x * x).unwrap();
    let bad = sys.with_injected_asymmetry(1e-3, 7).unwrap();
    let st = state_of_system(&bad, 1.0, None).unwrap();
    let mut failures = 0;
    if !check_force_balance(&st, &bad).unwrap().pass {
        failures += 1;
    }
    if !check_hyperforce(&st, &bad, bad.position_sum()).unwrap().pass {
        failures += 1;
    }
    let bh = bad.equilibrium_hamiltonian().scale_real(1.0);
    if !check_hyperforce(&st, &bad, &bh).unwrap().pass {
        failures += 1;
    }
    if !check_product_rule(&st, &bad, bad.position_sum(), &bh).unwrap().pass {
        failures += 1;
    }
    assert!(failures >= 3, "only {failures} checks noticed the perturbation");
    // the clean system passes the same checks
    let st = state_of_system(&sys, 1.0, None).unwrap();
    assert!(check_force_balance(&st, &sys).unwrap().pass);
    assert!(check_hyperforce(&st, &sys, sys.position_sum()).unwrap().pass);
}
