use qgauge::gauge::{
    check_canonical_shift, check_external_force, check_lie_algebra, check_position_hyperforce,
    smeared_sigma_commutator, ConvergenceStudy, LowSubspace, ProjectedResidual, ShiftField,
};
use qgauge::{build_many_body, BasisSpec, Boundary, ManyBodySystem, MomentumScheme, Result, Statistics};

const SUBSPACE: usize = 8;

fn base() -> BasisSpec {
    BasisSpec::grid(64, 16.0, Boundary::HardWall, MomentumScheme::CentralDifference)
}

fn trap(spec: &BasisSpec) -> ManyBodySystem {
    build_many_body(spec, 1, Statistics::Distinguishable, &|_, _| 0.0, &|x| 0.5 * x * x).unwrap()
}

fn study(label: &str, spec: &BasisSpec, eval: impl Fn(&ManyBodySystem, &LowSubspace) -> Result<ProjectedResidual>) -> ConvergenceStudy {
    ConvergenceStudy::run(label, spec, 2, |s| {
        let sys = trap(s);
        let sub = LowSubspace::new(&sys, SUBSPACE)?;
        eval(&sys, &sub)
    })
    .unwrap()
}

fn assert_converges(s: &ConvergenceStudy) {
    assert_eq!(s.sizes, vec![64, 128, 256]);
    assert!(s.passes(), "{}: residuals {:?}", s.label, s.residuals);
    // the residuals are discretization errors, not roundoff
    assert!(s.residuals[0] > 1e-6, "{}: {:?}", s.label, s.residuals);
}

#[test]
fn superoperator_commutator_converges() {
    let s = study("sigma_commutator", &base(), |sys, sub| {
        let a = sys.lift_position_function(|x| (-0.5 * x * x).exp())?;
        smeared_sigma_commutator(sys, 0.5, &ShiftField::gaussian(1.0, 0.5), &a, sub)
    });
    assert_converges(&s);
}

#[test]
fn lie_algebra_converges() {
    let s = study("lie_algebra", &base(), |sys, sub| {
        let a = sys.lift_position_function(|x| (-0.5 * x * x).exp())?;
        check_lie_algebra(sys, &ShiftField::sine(0.4), &ShiftField::gaussian(0.5, 1.0), &a, sub)
    });
    assert_converges(&s);
    let p = study("lie_algebra_momentum", &base(), |sys, sub| {
        check_lie_algebra(sys, &ShiftField::sine(0.4), &ShiftField::gaussian(0.5, 1.0), sys.momentum_sum(), sub)
    });
    assert_converges(&p);
}

#[test]
fn position_hyperforce_is_density() {
    let s = study("position_hyperforce", &base(), |sys, sub| check_position_hyperforce(sys, 0.5, sub));
    assert_converges(&s);
}

#[test]
fn canonical_shift_converges() {
    let s = study("canonical_shift", &base(), |sys, sub| {
        check_canonical_shift(sys, &ShiftField::gaussian(0.0, 1.0), sub)
    });
    assert_converges(&s);
}

#[test]
fn external_force_splitting_converges() {
    let s = study("external_force", &base(), |sys, sub| check_external_force(sys, 0.5, |x| x, sub));
    assert_converges(&s);
}

#[test]
fn oscillator_basis_sits_at_the_floor() {
    let spec = BasisSpec::oscillator(20, 1.0);
    let s = ConvergenceStudy::run("external_force_oscillator", &spec, 2, |s| {
        let sys = trap(s);
        let sub = LowSubspace::new(&sys, SUBSPACE)?;
        check_external_force(&sys, 0.5, |x| x, &sub)
    })
    .unwrap();
    assert!(s.passes(), "{:?}", s.residuals);
    assert!(s.residuals.iter().all(|&r| r < 1e-10));
}
