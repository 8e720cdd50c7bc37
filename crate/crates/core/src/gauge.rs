//! The shifting superoperator `sigma(r) A = (-i/hbar) [A, m J(r)]`, its
//! integrated form, force and hyperforce densities, and the algebraic
//! checks built on them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{
    c, check_dims, max_abs, spectral_decompose, trace_of_product_with_scale, CMatrix, Operator, I,
};
use crate::system::ManyBodySystem;

/// Relative floor below which a convergence residual counts as converged.
pub const CONVERGENCE_FLOOR: f64 = 1e-12;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A one-dimensional shifting field with its gradient.
#[derive(Clone)]
pub struct ShiftField {
    label: String,
    eval: ScalarFn,
    grad: ScalarFn,
}

impl fmt::Debug for ShiftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftField").field("label", &self.label).finish()
    }
}

const PROBES: [f64; 5] = [-1.7, -0.6, 0.1, 0.8, 1.9];
const FD_STEP: f64 = 1e-5;

fn central_difference(f: &ScalarFn, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

impl ShiftField {
    /// Builds a field and checks `grad` against a central difference of `eval`.
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let field = Self {
            label: label.into(),
            eval: Arc::new(eval),
            grad: Arc::new(grad),
        };
        for x in PROBES {
            let e = field.eval(x);
            let g = field.grad(x);
            if !e.is_finite() || !g.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "shift field '{}' is not finite at {x}",
                    field.label
                )));
            }
            let fd = central_difference(&field.eval, x);
            if (fd - g).abs() > 1e-6 * g.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "gradient of shift field '{}' disagrees with finite difference at {x}: {g} vs {fd}",
                    field.label
                )));
            }
        }
        Ok(field)
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("const({value})"), move |_| value, |_| 0.0).expect("constant field")
    }

    /// `x^k`.
    pub fn monomial(k: i32) -> Self {
        let kf = k as f64;
        Self::new(
            format!("x^{k}"),
            move |x| x.powi(k),
            move |x| if k == 0 { 0.0 } else { kf * x.powi(k - 1) },
        )
        .expect("monomial field")
    }

    pub fn sine(k: f64) -> Self {
        Self::new(format!("sin({k}x)"), move |x| (k * x).sin(), move |x| k * (k * x).cos())
            .expect("sine field")
    }

    pub fn cosine(k: f64) -> Self {
        Self::new(format!("cos({k}x)"), move |x| (k * x).cos(), move |x| -k * (k * x).sin())
            .expect("cosine field")
    }

    /// `exp(-(x - center)^2 / (2 width^2))`.
    pub fn gaussian(center: f64, width: f64) -> Self {
        let w2 = width * width;
        Self::new(
            format!("gauss({center},{width})"),
            move |x| (-(x - center).powi(2) / (2.0 * w2)).exp(),
            move |x| -(x - center) / w2 * (-(x - center).powi(2) / (2.0 * w2)).exp(),
        )
        .expect("gaussian field")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn grad(&self, x: f64) -> f64 {
        (self.grad)(x)
    }
}

/// `eps_1 eps_2' - eps_2 eps_1'`; its gradient is a central difference.
pub fn lie_bracket_field(e1: &ShiftField, e2: &ShiftField) -> ShiftField {
    let (a, b) = (e1.clone(), e2.clone());
    let eval: ScalarFn = Arc::new(move |x| a.eval(x) * b.grad(x) - b.eval(x) * a.grad(x));
    let eval_for_grad = eval.clone();
    ShiftField {
        label: format!("[{}, {}]", e1.label, e2.label),
        eval,
        grad: Arc::new(move |x| central_difference(&eval_for_grad, x)),
    }
}

fn scaled_commutator(sys: &ManyBodySystem, a: &CMatrix, j: &CMatrix) -> CMatrix {
    (a * j - j * a) * (-I / sys.hbar())
}

fn check_system_dims(sys: &ManyBodySystem, a: &Operator) -> Result<()> {
    if a.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "shifting superoperator",
            left: crate::error::shape(a.dim(), a.dim()),
            right: crate::error::shape(sys.dim(), sys.dim()),
        });
    }
    Ok(())
}

/// `sigma(r) A` at an evaluation point.
pub fn sigma_apply(sys: &ManyBodySystem, r: f64, a: &Operator) -> Result<Operator> {
    let k = sys.eval_index(r)?;
    sigma_apply_at(sys, k, a)
}

/// `sigma(r_k) A` for the `k`-th evaluation point.
pub fn sigma_apply_at(sys: &ManyBodySystem, k: usize, a: &Operator) -> Result<Operator> {
    check_system_dims(sys, a)?;
    let am = a.entries();
    let out = match sys.current_factors_at(k) {
        Some(f) => {
            // A J - J A with J = ½ (w v† + v w†)
            let v = &f.density;
            let w = &f.momentum_density;
            let av = am * v;
            let aw = am * w;
            let va = v.adjoint() * am;
            let wa = w.adjoint() * am;
            let m = &aw * v.adjoint() + &av * w.adjoint() - w * &va - v * &wa;
            m * (-I * 0.5 / sys.hbar())
        }
        None => scaled_commutator(sys, am, sys.current_at(k)?.entries()),
    };
    Ok(Operator::from_parts(out, a.hermitian_hint()))
}

/// Hyperforce density `S_A(r) = sigma(r) A`.
pub fn hyperforce_density(sys: &ManyBodySystem, r: f64, a: &Operator) -> Result<Operator> {
    sigma_apply(sys, r, a)
}

/// Force density and its kinetic, interparticle and external parts.
#[derive(Clone, Debug)]
pub struct ForceDensity {
    pub total: Operator,
    pub kinetic: Operator,
    pub interparticle: Operator,
    pub external: Operator,
}

pub fn force_density(sys: &ManyBodySystem, r: f64) -> Result<ForceDensity> {
    force_density_at(sys, sys.eval_index(r)?)
}

/// Total force density `F(r_k) = -sigma(r_k) H` without its parts.
pub fn total_force_at(sys: &ManyBodySystem, k: usize) -> Result<Operator> {
    Ok(-&sigma_apply_at(sys, k, sys.hamiltonian())?)
}

pub fn force_density_at(sys: &ManyBodySystem, k: usize) -> Result<ForceDensity> {
    let neg = |op: &Operator| -> Result<Operator> { Ok(-&sigma_apply_at(sys, k, op)?) };
    Ok(ForceDensity {
        total: neg(sys.hamiltonian())?,
        kinetic: neg(sys.kinetic())?,
        interparticle: neg(sys.interparticle())?,
        external: neg(sys.external())?,
    })
}

/// `Sigma[eps] A = (-i/hbar) [A, sum_i ½ (eps(x_i) p_i + p_i eps(x_i))]`.
pub fn sigma_integrated_apply(sys: &ManyBodySystem, eps: &ShiftField, a: &Operator) -> Result<Operator> {
    check_system_dims(sys, a)?;
    let g = sys.shift_generator(|x| eps.eval(x))?;
    Ok(Operator::from_parts(
        scaled_commutator(sys, a.entries(), g.entries()),
        a.hermitian_hint(),
    ))
}

/// `|Tr A [sigma B] + Tr [sigma A] B|` relative to the magnitudes entering
/// the two traces.
pub fn check_anti_self_adjoint(sys: &ManyBodySystem, r: f64, a: &Operator, b: &Operator) -> Result<f64> {
    check_dims("anti-self-adjointness", a, b)?;
    let sb = sigma_apply(sys, r, b)?;
    let sa = sigma_apply(sys, r, a)?;
    let (t1, m1) = trace_of_product_with_scale(a.entries(), sb.entries());
    let (t2, m2) = trace_of_product_with_scale(sa.entries(), b.entries());
    Ok((t1 + t2).norm() / m1.max(m2).max(1.0))
}

/// `max|[sigma A]† - sigma(A†)|` relative to `max(1, max|sigma A|)`.
pub fn check_adjoint_commutes(sys: &ManyBodySystem, r: f64, a: &Operator) -> Result<f64> {
    let sa = sigma_apply(sys, r, a)?;
    let sad = sigma_apply(sys, r, &a.adjoint())?;
    Ok(max_abs(&(sa.entries().adjoint() - sad.entries())) / sa.max_abs().max(1.0))
}

/// Lowest energy eigenvectors of a system's Hamiltonian; convergence
/// residuals are measured inside this subspace.
#[derive(Clone, Debug)]
pub struct LowSubspace {
    vectors: CMatrix,
}

impl LowSubspace {
    pub fn new(sys: &ManyBodySystem, k: usize) -> Result<Self> {
        if k == 0 || k > sys.dim() {
            return Err(Error::InvalidArgument(format!(
                "subspace size {k} outside 1..={}",
                sys.dim()
            )));
        }
        let d = spectral_decompose(&sys.equilibrium_hamiltonian())?;
        Ok(Self {
            vectors: d.lowest_states(k),
        })
    }

    /// Lowest `ceil(dim/2)` states.
    pub fn lower_half(sys: &ManyBodySystem) -> Result<Self> {
        Self::new(sys, sys.dim().div_ceil(2))
    }

    pub fn size(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn project(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// `max|V† R V|`.
    pub fn residual(&self, r: &CMatrix) -> f64 {
        max_abs(&self.project(r))
    }
}

/// Projected residual and the projected magnitude of the compared terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedResidual {
    pub residual: f64,
    pub scale: f64,
}

fn projected(sub: &LowSubspace, lhs: &CMatrix, rhs: &CMatrix) -> ProjectedResidual {
    let pl = sub.project(lhs);
    let pr = sub.project(rhs);
    ProjectedResidual {
        residual: max_abs(&(&pl - &pr)),
        scale: max_abs(&pl).max(max_abs(&pr)),
    }
}

fn grid_derivative_delta(sys: &ManyBodySystem, a: usize, b: usize) -> Result<f64> {
    let h = sys.eval_spacing();
    let (left, right) = sys.single_particle().grid_neighbors(a)?;
    let mut d = 0.0;
    if right == Some(b) {
        d += 1.0;
    }
    if left == Some(b) {
        d -= 1.0;
    }
    Ok(d / (2.0 * h * h))
}

fn require_grid(sys: &ManyBodySystem) -> Result<()> {
    if !sys.spec().is_grid() {
        return Err(Error::Unsupported(
            "the superoperator commutator needs a grid representation".into(),
        ));
    }
    Ok(())
}

/// Both sides of `[sigma(r), sigma(r')] A = delta'(r - r') (sigma(r) A + sigma(r') A)`
/// with the derivative of the grid delta taken as a central difference.
pub fn sigma_commutator_sides(
    sys: &ManyBodySystem,
    r: f64,
    r_prime: f64,
    a: &Operator,
) -> Result<(Operator, Operator)> {
    require_grid(sys)?;
    let ka = sys.eval_index(r)?;
    let kb = sys.eval_index(r_prime)?;
    let sa = sigma_apply_at(sys, ka, a)?;
    let sb = sigma_apply_at(sys, kb, a)?;
    let lhs = &sigma_apply_at(sys, ka, &sb)? - &sigma_apply_at(sys, kb, &sa)?;
    let d = grid_derivative_delta(sys, ka, kb)?;
    let rhs = (&sa + &sb).scale_real(d);
    Ok((lhs, rhs))
}

/// Pointwise superoperator commutator residual projected onto the lower half
/// of the spectrum.
pub fn check_sigma_commutator(sys: &ManyBodySystem, r: f64, r_prime: f64, a: &Operator) -> Result<ProjectedResidual> {
    let (lhs, rhs) = sigma_commutator_sides(sys, r, r_prime, a)?;
    let sub = LowSubspace::lower_half(sys)?;
    Ok(projected(&sub, lhs.entries(), rhs.entries()))
}

/// Superoperator commutator with `r'` smeared against a window `g`:
/// `sigma(r) Sigma[g] A - Sigma[g] sigma(r) A` against
/// `sum_b h g_b delta'(r - x_b) (sigma(r) A + sigma(x_b) A)`.
pub fn smeared_sigma_commutator(
    sys: &ManyBodySystem,
    r: f64,
    window: &ShiftField,
    a: &Operator,
    sub: &LowSubspace,
) -> Result<ProjectedResidual> {
    require_grid(sys)?;
    let ka = sys.eval_index(r)?;
    let h = sys.eval_spacing();
    let sa = sigma_apply_at(sys, ka, a)?;
    let ga = sigma_integrated_apply(sys, window, a)?;
    let lhs = &sigma_apply_at(sys, ka, &ga)? - &sigma_integrated_apply(sys, window, &sa)?;
    let mut rhs = CMatrix::zeros(sys.dim(), sys.dim());
    let (left, right) = sys.single_particle().grid_neighbors(ka)?;
    for kb in [left, right].into_iter().flatten() {
        let d = grid_derivative_delta(sys, ka, kb)?;
        let xb = sys.eval_points()[kb];
        let sb = sigma_apply_at(sys, kb, a)?;
        rhs += (sa.entries() + sb.entries()) * c(h * window.eval(xb) * d);
    }
    Ok(projected(sub, lhs.entries(), &rhs))
}

/// `[Sigma[e1], Sigma[e2]] A` against `Sigma[e_Delta] A`.
pub fn check_lie_algebra(
    sys: &ManyBodySystem,
    e1: &ShiftField,
    e2: &ShiftField,
    a: &Operator,
    sub: &LowSubspace,
) -> Result<ProjectedResidual> {
    let s2 = sigma_integrated_apply(sys, e2, a)?;
    let s1 = sigma_integrated_apply(sys, e1, a)?;
    let lhs = &sigma_integrated_apply(sys, e1, &s2)? - &sigma_integrated_apply(sys, e2, &s1)?;
    let rhs = sigma_integrated_apply(sys, &lie_bracket_field(e1, e2), a)?;
    Ok(projected(sub, lhs.entries(), rhs.entries()))
}

/// `S_{sum x}(r)` against `rho(r)`.
pub fn check_position_hyperforce(sys: &ManyBodySystem, r: f64, sub: &LowSubspace) -> Result<ProjectedResidual> {
    let s = sigma_apply(sys, r, sys.position_sum())?;
    let rho = sys.density_operator(r)?;
    Ok(projected(sub, s.entries(), rho.entries()))
}

/// `Sigma[eps] x = eps(x)` and `Sigma[eps] p = -½ (eps'(x) p + p eps'(x))`;
/// the larger of the two projected residuals.
pub fn check_canonical_shift(sys: &ManyBodySystem, eps: &ShiftField, sub: &LowSubspace) -> Result<ProjectedResidual> {
    let sx = sigma_integrated_apply(sys, eps, sys.position_sum())?;
    let ex = sys.lift_position_function(|x| eps.eval(x))?;
    let rx = projected(sub, sx.entries(), ex.entries());
    let sp = sigma_integrated_apply(sys, eps, sys.momentum_sum())?;
    let d = sys.single_particle().function_of_position(|x| eps.grad(x));
    let p = sys.single_particle().momentum();
    let sym = Operator::from_parts(((&d * p).entries() + (p * &d).entries()) * c(-0.5), true);
    let target = sys.lift_one_body(&sym)?;
    let rp = projected(sub, sp.entries(), target.entries());
    Ok(ProjectedResidual {
        residual: rx.residual.max(rp.residual),
        scale: rx.scale.max(rp.scale),
    })
}

/// External force density against `-rho(r) V'(r)` for a single particle.
pub fn check_external_force(
    sys: &ManyBodySystem,
    r: f64,
    dv: impl Fn(f64) -> f64,
    sub: &LowSubspace,
) -> Result<ProjectedResidual> {
    let f = -&sigma_apply(sys, r, sys.external())?;
    let target = sys.density_operator(r)?.scale_real(-dv(r));
    Ok(projected(sub, f.entries(), target.entries()))
}

/// Residuals of one identity across a sequence of basis doublings.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ConvergenceStudy {
    pub label: String,
    pub sizes: Vec<usize>,
    pub residuals: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn run(
        label: impl Into<String>,
        base: &crate::basis::BasisSpec,
        doublings: usize,
        mut eval: impl FnMut(&crate::basis::BasisSpec) -> Result<ProjectedResidual>,
    ) -> Result<Self> {
        let mut spec = *base;
        let mut study = Self {
            label: label.into(),
            sizes: Vec::new(),
            residuals: Vec::new(),
            scales: Vec::new(),
        };
        for _ in 0..=doublings {
            let r = eval(&spec)?;
            study.sizes.push(spec.size());
            study.residuals.push(r.residual);
            study.scales.push(r.scale);
            spec = spec.doubled();
        }
        Ok(study)
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// A doubling passes if it at least halves the residual or the residual
    /// already sits at the floating-point floor.
    pub fn step_passes(&self, i: usize) -> bool {
        let next = self.residuals[i + 1];
        let floor = CONVERGENCE_FLOOR * self.scales[i + 1].max(1.0);
        next <= 0.5 * self.residuals[i] || next <= floor
    }

    pub fn passes(&self) -> bool {
        self.residuals.len() >= 2 && (0..self.residuals.len() - 1).all(|i| self.step_passes(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, Boundary, MomentumScheme};
    use crate::operator::{random_hermitian, random_matrix, residual_norm};
    use crate::system::{build_many_body, gaussian_pair_potential, Statistics};

    fn no_pair(_: f64, _: f64) -> f64 {
        0.0
    }

    fn osc(n_max: usize) -> ManyBodySystem {
        build_many_body(&BasisSpec::oscillator(n_max, 1.0), 1, Statistics::Distinguishable, &no_pair, &|x| 0.5 * x * x)
            .unwrap()
    }

    fn grid(m: usize, boundary: Boundary, scheme: MomentumScheme) -> ManyBodySystem {
        build_many_body(&BasisSpec::grid(m, 16.0, boundary, scheme), 1, Statistics::Distinguishable, &no_pair, &|x| {
            0.5 * x * x
        })
        .unwrap()
    }

    #[test]
    fn identity_is_annihilated() {
        let sys = osc(30);
        for &r in sys.eval_points().iter().step_by(16) {
            let s = sigma_apply(&sys, r, &Operator::identity(sys.dim())).unwrap();
            assert!(s.max_abs() < 1e-14);
        }
    }

    #[test]
    fn low_rank_path_matches_dense_commutator() {
        let sys = osc(25);
        let a = random_matrix(sys.dim(), 3);
        for k in [0, 40, 80, 121] {
            let fast = sigma_apply_at(&sys, k, &a).unwrap();
            let j = sys.current_at(k).unwrap();
            let dense = (a.entries() * j.entries() - j.entries() * a.entries()) * (-I / sys.hbar());
            assert!(max_abs(&(fast.entries() - dense)) < 1e-13 * max_abs(fast.entries()).max(1.0));
        }
    }

    #[test]
    fn hermitian_input_gives_hermitian_output() {
        let sys = osc(30);
        let a = random_hermitian(sys.dim(), 11);
        for k in (0..161).step_by(20) {
            let s = sigma_apply_at(&sys, k, &a).unwrap();
            assert!(s.asymmetry() <= 1e-12 * s.max_abs().max(1.0));
        }
    }

    #[test]
    fn force_parts_add_up() {
        let u = gaussian_pair_potential(1.0, 0.6);
        let sys = build_many_body(
            &BasisSpec::grid(10, 6.0, Boundary::Periodic, MomentumScheme::Spectral),
            2,
            Statistics::Boson,
            &u,
            &|x| 0.4 * x * x + 0.2 * x,
        )
        .unwrap();
        for k in 0..10 {
            let f = force_density_at(&sys, k).unwrap();
            let sum = &(&f.kinetic + &f.interparticle) + &f.external;
            assert!(residual_norm(&sum, &f.total).unwrap() <= 1e-13 * f.total.max_abs().max(1.0));
        }
    }

    #[test]
    fn free_particle_force_is_kinetic() {
        let sys = build_many_body(
            &BasisSpec::grid(16, 8.0, Boundary::Periodic, MomentumScheme::Spectral),
            1,
            Statistics::Distinguishable,
            &no_pair,
            &|_| 0.0,
        )
        .unwrap();
        let f = force_density(&sys, 0.0).unwrap();
        assert_eq!(residual_norm(&f.total, &f.kinetic).unwrap(), 0.0);
    }

    #[test]
    fn anti_self_adjointness_and_adjoint_rule() {
        let sys = build_many_body(
            &BasisSpec::grid(64, 16.0, Boundary::Periodic, MomentumScheme::Spectral),
            1,
            Statistics::Distinguishable,
            &no_pair,
            &|x| 0.5 * x * x,
        )
        .unwrap();
        let a = random_hermitian(64, 1);
        let b = random_hermitian(64, 2);
        let id = Operator::identity(64);
        assert!(check_anti_self_adjoint(&sys, 0.5, &id, &id).unwrap() < 1e-15);
        assert!(check_anti_self_adjoint(&sys, 0.5, &a, &b).unwrap() < 1e-12);
        let g = random_matrix(64, 5);
        assert!(check_adjoint_commutes(&sys, 0.5, &g).unwrap() < 1e-13);
    }

    #[test]
    fn integrated_superoperator_is_riemann_sum_on_grid() {
        let sys = grid(32, Boundary::Periodic, MomentumScheme::Spectral);
        let eps = ShiftField::sine(0.4);
        let a = random_hermitian(32, 8);
        let direct = sigma_integrated_apply(&sys, &eps, &a).unwrap();
        let mut sum = CMatrix::zeros(32, 32);
        for (k, &x) in sys.eval_points().iter().enumerate() {
            sum += sigma_apply_at(&sys, k, &a).unwrap().entries() * c(sys.eval_spacing() * eps.eval(x));
        }
        assert!(max_abs(&(sum - direct.entries())) < 1e-10);
    }

    #[test]
    fn constant_shift_moves_position_uniformly() {
        let sys = osc(40);
        let s = sigma_integrated_apply(&sys, &ShiftField::constant(0.7), sys.position_sum()).unwrap();
        let sub = LowSubspace::new(&sys, 20).unwrap();
        let target = Operator::identity(sys.dim()).scale_real(0.7);
        assert!(sub.residual(&(s.entries() - target.entries())) < 1e-12);
    }

    #[test]
    fn bracket_field_examples() {
        let x = ShiftField::monomial(1);
        let x2 = ShiftField::monomial(2);
        let b = lie_bracket_field(&x, &x2);
        for t in [-1.5, 0.3, 2.0] {
            assert!((b.eval(t) - t * t).abs() < 1e-14);
            assert!((b.grad(t) - 2.0 * t).abs() < 1e-8);
        }
        let sc = lie_bracket_field(&ShiftField::sine(1.0), &ShiftField::cosine(1.0));
        for t in [-1.0, 0.0, 0.4, 3.0] {
            assert!((sc.eval(t) + 1.0).abs() < 1e-15);
        }
        let same = lie_bracket_field(&x2, &x2);
        assert_eq!(same.eval(1.3), 0.0);
    }

    #[test]
    fn bad_gradient_is_rejected() {
        assert!(ShiftField::new("wrong", |x| x * x, |x| x).is_err());
        assert!(ShiftField::new("nan", |_| f64::NAN, |_| 0.0).is_err());
    }

    #[test]
    fn equal_points_commute_and_identity_vanishes() {
        let sys = grid(32, Boundary::HardWall, MomentumScheme::CentralDifference);
        let a = sys.lift_position_function(|x| (-x * x / 2.0).exp()).unwrap();
        let (lhs, rhs) = sigma_commutator_sides(&sys, 0.5, 0.5, &a).unwrap();
        assert!(lhs.max_abs() < 1e-14 && rhs.max_abs() == 0.0);
        let id = Operator::identity(sys.dim());
        let (lhs, rhs) = sigma_commutator_sides(&sys, 0.5, 1.0, &id).unwrap();
        assert!(lhs.max_abs() < 1e-14 && rhs.max_abs() < 1e-14);
        assert!(sigma_commutator_sides(&osc(10), 0.0, 0.0, &a).is_err());
    }

    #[test]
    fn lie_algebra_for_equal_fields_is_trivial() {
        let sys = osc(20);
        let e = ShiftField::sine(0.5);
        let a = random_hermitian(sys.dim(), 4);
        let sub = LowSubspace::lower_half(&sys).unwrap();
        let r = check_lie_algebra(&sys, &e, &e, &a, &sub).unwrap();
        assert!(r.residual <= 1e-13 * r.scale.max(1.0));
    }
}
