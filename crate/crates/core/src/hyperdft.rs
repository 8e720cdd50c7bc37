//! Extended ensembles `H_A = H - lambda A / beta` and the parametric
//! derivative identities they satisfy.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{sigma_apply_at, total_force_at};
use crate::operator::Operator;
use crate::profile::Profile;
use crate::sumrule::{all_points, ReportRow, RuleClass, SumRuleReport};
use crate::system::ManyBodySystem;
use crate::thermal::{mori_covariance, state_with_hamiltonian, thermal_average, Ensemble, ThermalState};

pub const EXTENDED_FORCE_TOL: f64 = 1e-10;
/// Tolerance of the linear-order check, which compares a central difference
/// with step `1e-4` against the exact slope.
pub const LAMBDA_SLOPE_TOL: f64 = 1e-6;
pub const MIN_ORDER: f64 = 1.9;
pub const MAX_HALVING_RATIO: f64 = 0.3;
/// Residual, relative to `max(1, scale)`, below which a difference quotient
/// is exact to rounding and its order is not measurable.
pub const DERIVATIVE_FLOOR: f64 = 1e-10;

/// Thermal state of `H_A = H - lambda A / beta` on a given system.
#[derive(Clone, Debug)]
pub struct ExtendedEnsemble {
    observable: Operator,
    lambda: f64,
    beta: f64,
    mu: Option<f64>,
    hamiltonian: Operator,
    state: ThermalState,
}

pub fn build_extended(
    sys: &ManyBodySystem,
    a: &Operator,
    lambda: f64,
    beta: f64,
    mu: Option<f64>,
) -> Result<ExtendedEnsemble> {
    if a.check_hermitian(1e-12).is_err() {
        return Err(Error::InvalidArgument(format!(
            "extended-ensemble observable must be Hermitian (asymmetry {:.3e})",
            a.asymmetry()
        )));
    }
    if a.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "extended ensemble",
            left: crate::error::shape(a.dim(), a.dim()),
            right: crate::error::shape(sys.dim(), sys.dim()),
        });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    let hamiltonian = (&sys.equilibrium_hamiltonian() - &a.scale_real(lambda / beta)).hermitian_part();
    let state = state_with_hamiltonian(sys, &hamiltonian, beta, mu)?;
    Ok(ExtendedEnsemble {
        observable: a.clone(),
        lambda,
        beta,
        mu,
        hamiltonian,
        state,
    })
}

impl ExtendedEnsemble {
    pub fn observable(&self) -> &Operator {
        &self.observable
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn state(&self) -> &ThermalState {
        &self.state
    }

    pub fn ensemble(&self) -> Ensemble {
        self.state.ensemble()
    }

    /// `beta Omega_0 = -ln Z` of the extended state.
    pub fn beta_omega(&self) -> f64 {
        -self.state.log_partition()
    }

    fn at(&self, sys: &ManyBodySystem, lambda: f64) -> Result<ExtendedEnsemble> {
        build_extended(sys, &self.observable, lambda, self.beta, self.mu)
    }
}

/// `<F_0(r) + lambda S_A(r) / beta>_A = 0` at finite `lambda`.
pub fn check_extended_force_balance(
    sys: &ManyBodySystem,
    ext: &ExtendedEnsemble,
    points: &[usize],
) -> Result<SumRuleReport> {
    let st = ext.state();
    let rows = points
        .par_iter()
        .map(|&k| -> Result<ReportRow> {
            let f0 = total_force_at(sys, k)?;
            let sa = sigma_apply_at(sys, k, ext.observable())?;
            let fa = &f0 + &sa.scale_real(ext.lambda / ext.beta);
            let (total, mag) = st.average_with_scale(&fa)?;
            let mf = st.average_with_scale(&f0)?.0;
            let ms = st.average_with_scale(&sa)?.0 * (ext.lambda / ext.beta);
            Ok(ReportRow {
                beta: ext.beta,
                t: None,
                r: sys.eval_points()[k],
                r_prime: None,
                terms: vec![ext.lambda, mf.re, ms.re],
                residual: total.norm(),
                scale: mag.max(mf.norm()).max(ms.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "extended_force_balance",
        RuleClass::Exact,
        EXTENDED_FORCE_TOL,
        &["lambda", "F0_mean", "lambda_S_A_over_beta_mean"],
        rows,
    ))
}

/// Linear order of the extended force balance at `lambda = 0`. The central
/// difference of `<F_0(r)>_A` is compared with the exact slopes
/// `cov(A | beta F_0(r)) / beta` and `-<S_A(r)> / beta`; the term
/// `[<S_A(r)> + cov(A | beta F_0(r))] / beta` is the slope of the full
/// extended force balance and must vanish on its own.
pub fn check_lambda_slope(
    sys: &ManyBodySystem,
    a: &Operator,
    beta: f64,
    mu: Option<f64>,
    step: f64,
    points: &[usize],
) -> Result<SumRuleReport> {
    let base = build_extended(sys, a, 0.0, beta, mu)?;
    let plus = build_extended(sys, a, step, beta, mu)?;
    let minus = build_extended(sys, a, -step, beta, mu)?;
    let rows = points
        .par_iter()
        .map(|&k| -> Result<ReportRow> {
            let f0 = total_force_at(sys, k)?;
            let fd = (thermal_average(plus.state(), &f0)? - thermal_average(minus.state(), &f0)?) / (2.0 * step);
            let bf = f0.scale_real(beta);
            let cov = mori_covariance(base.state(), a, &bf)? / beta;
            let s = thermal_average(base.state(), &sigma_apply_at(sys, k, a)?)? / beta;
            let residual = (fd - cov).norm().max((fd + s).norm()).max((s + cov).norm());
            Ok(ReportRow {
                beta,
                t: None,
                r: sys.eval_points()[k],
                r_prime: None,
                terms: vec![fd.re, cov.re, -s.re, (s + cov).re],
                residual,
                scale: fd.norm().max(cov.norm()).max(s.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "lambda_slope",
        RuleClass::Convergence,
        LAMBDA_SLOPE_TOL,
        &["finite_difference", "cov_A_betaF_over_beta", "minus_S_A_over_beta", "linear_coefficient"],
        rows,
    ))
}

/// `chi_A(r) = cov(A | rho(r))` in the extended state.
pub fn hyperfluctuation_profile(sys: &ManyBodySystem, ext: &ExtendedEnsemble) -> Result<Profile> {
    let values = all_points(sys)
        .par_iter()
        .map(|&k| Ok(mori_covariance(ext.state(), ext.observable(), &sys.density_at(k)?)?.re))
        .collect::<Result<Vec<f64>>>()?;
    Profile::scalar("chi_A", sys.eval_points().to_vec(), values)
}

/// Residuals of a finite-difference identity at two step sizes.
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeCheck {
    pub label: String,
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Magnitude of the exact derivative, for relative statements.
    pub scale: f64,
    pub ratio: f64,
    pub order: f64,
}

impl DerivativeCheck {
    fn new(label: impl Into<String>, steps: Vec<f64>, residuals: Vec<f64>, scale: f64) -> Self {
        let ratio = residuals[1] / residuals[0];
        let order = (residuals[0] / residuals[1]).ln() / (steps[0] / steps[1]).ln();
        Self {
            label: label.into(),
            steps,
            residuals,
            scale,
            ratio,
            order,
        }
    }

    /// Residual at the smaller step.
    pub fn final_residual(&self) -> f64 {
        self.residuals[1]
    }

    /// Both residuals sit at the rounding floor.
    pub fn at_floor(&self) -> bool {
        self.residuals.iter().all(|&r| r <= DERIVATIVE_FLOOR * self.scale.max(1.0))
    }

    /// Quadratic convergence: halving ratio and measured order, unless the
    /// residuals are already at the rounding floor.
    pub fn converges(&self) -> bool {
        self.at_floor() || (self.ratio <= MAX_HALVING_RATIO && self.order >= MIN_ORDER)
    }
}

fn density_profile(sys: &ManyBodySystem, st: &ThermalState) -> Result<Vec<f64>> {
    all_points(sys)
        .par_iter()
        .map(|&k| Ok(thermal_average(st, &sys.density_at(k)?)?.re))
        .collect()
}

/// `max_r |chi_A(r) - [rho(r; lambda + d) - rho(r; lambda - d)] / (2 d)|` for
/// `d = step` and `d = step / 2`.
pub fn check_chi_is_density_response(
    sys: &ManyBodySystem,
    ext: &ExtendedEnsemble,
    step: f64,
) -> Result<DerivativeCheck> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let chi = hyperfluctuation_profile(sys, ext)?.column(0);
    let scale = chi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let steps = vec![step, step / 2.0];
    let mut residuals = Vec::new();
    for &d in &steps {
        let plus = density_profile(sys, ext.at(sys, ext.lambda + d)?.state())?;
        let minus = density_profile(sys, ext.at(sys, ext.lambda - d)?.state())?;
        let worst = chi
            .iter()
            .zip(plus.iter().zip(&minus))
            .map(|(c, (p, m))| (c - (p - m) / (2.0 * d)).abs())
            .fold(0.0_f64, f64::max);
        residuals.push(worst);
    }
    Ok(DerivativeCheck::new("chi_density_response", steps, residuals, scale))
}

/// `|<A>_A + [beta Omega(lambda + d) - beta Omega(lambda - d)] / (2 d)|` for
/// `d = step` and `d = step / 2`; grand ensemble only.
pub fn check_mean_a_is_omega_derivative(
    sys: &ManyBodySystem,
    ext: &ExtendedEnsemble,
    step: f64,
) -> Result<DerivativeCheck> {
    if ext.ensemble() != Ensemble::Grand {
        return Err(Error::InvalidArgument(
            "the grand-potential derivative identity needs a grand ensemble".into(),
        ));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let mean = thermal_average(ext.state(), ext.observable())?.re;
    let steps = vec![step, step / 2.0];
    let mut residuals = Vec::new();
    for &d in &steps {
        let up = ext.at(sys, ext.lambda + d)?.beta_omega();
        let down = ext.at(sys, ext.lambda - d)?.beta_omega();
        residuals.push((mean + (up - down) / (2.0 * d)).abs());
    }
    Ok(DerivativeCheck::new("mean_A_omega_derivative", steps, residuals, mean.abs()))
}
