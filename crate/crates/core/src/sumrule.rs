//! Equilibrium sum rules: force balance, hyperforce balance, the product
//! rule and the two-point curvature rule.
//!
//! Every report carries one row per evaluation point (or point pair). A row
//! stores the individual terms, the absolute residual and a local scale; the
//! row passes when `residual <= tolerance * scale`. The scale is the largest
//! magnitude among the terms and the summed magnitudes of the components
//! entering each trace or Mori sum, so a pass certifies cancellation rather
//! than smallness.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::{force_density_at, sigma_apply_at, total_force_at};
use crate::operator::{max_abs, CMatrix, Operator};
use crate::profile::Profile;
use crate::system::ManyBodySystem;
use crate::thermal::{check_boltzmann_identity, ThermalState};

pub const FORCE_BALANCE_TOL: f64 = 1e-10;
pub const HYPERFORCE_TOL: f64 = 1e-9;
pub const PRODUCT_RULE_TOL: f64 = 1e-9;
pub const LEIBNIZ_TOL: f64 = 1e-13;
pub const THREE_G_TOL: f64 = 1e-9;
pub const BOLTZMANN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleClass {
    Exact,
    Convergence,
}

/// One evaluated instance of a sum rule.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub beta: f64,
    pub t: Option<f64>,
    pub r: f64,
    pub r_prime: Option<f64>,
    pub terms: Vec<f64>,
    pub residual: f64,
    pub scale: f64,
}

impl ReportRow {
    pub fn relative(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SumRuleReport {
    pub rule: String,
    pub class: RuleClass,
    pub tolerance: f64,
    pub term_names: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Largest `residual / scale` over the rows.
    pub max_residual: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl SumRuleReport {
    pub fn new(
        rule: impl Into<String>,
        class: RuleClass,
        tolerance: f64,
        term_names: &[&str],
        rows: Vec<ReportRow>,
    ) -> Self {
        let max_residual = rows.iter().map(ReportRow::relative).fold(0.0_f64, f64::max);
        Self {
            rule: rule.into(),
            class,
            tolerance,
            term_names: term_names.iter().map(|s| s.to_string()).collect(),
            pass: !rows.is_empty() && max_residual <= tolerance,
            rows,
            max_residual,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Marks the report failed with an explanation, independent of the rows.
    pub fn fail_with(mut self, note: impl Into<String>) -> Self {
        self.pass = false;
        self.notes.push(note.into());
        self
    }

    /// Multiplies the tolerance by `factor` and re-evaluates `pass`.
    pub fn rescaled(mut self, factor: f64) -> Self {
        self.tolerance *= factor;
        self.pass = self.pass_rows() && !self.notes.iter().any(|n| n.starts_with("FAIL"));
        self
    }

    fn pass_rows(&self) -> bool {
        !self.rows.is_empty() && self.max_residual <= self.tolerance
    }

    pub fn merge(reports: Vec<SumRuleReport>) -> Result<SumRuleReport> {
        let mut it = reports.into_iter();
        let mut first = it
            .next()
            .ok_or_else(|| Error::InvalidArgument("nothing to merge".into()))?;
        for r in it {
            if r.rule != first.rule || r.term_names != first.term_names {
                return Err(Error::InvalidArgument(format!(
                    "cannot merge report '{}' into '{}'",
                    r.rule, first.rule
                )));
            }
            first.max_residual = first.max_residual.max(r.max_residual);
            first.pass = first.pass && r.pass;
            first.rows.extend(r.rows);
            first.notes.extend(r.notes);
        }
        Ok(first)
    }

    /// Relative residual against position for reports with one row per point.
    pub fn residual_profile(&self) -> Result<Profile> {
        Profile::scalar(
            format!("{} relative residual", self.rule),
            self.rows.iter().map(|r| r.r).collect(),
            self.rows.iter().map(ReportRow::relative).collect(),
        )
    }
}

fn require_hermitian(a: &Operator, what: &str) -> Result<()> {
    a.check_hermitian(1e-12).map_err(|e| match e {
        Error::NotHermitian { asymmetry, allowed } => Error::InvalidArgument(format!(
            "{what} must be Hermitian (asymmetry {asymmetry:.3e}, allowed {allowed:.3e})"
        )),
        other => other,
    })
}

fn require_match(state: &ThermalState, sys: &ManyBodySystem) -> Result<()> {
    if state.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            context: "state and system",
            left: crate::error::shape(state.dim(), state.dim()),
            right: crate::error::shape(sys.dim(), sys.dim()),
        });
    }
    Ok(())
}

/// All evaluation indices of a system.
pub fn all_points(sys: &ManyBodySystem) -> Vec<usize> {
    (0..sys.eval_points().len()).collect()
}

/// Every `stride`-th evaluation index.
pub fn decimated_points(sys: &ManyBodySystem, stride: usize) -> Vec<usize> {
    (0..sys.eval_points().len()).step_by(stride.max(1)).collect()
}

/// `count` evaluation indices spread evenly over the evaluation set.
pub fn spread_points(sys: &ManyBodySystem, count: usize) -> Vec<usize> {
    let n = sys.eval_points().len();
    if count >= n || count < 2 {
        return (0..n).collect();
    }
    (0..count).map(|i| (i * (n - 1)) / (count - 1)).collect()
}

/// `<F(r)> = 0`, reported with its kinetic, interparticle and external parts.
pub fn check_force_balance(state: &ThermalState, sys: &ManyBodySystem) -> Result<SumRuleReport> {
    check_force_balance_at(state, sys, &all_points(sys))
}

pub fn check_force_balance_at(state: &ThermalState, sys: &ManyBodySystem, points: &[usize]) -> Result<SumRuleReport> {
    require_match(state, sys)?;
    let rows = points
        .par_iter()
        .map(|&k| -> Result<ReportRow> {
            let f = force_density_at(sys, k)?;
            let (total, mag) = state.average_with_scale(&f.total)?;
            let kin = state.average_with_scale(&f.kinetic)?.0;
            let int = state.average_with_scale(&f.interparticle)?.0;
            let ext = state.average_with_scale(&f.external)?.0;
            let scale = mag.max(kin.norm()).max(int.norm()).max(ext.norm());
            Ok(ReportRow {
                beta: state.beta(),
                t: None,
                r: sys.eval_points()[k],
                r_prime: None,
                terms: vec![total.re, kin.re, int.re, ext.re],
                residual: total.norm(),
                scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "force_balance",
        RuleClass::Exact,
        FORCE_BALANCE_TOL,
        &["F", "F_kin", "F_int", "F_ext"],
        rows,
    ))
}

/// `<S_A(r)> + (A | beta F(r)) = 0` for Hermitian `A`. The covariance form
/// `<S_A(r)> + cov(A | beta F(r))` is reported alongside.
pub fn check_hyperforce(state: &ThermalState, sys: &ManyBodySystem, a: &Operator) -> Result<SumRuleReport> {
    check_hyperforce_at(state, sys, a, &all_points(sys))
}

pub fn check_hyperforce_at(
    state: &ThermalState,
    sys: &ManyBodySystem,
    a: &Operator,
    points: &[usize],
) -> Result<SumRuleReport> {
    Ok(check_hyperforce_set(state, sys, &[a], points)?.remove(0))
}

/// Hyperforce balance for several observables, sharing the force densities.
pub fn check_hyperforce_set(
    state: &ThermalState,
    sys: &ManyBodySystem,
    observables: &[&Operator],
    points: &[usize],
) -> Result<Vec<SumRuleReport>> {
    require_match(state, sys)?;
    for a in observables {
        require_hermitian(a, "hyperforce observable")?;
    }
    let beta = state.beta();
    let forces = points
        .par_iter()
        .map(|&k| -> Result<(CMatrix, Complex64)> {
            let bf = total_force_at(sys, k)?.scale_real(beta);
            let mean_f = state.average_with_scale(&bf)?.0;
            Ok((state.to_eigenbasis(bf.entries()), mean_f))
        })
        .collect::<Result<Vec<_>>>()?;
    observables
        .iter()
        .map(|a| {
            let a_eig = state.to_eigenbasis(a.entries());
            let mean_a = state.average_with_scale(a)?.0;
            let rows = points
                .par_iter()
                .zip(forces.par_iter())
                .map(|(&k, (bf_eig, mean_f))| -> Result<ReportRow> {
                    let s = sigma_apply_at(sys, k, a)?;
                    let (mean_s, mag_s) = state.average_with_scale(&s)?;
                    let (mori, mag_m) = state.mori_eigen_with_scale(&a_eig, bf_eig);
                    let cov = mori - mean_a.conj() * mean_f;
                    let sum = mean_s + mori;
                    Ok(ReportRow {
                        beta,
                        t: None,
                        r: sys.eval_points()[k],
                        r_prime: None,
                        terms: vec![mean_s.re, mori.re, cov.re, mean_s.im, mori.im, (mean_s + cov).norm()],
                        residual: sum.norm(),
                        scale: mag_s.max(mag_m).max(mean_s.norm()).max(mori.norm()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SumRuleReport::new(
                "hyperforce",
                RuleClass::Exact,
                HYPERFORCE_TOL,
                &["S_A", "mori_A_betaF", "cov_A_betaF", "S_A_imag", "mori_imag", "covariance_form_residual"],
                rows,
            ))
        })
        .collect()
}

/// `<S_A(r) B> + <A S_B(r)> + (BA | beta F(r)) = 0`, together with the
/// operator Leibniz rule `S_AB = S_A B + A S_B`. The last term reports the
/// defect `|(AB|beta F) - (BA|beta F)|` of the reversed operator order, which
/// equals `|([A,B] | beta F)|` and vanishes only for commuting `A`, `B`.
pub fn check_product_rule(
    state: &ThermalState,
    sys: &ManyBodySystem,
    a: &Operator,
    b: &Operator,
) -> Result<SumRuleReport> {
    check_product_rule_at(state, sys, a, b, &all_points(sys))
}

pub fn check_product_rule_at(
    state: &ThermalState,
    sys: &ManyBodySystem,
    a: &Operator,
    b: &Operator,
    points: &[usize],
) -> Result<SumRuleReport> {
    require_match(state, sys)?;
    crate::operator::check_dims("product rule", a, b)?;
    let beta = state.beta();
    let ab = a * b;
    let ba = b * a;
    let ba_eig = state.to_eigenbasis(ba.entries());
    let ab_eig = state.to_eigenbasis(ab.entries());
    let results = points
        .par_iter()
        .map(|&k| -> Result<(ReportRow, f64)> {
            let sa = sigma_apply_at(sys, k, a)?;
            let sb = sigma_apply_at(sys, k, b)?;
            let sab = sigma_apply_at(sys, k, &ab)?;
            let sa_b = &sa * b;
            let a_sb = a * &sb;
            let leibniz_terms = max_abs(sa_b.entries())
                .max(max_abs(a_sb.entries()))
                .max(max_abs(sab.entries()));
            let leibniz = max_abs(&(sab.entries() - sa_b.entries() - a_sb.entries()));
            let leibniz_rel = if leibniz == 0.0 { 0.0 } else { leibniz / leibniz_terms };
            let (t1, m1) = state.average_with_scale(&sa_b)?;
            let (t2, m2) = state.average_with_scale(&a_sb)?;
            let bf_eig = state.to_eigenbasis(total_force_at(sys, k)?.scale_real(beta).entries());
            let (t3, m3) = state.mori_eigen_with_scale(&ba_eig, &bf_eig);
            let printed = state.mori_eigen_with_scale(&ab_eig, &bf_eig).0;
            let sum = t1 + t2 + t3;
            let scale = m1.max(m2).max(m3).max(t1.norm()).max(t2.norm()).max(t3.norm());
            Ok((
                ReportRow {
                    beta,
                    t: None,
                    r: sys.eval_points()[k],
                    r_prime: None,
                    terms: vec![t1.re, t1.im, t2.re, t2.im, t3.re, t3.im, leibniz_rel, (printed - t3).norm()],
                    residual: sum.norm(),
                    scale,
                },
                leibniz_rel,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_leibniz = results.iter().map(|r| r.1).fold(0.0_f64, f64::max);
    let rows = results.into_iter().map(|r| r.0).collect();
    let report = SumRuleReport::new(
        "product_rule",
        RuleClass::Exact,
        PRODUCT_RULE_TOL,
        &[
            "S_A_B_re",
            "S_A_B_im",
            "A_S_B_re",
            "A_S_B_im",
            "mori_BA_betaF_re",
            "mori_BA_betaF_im",
            "leibniz_relative",
            "reversed_order_defect",
        ],
        rows,
    );
    if worst_leibniz > LEIBNIZ_TOL {
        return Ok(report.fail_with(format!(
            "FAIL: Leibniz rule residual {worst_leibniz:.3e} exceeds {LEIBNIZ_TOL:.0e}"
        )));
    }
    Ok(report)
}

/// `(beta F(r) | beta F(r')) + <K(r, r')> = 0` with `K(r, r') = sigma(r) beta F(r')`
/// over all pairs drawn from `points`.
pub fn check_3g(state: &ThermalState, sys: &ManyBodySystem, points: &[usize]) -> Result<SumRuleReport> {
    require_match(state, sys)?;
    let beta = state.beta();
    let forces: Vec<Operator> = points
        .par_iter()
        .map(|&k| Ok(total_force_at(sys, k)?.scale_real(beta)))
        .collect::<Result<Vec<_>>>()?;
    let eig: Vec<CMatrix> = forces.par_iter().map(|f| state.to_eigenbasis(f.entries())).collect();
    let pairs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<ReportRow> {
            let curvature = sigma_apply_at(sys, points[i], &forces[j])?;
            let (mean_k, mag_k) = state.average_with_scale(&curvature)?;
            let (mori, mag_m) = state.mori_eigen_with_scale(&eig[i], &eig[j]);
            let sum: Complex64 = mori + mean_k;
            Ok(ReportRow {
                beta,
                t: None,
                r: sys.eval_points()[points[i]],
                r_prime: Some(sys.eval_points()[points[j]]),
                terms: vec![mori.re, mean_k.re],
                residual: sum.norm(),
                scale: mag_k.max(mag_m).max(mori.norm()).max(mean_k.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "three_g",
        RuleClass::Exact,
        THREE_G_TOL,
        &["mori_betaF_betaF", "curvature"],
        rows,
    ))
}

/// Boltzmann-factor identity at each point; rows carry the relative residual.
pub fn check_boltzmann(state: &ThermalState, sys: &ManyBodySystem, points: &[usize]) -> Result<SumRuleReport> {
    require_match(state, sys)?;
    let rows = points
        .par_iter()
        .map(|&k| -> Result<ReportRow> {
            let r = sys.eval_points()[k];
            let rel = check_boltzmann_identity(state, sys, r)?;
            Ok(ReportRow {
                beta: state.beta(),
                t: None,
                r,
                r_prime: None,
                terms: vec![rel],
                residual: rel,
                scale: 1.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "boltzmann_identity",
        RuleClass::Exact,
        BOLTZMANN_TOL,
        &["relative_residual"],
        rows,
    ))
}
