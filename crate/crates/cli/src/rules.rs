//! Registry of the rule ids a scenario can request.

use qgauge::dynamics::{HYPERCURRENT_TOL, SHIFT_CURRENT_TOL};
use qgauge::hyperdft::{EXTENDED_FORCE_TOL, LAMBDA_SLOPE_TOL, MAX_HALVING_RATIO};
use qgauge::sumrule::{BOLTZMANN_TOL, FORCE_BALANCE_TOL, HYPERFORCE_TOL, PRODUCT_RULE_TOL, THREE_G_TOL};
use qgauge::RuleClass;

/// Cancellation tolerance of the fig1 covariance sum, relative to `max|cov_kin|`.
pub const FIG1_SUM_TOL: f64 = 1e-8;
/// Tolerance on the Riemann-sum normalization of the fig1 density.
pub const FIG1_NORM_TOL: f64 = 1e-6;
/// Largest allowed residual ratio per basis doubling.
pub const DOUBLING_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy)]
pub struct RuleInfo {
    pub id: &'static str,
    pub class: RuleClass,
    pub tolerance: f64,
    pub summary: &'static str,
    pub options: &'static [&'static str],
    pub needs_grand: bool,
    pub needs_grid: bool,
}

const POINTS: [&str; 2] = ["stride", "count"];

const fn rule(
    id: &'static str,
    class: RuleClass,
    tolerance: f64,
    summary: &'static str,
    options: &'static [&'static str],
) -> RuleInfo {
    RuleInfo {
        id,
        class,
        tolerance,
        summary,
        options,
        needs_grand: false,
        needs_grid: false,
    }
}

pub const RULES: &[RuleInfo] = &[
    rule("force_balance", RuleClass::Exact, FORCE_BALANCE_TOL, "<F(r)> = 0 with kinetic/interparticle/external parts", &POINTS),
    rule(
        "hyperforce",
        RuleClass::Exact,
        HYPERFORCE_TOL,
        "<S_A(r)> + (A|beta F(r)) = 0",
        &["observable", "observables", "stride", "count"],
    ),
    rule(
        "product_rule",
        RuleClass::Exact,
        PRODUCT_RULE_TOL,
        "<S_A B> + <A S_B> + (BA|beta F) = 0 and the Leibniz rule",
        &["pairs", "stride", "count"],
    ),
    rule("three_g", RuleClass::Exact, THREE_G_TOL, "(beta F(r)|beta F(r')) + <sigma(r) beta F(r')> = 0", &POINTS),
    rule("boltzmann_identity", RuleClass::Exact, BOLTZMANN_TOL, "sigma(r) exp(-beta H) against the Mori-weighted force", &POINTS),
    rule(
        "extended_force_balance",
        RuleClass::Exact,
        EXTENDED_FORCE_TOL,
        "<F_0(r) + lambda S_A(r)/beta>_A = 0 at finite lambda",
        &["observable", "lambdas", "stride", "count"],
    ),
    rule(
        "lambda_slope",
        RuleClass::Convergence,
        LAMBDA_SLOPE_TOL,
        "finite-difference lambda slope of <F_0(r)>_A against cov(A|beta F_0)/beta",
        &["observable", "step", "stride", "count"],
    ),
    rule(
        "chi_density_response",
        RuleClass::Convergence,
        MAX_HALVING_RATIO,
        "chi_A(r) against the central difference of rho(r) in lambda",
        &["observable", "lambda", "step"],
    ),
    RuleInfo {
        needs_grand: true,
        ..rule(
            "omega_derivative",
            RuleClass::Convergence,
            MAX_HALVING_RATIO,
            "<A>_A against -d(beta Omega)/d lambda",
            &["observable", "lambda", "step"],
        )
    },
    rule(
        "shift_current",
        RuleClass::Exact,
        SHIFT_CURRENT_TOL,
        "<C(r,t)> = 0 with kinetic/interparticle/external parts",
        &["protocols", "times", "stride", "count"],
    ),
    rule(
        "hypercurrent",
        RuleClass::Exact,
        HYPERCURRENT_TOL,
        "<S_A(r,t)> + (A(t)|C(r,t)) = 0",
        &["observable", "protocols", "times", "stride", "count"],
    ),
    RuleInfo {
        needs_grid: true,
        ..rule(
            "sigma_commutator",
            RuleClass::Convergence,
            DOUBLING_RATIO,
            "smeared superoperator commutator under basis doubling",
            &["doublings", "subspace"],
        )
    },
    rule(
        "lie_algebra",
        RuleClass::Convergence,
        DOUBLING_RATIO,
        "[Sigma[e1], Sigma[e2]] = Sigma[e1 e2' - e2 e1'] under basis doubling",
        &["doublings", "subspace"],
    ),
    rule(
        "position_hyperforce",
        RuleClass::Convergence,
        DOUBLING_RATIO,
        "S_{sum x}(r) = rho(r) under basis doubling",
        &["doublings", "subspace"],
    ),
    rule(
        "canonical_shift",
        RuleClass::Convergence,
        DOUBLING_RATIO,
        "Sigma[eps] x = eps(x), Sigma[eps] p = -(eps' p + p eps')/2 under basis doubling",
        &["doublings", "subspace"],
    ),
    rule(
        "external_force_splitting",
        RuleClass::Convergence,
        DOUBLING_RATIO,
        "-sigma(r) V = -rho(r) V'(r) under basis doubling",
        &["doublings", "subspace"],
    ),
    rule(
        "fig1",
        RuleClass::Exact,
        FIG1_SUM_TOL,
        "oscillator density and kinetic/external covariances with A = beta H0",
        &[],
    ),
];

pub fn find_rule(id: &str) -> Option<&'static RuleInfo> {
    RULES.iter().find(|r| r.id == id)
}

pub fn class_name(class: RuleClass) -> &'static str {
    match class {
        RuleClass::Exact => "exact",
        RuleClass::Convergence => "convergence",
    }
}

/// Table printed by `list-rules`.
pub fn rule_table() -> String {
    let mut out = String::from("rule\tclass\ttolerance\tdescription\n");
    for r in RULES {
        out.push_str(&format!("{}\t{}\t{:e}\t{}\n", r.id, class_name(r.class), r.tolerance, r.summary));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique() {
        for (i, a) in RULES.iter().enumerate() {
            assert!(RULES[i + 1..].iter().all(|b| b.id != a.id), "duplicate {}", a.id);
        }
    }

    #[test]
    fn lookup() {
        assert_eq!(find_rule("three_g").unwrap().tolerance, THREE_G_TOL);
        assert!(find_rule("frobnicate").is_none());
        assert!(find_rule("omega_derivative").unwrap().needs_grand);
        assert!(rule_table().lines().count() == RULES.len() + 1);
    }
}
