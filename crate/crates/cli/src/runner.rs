//! Scenario execution: builds the system and thermal states, runs each
//! requested rule and collects tabular results.

use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use qgauge::dynamics::{check_hypercurrent, check_shift_current_zero, Protocol};
use qgauge::gauge::{
    check_canonical_shift, check_external_force, check_lie_algebra, check_position_hyperforce, force_density_at,
    smeared_sigma_commutator, ConvergenceStudy, LowSubspace, ShiftField,
};
use qgauge::hyperdft::{
    build_extended, check_chi_is_density_response, check_extended_force_balance, check_lambda_slope,
    check_mean_a_is_omega_derivative, DerivativeCheck,
};
use qgauge::sumrule::{
    all_points, check_3g, check_boltzmann, check_force_balance_at, check_hyperforce_set, check_product_rule_at,
    decimated_points, spread_points,
};
use qgauge::thermal::{state_of_system, ThermalState};
use qgauge::{
    build_fock, build_many_body, gaussian_pair_potential, mori_covariance, random_hermitian, thermal_average,
    BasisSpec, ManyBodySystem, Operator, RuleClass, Statistics, SumRuleReport,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CheckConfig, EnsembleKind, ObservableSpec, ProtocolConfig, ScenarioConfig, SystemConfig};
use crate::rules::{find_rule, RuleInfo, DOUBLING_RATIO, FIG1_NORM_TOL};

/// Statement of the fig1 beta-scaling recorded in the summary.
pub const FIG1_BETA_SCALING: &str =
    "symmetric: cov_kin = cov(beta H0 | beta F_kin(x)) a and cov_ext = cov(beta H0 | beta F_ext(x)) a";

pub const DEFAULT_TIMES: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Rows destined for one CSV file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Per-beta fig1 diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Fig1Block {
    pub beta_hbar_omega: f64,
    pub max_abs_sum: f64,
    pub max_abs_cov_kin: f64,
    pub max_abs_cov_ext: f64,
    pub normalization: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleResult {
    pub index: usize,
    pub rule: String,
    pub class: RuleClass,
    pub tolerance: f64,
    pub pass: bool,
    /// Largest relative residual for exact rules; for convergence rules the
    /// worst doubling ratio or the worst finite-difference halving ratio.
    pub max_residual: f64,
    pub rows: usize,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fig1: Vec<Fig1Block>,
    #[serde(skip)]
    pub table: Table,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub tol_scale: f64,
    pub workers: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol_scale: 1.0,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub pass: bool,
    pub tol_scale: f64,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub results: Vec<RuleResult>,
}

/// Worker count: `QGAUGE_WORKERS` if set, else the explicit option, else all cores.
pub fn worker_count(explicit: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var("QGAUGE_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow!("QGAUGE_WORKERS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("QGAUGE_WORKERS must be a positive integer, got '{v}'");
        }
        return Ok(n);
    }
    Ok(explicit.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioOutcome> {
    if !(opts.tol_scale > 0.0 && opts.tol_scale.is_finite()) {
        bail!("tolerance scale must be positive and finite, got {}", opts.tol_scale);
    }
    let workers = worker_count(opts.workers)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker pool")?;
    let start = Instant::now();
    let results = pool.install(|| -> Result<Vec<RuleResult>> {
        let ctx = Context_::new(cfg)?;
        Ok(cfg
            .checks
            .par_iter()
            .enumerate()
            .map(|(i, check)| ctx.run_check(i, check, opts.tol_scale))
            .collect())
    })?;
    Ok(ScenarioOutcome {
        pass: results.iter().all(|r| r.pass),
        tol_scale: opts.tol_scale,
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        results,
    })
}

pub fn build_system(cfg: &SystemConfig, grand: bool) -> Result<ManyBodySystem> {
    let spec = cfg.basis_spec();
    build_for_spec(cfg, &spec, cfg.particles, grand)
}

fn build_for_spec(cfg: &SystemConfig, spec: &BasisSpec, particles: usize, grand: bool) -> Result<ManyBodySystem> {
    let (strength, width) = cfg.interaction.map_or((0.0, 1.0), |i| (i.strength, i.width));
    let u = gaussian_pair_potential(strength, width);
    let ext = cfg.external.clone();
    let mass = cfg.mass;
    let v = move |x: f64| ext.value(mass, x);
    let sys = if grand {
        build_fock(spec, particles, cfg.statistics, &u, &v)?
    } else {
        build_many_body(spec, particles, cfg.statistics, &u, &v)?
    };
    match cfg.inject_asymmetry {
        Some(a) if a > 0.0 => Ok(sys.with_injected_asymmetry(a, cfg.asymmetry_seed)?),
        _ => Ok(sys),
    }
}

pub fn resolve_observable(spec: ObservableSpec, sys: &ManyBodySystem, beta: f64) -> Operator {
    match spec {
        ObservableSpec::Identity => Operator::identity(sys.dim()),
        ObservableSpec::SumX => sys.position_sum().clone(),
        ObservableSpec::BetaH0 => sys.equilibrium_hamiltonian().scale_real(beta),
        ObservableSpec::NHat => sys.number_operator().clone(),
        ObservableSpec::H0 => sys.equilibrium_hamiltonian(),
        ObservableSpec::RandomHermitian(seed) => random_hermitian(sys.dim(), seed),
    }
}

fn parse_obs(text: &str) -> Result<ObservableSpec> {
    ObservableSpec::parse(text).map_err(|m| anyhow!(m))
}

struct Context_<'a> {
    cfg: &'a ScenarioConfig,
    sys: ManyBodySystem,
    mu: Option<f64>,
    states: Vec<ThermalState>,
}

impl<'a> Context_<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let grand = cfg.ensemble.kind == EnsembleKind::Grand;
        let sys = build_system(&cfg.system, grand)?;
        let mu = cfg.ensemble.mu;
        let states = cfg
            .ensemble
            .betas
            .par_iter()
            .map(|&b| state_of_system(&sys, b, mu).map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cfg, sys, mu, states })
    }

    fn omega(&self) -> f64 {
        self.cfg.system.trap_omega().unwrap_or(1.0)
    }

    fn points(&self, check: &CheckConfig, default_stride: usize) -> Vec<usize> {
        match (check.stride, check.count) {
            (Some(s), _) => decimated_points(&self.sys, s),
            (None, Some(c)) => spread_points(&self.sys, c),
            (None, None) if default_stride > 1 => decimated_points(&self.sys, default_stride),
            (None, None) => all_points(&self.sys),
        }
    }

    fn run_check(&self, index: usize, check: &CheckConfig, tol_scale: f64) -> RuleResult {
        let info = find_rule(&check.rule).expect("validated rule id");
        let outcome = match info.id {
            "fig1" => self.fig1(info, tol_scale),
            "sigma_commutator" | "lie_algebra" | "position_hyperforce" | "canonical_shift"
            | "external_force_splitting" => self.convergence(info, check),
            "chi_density_response" | "omega_derivative" => self.derivatives(info, check),
            _ => self.reports(info, check, tol_scale),
        };
        let mut result = outcome.unwrap_or_else(|e| RuleResult {
            index,
            rule: info.id.to_string(),
            class: info.class,
            tolerance: info.tolerance,
            pass: false,
            max_residual: f64::NAN,
            rows: 0,
            notes: vec![format!("FAIL: error: {e:#}")],
            file: None,
            fig1: Vec::new(),
            table: Table::default(),
        });
        result.index = index;
        result.rows = result.table.rows.len();
        result
    }

    /// Rules producing sum-rule reports, one set per beta.
    fn reports(&self, info: &RuleInfo, check: &CheckConfig, tol_scale: f64) -> Result<RuleResult> {
        let per_beta = self
            .states
            .par_iter()
            .map(|st| self.reports_for_state(info, check, st))
            .collect::<Result<Vec<_>>>()?;
        let labelled: Vec<(String, SumRuleReport)> = per_beta
            .into_iter()
            .flatten()
            .map(|(l, r)| (l, r.rescaled(tol_scale)))
            .collect();
        let term_names = labelled
            .first()
            .map(|(_, r)| r.term_names.clone())
            .ok_or_else(|| anyhow!("rule produced no reports"))?;
        let mut header = vec!["label", "beta", "t", "r", "r_prime"];
        header.extend(term_names.iter().map(String::as_str));
        header.extend(["residual", "scale", "relative"]);
        let mut table = Table::new(&header);
        let mut notes = Vec::new();
        for (label, rep) in &labelled {
            for row in &rep.rows {
                let mut cells: Vec<Cell> = vec![
                    label.as_str().into(),
                    row.beta.into(),
                    row.t.into(),
                    row.r.into(),
                    row.r_prime.into(),
                ];
                cells.extend(row.terms.iter().map(|&v| Cell::Num(v)));
                cells.extend([row.residual.into(), row.scale.into(), row.relative().into()]);
                table.rows.push(cells);
            }
            for n in &rep.notes {
                let tagged = format!("{label} beta={}: {n}", rep.rows.first().map_or(f64::NAN, |r| r.beta));
                if !notes.contains(&tagged) {
                    notes.push(tagged);
                }
            }
        }
        Ok(RuleResult {
            index: 0,
            rule: info.id.to_string(),
            class: info.class,
            tolerance: info.tolerance * tol_scale,
            pass: labelled.iter().all(|(_, r)| r.pass),
            max_residual: labelled.iter().map(|(_, r)| r.max_residual).fold(0.0, f64::max),
            rows: 0,
            notes,
            file: None,
            fig1: Vec::new(),
            table,
        })
    }

    fn reports_for_state(
        &self,
        info: &RuleInfo,
        check: &CheckConfig,
        st: &ThermalState,
    ) -> Result<Vec<(String, SumRuleReport)>> {
        let sys = &self.sys;
        let beta = st.beta();
        Ok(match info.id {
            "force_balance" => vec![("H".into(), check_force_balance_at(st, sys, &self.points(check, 1))?)],
            "hyperforce" => {
                let names = match (&check.observables, &check.observable) {
                    (Some(list), _) => list.clone(),
                    (None, Some(o)) => vec![o.clone()],
                    (None, None) => vec!["identity".into(), "sum_x".into(), "beta_H0".into()],
                };
                let specs = names.iter().map(|n| parse_obs(n)).collect::<Result<Vec<_>>>()?;
                let ops: Vec<Operator> = specs.iter().map(|&s| resolve_observable(s, sys, beta)).collect();
                let refs: Vec<&Operator> = ops.iter().collect();
                let reports = check_hyperforce_set(st, sys, &refs, &self.points(check, 1))?;
                specs.iter().map(ToString::to_string).zip(reports).collect()
            }
            "product_rule" => {
                let pairs = check
                    .pairs
                    .clone()
                    .unwrap_or_else(|| vec![("sum_x".into(), "H0".into())]);
                let pts = self.points(check, 1);
                pairs
                    .iter()
                    .map(|(a, b)| {
                        let (sa, sb) = (parse_obs(a)?, parse_obs(b)?);
                        let oa = resolve_observable(sa, sys, beta);
                        let ob = resolve_observable(sb, sys, beta);
                        Ok((format!("{sa}*{sb}"), check_product_rule_at(st, sys, &oa, &ob, &pts)?))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "three_g" => vec![("beta_F".into(), check_3g(st, sys, &self.points(check, 4))?)],
            "boltzmann_identity" => vec![("exp(-beta H)".into(), check_boltzmann(st, sys, &self.points(check, 1))?)],
            "extended_force_balance" => {
                let spec = parse_obs(check.observable.as_deref().unwrap_or("sum_x"))?;
                let a = resolve_observable(spec, sys, beta);
                let pts = self.points(check, 1);
                check
                    .lambdas
                    .clone()
                    .unwrap_or_else(|| vec![-0.3, 0.3])
                    .iter()
                    .map(|&l| {
                        let ext = build_extended(sys, &a, l, beta, self.mu)?;
                        Ok((format!("{spec} lambda={l}"), check_extended_force_balance(sys, &ext, &pts)?))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "lambda_slope" => {
                let spec = parse_obs(check.observable.as_deref().unwrap_or("sum_x"))?;
                let a = resolve_observable(spec, sys, beta);
                let step = check.step.unwrap_or(1e-4);
                vec![(
                    format!("{spec} step={step}"),
                    check_lambda_slope(sys, &a, beta, self.mu, step, &self.points(check, 1))?,
                )]
            }
            "shift_current" | "hypercurrent" => {
                let times = self.times(check);
                let pts = self.points(check, 1);
                let a = resolve_observable(parse_obs(check.observable.as_deref().unwrap_or("sum_x"))?, sys, beta);
                self.protocols(check)
                    .iter()
                    .map(|pc| {
                        let p = self.protocol(pc)?;
                        let rep = if info.id == "shift_current" {
                            check_shift_current_zero(st, sys, &p, &times, &pts)?
                        } else {
                            check_hypercurrent(st, sys, &p, &a, &times, &pts)?
                        };
                        Ok((pc.label(), rep))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            other => bail!("rule '{other}' does not produce sum-rule reports"),
        })
    }

    fn times(&self, check: &CheckConfig) -> Vec<f64> {
        check
            .times
            .clone()
            .unwrap_or_else(|| DEFAULT_TIMES.iter().map(|t| t / self.omega()).collect())
    }

    fn protocols(&self, check: &CheckConfig) -> Vec<ProtocolConfig> {
        check.protocols.clone().unwrap_or_else(|| {
            let w = self.omega();
            let duration = 3.0 / w;
            vec![
                ProtocolConfig::NoDrive { duration },
                ProtocolConfig::TrapQuench { omega: 2.0 * w, duration },
                ProtocolConfig::TiltQuench { force: 0.5, duration },
            ]
        })
    }

    fn protocol(&self, pc: &ProtocolConfig) -> Result<Protocol> {
        let sys = &self.sys;
        let mass = self.cfg.system.mass;
        Ok(match pc {
            ProtocolConfig::NoDrive { duration } => Protocol::undriven(sys, *duration)?,
            ProtocolConfig::TrapQuench { omega, duration } => {
                let w = *omega;
                Protocol::quench(pc.label(), sys, move |x| 0.5 * mass * w * w * x * x, *duration)?
            }
            ProtocolConfig::TiltQuench { force, duration } => {
                let ext = self.cfg.system.external.clone();
                let f = *force;
                Protocol::quench(pc.label(), sys, move |x| ext.value(mass, x) + f * x, *duration)?
            }
        })
    }

    fn derivatives(&self, info: &RuleInfo, check: &CheckConfig) -> Result<RuleResult> {
        let spec = parse_obs(check.observable.as_deref().unwrap_or("sum_x"))?;
        let lambda = check.lambda.unwrap_or(0.0);
        let step = check.step.unwrap_or(1e-2);
        let sys = &self.sys;
        let checks: Vec<DerivativeCheck> = self
            .states
            .par_iter()
            .map(|st| -> Result<DerivativeCheck> {
                let a = resolve_observable(spec, sys, st.beta());
                let ext = build_extended(sys, &a, lambda, st.beta(), self.mu)?;
                Ok(if info.id == "chi_density_response" {
                    check_chi_is_density_response(sys, &ext, step)?
                } else {
                    check_mean_a_is_omega_derivative(sys, &ext, step)?
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table::new(&["label", "beta", "lambda", "step", "residual", "scale", "ratio", "order"]);
        let mut notes = Vec::new();
        for (st, d) in self.states.iter().zip(&checks) {
            for (s, r) in d.steps.iter().zip(&d.residuals) {
                table.rows.push(vec![
                    spec.to_string().into(),
                    st.beta().into(),
                    lambda.into(),
                    (*s).into(),
                    (*r).into(),
                    d.scale.into(),
                    d.ratio.into(),
                    d.order.into(),
                ]);
            }
            notes.push(format!(
                "{spec} beta={}: residual {:e} at step {:e}, order {:.3}",
                st.beta(),
                d.final_residual(),
                d.steps[1],
                d.order
            ));
        }
        Ok(RuleResult {
            index: 0,
            rule: info.id.to_string(),
            class: info.class,
            tolerance: info.tolerance,
            pass: checks.iter().all(DerivativeCheck::converges),
            max_residual: checks.iter().map(|d| d.ratio).fold(0.0, f64::max),
            rows: 0,
            notes,
            file: None,
            fig1: Vec::new(),
            table,
        })
    }

    fn convergence(&self, info: &RuleInfo, check: &CheckConfig) -> Result<RuleResult> {
        let doublings = check.doublings.unwrap_or(2);
        let k = check.subspace.unwrap_or(8);
        if doublings < 1 {
            bail!("a convergence study needs at least one doubling");
        }
        let cfg = &self.cfg.system;
        let base = cfg.basis_spec();
        let r = nearest_point(&build_for_spec(cfg, &base, 1, false)?, 0.5);
        let mass = cfg.mass;
        let ext = cfg.external.clone();
        let id = info.id;
        let study = ConvergenceStudy::run(id, &base, doublings, |spec| {
            let sys = build_for_spec(cfg, spec, 1, false).map_err(|e| qgauge::Error::InvalidArgument(format!("{e:#}")))?;
            let sub = LowSubspace::new(&sys, k)?;
            match id {
                "sigma_commutator" => {
                    let a = sys.lift_position_function(|x| (-0.5 * x * x).exp())?;
                    smeared_sigma_commutator(&sys, r, &ShiftField::gaussian(r + 0.5, 0.5), &a, &sub)
                }
                "lie_algebra" => {
                    let a = sys.lift_position_function(|x| (-0.5 * x * x).exp())?;
                    check_lie_algebra(&sys, &ShiftField::sine(0.4), &ShiftField::gaussian(0.5, 1.0), &a, &sub)
                }
                "position_hyperforce" => check_position_hyperforce(&sys, r, &sub),
                "canonical_shift" => check_canonical_shift(&sys, &ShiftField::gaussian(0.0, 1.0), &sub),
                _ => check_external_force(&sys, r, |x| ext.derivative(mass, x), &sub),
            }
        })?;
        let ratios = study.ratios();
        let mut table = Table::new(&["study", "size", "residual", "scale", "ratio", "step_pass"]);
        for i in 0..study.sizes.len() {
            let (ratio, ok) = if i == 0 {
                (Cell::Empty, Cell::Empty)
            } else {
                (ratios[i - 1].into(), Cell::Text(study.step_passes(i - 1).to_string()))
            };
            table.rows.push(vec![
                id.into(),
                (study.sizes[i] as f64).into(),
                study.residuals[i].into(),
                study.scales[i].into(),
                ratio,
                ok,
            ]);
        }
        Ok(RuleResult {
            index: 0,
            rule: id.to_string(),
            class: info.class,
            tolerance: DOUBLING_RATIO,
            pass: study.passes(),
            max_residual: ratios.iter().copied().fold(0.0, f64::max),
            rows: 0,
            notes: vec![format!(
                "single particle, r = {r}, {k} lowest states, sizes {:?}",
                study.sizes
            )],
            file: None,
            fig1: Vec::new(),
            table,
        })
    }

    fn fig1(&self, info: &RuleInfo, tol_scale: f64) -> Result<RuleResult> {
        let sys = &self.sys;
        let spec = sys.spec();
        let a_len = spec
            .oscillator_length()
            .ok_or_else(|| anyhow!("fig1 needs an oscillator basis"))?;
        let omega = match spec.kind {
            qgauge::BasisKind::Oscillator { omega, .. } => omega,
            _ => unreachable!(),
        };
        let hbar = spec.hbar;
        let tol = info.tolerance * tol_scale;
        let blocks = self
            .states
            .par_iter()
            .map(|st| -> Result<(Fig1Block, Vec<Vec<Cell>>)> {
                let beta = st.beta();
                let bh = sys.equilibrium_hamiltonian().scale_real(beta);
                let rows = all_points(sys)
                    .par_iter()
                    .map(|&k| -> Result<[f64; 5]> {
                        let x = sys.eval_points()[k];
                        let f = force_density_at(sys, k)?;
                        let rho = thermal_average(st, &sys.density_at(k)?)?.re;
                        let kin = mori_covariance(st, &bh, &f.kinetic.scale_real(beta))?.re;
                        let ext = mori_covariance(st, &bh, &f.external.scale_real(beta))?.re;
                        Ok([x / a_len, rho * a_len, kin * a_len, ext * a_len, (kin + ext) * a_len])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bhw = beta * hbar * omega;
                let max = |i: usize| rows.iter().map(|r| r[i].abs()).fold(0.0, f64::max);
                let normalization = rows.iter().map(|r| r[1]).sum::<f64>() * sys.eval_spacing() / a_len;
                let block = Fig1Block {
                    beta_hbar_omega: bhw,
                    max_abs_sum: max(4),
                    max_abs_cov_kin: max(2),
                    max_abs_cov_ext: max(3),
                    normalization,
                    pass: max(4) <= tol * max(2) && (normalization - 1.0).abs() <= FIG1_NORM_TOL,
                };
                let cells = rows
                    .iter()
                    .map(|r| {
                        let mut c = vec![Cell::Num(bhw)];
                        c.extend(r.iter().map(|&v| Cell::Num(v)));
                        c
                    })
                    .collect();
                Ok((block, cells))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table::new(&["beta_hbar_omega", "x_over_a", "rho_times_a", "cov_kin", "cov_ext", "sum"]);
        let mut fig1 = Vec::new();
        for (b, rows) in blocks {
            fig1.push(b);
            table.rows.extend(rows);
        }
        Ok(RuleResult {
            index: 0,
            rule: info.id.to_string(),
            class: info.class,
            tolerance: tol,
            pass: fig1.iter().all(|b| b.pass),
            max_residual: fig1
                .iter()
                .map(|b| if b.max_abs_sum == 0.0 { 0.0 } else { b.max_abs_sum / b.max_abs_cov_kin })
                .fold(0.0, f64::max),
            rows: 0,
            notes: vec![format!("beta scaling {FIG1_BETA_SCALING}; a = sqrt(hbar/(m omega)) = {a_len}")],
            file: None,
            fig1,
            table,
        })
    }
}

fn nearest_point(sys: &ManyBodySystem, target: f64) -> f64 {
    sys.eval_points()
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(0.0)
}

/// Configuration of the fig1 dataset: oscillator with `n_max` levels, one
/// particle, `A = beta H0`.
pub fn fig1_config(n_max: usize, betas: &[f64]) -> ScenarioConfig {
    use crate::config::{BasisConfig, EnsembleConfig, ExternalConfig, OutputConfig};
    ScenarioConfig {
        system: SystemConfig {
            basis: BasisConfig::Oscillator { n_max, omega: 1.0 },
            hbar: 1.0,
            mass: 1.0,
            particles: 1,
            statistics: Statistics::Distinguishable,
            interaction: None,
            external: ExternalConfig::Harmonic { omega: 1.0 },
            inject_asymmetry: None,
            asymmetry_seed: 7,
        },
        ensemble: EnsembleConfig {
            kind: EnsembleKind::Canonical,
            betas: betas.to_vec(),
            mu: None,
        },
        checks: vec![CheckConfig::new("fig1")],
        output: OutputConfig::default(),
    }
}

/// Temperatures `beta hbar omega = 0.5, 1, ..., 6`.
pub const FIG1_BETAS: [f64; 7] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn force_balance_scenario_passes() {
        let cfg = parse_config(
            r#"{"system": {"basis": {"oscillator": {"n_max": 20}}, "external": {"harmonic": {"omega": 1.0}}},
                "ensemble": {"betas": [1.0, 2.0]}, "checks": [{"rule": "force_balance", "stride": 10}]}"#,
        )
        .unwrap();
        let out = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert!(out.pass);
        assert_eq!(out.results[0].rows, 2 * 17);
    }

    #[test]
    fn observables_resolve() {
        let sys = build_system(&fig1_config(10, &[1.0]).system, false).unwrap();
        let bh = resolve_observable(ObservableSpec::BetaH0, &sys, 2.0);
        assert_eq!(bh.entries()[(1, 1)].re, 2.0 * sys.hamiltonian().entries()[(1, 1)].re);
        assert_eq!(resolve_observable(ObservableSpec::Identity, &sys, 1.0).trace().re, sys.dim() as f64);
        assert_eq!(
            resolve_observable(ObservableSpec::RandomHermitian(3), &sys, 1.0),
            resolve_observable(ObservableSpec::RandomHermitian(3), &sys, 5.0)
        );
    }

    #[test]
    fn module_errors_become_failed_rules() {
        let cfg = parse_config(
            r#"{"system": {"basis": {"oscillator": {"n_max": 12}}, "external": {"harmonic": {"omega": 1.0}}},
                "ensemble": {"betas": [1.0]}, "checks": [{"rule": "force_balance", "stride": 20},
                {"rule": "hypercurrent", "observable": "sum_x", "times": [0.0],
                 "protocols": [{"no_drive": {"duration": 1.0}}], "stride": 40}]}"#,
        )
        .unwrap();
        let out = run_scenario(&cfg, &RunOptions::default()).unwrap();
        assert!(out.results[0].pass);
        assert!(out.results[1].pass, "{:?}", out.results[1].notes);
    }
}
