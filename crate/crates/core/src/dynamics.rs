//! Unitary evolution under piecewise-constant Hamiltonians, the shift
//! current and the dynamical sum rules over an equilibrium initial state.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge::sigma_apply_at;
use crate::operator::{c, check_dims, trace_of_product_with_scale, max_abs, spectral_decompose, CMatrix, Operator, SpectralDecomposition, I};
use crate::sumrule::{ReportRow, RuleClass, SumRuleReport};
use crate::system::ManyBodySystem;
use crate::thermal::ThermalState;

pub const SHIFT_CURRENT_TOL: f64 = 1e-9;
pub const HYPERCURRENT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Segment {
    duration: f64,
    spectrum: SpectralDecomposition,
}

/// Piecewise-constant time dependence `H(t) = H_k` on consecutive segments.
#[derive(Clone, Debug)]
pub struct Protocol {
    label: String,
    hbar: f64,
    segments: Vec<Segment>,
}

impl Protocol {
    pub fn new(label: impl Into<String>, hbar: f64, segments: &[(f64, &Operator)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidArgument("protocol needs at least one segment".into()));
        }
        let dim = segments[0].1.dim();
        let mut out = Vec::with_capacity(segments.len());
        for (duration, h) in segments {
            if !(*duration > 0.0 && duration.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "segment duration must be positive, got {duration}"
                )));
            }
            if h.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "protocol segments",
                    left: crate::error::shape(dim, dim),
                    right: crate::error::shape(h.dim(), h.dim()),
                });
            }
            out.push(Segment {
                duration: *duration,
                spectrum: spectral_decompose(h)?,
            });
        }
        Ok(Self {
            label: label.into(),
            hbar,
            segments: out,
        })
    }

    /// Sudden switch from the system's Hamiltonian to `T + U + V_new` held for `duration`.
    pub fn quench(
        label: impl Into<String>,
        sys: &ManyBodySystem,
        v_new: impl Fn(f64) -> f64,
        duration: f64,
    ) -> Result<Self> {
        let v = sys.lift_one_body(&sys.single_particle().potential(v_new)?)?;
        let h = (&(sys.kinetic() + sys.interparticle()) + &v).hermitian_part();
        Self::new(label, sys.hbar(), &[(duration, &h)])
    }

    /// Evolution under the unperturbed equilibrium Hamiltonian.
    pub fn undriven(sys: &ManyBodySystem, duration: f64) -> Result<Self> {
        Self::new("no_drive", sys.hbar(), &[(duration, &sys.equilibrium_hamiltonian())])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.segments[0].spectrum.dim()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// Propagator `U(t, 0)`.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub t: f64,
    pub u: Operator,
}

impl Propagator {
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.u.dim();
        max_abs(&(self.u.entries().adjoint() * self.u.entries() - CMatrix::identity(n, n)))
    }
}

fn segment_factor(seg: &Segment, tau: f64, hbar: f64) -> CMatrix {
    seg.spectrum
        .function(|e| c(0.0) + (-I * e * tau / hbar).exp())
        .into_entries()
}

/// `U(t) = e^{-i H_k tau / hbar} ... e^{-i H_1 dt_1 / hbar}`.
pub fn propagate(protocol: &Protocol, t: f64) -> Result<Propagator> {
    let total = protocol.total_duration();
    let slack = 1e-12 * total.max(1.0);
    if !(t >= 0.0 && t <= total + slack) {
        return Err(Error::InvalidArgument(format!(
            "time {t} outside the protocol range [0, {total}]"
        )));
    }
    let n = protocol.dim();
    let mut u = CMatrix::identity(n, n);
    let mut elapsed = 0.0;
    for seg in &protocol.segments {
        if t <= elapsed {
            break;
        }
        let tau = (t - elapsed).min(seg.duration);
        u = segment_factor(seg, tau, protocol.hbar) * u;
        elapsed += seg.duration;
    }
    Ok(Propagator {
        t,
        u: Operator::from_parts(u, false),
    })
}

/// `A(t) = U† A U`.
pub fn heisenberg(a: &Operator, u: &Propagator) -> Result<Operator> {
    check_dims("Heisenberg picture", a, &u.u)?;
    let ue = u.u.entries();
    Ok(Operator::from_parts(ue.adjoint() * a.entries() * ue, a.hermitian_hint()))
}

/// Heisenberg current `U† m J(r) U`, kept in rank-two form for one particle.
enum HeisenbergCurrent {
    LowRank { v: crate::basis::CVector, w: crate::basis::CVector },
    Dense(CMatrix),
}

impl HeisenbergCurrent {
    fn new(sys: &ManyBodySystem, k: usize, u: &CMatrix) -> Result<Self> {
        Ok(match sys.current_factors_at(k) {
            Some(f) => HeisenbergCurrent::LowRank {
                v: u.adjoint() * &f.density,
                w: u.adjoint() * &f.momentum_density,
            },
            None => HeisenbergCurrent::Dense(u.adjoint() * sys.current_at(k)?.entries() * u),
        })
    }

    fn dense(&self) -> CMatrix {
        match self {
            HeisenbergCurrent::LowRank { v, w } => (w * v.adjoint() + v * w.adjoint()) * c(0.5),
            HeisenbergCurrent::Dense(j) => j.clone(),
        }
    }

    /// `(i/hbar) [X, J]`.
    fn commutator_from(&self, x: &CMatrix, hbar: f64) -> CMatrix {
        let m = match self {
            HeisenbergCurrent::LowRank { v, w } => {
                let xv = x * v;
                let xw = x * w;
                let vx = v.adjoint() * x;
                let wx = w.adjoint() * x;
                (&xw * v.adjoint() + &xv * w.adjoint() - w * &vx - v * &wx) * c(0.5)
            }
            HeisenbergCurrent::Dense(j) => x * j - j * x,
        };
        m * (I / hbar)
    }
}

/// Shift current `C(r, t) = (i/hbar) [beta H_0, U† m J(r) U]`.
pub fn shift_current(
    sys: &ManyBodySystem,
    protocol: &Protocol,
    r: f64,
    t: f64,
    beta: f64,
) -> Result<Operator> {
    let k = sys.eval_index(r)?;
    let u = propagate(protocol, t)?;
    let j = HeisenbergCurrent::new(sys, k, u.u.entries())?;
    let bh = sys.hamiltonian().entries() * c(beta);
    Ok(Operator::from_parts(j.commutator_from(&bh, sys.hbar()), true))
}

fn validate_times(protocol: &Protocol, times: &[f64]) -> Result<Vec<Propagator>> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time list".into()));
    }
    times.iter().map(|&t| propagate(protocol, t)).collect()
}

/// `<C(r, t)> = 0` over the initial thermal state, with the kinetic,
/// interparticle and external parts of `beta H_0` reported separately.
pub fn check_shift_current_zero(
    state: &ThermalState,
    sys: &ManyBodySystem,
    protocol: &Protocol,
    times: &[f64],
    points: &[usize],
) -> Result<SumRuleReport> {
    let props = validate_times(protocol, times)?;
    let beta = state.beta();
    let hbar = sys.hbar();
    let parts = [
        sys.hamiltonian().entries() * c(beta),
        sys.kinetic().entries() * c(beta),
        sys.interparticle().entries() * c(beta),
        sys.external().entries() * c(beta),
    ];
    // <[X, J]> = Tr((rho X) J) - Tr((X rho) J)
    let rho = state.density_matrix();
    let sandwiches: Vec<(CMatrix, CMatrix)> = parts.iter().map(|x| (rho * x, x * rho)).collect();
    let jobs: Vec<(usize, usize)> = (0..props.len())
        .flat_map(|i| points.iter().map(move |&k| (i, k)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, k)| -> Result<ReportRow> {
            let j = HeisenbergCurrent::new(sys, k, props[i].u.entries())?.dense();
            let mut terms = Vec::with_capacity(4);
            let mut scale = 0.0_f64;
            for (left, right) in &sandwiches {
                let (lj, ml) = trace_of_product_with_scale(left, &j);
                let (rj, mr) = trace_of_product_with_scale(right, &j);
                let avg = (lj - rj) * (I / hbar);
                terms.push(avg);
                scale = scale.max(ml.max(mr) / hbar).max(avg.norm());
            }
            Ok(ReportRow {
                beta,
                t: Some(props[i].t),
                r: sys.eval_points()[k],
                r_prime: None,
                terms: terms.iter().map(|z| z.re).collect(),
                residual: terms[0].norm(),
                scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "shift_current",
        RuleClass::Exact,
        SHIFT_CURRENT_TOL,
        &["C", "C_kin", "C_int", "C_ext"],
        rows,
    )
    .with_note(format!("protocol {}", protocol.label())))
}

/// `<U† S_A(r) U> + (A(t) | C(r, t)) = 0` with the Mori product taken in the
/// initial thermal state.
pub fn check_hypercurrent(
    state: &ThermalState,
    sys: &ManyBodySystem,
    protocol: &Protocol,
    a: &Operator,
    times: &[f64],
    points: &[usize],
) -> Result<SumRuleReport> {
    if a.check_hermitian(1e-12).is_err() {
        return Err(Error::InvalidArgument(format!(
            "hypercurrent observable must be Hermitian (asymmetry {:.3e})",
            a.asymmetry()
        )));
    }
    let props = validate_times(protocol, times)?;
    let beta = state.beta();
    let hbar = sys.hbar();
    let bh_eig = state.to_eigenbasis(&(sys.hamiltonian().entries() * c(beta)));
    // per time: evolved density matrix, A(t) in the initial eigenbasis and
    // the frame U(t) V mapping the current into that eigenbasis
    let per_time: Vec<(Operator, CMatrix, CMatrix)> = props
        .par_iter()
        .map(|p| -> Result<(Operator, CMatrix, CMatrix)> {
            let u = p.u.entries();
            let rho_t = Operator::from_parts(u * state.density_matrix() * u.adjoint(), true);
            let a_t = heisenberg(a, p)?;
            Ok((rho_t, state.to_eigenbasis(a_t.entries()), u * state.unitary()))
        })
        .collect::<Result<Vec<_>>>()?;
    let s_ops: Vec<Operator> = points
        .par_iter()
        .map(|&k| sigma_apply_at(sys, k, a))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..props.len())
        .flat_map(|i| (0..points.len()).map(move |p| (i, p)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, p)| -> Result<ReportRow> {
            let k = points[p];
            let (rho_t, a_eig, frame) = &per_time[i];
            let (mean_s, mag_s) = trace_of_product_with_scale(rho_t.entries(), s_ops[p].entries());
            let cur_eig = HeisenbergCurrent::new(sys, k, frame)?.commutator_from(&bh_eig, hbar);
            let (mori, mag_m) = state.mori_eigen_with_scale(a_eig, &cur_eig);
            let sum = mean_s + mori;
            Ok(ReportRow {
                beta,
                t: Some(props[i].t),
                r: sys.eval_points()[k],
                r_prime: None,
                terms: vec![mean_s.re, mori.re],
                residual: sum.norm(),
                scale: mag_s.max(mag_m).max(mean_s.norm()).max(mori.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SumRuleReport::new(
        "hypercurrent",
        RuleClass::Exact,
        HYPERCURRENT_TOL,
        &["S_A_t", "mori_At_C"],
        rows,
    )
    .with_note(format!("protocol {}", protocol.label())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use crate::gauge::force_density;
    use crate::operator::{random_hermitian, residual_norm};
    use crate::system::{build_many_body, Statistics};
    use crate::thermal::{state_of_system, thermal_average};

    fn no_pair(_: f64, _: f64) -> f64 {
        0.0
    }

    fn osc(n: usize) -> ManyBodySystem {
        build_many_body(&BasisSpec::oscillator(n, 1.0), 1, Statistics::Distinguishable, &no_pair, &|x| 0.5 * x * x)
            .unwrap()
    }

    #[test]
    fn propagator_basics() {
        let sys = osc(20);
        let p = Protocol::undriven(&sys, 3.0).unwrap();
        let u0 = propagate(&p, 0.0).unwrap();
        assert_eq!(residual_norm(&u0.u, &Operator::identity(sys.dim())).unwrap(), 0.0);
        let u = propagate(&p, 1.3).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        // stationary phases on the oscillator levels
        for n in 0..10 {
            let expected = (-I * (n as f64 + 0.5) * 1.3).exp();
            assert!((u.u.entries()[(n, n)] - expected).norm() < 1e-11);
        }
        assert!(propagate(&p, 3.5).is_err());
        assert!(propagate(&p, -0.1).is_err());
    }

    #[test]
    fn split_segments_compose() {
        let sys = osc(15);
        let h = sys.hamiltonian();
        let one = Protocol::new("one", 1.0, &[(2.0, h)]).unwrap();
        let two = Protocol::new("two", 1.0, &[(0.7, h), (1.3, h)]).unwrap();
        let a = propagate(&one, 1.6).unwrap();
        let b = propagate(&two, 1.6).unwrap();
        assert!(residual_norm(&a.u, &b.u).unwrap() < 1e-12);
    }

    #[test]
    fn heisenberg_preserves_spectrum_and_conserved_energy() {
        let sys = osc(15);
        let p = Protocol::quench("q", &sys, |x| 2.0 * x * x, 2.0).unwrap();
        let u = propagate(&p, 1.1).unwrap();
        let a = random_hermitian(sys.dim(), 4);
        let at = heisenberg(&a, &u).unwrap();
        let e0 = spectral_decompose(&a).unwrap();
        let e1 = spectral_decompose(&at.hermitian_part()).unwrap();
        for (x, y) in e0.eigenvalues().iter().zip(e1.eigenvalues()) {
            assert!((x - y).abs() < 1e-10);
        }
        let free = Protocol::undriven(&sys, 2.0).unwrap();
        let uf = propagate(&free, 1.1).unwrap();
        let ht = heisenberg(sys.hamiltonian(), &uf).unwrap();
        assert!(residual_norm(&ht, sys.hamiltonian()).unwrap() < 1e-11);
    }

    #[test]
    fn shift_current_at_zero_is_force() {
        let sys = osc(20);
        let p = Protocol::quench("q", &sys, |x| 2.0 * x * x, 1.0).unwrap();
        let r = sys.eval_points()[85];
        let cop = shift_current(&sys, &p, r, 0.0, 1.5).unwrap();
        let f = force_density(&sys, r).unwrap().total.scale_real(1.5);
        assert!(residual_norm(&cop, &f).unwrap() <= 1e-12 * f.max_abs());
        let later = shift_current(&sys, &p, r, 0.8, 1.5).unwrap();
        assert!(later.asymmetry() <= 1e-12 * later.max_abs());
    }

    #[test]
    fn dynamical_sum_rules_under_quench() {
        let sys = osc(80);
        let st = state_of_system(&sys, 1.0, None).unwrap();
        let p = Protocol::quench("trap", &sys, |x| 2.0 * x * x, 3.0).unwrap();
        let times = [0.0, 0.5, 1.0, 2.0, 3.0];
        let pts: Vec<usize> = (0..161).step_by(8).collect();
        let rep = check_shift_current_zero(&st, &sys, &p, &times, &pts).unwrap();
        assert!(rep.pass, "max {}", rep.max_residual);
        let hyp = check_hypercurrent(&st, &sys, &p, sys.position_sum(), &times, &pts).unwrap();
        assert!(hyp.pass, "max {}", hyp.max_residual);
        // dynamical density from the mori term, up to basis truncation
        let u = propagate(&p, 2.0).unwrap();
        for row in hyp.rows.iter().filter(|r| r.t == Some(2.0)) {
            let rho = heisenberg(&sys.density_operator(row.r).unwrap(), &u).unwrap();
            let expected = thermal_average(&st, &rho).unwrap().re;
            assert!((row.terms[1] + expected).abs() < 1e-6, "{} vs {}", row.terms[1], expected);
        }
        let worst = hyp.rows.iter().map(|r| r.terms[1].abs()).fold(0.0, f64::max);
        assert!(worst > 1e3 * HYPERCURRENT_TOL);
    }
}
