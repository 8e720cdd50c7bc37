//! Canonical and grand-canonical thermal states, averages and the Mori
//! product in spectral closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauge::force_density_at;
use crate::operator::{
    c, max_abs, spectral_decompose, trace_of_product, trace_of_product_with_scale, CMatrix, Operator,
};
use crate::system::{ManyBodySystem, Sector, Statistics};

/// Relative gap below which two levels are treated as degenerate in the
/// Mori kernel.
pub const GAP_TOL_REL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    Canonical,
    Grand,
}

/// One particle-number sector of a thermal state. `log_weight` is the
/// logarithm of the sector prefactor, `beta mu N - ln N!` where counted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThermalSector {
    pub particles: usize,
    pub offset: usize,
    pub dim: usize,
    pub log_weight: f64,
}

/// Spectral thermal state `exp(-beta K) / Z` with `K = H` (canonical) or
/// `K = H - mu N + ln(N!)/beta` (grand).
#[derive(Clone, Debug)]
pub struct ThermalState {
    beta: f64,
    mu: Option<f64>,
    ensemble: Ensemble,
    sectors: Vec<ThermalSector>,
    energies: Vec<f64>,
    unitary: CMatrix,
    ground: f64,
    shifted_sum: f64,
    probabilities: Vec<f64>,
    kernel: DMatrix<f64>,
    density_matrix: CMatrix,
}

fn validate_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// Integrated imaginary-time weight `(e^{-beta e_n} - e^{-beta e_m}) / (e_m - e_n)`
/// for ground-shifted energies `e_m, e_n >= 0`.
pub fn mori_weight(beta: f64, em: f64, en: f64, gap_tol: f64) -> f64 {
    let delta = em - en;
    let mean = 0.5 * (em + en);
    let x = 0.5 * beta * delta;
    if delta.abs() <= gap_tol {
        beta * (-beta * mean).exp() * (1.0 + x * x / 6.0)
    } else if x.abs() < 1.0 {
        beta * (-beta * mean).exp() * (x.sinh() / x)
    } else {
        ((-beta * en).exp() - (-beta * em).exp()) / delta
    }
}

impl ThermalState {
    fn from_spectrum(
        beta: f64,
        mu: Option<f64>,
        ensemble: Ensemble,
        sectors: Vec<ThermalSector>,
        energies: Vec<f64>,
        unitary: CMatrix,
    ) -> Result<Self> {
        let ground = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let top = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !ground.is_finite() || !top.is_finite() {
            return Err(Error::InvalidArgument("non-finite spectrum".into()));
        }
        let shifted: Vec<f64> = energies.iter().map(|e| e - ground).collect();
        let boltz: Vec<f64> = shifted.iter().map(|e| (-beta * e).exp()).collect();
        let shifted_sum: f64 = boltz.iter().sum();
        let probabilities: Vec<f64> = boltz.iter().map(|b| b / shifted_sum).collect();
        let gap_tol = GAP_TOL_REL * (top - ground).max(1.0);
        let n = energies.len();
        let kernel = DMatrix::from_fn(n, n, |m, k| mori_weight(beta, shifted[m], shifted[k], gap_tol) / shifted_sum);
        let mut scaled = unitary.clone();
        for (j, p) in probabilities.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*p);
        }
        let density_matrix = &scaled * unitary.adjoint();
        Ok(Self {
            beta,
            mu,
            ensemble,
            sectors,
            energies,
            unitary,
            ground,
            shifted_sum,
            probabilities,
            kernel,
            density_matrix,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn sectors(&self) -> &[ThermalSector] {
        &self.sectors
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Eigenvalues of the generator `K`, in eigenvector order.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    /// Occupation probabilities of the eigenstates.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `ln Z`.
    pub fn log_partition(&self) -> f64 {
        self.shifted_sum.ln() - self.beta * self.ground
    }

    pub fn partition(&self) -> f64 {
        self.log_partition().exp()
    }

    /// `-ln Z / beta`: the free energy (canonical) or grand potential (grand).
    pub fn free_energy(&self) -> f64 {
        -self.log_partition() / self.beta
    }

    pub fn density_matrix(&self) -> &CMatrix {
        &self.density_matrix
    }

    /// Normalized kernel `w(E_m, E_n) / Z` in the eigenbasis.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.unitary.adjoint() * a * &self.unitary
    }

    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.unitary * a * self.unitary.adjoint()
    }

    fn check(&self, a: &Operator) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "thermal state",
                left: crate::error::shape(a.dim(), a.dim()),
                right: crate::error::shape(self.dim(), self.dim()),
            });
        }
        Ok(())
    }

    /// `Tr(rho A)` and the summed magnitude of its terms.
    pub fn average_with_scale(&self, a: &Operator) -> Result<(Complex64, f64)> {
        self.check(a)?;
        Ok(trace_of_product_with_scale(&self.density_matrix, a.entries()))
    }

    /// Mori product of eigenbasis matrices, with the component magnitude: the
    /// larger of the summed term magnitudes and the product of the largest
    /// entries of both factors and the kernel.
    pub fn mori_eigen_with_scale(&self, a_eig: &CMatrix, b_eig: &CMatrix) -> (Complex64, f64) {
        let n = self.dim();
        let mut acc = c(0.0);
        let mut mag = 0.0;
        for j in 0..n {
            for i in 0..n {
                let t = a_eig[(i, j)].conj() * b_eig[(i, j)] * self.kernel[(j, i)];
                acc += t;
                mag += t.norm();
            }
        }
        let bound = max_abs(a_eig) * max_abs(b_eig) * self.kernel.amax();
        (acc / self.beta, mag.max(bound) / self.beta)
    }

    pub fn mori_with_scale(&self, a: &Operator, b: &Operator) -> Result<(Complex64, f64)> {
        self.check(a)?;
        self.check(b)?;
        let ae = self.to_eigenbasis(a.entries());
        let be = self.to_eigenbasis(b.entries());
        Ok(self.mori_eigen_with_scale(&ae, &be))
    }

    /// Boltzmann operator `exp(-beta (K - E_0))`, ground-shifted.
    pub fn shifted_boltzmann_operator(&self) -> CMatrix {
        let mut scaled = self.unitary.clone();
        for (j, p) in self.probabilities.iter().enumerate() {
            scaled.column_mut(j).scale_mut(p * self.shifted_sum);
        }
        &scaled * self.unitary.adjoint()
    }
}

/// Canonical thermal state of a Hermitian `h` at inverse temperature `beta`.
pub fn make_thermal_state(h: &Operator, beta: f64) -> Result<ThermalState> {
    validate_beta(beta)?;
    let d = spectral_decompose(h)?;
    let sectors = vec![ThermalSector {
        particles: 0,
        offset: 0,
        dim: h.dim(),
        log_weight: 0.0,
    }];
    ThermalState::from_spectrum(
        beta,
        None,
        Ensemble::Canonical,
        sectors,
        d.eigenvalues().to_vec(),
        d.unitary().clone(),
    )
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Grand state from per-sector Hamiltonians `(N, H_N)` covering
/// `N = 0..=N_max`. With `count_permutations` the sector weight includes
/// `1/N!`, appropriate for distinguishable product bases.
pub fn make_grand_state(
    sectors: &[(usize, &Operator)],
    beta: f64,
    mu: f64,
    count_permutations: bool,
) -> Result<ThermalState> {
    validate_beta(beta)?;
    if !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("chemical potential must be finite, got {mu}")));
    }
    let mut sorted: Vec<(usize, &Operator)> = sectors.to_vec();
    sorted.sort_by_key(|s| s.0);
    for (expect, (n, _)) in sorted.iter().enumerate() {
        if *n != expect {
            return Err(Error::InvalidArgument(format!("missing sector N={expect}")));
        }
    }
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("missing sector N=0".into()));
    }
    let dim: usize = sorted.iter().map(|s| s.1.dim()).sum();
    let mut energies = Vec::with_capacity(dim);
    let mut unitary = CMatrix::zeros(dim, dim);
    let mut out_sectors = Vec::new();
    let mut offset = 0;
    for (n, h) in sorted {
        let d = spectral_decompose(h)?;
        let lnf = if count_permutations { ln_factorial(n) } else { 0.0 };
        let shift = -mu * n as f64 + lnf / beta;
        energies.extend(d.eigenvalues().iter().map(|e| e + shift));
        unitary.view_mut((offset, offset), (h.dim(), h.dim())).copy_from(d.unitary());
        out_sectors.push(ThermalSector {
            particles: n,
            offset,
            dim: h.dim(),
            log_weight: beta * mu * n as f64 - lnf,
        });
        offset += h.dim();
    }
    ThermalState::from_spectrum(beta, Some(mu), Ensemble::Grand, out_sectors, energies, unitary)
}

/// Thermal state of a system's equilibrium Hamiltonian, canonical or grand
/// depending on the system layout.
pub fn state_of_system(sys: &ManyBodySystem, beta: f64, mu: Option<f64>) -> Result<ThermalState> {
    state_with_hamiltonian(sys, &sys.equilibrium_hamiltonian(), beta, mu)
}

/// Thermal state of `h` on the layout of `sys`. A grand system requires `mu`;
/// if `h` couples particle-number blocks it is diagonalized as a whole.
pub fn state_with_hamiltonian(
    sys: &ManyBodySystem,
    h: &Operator,
    beta: f64,
    mu: Option<f64>,
) -> Result<ThermalState> {
    if !sys.is_grand() {
        if mu.is_some() {
            return Err(Error::InvalidArgument(
                "a chemical potential needs a grand (Fock) system".into(),
            ));
        }
        return make_thermal_state(h, beta);
    }
    let mu = mu.ok_or_else(|| Error::InvalidArgument("grand system needs a chemical potential".into()))?;
    let count = sys.statistics() == Statistics::Distinguishable;
    let sectors = sys.sectors();
    if block_diagonal(h.entries(), &sectors) {
        let blocks: Vec<(usize, Operator)> = sectors
            .iter()
            .map(|s| {
                let b = h.entries().view((s.offset, s.offset), (s.dim, s.dim)).into_owned();
                (s.particles, Operator::from_parts(b, true))
            })
            .collect();
        let refs: Vec<(usize, &Operator)> = blocks.iter().map(|(n, o)| (*n, o)).collect();
        return make_grand_state(&refs, beta, mu, count);
    }
    validate_beta(beta)?;
    let mut k = h.entries().clone();
    let mut out_sectors = Vec::new();
    for s in &sectors {
        let lnf = if count { ln_factorial(s.particles) } else { 0.0 };
        let shift = -mu * s.particles as f64 + lnf / beta;
        for i in s.offset..s.offset + s.dim {
            k[(i, i)] += c(shift);
        }
        out_sectors.push(ThermalSector {
            particles: s.particles,
            offset: s.offset,
            dim: s.dim,
            log_weight: beta * mu * s.particles as f64 - lnf,
        });
    }
    let d = spectral_decompose(&Operator::from_parts(k, true))?;
    ThermalState::from_spectrum(
        beta,
        Some(mu),
        Ensemble::Grand,
        out_sectors,
        d.eigenvalues().to_vec(),
        d.unitary().clone(),
    )
}

fn block_diagonal(m: &CMatrix, sectors: &[Sector]) -> bool {
    for a in sectors {
        for b in sectors {
            if a.offset != b.offset
                && m.view((a.offset, b.offset), (a.dim, b.dim)).iter().any(|z| z.norm() != 0.0)
            {
                return false;
            }
        }
    }
    true
}

/// `<A> = Tr(A e^{-beta K}) / Z`.
pub fn thermal_average(state: &ThermalState, a: &Operator) -> Result<Complex64> {
    state.check(a)?;
    Ok(trace_of_product(&state.density_matrix, a.entries()))
}

/// `(A|B) = (1/beta) int_0^beta Tr A† e^{-t K} B e^{t K} e^{-beta K} / Z dt`.
pub fn mori_product(state: &ThermalState, a: &Operator, b: &Operator) -> Result<Complex64> {
    Ok(state.mori_with_scale(a, b)?.0)
}

/// `cov(A|B) = (A|B) - <A†><B>`.
pub fn mori_covariance(state: &ThermalState, a: &Operator, b: &Operator) -> Result<Complex64> {
    let m = mori_product(state, a, b)?;
    Ok(m - thermal_average(state, a)?.conj() * thermal_average(state, b)?)
}

/// Residual of `sigma(r) e^{-beta H} = int_0^beta e^{-t H} F(r) e^{t H} e^{-beta H} dt`,
/// relative to the larger side.
pub fn check_boltzmann_identity(state: &ThermalState, sys: &ManyBodySystem, r: f64) -> Result<f64> {
    let k = sys.eval_index(r)?;
    let boltz = Operator::from_parts(state.shifted_boltzmann_operator(), true);
    let lhs = crate::gauge::sigma_apply_at(sys, k, &boltz)?;
    let f = force_density_at(sys, k)?.total;
    let fe = state.to_eigenbasis(f.entries());
    let n = state.dim();
    let z = state.shifted_sum;
    let weighted = CMatrix::from_fn(n, n, |i, j| fe[(i, j)] * (state.kernel[(j, i)] * z));
    let rhs = state.from_eigenbasis(&weighted);
    let components = max_abs(boltz.entries()) * sys.current_at(k)?.max_abs() / sys.hbar();
    let scale = max_abs(lhs.entries()).max(max_abs(&rhs)).max(components);
    let diff = max_abs(&(lhs.entries() - &rhs));
    if scale == 0.0 {
        return Ok(diff);
    }
    Ok(diff / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, Boundary, MomentumScheme};
    use crate::operator::random_hermitian;
    use crate::system::build_many_body;

    fn no_pair(_: f64, _: f64) -> f64 {
        0.0
    }

    #[test]
    fn rejects_bad_beta() {
        let h = Operator::diagonal(&[0.0, 1.0]);
        assert!(make_thermal_state(&h, 0.0).is_err());
        assert!(make_thermal_state(&h, -1.0).is_err());
        assert!(make_thermal_state(&h, f64::NAN).is_err());
    }

    #[test]
    fn two_level_system() {
        let delta = 0.7;
        let h = Operator::diagonal(&[0.0, delta]);
        for beta in [0.3, 2.0, 40.0] {
            let s = make_thermal_state(&h, beta).unwrap();
            assert!((s.partition() - (1.0 + (-beta * delta).exp())).abs() < 1e-14);
            let e = thermal_average(&s, &h).unwrap();
            assert!((e.re - delta / (1.0 + (beta * delta).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_mori_product_is_average() {
        let h = random_hermitian(12, 3);
        let b = random_hermitian(12, 4);
        let s = make_thermal_state(&h, 0.8).unwrap();
        let id = Operator::identity(12);
        let m = mori_product(&s, &id, &b).unwrap();
        let avg = thermal_average(&s, &b).unwrap();
        assert!((m - avg).norm() < 1e-13);
        assert!(mori_covariance(&s, &id, &b).unwrap().norm() < 1e-13);
        assert!(mori_covariance(&s, &b, &id).unwrap().norm() < 1e-13);
    }

    #[test]
    fn commuting_case_reduces_to_product_average() {
        let h = random_hermitian(10, 9);
        let s = make_thermal_state(&h, 1.3).unwrap();
        let d = spectral_decompose(&h).unwrap();
        let a = d.real_function(|e| e * e - 0.3 * e);
        let b = random_hermitian(10, 10);
        let m = mori_product(&s, &a, &b).unwrap();
        let direct = thermal_average(&s, &(&a.adjoint() * &b)).unwrap();
        assert!((m - direct).norm() < 1e-12 * direct.norm().max(1.0));
    }

    #[test]
    fn oscillator_partition_and_energy() {
        let spec = BasisSpec::oscillator(80, 1.0);
        let sys = build_many_body(&spec, 1, Statistics::Distinguishable, &no_pair, &|x| 0.5 * x * x).unwrap();
        for bw in [0.5, 1.0, 2.0, 4.0, 6.0] {
            let s = state_of_system(&sys, bw, None).unwrap();
            // geometric series truncated at n_max
            let z: f64 = (0..=80).map(|n| (-bw * (n as f64 + 0.5)).exp()).sum();
            assert!((s.partition() - z).abs() < 1e-10 * z);
            let e = thermal_average(&s, sys.hamiltonian()).unwrap().re;
            assert!((e - 0.5 / (0.5 * bw).tanh()).abs() < 1e-8);
        }
    }

    #[test]
    fn energy_variance_is_second_log_derivative() {
        let spec = BasisSpec::oscillator(80, 1.0);
        let sys = build_many_body(&spec, 1, Statistics::Distinguishable, &no_pair, &|x| 0.5 * x * x).unwrap();
        let h = sys.hamiltonian();
        let beta = 1.0;
        let s = make_thermal_state(h, beta).unwrap();
        let cov = mori_covariance(&s, h, h).unwrap().re;
        let step = 1e-3;
        let lnz = |b: f64| make_thermal_state(h, b).unwrap().log_partition();
        let second = (lnz(beta + step) - 2.0 * lnz(beta) + lnz(beta - step)) / (step * step);
        assert!((cov - second).abs() < 1e-6);
    }

    #[test]
    fn grand_state_vacuum_limit_and_logistic_mean() {
        let vac = Operator::zeros(1);
        let one = Operator::diagonal(&[0.2, 0.9]);
        let s = make_grand_state(&[(0, &vac), (1, &one)], 1.5, -60.0, false).unwrap();
        let n = Operator::diagonal(&[0.0, 1.0, 1.0]);
        assert!(thermal_average(&s, &n).unwrap().re < 1e-30);
        // two sectors with identical spectra: logistic weight
        let a = Operator::diagonal(&[0.4, 1.1]);
        let (beta, mu) = (0.9, 0.35);
        let s = make_grand_state(&[(0, &a), (1, &a)], beta, mu, false).unwrap();
        let n = Operator::diagonal(&[0.0, 0.0, 1.0, 1.0]);
        let expected = 1.0 / (1.0 + (-beta * mu).exp());
        assert!((thermal_average(&s, &n).unwrap().re - expected).abs() < 1e-14);
        assert!(make_grand_state(&[(1, &one)], 1.0, 0.0, false).is_err());
    }

    #[test]
    fn single_sector_grand_equals_canonical() {
        let h = random_hermitian(8, 2);
        let a = random_hermitian(8, 5);
        let g = make_grand_state(&[(0, &h)], 0.7, 0.4, false).unwrap();
        let s = make_thermal_state(&h, 0.7).unwrap();
        assert!((thermal_average(&g, &a).unwrap() - thermal_average(&s, &a).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn grand_state_of_fock_system() {
        let spec = BasisSpec::grid(8, 6.0, Boundary::Periodic, MomentumScheme::Spectral);
        let sys = crate::system::build_fock(&spec, 2, Statistics::Boson, &no_pair, &|x| 0.3 * x * x).unwrap();
        let s = state_of_system(&sys, 1.0, Some(0.5)).unwrap();
        // noninteracting bosons: ln Z from single-particle levels, truncated at N=2
        let one = spectral_decompose(&Operator::from_parts(
            sys.hamiltonian().entries().view((1, 1), (8, 8)).into_owned(),
            true,
        ))
        .unwrap();
        let z1: f64 = one.eigenvalues().iter().map(|e| (-(e - 0.5)).exp()).sum();
        let mut z2 = 0.0;
        let e = one.eigenvalues();
        for i in 0..8 {
            for j in i..8 {
                z2 += (-(e[i] + e[j] - 1.0)).exp();
            }
        }
        assert!((s.partition() - (1.0 + z1 + z2)).abs() < 1e-11 * s.partition());
        assert!(state_of_system(&sys, 1.0, None).is_err());
    }

    #[test]
    fn boltzmann_identity_is_exact() {
        let spec = BasisSpec::oscillator(40, 1.0);
        let sys = build_many_body(&spec, 1, Statistics::Distinguishable, &no_pair, &|x| 0.5 * x * x).unwrap();
        let s = state_of_system(&sys, 1.0, None).unwrap();
        for &r in sys.eval_points().iter().step_by(8) {
            assert!(check_boltzmann_identity(&s, &sys, r).unwrap() < 1e-10);
        }
    }

    #[test]
    fn kernel_is_continuous_across_gap_switch() {
        let beta = 2.0;
        let tol = 1e-8;
        let below = mori_weight(beta, 1.0 + 0.4995 * tol, 1.0 - 0.4995 * tol, tol);
        let above = mori_weight(beta, 1.0 + 0.5005 * tol, 1.0 - 0.5005 * tol, tol);
        assert!((below - above).abs() < 1e-14 * below);
        let near = mori_weight(beta, 1.5, 1.5 - 0.9 / beta * 2.0, tol);
        let far = mori_weight(beta, 1.5, 1.5 - 1.1 / beta * 2.0, tol);
        assert!(near.is_finite() && far.is_finite());
        assert_eq!(mori_weight(beta, 0.3, 1.7, tol), mori_weight(beta, 1.7, 0.3, tol));
    }
}
