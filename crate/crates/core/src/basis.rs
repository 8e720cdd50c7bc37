//! Single-particle representations: a uniform position grid or a truncated
//! harmonic-oscillator number basis.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c, spectral_decompose, CMatrix, Operator, SpectralDecomposition, I};

pub type CVector = DVector<Complex64>;

/// Number of evaluation points used for oscillator-basis profiles.
pub const OSCILLATOR_EVAL_POINTS: usize = 161;
/// Half width of the oscillator evaluation window in units of the oscillator length.
pub const OSCILLATOR_EVAL_SPAN: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    HardWall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumScheme {
    Spectral,
    CentralDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BasisKind {
    Grid {
        points: usize,
        length: f64,
        boundary: Boundary,
        momentum: MomentumScheme,
    },
    Oscillator {
        n_max: usize,
        omega: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub hbar: f64,
    pub mass: f64,
}

impl BasisSpec {
    pub fn grid(points: usize, length: f64, boundary: Boundary, momentum: MomentumScheme) -> Self {
        Self {
            kind: BasisKind::Grid {
                points,
                length,
                boundary,
                momentum,
            },
            hbar: 1.0,
            mass: 1.0,
        }
    }

    pub fn oscillator(n_max: usize, omega: f64) -> Self {
        Self {
            kind: BasisKind::Oscillator { n_max, omega },
            hbar: 1.0,
            mass: 1.0,
        }
    }

    pub fn with_constants(mut self, hbar: f64, mass: f64) -> Self {
        self.hbar = hbar;
        self.mass = mass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) || !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidBasis(format!(
                "hbar and mass must be positive (hbar={}, m={})",
                self.hbar, self.mass
            )));
        }
        match self.kind {
            BasisKind::Grid {
                points,
                length,
                boundary,
                momentum,
            } => {
                if points < 8 {
                    return Err(Error::InvalidBasis(format!("grid needs at least 8 points, got {points}")));
                }
                if !(length > 0.0 && length.is_finite()) {
                    return Err(Error::InvalidBasis(format!("grid length must be positive, got {length}")));
                }
                if boundary == Boundary::HardWall && momentum == MomentumScheme::Spectral {
                    return Err(Error::InvalidBasis(
                        "spectral momentum requires a periodic grid".into(),
                    ));
                }
            }
            BasisKind::Oscillator { n_max, omega } => {
                if n_max < 8 {
                    return Err(Error::InvalidBasis(format!("oscillator n_max must be >= 8, got {n_max}")));
                }
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(Error::InvalidBasis(format!("oscillator frequency must be positive, got {omega}")));
                }
            }
        }
        Ok(())
    }

    /// Number of single-particle basis states.
    pub fn size(&self) -> usize {
        match self.kind {
            BasisKind::Grid { points, .. } => points,
            BasisKind::Oscillator { n_max, .. } => n_max + 1,
        }
    }

    /// The same representation at twice the resolution (grid points or `n_max`).
    pub fn doubled(&self) -> Self {
        let mut out = *self;
        match &mut out.kind {
            BasisKind::Grid { points, .. } => *points *= 2,
            BasisKind::Oscillator { n_max, .. } => *n_max *= 2,
        }
        out
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, BasisKind::Grid { .. })
    }

    /// `sqrt(hbar / (m omega))` for the oscillator basis.
    pub fn oscillator_length(&self) -> Option<f64> {
        match self.kind {
            BasisKind::Oscillator { omega, .. } => Some((self.hbar / (self.mass * omega)).sqrt()),
            BasisKind::Grid { .. } => None,
        }
    }
}

/// Normalized Hermite functions `phi_0..=phi_n_max` at position `x`.
pub fn hermite_functions(n_max: usize, x: f64, mass: f64, omega: f64, hbar: f64) -> Vec<f64> {
    let xi = x * (mass * omega / hbar).sqrt();
    let mut phi = Vec::with_capacity(n_max + 1);
    phi.push((mass * omega / (PI * hbar)).powf(0.25) * (-0.5 * xi * xi).exp());
    if n_max >= 1 {
        phi.push(2.0_f64.sqrt() * xi * phi[0]);
    }
    for n in 1..n_max {
        let nf = n as f64;
        let next = xi * (2.0 / (nf + 1.0)).sqrt() * phi[n] - (nf / (nf + 1.0)).sqrt() * phi[n - 1];
        phi.push(next);
    }
    phi
}

fn ladder_operators(dim: usize, hbar: f64, mass: f64, omega: f64) -> (CMatrix, CMatrix) {
    let xs = (hbar / (2.0 * mass * omega)).sqrt();
    let ps = (hbar * mass * omega / 2.0).sqrt();
    let mut x = CMatrix::zeros(dim, dim);
    let mut p = CMatrix::zeros(dim, dim);
    for n in 0..dim.saturating_sub(1) {
        let s = ((n + 1) as f64).sqrt();
        x[(n, n + 1)] = c(xs * s);
        x[(n + 1, n)] = c(xs * s);
        // p = i ps (a† - a): a†_{n+1,n} = s, a_{n,n+1} = s
        p[(n + 1, n)] = I * ps * s;
        p[(n, n + 1)] = -I * ps * s;
    }
    (x, p)
}

/// Position, momentum and kinetic operators of one particle plus the
/// evaluation set used for position-resolved quantities.
#[derive(Clone, Debug)]
pub struct SingleParticleBasis {
    spec: BasisSpec,
    position: Operator,
    momentum: Operator,
    kinetic: Operator,
    position_spectrum: SpectralDecomposition,
    eval_points: Vec<f64>,
    eval_spacing: f64,
}

pub fn build_single_particle(spec: &BasisSpec) -> Result<SingleParticleBasis> {
    spec.validate()?;
    let hbar = spec.hbar;
    let mass = spec.mass;
    match spec.kind {
        BasisKind::Grid {
            points: m,
            length,
            boundary,
            momentum,
        } => {
            let h = length / m as f64;
            let xs: Vec<f64> = (0..m).map(|k| -0.5 * length + k as f64 * h).collect();
            let position = Operator::diagonal(&xs);
            let (p, t) = match momentum {
                MomentumScheme::Spectral => spectral_momentum(m, length, hbar, mass),
                MomentumScheme::CentralDifference => {
                    central_difference_momentum(m, h, boundary, hbar, mass)
                }
            };
            let position_spectrum = spectral_decompose(&position)?;
            Ok(SingleParticleBasis {
                spec: *spec,
                position,
                momentum: Operator::from_parts(p, true),
                kinetic: Operator::from_parts(t, true),
                position_spectrum,
                eval_points: xs,
                eval_spacing: h,
            })
        }
        BasisKind::Oscillator { n_max, omega } => {
            let dim = n_max + 1;
            let (x, p) = ladder_operators(dim, hbar, mass, omega);
            // p^2 built in a larger space so that the truncated block is exact
            let big = 2 * dim;
            let (_, p_big) = ladder_operators(big, hbar, mass, omega);
            let p2 = (&p_big * &p_big).view((0, 0), (dim, dim)).into_owned();
            let kinetic = Operator::from_parts(p2 * c(0.5 / mass), true).hermitian_part();
            let position = Operator::from_parts(x, true);
            let position_spectrum = spectral_decompose(&position)?;
            let ell = spec.oscillator_length().expect("oscillator basis");
            let n = OSCILLATOR_EVAL_POINTS;
            let eval_points: Vec<f64> = (0..n)
                .map(|k| ell * (-OSCILLATOR_EVAL_SPAN + 2.0 * OSCILLATOR_EVAL_SPAN * k as f64 / (n - 1) as f64))
                .collect();
            let eval_spacing = ell * 2.0 * OSCILLATOR_EVAL_SPAN / (n - 1) as f64;
            Ok(SingleParticleBasis {
                spec: *spec,
                position,
                momentum: Operator::from_parts(p, true),
                kinetic,
                position_spectrum,
                eval_points,
                eval_spacing,
            })
        }
    }
}

fn principal_wavenumbers(m: usize, length: f64) -> Vec<f64> {
    let lo = -(m as i64 / 2);
    (0..m as i64)
        .map(|j| 2.0 * PI * (lo + j) as f64 / length)
        .collect()
}

fn spectral_momentum(m: usize, length: f64, hbar: f64, mass: f64) -> (CMatrix, CMatrix) {
    let ks = principal_wavenumbers(m, length);
    let mut p = CMatrix::zeros(m, m);
    let mut t = CMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let d = a as f64 - b as f64;
            let mut sp = c(0.0);
            let mut st = c(0.0);
            for &k in &ks {
                let phase = Complex64::from_polar(1.0, k * length * d / m as f64);
                sp += phase * (hbar * k);
                st += phase * (hbar * hbar * k * k / (2.0 * mass));
            }
            p[(a, b)] = sp / m as f64;
            t[(a, b)] = st / m as f64;
        }
    }
    let herm = |x: CMatrix| (&x + x.adjoint()) * c(0.5);
    (herm(p), herm(t))
}

fn central_difference_momentum(
    m: usize,
    h: f64,
    boundary: Boundary,
    hbar: f64,
    mass: f64,
) -> (CMatrix, CMatrix) {
    let mut p = CMatrix::zeros(m, m);
    let mut t = CMatrix::zeros(m, m);
    let hop = hbar / (2.0 * h);
    let kin = hbar * hbar / (2.0 * mass * h * h);
    for a in 0..m {
        t[(a, a)] = c(2.0 * kin);
        let right = if a + 1 < m {
            Some(a + 1)
        } else if boundary == Boundary::Periodic {
            Some(0)
        } else {
            None
        };
        if let Some(b) = right {
            // p = -i hbar d/dx, (f_{a+1} - f_{a-1}) / 2h
            p[(a, b)] += -I * hop;
            p[(b, a)] += I * hop;
            t[(a, b)] += c(-kin);
            t[(b, a)] += c(-kin);
        }
    }
    (p, t)
}

/// Rank-two factorisation of a one-body current density, `½(w v† + v w†)`,
/// where `v v†` is the density factor and `w = p v`.
#[derive(Clone, Debug)]
pub struct CurrentFactors {
    pub density: CVector,
    pub momentum_density: CVector,
}

impl CurrentFactors {
    pub fn to_matrix(&self) -> CMatrix {
        let v = &self.density;
        let w = &self.momentum_density;
        (w * v.adjoint() + v * w.adjoint()) * c(0.5)
    }
}

impl SingleParticleBasis {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }

    pub fn hbar(&self) -> f64 {
        self.spec.hbar
    }

    pub fn mass(&self) -> f64 {
        self.spec.mass
    }

    pub fn position(&self) -> &Operator {
        &self.position
    }

    pub fn momentum(&self) -> &Operator {
        &self.momentum
    }

    pub fn kinetic(&self) -> &Operator {
        &self.kinetic
    }

    pub fn position_spectrum(&self) -> &SpectralDecomposition {
        &self.position_spectrum
    }

    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    /// Riemann weight of the evaluation set (grid spacing or profile spacing).
    pub fn eval_spacing(&self) -> f64 {
        self.eval_spacing
    }

    pub fn eval_index(&self, r: f64) -> Result<usize> {
        let first = self.eval_points[0];
        let k = ((r - first) / self.eval_spacing).round();
        if k < 0.0 || k as usize >= self.eval_points.len() {
            return Err(Error::OutsideEvaluationSet { r });
        }
        let k = k as usize;
        if (self.eval_points[k] - r).abs() > 1e-9 * self.eval_spacing.max(r.abs()).max(1e-300) {
            return Err(Error::OutsideEvaluationSet { r });
        }
        Ok(k)
    }

    /// `f(x̂)`: diagonal on a grid, through the spectrum of `x̂` otherwise.
    pub fn function_of_position(&self, f: impl Fn(f64) -> f64) -> Operator {
        match self.spec.kind {
            BasisKind::Grid { .. } => {
                let vals: Vec<f64> = self.eval_points.iter().map(|&x| f(x)).collect();
                Operator::diagonal(&vals)
            }
            BasisKind::Oscillator { .. } => self.position_spectrum.real_function(f).hermitian_part(),
        }
    }

    /// One-body potential operator. In the oscillator basis the potential is
    /// evaluated in a doubled number basis and truncated, which is exact for
    /// polynomial potentials up to degree `2 n_max + 3`.
    pub fn potential(&self, v: impl Fn(f64) -> f64) -> Result<Operator> {
        match self.spec.kind {
            BasisKind::Grid { .. } => Ok(self.function_of_position(v)),
            BasisKind::Oscillator { n_max, omega } => {
                let dim = n_max + 1;
                let (x_big, _) = ladder_operators(2 * dim, self.spec.hbar, self.spec.mass, omega);
                let d = spectral_decompose(&Operator::from_parts(x_big, true))?;
                let full = d.real_function(v);
                let block = full.entries().view((0, 0), (dim, dim)).into_owned();
                Ok(Operator::from_parts(block, true).hermitian_part())
            }
        }
    }

    /// Vector `v` with `rho(r) = v v†`.
    pub fn density_vector(&self, r: f64) -> Result<CVector> {
        match self.spec.kind {
            BasisKind::Grid { .. } => {
                let k = self.eval_index(r)?;
                let mut v = CVector::zeros(self.dim());
                v[k] = c(1.0 / self.eval_spacing.sqrt());
                Ok(v)
            }
            BasisKind::Oscillator { n_max, omega } => {
                if !r.is_finite() {
                    return Err(Error::OutsideEvaluationSet { r });
                }
                let phi = hermite_functions(n_max, r, self.spec.mass, omega, self.spec.hbar);
                Ok(CVector::from_iterator(phi.len(), phi.into_iter().map(c)))
            }
        }
    }

    pub fn density(&self, r: f64) -> Result<Operator> {
        let v = self.density_vector(r)?;
        Ok(Operator::from_parts(&v * v.adjoint(), true))
    }

    pub fn current_factors(&self, r: f64) -> Result<CurrentFactors> {
        let v = self.density_vector(r)?;
        let w = self.momentum.entries() * &v;
        Ok(CurrentFactors {
            density: v,
            momentum_density: w,
        })
    }

    /// Scaled current `m J(r) = ½ (p rho(r) + rho(r) p)`.
    pub fn current(&self, r: f64) -> Result<Operator> {
        Ok(Operator::from_parts(self.current_factors(r)?.to_matrix(), true))
    }

    /// Neighbouring grid indices `(left, right)` of evaluation point `k`,
    /// honouring the boundary condition.
    pub fn grid_neighbors(&self, k: usize) -> Result<(Option<usize>, Option<usize>)> {
        match self.spec.kind {
            BasisKind::Grid {
                points, boundary, ..
            } => {
                let periodic = boundary == Boundary::Periodic;
                let left = if k > 0 {
                    Some(k - 1)
                } else if periodic {
                    Some(points - 1)
                } else {
                    None
                };
                let right = if k + 1 < points {
                    Some(k + 1)
                } else if periodic {
                    Some(0)
                } else {
                    None
                };
                Ok((left, right))
            }
            BasisKind::Oscillator { .. } => Err(Error::Unsupported(
                "grid neighbours requested in the oscillator basis".into(),
            )),
        }
    }
}
