//! One- and two-particle systems assembled from a single-particle basis.
//!
//! A system is a direct sum of particle-number blocks. Canonical systems have
//! a single block; [`build_fock`] stacks the blocks `N = 0..=n_max` for the
//! grand ensemble. Every one-body operator is lifted blockwise, so the
//! superoperator machinery treats both cases identically.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_single_particle, BasisSpec, CurrentFactors, SingleParticleBasis};
use crate::error::{Error, Result};
use crate::operator::{c, max_abs, random_matrix, CMatrix, Operator};

/// Largest two-particle tensor space accepted by the builder.
pub const MAX_PAIR_TENSOR_DIM: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Distinguishable,
    Boson,
    Fermion,
}

/// `u0 exp(-(x1 - x2)^2 / (2 w^2))`.
pub fn gaussian_pair_potential(strength: f64, width: f64) -> impl Fn(f64, f64) -> f64 + Sync {
    move |a, b| strength * (-(a - b) * (a - b) / (2.0 * width * width)).exp()
}

/// Location of one particle-number block inside the full space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sector {
    pub particles: usize,
    pub offset: usize,
    pub dim: usize,
}

/// Two-particle basis state as a combination of at most two product states
/// `a * M + b`.
#[derive(Clone, Debug)]
struct PairState {
    parts: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
struct Block {
    sector: Sector,
    pairs: Option<Vec<PairState>>,
}

fn pair_states(m: usize, statistics: Statistics) -> Vec<PairState> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::new();
    match statistics {
        Statistics::Distinguishable => {
            for t in 0..m * m {
                out.push(PairState { parts: vec![(t, 1.0)] });
            }
        }
        Statistics::Boson => {
            for a in 0..m {
                out.push(PairState {
                    parts: vec![(a * m + a, 1.0)],
                });
                for b in a + 1..m {
                    out.push(PairState {
                        parts: vec![(a * m + b, s), (b * m + a, s)],
                    });
                }
            }
        }
        Statistics::Fermion => {
            for a in 0..m {
                for b in a + 1..m {
                    out.push(PairState {
                        parts: vec![(a * m + b, s), (b * m + a, -s)],
                    });
                }
            }
        }
    }
    out
}

/// `W† (o ⊗ 1 + 1 ⊗ o) W` with `W` the (anti)symmetrizing isometry.
fn lift_pair(o: &CMatrix, pairs: &[PairState]) -> CMatrix {
    let m = o.nrows();
    let dim = pairs.len();
    let mut out = CMatrix::zeros(dim, dim);
    let mut column = vec![Complex64::new(0.0, 0.0); m * m];
    for (j, pj) in pairs.iter().enumerate() {
        column.iter_mut().for_each(|z| *z = c(0.0));
        for &(t, w) in &pj.parts {
            let (cc, d) = (t / m, t % m);
            for a in 0..m {
                column[a * m + d] += o[(a, cc)] * w;
                column[cc * m + a] += o[(a, d)] * w;
            }
        }
        for (i, pi) in pairs.iter().enumerate() {
            let mut acc = c(0.0);
            for &(t, w) in &pi.parts {
                acc += column[t] * w;
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn pair_potential_matrix(
    single: &SingleParticleBasis,
    pairs: &[PairState],
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> CMatrix {
    let m = single.dim();
    let dim = pairs.len();
    if single.spec().is_grid() {
        let xs = single.eval_points();
        let mut out = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = 0.0;
                for &(ti, wi) in &pairs[i].parts {
                    for &(tj, wj) in &pairs[j].parts {
                        if ti == tj {
                            acc += wi * wj * u(xs[ti / m], xs[ti % m]);
                        }
                    }
                }
                out[(i, j)] = c(acc);
            }
        }
        return out;
    }
    // position eigenbasis of the truncated x̂: u is diagonal on the product of nodes
    let spectrum = single.position_spectrum();
    let nodes = spectrum.eigenvalues();
    let v = spectrum.unitary();
    let mut q = CMatrix::zeros(m * m, dim);
    for (j, pj) in pairs.iter().enumerate() {
        for s1 in 0..m {
            for s2 in 0..m {
                let mut acc = c(0.0);
                for &(t, w) in &pj.parts {
                    acc += (v[(t / m, s1)] * v[(t % m, s2)]).conj() * w;
                }
                q[(s1 * m + s2, j)] = acc;
            }
        }
    }
    let mut dq = q.clone();
    for s1 in 0..m {
        for s2 in 0..m {
            let val = u(nodes[s1], nodes[s2]);
            dq.row_mut(s1 * m + s2).scale_mut(val);
        }
    }
    q.adjoint() * dq
}

fn block_diagonal(blocks: &[CMatrix], dim: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dim, dim);
    let mut offset = 0;
    for b in blocks {
        let n = b.nrows();
        out.view_mut((offset, offset), (n, n)).copy_from(b);
        offset += n;
    }
    out
}

/// A finite many-body system: Hamiltonian parts, particle-number blocks and
/// the position-resolved density and current operators.
#[derive(Clone, Debug)]
pub struct ManyBodySystem {
    single: SingleParticleBasis,
    statistics: Statistics,
    blocks: Vec<Block>,
    dim: usize,
    kinetic: Operator,
    interparticle: Operator,
    external: Operator,
    hamiltonian: Operator,
    one_body_potential: Operator,
    position_sum: Operator,
    momentum_sum: Operator,
    number: Operator,
    corrupted: bool,
    density_cache: Vec<OnceLock<Operator>>,
    current_cache: Vec<OnceLock<Operator>>,
}

/// Canonical system of `n` particles (`n` is 1 or 2).
pub fn build_many_body(
    spec: &BasisSpec,
    n: usize,
    statistics: Statistics,
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    v_ext: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<ManyBodySystem> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "particle number must be 1 or 2, got {n}"
        )));
    }
    assemble(spec, &[n], statistics, u, v_ext)
}

/// Direct sum of the particle-number blocks `0..=n_max` for the grand ensemble.
pub fn build_fock(
    spec: &BasisSpec,
    n_max: usize,
    statistics: Statistics,
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    v_ext: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<ManyBodySystem> {
    if !(1..=2).contains(&n_max) {
        return Err(Error::InvalidArgument(format!(
            "maximal particle number must be 1 or 2, got {n_max}"
        )));
    }
    let ns: Vec<usize> = (0..=n_max).collect();
    assemble(spec, &ns, statistics, u, v_ext)
}

fn assemble(
    spec: &BasisSpec,
    particle_numbers: &[usize],
    statistics: Statistics,
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    v_ext: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<ManyBodySystem> {
    let single = build_single_particle(spec)?;
    let m = single.dim();
    let mut blocks = Vec::new();
    let mut offset = 0;
    for &n in particle_numbers {
        let (dim, pairs) = match n {
            0 => (1, None),
            1 => (m, None),
            2 => {
                if m * m > MAX_PAIR_TENSOR_DIM {
                    return Err(Error::InvalidArgument(format!(
                        "two-particle tensor space {}x{} exceeds the limit {MAX_PAIR_TENSOR_DIM}",
                        m, m
                    )));
                }
                let pairs = pair_states(m, statistics);
                (pairs.len(), Some(pairs))
            }
            _ => unreachable!("particle numbers are validated by the callers"),
        };
        blocks.push(Block {
            sector: Sector {
                particles: n,
                offset,
                dim,
            },
            pairs,
        });
        offset += dim;
    }
    let dim = offset;
    let one_body_potential = single.potential(v_ext)?;

    let mut sys = ManyBodySystem {
        statistics,
        blocks,
        dim,
        kinetic: Operator::zeros(dim),
        interparticle: Operator::zeros(dim),
        external: Operator::zeros(dim),
        hamiltonian: Operator::zeros(dim),
        one_body_potential,
        position_sum: Operator::zeros(dim),
        momentum_sum: Operator::zeros(dim),
        number: Operator::zeros(dim),
        corrupted: false,
        density_cache: (0..single.eval_points().len()).map(|_| OnceLock::new()).collect(),
        current_cache: (0..single.eval_points().len()).map(|_| OnceLock::new()).collect(),
        single,
    };
    sys.kinetic = sys.lift_one_body(sys.single.kinetic())?.hermitian_part();
    sys.external = sys.lift_one_body(&sys.one_body_potential)?.hermitian_part();
    sys.position_sum = sys.lift_one_body(sys.single.position())?;
    sys.momentum_sum = sys.lift_one_body(sys.single.momentum())?;
    let numbers: Vec<f64> = sys
        .blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.sector.particles as f64, b.sector.dim))
        .collect();
    sys.number = Operator::diagonal(&numbers);

    let pair_blocks: Vec<CMatrix> = sys
        .blocks
        .iter()
        .map(|b| match &b.pairs {
            Some(pairs) => pair_potential_matrix(&sys.single, pairs, u),
            None => CMatrix::zeros(b.sector.dim, b.sector.dim),
        })
        .collect();
    sys.interparticle = Operator::from_parts(block_diagonal(&pair_blocks, dim), true).hermitian_part();
    sys.hamiltonian = &(&sys.kinetic + &sys.interparticle) + &sys.external;
    for op in [&sys.kinetic, &sys.interparticle, &sys.external, &sys.hamiltonian] {
        op.check_hermitian(1e-10)?;
    }
    Ok(sys)
}

impl ManyBodySystem {
    pub fn single_particle(&self) -> &SingleParticleBasis {
        &self.single
    }

    pub fn spec(&self) -> &BasisSpec {
        self.single.spec()
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.single.hbar()
    }

    pub fn mass(&self) -> f64 {
        self.single.mass()
    }

    pub fn sectors(&self) -> Vec<Sector> {
        self.blocks.iter().map(|b| b.sector).collect()
    }

    /// Particle number of a canonical system, `None` for a Fock system.
    pub fn particles(&self) -> Option<usize> {
        match self.blocks.as_slice() {
            [b] => Some(b.sector.particles),
            _ => None,
        }
    }

    pub fn is_grand(&self) -> bool {
        self.blocks.len() > 1
    }

    pub fn kinetic(&self) -> &Operator {
        &self.kinetic
    }

    pub fn interparticle(&self) -> &Operator {
        &self.interparticle
    }

    pub fn external(&self) -> &Operator {
        &self.external
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    /// Hermitian part of the Hamiltonian, the generator of the thermal state.
    /// Identical to [`Self::hamiltonian`] unless a fault has been injected.
    pub fn equilibrium_hamiltonian(&self) -> Operator {
        if self.corrupted {
            self.hamiltonian.hermitian_part()
        } else {
            self.hamiltonian.clone()
        }
    }

    pub fn is_corrupted(&self) -> bool {
        self.corrupted
    }

    /// Single-particle external potential matrix.
    pub fn one_body_potential(&self) -> &Operator {
        &self.one_body_potential
    }

    /// `sum_i x̂_i`.
    pub fn position_sum(&self) -> &Operator {
        &self.position_sum
    }

    /// `sum_i p̂_i`.
    pub fn momentum_sum(&self) -> &Operator {
        &self.momentum_sum
    }

    pub fn number_operator(&self) -> &Operator {
        &self.number
    }

    pub fn eval_points(&self) -> &[f64] {
        self.single.eval_points()
    }

    pub fn eval_spacing(&self) -> f64 {
        self.single.eval_spacing()
    }

    pub fn eval_index(&self, r: f64) -> Result<usize> {
        self.single.eval_index(r)
    }

    /// `sum_i o_i` for a single-particle operator `o`.
    pub fn lift_one_body(&self, o: &Operator) -> Result<Operator> {
        if o.dim() != self.single.dim() {
            return Err(Error::DimensionMismatch {
                context: "one-body lift",
                left: crate::error::shape(o.dim(), o.dim()),
                right: crate::error::shape(self.single.dim(), self.single.dim()),
            });
        }
        if let [b] = self.blocks.as_slice() {
            if b.sector.particles == 1 {
                return Ok(o.clone());
            }
        }
        let parts: Vec<CMatrix> = self
            .blocks
            .iter()
            .map(|b| match (b.sector.particles, &b.pairs) {
                (0, _) => CMatrix::zeros(1, 1),
                (1, _) => o.entries().clone(),
                (_, Some(pairs)) => lift_pair(o.entries(), pairs),
                _ => unreachable!("two-particle blocks carry their pair basis"),
            })
            .collect();
        Ok(Operator::from_parts(block_diagonal(&parts, self.dim), o.hermitian_hint()))
    }

    /// `sum_i f(x̂_i)`.
    pub fn lift_position_function(&self, f: impl Fn(f64) -> f64) -> Result<Operator> {
        self.lift_one_body(&self.single.function_of_position(f))
    }

    /// Density operator `rho(r) = sum_i delta(r - x̂_i)` at an evaluation point.
    pub fn density_operator(&self, r: f64) -> Result<Operator> {
        let k = self.eval_index(r)?;
        self.density_at(k)
    }

    pub fn density_at(&self, k: usize) -> Result<Operator> {
        if let Some(op) = self.density_cache.get(k).and_then(|c| c.get()) {
            return Ok(op.clone());
        }
        let r = *self
            .eval_points()
            .get(k)
            .ok_or(Error::InvalidArgument(format!("evaluation index {k} out of range")))?;
        let op = self.lift_one_body(&self.single.density(r)?)?.with_hint(true);
        Ok(self.density_cache[k].get_or_init(|| op).clone())
    }

    /// Scaled current `m J(r) = ½ sum_i (p̂_i delta(r - x̂_i) + delta(r - x̂_i) p̂_i)`.
    pub fn current_operator(&self, r: f64) -> Result<Operator> {
        let k = self.eval_index(r)?;
        self.current_at(k)
    }

    pub fn current_at(&self, k: usize) -> Result<Operator> {
        if let Some(op) = self.current_cache.get(k).and_then(|c| c.get()) {
            return Ok(op.clone());
        }
        let r = *self
            .eval_points()
            .get(k)
            .ok_or(Error::InvalidArgument(format!("evaluation index {k} out of range")))?;
        let op = self.lift_one_body(&self.single.current(r)?)?.with_hint(true);
        Ok(self.current_cache[k].get_or_init(|| op).clone())
    }

    /// Rank-two current factors, available for a single particle only.
    pub fn current_factors_at(&self, k: usize) -> Option<CurrentFactors> {
        if self.particles() != Some(1) {
            return None;
        }
        let r = *self.eval_points().get(k)?;
        self.single.current_factors(r).ok()
    }

    /// Generator `sum_i ½ (eps(x̂_i) p̂_i + p̂_i eps(x̂_i))` of an integrated shift.
    pub fn shift_generator(&self, eps: impl Fn(f64) -> f64) -> Result<Operator> {
        let e = self.single.function_of_position(eps);
        let p = self.single.momentum();
        let g = (&e * p).entries() + (p * &e).entries();
        self.lift_one_body(&Operator::from_parts(g * c(0.5), true))
    }

    /// Exchange projector `W W†` on the two-particle tensor space.
    pub fn exchange_projector(&self) -> Option<Operator> {
        let pairs = self.blocks.iter().find_map(|b| b.pairs.as_ref())?;
        let m = self.single.dim();
        let mut w = CMatrix::zeros(m * m, pairs.len());
        for (j, p) in pairs.iter().enumerate() {
            for &(t, v) in &p.parts {
                w[(t, j)] = c(v);
            }
        }
        Some(Operator::from_parts(&w * w.adjoint(), true))
    }

    /// Isometry `W` from the two-particle block to the tensor space.
    pub fn pair_isometry(&self) -> Option<CMatrix> {
        let pairs = self.blocks.iter().find_map(|b| b.pairs.as_ref())?;
        let m = self.single.dim();
        let mut w = CMatrix::zeros(m * m, pairs.len());
        for (j, p) in pairs.iter().enumerate() {
            for &(t, v) in &p.parts {
                w[(t, j)] = c(v);
            }
        }
        Some(w)
    }

    /// Copy with a seeded non-Hermitian perturbation of relative size
    /// `amplitude` added to the external part and the Hamiltonian.
    pub fn with_injected_asymmetry(&self, amplitude: f64, seed: u64) -> Result<ManyBodySystem> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "asymmetry amplitude must be non-negative, got {amplitude}"
            )));
        }
        let g = random_matrix(self.dim, seed);
        let anti = (g.entries() - g.entries().adjoint()) * c(0.5);
        let scale = amplitude * self.hamiltonian.max_abs().max(1.0) / max_abs(&anti).max(f64::MIN_POSITIVE);
        let delta = Operator::from_parts(anti * c(scale), false);
        let mut out = self.clone();
        out.external = Operator::from_parts(self.external.entries() + delta.entries(), false);
        out.hamiltonian = Operator::from_parts(self.hamiltonian.entries() + delta.entries(), false);
        out.corrupted = amplitude > 0.0;
        Ok(out)
    }
}
