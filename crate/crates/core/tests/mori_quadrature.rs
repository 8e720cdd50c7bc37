use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DMatrix;
use num_complex::Complex64;
use qgauge::{make_thermal_state, mori_product, random_hermitian, random_matrix, CMatrix, Operator};

/// Hamiltonian `Q diag(e) Q†` with a seeded random unitary `Q`.
fn with_spectrum(e: &[f64], seed: u64) -> Operator {
    let n = e.len();
    let q = random_matrix(n, seed).into_entries().qr().q();
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, e.iter().map(|&x| Complex64::new(x, 0.0))));
    Operator::new(&q * d * q.adjoint()).unwrap().hermitian_part()
}

/// `(A|B) = (1/(beta Z)) int_0^beta Tr[e^{-(beta - tau) H} A† e^{-tau H} B] dtau`
/// by 64-node Gauss-Legendre quadrature on a direct eigendecomposition.
fn quadrature_mori(h: &Operator, beta: f64, a: &Operator, b: &Operator) -> Complex64 {
    let eig = h.entries().clone().symmetric_eigen();
    let e0 = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let v = eig.eigenvectors;
    let z: f64 = eig.eigenvalues.iter().map(|e| (-beta * (e - e0)).exp()).sum();
    let boltz = |s: f64| -> CMatrix {
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::new((-s * (e - e0)).exp(), 0.0)));
        &v * d * v.adjoint()
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(64).unwrap());
    let mut acc = Complex64::new(0.0, 0.0);
    for &(node, weight) in rule.as_node_weight_pairs() {
        let tau = 0.5 * beta * (node + 1.0);
        let m = boltz(beta - tau) * a.entries().adjoint() * boltz(tau) * b.entries();
        acc += m.trace() * (0.5 * beta * weight);
    }
    acc / (beta * z)
}

fn spectra() -> Vec<Vec<f64>> {
    let mut out = vec![
        vec![-1.0, -1.0 + 1e-12, 0.2, 0.2 + 1e-9, 1.0],
        vec![-0.5, -0.5 + 1e-8, -0.5 + 2e-8, 0.7, 0.7 + 1e-7, 1.0],
        vec![-1.0, -0.999_99, 0.0, 1e-6, 0.99, 1.0],
        vec![0.3, 0.3, 0.3, -0.9, 0.9],
        vec![-1.0, -0.6, -0.2, 0.2, 0.6, 1.0, 1.0 - 5e-9, 1.0 - 5e-5],
    ];
    out.push((0..10).map(|k| -1.0 + 2.0 * (k / 2) as f64 / 4.0 + 1e-10 * (k % 2) as f64).collect());
    out
}

#[test]
fn closed_form_matches_quadrature() {
    let engineered = spectra();
    let mut checked = 0;
    let mut worst = 0.0_f64;
    for pair in 0..50u64 {
        let h = if (pair as usize) < 2 * engineered.len() {
            with_spectrum(&engineered[pair as usize % engineered.len()], 1000 + pair)
        } else {
            let dim = 3 + (pair as usize % 9);
            let raw = random_hermitian(dim, 2000 + pair);
            let radius = raw.entries().clone().symmetric_eigen().eigenvalues.amax();
            raw.scale_real(1.0 / radius)
        };
        let dim = h.dim();
        let a = random_hermitian(dim, 3000 + pair);
        let b = random_hermitian(dim, 4000 + pair);
        for beta in [0.1, 1.0, 10.0] {
            let st = make_thermal_state(&h, beta).unwrap();
            let closed = mori_product(&st, &a, &b).unwrap();
            let oracle = quadrature_mori(&h, beta, &a, &b);
            let aa = mori_product(&st, &a, &a).unwrap().re;
            let bb = mori_product(&st, &b, &b).unwrap().re;
            let scale = oracle.norm().max((aa * bb).sqrt());
            let rel = (closed - oracle).norm() / scale;
            worst = worst.max(rel);
            assert!(rel <= 1e-9, "pair {pair} beta {beta}: {closed} vs {oracle} (rel {rel:.3e})");
            checked += 1;
        }
    }
    assert_eq!(checked, 150);
    assert!(worst < 1e-9);
}

#[test]
fn exactly_degenerate_levels_match_quadrature() {
    let h = with_spectrum(&[0.0, 0.0, 0.0, 0.0], 9);
    let a = random_hermitian(4, 10);
    let b = random_hermitian(4, 11);
    let st = make_thermal_state(&h, 3.0).unwrap();
    let closed = mori_product(&st, &a, &b).unwrap();
    let oracle = quadrature_mori(&h, 3.0, &a, &b);
    assert!((closed - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
}

#[test]
fn positivity_and_conjugate_symmetry() {
    for seed in 0..100u64 {
        let dim = 2 + (seed as usize * 7) % 63;
        let h = random_hermitian(dim, 50_000 + seed);
        let st = make_thermal_state(&h, 0.5 + (seed % 5) as f64).unwrap();
        let a = Operator::new(random_matrix(dim, 60_000 + seed).into_entries()).unwrap();
        let b = Operator::new(random_matrix(dim, 70_000 + seed).into_entries()).unwrap();
        let (aa, scale) = st.mori_with_scale(&a, &a).unwrap();
        assert!(aa.re >= -1e-12 * scale, "seed {seed}: (A|A) = {aa}");
        assert!(aa.im.abs() <= 1e-12 * scale);
        let ab = mori_product(&st, &a, &b).unwrap();
        let ba = mori_product(&st, &b, &a).unwrap();
        assert!((ab - ba.conj()).norm() <= 1e-12 * ab.norm().max(1.0));
    }
}
