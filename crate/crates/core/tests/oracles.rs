//! Checks against dense linear algebra and finite differences.

use accv::etd::{etd1_step, etdrk2_combine, nonlinear_terms};
use accv::model::{discrete_energy, energy_parts, fitting_term, force, forces, ModelParams};
use accv::spectral::{neumann_eigenvalues, SpectralPlan};
use accv::verify::dense_operator;
use accv::{ImageTensor, PhaseStack, RegionMeans};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array2, Array3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn stencil(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            -((i > 0) as u8 as f64) - ((i + 1 < m) as u8 as f64)
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    })
}

fn flatten(f: &Array2<f64>) -> DVector<f64> {
    DVector::from_iterator(f.len(), f.iter().copied())
}

fn random_field(rng: &mut StdRng, dim: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn(dim, |_| rng.random_range(lo..hi))
}

#[test]
fn three_point_stencil_spectrum() {
    let mut dense: Vec<f64> = SymmetricEigen::new(stencil(3))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let fast = neumann_eigenvalues(3);
    for (want, got) in [0.0, -1.0, -3.0].iter().zip(&fast) {
        assert!((want - got).abs() < 1e-14);
    }
    for (a, b) in dense.iter().zip(&fast) {
        assert!((a - b).abs() < 1e-12);
    }
    for m in [2, 5, 16] {
        let mut dense: Vec<f64> = SymmetricEigen::new(stencil(m))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        dense.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in dense.iter().zip(neumann_eigenvalues(m)) {
            assert!((a - b).abs() < 1e-12, "M = {m}");
        }
    }
}

#[test]
fn operator_matches_kronecker_assembly() {
    let (rows, cols, h, eps, s) = (4, 6, 0.3, 6.0, 120.0);
    let d = (stencil(rows).kronecker(&DMatrix::identity(cols, cols))
        + DMatrix::<f64>::identity(rows, rows).kronecker(&stencil(cols)))
        / (h * h);
    let want = d * (-2.0 * eps) + DMatrix::identity(rows * cols, rows * cols) * s;
    assert!((dense_operator(rows, cols, h, eps, s) - want).amax() < 1e-12);
}

#[test]
fn phi_matches_dense_eigendecomposition() {
    let mut rng = StdRng::seed_from_u64(3);
    for (rows, cols, h, eps, s, dt) in [
        (8, 8, 1.0, 4.0, 120.0, 0.3),
        (6, 9, 0.3, 6.0, 120.0, 0.3),
        (8, 8, 0.5, 8.0, 2.0, 0.01),
    ] {
        let plan = SpectralPlan::new(rows, cols, h, eps, s, dt).unwrap();
        let eig = SymmetricEigen::new(dense_operator(rows, cols, h, eps, s) * dt);
        let v = random_field(&mut rng, (rows, cols), -1.0, 1.0);
        let coeffs = eig.eigenvectors.transpose() * flatten(&v);
        for j in 0..3 {
            let phi = |a: f64| match j {
                0 => (-a).exp(),
                1 => -(-a).exp_m1() / a,
                _ => ((-a).exp_m1() + a) / (a * a),
            };
            let scaled = DVector::from_iterator(
                coeffs.len(),
                coeffs
                    .iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(c, &a)| c * phi(a)),
            );
            let dense = &eig.eigenvectors * scaled;
            let fast = plan.apply_phi(j, v.view()).unwrap();
            let err = (flatten(&fast) - dense).amax();
            assert!(err < 1e-10, "j = {j}, grid {rows}x{cols}: {err:e}");
        }
    }
}

#[test]
fn corrector_without_forcing_is_the_exact_linear_flow() {
    let (rows, cols, h, eps, s, dt) = (4, 4, 1.0, 2.0, 3.0, 0.25);
    let plan = SpectralPlan::new(rows, cols, h, eps, s, dt).unwrap();
    let u = Array2::from_shape_fn((rows, cols), |(r, c)| ((r * cols + c) as f64 * 0.7).sin());
    let u_hat = plan.apply_phi(0, u.view()).unwrap();
    let zero = Array2::zeros((rows, cols));
    let next = etdrk2_combine(&plan, u_hat.view(), zero.view(), zero.view()).unwrap();
    let exact = (dense_operator(rows, cols, h, eps, s) * -dt).exp() * flatten(&u);
    assert!((flatten(&next) - exact).amax() < 1e-12);
}

#[test]
fn etd1_step_matches_dense_formula() {
    let mut rng = StdRng::seed_from_u64(8);
    let dim = (5, 6);
    let image = ImageTensor::from_gray(random_field(&mut rng, dim, 0.0, 1.0)).unwrap();
    let u = PhaseStack::new(vec![
        random_field(&mut rng, dim, 0.3, 0.7),
        random_field(&mut rng, dim, 0.3, 0.7),
    ])
    .unwrap();
    let means = RegionMeans::new(vec![vec![0.1], vec![0.4], vec![0.6], vec![0.9]]).unwrap();
    let params = ModelParams {
        epsilon: 3.0,
        lambda: 2.0,
        h: 0.8,
        stabilizer: 7.0,
        dt: 0.2,
        ..ModelParams::default()
    };
    let plan = SpectralPlan::new(
        dim.0,
        dim.1,
        params.h,
        params.epsilon,
        params.stabilizer,
        params.dt,
    )
    .unwrap();
    let next = etd1_step(&u, &means, &image, &plan, &params).unwrap();
    let l = dense_operator(dim.0, dim.1, params.h, params.epsilon, params.stabilizer);
    let eig = SymmetricEigen::new(l.clone() * params.dt);
    let phi1 = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|a| -(-a).exp_m1() / a))
        * eig.eigenvectors.transpose();
    let phi0 = (l * -params.dt).exp();
    let n = nonlinear_terms(&u, &means, &image, &params).unwrap();
    for (i, ni) in n.iter().enumerate() {
        let want = &phi0 * flatten(u.field(i)) + &phi1 * flatten(ni) * params.dt;
        assert!((flatten(next.field(i)) - want).amax() < 1e-11);
    }
}

#[test]
fn energy_matches_dense_quadratic_form() {
    let mut rng = StdRng::seed_from_u64(4);
    let dim = (6, 5);
    let image = ImageTensor::from_gray(random_field(&mut rng, dim, 0.0, 1.0)).unwrap();
    let u = PhaseStack::new(vec![
        random_field(&mut rng, dim, 0.0, 1.0),
        random_field(&mut rng, dim, 0.0, 1.0),
    ])
    .unwrap();
    let means = RegionMeans::new(vec![vec![0.2], vec![0.3], vec![0.7], vec![0.8]]).unwrap();
    let params = ModelParams {
        epsilon: 4.0,
        h: 0.5,
        ..ModelParams::default()
    };
    // -2 eps D_h = L_h - S I with S = 0
    let d = dense_operator(dim.0, dim.1, params.h, 1.0, 0.0) * -0.5;
    let mut want = fitting_term(&u, &means, &image, params.lambda, params.eps1())
        .unwrap()
        .sum();
    for f in u.fields() {
        let x = flatten(f);
        want += f.iter().map(|&v| (v * (v - 1.0)).powi(2)).sum::<f64>() / params.epsilon;
        want -= params.epsilon * x.dot(&(&d * &x));
    }
    let got = discrete_energy(&u, &means, &image, &params).unwrap();
    assert!((got - want).abs() < 1e-10 * want.abs());
    assert!(energy_parts(&u, &means, &image, &params).unwrap().gradient >= 0.0);
}

#[test]
fn forces_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(21);
    let (lambda, eps1, step) = (40.0, 1.0 / 6.0, 1e-6);
    for (n, channels) in [(2, 1), (2, 3), (3, 1), (3, 3)] {
        let image = ImageTensor::new(Array3::from_shape_fn((8, 8, channels), |_| {
            rng.random::<f64>()
        }))
        .unwrap();
        let u = PhaseStack::new(
            (0..n)
                .map(|_| random_field(&mut rng, (8, 8), 0.36, 0.64))
                .collect(),
        )
        .unwrap();
        let means = RegionMeans::new(
            (0..1 << n)
                .map(|_| (0..channels).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
        .unwrap();
        let all = forces(&u, &means, &image, lambda, eps1).unwrap();
        let total = |s: &PhaseStack| fitting_term(s, &means, &image, lambda, eps1).unwrap().sum();
        for (i, expected) in all.iter().enumerate() {
            let single = force(i, &u, &means, &image, lambda, eps1).unwrap();
            assert_eq!(&single, expected);
            for px in [(0, 0), (2, 5), (7, 3), (4, 4)] {
                let mut plus = u.clone();
                plus.fields_mut()[i][px] += step;
                let mut minus = u.clone();
                minus.fields_mut()[i][px] -= step;
                let fd = (total(&plus) - total(&minus)) / (2.0 * step);
                let rel = (single[px] - fd).abs() / fd.abs().max(1e-3);
                assert!(
                    rel < 1e-4,
                    "n {n}, omega {channels}, field {i}, {px:?}: {rel:e}"
                );
            }
        }
    }
}
