use accv::admm::extract_labels;
use accv::iglim::{combine_phases, diagonal_denoise, neighbor_weights, phase_codes, EdgeMask};
use accv::model::{dirac_reg, heaviside_reg, region_indicator, update_means, Code};
use accv::spectral::SpectralPlan;
use accv::{ImageTensor, PhaseStack};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn field(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(0.0f64..=1.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn mask(rows: usize, cols: usize, density: f64) -> impl Strategy<Value = EdgeMask> {
    proptest::collection::vec(proptest::bool::weighted(density), rows * cols)
        .prop_map(move |v| EdgeMask::from_array(Array2::from_shape_vec((rows, cols), v).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn indicators_partition_unity(u in proptest::collection::vec(0.0f64..=1.0, 1..=4), p in 1usize..=5) {
        let eps1 = 1.0 / (2.0 * (2 * p + 1) as f64);
        let q: Vec<f64> = Code::all(u.len()).map(|b| region_indicator(b, &u, eps1)).collect();
        prop_assert!(q.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heaviside_is_monotone_with_matching_derivative(a in -0.5f64..0.5, b in -0.5f64..0.5) {
        let eps1 = 1.0 / 6.0;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(heaviside_reg(lo, eps1) <= heaviside_reg(hi, eps1));
        let step = 1e-6;
        let fd = (heaviside_reg(a + step, eps1) - heaviside_reg(a - step, eps1)) / (2.0 * step);
        prop_assert!((fd - dirac_reg(a, eps1)).abs() < 1e-5);
    }

    #[test]
    fn neighbour_weights_are_a_distribution(
        data in proptest::collection::vec(0.0f64..=1.0, 5 * 4 * 3),
        kappa in 0.0f64..200.0,
        row in 0usize..5,
        col in 0usize..4,
    ) {
        let image = ImageTensor::new(Array3::from_shape_vec((5, 4, 3), data).unwrap()).unwrap();
        let w = neighbor_weights(&image, row, col, kappa);
        prop_assert!(w.iter().all(|&x| x >= 0.0 && x.is_finite()));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn denoise_shrinks_and_settles(m in mask(12, 12, 0.35)) {
        let once = diagonal_denoise(&m, 1);
        prop_assert!(once.is_subset_of(&m));
        let settled = diagonal_denoise(&m, 200);
        prop_assert_eq!(diagonal_denoise(&settled, 1), settled.clone());
        prop_assert!(settled.is_subset_of(&once));
    }

    #[test]
    fn means_stay_in_channel_range(img in field(6, 5), u1 in field(6, 5), u2 in field(6, 5)) {
        let image = ImageTensor::from_gray(img.clone()).unwrap();
        let u = PhaseStack::new(vec![u1, u2]).unwrap();
        let means = update_means(&u, &image, 1.0 / 6.0, None).unwrap().means;
        let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in means.values() {
            prop_assert!(v[0] >= lo - 1e-12 && v[0] <= hi + 1e-12);
        }
    }

    #[test]
    fn disjoint_masks_round_trip_through_labels(
        cells in proptest::collection::vec(0usize..4, 64),
    ) {
        let masks: Vec<EdgeMask> = (0..4)
            .map(|k| EdgeMask::from_fn((8, 8), |r, c| cells[r * 8 + c] == k))
            .collect();
        prop_assume!(masks.iter().all(|m| !m.is_empty()));
        let u = combine_phases(&masks).unwrap();
        for f in u.fields() {
            prop_assert!(f.iter().all(|&v| v == 0.0 || v == 1.0));
        }
        let labels = extract_labels(&u);
        let codes = phase_codes(&masks).unwrap();
        for (m, code) in masks.iter().zip(&codes) {
            for (r, c) in m.pixels() {
                prop_assert_eq!(labels.get(r, c), *code);
            }
        }
    }

    #[test]
    fn swapping_fields_swaps_label_bits(u1 in field(5, 5), u2 in field(5, 5)) {
        let ab = extract_labels(&PhaseStack::new(vec![u1.clone(), u2.clone()]).unwrap());
        let ba = extract_labels(&PhaseStack::new(vec![u2, u1]).unwrap());
        for r in 0..5 {
            for c in 0..5 {
                let bits = ab.get(r, c).bits(2);
                prop_assert_eq!(ba.get(r, c), Code::from_bits(&[bits[1], bits[0]]));
            }
        }
    }

    #[test]
    fn phi_is_linear(x in field(6, 7), y in field(6, 7), a in -3.0f64..3.0, b in -3.0f64..3.0, j in 0usize..3) {
        let plan = SpectralPlan::new(6, 7, 0.5, 4.0, 30.0, 0.2).unwrap();
        let combo = &x * a + &y * b;
        let lhs = plan.apply_phi(j, combo.view()).unwrap();
        let rhs = plan.apply_phi(j, x.view()).unwrap() * a + plan.apply_phi(j, y.view()).unwrap() * b;
        let err = (&lhs - &rhs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn phi_maps_constants_to_scaled_constants(c in -2.0f64..2.0, j in 0usize..3) {
        let plan = SpectralPlan::new(5, 9, 1.0, 4.0, 12.0, 0.3).unwrap();
        let out = plan.apply_phi(j, Array2::from_elem((5, 9), c).view()).unwrap();
        let want = c * accv::spectral::phi_scalar(j, 0.3 * 12.0);
        prop_assert!(out.iter().all(|v| (v - want).abs() < 1e-13));
    }

    #[test]
    fn phi_commutes_with_each_other(x in field(6, 6), i in 0usize..3, j in 0usize..3) {
        let plan = SpectralPlan::new(6, 6, 0.7, 3.0, 9.0, 0.4).unwrap();
        let ij = plan.apply_phi(i, plan.apply_phi(j, x.view()).unwrap().view()).unwrap();
        let ji = plan.apply_phi(j, plan.apply_phi(i, x.view()).unwrap().view()).unwrap();
        let err = (&ij - &ji).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-13);
    }
}

#[test]
fn code_flip_is_an_involution() {
    for n in 1..=4 {
        for b in Code::all(n) {
            for i in 0..n {
                assert_eq!(b.flip(i).flip(i), b);
                assert_ne!(b.flip(i).bit(i), b.bit(i));
            }
        }
    }
}
