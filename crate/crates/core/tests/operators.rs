use std::sync::Arc;

use csrecon::forward::{self, MeasurementPlan};
use csrecon::masks::PixelMaskSet;
use csrecon::sparse::{self, Prior, SparseConfig};
use csrecon::transforms::Basis;
use csrecon::transforms::CoefficientVector;
use csrecon::Image;

fn dense(plan: &MeasurementPlan) -> Vec<Vec<f64>> {
    let side = plan.side();
    (0..side * side)
        .map(|j| {
            let mut e = Image::zeros(side);
            e.data_mut()[j] = 1.0;
            match plan.forward(&e).unwrap() {
                forward::MeasurementData::Real(v) => v,
                forward::MeasurementData::Complex(_) => unreachable!(),
            }
        })
        .collect()
}

/// Largest eigenvalue of `A^T A` by long power iteration on the dense columns.
fn dense_norm_sq(cols: &[Vec<f64>]) -> f64 {
    let n = cols.len();
    let gram: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let w: Vec<f64> = gram.iter().map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / lambda).collect();
    }
    lambda
}

#[test]
fn all_ones_mask_has_norm_four() {
    let masks = PixelMaskSet::from_masks(4, 2, 0, vec![vec![true; 16]]).unwrap();
    let plan = MeasurementPlan::Pixel(masks);
    assert!((plan.lipschitz_bound() - 4.0).abs() < 1e-9);
    assert!((dense_norm_sq(&dense(&plan)) - 4.0).abs() < 1e-9);
}

#[test]
fn pixel_bound_is_tight_upper_bound() {
    for (kernel, count, seed) in [(2, 2, 1), (2, 4, 2), (4, 3, 3), (8, 5, 4)] {
        let plan = MeasurementPlan::Pixel(PixelMaskSet::generate(8, count, kernel, seed).unwrap());
        let truth = dense_norm_sq(&dense(&plan));
        let bound = plan.lipschitz_bound();
        assert!(bound >= truth * (1.0 - 1e-9), "K={kernel}: {bound} < {truth}");
        assert!(bound <= truth * 1.05, "K={kernel}: {bound} vs {truth}");
    }
}

#[test]
fn measurement_noise_has_requested_variance() {
    let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(64, 64, 2, 9).unwrap()));
    let y = forward::apply(&plan, &Image::zeros(64)).unwrap();
    let noisy = forward::add_noise(&y, 0.1, 3).unwrap();
    let d = noisy.data.sub(&y.data);
    let n = d.len() as f64;
    let var = d.norm_sqr() / n;
    // sample variance of n normals has sd var * sqrt(2 / n)
    assert!((var - 0.1).abs() < 4.0 * 0.1 * (2.0 / n).sqrt(), "{var}");
    assert_eq!(noisy.noise_var, 0.1);
    assert_eq!(forward::add_noise(&y, 0.1, 3).unwrap().data, noisy.data);
}

#[test]
fn single_dct_atom_is_recovered_from_half_the_measurements() {
    let side = 8;
    let mut coef = vec![0.0; side * side];
    coef[2 * side + 1] = 1.0;
    let atom = CoefficientVector::new(Basis::Dct, side, coef).unwrap().synthesize().unwrap();

    // K = 2, b = 2 gives C = 2
    let plan = Arc::new(MeasurementPlan::Pixel(PixelMaskSet::generate(side, 2, 2, 12).unwrap()));
    assert_eq!(plan.compression(), 2.0);
    let y = forward::apply(&plan, &atom).unwrap();
    let l = plan.lipschitz_bound();
    let cfg = SparseConfig::new(Prior::Dct, 1e-4 * l, 0.9 / l).with_epochs(10_000);
    let (x, _) = sparse::solve_sparse(&y, &cfg).unwrap();
    let err = x.max_abs_diff(&atom);
    assert!(err <= 1e-3, "max error {err}");
}
