use birdseye::calibration::{calibrated_displacement, fit_calibration, CalSample, CalibrationModel, CalibrationSettings};
use birdseye::geometry::BevPoint;
use proptest::prelude::*;

fn samples(pts: &[(f64, f64, f64, f64)]) -> Vec<CalSample> {
    pts.iter().map(|&(x, y, w, h)| CalSample { center: BevPoint::new(x, y), w, h, cls: "car".into() }).collect()
}

/// Closed-form simple regression: slope = cov(x, y) / var(x).
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

prop_compose! {
    fn noisy_scene()(
        pts in prop::collection::vec((0.0..800.0f64, 0.0..200.0f64, -1.0..1.0f64, -1.0..1.0f64), 40..120),
        aw in 8.0..14.0f64, bw in 0.0..0.01f64, ah in 12.0..18.0f64, bh in 0.0..0.03f64,
    ) -> Vec<(f64, f64, f64, f64)> {
        pts.into_iter().map(|(x, y, nw, nh)| (x, y, aw + bw * x + nw, ah + bh * y + nh)).collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fit_matches_closed_form(pts in noisy_scene()) {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ws: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let hs: Vec<f64> = pts.iter().map(|p| p.3).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(span(&xs) > 200.0 && span(&ys) > 50.0);
        let m = fit_calibration(&samples(&pts), (800.0, 200.0), &CalibrationSettings::default()).unwrap();
        let (w0, w1) = ols(&xs, &ws);
        let (h0, h1) = ols(&ys, &hs);
        prop_assert!((m.width_coeffs[0] - w0).abs() < 1e-8 && (m.width_coeffs[1] - w1).abs() < 1e-10);
        prop_assert!((m.height_coeffs[0] - h0).abs() < 1e-8 && (m.height_coeffs[1] - h1).abs() < 1e-10);
    }

    #[test]
    fn scaling_boxes_scales_the_model(pts in noisy_scene(), s in 0.5..3.0f64, px in 0.0..800.0f64, py in 0.0..200.0f64) {
        let settings = CalibrationSettings::default();
        let scaled: Vec<_> = pts.iter().map(|&(x, y, w, h)| (x, y, w * s, h * s)).collect();
        let a = fit_calibration(&samples(&pts), (800.0, 200.0), &settings);
        let b = fit_calibration(&samples(&scaled), (800.0, 200.0), &settings);
        prop_assume!(a.is_ok());
        let (a, b) = (a.unwrap(), b.unwrap());
        for (ca, cb) in a.width_coeffs.iter().zip(&b.width_coeffs) {
            prop_assert!((ca * s - cb).abs() < 1e-8 * (1.0 + cb.abs()));
        }
        let p = BevPoint::new(px, py);
        prop_assert!((a.k_w(p).unwrap() / s - b.k_w(p).unwrap()).abs() < 1e-12);
        prop_assert!((a.k_h(p).unwrap() / s - b.k_h(p).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn document_round_trip_preserves_lookup() {
    let pts: Vec<_> = (0..60).map(|i| {
        let x = i as f64 * 13.0;
        let y = (i * 7 % 50) as f64 * 4.0;
        (x, y, 10.0 + 0.0075 * x, 14.0 + 0.02 * y)
    }).collect();
    let m = fit_calibration(&samples(&pts), (800.0, 200.0), &CalibrationSettings::default()).unwrap();
    let back = CalibrationModel::from_toml(&m.to_toml()).unwrap();
    for &(x, y) in &[(0.0, 0.0), (123.4, 56.7), (800.0, 200.0), (799.9, 3.2)] {
        let p = BevPoint::new(x, y);
        assert_eq!(m.k_w(p).unwrap(), back.k_w(p).unwrap());
        assert_eq!(m.k_h(p).unwrap(), back.k_h(p).unwrap());
    }
}

#[test]
fn fallback_model_is_uniform() {
    let settings = CalibrationSettings { fallback_ft_per_px: (1.5, 0.5), ..Default::default() };
    let m = CalibrationModel::constant((800.0, 200.0), &settings).unwrap();
    let (dx, dy) = calibrated_displacement(&m, BevPoint::new(400.0, 100.0), 10.0, -4.0).unwrap();
    assert!((dx - 15.0).abs() < 1e-12 && (dy + 2.0).abs() < 1e-12);
}
