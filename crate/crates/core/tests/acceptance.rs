//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use birdseye::analytics::{
    arithmetic_mean, error_rate, harmonic_mean, kinematics_series, space_mean_speed, Direction, KinematicsConfig,
};
use birdseye::calibration::{fit_calibration, CalibrationModel, CalibrationSettings};
use birdseye::feature_flow::{harris_corners, lk_track, FeaturePoint, GrayFrame, HarrisConfig, LkConfig};
use birdseye::geometry::{estimate_homography, BevPoint, Correspondence, Homography, ImagePoint};
use birdseye::pipeline::{
    calibration_samples, evaluate_tracks, gen_synthetic_scene, run_pipeline, split_vehicles, RunOptions, SceneConfig,
    SynthSpec,
};
use birdseye::tracking::{BBox, ByteConfig, ByteTracker, KalmanParams, MotpyConfig, MotpyTracker, MultiTracker, Track};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bev_det, textured_frame, track_from};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn canonical(m: &Matrix3<f64>) -> Matrix3<f64> {
    let s = if m[(2, 2)] < 0.0 { -1.0 } else { 1.0 };
    m * (s / m.norm())
}

/// Random homography near a similarity with mild perspective, together with
/// four source points in general position.
fn random_case(rng: &mut ChaCha8Rng) -> (Matrix3<f64>, Vec<ImagePoint>) {
    loop {
        let m: Matrix3<f64> = Matrix3::new(
            rng.random_range(0.5..2.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-200.0..200.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.5..2.0),
            rng.random_range(-200.0..200.0),
            rng.random_range(-1e-3..1e-3),
            rng.random_range(-1e-3..1e-3),
            1.0,
        );
        if m.determinant().abs() < 0.1 {
            continue;
        }
        let pts: Vec<ImagePoint> =
            (0..4).map(|_| ImagePoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0))).collect();
        let area = |a: &ImagePoint, b: &ImagePoint, c: &ImagePoint| {
            0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs()
        };
        let well_spread = (0..4).all(|skip| {
            let t: Vec<&ImagePoint> = pts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| p).collect();
            area(t[0], t[1], t[2]) > 2000.0
        });
        let in_front = pts.iter().all(|p| m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] > 0.2);
        if well_spread && in_front {
            return (m, pts);
        }
    }
}

fn project(m: &Matrix3<f64>, p: &ImagePoint) -> BevPoint {
    let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
    BevPoint::new(
        (m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)]) / w,
        (m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)]) / w,
    )
}

fn homography_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<_> = (0..1000).map(|_| random_case(&mut rng)).collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (m, pts) in &cases {
        let pairs: Vec<Correspondence> = pts.iter().map(|p| Correspondence::new(*p, project(m, p))).collect();
        let h = match estimate_homography(&pairs) {
            Ok(h) => h,
            Err(e) => return outcome(false, format!("estimation failed: {e}")),
        };
        let diff = (canonical(h.matrix()) - canonical(m)).abs().max();
        worst = worst.max(diff);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-6 && secs < 5.0, format!("max entry error {worst:.2e}, {secs:.2} s for 1000 estimates"))
}

fn homography_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..1000 {
        let (m, _) = random_case(&mut rng);
        let h = Homography::from_matrix(m).unwrap();
        let inv = h.invert().unwrap();
        for _ in 0..100 {
            let p = ImagePoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let w = m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)];
            if w.abs() < 1e-3 {
                continue;
            }
            let q = h.apply_point(p).unwrap();
            let back = inv.apply_bev(q).unwrap();
            worst = worst.max((back.x - p.x).abs().max((back.y - p.y).abs()));
            checked += 1;
        }
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} px over {checked} points"))
}

// Real count, then four (estimated count, reported error rate × 100) pairs.
const FIELD_COUNTS: [[u64; 9]; 16] = [
    [548, 525, 420, 542, 109, 611, 1150, 654, 1934],
    [440, 416, 545, 442, 45, 562, 2773, 631, 4341],
    [32, 21, 3438, 29, 938, 67, 10938, 58, 8125],
    [7, 5, 2857, 8, 1429, 50, 61429, 18, 15714],
    [332, 284, 1446, 335, 90, 547, 6476, 414, 2470],
    [472, 452, 424, 462, 212, 604, 2797, 580, 2288],
    [18, 14, 2222, 19, 556, 40, 12222, 35, 9444],
    [29, 27, 690, 31, 690, 54, 8621, 47, 6207],
    [303, 290, 429, 302, 33, 372, 2277, 384, 2673],
    [320, 303, 531, 312, 250, 418, 3063, 403, 2594],
    [10, 11, 1000, 11, 1000, 37, 27000, 25, 15000],
    [16, 11, 3125, 18, 1250, 42, 16250, 34, 11250],
    [439, 444, 114, 450, 251, 535, 2187, 614, 3986],
    [330, 311, 576, 345, 455, 410, 2424, 415, 2576],
    [26, 17, 3462, 27, 385, 34, 3077, 30, 1538],
    [23, 13, 4348, 23, 0, 21, 870, 23, 0],
];

fn count_error_rates() -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    for (r, row) in FIELD_COUNTS.iter().enumerate() {
        for k in 0..4 {
            let est = row[1 + 2 * k];
            let reported = row[2 + 2 * k] as f64 / 100.0;
            let got = error_rate(est, row[0]).unwrap();
            cells += 1;
            if (got - reported).abs() > 0.005 {
                bad.push(format!("row {} col {}: {got} vs {reported}", r + 1, k + 1));
            }
        }
    }
    outcome(bad.is_empty(), format!("{} of {cells} cells reproduced{}", cells - bad.len(), if bad.is_empty() { String::new() } else { format!(": {}", bad.join("; ")) }))
}

fn synthetic_counting() -> Outcome {
    let start = Instant::now();
    let scene = SceneConfig::example();
    let spec = SynthSpec::default();
    let (stream, truth) = gen_synthetic_scene(&spec, &scene).unwrap();
    let clean = run_pipeline(&scene, &stream, &RunOptions::default()).unwrap();
    let m = evaluate_tracks(&clean.tracks, &truth, 2, 10.0);
    let clean_er: Vec<f64> = m.counts.iter().map(|c| c.error_rate_pct.unwrap_or(f64::NAN)).collect();
    let per_dir_ok = [Direction::One, Direction::Two].iter().all(|&d| truth.count(d, None) == 50);
    let clean_ok = per_dir_ok && clean_er.iter().all(|&e| e == 0.0) && m.id_switches == 0;

    // Zero coasting so that every dropout window actually splits the track.
    let mut spec = SynthSpec::default();
    spec.dropout.fraction = 1.0;
    spec.seed = 8;
    let mut cfg = scene.clone();
    cfg.tracker.byte.max_coast = Some(0);
    let (stream, truth) = gen_synthetic_scene(&spec, &cfg).unwrap();
    let windows_ok = truth.vehicles.iter().all(|v| v.dropout.is_some_and(|(a, b)| ((b - a + 1) as f64) < cfg.fps));
    let out = run_pipeline(&cfg, &stream, &RunOptions::default()).unwrap();
    let split = split_vehicles(&out.raw_tracks, &truth);
    let still = split_vehicles(&out.tracks, &truth);
    let restored = split.iter().filter(|id| !still.contains(id)).count();
    let frac = if split.is_empty() { 0.0 } else { restored as f64 / split.len() as f64 };
    let m = evaluate_tracks(&out.tracks, &truth, 2, 10.0);
    let worst_er = m.counts.iter().map(|c| c.error_rate_pct.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = clean_ok && windows_ok && !split.is_empty() && worst_er <= 5.0 && frac >= 0.9 && secs < 30.0;
    outcome(
        pass,
        format!(
            "clean ER {clean_er:?} switches {}; dropout: {} split, {restored} restored ({:.1}%), ER max {worst_er:.2}%, {secs:.2} s",
            m.id_switches,
            split.len(),
            100.0 * frac
        ),
    )
}

fn run_ids(tracker: &mut dyn MultiTracker, frames: &[Vec<birdseye::tracking::BevDetection>]) -> Vec<Track> {
    let mut done = Vec::new();
    for (f, dets) in frames.iter().enumerate() {
        done.extend(tracker.step(f as u64, dets).unwrap());
    }
    done.extend(tracker.flush());
    done
}

fn byte_occlusion() -> Outcome {
    let scores = [0.9, 0.9, 0.9, 0.9, 0.3, 0.9, 0.9, 0.9, 0.9];
    let frames: Vec<Vec<_>> = scores.iter().enumerate().map(|(f, &s)| vec![bev_det(f as u64, 100.0 + 2.0 * f as f64, 50.0, s)]).collect();
    let byte_cfg = ByteConfig { tau: 0.5, max_coast: 0, ..ByteConfig::default() };
    let mut byte = ByteTracker::new(byte_cfg, KalmanParams::default()).unwrap();
    let byte_tracks = run_ids(&mut byte, &frames);

    let mut deleted = frames.clone();
    deleted[4].clear();
    let mut motpy = MotpyTracker::new(MotpyConfig { max_coast: 0, ..MotpyConfig::default() }, KalmanParams::default()).unwrap();
    let motpy_tracks = run_ids(&mut motpy, &deleted);
    let pass = byte_tracks.len() == 1 && byte_tracks[0].detection_count() == scores.len() && motpy_tracks.len() == 2;
    outcome(pass, format!("BYTE ids {}, zero-coast Motpy ids {}", byte_tracks.len(), motpy_tracks.len()))
}

fn speed_recovery() -> Outcome {
    let scene = SceneConfig::example();
    let mut spec = SynthSpec::default();
    for g in &mut spec.groups {
        g.speed_mph_sd = 0.0;
        g.speed_mph_mean = 60.0;
    }
    let (stream, _) = gen_synthetic_scene(&spec, &scene).unwrap();
    let out = run_pipeline(&scene, &stream, &RunOptions::default()).unwrap();
    let trim = scene.fps.round() as usize;
    let mut worst = 0.0f64;
    for r in &out.analysis.records {
        let interior: Vec<f64> = r.speeds.iter().skip(trim).take(r.speeds.len().saturating_sub(2 * trim)).map(|s| s.1).collect();
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        worst = worst.max((mean - 60.0).abs() / 60.0);
    }
    let sms = space_mean_speed(&[60.0, 30.0]).unwrap();
    let pass = out.analysis.records.len() == 100 && worst <= 0.02 && sms == 40.0;
    outcome(pass, format!("worst vehicle mean speed error {:.3}%, space-mean(60, 30) = {sms}", 100.0 * worst))
}

fn acceleration() -> Outcome {
    let fps = 30.0;
    let ftps_per_mph = 5280.0 / 3600.0;
    let a = 2.0 * ftps_per_mph;
    // Constant 2 mph/s: 58 mph at t = 0, 60 mph at t = 1 s, 70 mph at t = 6 s, on to 72 mph.
    let v0 = 58.0 * ftps_per_mph;
    let pts: Vec<(f64, f64)> = (0..=(7.0 * fps) as usize)
        .map(|i| {
            let t = i as f64 / fps;
            (5.0 + v0 * t + 0.5 * a * t * t, 50.0)
        })
        .collect();
    let settings = CalibrationSettings::default();
    // 14.7 px per car length and 6 px per car width: one foot per BEV px.
    let model = CalibrationModel::from_coeffs(vec![14.7], vec![6.0], (2000.0, 100.0), &settings, None).unwrap();
    let track = track_from(1, 0, &pts);
    let (_, accel) = kinematics_series(&track, &model, fps, &KinematicsConfig::default()).unwrap();
    let center = 3.5;
    let at_center = accel.iter().min_by(|p, q| (p.0 - center).abs().total_cmp(&(q.0 - center).abs())).copied();
    let ramp_ok = at_center.is_some_and(|(t, v)| (t - center).abs() < 0.5 / fps + 1e-9 && (v - 0.89408).abs() <= 1e-6);

    let scene = SceneConfig::example();
    let mut spec = SynthSpec::default();
    for g in &mut spec.groups {
        g.speed_mph_sd = 0.0;
        g.speed_mph_mean = 60.0;
    }
    let (stream, _) = gen_synthetic_scene(&spec, &scene).unwrap();
    let out = run_pipeline(&scene, &stream, &RunOptions::default()).unwrap();
    let accels: Vec<f64> = out.analysis.records.iter().filter_map(|r| r.mean_accel_ms2).collect();
    let steady = accels.iter().sum::<f64>() / accels.len().max(1) as f64;
    let pass = ramp_ok && !accels.is_empty() && steady.abs() < 0.01;
    outcome(pass, format!("window-center acceleration {at_center:?} m/s², steady-scene mean {steady:.2e} m/s²"))
}

fn calibration_fit() -> Outcome {
    let scene = SceneConfig::example();
    let spec = SynthSpec::default();
    let (stream, _) = gen_synthetic_scene(&spec, &scene).unwrap();
    let out = run_pipeline(&scene, &stream, &RunOptions::default()).unwrap();
    let samples = calibration_samples(&out.tracks, "car");
    let model = fit_calibration(&samples, scene.bev_size, &scene.calibration).unwrap();
    let coeff_err = [
        (model.width_coeffs[0] - spec.width_model.0).abs(),
        (model.width_coeffs[1] - spec.width_model.1).abs(),
        (model.height_coeffs[0] - spec.height_model.0).abs(),
        (model.height_coeffs[1] - spec.height_model.1).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let (len, wid) = scene.bev_size;
    for i in 0..=80 {
        for j in 0..=20 {
            let p = BevPoint::new(len * i as f64 / 80.0, wid * j as f64 / 20.0);
            let ft_per_px = 14.7 * model.k_w(p).unwrap();
            worst = worst.max((ft_per_px - spec.ft_per_px_x(p.x)).abs() / spec.ft_per_px_x(p.x));
        }
    }
    outcome(
        coeff_err <= 1e-9 && worst <= 0.01,
        format!("max coefficient error {coeff_err:.2e}, worst ft/px error {:.4}% over the grid", 100.0 * worst),
    )
}

fn optical_flow() -> Outcome {
    let prev = textured_frame(80, 80, 0.0, 0.0);
    let next = textured_frame(80, 80, 2.0, 0.0);
    let seeds = harris_corners(&prev, &BBox::new(16.0, 16.0, 48.0, 48.0), 40, &HarrisConfig::default());
    let tracked = lk_track(&prev, &next, &seeds, &LkConfig::default()).unwrap();
    let mut dx: Vec<f64> = Vec::new();
    let mut dy: Vec<f64> = Vec::new();
    for (s, (p, ok)) in seeds.iter().zip(&tracked) {
        if *ok {
            dx.push(p.x - s.pos.x);
            dy.push(p.y - s.pos.y);
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        if v.is_empty() { f64::NAN } else { v[v.len() / 2] }
    };
    let (mx, my) = (median(&mut dx), median(&mut dy));
    let flow_ok = seeds.len() >= 5 && (mx - 2.0).abs() <= 0.25 && my.abs() <= 0.25;

    let mut square = GrayFrame::filled(60, 60, 0);
    for y in 20..40 {
        for x in 20..40 {
            square.set(x, y, 255);
        }
    }
    let corners = harris_corners(&square, &BBox::new(0.0, 0.0, 60.0, 60.0), 4, &HarrisConfig::default());
    let truth = [(19.5, 19.5), (39.5, 19.5), (19.5, 39.5), (39.5, 39.5)];
    let corner_err = truth
        .iter()
        .map(|&(tx, ty)| {
            corners.iter().map(|c: &FeaturePoint| (c.pos.x - tx).hypot(c.pos.y - ty)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let pass = flow_ok && corners.len() == 4 && corner_err <= 1.5;
    outcome(
        pass,
        format!("median flow ({mx:.3}, {my:.3}) from {} seeds; {} corners, worst {corner_err:.2} px", dx.len(), corners.len()),
    )
}

fn harmonic_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..90.0)).collect();
        let h = harmonic_mean(&v).unwrap();
        let a = arithmetic_mean(&v).unwrap();
        if h > a * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 1000 vectors"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("homography recovery", homography_recovery),
        ("homography round trip", homography_round_trip),
        ("count error rate table", count_error_rates),
        ("synthetic end-to-end counting", synthetic_counting),
        ("BYTE occlusion recovery", byte_occlusion),
        ("speed recovery", speed_recovery),
        ("acceleration", acceleration),
        ("calibration fit", calibration_fit),
        ("optical flow and corners", optical_flow),
        ("harmonic mean inequality", harmonic_inequality),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
