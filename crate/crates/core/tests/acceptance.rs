//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trainer_core::compositor::{composite, BlendWeights, CompositeStyle};
use trainer_core::marker_tracking::{augment, detect_markers, AugmentSpec, ColorBlobConfig, KeypointPair, KeypointSample};
use trainer_core::pose_calibration::{overlay_transform, pose_from_markers, CalibrationProfile, Pose2D, WarpedImage};
use trainer_core::raster::sample_bilinear;
use trainer_core::service::{run_headless, PipelineConfig};
use trainer_core::session_io::{SessionManifest, SessionReader};
use trainer_core::slippage_analysis::{read_trials_csv, summarize};
use trainer_core::stream_sync::{pair_streams, FrameSource, PairEvent, PairerConfig, SourcePoll, SourceSpec, SyntheticCamera, SyntheticParams, SyntheticUltrasound};
use trainer_core::synthetic::{face_backdrop, paint_markers, render_marker_frame, MarkerSquare, MARKER_ORANGE};
use trainer_core::tongue_contour::{binarize, contour_distances, extract_top_pixels, generate_segmentation, skeletonize, TongueBandSpec, TongueContour, DEFAULT_MAX_GAP};
use trainer_core::{FrameDims, ImageFrame, PixelFormat, Point2, Rect, StreamId};

const POSE_TOL: f64 = 1e-9;
const POSE_BUDGET: Duration = Duration::from_secs(1);
const DETECT_TOL_PX: f64 = 0.5;
const DETECT_PASS_RATE: f64 = 0.99;
const DETECT_BUDGET: Duration = Duration::from_secs(10);
const AUGMENT_TOL: f64 = 10.0;
const AUGMENT_BUDGET: Duration = Duration::from_secs(10);
const CONTOUR_RMSE_PX: f64 = 1.5;
const CONTOUR_BUDGET: Duration = Duration::from_secs(30);
const METRIC_TOL: f64 = 1e-9;
const SYNC_TOL_US: u64 = 16_667;
const STALL_US: u64 = 500_000;
const MIN_BUNDLES_PER_S: f64 = 30.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < budget, || format!("took {took:.2?}, budget {budget:?}"))?;
    Ok(took)
}

fn rand_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point2 {
    Point2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

/// Pose computed with complex arithmetic: with z = m2 - m1 and the anchor
/// offset o as a complex number, anchor = m1 + o * z * e^(i * base).
fn pose_oracle(kp: &KeypointPair, cal: &CalibrationProfile) -> Pose2D {
    let (zr, zi) = (kp.m2.x - kp.m1.x, kp.m2.y - kp.m1.y);
    let (er, ei) = (cal.base_rotation_offset_rad.cos(), cal.base_rotation_offset_rad.sin());
    let (ozr, ozi) = (cal.anchor_offset.x * zr - cal.anchor_offset.y * zi, cal.anchor_offset.x * zi + cal.anchor_offset.y * zr);
    let (ar, ai) = (ozr * er - ozi * ei, ozr * ei + ozi * er);
    Pose2D {
        angle_rad: zi.atan2(zr) + cal.base_rotation_offset_rad,
        scale: zr.hypot(zi) / cal.ref_marker_distance_px,
        anchor_px: Point2::new(kp.m1.x + ar, kp.m1.y + ai),
    }
}

fn pose_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let cal = CalibrationProfile {
            ref_marker_distance_px: rng.gen_range(20.0..300.0),
            anchor_offset: rand_point(&mut rng, -2.0, 2.0),
            base_rotation_offset_rad: rng.gen_range(-PI..PI),
            us_crop: Rect::new(0, 0, 320, 240),
            us_anchor: Point2::new(160.0, 0.0),
        };
        let m1 = rand_point(&mut rng, 0.0, 640.0);
        let (len, dir) = (rng.gen_range(20.0..400.0), rng.gen_range(-PI..PI));
        let kp = KeypointPair::new(m1, m1 + Point2::new(len * dir.cos(), len * dir.sin()), 1.0);
        let pose = pose_from_markers(&kp, &cal).map_err(|e| e.to_string())?;
        let want = pose_oracle(&kp, &cal);
        let mut check = |what: &str, err: f64| {
            worst = worst.max(err);
            ensure(err <= POSE_TOL, || format!("case {case}: {what} off by {err:e}"))
        };
        check("angle vs oracle", angle_diff(pose.angle_rad, want.angle_rad).abs())?;
        check("scale vs oracle", (pose.scale - want.scale).abs())?;
        check("anchor vs oracle", pose.anchor_px.distance(want.anchor_px))?;

        let c = rand_point(&mut rng, -100.0, 700.0);
        let map = |f: &dyn Fn(Point2) -> Point2| KeypointPair { m1: f(kp.m1), m2: f(kp.m2), ..kp };
        let k = rng.gen_range(0.25..4.0);
        let scaled = pose_from_markers(&map(&|p| c + (p - c) * k), &cal).unwrap();
        check("scale equivariance", (scaled.scale - k * pose.scale).abs())?;
        check("angle under scaling", angle_diff(scaled.angle_rad, pose.angle_rad).abs())?;
        let theta = rng.gen_range(-PI..PI);
        let turned = pose_from_markers(&map(&|p| c + (p - c).rotated(theta)), &cal).unwrap();
        check("rotation equivariance", angle_diff(turned.angle_rad, pose.angle_rad + theta).abs())?;
        let d = rand_point(&mut rng, -300.0, 300.0);
        let moved = pose_from_markers(&kp.translated(d), &cal).unwrap();
        check("translation equivariance", moved.anchor_px.distance(pose.anchor_px + d))?;
        let t = overlay_transform(&pose, &cal);
        let p = rand_point(&mut rng, -1000.0, 1000.0);
        check("round trip", t.apply(t.inverse().apply(p)).distance(p))?;
    }
    let took = within_budget(start, POSE_BUDGET)?;
    Ok(format!("1000 cases, worst error {worst:.1e}, {took:.2?}"))
}

fn detector() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dims = FrameDims::new(640, 480);
    let backdrop = face_backdrop(dims);
    let cfg = ColorBlobConfig::default();
    let start = Instant::now();
    let (mut good, mut worst) = (0, 0.0f64);
    for i in 0..200 {
        let size = rng.gen_range(14.0..30.0);
        let a = Point2::new(rng.gen_range(5.0..280.0), rng.gen_range(5.0..440.0));
        let b = Point2::new(rng.gen_range(330.0..600.0), rng.gen_range(5.0..440.0));
        let mut buf = backdrop.clone();
        let squares = if rng.gen() { [a, b] } else { [b, a] };
        paint_markers(&mut buf, dims, &squares.map(|p| MarkerSquare::new(p.x, p.y, size)));
        let frame = ImageFrame::new(StreamId::Rgb, 0, 640, 480, PixelFormat::Rgb8, buf).unwrap();
        let kp = detect_markers(&frame, &cfg).map_err(|e| format!("frame {i}: {e}"))?;
        ensure(kp.m1.x <= kp.m2.x, || format!("frame {i}: m1 right of m2"))?;
        let err = kp.m1.distance(a).max(kp.m2.distance(b));
        worst = worst.max(err);
        good += (err <= DETECT_TOL_PX) as usize;
    }
    let took = within_budget(start, DETECT_BUDGET)?;
    let rate = good as f64 / 200.0;
    ensure(rate >= DETECT_PASS_RATE, || format!("{good}/200 within {DETECT_TOL_PX} px"))?;
    Ok(format!("{good}/200 within {DETECT_TOL_PX} px, worst {worst:.3} px, {took:.2?}"))
}

fn augmentation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = FrameDims::new(320, 240);
    let (a, b) = (Point2::new(120.0, 110.0), Point2::new(200.0, 130.0));
    let half = 6.0;
    let img = render_marker_frame(
        dims,
        &[MarkerSquare::new(a.x - half, a.y - half, 2.0 * half), MarkerSquare::new(b.x - half, b.y - half, 2.0 * half)],
        100,
        StreamId::Rgb,
        0,
    );
    let sample = KeypointSample::new(img, KeypointPair::new(a, b, 1.0)).unwrap();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..500 {
        let spec = AugmentSpec {
            rotation_deg: rng.gen_range(-180.0..180.0),
            scale: rng.gen_range(0.8..1.25),
            translation: rand_point(&mut rng, -30.0, 30.0),
            channel_shift: [0; 3],
        };
        let out = augment(&sample, &spec).map_err(|e| format!("spec {i}: {e}"))?;
        for p in [out.truth.m1, out.truth.m2] {
            let got = sample_bilinear(&out.image, p);
            for (g, want) in got.iter().zip(MARKER_ORANGE) {
                let err = (g - want as f64).abs();
                worst = worst.max(err);
                ensure(err <= AUGMENT_TOL, || format!("spec {i}: {got:?} at {p:?}"))?;
            }
        }
    }
    let took = within_budget(start, AUGMENT_BUDGET)?;
    Ok(format!("500 specs, worst channel error {worst:.2}/255, {took:.2?}"))
}

fn random_band(rng: &mut ChaCha8Rng) -> TongueBandSpec {
    let (w, h) = (rng.gen_range(96..=256u32), rng.gen_range(80..=200u32));
    let thickness = rng.gen_range(5.0..14.0);
    let n = rng.gen_range(3..=6);
    let x0 = rng.gen_range(0.0..w as f64 * 0.2);
    let x1 = rng.gen_range(w as f64 * 0.8..(w - 1) as f64);
    let control_points = (0..n)
        .map(|k| {
            let x = x0 + (x1 - x0) * k as f64 / (n - 1) as f64;
            Point2::new(x, rng.gen_range(h as f64 * 0.25..h as f64 * 0.6))
        })
        .collect();
    TongueBandSpec {
        frame: FrameDims::new(w, h),
        control_points,
        band_thickness: thickness,
        brightness: rng.gen_range(0.7..1.0),
        speckle_seed: rng.gen(),
        noise_level: rng.gen_range(0.0..=0.1),
    }
}

fn contour_closure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    let (mut specs, mut redraws, mut worst) = (0, 0, 0.0f64);
    while specs < 100 {
        let spec = random_band(&mut rng);
        let Ok((map, truth)) = generate_segmentation(&spec) else {
            redraws += 1;
            ensure(redraws < 1000, || "could not draw in-frame band specs".into())?;
            continue;
        };
        specs += 1;
        let mask = binarize(&map, 0.5);
        let got = extract_top_pixels(&mask, DEFAULT_MAX_GAP);
        let by_x: BTreeMap<i64, f64> = got.points.iter().map(|p| (p.x as i64, p.y)).collect();
        let errs: Vec<f64> = truth.points.iter().filter_map(|t| by_x.get(&(t.x as i64)).map(|y| y - t.y)).collect();
        ensure(errs.len() * 10 >= truth.len() * 9, || format!("spec {specs}: {} of {} columns found", errs.len(), truth.len()))?;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        worst = worst.max(rmse);
        ensure(rmse <= CONTOUR_RMSE_PX, || format!("spec {specs}: rmse {rmse:.3}"))?;
        let skel = skeletonize(&mask);
        ensure(skel.is_subset_of(&mask), || format!("spec {specs}: skeleton adds pixels"))?;
        ensure(skeletonize(&skel) == skel, || format!("spec {specs}: skeleton not idempotent"))?;
    }
    let took = within_budget(start, CONTOUR_BUDGET)?;
    Ok(format!("100 specs, worst RMSE {worst:.3} px, {took:.2?}"))
}

fn polyline(rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let n = rng.gen_range(1..120);
    let mut p = rand_point(rng, 0.0, 200.0);
    (0..n)
        .map(|_| {
            p = p + rand_point(rng, -4.0, 4.0);
            p
        })
        .collect()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dims = FrameDims::new(256, 256);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let (a, b) = (polyline(&mut rng), polyline(&mut rng));
        let nearest = |p: &Point2, set: &[Point2]| set.iter().map(|q| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
        let ab: Vec<f64> = a.iter().map(|p| nearest(p, &b)).collect();
        let ba: Vec<f64> = b.iter().map(|p| nearest(p, &a)).collect();
        let msd = (ab.iter().sum::<f64>() + ba.iter().sum::<f64>()) / (a.len() + b.len()) as f64;
        let hausdorff = ab.iter().chain(&ba).copied().fold(0.0, f64::max);
        let got = contour_distances(
            &TongueContour { points: a, source_dims: dims },
            &TongueContour { points: b, source_dims: dims },
        )
        .map_err(|e| e.to_string())?;
        let err = (got.msd - msd).abs().max((got.hausdorff - hausdorff).abs());
        worst = worst.max(err);
        ensure(err <= METRIC_TOL, || format!("pair {i}: {got:?} vs msd {msd} hausdorff {hausdorff}"))?;
        ensure(got.hausdorff >= got.msd, || format!("pair {i}: hausdorff below msd"))?;
    }
    Ok(format!("50 pairs, worst deviation {worst:.1e}"))
}

fn golden_composite() -> Result<(), String> {
    let rgb: [[u8; 3]; 9] = [
        [100, 50, 200],
        [100, 50, 200],
        [100, 50, 200],
        [10, 20, 30],
        [255, 255, 255],
        [1, 2, 3],
        [0, 0, 0],
        [6, 16, 26],
        [200, 100, 0],
    ];
    let us: [u8; 9] = [0, 80, 0, 100, 255, 0, 5, 0, 50];
    let us_alpha: [u8; 9] = [0, 255, 0, 255, 255, 0, 255, 255, 255];
    let pred: [u8; 9] = [0, 0, 255, 128, 0, 0, 0, 64, 0];
    let pred_alpha: [u8; 9] = [0, 0, 255, 255, 255, 0, 0, 255, 0];
    // 0.9 rgb + 0.4 us (where covered) + 1.0 pred (where covered), rounded, clamped.
    let expected: [[u8; 3]; 9] = [
        [90, 45, 180],
        [122, 77, 212],
        [255, 255, 255],
        [177, 186, 195],
        [255, 255, 255],
        [1, 2, 3],
        [2, 2, 2],
        [69, 78, 87],
        [200, 110, 20],
    ];
    let frame = |s, f, px: Vec<u8>| ImageFrame::new(s, 0, 3, 3, f, px).unwrap();
    let out = composite(
        &frame(StreamId::Rgb, PixelFormat::Rgb8, rgb.concat()),
        &WarpedImage { image: frame(StreamId::Us, PixelFormat::Gray8, us.to_vec()), alpha: us_alpha.to_vec() },
        &WarpedImage { image: frame(StreamId::Pred, PixelFormat::Gray8, pred.to_vec()), alpha: pred_alpha.to_vec() },
        &BlendWeights::new(0.9, 0.4, 1.0).unwrap(),
        &CompositeStyle::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    ensure(out.payload() == expected.concat().as_slice(), || format!("golden frame mismatch: {:?}", out.payload()))
}

fn compositor() -> Outcome {
    golden_composite()?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dims = FrameDims::new(16, 12);
    let n = dims.pixel_count();
    let style = CompositeStyle::default();
    for i in 0..100 {
        let mut bytes = |len: usize| (0..len).map(|_| rng.gen::<u8>()).collect::<Vec<u8>>();
        let rgb = ImageFrame::new(StreamId::Rgb, 0, 16, 12, PixelFormat::Rgb8, bytes(n * 3)).unwrap();
        let us = ImageFrame::new(StreamId::Us, 0, 16, 12, PixelFormat::Gray8, bytes(n)).unwrap();
        let pred = ImageFrame::new(StreamId::Pred, 0, 16, 12, PixelFormat::Gray8, bytes(n)).unwrap();
        let mut alpha = || (0..n).map(|_| if rng.gen() { 255 } else { 0 }).collect::<Vec<u8>>();
        let (us, pred) = (WarpedImage { image: us, alpha: alpha() }, WarpedImage { image: pred, alpha: alpha() });
        let lo: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let hi = lo.map(|w| rng.gen_range(w..=1.0));
        let run = |w: [f64; 3]| composite(&rgb, &us, &pred, &BlendWeights::new(w[0], w[1], w[2]).unwrap(), &style, None).unwrap();
        let (a, b) = (run(lo), run(hi));
        ensure(a.payload().iter().zip(b.payload()).all(|(x, y)| x <= y), || format!("pair {i}: raising weights darkened a pixel"))?;
    }
    Ok("golden 3x3 frame exact, 100 monotone weight pairs".into())
}

fn frames_of(src: &mut dyn FrameSource) -> Vec<ImageFrame> {
    let mut out = Vec::new();
    while let SourcePoll::Ready(f) = src.poll_frame().unwrap() {
        out.push(f);
    }
    out
}

fn gray(stream: StreamId, ts: u64) -> ImageFrame {
    ImageFrame::filled(stream, ts, FrameDims::new(1, 1), PixelFormat::Gray8, 0)
}

fn bundles(events: &[PairEvent]) -> Vec<&trainer_core::stream_sync::SyncedBundle> {
    events.iter().filter_map(|e| if let PairEvent::Bundle(b) = e { Some(b) } else { None }).collect()
}

fn sync_suite(tmp: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = PairerConfig::default();
    ensure(config.tolerance_us == SYNC_TOL_US, || format!("default tolerance {}", config.tolerance_us))?;

    let period = |i: u64| 1_000_000 + i * 1_000_000 / 30;
    let rgb: Vec<_> = (0..300).map(|i| gray(StreamId::Rgb, period(i))).collect();
    let us: Vec<_> = (0..300).map(|i| gray(StreamId::Us, (period(i) as i64 + rng.gen_range(-10_000..=10_000)) as u64)).collect();
    let events = pair_streams(rgb.clone(), us, None, config);
    let b = bundles(&events);
    ensure(b.len() == 300, || format!("{} bundles from 300 frames", b.len()))?;
    let worst = b.iter().map(|b| b.us_skew_us.unsigned_abs()).max().unwrap();
    ensure(worst <= SYNC_TOL_US && b.iter().all(|b| !b.us_held), || format!("worst skew {worst} us"))?;

    // Ultrasound goes silent from frame 60 to frame 100.
    let us: Vec<_> = (0..300).filter(|i| !(60..100).contains(i)).map(|i| gray(StreamId::Us, period(i))).collect();
    let events = pair_streams(rgb, us, None, config);
    let stalls: Vec<_> = events.iter().filter_map(|e| if let PairEvent::Stalled { at_us, .. } = e { Some(*at_us) } else { None }).collect();
    let resumes = events.iter().filter(|e| matches!(e, PairEvent::Resumed { .. })).count();
    let silent_from = period(59);
    ensure(stalls.len() == 1 && resumes == 1, || format!("{} stalls, {resumes} resumes", stalls.len()))?;
    let detected = stalls[0] - silent_from;
    ensure(detected > STALL_US && detected <= STALL_US + 1_000_000 / 30 + 1, || format!("stall flagged after {detected} us"))?;

    let session = tmp.join("sync-replay");
    let mut cfg = synthetic(30, 320, 240);
    cfg.record.dir = Some(session.clone());
    run_headless(cfg).map_err(|e| e.to_string())?;
    let reader = SessionReader::open(&session).map_err(|e| e.to_string())?;
    let read = |id| reader.read_frames(id).map_err(|e| e.to_string());
    let runs: Vec<Vec<PairEvent>> = (0..2).map(|_| Ok(pair_streams(read(StreamId::Rgb)?, read(StreamId::Us)?, None, config))).collect::<Result<_, String>>()?;
    ensure(runs[0] == runs[1], || "replayed pairings differ between runs".into())?;
    let live = pair_streams(
        frames_of(&mut SyntheticCamera::new(params(30, 320, 240), StreamId::Rgb)),
        frames_of(&mut SyntheticUltrasound::new(params(30, 160, 120), StreamId::Us)),
        None,
        config,
    );
    let key = |e: &[PairEvent]| bundles(e).iter().map(|b| (b.bundle_ts_us, b.us.timestamp_us, b.us_skew_us)).collect::<Vec<_>>();
    ensure(key(&runs[0]) == key(&live), || "replayed pairings differ from the live pairing".into())?;
    Ok(format!("worst skew {worst} us, stall flagged {:.1} ms after silence, replay stable", detected as f64 / 1000.0))
}

fn params(frames: u64, width: u32, height: u32) -> SyntheticParams {
    SyntheticParams {
        seed: 21,
        frames: Some(frames),
        width: Some(width),
        height: Some(height),
        ..SyntheticParams::default()
    }
}

fn synthetic(frames: u64, width: u32, height: u32) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.sources.rgb = SourceSpec::Synthetic(params(frames, width, height));
    cfg.sources.us = SourceSpec::Synthetic(params(frames, 160, 120));
    cfg.sources.audio = Some(SourceSpec::Synthetic(SyntheticParams {
        seed: 21,
        frames: Some(frames),
        ..SyntheticParams::default()
    }));
    cfg.record.session_id = Some("acceptance".into());
    cfg.record.created_at = Some("2026-01-01T00:00:00Z".into());
    cfg
}

fn tree(dir: &Path) -> std::io::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn end_to_end(tmp: &Path) -> Outcome {
    let mut trees = Vec::new();
    for run in 0..2 {
        let dir = tmp.join(format!("e2e-{run}"));
        let mut cfg = synthetic(90, 640, 480);
        cfg.record.dir = Some(dir.clone());
        let s = run_headless(cfg).map_err(|e| e.to_string())?;
        ensure(s.bundles == 90, || format!("run {run}: {} bundles", s.bundles))?;
        trees.push(tree(&dir).map_err(|e| e.to_string())?);
    }
    ensure(trees[0].len() > 90 * 4, || format!("only {} files recorded", trees[0].len()))?;
    if trees[0] != trees[1] {
        let differing: Vec<_> = trees[0].keys().filter(|k| trees[0].get(*k) != trees[1].get(*k)).take(3).collect();
        return Err(format!("recorded sessions differ, e.g. {differing:?}"));
    }
    let s = run_headless(synthetic(90, 640, 480)).map_err(|e| e.to_string())?;
    ensure(s.bundles_per_s >= MIN_BUNDLES_PER_S, || format!("{:.1} bundles/s", s.bundles_per_s))?;
    Ok(format!(
        "{} files byte-identical across runs, {:.1} bundles/s at 640x480 (mean latency {} us)",
        trees[0].len(),
        s.bundles_per_s,
        s.mean_latency_us.total_us
    ))
}

fn comparable(m: &SessionManifest) -> SessionManifest {
    SessionManifest { config: None, ..m.clone() }
}

fn session_round_trip(tmp: &Path) -> Outcome {
    let first = tmp.join("rt-first");
    let mut cfg = synthetic(30, 320, 240);
    cfg.record.dir = Some(first.clone());
    run_headless(cfg.clone()).map_err(|e| e.to_string())?;

    let second = tmp.join("rt-second");
    let mut replay = cfg;
    replay.sources.rgb = SourceSpec::Replay(first.clone());
    replay.sources.us = SourceSpec::Replay(first.clone());
    replay.sources.audio = Some(SourceSpec::Replay(first.clone()));
    replay.record.dir = Some(second.clone());
    run_headless(replay).map_err(|e| e.to_string())?;

    let open = |d: &Path| SessionReader::open(d).map_err(|e| e.to_string());
    let (a, b) = (open(&first)?, open(&second)?);
    ensure(comparable(a.manifest()) == comparable(b.manifest()), || "manifests differ after record-replay-record".into())?;
    for id in [StreamId::Rgb, StreamId::Us, StreamId::Pred, StreamId::Composite] {
        let fa = a.read_frames(id).map_err(|e| e.to_string())?;
        ensure(fa == b.read_frames(id).map_err(|e| e.to_string())?, || format!("{id:?} frames differ"))?;
    }
    b.verify().map_err(|e| e.to_string())?;

    let victim = second.join(&b.manifest().stream(StreamId::Us).unwrap().frames[3].file);
    let bytes = std::fs::read(&victim).map_err(|e| e.to_string())?;
    std::fs::write(&victim, &bytes[..bytes.len() / 2]).map_err(|e| e.to_string())?;
    let caught = SessionReader::open(&second).and_then(|r| r.verify());
    ensure(caught.is_err(), || "truncated frame file passed verification".into())?;
    Ok(format!("{} frames per stream match, truncation reported: {}", a.manifest().streams[0].frame_count, caught.unwrap_err()))
}

fn slippage_csv() -> String {
    // Per-trial deviations per axis, in column order x y z roll yaw pitch.
    let loose: [[f64; 6]; 5] = [
        [1.0, 0.5, 2.0, 1.0, 0.0, 2.0],
        [1.0, 0.5, 4.0, 2.0, 0.0, 2.0],
        [3.0, 0.5, 2.0, 3.0, 0.0, 2.0],
        [3.0, 0.5, 4.0, 4.0, 0.0, 2.0],
        [2.0, 0.5, 3.0, 5.0, 5.0, 2.0],
    ];
    let tight: [[f64; 6]; 5] = [
        [0.5, 0.0, 1.0, 0.5, 1.0, 0.0],
        [0.5, 0.0, 1.0, 1.5, 1.0, 1.0],
        [0.5, 0.0, 1.0, 0.5, 1.0, 0.0],
        [0.5, 0.0, 1.0, 1.5, 1.0, 1.0],
        [0.5, 0.0, 1.0, 1.0, 1.0, 0.5],
    ];
    let base = [10.0, -3.0, 0.25, 1.0, 2.0, -1.0];
    let mut csv = String::from("trial,t_us,x,y,z,roll,yaw,pitch,condition\n");
    for (cond, trials) in [("loose", loose), ("tight", tight)] {
        for (k, dev) in trials.iter().enumerate() {
            let rows = [base, std::array::from_fn(|a| base[a] + dev[a]), std::array::from_fn(|a| base[a] - dev[a] / 2.0)];
            for (t, row) in rows.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                csv += &format!("{cond}{k},{},{},{cond}\n", 1000 * t, cells.join(","));
            }
        }
    }
    csv
}

fn slippage() -> Outcome {
    let table = summarize(&read_trials_csv(slippage_csv().as_bytes()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    // (mean, std) per axis x y z roll yaw pitch, population std.
    let expected = [
        ("loose", [(2.0, 0.8f64.sqrt()), (0.5, 0.0), (3.0, 0.8f64.sqrt()), (3.0, 2.0f64.sqrt()), (1.0, 2.0), (2.0, 0.0)]),
        ("tight", [(0.5, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 0.2f64.sqrt()), (1.0, 0.0), (0.5, 0.2f64.sqrt())]),
    ];
    ensure(table.rows.len() == 2, || format!("{} condition rows", table.rows.len()))?;
    for (row, (cond, axes)) in table.rows.iter().zip(expected) {
        ensure(row.condition.as_deref() == Some(cond), || format!("row condition {:?}", row.condition))?;
        ensure(row.report.trial_count == 5, || format!("{cond}: {} trials", row.report.trial_count))?;
        let (t, r) = (&row.report.translational_mm, &row.report.rotational_deg);
        for (name, (got, want)) in ["x", "y", "z", "roll", "yaw", "pitch"].iter().zip([t.x, t.y, t.z, r.roll, r.yaw, r.pitch].iter().zip(axes)) {
            ensure(got.mean == want.0 && got.std == want.1, || format!("{cond} {name}: {got:?}, want {want:?}"))?;
        }
    }
    let json = serde_json::to_value(&table).map_err(|e| e.to_string())?;
    for key in ["translational_mm", "rotational_deg"] {
        ensure(json["rows"][0].get(key).is_some(), || format!("report lacks {key}"))?;
    }
    ensure(json["rows"][1]["rotational_deg"]["yaw"]["mean"] == 1.0, || "nested report shape".into())?;
    Ok("10 trials, loose/tight means and stds exact".into())
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("pose math", Box::new(pose_math)),
        ("detector", Box::new(detector)),
        ("augmentation consistency", Box::new(augmentation)),
        ("contour closure", Box::new(contour_closure)),
        ("metric oracle", Box::new(metric_oracle)),
        ("compositor", Box::new(compositor)),
        ("sync", Box::new(|| sync_suite(tmp.path()))),
        ("end-to-end determinism and throughput", Box::new(|| end_to_end(tmp.path()))),
        ("session round trip", Box::new(|| session_round_trip(tmp.path()))),
        ("slippage", Box::new(slippage)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
