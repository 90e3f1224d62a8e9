use std::path::Path;
use std::time::Duration;

use serde_json::{json, Value};
use trainer_core::service::{run_headless, Pipeline, PipelineConfig, PipelineHandle, Published, Subscription};
use trainer_core::stream_sync::{FrameSource, SourcePoll, SourceSpec, StubHub, SyntheticCamera, SyntheticParams, SyntheticUltrasound};
use trainer_core::{ImageFrame, StreamId};

const WAIT: Duration = Duration::from_secs(10);

fn params(seed: u64, frames: u64) -> SyntheticParams {
    SyntheticParams {
        seed,
        frames: Some(frames),
        width: Some(200),
        height: Some(150),
        ..SyntheticParams::default()
    }
}

fn synthetic_config(seed: u64, frames: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.sources.rgb = SourceSpec::Synthetic(params(seed, frames));
    cfg.sources.us = SourceSpec::Synthetic(SyntheticParams {
        width: Some(120),
        height: Some(90),
        ..params(seed, frames)
    });
    cfg
}

fn drain(src: &mut dyn FrameSource) -> Vec<ImageFrame> {
    let mut out = Vec::new();
    while let SourcePoll::Ready(f) = src.poll_frame().unwrap() {
        out.push(f);
    }
    out
}

/// A pipeline fed by hand through stub sources.
struct Fed {
    handle: PipelineHandle,
    sub: Subscription,
    rgb: Vec<ImageFrame>,
    us: Vec<ImageFrame>,
    next: usize,
}

impl Fed {
    fn start(mut cfg: PipelineConfig, frames: u64) -> Fed {
        let p = params(11, frames);
        let rgb = drain(&mut SyntheticCamera::new(p.clone(), StreamId::Rgb));
        let us = drain(&mut SyntheticUltrasound::new(
            SyntheticParams {
                width: Some(120),
                height: Some(90),
                ..p
            },
            StreamId::Us,
        ));
        cfg.sources.rgb = SourceSpec::Stub("cam".into());
        cfg.sources.us = SourceSpec::Stub("probe".into());
        let (handle, sub) = Pipeline::start_subscribed(cfg, StubHub::new(), 10_000).unwrap();
        Fed {
            handle,
            sub,
            rgb,
            us,
            next: 0,
        }
    }

    /// Pushes the next frame pair and returns the published composite.
    fn step(&mut self) -> ImageFrame {
        let i = self.next;
        self.next += 1;
        assert!(self.handle.push_frame("probe", self.us[i].clone()));
        assert!(self.handle.push_frame("cam", self.rgb[i].clone()));
        loop {
            match self.sub.recv_timeout(WAIT).expect("composite published") {
                Published::Frame(f) if f.stream_id == StreamId::Composite => {
                    assert_eq!(f.timestamp_us, self.rgb[i].timestamp_us);
                    return f;
                }
                _ => {}
            }
        }
    }

    fn text(&self, msg: Value) -> Value {
        serde_json::from_str(&self.handle.handle_text(&msg.to_string())).unwrap()
    }
}

#[test]
fn freeze_repeats_the_frozen_composite_then_live_resumes() {
    let mut fed = Fed::start(PipelineConfig::default(), 40);
    let before: Vec<_> = (0..3).map(|_| fed.step()).collect();
    let r = fed.text(json!({"id": 1, "type": "freeze"}));
    assert_eq!(r, json!({"re": 1, "ok": true, "frozen": true}));
    for _ in 0..30 {
        assert_eq!(fed.step().payload(), before[2].payload());
    }
    let r = fed.text(json!({"id": 2, "type": "unfreeze"}));
    assert_eq!(r["ok"], true);
    let live = fed.step();
    assert_ne!(live.payload(), before[2].payload());
}

#[test]
fn recording_continues_live_while_frozen() {
    let tmp = tempfile::tempdir().unwrap();
    let mut fed = Fed::start(PipelineConfig::default(), 12);
    fed.step();
    let dir = tmp.path().join("frozen-rec");
    let r = fed.text(json!({"id": "a", "type": "start_record", "dir": dir}));
    assert_eq!(r["ok"], true, "{r}");
    let again = fed.text(json!({"id": "b", "type": "start_record", "dir": dir}));
    assert_eq!(again["error"]["code"], "already_recording");
    fed.text(json!({"id": "c", "type": "freeze"}));
    let shown: Vec<_> = (0..5).map(|_| fed.step()).collect();
    assert!(shown.windows(2).all(|w| w[0].payload() == w[1].payload()));
    let r = fed.text(json!({"id": "d", "type": "stop_record"}));
    assert_eq!(r["bundles"], 5);
    let recorded = trainer_core::session_io::SessionReader::open(&dir)
        .unwrap()
        .read_frames(StreamId::Composite)
        .unwrap();
    assert_eq!(recorded.len(), 5);
    assert_ne!(recorded[0].payload(), recorded[4].payload());
    let r = fed.text(json!({"id": "e", "type": "stop_record"}));
    assert_eq!(r["error"]["code"], "not_recording");
}

#[test]
fn zero_weights_turn_the_composite_black() {
    let mut cfg = PipelineConfig::default();
    cfg.guideline = false;
    let mut fed = Fed::start(cfg, 6);
    assert!(fed.step().payload().iter().any(|&v| v > 0));
    let r = fed.text(json!({"id": 7, "type": "set_weights", "w_rgb": 0.0, "w_us": 0.0, "w_pred": 0.0}));
    assert_eq!(r["ok"], true);
    for _ in 0..3 {
        assert!(fed.step().payload().iter().all(|&v| v == 0));
    }
    let bad = fed.text(json!({"id": 8, "type": "set_weights", "w_rgb": 1.5, "w_us": 0.0, "w_pred": 0.0}));
    assert_eq!(bad["error"]["code"], "invalid_weights");
}

#[test]
fn every_control_message_is_answered_with_its_id() {
    let fed = Fed::start(PipelineConfig::default(), 1);
    for (i, ty) in ["get_status", "freeze", "unfreeze", "get_metrics", "stop_record", "reboot"].iter().enumerate() {
        let r = fed.text(json!({"id": i, "type": ty}));
        assert_eq!(r["re"], i, "{ty}");
        assert!(r["ok"].is_boolean());
    }
    let status = fed.text(json!({"id": 0, "type": "get_status"}));
    for key in ["bundles", "skipped", "mean_latency_us", "source_drops", "subscriber_drops", "weights", "frozen"] {
        assert!(status["status"].get(key).is_some(), "{key}");
    }
    let metrics = fed.text(json!({"id": 0, "type": "get_metrics"}));
    assert_eq!(metrics["error"]["code"], "no_reference_selected");
    let missing = fed.text(json!({"id": 0, "type": "select_reference", "session": "/nonexistent/ref"}));
    assert_eq!(missing["error"]["code"], "reference_not_found");
}

fn bundle_metrics(sub: &Subscription) -> Vec<Value> {
    let mut out = Vec::new();
    while let Some(item) = sub.recv_timeout(WAIT) {
        if let Published::Event(e) = item {
            let v: Value = serde_json::from_str(&e).unwrap();
            match v["event"].as_str() {
                Some("bundle") => out.push(v["metrics"].clone()),
                Some("ended") => break,
                _ => {}
            }
        }
    }
    out
}

fn record(cfg: PipelineConfig, dir: &Path) {
    let mut cfg = cfg;
    cfg.record.dir = Some(dir.to_path_buf());
    run_headless(cfg).unwrap();
}

#[test]
fn session_replayed_against_itself_has_zero_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    record(synthetic_config(4, 15), &a);
    let mut cfg = PipelineConfig::default();
    cfg.sources.rgb = SourceSpec::Replay(a.clone());
    cfg.sources.us = SourceSpec::Replay(a.clone());
    cfg.reference_session = Some(a);
    let (handle, sub) = Pipeline::start_subscribed(cfg, StubHub::new(), 10_000).unwrap();
    let metrics = bundle_metrics(&sub);
    handle.wait().unwrap();
    assert_eq!(metrics.len(), 15);
    for m in metrics {
        assert_eq!(m["msd"], 0.0);
    }
}

fn shifted_reference_metrics(arch: f64) -> Vec<f64> {
    let tmp = tempfile::tempdir().unwrap();
    let shifted = tmp.path().join("shifted");
    let config = |shift_y: f64| {
        let mut cfg = synthetic_config(9, 20);
        if let SourceSpec::Synthetic(p) = &mut cfg.sources.us {
            p.shift_y = shift_y;
            p.arch = arch;
        }
        cfg
    };
    record(config(5.0), &shifted);
    let mut live = config(0.0);
    live.reference_session = Some(shifted);
    let (handle, sub) = Pipeline::start_subscribed(live, StubHub::new(), 10_000).unwrap();
    let metrics = bundle_metrics(&sub);
    handle.wait().unwrap();
    metrics.iter().map(|m| m["msd"].as_f64().unwrap()).collect()
}

#[test]
fn flat_reference_shifted_five_pixels_is_five_away() {
    let msd = shifted_reference_metrics(0.0);
    assert_eq!(msd.len(), 20);
    for d in msd {
        assert!((d - 5.0).abs() <= 0.1, "msd {d}");
    }
}

#[test]
fn arched_reference_shift_is_shortened_by_the_slope() {
    // Nearest-point distance across a vertical offset d on a slope s is
    // d / sqrt(1 + s^2); the synthetic dome stays well under s = 1.5.
    let lower = 5.0 / (1.0f64 + 1.5 * 1.5).sqrt();
    for d in shifted_reference_metrics(1.0) {
        assert!(d > lower && d <= 5.0 + 0.1, "msd {d}");
    }
}

#[test]
fn slow_subscriber_never_stalls_the_pipeline() {
    let (handle, sub) = Pipeline::start_subscribed(synthetic_config(1, 30), StubHub::new(), 2).unwrap();
    let summary = handle.wait().unwrap();
    assert_eq!(summary.bundles, 30);
    assert!(sub.drops() > 0);
    assert_eq!(summary.subscriber_drops, sub.drops());
}

#[test]
fn stub_ultrasound_pushed_as_a_client() {
    let mut cfg = synthetic_config(2, 10);
    cfg.sources.us = SourceSpec::Stub("remote".into());
    let hub = StubHub::new();
    let (handle, sub) = Pipeline::start_subscribed(cfg, hub, 10_000).unwrap();
    let us = drain(&mut SyntheticUltrasound::new(params(2, 10), StreamId::Us));
    for f in us {
        assert!(handle.push_frame("remote", f));
    }
    assert!(!handle.push_frame("nobody", ImageFrame::filled(StreamId::Us, 0, trainer_core::FrameDims::new(1, 1), trainer_core::PixelFormat::Gray8, 0)));
    let summary = handle.wait().unwrap();
    assert_eq!(summary.bundles + summary.skipped, 10);
    drop(sub);
}
