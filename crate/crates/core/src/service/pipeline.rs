use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender, TryRecvError, TrySendError};
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::PipelineConfig;
use super::processing::{Processor, StageLatency};
use super::protocol::{parse_control, reply_err, reply_ok, ControlError, ControlRequest};
use super::reference::{compare_with_reference, ReferenceTrack};
use super::ServiceError;
use crate::compositor::BlendWeights;
use crate::frame::{AudioChunk, ImageFrame, StreamId};
use crate::marker_tracking::ColorBlobDetector;
use crate::pose_calibration::CalibrationProfile;
use crate::session_io::{Recorder, RecorderOptions, SessionError};
use crate::stream_sync::{
    make_audio_source, make_source, spawn_audio, spawn_frames, PairEvent, Pairer, PairerConfig, QueuePolicy, Received,
    SourceHandle, StubHub, SyncError, SyncedBundle,
};
use crate::tongue_contour::{ContourDistances, ContourRecord, IntensityProvider};

const POLL: Duration = Duration::from_millis(5);

/// Something sent to subscribers: an encoded-later frame or a JSON event.
#[derive(Debug, Clone)]
pub enum Published {
    Frame(ImageFrame),
    Event(Arc<str>),
}

/// Receiving end of a subscriber queue. When full, the oldest item is
/// discarded and counted.
pub struct Subscription {
    rx: Receiver<Published>,
    drops: Arc<AtomicU64>,
}

impl Subscription {
    /// `None` on timeout or once the pipeline has stopped.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Published> {
        self.rx.recv_timeout(timeout).ok()
    }

    pub fn try_recv(&self) -> Option<Published> {
        self.rx.try_recv().ok()
    }

    /// True once the pipeline has stopped and the queue is drained.
    pub fn is_closed(&self) -> bool {
        matches!(self.rx.try_recv(), Err(TryRecvError::Disconnected)) && self.rx.is_empty()
    }

    pub fn drops(&self) -> u64 {
        self.drops.load(Ordering::Relaxed)
    }
}

struct Subscriber {
    tx: Sender<Published>,
    rx: Receiver<Published>,
    drops: Arc<AtomicU64>,
}

impl Subscriber {
    /// False once the receiving side is gone.
    fn offer(&self, mut item: Published) -> bool {
        // The queue's own receiver keeps the channel open, so a dropped
        // subscription shows up only through the shared counter.
        if Arc::strong_count(&self.drops) == 1 {
            return false;
        }
        loop {
            match self.tx.try_send(item) {
                Ok(()) => return true,
                Err(TrySendError::Full(i)) => {
                    if self.rx.try_recv().is_ok() {
                        self.drops.fetch_add(1, Ordering::Relaxed);
                    }
                    item = i;
                }
                Err(TrySendError::Disconnected(_)) => return false,
            }
        }
    }
}

enum Command {
    Control(ControlRequest, Sender<Result<Map<String, Value>, ControlError>>),
    Subscribe(usize, Sender<Subscription>),
    Stop,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub bundles: u64,
    pub skipped: u64,
    pub held: u64,
    pub stalls: u64,
    pub source_drops: u64,
    pub subscriber_drops: u64,
    pub mean_latency_us: StageLatency,
    pub wall_s: f64,
    pub bundles_per_s: f64,
    /// Sessions finished during the run, in order.
    pub sessions: Vec<PathBuf>,
}

/// Entry point for starting a pipeline thread.
pub struct Pipeline;

impl Pipeline {
    /// Validates the config, opens every source and the startup recording,
    /// then runs the pipeline on its own thread.
    pub fn start(config: PipelineConfig, hub: StubHub) -> Result<PipelineHandle, ServiceError> {
        Self::launch(config, hub, None).map(|(h, _)| h)
    }

    /// Like [`Pipeline::start`], with a subscription that sees every
    /// published item from the first bundle on.
    pub fn start_subscribed(
        config: PipelineConfig,
        hub: StubHub,
        capacity: usize,
    ) -> Result<(PipelineHandle, Subscription), ServiceError> {
        Self::launch(config, hub, Some(capacity)).map(|(h, s)| (h, s.expect("requested")))
    }

    fn launch(
        config: PipelineConfig,
        hub: StubHub,
        subscribe: Option<usize>,
    ) -> Result<(PipelineHandle, Option<Subscription>), ServiceError> {
        config.validate()?;
        let calibration = match &config.calibration {
            Some(p) => Some(CalibrationProfile::load(p)?),
            None => None,
        };
        let cap = config.sync.queue_capacity;
        let src = &config.sources;
        let rgb = spawn_frames(make_source(&src.rgb, StreamId::Rgb, &hub)?, cap);
        let us = spawn_frames(make_source(&src.us, StreamId::Us, &hub)?, cap);
        let audio = match &src.audio {
            Some(s) => Some(spawn_audio(make_audio_source(s)?, cap)),
            None => None,
        };
        let reference_src = match &src.reference {
            Some(s) => Some(spawn_frames(make_source(s, StreamId::Ref, &hub)?, cap)),
            None => None,
        };
        let reference = match &config.reference_session {
            Some(dir) => Some(ReferenceTrack::load(dir)?),
            None => None,
        };
        let processor = Processor::new(
            Box::new(ColorBlobDetector::new(config.detector.color_blob.clone())),
            Box::new(IntensityProvider),
            config.segmentation.clone(),
            calibration,
            config.auto_calibration.clone(),
            config.style,
            config.guideline,
        );
        let pairer = Pairer::new(
            PairerConfig {
                tolerance_us: config.sync.tolerance_us,
                stall_timeout_us: config.sync.stall_timeout_us,
            },
            audio.is_some(),
        );
        let (cmd_tx, cmd_rx) = crossbeam_channel::unbounded();
        let mut runner = Runner {
            weights: config.weights,
            recorder: None,
            recorded_bundles: 0,
            processor,
            pairer,
            rgb,
            us,
            audio,
            reference_src,
            reference,
            last_metrics: None,
            frozen: None,
            freeze_requested: false,
            last_composite: None,
            subscribers: Vec::new(),
            subscriber_drops: 0,
            commands: cmd_rx,
            stop: false,
            stats: Stats::default(),
            last_record_error: None,
            config,
        };
        if let Some(dir) = runner.config.record.dir.clone() {
            let opts = runner.recorder_options(true);
            runner.recorder = Some(Recorder::create(&dir, opts)?);
        }
        let subscription = subscribe.map(|capacity| runner.add_subscriber(capacity));
        let thread = std::thread::Builder::new()
            .name("pipeline".into())
            .spawn(move || runner.run())
            .expect("spawning pipeline thread");
        let handle = PipelineHandle {
            commands: cmd_tx,
            thread: Mutex::new(Some(thread)),
            hub,
        };
        Ok((handle, subscription))
    }
}

/// Client-side handle. Dropping it stops the pipeline.
pub struct PipelineHandle {
    commands: Sender<Command>,
    thread: Mutex<Option<JoinHandle<Result<RunSummary, ServiceError>>>>,
    hub: StubHub,
}

impl PipelineHandle {
    pub fn control(&self, request: ControlRequest) -> Result<Map<String, Value>, ControlError> {
        let stopped = || ControlError::new("stopped", "pipeline is not running");
        let (tx, rx) = crossbeam_channel::bounded(1);
        self.commands.send(Command::Control(request, tx)).map_err(|_| stopped())?;
        rx.recv().map_err(|_| stopped())?
    }

    /// Answers one JSON control message with the JSON reply.
    pub fn handle_text(&self, text: &str) -> String {
        match parse_control(text) {
            Ok(msg) => match self.control(msg.request) {
                Ok(body) => reply_ok(&msg.id, body),
                Err(e) => reply_err(&msg.id, &e),
            },
            Err(reply) => reply,
        }
    }

    pub fn subscribe(&self, capacity: usize) -> Result<Subscription, ServiceError> {
        let (tx, rx) = crossbeam_channel::bounded(1);
        self.commands
            .send(Command::Subscribe(capacity, tx))
            .map_err(|_| ServiceError::Stopped)?;
        rx.recv().map_err(|_| ServiceError::Stopped)
    }

    /// Feeds a frame to the `stub:<id>` source. False if no such source.
    pub fn push_frame(&self, stub_id: &str, frame: ImageFrame) -> bool {
        self.hub.push(stub_id, frame)
    }

    pub fn hub(&self) -> &StubHub {
        &self.hub
    }

    pub fn is_finished(&self) -> bool {
        self.thread.lock().unwrap().as_ref().map_or(true, |t| t.is_finished())
    }

    pub fn stop(&self) {
        let _ = self.commands.send(Command::Stop);
    }

    /// Blocks until the sources end or [`PipelineHandle::stop`] is called.
    /// Only the first call gets the summary.
    pub fn wait(&self) -> Result<RunSummary, ServiceError> {
        let t = self.thread.lock().unwrap().take().ok_or(ServiceError::Stopped)?;
        t.join().unwrap_or(Err(ServiceError::Stopped))
    }
}

impl Drop for PipelineHandle {
    fn drop(&mut self) {
        if let Some(t) = self.thread.get_mut().unwrap().take() {
            let _ = self.commands.send(Command::Stop);
            let _ = t.join();
        }
    }
}

/// Runs until the camera source ends, without any client attached.
pub fn run_headless(config: PipelineConfig) -> Result<RunSummary, ServiceError> {
    Pipeline::start(config, StubHub::new())?.wait()
}

#[derive(Default)]
struct Stats {
    bundles: u64,
    held: u64,
    stalls: u64,
    stalled: bool,
    last_skew_us: Option<i64>,
    last_audio_rms: Option<f64>,
    latency_sum: StageLatency,
    first_bundle: Option<Instant>,
    sessions: Vec<PathBuf>,
}

struct Runner {
    config: PipelineConfig,
    weights: BlendWeights,
    processor: Processor,
    pairer: Pairer,
    rgb: SourceHandle<ImageFrame>,
    us: SourceHandle<ImageFrame>,
    audio: Option<SourceHandle<AudioChunk>>,
    reference_src: Option<SourceHandle<ImageFrame>>,
    reference: Option<ReferenceTrack>,
    last_metrics: Option<(u64, Option<ContourDistances>)>,
    recorder: Option<Recorder>,
    recorded_bundles: u64,
    last_record_error: Option<String>,
    frozen: Option<ImageFrame>,
    freeze_requested: bool,
    last_composite: Option<ImageFrame>,
    subscribers: Vec<Subscriber>,
    subscriber_drops: u64,
    commands: Receiver<Command>,
    stop: bool,
    stats: Stats,
}

fn fail(stream: StreamId, detail: String) -> ServiceError {
    ServiceError::Sync(SyncError::SourceFailed { stream, detail })
}

impl Runner {
    fn run(mut self) -> Result<RunSummary, ServiceError> {
        let started = Instant::now();
        let result = self.main_loop();
        if let Some(rec) = self.recorder.take() {
            let dir = rec.dir().to_path_buf();
            match rec.finish() {
                Ok(_) => self.stats.sessions.push(dir),
                Err(e) => log::error!("finishing recording in {}: {e}", dir.display()),
            }
        }
        self.publish_event(json!({"event": "ended"}));
        result?;
        let n = self.stats.bundles;
        let wall_s = started.elapsed().as_secs_f64();
        let active_s = self.stats.first_bundle.map_or(0.0, |t| t.elapsed().as_secs_f64());
        Ok(RunSummary {
            bundles: n,
            skipped: self.pairer.skipped(),
            held: self.stats.held,
            stalls: self.stats.stalls,
            source_drops: self.source_drops(),
            subscriber_drops: self.total_subscriber_drops(),
            mean_latency_us: self.stats.latency_sum.divided(n),
            wall_s,
            bundles_per_s: if active_s > 0.0 { n as f64 / active_s } else { 0.0 },
            sessions: std::mem::take(&mut self.stats.sessions),
        })
    }

    fn main_loop(&mut self) -> Result<(), ServiceError> {
        let mut events = Vec::new();
        loop {
            self.service_commands();
            if self.stop {
                return Ok(());
            }
            let frame = match self.rgb.recv_timeout(POLL) {
                Received::Item(f) => f,
                Received::Timeout => continue,
                Received::Ended => return Ok(()),
                Received::Failed(e) => return Err(fail(StreamId::Rgb, e)),
            };
            let t = frame.timestamp_us;
            self.fill_us(t)?;
            self.fill_audio(t);
            self.fill_reference();
            if self.stop {
                return Ok(());
            }
            self.pairer.pair(frame, &mut events);
            for ev in events.drain(..) {
                self.handle_event(ev)?;
            }
        }
    }

    /// Waits until the ultrasound frame for `t` is decided. Lossless sources
    /// are waited on for as long as it takes; live ones for about two
    /// tolerance windows of wall time.
    fn fill_us(&mut self, t: u64) -> Result<(), ServiceError> {
        let live = self.us.policy() == QueuePolicy::DropOldest;
        let deadline = Instant::now() + Duration::from_micros(2 * self.config.sync.tolerance_us);
        while !self.pairer.us_decided(t) && !self.stop {
            match self.us.recv_timeout(POLL) {
                Received::Item(f) => self.pairer.push_us(f),
                Received::Ended => self.pairer.end_us(),
                Received::Failed(e) => return Err(fail(StreamId::Us, e)),
                Received::Timeout => {
                    if live && Instant::now() >= deadline {
                        break;
                    }
                }
            }
            self.service_commands();
        }
        Ok(())
    }

    fn fill_audio(&mut self, t: u64) {
        let Some(audio) = self.audio.as_mut() else {
            return;
        };
        let live = audio.policy() == QueuePolicy::DropOldest;
        let deadline = Instant::now() + Duration::from_micros(2 * self.config.sync.tolerance_us);
        while !self.pairer.audio_decided(t) && !self.stop {
            match audio.recv_timeout(POLL) {
                Received::Item(c) => self.pairer.push_audio(c),
                Received::Ended => self.pairer.end_audio(),
                Received::Failed(e) => {
                    log::warn!("audio source failed, continuing without audio: {e}");
                    self.pairer.end_audio();
                }
                Received::Timeout => {
                    if live && Instant::now() >= deadline {
                        break;
                    }
                }
            }
        }
    }

    fn fill_reference(&mut self) {
        if let Some(r) = self.reference_src.as_mut() {
            while let Received::Item(f) = r.try_recv() {
                self.pairer.push_reference(f);
            }
        }
    }

    fn handle_event(&mut self, ev: PairEvent) -> Result<(), ServiceError> {
        match ev {
            PairEvent::Bundle(b) => self.handle_bundle(b),
            PairEvent::Stalled { stream, silent_us, at_us } => {
                log::warn!("{stream} source silent for {silent_us} us at {at_us}");
                self.stats.stalls += 1;
                self.stats.stalled = true;
                self.publish_event(json!({"event": "stalled", "stream": stream.as_str(), "silent_us": silent_us, "at_us": at_us}));
                Ok(())
            }
            PairEvent::Resumed { stream, at_us } => {
                log::info!("{stream} source resumed at {at_us}");
                self.stats.stalled = false;
                self.publish_event(json!({"event": "resumed", "stream": stream.as_str(), "at_us": at_us}));
                Ok(())
            }
        }
    }

    fn handle_bundle(&mut self, b: SyncedBundle) -> Result<(), ServiceError> {
        let out = self.processor.process(&b, &self.weights)?;
        let ts = b.bundle_ts_us;
        self.stats.bundles += 1;
        self.stats.first_bundle.get_or_insert_with(Instant::now);
        self.stats.held += b.us_held as u64;
        self.stats.last_skew_us = Some(b.us_skew_us);
        self.stats.last_audio_rms = b.audio.as_ref().map(AudioChunk::rms);
        self.stats.latency_sum.add(&out.latency);

        let metrics = self.reference.as_mut().map(|track| {
            let m = track.contour_at(ts).and_then(|r| compare_with_reference(&out.contour, &r.contour));
            self.last_metrics = Some((ts, m));
            m
        });

        if self.freeze_requested {
            self.frozen = Some(out.composite.clone());
            self.freeze_requested = false;
        }
        let shown = match &self.frozen {
            Some(f) => f.with_timestamp(ts),
            None => out.composite.clone(),
        };
        self.publish(Published::Frame(b.rgb.clone()));
        self.publish(Published::Frame(b.us.clone()));
        self.publish(Published::Frame(out.pred.clone()));
        self.publish(Published::Frame(shown));
        if let Some(r) = &b.reference {
            self.publish(Published::Frame(r.clone()));
        }
        let mut event = json!({
            "event": "bundle",
            "ts_us": ts,
            "us_skew_us": b.us_skew_us,
            "us_held": b.us_held,
            "ref_skew_us": b.ref_skew_us,
            "audio_rms": self.stats.last_audio_rms,
            "markers_fresh": out.markers_fresh,
            "contour_points": out.contour.len(),
        });
        if let Some(m) = metrics {
            event["metrics"] = metrics_json(m);
        }
        self.publish_event(event);

        if self.recorder.is_some() {
            let record = ContourRecord {
                frame_index: self.recorded_bundles,
                bundle_ts_us: ts,
                contour: out.contour.clone(),
            };
            let cal = self.processor.calibration().cloned();
            let rec = self.recorder.as_mut().unwrap();
            rec.set_calibration(cal);
            let written: Result<(), SessionError> = (|| {
                rec.write_frame(&b.rgb)?;
                rec.write_frame(&b.us)?;
                rec.write_frame(&out.pred)?;
                rec.write_frame(&out.composite)?;
                rec.write_contour(&record)?;
                if let Some(a) = &b.audio {
                    rec.write_audio(a)?;
                }
                Ok(())
            })();
            self.recorded_bundles += 1;
            if let Err(e) = written {
                log::error!("recording stopped: {e}");
                self.last_record_error = Some(e.to_string());
                let rec = self.recorder.take().unwrap();
                let _ = rec.finish();
                self.publish_event(json!({"event": "record_error", "message": e.to_string()}));
            }
        }
        self.last_composite = Some(out.composite);
        Ok(())
    }

    fn publish(&mut self, item: Published) {
        let before = self.subscribers.len();
        let mut gone = 0;
        self.subscribers.retain(|s| {
            let alive = s.offer(item.clone());
            if !alive {
                gone += s.drops.load(Ordering::Relaxed);
            }
            alive
        });
        if self.subscribers.len() != before {
            self.subscriber_drops += gone;
        }
    }

    fn publish_event(&mut self, value: Value) {
        self.publish(Published::Event(Arc::from(value.to_string())));
    }

    fn total_subscriber_drops(&self) -> u64 {
        self.subscriber_drops + self.subscribers.iter().map(|s| s.drops.load(Ordering::Relaxed)).sum::<u64>()
    }

    fn source_drops(&self) -> u64 {
        self.rgb.drops()
            + self.us.drops()
            + self.audio.as_ref().map_or(0, |a| a.drops())
            + self.reference_src.as_ref().map_or(0, |r| r.drops())
    }

    fn service_commands(&mut self) {
        loop {
            match self.commands.try_recv() {
                Ok(Command::Control(req, reply)) => {
                    let r = self.control(req);
                    let _ = reply.send(r);
                }
                Ok(Command::Subscribe(capacity, reply)) => {
                    let sub = self.add_subscriber(capacity);
                    let _ = reply.send(sub);
                }
                Ok(Command::Stop) | Err(TryRecvError::Disconnected) => {
                    self.stop = true;
                    return;
                }
                Err(TryRecvError::Empty) => return,
            }
        }
    }

    fn add_subscriber(&mut self, capacity: usize) -> Subscription {
        let (tx, rx) = crossbeam_channel::bounded(capacity.max(1));
        let drops = Arc::new(AtomicU64::new(0));
        self.subscribers.push(Subscriber {
            tx,
            rx: rx.clone(),
            drops: drops.clone(),
        });
        Subscription { rx, drops }
    }

    fn recorder_options(&self, startup: bool) -> RecorderOptions {
        let rec = &self.config.record;
        RecorderOptions {
            outputs: rec.outputs.clone(),
            session_id: if startup { rec.session_id.clone() } else { None },
            created_at: if startup { rec.created_at.clone() } else { None },
            calibration: self.processor.calibration().cloned(),
            config: Some(self.config.snapshot()),
            ..RecorderOptions::default()
        }
    }

    fn resolve_reference(&self, session: &str) -> PathBuf {
        let p = Path::new(session);
        match &self.config.reference_root {
            Some(root) if !p.is_absolute() && !p.is_dir() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn control(&mut self, req: ControlRequest) -> Result<Map<String, Value>, ControlError> {
        let mut body = Map::new();
        match req {
            ControlRequest::SetWeights { w_rgb, w_us, w_pred } => {
                let w = BlendWeights::new(w_rgb, w_us, w_pred).map_err(|e| ControlError::new("invalid_weights", e.to_string()))?;
                self.weights = w;
                body.insert("weights".into(), json!(w));
            }
            ControlRequest::StartRecord { dir } => {
                if let Some(rec) = &self.recorder {
                    return Err(ControlError::new(
                        "already_recording",
                        format!("already recording to {}", rec.dir().display()),
                    ));
                }
                let dir = match (dir, &self.config.record.root) {
                    (Some(d), _) => d,
                    (None, Some(root)) => root.join(chrono::Utc::now().format("session-%Y%m%dT%H%M%S%.3fZ").to_string()),
                    (None, None) => {
                        return Err(ControlError::new("invalid_payload", "no dir given and no record root configured"))
                    }
                };
                let rec = Recorder::create(&dir, self.recorder_options(false))
                    .map_err(|e| ControlError::new("record_failed", e.to_string()))?;
                body.insert("dir".into(), json!(dir));
                body.insert("session_id".into(), json!(rec.session_id()));
                self.recorder = Some(rec);
                self.recorded_bundles = 0;
                self.last_record_error = None;
            }
            ControlRequest::StopRecord => {
                let rec = self.recorder.take().ok_or_else(|| ControlError::new("not_recording", "no recording in progress"))?;
                let dir = rec.dir().to_path_buf();
                let manifest = rec.finish().map_err(|e| ControlError::new("record_failed", e.to_string()))?;
                self.stats.sessions.push(dir.clone());
                body.insert("dir".into(), json!(dir));
                body.insert("session_id".into(), json!(manifest.session_id));
                body.insert("bundles".into(), json!(self.recorded_bundles));
            }
            ControlRequest::Freeze => {
                match &self.last_composite {
                    Some(c) => self.frozen = Some(c.clone()),
                    None => self.freeze_requested = true,
                }
                body.insert("frozen".into(), json!(true));
            }
            ControlRequest::Unfreeze => {
                self.frozen = None;
                self.freeze_requested = false;
                body.insert("frozen".into(), json!(false));
            }
            ControlRequest::SelectReference { session } => {
                let dir = self.resolve_reference(&session);
                let track = ReferenceTrack::load(&dir).map_err(|e| ControlError::new("reference_not_found", e.to_string()))?;
                body.insert("session".into(), json!(dir));
                body.insert("contours".into(), json!(track.len()));
                self.reference = Some(track);
                self.last_metrics = None;
            }
            ControlRequest::GetMetrics => {
                let track = self
                    .reference
                    .as_ref()
                    .ok_or_else(|| ControlError::new("no_reference_selected", "select a reference session first"))?;
                body.insert("reference".into(), json!(track.dir()));
                let (ts, m) = match self.last_metrics {
                    Some((ts, m)) => (Some(ts), metrics_json(m)),
                    None => (None, Value::Null),
                };
                body.insert("ts_us".into(), json!(ts));
                body.insert("metrics".into(), m);
            }
            ControlRequest::GetStatus => {
                body.insert("status".into(), self.status());
            }
        }
        Ok(body)
    }

    fn status(&self) -> Value {
        let s = &self.stats;
        let active_s = s.first_bundle.map_or(0.0, |t| t.elapsed().as_secs_f64());
        json!({
            "bundles": s.bundles,
            "skipped": self.pairer.skipped(),
            "held": s.held,
            "stalled": s.stalled,
            "stalls": s.stalls,
            "frozen": self.frozen.is_some() || self.freeze_requested,
            "recording": self.recorder.as_ref().map(|r| r.dir().to_path_buf()),
            "record_error": self.last_record_error,
            "weights": self.weights,
            "last_us_skew_us": s.last_skew_us,
            "audio_rms": s.last_audio_rms,
            "calibrated": self.processor.calibration().is_some(),
            "reference": self.reference.as_ref().map(|r| r.dir().to_path_buf()),
            "source_drops": {
                "rgb": self.rgb.drops(),
                "us": self.us.drops(),
                "audio": self.audio.as_ref().map_or(0, |a| a.drops()),
                "ref": self.reference_src.as_ref().map_or(0, |r| r.drops()),
            },
            "subscriber_drops": self.total_subscriber_drops(),
            "mean_latency_us": s.latency_sum.divided(s.bundles),
            "bundles_per_s": if active_s > 0.0 { s.bundles as f64 / active_s } else { 0.0 },
        })
    }
}

fn metrics_json(m: Option<ContourDistances>) -> Value {
    match m {
        Some(d) => json!({"msd": d.msd, "hausdorff": d.hausdorff}),
        None => Value::Null,
    }
}
