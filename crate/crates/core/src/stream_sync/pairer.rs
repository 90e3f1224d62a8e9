use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DEFAULT_STALL_TIMEOUT_US, DEFAULT_TOLERANCE_US};
use crate::frame::{AudioChunk, ImageFrame, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairerConfig {
    pub tolerance_us: u64,
    pub stall_timeout_us: u64,
}

impl Default for PairerConfig {
    fn default() -> Self {
        Self {
            tolerance_us: DEFAULT_TOLERANCE_US,
            stall_timeout_us: DEFAULT_STALL_TIMEOUT_US,
        }
    }
}

/// One camera frame with the ultrasound frame and audio chosen for it.
/// Skews are `other.timestamp - bundle_ts` in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncedBundle {
    pub bundle_ts_us: u64,
    pub rgb: ImageFrame,
    pub us: ImageFrame,
    pub us_skew_us: i64,
    /// No ultrasound frame was within tolerance; `us` is the last paired one.
    pub us_held: bool,
    pub audio: Option<AudioChunk>,
    pub reference: Option<ImageFrame>,
    pub ref_skew_us: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairEvent {
    Bundle(SyncedBundle),
    Stalled { stream: StreamId, silent_us: u64, at_us: u64 },
    Resumed { stream: StreamId, at_us: u64 },
}

fn skew(other: u64, t: u64) -> i64 {
    other as i64 - t as i64
}

/// Index of the frame nearest to `t`; ties go to the earlier frame.
fn nearest(frames: &VecDeque<ImageFrame>, t: u64) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, f) in frames.iter().enumerate() {
        let d = f.timestamp_us.abs_diff(t);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
        if f.timestamp_us >= t {
            break;
        }
    }
    best.map(|(i, _)| i)
}

/// Incremental nearest-timestamp pairing. Frames are pushed as they arrive;
/// [`Pairer::pair`] decides one camera frame with whatever has been pushed,
/// so callers that want exact nearest pairing wait for
/// [`Pairer::ready_for`] first.
#[derive(Debug, Default)]
pub struct Pairer {
    config: PairerConfig,
    us: VecDeque<ImageFrame>,
    us_ended: bool,
    last_us_ts: Option<u64>,
    /// Newest ultrasound timestamp not after the last decided camera frame.
    last_past_us_ts: Option<u64>,
    last_paired: Option<ImageFrame>,
    first_rgb_ts: Option<u64>,
    stalled: bool,
    audio_enabled: bool,
    audio: VecDeque<AudioChunk>,
    audio_ended: bool,
    reference: VecDeque<ImageFrame>,
    last_bundle_ts: Option<u64>,
    skipped: u64,
}

impl Pairer {
    pub fn new(config: PairerConfig, with_audio: bool) -> Self {
        Self {
            config,
            audio_enabled: with_audio,
            ..Self::default()
        }
    }

    pub fn config(&self) -> PairerConfig {
        self.config
    }

    /// Camera frames discarded because no ultrasound frame could serve them.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn is_stalled(&self) -> bool {
        self.stalled
    }

    pub fn push_us(&mut self, frame: ImageFrame) {
        if self.last_us_ts.map_or(true, |t| frame.timestamp_us > t) {
            self.last_us_ts = Some(frame.timestamp_us);
            self.us.push_back(frame);
        }
    }

    pub fn end_us(&mut self) {
        self.us_ended = true;
    }

    pub fn push_audio(&mut self, chunk: AudioChunk) {
        if self.audio.back().map_or(true, |c| chunk.timestamp_us > c.timestamp_us) {
            self.audio.push_back(chunk);
        }
    }

    pub fn end_audio(&mut self) {
        self.audio_ended = true;
    }

    pub fn push_reference(&mut self, frame: ImageFrame) {
        if self.reference.back().map_or(true, |f| frame.timestamp_us > f.timestamp_us) {
            self.reference.push_back(frame);
        }
    }

    /// True once no later ultrasound frame could be nearer to `t`.
    pub fn us_decided(&self, t: u64) -> bool {
        self.us_ended || self.last_us_ts.is_some_and(|last| last >= t)
    }

    pub fn audio_decided(&self, t: u64) -> bool {
        !self.audio_enabled || self.audio_ended || self.audio.back().is_some_and(|c| c.end_us() > t)
    }

    pub fn ready_for(&self, t: u64) -> bool {
        self.us_decided(t) && self.audio_decided(t)
    }

    /// Decides the bundle for one camera frame. Appends a bundle and any
    /// stall or resume notice to `out`.
    pub fn pair(&mut self, rgb: ImageFrame, out: &mut Vec<PairEvent>) {
        let t = rgb.timestamp_us;
        if self.last_bundle_ts.is_some_and(|last| t <= last) {
            self.skipped += 1;
            return;
        }
        if let Some(f) = self.us.iter().take_while(|f| f.timestamp_us <= t).last() {
            self.last_past_us_ts = Some(f.timestamp_us);
        }
        let since = self.last_past_us_ts.unwrap_or(*self.first_rgb_ts.get_or_insert(t));
        let silent = t.saturating_sub(since);
        if silent > self.config.stall_timeout_us {
            if !self.stalled {
                self.stalled = true;
                out.push(PairEvent::Stalled {
                    stream: StreamId::Us,
                    silent_us: silent,
                    at_us: t,
                });
            }
        } else if self.stalled {
            self.stalled = false;
            out.push(PairEvent::Resumed {
                stream: StreamId::Us,
                at_us: t,
            });
        }

        let chosen = nearest(&self.us, t).map(|i| {
            self.us.drain(..i);
            self.us[0].clone()
        });
        let (us, held) = match chosen {
            Some(f) if f.timestamp_us.abs_diff(t) <= self.config.tolerance_us => {
                self.last_paired = Some(f.clone());
                (f, false)
            }
            other => match (&self.last_paired, other) {
                (Some(last), _) => (last.clone(), true),
                // Nothing paired yet: a past frame is better than none.
                (None, Some(f)) if f.timestamp_us <= t => {
                    self.last_paired = Some(f.clone());
                    (f, true)
                }
                _ => {
                    self.skipped += 1;
                    return;
                }
            },
        };

        while self.audio.front().is_some_and(|c| c.end_us() <= t) {
            self.audio.pop_front();
        }
        let audio = self.audio.front().filter(|c| c.covers(t)).cloned();

        let reference = nearest(&self.reference, t).map(|i| {
            self.reference.drain(..i);
            self.reference[0].clone()
        });

        self.last_bundle_ts = Some(t);
        out.push(PairEvent::Bundle(SyncedBundle {
            bundle_ts_us: t,
            us_skew_us: skew(us.timestamp_us, t),
            us_held: held,
            us,
            audio,
            ref_skew_us: reference.as_ref().map(|r| skew(r.timestamp_us, t)),
            reference,
            rgb,
        }));
    }
}

/// Pairs complete, in-memory streams. Every camera frame is decided with
/// full knowledge of the ultrasound and audio streams around it.
pub fn pair_streams(
    rgb: impl IntoIterator<Item = ImageFrame>,
    us: impl IntoIterator<Item = ImageFrame>,
    audio: Option<Vec<AudioChunk>>,
    config: PairerConfig,
) -> Vec<PairEvent> {
    let mut pairer = Pairer::new(config, audio.is_some());
    let mut us = us.into_iter();
    let mut audio = audio.into_iter().flatten();
    let mut out = Vec::new();
    for frame in rgb {
        let t = frame.timestamp_us;
        while !pairer.us_decided(t) {
            match us.next() {
                Some(f) => pairer.push_us(f),
                None => pairer.end_us(),
            }
        }
        while !pairer.audio_decided(t) {
            match audio.next() {
                Some(c) => pairer.push_audio(c),
                None => pairer.end_audio(),
            }
        }
        pairer.pair(frame, &mut out);
    }
    out
}
