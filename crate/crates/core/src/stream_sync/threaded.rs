use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{Receiver, RecvTimeoutError, SendTimeoutError, Sender, TrySendError};

use super::source::{AudioSource, FrameSource, SourcePoll};
use super::SyncError;
use crate::frame::{AudioChunk, ImageFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueuePolicy {
    /// Producer waits for room; nothing is lost.
    Block,
    /// A full queue discards its oldest item and counts it.
    DropOldest,
}

#[derive(Debug)]
pub enum Received<T> {
    Item(T),
    Timeout,
    Ended,
    Failed(String),
}

enum Message<T> {
    Item(T),
    Ended,
    Failed(String),
}

/// A source running on its own thread behind a bounded queue.
pub struct SourceHandle<T> {
    rx: Receiver<Message<T>>,
    drops: Arc<AtomicU64>,
    stop: Arc<AtomicBool>,
    policy: QueuePolicy,
    thread: Option<JoinHandle<()>>,
    done: bool,
}

impl<T: Send + 'static> SourceHandle<T> {
    fn spawn(
        name: String,
        capacity: usize,
        policy: QueuePolicy,
        mut poll: impl FnMut() -> Result<SourcePoll<T>, SyncError> + Send + 'static,
    ) -> Self {
        let (tx, rx) = crossbeam_channel::bounded(capacity.max(1));
        let drops = Arc::new(AtomicU64::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (t_drops, t_stop, t_rx) = (drops.clone(), stop.clone(), rx.clone());
        let thread = std::thread::Builder::new()
            .name(name)
            .spawn(move || {
                let deliver = |msg: Message<T>| deliver(&tx, &t_rx, msg, policy, &t_drops, &t_stop);
                while !t_stop.load(Ordering::Relaxed) {
                    match poll() {
                        Ok(SourcePoll::Ready(item)) => {
                            if !deliver(Message::Item(item)) {
                                return;
                            }
                        }
                        Ok(SourcePoll::Pending) => std::thread::sleep(Duration::from_millis(1)),
                        Ok(SourcePoll::Ended) => {
                            deliver(Message::Ended);
                            return;
                        }
                        Err(e) => {
                            deliver(Message::Failed(e.to_string()));
                            return;
                        }
                    }
                }
            })
            .expect("spawning source thread");
        Self {
            rx,
            drops,
            stop,
            policy,
            thread: Some(thread),
            done: false,
        }
    }

    pub fn policy(&self) -> QueuePolicy {
        self.policy
    }

    /// Items discarded by the drop-oldest policy so far.
    pub fn drops(&self) -> u64 {
        self.drops.load(Ordering::Relaxed)
    }

    pub fn recv_timeout(&mut self, timeout: Duration) -> Received<T> {
        if self.done {
            return Received::Ended;
        }
        match self.rx.recv_timeout(timeout) {
            Ok(Message::Item(t)) => Received::Item(t),
            Ok(Message::Ended) | Err(RecvTimeoutError::Disconnected) => {
                self.done = true;
                Received::Ended
            }
            Ok(Message::Failed(e)) => {
                self.done = true;
                Received::Failed(e)
            }
            Err(RecvTimeoutError::Timeout) => Received::Timeout,
        }
    }

    pub fn try_recv(&mut self) -> Received<T> {
        self.recv_timeout(Duration::ZERO)
    }
}

fn deliver<T>(
    tx: &Sender<Message<T>>,
    rx: &Receiver<Message<T>>,
    mut msg: Message<T>,
    policy: QueuePolicy,
    drops: &AtomicU64,
    stop: &AtomicBool,
) -> bool {
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        match policy {
            QueuePolicy::Block => match tx.send_timeout(msg, Duration::from_millis(20)) {
                Ok(()) => return true,
                Err(SendTimeoutError::Timeout(m)) => msg = m,
                Err(SendTimeoutError::Disconnected(_)) => return false,
            },
            QueuePolicy::DropOldest => match tx.try_send(msg) {
                Ok(()) => return true,
                Err(TrySendError::Full(m)) => {
                    if rx.try_recv().is_ok() {
                        drops.fetch_add(1, Ordering::Relaxed);
                    }
                    msg = m;
                }
                Err(TrySendError::Disconnected(_)) => return false,
            },
        }
    }
}

impl<T> Drop for SourceHandle<T> {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            // Drain so a blocked producer notices the stop flag promptly.
            while self.rx.try_recv().is_ok() {}
            let _ = t.join();
        }
    }
}

fn policy_for(lossless: bool) -> QueuePolicy {
    if lossless {
        QueuePolicy::Block
    } else {
        QueuePolicy::DropOldest
    }
}

pub fn spawn_frames(mut source: Box<dyn FrameSource>, capacity: usize) -> SourceHandle<ImageFrame> {
    let policy = policy_for(source.lossless());
    let name = format!("source-{}", source.stream_id());
    SourceHandle::spawn(name, capacity, policy, move || source.poll_frame())
}

pub fn spawn_audio(mut source: Box<dyn AudioSource>, capacity: usize) -> SourceHandle<AudioChunk> {
    let policy = policy_for(source.lossless());
    SourceHandle::spawn("source-audio".into(), capacity, policy, move || source.poll_chunk())
}
