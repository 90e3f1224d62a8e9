//! Core of an ultrasound-enhanced pronunciation feedback pipeline.
//!
//! Two orange markers on a chin-mounted probe holder are tracked in the
//! camera image; their geometry places the ultrasound frame (and the tongue
//! segmentation derived from it) on the side of the learner's face. The
//! crate covers marker detection, overlay placement, tongue contour
//! extraction, stream synchronization, compositing, session recording,
//! probe-slippage statistics and the pipeline service that ties them together.

pub mod compositor;
pub mod frame;
pub mod geometry;
pub mod marker_tracking;
pub mod pose_calibration;
pub mod raster;
pub mod service;
pub mod session_io;
pub mod slippage_analysis;
pub mod stream_sync;
pub mod synthetic;
pub mod tongue_contour;

pub use frame::{AudioChunk, ImageFrame, PixelFormat, StreamId};
pub use geometry::{FrameDims, Point2, Rect};
