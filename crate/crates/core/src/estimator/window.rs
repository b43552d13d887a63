use std::collections::{BTreeMap, VecDeque};

use crate::geom::Vec3;
use crate::imu::Preintegrated;
use crate::sensor::{FrameState, Landmark, RadarPoint};

/// One frame of the sliding window.
#[derive(Debug, Clone)]
pub struct WindowFrame {
    /// Global scan index.
    pub id: usize,
    pub state: FrameState,
    /// Gyro reading at the scan time, used by the Doppler residual.
    pub gyro: Vec3,
    /// Points that passed the velocity check.
    pub static_points: Vec<RadarPoint>,
    /// Landmark observations `(landmark id, measurement)` made in this frame.
    pub observations: Vec<(u64, RadarPoint)>,
}

impl WindowFrame {
    pub fn new(id: usize, state: FrameState, gyro: Vec3, static_points: Vec<RadarPoint>) -> Self {
        Self {
            id,
            state,
            gyro,
            static_points,
            observations: Vec::new(),
        }
    }
}

/// The most recent frames, the pre-integrated IMU segments between
/// consecutive frames (`preints[k]` links `frames[k]` and `frames[k + 1]`)
/// and the landmarks they observe. The pose of `frames[gauge]` is held fixed.
#[derive(Debug, Clone, Default)]
pub struct SlidingWindow {
    pub frames: VecDeque<WindowFrame>,
    pub preints: VecDeque<Preintegrated>,
    pub landmarks: BTreeMap<u64, Landmark>,
    pub gauge: usize,
}

impl SlidingWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn newest(&self) -> Option<&WindowFrame> {
        self.frames.back()
    }

    /// Appends a frame; `preint` must link the current newest frame to it.
    pub fn push(&mut self, frame: WindowFrame, preint: Option<Preintegrated>) {
        if !self.frames.is_empty() {
            self.preints
                .push_back(preint.expect("frames after the first need a pre-integrated segment"));
        }
        self.frames.push_back(frame);
    }

    pub fn frame_index(&self, id: usize) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn observation_count(&self) -> usize {
        self.frames.iter().map(|f| f.observations.len()).sum()
    }

    /// Drops landmarks that no live frame observes any more.
    pub fn prune_landmarks(&mut self) {
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.frames {
            for (id, _) in &f.observations {
                seen.insert(*id);
            }
        }
        self.landmarks.retain(|id, _| seen.contains(id));
    }

    pub fn check_invariants(&self, window_k: usize) -> Result<(), String> {
        if self.frames.len() > window_k {
            return Err(format!("{} frames exceed capacity {window_k}", self.frames.len()));
        }
        if !self.frames.is_empty() && self.preints.len() + 1 != self.frames.len() {
            return Err("pre-integration count does not match frames".into());
        }
        for f in &self.frames {
            for (id, _) in &f.observations {
                if !self.landmarks.contains_key(id) {
                    return Err(format!("frame {} observes dead landmark {id}", f.id));
                }
            }
        }
        Ok(())
    }
}

/// Removes the oldest frame once the window is full, together with its
/// factors and any landmark left without observations. The new oldest frame
/// becomes the gauge.
pub fn slide_window(window: &mut SlidingWindow, window_k: usize) -> Option<WindowFrame> {
    if window.frames.len() < window_k {
        return None;
    }
    let dropped = window.frames.pop_front();
    window.preints.pop_front();
    window.prune_landmarks();
    window.gauge = 0;
    dropped
}
