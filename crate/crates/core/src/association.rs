//! RCS-bounded nearest-neighbour association between consecutive scans and
//! the track bookkeeping that promotes repeatable points to landmarks.
//!
//! RCS values are compared in their stored unit (dBsm).

use std::collections::HashMap;

use crate::geom::{UnitQuat, Vec3};
use crate::preprocess::PointGrid;
use crate::sensor::{Landmark, RadarPoint, RadarScan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocConfig {
    /// Distance bound for a match, m.
    pub nn_d: f64,
    /// RCS similarity bound, dBsm. `f64::INFINITY` disables the RCS gate.
    pub rcs_d: f64,
    /// Consecutive detections required before a track becomes a landmark.
    pub min_hits: usize,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            nn_d: 0.5,
            rcs_d: 3.0,
            min_hits: 3,
        }
    }
}

impl AssocConfig {
    pub fn without_rcs_gate(self) -> Self {
        Self {
            rcs_d: f64::INFINITY,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub prev_index: usize,
    pub curr_index: usize,
    pub distance: f64,
    pub rcs_gap: f64,
}

/// Rigid transform taking current-radar-frame points into the previous radar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelPose {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl RelPose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuat::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

pub fn transform_to_prev(scan: &RadarScan, rel: &RelPose) -> Vec<Vec3> {
    scan.points.iter().map(|pt| rel.apply(&pt.p)).collect()
}

/// Closest previous point satisfying both the distance and the RCS bound.
/// Equal distances resolve to the lowest previous index.
pub fn rcs_bounded_nn(
    curr_index: usize,
    query: &Vec3,
    query_rcs: f64,
    prev: &[(Vec3, f64)],
    cfg: &AssocConfig,
) -> Option<Correspondence> {
    let mut best: Option<Correspondence> = None;
    for (i, (p, rcs)) in prev.iter().enumerate() {
        if let Some(c) = candidate(curr_index, query, query_rcs, i, p, *rcs, cfg) {
            if best.is_none_or(|b| c.distance < b.distance) {
                best = Some(c);
            }
        }
    }
    best
}

fn candidate(
    curr_index: usize,
    query: &Vec3,
    query_rcs: f64,
    prev_index: usize,
    p: &Vec3,
    rcs: f64,
    cfg: &AssocConfig,
) -> Option<Correspondence> {
    let distance = (p - query).norm();
    let rcs_gap = (rcs - query_rcs).abs();
    (distance <= cfg.nn_d && rcs_gap <= cfg.rcs_d).then_some(Correspondence {
        prev_index,
        curr_index,
        distance,
        rcs_gap,
    })
}

/// One-to-one matching of `curr` against `prev`. Each current point proposes
/// its RCS-bounded nearest neighbour; proposals are granted greedily by
/// ascending distance so every previous point is claimed at most once.
pub fn associate_scans(
    prev: &RadarScan,
    curr: &RadarScan,
    rel: &RelPose,
    cfg: &AssocConfig,
) -> Vec<Correspondence> {
    if prev.is_empty() || curr.is_empty() {
        return Vec::new();
    }
    let prev_pts: Vec<Vec3> = prev.points.iter().map(|p| p.p).collect();
    let grid = PointGrid::new(&prev_pts, cfg.nn_d);
    let moved = transform_to_prev(curr, rel);

    let mut proposals: Vec<Correspondence> = Vec::new();
    for (j, q) in moved.iter().enumerate() {
        let rcs_j = curr.points[j].rcs;
        let mut best: Option<Correspondence> = None;
        grid.for_each_within(q, cfg.nn_d, |i| {
            if let Some(c) = candidate(j, q, rcs_j, i, &prev_pts[i], prev.points[i].rcs, cfg) {
                let better = match best {
                    None => true,
                    Some(b) => c.distance < b.distance || (c.distance == b.distance && i < b.prev_index),
                };
                if better {
                    best = Some(c);
                }
            }
        });
        proposals.extend(best);
    }

    proposals.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.curr_index.cmp(&b.curr_index))
    });
    let mut claimed = vec![false; prev.len()];
    let mut out = Vec::with_capacity(proposals.len());
    for c in proposals {
        if !claimed[c.prev_index] {
            claimed[c.prev_index] = true;
            out.push(c);
        }
    }
    out.sort_by_key(|c| c.curr_index);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: usize,
    /// Index of the point within that frame's static scan.
    pub point_index: usize,
    pub point: RadarPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub observations: Vec<Observation>,
    pub last_rcs: f64,
    pub landmark_id: Option<u64>,
}

impl Track {
    pub fn hit_count(&self) -> usize {
        self.observations.len()
    }

    pub fn last(&self) -> &Observation {
        self.observations.last().expect("tracks are never empty")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackUpdate {
    pub extended: Vec<u64>,
    pub opened: Vec<u64>,
    pub closed: Vec<Track>,
}

/// Live tracks, each ending in the most recent frame.
#[derive(Debug, Clone, Default)]
pub struct TrackStore {
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<usize>,
}

impl TrackStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.last_frame
    }

    /// Track whose latest observation is point `point_index` of the last frame.
    pub fn track_for_point(&self, point_index: usize) -> Option<&Track> {
        self.tracks.iter().find(|t| t.last().point_index == point_index)
    }

    /// Extends matched tracks with the current frame, opens tracks for
    /// unmatched current points and closes every track that missed this frame.
    pub fn update(
        &mut self,
        correspondences: &[Correspondence],
        frame: usize,
        curr: &RadarScan,
    ) -> TrackUpdate {
        let consecutive = self.last_frame.is_some_and(|f| f + 1 == frame);
        let by_prev_point: HashMap<usize, usize> = self
            .tracks
            .iter()
            .enumerate()
            .map(|(slot, t)| (t.last().point_index, slot))
            .collect();

        let mut update = TrackUpdate::default();
        let mut alive = vec![false; self.tracks.len()];
        let mut used = vec![false; curr.len()];
        if consecutive {
            for c in correspondences {
                let Some(&slot) = by_prev_point.get(&c.prev_index) else {
                    continue;
                };
                if alive[slot] || used[c.curr_index] {
                    continue;
                }
                let point = curr.points[c.curr_index];
                let track = &mut self.tracks[slot];
                track.observations.push(Observation {
                    frame,
                    point_index: c.curr_index,
                    point,
                });
                track.last_rcs = point.rcs;
                alive[slot] = true;
                used[c.curr_index] = true;
                update.extended.push(track.id);
            }
        }

        let old = std::mem::take(&mut self.tracks);
        for (track, keep) in old.into_iter().zip(alive) {
            if keep {
                self.tracks.push(track);
            } else {
                update.closed.push(track);
            }
        }
        for (j, point) in curr.points.iter().enumerate() {
            if used[j] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                observations: vec![Observation {
                    frame,
                    point_index: j,
                    point: *point,
                }],
                last_rcs: point.rcs,
                landmark_id: None,
            });
            update.opened.push(id);
        }
        self.last_frame = Some(frame);
        update
    }

    /// Promotes tracks that reached `min_hits` to landmarks, once each. The
    /// landmark starts at the mean world position of the track's observations,
    /// as mapped by `to_world` (observations it cannot map are skipped).
    pub fn promote(
        &mut self,
        cfg: &AssocConfig,
        to_world: impl Fn(&Observation) -> Option<Vec3>,
    ) -> Vec<Landmark> {
        let mut out = Vec::new();
        for track in &mut self.tracks {
            if track.landmark_id.is_some() || track.hit_count() < cfg.min_hits {
                continue;
            }
            let world: Vec<Vec3> = track.observations.iter().filter_map(&to_world).collect();
            if world.is_empty() {
                continue;
            }
            let mean = world.iter().sum::<Vec3>() / world.len() as f64;
            track.landmark_id = Some(track.id);
            out.push(Landmark {
                id: track.id,
                position: mean,
            });
        }
        out
    }
}
