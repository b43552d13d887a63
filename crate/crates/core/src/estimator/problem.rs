//! Factor list and parameter layout of the windowed least-squares problem.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};

use super::factors::{
    huber, huber_weight, residual_doppler_with_jacobian, residual_p2p_with_jacobians,
};
use super::window::SlidingWindow;
use super::{EstimatorConfig, EstimatorError};
use crate::imu::{residual_imu_with_jacobians, Mat15, Vec15};
use crate::sensor::{Extrinsics, GravityModel, RadarPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    Imu,
    Doppler,
    PointToPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Links `frames[k]` and `frames[k + 1]` through `preints[k]`.
    Imu { k: usize },
    Doppler { frame: usize, point: RadarPoint },
    PointToPoint {
        frame: usize,
        landmark: u64,
        point: RadarPoint,
    },
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::Imu { .. } => FactorKind::Imu,
            Factor::Doppler { .. } => FactorKind::Doppler,
            Factor::PointToPoint { .. } => FactorKind::PointToPoint,
        }
    }
}

/// Which residual classes enter the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualSet {
    pub imu: bool,
    pub doppler: bool,
    pub p2p: bool,
}

impl Default for ResidualSet {
    fn default() -> Self {
        Self {
            imu: true,
            doppler: true,
            p2p: true,
        }
    }
}

/// Parameter layout: per frame a 6-dof pose block (absent for the gauge
/// frame) and a 9-dof motion block `(v, b_a, b_g)`, followed by one 3-dof
/// block per landmark.
#[derive(Debug, Clone)]
pub struct Problem {
    pub factors: Vec<Factor>,
    pub pose_offsets: Vec<Option<usize>>,
    pub motion_offsets: Vec<usize>,
    /// 9, or 3 (velocity only) when the frame's biases are held fixed.
    pub motion_lens: Vec<usize>,
    pub landmark_offsets: BTreeMap<u64, usize>,
    /// Number of frame parameters; landmark parameters follow.
    pub frame_dim: usize,
    pub dim: usize,
    pub ext: Extrinsics,
    pub gravity: GravityModel,
    pub w_d: f64,
    pub w_p: f64,
    pub robust_delta: f64,
    imu_sqrt_info: Vec<Mat15>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub imu: f64,
    pub doppler: f64,
    pub p2p: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.imu + self.doppler + self.p2p
    }
}

/// Inverse Cholesky factor of a covariance: `|S r|² = rᵀ P⁻¹ r`.
pub fn sqrt_information(cov: &Mat15) -> Mat15 {
    let mut p = *cov;
    let mut jitter = 0.0;
    for _ in 0..8 {
        if let Some(ch) = p.cholesky() {
            let l = ch.l();
            return l
                .solve_lower_triangular(&Mat15::identity())
                .expect("cholesky factor has a positive diagonal");
        }
        jitter = if jitter == 0.0 { 1e-15 } else { jitter * 100.0 };
        p = cov + Mat15::identity() * jitter;
    }
    Mat15::identity() * 1e6
}

pub fn build_problem(
    window: &SlidingWindow,
    cfg: &EstimatorConfig,
    ext: &Extrinsics,
    gravity: &GravityModel,
) -> Result<Problem, EstimatorError> {
    if window.frames.len() < 2 {
        return Err(EstimatorError::EmptyWindow);
    }
    let set = cfg.residuals();
    // Without point-to-point constraints nothing separates the gyro bias from
    // the rotation of later frames, so the gauge frame's biases stay fixed.
    let has_p2p = set.p2p
        && window
            .frames
            .iter()
            .any(|f| f.observations.iter().any(|(id, _)| window.landmarks.contains_key(id)));
    let fix_biases = cfg.fix_gauge_biases || !has_p2p;
    let mut offset = 0;
    let mut pose_offsets = Vec::with_capacity(window.len());
    let mut motion_offsets = Vec::with_capacity(window.len());
    let mut motion_lens = Vec::with_capacity(window.len());
    for i in 0..window.len() {
        if i == window.gauge {
            pose_offsets.push(None);
        } else {
            pose_offsets.push(Some(offset));
            offset += 6;
        }
        let len = if i == window.gauge && fix_biases { 3 } else { 9 };
        motion_offsets.push(offset);
        motion_lens.push(len);
        offset += len;
    }
    let frame_dim = offset;

    let mut factors = Vec::new();
    if set.imu {
        factors.extend((0..window.preints.len()).map(|k| Factor::Imu { k }));
    }
    if set.doppler {
        for (i, f) in window.frames.iter().enumerate() {
            factors.extend(
                f.static_points
                    .iter()
                    .map(|p| Factor::Doppler { frame: i, point: *p }),
            );
        }
    }
    let mut landmark_offsets = BTreeMap::new();
    if set.p2p {
        for (i, f) in window.frames.iter().enumerate() {
            for (id, p) in &f.observations {
                if window.landmarks.contains_key(id) {
                    factors.push(Factor::PointToPoint {
                        frame: i,
                        landmark: *id,
                        point: *p,
                    });
                    landmark_offsets.entry(*id).or_insert(0);
                }
            }
        }
        for slot in landmark_offsets.values_mut() {
            *slot = offset;
            offset += 3;
        }
    }

    let imu_sqrt_info = if set.imu {
        window
            .preints
            .iter()
            .map(|p| sqrt_information(&p.covariance))
            .collect()
    } else {
        Vec::new()
    };

    Ok(Problem {
        factors,
        pose_offsets,
        motion_offsets,
        motion_lens,
        landmark_offsets,
        frame_dim,
        dim: offset,
        ext: *ext,
        gravity: *gravity,
        w_d: cfg.w_d,
        w_p: cfg.w_p,
        robust_delta: cfg.robust_delta,
        imu_sqrt_info,
    })
}

/// Normal equations split into the frame block and per-landmark blocks.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub hff: DMatrix<f64>,
    pub bf: DVector<f64>,
    pub landmarks: Vec<LandmarkBlock>,
}

#[derive(Debug, Clone)]
pub struct LandmarkBlock {
    pub id: u64,
    pub hll: Matrix3<f64>,
    pub hfl: DMatrix<f64>,
    pub bl: Vector3<f64>,
}

type FrameJac<const R: usize> = SMatrix<f64, R, 15>;

impl Problem {
    pub fn count(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind() == kind).count()
    }

    pub fn cost(&self, window: &SlidingWindow) -> f64 {
        self.cost_breakdown(window).total()
    }

    /// Weighted cost per residual class at the window's current states.
    pub fn cost_breakdown(&self, window: &SlidingWindow) -> CostBreakdown {
        let mut out = CostBreakdown::default();
        for f in &self.factors {
            match f {
                Factor::Imu { k } => {
                    let r = crate::imu::residual_imu(
                        &window.frames[*k].state,
                        &window.frames[k + 1].state,
                        &window.preints[*k],
                        &self.gravity,
                    );
                    out.imu += (self.imu_sqrt_info[*k] * r).norm_squared();
                }
                Factor::Doppler { frame, point } => {
                    let fr = &window.frames[*frame];
                    let r = super::factors::residual_doppler(&fr.state, point, &fr.gyro, &self.ext)
                        .unwrap_or(f64::NAN);
                    out.doppler += self.w_d * r * r;
                }
                Factor::PointToPoint {
                    frame,
                    landmark,
                    point,
                } => {
                    let r = super::factors::residual_p2p(
                        &window.frames[*frame].state,
                        &window.landmarks[landmark],
                        point,
                        &self.ext,
                    );
                    out.p2p += self.w_p * huber(r.norm_squared(), self.robust_delta);
                }
            }
        }
        out
    }

    /// Gauss–Newton normal equations `H δ = b` at the window's states
    /// (`b = −Jᵀ W r`), with Huber weights applied as IRLS weights.
    pub fn linearize(&self, window: &SlidingWindow) -> NormalEquations {
        let nf = self.frame_dim;
        let mut hff = DMatrix::zeros(nf, nf);
        let mut bf = DVector::zeros(nf);
        let mut landmarks: BTreeMap<u64, LandmarkBlock> = self
            .landmark_offsets
            .keys()
            .map(|&id| {
                (
                    id,
                    LandmarkBlock {
                        id,
                        hll: Matrix3::zeros(),
                        hfl: DMatrix::zeros(nf, 3),
                        bl: Vector3::zeros(),
                    },
                )
            })
            .collect();

        for f in &self.factors {
            match f {
                Factor::Imu { k } => {
                    let (r, jk, jk1) = residual_imu_with_jacobians(
                        &window.frames[*k].state,
                        &window.frames[k + 1].state,
                        &window.preints[*k],
                        &self.gravity,
                    );
                    let s = &self.imu_sqrt_info[*k];
                    let r: Vec15 = s * r;
                    let blocks = [(*k, s * jk), (k + 1, s * jk1)];
                    self.accumulate_frames(&mut hff, &mut bf, &blocks, r.as_slice(), 1.0);
                }
                Factor::Doppler { frame, point } => {
                    let fr = &window.frames[*frame];
                    let Ok((r, j)) = residual_doppler_with_jacobian(&fr.state, point, &fr.gyro, &self.ext)
                    else {
                        continue;
                    };
                    self.accumulate_frames(&mut hff, &mut bf, &[(*frame, j)], &[r], self.w_d);
                }
                Factor::PointToPoint {
                    frame,
                    landmark,
                    point,
                } => {
                    let (r, jf, jl) = residual_p2p_with_jacobians(
                        &window.frames[*frame].state,
                        &window.landmarks[landmark],
                        point,
                        &self.ext,
                    );
                    let w = self.w_p * huber_weight(r.norm_squared(), self.robust_delta);
                    self.accumulate_frames(&mut hff, &mut bf, &[(*frame, jf)], r.as_slice(), w);
                    let block = landmarks.get_mut(landmark).expect("landmark registered");
                    block.hll += jl.transpose() * jl * w;
                    block.bl -= jl.transpose() * r * w;
                    let cross = jf.transpose() * jl * w; // 15×3
                    for (local, global, len) in self.frame_columns(*frame) {
                        let rows = cross.view((local, 0), (len, 3));
                        let mut dst = block.hfl.view_mut((global, 0), (len, 3));
                        dst += rows;
                    }
                }
            }
        }

        NormalEquations {
            hff,
            bf,
            landmarks: landmarks.into_values().collect(),
        }
    }

    /// `(local column, global column, length)` runs of a frame's parameters.
    pub fn frame_columns(&self, frame: usize) -> impl Iterator<Item = (usize, usize, usize)> {
        let pose = self.pose_offsets[frame].map(|o| (0, o, 6));
        let motion = Some((6, self.motion_offsets[frame], self.motion_lens[frame]));
        pose.into_iter().chain(motion)
    }

    fn accumulate_frames<const R: usize>(
        &self,
        hff: &mut DMatrix<f64>,
        bf: &mut DVector<f64>,
        blocks: &[(usize, FrameJac<R>)],
        r: &[f64],
        w: f64,
    ) {
        let r = SMatrix::<f64, R, 1>::from_column_slice(r);
        for (fa, ja) in blocks {
            let g = ja.transpose() * r * w;
            for (la, ga, na) in self.frame_columns(*fa) {
                let mut dst = bf.rows_mut(ga, na);
                dst -= g.rows(la, na);
            }
            for (fb, jb) in blocks {
                let h = ja.transpose() * jb * w;
                for (la, ga, na) in self.frame_columns(*fa) {
                    for (lb, gb, nb) in self.frame_columns(*fb) {
                        let mut dst = hff.view_mut((ga, gb), (na, nb));
                        dst += h.view((la, lb), (na, nb));
                    }
                }
            }
        }
    }

    /// Applies a solution vector to the window states and landmarks.
    pub fn apply_step(&self, window: &mut SlidingWindow, delta: &DVector<f64>) {
        for (i, frame) in window.frames.iter_mut().enumerate() {
            let mut local = Vec15::zeros();
            for (l, g, n) in self.frame_columns(i) {
                local.rows_mut(l, n).copy_from(&delta.rows(g, n));
            }
            frame.state = crate::imu::boxplus_state(&frame.state, &local);
        }
        for (id, off) in &self.landmark_offsets {
            if let Some(lm) = window.landmarks.get_mut(id) {
                lm.position += delta.fixed_rows::<3>(*off);
            }
        }
    }
}
