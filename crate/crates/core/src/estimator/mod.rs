//! Sliding-window radar-inertial estimator.
//!
//! The cost combines three residual classes over the window: the
//! pre-integrated IMU residual whitened by its covariance, one Doppler
//! residual per static point weighted by `w_d`, and one point-to-point
//! residual per landmark observation weighted by `w_p` under an optional
//! Huber loss. All terms are squared norms.

pub mod factors;
pub mod odometry;
pub mod problem;
pub mod solver;
pub mod window;

use thiserror::Error;

pub use factors::{residual_doppler, residual_p2p};
pub use odometry::{
    ego_velocity, initialize, Initialization, Odometry, OdometryConfig, OdometryOutput, StageCounts,
};
pub use problem::{build_problem, Factor, FactorKind, Problem, ResidualSet};
pub use solver::{solve, SolveReport};
pub use window::{slide_window, SlidingWindow, WindowFrame};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("window needs at least two frames")]
    EmptyWindow,
    #[error("scan at t = {t} is not after the last processed scan ({last})")]
    OutOfOrder { t: f64, last: f64 },
    #[error("line-of-sight geometry is degenerate (rank {rank} < 3)")]
    DegenerateGeometry { rank: usize },
    #[error(transparent)]
    Imu(#[from] crate::imu::ImuError),
}

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub disable_imu_residual: bool,
    pub disable_doppler_residual: bool,
    pub disable_p2p_residual: bool,
    pub disable_velocity_filter: bool,
    pub disable_rcs_filter: bool,
}

impl Ablation {
    pub const FLAGS: [&'static str; 5] = [
        "imu_residual",
        "doppler_residual",
        "p2p_residual",
        "velocity_filter",
        "rcs_filter",
    ];

    /// Sets the switch named by one of [`Ablation::FLAGS`].
    pub fn disable(&mut self, flag: &str) -> Result<(), String> {
        let slot = match flag.trim_start_matches("disable_") {
            "imu_residual" => &mut self.disable_imu_residual,
            "doppler_residual" | "velocity_residual" => &mut self.disable_doppler_residual,
            "p2p_residual" => &mut self.disable_p2p_residual,
            "velocity_filter" => &mut self.disable_velocity_filter,
            "rcs_filter" => &mut self.disable_rcs_filter,
            other => return Err(format!("unknown ablation flag '{other}'")),
        };
        *slot = true;
        Ok(())
    }

    pub fn only(flag: &str) -> Result<Self, String> {
        let mut a = Self::default();
        a.disable(flag)?;
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub window_k: usize,
    pub w_d: f64,
    pub w_p: f64,
    /// Huber threshold on the point-to-point residual norm, m; 0 disables.
    pub robust_delta: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub lm_lambda_init: f64,
    /// Hold the gauge frame's biases fixed along with its pose.
    pub fix_gauge_biases: bool,
    pub ablation: Ablation,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window_k: 10,
            w_d: 1.0,
            w_p: 1.0,
            robust_delta: 0.5,
            max_iters: 10,
            rel_tol: 1e-6,
            lm_lambda_init: 1e-4,
            fix_gauge_biases: true,
            ablation: Ablation::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn residuals(&self) -> ResidualSet {
        ResidualSet {
            imu: !self.ablation.disable_imu_residual,
            doppler: !self.ablation.disable_doppler_residual,
            p2p: !self.ablation.disable_p2p_residual,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.window_k < 2 {
            return Err("window_k must be at least 2".into());
        }
        if !(self.w_d > 0.0 && self.w_p > 0.0) {
            return Err("residual weights must be positive".into());
        }
        if self.robust_delta < 0.0 || self.max_iters == 0 || !(self.lm_lambda_init > 0.0) {
            return Err("invalid solver settings".into());
        }
        Ok(())
    }
}
