//! Radar-inertial odometry.
//!
//! Sparse radar scans carrying position, Doppler velocity and RCS are fused
//! with IMU data in a sliding-window least-squares estimator. Doppler
//! consistency against the IMU-propagated motion rejects dynamic points, and
//! RCS similarity bounds the nearest-neighbour search used for point-to-point
//! constraints.

pub mod geom;
pub mod imu;
pub mod sensor;
pub mod association;
pub mod preprocess;
pub mod estimator;
pub mod io;
pub mod eval;
pub mod simulator;
pub mod run;
