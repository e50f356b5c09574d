//! Radar parameters, sampled trajectories and the derived collection
//! geometry (`r_c`, `θ`, `φ` histories) for a broadside spotlight aperture.
//!
//! Frame conventions: `z` is up and the ground plane is `z = const`. The
//! broadside axis `u0` is the horizontal unit vector from the scene centre
//! towards the platform at the central pulse; `e_az` is `u0` rotated by +90°
//! about `z`. `θ` is the ground-plane angle of the horizontal line of sight
//! measured from `u0` towards `e_az`, and `φ` is the angle of the line of
//! sight from the vertical.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::axis::UniformAxis;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Propagation speed, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    /// Hz
    pub carrier_frequency: f64,
    /// Hz
    pub range_bandwidth: f64,
    pub num_range_freq_samples: usize,
    pub num_pulses: usize,
    /// s
    pub pulse_interval: f64,
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        let fc = self.carrier_frequency;
        let b = self.range_bandwidth;
        if !(fc.is_finite() && fc > 0.0) {
            return Err(Error::InvalidInput(format!("carrier frequency must be > 0, got {fc}")));
        }
        if !(b.is_finite() && b > 0.0 && b < 2.0 * fc) {
            return Err(Error::InvalidInput(format!(
                "range bandwidth must satisfy 0 < B < 2 f_c, got {b}"
            )));
        }
        if self.num_range_freq_samples < 2 || self.num_pulses < 2 {
            return Err(Error::InvalidInput("sample counts must be >= 2".into()));
        }
        if !(self.pulse_interval.is_finite() && self.pulse_interval > 0.0) {
            return Err(Error::InvalidInput("pulse interval must be > 0".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn freq_step(&self) -> f64 {
        self.range_bandwidth / self.num_range_freq_samples as f64
    }

    /// Range-frequency axis, Hz, with `f_r = 0` at index `N/2`.
    pub fn fr_axis(&self) -> UniformAxis {
        UniformAxis::centered(0.0, self.freq_step(), self.num_range_freq_samples)
    }

    /// Slow-time axis, s, with `t = 0` at the central pulse `N/2`.
    pub fn t_axis(&self) -> UniformAxis {
        UniformAxis::centered(0.0, self.pulse_interval, self.num_pulses)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>) -> Result<Self> {
        let traj = Self { samples };
        traj.validate()?;
        Ok(traj)
    }

    /// Sample `position(t)` on every point of `axis`.
    pub fn from_fn(axis: &UniformAxis, position: impl Fn(f64) -> Vec3) -> Result<Self> {
        Self::new(
            (0..axis.len)
                .map(|i| {
                    let t = axis.value(i);
                    TrajectorySample { t, position: position(t) }
                })
                .collect(),
        )
    }

    /// A target that never moves.
    pub fn stationary(axis: &UniformAxis, at: Vec3) -> Result<Self> {
        Self::from_fn(axis, |_| at)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::InvalidInput("trajectory has no samples".into()));
        }
        for s in &self.samples {
            if !s.t.is_finite() || !s.position.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput("trajectory contains non-finite values".into()));
            }
        }
        if self.samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput("trajectory times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vec3> {
        self.samples.iter().map(|s| &s.position)
    }

    /// Rigidly translate every sample.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| TrajectorySample { t: s.t, position: s.position + offset })
                .collect(),
        }
    }

    /// Whether two trajectories share the same slow-time grid.
    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.len() == other.len()
            && self
                .samples
                .iter()
                .zip(&other.samples)
                .all(|(a, b)| (a.t - b.t).abs() <= 1e-9 * a.t.abs().max(1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectionGeometry {
    pub platform: Trajectory,
    pub scene_center: Vec3,
    /// Platform to scene-centre range per pulse, m.
    pub r_c: Vec<f64>,
    /// Ground-plane azimuth angle per pulse, rad.
    pub theta: Vec<f64>,
    /// Incidence angle from vertical per pulse, rad.
    pub phi: Vec<f64>,
    pub phi_ref: f64,
    pub center_index: usize,
    /// Broadside unit vector (horizontal, centre towards platform).
    pub broadside: Vec3,
    /// Horizontal unit vector along the aperture (`broadside` rotated +90°).
    pub along_track: Vec3,
}

impl CollectionGeometry {
    pub fn num_pulses(&self) -> usize {
        self.r_c.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.platform.times()
    }

    pub fn tan_theta(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.tan()).collect()
    }

    /// Scene-frame coordinates of a ground point: (along-track, broadside).
    pub fn scene_coordinates(&self, p: &Vec3) -> (f64, f64) {
        let d = p - self.scene_center;
        (d.dot(&self.along_track), d.dot(&self.broadside))
    }
}

/// Derive `r_c(t)`, `θ(t)`, `φ(t)` from platform samples and the scene centre.
pub fn derive_geometry(platform: &Trajectory, scene_center: Vec3) -> Result<CollectionGeometry> {
    platform.validate()?;
    if !scene_center.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("scene centre must be finite".into()));
    }
    let n = platform.len();
    let center_index = n / 2;
    let rel: Vec<Vec3> = platform.positions().map(|p| p - scene_center).collect();
    let r_c: Vec<f64> = rel.iter().map(|d| d.norm()).collect();
    if let Some(i) = r_c.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::DegenerateGeometry(format!(
            "platform coincides with scene centre at pulse {i}"
        )));
    }
    let h0 = Vec3::new(rel[center_index].x, rel[center_index].y, 0.0);
    let h0n = h0.norm();
    if !(h0n > 1e-9 * r_c[center_index]) {
        return Err(Error::DegenerateGeometry(
            "platform is at nadir of the scene centre; broadside axis undefined".into(),
        ));
    }
    let broadside = h0 / h0n;
    let along_track = Vec3::new(-broadside.y, broadside.x, 0.0);

    let mut theta = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for d in &rel {
        let h = Vec3::new(d.x, d.y, 0.0);
        theta.push(h.dot(&along_track).atan2(h.dot(&broadside)));
        phi.push(h.norm().atan2(d.z));
    }
    let phi_ref = phi[center_index];
    Ok(CollectionGeometry {
        platform: platform.clone(),
        scene_center,
        r_c,
        theta,
        phi,
        phi_ref,
        center_index,
        broadside,
        along_track,
    })
}

/// Per-pulse range from a (possibly moving) target to the platform.
pub fn target_range(target: &Trajectory, platform: &Trajectory) -> Result<Vec<f64>> {
    if !target.same_grid(platform) {
        return Err(Error::GridMismatch(format!(
            "target has {} samples, platform {}; slow-time grids must match",
            target.len(),
            platform.len()
        )));
    }
    let r: Vec<f64> = target
        .positions()
        .zip(platform.positions())
        .map(|(a, b)| (a - b).norm())
        .collect();
    if let Some(i) = r.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateGeometry(format!("zero target range at pulse {i}")));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_platform(n: usize) -> (UniformAxis, Trajectory) {
        let axis = UniformAxis::centered(0.0, 0.01, n);
        let traj = Trajectory::from_fn(&axis, |t| Vec3::new(100.0 * t, -10_000.0, 7_000.0)).unwrap();
        (axis, traj)
    }

    #[test]
    fn broadside_point_closed_form() {
        let (_, traj) = line_platform(101);
        let g = derive_geometry(&traj, Vec3::zeros()).unwrap();
        let c = g.center_index;
        assert!((g.r_c[c] - (10_000f64.powi(2) + 7_000f64.powi(2)).sqrt()).abs() < 1e-9);
        assert!((g.phi[c] - 10_000f64.atan2(7_000.0)).abs() < 1e-14);
        assert!(g.theta[c].abs() < 1e-12);
        assert_eq!(g.phi_ref, g.phi[c]);
    }

    #[test]
    fn symmetric_line_gives_odd_theta_even_phi() {
        let (_, traj) = line_platform(101);
        let g = derive_geometry(&traj, Vec3::zeros()).unwrap();
        let n = g.num_pulses();
        for i in 0..n {
            let j = n - 1 - i;
            assert!((g.theta[i] + g.theta[j]).abs() < 1e-14);
            assert!((g.phi[i] - g.phi[j]).abs() < 1e-14);
            assert!((g.r_c[i] - g.r_c[j]).abs() < 1e-9);
        }
        assert!(g.theta[n - 1] > 0.0, "θ grows along the flight direction");
    }

    #[test]
    fn nadir_and_coincident_are_rejected() {
        let axis = UniformAxis::centered(0.0, 1.0, 5);
        let nadir = Trajectory::from_fn(&axis, |t| Vec3::new(t, 0.0, 1000.0)).unwrap();
        assert!(matches!(
            derive_geometry(&nadir, Vec3::zeros()),
            Err(Error::DegenerateGeometry(_))
        ));
        let coincident = Trajectory::stationary(&axis, Vec3::new(5.0, 5.0, 0.0)).unwrap();
        assert!(derive_geometry(&coincident, Vec3::new(5.0, 5.0, 0.0)).is_err());
    }

    #[test]
    fn target_range_identity_and_grid_mismatch() {
        let (axis, traj) = line_platform(11);
        let center = Trajectory::stationary(&axis, Vec3::zeros()).unwrap();
        let g = derive_geometry(&traj, Vec3::zeros()).unwrap();
        let rm = target_range(&center, &traj).unwrap();
        assert_eq!(rm, g.r_c);

        let (_, short) = line_platform(9);
        assert!(matches!(target_range(&center, &short), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn non_increasing_times_rejected() {
        let s = |t| TrajectorySample { t, position: Vec3::zeros() };
        assert!(Trajectory::new(vec![s(0.0), s(0.0)]).is_err());
    }

    #[test]
    fn radar_param_guards() {
        let ok = RadarParams {
            carrier_frequency: 10e9,
            range_bandwidth: 1e9,
            num_range_freq_samples: 64,
            num_pulses: 65,
            pulse_interval: 1e-3,
        };
        ok.validate().unwrap();
        assert!(RadarParams { range_bandwidth: 25e9, ..ok }.validate().is_err());
        assert!(RadarParams { num_pulses: 1, ..ok }.validate().is_err());
        assert!(RadarParams { carrier_frequency: -1.0, ..ok }.validate().is_err());
        let fr = ok.fr_axis();
        assert_eq!(fr.value(32), 0.0);
        assert!((fr.start + 0.5e9).abs() < 1e-3);
        assert_eq!(ok.t_axis().value(32), 0.0);
    }
}
