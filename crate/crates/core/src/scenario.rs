//! Scenario descriptions (TOML) and the simulation-side oracles built
//! from them.
//!
//! ```toml
//! name = "example"
//! seed = 7
//! snr_db = 30.0
//! scene_radius = 60.0
//!
//! [radar]
//! carrier_frequency = 5e9
//! range_bandwidth = 1e9
//! num_range_freq_samples = 512
//! num_pulses = 512
//! pulse_interval = 0.01171875
//!
//! [platform]
//! kind = "line"
//! position = [0.0, -10000.0, 7000.0]
//! velocity = [100.0, 0.0, 0.0]
//!
//! [[targets]]
//! position = [10.0, -5.0, 0.0]
//! velocity = [6.0, -0.5, 0.0]
//! ```
//!
//! Platform paths are `line` (position, velocity and optional acceleration
//! at `t = 0`), `arc` (horizontal circle) or `waypoints` (`[t, x, y, z]`
//! rows). Targets take either kinematics or waypoints.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::echo_sim::{simulate_ranges, NoiseSpec, PhaseHistory, PointTarget, SimOptions};
use crate::error::{Error, Result};
use crate::error_model::{
    ape_profile, decompose_eta, eta_from_geometry, exact_surface, taylor_coefficients, ApeProfile, PhaseErrorModel,
    PhaseErrorSurface, TaylorCoefficients, DEFAULT_XI_ORDER,
};
use crate::geometry::{derive_geometry, target_range, CollectionGeometry, RadarParams, Trajectory, Vec3};
use crate::interp::lagrange4;
use crate::parallel::Exec;
use crate::pfa::{build_azimuth_warp, polar_format, AzimuthWarp, ComplexImage, PfaOptions, PfaProducts, SpatialFrequencyGrid};

/// Allowed wavefront-curvature phase error at the scene edge, rad.
pub const FAR_FIELD_PHASE_LIMIT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Line {
        position: [f64; 3],
        velocity: [f64; 3],
        #[serde(default)]
        acceleration: [f64; 3],
    },
    Arc {
        /// Centre of the circle; its `z` is the flight altitude.
        center: [f64; 3],
        radius: f64,
        /// rad/s, positive counter-clockwise seen from above.
        angular_rate: f64,
        /// Angle at `t = 0`, rad from the +x axis.
        angle: f64,
    },
    Waypoints { points: Vec<[f64; 4]> },
}

fn default_reflectivity() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub acceleration: [f64; 3],
    #[serde(default)]
    pub waypoints: Option<Vec<[f64; 4]>>,
    /// `[re, im]`
    #[serde(default = "default_reflectivity")]
    pub reflectivity: [f64; 2],
}

impl TargetSpec {
    pub fn at(position: [f64; 3]) -> Self {
        Self { position: Some(position), velocity: [0.0; 3], acceleration: [0.0; 3], waypoints: None, reflectivity: default_reflectivity() }
    }

    pub fn moving(position: [f64; 3], velocity: [f64; 3], acceleration: [f64; 3]) -> Self {
        Self { velocity, acceleration, ..Self::at(position) }
    }

    fn path(&self) -> Result<PathSpec> {
        match (&self.position, &self.waypoints) {
            (Some(p), None) => Ok(PathSpec::Line { position: *p, velocity: self.velocity, acceleration: self.acceleration }),
            (None, Some(w)) => Ok(PathSpec::Waypoints { points: w.clone() }),
            _ => Err(Error::Scenario("each target needs exactly one of `position` or `waypoints`".into())),
        }
    }
}

fn default_scene_radius() -> f64 {
    50.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Additive noise SNR per sample, dB; absent for a noiseless run.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Radius of the imaged scene, m.
    #[serde(default = "default_scene_radius")]
    pub scene_radius: f64,
    #[serde(default)]
    pub scene_center: [f64; 3],
    pub radar: RadarParams,
    pub platform: PathSpec,
    #[serde(default)]
    pub targets: Vec<TargetSpec>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn waypoint_position(points: &[[f64; 4]], t: f64) -> Result<Vec3> {
    let n = points.len();
    let (t0, t1) = (points[0][0], points[n - 1][0]);
    let tol = 1e-9 * (t1 - t0).abs().max(1.0);
    if t < t0 - tol || t > t1 + tol {
        return Err(Error::Scenario(format!("pulse time {t} outside waypoint span [{t0}, {t1}]")));
    }
    let i = points.partition_point(|p| p[0] <= t).clamp(1, n - 1) - 1;
    if n < 4 {
        let (a, b) = (points[i], points[i + 1]);
        let u = (t - a[0]) / (b[0] - a[0]);
        return Ok(Vec3::new(a[1] + u * (b[1] - a[1]), a[2] + u * (b[2] - a[2]), a[3] + u * (b[3] - a[3])));
    }
    let j = i.saturating_sub(1).min(n - 4);
    let xs = [points[j][0], points[j + 1][0], points[j + 2][0], points[j + 3][0]];
    let c = |k: usize| lagrange4(xs, [points[j][k], points[j + 1][k], points[j + 2][k], points[j + 3][k]], t);
    Ok(Vec3::new(c(1), c(2), c(3)))
}

/// Sample a path on the radar's slow-time grid.
pub fn sample_path(path: &PathSpec, params: &RadarParams) -> Result<Trajectory> {
    let axis = params.t_axis();
    match path {
        PathSpec::Line { position, velocity, acceleration } => {
            let (p, v, a) = (v3(*position), v3(*velocity), v3(*acceleration));
            Trajectory::from_fn(&axis, |t| p + v * t + a * (0.5 * t * t))
        }
        PathSpec::Arc { center, radius, angular_rate, angle } => {
            if !(*radius > 0.0) {
                return Err(Error::Scenario("arc radius must be positive".into()));
            }
            let c = v3(*center);
            Trajectory::from_fn(&axis, |t| {
                let a = angle + angular_rate * t;
                c + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
        }
        PathSpec::Waypoints { points } => {
            if points.len() < 2 {
                return Err(Error::Scenario("waypoint paths need at least two points".into()));
            }
            if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                return Err(Error::Scenario("waypoint times must be strictly increasing".into()));
            }
            let samples = axis
                .values()
                .into_iter()
                .map(|t| Ok(crate::geometry::TrajectorySample { t, position: waypoint_position(points, t)? }))
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(samples)
        }
    }
}

/// Ground-truth products for one target.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub model: PhaseErrorModel,
    pub grid: SpatialFrequencyGrid,
    pub ape: ApeProfile,
    pub surface: PhaseErrorSurface,
    pub taylor: TaylorCoefficients,
}

/// A validated, ready-to-simulate scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub params: RadarParams,
    pub geometry: CollectionGeometry,
    pub targets: Vec<PointTarget>,
    pub warp: AzimuthWarp,
    pub grid: SpatialFrequencyGrid,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let params = config.radar;
        params.validate()?;
        if !(config.scene_radius > 0.0) {
            return Err(Error::Scenario("scene_radius must be positive".into()));
        }
        if let Some(snr) = config.snr_db {
            if !snr.is_finite() {
                return Err(Error::Scenario("snr_db must be finite".into()));
            }
        }
        let platform = sample_path(&config.platform, &params)?;
        let geometry = derive_geometry(&platform, v3(config.scene_center))?;
        let targets = config
            .targets
            .iter()
            .map(|t| {
                let traj = sample_path(&t.path()?, &params)?;
                PointTarget::new(traj, Complex64::new(t.reflectivity[0], t.reflectivity[1]))
            })
            .collect::<Result<Vec<_>>>()?;
        let warp = build_azimuth_warp(&geometry)?;
        let grid = SpatialFrequencyGrid::new(&params, geometry.phi_ref, warp.slope);
        let mut scenario = Self { config: config.clone(), params, geometry, targets, warp, grid, warnings: Vec::new() };
        scenario.warnings = scenario.far_field_warnings()?;
        for w in &scenario.warnings {
            log::warn!("{w}");
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config(&ScenarioConfig::load(path)?)
    }

    /// Azimuth resolution, m.
    pub fn azimuth_resolution(&self) -> f64 {
        let (lo, hi) = self
            .geometry
            .theta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        self.params.wavelength() / (2.0 * (hi - lo))
    }

    /// Scene radius below which the polar-format wavefront-curvature error
    /// stays under [`FAR_FIELD_PHASE_LIMIT`].
    pub fn far_field_radius(&self) -> f64 {
        let r0 = self.geometry.r_c[self.geometry.center_index];
        2.0 * self.azimuth_resolution() * (r0 / self.params.wavelength()).sqrt() * (FAR_FIELD_PHASE_LIMIT / (PI / 2.0)).sqrt()
    }

    fn far_field_warnings(&self) -> Result<Vec<String>> {
        let limit = self.far_field_radius();
        let mut out = Vec::new();
        if self.config.scene_radius > limit {
            out.push(format!(
                "scene radius {:.1} m exceeds the polar-format far-field bound {:.1} m",
                self.config.scene_radius, limit
            ));
        }
        let center = self.geometry.scene_center;
        for (i, t) in self.targets.iter().enumerate() {
            let d = t.trajectory.positions().map(|p| (p - center).norm()).fold(0.0f64, f64::max);
            if d > limit {
                out.push(format!("target {i} reaches {d:.1} m from the scene centre, beyond the far-field bound {limit:.1} m"));
            }
            if !(target_range(&t.trajectory, &self.geometry.platform)?.iter().all(|r| *r > 0.0)) {
                return Err(Error::Scenario(format!("target {i} has a non-positive range")));
            }
        }
        Ok(out)
    }

    pub fn noise(&self) -> Option<NoiseSpec> {
        self.config.snr_db.map(|snr_db| NoiseSpec { snr_db, seed: self.config.seed })
    }

    pub fn range_histories(&self) -> Result<Vec<(Vec<f64>, Complex64)>> {
        self.targets
            .iter()
            .map(|t| Ok((target_range(&t.trajectory, &self.geometry.platform)?, t.reflectivity)))
            .collect()
    }

    /// Raw phase history including the configured noise.
    pub fn simulate(&self, exec: Exec) -> Result<PhaseHistory> {
        simulate_ranges(&self.params, &self.range_histories()?, &SimOptions { noise: self.noise(), exec })
    }

    pub fn simulate_noiseless(&self, exec: Exec) -> Result<PhaseHistory> {
        simulate_ranges(&self.params, &self.range_histories()?, &SimOptions { noise: None, exec })
    }

    pub fn form_image(&self, raw: &PhaseHistory, opts: &PfaOptions) -> Result<PfaProducts> {
        polar_format(raw, &self.params, &self.geometry, opts)
    }

    fn target(&self, index: usize) -> Result<&PointTarget> {
        self.targets
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("scenario has {} targets, no index {index}", self.targets.len())))
    }

    /// Decomposed residual-error model of one target.
    pub fn target_model(&self, index: usize) -> Result<PhaseErrorModel> {
        let r_m = target_range(&self.target(index)?.trajectory, &self.geometry.platform)?;
        let model = eta_from_geometry(&self.geometry, &r_m, &self.warp)?;
        decompose_eta(&model, DEFAULT_XI_ORDER)
    }

    pub fn oracle(&self, index: usize) -> Result<Oracle> {
        let model = self.target_model(index)?;
        let grid = self.grid;
        Ok(Oracle {
            ape: ape_profile(&model, &grid)?,
            surface: exact_surface(&model, &grid)?,
            taylor: taylor_coefficients(&model, &grid)?,
            model,
            grid,
        })
    }

    /// Range history whose effective error is exactly the imaging part
    /// `a0 + a1 t` of the target's: the known-motion focus reference.
    pub fn reference_range(&self, index: usize) -> Result<Vec<f64>> {
        let model = self.target_model(index)?;
        let g = &self.geometry;
        let k = self.warp.slope;
        Ok((0..g.num_pulses())
            .map(|i| {
                let varpi = model.a0 + model.a1 * g.theta[i].tan() / k;
                g.r_c[i] - g.phi[i].sin() * g.theta[i].cos() * varpi
            })
            .collect())
    }

    /// Noiseless image of the target with its defocusing motion removed.
    pub fn matched_reference(&self, index: usize, exec: Exec) -> Result<ComplexImage> {
        let a = self.target(index)?.reflectivity;
        let raw = simulate_ranges(&self.params, &[(self.reference_range(index)?, a)], &SimOptions { noise: None, exec })?;
        let mut image = self.form_image(&raw, &PfaOptions { keep_stages: false, exec })?.image;
        image.provenance.chain.push("matched_reference".into());
        Ok(image)
    }
}
