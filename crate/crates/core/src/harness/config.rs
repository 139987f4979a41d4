//! TOML run configuration.
//!
//! Every field is optional; omitted fields take the reference-scenario values.
//!
//! ```toml
//! [scenario]
//! t_end = 60.0
//! dt = 0.001
//! gyro_bias_deg_s = [3.0, 3.0, 3.0]
//!
//! [gains]
//! k_r = 2.0
//! gamma = 2.0
//!
//! [run]
//! observer = "both"
//! sensor_mode = "ranges"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{GainParams, MeasurementHold, ObserverState};
use crate::range::build_cp;
use crate::so3::{exp_so3, Rotation, Vec3};
use crate::vehicle::{
    time_grid, validate_assumptions, AngularRate, AssumptionViolation, ScenarioConfig, SensorNoise,
    Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverSelection {
    Proposed,
    Adhoc,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorMode {
    #[default]
    Ranges,
    Gps,
}

/// How the observers see the sensors between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Sensors are sampled at every integrator stage.
    #[default]
    Sampled,
    /// Linear interpolation between grid samples.
    Linear,
    /// Grid samples held over each interval.
    ZeroOrder,
}

impl InputMode {
    pub fn hold(&self) -> MeasurementHold {
        match self {
            InputMode::ZeroOrder => MeasurementHold::ZeroOrder,
            InputMode::Sampled | InputMode::Linear => MeasurementHold::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub gravity: f64,
    pub m_inertial: [f64; 3],
    pub gyro_bias_deg_s: [f64; 3],
    pub anchors: Vec<[f64; 3]>,
    pub reference_anchor: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Rotation vector (rad) of the initial attitude.
    pub initial_attitude: [f64; 3],
    pub trajectory: Trajectory,
    pub angular_rate: AngularRate,
    pub noise: SensorNoise,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let d = ScenarioConfig::default();
        ScenarioSection {
            gravity: d.gravity,
            m_inertial: d.m_inertial.into(),
            gyro_bias_deg_s: [3.0; 3],
            anchors: d.anchors.iter().map(|a| (*a).into()).collect(),
            reference_anchor: 0,
            t_end: d.t_end,
            dt: d.dt,
            initial_attitude: [std::f64::consts::FRAC_PI_2, 0.0, 0.0],
            trajectory: d.trajectory,
            angular_rate: d.angular_rate,
            noise: d.noise,
        }
    }
}

/// Initial observer state. The attitude is a rotation vector in rad, the bias
/// in rad/s.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub p_hat: [f64; 3],
    pub v_hat: [f64; 3],
    pub r_hat: [f64; 3],
    pub b_hat: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub observer: ObserverSelection,
    pub sensor_mode: SensorMode,
    pub input: InputMode,
    pub seed: u64,
    /// Radius of the attitude-error set used by the gain bounds.
    pub epsilon: f64,
    /// Upper bound on `h * rate` per integrator substep; `0` disables substepping.
    pub stiffness_limit: f64,
    pub monitor_every: usize,
    pub renormalize_every: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            observer: ObserverSelection::Both,
            sensor_mode: SensorMode::Ranges,
            input: InputMode::Sampled,
            seed: 0,
            epsilon: 0.75,
            stiffness_limit: 0.5,
            monitor_every: 10,
            renormalize_every: 1000,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub gains: GainParams,
    pub initial: InitialSection,
    pub run: RunSection,
}

impl ConfigFile {
    /// Parses TOML text without validating it.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        ConfigFile::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub scenario: ScenarioConfig,
    pub gains: GainParams,
    pub initial: ObserverState,
    pub c5: f64,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("must be positive, got {v}"),
        ))
    }
}

fn finite3(field: &str, v: &[f64; 3]) -> Result<Vec3> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Vec3::from(*v))
    } else {
        Err(Error::validation(field, "entries must be finite"))
    }
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        RunConfig::from_file(ConfigFile::from_toml(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let sc = &file.scenario;
        positive("scenario.gravity", sc.gravity)?;
        positive("scenario.dt", sc.dt)?;
        if !(sc.t_end >= 0.0 && sc.t_end.is_finite()) {
            return Err(Error::validation(
                "scenario.t_end",
                format!("must be >= 0, got {}", sc.t_end),
            ));
        }
        let noise = sc.noise;
        for (name, v) in [
            ("scenario.noise.gyro_std", noise.gyro_std),
            ("scenario.noise.accel_std", noise.accel_std),
            ("scenario.noise.mag_std", noise.mag_std),
            ("scenario.noise.position_std", noise.position_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be >= 0, got {v}")));
            }
        }
        if let Trajectory::Hover { position } = sc.trajectory {
            finite3("scenario.trajectory.position", &position)?;
        }
        if let AngularRate::Constant { omega } = sc.angular_rate {
            finite3("scenario.angular_rate.omega", &omega)?;
        }
        let anchors: Vec<Vec3> = sc.anchors.iter().map(|a| Vec3::from(*a)).collect();
        if file.run.sensor_mode == SensorMode::Ranges {
            build_cp(&anchors, sc.reference_anchor).map_err(|e| match e {
                Error::Validation { .. } => e,
                other => Error::validation("scenario.anchors", other.to_string()),
            })?;
        }
        let gyro_bias =
            finite3("scenario.gyro_bias_deg_s", &sc.gyro_bias_deg_s)?.map(f64::to_radians);
        let scenario = ScenarioConfig {
            gravity: sc.gravity,
            m_inertial: finite3("scenario.m_inertial", &sc.m_inertial)?,
            gyro_bias,
            anchors,
            t_end: sc.t_end,
            dt: sc.dt,
            trajectory: sc.trajectory,
            angular_rate: sc.angular_rate,
            initial_attitude: exp_so3(&finite3("scenario.initial_attitude", &sc.initial_attitude)?),
            noise,
        };

        file.gains.validate().map_err(|e| match e {
            Error::Validation { field, message } => Error::Validation {
                field: format!("gains.{field}"),
                message,
            },
            other => other,
        })?;
        let c5 = file.gains.c5.unwrap_or(1.05 * gyro_bias.norm());
        positive("gains.c5", c5).map_err(|_| {
            Error::validation(
                "gains.c5",
                "bias bound is zero; set gains.c5 when the gyro bias is zero",
            )
        })?;

        let run = &file.run;
        if !(run.epsilon > 0.5 && run.epsilon < 1.0) {
            return Err(Error::validation(
                "run.epsilon",
                format!("must lie in (0.5, 1), got {}", run.epsilon),
            ));
        }
        if !(run.stiffness_limit >= 0.0 && run.stiffness_limit.is_finite()) {
            return Err(Error::validation("run.stiffness_limit", "must be >= 0"));
        }
        if run.monitor_every == 0 {
            return Err(Error::validation("run.monitor_every", "must be at least 1"));
        }
        if run.renormalize_every == 0 {
            return Err(Error::validation(
                "run.renormalize_every",
                "must be at least 1",
            ));
        }

        let init = &file.initial;
        let b_hat = finite3("initial.b_hat", &init.b_hat)?;
        let radius = c5 + file.gains.eps_b;
        if b_hat.norm() > radius {
            return Err(Error::validation(
                "initial.b_hat",
                format!("|b_hat| = {} exceeds c5 + eps_b = {radius}", b_hat.norm()),
            ));
        }
        let initial = ObserverState::new(
            finite3("initial.p_hat", &init.p_hat)?,
            finite3("initial.v_hat", &init.v_hat)?,
            exp_so3(&finite3("initial.r_hat", &init.r_hat)?),
            b_hat,
        );
        Ok(RunConfig {
            gains: file.gains,
            file,
            scenario,
            initial,
            c5,
        })
    }

    pub fn stiffness_limit(&self) -> Option<f64> {
        let l = self.file.run.stiffness_limit;
        (l > 0.0).then_some(l)
    }

    /// Grid the trajectory constants are evaluated on.
    pub fn assumption_grid(&self) -> Vec<f64> {
        time_grid(self.scenario.t_end, self.scenario.dt.max(1e-2))
    }

    /// Assumption violations, including `c_hat2 <= sqrt(8) c2`. These are
    /// reported rather than rejected.
    pub fn warnings(&self) -> Vec<AssumptionViolation> {
        validate_assumptions(&self.scenario, &self.assumption_grid())
            .violations(Some(self.gains.c_hat2))
    }

    pub fn initial_attitude_error(&self) -> Rotation {
        self.scenario.initial_attitude * self.initial.r_hat.transpose()
    }
}

/// Parses a config from a file path, or returns the defaults when `None`.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::from_toml(""),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::so3_distance;
    use approx::assert_relative_eq;

    #[test]
    fn empty_config_gives_reference_values() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.gains, GainParams::default());
        assert_eq!(cfg.gains.k_r, 2.0);
        assert_eq!(cfg.gains.gamma, 2.0);
        assert_eq!(cfg.scenario.anchors, ScenarioConfig::default_anchors());
        assert_relative_eq!(
            cfg.scenario.gyro_bias,
            ScenarioConfig::default().gyro_bias,
            epsilon = 1e-18
        );
        assert_eq!(cfg.initial.x_hat, nalgebra::Vector6::zeros());
        assert_eq!(cfg.initial.r_hat, Rotation::identity());
        assert_relative_eq!(
            so3_distance(&cfg.initial_attitude_error()),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(cfg.c5, 1.05 * cfg.scenario.gyro_bias.norm());
        assert_eq!(cfg.file.run.observer, ObserverSelection::Both);
        assert_eq!(cfg.file.run.input, InputMode::Sampled);
    }

    #[test]
    fn partial_override() {
        let cfg = RunConfig::from_toml(
            "[gains]\nk_r = 5.0\npoles = [-1.0, -2.0]\n[scenario]\nt_end = 2.5\n[run]\nobserver = \"adhoc\"\n",
        )
        .unwrap();
        assert_eq!(cfg.gains.k_r, 5.0);
        assert_eq!(cfg.gains.gamma, 2.0);
        assert_eq!(cfg.scenario.t_end, 2.5);
        assert_eq!(cfg.file.run.observer, ObserverSelection::Adhoc);
    }

    #[test]
    fn unstable_poles_rejected() {
        let err = RunConfig::from_toml("[gains]\npoles = [1.0, -2.0]\n").unwrap_err();
        assert!(
            matches!(err, Error::Validation { ref field, .. } if field == "gains.poles"),
            "{err}"
        );
    }

    #[test]
    fn coplanar_anchors_rejected() {
        let err = RunConfig::from_toml("[scenario]\nanchors = [[0,0,0],[1,0,0],[0,1,0],[2,3,0]]\n")
            .unwrap_err();
        assert!(
            matches!(err, Error::Validation { ref field, .. } if field == "scenario.anchors"),
            "{err}"
        );
        // Irrelevant for direct position fixes.
        assert!(RunConfig::from_toml(
            "[scenario]\nanchors = [[0,0,0],[1,0,0],[0,1,0],[2,3,0]]\n[run]\nsensor_mode = \"gps\"\n",
        )
        .is_ok());
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            RunConfig::from_toml("[gains\nk_r = 1"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[gains]\nkr = 1.0\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            RunConfig::from_toml("[run]\nobserver = \"kalman\"\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn field_level_validation() {
        for (text, field) in [
            ("[scenario]\ndt = 0.0\n", "scenario.dt"),
            ("[scenario]\nt_end = -1.0\n", "scenario.t_end"),
            ("[gains]\nk_b = -1.0\n", "gains.k_b"),
            ("[gains]\ngamma = 0.5\n", "gains.gamma"),
            ("[run]\nepsilon = 1.0\n", "run.epsilon"),
            ("[initial]\nb_hat = [1.0, 0.0, 0.0]\n", "initial.b_hat"),
            (
                "[scenario]\ngyro_bias_deg_s = [0.0, 0.0, 0.0]\n",
                "gains.c5",
            ),
        ] {
            match RunConfig::from_toml(text) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn saturation_level_is_a_warning() {
        let cfg = RunConfig::from_toml("[scenario]\nt_end = 60.0\n").unwrap();
        assert!(cfg
            .warnings()
            .iter()
            .any(|w| matches!(w, AssumptionViolation::SaturationTooLow { .. })));
    }

    #[test]
    fn round_trip_through_toml() {
        let file = ConfigFile::default();
        let text = toml::to_string(&file).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.file, file);
    }
}
