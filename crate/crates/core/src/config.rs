//! TOML experiment configuration.
//!
//! Every field is optional; omitted values fall back to the 150-sensor
//! reference scenario.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::attack::{AttackModel, BiasMode, ScenarioConfig};
use crate::decoder::DecoderConfig;
use crate::dynamics::{GaussianState, SensorModel, SystemModel};
use crate::error::{config, Error, Result};
use crate::harness::{ExperimentConfig, Method, SamplingRate};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub tests: Option<usize>,
    /// Sampling probability; defaults to `1/(qKN)`.
    pub p: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub fixed_matrix: Option<bool>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub decoder: DecoderSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub sensors: Option<usize>,
    pub window: Option<usize>,
    pub horizon: Option<usize>,
    pub sample_time: Option<f64>,
    pub process_noise: Option<f64>,
    pub measurement_noise: Option<f64>,
    pub x0_mean: Option<Vec<f64>>,
    /// Diagonal of the initial covariance.
    pub x0_cov: Option<Vec<f64>>,
    /// Explicit model matrices, row-major; override `sample_time`/`process_noise`.
    pub f: Option<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<Vec<f64>>>,
    pub q: Option<Vec<Vec<f64>>>,
    /// Shared measurement matrix and noise covariance for every sensor.
    pub h: Option<Vec<Vec<f64>>>,
    pub rw: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub q: Option<f64>,
    /// Scalar variance (`R_b = rb·I`).
    pub rb: Option<f64>,
    /// `"gaussian"` or `"constant"`.
    pub bias: Option<String>,
    /// Offset used by the constant mode.
    pub bias_value: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub tail_mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSection {
    pub lambda: Option<f64>,
    pub round_threshold: Option<f64>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config(format!("`{what}` must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.iter().flatten().copied()))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn into_experiment(self) -> Result<ExperimentConfig> {
        let mut exp = ExperimentConfig::reference(1e4)?;
        let sc = &self.scenario;

        let model = match (&sc.f, &sc.gamma, &sc.q) {
            (None, None, None) => SystemModel::constant_velocity(
                sc.sample_time.unwrap_or(0.1),
                sc.process_noise.unwrap_or(0.01),
            )?,
            (Some(f), Some(g), Some(q)) => SystemModel::new(matrix(f, "f")?, matrix(g, "gamma")?, matrix(q, "q")?)?,
            _ => return Err(config("`f`, `gamma` and `q` must be given together")),
        };
        let nx = model.state_dim();

        let sensor = match (&sc.h, &sc.rw) {
            (None, None) => SensorModel::position(nx, sc.measurement_noise.unwrap_or(1.0))?,
            (Some(h), Some(r)) => SensorModel::new(matrix(h, "h")?, matrix(r, "rw")?)?,
            _ => return Err(config("`h` and `rw` must be given together")),
        };
        let n_sensors = sc.sensors.unwrap_or(150);
        let nz = sensor.meas_dim();

        let mean = match &sc.x0_mean {
            Some(v) => DVector::from_vec(v.clone()),
            None if nx == 2 => DVector::from_vec(vec![0.0, 1.5]),
            None => DVector::zeros(nx),
        };
        let cov_diag = match &sc.x0_cov {
            Some(v) => DVector::from_vec(v.clone()),
            None if nx == 2 => DVector::from_vec(vec![1000.0, 1.0]),
            None => DVector::from_element(nx, 1.0),
        };
        if mean.len() != nx || cov_diag.len() != nx {
            return Err(config(format!("`x0_mean` and `x0_cov` need {nx} entries")));
        }
        let x0 = GaussianState::new(mean, DMatrix::from_diagonal(&cov_diag))?;

        let a = &self.attack;
        let rb = a.rb.unwrap_or(1e4);
        let bias = match a.bias.as_deref() {
            None | Some("gaussian") => BiasMode::Gaussian,
            Some("constant") => {
                let v = a
                    .bias_value
                    .clone()
                    .unwrap_or_else(|| vec![rb.sqrt(); nz]);
                BiasMode::Constant(DVector::from_vec(v))
            }
            Some(other) => return Err(config(format!("unknown bias mode `{other}`"))),
        };
        let attack = AttackModel {
            q: a.q.unwrap_or(0.01),
            rb: DMatrix::identity(nz, nz) * rb,
            bias,
            seed: 0,
        };

        exp.scenario = ScenarioConfig {
            model,
            sensors: vec![sensor; n_sensors],
            x0,
            horizon: sc.horizon.unwrap_or(50),
            window: sc.window.unwrap_or(5),
            attack,
        };
        if let Some(s) = self.seed {
            exp.seed = s;
        }
        if let Some(r) = self.runs {
            exp.n_runs = r;
        }
        if let Some(t) = self.tests {
            exp.tests = t;
        }
        if let Some(p) = self.p {
            exp.sampling = SamplingRate::Fixed(p);
        }
        if let Some(ms) = &self.methods {
            exp.methods = ms.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
        }
        if let Some(b) = self.fixed_matrix {
            exp.fixed_matrix = b;
        }
        if let Some(t) = self.detector.tail_mass {
            exp.tail_mass = t;
        }
        exp.decoder = DecoderConfig {
            lambda: self.decoder.lambda.unwrap_or(exp.decoder.lambda),
            round_threshold: self.decoder.round_threshold.unwrap_or(exp.decoder.round_threshold),
        };
        exp.validate()?;
        Ok(exp)
    }
}

/// Parses TOML text straight into an experiment.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig> {
    ConfigFile::parse(text)?.into_experiment()
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    ConfigFile::load(path)?.into_experiment()
}
