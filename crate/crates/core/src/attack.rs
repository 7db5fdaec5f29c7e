//! Ground-truth simulation, measurement synthesis and the Bernoulli adversary.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{check_psd, psd_sqrt, GaussianState, SensorModel, SystemModel};
use crate::error::{argument, config, Result};
use crate::group_testing::FaultVector;
use crate::seeds::{derive_seed, stream};

#[derive(Clone, Debug, PartialEq)]
pub enum BiasMode {
    /// `b ~ N(0, R_b)`, drawn fresh for every attacked (sensor, step).
    Gaussian,
    /// A fixed offset added to every attacked measurement.
    Constant(DVector<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackModel {
    /// Per-(sensor, step) attack probability.
    pub q: f64,
    /// Bias covariance `R_b` (`n_z × n_z`).
    pub rb: DMatrix<f64>,
    pub bias: BiasMode,
    pub seed: u64,
}

impl AttackModel {
    pub fn gaussian(q: f64, rb: DMatrix<f64>, seed: u64) -> Self {
        Self {
            q,
            rb,
            bias: BiasMode::Gaussian,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(config(format!("attack probability q = {} outside [0, 1]", self.q)));
        }
        check_psd(&self.rb, "bias covariance")?;
        if let BiasMode::Constant(b) = &self.bias {
            if b.len() != self.rb.nrows() {
                return Err(config("constant bias length differs from R_b dimension"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub model: SystemModel,
    pub sensors: Vec<SensorModel>,
    /// Distribution of `x_0`, also the filters' initial estimate.
    pub x0: GaussianState,
    /// Number of measurement steps.
    pub horizon: usize,
    /// Window length `K`.
    pub window: usize,
    pub attack: AttackModel,
}

impl ScenarioConfig {
    /// The 150-sensor 1-D tracking scenario with bias covariance `rb`.
    pub fn reference(rb: f64) -> Result<Self> {
        let model = SystemModel::constant_velocity(0.1, 0.01)?;
        let sensors = (0..150)
            .map(|_| SensorModel::position(2, 1.0))
            .collect::<Result<Vec<_>>>()?;
        let x0 = GaussianState::new(
            DVector::from_vec(vec![0.0, 1.5]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1000.0, 1.0])),
        )?;
        Ok(Self {
            model,
            sensors,
            x0,
            horizon: 50,
            window: 5,
            attack: AttackModel::gaussian(0.01, DMatrix::from_element(1, 1, rb), 0),
        })
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn num_windows(&self) -> usize {
        self.horizon / self.window
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.model.state_dim();
        if self.sensors.is_empty() {
            return Err(config("scenario needs at least one sensor"));
        }
        if self.sensors.iter().any(|s| s.state_dim() != nx) {
            return Err(config("sensor measurement matrices disagree with the state dimension"));
        }
        if self.x0.dim() != nx {
            return Err(config("initial state dimension differs from the model"));
        }
        if self.window == 0 {
            return Err(config("window length must be at least 1"));
        }
        if self.horizon == 0 || self.horizon % self.window != 0 {
            return Err(config(format!(
                "horizon {} must be a positive multiple of the window length {}",
                self.horizon, self.window
            )));
        }
        self.attack.validate()?;
        let nz = self.attack.rb.nrows();
        if self.sensors.iter().any(|s| s.meas_dim() != nz) {
            return Err(config("bias covariance dimension differs from the sensor measurement dimension"));
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `x_0 ~ N(x0)`, `x_{k+1} = F x_k + Γ v_k`; returns `horizon + 1` states.
pub fn simulate_truth(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<DVector<f64>>> {
    let nx = cfg.model.state_dim();
    if cfg.x0.dim() != nx {
        return Err(config("initial state dimension differs from the model"));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::INITIAL_STATE]));
    let mut proc_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::PROCESS_NOISE]));
    let x0_sqrt = psd_sqrt(&cfg.x0.cov);
    let q_sqrt = psd_sqrt(cfg.model.process_noise());
    let gain = cfg.model.noise_gain() * q_sqrt;
    let f = cfg.model.transition();

    let mut x = &cfg.x0.mean + &x0_sqrt * standard_normal(&mut init_rng, nx);
    let mut out = Vec::with_capacity(cfg.horizon + 1);
    out.push(x.clone());
    for _ in 0..cfg.horizon {
        let v = standard_normal(&mut proc_rng, cfg.model.noise_dim());
        x = f * &x + &gain * v;
        out.push(x.clone());
    }
    Ok(out)
}

/// Each of the `K·N` entries is attacked independently with probability `q`.
pub fn sample_fault_pattern(attack: &AttackModel, window: usize, sensors: usize, seed: u64) -> Result<FaultVector> {
    if !(0.0..=1.0).contains(&attack.q) {
        return Err(argument(format!("attack probability q = {} outside [0, 1]", attack.q)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::PATTERN, attack.seed]));
    let mut f = FaultVector::zeros(window, sensors);
    for k in 0..window {
        for i in 0..sensors {
            if rng.random::<f64>() < attack.q {
                f.set(i, k, true);
            }
        }
    }
    Ok(f)
}

/// Measurements `z^i_k = H^i x_k + w^i_k (+ b^i_k if attacked)` for the
/// states of one window, indexed `[step][sensor]`.
///
/// Sensor noise and bias come from separate streams and a standard-normal
/// bias draw is consumed for every entry, so neither the fault pattern nor
/// `R_b` perturbs the other realizations.
pub fn synthesize_measurements(
    truth: &[DVector<f64>],
    sensors: &[SensorModel],
    f: &FaultVector,
    attack: &AttackModel,
    seed: u64,
) -> Result<Vec<Vec<DVector<f64>>>> {
    if f.window() != truth.len() || f.sensors() != sensors.len() {
        return Err(argument(format!(
            "fault vector is {}×{} but {} states and {} sensors were given",
            f.window(),
            f.sensors(),
            truth.len(),
            sensors.len()
        )));
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::SENSOR_NOISE]));
    let mut bias_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream::BIAS, attack.seed]));
    let noise_sqrt: Vec<DMatrix<f64>> = sensors.iter().map(|s| psd_sqrt(s.noise_cov())).collect();
    let bias_sqrt = psd_sqrt(&attack.rb);

    let mut out = Vec::with_capacity(truth.len());
    for (k, x) in truth.iter().enumerate() {
        let mut step = Vec::with_capacity(sensors.len());
        for (i, s) in sensors.iter().enumerate() {
            let nz = s.meas_dim();
            let mut z = s.h() * x + &noise_sqrt[i] * standard_normal(&mut noise_rng, nz);
            let unit = standard_normal(&mut bias_rng, bias_sqrt.ncols());
            if f.is_faulty(i, k) {
                let b = match &attack.bias {
                    BiasMode::Gaussian => &bias_sqrt * unit,
                    BiasMode::Constant(c) => c.clone(),
                };
                if b.len() != nz {
                    return Err(config("bias dimension differs from the measurement dimension"));
                }
                z += b;
            }
            step.push(z);
        }
        out.push(step);
    }
    Ok(out)
}
