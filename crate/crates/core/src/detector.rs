//! Sequential per-test χ² channels and fused real-time tracking over one
//! window.
//!
//! At every step the fused estimate is predicted once. Each active channel
//! whose group is nonempty at that step stacks its group's measurements
//! against the shared prediction, adds `νᵀ S⁻¹ ν` to its running statistic
//! and trips when the sum leaves the central two-sided χ² interval for the
//! accumulated degrees of freedom. Groups of channels still active after the
//! step are merged and drive one fused update, which seeds the next step.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::chi2::chi2_quantile;
use crate::dynamics::{innovate, predict, stack_group, update_with_group, GaussianState, SensorModel, SystemModel};
use crate::error::{argument, config, Result};
use crate::group_testing::{OutcomeVector, SamplingMatrix};

/// Measurements of one window, indexed `[step][sensor]`.
pub type WindowMeasurements = [Vec<DVector<f64>>];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Probability mass in each tail of the two-sided test.
    pub tail_mass: f64,
    /// Window length `K`.
    pub window: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            tail_mass: 0.0005,
            window: 5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_mass > 0.0 && self.tail_mass < 0.5) {
            return Err(config(format!("tail_mass must lie in (0, 0.5), got {}", self.tail_mass)));
        }
        if self.window == 0 {
            return Err(config("window length must be at least 1"));
        }
        Ok(())
    }
}

/// Lazily filled table of two-sided χ² acceptance intervals by dof.
#[derive(Debug)]
pub struct ChiSquareBounds {
    tail_mass: f64,
    table: Vec<OnceLock<(f64, f64)>>,
}

impl ChiSquareBounds {
    pub fn new(tail_mass: f64, max_dof: usize) -> Self {
        Self {
            tail_mass,
            table: (0..=max_dof).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `[χ²_{tail}(dof), χ²_{1−tail}(dof)]`.
    pub fn interval(&self, dof: usize) -> Result<(f64, f64)> {
        let compute = || -> Result<(f64, f64)> {
            Ok((
                chi2_quantile(self.tail_mass, dof)?,
                chi2_quantile(1.0 - self.tail_mass, dof)?,
            ))
        };
        match self.table.get(dof) {
            Some(cell) => {
                if let Some(v) = cell.get() {
                    return Ok(*v);
                }
                let v = compute()?;
                Ok(*cell.get_or_init(|| v))
            }
            None => compute(),
        }
    }

    pub fn accepts(&self, stat: f64, dof: usize) -> Result<bool> {
        let (lo, hi) = self.interval(dof)?;
        Ok(stat >= lo && stat <= hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelStatus {
    Active,
    /// Tripped at the given zero-based window step.
    Tripped(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestChannel {
    pub test_index: usize,
    pub cum_stat: f64,
    pub cum_dof: usize,
    pub status: ChannelStatus,
}

impl TestChannel {
    fn new(test_index: usize) -> Self {
        Self {
            test_index,
            cum_stat: 0.0,
            cum_dof: 0,
            status: ChannelStatus::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == ChannelStatus::Active
    }

    pub fn tripped_at(&self) -> Option<usize> {
        match self.status {
            ChannelStatus::Tripped(k) => Some(k),
            ChannelStatus::Active => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowResult {
    /// `g_t = 1` iff channel `t` tripped during the window.
    pub g: OutcomeVector,
    /// Fused posterior after each step of the window.
    pub fused_states: Vec<GaussianState>,
    /// χ² evaluations actually performed.
    pub chi2_tests_performed: usize,
    /// Evaluations had no channel tripped: the number of nonempty groups.
    pub nominal_chi2_tests: usize,
    /// Zero-based trip step per test.
    pub tripped_times: Vec<Option<usize>>,
    pub channels: Vec<TestChannel>,
}

impl WindowResult {
    pub fn posterior(&self) -> Option<&GaussianState> {
        self.fused_states.last()
    }
}

pub struct SequentialDetector {
    cfg: DetectorConfig,
    bounds: ChiSquareBounds,
}

impl SequentialDetector {
    /// `max_dof` sizes the threshold cache; larger dofs are computed on demand.
    pub fn new(cfg: DetectorConfig, max_dof: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            bounds: ChiSquareBounds::new(cfg.tail_mass, max_dof),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn bounds(&self) -> &ChiSquareBounds {
        &self.bounds
    }

    /// Group-testing window driven by `phi`.
    pub fn step_window(
        &self,
        phi: &SamplingMatrix,
        sensors: &[SensorModel],
        model: &SystemModel,
        prior: &GaussianState,
        measurements: &WindowMeasurements,
    ) -> Result<WindowResult> {
        if phi.window() != self.cfg.window {
            return Err(argument(format!(
                "matrix window {} differs from detector window {}",
                phi.window(),
                self.cfg.window
            )));
        }
        if phi.sensors() != sensors.len() {
            return Err(argument(format!(
                "matrix covers {} sensors, {} sensor models given",
                phi.sensors(),
                sensors.len()
            )));
        }
        self.run(&phi.groups(), sensors, model, prior, measurements)
    }

    /// Baseline with one singleton channel per sensor.
    pub fn one_by_one_window(
        &self,
        sensors: &[SensorModel],
        model: &SystemModel,
        prior: &GaussianState,
        measurements: &WindowMeasurements,
    ) -> Result<WindowResult> {
        let n = sensors.len();
        let groups: Vec<Vec<Vec<usize>>> = (0..self.cfg.window)
            .map(|_| (0..n).map(|i| vec![i]).collect())
            .collect();
        self.run(&groups, sensors, model, prior, measurements)
    }

    fn run(
        &self,
        groups: &[Vec<Vec<usize>>],
        sensors: &[SensorModel],
        model: &SystemModel,
        prior: &GaussianState,
        measurements: &WindowMeasurements,
    ) -> Result<WindowResult> {
        let window = self.cfg.window;
        if measurements.len() != window {
            return Err(argument(format!(
                "{} steps of measurements for a window of {window}",
                measurements.len()
            )));
        }
        if let Some(bad) = measurements.iter().find(|m| m.len() != sensors.len()) {
            return Err(argument(format!(
                "{} measurements at a step for {} sensors",
                bad.len(),
                sensors.len()
            )));
        }
        let tests = groups.first().map_or(0, Vec::len);
        let mut channels: Vec<TestChannel> = (0..tests).map(TestChannel::new).collect();
        let mut fused = prior.clone();
        let mut fused_states = Vec::with_capacity(window);
        let mut performed = 0usize;
        let mut nominal = 0usize;
        let mut in_union = vec![false; sensors.len()];

        for k in 0..window {
            let z = &measurements[k];
            let pred = predict(model, &fused)?;
            in_union.iter_mut().for_each(|v| *v = false);
            for (t, channel) in channels.iter_mut().enumerate() {
                let group = &groups[k][t];
                if group.is_empty() {
                    continue;
                }
                nominal += 1;
                if !channel.is_active() {
                    continue;
                }
                let obs = stack_group(sensors, z, group)?;
                let innov = innovate(&pred, &obs)?;
                channel.cum_stat += innov.nis();
                channel.cum_dof += obs.dof();
                performed += 1;
                if self.bounds.accepts(channel.cum_stat, channel.cum_dof)? {
                    for &i in group {
                        in_union[i] = true;
                    }
                } else {
                    channel.status = ChannelStatus::Tripped(k);
                }
            }
            let union: Vec<usize> = (0..sensors.len()).filter(|&i| in_union[i]).collect();
            fused = update_with_group(&pred, sensors, z, &union)?;
            fused_states.push(fused.clone());
        }

        let mut g = OutcomeVector::zeros(tests);
        let tripped_times: Vec<Option<usize>> = channels.iter().map(TestChannel::tripped_at).collect();
        for (t, tt) in tripped_times.iter().enumerate() {
            g.set(t, tt.is_some());
        }
        Ok(WindowResult {
            g,
            fused_states,
            chi2_tests_performed: performed,
            nominal_chi2_tests: nominal,
            tripped_times,
            channels,
        })
    }
}

/// One-shot form of [`SequentialDetector::step_window`].
pub fn step_window(
    phi: &SamplingMatrix,
    sensors: &[SensorModel],
    model: &SystemModel,
    prior: &GaussianState,
    measurements: &WindowMeasurements,
    cfg: &DetectorConfig,
) -> Result<WindowResult> {
    let max_dof = max_meas_dim(sensors) * sensors.len() * cfg.window;
    SequentialDetector::new(*cfg, max_dof)?.step_window(phi, sensors, model, prior, measurements)
}

/// One-shot form of [`SequentialDetector::one_by_one_window`].
pub fn one_by_one_window(
    sensors: &[SensorModel],
    model: &SystemModel,
    prior: &GaussianState,
    measurements: &WindowMeasurements,
    cfg: &DetectorConfig,
) -> Result<WindowResult> {
    let max_dof = max_meas_dim(sensors) * cfg.window;
    SequentialDetector::new(*cfg, max_dof)?.one_by_one_window(sensors, model, prior, measurements)
}

pub(crate) fn max_meas_dim(sensors: &[SensorModel]) -> usize {
    sensors.iter().map(SensorModel::meas_dim).max().unwrap_or(1)
}
