//! Fixtures shared by the criterion benchmarks.

use gtkf_core::attack::{sample_fault_pattern, simulate_truth, synthesize_measurements};
use gtkf_core::group_testing::boolean_encode;
use gtkf_core::nalgebra::DVector;
use gtkf_core::{ExperimentConfig, FaultVector, OutcomeVector, Result, SamplingMatrix};

/// One window of the reference scenario: matrix, truth, faults, measurements.
pub struct WindowFixture {
    pub cfg: ExperimentConfig,
    pub phi: SamplingMatrix,
    pub faults: FaultVector,
    pub outcome: OutcomeVector,
    pub measurements: Vec<Vec<DVector<f64>>>,
}

pub fn reference_window(rb: f64, seed: u64) -> Result<WindowFixture> {
    let cfg = ExperimentConfig::reference(rb)?;
    let sc = &cfg.scenario;
    let n = sc.num_sensors();
    let p = cfg.sampling_probability()?;
    let phi = SamplingMatrix::generate(cfg.tests, sc.window, n, p, seed)?;
    let truth = simulate_truth(sc, seed ^ 1)?;
    let faults = sample_fault_pattern(&sc.attack, sc.window, n, seed ^ 2)?;
    let measurements = synthesize_measurements(&truth[1..=sc.window], &sc.sensors, &faults, &sc.attack, seed ^ 3)?;
    let outcome = boolean_encode(&phi, &faults)?;
    Ok(WindowFixture {
        cfg,
        phi,
        faults,
        outcome,
        measurements,
    })
}
