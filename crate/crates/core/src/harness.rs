//! Monte-Carlo experiment driver, baselines and metrics.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::attack::{sample_fault_pattern, simulate_truth, synthesize_measurements, ScenarioConfig};
use crate::decoder::{decode, DecoderConfig};
use crate::detector::{max_meas_dim, DetectorConfig, SequentialDetector, WindowResult};
use crate::dynamics::{update_with_group, predict, GaussianState};
use crate::error::{argument, config, Error, Result};
use crate::group_testing::{expected_chi2_upper_bound, FaultVector, SamplingMatrix};
use crate::seeds::{derive_seed, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Group-testing channels with fused tracking and LP decoding.
    Proposed,
    /// One singleton channel per sensor.
    OneByOne,
    /// A single filter on every sensor, no testing.
    AllSensors,
    /// A single filter on exactly the unattacked sensors.
    Clairvoyant,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::OneByOne, Method::AllSensors, Method::Clairvoyant];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::OneByOne => "one_by_one",
            Method::AllSensors => "all_sensors",
            Method::Clairvoyant => "clairvoyant",
        }
    }

    pub fn detects(self) -> bool {
        matches!(self, Method::Proposed | Method::OneByOne)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| config(format!("unknown method `{s}` (expected one of proposed, one_by_one, all_sensors, clairvoyant)")))
    }
}

/// How the sampling-matrix density `p` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingRate {
    /// `p = 1 / (q·K·N)`.
    FromAttackRate,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// Number of tests `T`.
    pub tests: usize,
    pub sampling: SamplingRate,
    pub decoder: DecoderConfig,
    /// Per-tail mass of the two-sided χ² test.
    pub tail_mass: f64,
    pub n_runs: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Reuse one sampling matrix for every window and run.
    pub fixed_matrix: bool,
}

impl ExperimentConfig {
    /// 150 sensors, `K = 5`, `T = 50`, `q = 0.01`, 100 runs, all methods.
    pub fn reference(rb: f64) -> Result<Self> {
        Ok(Self {
            scenario: ScenarioConfig::reference(rb)?,
            tests: 50,
            sampling: SamplingRate::FromAttackRate,
            decoder: DecoderConfig::default(),
            tail_mass: 0.0005,
            n_runs: 100,
            methods: Method::ALL.to_vec(),
            seed: 2015,
            fixed_matrix: false,
        })
    }

    pub fn sampling_probability(&self) -> Result<f64> {
        match self.sampling {
            SamplingRate::Fixed(p) => {
                if (0.0..=1.0).contains(&p) {
                    Ok(p)
                } else {
                    Err(config(format!("sampling probability {p} outside [0, 1]")))
                }
            }
            SamplingRate::FromAttackRate => {
                let kn = (self.scenario.window * self.scenario.num_sensors()) as f64;
                let q = self.scenario.attack.q;
                if q <= 0.0 {
                    return Err(config("p = 1/(qKN) needs q > 0; set p explicitly"));
                }
                Ok((1.0 / (q * kn)).min(1.0))
            }
        }
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            tail_mass: self.tail_mass,
            window: self.scenario.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.tests == 0 {
            return Err(config("number of tests T must be at least 1"));
        }
        if self.n_runs == 0 {
            return Err(config("n_runs must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config("no methods selected"));
        }
        self.sampling_probability()?;
        self.decoder.validate()?;
        self.detector().validate()
    }
}

/// Pooled false-alarm and miss counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub false_alarms: u64,
    pub negatives: u64,
    pub misses: u64,
    pub positives: u64,
}

impl ErrorCounts {
    pub fn p_fa(&self) -> f64 {
        if self.negatives == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.negatives as f64
        }
    }

    /// Zero when nothing was attacked.
    pub fn p_m(&self) -> f64 {
        if self.positives == 0 {
            0.0
        } else {
            self.misses as f64 / self.positives as f64
        }
    }
}

impl std::ops::AddAssign for ErrorCounts {
    fn add_assign(&mut self, o: Self) {
        self.false_alarms += o.false_alarms;
        self.negatives += o.negatives;
        self.misses += o.misses;
        self.positives += o.positives;
    }
}

/// Counts of decoded-versus-true disagreements.
pub fn error_counts(f_hat: &FaultVector, f_true: &FaultVector) -> Result<ErrorCounts> {
    if f_hat.len() != f_true.len() {
        return Err(argument(format!(
            "decoded vector has {} entries, truth has {}",
            f_hat.len(),
            f_true.len()
        )));
    }
    let mut c = ErrorCounts::default();
    for i in 0..f_true.len() {
        let (t, h) = (f_true.bits().get(i), f_hat.bits().get(i));
        if t {
            c.positives += 1;
            c.misses += u64::from(!h);
        } else {
            c.negatives += 1;
            c.false_alarms += u64::from(h);
        }
    }
    Ok(c)
}

/// `(P_fa, P_m)` of a single decoded vector.
pub fn error_rates(f_hat: &FaultVector, f_true: &FaultVector) -> Result<(f64, f64)> {
    let c = error_counts(f_hat, f_true)?;
    Ok((c.p_fa(), c.p_m()))
}

/// Per-step RMSE of every state component across runs, indexed
/// `[component][step]`.
pub fn rmse(estimates: &[Vec<DVector<f64>>], truth: &[Vec<DVector<f64>>]) -> Result<Vec<Vec<f64>>> {
    if estimates.len() != truth.len() || estimates.is_empty() {
        return Err(argument("estimate and truth run counts differ or are zero"));
    }
    let steps = truth[0].len();
    let dim = truth[0].first().map_or(0, |x| x.len());
    let mut sums = vec![vec![0.0; steps]; dim];
    for (est, tru) in estimates.iter().zip(truth) {
        if est.len() != steps || tru.len() != steps {
            return Err(argument("trajectories have different lengths"));
        }
        for (k, (e, t)) in est.iter().zip(tru).enumerate() {
            if e.len() != dim || t.len() != dim {
                return Err(argument("state dimensions differ"));
            }
            for c in 0..dim {
                sums[c][k] += (e[c] - t[c]).powi(2);
            }
        }
    }
    let n = estimates.len() as f64;
    Ok(sums
        .into_iter()
        .map(|row| row.into_iter().map(|s| (s / n).sqrt()).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub method: Method,
    /// Per-step RMSE of each state component, `[component][step]`.
    pub rmse: Vec<Vec<f64>>,
    /// Per-run squared errors, `[run][step][component]`, for paired tests.
    pub run_sq_errors: Vec<Vec<Vec<f64>>>,
    pub counts: ErrorCounts,
    /// χ² evaluations per window, averaged over runs and windows.
    pub avg_chi2_tests: f64,
    /// Evaluations per window had no channel tripped.
    pub nominal_chi2_tests: f64,
    /// Per-run average evaluations per window.
    pub run_chi2_tests: Vec<f64>,
    /// Expected-count upper bound per window.
    pub bound: f64,
}

impl MetricsReport {
    pub fn rmse_position(&self) -> &[f64] {
        &self.rmse[0]
    }

    pub fn rmse_velocity(&self) -> &[f64] {
        self.rmse.get(1).map_or(&[], Vec::as_slice)
    }

    pub fn p_fa(&self) -> Option<f64> {
        self.method.detects().then(|| self.counts.p_fa())
    }

    pub fn p_m(&self) -> Option<f64> {
        self.method.detects().then(|| self.counts.p_m())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub rb: f64,
    pub p: f64,
    pub reports: Vec<MetricsReport>,
}

impl ExperimentReport {
    pub fn get(&self, m: Method) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.method == m)
    }
}

struct MethodRun {
    estimates: Vec<DVector<f64>>,
    counts: ErrorCounts,
    tests: usize,
    nominal: usize,
}

/// Fault vector localized from the one-by-one trip steps: a channel that
/// trips at step `k` flags its sensor at `k` only.
pub fn one_by_one_estimate(result: &WindowResult, window: usize, sensors: usize) -> FaultVector {
    let mut f = FaultVector::zeros(window, sensors);
    for (i, t) in result.tripped_times.iter().enumerate() {
        if let Some(k) = t {
            f.set(i, *k, true);
        }
    }
    f
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let p = cfg.sampling_probability()?;
    let n = sc.num_sensors();
    let nz = max_meas_dim(&sc.sensors);
    let detector = SequentialDetector::new(cfg.detector(), nz * n * sc.window)?;
    let fixed = fixed_matrix(cfg, p)?;

    let per_run: Vec<Result<(Vec<DVector<f64>>, Vec<MethodRun>)>> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_once(cfg, &detector, fixed.as_ref(), p, r))
        .collect();

    let mut truths = Vec::with_capacity(cfg.n_runs);
    let mut by_method: Vec<Vec<MethodRun>> = cfg.methods.iter().map(|_| Vec::new()).collect();
    for res in per_run {
        let (truth, runs) = res?;
        truths.push(truth);
        for (slot, run) in by_method.iter_mut().zip(runs) {
            slot.push(run);
        }
    }

    let windows = sc.num_windows() as f64;
    let mut reports = Vec::with_capacity(cfg.methods.len());
    for (&method, runs) in cfg.methods.iter().zip(by_method) {
        let run_sq_errors: Vec<Vec<Vec<f64>>> = runs
            .iter()
            .zip(&truths)
            .map(|(run, truth)| {
                run.estimates
                    .iter()
                    .zip(truth)
                    .map(|(e, t)| (e - t).iter().map(|d| d * d).collect())
                    .collect()
            })
            .collect();
        let estimates: Vec<Vec<DVector<f64>>> = runs.iter().map(|r| r.estimates.clone()).collect();
        let rmse = rmse(&estimates, &truths)?;
        let mut counts = ErrorCounts::default();
        for r in &runs {
            counts += r.counts;
        }
        let run_chi2_tests: Vec<f64> = runs.iter().map(|r| r.tests as f64 / windows).collect();
        let avg_chi2_tests = run_chi2_tests.iter().sum::<f64>() / runs.len() as f64;
        let nominal_chi2_tests = runs.iter().map(|r| r.nominal as f64 / windows).sum::<f64>() / runs.len() as f64;
        let bound = match method {
            Method::Proposed => expected_chi2_upper_bound(cfg.tests, sc.window, p, n),
            Method::OneByOne => (sc.window * n) as f64,
            _ => 0.0,
        };
        reports.push(MetricsReport {
            method,
            rmse,
            run_sq_errors,
            counts,
            avg_chi2_tests,
            nominal_chi2_tests,
            run_chi2_tests,
            bound,
        });
    }
    Ok(ExperimentReport {
        rb: sc.attack.rb[(0, 0)],
        p,
        reports,
    })
}

/// Runs the experiment once per bias covariance `rb·I`, with identical seeds.
pub fn run_sweep(cfg: &ExperimentConfig, rbs: &[f64]) -> Result<Vec<ExperimentReport>> {
    rbs.iter()
        .map(|&rb| {
            if !(rb >= 0.0 && rb.is_finite()) {
                return Err(config(format!("bias variance {rb} must be finite and ≥ 0")));
            }
            let mut c = cfg.clone();
            let nz = c.scenario.attack.rb.nrows();
            c.scenario.attack.rb = nalgebra::DMatrix::identity(nz, nz) * rb;
            run_experiment(&c)
        })
        .collect()
}

/// Everything drawn for one Monte-Carlo run, window by window.
#[derive(Clone, Debug)]
pub struct RunData {
    /// `horizon + 1` true states, starting at `x_0`.
    pub truth: Vec<DVector<f64>>,
    pub faults: Vec<FaultVector>,
    /// `[window][step][sensor]`.
    pub measurements: Vec<Vec<Vec<DVector<f64>>>>,
    pub matrices: Vec<SamplingMatrix>,
}

/// Draws run `run` exactly as [`run_experiment`] does.
pub fn generate_run(cfg: &ExperimentConfig, run: usize) -> Result<RunData> {
    cfg.validate()?;
    let p = cfg.sampling_probability()?;
    let fixed = fixed_matrix(cfg, p)?;
    generate(cfg, fixed.as_ref(), p, run)
}

fn fixed_matrix(cfg: &ExperimentConfig, p: f64) -> Result<Option<SamplingMatrix>> {
    if !cfg.fixed_matrix {
        return Ok(None);
    }
    let sc = &cfg.scenario;
    SamplingMatrix::generate(cfg.tests, sc.window, sc.num_sensors(), p, derive_seed(cfg.seed, &[stream::MATRIX])).map(Some)
}

fn generate(cfg: &ExperimentConfig, fixed: Option<&SamplingMatrix>, p: f64, run: usize) -> Result<RunData> {
    let sc = &cfg.scenario;
    let n = sc.num_sensors();
    let kw = sc.window;
    let run_seed = derive_seed(cfg.seed, &[stream::RUN, run as u64]);
    let truth = simulate_truth(sc, derive_seed(run_seed, &[stream::TRUTH]))?;

    let mut faults = Vec::with_capacity(sc.num_windows());
    let mut measurements = Vec::with_capacity(sc.num_windows());
    let mut matrices = Vec::with_capacity(sc.num_windows());
    for w in 0..sc.num_windows() {
        let w64 = w as u64;
        let f = sample_fault_pattern(&sc.attack, kw, n, derive_seed(run_seed, &[stream::FAULTS, w64]))?;
        let states = &truth[w * kw + 1..=(w + 1) * kw];
        let z = synthesize_measurements(states, &sc.sensors, &f, &sc.attack, derive_seed(run_seed, &[stream::MEASUREMENTS, w64]))?;
        let phi = match fixed {
            Some(m) => m.clone(),
            None => SamplingMatrix::generate(cfg.tests, kw, n, p, derive_seed(run_seed, &[stream::MATRIX, w64]))?,
        };
        faults.push(f);
        measurements.push(z);
        matrices.push(phi);
    }
    Ok(RunData {
        truth,
        faults,
        measurements,
        matrices,
    })
}

fn run_once(
    cfg: &ExperimentConfig,
    detector: &SequentialDetector,
    fixed: Option<&SamplingMatrix>,
    p: f64,
    run: usize,
) -> Result<(Vec<DVector<f64>>, Vec<MethodRun>)> {
    let sc = &cfg.scenario;
    let n = sc.num_sensors();
    let kw = sc.window;
    let RunData {
        truth,
        faults,
        measurements: meas,
        matrices,
    } = generate(cfg, fixed, p, run)?;

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut state = sc.x0.clone();
        let mut run = MethodRun {
            estimates: Vec::with_capacity(sc.horizon),
            counts: ErrorCounts::default(),
            tests: 0,
            nominal: 0,
        };
        for w in 0..sc.num_windows() {
            let z = &meas[w];
            match method {
                Method::Proposed => {
                    let res = detector.step_window(&matrices[w], &sc.sensors, &sc.model, &state, z)?;
                    let f_hat = decode(&matrices[w], &res.g, &cfg.decoder)?;
                    run.counts += error_counts(&f_hat, &faults[w])?;
                    run.tests += res.chi2_tests_performed;
                    run.nominal += res.nominal_chi2_tests;
                    push_states(&mut run.estimates, &mut state, res.fused_states);
                }
                Method::OneByOne => {
                    let res = detector.one_by_one_window(&sc.sensors, &sc.model, &state, z)?;
                    let f_hat = one_by_one_estimate(&res, kw, n);
                    run.counts += error_counts(&f_hat, &faults[w])?;
                    run.tests += res.chi2_tests_performed;
                    run.nominal += res.nominal_chi2_tests;
                    push_states(&mut run.estimates, &mut state, res.fused_states);
                }
                Method::AllSensors | Method::Clairvoyant => {
                    let mut states = Vec::with_capacity(kw);
                    for (k, zk) in z.iter().enumerate() {
                        let group: Vec<usize> = match method {
                            Method::AllSensors => (0..n).collect(),
                            _ => (0..n).filter(|&i| !faults[w].is_faulty(i, k)).collect(),
                        };
                        let pred = predict(&sc.model, &state)?;
                        state = update_with_group(&pred, &sc.sensors, zk, &group)?;
                        states.push(state.clone());
                    }
                    push_states(&mut run.estimates, &mut state, states);
                }
            }
        }
        out.push(run);
    }
    Ok((truth[1..].to_vec(), out))
}

fn push_states(estimates: &mut Vec<DVector<f64>>, state: &mut GaussianState, states: Vec<GaussianState>) {
    if let Some(last) = states.last() {
        *state = last.clone();
    }
    estimates.extend(states.into_iter().map(|s| s.mean));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(vals: &[[f64; 2]]) -> Vec<DVector<f64>> {
        vals.iter().map(|v| DVector::from_row_slice(v)).collect()
    }

    #[test]
    fn rmse_cases() {
        let truth = vec![traj(&[[1.0, 2.0], [3.0, 4.0]])];
        let r = rmse(&truth, &truth).unwrap();
        assert!(r.iter().flatten().all(|&v| v == 0.0));

        let est = vec![traj(&[[1.5, 2.0], [3.5, 4.0]])];
        let r = rmse(&est, &truth).unwrap();
        assert_eq!(r[0], vec![0.5, 0.5]);

        let truth2 = vec![traj(&[[0.0, 0.0]]), traj(&[[0.0, 0.0]])];
        let est2 = vec![traj(&[[3.0, 0.0]]), traj(&[[4.0, 0.0]])];
        let r = rmse(&est2, &truth2).unwrap();
        assert!((r[0][0] - 5.0 / 2f64.sqrt()).abs() < 1e-12);

        assert!(rmse(&est2, &truth).is_err());
    }

    #[test]
    fn error_rate_cases() {
        let t = FaultVector::from_pairs(2, 4, &[(0, 0), (3, 1)]).unwrap();
        assert_eq!(error_rates(&t, &t).unwrap(), (0.0, 0.0));
        let mut comp = FaultVector::zeros(2, 4);
        for i in 0..4 {
            for k in 0..2 {
                comp.set(i, k, !t.is_faulty(i, k));
            }
        }
        assert_eq!(error_rates(&comp, &t).unwrap(), (1.0, 1.0));
        let h = FaultVector::from_pairs(2, 4, &[(0, 0), (1, 0)]).unwrap();
        let (pfa, pm) = error_rates(&h, &t).unwrap();
        assert!((pfa - 1.0 / 6.0).abs() < 1e-15);
        assert!((pm - 0.5).abs() < 1e-15);
        assert_eq!(error_rates(&FaultVector::zeros(2, 4), &FaultVector::zeros(2, 4)).unwrap(), (0.0, 0.0));
        assert!(error_rates(&h, &FaultVector::zeros(1, 4)).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("kalman".parse::<Method>().is_err());
    }

    #[test]
    fn sampling_probability_defaults() {
        let cfg = ExperimentConfig::reference(1e4).unwrap();
        assert!((cfg.sampling_probability().unwrap() - 2.0 / 15.0).abs() < 1e-15);
        let mut literal = cfg.clone();
        literal.sampling = SamplingRate::Fixed(0.01);
        assert_eq!(literal.sampling_probability().unwrap(), 0.01);
        let mut none = cfg;
        none.scenario.attack.q = 0.0;
        assert!(none.sampling_probability().is_err());
    }
}
