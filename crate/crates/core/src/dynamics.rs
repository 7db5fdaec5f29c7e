//! Linear-Gaussian system and sensor models and the Kalman recursion over
//! arbitrary sensor groups.
//!
//! Sensor indices are zero-based throughout the library; the CLI and CSV
//! outputs translate to one-based labels.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{argument, config, numeric, Error, Result};

/// Tolerance on negative eigenvalues when validating covariances.
pub const PSD_TOL: f64 = 1e-9;

/// `x_{k+1} = F x_k + Γ v_k`, `v_k ~ N(0, Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    transition: DMatrix<f64>,
    noise_gain: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    // Γ Q Γᵀ, cached
    process_cov: DMatrix<f64>,
}

impl SystemModel {
    pub fn new(
        transition: DMatrix<f64>,
        noise_gain: DMatrix<f64>,
        process_noise: DMatrix<f64>,
    ) -> Result<Self> {
        let n = transition.nrows();
        if n == 0 || transition.ncols() != n {
            return Err(config(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if noise_gain.nrows() != n {
            return Err(config(format!(
                "noise gain has {} rows, state dimension is {n}",
                noise_gain.nrows()
            )));
        }
        let nv = noise_gain.ncols();
        if process_noise.nrows() != nv || process_noise.ncols() != nv {
            return Err(config(format!(
                "process noise must be {nv}x{nv}, got {}x{}",
                process_noise.nrows(),
                process_noise.ncols()
            )));
        }
        check_psd(&process_noise, "process noise covariance")?;
        let process_cov = &noise_gain * &process_noise * noise_gain.transpose();
        Ok(Self {
            transition,
            noise_gain,
            process_noise,
            process_cov,
        })
    }

    /// Nearly-constant-velocity model in one dimension with sample time `ts`
    /// and scalar acceleration noise variance `q`.
    pub fn constant_velocity(ts: f64, q: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[1.0, ts, 0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[0.5 * ts * ts, ts]),
            DMatrix::from_element(1, 1, q),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_gain.ncols()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn noise_gain(&self) -> &DMatrix<f64> {
        &self.noise_gain
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    /// `Γ Q Γᵀ`.
    pub fn process_cov(&self) -> &DMatrix<f64> {
        &self.process_cov
    }
}

/// `z^i_k = H^i x_k + w^i_k`, `w^i_k ~ N(0, R_w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorModel {
    h: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
}

impl SensorModel {
    pub fn new(h: DMatrix<f64>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let nz = h.nrows();
        if nz == 0 || h.ncols() == 0 {
            return Err(config("measurement matrix must be nonempty"));
        }
        if noise_cov.nrows() != nz || noise_cov.ncols() != nz {
            return Err(config(format!(
                "measurement noise must be {nz}x{nz}, got {}x{}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        if !is_symmetric(&noise_cov, 1e-12) || Cholesky::new(noise_cov.clone()).is_none() {
            return Err(config("measurement noise covariance must be symmetric positive definite"));
        }
        Ok(Self { h, noise_cov })
    }

    /// Scalar position sensor `H = [1 0 ... 0]` with noise variance `r`.
    pub fn position(state_dim: usize, r: f64) -> Result<Self> {
        let mut h = DMatrix::zeros(1, state_dim);
        h[(0, 0)] = 1.0;
        Self::new(h, DMatrix::from_element(1, 1, r))
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.h.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(config(format!(
                "covariance must be {n}x{n}, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if !is_symmetric(&cov, 1e-10) {
            return Err(config("state covariance is not symmetric"));
        }
        check_psd(&cov, "state covariance")?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Largest `|P_ij - P_ji|`.
    pub fn asymmetry(&self) -> f64 {
        asymmetry(&self.cov)
    }
}

/// Measurements of a group of sensors stacked in ascending sensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedObservation {
    pub z: DVector<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sensors: Vec<usize>,
}

impl StackedObservation {
    /// Number of sensors in the group.
    pub fn group_size(&self) -> usize {
        self.sensors.len()
    }

    /// Degrees of freedom of `νᵀ S⁻¹ ν`.
    pub fn dof(&self) -> usize {
        self.z.len()
    }
}

/// Innovation `ν`, its covariance `S` and the Cholesky factor of `S`.
#[derive(Clone, Debug)]
pub struct Innovation {
    pub nu: DVector<f64>,
    pub s: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Innovation {
    /// Normalized innovation squared, `νᵀ S⁻¹ ν`.
    pub fn nis(&self) -> f64 {
        let mut y = self.nu.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        // l_dirty's upper triangle is garbage but solve_lower only reads the lower part
        y.norm_squared()
    }

    pub fn dof(&self) -> usize {
        self.nu.len()
    }
}

pub fn predict(model: &SystemModel, state: &GaussianState) -> Result<GaussianState> {
    let n = model.state_dim();
    if state.dim() != n {
        return Err(config(format!(
            "state has dimension {}, model expects {n}",
            state.dim()
        )));
    }
    let f = model.transition();
    let mean = f * &state.mean;
    let mut cov = f * &state.cov * f.transpose() + model.process_cov();
    symmetrize(&mut cov);
    Ok(GaussianState { mean, cov })
}

/// Stacks the measurements of `group` (zero-based sensor indices).
pub fn stack_group(
    sensors: &[SensorModel],
    measurements: &[DVector<f64>],
    group: &[usize],
) -> Result<StackedObservation> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if measurements.len() != sensors.len() {
        return Err(argument(format!(
            "{} measurements for {} sensors",
            measurements.len(),
            sensors.len()
        )));
    }
    let mut members = group.to_vec();
    members.sort_unstable();
    if members.windows(2).any(|w| w[0] == w[1]) {
        return Err(argument("duplicate sensor in group"));
    }
    if let Some(&bad) = members.iter().find(|&&i| i >= sensors.len()) {
        return Err(argument(format!(
            "sensor index {bad} out of range for {} sensors",
            sensors.len()
        )));
    }
    let nx = sensors[members[0]].state_dim();
    let rows: usize = members.iter().map(|&i| sensors[i].meas_dim()).sum();
    let mut z = DVector::zeros(rows);
    let mut h = DMatrix::zeros(rows, nx);
    let mut r = DMatrix::zeros(rows, rows);
    let mut row = 0;
    for &i in &members {
        let s = &sensors[i];
        let m = s.meas_dim();
        if s.state_dim() != nx {
            return Err(config("sensors disagree on state dimension"));
        }
        if measurements[i].len() != m {
            return Err(argument(format!(
                "sensor {i} measurement has length {}, expected {m}",
                measurements[i].len()
            )));
        }
        z.rows_mut(row, m).copy_from(&measurements[i]);
        h.rows_mut(row, m).copy_from(s.h());
        r.view_mut((row, row), (m, m)).copy_from(s.noise_cov());
        row += m;
    }
    Ok(StackedObservation {
        z,
        h,
        r,
        sensors: members,
    })
}

pub fn innovate(pred: &GaussianState, obs: &StackedObservation) -> Result<Innovation> {
    if obs.z.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if obs.h.ncols() != pred.dim() {
        return Err(config(format!(
            "measurement matrix has {} columns, state dimension is {}",
            obs.h.ncols(),
            pred.dim()
        )));
    }
    let nu = &obs.z - &obs.h * &pred.mean;
    let hp = &obs.h * &pred.cov;
    let mut s = &hp * obs.h.transpose() + &obs.r;
    symmetrize(&mut s);
    let chol = Cholesky::new(s.clone())
        .ok_or_else(|| numeric("innovation covariance is not positive definite"))?;
    Ok(Innovation { nu, s, chol })
}

/// Measurement update `x̂ + W ν`, `P - W S Wᵀ` with `W = P Hᵀ S⁻¹`.
pub fn update(
    pred: &GaussianState,
    obs: &StackedObservation,
    innov: &Innovation,
) -> Result<GaussianState> {
    if innov.nu.len() != obs.z.len() || obs.h.ncols() != pred.dim() {
        return Err(config("innovation does not match observation"));
    }
    // With S = L Lᵀ and U = L⁻¹ H P: W ν = Uᵀ L⁻¹ ν and W S Wᵀ = Uᵀ U.
    let l = innov.chol.l_dirty();
    let mut u = &obs.h * &pred.cov;
    if !l.solve_lower_triangular_mut(&mut u) {
        return Err(numeric("singular innovation covariance"));
    }
    let mut y = innov.nu.clone();
    if !l.solve_lower_triangular_mut(&mut y) {
        return Err(numeric("singular innovation covariance"));
    }
    let mean = &pred.mean + u.transpose() * y;
    let mut cov = &pred.cov - u.transpose() * &u;
    symmetrize(&mut cov);
    Ok(GaussianState { mean, cov })
}

/// Predicted state updated with `group`; an empty group returns `pred`.
pub fn update_with_group(
    pred: &GaussianState,
    sensors: &[SensorModel],
    measurements: &[DVector<f64>],
    group: &[usize],
) -> Result<GaussianState> {
    match stack_group(sensors, measurements, group) {
        Ok(obs) => {
            let innov = innovate(pred, &obs)?;
            update(pred, &obs, &innov)
        }
        Err(Error::EmptyGroup) => Ok(pred.clone()),
        Err(e) => Err(e),
    }
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= tol * (1.0 + m.amax())
}

pub(crate) fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !is_symmetric(m, 1e-10) {
        return Err(config(format!("{what} is not symmetric")));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = m.clone().symmetric_eigenvalues();
    let scale = 1.0_f64.max(m.amax());
    if eig.iter().any(|&l| l < -PSD_TOL * scale) {
        return Err(config(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// Square root `A` with `A Aᵀ = m` for a symmetric PSD matrix.
pub(crate) fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return chol.l();
    }
    let eig = m.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}
