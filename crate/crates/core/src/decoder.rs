//! Fault-vector decoding from test outcomes: the LP relaxation of noisy
//! Boolean compressed sensing, and an exhaustive minimum-mismatch oracle.
//!
//! The relaxation solved is
//!
//! ```text
//! minimize   Σ_j f_j + λ Σ_t ξ_t
//! subject to Σ_{j ∈ row t} f_j + ξ_t ≥ 1     for every positive test t
//!            f_j ≤ ξ_t          for every j in every negative test t
//!            0 ≤ f ≤ 1,  ξ ≥ 0
//! ```
//!
//! followed by rounding `f` at a threshold.

use crate::bits::Bits;
use crate::error::{argument, Error, Result};
use crate::group_testing::{binomial, FaultVector, OutcomeVector, SamplingMatrix};
use crate::lp::{DualSimplex, LinearProgram, Relation};

/// Default enumeration budget for [`brute_force_decode`].
const LAZY_TOL: f64 = 1e-12;

pub const BRUTE_FORCE_BUDGET: u128 = 50_000_000;

/// Added to λ so that, among equal-cost optima, explanations by faults are
/// preferred over explanations by slack.
const SLACK_TIE_BREAK: f64 = 1e-7;
const ROUND_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoderConfig {
    pub lambda: f64,
    pub round_threshold: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            round_threshold: 0.5,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and ≥ 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.round_threshold) {
            return Err(Error::Config(format!(
                "round_threshold must lie in [0, 1], got {}",
                self.round_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    /// Fractional fault indicators, one per column.
    pub f_frac: Vec<f64>,
    /// Per-test slack ξ.
    pub slack: Vec<f64>,
    /// `Σ f + λ Σ ξ` at the returned point.
    pub objective: f64,
}

impl LpSolution {
    pub fn round(&self, window: usize, sensors: usize, threshold: f64) -> Result<FaultVector> {
        let bits: Vec<bool> = self.f_frac.iter().map(|&v| v >= threshold - ROUND_TOL).collect();
        FaultVector::from_bits(window, sensors, Bits::from_bools(&bits))
    }

    /// Largest violation of the relaxation's constraints.
    pub fn max_violation(&self, phi: &SamplingMatrix, g: &OutcomeVector) -> f64 {
        let mut worst = 0.0_f64;
        for v in self.f_frac.iter().chain(&self.slack) {
            worst = worst.max(-v);
        }
        for v in &self.f_frac {
            worst = worst.max(v - 1.0);
        }
        for t in 0..phi.tests() {
            let row = phi.row_support(t);
            if g.get(t) {
                let s: f64 = row.iter().map(|&j| self.f_frac[j]).sum::<f64>() + self.slack[t];
                worst = worst.max(1.0 - s);
            } else {
                for &j in &row {
                    worst = worst.max(self.f_frac[j] - self.slack[t]);
                }
            }
        }
        worst
    }
}

/// Solves the relaxation without rounding.
pub fn relax(phi: &SamplingMatrix, g: &OutcomeVector, cfg: &DecoderConfig) -> Result<LpSolution> {
    cfg.validate()?;
    if g.len() != phi.tests() {
        return Err(argument(format!(
            "outcome vector has {} entries for {} tests",
            g.len(),
            phi.tests()
        )));
    }
    let cols = phi.cols();
    let tests = phi.tests();
    let rows: Vec<Vec<usize>> = (0..tests).map(|t| phi.row_support(t)).collect();

    // A column outside every positive test only costs and can only tighten
    // negative-test rows, so it is zero at every optimum.
    let mut in_positive = vec![false; cols];
    for t in (0..tests).filter(|&t| g.get(t)) {
        for &j in &rows[t] {
            in_positive[j] = true;
        }
    }
    let mut var_of = vec![usize::MAX; cols];
    let mut columns = Vec::new();
    for j in (0..cols).filter(|&j| in_positive[j]) {
        var_of[j] = columns.len();
        columns.push(j);
    }
    let nf = columns.len();

    // One slack per test. f ≤ 1 and ξ ≤ 1 hold at every optimum (clipping
    // an entry above one keeps feasibility and lowers the cost), so neither
    // bound is added explicitly.
    let weight = cfg.lambda + SLACK_TIE_BREAK;
    let mut objective = vec![1.0; nf];
    let slack_var: Vec<usize> = (0..tests).map(|t| nf + t).collect();
    objective.resize(nf + tests, weight);
    let mut base = LinearProgram::new(objective);
    for t in (0..tests).filter(|&t| g.get(t)) {
        let mut coeffs: Vec<(usize, f64)> = rows[t].iter().map(|&j| (var_of[j], 1.0)).collect();
        coeffs.push((slack_var[t], 1.0));
        base.add(coeffs, Relation::Ge, 1.0);
    }

    // Negative tests of each kept column, in test order.
    let mut negatives: Vec<Vec<usize>> = vec![Vec::new(); nf];
    for t in (0..tests).filter(|&t| !g.get(t)) {
        for &j in &rows[t] {
            if var_of[j] != usize::MAX {
                negatives[var_of[j]].push(t);
            }
        }
    }

    // The per-entry rows f_j ≤ ξ_t number in the thousands but only those of
    // columns that carry weight can bind. Generate them lazily: whenever a
    // column turns positive, add all of its rows and re-solve from the
    // previous basis. The final point satisfies every row, so it is optimal
    // for the full problem.
    let mut solver = DualSimplex::new(base)?;
    let mut added = vec![false; nf];
    loop {
        let x = solver.reoptimize()?;
        let mut grew = false;
        for v in 0..nf {
            if added[v] || x[v] <= LAZY_TOL {
                continue;
            }
            added[v] = true;
            for &t in &negatives[v] {
                solver.add_constraint(vec![(v, 1.0), (slack_var[t], -1.0)], Relation::Le, 0.0)?;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let sol = solver.solve()?;

    let mut f_frac = vec![0.0; cols];
    for (v, &j) in columns.iter().enumerate() {
        f_frac[j] = sol.x[v].clamp(0.0, 1.0);
    }
    let slack: Vec<f64> = (0..tests)
        .map(|t| {
            sol.x[slack_var[t]].max(0.0)
        })
        .collect();
    let objective = f_frac.iter().sum::<f64>() + cfg.lambda * slack.iter().sum::<f64>();
    Ok(LpSolution {
        f_frac,
        slack,
        objective,
    })
}

/// LP-relaxation decode followed by rounding.
pub fn decode(phi: &SamplingMatrix, g: &OutcomeVector, cfg: &DecoderConfig) -> Result<FaultVector> {
    let sol = relax(phi, g, cfg)?;
    sol.round(phi.window(), phi.sensors(), cfg.round_threshold)
}

/// Exhaustive decoder: the fault vector with at most `d_max` ones minimizing
/// `|Φ ⊙ f ⊕ g|`, then Hamming weight, then lexicographic order of its
/// support.
pub fn brute_force_decode(phi: &SamplingMatrix, g: &OutcomeVector, d_max: usize) -> Result<FaultVector> {
    brute_force_decode_with_budget(phi, g, d_max, BRUTE_FORCE_BUDGET)
}

pub fn brute_force_decode_with_budget(
    phi: &SamplingMatrix,
    g: &OutcomeVector,
    d_max: usize,
    budget: u128,
) -> Result<FaultVector> {
    if g.len() != phi.tests() {
        return Err(argument(format!(
            "outcome vector has {} entries for {} tests",
            g.len(),
            phi.tests()
        )));
    }
    let cols = phi.cols();
    let d_max = d_max.min(cols);
    let needed: u128 = (0..=d_max as u128).map(|w| binomial(cols as u128, w)).fold(0u128, u128::saturating_add);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let columns: Vec<Bits> = (0..cols).map(|c| phi.column(c)).collect();
    let target = g.bits().words().to_vec();
    let words = target.len();

    let mut best: (usize, Vec<usize>) = (mismatch(&vec![0; words], &target), Vec::new());
    let mut chosen = Vec::with_capacity(d_max);
    for w in 1..=d_max {
        search(&columns, &target, w, 0, &mut chosen, &mut vec![0; words], &mut best);
    }
    let mut f = FaultVector::zeros(phi.window(), phi.sensors());
    for &c in &best.1 {
        let (i, k) = f.pair(c);
        f.set(i, k, true);
    }
    Ok(f)
}

fn mismatch(encoded: &[u64], target: &[u64]) -> usize {
    encoded.iter().zip(target).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
}

fn search(
    columns: &[Bits],
    target: &[u64],
    remaining: usize,
    start: usize,
    chosen: &mut Vec<usize>,
    union: &mut Vec<u64>,
    best: &mut (usize, Vec<usize>),
) {
    if remaining == 0 {
        // strict improvement only: lighter or earlier supports win ties
        let m = mismatch(union, target);
        if m < best.0 {
            *best = (m, chosen.clone());
        }
        return;
    }
    for c in start..=(columns.len() - remaining) {
        let saved = union.clone();
        for (u, w) in union.iter_mut().zip(columns[c].words()) {
            *u |= w;
        }
        chosen.push(c);
        search(columns, target, remaining - 1, c + 1, chosen, union, best);
        chosen.pop();
        *union = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_testing::boolean_encode;

    fn matrix(rows: &[&str], window: usize, sensors: usize) -> SamplingMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect();
        SamplingMatrix::from_rows(window, sensors, &rows).unwrap()
    }

    #[test]
    fn all_negative_decodes_to_zero() {
        let phi = SamplingMatrix::generate(8, 2, 5, 0.4, 3).unwrap();
        let g = OutcomeVector::zeros(8);
        let cfg = DecoderConfig::default();
        assert_eq!(decode(&phi, &g, &cfg).unwrap().sparsity(), 0);
        assert_eq!(brute_force_decode(&phi, &g, 2).unwrap().sparsity(), 0);
    }

    #[test]
    fn identity_decodes_to_outcomes() {
        let phi = SamplingMatrix::identity(7).unwrap();
        let g = OutcomeVector::from_bools(&[false, true, false, false, true, false, true]);
        let cfg = DecoderConfig::default();
        assert_eq!(decode(&phi, &g, &cfg).unwrap().bits(), g.bits());
        assert_eq!(brute_force_decode(&phi, &g, 3).unwrap().bits(), g.bits());
    }

    #[test]
    fn zero_lambda_prefers_slack() {
        let phi = SamplingMatrix::identity(4).unwrap();
        let g = OutcomeVector::from_bools(&[true, true, false, false]);
        let cfg = DecoderConfig {
            lambda: 0.0,
            round_threshold: 0.5,
        };
        let sol = relax(&phi, &g, &cfg).unwrap();
        assert!(sol.objective.abs() < 1e-9);
        assert!(sol.f_frac.iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn dominated_fault_is_not_recovered() {
        // Column 1 ⊂ column 6: the lighter single-fault explanation wins.
        let phi = matrix(&["10010110", "01100010", "00101011", "10001101"], 2, 4);
        let f = FaultVector::from_pairs(2, 4, &[(1, 0), (2, 1)]).unwrap();
        let g = boolean_encode(&phi, &f).unwrap();
        let cfg = DecoderConfig::default();
        let sol = relax(&phi, &g, &cfg).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert_eq!(decode(&phi, &g, &cfg).unwrap().faulty_pairs(), vec![(2, 1)]);
        assert_eq!(brute_force_decode(&phi, &g, 2).unwrap().faulty_pairs(), vec![(2, 1)]);
    }

    #[test]
    fn relaxation_is_feasible_under_noise() {
        let phi = SamplingMatrix::generate(30, 3, 20, 0.15, 11).unwrap();
        let f = FaultVector::from_pairs(3, 20, &[(3, 0), (17, 2)]).unwrap();
        let mut g = boolean_encode(&phi, &f).unwrap();
        g.set(0, !g.get(0));
        g.set(5, !g.get(5));
        let sol = relax(&phi, &g, &DecoderConfig::default()).unwrap();
        assert!(sol.max_violation(&phi, &g) < 1e-7);
    }

    #[test]
    fn brute_force_tie_breaks_lexicographically() {
        // two identical columns: the first one is reported
        let phi = matrix(&["110", "001"], 1, 3);
        let g = OutcomeVector::from_bools(&[true, false]);
        assert_eq!(brute_force_decode(&phi, &g, 1).unwrap().faulty_pairs(), vec![(0, 0)]);
    }

    #[test]
    fn brute_force_budget() {
        let phi = SamplingMatrix::generate(10, 10, 10, 0.3, 1).unwrap();
        let g = OutcomeVector::zeros(10);
        assert!(matches!(
            brute_force_decode_with_budget(&phi, &g, 4, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let phi = SamplingMatrix::identity(3).unwrap();
        let g = OutcomeVector::zeros(3);
        let bad = DecoderConfig {
            lambda: -1.0,
            round_threshold: 0.5,
        };
        assert!(relax(&phi, &g, &bad).is_err());
        assert!(relax(&phi, &OutcomeVector::zeros(2), &DecoderConfig::default()).is_err());
    }
}
