//! Dense two-phase primal simplex on a condensed tableau.
//!
//! Problems are `minimize cᵀx` subject to linear rows and `x ≥ 0`. Pricing is
//! Dantzig's largest coefficient; after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective moves again.

use crate::error::{argument, numeric, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-9;
const COST_PERTURBATION: f64 = 1e-8;
const DEGENERATE_STREAK: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    /// Sparse `(variable, coefficient)` pairs.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or sign violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x));
        let signs = x.iter().map(|&v| (-v).max(0.0));
        rows.chain(signs).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_pivots: 200_000 }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<SimplexSolution> {
    solve_lp_with(lp, SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: SimplexOptions) -> Result<SimplexSolution> {
    validate(lp)?;
    let mut tab = Tableau::build(lp);
    tab.run_phase_one(opts.max_pivots)?;
    tab.run_phase_two(&lp.objective, opts.max_pivots)?;
    finish(lp, &tab)
}

/// Dual simplex for `minimize cᵀx` with `c ≥ 0`, `x ≥ 0` and only `≤`/`≥`
/// rows, which makes the all-slack basis dual feasible. Rows can be added
/// after a solve and the next solve warm-starts from the previous basis,
/// which suits constraint generation.
pub struct DualSimplex {
    lp: LinearProgram,
    tab: Tableau,
    opts: SimplexOptions,
}

impl DualSimplex {
    pub fn new(lp: LinearProgram) -> Result<Self> {
        Self::with_options(lp, SimplexOptions::default())
    }

    pub fn with_options(lp: LinearProgram, opts: SimplexOptions) -> Result<Self> {
        validate(&lp)?;
        if lp.objective.iter().any(|&c| c < 0.0) {
            return Err(argument("dual simplex start needs a non-negative objective"));
        }
        if lp.constraints.iter().any(|c| c.relation == Relation::Eq) {
            return Err(argument("dual simplex start needs inequality rows only"));
        }
        // Distinct cost perturbations keep the ratio test away from the ties
        // that uniform costs would produce; the true costs are restored
        // before a solution is reported.
        let perturbed: Vec<f64> = lp
            .objective
            .iter()
            .enumerate()
            .map(|(j, &c)| c + COST_PERTURBATION * (1.0 + ((j * 7919) % 1009) as f64 / 1009.0))
            .collect();
        let tab = Tableau::build_dual(&lp, &perturbed);
        Ok(Self { lp, tab, opts })
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Result<()> {
        let c = Constraint::new(coeffs, relation, rhs);
        if relation == Relation::Eq {
            return Err(argument("dual simplex rows must be inequalities"));
        }
        if c.coeffs.iter().any(|&(j, a)| j >= self.lp.num_vars() || !a.is_finite()) || !rhs.is_finite() {
            return Err(argument("constraint references an unknown variable or non-finite data"));
        }
        self.tab.add_row(&c);
        self.lp.constraints.push(c);
        Ok(())
    }

    pub fn num_constraints(&self) -> usize {
        self.lp.constraints.len()
    }

    /// Optimal point for the perturbed costs: cheap, feasible, and optimal
    /// for the true costs up to the perturbation. Enough to decide which
    /// rows to generate next.
    pub fn reoptimize(&mut self) -> Result<Vec<f64>> {
        self.tab.dual_phase(self.opts.max_pivots)?;
        Ok(self.tab.primal(self.lp.num_vars()))
    }

    pub fn solve(&mut self) -> Result<SimplexSolution> {
        self.tab.dual_phase(self.opts.max_pivots)?;
        let mut polished = self.tab.clone();
        polished.run_phase_two(&self.lp.objective, self.opts.max_pivots)?;
        finish(&self.lp, &polished)
    }
}

fn validate(lp: &LinearProgram) -> Result<()> {
    let n = lp.num_vars();
    for c in &lp.constraints {
        if let Some(&(j, _)) = c.coeffs.iter().find(|&&(j, _)| j >= n) {
            return Err(argument(format!("constraint references variable {j} of {n}")));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|&(_, a)| !a.is_finite()) {
            return Err(argument("non-finite constraint data"));
        }
    }
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(argument("non-finite objective"));
    }
    Ok(())
}

fn finish(lp: &LinearProgram, tab: &Tableau) -> Result<SimplexSolution> {
    let x = tab.primal(lp.num_vars());
    let objective = lp.objective_value(&x);
    let viol = lp.max_violation(&x);
    if viol > FEAS_TOL {
        return Err(numeric(format!("simplex returned a point violating constraints by {viol:e}")));
    }
    Ok(SimplexSolution {
        x,
        objective,
        pivots: tab.pivots,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarKind {
    Structural,
    Slack,
    Surplus,
    Artificial,
}

/// Row `i` reads `basic_i = rhs_i − Σ_j a_ij · nonbasic_j`; the objective row
/// reads `z = o_0 − Σ_j o_j · nonbasic_j`, so a column with `o_j > 0` improves.
#[derive(Clone)]
struct Tableau {
    rows: usize,
    width: usize, // nonbasic columns + 1 (rhs at index 0)
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    kinds: Vec<VarKind>,
    // fixed-at-zero artificials that may never re-enter
    frozen: Vec<bool>,
    pivots: usize,
    scratch_idx: Vec<usize>,
    scratch_val: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        let mut kinds = vec![VarKind::Structural; n];
        let mut nonbasic: Vec<usize> = (0..n).collect();
        let mut basis = Vec::with_capacity(m);
        let mut surplus_rows = Vec::new();

        // Normalize to rhs ≥ 0 and decide the starting basic variable per row.
        let mut normalized = Vec::with_capacity(m);
        for c in &lp.constraints {
            let (sign, rel) = if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (-1.0, flipped)
            } else {
                (1.0, c.relation)
            };
            normalized.push((sign, rel));
        }
        for (i, &(_, rel)) in normalized.iter().enumerate() {
            let id = kinds.len();
            kinds.push(match rel {
                Relation::Le => VarKind::Slack,
                _ => VarKind::Artificial,
            });
            basis.push(id);
            if rel == Relation::Ge {
                surplus_rows.push(i);
            }
        }
        for _ in &surplus_rows {
            nonbasic.push(kinds.len());
            kinds.push(VarKind::Surplus);
        }
        let width = nonbasic.len() + 1;
        let mut data = vec![0.0; m * width];
        for (i, (c, &(sign, _))) in lp.constraints.iter().zip(&normalized).enumerate() {
            let row = &mut data[i * width..(i + 1) * width];
            row[0] = sign * c.rhs;
            for &(j, a) in &c.coeffs {
                row[1 + j] += sign * a;
            }
        }
        for (s, &i) in surplus_rows.iter().enumerate() {
            // a x − s + art = b  ⇒  art = b − a x + s
            data[i * width + 1 + n + s] = -1.0;
        }
        let frozen = vec![false; kinds.len()];
        Self {
            rows: m,
            width,
            data,
            obj: vec![0.0; width],
            basis,
            nonbasic,
            kinds,
            frozen,
            pivots: 0,
            scratch_idx: Vec::new(),
            scratch_val: Vec::new(),
        }
    }

    /// Slack basis for rows that are all inequalities; `≥` rows are negated
    /// so the start may be primal infeasible but is dual feasible whenever
    /// `objective ≥ 0`.
    fn build_dual(lp: &LinearProgram, objective: &[f64]) -> Self {
        let n = lp.num_vars();
        let width = n + 1;
        let mut tab = Self {
            rows: 0,
            width,
            data: Vec::with_capacity(lp.constraints.len() * width),
            obj: vec![0.0; width],
            basis: Vec::with_capacity(lp.constraints.len()),
            nonbasic: (0..n).collect(),
            kinds: vec![VarKind::Structural; n],
            frozen: vec![false; n],
            pivots: 0,
            scratch_idx: Vec::new(),
            scratch_val: Vec::new(),
        };
        for c in &lp.constraints {
            tab.add_row(c);
        }
        tab.set_objective(objective);
        tab
    }

    /// Appends an inequality row expressed in the current nonbasic columns,
    /// with a fresh basic slack.
    fn add_row(&mut self, c: &Constraint) {
        let sign = if c.relation == Relation::Ge { -1.0 } else { 1.0 };
        let w = self.width;
        let mut pos = vec![usize::MAX; self.kinds.len()];
        for (j, &id) in self.nonbasic.iter().enumerate() {
            pos[id] = j + 1;
        }
        let mut row = vec![0.0; w];
        row[0] = sign * c.rhs;
        for &(j, a) in &c.coeffs {
            let a = sign * a;
            if pos[j] != usize::MAX {
                row[pos[j]] += a;
            } else if let Some(r) = self.basis.iter().position(|&b| b == j) {
                // x_j = rhs_r − Σ t_rc x_c
                let src = &self.data[r * w..(r + 1) * w];
                row[0] -= a * src[0];
                for (dst, &t) in row[1..].iter_mut().zip(&src[1..]) {
                    *dst -= a * t;
                }
            }
        }
        self.data.extend_from_slice(&row);
        self.basis.push(self.kinds.len());
        self.kinds.push(VarKind::Slack);
        self.frozen.push(false);
        self.rows += 1;
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn run_phase_one(&mut self, max_pivots: usize) -> Result<()> {
        let art_rows: Vec<usize> = (0..self.rows)
            .filter(|&i| self.kinds[self.basis[i]] == VarKind::Artificial)
            .collect();
        if art_rows.is_empty() {
            return Ok(());
        }
        // minimize Σ art = Σ (b_i − a_i x_N): z = Σb − Σ a_i x_N, so o_j = Σ a_ij.
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        for &i in &art_rows {
            for j in 0..self.width {
                self.obj[j] += self.at(i, j);
            }
        }
        self.optimize(max_pivots)?;
        if self.obj[0] > FEAS_TOL * (1.0 + art_rows.len() as f64) {
            return Err(numeric(format!("LP infeasible (phase-one residual {:e})", self.obj[0])));
        }
        // Drive remaining basic artificials out, freeze nonbasic ones.
        for i in 0..self.rows {
            if self.kinds[self.basis[i]] != VarKind::Artificial {
                continue;
            }
            let q = (1..self.width)
                .filter(|&j| self.kinds[self.nonbasic[j - 1]] != VarKind::Artificial)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()));
            if let Some(q) = q.filter(|&q| self.at(i, q).abs() > PIVOT_TOL) {
                self.pivot(i, q);
            } else {
                // redundant row; the artificial stays basic at zero forever
                let id = self.basis[i];
                self.frozen[id] = true;
            }
        }
        for j in 1..self.width {
            let id = self.nonbasic[j - 1];
            if self.kinds[id] == VarKind::Artificial {
                self.frozen[id] = true;
            }
        }
        Ok(())
    }

    fn run_phase_two(&mut self, objective: &[f64], max_pivots: usize) -> Result<()> {
        self.set_objective(objective);
        self.optimize(max_pivots)
    }

    fn set_objective(&mut self, objective: &[f64]) {
        // z = Σ_B c_b (rhs_b − a_b x_N) + Σ_N c_j x_j
        let mut obj = vec![0.0; self.width];
        for i in 0..self.rows {
            let id = self.basis[i];
            if id < objective.len() && objective[id] != 0.0 {
                let c = objective[id];
                for j in 0..self.width {
                    obj[j] += c * self.at(i, j);
                }
            }
        }
        for j in 1..self.width {
            let id = self.nonbasic[j - 1];
            if id < objective.len() {
                obj[j] -= objective[id];
            }
        }
        self.obj = obj;
    }

    fn optimize(&mut self, max_pivots: usize) -> Result<()> {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some(q) = self.entering(bland) else {
                return Ok(());
            };
            let Some(p) = self.leaving(q, bland) else {
                return Err(numeric("LP unbounded"));
            };
            if self.pivots >= max_pivots {
                return Err(numeric(format!("simplex did not converge in {max_pivots} pivots")));
            }
            let step = self.at(p, 0) / self.at(p, q);
            if step.abs() <= PIVOT_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(p, q);
        }
    }

    fn eligible(&self, j: usize) -> bool {
        let id = self.nonbasic[j - 1];
        !self.frozen[id]
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let scale = 1.0 + self.obj[1..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = COST_TOL * scale;
        let mut best: Option<usize> = None;
        for j in 1..self.width {
            if self.obj[j] <= tol || !self.eligible(j) {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) if bland => {
                    if self.nonbasic[j - 1] < self.nonbasic[b - 1] {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
                Some(b) => {
                    if self.obj[j] > self.obj[b] {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best
    }

    /// Two-pass (Harris) ratio test: rows whose ratio is within a small
    /// feasibility relaxation of the minimum compete on pivot magnitude.
    fn leaving(&self, q: usize, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            let a = self.at(i, q);
            if a > PIVOT_TOL {
                bound = bound.min((self.at(i, 0).max(0.0) + HARRIS_TOL) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for i in 0..self.rows {
            let a = self.at(i, q);
            if a <= PIVOT_TOL || self.at(i, 0).max(0.0) / a > bound {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = if bland {
                        self.basis[i] < self.basis[b]
                    } else {
                        a > self.at(b, q)
                    };
                    Some(if better { i } else { b })
                }
            };
        }
        best
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let a = self.at(p, q);
        let inv = 1.0 / a;

        // Scale the pivot row and remember its nonzeros.
        self.scratch_idx.clear();
        self.scratch_val.clear();
        {
            let row = &mut self.data[p * w..(p + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if j == q {
                    *v = inv;
                } else if *v != 0.0 {
                    *v *= inv;
                    self.scratch_idx.push(j);
                    self.scratch_val.push(*v);
                }
            }
        }
        let idx = std::mem::take(&mut self.scratch_idx);
        let val = std::mem::take(&mut self.scratch_val);

        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f == 0.0 {
                return;
            }
            for (&j, &v) in idx.iter().zip(&val) {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < 1e-14 { 0.0 } else { nv };
            }
            row[q] = -f * inv;
        };
        for i in 0..self.rows {
            if i != p {
                eliminate(&mut self.data[i * w..(i + 1) * w]);
            }
        }
        eliminate(&mut self.obj);

        self.scratch_idx = idx;
        self.scratch_val = val;
        std::mem::swap(&mut self.basis[p], &mut self.nonbasic[q - 1]);
        self.pivots += 1;
    }

    /// Dual simplex pivots until every basic value is non-negative.
    fn dual_phase(&mut self, max_pivots: usize) -> Result<()> {
        loop {
            let Some(p) = (0..self.rows)
                .filter(|&i| self.at(i, 0) < -FEAS_TOL * 1e-2)
                .min_by(|&a, &b| self.at(a, 0).total_cmp(&self.at(b, 0)))
            else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for j in 1..self.width {
                let a = self.at(p, j);
                if a >= -PIVOT_TOL || !self.eligible(j) {
                    continue;
                }
                let ratio = (-self.obj[j]).max(0.0) / -a;
                let better = match best {
                    None => true,
                    Some((b, r)) => {
                        let tie = (ratio - r).abs() <= 1e-12 * (1.0 + r);
                        if tie {
                            a < self.at(p, b)
                        } else {
                            ratio < r
                        }
                    }
                };
                if better {
                    best = Some((j, ratio));
                }
            }
            let Some((q, _)) = best else {
                return Err(numeric("LP infeasible"));
            };
            if self.pivots >= max_pivots {
                return Err(numeric(format!("simplex did not converge in {max_pivots} pivots")));
            }
            self.pivot(p, q);
        }
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &id) in self.basis.iter().enumerate() {
            if id < n {
                x[id] = self.at(i, 0).max(0.0);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(0, 1.0)], Relation::Ge, 3.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        assert!((s.objective + 36.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + 2y s.t. x + y = 4, x − y ≤ −2 → y ≥ 3: (1, 3) → 7
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 4.0);
        lp.add(vec![(0, 1.0), (1, -1.0)], Relation::Le, -2.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 7.0).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert!(solve_lp(&lp).unwrap_err().is_numeric());

        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add(vec![(0, 1.0)], Relation::Ge, 1.0);
        assert!(solve_lp(&lp).unwrap_err().is_numeric());
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
        lp.add(vec![(0, 2.0), (1, 2.0)], Relation::Eq, 4.0);
        let s = solve_lp(&lp).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pivot_cap_is_reported() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add(vec![(0, 1.0)], Relation::Le, 1.0);
        lp.add(vec![(1, 1.0)], Relation::Le, 1.0);
        let err = solve_lp_with(&lp, SimplexOptions { max_pivots: 1 }).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn rejects_bad_variable_index() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(solve_lp(&lp).is_err());
    }
}
