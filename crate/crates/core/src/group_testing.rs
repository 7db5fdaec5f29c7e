//! Sampling matrices over the (sensor × time) grid, Boolean test encoding and
//! disjunctness certification.
//!
//! Column `c` of a `T × KN` matrix is sensor `c % N` at window step `c / N`
//! (both zero-based), so the per-step block `Φ_k` is the contiguous column
//! range `k·N .. (k+1)·N`.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::Bits;
use crate::error::{argument, Error, Result};

/// Default work budget for the brute-force disjunctness check.
pub const DISJUNCT_BUDGET: u128 = 2_000_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMatrix {
    window: usize,
    sensors: usize,
    p: f64,
    rows: Vec<Bits>,
}

impl SamplingMatrix {
    pub fn zeros(tests: usize, window: usize, sensors: usize) -> Result<Self> {
        check_dims(tests, window, sensors)?;
        Ok(Self {
            window,
            sensors,
            p: 0.0,
            rows: vec![Bits::zeros(window * sensors); tests],
        })
    }

    /// I.i.d. Bernoulli(`p`) entries drawn block by block, column-major within
    /// each block.
    pub fn generate(tests: usize, window: usize, sensors: usize, p: f64, seed: u64) -> Result<Self> {
        check_dims(tests, window, sensors)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(argument(format!("sampling probability {p} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(tests, window, sensors)?;
        m.p = p;
        for k in 0..window {
            for j in 0..sensors {
                let col = k * sensors + j;
                for row in m.rows.iter_mut() {
                    if rng.random::<f64>() < p {
                        row.set(col, true);
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn from_rows(window: usize, sensors: usize, rows: &[Vec<bool>]) -> Result<Self> {
        check_dims(rows.len(), window, sensors)?;
        let cols = window * sensors;
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(argument(format!("row of length {} but K·N = {cols}", bad.len())));
        }
        let rows: Vec<Bits> = rows.iter().map(|r| Bits::from_bools(r)).collect();
        let ones: usize = rows.iter().map(Bits::count_ones).sum();
        let p = ones as f64 / (rows.len() * cols) as f64;
        Ok(Self {
            window,
            sensors,
            p,
            rows,
        })
    }

    /// `n × n` identity with a single time step: the one-by-one design.
    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, 1, n)?;
        for i in 0..n {
            m.rows[i].set(i, true);
        }
        m.p = 1.0 / n as f64;
        Ok(m)
    }

    /// One row per sensor covering that sensor at every step of the window.
    pub fn one_by_one(window: usize, sensors: usize) -> Result<Self> {
        let mut m = Self::zeros(sensors, window, sensors)?;
        for i in 0..sensors {
            for k in 0..window {
                m.rows[i].set(k * sensors + i, true);
            }
        }
        m.p = 1.0 / sensors as f64;
        Ok(m)
    }

    pub fn tests(&self) -> usize {
        self.rows.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn cols(&self) -> usize {
        self.window * self.sensors
    }

    /// Bernoulli parameter used at generation (empirical density otherwise).
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn get(&self, t: usize, col: usize) -> bool {
        self.rows[t].get(col)
    }

    pub fn set(&mut self, t: usize, col: usize, v: bool) {
        self.rows[t].set(col, v)
    }

    pub fn row(&self, t: usize) -> &Bits {
        &self.rows[t]
    }

    /// Columns selected by test `t`.
    pub fn row_support(&self, t: usize) -> Vec<usize> {
        self.rows[t].iter_ones().collect()
    }

    /// Sensors of testing group `𝒢_{t,k}` (zero-based `t` and `k`).
    pub fn group_at(&self, t: usize, k: usize) -> Result<Vec<usize>> {
        if t >= self.tests() || k >= self.window {
            return Err(argument(format!(
                "group ({t}, {k}) outside {} tests × {} steps",
                self.tests(),
                self.window
            )));
        }
        let base = k * self.sensors;
        Ok((0..self.sensors).filter(|&j| self.rows[t].get(base + j)).collect())
    }

    /// All groups indexed `[k][t]`.
    pub fn groups(&self) -> Vec<Vec<Vec<usize>>> {
        (0..self.window)
            .map(|k| {
                (0..self.tests())
                    .map(|t| self.group_at(t, k).expect("in range"))
                    .collect()
            })
            .collect()
    }

    /// Number of nonempty groups `𝒢_{t,k}`.
    pub fn nonempty_groups(&self) -> usize {
        let mut n = 0;
        for t in 0..self.tests() {
            for k in 0..self.window {
                let base = k * self.sensors;
                if (0..self.sensors).any(|j| self.rows[t].get(base + j)) {
                    n += 1;
                }
            }
        }
        n
    }

    /// Column `c` as a bitset over tests.
    pub fn column(&self, c: usize) -> Bits {
        let mut b = Bits::zeros(self.tests());
        for (t, row) in self.rows.iter().enumerate() {
            if row.get(c) {
                b.set(t, true);
            }
        }
        b
    }

    /// Brute-force d-disjunctness check with the default budget.
    pub fn is_d_disjunct(&self, d: usize) -> Result<bool> {
        is_d_disjunct(self, d, DISJUNCT_BUDGET)
    }

    /// Plain-text form: `T K N p`, then `T` lines of `K·N` `0`/`1` characters.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.tests() * (self.cols() + 1) + 32);
        let _ = writeln!(out, "{} {} {} {}", self.tests(), self.window, self.sensors, self.p);
        for row in &self.rows {
            let _ = writeln!(out, "{row}");
        }
        out
    }
}

impl FromStr for SamplingMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("matrix header must be `T K N p`, got `{header}`")));
        }
        let parse_count = |f: &str, what: &str| {
            f.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad {what} `{f}` in matrix header")))
        };
        let tests = parse_count(fields[0], "T")?;
        let window = parse_count(fields[1], "K")?;
        let sensors = parse_count(fields[2], "N")?;
        let p: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad p `{}` in matrix header", fields[3])))?;
        let rows: Vec<Vec<bool>> = lines
            .map(parse_bit_line)
            .collect::<Result<_>>()?;
        if rows.len() != tests {
            return Err(Error::Parse(format!("header says {tests} rows, found {}", rows.len())));
        }
        let mut m = Self::from_rows(window, sensors, &rows).map_err(|e| Error::Parse(e.to_string()))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parse(format!("p = {p} outside [0, 1]")));
        }
        m.p = p;
        Ok(m)
    }
}

fn parse_bit_line(line: &str) -> Result<Vec<bool>> {
    line.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::Parse(format!("unexpected character `{other}` in bit string"))),
        })
        .collect()
}

fn check_dims(tests: usize, window: usize, sensors: usize) -> Result<()> {
    if tests == 0 || window == 0 || sensors == 0 {
        return Err(argument(format!(
            "T, K, N must all be at least 1 (got {tests}, {window}, {sensors})"
        )));
    }
    Ok(())
}

/// Indicator over the `K·N` (sensor, step) pairs of a window.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FaultVector {
    window: usize,
    sensors: usize,
    bits: Bits,
}

impl FaultVector {
    pub fn zeros(window: usize, sensors: usize) -> Self {
        Self {
            window,
            sensors,
            bits: Bits::zeros(window * sensors),
        }
    }

    pub fn from_bits(window: usize, sensors: usize, bits: Bits) -> Result<Self> {
        if bits.len() != window * sensors {
            return Err(argument(format!(
                "fault vector of length {} for K·N = {}",
                bits.len(),
                window * sensors
            )));
        }
        Ok(Self { window, sensors, bits })
    }

    /// From zero-based `(sensor, step)` pairs.
    pub fn from_pairs(window: usize, sensors: usize, faulty: &[(usize, usize)]) -> Result<Self> {
        let mut f = Self::zeros(window, sensors);
        for &(i, k) in faulty {
            if i >= sensors || k >= window {
                return Err(argument(format!("fault ({i}, {k}) outside {sensors} sensors × {window} steps")));
            }
            f.set(i, k, true);
        }
        Ok(f)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn index(&self, sensor: usize, step: usize) -> usize {
        step * self.sensors + sensor
    }

    /// `(sensor, step)` of entry `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        (i % self.sensors, i / self.sensors)
    }

    pub fn is_faulty(&self, sensor: usize, step: usize) -> bool {
        self.bits.get(self.index(sensor, step))
    }

    pub fn set(&mut self, sensor: usize, step: usize, v: bool) {
        let i = self.index(sensor, step);
        self.bits.set(i, v)
    }

    /// Total sparsity `d`.
    pub fn sparsity(&self) -> usize {
        self.bits.count_ones()
    }

    /// `D_k`, the number of faulty sensors at step `k`.
    pub fn sparsity_at(&self, step: usize) -> usize {
        (0..self.sensors).filter(|&i| self.is_faulty(i, step)).count()
    }

    /// Faulty `(sensor, step)` pairs in column order.
    pub fn faulty_pairs(&self) -> Vec<(usize, usize)> {
        self.bits.iter_ones().map(|i| self.pair(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OutcomeVector {
    bits: Bits,
}

impl OutcomeVector {
    pub fn zeros(len: usize) -> Self {
        Self { bits: Bits::zeros(len) }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self {
            bits: Bits::from_bools(bits),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, t: usize) -> bool {
        self.bits.get(t)
    }

    pub fn set(&mut self, t: usize, v: bool) {
        self.bits.set(t, v)
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.bits.to_bools()
    }

    /// Single line of `0`/`1` characters.
    pub fn to_text(&self) -> String {
        format!("{}\n", self.bits)
    }
}

impl FromStr for OutcomeVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = parse_bit_line(s)?;
        if bits.is_empty() {
            return Err(Error::Parse("empty outcome vector".into()));
        }
        Ok(Self::from_bools(&bits))
    }
}

/// `g = Φ ⊙ f`: `g_t` is the OR over columns of `Φ(t, j) ∧ f_j`.
pub fn boolean_encode(phi: &SamplingMatrix, f: &FaultVector) -> Result<OutcomeVector> {
    if phi.cols() != f.len() {
        return Err(argument(format!(
            "matrix has {} columns, fault vector has {} entries",
            phi.cols(),
            f.len()
        )));
    }
    let fw = f.bits().words();
    let mut g = OutcomeVector::zeros(phi.tests());
    for (t, row) in phi.rows.iter().enumerate() {
        let hit = row.words().iter().zip(fw).any(|(a, b)| a & b != 0);
        g.set(t, hit);
    }
    Ok(g)
}

/// `g ⊕ e`.
pub fn apply_noise(g: &OutcomeVector, e: &OutcomeVector) -> Result<OutcomeVector> {
    if g.len() != e.len() {
        return Err(argument(format!(
            "outcome length {} but error vector length {}",
            g.len(),
            e.len()
        )));
    }
    Ok(OutcomeVector {
        bits: g.bits.xor(&e.bits),
    })
}

/// True iff for every column `c` and every set `S` of `d` other columns some
/// row has a one in `c` and zeros across `S`.
///
/// Refuses with [`Error::BudgetExceeded`] when `C(cols, d+1)·cols` exceeds
/// `budget`.
pub fn is_d_disjunct(phi: &SamplingMatrix, d: usize, budget: u128) -> Result<bool> {
    let cols = phi.cols();
    if d + 1 > cols {
        return Err(argument(format!("d + 1 = {} exceeds column count {cols}", d + 1)));
    }
    let needed = binomial(cols as u128, (d + 1) as u128).saturating_mul(cols as u128);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let columns: Vec<Bits> = (0..cols).map(|c| phi.column(c)).collect();
    let words = phi.tests().div_ceil(64);
    for c in 0..cols {
        let others: Vec<usize> = (0..cols).filter(|&j| j != c).collect();
        let mut union = vec![0u64; words];
        if covered(&columns, c, &others, 0, d, &mut union) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether some `remaining`-subset of `others[start..]`, together with the
/// columns already OR-ed into `union`, covers column `c`.
fn covered(
    columns: &[Bits],
    c: usize,
    others: &[usize],
    start: usize,
    remaining: usize,
    union: &mut [u64],
) -> bool {
    let target = columns[c].words();
    let escapes = target.iter().zip(union.iter()).any(|(t, u)| t & !u != 0);
    if !escapes {
        // Any completion of this partial set still covers c.
        return true;
    }
    if remaining == 0 {
        return false;
    }
    for i in start..=(others.len() - remaining) {
        let saved = union.to_vec();
        for (u, w) in union.iter_mut().zip(columns[others[i]].words()) {
            *u |= w;
        }
        let hit = covered(columns, c, others, i + 1, remaining - 1, union);
        union.copy_from_slice(&saved);
        if hit {
            return true;
        }
    }
    false
}

/// Upper bound on the expected number of χ² evaluations, `T·K·(1 − (1 − p)^N)`.
pub fn expected_chi2_upper_bound(tests: usize, window: usize, p: f64, sensors: usize) -> f64 {
    let nonempty = 1.0 - (1.0 - p).powf(sensors as f64);
    tests as f64 * window as f64 * nonempty
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> (SamplingMatrix, FaultVector) {
        let rows = [
            "10010110", //
            "01100010",
            "00101011",
            "10001101",
        ];
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect();
        let phi = SamplingMatrix::from_rows(2, 4, &rows).unwrap();
        // sensor 2 at step 1, sensor 3 at step 2 (one-based)
        let f = FaultVector::from_pairs(2, 4, &[(1, 0), (2, 1)]).unwrap();
        (phi, f)
    }

    #[test]
    fn degenerate_generation() {
        let z = SamplingMatrix::generate(4, 3, 5, 0.0, 1).unwrap();
        assert_eq!((0..4).map(|t| z.row(t).count_ones()).sum::<usize>(), 0);
        let o = SamplingMatrix::generate(4, 3, 5, 1.0, 1).unwrap();
        assert_eq!((0..4).map(|t| o.row(t).count_ones()).sum::<usize>(), 60);
        assert!(SamplingMatrix::generate(0, 3, 5, 0.5, 1).is_err());
        assert!(SamplingMatrix::generate(1, 3, 5, 1.5, 1).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = SamplingMatrix::generate(10, 3, 7, 0.3, 42).unwrap();
        let b = SamplingMatrix::generate(10, 3, 7, 0.3, 42).unwrap();
        let c = SamplingMatrix::generate(10, 3, 7, 0.3, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generation_density_concentrates() {
        let (t, k, n) = (50, 5, 150);
        let p = 2.0 / 15.0;
        let m = SamplingMatrix::generate(t, k, n, p, 7).unwrap();
        let ones: usize = (0..t).map(|r| m.row(r).count_ones()).sum();
        let total = (t * k * n) as f64;
        let mean = ones as f64 / total;
        let se = (p * (1.0 - p) / total).sqrt();
        assert!((mean - p).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn encode_cases() {
        let (phi, f) = worked_example();
        let g = boolean_encode(&phi, &f).unwrap();
        assert_eq!(g.to_bools(), vec![true, true, true, false]);
        let none = boolean_encode(&phi, &FaultVector::zeros(2, 4)).unwrap();
        assert_eq!(none.count_ones(), 0);

        let id = SamplingMatrix::identity(9).unwrap();
        let f = FaultVector::from_pairs(1, 9, &[(0, 0), (4, 0), (8, 0)]).unwrap();
        assert_eq!(boolean_encode(&id, &f).unwrap().bits(), f.bits());

        assert!(boolean_encode(&phi, &FaultVector::zeros(3, 4)).is_err());
    }

    #[test]
    fn noise_cases() {
        let g = OutcomeVector::from_bools(&[true, true, true, false]);
        assert_eq!(apply_noise(&g, &OutcomeVector::zeros(4)).unwrap(), g);
        assert_eq!(apply_noise(&g, &g).unwrap().count_ones(), 0);
        let e = OutcomeVector::from_bools(&[false, false, false, true]);
        assert_eq!(apply_noise(&g, &e).unwrap().to_bools(), vec![true; 4]);
        assert!(apply_noise(&g, &OutcomeVector::zeros(3)).is_err());
    }

    #[test]
    fn groups() {
        let (phi, _) = worked_example();
        // test 2, step 1 (one-based) contains sensor 2
        assert!(phi.group_at(1, 0).unwrap().contains(&1));
        let z = SamplingMatrix::zeros(3, 2, 4).unwrap();
        assert!(z.group_at(2, 1).unwrap().is_empty());
        assert_eq!(z.nonempty_groups(), 0);
        assert!(z.group_at(3, 0).is_err());
        assert!(z.group_at(0, 2).is_err());

        let id = SamplingMatrix::one_by_one(3, 5).unwrap();
        for k in 0..3 {
            for j in 0..5 {
                assert_eq!(id.group_at(j, k).unwrap(), vec![j]);
            }
        }
    }

    #[test]
    fn identity_is_maximally_disjunct() {
        let id = SamplingMatrix::identity(6).unwrap();
        assert!(id.is_d_disjunct(5).unwrap());
        assert!(id.is_d_disjunct(2).unwrap());
    }

    #[test]
    fn duplicate_column_is_not_disjunct() {
        let rows = vec![
            vec![true, true, false],
            vec![false, false, true],
            vec![true, true, true],
        ];
        let m = SamplingMatrix::from_rows(1, 3, &rows).unwrap();
        assert!(!m.is_d_disjunct(1).unwrap());
        assert!(m.is_d_disjunct(0).unwrap());
    }

    #[test]
    fn no_4x8_matrix_is_disjunct() {
        // A 1-disjunct matrix's columns form an antichain; the largest
        // antichain of subsets of 4 rows has C(4,2) = 6 < 8 members, so the
        // four-test toy example cannot be 1- (let alone 2-) disjunct.
        let (phi, _) = worked_example();
        assert!(!phi.is_d_disjunct(1).unwrap());
        assert!(!phi.is_d_disjunct(2).unwrap());
        for seed in 0..200 {
            let m = SamplingMatrix::generate(4, 2, 4, 0.5, seed).unwrap();
            assert!(!m.is_d_disjunct(1).unwrap());
        }
    }

    #[test]
    fn disjunct_budget_guard() {
        let m = SamplingMatrix::generate(10, 10, 10, 0.5, 1).unwrap();
        assert!(matches!(
            is_d_disjunct(&m, 3, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(is_d_disjunct(&SamplingMatrix::identity(3).unwrap(), 3, 1000).is_err());
    }

    #[test]
    fn bound_formula() {
        assert_eq!(expected_chi2_upper_bound(50, 5, 1.0, 150), 250.0);
        assert_eq!(expected_chi2_upper_bound(50, 5, 0.0, 150), 0.0);
        let p = 1.0 / 7.5;
        let b = expected_chi2_upper_bound(50, 5, p, 150);
        assert!((b - 250.0 * (1.0 - (1.0 - p).powi(150))).abs() < 1e-6);
        assert!((b - 250.0).abs() < 1e-6);
    }

    #[test]
    fn text_round_trip() {
        let m = SamplingMatrix::generate(6, 2, 5, 0.37, 9).unwrap();
        let back: SamplingMatrix = m.to_text().parse().unwrap();
        assert_eq!(back, m);
        let g = OutcomeVector::from_bools(&[true, false, true]);
        assert_eq!(g.to_text().parse::<OutcomeVector>().unwrap(), g);
        assert!("3 1 2 0.5\n01\n10\n".parse::<SamplingMatrix>().is_err());
        assert!("1 1 2 0.5\n0x\n".parse::<SamplingMatrix>().is_err());
        assert!("1 1 2\n01\n".parse::<SamplingMatrix>().is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(52, 5), 2_598_960);
    }
}
