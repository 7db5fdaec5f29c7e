use gtkf_core::decoder::{brute_force_decode, decode, relax, DecoderConfig};
use gtkf_core::group_testing::{apply_noise, boolean_encode};
use gtkf_core::{FaultVector, OutcomeVector, SamplingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn supports(cols: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for w in 1..=d {
        let mut idx: Vec<usize> = (0..w).collect();
        loop {
            out.push(idx.clone());
            let mut i = w;
            while i > 0 && idx[i - 1] == cols - w + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..w {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

fn fault(phi: &SamplingMatrix, support: &[usize]) -> FaultVector {
    let mut f = FaultVector::zeros(phi.window(), phi.sensors());
    for &c in support {
        let (i, k) = f.pair(c);
        f.set(i, k, true);
    }
    f
}

#[test]
fn noise_free_recovery_on_disjunct_matrices() {
    let cfg = DecoderConfig::default();
    let mut certified = 0;
    for seed in 0..400u64 {
        let (k, n) = [(2, 5), (3, 4), (1, 10), (2, 6)][seed as usize % 4];
        let t = 10 + (seed as usize % 7);
        let phi = SamplingMatrix::generate(t, k, n, 0.3, seed).unwrap();
        for d in [1usize, 2] {
            if !phi.is_d_disjunct(d).unwrap() {
                continue;
            }
            certified += 1;
            for s in supports(phi.cols(), d) {
                let f = fault(&phi, &s);
                let g = boolean_encode(&phi, &f).unwrap();
                assert_eq!(decode(&phi, &g, &cfg).unwrap(), f, "seed {seed} d {d} support {s:?}");
                assert_eq!(brute_force_decode(&phi, &g, d).unwrap(), f);
            }
        }
    }
    assert!(certified >= 20, "only {certified} certified matrices");
}

#[test]
fn random_12x20_matches_brute_force() {
    let phi = SamplingMatrix::generate(12, 4, 5, 0.2, 2024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let a = rng.random_range(0..20);
    let b = (a + rng.random_range(1..20)) % 20;
    let f = fault(&phi, &[a, b]);
    let g = boolean_encode(&phi, &f).unwrap();
    let cfg = DecoderConfig::default();
    assert_eq!(decode(&phi, &g, &cfg).unwrap(), brute_force_decode(&phi, &g, 2).unwrap());
}

#[test]
fn objective_is_monotone_in_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..40u64 {
        let phi = SamplingMatrix::generate(10, 2, 6, 0.3, seed).unwrap();
        let bits: Vec<bool> = (0..10).map(|_| rng.random_bool(0.4)).collect();
        let g = OutcomeVector::from_bools(&bits);
        let mut last = f64::NEG_INFINITY;
        for lambda in [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
            let cfg = DecoderConfig {
                lambda,
                ..DecoderConfig::default()
            };
            let sol = relax(&phi, &g, &cfg).unwrap();
            assert!(sol.max_violation(&phi, &g) <= 1e-7);
            assert!(sol.objective >= last - 1e-9, "seed {seed} λ {lambda}: {} < {last}", sol.objective);
            last = sol.objective;
        }
    }
}

/// Columns of `f_hat` lying in some negative test.
fn in_negative(phi: &SamplingMatrix, g: &OutcomeVector, f_hat: &FaultVector) -> Vec<usize> {
    (0..phi.tests())
        .filter(|&t| !g.get(t))
        .flat_map(|t| phi.row_support(t))
        .filter(|&c| f_hat.bits().get(c))
        .collect()
}

#[test]
fn zero_slack_solutions_avoid_negative_tests() {
    let cfg = DecoderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut zero_slack = 0;
    for seed in 0..200u64 {
        let phi = SamplingMatrix::generate(12, 2, 8, 0.25, seed).unwrap();
        let support: Vec<usize> = (0..rng.random_range(0..4)).map(|_| rng.random_range(0..16)).collect();
        let g = boolean_encode(&phi, &fault(&phi, &support)).unwrap();
        let sol = relax(&phi, &g, &cfg).unwrap();
        if sol.slack.iter().any(|&s| s > 1e-9) {
            continue;
        }
        zero_slack += 1;
        let f_hat = sol.round(2, 8, cfg.round_threshold).unwrap();
        assert!(in_negative(&phi, &g, &f_hat).is_empty(), "seed {seed}");
    }
    assert!(zero_slack > 100);
}

#[test]
fn disjunct_designs_avoid_negative_tests() {
    let cfg = DecoderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut checked = 0;
    for seed in 0..2000u64 {
        let phi = SamplingMatrix::generate(20, 2, 4, 0.2, seed).unwrap();
        if !phi.is_d_disjunct(2).unwrap() {
            continue;
        }
        for _ in 0..10 {
            let support: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(0..8)).collect();
            let g = boolean_encode(&phi, &fault(&phi, &support)).unwrap();
            let f_hat = decode(&phi, &g, &cfg).unwrap();
            assert!(in_negative(&phi, &g, &f_hat).is_empty(), "seed {seed}");
            checked += 1;
        }
    }
    assert!(checked >= 100, "{checked}");
}

#[test]
fn mostly_agrees_with_brute_force_under_one_flip() {
    let cfg = DecoderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut agree, mut total) = (0, 0);
    for seed in 0..2000u64 {
        let phi = SamplingMatrix::generate(20, 2, 4, 0.2, seed).unwrap();
        if !phi.is_d_disjunct(2).unwrap() {
            continue;
        }
        for _ in 0..3 {
            let w = rng.random_range(1..=2);
            let support: Vec<usize> = (0..w).map(|_| rng.random_range(0..8)).collect();
            let g = boolean_encode(&phi, &fault(&phi, &support)).unwrap();
            let mut e = OutcomeVector::zeros(20);
            e.set(rng.random_range(0..20), true);
            let noisy = apply_noise(&g, &e).unwrap();
            total += 1;
            agree += usize::from(decode(&phi, &noisy, &cfg).unwrap() == brute_force_decode(&phi, &noisy, 2).unwrap());
        }
    }
    let rate = agree as f64 / total as f64;
    eprintln!("one-flip agreement {agree}/{total} = {rate:.3}");
    assert!(total >= 100 && rate >= 0.95, "agreement {rate} over {total}");
}

/// Exhaustive {0,1} minimum of the decoder objective with per-entry
/// negative bounds: for binary f the best slack is forced.
fn binary_objective_min(phi: &SamplingMatrix, g: &OutcomeVector, lambda: f64) -> f64 {
    let cols = phi.cols();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << cols) {
        let mut cost = mask.count_ones() as f64;
        for t in 0..phi.tests() {
            let hit = phi.row_support(t).iter().any(|&c| mask >> c & 1 == 1);
            if g.get(t) != hit {
                cost += lambda;
            }
        }
        best = best.min(cost);
    }
    best
}

#[test]
fn worked_example_relaxation_objective() {
    let phi: SamplingMatrix = "4 2 4 0.5\n10010110\n01100010\n00101011\n10001101\n".parse().unwrap();
    let g: OutcomeVector = "1110".parse().unwrap();
    let want = binary_objective_min(&phi, &g, 1.0);
    assert_eq!(want, 1.0);
    let sol = relax(&phi, &g, &DecoderConfig::default()).unwrap();
    assert!((sol.objective - want).abs() < 1e-6, "{}", sol.objective);
}
