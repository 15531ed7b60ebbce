//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The large-scale criterion is skipped unless `--include-slow` is passed:
//! `cargo test --release --test acceptance -- --include-slow`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use npd_core::coherence::{Coherence, NestedProfiles};
use npd_core::dictionary::build_npm;
use npd_core::guarantees::{
    bounded_noise_threshold_npi, bounded_noise_threshold_restricted, refined_from_profiles, theorem1_from_profiles,
};
use npd_core::harness::{self, ExperimentConfig, Method, NoiseSpec};
use npd_core::numtheory::{divisors, ramanujan_cycle, totient};
use npd_core::recovery::{support_from_coefficients, BasisPursuit, Omp, StopRule};
use npd_core::support::index_set;
use npd_core::{Complex64, DictionaryFamily, NpdDictionary, PeriodSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn dict(family: DictionaryFamily, p_max: u64, len: usize) -> NpdDictionary {
    NpdDictionary::build(family, p_max, len, true)
}

fn c1_mutual_coherence() -> Outcome {
    let mu = Coherence::new(&dict(DictionaryFamily::Rpt, 20, 100)).unwrap().mutual_coherence();
    outcome((mu - 0.5285).abs() <= 5e-4, format!("mu = {mu:.6}"))
}

fn c2_noise_thresholds() -> Outcome {
    let coh = Coherence::new(&dict(DictionaryFamily::Rpt, 20, 100)).unwrap();
    let t4 = PeriodSet::new(&[4]).unwrap();
    let restricted = bounded_noise_threshold_restricted(&coh, &t4, 0.5).unwrap();
    let npi = bounded_noise_threshold_npi(&coh, 4, 1, 0.5).unwrap();
    outcome(
        (restricted - 1.21).abs() <= 0.01 && (npi - 6.72).abs() <= 0.01,
        format!("restricted = {restricted:.5}, zeta/nu = {npi:.5}"),
    )
}

fn c3_recovery_sweep() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (family, boundary, k_max) in [(DictionaryFamily::Rpt, 5, 8), (DictionaryFamily::Farey, 11, 13)] {
        let cfg = ExperimentConfig { family, k_range: [1, k_max], trials: 100, seed: 2024, ..Default::default() };
        let table = harness::run_recovery_sweep(&cfg).unwrap();
        for r in table.rows.iter().filter(|r| r.point_k <= boundary) {
            if r.success_rate() != Some(1.0) || r.rmse.unwrap() > 1e-6 {
                pass = false;
                notes.push(format!(
                    "{family} k={} {}: rate {:?} rmse {:?}",
                    r.point_k,
                    r.method,
                    r.success_rate(),
                    r.rmse
                ));
            }
        }
        let trials = table.rows.iter().filter(|r| r.point_k == boundary).map(|r| r.trials).max().unwrap_or(0);
        let beyond: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r.point_k > boundary)
            .map(|r| format!("k={} {} {:.4}", r.point_k, r.method, r.success_rate().unwrap()))
            .collect();
        notes.push(format!(
            "{family}: k<={boundary} perfect over {trials} mixtures per method; beyond: {}",
            beyond.join(", ")
        ));
    }
    outcome(pass, notes.join("; "))
}

/// `k` values at which the refined condition holds for every `s <= k`.
fn refined_all_s(family: DictionaryFamily) -> (Vec<usize>, Vec<usize>) {
    let cfg = ExperimentConfig { family, k_range: [1, 20], ..Default::default() };
    let table = harness::run_phase_transition(&cfg).unwrap();
    let mut ks: Vec<usize> = table.rows.iter().map(|r| r.point_k).collect();
    ks.dedup();
    let holding = ks
        .iter()
        .copied()
        .filter(|&k| table.rows.iter().filter(|r| r.point_k == k).all(|r| r.holds == Some(true)))
        .collect();
    (ks, holding)
}

fn c4_phase_boundaries() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (family, boundary) in [(DictionaryFamily::Rpt, 5), (DictionaryFamily::Farey, 11)] {
        let (ks, holding) = refined_all_s(family);
        let expected: Vec<usize> = ks.iter().copied().filter(|&k| k <= boundary).collect();
        pass &= holding == expected;
        notes.push(format!(
            "{family}: holds for all s at k in {:?} (Q_k(2) nonempty from k={})",
            holding,
            ks.first().unwrap()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn c5_bounded_noise() -> Outcome {
    let mut levels = vec![0.0, 1.21];
    levels.extend((13..=30).map(|i| i as f64 / 10.0));
    let cfg = ExperimentConfig {
        noise: NoiseSpec::Bounded { eps: 0.5 },
        periods: vec![4],
        levels,
        trials: 2000,
        methods: vec![Method::Omp],
        seed: 7,
        ..Default::default()
    };
    let table = harness::run_bounded_noise_sweep(&cfg).unwrap();
    let above: Vec<_> = table.rows.iter().filter(|r| r.point_x >= 1.21).collect();
    let pass = above.iter().all(|r| r.success_rate() == Some(1.0) && r.rmse.unwrap() <= 1e-8);
    let worst = above.iter().map(|r| r.rmse.unwrap()).fold(0.0, f64::max);
    let at_zero = table.rows[0].success_rate().unwrap();
    outcome(
        pass,
        format!(
            "{} levels in [1.21, 3.0], 2000 trials each; max rmse {worst:.2e}; success at gamma=0: {at_zero:.4}",
            above.len()
        ),
    )
}

fn c6_gaussian_noise() -> Outcome {
    let cfg = ExperimentConfig {
        noise: NoiseSpec::Gaussian { sigma: 1.0 },
        periods: vec![4],
        levels: vec![1.0],
        trials: 2000,
        methods: vec![Method::Omp],
        seed: 8,
        ..Default::default()
    };
    let table = harness::run_gaussian_sweep(&cfg).unwrap();
    let rate = table.rows[0].success_rate().unwrap();
    outcome(rate >= 0.99, format!("success at alpha=1: {rate:.4} over 2000 trials"))
}

/// Sandwich, implication chain and exhaustive exactness on one dictionary.
fn sandwich(d: &NpdDictionary, m: usize, profiles: &NestedProfiles) -> Result<String, String> {
    let erc = profiles.erc_values().unwrap();
    let omp = Omp::new(d).unwrap();
    let bp = BasisPursuit::new(d).unwrap();
    let mut checked = 0;
    let mut exact_k = 0;
    let mut exact_done = vec![false; profiles.all().len()];
    for k in 1..=20 {
        let Ok(npi) = profiles.npi(k) else { continue };
        let nu = profiles.npa(k).unwrap().value;
        let m_k = profiles.erc_baseline(k).unwrap().value;
        if nu < 1.0 {
            checked += 1;
            let bound = npi.value / (1.0 - nu);
            if m_k > bound + 1e-9 {
                return Err(format!("{} m={m} k={k}: M = {m_k} > {bound}", d.family()));
            }
        }
        if theorem1_from_profiles(profiles, k).unwrap().holds {
            if m_k >= 1.0 {
                return Err(format!("{} m={m} k={k}: thm1 holds but M = {m_k}", d.family()));
            }
            exact_k = k;
            for (i, p) in profiles.all().iter().enumerate() {
                if p.support_size() > k || exact_done[i] {
                    continue;
                }
                exact_done[i] = true;
                debug_assert!(erc[i] < 1.0);
                let t = p.periods();
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let (_, y) = harness::gen_mixture(d, t, 0.0, &mut rng);
                let r = omp.solve(&y, &StopRule::sparsity(t.support().len())).map_err(|e| e.to_string())?;
                let x = bp.solve(&y, harness::BP_TOLERANCE).map_err(|e| e.to_string())?.x;
                if r.support != t.support() || support_from_coefficients(&x, 1e-6) != t.support() {
                    return Err(format!("{} m={m}: inexact recovery for T = {t}", d.family()));
                }
            }
        }
    }
    Ok(format!("{} m={m}: {checked} sandwich points, exact recovery over Q_k({m}) up to k={exact_k}", d.family()))
}

fn c7_sandwich() -> Outcome {
    let mut notes = Vec::new();
    for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
        let d = dict(family, 20, 100);
        let coh = Coherence::new(&d).unwrap();
        for m in [1, 2] {
            let mut profiles = coh.profiles(m, 20);
            profiles.compute_erc(&coh).unwrap();
            match sandwich(&d, m, &profiles) {
                Ok(note) => notes.push(note),
                Err(e) => return outcome(false, e),
            }
        }
    }
    outcome(true, notes.join("; "))
}

fn c8_lambda_min() -> Outcome {
    let mut checked = 0;
    for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
        let coh = Coherence::new(&dict(family, 20, 100)).unwrap();
        for m in [1, 2] {
            let profiles = coh.profiles(m, 20);
            for p in profiles.all() {
                let lambda = coh.min_eig_gram(p.periods().support());
                // nu_{k,m} grows with k, so k = |S_T| is the tightest grid point for T
                for k in p.support_size()..=20 {
                    let nu = profiles.npa(k).unwrap().value;
                    if nu < 1.0 {
                        checked += 1;
                        if lambda < 1.0 - nu - 1e-9 {
                            return outcome(
                                false,
                                format!("{family} m={m} T={} k={k}: lambda = {lambda} < 1 - {nu}", p.periods()),
                            );
                        }
                    }
                }
            }
        }
    }
    outcome(true, format!("{checked} (T, k) pairs checked"))
}

fn c9_structure() -> Outcome {
    let mut fails = Vec::new();
    let real = |rows: &[[f64; 4]]| DMatrix::from_fn(4, 4, |r, c| Complex64::new(rows[r][c], 0.0));
    let a4 = real(&[[1., 1., 2., 0.], [1., -1., 0., 2.], [1., 1., -2., 0.], [1., -1., 0., -2.]]);
    if build_npm(DictionaryFamily::Rpt, 4) != a4 {
        fails.push("A_4");
    }
    let cycles: [&[i64]; 5] = [&[1], &[1, -1], &[2, -1, -1], &[2, 0, -2, 0], &[4, -1, -1, -1, -1]];
    if (1..=5).any(|q| ramanujan_cycle(q) != cycles[q as usize - 1]) {
        fails.push("c_q cycles");
    }
    if index_set(5) != [7, 8, 9, 10] {
        fails.push("I_5");
    }
    let t1 = PeriodSet::new(&[3, 5]).unwrap();
    let t2 = PeriodSet::new(&[3, 4]).unwrap();
    if t1.support() != [1, 3, 4, 7, 8, 9, 10] || t2.support() != [1, 2, 3, 4, 5, 6] {
        fails.push("S_T for {3,5} and {3,4}");
    }
    if (1..=200u64).any(|p| divisors(p).iter().map(|&q| totient(q)).sum::<u64>() != p) {
        fails.push("totient sum");
    }
    for family in [DictionaryFamily::Rpt, DictionaryFamily::Farey] {
        for p in 1..=30u64 {
            let a = build_npm(family, p);
            let mut col = 0;
            let mut blocks = Vec::new();
            for q in divisors(p) {
                let w = totient(q) as usize;
                blocks.push(a.columns(col, w).into_owned());
                col += w;
            }
            for i in 0..blocks.len() {
                for j in i + 1..blocks.len() {
                    if (blocks[i].adjoint() * &blocks[j]).norm() > 1e-8 {
                        fails.push("NPM block orthogonality");
                    }
                }
            }
        }
    }
    fails.dedup();
    if fails.is_empty() {
        outcome(true, "A_4, c_1..c_5, I_5, S_{3,5} and S_{3,4}, totient sums to 200, NPM blocks to 30")
    } else {
        outcome(false, format!("mismatch: {}", fails.join(", ")))
    }
}

fn c10_large_scale() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let farey = dict(DictionaryFamily::Farey, 100, 1915);
    let coh = Coherence::new(&farey).unwrap();
    let mut singles = coh.profiles(1, 100);
    singles.compute_erc(&coh).unwrap();
    let worst = singles.erc_baseline(100).unwrap();
    pass &= worst.value < 1.0;
    notes.push(format!("Farey max_k M_k(1) = {:.4} at T={:?}", worst.value, worst.periods.periods()));

    let pairs = coh.profiles(2, 100);
    let holding: Vec<usize> = (1..=100)
        .filter(|&k| pairs.members(k).next().is_some())
        .filter(|&k| (1..=k).all(|s| refined_from_profiles(&pairs, k, s).unwrap().holds))
        .collect();
    let first_fail = (4..=100).find(|k| !holding.contains(k));
    pass &= (4..54).all(|k| holding.contains(&k));
    notes.push(format!("Farey m=2 refined holds for all s up to k={}", first_fail.map_or(100, |k| k - 1)));
    drop(pairs);
    drop(coh);

    let rpt = dict(DictionaryFamily::Rpt, 100, 1915);
    let coh = Coherence::new(&rpt).unwrap();
    let pairs = coh.profiles(2, 100);
    let ok = (4..=100).all(|k| (1..=3).all(|s| refined_from_profiles(&pairs, k, s).unwrap().holds));
    pass &= ok;
    notes.push(format!("RPT m=2 refined at s<=3 for all k<=100: {ok}"));
    outcome(pass, notes.join("; "))
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let include_slow = std::env::args().any(|a| a == "--include-slow");
    // (number, name, budget, runner)
    let criteria: Vec<Criterion> = vec![
        (1, "mutual coherence of RPT 20/100", Duration::from_secs(1), c1_mutual_coherence),
        (2, "bounded-noise thresholds", Duration::from_secs(5), c2_noise_thresholds),
        (3, "noise-free recovery sweep", Duration::from_secs(600), c3_recovery_sweep),
        (4, "refined-condition phase boundaries", Duration::from_secs(120), c4_phase_boundaries),
        (5, "bounded-noise recovery above threshold", Duration::from_secs(300), c5_bounded_noise),
        (6, "Gaussian-noise recovery at alpha = 1", Duration::from_secs(300), c6_gaussian_noise),
        (7, "ERC sandwich and exact recovery", Duration::from_secs(600), c7_sandwich),
        (8, "smallest Gram eigenvalue bound", Duration::from_secs(600), c8_lambda_min),
        (9, "structural checks", Duration::from_secs(10), c9_structure),
        (10, "large-scale conditions (slow)", Duration::from_secs(7200), c10_large_scale),
    ];
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        if n == 10 && !include_slow {
            println!("criterion {n:>2} SKIP  {name}: pass --include-slow to run");
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = result.pass && in_budget;
        failed += !pass as u32;
        println!(
            "criterion {n:>2} {}  {name}: {} [{:.2}s of {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_budget { "" } else { ", over budget" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
