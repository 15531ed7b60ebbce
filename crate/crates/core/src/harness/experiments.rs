use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Method, NoiseSpec};
use super::signals::{add_bounded_noise, add_gaussian_noise, gen_mixture, gen_sparse_mixture};
use super::table::{ExperimentKind, ExperimentTable, Row};
use crate::coherence::Coherence;
use crate::dictionary::NpdDictionary;
use crate::error::{Error, Result};
use crate::guarantees::{
    gaussian_radius, refined_from_profiles, restricted_threshold_from_table, theorem2_from_table, BoundVerdict,
    RestrictedTable,
};
use crate::parallel::par_map;
use crate::recovery::{least_squares_on_support, support_from_coefficients, BasisPursuit, Omp, StopRule};
use crate::support::{enumerate_qkm, PeriodSet};

/// Equality tolerance handed to basis pursuit.
pub const BP_TOLERANCE: f64 = 1e-8;

/// Relative threshold that turns a basis pursuit solution into a support.
pub const BP_SUPPORT_THRESHOLD: f64 = 1e-6;

/// The generator for one trial. Streams are keyed by grid point and trial
/// index, so results do not depend on scheduling.
pub fn trial_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng
}

struct Solvers<'a> {
    dict: &'a NpdDictionary,
    omp: Omp<'a>,
    bp: Option<BasisPursuit<'a>>,
    methods: Vec<Method>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    successes: usize,
    rmse_sum: f64,
    trials: usize,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        self.successes += o.success as usize;
        self.rmse_sum += o.rmse;
        self.trials += 1;
    }

    fn merge(&mut self, other: &Tally) {
        self.successes += other.successes;
        self.rmse_sum += other.rmse_sum;
        self.trials += other.trials;
    }

    fn row(&self, point_k: usize, point_x: f64, method: Method, verdict: Option<&BoundVerdict>) -> Row {
        Row {
            point_k,
            point_x,
            method: method.name().into(),
            successes: Some(self.successes),
            rmse: Some(if self.trials == 0 { 0.0 } else { self.rmse_sum / self.trials as f64 }),
            lhs: verdict.map(|v| v.lhs),
            holds: verdict.map(|v| v.holds),
            valid: verdict.map(|v| v.valid),
            trials: self.trials,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    rmse: f64,
}

fn rmse(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    ((a - b).norm_squared() / a.len() as f64).sqrt()
}

impl<'a> Solvers<'a> {
    fn new(dict: &'a NpdDictionary, methods: &[Method]) -> Result<Self> {
        let bp = if methods.contains(&Method::Bp) { Some(BasisPursuit::new(dict)?) } else { None };
        Ok(Solvers { dict, omp: Omp::new(dict)?, bp, methods: methods.to_vec() })
    }

    /// Reference coefficients: least squares of `y` on the true support.
    fn reference(
        &self,
        support: &[usize],
        y: &DVector<Complex64>,
        fallback: &DVector<Complex64>,
    ) -> DVector<Complex64> {
        match least_squares_on_support(self.dict, support, y) {
            Ok(c) => {
                let mut x = DVector::zeros(self.dict.n_atoms());
                for (&j, &v) in support.iter().zip(c.iter()) {
                    x[j - 1] = v;
                }
                x
            }
            Err(_) => fallback.clone(),
        }
    }

    /// Run every configured method on `y`. A solver error counts as a failure
    /// with a zero estimate.
    fn run(
        &self,
        y: &DVector<Complex64>,
        support: &[usize],
        reference: &DVector<Complex64>,
        stop: &StopRule,
    ) -> Vec<Outcome> {
        let n = self.dict.n_atoms();
        self.methods
            .iter()
            .map(|method| {
                let estimate = match method {
                    Method::Omp => self.omp.solve(y, stop).map(|r| (r.support.clone(), r.to_dense(n))),
                    Method::Bp => self
                        .bp
                        .as_ref()
                        .expect("bp solver is built when requested")
                        .solve(y, BP_TOLERANCE)
                        .map(|s| (support_from_coefficients(&s.x, BP_SUPPORT_THRESHOLD), s.x)),
                };
                match estimate {
                    Ok((found, x)) => Outcome { success: found == support, rmse: rmse(&x, reference) },
                    Err(_) => Outcome { success: false, rmse: rmse(&DVector::zeros(n), reference) },
                }
            })
            .collect()
    }
}

fn build_dictionary(cfg: &ExperimentConfig) -> Result<NpdDictionary> {
    cfg.validate()?;
    Ok(NpdDictionary::build(cfg.family, cfg.p_max, cfg.len, true))
}

fn fixed_periods(cfg: &ExperimentConfig) -> Result<PeriodSet> {
    let t = PeriodSet::new(&cfg.periods)?;
    if t.max_period() > cfg.p_max {
        return Err(Error::InvalidPeriods(format!("period {} exceeds p_max = {}", t.max_period(), cfg.p_max)));
    }
    Ok(t)
}

/// Refined-condition verdicts over the `(k, s)` grid, plus empirical recovery
/// of exactly `s`-sparse mixtures on supports drawn uniformly from `Q_k(m)`
/// when `cfg.empirical` is set. Grid points with an empty `Q_k(m)` are skipped.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    let dict = build_dictionary(cfg)?;
    let coh = Coherence::new(&dict)?;
    let profiles = coh.profiles(cfg.m, cfg.k_range[1]);
    let solvers = if cfg.empirical { Some(Solvers::new(&dict, &cfg.methods)?) } else { None };

    let mut rows = Vec::new();
    let mut point = 0usize;
    for k in cfg.ks() {
        if profiles.members(k).next().is_none() {
            continue;
        }
        for s in cfg.ss(k) {
            let verdict = refined_from_profiles(&profiles, k, s)?;
            rows.push(Row {
                point_k: k,
                point_x: s as f64,
                method: "refined".into(),
                successes: None,
                rmse: None,
                lhs: Some(verdict.lhs),
                holds: Some(verdict.holds),
                valid: Some(verdict.valid),
                trials: 0,
            });
            point += 1;
            let Some(solvers) = &solvers else { continue };
            let pool: Vec<&PeriodSet> =
                profiles.members(k).map(|p| p.periods()).filter(|t| t.support().len() >= s).collect();
            if pool.is_empty() {
                continue;
            }
            let outcomes = par_map((0..cfg.trials).collect(), |trial| {
                let mut rng = trial_rng(cfg.seed, point, trial);
                let t = pool[rng.random_range(0..pool.len())];
                let (support, x, y) = gen_sparse_mixture(&dict, t, s, cfg.gamma, &mut rng);
                let reference = solvers.reference(&support, &y, &x);
                solvers.run(&y, &support, &reference, &StopRule::sparsity(s))
            });
            for (mi, &method) in solvers.methods.iter().enumerate() {
                let mut tally = Tally::default();
                outcomes.iter().for_each(|o| tally.add(o[mi]));
                rows.push(tally.row(k, s as f64, method, Some(&verdict)));
            }
        }
    }
    Ok(ExperimentTable { kind: ExperimentKind::Phase, seed: cfg.seed, rows })
}

/// Noise-free recovery of full mixtures: `cfg.trials` mixtures for every
/// member of `Q_{k_max}(m)`; the row at `k` aggregates the members with
/// `|S_T| <= k`. OMP runs for exactly `|S_T|` iterations. The verdict columns
/// carry the refined condition over all `s <= k` (largest lhs; holds and
/// valid only if they do at every `s`).
pub fn run_recovery_sweep(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    if cfg.noise != NoiseSpec::None {
        return Err(Error::InvalidArgument("the recovery sweep is noise-free".into()));
    }
    let dict = build_dictionary(cfg)?;
    let coh = Coherence::new(&dict)?;
    let k_max = cfg.k_range[1];
    let profiles = coh.profiles(cfg.m, k_max);
    let members = enumerate_qkm(cfg.p_max, cfg.m, k_max);
    let solvers = Solvers::new(&dict, &cfg.methods)?;

    let jobs: Vec<(usize, usize)> = (0..members.len()).flat_map(|ti| (0..cfg.trials).map(move |tr| (ti, tr))).collect();
    let outcomes = par_map(jobs, |(ti, trial)| {
        let t = &members[ti];
        let mut rng = trial_rng(cfg.seed, ti, trial);
        let (x, y) = gen_mixture(&dict, t, cfg.gamma, &mut rng);
        let reference = solvers.reference(t.support(), &y, &x);
        (ti, solvers.run(&y, t.support(), &reference, &StopRule::sparsity(t.support().len())))
    });
    let n_methods = solvers.methods.len();
    let mut per_member = vec![vec![Tally::default(); n_methods]; members.len()];
    for (ti, o) in outcomes {
        for mi in 0..n_methods {
            per_member[ti][mi].add(o[mi]);
        }
    }

    let mut rows = Vec::new();
    for k in cfg.ks() {
        if profiles.members(k).next().is_none() {
            continue;
        }
        let mut verdict: Option<BoundVerdict> = None;
        for s in 1..=k {
            let v = refined_from_profiles(&profiles, k, s)?;
            verdict = Some(match verdict {
                None => v,
                Some(acc) => BoundVerdict {
                    lhs: acc.lhs.max(v.lhs),
                    holds: acc.holds && v.holds,
                    valid: acc.valid && v.valid,
                    ..acc
                },
            });
        }
        for (mi, &method) in solvers.methods.iter().enumerate() {
            let mut tally = Tally::default();
            for (ti, t) in members.iter().enumerate() {
                if t.support().len() <= k {
                    tally.merge(&per_member[ti][mi]);
                }
            }
            rows.push(tally.row(k, k as f64, method, verdict.as_ref()));
        }
    }
    Ok(ExperimentTable { kind: ExperimentKind::Recovery, seed: cfg.seed, rows })
}

struct NoiseSetup {
    t: PeriodSet,
    verdict: BoundVerdict,
    table: RestrictedTable,
}

fn noise_setup(cfg: &ExperimentConfig, dict: &NpdDictionary) -> Result<NoiseSetup> {
    let t = fixed_periods(cfg)?;
    let coh = Coherence::new(dict)?;
    let table = RestrictedTable::new(&coh);
    let verdict = theorem2_from_table(&table, &t);
    Ok(NoiseSetup { t, verdict, table })
}

fn noise_sweep(
    cfg: &ExperimentConfig,
    dict: &NpdDictionary,
    setup: &NoiseSetup,
    kind: ExperimentKind,
    floor: impl Fn(f64) -> f64 + Sync,
    noise: impl Fn(&DVector<Complex64>, &mut ChaCha8Rng) -> DVector<Complex64> + Sync,
    stop: StopRule,
) -> Result<ExperimentTable> {
    if cfg.levels.is_empty() {
        return Err(Error::InvalidArgument("no sweep levels given".into()));
    }
    // basis pursuit has an equality constraint, so noisy signals are scored with OMP only
    if cfg.methods != [Method::Omp] {
        return Err(Error::InvalidArgument("noise sweeps run OMP only; set methods to [\"omp\"]".into()));
    }
    let solvers = Solvers::new(dict, &cfg.methods)?;
    let support = setup.t.support();
    let mut rows = Vec::new();
    for (li, &level) in cfg.levels.iter().enumerate() {
        let gamma = floor(level);
        let outcomes = par_map((0..cfg.trials).collect(), |trial| {
            let mut rng = trial_rng(cfg.seed, li, trial);
            let (x, clean) = gen_mixture(dict, &setup.t, gamma, &mut rng);
            let y = noise(&clean, &mut rng);
            let reference = solvers.reference(support, &y, &x);
            solvers.run(&y, support, &reference, &stop)
        });
        for (mi, &method) in solvers.methods.iter().enumerate() {
            let mut tally = Tally::default();
            outcomes.iter().for_each(|o| tally.add(o[mi]));
            rows.push(tally.row(support.len(), level, method, Some(&setup.verdict)));
        }
    }
    Ok(ExperimentTable { kind, seed: cfg.seed, rows })
}

/// Success rate against the coefficient floor `gamma` (the levels) for a
/// fixed `T`, with noise of norm exactly `eps`. OMP stops at residual `eps`.
pub fn run_bounded_noise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    let NoiseSpec::Bounded { eps } = cfg.noise else {
        return Err(Error::InvalidArgument("the bounded-noise sweep needs bounded noise".into()));
    };
    let dict = build_dictionary(cfg)?;
    let setup = noise_setup(cfg, &dict)?;
    let stop = StopRule::residual(eps);
    noise_sweep(cfg, &dict, &setup, ExperimentKind::Bounded, |g| g, |y, rng| add_bounded_noise(y, eps, rng), stop)
}

/// Success rate against `alpha` (the levels), with coefficient floor
/// `alpha` times the restricted Gaussian threshold. OMP stops at the
/// Gaussian radius.
pub fn run_gaussian_sweep(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    let NoiseSpec::Gaussian { sigma } = cfg.noise else {
        return Err(Error::InvalidArgument("the Gaussian sweep needs Gaussian noise".into()));
    };
    let dict = build_dictionary(cfg)?;
    let setup = noise_setup(cfg, &dict)?;
    let radius = gaussian_radius(sigma, cfg.len);
    let threshold = restricted_threshold_from_table(&setup.table, &setup.t, radius)?;
    let stop = StopRule::residual(radius);
    noise_sweep(
        cfg,
        &dict,
        &setup,
        ExperimentKind::Gaussian,
        |alpha| alpha * threshold,
        |y, rng| add_gaussian_noise(y, sigma, rng),
        stop,
    )
}

pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    match kind {
        ExperimentKind::Phase => run_phase_transition(cfg),
        ExperimentKind::Recovery => run_recovery_sweep(cfg),
        ExperimentKind::Bounded => run_bounded_noise_sweep(cfg),
        ExperimentKind::Gaussian => run_gaussian_sweep(cfg),
    }
}
