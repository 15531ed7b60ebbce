use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use npd_core::coherence::restricted_table;
use npd_core::guarantees::{
    self, bounded_noise_threshold_npi, bounded_noise_threshold_restricted, gaussian_threshold_npi_extrapolated,
    gaussian_threshold_restricted, BoundVerdict,
};
use npd_core::harness::{self, fmt_num, grid, ExperimentConfig, ExperimentKind, Method, NoiseSpec};
use npd_core::recovery::{periods_of_support, support_from_coefficients, BasisPursuit, Omp, StopRule};
use npd_core::support::enumerate_qkm;
use npd_core::{numtheory, Coherence, Error, NpdDictionary, PeriodSet};
use sha2::{Digest, Sha256};

use crate::signal::read_signal;
use crate::{
    BoundsArgs, CoherenceArgs, Command, ConditionArg, DictArgs, DictSource, ExperimentArgs, Measure, MethodArg,
    RecoverArgs,
};

pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Dict(a) => dict(a),
        Command::Coherence(a) => coherence(a),
        Command::Bounds(a) => bounds(a),
        Command::Recover(a) => recover(a),
        Command::Phase(a) => experiment(ExperimentKind::Phase, a),
        Command::SweepRecovery(a) => experiment(ExperimentKind::Recovery, a),
        Command::SweepBounded(a) => experiment(ExperimentKind::Bounded, a),
        Command::SweepGaussian(a) => experiment(ExperimentKind::Gaussian, a),
    }
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

/// `7`, `3..9` or `3..=9`, inclusive.
fn parse_range(s: &str, what: &str) -> CliResult<(u64, u64)> {
    let bad = || CliError::Usage(format!("invalid {what} '{s}': expected N or A..B"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn load_dict(src: &DictSource) -> CliResult<NpdDictionary> {
    if let Some(path) = &src.dict {
        return Ok(NpdDictionary::import(path)?);
    }
    match (src.family, src.pmax, src.len) {
        (Some(f), Some(p), Some(l)) => Ok(NpdDictionary::build(f.into(), p, l, true)),
        _ => usage("give --dict, or all of --family, --pmax and --len"),
    }
}

fn dict(a: DictArgs) -> CliResult {
    if a.pmax == 0 || a.len == 0 {
        return usage("--pmax and --len must be positive");
    }
    let d = NpdDictionary::build(a.family.into(), a.pmax, a.len, !a.no_normalize);
    match &a.out {
        Some(path) => d.export(path)?,
        None => {
            let mut buf = Vec::new();
            d.write_to(&mut buf).expect("writing to memory cannot fail");
            emit(&String::from_utf8(buf).expect("dictionary text is utf-8"));
        }
    }
    Ok(())
}

fn coherence(a: CoherenceArgs) -> CliResult {
    let d = load_dict(&a.source)?;
    let coh = Coherence::new(&d)?;
    let mut out = String::from("measure,k,m,s,p,value\n");
    let mut row = |measure: &str, k: Option<usize>, m: Option<usize>, s: Option<usize>, p: &str, v: f64| {
        let opt = |x: Option<usize>| x.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{measure},{},{},{},{p},{}", opt(k), opt(m), opt(s), fmt_num(v));
    };
    let ks = || -> CliResult<(usize, usize)> {
        match &a.k {
            Some(k) => parse_range(k, "--k").map(|(x, y)| (x as usize, y as usize)),
            None => usage("this measure needs --k"),
        }
    };
    let single_k = ks().map(|(x, y)| x == y).unwrap_or(false);
    let name = measure_name(a.measure);
    match a.measure {
        Measure::Mu => row(name, None, None, None, "", coh.mutual_coherence()),
        Measure::Mu1 => {
            let (k0, k1) = ks()?;
            for k in k0..=k1 {
                row(name, Some(k), None, None, "", coh.cumulative_coherence(k)?);
            }
        }
        Measure::Npi | Measure::Npa | Measure::Cnpi | Measure::Cnpa | Measure::ErcBaseline => {
            let (k0, k1) = ks()?;
            if k0 == 0 {
                return usage("k must be positive");
            }
            let mut profiles = coh.profiles(a.m, k1);
            if a.measure == Measure::ErcBaseline {
                profiles.compute_erc(&coh)?;
            }
            for k in k0..=k1 {
                if profiles.members(k).next().is_none() {
                    if single_k {
                        return Err(Error::EmptyQkm { k, m: a.m }.into());
                    }
                    continue;
                }
                match a.measure {
                    Measure::Npi => row(name, Some(k), Some(a.m), None, "", profiles.npi(k)?.value),
                    Measure::Npa => row(name, Some(k), Some(a.m), None, "", profiles.npa(k)?.value),
                    Measure::ErcBaseline => row(name, Some(k), Some(a.m), None, "", profiles.erc_baseline(k)?.value),
                    _ => {
                        let ss: Vec<usize> = match a.s {
                            Some(s) => vec![s],
                            None => (1..=k).collect(),
                        };
                        for s in ss {
                            let v =
                                if a.measure == Measure::Cnpi { profiles.cnpi(k, s)? } else { profiles.cnpa(k, s)? };
                            row(name, Some(k), Some(a.m), Some(s), "", v.value);
                        }
                    }
                }
            }
        }
        Measure::ZetaP | Measure::NuP => {
            let Some(p) = &a.p else { return usage("this measure needs --p") };
            let (p0, p1) = parse_range(p, "--p")?;
            if p0 == 0 || p1 > d.p_max() {
                return usage(format!("--p must lie in 1..={}", d.p_max()));
            }
            let table = restricted_table(&coh);
            for p in p0..=p1 {
                let (z, n) = table[p as usize - 1];
                row(name, None, None, None, &p.to_string(), if a.measure == Measure::ZetaP { z } else { n });
            }
        }
        Measure::MinEig => {
            if a.periods.is_empty() {
                return usage("min-eig needs --periods");
            }
            let t = periods_in_dict(&a.periods, &d)?;
            row(name, None, Some(t.len()), None, &csv_quote(&t.to_string()), coh.min_eig_gram(t.support()));
        }
    }
    emit(&out);
    Ok(())
}

fn measure_name(m: Measure) -> &'static str {
    match m {
        Measure::Mu => "mu",
        Measure::Mu1 => "mu1",
        Measure::Npi => "npi",
        Measure::Npa => "npa",
        Measure::Cnpi => "cnpi",
        Measure::Cnpa => "cnpa",
        Measure::ZetaP => "zeta-p",
        Measure::NuP => "nu-p",
        Measure::ErcBaseline => "erc-baseline",
        Measure::MinEig => "min-eig",
    }
}

fn periods_in_dict(periods: &[u64], d: &NpdDictionary) -> CliResult<PeriodSet> {
    let t = PeriodSet::new(periods)?;
    if t.max_period() > d.p_max() {
        return Err(Error::InvalidPeriods(format!(
            "period {} exceeds the dictionary's p_max = {}",
            t.max_period(),
            d.p_max()
        ))
        .into());
    }
    Ok(t)
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// `(k, m, s, periods, verdict)`; absent parameters print as empty cells.
type VerdictRow = (Option<usize>, Option<usize>, Option<usize>, String, BoundVerdict);

fn bounds(a: BoundsArgs) -> CliResult {
    let d = load_dict(&a.source)?;
    let coh = Coherence::new(&d)?;
    let need_k = || a.k.filter(|&k| k > 0).ok_or_else(|| CliError::Usage("this condition needs a positive --k".into()));
    let mut verdicts: Vec<VerdictRow> = Vec::new();
    let mut thm2_set = None;
    match a.condition {
        ConditionArg::ClassicMu => {
            let k = need_k()?;
            verdicts.push((
                Some(k),
                None,
                None,
                String::new(),
                guarantees::classic_coherence_condition(coh.mutual_coherence(), k),
            ));
        }
        ConditionArg::ClassicMu1 => {
            let k = need_k()?;
            verdicts.push((Some(k), None, None, String::new(), guarantees::classic_cumulative_condition(&coh, k)?));
        }
        ConditionArg::Thm1 => {
            let k = need_k()?;
            verdicts.push((Some(k), Some(a.m), None, String::new(), guarantees::theorem1_condition(&coh, k, a.m)?));
        }
        ConditionArg::Cor1 => {
            let k = need_k()?;
            verdicts.push((Some(k), Some(a.m), None, String::new(), guarantees::corollary1_condition(&coh, k, a.m)?));
        }
        ConditionArg::Thm2 => {
            if a.periods.is_empty() {
                return usage("thm2 needs --periods");
            }
            let t = periods_in_dict(&a.periods, &d)?;
            verdicts.push((
                None,
                Some(t.len()),
                None,
                csv_quote(&t.to_string()),
                guarantees::theorem2_condition(&coh, &t),
            ));
            thm2_set = Some(t);
        }
        ConditionArg::Refined => {
            let k = need_k()?;
            let profiles = coh.profiles(a.m, k);
            let ss: Vec<usize> = match a.s {
                Some(s) => vec![s],
                None => (1..=k).collect(),
            };
            for s in ss {
                if s == 0 || s > k {
                    return Err(Error::SOutOfRange { s, k }.into());
                }
                verdicts.push((
                    Some(k),
                    Some(a.m),
                    Some(s),
                    String::new(),
                    guarantees::refined_from_profiles(&profiles, k, s)?,
                ));
            }
        }
    }

    let threshold: Option<(Result<f64, Error>, &str)> = match (a.condition, a.eps, a.sigma) {
        (_, None, None) => None,
        (ConditionArg::Thm1, Some(eps), _) => {
            Some((bounded_noise_threshold_npi(&coh, a.k.unwrap(), a.m, eps), "bounded"))
        }
        (ConditionArg::Thm1, None, Some(sigma)) => {
            check_sigma(sigma)?;
            Some((
                gaussian_threshold_npi_extrapolated(&coh, a.k.unwrap(), a.m, sigma, d.len()),
                "gaussian-extrapolated",
            ))
        }
        (ConditionArg::Thm2, Some(eps), _) => {
            Some((bounded_noise_threshold_restricted(&coh, thm2_set.as_ref().unwrap(), eps), "bounded"))
        }
        (ConditionArg::Thm2, None, Some(sigma)) => {
            check_sigma(sigma)?;
            if d.len() < 2 {
                return usage("the Gaussian threshold needs at least two samples");
            }
            Some((gaussian_threshold_restricted(&coh, thm2_set.as_ref().unwrap(), sigma, d.len()), "gaussian"))
        }
        _ => return usage("--eps/--sigma thresholds exist only for thm1 and thm2"),
    };

    let mut out = String::from("condition,k,m,s,periods,lhs,holds,valid,threshold,threshold_kind\n");
    let opt = |x: Option<usize>| x.map(|x| x.to_string()).unwrap_or_default();
    let (thr_text, thr_kind, thr_err) = match threshold {
        None => (String::new(), "", None),
        Some((Ok(v), kind)) => (fmt_num(v), kind, None),
        Some((Err(e), kind)) => (String::new(), kind, Some(e)),
    };
    for (k, m, s, periods, v) in &verdicts {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            v.name,
            opt(*k),
            opt(*m),
            opt(*s),
            periods,
            fmt_num(v.lhs),
            v.holds,
            v.valid,
            thr_text,
            thr_kind
        );
    }
    emit(&out);
    match thr_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn check_sigma(sigma: f64) -> CliResult {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return usage("--sigma must be finite and nonnegative");
    }
    Ok(())
}

fn recover(a: RecoverArgs) -> CliResult {
    let d = load_dict(&a.source)?;
    let y = read_signal(&a.signal)?;
    if y.len() != d.len() {
        return Err(Error::Dimension(format!("signal has {} samples, dictionary has {} rows", y.len(), d.len())).into());
    }
    let (support, coefs, residual, iterations, reason) = match a.method {
        MethodArg::Omp => {
            let stop = StopRule { sparsity: a.stop_k, residual_norm: a.stop_eps, max_iterations: a.max_iter };
            if stop.sparsity.is_none() && stop.residual_norm.is_none() && stop.max_iterations.is_none() {
                return usage("omp needs --stop-eps, --stop-k or --max-iter");
            }
            let r = Omp::new(&d)?.solve(&y, &stop)?;
            let reason =
                serde_json::to_value(r.stop_reason).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            (r.support, r.coefficients, r.residual_norm, r.iterations, reason)
        }
        MethodArg::Bp => {
            if a.stop_eps.is_some() || a.stop_k.is_some() || a.max_iter.is_some() {
                return usage("stop rules apply to omp only");
            }
            if !(a.threshold > 0.0 && a.threshold < 1.0) {
                return usage("--threshold must lie in (0, 1)");
            }
            let sol = BasisPursuit::new(&d)?.solve(&y, a.tol)?;
            let support = support_from_coefficients(&sol.x, a.threshold);
            let coefs: Vec<_> = support.iter().map(|&j| sol.x[j - 1]).collect();
            let residual = (d.matrix() * &sol.x - &y).norm();
            (support, coefs, residual, sol.iterations, "converged".to_string())
        }
    };
    let periods = periods_of_support(&d, &support);
    let join = |v: &[String]| v.join(" ");
    let mut out = String::new();
    let _ = writeln!(out, "support: {}", join(&support.iter().map(usize::to_string).collect::<Vec<_>>()));
    let _ = writeln!(out, "periods: {}", join(&periods.iter().map(u64::to_string).collect::<Vec<_>>()));
    let _ = writeln!(out, "estimated_period: {}", numtheory::lcm_of_set(&periods));
    let _ = writeln!(out, "residual_norm: {}", fmt_num(residual));
    let _ = writeln!(out, "iterations: {iterations}");
    let _ = writeln!(out, "stop_reason: {reason}");
    let _ = writeln!(out, "atom,period,re,im");
    for (&j, c) in support.iter().zip(&coefs) {
        let _ = writeln!(out, "{j},{},{},{}", d.atom_period(j), fmt_num(c.re), fmt_num(c.im));
    }
    emit(&out);
    Ok(())
}

fn resolve_config(kind: ExperimentKind, a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(f) = a.family {
        cfg.family = f.into();
    }
    if let Some(p) = a.pmax {
        cfg.p_max = p;
    }
    if let Some(l) = a.len {
        cfg.len = l;
    }
    if let Some(m) = a.m {
        cfg.m = m;
    }
    if let Some(k) = &a.k {
        let (k0, k1) = parse_range(k, "--k")?;
        cfg.k_range = [k0 as usize, k1 as usize];
    }
    if let Some(s) = &a.s {
        let (s0, s1) = parse_range(s, "--s")?;
        cfg.s_range = Some([s0 as usize, s1 as usize]);
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &a.periods {
        cfg.periods = p.clone();
    }
    if let Some(g) = a.gamma {
        cfg.gamma = g;
    }
    if let Some(levels) = &a.levels {
        cfg.levels = levels.clone();
    }
    if let Some(range) = &a.level_range {
        let parts: Vec<f64> = range
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("invalid --level-range '{range}': expected start:stop:step")))?;
        match parts.as_slice() {
            &[start, stop, step] if step > 0.0 && stop >= start => cfg.levels = grid(start, stop, step),
            _ => return usage(format!("invalid --level-range '{range}': expected start:stop:step with step > 0")),
        }
    }
    if let Some(eps) = a.eps {
        cfg.noise = NoiseSpec::Bounded { eps };
    }
    if let Some(sigma) = a.sigma {
        cfg.noise = NoiseSpec::Gaussian { sigma };
    }
    if let Some(methods) = &a.methods {
        cfg.methods = methods
            .iter()
            .map(|m| match m {
                MethodArg::Omp => Method::Omp,
                MethodArg::Bp => Method::Bp,
            })
            .collect();
    }
    if a.empirical {
        cfg.empirical = true;
    }
    if let Some(out) = &a.out {
        cfg.output = Some(out.clone());
    }

    match (kind, cfg.noise) {
        (ExperimentKind::Bounded, NoiseSpec::Bounded { .. })
        | (ExperimentKind::Gaussian, NoiseSpec::Gaussian { .. }) => {}
        (ExperimentKind::Bounded, _) => return usage("sweep-bounded needs --eps"),
        (ExperimentKind::Gaussian, _) => return usage("sweep-gaussian needs --sigma"),
        (_, NoiseSpec::None) => {}
        _ => return usage("phase and sweep-recovery are noise-free; drop --eps/--sigma"),
    }
    if matches!(kind, ExperimentKind::Bounded | ExperimentKind::Gaussian) && cfg.levels.is_empty() {
        return usage("give the swept values with --levels or --level-range");
    }
    if matches!(kind, ExperimentKind::Bounded | ExperimentKind::Gaussian) {
        if a.methods.is_none() {
            cfg.methods = vec![Method::Omp];
        } else if cfg.methods != [Method::Omp] {
            return usage("noise sweeps run OMP only");
        }
    }
    if cfg.methods.is_empty() {
        return usage("--methods must name at least one solver");
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// SHA-256 of the resolved config with the output path cleared, so the digest
/// identifies the experiment rather than where it was written.
fn config_digest(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    let hash = Sha256::digest(c.to_json().as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

fn experiment(kind: ExperimentKind, a: ExperimentArgs) -> CliResult {
    let cfg = resolve_config(kind, &a)?;
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return usage("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {jobs} workers: {e}")))?;
    }
    if matches!(kind, ExperimentKind::Recovery | ExperimentKind::Phase) {
        // Q_k(m) members need periods up to k; warn early when the whole range is empty
        let [_, k1] = cfg.k_range;
        if enumerate_qkm(cfg.p_max, cfg.m, k1).is_empty() {
            return Err(Error::EmptyQkm { k: k1, m: cfg.m }.into());
        }
    }
    eprintln!("seed: {}", cfg.seed);
    eprintln!("config sha256: {}", config_digest(&cfg));
    let table = harness::run(kind, &cfg)?;
    match &cfg.output {
        Some(base) => {
            let (csv, svg) = table.write_files(base)?;
            let json = base.with_extension("config.json");
            std::fs::write(&json, cfg.to_json() + "\n").map_err(|source| Error::Io { path: json.clone(), source })?;
            eprintln!("wrote {}, {}, {}", show(&csv), show(&svg), show(&json));
        }
        None => emit(&table.to_csv()),
    }
    Ok(())
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("7", "k").ok(), Some((7, 7)));
        assert_eq!(parse_range("3..9", "k").ok(), Some((3, 9)));
        assert_eq!(parse_range("3..=9", "k").ok(), Some((3, 9)));
        assert!(parse_range("9..3", "k").is_err());
        assert!(parse_range("x", "k").is_err());
    }

    #[test]
    fn digest_ignores_output_path() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { output: Some("elsewhere".into()), ..Default::default() };
        assert_eq!(config_digest(&a), config_digest(&b));
        let c = ExperimentConfig { seed: 2, ..Default::default() };
        assert_ne!(config_digest(&a), config_digest(&c));
    }
}
