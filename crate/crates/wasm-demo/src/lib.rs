//! Browser bindings: dictionary heat map, refined-condition phase map and
//! period recovery from a generated mixture. Every function returns JSON.

use npd_core::guarantees::refined_from_profiles;
use npd_core::harness::{add_bounded_noise, gen_mixture, trial_rng};
use npd_core::recovery::{Omp, StopRule};
use npd_core::{numtheory, Coherence, DictionaryFamily, NpdDictionary, PeriodSet};
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_P: u64 = 60;
const MAX_LEN: usize = 600;

fn family(name: &str) -> Result<DictionaryFamily, String> {
    match name {
        "rpt" => Ok(DictionaryFamily::Rpt),
        "farey" => Ok(DictionaryFamily::Farey),
        other => Err(format!("unknown family '{other}'")),
    }
}

fn build(name: &str, p_max: u32, len: u32, normalize: bool) -> Result<NpdDictionary, String> {
    let (p_max, len) = (u64::from(p_max), len as usize);
    if p_max == 0 || p_max > MAX_P || len == 0 || len > MAX_LEN {
        return Err(format!("need 1 <= p_max <= {MAX_P} and 1 <= len <= {MAX_LEN}"));
    }
    Ok(NpdDictionary::build(family(name)?, p_max, len, normalize))
}

fn js(r: Result<serde_json::Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Dictionary entries (real parts) with atom periods and mutual coherence.
#[wasm_bindgen]
pub fn dictionary(family: &str, p_max: u32, len: u32) -> Result<String, JsValue> {
    js(dictionary_value(family, p_max, len))
}

fn dictionary_value(family: &str, p_max: u32, len: u32) -> Result<serde_json::Value, String> {
    let raw = build(family, p_max, len, false)?;
    let coh = Coherence::new(&build(family, p_max, len, true)?).map_err(|e| e.to_string())?;
    let m = raw.matrix();
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)].re).collect()).collect();
    Ok(json!({
        "rows": rows,
        "periods": raw.atom_periods(),
        "mu": coh.mutual_coherence(),
    }))
}

/// Refined-condition lhs over `k = 1..=k_max`, `s = 1..=k`; `null` where
/// `Q_k(m)` is empty or a denominator is not positive.
#[wasm_bindgen]
pub fn phase_map(family: &str, p_max: u32, len: u32, m: u32, k_max: u32) -> Result<String, JsValue> {
    js(phase_value(family, p_max, len, m as usize, k_max as usize))
}

fn phase_value(family: &str, p_max: u32, len: u32, m: usize, k_max: usize) -> Result<serde_json::Value, String> {
    if m == 0 || k_max == 0 || k_max > 3 * MAX_P as usize {
        return Err("need m >= 1 and 1 <= k_max <= 180".into());
    }
    let d = build(family, p_max, len, true)?;
    let coh = Coherence::new(&d).map_err(|e| e.to_string())?;
    let profiles = coh.profiles(m, k_max);
    let grid: Vec<Vec<Option<f64>>> = (1..=k_max)
        .map(|k| {
            (1..=k).map(|s| refined_from_profiles(&profiles, k, s).ok().filter(|v| v.valid).map(|v| v.lhs)).collect()
        })
        .collect();
    let empty: Vec<bool> = (1..=k_max).map(|k| profiles.members(k).next().is_none()).collect();
    Ok(json!({ "lhs": grid, "empty": empty }))
}

/// Mix the periods in `periods` (comma separated) with coefficient floor
/// `gamma`, add noise of norm `eps`, recover with OMP and report the periods.
#[wasm_bindgen]
pub fn recover(
    family: &str,
    p_max: u32,
    len: u32,
    periods: &str,
    gamma: f64,
    eps: f64,
    seed: u32,
) -> Result<String, JsValue> {
    js(recover_value(family, p_max, len, periods, gamma, eps, u64::from(seed)))
}

fn recover_value(
    family: &str,
    p_max: u32,
    len: u32,
    periods: &str,
    gamma: f64,
    eps: f64,
    seed: u64,
) -> Result<serde_json::Value, String> {
    if !(gamma >= 0.0 && eps >= 0.0 && gamma.is_finite() && eps.is_finite()) {
        return Err("gamma and eps must be finite and nonnegative".into());
    }
    let d = build(family, p_max, len, true)?;
    let ps: Vec<u64> = periods
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad period '{}'", p.trim())))
        .collect::<Result<_, _>>()?;
    let t = PeriodSet::new(&ps).map_err(|e| e.to_string())?;
    if t.max_period() > d.p_max() {
        return Err(format!("periods must not exceed p_max = {}", d.p_max()));
    }
    let mut rng = trial_rng(seed, 0, 0);
    let (_, clean) = gen_mixture(&d, &t, gamma, &mut rng);
    let y = add_bounded_noise(&clean, eps, &mut rng);
    // stop just above the noise level, with a small floor for the noise-free case
    let stop = StopRule::residual(eps.max(1e-9 * clean.norm()) * (1.0 + 1e-9));
    let r = Omp::new(&d).and_then(|omp| omp.solve(&y, &stop)).map_err(|e| e.to_string())?;
    let found = r.periods(&d);
    Ok(json!({
        "signal": y.iter().map(|z| z.re).collect::<Vec<_>>(),
        "true_support": t.support(),
        "support": r.support,
        "periods": found,
        "estimated_period": numtheory::lcm_of_set(&found),
        "true_period": numtheory::lcm_of_set(t.periods()),
        "exact": r.support == t.support(),
        "residual": r.residual_norm,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_has_the_requested_shape() {
        let v = dictionary_value("rpt", 6, 8).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 8);
        assert_eq!(v["periods"].as_array().unwrap().len(), 12);
        assert!(dictionary_value("nope", 6, 8).is_err());
        assert!(dictionary_value("rpt", 0, 8).is_err());
    }

    #[test]
    fn phase_map_marks_empty_rows() {
        let v = phase_value("rpt", 20, 100, 2, 6).unwrap();
        let empty: Vec<bool> = v["empty"].as_array().unwrap().iter().map(|b| b.as_bool().unwrap()).collect();
        assert_eq!(empty, vec![true, true, true, false, false, false]);
        assert!(v["lhs"][3][0].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn noise_free_recovery_finds_the_lcm() {
        let v = recover_value("rpt", 20, 100, "3, 4", 1.0, 0.0, 1).unwrap();
        assert_eq!(v["estimated_period"], 12);
        let v = recover_value("farey", 20, 100, "5,7", 1.0, 0.0, 2).unwrap();
        assert_eq!(v["estimated_period"], 35);
        assert!(recover_value("rpt", 20, 100, "30", 1.0, 0.0, 1).is_err());
    }
}
