use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryFamily;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    #[default]
    None,
    Bounded {
        eps: f64,
    },
    Gaussian {
        sigma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Omp,
    Bp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Omp => "omp",
            Method::Bp => "bp",
        }
    }
}

/// Parameters of one experiment. Every field has a default so partial JSON
/// files are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: DictionaryFamily,
    pub p_max: u64,
    pub len: usize,
    /// Number of hidden periods.
    pub m: usize,
    /// Inclusive range of sparsity levels `k`.
    pub k_range: [usize; 2],
    /// Inclusive range of `s`; `None` means `1..=k` at every `k`.
    pub s_range: Option<[usize; 2]>,
    /// Trials per parameter point (per member of `Q_k(m)` in the recovery sweep).
    pub trials: usize,
    pub noise: NoiseSpec,
    /// Fixed hidden periods for the noise sweeps.
    pub periods: Vec<u64>,
    /// Coefficient floor for noise-free experiments.
    pub gamma: f64,
    /// Swept values: the floor `gamma` (bounded noise) or the scale `alpha` (Gaussian noise).
    pub levels: Vec<f64>,
    pub methods: Vec<Method>,
    /// Run empirical recovery trials in the phase-transition experiment.
    pub empirical: bool,
    pub seed: u64,
    /// Output base path; `.csv` and `.svg` are appended.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: DictionaryFamily::Rpt,
            p_max: 20,
            len: 100,
            m: 2,
            k_range: [1, 12],
            s_range: None,
            trials: 100,
            noise: NoiseSpec::None,
            periods: vec![4],
            gamma: 0.0,
            levels: Vec::new(),
            methods: vec![Method::Omp, Method::Bp],
            empirical: false,
            seed: 1,
            output: None,
        }
    }
}

/// Evenly spaced values `start, start + step, ...` up to `stop` inclusive.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && stop >= start);
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // round to the step's decimal grid so 0.1 + 0.2 style drift never shows up in output
    (0..=n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.p_max == 0 || self.len == 0 {
            return bad("p_max and len must be positive".into());
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        let [k0, k1] = self.k_range;
        if k0 == 0 || k0 > k1 {
            return bad(format!("empty k range {k0}..={k1}"));
        }
        if let Some([s0, s1]) = self.s_range {
            if s0 == 0 || s0 > s1 {
                return bad(format!("empty s range {s0}..={s1}"));
            }
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be nonnegative".into());
        }
        if self.levels.iter().any(|v| !(*v >= 0.0)) {
            return bad("levels must be nonnegative".into());
        }
        match self.noise {
            NoiseSpec::Bounded { eps } if !(eps >= 0.0) => bad("eps must be nonnegative".into()),
            NoiseSpec::Gaussian { sigma } if !(sigma >= 0.0) => bad("sigma must be nonnegative".into()),
            _ => Ok(()),
        }
    }

    pub fn ks(&self) -> impl Iterator<Item = usize> {
        self.k_range[0]..=self.k_range[1]
    }

    pub fn ss(&self, k: usize) -> impl Iterator<Item = usize> {
        let [s0, s1] = self.s_range.unwrap_or([1, k]);
        s0..=s1.min(k)
    }
}
