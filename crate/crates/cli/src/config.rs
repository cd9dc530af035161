//! Run configuration read from a TOML file.

use qho_kam::kam::KamConfig;
use qho_kam::potential::PotentialConfig;
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
    pub potential: PotentialConfig,
    pub kam: Option<KamConfig>,
    pub samples: Option<SampleSpec>,
    pub measure: Option<MeasureSpec>,
    pub floquet: Option<FloquetSpec>,
}

/// Parameter samples `ξ ∈ [0, 2π]ⁿ`, either listed or drawn from a Kronecker sequence.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub omega: Option<Vec<Vec<f64>>>,
    pub count: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub alpha: Vec<f64>,
    pub k_min: i32,
    pub k_max: i32,
    /// Largest mode index in `l`.
    pub j_max: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloquetSpec {
    pub omega: Vec<f64>,
    pub j_max: usize,
    pub k_max: u32,
    pub epsilon: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    pub dt: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Initial state: equal weights on the first `initial_modes` Hermite functions.
    #[serde(default = "default_modes")]
    pub initial_modes: usize,
}

fn default_mc() -> usize {
    100_000
}

fn default_tau() -> f64 {
    3.0
}

fn default_beta() -> f64 {
    6.0
}

fn default_t_end() -> f64 {
    100.0
}

fn default_p() -> f64 {
    2.0
}

fn default_modes() -> usize {
    3
}

impl RunConfig {
    pub fn n(&self) -> usize {
        match &self.potential {
            PotentialConfig::Builtin { n, .. } | PotentialConfig::FourierSum { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.n();
        if n == 0 || n > 2 {
            return Err(format!("n = {n} outside 1..=2"));
        }
        if let Some(k) = &self.kam {
            k.validate(n).map_err(|e| e.to_string())?;
        }
        if let Some(s) = &self.samples {
            if let Some(list) = &s.omega {
                if list.iter().any(|x| x.len() != n) {
                    return Err(format!("every omega sample needs {n} components"));
                }
            }
            if s.omega.is_none() && s.count.is_none() {
                return Err("samples needs either omega or count".into());
            }
        }
        if let Some(m) = &self.measure {
            if m.alpha.is_empty() || m.alpha.iter().any(|a| !(*a > 0.0)) {
                return Err("measure.alpha must be a non-empty list of positive values".into());
            }
            if m.k_min < 1 || m.k_max < m.k_min {
                return Err("measure needs 1 <= k_min <= k_max".into());
            }
            if m.j_max == 0 || m.j_max > 400 {
                return Err("measure.j_max outside 1..=400".into());
            }
        }
        if let Some(f) = &self.floquet {
            if f.omega.len() != n {
                return Err(format!("floquet.omega needs {n} components"));
            }
            if f.j_max == 0 || f.j_max > 400 || f.k_max > 16 {
                return Err("floquet truncation outside J <= 400, K <= 16".into());
            }
            if f.initial_modes == 0 || f.initial_modes > f.j_max {
                return Err("floquet.initial_modes outside 1..=j_max".into());
            }
        }
        Ok(())
    }

    /// Listed samples, or `count` Kronecker points (default from the KAM section).
    pub fn omega_samples(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        match &self.samples {
            Some(SampleSpec {
                omega: Some(list), ..
            }) => list.clone(),
            Some(SampleSpec { count: Some(c), .. }) => qho_kam::kam::kronecker_samples(n, *c),
            _ => qho_kam::kam::kronecker_samples(n, self.kam.as_ref().map_or(1, |k| k.samples)),
        }
    }
}
