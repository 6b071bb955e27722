//! Job configuration: JSON file merged with command-line flags, grids, and
//! resolution into concrete parameter points.

use std::path::{Path, PathBuf};

use nhssb_core::mc::Start;
use nhssb_core::{Boundary, Params};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_SCHEMA: u32 = 1;

/// Every field is optional so a file and the flags can be layered; flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_prime: Option<f64>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(rename = "U_im", default, skip_serializing_if = "Option::is_none")]
    pub u_im: Option<f64>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<Boundary>,
    /// Axes in `name=start:stop:count` syntax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_therm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_path: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Start>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_dump: Option<bool>,
    /// Bins per axis of the velocity histogram.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hist_bins: Option<usize>,
    /// Momentum grid size of the mean-field solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mf_l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ls: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Vec<PathBuf>>,
    /// Worker threads; results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

macro_rules! layer {
    ($top:expr, $base:expr, $($f:ident),*) => {
        JobConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl JobConfig {
    /// `self` over `base`, field by field; `beta` and `T` count as one
    /// setting.
    pub fn over(self, mut base: JobConfig) -> JobConfig {
        if self.beta.is_some() || self.temperature.is_some() {
            base.beta = None;
            base.temperature = None;
        }
        layer!(
            self, base, schema_version, t, t_prime, u, u_im, j, l, beta, temperature, bc, grid, seed, n_therm,
            n_sweeps, n_chains, measure_every, fast_path, start, raw_dump, hist_bins, mf_l, mode, r, ls, alpha,
            r_min, r_max, input, workers
        )
    }

    /// A config file, or the `config` of a job manifest written by a
    /// previous run.
    pub fn load(path: &Path) -> Result<JobConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(c) if value.get("command").is_some() => c.clone(),
            _ => value,
        };
        let cfg: JobConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        match cfg.schema_version {
            Some(CONFIG_SCHEMA) => Ok(cfg),
            Some(v) => Err(CliError::Config(format!("unsupported schema_version {v} (expected {CONFIG_SCHEMA})"))),
            None => Err(CliError::Config(format!("{}: missing schema_version", path.display()))),
        }
    }
}

/// One grid axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

const AXES: &[&str] = &["beta", "T", "U", "U_im", "J", "L", "t_prime"];

/// `name=start:stop:count` (inclusive, evenly spaced) or `name=value`.
pub fn parse_axis(s: &str) -> Result<Axis, CliError> {
    let bad = |why: &str| CliError::Config(format!("grid axis `{s}`: {why}"));
    let (name, spec) = s.split_once('=').ok_or_else(|| bad("expected name=start:stop:count"))?;
    let name = name.trim();
    if !AXES.contains(&name) {
        return Err(bad(&format!("unknown axis, expected one of {}", AXES.join(", "))));
    }
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(&format!("`{x}` is not a number")));
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [v] => vec![num(v)?],
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
            match n {
                0 => return Err(bad("count must be positive")),
                1 if a != b => return Err(bad("count 1 needs start = stop")),
                1 => vec![a],
                _ => (0..n).map(|i| if i + 1 == n { b } else { tidy(a + (b - a) * i as f64 / (n - 1) as f64) }).collect(),
            }
        }
        _ => return Err(bad("expected start:stop:count")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(Axis { name: name.to_string(), values })
}

/// Rounds to 15 significant digits, so `0:0.8:9` yields `0.3` rather than
/// `0.30000000000000004`.
fn tidy(x: f64) -> f64 {
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Base parameters and the grid points derived from them.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: JobConfig,
    pub base: Params,
    pub axes: Vec<Axis>,
    pub points: Vec<Params>,
}

pub const DEFAULT_L: usize = 32;
pub const DEFAULT_BETA: f64 = 10.0;
pub const DEFAULT_U: f64 = 0.4;

pub fn resolve(cfg: JobConfig) -> Result<Resolved, CliError> {
    if cfg.beta.is_some() && cfg.temperature.is_some() {
        return Err(CliError::Config("give either beta or T, not both".into()));
    }
    let beta = match cfg.temperature {
        Some(t) if t > 0.0 => 1.0 / t,
        Some(t) => return Err(CliError::Config(format!("T = {t} must be positive"))),
        None => cfg.beta.unwrap_or(DEFAULT_BETA),
    };
    let mut base = Params::new(cfg.l.unwrap_or(DEFAULT_L), beta);
    base.t = cfg.t.unwrap_or(base.t);
    base.t_prime = cfg.t_prime.unwrap_or(0.0);
    base.u_re = cfg.u.unwrap_or(DEFAULT_U);
    base.u_im = cfg.u_im.unwrap_or(0.0);
    base.j = cfg.j.unwrap_or(0.0);
    base.bc = cfg.bc.unwrap_or(Boundary::Pbc);
    let axes = cfg.grid.iter().flatten().map(|s| parse_axis(s)).collect::<Result<Vec<_>, _>>()?;
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::Config(format!("grid axis `{}` given twice", a.name)));
        }
    }
    if axes.iter().any(|a| a.name == "T") && axes.iter().any(|a| a.name == "beta") {
        return Err(CliError::Config("grid has both T and beta axes".into()));
    }
    let mut points = vec![base.clone()];
    for axis in &axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for &v in &axis.values {
                next.push(set_axis(p.clone(), &axis.name, v)?);
            }
        }
        points = next;
    }
    for p in &points {
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(Resolved { config: cfg, base, axes, points })
}

fn set_axis(mut p: Params, name: &str, v: f64) -> Result<Params, CliError> {
    match name {
        "beta" => p.beta = v,
        "T" if v > 0.0 => p.beta = 1.0 / v,
        "T" => return Err(CliError::Config(format!("grid temperature {v} must be positive"))),
        "U" => p.u_re = v,
        "U_im" => p.u_im = v,
        "J" => p.j = v,
        "t_prime" => p.t_prime = v,
        "L" if v >= 2.0 && v.fract() == 0.0 => p.l = v as usize,
        "L" => return Err(CliError::Config(format!("grid L = {v} is not an integer ≥ 2"))),
        _ => unreachable!("axis names are checked on parse"),
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_is_inclusive() {
        let a = parse_axis("U=0:0.8:17").unwrap();
        assert_eq!(a.values.len(), 17);
        assert_eq!(a.values[0], 0.0);
        assert_eq!(a.values[16], 0.8);
        assert_eq!(a.values[1], 0.05);
        assert_eq!(parse_axis("U=0:0.8:9").unwrap().values[3], 0.3);
        assert_eq!(parse_axis("T=0.5").unwrap().values, vec![0.5]);
        for bad in ["U", "X=1:2:3", "U=1:2", "U=1:2:0", "U=a:2:3", "U=1:2:1"] {
            assert!(parse_axis(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_override_file() {
        let file = JobConfig { l: Some(16), u: Some(0.3), seed: Some(1), ..Default::default() };
        let flags = JobConfig { u: Some(0.5), ..Default::default() };
        let m = flags.over(file);
        assert_eq!((m.l, m.u, m.seed), (Some(16), Some(0.5), Some(1)));
        let file = JobConfig { temperature: Some(0.5), ..Default::default() };
        let m = JobConfig { beta: Some(4.0), ..Default::default() }.over(file);
        assert_eq!((m.beta, m.temperature), (Some(4.0), None));
    }

    #[test]
    fn grid_is_a_product() {
        let cfg = JobConfig { grid: Some(vec!["U=0:0.8:3".into(), "T=0.5:1:2".into()]), ..Default::default() };
        let r = resolve(cfg).unwrap();
        assert_eq!(r.points.len(), 6);
        assert_eq!(r.points[1].beta, 1.0);
        assert_eq!(r.points[5].u_re, 0.8);
        let dup = JobConfig { grid: Some(vec!["U=0".into(), "U=1".into()]), ..Default::default() };
        assert!(resolve(dup).is_err());
    }
}
