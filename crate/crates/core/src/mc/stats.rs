//! Binning, integrated autocorrelation times and jackknife errors.
//!
//! Chains are binned separately with a common bin size and the bins are
//! pooled; the bin size is the largest power of two that still leaves at
//! least [`MIN_BINS`] bins in total. With several chains the error is
//! never smaller than the standard error of the chain means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChainOutput, SampleRecord};
use crate::model::ModelParams;
use crate::scalar::{to_f64, Real};

pub const MIN_BINS: usize = 32;
/// First/second-half disagreement that triggers a warning, in σ.
pub const EQUILIBRATION_SIGMA: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub err: f64,
    /// In units of the measurement interval.
    pub tau_int: f64,
    pub n_bins: usize,
    pub bin_size: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` normalization.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1) as f64
}

/// Non-overlapping bin means; a trailing partial bin is dropped.
pub fn bin_means(xs: &[f64], bin: usize) -> Vec<f64> {
    xs.chunks_exact(bin).map(mean).collect()
}

fn pooled_bins(chains: &[&[f64]], bin: usize) -> Vec<f64> {
    chains.iter().flat_map(|c| bin_means(c, bin)).collect()
}

/// Largest power-of-two bin size leaving at least `MIN_BINS` pooled bins.
pub fn choose_bin_size(lens: &[usize]) -> usize {
    let mut b = 1;
    while lens.iter().map(|&n| n / (2 * b)).sum::<usize>() >= MIN_BINS {
        b *= 2;
    }
    b
}

pub fn pooled_estimate(chains: &[&[f64]]) -> Estimate {
    let lens: Vec<usize> = chains.iter().map(|c| c.len()).collect();
    let bin = choose_bin_size(&lens);
    let all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let bins = pooled_bins(chains, bin);
    let nb = bins.len();
    let mut err = if nb > 1 { (variance(&bins) / nb as f64).sqrt() } else { f64::NAN };
    // chains stuck in different sectors: the spread of chain means dominates
    let chain_means: Vec<f64> = chains.iter().filter(|c| !c.is_empty()).map(|c| mean(c)).collect();
    if chain_means.len() > 1 {
        err = err.max((variance(&chain_means) / chain_means.len() as f64).sqrt());
    }
    let err1 = (variance(&all) / all.len().max(1) as f64).sqrt();
    let tau_int = if err1 > 0.0 { 0.5 * (err / err1).powi(2) } else { 0.5 };
    Estimate { mean: mean(&all), err, tau_int, n_bins: nb, bin_size: bin }
}

pub fn estimate(xs: &[f64]) -> Estimate {
    pooled_estimate(&[xs])
}

/// Leave-one-bin-out jackknife of `f` applied to the column means.
pub fn jackknife(columns: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let k = columns.len();
    let nb = columns.first().map_or(0, |c| c.len());
    let totals: Vec<f64> = columns.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = totals.iter().map(|t| t / nb as f64).collect();
    let value = f(&full);
    if nb < 2 {
        return (value, f64::NAN);
    }
    let mut loo = Vec::with_capacity(nb);
    let mut buf = vec![0.0; k];
    for b in 0..nb {
        for (i, col) in columns.iter().enumerate() {
            buf[i] = (totals[i] - col[b]) / (nb - 1) as f64;
        }
        loo.push(f(&buf));
    }
    let mu = mean(&loo);
    let var = loo.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    (value, var.sqrt())
}

/// Merged statistics for one parameter point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    pub observables: BTreeMap<String, Estimate>,
    pub acceptance: f64,
    pub aborted_proposals: u64,
    pub failed_measurements: u64,
    pub drift_events: u64,
    pub n_samples: usize,
    pub warnings: Vec<String>,
}

impl PointStats {
    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.observables.get(name)
    }
}

/// Scalar observables extracted from every record.
pub const OBSERVABLES: &[&str] = &[
    "m", "abs_m", "m2", "m_sector", "e_j", "e_f", "energy", "def_dbeta", "v_re", "v_im", "w", "w_sector",
];

pub fn extract<T: Real>(r: &SampleRecord<T>, name: &str, beta: f64, l: usize) -> f64 {
    let s = r.sector as f64;
    let w = to_f64(r.v.im) * beta / l as f64;
    match name {
        "m" => to_f64(r.m),
        "abs_m" => to_f64(r.abs_m),
        "m2" => to_f64(r.m * r.m),
        "m_sector" => s * to_f64(r.m),
        "e_j" => to_f64(r.e_j),
        "e_f" => to_f64(r.e_f),
        "energy" => to_f64(r.energy()),
        "def_dbeta" => to_f64(r.def_dbeta),
        "v_re" => to_f64(r.v.re),
        "v_im" => to_f64(r.v.im),
        "w" => w,
        "w_sector" => s * w,
        _ => f64::NAN,
    }
}

/// `β² [Var(E) - ⟨∂E_f/∂β⟩] / L` from pooled bins of `E`, `E²`, `∂E_f/∂β`.
pub fn specific_heat_estimate(energy: &[&[f64]], dedb: &[&[f64]], beta: f64, l: usize) -> Estimate {
    let lens: Vec<usize> = energy.iter().map(|c| c.len()).collect();
    let bin = choose_bin_size(&lens);
    let e2: Vec<Vec<f64>> = energy.iter().map(|c| c.iter().map(|x| x * x).collect()).collect();
    let e2r: Vec<&[f64]> = e2.iter().map(|v| v.as_slice()).collect();
    let cols = vec![pooled_bins(energy, bin), pooled_bins(&e2r, bin), pooled_bins(dedb, bin)];
    let nb = cols[0].len();
    let f = |c: &[f64]| beta * beta * (c[1] - c[0] * c[0] - c[2]) / l as f64;
    let (value, err) = jackknife(&cols, f);
    Estimate { mean: value, err, tau_int: f64::NAN, n_bins: nb, bin_size: bin }
}

/// Warns when the two halves of a chain disagree by more than
/// [`EQUILIBRATION_SIGMA`].
pub fn equilibration_warning(name: &str, chain: usize, xs: &[f64]) -> Option<String> {
    if xs.len() < 2 * MIN_BINS {
        return None;
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    let (ea, eb) = (estimate(a), estimate(b));
    let sigma = (ea.err * ea.err + eb.err * eb.err).sqrt();
    let diff = (ea.mean - eb.mean).abs();
    if sigma > 0.0 && diff > EQUILIBRATION_SIGMA * sigma {
        Some(format!(
            "chain {chain}: {name} halves differ by {:.1} sigma ({:.6} vs {:.6}); not equilibrated",
            diff / sigma,
            ea.mean,
            eb.mean
        ))
    } else {
        None
    }
}

pub fn point_stats<T: Real>(params: &ModelParams<T>, chains: &[ChainOutput<T>]) -> PointStats {
    let beta = to_f64(params.beta);
    let l = params.l;
    let mut out = PointStats::default();
    let mut series: BTreeMap<&str, Vec<Vec<f64>>> = BTreeMap::new();
    for name in OBSERVABLES {
        let per_chain: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.records.iter().map(|r| extract(r, name, beta, l)).collect())
            .collect();
        series.insert(name, per_chain);
    }
    for (name, per_chain) in &series {
        let refs: Vec<&[f64]> = per_chain.iter().map(|v| v.as_slice()).collect();
        out.observables.insert(name.to_string(), pooled_estimate(&refs));
    }
    for name in ["abs_m", "energy"] {
        for (c, xs) in series[name].iter().enumerate() {
            out.warnings.extend(equilibration_warning(name, c, xs));
        }
    }
    let e: Vec<&[f64]> = series["energy"].iter().map(|v| v.as_slice()).collect();
    let d: Vec<&[f64]> = series["def_dbeta"].iter().map(|v| v.as_slice()).collect();
    out.observables.insert("specific_heat".into(), specific_heat_estimate(&e, &d, beta, l));
    out.n_samples = chains.iter().map(|c| c.records.len()).sum();
    out.acceptance = if chains.is_empty() { 0.0 } else { chains.iter().map(|c| c.acceptance).sum::<f64>() / chains.len() as f64 };
    out.aborted_proposals = chains.iter().map(|c| c.aborted_proposals).sum();
    out.failed_measurements = chains.iter().map(|c| c.failed_measurements).sum();
    out.drift_events = chains.iter().map(|c| c.drift_events).sum();
    if out.aborted_proposals > 0 {
        out.warnings.push(format!("{} proposals aborted by spectral errors", out.aborted_proposals));
    }
    if out.failed_measurements > 0 {
        out.warnings.push(format!("{} measurements failed", out.failed_measurements));
    }
    if out.drift_events > 0 {
        out.warnings.push(format!("{} cached-weight drift events above tolerance", out.drift_events));
    }
    out
}
