//! Post-processing: specific heat, winding plateaus, correlation functions,
//! domain-wall energetics, finite-size scaling and velocity histograms.
//!
//! Every function here is a deterministic function of its inputs.

pub mod fit;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{brute_force, exact_observables, hn_spectrum, n_minus_distribution, ClassTable, BRUTE_FORCE_MAX_L};
use crate::mc::stats::{pooled_estimate, specific_heat_estimate, Estimate};
use crate::mc::SampleRecord;
use crate::model::{build_hopping, make_domain_wall_pair, uniform_config, Boundary, ModelParams};
use crate::scalar::{to_f64, Real};
use crate::spectral::{eigenvalues, ground_state_energy};

pub use fit::{fit_linear, fit_quadratic, LinearFit};

/// Largest `|w - round(w)|` still counted as on a plateau.
pub const PLATEAU_TOL: f64 = 0.1;
pub const PLATEAU_MIN_POINTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub tag: String,
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub mean: Vec<f64>,
    pub err: Vec<f64>,
    pub l: usize,
}

impl ObservableSeries {
    pub fn new(tag: &str, axis_name: &str, l: usize, axis: Vec<f64>, mean: Vec<f64>, err: Vec<f64>) -> Result<Self> {
        if axis.len() != mean.len() || axis.len() != err.len() {
            return Err(Error::InvalidParams(format!("series '{tag}' has unequal lengths")));
        }
        if err.iter().any(|e| *e < 0.0) {
            return Err(Error::InvalidParams(format!("series '{tag}' has negative errors")));
        }
        Ok(Self { tag: tag.into(), axis_name: axis_name.into(), axis, mean, err, l })
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

/// Fluctuation estimate of the per-site specific heat from samples,
/// one slice per chain.
pub fn specific_heat<T: Real>(chains: &[&[SampleRecord<T>]], params: &ModelParams<T>) -> Estimate {
    let e: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|r| to_f64(r.energy())).collect()).collect();
    let d: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|r| to_f64(r.def_dbeta)).collect()).collect();
    let er: Vec<&[f64]> = e.iter().map(|v| v.as_slice()).collect();
    let dr: Vec<&[f64]> = d.iter().map(|v| v.as_slice()).collect();
    specific_heat_estimate(&er, &dr, to_f64(params.beta), params.l)
}

fn exact_energy(params: &ModelParams<f64>) -> Result<f64> {
    if params.gauge_reducible() && params.bc == Boundary::Pbc {
        Ok(exact_observables(params)?.mean_energy)
    } else if params.l <= BRUTE_FORCE_MAX_L {
        Ok(brute_force(params)?.mean_energy)
    } else {
        Err(Error::Unsupported("t' = 0 and PBC, or L ≤ 16".into()))
    }
}

/// `d⟨E⟩/dT / L` by a centered difference in temperature.
pub fn specific_heat_numerical(params: &ModelParams<f64>, dt: f64) -> Result<f64> {
    let t = 1.0 / params.beta;
    let up = exact_energy(&params.clone().with_beta(1.0 / (t + dt)))?;
    let down = exact_energy(&params.clone().with_beta(1.0 / (t - dt)))?;
    Ok((up - down) / (2.0 * dt) / params.l as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub value: i64,
    /// Inclusive index range into the series.
    pub start: usize,
    pub end: usize,
    pub axis_start: f64,
    pub axis_end: f64,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingAnalysis {
    pub series: ObservableSeries,
    pub nearest: Vec<i64>,
    pub residual: Vec<f64>,
    pub plateaus: Vec<Plateau>,
    /// Axis midpoints between consecutive plateaus with different values.
    pub transitions: Vec<f64>,
}

impl WindingAnalysis {
    pub fn plateau_values(&self) -> Vec<i64> {
        self.plateaus.iter().map(|p| p.value).collect()
    }
}

/// Plateaus are maximal runs of at least three consecutive points sharing
/// the nearest integer with `|w - round(w)| < 0.1`.
pub fn winding_series(series: ObservableSeries) -> WindingAnalysis {
    let nearest: Vec<i64> = series.mean.iter().map(|w| w.round() as i64).collect();
    let residual: Vec<f64> = series.mean.iter().map(|w| (w - w.round()).abs()).collect();
    let mut plateaus = Vec::new();
    let n = series.len();
    let mut i = 0;
    while i < n {
        if !(residual[i] < PLATEAU_TOL) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && residual[j + 1] < PLATEAU_TOL && nearest[j + 1] == nearest[i] {
            j += 1;
        }
        if j + 1 - i >= PLATEAU_MIN_POINTS {
            plateaus.push(Plateau {
                value: nearest[i],
                start: i,
                end: j,
                axis_start: series.axis[i],
                axis_end: series.axis[j],
                max_residual: residual[i..=j].iter().cloned().fold(0.0, f64::max),
            });
        }
        i = j + 1;
    }
    let transitions = plateaus
        .windows(2)
        .filter(|w| w[0].value != w[1].value)
        .map(|w| 0.5 * (w[0].axis_end + w[1].axis_start))
        .collect();
    WindingAnalysis { series, nearest, residual, plateaus, transitions }
}

/// Sector-restricted winding `sector · Im⟨v̂⟩ β / L` of one sample set.
pub fn sectored_winding<T: Real>(chains: &[&[SampleRecord<T>]], params: &ModelParams<T>) -> Estimate {
    series_estimate(chains, |r| r.sector as f64 * to_f64(r.winding(params.beta, params.l)))
}

/// Unsectored winding, zero in expectation by the `X → -X` symmetry.
pub fn unsectored_winding<T: Real>(chains: &[&[SampleRecord<T>]], params: &ModelParams<T>) -> Estimate {
    series_estimate(chains, |r| to_f64(r.winding(params.beta, params.l)))
}

fn series_estimate<T: Real>(chains: &[&[SampleRecord<T>]], f: impl Fn(&SampleRecord<T>) -> f64) -> Estimate {
    let v: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(&f).collect()).collect();
    let r: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
    pooled_estimate(&r)
}

/// `C_X(r) = ⟨X_i X_{i+r}⟩` and the connected current correlator
/// `C_v(r) = ⟨Im j_i Im j_{i+r}⟩ - j̄²`, with `j̄` the sector-restricted mean
/// bond current `⟨sector · Im⟨v̂⟩⟩ / L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub r: Vec<usize>,
    pub c_x: Vec<Estimate>,
    pub c_v_full: Vec<Estimate>,
    pub c_v: Vec<f64>,
    pub mean_current: f64,
}

pub fn correlations<T: Real>(chains: &[&[SampleRecord<T>]], params: &ModelParams<T>) -> Correlations {
    let nr = params.l / 2 + 1;
    let l = params.l as f64;
    let c_x: Vec<Estimate> = (0..nr).map(|r| series_estimate(chains, |s| to_f64(s.corr_x[r]))).collect();
    let c_v_full: Vec<Estimate> = (0..nr).map(|r| series_estimate(chains, |s| to_f64(s.corr_v[r]))).collect();
    let mean_current = series_estimate(chains, |s| s.sector as f64 * to_f64(s.v.im) / l).mean;
    let c_v = c_v_full.iter().map(|e| e.mean - mean_current * mean_current).collect();
    Correlations { r: (0..nr).collect(), c_x, c_v_full, c_v, mean_current }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DwModeTag {
    #[serde(rename = "fixed_L_vary_r")]
    FixedLVaryR,
    #[serde(rename = "fixed_r_vary_L")]
    FixedRVaryL,
    /// `r = round(αL)`, the geometry of a constant wall fraction.
    #[serde(rename = "fixed_alpha_vary_L")]
    FixedAlphaVaryL,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DwMode {
    /// All `r = 1..L-1`; the fit uses `r ∈ [r_min, r_max]`.
    FixedL { l: usize, r_min: usize, r_max: usize },
    FixedR { r: usize, ls: Vec<usize> },
    FixedAlpha { alpha: f64, ls: Vec<usize> },
}

impl DwMode {
    /// Fit window `[L/8, L/2]`.
    pub fn fixed_l(l: usize) -> Self {
        DwMode::FixedL { l, r_min: l / 8, r_max: l / 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainWallScan {
    pub mode: DwModeTag,
    /// `(r, ΔE)` or `(L, ΔE)`.
    pub points: Vec<(f64, f64)>,
    /// Fixed `L`: `ΔE` vs `r` over the window. Fixed `r`: `ΔE` vs `1/L`.
    /// Fixed `α`: `ΔE` vs `L`.
    pub fit: Option<LinearFit>,
    /// Fixed `r`: `|ΔE(L_last) - ΔE(L_prev)|`.
    pub saturation: Option<f64>,
    /// Fixed `L`: `max_r |ΔE(r) - ΔE(L-r)|`.
    pub symmetry_defect: Option<f64>,
}

/// `E_0(pair of walls r apart) - E_0(uniform)`; exact reduced spectra at
/// `t' = 0`, PBC, dense eigensolves otherwise.
pub fn domain_wall_energy(params: &ModelParams<f64>, l: usize, r: usize) -> Result<f64> {
    let p = params.clone().with_l(l);
    // Walls r and L - r apart are related by negation and a translation.
    let r = if p.bc == Boundary::Pbc && r < l { r.min(l - r) } else { r };
    if p.gauge_reducible() && p.bc == Boundary::Pbc {
        let e = |n| -> Result<f64> { Ok(ground_state_energy(&hn_spectrum(l, n, &p)?.spectrum).energy) };
        return Ok(e(r)? - e(0)?);
    }
    let e = |c| -> Result<f64> { Ok(ground_state_energy(&eigenvalues(&build_hopping(&p, &c)?)?).energy) };
    Ok(e(make_domain_wall_pair(l, r)?)? - e(uniform_config(l, 1))?)
}

pub fn domain_wall_scan(params: &ModelParams<f64>, mode: &DwMode) -> Result<DomainWallScan> {
    match mode {
        DwMode::FixedL { l, r_min, r_max } => {
            let points = (1..*l)
                .map(|r| Ok((r as f64, domain_wall_energy(params, *l, r)?)))
                .collect::<Result<Vec<_>>>()?;
            let window: Vec<&(f64, f64)> =
                points.iter().filter(|(r, _)| *r >= *r_min as f64 && *r <= *r_max as f64).collect();
            let x: Vec<f64> = window.iter().map(|p| p.0).collect();
            let y: Vec<f64> = window.iter().map(|p| p.1).collect();
            let defect = (1..*l).map(|r| (points[r - 1].1 - points[l - r - 1].1).abs()).fold(0.0, f64::max);
            Ok(DomainWallScan {
                mode: DwModeTag::FixedLVaryR,
                fit: fit_linear(&x, &y),
                points,
                saturation: None,
                symmetry_defect: Some(defect),
            })
        }
        DwMode::FixedR { r, ls } => {
            let points = ls
                .iter()
                .map(|&l| Ok((l as f64, domain_wall_energy(params, l, *r)?)))
                .collect::<Result<Vec<_>>>()?;
            let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
            let y: Vec<f64> = points.iter().map(|p| p.1).collect();
            let saturation = (points.len() >= 2).then(|| (points[points.len() - 1].1 - points[points.len() - 2].1).abs());
            Ok(DomainWallScan { mode: DwModeTag::FixedRVaryL, fit: fit_linear(&x, &y), points, saturation, symmetry_defect: None })
        }
        DwMode::FixedAlpha { alpha, ls } => {
            let points = ls
                .iter()
                .map(|&l| {
                    let r = ((alpha * l as f64).round() as usize).clamp(1, l - 1);
                    Ok((l as f64, domain_wall_energy(params, l, r)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let x: Vec<f64> = points.iter().map(|p| p.0).collect();
            let y: Vec<f64> = points.iter().map(|p| p.1).collect();
            Ok(DomainWallScan { mode: DwModeTag::FixedAlphaVaryL, fit: fit_linear(&x, &y), points, saturation: None, symmetry_defect: None })
        }
    }
}

/// Per-site `C_V(β)` on a grid for one system size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub l: usize,
    pub beta: Vec<f64>,
    pub cv: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub l: usize,
    pub beta_peak: f64,
    pub height: f64,
    pub at_edge: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaCEstimate {
    pub beta_c: f64,
    pub err: f64,
    pub peaks: Vec<Peak>,
    pub fit: Option<LinearFit>,
    pub reliable: bool,
    pub reasons: Vec<String>,
}

/// Minimum relative growth of the peak height from the smallest to the
/// largest size for the extrapolation to count as a transition.
pub const SHARPENING_MIN: f64 = 0.1;

/// Quadratic fit through the maximum and up to two neighbours per side.
pub fn locate_peak(curve: &CvCurve) -> Option<Peak> {
    let n = curve.cv.len();
    if n == 0 || curve.beta.len() != n {
        return None;
    }
    let i = (0..n).fold(0, |b, k| if curve.cv[k] > curve.cv[b] { k } else { b });
    if i == 0 || i + 1 == n {
        return Some(Peak { l: curve.l, beta_peak: curve.beta[i], height: curve.cv[i], at_edge: true });
    }
    let lo = i.saturating_sub(2);
    let hi = (i + 2).min(n - 1);
    let (x, y) = (&curve.beta[lo..=hi], &curve.cv[lo..=hi]);
    match fit_quadratic(x, y) {
        Some([c0, c1, c2]) if c2 < 0.0 => {
            let b = (-c1 / (2.0 * c2)).clamp(curve.beta[i - 1], curve.beta[i + 1]);
            Some(Peak { l: curve.l, beta_peak: b, height: c0 + c1 * b + c2 * b * b, at_edge: false })
        }
        _ => Some(Peak { l: curve.l, beta_peak: curve.beta[i], height: curve.cv[i], at_edge: false }),
    }
}

/// Extrapolates the peak positions linearly in `1/L` (leading drift of a
/// first-order transition) to `1/L → 0`.
pub fn betac_from_scaling(curves: &[CvCurve]) -> Option<BetaCEstimate> {
    let mut peaks: Vec<Peak> = curves.iter().filter_map(locate_peak).collect();
    peaks.sort_by_key(|p| p.l);
    if peaks.len() < 2 {
        return None;
    }
    let x: Vec<f64> = peaks.iter().map(|p| 1.0 / p.l as f64).collect();
    let y: Vec<f64> = peaks.iter().map(|p| p.beta_peak).collect();
    let fit = fit_linear(&x, &y);
    let mut reasons = Vec::new();
    if peaks.len() < 3 {
        reasons.push("fewer than three sizes".to_string());
    }
    if peaks.iter().any(|p| p.at_edge) {
        reasons.push("peak at the edge of the beta grid".to_string());
    }
    let (first, last) = (peaks[0].height, peaks[peaks.len() - 1].height);
    if !(last > first * (1.0 + SHARPENING_MIN)) {
        reasons.push(format!("no peak sharpening with L (height {first:.4} -> {last:.4})"));
    }
    let (beta_c, err) = match &fit {
        Some(f) => (f.intercept, f.intercept_err),
        None => (f64::NAN, f64::NAN),
    };
    Some(BetaCEstimate { beta_c, err, peaks, fit, reliable: reasons.is_empty(), reasons })
}

/// Normalized 2D histogram over `(Re v, Im v)` on a square grid symmetric
/// about the origin. The bin count is forced odd so `v → -v` maps bins
/// onto bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub bins: usize,
    pub re_half_width: f64,
    pub im_half_width: f64,
    /// Row-major `[i_re * bins + i_im]`, summing to one.
    pub density: Vec<f64>,
    pub total_weight: f64,
    /// `Σ |H - H_mirror|`, between 0 and 2.
    pub symmetry_score: f64,
}

impl Histogram2D {
    pub fn at(&self, i_re: usize, i_im: usize) -> f64 {
        self.density[i_re * self.bins + i_im]
    }

    /// Marginal over `Re v`, indexed by the `Im v` bin.
    pub fn im_marginal(&self) -> Vec<f64> {
        (0..self.bins).map(|j| (0..self.bins).map(|i| self.at(i, j)).sum()).collect()
    }

    /// Number of local maxima of the `Im v` marginal holding at least 5% mass.
    pub fn im_modes(&self) -> usize {
        let m = self.im_marginal();
        let n = m.len();
        (0..n)
            .filter(|&j| {
                let left = if j == 0 { 0.0 } else { m[j - 1] };
                let right = if j + 1 == n { 0.0 } else { m[j + 1] };
                m[j] >= 0.05 && m[j] > left && m[j] >= right
            })
            .count()
    }
}

fn bin_index(x: f64, half: f64, bins: usize) -> usize {
    let f = ((x + half) / (2.0 * half) * bins as f64).floor();
    (f.max(0.0) as usize).min(bins - 1)
}

/// Weighted samples `(v, weight)`; a half-width of zero picks the range from
/// the data.
pub fn histogram_v(samples: &[(Complex<f64>, f64)], bins: usize, re_half: f64, im_half: f64) -> Histogram2D {
    let bins = bins.max(1) | 1;
    let auto = |f: &dyn Fn(&Complex<f64>) -> f64| samples.iter().map(|(v, _)| f(v).abs()).fold(0.0, f64::max).max(1e-12) * 1.05;
    let re_half = if re_half > 0.0 { re_half } else { auto(&|v| v.re) };
    let im_half = if im_half > 0.0 { im_half } else { auto(&|v| v.im) };
    let mut h = vec![0.0; bins * bins];
    let mut total = 0.0;
    for (v, w) in samples {
        h[bin_index(v.re, re_half, bins) * bins + bin_index(v.im, im_half, bins)] += w;
        total += w;
    }
    if total > 0.0 {
        for x in &mut h {
            *x /= total;
        }
    }
    let score = (0..bins)
        .flat_map(|i| (0..bins).map(move |j| (i, j)))
        .map(|(i, j)| (h[i * bins + j] - h[(bins - 1 - i) * bins + (bins - 1 - j)]).abs())
        .sum();
    Histogram2D { bins, re_half_width: re_half, im_half_width: im_half, density: h, total_weight: total, symmetry_score: score }
}

pub fn histogram_v_records<T: Real>(records: &[&SampleRecord<T>], bins: usize) -> Histogram2D {
    let s: Vec<(Complex<f64>, f64)> =
        records.iter().map(|r| (Complex::new(to_f64(r.v.re), to_f64(r.v.im)), 1.0)).collect();
    histogram_v(&s, bins, 0.0, 0.0)
}

/// Histogram of the exact ensemble at `t' = 0`, PBC: class `n_-` carries
/// `⟨v̂⟩(n)` with probability `P(n)`.
pub fn histogram_v_exact(params: &ModelParams<f64>, bins: usize) -> Result<Histogram2D> {
    let table = ClassTable::build(params)?;
    let p = n_minus_distribution(params, &table);
    let s: Vec<(Complex<f64>, f64)> = table.velocity.iter().copied().zip(p).collect();
    Ok(histogram_v(&s, bins, 0.0, 0.0))
}
