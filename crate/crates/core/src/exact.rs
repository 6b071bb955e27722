//! Exact partition sums.
//!
//! At `t' = 0` under PBC a diagonal gauge transform turns `h(X)` into a
//! uniform ring whose right/left amplitudes depend only on the number
//! `n_-` of `X_i = -1` bonds. The fermionic weight, energy, its
//! β-derivative and `⟨v̂⟩` are therefore class functions of `n_-`, while
//! the Ising energy depends only on the number `k` of domain walls. The
//! sum over `2^L` configurations collapses to `O(L²)` classes `(n, k)`
//! weighted by ring multiplicities `N(L, n, k)`.
//!
//! [`brute_force`] enumerates every configuration with a dense eigensolve
//! and is the reference for the class sums.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_complex::Complex;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_hopping, ising_energy, Boundary, ModelParams, SpinConfig};
use crate::scalar::{cre, cst, czero, fermi, from_usize, log_sum_exp, to_f64, Real};
use crate::spectral::{
    denergy_dbeta, eigenvalues, fermion_energy, ground_state_energy, log_weight,
    velocity_expectation_dense, SpectralData,
};

/// Largest `L` accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_L: usize = 16;

/// Spectrum of the translation-invariant ring gauge-equivalent to every
/// configuration with `n_minus` negative bonds.
///
/// `ε_m = |A| e^{-iθ_m} + ((t² - U²)/|A|) e^{iθ_m}` with
/// `|A| = |Π_i (t + U X_i)|^{1/L}`, `θ_m = (2πm - φ)/L` and
/// `φ = arg Π_i (t + U X_i)`.
#[derive(Clone, Debug)]
pub struct HnReducedSpectrum<T> {
    pub n_minus: usize,
    /// `ln Π_i (t + U X_i)` (sum of principal logs; imaginary part is the flux).
    pub log_amp_product: Complex<T>,
    /// `|A|`.
    pub amp: T,
    pub flux: T,
    /// Nonzero flux: momenta shifted off the `2πm/L` grid.
    pub flux_shifted: bool,
    pub spectrum: SpectralData<T>,
    /// `dε/dθ` for each mode, aligned with `spectrum.eigs`.
    pub velocities: Vec<Complex<T>>,
}

impl<T: Real> HnReducedSpectrum<T> {
    /// `Π_i (t + U X_i)`; may overflow for large `L`, see `log_amp_product`.
    pub fn amp_product(&self) -> Complex<T> {
        self.log_amp_product.exp()
    }
}

fn check_reducible<T: Real>(params: &ModelParams<T>) -> Result<()> {
    if params.t_prime != T::zero() {
        return Err(Error::Unsupported("t' = 0 for the gauge-reduced spectrum".into()));
    }
    if params.bc != Boundary::Pbc {
        return Err(Error::Unsupported("periodic boundaries for the class sum".into()));
    }
    Ok(())
}

pub fn hn_spectrum<T: Real>(l: usize, n_minus: usize, params: &ModelParams<T>) -> Result<HnReducedSpectrum<T>> {
    check_reducible(params)?;
    if n_minus > l {
        return Err(Error::InvalidConfig(format!("n_minus = {n_minus} > L = {l}")));
    }
    let t = cre(params.t);
    let u = params.u();
    let (right, left) = (t + u, t - u);
    if (n_minus < l && right.norm() == T::zero()) || (n_minus > 0 && left.norm() == T::zero()) {
        return Err(Error::InvalidParams("t ± U = 0: a bond amplitude vanishes".into()));
    }
    let log_p = right.ln() * from_usize::<T>(l - n_minus) + left.ln() * from_usize::<T>(n_minus);
    let lt = from_usize::<T>(l);
    let amp = (log_p.re / lt).exp();
    let flux = log_p.im;
    let c = t * t - u * u;
    let two_pi = T::PI() + T::PI();
    let mut eigs = Vec::with_capacity(l);
    let mut velocities = Vec::with_capacity(l);
    for m in 0..l {
        let theta = (two_pi * from_usize::<T>(m) - flux) / lt;
        let fwd = Complex::from_polar(amp, -theta);
        let bwd = c / amp * Complex::from_polar(T::one(), theta);
        eigs.push(fwd + bwd);
        // dε/dθ = -i fwd + i bwd
        velocities.push(Complex::new(fwd.im - bwd.im, bwd.re - fwd.re));
    }
    let flux_wrapped = flux - two_pi * (flux / two_pi).round();
    let flux_shifted = flux_wrapped.abs() > cst::<T>(1e-12);
    let spectrum = if params.is_real() {
        SpectralData::paired(eigs)?
    } else {
        SpectralData::real(eigs.iter().map(|e| e.re).collect())
    };
    Ok(HnReducedSpectrum { n_minus, log_amp_product: log_p, amp, flux, flux_shifted, spectrum, velocities })
}

/// `⟨v̂⟩ = Σ_m (dε/dθ)_m f(ε_m)` on the reduced spectrum.
pub fn reduced_velocity<T: Real>(hn: &HnReducedSpectrum<T>, beta: T) -> Complex<T> {
    hn.spectrum
        .eigs
        .iter()
        .zip(&hn.velocities)
        .fold(czero(), |acc, (&e, &v)| acc + v * fermi(e * beta))
}

/// Number of rings of length `l` with `n` negative bonds and `k` domain walls.
///
/// For `0 < n < l` and `k = 2j > 0`: `N = (l/j) C(n-1, j-1) C(l-n-1, j-1)`.
pub fn ring_multiplicity(l: usize, n: usize, k: usize) -> BigUint {
    if n > l || k % 2 == 1 {
        return BigUint::zero();
    }
    if n == 0 || n == l {
        return if k == 0 { BigUint::one() } else { BigUint::zero() };
    }
    if k == 0 {
        return BigUint::zero();
    }
    let j = k / 2;
    if j > n || j > l - n {
        return BigUint::zero();
    }
    let num = BigUint::from(l) * binomial(n - 1, j - 1) * binomial(l - n - 1, j - 1);
    num / BigUint::from(j)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= BigUint::from(n - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// Natural log of a big integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigUint = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ln_ring_multiplicity(l: usize, n: usize, k: usize) -> f64 {
    ln_biguint(&ring_multiplicity(l, n, k))
}

/// Fermionic class functions of `n_-` at fixed parameters.
#[derive(Clone, Debug)]
pub struct ClassTable<T> {
    pub log_weight: Vec<T>,
    pub energy: Vec<T>,
    pub denergy_dbeta: Vec<T>,
    pub gs_energy: Vec<T>,
    pub velocity: Vec<Complex<T>>,
}

impl<T: Real> ClassTable<T> {
    pub fn build(params: &ModelParams<T>) -> Result<Self> {
        check_reducible(params)?;
        let l = params.l;
        let beta = params.beta;
        let rows: Vec<Result<(T, T, T, T, Complex<T>)>> = (0..=l)
            .into_par_iter()
            .map(|n| {
                let hn = hn_spectrum(l, n, params)?;
                Ok((
                    log_weight(&hn.spectrum, beta)?,
                    fermion_energy(&hn.spectrum, beta)?,
                    denergy_dbeta(&hn.spectrum, beta)?,
                    ground_state_energy(&hn.spectrum).energy,
                    reduced_velocity(&hn, beta),
                ))
            })
            .collect();
        let mut table = ClassTable {
            log_weight: Vec::with_capacity(l + 1),
            energy: Vec::with_capacity(l + 1),
            denergy_dbeta: Vec::with_capacity(l + 1),
            gs_energy: Vec::with_capacity(l + 1),
            velocity: Vec::with_capacity(l + 1),
        };
        let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        // Classes n and L - n are related by X -> -X; mirror the even
        // functions so the symmetry is exact.
        for n in l / 2 + 1..=l {
            let (lw, e, de, gs, _) = rows[l - n];
            rows[n] = (lw, e, de, gs, rows[n].4);
        }
        for (lw, e, de, gs, v) in rows {
            table.log_weight.push(lw);
            table.energy.push(e);
            table.denergy_dbeta.push(de);
            table.gs_energy.push(gs);
            table.velocity.push(v);
        }
        Ok(table)
    }
}

/// Thermal averages over the bond field.
///
/// `specific_heat` is per site; `mean_energy` is the total `⟨E_J + E_f⟩`.
/// The winding sector of a configuration is `sign(m)` when `|Σ X_i| ≥ 2`,
/// else `sign(Im⟨v̂⟩)`, else `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Observables<T> {
    pub log_z: T,
    pub mean_abs_m: T,
    pub mean_m2: T,
    pub mean_m_sector: T,
    pub mean_energy: T,
    pub specific_heat: T,
    pub mean_w_sector: T,
    pub mean_w: T,
}

/// Sector label used by the exact sums and by Monte Carlo measurement.
pub fn sector_of<T: Real>(m: T, im_v: T, l: usize) -> i8 {
    // |Σ X_i| ≥ 2, with the cut halfway between integers so rounding in m
    // cannot move a configuration across it.
    let thresh = cst::<T>(1.5) / from_usize::<T>(l);
    if m.abs() > thresh {
        if m > T::zero() { 1 } else { -1 }
    } else if im_v != T::zero() {
        if im_v > T::zero() { 1 } else { -1 }
    } else {
        1
    }
}

/// Per-state contributions gathered before the weighted reduction.
struct Term<T> {
    log_w: T,
    abs_m: T,
    m2: T,
    m_sector: T,
    energy: T,
    de: T,
    w_sector: T,
    w: T,
}

fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn reduce<T: Real>(terms: &[Term<T>], beta: T, l: usize) -> Observables<T> {
    let logs: Vec<T> = terms.iter().map(|t| t.log_w).collect();
    let log_z = log_sum_exp(&logs);
    let p: Vec<T> = logs.iter().map(|&x| (x - log_z).exp()).collect();
    let avg = |f: &dyn Fn(&Term<T>) -> T| {
        let v: Vec<T> = terms.iter().zip(&p).map(|(t, &w)| w * f(t)).collect();
        pairwise_sum(&v)
    };
    let mean_e = avg(&|t| t.energy);
    let var_e = avg(&|t| (t.energy - mean_e) * (t.energy - mean_e));
    let mean_de = avg(&|t| t.de);
    Observables {
        log_z,
        mean_abs_m: avg(&|t| t.abs_m),
        mean_m2: avg(&|t| t.m2),
        mean_m_sector: avg(&|t| t.m_sector),
        mean_energy: mean_e,
        specific_heat: beta * beta * (var_e - mean_de) / from_usize::<T>(l),
        mean_w_sector: avg(&|t| t.w_sector),
        mean_w: avg(&|t| t.w),
    }
}

/// Exact observables by class summation over `(n_-, walls)` at `t' = 0`, PBC.
pub fn exact_observables<T: Real>(params: &ModelParams<T>) -> Result<Observables<T>> {
    params.validate()?;
    let table = ClassTable::build(params)?;
    Ok(exact_from_table(params, &table))
}

pub fn exact_from_table<T: Real>(params: &ModelParams<T>, table: &ClassTable<T>) -> Observables<T> {
    let l = params.l;
    let beta = params.beta;
    let lt = from_usize::<T>(l);
    let mut terms = Vec::new();
    for n in 0..=l {
        let m = from_usize::<T>(l) / lt - cst::<T>(2.0) * from_usize::<T>(n) / lt;
        let v = table.velocity[n];
        let w = v.im * beta / lt;
        let s = T::from_i8(sector_of(m, v.im, l)).unwrap();
        let max_k = 2 * n.min(l - n);
        for k in (0..=max_k).step_by(2) {
            let ln_n = ln_ring_multiplicity(l, n, k);
            if !ln_n.is_finite() {
                continue;
            }
            let e_j = -params.j * (lt - cst::<T>(2.0) * from_usize::<T>(k));
            terms.push(Term {
                log_w: cst::<T>(ln_n) - beta * e_j + table.log_weight[n],
                abs_m: m.abs(),
                m2: m * m,
                m_sector: s * m,
                energy: e_j + table.energy[n],
                de: table.denergy_dbeta[n],
                w_sector: s * w,
                w,
            });
        }
    }
    reduce(&terms, beta, l)
}

/// `P(n_-)` for `n_- = 0..=L` under the full weight, from the class table.
pub fn n_minus_distribution<T: Real>(params: &ModelParams<T>, table: &ClassTable<T>) -> Vec<T> {
    let l = params.l;
    let beta = params.beta;
    let lt = from_usize::<T>(l);
    let logs: Vec<T> = (0..=l)
        .map(|n| {
            let max_k = 2 * n.min(l - n);
            let per_k: Vec<T> = (0..=max_k)
                .step_by(2)
                .map(|k| cst::<T>(ln_ring_multiplicity(l, n, k)) + beta * params.j * (lt - cst::<T>(2.0) * from_usize::<T>(k)))
                .collect();
            log_sum_exp(&per_k) + table.log_weight[n]
        })
        .collect();
    let log_z = log_sum_exp(&logs);
    logs.iter().map(|&x| (x - log_z).exp()).collect()
}

/// Exact observables on a grid of inverse temperatures.
pub fn exact_scan<T: Real>(params: &ModelParams<T>, betas: &[T]) -> Result<Vec<Observables<T>>> {
    betas
        .par_iter()
        .map(|&b| exact_observables(&params.clone().with_beta(b)))
        .collect()
}

/// Reference enumeration over all `2^L` configurations with a dense
/// eigensolve each; any `t'`, any boundary.
pub fn brute_force<T: Real>(params: &ModelParams<T>) -> Result<Observables<T>> {
    params.validate()?;
    let l = params.l;
    if l > BRUTE_FORCE_MAX_L {
        return Err(Error::TooLarge(l));
    }
    let beta = params.beta;
    let terms: Vec<Result<Term<T>>> = (0..(1u64 << l))
        .into_par_iter()
        .map(|bits| {
            let c = SpinConfig::from_bits(l, bits);
            let h = build_hopping(params, &c)?;
            let spec = eigenvalues(&h)?;
            let vel = velocity_expectation_dense(&h, beta)?;
            let e_j = ising_energy(&c, params);
            let m: T = c.magnetization();
            let s = T::from_i8(sector_of(m, vel.velocity.im, l)).unwrap();
            Ok(Term {
                log_w: -beta * e_j + log_weight(&spec, beta)?,
                abs_m: m.abs(),
                m2: m * m,
                m_sector: s * m,
                energy: e_j + fermion_energy(&spec, beta)?,
                de: denergy_dbeta(&spec, beta)?,
                w_sector: s * vel.winding,
                w: vel.winding,
            })
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(reduce(&terms, beta, l))
}

/// `ln Σ_X e^{-β E_J} W_f(X)` by class sums and by enumeration, for the
/// class-sum completeness check.
pub fn log_z_both_ways<T: Real>(params: &ModelParams<T>) -> Result<(T, T)> {
    let exact = exact_observables(params)?.log_z;
    let l = params.l;
    if l > BRUTE_FORCE_MAX_L {
        return Err(Error::TooLarge(l));
    }
    let logs: Vec<Result<T>> = (0..(1u64 << l))
        .into_par_iter()
        .map(|bits| {
            let c = SpinConfig::from_bits(l, bits);
            let spec = eigenvalues(&build_hopping(params, &c)?)?;
            Ok(-params.beta * ising_energy(&c, params) + log_weight(&spec, params.beta)?)
        })
        .collect();
    let logs = logs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((exact, log_sum_exp(&logs)))
}

/// `⟨|m|⟩` of `L` independent coin flips: `Σ_n C(L,n) |L-2n| / (L 2^L)`.
pub fn coin_flip_abs_m(l: usize) -> f64 {
    static CACHE: OnceLock<std::sync::Mutex<std::collections::HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&l) {
        return *v;
    }
    let ln2l = l as f64 * std::f64::consts::LN_2;
    let v = (0..=l)
        .map(|n| {
            let d = (l as i64 - 2 * n as i64).unsigned_abs() as f64 / l as f64;
            d * (ln_biguint(&binomial(l, n)) - ln2l).exp()
        })
        .sum();
    cache.lock().unwrap().insert(l, v);
    v
}

/// Used by the flux flag in reports.
pub fn flux_report<T: Real>(hn: &HnReducedSpectrum<T>) -> String {
    format!(
        "n_minus={} |A|={:.6} flux={:.6}{}",
        hn.n_minus,
        to_f64(hn.amp),
        to_f64(hn.flux),
        if hn.flux_shifted { " (shifted momenta)" } else { "" }
    )
}
