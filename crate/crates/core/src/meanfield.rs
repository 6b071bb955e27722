//! Mean-field theory with `X_i` replaced by its thermal average `m`.
//!
//! Fermions see the uniform dispersion
//! `ε_k(m) = 2t cos k + 2t' cos 2k + 2iUm sin k` on the momentum grid
//! `k = 2πn/L`, and each bond feels the field
//! `g(m) = Re[(2iU/L) Σ_k f(ε_k) sin k] - 2Jm`, giving `m = -tanh(β g(m))`.
//!
//! Free-energy convention (per site), used only to rank coexisting solutions:
//! `F/L = F_f/L + J m² - (1/β) ln 2cosh(β h)` with `h = -g(m)` and
//! `F_f = -(1/β) Σ_k ln(1 + e^{-βε_k(m)})`. The `+J m²` term removes the
//! double counting of the Ising coupling in the product ansatz.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::{complex_softplus, cst, fermi, from_usize, Real};

pub const DAMPING: f64 = 0.5;
pub const TOL: f64 = 1e-10;
pub const MAX_ITER: usize = 10_000;
pub const DEDUP_TOL: f64 = 1e-6;
pub const RESIDUE_TOL: f64 = 1e-10;
/// `|m|` above which a selected solution counts as ordered.
pub const ORDER_THRESHOLD: f64 = 1e-4;
/// Grid intervals on `[0, 1]` for the residual sign-change scan.
pub const SCAN_POINTS: usize = 400;
pub const DEFAULT_SEEDS: &[f64] = &[0.0, 0.02, 0.1, 0.3, 0.6, 0.9, 0.999];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MFState<T> {
    pub m: T,
    /// Fermionic part of the field, without `-2Jm`.
    pub g_current: T,
    /// Variational free energy per site.
    pub free_energy: T,
    pub converged: bool,
    pub iterations: usize,
    /// `|m + tanh(β g(m))|`.
    pub residual: T,
}

pub fn mf_dispersion<T: Real>(k: T, m: T, params: &ModelParams<T>) -> Complex<T> {
    let two = cst::<T>(2.0);
    let band = two * params.t * k.cos() + two * params.t_prime * (two * k).cos();
    let i = Complex::new(T::zero(), T::one());
    Complex::new(band, T::zero()) + i * params.u() * (two * m * k.sin())
}

/// `ε_{k}` and `ε_{-k}` with `m → -m` mapping one onto the other bit for bit.
fn pair<T: Real>(k: T, m: T, params: &ModelParams<T>) -> (Complex<T>, Complex<T>) {
    let two = cst::<T>(2.0);
    let band = two * params.t * k.cos() + two * params.t_prime * (two * k).cos();
    let s = two * m * k.sin();
    // 2iU m sin k = -2 U_im m sin k + i 2 U_re m sin k
    let c = params.u_im * s;
    let d = params.u_re * s;
    (Complex::new(band - c, d), Complex::new(band + c, -d))
}

fn momenta<T: Real>(l: usize) -> impl Iterator<Item = (usize, T)> {
    let two_pi = T::PI() + T::PI();
    (0..l).map(move |n| (n, two_pi * from_usize::<T>(n) / from_usize::<T>(l)))
}

/// Fermionic field `Re[(2iU/L) Σ_k f(ε_k) sin k]`.
pub fn fermion_field<T: Real>(m: T, params: &ModelParams<T>) -> Result<T> {
    let l = params.l;
    let beta = params.beta;
    let mut s = Complex::new(T::zero(), T::zero());
    // pairs (n, L-n) with 0 < n < L/2; n = 0 and n = L/2 carry sin k = 0
    for (n, k) in momenta::<T>(l) {
        if n == 0 || 2 * n >= l {
            continue;
        }
        let (ep, em) = pair(k, m, params);
        s = s + (fermi(ep * beta) - fermi(em * beta)) * k.sin();
    }
    let i = Complex::new(T::zero(), T::one());
    let g = i * params.u() * s * (cst::<T>(2.0) / from_usize::<T>(l));
    let scale = g.re.abs().max(T::one());
    if g.im.abs() > cst::<T>(RESIDUE_TOL) * scale {
        return Err(Error::ImaginaryResidue { residue: crate::scalar::to_f64(g.im), tol: RESIDUE_TOL });
    }
    Ok(g.re)
}

/// `g(m)`, the effective field on each bond.
pub fn mf_field<T: Real>(m: T, params: &ModelParams<T>) -> Result<T> {
    Ok(fermion_field(m, params)? - cst::<T>(2.0) * params.j * m)
}

/// `F_f / L = -(1/(βL)) Σ_k ln(1 + e^{-βε_k})`, paired so the sum is real.
pub fn fermion_free_energy<T: Real>(m: T, params: &ModelParams<T>) -> T {
    let l = params.l;
    let beta = params.beta;
    let mut acc = T::zero();
    for (n, k) in momenta::<T>(l) {
        let (ep, em) = pair(k, m, params);
        if n == 0 || 2 * n == l {
            acc = acc + complex_softplus(ep * beta).re;
        } else if 2 * n < l {
            acc = acc + (complex_softplus(ep * beta) + complex_softplus(em * beta)).re;
        }
    }
    -acc / (beta * from_usize::<T>(l))
}

/// `ln 2cosh(x)` without overflow.
fn ln_2cosh<T: Real>(x: T) -> T {
    let a = x.abs();
    a + (-(a + a)).exp().ln_1p()
}

pub fn free_energy<T: Real>(m: T, params: &ModelParams<T>) -> Result<T> {
    let h = -mf_field(m, params)?;
    let beta = params.beta;
    Ok(fermion_free_energy(m, params) + params.j * m * m - ln_2cosh(beta * h) / beta)
}

fn iterate<T: Real>(seed: T, params: &ModelParams<T>) -> Result<MFState<T>> {
    let lam = cst::<T>(DAMPING);
    let beta = params.beta;
    let mut m = seed.max(-T::one()).min(T::one());
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        let target = -(beta * mf_field(m, params)?).tanh();
        let next = (T::one() - lam) * m + lam * target;
        iterations = it;
        let done = (next - m).abs() < cst::<T>(TOL);
        m = next;
        if done {
            converged = true;
            break;
        }
    }
    let mut s = state_at(m, params, iterations)?;
    s.converged = converged && s.converged;
    Ok(s)
}

/// `R(m) = m + tanh(β g(m))`, odd in `m` bit for bit.
pub fn residual<T: Real>(m: T, params: &ModelParams<T>) -> Result<T> {
    Ok(m + (params.beta * mf_field(m, params)?).tanh())
}

fn state_at<T: Real>(m: T, params: &ModelParams<T>, iterations: usize) -> Result<MFState<T>> {
    let r = residual(m, params)?.abs();
    Ok(MFState {
        m,
        g_current: fermion_field(m, params)?,
        free_energy: free_energy(m, params)?,
        converged: r < cst::<T>(1e-9),
        iterations,
        residual: r,
    })
}

/// Roots of `R` on `[0, 1]` by sign changes on a uniform grid, refined by
/// bisection to machine precision.
fn bracketed_roots<T: Real>(params: &ModelParams<T>) -> Result<Vec<MFState<T>>> {
    let grid: Vec<T> = (0..=SCAN_POINTS).map(|i| from_usize::<T>(i) / from_usize::<T>(SCAN_POINTS)).collect();
    let vals = grid.par_iter().map(|&m| residual(m, params)).collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in 1..grid.len() {
        let (mut a, mut b) = (grid[i - 1], grid[i]);
        let (mut ra, rb) = (vals[i - 1], vals[i]);
        if rb == T::zero() {
            roots.push(state_at(b, params, 0)?);
            continue;
        }
        if ra == T::zero() || (ra > T::zero()) == (rb > T::zero()) {
            continue;
        }
        let mut steps = 0;
        loop {
            let mid = (a + b) / cst::<T>(2.0);
            if mid <= a || mid >= b {
                break;
            }
            steps += 1;
            let rm = residual(mid, params)?;
            if rm == T::zero() {
                a = mid;
                b = mid;
                break;
            }
            if (rm > T::zero()) == (ra > T::zero()) {
                a = mid;
                ra = rm;
            } else {
                b = mid;
            }
        }
        let ra_abs = residual(a, params)?.abs();
        let rb_abs = residual(b, params)?.abs();
        let m = if ra_abs <= rb_abs { a } else { b };
        roots.push(state_at(m, params, steps)?);
    }
    Ok(roots)
}

/// Fixed points reached by damped iteration from `seeds` and their
/// negatives, together with every sign change of the residual found by a
/// grid scan; deduplicated, sorted by `m`. Non-converged iterations are
/// returned too (flagged).
pub fn solve_selfconsistent<T: Real>(params: &ModelParams<T>, seeds: &[T]) -> Result<Vec<MFState<T>>> {
    params.validate()?;
    let mut all: Vec<T> = Vec::new();
    for &s in seeds {
        all.push(s);
        all.push(-s);
    }
    let mut runs = all
        .par_iter()
        .map(|&s| iterate(s, params))
        .collect::<Result<Vec<_>>>()?;
    // a converged fixed point is kept; its mirror is the run from the mirrored seed
    for r in bracketed_roots(params)? {
        let mut neg = r;
        neg.m = -r.m;
        neg.g_current = -r.g_current;
        runs.push(r);
        runs.push(neg);
    }
    runs.sort_by_key(|r| !r.converged);
    let mut out: Vec<MFState<T>> = Vec::new();
    for r in runs {
        let dup = out.iter().any(|o| (o.m - r.m).abs() < cst::<T>(DEDUP_TOL) && (o.converged || !r.converged));
        if !dup {
            out.push(r);
        }
    }
    out.sort_by(|a, b| a.m.partial_cmp(&b.m).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

pub fn default_seeds<T: Real>() -> Vec<T> {
    DEFAULT_SEEDS.iter().map(|&s| cst::<T>(s)).collect()
}

/// Lowest free energy among converged solutions; `m ≥ 0` on ties.
pub fn select<T: Real>(solutions: &[MFState<T>]) -> Option<MFState<T>> {
    let tie = cst::<T>(1e-12);
    solutions.iter().filter(|s| s.converged).copied().fold(None, |best, s| match best {
        None => Some(s),
        Some(b) if s.free_energy < b.free_energy - tie => Some(s),
        Some(b) if (s.free_energy - b.free_energy).abs() <= tie && s.m > b.m => Some(s),
        other => other,
    })
}

/// Selected solution at one `(U, T)` point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MFPoint<T> {
    pub u: T,
    pub temperature: T,
    pub m_selected: T,
    pub free_energy: T,
    pub n_solutions: usize,
}

pub fn solve_point<T: Real>(base: &ModelParams<T>, u: T, temperature: T) -> Result<MFPoint<T>> {
    let p = base.clone().with_u(u).with_beta(T::one() / temperature);
    let sols = solve_selfconsistent(&p, &default_seeds())?;
    let sel = select(&sols);
    Ok(MFPoint {
        u,
        temperature,
        m_selected: sel.map_or(T::nan(), |s| s.m),
        free_energy: sel.map_or(T::nan(), |s| s.free_energy),
        n_solutions: sols.iter().filter(|s| s.converged).count(),
    })
}

fn ordered<T: Real>(base: &ModelParams<T>, u: T, temperature: T) -> Result<bool> {
    let p = solve_point(base, u, temperature)?;
    Ok(p.m_selected.abs() > cst::<T>(ORDER_THRESHOLD))
}

/// Mean-field transition temperature for one `U`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryPoint<T> {
    pub u: T,
    /// `None` when no scanned temperature is ordered.
    pub t_c: Option<T>,
    /// Ordered at the highest scanned temperature as well.
    pub saturated: bool,
}

/// For each `U`, scans `temps` (ascending) for the highest ordered point and
/// bisects the order/disorder bracket above it down to `ΔT < 1e-3`.
pub fn trace_boundary<T: Real>(base: &ModelParams<T>, us: &[T], temps: &[T]) -> Result<Vec<BoundaryPoint<T>>> {
    let dt = cst::<T>(1e-3);
    us.par_iter()
        .map(|&u| {
            let flags = temps.iter().map(|&t| ordered(base, u, t)).collect::<Result<Vec<_>>>()?;
            let Some(top) = flags.iter().rposition(|&f| f) else {
                return Ok(BoundaryPoint { u, t_c: None, saturated: false });
            };
            if top + 1 == temps.len() {
                return Ok(BoundaryPoint { u, t_c: Some(temps[top]), saturated: true });
            }
            let (mut lo, mut hi) = (temps[top], temps[top + 1]);
            while hi - lo >= dt {
                let mid = (lo + hi) / cst::<T>(2.0);
                if ordered(base, u, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(BoundaryPoint { u, t_c: Some((lo + hi) / cst::<T>(2.0)), saturated: false })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: usize, beta: f64, u: f64, j: f64) -> ModelParams<f64> {
        ModelParams::<f64>::new(l, beta).with_u(u).with_j(j)
    }

    #[test]
    fn dispersion_examples() {
        let q = p(64, 1.0, 0.4, 0.0).with_t_prime(0.3);
        assert!((mf_dispersion(0.0, 0.7, &q) - Complex::new(2.6, 0.0)).norm() < 1e-15);
        let e = mf_dispersion(1.1, 0.0, &q);
        assert!(e.im == 0.0 && (e.re - (2.0 * 1.1f64.cos() + 0.6 * 2.2f64.cos())).abs() < 1e-15);
        let q = p(64, 1.0, 0.4, 0.0);
        assert!((mf_dispersion(std::f64::consts::FRAC_PI_2, 1.0, &q) - Complex::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn field_vanishes_at_zero_and_is_odd() {
        for j in [0.0, 0.05] {
            let q = p(128, 8.0, 0.4, j);
            assert_eq!(mf_field(0.0, &q).unwrap(), 0.0);
            for m in [1e-3, 0.2, 0.7, 1.0] {
                assert_eq!(mf_field(-m, &q).unwrap(), -mf_field(m, &q).unwrap());
            }
        }
    }

    #[test]
    fn field_sign_at_small_m() {
        // the fermionic field opposes small order at every temperature
        for beta in [2.0, 10.0, 50.0] {
            let q = p(1024, beta, 0.4, 0.0);
            assert!(mf_field(0.01, &q).unwrap() > 0.0, "beta {beta}");
        }
    }

    #[test]
    fn field_is_free_energy_derivative() {
        let q = p(256, 12.0, 0.5, 0.0);
        let h = 1e-6;
        for m in [0.1, 0.5, 0.9] {
            let fd = (fermion_free_energy(m + h, &q) - fermion_free_energy(m - h, &q)) / (2.0 * h);
            assert!((fd - fermion_field(m, &q).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn trivial_cases_only_zero() {
        let sols = solve_selfconsistent(&p(256, 20.0, 0.0, 0.0), &default_seeds()).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].m.abs() < 1e-9);
        let sols = solve_selfconsistent(&p(256, 1e-3, 0.8, 0.05), &default_seeds()).unwrap();
        assert_eq!(sols.len(), 1);
    }

    #[test]
    fn ordered_branch_pairs_and_residuals() {
        for j in [0.0, 0.05] {
            let q = p(1024, 1.0 / 0.02, 0.4, j);
            let sols = solve_selfconsistent(&q, &default_seeds()).unwrap();
            let conv: Vec<_> = sols.iter().filter(|s| s.converged).collect();
            assert!(conv.iter().any(|s| s.m.abs() > 0.1), "J={j}: {sols:?}");
            for s in &conv {
                assert!(s.residual < 1e-9);
                let partner = conv.iter().find(|o| (o.m + s.m).abs() < 1e-6).expect("±m partner");
                assert!((partner.free_energy - s.free_energy).abs() < 1e-10);
            }
            let sel = select(&sols).unwrap();
            assert!(sel.m > 0.1);
        }
    }

    #[test]
    fn boundary_empty_without_coupling() {
        let base = p(256, 1.0, 0.0, 0.0);
        let b = trace_boundary(&base, &[0.0], &[0.05, 0.1, 0.2]).unwrap();
        assert_eq!(b[0].t_c, None);
    }
}
