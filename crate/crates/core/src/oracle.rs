//! Independent reference computations.
//!
//! Nothing here shares code with the production eigensolver paths: the
//! fermionic oracles use `nalgebra` matrix exponentials in the many-body
//! Fock space, and the Ising oracles are closed-form transfer-matrix
//! results. All oracles are `f64` only.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Boundary, HoppingMatrix};

/// Largest `L` for Fock-space enumeration (`2^L` states).
pub const FOCK_MAX_L: usize = 10;

pub fn to_nalgebra(h: &HoppingMatrix<f64>) -> DMatrix<Complex64> {
    let n = h.dim();
    DMatrix::from_fn(n, n, |a, b| h.get(a, b))
}

/// `ln det(I + e^{-βh})` with the matrix exponential taken directly.
///
/// Returns `(ln |det|, arg det)`; the argument vanishes for a real `h`.
pub fn log_det_one_plus_exp(h: &HoppingMatrix<f64>, beta: f64) -> (f64, f64) {
    let m = to_nalgebra(h);
    let n = m.nrows();
    let e = (m * Complex64::new(-beta, 0.0)).exp();
    let d = (DMatrix::<Complex64>::identity(n, n) + e).determinant();
    (d.norm().ln(), d.arg())
}

/// Second-quantized `Σ_ab h_ab c†_a c_b` on the full Fock space,
/// basis states labelled by occupation bit masks.
pub fn fock_hamiltonian(h: &HoppingMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let l = h.dim();
    if l > FOCK_MAX_L {
        return Err(Error::TooLarge(l));
    }
    let dim = 1usize << l;
    let mut big = DMatrix::<Complex64>::zeros(dim, dim);
    for s in 0..dim {
        for b in 0..l {
            if s >> b & 1 == 0 {
                continue;
            }
            for a in 0..l {
                let amp = h.get(a, b);
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((t, sign)) = hop(s, a, b) {
                    big[(t, s)] += amp * sign;
                }
            }
        }
    }
    Ok(big)
}

/// `c†_a c_b |s⟩ = sign |t⟩` with Jordan–Wigner ordering by site index.
fn hop(s: usize, a: usize, b: usize) -> Option<(usize, f64)> {
    if s >> b & 1 == 0 {
        return None;
    }
    if a == b {
        return Some((s, 1.0));
    }
    if s >> a & 1 == 1 {
        return None;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let between = (s >> (lo + 1)) & ((1usize << (hi - lo - 1)) - 1);
    let sign = if between.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some((s ^ (1 << b) ^ (1 << a), sign))
}

/// Grand-canonical thermal data from the Fock space.
#[derive(Clone, Debug)]
pub struct ManyBody {
    /// `ln Tr e^{-βĤ}` (real part; the imaginary part is returned separately).
    pub log_z: f64,
    pub log_z_arg: f64,
    /// `⟨Ĥ⟩`.
    pub energy: f64,
    /// `d⟨Ĥ⟩/dβ = -(⟨Ĥ²⟩ - ⟨Ĥ⟩²)`.
    pub denergy_dbeta: f64,
    /// `⟨c†_a c_b⟩` indexed `[a][b]`.
    pub correlator: Vec<Vec<Complex64>>,
}

pub fn many_body(h: &HoppingMatrix<f64>, beta: f64) -> Result<ManyBody> {
    let l = h.dim();
    let big = fock_hamiltonian(h)?;
    let rho = (&big * Complex64::new(-beta, 0.0)).exp();
    let z = rho.trace();
    let hr = &big * &rho;
    let e = hr.trace() / z;
    let e2 = (&big * &hr).trace() / z;
    let dim = 1usize << l;
    let mut correlator = vec![vec![Complex64::new(0.0, 0.0); l]; l];
    for (a, row) in correlator.iter_mut().enumerate() {
        for (b, out) in row.iter_mut().enumerate() {
            // Tr(c†_a c_b ρ) = Σ_s ⟨s|c†_a c_b ρ|s⟩ = Σ_{s,u} ⟨s|c†_a c_b|u⟩ ρ_{u s}
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..dim {
                if let Some((s, sign)) = hop(u, a, b) {
                    acc += rho[(u, s)] * sign;
                }
            }
            *out = acc / z;
        }
    }
    Ok(ManyBody {
        log_z: z.norm().ln(),
        log_z_arg: z.arg(),
        energy: e.re,
        denergy_dbeta: -(e2 - e * e).re,
        correlator,
    })
}

/// Transfer-matrix results for the classical chain `E = -J Σ X_i X_{i+1}`.
#[derive(Clone, Copy, Debug)]
pub struct IsingChain {
    pub l: usize,
    pub beta: f64,
    pub j: f64,
    pub bc: Boundary,
}

impl IsingChain {
    pub fn new(l: usize, beta: f64, j: f64, bc: Boundary) -> Self {
        Self { l, beta, j, bc }
    }

    fn r(&self) -> f64 {
        (self.beta * self.j).tanh()
    }

    /// `ln Z`, with `Z = λ₊^L + λ₋^L` (ring) or `2 λ₊^{L-1}` (open).
    pub fn log_z(&self) -> f64 {
        let lp = (2.0 * (self.beta * self.j).cosh()).ln();
        let lf = self.l as f64;
        match self.bc {
            Boundary::Pbc => lf * lp + (1.0 + self.r().powi(self.l as i32)).ln(),
            Boundary::Obc => 2f64.ln() + (lf - 1.0) * lp,
        }
    }

    /// Total `⟨E⟩`.
    pub fn energy(&self) -> f64 {
        let (l, j, r) = (self.l as i32, self.j, self.r());
        match self.bc {
            Boundary::Pbc => -(l as f64) * j * (r + r.powi(l - 1)) / (1.0 + r.powi(l)),
            Boundary::Obc => -((l - 1) as f64) * j * r,
        }
    }

    /// Per-site `β² Var(E) / L`.
    pub fn specific_heat(&self) -> f64 {
        let (l, j, r, b) = (self.l as i32, self.j, self.r(), self.beta);
        let lf = l as f64;
        let var = match self.bc {
            Boundary::Pbc => {
                // Z, Z', Z'' divided by λ₊^L
                let z = 1.0 + r.powi(l);
                let z1 = lf * j * (r + r.powi(l - 1));
                let z2 = lf * j * j * ((lf - 1.0) * r * r + 1.0 + (lf - 1.0) * r.powi(l - 2) + r.powi(l));
                z2 / z - (z1 / z) * (z1 / z)
            }
            Boundary::Obc => (lf - 1.0) * j * j * (1.0 - r * r),
        };
        b * b * var / lf
    }

    /// `⟨X_0 X_r⟩`.
    pub fn correlation(&self, r: usize) -> f64 {
        let t = self.r();
        match self.bc {
            Boundary::Pbc => {
                let l = self.l as i32;
                let r = r as i32;
                (t.powi(r) + t.powi(l - r)) / (1.0 + t.powi(l))
            }
            Boundary::Obc => t.powi(r as i32),
        }
    }

    /// `P(n_-)` for `n_- = 0..=L`, by a transfer matrix carrying the
    /// running count of negative spins.
    pub fn n_minus_distribution(&self) -> Vec<f64> {
        let l = self.l;
        // bond factor relative to the aligned value: 1 aligned, e^{-2βJ} anti
        let anti = (-2.0 * self.beta * self.j).exp();
        let w = |a: usize, b: usize| if a == b { 1.0 } else { anti };
        let mut total = vec![0.0; l + 1];
        let firsts: &[usize] = &[0, 1];
        for &s0 in firsts {
            // dp[s][n]: weight of prefixes ending in spin s (0:+, 1:-) with n negatives
            let mut dp = vec![vec![0.0; l + 1]; 2];
            dp[s0][s0] = 1.0;
            for _ in 1..l {
                let mut next = vec![vec![0.0; l + 1]; 2];
                for s in 0..2 {
                    for n in 0..=l {
                        let v = dp[s][n];
                        if v == 0.0 {
                            continue;
                        }
                        next[0][n] += v * w(s, 0);
                        if n < l {
                            next[1][n + 1] += v * w(s, 1);
                        }
                    }
                }
                dp = next;
            }
            for s in 0..2 {
                let close = match self.bc {
                    Boundary::Pbc => w(s, s0),
                    Boundary::Obc => 1.0,
                };
                for n in 0..=l {
                    total[n] += dp[s][n] * close;
                }
            }
        }
        let norm: f64 = total.iter().sum();
        total.iter().map(|x| x / norm).collect()
    }

    pub fn mean_abs_m(&self) -> f64 {
        let l = self.l as f64;
        self.n_minus_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| p * (l - 2.0 * n as f64).abs() / l)
            .sum()
    }

    pub fn mean_m2(&self) -> f64 {
        let l = self.l as f64;
        self.n_minus_distribution()
            .iter()
            .enumerate()
            .map(|(n, p)| p * ((l - 2.0 * n as f64) / l).powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hopping, ising_energy, ModelParams, SpinConfig};

    fn enumerate(l: usize, beta: f64, j: f64, bc: Boundary) -> (f64, f64, f64, f64) {
        let p = ModelParams::<f64>::new(l, beta).with_j(j).with_bc(bc);
        let mut z = 0.0;
        let (mut e, mut e2, mut am) = (0.0, 0.0, 0.0);
        for bits in 0..(1u64 << l) {
            let c = SpinConfig::from_bits(l, bits);
            let en = ising_energy(&c, &p);
            let w = (-beta * en).exp();
            z += w;
            e += w * en;
            e2 += w * en * en;
            am += w * c.magnetization::<f64>().abs();
        }
        e /= z;
        (z.ln(), e, beta * beta * (e2 / z - e * e) / l as f64, am / z)
    }

    #[test]
    fn transfer_matrix_matches_enumeration() {
        for bc in [Boundary::Pbc, Boundary::Obc] {
            for (l, beta, j) in [(6, 0.7, 1.0), (9, 2.0, 0.3), (12, 1.5, -0.4)] {
                let tm = IsingChain::new(l, beta, j, bc);
                let (lz, e, c, am) = enumerate(l, beta, j, bc);
                assert!((tm.log_z() - lz).abs() < 1e-12, "{bc} {l}");
                assert!((tm.energy() - e).abs() < 1e-12);
                assert!((tm.specific_heat() - c).abs() < 1e-12);
                assert!((tm.mean_abs_m() - am).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hop_signs() {
        // c†_0 c_2 on |0,1,2 occupied except 0⟩ passes one fermion at site 1
        assert_eq!(hop(0b110, 0, 2), Some((0b011, -1.0)));
        assert_eq!(hop(0b100, 0, 2), Some((0b001, 1.0)));
        assert_eq!(hop(0b001, 0, 2), None);
        assert_eq!(hop(0b101, 0, 2), None);
    }

    #[test]
    fn fock_single_particle_sector_is_h() {
        let p = ModelParams::<f64>::new(4, 1.0).with_u(0.4).with_t_prime(0.2);
        let c = SpinConfig::new(vec![1, -1, 1, 1]).unwrap();
        let h = build_hopping(&p, &c).unwrap();
        let big = fock_hamiltonian(&h).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(big[(1 << a, 1 << b)], h.get(a, b));
            }
        }
    }

    #[test]
    fn free_fermion_log_z_matches_quadratic_trace() {
        let p = ModelParams::<f64>::new(5, 1.3).with_u(0.6);
        let c = SpinConfig::new(vec![1, -1, -1, 1, 1]).unwrap();
        let h = build_hopping(&p, &c).unwrap();
        let mb = many_body(&h, 1.3).unwrap();
        let (ld, arg) = log_det_one_plus_exp(&h, 1.3);
        assert!((mb.log_z - ld).abs() < 1e-10);
        assert!(arg.abs() < 1e-10 && mb.log_z_arg.abs() < 1e-10);
    }
}
