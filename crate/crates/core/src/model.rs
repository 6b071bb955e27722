//! Model definition: couplings, bond-spin configurations and the
//! non-Hermitian single-particle hopping matrix they induce.
//!
//! Sites are labelled `0..L`; bond `i` joins sites `i` and `i + 1 (mod L)`
//! and carries the Ising variable `X_i = ±1`. A fermion hopping rightward
//! across bond `i` picks up `t + U X_i`, leftward `t - U X_i`. Next-nearest
//! hops carry `t'` in both directions.
//!
//! Under open boundaries the wrap bond `L - 1` is absent for the fermions,
//! but its spin stays in the configuration (and in the open Ising chain of
//! `L` spins), so the configuration space is the same for both boundaries.

use faer::Mat;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cre, czero, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    #[serde(rename = "PBC")]
    Pbc,
    #[serde(rename = "OBC")]
    Obc,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Pbc => "PBC",
            Boundary::Obc => "OBC",
        })
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PBC" => Ok(Boundary::Pbc),
            "OBC" => Ok(Boundary::Obc),
            other => Err(Error::InvalidParams(format!("unknown boundary `{other}`"))),
        }
    }
}

/// Couplings, system size, temperature and boundary condition.
///
/// Serialized as a flat JSON object with keys
/// `{t, t_prime, U_re, U_im, J, L, beta, bc}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelParams<T> {
    pub t: T,
    pub t_prime: T,
    #[serde(rename = "U_re")]
    pub u_re: T,
    #[serde(rename = "U_im")]
    pub u_im: T,
    #[serde(rename = "J")]
    pub j: T,
    #[serde(rename = "L")]
    pub l: usize,
    pub beta: T,
    pub bc: Boundary,
}

impl<T: Real> ModelParams<T> {
    /// `t = 1`, everything else zero, periodic boundary.
    pub fn new(l: usize, beta: T) -> Self {
        Self {
            t: T::one(),
            t_prime: T::zero(),
            u_re: T::zero(),
            u_im: T::zero(),
            j: T::zero(),
            l,
            beta,
            bc: Boundary::Pbc,
        }
    }

    pub fn with_u(mut self, u: T) -> Self {
        self.u_re = u;
        self.u_im = T::zero();
        self
    }

    /// Purely imaginary coupling `U = i u` (the Hermitian control).
    pub fn with_imaginary_u(mut self, u: T) -> Self {
        self.u_re = T::zero();
        self.u_im = u;
        self
    }

    pub fn with_j(mut self, j: T) -> Self {
        self.j = j;
        self
    }

    pub fn with_t_prime(mut self, tp: T) -> Self {
        self.t_prime = tp;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_bc(mut self, bc: Boundary) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_l(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 3 {
            return Err(Error::InvalidParams(format!("L = {} < 3", self.l)));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::InvalidParams(format!("beta = {} must be positive", self.beta)));
        }
        for (name, v) in [
            ("t", self.t),
            ("t_prime", self.t_prime),
            ("U_re", self.u_re),
            ("U_im", self.u_im),
            ("J", self.j),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
            }
        }
        if self.u_im != T::zero() && self.u_re != T::zero() {
            return Err(Error::InvalidParams(
                "U must be purely real or purely imaginary".into(),
            ));
        }
        Ok(())
    }

    /// The coupling `U = U_re + i U_im`.
    pub fn u(&self) -> Complex<T> {
        Complex::new(self.u_re, self.u_im)
    }

    /// True when every hopping amplitude is real.
    pub fn is_real(&self) -> bool {
        self.u_im == T::zero()
    }

    /// `t' = 0`: the configuration enters the spectrum only through a
    /// diagonal gauge transform plus (under PBC) the number of `-1` bonds.
    pub fn gauge_reducible(&self) -> bool {
        self.t_prime == T::zero()
    }
}

/// Ring of bond variables `X_i ∈ {+1, -1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    x: Vec<i8>,
}

impl SpinConfig {
    pub fn new(x: Vec<i8>) -> Result<Self> {
        if let Some(bad) = x.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidConfig(format!("bond value {bad} is not ±1")));
        }
        if x.is_empty() {
            return Err(Error::InvalidConfig("empty configuration".into()));
        }
        Ok(Self { x })
    }

    /// Configuration from the low `l` bits of `bits` (bit set → `-1`).
    pub fn from_bits(l: usize, bits: u64) -> Self {
        let x = (0..l).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect();
        Self { x }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.x
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.x[i]
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.x[i] = -self.x[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.flip(i);
        c
    }

    /// `X → -X`.
    pub fn negated(&self) -> Self {
        Self { x: self.x.iter().map(|&s| -s).collect() }
    }

    /// The lexicographically smaller of `X` and `-X`. Spectral functions
    /// invariant under negation are evaluated on this representative so the
    /// invariance holds bit for bit.
    pub fn canonical(&self) -> Self {
        let neg = self.negated();
        if neg.x < self.x { neg } else { self.clone() }
    }

    /// Cyclic shift by `k` bonds: `X'_{i+k} = X_i`.
    pub fn shifted(&self, k: usize) -> Self {
        let l = self.x.len();
        let mut x = vec![0; l];
        for (i, &s) in self.x.iter().enumerate() {
            x[(i + k) % l] = s;
        }
        Self { x }
    }

    pub fn n_minus(&self) -> usize {
        self.x.iter().filter(|&&s| s < 0).count()
    }

    /// Number of adjacent unequal pairs: `L` ring pairs under PBC, `L - 1`
    /// chain pairs under OBC.
    pub fn n_walls(&self, bc: Boundary) -> usize {
        let l = self.x.len();
        let pairs = match bc {
            Boundary::Pbc => l,
            Boundary::Obc => l - 1,
        };
        (0..pairs).filter(|&i| self.x[i] != self.x[(i + 1) % l]).count()
    }

    pub fn magnetization<T: Real>(&self) -> T {
        let s: i64 = self.x.iter().map(|&v| v as i64).sum();
        T::from_i64(s).unwrap() / T::from_usize(self.x.len()).unwrap()
    }
}

/// All-equal configuration.
pub fn uniform_config(l: usize, sign: i8) -> SpinConfig {
    let s = if sign < 0 { -1 } else { 1 };
    SpinConfig { x: vec![s; l] }
}

/// Two domain walls `r` bonds apart: `X_i = -1` for `i < r`, `+1` elsewhere.
pub fn make_domain_wall_pair(l: usize, r: usize) -> Result<SpinConfig> {
    if r == 0 || r >= l {
        return Err(Error::InvalidConfig(format!(
            "domain-wall separation r = {r} outside 1..={}",
            l.saturating_sub(1)
        )));
    }
    let x = (0..l).map(|i| if i < r { -1 } else { 1 }).collect();
    Ok(SpinConfig { x })
}

/// `E_J = -J Σ X_i X_{i+1}` over ring pairs (PBC) or chain pairs (OBC).
pub fn ising_energy<T: Real>(config: &SpinConfig, params: &ModelParams<T>) -> T {
    let l = config.len();
    let pairs = match params.bc {
        Boundary::Pbc => l,
        Boundary::Obc => l - 1,
    };
    let s: i64 = (0..pairs)
        .map(|i| (config.get(i) * config.get((i + 1) % l)) as i64)
        .sum();
    -params.j * T::from_i64(s).unwrap()
}

/// Change of `E_J` when bond `i` is flipped.
pub fn ising_flip_delta<T: Real>(config: &SpinConfig, i: usize, params: &ModelParams<T>) -> T {
    let l = config.len();
    let mut nb = 0i64;
    match params.bc {
        Boundary::Pbc => {
            nb += config.get((i + l - 1) % l) as i64;
            nb += config.get((i + 1) % l) as i64;
        }
        Boundary::Obc => {
            if i > 0 {
                nb += config.get(i - 1) as i64;
            }
            if i + 1 < l {
                nb += config.get(i + 1) as i64;
            }
        }
    }
    // -J x' nb - (-J x nb) with x' = -x
    params.j * T::from_i64(2 * config.get(i) as i64 * nb).unwrap()
}

/// One term `amp · c†_to c_from` of the single-particle Hamiltonian.
///
/// `disp` is the signed lattice displacement of the hop (`+1` rightward
/// nearest neighbour, `-2` leftward next-nearest, ...), which is what the
/// velocity operator and the winding count. `anchor` is the leftmost site
/// of the hop in ring order, used to attribute currents to bonds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hop<T> {
    pub to: usize,
    pub from: usize,
    pub amp: Complex<T>,
    pub disp: i8,
    pub anchor: usize,
}

/// Expands the Hamiltonian into its hopping terms.
pub fn hop_terms<T: Real>(params: &ModelParams<T>, config: &SpinConfig) -> Result<Vec<Hop<T>>> {
    let l = params.l;
    if config.len() != l {
        return Err(Error::DimensionMismatch { config: config.len(), l });
    }
    let t = cre(params.t);
    let u = params.u();
    let mut hops = Vec::with_capacity(4 * l);
    for i in 0..l {
        if params.bc == Boundary::Obc && i + 1 >= l {
            continue;
        }
        let j = (i + 1) % l;
        let xu = u * T::from_i8(config.get(i)).unwrap();
        hops.push(Hop { to: j, from: i, amp: t + xu, disp: 1, anchor: i });
        hops.push(Hop { to: i, from: j, amp: t - xu, disp: -1, anchor: i });
    }
    if params.t_prime != T::zero() {
        let tp = cre(params.t_prime);
        for i in 0..l {
            if params.bc == Boundary::Obc && i + 2 >= l {
                continue;
            }
            let j = (i + 2) % l;
            hops.push(Hop { to: j, from: i, amp: tp, disp: 2, anchor: i });
            hops.push(Hop { to: i, from: j, amp: tp, disp: -2, anchor: i });
        }
    }
    Ok(hops)
}

/// Dense single-particle matrix `h` with `Ĥ = Σ_ab h_ab c†_a c_b`.
#[derive(Clone, Debug)]
pub struct HoppingMatrix<T: Real> {
    pub entries: Mat<Complex<T>>,
    pub hops: Vec<Hop<T>>,
    pub params: ModelParams<T>,
    pub config: SpinConfig,
}

impl<T: Real> HoppingMatrix<T> {
    /// Matrix assembled from an explicit hop list (terms on the same entry add).
    pub fn from_hops(params: ModelParams<T>, config: SpinConfig, hops: Vec<Hop<T>>) -> Self {
        let l = params.l;
        let mut entries = Mat::<Complex<T>>::zeros(l, l);
        for h in &hops {
            entries[(h.to, h.from)] = entries[(h.to, h.from)] + h.amp;
        }
        Self { entries, hops, params, config }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex<T> {
        self.entries[(a, b)]
    }

    pub fn is_real(&self) -> bool {
        let n = self.dim();
        (0..n).all(|a| (0..n).all(|b| self.entries[(a, b)].im == T::zero()))
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|a| (0..n).all(|b| self.entries[(a, b)] == self.entries[(b, a)].conj()))
    }

    pub fn real_part(&self) -> Mat<T> {
        let n = self.dim();
        Mat::from_fn(n, n, |a, b| self.entries[(a, b)].re)
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim()).fold(czero(), |acc, a| acc + self.entries[(a, a)])
    }
}

pub fn build_hopping<T: Real>(
    params: &ModelParams<T>,
    config: &SpinConfig,
) -> Result<HoppingMatrix<T>> {
    let hops = hop_terms(params, config)?;
    Ok(HoppingMatrix::from_hops(params.clone(), config.clone(), hops))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(l: usize) -> ModelParams<f64> {
        ModelParams::<f64>::new(l, 1.0).with_u(0.4)
    }

    #[test]
    fn l4_uniform_circulant() {
        let h = build_hopping(&p(4), &uniform_config(4, 1)).unwrap();
        for i in 0..4 {
            assert_eq!(h.get((i + 1) % 4, i).re, 1.4);
            assert_eq!(h.get(i, (i + 1) % 4).re, 0.6);
        }
        assert_eq!(h.get(0, 3).re, 1.4);
        assert_eq!(h.get(3, 0).re, 0.6);
        assert_eq!(h.get(0, 2).re, 0.0);
        assert!(h.is_real());
    }

    #[test]
    fn u_zero_is_symmetric() {
        let params = ModelParams::<f64>::new(7, 1.0).with_t_prime(0.5);
        let c = SpinConfig::new(vec![1, -1, -1, 1, 1, -1, 1]).unwrap();
        let h = build_hopping(&params, &c).unwrap();
        assert!(h.is_hermitian());
        assert!(h.is_real());
    }

    #[test]
    fn imaginary_u_is_hermitian_and_complex() {
        let params = ModelParams::<f64>::new(6, 1.0).with_imaginary_u(0.4);
        let c = SpinConfig::new(vec![1, -1, -1, 1, 1, -1]).unwrap();
        let h = build_hopping(&params, &c).unwrap();
        assert!(h.is_hermitian());
        assert!(!h.is_real());
    }

    #[test]
    fn single_flip_changes_two_entries() {
        let params = p(6).with_t_prime(0.3);
        let c = SpinConfig::new(vec![1, 1, -1, 1, -1, 1]).unwrap();
        let j = 2;
        let a = build_hopping(&params, &c).unwrap();
        let b = build_hopping(&params, &c.flipped(j)).unwrap();
        let xj = c.get(j) as f64;
        for r in 0..6 {
            for s in 0..6 {
                let d = b.get(r, s) - a.get(r, s);
                if (r, s) == (j + 1, j) {
                    assert!((d.re - (-2.0 * 0.4 * xj)).abs() < 1e-15);
                } else if (r, s) == (j, j + 1) {
                    assert!((d.re - 2.0 * 0.4 * xj).abs() < 1e-15);
                } else {
                    assert_eq!(d.norm(), 0.0, "({r},{s})");
                }
            }
        }
    }

    #[test]
    fn obc_drops_wrap_and_ignores_wrap_bond() {
        let params = p(5).with_bc(Boundary::Obc).with_t_prime(0.5);
        let c = SpinConfig::new(vec![1, -1, 1, 1, 1]).unwrap();
        let h = build_hopping(&params, &c).unwrap();
        assert_eq!(h.get(0, 4).norm(), 0.0);
        assert_eq!(h.get(4, 0).norm(), 0.0);
        assert_eq!(h.get(0, 3).norm(), 0.0);
        assert_eq!(h.get(4, 1).norm(), 0.0);
        let h2 = build_hopping(&params, &c.flipped(4)).unwrap();
        assert_eq!(h.entries, h2.entries);
    }

    #[test]
    fn dimension_mismatch() {
        let err = build_hopping(&p(5), &uniform_config(4, 1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { config: 4, l: 5 }));
    }

    #[test]
    fn ising_examples() {
        let params = ModelParams::<f64>::new(8, 1.0).with_j(0.05);
        assert!((ising_energy(&uniform_config(8, 1), &params) + 0.4).abs() < 1e-15);
        let params = ModelParams::<f64>::new(10, 1.0).with_j(0.05);
        let c = make_domain_wall_pair(10, 4).unwrap();
        assert_eq!(c.n_walls(Boundary::Pbc), 2);
        assert!((ising_energy(&c, &params) + 0.3).abs() < 1e-15);
        let params = ModelParams::<f64>::new(10, 1.0);
        assert_eq!(ising_energy(&c, &params), 0.0);
    }

    #[test]
    fn domain_wall_pair_bounds() {
        let c = make_domain_wall_pair(10, 3).unwrap();
        assert_eq!((c.n_minus(), c.n_walls(Boundary::Pbc)), (3, 2));
        let c = make_domain_wall_pair(10, 5).unwrap();
        assert_eq!((c.n_minus(), c.n_walls(Boundary::Pbc)), (5, 2));
        assert!(make_domain_wall_pair(10, 10).is_err());
        assert!(make_domain_wall_pair(10, 0).is_err());
    }

    #[test]
    fn uniform_examples() {
        let c = uniform_config(70, 1);
        assert_eq!(c.n_minus(), 0);
        let c = uniform_config(4, -1);
        assert_eq!((c.n_minus(), c.n_walls(Boundary::Pbc)), (4, 0));
        assert_eq!(uniform_config(9, 1).negated(), uniform_config(9, -1));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::<f64>::new(2, 1.0).validate().is_err());
        assert!(ModelParams::<f64>::new(5, 0.0).validate().is_err());
        let mut q = ModelParams::<f64>::new(5, 1.0).with_u(0.4);
        q.u_im = 0.1;
        assert!(q.validate().is_err());
        assert!(ModelParams::<f64>::new(5, 1.0).with_imaginary_u(0.4).validate().is_ok());
    }

    #[test]
    fn params_json_keys() {
        let q = p(70).with_j(0.05).with_beta(12.5);
        let s = serde_json::to_string(&q).unwrap();
        for k in ["\"t\"", "\"t_prime\"", "\"U_re\"", "\"U_im\"", "\"J\"", "\"L\"", "\"beta\"", "\"bc\":\"PBC\""] {
            assert!(s.contains(k), "{s} lacks {k}");
        }
    }

    fn arb_config(l: usize) -> impl Strategy<Value = SpinConfig> {
        proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], l)
            .prop_map(|x| SpinConfig::new(x).unwrap())
    }

    proptest! {
        #[test]
        fn params_round_trip_bit_exact(
            t in -3.0f64..3.0, tp in -1.0f64..1.0, u in -2.0f64..2.0,
            j in -1.0f64..1.0, l in 3usize..500, beta in 1e-3f64..1e3, obc in any::<bool>(),
        ) {
            let q = ModelParams { t, t_prime: tp, u_re: u, u_im: 0.0, j, l, beta,
                bc: if obc { Boundary::Obc } else { Boundary::Pbc } };
            let back: ModelParams<f64> = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
            prop_assert_eq!(q.t.to_bits(), back.t.to_bits());
            prop_assert_eq!(q.t_prime.to_bits(), back.t_prime.to_bits());
            prop_assert_eq!(q.u_re.to_bits(), back.u_re.to_bits());
            prop_assert_eq!(q.j.to_bits(), back.j.to_bits());
            prop_assert_eq!(q.beta.to_bits(), back.beta.to_bits());
            prop_assert_eq!(q, back);
        }

        #[test]
        fn negation_transposes(c in arb_config(9), u in -1.5f64..1.5, tp in -1.0f64..1.0, obc in any::<bool>()) {
            let params = ModelParams::<f64>::new(9, 1.0).with_u(u).with_t_prime(tp)
                .with_bc(if obc { Boundary::Obc } else { Boundary::Pbc });
            let a = build_hopping(&params, &c).unwrap();
            let b = build_hopping(&params, &c.negated()).unwrap();
            for r in 0..9 { for s in 0..9 {
                prop_assert_eq!(a.get(r, s), b.get(s, r));
            }}
        }

        #[test]
        fn translation_conjugates_by_shift(c in arb_config(8), u in -1.0f64..1.0, tp in -1.0f64..1.0) {
            let params = ModelParams::<f64>::new(8, 1.0).with_u(u).with_t_prime(tp);
            let a = build_hopping(&params, &c).unwrap();
            let b = build_hopping(&params, &c.shifted(1)).unwrap();
            for r in 0..8 { for s in 0..8 {
                prop_assert_eq!(a.get(r, s), b.get((r + 1) % 8, (s + 1) % 8));
            }}
        }

        #[test]
        fn ising_symmetries(c in arb_config(11), j in -1.0f64..1.0, k in 0usize..11, obc in any::<bool>()) {
            let bc = if obc { Boundary::Obc } else { Boundary::Pbc };
            let params = ModelParams::<f64>::new(11, 1.0).with_j(j).with_bc(bc);
            let e = ising_energy(&c, &params);
            prop_assert_eq!(e, ising_energy(&c.negated(), &params));
            if bc == Boundary::Pbc {
                prop_assert!((e - ising_energy(&c.shifted(k), &params)).abs() < 1e-14);
                prop_assert!((e + j * (11.0 - 2.0 * c.n_walls(bc) as f64)).abs() < 1e-13);
                prop_assert_eq!(c.n_walls(bc) % 2, 0);
            }
        }

        #[test]
        fn flip_delta_matches_recompute(c in arb_config(10), i in 0usize..10, j in -1.0f64..1.0, obc in any::<bool>()) {
            let bc = if obc { Boundary::Obc } else { Boundary::Pbc };
            let params = ModelParams::<f64>::new(10, 1.0).with_j(j).with_bc(bc);
            let d = ising_energy(&c.flipped(i), &params) - ising_energy(&c, &params);
            prop_assert!((d - ising_flip_delta(&c, i, &params)).abs() < 1e-13);
        }
    }
}
