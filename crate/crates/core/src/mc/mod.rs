//! Metropolis sampling of the bond field with the positive fermionic weight.
//!
//! Single-bond flips are accepted with `min(1, exp(-β ΔE_J + Δ ln W_f))`.
//! At `t' = 0` the log-weight depends only on `n_-` (PBC) or not at all
//! (OBC), so the fast path reads it from a table; otherwise every proposal
//! re-diagonalizes the flipped matrix.

pub mod dump;
pub mod stats;

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{sector_of, ClassTable};
use crate::model::{build_hopping, ising_energy, ising_flip_delta, uniform_config, Boundary, ModelParams, SpinConfig};
use crate::scalar::{from_usize, to_f64, Real};
use crate::spectral::{
    denergy_dbeta, eigenvalues, fermion_energy, gauge_reduced, log_weight, velocity_expectation,
    velocity_expectation_dense, SpectralData,
};

pub use stats::{Estimate, PointStats};

pub const MANIFEST_SCHEMA: u32 = 1;
/// Sweeps between full recomputations of the cached weight.
pub const DRIFT_CHECK_EVERY: u64 = 1000;
pub const DRIFT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    #[default]
    Hot,
    Cold,
}

/// Complete provenance of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RunManifest<T> {
    pub schema_version: u32,
    pub params: ModelParams<T>,
    pub seed: u64,
    pub n_therm: usize,
    pub n_sweeps: usize,
    pub n_chains: usize,
    pub measure_every: usize,
    pub fast_path: bool,
    #[serde(default)]
    pub start: Start,
    pub code_version: String,
}

impl<T: Real> RunManifest<T> {
    /// Defaults: 10⁴ thermalization sweeps, 10⁵ sweeps, 8 chains,
    /// measurement every 10 sweeps, fast path whenever `t' = 0`.
    pub fn new(params: ModelParams<T>, seed: u64) -> Self {
        let fast_path = params.gauge_reducible();
        Self {
            schema_version: MANIFEST_SCHEMA,
            params,
            seed,
            n_therm: 10_000,
            n_sweeps: 100_000,
            n_chains: 8,
            measure_every: 10,
            fast_path,
            start: Start::Hot,
            code_version: code_version(),
        }
    }

    pub fn with_schedule(mut self, n_therm: usize, n_sweeps: usize, n_chains: usize, measure_every: usize) -> Self {
        self.n_therm = n_therm;
        self.n_sweeps = n_sweeps;
        self.n_chains = n_chains;
        self.measure_every = measure_every;
        self
    }

    pub fn with_fast_path(mut self, fast: bool) -> Self {
        self.fast_path = fast;
        self
    }

    pub fn with_start(mut self, start: Start) -> Self {
        self.start = start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.schema_version != MANIFEST_SCHEMA {
            return Err(Error::InvalidParams(format!("unknown manifest schema {}", self.schema_version)));
        }
        if self.n_chains == 0 || self.measure_every == 0 {
            return Err(Error::InvalidParams("n_chains and measure_every must be positive".into()));
        }
        if self.fast_path && !self.params.gauge_reducible() {
            return Err(Error::InvalidParams("fast_path requires t' = 0".into()));
        }
        Ok(())
    }

    pub fn n_measurements(&self) -> usize {
        self.n_sweeps / self.measure_every
    }
}

pub fn code_version() -> String {
    format!("nhssb-core {}", env!("CARGO_PKG_VERSION"))
}

/// Fermionic data shared by all chains of one parameter point.
#[derive(Clone, Debug)]
pub struct WeightModel<T: Real> {
    pub params: ModelParams<T>,
    /// Class functions of `n_-` (PBC) or a single row (OBC); `None` on the
    /// slow path.
    pub table: Option<ClassTable<T>>,
}

impl<T: Real> WeightModel<T> {
    pub fn new(params: ModelParams<T>, fast_path: bool) -> Result<Self> {
        params.validate()?;
        if !fast_path {
            return Ok(Self { params, table: None });
        }
        if !params.gauge_reducible() {
            return Err(Error::InvalidParams("fast_path requires t' = 0".into()));
        }
        let table = match params.bc {
            Boundary::Pbc => ClassTable::build(&params)?,
            Boundary::Obc => open_chain_row(&params)?,
        };
        Ok(Self { params, table: Some(table) })
    }

    pub fn is_fast(&self) -> bool {
        self.table.is_some()
    }

    fn row(&self, n_minus: usize) -> usize {
        match self.params.bc {
            Boundary::Pbc => n_minus,
            Boundary::Obc => 0,
        }
    }

    /// Fermionic log-weight of a configuration, recomputed from scratch.
    pub fn fresh_log_weight(&self, config: &SpinConfig) -> Result<(T, Option<SpectralData<T>>)> {
        match &self.table {
            Some(t) => Ok((t.log_weight[self.row(config.n_minus())], None)),
            None => {
                let spec = eigenvalues(&build_hopping(&self.params, &config.canonical())?)?;
                Ok((log_weight(&spec, self.params.beta)?, Some(spec)))
            }
        }
    }
}

/// Under OBC at `t' = 0` every configuration is similar to the uniform
/// symmetric chain with hopping `√(t² - U²)`, so one row covers all `X`.
fn open_chain_row<T: Real>(params: &ModelParams<T>) -> Result<ClassTable<T>> {
    let c = uniform_config(params.l, 1);
    let h = match gauge_reduced(params, &c)? {
        Some(h) => h,
        None => build_hopping(params, &c)?,
    };
    let spec = eigenvalues(&h)?;
    let beta = params.beta;
    let v = velocity_expectation_dense(&h, beta)?;
    Ok(ClassTable {
        log_weight: vec![log_weight(&spec, beta)?],
        energy: vec![fermion_energy(&spec, beta)?],
        denergy_dbeta: vec![denergy_dbeta(&spec, beta)?],
        gs_energy: vec![crate::spectral::ground_state_energy(&spec).energy],
        velocity: vec![v.velocity],
    })
}

/// One Markov chain; owns its generator and caches.
#[derive(Clone, Debug)]
pub struct ChainState<T: Real> {
    pub config: SpinConfig,
    pub cached_log_weight: T,
    /// Running Ising energy, updated by flip deltas.
    pub cached_ising: T,
    pub cached_spectrum: Option<SpectralData<T>>,
    pub rng: ChaCha8Rng,
    pub step_count: u64,
    pub proposed: u64,
    pub accepted: u64,
    pub aborted: u64,
    pub drift_events: u64,
    pub max_drift: f64,
    currents_memo: HashMap<usize, Arc<Vec<Complex<T>>>>,
}

impl<T: Real> ChainState<T> {
    pub fn new(model: &WeightModel<T>, config: SpinConfig, rng: ChaCha8Rng) -> Result<Self> {
        if config.len() != model.params.l {
            return Err(Error::DimensionMismatch { config: config.len(), l: model.params.l });
        }
        let (lw, spec) = model.fresh_log_weight(&config)?;
        let e_j = ising_energy(&config, &model.params);
        Ok(Self {
            config,
            cached_log_weight: lw,
            cached_ising: e_j,
            cached_spectrum: spec,
            rng,
            step_count: 0,
            proposed: 0,
            accepted: 0,
            aborted: 0,
            drift_events: 0,
            max_drift: 0.0,
            currents_memo: HashMap::new(),
        })
    }

    /// Chain `chain` of a run seeded with `seed`: independent ChaCha streams.
    pub fn seeded(model: &WeightModel<T>, seed: u64, chain: u64, start: Start) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain);
        let l = model.params.l;
        let config = match start {
            Start::Cold => uniform_config(l, 1),
            Start::Hot => SpinConfig::new((0..l).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())?,
        };
        Self::new(model, config, rng)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Recomputes the caches from the configuration and records the discrepancy.
    pub fn check_drift(&mut self, model: &WeightModel<T>) -> Result<f64> {
        let (lw, spec) = model.fresh_log_weight(&self.config)?;
        let e_j = ising_energy(&self.config, &model.params);
        let d = to_f64(
            (lw - self.cached_log_weight).abs() + model.params.beta * (e_j - self.cached_ising).abs(),
        );
        let scale = to_f64(lw.abs() + (model.params.beta * e_j).abs()).max(1.0);
        if d > DRIFT_TOL * scale {
            self.drift_events += 1;
        }
        self.max_drift = self.max_drift.max(d / scale);
        self.cached_log_weight = lw;
        self.cached_ising = e_j;
        self.cached_spectrum = spec;
        Ok(d)
    }
}

/// `L` single-bond flip proposals at uniformly random bonds.
pub fn metropolis_sweep<T: Real>(state: &mut ChainState<T>, model: &WeightModel<T>) {
    let l = model.params.l;
    let beta = model.params.beta;
    for _ in 0..l {
        let i = state.rng.random_range(0..l);
        let u: f64 = state.rng.random();
        state.proposed += 1;
        let d_ising = ising_flip_delta(&state.config, i, &model.params);
        let (new_lw, new_spec) = match &model.table {
            Some(t) => {
                let n = state.config.n_minus();
                let n_new = if state.config.get(i) > 0 { n + 1 } else { n - 1 };
                (t.log_weight[model.row(n_new)], None)
            }
            None => {
                let flipped = state.config.flipped(i).canonical();
                let r = build_hopping(&model.params, &flipped)
                    .and_then(|h| eigenvalues(&h))
                    .and_then(|s| log_weight(&s, beta).map(|lw| (lw, s)));
                match r {
                    Ok((lw, s)) => (lw, Some(s)),
                    Err(_) => {
                        state.aborted += 1;
                        continue;
                    }
                }
            }
        };
        let log_ratio = to_f64(new_lw - state.cached_log_weight - beta * d_ising);
        if log_ratio >= 0.0 || u < log_ratio.exp() {
            state.config.flip(i);
            state.cached_log_weight = new_lw;
            state.cached_ising = state.cached_ising + d_ising;
            state.cached_spectrum = new_spec;
            state.accepted += 1;
        }
    }
    state.step_count += 1;
    if state.step_count % DRIFT_CHECK_EVERY == 0 && state.check_drift(model).is_err() {
        state.aborted += 1;
    }
}

/// Per-sample observables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SampleRecord<T> {
    pub m: T,
    pub abs_m: T,
    pub e_j: T,
    pub e_f: T,
    pub def_dbeta: T,
    pub v: Complex<T>,
    pub sector: i8,
    /// `(1/N_r) Σ_i X_i X_{i+r}` for `r = 0..=L/2`.
    pub corr_x: Vec<T>,
    /// `(1/N_r) Σ_i Im j_i Im j_{i+r}` for `r = 0..=L/2`.
    pub corr_v: Vec<T>,
}

impl<T: Real> SampleRecord<T> {
    pub fn energy(&self) -> T {
        self.e_j + self.e_f
    }

    /// `Im⟨v̂⟩ β / L`.
    pub fn winding(&self, beta: T, l: usize) -> T {
        self.v.im * beta / from_usize::<T>(l)
    }
}

/// Translation-averaged two-point function; open chains average over the
/// pairs that fit.
pub fn two_point<T: Real>(x: &[T], bc: Boundary) -> Vec<T> {
    let l = x.len();
    (0..=l / 2)
        .map(|r| {
            let pairs: Vec<(usize, usize)> = match bc {
                Boundary::Pbc => (0..l).map(|i| (i, (i + r) % l)).collect(),
                Boundary::Obc => (0..l - r).map(|i| (i, i + r)).collect(),
            };
            let s = pairs.iter().fold(T::zero(), |acc, &(a, b)| acc + x[a] * x[b]);
            s / from_usize::<T>(pairs.len())
        })
        .collect()
}

/// Observables of the current configuration.
pub fn measure<T: Real>(state: &mut ChainState<T>, model: &WeightModel<T>) -> Result<SampleRecord<T>> {
    let p = &model.params;
    let beta = p.beta;
    let l = p.l;
    let c = &state.config;
    let m: T = c.magnetization();
    let (e_f, def_dbeta, v, currents) = match &model.table {
        Some(t) => {
            let n = c.n_minus();
            let row = model.row(n);
            // bond currents are gauge invariant, hence a function of n_- alone
            let currents = match state.currents_memo.get(&row) {
                Some(cur) => cur.clone(),
                None => {
                    let cur = Arc::new(velocity_expectation(p, c, beta)?.currents);
                    state.currents_memo.insert(row, cur.clone());
                    cur
                }
            };
            (t.energy[row], t.denergy_dbeta[row], t.velocity[row], currents)
        }
        None => {
            let spec = match &state.cached_spectrum {
                Some(s) => s.clone(),
                None => eigenvalues(&build_hopping(p, &c.canonical())?)?,
            };
            let vel = velocity_expectation(p, c, beta)?;
            (fermion_energy(&spec, beta)?, denergy_dbeta(&spec, beta)?, vel.velocity, Arc::new(vel.currents))
        }
    };
    let xs: Vec<T> = c.values().iter().map(|&x| T::from_i8(x).unwrap()).collect();
    let im_j: Vec<T> = currents.iter().map(|j| j.im).collect();
    Ok(SampleRecord {
        m,
        abs_m: m.abs(),
        e_j: state.cached_ising,
        e_f,
        def_dbeta,
        v,
        sector: sector_of(m, v.im, l),
        corr_x: two_point(&xs, p.bc),
        corr_v: two_point(&im_j, p.bc),
    })
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainOutput<T: Real> {
    pub chain: usize,
    pub records: Vec<SampleRecord<T>>,
    pub acceptance: f64,
    pub aborted_proposals: u64,
    pub failed_measurements: u64,
    pub drift_events: u64,
    pub max_drift: f64,
    pub final_config: SpinConfig,
}

/// Thermalizes, then samples `n_sweeps` sweeps measuring every
/// `measure_every`.
pub fn run_single_chain<T: Real>(manifest: &RunManifest<T>, model: &WeightModel<T>, chain: usize) -> Result<ChainOutput<T>> {
    let mut state = ChainState::seeded(model, manifest.seed, chain as u64, manifest.start)?;
    for _ in 0..manifest.n_therm {
        metropolis_sweep(&mut state, model);
    }
    let (p0, a0) = (state.proposed, state.accepted);
    let mut records = Vec::with_capacity(manifest.n_measurements());
    let mut failed = 0;
    for s in 1..=manifest.n_sweeps {
        metropolis_sweep(&mut state, model);
        if s % manifest.measure_every == 0 {
            match measure(&mut state, model) {
                Ok(r) => records.push(r),
                Err(_) => failed += 1,
            }
        }
    }
    let prop = state.proposed - p0;
    Ok(ChainOutput {
        chain,
        records,
        acceptance: if prop == 0 { 0.0 } else { (state.accepted - a0) as f64 / prop as f64 },
        aborted_proposals: state.aborted,
        failed_measurements: failed,
        drift_events: state.drift_events,
        max_drift: state.max_drift,
        final_config: state.config,
    })
}

/// All chains of a manifest plus merged statistics.
#[derive(Clone, Debug)]
pub struct RunResult<T: Real> {
    pub manifest: RunManifest<T>,
    pub chains: Vec<ChainOutput<T>>,
    pub stats: PointStats,
}

impl<T: Real> RunResult<T> {
    pub fn records(&self) -> impl Iterator<Item = &SampleRecord<T>> {
        self.chains.iter().flat_map(|c| c.records.iter())
    }
}

/// Runs every chain of the manifest in parallel; merge order is by chain id.
pub fn run_chain<T: Real>(manifest: &RunManifest<T>) -> Result<RunResult<T>> {
    manifest.validate()?;
    let model = WeightModel::new(manifest.params.clone(), manifest.fast_path)?;
    let chains: Vec<Result<ChainOutput<T>>> = (0..manifest.n_chains)
        .into_par_iter()
        .map(|c| run_single_chain(manifest, &model, c))
        .collect();
    let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;
    let stats = stats::point_stats(&manifest.params, &chains);
    Ok(RunResult { manifest: manifest.clone(), chains, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_force, exact_observables};
    use crate::model::make_domain_wall_pair;

    fn manifest(p: ModelParams<f64>, seed: u64) -> RunManifest<f64> {
        RunManifest::new(p, seed).with_schedule(500, 4000, 2, 5)
    }

    #[test]
    fn manifest_round_trip() {
        let m = manifest(ModelParams::<f64>::new(10, 3.0).with_u(0.4), 9);
        let s = serde_json::to_string(&m).unwrap();
        let back: RunManifest<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(s.contains("\"fast_path\":true"));
    }

    #[test]
    fn fast_path_rejected_with_t_prime() {
        let m = manifest(ModelParams::<f64>::new(10, 3.0).with_u(0.4).with_t_prime(0.5), 1).with_fast_path(true);
        assert!(m.validate().is_err());
    }

    #[test]
    fn single_chain_reproducible() {
        let m = manifest(ModelParams::<f64>::new(12, 5.0).with_u(0.4), 42).with_schedule(100, 1000, 1, 10);
        let a = run_chain(&m).unwrap();
        let b = run_chain(&m).unwrap();
        assert_eq!(a.chains[0].records, b.chains[0].records);
        let slow = m.clone().with_fast_path(false).with_schedule(20, 200, 1, 10);
        let a = run_chain(&slow).unwrap();
        let b = run_chain(&slow).unwrap();
        assert_eq!(a.chains[0].records, b.chains[0].records);
    }

    #[test]
    fn fast_and_slow_weights_agree() {
        let p = ModelParams::<f64>::new(10, 6.0).with_u(0.4).with_j(0.05);
        let fast = WeightModel::new(p.clone(), true).unwrap();
        let slow = WeightModel::new(p, false).unwrap();
        for r in 1..10 {
            let c = make_domain_wall_pair(10, r).unwrap();
            let a = fast.fresh_log_weight(&c).unwrap().0;
            let b = slow.fresh_log_weight(&c).unwrap().0;
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn open_chain_weight_is_constant() {
        let p = ModelParams::<f64>::new(9, 4.0).with_u(0.5).with_bc(Boundary::Obc);
        let fast = WeightModel::new(p.clone(), true).unwrap();
        let slow = WeightModel::new(p, false).unwrap();
        for bits in [0u64, 5, 77, 300, 511] {
            let c = SpinConfig::from_bits(9, bits);
            let a = fast.fresh_log_weight(&c).unwrap().0;
            let b = slow.fresh_log_weight(&c).unwrap().0;
            assert!((a - b).abs() < 1e-9, "{bits}: {a} {b}");
        }
    }

    #[test]
    fn measurement_memo_matches_fresh() {
        let p = ModelParams::<f64>::new(10, 8.0).with_u(0.4);
        let model = WeightModel::new(p.clone(), true).unwrap();
        let rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = ChainState::new(&model, make_domain_wall_pair(10, 3).unwrap(), rng).unwrap();
        let first = measure(&mut st, &model).unwrap();
        st.config = SpinConfig::new(vec![1, -1, 1, -1, 1, 1, -1, 1, 1, 1]).unwrap();
        st.cached_ising = ising_energy(&st.config, &p);
        let memo = measure(&mut st, &model).unwrap();
        let slow = WeightModel::new(p, false).unwrap();
        let mut st2 = ChainState::new(&slow, st.config.clone(), ChaCha8Rng::seed_from_u64(0)).unwrap();
        let fresh = measure(&mut st2, &slow).unwrap();
        assert_eq!(first.corr_v, memo.corr_v);
        for (a, b) in memo.corr_v.iter().zip(&fresh.corr_v) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((memo.v - fresh.v).norm() < 1e-9);
        assert!((memo.e_f - fresh.e_f).abs() < 1e-9);
    }

    #[test]
    fn measurement_of_negated_config() {
        let p = ModelParams::<f64>::new(12, 6.0).with_u(0.5).with_t_prime(0.3);
        let model = WeightModel::new(p, false).unwrap();
        let c = SpinConfig::new(vec![1, 1, -1, 1, 1, 1, -1, -1, 1, 1, 1, -1]).unwrap();
        let mut a = ChainState::new(&model, c.clone(), ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut b = ChainState::new(&model, c.negated(), ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ra = measure(&mut a, &model).unwrap();
        let rb = measure(&mut b, &model).unwrap();
        assert_eq!(ra.m, -rb.m);
        assert!((ra.v.im + rb.v.im).abs() < 1e-10);
        assert_eq!(ra.sector, -rb.sector);
        let cold = uniform_config(12, 1);
        let mut s = ChainState::new(&model, cold, ChaCha8Rng::seed_from_u64(0)).unwrap();
        let r = measure(&mut s, &model).unwrap();
        assert_eq!((r.m, r.sector, r.corr_x[0]), (1.0, 1, 1.0));
        assert_eq!(r.corr_x.len(), 7);
    }

    #[test]
    fn detailed_balance_three_bonds() {
        let p = ModelParams::<f64>::new(3, 1.5).with_u(0.6).with_t_prime(0.3).with_j(0.2);
        let model = WeightModel::new(p.clone(), false).unwrap();
        let mut st = ChainState::new(&model, uniform_config(3, 1), ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut counts = [0u64; 8];
        let n = 200_000;
        for _ in 0..n {
            metropolis_sweep(&mut st, &model);
            let bits = st.config.values().iter().enumerate().fold(0usize, |b, (i, &x)| b | (((x < 0) as usize) << i));
            counts[bits] += 1;
        }
        let weights: Vec<f64> = (0..8u64)
            .map(|b| {
                let c = SpinConfig::from_bits(3, b);
                let lw = model.fresh_log_weight(&c).unwrap().0;
                lw - p.beta * ising_energy(&c, &p)
            })
            .collect();
        let z: f64 = weights.iter().map(|w| w.exp()).sum();
        let _ = brute_force(&p).unwrap();
        for b in 0..8 {
            let pe = weights[b].exp() / z;
            let emp = counts[b] as f64 / n as f64;
            // consecutive sweeps are correlated; allow for τ up to ~4
            let sigma = (8.0 * pe * (1.0 - pe) / n as f64).sqrt();
            assert!((emp - pe).abs() < 3.0 * sigma, "config {b}: {emp} vs {pe}");
        }
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let m = manifest(ModelParams::<f64>::new(16, 1e-9).with_u(0.4), 5);
        let r = run_chain(&m).unwrap();
        assert!(r.chains.iter().all(|c| c.acceptance > 0.999));
        let mm = r.stats.get("m").unwrap();
        assert!(mm.mean.abs() < 3.0 * mm.err + 1e-12);
    }

    #[test]
    fn small_ring_matches_exact() {
        let p = ModelParams::<f64>::new(10, 6.0).with_u(0.4).with_j(0.05);
        let r = run_chain(&manifest(p.clone(), 11).with_schedule(1000, 20000, 4, 5)).unwrap();
        let ex = exact_observables(&p).unwrap();
        let am = r.stats.get("abs_m").unwrap();
        assert!((am.mean - ex.mean_abs_m).abs() < 3.0 * am.err, "{am:?} vs {}", ex.mean_abs_m);
        let e = r.stats.get("energy").unwrap();
        assert!((e.mean - ex.mean_energy).abs() < 3.0 * e.err, "{e:?} vs {}", ex.mean_energy);
        assert_eq!(r.chains.iter().map(|c| c.drift_events).sum::<u64>(), 0);
    }
}
