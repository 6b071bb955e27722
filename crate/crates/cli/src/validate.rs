//! `validate`: small-system checks against independent references.

use nhssb_core::analysis::specific_heat_numerical;
use nhssb_core::exact::{brute_force, exact_observables, hn_spectrum};
use nhssb_core::mc::WeightModel;
use nhssb_core::model::build_hopping;
use nhssb_core::oracle::{log_det_one_plus_exp, many_body, IsingChain};
use nhssb_core::spectral::{eigenvalues, log_weight, velocity_expectation};
use nhssb_core::{Boundary, Params, SpinConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::commands::Ctx;
use crate::error::CliError;
use crate::output::{JobManifest, OutputDir};

pub const DEFAULT_MAX_L: usize = 10;
const MAX_FOCK_L: usize = 8;
const CONFIGS_PER_L: u64 = 6;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
}

const CHECKS: &[(&str, f64)] = &[
    ("log_weight_eigen_vs_determinant", 1e-10),
    ("log_weight_eigen_vs_fock_space", 1e-10),
    ("class_sums_vs_enumeration", 1e-10),
    ("reduced_spectrum_vs_dense", 1e-10),
    ("weight_even_under_negation", 0.0),
    ("velocity_odd_under_negation", 1e-10),
    ("weight_translation_invariant", 1e-10),
    ("reciprocal_limit_vs_ising_chain", 1e-10),
    ("specific_heat_fluctuation_vs_derivative", 1e-4),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Deterministic spread of configurations for size `l`.
fn configs(l: usize) -> Vec<SpinConfig> {
    let mask = if l >= 64 { u64::MAX } else { (1u64 << l) - 1 };
    (0..CONFIGS_PER_L)
        .map(|k| SpinConfig::from_bits(l, k.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17) & mask))
        .collect()
}

fn points(l: usize) -> Vec<Params> {
    let mut out = Vec::new();
    for (u, tp, bc, beta) in [
        (0.4, 0.0, Boundary::Pbc, 3.0),
        (-0.7, 0.0, Boundary::Pbc, 8.0),
        (0.5, 0.2, Boundary::Pbc, 5.0),
        (0.3, -0.15, Boundary::Obc, 2.0),
        (1.3, 0.0, Boundary::Pbc, 4.0),
    ] {
        out.push(Params::new(l, beta).with_u(u).with_t_prime(tp).with_bc(bc).with_j(0.1));
    }
    out
}

struct Acc {
    err: f64,
    cases: usize,
}

impl Acc {
    fn new() -> Self {
        Acc { err: 0.0, cases: 0 }
    }

    fn add(&mut self, e: f64) {
        self.err = if e.is_nan() { f64::INFINITY } else { self.err.max(e) };
        self.cases += 1;
    }
}

type Res<T> = Result<T, nhssb_core::Error>;

fn run_checks(max_l: usize) -> Res<Vec<Acc>> {
    let per_l = (3..=max_l).into_par_iter().map(checks_at).collect::<Res<Vec<_>>>()?;
    let mut acc: Vec<Acc> = CHECKS.iter().map(|_| Acc::new()).collect();
    for part in per_l {
        for (a, b) in acc.iter_mut().zip(part) {
            a.err = a.err.max(b.err);
            a.cases += b.cases;
        }
    }
    Ok(acc)
}

fn checks_at(l: usize) -> Res<Vec<Acc>> {
    let mut acc: Vec<Acc> = CHECKS.iter().map(|_| Acc::new()).collect();
    {
        for p in points(l) {
            for c in configs(l) {
                let h = build_hopping(&p, &c)?;
                let lw = log_weight(&eigenvalues(&h)?, p.beta)?;
                acc[0].add(rel(lw, log_det_one_plus_exp(&h, p.beta).0));
                if l <= MAX_FOCK_L {
                    acc[1].add(rel(lw, many_body(&h, p.beta)?.log_z));
                }
                let m = WeightModel::new(p.clone(), false)?;
                let (a, b) = (m.fresh_log_weight(&c)?.0, m.fresh_log_weight(&c.negated())?.0);
                acc[4].add((a - b).abs());
                let va = velocity_expectation(&p, &c, p.beta)?.velocity;
                let vb = velocity_expectation(&p, &c.negated(), p.beta)?.velocity;
                acc[5].add((va + vb).norm() / va.norm().max(1.0));
                if p.bc == Boundary::Pbc {
                    let s = log_weight(&eigenvalues(&build_hopping(&p, &c.shifted(1))?)?, p.beta)?;
                    acc[6].add(rel(lw, s));
                }
                if p.gauge_reducible() && p.bc == Boundary::Pbc && p.u_re.abs() < p.t {
                    let hn = hn_spectrum(l, c.n_minus(), &p)?;
                    acc[3].add(rel(lw, log_weight(&hn.spectrum, p.beta)?));
                }
            }
            if p.gauge_reducible() && p.bc == Boundary::Pbc && p.u_re.abs() < p.t {
                let (a, b) = (exact_observables(&p)?, brute_force(&p)?);
                for (x, y) in [
                    (a.log_z, b.log_z),
                    (a.mean_abs_m, b.mean_abs_m),
                    (a.mean_energy, b.mean_energy),
                    (a.mean_w_sector, b.mean_w_sector),
                ] {
                    acc[2].add(rel(x, y));
                }
            }
        }
        for bc in [Boundary::Pbc, Boundary::Obc] {
            let p = Params::new(l, 2.5).with_j(0.4).with_bc(bc);
            let o = brute_force(&p)?;
            let ising = IsingChain::new(l, p.beta, p.j, bc);
            acc[7].add(rel(o.mean_abs_m, ising.mean_abs_m()));
            acc[7].add(rel(o.mean_m2, ising.mean_m2()));
        }
        // the finite difference in T has truncation error ~ΔT², above the
        // tolerance once T < 0.25
        if l >= 4 {
            for beta in [0.5, 1.0, 2.0, 3.0] {
                let p = Params::new(l, beta).with_u(0.5).with_j(0.05);
                let cv = brute_force(&p)?.specific_heat;
                acc[8].add(rel(cv, specific_heat_numerical(&p, 1e-3)?));
            }
        }
    }
    Ok(acc)
}

pub fn validate(max_l: usize, ctx: &Ctx) -> Result<(), CliError> {
    if !(3..=12).contains(&max_l) {
        return Err(CliError::Config(format!("--max-l must be between 3 and 12, got {max_l}")));
    }
    if ctx.dry_run {
        let plan = json!({
            "command": "validate",
            "max_L": max_l,
            "checks": CHECKS.iter().map(|c| c.0).collect::<Vec<_>>(),
            "output_dir": ctx.out,
        });
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
        return Ok(());
    }
    let out = OutputDir::create(&ctx.out)?;
    let cfg = crate::config::JobConfig { l: Some(max_l), ..Default::default() };
    out.write_manifest(&JobManifest::new("validate", cfg, Vec::new()))?;
    let acc = run_checks(max_l).map_err(|e| {
        CliError::numerical(format!("validation suite aborted: {e}"), json!({ "max_L": max_l, "error": e.to_string() }))
    })?;
    let checks: Vec<Check> = CHECKS
        .iter()
        .zip(&acc)
        .map(|(&(name, tol), a)| Check { name, passed: a.cases > 0 && a.err <= tol, max_error: a.err, tolerance: tol, cases: a.cases })
        .collect();
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:<42} max error {:.3e} (tol {:.0e}, {} cases)", c.name, c.max_error, c.tolerance, c.cases);
    }
    out.write_json("validation.json", &json!({ "max_L": max_l, "checks": checks }))?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}
