//! Brute-force references on the full `(2J+1)²`-dimensional space.
//!
//! Everything here builds dense Kronecker products and is only usable for
//! small spins. The routines are deliberately naive so they can check the
//! factorized code paths.

use crate::echo::{forward_coupled, evolve_pair, CoupledConfig, Perturbation};
use crate::error::{invalid, Result};
use crate::linalg::{hermitian_expm, kron, CMatrix, CVector, C64, I};
use crate::response::correlation_sums;
use crate::spin::{coherent_state, CoherentSpec, Spin, TopParams, TopPropagator};

/// `C`, `D`, `E` from `Σ(t) = Σ_{τ<t} U^{-τ} V U^{τ}` on the full space.
pub fn full_space_sums(cfg: &CoupledConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let us = TopPropagator::new(cfg.sys)?.matrix();
    let ue = TopPropagator::new(cfg.env)?.matrix();
    let u = kron(&us, &ue);
    let v = kron(&cfg.v_sys.matrix(cfg.sys.spin), &cfg.v_env.matrix(cfg.env.spin));
    let psi_s = coherent_state(cfg.sys.spin, cfg.init_sys)?;
    let psi_e = coherent_state(cfg.env.spin, cfg.init_env)?;
    let psi = psi_s.kronecker(&psi_e);
    let (ns, ne) = (psi_s.len(), psi_e.len());
    let ps = kron(&(&psi_s * psi_s.adjoint()), &CMatrix::identity(ne, ne));
    let pe = kron(&CMatrix::identity(ns, ns), &(&psi_e * psi_e.adjoint()));
    let n = u.nrows();
    let mut sigma = CMatrix::zeros(n, n);
    let mut ut = CMatrix::identity(n, n);
    let expect = |m: &CMatrix| (psi.adjoint() * m * &psi)[(0, 0)];
    let (mut c, mut d, mut e) = (vec![0.0], vec![0.0], vec![0.0]);
    for _ in 0..cfg.tmax {
        sigma += ut.adjoint() * &v * &ut;
        ut = &u * ut;
        let m2 = expect(&sigma).powi(2);
        c.push((expect(&(&sigma * &sigma)) - m2).re);
        d.push((expect(&(&sigma * &ps * &sigma)) - m2).re);
        e.push((expect(&(&sigma * &pe * &sigma)) - m2).re);
    }
    Ok((c, d, e))
}

/// Coupled state vectors `ψ_δ(t)`, `t = 0..=tmax`, from the dense propagator
/// `(U_s ⊗ U_e) exp(-iδ V_s ⊗ V_e / ħ)`.
pub fn dense_coupled_states(cfg: &CoupledConfig) -> Result<Vec<CVector>> {
    let us = TopPropagator::new(cfg.sys)?.matrix();
    let ue = TopPropagator::new(cfg.env)?.matrix();
    let v = kron(&cfg.v_sys.matrix(cfg.sys.spin), &cfg.v_env.matrix(cfg.env.spin));
    let coupling = hermitian_expm(&v, -I * (cfg.delta / cfg.hbar()));
    let step = kron(&us, &ue) * coupling;
    let psi = coherent_state(cfg.sys.spin, cfg.init_sys)?.kronecker(&coherent_state(cfg.env.spin, cfg.init_env)?);
    let mut out = vec![psi];
    for t in 0..cfg.tmax {
        let next = &step * &out[t];
        out.push(next);
    }
    Ok(out)
}

/// `(F, F_R, I)` at every step from dense state vectors.
pub fn dense_measures(cfg: &CoupledConfig) -> Result<Vec<(f64, f64, f64)>> {
    let coupled = dense_coupled_states(cfg)?;
    let free = dense_coupled_states(&cfg.with_delta(0.0))?;
    let us = TopPropagator::new(cfg.sys)?.matrix();
    let (ns, ne) = (cfg.sys.spin.dim(), cfg.env.spin.dim());
    let mut phi = coherent_state(cfg.sys.spin, cfg.init_sys)?;
    let mut out = Vec::with_capacity(coupled.len());
    for (a, b) in free.iter().zip(&coupled) {
        let f = a.dotc(b).norm_sqr();
        // ρ_s[i, k] = Σ_ν ψ[i·N_e + ν] conj(ψ[k·N_e + ν])
        let rho = CMatrix::from_fn(ns, ns, |i, k| (0..ne).map(|nu| b[i * ne + nu] * b[k * ne + nu].conj()).sum::<C64>());
        let fr = (phi.adjoint() * &rho * &phi)[(0, 0)].re;
        let purity = (&rho * &rho).trace().re;
        out.push((f, fr, purity));
        phi = &us * phi;
    }
    Ok(out)
}

/// Outcome of the small-spin equivalence suite.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub configs: usize,
    /// Largest relative deviation of the factorized `C`, `D`, `E`.
    pub sums_error: f64,
    /// Largest deviation of factorized state amplitudes from dense ones.
    pub state_error: f64,
    /// Largest deviation of the measures from their dense counterparts.
    pub measure_error: f64,
    /// Largest violation of `F ≤ F_R ≤ I` (squared where appropriate).
    pub chain_violation: f64,
}

pub const SUMS_TOL: f64 = 1e-10;
pub const STATE_TOL: f64 = 1e-12;
pub const CHAIN_SLACK: f64 = 1e-9;

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.sums_error <= SUMS_TOL
            && self.state_error <= STATE_TOL
            && self.measure_error <= STATE_TOL * 100.0
            && self.chain_violation <= CHAIN_SLACK
    }
}

/// Deterministic quasi-random point in `[0, 1)`.
fn weyl(k: usize, dim: usize) -> f64 {
    const ALPHAS: [f64; 8] = [
        0.618_033_988_749_895,
        0.414_213_562_373_095,
        0.732_050_807_568_877,
        0.236_067_977_499_790,
        0.645_751_311_064_591,
        0.316_624_790_355_400,
        0.872_983_346_207_417,
        0.123_105_625_617_661,
    ];
    ((k as f64 + 1.0) * ALPHAS[dim % ALPHAS.len()]).fract()
}

/// Configurations spread over `α ∈ [0, 30]`, `γ ∈ (0, π)`, all angles and both
/// perturbations.
pub fn sample_configs(j: u32, count: usize, tmax: usize) -> Result<Vec<CoupledConfig>> {
    use std::f64::consts::PI;
    let spin = Spin::integer(j)?;
    (0..count)
        .map(|k| {
            let w = |d| weyl(k, d);
            Ok(CoupledConfig {
                sys: TopParams::new(30.0 * w(0), PI * (0.02 + 0.96 * w(1)), spin)?,
                env: TopParams::new(30.0 * w(2), PI * (0.02 + 0.96 * w(3)), spin)?,
                v_sys: Perturbation::JzOverJ,
                v_env: if k % 2 == 0 { Perturbation::JzOverJ } else { Perturbation::Jz2OverJ2 },
                delta: 0.5 * w(4) / j as f64,
                init_sys: CoherentSpec::new(PI * w(5), 2.0 * PI * w(6)),
                init_env: CoherentSpec::new(PI * w(7), 2.0 * PI * w(0) * w(1)),
                tmax,
            })
        })
        .collect()
}

/// Checks one configuration against the dense references.
pub fn check_config(cfg: &CoupledConfig) -> Result<OracleReport> {
    let ledger = correlation_sums(cfg)?;
    let (c, d, e) = full_space_sums(cfg)?;
    let mut sums_error: f64 = 0.0;
    for t in 0..=cfg.tmax {
        let scale = 1.0 + c[t].abs();
        for (x, y) in [(ledger.c[t], c[t]), (ledger.d[t], d[t]), (ledger.e[t], e[t])] {
            sums_error = sums_error.max((x - y).abs() / scale);
        }
    }
    let dense = dense_coupled_states(cfg)?;
    let mut state_error: f64 = 0.0;
    for (t, v) in dense.iter().enumerate() {
        let s = forward_coupled(cfg, t)?.to_vector();
        state_error = state_error.max((s - v).camax());
    }
    let series = evolve_pair(cfg)?;
    let measures = dense_measures(cfg)?;
    let mut measure_error: f64 = 0.0;
    let mut chain_violation: f64 = 0.0;
    for (k, &(f, fr, i)) in measures.iter().enumerate() {
        measure_error = measure_error
            .max((series.f[k] - f).abs())
            .max((series.fr[k] - fr).abs())
            .max((series.i[k] - i).abs());
        let (f2, fr2) = (series.f[k].powi(2), series.fr[k].powi(2));
        chain_violation = chain_violation.max(f2 - fr2).max(fr2 - series.i[k]);
    }
    Ok(OracleReport {
        configs: 1,
        sums_error,
        state_error,
        measure_error,
        chain_violation: chain_violation.max(0.0),
    })
}

/// Runs [`check_config`] over `count` sampled configurations at spin `j`.
pub fn run_oracle(j: u32, count: usize, tmax: usize) -> Result<OracleReport> {
    if !(1..=8).contains(&j) {
        return invalid(format!("brute-force oracle is limited to 1 ≤ J ≤ 8, got {j}"));
    }
    let mut total = OracleReport {
        configs: 0,
        sums_error: 0.0,
        state_error: 0.0,
        measure_error: 0.0,
        chain_violation: 0.0,
    };
    for cfg in sample_configs(j, count, tmax)? {
        let r = check_config(&cfg)?;
        total.configs += 1;
        total.sums_error = total.sums_error.max(r.sums_error);
        total.state_error = total.state_error.max(r.state_error);
        total.measure_error = total.measure_error.max(r.measure_error);
        total.chain_violation = total.chain_violation.max(r.chain_violation);
    }
    Ok(total)
}
