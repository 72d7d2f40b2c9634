//! Paired uncoupled / coupled evolution of two kicked tops and the three
//! stability measures: fidelity, reduced fidelity and purity.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::bipartite::{apply_diagonal_coupling_in_place, apply_tops, product_state, CompositeState};
use crate::error::{invalid, EchoError, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::spin::{coherent_state, CoherentSpec, Spin, TopParams, TopPropagator, UnitaryStep};

/// Factor of the product coupling `V = V_s ⊗ V_e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Perturbation {
    /// `J_z / J`
    JzOverJ,
    /// `J_z² / J²`
    Jz2OverJ2,
}

impl Perturbation {
    /// Diagonal of the operator in the `|m⟩` basis.
    pub fn diagonal(self, spin: Spin) -> Vec<f64> {
        let j = spin.value();
        spin.m_values()
            .map(|m| match self {
                Perturbation::JzOverJ => m / j,
                Perturbation::Jz2OverJ2 => (m / j).powi(2),
            })
            .collect()
    }

    pub fn matrix(self, spin: Spin) -> CMatrix {
        let d = self.diagonal(spin);
        CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.into_iter().map(C64::from)))
    }

    pub fn tag(self) -> &'static str {
        match self {
            Perturbation::JzOverJ => "JZ_OVER_J",
            Perturbation::Jz2OverJ2 => "JZ2_OVER_J2",
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Perturbation {
    type Err = EchoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "JZ_OVER_J" => Ok(Perturbation::JzOverJ),
            "JZ2_OVER_J2" => Ok(Perturbation::Jz2OverJ2),
            other => invalid(format!("unknown perturbation tag {other:?}")),
        }
    }
}

/// Two coupled kicked tops with a product coupling of strength `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledConfig {
    pub sys: TopParams,
    pub env: TopParams,
    pub v_sys: Perturbation,
    pub v_env: Perturbation,
    pub delta: f64,
    pub init_sys: CoherentSpec,
    pub init_env: CoherentSpec,
    pub tmax: usize,
}

impl CoupledConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return invalid(format!("coupling strength must be finite and ≥ 0, got {}", self.delta));
        }
        if self.tmax < 1 {
            return invalid("tmax must be at least 1");
        }
        for spec in [self.init_sys, self.init_env] {
            if !spec.theta.is_finite() || !spec.phi.is_finite() {
                return invalid("initial angles must be finite");
            }
        }
        Ok(())
    }

    /// `ħ = 1/J` of the central system; the coupling phase is `δ/ħ`.
    pub fn hbar(&self) -> f64 {
        self.sys.hbar_eff()
    }

    /// True when the two tops have different `J` (and hence different `ħ`).
    pub fn unequal_spins(&self) -> bool {
        self.sys.spin != self.env.spin
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_tmax(mut self, tmax: usize) -> Self {
        self.tmax = tmax;
        self
    }

    /// Canonical `key = value` lines describing every physical parameter.
    pub fn manifest_lines(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (prefix, top, v, init) in [
            ("sys", &self.sys, self.v_sys, &self.init_sys),
            ("env", &self.env, self.v_env, &self.init_env),
        ] {
            out.push((format!("{prefix}.J"), top.spin.to_string()));
            out.push((format!("{prefix}.alpha"), fmt_f64(top.alpha)));
            out.push((format!("{prefix}.gamma"), fmt_f64(top.gamma)));
            out.push((format!("{prefix}.perturbation"), v.tag().to_string()));
            out.push((format!("{prefix}.theta"), fmt_f64(init.theta)));
            out.push((format!("{prefix}.phi"), fmt_f64(init.phi)));
        }
        out.push(("delta".into(), fmt_f64(self.delta)));
        out.push(("tmax".into(), self.tmax.to_string()));
        out
    }

    /// Hex digest of the canonical parameter listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.manifest_lines() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Round-trippable decimal representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Per-step fidelity `F`, reduced fidelity `F_R` and purity `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilitySeries {
    pub t: Vec<usize>,
    pub f: Vec<f64>,
    pub fr: Vec<f64>,
    pub i: Vec<f64>,
    pub config_hash: String,
}

impl StabilitySeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn f2(&self) -> Vec<f64> {
        self.f.iter().map(|x| x * x).collect()
    }

    pub fn fr2(&self) -> Vec<f64> {
        self.fr.iter().map(|x| x * x).collect()
    }
}

struct Prepared {
    us: TopPropagator,
    ue: TopPropagator,
    psi_s: CVector,
    psi_e: CVector,
    phase_s: Vec<f64>,
    phase_e: Vec<f64>,
    strength: f64,
}

fn prepare(cfg: &CoupledConfig) -> Result<Prepared> {
    cfg.validate()?;
    Ok(Prepared {
        us: TopPropagator::new(cfg.sys)?,
        ue: TopPropagator::new(cfg.env)?,
        psi_s: coherent_state(cfg.sys.spin, cfg.init_sys)?,
        psi_e: coherent_state(cfg.env.spin, cfg.init_env)?,
        phase_s: cfg.v_sys.diagonal(cfg.sys.spin),
        phase_e: cfg.v_env.diagonal(cfg.env.spin),
        strength: cfg.delta / cfg.hbar(),
    })
}

impl Prepared {
    /// One kick of `U_δ = U_s U_e exp(-iδV/ħ)`: coupling phase first.
    fn coupled_step(&self, state: &mut CompositeState) -> Result<()> {
        apply_diagonal_coupling_in_place(&self.phase_s, &self.phase_e, self.strength, state)?;
        apply_tops(&self.us, &self.ue, state)
    }
}

/// Runs `ψ(t) = U^t ψ(0)` and `ψ_δ(t) = U_δ^t ψ(0)` side by side.
///
/// The uncoupled state stays a product `ψ_s(t) ⊗ ψ_e(t)` and is tracked as two
/// vectors, so `F_R = ⟨ψ_s(t)| ρ_sδ |ψ_s(t)⟩` needs no density matrix.
pub fn evolve_pair(cfg: &CoupledConfig) -> Result<StabilitySeries> {
    let p = prepare(cfg)?;
    let mut state = product_state(&p.psi_s, &p.psi_e)?;
    let mut phi_s = p.psi_s.clone();
    let mut phi_e = p.psi_e.clone();
    let n = cfg.tmax + 1;
    let mut series = StabilitySeries {
        t: (0..n).collect(),
        f: Vec::with_capacity(n),
        fr: Vec::with_capacity(n),
        i: Vec::with_capacity(n),
        config_hash: cfg.hash(),
    };
    series.f.push(1.0);
    series.fr.push(1.0);
    series.i.push(1.0);
    for _ in 1..n {
        p.coupled_step(&mut state)?;
        phi_s = p.us.apply(&phi_s);
        phi_e = p.ue.apply(&phi_e);
        let a = state.amplitudes();
        // ⟨ψ_s ⊗ ψ_e | ψ_δ⟩ = ψ_s† A conj(ψ_e)
        let amp = (phi_s.adjoint() * a * phi_e.map(|z| z.conj()))[0];
        let f = amp.norm_sqr();
        let fr = state.reduced_expectation(&phi_s);
        let i = state.purity();
        if !(f.is_finite() && fr.is_finite() && i.is_finite()) {
            return Err(EchoError::Numerical("non-finite stability measure".into()));
        }
        series.f.push(f);
        series.fr.push(fr);
        series.i.push(i);
    }
    Ok(series)
}

/// `M_δ(t)|ψ(0)⟩ = U(-t) U_δ(t) |ψ(0)⟩`.
pub fn echo_state(cfg: &CoupledConfig, t: usize) -> Result<CompositeState> {
    if t > cfg.tmax {
        return invalid(format!("echo time {t} exceeds tmax {}", cfg.tmax));
    }
    let p = prepare(cfg)?;
    let mut state = product_state(&p.psi_s, &p.psi_e)?;
    for _ in 0..t {
        p.coupled_step(&mut state)?;
    }
    let a = state.amps_mut();
    // U^{-t} = (U_s^{-t}) A (U_e^{-t})ᵀ
    let mut left = a.clone();
    for _ in 0..t {
        p.us.apply_block_inverse(&mut left);
    }
    let mut right = left.transpose();
    for _ in 0..t {
        p.ue.apply_block_inverse(&mut right);
    }
    *a = right.transpose();
    Ok(state)
}

/// Applies the inverse coupled map `t` times.
pub fn reverse_coupled(cfg: &CoupledConfig, state: &mut CompositeState, t: usize) -> Result<()> {
    let p = prepare(cfg)?;
    for _ in 0..t {
        let a = state.amps_mut();
        p.us.apply_block_inverse(a);
        let mut at = a.transpose();
        p.ue.apply_block_inverse(&mut at);
        *a = at.transpose();
        apply_diagonal_coupling_in_place(&p.phase_s, &p.phase_e, -p.strength, state)?;
    }
    Ok(())
}

/// Forward coupled map applied `t` times to the initial product state.
pub fn forward_coupled(cfg: &CoupledConfig, t: usize) -> Result<CompositeState> {
    let p = prepare(cfg)?;
    let mut state = product_state(&p.psi_s, &p.psi_e)?;
    for _ in 0..t {
        p.coupled_step(&mut state)?;
    }
    Ok(state)
}

pub fn initial_state(cfg: &CoupledConfig) -> Result<CompositeState> {
    let p = prepare(cfg)?;
    product_state(&p.psi_s, &p.psi_e)
}

/// Tail means of `F²`, `F_R²`, `I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Saturation {
    pub f2: f64,
    pub fr2: f64,
    pub i: f64,
}

/// Averages `F²`, `F_R²` and `I` over the last `tail_fraction` of the series.
pub fn saturation_estimate(series: &StabilitySeries, tail_fraction: f64) -> Result<Saturation> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return invalid(format!("tail fraction {tail_fraction} outside (0, 1)"));
    }
    let n = series.len();
    let count = (n as f64 * tail_fraction).floor() as usize;
    if count == 0 {
        return invalid("saturation tail window is empty");
    }
    let start = n - count;
    let mean = |xs: &[f64], sq: bool| {
        xs[start..]
            .iter()
            .map(|x| if sq { x * x } else { *x })
            .sum::<f64>()
            / count as f64
    };
    Ok(Saturation {
        f2: mean(&series.f, true),
        fr2: mean(&series.fr, true),
        i: mean(&series.i, false),
    })
}
