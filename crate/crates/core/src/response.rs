//! Second-order (linear response) description of fidelity, reduced fidelity
//! and purity decay.
//!
//! For a product coupling `V = V_s ⊗ V_e` the second-order coefficients
//! `C(t)`, `D(t)`, `E(t)` are double sums over subsystem correlation tables:
//!
//! ```text
//! 1 - F   ≈ (δ/ħ)² C
//! 1 - F_R ≈ (δ/ħ)² (C - D)
//! 1 - I   ≈ 2 (δ/ħ)² (C - D - E)
//! ```
//!
//! Discrete time: integrals over `[0, t]` become sums over `0..t`.

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;

use crate::bipartite::ReducedDensity;
use crate::echo::{CoupledConfig, StabilitySeries};
use crate::error::{invalid, EchoError, Result};
use crate::linalg::{complex_mul, real_left_mul, real_right_mul, CMatrix, CVector, C64};
use crate::spin::{coherent_state, heisenberg_correlations, Correlations, TopPropagator};

/// Second-order coefficients and the subsystem tables they came from.
#[derive(Clone, Debug)]
pub struct CorrelationLedger {
    pub tmax: usize,
    /// `C[t]`, `t = 0..=tmax`
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub corr_s: CMatrix,
    pub corr_e: CMatrix,
    pub mean_s: CVector,
    pub mean_e: CVector,
    /// Largest imaginary part seen in any assembled sum before it was dropped.
    pub imag_residue: f64,
}

/// Coupling operator handed to [`correlation_sums_for`].
#[derive(Clone, Debug)]
pub enum CouplingOperator {
    Product { sys: CMatrix, env: CMatrix },
    /// Arbitrary operator on the composite space.
    General(CMatrix),
}

/// Prefix double sums `S[t] = Σ_{ξ,ζ<t} f(ξ, ζ)` for `t = 0..=n`.
fn double_prefix_sums(n: usize, f: impl Fn(usize, usize) -> C64) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = C64::from(0.0);
    let mut residue: f64 = 0.0;
    out.push(0.0);
    for t in 0..n {
        for z in 0..t {
            acc += f(t, z) + f(z, t);
        }
        acc += f(t, t);
        residue = residue.max(acc.im.abs());
        out.push(acc.re);
    }
    (out, residue)
}

impl CorrelationLedger {
    /// Assembles `C`, `D`, `E` from the system and environment tables.
    pub fn from_tables(sys: &Correlations, env: &Correlations) -> Result<Self> {
        let n = sys.tmax();
        if env.tmax() != n {
            return invalid("system and environment tables have different lengths");
        }
        let (cs, ce, ms, me) = (&sys.corr, &env.corr, &sys.mean, &env.mean);
        let (c, rc) = double_prefix_sums(n, |a, b| cs[(a, b)] * ce[(a, b)] - ms[a] * ms[b] * me[a] * me[b]);
        let (d, rd) = double_prefix_sums(n, |a, b| ms[a] * ms[b] * (ce[(a, b)] - me[a] * me[b]));
        let (e, re) = double_prefix_sums(n, |a, b| (cs[(a, b)] - ms[a] * ms[b]) * me[a] * me[b]);
        Ok(CorrelationLedger {
            tmax: n,
            c,
            d,
            e,
            corr_s: sys.corr.clone(),
            corr_e: env.corr.clone(),
            mean_s: sys.mean.clone(),
            mean_e: env.mean.clone(),
            imag_residue: rc.max(rd).max(re),
        })
    }

    pub fn c_minus_d(&self) -> Vec<f64> {
        self.c.iter().zip(&self.d).map(|(c, d)| c - d).collect()
    }

    pub fn c_minus_d_minus_e(&self) -> Vec<f64> {
        self.c
            .iter()
            .zip(&self.d)
            .zip(&self.e)
            .map(|((c, d), e)| c - d - e)
            .collect()
    }

    /// `⟨Σ_s²(t)⟩_s`
    pub fn sys_sigma_sq(&self) -> Vec<f64> {
        double_prefix_sums(self.tmax, |a, b| self.corr_s[(a, b)]).0
    }

    /// `⟨Σ_e²(t)⟩_e`
    pub fn env_sigma_sq(&self) -> Vec<f64> {
        double_prefix_sums(self.tmax, |a, b| self.corr_e[(a, b)]).0
    }

    /// `⟨Σ_e²(t)⟩_e - ⟨Σ_e(t)⟩_e²`
    pub fn env_sigma_sq_connected(&self) -> Vec<f64> {
        let me = &self.mean_e;
        double_prefix_sums(self.tmax, |a, b| self.corr_e[(a, b)] - me[a] * me[b]).0
    }

    /// Time averages of `⟨V_s²(t)⟩` and `⟨V_s(t)⟩²` over the table.
    pub fn sys_time_averages(&self) -> TimeAverages {
        time_averages(&self.corr_s, &self.mean_s)
    }

    pub fn env_time_averages(&self) -> TimeAverages {
        time_averages(&self.corr_e, &self.mean_e)
    }
}

/// Time averages of single-time moments of one subsystem observable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAverages {
    /// `avg ⟨V²(t)⟩`
    pub second_moment: f64,
    /// `avg ⟨V(t)⟩²`
    pub mean_squared: f64,
    /// `avg ⟨V(t)⟩`
    pub mean: f64,
}

impl TimeAverages {
    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean_squared
    }
}

fn time_averages(corr: &CMatrix, mean: &CVector) -> TimeAverages {
    let n = mean.len().max(1) as f64;
    TimeAverages {
        second_moment: corr.diagonal().iter().map(|z| z.re).sum::<f64>() / n,
        mean_squared: mean.iter().map(|z| z.re * z.re).sum::<f64>() / n,
        mean: mean.iter().map(|z| z.re).sum::<f64>() / n,
    }
}

/// Subsystem correlation tables under the uncoupled dynamics, for `t < cfg.tmax`.
pub fn subsystem_tables(cfg: &CoupledConfig) -> Result<(Correlations, Correlations)> {
    cfg.validate()?;
    let us = TopPropagator::new(cfg.sys)?;
    let ue = TopPropagator::new(cfg.env)?;
    let psi_s = coherent_state(cfg.sys.spin, cfg.init_sys)?;
    let psi_e = coherent_state(cfg.env.spin, cfg.init_env)?;
    let vs = cfg.v_sys.matrix(cfg.sys.spin);
    let ve = cfg.v_env.matrix(cfg.env.spin);
    let (sys, env) = rayon::join(
        || heisenberg_correlations(&us, &vs, &psi_s, cfg.tmax),
        || heisenberg_correlations(&ue, &ve, &psi_e, cfg.tmax),
    );
    Ok((sys?, env?))
}

/// `C`, `D`, `E` for the configured product coupling, up to `cfg.tmax`.
pub fn correlation_sums(cfg: &CoupledConfig) -> Result<CorrelationLedger> {
    let (sys, env) = subsystem_tables(cfg)?;
    CorrelationLedger::from_tables(&sys, &env)
}

/// As [`correlation_sums`] but for an explicitly given coupling operator.
pub fn correlation_sums_for(cfg: &CoupledConfig, coupling: &CouplingOperator) -> Result<CorrelationLedger> {
    let (vs, ve) = match coupling {
        CouplingOperator::Product { sys, env } => (sys, env),
        CouplingOperator::General(_) => {
            return Err(EchoError::Unsupported(
                "correlation sums need a product coupling V_s ⊗ V_e".into(),
            ))
        }
    };
    cfg.validate()?;
    let us = TopPropagator::new(cfg.sys)?;
    let ue = TopPropagator::new(cfg.env)?;
    let psi_s = coherent_state(cfg.sys.spin, cfg.init_sys)?;
    let psi_e = coherent_state(cfg.env.spin, cfg.init_env)?;
    let sys = heisenberg_correlations(&us, vs, &psi_s, cfg.tmax)?;
    let env = heisenberg_correlations(&ue, ve, &psi_e, cfg.tmax)?;
    CorrelationLedger::from_tables(&sys, &env)
}

/// Least-squares coefficient with its relative RMS residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub value: f64,
    /// `sqrt(Σ (y - model)² / Σ y²)` over the window
    pub residual: f64,
    pub window: (usize, usize),
}

fn check_window(len: usize, window: (usize, usize)) -> Result<()> {
    let (lo, hi) = window;
    if lo < 1 || hi <= lo || hi >= len {
        return invalid(format!("fit window {window:?} is degenerate for a series of length {len}"));
    }
    Ok(())
}

/// Fits `y(t) = k · t^power` over `t ∈ [lo, hi]`.
fn fit_power(series: &[f64], window: (usize, usize), power: i32) -> Result<Fit> {
    check_window(series.len(), window)?;
    let ts = window.0..=window.1;
    let num: f64 = ts.clone().map(|t| series[t] * (t as f64).powi(power)).sum();
    let den: f64 = ts.clone().map(|t| (t as f64).powi(2 * power)).sum();
    let k = num / den;
    let ss_res: f64 = ts.clone().map(|t| (series[t] - k * (t as f64).powi(power)).powi(2)).sum();
    let ss_tot: f64 = ts.map(|t| series[t].powi(2)).sum();
    if !k.is_finite() {
        return Err(EchoError::Numerical("non-finite fit coefficient".into()));
    }
    Ok(Fit {
        value: k,
        residual: if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else { 0.0 },
        window,
    })
}

/// Transport coefficient: fits `series(t) = 2σt`.
pub fn fit_sigma(series: &[f64], window: (usize, usize)) -> Result<Fit> {
    let mut f = fit_power(series, window, 1)?;
    f.value /= 2.0;
    Ok(f)
}

/// Plateau coefficient: fits `series(t) = c̄ t²`.
pub fn fit_cbar(series: &[f64], window: (usize, usize)) -> Result<Fit> {
    fit_power(series, window, 2)
}

/// Regular-regime plateau coefficients for `α = 0`, a `π/2` rotation and
/// `V = J_z/J` on both tops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularPlateaus {
    pub cbar_f: f64,
    pub cbar_r: f64,
    pub cbar_i: f64,
}

pub fn closed_form_regular(n_s: [f64; 3], n_e: [f64; 3], j: f64) -> Result<RegularPlateaus> {
    for n in [n_s, n_e] {
        let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return invalid(format!("direction {n:?} is not a unit vector"));
        }
    }
    if !(j >= 1.0) {
        return invalid("J must be at least 1");
    }
    let (ys, ye) = (n_s[1], n_e[1]);
    let dot: f64 = n_s.iter().zip(&n_e).map(|(a, b)| a * b).sum();
    let w = dot - ys * ye;
    let second = ((ys - ye).powi(2) + w * w) / (16.0 * j * j);
    Ok(RegularPlateaus {
        cbar_f: (2.0 - ys * ys - ye * ye - 2.0 * w * w) / (8.0 * j) + second,
        cbar_r: (1.0 - ye * ye - w * w) / (8.0 * j) + second,
        cbar_i: second,
    })
}

/// Time averages of `V_s = J_z/J` for a slowly rotating regular system
/// (`α_s = 0`, `γ_s ≪ 1`): returns `(avg ⟨V_s²⟩, avg ⟨V_s²⟩ - avg ⟨V_s⟩²)`.
pub fn closed_form_fast_mixing(y_s: f64, j: f64) -> (f64, f64) {
    let y2 = y_s * y_s;
    let var = (1.0 + y2) / (4.0 * j);
    (0.5 * (1.0 - y2) + var, var)
}

/// Environment plateau for `α_e = 0`, a `π/2` rotation and `V_e = J_z²/J²`:
/// returns `(c̄_e, c̄_e - avg ⟨V_e⟩²)`.
pub fn closed_form_fast_regular(y_e: f64, j: f64) -> (f64, f64) {
    let y2 = y_e * y_e;
    let y4 = y2 * y2;
    let cbar = 0.25 * (1.0 - y2).powi(2) + (-3.0 * y4 + 2.0 * y2 + 1.0) / (4.0 * j);
    let conn = y2 * (1.0 - y2) / (2.0 * j) + (11.0 * y4 - 11.0 * y2 + 2.0) / (16.0 * j * j);
    (cbar, conn)
}

/// Dynamical regime, selecting which decay law applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Mixing,
    Regular,
    FastMixingEnv,
    FastRegularEnv,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::Mixing => "MIXING",
            Regime::Regular => "REGULAR",
            Regime::FastMixingEnv => "FAST_MIXING_ENV",
            Regime::FastRegularEnv => "FAST_REGULAR_ENV",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Regime {
    type Err = EchoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MIXING" => Ok(Regime::Mixing),
            "REGULAR" => Ok(Regime::Regular),
            "FAST_MIXING_ENV" => Ok(Regime::FastMixingEnv),
            "FAST_REGULAR_ENV" => Ok(Regime::FastRegularEnv),
            other => invalid(format!("unknown regime {other:?}")),
        }
    }
}

/// Correlation-decay scales of the two subsystems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationScales {
    /// `None` when the normalized connected autocorrelation never settles
    /// below `1/e` within the table.
    pub sys: Option<usize>,
    pub env: Option<usize>,
}

/// First lag after which `|⟨V(t)V(0)⟩ - ⟨V(t)⟩⟨V(0)⟩|` stays below `1/e` of its
/// value at zero lag.
fn decay_scale(corr: &CMatrix, mean: &CVector) -> Option<usize> {
    let n = mean.len();
    let c0 = (corr[(0, 0)] - mean[0] * mean[0]).norm();
    if n < 2 || c0 == 0.0 {
        return None;
    }
    let env: Vec<f64> = (0..n).map(|t| (corr[(t, 0)] - mean[t] * mean[0]).norm() / c0).collect();
    let threshold = (-1.0f64).exp();
    let mut last_above = None;
    for (t, x) in env.iter().enumerate() {
        if *x >= threshold {
            last_above = Some(t);
        }
    }
    match last_above {
        Some(t) if t + 1 >= n - n / 4 => None,
        Some(t) => Some(t + 1),
        None => Some(0),
    }
}

impl CorrelationLedger {
    pub fn correlation_scales(&self) -> CorrelationScales {
        CorrelationScales {
            sys: decay_scale(&self.corr_s, &self.mean_s),
            env: decay_scale(&self.corr_e, &self.mean_e),
        }
    }
}

/// Default separation of scales required to call the environment fast.
pub const FAST_SCALE_RATIO: f64 = 5.0;

/// Guesses the regime from which subsystem correlations decay.
///
/// Neither decays: regular. Only the environment decays, or both decay with
/// the system at least `ratio` times slower: fast mixing environment. Only the
/// system decays: fast regular environment. Otherwise mixing.
pub fn classify_regime(scales: CorrelationScales, ratio: f64) -> Regime {
    match (scales.sys, scales.env) {
        (None, None) => Regime::Regular,
        (None, Some(_)) => Regime::FastMixingEnv,
        (Some(_), None) => Regime::FastRegularEnv,
        (Some(ts), Some(te)) if ts as f64 >= ratio * (te.max(1) as f64) => Regime::FastMixingEnv,
        _ => Regime::Mixing,
    }
}

/// Coefficients feeding the predicted decay curves. Only those relevant to the
/// regime are filled.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCoefficients {
    pub regime: Regime,
    pub sigma: Option<Fit>,
    pub cbar_f: Option<Fit>,
    pub cbar_r: Option<Fit>,
    pub cbar_i: Option<Fit>,
    pub sigma_e: Option<Fit>,
    pub sigma_s: Option<Fit>,
    pub cbar_e: Option<Fit>,
    /// `c̄_e - avg ⟨V_e⟩²`
    pub cbar_e_connected: Option<Fit>,
    /// `avg ⟨V_s²⟩`
    pub avg_vs2: Option<f64>,
    /// `avg ⟨V_s²⟩ - avg ⟨V_s⟩²`
    pub var_vs: Option<f64>,
    pub fit_window: (usize, usize),
}

impl DecayCoefficients {
    pub fn empty(regime: Regime, fit_window: (usize, usize)) -> Self {
        DecayCoefficients {
            regime,
            sigma: None,
            cbar_f: None,
            cbar_r: None,
            cbar_i: None,
            sigma_e: None,
            sigma_s: None,
            cbar_e: None,
            cbar_e_connected: None,
            avg_vs2: None,
            var_vs: None,
            fit_window,
        }
    }

    /// Named values for the run manifest.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let fits = [
            ("sigma", &self.sigma),
            ("cbar_F", &self.cbar_f),
            ("cbar_R", &self.cbar_r),
            ("cbar_I", &self.cbar_i),
            ("sigma_e", &self.sigma_e),
            ("sigma_s", &self.sigma_s),
            ("cbar_e", &self.cbar_e),
            ("cbar_e_connected", &self.cbar_e_connected),
        ];
        for (name, fit) in fits {
            if let Some(f) = fit {
                out.push((name, f.value));
                out.push((residual_key(name), f.residual));
            }
        }
        if let Some(v) = self.avg_vs2 {
            out.push(("avg_Vs2", v));
        }
        if let Some(v) = self.var_vs {
            out.push(("var_Vs", v));
        }
        out
    }
}

fn residual_key(name: &str) -> &'static str {
    match name {
        "sigma" => "sigma.residual",
        "cbar_F" => "cbar_F.residual",
        "cbar_R" => "cbar_R.residual",
        "cbar_I" => "cbar_I.residual",
        "sigma_e" => "sigma_e.residual",
        "sigma_s" => "sigma_s.residual",
        "cbar_e" => "cbar_e.residual",
        _ => "cbar_e_connected.residual",
    }
}

/// Default windows: transport coefficients on `[10, 100]`, plateaus on `[10, 50]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindows {
    pub sigma: (usize, usize),
    pub cbar: (usize, usize),
}

impl Default for FitWindows {
    fn default() -> Self {
        FitWindows {
            sigma: (10, 100),
            cbar: (10, 50),
        }
    }
}

impl FitWindows {
    /// Shrinks the upper ends so they fit a ledger of horizon `tmax`.
    pub fn clamp_to(self, tmax: usize) -> Self {
        let clamp = |(lo, hi): (usize, usize)| (lo.min(tmax.saturating_sub(2)).max(1), hi.min(tmax.saturating_sub(1)));
        FitWindows {
            sigma: clamp(self.sigma),
            cbar: clamp(self.cbar),
        }
    }
}

/// Fits the coefficients relevant to `regime` from a ledger.
///
/// Fast-regime subsystem averages (`avg ⟨V_s²⟩`, its variance) are measured
/// time averages over the ledger horizon.
pub fn estimate_coefficients(ledger: &CorrelationLedger, regime: Regime, windows: FitWindows) -> Result<DecayCoefficients> {
    let w = windows.clamp_to(ledger.tmax);
    let mut out = DecayCoefficients::empty(regime, match regime {
        Regime::Regular => w.cbar,
        _ => w.sigma,
    });
    match regime {
        Regime::Mixing => {
            out.sigma = Some(fit_sigma(&ledger.c, w.sigma)?);
        }
        Regime::Regular => {
            out.cbar_f = Some(fit_cbar(&ledger.c, w.cbar)?);
            out.cbar_r = Some(fit_cbar(&ledger.c_minus_d(), w.cbar)?);
            out.cbar_i = Some(fit_cbar(&ledger.c_minus_d_minus_e(), w.cbar)?);
        }
        Regime::FastMixingEnv => {
            out.sigma_e = Some(fit_sigma(&ledger.env_sigma_sq(), w.sigma)?);
            let avg = ledger.sys_time_averages();
            out.avg_vs2 = Some(avg.second_moment);
            out.var_vs = Some(avg.variance());
        }
        Regime::FastRegularEnv => {
            out.sigma_s = Some(fit_sigma(&ledger.sys_sigma_sq(), w.sigma)?);
            out.cbar_e = Some(fit_cbar(&ledger.env_sigma_sq(), w.cbar)?);
            out.cbar_e_connected = Some(fit_cbar(&ledger.env_sigma_sq_connected(), w.cbar)?);
        }
    }
    Ok(out)
}

fn need(v: Option<f64>, name: &str, regime: Regime) -> Result<f64> {
    v.ok_or_else(|| EchoError::InvalidArgument(format!("{regime} prediction needs {name}")))
}

/// Linear-response decay rates `r` so that the predicted curves are
/// `F ≈ 1 - r_F t`, `F_R ≈ 1 - r_R t`, `I ≈ 1 - r_I t` (fast regimes) or the
/// corresponding exponentials.
fn fast_rates(coeffs: &DecayCoefficients, k2: f64) -> Result<(f64, f64, f64)> {
    let regime = coeffs.regime;
    match regime {
        Regime::FastMixingEnv => {
            let se = need(coeffs.sigma_e.map(|f| f.value), "sigma_e", regime)?;
            let a = need(coeffs.avg_vs2, "avg_Vs2", regime)?;
            let v = need(coeffs.var_vs, "var_Vs", regime)?;
            Ok((k2 * 2.0 * se * a, k2 * 2.0 * se * v, 2.0 * k2 * 2.0 * se * v))
        }
        Regime::FastRegularEnv => {
            let ss = need(coeffs.sigma_s.map(|f| f.value), "sigma_s", regime)?;
            let ce = need(coeffs.cbar_e.map(|f| f.value), "cbar_e", regime)?;
            let cc = need(coeffs.cbar_e_connected.map(|f| f.value), "cbar_e_connected", regime)?;
            Ok((k2 * 2.0 * ss * ce, k2 * 2.0 * ss * ce, 2.0 * k2 * 2.0 * ss * cc))
        }
        _ => unreachable!(),
    }
}

/// Predicted `F`, `F_R`, `I` for `t = 0..=tmax`.
///
/// * mixing: `F² = F_R² = I = exp(-2t/τ_m)`, `τ_m = ħ²/(2δ²σ)`
/// * regular: `F = exp(-(t/τ_r)²)`, `τ_r = ħ/(δ√c̄_F)` (and `c̄_R` for `F_R`);
///   purity only gets its quadratic onset `1 - 2(δ/ħ)² c̄_I t²`
/// * fast mixing environment: `F` exponential, `F_R` and `I` linear onset
/// * fast regular environment: `F`, `F_R` exponential with a common rate,
///   `I` linear onset
///
/// Linear onsets are clipped at zero.
pub fn predict_series(coeffs: &DecayCoefficients, cfg: &CoupledConfig, tmax: usize) -> Result<StabilitySeries> {
    let hbar = cfg.hbar();
    let k2 = (cfg.delta / hbar).powi(2);
    let ts: Vec<usize> = (0..=tmax).collect();
    let regime = coeffs.regime;
    let lin = |r: f64, t: f64| (1.0 - r * t).max(0.0);
    let (f, fr, i): (Vec<f64>, Vec<f64>, Vec<f64>) = match regime {
        Regime::Mixing => {
            let sigma = need(coeffs.sigma.map(|f| f.value), "sigma", regime)?;
            let tau = tau_mixing(hbar, cfg.delta, sigma);
            let f: Vec<f64> = ts.iter().map(|&t| (-(t as f64) / tau).exp()).collect();
            let i = ts.iter().map(|&t| (-2.0 * t as f64 / tau).exp()).collect();
            (f.clone(), f, i)
        }
        Regime::Regular => {
            let cf = need(coeffs.cbar_f.map(|f| f.value), "cbar_F", regime)?;
            let cr = need(coeffs.cbar_r.map(|f| f.value), "cbar_R", regime)?;
            let ci = need(coeffs.cbar_i.map(|f| f.value), "cbar_I", regime)?;
            let tf = tau_regular(hbar, cfg.delta, cf);
            let tr = tau_regular(hbar, cfg.delta, cr);
            (
                ts.iter().map(|&t| (-(t as f64 / tf).powi(2)).exp()).collect(),
                ts.iter().map(|&t| (-(t as f64 / tr).powi(2)).exp()).collect(),
                ts.iter().map(|&t| lin(2.0 * k2 * ci * t as f64, t as f64)).collect(),
            )
        }
        Regime::FastMixingEnv => {
            let (rf, rr, ri) = fast_rates(coeffs, k2)?;
            (
                ts.iter().map(|&t| (-rf * t as f64).exp()).collect(),
                ts.iter().map(|&t| lin(rr, t as f64)).collect(),
                ts.iter().map(|&t| lin(ri, t as f64)).collect(),
            )
        }
        Regime::FastRegularEnv => {
            let (rf, rr, ri) = fast_rates(coeffs, k2)?;
            (
                ts.iter().map(|&t| (-rf * t as f64).exp()).collect(),
                ts.iter().map(|&t| (-rr * t as f64).exp()).collect(),
                ts.iter().map(|&t| lin(ri, t as f64)).collect(),
            )
        }
    };
    Ok(StabilitySeries {
        t: ts,
        f,
        fr,
        i,
        config_hash: cfg.hash(),
    })
}

/// `τ_m = ħ² / (2δ²σ)`
pub fn tau_mixing(hbar: f64, delta: f64, sigma: f64) -> f64 {
    hbar * hbar / (2.0 * delta * delta * sigma)
}

/// `τ_r = ħ / (δ √c̄)`
pub fn tau_regular(hbar: f64, delta: f64, cbar: f64) -> f64 {
    hbar / (delta * cbar.sqrt())
}

/// Per-step change of the reduced density matrix under
/// `dρ/dt = -κ [V, [V, ρ]]`, `κ = δ²σ_e/ħ²`, over one unit of time.
///
/// In the eigenbasis of `V` the double commutator is diagonal:
/// `ρ_kl → ρ_kl exp(-κ (v_k - v_l)²)`, so each step is integrated exactly.
fn dephase(rho: &CMatrix, eigvals: &[f64], kappa: f64) -> CMatrix {
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |k, l| {
        rho[(k, l)] * (-kappa * (eigvals[k] - eigvals[l]).powi(2)).exp()
    })
}

const MASTER_SLACK: f64 = 1e-8;

fn check_master_step(prev_purity: f64, purity: f64, trace: f64, t: usize) -> Result<()> {
    if purity > prev_purity + MASTER_SLACK {
        return Err(EchoError::IntegrationFailure(format!(
            "purity increased from {prev_purity} to {purity} at step {t}"
        )));
    }
    if (trace - 1.0).abs() > MASTER_SLACK {
        return Err(EchoError::IntegrationFailure(format!("trace drifted to {trace} at step {t}")));
    }
    Ok(())
}

fn frob2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Integrates the fast-environment master equation with one exact step per
/// kick, using `vs_series[t]` as the interaction-picture `V_s(t)`.
///
/// Returns `ρ(0), ρ(1), …, ρ(len)`.
pub fn master_equation_evolve(
    vs_series: &[CMatrix],
    sigma_e: f64,
    delta: f64,
    hbar: f64,
    rho0: &ReducedDensity,
) -> Result<Vec<ReducedDensity>> {
    let kappa = delta * delta * sigma_e / (hbar * hbar);
    let n = rho0.dim();
    let mut out = Vec::with_capacity(vs_series.len() + 1);
    out.push(rho0.clone());
    let mut rho = rho0.matrix.clone();
    let mut prev = frob2(&rho);
    for (t, v) in vs_series.iter().enumerate() {
        if v.shape() != (n, n) {
            return invalid(format!("V_s({t}) has shape {:?}, expected {n}x{n}", v.shape()));
        }
        if kappa != 0.0 {
            let herm = (v + v.adjoint()) * C64::from(0.5);
            let eig = SymmetricEigen::new(herm);
            let w = &eig.eigenvectors;
            let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            let in_basis = complex_mul(&complex_mul(&w.adjoint(), &rho), w);
            rho = complex_mul(&complex_mul(w, &dephase(&in_basis, &vals, kappa)), &w.adjoint());
        }
        let p = frob2(&rho);
        check_master_step(prev, p, rho.trace().re, t)?;
        prev = p;
        out.push(ReducedDensity { matrix: rho.clone() });
    }
    Ok(out)
}

/// Purity and trace along a master-equation run.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterRun {
    pub purity: Vec<f64>,
    pub trace: Vec<f64>,
}

/// Master equation for `V_s(t) = U_s^{-t} V_s U_s^t` with `V_s` diagonal.
///
/// Works in the frame `σ(t) = U_s^t ρ(t) U_s^{-t}`, where the dissipator uses
/// the fixed diagonal `V_s` and the frame advances by one kick per step. Purity
/// and trace are frame independent.
pub fn master_equation_kicked(
    top: &TopPropagator,
    v_diag: &[f64],
    sigma_e: f64,
    delta: f64,
    hbar: f64,
    rho0: &ReducedDensity,
    tmax: usize,
) -> Result<MasterRun> {
    let n = rho0.dim();
    if v_diag.len() != n || top.torsion().len() != n {
        return invalid("master equation dimensions do not agree");
    }
    let kappa = delta * delta * sigma_e / (hbar * hbar);
    let d = top.torsion();
    let mut sigma = rho0.matrix.clone();
    let mut run = MasterRun {
        purity: vec![frob2(&sigma)],
        trace: vec![sigma.trace().re],
    };
    for t in 0..tmax {
        let damped = dephase(&sigma, v_diag, kappa);
        // U σ U† with U = R D
        let phased = CMatrix::from_fn(n, n, |k, l| d[k] * damped[(k, l)] * d[l].conj());
        let left = real_left_mul(top.rotation(), &phased);
        sigma = real_right_mul(&left, top.rotation_transpose());
        let p = frob2(&sigma);
        let tr = sigma.trace().re;
        check_master_step(run.purity[t], p, tr, t)?;
        run.purity.push(p);
        run.trace.push(tr);
    }
    Ok(run)
}
