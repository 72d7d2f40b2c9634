use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::echo::{evolve_pair, fmt_f64, saturation_estimate, CoupledConfig, Saturation, StabilitySeries};
use crate::error::{invalid, EchoError, Result};
use crate::response::{
    classify_regime, closed_form_fast_mixing, closed_form_fast_regular, closed_form_regular, correlation_sums,
    estimate_coefficients, predict_series, CorrelationLedger, DecayCoefficients, FitWindows, Regime,
    FAST_SCALE_RATIO,
};
use crate::spin::{CoherentSpec, Spin, TopParams};

use super::output::{write_ledger_csv, write_series_csv};
use super::preset::{PresetName, RegimePreset};

pub const TOOL_NAME: &str = "echolab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything produced by one preset run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub preset: RegimePreset,
    pub windows: FitWindows,
    pub series: StabilitySeries,
    pub ledger: CorrelationLedger,
    pub coefficients: DecayCoefficients,
    pub prediction: StabilitySeries,
    /// Closed-form values that apply to this preset.
    pub closed_forms: Vec<(&'static str, f64)>,
    pub saturation: Option<Saturation>,
    pub classified: Regime,
    pub warnings: Vec<String>,
}

/// Closed-form coefficients that apply to the preset's regime.
pub fn closed_forms_for(preset: &RegimePreset) -> Result<Vec<(&'static str, f64)>> {
    let cfg = &preset.config;
    let j = cfg.sys.spin.value();
    let ns = cfg.init_sys.direction();
    let ne = cfg.init_env.direction();
    Ok(match preset.expected_law {
        Regime::Mixing => Vec::new(),
        Regime::Regular => {
            let p = closed_form_regular(ns, ne, j)?;
            vec![("closed.cbar_F", p.cbar_f), ("closed.cbar_R", p.cbar_r), ("closed.cbar_I", p.cbar_i)]
        }
        Regime::FastMixingEnv => {
            let (a, v) = closed_form_fast_mixing(ns[1], j);
            vec![("closed.avg_Vs2", a), ("closed.var_Vs", v)]
        }
        Regime::FastRegularEnv => {
            let (c, k) = closed_form_fast_regular(ne[1], cfg.env.spin.value());
            vec![("closed.cbar_e", c), ("closed.cbar_e_connected", k)]
        }
    })
}

fn regime_warnings(preset: &RegimePreset, ledger: &CorrelationLedger, classified: Regime) -> Vec<String> {
    let mut w = Vec::new();
    if preset.config.unequal_spins() {
        w.push("system and environment spins differ; hbar is taken from the system".to_string());
    }
    if classified != preset.expected_law {
        w.push(format!(
            "correlation scales suggest {classified}, preset expects {}",
            preset.expected_law
        ));
    }
    let check_mean = |label: &str, avg: crate::response::TimeAverages, w: &mut Vec<String>| {
        let var = avg.variance().max(0.0);
        if avg.mean.abs() > 0.05 * var.sqrt() {
            w.push(format!(
                "time-averaged {label} = {:.3e} is not small against its spread {:.3e}",
                avg.mean,
                var.sqrt()
            ));
        }
    };
    match preset.expected_law {
        Regime::FastMixingEnv => check_mean("<V_e>", ledger.env_time_averages(), &mut w),
        Regime::FastRegularEnv => check_mean("<V_s>", ledger.sys_time_averages(), &mut w),
        _ => {}
    }
    w
}

/// Runs the evolution, the correlation ledger, the fits and the prediction.
pub fn run_preset(preset: &RegimePreset, windows: FitWindows) -> Result<RunOutput> {
    let cfg = preset.config;
    cfg.validate()?;
    let (series, ledger) = rayon::join(|| evolve_pair(&cfg), || correlation_sums(&preset.ledger_config()));
    let (series, ledger) = (series?, ledger?);
    let coefficients = estimate_coefficients(&ledger, preset.expected_law, windows)?;
    let prediction = predict_series(&coefficients, &cfg, cfg.tmax)?;
    let classified = classify_regime(ledger.correlation_scales(), FAST_SCALE_RATIO);
    let warnings = regime_warnings(preset, &ledger, classified);
    Ok(RunOutput {
        preset: *preset,
        windows,
        closed_forms: closed_forms_for(preset)?,
        saturation: saturation_estimate(&series, 0.2).ok(),
        series,
        ledger,
        coefficients,
        prediction,
        classified,
        warnings,
    })
}

impl RunOutput {
    /// `key = value` lines; enough to rebuild the configuration.
    pub fn manifest(&self) -> String {
        let mut lines: Vec<(String, String)> = vec![
            ("tool".into(), TOOL_NAME.into()),
            ("version".into(), TOOL_VERSION.into()),
            ("preset".into(), self.preset.name.to_string()),
            ("regime".into(), self.preset.expected_law.to_string()),
            ("regime.classified".into(), self.classified.to_string()),
        ];
        lines.extend(self.preset.config.manifest_lines());
        lines.push(("ledger_tmax".into(), self.preset.ledger_config().tmax.to_string()));
        lines.push(("fit.sigma_window".into(), format!("{},{}", self.windows.sigma.0, self.windows.sigma.1)));
        lines.push(("fit.cbar_window".into(), format!("{},{}", self.windows.cbar.0, self.windows.cbar.1)));
        lines.push(("config_hash".into(), self.series.config_hash.clone()));
        for (k, v) in self.coefficients.entries() {
            lines.push((format!("fit.{k}"), fmt_f64(v)));
        }
        for (k, v) in &self.closed_forms {
            lines.push(((*k).to_string(), fmt_f64(*v)));
        }
        if let Some(s) = self.saturation {
            lines.push(("saturation.F2".into(), fmt_f64(s.f2)));
            lines.push(("saturation.FR2".into(), fmt_f64(s.fr2)));
            lines.push(("saturation.I".into(), fmt_f64(s.i)));
        }
        lines.push(("ledger.imag_residue".into(), fmt_f64(self.ledger.imag_residue)));
        for (n, w) in self.warnings.iter().enumerate() {
            lines.push((format!("warning.{n}"), w.clone()));
        }
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Writes `series.csv`, `ledger.csv` and `manifest.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_series_csv(&dir.join("series.csv"), &self.series, Some(&self.prediction))?;
        write_ledger_csv(&dir.join("ledger.csv"), &self.ledger)?;
        fs::write(dir.join("manifest.txt"), self.manifest())?;
        Ok(())
    }
}

pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| EchoError::InvalidArgument(format!("manifest line {} is not `key = value`", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map
        .get(key)
        .ok_or_else(|| EchoError::InvalidArgument(format!("manifest is missing {key}")))?;
    raw.parse()
        .map_err(|_| EchoError::InvalidArgument(format!("manifest value for {key} is malformed: {raw}")))
}

fn window(map: &BTreeMap<String, String>, key: &str) -> Result<(usize, usize)> {
    let raw: String = field(map, key)?;
    let (a, b) = raw
        .split_once(',')
        .ok_or_else(|| EchoError::InvalidArgument(format!("{key} must be `lo,hi`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| EchoError::InvalidArgument(format!("{key} must be `lo,hi`")))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Rebuilds the preset (with its full configuration) and fit windows from a
/// manifest.
pub fn preset_from_manifest(text: &str) -> Result<(RegimePreset, FitWindows)> {
    let map = parse_manifest(text)?;
    let name: String = field(&map, "preset")?;
    let name: PresetName = name.parse()?;
    let side = |prefix: &str| -> Result<(TopParams, crate::echo::Perturbation, CoherentSpec)> {
        let j: f64 = field(&map, &format!("{prefix}.J"))?;
        let top = TopParams::new(
            field(&map, &format!("{prefix}.alpha"))?,
            field(&map, &format!("{prefix}.gamma"))?,
            Spin::new(j)?,
        )?;
        let v: String = field(&map, &format!("{prefix}.perturbation"))?;
        let init = CoherentSpec::new(field(&map, &format!("{prefix}.theta"))?, field(&map, &format!("{prefix}.phi"))?);
        Ok((top, v.parse()?, init))
    };
    let (sys, v_sys, init_sys) = side("sys")?;
    let (env, v_env, init_env) = side("env")?;
    let config = CoupledConfig {
        sys,
        env,
        v_sys,
        v_env,
        delta: field(&map, "delta")?,
        init_sys,
        init_env,
        tmax: field(&map, "tmax")?,
    };
    config.validate()?;
    let regime: String = field(&map, "regime")?;
    let expected_law: Regime = regime.parse()?;
    if expected_law != name.regime() {
        return invalid(format!("manifest regime {expected_law} does not belong to preset {name}"));
    }
    let preset = RegimePreset {
        name,
        config,
        expected_law,
        ledger_tmax: field(&map, "ledger_tmax")?,
    };
    let windows = FitWindows {
        sigma: window(&map, "fit.sigma_window")?,
        cbar: window(&map, "fit.cbar_window")?,
    };
    if let Some(hash) = map.get("config_hash") {
        if *hash != config.hash() {
            return invalid(format!("manifest hash {hash} does not match its parameters ({})", config.hash()));
        }
    }
    Ok((preset, windows))
}
