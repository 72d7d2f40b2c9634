//! Parameter scans over the coupling strength and the spin size.

use rayon::prelude::*;

use crate::echo::{evolve_pair, StabilitySeries};
use crate::error::{invalid, Result};
use crate::response::{correlation_sums, estimate_coefficients, predict_series, DecayCoefficients, FitWindows, Regime};

use super::output::TauRow;
use super::preset::{default_tmax, Overrides, RegimePreset};
use super::tau::{extract_tau, TauRecord};

/// Points with `τ > SATURATION_CUT · tmax` are left out of slope fits.
pub const SATURATION_CUT: f64 = 0.9;

/// Horizon multiplier for the predicted curves used to read off theory `τ`.
const PREDICTION_SPAN: usize = 20;

/// Least-squares slope of `ln τ` against `ln δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slope {
    pub value: f64,
    pub points: usize,
}

#[derive(Clone, Debug)]
pub struct DeltaScan {
    pub coefficients: DecayCoefficients,
    /// Sorted by `δ`, then by level.
    pub rows: Vec<TauRow>,
    /// Horizon of each simulated `δ`, in the order of `rows`.
    pub horizons: Vec<usize>,
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Option<Slope> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(Slope { value: sxy / sxx, points: n })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    F,
    FR,
    I,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::F, Measure::FR, Measure::I];

    pub fn name(self) -> &'static str {
        match self {
            Measure::F => "F",
            Measure::FR => "FR",
            Measure::I => "I",
        }
    }

    pub fn pick(self, r: &TauRecord) -> Option<f64> {
        match self {
            Measure::F => r.tau_f,
            Measure::FR => r.tau_fr,
            Measure::I => r.tau_i,
        }
    }
}

impl DeltaScan {
    /// Slope over the measured, non-saturated points at `level`.
    pub fn slope(&self, level: f64, m: Measure) -> Option<Slope> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .zip(&self.horizons)
            .filter(|(r, _)| r.measured.level == level)
            .filter_map(|(r, &h)| {
                let tau = m.pick(&r.measured)?;
                (tau <= SATURATION_CUT * h as f64).then_some((r.measured.delta, tau))
            })
            .collect();
        loglog_slope(&pts)
    }

    pub fn predicted_slope(&self, level: f64, m: Measure) -> Option<Slope> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.measured.level == level)
            .filter_map(|r| Some((r.measured.delta, m.pick(r.predicted.as_ref()?)?)))
            .collect();
        loglog_slope(&pts)
    }
}

/// Simulates every `δ`, extracts `τ` at each level and pairs it with the
/// crossing time of the predicted curves. The correlation ledger does not
/// depend on `δ` and is built once. Without `tmax` each point gets the
/// preset's default horizon.
pub fn delta_scan(
    preset: &RegimePreset,
    deltas: &[f64],
    levels: &[f64],
    tmax: Option<usize>,
    windows: FitWindows,
) -> Result<DeltaScan> {
    let points: Vec<(f64, usize)> = deltas
        .iter()
        .map(|&d| (d, tmax.unwrap_or_else(|| default_tmax(preset.name, d))))
        .collect();
    delta_scan_with_horizons(preset, &points, levels, windows)
}

/// [`delta_scan`] with an explicit horizon for every `(δ, tmax)` point.
pub fn delta_scan_with_horizons(
    preset: &RegimePreset,
    points: &[(f64, usize)],
    levels: &[f64],
    windows: FitWindows,
) -> Result<DeltaScan> {
    if points.is_empty() {
        return invalid("delta scan needs at least one coupling strength");
    }
    if levels.is_empty() {
        return invalid("delta scan needs at least one level");
    }
    if let Some((d, _)) = points.iter().find(|(d, _)| !(d.is_finite() && *d > 0.0)) {
        return invalid(format!("coupling strengths must be positive, got {d}"));
    }
    if points.iter().any(|(_, t)| *t < 1) {
        return invalid("scan horizons must be at least 1");
    }
    let ledger = correlation_sums(&preset.ledger_config())?;
    let coefficients = estimate_coefficients(&ledger, preset.expected_law, windows)?;
    let j = preset.config.sys.spin.value();

    let mut done: Vec<(f64, usize, Vec<TauRow>)> = points
        .par_iter()
        .map(|&(delta, horizon)| -> Result<(f64, usize, Vec<TauRow>)> {
            let cfg = preset.config.with_delta(delta).with_tmax(horizon);
            let series = evolve_pair(&cfg)?;
            let pred = predict_series(&coefficients, &cfg, horizon * PREDICTION_SPAN)?;
            let rows = levels
                .iter()
                .map(|&level| {
                    Ok(TauRow {
                        measured: extract_tau(&series, level, delta, j)?,
                        predicted: Some(extract_tau(&pred, level, delta, j)?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((delta, horizon, rows))
        })
        .collect::<Result<_>>()?;
    done.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rows = Vec::new();
    let mut horizons = Vec::new();
    for (_, h, mut rs) in done {
        rs.sort_by(|a, b| a.measured.level.total_cmp(&b.measured.level));
        horizons.extend(std::iter::repeat(h).take(rs.len()));
        rows.extend(rs);
    }
    Ok(DeltaScan { coefficients, rows, horizons })
}

#[derive(Clone, Debug)]
pub struct CollapseCurve {
    pub j: u32,
    pub delta: f64,
    pub series: StabilitySeries,
}

#[derive(Clone, Debug)]
pub struct CollapseReport {
    pub curves: Vec<CollapseCurve>,
    /// Common `δt` grid.
    pub x: Vec<f64>,
    /// Purity of each curve on the common grid, in the order of `curves`.
    pub purity: Vec<Vec<f64>>,
    /// Largest `|I_a − I_b|` over the compared part of the grid.
    pub sup_norm: f64,
    /// End of the compared part of the grid.
    pub x_cut: f64,
    pub warnings: Vec<String>,
}

/// Linear interpolation of `ys` sampled at integer times, evaluated at `t`.
fn sample(ys: &[f64], t: f64) -> f64 {
    let k = t.floor() as usize;
    if k + 1 >= ys.len() {
        return ys[ys.len() - 1];
    }
    let w = t - k as f64;
    ys[k] * (1.0 - w) + ys[k + 1] * w
}

/// Purity of the preset at each `J`, compared on the `δt` axis. The
/// comparison stops at `x_max` or where any curve first drops below
/// `floor_factor · 2/(2J+1)`, whichever comes first.
pub fn collapse_scan(
    preset: &RegimePreset,
    js: &[u32],
    x_max: f64,
    floor_factor: f64,
) -> Result<CollapseReport> {
    let mut js = js.to_vec();
    js.sort_unstable();
    js.dedup();
    if js.len() < 2 {
        return invalid("collapse needs at least two distinct values of J");
    }
    if !(x_max.is_finite() && x_max > 0.0) {
        return invalid(format!("collapse range must be positive, got {x_max}"));
    }
    let delta = preset.config.delta;
    if delta <= 0.0 {
        return invalid("collapse needs a positive coupling strength");
    }
    let mut warnings = Vec::new();
    if preset.expected_law != Regime::Regular {
        warnings.push(format!(
            "the delta*t collapse applies to the regular regime only; preset is {}",
            preset.expected_law
        ));
    }
    let tmax = (x_max / delta).ceil() as usize;
    let curves: Vec<CollapseCurve> = js
        .par_iter()
        .map(|&j| {
            let p = preset.with_overrides(Overrides {
                j: Some(j),
                tmax: Some(tmax),
                ..Default::default()
            })?;
            Ok(CollapseCurve {
                j,
                delta,
                series: evolve_pair(&p.config)?,
            })
        })
        .collect::<Result<_>>()?;

    let step = delta;
    let n = (x_max / step).floor() as usize + 1;
    let x: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let purity: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| x.iter().map(|&xx| sample(&c.series.i, xx / c.delta)).collect())
        .collect();

    let floors: Vec<f64> = curves.iter().map(|c| floor_factor * 2.0 / (2.0 * c.j as f64 + 1.0)).collect();
    let cut = (0..n)
        .find(|&k| purity.iter().zip(&floors).any(|(p, fl)| p[k] < *fl))
        .unwrap_or(n);
    let mut sup_norm: f64 = 0.0;
    for a in 0..purity.len() {
        for b in a + 1..purity.len() {
            for k in 0..cut {
                sup_norm = sup_norm.max((purity[a][k] - purity[b][k]).abs());
            }
        }
    }
    Ok(CollapseReport {
        x_cut: if cut == 0 { 0.0 } else { x[cut - 1] },
        curves,
        x,
        purity,
        sup_norm,
        warnings,
    })
}

impl CollapseReport {
    /// `x,I_J1,I_J2,...` rows on the common grid.
    pub fn csv(&self) -> String {
        let mut out = String::from("x");
        for c in &self.curves {
            out.push_str(&format!(",I_J{}", c.j));
        }
        out.push('\n');
        for (k, x) in self.x.iter().enumerate() {
            out.push_str(&format!("{x:.16e}"));
            for p in &self.purity {
                out.push_str(&format!(",{:.16e}", p[k]));
            }
            out.push('\n');
        }
        out
    }
}
