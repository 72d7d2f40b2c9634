//! Level-crossing decay times.

use crate::echo::StabilitySeries;
use crate::error::{invalid, Result};

pub const INTERPOLATION: &str = "log-linear";

/// Times at which `F²`, `F_R²` and `I` first fall below `level`.
#[derive(Clone, Debug, PartialEq)]
pub struct TauRecord {
    pub delta: f64,
    pub j: f64,
    pub tau_f: Option<f64>,
    pub tau_fr: Option<f64>,
    pub tau_i: Option<f64>,
    pub level: f64,
    pub method: &'static str,
}

/// First downward crossing of `level`, interpolating `ln x` linearly between
/// neighbouring integer times. `None` if the series stays at or above it.
pub fn crossing_time(xs: &[f64], level: f64) -> Option<f64> {
    if xs.first().map_or(true, |&x| x < level) {
        return xs.first().map(|_| 0.0);
    }
    let k = xs.iter().position(|&x| x < level)?;
    let (a, b) = (xs[k - 1], xs[k]);
    let frac = if b > 0.0 && a > 0.0 {
        (a.ln() - level.ln()) / (a.ln() - b.ln())
    } else {
        (a - level) / (a - b)
    };
    Some((k - 1) as f64 + frac)
}

pub fn extract_tau(series: &StabilitySeries, level: f64, delta: f64, j: f64) -> Result<TauRecord> {
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("level {level} outside (0, 1)"));
    }
    let offset = series.t.first().map_or(0.0, |&t0| t0 as f64);
    let shift = |x: Option<f64>| x.map(|v| v + offset);
    Ok(TauRecord {
        delta,
        j,
        tau_f: shift(crossing_time(&series.f2(), level)),
        tau_fr: shift(crossing_time(&series.fr2(), level)),
        tau_i: shift(crossing_time(&series.i, level)),
        level,
        method: INTERPOLATION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f2: impl Fn(f64) -> f64, n: usize) -> StabilitySeries {
        let f: Vec<f64> = (0..n).map(|t| f2(t as f64).sqrt()).collect();
        StabilitySeries {
            t: (0..n).collect(),
            f: f.clone(),
            fr: f,
            i: (0..n).map(|t| f2(t as f64)).collect(),
            config_hash: String::new(),
        }
    }

    #[test]
    fn exponential_crossing() {
        let s = series(|t| (-t / 5.0).exp(), 40);
        let r = extract_tau(&s, (-1.0f64).exp(), 0.0, 1.0).unwrap();
        assert!((r.tau_f.unwrap() - 5.0).abs() < 1e-12);
        assert!((r.tau_i.unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_crossing() {
        let tau_r: f64 = 23.0;
        let s = series(|t| (-2.0 * (t / tau_r).powi(2)).exp(), 60);
        let r = extract_tau(&s, 0.37, 0.0, 1.0).unwrap();
        let exact = tau_r * (-(0.37f64).ln() / 2.0).sqrt();
        assert!((r.tau_f.unwrap() - exact).abs() < 0.05);
        // 0.37 is close to 1/e, so τ ≈ τ_r/√2
        assert!((r.tau_f.unwrap() - tau_r / 2f64.sqrt()).abs() < 0.1);
    }

    #[test]
    fn never_crossing_is_absent() {
        let s = series(|t| 1.0 - 1e-3 * t, 50);
        let r = extract_tau(&s, 0.37, 0.0, 1.0).unwrap();
        assert_eq!((r.tau_f, r.tau_fr, r.tau_i), (None, None, None));
        assert!(extract_tau(&s, 1.0, 0.0, 1.0).is_err());
        assert!(extract_tau(&s, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_after_crossing_falls_back_to_linear() {
        assert_eq!(crossing_time(&[1.0, 0.5, 0.0], 0.25), Some(1.5));
    }
}
