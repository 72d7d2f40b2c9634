//! CSV writers and readers for series, ledgers and decay times.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::echo::StabilitySeries;
use crate::error::{EchoError, Result};
use crate::response::CorrelationLedger;

use super::tau::TauRecord;

pub const SERIES_HEADER: &str = "t,F,F2,FR,FR2,I,F2_pred,FR2_pred,I_pred";
pub const LEDGER_HEADER: &str = "t,C,CmD,CmDmE,C_over_2t,CmD_over_2t,CmDmE_over_2t";
pub const TAU_HEADER: &str = "delta,J,level,tau_F,tau_FR,tau_I,tau_F_pred,tau_FR_pred,tau_I_pred,method";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), num)
}

pub fn series_csv(series: &StabilitySeries, pred: Option<&StabilitySeries>) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for k in 0..series.len() {
        let (f, fr, i) = (series.f[k], series.fr[k], series.i[k]);
        let p = |sel: fn(&StabilitySeries, usize) -> f64| pred.filter(|p| k < p.len()).map(|p| sel(p, k));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            series.t[k],
            num(f),
            num(f * f),
            num(fr),
            num(fr * fr),
            num(i),
            opt(p(|p, k| p.f[k] * p.f[k])),
            opt(p(|p, k| p.fr[k] * p.fr[k])),
            opt(p(|p, k| p.i[k])),
        );
    }
    out
}

pub fn ledger_csv(ledger: &CorrelationLedger) -> String {
    let cmd = ledger.c_minus_d();
    let cmde = ledger.c_minus_d_minus_e();
    let mut out = String::from(LEDGER_HEADER);
    out.push('\n');
    for t in 0..=ledger.tmax {
        let per = |x: f64| if t == 0 { None } else { Some(x / (2.0 * t as f64)) };
        let _ = writeln!(
            out,
            "{t},{},{},{},{},{},{}",
            num(ledger.c[t]),
            num(cmd[t]),
            num(cmde[t]),
            opt(per(ledger.c[t])),
            opt(per(cmd[t])),
            opt(per(cmde[t])),
        );
    }
    out
}

/// A measured decay-time record with the matching predicted one.
#[derive(Clone, Debug, PartialEq)]
pub struct TauRow {
    pub measured: TauRecord,
    pub predicted: Option<TauRecord>,
}

pub fn tau_csv(rows: &[TauRow]) -> String {
    let mut out = String::from(TAU_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.measured;
        let p = r.predicted.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            num(m.delta),
            m.j,
            m.level,
            opt(m.tau_f),
            opt(m.tau_fr),
            opt(m.tau_i),
            opt(p.and_then(|p| p.tau_f)),
            opt(p.and_then(|p| p.tau_fr)),
            opt(p.and_then(|p| p.tau_i)),
            m.method,
        );
    }
    out
}

pub fn write_series_csv(path: &Path, series: &StabilitySeries, pred: Option<&StabilitySeries>) -> Result<()> {
    fs::write(path, series_csv(series, pred))?;
    Ok(())
}

pub fn write_ledger_csv(path: &Path, ledger: &CorrelationLedger) -> Result<()> {
    fs::write(path, ledger_csv(ledger))?;
    Ok(())
}

fn bad(msg: String) -> EchoError {
    EchoError::InvalidArgument(msg)
}

/// Reads the measured columns of a `series.csv`. Only `t`, `F`, `FR` and `I`
/// are used.
pub fn read_series_csv(text: &str) -> Result<StabilitySeries> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty series file".into()))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("series file has no {name} column")))
    };
    let (ct, cf, cfr, ci) = (col("t")?, col("F")?, col("FR")?, col("I")?);
    let mut s = StabilitySeries {
        t: Vec::new(),
        f: Vec::new(),
        fr: Vec::new(),
        i: Vec::new(),
        config_hash: String::new(),
    };
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| -> Result<&str> {
            cells.get(c).copied().ok_or_else(|| bad(format!("row {} is short", n + 2)))
        };
        let float = |c: usize| -> Result<f64> {
            let raw = get(c)?;
            raw.parse().map_err(|_| bad(format!("row {}: {raw:?} is not a number", n + 2)))
        };
        let t: usize = get(ct)?.parse().map_err(|_| bad(format!("row {}: bad time", n + 2)))?;
        if s.t.last().is_some_and(|&prev| t != prev + 1) {
            return Err(bad(format!("row {}: times must be consecutive", n + 2)));
        }
        s.t.push(t);
        s.f.push(float(cf)?);
        s.fr.push(float(cfr)?);
        s.i.push(float(ci)?);
    }
    if s.t.is_empty() {
        return Err(bad("series file has no rows".into()));
    }
    Ok(s)
}
