//! Parameter sets for the four dynamical regimes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::echo::{CoupledConfig, Perturbation};
use crate::error::{invalid, EchoError, Result};
use crate::response::Regime;
use crate::spin::{CoherentSpec, Spin, TopParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PresetName {
    Mixing,
    Regular,
    FastMixingEnv,
    FastRegularEnv,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Mixing,
        PresetName::Regular,
        PresetName::FastMixingEnv,
        PresetName::FastRegularEnv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Mixing => "mixing",
            PresetName::Regular => "regular",
            PresetName::FastMixingEnv => "fast_mixing_env",
            PresetName::FastRegularEnv => "fast_regular_env",
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            PresetName::Mixing => Regime::Mixing,
            PresetName::Regular => Regime::Regular,
            PresetName::FastMixingEnv => Regime::FastMixingEnv,
            PresetName::FastRegularEnv => Regime::FastRegularEnv,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = EchoError;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| EchoError::InvalidArgument(format!("unknown preset {s:?}")))
    }
}

/// A named configuration together with the decay law it is expected to follow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimePreset {
    pub name: PresetName,
    pub config: CoupledConfig,
    pub expected_law: Regime,
    /// Horizon of the correlation tables. Independent of `config.tmax`
    /// because building the tables costs `O(T²)` kicks.
    pub ledger_tmax: usize,
}

/// Overridable knobs of a preset run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub j: Option<u32>,
    pub delta: Option<f64>,
    pub tmax: Option<usize>,
}

pub const DEFAULT_LEDGER_TMAX: usize = 200;

fn angles_sys() -> CoherentSpec {
    CoherentSpec::new(PI / 3f64.sqrt(), PI / 2f64.sqrt())
}

fn top(alpha: f64, gamma: f64, j: u32) -> TopParams {
    TopParams {
        alpha,
        gamma,
        spin: Spin::from_twice(2 * j).expect("preset spins are positive"),
    }
}

/// Default horizon: long enough for decay to saturate.
pub fn default_tmax(name: PresetName, delta: f64) -> usize {
    match name {
        PresetName::Mixing => 2000,
        // 200 kicks at δ = 5e-3, scaled with the Gaussian time 1/δ
        PresetName::Regular => ((1.0 / delta).round() as usize).max(1),
        PresetName::FastMixingEnv | PresetName::FastRegularEnv => 5000,
    }
}

impl RegimePreset {
    /// The registry entry with its stated parameters (`J = 200`).
    pub fn get(name: PresetName) -> Self {
        let j = 200;
        let (sys, env, v_sys, v_env, delta, init_env) = match name {
            PresetName::Mixing => (
                top(30.0, PI / 2.1, j),
                top(30.0, PI / 2.1, j),
                Perturbation::JzOverJ,
                Perturbation::JzOverJ,
                8e-4,
                angles_sys(),
            ),
            PresetName::Regular => (
                top(0.0, PI / 2.1, j),
                top(0.0, PI / 2.1, j),
                Perturbation::JzOverJ,
                Perturbation::JzOverJ,
                5e-3,
                CoherentSpec::new(PI / 3f64.sqrt(), 3.0 * PI / 7f64.sqrt()),
            ),
            PresetName::FastMixingEnv => (
                top(0.0, PI / 50.0, j),
                top(30.0, PI / 2.1, j),
                Perturbation::JzOverJ,
                Perturbation::JzOverJ,
                1.5e-3,
                angles_sys(),
            ),
            PresetName::FastRegularEnv => (
                top(30.0, PI / 7.0, j),
                top(0.0, PI / 2.1, j),
                Perturbation::JzOverJ,
                Perturbation::Jz2OverJ2,
                6e-4,
                angles_sys(),
            ),
        };
        RegimePreset {
            name,
            config: CoupledConfig {
                sys,
                env,
                v_sys,
                v_env,
                delta,
                init_sys: angles_sys(),
                init_env,
                tmax: default_tmax(name, delta),
            },
            expected_law: name.regime(),
            ledger_tmax: DEFAULT_LEDGER_TMAX,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::get(name.parse()?))
    }

    /// Applies overrides. Changing `J` or `δ` without an explicit `tmax`
    /// recomputes the default horizon.
    pub fn with_overrides(mut self, o: Overrides) -> Result<Self> {
        if let Some(j) = o.j {
            if j == 0 {
                return invalid("J must be at least 1");
            }
            self.config.sys.spin = Spin::integer(j)?;
            self.config.env.spin = Spin::integer(j)?;
        }
        if let Some(d) = o.delta {
            if !(d.is_finite() && d >= 0.0) {
                return invalid(format!("coupling strength must be finite and ≥ 0, got {d}"));
            }
            self.config.delta = d;
            self.config.tmax = default_tmax(self.name, if d > 0.0 { d } else { 1.0 });
        }
        if let Some(t) = o.tmax {
            if t < 1 {
                return invalid("tmax must be at least 1");
            }
            self.config.tmax = t;
        }
        self.config.validate()?;
        Ok(self)
    }

    /// Ledger horizon never exceeds the run horizon.
    pub fn ledger_config(&self) -> CoupledConfig {
        self.config.with_tmax(self.ledger_tmax.min(self.config.tmax.max(2)))
    }
}
