//! Fixed sinusoidal position encodings for hidden neurons.

use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanMode {
    #[default]
    Off,
    Additive,
    Multiplicative,
}

impl PanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PanMode::Off => "off",
            PanMode::Additive => "additive",
            PanMode::Multiplicative => "multiplicative",
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PanMode::Off),
            1 => Some(PanMode::Additive),
            2 => Some(PanMode::Multiplicative),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            PanMode::Off => 0,
            PanMode::Additive => 1,
            PanMode::Multiplicative => 2,
        }
    }
}

impl std::str::FromStr for PanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(PanMode::Off),
            "additive" | "add" | "+" => Ok(PanMode::Additive),
            "multiplicative" | "mul" | "o" => Ok(PanMode::Multiplicative),
            other => Err(format!("unknown PAN mode `{other}`")),
        }
    }
}

/// How position encodings are fused into hidden neurons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanConfig {
    pub mode: PanMode,
    /// Amplitude `A`.
    pub amplitude: f64,
    /// Period `T`.
    pub period: f64,
}

impl Default for PanConfig {
    fn default() -> Self {
        Self::off()
    }
}

impl PanConfig {
    pub fn off() -> Self {
        Self {
            mode: PanMode::Off,
            amplitude: 0.0,
            period: 1.0,
        }
    }

    pub fn additive(amplitude: f64, period: f64) -> Self {
        Self {
            mode: PanMode::Additive,
            amplitude,
            period,
        }
    }

    pub fn multiplicative(amplitude: f64, period: f64) -> Self {
        Self {
            mode: PanMode::Multiplicative,
            amplitude,
            period,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(crate::Error::config(format!(
                "PAN amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(crate::Error::config(format!(
                "PAN period must be finite and > 0, got {}",
                self.period
            )));
        }
        Ok(())
    }
}

/// Encoding vector for a hidden layer of `width` neurons.
///
/// Additive: `A sin(2πTj/J)`. Multiplicative: `1 + A sin(2πTj/J)`.
/// `j` runs from 0. `Off` yields zeros; the forward pass skips fusion
/// entirely in that mode.
pub fn gen_encoding(width: usize, cfg: &PanConfig) -> Vector {
    let j_total = width as f64;
    let wave = |j: usize| {
        cfg.amplitude * (2.0 * std::f64::consts::PI * cfg.period * j as f64 / j_total).sin()
    };
    match cfg.mode {
        PanMode::Off => Vector::zeros(width),
        PanMode::Additive => Vector::new((0..width).map(wave).collect()),
        PanMode::Multiplicative => Vector::new((0..width).map(|j| 1.0 + wave(j)).collect()),
    }
}
