//! Line-oriented scenario files: `section.key = value`, `#` comments, one
//! key per line, units fixed by the key name, no unit suffixes.
//!
//! ```text
//! clock.f_s_hz = 10e3
//! clock.alpha = 0.1
//! adc.c_unit_f = 12e-9
//! eh.c_eh_f = 100e-6
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::clocking::ClockPlan;
use crate::eh_branch::{EhConfig, RectifierModel};
use crate::engine::{MetricSet, Scenario};
use crate::frontend::SwitchModel;
use crate::sar_adc::AdcConfig;
use crate::signal::{PwlStimulus, SineSource, Stimulus};

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "signal.amplitude_v",
    "signal.frequency_hz",
    "signal.m_cycles",
    "signal.phase_rad",
    "signal.dc_offset_v",
    "signal.source_resistance_ohm",
    "signal.p_in_w",
    "signal.stimulus_csv",
    "clock.f_s_hz",
    "clock.alpha",
    "clock.n_periods",
    "switch.s1.type",
    "switch.s1.r_on",
    "switch.s1.k_gain",
    "switch.s1.v_th",
    "switch.s1.v_gate",
    "switch.s2.type",
    "switch.s2.r_on",
    "switch.s2.k_gain",
    "switch.s2.v_th",
    "switch.s2.v_gate",
    "adc.n_bits",
    "adc.v_ref",
    "adc.c_unit_f",
    "eh.c_eh_f",
    "eh.v_drop_v",
    "eh.r_series_ohm",
    "eh.steady_tol",
    "engine.n_sub",
    "engine.n_fft",
    "engine.max_periods",
    "engine.settling_factor_k",
    "engine.seed",
    "output.dir",
    "output.metrics",
    "output.trace_stride",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trace_stride: usize,
}

/// A fully parsed and validated scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario<f64>,
    pub output: OutputConfig,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::at(line, format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("missing value for {key}")));
            }
            if let Some((prev, _)) = map.insert(key.to_string(), (line, value.to_string())) {
                return Err(ConfigError::at(line, format!("duplicate key {key} (first on line {prev})")));
            }
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::at(line, format!("{key}: not a finite number: {v:?}")))
            })
            .transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?
            .ok_or_else(|| ConfigError::general(format!("missing required key {key}")))
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| {
                v.parse::<usize>()
                    .map_err(|_| ConfigError::at(line, format!("{key}: not a nonnegative integer: {v:?}")))
            })
            .transpose()
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.usize_opt(key)?.unwrap_or(default))
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.raw(key).map(|(l, _)| l)
    }

    /// Reports a problem against the line of `key` when it was given.
    fn err(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError {
            line: self.line_of(key),
            message: format!("{key}: {msg}"),
        }
    }

    /// `None` means S1 should be auto-sized.
    fn switch(&self, name: &str, default_auto: bool) -> Result<Option<SwitchModel<f64>>, ConfigError> {
        let key = |k: &str| format!("switch.{name}.{k}");
        let kind = self
            .raw(&key("type"))
            .map(|(_, v)| v)
            .unwrap_or(if default_auto { "auto" } else { "ideal" });
        let model = match kind {
            "auto" if name == "s1" => return Ok(None),
            "ideal" => SwitchModel::Ideal,
            "constant_r" => SwitchModel::ConstantR {
                r_on: self.f64_req(&key("r_on"))?,
            },
            "pass_transistor" => SwitchModel::PassTransistor {
                k_gain: self.f64_req(&key("k_gain"))?,
                v_th: self.f64_req(&key("v_th"))?,
                v_gate: self.f64_or(&key("v_gate"), 0.0)?,
            },
            other => {
                return Err(self.err(
                    &key("type"),
                    format!("unknown switch type {other:?} (auto, ideal, constant_r, pass_transistor)"),
                ))
            }
        };
        model.validate().map_err(|e| self.err(&key("type"), e))?;
        Ok(Some(model))
    }
}

impl RunConfig {
    /// Parses `text`. A relative `signal.stimulus_csv` resolves against
    /// `base_dir`; `output.dir` is taken as given.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let e = Entries::parse(text)?;

        let n_fft = e.usize_or("engine.n_fft", 4096)?;
        let f_s = e.f64_req("clock.f_s_hz")?;
        let clock = ClockPlan::new(
            f_s,
            e.f64_or("clock.alpha", 0.1)?,
            e.usize_or("clock.n_periods", n_fft.max(1))?,
        )
        .map_err(|err| ConfigError::general(format!("clock: {err}")))?;

        let metrics = match e.raw("output.metrics") {
            None => MetricSet::default(),
            Some((line, v)) => {
                let mut m = MetricSet { adc: false, eh: false };
                for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match item {
                        "adc" => m.adc = true,
                        "eh" => m.eh = true,
                        other => {
                            return Err(ConfigError::at(line, format!("unknown metric {other:?} (adc, eh)")))
                        }
                    }
                }
                m
            }
        };

        let p_in_override = e.f64_opt("signal.p_in_w")?;
        let mut coherent_cycles = e.usize_opt("signal.m_cycles")?;
        let source = if let Some((_, path)) = e.raw("signal.stimulus_csv") {
            let path = base_dir.join(path);
            coherent_cycles = None;
            Stimulus::Table(
                PwlStimulus::from_csv_path(&path).map_err(|err| e.err("signal.stimulus_csv", err))?,
            )
        } else {
            let frequency = match (e.f64_opt("signal.frequency_hz")?, coherent_cycles) {
                (Some(_), Some(_)) => {
                    return Err(e.err("signal.frequency_hz", "give either frequency_hz or m_cycles, not both"))
                }
                (Some(f), None) => f,
                (None, Some(m)) => crate::signal::coherent_frequency(f_s, n_fft, m)
                    .map_err(|err| e.err("signal.m_cycles", err))?,
                (None, None) => {
                    return Err(ConfigError::general(
                        "missing signal.frequency_hz or signal.m_cycles",
                    ))
                }
            };
            Stimulus::Sine(
                SineSource::new(
                    e.f64_or("signal.amplitude_v", 0.4)?,
                    frequency,
                    e.f64_or("signal.phase_rad", 0.0)?,
                    e.f64_or("signal.dc_offset_v", 0.0)?,
                    e.f64_or("signal.source_resistance_ohm", 50.0)?,
                )
                .map_err(|err| ConfigError::general(format!("signal: {err}")))?,
            )
        };

        let s1 = e.switch("s1", true)?;
        let adc = AdcConfig::new(
            e.usize_or("adc.n_bits", 8)? as u32,
            e.f64_or("adc.v_ref", 0.4)?,
            e.f64_req("adc.c_unit_f")?,
            s1.unwrap_or(SwitchModel::Ideal),
        )
        .map_err(|err| ConfigError::general(format!("adc: {err}")))?;

        let eh = EhConfig {
            c_eh: e.f64_req("eh.c_eh_f")?,
            rectifier: RectifierModel {
                v_drop: e.f64_or("eh.v_drop_v", 0.0)?,
                r_series: e.f64_or("eh.r_series_ohm", 1.0)?,
            },
            s2: e.switch("s2", false)?.unwrap_or(SwitchModel::Ideal),
        };
        eh.validate()
            .map_err(|err| ConfigError::general(format!("eh: {err}")))?;

        let scenario = Scenario {
            source,
            coherent_cycles,
            p_in_override,
            clock,
            adc,
            auto_r_on: s1.is_none(),
            eh,
            n_sub: e.usize_or("engine.n_sub", 64)?,
            n_fft,
            max_periods: e.usize_or("engine.max_periods", 1 << 22)?,
            settling_factor_k: e.f64_opt("engine.settling_factor_k")?,
            steady_tol: e.f64_or("eh.steady_tol", 0.01)?,
            metrics,
            seed: e.usize_or("engine.seed", 0)? as u64,
        };
        scenario
            .resolved()
            .and_then(|sc| sc.validate())
            .map_err(|err| ConfigError::general(err.to_string()))?;

        let dir = e.raw("output.dir").map(|(_, v)| v).unwrap_or("out");
        let output = OutputConfig {
            dir: PathBuf::from(dir),
            trace_stride: e.usize_or("output.trace_stride", 1)?.max(1),
        };
        Ok(Self { scenario, output })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| ConfigError::general(format!("{}: {err}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }
}
