//! Flat `section.key = value` run configuration.
//!
//! A config file is applied on top of [`DEFAULT_CONFIG`], so it only needs
//! the keys it changes. Unknown or repeated keys are rejected. Durations are
//! integer nanoseconds and frequencies integer hertz.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::str::FromStr;

use tdd_turnaround::ensm::{ClockConfig, TimingProfile};
use tdd_turnaround::mac::ProtocolDeadline;
use tdd_turnaround::rf::{Band, FilterSettings, RfModelParams};
use tdd_turnaround::sim::{parse_schedule, Command, TraceWindow};
use tdd_turnaround::spi::{LoDividerConfig, LoDividerEntry};
use tdd_turnaround::time::{TimeSpan, Timestamp};

/// The configuration every run starts from; `config --dump` prints it.
pub const DEFAULT_CONFIG: &str = include_str!("default.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected table, csv, json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSettings {
    pub band: Band,
    pub window: TraceWindow,
    /// `None` infers the starting LO state from the schedule.
    pub initial_lo: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub clocks: ClockConfig,
    pub profile: TimingProfile,
    pub rf: RfModelParams,
    pub lo_divider: LoDividerConfig,
    pub schedule: Vec<Command>,
    pub trace: TraceSettings,
    pub noise: FilterSettings,
    pub deadlines: Vec<ProtocolDeadline>,
    pub format: Format,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{origin}:{line}: {msg}")]
pub struct ConfigError {
    pub origin: String,
    pub line: usize,
    pub msg: String,
}

/// Raw entries keyed by name, remembering where each came from.
type Entries = BTreeMap<String, (String, String, usize)>;

fn parse_entries(text: &str, origin: &str, entries: &mut Entries) -> Result<(), ConfigError> {
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ConfigError {
            origin: origin.to_owned(),
            line: i + 1,
            msg,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        let key = key.trim().to_owned();
        if !seen.insert(key.clone()) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        entries.insert(key, (value.trim().to_owned(), origin.to_owned(), i + 1));
    }
    Ok(())
}

struct Reader {
    entries: Entries,
    used: HashSet<String>,
}

impl Reader {
    fn raw(&mut self, key: &str) -> Option<(String, String, usize)> {
        self.used.insert(key.to_owned());
        self.entries.get(key).cloned()
    }

    fn get<T>(&mut self, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let (value, origin, line) = self.raw(key).ok_or_else(|| ConfigError {
            origin: "config".into(),
            line: 0,
            msg: format!("missing key {key:?}"),
        })?;
        value.parse().map_err(|e| ConfigError {
            origin,
            line,
            msg: format!("{key}: {e}"),
        })
    }

    fn get_with<T>(
        &mut self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<T, ConfigError> {
        let (value, origin, line) = self.raw(key).ok_or_else(|| ConfigError {
            origin: "config".into(),
            line: 0,
            msg: format!("missing key {key:?}"),
        })?;
        parse(&value).map_err(|msg| ConfigError {
            origin,
            line,
            msg: format!("{key}: {msg}"),
        })
    }

    fn optional_u16(&mut self, key: &str) -> Result<Option<u16>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.get_with(key, parse_int::<u16>).map(Some),
        }
    }
}

fn parse_int<T: TryFrom<u64>>(s: &str) -> Result<T, String> {
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("bad integer {s:?}: {e}"))?;
    T::try_from(v).map_err(|_| format!("{s} out of range"))
}

fn parse_initial_lo(s: &str) -> Result<Option<bool>, String> {
    match s {
        "auto" => Ok(None),
        "on" => Ok(Some(true)),
        "off" => Ok(Some(false)),
        other => Err(format!("expected auto, on or off, got {other:?}")),
    }
}

fn lo_entry(r: &mut Reader, chain: &str) -> Result<Option<LoDividerEntry>, ConfigError> {
    let reg = r.optional_u16(&format!("spi.{chain}.register"))?;
    let on = r.optional_u16(&format!("spi.{chain}.on_value"))?;
    let off = r.optional_u16(&format!("spi.{chain}.off_value"))?;
    let err = |msg: String| ConfigError {
        origin: "config".into(),
        line: 0,
        msg,
    };
    match (reg, on, off) {
        (None, None, None) => Ok(None),
        (Some(register), Some(on), Some(off)) => {
            if register > 0x3FF {
                return Err(err(format!("spi.{chain}.register {register:#x} exceeds 10 bits")));
            }
            let byte = |v: u16, k: &str| {
                u8::try_from(v).map_err(|_| err(format!("spi.{chain}.{k} {v:#x} exceeds 8 bits")))
            };
            Ok(Some(LoDividerEntry {
                register,
                on_value: byte(on, "on_value")?,
                off_value: byte(off, "off_value")?,
            }))
        }
        _ => Err(err(format!(
            "spi.{chain} needs register, on_value and off_value together"
        ))),
    }
}

impl RunConfig {
    pub fn from_default() -> Self {
        Self::load(None).expect("embedded default config is valid")
    }

    /// Defaults overlaid with `overlay` (text plus a name for messages).
    pub fn load(overlay: Option<(&str, &str)>) -> Result<Self, ConfigError> {
        let mut entries = Entries::new();
        parse_entries(DEFAULT_CONFIG, "<default>", &mut entries)?;
        let default_keys: HashSet<String> = entries.keys().cloned().collect();
        let mut custom_deadlines = Vec::new();
        if let Some((text, origin)) = overlay {
            let mut extra = Entries::new();
            parse_entries(text, origin, &mut extra)?;
            for (key, v) in extra {
                let optional = key.starts_with("spi.rx_lo.") || key.starts_with("spi.tx_lo.");
                if let Some(name) = key.strip_prefix("deadlines.custom.") {
                    custom_deadlines.push((name.to_owned(), v));
                } else if default_keys.contains(&key) || optional {
                    entries.insert(key, v);
                } else {
                    return Err(ConfigError {
                        origin: v.1,
                        line: v.2,
                        msg: format!("unknown key {key:?}"),
                    });
                }
            }
        }

        let mut r = Reader {
            entries,
            used: HashSet::new(),
        };
        let clocks = ClockConfig {
            ref_clock_hz: r.get("clocks.ref_clock_hz")?,
            adc_clock_hz: r.get("clocks.adc_clock_hz")?,
            spi_clock_hz: r.get("clocks.spi_clock_hz")?,
            allow_spi_overclock: r.get("clocks.allow_spi_overclock")?,
        };
        let profile = TimingProfile {
            vco_cal_ns: r.get("profile.vco_cal_ns")?,
            pll_lock_ns: r.get("profile.pll_lock_ns")?,
            dac_powerup_ns: r.get("profile.dac_powerup_ns")?,
            flush_cycles: r.get("profile.flush_cycles")?,
            lo_div_powerup_ns: r.get("profile.lo_div_powerup_ns")?,
            lo_div_powerdown_ns: r.get("profile.lo_div_powerdown_ns")?,
        };
        let mut rf = RfModelParams {
            packet_delta_db: r.get("rf.packet_delta_db")?,
            agc_gain_db: r.get("rf.agc_gain_db")?,
            ..RfModelParams::default()
        };
        for band in Band::ALL {
            *rf.lo_on_delta_db.get_mut(band) = r.get(&format!("rf.lo_on_delta_db.{band}"))?;
            *rf.base_rx_floor_db.get_mut(band) = r.get(&format!("rf.base_rx_floor_db.{band}"))?;
            *rf.fdd_rx_floor_db.get_mut(band) = r.get(&format!("rf.fdd_rx_floor_db.{band}"))?;
            *rf.locontrol_rx_floor_db.get_mut(band) =
                r.get(&format!("rf.locontrol_rx_floor_db.{band}"))?;
        }
        let lo_divider = LoDividerConfig {
            tx: lo_entry(&mut r, "tx_lo")?,
            rx: lo_entry(&mut r, "rx_lo")?,
        };
        let schedule = r.get_with("schedule.commands", parse_schedule)?;
        let initial_lo = r.get_with("schedule.initial_lo", parse_initial_lo)?;
        let start: i64 = r.get("trace.window_start_ns")?;
        let end: i64 = r.get("trace.window_end_ns")?;
        let trace = TraceSettings {
            band: r.get("trace.band")?,
            window: TraceWindow {
                start: Timestamp::from_ns(start),
                end: Timestamp::from_ns(end),
                interval: TimeSpan::from_ns(r.get("trace.interval_ns")?),
                settling: TimeSpan::from_ns(r.get("trace.settling_ns")?),
            },
            initial_lo,
        };
        let noise = FilterSettings {
            threshold_db: r.get("noise.threshold_db")?,
            guard_samples: r.get("noise.guard_samples")?,
            smoothing: r.get("noise.smoothing")?,
        };

        let mut known = ProtocolDeadline::builtins();
        for (name, (value, origin, line)) in custom_deadlines {
            let err = |msg: String| ConfigError {
                origin: origin.clone(),
                line,
                msg,
            };
            let ns: u64 = value
                .parse()
                .map_err(|e| err(format!("deadlines.custom.{name}: {e}")))?;
            let d = ProtocolDeadline::new(name.clone(), ns, "config")
                .map_err(|e| err(e.to_string()))?;
            known.retain(|k| k.name != name);
            known.push(d);
        }
        let deadlines = r.get_with("deadlines.use", |s| {
            s.split(',')
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(|n| {
                    known
                        .iter()
                        .find(|d| d.name == n)
                        .cloned()
                        .ok_or_else(|| format!("unknown deadline {n:?}"))
                })
                .collect::<Result<Vec<_>, _>>()
        })?;

        let format = r.get("output.format")?;
        let output = r.get_with("output.path", |s| {
            Ok((!s.is_empty()).then(|| PathBuf::from(s)))
        })?;

        let config = RunConfig {
            clocks,
            profile,
            rf,
            lo_divider,
            schedule,
            trace,
            noise,
            deadlines,
            format,
            output,
        };
        debug_assert!(r.entries.keys().all(|k| r.used.contains(k)));
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError {
            origin: "config".into(),
            line: 0,
            msg,
        };
        self.clocks.validate().map_err(|e| err(e.to_string()))?;
        self.rf.validate().map_err(|e| err(e.to_string()))?;
        if self.trace.window.interval == TimeSpan::ZERO {
            return Err(err("trace.interval_ns must be positive".into()));
        }
        if self.trace.window.end < self.trace.window.start {
            return Err(err("trace.window_end_ns precedes trace.window_start_ns".into()));
        }
        if self.noise.smoothing == 0 {
            return Err(err("noise.smoothing must be at least 1".into()));
        }
        if self.noise.threshold_db.is_nan() || self.noise.threshold_db <= 0.0 {
            return Err(err("noise.threshold_db must be positive".into()));
        }
        Ok(())
    }
}
