//! Enable-state-machine modes and their turnaround budgets.
//!
//! A budget is a list of components, each tagged with a stage index.
//! Stages run one after another; components sharing a stage run in
//! parallel, so a stage costs as much as its slowest component.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::spi::{self, SpiError};
use crate::time::TimeSpan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{0} must be non-zero")]
    ZeroClock(&'static str),
    #[error(transparent)]
    Spi(#[from] SpiError),
    #[error("stored total {stored} does not match stage-law total {computed}")]
    TotalMismatch { stored: TimeSpan, computed: TimeSpan },
}

/// Clock frequencies, in hertz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClockConfig {
    pub ref_clock_hz: u64,
    pub adc_clock_hz: u64,
    pub spi_clock_hz: u64,
    /// Permit SPI clocks above the device ceiling, for what-if runs.
    pub allow_spi_overclock: bool,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            ref_clock_hz: 40_000_000,
            adc_clock_hz: 160_000_000,
            spi_clock_hz: 50_000_000,
            allow_spi_overclock: false,
        }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.ref_clock_hz == 0 {
            return Err(ModelError::ZeroClock("ref_clock_hz"));
        }
        if self.adc_clock_hz == 0 {
            return Err(ModelError::ZeroClock("adc_clock_hz"));
        }
        if self.spi_clock_hz == 0 {
            return Err(ModelError::ZeroClock("spi_clock_hz"));
        }
        spi::frame_duration(self)?;
        Ok(())
    }
}

/// Durations of the individual switching steps.
///
/// `vco_cal_ns` is a lower bound; calibration actually scales with the
/// reference clock, but no formula is modeled, so callers override it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimingProfile {
    pub vco_cal_ns: u64,
    pub pll_lock_ns: u64,
    pub dac_powerup_ns: u64,
    /// Data-path flush length in ADC clock cycles.
    pub flush_cycles: u64,
    pub lo_div_powerup_ns: u64,
    /// Fitted so that one SPI frame plus power-down matches the ~0.5 µs
    /// Tx-to-Rx measurement.
    pub lo_div_powerdown_ns: u64,
}

impl Default for TimingProfile {
    fn default() -> Self {
        TimingProfile {
            vco_cal_ns: 37_000,
            pll_lock_ns: 15_000,
            dac_powerup_ns: 18_000,
            flush_cycles: 384,
            lo_div_powerup_ns: 160,
            lo_div_powerdown_ns: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnsmMode {
    /// TDD with VCO calibration on every Rx/Tx change.
    StandardEnsmTdd,
    /// TDD with calibrations disabled.
    StandardTdd,
    /// TDD with both synthesizers left running.
    StandardTddDualSynth,
    /// Both data paths active but independently enabled.
    FddIndependent,
    /// Both chains always on. Zero turnaround, full self-interference.
    Fdd,
    /// FDD with the Tx LO divider switched over SPI.
    LoControl,
}

impl EnsmMode {
    pub const ALL: [EnsmMode; 6] = [
        EnsmMode::StandardEnsmTdd,
        EnsmMode::StandardTdd,
        EnsmMode::StandardTddDualSynth,
        EnsmMode::FddIndependent,
        EnsmMode::Fdd,
        EnsmMode::LoControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnsmMode::StandardEnsmTdd => "standard-ensm-tdd",
            EnsmMode::StandardTdd => "standard-tdd",
            EnsmMode::StandardTddDualSynth => "standard-tdd-dual-synth",
            EnsmMode::FddIndependent => "fdd-independent",
            EnsmMode::Fdd => "fdd",
            EnsmMode::LoControl => "lo-control",
        }
    }
}

impl fmt::Display for EnsmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} {value:?} (expected one of: {expected})")]
pub struct ParseNameError {
    pub kind: &'static str,
    pub value: String,
    pub expected: String,
}

impl FromStr for EnsmMode {
    type Err = ParseNameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnsmMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ParseNameError {
                kind: "mode",
                value: s.to_owned(),
                expected: EnsmMode::ALL.map(EnsmMode::name).join(", "),
            })
    }
}

impl Serialize for EnsmMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    RxToTx,
    TxToRx,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::RxToTx, Direction::TxToRx];

    pub fn name(self) -> &'static str {
        match self {
            Direction::RxToTx => "rx-tx",
            Direction::TxToRx => "tx-rx",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = ParseNameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Direction::BOTH
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| ParseNameError {
                kind: "direction",
                value: s.to_owned(),
                expected: "rx-tx, tx-rx".to_owned(),
            })
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BudgetComponent {
    pub name: String,
    #[serde(rename = "duration_ns")]
    pub duration: TimeSpan,
    pub stage: usize,
}

impl BudgetComponent {
    pub fn new(name: impl Into<String>, duration: TimeSpan, stage: usize) -> Self {
        BudgetComponent {
            name: name.into(),
            duration,
            stage,
        }
    }
}

/// Itemized breakdown of one Rx/Tx transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TurnaroundBudget {
    pub mode: EnsmMode,
    pub direction: Direction,
    components: Vec<BudgetComponent>,
    #[serde(rename = "total_ns")]
    total: TimeSpan,
}

impl TurnaroundBudget {
    pub fn new(mode: EnsmMode, direction: Direction, components: Vec<BudgetComponent>) -> Self {
        let total = stage_total(&components);
        TurnaroundBudget {
            mode,
            direction,
            components,
            total,
        }
    }

    /// Rebuild a budget from a stored record, checking the total.
    pub fn from_parts(
        mode: EnsmMode,
        direction: Direction,
        components: Vec<BudgetComponent>,
        total: TimeSpan,
    ) -> Result<Self, ModelError> {
        let computed = stage_total(&components);
        if computed != total {
            return Err(ModelError::TotalMismatch {
                stored: total,
                computed,
            });
        }
        Ok(TurnaroundBudget {
            mode,
            direction,
            components,
            total,
        })
    }

    pub fn components(&self) -> &[BudgetComponent] {
        &self.components
    }

    pub fn total(&self) -> TimeSpan {
        self.total
    }

    pub fn stage_count(&self) -> usize {
        self.components.iter().map(|c| c.stage + 1).max().unwrap_or(0)
    }
}

fn stage_total(components: &[BudgetComponent]) -> TimeSpan {
    let stages = components.iter().map(|c| c.stage + 1).max().unwrap_or(0);
    let mut maxima = vec![TimeSpan::ZERO; stages];
    for c in components {
        maxima[c.stage] = maxima[c.stage].max(c.duration);
    }
    maxima.into_iter().sum()
}

/// Data-path flush time at the configured ADC clock.
pub fn flush_time(clocks: &ClockConfig, profile: &TimingProfile) -> Result<TimeSpan, ModelError> {
    TimeSpan::from_cycles(profile.flush_cycles, clocks.adc_clock_hz)
        .ok_or(ModelError::ZeroClock("adc_clock_hz"))
}

pub fn turnaround_budget(
    mode: EnsmMode,
    direction: Direction,
    clocks: &ClockConfig,
    profile: &TimingProfile,
) -> Result<TurnaroundBudget, ModelError> {
    use EnsmMode::*;

    let ns = TimeSpan::from_ns;
    let vco_cal = || BudgetComponent::new("vco_cal", ns(profile.vco_cal_ns), 0);
    let pll = |stage| BudgetComponent::new("pll_lock", ns(profile.pll_lock_ns), stage);
    let dac = |stage| BudgetComponent::new("dac_powerup", ns(profile.dac_powerup_ns), stage);
    let flush = |stage| -> Result<BudgetComponent, ModelError> {
        Ok(BudgetComponent::new("flush", flush_time(clocks, profile)?, stage))
    };
    // DAC power-up only happens when entering Tx.
    let to_tx = direction == Direction::RxToTx;

    let mut components = Vec::new();
    match mode {
        StandardEnsmTdd => {
            components.push(vco_cal());
            components.push(pll(1));
            if to_tx {
                components.push(dac(1));
            }
            components.push(flush(1)?);
        }
        StandardTdd => {
            components.push(pll(0));
            if to_tx {
                components.push(dac(0));
            }
            components.push(flush(0)?);
        }
        StandardTddDualSynth => {
            if to_tx {
                components.push(dac(0));
            }
            components.push(flush(0)?);
        }
        FddIndependent => {
            if to_tx {
                components.push(dac(0));
            }
        }
        Fdd => {}
        LoControl => {
            components.push(BudgetComponent::new("spi_frame", spi::frame_duration(clocks)?, 0));
            let (name, dur) = if to_tx {
                ("lo_div_powerup", profile.lo_div_powerup_ns)
            } else {
                ("lo_div_powerdown", profile.lo_div_powerdown_ns)
            };
            components.push(BudgetComponent::new(name, ns(dur), 1));
        }
    }
    Ok(TurnaroundBudget::new(mode, direction, components))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub mode: EnsmMode,
    pub direction: Direction,
    #[serde(rename = "total_ns")]
    pub total: TimeSpan,
}

/// Budget totals over `modes` x both directions, in mode declaration order
/// with Rx-to-Tx first. Duplicate modes collapse to one entry.
pub fn sweep_budgets(
    modes: &[EnsmMode],
    clocks: &ClockConfig,
    profile: &TimingProfile,
) -> Result<Vec<SweepRow>, ModelError> {
    let mut modes = modes.to_vec();
    modes.sort();
    modes.dedup();
    let mut rows = Vec::with_capacity(modes.len() * 2);
    for mode in modes {
        for direction in Direction::BOTH {
            let b = turnaround_budget(mode, direction, clocks, profile)?;
            rows.push(SweepRow {
                mode,
                direction,
                total: b.total(),
            });
        }
    }
    Ok(rows)
}
