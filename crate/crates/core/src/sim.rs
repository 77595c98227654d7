//! Discrete-event timeline for LO switching and sampled Tx power traces.
//!
//! A schedule of commands expands into timed events using the SPI frame
//! length and the LO divider power-up/down latencies. The resulting
//! piecewise-constant power is then sampled on a uniform grid the way a
//! signal analyzer in zero-span mode would record it.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ensm::{ClockConfig, Direction, ModelError, TimingProfile};
use crate::rf::TxPowerLevels;
use crate::spi;
use crate::time::{TimeSpan, Timestamp};

pub const DEFAULT_INTERVAL_NS: u64 = 50;
pub const DEFAULT_HALF_WINDOW_NS: i64 = 2_500;
/// Smallest level change `measure_turnaround` treats as a step.
pub const MIN_STEP_DB: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("schedule not sorted: command {index} at {time} precedes its predecessor")]
    Unsorted { index: usize, time: Timestamp },
    #[error("packet start/end not properly nested at {time}")]
    PacketNesting { time: Timestamp },
    #[error("SPI write at {second} overlaps the write started at {first} (bus busy until {busy_until})")]
    OverlappingSpi {
        first: Timestamp,
        second: Timestamp,
        busy_until: Timestamp,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid trace window: {0}")]
    BadWindow(String),
    #[error("no detectable {expected} step after trigger at {trigger}")]
    NoStep { trigger: Timestamp, expected: &'static str },
}

impl From<spi::SpiError> for SimError {
    fn from(e: spi::SpiError) -> Self {
        SimError::Model(ModelError::Spi(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CommandKind {
    LoOn,
    LoOff,
    TxPacketStart,
    TxPacketEnd,
    /// Analyzer trigger; marks the timeline without changing state.
    Trigger,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::LoOn => "lo-on",
            CommandKind::LoOff => "lo-off",
            CommandKind::TxPacketStart => "packet-start",
            CommandKind::TxPacketEnd => "packet-end",
            CommandKind::Trigger => "trigger",
        }
    }
}

/// A scheduled command. Times are whole nanoseconds from time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Command {
    pub time_ns: u64,
    pub kind: CommandKind,
}

impl Command {
    pub fn new(time_ns: u64, kind: CommandKind) -> Self {
        Command { time_ns, kind }
    }

    pub fn time(&self) -> Timestamp {
        Timestamp::from_ns(self.time_ns as i64)
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.time_ns)
    }
}

impl FromStr for Command {
    type Err = String;

    /// Parses `kind@ns`, e.g. `lo-on@0`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, time) = s
            .trim()
            .split_once('@')
            .ok_or_else(|| format!("command {s:?}: expected kind@time_ns"))?;
        let kind = match kind.trim() {
            "lo-on" => CommandKind::LoOn,
            "lo-off" => CommandKind::LoOff,
            "packet-start" => CommandKind::TxPacketStart,
            "packet-end" => CommandKind::TxPacketEnd,
            "trigger" => CommandKind::Trigger,
            other => return Err(format!("unknown command kind {other:?}")),
        };
        let time_ns = time
            .trim()
            .parse()
            .map_err(|e| format!("command {s:?}: bad time: {e}"))?;
        Ok(Command { time_ns, kind })
    }
}

/// Parse a comma-separated schedule. Blank input is an empty schedule.
pub fn parse_schedule(s: &str) -> Result<Vec<Command>, String> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventEffect {
    SpiStart,
    SpiEnd,
    LoPoweredUp,
    LoPoweredDown,
    PacketOn,
    PacketOff,
    /// A packet started while the LO divider was down; nothing radiates.
    PacketWithoutLo,
    Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEvent {
    pub time: Timestamp,
    pub effect: EventEffect,
    pub power_after_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    pub initial_lo_on: bool,
    pub initial_power_db: f64,
    pub events: Vec<SimEvent>,
}

impl Timeline {
    pub fn warnings(&self) -> impl Iterator<Item = &SimEvent> {
        self.events
            .iter()
            .filter(|e| e.effect == EventEffect::PacketWithoutLo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub clocks: ClockConfig,
    pub profile: TimingProfile,
    pub levels: TxPowerLevels,
    /// LO divider state before the first command. `None` starts in the
    /// opposite state of the first LO command so that it is a transition.
    pub initial_lo: Option<bool>,
}

fn validate_schedule(commands: &[Command]) -> Result<(), SimError> {
    let mut in_packet = false;
    for (index, pair) in commands.windows(2).enumerate() {
        if pair[1].time_ns < pair[0].time_ns {
            return Err(SimError::Unsorted {
                index: index + 1,
                time: pair[1].time(),
            });
        }
    }
    for c in commands {
        match (c.kind, in_packet) {
            (CommandKind::TxPacketStart, false) => in_packet = true,
            (CommandKind::TxPacketEnd, true) => in_packet = false,
            (CommandKind::TxPacketStart, true) | (CommandKind::TxPacketEnd, false) => {
                return Err(SimError::PacketNesting { time: c.time() })
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn expand_schedule(commands: &[Command], config: &SimConfig) -> Result<Timeline, SimError> {
    validate_schedule(commands)?;
    let frame = spi::frame_duration(&config.clocks)?;
    let powerup = TimeSpan::from_ns(config.profile.lo_div_powerup_ns);
    let powerdown = TimeSpan::from_ns(config.profile.lo_div_powerdown_ns);

    let initial_lo_on = config.initial_lo.unwrap_or_else(|| {
        commands
            .iter()
            .find_map(|c| match c.kind {
                CommandKind::LoOn => Some(false),
                CommandKind::LoOff => Some(true),
                _ => None,
            })
            .unwrap_or(false)
    });

    // (time, sequence, effect); the sequence keeps same-time events in
    // the order they were generated.
    let mut raw: Vec<(Timestamp, usize, EventEffect)> = Vec::new();
    let mut spi_busy: Option<(Timestamp, Timestamp)> = None;
    for c in commands {
        let t = c.time();
        let mut push = |time, effect| raw.push((time, raw.len(), effect));
        match c.kind {
            CommandKind::LoOn | CommandKind::LoOff => {
                if let Some((first, busy_until)) = spi_busy {
                    if t < busy_until {
                        return Err(SimError::OverlappingSpi {
                            first,
                            second: t,
                            busy_until,
                        });
                    }
                }
                let end = t + frame;
                spi_busy = Some((t, end));
                push(t, EventEffect::SpiStart);
                push(end, EventEffect::SpiEnd);
                if c.kind == CommandKind::LoOn {
                    push(end + powerup, EventEffect::LoPoweredUp);
                } else {
                    push(end + powerdown, EventEffect::LoPoweredDown);
                }
            }
            CommandKind::TxPacketStart => push(t, EventEffect::PacketOn),
            CommandKind::TxPacketEnd => push(t, EventEffect::PacketOff),
            CommandKind::Trigger => push(t, EventEffect::Trigger),
        }
    }
    raw.sort_by_key(|&(t, seq, _)| (t, seq));

    let levels = &config.levels;
    let mut lo_on = initial_lo_on;
    let mut packet_on = false;
    let events = raw
        .into_iter()
        .map(|(time, _, mut effect)| {
            match effect {
                EventEffect::LoPoweredUp => lo_on = true,
                EventEffect::LoPoweredDown => lo_on = false,
                EventEffect::PacketOn => {
                    packet_on = true;
                    if !lo_on {
                        effect = EventEffect::PacketWithoutLo;
                    }
                }
                EventEffect::PacketOff => packet_on = false,
                _ => {}
            }
            SimEvent {
                time,
                effect,
                power_after_db: levels.level(lo_on, packet_on),
            }
        })
        .collect();

    Ok(Timeline {
        initial_lo_on,
        initial_power_db: levels.level(initial_lo_on, false),
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceWindow {
    pub start: Timestamp,
    pub end: Timestamp,
    pub interval: TimeSpan,
    /// First-order settling time constant; zero gives ideal steps.
    pub settling: TimeSpan,
}

impl Default for TraceWindow {
    fn default() -> Self {
        TraceWindow {
            start: Timestamp::from_ns(-DEFAULT_HALF_WINDOW_NS),
            end: Timestamp::from_ns(DEFAULT_HALF_WINDOW_NS),
            interval: TimeSpan::from_ns(DEFAULT_INTERVAL_NS),
            settling: TimeSpan::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    pub start: Timestamp,
    pub interval: TimeSpan,
    pub samples: Vec<f64>,
}

impl PowerTrace {
    pub fn time_at(&self, k: usize) -> Timestamp {
        Timestamp::from_ps(self.start.as_ps() + (k as u64 * self.interval.as_ps()) as i64)
    }

    pub fn points(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(|(k, &v)| (self.time_at(k), v))
    }

    /// Sum of linear power times the interval (ns).
    pub fn energy(&self) -> f64 {
        self.samples
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .sum::<f64>()
            * self.interval.as_ns_f64()
    }

    /// `time_us,power_db` with two decimals in each column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_us,power_db\n");
        for (t, v) in self.points() {
            let _ = writeln!(out, "{},{}", fixed2(t.as_us_f64()), fixed2(v));
        }
        out
    }
}

fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_owned()
    } else {
        s
    }
}

/// Sample the timeline on `start + k * interval` for every grid point up
/// to `end`. A sample landing exactly on an event sees the post-event level.
pub fn sample_trace(timeline: &Timeline, window: &TraceWindow) -> Result<PowerTrace, SimError> {
    if window.interval == TimeSpan::ZERO {
        return Err(SimError::BadWindow("interval must be positive".into()));
    }
    let span = window
        .end
        .since(window.start)
        .ok_or_else(|| SimError::BadWindow(format!("end {} before start {}", window.end, window.start)))?;
    let n = (span.as_ps() / window.interval.as_ps()) as usize + 1;
    let tau_ns = window.settling.as_ns_f64();

    let events = &timeline.events;
    let mut next = 0;
    // Level reached at the last applied event, and the target it heads to.
    let mut anchor_time: Option<Timestamp> = None;
    let mut anchor_level = timeline.initial_power_db;
    let mut target = timeline.initial_power_db;
    let level_at = |anchor_time: Option<Timestamp>, anchor_level: f64, target: f64, t: Timestamp| {
        match anchor_time {
            Some(t0) if tau_ns > 0.0 => {
                let dt = (t.as_ps() - t0.as_ps()) as f64 / 1_000.0;
                target + (anchor_level - target) * (-dt / tau_ns).exp()
            }
            _ => target,
        }
    };

    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = Timestamp::from_ps(window.start.as_ps() + (k as u64 * window.interval.as_ps()) as i64);
        while next < events.len() && events[next].time <= t {
            let e = &events[next];
            anchor_level = level_at(anchor_time, anchor_level, target, e.time);
            anchor_time = Some(e.time);
            target = e.power_after_db;
            next += 1;
        }
        samples.push(level_at(anchor_time, anchor_level, target, t));
    }
    Ok(PowerTrace {
        start: window.start,
        interval: window.interval,
        samples,
    })
}

/// Time from `trigger` to the first sample that crosses halfway between
/// the pre-trigger mean and the settled level (mean of the last quarter of
/// the post-trigger samples). Rx-to-Tx expects a rising step, Tx-to-Rx a
/// falling one.
pub fn measure_turnaround(
    trace: &PowerTrace,
    trigger: Timestamp,
    direction: Direction,
) -> Result<TimeSpan, SimError> {
    let expected = match direction {
        Direction::RxToTx => "rising",
        Direction::TxToRx => "falling",
    };
    let no_step = || SimError::NoStep { trigger, expected };

    let (pre, post): (Vec<_>, Vec<_>) = trace.points().partition(|&(t, _)| t < trigger);
    if pre.is_empty() || post.is_empty() {
        return Err(no_step());
    }
    let mean = |pts: &[(Timestamp, f64)]| pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let before = mean(&pre);
    let tail = post.len().div_ceil(4);
    let after = mean(&post[post.len() - tail..]);
    let step = after - before;
    let rising = direction == Direction::RxToTx;
    if step.abs() < MIN_STEP_DB || (step > 0.0) != rising {
        return Err(no_step());
    }
    let mid = (before + after) / 2.0;
    post.iter()
        .find(|&&(_, v)| if rising { v >= mid } else { v <= mid })
        .and_then(|&(t, _)| t.since(trigger))
        .ok_or_else(no_step)
}

/// Trigger time and expected step direction for a schedule: an explicit
/// `Trigger` command if present, otherwise the first LO command. `None`
/// when the schedule never switches the LO.
pub fn measurement_plan(commands: &[Command]) -> Option<(Timestamp, Direction)> {
    let explicit = commands
        .iter()
        .find(|c| c.kind == CommandKind::Trigger)
        .map(|c| c.time());
    let lo_dir = |c: &Command| match c.kind {
        CommandKind::LoOn => Some(Direction::RxToTx),
        CommandKind::LoOff => Some(Direction::TxToRx),
        _ => None,
    };
    let first_lo = commands
        .iter()
        .filter(|c| explicit.is_none_or(|t| c.time() >= t))
        .find_map(|c| lo_dir(c).map(|d| (c.time(), d)))?;
    Some((explicit.unwrap_or(first_lo.0), first_lo.1))
}
