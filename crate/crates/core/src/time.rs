//! Integer time arithmetic.
//!
//! Every duration in the model is held as an integer number of picoseconds.
//! Configuration values arrive as whole nanoseconds and whole hertz, and
//! cycle counts divided by a clock are rounded to the nearest picosecond, so
//! budgets built from the default parameters are exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use serde::{Serialize, Serializer};

pub const PS_PER_NS: u64 = 1_000;
pub const PS_PER_US: u64 = 1_000_000;
const PS_PER_S: u128 = 1_000_000_000_000;

/// A non-negative span of time with picosecond resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeSpan(u64);

impl TimeSpan {
    pub const ZERO: TimeSpan = TimeSpan(0);

    pub const fn from_ps(ps: u64) -> Self {
        TimeSpan(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        TimeSpan(ns * PS_PER_NS)
    }

    /// Duration of `cycles` periods of a clock running at `hz`, rounded to
    /// the nearest picosecond (ties away from zero).
    ///
    /// Returns `None` for a zero clock.
    pub fn from_cycles(cycles: u64, hz: u64) -> Option<Self> {
        if hz == 0 {
            return None;
        }
        let num = cycles as u128 * PS_PER_S;
        let hz = hz as u128;
        let ps = (num + hz / 2) / hz;
        u64::try_from(ps).ok().map(TimeSpan)
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_ns_f64(self) -> f64 {
        self.0 as f64 / PS_PER_NS as f64
    }

    pub fn as_us_f64(self) -> f64 {
        self.0 as f64 / PS_PER_US as f64
    }

    /// Whole nanoseconds, if the span is an exact multiple of 1 ns.
    pub fn exact_ns(self) -> Option<u64> {
        self.0.is_multiple_of(PS_PER_NS).then_some(self.0 / PS_PER_NS)
    }

    pub fn saturating_sub(self, other: TimeSpan) -> TimeSpan {
        TimeSpan(self.0.saturating_sub(other.0))
    }
}

impl Add for TimeSpan {
    type Output = TimeSpan;
    fn add(self, rhs: TimeSpan) -> TimeSpan {
        TimeSpan(self.0 + rhs.0)
    }
}

impl AddAssign for TimeSpan {
    fn add_assign(&mut self, rhs: TimeSpan) {
        self.0 += rhs.0;
    }
}

impl Sum for TimeSpan {
    fn sum<I: Iterator<Item = TimeSpan>>(iter: I) -> TimeSpan {
        iter.fold(TimeSpan::ZERO, Add::add)
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ns", format_ns(self.0 as i128))
    }
}

impl Serialize for TimeSpan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_ns(self.0 as i128, serializer)
    }
}

/// A point on the simulation timeline, picoseconds relative to time zero.
/// May be negative (trace windows start before the trigger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub const fn from_ps(ps: i64) -> Self {
        Timestamp(ps)
    }

    pub const fn from_ns(ns: i64) -> Self {
        Timestamp(ns * PS_PER_NS as i64)
    }

    pub const fn as_ps(self) -> i64 {
        self.0
    }

    pub fn as_ns_f64(self) -> f64 {
        self.0 as f64 / PS_PER_NS as f64
    }

    pub fn as_us_f64(self) -> f64 {
        self.0 as f64 / PS_PER_US as f64
    }

    /// Span from `earlier` to `self`; `None` when `earlier` is later.
    pub fn since(self, earlier: Timestamp) -> Option<TimeSpan> {
        u64::try_from(self.0 - earlier.0).ok().map(TimeSpan)
    }
}

impl Add<TimeSpan> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: TimeSpan) -> Timestamp {
        Timestamp(self.0 + rhs.0 as i64)
    }
}

impl Sub<TimeSpan> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: TimeSpan) -> Timestamp {
        Timestamp(self.0 - rhs.0 as i64)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ns", format_ns(self.0 as i128))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_ns(self.0 as i128, serializer)
    }
}

/// Render a picosecond quantity as nanoseconds: an integer when exact,
/// otherwise up to three decimals with trailing zeros trimmed.
pub fn format_ns(ps: i128) -> String {
    let per = PS_PER_NS as i128;
    if ps % per == 0 {
        return (ps / per).to_string();
    }
    let sign = if ps < 0 { "-" } else { "" };
    let abs = ps.abs();
    let frac = format!("{:03}", abs % per);
    format!("{sign}{}.{}", abs / per, frac.trim_end_matches('0'))
}

/// Serialize picoseconds as a nanosecond number: integer when exact.
pub(crate) fn serialize_ns<S: Serializer>(ps: i128, serializer: S) -> Result<S::Ok, S::Error> {
    let per = PS_PER_NS as i128;
    if ps % per == 0 {
        serializer.serialize_i64((ps / per) as i64)
    } else {
        serializer.serialize_f64(ps as f64 / per as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_to_span() {
        assert_eq!(TimeSpan::from_cycles(24, 50_000_000), Some(TimeSpan::from_ns(480)));
        assert_eq!(TimeSpan::from_cycles(384, 160_000_000), Some(TimeSpan::from_ns(2_400)));
        assert_eq!(TimeSpan::from_cycles(1, 0), None);
        // 24 / 7 MHz = 3428.571428... ns
        assert_eq!(TimeSpan::from_cycles(24, 7_000_000).unwrap().as_ps(), 3_428_571);
    }

    #[test]
    fn ns_formatting() {
        assert_eq!(format_ns(640_000), "640");
        assert_eq!(format_ns(-39_000_000), "-39000");
        assert_eq!(format_ns(3_428_571), "3428.571");
        assert_eq!(format_ns(1_500), "1.5");
        assert_eq!(format_ns(-1_500), "-1.5");
    }

    #[test]
    fn timestamp_since() {
        let a = Timestamp::from_ns(-100);
        let b = Timestamp::from_ns(540);
        assert_eq!(b.since(a), Some(TimeSpan::from_ns(640)));
        assert_eq!(a.since(b), None);
    }
}
