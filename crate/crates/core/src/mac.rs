//! MAC deadline checks against turnaround budgets.

use serde::Serialize;
use thiserror::Error;

use crate::ensm::{turnaround_budget, ClockConfig, Direction, EnsmMode, ModelError, TimingProfile};
use crate::time::{format_ns, serialize_ns, TimeSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComplianceError {
    #[error("no deadlines to check against")]
    NoDeadlines,
    #[error("deadline {0:?} must be positive")]
    ZeroDeadline(String),
    #[error("unknown deadline {0:?}")]
    UnknownDeadline(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProtocolDeadline {
    pub name: String,
    #[serde(rename = "deadline_ns")]
    pub deadline: TimeSpan,
    pub source: String,
}

impl ProtocolDeadline {
    pub fn new(
        name: impl Into<String>,
        deadline_ns: u64,
        source: impl Into<String>,
    ) -> Result<Self, ComplianceError> {
        let name = name.into();
        if deadline_ns == 0 {
            return Err(ComplianceError::ZeroDeadline(name));
        }
        Ok(ProtocolDeadline {
            name,
            deadline: TimeSpan::from_ns(deadline_ns),
            source: source.into(),
        })
    }

    /// Wi-Fi SIFS at 2.4 GHz, Wi-Fi SIFS at 5 GHz, and the 5G NR
    /// downlink-to-uplink guard period at 120 kHz subcarrier spacing.
    pub fn builtins() -> Vec<ProtocolDeadline> {
        vec![
            ProtocolDeadline {
                name: "SIFS-2.4GHz".into(),
                deadline: TimeSpan::from_ns(10_000),
                source: "IEEE 802.11a/g/n SIFS, 2.4 GHz".into(),
            },
            ProtocolDeadline {
                name: "SIFS-5GHz".into(),
                deadline: TimeSpan::from_ns(16_000),
                source: "IEEE 802.11a/g/n SIFS, 5 GHz".into(),
            },
            ProtocolDeadline {
                name: "NR-guard-120kHz".into(),
                deadline: TimeSpan::from_ns(17_840),
                source: "5G NR DL-to-UL guard period, 120 kHz SCS".into(),
            },
        ]
    }

    pub fn builtin(name: &str) -> Result<ProtocolDeadline, ComplianceError> {
        Self::builtins()
            .into_iter()
            .find(|d| d.name == name)
            .ok_or_else(|| ComplianceError::UnknownDeadline(name.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComplianceResult {
    pub mode: Option<EnsmMode>,
    pub deadline: String,
    #[serde(rename = "tt_ns")]
    pub tt: TimeSpan,
    pub pass: bool,
    /// Deadline minus turnaround, in picoseconds; negative on failure.
    #[serde(rename = "margin_ns", serialize_with = "margin_as_ns")]
    pub margin_ps: i64,
}

fn margin_as_ns<S: serde::Serializer>(ps: &i64, s: S) -> Result<S::Ok, S::Error> {
    serialize_ns(*ps as i128, s)
}

impl ComplianceResult {
    pub fn margin_ns_string(&self) -> String {
        format_ns(self.margin_ps as i128)
    }
}

/// A turnaround exactly equal to the deadline passes.
pub fn check(tt: TimeSpan, deadline: &ProtocolDeadline) -> ComplianceResult {
    ComplianceResult {
        mode: None,
        deadline: deadline.name.clone(),
        tt,
        pass: tt <= deadline.deadline,
        margin_ps: deadline.deadline.as_ps() as i64 - tt.as_ps() as i64,
    }
}

/// Worst of the two turnaround directions for `mode`.
pub fn worst_case_turnaround(
    mode: EnsmMode,
    clocks: &ClockConfig,
    profile: &TimingProfile,
) -> Result<TimeSpan, ModelError> {
    Direction::BOTH
        .into_iter()
        .map(|d| turnaround_budget(mode, d, clocks, profile).map(|b| b.total()))
        .try_fold(TimeSpan::ZERO, |acc, t| t.map(|t| acc.max(t)))
}

/// Every mode against every deadline, ordered by mode then deadline.
pub fn compliance_matrix(
    clocks: &ClockConfig,
    profile: &TimingProfile,
    deadlines: &[ProtocolDeadline],
) -> Result<Vec<ComplianceResult>, ComplianceError> {
    if deadlines.is_empty() {
        return Err(ComplianceError::NoDeadlines);
    }
    let mut rows = Vec::with_capacity(EnsmMode::ALL.len() * deadlines.len());
    for mode in EnsmMode::ALL {
        let tt = worst_case_turnaround(mode, clocks, profile)?;
        for d in deadlines {
            rows.push(ComplianceResult {
                mode: Some(mode),
                ..check(tt, d)
            });
        }
    }
    Ok(rows)
}

/// Whether `mode` passes every deadline in a matrix.
pub fn mode_passes_all(matrix: &[ComplianceResult], mode: EnsmMode) -> bool {
    matrix
        .iter()
        .filter(|r| r.mode == Some(mode))
        .all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sifs24() -> ProtocolDeadline {
        ProtocolDeadline::builtin("SIFS-2.4GHz").unwrap()
    }

    #[test]
    fn check_examples() {
        let r = check(TimeSpan::from_ns(640), &sifs24());
        assert!(r.pass);
        assert_eq!(r.margin_ns_string(), "9360");

        let r = check(TimeSpan::from_ns(55_000), &ProtocolDeadline::builtin("SIFS-5GHz").unwrap());
        assert!(!r.pass);
        assert_eq!(r.margin_ns_string(), "-39000");

        let r = check(TimeSpan::from_ns(10_000), &sifs24());
        assert!(r.pass);
        assert_eq!(r.margin_ps, 0);
    }

    #[test]
    fn builtin_values() {
        let ns: Vec<_> = ProtocolDeadline::builtins()
            .iter()
            .map(|d| d.deadline.exact_ns().unwrap())
            .collect();
        assert_eq!(ns, [10_000, 16_000, 17_840]);
        assert!(matches!(
            ProtocolDeadline::builtin("SIFS-60GHz"),
            Err(ComplianceError::UnknownDeadline(_))
        ));
        assert!(ProtocolDeadline::new("x", 0, "").is_err());
    }

    #[test]
    fn matrix_defaults() {
        let m = compliance_matrix(
            &ClockConfig::default(),
            &TimingProfile::default(),
            &ProtocolDeadline::builtins(),
        )
        .unwrap();
        assert_eq!(m.len(), 18);
        assert!(mode_passes_all(&m, EnsmMode::LoControl));
        assert!(mode_passes_all(&m, EnsmMode::Fdd));
        for mode in [
            EnsmMode::StandardEnsmTdd,
            EnsmMode::StandardTdd,
            EnsmMode::StandardTddDualSynth,
            EnsmMode::FddIndependent,
        ] {
            assert!(m.iter().filter(|r| r.mode == Some(mode)).all(|r| !r.pass), "{mode}");
        }
        let lo: Vec<_> = m.iter().filter(|r| r.mode == Some(EnsmMode::LoControl)).collect();
        assert_eq!(lo[0].tt, TimeSpan::from_ns(640));
    }

    #[test]
    fn matrix_needs_deadlines() {
        assert_eq!(
            compliance_matrix(&ClockConfig::default(), &TimingProfile::default(), &[]),
            Err(ComplianceError::NoDeadlines)
        );
    }
}
