//! Rendering of results as aligned tables, CSV, or JSON.
//!
//! CSV and JSON carry the same fields under the same names.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;

use crate::config::Format;
use tdd_turnaround::ensm::{Direction, SweepRow, TurnaroundBudget};
use tdd_turnaround::mac::ComplianceResult;
use tdd_turnaround::rf::{Band, IqCapture, NoiseFloorReport};
use tdd_turnaround::time::{format_ns, TimeSpan, Timestamp};

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

fn ns(t: TimeSpan) -> String {
    format_ns(t.as_ps() as i128)
}

pub fn budgets(budgets: &[TurnaroundBudget], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => return to_json(budgets),
        Format::Csv => {
            out.push_str("mode,direction,stage,component,duration_ns,total_ns\n");
            for b in budgets {
                for c in b.components() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        b.mode,
                        b.direction,
                        c.stage,
                        c.name,
                        ns(c.duration),
                        ns(b.total())
                    );
                }
            }
        }
        Format::Table => {
            for (i, b) in budgets.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let _ = writeln!(out, "{} {}: total {} ns", b.mode, b.direction, ns(b.total()));
                if b.components().is_empty() {
                    out.push_str("  (no switching steps)\n");
                    continue;
                }
                let _ = writeln!(out, "  {:<6} {:<18} {:>12}", "stage", "component", "duration_ns");
                for c in b.components() {
                    let _ = writeln!(out, "  {:<6} {:<18} {:>12}", c.stage, c.name, ns(c.duration));
                }
            }
        }
    }
    out
}

pub fn sweep(rows: &[SweepRow], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => return to_json(rows),
        Format::Csv => {
            out.push_str("mode,direction,total_ns\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{}", r.mode, r.direction, ns(r.total));
            }
        }
        Format::Table => {
            let _ = writeln!(out, "{:<24} {:<9} {:>10}", "mode", "direction", "total_ns");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<24} {:<9} {:>10}",
                    r.mode.name(),
                    r.direction.name(),
                    ns(r.total)
                );
            }
        }
    }
    out
}

pub fn trace_summary(
    band: Band,
    measurement: Option<(Timestamp, Direction, TimeSpan)>,
    warnings: usize,
    format: Format,
) -> String {
    match format {
        Format::Json => to_json(&json!({
            "band": band,
            "direction": measurement.map(|m| m.1),
            "trigger_ns": measurement.map(|m| m.0),
            "turnaround_ns": measurement.map(|m| m.2),
            "warnings": warnings,
        })),
        Format::Csv => {
            let mut out = String::from("band,direction,trigger_ns,turnaround_ns,warnings\n");
            let (dir, trig, tt) = match measurement {
                Some((t, d, tt)) => (d.to_string(), format_ns(t.as_ps() as i128), ns(tt)),
                None => Default::default(),
            };
            let _ = writeln!(out, "{band},{dir},{trig},{tt},{warnings}");
            out
        }
        Format::Table => {
            let mut out = match measurement {
                Some((trigger, dir, tt)) => format!(
                    "band {band}: measured {dir} turnaround {:.2} us ({} ns after trigger at {} ns)\n",
                    tt.as_us_f64(),
                    ns(tt),
                    format_ns(trigger.as_ps() as i128)
                ),
                None => format!("band {band}: measured turnaround n/a (no LO command in schedule)\n"),
            };
            if warnings > 0 {
                let _ = writeln!(out, "warning: {warnings} packet(s) started while the LO was off");
            }
            out
        }
    }
}

#[derive(Serialize)]
struct NoiseRecord<'a> {
    source: &'a str,
    mode: Option<String>,
    band: Option<String>,
    average_power_db: f64,
    sample_count_used: usize,
    samples_filtered: usize,
}

pub fn noise(source: &str, capture: &IqCapture, report: &NoiseFloorReport, format: Format) -> String {
    let rec = NoiseRecord {
        source,
        mode: capture.mode.map(|m| m.to_string()),
        band: capture.band.map(|b| b.to_string()),
        average_power_db: report.average_power_db,
        sample_count_used: report.sample_count_used,
        samples_filtered: report.samples_filtered,
    };
    match format {
        Format::Json => to_json(&rec),
        Format::Csv => format!(
            "source,mode,band,average_power_db,sample_count_used,samples_filtered\n{},{},{},{},{},{}\n",
            rec.source,
            rec.mode.as_deref().unwrap_or(""),
            rec.band.as_deref().unwrap_or(""),
            rec.average_power_db,
            rec.sample_count_used,
            rec.samples_filtered
        ),
        Format::Table => {
            let mut out = String::new();
            let _ = writeln!(out, "source            {}", rec.source);
            let _ = writeln!(out, "mode              {}", rec.mode.as_deref().unwrap_or("unknown"));
            let _ = writeln!(out, "band              {}", rec.band.as_deref().unwrap_or("unknown"));
            let _ = writeln!(out, "average_power_db  {:.2}", rec.average_power_db);
            let _ = writeln!(out, "samples_used      {}", rec.sample_count_used);
            let _ = writeln!(out, "samples_filtered  {}", rec.samples_filtered);
            out
        }
    }
}

pub fn matrix(rows: &[ComplianceResult], format: Format) -> String {
    let mode = |r: &ComplianceResult| r.mode.map(|m| m.name()).unwrap_or("-");
    let mut out = String::new();
    match format {
        Format::Json => return to_json(rows),
        Format::Csv => {
            out.push_str("mode,deadline,tt_ns,pass,margin_ns\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    mode(r),
                    r.deadline,
                    ns(r.tt),
                    r.pass,
                    r.margin_ns_string()
                );
            }
        }
        Format::Table => {
            let _ = writeln!(
                out,
                "{:<24} {:<16} {:>8} {:<4} {:>10}",
                "mode", "deadline", "tt_ns", "pass", "margin_ns"
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<24} {:<16} {:>8} {:<4} {:>10}",
                    mode(r),
                    r.deadline,
                    ns(r.tt),
                    if r.pass { "yes" } else { "no" },
                    r.margin_ns_string()
                );
            }
        }
    }
    out
}
