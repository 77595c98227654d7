#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tdd_turnaround::ensm::EnsmMode;
use tdd_turnaround::rf::capture::write_capture;
use tdd_turnaround::rf::{synthesize_capture, Band, IqCapture, IqSample, RfModelParams};

pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the CLI in-process.
pub fn run(args: &[&str]) -> RunOutput {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ttsim").chain(args.iter().copied());
    let code = tdd_turnaround_cli::run(argv, &mut out, &mut err);
    RunOutput {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// Run the built binary as a separate process.
pub fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ttsim"))
        .args(args)
        .output()
        .expect("spawn ttsim")
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Compare output against a golden file, updating if UPDATE_GOLDEN=1.
pub fn assert_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var("UPDATE_GOLDEN").is_ok() {
        fs::write(&path, actual).expect("update golden file");
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    if actual != expected {
        eprintln!("golden mismatch: {name}\n--- expected\n{expected}\n--- actual\n{actual}");
        panic!("golden file mismatch: {name}");
    }
}

pub const BURST_START: usize = 6_000;
pub const BURST_LEN: usize = 200;

/// Lo-control noise at 2.4 GHz with one environment packet 20 dB above
/// the floor.
pub fn burst_capture() -> IqCapture {
    let mut c = synthesize_capture(EnsmMode::LoControl, Band::Band2G4, &RfModelParams::default(), 20_000, 7);
    for s in &mut c.samples[BURST_START..BURST_START + BURST_LEN] {
        *s = IqSample::new(s.i * 10, s.q * 10);
    }
    c
}

pub fn burst_fixture_path() -> PathBuf {
    fixtures().join("burst.iq")
}

pub fn write_burst_fixture(path: &Path) {
    write_capture(path, &burst_capture()).unwrap();
}

/// Smoothed power by direct window sums, then threshold over the median
/// and neighbourhood dilation. Returns the removal mask.
pub fn brute_force_removed(samples: &[IqSample], smoothing: usize, threshold_db: f64, guard: usize) -> Vec<bool> {
    let n = samples.len();
    let back = smoothing / 2;
    let series: Vec<f64> = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(back);
            let hi = (k + smoothing - back).min(n);
            let sum: f64 = samples[lo..hi]
                .iter()
                .map(|s| f64::from(s.i).powi(2) + f64::from(s.q).powi(2))
                .sum();
            10.0 * (sum / (hi - lo) as f64).log10()
        })
        .collect();
    let mut sorted = series.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let hot: Vec<bool> = series.iter().map(|&v| v > median + threshold_db).collect();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(guard);
            let hi = (i + guard).min(n - 1);
            (lo..=hi).any(|j| hot[j])
        })
        .collect()
}
