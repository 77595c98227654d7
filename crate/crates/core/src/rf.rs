//! Transmit power and receiver noise-floor model, plus I/Q capture analysis.
//!
//! All levels are relative dB. Tx power is expressed against the LO-off
//! floor (0 dBr). Receiver power is expressed against unit sample power,
//! so a capture whose samples all have magnitude 1 reads 0 dB.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ensm::{EnsmMode, ParseNameError};

pub mod capture;

pub const DEFAULT_SAMPLE_RATE_HZ: u64 = 20_000_000;
pub const DEFAULT_THRESHOLD_DB: f64 = 10.0;
pub const DEFAULT_GUARD_SAMPLES: usize = 16;
/// Length of the moving average that turns samples into a power series.
pub const DEFAULT_SMOOTHING: usize = 16;
/// Largest fraction of a series the packet filter may discard.
pub const MAX_FILTERED_FRACTION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum RfError {
    #[error("capture contains no samples")]
    EmptyCapture,
    #[error("capture has zero average power")]
    ZeroPower,
    #[error("power series is empty")]
    EmptySeries,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("smoothing length must be at least 1")]
    BadSmoothing,
    #[error("too noisy: packet filter would remove {removed} of {total} samples")]
    TooNoisy { removed: usize, total: usize },
    #[error("invalid RF parameters: {0}")]
    InvalidParams(String),
    #[error("capture data is {0} bytes, not a whole number of 4-byte I/Q pairs")]
    OddLength(usize),
    #[error("sample {index} has component -32768, outside the symmetric 16-bit range")]
    InvalidSample { index: usize },
    #[error("sidecar {path}: {msg}")]
    Sidecar { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    /// 2.4 GHz, Wi-Fi channel 1.
    Band2G4,
    /// 5 GHz, Wi-Fi channel 44.
    Band5G,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Band2G4, Band::Band5G];

    pub fn name(self) -> &'static str {
        match self {
            Band::Band2G4 => "2g4",
            Band::Band5G => "5g",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = ParseNameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Band::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| ParseNameError {
                kind: "band",
                value: s.to_owned(),
                expected: "2g4, 5g".to_owned(),
            })
    }
}

impl Serialize for Band {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerBand<T> {
    pub band_2g4: T,
    pub band_5g: T,
}

impl<T: Copy> PerBand<T> {
    pub fn get(&self, band: Band) -> T {
        match band {
            Band::Band2G4 => self.band_2g4,
            Band::Band5G => self.band_5g,
        }
    }

    pub fn get_mut(&mut self, band: Band) -> &mut T {
        match band {
            Band::Band2G4 => &mut self.band_2g4,
            Band::Band5G => &mut self.band_5g,
        }
    }
}

/// Calibrated levels. The receiver floors default to the measured
/// noise-floor averages for each duplexing scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RfModelParams {
    /// Tx power rise when the LO divider powers up.
    pub lo_on_delta_db: PerBand<f64>,
    /// Additional rise while a packet is on air. Cosmetic.
    pub packet_delta_db: f64,
    /// Receiver floor for the TDD modes.
    pub base_rx_floor_db: PerBand<f64>,
    pub fdd_rx_floor_db: PerBand<f64>,
    pub locontrol_rx_floor_db: PerBand<f64>,
    /// Manual AGC setting during captures. Metadata only.
    pub agc_gain_db: f64,
}

impl Default for RfModelParams {
    fn default() -> Self {
        RfModelParams {
            lo_on_delta_db: PerBand {
                band_2g4: 30.0,
                band_5g: 22.0,
            },
            packet_delta_db: 15.0,
            base_rx_floor_db: PerBand {
                band_2g4: 53.3,
                band_5g: 53.7,
            },
            fdd_rx_floor_db: PerBand {
                band_2g4: 66.4,
                band_5g: 58.0,
            },
            locontrol_rx_floor_db: PerBand {
                band_2g4: 53.0,
                band_5g: 53.4,
            },
            agc_gain_db: 62.0,
        }
    }
}

impl RfModelParams {
    pub fn validate(&self) -> Result<(), RfError> {
        let mut values = vec![
            ("packet_delta_db", self.packet_delta_db),
            ("agc_gain_db", self.agc_gain_db),
        ];
        for band in Band::ALL {
            values.push(("lo_on_delta_db", self.lo_on_delta_db.get(band)));
            values.push(("base_rx_floor_db", self.base_rx_floor_db.get(band)));
            values.push(("fdd_rx_floor_db", self.fdd_rx_floor_db.get(band)));
            values.push(("locontrol_rx_floor_db", self.locontrol_rx_floor_db.get(band)));
        }
        if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(RfError::InvalidParams(format!("{name} is not finite ({v})")));
        }
        for band in Band::ALL {
            let fdd = self.fdd_rx_floor_db.get(band);
            let lo = self.locontrol_rx_floor_db.get(band);
            if fdd < lo {
                return Err(RfError::InvalidParams(format!(
                    "{band}: fdd floor {fdd} dB below lo-control floor {lo} dB"
                )));
            }
        }
        Ok(())
    }
}

/// Tx output levels for one band, relative to the LO-off floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TxPowerLevels {
    pub lo_off_db: f64,
    pub lo_on_db: f64,
    pub packet_db: f64,
}

impl TxPowerLevels {
    pub fn for_band(band: Band, params: &RfModelParams) -> Self {
        let lo_on = params.lo_on_delta_db.get(band);
        TxPowerLevels {
            lo_off_db: 0.0,
            lo_on_db: lo_on,
            packet_db: lo_on + params.packet_delta_db,
        }
    }

    /// Output power for a transmitter state. A packet with the LO divider
    /// down never reaches the mixer, so it stays at the floor.
    pub fn level(&self, lo_on: bool, packet_on: bool) -> f64 {
        match (lo_on, packet_on) {
            (false, _) => self.lo_off_db,
            (true, false) => self.lo_on_db,
            (true, true) => self.packet_db,
        }
    }
}

pub fn rx_noise_floor(mode: EnsmMode, band: Band, params: &RfModelParams) -> f64 {
    match mode {
        EnsmMode::Fdd | EnsmMode::FddIndependent => params.fdd_rx_floor_db.get(band),
        EnsmMode::LoControl => params.locontrol_rx_floor_db.get(band),
        EnsmMode::StandardEnsmTdd | EnsmMode::StandardTdd | EnsmMode::StandardTddDualSynth => {
            params.base_rx_floor_db.get(band)
        }
    }
}

/// How much higher `mode_a`'s receiver floor sits than `mode_b`'s.
pub fn noise_floor_delta(
    mode_a: EnsmMode,
    mode_b: EnsmMode,
    band: Band,
    params: &RfModelParams,
) -> f64 {
    rx_noise_floor(mode_a, band, params) - rx_noise_floor(mode_b, band, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct IqSample {
    pub i: i16,
    pub q: i16,
}

impl IqSample {
    pub fn new(i: i16, q: i16) -> Self {
        IqSample { i, q }
    }

    pub fn power(self) -> u64 {
        let i = i64::from(self.i);
        let q = i64::from(self.q);
        (i * i + q * q) as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub samples: Vec<IqSample>,
    pub sample_rate_hz: u64,
    pub band: Option<Band>,
    pub mode: Option<EnsmMode>,
    pub agc_db: Option<f64>,
}

impl IqCapture {
    pub fn new(samples: Vec<IqSample>) -> Self {
        IqCapture {
            samples,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            band: None,
            mode: None,
            agc_db: None,
        }
    }
}

pub fn average_power_db(capture: &IqCapture) -> Result<f64, RfError> {
    mean_power_db(&capture.samples)
}

/// `10 log10(mean(i² + q²))` over a slice of samples.
pub fn mean_power_db(samples: &[IqSample]) -> Result<f64, RfError> {
    if samples.is_empty() {
        return Err(RfError::EmptyCapture);
    }
    let sum: u128 = samples.iter().map(|s| u128::from(s.power())).sum();
    if sum == 0 {
        return Err(RfError::ZeroPower);
    }
    Ok(10.0 * (sum as f64 / samples.len() as f64).log10())
}

/// Per-sample power in dB, each value the mean of `|x|²` over a centered
/// window of `smoothing` samples (truncated at the ends). A smoothing of 1
/// gives the instantaneous power.
pub fn power_series(samples: &[IqSample], smoothing: usize) -> Result<Vec<f64>, RfError> {
    if smoothing == 0 {
        return Err(RfError::BadSmoothing);
    }
    let n = samples.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u128);
    for s in samples {
        prefix.push(prefix.last().unwrap() + u128::from(s.power()));
    }
    let back = smoothing / 2;
    let ahead = smoothing - back;
    Ok((0..n)
        .map(|k| {
            let lo = k.saturating_sub(back);
            let hi = (k + ahead).min(n);
            let mean = (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64;
            10.0 * mean.log10()
        })
        .collect())
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

/// Outcome of [`filter_packets`].
#[derive(Debug, Clone, PartialEq)]
pub struct PacketFilter {
    /// `true` for every retained index.
    pub keep: Vec<bool>,
    pub kept: Vec<f64>,
    pub removed: usize,
    /// Half-open index ranges of the detected runs, before guard dilation.
    pub runs: Vec<(usize, usize)>,
    pub threshold_db: f64,
}

/// Drop every maximal run above `median + threshold_db`, widened by
/// `guard` samples on each side.
pub fn filter_packets(
    series: &[f64],
    threshold_db: f64,
    guard: usize,
) -> Result<PacketFilter, RfError> {
    if series.is_empty() {
        return Err(RfError::EmptySeries);
    }
    if threshold_db.is_nan() || threshold_db <= 0.0 {
        return Err(RfError::BadThreshold(threshold_db));
    }
    let n = series.len();
    let limit = median(series) + threshold_db;

    let mut runs = Vec::new();
    let mut start = None;
    for (k, &v) in series.iter().enumerate() {
        match (v > limit, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, n));
    }

    let mut keep = vec![true; n];
    for &(s, e) in &runs {
        let lo = s.saturating_sub(guard);
        let hi = e.saturating_add(guard).min(n);
        keep[lo..hi].iter_mut().for_each(|k| *k = false);
    }
    let removed = keep.iter().filter(|k| !**k).count();
    if removed as f64 > MAX_FILTERED_FRACTION * n as f64 {
        return Err(RfError::TooNoisy { removed, total: n });
    }
    let kept = series
        .iter()
        .zip(&keep)
        .filter_map(|(v, k)| k.then_some(*v))
        .collect();
    Ok(PacketFilter {
        keep,
        kept,
        removed,
        runs,
        threshold_db: limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterSettings {
    pub threshold_db: f64,
    pub guard_samples: usize,
    pub smoothing: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            threshold_db: DEFAULT_THRESHOLD_DB,
            guard_samples: DEFAULT_GUARD_SAMPLES,
            smoothing: DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseFloorReport {
    pub average_power_db: f64,
    pub sample_count_used: usize,
    pub samples_filtered: usize,
}

/// Packet filtering followed by the average power of what remains.
pub fn analyze_capture(
    capture: &IqCapture,
    settings: &FilterSettings,
) -> Result<NoiseFloorReport, RfError> {
    if capture.samples.is_empty() {
        return Err(RfError::EmptyCapture);
    }
    let series = power_series(&capture.samples, settings.smoothing)?;
    let filter = filter_packets(&series, settings.threshold_db, settings.guard_samples)?;
    let kept: Vec<IqSample> = capture
        .samples
        .iter()
        .zip(&filter.keep)
        .filter_map(|(s, k)| k.then_some(*s))
        .collect();
    Ok(NoiseFloorReport {
        average_power_db: mean_power_db(&kept)?,
        sample_count_used: kept.len(),
        samples_filtered: filter.removed,
    })
}

/// Complex white Gaussian noise at the receiver floor of `(mode, band)`.
pub fn synthesize_capture(
    mode: EnsmMode,
    band: Band,
    params: &RfModelParams,
    n_samples: usize,
    seed: u64,
) -> IqCapture {
    let target_db = rx_noise_floor(mode, band, params);
    let sigma = (10f64.powf(target_db / 10.0) / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite noise level");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || normal.sample(&mut rng).round().clamp(-32767.0, 32767.0) as i16;
    let samples = (0..n_samples)
        .map(|_| {
            let i = draw();
            let q = draw();
            IqSample { i, q }
        })
        .collect();
    IqCapture {
        samples,
        sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        band: Some(band),
        mode: Some(mode),
        agc_db: Some(params.agc_gain_db),
    }
}
