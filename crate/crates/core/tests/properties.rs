//! Property tests with independent oracles.

use std::collections::BTreeMap;

use proptest::prelude::*;
use tdd_turnaround::ensm::{turnaround_budget, ClockConfig, Direction, EnsmMode, TimingProfile};
use tdd_turnaround::rf::{
    analyze_capture, average_power_db, filter_packets, synthesize_capture, Band, FilterSettings,
    IqCapture, IqSample, RfModelParams, TxPowerLevels,
};
use tdd_turnaround::sim::{
    expand_schedule, measure_turnaround, sample_trace, Command, CommandKind, EventEffect,
    SimConfig, TraceWindow,
};
use tdd_turnaround::spi::{
    decode_frame, decode_lo_command, encode_frame, frame_duration, lo_divider_command, Chain,
    LoDividerConfig, LoDividerEntry, SpiFrame,
};
use tdd_turnaround::{TimeSpan, Timestamp};

fn frame_strategy() -> impl Strategy<Value = SpiFrame> {
    (any::<bool>(), 0u8..8, 0u16..1024, any::<u8>()).prop_map(|(write, extra, addr, data)| {
        SpiFrame {
            write,
            extra_byte_count: extra,
            register_address: addr,
            data,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn spi_roundtrip(f in frame_strategy()) {
        let bits = encode_frame(&f).unwrap();
        prop_assert_eq!(bits.len(), 24);
        prop_assert_eq!(bits.bits()[0], f.write);
        prop_assert_eq!(decode_frame(&bits).unwrap(), f);
        prop_assert_eq!(SpiFrame::from_hex(&f.to_hex().unwrap()).unwrap(), f);
        prop_assert_eq!(SpiFrame::from_bytes(f.to_bytes().unwrap()).unwrap(), f);
    }
}

#[test]
fn spi_roundtrip_boundaries() {
    let mut count = 0;
    for write in [false, true] {
        for extra in [0u8, 1, 6, 7] {
            for addr in [0u16, 1, 511, 512, 1022, 1023] {
                for data in [0u8, 1, 127, 128, 254, 255] {
                    let f = SpiFrame {
                        write,
                        extra_byte_count: extra,
                        register_address: addr,
                        data,
                    };
                    let bits = encode_frame(&f).unwrap();
                    assert_eq!(decode_frame(&bits).unwrap(), f);
                    count += 1;
                }
            }
        }
    }
    assert_eq!(count, 2 * 4 * 6 * 6);
}

proptest! {
    #[test]
    fn lo_command_roundtrip(
        tx_reg in 0u16..1024,
        rx_reg in 0u16..1024,
        tx_on in any::<u8>(),
        tx_off in any::<u8>(),
        rx_on in any::<u8>(),
        rx_off in any::<u8>(),
        chain_is_tx in any::<bool>(),
        power_on in any::<bool>(),
    ) {
        prop_assume!(tx_on != tx_off && rx_on != rx_off);
        // Keep the two chains distinguishable.
        prop_assume!(tx_reg != rx_reg);
        let cfg = LoDividerConfig {
            tx: Some(LoDividerEntry { register: tx_reg, on_value: tx_on, off_value: tx_off }),
            rx: Some(LoDividerEntry { register: rx_reg, on_value: rx_on, off_value: rx_off }),
        };
        let chain = if chain_is_tx { Chain::Tx } else { Chain::Rx };
        let frame = lo_divider_command(chain, power_on, &cfg).unwrap();
        let decoded = decode_frame(&encode_frame(&frame).unwrap()).unwrap();
        let cmd = decode_lo_command(&decoded, &cfg).unwrap();
        prop_assert_eq!(cmd.chain, chain);
        prop_assert_eq!(cmd.power_on, power_on);
    }

    /// `k * d(k f)` equals `d(f)` up to the picosecond rounding of each term.
    #[test]
    fn frame_duration_inverse_in_clock(f in 1u64..=6_250_000, k in 1u64..=8) {
        let clocks = |hz| ClockConfig { spi_clock_hz: hz, ..ClockConfig::default() };
        let base = frame_duration(&clocks(f)).unwrap().as_ps() as i128;
        let scaled = frame_duration(&clocks(k * f)).unwrap().as_ps() as i128;
        prop_assert!((scaled * k as i128 - base).abs() <= k as i128);
    }
}

#[test]
fn frame_duration_inverse_exact_for_divisors() {
    let clocks = |hz| ClockConfig {
        spi_clock_hz: hz,
        ..ClockConfig::default()
    };
    for f in [1_000_000u64, 2_000_000, 3_000_000, 5_000_000, 6_000_000, 6_250_000] {
        for k in 1..=8 {
            // Only clocks whose frame time is a whole number of picoseconds.
            if k * f > 50_000_000 || 24_000_000_000_000 % (k * f) != 0 {
                continue;
            }
            let base = frame_duration(&clocks(f)).unwrap();
            let scaled = frame_duration(&clocks(k * f)).unwrap();
            assert_eq!(scaled.as_ps() * k, base.as_ps(), "f={f} k={k}");
        }
    }
}

fn profile_strategy() -> impl Strategy<Value = TimingProfile> {
    (
        0u64..100_000,
        0u64..50_000,
        0u64..50_000,
        0u64..5_000,
        0u64..2_000,
        0u64..2_000,
    )
        .prop_map(|(vco, pll, dac, flush, up, down)| TimingProfile {
            vco_cal_ns: vco,
            pll_lock_ns: pll,
            dac_powerup_ns: dac,
            flush_cycles: flush,
            lo_div_powerup_ns: up,
            lo_div_powerdown_ns: down,
        })
}

fn clocks_strategy() -> impl Strategy<Value = ClockConfig> {
    (1_000_000u64..500_000_000, 1_000_000u64..=50_000_000).prop_map(|(adc, spi)| ClockConfig {
        adc_clock_hz: adc,
        spi_clock_hz: spi,
        ..ClockConfig::default()
    })
}

/// Closed-form totals in picoseconds, written out per mode.
fn closed_form_ps(mode: EnsmMode, dir: Direction, c: &ClockConfig, p: &TimingProfile) -> u64 {
    let ns = |v: u64| v * 1_000;
    let round_div = |num: u128, den: u128| ((num + den / 2) / den) as u64;
    let flush = round_div(p.flush_cycles as u128 * 1_000_000_000_000, c.adc_clock_hz as u128);
    let spi = round_div(24 * 1_000_000_000_000, c.spi_clock_hz as u128);
    let tx = dir == Direction::RxToTx;
    let dac = if tx { ns(p.dac_powerup_ns) } else { 0 };
    match mode {
        EnsmMode::StandardEnsmTdd => ns(p.vco_cal_ns) + ns(p.pll_lock_ns).max(dac).max(flush),
        EnsmMode::StandardTdd => ns(p.pll_lock_ns).max(dac).max(flush),
        EnsmMode::StandardTddDualSynth => dac.max(flush),
        EnsmMode::FddIndependent => dac,
        EnsmMode::Fdd => 0,
        EnsmMode::LoControl => {
            spi + if tx {
                ns(p.lo_div_powerup_ns)
            } else {
                ns(p.lo_div_powerdown_ns)
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn budget_stage_law(p in profile_strategy(), c in clocks_strategy()) {
        for mode in EnsmMode::ALL {
            for dir in Direction::BOTH {
                let b = turnaround_budget(mode, dir, &c, &p).unwrap();
                let mut stages: BTreeMap<usize, u64> = BTreeMap::new();
                for comp in b.components() {
                    let e = stages.entry(comp.stage).or_default();
                    *e = (*e).max(comp.duration.as_ps());
                }
                let law: u64 = stages.values().sum();
                prop_assert_eq!(b.total().as_ps(), law);
                prop_assert_eq!(b.total().as_ps(), closed_form_ps(mode, dir, &c, &p));
            }
        }
    }

    #[test]
    fn budget_monotone_in_profile(p in profile_strategy(), which in 0usize..6, bump in 1u64..10_000) {
        let mut q = p;
        match which {
            0 => q.vco_cal_ns += bump,
            1 => q.pll_lock_ns += bump,
            2 => q.dac_powerup_ns += bump,
            3 => q.flush_cycles += bump,
            4 => q.lo_div_powerup_ns += bump,
            _ => q.lo_div_powerdown_ns += bump,
        }
        let c = ClockConfig::default();
        for mode in EnsmMode::ALL {
            for dir in Direction::BOTH {
                let before = turnaround_budget(mode, dir, &c, &p).unwrap().total();
                let after = turnaround_budget(mode, dir, &c, &q).unwrap().total();
                prop_assert!(after >= before);
            }
        }
    }

    #[test]
    fn lo_control_scales_with_spi_clock(spi in 1_000_000u64..=50_000_000, p in profile_strategy()) {
        let c = ClockConfig { spi_clock_hz: spi, ..ClockConfig::default() };
        let frame = frame_duration(&c).unwrap();
        let up = turnaround_budget(EnsmMode::LoControl, Direction::RxToTx, &c, &p).unwrap();
        let down = turnaround_budget(EnsmMode::LoControl, Direction::TxToRx, &c, &p).unwrap();
        prop_assert_eq!(up.total(), frame + TimeSpan::from_ns(p.lo_div_powerup_ns));
        prop_assert_eq!(down.total(), frame + TimeSpan::from_ns(p.lo_div_powerdown_ns));
    }
}

/// Mark every sample above the limit, then dilate by scanning each
/// sample's neighbourhood.
fn brute_force_filter(series: &[f64], threshold_db: f64, guard: usize) -> Vec<bool> {
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let hot: Vec<bool> = series.iter().map(|&v| v > median + threshold_db).collect();
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(guard);
            let hi = (i + guard).min(series.len() - 1);
            !(lo..=hi).any(|j| hot[j])
        })
        .collect()
}

fn burst_fixture() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (
        200usize..2_000,
        proptest::collection::vec((0.0f64..1.0, 1usize..60, 15.0f64..40.0), 0..4),
        0usize..24,
        any::<u64>(),
    )
        .prop_map(|(n, bursts, guard, seed)| {
            // Baseline ripple within +-1 dB from a cheap LCG.
            let mut state = seed | 1;
            let mut series: Vec<f64> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
                })
                .collect();
            for (pos, len, level) in bursts {
                let start = (pos * n as f64) as usize;
                for v in series.iter_mut().skip(start).take(len) {
                    *v = level;
                }
            }
            (series, guard)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn filter_matches_dilation_oracle((series, guard) in burst_fixture()) {
        let expected = brute_force_filter(&series, 10.0, guard);
        let f = filter_packets(&series, 10.0, guard).unwrap();
        prop_assert_eq!(&f.keep, &expected);
        prop_assert_eq!(f.removed, expected.iter().filter(|k| !**k).count());
        prop_assert_eq!(f.kept.len() + f.removed, series.len());
        let again = filter_packets(&f.kept, 10.0, guard).unwrap();
        prop_assert_eq!(again.removed, 0);
    }
}

#[test]
fn filter_single_burst_oracle() {
    let mut series = vec![0.0; 2_000];
    series[700..800].iter_mut().for_each(|v| *v = 20.0);
    let expected = brute_force_filter(&series, 10.0, 16);
    let removed = expected.iter().filter(|k| !**k).count();
    assert_eq!(removed, 132);
    let f = filter_packets(&series, 10.0, 16).unwrap();
    assert_eq!(f.keep, expected);
}

fn samples_strategy(max: i16) -> impl Strategy<Value = Vec<IqSample>> {
    proptest::collection::vec((-max..=max, -max..=max), 1..500)
        .prop_map(|v| v.into_iter().map(|(i, q)| IqSample::new(i, q)).collect())
}

proptest! {
    #[test]
    fn average_power_scale_covariant(samples in samples_strategy(3_276)) {
        let base = IqCapture::new(samples.clone());
        prop_assume!(samples.iter().any(|s| s.i != 0 || s.q != 0));
        let scaled = IqCapture::new(samples.iter().map(|s| IqSample::new(s.i * 10, s.q * 10)).collect());
        let d = average_power_db(&scaled).unwrap() - average_power_db(&base).unwrap();
        prop_assert!((d - 20.0).abs() < 1e-9, "delta {}", d);
    }

    #[test]
    fn average_power_matches_two_pass_oracle(samples in samples_strategy(32_767)) {
        prop_assume!(samples.iter().any(|s| s.i != 0 || s.q != 0));
        // Magnitudes first, then a separate pass over their squares.
        let mags: Vec<f64> = samples.iter().map(|s| f64::from(s.i).hypot(f64::from(s.q))).collect();
        let mean = mags.iter().map(|m| m * m).sum::<f64>() / mags.len() as f64;
        let oracle = 10.0 * mean.log10();
        let got = average_power_db(&IqCapture::new(samples)).unwrap();
        prop_assert!((got - oracle).abs() < 1e-9);
    }
}

#[test]
fn synthesize_analyze_closes_loop() {
    let params = RfModelParams::default();
    for mode in EnsmMode::ALL {
        for band in Band::ALL {
            let cap = synthesize_capture(mode, band, &params, 100_000, 1);
            let report = analyze_capture(&cap, &FilterSettings::default()).unwrap();
            let target = tdd_turnaround::rf::rx_noise_floor(mode, band, &params);
            assert!(
                (report.average_power_db - target).abs() < 0.1,
                "{mode} {band}: {} vs {target}",
                report.average_power_db
            );
            assert_eq!(report.sample_count_used + report.samples_filtered, 100_000);
        }
    }
}

fn sim_config(spi_hz: u64, band: Band) -> SimConfig {
    SimConfig {
        clocks: ClockConfig {
            spi_clock_hz: spi_hz,
            ..ClockConfig::default()
        },
        profile: TimingProfile::default(),
        levels: TxPowerLevels::for_band(band, &RfModelParams::default()),
        initial_lo: None,
    }
}

#[test]
fn measured_turnaround_tracks_budget() {
    let window = TraceWindow {
        start: Timestamp::from_ns(-5_000),
        end: Timestamp::from_ns(5_000),
        ..TraceWindow::default()
    };
    for spi in [10_000_000, 25_000_000, 50_000_000] {
        for (kind, dir, effect) in [
            (CommandKind::LoOn, Direction::RxToTx, EventEffect::LoPoweredUp),
            (CommandKind::LoOff, Direction::TxToRx, EventEffect::LoPoweredDown),
        ] {
            let cfg = sim_config(spi, Band::Band2G4);
            let tl = expand_schedule(&[Command::new(0, kind)], &cfg).unwrap();
            let exact = tl.events.iter().find(|e| e.effect == effect).unwrap().time;
            let trace = sample_trace(&tl, &window).unwrap();
            let measured = measure_turnaround(&trace, Timestamp::ZERO, dir).unwrap();
            let budget = turnaround_budget(EnsmMode::LoControl, dir, &cfg.clocks, &cfg.profile)
                .unwrap()
                .total();
            assert_eq!(exact.since(Timestamp::ZERO), Some(budget));
            assert!(measured >= budget, "{spi} {dir}");
            assert!(measured.as_ps() - budget.as_ps() < window.interval.as_ps(), "{spi} {dir}");
        }
    }
}

proptest! {
    #[test]
    fn trace_determinism(t0 in 0u64..3_000, band_5g in any::<bool>()) {
        let band = if band_5g { Band::Band5G } else { Band::Band2G4 };
        let cmds = [Command::new(t0, CommandKind::LoOn), Command::new(t0 + 2_000, CommandKind::LoOff)];
        let cfg = sim_config(50_000_000, band);
        let window = TraceWindow { end: Timestamp::from_ns(8_000), ..TraceWindow::default() };
        let a = sample_trace(&expand_schedule(&cmds, &cfg).unwrap(), &window).unwrap();
        let b = sample_trace(&expand_schedule(&cmds, &cfg).unwrap(), &window).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
        prop_assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn halving_interval_never_hurts(t0 in 0u64..1_000, interval in 2u64..200, on in any::<bool>()) {
        let interval = interval * 2;
        let (kind, dir, effect) = if on {
            (CommandKind::LoOn, Direction::RxToTx, EventEffect::LoPoweredUp)
        } else {
            (CommandKind::LoOff, Direction::TxToRx, EventEffect::LoPoweredDown)
        };
        let cfg = sim_config(50_000_000, Band::Band2G4);
        let tl = expand_schedule(&[Command::new(t0, kind)], &cfg).unwrap();
        let exact = tl.events.iter().find(|e| e.effect == effect).unwrap().time;
        let trigger = Timestamp::from_ns(t0 as i64);
        let exact_tt = exact.since(trigger).unwrap().as_ps() as i64;
        let err = |iv: u64| {
            let w = TraceWindow {
                start: Timestamp::from_ns(-4_000),
                end: Timestamp::from_ns(8_000),
                interval: TimeSpan::from_ns(iv),
                settling: TimeSpan::ZERO,
            };
            let tr = sample_trace(&tl, &w).unwrap();
            let m = measure_turnaround(&tr, trigger, dir).unwrap();
            (m.as_ps() as i64 - exact_tt).abs()
        };
        prop_assert!(err(interval / 2) <= err(interval));
    }

    #[test]
    fn energy_translation_invariant(shift in 0u64..10_000, band_5g in any::<bool>()) {
        let band = if band_5g { Band::Band5G } else { Band::Band2G4 };
        let cfg = sim_config(50_000_000, band);
        let schedule = |off: u64| {
            vec![
                Command::new(off, CommandKind::LoOn),
                Command::new(off + 1_000, CommandKind::TxPacketStart),
                Command::new(off + 1_800, CommandKind::TxPacketEnd),
                Command::new(off + 2_000, CommandKind::LoOff),
            ]
        };
        let window = |off: i64| TraceWindow {
            start: Timestamp::from_ns(-2_500 + off),
            end: Timestamp::from_ns(5_000 + off),
            ..TraceWindow::default()
        };
        let a = sample_trace(&expand_schedule(&schedule(0), &cfg).unwrap(), &window(0)).unwrap();
        let b = sample_trace(&expand_schedule(&schedule(shift), &cfg).unwrap(), &window(shift as i64)).unwrap();
        prop_assert_eq!(a.energy().to_bits(), b.energy().to_bits());
    }
}
