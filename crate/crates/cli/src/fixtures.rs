//! The committed fixture corpus: tone specs and their audio, listening-test
//! reports with hand-computed oracles, tracker traces, and configurations.

use std::path::{Path, PathBuf};

use clap::Args;
use multiphonic::audio::WavEncoding;
use multiphonic::harmonicity::CarrierConfig;
use multiphonic::report::AnalysisConfig;
use multiphonic::synthesis::{ExtraPartial, ToneKind, ToneSpec};
use serde_json::json;

use crate::error::CliResult;
use crate::io::{to_json, write_file};
use crate::synth::render_to;

#[derive(Debug, Args)]
pub struct FixturesArgs {
    /// Destination directory.
    #[arg(default_value = "fixtures", value_name = "DIR")]
    pub dir: PathBuf,
}

const RATE: f64 = 48000.0;

fn rolloff_gains(n: usize, silenced: &[usize]) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if silenced.contains(&k) {
                -120.0
            } else {
                -3.0 * (k as f64).log2()
            }
        })
        .collect()
}

fn fm(
    carrier: f64,
    modulator: f64,
    index: f64,
    harmonic_lock: bool,
    extra: &[(f64, f64)],
) -> ToneKind {
    ToneKind::Fm {
        carrier,
        modulator,
        index,
        harmonic_lock,
        extra_partials: extra
            .iter()
            .map(|&(frequency, gain_db)| ExtraPartial { frequency, gain_db })
            .collect(),
    }
}

pub fn tone_specs() -> Vec<(&'static str, ToneSpec)> {
    let tone = |kind| ToneSpec::new(kind, 1.0, RATE);
    vec![
        (
            // Harmonic 6 is silenced so that C5 is only reachable as harmonic 12 an octave down.
            "harmonic_f2",
            tone(ToneKind::Harmonic {
                f0: 87.31,
                partials: 12,
                rolloff_db_per_octave: 0.0,
                gains_db: Some(rolloff_gains(12, &[6])),
            }),
        ),
        (
            "power_chord_e2",
            tone(ToneKind::PowerChord {
                root: 82.41,
                add_octave: false,
            })
            .with_drive(2.0),
        ),
        ("locked_fm", tone(fm(236.0, 32.0, 2.0, true, &[]))),
        (
            "sideband_mix",
            tone(fm(
                236.0,
                37.8,
                2.0,
                true,
                &[(301.0, -12.0), (417.0, -14.0), (523.0, -16.0)],
            )),
        ),
        (
            "odd_harmonic_55",
            tone(ToneKind::OddHarmonic {
                f0: 55.0,
                partials: 4,
                rolloff_db_per_octave: 0.0,
            }),
        ),
        (
            "inharmonic_set",
            tone(fm(
                125.0,
                32.0,
                0.0,
                false,
                &[(185.0, -2.0), (252.0, -4.0), (319.0, -6.0), (390.0, -8.0)],
            )),
        ),
        ("fm_sine", tone(fm(440.0, 32.0, 0.0, false, &[]))),
        (
            "missing_fundamental",
            tone(ToneKind::Harmonic {
                f0: 55.0,
                partials: 8,
                rolloff_db_per_octave: 0.0,
                gains_db: Some(rolloff_gains(8, &[1])),
            }),
        ),
    ]
}

/// (listener, pitch, certainty, tuning)
const HARMONIC_F2_REPORTS: &[(&str, &str, f64, &str)] = &[
    ("L01", "F2", 1.0, "in-tune"),
    ("L01", "F3", 0.5, "in-tune"),
    ("L02", "F2", 1.0, "in-tune"),
    ("L03", "F2", 1.0, "in-tune"),
    ("L03", "C5", 0.75, "too-high"),
    ("L04", "F2", 0.75, "in-tune"),
    ("L04", "F3", 1.0, "in-tune"),
    ("L05", "F2", 1.0, "too-low"),
    ("L05", "F#3", 0.25, "in-tune"),
    ("L06", "F2", 1.0, "in-tune"),
    ("L06", "C5", 0.5, "in-tune"),
    ("L06", "F3", 0.25, "too-high"),
    ("L07", "F2", 0.5, "in-tune"),
    ("L08", "F2", 1.0, "in-tune"),
    ("L08", "F3", 0.75, "in-tune"),
    ("L09", "F2", 1.0, "in-tune"),
    ("L09", "C5", 1.0, "in-tune"),
    ("L10", "F2", 1.0, "in-tune"),
    ("L10", "F3", 0.5, "in-tune"),
    ("L10", "C6", 0.25, "too-low"),
];

const MISSING_FUNDAMENTAL_REPORTS: &[(&str, &str, f64, &str)] = &[
    ("L01", "C#4", 1.0, "in-tune"),
    ("L02", "C#4", 1.0, "in-tune"),
    ("L02", "A2", 0.5, "in-tune"),
    ("L03", "C#4", 0.75, "too-low"),
    ("L04", "A2", 1.0, "in-tune"),
    ("L04", "C#4", 0.5, "in-tune"),
    ("L05", "C#4", 1.0, "in-tune"),
    ("L05", "E3", 0.25, "in-tune"),
    ("L06", "C#4", 0.5, "in-tune"),
];

fn reports_csv(sample: &str, rows: &[(&str, &str, f64, &str)]) -> String {
    let mut out = String::from("sample_id,listener_id,pitch,certainty,tuning\n");
    for (listener, pitch, certainty, tuning) in rows {
        out.push_str(&format!(
            "{sample},{listener},{pitch},{certainty},{tuning}\n"
        ));
    }
    out
}

fn trace_csv(frames: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("time_s,freq_hz,confidence\n");
    for (i, (f, c)) in frames.enumerate() {
        out.push_str(&format!("{:.2},{f},{c}\n", i as f64 * 0.01));
    }
    out
}

/// Writes the whole corpus under `dir`.
pub fn write_corpus(dir: &Path) -> CliResult<()> {
    for (name, spec) in tone_specs() {
        write_file(
            &dir.join("specs").join(format!("{name}.json")),
            &to_json(&spec)?,
        )?;
        render_to(
            &spec,
            &dir.join("audio").join(format!("{name}.wav")),
            WavEncoding::Pcm16,
        )?;
    }

    let default = AnalysisConfig::<f64>::default();
    write_file(&dir.join("config/default.json"), &to_json(&default)?)?;
    let carrier = AnalysisConfig::<f64> {
        carrier: Some(CarrierConfig::default()),
        ..AnalysisConfig::default()
    };
    write_file(&dir.join("config/carrier.json"), &to_json(&carrier)?)?;

    write_file(
        &dir.join("reports/harmonic_f2.csv"),
        &reports_csv("harmonic_f2", HARMONIC_F2_REPORTS),
    )?;
    write_file(
        &dir.join("reports/missing_fundamental.csv"),
        &reports_csv("missing_fundamental", MISSING_FUNDAMENTAL_REPORTS),
    )?;
    write_file(
        &dir.join("reports/empty.csv"),
        &reports_csv("harmonic_f2", &[]),
    )?;
    write_file(
        &dir.join("reports/malformed.csv"),
        "sample_id,listener_id,pitch,certainty,tuning\nharmonic_f2,L01,F2,1.0,in-tune\nharmonic_f2,L02,F3,1.3,in-tune\n",
    )?;

    // Per-listener sums worked out by hand from the tables above.
    let harmonic_f2_oracle = json!({
        "sample_id": "harmonic_f2",
        "listener_weighted_counts": {
            "L01": 1.5, "L02": 1.0, "L03": 1.75, "L04": 1.75, "L05": 1.25,
            "L06": 1.75, "L07": 0.5, "L08": 1.75, "L09": 2.0, "L10": 1.75
        },
        "mean_weighted_count": 1.5,
        "labels": { "F2": "f0", "F3": "h2", "C5": "h12-1", "F#3": "none", "C6": "h12" }
    });
    write_file(
        &dir.join("reports/harmonic_f2.oracle.json"),
        &to_json(&harmonic_f2_oracle)?,
    )?;
    let missing_fundamental_oracle = json!({
        "sample_id": "missing_fundamental",
        "listener_weighted_counts": {
            "L01": 1.0, "L02": 1.5, "L03": 0.75, "L04": 1.5, "L05": 1.25, "L06": 0.5
        },
        "mean_weighted_count": 6.5 / 6.0,
        "labels": { "C#4": "h5", "A2": "h2", "E3": "h3" },
        // 20 frames at 0.6 confidence on C#4 against 80 at 0.9 on the absent A1.
        "tracker_overlap": { "pesto": 12.0 / 84.0 }
    });
    write_file(
        &dir.join("reports/missing_fundamental.oracle.json"),
        &to_json(&missing_fundamental_oracle)?,
    )?;

    let alternating = (0..100).map(|i| (if i % 2 == 0 { 87.31 } else { 174.61 }, 0.9));
    write_file(
        &dir.join("traces/harmonic_f2_crepe.csv"),
        &trace_csv(alternating),
    )?;
    write_file(
        &dir.join("traces/harmonic_f2_pesto.csv"),
        &trace_csv((0..100).map(|_| (87.31, 0.8))),
    )?;
    write_file(
        &dir.join("traces/harmonic_f2_unvoiced.csv"),
        &trace_csv((0..20).map(|_| (0.0, 0.0))),
    )?;
    let missing_fundamental = (0..100).map(|i| {
        if i % 5 == 4 {
            (275.0, 0.6)
        } else {
            (55.0, 0.9)
        }
    });
    write_file(
        &dir.join("traces/missing_fundamental_pesto.csv"),
        &trace_csv(missing_fundamental),
    )?;
    Ok(())
}

pub fn run(args: &FixturesArgs) -> CliResult<()> {
    write_corpus(&args.dir)
}
