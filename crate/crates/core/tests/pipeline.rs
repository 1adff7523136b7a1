//! End-to-end pipeline checks across framing modes and detectors, plus
//! command-line behaviour (exit codes, CSV output, byte determinism).

use dqmimo::diffcode::Mode;
use dqmimo::harness::{parse_config, run_point, ChannelParams, Detector, Scheme, SimConfig};
use std::process::Command;

fn base() -> SimConfig {
    SimConfig {
        mode: Mode::Sc,
        scheme: Scheme::Dpsk,
        u: 32,
        k: 2,
        n: 64,
        n_s: 2,
        n_d: 2,
        n_cp: None,
        m: 4,
        a: 2.0,
        q_b: 1,
        vql: None,
        channel: ChannelParams {
            ts: 50e-9,
            tau_rms: 50e-9,
            doppler_hz: 0.0,
        },
        snr_grid_db: vec![10.0],
        trials: 300,
        seed: 3,
        xi: None,
        ser_threshold: 0.05,
        coherence_uses: None,
        min_bit_errors: 0,
        detector: None,
    }
}

#[test]
fn ofdm_dpsk_operates_under_doppler() {
    let config = SimConfig {
        mode: Mode::Ofdm,
        channel: ChannelParams {
            ts: 50e-9,
            tau_rms: 50e-9,
            doppler_hz: 50.0,
        },
        ..base()
    };
    config.validate().unwrap();
    let rec = run_point(&config, 15.0, true).unwrap();
    assert!(rec.ber < 0.02, "OFDM BER {:.3e}", rec.ber);
    // Fast fading degrades but does not break detection.
    let fast = SimConfig {
        channel: ChannelParams {
            ts: 50e-9,
            tau_rms: 50e-9,
            doppler_hz: 5000.0,
        },
        ..config
    };
    let rec_fast = run_point(&fast, 15.0, true).unwrap();
    assert!(rec_fast.ber < 0.1, "fast-fading BER {:.3e}", rec_fast.ber);
}

#[test]
fn two_bit_dpsk_beats_one_bit() {
    let one_bit = base();
    let two_bit = SimConfig { q_b: 2, ..base() };
    let r1 = run_point(&one_bit, 5.0, true).unwrap();
    let r2 = run_point(&two_bit, 5.0, true).unwrap();
    assert!(
        r2.ber < r1.ber,
        "2-bit {:.3e} not below 1-bit {:.3e}",
        r2.ber,
        r1.ber
    );
}

#[test]
fn dapsk_detector_family_runs() {
    for (det, q_b) in [
        (Detector::Ml, 1),
        (Detector::Id, 1),
        (Detector::Multibit, 2),
        (Detector::Energy, 2),
    ] {
        let config = SimConfig {
            scheme: Scheme::Dapsk,
            k: 1,
            n_s: 1,
            n_d: 1,
            m: 8,
            q_b,
            u: 42,
            n: 32,
            trials: 100,
            channel: ChannelParams {
                ts: 50e-9,
                tau_rms: 0.0,
                doppler_hz: 0.0,
            },
            detector: Some(det),
            ..base()
        };
        config.validate().unwrap();
        let rec = run_point(&config, 15.0, true).unwrap();
        // Phase bits decode reliably at 15 dB for every detector; the
        // one-bit detectors keep an amplitude floor.
        let phase_errors = rec.counts.bit_errors - rec.counts.amp_bit_errors;
        let phase_bits = rec.counts.bits - rec.counts.amp_bits;
        let phase_ber = phase_errors as f64 / phase_bits as f64;
        assert!(phase_ber < 0.05, "{det:?}: phase BER {phase_ber:.3e}");
    }
}

#[test]
fn vql_detects_amplitude_where_plain_one_bit_cannot() {
    let vql = SimConfig {
        scheme: Scheme::Dapsk,
        k: 1,
        n_s: 1,
        n_d: 1,
        m: 8,
        q_b: 1,
        u: 126,
        n: 32,
        vql: Some([42, 42, 42]),
        trials: 300,
        channel: ChannelParams {
            ts: 50e-9,
            tau_rms: 0.0,
            doppler_hz: 0.0,
        },
        detector: Some(Detector::Vql),
        ..base()
    };
    vql.validate().unwrap();
    let rec = run_point(&vql, 10.0, true).unwrap();
    let amp_rate = rec.counts.amp_bit_errors as f64 / rec.counts.amp_bits as f64;
    assert!(amp_rate < 0.05, "VQL amplitude error {amp_rate:.3e}");

    let id = SimConfig {
        vql: None,
        detector: Some(Detector::Id),
        ..vql
    };
    let rec_id = run_point(&id, 10.0, true).unwrap();
    let id_rate = rec_id.counts.amp_bit_errors as f64 / rec_id.counts.amp_bits as f64;
    assert!(
        id_rate > 10.0 * amp_rate,
        "plain one-bit amplitude {id_rate:.3e} vs VQL {amp_rate:.3e}"
    );
}

#[test]
fn qpsk_ber_falls_with_antenna_count_at_zero_db() {
    // Flat channel, 4-DPSK, 0 dB: quadrupling the array strictly reduces
    // the measured BER.
    let mut bers = Vec::new();
    for u in [32usize, 128] {
        let config = SimConfig {
            u,
            n: 16,
            m: 4,
            trials: 10_000,
            channel: ChannelParams {
                ts: 50e-9,
                tau_rms: 0.0,
                doppler_hz: 0.0,
            },
            ..base()
        };
        let rec = run_point(&config, 0.0, true).unwrap();
        bers.push(rec.ber);
    }
    assert!(
        bers[1] < bers[0],
        "BER did not fall with antennas: {:.3e} -> {:.3e}",
        bers[0],
        bers[1]
    );
}

#[test]
fn config_round_trips_through_toml() {
    let config = base();
    let text = toml::to_string(&config).unwrap();
    let parsed = parse_config(&text).unwrap();
    assert_eq!(parsed.u, config.u);
    assert_eq!(parsed.snr_grid_db, config.snr_grid_db);
    assert_eq!(parsed.channel.tau_rms, config.channel.tau_rms);
}

// ---------------------------------------------------------------------------
// Command-line behaviour
// ---------------------------------------------------------------------------

const CLI_CONFIG: &str = r#"
mode = "sc"
scheme = "dpsk"
u = 16
k = 2
n = 32
n_s = 2
n_d = 2
m = 4
q_b = 1
snr_grid_db = [0.0, 10.0]
trials = 50
seed = 9
min_bit_errors = 0

[channel]
ts = 5e-8
tau_rms = 5e-8
"#;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dqmimo"))
}

#[test]
fn cli_simulate_writes_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, CLI_CONFIG).unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");

    for (out, serial) in [(&out_a, false), (&out_b, true)] {
        let mut cmd = cli();
        cmd.arg("simulate")
            .arg("--config")
            .arg(&config_path)
            .arg("--out")
            .arg(out);
        if serial {
            cmd.arg("--serial");
        }
        let status = cmd.status().unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b, "serial and parallel CLI runs differ");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("snr_db,ber,ser,spectral_efficiency,bits,trials,seed\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn cli_rejects_bad_configs_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("bad.toml");
    std::fs::write(&config_path, CLI_CONFIG.replace("q_b = 1", "q_b = 7")).unwrap();
    let status = cli()
        .arg("simulate")
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, format!("{CLI_CONFIG}\nmystery = 1\n")).unwrap();
    let status = cli()
        .arg("simulate")
        .arg("--config")
        .arg(&unknown)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));

    let status = cli()
        .arg("simulate")
        .arg("--config")
        .arg("/nonexistent.toml")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(3));
}

#[test]
fn cli_info_and_calibrate_run() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(&config_path, CLI_CONFIG).unwrap();
    let out = cli()
        .arg("info")
        .arg("--config")
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("channel taps L = 11"), "{text}");
    assert!(text.contains("bussgang eta"), "{text}");

    let table = cli()
        .args([
            "calibrate-threshold",
            "--u",
            "16",
            "--snr-db",
            "10",
            "--trials",
            "2000",
        ])
        .output()
        .unwrap();
    assert_eq!(table.status.code(), Some(0));
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(
        text.starts_with("u,snr_db,gamma_mc,gamma_analytic"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn cli_sweep_applies_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let status = cli()
        .args([
            "sweep",
            "--snr-db",
            "0,5",
            "--trials",
            "20",
            "--seed",
            "123",
            "--detector",
            "decoupled",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,"));
    assert!(rows[2].starts_with("5,"));
    assert!(rows[1].ends_with(",123"));
}
