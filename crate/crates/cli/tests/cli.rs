use std::path::Path;
use std::process::Command;

use leakfree::models::{mlz, stirap};
use leakfree::sweep::first_crossing;
use leakfree_cli::config::RunConfig;
use leakfree_cli::output::{column, read_pulses, read_sweep, write_pulses, write_sweep};
use leakfree_cli::runner::{pulse_trace, run_sweep, Schema};
use leakfree_cli::{run, EXIT_CONFIG, EXIT_OK};

fn config(text: &str) -> RunConfig {
    let cfg = RunConfig::parse(text).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn stirap_config(strategies: &str, grid: &str) -> String {
    format!("[run]\nmodel = \"stirap_const\"\nstrategies = [{strategies}]\n[sweep]\nparameter = \"nu\"\n{grid}\n[tolerances]\node = 1e-11\n[output]\nname = \"run\"\npulses_at = [0.5]\npulse_samples = 101\n")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn identical_configs_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &stirap_config("\"none\", \"w1w2\"", "grid = \"list\"\nvalues = [0.3, 0.6, 0.9]"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(["leakfree", "sweep", "--config", &arg(&cfg), "--out", &arg(&a), "--threads", "1"]), EXIT_OK);
    assert_eq!(run(["leakfree", "sweep", "--config", &arg(&cfg), "--out", &arg(&b), "--threads", "2"]), EXIT_OK);
    for name in ["run.csv", "run_pulses_0.csv"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn sweep_tables_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&stirap_config("\"none\", \"w1\", \"satd\"", "grid = \"linear\"\nlo = 0.2\nhi = 1.2\nn = 4"));
    let (schema, records) = run_sweep(&cfg).unwrap();
    let (main, timing) = write_sweep(tmp.path(), &cfg, &schema, &records).unwrap();
    let back = read_sweep(&main, Some(&timing)).unwrap();
    assert_eq!(back.records, records);
    assert_eq!(back.hash, cfg.hash());
    assert_eq!(back.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(back.series, vec!["none", "w1", "satd"]);
    assert_eq!(back.columns[0], "nu[E]");

    let trace = pulse_trace(&cfg, 0.5).unwrap();
    let path = tmp.path().join("p.csv");
    write_pulses(&path, &cfg, &schema, &trace).unwrap();
    assert_eq!(read_pulses(&path).unwrap(), trace);
}

#[test]
fn single_point_matches_library_bit_for_bit() {
    let cfg = config(&stirap_config("\"none\"", "grid = \"list\"\nvalues = [0.5]"));
    let (_, records) = run_sweep(&cfg).unwrap();
    let direct = stirap::protocol_infidelity(&stirap::StirapParams::vitanov(1.0, 0.5), stirap::Protocol::Uncorrected, 1e-11).unwrap();
    assert_eq!(records[0].infidelity[0].to_bits(), direct.to_bits());

    let tmp = tempfile::tempdir().unwrap();
    let (main, _) = write_sweep(tmp.path(), &cfg, &Schema::new(&cfg), &records).unwrap();
    assert_eq!(read_sweep(&main, None).unwrap().records[0].infidelity[0].to_bits(), direct.to_bits());
}

#[test]
fn invalid_configs_exit_with_status_2_and_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        stirap_config("\"td\"", "grid = \"list\"\nvalues = [0.5]"),
        stirap_config("\"none\"", "grid = \"list\"\nvalues = [0.5, 0.4, 0.6]"),
        stirap_config("\"none\"", "grid = \"log\"\nlo = 0.0\nhi = 1.0\nn = 4"),
        "[run]\nmodel = \"qutrit\"\n".to_string(),
        "not a config".to_string(),
    ];
    for text in bad {
        let cfg = write_config(tmp.path(), &text);
        let out = Command::new(env!("CARGO_BIN_EXE_leakfree")).args(["sweep", "--config", &arg(&cfg), "--out", &arg(tmp.path())]).output().unwrap();
        assert_eq!(out.status.code(), Some(EXIT_CONFIG), "{text}");
        let diag: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(diag["status"], "config_error");
        assert!(diag["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    let cfg = write_config(tmp.path(), &stirap_config("\"none\"", "grid = \"list\"\nvalues = [0.5]"));
    let out = Command::new(env!("CARGO_BIN_EXE_leakfree")).args(["sweep", "--config", &arg(&cfg), "--tol", "1e-2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn check_subcommand_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_leakfree")).arg("check").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 6);
}

#[test]
fn uncorrected_pulses_are_the_original_pulses() {
    let cfg = config(&stirap_config("\"none\"", "grid = \"list\"\nvalues = [0.5]"));
    let trace = pulse_trace(&cfg, 0.5).unwrap();
    let h = stirap::lab_hamiltonian(&stirap::StirapParams::vitanov(1.0, 0.5));
    let (gp, gs) = (column(&trace, "none_gp_re").unwrap(), column(&trace, "none_gs_re").unwrap());
    for (row, &t) in trace.rows.iter().zip(&trace.times) {
        let m = h.eval(t);
        assert!((row[gp] - m[(0, 1)].re).abs() < 1e-12);
        assert!((row[gs] - m[(1, 2)].re).abs() < 1e-12);
    }
}

fn max_pulse_change(nu: f64) -> f64 {
    let cfg = config(&stirap_config("\"none\", \"w1w2\"", &format!("grid = \"list\"\nvalues = [{nu}]")));
    let trace = pulse_trace(&cfg, nu).unwrap();
    let mut worst: f64 = 0.0;
    for ch in ["gp_re", "gp_im", "gs_re", "gs_im"] {
        let (a, b) = (column(&trace, &format!("none_{ch}")).unwrap(), column(&trace, &format!("w1w2_{ch}")).unwrap());
        for row in &trace.rows {
            worst = worst.max((row[a] - row[b]).abs());
        }
    }
    worst
}

#[test]
fn corrected_stirap_pulses_converge_to_the_original_as_nu_shrinks() {
    let d: Vec<f64> = [0.4, 0.1, 0.025].iter().map(|&nu| max_pulse_change(nu)).collect();
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    assert!(d[2] < 0.1 * d[0], "{d:?}");
}

#[test]
fn stirap_threshold_crossings_widen_with_second_order_correction() {
    let cfg = config(&stirap_config("\"none\", \"w1w2\"", "grid = \"log\"\nlo = 0.1\nhi = 3.0\nn = 30"));
    let (_, records) = run_sweep(&cfg).unwrap();
    let xs: Vec<f64> = records.iter().map(|r| r.param).collect();
    let curve = |k: usize| records.iter().map(|r| r.infidelity[k]).collect::<Vec<_>>();
    let (x0, x2) = (first_crossing(&xs, &curve(0), 1e-3).unwrap(), first_crossing(&xs, &curve(1), 1e-3).unwrap());
    let ratio = x2 / x0;
    assert!((ratio / 2.6 - 1.0).abs() <= 0.10, "ratio {ratio}");
}

#[test]
fn uncorrected_mlz_never_reaches_low_error() {
    let cfg = config("[run]\nmodel = \"mlz\"\nstrategies = [\"none\"]\n[sweep]\nparameter = \"eta\"\ngrid = \"log\"\nlo = 0.1\nhi = 1.5\nn = 8\n");
    let (_, records) = run_sweep(&cfg).unwrap();
    assert!(records.iter().all(|r| r.ok() && r.infidelity[0] > 0.1));
}

#[test]
fn mlz_first_order_correction_drives_eight_channels() {
    let cfg = config("[run]\nmodel = \"mlz\"\nstrategies = [\"none\", \"w1\"]\n[sweep]\nparameter = \"eta\"\ngrid = \"list\"\nvalues = [0.3]\n[output]\npulse_samples = 401\n");
    let trace = pulse_trace(&cfg, 0.3).unwrap();
    assert!(trace.errors.is_empty());
    let expected = [
        ("h02_re", 0.04641395608164571),
        ("h02_im", 0.4550635469110344),
        ("h03_re", 0.45675492241227145),
        ("h03_im", 0.27241550084821653),
        ("h12_re", 0.47292442513028465),
        ("h12_im", 0.27241550084821653),
        ("h13_re", 0.04641395608164556),
        ("h13_im", 0.45506354691103457),
    ];
    let mut changed = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            for part in ["re", "im"] {
                let ch = format!("h{i}{j}_{part}");
                let (a, b) = (column(&trace, &format!("none_{ch}")).unwrap(), column(&trace, &format!("w1_nosatd_{ch}")).unwrap());
                let d = trace.rows.iter().map(|row| (row[b] - row[a]).abs()).fold(0.0, f64::max);
                if d > 1e-12 {
                    changed.push((ch, d));
                }
            }
        }
    }
    assert_eq!(changed.len(), 8, "{changed:?}");
    for ((ch, d), (want_ch, want)) in changed.iter().zip(expected) {
        assert_eq!(ch, want_ch);
        assert!((d - want).abs() <= 1e-6 * want, "{ch}: {d} vs {want}");
    }
    let p = mlz::MlzParams::equal(0.3, 0.1);
    let none = column(&trace, "none_h01_re").unwrap();
    assert!((trace.rows[0][none] - p.eta).abs() < 1e-15);
}
