use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use euler_sysid::dynamics::FhnParams;
use euler_sysid::integrate::Trajectory;
use euler_sysid::learner::{default_initial_state, generate_truth};
use euler_sysid::neural::Mlp;
use euler_sysid::sweep::read_sweep_csv;
use tempfile::TempDir;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_euler-sysid"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
}

#[test]
fn generate_default_grid_and_determinism() {
    let dir = TempDir::new().unwrap();
    let args = ["generate", "--dt", "0.01", "--t-final", "20", "--noise", "0", "--seed", "1", "--out", "clean.csv"];
    ok(&bin(dir.path(), &args));
    let first = fs::read(dir.path().join("clean.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().count(), 2002);
    assert!(text.starts_with("t,u,v\n"));
    assert!(text.ends_with('\n') && !text.ends_with("\n\n"));
    assert!(!dir.path().join("clean_noisy.csv").exists());

    ok(&bin(dir.path(), &args));
    assert_eq!(fs::read(dir.path().join("clean.csv")).unwrap(), first);

    // The file re-parses to the in-memory reference bit for bit.
    let p = FhnParams::default();
    let truth = generate_truth(&p, &default_initial_state(&p).unwrap(), 0.01, 20.0, 10).unwrap();
    let loaded = Trajectory::load(dir.path().join("clean.csv")).unwrap();
    assert_eq!(loaded, truth);
}

#[test]
fn generate_writes_noisy_copy() {
    let dir = TempDir::new().unwrap();
    ok(&bin(dir.path(), &["generate", "--t-final", "5", "--noise", "0.02", "--seed", "3", "--out", "d.csv"]));
    let clean = Trajectory::load(dir.path().join("d.csv")).unwrap();
    let noisy = Trajectory::load(dir.path().join("d_noisy.csv")).unwrap();
    assert!(clean.same_grid(&noisy));
    assert_ne!(clean.states(), noisy.states());
}

#[test]
fn generate_rejects_invalid_parameters() {
    let dir = TempDir::new().unwrap();
    let o = bin(dir.path(), &["generate", "--a", "1.5", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("0 < a < 1"), "{}", stderr(&o));
    assert!(!dir.path().join("x.csv").exists());

    let o = bin(dir.path(), &["generate", "--dt", "0.3", "--t-final", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_smoke_and_model_round_trip() {
    let dir = TempDir::new().unwrap();
    ok(&bin(dir.path(), &["generate", "--t-final", "2", "--out", "clean.csv"]));
    let o = bin(dir.path(), &["train", "--data", "clean.csv", "--epochs", "200", "--width", "16"]);
    ok(&o);
    assert!(stdout(&o).contains("final_loss="));

    let model_path = dir.path().join("model.txt");
    let net = Mlp::load(&model_path).unwrap();
    assert_eq!(net.layer_sizes(), &[2, 16, 2]);
    let resaved = dir.path().join("again.txt");
    net.save(&resaved).unwrap();
    assert_eq!(fs::read(&model_path).unwrap(), fs::read(&resaved).unwrap());

    let log = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,loss"));
    assert_eq!(log.lines().count(), 201);
}

#[test]
fn train_missing_file() {
    let dir = TempDir::new().unwrap();
    let o = bin(dir.path(), &["train", "--data", "nope.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"));
    assert!(stderr(&o).to_lowercase().contains("no such file"), "{}", stderr(&o));
}

#[test]
fn train_divergence_exits_two() {
    let dir = TempDir::new().unwrap();
    ok(&bin(dir.path(), &["generate", "--t-final", "1", "--out", "clean.csv"]));
    let o = bin(dir.path(), &["train", "--data", "clean.csv", "--epochs", "5", "--width", "4", "--lr", "1e300"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn eval_of_exact_model_is_zero() {
    let dir = TempDir::new().unwrap();
    // Zero field against a constant trajectory.
    let mut net = Mlp::init(&[2, 4, 2], 0).unwrap();
    net.weights_mut().iter_mut().for_each(|w| w.fill(0.0));
    net.save(dir.path().join("zero.txt")).unwrap();
    let rows: String = (0..11).map(|i| format!("{},0.5,-0.25\n", i as f64 * 0.1)).collect();
    fs::write(dir.path().join("flat.csv"), format!("t,u,v\n{rows}")).unwrap();

    let o = bin(dir.path(), &["eval", "--model", "zero.txt", "--truth", "flat.csv"]);
    ok(&o);
    assert_eq!(stdout(&o).trim(), "mse_u=0 mse_v=0");
    let pred = Trajectory::load(dir.path().join("pred.csv")).unwrap();
    let truth = Trajectory::load(dir.path().join("flat.csv")).unwrap();
    assert!(pred.same_grid(&truth));
}

#[test]
fn eval_rejects_mismatches() {
    let dir = TempDir::new().unwrap();
    Mlp::init(&[3, 4, 3], 0).unwrap().save(dir.path().join("m3.txt")).unwrap();
    Mlp::init(&[2, 4, 2], 0).unwrap().save(dir.path().join("m2.txt")).unwrap();
    fs::write(dir.path().join("t.csv"), "t,u,v\n0,1,2\n0.1,1,2\n0.2,1,2\n").unwrap();
    fs::write(dir.path().join("ragged.csv"), "t,u,v\n0,1,2\n0.1,1,2\n0.35,1,2\n").unwrap();

    let o = bin(dir.path(), &["eval", "--model", "m3.txt", "--truth", "t.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = bin(dir.path(), &["eval", "--model", "m2.txt", "--truth", "ragged.csv"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-uniform"));
}

#[test]
fn phase_rows_and_equilibrium_comment() {
    let dir = TempDir::new().unwrap();
    let o = bin(dir.path(), &["phase", "--out", "phase.csv"]);
    ok(&o);
    let text = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    let values: Vec<f64> = comment
        .trim_start_matches("# equilibrium ")
        .split(' ')
        .map(|kv| kv.split('=').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((values[0] + 1.1994).abs() < 1e-4 && (values[1] + 0.6243).abs() < 1e-4);
    assert_eq!(lines.next(), Some("u,cubic_v,linear_v"));
    let zero_row = lines.find(|l| l.starts_with("0,")).expect("grid contains u = 0");
    let fields: Vec<f64> = zero_row.split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(fields[1], 0.0);
    assert!((fields[2] - 0.875).abs() < 1e-15);
    assert_eq!(text.lines().count(), 2 + 501);

    let sqrt3 = 3f64.sqrt().to_string();
    let o = bin(dir.path(), &["phase", "--u-values", &format!("-1,{sqrt3}"), "--out", "p2.csv"]);
    ok(&o);
    let text = fs::read_to_string(dir.path().join("p2.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(3).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!(row[1].abs() < 1e-15);

    let o = bin(dir.path(), &["phase", "--c=-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.conf"), "# shared\nt-final = 1\ndt = 0.05\nwidth = 8\n").unwrap();
    ok(&bin(dir.path(), &["generate", "--config", "run.conf", "--out", "c.csv"]));
    let traj = Trajectory::load(dir.path().join("c.csv")).unwrap();
    assert_eq!(traj.len(), 21);

    ok(&bin(dir.path(), &["generate", "--config", "run.conf", "--dt", "0.1", "--out", "c2.csv"]));
    assert_eq!(Trajectory::load(dir.path().join("c2.csv")).unwrap().len(), 11);

    fs::write(dir.path().join("bad.conf"), "no-such-flag = 3\n").unwrap();
    let o = bin(dir.path(), &["phase", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_cell_sweep_equals_train_then_eval() {
    let dir = TempDir::new().unwrap();
    let common = ["--t-final", "2", "--seed", "7"];
    ok(&bin(dir.path(), &[&["generate", "--noise", "0.02", "--out", "clean.csv"][..], &common].concat()));
    ok(&bin(dir.path(), &[
        "train", "--data", "clean_noisy.csv", "--width", "8", "--epochs", "300", "--seed", "7",
    ]));
    let eval = bin(dir.path(), &["eval", "--model", "model.txt", "--truth", "clean.csv"]);
    ok(&eval);

    ok(&bin(dir.path(), &[
        "sweep", "--widths", "8", "--depths", "1", "--dts", "0.01", "--noise-levels", "0.02",
        "--seeds", "1", "--base-seed", "7", "--epochs", "300", "--t-final", "2", "--out", "s.csv",
    ]));
    let rows = read_sweep_csv(fs::read(dir.path().join("s.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    let expected = format!(
        "mse_u={} mse_v={}",
        euler_sysid::numfmt::format_f64(rows[0].mse_u),
        euler_sysid::numfmt::format_f64(rows[0].mse_v)
    );
    assert_eq!(stdout(&eval).trim(), expected);
}

#[test]
fn sweep_cells_are_independent_and_failures_recorded() {
    let dir = TempDir::new().unwrap();
    let base = ["sweep", "--depths", "1", "--dts", "0.05", "--seeds", "2", "--epochs", "50", "--t-final", "1"];
    ok(&bin(dir.path(), &[&base[..], &["--widths", "4,6", "--out", "all.csv"]].concat()));
    ok(&bin(dir.path(), &[&base[..], &["--widths", "6", "--out", "one.csv", "--sequential"]].concat()));
    let all = read_sweep_csv(fs::read(dir.path().join("all.csv")).unwrap().as_slice()).unwrap();
    let one = read_sweep_csv(fs::read(dir.path().join("one.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(all.len(), 4);
    for (a, b) in all[2..].iter().zip(&one) {
        assert_eq!((a.width, a.seed), (b.width, b.seed));
        assert_eq!(a.mse_u.to_bits(), b.mse_u.to_bits());
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    }

    let o = bin(dir.path(), &[&base[..], &["--widths", "4", "--lr", "1e300", "--out", "bad.csv"]].concat());
    ok(&o);
    assert!(stderr(&o).contains("failed"));
    let bad = fs::read_to_string(dir.path().join("bad.csv")).unwrap();
    for line in bad.lines().skip(1) {
        assert!(line.ends_with("nan,nan,nan,nan"), "{line}");
    }
}
