use std::path::PathBuf;
use std::process::Command;

use chialvo::cli::*;
use chialvo::fixed_points::{find_fixed_points, SearchOptions};
use chialvo::map::presets::fixed_point_family;

const FINGER_BLOCK: &str = "# finger family\na = 0.5\nb = 0.4\nc = 0.89\nk0 = -0.44\nk = -1.6\nalpha = 0.1\nbeta = 0.1\nk1 = 0.1\nk2 = 0.2\n";

fn run_args(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chialvo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn parse_applies_defaults() {
    let p = parse_config("a = 0.5\nb = 0.4").unwrap();
    assert_eq!(p.config.f64("a").unwrap(), 0.5);
    assert_eq!(p.config.f64("b").unwrap(), 0.4);
    assert_eq!(p.config.f64("c").unwrap(), 0.89);
    assert!(p.defaults.contains(&"c") && !p.defaults.contains(&"a"));
}

#[test]
fn parse_errors_name_the_line() {
    let e = parse_config("a = fast").unwrap_err();
    assert_eq!(e.line, Some(1));
    assert!(e.to_string().starts_with("line 1:"));
    assert_eq!(parse_config("a = 1\n\nspeed = 3").unwrap_err().line, Some(3));
    assert_eq!(parse_config("a = 1\njust words").unwrap_err().line, Some(2));
    assert_eq!(parse_config("planar = maybe").unwrap_err().line, Some(1));
    assert_eq!(parse_config("sweep_param = omega").unwrap_err().line, Some(1));
    assert_eq!(parse_config("n = -3").unwrap_err().line, Some(1));
}

#[test]
fn emitted_config_reparses_equal() {
    let first = parse_config(FINGER_BLOCK).unwrap().config;
    let again = parse_config(&first.emit()).unwrap();
    assert_eq!(first, again.config);
    assert!(again.defaults.is_empty());
    let mut odd = first.clone();
    odd.set("k", "0.1", None).unwrap();
    odd.set("sweep_start", "-1e-300", None).unwrap();
    odd.set("cont_max", "inf", None).unwrap();
    assert_eq!(parse_config(&odd.emit()).unwrap().config, odd);
}

#[test]
fn fixed_points_at_k_7_6_has_four_rows() {
    let cfg = scratch("census.cfg");
    std::fs::write(&cfg, "a = 0.5\nb = 0.4\nc = 0.89\nk0 = -0.44\nalpha = 0.1\nbeta = 0.1\nk1 = 0.1\nk2 = 0.2\n").unwrap();
    let (code, out, _) = run_args(&["fixed-points", "--config", cfg.to_str().unwrap(), "--set", "k=7.6"]);
    assert_eq!(code, EXIT_OK);
    let data = rows(&out);
    assert_eq!(data.len(), 4);
    assert!(out.contains("\nk,x,y,phi,re_l1,im_l1,re_l2,im_l2,re_l3,im_l3,type\n"));
    let want = find_fixed_points(&fixed_point_family(7.6), &SearchOptions::default()).unwrap();
    for (line, root) in data.iter().zip(&want.roots) {
        let x: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x, root.x);
    }
    assert!(data.iter().filter(|l| l.ends_with(",stable")).count() == 1);
}

#[test]
fn header_echoes_version_seed_and_config() {
    let (_, out, _) = run_args(&["orbit", "--seed", "42", "--set", "n_keep=5", "--set", "n_transient=0"]);
    assert!(out.starts_with(&format!("# chialvo {VERSION}\n# command orbit\n# seed 42\n")));
    let echoed = config_from_header(&out).unwrap();
    assert_eq!(echoed.config.u64("seed").unwrap(), 42);
    assert_eq!(echoed.config.usize("n_keep").unwrap(), 5);
    assert_eq!(rows(&out).len(), 5);
}

#[test]
fn rerunning_from_the_header_reproduces_the_data() {
    let (_, first, _) = run_args(&["bifurcation", "--set", "sweep_start=-1.7", "--set", "sweep_stop=-1.5", "--set", "sweep_n=5", "--set", "n_keep=12"]);
    let cfg = scratch("echo.cfg");
    std::fs::write(&cfg, config_from_header(&first).unwrap().config.emit()).unwrap();
    let (code, second, _) = run_args(&["bifurcation", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(data_section(&first), data_section(&second));
    assert_eq!(rows(&first).len(), 5 * 12);
}

#[test]
fn worker_count_does_not_change_data() {
    let base = ["sweep2d", "--set", "sweep_start=-2", "--set", "sweep_stop=0", "--set", "sweep_n=6", "--set", "sweep2_param=c", "--set", "sweep2_start=0.8", "--set", "sweep2_stop=1", "--set", "sweep2_n=4", "--set", "n_transient=2000", "--set", "n_keep=300"];
    let with_workers = |w: &str| {
        let mut args = base.to_vec();
        args.extend(["--workers", w]);
        run_args(&args)
    };
    let (c1, one, _) = with_workers("1");
    let (c8, eight, _) = with_workers("8");
    assert_eq!((c1, c8), (EXIT_OK, EXIT_OK));
    assert_eq!(data_section(&one), data_section(&eight));
    assert_eq!(rows(&one).len(), 24);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let (code, _, err) = run_args(&["transmogrify"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("usage:"));
    assert_eq!(run_args(&[]).0, EXIT_CONFIG);
    assert_eq!(run_args(&["orbit", "--frobnicate"]).0, EXIT_CONFIG);
    assert_eq!(run_args(&["orbit", "--set", "zeta=1"]).0, EXIT_CONFIG);
    assert_eq!(run_args(&["orbit", "--config", "/nonexistent/x.cfg"]).0, EXIT_CONFIG);
    let (code, _, err) = run_args(&["bifurcation"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("sweep_start"));
    assert_eq!(err.lines().count(), 1);
    assert_eq!(run_args(&["fixed-points", "--set", "a=1"]).0, EXIT_CONFIG);
}

#[test]
fn numeric_failures_exit_3() {
    let (code, _, err) = run_args(&["continue", "--set", "cont_root=7"]);
    assert_eq!(code, EXIT_NUMERIC);
    assert_eq!(err.lines().count(), 1);
    assert_eq!(run_args(&["lyapunov", "--set", "x0=5", "--set", "y0=20"]).0, EXIT_NUMERIC);
}

#[test]
fn divergence_is_fatal_only_when_bounded_output_is_required() {
    let args = ["orbit", "--set", "x0=5", "--set", "y0=20", "--set", "n_transient=0", "--set", "n_keep=3"];
    assert_eq!(run_args(&args).0, EXIT_OK);
    let mut strict = args.to_vec();
    strict.push("--require-bounded");
    assert_eq!(run_args(&strict).0, EXIT_DIVERGED);
    assert_eq!(run_args(&["orbit", "--set", "n_keep=3", "--require-bounded"]).0, EXIT_OK);
}

#[test]
fn tables_go_to_sidecar_files() {
    let out = scratch("basin.csv");
    let args = ["basin", "--set", "k=-1.594", "--set", "basin_nx=6", "--set", "basin_ny=5", "--set", "max_iter=5000", "--out", out.to_str().unwrap()];
    let (code, stdout, _) = run_args(&args);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    let main = std::fs::read_to_string(&out).unwrap();
    assert_eq!(rows(&main).len(), 30);
    let side = std::fs::read_to_string(scratch("basin.catalog.csv")).unwrap();
    assert!(side.contains("\nlabel,kind,period,points\n"));

    let (code, stdout, _) = run_args(&["continue", "--set", "k=7.6", "--set", "cont_free=k", "--set", "cont_root=2", "--set", "cont_min=0", "--set", "cont_max=12"]);
    assert_eq!(code, EXIT_OK);
    let events = stdout.split("# table events\n").nth(1).unwrap();
    assert!(events.starts_with("kind,param,x,y,phi\n"));
    assert!(events.lines().any(|l| l.starts_with("LP,")));
}

#[test]
fn every_subcommand_runs() {
    let small: &[&[&str]] = &[
        &["fixed-points"],
        &["orbit", "--set", "n_keep=4"],
        &["lyapunov", "--set", "lyapunov_iters=2000"],
        &["lyapunov-sweep", "--set", "sweep_start=-1.7", "--set", "sweep_stop=-1.6", "--set", "sweep_n=3", "--set", "lyapunov_iters=1000"],
        &["bifurcation", "--set", "sweep_start=-1.7", "--set", "sweep_stop=-1.6", "--set", "sweep_n=3", "--set", "n_keep=4"],
        &["sweep2d", "--set", "sweep_start=-1.7", "--set", "sweep_stop=-1.6", "--set", "sweep_n=2", "--set", "sweep2_start=0.5", "--set", "sweep2_stop=0.51", "--set", "sweep2_n=2", "--set", "n_keep=200"],
        &["continue", "--set", "k=7.6", "--set", "cont_n_max=20"],
        &["critical-set", "--set", "planar=true", "--set", "grid_n=30"],
        &["critical-set", "--set", "grid_n=8", "--set", "critical_image=true"],
        &["preimages", "--set", "planar=true", "--set", "target_n=3", "--set", "pre_grid_n=2001"],
        &["preimages", "--set", "target_n=3", "--set", "pre_grid_n=2001"],
        &["basin", "--set", "basin_nx=3", "--set", "basin_ny=3", "--set", "max_iter=2000"],
        &["network", "--set", "n=12", "--set", "r=2", "--set", "net_transient=50", "--set", "net_record=3", "--set", "net_seeds=2"],
        &["network", "--set", "n=12", "--set", "r=2", "--set", "net_transient=50", "--set", "net_record=3", "--set", "net_output=field"],
        &["network", "--set", "n=12", "--set", "r=2", "--set", "net_transient=50", "--set", "net_record=3", "--set", "net_output=end"],
        &["network", "--set", "n=12", "--set", "r=2", "--set", "net_transient=50", "--set", "net_record=3", "--set", "net_output=recurrence"],
        &["xk-scan", "--set", "n=12", "--set", "r=2", "--set", "net_transient=50", "--set", "xk_n=3"],
    ];
    let expect_rows = [None, Some(4), Some(1), Some(3), Some(12), Some(4), Some(20), None, None, Some(3), Some(3), Some(9), Some(2), Some(36), Some(12), Some(144), Some(36)];
    for (args, want) in small.iter().zip(expect_rows) {
        let (code, out, err) = run_args(args);
        assert_eq!(code, EXIT_OK, "{args:?}: {err}");
        let data: Vec<&str> = out.split("# table").next().unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        if let Some(n) = want {
            assert_eq!(data.len(), n, "{args:?}");
        } else {
            assert!(!data.is_empty(), "{args:?}");
        }
    }
}

#[test]
fn binary_honours_the_worker_variable() {
    let exe = env!("CARGO_BIN_EXE_chialvo");
    let args = ["basin", "--set", "k=-1.594", "--set", "basin_nx=8", "--set", "basin_ny=8", "--set", "max_iter=5000"];
    let run = |w: &str| Command::new(exe).args(args).env("CHIALVO_WORKERS", w).output().unwrap();
    let (a, b) = (run("1"), run("8"));
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let bad = Command::new(exe).arg("nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_CONFIG));
}
