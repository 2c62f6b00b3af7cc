use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swarmlab_cli::{bt_config, scenario_config, BtArgs, OutputArgs, ScenarioArgs, TableEntry};
use swarmlab_core::Protocol;

fn swarmlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove(swarmlab_cli::OUT_ENV)
        .output()
        .expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&swarmlab(&["--help"], dir.path())), 0);
    assert_eq!(code(&swarmlab(&["no-such-command"], dir.path())), 1);
    assert_eq!(code(&swarmlab(&["simulate", "--k", "two"], dir.path())), 1);
}

#[test]
fn contract_violations_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        vec!["simulate", "--lambda=0"],
        vec!["simulate", "--lambda=-1"],
        vec!["simulate", "--protocol", "bogus"],
        vec!["simulate", "--init", "one_club:x"],
        vec!["bt-simulate", "--lambda", "0.25"],
        vec!["lyapunov-constants", "--lambda", "4", "--us", "0"],
        vec!["sweep", "--param", "mu", "--values", "1"],
    ] {
        let o = swarmlab(&bad, dir.path());
        assert_eq!(code(&o), 1, "{bad:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = swarmlab(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(code(&o), 2);

    fs::write(dir.path().join("typo.toml"), "lamda = 3.0\n").unwrap();
    let o = swarmlab(&["simulate", "--config", "typo.toml"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lamda"));

    fs::write(dir.path().join("bt.toml"), "arrivals = 3\n").unwrap();
    assert_eq!(code(&swarmlab(&["bt-simulate", "--config", "bt.toml"], dir.path())), 1);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("file"), "").unwrap();
    let o = swarmlab(
        &["simulate", "--horizon", "5", "--reps", "1", "--out", "file/sub"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, "protocol = \"gs\"\nk = 6\nlambda = 3.0\nhorizon = 50.0\n").unwrap();
    let args = ScenarioArgs {
        config: Some(path.clone()),
        lambda: Some(5.0),
        ..ScenarioArgs::default()
    };
    let c = scenario_config(&args).unwrap();
    assert_eq!((c.protocol, c.k, c.lambda, c.horizon), (Protocol::Gs, 6, 5.0, 50.0));
}

#[test]
fn bt_rates_convert_to_rounds() {
    let args = BtArgs {
        config: None,
        k: Some(48),
        arrivals: None,
        lambda: Some(8.0),
        gs: true,
        init: Some("bt_mixed:499,0".into()),
        horizon: Some(5000.0),
        rounds: None,
        reps: None,
        seed: None,
        neighbor_max: None,
        tracker_topup_threshold: None,
        tracker_response: None,
        population_cap: None,
        output: OutputArgs {
            out: "unused".into(),
            name: None,
            svg: false,
        },
        slope_window: None,
    };
    let c = bt_config(&args).unwrap();
    assert_eq!((c.k, c.arrivals_per_round, c.horizon_rounds), (48, 80, 500));
    assert!(c.gs_enabled);
}

#[test]
fn table_entries_parse() {
    let e: TableEntry = "cc:3".parse().unwrap();
    assert_eq!((e.protocol, e.m, e.label()), (Protocol::Cc, 3, "cc m=3".to_string()));
    let e: TableEntry = "waiting".parse().unwrap();
    assert_eq!(e.label(), "waiting");
    assert!("cc:x".parse::<TableEntry>().is_err());
}

#[test]
fn lyapunov_constants_reports_every_condition() {
    let dir = tempfile::tempdir().unwrap();
    let o = swarmlab(&["lyapunov-constants", "--lambda", "4", "--us", "2"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("c2 = 9693"), "{text}");
    assert!(text.contains("p  = 1/19388"), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains(" true ")).count(), 10);

    let o = swarmlab(
        &["lyapunov-constants", "--lambda", "4", "--us", "2", "--json"],
        dir.path(),
    );
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["all_conditions_hold"], true);
    assert_eq!(v["constants"]["c2"], "9693");

    // c4 >= c3 breaks a preset condition.
    let o = swarmlab(
        &["lyapunov-constants", "--lambda", "4", "--us", "2", "--preset", "32,10,20"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn outputs_land_in_env_directory_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_swarmlab"))
            .args([
                "simulate", "--protocol", "unstructured", "--k", "2", "--lambda", "4", "--us",
                "2", "--init", "one_club:20", "--horizon", "40", "--reps", "2", "--svg",
            ])
            .env(swarmlab_cli::OUT_ENV, out)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a");
    run("b");
    for f in [
        "simulate.rep0.timeseries.csv",
        "simulate.rep1.sojourns.csv",
        "simulate.mean.csv",
        "simulate.summary.json",
        "simulate.svg",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let a = fs::read(dir.path().join("a/simulate.rep0.timeseries.csv")).unwrap();
    let b = fs::read(dir.path().join("a/simulate.rep1.timeseries.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn plot_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = swarmlab(
        &[
            "sweep", "--param", "k", "--values", "2,3", "--protocol", "gs", "--lambda", "3",
            "--horizon", "30", "--reps", "1", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("o/sweep.summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);

    let o = swarmlab(
        &[
            "plot", "--input", "o/sweep.k=2.mean.csv", "--columns", "population,largest_club",
            "--output", "o/p.svg",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(dir.path().join("o/p.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("largest_club"));

    let o = swarmlab(
        &["plot", "--input", "o/sweep.k=2.mean.csv", "--columns", "nope", "--output", "x.svg"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn bt_simulate_writes_round_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = swarmlab(
        &[
            "bt-simulate", "--k", "4", "--arrivals", "3", "--init", "bt_mixed:20,2", "--rounds",
            "10", "--reps", "2", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("o/bt.rep1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(dir.path().join("o/bt.mean.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("bt_") {
            let args = BtArgs {
                config: Some(path.clone()),
                k: None,
                arrivals: None,
                lambda: None,
                gs: false,
                init: None,
                horizon: None,
                rounds: None,
                reps: None,
                seed: None,
                neighbor_max: None,
                tracker_topup_threshold: None,
                tracker_response: None,
                population_cap: None,
                output: OutputArgs {
                    out: "unused".into(),
                    name: None,
                    svg: false,
                },
                slope_window: None,
            };
            bt_config(&args).unwrap_or_else(|e| panic!("{name}: {e}"));
        } else {
            let args = ScenarioArgs {
                config: Some(path.clone()),
                ..ScenarioArgs::default()
            };
            scenario_config(&args).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        seen += 1;
    }
    assert!(seen >= 4);
}
