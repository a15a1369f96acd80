//! End-to-end runs of the `aerial-iot` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aerial_iot::activation::exact_periodic_counts;
use tempfile::TempDir;

const HEADER: &str = "run_id,seed,scheme,update,t_s,n_active,n_served,all_served,total_power_w,objective_w,\
outer_iterations,total_energy_j,uav_energy_j";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aerial-iot"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small fast scenario: 30 devices, 3 UAVs, 10 channels.
const SMALL: &str = "area_m = [600.0, 600.0]\nn_devices = 30\nn_uavs = 3\nn_channels = 10\nseed = 4\n";

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn horizon_header_is_stable_and_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}n_updates = 3\n"));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["horizon", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--runs", "3", "--baseline"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER);
    assert!(!text.contains('\r'));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let rows = rows(&text);
    // 3 runs x 3 updates x 2 schemes, stationary rows share the run ids
    assert_eq!(rows.len(), 18);
    for r in 0..3 {
        let id = r.to_string();
        let prop = rows.iter().filter(|x| x[0] == id && x[2] == "proposed").count();
        let stat = rows.iter().filter(|x| x[0] == id && x[2] == "stationary").count();
        assert_eq!((prop, stat), (3, 3));
    }
    // cumulative energy never decreases and the stationary fleet never flies
    for w in rows.windows(2) {
        if w[0][0] == w[1][0] && w[0][2] == w[1][2] {
            let e0: f64 = w[0][11].parse().unwrap();
            let e1: f64 = w[1][11].parse().unwrap();
            assert!(e1 >= e0);
        }
    }
    assert!(rows.iter().filter(|x| x[2] == "stationary").all(|x| x[11] == "0"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}n_updates = 2\n"));
    let c = cfg.to_str().unwrap();
    let a = run(&["horizon", "--config", c, "--seed", "4"]);
    let b = run(&["horizon", "--config", c]);
    let d = run(&["horizon", "--config", c, "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, d.stdout);
}

#[test]
fn single_update_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}n_updates = 1\n"));
    let o = run(&["horizon", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows = rows(&text);
    assert_eq!(rows.len(), 1);
    // everyone wakes within the single interval ending at the horizon
    assert_eq!(rows[0][4], "3600");
    assert_eq!(rows[0][5], "30");
    assert_eq!(rows[0][11], "0");
}

#[test]
fn periodic_counts_match_enumeration() {
    let dir = TempDir::new().unwrap();
    let periods: Vec<f64> = (0..12).map(|i| 150.0 + 97.0 * i as f64).collect();
    let text: String = periods.iter().map(|p| format!("{p}\n")).collect();
    write(dir.path(), "periods.txt", &format!("# seconds\n{text}"));
    let cfg = write(
        dir.path(),
        "p.toml",
        "area_m = [500.0, 500.0]\nn_devices = 12\nn_uavs = 2\nn_channels = 12\nhorizon_s = 3600.0\n\
         update_times_s = [500.0, 1300.0, 2000.0, 3600.0]\n\n[activation]\nmodel = \"periodic\"\nperiods_file = \"periods.txt\"\n",
    );
    // run from another directory: the periods file resolves against the config
    let o = bin().current_dir(std::env::temp_dir()).args(["horizon", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let got: Vec<usize> = rows(&String::from_utf8(o.stdout).unwrap()).iter().map(|r| r[5].parse().unwrap()).collect();
    assert_eq!(got, exact_periodic_counts(&[500.0, 1300.0, 2000.0, 3600.0], &periods));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let k0 = write(dir.path(), "k0.toml", "n_uavs = 0\n");
    let o = run(&["snapshot", "--config", k0.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_uavs"), "{}", stderr(&o));

    let unknown = write(dir.path(), "u.toml", "n_uavs = 3\n\n[solver]\naltitude_grid = 5\nmax_iter = 4\n");
    let o = run(&["horizon", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("max_iter") && e.contains("line 5"), "{e}");

    let preset = write(dir.path(), "e.toml", "[environment]\npreset = \"suburban\"\n");
    assert_eq!(code(&run(&["snapshot", "--config", preset.to_str().unwrap()])), 2);

    let missing = dir.path().join("none.toml");
    assert_eq!(code(&run(&["snapshot", "--config", missing.to_str().unwrap()])), 1);
}

#[test]
fn zero_devices_give_an_empty_deployment() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "z.toml", "n_devices = 0\nn_uavs = 2\n");
    let out = dir.path().join("dep.toml");
    let o = run(&["snapshot", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dump: toml::Value = toml::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dump["device"].as_array().unwrap().len(), 0);
    assert_eq!(dump["uav"].as_array().unwrap().len(), 2);
    assert_eq!(dump["total_power_w"].as_float(), Some(0.0));
}

#[test]
fn snapshot_dump_and_infeasible_exit() {
    let dir = TempDir::new().unwrap();
    let devices = write(dir.path(), "dev.csv", "x_m,y_m\n100,100\n120,90\n400,380\n390,420\n");
    let cfg = write(
        dir.path(),
        "s.toml",
        &format!("area_m = [500.0, 500.0]\nn_uavs = 2\nn_channels = 4\ndevices_file = \"{}\"\n", devices.file_name().unwrap().to_str().unwrap()),
    );
    let out = dir.path().join("dep.toml");
    let metrics = dir.path().join("m.csv");
    let args = ["snapshot", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--metrics", metrics.to_str().unwrap(), "--baseline"];
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dump: toml::Value = toml::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let devs = dump["device"].as_array().unwrap();
    assert_eq!(devs.len(), 4);
    assert_eq!(devs[2]["x_m"].as_float(), Some(400.0));
    let sum: f64 = devs.iter().map(|d| d["power_w"].as_float().unwrap()).sum();
    assert!((sum - dump["total_power_w"].as_float().unwrap()).abs() <= 1e-12 * sum);
    for u in dump["uav"].as_array().unwrap() {
        let h = u["h_m"].as_float().unwrap();
        assert!((50.0..=500.0).contains(&h));
    }
    let m = fs::read_to_string(&metrics).unwrap();
    let r = rows(&m);
    assert_eq!(r.len(), 2);
    let (p, s): (f64, f64) = (r[0][9].parse().unwrap(), r[1][9].parse().unwrap());
    assert!(p <= s);

    // a power cap far below any link's need leaves everyone unserved
    let starved = write(dir.path(), "t.toml", &format!("{}p_max_w = 1e-12\n", fs::read_to_string(&cfg).unwrap()));
    let o = run(&["snapshot", "--config", starved.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let dump: toml::Value = toml::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dump["n_served"].as_integer(), Some(0));
}

#[test]
fn sweep_matches_horizon_and_survives_bad_values() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.toml", &format!("{SMALL}n_updates = 2\n"));
    let c = cfg.to_str().unwrap();
    let h = run(&["horizon", "--config", c, "--baseline", "--runs", "2"]);
    let o = run(&["sweep", "--config", c, "--axis", "n_uavs", "--values", "3", "--runs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep = String::from_utf8(o.stdout).unwrap();
    let horizon = String::from_utf8(h.stdout).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), format!("axis,value,error,{HEADER}"));
    let stripped: Vec<String> = sweep.lines().skip(1).map(|l| l.splitn(4, ',').nth(3).unwrap().to_string()).collect();
    let plain: Vec<String> = horizon.lines().skip(1).map(str::to_string).collect();
    assert_eq!(stripped, plain);

    let o = run(&["sweep", "--config", c, "--axis", "n_channels", "--values", "0,x,5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let r = rows(&text);
    assert!(r.iter().all(|x| x.len() == 16));
    assert!(r[0][1] == "0" && r[0][2].contains("n_channels"));
    assert!(r[1][1] == "x" && !r[1][2].is_empty());
    let good: Vec<_> = r.iter().filter(|x| x[1] == "5").collect();
    assert_eq!(good.len(), 4);
    assert!(good.iter().all(|x| x[2].is_empty()));
}

#[test]
fn oracle_compares_tiny_instances() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "o.toml", "area_m = [200.0, 200.0]\nn_devices = 3\nn_uavs = 2\nn_channels = 3\n");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--runs", "2", "--coarse-m", "25", "--fine-m", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "run_id,seed,n_devices,proposed_w,oracle_w,gap,proposed_s,oracle_s");
    for r in rows(&text) {
        let (p, q, g): (f64, f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap(), r[5].parse().unwrap());
        assert!((g - (p / q - 1.0)).abs() < 1e-12);
    }

    let big = write(dir.path(), "b.toml", "n_devices = 7\nn_uavs = 2\n");
    assert_eq!(code(&run(&["oracle", "--config", big.to_str().unwrap()])), 2);
}
