//! Subcommand bodies. Runs execute in parallel and are written in run
//! order by a single writer, so output does not depend on thread timing.

use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use rayon::prelude::*;

use aerial_iot::orchestrator::{
    brute_force_oracle, fixed_snapshot, optimize_snapshot, reliability, simulate_horizon, stationary_baseline,
    HorizonRun, OracleGrid, ReliabilityMode, Scenario,
};
use aerial_iot::spectrum::assign_channels;

use crate::config::{load, LoadedConfig, ScenarioConfig};
use crate::output::{self, MetricsRow, Scheme, METRICS_HEADER, SWEEP_PREFIX};
use crate::{CliError, Common};

/// Largest instance handed to the exhaustive search.
const ORACLE_MAX_DEVICES: usize = 6;
const ORACLE_MAX_UAVS: usize = 2;

fn base_seed(common: &Common, loaded: &LoadedConfig) -> u64 {
    common.seed.unwrap_or(loaded.config.seed)
}

fn config_error(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn snapshot(common: &Common, metrics: Option<&Path>, baseline: bool) -> Result<(), CliError> {
    let loaded = load(&common.config)?;
    let seed = base_seed(common, &loaded);
    let s = loaded.scenario(seed)?;
    let map = assign_channels(&s.devices, s.n_channels, seed);
    let grid = s.grid_locations();
    let prop = optimize_snapshot(&s.devices, &map, &grid, &s.env, &s.qos, &s.snapshot_options(), true);
    output::write_text(common.out.as_deref(), &output::deployment_toml(&prop, &s.devices))?;

    if let Some(path) = metrics {
        let zero = vec![0.0; s.n_uavs];
        let mut rows = vec![MetricsRow::new(0, seed, Scheme::Proposed, 0, &prop, zero.clone())];
        if baseline {
            let stat = fixed_snapshot(&s.devices, &map, &grid, &s.env, &s.qos);
            rows.push(MetricsRow::new(0, seed, Scheme::Stationary, 0, &stat, zero));
        }
        write_metrics(Some(path), &rows)?;
    }
    if prop.solution.all_served() {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!(
            "{} of {} devices unserved",
            prop.solution.assoc.len() - prop.solution.n_served(),
            prop.solution.assoc.len()
        )))
    }
}

fn write_metrics(path: Option<&Path>, rows: &[MetricsRow]) -> Result<(), CliError> {
    let mut w = output::csv_writer(path)?;
    output::write_record(&mut w, path, METRICS_HEADER)?;
    for row in rows {
        output::write_record(&mut w, path, row.record())?;
    }
    output::flush(&mut w, path)
}

/// Proposed run and optional stationary run for one seed.
struct RunPair {
    proposed: HorizonRun,
    stationary: Option<HorizonRun>,
}

fn run_pair(loaded: &LoadedConfig, seed: u64, baseline: bool) -> Result<RunPair, CliError> {
    let s = loaded.scenario(seed)?;
    let schedule = loaded.schedule(&s)?;
    let proposed = simulate_horizon(&s, &schedule, seed).map_err(config_error)?;
    let stationary = if baseline {
        Some(stationary_baseline(&s, &schedule, &s.grid_locations(), seed).map_err(config_error)?)
    } else {
        None
    };
    Ok(RunPair { proposed, stationary })
}

fn pair_rows(run_id: u64, seed: u64, pair: &RunPair) -> Vec<MetricsRow> {
    let run = &pair.proposed;
    let k = run.uav_energy_j.len();
    let mut spent = vec![0.0; k];
    let mut rows = Vec::new();
    for (n, dep) in run.deployments.iter().enumerate() {
        // relocation n - 1 ends at update n
        if n > 0 {
            for (e, leg) in spent.iter_mut().zip(&run.relocations[n - 1].leg_energy_j) {
                *e += leg;
            }
        }
        rows.push(MetricsRow::new(run_id, seed, Scheme::Proposed, n, dep, spent.clone()));
    }
    if let Some(base) = &pair.stationary {
        for (n, dep) in base.deployments.iter().enumerate() {
            rows.push(MetricsRow::new(run_id, seed, Scheme::Stationary, n, dep, vec![0.0; k]));
        }
    }
    rows
}

fn run_all(loaded: &LoadedConfig, seed: u64, runs: u64, baseline: bool) -> Result<Vec<RunPair>, CliError> {
    (0..runs).into_par_iter().map(|r| run_pair(loaded, seed + r, baseline)).collect()
}

fn summarize(label: &str, runs: &[HorizonRun], mode: ReliabilityMode) {
    let n = runs.len().max(1) as f64;
    let objective = runs.iter().map(HorizonRun::mean_objective_w).sum::<f64>() / n;
    let energy = runs.iter().map(HorizonRun::total_energy_j).sum::<f64>() / n;
    eprintln!(
        "{label}: mean power {objective:.6} W, mean flight energy {energy:.1} J, reliability {:.4}",
        reliability(runs, mode)
    );
}

pub fn horizon(common: &Common, runs: u64, baseline: bool, per_horizon: bool) -> Result<(), CliError> {
    let loaded = load(&common.config)?;
    let seed = base_seed(common, &loaded);
    let pairs = run_all(&loaded, seed, runs, baseline)?;
    let rows: Vec<MetricsRow> = pairs.iter().zip(0..).flat_map(|(p, r)| pair_rows(r, seed + r, p)).collect();
    write_metrics(common.out.as_deref(), &rows)?;

    let mode = if per_horizon { ReliabilityMode::PerHorizon } else { ReliabilityMode::PerUpdate };
    let proposed: Vec<HorizonRun> = pairs.iter().map(|p| p.proposed.clone()).collect();
    summarize("proposed", &proposed, mode);
    if baseline {
        let stationary: Vec<HorizonRun> = pairs.iter().filter_map(|p| p.stationary.clone()).collect();
        summarize("stationary", &stationary, mode);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    #[value(name = "n_uavs")]
    NUavs,
    #[value(name = "n_channels")]
    NChannels,
    #[value(name = "p_max")]
    PMax,
    #[value(name = "n_updates")]
    NUpdates,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Self::NUavs => "n_uavs",
            Self::NChannels => "n_channels",
            Self::PMax => "p_max",
            Self::NUpdates => "n_updates",
        }
    }

    /// Copy of `config` with this axis set to `value`.
    fn apply(self, config: &ScenarioConfig, value: &str) -> Result<ScenarioConfig, CliError> {
        let count = || value.trim().parse::<usize>().map_err(|e| CliError::Config(format!("{} = {value:?}: {e}", self.name())));
        let mut c = config.clone();
        match self {
            Self::NUavs => c.n_uavs = count()?,
            Self::NChannels => c.n_channels = count()?,
            Self::PMax => {
                c.p_max_w = value.trim().parse().map_err(|e| CliError::Config(format!("p_max = {value:?}: {e}")))?
            }
            Self::NUpdates => {
                c.n_updates = Some(count()?);
                c.targets = None;
                c.update_times_s = None;
            }
        }
        Ok(c)
    }
}

/// Paired horizon runs for every axis value; a value that fails becomes a
/// single error row and the sweep moves on.
pub fn sweep(common: &Common, axis: Axis, values: &[String], runs: u64) -> Result<(), CliError> {
    let loaded = load(&common.config)?;
    let seed = base_seed(common, &loaded);
    let results: Vec<Result<Vec<RunPair>, CliError>> = values
        .iter()
        .map(|v| {
            let config = axis.apply(&loaded.config, v)?;
            let point = LoadedConfig { config, base_dir: loaded.base_dir.clone() };
            run_all(&point, seed, runs, true)
        })
        .collect();

    let path = common.out.as_deref();
    let mut w = output::csv_writer(path)?;
    output::write_record(&mut w, path, SWEEP_PREFIX.iter().chain(&METRICS_HEADER))?;
    for (value, result) in values.iter().zip(results) {
        match result {
            Ok(pairs) => {
                for (pair, r) in pairs.iter().zip(0..) {
                    for row in pair_rows(r, seed + r, pair) {
                        let prefix = [axis.name().to_string(), value.trim().to_string(), String::new()];
                        output::write_record(&mut w, path, prefix.into_iter().chain(row.record()))?;
                    }
                }
            }
            Err(e @ CliError::Io { .. }) => return Err(e),
            Err(e) => {
                let mut rec = vec![axis.name().to_string(), value.trim().to_string(), e.to_string()];
                rec.resize(SWEEP_PREFIX.len() + METRICS_HEADER.len(), String::new());
                output::write_record(&mut w, path, rec)?;
                eprintln!("{} = {}: {e}", axis.name(), value.trim());
            }
        }
    }
    output::flush(&mut w, path)
}

pub const ORACLE_HEADER: [&str; 8] =
    ["run_id", "seed", "n_devices", "proposed_w", "oracle_w", "gap", "proposed_s", "oracle_s"];

fn check_oracle_bounds(s: &Scenario, coarse_m: f64, fine_m: f64) -> Result<(), CliError> {
    if s.devices.len() > ORACLE_MAX_DEVICES || s.n_uavs > ORACLE_MAX_UAVS {
        return Err(CliError::Config(format!(
            "oracle instances are limited to {ORACLE_MAX_DEVICES} devices and {ORACLE_MAX_UAVS} UAVs, got {} and {}",
            s.devices.len(),
            s.n_uavs
        )));
    }
    if !(coarse_m > 0.0 && fine_m > 0.0 && fine_m <= coarse_m) {
        return Err(CliError::Config(format!("grid spacings must satisfy 0 < fine <= coarse, got {fine_m} and {coarse_m}")));
    }
    Ok(())
}

/// Proposed snapshot against the grid oracle. Instances run one after the
/// other so the wall times are comparable; the timing columns differ
/// between otherwise identical runs.
pub fn oracle(common: &Common, runs: u64, coarse_m: f64, fine_m: f64) -> Result<(), CliError> {
    let loaded = load(&common.config)?;
    let seed = base_seed(common, &loaded);
    let path = common.out.as_deref();
    let mut w = output::csv_writer(path)?;
    output::write_record(&mut w, path, ORACLE_HEADER)?;
    let mut gaps = Vec::new();
    let mut faster = 0;
    for r in 0..runs {
        let s = loaded.scenario(seed + r)?;
        check_oracle_bounds(&s, coarse_m, fine_m)?;
        let map = assign_channels(&s.devices, s.n_channels, seed + r);
        let t0 = Instant::now();
        let prop = optimize_snapshot(&s.devices, &map, &s.grid_locations(), &s.env, &s.qos, &s.snapshot_options(), true);
        let prop_s = t0.elapsed().as_secs_f64();
        let grid = OracleGrid {
            x_range: (0.0, s.area_m.0),
            y_range: (0.0, s.area_m.1),
            altitude_range: s.altitude_band(),
            coarse_m,
            fine_m,
        };
        let t1 = Instant::now();
        let orac = brute_force_oracle(&s.devices, s.n_uavs, &map, &s.env, &s.qos, &grid);
        let orac_s = t1.elapsed().as_secs_f64();
        let gap = if orac.objective_w > 0.0 { prop.objective_w / orac.objective_w - 1.0 } else { 0.0 };
        gaps.push(gap);
        faster += usize::from(prop_s < orac_s);
        output::write_record(
            &mut w,
            path,
            [
                r.to_string(),
                (seed + r).to_string(),
                s.devices.len().to_string(),
                prop.objective_w.to_string(),
                orac.objective_w.to_string(),
                gap.to_string(),
                prop_s.to_string(),
                orac_s.to_string(),
            ],
        )?;
    }
    output::flush(&mut w, path)?;
    if !gaps.is_empty() {
        eprintln!(
            "mean gap {:.2}%, proposed faster on {faster}/{} instances",
            100.0 * gaps.iter().sum::<f64>() / gaps.len() as f64,
            gaps.len()
        );
    }
    Ok(())
}
