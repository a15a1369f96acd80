//! Output files: metrics CSV rows and the deployment dump.
//!
//! CSV is UTF-8 with a header row and LF line endings. Floats use the
//! shortest representation that round-trips, so identical runs give
//! identical bytes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use aerial_iot::orchestrator::Deployment;
use aerial_iot::Vec3;

use crate::CliError;

/// Metrics columns in file order.
pub const METRICS_HEADER: [&str; 13] = [
    "run_id",
    "seed",
    "scheme",
    "update",
    "t_s",
    "n_active",
    "n_served",
    "all_served",
    "total_power_w",
    "objective_w",
    "outer_iterations",
    "total_energy_j",
    "uav_energy_j",
];

/// Leading sweep columns.
pub const SWEEP_PREFIX: [&str; 3] = ["axis", "value", "error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Proposed,
    Stationary,
}

impl Scheme {
    fn as_str(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Stationary => "stationary",
        }
    }
}

/// One row per (run, scheme, update).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub update: usize,
    pub t_s: f64,
    pub n_active: usize,
    pub n_served: usize,
    pub total_power_w: f64,
    pub objective_w: f64,
    pub outer_iterations: usize,
    /// Flight energy spent by each UAV up to this update, joules.
    pub uav_energy_j: Vec<f64>,
}

impl MetricsRow {
    pub fn new(run_id: u64, seed: u64, scheme: Scheme, update: usize, dep: &Deployment, uav_energy_j: Vec<f64>) -> Self {
        Self {
            run_id,
            seed,
            scheme,
            update,
            t_s: dep.t_n,
            n_active: dep.solution.assoc.len(),
            n_served: dep.solution.n_served(),
            total_power_w: dep.total_power_w,
            objective_w: dep.objective_w,
            outer_iterations: dep.outer_iterations,
            uav_energy_j,
        }
    }

    pub fn all_served(&self) -> bool {
        self.n_served == self.n_active
    }

    pub fn record(&self) -> Vec<String> {
        let per_uav: Vec<String> = self.uav_energy_j.iter().map(f64::to_string).collect();
        vec![
            self.run_id.to_string(),
            self.seed.to_string(),
            self.scheme.as_str().to_string(),
            self.update.to_string(),
            self.t_s.to_string(),
            self.n_active.to_string(),
            self.n_served.to_string(),
            self.all_served().to_string(),
            self.total_power_w.to_string(),
            self.objective_w.to_string(),
            self.outer_iterations.to_string(),
            self.uav_energy_j.iter().fold(0.0, |a, e| a + e).to_string(),
            per_uav.join(";"),
        ]
    }
}

pub type CsvOut = csv::Writer<Box<dyn Write>>;

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn csv_writer(path: Option<&Path>) -> Result<CsvOut, CliError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink(path)?))
}

/// Write `record` and map failures to the output path.
pub fn write_record<I, S>(w: &mut CsvOut, path: Option<&Path>, record: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(record).map_err(|e| csv_io(path, e))
}

pub fn flush(w: &mut CsvOut, path: Option<&Path>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

fn csv_io(path: Option<&Path>, e: csv::Error) -> CliError {
    let path = path.unwrap_or(Path::new("<stdout>"));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, io::Error::other(format!("{other:?}"))),
    }
}

#[derive(Debug, Serialize)]
struct UavEntry {
    id: usize,
    x_m: f64,
    y_m: f64,
    h_m: f64,
}

#[derive(Debug, Serialize)]
struct DeviceEntry {
    id: usize,
    x_m: f64,
    y_m: f64,
    channel: usize,
    assoc: usize,
    power_w: f64,
    served: bool,
}

#[derive(Debug, Serialize)]
struct DeploymentDump {
    n_devices: usize,
    n_served: usize,
    total_power_w: f64,
    objective_w: f64,
    outer_iterations: usize,
    converged: bool,
    uav: Vec<UavEntry>,
    device: Vec<DeviceEntry>,
}

/// Deployment as TOML: totals, then one `[[uav]]` and one `[[device]]`
/// table per entry. Device ids index the scenario device list.
pub fn deployment_toml(dep: &Deployment, devices: &[Vec3]) -> String {
    let sol = &dep.solution;
    let dump = DeploymentDump {
        n_devices: sol.assoc.len(),
        n_served: sol.n_served(),
        total_power_w: dep.total_power_w,
        objective_w: dep.objective_w,
        outer_iterations: dep.outer_iterations,
        converged: dep.converged,
        uav: dep.uav_locs.iter().enumerate().map(|(id, v)| UavEntry { id, x_m: v.x, y_m: v.y, h_m: v.h }).collect(),
        device: dep
            .active
            .iter()
            .enumerate()
            .map(|(i, &id)| DeviceEntry {
                id,
                x_m: devices[id].x,
                y_m: devices[id].y,
                channel: dep.channel_map.channel_of[i],
                assoc: sol.assoc[i],
                power_w: sol.power_w[i],
                served: sol.served[i],
            })
            .collect(),
    };
    toml::to_string(&dump).expect("deployment serializes")
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut w = sink(path)?;
    let p = path.unwrap_or(Path::new("<stdout>"));
    w.write_all(text.as_bytes()).and_then(|()| w.flush()).map_err(|e| CliError::io(p, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use aerial_iot::orchestrator::fixed_snapshot;
    use aerial_iot::power::QosParams;
    use aerial_iot::spectrum::assign_channels;
    use aerial_iot::Environment;

    #[test]
    fn record_matches_header() {
        let devices = [Vec3::ground(0.0, 0.0), Vec3::ground(50.0, 0.0)];
        let map = assign_channels(&devices, 2, 0);
        let dep = fixed_snapshot(&devices, &map, &[Vec3::new(0.0, 0.0, 100.0)], &Environment::urban(), &QosParams::new(3.0, 0.2));
        let row = MetricsRow::new(4, 7, Scheme::Stationary, 0, &dep, vec![1.5, 2.0]);
        let rec = row.record();
        assert_eq!(rec.len(), METRICS_HEADER.len());
        assert_eq!(rec[2], "stationary");
        assert_eq!(rec[7], "true");
        assert_eq!(rec[11], "3.5");
        assert_eq!(rec[12], "1.5;2");
    }

    #[test]
    fn deployment_dump_parses_back() {
        let devices = [Vec3::ground(0.0, 0.0), Vec3::ground(50.0, 0.0)];
        let map = assign_channels(&devices, 2, 0);
        let dep = fixed_snapshot(&devices, &map, &[Vec3::new(0.0, 0.0, 100.0)], &Environment::urban(), &QosParams::new(3.0, 0.2));
        let v: toml::Value = toml::from_str(&deployment_toml(&dep, &devices)).unwrap();
        assert_eq!(v["uav"].as_array().unwrap().len(), 1);
        assert_eq!(v["device"][1]["x_m"].as_float(), Some(50.0));
        assert_eq!(v["device"][1]["power_w"].as_float(), Some(dep.solution.power_w[1]));
    }
}
