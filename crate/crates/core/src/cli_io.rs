//! Files on disk: TOML experiment configs, measurement and trajectory CSV,
//! metrics JSON.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so every emitted file reads back bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretization::{reconstruct_poses, LoadInputs, SampledInputs, TrajectoryRecord, TrajectorySample};
use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, Metrics};
use crate::liegroup::{Pose, Twist, Vec3};
use crate::observer::{MeasurementStream, ObserverGains, TipMeasurement};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const TRUTH_FILE: &str = "truth.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const ESTIMATE_FILE: &str = "estimate.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SWEEP_FILE: &str = "sweep.json";

pub const MEASUREMENT_HEADER: [&str; 15] = [
    "t", "qw", "qx", "qy", "qz", "px", "py", "pz", "wx", "wy", "wz", "vx", "vy", "vz", "tension",
];

pub const TRAJECTORY_HEADER: [&str; 22] = [
    "t", "node", "s", "px", "py", "pz", "qw", "qx", "qy", "qz", "xi_wx", "xi_wy", "xi_wz", "xi_vx", "xi_vy", "xi_vz",
    "eta_wx", "eta_wy", "eta_wz", "eta_vx", "eta_vy", "eta_vz",
];

const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;
// stored poses must agree with the ones rebuilt from the strain
const POSE_CONSISTENCY: f64 = 1e-9;

fn config_error(path: Option<&Path>, detail: impl std::fmt::Display) -> Error {
    match path {
        Some(p) => Error::Config(format!("{}: {detail}", p.display())),
        None => Error::Config(detail.to_string()),
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, path: Option<&Path>) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| config_error(path, e))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().trim_end();
        if key == "." {
            config_error(path, message)
        } else {
            config_error(path, format!("at `{key}`: {message}"))
        }
    })
}

/// Parses and validates an experiment config; absent keys take defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = parse_toml(text, None)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| config_error(Some(path), e))?;
    let config: ExperimentConfig = parse_toml(&text, Some(path))?;
    config.validate()?;
    Ok(config)
}

/// The fully resolved config as TOML.
pub fn resolved_config(config: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::Config(e.to_string()))
}

pub fn write_resolved_config(config: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(RESOLVED_CONFIG_FILE);
    fs::write(&path, resolved_config(config)?)?;
    Ok(path)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsFile {
    gains: ObserverGains,
}

/// Gains from a TOML file holding a single `gains` entry, in any form the
/// `observer.gains` key of a config accepts.
pub fn load_gains(path: &Path) -> Result<ObserverGains> {
    let text = fs::read_to_string(path).map_err(|e| config_error(Some(path), e))?;
    let file: GainsFile = parse_toml(&text, Some(path))?;
    file.gains.validate()?;
    Ok(file.gains)
}

fn csv_error(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn fmt(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|v| v.to_string())
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(csv_error(
            path,
            format!("header must be `{}`, got `{}`", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn parse_row(path: &Path, row: usize, record: &csv::StringRecord) -> Result<Vec<f64>> {
    record
        .iter()
        .enumerate()
        .map(|(col, field)| {
            field
                .parse::<f64>()
                .map_err(|_| csv_error(path, format!("row {row}, column {}: `{field}` is not a number", col + 1)))
        })
        .collect()
}

/// Tension samples read alongside the tip measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TensionSignal {
    pub times: Vec<f64>,
    pub tension: Vec<f64>,
}

impl TensionSignal {
    /// Zero-order-hold inputs with a constant spatial tip force.
    pub fn with_tip_force(&self, tip_force: Vec3) -> Result<SampledInputs> {
        let values = self
            .tension
            .iter()
            .map(|&tension| LoadInputs { tension, tip_force })
            .collect();
        SampledInputs::new(self.times.clone(), values)
    }
}

/// Writes one row per measurement; the tension column holds the input
/// latched at that instant.
pub fn write_measurements(path: &Path, measurements: &MeasurementStream, inputs: &SampledInputs) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MEASUREMENT_HEADER).map_err(|e| csv_error(path, e))?;
    for m in measurements.samples() {
        let q = m.quaternion();
        let p = m.pose.position;
        let tension = inputs.latest(m.t).tension;
        let row = [
            m.t, q[0], q[1], q[2], q[3], p.x, p.y, p.z, m.twist[0], m.twist[1], m.twist[2], m.twist[3], m.twist[4],
            m.twist[5], tension,
        ];
        w.write_record(fmt(&row)).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a measurement file: time strictly increasing, quaternions of unit
/// norm within 1e-6, velocities in the tip body frame.
pub fn load_measurements(path: &Path) -> Result<(MeasurementStream, TensionSignal)> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &MEASUREMENT_HEADER)?;
    let mut samples = Vec::new();
    let mut tension = TensionSignal {
        times: Vec::new(),
        tension: Vec::new(),
    };
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let v = parse_row(path, row, &record)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(csv_error(path, format!("row {row}: non-finite value")));
        }
        if let Some(prev) = samples.last().map(|m: &TipMeasurement| m.t) {
            if !(v[0] > prev) {
                return Err(csv_error(path, format!("row {row}: time {} does not increase past {prev}", v[0])));
            }
        }
        let q = [v[1], v[2], v[3], v[4]];
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(csv_error(path, format!("row {row}: quaternion norm {norm} is not 1")));
        }
        let twist = Twist::from([v[8], v[9], v[10], v[11], v[12], v[13]]);
        samples.push(TipMeasurement::from_wire(v[0], q, Vec3::new(v[5], v[6], v[7]), twist));
        tension.times.push(v[0]);
        tension.tension.push(v[14]);
    }
    if samples.is_empty() {
        return Err(csv_error(path, "no measurements"));
    }
    let stream = MeasurementStream::new(samples).map_err(|e| csv_error(path, e))?;
    Ok((stream, tension))
}

/// Long format, one row per (time, node).
pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(|e| csv_error(path, e))?;
    for sample in &record.samples {
        for (i, s) in record.arc_lengths.iter().enumerate() {
            let pose = &sample.poses[i];
            let q = crate::liegroup::quaternion_from_rotation(&pose.rotation);
            let (xi, eta) = (&sample.strain[i], &sample.velocity[i]);
            let mut row = vec![sample.t.to_string(), i.to_string()];
            let values = [
                *s, pose.position.x, pose.position.y, pose.position.z, q[0], q[1], q[2], q[3], xi[0], xi[1], xi[2],
                xi[3], xi[4], xi[5], eta[0], eta[1], eta[2], eta[3], eta[4], eta[5],
            ];
            row.extend(fmt(&values));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory file. Poses are rebuilt from the strain with the
/// clamped base at the identity, which reproduces the written poses exactly;
/// the stored positions and quaternions are checked against them.
pub fn load_trajectory(path: &Path) -> Result<TrajectoryRecord> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &TRAJECTORY_HEADER)?;
    struct Row {
        t: f64,
        node: usize,
        s: f64,
        position: Vec3,
        quaternion: [f64; 4],
        strain: Twist,
        velocity: Twist,
    }
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        let v = parse_row(path, row, &record)?;
        if v.iter().any(|x| !x.is_finite()) || v[1].fract() != 0.0 || v[1] < 0.0 {
            return Err(csv_error(path, format!("row {row}: invalid values")));
        }
        rows.push(Row {
            t: v[0],
            node: v[1] as usize,
            s: v[2],
            position: Vec3::new(v[3], v[4], v[5]),
            quaternion: [v[6], v[7], v[8], v[9]],
            strain: Twist::from_column_slice(&v[10..16]),
            velocity: Twist::from_column_slice(&v[16..22]),
        });
    }
    let nodes = rows.iter().take_while(|r| r.t == rows[0].t).count();
    if rows.is_empty() || rows.len() % nodes != 0 {
        return Err(csv_error(path, "rows do not form complete node blocks"));
    }
    let arc_lengths: Vec<f64> = rows[..nodes].iter().map(|r| r.s).collect();
    if nodes < 2 {
        return Err(csv_error(path, "need at least two nodes"));
    }
    let spacing = arc_lengths[nodes - 1] / (nodes - 1) as f64;
    let mut samples = Vec::with_capacity(rows.len() / nodes);
    for (k, block) in rows.chunks(nodes).enumerate() {
        let t = block[0].t;
        if k > 0 && !(t > samples.last().map_or(f64::MIN, |s: &TrajectorySample| s.t)) {
            return Err(csv_error(path, format!("time {t} does not increase")));
        }
        for (i, r) in block.iter().enumerate() {
            if r.t != t || r.node != i || r.s != arc_lengths[i] {
                return Err(csv_error(path, format!("block at t = {t}: expected node {i}")));
            }
        }
        let strain: Vec<Twist> = block.iter().map(|r| r.strain).collect();
        let velocity = block.iter().map(|r| r.velocity).collect();
        let poses = reconstruct_poses(&strain, spacing, &Pose::identity());
        for (r, pose) in block.iter().zip(&poses) {
            let stored = crate::liegroup::rotation_from_quaternion(r.quaternion);
            let drift = (r.position - pose.position).amax().max((stored - pose.rotation).amax());
            if drift > POSE_CONSISTENCY {
                return Err(csv_error(
                    path,
                    format!("t = {t}, node {}: pose disagrees with the strain by {drift:e}", r.node),
                ));
            }
        }
        samples.push(TrajectorySample {
            t,
            poses,
            strain,
            velocity,
        });
    }
    Ok(TrajectoryRecord { arc_lengths, samples })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_metrics(path: &Path) -> Result<Metrics> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// The metrics file written next to a trajectory, `estimate.csv` ->
/// `estimate.metrics.json`.
pub fn metrics_sidecar(trajectory: &Path) -> PathBuf {
    trajectory.with_extension("metrics.json")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::NoiseConfig;
    use crate::liegroup::exp_rotation;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.grid.nodes, 21);
        assert_eq!(config.observer.gains, ObserverGains::scalar(0.05));
    }

    #[test]
    fn table_values_only() {
        let text = "[material]\nlength = 0.45\nradius = 1.6e-3\ndensity = 20321.0\nyoungs = 68.9e9\nshear = 26e9\npoisson = 0.325\n";
        let config = parse_config(text).unwrap();
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn negative_radius_names_the_key() {
        let text = "[material]\nlength = 0.45\nradius = -1.6e-3\ndensity = 20321.0\nyoungs = 68.9e9\nshear = 26e9\npoisson = 0.325\n";
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("material.radius"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_config("[grid]\nnodes = 21\nspacing = 0.1\n").unwrap_err().to_string();
        assert!(err.contains("spacing") && err.contains("grid"), "{err}");
        let err = parse_config("horizonn = 2.0\n").unwrap_err().to_string();
        assert!(err.contains("horizonn"), "{err}");
    }

    #[test]
    fn type_errors_carry_the_key_path() {
        let err = parse_config("[observer]\nmax_staleness = \"long\"\n").unwrap_err().to_string();
        assert!(err.contains("observer.max_staleness"), "{err}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut config = ExperimentConfig::default().with_fixed_step(2e-4);
        config.observer.gains = ObserverGains {
            proportional: crate::liegroup::Mat6::from_diagonal(&Twist::from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])),
            derivative: ObserverGains::scalar(0.07).derivative,
        };
        config.noise = NoiseConfig::none();
        config.sweep.nodes = vec![11, 21];
        let text = resolved_config(&config).unwrap();
        assert_eq!(parse_config(&text).unwrap(), config);
    }

    #[test]
    fn gains_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.toml");
        fs::write(&path, "gains = 0.5\n").unwrap();
        assert_eq!(load_gains(&path).unwrap(), ObserverGains::scalar(0.5));
        fs::write(&path, "[gains]\nproportional = 0.1\nderivative = [1, 1, 1, 2, 2, 2]\n").unwrap();
        let g = load_gains(&path).unwrap();
        assert_eq!(g.proportional, ObserverGains::scalar(0.1).proportional);
        assert_eq!(g.derivative[(4, 4)], 2.0);
        fs::write(&path, "gains = -1.0\n").unwrap();
        assert!(load_gains(&path).is_err());
    }

    fn stream() -> (MeasurementStream, SampledInputs) {
        let samples: Vec<TipMeasurement> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.01;
                let r = exp_rotation(&Vec3::new(0.1 * t, -0.3, 1.0 + t));
                TipMeasurement::new(
                    t,
                    Pose::new(r, Vec3::new(0.4, -0.06 + t / 3.0, 1e-17)),
                    Twist::from([0.1, 0.2, 0.3, t, -t, 1.0 / 3.0]),
                )
            })
            .collect();
        let times: Vec<f64> = samples.iter().map(|m| m.t).collect();
        let loads = times
            .iter()
            .map(|t| LoadInputs {
                tension: 8.0 * t / 7.0,
                tip_force: Vec3::new(0.0, -0.4905, 0.0),
            })
            .collect();
        (MeasurementStream::new(samples).unwrap(), SampledInputs::new(times, loads).unwrap())
    }

    #[test]
    fn measurements_round_trip_exactly() {
        let (m, inputs) = stream();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEASUREMENTS_FILE);
        write_measurements(&path, &m, &inputs).unwrap();
        let (back, tension) = load_measurements(&path).unwrap();
        // the file carries the quaternion; the matrix is rebuilt from it
        for (a, b) in back.samples().iter().zip(m.samples()) {
            assert_eq!((a.t, a.quaternion(), a.pose.position, a.twist), (b.t, b.quaternion(), b.pose.position, b.twist));
            assert!((a.pose.rotation - b.pose.rotation).amax() < 1e-15);
        }
        assert_eq!(back.samples().len(), m.samples().len());
        let tension_inputs = tension.with_tip_force(Vec3::new(0.0, -0.4905, 0.0)).unwrap();
        assert_eq!(tension_inputs, inputs);

        let again = dir.path().join("again.csv");
        write_measurements(&again, &back, &tension_inputs).unwrap();
        assert_eq!(fs::read(&again).unwrap(), fs::read(&path).unwrap());
        assert_eq!(load_measurements(&again).unwrap().0, back);
    }

    fn rewrite(path: &Path, edit: impl Fn(&mut Vec<String>)) {
        let text = fs::read_to_string(path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        edit(&mut lines);
        fs::write(path, lines.join("\n") + "\n").unwrap();
    }

    #[test]
    fn shuffled_rows_are_rejected() {
        let (m, inputs) = stream();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEASUREMENTS_FILE);
        write_measurements(&path, &m, &inputs).unwrap();
        rewrite(&path, |lines| lines.swap(3, 7));
        let err = load_measurements(&path).unwrap_err().to_string();
        assert!(err.contains("does not increase"), "{err}");
    }

    #[test]
    fn short_quaternion_is_rejected() {
        let (m, inputs) = stream();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEASUREMENTS_FILE);
        write_measurements(&path, &m, &inputs).unwrap();
        rewrite(&path, |lines| {
            let mut f: Vec<String> = lines[2].split(',').map(String::from).collect();
            let q: Vec<f64> = f[1..5].iter().map(|x| x.parse::<f64>().unwrap() * 0.9).collect();
            for (k, v) in q.iter().enumerate() {
                f[1 + k] = v.to_string();
            }
            lines[2] = f.join(",");
        });
        let err = load_measurements(&path).unwrap_err().to_string();
        assert!(err.contains("quaternion norm"), "{err}");
    }

    #[test]
    fn missing_header_is_rejected() {
        let (m, inputs) = stream();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MEASUREMENTS_FILE);
        write_measurements(&path, &m, &inputs).unwrap();
        rewrite(&path, |lines| {
            lines.remove(0);
        });
        assert!(load_measurements(&path).is_err());
    }

    #[test]
    fn trajectory_round_trips_exactly() {
        use crate::discretization::{Grid, RodState};
        let grid = Grid::new(11, 0.45).unwrap();
        let mut samples = Vec::new();
        for k in 0..4 {
            let mut state = RodState::straight(&grid, &Twist::from([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
            for (i, xi) in state.strain.iter_mut().enumerate() {
                xi[2] = 0.3 * k as f64 + 0.01 * i as f64;
                xi[4] = 1e-5 / 3.0;
            }
            state.velocity[5][5] = 0.1 * k as f64;
            state.t = 0.01 * k as f64;
            let poses = reconstruct_poses(&state.strain, grid.spacing(), &Pose::identity());
            samples.push(TrajectorySample::from_state(&state, poses));
        }
        let record = TrajectoryRecord {
            arc_lengths: grid.arc_lengths(),
            samples,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(TRUTH_FILE);
        write_trajectory(&path, &record).unwrap();
        assert_eq!(load_trajectory(&path).unwrap(), record);
    }

    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e3f64..1e3, -1e-12f64..1e-12, prop::num::f64::NORMAL]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn any_measurement_file_round_trips(
            rows in prop::collection::vec(
                (1e-9f64..0.1, prop::array::uniform3(-3.0f64..3.0), prop::array::uniform3(finite()),
                 prop::array::uniform6(finite()), finite()),
                1..20,
            )
        ) {
            let mut t = 0.0;
            let mut samples = Vec::new();
            let mut loads = Vec::new();
            for (dt, w, p, eta, tension) in rows {
                t += dt;
                let q = crate::liegroup::quaternion_from_rotation(&exp_rotation(&Vec3::from(w)));
                samples.push(TipMeasurement::from_wire(t, q, Vec3::from(p), Twist::from(eta)));
                loads.push(LoadInputs { tension, tip_force: Vec3::new(0.0, -1.0, 0.0) });
            }
            let stream = MeasurementStream::new(samples).unwrap();
            let inputs = SampledInputs::new(stream.times(), loads).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(MEASUREMENTS_FILE);
            write_measurements(&path, &stream, &inputs).unwrap();
            let (back, tension) = load_measurements(&path).unwrap();
            prop_assert_eq!(back, stream);
            prop_assert_eq!(tension.with_tip_force(Vec3::new(0.0, -1.0, 0.0)).unwrap(), inputs);
        }

        #[test]
        fn any_trajectory_file_round_trips(
            fields in prop::collection::vec(
                (prop::collection::vec(prop::array::uniform6(-2.0f64..2.0), 9),
                 prop::collection::vec(prop::array::uniform6(finite()), 9)),
                1..5,
            )
        ) {
            use crate::discretization::Grid;
            let grid = Grid::new(9, 0.45).unwrap();
            let samples = fields
                .into_iter()
                .enumerate()
                .map(|(k, (xi, eta))| {
                    let strain: Vec<Twist> = xi.into_iter().map(|x| Twist::from(x) + Twist::from([0.0, 0.0, 0.0, 3.0, 0.0, 0.0])).collect();
                    TrajectorySample {
                        t: k as f64 / 3.0,
                        poses: reconstruct_poses(&strain, grid.spacing(), &Pose::identity()),
                        strain,
                        velocity: eta.into_iter().map(Twist::from).collect(),
                    }
                })
                .collect();
            let record = TrajectoryRecord { arc_lengths: grid.arc_lengths(), samples };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join(ESTIMATE_FILE);
            write_trajectory(&path, &record).unwrap();
            prop_assert_eq!(load_trajectory(&path).unwrap(), record);
        }
    }
}
