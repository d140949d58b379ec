//! Seeded Monte Carlo experiment runners: single-user SNR CDFs, ORIS usage
//! counts, floor heat maps, and multi-user sum rate under blockage.
//!
//! Every runner is deterministic for a given (config, seed): trial t draws
//! its randomness from a stream seeded by `derive_seed(seed, t)`, so results
//! are independent of execution order and the worker count, and the sampled
//! poses are shared across sweep points (paired comparisons). Sum-rate
//! trials draw the maximum user count once and use prefixes for the smaller
//! counts, which keeps the per-U curves on common random numbers.

use crate::allocation::{build_problem, AllocationProblem, SolveError, SolverKind};
use crate::channel::{rate, user_snr, Allocation, ChannelError, GainTables, LinkBudget};
use crate::geometry::GeometryError;
use crate::scenario::{
    build_crown_molding, build_wall_grid, sample_users, OrisElement, RoomConfig, Scenario, User,
    UserModel, WallElement,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("the usage experiment requires ORIS enabled")]
    OrisDisabled,
    #[error("grid step {step} m does not evenly divide the {dim} m room dimension")]
    GridStepMismatch { step: f64, dim: f64 },
    #[error("this experiment sweeps a single field of view, got {0} values")]
    MultipleFov(usize),
    #[error("field-of-view list must not be empty")]
    EmptyFov,
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing results: {0}")]
    Parse(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Static scene recipe shared by all experiments: room, crown molding and
/// wall grid parameters, the user/receiver template, and the link budget.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub room: RoomConfig,
    pub oris_cols: usize,
    pub oris_rows: usize,
    pub band_fraction: f64,
    pub oris_reflectivity: f64,
    pub wall_cell_size: f64,
    pub wall_reflectivity: f64,
    /// Receiver template; `fov` and `tiers` are overridden per sweep point.
    pub user: UserModel,
    pub budget: LinkBudget,
}

impl SceneSpec {
    pub fn crown(&self) -> Vec<OrisElement> {
        build_crown_molding(
            &self.room,
            self.oris_cols,
            self.oris_rows,
            self.band_fraction,
            self.oris_reflectivity,
        )
    }

    pub fn wall_grid(&self) -> Vec<WallElement> {
        build_wall_grid(
            &self.room,
            self.wall_cell_size,
            self.band_fraction,
            self.wall_reflectivity,
        )
    }

    pub fn model(&self, fov_deg: f64, tiers: u32) -> UserModel {
        UserModel {
            fov: fov_deg.to_radians(),
            tiers,
            ..self.user.clone()
        }
    }

    pub fn scenario(&self, users: Vec<User>, blockage: bool) -> Scenario {
        Scenario::new(
            self.room.clone(),
            self.crown(),
            self.wall_grid(),
            users,
            blockage,
        )
    }
}

/// Sweep and sampling controls for one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub fov_deg: Vec<f64>,
    pub tiers: Vec<u32>,
    pub oris_enabled: bool,
    pub blockage_enabled: bool,
    pub user_counts: Vec<usize>,
    pub grid_step: f64,
    pub seed: u64,
    pub solver: SolverKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Cdf,
    Heatmap,
    Usage,
    SumRate,
}

impl ResultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultKind::Cdf => "cdf",
            ResultKind::Heatmap => "heatmap",
            ResultKind::Usage => "usage",
            ResultKind::SumRate => "sumrate",
        }
    }
}

/// Receiver label in heat map and sum-rate outputs: a bare upward
/// photodiode or an angle-diversity receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Pd,
    Adr,
}

impl Receiver {
    fn as_str(self) -> &'static str {
        match self {
            Receiver::Pd => "pd",
            Receiver::Adr => "adr",
        }
    }

    fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s {
            "pd" => Ok(Receiver::Pd),
            "adr" => Ok(Receiver::Adr),
            other => Err(ExperimentError::Parse(format!("bad receiver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfRow {
    pub fov_deg: f64,
    pub tier: u32,
    pub oris: bool,
    pub trial: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapRow {
    pub x_m: f64,
    pub y_m: f64,
    pub receiver: Receiver,
    pub oris: bool,
    pub snr_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsageRow {
    pub fov_deg: f64,
    pub tier: u32,
    pub mean_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateRow {
    pub users: usize,
    pub receiver: Receiver,
    pub oris: bool,
    pub mean_sum_rate_bps_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Cdf(Vec<CdfRow>),
    Heatmap(Vec<HeatmapRow>),
    Usage(Vec<UsageRow>),
    SumRate(Vec<SumRateRow>),
}

impl Records {
    pub fn kind(&self) -> ResultKind {
        match self {
            Records::Cdf(_) => ResultKind::Cdf,
            Records::Heatmap(_) => ResultKind::Heatmap,
            Records::Usage(_) => ResultKind::Usage,
            Records::SumRate(_) => ResultKind::SumRate,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Records::Cdf(rows) => rows.len(),
            Records::Heatmap(rows) => rows.len(),
            Records::Usage(rows) => rows.len(),
            Records::SumRate(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Run description stored in the JSON sidecar next to each CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub kind: ResultKind,
    pub seed: u64,
    /// Digest of (kind, seed, resolved config); stable across reruns.
    pub run_id: String,
    /// Wall-clock stamp, seconds since the Unix epoch. Not covered by the
    /// determinism guarantee.
    pub created_unix_s: u64,
    /// Fully resolved configuration echo.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Records,
    pub meta: RunMetadata,
}

fn make_metadata(kind: ResultKind, seed: u64, config_echo: serde_json::Value) -> RunMetadata {
    let mut hasher = Sha256::new();
    hasher.update(kind.as_str().as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(config_echo.to_string().as_bytes());
    let digest = hasher.finalize();
    let run_id: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    let created_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    RunMetadata {
        kind,
        seed,
        run_id,
        created_unix_s,
        config: config_echo,
    }
}

/// SplitMix64 step; derives the per-trial stream seed from the master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SNR in dB; zero maps to −∞ (outage).
pub fn snr_db(snr: f64) -> f64 {
    if snr > 0.0 {
        10.0 * snr.log10()
    } else {
        f64::NEG_INFINITY
    }
}

fn solve_tables(
    tables: &GainTables,
    budget: &LinkBudget,
    solver: SolverKind,
) -> Result<(AllocationProblem, crate::allocation::SolverResult), SolveError> {
    let problem = build_problem(tables, budget);
    let result = solver.solve(&problem)?;
    Ok((problem, result))
}

/// Single-user SNR CDF samples per (FoV, tier, ORIS on/off).
///
/// One user is dropped uniformly in the room per trial (no blockage in the
/// default protocol) and the max-min solver hands every ORIS element to
/// that user; the select-best SNR lands in the sample set.
pub fn run_cdf(
    spec: &SceneSpec,
    config: &ExperimentConfig,
    config_echo: serde_json::Value,
) -> Result<ExperimentResult, ExperimentError> {
    if config.fov_deg.is_empty() {
        return Err(ExperimentError::EmptyFov);
    }
    let oris_settings: &[bool] = if config.oris_enabled {
        &[false, true]
    } else {
        &[false]
    };

    let trial_rows: Vec<Vec<CdfRow>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<CdfRow>, ExperimentError> {
            let trial_seed = derive_seed(config.seed, trial as u64);
            let mut rows = Vec::new();
            for &fov_deg in &config.fov_deg {
                for &tier in &config.tiers {
                    let model = spec.model(fov_deg, tier);
                    let users = sample_users(1, &spec.room, &model, trial_seed);
                    let scenario = spec.scenario(users, config.blockage_enabled);
                    let tables = GainTables::build(&scenario)?;
                    for &oris in oris_settings {
                        let snr = if oris {
                            let (_, result) = solve_tables(&tables, &spec.budget, config.solver)?;
                            user_snr(0, &result.allocation, &spec.budget, &tables).0
                        } else {
                            let empty = Allocation::empty(tables.oris_count);
                            user_snr(0, &empty, &spec.budget, &tables).0
                        };
                        rows.push(CdfRow {
                            fov_deg,
                            tier,
                            oris,
                            trial,
                            snr_db: snr_db(snr),
                        });
                    }
                }
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;

    // Group rows sweep-major for a stable CSV layout.
    let mut rows = Vec::new();
    for &fov_deg in &config.fov_deg {
        for &tier in &config.tiers {
            for &oris in oris_settings {
                for trial in trial_rows.iter().flatten() {
                    if trial.fov_deg == fov_deg && trial.tier == tier && trial.oris == oris {
                        rows.push(*trial);
                    }
                }
            }
        }
    }
    assert_eq!(
        rows.len(),
        config.trials * config.fov_deg.len() * config.tiers.len() * oris_settings.len()
    );
    Ok(ExperimentResult {
        records: Records::Cdf(rows),
        meta: make_metadata(ResultKind::Cdf, config.seed, config_echo),
    })
}

/// Mean number of ORIS elements actually exploited per (FoV, tier).
///
/// An element counts as used when it is assigned and contributes a nonzero
/// gain to the photodiode finally selected for its user.
pub fn run_usage(
    spec: &SceneSpec,
    config: &ExperimentConfig,
    config_echo: serde_json::Value,
) -> Result<ExperimentResult, ExperimentError> {
    if !config.oris_enabled {
        return Err(ExperimentError::OrisDisabled);
    }
    let counts: Vec<Vec<usize>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<usize>, ExperimentError> {
            let trial_seed = derive_seed(config.seed, trial as u64);
            let mut used = Vec::new();
            for &fov_deg in &config.fov_deg {
                for &tier in &config.tiers {
                    let model = spec.model(fov_deg, tier);
                    let users = sample_users(1, &spec.room, &model, trial_seed);
                    let scenario = spec.scenario(users, config.blockage_enabled);
                    let tables = GainTables::build(&scenario)?;
                    let (problem, result) = solve_tables(&tables, &spec.budget, config.solver)?;
                    used.push(result.elements_used(&problem));
                }
            }
            Ok(used)
        })
        .collect::<Result<_, _>>()?;

    let sweep = config.fov_deg.len() * config.tiers.len();
    let mut rows = Vec::with_capacity(sweep);
    let mut index = 0;
    for &fov_deg in &config.fov_deg {
        for &tier in &config.tiers {
            let total: usize = counts.iter().map(|per_trial| per_trial[index]).sum();
            rows.push(UsageRow {
                fov_deg,
                tier,
                mean_used: total as f64 / config.trials as f64,
            });
            index += 1;
        }
    }
    assert_eq!(rows.len(), sweep);
    Ok(ExperimentResult {
        records: Records::Usage(rows),
        meta: make_metadata(ResultKind::Usage, config.seed, config_echo),
    })
}

/// Receivers compared in the heat map and sum-rate experiments: the bare
/// photodiode (tier 0) and the first nonzero tier in the sweep list
/// (defaulting to the 7-element single-tier ADR).
fn receiver_pair(config: &ExperimentConfig) -> Vec<(Receiver, u32)> {
    let adr_tier = config.tiers.iter().copied().find(|t| *t > 0).unwrap_or(1);
    vec![(Receiver::Pd, 0), (Receiver::Adr, adr_tier)]
}

fn single_fov(config: &ExperimentConfig) -> Result<f64, ExperimentError> {
    match config.fov_deg.as_slice() {
        [] => Err(ExperimentError::EmptyFov),
        [fov] => Ok(*fov),
        many => Err(ExperimentError::MultipleFov(many.len())),
    }
}

/// Select-best SNR over a floor grid, for {PD, ADR} × {ORIS, no ORIS}.
///
/// Grid users face +x and blockage stays off, so the map is a pure channel
/// property of position.
pub fn run_heatmap(
    spec: &SceneSpec,
    config: &ExperimentConfig,
    config_echo: serde_json::Value,
) -> Result<ExperimentResult, ExperimentError> {
    let fov_deg = single_fov(config)?;
    let step = config.grid_step;
    let nx = grid_count(spec.room.width, step)?;
    let ny = grid_count(spec.room.depth, step)?;
    let receivers = receiver_pair(config);
    let oris_settings: &[bool] = if config.oris_enabled {
        &[false, true]
    } else {
        &[false]
    };

    let mut rows = Vec::new();
    for &(receiver, tier) in &receivers {
        let model = spec.model(fov_deg, tier);
        let point_rows: Vec<Vec<HeatmapRow>> = (0..nx * ny)
            .into_par_iter()
            .map(|index| -> Result<Vec<HeatmapRow>, ExperimentError> {
                let ix = index % nx;
                let iy = index / nx;
                let x = (ix as f64 + 0.5) * step;
                let y = (iy as f64 + 0.5) * step;
                let device = crate::geometry::Vec3::new(x, y, spec.user.device_height);
                let user = model.place(device, 0.0)?;
                let scenario = spec.scenario(vec![user], config.blockage_enabled);
                let tables = GainTables::build(&scenario)?;
                let mut out = Vec::new();
                for &oris in oris_settings {
                    let snr = if oris {
                        let (_, result) = solve_tables(&tables, &spec.budget, config.solver)?;
                        user_snr(0, &result.allocation, &spec.budget, &tables).0
                    } else {
                        let empty = Allocation::empty(tables.oris_count);
                        user_snr(0, &empty, &spec.budget, &tables).0
                    };
                    out.push(HeatmapRow {
                        x_m: x,
                        y_m: y,
                        receiver,
                        oris,
                        snr_db: snr_db(snr),
                    });
                }
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        for &oris in oris_settings {
            for point in point_rows.iter().flatten() {
                if point.oris == oris {
                    rows.push(*point);
                }
            }
        }
    }
    assert_eq!(rows.len(), nx * ny * receivers.len() * oris_settings.len());
    Ok(ExperimentResult {
        records: Records::Heatmap(rows),
        meta: make_metadata(ResultKind::Heatmap, config.seed, config_echo),
    })
}

fn grid_count(dim: f64, step: f64) -> Result<usize, ExperimentError> {
    let n = dim / step;
    if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
        return Err(ExperimentError::GridStepMismatch { step, dim });
    }
    Ok(n.round() as usize)
}

/// Mean sum rate versus user count under blockage, for {PD, ADR} ×
/// {ORIS, no ORIS}.
pub fn run_sum_rate(
    spec: &SceneSpec,
    config: &ExperimentConfig,
    config_echo: serde_json::Value,
) -> Result<ExperimentResult, ExperimentError> {
    let fov_deg = single_fov(config)?;
    let receivers = receiver_pair(config);
    let oris_settings: &[bool] = if config.oris_enabled {
        &[false, true]
    } else {
        &[false]
    };
    let max_users = config.user_counts.iter().copied().max().unwrap_or(0);

    let per_trial: Vec<Vec<f64>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<f64>, ExperimentError> {
            let trial_seed = derive_seed(config.seed, trial as u64);
            let mut sums = Vec::new();
            for &count in &config.user_counts {
                for &(_, tier) in &receivers {
                    if count == 0 {
                        sums.extend(std::iter::repeat_n(0.0, oris_settings.len()));
                        continue;
                    }
                    let model = spec.model(fov_deg, tier);
                    // Prefix of a common pool so user counts share draws.
                    let mut users = sample_users(max_users, &spec.room, &model, trial_seed);
                    users.truncate(count);
                    let scenario = spec.scenario(users, config.blockage_enabled);
                    let tables = GainTables::build(&scenario)?;
                    for &oris in oris_settings {
                        let allocation = if oris {
                            solve_tables(&tables, &spec.budget, config.solver)?
                                .1
                                .allocation
                        } else {
                            Allocation::empty(tables.oris_count)
                        };
                        let sum: f64 = (0..count)
                            .map(|u| {
                                let (snr, _) = user_snr(u, &allocation, &spec.budget, &tables);
                                rate(snr).expect("SNR is non-negative")
                            })
                            .sum();
                        sums.push(sum);
                    }
                }
            }
            Ok(sums)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut index = 0;
    for &count in &config.user_counts {
        for &(receiver, _) in &receivers {
            for &oris in oris_settings {
                let total: f64 = per_trial.iter().map(|t| t[index]).sum();
                rows.push(SumRateRow {
                    users: count,
                    receiver,
                    oris,
                    mean_sum_rate_bps_hz: total / config.trials as f64,
                });
                index += 1;
            }
        }
    }
    assert_eq!(
        rows.len(),
        config.user_counts.len() * receivers.len() * oris_settings.len()
    );
    Ok(ExperimentResult {
        records: Records::SumRate(rows),
        meta: make_metadata(ResultKind::SumRate, config.seed, config_echo),
    })
}

/// CSV header per result kind.
pub fn csv_header(kind: ResultKind) -> &'static str {
    match kind {
        ResultKind::Cdf => "fov_deg,tier,oris,trial,snr_db",
        ResultKind::Heatmap => "x_m,y_m,receiver,oris,snr_db",
        ResultKind::Usage => "fov_deg,tier,mean_used",
        ResultKind::SumRate => "users,receiver,oris,mean_sum_rate_bps_hz",
    }
}

/// Render the CSV body (header plus rows). Zero SNR serializes as the
/// sentinel `-inf`.
pub fn to_csv(records: &Records) -> String {
    let mut out = String::new();
    out.push_str(csv_header(records.kind()));
    out.push('\n');
    match records {
        Records::Cdf(rows) => {
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.fov_deg, r.tier, r.oris, r.trial, r.snr_db
                ));
            }
        }
        Records::Heatmap(rows) => {
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.x_m,
                    r.y_m,
                    r.receiver.as_str(),
                    r.oris,
                    r.snr_db
                ));
            }
        }
        Records::Usage(rows) => {
            for r in rows {
                out.push_str(&format!("{},{},{}\n", r.fov_deg, r.tier, r.mean_used));
            }
        }
        Records::SumRate(rows) => {
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    r.users,
                    r.receiver.as_str(),
                    r.oris,
                    r.mean_sum_rate_bps_hz
                ));
            }
        }
    }
    out
}

/// Parse a CSV body produced by [`to_csv`].
pub fn parse_csv(kind: ResultKind, text: &str) -> Result<Records, ExperimentError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ExperimentError::Parse("missing header".into()))?;
    if header != csv_header(kind) {
        return Err(ExperimentError::Parse(format!(
            "unexpected header '{header}'"
        )));
    }
    fn field(fields: &[&str], i: usize) -> Result<f64, ExperimentError> {
        fields[i]
            .parse::<f64>()
            .map_err(|e| ExperimentError::Parse(format!("field {i}: {e}")))
    }
    fn split(line: &str, n: usize) -> Result<Vec<&str>, ExperimentError> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(ExperimentError::Parse(format!(
                "expected {n} fields, got {} in '{line}'",
                fields.len()
            )));
        }
        Ok(fields)
    }
    fn parse_bool(s: &str) -> Result<bool, ExperimentError> {
        s.parse::<bool>()
            .map_err(|e| ExperimentError::Parse(format!("bad bool '{s}': {e}")))
    }
    match kind {
        ResultKind::Cdf => {
            let mut rows = Vec::new();
            for line in lines {
                let f = split(line, 5)?;
                rows.push(CdfRow {
                    fov_deg: field(&f, 0)?,
                    tier: field(&f, 1)? as u32,
                    oris: parse_bool(f[2])?,
                    trial: field(&f, 3)? as usize,
                    snr_db: field(&f, 4)?,
                });
            }
            Ok(Records::Cdf(rows))
        }
        ResultKind::Heatmap => {
            let mut rows = Vec::new();
            for line in lines {
                let f = split(line, 5)?;
                rows.push(HeatmapRow {
                    x_m: field(&f, 0)?,
                    y_m: field(&f, 1)?,
                    receiver: Receiver::parse(f[2])?,
                    oris: parse_bool(f[3])?,
                    snr_db: field(&f, 4)?,
                });
            }
            Ok(Records::Heatmap(rows))
        }
        ResultKind::Usage => {
            let mut rows = Vec::new();
            for line in lines {
                let f = split(line, 3)?;
                rows.push(UsageRow {
                    fov_deg: field(&f, 0)?,
                    tier: field(&f, 1)? as u32,
                    mean_used: field(&f, 2)?,
                });
            }
            Ok(Records::Usage(rows))
        }
        ResultKind::SumRate => {
            let mut rows = Vec::new();
            for line in lines {
                let f = split(line, 4)?;
                rows.push(SumRateRow {
                    users: field(&f, 0)? as usize,
                    receiver: Receiver::parse(f[1])?,
                    oris: parse_bool(f[2])?,
                    mean_sum_rate_bps_hz: field(&f, 3)?,
                });
            }
            Ok(Records::SumRate(rows))
        }
    }
}

/// Write the CSV at `path` and the metadata sidecar at `<path>.meta.json`.
pub fn write_results(result: &ExperimentResult, path: &Path) -> Result<(), ExperimentError> {
    let io_err = |p: &Path, source: std::io::Error| ExperimentError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(to_csv(&result.records).as_bytes())
        .map_err(|e| io_err(path, e))?;

    let sidecar = sidecar_path(path);
    let meta =
        serde_json::to_string_pretty(&result.meta).expect("metadata serialization cannot fail");
    std::fs::write(&sidecar, meta).map_err(|e| io_err(&sidecar, e))?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".meta.json");
    std::path::PathBuf::from(name)
}
