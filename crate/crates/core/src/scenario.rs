//! Seeded Monte-Carlo evaluation of RS and HRS, and sweeps over the number
//! of users or the VCSEL beam waist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{build_channel, BranchPolicy, ChannelMatrix};
use crate::error::{Error, Result};
use crate::geometry::{default_scene, Room, Scene, SceneConfig, Vec3};
use crate::optics::{GainModel, NoiseModel};
use crate::precoding::{hrs_precoders, rs_precoders, CommonStrategy};
use crate::ratesplit::{
    group_users, hrs_rates, hrs_sinrs, rs_rates, rs_sinrs, CommonMembership, HrsPowerSplit, RateReport,
    RsPowerSplit, Scheme,
};

const MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PlacementModel {
    UniformFloor,
    /// Users spread around uniformly drawn cluster centers, assigned round-robin.
    ClusteredGaussian { clusters: usize, sigma_m: f64 },
}

impl Default for PlacementModel {
    fn default() -> Self {
        PlacementModel::ClusteredGaussian {
            clusters: 5,
            sigma_m: 0.5,
        }
    }
}

impl PlacementModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PlacementModel::UniformFloor => Ok(()),
            PlacementModel::ClusteredGaussian { clusters, sigma_m } => {
                if clusters == 0 {
                    return Err(Error::validation("scenario.clusters", "must be at least 1"));
                }
                if !(sigma_m >= 0.0 && sigma_m.is_finite()) {
                    return Err(Error::validation(
                        "scenario.cluster_sigma_m",
                        format!("{sigma_m} must be >= 0"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn uniform_point(room: &Room, rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.random_range(0.0..=room.length_m),
        rng.random_range(0.0..=room.width_m),
        room.rx_plane_height_m,
    )
}

/// Draws `k` user positions on the receiver plane.
pub fn place_users(room: &Room, k: usize, model: &PlacementModel, seed: u64) -> Result<Vec<Vec3>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *model {
        PlacementModel::UniformFloor => Ok((0..k).map(|_| uniform_point(room, &mut rng)).collect()),
        PlacementModel::ClusteredGaussian { clusters, sigma_m } => {
            let centers: Vec<Vec3> = (0..clusters).map(|_| uniform_point(room, &mut rng)).collect();
            if sigma_m == 0.0 {
                return Ok((0..k).map(|i| centers[i % clusters]).collect());
            }
            let normal = Normal::new(0.0, sigma_m).map_err(|e| Error::validation("scenario.cluster_sigma_m", e.to_string()))?;
            let mut users = Vec::with_capacity(k);
            for i in 0..k {
                let c = centers[i % clusters];
                let mut attempts = 0;
                let p = loop {
                    let p = Vec3::new(c.x + normal.sample(&mut rng), c.y + normal.sample(&mut rng), c.z);
                    if room.contains_rx_point(&p) {
                        break p;
                    }
                    attempts += 1;
                    if attempts >= MAX_RESAMPLES {
                        break c;
                    }
                };
                users.push(p);
            }
            Ok(users)
        }
    }
}

/// Stable per-trial seed: the `index`-th output of a SplitMix64 stream
/// started at `master_seed`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scene: SceneConfig,
    pub gain_model: GainModel,
    pub branch_policy: BranchPolicy,
    pub noise: NoiseModel,
    pub placement: PlacementModel,
    pub users: usize,
    pub schemes: Vec<Scheme>,
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub total_power: f64,
    pub common_strategy: CommonStrategy,
    /// Leave users with an all-zero channel out of the common-rate minimum.
    pub exclude_unserved_from_common: bool,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core. Never affects results.
    pub workers: Option<usize>,
    pub keep_trials: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scene: SceneConfig::default(),
            gain_model: GainModel::lambertian_from_semi_angle(15.0).expect("15 degrees is a valid semi-angle"),
            branch_policy: BranchPolicy::MaxSumPower,
            noise: NoiseModel::table_one(),
            placement: PlacementModel::default(),
            users: 10,
            schemes: vec![Scheme::Rs, Scheme::Hrs { groups: 5 }, Scheme::Hrs { groups: 10 }],
            t: 0.8,
            alpha: 0.8,
            beta: 0.9,
            total_power: 1.0,
            common_strategy: CommonStrategy::Principal,
            exclude_unserved_from_common: false,
            trials: 200,
            master_seed: 1,
            workers: None,
            keep_trials: false,
        }
    }
}

impl ScenarioConfig {
    /// Checks everything except `G <= K`, which sweeps handle by skipping.
    fn validate_common(&self) -> Result<()> {
        self.gain_model.validate()?;
        self.placement.validate()?;
        if self.trials == 0 {
            return Err(Error::validation("scenario.trials", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::validation("scenario.schemes", "at least one scheme required"));
        }
        if self.workers == Some(0) {
            return Err(Error::validation("scenario.workers", "must be at least 1"));
        }
        for s in &self.schemes {
            if let Scheme::Hrs { groups: 0 } = s {
                return Err(Error::validation("hrs.groups", "0 must be at least 1"));
            }
        }
        RsPowerSplit::new(self.total_power, self.t, 1)?;
        HrsPowerSplit::new(self.total_power, self.alpha, self.beta, 1, 1)?;
        default_scene(&self.scene)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if self.users == 0 {
            return Err(Error::validation("scenario.users", "must be at least 1"));
        }
        for s in &self.schemes {
            if let Scheme::Hrs { groups } = s {
                if *groups > self.users {
                    return Err(Error::validation(
                        "hrs.groups",
                        format!("{groups} exceeds the {} users", self.users),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One trial: positions, channel and the rate report of every scheme.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub positions: Vec<Vec3>,
    pub channel: ChannelMatrix,
    /// One entry per configured scheme; `Err` holds the failure reason.
    pub outcomes: Vec<std::result::Result<RateReport, String>>,
}

/// Sample statistics over the successful trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub n: usize,
    pub failures: usize,
}

/// Mean, sample standard deviation and normal-approximation 95% interval.
pub fn aggregate(values: &[f64], failures: usize) -> Result<Aggregate> {
    let n = values.len();
    if n == 0 {
        return Err(Error::NoSuccessfulTrials);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * std / (n as f64).sqrt();
    Ok(Aggregate {
        mean,
        std,
        ci95_lo: mean - half,
        ci95_hi: mean + half,
        n,
        failures,
    })
}

/// Per-trial values kept for recomputing statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialValue {
    pub trial: usize,
    pub seed: u64,
    pub mean_user_rate_bps: f64,
    pub sum_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub user_rate: Aggregate,
    pub sum_rate: Aggregate,
    pub trials: usize,
    pub failures: Vec<(usize, String)>,
    pub values: Option<Vec<TrialValue>>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub trials: Vec<TrialRecord>,
    pub summaries: Vec<SchemeSummary>,
}

fn evaluate_scheme(
    config: &ScenarioConfig,
    scheme: Scheme,
    positions: &[Vec3],
    channel: &ChannelMatrix,
    sigma2: &[f64],
    membership: &CommonMembership,
    seed: u64,
) -> Result<RateReport> {
    let h = &channel.h;
    let k = h.nrows();
    let bandwidth = config.noise.bandwidth_hz;
    match scheme {
        Scheme::Rs => {
            let split = RsPowerSplit::new(config.total_power, config.t, k)?;
            let p = rs_precoders(h, config.common_strategy)?;
            let s = rs_sinrs(h, &p, &split, sigma2)?;
            Ok(rs_rates(&s, bandwidth, membership))
        }
        Scheme::Hrs { groups } => {
            let grouping = group_users(positions, groups, seed)?;
            let split = HrsPowerSplit::new(config.total_power, config.alpha, config.beta, k, groups)?;
            let p = hrs_precoders(h, &grouping, config.common_strategy)?;
            let s = hrs_sinrs(h, &p, &split, &grouping, sigma2)?;
            Ok(hrs_rates(&s, &grouping, bandwidth, membership))
        }
    }
}

fn run_trial(config: &ScenarioConfig, scene: &Scene, index: usize) -> Result<TrialRecord> {
    let seed = trial_seed(config.master_seed, index as u64);
    let positions = place_users(&scene.room, config.users, &config.placement, seed)?;
    let channel = build_channel(scene, &positions, &config.gain_model, config.branch_policy)?;
    let sigma2: Vec<f64> = (0..config.users)
        .map(|k| config.noise.variance_for(channel.photocurrent_a(k)))
        .collect();
    let membership = if config.exclude_unserved_from_common {
        CommonMembership::Only((0..config.users).map(|k| channel.is_served(k)).collect())
    } else {
        CommonMembership::AllUsers
    };
    let outcomes = config
        .schemes
        .iter()
        .map(|s| {
            evaluate_scheme(config, *s, &positions, &channel, &sigma2, &membership, seed).map_err(|e| e.to_string())
        })
        .collect();
    Ok(TrialRecord {
        index,
        seed,
        positions,
        channel,
        outcomes,
    })
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::validation("scenario.workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn summarize(config: &ScenarioConfig, trials: &[TrialRecord]) -> Result<Vec<SchemeSummary>> {
    config
        .schemes
        .iter()
        .enumerate()
        .map(|(i, scheme)| {
            let mut values = Vec::new();
            let mut failures = Vec::new();
            for t in trials {
                match &t.outcomes[i] {
                    Ok(r) => values.push(TrialValue {
                        trial: t.index,
                        seed: t.seed,
                        mean_user_rate_bps: r.mean_user_rate_bps(),
                        sum_rate_bps: r.sum_rate_bps,
                    }),
                    Err(reason) => failures.push((t.index, reason.clone())),
                }
            }
            let user: Vec<f64> = values.iter().map(|v| v.mean_user_rate_bps).collect();
            let sum: Vec<f64> = values.iter().map(|v| v.sum_rate_bps).collect();
            Ok(SchemeSummary {
                scheme: *scheme,
                user_rate: aggregate(&user, failures.len())?,
                sum_rate: aggregate(&sum, failures.len())?,
                trials: trials.len(),
                failures,
                values: config.keep_trials.then_some(values),
            })
        })
        .collect()
}

/// Runs every trial of `config` and aggregates the per-scheme statistics.
///
/// Trials may run in parallel; each draws from its own index-derived seed,
/// so the result does not depend on the worker count.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let scene = default_scene(&config.scene)?;
    let trials: Vec<TrialRecord> = in_pool(config.workers, || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, &scene, i))
            .collect::<Result<Vec<_>>>()
    })??;
    let summaries = summarize(config, &trials)?;
    Ok(ScenarioResult { trials, summaries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Users,
    BeamWaistM,
}

impl SweepParameter {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParameter::Users => "users",
            SweepParameter::BeamWaistM => "beam_waist_m",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub summary: SchemeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub param: f64,
    pub scheme: Scheme,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Ordered by parameter value, then by configured scheme order.
    pub points: Vec<SweepPoint>,
    pub skipped: Vec<SkippedPoint>,
    pub master_seed: u64,
    pub trial_seeds: Vec<u64>,
}

impl SweepResult {
    pub fn series(&self, scheme: Scheme) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.summary.scheme == scheme).collect()
    }

    pub fn point(&self, param: f64, scheme: Scheme) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.param == param && p.summary.scheme == scheme)
    }
}

fn check_ascending(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::validation(name, "at least one value required"));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation(name, "values must be strictly ascending"));
    }
    Ok(())
}

fn sweep(config: &ScenarioConfig, parameter: SweepParameter, values: &[f64], apply: impl Fn(&mut ScenarioConfig, f64)) -> Result<SweepResult> {
    config.validate_common()?;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &v in values {
        let mut point_config = config.clone();
        apply(&mut point_config, v);
        let (runnable, too_few): (Vec<Scheme>, Vec<Scheme>) = config
            .schemes
            .iter()
            .partition(|s| s.groups().is_none_or(|g| g <= point_config.users));
        for s in too_few {
            skipped.push(SkippedPoint {
                param: v,
                scheme: s,
                reason: format!("{} groups exceed {} users", s.groups().unwrap_or(0), point_config.users),
            });
        }
        if runnable.is_empty() {
            continue;
        }
        point_config.schemes = runnable;
        let result = run_scenario(&point_config)?;
        points.extend(result.summaries.into_iter().map(|summary| SweepPoint { param: v, summary }));
    }
    Ok(SweepResult {
        parameter,
        values: values.to_vec(),
        points,
        skipped,
        master_seed: config.master_seed,
        trial_seeds: (0..config.trials as u64).map(|i| trial_seed(config.master_seed, i)).collect(),
    })
}

/// Runs the scenario for every user count; HRS variants with more groups
/// than users are skipped and listed in `skipped`.
pub fn sweep_users(config: &ScenarioConfig, user_counts: &[usize]) -> Result<SweepResult> {
    let values: Vec<f64> = user_counts.iter().map(|k| *k as f64).collect();
    check_ascending("sweep.users", &values)?;
    if user_counts[0] == 0 {
        return Err(Error::validation("sweep.users", "user counts must be at least 1"));
    }
    sweep(config, SweepParameter::Users, &values, |c, v| c.users = v as usize)
}

/// Runs the scenario for every beam waist (meters) under the Gaussian model.
pub fn sweep_waist(config: &ScenarioConfig, waists_m: &[f64]) -> Result<SweepResult> {
    if !config.gain_model.is_gaussian() {
        return Err(Error::validation(
            "channel.gain_model",
            "beam-waist sweep requires the gaussian-beam model",
        ));
    }
    check_ascending("sweep.beam_waist", waists_m)?;
    if !(waists_m[0] > 0.0) {
        return Err(Error::validation("sweep.beam_waist", "waists must be > 0"));
    }
    sweep(config, SweepParameter::BeamWaistM, waists_m, |c, v| c.scene.beam_waist_m = v)
}
