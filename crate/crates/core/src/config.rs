//! TOML run configuration.
//!
//! Every key is optional; missing keys take the reference-room defaults.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::BranchPolicy;
use crate::error::{Error, Result};
use crate::geometry::{default_scene, Adr, AdrBranch, Room, SceneConfig, UnitLayout, Vec3};
use crate::optics::{GainModel, NoiseModel};
use crate::precoding::CommonStrategy;
use crate::ratesplit::Scheme;
use crate::scenario::{PlacementModel, ScenarioConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario plus the sweep grids the CLI iterates over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub sweep_users: Vec<usize>,
    pub sweep_waist_m: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            sweep_users: (1..=10).map(|i| 2 * i).collect(),
            sweep_waist_m: (2..=8).map(|i| (10 * i) as f64 / 1e6).collect(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(i64),
    Many(Vec<i64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    schema: Option<u32>,
    #[serde(default)]
    room: RoomSection,
    #[serde(default)]
    transmitters: TransmitterSection,
    #[serde(default)]
    vcsel: VcselSection,
    #[serde(default)]
    receiver: ReceiverSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    rs: RsSection,
    #[serde(default)]
    hrs: HrsSection,
    #[serde(default)]
    power: PowerSection,
    #[serde(default)]
    scenario: ScenarioSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomSection {
    length_m: Option<f64>,
    width_m: Option<f64>,
    height_m: Option<f64>,
    rx_plane_height_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransmitterSection {
    unit_centers_m: Option<Vec<[f64; 3]>>,
    vcsels_per_unit: Option<usize>,
    layout: Option<UnitLayout>,
    tilt_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VcselSection {
    beam_waist_um: Option<f64>,
    wavelength_nm: Option<f64>,
    optical_power_w: Option<f64>,
    semi_angle_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverSection {
    responsivity_a_per_w: Option<f64>,
    noise_pa_per_rthz: Option<f64>,
    bandwidth_ghz: Option<f64>,
    shot_noise: Option<bool>,
    branch_azimuths_deg: Option<Vec<f64>>,
    branch_elevations_deg: Option<Vec<f64>>,
    fov_deg: Option<f64>,
    area_mm2: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum GainModelName {
    Lambertian,
    GaussianBeam,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    gain_model: Option<GainModelName>,
    branch_policy: Option<BranchPolicy>,
    exclude_unserved_from_common: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RsSection {
    t: Option<f64>,
    common_precoder: Option<CommonStrategy>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HrsSection {
    groups: Option<OneOrMany>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerSection {
    total: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PlacementName {
    UniformFloor,
    ClusteredGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeName {
    Rs,
    Hrs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    users: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    keep_trials: Option<bool>,
    schemes: Option<Vec<SchemeName>>,
    placement: Option<PlacementName>,
    clusters: Option<usize>,
    cluster_sigma_m: Option<f64>,
    sweep_users: Option<Vec<usize>>,
    sweep_waist_um: Option<Vec<f64>>,
}

fn resolve(file: FileConfig) -> Result<RunConfig> {
    if let Some(v) = file.schema {
        if v != SCHEMA_VERSION {
            return Err(Error::validation("schema", format!("{v} is not supported (expected {SCHEMA_VERSION})")));
        }
    }
    let defaults = RunConfig::default();
    let mut scene = SceneConfig::default();

    let r = &file.room;
    let base = scene.room;
    scene.room = Room::new(
        r.length_m.unwrap_or(base.length_m),
        r.width_m.unwrap_or(base.width_m),
        r.height_m.unwrap_or(base.height_m),
        r.rx_plane_height_m.unwrap_or(base.rx_plane_height_m),
    )?;

    let t = &file.transmitters;
    if let Some(c) = &t.unit_centers_m {
        scene.unit_centers = c.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
    }
    scene.vcsels_per_unit = t.vcsels_per_unit.unwrap_or(scene.vcsels_per_unit);
    scene.layout = t.layout.unwrap_or(scene.layout);
    scene.tilt_deg = t.tilt_deg.unwrap_or(scene.tilt_deg);

    let v = &file.vcsel;
    if let Some(w) = v.beam_waist_um {
        scene.beam_waist_m = w / 1e6;
    }
    if let Some(w) = v.wavelength_nm {
        scene.wavelength_m = w / 1e9;
    }
    scene.optical_power_w = v.optical_power_w.unwrap_or(scene.optical_power_w);

    let rx = &file.receiver;
    let template = Adr::table_one();
    let azimuths = rx
        .branch_azimuths_deg
        .clone()
        .unwrap_or_else(|| template.branches.iter().map(|b| b.azimuth_deg).collect());
    let elevations = rx
        .branch_elevations_deg
        .clone()
        .unwrap_or_else(|| template.branches.iter().map(|b| b.elevation_deg).collect());
    if azimuths.len() != elevations.len() {
        return Err(Error::validation(
            "receiver.branch_elevations_deg",
            format!("{} elevations for {} azimuths", elevations.len(), azimuths.len()),
        ));
    }
    let fov = rx.fov_deg.unwrap_or(template.branches[0].fov_deg);
    let area = rx.area_mm2.map_or(template.branches[0].area_m2, |a| a / 1e6);
    let branches = azimuths
        .iter()
        .zip(&elevations)
        .map(|(az, el)| AdrBranch::new(*az, *el, fov, area))
        .collect::<Result<Vec<_>>>()?;
    scene.adr = Adr::new(branches, rx.responsivity_a_per_w.unwrap_or(template.responsivity_a_per_w))?;

    let base_noise = NoiseModel::table_one();
    let noise = NoiseModel::new(
        rx.noise_pa_per_rthz.map_or(base_noise.current_nsd_a_per_rthz, |n| n / 1e12),
        rx.bandwidth_ghz.map_or(base_noise.bandwidth_hz, |b| b * 1e9),
        rx.shot_noise.unwrap_or(false),
    )?;

    let semi_angle = v.semi_angle_deg.unwrap_or(15.0);
    let gain_model = match file.channel.gain_model.unwrap_or(GainModelName::Lambertian) {
        GainModelName::Lambertian => GainModel::lambertian_from_semi_angle(semi_angle)?,
        GainModelName::GaussianBeam => GainModel::GaussianBeam,
    };

    let groups: Vec<usize> = match &file.hrs.groups {
        None => vec![5, 10],
        Some(g) => {
            let raw = match g {
                OneOrMany::One(g) => vec![*g],
                OneOrMany::Many(g) => g.clone(),
            };
            if raw.is_empty() {
                return Err(Error::validation("hrs.groups", "at least one group count required"));
            }
            raw.into_iter()
                .map(|g| {
                    if g >= 1 {
                        Ok(g as usize)
                    } else {
                        Err(Error::validation("hrs.groups", format!("{g} must be at least 1")))
                    }
                })
                .collect::<Result<_>>()?
        }
    };
    let names = file
        .scenario
        .schemes
        .clone()
        .unwrap_or_else(|| vec![SchemeName::Rs, SchemeName::Hrs]);
    let mut schemes = Vec::new();
    if names.contains(&SchemeName::Rs) {
        schemes.push(Scheme::Rs);
    }
    if names.contains(&SchemeName::Hrs) {
        schemes.extend(groups.iter().map(|g| Scheme::Hrs { groups: *g }));
    }

    let s = &file.scenario;
    let placement = match s.placement.unwrap_or(PlacementName::ClusteredGaussian) {
        PlacementName::UniformFloor => PlacementModel::UniformFloor,
        PlacementName::ClusteredGaussian => {
            let PlacementModel::ClusteredGaussian { clusters, sigma_m } = PlacementModel::default() else {
                unreachable!("default placement is clustered")
            };
            PlacementModel::ClusteredGaussian {
                clusters: s.clusters.unwrap_or(clusters),
                sigma_m: s.cluster_sigma_m.unwrap_or(sigma_m),
            }
        }
    };

    let d = &defaults.scenario;
    let scenario = ScenarioConfig {
        scene,
        gain_model,
        branch_policy: file.channel.branch_policy.unwrap_or(d.branch_policy),
        noise,
        placement,
        users: s.users.unwrap_or(d.users),
        schemes,
        t: file.rs.t.unwrap_or(d.t),
        alpha: file.hrs.alpha.unwrap_or(d.alpha),
        beta: file.hrs.beta.unwrap_or(d.beta),
        total_power: file.power.total.unwrap_or(d.total_power),
        common_strategy: file.rs.common_precoder.unwrap_or(d.common_strategy),
        exclude_unserved_from_common: file
            .channel
            .exclude_unserved_from_common
            .unwrap_or(d.exclude_unserved_from_common),
        trials: s.trials.unwrap_or(d.trials),
        master_seed: s.seed.unwrap_or(d.master_seed),
        workers: s.workers.or(d.workers),
        keep_trials: s.keep_trials.unwrap_or(d.keep_trials),
    };
    let config = RunConfig {
        scenario,
        sweep_users: s.sweep_users.clone().unwrap_or(defaults.sweep_users),
        sweep_waist_m: s
            .sweep_waist_um
            .as_ref()
            .map_or(defaults.sweep_waist_m, |w| w.iter().map(|x| x / 1e6).collect()),
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks the parts of the config that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        default_scene(&s.scene)?;
        s.gain_model.validate()?;
        s.placement.validate()?;
        if s.trials == 0 {
            return Err(Error::validation("scenario.trials", "0 must be at least 1"));
        }
        if s.users == 0 {
            return Err(Error::validation("scenario.users", "0 must be at least 1"));
        }
        if s.workers == Some(0) {
            return Err(Error::validation("scenario.workers", "0 must be at least 1"));
        }
        if s.schemes.is_empty() {
            return Err(Error::validation("scenario.schemes", "at least one scheme required"));
        }
        for (name, v) in [("rs.t", s.t), ("hrs.alpha", s.alpha), ("hrs.beta", s.beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::validation(name, format!("{v} must lie in (0, 1]")));
            }
        }
        if !(s.total_power > 0.0 && s.total_power.is_finite()) {
            return Err(Error::validation("power.total", format!("{} must be > 0", s.total_power)));
        }
        if self.sweep_users.contains(&0) {
            return Err(Error::validation("scenario.sweep_users", "user counts must be at least 1"));
        }
        if self.sweep_waist_m.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::validation("scenario.sweep_waist_um", "waists must be > 0"));
        }
        Ok(())
    }
}

/// Parses a TOML config; an empty document yields the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    resolve(file)
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

/// Loads a TOML config, or the resolved config embedded in a JSON run manifest.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let m: ManifestConfig = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        m.config.validate()?;
        Ok(m.config)
    } else {
        parse_config(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        let s = &c.scenario;
        assert_eq!(s.scene.unit_centers.len(), 4);
        assert_eq!(s.scene.vcsels_per_unit, 10);
        assert_eq!(s.scene.wavelength_m, 850e-9);
        assert_eq!(s.scene.adr.responsivity_a_per_w, 0.4);
        assert_eq!(s.noise.current_nsd_a_per_rthz, 4.47e-12);
        assert_eq!(s.noise.bandwidth_hz, 5e9);
        assert!(s.scene.adr.branches.iter().all(|b| b.fov_deg == 25.0));
        assert_eq!(c.sweep_users, vec![2, 4, 6, 8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(c.sweep_waist_m.len(), 7);
    }

    #[test]
    fn beam_waist_override() {
        let c = parse_config("schema = 1\n[vcsel]\nbeam_waist_um = 20\n").unwrap();
        assert!((c.scenario.scene.beam_waist_m - 20e-6).abs() < 1e-18);
    }

    #[test]
    fn groups_accept_scalar_or_list() {
        let one = parse_config("[hrs]\ngroups = 4\n").unwrap();
        assert_eq!(one.scenario.schemes, vec![Scheme::Rs, Scheme::Hrs { groups: 4 }]);
        let many = parse_config("[hrs]\ngroups = [2, 5]\n[scenario]\nschemes = [\"hrs\"]\n").unwrap();
        assert_eq!(many.scenario.schemes, vec![Scheme::Hrs { groups: 2 }, Scheme::Hrs { groups: 5 }]);
    }

    #[test]
    fn zero_groups_rejected_with_key_name() {
        match parse_config("[hrs]\ngroups = 0\n") {
            Err(Error::Validation { name, .. }) => assert_eq!(name, "hrs.groups"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_types_rejected() {
        let e = parse_config("[room]\nlenght_m = 5\n").unwrap_err().to_string();
        assert!(e.contains("lenght_m"), "{e}");
        let e = parse_config("[scenario]\ntrials = \"many\"\n").unwrap_err().to_string();
        assert!(e.contains("trials"), "{e}");
        assert!(parse_config("schema = 2\n").is_err());
        assert!(parse_config("[rs]\nt = 1.5\n").is_err());
        assert!(parse_config("[receiver]\nbranch_azimuths_deg = [0, 90]\n").is_err());
    }

    #[test]
    fn full_file_round_trip() {
        let text = r#"
schema = 1
[room]
length_m = 6.0
[transmitters]
layout = "steered"
[vcsel]
optical_power_w = 0.0025
[receiver]
bandwidth_ghz = 2.5
shot_noise = true
[channel]
gain_model = "gaussian-beam"
branch_policy = "max-min-gain"
[rs]
t = 0.7
common_precoder = "equal-gain-mrt"
[hrs]
alpha = 0.6
beta = 0.95
[power]
total = 2.0
[scenario]
users = 12
trials = 30
seed = 99
placement = "uniform-floor"
sweep_waist_um = [20, 40]
"#;
        let c = parse_config(text).unwrap();
        let s = &c.scenario;
        assert_eq!(s.scene.room.length_m, 6.0);
        assert_eq!(s.scene.layout, UnitLayout::Steered);
        assert_eq!(s.gain_model, GainModel::GaussianBeam);
        assert_eq!(s.branch_policy, BranchPolicy::MaxMinGain);
        assert!(s.noise.include_shot_noise);
        assert_eq!(s.noise.bandwidth_hz, 2.5e9);
        assert_eq!((s.t, s.alpha, s.beta, s.total_power), (0.7, 0.6, 0.95, 2.0));
        assert_eq!(s.common_strategy, CommonStrategy::EqualGainMrt);
        assert_eq!((s.users, s.trials, s.master_seed), (12, 30, 99));
        assert_eq!(s.placement, PlacementModel::UniformFloor);
        assert_eq!(c.sweep_waist_m.len(), 2);

        let json = serde_json::to_string(&serde_json::json!({ "config": c })).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, json).unwrap();
        assert_eq!(load_config(&path).unwrap(), c);
    }
}
