//! Room, transmitter and angle-diversity receiver geometry.
//!
//! Coordinates are meters in a right-handed room frame: the origin sits in
//! a floor corner, `x` runs along the room length, `y` along its width and
//! `z` points up. ADR branch azimuths are measured from `+x` toward `+y`;
//! elevations are measured from the horizontal plane, so 90 degrees is the
//! zenith.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_NORM_TOL: f64 = 1e-12;
/// Element positions must stay this close to their unit center.
pub const UNIT_RADIUS_M: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub rx_plane_height_m: f64,
}

impl Room {
    pub fn new(length_m: f64, width_m: f64, height_m: f64, rx_plane_height_m: f64) -> Result<Self> {
        for (name, v) in [
            ("room.length_m", length_m),
            ("room.width_m", width_m),
            ("room.height_m", height_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} must be > 0")));
            }
        }
        if !(rx_plane_height_m > 0.0 && rx_plane_height_m < height_m) {
            return Err(Error::validation(
                "room.rx_plane_height_m",
                format!("{rx_plane_height_m} must lie in (0, {height_m})"),
            ));
        }
        Ok(Room {
            length_m,
            width_m,
            height_m,
            rx_plane_height_m,
        })
    }

    /// 5 m x 5 m x 3 m with the communication floor 0.85 m above ground.
    pub fn table_one() -> Self {
        Room {
            length_m: 5.0,
            width_m: 5.0,
            height_m: 3.0,
            rx_plane_height_m: 0.85,
        }
    }

    /// True when `p` lies on the receiver plane within the room footprint.
    pub fn contains_rx_point(&self, p: &Vec3) -> bool {
        (0.0..=self.length_m).contains(&p.x)
            && (0.0..=self.width_m).contains(&p.y)
            && (p.z - self.rx_plane_height_m).abs() <= 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcselElement {
    pub position: Vec3,
    /// Unit emission axis, pointing into the lower hemisphere.
    pub boresight: Vec3,
    pub beam_waist_m: f64,
    pub wavelength_m: f64,
    pub optical_power_w: f64,
}

impl VcselElement {
    pub fn new(
        position: Vec3,
        boresight: Vec3,
        beam_waist_m: f64,
        wavelength_m: f64,
        optical_power_w: f64,
    ) -> Result<Self> {
        if (boresight.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::validation(
                "vcsel.boresight",
                format!("norm {} is not 1", boresight.norm()),
            ));
        }
        if boresight.z > 0.0 {
            return Err(Error::validation(
                "vcsel.boresight",
                "ceiling-mounted emitters must point downward (z <= 0)",
            ));
        }
        for (name, v) in [
            ("vcsel.beam_waist", beam_waist_m),
            ("vcsel.wavelength", wavelength_m),
            ("vcsel.optical_power_w", optical_power_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} must be > 0")));
            }
        }
        Ok(VcselElement {
            position,
            boresight,
            beam_waist_m,
            wavelength_m,
            optical_power_w,
        })
    }

    /// Copy of this element re-aimed at `target`.
    pub fn aimed_at(&self, target: &Vec3) -> Result<Self> {
        let ray = target - self.position;
        let norm = ray.norm();
        if norm == 0.0 || ray.z >= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "cannot aim emitter at {:?} from {:?}",
                target, self.position
            )));
        }
        Ok(VcselElement {
            boresight: ray / norm,
            ..*self
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitterUnit {
    pub center: Vec3,
    pub elements: Vec<VcselElement>,
}

impl TransmitterUnit {
    pub fn new(center: Vec3, elements: Vec<VcselElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::validation(
                "transmitters.vcsels_per_unit",
                "a unit needs at least one VCSEL",
            ));
        }
        if let Some(e) = elements
            .iter()
            .find(|e| (e.position - center).norm() > UNIT_RADIUS_M)
        {
            return Err(Error::validation(
                "transmitters.units",
                format!(
                    "element at {:?} is more than {UNIT_RADIUS_M} m from unit center {:?}",
                    e.position, center
                ),
            ));
        }
        Ok(TransmitterUnit { center, elements })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdrBranch {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Field-of-view half angle.
    pub fov_deg: f64,
    pub area_m2: f64,
}

impl AdrBranch {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, fov_deg: f64, area_m2: f64) -> Result<Self> {
        check_branch_angles(azimuth_deg, elevation_deg)?;
        if !(fov_deg > 0.0 && fov_deg < 90.0) {
            return Err(Error::validation(
                "receiver.fov_deg",
                format!("{fov_deg} must lie in (0, 90)"),
            ));
        }
        if !(area_m2 > 0.0 && area_m2.is_finite()) {
            return Err(Error::validation("receiver.area", format!("{area_m2} must be > 0")));
        }
        Ok(AdrBranch {
            azimuth_deg,
            elevation_deg,
            fov_deg,
            area_m2,
        })
    }

    pub fn normal(&self) -> Vec3 {
        normal_unchecked(self.azimuth_deg, self.elevation_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adr {
    pub branches: Vec<AdrBranch>,
    pub responsivity_a_per_w: f64,
}

impl Adr {
    pub fn new(branches: Vec<AdrBranch>, responsivity_a_per_w: f64) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::validation("receiver", "ADR needs at least one branch"));
        }
        if !(responsivity_a_per_w > 0.0 && responsivity_a_per_w.is_finite()) {
            return Err(Error::validation(
                "receiver.responsivity_a_per_w",
                format!("{responsivity_a_per_w} must be > 0"),
            ));
        }
        Ok(Adr {
            branches,
            responsivity_a_per_w,
        })
    }

    /// Four 20 mm^2 detectors at azimuths 0/90/180/270, elevation 60, FOV 25, 0.4 A/W.
    pub fn table_one() -> Self {
        let branches = [0.0, 90.0, 180.0, 270.0]
            .iter()
            .map(|&az| AdrBranch {
                azimuth_deg: az,
                elevation_deg: 60.0,
                fov_deg: 25.0,
                area_m2: 20e-6,
            })
            .collect();
        Adr {
            branches,
            responsivity_a_per_w: 0.4,
        }
    }

    /// Index of the first branch whose field of view contains `source` as seen from `rx`.
    pub fn branch_seeing(&self, rx: &Vec3, source: &Vec3) -> Option<usize> {
        let ray = source - rx;
        let norm = ray.norm();
        if norm == 0.0 {
            return None;
        }
        self.branches
            .iter()
            .position(|b| angle_between(&b.normal(), &ray) <= b.fov_deg.to_radians())
    }
}

/// Distance and angles of one emitter-to-detector line-of-sight link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosGeometry {
    pub distance_m: f64,
    /// Angle between the emitter boresight and the emitter-to-receiver ray.
    pub radiance_angle_rad: f64,
    /// Angle between the detector normal and the receiver-to-emitter ray.
    pub incidence_angle_rad: f64,
    /// Perpendicular distance from the beam axis to the detector.
    pub off_axis_m: f64,
}

fn check_branch_angles(azimuth_deg: f64, elevation_deg: f64) -> Result<()> {
    if !(0.0..360.0).contains(&azimuth_deg) {
        return Err(Error::validation(
            "receiver.azimuth_deg",
            format!("{azimuth_deg} must lie in [0, 360)"),
        ));
    }
    if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
        return Err(Error::validation(
            "receiver.elevation_deg",
            format!("{elevation_deg} must lie in (0, 90]"),
        ));
    }
    Ok(())
}

fn normal_unchecked(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

/// Outward normal of a detector branch pointing at (azimuth, elevation).
pub fn branch_normal(azimuth_deg: f64, elevation_deg: f64) -> Result<Vec3> {
    check_branch_angles(azimuth_deg, elevation_deg)?;
    Ok(normal_unchecked(azimuth_deg, elevation_deg))
}

/// Angle between two nonzero vectors, accurate near 0 and pi.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn los_geometry(element: &VcselElement, rx_point: &Vec3, branch_normal: &Vec3) -> Result<LosGeometry> {
    let ray = rx_point - element.position;
    let distance_m = ray.norm();
    if distance_m == 0.0 {
        return Err(Error::DegenerateGeometry(
            "receiver coincides with emitter".into(),
        ));
    }
    if ray.z >= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "receiver at z = {} is not below emitter at z = {}",
            rx_point.z, element.position.z
        )));
    }
    let radiance_angle_rad = angle_between(&element.boresight, &ray);
    let incidence_angle_rad = angle_between(branch_normal, &(-ray));
    Ok(LosGeometry {
        distance_m,
        radiance_angle_rad,
        incidence_angle_rad,
        off_axis_m: distance_m * radiance_angle_rad.sin(),
    })
}

/// How the VCSELs of one unit are oriented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitLayout {
    /// One element straight down, the rest tilted by `tilt_deg` at evenly spaced azimuths.
    Fixed,
    /// Fixed orientations, then elements re-aimed at visible users per placement.
    Steered,
}

/// Everything needed to build a [`Scene`]. Defaults follow the reference room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub room: Room,
    pub unit_centers: Vec<Vec3>,
    pub vcsels_per_unit: usize,
    pub layout: UnitLayout,
    pub tilt_deg: f64,
    pub beam_waist_m: f64,
    pub wavelength_m: f64,
    pub optical_power_w: f64,
    pub adr: Adr,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            room: Room::table_one(),
            unit_centers: vec![
                Vec3::new(3.5, 3.5, 3.0),
                Vec3::new(1.5, 3.5, 3.0),
                Vec3::new(3.5, 1.5, 3.0),
                Vec3::new(1.5, 1.5, 3.0),
            ],
            vcsels_per_unit: 10,
            layout: UnitLayout::Fixed,
            tilt_deg: 20.0,
            beam_waist_m: 5e-6,
            wavelength_m: 850e-9,
            optical_power_w: crate::optics::DEFAULT_OPTICAL_POWER_W,
            adr: Adr::table_one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: Room,
    pub units: Vec<TransmitterUnit>,
    pub adr: Adr,
    pub layout: UnitLayout,
}

impl Scene {
    pub fn elements(&self) -> impl Iterator<Item = &VcselElement> + '_ {
        self.units.iter().flat_map(|u| u.elements.iter())
    }

    pub fn element_count(&self) -> usize {
        self.units.iter().map(|u| u.elements.len()).sum()
    }

    /// Re-aims VCSELs at users for the [`UnitLayout::Steered`] layout.
    ///
    /// Users are served round-robin in index order; each round a user takes
    /// one free element from the nearest unit that lies inside one of its
    /// ADR branch fields of view and has not yet served it. Elements left
    /// over keep their fixed orientation. Fixed-layout scenes are returned
    /// unchanged.
    pub fn steered_toward(&self, users: &[Vec3]) -> Result<Scene> {
        if self.layout != UnitLayout::Steered || users.is_empty() {
            return Ok(self.clone());
        }
        let mut scene = self.clone();
        let mut next_free = vec![0usize; scene.units.len()];
        let mut served = vec![vec![false; scene.units.len()]; users.len()];
        loop {
            let mut assigned_any = false;
            for (k, user) in users.iter().enumerate() {
                let best = scene
                    .units
                    .iter()
                    .enumerate()
                    .filter(|(u, unit)| {
                        !served[k][*u]
                            && next_free[*u] < unit.elements.len()
                            && self.adr.branch_seeing(user, &unit.center).is_some()
                    })
                    .min_by(|(a, ua), (b, ub)| {
                        let da = (ua.center - user).norm();
                        let db = (ub.center - user).norm();
                        da.total_cmp(&db).then(a.cmp(b))
                    })
                    .map(|(u, _)| u);
                if let Some(u) = best {
                    let slot = next_free[u];
                    let unit = &mut scene.units[u];
                    unit.elements[slot] = unit.elements[slot].aimed_at(user)?;
                    next_free[u] += 1;
                    served[k][u] = true;
                    assigned_any = true;
                }
            }
            if !assigned_any {
                break;
            }
        }
        Ok(scene)
    }
}

/// Boresight of element `index` out of `count` co-located elements.
fn layout_boresight(index: usize, count: usize, tilt_deg: f64) -> Vec3 {
    if index == 0 || count == 1 {
        return Vec3::new(0.0, 0.0, -1.0);
    }
    let az = (360.0 * (index - 1) as f64 / (count - 1) as f64).to_radians();
    let tilt = tilt_deg.to_radians();
    Vec3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), -tilt.cos())
}

/// Builds the room, transmitter units and ADR template from `config`.
pub fn default_scene(config: &SceneConfig) -> Result<Scene> {
    let room = config.room;
    Room::new(room.length_m, room.width_m, room.height_m, room.rx_plane_height_m)?;
    if config.unit_centers.is_empty() {
        return Err(Error::validation("transmitters.units", "at least one unit required"));
    }
    if config.vcsels_per_unit == 0 {
        return Err(Error::validation(
            "transmitters.vcsels_per_unit",
            "must be at least 1",
        ));
    }
    if !(0.0..90.0).contains(&config.tilt_deg) {
        return Err(Error::validation(
            "transmitters.tilt_deg",
            format!("{} must lie in [0, 90)", config.tilt_deg),
        ));
    }
    for b in &config.adr.branches {
        AdrBranch::new(b.azimuth_deg, b.elevation_deg, b.fov_deg, b.area_m2)?;
    }
    let adr = Adr::new(config.adr.branches.clone(), config.adr.responsivity_a_per_w)?;

    let mut units = Vec::with_capacity(config.unit_centers.len());
    for center in &config.unit_centers {
        if center.z <= room.rx_plane_height_m || center.z > room.height_m {
            return Err(Error::validation(
                "transmitters.units",
                format!("unit at {center:?} must sit above the receiver plane and inside the room"),
            ));
        }
        let elements = (0..config.vcsels_per_unit)
            .map(|i| {
                VcselElement::new(
                    *center,
                    layout_boresight(i, config.vcsels_per_unit, config.tilt_deg),
                    config.beam_waist_m,
                    config.wavelength_m,
                    config.optical_power_w,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        units.push(TransmitterUnit::new(*center, elements)?);
    }
    Ok(Scene {
        room,
        units,
        adr,
        layout: config.layout,
    })
}
