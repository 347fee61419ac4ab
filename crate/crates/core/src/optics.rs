//! Per-link optical gains and receiver noise.
//!
//! Two emission models are available: a generalized Lambertian pattern and
//! a Gaussian beam whose radius grows with distance from the waist. Both
//! share the same hard field-of-view gate at the detector.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LosGeometry;

/// Emitted optical power per VCSEL, calibrated for the Lambertian default.
pub const DEFAULT_OPTICAL_POWER_W: f64 = 1.0;

/// Elementary charge in coulombs.
pub const ELECTRON_CHARGE_C: f64 = 1.602_176_634e-19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum GainModel {
    GaussianBeam,
    Lambertian { order: f64 },
}

impl GainModel {
    pub fn lambertian_from_semi_angle(semi_angle_deg: f64) -> Result<Self> {
        Ok(GainModel::Lambertian {
            order: lambertian_order(semi_angle_deg)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GainModel::Lambertian { order } if !(order >= 1.0 && order.is_finite()) => Err(
                Error::validation("vcsel.lambertian_order", format!("{order} must be >= 1")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, GainModel::GaussianBeam)
    }
}

/// Lambertian mode number from the half-power semi-angle.
pub fn lambertian_order(semi_angle_deg: f64) -> Result<f64> {
    if !(semi_angle_deg > 0.0 && semi_angle_deg < 90.0) {
        return Err(Error::validation(
            "vcsel.semi_angle_deg",
            format!("{semi_angle_deg} must lie in (0, 90)"),
        ));
    }
    Ok(-LN_2 / semi_angle_deg.to_radians().cos().ln())
}

fn outside_fov(geom: &LosGeometry, fov_deg: f64) -> bool {
    geom.incidence_angle_rad > fov_deg.to_radians() || geom.radiance_angle_rad >= PI / 2.0
}

pub fn lambertian_gain(geom: &LosGeometry, order: f64, area_m2: f64, fov_deg: f64) -> f64 {
    if outside_fov(geom, fov_deg) {
        return 0.0;
    }
    let d = geom.distance_m;
    (order + 1.0) * area_m2 / (2.0 * PI * d * d)
        * geom.radiance_angle_rad.cos().powf(order)
        * geom.incidence_angle_rad.cos()
}

pub fn rayleigh_range(w0_m: f64, wavelength_m: f64) -> f64 {
    PI * w0_m * w0_m / wavelength_m
}

/// Beam radius (1/e^2 intensity) at distance `d_m` from the waist.
pub fn gaussian_beam_radius(w0_m: f64, wavelength_m: f64, d_m: f64) -> f64 {
    let z = d_m / rayleigh_range(w0_m, wavelength_m);
    w0_m * (1.0 + z * z).sqrt()
}

/// Fraction of the emitted power captured by a small detector.
///
/// The detector is treated as sampling the beam intensity at its center,
/// which holds while its radius is much smaller than the local beam radius.
pub fn gaussian_gain(
    geom: &LosGeometry,
    w0_m: f64,
    wavelength_m: f64,
    area_m2: f64,
    fov_deg: f64,
) -> f64 {
    if outside_fov(geom, fov_deg) {
        return 0.0;
    }
    let axial = geom.distance_m * geom.radiance_angle_rad.cos();
    let w = gaussian_beam_radius(w0_m, wavelength_m, axial);
    let r = geom.off_axis_m;
    let intensity = 2.0 / (PI * w * w) * (-2.0 * r * r / (w * w)).exp();
    (intensity * area_m2 * geom.incidence_angle_rad.cos()).min(1.0)
}

/// Thermal noise variance `nsd^2 * bandwidth` in A^2.
pub fn noise_variance(nsd_a_per_rthz: f64, bandwidth_hz: f64) -> f64 {
    nsd_a_per_rthz * nsd_a_per_rthz * bandwidth_hz
}

/// Shot noise `2 q I B` for a mean photocurrent `I`.
pub fn shot_noise_variance(photocurrent_a: f64, bandwidth_hz: f64) -> f64 {
    2.0 * ELECTRON_CHARGE_C * photocurrent_a * bandwidth_hz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub current_nsd_a_per_rthz: f64,
    pub bandwidth_hz: f64,
    pub variance_a2: f64,
    /// Adds signal-dependent shot noise on top of the receiver floor.
    pub include_shot_noise: bool,
}

impl NoiseModel {
    pub fn new(current_nsd_a_per_rthz: f64, bandwidth_hz: f64, include_shot_noise: bool) -> Result<Self> {
        for (name, v) in [
            ("receiver.noise_pa_per_rthz", current_nsd_a_per_rthz),
            ("receiver.bandwidth_ghz", bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{v} must be > 0")));
            }
        }
        Ok(NoiseModel {
            current_nsd_a_per_rthz,
            bandwidth_hz,
            variance_a2: noise_variance(current_nsd_a_per_rthz, bandwidth_hz),
            include_shot_noise,
        })
    }

    /// 4.47 pA/sqrt(Hz) over 5 GHz, thermal floor only.
    pub fn table_one() -> Self {
        NoiseModel::new(4.47e-12, 5e9, false).expect("reference noise parameters are valid")
    }

    /// Total variance for a receiver carrying `photocurrent_a` of mean current.
    pub fn variance_for(&self, photocurrent_a: f64) -> f64 {
        if self.include_shot_noise {
            self.variance_a2 + shot_noise_variance(photocurrent_a, self.bandwidth_hz)
        } else {
            self.variance_a2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{los_geometry, Vec3, VcselElement};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geom(d: f64, phi_deg: f64, psi_deg: f64) -> LosGeometry {
        let phi = phi_deg.to_radians();
        LosGeometry {
            distance_m: d,
            radiance_angle_rad: phi,
            incidence_angle_rad: psi_deg.to_radians(),
            off_axis_m: d * phi.sin(),
        }
    }

    #[test]
    fn lambertian_order_examples() {
        assert_abs_diff_eq!(lambertian_order(60.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lambertian_order(15.0).unwrap(), 19.99, epsilon = 0.01);
        assert_abs_diff_eq!(lambertian_order(45.0).unwrap(), 2.0, epsilon = 0.01);
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(90.0).is_err());
    }

    #[test]
    fn lambertian_gain_examples() {
        let g = lambertian_gain(&geom(2.15, 0.0, 0.0), 20.0, 2e-5, 25.0);
        assert_abs_diff_eq!(g, 21.0 * 2e-5 / (2.0 * PI * 2.15 * 2.15), epsilon = 1e-15);
        assert_abs_diff_eq!(g, 1.446e-5, epsilon = 1e-8);
        assert_eq!(lambertian_gain(&geom(2.15, 0.0, 30.0), 20.0, 2e-5, 25.0), 0.0);
        assert_eq!(lambertian_gain(&geom(2.15, 90.0, 0.0), 20.0, 2e-5, 25.0), 0.0);
    }

    #[test]
    fn beam_radius_examples() {
        assert_eq!(gaussian_beam_radius(20e-6, 850e-9, 0.0), 20e-6);
        assert_abs_diff_eq!(rayleigh_range(20e-6, 850e-9), 1.478e-3, epsilon = 1e-6);
        let far_field = 850e-9 * 2.15 / (PI * 20e-6);
        assert_abs_diff_eq!(gaussian_beam_radius(20e-6, 850e-9, 2.15), far_field, epsilon = 1e-8);
    }

    #[test]
    fn gaussian_gain_examples() {
        let w = gaussian_beam_radius(20e-6, 850e-9, 2.15);
        let on_axis = gaussian_gain(&geom(2.15, 0.0, 0.0), 20e-6, 850e-9, 2e-5, 25.0);
        assert_abs_diff_eq!(on_axis, 2.0 * 2e-5 / (PI * w * w), epsilon = 1e-15);
        assert_abs_diff_eq!(on_axis * (w / 0.0291).powi(2), 1.503e-2, epsilon = 1e-5);

        let at_radius = LosGeometry {
            off_axis_m: w,
            ..geom(2.15, 0.0, 0.0)
        };
        let ratio = gaussian_gain(&at_radius, 20e-6, 850e-9, 2e-5, 25.0) / on_axis;
        assert_abs_diff_eq!(ratio, (-2.0f64).exp(), epsilon = 1e-12);
        assert_eq!(gaussian_gain(&geom(2.15, 0.0, 30.0), 20e-6, 850e-9, 2e-5, 25.0), 0.0);
    }

    #[test]
    fn gaussian_gain_never_exceeds_unity() {
        // A huge detector right at the waist would otherwise capture more than was emitted.
        let g = gaussian_gain(&geom(1e-4, 0.0, 0.0), 20e-6, 850e-9, 1.0, 25.0);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn noise_examples() {
        assert_abs_diff_eq!(noise_variance(4.47e-12, 5e9), 9.9905e-14, epsilon = 1e-17);
        assert_eq!(noise_variance(0.0, 5e9), 0.0);
        assert_abs_diff_eq!(
            noise_variance(4.47e-12, 10e9),
            2.0 * noise_variance(4.47e-12, 5e9),
            epsilon = 1e-27
        );
        let n = NoiseModel::table_one();
        assert_abs_diff_eq!(n.variance_a2, n.current_nsd_a_per_rthz.powi(2) * n.bandwidth_hz, epsilon = 1e-26);
        assert_eq!(n.variance_for(1.0), n.variance_a2);
        let shot = NoiseModel::new(4.47e-12, 5e9, true).unwrap();
        assert_abs_diff_eq!(
            shot.variance_for(1e-3) - shot.variance_a2,
            2.0 * ELECTRON_CHARGE_C * 1e-3 * 5e9,
            epsilon = 1e-27
        );
        assert!(NoiseModel::new(0.0, 5e9, false).is_err());
    }

    /// Power through a disk detector of area `area` centered `r0` off the
    /// beam axis, by polar quadrature over the disk.
    fn disk_capture(w: f64, r0: f64, area: f64) -> f64 {
        let a = (area / PI).sqrt();
        let (nr, nt) = (200, 400);
        let mut sum = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * a / nr as f64;
            for j in 0..nt {
                let t = (j as f64 + 0.5) * 2.0 * PI / nt as f64;
                let x = r0 + rho * t.cos();
                let y = rho * t.sin();
                let i_xy = 2.0 / (PI * w * w) * (-2.0 * (x * x + y * y) / (w * w)).exp();
                sum += i_xy * rho;
            }
        }
        sum * (a / nr as f64) * (2.0 * PI / nt as f64)
    }

    #[test]
    fn center_sampling_matches_disk_integration() {
        let w = gaussian_beam_radius(20e-6, 850e-9, 2.15);
        for r0 in [0.0, 0.25 * w, 0.5 * w, 0.75 * w, w] {
            let g = LosGeometry {
                off_axis_m: r0,
                ..geom(2.15, 0.0, 0.0)
            };
            let approx = gaussian_gain(&g, 20e-6, 850e-9, 2e-5, 25.0);
            let exact = disk_capture(w, r0, 2e-5);
            assert!((approx - exact).abs() / exact < 0.02, "r0 = {r0}: {approx} vs {exact}");
        }
    }

    #[test]
    fn plane_integral_of_gaussian_gain_is_at_most_one() {
        // Vertical beam onto an upward-facing detector swept over the floor.
        let e = VcselElement::new(Vec3::new(0.0, 0.0, 2.15), Vec3::new(0.0, 0.0, -1.0), 20e-6, 850e-9, 1e-3)
            .unwrap();
        let area = 1e-6;
        let (half, n) = (0.15, 300);
        let step = 2.0 * half / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = Vec3::new(-half + (i as f64 + 0.5) * step, -half + (j as f64 + 0.5) * step, 0.0);
                let g = los_geometry(&e, &p, &Vec3::z()).unwrap();
                total += gaussian_gain(&g, e.beam_waist_m, e.wavelength_m, area, 89.0) / area * step * step;
            }
        }
        assert!(total <= 1.0 && total > 0.99, "captured fraction {total}");
    }

    proptest! {
        #[test]
        fn gains_nonnegative_and_gated(d in 0.5f64..6.0, phi in 0.0f64..89.0, psi in 0.0f64..89.0) {
            let g = geom(d, phi, psi);
            let l = lambertian_gain(&g, 20.0, 2e-5, 25.0);
            let q = gaussian_gain(&g, 20e-6, 850e-9, 2e-5, 25.0);
            prop_assert!(l >= 0.0 && q >= 0.0);
            if psi > 25.0 {
                prop_assert_eq!(l, 0.0);
                prop_assert_eq!(q, 0.0);
            }
        }

        #[test]
        fn lambertian_decreases_with_distance_and_angle(
            d in 0.5f64..5.0, dd in 0.01f64..2.0, phi in 0.0f64..80.0, dphi in 0.1f64..9.0, psi in 0.0f64..25.0,
        ) {
            let base = lambertian_gain(&geom(d, phi, psi), 20.0, 2e-5, 25.0);
            prop_assert!(lambertian_gain(&geom(d + dd, phi, psi), 20.0, 2e-5, 25.0) < base);
            prop_assert!(lambertian_gain(&geom(d, phi + dphi, psi), 20.0, 2e-5, 25.0) < base);
        }

        #[test]
        fn gaussian_decreases_off_axis(d in 0.5f64..5.0, r in 0.0f64..0.1, dr in 1e-4f64..0.05) {
            let at = |r: f64| {
                let g = LosGeometry { off_axis_m: r, ..geom(d, 0.0, 0.0) };
                gaussian_gain(&g, 20e-6, 850e-9, 2e-5, 25.0)
            };
            prop_assert!(at(r + dr) <= at(r));
        }

        #[test]
        fn gaussian_on_axis_grows_with_waist(d in 1.0f64..5.0, w0 in 5e-6f64..80e-6, dw in 1e-6f64..20e-6) {
            let g = geom(d, 0.0, 0.0);
            let (lo, hi) = (gaussian_gain(&g, w0, 850e-9, 2e-5, 25.0), gaussian_gain(&g, w0 + dw, 850e-9, 2e-5, 25.0));
            // Strict until the capture clamp at 1 is reached.
            prop_assert!(hi > lo || (hi == 1.0 && lo == 1.0));
        }
    }
}
