//! Electrical channel matrix assembly from per-branch optical gains.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{los_geometry, Scene, Vec3};
use crate::linalg::{numerical_rank, rows_of, singular_values};
use crate::optics::{gaussian_gain, lambertian_gain, GainModel};

/// Optical gains indexed by (user, ADR branch, transmit element).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGains {
    users: usize,
    branches: usize,
    elements: usize,
    data: Vec<f64>,
    /// Emitted optical power of each element in watts.
    pub element_power_w: Vec<f64>,
    pub responsivity_a_per_w: f64,
    pub model: GainModel,
}

impl BranchGains {
    /// Wraps precomputed gains laid out user-major, then branch, then element.
    pub fn from_raw(
        users: usize,
        branches: usize,
        element_power_w: Vec<f64>,
        data: Vec<f64>,
        responsivity_a_per_w: f64,
        model: GainModel,
    ) -> Result<Self> {
        let elements = element_power_w.len();
        if data.len() != users * branches * elements {
            return Err(Error::validation(
                "branch gains",
                format!("expected {} entries, got {}", users * branches * elements, data.len()),
            ));
        }
        if data.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::validation("branch gains", "gains must be nonnegative"));
        }
        Ok(BranchGains {
            users,
            branches,
            elements,
            data,
            element_power_w,
            responsivity_a_per_w,
            model,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.users, self.branches, self.elements)
    }

    pub fn get(&self, user: usize, branch: usize, element: usize) -> f64 {
        self.data[(user * self.branches + branch) * self.elements + element]
    }

    pub fn row(&self, user: usize, branch: usize) -> &[f64] {
        let start = (user * self.branches + branch) * self.elements;
        &self.data[start..start + self.elements]
    }
}

/// Rule for choosing the single ADR branch that feeds a user's receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchPolicy {
    /// Largest sum of squared element gains.
    #[default]
    MaxSumPower,
    /// Largest weakest nonzero element gain.
    MaxMinGain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// K x N electrical gains in amperes per unit transmit symbol.
    pub h: DMatrix<f64>,
    /// Chosen branch per user; `None` when the user sees no element at all.
    pub selected_branch: Vec<Option<usize>>,
    pub model: GainModel,
}

impl ChannelMatrix {
    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn elements(&self) -> usize {
        self.h.ncols()
    }

    pub fn is_served(&self, user: usize) -> bool {
        self.selected_branch[user].is_some()
    }

    /// Mean photocurrent at user `k`: every element emits its mean optical power.
    pub fn photocurrent_a(&self, user: usize) -> f64 {
        self.h.row(user).sum()
    }
}

fn link_gain(scene: &Scene, model: &GainModel, user: &Vec3, branch: usize, element: usize) -> Result<f64> {
    let b = &scene.adr.branches[branch];
    let e = scene.elements().nth(element).expect("element index in range");
    let geom = los_geometry(e, user, &b.normal())?;
    Ok(match *model {
        GainModel::Lambertian { order } => lambertian_gain(&geom, order, b.area_m2, b.fov_deg),
        GainModel::GaussianBeam => gaussian_gain(&geom, e.beam_waist_m, e.wavelength_m, b.area_m2, b.fov_deg),
    })
}

/// Optical gain of every element toward every branch of every user.
///
/// Steered scenes are first re-aimed at `users`.
pub fn build_branch_gains(scene: &Scene, users: &[Vec3], model: &GainModel) -> Result<BranchGains> {
    model.validate()?;
    if let Some((k, p)) = users
        .iter()
        .enumerate()
        .find(|(_, p)| !scene.room.contains_rx_point(p))
    {
        return Err(Error::validation(
            "users",
            format!("user {k} at {p:?} is not on the receiver plane inside the room"),
        ));
    }
    let scene = scene.steered_toward(users)?;
    let normals: Vec<Vec3> = scene.adr.branches.iter().map(|b| b.normal()).collect();
    let elements: Vec<_> = scene.elements().copied().collect();
    let per_user: Vec<Vec<f64>> = users
        .par_iter()
        .map(|user| {
            let mut row = Vec::with_capacity(normals.len() * elements.len());
            for (b, normal) in normals.iter().enumerate() {
                let branch = &scene.adr.branches[b];
                for e in &elements {
                    let geom = los_geometry(e, user, normal)?;
                    row.push(match *model {
                        GainModel::Lambertian { order } => {
                            lambertian_gain(&geom, order, branch.area_m2, branch.fov_deg)
                        }
                        GainModel::GaussianBeam => gaussian_gain(
                            &geom,
                            e.beam_waist_m,
                            e.wavelength_m,
                            branch.area_m2,
                            branch.fov_deg,
                        ),
                    });
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    BranchGains::from_raw(
        users.len(),
        normals.len(),
        elements.iter().map(|e| e.optical_power_w).collect(),
        per_user.concat(),
        scene.adr.responsivity_a_per_w,
        *model,
    )
}

fn branch_score(row: &[f64], policy: BranchPolicy) -> f64 {
    match policy {
        BranchPolicy::MaxSumPower => row.iter().map(|g| g * g).sum(),
        BranchPolicy::MaxMinGain => row
            .iter()
            .copied()
            .filter(|g| *g > 0.0)
            .reduce(f64::min)
            .unwrap_or(0.0),
    }
}

/// Picks one branch per user and converts its optical gains to electrical gains.
pub fn select_branch(gains: &BranchGains, policy: BranchPolicy) -> ChannelMatrix {
    let (users, branches, elements) = gains.shape();
    let mut h = DMatrix::zeros(users, elements);
    let mut selected_branch = Vec::with_capacity(users);
    for k in 0..users {
        let mut best: Option<(usize, f64)> = None;
        for b in 0..branches {
            let score = branch_score(gains.row(k, b), policy);
            if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
                best = Some((b, score));
            }
        }
        selected_branch.push(best.map(|(b, _)| b));
        if let Some((b, _)) = best {
            for (n, g) in gains.row(k, b).iter().enumerate() {
                h[(k, n)] = gains.responsivity_a_per_w * gains.element_power_w[n] * g;
            }
        }
    }
    ChannelMatrix {
        h,
        selected_branch,
        model: gains.model,
    }
}

/// Convenience wrapper: branch gains followed by branch selection.
pub fn build_channel(scene: &Scene, users: &[Vec3], model: &GainModel, policy: BranchPolicy) -> Result<ChannelMatrix> {
    Ok(select_branch(&build_branch_gains(scene, users, model)?, policy))
}

/// Recomputes one electrical channel entry from scratch.
pub fn channel_entry(
    scene: &Scene,
    users: &[Vec3],
    model: &GainModel,
    user: usize,
    branch: usize,
    element: usize,
) -> Result<f64> {
    let scene = scene.steered_toward(users)?;
    let power = scene.elements().nth(element).expect("element index").optical_power_w;
    Ok(scene.adr.responsivity_a_per_w * power * link_gain(&scene, model, &users[user], branch, element)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub rank: usize,
    /// Ratio of extreme singular values; infinite when rank deficient.
    pub condition_number: f64,
    pub min_row_norm: f64,
    pub rank_deficient: bool,
}

/// Rank and 2-norm conditioning of the rows in `users` (all rows when empty).
pub fn condition_report(h: &ChannelMatrix, users: &[usize]) -> ConditionReport {
    let idx: Vec<usize> = if users.is_empty() {
        (0..h.users()).collect()
    } else {
        users.to_vec()
    };
    let sub = rows_of(&h.h, &idx);
    let rank = numerical_rank(&sub);
    let s = singular_values(&sub);
    let full = idx.len().min(sub.ncols());
    let rank_deficient = rank < idx.len();
    let condition_number = if rank < full || s.is_empty() {
        f64::INFINITY
    } else {
        s[0] / s[full - 1]
    };
    let min_row_norm = (0..sub.nrows())
        .map(|i| sub.row(i).norm())
        .fold(f64::INFINITY, f64::min);
    ConditionReport {
        rank,
        condition_number,
        min_row_norm,
        rank_deficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_scene, SceneConfig};
    use crate::optics::lambertian_order;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lambertian() -> GainModel {
        GainModel::Lambertian {
            order: lambertian_order(15.0).unwrap(),
        }
    }

    fn scene() -> Scene {
        default_scene(&SceneConfig::default()).unwrap()
    }

    fn random_users(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), 0.85))
            .collect()
    }

    #[test]
    fn overhead_user_sees_nothing_from_vertical_element() {
        let s = scene();
        for model in [lambertian(), GainModel::GaussianBeam] {
            for (u, unit) in s.units.iter().enumerate() {
                let user = Vec3::new(unit.center.x, unit.center.y, 0.85);
                let g = build_branch_gains(&s, &[user], &model).unwrap();
                let vertical = u * 10;
                for b in 0..4 {
                    assert_eq!(g.get(0, b, vertical), 0.0);
                }
            }
        }
    }

    #[test]
    fn shape_contract() {
        let g = build_branch_gains(&scene(), &[Vec3::new(2.5, 2.5, 0.85)], &lambertian()).unwrap();
        assert_eq!(g.shape(), (1, 4, 40));
    }

    #[test]
    fn user_outside_room_rejected() {
        let r = build_branch_gains(&scene(), &[Vec3::new(6.0, 2.5, 0.85)], &lambertian());
        assert!(matches!(r, Err(Error::Validation { .. })));
        let r = build_branch_gains(&scene(), &[Vec3::new(2.0, 2.5, 1.0)], &lambertian());
        assert!(r.is_err());
    }

    fn synthetic(rows: &[[f64; 3]]) -> BranchGains {
        BranchGains::from_raw(1, rows.len(), vec![1.0; 3], rows.concat(), 0.5, lambertian()).unwrap()
    }

    #[test]
    fn selection_examples() {
        let single = synthetic(&[[0.0; 3], [0.0, 2.0, 0.0], [0.0; 3], [0.0; 3]]);
        let h = select_branch(&single, BranchPolicy::MaxSumPower);
        assert_eq!(h.selected_branch, vec![Some(1)]);
        assert_eq!(h.h.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0]);

        let tie = synthetic(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]]);
        assert_eq!(select_branch(&tie, BranchPolicy::MaxSumPower).selected_branch, vec![Some(0)]);
        assert_eq!(select_branch(&tie, BranchPolicy::MaxMinGain).selected_branch, vec![Some(0)]);

        let dark = synthetic(&[[0.0; 3]; 4]);
        let h = select_branch(&dark, BranchPolicy::MaxSumPower);
        assert_eq!(h.selected_branch, vec![None]);
        assert!(!h.is_served(0));
        assert_eq!(h.h.sum(), 0.0);
    }

    #[test]
    fn max_min_policy_prefers_uniform_branch() {
        let g = synthetic(&[[3.0, 0.1, 0.0], [1.0, 1.0, 1.0], [0.0; 3], [0.0; 3]]);
        assert_eq!(select_branch(&g, BranchPolicy::MaxSumPower).selected_branch, vec![Some(0)]);
        assert_eq!(select_branch(&g, BranchPolicy::MaxMinGain).selected_branch, vec![Some(1)]);
    }

    #[test]
    fn corner_user_looks_inward() {
        let s = scene();
        let center = Vec3::new(2.5, 2.5, 0.85);
        for (x, y) in [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0), (5.0, 5.0)] {
            // The exact corner sees no unit inside any branch field of view.
            let exact = Vec3::new(x, y, 0.85);
            let h = build_channel(&s, &[exact], &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            assert!(!h.is_served(0));

            let corner = Vec3::new(0.5 + 0.8 * x, 0.5 + 0.8 * y, 0.85);
            let h = build_channel(&s, &[corner], &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            let b = h.selected_branch[0].expect("corner user is served");
            let n = s.adr.branches[b].normal();
            let inward = center - corner;
            assert!(n.x * inward.x + n.y * inward.y > 0.0, "corner {corner:?} picked branch {b}");
        }
    }

    #[test]
    fn batched_entries_match_scalar_rebuild() {
        let s = scene();
        let users = random_users(6, 3);
        for model in [lambertian(), GainModel::GaussianBeam] {
            let h = build_channel(&s, &users, &model, BranchPolicy::MaxSumPower).unwrap();
            for k in 0..users.len() {
                let Some(b) = h.selected_branch[k] else { continue };
                for n in 0..h.elements() {
                    let expect = channel_entry(&s, &users, &model, k, b, n).unwrap();
                    let got = h.h[(k, n)];
                    assert!((got - expect).abs() <= 1e-12 * expect.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }

    #[test]
    fn selected_branch_dominates_every_other() {
        let s = scene();
        let users = random_users(30, 11);
        let g = build_branch_gains(&s, &users, &lambertian()).unwrap();
        let h = select_branch(&g, BranchPolicy::MaxSumPower);
        for k in 0..users.len() {
            if let Some(b) = h.selected_branch[k] {
                let best = branch_score(g.row(k, b), BranchPolicy::MaxSumPower);
                for other in 0..4 {
                    assert!(best >= branch_score(g.row(k, other), BranchPolicy::MaxSumPower));
                }
            }
        }
    }

    #[test]
    fn condition_examples() {
        let orth = ChannelMatrix {
            h: DMatrix::from_row_slice(2, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0]),
            selected_branch: vec![Some(0); 2],
            model: lambertian(),
        };
        let r = condition_report(&orth, &[]);
        assert_eq!(r.rank, 2);
        assert!((r.condition_number - 1.0).abs() < 1e-12);
        assert!((r.min_row_norm - 2.0).abs() < 1e-12);

        let s = scene();
        let p = Vec3::new(1.0, 2.0, 0.85);
        let h = build_channel(&s, &[p, p, Vec3::new(4.0, 4.0, 0.85)], &lambertian(), BranchPolicy::MaxSumPower)
            .unwrap();
        let r = condition_report(&h, &[0, 1, 2]);
        assert!(r.rank_deficient);
        assert!(r.condition_number.is_infinite());
    }

    #[test]
    fn ten_random_users_have_full_row_rank() {
        let s = scene();
        let mut full = 0;
        for seed in 0..20 {
            let h = build_channel(&s, &random_users(10, 100 + seed), &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            let served = (0..10).filter(|k| h.is_served(*k)).count();
            assert_eq!(condition_report(&h, &[]).rank, served, "seed {seed}");
            full += usize::from(served == 10);
        }
        assert!(full >= 15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn nonnegative_and_linear_in_power(seed in 0u64..1000, scale in 0.1f64..10.0) {
            let users = random_users(5, seed);
            let base_cfg = SceneConfig::default();
            let scaled_cfg = SceneConfig { optical_power_w: base_cfg.optical_power_w * scale, ..base_cfg.clone() };
            let h = build_channel(&default_scene(&base_cfg).unwrap(), &users, &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            let hs = build_channel(&default_scene(&scaled_cfg).unwrap(), &users, &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            prop_assert!(h.h.iter().all(|v| *v >= 0.0));
            prop_assert!((hs.h.clone() - h.h.clone() * scale).abs().max() <= 1e-12 * hs.h.abs().max());
        }

        #[test]
        fn selection_is_permutation_equivariant(seed in 0u64..1000, shift in 1usize..5) {
            let users = random_users(5, seed);
            let mut rotated = users.clone();
            rotated.rotate_left(shift);
            let s = scene();
            let h = build_channel(&s, &users, &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            let hr = build_channel(&s, &rotated, &lambertian(), BranchPolicy::MaxSumPower).unwrap();
            for k in 0..5 {
                let src = (k + shift) % 5;
                prop_assert_eq!(hr.selected_branch[k], h.selected_branch[src]);
                prop_assert_eq!(hr.h.row(k), h.h.row(src));
            }
        }
    }
}
