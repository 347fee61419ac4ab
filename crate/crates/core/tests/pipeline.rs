use owc::channel::build_channel;
use owc::config::RunConfig;
use owc::geometry::default_scene;
use owc::precoding::{hrs_precoders, rs_precoders};
use owc::ratesplit::{
    decode_plan, group_users, hrs_sinrs, hrs_stream_powers, rs_sinrs, rs_stream_powers, HrsPowerSplit, RsPowerSplit,
    Scheme, StreamSinrs,
};
use owc::scenario::{place_users, trial_seed};

#[test]
fn decode_order_reproduces_sinrs_on_room_channels() {
    let c = RunConfig::default().scenario;
    let scene = default_scene(&c.scene).unwrap();
    for i in 0..20 {
        let seed = trial_seed(7, i);
        let users = place_users(&scene.room, c.users, &c.placement, seed).unwrap();
        let ch = build_channel(&scene, &users, &c.gain_model, c.branch_policy).unwrap();
        let sigma2: Vec<f64> = (0..c.users).map(|k| c.noise.variance_for(ch.photocurrent_a(k))).collect();

        let split = RsPowerSplit::new(c.total_power, c.t, c.users).unwrap();
        let p = rs_precoders(&ch.h, c.common_strategy).unwrap();
        let powers = rs_stream_powers(&ch.h, &p, &split, &sigma2).unwrap();
        let s = rs_sinrs(&ch.h, &p, &split, &sigma2).unwrap();
        decode_plan(Scheme::Rs).verify(&powers, &StreamSinrs::Rs(s)).unwrap();

        for groups in [2, 5] {
            let grouping = group_users(&users, groups, seed).unwrap();
            let split = HrsPowerSplit::new(c.total_power, c.alpha, c.beta, c.users, groups).unwrap();
            let p = hrs_precoders(&ch.h, &grouping, c.common_strategy).unwrap();
            let powers = hrs_stream_powers(&ch.h, &p, &split, &grouping, &sigma2).unwrap();
            let s = hrs_sinrs(&ch.h, &p, &split, &grouping, &sigma2).unwrap();
            decode_plan(Scheme::Hrs { groups }).verify(&powers, &StreamSinrs::Hrs(s)).unwrap();
        }
    }
}

#[test]
fn block_diagonal_outer_tier_removes_inter_group_leakage() {
    let c = RunConfig::default().scenario;
    let scene = default_scene(&c.scene).unwrap();
    let users = place_users(&scene.room, 10, &c.placement, trial_seed(11, 0)).unwrap();
    let ch = build_channel(&scene, &users, &c.gain_model, c.branch_policy).unwrap();
    let grouping = group_users(&users, 5, 11).unwrap();
    let p = hrs_precoders(&ch.h, &grouping, c.common_strategy).unwrap();
    for (g, b) in p.outer.iter().enumerate() {
        if p.regularized_outer.contains(&g) {
            continue;
        }
        for u in (0..10).filter(|&u| grouping.group_of(u) != g) {
            let leak = (ch.h.row(u) * b).norm();
            assert!(leak <= 1e-9 * ch.h.row(u).norm().max(f64::MIN_POSITIVE), "group {g} leaks {leak} into user {u}");
        }
    }
}
