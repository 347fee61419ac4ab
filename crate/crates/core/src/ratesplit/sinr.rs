use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::precoding::{HrsPrecoders, RsPrecoders};

use super::{Grouping, HrsPowerSplit, RsPowerSplit};

/// Received power of each stream class at one user, plus its noise variance.
///
/// For RS, `common` is the common message and the inner-common fields are zero.
/// For HRS, `common` is the outer common message.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamPowers {
    pub common: f64,
    pub own_inner: f64,
    pub other_inner: f64,
    pub own_private: f64,
    pub other_private: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsSinrs {
    pub common: Vec<f64>,
    pub private: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrsSinrs {
    pub outer_common: Vec<f64>,
    pub inner_common: Vec<f64>,
    pub private: Vec<f64>,
}

pub(crate) fn ratio(signal: f64, interference_plus_noise: f64) -> f64 {
    if signal == 0.0 {
        0.0
    } else {
        signal / interference_plus_noise
    }
}

/// Received power at `user` from every stream in `gains` except column `own`.
fn others_power(gains: &DMatrix<f64>, user: usize, own: usize, power: f64) -> f64 {
    gains
        .row(user)
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != own)
        .map(|(_, g)| power * g * g)
        .sum()
}

fn check_noise(sigma2: &[f64], users: usize) -> Result<()> {
    if sigma2.len() != users {
        return Err(Error::validation(
            "noise",
            format!("{} noise variances for {users} users", sigma2.len()),
        ));
    }
    if sigma2.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::validation("noise", "variances must be nonnegative"));
    }
    Ok(())
}

pub fn rs_stream_powers(
    h: &DMatrix<f64>,
    precoders: &RsPrecoders,
    split: &RsPowerSplit,
    sigma2: &[f64],
) -> Result<Vec<StreamPowers>> {
    let k = h.nrows();
    check_noise(sigma2, k)?;
    if precoders.private.shape() != (h.ncols(), k) || precoders.common.len() != h.ncols() {
        return Err(Error::validation("precoders", "dimensions do not match the channel"));
    }
    let private_gain = h * &precoders.private;
    let common_gain = h * &precoders.common;
    Ok((0..k)
        .map(|u| {
            let own = split.p_private_each * private_gain[(u, u)].powi(2);
            StreamPowers {
                common: split.p_common * common_gain[u].powi(2),
                own_private: own,
                other_private: others_power(&private_gain, u, u, split.p_private_each),
                noise: sigma2[u],
                ..StreamPowers::default()
            }
        })
        .collect())
}

/// Common and private SINRs of every RS user.
///
/// The common-message denominator counts every private stream, the user's
/// own included, since the common message is decoded first.
pub fn rs_sinrs(
    h: &DMatrix<f64>,
    precoders: &RsPrecoders,
    split: &RsPowerSplit,
    sigma2: &[f64],
) -> Result<RsSinrs> {
    let powers = rs_stream_powers(h, precoders, split, sigma2)?;
    Ok(RsSinrs {
        common: powers
            .iter()
            .map(|p| ratio(p.common, p.own_private + p.other_private + p.noise))
            .collect(),
        private: powers
            .iter()
            .map(|p| ratio(p.own_private, p.other_private + p.noise))
            .collect(),
    })
}

/// Transmit-space directions of all HRS streams: private streams in user
/// order, then one inner common per group.
fn hrs_stream_vectors(precoders: &HrsPrecoders, grouping: &Grouping, n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = grouping.user_count();
    let g = grouping.group_count();
    if precoders.outer.len() != g || precoders.inner.len() != g || precoders.inner_common.len() != g {
        return Err(Error::validation("precoders", "group count does not match the grouping"));
    }
    let mut private = DMatrix::zeros(n, k);
    let mut inner_common = DMatrix::zeros(n, g);
    for grp in 0..g {
        let b = &precoders.outer[grp];
        let members = grouping.members(grp);
        if b.nrows() != n || precoders.inner[grp].shape() != (b.ncols(), members.len()) {
            return Err(Error::validation("precoders", format!("group {grp} has inconsistent dimensions")));
        }
        let w = b * &precoders.inner[grp];
        for (j, &user) in members.iter().enumerate() {
            private.set_column(user, &w.column(j));
        }
        let c: DVector<f64> = b * &precoders.inner_common[grp];
        inner_common.set_column(grp, &c);
    }
    Ok((private, inner_common))
}

pub fn hrs_stream_powers(
    h: &DMatrix<f64>,
    precoders: &HrsPrecoders,
    split: &HrsPowerSplit,
    grouping: &Grouping,
    sigma2: &[f64],
) -> Result<Vec<StreamPowers>> {
    let k = h.nrows();
    check_noise(sigma2, k)?;
    if grouping.user_count() != k || precoders.outer_common.len() != h.ncols() {
        return Err(Error::validation("grouping", "dimensions do not match the channel"));
    }
    let (private, inner_common) = hrs_stream_vectors(precoders, grouping, h.ncols())?;
    let private_gain = h * private;
    let inner_gain = h * inner_common;
    let outer_gain = h * &precoders.outer_common;
    Ok((0..k)
        .map(|u| {
            let g = grouping.group_of(u);
            let own_private = split.p_private_each * private_gain[(u, u)].powi(2);
            let own_inner = split.p_inner_common_each * inner_gain[(u, g)].powi(2);
            StreamPowers {
                common: split.p_outer_common * outer_gain[u].powi(2),
                own_inner,
                other_inner: others_power(&inner_gain, u, g, split.p_inner_common_each),
                own_private,
                other_private: others_power(&private_gain, u, u, split.p_private_each),
                noise: sigma2[u],
            }
        })
        .collect())
}

/// Outer-common, inner-common and private SINRs of every HRS user.
pub fn hrs_sinrs(
    h: &DMatrix<f64>,
    precoders: &HrsPrecoders,
    split: &HrsPowerSplit,
    grouping: &Grouping,
    sigma2: &[f64],
) -> Result<HrsSinrs> {
    let powers = hrs_stream_powers(h, precoders, split, grouping, sigma2)?;
    Ok(HrsSinrs {
        outer_common: powers
            .iter()
            .map(|p| {
                ratio(
                    p.common,
                    p.own_private + p.other_private + p.own_inner + p.other_inner + p.noise,
                )
            })
            .collect(),
        inner_common: powers
            .iter()
            .map(|p| ratio(p.own_inner, p.own_private + p.other_private + p.other_inner + p.noise))
            .collect(),
        private: powers
            .iter()
            .map(|p| ratio(p.own_private, p.other_private + p.other_inner + p.noise))
            .collect(),
    })
}
