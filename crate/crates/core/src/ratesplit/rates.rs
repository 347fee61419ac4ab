use serde::{Deserialize, Serialize};

use super::{Grouping, HrsSinrs, RsSinrs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum Scheme {
    Rs,
    Hrs { groups: usize },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rs => "rs",
            Scheme::Hrs { .. } => "hrs",
        }
    }

    pub fn groups(&self) -> Option<usize> {
        match self {
            Scheme::Rs => None,
            Scheme::Hrs { groups } => Some(*groups),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Rs => write!(f, "RS"),
            Scheme::Hrs { groups } => write!(f, "HRS(G={groups})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamSinrs {
    Rs(RsSinrs),
    Hrs(HrsSinrs),
}

/// Which users must decode the common messages (and so enter their min).
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CommonMembership {
    #[default]
    AllUsers,
    /// Only users flagged `true`; the others get no common share.
    Only(Vec<bool>),
}

impl CommonMembership {
    fn includes(&self, user: usize) -> bool {
        match self {
            CommonMembership::AllUsers => true,
            CommonMembership::Only(mask) => mask[user],
        }
    }
}

/// Achievable rates of one transmission, as spectral efficiency and bit/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub scheme: Scheme,
    pub bandwidth_hz: f64,
    pub sinrs: StreamSinrs,
    /// Rate of the (outer) common message, bits/s/Hz.
    pub common_se: f64,
    /// Rate of each group's inner common message; empty for RS.
    pub inner_common_se: Vec<f64>,
    pub per_user_private_se: Vec<f64>,
    pub per_user_common_share_se: Vec<f64>,
    pub per_user_rate_bps: Vec<f64>,
    pub sum_se: f64,
    pub sum_rate_bps: f64,
}

impl RateReport {
    pub fn users(&self) -> usize {
        self.per_user_private_se.len()
    }

    pub fn private_sum_se(&self) -> f64 {
        self.per_user_private_se.iter().sum()
    }

    pub fn inner_common_sum_se(&self) -> f64 {
        self.inner_common_se.iter().sum()
    }

    pub fn mean_user_rate_bps(&self) -> f64 {
        self.sum_rate_bps / self.users() as f64
    }
}

fn se(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

fn min_over<'a>(values: impl Iterator<Item = &'a f64>) -> Option<f64> {
    values.copied().reduce(f64::min)
}

/// RS rates: the common message runs at the rate of its weakest decoder and
/// is shared equally among the users that decode it.
pub fn rs_rates(sinrs: &RsSinrs, bandwidth_hz: f64, membership: &CommonMembership) -> RateReport {
    let k = sinrs.private.len();
    let members: Vec<usize> = (0..k).filter(|u| membership.includes(*u)).collect();
    let common_se = min_over(members.iter().map(|u| &sinrs.common[*u])).map_or(0.0, se);
    let private: Vec<f64> = sinrs.private.iter().map(|g| se(*g)).collect();
    let share: Vec<f64> = (0..k)
        .map(|u| {
            if membership.includes(u) {
                common_se / members.len() as f64
            } else {
                0.0
            }
        })
        .collect();
    let sum_se = common_se + private.iter().sum::<f64>();
    RateReport {
        scheme: Scheme::Rs,
        bandwidth_hz,
        sinrs: StreamSinrs::Rs(sinrs.clone()),
        common_se,
        inner_common_se: Vec::new(),
        per_user_rate_bps: private.iter().zip(&share).map(|(p, c)| (p + c) * bandwidth_hz).collect(),
        per_user_private_se: private,
        per_user_common_share_se: share,
        sum_se,
        sum_rate_bps: sum_se * bandwidth_hz,
    }
}

/// HRS rates: the outer common message is limited by the weakest user
/// overall, each inner common message by the weakest user of its group.
pub fn hrs_rates(
    sinrs: &HrsSinrs,
    grouping: &Grouping,
    bandwidth_hz: f64,
    membership: &CommonMembership,
) -> RateReport {
    let k = sinrs.private.len();
    let members: Vec<usize> = (0..k).filter(|u| membership.includes(*u)).collect();
    let common_se = min_over(members.iter().map(|u| &sinrs.outer_common[*u])).map_or(0.0, se);
    let group_members: Vec<Vec<usize>> = (0..grouping.group_count())
        .map(|g| {
            grouping
                .members(g)
                .into_iter()
                .filter(|u| membership.includes(*u))
                .collect()
        })
        .collect();
    let inner_common_se: Vec<f64> = group_members
        .iter()
        .map(|m| min_over(m.iter().map(|u| &sinrs.inner_common[*u])).map_or(0.0, se))
        .collect();
    let private: Vec<f64> = sinrs.private.iter().map(|g| se(*g)).collect();
    let share: Vec<f64> = (0..k)
        .map(|u| {
            if !membership.includes(u) {
                return 0.0;
            }
            let g = grouping.group_of(u);
            common_se / members.len() as f64 + inner_common_se[g] / group_members[g].len() as f64
        })
        .collect();
    let sum_se = common_se + inner_common_se.iter().sum::<f64>() + private.iter().sum::<f64>();
    RateReport {
        scheme: Scheme::Hrs {
            groups: grouping.group_count(),
        },
        bandwidth_hz,
        sinrs: StreamSinrs::Hrs(sinrs.clone()),
        common_se,
        inner_common_se,
        per_user_rate_bps: private.iter().zip(&share).map(|(p, c)| (p + c) * bandwidth_hz).collect(),
        per_user_private_se: private,
        per_user_common_share_se: share,
        sum_se,
        sum_rate_bps: sum_se * bandwidth_hz,
    }
}
