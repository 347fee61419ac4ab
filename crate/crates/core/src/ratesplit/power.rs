use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_fraction(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("{v} must lie in (0, 1]")))
    }
}

fn check_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("power.total", format!("{p} must be > 0")))
    }
}

/// RS power split: a fraction `t` of `P` goes to the K private messages in
/// equal parts, the rest to the common message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsPowerSplit {
    pub total_p: f64,
    pub t: f64,
    pub users: usize,
    pub p_common: f64,
    pub p_private_each: f64,
}

impl RsPowerSplit {
    pub fn new(total_p: f64, t: f64, users: usize) -> Result<Self> {
        check_power(total_p)?;
        check_fraction("rs.t", t)?;
        if users == 0 {
            return Err(Error::validation("scenario.users", "at least one user required"));
        }
        Ok(RsPowerSplit {
            total_p,
            t,
            users,
            p_common: total_p * (1.0 - t),
            p_private_each: total_p * t / users as f64,
        })
    }

    pub fn total(&self) -> f64 {
        self.p_common + self.users as f64 * self.p_private_each
    }
}

/// HRS power split: `1 - beta` of `P` feeds the outer common message; the
/// remaining `beta P` is shared by G inner common messages (fraction
/// `1 - alpha`) and K private messages (fraction `alpha`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrsPowerSplit {
    pub total_p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub users: usize,
    pub groups: usize,
    pub p_outer_common: f64,
    pub p_inner_common_each: f64,
    pub p_private_each: f64,
}

impl HrsPowerSplit {
    pub fn new(total_p: f64, alpha: f64, beta: f64, users: usize, groups: usize) -> Result<Self> {
        check_power(total_p)?;
        check_fraction("hrs.alpha", alpha)?;
        check_fraction("hrs.beta", beta)?;
        if groups == 0 || groups > users {
            return Err(Error::validation(
                "hrs.groups",
                format!("{groups} must lie in [1, {users}]"),
            ));
        }
        Ok(HrsPowerSplit {
            total_p,
            alpha,
            beta,
            users,
            groups,
            p_outer_common: total_p * (1.0 - beta),
            p_inner_common_each: total_p * beta / groups as f64 * (1.0 - alpha),
            p_private_each: total_p * beta / users as f64 * alpha,
        })
    }

    pub fn total(&self) -> f64 {
        self.p_outer_common
            + self.groups as f64 * self.p_inner_common_each
            + self.users as f64 * self.p_private_each
    }
}
