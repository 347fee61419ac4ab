use crate::error::{Error, Result};

use super::sinr::ratio;
use super::{Scheme, StreamPowers, StreamSinrs};

/// Stream classes as seen from one receiving user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamClass {
    /// The RS common message or the HRS outer common message.
    Common,
    OwnInnerCommon,
    OtherInnerCommons,
    OwnPrivate,
    OtherPrivates,
}

impl StreamClass {
    fn power(self, p: &StreamPowers) -> f64 {
        match self {
            StreamClass::Common => p.common,
            StreamClass::OwnInnerCommon => p.own_inner,
            StreamClass::OtherInnerCommons => p.other_inner,
            StreamClass::OwnPrivate => p.own_private,
            StreamClass::OtherPrivates => p.other_private,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeStage {
    pub decodes: StreamClass,
    pub noise: Vec<StreamClass>,
}

/// Successive interference cancellation order at each user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodePlan {
    pub scheme: Scheme,
    pub stages: Vec<DecodeStage>,
}

pub fn decode_plan(scheme: Scheme) -> DecodePlan {
    use StreamClass::*;
    let stages = match scheme {
        Scheme::Rs => vec![
            DecodeStage {
                decodes: Common,
                noise: vec![OwnPrivate, OtherPrivates],
            },
            DecodeStage {
                decodes: OwnPrivate,
                noise: vec![OtherPrivates],
            },
        ],
        Scheme::Hrs { .. } => vec![
            DecodeStage {
                decodes: Common,
                noise: vec![OwnInnerCommon, OtherInnerCommons, OwnPrivate, OtherPrivates],
            },
            DecodeStage {
                decodes: OwnInnerCommon,
                noise: vec![OtherInnerCommons, OwnPrivate, OtherPrivates],
            },
            DecodeStage {
                decodes: OwnPrivate,
                noise: vec![OtherInnerCommons, OtherPrivates],
            },
        ],
    };
    DecodePlan { scheme, stages }
}

impl DecodePlan {
    /// Per-user SINR of every stage, computed from the stage's noise set.
    pub fn stage_sinrs(&self, powers: &[StreamPowers]) -> Vec<Vec<f64>> {
        self.stages
            .iter()
            .map(|stage| {
                powers
                    .iter()
                    .map(|p| {
                        let den: f64 = stage.noise.iter().map(|c| c.power(p)).sum::<f64>() + p.noise;
                        ratio(stage.decodes.power(p), den)
                    })
                    .collect()
            })
            .collect()
    }

    /// Checks that `sinrs` agree with the SINRs implied by this plan.
    pub fn verify(&self, powers: &[StreamPowers], sinrs: &StreamSinrs) -> Result<()> {
        let reported: Vec<&[f64]> = match (self.scheme, sinrs) {
            (Scheme::Rs, StreamSinrs::Rs(s)) => vec![&s.common, &s.private],
            (Scheme::Hrs { .. }, StreamSinrs::Hrs(s)) => vec![&s.outer_common, &s.inner_common, &s.private],
            _ => return Err(Error::DecodePlan("scheme does not match the SINR report".into())),
        };
        for (stage, (expected, got)) in self.stage_sinrs(powers).iter().zip(reported).enumerate() {
            if expected.len() != got.len() {
                return Err(Error::DecodePlan(format!("stage {stage}: user count mismatch")));
            }
            for (user, (e, g)) in expected.iter().zip(got).enumerate() {
                if (e - g).abs() > 1e-12 * e.abs().max(g.abs()) {
                    return Err(Error::DecodePlan(format!(
                        "stage {stage}, user {user}: expected SINR {e}, got {g}"
                    )));
                }
            }
        }
        Ok(())
    }
}
