//! RS and HRS power splits, SINRs, achievable rates and user grouping.

mod decode;
mod grouping;
mod power;
mod rates;
mod sinr;

pub use decode::{decode_plan, DecodePlan, DecodeStage, StreamClass};
pub use grouping::{group_users, Grouping};
pub use power::{HrsPowerSplit, RsPowerSplit};
pub use rates::{hrs_rates, rs_rates, CommonMembership, RateReport, Scheme, StreamSinrs};
pub use sinr::{hrs_sinrs, hrs_stream_powers, rs_sinrs, rs_stream_powers, HrsSinrs, RsSinrs, StreamPowers};
