//! Q-MIA, QWMP, MUT, Mixed-MIA and DST.

mod auction;
mod dst;
mod scoring;
pub mod selection;
pub mod threshold;

use serde::{Deserialize, Serialize};

pub use auction::{
    agent_outcome, critical_payment, hybrid_payment, hybrid_utility, mixed_mia, mut_mechanism,
    mut_shares, qmia, rho_preference, score_participants, AgentOutcome, CriticalPayment,
    RhoPreference,
};
pub use dst::{allocate_tokens, dst_allocate, dst_scores, DstAllocation};
pub use scoring::{qwmp_payment, score_agent, score_denominator, virtual_cost};
pub use selection::{qmia_select, ranking};

use crate::error::{Error, Result};
use crate::model::{AuctionOutcome, MechanismConfig, Participant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Qmia,
    Mut,
    Mixed,
    Dst,
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qmia" => Ok(Mechanism::Qmia),
            "mut" => Ok(Mechanism::Mut),
            "mixed" => Ok(Mechanism::Mixed),
            "dst" => Ok(Mechanism::Dst),
            other => Err(Error::config(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// Runs one of the payment mechanisms. DST allocates tokens rather than
/// payments and goes through [`dst_allocate`] instead.
pub fn run_auction(mechanism: Mechanism, participants: &[Participant], cfg: &MechanismConfig) -> Result<AuctionOutcome> {
    match mechanism {
        Mechanism::Qmia => qmia(participants, cfg),
        Mechanism::Mut => mut_mechanism(participants, cfg),
        Mechanism::Mixed => mixed_mia(participants, cfg),
        Mechanism::Dst => Err(Error::config("dst is a token allocation, not an auction")),
    }
}
