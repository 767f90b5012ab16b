//! Channel-access schemes and the AP/STA state machines.
//!
//! * [`ap`]: polling list, round-robin selection, ARI gating, the UL/DL
//!   alternation decision and polling-list maintenance.
//! * [`sta`]: EDCA enable/disable driven by the MU-EDCA timer.
//! * [`exchange`]: timing of the BSRP / BSR / TF / data / Multi-STA BA
//!   sequence and the per-station aggregation budget.

pub mod ap;
pub mod exchange;
pub mod sta;

use core::fmt;
use core::str::FromStr;

use crate::kernel::{Nanos, NS_PER_US};

/// One time unit, 1024 us.
pub const TU_NS: Nanos = 1024 * NS_PER_US;

/// Converts a count of time units to nanoseconds.
pub const fn tu(count: u64) -> Nanos {
    count * TU_NS
}

/// Largest MU-EDCA timer the standard allows: 255 units of 8 TU.
pub const MAX_MU_EDCA_TIMER: Nanos = 255 * 8 * TU_NS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    A2p,
    EdcaOnly,
    OfdmaOnly,
    OfdmaPlusEdca,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::A2p, Scheme::EdcaOnly, Scheme::OfdmaOnly, Scheme::OfdmaPlusEdca];

    /// Short name used on the command line and in CSV files.
    pub fn name(self) -> &'static str {
        match self {
            Scheme::A2p => "a2p",
            Scheme::EdcaOnly => "edca",
            Scheme::OfdmaOnly => "ofdma",
            Scheme::OfdmaPlusEdca => "ofdma-edca",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Scheme::ALL.into_iter().find(|sc| sc.name() == s).ok_or(())
    }
}

/// How the polling list is populated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PollingMode {
    /// No trigger frames at all.
    None,
    /// Stations join after an acknowledged EDCA frame and age out.
    Dynamic,
    /// Every associated station, permanently.
    StaticAll,
}

/// Behaviour table derived from a [`Scheme`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeBehavior {
    pub polling: PollingMode,
    /// MU-EDCA timer pushed to stations after an ack or block ack. `None`
    /// means stations keep EDCA enabled throughout.
    pub mu_edca_timer: Option<Nanos>,
    /// Whether the AP contends every ARI even without downlink traffic.
    pub ari_gating: bool,
}

impl SchemeBehavior {
    pub fn sends_triggers(&self) -> bool {
        self.polling != PollingMode::None
    }
}

/// Behaviour of `scheme`, with `a2p_timer` the MU-EDCA timer A2P uses.
pub fn configure_scheme(scheme: Scheme, a2p_timer: Nanos, ofdma_timer: Nanos) -> SchemeBehavior {
    match scheme {
        Scheme::A2p => SchemeBehavior {
            polling: PollingMode::Dynamic,
            mu_edca_timer: Some(a2p_timer),
            ari_gating: true,
        },
        Scheme::EdcaOnly => SchemeBehavior {
            polling: PollingMode::None,
            mu_edca_timer: None,
            ari_gating: false,
        },
        Scheme::OfdmaOnly => SchemeBehavior {
            polling: PollingMode::StaticAll,
            mu_edca_timer: Some(ofdma_timer),
            ari_gating: true,
        },
        Scheme::OfdmaPlusEdca => SchemeBehavior {
            polling: PollingMode::StaticAll,
            mu_edca_timer: None,
            ari_gating: true,
        },
    }
}
