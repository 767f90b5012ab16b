use crate::kernel::NodeId;

/// Invalid or infeasible simulation parameters, detected before a run starts.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unsupported bandwidth {0} MHz (expected 20, 40, 80 or 160)")]
    UnsupportedBandwidth(u32),
    #[error("unsupported RU size of {tones} tones for {bandwidth_mhz} MHz")]
    UnsupportedRu { tones: u16, bandwidth_mhz: u32 },
    #[error("MCS index {0} out of range 0..=11")]
    McsOutOfRange(u8),
    #[error("guard interval {0} ns not one of 800, 1600, 3200")]
    InvalidGuardInterval(u64),
    #[error("invalid EDCA parameters: {0}")]
    InvalidEdca(&'static str),
    #[error("invalid traffic parameters: {0}")]
    InvalidTraffic(&'static str),
    #[error("{initial} initial + {joining} joining stations exceed the {total} associated")]
    TopologyOverAllocation {
        initial: usize,
        joining: usize,
        total: usize,
    },
    #[error("UL OFDMA exchange of {needed_ns} ns does not fit the {txop_ns} ns TXOP")]
    TxopInfeasible { needed_ns: u64, txop_ns: u64 },
    #[error("invalid parameter: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChannelError {
    #[error("{0} is already contending for the medium")]
    DuplicateRequest(NodeId),
    #[error("transmission without participants")]
    NoParticipants,
}
