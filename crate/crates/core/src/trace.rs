//! Event trace of a run, used by conformance tests and the `trace.log`
//! writer.

use alloc::vec::Vec;
use core::fmt;

use crate::kernel::{Nanos, NodeId, SimTime};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceLevel {
    #[default]
    Off,
    /// Keep the per-packet ledger in the output.
    Packets,
    /// Also record every MAC event.
    Events,
}

impl TraceLevel {
    pub fn from_level(n: u8) -> Self {
        match n {
            0 => TraceLevel::Off,
            1 => TraceLevel::Packets,
            _ => TraceLevel::Events,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    PacketGenerated {
        sta: NodeId,
        window: u32,
    },
    ContentionStart {
        node: NodeId,
    },
    ContentionWithdraw {
        node: NodeId,
    },
    /// The medium was granted to `nodes`; more than one means a collision.
    Grant {
        nodes: Vec<NodeId>,
    },
    Collision {
        nodes: Vec<NodeId>,
    },
    EdcaData {
        sta: NodeId,
        window: u32,
    },
    Ack {
        sta: NodeId,
    },
    ApRelease,
    Broadcast {
        window: u32,
        duration: Nanos,
    },
    UlExchange {
        poll_set: Vec<NodeId>,
        bsr: Vec<u32>,
        duration: Nanos,
    },
    PollingListAdd {
        sta: NodeId,
    },
    PollingListReset {
        sta: NodeId,
    },
    PollingListRemove {
        sta: NodeId,
    },
    StaEdcaDisabled {
        sta: NodeId,
        until: SimTime,
    },
    StaTimerReset {
        sta: NodeId,
        until: SimTime,
    },
    StaEdcaEnabled {
        sta: NodeId,
    },
    PacketDropped {
        sta: NodeId,
        window: u32,
    },
    DlEnqueued {
        window: u32,
    },
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::PacketGenerated { .. } => "generate",
            TraceEvent::ContentionStart { .. } => "contend",
            TraceEvent::ContentionWithdraw { .. } => "withdraw",
            TraceEvent::Grant { .. } => "grant",
            TraceEvent::Collision { .. } => "collision",
            TraceEvent::EdcaData { .. } => "edca_data",
            TraceEvent::Ack { .. } => "ack",
            TraceEvent::ApRelease => "release",
            TraceEvent::Broadcast { .. } => "broadcast",
            TraceEvent::UlExchange { .. } => "ul_exchange",
            TraceEvent::PollingListAdd { .. } => "list_add",
            TraceEvent::PollingListReset { .. } => "list_reset",
            TraceEvent::PollingListRemove { .. } => "list_remove",
            TraceEvent::StaEdcaDisabled { .. } => "edca_disabled",
            TraceEvent::StaTimerReset { .. } => "timer_reset",
            TraceEvent::StaEdcaEnabled { .. } => "edca_enabled",
            TraceEvent::PacketDropped { .. } => "drop",
            TraceEvent::DlEnqueued { .. } => "dl_enqueue",
        }
    }

    /// The station or AP the event concerns.
    pub fn node(&self) -> NodeId {
        match self {
            TraceEvent::PacketGenerated { sta, .. }
            | TraceEvent::EdcaData { sta, .. }
            | TraceEvent::Ack { sta }
            | TraceEvent::PollingListAdd { sta }
            | TraceEvent::PollingListReset { sta }
            | TraceEvent::PollingListRemove { sta }
            | TraceEvent::StaEdcaDisabled { sta, .. }
            | TraceEvent::StaTimerReset { sta, .. }
            | TraceEvent::StaEdcaEnabled { sta }
            | TraceEvent::PacketDropped { sta, .. } => *sta,
            TraceEvent::ContentionStart { node } | TraceEvent::ContentionWithdraw { node } => *node,
            TraceEvent::Grant { nodes } | TraceEvent::Collision { nodes } => {
                nodes.first().copied().unwrap_or(NodeId::AP)
            }
            TraceEvent::ApRelease
            | TraceEvent::Broadcast { .. }
            | TraceEvent::UlExchange { .. }
            | TraceEvent::DlEnqueued { .. } => NodeId::AP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub event: TraceEvent,
}

struct Nodes<'a>(&'a [NodeId]);

impl fmt::Display for Nodes<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

/// One log line: `time_ns kind node [details]`.
impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.time.as_nanos(),
            self.event.kind(),
            self.event.node()
        )?;
        match &self.event {
            TraceEvent::PacketGenerated { window, .. }
            | TraceEvent::EdcaData { window, .. }
            | TraceEvent::PacketDropped { window, .. }
            | TraceEvent::DlEnqueued { window } => write!(f, " window={window}"),
            TraceEvent::Grant { nodes } | TraceEvent::Collision { nodes } => write!(f, " nodes={}", Nodes(nodes)),
            TraceEvent::Broadcast { window, duration } => write!(f, " window={window} duration={duration}"),
            TraceEvent::UlExchange {
                poll_set,
                bsr,
                duration,
            } => {
                write!(f, " poll={} bsr=", Nodes(poll_set))?;
                for (i, b) in bsr.iter().enumerate() {
                    write!(f, "{}{b}", if i > 0 { "," } else { "" })?;
                }
                write!(f, " duration={duration}")
            }
            TraceEvent::StaEdcaDisabled { until, .. } | TraceEvent::StaTimerReset { until, .. } => {
                write!(f, " until={}", until.as_nanos())
            }
            _ => Ok(()),
        }
    }
}
