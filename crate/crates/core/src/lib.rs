//! Discrete-event MAC-level simulator for a single dense 802.11ax BSS.
//!
//! The crate models uplink OFDMA with buffer-status polling driven by the
//! A2P polling-list algorithm, together with three baselines (EDCA only,
//! OFDMA poll-all with MU-EDCA, OFDMA poll-all alongside EDCA). The workload
//! is a teleconferencing system: windowed on-off CBR audio uplink per
//! station, server-side mixing and a broadcast downlink per window.
//!
//! Everything here is `no_std` + `alloc`; configuration files, CSV output and
//! the command line live in the `a2p-sim` crate.
//!
//! Module map:
//!
//! * [`kernel`]: integer-nanosecond clock, ordered event queue, seeded streams.
//! * [`phy`]: RU counts, per-RU rates and frame airtimes.
//! * [`channel`]: single collision domain with EDCA backoff.
//! * [`mac`]: AP and STA state machines, polling list, UL OFDMA exchange.
//! * [`traffic`]: audio workload, on-off schedules, delay-budget classification.
//! * [`metrics`]: packet ledger, E2E/loss/wake-up metrics and box statistics.
//! * [`sim`]: the simulation world tying the modules together.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod channel;
pub mod error;
pub mod kernel;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod sim;
pub mod trace;
pub mod traffic;

pub use error::{ChannelError, ConfigError};
pub use kernel::{EventHandle, Nanos, NodeId, RngStream, Scheduler, SimTime, StreamId};
pub use mac::Scheme;
pub use metrics::{BoxStats, RunSummary};
pub use sim::{run, RunOutput, SimConfig};
