//! Single collision-domain medium with EDCA contention.
//!
//! Backoff counts down on a slot grid anchored at `busy_until + AIFS`. A
//! contender that arrives while the medium is idle aligns to the next grid
//! point at least one AIFS after its arrival. Contenders whose counters
//! reach zero on the same grid point transmit together and collide. There
//! is no capture effect and no channel error: a transmission fails only if
//! another one starts at the same instant.
//!
//! SIFS-chained exchanges (data/ack, the UL OFDMA sequence) reserve the
//! medium so that no grant can fire between their frames.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{ChannelError, ConfigError};
use crate::kernel::{EventHandle, Nanos, NodeId, Scheduler, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdcaParams {
    pub aifsn: u8,
    pub cw_min: u16,
    pub cw_max: u16,
    pub retry_limit: u8,
}

impl EdcaParams {
    /// AC_VO defaults.
    pub const VO: EdcaParams = EdcaParams {
        aifsn: 2,
        cw_min: 3,
        cw_max: 7,
        retry_limit: 7,
    };

    pub fn validate(&self) -> Result<(), ConfigError> {
        let is_window = |cw: u16| (cw as u32 + 1).is_power_of_two();
        if self.aifsn < 2 {
            return Err(ConfigError::InvalidEdca("aifsn must be at least 2"));
        }
        if !is_window(self.cw_min) || !is_window(self.cw_max) {
            return Err(ConfigError::InvalidEdca("contention windows must be 2^k - 1"));
        }
        if self.cw_min > self.cw_max {
            return Err(ConfigError::InvalidEdca("cw_min exceeds cw_max"));
        }
        Ok(())
    }

    pub fn aifs(&self, sifs: Nanos, slot: Nanos) -> Nanos {
        sifs + self.aifsn as Nanos * slot
    }

    pub fn next_cw(&self, cw: u16) -> u16 {
        (cw.saturating_mul(2).saturating_add(1)).min(self.cw_max)
    }
}

impl Default for EdcaParams {
    fn default() -> Self {
        EdcaParams::VO
    }
}

/// Per-node contention window and retry counter for the head-of-line frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackoffState {
    pub cw: u16,
    pub retries: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransmissionResult {
    Success,
    Collision,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetryOutcome {
    Retry,
    Drop,
}

#[derive(Clone, Copy, Debug)]
struct Contender {
    params: EdcaParams,
    remaining: u32,
    ready_at: SimTime,
}

#[derive(Clone, Debug)]
pub struct Medium {
    sifs: Nanos,
    slot: Nanos,
    busy_until: SimTime,
    reserved: bool,
    contenders: BTreeMap<NodeId, Contender>,
    backoff: BTreeMap<NodeId, BackoffState>,
}

impl Medium {
    pub fn new(sifs: Nanos, slot: Nanos) -> Self {
        Medium {
            sifs,
            slot,
            busy_until: SimTime::ZERO,
            reserved: false,
            contenders: BTreeMap::new(),
            backoff: BTreeMap::new(),
        }
    }

    pub fn sifs(&self) -> Nanos {
        self.sifs
    }

    pub fn slot(&self) -> Nanos {
        self.slot
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn is_reserved(&self) -> bool {
        self.reserved
    }

    pub fn is_idle_at(&self, t: SimTime) -> bool {
        !self.reserved && t >= self.busy_until
    }

    pub fn is_contending(&self, node: NodeId) -> bool {
        self.contenders.contains_key(&node)
    }

    pub fn contenders(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.contenders.keys().copied()
    }

    pub fn backoff_state(&self, node: NodeId) -> Option<BackoffState> {
        self.backoff.get(&node).copied()
    }

    /// Remaining backoff slots of a contending node.
    pub fn remaining_slots(&self, node: NodeId) -> Option<u32> {
        self.contenders.get(&node).map(|c| c.remaining)
    }

    /// Enters `node` into contention, drawing its backoff uniformly from
    /// `[0, cw]`. Returns the drawn slot count.
    pub fn request_access<R: Rng + ?Sized>(
        &mut self,
        node: NodeId,
        params: EdcaParams,
        ready_at: SimTime,
        rng: &mut R,
    ) -> Result<u32, ChannelError> {
        if self.is_contending(node) {
            return Err(ChannelError::DuplicateRequest(node));
        }
        let cw = self.backoff_entry(node, params).cw;
        let slots = rng.random_range(0..=cw as u32);
        self.request_with_backoff(node, params, ready_at, slots)?;
        Ok(slots)
    }

    /// Like [`Medium::request_access`] with a caller-chosen backoff.
    pub fn request_with_backoff(
        &mut self,
        node: NodeId,
        params: EdcaParams,
        ready_at: SimTime,
        slots: u32,
    ) -> Result<(), ChannelError> {
        if self.is_contending(node) {
            return Err(ChannelError::DuplicateRequest(node));
        }
        self.backoff_entry(node, params);
        self.contenders.insert(
            node,
            Contender {
                params,
                remaining: slots,
                ready_at,
            },
        );
        Ok(())
    }

    fn backoff_entry(&mut self, node: NodeId, params: EdcaParams) -> &mut BackoffState {
        self.backoff.entry(node).or_insert(BackoffState {
            cw: params.cw_min,
            retries: 0,
        })
    }

    /// Removes `node` from contention. Its backoff state is kept.
    pub fn withdraw(&mut self, node: NodeId) -> bool {
        self.contenders.remove(&node).is_some()
    }

    fn countdown_base(&self, c: &Contender) -> SimTime {
        let anchor = self.busy_until + c.params.aifs(self.sifs, self.slot);
        if c.ready_at <= self.busy_until {
            anchor
        } else {
            let late = c.ready_at - self.busy_until;
            anchor + late.div_ceil(self.slot) * self.slot
        }
    }

    fn grant_of(&self, c: &Contender) -> SimTime {
        self.countdown_base(c) + c.remaining as Nanos * self.slot
    }

    /// Time at which `node` would win the medium if nothing else happens.
    pub fn grant_time(&self, node: NodeId) -> Option<SimTime> {
        if self.reserved {
            return None;
        }
        self.contenders.get(&node).map(|c| self.grant_of(c))
    }

    /// Earliest pending grant, or `None` while reserved or without contenders.
    pub fn next_grant(&self) -> Option<SimTime> {
        if self.reserved {
            return None;
        }
        self.contenders.values().map(|c| self.grant_of(c)).min()
    }

    /// Nodes whose backoff expires exactly at `t`.
    pub fn winners_at(&self, t: SimTime) -> Vec<NodeId> {
        if self.reserved {
            return Vec::new();
        }
        self.contenders
            .iter()
            .filter(|(_, c)| self.grant_of(c) == t)
            .map(|(&n, _)| n)
            .collect()
    }

    /// A winner that gives up its grant without transmitting. The medium
    /// stays idle and the other counters keep running.
    pub fn release_grant(&mut self, node: NodeId) {
        self.contenders.remove(&node);
    }

    /// Starts the given simultaneous transmissions at `at`. Transmitters
    /// leave contention; everybody else freezes with the slots counted so
    /// far deducted.
    pub fn occupy(
        &mut self,
        at: SimTime,
        transmissions: &[(NodeId, Nanos)],
    ) -> Result<TransmissionResult, ChannelError> {
        let longest = transmissions
            .iter()
            .map(|&(_, d)| d)
            .max()
            .ok_or(ChannelError::NoParticipants)?;
        for (node, _) in transmissions {
            self.contenders.remove(node);
        }
        let slot = self.slot;
        let bases: Vec<(NodeId, SimTime)> = self
            .contenders
            .iter()
            .map(|(&n, c)| (n, self.countdown_base(c)))
            .collect();
        for (node, base) in bases {
            let c = self.contenders.get_mut(&node).expect("contender present");
            if at >= base {
                let elapsed = ((at - base) / slot) as u32;
                c.remaining -= elapsed.min(c.remaining);
            }
        }
        self.busy_until = self.busy_until.max(at + longest);
        Ok(if transmissions.len() == 1 {
            TransmissionResult::Success
        } else {
            TransmissionResult::Collision
        })
    }

    /// Holds the medium for a SIFS-chained exchange started by the last
    /// successful [`Medium::occupy`].
    pub fn reserve(&mut self) {
        self.reserved = true;
    }

    pub fn extend_busy(&mut self, until: SimTime) {
        self.busy_until = self.busy_until.max(until);
    }

    /// Ends the reservation; the medium is idle from `at`.
    pub fn end_reservation(&mut self, at: SimTime) {
        self.reserved = false;
        self.busy_until = self.busy_until.max(at);
    }

    /// Schedules the next frame of a reserved exchange one SIFS after
    /// `after`.
    pub fn schedule_response<E>(&self, sched: &mut Scheduler<E>, after: SimTime, action: E) -> EventHandle {
        debug_assert!(self.reserved, "SIFS response outside a reserved exchange");
        sched.schedule(after + self.sifs, action)
    }

    pub fn on_success(&mut self, node: NodeId, params: EdcaParams) {
        let b = self.backoff_entry(node, params);
        b.cw = params.cw_min;
        b.retries = 0;
    }

    /// Records a failed attempt. The contention window doubles up to
    /// `cw_max`; past the retry limit the frame is dropped and the state
    /// resets.
    pub fn on_failure(&mut self, node: NodeId, params: EdcaParams) -> RetryOutcome {
        let b = self.backoff_entry(node, params);
        b.retries += 1;
        if b.retries > params.retry_limit {
            b.cw = params.cw_min;
            b.retries = 0;
            RetryOutcome::Drop
        } else {
            b.cw = params.next_cw(b.cw);
            RetryOutcome::Retry
        }
    }
}
