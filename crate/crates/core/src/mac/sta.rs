//! STA side: EDCA is switched off for the MU-EDCA timer after an
//! acknowledged EDCA frame, the timer restarts with every block ack for
//! OFDMA data, and EDCA comes back when the timer runs out.

use alloc::collections::VecDeque;

use crate::kernel::{Nanos, SimTime};
use crate::traffic::PacketId;

#[derive(Clone, Debug)]
pub struct StaState {
    pub edca_enabled: bool,
    pub mu_edca_deadline: Option<SimTime>,
    pub queue: VecDeque<PacketId>,
    pub stream_on: bool,
}

impl Default for StaState {
    fn default() -> Self {
        StaState {
            edca_enabled: true,
            mu_edca_deadline: None,
            queue: VecDeque::new(),
            stream_on: false,
        }
    }
}

impl StaState {
    pub fn new() -> Self {
        StaState::default()
    }

    /// EDCA enabled and something to send.
    pub fn wants_contention(&self) -> bool {
        self.edca_enabled && !self.queue.is_empty()
    }

    fn disable_until(&mut self, deadline: SimTime) -> SimTime {
        self.edca_enabled = false;
        self.mu_edca_deadline = Some(deadline);
        deadline
    }

    /// Ack received for an EDCA data frame. Returns the new timer deadline
    /// if the scheme hands out an MU-EDCA timer.
    pub fn on_ack(&mut self, now: SimTime, timer: Option<Nanos>) -> Option<SimTime> {
        timer.map(|y| self.disable_until(now + y))
    }

    /// Block ack received for data sent in a TB PPDU.
    pub fn on_ofdma_success(&mut self, now: SimTime, timer: Option<Nanos>) -> Option<SimTime> {
        timer.map(|y| self.disable_until(now + y))
    }

    /// MU-EDCA timer fired. Returns `true` if the station should contend
    /// right away.
    pub fn on_timer_expired(&mut self, now: SimTime) -> bool {
        debug_assert_eq!(self.mu_edca_deadline, Some(now));
        self.edca_enabled = true;
        self.mu_edca_deadline = None;
        !self.queue.is_empty()
    }

    /// `edca_enabled` is false exactly while a deadline in the future is set.
    pub fn is_consistent_at(&self, now: SimTime) -> bool {
        match self.mu_edca_deadline {
            Some(d) => !self.edca_enabled && d >= now,
            None => self.edca_enabled,
        }
    }
}
