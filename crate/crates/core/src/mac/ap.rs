//! AP side: polling list, round-robin poll selection, ARI gating and the
//! UL/DL decision taken each time the AP wins the medium.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::exchange::UlExchangeOutcome;
use super::PollingMode;
use crate::kernel::{Nanos, NodeId, SimTime};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PollingEntry {
    pub sta: NodeId,
    pub expiry: SimTime,
    pub last_reported_bytes: u32,
    /// Polls answered with an empty buffer since the last timer reset.
    pub empty_polls: u32,
}

/// When stations whose timer ran out leave the polling list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RemovalPolicy {
    /// Only once they answered a poll with an empty buffer after expiry.
    #[default]
    AfterPostExpiryPoll,
    /// As soon as a UL exchange completes after their expiry.
    OnExpiry,
}

/// Ordered polling list with a round-robin cursor.
#[derive(Clone, Debug, Default)]
pub struct PollingList {
    entries: Vec<PollingEntry>,
    cursor: usize,
}

impl PollingList {
    pub fn new() -> Self {
        PollingList::default()
    }

    /// A list holding all `n` stations forever.
    pub fn static_all(n: usize) -> Self {
        PollingList {
            entries: (0..n)
                .map(|i| PollingEntry {
                    sta: NodeId::sta(i),
                    expiry: SimTime::MAX,
                    last_reported_bytes: 0,
                    empty_polls: 0,
                })
                .collect(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn entries(&self) -> &[PollingEntry] {
        &self.entries
    }

    pub fn get(&self, sta: NodeId) -> Option<&PollingEntry> {
        self.entries.iter().find(|e| e.sta == sta)
    }

    pub fn contains(&self, sta: NodeId) -> bool {
        self.get(sta).is_some()
    }

    /// Adds `sta` with the given expiry, or resets the expiry of an existing
    /// entry. Returns `true` if the station was added.
    pub fn insert_or_reset(&mut self, sta: NodeId, expiry: SimTime) -> bool {
        if let Some(e) = self.entries.iter_mut().find(|e| e.sta == sta) {
            e.expiry = expiry;
            e.empty_polls = 0;
            false
        } else {
            self.entries.push(PollingEntry {
                sta,
                expiry,
                last_reported_bytes: 0,
                empty_polls: 0,
            });
            true
        }
    }

    pub fn remove(&mut self, sta: NodeId) -> bool {
        let Some(pos) = self.entries.iter().position(|e| e.sta == sta) else {
            return false;
        };
        self.entries.remove(pos);
        if pos < self.cursor {
            self.cursor -= 1;
        }
        if self.cursor >= self.entries.len() {
            self.cursor = 0;
        }
        true
    }

    /// Picks the next stations to poll and advances the cursor.
    pub fn select(&mut self, max_users: usize) -> Vec<NodeId> {
        let (picked, cursor) = select_poll_set(&self.entries, self.cursor, max_users);
        self.cursor = cursor;
        picked.into_iter().map(|e| e.sta).collect()
    }

    fn entry_mut(&mut self, sta: NodeId) -> Option<&mut PollingEntry> {
        self.entries.iter_mut().find(|e| e.sta == sta)
    }
}

/// Round-robin selection of up to `m` consecutive entries starting at
/// `cursor`. A round ends at the end of the list, so a list of `L` entries
/// is covered exactly once every `ceil(L / m)` selections. Returns the
/// selection and the new cursor.
pub fn select_poll_set<T: Copy>(list: &[T], cursor: usize, m: usize) -> (Vec<T>, usize) {
    assert!(m >= 1, "poll budget must be at least one RU");
    if list.is_empty() {
        return (Vec::new(), cursor);
    }
    let start = if cursor >= list.len() { 0 } else { cursor };
    let end = (start + m).min(list.len());
    let next = if end == list.len() { 0 } else { end };
    (list[start..end].to_vec(), next)
}

/// Whether the AP may contend for the medium: always with downlink traffic
/// queued, otherwise only once `ari` has passed since its last access.
pub fn ari_gate(last_access: SimTime, now: SimTime, dl_enqueued: bool, ari: Nanos) -> bool {
    dl_enqueued || now.since(last_access) >= ari
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExchangeKind {
    Ul,
    Dl,
}

impl ExchangeKind {
    fn flipped(self) -> Self {
        match self {
            ExchangeKind::Ul => ExchangeKind::Dl,
            ExchangeKind::Dl => ExchangeKind::Ul,
        }
    }
}

/// A mixed-audio broadcast waiting at the AP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DlFrame {
    pub window: u32,
    pub payload: u32,
    pub enqueued_at: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExchangePlan {
    Broadcast(DlFrame),
    Ul(Vec<NodeId>),
    Release,
}

/// State needed to undo a channel win whose first frame collided.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApSnapshot {
    cursor: usize,
    next_exchange: ExchangeKind,
    last_access: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListChange {
    Added,
    Reset,
    Unchanged,
}

/// Polling-list updates applied after a UL exchange.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ListMaintenance {
    pub reset: Vec<NodeId>,
    pub removed: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct ApState {
    pub polling_list: PollingList,
    pub mode: PollingMode,
    pub next_exchange: ExchangeKind,
    pub last_access: SimTime,
    pub dl_queue: VecDeque<DlFrame>,
    /// Access request interval.
    pub ari: Nanos,
    /// Polling-list timer (the MU-EDCA timer the AP hands out).
    pub mu_edca_timer: Nanos,
    pub max_users: usize,
    pub removal: RemovalPolicy,
}

impl ApState {
    pub fn new(mode: PollingMode, n_sta: usize, ari: Nanos, mu_edca_timer: Nanos, max_users: usize) -> Self {
        let polling_list = match mode {
            PollingMode::StaticAll => PollingList::static_all(n_sta),
            PollingMode::Dynamic | PollingMode::None => PollingList::new(),
        };
        ApState {
            polling_list,
            mode,
            next_exchange: ExchangeKind::Ul,
            last_access: SimTime::ZERO,
            dl_queue: VecDeque::new(),
            ari,
            mu_edca_timer,
            max_users,
            removal: RemovalPolicy::default(),
        }
    }

    pub fn may_contend(&self, now: SimTime) -> bool {
        let dl = !self.dl_queue.is_empty();
        match self.mode {
            PollingMode::None => dl,
            _ => ari_gate(self.last_access, now, dl, self.ari),
        }
    }

    /// Earliest time the ARI lets the AP contend without downlink traffic.
    pub fn ari_deadline(&self) -> SimTime {
        self.last_access + self.ari
    }

    pub fn snapshot(&self) -> ApSnapshot {
        ApSnapshot {
            cursor: self.polling_list.cursor,
            next_exchange: self.next_exchange,
            last_access: self.last_access,
        }
    }

    pub fn restore(&mut self, s: ApSnapshot) {
        self.polling_list.cursor = s.cursor.min(self.polling_list.len().saturating_sub(1));
        self.next_exchange = s.next_exchange;
        self.last_access = s.last_access;
    }

    /// Decides what to do with a won channel: a DL broadcast, a UL poll of
    /// the next round-robin group, or releasing the medium. UL and DL
    /// alternate; an empty DL queue falls through to UL, and an empty
    /// polling list releases the channel.
    pub fn on_channel_won(&mut self, now: SimTime) -> ExchangePlan {
        self.last_access = now;
        if self.mode == PollingMode::None {
            return match self.dl_queue.pop_front() {
                Some(f) => ExchangePlan::Broadcast(f),
                None => ExchangePlan::Release,
            };
        }
        let plan = match self.next_exchange {
            ExchangeKind::Dl if !self.dl_queue.is_empty() => {
                ExchangePlan::Broadcast(self.dl_queue.pop_front().expect("non-empty"))
            }
            _ if self.polling_list.is_empty() => ExchangePlan::Release,
            _ => ExchangePlan::Ul(self.polling_list.select(self.max_users)),
        };
        self.next_exchange = self.next_exchange.flipped();
        plan
    }

    /// An EDCA data frame from `sta` was acknowledged at `now`.
    pub fn handle_edca_ul(&mut self, sta: NodeId, now: SimTime) -> ListChange {
        match self.mode {
            PollingMode::Dynamic => {
                if self.polling_list.insert_or_reset(sta, now + self.mu_edca_timer) {
                    ListChange::Added
                } else {
                    ListChange::Reset
                }
            }
            PollingMode::StaticAll | PollingMode::None => ListChange::Unchanged,
        }
    }

    /// Refreshes timers of stations that delivered data and drops stations
    /// whose timer ran out without them reporting data.
    pub fn after_ul_exchange(&mut self, outcome: &UlExchangeOutcome, now: SimTime) -> ListMaintenance {
        let mut out = ListMaintenance::default();
        if self.mode != PollingMode::Dynamic {
            return out;
        }
        let expiry = now + self.mu_edca_timer;
        let mut idle_expired = Vec::new();
        for r in &outcome.reports {
            let Some(e) = self.polling_list.entry_mut(r.sta) else {
                continue;
            };
            e.last_reported_bytes = r.reported_bytes;
            if r.delivered_packets > 0 {
                e.expiry = expiry;
                e.empty_polls = 0;
                out.reset.push(r.sta);
            } else {
                e.empty_polls += 1;
                if e.expiry <= now {
                    idle_expired.push(r.sta);
                }
            }
        }
        let doomed: Vec<NodeId> = match self.removal {
            RemovalPolicy::AfterPostExpiryPoll => idle_expired,
            RemovalPolicy::OnExpiry => self
                .polling_list
                .entries
                .iter()
                .filter(|e| e.expiry <= now)
                .map(|e| e.sta)
                .collect(),
        };
        for sta in doomed {
            if self.polling_list.remove(sta) {
                out.removed.push(sta);
            }
        }
        out
    }
}
