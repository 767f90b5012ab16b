//! Time base, event queue and random streams.
//!
//! Time is an integer count of nanoseconds. Every duration the simulator
//! deals with (0.8 us guard interval, 13.6 us OFDM symbols, 2088.96 ms MU-EDCA
//! timers) is exact at this resolution, so the kernel never touches floating
//! point.

use alloc::collections::{BTreeMap, BinaryHeap};
use core::cmp::Reverse;
use core::fmt;
use core::ops::{Add, AddAssign, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A duration in nanoseconds.
pub type Nanos = u64;

pub const NS_PER_US: u64 = 1_000;
pub const NS_PER_MS: u64 = 1_000_000;
pub const NS_PER_S: u64 = 1_000_000_000;

/// Nanoseconds since simulation start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * NS_PER_US)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * NS_PER_MS)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * NS_PER_S)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    /// Elapsed nanoseconds since `earlier`, saturating at zero.
    pub const fn since(self, earlier: SimTime) -> Nanos {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<Nanos> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Nanos) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl AddAssign<Nanos> for SimTime {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs;
    }
}

impl Sub for SimTime {
    type Output = Nanos;

    fn sub(self, rhs: SimTime) -> Nanos {
        self.0.checked_sub(rhs.0).expect("SimTime subtraction went negative")
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Identifier of a node in the BSS. The AP is node 0, stations are 1..=n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const AP: NodeId = NodeId(0);

    /// Node id of the station with zero-based index `index`.
    pub const fn sta(index: usize) -> NodeId {
        NodeId(index as u16 + 1)
    }

    pub const fn is_ap(self) -> bool {
        self.0 == 0
    }

    /// Zero-based station index, `None` for the AP.
    pub const fn sta_index(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0 as usize - 1)
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sta_index() {
            None => f.write_str("ap"),
            Some(i) => write!(f, "sta{i}"),
        }
    }
}

/// Handle to a scheduled event, usable for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

/// Ordered event queue. Events with equal fire times are delivered in the
/// order they were scheduled.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<(SimTime, u64)>>,
    pending: BTreeMap<u64, E>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of pending (not cancelled, not fired) events.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Enqueues `action` to fire at `fire_at`.
    ///
    /// Panics if `fire_at` lies in the past: that is always a logic error in
    /// the caller.
    pub fn schedule(&mut self, fire_at: SimTime, action: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past ({fire_at} < {})",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse((fire_at, seq)));
        self.pending.insert(seq, action);
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: Nanos, action: E) -> EventHandle {
        self.schedule(self.now + delay, action)
    }

    /// Removes a pending event. Returns `false` if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&handle.0)
    }

    /// Pops the next event firing at or before `t_end`, advancing the clock
    /// to its fire time.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        while let Some(&Reverse((at, seq))) = self.queue.peek() {
            if at > t_end {
                return None;
            }
            self.queue.pop();
            if let Some(action) = self.pending.remove(&seq) {
                self.now = at;
                return Some((at, action));
            }
        }
        None
    }

    /// Delivers every event with `fire_at <= t_end` to `handler`, in order,
    /// then sets the clock to `t_end` and returns it.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        assert!(t_end >= self.now, "run_until target lies in the past");
        while let Some((at, action)) = self.pop_until(t_end) {
            handler(self, at, action);
        }
        self.now = t_end;
        t_end
    }
}

/// Named random streams. Each experiment knob draws from its own stream so
/// that changing one does not perturb the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Topology,
    Traffic,
    Backoff,
}

impl StreamId {
    fn index(self) -> u64 {
        match self {
            StreamId::Topology => 1,
            StreamId::Traffic => 2,
            StreamId::Backoff => 3,
        }
    }
}

/// Deterministic random stream keyed by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream.index());
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
