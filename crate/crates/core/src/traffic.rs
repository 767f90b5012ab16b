//! Teleconferencing workload.
//!
//! Time is cut into windows of `X`. An active station produces one audio
//! packet at a uniformly random instant in the first `B` of each window.
//! The server (co-located with the AP) mixes whatever arrived on time and
//! emits one broadcast per window, either as soon as every active station's
//! packet is in or when the window's delay budget runs out.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::ConfigError;
use crate::kernel::{Nanos, NodeId, SimTime, NS_PER_MS, NS_PER_S};
use crate::phy::{stream_bitrate, Bitrate};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AudioParams {
    /// Window length and UL delay budget (`X`).
    pub interval: Nanos,
    /// Generation part at the start of each window (`B`).
    pub gen_window: Nanos,
    pub ul_samples: u32,
    pub ul_resolution_bits: u32,
    pub dl_samples: u32,
    pub dl_resolution_bits: u32,
    pub header_bits: u32,
}

impl Default for AudioParams {
    fn default() -> Self {
        AudioParams {
            interval: 5 * NS_PER_MS,
            gen_window: NS_PER_MS,
            ul_samples: 240,
            ul_resolution_bits: 24,
            dl_samples: 240,
            dl_resolution_bits: 16,
            header_bits: 160,
        }
    }
}

impl AudioParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.interval == 0 || self.gen_window == 0 {
            return Err(ConfigError::InvalidTraffic("X and B must be positive"));
        }
        if self.gen_window > self.interval {
            return Err(ConfigError::InvalidTraffic("B exceeds X"));
        }
        self.ul_packet_bytes()?;
        self.dl_packet_bytes()?;
        Ok(())
    }

    fn bytes(samples: u32, bits: u32, header: u32) -> Result<u32, ConfigError> {
        let total = samples as u64 * bits as u64 + header as u64;
        if total == 0 || !total.is_multiple_of(8) {
            return Err(ConfigError::InvalidTraffic(
                "packet size is not a whole number of bytes",
            ));
        }
        u32::try_from(total / 8).map_err(|_| ConfigError::InvalidTraffic("packet too large"))
    }

    /// `(M * N + W) / 8`
    pub fn ul_packet_bytes(&self) -> Result<u32, ConfigError> {
        Self::bytes(self.ul_samples, self.ul_resolution_bits, self.header_bits)
    }

    /// `(P * Q + W) / 8`
    pub fn dl_packet_bytes(&self) -> Result<u32, ConfigError> {
        Self::bytes(self.dl_samples, self.dl_resolution_bits, self.header_bits)
    }

    pub fn ul_bitrate(&self) -> Bitrate {
        stream_bitrate(
            self.ul_samples as u64,
            self.ul_resolution_bits as u64,
            self.header_bits as u64,
            self.interval / NS_PER_MS,
        )
    }

    pub fn window_start(&self, window: u32) -> SimTime {
        SimTime::from_nanos(window as u64 * self.interval)
    }

    pub fn window_deadline(&self, window: u32) -> SimTime {
        self.window_start(window) + self.interval
    }
}

/// Bounded exponential law of the on and off durations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnOffLaw {
    pub mean_s: f64,
    pub bound_s: f64,
}

impl Default for OnOffLaw {
    fn default() -> Self {
        OnOffLaw {
            mean_s: 10.0,
            bound_s: 25.0,
        }
    }
}

/// Exponential draw with the given mean, clipped to `bound_s` (may be
/// infinite). Seconds.
pub fn sample_bounded_exp<R: Rng + ?Sized>(rng: &mut R, mean_s: f64, bound_s: f64) -> f64 {
    debug_assert!(mean_s > 0.0 && bound_s > 0.0);
    let u: f64 = rng.random();
    let x = -mean_s * libm::log1p(-u);
    if x > bound_s {
        bound_s
    } else {
        x
    }
}

fn secs_to_nanos(s: f64) -> Nanos {
    libm::round(s * NS_PER_S as f64) as Nanos
}

/// Alternating on-periods `[on, off)`, ordered and non-overlapping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OnOffSchedule {
    periods: Vec<(SimTime, SimTime)>,
}

impl OnOffSchedule {
    pub fn always_on() -> Self {
        OnOffSchedule {
            periods: alloc::vec![(SimTime::ZERO, SimTime::MAX)],
        }
    }

    pub fn never() -> Self {
        OnOffSchedule::default()
    }

    pub fn from_periods(periods: Vec<(SimTime, SimTime)>) -> Self {
        debug_assert!(periods.windows(2).all(|w| w[0].1 <= w[1].0));
        OnOffSchedule { periods }
    }

    /// Starts off, then alternates off and on draws until `horizon`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, law: OnOffLaw, horizon: SimTime) -> Self {
        let mut periods = Vec::new();
        let mut t = SimTime::ZERO;
        loop {
            let on = t + secs_to_nanos(sample_bounded_exp(rng, law.mean_s, law.bound_s));
            if on >= horizon {
                break;
            }
            let off = on + secs_to_nanos(sample_bounded_exp(rng, law.mean_s, law.bound_s));
            periods.push((on, off));
            t = off;
        }
        OnOffSchedule { periods }
    }

    pub fn periods(&self) -> &[(SimTime, SimTime)] {
        &self.periods
    }

    /// Index of the on-period covering `t`.
    pub fn period_at(&self, t: SimTime) -> Option<u32> {
        let idx = self.periods.partition_point(|&(on, _)| on <= t);
        let i = idx.checked_sub(1)?;
        (t < self.periods[i].1).then_some(i as u32)
    }

    pub fn is_on(&self, t: SimTime) -> bool {
        self.period_at(t).is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StaRole {
    /// Active from the start for the whole run.
    Initial,
    /// Alternates on and off.
    Joining,
    Idle,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub roles: Vec<StaRole>,
    pub schedules: Vec<OnOffSchedule>,
}

impl Topology {
    pub fn count(&self, role: StaRole) -> usize {
        self.roles.iter().filter(|&&r| r == role).count()
    }
}

/// Picks disjoint random initial and joining sets among `n_total`
/// stations and draws the joining stations' on-off schedules.
pub fn build_topology<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    topology_rng: &mut R1,
    traffic_rng: &mut R2,
    n_total: usize,
    n_initial: usize,
    n_joining: usize,
    law: OnOffLaw,
    horizon: SimTime,
) -> Result<Topology, ConfigError> {
    if n_initial + n_joining > n_total {
        return Err(ConfigError::TopologyOverAllocation {
            initial: n_initial,
            joining: n_joining,
            total: n_total,
        });
    }
    let mut order: Vec<usize> = (0..n_total).collect();
    order.shuffle(topology_rng);
    let mut roles = alloc::vec![StaRole::Idle; n_total];
    for &i in &order[..n_initial] {
        roles[i] = StaRole::Initial;
    }
    for &i in &order[n_initial..n_initial + n_joining] {
        roles[i] = StaRole::Joining;
    }
    let schedules = roles
        .iter()
        .map(|role| match role {
            StaRole::Initial => OnOffSchedule::always_on(),
            StaRole::Joining => OnOffSchedule::sample(traffic_rng, law, horizon),
            StaRole::Idle => OnOffSchedule::never(),
        })
        .collect();
    Ok(Topology { roles, schedules })
}

/// Generation instant of a station's packet in window `window`, with the
/// index of the on-period it belongs to. The offset is drawn regardless of
/// the schedule so random consumption does not depend on on/off state.
pub fn generate_ul<R: Rng + ?Sized>(
    schedule: &OnOffSchedule,
    window: u32,
    params: &AudioParams,
    rng: &mut R,
) -> Option<(SimTime, u32)> {
    let offset = rng.random_range(0..params.gen_window);
    let gen = params.window_start(window) + offset;
    schedule.period_at(gen).map(|p| (gen, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Disposition {
    InFlight,
    DeliveredOnTime,
    Outdated,
    DroppedCollision,
}

impl Disposition {
    pub fn name(self) -> &'static str {
        match self {
            Disposition::InFlight => "in_flight",
            Disposition::DeliveredOnTime => "on_time",
            Disposition::Outdated => "outdated",
            Disposition::DroppedCollision => "dropped",
        }
    }
}

/// On time iff the AP got the packet within the delay budget.
pub fn classify_ul(gen_time: SimTime, ap_rx: SimTime, budget: Nanos) -> Disposition {
    if ap_rx - gen_time <= budget {
        Disposition::DeliveredOnTime
    } else {
        Disposition::Outdated
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UlPacket {
    pub sta: NodeId,
    pub window: u32,
    pub on_period: u32,
    pub gen_time: SimTime,
    pub size_bytes: u32,
    pub ap_rx: Option<SimTime>,
    pub disposition: Disposition,
}

/// When the mixed DL packet of a window is produced: once every expected
/// UL packet arrived on time, or at the window's deadline.
pub fn dl_trigger_time(deadline: SimTime, arrivals: &[Option<SimTime>]) -> SimTime {
    arrivals
        .iter()
        .try_fold(SimTime::ZERO, |latest, a| match a {
            Some(t) if *t <= deadline => Some(latest.max(*t)),
            _ => None,
        })
        .unwrap_or(deadline)
}

#[derive(Clone, Copy, Debug)]
struct WindowState {
    expected: u32,
    arrived: u32,
}

/// Mixing server bookkeeping: which windows still wait for UL packets.
#[derive(Clone, Debug, Default)]
pub struct Server {
    open: BTreeMap<u32, WindowState>,
}

impl Server {
    pub fn new() -> Self {
        Server::default()
    }

    /// Registers a window with `expected` active stations.
    pub fn open_window(&mut self, window: u32, expected: u32) {
        if expected > 0 {
            self.open.insert(window, WindowState { expected, arrived: 0 });
        }
    }

    pub fn is_open(&self, window: u32) -> bool {
        self.open.contains_key(&window)
    }

    /// An on-time UL packet of `window` reached the AP. Returns `true` if
    /// that completes the window and the DL packet must go out now.
    pub fn on_ul_arrival(&mut self, window: u32) -> bool {
        let Some(w) = self.open.get_mut(&window) else {
            return false;
        };
        w.arrived += 1;
        if w.arrived >= w.expected {
            self.open.remove(&window);
            true
        } else {
            false
        }
    }

    /// The window's budget ran out. Returns `true` if it was still open.
    pub fn on_deadline(&mut self, window: u32) -> bool {
        self.open.remove(&window).is_some()
    }
}
