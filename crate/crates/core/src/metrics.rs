//! Packet ledger statistics: loss ratio, E2E delay distribution, wake-up
//! delay, and the cross-seed aggregation used by the sweep.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::kernel::{Nanos, NodeId, SimTime};
use crate::mac::Scheme;
use crate::traffic::{Disposition, UlPacket};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DispositionCounts {
    pub generated: u64,
    pub on_time: u64,
    pub outdated: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl DispositionCounts {
    pub fn from_packets<'a>(packets: impl IntoIterator<Item = &'a UlPacket>) -> Self {
        let mut c = DispositionCounts::default();
        for p in packets {
            c.add(p.disposition);
        }
        c
    }

    pub fn add(&mut self, d: Disposition) {
        self.generated += 1;
        match d {
            Disposition::InFlight => self.in_flight += 1,
            Disposition::DeliveredOnTime => self.on_time += 1,
            Disposition::Outdated => self.outdated += 1,
            Disposition::DroppedCollision => self.dropped += 1,
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.on_time + self.outdated + self.dropped + self.in_flight == self.generated
    }

    /// Packets with a final disposition.
    pub fn settled(&self) -> u64 {
        self.generated - self.in_flight
    }
}

/// Lost (dropped or outdated) over settled packets; in-flight packets are
/// left out of both. Zero when nothing settled.
pub fn loss_ratio(c: &DispositionCounts) -> f64 {
    let settled = c.settled();
    if settled == 0 {
        0.0
    } else {
        (c.outdated + c.dropped) as f64 / settled as f64
    }
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Tukey box-plot statistics. Quartiles are rounded to whole nanoseconds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxStats {
    pub median: Nanos,
    pub q1: Nanos,
    pub q3: Nanos,
    pub whisker_low: Nanos,
    pub whisker_high: Nanos,
    pub outliers: Vec<Nanos>,
}

pub fn box_stats(samples: &[Nanos]) -> Option<BoxStats> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let f: Vec<f64> = sorted.iter().map(|&v| v as f64).collect();
    let q1 = percentile_sorted(&f, 0.25);
    let median = percentile_sorted(&f, 0.5);
    let q3 = percentile_sorted(&f, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |v: &&Nanos| (**v as f64) >= lo_fence && (**v as f64) <= hi_fence;
    let whisker_low = *sorted.iter().find(inside).expect("median lies inside the fences");
    let whisker_high = *sorted.iter().rev().find(inside).expect("median lies inside the fences");
    let outliers = sorted.iter().copied().filter(|v| !inside(&v)).collect();
    Some(BoxStats {
        median: libm::round(median) as Nanos,
        q1: libm::round(q1) as Nanos,
        q3: libm::round(q3) as Nanos,
        whisker_low,
        whisker_high,
        outliers,
    })
}

/// E2E delay distribution of one run, flat enough for a CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayStats {
    pub count: u64,
    pub mean: f64,
    pub median: Nanos,
    pub q1: Nanos,
    pub q3: Nanos,
    pub whisker_low: Nanos,
    pub whisker_high: Nanos,
    pub outliers: u64,
    pub max: Nanos,
}

impl DelayStats {
    pub fn from_samples(samples: &[Nanos]) -> Option<Self> {
        let b = box_stats(samples)?;
        let sum: u128 = samples.iter().map(|&v| v as u128).sum();
        Some(DelayStats {
            count: samples.len() as u64,
            mean: sum as f64 / samples.len() as f64,
            median: b.median,
            q1: b.q1,
            q3: b.q3,
            whisker_low: b.whisker_low,
            whisker_high: b.whisker_high,
            outliers: b.outliers.len() as u64,
            max: *samples.iter().max().expect("non-empty"),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct E2eSample {
    pub sta: NodeId,
    pub window: u32,
    pub value: Nanos,
}

/// E2E samples for every on-time UL packet whose window's DL broadcast
/// reached the stations. `dl_rx[k]` is the reception time of window `k`'s
/// broadcast.
pub fn pair_e2e(packets: &[UlPacket], dl_rx: &[Option<SimTime>]) -> Vec<E2eSample> {
    packets
        .iter()
        .filter(|p| p.disposition == Disposition::DeliveredOnTime)
        .filter_map(|p| {
            let rx = (*dl_rx.get(p.window as usize)?)?;
            Some(E2eSample {
                sta: p.sta,
                window: p.window,
                value: rx - p.gen_time,
            })
        })
        .collect()
}

/// Wake-up delay bookkeeping: for every on-period, the delay from its
/// first generated packet to the first of its packets the AP receives.
#[derive(Clone, Debug, Default)]
pub struct WakeupTracker {
    pending: BTreeMap<(NodeId, u32), SimTime>,
    done: BTreeMap<(NodeId, u32), ()>,
    samples: Vec<Nanos>,
}

impl WakeupTracker {
    pub fn new() -> Self {
        WakeupTracker::default()
    }

    /// A packet of on-period `period` was generated.
    pub fn on_generated(&mut self, sta: NodeId, period: u32, gen: SimTime) {
        let key = (sta, period);
        if !self.done.contains_key(&key) {
            self.pending.entry(key).or_insert(gen);
        }
    }

    /// A packet of on-period `period` reached the AP.
    pub fn on_received(&mut self, sta: NodeId, period: u32, ap_rx: SimTime) {
        if let Some(first_gen) = self.pending.remove(&(sta, period)) {
            self.record_wakeup(first_gen, ap_rx);
            self.done.insert((sta, period), ());
        }
    }

    pub fn record_wakeup(&mut self, on_time_gen: SimTime, ap_rx: SimTime) {
        self.samples.push(ap_rx - on_time_gen);
    }

    pub fn samples(&self) -> &[Nanos] {
        &self.samples
    }

    pub fn mean(&self) -> Option<f64> {
        mean_of(&self.samples)
    }
}

fn mean_of(samples: &[Nanos]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let sum: u128 = samples.iter().map(|&v| v as u128).sum();
    Some(sum as f64 / samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub active_count: u32,
    pub seed: u64,
    pub counts: DispositionCounts,
    pub loss_ratio: f64,
    pub e2e: Option<DelayStats>,
    pub wakeup_count: u64,
    pub wakeup_mean: Option<f64>,
    pub ul_exchanges: u64,
    pub max_ul_exchange: Nanos,
    pub dl_broadcasts: u64,
    pub collisions: u64,
}

/// Cross-seed statistics of one `(scheme, active_count)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub active_count: u32,
    pub runs: u32,
    pub loss_mean: f64,
    pub loss_median: f64,
    pub loss_p99: f64,
    /// Seed averages of the per-run E2E statistics.
    pub e2e_median: Option<f64>,
    pub e2e_whisker_high: Option<f64>,
    pub e2e_max: Option<f64>,
    pub wakeup_mean: Option<f64>,
}

fn mean_f(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0u32), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups runs by `(scheme, active_count)` in sorted order.
pub fn aggregate(runs: &[RunSummary]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(Scheme, u32), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        cells.entry((r.scheme, r.active_count)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((scheme, active_count), rs)| {
            let mut loss: Vec<f64> = rs.iter().map(|r| r.loss_ratio).collect();
            loss.sort_by(f64::total_cmp);
            Aggregate {
                scheme,
                active_count,
                runs: rs.len() as u32,
                loss_mean: mean_f(loss.iter().copied()).expect("non-empty cell"),
                loss_median: percentile_sorted(&loss, 0.5),
                loss_p99: percentile_sorted(&loss, 0.99),
                e2e_median: mean_f(rs.iter().filter_map(|r| r.e2e.map(|e| e.median as f64))),
                e2e_whisker_high: mean_f(rs.iter().filter_map(|r| r.e2e.map(|e| e.whisker_high as f64))),
                e2e_max: mean_f(rs.iter().filter_map(|r| r.e2e.map(|e| e.max as f64))),
                wakeup_mean: mean_f(rs.iter().filter_map(|r| r.wakeup_mean)),
            }
        })
        .collect()
}
