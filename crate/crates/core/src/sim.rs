//! The simulation world: one AP, `n_total` stations, a shared medium and
//! the teleconferencing workload, driven by a single event queue.

use alloc::vec::Vec;

use crate::channel::{EdcaParams, Medium, RetryOutcome, TransmissionResult};
use crate::error::ConfigError;
use crate::kernel::{
    EventHandle, Nanos, NodeId, RngStream, Scheduler, SimTime, StreamId, NS_PER_MS, NS_PER_S, NS_PER_US,
};
use crate::mac::ap::{ApSnapshot, ApState, DlFrame, ExchangePlan, ListChange, RemovalPolicy};
use crate::mac::exchange::{UlExchangeOutcome, UlExchangeTiming};
use crate::mac::sta::StaState;
use crate::mac::{configure_scheme, Scheme, SchemeBehavior, MAX_MU_EDCA_TIMER};
use crate::metrics::{loss_ratio, pair_e2e, DelayStats, DispositionCounts, E2eSample, RunSummary, WakeupTracker};
use crate::phy::{self, Frame, FrameSizes, PhyProfile, PreambleKind};
use crate::trace::{TraceEvent, TraceLevel, TraceRecord};
use crate::traffic::{
    build_topology, classify_ul, generate_ul, AudioParams, Disposition, OnOffLaw, OnOffSchedule, PacketId, Server,
    UlPacket,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub seed: u64,
    pub duration: Nanos,
    pub n_total: usize,
    pub n_initial: usize,
    pub n_joining: usize,
    pub phy: PhyProfile,
    pub frames: FrameSizes,
    pub sta_edca: EdcaParams,
    pub ap_edca: EdcaParams,
    pub txop: Nanos,
    /// Access request interval `T`.
    pub ari: Nanos,
    /// MU-EDCA timer `Y` used by A2P.
    pub mu_edca_timer: Nanos,
    /// MU-EDCA timer of the poll-all OFDMA baseline.
    pub ofdma_mu_edca_timer: Nanos,
    pub audio: AudioParams,
    pub on_off: OnOffLaw,
    pub removal: RemovalPolicy,
    /// Stations per trigger frame; defaults to the number of RUs.
    pub max_users: Option<u32>,
    pub trace: TraceLevel,
    /// Fixed per-station schedules replacing the random topology.
    pub schedules: Option<Vec<OnOffSchedule>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheme: Scheme::A2p,
            seed: 1,
            duration: 30 * NS_PER_S,
            n_total: 100,
            n_initial: 8,
            n_joining: 0,
            phy: PhyProfile::default(),
            frames: FrameSizes::default(),
            sta_edca: EdcaParams::VO,
            ap_edca: EdcaParams::VO,
            txop: 2080 * NS_PER_US,
            ari: 16 * NS_PER_US,
            mu_edca_timer: 40 * NS_PER_MS,
            ofdma_mu_edca_timer: MAX_MU_EDCA_TIMER,
            audio: AudioParams::default(),
            on_off: OnOffLaw::default(),
            removal: RemovalPolicy::default(),
            max_users: None,
            trace: TraceLevel::Off,
            schedules: None,
        }
    }
}

impl SimConfig {
    /// Initial plus joining stations, or the stations with a non-empty
    /// schedule when schedules are given explicitly.
    pub fn active_count(&self) -> u32 {
        match &self.schedules {
            Some(s) => s.iter().filter(|s| !s.periods().is_empty()).count() as u32,
            None => (self.n_initial + self.n_joining) as u32,
        }
    }

    pub fn max_users(&self) -> Result<u32, ConfigError> {
        let rus = phy::max_rus(self.phy.bandwidth_mhz, self.phy.ru_tones)?;
        match self.max_users {
            None => Ok(rus),
            Some(0) => Err(ConfigError::Invalid("max_users must be positive")),
            Some(m) if m > rus => Err(ConfigError::Invalid("max_users exceeds the RU count")),
            Some(m) => Ok(m),
        }
    }

    /// Checks every parameter and derives the UL exchange timing.
    pub fn validate(&self) -> Result<UlExchangeTiming, ConfigError> {
        self.phy.validate()?;
        self.sta_edca.validate()?;
        self.ap_edca.validate()?;
        self.audio.validate()?;
        if self.duration == 0 {
            return Err(ConfigError::Invalid("duration must be positive"));
        }
        if self.n_total == 0 || self.n_total >= u16::MAX as usize {
            return Err(ConfigError::Invalid("n_total out of range"));
        }
        if self.n_initial + self.n_joining > self.n_total {
            return Err(ConfigError::TopologyOverAllocation {
                initial: self.n_initial,
                joining: self.n_joining,
                total: self.n_total,
            });
        }
        if let Some(s) = &self.schedules {
            if s.len() != self.n_total {
                return Err(ConfigError::Invalid("one schedule per station required"));
            }
        }
        if !(self.on_off.mean_s > 0.0 && self.on_off.bound_s > 0.0) {
            return Err(ConfigError::InvalidTraffic("on/off mean and bound must be positive"));
        }
        if self.mu_edca_timer == 0 || self.ofdma_mu_edca_timer == 0 {
            return Err(ConfigError::Invalid("MU-EDCA timer must be positive"));
        }
        UlExchangeTiming::new(
            &self.phy,
            &self.frames,
            self.txop,
            self.max_users()?,
            self.audio.ul_packet_bytes()?,
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Per-packet ledger; empty with tracing off.
    pub packets: Vec<UlPacket>,
    pub e2e: Vec<E2eSample>,
    pub wakeups: Vec<Nanos>,
    /// MAC event trace; empty below [`TraceLevel::Events`].
    pub trace: Vec<TraceRecord>,
}

pub fn run(cfg: &SimConfig) -> Result<RunOutput, ConfigError> {
    let timing = cfg.validate()?;
    let mut world = World::new(cfg, timing)?;
    world.run();
    Ok(world.finish())
}

#[derive(Clone, Debug)]
enum Ev {
    WindowStart(u32),
    Generate { sta: usize, window: u32, period: u32 },
    ServerDeadline(u32),
    Contention,
    EdcaDataEnd { sta: usize },
    AckEnd { sta: usize },
    BroadcastEnd { window: u32, delivered: bool },
    BsrPhase,
    UlDataEnd,
    UlExchangeEnd,
    CollisionTimeout(NodeId),
    StaTimer(usize),
    ApAri,
}

struct Sta {
    state: StaState,
    schedule: OnOffSchedule,
    timer: Option<EventHandle>,
    /// Frame on the air or awaiting its ack.
    edca_tx: Option<PacketId>,
}

struct ActiveExchange {
    start: SimTime,
    poll_set: Vec<NodeId>,
    outcome: Option<UlExchangeOutcome>,
    carried: Vec<Vec<PacketId>>,
}

#[derive(Default)]
struct Counters {
    ul_exchanges: u64,
    max_ul_exchange: Nanos,
    dl_broadcasts: u64,
    collisions: u64,
}

struct World<'a> {
    cfg: &'a SimConfig,
    behavior: SchemeBehavior,
    timing: UlExchangeTiming,
    sched: Scheduler<Ev>,
    medium: Medium,
    backoff_rng: RngStream,
    traffic_rng: RngStream,
    stas: Vec<Sta>,
    ap: ApState,
    /// AP is transmitting or running an exchange.
    ap_busy: bool,
    ap_plan: Option<(ExchangePlan, ApSnapshot)>,
    ari_timer: Option<EventHandle>,
    contention: Option<(EventHandle, SimTime)>,
    exchange: Option<ActiveExchange>,
    server: Server,
    packets: Vec<UlPacket>,
    dl_rx: Vec<Option<SimTime>>,
    wakeup: WakeupTracker,
    counters: Counters,
    trace: Vec<TraceRecord>,
    ul_bytes: u32,
    dl_bytes: u32,
    edca_data_air: Nanos,
    ack_air: Nanos,
    dl_air: Nanos,
}

impl<'a> World<'a> {
    fn new(cfg: &'a SimConfig, timing: UlExchangeTiming) -> Result<Self, ConfigError> {
        let behavior = configure_scheme(cfg.scheme, cfg.mu_edca_timer, cfg.ofdma_mu_edca_timer);
        let mut topology_rng = RngStream::new(cfg.seed, StreamId::Topology);
        let mut traffic_rng = RngStream::new(cfg.seed, StreamId::Traffic);
        let horizon = SimTime::from_nanos(cfg.duration);
        let schedules = match &cfg.schedules {
            Some(s) => s.clone(),
            None => {
                build_topology(
                    &mut topology_rng,
                    &mut traffic_rng,
                    cfg.n_total,
                    cfg.n_initial,
                    cfg.n_joining,
                    cfg.on_off,
                    horizon,
                )?
                .schedules
            }
        };
        let stas = schedules
            .into_iter()
            .map(|schedule| Sta {
                state: StaState::new(),
                schedule,
                timer: None,
                edca_tx: None,
            })
            .collect();
        let ap_timer = behavior.mu_edca_timer.unwrap_or(cfg.mu_edca_timer);
        let mut ap = ApState::new(
            behavior.polling,
            cfg.n_total,
            cfg.ari,
            ap_timer,
            timing.max_users() as usize,
        );
        ap.removal = cfg.removal;

        let full = phy::full_band_tones(cfg.phy.bandwidth_mhz)?;
        let ul_bytes = cfg.audio.ul_packet_bytes()?;
        let dl_bytes = cfg.audio.dl_packet_bytes()?;
        let su = |bytes| phy::frame_airtime(bytes, full, &cfg.phy, PreambleKind::HeSu).map(|a| a.total);
        let edca_data_air = su(Frame::UlData { payload: ul_bytes }.bytes(&cfg.frames))?;
        let dl_air = su(Frame::DlBroadcast { payload: dl_bytes }.bytes(&cfg.frames))?;
        let ack_air = phy::control_airtime(Frame::Ack.bytes(&cfg.frames), &cfg.phy)?.total;

        Ok(World {
            cfg,
            behavior,
            timing,
            sched: Scheduler::new(),
            medium: Medium::new(cfg.phy.sifs, cfg.phy.slot),
            backoff_rng: RngStream::new(cfg.seed, StreamId::Backoff),
            traffic_rng,
            stas,
            ap,
            ap_busy: false,
            ap_plan: None,
            ari_timer: None,
            contention: None,
            exchange: None,
            server: Server::new(),
            packets: Vec::new(),
            dl_rx: Vec::new(),
            wakeup: WakeupTracker::new(),
            counters: Counters::default(),
            trace: Vec::new(),
            ul_bytes,
            dl_bytes,
            edca_data_air,
            ack_air,
            dl_air,
        })
    }

    fn now(&self) -> SimTime {
        self.sched.now()
    }

    fn log(&mut self, event: TraceEvent) {
        if self.cfg.trace >= TraceLevel::Events {
            self.trace.push(TraceRecord {
                time: self.now(),
                event,
            });
        }
    }

    fn run(&mut self) {
        let end = SimTime::from_nanos(self.cfg.duration);
        if self.cfg.audio.interval <= self.cfg.duration {
            self.sched.schedule(SimTime::ZERO, Ev::WindowStart(0));
        }
        self.sync_ap();
        while let Some((t, ev)) = self.sched.pop_until(end) {
            self.handle(t, ev);
        }
    }

    fn handle(&mut self, t: SimTime, ev: Ev) {
        match ev {
            Ev::WindowStart(k) => self.on_window_start(k),
            Ev::Generate { sta, window, period } => self.on_generate(sta, window, period, t),
            Ev::ServerDeadline(k) => {
                if self.server.on_deadline(k) {
                    self.enqueue_dl(k);
                }
            }
            Ev::Contention => self.on_contention(t),
            Ev::EdcaDataEnd { sta } => self.on_edca_data_end(sta, t),
            Ev::AckEnd { sta } => self.on_ack_end(sta, t),
            Ev::BroadcastEnd { window, delivered } => {
                if delivered {
                    self.dl_rx[window as usize] = Some(t);
                }
                self.ap_busy = false;
                self.sync_ap();
            }
            Ev::BsrPhase => self.on_bsr_phase(),
            Ev::UlDataEnd => self.on_ul_data_end(t),
            Ev::UlExchangeEnd => self.on_ul_exchange_end(t),
            Ev::CollisionTimeout(node) => self.on_collision_timeout(node),
            Ev::StaTimer(i) => {
                self.stas[i].timer = None;
                self.stas[i].state.on_timer_expired(t);
                self.log(TraceEvent::StaEdcaEnabled { sta: NodeId::sta(i) });
                self.sync_sta(i);
            }
            Ev::ApAri => {
                self.ari_timer = None;
                self.sync_ap();
            }
        }
    }

    // --- contention bookkeeping ---

    fn reschedule_contention(&mut self) {
        let next = self.medium.next_grant();
        if let Some((h, at)) = self.contention {
            if Some(at) == next && self.sched.is_pending(h) {
                return;
            }
            self.sched.cancel(h);
            self.contention = None;
        }
        if let Some(at) = next {
            let h = self.sched.schedule(at, Ev::Contention);
            self.contention = Some((h, at));
        }
    }

    fn sync_sta(&mut self, i: usize) {
        let node = NodeId::sta(i);
        let sta = &self.stas[i];
        let want = sta.state.wants_contention() && sta.edca_tx.is_none();
        let contending = self.medium.is_contending(node);
        if want && !contending {
            let now = self.now();
            self.medium
                .request_access(node, self.cfg.sta_edca, now, &mut self.backoff_rng)
                .expect("not contending");
            self.log(TraceEvent::ContentionStart { node });
        } else if !want && contending {
            self.medium.withdraw(node);
            self.log(TraceEvent::ContentionWithdraw { node });
        }
        self.reschedule_contention();
    }

    fn sync_ap(&mut self) {
        if self.ap_busy {
            return;
        }
        let now = self.now();
        let want = self.ap.may_contend(now);
        let contending = self.medium.is_contending(NodeId::AP);
        if want && !contending {
            self.medium
                .request_access(NodeId::AP, self.cfg.ap_edca, now, &mut self.backoff_rng)
                .expect("not contending");
            self.log(TraceEvent::ContentionStart { node: NodeId::AP });
        } else if !want {
            if contending {
                self.medium.withdraw(NodeId::AP);
                self.log(TraceEvent::ContentionWithdraw { node: NodeId::AP });
            }
            if self.behavior.ari_gating && self.ari_timer.is_none() {
                let at = self.ap.ari_deadline().max(now);
                self.ari_timer = Some(self.sched.schedule(at, Ev::ApAri));
            }
        }
        self.reschedule_contention();
    }

    fn set_sta_timer(&mut self, i: usize, deadline: SimTime, was_enabled: bool) {
        if let Some(h) = self.stas[i].timer.take() {
            self.sched.cancel(h);
        }
        self.stas[i].timer = Some(self.sched.schedule(deadline, Ev::StaTimer(i)));
        let sta = NodeId::sta(i);
        self.log(if was_enabled {
            TraceEvent::StaEdcaDisabled { sta, until: deadline }
        } else {
            TraceEvent::StaTimerReset { sta, until: deadline }
        });
    }

    // --- workload ---

    fn on_window_start(&mut self, k: u32) {
        let audio = &self.cfg.audio;
        let mut expected = 0;
        for i in 0..self.stas.len() {
            if self.stas[i].schedule.periods().is_empty() {
                continue;
            }
            if let Some((gen, period)) = generate_ul(&self.stas[i].schedule, k, audio, &mut self.traffic_rng) {
                self.sched.schedule(
                    gen,
                    Ev::Generate {
                        sta: i,
                        window: k,
                        period,
                    },
                );
                expected += 1;
            }
        }
        if self.dl_rx.len() <= k as usize {
            self.dl_rx.resize(k as usize + 1, None);
        }
        self.server.open_window(k, expected);
        if expected > 0 {
            self.sched.schedule(audio.window_deadline(k), Ev::ServerDeadline(k));
        }
        // Only whole windows.
        if audio.window_deadline(k + 1).as_nanos() <= self.cfg.duration {
            self.sched.schedule(audio.window_start(k + 1), Ev::WindowStart(k + 1));
        }
    }

    fn on_generate(&mut self, i: usize, window: u32, period: u32, t: SimTime) {
        let sta = NodeId::sta(i);
        let id = PacketId(self.packets.len() as u32);
        self.packets.push(UlPacket {
            sta,
            window,
            on_period: period,
            gen_time: t,
            size_bytes: self.ul_bytes,
            ap_rx: None,
            disposition: Disposition::InFlight,
        });
        self.stas[i].state.queue.push_back(id);
        self.wakeup.on_generated(sta, period, t);
        self.log(TraceEvent::PacketGenerated { sta, window });
        self.sync_sta(i);
    }

    /// The AP received packet `id` at `t`.
    fn deliver(&mut self, id: PacketId, t: SimTime) {
        let budget = self.cfg.audio.interval;
        let p = &mut self.packets[id.0 as usize];
        p.ap_rx = Some(t);
        p.disposition = classify_ul(p.gen_time, t, budget);
        let (sta, period, window, disposition) = (p.sta, p.on_period, p.window, p.disposition);
        self.wakeup.on_received(sta, period, t);
        if disposition == Disposition::DeliveredOnTime && self.server.on_ul_arrival(window) {
            self.enqueue_dl(window);
        }
    }

    fn enqueue_dl(&mut self, window: u32) {
        let now = self.now();
        self.ap.dl_queue.push_back(DlFrame {
            window,
            payload: self.dl_bytes,
            enqueued_at: now,
        });
        self.log(TraceEvent::DlEnqueued { window });
        self.sync_ap();
    }

    // --- medium access ---

    fn on_contention(&mut self, t: SimTime) {
        self.contention = None;
        let winners = self.medium.winners_at(t);
        let mut tx: Vec<(NodeId, Nanos)> = Vec::with_capacity(winners.len());
        let mut ap_released = false;
        for &w in &winners {
            if w.is_ap() {
                let snap = self.ap.snapshot();
                let plan = self.ap.on_channel_won(t);
                match &plan {
                    ExchangePlan::Release => {
                        self.medium.release_grant(NodeId::AP);
                        self.log(TraceEvent::ApRelease);
                        ap_released = true;
                        continue;
                    }
                    ExchangePlan::Broadcast(_) => tx.push((w, self.dl_air)),
                    ExchangePlan::Ul(set) => {
                        let air = self.timing.bsrp_airtime(set.len() as u32).expect("validated");
                        tx.push((w, air));
                    }
                }
                self.ap_plan = Some((plan, snap));
            } else {
                tx.push((w, self.edca_data_air));
            }
        }
        if ap_released {
            self.sync_ap();
        }
        if tx.is_empty() {
            self.reschedule_contention();
            return;
        }
        let nodes: Vec<NodeId> = tx.iter().map(|&(n, _)| n).collect();
        self.log(TraceEvent::Grant { nodes: nodes.clone() });
        let result = self.medium.occupy(t, &tx).expect("non-empty");
        if result == TransmissionResult::Collision {
            self.counters.collisions += 1;
            self.log(TraceEvent::Collision { nodes });
        }
        let collided = result == TransmissionResult::Collision;
        for (node, air) in tx {
            match node.sta_index() {
                None => self.ap_transmit(t, air, collided),
                Some(i) => {
                    let head = *self.stas[i].state.queue.front().expect("contending station has data");
                    self.stas[i].edca_tx = Some(head);
                    if collided {
                        let timeout = t + air + self.medium.sifs() + self.ack_air;
                        self.sched.schedule(timeout, Ev::CollisionTimeout(node));
                    } else {
                        self.medium.reserve();
                        let window = self.packets[head.0 as usize].window;
                        self.log(TraceEvent::EdcaData { sta: node, window });
                        self.sched.schedule(t + air, Ev::EdcaDataEnd { sta: i });
                    }
                }
            }
        }
        self.reschedule_contention();
    }

    fn ap_transmit(&mut self, t: SimTime, air: Nanos, collided: bool) {
        let (plan, snap) = self.ap_plan.take().expect("AP won with a plan");
        self.ap_busy = true;
        match plan {
            ExchangePlan::Broadcast(f) => {
                // No ack for a broadcast: the AP cannot tell it collided.
                self.counters.dl_broadcasts += 1;
                self.medium.on_success(NodeId::AP, self.cfg.ap_edca);
                self.log(TraceEvent::Broadcast {
                    window: f.window,
                    duration: air,
                });
                self.sched.schedule(
                    t + air,
                    Ev::BroadcastEnd {
                        window: f.window,
                        delivered: !collided,
                    },
                );
            }
            ExchangePlan::Ul(poll_set) if collided => {
                let _ = poll_set;
                self.ap.restore(snap);
                let timeout = t + air + self.medium.sifs() + self.timing.bsr_airtime();
                self.sched.schedule(timeout, Ev::CollisionTimeout(NodeId::AP));
            }
            ExchangePlan::Ul(poll_set) => {
                self.medium.reserve();
                self.medium.on_success(NodeId::AP, self.cfg.ap_edca);
                self.sched.schedule(t + air + self.medium.sifs(), Ev::BsrPhase);
                self.exchange = Some(ActiveExchange {
                    start: t,
                    poll_set,
                    outcome: None,
                    carried: Vec::new(),
                });
            }
            ExchangePlan::Release => unreachable!("released grants do not transmit"),
        }
    }

    fn on_collision_timeout(&mut self, node: NodeId) {
        match node.sta_index() {
            None => {
                self.medium.on_failure(NodeId::AP, self.cfg.ap_edca);
                self.ap_busy = false;
                self.sync_ap();
            }
            Some(i) => {
                let sent = self.stas[i].edca_tx.take().expect("collided frame");
                if self.stas[i].state.queue.front() == Some(&sent) {
                    if self.medium.on_failure(node, self.cfg.sta_edca) == RetryOutcome::Drop {
                        self.stas[i].state.queue.pop_front();
                        let p = &mut self.packets[sent.0 as usize];
                        p.disposition = Disposition::DroppedCollision;
                        let window = p.window;
                        self.log(TraceEvent::PacketDropped { sta: node, window });
                    }
                } else {
                    // Meanwhile delivered in a TB PPDU.
                    self.medium.on_success(node, self.cfg.sta_edca);
                }
                self.sync_sta(i);
            }
        }
    }

    fn on_edca_data_end(&mut self, i: usize, t: SimTime) {
        let id = self.stas[i].edca_tx.expect("frame on the air");
        self.deliver(id, t);
        let ack_end = t + self.medium.sifs() + self.ack_air;
        self.medium.extend_busy(ack_end);
        self.sched.schedule(ack_end, Ev::AckEnd { sta: i });
    }

    fn on_ack_end(&mut self, i: usize, t: SimTime) {
        let node = NodeId::sta(i);
        let id = self.stas[i].edca_tx.take().expect("acked frame");
        let popped = self.stas[i].state.queue.pop_front();
        debug_assert_eq!(popped, Some(id));
        self.log(TraceEvent::Ack { sta: node });
        self.medium.on_success(node, self.cfg.sta_edca);
        self.medium.end_reservation(t);
        let was_enabled = self.stas[i].state.edca_enabled;
        if let Some(d) = self.stas[i].state.on_ack(t, self.behavior.mu_edca_timer) {
            self.set_sta_timer(i, d, was_enabled);
        }
        match self.ap.handle_edca_ul(node, t) {
            ListChange::Added => self.log(TraceEvent::PollingListAdd { sta: node }),
            ListChange::Reset => self.log(TraceEvent::PollingListReset { sta: node }),
            ListChange::Unchanged => {}
        }
        self.sync_sta(i);
        self.sync_ap();
    }

    // --- UL OFDMA exchange ---

    fn on_bsr_phase(&mut self) {
        let ex = self.exchange.as_mut().expect("exchange in progress");
        let queues: Vec<Vec<u32>> = ex
            .poll_set
            .iter()
            .map(|n| {
                let i = n.sta_index().expect("polled station");
                self.stas[i]
                    .state
                    .queue
                    .iter()
                    .map(|id| self.packets[id.0 as usize].size_bytes)
                    .collect()
            })
            .collect();
        let outcome = self.timing.plan(&ex.poll_set, &queues);
        ex.carried = outcome
            .reports
            .iter()
            .map(|r| {
                let i = r.sta.sta_index().expect("polled station");
                self.stas[i]
                    .state
                    .queue
                    .iter()
                    .take(r.delivered_packets)
                    .copied()
                    .collect()
            })
            .collect();
        let start = ex.start;
        let phases = outcome.phases;
        if let Some(d) = phases.data_end {
            self.sched.schedule(start + d, Ev::UlDataEnd);
        }
        self.sched.schedule(start + phases.total, Ev::UlExchangeEnd);
        self.medium.extend_busy(start + phases.total);
        self.counters.ul_exchanges += 1;
        self.counters.max_ul_exchange = self.counters.max_ul_exchange.max(phases.total);
        let event = TraceEvent::UlExchange {
            poll_set: ex.poll_set.clone(),
            bsr: outcome.reports.iter().map(|r| r.reported_bytes).collect(),
            duration: phases.total,
        };
        ex.outcome = Some(outcome);
        self.log(event);
    }

    fn on_ul_data_end(&mut self, t: SimTime) {
        let carried: Vec<PacketId> = self
            .exchange
            .as_ref()
            .expect("exchange in progress")
            .carried
            .iter()
            .flatten()
            .copied()
            .collect();
        for id in carried {
            self.deliver(id, t);
        }
    }

    fn on_ul_exchange_end(&mut self, t: SimTime) {
        let ex = self.exchange.take().expect("exchange in progress");
        let outcome = ex.outcome.expect("BSRs collected");
        for (r, carried) in outcome.reports.iter().zip(&ex.carried) {
            if carried.is_empty() {
                continue;
            }
            let i = r.sta.sta_index().expect("polled station");
            for id in carried {
                let popped = self.stas[i].state.queue.pop_front();
                debug_assert_eq!(popped, Some(*id));
            }
            let was_enabled = self.stas[i].state.edca_enabled;
            if let Some(d) = self.stas[i].state.on_ofdma_success(t, self.behavior.mu_edca_timer) {
                self.set_sta_timer(i, d, was_enabled);
            }
        }
        let maint = self.ap.after_ul_exchange(&outcome, t);
        for sta in maint.reset {
            self.log(TraceEvent::PollingListReset { sta });
        }
        for sta in maint.removed {
            self.log(TraceEvent::PollingListRemove { sta });
        }
        self.medium.end_reservation(t);
        self.ap_busy = false;
        for n in &ex.poll_set {
            self.sync_sta(n.sta_index().expect("polled station"));
        }
        self.sync_ap();
    }

    fn finish(self) -> RunOutput {
        let counts = DispositionCounts::from_packets(&self.packets);
        let e2e = pair_e2e(&self.packets, &self.dl_rx);
        let values: Vec<Nanos> = e2e.iter().map(|s| s.value).collect();
        let summary = RunSummary {
            scheme: self.cfg.scheme,
            active_count: self.cfg.active_count(),
            seed: self.cfg.seed,
            counts,
            loss_ratio: loss_ratio(&counts),
            e2e: DelayStats::from_samples(&values),
            wakeup_count: self.wakeup.samples().len() as u64,
            wakeup_mean: self.wakeup.mean(),
            ul_exchanges: self.counters.ul_exchanges,
            max_ul_exchange: self.counters.max_ul_exchange,
            dl_broadcasts: self.counters.dl_broadcasts,
            collisions: self.counters.collisions,
        };
        let keep_packets = self.cfg.trace >= TraceLevel::Packets;
        RunOutput {
            summary,
            packets: if keep_packets { self.packets } else { Vec::new() },
            e2e,
            wakeups: self.wakeup.samples().to_vec(),
            trace: self.trace,
        }
    }
}
