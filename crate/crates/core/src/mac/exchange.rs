//! UL OFDMA frame exchange:
//! BSRP TF, SIFS, BSRs, SIFS, TF, SIFS, TB data, SIFS, Multi-STA BA.
//!
//! All polled stations answer the BSRP with a QoS-Null BSR on their own
//! 26-tone RU. Only stations reporting queued bytes get an RU in the basic
//! TF; if nobody has data the exchange stops after the BSRs. Data PPDUs are
//! padded to the longest aggregate, and aggregates are capped by a symbol
//! budget that keeps a full-size exchange within the TXOP.

use alloc::vec::Vec;

use crate::error::ConfigError;
use crate::kernel::{Nanos, NodeId};
use crate::phy::{self, Frame, FrameSizes, PhyProfile, PreambleKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UlExchangeTiming {
    profile: PhyProfile,
    sizes: FrameSizes,
    txop: Nanos,
    max_users: u32,
    data_symbol_budget: u32,
    bsr_airtime: Nanos,
}

impl UlExchangeTiming {
    /// Derives the per-station data symbol budget and fails if not even one
    /// `min_payload` MPDU fits into a full-size exchange.
    pub fn new(
        profile: &PhyProfile,
        sizes: &FrameSizes,
        txop: Nanos,
        max_users: u32,
        min_payload: u32,
    ) -> Result<Self, ConfigError> {
        let mut t = UlExchangeTiming {
            profile: profile.clone(),
            sizes: sizes.clone(),
            txop,
            max_users,
            data_symbol_budget: 0,
            bsr_airtime: phy::frame_airtime(Frame::Bsr.bytes(sizes), profile.ru_tones, profile, PreambleKind::HeTb)?
                .total,
        };
        let n = max_users;
        let overhead = t.bsrp_airtime(n)?
            + t.bsr_airtime
            + t.tf_airtime(n)?
            + t.ba_airtime(n)?
            + 4 * profile.sifs
            + profile.he_tb_preamble;
        let one_mpdu = t.mpdu_symbols(min_payload)?;
        let needed = overhead + one_mpdu as Nanos * profile.symbol_duration();
        if needed > txop {
            return Err(ConfigError::TxopInfeasible {
                needed_ns: needed,
                txop_ns: txop,
            });
        }
        t.data_symbol_budget = ((txop - overhead) / profile.symbol_duration()) as u32;
        Ok(t)
    }

    pub fn txop(&self) -> Nanos {
        self.txop
    }

    pub fn max_users(&self) -> u32 {
        self.max_users
    }

    pub fn data_symbol_budget(&self) -> u32 {
        self.data_symbol_budget
    }

    pub fn sifs(&self) -> Nanos {
        self.profile.sifs
    }

    pub fn bsrp_airtime(&self, users: u32) -> Result<Nanos, ConfigError> {
        Ok(phy::control_airtime(Frame::BsrpTf { users }.bytes(&self.sizes), &self.profile)?.total)
    }

    pub fn bsr_airtime(&self) -> Nanos {
        self.bsr_airtime
    }

    pub fn tf_airtime(&self, users: u32) -> Result<Nanos, ConfigError> {
        Ok(phy::control_airtime(Frame::Tf { users }.bytes(&self.sizes), &self.profile)?.total)
    }

    pub fn ba_airtime(&self, users: u32) -> Result<Nanos, ConfigError> {
        Ok(phy::control_airtime(Frame::MultiStaBa { users }.bytes(&self.sizes), &self.profile)?.total)
    }

    fn mpdu_symbols(&self, payload: u32) -> Result<u32, ConfigError> {
        Ok(phy::frame_airtime(
            Frame::UlData { payload }.bytes(&self.sizes),
            self.profile.ru_tones,
            &self.profile,
            PreambleKind::HeTb,
        )?
        .payload_symbols)
    }

    /// Symbols needed on one RU for the given MPDU payloads.
    pub fn aggregate_symbols(&self, payloads: &[u32]) -> u32 {
        let bytes: u32 = payloads
            .iter()
            .map(|&p| Frame::UlData { payload: p }.bytes(&self.sizes))
            .sum();
        phy::frame_airtime(bytes, self.profile.ru_tones, &self.profile, PreambleKind::HeTb)
            .map(|a| a.payload_symbols)
            .expect("profile validated at construction")
    }

    /// How many head-of-queue packets fit into the symbol budget.
    pub fn aggregate_count(&self, payloads: &[u32]) -> usize {
        let mut count = 0;
        while count < payloads.len() && self.aggregate_symbols(&payloads[..=count]) <= self.data_symbol_budget {
            count += 1;
        }
        count
    }

    /// Plans the exchange for the given poll set. `queues[i]` lists the
    /// payload sizes queued at `poll_set[i]` when its BSR goes out.
    pub fn plan(&self, poll_set: &[NodeId], queues: &[Vec<u32>]) -> UlExchangeOutcome {
        assert_eq!(poll_set.len(), queues.len());
        assert!(!poll_set.is_empty(), "UL exchange without polled stations");
        let sifs = self.profile.sifs;
        let n = poll_set.len() as u32;
        let bsrp = self.bsrp_airtime(n).expect("validated");
        let mut reports = Vec::with_capacity(poll_set.len());
        let mut max_symbols = 0;
        let mut data_users = 0u32;
        for (&sta, queue) in poll_set.iter().zip(queues) {
            let reported_bytes = queue.iter().sum();
            let delivered_packets = self.aggregate_count(queue);
            if delivered_packets > 0 {
                data_users += 1;
                max_symbols = max_symbols.max(self.aggregate_symbols(&queue[..delivered_packets]));
            }
            reports.push(PolledReport {
                sta,
                reported_bytes,
                delivered_packets,
            });
        }
        let bsr_start = bsrp + sifs;
        let bsr_end = bsr_start + self.bsr_airtime;
        let phases = if data_users == 0 {
            ExchangePhases {
                bsrp,
                bsr: self.bsr_airtime,
                tf: 0,
                data: 0,
                ba: 0,
                bsr_start,
                data_end: None,
                total: bsr_end,
            }
        } else {
            let tf = self.tf_airtime(data_users).expect("validated");
            let data = phy::breakdown(max_symbols, &self.profile, PreambleKind::HeTb).total;
            let ba = self.ba_airtime(data_users).expect("validated");
            let data_end = bsr_end + sifs + tf + sifs + data;
            ExchangePhases {
                bsrp,
                bsr: self.bsr_airtime,
                tf,
                data,
                ba,
                bsr_start,
                data_end: Some(data_end),
                total: data_end + sifs + ba,
            }
        };
        UlExchangeOutcome {
            reports,
            data_symbols: max_symbols,
            phases,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolledReport {
    pub sta: NodeId,
    pub reported_bytes: u32,
    /// Packets carried in the data PPDU (and covered by the BA).
    pub delivered_packets: usize,
}

/// Airtimes of each phase and offsets from the start of the BSRP TF.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExchangePhases {
    pub bsrp: Nanos,
    pub bsr: Nanos,
    pub tf: Nanos,
    pub data: Nanos,
    pub ba: Nanos,
    pub bsr_start: Nanos,
    /// End of the TB data PPDU, `None` if the data phase was skipped.
    pub data_end: Option<Nanos>,
    pub total: Nanos,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UlExchangeOutcome {
    pub reports: Vec<PolledReport>,
    /// Padded length of the TB data PPDU in symbols.
    pub data_symbols: u32,
    pub phases: ExchangePhases,
}

impl UlExchangeOutcome {
    pub fn has_data(&self) -> bool {
        self.phases.data_end.is_some()
    }

    pub fn data_users(&self) -> impl Iterator<Item = &PolledReport> {
        self.reports.iter().filter(|r| r.delivered_packets > 0)
    }
}
