//! PHY abstraction: RU layout, per-RU rates and frame airtimes.
//!
//! Only a single spatial stream is modelled. Control frames (trigger frames,
//! BSRP, block acks, acks) go over the full channel width at MCS 0; data
//! frames use the configured MCS on either a 26-tone RU (trigger-based) or
//! the full channel (single-user).

use crate::error::ConfigError;
use crate::kernel::{Nanos, NS_PER_US};

/// Symbol duration without guard interval (HE, 78.125 kHz subcarrier spacing).
pub const HE_SYMBOL_NS: Nanos = 12_800;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PreambleKind {
    Legacy,
    HeSu,
    HeTb,
    HeMu,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhyProfile {
    pub bandwidth_mhz: u32,
    pub mcs: u8,
    pub guard_interval: Nanos,
    /// RU size used for trigger-based uplink.
    pub ru_tones: u16,
    pub sifs: Nanos,
    pub slot: Nanos,
    pub legacy_preamble: Nanos,
    pub he_su_preamble: Nanos,
    pub he_tb_preamble: Nanos,
    pub he_mu_preamble: Nanos,
}

impl Default for PhyProfile {
    fn default() -> Self {
        PhyProfile {
            bandwidth_mhz: 40,
            mcs: 8,
            guard_interval: 800,
            ru_tones: 26,
            sifs: 16 * NS_PER_US,
            slot: 9 * NS_PER_US,
            legacy_preamble: 20 * NS_PER_US,
            he_su_preamble: 32 * NS_PER_US,
            he_tb_preamble: 44 * NS_PER_US,
            he_mu_preamble: 44 * NS_PER_US,
        }
    }
}

impl PhyProfile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        full_band_tones(self.bandwidth_mhz)?;
        if !matches!(self.guard_interval, 800 | 1600 | 3200) {
            return Err(ConfigError::InvalidGuardInterval(self.guard_interval));
        }
        max_rus(self.bandwidth_mhz, self.ru_tones)?;
        bits_per_symbol(self.ru_tones, self.mcs)?;
        if self.slot == 0 {
            return Err(ConfigError::Invalid("slot time must be positive"));
        }
        Ok(())
    }

    pub fn symbol_duration(&self) -> Nanos {
        HE_SYMBOL_NS + self.guard_interval
    }

    pub fn preamble(&self, kind: PreambleKind) -> Nanos {
        match kind {
            PreambleKind::Legacy => self.legacy_preamble,
            PreambleKind::HeSu => self.he_su_preamble,
            PreambleKind::HeTb => self.he_tb_preamble,
            PreambleKind::HeMu => self.he_mu_preamble,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AirtimeBreakdown {
    pub preamble: Nanos,
    pub payload_symbols: u32,
    pub total: Nanos,
}

/// RU size (in tones) that spans the whole channel.
pub fn full_band_tones(bandwidth_mhz: u32) -> Result<u16, ConfigError> {
    match bandwidth_mhz {
        20 => Ok(242),
        40 => Ok(484),
        80 => Ok(996),
        160 => Ok(1992),
        other => Err(ConfigError::UnsupportedBandwidth(other)),
    }
}

/// Number of RUs of `ru_tones` that can be allocated simultaneously.
pub fn max_rus(bandwidth_mhz: u32, ru_tones: u16) -> Result<u32, ConfigError> {
    let per_20 = match bandwidth_mhz {
        20 => 0,
        40 => 1,
        80 => 2,
        160 => 3,
        other => return Err(ConfigError::UnsupportedBandwidth(other)),
    };
    let unsupported = ConfigError::UnsupportedRu {
        tones: ru_tones,
        bandwidth_mhz,
    };
    // Rows: 20, 40, 80, 160 MHz.
    let count = match ru_tones {
        26 => [9, 18, 37, 74][per_20],
        52 => [4, 8, 16, 32][per_20],
        106 => [2, 4, 8, 16][per_20],
        242 => [1, 2, 4, 8][per_20],
        484 => [0, 1, 2, 4][per_20],
        996 => [0, 0, 1, 2][per_20],
        1992 => [0, 0, 0, 1][per_20],
        _ => 0,
    };
    if count == 0 {
        Err(unsupported)
    } else {
        Ok(count)
    }
}

fn data_subcarriers(ru_tones: u16) -> Option<u32> {
    Some(match ru_tones {
        26 => 24,
        52 => 48,
        106 => 102,
        242 => 234,
        484 => 468,
        996 => 980,
        1992 => 1960,
        _ => return None,
    })
}

/// (coded bits per subcarrier, code rate numerator, code rate denominator)
fn modulation(mcs: u8) -> Option<(u32, u32, u32)> {
    Some(match mcs {
        0 => (1, 1, 2),
        1 => (2, 1, 2),
        2 => (2, 3, 4),
        3 => (4, 1, 2),
        4 => (4, 3, 4),
        5 => (6, 2, 3),
        6 => (6, 3, 4),
        7 => (6, 5, 6),
        8 => (8, 3, 4),
        9 => (8, 5, 6),
        10 => (10, 3, 4),
        11 => (10, 5, 6),
        _ => return None,
    })
}

/// Data bits carried by one OFDM symbol on one RU, single spatial stream.
pub fn bits_per_symbol(ru_tones: u16, mcs: u8) -> Result<u32, ConfigError> {
    let (bits, num, den) = modulation(mcs).ok_or(ConfigError::McsOutOfRange(mcs))?;
    let sc = data_subcarriers(ru_tones).ok_or(ConfigError::UnsupportedRu {
        tones: ru_tones,
        bandwidth_mhz: 0,
    })?;
    Ok(sc * bits * num / den)
}

/// Airtime of a frame on an RU of `ru_tones` at an explicit MCS.
pub fn airtime_at_mcs(
    frame_bytes: u32,
    ru_tones: u16,
    mcs: u8,
    profile: &PhyProfile,
    preamble: PreambleKind,
) -> Result<AirtimeBreakdown, ConfigError> {
    let bps = bits_per_symbol(ru_tones, mcs)?;
    let symbols = (frame_bytes * 8).div_ceil(bps);
    Ok(breakdown(symbols, profile, preamble))
}

/// Airtime of `frame_bytes` on an RU of `ru_tones` at the profile's MCS.
/// Partial symbols are padded out to a whole symbol.
pub fn frame_airtime(
    frame_bytes: u32,
    ru_tones: u16,
    profile: &PhyProfile,
    preamble: PreambleKind,
) -> Result<AirtimeBreakdown, ConfigError> {
    airtime_at_mcs(frame_bytes, ru_tones, profile.mcs, profile, preamble)
}

/// Airtime of a control frame: MCS 0 over the full channel, HE-SU preamble.
pub fn control_airtime(frame_bytes: u32, profile: &PhyProfile) -> Result<AirtimeBreakdown, ConfigError> {
    let tones = full_band_tones(profile.bandwidth_mhz)?;
    airtime_at_mcs(frame_bytes, tones, 0, profile, PreambleKind::HeSu)
}

/// Airtime of a fixed number of payload symbols; used for padded MU PPDUs.
pub fn breakdown(payload_symbols: u32, profile: &PhyProfile, preamble: PreambleKind) -> AirtimeBreakdown {
    let pre = profile.preamble(preamble);
    AirtimeBreakdown {
        preamble: pre,
        payload_symbols,
        total: pre + payload_symbols as u64 * profile.symbol_duration(),
    }
}

/// Bitrate of a stream of packets carrying `samples` samples of
/// `resolution_bits` each plus a `header_bits` header, one packet every
/// `interval_ms` milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bitrate {
    pub bits_per_packet: u64,
    pub interval_ms: u64,
}

impl Bitrate {
    /// Exact bits per second, if integral.
    pub fn exact_bps(&self) -> Option<u64> {
        let scaled = 1000 * self.bits_per_packet;
        scaled
            .is_multiple_of(self.interval_ms)
            .then(|| scaled / self.interval_ms)
    }

    pub fn bps(&self) -> f64 {
        1000.0 * self.bits_per_packet as f64 / self.interval_ms as f64
    }
}

pub fn stream_bitrate(samples: u64, resolution_bits: u64, header_bits: u64, interval_ms: u64) -> Bitrate {
    Bitrate {
        bits_per_packet: samples * resolution_bits + header_bits,
        interval_ms,
    }
}

/// Byte sizes of MAC frames. Defaults follow the standard frame formats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameSizes {
    /// MAC header + FCS added to every data MPDU.
    pub mac_overhead: u32,
    pub ack: u32,
    /// QoS-Null frame carrying the buffer status report.
    pub bsr: u32,
    pub ba_base: u32,
    pub ba_per_user: u32,
    pub tf_base: u32,
    pub tf_per_user: u32,
}

impl Default for FrameSizes {
    fn default() -> Self {
        FrameSizes {
            mac_overhead: 30,
            ack: 14,
            bsr: 34,
            ba_base: 32,
            ba_per_user: 8,
            tf_base: 28,
            tf_per_user: 5,
        }
    }
}

/// Protocol units exchanged in the BSS.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    UlData { payload: u32 },
    DlBroadcast { payload: u32 },
    Ack,
    BsrpTf { users: u32 },
    Bsr,
    Tf { users: u32 },
    MultiStaBa { users: u32 },
}

impl Frame {
    pub fn bytes(&self, sizes: &FrameSizes) -> u32 {
        match *self {
            Frame::UlData { payload } | Frame::DlBroadcast { payload } => payload + sizes.mac_overhead,
            Frame::Ack => sizes.ack,
            Frame::BsrpTf { users } | Frame::Tf { users } => sizes.tf_base + sizes.tf_per_user * users,
            Frame::Bsr => sizes.bsr,
            Frame::MultiStaBa { users } => sizes.ba_base + sizes.ba_per_user * users,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ru_counts() {
        assert_eq!(max_rus(40, 26), Ok(18));
        assert_eq!(max_rus(20, 26), Ok(9));
        assert!(matches!(max_rus(40, 13), Err(ConfigError::UnsupportedRu { .. })));
        assert!(matches!(max_rus(30, 26), Err(ConfigError::UnsupportedBandwidth(30))));
    }

    #[test]
    fn rates() {
        assert_eq!(bits_per_symbol(26, 8), Ok(144));
        assert_eq!(bits_per_symbol(26, 0), Ok(12));
        assert_eq!(bits_per_symbol(26, 12), Err(ConfigError::McsOutOfRange(12)));
    }

    #[test]
    fn ul_data_airtime() {
        let p = PhyProfile::default();
        let a = frame_airtime(770, 26, &p, PreambleKind::HeTb).unwrap();
        assert_eq!(a.payload_symbols, 43);
        assert_eq!(a.total - a.preamble, 584_800);
        assert_eq!(a.total, 584_800 + 44_000);
        assert_eq!(frame_airtime(1, 26, &p, PreambleKind::HeTb).unwrap().payload_symbols, 1);
    }

    #[test]
    fn longer_guard_interval_costs_airtime() {
        let short = PhyProfile::default();
        let long = PhyProfile {
            guard_interval: 1600,
            ..PhyProfile::default()
        };
        let a = frame_airtime(770, 26, &short, PreambleKind::HeSu).unwrap();
        let b = frame_airtime(770, 26, &long, PreambleKind::HeSu).unwrap();
        assert!(b.total > a.total);
    }

    #[test]
    fn bitrate_formula() {
        assert_eq!(stream_bitrate(240, 24, 160, 5).exact_bps(), Some(1_184_000));
        assert_eq!(stream_bitrate(240, 16, 160, 5).exact_bps(), Some(800_000));
        assert_eq!(stream_bitrate(1, 1, 0, 1).exact_bps(), Some(1000));
        assert_eq!(stream_bitrate(1, 1, 0, 3).exact_bps(), None);
    }

    #[test]
    fn control_frames_use_full_band_mcs0() {
        let p = PhyProfile::default();
        let sizes = FrameSizes::default();
        // 484-tone RU at MCS 0: 468 * 1 * 1/2 = 234 bits per symbol.
        let ack = control_airtime(Frame::Ack.bytes(&sizes), &p).unwrap();
        assert_eq!(ack.payload_symbols, 1);
        let tf = control_airtime(Frame::BsrpTf { users: 18 }.bytes(&sizes), &p).unwrap();
        assert_eq!(Frame::BsrpTf { users: 18 }.bytes(&sizes), 118);
        assert_eq!(tf.payload_symbols, 5);
        assert_eq!(Frame::MultiStaBa { users: 2 }.bytes(&sizes), 48);
    }

    #[test]
    fn default_profile_is_valid() {
        assert_eq!(PhyProfile::default().validate(), Ok(()));
        assert_eq!(PhyProfile::default().symbol_duration(), 13_600);
        let bad = PhyProfile {
            guard_interval: 400,
            ..PhyProfile::default()
        };
        assert_eq!(bad.validate(), Err(ConfigError::InvalidGuardInterval(400)));
    }
}
