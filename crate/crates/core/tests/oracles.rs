//! PHY and traffic values checked against independently coded formulas.

use a2p_core::kernel::{RngStream, StreamId};
use a2p_core::phy::{self, Frame, FrameSizes, PhyProfile, PreambleKind};
use a2p_core::traffic::{sample_bounded_exp, AudioParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Data subcarriers of each RU size, single stream.
const RU_DATA_TONES: [(u16, u64); 7] = [
    (26, 24),
    (52, 48),
    (106, 102),
    (242, 234),
    (484, 468),
    (996, 980),
    (1992, 1960),
];

#[derive(Clone, Copy)]
enum Qam {
    Bpsk,
    Qpsk,
    Q16,
    Q64,
    Q256,
    Q1024,
}

impl Qam {
    fn bits(self) -> u64 {
        let points: u64 = match self {
            Qam::Bpsk => 2,
            Qam::Qpsk => 4,
            Qam::Q16 => 16,
            Qam::Q64 => 64,
            Qam::Q256 => 256,
            Qam::Q1024 => 1024,
        };
        points.trailing_zeros() as u64
    }
}

/// (constellation, code rate as num/den) per MCS index.
const MCS_TABLE: [(Qam, u64, u64); 12] = [
    (Qam::Bpsk, 1, 2),
    (Qam::Qpsk, 1, 2),
    (Qam::Qpsk, 3, 4),
    (Qam::Q16, 1, 2),
    (Qam::Q16, 3, 4),
    (Qam::Q64, 2, 3),
    (Qam::Q64, 3, 4),
    (Qam::Q64, 5, 6),
    (Qam::Q256, 3, 4),
    (Qam::Q256, 5, 6),
    (Qam::Q1024, 3, 4),
    (Qam::Q1024, 5, 6),
];

fn oracle_bits_per_symbol(tones: u16, mcs: usize) -> u64 {
    let sd = RU_DATA_TONES.iter().find(|(t, _)| *t == tones).unwrap().1;
    let (qam, num, den) = MCS_TABLE[mcs];
    // floor(N_SD * N_BPSCS * R)
    (sd * qam.bits() * num) / den
}

fn oracle_airtime_ns(bytes: u64, tones: u16, mcs: usize, gi_ns: u64, preamble_ns: u64) -> u64 {
    let bits = 8 * bytes;
    let per_sym = oracle_bits_per_symbol(tones, mcs);
    let symbols = bits.div_ceil(per_sym);
    preamble_ns + symbols * (12_800 + gi_ns)
}

#[test]
fn rate_table_matches_oracle() {
    for (tones, _) in RU_DATA_TONES {
        for mcs in 0..12u8 {
            assert_eq!(
                phy::bits_per_symbol(tones, mcs).unwrap() as u64,
                oracle_bits_per_symbol(tones, mcs as usize),
                "{tones} tones, MCS {mcs}"
            );
        }
    }
}

#[test]
fn published_rates() {
    // 26-tone MCS 8 at 0.8 us GI is 10.6 Mb/s; 484-tone MCS 0 is 17.2 Mb/s.
    let rate = |tones, mcs| phy::bits_per_symbol(tones, mcs).unwrap() as f64 / 13.6;
    assert!((rate(26, 8) - 10.6).abs() < 0.05);
    assert!((rate(484, 0) - 17.2).abs() < 0.05);
    assert!((rate(242, 11) - 143.4).abs() < 0.05);
}

#[test]
fn airtime_matches_ceil_oracle_on_random_pairs() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x0A12);
    let preambles = [
        (PreambleKind::HeSu, 32_000),
        (PreambleKind::HeTb, 44_000),
        (PreambleKind::Legacy, 20_000),
    ];
    for _ in 0..1000 {
        let bytes: u32 = rng.random_range(1..=12_000);
        let mcs: u8 = rng.random_range(0..12);
        let (tones, _) = RU_DATA_TONES[rng.random_range(0..RU_DATA_TONES.len())];
        let gi = [800, 1600, 3200][rng.random_range(0..3)];
        let (kind, pre) = preambles[rng.random_range(0..preambles.len())];
        let profile = PhyProfile {
            bandwidth_mhz: 160,
            mcs,
            guard_interval: gi,
            ru_tones: tones,
            ..PhyProfile::default()
        };
        let got = phy::frame_airtime(bytes, tones, &profile, kind).unwrap();
        let want = oracle_airtime_ns(bytes as u64, tones, mcs as usize, gi, pre);
        assert_eq!(got.total, want, "{bytes} B, {tones} tones, MCS {mcs}, GI {gi}");
    }
}

#[test]
fn ru_budget_at_40_mhz() {
    // 40 MHz holds two 242-tone halves of nine 26-tone RUs each.
    assert_eq!(phy::max_rus(40, 26).unwrap(), 2 * 9);
}

#[test]
fn frame_airtimes_of_the_default_profile() {
    let p = PhyProfile::default();
    let s = FrameSizes::default();
    let ul = Frame::UlData { payload: 740 }.bytes(&s) as u64;
    assert_eq!(
        phy::frame_airtime(ul as u32, 26, &p, PreambleKind::HeTb).unwrap().total,
        oracle_airtime_ns(ul, 26, 8, 800, 44_000)
    );
    let dl = Frame::DlBroadcast { payload: 500 }.bytes(&s) as u64;
    assert_eq!(
        phy::frame_airtime(dl as u32, 484, &p, PreambleKind::HeSu)
            .unwrap()
            .total,
        oracle_airtime_ns(dl, 484, 8, 800, 32_000)
    );
    for users in [1u32, 9, 18] {
        let tf = Frame::BsrpTf { users }.bytes(&s) as u64;
        assert_eq!(
            phy::control_airtime(tf as u32, &p).unwrap().total,
            oracle_airtime_ns(tf, 484, 0, 800, 32_000)
        );
    }
}

#[test]
fn audio_packet_sizes() {
    let a = AudioParams::default();
    assert_eq!(a.ul_packet_bytes().unwrap(), (240 * 24 + 160) / 8);
    assert_eq!(a.ul_packet_bytes().unwrap(), 740);
    assert_eq!(a.dl_packet_bytes().unwrap(), 500);
    // About 1.2 Mb/s uplink per station.
    assert!((a.ul_bitrate().bps() - 1.2e6).abs() < 0.02e6);
}

#[test]
fn bounded_exponential_mean() {
    let analytic = 10.0 * (1.0 - (-2.5f64).exp());
    assert!((analytic - 9.1792).abs() < 1e-4);
    let mut rng = RngStream::new(2024, StreamId::Traffic);
    let n = 100_000;
    let mean = (0..n).map(|_| sample_bounded_exp(&mut rng, 10.0, 25.0)).sum::<f64>() / n as f64;
    assert!((mean - analytic).abs() / analytic < 0.02, "mean {mean}");
}
