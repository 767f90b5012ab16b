//! Scripted and randomized runs checked against the STA and AP state
//! machines through the event trace.

use a2p_core::kernel::{NodeId, SimTime, NS_PER_MS, NS_PER_S};
use a2p_core::mac::ap::RemovalPolicy;
use a2p_core::trace::{TraceEvent, TraceLevel, TraceRecord};
use a2p_core::traffic::OnOffSchedule;
use a2p_core::{run, RunOutput, Scheme, SimConfig};

const Y: u64 = 40 * NS_PER_MS;

fn ms(v: u64) -> SimTime {
    SimTime::from_millis(v)
}

fn scripted(scheme: Scheme, periods_ms: &[&[(u64, u64)]], duration_ms: u64) -> SimConfig {
    let schedules = periods_ms
        .iter()
        .map(|p| OnOffSchedule::from_periods(p.iter().map(|&(a, b)| (ms(a), ms(b))).collect()))
        .collect::<Vec<_>>();
    SimConfig {
        scheme,
        duration: duration_ms * NS_PER_MS,
        n_total: schedules.len(),
        n_initial: 0,
        schedules: Some(schedules),
        trace: TraceLevel::Events,
        ..SimConfig::default()
    }
}

fn random(scheme: Scheme, active: usize, seed: u64, secs: u64) -> SimConfig {
    SimConfig {
        scheme,
        seed,
        duration: secs * NS_PER_S,
        n_joining: active - 8,
        trace: TraceLevel::Events,
        ..SimConfig::default()
    }
}

fn polls(r: &TraceRecord, sta: NodeId) -> Option<(u32, u64)> {
    match &r.event {
        TraceEvent::UlExchange {
            poll_set,
            bsr,
            duration,
        } => poll_set.iter().position(|&s| s == sta).map(|i| (bsr[i], *duration)),
        _ => None,
    }
}

/// STA-side and list transitions of one station, consecutive repeats
/// collapsed.
fn transitions(out: &RunOutput, sta: NodeId) -> Vec<&'static str> {
    let mut seq: Vec<&'static str> = Vec::new();
    for r in &out.trace {
        let label = match &r.event {
            TraceEvent::StaEdcaDisabled { sta: s, .. } if *s == sta => "edca_disabled",
            TraceEvent::StaEdcaEnabled { sta: s } if *s == sta => "edca_enabled",
            TraceEvent::PollingListAdd { sta: s } if *s == sta => "list_add",
            TraceEvent::PollingListRemove { sta: s } if *s == sta => "list_remove",
            TraceEvent::EdcaData { sta: s, .. } if *s == sta => "edca_data",
            TraceEvent::Ack { sta: s } if *s == sta => "ack",
            _ => match polls(r, sta) {
                Some((0, _)) => "poll_empty",
                Some(_) => "poll_data",
                None => continue,
            },
        };
        if seq.last() != Some(&label) {
            seq.push(label);
        }
    }
    seq
}

/// Asserts that a station never contends or sends EDCA data while its
/// MU-EDCA timer runs.
fn assert_edca_exclusion(out: &RunOutput, n_sta: usize) {
    let mut deadline: Vec<Option<SimTime>> = vec![None; n_sta];
    for r in &out.trace {
        match &r.event {
            TraceEvent::StaEdcaDisabled { sta, until } | TraceEvent::StaTimerReset { sta, until } => {
                assert!(*until > r.time);
                deadline[sta.sta_index().unwrap()] = Some(*until);
            }
            TraceEvent::StaEdcaEnabled { sta } => {
                let d = deadline[sta.sta_index().unwrap()].take();
                assert_eq!(d, Some(r.time), "{sta} re-enabled off its deadline");
            }
            TraceEvent::ContentionStart { node } if !node.is_ap() => {
                assert_eq!(
                    deadline[node.sta_index().unwrap()],
                    None,
                    "{node} contends while disabled at {}",
                    r.time
                );
            }
            TraceEvent::EdcaData { sta, .. } => {
                assert_eq!(
                    deadline[sta.sta_index().unwrap()],
                    None,
                    "{sta} sends EDCA data while disabled"
                );
            }
            _ => {}
        }
    }
}

#[test]
fn station_state_machine_over_two_on_periods() {
    let s0 = NodeId::sta(0);
    let out = run(&scripted(Scheme::A2p, &[&[(0, 100), (300, 320)], &[]], 400)).unwrap();

    let seq = transitions(&out, s0);
    // Outer structure: two activations, each entering through EDCA and
    // leaving through expiry plus an empty poll.
    let skeleton: Vec<&str> = seq.iter().copied().filter(|l| !l.starts_with("poll")).collect();
    assert_eq!(
        skeleton,
        [
            "edca_data",
            "ack",
            "edca_disabled",
            "list_add",
            "edca_enabled",
            "list_remove",
            "edca_data",
            "ack",
            "edca_disabled",
            "list_add",
            "edca_enabled",
            "list_remove",
        ]
    );
    // Served by polls while listed.
    let first_add = seq.iter().position(|&l| l == "list_add").unwrap();
    assert!(seq[first_add..].contains(&"poll_data"));
    // The poll that precedes a removal found the buffer empty.
    let first_remove = seq.iter().position(|&l| l == "list_remove").unwrap();
    let last_poll = seq[..first_remove]
        .iter()
        .rev()
        .find(|l| l.starts_with("poll"))
        .unwrap();
    assert_eq!(*last_poll, "poll_empty");
    assert_edca_exclusion(&out, 2);
}

#[test]
fn ack_disables_edca_and_lists_station() {
    let s0 = NodeId::sta(0);
    let out = run(&scripted(Scheme::A2p, &[&[(0, 100), (300, 320)], &[]], 400)).unwrap();
    let acks: Vec<SimTime> = out
        .trace
        .iter()
        .filter(|r| r.event == TraceEvent::Ack { sta: s0 })
        .map(|r| r.time)
        .collect();
    assert_eq!(acks.len(), 2);
    for t in acks {
        let same_time: Vec<&TraceEvent> = out.trace.iter().filter(|r| r.time == t).map(|r| &r.event).collect();
        assert!(same_time.contains(&&TraceEvent::StaEdcaDisabled { sta: s0, until: t + Y }));
        assert!(same_time.contains(&&TraceEvent::PollingListAdd { sta: s0 }));
    }
    // The second activation starts at 300 ms and its first packet goes out
    // through EDCA before any poll carries data.
    let second_data = out
        .trace
        .iter()
        .find(|r| r.time >= ms(300) && matches!(r.event, TraceEvent::EdcaData { sta, .. } if sta == s0))
        .unwrap()
        .time;
    assert!(second_data < ms(305));
    assert!(!out
        .trace
        .iter()
        .any(|r| r.time >= ms(300) && r.time < second_data && polls(r, s0).is_some()));
}

#[test]
fn block_ack_restarts_timer_and_list_expiry() {
    let s0 = NodeId::sta(0);
    let out = run(&scripted(Scheme::A2p, &[&[(0, 100)], &[]], 200)).unwrap();
    let mut data_polls = 0;
    for (i, r) in out.trace.iter().enumerate() {
        let Some((bsr, duration)) = polls(r, s0) else {
            continue;
        };
        let bsrp_start = r.time;
        // The record is written when the BSRs arrive; the exchange end is
        // found through the matching timer reset.
        if bsr > 0 {
            data_polls += 1;
            let reset = out.trace[i..]
                .iter()
                .find(|x| matches!(x.event, TraceEvent::StaTimerReset { sta, .. } if sta == s0))
                .unwrap();
            let TraceEvent::StaTimerReset { until, .. } = reset.event else {
                unreachable!()
            };
            assert_eq!(until, reset.time + Y);
            assert!(reset.time > bsrp_start && reset.time - bsrp_start < duration);
            assert!(out.trace[i..]
                .iter()
                .take_while(|x| x.time <= reset.time)
                .any(|x| x.event == TraceEvent::PollingListReset { sta: s0 }));
        }
    }
    assert!(data_polls >= 15, "{data_polls} data polls");
}

#[test]
fn removal_waits_for_a_post_expiry_empty_poll() {
    let s0 = NodeId::sta(0);
    let out = run(&scripted(Scheme::A2p, &[&[(0, 50)], &[]], 200)).unwrap();
    let last_refresh = out
        .trace
        .iter()
        .filter(|r| {
            matches!(r.event, TraceEvent::PollingListAdd { sta } | TraceEvent::PollingListReset { sta } if sta == s0)
        })
        .map(|r| r.time)
        .max()
        .unwrap();
    let removed = out
        .trace
        .iter()
        .find(|r| r.event == TraceEvent::PollingListRemove { sta: s0 })
        .unwrap()
        .time;
    assert!(removed >= last_refresh + Y);
    // The last poll before removal reported nothing.
    let last_poll = out
        .trace
        .iter()
        .rev()
        .filter(|r| r.time <= removed)
        .find_map(|r| polls(r, s0))
        .unwrap();
    assert_eq!(last_poll.0, 0);
    // Nothing polls the station afterwards.
    assert!(!out.trace.iter().any(|r| r.time > removed && polls(r, s0).is_some()));
}

#[test]
fn eager_removal_policy_drops_on_expiry() {
    let mut cfg = scripted(Scheme::A2p, &[&[(0, 50)], &[]], 200);
    cfg.removal = RemovalPolicy::OnExpiry;
    let out = run(&cfg).unwrap();
    let s0 = NodeId::sta(0);
    assert!(out
        .trace
        .iter()
        .any(|r| r.event == TraceEvent::PollingListRemove { sta: s0 }));
    assert_edca_exclusion(&out, 2);
}

#[test]
fn empty_bsrs_skip_the_data_phase() {
    let out = run(&scripted(Scheme::A2p, &[&[(0, 50)], &[]], 200)).unwrap();
    let durations: Vec<(u32, u64)> = out.trace.iter().filter_map(|r| polls(r, NodeId::sta(0))).collect();
    let empty = durations.iter().find(|(b, _)| *b == 0).unwrap().1;
    let full = durations.iter().find(|(b, _)| *b > 0).unwrap().1;
    assert!(empty < full / 3);
    // BSRP (1 user) + SIFS + BSR on a 26-tone RU.
    assert_eq!(empty, (32_000 + 2 * 13_600) + 16_000 + (44_000 + 2 * 13_600));
}

#[test]
fn idle_bss_ap_contends_only_after_ari() {
    let out = run(&scripted(Scheme::A2p, &[&[], &[]], 20)).unwrap();
    assert!(!out
        .trace
        .iter()
        .any(|r| matches!(r.event, TraceEvent::UlExchange { .. })));
    let mut last_release: Option<SimTime> = None;
    let mut contentions = 0;
    for r in &out.trace {
        match r.event {
            TraceEvent::ApRelease => last_release = Some(r.time),
            TraceEvent::ContentionStart { node } if node.is_ap() => {
                contentions += 1;
                if let Some(t) = last_release {
                    assert!(r.time - t >= 16_000);
                }
            }
            _ => {}
        }
    }
    assert!(contentions > 10);
}

#[test]
fn ap_never_broadcasts_twice_in_a_row() {
    let out = run(&random(Scheme::A2p, 19, 4, 2)).unwrap();
    let mut prev_broadcast = false;
    let mut broadcasts = 0;
    for r in &out.trace {
        match r.event {
            TraceEvent::Broadcast { .. } => {
                assert!(!prev_broadcast, "two broadcasts in a row at {}", r.time);
                prev_broadcast = true;
                broadcasts += 1;
            }
            TraceEvent::UlExchange { .. } | TraceEvent::ApRelease => prev_broadcast = false,
            _ => {}
        }
    }
    assert!(broadcasts > 300);
}

#[test]
fn edca_only_sends_no_trigger_frames() {
    let out = run(&random(Scheme::EdcaOnly, 19, 2, 2)).unwrap();
    assert!(!out
        .trace
        .iter()
        .any(|r| matches!(r.event, TraceEvent::UlExchange { .. })));
    assert_eq!(out.summary.ul_exchanges, 0);
    assert!(out.summary.dl_broadcasts > 0);
}

#[test]
fn edca_exclusion_holds_in_full_traces() {
    for scheme in [Scheme::A2p, Scheme::OfdmaOnly] {
        for seed in 1..=2 {
            let out = run(&random(scheme, 24, seed, 3)).unwrap();
            assert_edca_exclusion(&out, 100);
        }
    }
}

#[test]
fn static_poll_all_round_robin_gap() {
    let out = run(&random(Scheme::OfdmaOnly, 19, 3, 2)).unwrap();
    let sets: Vec<&Vec<NodeId>> = out
        .trace
        .iter()
        .filter_map(|r| match &r.event {
            TraceEvent::UlExchange { poll_set, .. } => Some(poll_set),
            _ => None,
        })
        .collect();
    assert!(sets.len() > 60);
    assert!(sets.iter().all(|s| s.len() <= 18));
    for window in sets.windows(6) {
        let mut seen = vec![0u32; 100];
        for s in window {
            for n in s.iter() {
                seen[n.sta_index().unwrap()] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }
}

#[test]
fn every_exchange_fits_the_txop() {
    for scheme in [Scheme::A2p, Scheme::OfdmaOnly, Scheme::OfdmaPlusEdca] {
        let out = run(&random(scheme, 36, 5, 2)).unwrap();
        for r in &out.trace {
            if let TraceEvent::UlExchange { poll_set, duration, .. } = &r.event {
                assert!(*duration <= 2_080_000);
                assert!(poll_set.len() <= 18);
            }
        }
        assert!(out.summary.max_ul_exchange <= 2_080_000);
    }
}

#[test]
fn packets_are_conserved_in_every_scheme() {
    for scheme in Scheme::ALL {
        for active in [8, 24] {
            let out = run(&random(scheme, active, 9, 2)).unwrap();
            let c = out.summary.counts;
            assert!(c.is_conserved());
            assert_eq!(c.generated as usize, out.packets.len());
            let per_sta_total: usize = (0..100)
                .map(|i| out.packets.iter().filter(|p| p.sta == NodeId::sta(i)).count())
                .sum();
            assert_eq!(per_sta_total, out.packets.len());
        }
    }
}

#[test]
fn same_seed_same_run() {
    let cfg = random(Scheme::OfdmaPlusEdca, 19, 11, 2);
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.trace, b.trace);
    let other = run(&SimConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.summary, other.summary);
}

#[test]
fn always_on_station_is_constant_bitrate() {
    let out = run(&scripted(Scheme::EdcaOnly, &[&[(0, u64::MAX / NS_PER_MS)]], 1002)).unwrap();
    // Only whole 5 ms windows generate.
    assert_eq!(out.summary.counts.generated, 1002 / 5);
    let bytes: u64 = out.packets.iter().map(|p| p.size_bytes as u64).sum();
    assert_eq!(bytes * 8 * 1000 / 1000, 200 * 740 * 8);
    for (k, p) in out.packets.iter().enumerate() {
        let start = ms(5 * k as u64);
        assert_eq!(p.window as usize, k);
        assert!(p.gen_time >= start && p.gen_time < start + NS_PER_MS);
    }
}

#[test]
fn one_broadcast_per_active_window() {
    let out = run(&random(Scheme::A2p, 13, 6, 3)).unwrap();
    let mut active_windows: Vec<u32> = out.packets.iter().map(|p| p.window).collect();
    active_windows.sort();
    active_windows.dedup();
    let enqueued: Vec<u32> = out
        .trace
        .iter()
        .filter_map(|r| match r.event {
            TraceEvent::DlEnqueued { window } => Some(window),
            _ => None,
        })
        .collect();
    let mut sorted = enqueued.clone();
    sorted.sort();
    assert_eq!(sorted, active_windows);
    let mut sent: Vec<u32> = out
        .trace
        .iter()
        .filter_map(|r| match r.event {
            TraceEvent::Broadcast { window, .. } => Some(window),
            _ => None,
        })
        .collect();
    let total = sent.len();
    sent.dedup();
    assert_eq!(sent.len(), total);
    assert!(total + 2 >= enqueued.len());
}

#[test]
fn e2e_samples_exceed_one_hop_airtimes() {
    let out = run(&random(Scheme::EdcaOnly, 8, 1, 2)).unwrap();
    // Shortest UL data frame (full band) plus the DL broadcast.
    let floor = (32_000 + 3 * 13_600) + (32_000 + 2 * 13_600);
    assert!(!out.e2e.is_empty());
    assert!(out.e2e.iter().all(|s| s.value >= floor));
}
