//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Durations take a unit
//! suffix (`ns`, `us`/`µs`, `ms`, `s`) and are converted to integer
//! nanoseconds without rounding. Unknown keys are errors.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use a2p_core::kernel::{Nanos, NS_PER_MS, NS_PER_S, NS_PER_US};
use a2p_core::mac::ap::RemovalPolicy;
use a2p_core::trace::TraceLevel;
use a2p_core::{ConfigError, Scheme, SimConfig};
use sha2::{Digest, Sha256};

use crate::Error;

/// Keys in canonical order. The echo and the hash follow this order.
pub const KEYS: &[&str] = &[
    "scheme",
    "seed",
    "duration",
    "n_total",
    "n_initial",
    "n_joining",
    "bandwidth",
    "mcs",
    "gi",
    "ru_tones",
    "max_users",
    "sifs",
    "slot",
    "aifsn",
    "cw_min",
    "cw_max",
    "retry_limit",
    "txop",
    "ari",
    "mu_edca_timer",
    "ofdma_mu_edca_timer",
    "removal",
    "interval",
    "gen_window",
    "ul_samples",
    "ul_resolution",
    "dl_samples",
    "dl_resolution",
    "header_bits",
    "mac_overhead",
    "tau_mean",
    "tau_bound",
    "trace",
];

/// Keys that do not change the simulated outcome and stay out of the hash.
const UNHASHED: &[&str] = &["seed", "trace"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Keys set explicitly, by file or flag.
    pub overrides: BTreeSet<&'static str>,
}

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Parses `2.08ms`, `16us`, `800ns`, `30s` into nanoseconds. Fractions
/// must land on a whole nanosecond.
pub fn parse_time(text: &str) -> Result<Nanos, String> {
    let text = text.trim();
    let units: [(&str, u128); 5] = [
        ("ns", 1),
        ("us", NS_PER_US as u128),
        ("µs", NS_PER_US as u128),
        ("ms", NS_PER_MS as u128),
        ("s", NS_PER_S as u128),
    ];
    let (number, scale) = units
        .iter()
        .find_map(|(suffix, scale)| text.strip_suffix(suffix).map(|n| (n.trim_end(), *scale)))
        .ok_or_else(|| format!("`{text}` needs a unit suffix (ns, us, ms or s)"))?;
    let (int, frac) = number.split_once('.').unwrap_or((number, ""));
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() || !digits_ok(int) || !digits_ok(frac) || (number.contains('.') && frac.is_empty()) {
        return Err(format!("`{text}` is not a non-negative decimal duration"));
    }
    let too_big = || format!("`{text}` is out of range");
    let mut ns: u128 = int.parse::<u128>().map_err(|_| too_big())? * scale;
    let mut place = scale;
    for d in frac.bytes() {
        if place % 10 != 0 {
            return Err(format!("`{text}` is finer than one nanosecond"));
        }
        place /= 10;
        ns += (d - b'0') as u128 * place;
    }
    Nanos::try_from(ns).map_err(|_| too_big())
}

/// Shortest exact spelling of a duration.
pub fn format_time(ns: Nanos) -> String {
    for (suffix, scale) in [("s", NS_PER_S), ("ms", NS_PER_MS), ("us", NS_PER_US)] {
        if ns != 0 && ns.is_multiple_of(scale) {
            return format!("{}{suffix}", ns / scale);
        }
    }
    format!("{ns}ns")
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse().map_err(|_| bad(key, format!("`{v}` is not a valid integer")))
}

fn parse_seconds(key: &str, v: &str, allow_inf: bool) -> Result<f64, Error> {
    if allow_inf && v == "inf" {
        return Ok(f64::INFINITY);
    }
    let ns = parse_time(v).map_err(|m| bad(key, m))?;
    if ns == 0 {
        return Err(bad(key, "must be positive"));
    }
    Ok(ns as f64 / NS_PER_S as f64)
}

fn format_seconds(s: f64) -> String {
    if s.is_infinite() {
        "inf".into()
    } else {
        format_time((s * NS_PER_S as f64).round() as Nanos)
    }
}

pub fn parse_scheme(v: &str) -> Result<Scheme, Error> {
    v.parse()
        .map_err(|_| bad("scheme", format!("`{v}` is not one of a2p, edca, ofdma, ofdma-edca")))
}

fn removal_name(r: RemovalPolicy) -> &'static str {
    match r {
        RemovalPolicy::AfterPostExpiryPoll => "after-empty-poll",
        RemovalPolicy::OnExpiry => "on-expiry",
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses a whole file on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Syntax {
                    line: i + 1,
                    msg: format!("`{key}` assigned twice"),
                });
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one assignment. Per-key range checks happen here; checks that
    /// involve several keys wait for [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), Error> {
        let key = canonical_key(key).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        let s = &mut self.sim;
        match key {
            "scheme" => s.scheme = parse_scheme(v)?,
            "seed" => s.seed = parse_int(key, v)?,
            "duration" => {
                s.duration = parse_time(v).map_err(|m| bad(key, m))?;
                if s.duration == 0 {
                    return Err(bad(key, "must be positive"));
                }
            }
            "n_total" => s.n_total = parse_int(key, v)?,
            "n_initial" => s.n_initial = parse_int(key, v)?,
            "n_joining" => s.n_joining = parse_int(key, v)?,
            "bandwidth" => {
                let mhz: u32 = parse_int(key, v.strip_suffix("MHz").unwrap_or(v).trim())?;
                if !matches!(mhz, 20 | 40 | 80 | 160) {
                    return Err(bad(key, format!("{mhz} MHz is not one of 20, 40, 80, 160")));
                }
                s.phy.bandwidth_mhz = mhz;
            }
            "mcs" => {
                let mcs: u8 = parse_int(key, v)?;
                if mcs > 11 {
                    return Err(bad(key, format!("{mcs} is outside 0..=11")));
                }
                s.phy.mcs = mcs;
            }
            "gi" => {
                let gi = parse_time(v).map_err(|m| bad(key, m))?;
                if !matches!(gi, 800 | 1600 | 3200) {
                    return Err(bad(key, "guard interval must be 0.8us, 1.6us or 3.2us"));
                }
                s.phy.guard_interval = gi;
            }
            "ru_tones" => s.phy.ru_tones = parse_int(key, v)?,
            "max_users" => {
                s.max_users = match v {
                    "auto" => None,
                    _ => Some(parse_int(key, v)?),
                }
            }
            "sifs" => s.phy.sifs = parse_time(v).map_err(|m| bad(key, m))?,
            "slot" => s.phy.slot = parse_time(v).map_err(|m| bad(key, m))?,
            "aifsn" | "cw_min" | "cw_max" | "retry_limit" => {
                let mut e = s.sta_edca;
                match key {
                    "aifsn" => e.aifsn = parse_int(key, v)?,
                    "cw_min" => e.cw_min = parse_int(key, v)?,
                    "cw_max" => e.cw_max = parse_int(key, v)?,
                    _ => e.retry_limit = parse_int(key, v)?,
                }
                // The AP contends with the same access category as stations.
                s.sta_edca = e;
                s.ap_edca = e;
            }
            "txop" => s.txop = parse_time(v).map_err(|m| bad(key, m))?,
            "ari" => s.ari = parse_time(v).map_err(|m| bad(key, m))?,
            "mu_edca_timer" => s.mu_edca_timer = parse_time(v).map_err(|m| bad(key, m))?,
            "ofdma_mu_edca_timer" => s.ofdma_mu_edca_timer = parse_time(v).map_err(|m| bad(key, m))?,
            "removal" => {
                s.removal = match v {
                    "after-empty-poll" => RemovalPolicy::AfterPostExpiryPoll,
                    "on-expiry" => RemovalPolicy::OnExpiry,
                    _ => return Err(bad(key, format!("`{v}` is not after-empty-poll or on-expiry"))),
                }
            }
            "interval" => s.audio.interval = parse_time(v).map_err(|m| bad(key, m))?,
            "gen_window" => s.audio.gen_window = parse_time(v).map_err(|m| bad(key, m))?,
            "ul_samples" => s.audio.ul_samples = parse_int(key, v)?,
            "ul_resolution" => s.audio.ul_resolution_bits = parse_int(key, v)?,
            "dl_samples" => s.audio.dl_samples = parse_int(key, v)?,
            "dl_resolution" => s.audio.dl_resolution_bits = parse_int(key, v)?,
            "header_bits" => s.audio.header_bits = parse_int(key, v)?,
            "mac_overhead" => s.frames.mac_overhead = parse_int(key, v)?,
            "tau_mean" => s.on_off.mean_s = parse_seconds(key, v, false)?,
            "tau_bound" => s.on_off.bound_s = parse_seconds(key, v, true)?,
            "trace" => {
                let level: u8 = parse_int(key, v)?;
                if level > 2 {
                    return Err(bad(key, "trace level is 0, 1 or 2"));
                }
                s.trace = TraceLevel::from_level(level);
            }
            _ => unreachable!("every canonical key is handled"),
        }
        self.overrides.insert(key);
        Ok(())
    }

    /// Sets the number of active stations (initial + joining).
    pub fn set_active(&mut self, active: usize) -> Result<(), Error> {
        let initial = self.sim.n_initial;
        if active < initial {
            return Err(bad(
                "n_joining",
                format!("{active} active stations is fewer than the {initial} initial ones"),
            ));
        }
        self.sim.n_joining = active - initial;
        self.overrides.insert("n_joining");
        Ok(())
    }

    /// Cross-key checks, with the diagnostic naming the key most likely at
    /// fault.
    pub fn validate(&self) -> Result<(), Error> {
        self.sim.validate().map(|_| ()).map_err(|e| {
            let key = match &e {
                ConfigError::UnsupportedBandwidth(_) => "bandwidth",
                ConfigError::UnsupportedRu { .. } => "ru_tones",
                ConfigError::McsOutOfRange(_) => "mcs",
                ConfigError::InvalidGuardInterval(_) => "gi",
                ConfigError::InvalidEdca(_) => "cw_min",
                ConfigError::InvalidTraffic(_) => "interval",
                ConfigError::TopologyOverAllocation { .. } => "n_joining",
                ConfigError::TxopInfeasible { .. } => "txop",
                ConfigError::Invalid(m) if m.contains("max_users") => "max_users",
                ConfigError::Invalid(m) if m.contains("MU-EDCA") => "mu_edca_timer",
                ConfigError::Invalid(m) if m.contains("n_total") => "n_total",
                ConfigError::Invalid(m) if m.contains("duration") => "duration",
                ConfigError::Invalid(_) => "config",
            };
            bad(key, e.to_string())
        })
    }

    fn value_of(&self, key: &str) -> String {
        let s = &self.sim;
        match key {
            "scheme" => s.scheme.name().into(),
            "seed" => s.seed.to_string(),
            "duration" => format_time(s.duration),
            "n_total" => s.n_total.to_string(),
            "n_initial" => s.n_initial.to_string(),
            "n_joining" => s.n_joining.to_string(),
            "bandwidth" => s.phy.bandwidth_mhz.to_string(),
            "mcs" => s.phy.mcs.to_string(),
            "gi" => format_time(s.phy.guard_interval),
            "ru_tones" => s.phy.ru_tones.to_string(),
            "max_users" => s.max_users.map_or("auto".into(), |m| m.to_string()),
            "sifs" => format_time(s.phy.sifs),
            "slot" => format_time(s.phy.slot),
            "aifsn" => s.sta_edca.aifsn.to_string(),
            "cw_min" => s.sta_edca.cw_min.to_string(),
            "cw_max" => s.sta_edca.cw_max.to_string(),
            "retry_limit" => s.sta_edca.retry_limit.to_string(),
            "txop" => format_time(s.txop),
            "ari" => format_time(s.ari),
            "mu_edca_timer" => format_time(s.mu_edca_timer),
            "ofdma_mu_edca_timer" => format_time(s.ofdma_mu_edca_timer),
            "removal" => removal_name(s.removal).into(),
            "interval" => format_time(s.audio.interval),
            "gen_window" => format_time(s.audio.gen_window),
            "ul_samples" => s.audio.ul_samples.to_string(),
            "ul_resolution" => s.audio.ul_resolution_bits.to_string(),
            "dl_samples" => s.audio.dl_samples.to_string(),
            "dl_resolution" => s.audio.dl_resolution_bits.to_string(),
            "header_bits" => s.audio.header_bits.to_string(),
            "mac_overhead" => s.frames.mac_overhead.to_string(),
            "tau_mean" => format_seconds(s.on_off.mean_s),
            "tau_bound" => format_seconds(s.on_off.bound_s),
            "trace" => (s.trace as u8).to_string(),
            _ => unreachable!(),
        }
    }

    /// Every key with its effective value, one per line; overridden keys
    /// are marked. Parsing the echo yields the same configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let mark = if self.overrides.contains(key) { "  # set" } else { "" };
            let _ = writeln!(out, "{key} = {}{mark}", self.value_of(key));
        }
        if let (Ok(ul), Ok(dl)) = (self.sim.audio.ul_packet_bytes(), self.sim.audio.dl_packet_bytes()) {
            let _ = writeln!(out, "# derived: ul_payload = {ul} B, dl_payload = {dl} B");
        }
        out
    }

    /// Hex prefix of the SHA-256 over every outcome-relevant key.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for key in KEYS.iter().filter(|k| !UNHASHED.contains(k)) {
            h.update(format!("{key}={}\n", self.value_of(key)).as_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
