//! Scheme × active-count × seed grids, run in parallel and emitted in
//! sorted order.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc;

use a2p_core::metrics::aggregate;
use a2p_core::trace::TraceLevel;
use a2p_core::{RunOutput, Scheme};
use rayon::prelude::*;

use crate::config::{parse_scheme, RunConfig};
use crate::output::{self, SummaryRow};
use crate::Error;

pub const DEFAULT_COUNTS: [u32; 6] = [8, 13, 19, 24, 30, 36];
pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSpec {
    pub schemes: Vec<Scheme>,
    pub active_counts: Vec<u32>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            schemes: Scheme::ALL.to_vec(),
            active_counts: DEFAULT_COUNTS.to_vec(),
            seeds: (1..=DEFAULT_SEEDS).collect(),
        }
    }
}

fn sweep_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Value {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl SweepSpec {
    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `schemes`, `active_counts` and `seeds` as comma lists; seeds also
    /// accept an inclusive range `a..b`. Missing keys keep the defaults.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut spec = SweepSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, v) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "schemes" => spec.schemes = split_list(v).map(parse_scheme).collect::<Result<_, _>>()?,
                "active_counts" => {
                    spec.active_counts = split_list(v)
                        .map(|n| {
                            n.parse()
                                .map_err(|_| sweep_err(key, format!("`{n}` is not an integer")))
                        })
                        .collect::<Result<_, _>>()?
                }
                "seeds" => {
                    spec.seeds = match v.split_once("..") {
                        Some((a, b)) => {
                            let a: u64 = a
                                .trim()
                                .parse()
                                .map_err(|_| sweep_err(key, format!("bad range `{v}`")))?;
                            let b: u64 = b
                                .trim()
                                .parse()
                                .map_err(|_| sweep_err(key, format!("bad range `{v}`")))?;
                            (a..=b).collect()
                        }
                        None => split_list(v)
                            .map(|n| {
                                n.parse()
                                    .map_err(|_| sweep_err(key, format!("`{n}` is not an integer")))
                            })
                            .collect::<Result<_, _>>()?,
                    }
                }
                _ => return Err(Error::UnknownKey(key.to_string())),
            }
        }
        Ok(spec)
    }

    pub fn validate(&self, base: &RunConfig) -> Result<(), Error> {
        if self.schemes.is_empty() || self.active_counts.is_empty() || self.seeds.is_empty() {
            return Err(sweep_err(
                "sweep",
                "schemes, active_counts and seeds must all be non-empty",
            ));
        }
        let initial = base.sim.n_initial as u32;
        if let Some(&n) = self.active_counts.iter().find(|&&n| n < initial) {
            return Err(sweep_err(
                "active_counts",
                format!("{n} is below the {initial} initially active stations"),
            ));
        }
        Ok(())
    }

    /// Every grid point, sorted by (scheme, count, seed), duplicates removed.
    pub fn jobs(&self) -> Vec<(Scheme, u32, u64)> {
        let mut jobs: Vec<_> = self
            .schemes
            .iter()
            .flat_map(|&s| {
                self.active_counts
                    .iter()
                    .flat_map(move |&n| self.seeds.iter().map(move |&k| (s, n, k)))
            })
            .collect();
        jobs.sort();
        jobs.dedup();
        jobs
    }
}

/// Result of one grid point.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub row: SummaryRow,
    pub output: RunOutput,
}

/// Configuration of one grid point derived from the base.
pub fn job_config(base: &RunConfig, scheme: Scheme, active: u32, seed: u64) -> Result<RunConfig, Error> {
    let mut cfg = base.clone();
    cfg.sim.scheme = scheme;
    cfg.sim.seed = seed;
    cfg.overrides.extend(["scheme", "seed"]);
    cfg.set_active(active as usize)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn run_one(cfg: &RunConfig) -> Result<RunRecord, Error> {
    let output = a2p_core::run(&cfg.sim)?;
    Ok(RunRecord {
        row: SummaryRow {
            summary: output.summary.clone(),
            config_hash: cfg.hash(),
        },
        output,
    })
}

/// Runs the grid on the rayon pool and hands records to `sink` in job
/// order as soon as each prefix is complete. On the first failure no new
/// runs start, every finished record still reaches `sink` (in order), and
/// the error is returned.
pub fn run_sweep<F>(base: &RunConfig, spec: &SweepSpec, mut sink: F) -> Result<usize, Error>
where
    F: FnMut(&RunRecord) -> Result<(), Error>,
{
    spec.validate(base)?;
    let configs = spec
        .jobs()
        .into_iter()
        .map(|(s, n, k)| job_config(base, s, n, k))
        .collect::<Result<Vec<_>, _>>()?;

    let (tx, rx) = mpsc::channel();
    let mut done = 0;
    let mut run_failure = None;
    let mut sink_failure = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            let _ = configs.par_iter().enumerate().try_for_each_with(tx, |tx, (i, cfg)| {
                let r = run_one(cfg);
                let ok = r.is_ok();
                let _ = tx.send((i, r));
                if ok {
                    Ok(())
                } else {
                    Err(())
                }
            });
        });

        let mut pending = BTreeMap::new();
        let mut next = 0;
        let mut emit = |rec: &RunRecord, failed: &mut Option<Error>| {
            if failed.is_none() {
                match sink(rec) {
                    Ok(()) => done += 1,
                    Err(e) => *failed = Some(e),
                }
            }
        };
        for (i, r) in rx {
            match r {
                Ok(rec) => {
                    pending.insert(i, rec);
                }
                Err(e) => {
                    run_failure.get_or_insert(e);
                }
            }
            while let Some(rec) = pending.remove(&next) {
                emit(&rec, &mut sink_failure);
                next += 1;
            }
        }
        // Runs that finished beyond the gap left by a failed one.
        for rec in pending.into_values() {
            emit(&rec, &mut sink_failure);
        }
    });
    match sink_failure.or(run_failure) {
        Some(e) => Err(e),
        None => Ok(done),
    }
}

/// Runs a sweep into `dir`: summary.csv, aggregate.csv, config.txt and,
/// with tracing on, packets.csv and one trace log per run.
pub fn run_sweep_to_dir(base: &RunConfig, spec: &SweepSpec, dir: &Path) -> Result<Vec<SummaryRow>, Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_config_echo(dir, base)?;
    let mut summary = output::create_summary(&dir.join("summary.csv"))?;
    let trace = base.sim.trace;
    let mut packets = match trace {
        TraceLevel::Off => None,
        _ => Some(output::create_packets(&dir.join("packets.csv"))?),
    };
    let mut rows = Vec::new();
    let result = run_sweep(base, spec, |rec| {
        summary.write_row(rec.row.fields())?;
        if let Some(p) = packets.as_mut() {
            output::write_packets(p, &rec.row.summary, &rec.output.packets)?;
        }
        if trace >= TraceLevel::Events {
            let s = &rec.row.summary;
            let name = format!("trace-{}-{}-{}.log", s.scheme.name(), s.active_count, s.seed);
            output::write_trace(&dir.join(name), &rec.output.trace)?;
        }
        rows.push(rec.row.clone());
        Ok(())
    });
    // aggregate.csv only describes complete sweeps.
    result?;
    let summaries: Vec<_> = rows.iter().map(|r| r.summary.clone()).collect();
    output::write_aggregate(&dir.join("aggregate.csv"), &aggregate(&summaries))?;
    Ok(rows)
}

pub fn write_config_echo(dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    let path = dir.join("config.txt");
    let text = format!("# a2p-sim configuration, hash {}\n{}", cfg.hash(), cfg.echo());
    std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
}
