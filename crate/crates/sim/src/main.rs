use std::path::{Path, PathBuf};
use std::process::ExitCode;

use a2p_core::metrics::aggregate;
use a2p_core::trace::TraceLevel;
use a2p_sim::config::{parse_scheme, parse_time};
use a2p_sim::{output, run_one, run_sweep_to_dir, sweep, Error, RunConfig, SweepSpec};
use clap::Parser;

/// Simulate one 802.11ax BSS carrying teleconferencing audio under A2P
/// polling or one of the baseline access schemes.
#[derive(Parser, Debug)]
#[command(name = "a2p-sim", version)]
struct Cli {
    /// a2p, edca, ofdma or ofdma-edca.
    #[arg(long, conflicts_with = "sweep")]
    scheme: Option<String>,
    /// Active stations: the initial set plus joining ones.
    #[arg(long, conflicts_with = "sweep")]
    active: Option<usize>,
    #[arg(long, conflicts_with = "sweep")]
    seed: Option<u64>,
    /// Simulated time; plain numbers are seconds, suffixes ns/us/ms/s work too.
    #[arg(long)]
    duration: Option<String>,
    /// key = value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory. Required for sweeps.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep file (schemes, active_counts, seeds); `default` for the
    /// standard grid.
    #[arg(long)]
    sweep: Option<String>,
    /// 0: summaries only, 1: per-packet ledger, 2: also MAC event logs.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    trace: Option<u8>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.scheme {
        parse_scheme(s)?;
        cfg.set("scheme", s)?;
    }
    if let Some(k) = cli.seed {
        cfg.set("seed", &k.to_string())?;
    }
    if let Some(d) = &cli.duration {
        let d = if parse_time(d).is_err() && d.parse::<f64>().is_ok() {
            format!("{d}s")
        } else {
            d.clone()
        };
        cfg.set("duration", &d)?;
    }
    if let Some(t) = cli.trace {
        cfg.set("trace", &t.to_string())?;
    }
    if let Some(n) = cli.active {
        cfg.set_active(n)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn single(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Error> {
    let rec = run_one(cfg)?;
    let s = &rec.row.summary;
    println!(
        "{} active={} seed={} hash={}",
        s.scheme, s.active_count, s.seed, rec.row.config_hash
    );
    println!(
        "generated={} on_time={} outdated={} dropped={} in_flight={} loss={:.6}",
        s.counts.generated, s.counts.on_time, s.counts.outdated, s.counts.dropped, s.counts.in_flight, s.loss_ratio
    );
    if let Some(e) = &s.e2e {
        println!(
            "e2e_ms median={:.3} q1={:.3} q3={:.3} whisker_high={:.3} max={:.3}",
            e.median as f64 / 1e6,
            e.q1 as f64 / 1e6,
            e.q3 as f64 / 1e6,
            e.whisker_high as f64 / 1e6,
            e.max as f64 / 1e6
        );
    }
    if let Some(w) = s.wakeup_mean {
        println!("wakeup_mean_ms={:.3} over {} on-periods", w / 1e6, s.wakeup_count);
    }
    let Some(dir) = out else { return Ok(()) };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    sweep::write_config_echo(dir, cfg)?;
    output::create_summary(&dir.join("summary.csv"))?.write_row(rec.row.fields())?;
    output::write_aggregate(&dir.join("aggregate.csv"), &aggregate(std::slice::from_ref(s)))?;
    if cfg.sim.trace >= TraceLevel::Packets {
        output::write_packets(
            &mut output::create_packets(&dir.join("packets.csv"))?,
            s,
            &rec.output.packets,
        )?;
    }
    if cfg.sim.trace >= TraceLevel::Events {
        output::write_trace(&dir.join("trace.log"), &rec.output.trace)?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    let cfg = build_config(&cli)?;
    let Some(sweep_arg) = &cli.sweep else {
        return single(&cfg, cli.out.as_deref());
    };
    let spec = match sweep_arg.as_str() {
        "default" => SweepSpec::default(),
        path => SweepSpec::from_file(Path::new(path))?,
    };
    let dir = cli.out.as_deref().ok_or_else(|| Error::Value {
        key: "out".into(),
        msg: "--sweep needs an output directory".into(),
    })?;
    if let Some(n) = cli.jobs {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let rows = run_sweep_to_dir(&cfg, &spec, dir)?;
    eprintln!("{} runs written to {}", rows.len(), dir.join("summary.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("a2p-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
