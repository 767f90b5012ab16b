//! CSV files written by runs and sweeps.
//!
//! Each file starts with a `#` line naming its schema version. Times are
//! integer nanoseconds; ratios and means are printed with the shortest
//! representation that parses back to the same `f64`. Absent statistics
//! are empty cells.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use a2p_core::metrics::{Aggregate, DelayStats, DispositionCounts};
use a2p_core::trace::TraceRecord;
use a2p_core::traffic::UlPacket;
use a2p_core::RunSummary;

use crate::config::parse_scheme;
use crate::Error;

pub const SUMMARY_HEADER: &str = "# a2p-sim summary v1; wakeup measured to the first successful reception";
pub const AGGREGATE_HEADER: &str = "# a2p-sim aggregate v1; e2e columns are seed averages of per-run statistics";
pub const PACKETS_HEADER: &str = "# a2p-sim packets v1";

pub const SUMMARY_COLUMNS: &[&str] = &[
    "scheme",
    "active_count",
    "seed",
    "config_hash",
    "generated",
    "on_time",
    "outdated",
    "dropped",
    "in_flight",
    "loss_ratio",
    "e2e_count",
    "e2e_mean_ns",
    "e2e_median_ns",
    "e2e_q1_ns",
    "e2e_q3_ns",
    "e2e_whisker_low_ns",
    "e2e_whisker_high_ns",
    "e2e_outliers",
    "e2e_max_ns",
    "wakeup_count",
    "wakeup_mean_ns",
    "ul_exchanges",
    "max_ul_exchange_ns",
    "dl_broadcasts",
    "collisions",
];

const AGGREGATE_COLUMNS: &[&str] = &[
    "scheme",
    "active_count",
    "runs",
    "loss_mean",
    "loss_median",
    "loss_p99",
    "e2e_median_ns",
    "e2e_whisker_high_ns",
    "e2e_max_ns",
    "wakeup_mean_ns",
];

const PACKET_COLUMNS: &[&str] = &[
    "scheme",
    "active_count",
    "seed",
    "sta",
    "window",
    "on_period",
    "gen_ns",
    "ap_rx_ns",
    "size_bytes",
    "disposition",
];

/// One summary.csv row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub summary: RunSummary,
    pub config_hash: String,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl SummaryRow {
    pub fn fields(&self) -> Vec<String> {
        let s = &self.summary;
        let c = &s.counts;
        let e = s.e2e.as_ref();
        vec![
            s.scheme.name().to_string(),
            s.active_count.to_string(),
            s.seed.to_string(),
            self.config_hash.clone(),
            c.generated.to_string(),
            c.on_time.to_string(),
            c.outdated.to_string(),
            c.dropped.to_string(),
            c.in_flight.to_string(),
            s.loss_ratio.to_string(),
            opt(e.map(|e| e.count)),
            opt(e.map(|e| e.mean)),
            opt(e.map(|e| e.median)),
            opt(e.map(|e| e.q1)),
            opt(e.map(|e| e.q3)),
            opt(e.map(|e| e.whisker_low)),
            opt(e.map(|e| e.whisker_high)),
            opt(e.map(|e| e.outliers)),
            opt(e.map(|e| e.max)),
            s.wakeup_count.to_string(),
            opt(s.wakeup_mean),
            s.ul_exchanges.to_string(),
            s.max_ul_exchange.to_string(),
            s.dl_broadcasts.to_string(),
            s.collisions.to_string(),
        ]
    }

    fn from_record(r: &csv::StringRecord, line: u64) -> Result<Self, Error> {
        if r.len() != SUMMARY_COLUMNS.len() {
            return Err(Error::Format {
                line,
                msg: format!("expected {} fields, found {}", SUMMARY_COLUMNS.len(), r.len()),
            });
        }
        let field = |i: usize| &r[i];
        let num = |i: usize| -> Result<u64, Error> {
            field(i).parse().map_err(|_| Error::Format {
                line,
                msg: format!("{}: `{}` is not an integer", SUMMARY_COLUMNS[i], field(i)),
            })
        };
        let real = |i: usize| -> Result<f64, Error> {
            field(i).parse().map_err(|_| Error::Format {
                line,
                msg: format!("{}: `{}` is not a number", SUMMARY_COLUMNS[i], field(i)),
            })
        };
        let present = |i: usize| !field(i).is_empty();
        let e2e = if present(10) {
            Some(DelayStats {
                count: num(10)?,
                mean: real(11)?,
                median: num(12)?,
                q1: num(13)?,
                q3: num(14)?,
                whisker_low: num(15)?,
                whisker_high: num(16)?,
                outliers: num(17)?,
                max: num(18)?,
            })
        } else {
            None
        };
        let scheme = parse_scheme(field(0)).map_err(|e| Error::Format {
            line,
            msg: e.to_string(),
        })?;
        Ok(SummaryRow {
            summary: RunSummary {
                scheme,
                active_count: num(1)? as u32,
                seed: num(2)?,
                counts: DispositionCounts {
                    generated: num(4)?,
                    on_time: num(5)?,
                    outdated: num(6)?,
                    dropped: num(7)?,
                    in_flight: num(8)?,
                },
                loss_ratio: real(9)?,
                e2e,
                wakeup_count: num(19)?,
                wakeup_mean: if present(20) { Some(real(20)?) } else { None },
                ul_exchanges: num(21)?,
                max_ul_exchange: num(22)?,
                dl_broadcasts: num(23)?,
                collisions: num(24)?,
            },
            config_hash: field(3).to_string(),
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Encodes one CSV record, newline included.
fn encode<I, S>(fields: I) -> Vec<u8>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    w.into_inner().expect("flushing to memory")
}

/// A CSV file that receives whole rows with a single write each, so a
/// reader never sees half a row even if the writer is killed.
pub struct RowFile {
    file: File,
    path: PathBuf,
}

impl RowFile {
    pub fn create(path: &Path, header: &str, columns: &[&str]) -> Result<Self, Error> {
        let mut file = File::create(path).map_err(io_err(path))?;
        let mut head = format!("{header}\n").into_bytes();
        head.extend(encode(columns));
        file.write_all(&head).map_err(io_err(path))?;
        Ok(RowFile {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn write_row<I, S>(&mut self, fields: I) -> Result<(), Error>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let bytes = encode(fields);
        self.write_bytes(&bytes)
    }

    fn write_bytes(&mut self, bytes: &[u8]) -> Result<(), Error> {
        self.file.write_all(bytes).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }
}

pub fn create_summary(path: &Path) -> Result<RowFile, Error> {
    RowFile::create(path, SUMMARY_HEADER, SUMMARY_COLUMNS)
}

pub fn create_packets(path: &Path) -> Result<RowFile, Error> {
    RowFile::create(path, PACKETS_HEADER, PACKET_COLUMNS)
}

/// Appends the ledger of one run in one write.
pub fn write_packets(file: &mut RowFile, summary: &RunSummary, packets: &[UlPacket]) -> Result<(), Error> {
    let mut bytes = Vec::new();
    for p in packets {
        bytes.extend(encode([
            summary.scheme.name().to_string(),
            summary.active_count.to_string(),
            summary.seed.to_string(),
            p.sta.to_string(),
            p.window.to_string(),
            p.on_period.to_string(),
            p.gen_time.as_nanos().to_string(),
            opt(p.ap_rx.map(|t| t.as_nanos())),
            p.size_bytes.to_string(),
            p.disposition.name().to_string(),
        ]));
    }
    file.write_bytes(&bytes)
}

pub fn write_aggregate(path: &Path, cells: &[Aggregate]) -> Result<(), Error> {
    let mut f = RowFile::create(path, AGGREGATE_HEADER, AGGREGATE_COLUMNS)?;
    for a in cells {
        f.write_row([
            a.scheme.name().to_string(),
            a.active_count.to_string(),
            a.runs.to_string(),
            a.loss_mean.to_string(),
            a.loss_median.to_string(),
            a.loss_p99.to_string(),
            opt(a.e2e_median),
            opt(a.e2e_whisker_high),
            opt(a.e2e_max),
            opt(a.wakeup_mean),
        ])?;
    }
    Ok(())
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), Error> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Reads a summary.csv, checking the schema line and the column names.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, Error> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    if first.trim_end() != SUMMARY_HEADER {
        return Err(Error::Format {
            line: 1,
            msg: format!("unsupported schema line `{}`", first.trim_end()),
        });
    }
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.iter().ne(SUMMARY_COLUMNS.iter().copied()) {
        return Err(Error::Format {
            line: 2,
            msg: "column names do not match the v1 schema".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        rows.push(SummaryRow::from_record(&rec?, i as u64 + 3)?);
    }
    Ok(rows)
}
