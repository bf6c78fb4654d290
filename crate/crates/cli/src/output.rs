//! CSV files: sweep table, timing table and pulse traces.
//!
//! Every file starts with `# leakfree-cli <version> config-sha256=<hex>`,
//! followed by further `#` comment lines and an RFC-4180 table whose header
//! names the unit of each column in brackets. Numbers carry 17 significant
//! digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::runner::{PulseTrace, Schema, SweepRecord};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum OutputError {
    Io(std::io::Error),
    Csv(csv::Error),
    Format(String),
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutputError::Io(e) => write!(f, "{e}"),
            OutputError::Csv(e) => write!(f, "{e}"),
            OutputError::Format(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for OutputError {}

impl From<std::io::Error> for OutputError {
    fn from(e: std::io::Error) -> Self {
        OutputError::Io(e)
    }
}

impl From<csv::Error> for OutputError {
    fn from(e: csv::Error) -> Self {
        OutputError::Csv(e)
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(s: &str) -> Result<f64, OutputError> {
    s.trim().parse().map_err(|_| OutputError::Format(format!("not a number: {s:?}")))
}

fn banner(hash: &str) -> String {
    format!("# leakfree-cli {VERSION} config-sha256={hash}")
}

fn unit_col(name: &str, unit: &str) -> String {
    format!("{name}[{unit}]")
}

fn strip_unit(col: &str) -> &str {
    col.split_once('[').map_or(col, |(n, _)| n)
}

pub fn sweep_path(dir: &Path, cfg: &RunConfig) -> PathBuf {
    dir.join(format!("{}.csv", cfg.output.name))
}

pub fn timing_path(dir: &Path, cfg: &RunConfig) -> PathBuf {
    dir.join(format!("{}_timing.csv", cfg.output.name))
}

pub fn pulses_path(dir: &Path, cfg: &RunConfig, index: usize) -> PathBuf {
    dir.join(format!("{}_pulses_{index}.csv", cfg.output.name))
}

fn table<W: Write>(out: W, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the sweep table and the timing table.
pub fn write_sweep(dir: &Path, cfg: &RunConfig, schema: &Schema, records: &[SweepRecord]) -> Result<(PathBuf, PathBuf), OutputError> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let e = schema.energy_unit();
    let mut header = vec![unit_col(&schema.parameter, schema.parameter_unit()), "status".into(), unit_col("certificate", "1")];
    for s in &schema.series {
        header.push(unit_col(&format!("infidelity_{}", s.name), "1"));
    }
    for s in &schema.series {
        for &ch in &schema.channels {
            header.push(unit_col(&format!("amp_{}_{}", s.name, schema.channel_name(ch)), e));
        }
    }
    let path = sweep_path(dir, cfg);
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(out, "{}", banner(&hash))?;
    writeln!(out, "# model={} parameter={} energy-unit={e} time-unit={}", schema.model.name(), schema.parameter, schema.time_unit())?;
    let rows = records.iter().map(|r| {
        let mut row = vec![fmt_num(r.param), r.status.clone(), fmt_num(r.certificate)];
        row.extend(r.infidelity.iter().map(|&x| fmt_num(x)));
        row.extend(r.amplitude.iter().map(|&x| fmt_num(x)));
        row
    });
    table(&mut out, header, rows)?;
    out.flush()?;

    let tpath = timing_path(dir, cfg);
    let mut out = BufWriter::new(File::create(&tpath)?);
    writeln!(out, "{}", banner(&hash))?;
    let header = vec![unit_col(&schema.parameter, schema.parameter_unit()), unit_col("wall_time", "s")];
    table(&mut out, header, records.iter().map(|r| vec![fmt_num(r.param), fmt_num(r.wall_time)]))?;
    out.flush()?;
    Ok((path, tpath))
}

/// Parsed sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub version: String,
    pub hash: String,
    pub columns: Vec<String>,
    pub series: Vec<String>,
    pub records: Vec<SweepRecord>,
}

fn read_banner(path: &Path) -> Result<(String, String), OutputError> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    let mut parts = line.trim().split_whitespace();
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("#"), Some("leakfree-cli"), Some(v), Some(h)) if h.starts_with("config-sha256=") => {
            Ok((v.to_string(), h["config-sha256=".len()..].to_string()))
        }
        _ => Err(OutputError::Format(format!("{}: missing banner line", path.display()))),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>, OutputError> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

/// Read a sweep table; wall times are taken from `timing` when given and
/// are zero otherwise.
pub fn read_sweep(path: &Path, timing: Option<&Path>) -> Result<SweepFile, OutputError> {
    let (version, hash) = read_banner(path)?;
    let mut rdr = reader(path)?;
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let series: Vec<String> = columns.iter().filter_map(|c| strip_unit(c).strip_prefix("infidelity_").map(str::to_string)).collect();
    let n_amp = columns.iter().filter(|c| c.starts_with("amp_")).count();
    if columns.len() != 3 + series.len() + n_amp {
        return Err(OutputError::Format(format!("{}: unexpected columns", path.display())));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let num = |k: usize| parse_num(&row[k]);
        let infidelity = (0..series.len()).map(|k| num(3 + k)).collect::<Result<_, _>>()?;
        let amplitude = (0..n_amp).map(|k| num(3 + series.len() + k)).collect::<Result<_, _>>()?;
        records.push(SweepRecord { param: num(0)?, status: row[1].to_string(), certificate: num(2)?, infidelity, amplitude, wall_time: 0.0 });
    }
    if let Some(tpath) = timing {
        let mut rdr = reader(tpath)?;
        let times: Vec<(f64, f64)> = rdr.records().map(|row| {
            let row = row?;
            Ok((parse_num(&row[0])?, parse_num(&row[1])?))
        }).collect::<Result<_, OutputError>>()?;
        if times.len() != records.len() {
            return Err(OutputError::Format(format!("{}: row count differs from sweep table", tpath.display())));
        }
        for (r, (p, t)) in records.iter_mut().zip(times) {
            if p.to_bits() != r.param.to_bits() {
                return Err(OutputError::Format(format!("{}: parameter mismatch at {p}", tpath.display())));
            }
            r.wall_time = t;
        }
    }
    Ok(SweepFile { version, hash, columns, series, records })
}

pub fn write_pulses(path: &Path, cfg: &RunConfig, schema: &Schema, trace: &PulseTrace) -> Result<(), OutputError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", banner(&cfg.hash()))?;
    writeln!(out, "# model={} {}={}", schema.model.name(), schema.parameter, fmt_num(trace.param))?;
    let mut header = vec![unit_col("t", schema.time_unit())];
    header.extend(trace.columns.iter().map(|c| unit_col(c, schema.energy_unit())));
    let rows = trace.times.iter().zip(&trace.rows).map(|(&t, row)| std::iter::once(fmt_num(t)).chain(row.iter().map(|&x| fmt_num(x))).collect());
    table(&mut out, header, rows)?;
    out.flush()?;
    Ok(())
}

/// Read a pulse trace back; the parameter value comes from the second
/// comment line.
pub fn read_pulses(path: &Path) -> Result<PulseTrace, OutputError> {
    let text = std::fs::read_to_string(path)?;
    let param = text
        .lines()
        .nth(1)
        .and_then(|l| l.rsplit_once('='))
        .ok_or_else(|| OutputError::Format(format!("{}: missing parameter line", path.display())))
        .and_then(|(_, v)| parse_num(v))?;
    let mut rdr = reader(path)?;
    let columns: Vec<String> = rdr.headers()?.iter().skip(1).map(|c| strip_unit(c).to_string()).collect();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        times.push(parse_num(&row[0])?);
        rows.push(row.iter().skip(1).map(parse_num).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(PulseTrace { param, times, columns, rows, errors: Vec::new() })
}

/// Index of a pulse column by name.
pub fn column(trace: &PulseTrace, name: &str) -> Option<usize> {
    trace.columns.iter().position(|c| c == name)
}
