//! CSV schemas. Every float cell holds the value rounded to nine significant
//! digits, so writing and parsing a table reproduces it exactly.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use risemf_core::PolicyKind;
use serde::de::{self, DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

/// A float rendered as `{:.8e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sci(f64);

impl Sci {
    pub fn new(x: f64) -> Self {
        Sci(format!("{x:.8e}").parse().expect("formatted float parses"))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Sci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.8e}", self.0)
    }
}

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sci {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse::<f64>().map(Sci).map_err(de::Error::custom)
    }
}

/// W/m² → dBm/m².
pub fn dbm_per_m2(w_per_m2: f64) -> f64 {
    10.0 * (w_per_m2 * 1e3).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub policy: PolicyKind,
    pub v: Sci,
    pub avg_emfe_w_m2: Sci,
    pub avg_emfe_dbm_m2: Sci,
    pub avg_delay_s: Sci,
    pub avg_rate_bps: Sci,
    pub avg_power_w: Sci,
    pub avg_local_bits: Sci,
    pub avg_remote_bits: Sci,
    pub stable: bool,
    pub drift_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVRow {
    pub v: Sci,
    pub seed: u64,
    pub avg_emfe_w_m2: Sci,
    pub avg_delay_s: Sci,
    pub avg_rate_bps: Sci,
    pub avg_power_w: Sci,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeRow {
    pub distance_m: Sci,
    pub policy: PolicyKind,
    pub v_star: Sci,
    pub avg_emfe_w_m2: Sci,
    pub avg_emfe_dbm_m2: Sci,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRow {
    pub arrival_bps: Sci,
    pub policy: PolicyKind,
    pub avg_emfe_dbm_m2: Sci,
    /// Empty for every policy except the RIS-aided search.
    pub gain_db_vs_no_ris: Option<Sci>,
}

/// Writes `# `-prefixed comment lines, the header row, then `rows`.
pub fn write_csv<T: Serialize>(path: &Path, comments: &[String], rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        return Err(CliError::usage(format!("refusing to write empty table `{}`", path.display())));
    }
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}").expect("write to Vec");
    }
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| CliError::io("csv", e))?;
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(format!("writing `{}`", path.display()), e))
}

/// Reads a file written by [`write_csv`]: comment lines without their `# `,
/// and the typed rows.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(Vec<String>, Vec<T>)> {
    let open = || File::open(path).map_err(|e| CliError::io(format!("reading `{}`", path.display()), e));
    let comments = BufReader::new(open()?)
        .lines()
        .map_while(|l| l.ok())
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start().to_string())
        .collect();
    let rows = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(open()?)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((comments, rows))
}
