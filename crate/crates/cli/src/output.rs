//! Result serialization: the rejection-rate CSV, the text table and the
//! run manifest.

use std::fmt::Write as _;

use mvgls::simulate::Diagnostics;
use mvgls::{RejectionTable, TestName, TestRow};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Preset, SimulateSettings};
use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 10] = ["case", "N", "k", "T", "test", "level", "rate", "reps", "failures", "seed"];

/// Floats with 17 significant digits so they parse back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub case: String,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub test: TestName,
    pub level: f64,
    pub rate: f64,
    pub reps: usize,
    pub failures: usize,
    pub seed: u64,
}

pub fn records(tables: &[RejectionTable]) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for table in tables {
        for row in &table.rows {
            for (i, &level) in table.levels.iter().enumerate() {
                out.push(ResultRecord {
                    case: table.case.clone(),
                    n: table.n,
                    k: table.k,
                    t: table.t,
                    test: row.test,
                    level,
                    rate: row.rate(i),
                    reps: table.reps,
                    failures: row.failures,
                    seed: table.seed,
                });
            }
        }
    }
    out
}

pub fn write_results_csv<W: std::io::Write>(out: W, tables: &[RejectionTable]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| CliError::Input(format!("writing results: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records(tables) {
        w.write_record([
            r.case,
            r.n.to_string(),
            r.k.to_string(),
            r.t.to_string(),
            r.test.to_string(),
            fmt_f64(r.level),
            fmt_f64(r.rate),
            r.reps.to_string(),
            r.failures.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Input(format!("writing results: {e}")))
}

pub fn parse_results_csv(bytes: &[u8]) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header = reader.headers().map_err(|e| CliError::Input(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::Input("results CSV has an unexpected header".into()));
    }
    let bad = |line: usize, what: &str| CliError::Input(format!("results CSV row {line}: bad {what}"));
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(e.to_string()))?;
        let line = i + 2;
        out.push(ResultRecord {
            case: rec[0].to_string(),
            n: rec[1].parse().map_err(|_| bad(line, "N"))?,
            k: rec[2].parse().map_err(|_| bad(line, "k"))?,
            t: rec[3].parse().map_err(|_| bad(line, "T"))?,
            test: TestName::parse(&rec[4]).ok_or_else(|| bad(line, "test"))?,
            level: rec[5].parse().map_err(|_| bad(line, "level"))?,
            rate: rec[6].parse().map_err(|_| bad(line, "rate"))?,
            reps: rec[7].parse().map_err(|_| bad(line, "reps"))?,
            failures: rec[8].parse().map_err(|_| bad(line, "failures"))?,
            seed: rec[9].parse().map_err(|_| bad(line, "seed"))?,
        });
    }
    Ok(out)
}

/// Rebuilds rejection tables from CSV records. Rejection counts are
/// recovered as `rate · (reps − failures)`; diagnostics are not stored in
/// the CSV and come back empty.
pub fn tables_from_records(records: &[ResultRecord]) -> Result<Vec<RejectionTable>> {
    let mut tables: Vec<RejectionTable> = Vec::new();
    for r in records {
        let pos = tables
            .iter()
            .position(|t| t.case == r.case && t.n == r.n && t.k == r.k && t.t == r.t && t.seed == r.seed);
        let table = match pos {
            Some(p) => &mut tables[p],
            None => {
                tables.push(RejectionTable {
                    case: r.case.clone(),
                    n: r.n,
                    k: r.k,
                    t: r.t,
                    seed: r.seed,
                    reps: r.reps,
                    levels: Vec::new(),
                    rows: Vec::new(),
                    diagnostics: Diagnostics::default(),
                });
                tables.last_mut().expect("just pushed")
            }
        };
        let level_idx = match table.levels.iter().position(|l| *l == r.level) {
            Some(i) => i,
            None => {
                table.levels.push(r.level);
                table.levels.len() - 1
            }
        };
        let successes = r.reps.checked_sub(r.failures).ok_or_else(|| {
            CliError::Input(format!("failures exceed reps for {} in cell N{}K{} T={}", r.test, r.n, r.k, r.t))
        })?;
        let row = match table.rows.iter().position(|row| row.test == r.test) {
            Some(i) => &mut table.rows[i],
            None => {
                table.rows.push(TestRow {
                    test: r.test,
                    rejections: Vec::new(),
                    successes,
                    failures: r.failures,
                });
                table.rows.last_mut().expect("just pushed")
            }
        };
        if row.rejections.len() <= level_idx {
            row.rejections.resize(level_idx + 1, 0);
        }
        row.rejections[level_idx] = if successes == 0 {
            0
        } else {
            (r.rate * successes as f64).round() as usize
        };
    }
    Ok(tables)
}

/// Text rendering with tests as column groups and levels 10/5/1% inside each.
pub fn render_tables(settings: &SimulateSettings, tables: &[(Preset, RejectionTable)]) -> String {
    let mut s = String::new();
    let level_names: Vec<String> = settings.levels.iter().map(|l| format!("{}%", l * 100.0)).collect();
    let group_width = level_names.len() * 7;
    for &preset in &settings.presets {
        let _ = writeln!(
            s,
            "Rejection rates under H0: alpha = 0 ({}), {} replications, seed {}",
            preset.title(),
            settings.reps,
            settings.seed
        );
        let _ = write!(s, "{:<8}{:>6}", "cell", "T");
        for test in TestName::ALL {
            let _ = write!(s, "  {:^w$}", test.as_str(), w = group_width);
        }
        s.push('\n');
        let _ = write!(s, "{:<8}{:>6}", "", "");
        for _ in TestName::ALL {
            s.push_str("  ");
            for name in &level_names {
                let _ = write!(s, "{name:>7}");
            }
        }
        s.push('\n');
        for cell in &settings.cells {
            for (p, table) in tables {
                if *p != preset || table.n != cell.n || table.k != cell.k {
                    continue;
                }
                let _ = write!(s, "{:<8}{:>6}", cell.to_string(), table.t);
                for test in TestName::ALL {
                    s.push_str("  ");
                    let row = table.row(test);
                    for i in 0..table.levels.len() {
                        let _ = write!(s, "{:>7.3}", row.rate(i));
                    }
                }
                s.push('\n');
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub seed: Option<u64>,
    /// SHA-256 over the canonical config echo and any input files.
    pub input_hash: String,
    pub wall_time_secs: f64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvgls::{run_experiment_with, Execution, SimConfig};

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, 0.046, 1.0 / 3.0, 0.0, 1.0, 2.0f64.sqrt()] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_round_trips_to_identical_tables() {
        let cfg = SimConfig {
            reps: 15,
            seed: 4,
            ..SimConfig::case_ii(3, 2, 150)
        };
        let table = run_experiment_with(&cfg, Execution::Sequential).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&mut buf, std::slice::from_ref(&table)).unwrap();
        let parsed = parse_results_csv(&buf).unwrap();
        assert_eq!(parsed, records(std::slice::from_ref(&table)));
        let rebuilt = tables_from_records(&parsed).unwrap();
        let expected = RejectionTable {
            diagnostics: Diagnostics::default(),
            ..table
        };
        assert_eq!(rebuilt, vec![expected]);
    }

    #[test]
    fn bad_csv_rejected() {
        assert!(parse_results_csv(b"a,b\n1,2\n").is_err());
        let mut text = CSV_HEADER.join(",");
        text.push_str("\nhetero,6,3,200,Nope,0.05,0.1,10,0,1\n");
        assert!(parse_results_csv(text.as_bytes()).is_err());
    }
}
