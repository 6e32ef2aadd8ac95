//! Regret tables and their CSV form.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub const TABLE_HEADER: [&str; 6] = [
    "trial",
    "ht_eval",
    "best_value",
    "simple_regret",
    "lt_count",
    "wall_ms",
];

/// One heavy evaluation of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretRow {
    pub trial: usize,
    /// 1-based heavy evaluation index.
    pub ht_eval: usize,
    /// Best heavy value so far, in the objective's own sense.
    pub best_value: f64,
    /// Gap to the known optimum; absent when the optimum is unknown.
    pub simple_regret: Option<f64>,
    /// Light evaluations made up to this heavy evaluation.
    pub lt_count: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegretTable {
    pub rows: Vec<RegretRow>,
}

impl RegretTable {
    /// The table as it reads back from CSV.
    pub fn rounded(&self) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .map(|r| RegretRow {
                    best_value: round9(r.best_value),
                    simple_regret: r.simple_regret.map(round9),
                    wall_ms: round9(r.wall_ms),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn trials(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.rows.iter().map(|r| r.trial).collect();
        t.dedup();
        t
    }

    /// Whether every trial's regret and best value never get worse.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            if a.trial != b.trial {
                return true;
            }
            let regret_ok = match (a.simple_regret, b.simple_regret) {
                (Some(x), Some(y)) => y <= x,
                _ => true,
            };
            b.ht_eval == a.ht_eval + 1 && regret_ok
        })
    }
}

/// Rounds to 9 significant digits.
pub fn round9(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Shortest text that reads back as `round9(v)`.
pub fn format9(v: f64) -> String {
    let r = round9(v);
    if r == 0.0 {
        return "0".into();
    }
    if !r.is_finite() {
        return if r.is_nan() {
            "nan".into()
        } else if r > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = r.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Writes rows through a temporary file in the destination directory and
/// renames it into place, so a failed write never leaves a partial file.
pub fn write_csv_atomic(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no file name"))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let file = File::create(&tmp)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let mut file = w.into_inner().map_err(|e| e.into_error())?;
        file.flush()?;
        file.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(|e| match e.kind() {
        io::ErrorKind::Other => e,
        _ => io::Error::new(e.kind(), format!("{}: {e}", path.display())),
    })
}

pub fn emit_csv(table: &RegretTable, path: &Path) -> io::Result<()> {
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.trial.to_string(),
                r.ht_eval.to_string(),
                format9(r.best_value),
                r.simple_regret.map(format9).unwrap_or_default(),
                r.lt_count.to_string(),
                format9(r.wall_ms),
            ]
        })
        .collect();
    write_csv_atomic(path, &TABLE_HEADER, &rows)
}

fn bad_data(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    i: usize,
    line: u64,
) -> io::Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        bad_data(format!(
            "line {line}: cannot parse `{raw}` in column {}",
            TABLE_HEADER[i]
        ))
    })
}

/// Reads a table written by [`emit_csv`].
pub fn read_csv(path: &Path) -> io::Result<RegretTable> {
    let mut r = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let header = r.headers().map_err(io::Error::other)?.clone();
    if header.iter().ne(TABLE_HEADER) {
        return Err(bad_data(format!("unexpected header {header:?}")));
    }
    let mut table = RegretTable::default();
    for rec in r.records() {
        let rec = rec.map_err(io::Error::other)?;
        let line = rec.position().map_or(0, |p| p.line());
        let regret = match rec.get(3) {
            Some("") | None => None,
            Some(_) => Some(parse_field(&rec, 3, line)?),
        };
        table.rows.push(RegretRow {
            trial: parse_field(&rec, 0, line)?,
            ht_eval: parse_field(&rec, 1, line)?,
            best_value: parse_field(&rec, 2, line)?,
            simple_regret: regret,
            lt_count: parse_field(&rec, 4, line)?,
            wall_ms: parse_field(&rec, 5, line)?,
        });
    }
    Ok(table)
}

/// Mean curves across trials, one row per heavy evaluation index.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub ht_eval: usize,
    pub trials: usize,
    pub mean_best_value: f64,
    pub mean_simple_regret: Option<f64>,
    pub mean_lt_count: f64,
}

pub const SUMMARY_HEADER: [&str; 5] = [
    "ht_eval",
    "trials",
    "mean_best_value",
    "mean_simple_regret",
    "mean_lt_count",
];

/// Averages the rows of the given trials at each heavy evaluation index.
pub fn summarize(table: &RegretTable, include: &[usize]) -> Vec<SummaryRow> {
    let max_eval = table.rows.iter().map(|r| r.ht_eval).max().unwrap_or(0);
    (1..=max_eval)
        .filter_map(|k| {
            let rows: Vec<&RegretRow> = table
                .rows
                .iter()
                .filter(|r| r.ht_eval == k && include.contains(&r.trial))
                .collect();
            if rows.is_empty() {
                return None;
            }
            let n = rows.len() as f64;
            let regret = rows
                .iter()
                .map(|r| r.simple_regret)
                .sum::<Option<f64>>()
                .map(|s| s / n);
            Some(SummaryRow {
                ht_eval: k,
                trials: rows.len(),
                mean_best_value: rows.iter().map(|r| r.best_value).sum::<f64>() / n,
                mean_simple_regret: regret,
                mean_lt_count: rows.iter().map(|r| r.lt_count as f64).sum::<f64>() / n,
            })
        })
        .collect()
}

pub fn emit_summary(rows: &[SummaryRow], path: &Path) -> io::Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.ht_eval.to_string(),
                r.trials.to_string(),
                format9(r.mean_best_value),
                r.mean_simple_regret.map(format9).unwrap_or_default(),
                format9(r.mean_lt_count),
            ]
        })
        .collect();
    write_csv_atomic(path, &SUMMARY_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, ht_eval: usize, regret: f64) -> RegretRow {
        RegretRow {
            trial,
            ht_eval,
            best_value: 13.798722044728432 - regret,
            simple_regret: Some(regret),
            lt_count: 2 * ht_eval,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format9(13.798722044728432), "13.798722");
        assert_eq!(format9(1.0 / 3.0), "0.333333333");
        assert_eq!(format9(-2.5e-7), "-2.5e-7");
        assert_eq!(format9(6.02214076e23), "6.02214076e23");
        assert_eq!(format9(0.0), "0");
        assert_eq!(format9(-0.0), "0");
        for v in [1.0 / 7.0, 123456.789012, 1e-12 / 3.0, -9.87654321987e10] {
            assert_eq!(format9(v).parse::<f64>().unwrap(), round9(v));
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        emit_csv(&RegretTable::default(), &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "trial,ht_eval,best_value,simple_regret,lt_count,wall_ms\n"
        );
        assert!(read_csv(&p).unwrap().rows.is_empty());
    }

    #[test]
    fn round_trip_reproduces_values_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = RegretTable::default();
        for trial in 0..2 {
            for k in 1..=3 {
                t.rows
                    .push(row(trial, k, 1.0 / (k as f64 * 7.0 + trial as f64)));
            }
        }
        t.rows[5].simple_regret = None;
        emit_csv(&t, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains('\r'));
        let back = read_csv(&p).unwrap();
        assert_eq!(back, t.rounded());
        let p2 = dir.path().join("t2.csv");
        emit_csv(&back, &p2).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn failed_write_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing").join("t.csv");
        assert!(emit_csv(&RegretTable::default(), &p).is_err());
        assert!(!p.exists());
    }

    #[test]
    fn summary_averages_included_trials() {
        let t = RegretTable {
            rows: vec![
                row(0, 1, 2.0),
                row(0, 2, 1.0),
                row(1, 1, 4.0),
                row(1, 2, 3.0),
                row(2, 1, 100.0),
            ],
        };
        assert!(t.is_monotone());
        let s = summarize(&t, &[0, 1]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean_simple_regret, Some(3.0));
        assert_eq!(s[1].trials, 2);
        let bad = RegretTable {
            rows: vec![row(0, 1, 1.0), row(0, 2, 2.0)],
        };
        assert!(!bad.is_monotone());
    }
}
