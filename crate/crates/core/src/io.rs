//! CSV and JSON reading and writing.
//!
//! Report tables are written with six significant digits. Matrices that may
//! be read back (simulated data, precision and covariance) use the shortest
//! representation that round-trips exactly. All writes go to a temporary
//! file in the target directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::screening::EdgeSet;
use crate::simgen::{GroundTruthInstance, SimulationConfig};
use crate::{DataMatrix, SymMatrix};

/// Formats `x` with six significant digits, like C's `%g`.
pub fn fmt6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) {
        exp + 1
    } else {
        exp
    };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent present");
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:?}")
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Writes `bytes` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    if !header.is_empty() {
        w.write_record(header).map_err(io_err)?;
    }
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Numeric matrix read from CSV, with the header if one was present.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Parses a numeric CSV table. A first row with any non-numeric field is
/// taken as a header. Every row must have the same number of fields.
pub fn parse_matrix_csv(text: &str) -> Result<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", rec.len()),
                });
            }
        } else {
            width = Some(rec.len());
        }
        let parsed: Vec<Option<f64>> = rec.iter().map(parse_number).collect();
        if header.is_none() && rows.is_empty() && parsed.iter().any(Option::is_none) {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let row = parsed
            .into_iter()
            .zip(rec.iter())
            .map(|(v, f)| {
                v.filter(|x| x.is_finite()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("'{f}' is not a finite number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvMatrix { header, rows })
}

pub fn read_matrix_csv(path: &Path) -> Result<CsvMatrix> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// Reads an observation matrix (rows are observations).
pub fn read_data_csv(path: &Path) -> Result<(Option<Vec<String>>, DataMatrix)> {
    let m = read_matrix_csv(path)?;
    if m.rows.len() < 2 || m.rows[0].len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("need at least 2 rows and 2 columns in {}", path.display()),
        });
    }
    Ok((m.header, DataMatrix::from_rows(&m.rows)?))
}

/// One label per line, taken from the first field.
pub fn read_labels(path: &Path, has_header: bool) -> Result<Vec<String>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        match rec.get(0) {
            Some(f) if !f.is_empty() => out.push(f.to_string()),
            _ => {}
        }
    }
    Ok(out)
}

pub fn data_rows(x: &DataMatrix) -> Vec<Vec<String>> {
    (0..x.n())
        .map(|i| x.row(i).into_iter().map(fmt_exact).collect())
        .collect()
}

pub fn sym_rows(m: &SymMatrix) -> Vec<Vec<String>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(fmt_exact).collect())
        .collect()
}

pub fn column_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("V{j}")).collect()
}

/// Edge list with 1-based node indices.
pub fn edge_rows(edges: &EdgeSet) -> Vec<Vec<String>> {
    edges
        .iter()
        .map(|(a, b)| vec![(a + 1).to_string(), (b + 1).to_string()])
        .collect()
}

/// Parses a 1-based edge list with an optional header.
pub fn parse_edges_csv(text: &str, p: usize) -> Result<EdgeSet> {
    let m = parse_matrix_csv(text)?;
    let mut pairs = Vec::with_capacity(m.rows.len());
    for (k, r) in m.rows.iter().enumerate() {
        let ok = r.len() >= 2 && r[..2].iter().all(|v| v.fract() == 0.0 && *v >= 1.0);
        if !ok {
            return Err(Error::Parse {
                line: k + 1,
                message: "edge endpoints must be positive integers".into(),
            });
        }
        pairs.push((r[0] as usize - 1, r[1] as usize - 1));
    }
    EdgeSet::from_pairs(p, pairs)
}

#[derive(Debug, Clone, Serialize)]
struct InstanceManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a SimulationConfig,
    true_edges: usize,
    node_indexing: &'static str,
}

/// Writes `edges.csv`, `precision.csv`, `covariance.csv`, `data.csv` and
/// `manifest.json` into `dir`.
pub fn write_instance(
    dir: &Path,
    inst: &GroundTruthInstance,
    cfg: &SimulationConfig,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let p = inst.p();
    write_csv(
        &dir.join("edges.csv"),
        &["a".into(), "b".into()],
        &edge_rows(&inst.edges),
    )?;
    write_csv(
        &dir.join("precision.csv"),
        &column_names(p),
        &sym_rows(&inst.precision),
    )?;
    write_csv(
        &dir.join("covariance.csv"),
        &column_names(p),
        &sym_rows(&inst.covariance),
    )?;
    write_csv(
        &dir.join("data.csv"),
        &column_names(p),
        &data_rows(&inst.data),
    )?;
    write_json(
        &dir.join("manifest.json"),
        &InstanceManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg,
            true_edges: inst.edges.len(),
            node_indexing: "1-based",
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(1.0), "1");
        assert_eq!(fmt6(0.123456789), "0.123457");
        assert_eq!(fmt6(-2.5), "-2.5");
        assert_eq!(fmt6(123456.7), "123457");
        assert_eq!(fmt6(1234567.0), "1.23457e6");
        assert_eq!(fmt6(0.000012345678), "1.23457e-5");
        assert_eq!(fmt6(9.9999999), "10");
        assert_eq!(fmt6(999999.7), "1e6");
    }

    #[test]
    fn exact_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567] {
            assert_eq!(fmt_exact(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_detection() {
        let m = parse_matrix_csv("x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(m.header, Some(vec!["x".into(), "y".into()]));
        assert_eq!(m.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = parse_matrix_csv("1,2\n3,4\n").unwrap();
        assert_eq!(m.header, None);
        assert_eq!(m.rows.len(), 2);
    }

    #[test]
    fn ragged_rows_report_line() {
        match parse_matrix_csv("a,b\n1,2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_matrix_csv("1,2\n3,x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edges_round_trip() {
        let e = EdgeSet::from_pairs(5, [(0, 4), (1, 2)]).unwrap();
        let text: String = std::iter::once("a,b\n".to_string())
            .chain(edge_rows(&e).iter().map(|r| r.join(",") + "\n"))
            .collect();
        assert_eq!(parse_edges_csv(&text, 5).unwrap(), e);
    }
}
