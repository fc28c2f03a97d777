use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::inference::ConfidenceBand;
use crate::local_moments::{rescale_unit, IndexGrid, IndexedSample};
use crate::solvers::PrecisionField;

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub z_column: String,
    pub log_returns: bool,
    pub standardize: bool,
    /// Affinely map the index to `[0, 1]`; off only for data already on that
    /// scale.
    pub rescale_z: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            z_column: "z".into(),
            log_returns: false,
            standardize: false,
            rescale_z: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub sample: IndexedSample,
    pub feature_names: Vec<String>,
    /// Data rows read from the file, before any log-return differencing.
    pub rows_read: usize,
}

pub fn ingest_csv(path: &Path, options: &IngestOptions) -> Result<Ingested> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, options)
}

/// Comment lines (`#`) and blank lines are skipped; the first remaining line
/// is the header.
pub fn parse_csv(text: &str, options: &IngestOptions) -> Result<Ingested> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::InvalidInput("empty CSV".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let z_col = names
        .iter()
        .position(|n| *n == options.z_column)
        .ok_or_else(|| Error::InvalidInput(format!("index column '{}' not in header {names:?}", options.z_column)))?;
    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != z_col)
        .map(|(_, n)| n.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidInput("no feature columns besides the index".into()));
    }

    let mut z = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} cells, found {}",
                line_no + 1,
                names.len(),
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, cell) in cells.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("line {}, column '{}': '{cell}' is not a number", line_no + 1, names[c])))?;
            if c == z_col {
                z.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    let rows_read = rows.len();
    if rows_read == 0 {
        return Err(Error::InvalidInput("CSV has no data rows".into()));
    }

    if options.log_returns {
        if rows.len() < 2 {
            return Err(Error::InvalidInput("log returns need at least 2 rows".into()));
        }
        let mut returns = Vec::with_capacity(rows.len() - 1);
        for t in 1..rows.len() {
            let mut r = Vec::with_capacity(feature_names.len());
            for (j, name) in feature_names.iter().enumerate() {
                let (prev, cur) = (rows[t - 1][j], rows[t][j]);
                if !(prev > 0.0 && cur > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "log returns need positive values; column '{name}' row {} has {cur}",
                        t + 1
                    )));
                }
                r.push((cur / prev).ln());
            }
            returns.push(r);
        }
        rows = returns;
        z.remove(0);
    }

    let n = rows.len();
    let p = feature_names.len();
    let mut x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    if options.standardize {
        for (j, name) in feature_names.iter().enumerate() {
            let mut col = x.column_mut(j);
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / n as f64).sqrt();
            if !(sd > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "column '{name}' is constant and cannot be standardized"
                )));
            }
            col /= sd;
        }
    }
    let z = if options.rescale_z { rescale_unit(&z)? } else { z };
    Ok(Ingested {
        sample: IndexedSample::new(z, x)?,
        feature_names,
        rows_read,
    })
}

/// `# condcov <version> seed=<seed> config=<hash>`
pub fn header_line(seed: u64, hash: &str) -> String {
    format!("# condcov {} seed={seed} config={hash}", env!("CARGO_PKG_VERSION"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn sample_csv(header: &str, sample: &IndexedSample) -> String {
    let mut s = format!("{header}\nz");
    for j in 0..sample.p() {
        let _ = write!(s, ",x{j}");
    }
    s.push('\n');
    for i in 0..sample.n() {
        let _ = write!(s, "{}", sample.z()[i]);
        for j in 0..sample.p() {
            let _ = write!(s, ",{}", sample.x()[(i, j)]);
        }
        s.push('\n');
    }
    s
}

/// `z,u,v,value` with `u ≤ v`, ordered by `(z, u, v)`.
pub fn omega_grid_csv(header: &str, grid: &IndexGrid, matrices: &[DMatrix<f64>]) -> String {
    let mut s = format!("{header}\nz,u,v,value\n");
    for (z, m) in grid.points().iter().zip(matrices) {
        for u in 0..m.nrows() {
            for v in u..m.ncols() {
                let _ = writeln!(s, "{z},{u},{v},{}", m[(u, v)]);
            }
        }
    }
    s
}

/// Rebuilds the field from `omega_grid.csv` text.
pub fn read_omega_grid(text: &str, support_tol: f64) -> Result<PrecisionField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    if lines.next().map(str::trim) != Some("z,u,v,value") {
        return Err(Error::Parse("omega grid must start with header z,u,v,value".into()));
    }
    let mut entries: Vec<(f64, usize, usize, f64)> = Vec::new();
    for line in lines {
        let c: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("bad omega grid row '{line}'"));
        if c.len() != 4 {
            return Err(bad());
        }
        entries.push((
            c[0].parse().map_err(|_| bad())?,
            c[1].parse().map_err(|_| bad())?,
            c[2].parse().map_err(|_| bad())?,
            c[3].parse().map_err(|_| bad())?,
        ));
    }
    let p = entries
        .iter()
        .map(|e| e.2 + 1)
        .max()
        .ok_or_else(|| Error::Parse("omega grid has no rows".into()))?;
    let mut points: Vec<f64> = Vec::new();
    let mut matrices: Vec<DMatrix<f64>> = Vec::new();
    for (z, u, v, value) in entries {
        if points.last() != Some(&z) {
            points.push(z);
            matrices.push(DMatrix::zeros(p, p));
        }
        let m = matrices.last_mut().expect("pushed above");
        m[(u, v)] = value;
        m[(v, u)] = value;
    }
    PrecisionField::new(IndexGrid::new(points)?, matrices, support_tol)
}

/// `u,v,group_norm` for each edge.
pub fn support_csv(header: &str, support: &EdgeSet, norms: &DMatrix<f64>) -> String {
    let mut s = format!("{header}\nu,v,group_norm\n");
    for (u, v) in support.iter() {
        let _ = writeln!(s, "{u},{v},{}", norms[(u, v)]);
    }
    s
}

pub fn edges_csv(header: &str, edges: &EdgeSet) -> String {
    let mut s = format!("{header}\nu,v\n");
    for (u, v) in edges.iter() {
        let _ = writeln!(s, "{u},{v}");
    }
    s
}

pub fn read_edges(text: &str, p: usize) -> Result<EdgeSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let head = lines.next().map(str::trim).unwrap_or_default();
    if !head.starts_with("u,v") {
        return Err(Error::Parse(format!("edge file must start with header u,v, got '{head}'")));
    }
    let mut set = EdgeSet::new(p);
    for line in lines {
        let c: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Parse(format!("bad edge row '{line}'"));
        if c.len() < 2 {
            return Err(bad());
        }
        set.insert(c[0].parse().map_err(|_| bad())?, c[1].parse().map_err(|_| bad())?)?;
    }
    Ok(set)
}

/// `z,u,v,point,lower,upper` with `u ≤ v`.
pub fn ci_csv(header: &str, band: &ConfidenceBand) -> String {
    let mut s = format!("{header}\nz,u,v,point,lower,upper\n");
    let p = band.p();
    for (k, z) in band.grid.points().iter().enumerate() {
        for u in 0..p {
            for v in u..p {
                let _ = writeln!(
                    s,
                    "{z},{u},{v},{},{},{}",
                    band.point[k][(u, v)],
                    band.lower(k, u, v),
                    band.upper(k, u, v)
                );
            }
        }
    }
    s
}
