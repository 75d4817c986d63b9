use std::path::{Path, PathBuf};

use carma_qml::linalg::RealMatrix;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Relative tolerance on the spacing of observation times.
pub const SPACING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Observations {
    pub path: PathBuf,
    pub times: Vec<f64>,
    pub values: RealMatrix,
}

impl Observations {
    /// Common spacing of the times; `None` for fewer than two rows.
    pub fn spacing(&self) -> CliResult<Option<f64>> {
        let n = self.times.len();
        if n < 2 {
            return Ok(None);
        }
        let h = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        if !(h > 0.0) {
            return Err(CliError::data(format!("{}: times must increase", self.path.display())));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > SPACING_TOLERANCE * h {
                return Err(CliError::data(format!(
                    "{}: times are not equidistant (row {} has step {}, expected {h})",
                    self.path.display(),
                    k + 2,
                    w[1] - w[0]
                )));
            }
        }
        Ok(Some(h))
    }
}

/// Reads a `t,y1,...,yd` file.
pub fn read_csv(path: &Path) -> CliResult<Observations> {
    let err = |m: String| CliError::data(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string()).chain((1..=d).map(|k| format!("y{k}"))).collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(err(format!("header must be t,y1,...,yd, found {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let row: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("row {}: {e}", k + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("row {} holds a non-finite value", k + 2)));
        }
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    if times.is_empty() {
        return Err(err("no observations".into()));
    }
    let values = RealMatrix::from_row_slice(times.len(), d, &values);
    Ok(Observations { path: path.to_path_buf(), times, values })
}

/// Writes rows `t = h, 2h, …` of `y`.
pub fn write_csv(path: &Path, h: f64, y: &RealMatrix) -> CliResult<()> {
    let err = |e: String| CliError::estimation(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=y.ncols()).map(|k| format!("y{k}"))).collect();
    w.write_record(&header).map_err(|e| err(e.to_string()))?;
    for (i, row) in y.row_iter().enumerate() {
        let record: Vec<String> = std::iter::once(((i + 1) as f64 * h).to_string()).chain(row.iter().map(f64::to_string)).collect();
        w.write_record(&record).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

#[derive(Debug, Deserialize)]
struct ManifestFiles {
    files: Vec<ManifestEntry>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    path: PathBuf,
}

/// Data paths from `--data` arguments; a `.json` argument is read as a simulation
/// manifest whose file paths are relative to the manifest.
pub fn expand_data_paths(args: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in args {
        if p.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            let m: ManifestFiles =
                serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: invalid manifest: {e}", p.display())))?;
            let base = p.parent().unwrap_or(Path::new(""));
            out.extend(m.files.into_iter().map(|f| base.join(f.path)));
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(times: Vec<f64>) -> Observations {
        let n = times.len();
        Observations { path: PathBuf::from("x.csv"), times, values: RealMatrix::zeros(n, 1) }
    }

    #[test]
    fn spacing_tolerance() {
        assert_eq!(obs(vec![1.0, 2.0, 3.0]).spacing().unwrap(), Some(1.0));
        assert!(obs(vec![1.0, 2.0, 3.0 + 1e-10]).spacing().is_ok());
        assert!(obs(vec![1.0, 2.0, 3.1]).spacing().is_err());
        assert!(obs(vec![2.0, 1.0]).spacing().is_err());
        assert_eq!(obs(vec![1.0]).spacing().unwrap(), None);
    }
}
