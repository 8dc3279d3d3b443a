//! Loading-path observations and their CSV form.
//!
//! ```text
//! path_id,phi_deg,delta_norm,j_n,j_t
//! p00,-53,0,0,0
//! ```
//!
//! Angles are degrees in files and in [`LoadingPath::phi_deg`]; use
//! [`LoadingPath::phi`] for radians. Numbers are written in shortest
//! round-trip form so a save/load cycle is exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsr;

pub const DATASET_HEADER: [&str; 5] = ["path_id", "phi_deg", "delta_norm", "j_n", "j_t"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub delta_norm: f64,
    pub j_n: f64,
    pub j_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingPath {
    pub path_id: String,
    pub phi_deg: f64,
    pub samples: Vec<Sample>,
}

impl LoadingPath {
    pub fn phi(&self) -> f64 {
        self.phi_deg.to_radians()
    }

    fn validate(&self) -> Result<()> {
        if !tsr::phi_in_range(self.phi()) {
            return Err(Error::Domain(format!(
                "path {}: phase angle out of range ({} deg)",
                self.path_id, self.phi_deg
            )));
        }
        if self.samples.len() < 2 {
            return Err(Error::Usage(format!(
                "path {} needs at least 2 samples, has {}",
                self.path_id,
                self.samples.len()
            )));
        }
        if self.samples[0].delta_norm != 0.0 {
            return Err(Error::Usage(format!(
                "path {} must start at delta_norm = 0",
                self.path_id
            )));
        }
        if !self.samples.windows(2).all(|w| w[1].delta_norm > w[0].delta_norm) {
            return Err(Error::Usage(format!(
                "path {}: delta_norm must be strictly increasing",
                self.path_id
            )));
        }
        if self
            .samples
            .iter()
            .any(|s| !(s.delta_norm.is_finite() && s.j_n.is_finite() && s.j_t.is_finite()))
        {
            return Err(Error::Domain(format!("path {}: non-finite value", self.path_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub paths: Vec<LoadingPath>,
}

impl Dataset {
    pub fn new(paths: Vec<LoadingPath>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Usage("dataset has no loading paths".into()));
        }
        for p in &paths {
            p.validate()?;
        }
        Ok(Self { paths })
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.paths.iter().map(|p| p.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(phi radians, sample)` for every observation, path by path.
    pub fn observations(&self) -> impl Iterator<Item = (f64, &Sample)> {
        self.paths
            .iter()
            .flat_map(|p| p.samples.iter().map(move |s| (p.phi(), s)))
    }

    pub fn max_separation(&self) -> f64 {
        self.observations()
            .map(|(_, s)| s.delta_norm)
            .fold(0.0, f64::max)
    }

    /// `(min, max)` phase angle in radians.
    pub fn phi_range(&self) -> (f64, f64) {
        self.paths.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.phi()), hi.max(p.phi()))
        })
    }

    /// Split into `(kept, held_out)` by path index.
    pub fn split_paths(&self, held_out: &[usize]) -> Result<(Dataset, Dataset)> {
        if let Some(&i) = held_out.iter().find(|&&i| i >= self.paths.len()) {
            return Err(Error::Usage(format!(
                "held-out path {i} does not exist ({} paths)",
                self.paths.len()
            )));
        }
        let (out, kept): (Vec<_>, Vec<_>) = self
            .paths
            .iter()
            .enumerate()
            .partition(|(i, _)| held_out.contains(i));
        let strip = |v: Vec<(usize, &LoadingPath)>| v.into_iter().map(|(_, p)| p.clone()).collect();
        Ok((Dataset::new(strip(kept))?, Dataset::new(strip(out))?))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(DATASET_HEADER)?;
        for p in &self.paths {
            for s in &p.samples {
                w.write_record([
                    p.path_id.clone(),
                    p.phi_deg.to_string(),
                    s.delta_norm.to_string(),
                    s.j_n.to_string(),
                    s.j_t.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        self.write_csv(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_csv(file, path)
    }

    /// Parse a dataset CSV. `origin` names the source in errors. Row numbers
    /// count the header as row 1.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let load_err = |row: usize, reason: String| Error::Load {
            path: origin.to_owned(),
            row,
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| load_err(1, e.to_string()))?.clone();
        let mut columns = [0usize; 5];
        for (k, name) in DATASET_HEADER.iter().enumerate() {
            columns[k] = header
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| load_err(1, format!("missing column `{name}`")))?;
        }

        // path_id -> (first row, path); insertion order is first appearance
        let mut paths: Vec<(usize, LoadingPath)> = Vec::new();
        let mut rows_of: Vec<Vec<usize>> = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let row = k + 2;
            let record = record.map_err(|e| load_err(row, e.to_string()))?;
            let field = |c: usize| record.get(columns[c]).unwrap_or("");
            let num = |c: usize| -> Result<f64> {
                let raw = field(c);
                let v: f64 = raw
                    .parse()
                    .map_err(|_| load_err(row, format!("`{}` is not a number: `{raw}`", DATASET_HEADER[c])))?;
                if !v.is_finite() {
                    return Err(load_err(row, format!("`{}` is not finite", DATASET_HEADER[c])));
                }
                Ok(v)
            };
            let id = field(0).to_string();
            if id.is_empty() {
                return Err(load_err(row, "empty path_id".into()));
            }
            let phi_deg = num(1)?;
            if !tsr::phi_in_range(phi_deg.to_radians()) {
                return Err(load_err(
                    row,
                    format!("phase angle out of range: {phi_deg} deg is not inside (-90, 90)"),
                ));
            }
            let sample = Sample {
                delta_norm: num(2)?,
                j_n: num(3)?,
                j_t: num(4)?,
            };
            if sample.delta_norm < 0.0 {
                return Err(load_err(row, "delta_norm must be >= 0".into()));
            }
            match paths.iter().position(|(_, p)| p.path_id == id) {
                Some(i) => {
                    if paths[i].1.phi_deg != phi_deg {
                        return Err(load_err(
                            row,
                            format!("path {id} changes phase angle ({} vs {phi_deg})", paths[i].1.phi_deg),
                        ));
                    }
                    paths[i].1.samples.push(sample);
                    rows_of[i].push(row);
                }
                None => {
                    paths.push((
                        row,
                        LoadingPath {
                            path_id: id,
                            phi_deg,
                            samples: vec![sample],
                        },
                    ));
                    rows_of.push(vec![row]);
                }
            }
        }
        if paths.is_empty() {
            return Err(load_err(1, "no data rows".into()));
        }

        let mut out = Vec::with_capacity(paths.len());
        for ((first_row, mut path), rows) in paths.into_iter().zip(rows_of) {
            let mut order: Vec<usize> = (0..path.samples.len()).collect();
            order.sort_by(|&a, &b| path.samples[a].delta_norm.total_cmp(&path.samples[b].delta_norm));
            for w in order.windows(2) {
                if path.samples[w[1]].delta_norm == path.samples[w[0]].delta_norm {
                    return Err(load_err(
                        rows[w[1]].max(rows[w[0]]),
                        format!("duplicate delta_norm in path {}", path.path_id),
                    ));
                }
            }
            path.samples = order.iter().map(|&i| path.samples[i]).collect();
            if path.samples.len() < 2 {
                return Err(load_err(
                    first_row,
                    format!("path {} needs at least 2 samples", path.path_id),
                ));
            }
            if path.samples[0].delta_norm != 0.0 {
                return Err(load_err(
                    first_row,
                    format!("path {} must start at delta_norm = 0", path.path_id),
                ));
            }
            out.push(path);
        }
        Dataset::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{reproduction_dataset, OracleParams};

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::read_csv(text.as_bytes(), Path::new("test.csv"))
    }

    #[test]
    fn two_rows_one_path() {
        let d = parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,10,1,0.5,0.1\n").unwrap();
        assert_eq!(d.paths.len(), 1);
        assert_eq!(d.paths[0].samples.len(), 2);
    }

    #[test]
    fn rows_are_grouped_and_sorted() {
        let d = parse(
            "path_id,phi_deg,delta_norm,j_n,j_t\nb,20,1,1,1\na,10,0,0,0\nb,20,0,0,0\na,10,2,2,2\n",
        )
        .unwrap();
        assert_eq!(d.paths[0].path_id, "b");
        assert_eq!(d.paths[0].samples[0].delta_norm, 0.0);
        assert_eq!(d.paths[1].samples[1].delta_norm, 2.0);
    }

    #[test]
    fn angle_out_of_range_names_row() {
        let err = parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,95,1,0,0\n").unwrap_err();
        match err {
            Error::Load { row, reason, .. } => {
                assert_eq!(row, 3);
                assert!(reason.contains("phase angle out of range"), "{reason}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn missing_column() {
        let err = parse("path_id,phi_deg,delta_norm,j_n\na,10,0,0\n").unwrap_err();
        assert!(matches!(err, Error::Load { row: 1, ref reason, .. } if reason.contains("j_t")));
    }

    #[test]
    fn bad_numbers_and_duplicates() {
        assert!(matches!(
            parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,10,1,nan,0\n"),
            Err(Error::Load { row: 3, .. })
        ));
        assert!(matches!(
            parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,10,x,0,0\n"),
            Err(Error::Load { row: 3, .. })
        ));
        assert!(matches!(
            parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,10,1,0,0\na,10,1,0,0\n"),
            Err(Error::Load { row: 4, .. })
        ));
        assert!(matches!(
            parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0,0,0\na,12,1,0,0\n"),
            Err(Error::Load { row: 3, .. })
        ));
        assert!(matches!(
            parse("path_id,phi_deg,delta_norm,j_n,j_t\na,10,0.5,0,0\na,10,1,0,0\n"),
            Err(Error::Load { .. })
        ));
    }

    #[test]
    fn oracle_csv_round_trips_exactly() {
        let d = reproduction_dataset(&OracleParams::consistent().with_noise(0.02, 3)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("path_id,phi_deg,delta_norm,j_n,j_t\n"));
        assert_eq!(text.lines().count(), 237);
        assert!(!text.contains('\r'));
        let back = Dataset::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn split_paths_partitions() {
        let d = reproduction_dataset(&OracleParams::consistent()).unwrap();
        let (kept, out) = d.split_paths(&[3, 6]).unwrap();
        assert_eq!(kept.paths.len(), 8);
        assert_eq!(out.paths.len(), 2);
        assert_eq!(kept.len() + out.len(), 236);
        assert!(d.split_paths(&[10]).is_err());
    }
}
