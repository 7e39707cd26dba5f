//! CSV tables: floats are written as `{:.16e}` (17 significant digits, so
//! they parse back to the same bits).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optim::Trajectory;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column names of a trajectory table with `depth` layers.
pub fn trajectory_header(depth: usize, extra_names: &[String]) -> Vec<String> {
    let mut h = vec!["step".to_string(), "loss".to_string()];
    h.extend((1..=depth).map(|l| format!("irrel_norm_L{l}")));
    h.push("grad_norm".into());
    h.extend(extra_names.iter().cloned());
    h
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format { path: path.to_path_buf(), offset: 0, msg: format!("{other:?}") },
    }
}

/// Writes a header and rows of already formatted cells.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trajectory(path: &Path, depth: usize, traj: &Trajectory) -> Result<()> {
    let header = trajectory_header(depth, &traj.extra_names);
    let rows: Vec<Vec<String>> = traj
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.step.to_string(), fmt_f64(r.loss)];
            row.extend(r.irrel_norm_per_layer.iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(r.grad_norm));
            row.extend(r.extras.iter().map(|&v| fmt_f64(v)));
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Numeric table read back from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let header: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let offset = rec.position().map_or(0, |p| p.byte());
            let row = rec
                .iter()
                .map(|cell| {
                    let t = cell.trim();
                    if t.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        t.parse::<f64>().map_err(|_| Error::Format {
                            path: path.to_path_buf(),
                            offset,
                            msg: format!("`{cell}` is not a number"),
                        })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema { file: self.path.clone(), column: name.to_string() })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::TrajectoryRecord;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = Trajectory {
            extra_names: vec!["chain_c0_w1".into()],
            records: vec![
                TrajectoryRecord { step: 1, loss: 0.3, irrel_norm_per_layer: vec![1.0 / 7.0, 2.0], grad_norm: 0.1, extras: vec![-0.25] },
                TrajectoryRecord { step: 2, loss: 0.2, irrel_norm_per_layer: vec![0.1, 1.9], grad_norm: 0.05, extras: vec![-0.2] },
            ],
            eta_max: None,
            divergence: None,
            steps_run: 2,
        };
        write_trajectory(&path, 2, &traj).unwrap();
        let t = Table::read(&path).unwrap();
        assert_eq!(t.header, vec!["step", "loss", "irrel_norm_L1", "irrel_norm_L2", "grad_norm", "chain_c0_w1"]);
        assert_eq!(t.column("irrel_norm_L1").unwrap(), vec![1.0 / 7.0, 0.1]);
        assert!(matches!(t.column("nope"), Err(Error::Schema { .. })));
    }

    #[test]
    fn non_numeric_cell_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n3,x\n").unwrap();
        match Table::read(&path) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }
}
