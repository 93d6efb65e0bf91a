use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::EdmdError;

/// Transition triples `(x_j, u_j, x_j⁺)`, one per row.
///
/// `trajectory[j]` identifies the trajectory a row came from; it is used for
/// holdout splits only.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub x: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub x_plus: DMatrix<f64>,
    pub trajectory: Vec<usize>,
}

impl SnapshotSet {
    pub fn new(
        x: DMatrix<f64>,
        u: DMatrix<f64>,
        x_plus: DMatrix<f64>,
        trajectory: Vec<usize>,
    ) -> Result<Self, EdmdError> {
        let rows = x.nrows();
        if u.nrows() != rows || x_plus.nrows() != rows || trajectory.len() != rows {
            return Err(EdmdError::Dimension(format!(
                "row counts differ: x {rows}, u {}, x_plus {}, trajectory {}",
                u.nrows(),
                x_plus.nrows(),
                trajectory.len()
            )));
        }
        if x_plus.ncols() != x.ncols() {
            return Err(EdmdError::Dimension(format!(
                "x has {} columns but x_plus has {}",
                x.ncols(),
                x_plus.ncols()
            )));
        }
        if x.iter().chain(u.iter()).chain(x_plus.iter()).any(|v| !v.is_finite()) {
            return Err(EdmdError::NonFinite);
        }
        Ok(Self {
            x,
            u,
            x_plus,
            trajectory,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_x(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_u(&self) -> usize {
        self.u.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| {
            DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
        };
        Self {
            x: pick(&self.x),
            u: pick(&self.u),
            x_plus: pick(&self.x_plus),
            trajectory: rows.iter().map(|&r| self.trajectory[r]).collect(),
        }
    }

    /// Splits off the last `fraction` of distinct trajectories as holdout.
    pub fn split_holdout(&self, fraction: f64) -> (Self, Self) {
        let mut ids: Vec<usize> = self.trajectory.clone();
        ids.sort_unstable();
        ids.dedup();
        let n_hold = ((ids.len() as f64) * fraction).round() as usize;
        let cut = ids.len() - n_hold.min(ids.len());
        let held: std::collections::HashSet<usize> = ids[cut..].iter().copied().collect();
        let (mut train, mut hold) = (Vec::new(), Vec::new());
        for (r, t) in self.trajectory.iter().enumerate() {
            if held.contains(t) {
                hold.push(r);
            } else {
                train.push(r);
            }
        }
        (self.select(&train), self.select(&hold))
    }

    /// CSV with header `traj,x0..,u0..,xp0..` and full `f64` precision.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EdmdError> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["traj".to_string()];
        header.extend((0..self.n_x()).map(|i| format!("x{i}")));
        header.extend((0..self.n_u()).map(|i| format!("u{i}")));
        header.extend((0..self.n_x()).map(|i| format!("xp{i}")));
        wr.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for r in 0..self.len() {
            record.clear();
            record.push(self.trajectory[r].to_string());
            for m in [&self.x, &self.u, &self.x_plus] {
                record.extend(m.row(r).iter().map(|v| format!("{v:e}")));
            }
            wr.write_record(&record)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, EdmdError> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let n_x = header.iter().filter(|h| h.starts_with('x') && !h.starts_with("xp")).count();
        let n_u = header.iter().filter(|h| h.starts_with('u')).count();
        if header.get(0) != Some("traj") || header.len() != 1 + 2 * n_x + n_u {
            return Err(EdmdError::Dimension(
                "snapshot header must be traj,x0..,u0..,xp0..".into(),
            ));
        }
        let (mut xs, mut us, mut xps, mut traj) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64, EdmdError> {
                rec[i].trim().parse::<f64>().map_err(|e| {
                    EdmdError::Parse(format!("line {:?}, column {i}: {e}", rec.position().map(|p| p.line())))
                })
            };
            traj.push(rec[0].trim().parse::<usize>().map_err(|e| {
                EdmdError::Parse(format!("line {:?}, traj: {e}", rec.position().map(|p| p.line())))
            })?);
            for i in 0..n_x {
                xs.push(parse(1 + i)?);
            }
            for i in 0..n_u {
                us.push(parse(1 + n_x + i)?);
            }
            for i in 0..n_x {
                xps.push(parse(1 + n_x + n_u + i)?);
            }
        }
        let rows = traj.len();
        Self::new(
            DMatrix::from_row_slice(rows, n_x, &xs),
            DMatrix::from_row_slice(rows, n_u, &us),
            DMatrix::from_row_slice(rows, n_x, &xps),
            traj,
        )
    }
}
