use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::IntegrateError;
use crate::numfmt::format_f64;

/// Relative tolerance on the time column when re-reading a uniform grid.
const GRID_TOL: f64 = 1e-9;

/// States sampled on the uniform grid `t0 + i * dt`, `i = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    states: Array2<f64>,
}

impl Trajectory {
    /// `states` is `(K + 1) x d` with `K >= 1`.
    pub fn new(t0: f64, dt: f64, states: Array2<f64>) -> Result<Self, IntegrateError> {
        if !t0.is_finite() {
            return Err(IntegrateError::InvalidTrajectory(format!("t0 = {t0}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(IntegrateError::InvalidStep(dt));
        }
        if states.nrows() < 2 {
            return Err(IntegrateError::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                states.nrows()
            )));
        }
        if states.ncols() == 0 {
            return Err(IntegrateError::InvalidTrajectory("state dimension is zero".into()));
        }
        if let Some(i) = states.rows().into_iter().position(|r| r.iter().any(|x| !x.is_finite())) {
            return Err(IntegrateError::InvalidTrajectory(format!(
                "non-finite state in row {i}"
            )));
        }
        Ok(Self { t0, dt, states })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of steps `K`; there are `K + 1` samples.
    pub fn steps(&self) -> usize {
        self.states.nrows() - 1
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    /// `K * dt`.
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn state(&self, i: usize) -> ArrayView1<'_, f64> {
        self.states.row(i)
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.states.column(j)
    }

    pub fn states(&self) -> ArrayView2<'_, f64> {
        self.states.view()
    }

    pub fn into_states(self) -> Array2<f64> {
        self.states
    }

    /// Same time grid (start, step, length) within rounding of the step.
    pub fn same_grid(&self, other: &Trajectory) -> bool {
        self.len() == other.len()
            && self.t0 == other.t0
            && (self.dt - other.dt).abs() <= GRID_TOL * self.dt.abs().max(other.dt.abs())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IntegrateError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_trajectory_csv(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntegrateError> {
        read_trajectory_csv(BufReader::new(File::open(path)?))
    }
}

fn header(dim: usize) -> String {
    if dim == 2 {
        "t,u,v".to_string()
    } else {
        std::iter::once("t".to_string())
            .chain((1..=dim).map(|j| format!("x{j}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Header `t,u,v` (or `t,x1,..,xd` when `d != 2`), one row per sample.
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<(), IntegrateError> {
    writeln!(w, "{}", header(traj.dim()))?;
    for (i, row) in traj.states.rows().into_iter().enumerate() {
        write!(w, "{}", format_f64(traj.time(i)))?;
        for x in row {
            write!(w, ",{}", format_f64(*x))?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory_csv<R: BufRead>(reader: R) -> Result<Trajectory, IntegrateError> {
    let mut lines = reader.lines().enumerate();
    let (_, head) = lines.next().ok_or(IntegrateError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let head = head?;
    let columns: Vec<&str> = head.trim_end_matches('\r').split(',').map(str::trim).collect();
    if columns.first() != Some(&"t") || columns.len() < 2 {
        return Err(IntegrateError::Parse {
            line: 1,
            msg: format!("expected a header starting with `t,`, got `{head}`"),
        });
    }
    let dim = columns.len() - 1;

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 1 {
            return Err(IntegrateError::Parse {
                line: idx + 1,
                msg: format!("expected {} fields, got {}", dim + 1, fields.len()),
            });
        }
        let mut parsed = fields.iter().map(|f| {
            f.trim().parse::<f64>().map_err(|e| IntegrateError::Parse {
                line: idx + 1,
                msg: format!("`{f}`: {e}"),
            })
        });
        times.push(parsed.next().expect("at least one field")?);
        for x in parsed {
            data.push(x?);
        }
    }
    if times.len() < 2 {
        return Err(IntegrateError::InvalidTrajectory(format!(
            "need at least 2 samples, got {}",
            times.len()
        )));
    }
    let t0 = times[0];
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(IntegrateError::InvalidTrajectory(format!(
            "time column must increase, got step {dt}"
        )));
    }
    for (i, &t) in times.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if (t - expected).abs() > GRID_TOL * expected.abs().max(1.0) {
            return Err(IntegrateError::InvalidTrajectory(format!(
                "non-uniform time grid at row {i}: t = {t}, expected {expected}"
            )));
        }
    }
    let states = Array2::from_shape_vec((times.len(), dim), data)
        .map_err(|e| IntegrateError::InvalidTrajectory(e.to_string()))?;
    Trajectory::new(t0, dt, states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn rejects_invalid_construction() {
        assert!(Trajectory::new(0.0, 0.0, array![[1.0], [2.0]]).is_err());
        assert!(Trajectory::new(0.0, 0.1, array![[1.0]]).is_err());
        assert!(Trajectory::new(0.0, 0.1, array![[1.0], [f64::NAN]]).is_err());
    }

    #[test]
    fn csv_layout() {
        let traj = Trajectory::new(0.0, 0.5, array![[1.0, 2.0], [0.1, -3.25]]).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,u,v\n0,1,2\n0.5,0.1,-3.25\n");
    }

    #[test]
    fn rejects_non_uniform_grid() {
        let text = "t,u,v\n0,1,2\n0.1,1,2\n0.25,1,2\n";
        let err = read_trajectory_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, IntegrateError::InvalidTrajectory(_)));
    }

    #[test]
    fn rejects_ragged_rows() {
        let text = "t,u,v\n0,1,2\n0.1,1\n";
        assert!(matches!(
            read_trajectory_csv(text.as_bytes()),
            Err(IntegrateError::Parse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            dt in 1e-4f64..1.0,
            values in proptest::collection::vec(-1e3f64..1e3, 4..40),
        ) {
            let rows = values.len() / 2;
            let states = Array2::from_shape_vec((rows, 2), values[..rows * 2].to_vec()).unwrap();
            let traj = Trajectory::new(0.0, dt, states).unwrap();
            let mut buf = Vec::new();
            write_trajectory_csv(&traj, &mut buf).unwrap();
            let back = read_trajectory_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.states(), traj.states());
            prop_assert_eq!(back.dt().to_bits(), traj.dt().to_bits());
        }
    }
}
