//! Boundary voltage time series on a set of mesh nodes.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, RegionSet};
use crate::monodomain::StateTrajectory;
use crate::tensor::Point;

/// `values[n][k]` is `u` at time `n·dt` on node `node_ids[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub node_ids: Vec<usize>,
    pub coords: Vec<Point>,
    pub dt: f64,
    pub values: Vec<Vec<f64>>,
}

fn same_dt(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl TraceSeries {
    /// Empty series on the given nodes; fill with [`TraceSeries::push`].
    pub fn new(mesh: &Mesh, node_ids: Vec<usize>, dt: f64) -> Self {
        let coords = node_ids.iter().map(|&i| mesh.nodes()[i]).collect();
        Self {
            node_ids,
            coords,
            dt,
            values: Vec::new(),
        }
    }

    /// Appends the next time level, sampled from a full nodal field.
    pub fn push(&mut self, field: &[f64]) {
        self.values.push(self.node_ids.iter().map(|&i| field[i]).collect());
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_times(&self) -> usize {
        self.values.len()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Checks that `other` lives on the same nodes and time grid.
    pub fn check_compatible(&self, other: &TraceSeries) -> Result<()> {
        if self.node_ids != other.node_ids {
            return Err(Error::GridMismatch(format!(
                "traces have different node sets ({} vs {} nodes)",
                self.num_nodes(),
                other.num_nodes()
            )));
        }
        if self.num_times() != other.num_times() || !same_dt(self.dt, other.dt) {
            return Err(Error::GridMismatch(format!(
                "time grids differ: {} steps of {} vs {} steps of {}",
                self.num_times(),
                self.dt,
                other.num_times(),
                other.dt
            )));
        }
        Ok(())
    }

    /// Sub-series on `nodes` (each must be present).
    pub fn restrict(&self, nodes: &[usize]) -> Result<TraceSeries> {
        let pos: Vec<usize> = nodes
            .iter()
            .map(|n| {
                self.node_ids
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::GridMismatch(format!("node {n} is not in the trace")))
            })
            .collect::<Result<_>>()?;
        Ok(TraceSeries {
            node_ids: nodes.to_vec(),
            coords: pos.iter().map(|&k| self.coords[k]).collect(),
            dt: self.dt,
            values: self
                .values
                .iter()
                .map(|row| pos.iter().map(|&k| row[k]).collect())
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "node_id", "x", "y", "u"])?;
        for (n, row) in self.values.iter().enumerate() {
            let t = self.time(n).to_string();
            for (k, u) in row.iter().enumerate() {
                w.write_record([
                    t.as_str(),
                    &self.node_ids[k].to_string(),
                    &self.coords[k][0].to_string(),
                    &self.coords[k][1].to_string(),
                    &u.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<trace csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_csv_string()?.as_bytes())
    }

    pub fn load_csv(path: &Path) -> Result<TraceSeries> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, path)
    }

    /// Parses the `t,node_id,x,y,u` format (rows grouped by time).
    pub fn read_csv<R: Read>(input: R, path: &Path) -> Result<TraceSeries> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["t", "node_id", "x", "y", "u"] {
            return Err(perr(1, "expected header t,node_id,x,y,u".into()));
        }
        let mut times: Vec<f64> = Vec::new();
        let mut node_ids = Vec::new();
        let mut coords = Vec::new();
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| perr(line, format!("bad number in column {}", i + 1)))
            };
            let t = num(0)?;
            let id: usize = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| perr(line, "bad node_id".into()))?;
            let (x, y, u) = (num(2)?, num(3)?, num(4)?);
            if times.last() != Some(&t) {
                if let Some(last) = values.last() {
                    if last.len() != node_ids.len() {
                        return Err(perr(line, "time level with a different node set".into()));
                    }
                }
                times.push(t);
                values.push(Vec::new());
            }
            let row = values.last_mut().expect("row exists");
            if times.len() == 1 {
                node_ids.push(id);
                coords.push([x, y]);
            } else if node_ids.get(row.len()) != Some(&id) {
                return Err(perr(line, format!("unexpected node {id} at t = {t}")));
            }
            row.push(u);
        }
        if values.last().is_some_and(|r| r.len() != node_ids.len()) {
            return Err(perr(0, "last time level is incomplete".into()));
        }
        if times.len() < 2 {
            return Err(perr(0, "trace needs at least two time levels".into()));
        }
        let dt = times[1] - times[0];
        for (n, &t) in times.iter().enumerate() {
            if (t - n as f64 * dt).abs() > 1e-9 * dt.max(1.0) || times[0] != 0.0 {
                return Err(perr(0, format!("time grid is not uniform from 0 (t = {t} at level {n})")));
            }
        }
        Ok(TraceSeries {
            node_ids,
            coords,
            dt,
            values,
        })
    }
}

/// The values of `u` on the nodes of `regions`, at every stored time.
pub fn boundary_trace(traj: &StateTrajectory, mesh: &Mesh, regions: &RegionSet) -> Result<TraceSeries> {
    let nodes = mesh.region_nodes(regions);
    if nodes.is_empty() {
        return Err(Error::Config(format!("no boundary nodes in region {regions}")));
    }
    if traj.u.first().is_some_and(|u| u.len() != mesh.num_nodes()) {
        return Err(Error::Dimension("trajectory does not match the mesh".into()));
    }
    let mut tr = TraceSeries::new(mesh, nodes, traj.dt);
    for u in &traj.u {
        tr.push(u);
    }
    Ok(tr)
}

/// Pointwise `simulated − measured`.
pub fn residual_trace(measured: &TraceSeries, simulated: &TraceSeries) -> Result<TraceSeries> {
    simulated.check_compatible(measured)?;
    let mut r = simulated.clone();
    for (row, m) in r.values.iter_mut().zip(&measured.values) {
        for (v, mv) in row.iter_mut().zip(m) {
            *v -= mv;
        }
    }
    Ok(r)
}
