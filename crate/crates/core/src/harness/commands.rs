//! The experiment steps behind each CLI subcommand. Every function reads its
//! inputs from and writes its artifacts to one output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_vtk, VtkData};
use crate::mesh::save_mesh;
use crate::tensor::dist;
use crate::topo::{GradientField, LocalizationResult};
use crate::trace::{boundary_trace, TraceSeries};

use super::config::ExperimentConfig;
use super::pipeline::{measurement_from_fine, reconstruct, topological_gradient, Discretization};
use super::provenance::{check_provenance, write_with_provenance, Provenance};
use super::rates::{rate_study, RateStudy};

pub const FINE_TRACE: &str = "measurements_fine.csv";
pub const NULL_FINE_TRACE: &str = "null_fine.csv";
pub const MEASUREMENTS: &str = "measurements.csv";
pub const NULL_TRACE: &str = "null.csv";

/// Summary of the `mesh` step.
#[derive(Debug, Clone)]
pub struct MeshSummary {
    pub coarse_nodes: usize,
    pub coarse_triangles: usize,
    pub fine_nodes: usize,
    pub fine_triangles: usize,
}

fn csv_bytes(trace: &TraceSeries) -> Result<Vec<u8>> {
    Ok(trace.to_csv_string()?.into_bytes())
}

fn validated(disc: &Discretization, what: &str) -> Result<()> {
    let v = disc.mesh.validate();
    if v.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
    Err(Error::Validation(format!("{what} mesh: {}", list.join("; "))))
}

/// Generates and validates the coarse and fine meshes.
pub fn run_mesh(cfg: &ExperimentConfig, out: &Path) -> Result<MeshSummary> {
    let coarse = Discretization::coarse(cfg)?;
    validated(&coarse, "coarse")?;
    let fine = Discretization::fine_for(cfg)?;
    validated(&fine, "fine")?;
    save_mesh(&coarse.mesh, out.join("mesh_coarse.msh"))?;
    save_mesh(&fine.mesh, out.join("mesh_fine.msh"))?;
    Ok(MeshSummary {
        coarse_nodes: coarse.mesh.num_nodes(),
        coarse_triangles: coarse.mesh.num_triangles(),
        fine_nodes: fine.mesh.num_nodes(),
        fine_triangles: fine.mesh.num_triangles(),
    })
}

/// Fiber potential and directions on the coarse mesh.
pub fn run_fibers(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let disc = Discretization::coarse(cfg)?;
    let path = out.join("fibers.vtk");
    let vtk = write_vtk(
        &disc.mesh,
        "fiber field",
        &[VtkData::Scalar("potential", &disc.potential)],
        &[VtkData::Vector("fiber", &disc.fibers.e_f), VtkData::Vector("normal", &disc.fibers.e_n)],
    );
    write_atomic(&path, vtk.as_bytes())?;
    Ok(path)
}

/// Unperturbed coarse solve: boundary trace plus final state and activation
/// time as VTK.
pub fn run_forward(cfg: &ExperimentConfig, out: &Path) -> Result<TraceSeries> {
    let disc = Discretization::coarse(cfg)?;
    let traj = disc.forward(cfg, None)?;
    let trace = boundary_trace(&traj, &disc.mesh, &cfg.regions)?;
    let prov = Provenance::new(cfg.hash(), cfg.seed, "forward-trace");
    write_with_provenance(&out.join("forward_trace.csv"), &csv_bytes(&trace)?, &prov)?;
    let n = disc.mesh.num_nodes();
    let mut activation = vec![-1.0; n];
    for (k, u) in traj.u.iter().enumerate() {
        for i in 0..n {
            if activation[i] < 0.0 && u[i] >= 0.5 {
                activation[i] = traj.time(k);
            }
        }
    }
    let last = traj.num_steps();
    let vtk = write_vtk(
        &disc.mesh,
        "forward solution at final time",
        &[
            VtkData::Scalar("u", &traj.u[last]),
            VtkData::Scalar("w", &traj.w[last]),
            VtkData::Scalar("activation_time", &activation),
        ],
        &[],
    );
    write_atomic(&out.join("forward.vtk"), vtk.as_bytes())?;
    Ok(trace)
}

/// Noise-free fine traces of the perturbed and unperturbed problems, the
/// noisy coarse measurement and the coarse null trace.
pub fn run_synth(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    if cfg.inclusions.is_empty() {
        log::warn!("no inclusions configured; the measurement is a null experiment");
    }
    let fine = Discretization::fine_for(cfg)?;
    let coarse = Discretization::coarse(cfg)?;
    let chi = fine.indicator(cfg, &cfg.inclusions)?;
    log::info!(
        "fine discretization: {} nodes, dt {}; inclusion area {:.4e}",
        fine.mesh.num_nodes(),
        fine.dt,
        chi.area
    );
    let (with, info) = fine.forward_trace(cfg, Some(&chi), &cfg.regions)?;
    for w in &info.warnings {
        log::warn!("{w}");
    }
    let (null, _) = fine.forward_trace(cfg, None, &cfg.regions)?;
    let data = Provenance::new(cfg.data_hash(), 0, "fine-trace");
    write_with_provenance(&out.join(FINE_TRACE), &csv_bytes(&with)?, &data)?;
    write_with_provenance(&out.join(NULL_FINE_TRACE), &csv_bytes(&null)?, &data)?;
    write_noisy(cfg, &with, &null, &coarse, out)
}

fn write_noisy(cfg: &ExperimentConfig, with: &TraceSeries, null: &TraceSeries, coarse: &Discretization, out: &Path) -> Result<()> {
    let measured = measurement_from_fine(cfg, with, &coarse.mesh, cfg.noise, cfg.seed)?;
    let null_coarse = measurement_from_fine(cfg, null, &coarse.mesh, 0.0, 0)?;
    let prov = Provenance::new(cfg.hash(), cfg.seed, "measurement");
    write_with_provenance(&out.join(MEASUREMENTS), &csv_bytes(&measured)?, &prov)?;
    write_with_provenance(&out.join(NULL_TRACE), &csv_bytes(&null_coarse)?, &prov)
}

fn load_checked(path: &Path, hash: &str) -> Result<TraceSeries> {
    check_provenance(path, hash)?;
    TraceSeries::load_csv(path)
}

/// Re-derives the coarse measurement from stored fine traces with the
/// configured noise level and seed.
pub fn run_noise(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let data = cfg.data_hash();
    let with = load_checked(&out.join(FINE_TRACE), &data)?;
    let null = load_checked(&out.join(NULL_FINE_TRACE), &data)?;
    let coarse = Discretization::coarse(cfg)?;
    write_noisy(cfg, &with, &null, &coarse, out)
}

/// Outcome of one reconstruction with its inverse-crime floor.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub gradient: GradientField,
    pub localization: LocalizationResult,
    pub mismatch: f64,
    /// Mismatch of the null measurement.
    pub null_mismatch: f64,
    /// `max |G|` over the mask for the null measurement.
    pub floor: f64,
}

impl ReconstructionReport {
    /// The minimum is not significant against the inverse-crime floor.
    pub fn low_confidence(&self) -> bool {
        self.localization.best().value.abs() < 10.0 * self.floor
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash = {}", cfg.hash());
        let _ = writeln!(s, "seed = {}", cfg.seed);
        let _ = writeln!(s, "regions = {}", cfg.regions);
        let _ = writeln!(s, "noise = {}", cfg.noise);
        let _ = writeln!(s, "J = {:e}", self.mismatch);
        let _ = writeln!(s, "null_J = {:e}", self.null_mismatch);
        let _ = writeln!(s, "floor = {:e}", self.floor);
        for (k, m) in self.localization.minima.iter().enumerate() {
            let _ = writeln!(
                s,
                "minimum {} = node {} at ({:.4}, {:.4}), G = {:e}, separation {:.4}",
                k + 1,
                m.node,
                m.point[0],
                m.point[1],
                m.value,
                m.separation
            );
        }
        for (k, inc) in cfg.inclusions.iter().enumerate() {
            let d = self
                .localization
                .minima
                .iter()
                .map(|m| dist(m.point, inc.center))
                .fold(f64::INFINITY, f64::min);
            let _ = writeln!(s, "inclusion {} distance to nearest minimum = {:.4}", k + 1, d);
        }
        let status = if self.low_confidence() { "LOW-CONFIDENCE" } else { "DETECTED" };
        let _ = writeln!(s, "status = {status}");
        s
    }

    pub fn gradient_csv(&self, mesh: &crate::mesh::Mesh) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node_id", "x", "y", "G"])?;
        for (i, (p, g)) in mesh.nodes().iter().zip(&self.gradient.values).enumerate() {
            w.write_record([i.to_string(), p[0].to_string(), p[1].to_string(), g.to_string()])?;
        }
        finish_csv(w)
    }

    pub fn minima_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "node_id", "x", "y", "G", "separation"])?;
        for (k, m) in self.localization.minima.iter().enumerate() {
            w.write_record([
                (k + 1).to_string(),
                m.node.to_string(),
                m.point[0].to_string(),
                m.point[1].to_string(),
                m.value.to_string(),
                m.separation.to_string(),
            ])?;
        }
        finish_csv(w)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Reconstruction of `measured` together with the null floor from `null`.
pub fn reconstruct_with_floor(
    cfg: &ExperimentConfig,
    disc: &Discretization,
    forward: &crate::monodomain::StateTrajectory,
    measured: &TraceSeries,
    null: &TraceSeries,
) -> Result<ReconstructionReport> {
    let rec = reconstruct(cfg, disc, forward, measured)?;
    let null_run = topological_gradient(cfg, disc, forward, null)?;
    Ok(ReconstructionReport {
        gradient: rec.gradient,
        localization: rec.localization,
        mismatch: rec.mismatch,
        null_mismatch: null_run.mismatch,
        floor: null_run.gradient.max_abs_masked(),
    })
}

/// Runs the reconstruction on the coarse discretization from the stored
/// measurement and null traces.
pub fn run_reconstruct(cfg: &ExperimentConfig, out: &Path) -> Result<ReconstructionReport> {
    let hash = cfg.hash();
    let measured = load_checked(&out.join(MEASUREMENTS), &hash)?;
    let null = load_checked(&out.join(NULL_TRACE), &hash)?;
    let disc = Discretization::coarse(cfg)?;
    let forward = disc.forward(cfg, None)?;
    let report = reconstruct_with_floor(cfg, &disc, &forward, &measured, &null)?;
    let prov = Provenance::new(hash.clone(), cfg.seed, "reconstruction");
    write_with_provenance(&out.join("gradient.csv"), report.gradient_csv(&disc.mesh)?.as_bytes(), &prov)?;
    write_with_provenance(&out.join("minima.csv"), report.minima_csv()?.as_bytes(), &prov)?;
    let mask: Vec<f64> = report.gradient.mask.iter().map(|&m| f64::from(u8::from(m))).collect();
    let vtk = write_vtk(
        &disc.mesh,
        "topological gradient",
        &[VtkData::Scalar("G", &report.gradient.values), VtkData::Scalar("mask", &mask)],
        &[],
    );
    write_with_provenance(&out.join("gradient.vtk"), vtk.as_bytes(), &prov)?;
    let text = report.render(cfg);
    write_with_provenance(&out.join("report.txt"), text.as_bytes(), &prov)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "config_hash = {hash}");
    let _ = writeln!(manifest, "data_hash = {}", cfg.data_hash());
    let _ = writeln!(manifest, "seed = {}", cfg.seed);
    let _ = writeln!(manifest, "coarse_nodes = {}", disc.mesh.num_nodes());
    let _ = writeln!(manifest, "dt = {}", disc.dt);
    let _ = writeln!(manifest, "t_end = {}", cfg.t_end);
    for f in [MEASUREMENTS, NULL_TRACE, "gradient.csv", "minima.csv", "gradient.vtk", "report.txt"] {
        let _ = writeln!(manifest, "file = {f}");
    }
    let _ = writeln!(manifest, "\n{}", cfg.canonical());
    write_atomic(&out.join("manifest.txt"), manifest.as_bytes())?;
    Ok(report)
}

pub fn run_rates(cfg: &ExperimentConfig, out: &Path) -> Result<RateStudy> {
    let study = rate_study(cfg)?;
    let prov = Provenance::new(cfg.hash(), cfg.seed, "rates");
    write_with_provenance(&out.join("rates.csv"), study.to_csv()?.as_bytes(), &prov)?;
    write_with_provenance(&out.join("rates_summary.txt"), study.summary().as_bytes(), &prov)?;
    Ok(study)
}
