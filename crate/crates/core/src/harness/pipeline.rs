//! Building blocks of an experiment: discretizations, synthetic data, noise,
//! resampling and the reconstruction itself.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adjoint::solve_adjoint;
use crate::error::{Error, Result};
use crate::fiber::{build_conductivity, fibers_from_potential, solve_fiber_laplace, FiberField, TensorField};
use crate::mesh::{Circle, Mesh, Refinement, RegionSet, VentricleMeshOptions};
use crate::monodomain::{
    indicator_field, initial_layer_stimulus, initial_patch_stimulus, initial_stimulus, solve_forward, ForwardProblem, ForwardStepper, Inclusion, Indicator,
    NewtonOptions, RunInfo, StateTrajectory,
};
use crate::tensor::dist;
use crate::topo::{assemble_gradient_field, locate_minima, mismatch_j, GradientField, LocalizationResult};
use crate::trace::{boundary_trace, residual_trace, TraceSeries};

use super::config::{ExperimentConfig, StimulusShape};

/// A mesh with its fiber field, both conductivity fields and a time step.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub potential: Vec<f64>,
    pub fibers: FiberField,
    pub k0: TensorField,
    pub k1: TensorField,
    pub dt: f64,
}

impl Discretization {
    pub fn from_mesh(mesh: Mesh, cfg: &ExperimentConfig, dt: f64) -> Result<Self> {
        let potential = solve_fiber_laplace(&mesh).map_err(|e| e.in_stage("fiber potential"))?;
        let fibers = fibers_from_potential(&mesh, &potential)?;
        let k0 = build_conductivity(&fibers, cfg.healthy.fiber, cfg.healthy.cross)?;
        let k1 = build_conductivity(&fibers, cfg.ischemic.fiber, cfg.ischemic.cross)?;
        Ok(Self {
            mesh,
            potential,
            fibers,
            k0,
            k1,
            dt,
        })
    }

    /// Reconstruction discretization: uniform `h_coarse`, `dt_coarse`.
    pub fn coarse(cfg: &ExperimentConfig) -> Result<Self> {
        let mesh = cfg
            .geometry
            .mesh(&VentricleMeshOptions::uniform(cfg.h_coarse))
            .map_err(|e| e.in_stage("coarse mesh"))?;
        Self::from_mesh(mesh, cfg, cfg.dt_coarse)
    }

    /// Data discretization: `h_fine`, `dt_fine`, boundary vertices nested with
    /// the coarse mesh, refined to `h_inclusion` around `inclusions` with the
    /// given circles resolved as interfaces.
    pub fn fine(cfg: &ExperimentConfig, inclusions: &[Inclusion], interfaces: &[Circle]) -> Result<Self> {
        let opts = VentricleMeshOptions {
            h: cfg.h_fine,
            boundary_multiplier: (cfg.h_coarse / cfg.h_fine).round().max(1.0) as usize,
            refinements: inclusions
                .iter()
                .map(|i| Refinement {
                    center: i.center,
                    radius: i.radius + 2.0 * cfg.h_inclusion,
                    size: cfg.h_inclusion,
                })
                .collect(),
            interfaces: interfaces.to_vec(),
        };
        let mesh = cfg.geometry.mesh(&opts).map_err(|e| e.in_stage("fine mesh"))?;
        Self::from_mesh(mesh, cfg, cfg.dt_fine)
    }

    /// Fine discretization for the configured inclusions, with their circles
    /// as interfaces.
    pub fn fine_for(cfg: &ExperimentConfig) -> Result<Self> {
        let circles: Vec<Circle> = cfg.inclusions.iter().map(|i| Circle::new(i.center, i.radius)).collect();
        Self::fine(cfg, &cfg.inclusions, &circles)
    }

    pub fn indicator(&self, cfg: &ExperimentConfig, inclusions: &[Inclusion]) -> Result<Indicator> {
        indicator_field(&self.mesh, inclusions, cfg.margin)
    }

    pub fn problem<'a>(&'a self, cfg: &ExperimentConfig, chi: Option<&'a Indicator>) -> ForwardProblem<'a> {
        ForwardProblem {
            mesh: &self.mesh,
            k0: &self.k0,
            inclusion: chi.map(|c| (&self.k1, c)),
            params: cfg.params,
            dt: self.dt,
            t_end: cfg.t_end,
            newton: NewtonOptions::default(),
        }
    }

    pub fn stimulus(&self, cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = &cfg.stimulus;
        match s.shape {
            StimulusShape::Disk => initial_stimulus(&self.mesh, s.center, s.radius, s.amplitude),
            StimulusShape::Layer => initial_layer_stimulus(&self.mesh, &s.regions, s.depth, s.amplitude),
            StimulusShape::Patch => initial_patch_stimulus(&self.mesh, &s.regions, s.depth, s.center, s.radius, s.amplitude),
        }
    }

    pub fn stepper<'a>(&'a self, cfg: &ExperimentConfig, chi: Option<&'a Indicator>) -> Result<ForwardStepper<'a>> {
        let (u0, w0) = self.stimulus(cfg)?;
        ForwardStepper::new(self.problem(cfg, chi), u0, w0)
    }

    /// Full trajectory (stores every level).
    pub fn forward(&self, cfg: &ExperimentConfig, chi: Option<&Indicator>) -> Result<StateTrajectory> {
        let (u0, w0) = self.stimulus(cfg)?;
        solve_forward(self.problem(cfg, chi), u0, w0).map_err(|e| e.in_stage("forward solve"))
    }

    /// Runs forward but keeps only the trace on `regions`.
    pub fn forward_trace(
        &self,
        cfg: &ExperimentConfig,
        chi: Option<&Indicator>,
        regions: &RegionSet,
    ) -> Result<(TraceSeries, RunInfo)> {
        let nodes = self.mesh.region_nodes(regions);
        if nodes.is_empty() {
            return Err(Error::Config(format!("no boundary nodes in region {regions}")));
        }
        let mut trace = TraceSeries::new(&self.mesh, nodes, self.dt);
        let mut stepper = self.stepper(cfg, chi)?;
        trace.push(stepper.u());
        while !stepper.is_finished() {
            stepper.advance().map_err(|e| e.in_stage("forward solve"))?;
            trace.push(stepper.u());
        }
        Ok((trace, stepper.into_info()))
    }
}

/// `ũ = u + ρ η` with `η` i.i.d. standard normal per (time, node), drawn in
/// time-major order from ChaCha8 seeded with `seed`.
pub fn add_noise(trace: &TraceSeries, rho: f64, seed: u64) -> Result<TraceSeries> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Parameter(format!("noise level {rho} outside [0, 1]")));
    }
    let mut out = trace.clone();
    if rho == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.values.iter_mut().flatten() {
        let eta: f64 = rng.sample(StandardNormal);
        *v += rho * eta;
    }
    Ok(out)
}

/// Resamples a trace onto the nodes of `regions` on `mesh` (nearest source
/// node) and onto the grid `n·dt`, `n = 0..=round(t_end/dt)` (linear in time).
pub fn resample_trace(source: &TraceSeries, mesh: &Mesh, regions: &RegionSet, dt: f64, t_end: f64) -> Result<TraceSeries> {
    let targets = mesh.region_nodes(regions);
    if targets.is_empty() {
        return Err(Error::Config(format!("no boundary nodes in region {regions}")));
    }
    if source.num_times() < 2 {
        return Err(Error::GridMismatch("source trace has fewer than two time levels".into()));
    }
    let src_end = source.time(source.num_times() - 1);
    if t_end > src_end * (1.0 + 1e-12) {
        return Err(Error::GridMismatch(format!("source trace ends at {src_end}, need {t_end}")));
    }
    let nearest: Vec<usize> = targets
        .iter()
        .map(|&i| {
            let p = mesh.nodes()[i];
            (0..source.num_nodes())
                .min_by(|&a, &b| dist(p, source.coords[a]).total_cmp(&dist(p, source.coords[b])))
                .expect("source has nodes")
        })
        .collect();
    let n_steps = (t_end / dt).round() as usize;
    let mut out = TraceSeries::new(mesh, targets, dt);
    for n in 0..=n_steps {
        let s = n as f64 * dt / source.dt;
        let i0 = (s.floor() as usize).min(source.num_times() - 2);
        let frac = (s - i0 as f64).clamp(0.0, 1.0);
        let (a, b) = (&source.values[i0], &source.values[i0 + 1]);
        out.values
            .push(nearest.iter().map(|&k| a[k] + frac * (b[k] - a[k])).collect());
    }
    Ok(out)
}

/// Synthetic measurements of one configuration.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Noise-free trace on the fine discretization.
    pub fine: TraceSeries,
    /// Noisy trace resampled to the coarse discretization.
    pub measured: TraceSeries,
    pub info: RunInfo,
    pub inclusion_area: f64,
}

/// Perturbed fine solve → trace → noise (`cfg.noise`, `cfg.seed`) → resampling
/// onto `coarse`.
pub fn generate_synthetic(cfg: &ExperimentConfig, fine: &Discretization, coarse: &Mesh) -> Result<SyntheticData> {
    let chi = fine.indicator(cfg, &cfg.inclusions)?;
    let (trace, info) = fine.forward_trace(cfg, Some(&chi), &cfg.regions)?;
    let measured = measurement_from_fine(cfg, &trace, coarse, cfg.noise, cfg.seed)?;
    Ok(SyntheticData {
        fine: trace,
        measured,
        info,
        inclusion_area: chi.area,
    })
}

/// Noise first, then resampling.
pub fn measurement_from_fine(
    cfg: &ExperimentConfig,
    fine: &TraceSeries,
    coarse: &Mesh,
    rho: f64,
    seed: u64,
) -> Result<TraceSeries> {
    let noisy = add_noise(fine, rho, seed)?;
    resample_trace(&noisy, coarse, &cfg.regions, cfg.dt_coarse, cfg.t_end)
}

#[derive(Debug, Clone)]
pub struct GradientRun {
    pub gradient: GradientField,
    pub mismatch: f64,
}

/// Mismatch and topological gradient for `measured` given the unperturbed
/// coarse trajectory.
pub fn topological_gradient(
    cfg: &ExperimentConfig,
    disc: &Discretization,
    forward: &StateTrajectory,
    measured: &TraceSeries,
) -> Result<GradientRun> {
    let simulated = boundary_trace(forward, &disc.mesh, &cfg.regions)?;
    let residual = residual_trace(measured, &simulated)?;
    let mismatch = mismatch_j(&disc.mesh, &cfg.regions, &simulated, measured)?;
    let adjoint = solve_adjoint(&disc.mesh, &disc.k0, forward, &residual, &cfg.regions, &cfg.params)
        .map_err(|e| e.in_stage("adjoint solve"))?;
    let gradient = assemble_gradient_field(&disc.mesh, forward, &adjoint, &disc.k0, &disc.k1, &cfg.params, cfg.d0)
        .map_err(|e| e.in_stage("topological gradient"))?;
    Ok(GradientRun { gradient, mismatch })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub gradient: GradientField,
    pub localization: LocalizationResult,
    pub mismatch: f64,
}

pub fn reconstruct(
    cfg: &ExperimentConfig,
    disc: &Discretization,
    forward: &StateTrajectory,
    measured: &TraceSeries,
) -> Result<Reconstruction> {
    let run = topological_gradient(cfg, disc, forward, measured)?;
    let localization = locate_minima(&disc.mesh, &run.gradient, cfg.minima, cfg.min_separation)?;
    Ok(Reconstruction {
        gradient: run.gradient,
        localization,
        mismatch: run.mismatch,
    })
}
