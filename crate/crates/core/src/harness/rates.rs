//! Convergence of the perturbation with inclusion size and the first-order
//! expansion check, on one fine discretization shared by all radii.

use rayon::prelude::*;

use crate::adjoint::{solve_adjoint, trapezoid_weight};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, CsrMatrix};
use crate::mesh::Circle;
use crate::monodomain::{Inclusion, Indicator, StateTrajectory};
use crate::tensor::{Point, Sym2};
use crate::topo::{assemble_gradient_field, mismatch_j};
use crate::trace::{boundary_trace, residual_trace, TraceSeries};

use super::config::ExperimentConfig;
use super::pipeline::Discretization;

/// Space–time norms of `U = u_ω − u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerturbationNorms {
    /// `max_n ‖Uⁿ‖_{L²}`
    pub linf_l2: f64,
    /// `(Σ c_n dt ‖Uⁿ‖²_{H¹})^{1/2}`
    pub l2_h1: f64,
    /// `(Σ c_n dt ‖Uⁿ‖²_{L²})^{1/2}`
    pub l2_qt: f64,
}

/// Accumulates the norms one time level at a time.
#[derive(Debug, Clone, Default)]
pub struct NormAccumulator {
    linf_l2_sq: f64,
    h1_sq: f64,
    l2_sq: f64,
}

impl NormAccumulator {
    pub fn add(&mut self, mass: &CsrMatrix, stiffness: &CsrMatrix, diff: &[f64], weight: f64) {
        let l2 = mass.bilinear(diff, diff);
        let grad = stiffness.bilinear(diff, diff);
        self.linf_l2_sq = self.linf_l2_sq.max(l2);
        self.l2_sq += weight * l2;
        self.h1_sq += weight * (l2 + grad);
    }

    pub fn finish(&self) -> PerturbationNorms {
        PerturbationNorms {
            linf_l2: self.linf_l2_sq.sqrt(),
            l2_h1: self.h1_sq.sqrt(),
            l2_qt: self.l2_sq.sqrt(),
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter("slope fit needs at least two positive pairs".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Parameter("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub radius: f64,
    /// Discrete inclusion area `|ω_h|`.
    pub area: f64,
    pub norms: PerturbationNorms,
    /// Mismatch of this inclusion's trace against the reference trace.
    pub mismatch: f64,
    /// `(J(ω) − J(0)) / (|ω_h| G(z))`; undefined for the reference radius.
    pub expansion_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudy {
    pub center: Point,
    pub rows: Vec<RateRow>,
    pub slope_linf_l2: f64,
    pub slope_l2_h1: f64,
    pub slope_l2_qt: f64,
    /// Mismatch of the unperturbed trace.
    pub mismatch_background: f64,
    /// `G` at the centre, with the largest inclusion as the measurement.
    pub gradient_at_center: f64,
    pub num_nodes: usize,
}

impl RateStudy {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["radius", "area", "linf_l2", "l2_h1", "l2_qt", "J", "expansion_ratio"])?;
        for r in &self.rows {
            w.write_record([
                r.radius.to_string(),
                r.area.to_string(),
                r.norms.linf_l2.to_string(),
                r.norms.l2_h1.to_string(),
                r.norms.l2_qt.to_string(),
                r.mismatch.to_string(),
                r.expansion_ratio.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<rates csv>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "centre ({}, {}), {} fine nodes\nslope L-inf(L2) {:.4}\nslope L2(H1) {:.4}\nslope L2(Q_T) {:.4}\nJ(0) {:e}\nG(z) {:e}\n",
            self.center[0],
            self.center[1],
            self.num_nodes,
            self.slope_linf_l2,
            self.slope_l2_h1,
            self.slope_l2_qt,
            self.mismatch_background,
            self.gradient_at_center
        );
        for r in &self.rows {
            if let Some(q) = r.expansion_ratio {
                s += &format!("expansion ratio r = {}: {:.4}\n", r.radius, q);
            }
        }
        s
    }
}

struct PerturbedRun {
    trace: TraceSeries,
    norms: PerturbationNorms,
}

fn run_perturbed(
    cfg: &ExperimentConfig,
    disc: &Discretization,
    chi: &Indicator,
    background: &StateTrajectory,
    mass: &CsrMatrix,
    stiffness: &CsrMatrix,
) -> Result<PerturbedRun> {
    let nodes = disc.mesh.region_nodes(&cfg.regions);
    let mut trace = TraceSeries::new(&disc.mesh, nodes, disc.dt);
    let mut stepper = disc.stepper(cfg, Some(chi))?;
    let n_steps = stepper.num_steps();
    let mut acc = NormAccumulator::default();
    let mut diff = vec![0.0; disc.mesh.num_nodes()];
    loop {
        let n = stepper.step_index();
        for ((d, a), b) in diff.iter_mut().zip(stepper.u()).zip(&background.u[n]) {
            *d = a - b;
        }
        acc.add(mass, stiffness, &diff, trapezoid_weight(n, n_steps) * disc.dt);
        trace.push(stepper.u());
        if stepper.is_finished() {
            break;
        }
        stepper.advance().map_err(|e| e.in_stage("perturbed solve"))?;
    }
    Ok(PerturbedRun {
        trace,
        norms: acc.finish(),
    })
}

/// Solves the unperturbed and every perturbed problem on one fine mesh that
/// resolves all circles `|x − z| = r`. The largest inclusion's trace serves
/// as the measurement for the expansion ratio of the smaller ones.
pub fn rate_study(cfg: &ExperimentConfig) -> Result<RateStudy> {
    let radii = &cfg.rate_radii;
    if radii.len() < 3 || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter(
            "rate study needs at least three positive, strictly decreasing radii".into(),
        ));
    }
    let z = cfg.rate_center;
    let circles: Vec<Circle> = radii.iter().map(|&r| Circle::new(z, r)).collect();
    let disc = Discretization::fine(cfg, &[Inclusion::new(z, radii[0])], &circles)?;
    let indicators: Vec<Indicator> = radii
        .iter()
        .map(|&r| disc.indicator(cfg, &[Inclusion::new(z, r)]))
        .collect::<Result<_>>()?;
    let background = disc.forward(cfg, None)?;
    let mass = assemble_mass(&disc.mesh, false);
    let identity = vec![Sym2::identity(); disc.mesh.num_triangles()];
    let stiffness = assemble_stiffness(&disc.mesh, &identity)?;
    let runs: Vec<PerturbedRun> = indicators
        .par_iter()
        .map(|chi| run_perturbed(cfg, &disc, chi, &background, &mass, &stiffness))
        .collect::<Result<_>>()?;

    let reference = &runs[0].trace;
    let base_trace = boundary_trace(&background, &disc.mesh, &cfg.regions)?;
    let j0 = mismatch_j(&disc.mesh, &cfg.regions, &base_trace, reference)?;
    let residual = residual_trace(reference, &base_trace)?;
    let adjoint = solve_adjoint(&disc.mesh, &disc.k0, &background, &residual, &cfg.regions, &cfg.params)
        .map_err(|e| e.in_stage("adjoint solve"))?;
    let g = assemble_gradient_field(&disc.mesh, &background, &adjoint, &disc.k0, &disc.k1, &cfg.params, cfg.d0)?;
    let g_z = disc
        .mesh
        .interpolate(&g.values, z)
        .ok_or_else(|| Error::Inclusion("rate-study centre is outside the mesh".into()))?;

    let mut rows = Vec::with_capacity(radii.len());
    for (k, ((&radius, chi), run)) in radii.iter().zip(&indicators).zip(&runs).enumerate() {
        let j = mismatch_j(&disc.mesh, &cfg.regions, &run.trace, reference)?;
        rows.push(RateRow {
            radius,
            area: chi.area,
            norms: run.norms,
            mismatch: j,
            expansion_ratio: (k > 0).then(|| (j - j0) / (chi.area * g_z)),
        });
    }
    let areas: Vec<f64> = rows.iter().map(|r| r.area).collect();
    let slope = |f: fn(&PerturbationNorms) -> f64| {
        let y: Vec<f64> = rows.iter().map(|r| f(&r.norms)).collect();
        loglog_slope(&areas, &y)
    };
    Ok(RateStudy {
        center: z,
        slope_linf_l2: slope(|n| n.linf_l2)?,
        slope_l2_h1: slope(|n| n.l2_h1)?,
        slope_l2_qt: slope(|n| n.l2_qt)?,
        rows,
        mismatch_background: j0,
        gradient_at_center: g_z,
        num_nodes: disc.mesh.num_nodes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.2, 0.4, 0.8];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 2.0]).is_err());
    }
}
