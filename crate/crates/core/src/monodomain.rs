//! Monodomain equation with Aliev–Panfilov kinetics: implicit Euler in time,
//! Newton per step with the recovery variable eliminated nodewise.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, lumped_mass, solve_linear_from, CsrMatrix, SolveOptions};
use crate::fiber::TensorField;
use crate::mesh::{Mesh, RegionSet};
use crate::tensor::{dist, Point, Sym2};

/// Aliev–Panfilov parameters (`A`, threshold `a`, recovery rate `ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonicParams {
    pub excitation: f64,
    pub threshold: f64,
    pub eps: f64,
}

/// Reaction terms and their exact partial derivatives at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reaction {
    pub f: f64,
    pub g: f64,
    pub f_u: f64,
    pub f_w: f64,
    pub g_u: f64,
    pub g_w: f64,
}

impl IonicParams {
    pub fn new(excitation: f64, threshold: f64, eps: f64) -> Result<Self> {
        if !(excitation > 0.0 && threshold > 0.0 && threshold < 1.0 && eps > 0.0) {
            return Err(Error::Parameter(format!(
                "ionic parameters need A > 0, 0 < a < 1, eps > 0 (got {excitation}, {threshold}, {eps})"
            )));
        }
        Ok(Self {
            excitation,
            threshold,
            eps,
        })
    }

    /// `A = 8`, `a = 0.15`, `ε = 0.05`.
    pub const fn standard() -> Self {
        Self {
            excitation: 8.0,
            threshold: 0.15,
            eps: 0.05,
        }
    }

    /// Upper `w` bound of the invariant rectangle `[0, 1] × [0, A(1+a)²/4]`.
    pub fn w_max(&self) -> f64 {
        self.excitation * (1.0 + self.threshold).powi(2) / 4.0
    }

    #[inline]
    pub fn reaction(&self, u: f64, w: f64) -> Reaction {
        let (aa, a, e) = (self.excitation, self.threshold, self.eps);
        Reaction {
            f: aa * u * (u - a) * (u - 1.0) + u * w,
            g: e * (aa * u * (u - 1.0 - a) + w),
            f_u: aa * (3.0 * u * u - 2.0 * (1.0 + a) * u + a) + w,
            f_w: u,
            g_u: e * aa * (2.0 * u - 1.0 - a),
            g_w: e,
        }
    }
}

impl Default for IonicParams {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn reaction_eval(u: f64, w: f64, params: &IonicParams) -> Reaction {
    params.reaction(u, w)
}

/// Disk-shaped inclusion `{z + rB}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: Point,
    pub radius: f64,
}

impl Inclusion {
    pub const fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) < self.radius
    }
}

/// Element indicator of a union of inclusions.
#[derive(Debug, Clone, PartialEq)]
pub struct Indicator {
    pub elements: Vec<bool>,
    pub inclusions: Vec<Inclusion>,
    /// Discrete area `|ω_h|` (sum of marked element areas).
    pub area: f64,
}

impl Indicator {
    pub fn empty(mesh: &Mesh) -> Self {
        Self {
            elements: vec![false; mesh.num_triangles()],
            inclusions: Vec::new(),
            area: 0.0,
        }
    }

    /// Area-weighted nodal average of the element indicator.
    pub fn nodal(&self, mesh: &Mesh) -> Vec<f64> {
        let vals: Vec<f64> = self.elements.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        crate::fem::element_to_nodal(mesh, &vals, |t| mesh.signed_area(t))
    }
}

/// Marks elements whose centroid lies in some inclusion. Inclusions must be
/// disjoint, inside the mesh, and at least `margin` away from the boundary.
pub fn indicator_field(mesh: &Mesh, inclusions: &[Inclusion], margin: f64) -> Result<Indicator> {
    for (k, inc) in inclusions.iter().enumerate() {
        if !(inc.radius > 0.0) {
            return Err(Error::Inclusion(format!("inclusion {k} has nonpositive radius")));
        }
        if mesh.locate(inc.center).is_none() {
            return Err(Error::Inclusion(format!(
                "inclusion {k} centre ({}, {}) lies outside the domain",
                inc.center[0], inc.center[1]
            )));
        }
        let d = mesh.point_boundary_distance(inc.center);
        if d < inc.radius + margin {
            return Err(Error::Inclusion(format!(
                "inclusion {k} is {d:.4} cm from the boundary; needs radius + margin = {:.4}",
                inc.radius + margin
            )));
        }
        for (j, other) in inclusions.iter().enumerate().take(k) {
            if dist(inc.center, other.center) <= inc.radius + other.radius {
                return Err(Error::Inclusion(format!("inclusions {j} and {k} overlap")));
            }
        }
    }
    let mut elements = vec![false; mesh.num_triangles()];
    let mut area = 0.0;
    for (t, e) in elements.iter_mut().enumerate() {
        let c = mesh.centroid(t);
        if inclusions.iter().any(|i| i.contains(c)) {
            *e = true;
            area += mesh.signed_area(t);
        }
    }
    Ok(Indicator {
        elements,
        inclusions: inclusions.to_vec(),
        area,
    })
}

/// Fraction of the stimulus extent held at full amplitude.
pub const STIMULUS_PLATEAU: f64 = 0.8;

/// Flat-top profile of a normalised distance `ρ` (1 at the stimulus edge):
/// 1 for `ρ ≤ 0.8`, then the C² taper `((1 + cos(π s))/2)²`, `s = (ρ − 0.8)/0.2`.
pub fn stimulus_profile(rho: f64) -> f64 {
    let s = ((rho - STIMULUS_PLATEAU) / (1.0 - STIMULUS_PLATEAU)).max(0.0);
    if s < 1.0 {
        let c = 0.5 * (1.0 + (std::f64::consts::PI * s).cos());
        c * c
    } else {
        0.0
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::Parameter(format!("stimulus amplitude {amplitude} outside (0, 1]")));
    }
    Ok(())
}

/// Disk stimulus `u0 = amplitude·profile(|x − site|/radius)`, `w0 = 0`.
pub fn initial_stimulus(mesh: &Mesh, site: Point, radius: f64, amplitude: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_amplitude(amplitude)?;
    if !(radius > 0.0) {
        return Err(Error::Parameter("stimulus radius must be positive".into()));
    }
    if mesh.locate(site).is_none() || mesh.point_boundary_distance(site) < radius {
        return Err(Error::Parameter(format!(
            "stimulus disk at ({}, {}) radius {radius} is not inside the domain",
            site[0], site[1]
        )));
    }
    let u0 = mesh
        .nodes()
        .iter()
        .map(|&p| amplitude * stimulus_profile(dist(p, site) / radius))
        .collect();
    Ok((u0, vec![0.0; mesh.num_nodes()]))
}

/// Layer stimulus along the boundary parts in `regions`:
/// `u0 = amplitude·profile(d/depth)` with `d` the distance to those parts.
pub fn initial_layer_stimulus(
    mesh: &Mesh,
    regions: &RegionSet,
    depth: f64,
    amplitude: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_amplitude(amplitude)?;
    if !(depth > 0.0) {
        return Err(Error::Parameter("stimulus depth must be positive".into()));
    }
    if regions.iter().all(|r| !mesh.has_region(r)) {
        return Err(Error::Config(format!("no boundary edges in stimulus region {regions}")));
    }
    let u0 = mesh
        .region_distance(regions)
        .into_iter()
        .map(|d| amplitude * stimulus_profile(d / depth))
        .collect();
    Ok((u0, vec![0.0; mesh.num_nodes()]))
}

/// Layer stimulus restricted to the part of the boundary near `site`:
/// the layer profile times `profile(|x − site|/radius)`.
pub fn initial_patch_stimulus(
    mesh: &Mesh,
    regions: &RegionSet,
    depth: f64,
    site: Point,
    radius: f64,
    amplitude: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(radius > 0.0) {
        return Err(Error::Parameter("stimulus radius must be positive".into()));
    }
    let (mut u0, w0) = initial_layer_stimulus(mesh, regions, depth, amplitude)?;
    for (u, &p) in u0.iter_mut().zip(mesh.nodes()) {
        *u *= stimulus_profile(dist(p, site) / radius);
    }
    if u0.iter().all(|&u| u == 0.0) {
        return Err(Error::Parameter(format!(
            "stimulus patch at ({}, {}) radius {radius} does not reach {regions}",
            site[0], site[1]
        )));
    }
    Ok((u0, w0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when the max-norm of the Newton increment is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20,
        }
    }
}

/// Everything that defines a forward run apart from the initial state.
#[derive(Debug, Clone, Copy)]
pub struct ForwardProblem<'a> {
    pub mesh: &'a Mesh,
    pub k0: &'a TensorField,
    /// Ischemic conductivity and indicator (perturbed problem) or `None`.
    pub inclusion: Option<(&'a TensorField, &'a Indicator)>,
    pub params: IonicParams,
    pub dt: f64,
    pub t_end: f64,
    pub newton: NewtonOptions,
}

impl ForwardProblem<'_> {
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::Parameter("dt and T must be positive".into()));
        }
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Parameter(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Per-element conductivity: `K1` on marked elements, `K0` elsewhere.
    pub fn conductivity(&self) -> Result<Vec<Sym2>> {
        let ne = self.mesh.num_triangles();
        if self.k0.len() != ne {
            return Err(Error::Dimension(format!("{} tensors for {ne} triangles", self.k0.len())));
        }
        Ok(match self.inclusion {
            None => self.k0.to_vec(),
            Some((k1, chi)) => {
                if k1.len() != ne || chi.elements.len() != ne {
                    return Err(Error::Dimension("inclusion data does not match the mesh".into()));
                }
                (0..ne).map(|t| if chi.elements[t] { k1[t] } else { self.k0[t] }).collect()
            }
        })
    }
}

/// Record of a forward run (everything except the states).
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub params: IonicParams,
    pub mesh_id: String,
    pub inclusions: Vec<Inclusion>,
    pub dt: f64,
    /// Number of (node, step) events outside the inflated invariant rectangle.
    pub box_exits: usize,
    pub warnings: Vec<String>,
    pub max_newton_iterations: usize,
}

/// Time-stepper exposing the state after every step; memory stays O(nodes).
pub struct ForwardStepper<'a> {
    problem: ForwardProblem<'a>,
    n_steps: usize,
    step: usize,
    u: Vec<f64>,
    w: Vec<f64>,
    mass: Vec<f64>,
    /// `1 − χ` at nodes.
    healthy: Vec<f64>,
    base: CsrMatrix,
    jac: CsrMatrix,
    diag_pos: Vec<usize>,
    info: RunInfo,
    last_increments: Vec<f64>,
}

const BOX_SLACK: f64 = 0.02;

impl<'a> ForwardStepper<'a> {
    pub fn new(problem: ForwardProblem<'a>, u0: Vec<f64>, w0: Vec<f64>) -> Result<Self> {
        let mesh = problem.mesh;
        let n = mesh.num_nodes();
        if u0.len() != n || w0.len() != n {
            return Err(Error::Dimension(format!("initial state length does not match {n} nodes")));
        }
        let w_max = problem.params.w_max();
        if u0
            .iter()
            .zip(&w0)
            .any(|(&u, &w)| !(0.0..=1.0).contains(&u) || !(0.0..=w_max).contains(&w))
        {
            return Err(Error::Parameter("initial state outside the invariant rectangle".into()));
        }
        let n_steps = problem.num_steps()?;
        let k = problem.conductivity()?;
        let mut base = assemble_stiffness(mesh, &k)?;
        let mass = lumped_mass(mesh);
        let inv_dt = 1.0 / problem.dt;
        base.add_diagonal(&mass.iter().map(|m| m * inv_dt).collect::<Vec<_>>());
        let healthy = match problem.inclusion {
            None => vec![1.0; n],
            Some((_, chi)) => chi.nodal(mesh).iter().map(|c| 1.0 - c).collect(),
        };
        let diag_pos = base.diagonal_positions();
        let jac = base.clone();
        let info = RunInfo {
            params: problem.params,
            mesh_id: mesh.fingerprint(),
            inclusions: problem.inclusion.map(|(_, c)| c.inclusions.clone()).unwrap_or_default(),
            dt: problem.dt,
            box_exits: 0,
            warnings: Vec::new(),
            max_newton_iterations: 0,
        };
        Ok(Self {
            problem,
            n_steps,
            step: 0,
            u: u0,
            w: w0,
            mass,
            healthy,
            base,
            jac,
            diag_pos,
            info,
            last_increments: Vec::new(),
        })
    }

    pub fn num_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.problem.dt
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn info(&self) -> &RunInfo {
        &self.info
    }

    pub fn into_info(self) -> RunInfo {
        self.info
    }

    /// Newton increment norms of the most recent step.
    pub fn last_increments(&self) -> &[f64] {
        &self.last_increments
    }

    /// Advances one time step.
    pub fn advance(&mut self) -> Result<()> {
        let p = &self.problem.params;
        let dt = self.problem.dt;
        let inv_dt = 1.0 / dt;
        let n = self.u.len();
        let (aa, a, e) = (p.excitation, p.threshold, p.eps);
        let w_old = &self.w;
        let u_old = self.u.clone();
        let mut u = self.u.clone();
        let w_of = |u: f64, w_prev: f64| (w_prev - dt * e * aa * u * (u - 1.0 - a)) / (1.0 + dt * e);
        let dw_du = |u: f64| -dt * e * aa * (2.0 * u - 1.0 - a) / (1.0 + dt * e);

        let mut residual = vec![0.0; n];
        let mut au = vec![0.0; n];
        let mut delta = vec![0.0; n];
        self.last_increments.clear();
        let opts = SolveOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let mut converged = false;
        let mut last_res = 0.0;
        for _ in 0..self.problem.newton.max_iter {
            // R(u) = M(u − uⁿ)/dt + A u + M(1−χ) f(u, w(u)); `base` holds A + M/dt.
            self.base.matvec_into(&u, &mut au);
            self.jac.values_mut().copy_from_slice(self.base.values());
            let mut res_norm: f64 = 0.0;
            for i in 0..n {
                let wi = w_of(u[i], w_old[i]);
                let r = p.reaction(u[i], wi);
                let ms = self.mass[i] * self.healthy[i];
                residual[i] = -(au[i] - self.mass[i] * inv_dt * u_old[i] + ms * r.f);
                res_norm = res_norm.max(residual[i].abs());
                self.jac.values_mut()[self.diag_pos[i]] += ms * (r.f_u + r.f_w * dw_du(u[i]));
            }
            last_res = res_norm;
            delta.iter_mut().for_each(|d| *d = 0.0);
            solve_linear_from(&self.jac, &residual, &mut delta, &opts).map_err(|err| {
                Error::Stage {
                    stage: "Newton linear solve",
                    source: Box::new(err),
                }
            })?;
            let inc = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            for i in 0..n {
                u[i] += delta[i];
            }
            self.last_increments.push(inc);
            if !inc.is_finite() {
                break;
            }
            if inc <= self.problem.newton.tol {
                converged = true;
                break;
            }
        }
        let iters = self.last_increments.len();
        self.info.max_newton_iterations = self.info.max_newton_iterations.max(iters);
        if !converged {
            return Err(Error::NewtonDivergence {
                step: self.step + 1,
                time: (self.step + 1) as f64 * dt,
                increment: self.last_increments.last().copied().unwrap_or(f64::NAN),
                residual: last_res,
            });
        }
        let w: Vec<f64> = (0..n).map(|i| w_of(u[i], w_old[i])).collect();
        self.u = u;
        self.w = w;
        self.step += 1;
        self.monitor();
        Ok(())
    }

    fn monitor(&mut self) {
        let w_max = self.problem.params.w_max();
        let exits = self
            .u
            .iter()
            .zip(&self.w)
            .filter(|(&u, &w)| {
                !(-BOX_SLACK..=1.0 + BOX_SLACK).contains(&u) || !(-BOX_SLACK..=w_max + BOX_SLACK).contains(&w)
            })
            .count();
        if exits > 0 {
            self.info.box_exits += exits;
            if self.info.warnings.len() < 10 {
                let msg = format!(
                    "step {} (t = {:.4}): {exits} node(s) outside the invariant rectangle",
                    self.step,
                    self.time()
                );
                warn!("{msg}");
                self.info.warnings.push(msg);
            }
        }
    }
}

/// Full space-time solution on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub dt: f64,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub info: RunInfo,
}

impl StateTrajectory {
    pub fn num_steps(&self) -> usize {
        self.u.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.u.len()).map(|n| self.time(n)).collect()
    }
}

/// Runs the forward problem and keeps every time level.
pub fn solve_forward(problem: ForwardProblem<'_>, u0: Vec<f64>, w0: Vec<f64>) -> Result<StateTrajectory> {
    let mut stepper = ForwardStepper::new(problem, u0, w0)?;
    let mut u = vec![stepper.u().to_vec()];
    let mut w = vec![stepper.w().to_vec()];
    while !stepper.is_finished() {
        stepper.advance()?;
        u.push(stepper.u().to_vec());
        w.push(stepper.w().to_vec());
    }
    debug!(
        "forward solve: {} steps, max Newton iterations {}",
        stepper.num_steps(),
        stepper.info().max_newton_iterations
    );
    Ok(StateTrajectory {
        dt: problem.dt,
        u,
        w,
        info: stepper.into_info(),
    })
}
