//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. `ACCEPTANCE_ONLY=3,4` restricts the run to a subset.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ischemia_core::adjoint::solve_adjoint;
use ischemia_core::fem::{assemble_boundary_mass, assemble_stiffness, lumped_mass};
use ischemia_core::fiber::TensorField;
use ischemia_core::harness::commands::{run_reconstruct, run_synth};
use ischemia_core::harness::{measurement_from_fine, rate_study, reconstruct, topological_gradient, Discretization, ExperimentConfig};
use ischemia_core::mesh::{structured_rectangle, BoundaryRegion, RegionSet};
use ischemia_core::monodomain::{
    initial_stimulus, solve_forward, ForwardProblem, ForwardStepper, Inclusion, IonicParams, NewtonOptions, StateTrajectory,
};
use ischemia_core::polarization::{polarization_disk, transmission_oracle};
use ischemia_core::tensor::{dist, Sym2};
use ischemia_core::trace::TraceSeries;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

const SEPTUM: [f64; 2] = [1.3, 0.0];
const LV_WALL: [f64; 2] = [-2.575, 0.0];
const RV_WALL: [f64; 2] = [4.175, 0.0];
const RADIUS: f64 = 0.15;

fn regions(r: BoundaryRegion) -> RegionSet {
    r.into()
}

// ---------------------------------------------------------------- AC1

fn rest_state() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.dt_coarse = 0.05;
    let disc = Discretization::coarse(&cfg).map_err(err)?;
    let n = disc.mesh.num_nodes();
    let start = Instant::now();
    let mut stepper = ForwardStepper::new(disc.problem(&cfg, None), vec![0.0; n], vec![0.0; n]).map_err(err)?;
    let mut worst: f64 = 0.0;
    while !stepper.is_finished() {
        stepper.advance().map_err(err)?;
        worst = stepper.u().iter().chain(stepper.w()).fold(worst, |m, v| m.max(v.abs()));
    }
    let secs = start.elapsed().as_secs_f64();
    let steps = stepper.num_steps();
    Ok((
        worst <= 1e-12 && steps == 600 && secs <= 5.0,
        format!("{n} nodes, {steps} steps, max |state| {worst:e}, {secs:.2} s"),
    ))
}

// ---------------------------------------------------------------- AC2

fn invariant_rectangle() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.dt_coarse = 0.05;
    let start = Instant::now();
    let disc = Discretization::coarse(&cfg).map_err(err)?;
    let w_hi = 8.0 * 1.15f64.powi(2) / 4.0 + 0.02;
    let mut lo_u = f64::INFINITY;
    let mut hi_u = f64::NEG_INFINITY;
    let mut lo_w = f64::INFINITY;
    let mut hi_w = f64::NEG_INFINITY;
    let chi = disc.indicator(&cfg, &[Inclusion::new(SEPTUM, RADIUS)]).map_err(err)?;
    for inclusion in [None, Some(&chi)] {
        let traj = disc.forward(&cfg, inclusion).map_err(err)?;
        for (u, w) in traj.u.iter().zip(&traj.w) {
            for (&a, &b) in u.iter().zip(w) {
                lo_u = lo_u.min(a);
                hi_u = hi_u.max(a);
                lo_w = lo_w.min(b);
                hi_w = hi_w.max(b);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = lo_u >= -0.02 && hi_u <= 1.02 && lo_w >= -0.02 && hi_w <= w_hi && secs <= 120.0;
    Ok((
        ok,
        format!("u in [{lo_u:.4}, {hi_u:.4}], w in [{lo_w:.4}, {hi_w:.4}] (bound {w_hi:.4}), healthy + septal run, {secs:.1} s"),
    ))
}

// ---------------------------------------------------------------- AC3

/// Dense LU with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Linearization of one implicit Euler step at the new state `(u, w)`:
/// rows `M(δu' − δu)/dt + A δu' + M(f_u δu' + f_w δw')` and
/// `M[(δw' − δw)/dt + g_u δu' + g_w δw']`, as a dense `2n × 2n` matrix.
fn step_jacobian(stiff: &[Vec<f64>], mass: &[f64], u: &[f64], w: &[f64], dt: f64, p: &IonicParams) -> Vec<Vec<f64>> {
    let n = mass.len();
    let mut b = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        let r = p.reaction(u[i], w[i]);
        for j in 0..n {
            b[i][j] = stiff[i][j];
        }
        b[i][i] += mass[i] / dt + mass[i] * r.f_u;
        b[i][n + i] = mass[i] * r.f_w;
        b[n + i][i] = mass[i] * r.g_u;
        b[n + i][n + i] = mass[i] * (1.0 / dt + r.g_w);
    }
    b
}

fn adjoint_duality() -> Check {
    let start = Instant::now();
    let mesh = structured_rectangle([0.0, 0.0], [2.0, 2.0], 12, 12, BoundaryRegion::Epi);
    let n = mesh.num_nodes();
    let params = IonicParams::standard();
    let (dt, steps) = (0.05, 20);
    let th = 0.4f64;
    let k = Sym2::from_frame([th.cos(), th.sin()], 1.2, [-th.sin(), th.cos()], 0.2538);
    let k0 = TensorField::uniform(k, mesh.num_triangles());
    let problem = ForwardProblem {
        mesh: &mesh,
        k0: &k0,
        inclusion: None,
        params,
        dt,
        t_end: dt * steps as f64,
        newton: NewtonOptions::default(),
    };
    let (u0, w0) = initial_stimulus(&mesh, [0.6, 0.6], 0.5, 1.0).map_err(err)?;
    let traj = solve_forward(problem, u0, w0).map_err(err)?;

    let region = regions(BoundaryRegion::Epi);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut residual = TraceSeries::new(&mesh, mesh.region_nodes(&region), dt);
    for _ in 0..=steps {
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        residual.push(&f);
    }
    let adj = solve_adjoint(&mesh, &k0, &traj, &residual, &region, &params).map_err(err)?;

    // Tangent of the scheme under a source s in the u-rows and perturbed
    // initial data, built from dense copies of the FEM operators.
    let stiff = assemble_stiffness(&mesh, &k0).map_err(err)?.to_dense();
    let mass = lumped_mass(&mesh);
    let mb = assemble_boundary_mass(&mesh, &region).map_err(err)?;
    let sources: Vec<Vec<f64>> = (0..steps).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let du0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dw0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut du = du0.clone();
    let mut dw = dw0.clone();
    let mut lhs = 0.0;
    for step in 1..=steps {
        let b = step_jacobian(&stiff, &mass, &traj.u[step], &traj.w[step], dt, &params);
        let mut rhs = vec![0.0; 2 * n];
        for i in 0..n {
            rhs[i] = mass[i] / dt * du[i] + sources[step - 1][i];
            rhs[n + i] = mass[i] / dt * dw[i];
        }
        let x = dense_solve(b, rhs);
        du = x[..n].to_vec();
        dw = x[n..].to_vec();
        let c = if step == steps { 0.5 } else { 1.0 };
        let mut r_full = vec![0.0; n];
        for (kk, &node) in residual.node_ids.iter().enumerate() {
            r_full[node] = residual.values[step][kk];
        }
        lhs += c * mb.bilinear(&r_full, &du);
    }
    let mut rhs = 0.0;
    for m in 0..steps {
        rhs += adj.phi[m].iter().zip(&sources[m]).map(|(a, b)| a * b).sum::<f64>();
    }
    for i in 0..n {
        rhs += mass[i] / dt * (adj.phi[0][i] * du0[i] + adj.psi[0][i] * dw0[i]);
    }
    let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());
    let secs = start.elapsed().as_secs_f64();
    Ok((
        rel <= 1e-8 && n <= 200 && secs <= 10.0,
        format!("{n} nodes, {steps} steps: <r, M_b du> = {lhs:.12e}, <adjoint, sources> = {rhs:.12e}, relative {rel:.2e}, {secs:.2} s"),
    ))
}

// ---------------------------------------------------------------- AC4

fn polarization_oracle() -> Check {
    let th = 30f64.to_radians();
    let ef = [th.cos(), th.sin()];
    let en = [-th.sin(), th.cos()];
    let pairs = [
        ("isotropic", Sym2::scaled_identity(1.2), Sym2::scaled_identity(0.2308)),
        ("anisotropic", Sym2::diag(1.2, 0.2538), Sym2::diag(0.2308, 0.0062)),
        (
            "rotated 30 deg",
            Sym2::from_frame(ef, 1.2, en, 0.2538),
            Sym2::from_frame(ef, 0.2308, en, 0.0062),
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, k0, k1) in pairs {
        let start = Instant::now();
        let m = polarization_disk(&k0, &k1).map_err(err)?;
        let o = transmission_oracle(&k0, &k1, 1.0, 80.0, 0.04).map_err(err)?;
        let closed = [[m.xx, m.xy], [m.xy, m.yy]];
        let scale = m.xx.abs().max(m.yy.abs());
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                // Entries that vanish in closed form are compared on the
                // scale of the tensor.
                let reference = if closed[i][j].abs() > 1e-12 * scale { closed[i][j].abs() } else { scale };
                worst = worst.max((o[i][j] - closed[i][j]).abs() / reference);
            }
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= worst <= 0.02 && secs <= 60.0;
        parts.push(format!("{name} max rel {:.2}% ({secs:.1} s)", 100.0 * worst));
    }
    Ok((ok, parts.join(", ")))
}

// ---------------------------------------------------------------- AC5, AC6

fn rates(study: &Result<ischemia_core::harness::RateStudy, String>, secs: f64) -> (Check, Check) {
    let s = match study {
        Ok(s) => s,
        Err(e) => return (Err(e.clone()), Err(e.clone())),
    };
    let ac5 = Ok((
        s.slope_l2_qt >= 0.55 && (0.4..=0.7).contains(&s.slope_linf_l2) && secs <= 1800.0,
        format!(
            "slopes vs |w_h|: L2(Q_T) {:.3}, Linf(L2) {:.3}, L2(H1) {:.3}; {} fine nodes, {secs:.0} s",
            s.slope_l2_qt, s.slope_linf_l2, s.slope_l2_h1, s.num_nodes
        ),
    ));
    let ratio = |r: f64| s.rows.iter().find(|row| (row.radius - r).abs() < 1e-12).and_then(|row| row.expansion_ratio);
    let ac6 = match (ratio(0.1), ratio(0.2)) {
        (Some(q1), Some(q2)) => {
            let all: Vec<String> = s
                .rows
                .iter()
                .filter_map(|r| r.expansion_ratio.map(|q| format!("r={} {:.3}", r.radius, q)))
                .collect();
            Ok((
                (0.7..=1.3).contains(&q1) && (q1 - 1.0).abs() < (q2 - 1.0).abs() && secs <= 1200.0,
                format!("ratios {}; G(z) {:.4e}, J(0) {:.4e}", all.join(", "), s.gradient_at_center, s.mismatch_background),
            ))
        }
        _ => Err("rate study lacks radii 0.1 and 0.2".into()),
    };
    (ac5, ac6)
}

// ---------------------------------------------------------------- AC7, AC8, AC9

struct Scenarios {
    cfg: ExperimentConfig,
    coarse: Discretization,
    forward: StateTrajectory,
    null_fine: TraceSeries,
}

impl Scenarios {
    fn new() -> Result<Self, String> {
        let cfg = ExperimentConfig::default();
        let coarse = Discretization::coarse(&cfg).map_err(err)?;
        let forward = coarse.forward(&cfg, None).map_err(err)?;
        let uniform = Discretization::fine(&cfg, &[], &[]).map_err(err)?;
        let (null_fine, _) = uniform.forward_trace(&cfg, None, &RegionSet::all()).map_err(err)?;
        Ok(Self {
            cfg,
            coarse,
            forward,
            null_fine,
        })
    }

    /// Noise-free fine trace on every boundary region.
    fn fine_trace(&self, inclusions: &[Inclusion]) -> Result<TraceSeries, String> {
        let mut cfg = self.cfg.clone();
        cfg.inclusions = inclusions.to_vec();
        let fine = Discretization::fine_for(&cfg).map_err(err)?;
        let chi = fine.indicator(&cfg, inclusions).map_err(err)?;
        Ok(fine.forward_trace(&cfg, Some(&chi), &RegionSet::all()).map_err(err)?.0)
    }

    fn config(&self, region: BoundaryRegion, minima: usize) -> ExperimentConfig {
        let mut cfg = self.cfg.clone();
        cfg.regions = regions(region);
        cfg.minima = minima;
        cfg
    }

    /// Reconstruction and null floor for one measurement.
    fn run(&self, cfg: &ExperimentConfig, fine: &TraceSeries, rho: f64, seed: u64) -> Result<(Vec<[f64; 2]>, f64, f64), String> {
        let mesh = &self.coarse.mesh;
        let measured = measurement_from_fine(cfg, fine, mesh, rho, seed).map_err(err)?;
        let rec = reconstruct(cfg, &self.coarse, &self.forward, &measured).map_err(err)?;
        let null = measurement_from_fine(cfg, &self.null_fine, mesh, 0.0, 0).map_err(err)?;
        let floor = topological_gradient(cfg, &self.coarse, &self.forward, &null)
            .map_err(err)?
            .gradient
            .max_abs_masked();
        let points = rec.localization.minima.iter().map(|m| m.point).collect();
        Ok((points, rec.localization.best().value, floor))
    }
}

fn single(s: &Scenarios, name: &str, fine: &TraceSeries, region: BoundaryRegion, z: [f64; 2]) -> Result<(bool, String), String> {
    let start = Instant::now();
    let cfg = s.config(region, 1);
    let (pts, g, floor) = s.run(&cfg, fine, 0.0, 0)?;
    let d = dist(pts[0], z);
    Ok((
        d <= 0.5,
        format!(
            "{name}/{region}: z = ({:.3}, {:.3}), dist {d:.3}, G {g:.3e}, floor {floor:.3e} [{:.0} s]",
            pts[0][0],
            pts[0][1],
            start.elapsed().as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------- AC10

fn determinism() -> Check {
    let mut cfg = ExperimentConfig::default();
    cfg.h_coarse = 0.2;
    cfg.h_fine = 0.1;
    cfg.h_inclusion = 0.05;
    cfg.dt_coarse = 0.05;
    cfg.dt_fine = 0.025;
    cfg.t_end = 6.0;
    cfg.noise = 0.05;
    cfg.seed = 17;
    cfg.inclusions = vec![Inclusion::new(SEPTUM, 0.2)];
    cfg.validate().map_err(err)?;
    let dirs = [tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?];
    for d in &dirs {
        run_synth(&cfg, d.path()).map_err(err)?;
        run_reconstruct(&cfg, d.path()).map_err(err)?;
    }
    let files = ["measurements_fine.csv", "null_fine.csv", "measurements.csv", "null.csv", "gradient.csv", "minima.csv"];
    let read = |dir: &Path, f: &str| std::fs::read(dir.join(f)).map_err(err);
    let mut differing = Vec::new();
    let mut bytes = 0;
    for f in files {
        let a = read(dirs[0].path(), f)?;
        let b = read(dirs[1].path(), f)?;
        bytes += a.len();
        if a != b {
            differing.push(f);
        }
    }
    Ok((
        differing.is_empty(),
        format!("{} CSV files, {bytes} bytes; differing: {:?}", files.len(), differing),
    ))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let want = |k: usize| only.as_ref().is_none_or(|v| v.contains(&k));
    let mut failed = 0;
    let mut report = |k: usize, name: &str, c: Check| {
        let line = match c {
            Ok((true, d)) => format!("AC{k} PASS {name}: {d}"),
            Ok((false, d)) => {
                failed += 1;
                format!("AC{k} FAIL {name}: {d}")
            }
            Err(e) => {
                failed += 1;
                format!("AC{k} FAIL {name}: error: {e}")
            }
        };
        println!("{line}");
    };

    if want(1) {
        report(1, "rest state", rest_state());
    }
    if want(2) {
        report(2, "invariant rectangle", invariant_rectangle());
    }
    if want(3) {
        report(3, "adjoint duality", adjoint_duality());
    }
    if want(4) {
        report(4, "polarization oracle", polarization_oracle());
    }
    if want(5) || want(6) {
        let start = Instant::now();
        let study = rate_study(&ExperimentConfig::default()).map_err(err);
        let (ac5, ac6) = rates(&study, start.elapsed().as_secs_f64());
        if want(5) {
            report(5, "energy-estimate rates", ac5);
        }
        if want(6) {
            report(6, "first-order expansion", ac6);
        }
    }
    if want(7) || want(8) || want(9) {
        match Scenarios::new() {
            Err(e) => {
                for k in [7, 8, 9].into_iter().filter(|&k| want(k)) {
                    report(k, "scenario setup", Err(e.clone()));
                }
            }
            Ok(s) => {
                let septum = s.fine_trace(&[Inclusion::new(SEPTUM, RADIUS)]);
                let rv = if want(7) || want(9) {
                    Some(s.fine_trace(&[Inclusion::new(RV_WALL, RADIUS)]))
                } else {
                    None
                };
                if want(7) {
                    report(7, "localization", localization(&s, &septum, rv.as_ref().unwrap()));
                }
                if want(8) {
                    report(8, "noise robustness", noise(&s, &septum));
                }
                if want(9) {
                    report(9, "no false positives", false_positives(&s, rv.as_ref().unwrap()));
                }
            }
        }
    }
    if want(10) {
        report(10, "determinism", determinism());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn localization(s: &Scenarios, septum: &Result<TraceSeries, String>, rv: &Result<TraceSeries, String>) -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, trace, region, z) in [
        ("septum", septum.clone(), BoundaryRegion::Epi, SEPTUM),
        ("LV wall", s.fine_trace(&[Inclusion::new(LV_WALL, RADIUS)]), BoundaryRegion::EndoLv, LV_WALL),
        ("RV wall", rv.clone(), BoundaryRegion::EndoRv, RV_WALL),
    ] {
        let (pass, d) = single(s, name, &trace?, region, z)?;
        ok &= pass;
        parts.push(d);
    }
    let pair = [Inclusion::new(SEPTUM, RADIUS), Inclusion::new(LV_WALL, RADIUS)];
    let trace = s.fine_trace(&pair)?;
    let cfg = s.config(BoundaryRegion::Epi, 2);
    let (pts, _, floor) = s.run(&cfg, &trace, 0.0, 0)?;
    let dists: Vec<f64> = pair
        .iter()
        .map(|inc| pts.iter().map(|&p| dist(p, inc.center)).fold(f64::INFINITY, f64::min))
        .collect();
    ok &= dists.iter().all(|&d| d <= 0.6);
    parts.push(format!(
        "septum + LV wall/EPI: minima {:?}, distances {:.3} and {:.3}, floor {floor:.3e}",
        pts.iter().map(|p| [(p[0] * 1e3).round() / 1e3, (p[1] * 1e3).round() / 1e3]).collect::<Vec<_>>(),
        dists[0],
        dists[1]
    ));
    Ok((ok, parts.join("; ")))
}

fn noise(s: &Scenarios, septum: &Result<TraceSeries, String>) -> Check {
    let start = Instant::now();
    let fine = septum.as_ref().map_err(|e| e.clone())?;
    let cfg = s.config(BoundaryRegion::Epi, 1);
    let (clean, _, _) = s.run(&cfg, fine, 0.0, 0)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for rho in [0.05, 0.10, 0.15] {
        let mut level: f64 = 0.0;
        for seed in [1, 2, 3] {
            let (pts, _, _) = s.run(&cfg, fine, rho, seed)?;
            level = level.max(dist(pts[0], clean[0]));
        }
        worst = worst.max(level);
        parts.push(format!("rho {rho}: max shift {level:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 0.5 && secs <= 900.0, format!("{} ({secs:.0} s)", parts.join(", "))))
}

fn false_positives(s: &Scenarios, rv: &Result<TraceSeries, String>) -> Check {
    let fine = rv.as_ref().map_err(|e| e.clone())?;
    let cfg = s.config(BoundaryRegion::EndoLv, 1);
    let (pts, g, floor) = s.run(&cfg, fine, 0.0, 0)?;
    Ok((
        g >= -10.0 * floor,
        format!(
            "RV inclusion, ENDO_LV data: deepest minimum {g:.3e} at ({:.3}, {:.3}), floor {floor:.3e}, ratio {:.2}",
            pts[0][0],
            pts[0][1],
            g.abs() / floor
        ),
    ))
}
