//! Backward adjoint of the discrete forward scheme, driven by the boundary
//! residual on the measured region.
//!
//! With `B_n` the Jacobian of step `n` (lumped mass `M`, coefficients at
//! `(uⁿ, wⁿ)`), the stored adjoint states satisfy `Φ_N = Ψ_N = 0` and
//!
//! ```text
//! B_{m+1}ᵀ (Φ_m, Ψ_m) = (c_{m+1} M_b r^{m+1}, 0) + (M/dt)(Φ_{m+1}, Ψ_{m+1})
//! ```
//!
//! with `c_N = 1/2` and `c_n = 1` otherwise (trapezoidal weights of the
//! mismatch functional). `Φ_{n−1}` is therefore the multiplier of the step
//! ending at `t_n`.

use crate::error::{Error, Result};
use crate::fem::{assemble_boundary_mass, assemble_stiffness, lumped_mass, solve_linear_from, SolveOptions};
use crate::fiber::TensorField;
use crate::mesh::{Mesh, RegionSet};
use crate::monodomain::{IonicParams, StateTrajectory};
use crate::trace::TraceSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub dt: f64,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl AdjointTrajectory {
    pub fn num_steps(&self) -> usize {
        self.phi.len() - 1
    }
}

/// Trapezoidal weight of time level `n` out of `n_steps`.
pub fn trapezoid_weight(n: usize, n_steps: usize) -> f64 {
    if n == 0 || n == n_steps {
        0.5
    } else {
        1.0
    }
}

pub fn solve_adjoint(
    mesh: &Mesh,
    k0: &TensorField,
    forward: &StateTrajectory,
    residual: &TraceSeries,
    regions: &RegionSet,
    params: &IonicParams,
) -> Result<AdjointTrajectory> {
    let n_steps = forward.num_steps();
    let n = mesh.num_nodes();
    let region_nodes = mesh.region_nodes(regions);
    if residual.node_ids != region_nodes {
        return Err(Error::GridMismatch(format!(
            "residual trace has {} nodes, region {regions} has {}",
            residual.num_nodes(),
            region_nodes.len()
        )));
    }
    if residual.num_times() != n_steps + 1 || (residual.dt - forward.dt).abs() > 1e-12 * forward.dt {
        return Err(Error::GridMismatch(format!(
            "residual has {} levels of {}, forward has {} of {}",
            residual.num_times(),
            residual.dt,
            n_steps + 1,
            forward.dt
        )));
    }
    if forward.u[0].len() != n {
        return Err(Error::Dimension("forward trajectory does not match the mesh".into()));
    }
    let dt = forward.dt;
    let inv_dt = 1.0 / dt;
    let mass = lumped_mass(mesh);
    let mb = assemble_boundary_mass(mesh, regions)?;
    let mut base = assemble_stiffness(mesh, k0)?;
    base.add_diagonal(&mass.iter().map(|m| m * inv_dt).collect::<Vec<_>>());
    let diag_pos = base.diagonal_positions();
    let mut sys = base.clone();
    let opts = SolveOptions {
        tol: 1e-13,
        ..Default::default()
    };

    let mut phi = vec![vec![0.0; n]; n_steps + 1];
    let mut psi = vec![vec![0.0; n]; n_steps + 1];
    let mut r_full = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for m in (0..n_steps).rev() {
        let level = m + 1;
        let c = trapezoid_weight(level, n_steps);
        for (k, &node) in region_nodes.iter().enumerate() {
            r_full[node] = c * residual.values[level][k];
        }
        let mbr = mb.matvec(&r_full);
        sys.values_mut().copy_from_slice(base.values());
        let (u, w) = (&forward.u[level], &forward.w[level]);
        let (phi_next, psi_next) = (&phi[m + 1], &psi[m + 1]);
        let mut psi_coef = vec![0.0; n];
        for i in 0..n {
            let r = params.reaction(u[i], w[i]);
            let d = inv_dt + r.g_w;
            sys.values_mut()[diag_pos[i]] += mass[i] * (r.f_u - r.g_u * r.f_w / d);
            rhs[i] = mbr[i] + mass[i] * inv_dt * phi_next[i] - mass[i] * r.g_u * psi_next[i] * inv_dt / d;
            psi_coef[i] = r.f_w / d;
        }
        let mut x = phi_next.clone();
        solve_linear_from(&sys, &rhs, &mut x, &opts).map_err(|e| Error::Stage {
            stage: "adjoint step",
            source: Box::new(e),
        })?;
        let new_psi: Vec<f64> = (0..n)
            .map(|i| {
                let d = inv_dt + params.eps;
                psi_next[i] * inv_dt / d - psi_coef[i] * x[i]
            })
            .collect();
        phi[m] = x;
        psi[m] = new_psi;
    }
    Ok(AdjointTrajectory { dt, phi, psi })
}
