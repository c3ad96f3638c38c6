//! Topological gradient of the boundary mismatch and localisation of its minima.

use crate::adjoint::{trapezoid_weight, AdjointTrajectory};
use crate::error::{Error, Result};
use crate::fem::{assemble_boundary_mass, element_to_nodal, nodal_gradient};
use crate::fiber::TensorField;
use crate::mesh::{Mesh, RegionSet};
use crate::monodomain::{IonicParams, StateTrajectory};
use crate::polarization::polarization_disk;
use crate::tensor::{dist, Point, Sym2};
use crate::trace::TraceSeries;

/// `J = ½ Σ_n c_n dt rⁿᵀ M_b rⁿ` with `r = simulated − measured` and
/// trapezoidal weights `c_n`.
pub fn mismatch_j(mesh: &Mesh, regions: &RegionSet, simulated: &TraceSeries, measured: &TraceSeries) -> Result<f64> {
    simulated.check_compatible(measured)?;
    if simulated.node_ids != mesh.region_nodes(regions) {
        return Err(Error::GridMismatch(format!("trace nodes are not the nodes of region {regions}")));
    }
    let mb = assemble_boundary_mass(mesh, regions)?;
    let n_steps = simulated.num_times() - 1;
    let mut full = vec![0.0; mesh.num_nodes()];
    let mut j = 0.0;
    for (n, (s, m)) in simulated.values.iter().zip(&measured.values).enumerate() {
        for (k, &node) in simulated.node_ids.iter().enumerate() {
            full[node] = s[k] - m[k];
        }
        j += trapezoid_weight(n, n_steps) * mb.bilinear(&full, &full);
    }
    Ok(0.5 * simulated.dt * j)
}

/// Nodal topological gradient with its admissible mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GradientField {
    /// Mask of nodes at distance at least `d0` from the boundary.
    pub fn distance_mask(mesh: &Mesh, d0: f64) -> Vec<bool> {
        mesh.boundary_distance().iter().map(|&d| d >= d0).collect()
    }

    /// Largest `|G|` over masked nodes.
    pub fn max_abs_masked(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0, |a, (v, _)| a.max(v.abs()))
    }

    /// Smallest `G` over masked nodes (lowest index on ties).
    pub fn argmin(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&v, &m)) in self.values.iter().zip(&self.mask).enumerate() {
            if m && best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best
    }
}

/// Nodal conductivity tensors (area-weighted averages of the element tensors).
pub fn nodal_tensors(mesh: &Mesh, k: &TensorField) -> Vec<Sym2> {
    element_to_nodal(mesh, k, |t| mesh.signed_area(t))
}

/// `G(z) = Σ_{n=1}^{N} dt [ M(z)(K0 − K1)∇uⁿ·∇Φ_{n−1} + f(uⁿ, wⁿ) Φ_{n−1} ](z)`,
/// pairing each forward level with the adjoint multiplier of the step that
/// produced it. Gradients are recovered at nodes by area-weighted averaging.
pub fn assemble_gradient_field(
    mesh: &Mesh,
    forward: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    k0: &TensorField,
    k1: &TensorField,
    params: &IonicParams,
    d0: f64,
) -> Result<GradientField> {
    let n_steps = forward.num_steps();
    if adjoint.num_steps() != n_steps || (adjoint.dt - forward.dt).abs() > 1e-12 * forward.dt {
        return Err(Error::GridMismatch("forward and adjoint time grids differ".into()));
    }
    if k0.len() != mesh.num_triangles() || k1.len() != mesh.num_triangles() {
        return Err(Error::Dimension("conductivity fields do not match the mesh".into()));
    }
    let n = mesh.num_nodes();
    let k0n = nodal_tensors(mesh, k0);
    let k1n = nodal_tensors(mesh, k1);
    let contrast: Vec<Sym2> = (0..n)
        .map(|i| {
            let m = polarization_disk(&k0n[i], &k1n[i]).map_err(|e| Error::Stage {
                stage: "polarization tensor",
                source: Box::new(e),
            })?;
            let p = m.matmul(&(k0n[i] - k1n[i]));
            // M and K0 − K1 share eigenvectors, so the product is symmetric.
            Ok(Sym2::new(p[0][0], 0.5 * (p[0][1] + p[1][0]), p[1][1]))
        })
        .collect::<Result<_>>()?;
    let areas = mesh.areas();
    let mut g = vec![0.0; n];
    for step in 1..=n_steps {
        let u = &forward.u[step];
        let w = &forward.w[step];
        let phi = &adjoint.phi[step - 1];
        if phi.iter().all(|&v| v == 0.0) {
            continue;
        }
        let gu = nodal_gradient(mesh, u, &areas);
        let gphi = nodal_gradient(mesh, phi, &areas);
        for i in 0..n {
            let f = params.reaction(u[i], w[i]).f;
            g[i] += forward.dt * (contrast[i].bilinear(gu[i], gphi[i]) + f * phi[i]);
        }
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!("non-finite topological gradient at node {i}")));
    }
    Ok(GradientField {
        values: g,
        mask: GradientField::distance_mask(mesh, d0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub node: usize,
    pub point: Point,
    pub value: f64,
    /// Distance to the global minimiser.
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    /// Global minimiser first.
    pub minima: Vec<Minimum>,
}

impl LocalizationResult {
    pub fn best(&self) -> &Minimum {
        &self.minima[0]
    }
}

/// Global minimiser plus up to `count − 1` further local minima, greedily kept
/// at least `min_separation` apart. Ties go to the lowest node index.
pub fn locate_minima(mesh: &Mesh, field: &GradientField, count: usize, min_separation: f64) -> Result<LocalizationResult> {
    if count == 0 {
        return Err(Error::Parameter("count must be at least 1".into()));
    }
    if field.values.len() != mesh.num_nodes() || field.mask.len() != mesh.num_nodes() {
        return Err(Error::Dimension("gradient field does not match the mesh".into()));
    }
    if !field.mask.iter().any(|&m| m) {
        return Err(Error::Parameter("admissible mask is empty".into()));
    }
    let g = &field.values;
    let precedes = |i: usize, j: usize| g[i] < g[j] || (g[i] == g[j] && i < j);
    let neighbours = mesh.node_neighbours();
    let mut candidates: Vec<usize> = (0..mesh.num_nodes())
        .filter(|&i| field.mask[i] && neighbours[i].iter().all(|&j| !field.mask[j] || precedes(i, j)))
        .collect();
    candidates.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::new();
    for c in candidates {
        if picked.len() == count {
            break;
        }
        let p = mesh.nodes()[c];
        if picked.iter().all(|&q| dist(p, mesh.nodes()[q]) >= min_separation) {
            picked.push(c);
        }
    }
    let z = mesh.nodes()[picked[0]];
    Ok(LocalizationResult {
        minima: picked
            .into_iter()
            .map(|i| Minimum {
                node: i,
                point: mesh.nodes()[i],
                value: g[i],
                separation: dist(mesh.nodes()[i], z),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_rectangle, BoundaryRegion};

    fn grid() -> Mesh {
        structured_rectangle([0.0, 0.0], [4.0, 2.0], 40, 20, BoundaryRegion::Epi)
    }

    #[test]
    fn constant_field_returns_lowest_masked_index() {
        let m = grid();
        let mask = GradientField::distance_mask(&m, 0.3);
        let first = mask.iter().position(|&b| b).unwrap();
        let f = GradientField {
            values: vec![1.0; m.num_nodes()],
            mask,
        };
        let r = locate_minima(&m, &f, 1, 1.0).unwrap();
        assert_eq!(r.minima.len(), 1);
        assert_eq!(r.best().node, first);
    }

    #[test]
    fn two_wells() {
        let m = grid();
        let well = |p: Point, c: Point, d: f64| -d * (-(dist(p, c) / 0.3).powi(2)).exp();
        let values = m
            .nodes()
            .iter()
            .map(|&p| well(p, [1.0, 1.0], 1.0) + well(p, [3.0, 1.0], 0.8))
            .collect();
        let f = GradientField {
            values,
            mask: GradientField::distance_mask(&m, 0.3),
        };
        let r = locate_minima(&m, &f, 2, 1.0).unwrap();
        assert_eq!(r.minima.len(), 2);
        assert!(dist(r.minima[0].point, [1.0, 1.0]) < 1e-9);
        assert!(dist(r.minima[1].point, [3.0, 1.0]) < 1e-9);
        assert!((r.minima[1].separation - 2.0).abs() < 1e-9);
        let one = locate_minima(&m, &f, 1, 1.0).unwrap();
        assert_eq!(one.minima.len(), 1);
        assert_eq!(one.best().node, f.argmin().unwrap().0);
    }

    #[test]
    fn empty_mask_is_error() {
        let m = grid();
        let f = GradientField {
            values: vec![0.0; m.num_nodes()],
            mask: vec![false; m.num_nodes()],
        };
        assert!(locate_minima(&m, &f, 1, 1.0).is_err());
    }
}
