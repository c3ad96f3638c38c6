//! P1 finite-element assembly and linear solves.

mod assembly;
mod solver;
mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_mass, assemble_stiffness, element_stiffness, lumped_mass,
};
pub use solver::{solve_linear, solve_linear_from, Constraint, SolveOptions, SolveStats};
pub use sparse::CsrMatrix;

use crate::mesh::Mesh;
use crate::tensor::Point;

/// Area-weighted average of per-element values at each node.
pub fn element_to_nodal<T, F>(mesh: &Mesh, per_element: &[T], mut f: F) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: FnMut(usize) -> f64,
{
    let mut acc = vec![T::default(); mesh.num_nodes()];
    let mut w = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = f(t);
        for &v in tri {
            acc[v] = acc[v] + per_element[t] * a;
            w[v] += a;
        }
    }
    acc.iter()
        .zip(&w)
        .map(|(&s, &wt)| if wt > 0.0 { s * (1.0 / wt) } else { T::default() })
        .collect()
}

/// Area-weighted nodal recovery of the P1 gradient of `field`.
pub fn nodal_gradient(mesh: &Mesh, field: &[f64], areas: &[f64]) -> Vec<Point> {
    let mut acc = vec![[0.0; 2]; mesh.num_nodes()];
    let mut w = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.field_gradient(t, field);
        for &v in tri {
            acc[v][0] += areas[t] * g[0];
            acc[v][1] += areas[t] * g[1];
            w[v] += areas[t];
        }
    }
    acc.iter()
        .zip(&w)
        .map(|(g, &wt)| [g[0] / wt, g[1] / wt])
        .collect()
}
