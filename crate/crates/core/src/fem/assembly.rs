//! P1 element kernels and global assembly.

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, RegionSet};
use crate::tensor::Sym2;

/// Consistent mass matrix, or the row-sum lumped diagonal when `lumped`.
pub fn assemble_mass(mesh: &Mesh, lumped: bool) -> CsrMatrix {
    if lumped {
        return CsrMatrix::diagonal(&lumped_mass(mesh));
    }
    let mut m = CsrMatrix::mesh_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.signed_area(t) / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                m.add_at(tri[i], tri[j], if i == j { 2.0 * a } else { a });
            }
        }
    }
    m
}

/// Diagonal of the lumped mass matrix (area/3 per incident triangle).
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut d = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.signed_area(t) / 3.0;
        for &v in tri {
            d[v] += a;
        }
    }
    d
}

/// Element stiffness `area · K∇λ_j·∇λ_i` for a constant tensor.
pub fn element_stiffness(mesh: &Mesh, t: usize, k: &Sym2) -> [[f64; 3]; 3] {
    let g = mesh.basis_gradients(t);
    let area = mesh.signed_area(t);
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = area * k.bilinear(g[i], g[j]);
            e[i][j] = v;
            e[j][i] = v;
        }
    }
    e
}

/// Stiffness matrix for a piecewise-constant conductivity (one tensor per triangle).
pub fn assemble_stiffness(mesh: &Mesh, k: &[Sym2]) -> Result<CsrMatrix> {
    if k.len() != mesh.num_triangles() {
        return Err(Error::Dimension(format!(
            "{} conductivity tensors for {} triangles",
            k.len(),
            mesh.num_triangles()
        )));
    }
    let mut a = CsrMatrix::mesh_pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let e = element_stiffness(mesh, t, &k[t]);
        for i in 0..3 {
            for j in 0..3 {
                a.add_at(tri[i], tri[j], e[i][j]);
            }
        }
    }
    Ok(a)
}

/// 1D P1 mass matrix on the boundary edges of `regions`, in global numbering.
pub fn assemble_boundary_mass(mesh: &Mesh, regions: &RegionSet) -> Result<CsrMatrix> {
    if regions.is_empty() {
        return Err(Error::Config("empty measurement region".into()));
    }
    let edges: Vec<_> = mesh
        .boundary_edges()
        .iter()
        .filter(|e| regions.contains(e.region))
        .collect();
    if edges.is_empty() {
        return Err(Error::Config(format!("mesh has no boundary edges in {regions}")));
    }
    let mut m = CsrMatrix::mesh_pattern(mesh);
    for e in edges {
        let [a, b] = e.nodes;
        let l = mesh.edge_length(e.nodes) / 6.0;
        m.add_at(a, a, 2.0 * l);
        m.add_at(b, b, 2.0 * l);
        m.add_at(a, b, l);
        m.add_at(b, a, l);
    }
    Ok(m)
}
