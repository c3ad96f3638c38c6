//! Fiber directions from a transmural Laplace potential and the resulting
//! anisotropic conductivity tensors.

use std::ops::Deref;

use log::warn;

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, solve_linear, SolveOptions};
use crate::mesh::{BoundaryRegion, Mesh};
use crate::tensor::{norm, rot90, Point, Sym2};

/// Per-element unit fiber (`e_f`) and transmural (`e_n`) directions, `e_f = rot90(e_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberField {
    pub e_f: Vec<Point>,
    pub e_n: Vec<Point>,
}

impl FiberField {
    /// The same fiber direction on every element.
    pub fn uniform(e_f: Point, count: usize) -> Self {
        let l = norm(e_f);
        let e_f = [e_f[0] / l, e_f[1] / l];
        let e_n = [e_f[1], -e_f[0]];
        Self {
            e_f: vec![e_f; count],
            e_n: vec![e_n; count],
        }
    }

    pub fn len(&self) -> usize {
        self.e_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_f.is_empty()
    }
}

/// One symmetric tensor per element.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField(Vec<Sym2>);

impl TensorField {
    pub fn new(tensors: Vec<Sym2>) -> Self {
        Self(tensors)
    }

    pub fn uniform(k: Sym2, count: usize) -> Self {
        Self(vec![k; count])
    }

    pub fn into_inner(self) -> Vec<Sym2> {
        self.0
    }

    /// Smallest and largest eigenvalue over all elements.
    pub fn eigenvalue_range(&self) -> (f64, f64) {
        self.0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            let e = k.eigen();
            (lo.min(e.values[1]), hi.max(e.values[0]))
        })
    }

    /// Largest commutator defect `‖AB − BA‖` against `other`.
    pub fn commutator_defect(&self, other: &TensorField) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.commutator_norm(b))
            .fold(0.0, f64::max)
    }
}

impl Deref for TensorField {
    type Target = [Sym2];
    fn deref(&self) -> &[Sym2] {
        &self.0
    }
}

/// Harmonic Laplace solve with constant Dirichlet data per boundary region.
/// Regions mapped to `None` carry homogeneous Neumann data.
pub fn solve_laplace_dirichlet(mesh: &Mesh, data: impl Fn(BoundaryRegion) -> Option<f64>) -> Result<Vec<f64>> {
    let mut fixed = vec![None; mesh.num_nodes()];
    for e in mesh.boundary_edges() {
        if let Some(g) = data(e.region) {
            for &v in &e.nodes {
                fixed[v] = Some(g);
            }
        }
    }
    let fixed: Vec<(usize, f64)> = fixed
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|g| (i, g)))
        .collect();
    if fixed.is_empty() {
        return Err(Error::Config("Laplace problem without Dirichlet data".into()));
    }
    let mut a = assemble_stiffness(mesh, &vec![Sym2::identity(); mesh.num_triangles()])?;
    let mut b = vec![0.0; mesh.num_nodes()];
    a.apply_dirichlet(&mut b, &fixed);
    solve_linear(&a, &b, &SolveOptions::default())
}

/// Transmural coordinate: 0 on the endocardia, 1 on the epicardium.
pub fn solve_fiber_laplace(mesh: &Mesh) -> Result<Vec<f64>> {
    if !mesh.has_region(BoundaryRegion::Epi) {
        return Err(Error::Config("fiber potential needs an EPI boundary".into()));
    }
    if !mesh.has_region(BoundaryRegion::EndoLv) && !mesh.has_region(BoundaryRegion::EndoRv) {
        return Err(Error::Config("fiber potential needs an ENDO_LV or ENDO_RV boundary".into()));
    }
    let mut phi = solve_laplace_dirichlet(mesh, |r| match r {
        BoundaryRegion::Epi => Some(1.0),
        BoundaryRegion::EndoLv | BoundaryRegion::EndoRv => Some(0.0),
    })?;
    let mut clamped = 0;
    for v in &mut phi {
        let c = v.clamp(0.0, 1.0);
        if (c - *v).abs() > 1e-12 {
            clamped += 1;
        }
        *v = c;
    }
    if clamped > 0 {
        warn!("fiber potential violated the maximum principle at {clamped} node(s); clamped to [0, 1]");
    }
    Ok(phi)
}

/// `e_n = ∇φ/|∇φ|` and `e_f = rot90(e_n)` on every element.
pub fn fibers_from_potential(mesh: &Mesh, phi: &[f64]) -> Result<FiberField> {
    if phi.len() != mesh.num_nodes() {
        return Err(Error::Dimension(format!(
            "{} potential values for {} nodes",
            phi.len(),
            mesh.num_nodes()
        )));
    }
    let mut e_f = Vec::with_capacity(mesh.num_triangles());
    let mut e_n = Vec::with_capacity(mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        let g = mesh.field_gradient(t, phi);
        let l = norm(g);
        if !(l >= 1e-12) {
            return Err(Error::DegenerateGradient { element: t, norm: l });
        }
        let n = [g[0] / l, g[1] / l];
        e_n.push(n);
        e_f.push(rot90(n));
    }
    Ok(FiberField { e_f, e_n })
}

/// `K = k_parallel e_f⊗e_f + k_transverse e_n⊗e_n`.
pub fn build_conductivity(fibers: &FiberField, k_parallel: f64, k_transverse: f64) -> Result<TensorField> {
    if !(k_transverse > 0.0 && k_parallel >= k_transverse && k_parallel.is_finite()) {
        return Err(Error::Parameter(format!(
            "conductivities must satisfy k_parallel >= k_transverse > 0 (got {k_parallel}, {k_transverse})"
        )));
    }
    Ok(TensorField(
        fibers
            .e_f
            .iter()
            .zip(&fibers.e_n)
            .map(|(&f, &n)| Sym2::from_frame(f, k_parallel, n, k_transverse))
            .collect(),
    ))
}

/// Per-element `De (De + Di)⁻¹ Di` for commuting tensor pairs.
pub fn harmonic_mean_tensor(de: &TensorField, di: &TensorField) -> Result<TensorField> {
    if de.len() != di.len() {
        return Err(Error::Dimension(format!("{} vs {} tensors", de.len(), di.len())));
    }
    let mut out = Vec::with_capacity(de.len());
    for (e, i) in de.iter().zip(di.iter()) {
        let defect = e.commutator_norm(i);
        if defect > 1e-10 {
            return Err(Error::NonCommuting { defect });
        }
        let ee = e.eigen();
        let ei = i.eigen();
        if ee.values[1] <= 0.0 || ei.values[1] <= 0.0 {
            return Err(Error::Parameter("tensor with nonpositive eigenvalue".into()));
        }
        // Eigenvalues of Di along the eigenvectors of De (shared frame).
        let (v1, v2) = if ee.values[0] - ee.values[1] > 1e-14 * ee.values[0] {
            (ee.vectors[0], ee.vectors[1])
        } else {
            (ei.vectors[0], ei.vectors[1])
        };
        let h = |a: f64, b: f64| a * b / (a + b);
        out.push(Sym2::from_frame(
            v1,
            h(e.bilinear(v1, v1), i.bilinear(v1, v1)),
            v2,
            h(e.bilinear(v2, v2), i.bilinear(v2, v2)),
        ));
    }
    Ok(TensorField(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_rectangle;

    #[test]
    fn linear_potentials_give_axis_fibers() {
        let m = structured_rectangle([0.0, 0.0], [1.0, 1.0], 3, 3, BoundaryRegion::Epi);
        let x: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        let f = fibers_from_potential(&m, &x).unwrap();
        for t in 0..f.len() {
            assert!((f.e_n[t][0] - 1.0).abs() < 1e-12 && f.e_n[t][1].abs() < 1e-12);
            assert!(f.e_f[t][0].abs() < 1e-12 && (f.e_f[t][1] - 1.0).abs() < 1e-12);
        }
        let y: Vec<f64> = m.nodes().iter().map(|p| p[1]).collect();
        let f = fibers_from_potential(&m, &y).unwrap();
        assert!((f.e_f[0][0] + 1.0).abs() < 1e-12 && f.e_f[0][1].abs() < 1e-12);
    }

    #[test]
    fn constant_potential_is_degenerate() {
        let m = structured_rectangle([0.0, 0.0], [1.0, 1.0], 2, 2, BoundaryRegion::Epi);
        match fibers_from_potential(&m, &vec![0.3; m.num_nodes()]) {
            Err(Error::DegenerateGradient { element: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_dirichlet_gives_constant() {
        let m = structured_rectangle([0.0, 0.0], [1.0, 1.0], 5, 4, BoundaryRegion::Epi);
        let phi = solve_laplace_dirichlet(&m, |_| Some(1.0)).unwrap();
        assert!(phi.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn missing_endocardium_is_config_error() {
        let m = structured_rectangle([0.0, 0.0], [1.0, 1.0], 2, 2, BoundaryRegion::Epi);
        assert!(matches!(solve_fiber_laplace(&m), Err(Error::Config(_))));
    }

    #[test]
    fn healthy_tensor_on_x_fibers() {
        let f = FiberField::uniform([1.0, 0.0], 2);
        let k = build_conductivity(&f, 1.200, 0.2538).unwrap();
        assert_eq!(k[0], Sym2::diag(1.200, 0.2538));
    }

    #[test]
    fn isotropic_conductivity() {
        let f = FiberField::uniform([0.6, -0.8], 3);
        let k = build_conductivity(&f, 0.7, 0.7).unwrap();
        assert!((k[1] - Sym2::scaled_identity(0.7)).max_abs() < 1e-15);
        assert!(build_conductivity(&f, 0.1, 0.2).is_err());
        assert!(build_conductivity(&f, 1.0, 0.0).is_err());
    }

    #[test]
    fn harmonic_mean_cases() {
        let k = |a, b| TensorField::uniform(Sym2::diag(a, b), 1);
        let h = harmonic_mean_tensor(&k(2.0, 2.0), &k(2.0, 2.0)).unwrap();
        assert!((h[0] - Sym2::diag(1.0, 1.0)).max_abs() < 1e-15);
        let h = harmonic_mean_tensor(&k(2.0, 1.0), &k(2.0, 1.0)).unwrap();
        assert!((h[0] - Sym2::diag(1.0, 0.5)).max_abs() < 1e-15);
        let bad = TensorField::uniform(Sym2::new(1.0, 0.5, 1.0), 1);
        assert!(matches!(
            harmonic_mean_tensor(&k(2.0, 1.0), &bad),
            Err(Error::NonCommuting { .. })
        ));
    }
}
