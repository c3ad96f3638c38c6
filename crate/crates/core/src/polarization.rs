//! Polarization tensor of a disk inclusion in an anisotropic background.

use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, solve_linear, SolveOptions};
use crate::mesh::generate_box_with_disk;
use crate::tensor::{Point, Sym2};

/// General 2x2 matrix, row-major.
pub type Matrix2 = [[f64; 2]; 2];

fn check_spd(k: &Sym2, name: &str) -> Result<()> {
    if !k.is_finite() || k.eigen().values[1] <= 0.0 {
        return Err(Error::Parameter(format!("{name} is not positive definite")));
    }
    Ok(())
}

fn check_commuting(k0: &Sym2, k1: &Sym2) -> Result<()> {
    let defect = k0.commutator_norm(k1) / (k0.max_abs() * k1.max_abs());
    if defect > 1e-10 {
        return Err(Error::NonCommuting { defect });
    }
    Ok(())
}

/// Closed form for a disk: reduce `K0` to the identity by an affine change of
/// variables, apply the uniform-interior-field formula of the resulting ellipse
/// (semiaxes `1/√κ1`, `1/√κ2`, contrast `λ_i/κ_i`) and rotate back.
pub fn polarization_disk(k0: &Sym2, k1: &Sym2) -> Result<Sym2> {
    check_spd(k0, "K0")?;
    check_spd(k1, "K1")?;
    check_commuting(k0, k1)?;
    let e0 = k0.eigen();
    let frame = if e0.values[0] - e0.values[1] > 1e-12 * e0.values[0] {
        e0.vectors
    } else {
        k1.eigen().vectors
    };
    let [v1, v2] = frame;
    let (kappa1, kappa2) = (k0.bilinear(v1, v1), k0.bilinear(v2, v2));
    let (lambda1, lambda2) = (k1.bilinear(v1, v1), k1.bilinear(v2, v2));
    let p = 1.0 / kappa1.sqrt();
    let q = 1.0 / kappa2.sqrt();
    let m1 = (p + q) / (p + q * lambda1 / kappa1);
    let m2 = (p + q) / (q + p * lambda2 / kappa2);
    Ok(Sym2::from_frame(v1, m1, v2, m2))
}

/// Mean interior gradients of the transmission solutions, computed by FEM on a
/// square box with `v = x_j` on its boundary: `M_ij = mean_ω ∂_i v^(j)`.
pub fn transmission_oracle(k0: &Sym2, k1: &Sym2, radius: f64, box_size: f64, h_oracle: f64) -> Result<Matrix2> {
    check_spd(k0, "K0")?;
    check_spd(k1, "K1")?;
    if box_size < 20.0 * radius {
        return Err(Error::Parameter(format!(
            "box size {box_size} is below 20 radii ({})",
            20.0 * radius
        )));
    }
    if 2.0 * radius / h_oracle < 16.0 {
        return Err(Error::Parameter(format!(
            "h = {h_oracle} resolves the disk with fewer than 16 elements across"
        )));
    }
    let h_far = (box_size / 40.0).max(h_oracle);
    let mesh = generate_box_with_disk(box_size, radius, h_oracle, h_far)?;
    let inside: Vec<bool> = (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            c[0].hypot(c[1]) < radius
        })
        .collect();
    let k: Vec<Sym2> = inside.iter().map(|&i| if i { *k1 } else { *k0 }).collect();
    let a = assemble_stiffness(&mesh, &k)?;
    let boundary = mesh.boundary_nodes();
    let opts = SolveOptions {
        tol: 1e-11,
        max_iter: 100_000,
        ..Default::default()
    };
    let mut out = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut aj = a.clone();
        let mut b = vec![0.0; mesh.num_nodes()];
        let fixed: Vec<(usize, f64)> = boundary.iter().map(|&i| (i, mesh.nodes()[i][j])).collect();
        aj.apply_dirichlet(&mut b, &fixed);
        let v = solve_linear(&aj, &b, &opts)?;
        let mut acc: Point = [0.0; 2];
        let mut area = 0.0;
        for t in (0..mesh.num_triangles()).filter(|&t| inside[t]) {
            let g = mesh.field_gradient(t, &v);
            let at = mesh.signed_area(t);
            acc[0] += at * g[0];
            acc[1] += at * g[1];
            area += at;
        }
        out[0][j] = acc[0] / area;
        out[1][j] = acc[1] / area;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_contrast_gives_identity() {
        let k = Sym2::new(1.0, 0.3, 0.5);
        let m = polarization_disk(&k, &k).unwrap();
        assert!((m - Sym2::identity()).max_abs() < 1e-14);
    }

    #[test]
    fn isotropic_disk() {
        let m = polarization_disk(&Sym2::scaled_identity(1.2), &Sym2::scaled_identity(0.2308)).unwrap();
        assert!((m.xx - 1.6774).abs() < 5e-5 && m.xy == 0.0 && (m.yy - 1.6774).abs() < 5e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let k0 = Sym2::diag(1.0, 0.5);
        assert!(matches!(
            polarization_disk(&k0, &Sym2::new(0.5, 0.1, 0.2)),
            Err(Error::NonCommuting { .. })
        ));
        assert!(polarization_disk(&k0, &Sym2::diag(-1.0, 0.5)).is_err());
        assert!(transmission_oracle(&k0, &k0, 1.0, 10.0, 0.1).is_err());
        assert!(transmission_oracle(&k0, &k0, 1.0, 40.0, 0.2).is_err());
    }
}
