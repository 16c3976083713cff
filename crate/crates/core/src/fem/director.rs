//! Nodal operators on P1 director fields.

use super::grad_vec;
use crate::linalg::CsrMatrix;
use crate::mesh::TriMesh;
use crate::{Mat3, Vec3};

/// Lumped L2 projection of the piecewise constant director gradient.
///
/// Entry `(r, c)` of the nodal matrix is `d_r / dx_c`, averaged over the
/// elements around the node with volume weights. Columns beyond the mesh
/// dimension are zero.
pub fn lumped_l2_project_gradient(mesh: &TriMesh, d: &[Vec3]) -> Vec<Mat3> {
    let mut out = vec![Mat3::zeros(); mesh.n_nodes()];
    let mut wsum = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let mut grad = Mat3::zeros();
        for (a, &i) in el.iter().enumerate() {
            grad += d[i] * grad_vec(&g[a]).transpose();
        }
        let vol = mesh.elem_volume[e];
        for &i in el {
            out[i] += grad * vol;
            wsum[i] += vol;
        }
    }
    for (o, w) in out.iter_mut().zip(wsum) {
        *o /= w;
    }
    out
}

/// Applies a scalar matrix to each component of a nodal vector field.
pub(crate) fn apply_componentwise(k: &CsrMatrix, field: &[Vec3]) -> Vec<Vec3> {
    let mut out = vec![Vec3::zeros(); k.nrows()];
    for (i, o) in out.iter_mut().enumerate() {
        let (cols, vals) = k.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            *o += field[j] * v;
        }
    }
    out
}

/// `Delta_h u = -M_L^{-1} K u`, componentwise.
///
/// With `dirichlet` the values on boundary nodes are set to zero, so only
/// the part of the operator acting on the interior test space remains.
pub fn discrete_laplacian(
    mesh: &TriMesh,
    field: &[Vec3],
    stiffness: &CsrMatrix,
    dirichlet: bool,
) -> Vec<Vec3> {
    let mut out = apply_componentwise(stiffness, field);
    for (z, o) in out.iter_mut().enumerate() {
        if dirichlet && mesh.is_boundary[z] {
            *o = Vec3::zeros();
        } else {
            *o *= -1.0 / mesh.lumped_mass[z];
        }
    }
    out
}

/// `int F (d . F) phi_z` for a piecewise constant field `F` and P1 director `d`.
pub fn director_torque(mesh: &TriMesh, d: &[Vec3], field: &[Vec3]) -> Vec<Vec3> {
    let dim = mesh.dim;
    let c = 1.0 / ((dim + 1) as f64 * (dim + 2) as f64);
    let mut out = vec![Vec3::zeros(); mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let f = field[e];
        if f == Vec3::zeros() {
            continue;
        }
        let el = mesh.element(e);
        let vol = mesh.elem_volume[e];
        let sum: Vec3 = el.iter().map(|&i| d[i]).sum();
        for &z in el {
            let moment = (sum + d[z]) * (vol * c);
            out[z] += f * f.dot(&moment);
        }
    }
    out
}

/// `sum_z m_z |a(z) x b(z)|^2`.
pub fn nodal_cross_sq_norm(mesh: &TriMesh, a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .zip(b)
        .zip(&mesh.lumped_mass)
        .map(|((x, y), m)| m * x.cross(y).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_isotropic_stiffness;
    use crate::mesh::{build_structured_mesh, BoxDomain, Pattern};

    #[test]
    fn projection_reproduces_affine_gradients() {
        let m = build_structured_mesh(3, &BoxDomain::centered_unit(2), Pattern::Crisscross).unwrap();
        let d: Vec<Vec3> = m
            .nodes
            .iter()
            .map(|x| Vec3::new(2.0 * x[0] - x[1], 0.5 * x[1], 3.0))
            .collect();
        let g = lumped_l2_project_gradient(&m, &d);
        let expected = Mat3::new(2.0, -1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0);
        for gz in g {
            assert!((gz - expected).amax() < 1e-13);
        }
    }

    #[test]
    fn projection_of_kink_is_volume_average() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-2.0, 0.0, 0.0]];
        let m = TriMesh::from_parts(2, nodes, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        // d_1 = max(x, 0) on the two elements: slope 1 on the right, 0 on the left.
        let d = vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), Vec3::zeros()];
        let g = lumped_l2_project_gradient(&m, &d);
        let (v1, v2) = (m.elem_volume[0], m.elem_volume[1]);
        let avg = v1 / (v1 + v2);
        assert!((g[0][(0, 0)] - avg).abs() < 1e-15);
        assert!((g[1][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((g[3][(0, 0)]).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_constants_and_quadratics() {
        let m = build_structured_mesh(16, &BoxDomain::unit(2), Pattern::Crisscross).unwrap();
        let k = assemble_isotropic_stiffness(&m);
        let c = vec![Vec3::new(1.0, 2.0, 3.0); m.n_nodes()];
        assert!(discrete_laplacian(&m, &c, &k, false).iter().all(|v| v.amax() < 1e-12));
        let q: Vec<Vec3> = m.nodes.iter().map(|x| Vec3::new(x[0] * x[0], 0.0, 0.0)).collect();
        let l = discrete_laplacian(&m, &q, &k, false);
        // Nodal values alternate between 3/2 (corners) and 3 (centers) on
        // this mesh; the lumped average over interior nodes is 2.
        let (mut s, mut w) = (0.0, 0.0);
        for z in 0..m.n_nodes() {
            if !m.is_boundary[z] {
                s += m.lumped_mass[z] * l[z][0];
                w += m.lumped_mass[z];
            }
        }
        assert!((s / w - 2.0).abs() < 0.1, "{}", s / w);
        let lin = discrete_laplacian(&m, &l, &k, true);
        assert!(m.boundary_nodes.iter().all(|&z| lin[z] == Vec3::zeros()));
    }

    #[test]
    fn torque_matches_quadrature() {
        let m = build_structured_mesh(2, &BoxDomain::unit(2), Pattern::Crisscross).unwrap();
        let d: Vec<Vec3> = m.nodes.iter().map(|x| Vec3::new(x[0], 1.0 - x[1], x[0] * 0.3)).collect();
        let f: Vec<Vec3> = (0..m.n_elements()).map(|e| Vec3::new(e as f64 * 0.1, 1.0, 0.0)).collect();
        let t = director_torque(&m, &d, &f);
        let rule = crate::quadrature::SimplexRule::new(2, 2);
        let mut expected = vec![Vec3::zeros(); m.n_nodes()];
        for e in 0..m.n_elements() {
            let el = m.element(e);
            for (lam, w) in rule.points.iter().zip(&rule.weights) {
                let dx = crate::fem::interp_vec(el, lam, &d);
                for a in 0..3 {
                    expected[el[a]] += f[e] * (f[e].dot(&dx) * lam[a] * w * m.elem_volume[e]);
                }
            }
        }
        for (a, b) in t.iter().zip(&expected) {
            assert!((a - b).amax() < 1e-14);
        }
    }
}
