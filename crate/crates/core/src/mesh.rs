//! Structured simplicial meshes of boxes and their geometric data.
//!
//! A [`TriMesh`] stores nodes (always padded to three coordinates), elements
//! as flat index tuples, per-element volumes and constant P1 gradients, and
//! the lumped nodal masses `m_z = sum_{K containing z} |K| / (d + 1)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("pattern {pattern} is not available in dimension {dim}")]
    UnsupportedPattern { pattern: Pattern, dim: usize },
    #[error("dimension {0} is not supported")]
    UnsupportedDimension(usize),
    #[error("need at least one cell per side")]
    EmptyMesh,
    #[error("box is degenerate")]
    DegenerateBox,
    #[error("element {0} has zero or negative measure")]
    DegenerateElement(usize),
    #[error("element {0} references node {1} out of range")]
    BadIndex(usize, usize),
    #[error("facet {0:?} is shared by more than two elements")]
    NonConforming(Vec<usize>),
    #[error("unknown mesh pattern `{0}`")]
    UnknownPattern(String),
}

/// Splitting pattern for the structured cell grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Each square cut by both diagonals into four triangles.
    Crisscross,
    /// Two triangles per square, diagonals alternating by cell parity.
    UnionJack,
    /// Kuhn split of each cube into six tetrahedra along the main diagonal.
    TetSplit,
}

impl Pattern {
    pub fn default_for(dim: usize) -> Pattern {
        if dim == 3 {
            Pattern::TetSplit
        } else {
            Pattern::Crisscross
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Crisscross => "crisscross",
            Pattern::UnionJack => "union_jack",
            Pattern::TetSplit => "tet_split",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crisscross" => Ok(Pattern::Crisscross),
            "union_jack" => Ok(Pattern::UnionJack),
            "tet_split" => Ok(Pattern::TetSplit),
            other => Err(MeshError::UnknownPattern(other.to_string())),
        }
    }
}

/// Axis-aligned box `[lo, hi]` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxDomain {
    pub fn new(dim: usize, lo: [f64; 3], hi: [f64; 3]) -> Self {
        BoxDomain { dim, lo, hi }
    }

    /// `(0, 1)^dim`.
    pub fn unit(dim: usize) -> Self {
        BoxDomain::new(dim, [0.0; 3], [1.0; 3])
    }

    /// `(-1/2, 1/2)^dim`, the domain of all catalogue experiments.
    pub fn centered_unit(dim: usize) -> Self {
        BoxDomain::new(dim, [-0.5; 3], [0.5; 3])
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|i| self.hi[i] - self.lo[i]).product()
    }
}

/// Conforming simplicial mesh with P1 geometric data.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub dim: usize,
    /// Node coordinates; unused trailing coordinates are zero.
    pub nodes: Vec<[f64; 3]>,
    elements: Vec<usize>,
    pub is_boundary: Vec<bool>,
    pub boundary_nodes: Vec<usize>,
    pub elem_volume: Vec<f64>,
    elem_grad: Vec<[f64; 3]>,
    pub lumped_mass: Vec<f64>,
    elem_diameter: Vec<f64>,
    elem_inradius: Vec<f64>,
    interior_facets: Vec<InteriorFacet>,
    /// Maximal element diameter.
    pub h: f64,
}

/// A facet shared by two elements.
#[derive(Debug, Clone)]
pub struct InteriorFacet {
    pub nodes: Vec<usize>,
    pub elements: [usize; 2],
}

impl TriMesh {
    /// Builds a mesh from raw nodes and element connectivity.
    ///
    /// Boundary nodes are those on facets owned by a single element.
    pub fn from_parts(
        dim: usize,
        nodes: Vec<[f64; 3]>,
        elements: Vec<Vec<usize>>,
    ) -> Result<TriMesh, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::UnsupportedDimension(dim));
        }
        if elements.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let npe = dim + 1;
        let n_nodes = nodes.len();
        let mut flat = Vec::with_capacity(elements.len() * npe);
        let mut elem_volume = Vec::with_capacity(elements.len());
        let mut elem_grad = Vec::with_capacity(elements.len() * npe);
        let mut elem_diameter = Vec::with_capacity(elements.len());
        let mut elem_inradius = Vec::with_capacity(elements.len());
        let mut lumped_mass = vec![0.0; n_nodes];
        for (e, el) in elements.iter().enumerate() {
            assert_eq!(el.len(), npe, "element {e} has wrong arity");
            for &i in el {
                if i >= n_nodes {
                    return Err(MeshError::BadIndex(e, i));
                }
            }
            let pts: Vec<[f64; 3]> = el.iter().map(|&i| nodes[i]).collect();
            let (vol, grads) =
                simplex_geometry(dim, &pts).ok_or(MeshError::DegenerateElement(e))?;
            let mut diam: f64 = 0.0;
            for a in 0..npe {
                for b in (a + 1)..npe {
                    diam = diam.max(dist(&pts[a], &pts[b]));
                }
            }
            let facet_area: f64 = (0..npe).map(|a| facet_measure(dim, &pts, a)).sum();
            elem_inradius.push(dim as f64 * vol / facet_area);
            elem_diameter.push(diam);
            for &i in el {
                lumped_mass[i] += vol / npe as f64;
            }
            flat.extend_from_slice(el);
            elem_volume.push(vol);
            elem_grad.extend_from_slice(&grads[..npe]);
        }

        let mut facets: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            for skip in 0..npe {
                let mut f: Vec<usize> = (0..npe).filter(|&a| a != skip).map(|a| el[a]).collect();
                f.sort_unstable();
                facets.entry(f).or_default().push(e);
            }
        }
        let mut is_boundary = vec![false; n_nodes];
        let mut interior_facets = Vec::new();
        let mut keys: Vec<&Vec<usize>> = facets.keys().collect();
        keys.sort();
        for f in keys {
            let owners = &facets[f];
            match owners.len() {
                1 => f.iter().for_each(|&i| is_boundary[i] = true),
                2 => interior_facets.push(InteriorFacet {
                    nodes: f.clone(),
                    elements: [owners[0], owners[1]],
                }),
                _ => return Err(MeshError::NonConforming(f.clone())),
            }
        }
        let boundary_nodes = (0..n_nodes).filter(|&i| is_boundary[i]).collect();
        let h = elem_diameter.iter().cloned().fold(0.0, f64::max);
        Ok(TriMesh {
            dim,
            nodes,
            elements: flat,
            is_boundary,
            boundary_nodes,
            elem_volume,
            elem_grad,
            lumped_mass,
            elem_diameter,
            elem_inradius,
            interior_facets,
            h,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elem_volume.len()
    }

    /// Nodes per element, `dim + 1`.
    pub fn npe(&self) -> usize {
        self.dim + 1
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let npe = self.npe();
        &self.elements[e * npe..(e + 1) * npe]
    }

    /// Constant gradients of the local barycentric functions on element `e`.
    pub fn grads(&self, e: usize) -> &[[f64; 3]] {
        let npe = self.npe();
        &self.elem_grad[e * npe..(e + 1) * npe]
    }

    pub fn diameter(&self, e: usize) -> f64 {
        self.elem_diameter[e]
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior_facets
    }

    pub fn volume(&self) -> f64 {
        self.elem_volume.iter().sum()
    }

    /// Ratio of the largest element diameter to the smallest inradius.
    pub fn quasi_uniformity(&self) -> f64 {
        let rmin = self.elem_inradius.iter().cloned().fold(f64::INFINITY, f64::min);
        self.h / rmin
    }

    /// Barycentric coordinates of `x` with respect to element `e`.
    pub fn barycentric(&self, e: usize, x: &[f64; 3]) -> [f64; 4] {
        let el = self.element(e);
        let g = self.grads(e);
        let x0 = self.nodes[el[0]];
        let mut lam = [0.0; 4];
        let mut rest = 0.0;
        for a in 1..self.npe() {
            let mut s = 0.0;
            for c in 0..self.dim {
                s += g[a][c] * (x[c] - x0[c]);
            }
            lam[a] = s;
            rest += s;
        }
        lam[0] = 1.0 - rest;
        lam
    }

    /// Physical coordinates of the barycentric point `lam` in element `e`.
    pub fn point(&self, e: usize, lam: &[f64; 4]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, &i) in self.element(e).iter().enumerate() {
            for (c, xc) in x.iter_mut().enumerate() {
                *xc += lam[a] * self.nodes[i][c];
            }
        }
        x
    }

    /// Finds an element containing `x` and the barycentric coordinates there.
    pub fn locate(&self, x: &[f64; 3]) -> Option<(usize, [f64; 4])> {
        let tol = 1e-12;
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for e in 0..self.n_elements() {
            let lam = self.barycentric(e, x);
            let worst = lam[..self.npe()].iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -tol {
                return Some((e, lam));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((e, lam, worst));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn facet_measure(dim: usize, pts: &[[f64; 3]], skip: usize) -> f64 {
    let f: Vec<&[f64; 3]> = (0..=dim).filter(|&a| a != skip).map(|a| &pts[a]).collect();
    if dim == 2 {
        dist(f[0], f[1])
    } else {
        0.5 * norm(&cross(&sub(f[1], f[0]), &sub(f[2], f[0])))
    }
}

/// Volume and barycentric gradients of a simplex, `None` if degenerate.
pub fn simplex_geometry(dim: usize, pts: &[[f64; 3]]) -> Option<(f64, [[f64; 3]; 4])> {
    let mut jac = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    for a in 1..=dim {
        for c in 0..dim {
            jac[(c, a - 1)] = pts[a][c] - pts[0][c];
        }
    }
    let det = jac.determinant();
    let scale: f64 = (1..=dim).map(|a| dist(&pts[a], &pts[0])).product();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = jac.try_inverse()?;
    let mut grads = [[0.0; 3]; 4];
    for a in 1..=dim {
        for c in 0..dim {
            grads[a][c] = inv[(a - 1, c)];
            grads[0][c] -= inv[(a - 1, c)];
        }
    }
    let fact = if dim == 2 { 2.0 } else { 6.0 };
    Some((det.abs() / fact, grads))
}

/// Builds the structured mesh of `n_per_side` cells per direction.
pub fn build_structured_mesh(
    n_per_side: usize,
    domain: &BoxDomain,
    pattern: Pattern,
) -> Result<TriMesh, MeshError> {
    if n_per_side == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let dim = domain.dim;
    if dim != 2 && dim != 3 {
        return Err(MeshError::UnsupportedDimension(dim));
    }
    if (0..dim).any(|i| domain.hi[i] <= domain.lo[i]) {
        return Err(MeshError::DegenerateBox);
    }
    let n = n_per_side;
    let coord = |c: usize, i: f64| domain.lo[c] + (domain.hi[c] - domain.lo[c]) * i / n as f64;
    match (dim, pattern) {
        (2, Pattern::Crisscross) => {
            let corner = |i: usize, j: usize| j * (n + 1) + i;
            let ncorner = (n + 1) * (n + 1);
            let center = |i: usize, j: usize| ncorner + j * n + i;
            let mut nodes = Vec::with_capacity(ncorner + n * n);
            for j in 0..=n {
                for i in 0..=n {
                    nodes.push([coord(0, i as f64), coord(1, j as f64), 0.0]);
                }
            }
            for j in 0..n {
                for i in 0..n {
                    nodes.push([coord(0, i as f64 + 0.5), coord(1, j as f64 + 0.5), 0.0]);
                }
            }
            let mut elements = Vec::with_capacity(4 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let c = center(i, j);
                    let (a, b, cc, d) = (
                        corner(i, j),
                        corner(i + 1, j),
                        corner(i + 1, j + 1),
                        corner(i, j + 1),
                    );
                    elements.push(vec![a, b, c]);
                    elements.push(vec![b, cc, c]);
                    elements.push(vec![cc, d, c]);
                    elements.push(vec![d, a, c]);
                }
            }
            TriMesh::from_parts(2, nodes, elements)
        }
        (2, Pattern::UnionJack) => {
            let corner = |i: usize, j: usize| j * (n + 1) + i;
            let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    nodes.push([coord(0, i as f64), coord(1, j as f64), 0.0]);
                }
            }
            let mut elements = Vec::with_capacity(2 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c, d) = (
                        corner(i, j),
                        corner(i + 1, j),
                        corner(i + 1, j + 1),
                        corner(i, j + 1),
                    );
                    if (i + j) % 2 == 0 {
                        elements.push(vec![a, b, c]);
                        elements.push(vec![a, c, d]);
                    } else {
                        elements.push(vec![a, b, d]);
                        elements.push(vec![b, c, d]);
                    }
                }
            }
            TriMesh::from_parts(2, nodes, elements)
        }
        (3, Pattern::TetSplit) => {
            let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
            let mut nodes = Vec::with_capacity((n + 1).pow(3));
            for k in 0..=n {
                for j in 0..=n {
                    for i in 0..=n {
                        nodes.push([coord(0, i as f64), coord(1, j as f64), coord(2, k as f64)]);
                    }
                }
            }
            const PERMS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let mut elements = Vec::with_capacity(6 * n * n * n);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for p in PERMS {
                            let mut v = [i, j, k];
                            let mut el = vec![idx(v[0], v[1], v[2])];
                            for axis in p {
                                v[axis] += 1;
                                el.push(idx(v[0], v[1], v[2]));
                            }
                            elements.push(el);
                        }
                    }
                }
            }
            TriMesh::from_parts(3, nodes, elements)
        }
        (dim, pattern) => Err(MeshError::UnsupportedPattern { pattern, dim }),
    }
}

/// `m_z = sum_{K containing z} |K| / (d + 1)`.
pub fn lumped_masses(mesh: &TriMesh) -> Vec<f64> {
    mesh.lumped_mass.clone()
}

/// Sum of the two angles opposite an interior edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeAngleSum {
    pub edge: [usize; 2],
    pub sum: f64,
}

/// Outcome of the mesh admissibility checks.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub dim: usize,
    /// Two-dimensional meshes: opposite-angle sum for every interior edge.
    pub edge_angle_sums: Vec<EdgeAngleSum>,
    pub max_angle_sum: f64,
    /// Largest interior angle (2D) or dihedral angle (3D) over all elements.
    pub max_element_angle: f64,
    /// Angle margin: `pi - max_angle_sum` in 2D, `pi/2 - max dihedral` in 3D.
    pub theta: f64,
    /// Delaunay (2D) or non-obtuse dihedral angles (3D).
    pub admissible: bool,
    /// Admissible but with zero angle margin.
    pub borderline: bool,
    /// All element angles strictly below a right angle.
    pub strongly_acute: bool,
    /// Largest off-diagonal entry of the isotropic P1 stiffness matrix.
    pub max_stiffness_offdiag: f64,
    pub stiffness_offdiag_nonpositive: bool,
    pub quasi_uniformity: f64,
}

const ANGLE_TOL: f64 = 1e-12;

fn angle_at(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let u = sub(a, p);
    let v = sub(b, p);
    let c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (norm(&u) * norm(&v));
    c.clamp(-1.0, 1.0).acos()
}

/// Angle between the facets opposite local vertices `a` and `b`.
fn dihedral(g: &[[f64; 3]], a: usize, b: usize) -> f64 {
    let c = -(g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]) / (norm(&g[a]) * norm(&g[b]));
    c.clamp(-1.0, 1.0).acos()
}

pub fn check_mesh_admissibility(mesh: &TriMesh) -> AdmissibilityReport {
    let npe = mesh.npe();
    let mut max_element_angle: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        if mesh.dim == 2 {
            for a in 0..3 {
                let ang = angle_at(
                    &mesh.nodes[el[a]],
                    &mesh.nodes[el[(a + 1) % 3]],
                    &mesh.nodes[el[(a + 2) % 3]],
                );
                max_element_angle = max_element_angle.max(ang);
            }
        } else {
            let g = mesh.grads(e);
            for a in 0..npe {
                for b in (a + 1)..npe {
                    max_element_angle = max_element_angle.max(dihedral(g, a, b));
                }
            }
        }
    }

    let mut edge_angle_sums = Vec::new();
    let mut max_angle_sum: f64 = 0.0;
    if mesh.dim == 2 {
        for f in mesh.interior_facets() {
            let mut sum = 0.0;
            for &e in &f.elements {
                let el = mesh.element(e);
                let opp = *el.iter().find(|i| !f.nodes.contains(i)).expect("opposite vertex");
                sum += angle_at(&mesh.nodes[opp], &mesh.nodes[f.nodes[0]], &mesh.nodes[f.nodes[1]]);
            }
            max_angle_sum = max_angle_sum.max(sum);
            edge_angle_sums.push(EdgeAngleSum {
                edge: [f.nodes[0], f.nodes[1]],
                sum,
            });
        }
    }

    let mut offdiag: HashMap<(usize, usize), f64> = HashMap::new();
    let mut diag_scale: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        let g = mesh.grads(e);
        let vol = mesh.elem_volume[e];
        for a in 0..npe {
            diag_scale = diag_scale.max(vol * dot3(&g[a], &g[a]));
            for b in (a + 1)..npe {
                let key = (el[a].min(el[b]), el[a].max(el[b]));
                *offdiag.entry(key).or_insert(0.0) += vol * dot3(&g[a], &g[b]);
            }
        }
    }
    let max_stiffness_offdiag = offdiag.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let stiffness_offdiag_nonpositive = max_stiffness_offdiag <= 1e-13 * diag_scale.max(1.0);

    let right = if mesh.dim == 2 { PI } else { 0.5 * PI };
    let worst = if mesh.dim == 2 {
        max_angle_sum
    } else {
        max_element_angle
    };
    let theta = right - worst;
    let admissible = theta >= -ANGLE_TOL;
    let borderline = admissible && theta <= ANGLE_TOL;
    let strongly_acute = max_element_angle < 0.5 * PI - ANGLE_TOL;
    AdmissibilityReport {
        dim: mesh.dim,
        edge_angle_sums,
        max_angle_sum,
        max_element_angle,
        theta,
        admissible,
        borderline,
        strongly_acute,
        max_stiffness_offdiag,
        stiffness_offdiag_nonpositive,
        quasi_uniformity: mesh.quasi_uniformity(),
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
