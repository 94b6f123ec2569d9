use crate::element::ReferenceElement;
use crate::mesh::{Mesh, Point};

/// Global numbering of the scalar Lagrange space X_h^p and of its vector
/// version `[X_h^p]²` (vector dof `2·i + component`).
///
/// Vertex dofs come first, then `p-1` dofs per edge ordered from the lower to
/// the higher global vertex index, then cell-interior dofs.
#[derive(Debug, Clone)]
pub struct DofMap {
    degree: usize,
    num_scalar: usize,
    cell_dofs: Vec<Vec<usize>>,
    node_coords: Vec<Point>,
    node_cell: Vec<usize>,
    boundary: Vec<bool>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, element: &ReferenceElement) -> Self {
        let p = element.degree();
        let nv = mesh.vertices().len();
        let ne = mesh.edges().len();
        let per_edge = p - 1;
        let per_cell = element.num_basis() - 3 - 3 * per_edge;
        let num_scalar = nv + ne * per_edge + mesh.num_cells() * per_cell;
        let mut node_coords = vec![[0.0; 2]; num_scalar];
        let mut node_cell = vec![usize::MAX; num_scalar];
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells());
        for (c, tri) in mesh.cells().iter().enumerate() {
            let mut dofs = Vec::with_capacity(element.num_basis());
            dofs.extend_from_slice(tri);
            for (l, &e) in mesh.cell_edges()[c].iter().enumerate() {
                let forward = tri[l] < tri[(l + 1) % 3];
                for k in 0..per_edge {
                    let kk = if forward { k } else { per_edge - 1 - k };
                    dofs.push(nv + e * per_edge + kk);
                }
            }
            for k in 0..per_cell {
                dofs.push(nv + ne * per_edge + c * per_cell + k);
            }
            let verts = mesh.cell_vertices(c);
            for (local, &g) in dofs.iter().enumerate() {
                if node_cell[g] == usize::MAX {
                    let r = element.nodes()[local];
                    node_coords[g] = [
                        verts[0][0] + (verts[1][0] - verts[0][0]) * r[0] + (verts[2][0] - verts[0][0]) * r[1],
                        verts[0][1] + (verts[1][1] - verts[0][1]) * r[0] + (verts[2][1] - verts[0][1]) * r[1],
                    ];
                    node_cell[g] = c;
                }
            }
            cell_dofs.push(dofs);
        }
        let mut boundary = vec![false; num_scalar];
        let edge_lookup: std::collections::HashMap<(usize, usize), usize> =
            mesh.edges().iter().enumerate().map(|(i, e)| ((e[0], e[1]), i)).collect();
        for f in mesh.boundary_facets() {
            let [a, b] = f.vertices;
            boundary[a] = true;
            boundary[b] = true;
            let e = edge_lookup[&(a.min(b), a.max(b))];
            for k in 0..per_edge {
                boundary[nv + e * per_edge + k] = true;
            }
        }
        DofMap { degree: p, num_scalar, cell_dofs, node_coords, node_cell, boundary }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_scalar(&self) -> usize {
        self.num_scalar
    }

    pub fn num_vector(&self) -> usize {
        2 * self.num_scalar
    }

    /// Scalar global dofs of a cell in reference-element order.
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    pub fn node(&self, dof: usize) -> Point {
        self.node_coords[dof]
    }

    /// A cell containing the node of `dof`.
    pub fn node_cell(&self, dof: usize) -> usize {
        self.node_cell[dof]
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    /// Vector dofs whose node lies on ∂Ω.
    pub fn boundary_vector_dofs(&self) -> Vec<usize> {
        (0..self.num_scalar)
            .filter(|&i| self.boundary[i])
            .flat_map(|i| [2 * i, 2 * i + 1])
            .collect()
    }

    /// Nodal interpolant of a vector field given as `f(cell, x)`.
    pub fn interpolate(&self, f: impl Fn(usize, Point) -> [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vector()];
        for i in 0..self.num_scalar {
            let v = f(self.node_cell[i], self.node_coords[i]);
            out[2 * i] = v[0];
            out[2 * i + 1] = v[1];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_fitted_mesh, refine_uniform};

    #[test]
    fn counts_and_boundary() {
        let m = refine_uniform(&build_fitted_mesh(&[0.0, 0.5, 1.0], &[0.0, 1.0]).unwrap());
        for p in 1..=3 {
            let e = ReferenceElement::new(p).unwrap();
            let d = DofMap::new(&m, &e);
            // 4x2 grid: scalar nodes (4p+1)(2p+1)
            assert_eq!(d.num_scalar(), (4 * p + 1) * (2 * p + 1));
            let on_boundary = (0..d.num_scalar())
                .filter(|&i| {
                    let x = d.node(i);
                    x[0].abs() < 1e-14 || (x[0] - 1.0).abs() < 1e-14 || x[1].abs() < 1e-14 || (x[1] - 1.0).abs() < 1e-14
                })
                .count();
            assert_eq!(on_boundary, (0..d.num_scalar()).filter(|&i| d.is_boundary(i)).count());
            assert!((0..d.num_scalar()).all(|i| {
                let x = d.node(i);
                let geo = x[0].abs() < 1e-14 || (x[0] - 1.0).abs() < 1e-14 || x[1].abs() < 1e-14 || (x[1] - 1.0).abs() < 1e-14;
                geo == d.is_boundary(i)
            }));
        }
    }

    #[test]
    fn shared_nodes_coincide() {
        // every cell's local node, mapped physically, agrees with the stored
        // coordinate of its global dof
        let m = refine_uniform(&build_fitted_mesh(&[0.0, 0.3, 1.0], &[0.0, 0.6, 1.0]).unwrap());
        let e = ReferenceElement::new(3).unwrap();
        let d = DofMap::new(&m, &e);
        for c in 0..m.num_cells() {
            let v = m.cell_vertices(c);
            for (l, &g) in d.cell_dofs(c).iter().enumerate() {
                let r = e.nodes()[l];
                let x = [
                    v[0][0] + (v[1][0] - v[0][0]) * r[0] + (v[2][0] - v[0][0]) * r[1],
                    v[0][1] + (v[1][1] - v[0][1]) * r[0] + (v[2][1] - v[0][1]) * r[1],
                ];
                let y = d.node(g);
                assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
            }
        }
    }
}
