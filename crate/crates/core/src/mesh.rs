//! Conforming quadrilateral meshes with bilinear cell mappings.
//!
//! Cells store their four vertices counterclockwise, matching the reference
//! corners `(0,0), (1,0), (1,1), (0,1)`. Local face `f` joins local vertices
//! `f` and `f + 1 (mod 4)`.
//!
//! Every cell remembers which coarse *patch* it descends from together with
//! its reference sub-square inside that patch. Refinement places new
//! vertices through the patch map, which is a transfinite (Gordon-Hall)
//! interpolation of the patch edges. Straight edges make this a plain
//! bilinear map; circular edges keep refined boundary vertices on the circle
//! and blend the interior of boundary patches radially.

use std::collections::HashMap;

use crate::error::MeshError;
use crate::scalar::{norm, Real, Vec2};

/// Reference-cell corner coordinates in local vertex order.
pub const REF_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// Bilinear shape functions on the unit square, in local vertex order.
#[inline]
pub fn shape_values<T: Real>(xi: T, eta: T) -> [T; 4] {
    let one = T::one();
    [
        (one - xi) * (one - eta),
        xi * (one - eta),
        xi * eta,
        (one - xi) * eta,
    ]
}

/// Reference gradients `[∂ξ, ∂η]` of the bilinear shape functions.
#[inline]
pub fn shape_gradients<T: Real>(xi: T, eta: T) -> [Vec2<T>; 4] {
    let one = T::one();
    [
        [-(one - eta), -(one - xi)],
        [one - eta, -xi],
        [eta, xi],
        [-eta, one - xi],
    ]
}

/// Shape of one patch edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeShape<T> {
    Straight,
    /// Circular arc about the origin.
    Arc { radius: T },
}

/// A coarse cell whose edges may be curved.
#[derive(Clone, Debug)]
pub struct Patch<T> {
    pub corners: [Vec2<T>; 4],
    /// Edge `k` runs from corner `k` to corner `k+1`; edges 2 and 3 are
    /// parametrized from corner 3 and corner 0 respectively.
    pub edges: [EdgeShape<T>; 4],
}

impl<T: Real> Patch<T> {
    pub fn straight(corners: [Vec2<T>; 4]) -> Self {
        Self {
            corners,
            edges: [EdgeShape::Straight; 4],
        }
    }

    fn edge_point(&self, edge: usize, s: T) -> Vec2<T> {
        let (a, b) = match edge {
            0 => (self.corners[0], self.corners[1]),
            1 => (self.corners[1], self.corners[2]),
            2 => (self.corners[3], self.corners[2]),
            _ => (self.corners[0], self.corners[3]),
        };
        match self.edges[edge] {
            EdgeShape::Straight => [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
            EdgeShape::Arc { radius } => {
                let ta = a[1].atan2(a[0]);
                let tb = b[1].atan2(b[0]);
                let mut d = tb - ta;
                let pi = T::PI();
                if d > pi {
                    d = d - pi - pi;
                } else if d < -pi {
                    d = d + pi + pi;
                }
                let t = ta + s * d;
                [radius * t.cos(), radius * t.sin()]
            }
        }
    }

    /// Transfinite map of the patch evaluated at reference point `(xi, eta)`.
    pub fn map(&self, xi: T, eta: T) -> Vec2<T> {
        let one = T::one();
        let e0 = self.edge_point(0, xi);
        let e2 = self.edge_point(2, xi);
        let e3 = self.edge_point(3, eta);
        let e1 = self.edge_point(1, eta);
        let w = shape_values(xi, eta);
        let mut out = [T::zero(); 2];
        for d in 0..2 {
            let bilinear = w[0] * self.corners[0][d]
                + w[1] * self.corners[1][d]
                + w[2] * self.corners[2][d]
                + w[3] * self.corners[3][d];
            out[d] = (one - eta) * e0[d] + eta * e2[d] + (one - xi) * e3[d] + xi * e1[d] - bilinear;
        }
        out
    }
}

/// Position of a cell inside its coarse patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchRef<T> {
    pub patch: usize,
    pub origin: Vec2<T>,
    pub size: T,
}

/// What lies across a cell face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Interior { cell: usize, face: usize },
    Boundary,
}

/// Analytic description of the meshed domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain<T> {
    Rectangle { lower: Vec2<T>, upper: Vec2<T> },
    Disk { radius: T },
}

/// Bilinear map `T_K: [0,1]² → K` of a single cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellMapping<T> {
    pub vertices: [Vec2<T>; 4],
}

impl<T: Real> CellMapping<T> {
    pub fn map(&self, xi: T, eta: T) -> Vec2<T> {
        let w = shape_values(xi, eta);
        let mut x = [T::zero(); 2];
        for (k, v) in self.vertices.iter().enumerate() {
            x[0] += w[k] * v[0];
            x[1] += w[k] * v[1];
        }
        x
    }

    /// Jacobian `[[∂x/∂ξ, ∂x/∂η], [∂y/∂ξ, ∂y/∂η]]`.
    pub fn jacobian(&self, xi: T, eta: T) -> [[T; 2]; 2] {
        let g = shape_gradients(xi, eta);
        let mut j = [[T::zero(); 2]; 2];
        for (k, v) in self.vertices.iter().enumerate() {
            for r in 0..2 {
                j[r][0] += v[r] * g[k][0];
                j[r][1] += v[r] * g[k][1];
            }
        }
        j
    }

    pub fn det(&self, xi: T, eta: T) -> T {
        let j = self.jacobian(xi, eta);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Physical gradients of the four shape functions at `(xi, eta)`.
    pub fn physical_gradients(&self, xi: T, eta: T) -> ([Vec2<T>; 4], T) {
        let j = self.jacobian(xi, eta);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let g = shape_gradients(xi, eta);
        let mut out = [[T::zero(); 2]; 4];
        for k in 0..4 {
            // J^{-T} ĝ
            out[k][0] = (j[1][1] * g[k][0] - j[1][0] * g[k][1]) / det;
            out[k][1] = (-j[0][1] * g[k][0] + j[0][0] * g[k][1]) / det;
        }
        (out, det)
    }

    /// Inverts the bilinear map by Newton iteration.
    pub fn inverse(&self, p: Vec2<T>, tol: T) -> Option<Vec2<T>> {
        let half = T::lit(0.5);
        let mut r = [half, half];
        for _ in 0..60 {
            let x = self.map(r[0], r[1]);
            let f = [x[0] - p[0], x[1] - p[1]];
            let j = self.jacobian(r[0], r[1]);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det <= T::zero() {
                return None;
            }
            let d0 = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let d1 = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
            r[0] -= d0;
            r[1] -= d1;
            if d0.abs().max(d1.abs()) <= tol {
                return Some(r);
            }
        }
        None
    }
}

/// Conforming quadrilateral mesh.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub vertices: Vec<Vec2<T>>,
    pub cells: Vec<[usize; 4]>,
    pub neighbors: Vec<[Neighbor; 4]>,
    pub boundary_vertex: Vec<bool>,
    pub refinement_level: usize,
    pub domain: Domain<T>,
    patches: Vec<Patch<T>>,
    patch_refs: Vec<PatchRef<T>>,
}

/// Interpolation weights from the vertices of a coarse mesh to the vertices
/// of its uniform refinement, stored row-wise per fine vertex.
#[derive(Clone, Debug)]
pub struct VertexTransfer<T> {
    pub n_coarse: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Real> VertexTransfer<T> {
    pub fn n_fine(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Evaluates the coarse field at the fine vertices.
    pub fn prolongate(&self, coarse: &[T]) -> Vec<T> {
        (0..self.n_fine())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.weights[k] * coarse[self.cols[k]])
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
}

impl<T: Real> Mesh<T> {
    fn from_parts(
        vertices: Vec<Vec2<T>>,
        cells: Vec<[usize; 4]>,
        patches: Vec<Patch<T>>,
        patch_refs: Vec<PatchRef<T>>,
        domain: Domain<T>,
        refinement_level: usize,
    ) -> Result<Self, MeshError> {
        let (neighbors, boundary_vertex) = build_topology(vertices.len(), &cells)?;
        let mesh = Self {
            vertices,
            cells,
            neighbors,
            boundary_vertex,
            refinement_level,
            domain,
            patches,
            patch_refs,
        };
        mesh.check_jacobians()?;
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn mapping(&self, cell: usize) -> CellMapping<T> {
        let c = self.cells[cell];
        CellMapping {
            vertices: [
                self.vertices[c[0]],
                self.vertices[c[1]],
                self.vertices[c[2]],
                self.vertices[c[3]],
            ],
        }
    }

    /// Local vertex indices of face `f`.
    #[inline]
    pub fn face_vertices(f: usize) -> (usize, usize) {
        (f, (f + 1) % 4)
    }

    /// Number of interior faces, each counted once.
    pub fn n_interior_faces(&self) -> usize {
        self.neighbors
            .iter()
            .flatten()
            .filter(|n| matches!(n, Neighbor::Interior { .. }))
            .count()
            / 2
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.neighbors
            .iter()
            .flatten()
            .filter(|n| matches!(n, Neighbor::Boundary))
            .count()
    }

    /// Mesh area by 2×2 Gauss quadrature of the bilinear cell maps.
    pub fn area(&self) -> T {
        let g = gauss2::<T>();
        (0..self.n_cells())
            .map(|k| {
                let m = self.mapping(k);
                let mut a = T::zero();
                for &(xi, wx) in &g {
                    for &(eta, wy) in &g {
                        a += wx * wy * m.det(xi, eta);
                    }
                }
                a
            })
            .fold(T::zero(), |a, b| a + b)
    }

    /// Smallest edge length over all cells.
    pub fn min_edge_length(&self) -> T {
        let mut h = T::infinity();
        for c in &self.cells {
            for f in 0..4 {
                let (a, b) = Self::face_vertices(f);
                let pa = self.vertices[c[a]];
                let pb = self.vertices[c[b]];
                h = h.min(norm([pb[0] - pa[0], pb[1] - pa[1]]));
            }
        }
        h
    }

    /// Largest edge length over all cells.
    pub fn max_edge_length(&self) -> T {
        let mut h = T::zero();
        for c in &self.cells {
            for f in 0..4 {
                let (a, b) = Self::face_vertices(f);
                let pa = self.vertices[c[a]];
                let pb = self.vertices[c[b]];
                h = h.max(norm([pb[0] - pa[0], pb[1] - pa[1]]));
            }
        }
        h
    }

    /// Checks Jacobian positivity at the four corners and at the 2×2 Gauss
    /// points of every cell.
    pub fn check_jacobians(&self) -> Result<(), MeshError> {
        let g = gauss2::<T>();
        for k in 0..self.n_cells() {
            let m = self.mapping(k);
            let corners = REF_CORNERS.iter().map(|c| (T::lit(c[0]), T::lit(c[1])));
            let gauss = g.iter().flat_map(|&(a, _)| g.iter().map(move |&(b, _)| (a, b)));
            for (xi, eta) in corners.chain(gauss) {
                let det = m.det(xi, eta);
                if det.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
                    return Err(MeshError::InvertedCell {
                        cell: k,
                        det: det.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks that every interior face is shared by exactly two cells that
    /// list the same two vertices.
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        for (k, nb) in self.neighbors.iter().enumerate() {
            for (f, n) in nb.iter().enumerate() {
                if let Neighbor::Interior { cell, face } = *n {
                    let (a, b) = Self::face_vertices(f);
                    let (c, d) = Self::face_vertices(face);
                    let mine = (self.cells[k][a], self.cells[k][b]);
                    let theirs = (self.cells[cell][d], self.cells[cell][c]);
                    let back = self.neighbors[cell][face];
                    if mine != theirs || back != (Neighbor::Interior { cell: k, face: f }) {
                        return Err(MeshError::NonConforming(k, cell));
                    }
                }
            }
        }
        Ok(())
    }

    /// Uniform refinement, also returning the vertex interpolation weights.
    pub fn refine_with_transfer(&self) -> Result<(Self, VertexTransfer<T>), MeshError> {
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let nv = self.n_vertices();
        let mut vertices = self.vertices.clone();
        let mut parents: Vec<Vec<(usize, T)>> = (0..nv).map(|i| vec![(i, T::one())]).collect();
        let mut edge_mid: HashMap<(usize, usize), usize> = HashMap::new();

        // Reference midpoints of the four faces.
        let face_mid = [(half, T::zero()), (T::one(), half), (half, T::one()), (T::zero(), half)];

        let mut mids = vec![[0usize; 4]; self.n_cells()];
        for (k, cell) in self.cells.iter().enumerate() {
            let pr = self.patch_refs[k];
            let patch = &self.patches[pr.patch];
            for f in 0..4 {
                let (a, b) = Self::face_vertices(f);
                let (va, vb) = (cell[a], cell[b]);
                let key = (va.min(vb), va.max(vb));
                let idx = *edge_mid.entry(key).or_insert_with(|| {
                    let (s, t) = face_mid[f];
                    let p = patch.map(pr.origin[0] + pr.size * s, pr.origin[1] + pr.size * t);
                    vertices.push(p);
                    parents.push(vec![(va, half), (vb, half)]);
                    vertices.len() - 1
                });
                mids[k][f] = idx;
            }
        }

        let mut cells = Vec::with_capacity(4 * self.n_cells());
        let mut refs = Vec::with_capacity(4 * self.n_cells());
        for (k, cell) in self.cells.iter().enumerate() {
            let pr = self.patch_refs[k];
            let patch = &self.patches[pr.patch];
            let center = patch.map(pr.origin[0] + pr.size * half, pr.origin[1] + pr.size * half);
            vertices.push(center);
            parents.push(cell.iter().map(|&v| (v, quarter)).collect());
            let c = vertices.len() - 1;
            let m = mids[k];
            let hs = pr.size * half;
            let o = pr.origin;
            cells.push([cell[0], m[0], c, m[3]]);
            refs.push(PatchRef { patch: pr.patch, origin: o, size: hs });
            cells.push([m[0], cell[1], m[1], c]);
            refs.push(PatchRef { patch: pr.patch, origin: [o[0] + hs, o[1]], size: hs });
            cells.push([c, m[1], cell[2], m[2]]);
            refs.push(PatchRef { patch: pr.patch, origin: [o[0] + hs, o[1] + hs], size: hs });
            cells.push([m[3], c, m[2], cell[3]]);
            refs.push(PatchRef { patch: pr.patch, origin: [o[0], o[1] + hs], size: hs });
        }

        let mut row_ptr = Vec::with_capacity(vertices.len() + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for p in &parents {
            for &(c, w) in p {
                cols.push(c);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }

        let mut fine = Self::from_parts(
            vertices,
            cells,
            self.patches.clone(),
            refs,
            self.domain,
            self.refinement_level + 1,
        )?;
        fine.project_boundary();
        fine.check_jacobians()?;
        Ok((
            fine,
            VertexTransfer {
                n_coarse: nv,
                row_ptr,
                cols,
                weights,
            },
        ))
    }

    fn project_boundary(&mut self) {
        if let Domain::Disk { radius } = self.domain {
            for (v, on) in self.vertices.iter_mut().zip(&self.boundary_vertex) {
                if *on {
                    let r = norm(*v);
                    v[0] = v[0] * radius / r;
                    v[1] = v[1] * radius / r;
                }
            }
        }
    }
}

/// Uniform refinement: each quadrilateral is split into four.
pub fn refine_globally<T: Real>(mesh: &Mesh<T>) -> Result<Mesh<T>, MeshError> {
    mesh.refine_with_transfer().map(|(m, _)| m)
}

/// Uniform Cartesian mesh of `subdivisions[0] × subdivisions[1]` cells.
pub fn build_rectangle_mesh<T: Real>(
    lower: Vec2<T>,
    upper: Vec2<T>,
    subdivisions: [usize; 2],
) -> Result<Mesh<T>, MeshError> {
    let [nx, ny] = subdivisions;
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidSubdivisions(nx, ny));
    }
    if !(lower[0] < upper[0] && lower[1] < upper[1]) {
        return Err(MeshError::InvalidBounds {
            lower: [lower[0].as_f64(), lower[1].as_f64()],
            upper: [upper[0].as_f64(), upper[1].as_f64()],
        });
    }
    let hx = (upper[0] - lower[0]) / T::from_usize_lossy(nx);
    let hy = (upper[1] - lower[1]) / T::from_usize_lossy(ny);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { upper[0] } else { lower[0] + hx * T::from_usize_lossy(i) };
            let y = if j == ny { upper[1] } else { lower[1] + hy * T::from_usize_lossy(j) };
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(nx * ny);
    let mut patches = Vec::with_capacity(nx * ny);
    let mut refs = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
            patches.push(Patch::straight([
                vertices[c[0]],
                vertices[c[1]],
                vertices[c[2]],
                vertices[c[3]],
            ]));
            refs.push(PatchRef {
                patch: cells.len(),
                origin: [T::zero(), T::zero()],
                size: T::one(),
            });
            cells.push(c);
        }
    }
    Mesh::from_parts(vertices, cells, patches, refs, Domain::Rectangle { lower, upper }, 0)
}

/// Relative half-width of the central square of the coarse disk mesh.
const DISK_CORE_FRACTION: f64 = 0.4;

/// Twelve-cell coarse disk (a 2×2 central block and an 8-cell ring),
/// refined `refinement` times.
pub fn build_disk_mesh<T: Real>(radius: T, refinement: usize) -> Result<Mesh<T>, MeshError> {
    let mut mesh = coarse_disk(radius)?;
    for _ in 0..refinement {
        mesh = refine_globally(&mesh)?;
    }
    Ok(mesh)
}

fn coarse_disk<T: Real>(radius: T) -> Result<Mesh<T>, MeshError> {
    if radius.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(MeshError::InvalidRadius(radius.as_f64()));
    }
    let a = radius * T::lit(DISK_CORE_FRACTION);
    let z = T::zero();
    // 3×3 grid of the central block, row-major from the bottom left.
    let mut vertices: Vec<Vec2<T>> = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            let x = [-a, z, a][i];
            let y = [-a, z, a][j];
            vertices.push([x, y]);
        }
    }
    let g = |i: usize, j: usize| j * 3 + i;
    let mut cells = vec![
        [g(0, 0), g(1, 0), g(1, 1), g(0, 1)],
        [g(1, 0), g(2, 0), g(2, 1), g(1, 1)],
        [g(1, 1), g(2, 1), g(2, 2), g(1, 2)],
        [g(0, 1), g(1, 1), g(1, 2), g(0, 2)],
    ];
    // Perimeter of the central square, counterclockwise from (a, 0).
    let inner = [
        g(2, 1),
        g(2, 2),
        g(1, 2),
        g(0, 2),
        g(0, 1),
        g(0, 0),
        g(1, 0),
        g(2, 0),
    ];
    let mut outer = Vec::with_capacity(8);
    for k in 0..8 {
        let t = T::FRAC_PI_4() * T::from_usize_lossy(k);
        vertices.push([radius * t.cos(), radius * t.sin()]);
        outer.push(vertices.len() - 1);
    }
    for k in 0..8 {
        let n = (k + 1) % 8;
        cells.push([inner[k], outer[k], outer[n], inner[n]]);
    }
    let mut patches = Vec::with_capacity(12);
    for (k, c) in cells.iter().enumerate() {
        let corners = [vertices[c[0]], vertices[c[1]], vertices[c[2]], vertices[c[3]]];
        let mut p = Patch::straight(corners);
        if k >= 4 {
            p.edges[1] = EdgeShape::Arc { radius };
        }
        patches.push(p);
    }
    let refs = (0..cells.len())
        .map(|k| PatchRef {
            patch: k,
            origin: [z, z],
            size: T::one(),
        })
        .collect();
    Mesh::from_parts(vertices, cells, patches, refs, Domain::Disk { radius }, 0)
}

type Topology = (Vec<[Neighbor; 4]>, Vec<bool>);

fn build_topology(n_vertices: usize, cells: &[[usize; 4]]) -> Result<Topology, MeshError> {
    let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(2 * cells.len());
    let mut neighbors = vec![[Neighbor::Boundary; 4]; cells.len()];
    for (k, c) in cells.iter().enumerate() {
        for f in 0..4 {
            let (a, b) = Mesh::<f64>::face_vertices(f);
            let key = (c[a].min(c[b]), c[a].max(c[b]));
            match edges.remove(&key) {
                Some((other, of)) => {
                    if neighbors[other][of] != Neighbor::Boundary {
                        return Err(MeshError::NonConforming(other, k));
                    }
                    neighbors[other][of] = Neighbor::Interior { cell: k, face: f };
                    neighbors[k][f] = Neighbor::Interior { cell: other, face: of };
                }
                None => {
                    edges.insert(key, (k, f));
                }
            }
        }
    }
    let mut boundary = vec![false; n_vertices];
    for (&(a, b), _) in edges.iter() {
        boundary[a] = true;
        boundary[b] = true;
    }
    Ok((neighbors, boundary))
}

/// Two-point Gauss rule on `[0, 1]` as `(point, weight)` pairs.
pub fn gauss2<T: Real>() -> [(T, T); 2] {
    let d = T::lit(0.5 / 3f64.sqrt());
    let h = T::lit(0.5);
    [(h - d, h), (h + d, h)]
}

/// Three-point Gauss rule on `[0, 1]`.
pub fn gauss3<T: Real>() -> [(T, T); 3] {
    let d = T::lit(0.5 * (0.6f64).sqrt());
    let h = T::lit(0.5);
    [
        (h - d, T::lit(5.0 / 18.0)),
        (h, T::lit(8.0 / 18.0)),
        (h + d, T::lit(5.0 / 18.0)),
    ]
}

/// A sequence of uniformly refined meshes together with the vertex
/// transfers between consecutive levels.
#[derive(Clone, Debug)]
pub struct MeshHierarchy<T> {
    pub levels: Vec<Mesh<T>>,
    /// `transfers[k]` interpolates from level `k` to level `k + 1`.
    pub transfers: Vec<VertexTransfer<T>>,
}

impl<T: Real> MeshHierarchy<T> {
    pub fn from_coarse(coarse: Mesh<T>, refinements: usize) -> Result<Self, MeshError> {
        let mut levels = vec![coarse];
        let mut transfers = Vec::with_capacity(refinements);
        for _ in 0..refinements {
            let (fine, t) = levels.last().expect("non-empty").refine_with_transfer()?;
            levels.push(fine);
            transfers.push(t);
        }
        Ok(Self { levels, transfers })
    }

    /// Rectangle mesh with the given subdivisions, built by refining the
    /// coarsest mesh with the same aspect.
    pub fn rectangle(lower: Vec2<T>, upper: Vec2<T>, subdivisions: [usize; 2]) -> Result<Self, MeshError> {
        let [nx, ny] = subdivisions;
        if nx == 0 || ny == 0 {
            return Err(MeshError::InvalidSubdivisions(nx, ny));
        }
        let mut k = 0;
        while (nx >> k) % 2 == 0 && (ny >> k) % 2 == 0 && (nx >> (k + 1)) >= 1 && (ny >> (k + 1)) >= 1 {
            k += 1;
        }
        let coarse = build_rectangle_mesh(lower, upper, [nx >> k, ny >> k])?;
        Self::from_coarse(coarse, k)
    }

    pub fn disk(radius: T, refinement: usize) -> Result<Self, MeshError> {
        Self::from_coarse(coarse_disk(radius)?, refinement)
    }

    pub fn finest(&self) -> &Mesh<T> {
        self.levels.last().expect("hierarchy has at least one level")
    }
}

/// Bucketed cell search for point evaluation.
pub struct PointLocator<'a, T> {
    mesh: &'a Mesh<T>,
    lower: Vec2<T>,
    cell_size: Vec2<T>,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl<'a, T: Real> PointLocator<'a, T> {
    pub fn new(mesh: &'a Mesh<T>) -> Self {
        let mut lo = [T::infinity(); 2];
        let mut hi = [T::neg_infinity(); 2];
        for v in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let n = ((mesh.n_cells() as f64).sqrt().ceil() as usize).max(1);
        let dims = [n, n];
        let cell_size = [
            (hi[0] - lo[0]) / T::from_usize_lossy(n),
            (hi[1] - lo[1]) / T::from_usize_lossy(n),
        ];
        let mut buckets = vec![Vec::new(); n * n];
        let mut me = Self {
            mesh,
            lower: lo,
            cell_size,
            dims,
            buckets: Vec::new(),
        };
        for k in 0..mesh.n_cells() {
            let mut blo = [T::infinity(); 2];
            let mut bhi = [T::neg_infinity(); 2];
            for &v in &mesh.cells[k] {
                for d in 0..2 {
                    blo[d] = blo[d].min(mesh.vertices[v][d]);
                    bhi[d] = bhi[d].max(mesh.vertices[v][d]);
                }
            }
            let a = me.bucket_of(blo);
            let b = me.bucket_of(bhi);
            for j in a[1]..=b[1] {
                for i in a[0]..=b[0] {
                    buckets[j * n + i].push(k);
                }
            }
        }
        me.buckets = buckets;
        me
    }

    fn bucket_of(&self, p: Vec2<T>) -> [usize; 2] {
        let mut out = [0; 2];
        for d in 0..2 {
            let s = ((p[d] - self.lower[d]) / self.cell_size[d]).floor();
            let s = s.max(T::zero()).to_usize().unwrap_or(0);
            out[d] = s.min(self.dims[d] - 1);
        }
        out
    }

    /// Finds a cell containing `p` and the reference coordinates of `p`.
    pub fn locate(&self, p: Vec2<T>) -> Result<(usize, Vec2<T>), MeshError> {
        let b = self.bucket_of(p);
        let slack = T::lit(1e-10);
        for &k in &self.buckets[b[1] * self.dims[0] + b[0]] {
            if let Some(r) = self.mesh.mapping(k).inverse(p, T::lit(1e-12)) {
                if r.iter().all(|&s| s >= -slack && s <= T::one() + slack) {
                    return Ok((k, r));
                }
            }
        }
        Err(MeshError::PointNotFound(p[0].as_f64(), p[1].as_f64()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_rectangle() {
        let m = build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], [1, 1]).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_interior_faces(), 0);
        assert!(m.boundary_vertex.iter().all(|&b| b));
    }

    #[test]
    fn two_cell_rectangle_counts() {
        let m = build_rectangle_mesh([0.0, 0.0], [2.0, 1.0], [2, 1]).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_vertices(), 6);
        assert_eq!(m.n_interior_faces(), 1);
        m.check_conformity().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], [0, 3]).unwrap_err(),
            MeshError::InvalidSubdivisions(0, 3)
        );
        assert!(matches!(
            build_rectangle_mesh([0.0, 0.0], [0.0, 1.0], [1, 1]),
            Err(MeshError::InvalidBounds { .. })
        ));
        assert_eq!(build_disk_mesh(-1.0, 0).unwrap_err(), MeshError::InvalidRadius(-1.0));
        assert_eq!(build_disk_mesh(0.0, 0).unwrap_err(), MeshError::InvalidRadius(0.0));
    }

    #[test]
    fn refine_unit_square() {
        let m = build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], [1, 1]).unwrap();
        let f = refine_globally(&m).unwrap();
        assert_eq!(f.n_cells(), 4);
        assert_eq!(f.n_vertices(), 9);
        f.check_conformity().unwrap();
        let ff = refine_globally(&f).unwrap();
        assert_eq!(ff.n_cells(), 16 * m.n_cells());
    }

    #[test]
    fn coarse_disk_layout() {
        let m = build_disk_mesh(1.0f64, 0).unwrap();
        assert_eq!(m.n_cells(), 12);
        assert_eq!(m.n_vertices(), 17);
        m.check_conformity().unwrap();
        m.check_jacobians().unwrap();
        for (v, &b) in m.vertices.iter().zip(&m.boundary_vertex) {
            if b {
                assert!((norm(*v) - 1.0).abs() <= 1e-12);
            }
        }
        assert_eq!(refine_globally(&m).unwrap().n_cells(), 48);
    }

    #[test]
    fn disk_refinement_keeps_boundary_on_circle() {
        let r = 16.0f64;
        let m = build_disk_mesh(r, 3).unwrap();
        m.check_conformity().unwrap();
        let mut count = 0;
        for (v, &b) in m.vertices.iter().zip(&m.boundary_vertex) {
            if b {
                count += 1;
                assert!((norm(*v) - r).abs() <= 1e-12 * r);
            }
        }
        assert_eq!(count, 8 * 8);
    }

    #[test]
    fn dof_counts_for_disk_levels() {
        // dim V_h = 4 × cells.
        assert_eq!(4 * 12 * 4usize.pow(6), 196_608);
        assert_eq!(4 * 12 * 4usize.pow(9), 12_582_912);
        let m = build_disk_mesh(16.0, 2).unwrap();
        assert_eq!(m.n_cells(), 12 * 16);
    }

    #[test]
    fn transfer_reproduces_linear_functions() {
        let h = MeshHierarchy::rectangle([0.0, 0.0], [2.0, 1.0], [4, 2]).unwrap();
        assert_eq!(h.levels.len(), 2);
        assert_eq!(h.finest().n_cells(), 8);
        let coarse = &h.levels[0];
        let fine = &h.levels[1];
        let f = |p: Vec2<f64>| 3.0 * p[0] - p[1] + 0.5;
        let cv: Vec<f64> = coarse.vertices.iter().map(|&p| f(p)).collect();
        let fv = h.transfers[0].prolongate(&cv);
        for (p, v) in fine.vertices.iter().zip(fv) {
            assert!((f(*p) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn newton_inverse_on_distorted_cell() {
        let m = CellMapping {
            vertices: [[0.0f64, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 2.0]],
        };
        let r = [0.3, 0.8];
        let p = m.map(r[0], r[1]);
        let q = m.inverse(p, 1e-14).unwrap();
        assert!((q[0] - r[0]).abs() < 1e-12 && (q[1] - r[1]).abs() < 1e-12);
    }

    #[test]
    fn locator_finds_points() {
        let m = build_disk_mesh(16.0, 3).unwrap();
        let loc = PointLocator::new(&m);
        for k in 0..64 {
            let t = k as f64 * 0.1;
            let p = [6.0 * t.cos(), 6.0 * t.sin()];
            let (c, r) = loc.locate(p).unwrap();
            let q = m.mapping(c).map(r[0], r[1]);
            assert!((q[0] - p[0]).abs() < 1e-10 && (q[1] - p[1]).abs() < 1e-10);
        }
        assert!(loc.locate([17.0, 0.0]).is_err());
    }
}
