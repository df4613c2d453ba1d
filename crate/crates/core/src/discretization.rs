//! Discontinuous and continuous Q1 spaces on a quadrilateral mesh.
//!
//! dG node `4k + a` is the collocation point at local vertex `a` of cell `k`.
//! CG nodes are mesh vertices. All integrals use 2×2 Gauss quadrature on
//! cells and exact trace formulas on the straight faces.

use rayon::prelude::*;

use crate::error::DiscretizationError;
use crate::linalg::Csr;
use crate::mesh::{gauss2, shape_values, Mesh, Neighbor, REF_CORNERS};
use crate::scalar::{det_sum, norm, Real, Vec2};

/// Rows per rayon task in the operator kernels.
pub(crate) const ROW_CHUNK: usize = 1024;

/// Collocation points and lumped masses of the discontinuous space.
#[derive(Clone, Debug)]
pub struct DgLayout<T> {
    pub coords: Vec<Vec2<T>>,
    pub masses: Vec<T>,
    /// Mesh vertex carrying each node.
    pub vertex: Vec<usize>,
}

impl<T: Real> DgLayout<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn cell_of(node: usize) -> usize {
        node / 4
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<V, F>(&self, f: F) -> Vec<V>
    where
        V: Send,
        F: Fn(Vec2<T>) -> V + Sync,
    {
        self.coords.par_iter().map(|&x| f(x)).collect()
    }

    fn check_len(&self, got: usize) -> Result<(), DiscretizationError> {
        if got == self.len() {
            Ok(())
        } else {
            Err(DiscretizationError::LayoutMismatch {
                expected: self.len(),
                got,
            })
        }
    }

    /// `⟨f, g⟩_h = Σ m_i f_i g_i`.
    pub fn lumped_inner_product(&self, f: &[T], g: &[T]) -> Result<T, DiscretizationError> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        let terms: Vec<T> = self
            .masses
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&m, (&a, &b))| m * a * b)
            .collect();
        Ok(det_sum(&terms))
    }

    /// Lumped product of 2-vector fields, summed over components.
    pub fn lumped_inner_product_vec(&self, f: &[Vec2<T>], g: &[Vec2<T>]) -> Result<T, DiscretizationError> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        let terms: Vec<T> = self
            .masses
            .iter()
            .zip(f.iter().zip(g))
            .map(|(&m, (a, b))| m * (a[0] * b[0] + a[1] * b[1]))
            .collect();
        Ok(det_sum(&terms))
    }
}

/// Nodes of the continuous space.
#[derive(Clone, Debug)]
pub struct CgLayout {
    pub dirichlet: Vec<bool>,
}

impl CgLayout {
    pub fn len(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirichlet.is_empty()
    }

    pub fn n_free(&self) -> usize {
        self.dirichlet.iter().filter(|&&d| !d).count()
    }
}

/// Sparse coupling vectors `c_ij` of the dG skeleton.
#[derive(Clone, Debug)]
pub struct CouplingGraph<T> {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub c: Vec<Vec2<T>>,
    pub c_norm: Vec<T>,
    /// Position of entry `(j, i)` for the entry `(i, j)`.
    pub transpose: Vec<usize>,
    /// `c_i^∂D`, zero at interior nodes.
    pub c_boundary: Vec<Vec2<T>>,
    pub boundary_nodes: Vec<usize>,
}

impl<T: Real> CouplingGraph<T> {
    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Returns the largest skew-symmetry defect `|c_ij + c_ji|`.
    pub fn skew_defect(&self) -> T {
        let mut worst = T::zero();
        for p in 0..self.cols.len() {
            let q = self.transpose[p];
            let d = norm([self.c[p][0] + self.c[q][0], self.c[p][1] + self.c[q][1]]);
            worst = worst.max(d);
        }
        worst
    }

    /// Returns `(node, |Σ_j c_ij + c_i^∂D| / Σ_j |c_ij|)` for the worst row.
    pub fn consistency_defect(&self) -> (usize, T) {
        let mut worst = (0, T::zero());
        for i in 0..self.n_rows() {
            let mut s = self.c_boundary[i];
            let mut scale = norm(self.c_boundary[i]);
            for p in self.row(i) {
                s[0] += self.c[p][0];
                s[1] += self.c[p][1];
                scale += self.c_norm[p];
            }
            let d = norm(s) / scale;
            if d > worst.1 {
                worst = (i, d);
            }
        }
        worst
    }
}

/// Per-cell precomputed geometry.
#[derive(Clone, Copy, Debug)]
struct CellData<T> {
    /// Local Q1 stiffness matrix.
    stiffness: [[T; 4]; 4],
    /// `grads[j][a]`: physical gradient of shape `a` at corner `j`.
    grads: [[Vec2<T>; 4]; 4],
}

/// Discrete spaces, masses, coupling graph and CG operators on one mesh.
#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub mesh: Mesh<T>,
    pub dg: DgLayout<T>,
    pub cg: CgLayout,
    pub graph: CouplingGraph<T>,
    cells: Vec<CellData<T>>,
    /// For vertex `v`, the dG nodes at `v` are `incidence[inc_ptr[v]..inc_ptr[v+1]]`.
    inc_ptr: Vec<usize>,
    incidence: Vec<usize>,
}

impl<T: Real> Discretization<T> {
    pub fn new(mesh: Mesh<T>) -> Result<Self, DiscretizationError> {
        let n_cells = mesh.n_cells();
        let cells: Vec<CellData<T>> = (0..n_cells).map(|k| cell_data(&mesh, k)).collect();
        let dg = assemble_layout(&mesh)?;
        let cg = CgLayout {
            dirichlet: mesh.boundary_vertex.clone(),
        };

        let nv = mesh.n_vertices();
        let mut counts = vec![0usize; nv + 1];
        for c in &mesh.cells {
            for &v in c {
                counts[v + 1] += 1;
            }
        }
        for v in 0..nv {
            counts[v + 1] += counts[v];
        }
        let inc_ptr = counts.clone();
        let mut fill = counts;
        let mut incidence = vec![0usize; 4 * n_cells];
        for (k, c) in mesh.cells.iter().enumerate() {
            for (a, &v) in c.iter().enumerate() {
                incidence[fill[v]] = 4 * k + a;
                fill[v] += 1;
            }
        }

        let graph = assemble_coupling_graph(&mesh)?;
        Ok(Self {
            mesh,
            dg,
            cg,
            graph,
            cells,
            inc_ptr,
            incidence,
        })
    }

    pub fn n_dg(&self) -> usize {
        self.dg.len()
    }

    pub fn n_cg(&self) -> usize {
        self.cg.len()
    }

    /// dG nodes located at CG vertex `v`.
    pub fn nodes_at_vertex(&self, v: usize) -> &[usize] {
        &self.incidence[self.inc_ptr[v]..self.inc_ptr[v + 1]]
    }

    /// CG nodal interpolant.
    pub fn interpolate_cg<F: Fn(Vec2<T>) -> T + Sync>(&self, f: F) -> Vec<T> {
        self.mesh.vertices.par_iter().map(|&x| f(x)).collect()
    }

    /// `y = K x` with `K_ij = (∇ψ_j, ∇ψ_i)`, no boundary treatment.
    pub fn stiffness_apply(&self, x: &[T], y: &mut [T]) {
        self.rows_apply(y, |v| {
            let mut s = T::zero();
            for &node in self.nodes_at_vertex(v) {
                let (k, a) = (node / 4, node % 4);
                let cell = &self.mesh.cells[k];
                let row = &self.cells[k].stiffness[a];
                for b in 0..4 {
                    s += row[b] * x[cell[b]];
                }
            }
            s
        });
    }

    /// Gradient of the CG field restricted to each cell, at each dG node.
    pub fn gradient_at_dg_nodes(&self, phi: &[T]) -> Vec<Vec2<T>> {
        let mut out = vec![[T::zero(); 2]; self.n_dg()];
        self.gradient_at_dg_nodes_into(phi, &mut out);
        out
    }

    pub fn gradient_at_dg_nodes_into(&self, phi: &[T], out: &mut [Vec2<T>]) {
        out.par_chunks_mut(4 * 256).enumerate().for_each(|(chunk, o)| {
            for (off, quad) in o.chunks_mut(4).enumerate() {
                let k = chunk * 256 + off;
                let cell = &self.mesh.cells[k];
                let g = &self.cells[k].grads;
                for (j, q) in quad.iter_mut().enumerate() {
                    let mut s = [T::zero(); 2];
                    for b in 0..4 {
                        let p = phi[cell[b]];
                        s[0] += p * g[j][b][0];
                        s[1] += p * g[j][b][1];
                    }
                    *q = s;
                }
            }
        });
    }

    /// `ψ ↦ ⟨scaling · w, ∇ψ⟩_h` for every CG basis function.
    pub fn dg_divergence_weak_form(&self, w: &[Vec2<T>], scaling: &[T]) -> Vec<T> {
        let q: Vec<Vec2<T>> = (0..self.n_dg())
            .into_par_iter()
            .map(|j| {
                let s = self.dg.masses[j] * scaling[j];
                [s * w[j][0], s * w[j][1]]
            })
            .collect();
        let mut out = vec![T::zero(); self.n_cg()];
        self.weak_gather(&q, &mut out);
        out
    }

    /// `out_v = Σ_j q_j · ∇ψ_v(x_j)` where `q` already carries the masses.
    pub fn weak_gather(&self, q: &[Vec2<T>], out: &mut [T]) {
        self.rows_apply(out, |v| self.weak_row(q, v));
    }

    #[inline]
    pub(crate) fn weak_row(&self, q: &[Vec2<T>], v: usize) -> T {
        let mut s = T::zero();
        for &node in self.nodes_at_vertex(v) {
            let (k, a) = (node / 4, node % 4);
            let g = &self.cells[k].grads;
            for j in 0..4 {
                let qj = q[4 * k + j];
                s += qj[0] * g[j][a][0] + qj[1] * g[j][a][1];
            }
        }
        s
    }

    #[inline]
    pub(crate) fn stiffness_row(&self, x: &[T], v: usize) -> T {
        let mut s = T::zero();
        for &node in self.nodes_at_vertex(v) {
            let (k, a) = (node / 4, node % 4);
            let cell = &self.mesh.cells[k];
            let row = &self.cells[k].stiffness[a];
            for b in 0..4 {
                s += row[b] * x[cell[b]];
            }
        }
        s
    }

    /// `⟨f, ψ_v⟩_h` for every CG basis function.
    pub fn lumped_load(&self, f: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cg()];
        self.rows_apply(&mut out, |v| {
            self.nodes_at_vertex(v)
                .iter()
                .fold(T::zero(), |s, &j| s + self.dg.masses[j] * f[j])
        });
        out
    }

    /// Parallel row loop over CG rows with a fixed partition.
    pub(crate) fn rows_apply<F: Fn(usize) -> T + Sync>(&self, out: &mut [T], f: F) {
        out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, o)| {
            for (r, y) in o.iter_mut().enumerate() {
                *y = f(c * ROW_CHUNK + r);
            }
        });
    }

    /// Assembled CG stiffness matrix.
    pub fn assemble_stiffness(&self) -> Csr<T> {
        let mut trip = Vec::with_capacity(16 * self.mesh.n_cells());
        for (k, cell) in self.mesh.cells.iter().enumerate() {
            for a in 0..4 {
                for b in 0..4 {
                    trip.push((cell[a], cell[b], self.cells[k].stiffness[a][b]));
                }
            }
        }
        Csr::from_triplets(self.n_cg(), self.n_cg(), trip)
    }

    pub(crate) fn cell_grads(&self, k: usize) -> &[[Vec2<T>; 4]; 4] {
        &self.cells[k].grads
    }

    pub(crate) fn cell_stiffness(&self, k: usize) -> &[[T; 4]; 4] {
        &self.cells[k].stiffness
    }

    /// Diagonal of the CG stiffness matrix, `‖∇ψ_v‖²_{L²}`.
    pub fn stiffness_diagonal(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cg()];
        self.rows_apply(&mut out, |v| {
            self.nodes_at_vertex(v)
                .iter()
                .fold(T::zero(), |s, &node| s + self.cells[node / 4].stiffness[node % 4][node % 4])
        });
        out
    }

    /// CG field `‖∇φ‖²_{L²} = φᵀ K φ`.
    pub fn dirichlet_energy(&self, phi: &[T]) -> T {
        let mut k = vec![T::zero(); self.n_cg()];
        self.stiffness_apply(phi, &mut k);
        crate::scalar::det_dot(phi, &k)
    }
}

fn cell_data<T: Real>(mesh: &Mesh<T>, k: usize) -> CellData<T> {
    let map = mesh.mapping(k);
    let mut stiffness = [[T::zero(); 4]; 4];
    let g = gauss2::<T>();
    for &(xi, wx) in &g {
        for &(eta, wy) in &g {
            let (grad, det) = map.physical_gradients(xi, eta);
            let w = wx * wy * det;
            for a in 0..4 {
                for b in 0..4 {
                    stiffness[a][b] += w * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                }
            }
        }
    }
    let mut grads = [[[T::zero(); 2]; 4]; 4];
    for (j, c) in REF_CORNERS.iter().enumerate() {
        grads[j] = map.physical_gradients(T::lit(c[0]), T::lit(c[1])).0;
    }
    CellData { stiffness, grads }
}

/// Collocation coordinates and lumped masses `m_{j,K} = ∫_K φ_{j,K}`.
pub fn assemble_layout<T: Real>(mesh: &Mesh<T>) -> Result<DgLayout<T>, DiscretizationError> {
    let n = 4 * mesh.n_cells();
    let mut coords = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let mut vertex = Vec::with_capacity(n);
    let g = gauss2::<T>();
    for k in 0..mesh.n_cells() {
        let map = mesh.mapping(k);
        let mut m = [T::zero(); 4];
        for &(xi, wx) in &g {
            for &(eta, wy) in &g {
                let w = wx * wy * map.det(xi, eta);
                let s = shape_values(xi, eta);
                for a in 0..4 {
                    m[a] += w * s[a];
                }
            }
        }
        for a in 0..4 {
            let node = 4 * k + a;
            if !(m[a] > T::zero()) {
                return Err(DiscretizationError::NonPositiveMass {
                    node,
                    mass: m[a].as_f64(),
                });
            }
            coords.push(map.vertices[a]);
            masses.push(m[a]);
            vertex.push(mesh.cells[k][a]);
        }
    }
    Ok(DgLayout {
        coords,
        masses,
        vertex,
    })
}

/// Tolerance for the algebraic checks on the coupling graph.
const GRAPH_TOL: f64 = 1e-12;

/// Builds the central-flux skeleton `c_ij`, `c_i^∂D`.
pub fn assemble_coupling_graph<T: Real>(mesh: &Mesh<T>) -> Result<CouplingGraph<T>, DiscretizationError> {
    let n_cells = mesh.n_cells();
    let n = 4 * n_cells;
    let half = T::lit(0.5);
    let third = T::one() / T::lit(3.0);
    let sixth = T::one() / T::lit(6.0);
    let g = gauss2::<T>();

    let mut rows: Vec<Vec<(usize, Vec2<T>)>> = vec![Vec::with_capacity(7); n];
    let mut c_boundary = vec![[T::zero(); 2]; n];

    // Face vector (dy, -dx): outward normal times length for a ccw cell.
    let face_vec = |k: usize, f: usize| -> Vec2<T> {
        let (a, b) = Mesh::<T>::face_vertices(f);
        let p = mesh.vertices[mesh.cells[k][a]];
        let q = mesh.vertices[mesh.cells[k][b]];
        [q[1] - p[1], p[0] - q[0]]
    };

    for k in 0..n_cells {
        let map = mesh.mapping(k);
        // a_int[i][j] = ∫_K ∇φ_i φ_j
        let mut a_int = [[[T::zero(); 2]; 4]; 4];
        for &(xi, wx) in &g {
            for &(eta, wy) in &g {
                let (grad, det) = map.physical_gradients(xi, eta);
                let s = shape_values(xi, eta);
                let w = wx * wy * det;
                for i in 0..4 {
                    for j in 0..4 {
                        a_int[i][j][0] += w * grad[i][0] * s[j];
                        a_int[i][j][1] += w * grad[i][1] * s[j];
                    }
                }
            }
        }
        // b_int[i][j] = ½ Σ_F ∫_F φ_i φ_j n
        let mut b_int = [[[T::zero(); 2]; 4]; 4];
        for f in 0..4 {
            let nv = face_vec(k, f);
            let (p, q) = Mesh::<T>::face_vertices(f);
            for &(i, j, w) in &[(p, p, third), (q, q, third), (p, q, sixth), (q, p, sixth)] {
                b_int[i][j][0] += half * w * nv[0];
                b_int[i][j][1] += half * w * nv[1];
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let c = [
                    b_int[i][j][0] - a_int[i][j][0],
                    b_int[i][j][1] - a_int[i][j][1],
                ];
                rows[4 * k + i].push((4 * k + j, c));
                rows[4 * k + j].push((4 * k + i, [-c[0], -c[1]]));
            }
        }

        for f in 0..4 {
            let nv = face_vec(k, f);
            let (p, q) = Mesh::<T>::face_vertices(f);
            match mesh.neighbors[k][f] {
                Neighbor::Boundary => {
                    for &i in &[p, q] {
                        c_boundary[4 * k + i][0] += half * half * nv[0];
                        c_boundary[4 * k + i][1] += half * half * nv[1];
                    }
                }
                Neighbor::Interior { cell: kn, face: fn_ } => {
                    // Each interior face is visited from both sides; add the
                    // pair once from the lower cell index.
                    if kn < k {
                        continue;
                    }
                    let (pn, qn) = Mesh::<T>::face_vertices(fn_);
                    for &i in &[p, q] {
                        for &j in &[pn, qn] {
                            let same = mesh.cells[k][i] == mesh.cells[kn][j];
                            let w = if same { third } else { sixth };
                            let c = [half * w * nv[0], half * w * nv[1]];
                            rows[4 * k + i].push((4 * kn + j, c));
                            rows[4 * kn + j].push((4 * k + i, [-c[0], -c[1]]));
                        }
                    }
                }
            }
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut c = Vec::new();
    row_ptr.push(0);
    for r in rows.iter_mut() {
        r.sort_by_key(|e| e.0);
        for &(j, v) in r.iter() {
            cols.push(j);
            c.push(v);
        }
        row_ptr.push(cols.len());
    }
    let c_norm: Vec<T> = c.iter().map(|&v| norm(v)).collect();
    let mut transpose = vec![0usize; cols.len()];
    for i in 0..n {
        for p in row_ptr[i]..row_ptr[i + 1] {
            let j = cols[p];
            let row_j = &cols[row_ptr[j]..row_ptr[j + 1]];
            let off = row_j.binary_search(&i).map_err(|_| DiscretizationError::CouplingDefect {
                property: "symmetric stencil",
                node: i,
                defect: f64::INFINITY,
            })?;
            transpose[p] = row_ptr[j] + off;
        }
    }
    let boundary_nodes = (0..n)
        .filter(|&i| c_boundary[i][0] != T::zero() || c_boundary[i][1] != T::zero())
        .collect();
    let graph = CouplingGraph {
        row_ptr,
        cols,
        c,
        c_norm,
        transpose,
        c_boundary,
        boundary_nodes,
    };
    let (node, defect) = graph.consistency_defect();
    if defect > T::lit(GRAPH_TOL) {
        return Err(DiscretizationError::CouplingDefect {
            property: "consistency",
            node,
            defect: defect.as_f64(),
        });
    }
    Ok(graph)
}
