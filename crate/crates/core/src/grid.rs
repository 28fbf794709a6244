//! Structured P1 triangulation of `[-1, 1]^2`, optionally masked to the unit disk.
//!
//! Node `(i, j)` sits at `(-1 + i h, -1 + j h)` with `h = 2 / n` and has flat
//! index `j (n + 1) + i` (row-major). Every lattice cell is split along its
//! `(+1, +1)` diagonal into two counter-clockwise triangles.
//!
//! Under the disk mask, only nodes with `|x| <= 1` are active and only
//! triangles with three active vertices that touch at least one interior node
//! are kept. The outermost active layer carries the Dirichlet data; its nodes
//! are moved radially onto the unit circle (see [`BoundaryFit`]).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for geometric membership tests (ball, disk, node hits).
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Square,
    Disk,
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Domain::Square),
            "disk" => Ok(Domain::Disk),
            other => Err(Error::Config(format!(
                "domain must be `square` or `disk`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Square => "square",
            Domain::Disk => "disk",
        })
    }
}

/// How the boundary layer of a disk grid is placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryFit {
    /// Boundary nodes keep their lattice positions (inset up to `sqrt(2) h`).
    Lattice,
    /// Boundary nodes are projected radially onto the unit circle.
    Snapped,
}

#[derive(Clone, Debug)]
pub struct Grid {
    n: usize,
    h: f64,
    domain: Domain,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Lattice cell `(i, j)` each triangle was cut from.
    tri_cell: Vec<(usize, usize)>,
    active: Vec<bool>,
    boundary: Vec<bool>,
    moved: Vec<bool>,
    areas: Vec<f64>,
    /// Gradients of the three barycentric basis functions, per triangle.
    basis_grads: Vec<[[f64; 2]; 3]>,
    lumped_mass: Vec<f64>,
    /// Triangles per lattice cell, for point location.
    cell_tris: Vec<Vec<usize>>,
}

/// Builds the standard grid: square, or disk with boundary nodes on the circle.
pub fn build_grid(n: usize, use_disk_mask: bool) -> Result<Arc<Grid>> {
    let domain = if use_disk_mask {
        Domain::Disk
    } else {
        Domain::Square
    };
    Grid::build(n, domain, BoundaryFit::Snapped).map(Arc::new)
}

impl Grid {
    pub fn build(n: usize, domain: Domain, fit: BoundaryFit) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "grid subdivisions n must be even and >= 4, got {n}"
            )));
        }
        let h = 2.0 / n as f64;
        let side = n + 1;
        let mut nodes = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
            }
        }
        let mut active: Vec<bool> = match domain {
            Domain::Square => vec![true; nodes.len()],
            Domain::Disk => nodes
                .iter()
                .map(|&[x, y]| x * x + y * y <= 1.0 + GEOM_TOL)
                .collect(),
        };

        let idx = |i: usize, j: usize| j * side + i;
        let mut triangles = Vec::with_capacity(2 * n * n);
        let mut tri_cell = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = idx(i, j);
                let b = idx(i + 1, j);
                let c = idx(i + 1, j + 1);
                let d = idx(i, j + 1);
                for tri in [[a, b, c], [a, c, d]] {
                    if tri.iter().all(|&k| active[k]) {
                        triangles.push(tri);
                        tri_cell.push((i, j));
                    }
                }
            }
        }

        let mut incident = vec![0usize; nodes.len()];
        for tri in &triangles {
            for &k in tri {
                incident[k] += 1;
            }
        }
        let full_star: Vec<bool> = incident.iter().map(|&c| c == 6).collect();
        if domain == Domain::Disk {
            // Triangles cut entirely from the boundary layer couple no unknowns
            // and fold over once that layer is moved onto the circle.
            let keep: Vec<bool> = triangles
                .iter()
                .map(|tri| tri.iter().any(|&k| full_star[k]))
                .collect();
            let mut it = keep.iter();
            triangles.retain(|_| *it.next().unwrap());
            let mut it = keep.iter();
            tri_cell.retain(|_| *it.next().unwrap());
            incident.iter_mut().for_each(|c| *c = 0);
            for tri in &triangles {
                for &k in tri {
                    incident[k] += 1;
                }
            }
        }
        // Active nodes that touch no triangle carry no degrees of freedom.
        for (k, a) in active.iter_mut().enumerate() {
            if incident[k] == 0 {
                *a = false;
            }
        }
        let boundary: Vec<bool> = (0..nodes.len())
            .map(|k| active[k] && !full_star[k])
            .collect();

        let mut moved = vec![false; nodes.len()];
        if domain == Domain::Disk && fit == BoundaryFit::Snapped {
            for k in 0..nodes.len() {
                if boundary[k] {
                    let [x, y] = nodes[k];
                    let r = x.hypot(y);
                    if (r - 1.0).abs() > GEOM_TOL {
                        nodes[k] = [x / r, y / r];
                        moved[k] = true;
                    }
                }
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut basis_grads = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [p0, p1, p2] = tri.map(|k| nodes[k]);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if !(det > 0.0) {
                return Err(Error::NumericalBreakdown(format!(
                    "triangle {t} has non-positive area after boundary fitting"
                )));
            }
            // grad(lambda_k) = rot90(opposite edge) / det
            let g0 = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
            let g1 = [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det];
            let g2 = [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det];
            areas.push(0.5 * det);
            basis_grads.push([g0, g1, g2]);
        }

        let mut lumped_mass = vec![0.0; nodes.len()];
        for (tri, &area) in triangles.iter().zip(&areas) {
            for &k in tri {
                lumped_mass[k] += area / 3.0;
            }
        }

        let mut cell_tris = vec![Vec::new(); n * n];
        for (t, &(i, j)) in tri_cell.iter().enumerate() {
            cell_tris[j * n + i].push(t);
        }

        Ok(Self {
            n,
            h,
            domain,
            nodes,
            triangles,
            tri_cell,
            active,
            boundary,
            moved,
            areas,
            basis_grads,
            lumped_mass,
            cell_tris,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        self.nodes[k]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn basis_grads(&self) -> &[[[f64; 2]; 3]] {
        &self.basis_grads
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    /// Active and not carrying Dirichlet data.
    pub fn is_interior(&self, k: usize) -> bool {
        self.active[k] && !self.boundary[k]
    }

    /// Whether the node was displaced from its lattice position.
    pub fn is_moved(&self, k: usize) -> bool {
        self.moved[k]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Per-node activity flags under the disk mask; `None` for the square.
    pub fn disk_mask(&self) -> Option<&[bool]> {
        match self.domain {
            Domain::Disk => Some(&self.active),
            Domain::Square => None,
        }
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(move |&k| self.active[k])
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Flat index of lattice node `(i, j)`, without activity checks.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Lattice coordinates of a flat index.
    pub fn lattice(&self, k: usize) -> (usize, usize) {
        (k % (self.n + 1), k / (self.n + 1))
    }

    /// Active node at lattice position `(i, j)`.
    pub fn node_at(&self, i: usize, j: usize) -> Result<usize> {
        if i > self.n || j > self.n {
            return Err(Error::NodeLookup(format!(
                "lattice index ({i}, {j}) outside 0..={}",
                self.n
            )));
        }
        let k = self.index(i, j);
        if !self.active[k] {
            return Err(Error::NodeLookup(format!(
                "lattice node ({i}, {j}) is masked out"
            )));
        }
        Ok(k)
    }

    /// The node at the origin (exists because `n` is even).
    pub fn origin(&self) -> usize {
        self.index(self.n / 2, self.n / 2)
    }

    /// Active node located at `point`, if any.
    pub fn find_node(&self, point: [f64; 2]) -> Result<usize> {
        let tol = GEOM_TOL.max(1e-9 * self.h);
        let ci = ((point[0] + 1.0) / self.h).round() as i64;
        let cj = ((point[1] + 1.0) / self.h).round() as i64;
        // Snapped boundary nodes move less than two spacings from their lattice spot.
        let reach = if self.domain == Domain::Disk { 2 } else { 0 };
        let n = self.n as i64;
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i > n || j > n {
                    continue;
                }
                let k = self.index(i as usize, j as usize);
                let [x, y] = self.nodes[k];
                if self.active[k] && (x - point[0]).abs() <= tol && (y - point[1]).abs() <= tol {
                    return Ok(k);
                }
            }
        }
        Err(Error::NodeLookup(format!(
            "no active node at ({}, {})",
            point[0], point[1]
        )))
    }

    /// Triangle containing `point` together with its barycentric coordinates.
    pub fn locate(&self, point: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let ci = ((point[0] + 1.0) / self.h).floor() as i64;
        let cj = ((point[1] + 1.0) / self.h).floor() as i64;
        let n = self.n as i64;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (i, j) = (ci + di, cj + dj);
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                for &t in &self.cell_tris[(j * n + i) as usize] {
                    let bary = self.barycentric(t, point);
                    let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
                    if best.as_ref().is_none_or(|b| worst > b.2) {
                        best = Some((t, bary, worst));
                    }
                }
            }
        }
        match best {
            Some((t, bary, worst)) if worst >= -1e-10 => Some((t, bary)),
            _ => None,
        }
    }

    fn barycentric(&self, t: usize, point: [f64; 2]) -> [f64; 3] {
        let tri = self.triangles[t];
        let g = &self.basis_grads[t];
        let mut bary = [0.0; 3];
        // lambda_k(x) = 1 at vertex k, affine with gradient g[k].
        for k in 0..3 {
            let v = self.nodes[tri[k]];
            bary[k] = 1.0 + g[k][0] * (point[0] - v[0]) + g[k][1] * (point[1] - v[1]);
        }
        bary
    }

    /// Lattice cell a triangle was cut from.
    pub fn triangle_cell(&self, t: usize) -> (usize, usize) {
        self.tri_cell[t]
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|k| self.nodes[k]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Smallest ball radius that reaches the four lattice neighbours of a node.
    pub fn min_ball_radius(&self) -> f64 {
        self.h
    }

    /// Whether `point` lies in the (discrete) domain.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        self.locate(point).is_some()
    }
}

/// One real value per node; masked-out nodes hold zero.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.num_nodes()],
        }
    }

    /// Samples `f` at every active node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.num_nodes())
            .map(|k| {
                if grid.is_active(k) {
                    let [x, y] = grid.node(k);
                    f(x, y)
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::Config(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite field value at node {k}"
            )));
        }
        let mut values = values;
        for (k, v) in values.iter_mut().enumerate() {
            if !grid.is_active(k) {
                *v = 0.0;
            }
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Maximum of `|u|` over active nodes.
    pub fn sup_norm(&self) -> f64 {
        self.grid
            .active_nodes()
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|u - v|` over active nodes.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.grid
            .active_nodes()
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }

    /// P1 interpolation at an arbitrary point of the domain.
    ///
    /// A point that coincides with a node returns that node's value exactly.
    pub fn interpolate(&self, point: [f64; 2]) -> Result<f64> {
        if let Ok(k) = self.grid.find_node(point) {
            return Ok(self.values[k]);
        }
        let (t, bary) = self.grid.locate(point).ok_or_else(|| {
            Error::OutOfDomain(format!(
                "point ({}, {}) lies outside the grid domain",
                point[0], point[1]
            ))
        })?;
        let tri = self.grid.triangles[t];
        Ok((0..3).map(|k| bary[k] * self.values[tri[k]]).sum())
    }

    /// Constant gradient of the P1 interpolant on triangle `t`.
    pub fn triangle_gradient(&self, t: usize) -> [f64; 2] {
        let tri = self.grid.triangles[t];
        let g = &self.grid.basis_grads[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += self.values[tri[k]] * g[k][0];
            out[1] += self.values[tri[k]] * g[k][1];
        }
        out
    }
}

/// One 2-vector per node.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<Grid>,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn value(&self, k: usize) -> [f64; 2] {
        self.values[k]
    }

    pub fn norm(&self, k: usize) -> f64 {
        let [a, b] = self.values[k];
        a.hypot(b)
    }

    /// Largest Euclidean norm over active nodes.
    pub fn sup_norm(&self) -> f64 {
        self.grid
            .active_nodes()
            .map(|k| self.norm(k))
            .fold(0.0, f64::max)
    }
}

/// Area-weighted average of the per-triangle P1 gradients at each node.
pub fn recover_gradient(u: &GridFunction) -> VectorField {
    let grid = u.grid();
    let mut acc = vec![[0.0; 2]; grid.num_nodes()];
    let mut weight = vec![0.0; grid.num_nodes()];
    for (t, tri) in grid.triangles().iter().enumerate() {
        let g = u.triangle_gradient(t);
        let area = grid.areas()[t];
        for &k in tri {
            acc[k][0] += area * g[0];
            acc[k][1] += area * g[1];
            weight[k] += area;
        }
    }
    let values = acc
        .into_iter()
        .zip(weight)
        .map(|(a, w)| if w > 0.0 { [a[0] / w, a[1] / w] } else { [0.0; 2] })
        .collect();
    VectorField {
        grid: Arc::clone(grid),
        values,
    }
}

/// What is maximized by [`sup_ball`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SupMode {
    /// `|u(x)|`
    Raw,
    /// `|u(x) - u(x0)|`
    Centered,
    /// `|u(x) - u(x0) - g . (x - x0)|`
    LinearCorrected([f64; 2]),
}

/// Maximum over the active nodes of the closed ball `B_r(x0)`.
pub fn sup_ball(u: &GridFunction, x0: usize, r: f64, mode: SupMode) -> Result<f64> {
    let grid = u.grid();
    if x0 >= grid.num_nodes() || !grid.is_active(x0) {
        return Err(Error::NodeLookup(format!("base node {x0} is not an active node")));
    }
    if !(r >= grid.min_ball_radius() * (1.0 - GEOM_TOL)) {
        return Err(Error::InsufficientResolution(format!(
            "ball radius {r} holds no ring of lattice neighbours (minimum {})",
            grid.min_ball_radius()
        )));
    }
    let c = grid.node(x0);
    let u0 = u.value(x0);
    let reach = r * (1.0 + GEOM_TOL) + GEOM_TOL;
    let mut best: f64 = 0.0;
    for k in grid.active_nodes() {
        let [x, y] = grid.node(k);
        let (dx, dy) = (x - c[0], y - c[1]);
        if dx.hypot(dy) > reach {
            continue;
        }
        let v = u.value(k);
        let e = match mode {
            SupMode::Raw => v.abs(),
            SupMode::Centered => (v - u0).abs(),
            SupMode::LinearCorrected(g) => (v - u0 - g[0] * dx - g[1] * dy).abs(),
        };
        best = best.max(e);
    }
    Ok(best)
}
