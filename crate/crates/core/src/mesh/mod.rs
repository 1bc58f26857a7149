//! Conforming triangular meshes.
//!
//! Triangles are stored counterclockwise. Local edge `k` of a triangle is the
//! edge opposite its local vertex `k`, running from vertex `k + 1` to vertex
//! `k + 2` (indices mod 3); `neighbors()[t][k]` is the triangle across that
//! edge or [`BOUNDARY`].

mod io;
mod locate;
mod patch;
mod refine;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use crate::error::{Error, Result};

pub use io::{fmt_real, LineReader, MESH_HEADER};
pub use locate::PointLocator;
pub use patch::{build_virtual_patch, NodeOrigin, PatchNode, VirtualPatch};
pub use refine::{refine, refine_twice, RefinementMap};

/// Marker for "no triangle" in neighbor tables.
pub const BOUNDARY: usize = usize::MAX;

/// Barycentric slack used when deciding point containment.
pub const LOCATE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub(crate) fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub(crate) fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

/// Twice the signed area of the triangle `(a, b, c)`.
pub(crate) fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Barycentric coordinates of `p` with respect to `tri`.
pub(crate) fn barycentric(tri: &[Point2; 3], p: Point2) -> [f64; 3] {
    let det = orient(tri[0], tri[1], tri[2]);
    let l1 = orient(tri[0], p, tri[2]) / det;
    let l2 = orient(tri[0], tri[1], p) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// The four built-in computational domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DomainId {
    /// (0,1)², `n` cells per side.
    UnitSquare,
    /// (0,2π)², `n` cells per side.
    Square0To2Pi,
    /// (0,2)² ∖ [1,2]×[0,1], `n` cells per unit length.
    LShape,
    /// (-1/2,1/2)², `n` cells per side; the origin is a vertex when `n` is even.
    CenteredSquare,
}

impl DomainId {
    pub const ALL: [DomainId; 4] = [
        DomainId::UnitSquare,
        DomainId::Square0To2Pi,
        DomainId::LShape,
        DomainId::CenteredSquare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DomainId::UnitSquare => "unit_square",
            DomainId::Square0To2Pi => "square_0_2pi",
            DomainId::LShape => "lshape",
            DomainId::CenteredSquare => "centered_square",
        }
    }

    pub fn area(self) -> f64 {
        match self {
            DomainId::UnitSquare | DomainId::CenteredSquare => 1.0,
            DomainId::Square0To2Pi => 4.0 * std::f64::consts::PI * std::f64::consts::PI,
            DomainId::LShape => 3.0,
        }
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DomainId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DomainId::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDomain(s.to_string()))
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    refinement_edge: Vec<u8>,
    generation: Vec<u32>,
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Boundary vertices are those on an
    /// edge with a single adjacent triangle; refinement edges default to the
    /// longest edge of each triangle.
    pub fn from_triangles(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let refinement_edge = triangles
            .iter()
            .map(|t| longest_edge(&[vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .collect();
        let generation = vec![0; triangles.len()];
        Self::assemble(vertices, triangles, None, refinement_edge, generation)
    }

    pub(crate) fn assemble(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary_vertex: Option<Vec<bool>>,
        refinement_edge: Vec<u8>,
        generation: Vec<u32>,
    ) -> Result<Mesh> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            if orient(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t} is not counterclockwise"
                )));
            }
        }
        let neighbors = build_neighbors(&triangles)?;
        let boundary_vertex = boundary_vertex.unwrap_or_else(|| {
            let mut flags = vec![false; vertices.len()];
            for (tri, nb) in triangles.iter().zip(&neighbors) {
                for k in 0..3 {
                    if nb[k] == BOUNDARY {
                        flags[tri[(k + 1) % 3]] = true;
                        flags[tri[(k + 2) % 3]] = true;
                    }
                }
            }
            flags
        });
        Ok(Mesh {
            vertices,
            triangles,
            neighbors,
            boundary_vertex,
            refinement_edge,
            generation,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self) -> &[[usize; 3]] {
        &self.neighbors
    }

    pub fn boundary_vertex(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn refinement_edge(&self) -> &[u8] {
        &self.refinement_edge
    }

    pub fn generation(&self) -> &[u32] {
        &self.generation
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|b| !**b).count()
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * orient(a, b, c)
    }

    /// Longest edge length of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        a.dist(b).max(b.dist(c)).max(c.dist(a))
    }

    /// Endpoints of local edge `k` of triangle `t`, in counterclockwise order.
    pub fn edge_vertices(&self, t: usize, k: usize) -> (usize, usize) {
        let tri = self.triangles[t];
        (tri[(k + 1) % 3], tri[(k + 2) % 3])
    }

    /// Triangles sharing a full edge with `element`, in local edge order.
    pub fn facewise_neighbors(&self, element: usize) -> Vec<usize> {
        self.neighbors[element]
            .iter()
            .copied()
            .filter(|&n| n != BOUNDARY)
            .collect()
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let p = self.triangle_points(t);
                (0..3)
                    .map(|k| {
                        let u = p[(k + 1) % 3].sub(p[k]);
                        let v = p[(k + 2) % 3].sub(p[k]);
                        u.cross(v).atan2(u.x * v.x + u.y * v.y)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Full consistency check: orientation, conformity and neighbor symmetry.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Internal(msg));
        for t in 0..self.n_triangles() {
            if self.area(t) <= 0.0 {
                return fail(format!("triangle {t} has nonpositive area"));
            }
            for k in 0..3 {
                let n = self.neighbors[t][k];
                let (a, b) = self.edge_vertices(t, k);
                if n == BOUNDARY {
                    if !(self.boundary_vertex[a] && self.boundary_vertex[b]) {
                        return fail(format!("boundary edge of {t} has interior endpoint"));
                    }
                    continue;
                }
                let Some(j) = (0..3).find(|&j| self.neighbors[n][j] == t) else {
                    return fail(format!("neighbor table not symmetric between {t} and {n}"));
                };
                if self.edge_vertices(n, j) != (b, a) {
                    return fail(format!("edge shared by {t} and {n} is inconsistent"));
                }
            }
        }
        // A second pass through the edge map catches edges used more than twice.
        build_neighbors(&self.triangles).map(|_| ())
    }

    /// Hash of the full mesh state, for change detection in tests.
    pub fn content_hash(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for p in &self.vertices {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
        self.triangles.hash(&mut h);
        self.neighbors.hash(&mut h);
        self.boundary_vertex.hash(&mut h);
        self.refinement_edge.hash(&mut h);
        self.generation.hash(&mut h);
        h.finish()
    }
}

/// Local index of the vertex opposite the longest edge (lowest index on ties).
pub(crate) fn longest_edge(p: &[Point2; 3]) -> u8 {
    let mut best = 0;
    let mut best_len = -1.0;
    for k in 0..3 {
        let d = p[(k + 1) % 3].sub(p[(k + 2) % 3]);
        let len = d.x * d.x + d.y * d.y;
        if len > best_len {
            best = k;
            best_len = len;
        }
    }
    best as u8
}

fn build_neighbors(triangles: &[[usize; 3]]) -> Result<Vec<[usize; 3]>> {
    let mut neighbors = vec![[BOUNDARY; 3]; triangles.len()];
    let mut open: HashMap<(usize, usize), (usize, usize)> =
        HashMap::with_capacity(triangles.len() * 2);
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            // the neighbor traverses the same edge in the opposite direction
            if let Some((s, j)) = open.remove(&(b, a)) {
                neighbors[t][k] = s;
                neighbors[s][j] = t;
            } else if open.insert((a, b), (t, k)).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) appears twice with the same orientation"
                )));
            }
        }
    }
    for &(a, b) in open.keys() {
        if open.contains_key(&(b, a)) {
            return Err(Error::InvalidArgument(format!(
                "edge ({a}, {b}) is shared by more than two triangles"
            )));
        }
    }
    Ok(neighbors)
}

/// Coarse uniform mesh of `domain`: each square cell is split along its
/// lower-left to upper-right diagonal.
pub fn generate_initial(domain: DomainId, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("cell count must be positive".into()));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    match domain {
        DomainId::UnitSquare => structured((0.0, 1.0), (0.0, 1.0), n, n, |_, _| true),
        DomainId::Square0To2Pi => structured((0.0, two_pi), (0.0, two_pi), n, n, |_, _| true),
        DomainId::CenteredSquare => structured((-0.5, 0.5), (-0.5, 0.5), n, n, |_, _| true),
        DomainId::LShape => structured((0.0, 2.0), (0.0, 2.0), 2 * n, 2 * n, |i, j| {
            !(i >= n && j < n)
        }),
    }
}

fn structured(
    xr: (f64, f64),
    yr: (f64, f64),
    nx: usize,
    ny: usize,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<Mesh> {
    let coord = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * (i as f64 / n as f64);
    let mut used = vec![false; (nx + 1) * (ny + 1)];
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            if keep(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    used[grid(i + di, j + dj)] = true;
                }
            }
        }
    }
    let mut index = vec![usize::MAX; used.len()];
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if used[grid(i, j)] {
                index[grid(i, j)] = vertices.len();
                vertices.push(Point2::new(
                    coord(xr.0, xr.1, i, nx),
                    coord(yr.0, yr.1, j, ny),
                ));
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let v00 = index[grid(i, j)];
            let v10 = index[grid(i + 1, j)];
            let v01 = index[grid(i, j + 1)];
            let v11 = index[grid(i + 1, j + 1)];
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_triangles(vertices, triangles)
}
