//! Newest-vertex bisection with conformity closure.
//!
//! Every triangle carries a refinement edge. Refinement works on edges: the
//! requested edges are marked, then the closure marks the refinement edge of
//! every triangle that has some marked edge, until stable. Each triangle is
//! then split by bisecting its refinement edge and, recursively, the marked
//! edges of its children. A child's refinement edge is the edge opposite the
//! new midpoint, so all new vertices are midpoints of edges of the input mesh.

use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};

/// Parent/child relations produced by one refinement pass.
#[derive(Clone, Debug)]
pub struct RefinementMap {
    /// Vertex count of the coarse mesh; coarse vertices keep their indices.
    pub coarse_vertices: usize,
    /// For each new vertex `coarse_vertices + i`, the endpoints of the coarse
    /// edge it bisects.
    pub new_vertex_parents: Vec<(usize, usize)>,
    /// For each coarse triangle, the fine triangles covering it.
    pub children: Vec<Vec<usize>>,
    /// For each fine triangle, its coarse parent.
    pub parent: Vec<usize>,
}

impl RefinementMap {
    pub fn fine_vertices(&self) -> usize {
        self.coarse_vertices + self.new_vertex_parents.len()
    }
}

/// Bisects every marked triangle once (plus whatever the closure forces).
pub fn refine(mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, RefinementMap)> {
    check_marked(mesh, marked)?;
    let edges = EdgeTable::new(mesh);
    let mut seed = vec![false; edges.len()];
    for &t in marked {
        seed[edges.of_triangle[t][mesh.refinement_edge[t] as usize]] = true;
    }
    bisect(mesh, &edges, seed)
}

/// Bisects every marked triangle twice: the triangle and both of its children.
/// Equivalently, all three edges of a marked triangle are bisected.
pub fn refine_twice(mesh: &Mesh, marked: &[usize]) -> Result<(Mesh, RefinementMap)> {
    check_marked(mesh, marked)?;
    let edges = EdgeTable::new(mesh);
    let mut seed = vec![false; edges.len()];
    for &t in marked {
        for e in edges.of_triangle[t] {
            seed[e] = true;
        }
    }
    bisect(mesh, &edges, seed)
}

fn check_marked(mesh: &Mesh, marked: &[usize]) -> Result<()> {
    if marked.is_empty() {
        return Err(Error::InvalidArgument("no triangles marked for refinement".into()));
    }
    if let Some(&t) = marked.iter().find(|&&t| t >= mesh.n_triangles()) {
        return Err(Error::InvalidArgument(format!("marked triangle {t} does not exist")));
    }
    Ok(())
}

struct EdgeTable {
    /// Global edge id of local edge k of each triangle.
    of_triangle: Vec<[usize; 3]>,
    /// Up to two triangles per edge.
    triangles: Vec<[usize; 2]>,
    /// Endpoints (as seen from the first triangle).
    endpoints: Vec<(usize, usize)>,
}

impl EdgeTable {
    fn new(mesh: &Mesh) -> Self {
        let nt = mesh.n_triangles();
        let mut of_triangle = vec![[usize::MAX; 3]; nt];
        let mut triangles = Vec::with_capacity(nt * 3 / 2 + 2);
        let mut endpoints = Vec::with_capacity(nt * 3 / 2 + 2);
        for t in 0..nt {
            for k in 0..3 {
                if of_triangle[t][k] != usize::MAX {
                    continue;
                }
                let id = triangles.len();
                of_triangle[t][k] = id;
                let n = mesh.neighbors[t][k];
                if n != super::BOUNDARY {
                    let j = (0..3)
                        .find(|&j| mesh.neighbors[n][j] == t)
                        .expect("symmetric neighbor table");
                    of_triangle[n][j] = id;
                }
                triangles.push([t, n]);
                endpoints.push(mesh.edge_vertices(t, k));
            }
        }
        EdgeTable {
            of_triangle,
            triangles,
            endpoints,
        }
    }

    fn len(&self) -> usize {
        self.triangles.len()
    }
}

fn bisect(mesh: &Mesh, edges: &EdgeTable, mut marked: Vec<bool>) -> Result<(Mesh, RefinementMap)> {
    // closure
    let mut queue: Vec<usize> = (0..edges.len()).filter(|&e| marked[e]).collect();
    while let Some(e) = queue.pop() {
        for &t in &edges.triangles[e] {
            if t == super::BOUNDARY {
                continue;
            }
            let r = edges.of_triangle[t][mesh.refinement_edge[t] as usize];
            if !marked[r] {
                marked[r] = true;
                queue.push(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary_vertex.clone();
    let mut new_vertex_parents = Vec::new();
    for e in 0..edges.len() {
        if marked[e] {
            let (a, b) = edges.endpoints[e];
            vertices.push(mesh.vertices[a].midpoint(mesh.vertices[b]));
            boundary.push(edges.triangles[e][1] == super::BOUNDARY);
            new_vertex_parents.push((a, b));
        }
    }
    let mut mid_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(new_vertex_parents.len());
    for (i, &(a, b)) in new_vertex_parents.iter().enumerate() {
        let v = mesh.n_vertices() + i;
        mid_of.insert((a, b), v);
        mid_of.insert((b, a), v);
    }

    let mut triangles = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut refinement_edge = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut generation = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut children = Vec::with_capacity(mesh.n_triangles());
    let mut parent = Vec::with_capacity(mesh.n_triangles() * 2);
    let mut stack = Vec::new();
    for t in 0..mesh.n_triangles() {
        let mut kids = Vec::new();
        stack.push((mesh.triangles[t], mesh.refinement_edge[t] as usize, mesh.generation[t]));
        while let Some((tri, r, g)) = stack.pop() {
            let (a, b, c) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
            match mid_of.get(&(b, c)) {
                Some(&m) => {
                    // second child first so that children come out in CCW order
                    stack.push(([m, c, a], 0, g + 1));
                    stack.push(([m, a, b], 0, g + 1));
                }
                None => {
                    kids.push(triangles.len());
                    parent.push(t);
                    triangles.push(tri);
                    refinement_edge.push(r as u8);
                    generation.push(g);
                }
            }
        }
        children.push(kids);
    }
    let fine = Mesh::assemble(vertices, triangles, Some(boundary), refinement_edge, generation)?;
    let map = RefinementMap {
        coarse_vertices: mesh.n_vertices(),
        new_vertex_parents,
        children,
        parent,
    };
    Ok((fine, map))
}

/// True if every vertex of `child` lies in the closed triangle `parent`.
#[cfg(test)]
pub(crate) fn contained_in(child: &[super::Point2; 3], parent: &[super::Point2; 3], tol: f64) -> bool {
    child
        .iter()
        .all(|&p| super::barycentric(parent, p).iter().all(|&l| l >= -tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_initial, DomainId, Point2};

    fn check_nested(coarse: &Mesh, fine: &Mesh, map: &RefinementMap) {
        for (f, &p) in map.parent.iter().enumerate() {
            assert!(contained_in(&fine.triangle_points(f), &coarse.triangle_points(p), 1e-12));
        }
        for (t, kids) in map.children.iter().enumerate() {
            let area: f64 = kids.iter().map(|&k| fine.area(k)).sum();
            assert!((area - coarse.area(t)).abs() <= 1e-14 * coarse.area(t).max(1.0));
        }
        for (i, &(a, b)) in map.new_vertex_parents.iter().enumerate() {
            let v = fine.vertices()[map.coarse_vertices + i];
            assert_eq!(v, coarse.vertices()[a].midpoint(coarse.vertices()[b]));
        }
    }

    #[test]
    fn bisect_both_triangles_of_square() {
        let m = generate_initial(DomainId::UnitSquare, 1).unwrap();
        let (f, map) = refine(&m, &[0, 1]).unwrap();
        assert_eq!((f.n_triangles(), f.n_vertices()), (4, 5));
        assert_eq!(f.vertices()[4], Point2::new(0.5, 0.5));
        assert!(!f.boundary_vertex()[4]);
        f.check_invariants().unwrap();
        check_nested(&m, &f, &map);
    }

    #[test]
    fn closure_bisects_the_neighbour() {
        let m = generate_initial(DomainId::UnitSquare, 1).unwrap();
        let (one, _) = refine(&m, &[0]).unwrap();
        let (both, _) = refine(&m, &[0, 1]).unwrap();
        assert_eq!(one.content_hash(), both.content_hash());
    }

    #[test]
    fn refine_all_of_2x2() {
        let m = generate_initial(DomainId::UnitSquare, 2).unwrap();
        let all: Vec<usize> = (0..8).collect();
        let (f, map) = refine(&m, &all).unwrap();
        assert!(f.n_triangles() >= 16);
        f.check_invariants().unwrap();
        check_nested(&m, &f, &map);
    }

    #[test]
    fn twice_gives_four_children() {
        let m = generate_initial(DomainId::UnitSquare, 1).unwrap();
        let (f, map) = refine_twice(&m, &[0]).unwrap();
        assert_eq!(map.children[0].len(), 4);
        // diagonal midpoint forces one bisection of the neighbour
        assert_eq!(map.children[1].len(), 2);
        assert_eq!(f.n_triangles(), 6);
        f.check_invariants().unwrap();
        check_nested(&m, &f, &map);
    }

    #[test]
    fn boundary_midpoints_are_flagged() {
        let m = generate_initial(DomainId::LShape, 1).unwrap();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        let (f, _) = refine_twice(&m, &all).unwrap();
        f.check_invariants().unwrap();
        for (v, p) in f.vertices().iter().enumerate() {
            let on_gamma = p.x == 0.0
                || p.y == 0.0
                || p.x == 2.0
                || p.y == 2.0
                || (p.x == 1.0 && p.y <= 1.0)
                || (p.y == 1.0 && p.x >= 1.0);
            assert_eq!(f.boundary_vertex()[v], on_gamma, "vertex {v} at {p:?}");
        }
    }

    #[test]
    fn rejects_bad_marks() {
        let m = generate_initial(DomainId::UnitSquare, 1).unwrap();
        assert!(refine(&m, &[]).is_err());
        assert!(refine(&m, &[7]).is_err());
    }

    #[test]
    fn shape_regularity_under_local_refinement() {
        let mut m = generate_initial(DomainId::LShape, 2).unwrap();
        let alpha0 = m.min_angle();
        for _ in 0..10 {
            // refine towards the re-entrant corner
            let marked: Vec<usize> = (0..m.n_triangles())
                .filter(|&t| m.triangle_points(t).iter().any(|p| p.dist(Point2::new(1.0, 1.0)) < 1e-9))
                .collect();
            let (f, map) = refine_twice(&m, &marked).unwrap();
            f.check_invariants().unwrap();
            check_nested(&m, &f, &map);
            m = f;
        }
        assert!(m.min_angle() >= 0.4 * alpha0);
    }
}
