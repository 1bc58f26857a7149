//! Virtual red-green patches around an element.
//!
//! The element is split into four similar triangles through its edge
//! midpoints; each facewise neighbour is split in two by joining the shared
//! edge's midpoint to the neighbour's opposite vertex. Nothing is written back
//! to the mesh.

use std::collections::HashMap;

use super::{Mesh, Point2, BOUNDARY};

/// A vertex of the patch triangulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatchNode {
    /// A vertex of the global mesh.
    Vertex(usize),
    /// Midpoint of local edge `k` of the patch element.
    Midpoint(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrigin {
    EdgeMidpoint,
    Other,
}

#[derive(Clone, Debug)]
pub struct VirtualPatch {
    pub parent_element: usize,
    /// Small triangles, counterclockwise.
    pub elements: Vec<[PatchNode; 3]>,
    /// Patch nodes carrying a basis function, i.e. not on the patch boundary
    /// (which includes every node on the domain boundary).
    pub interior_nodes: Vec<PatchNode>,
    pub node_origin: Vec<NodeOrigin>,
    /// Global mesh triangle containing each small triangle.
    pub host: Vec<usize>,
    corners: [Point2; 3],
}

impl VirtualPatch {
    pub fn node_point(&self, mesh: &Mesh, node: PatchNode) -> Point2 {
        match node {
            PatchNode::Vertex(v) => mesh.vertices()[v],
            PatchNode::Midpoint(k) => self.corners[(k + 1) % 3].midpoint(self.corners[(k + 2) % 3]),
        }
    }

    pub fn element_points(&self, mesh: &Mesh, i: usize) -> [Point2; 3] {
        self.elements[i].map(|n| self.node_point(mesh, n))
    }

    pub fn interior_points(&self, mesh: &Mesh) -> Vec<Point2> {
        self.interior_nodes.iter().map(|&n| self.node_point(mesh, n)).collect()
    }
}

pub fn build_virtual_patch(mesh: &Mesh, element: usize) -> VirtualPatch {
    use PatchNode::{Midpoint as M, Vertex as V};

    let [a, b, c] = mesh.triangles()[element];
    let mut elements = vec![
        [V(a), M(2), M(1)],
        [M(2), V(b), M(0)],
        [M(1), M(0), V(c)],
        [M(0), M(1), M(2)],
    ];
    let mut host = vec![element; 4];
    for k in 0..3 {
        let n = mesh.neighbors()[element][k];
        if n == BOUNDARY {
            continue;
        }
        let (p, q) = mesh.edge_vertices(element, k);
        let o = *mesh.triangles()[n]
            .iter()
            .find(|&&v| v != p && v != q)
            .expect("neighbour has a vertex off the shared edge");
        // the neighbour runs q -> p counterclockwise
        elements.push([V(o), V(q), M(k)]);
        elements.push([V(o), M(k), V(p)]);
        host.extend([n, n]);
    }

    // nodes touching an edge used once lie on the patch boundary
    let mut edge_use: HashMap<(PatchNode, PatchNode), u8> = HashMap::new();
    for tri in &elements {
        for k in 0..3 {
            let (u, v) = (tri[k], tri[(k + 1) % 3]);
            let key = if (v, u) < (u, v) { (v, u) } else { (u, v) };
            *edge_use.entry(key).or_default() += 1;
        }
    }
    let mut on_boundary: HashMap<PatchNode, bool> = HashMap::new();
    for ((u, v), count) in edge_use {
        for node in [u, v] {
            *on_boundary.entry(node).or_default() |= count == 1;
        }
    }
    let is_interior = |node: PatchNode| {
        !on_boundary[&node]
            && match node {
                PatchNode::Vertex(v) => !mesh.boundary_vertex()[v],
                PatchNode::Midpoint(_) => true,
            }
    };

    let mut interior_nodes = Vec::new();
    let mut node_origin = Vec::new();
    for k in 0..3 {
        if is_interior(M(k)) {
            interior_nodes.push(M(k));
            node_origin.push(NodeOrigin::EdgeMidpoint);
        }
    }
    let mut others: Vec<usize> = elements
        .iter()
        .flatten()
        .filter_map(|&n| match n {
            PatchNode::Vertex(v) if is_interior(n) => Some(v),
            _ => None,
        })
        .collect();
    others.sort_unstable();
    others.dedup();
    for v in others {
        interior_nodes.push(V(v));
        node_origin.push(NodeOrigin::Other);
    }

    VirtualPatch {
        parent_element: element,
        elements,
        interior_nodes,
        node_origin,
        host,
        corners: mesh.triangle_points(element),
    }
}
