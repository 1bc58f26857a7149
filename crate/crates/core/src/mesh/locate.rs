use super::{barycentric, Mesh, Point2, BOUNDARY, LOCATE_TOLERANCE};
use crate::error::{Error, Result};

fn contains(mesh: &Mesh, t: usize, p: Point2) -> bool {
    barycentric(&mesh.triangle_points(t), p)
        .iter()
        .all(|&l| l >= -LOCATE_TOLERANCE)
}

impl Mesh {
    /// Lowest-index triangle whose closed hull contains `p`.
    pub fn locate_point(&self, p: Point2) -> Result<usize> {
        (0..self.n_triangles())
            .find(|&t| contains(self, t, p))
            .ok_or(Error::OutOfDomain { x: p.x, y: p.y })
    }
}

/// Bucket grid over triangle bounding boxes, for repeated point location on
/// one mesh.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in mesh.vertices() {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let (w, h) = ((hi.x - lo.x).max(1e-300), (hi.y - lo.y).max(1e-300));
        let target = (2 * mesh.n_triangles()).max(1) as f64;
        let cell = (w * h / target).sqrt();
        let nx = ((w / cell).ceil() as usize).max(1);
        let ny = ((h / cell).ceil() as usize).max(1);

        let mut loc = PointLocator {
            mesh,
            origin: lo,
            cell,
            nx,
            ny,
            offsets: vec![0; nx * ny + 1],
            items: Vec::new(),
        };
        let ranges: Vec<_> = (0..mesh.n_triangles()).map(|t| loc.cell_range(t)).collect();
        for &(i0, i1, j0, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.offsets[j * nx + i + 1] += 1;
                }
            }
        }
        for c in 0..nx * ny {
            loc.offsets[c + 1] += loc.offsets[c];
        }
        let mut fill = loc.offsets.clone();
        loc.items = vec![0; loc.offsets[nx * ny]];
        for (t, &(i0, i1, j0, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = j * nx + i;
                    loc.items[fill[c]] = t;
                    fill[c] += 1;
                }
            }
        }
        loc
    }

    fn cell_of(&self, p: Point2) -> (usize, usize) {
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        (
            clamp((p.x - self.origin.x) / self.cell, self.nx),
            clamp((p.y - self.origin.y) / self.cell, self.ny),
        )
    }

    fn cell_range(&self, t: usize) -> (usize, usize, usize, usize) {
        let pts = self.mesh.triangle_points(t);
        let slack = 1e-9 * self.cell;
        let lo = Point2::new(
            pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - slack,
            pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - slack,
        );
        let hi = Point2::new(
            pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + slack,
            pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + slack,
        );
        let (i0, j0) = self.cell_of(lo);
        let (i1, j1) = self.cell_of(hi);
        (i0, i1, j0, j1)
    }

    fn bucket(&self, p: Point2) -> &[usize] {
        let (i, j) = self.cell_of(p);
        let c = j * self.nx + i;
        &self.items[self.offsets[c]..self.offsets[c + 1]]
    }

    /// Lowest-index triangle containing `p`, as [`Mesh::locate_point`].
    pub fn locate(&self, p: Point2) -> Result<usize> {
        // buckets are filled in increasing triangle order
        self.bucket(p)
            .iter()
            .copied()
            .find(|&t| contains(self.mesh, t, p))
            .ok_or(Error::OutOfDomain { x: p.x, y: p.y })
    }

    /// Some triangle containing `p`, found by walking from `hint` when
    /// possible.
    pub fn locate_near(&self, p: Point2, hint: usize) -> Result<usize> {
        let mesh = self.mesh;
        if hint < mesh.n_triangles() {
            let mut t = hint;
            for _ in 0..64 {
                let l = barycentric(&mesh.triangle_points(t), p);
                let (k, &lk) = l
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .expect("three coordinates");
                if lk >= -LOCATE_TOLERANCE {
                    return Ok(t);
                }
                let n = mesh.neighbors()[t][k];
                if n == BOUNDARY {
                    break;
                }
                t = n;
            }
        }
        self.locate(p)
    }
}
