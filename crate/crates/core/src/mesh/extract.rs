use super::TriangleMesh;
use crate::phenotype::{VoxelGrid, VOXEL_MM};

/// One exposed voxel face: lattice corners counter-clockwise from outside.
struct Face {
    corners: [[i64; 3]; 4],
    cell: [i64; 3],
    /// The empty cell (or out-of-grid position) the face looks into.
    outside: [i64; 3],
}

fn exposed_faces(grid: &VoxelGrid) -> Vec<Face> {
    let [nx, ny, nz] = grid.dims();
    let mut faces = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !grid.get(x, y, z) {
                    continue;
                }
                let cell = [x as i64, y as i64, z as i64];
                for axis in 0..3 {
                    for positive in [false, true] {
                        let mut n = cell;
                        n[axis] += if positive { 1 } else { -1 };
                        if grid.get_signed(n[0], n[1], n[2]) {
                            continue;
                        }
                        faces.push(face(cell, n, axis, positive));
                    }
                }
            }
        }
    }
    faces
}

fn face(cell: [i64; 3], outside: [i64; 3], axis: usize, positive: bool) -> Face {
    let u = (axis + 1) % 3;
    let v = (axis + 2) % 3;
    let mut base = cell;
    if positive {
        base[axis] += 1;
    }
    // e_u × e_v = e_axis, so (0,0),(1,0),(1,1),(0,1) faces +axis.
    let offsets: [(i64, i64); 4] = if positive {
        [(0, 0), (1, 0), (1, 1), (0, 1)]
    } else {
        [(0, 0), (0, 1), (1, 1), (1, 0)]
    };
    let corners = offsets.map(|(du, dv)| {
        let mut p = base;
        p[u] += du;
        p[v] += dv;
        p
    });
    Face {
        corners,
        cell,
        outside,
    }
}

fn key(p: [i64; 3]) -> u64 {
    // Lattice coordinates are bounded by the grid, far below 2^21.
    ((p[0] as u64) << 42) | ((p[1] as u64) << 21) | (p[2] as u64)
}

struct DisjointSet(Vec<u32>);

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self((0..n as u32).collect())
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.0[i as usize] != i {
            let up = self.0[self.0[i as usize] as usize];
            self.0[i as usize] = up;
            i = up;
        }
        i
    }

    fn union(&mut self, a: u32, b: u32) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a as usize] = b;
        }
    }
}

/// A face's use of a lattice edge: corner indices at the lower and higher
/// endpoint key.
#[derive(Clone, Copy)]
struct EdgeUse {
    face: u32,
    lo: u8,
    hi: u8,
}

impl EdgeUse {
    fn lo_id(&self) -> u32 {
        self.face * 4 + u32::from(self.lo)
    }

    fn hi_id(&self) -> u32 {
        self.face * 4 + u32::from(self.hi)
    }
}

/// Lattice edges shared by four faces: two solid cells touching diagonally.
struct Pinch {
    uses: [EdgeUse; 4],
    /// Glue faces that look into the same empty cell instead of faces of the
    /// same solid cell.
    by_empty: bool,
}

fn glue_pairs(pinch: &Pinch, faces: &[Face]) -> [(EdgeUse, EdgeUse); 2] {
    let same = |a: &EdgeUse, b: &EdgeUse| {
        let (fa, fb) = (&faces[a.face as usize], &faces[b.face as usize]);
        if pinch.by_empty {
            fa.outside == fb.outside
        } else {
            fa.cell == fb.cell
        }
    };
    let u = &pinch.uses;
    let partner = (1..4)
        .find(|&j| same(&u[0], &u[j]))
        .expect("pinch faces pair up");
    let rest: Vec<usize> = (1..4).filter(|&j| j != partner).collect();
    [(u[0], u[partner]), (u[rest[0]], u[rest[1]])]
}

fn glue(sets: &mut DisjointSet, a: EdgeUse, b: EdgeUse) {
    sets.union(a.lo_id(), b.lo_id());
    sets.union(a.hi_id(), b.hi_id());
}

/// Builds a closed, outward-oriented surface of every solid voxel face that
/// is not shared with another solid voxel.
///
/// Vertices are shared only between faces of the same surface sheet around
/// a lattice point. Faces meeting at an ordinary lattice edge are glued
/// there. At a diagonal pinch (exactly two solid cells, opposite each other)
/// faces of the same solid cell are glued, so shells touching only at an
/// edge or corner stay apart. When the two cells are also joined around
/// both ends of the pinch, that choice would put four faces on one vertex
/// pair; those edges glue faces that bound the same empty cell instead.
pub fn extract_surface(grid: &VoxelGrid) -> TriangleMesh {
    let faces = exposed_faces(grid);
    if faces.is_empty() {
        return TriangleMesh::default();
    }

    let mut uses: Vec<(u64, u64, EdgeUse)> = Vec::with_capacity(faces.len() * 4);
    for (f, face) in faces.iter().enumerate() {
        for k in 0..4 {
            let k1 = (k + 1) % 4;
            let (a, b) = (key(face.corners[k]), key(face.corners[k1]));
            let (lo, hi, lo_k, hi_k) = if a < b { (a, b, k, k1) } else { (b, a, k1, k) };
            uses.push((
                lo,
                hi,
                EdgeUse {
                    face: f as u32,
                    lo: lo_k as u8,
                    hi: hi_k as u8,
                },
            ));
        }
    }
    uses.sort_unstable_by_key(|u| (u.0, u.1, u.2.face));

    let mut plain: Vec<(EdgeUse, EdgeUse)> = Vec::with_capacity(uses.len() / 2);
    let mut pinches: Vec<Pinch> = Vec::new();
    for group in uses.chunk_by(|a, b| (a.0, a.1) == (b.0, b.1)) {
        match group {
            [a, b] => plain.push((a.2, b.2)),
            [a, b, c, d] => pinches.push(Pinch {
                uses: [a.2, b.2, c.2, d.2],
                by_empty: false,
            }),
            other => unreachable!("lattice edge with {} faces", other.len()),
        }
    }

    let mut sets;
    loop {
        sets = DisjointSet::new(faces.len() * 4);
        for &(a, b) in &plain {
            glue(&mut sets, a, b);
        }
        for pinch in &pinches {
            for (a, b) in glue_pairs(pinch, &faces) {
                glue(&mut sets, a, b);
            }
        }
        let mut changed = false;
        for pinch in pinches.iter_mut().filter(|p| !p.by_empty) {
            let [(a, _), (b, _)] = glue_pairs(pinch, &faces);
            if sets.find(a.lo_id()) == sets.find(b.lo_id())
                && sets.find(a.hi_id()) == sets.find(b.hi_id())
            {
                pinch.by_empty = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertex_of_root = vec![u32::MAX; faces.len() * 4];
    let mut vertices = Vec::new();
    let mut corner_vertex = vec![0u32; faces.len() * 4];
    for (f, face) in faces.iter().enumerate() {
        for k in 0..4 {
            let id = (f * 4 + k) as u32;
            let root = sets.find(id) as usize;
            if vertex_of_root[root] == u32::MAX {
                let p = face.corners[k];
                vertices.push([
                    p[0] as f64 * VOXEL_MM,
                    p[1] as f64 * VOXEL_MM,
                    p[2] as f64 * VOXEL_MM,
                ]);
                vertex_of_root[root] = (vertices.len() - 1) as u32;
            }
            corner_vertex[id as usize] = vertex_of_root[root];
        }
    }

    let mut triangles = Vec::with_capacity(faces.len() * 2);
    for c in corner_vertex.chunks_exact(4) {
        triangles.push([c[0], c[1], c[2]]);
        triangles.push([c[0], c[2], c[3]]);
    }
    TriangleMesh {
        vertices,
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: f64 = VOXEL_MM * VOXEL_MM * VOXEL_MM;

    fn grid_with(cells: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::new(4, 4, 4);
        for c in cells {
            g.set(c[0], c[1], c[2], true);
        }
        g
    }

    /// Independent oracle: count solid-empty neighbour pairs.
    fn exposed_face_count(g: &VoxelGrid) -> usize {
        let [nx, ny, nz] = g.dims();
        let mut n = 0;
        for z in 0..nz as i64 {
            for y in 0..ny as i64 {
                for x in 0..nx as i64 {
                    if !g.get_signed(x, y, z) {
                        continue;
                    }
                    for d in [
                        [1, 0, 0],
                        [-1, 0, 0],
                        [0, 1, 0],
                        [0, -1, 0],
                        [0, 0, 1],
                        [0, 0, -1],
                    ] {
                        if !g.get_signed(x + d[0], y + d[1], z + d[2]) {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn empty_grid_gives_empty_mesh() {
        let m = extract_surface(&VoxelGrid::new(3, 3, 3));
        assert!(m.is_empty());
        assert!(m.vertices.is_empty());
    }

    #[test]
    fn single_voxel_is_a_cube() {
        let m = extract_surface(&grid_with(&[[1, 1, 1]]));
        assert_eq!(m.triangles.len(), 12);
        assert_eq!(m.vertices.len(), 8);
        assert!((m.volume() - CUBE).abs() < 1e-18);
        assert!(m.is_closed_and_oriented());
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn voxel_at_grid_corner() {
        let m = extract_surface(&grid_with(&[[0, 0, 0]]));
        assert_eq!(m.triangles.len(), 12);
        assert!((m.volume() - CUBE).abs() < 1e-18);
    }

    #[test]
    fn face_adjacent_pair() {
        let g = grid_with(&[[1, 1, 1], [2, 1, 1]]);
        assert_eq!(exposed_face_count(&g), 10);
        let m = extract_surface(&g);
        assert_eq!(m.triangles.len(), 20);
        assert_eq!(m.vertices.len(), 12);
        assert!((m.volume() - 2.0 * CUBE).abs() < 1e-17);
        assert!(m.is_closed_and_oriented());
    }

    #[test]
    fn edge_contact_keeps_shells_apart() {
        let g = grid_with(&[[1, 1, 1], [2, 2, 1]]);
        let m = extract_surface(&g);
        assert_eq!(m.triangles.len(), 24);
        assert_eq!(m.vertices.len(), 16);
        assert_eq!(m.shell_count(), 2);
        assert!(m.is_closed_and_oriented());
        assert_eq!(m.euler_characteristic(), 4);
    }

    #[test]
    fn corner_contact_keeps_shells_apart() {
        let m = extract_surface(&grid_with(&[[1, 1, 1], [2, 2, 2]]));
        assert_eq!(m.vertices.len(), 16);
        assert!(m.is_closed_and_oriented());
    }

    #[test]
    fn pinched_edge_inside_one_component() {
        // A U-shaped component whose two arms also touch diagonally.
        let g = grid_with(&[[1, 1, 1], [2, 2, 1], [1, 1, 0], [2, 1, 0], [2, 2, 0]]);
        let m = extract_surface(&g);
        assert_eq!(m.triangles.len(), 2 * exposed_face_count(&g));
        assert!(m.is_closed_and_oriented());
        assert!((m.volume() - 5.0 * CUBE).abs() < 1e-16);
    }

    #[test]
    fn pinch_joined_at_both_ends() {
        let g = grid_with(&[
            [1, 1, 1],
            [2, 2, 1],
            [1, 1, 0],
            [2, 1, 0],
            [2, 2, 0],
            [1, 1, 2],
            [2, 1, 2],
            [2, 2, 2],
        ]);
        let m = extract_surface(&g);
        assert_eq!(m.triangles.len(), 2 * exposed_face_count(&g));
        assert!(m.is_closed_and_oriented());
        assert_eq!(m.shell_count(), 1);
        assert!((m.volume() - 8.0 * CUBE).abs() < 1e-15);
    }

    #[test]
    fn hollow_box_has_two_surfaces() {
        let mut g = VoxelGrid::new(3, 3, 3);
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    g.set(x, y, z, (x, y, z) != (1, 1, 1));
                }
            }
        }
        let m = extract_surface(&g);
        assert_eq!(m.shell_count(), 2);
        assert!((m.volume() - 26.0 * CUBE).abs() < 1e-15);
        assert_eq!(m.euler_characteristic(), 4);
    }
}
