use rayon::prelude::*;

use super::TriangleMesh;

pub const DEFAULT_SMOOTH_STEPS: usize = 50;

/// Compressed adjacency: neighbours of `v` are `list[start[v]..start[v + 1]]`,
/// ascending.
struct Adjacency {
    start: Vec<usize>,
    list: Vec<u32>,
}

fn neighbours(mesh: &TriangleMesh) -> Adjacency {
    let edges = mesh.edges();
    let n = mesh.vertices.len();
    let mut start = vec![0usize; n + 1];
    for &(a, b) in &edges {
        start[a as usize + 1] += 1;
        start[b as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    // Fixed neighbour order keeps the floating-point sums reproducible.
    let mut fill = start.clone();
    let mut list = vec![0u32; start[n]];
    for &(a, b) in &edges {
        list[fill[a as usize]] = b;
        fill[a as usize] += 1;
    }
    for &(a, b) in &edges {
        list[fill[b as usize]] = a;
        fill[b as usize] += 1;
    }
    for v in 0..n {
        list[start[v]..start[v + 1]].sort_unstable();
    }
    Adjacency { start, list }
}

fn umbrella(positions: &[[f64; 3]], adj: &Adjacency) -> Vec<[f64; 3]> {
    positions
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let n = &adj.list[adj.start[i]..adj.start[i + 1]];
            if n.is_empty() {
                return p;
            }
            let mut acc = [0.0; 3];
            for &j in n {
                let q = positions[j as usize];
                acc[0] += q[0];
                acc[1] += q[1];
                acc[2] += q[2];
            }
            let k = n.len() as f64;
            [acc[0] / k, acc[1] / k, acc[2] / k]
        })
        .collect()
}

/// One synchronous umbrella iteration: every vertex moves to the mean of its
/// edge neighbours.
pub fn smooth_step(mesh: &TriangleMesh) -> TriangleMesh {
    TriangleMesh {
        vertices: umbrella(&mesh.vertices, &neighbours(mesh)),
        triangles: mesh.triangles.clone(),
    }
}

/// `steps` synchronous uniform-Laplacian iterations at full step.
/// Connectivity is untouched.
pub fn laplacian_smooth(mesh: &TriangleMesh, steps: usize) -> TriangleMesh {
    let nbrs = neighbours(mesh);
    let mut positions = mesh.vertices.clone();
    for _ in 0..steps {
        positions = umbrella(&positions, &nbrs);
    }
    TriangleMesh {
        vertices: positions,
        triangles: mesh.triangles.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::extract_surface;
    use crate::phenotype::VoxelGrid;

    fn cube() -> TriangleMesh {
        let mut g = VoxelGrid::new(3, 3, 3);
        g.set(1, 1, 1, true);
        extract_surface(&g)
    }

    fn centroid(m: &TriangleMesh) -> [f64; 3] {
        let n = m.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &m.vertices {
            for i in 0..3 {
                c[i] += v[i] / n;
            }
        }
        c
    }

    #[test]
    fn zero_steps_is_identity() {
        let m = cube();
        assert_eq!(laplacian_smooth(&m, 0), m);
    }

    #[test]
    fn cube_centroid_is_fixed() {
        let m = cube();
        let c0 = centroid(&m);
        for steps in [1, 5, 50] {
            let c = centroid(&laplacian_smooth(&m, steps));
            for i in 0..3 {
                assert!((c[i] - c0[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stepwise_matches_batched() {
        let m = cube();
        let mut stepped = m.clone();
        for _ in 0..7 {
            stepped = smooth_step(&stepped);
        }
        assert_eq!(stepped, laplacian_smooth(&m, 7));
    }

    #[test]
    fn connectivity_unchanged() {
        let m = cube();
        let s = laplacian_smooth(&m, 50);
        assert_eq!(s.triangles, m.triangles);
        assert_eq!(s.vertices.len(), m.vertices.len());
        assert_eq!(s.euler_characteristic(), m.euler_characteristic());
    }
}
