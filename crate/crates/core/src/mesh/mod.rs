//! Voxel surface extraction, umbrella smoothing and binary STL.

mod extract;
mod smooth;
mod stl;

use std::collections::HashSet;

use thiserror::Error;

pub use extract::extract_surface;
pub use smooth::{laplacian_smooth, smooth_step, DEFAULT_SMOOTH_STEPS};
pub use stl::{read_stl, write_stl, StlFile, StlTriangle, STL_HEADER_LEN};

use crate::genome::Genome;
use crate::phenotype::rasterize;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has {0} triangles, more than binary STL can count")]
    TooManyTriangles(usize),
    #[error("STL data truncated: {0}")]
    Truncated(String),
}

/// Indexed triangle surface, coordinates in millimetres.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[u32; 3]>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Axis-aligned bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }
}

/// Post-smoothing feature report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureReport {
    pub min_edge_mm: f64,
    pub min_triangle_area_mm2: f64,
    /// Triangles with area below 1e-12 mm².
    pub degenerate_triangles: usize,
    pub shells: usize,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, t: &[u32; 3]) -> [[f64; 3]; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    /// Enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dot(a, cross(b, c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn triangle_area(&self, t: &[u32; 3]) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        let first = *self.vertices.first()?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for v in &self.vertices {
            for i in 0..3 {
                bb.min[i] = bb.min[i].min(v[i]);
                bb.max[i] = bb.max[i].max(v[i]);
            }
        }
        Some(bb)
    }

    fn directed_edges(&self) -> Vec<(u32, u32)> {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .collect()
    }

    /// Undirected edges, each once, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut packed: Vec<u64> = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (u64::from(a.min(b)) << 32) | u64::from(a.max(b)))
            .collect();
        packed.sort_unstable();
        packed.dedup();
        packed
            .into_iter()
            .map(|e| ((e >> 32) as u32, e as u32))
            .collect()
    }

    /// V − E + F over the referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<u32> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// True when every directed edge has its reverse exactly once.
    pub fn is_closed_and_oriented(&self) -> bool {
        let pack = |a: u32, b: u32| (u64::from(a) << 32) | u64::from(b);
        let directed = self.directed_edges();
        let mut forward: Vec<u64> = directed.iter().map(|&(a, b)| pack(a, b)).collect();
        let mut reverse: Vec<u64> = directed.iter().map(|&(a, b)| pack(b, a)).collect();
        forward.sort_unstable();
        reverse.sort_unstable();
        forward.windows(2).all(|w| w[0] != w[1]) && forward == reverse
    }

    /// Number of edge-connected components.
    pub fn shell_count(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut used = vec![false; n];
        for t in &self.triangles {
            for k in 0..3 {
                used[t[k] as usize] = true;
                let a = find(&mut parent, t[k] as usize);
                let b = find(&mut parent, t[(k + 1) % 3] as usize);
                parent[a] = b;
            }
        }
        (0..n)
            .filter(|&i| used[i] && find(&mut parent, i) == i)
            .count()
    }

    pub fn feature_report(&self) -> FeatureReport {
        let min_edge_mm = self
            .edges()
            .iter()
            .map(|&(a, b)| norm(sub(self.vertices[a as usize], self.vertices[b as usize])))
            .fold(f64::INFINITY, f64::min);
        let areas: Vec<f64> = self
            .triangles
            .iter()
            .map(|t| self.triangle_area(t))
            .collect();
        FeatureReport {
            min_edge_mm,
            min_triangle_area_mm2: areas.iter().copied().fold(f64::INFINITY, f64::min),
            degenerate_triangles: areas.iter().filter(|&&a| a < 1e-12).count(),
            shells: self.shell_count(),
        }
    }
}

/// Decode, extract, smooth and encode a genome as binary STL.
pub fn genome_to_stl(g: &Genome, smooth_steps: usize) -> Result<Vec<u8>, MeshError> {
    let mesh = laplacian_smooth(&extract_surface(&rasterize(g)), smooth_steps);
    write_stl(&mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        }
    }

    #[test]
    fn tetrahedron_measures() {
        let m = tetra();
        assert!((m.volume() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.is_closed_and_oriented());
        assert_eq!(m.shell_count(), 1);
        let r = m.feature_report();
        assert!((r.min_edge_mm - 1.0).abs() < 1e-15);
        assert_eq!(r.degenerate_triangles, 0);
    }

    #[test]
    fn flipped_face_breaks_orientation() {
        let mut m = tetra();
        m.triangles[0] = [0, 1, 2];
        assert!(!m.is_closed_and_oriented());
    }
}
