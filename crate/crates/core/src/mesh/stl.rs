//! Binary STL: 80-byte header, little-endian u32 triangle count, then per
//! triangle twelve little-endian f32 (normal, three vertices) and a zero u16
//! attribute word.

use super::{cross, norm, sub, MeshError, TriangleMesh};

pub const STL_HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

fn header() -> [u8; STL_HEADER_LEN] {
    let mut h = [b' '; STL_HEADER_LEN];
    let text = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
    h[..text.len()].copy_from_slice(text.as_bytes());
    h
}

fn unit_normal(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> [f32; 3] {
    let n = cross(sub(b, a), sub(c, a));
    let len = norm(n);
    if len == 0.0 {
        return [0.0; 3];
    }
    [
        (n[0] / len) as f32,
        (n[1] / len) as f32,
        (n[2] / len) as f32,
    ]
}

pub fn write_stl(mesh: &TriangleMesh) -> Result<Vec<u8>, MeshError> {
    let count = u32::try_from(mesh.triangles.len())
        .map_err(|_| MeshError::TooManyTriangles(mesh.triangles.len()))?;
    let mut out = Vec::with_capacity(STL_HEADER_LEN + 4 + RECORD_LEN * mesh.triangles.len());
    out.extend_from_slice(&header());
    out.extend_from_slice(&count.to_le_bytes());
    for t in &mesh.triangles {
        let [a, b, c] = mesh.corners(t);
        for x in unit_normal(a, b, c) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for v in [a, b, c] {
            for x in v {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StlFile {
    pub header: [u8; STL_HEADER_LEN],
    pub triangles: Vec<StlTriangle>,
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn read_stl(bytes: &[u8]) -> Result<StlFile, MeshError> {
    if bytes.len() < STL_HEADER_LEN + 4 {
        return Err(MeshError::Truncated(format!(
            "{} bytes, no header",
            bytes.len()
        )));
    }
    let mut header = [0u8; STL_HEADER_LEN];
    header.copy_from_slice(&bytes[..STL_HEADER_LEN]);
    let count = u32::from_le_bytes(
        bytes[STL_HEADER_LEN..STL_HEADER_LEN + 4]
            .try_into()
            .unwrap(),
    ) as usize;
    let expected = STL_HEADER_LEN + 4 + count * RECORD_LEN;
    if bytes.len() != expected {
        return Err(MeshError::Truncated(format!(
            "{count} triangles need {expected} bytes, have {}",
            bytes.len()
        )));
    }
    let triangles = (0..count)
        .map(|i| {
            let base = STL_HEADER_LEN + 4 + i * RECORD_LEN;
            let vec3 = |k: usize| {
                let at = base + 12 * k;
                [
                    f32_at(bytes, at),
                    f32_at(bytes, at + 4),
                    f32_at(bytes, at + 8),
                ]
            };
            StlTriangle {
                normal: vec3(0),
                vertices: [vec3(1), vec3(2), vec3(3)],
                attribute: u16::from_le_bytes([bytes[base + 48], bytes[base + 49]]),
            }
        })
        .collect();
    Ok(StlFile { header, triangles })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle() -> TriangleMesh {
        TriangleMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            triangles: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn empty_mesh_is_header_and_count() {
        let bytes = write_stl(&TriangleMesh::default()).unwrap();
        assert_eq!(bytes.len(), 84);
        assert_eq!(&bytes[80..84], &[0, 0, 0, 0]);
        assert!(bytes[..80].starts_with(b"vawt-mine "));
        assert_eq!(bytes[79], b' ');
    }

    #[test]
    fn single_triangle_layout() {
        let bytes = write_stl(&one_triangle()).unwrap();
        assert_eq!(bytes.len(), 134);
        let parsed = read_stl(&bytes).unwrap();
        assert_eq!(parsed.triangles.len(), 1);
        let t = &parsed.triangles[0];
        assert_eq!(t.normal, [0.0, 0.0, 1.0]);
        assert_eq!(
            t.vertices,
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        );
        assert_eq!(t.attribute, 0);
        // Normal z at offset 84 + 8.
        assert_eq!(&bytes[92..96], &1.0f32.to_le_bytes());
    }

    #[test]
    fn output_is_deterministic() {
        assert_eq!(
            write_stl(&one_triangle()).unwrap(),
            write_stl(&one_triangle()).unwrap()
        );
    }

    #[test]
    fn rejects_truncated_input() {
        let bytes = write_stl(&one_triangle()).unwrap();
        assert!(read_stl(&bytes[..100]).is_err());
        assert!(read_stl(&bytes[..10]).is_err());
    }
}
