//! Genome to voxel decoding.
//!
//! The workspace is a 100³ grid of 0.3 mm cells. Every layer holds a
//! square platform ring (cells 42..=57 on both axes, hollow 14×14 core) and
//! four right-angle-bent blades related by 90° rotation about the centre.
//! The z axis is split into six sections; section 0 uses the genome's
//! profile and each later section shifts the previous one by a z gene.
//!
//! Blade heights are measured in cells above a baseline: for the north-east
//! blade the baseline is the grid line y = 50 and the blade extends along +x
//! from the ring's outer edge (x = 58) to the workspace edge (x = 99).

use crate::genome::{Genome, PROFILE_LEN, PROFILE_MAX, PROFILE_MIN, ZSHIFT_LEN};

pub const GRID: usize = 100;
pub const VOXEL_MM: f64 = 0.3;

pub const RING_LO: usize = 42;
pub const RING_HI: usize = 57;
pub const BLADE_START: usize = RING_HI + 1;
pub const BLADE_SPAN: usize = GRID - BLADE_START;
pub const BASELINE: usize = 50;

pub const SECTIONS: usize = ZSHIFT_LEN + 1;
/// Layers per z-section, bottom to top.
pub const SECTION_LAYERS: [usize; SECTIONS] = [17, 17, 17, 17, 16, 16];

/// Effective per-section blade heights after z-shifts, each in [1,42].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BladeProfile(pub [i32; PROFILE_LEN]);

impl BladeProfile {
    pub fn heights(&self) -> &[i32; PROFILE_LEN] {
        &self.0
    }
}

/// Profiles for the six contiguous z-sections.
pub fn section_profiles(g: &Genome) -> [BladeProfile; SECTIONS] {
    let mut out = [BladeProfile(*g.profile()); SECTIONS];
    for k in 1..SECTIONS {
        let shift = g.zshift()[k - 1];
        let mut next = out[k - 1].0;
        for h in &mut next {
            *h = (*h + shift).clamp(PROFILE_MIN, PROFILE_MAX);
        }
        out[k] = BladeProfile(next);
    }
    out
}

/// Half-open band of cells above the baseline: cells `lo + 1 ..= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Band {
    pub lo: i32,
    pub hi: i32,
}

impl Band {
    pub fn cells(&self) -> std::ops::RangeInclusive<i32> {
        self.lo + 1..=self.hi
    }

    pub fn thickness(&self) -> i32 {
        self.hi - self.lo
    }
}

const SUPPORT: i32 = 2;

/// Applies the blade drawing rules to a run of heights.
///
/// The first band fills down to the baseline. A band at or above the previous
/// top joins it with two cells of overlap; a band at or below the previous
/// bottom is drawn up to it plus two cells; anything in between is two cells
/// thick.
pub fn band_bounds(heights: &[i32]) -> Vec<Band> {
    let clamp = |v: i32| v.clamp(0, PROFILE_MAX);
    let mut bands: Vec<Band> = Vec::with_capacity(heights.len());
    for &v in heights {
        let band = match bands.last() {
            None => Band {
                lo: 0,
                hi: clamp(v),
            },
            Some(prev) if v >= prev.hi => Band {
                lo: clamp(prev.hi - SUPPORT),
                hi: clamp(v),
            },
            Some(prev) if v <= prev.lo => Band {
                lo: clamp(v),
                hi: clamp(prev.lo + SUPPORT),
            },
            Some(_) => Band {
                lo: clamp(v - SUPPORT),
                hi: clamp(v),
            },
        };
        bands.push(band);
    }
    bands
}

/// Blade-relative column range `[start, end)` controlled by gene `i`.
pub fn band_columns(i: usize) -> std::ops::Range<usize> {
    (BLADE_SPAN * i / PROFILE_LEN)..(BLADE_SPAN * (i + 1) / PROFILE_LEN)
}

/// Occupancy of one z-layer, indexed `[y * GRID + x]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LayerMask {
    cells: Vec<bool>,
}

impl std::fmt::Debug for LayerMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LayerMask({} solid)", self.count())
    }
}

impl LayerMask {
    pub fn empty() -> Self {
        Self {
            cells: vec![false; GRID * GRID],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * GRID + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * GRID + x] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Quarter turn counter-clockwise about the grid centre.
    pub fn rotated(&self) -> Self {
        let mut out = Self::empty();
        for y in 0..GRID {
            for x in 0..GRID {
                if self.get(x, y) {
                    out.set(GRID - 1 - y, x, true);
                }
            }
        }
        out
    }

    /// ASCII rendering, top row first.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(GRID * (GRID + 1));
        for y in (0..GRID).rev() {
            for x in 0..GRID {
                s.push(if self.get(x, y) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

pub fn is_ring_cell(x: usize, y: usize) -> bool {
    let inside = |v: usize| (RING_LO..=RING_HI).contains(&v);
    inside(x) && inside(y) && (x == RING_LO || x == RING_HI || y == RING_LO || y == RING_HI)
}

/// Platform ring plus four blades for one profile.
pub fn rasterize_layer(p: &BladeProfile) -> LayerMask {
    let mut blade = LayerMask::empty();
    for (i, band) in band_bounds(p.heights()).iter().enumerate() {
        for col in band_columns(i) {
            let x = BLADE_START + col;
            for j in band.cells() {
                blade.set(x, BASELINE + j as usize - 1, true);
            }
        }
    }
    let mut layer = LayerMask::empty();
    for y in 0..GRID {
        for x in 0..GRID {
            if is_ring_cell(x, y) {
                layer.set(x, y, true);
            }
        }
    }
    let mut quarter = blade;
    for _ in 0..4 {
        for (cell, &b) in layer.cells.iter_mut().zip(quarter.cells.iter()) {
            *cell |= b;
        }
        quarter = quarter.rotated();
    }
    layer
}

/// Boolean occupancy grid indexed `[(z * ny + y) * nx + x]`.
#[derive(Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    cells: Vec<bool>,
}

impl std::fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VoxelGrid({:?}, {} solid)", self.dims, self.count())
    }
}

impl VoxelGrid {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self {
            dims: [nx, ny, nz],
            cells: vec![false; nx * ny * nz],
        }
    }

    /// Empty 100³ workspace.
    pub fn workspace() -> Self {
        Self::new(GRID, GRID, GRID)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.cells[self.index(x, y, z)]
    }

    /// Like [`get`](Self::get) but treats out-of-range coordinates as empty.
    pub fn get_signed(&self, x: i64, y: i64, z: i64) -> bool {
        if x < 0 || y < 0 || z < 0 {
            return false;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return false;
        }
        self.get(x, y, z)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.index(x, y, z);
        self.cells[i] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Extracts layer `z` of a 100×100-footprint grid.
    pub fn layer(&self, z: usize) -> LayerMask {
        assert_eq!([self.dims[0], self.dims[1]], [GRID, GRID]);
        let start = z * GRID * GRID;
        LayerMask {
            cells: self.cells[start..start + GRID * GRID].to_vec(),
        }
    }

    fn stamp(&mut self, z: usize, mask: &LayerMask) {
        let start = z * GRID * GRID;
        self.cells[start..start + GRID * GRID].copy_from_slice(&mask.cells);
    }
}

/// Half-open z range of each section.
pub fn section_layers() -> [std::ops::Range<usize>; SECTIONS] {
    let mut start = 0;
    SECTION_LAYERS.map(|n| {
        let r = start..start + n;
        start += n;
        r
    })
}

/// Full 100³ phenotype of a genome.
pub fn rasterize(g: &Genome) -> VoxelGrid {
    let mut grid = VoxelGrid::workspace();
    for (profile, layers) in section_profiles(g).iter().zip(section_layers()) {
        let mask = rasterize_layer(profile);
        for z in layers {
            grid.stamp(z, &mask);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> Genome {
        Genome::new(
            [2, 2, 3, 4, 5, 8, 13, 20, 34, 40],
            [2, -5, 10, 3, -2],
            false,
        )
        .unwrap()
    }

    #[test]
    fn section_layout_covers_grid() {
        assert_eq!(SECTION_LAYERS.iter().sum::<usize>(), GRID);
        let ranges = section_layers();
        assert_eq!(ranges[0], 0..17);
        assert_eq!(ranges[5], 84..100);
    }

    #[test]
    fn worked_example_section_profiles() {
        let s = section_profiles(&worked_example());
        assert_eq!(s[0].0, [2, 2, 3, 4, 5, 8, 13, 20, 34, 40]);
        assert_eq!(s[1].0, [4, 4, 5, 6, 7, 10, 15, 22, 36, 42]);
        assert_eq!(s[2].0, [1, 1, 1, 1, 2, 5, 10, 17, 31, 37]);
    }

    #[test]
    fn zero_shift_sections_match_base() {
        let g = Genome::new([7, 9, 3, 4, 5, 8, 1, 20, 34, 40], [0; 5], true).unwrap();
        assert!(section_profiles(&g).iter().all(|p| p.0 == *g.profile()));
    }

    #[test]
    fn saturating_shift() {
        let g = Genome::new([42; 10], [42, 0, 0, 0, 0], false).unwrap();
        assert_eq!(section_profiles(&g)[1].0, [42; 10]);
    }

    #[test]
    fn drawing_rules_fragment() {
        let bands = band_bounds(&[5, 8, 2, 4]);
        let cells: Vec<_> = bands.iter().map(|b| b.cells()).collect();
        assert_eq!(cells, vec![1..=5, 4..=8, 3..=5, 3..=4]);
    }

    #[test]
    fn constant_profile_uses_equality_branch() {
        for c in [1, 2, 17, 42] {
            let bands = band_bounds(&[c; 10]);
            assert_eq!(bands[0], Band { lo: 0, hi: c });
            for b in &bands[1..] {
                assert_eq!(
                    *b,
                    Band {
                        lo: (c - 2).max(0),
                        hi: c
                    }
                );
            }
        }
    }

    #[test]
    fn band_columns_tile_blade_span() {
        let mut next = 0;
        for i in 0..PROFILE_LEN {
            let cols = band_columns(i);
            assert_eq!(cols.start, next);
            assert!(cols.len() >= 4);
            next = cols.end;
        }
        assert_eq!(next, BLADE_SPAN);
        assert_eq!(BLADE_SPAN, 42);
    }

    #[test]
    fn platform_ring_has_sixty_cells() {
        let ring = (0..GRID)
            .flat_map(|y| (0..GRID).map(move |x| (x, y)))
            .filter(|&(x, y)| is_ring_cell(x, y))
            .count();
        assert_eq!(ring, 16 * 16 - 14 * 14);
        // Blade-free region of a decoded layer: the 16×16 platform square.
        let mask = rasterize_layer(&BladeProfile([1; 10]));
        let square = (RING_LO..=RING_HI)
            .flat_map(|y| (RING_LO..=RING_HI).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.get(x, y))
            .count();
        assert_eq!(square, 60);
        assert!(!mask.get(50, 50));
    }

    #[test]
    fn layer_is_quarter_turn_symmetric() {
        let mask = rasterize_layer(&section_profiles(&worked_example())[1]);
        assert_eq!(mask.rotated(), mask);
    }

    #[test]
    fn layer_count_matches_band_arithmetic() {
        let p = BladeProfile([2, 2, 3, 4, 5, 8, 13, 20, 34, 40]);
        let blade: usize = band_bounds(p.heights())
            .iter()
            .enumerate()
            .map(|(i, b)| band_columns(i).len() * b.thickness() as usize)
            .sum();
        assert_eq!(rasterize_layer(&p).count(), 60 + 4 * blade);
    }

    #[test]
    fn zero_shift_grid_is_layer_constant() {
        let g = Genome::new([2, 2, 3, 4, 5, 8, 13, 20, 34, 40], [0; 5], false).unwrap();
        let grid = rasterize(&g);
        let first = grid.layer(0);
        assert!((1..GRID).all(|z| grid.layer(z) == first));
    }

    #[test]
    fn each_section_repeats_one_mask() {
        let grid = rasterize(&worked_example());
        for layers in section_layers() {
            let first = grid.layer(layers.start);
            assert!(layers.clone().all(|z| grid.layer(z) == first));
        }
    }

    #[test]
    fn rotation_flag_does_not_change_geometry() {
        let g = worked_example();
        assert_eq!(rasterize(&g), rasterize(&g.flipped()));
    }
}
