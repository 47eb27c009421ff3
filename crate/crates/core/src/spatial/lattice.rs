use crate::error::{Error, Result};

/// Linear voxel index, x fastest then y then z.
pub type VoxelIndex = usize;

/// A 3-D voxel grid with an in-brain mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dims: [usize; 3],
    mask: Vec<bool>,
}

impl Lattice {
    pub fn new(dims: [usize; 3], mask: Vec<bool>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("lattice dims must be positive, got {dims:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if mask.len() != n {
            return Err(Error::invalid(format!("mask has {} entries, lattice has {n}", mask.len())));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid("mask selects no voxels"));
        }
        Ok(Self { dims, mask })
    }

    /// Every voxel masked in.
    pub fn full(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, vec![true; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_voxels(&self) -> usize {
        self.mask.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_masked(&self, v: VoxelIndex) -> bool {
        self.mask.get(v).copied().unwrap_or(false)
    }

    pub fn n_masked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn masked_indices(&self) -> Vec<VoxelIndex> {
        (0..self.mask.len()).filter(|&v| self.mask[v]).collect()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> VoxelIndex {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn coords(&self, v: VoxelIndex) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [v % nx, (v / nx) % ny, v / (nx * ny)]
    }

    /// First-order (face-adjacent) masked-in neighbours in the order
    /// +x, −x, +y, −y, +z, −z.
    pub fn neighbors(&self, v: VoxelIndex) -> Vec<VoxelIndex> {
        let c = self.coords(v);
        let mut out = Vec::with_capacity(6);
        for axis in 0..3 {
            for step in [1isize, -1] {
                let p = c[axis] as isize + step;
                if p < 0 || p >= self.dims[axis] as isize {
                    continue;
                }
                let mut n = c;
                n[axis] = p as usize;
                let u = self.index(n[0], n[1], n[2]);
                if self.mask[u] {
                    out.push(u);
                }
            }
        }
        out
    }
}

pub fn neighbors(lattice: &Lattice, v: VoxelIndex) -> Vec<VoxelIndex> {
    lattice.neighbors(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_of_cube_has_six() {
        let l = Lattice::full([3, 3, 3]).unwrap();
        let c = l.index(1, 1, 1);
        let n = l.neighbors(c);
        assert_eq!(
            n,
            vec![
                l.index(2, 1, 1),
                l.index(0, 1, 1),
                l.index(1, 2, 1),
                l.index(1, 0, 1),
                l.index(1, 1, 2),
                l.index(1, 1, 0)
            ]
        );
    }

    #[test]
    fn single_voxel_has_none() {
        let l = Lattice::full([1, 1, 1]).unwrap();
        assert!(l.neighbors(0).is_empty());
    }

    #[test]
    fn corner_neighbors_match_enumeration() {
        let l = Lattice::full([2, 2, 2]).unwrap();
        for v in 0..8 {
            let c = l.coords(v);
            // brute force: all voxels at Manhattan distance one
            let mut expect: Vec<usize> = (0..8)
                .filter(|&u| {
                    let d = l.coords(u);
                    (0..3).map(|a| c[a].abs_diff(d[a])).sum::<usize>() == 1
                })
                .collect();
            let mut got = l.neighbors(v);
            assert_eq!(got.len(), 3);
            expect.sort();
            got.sort();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn mask_edges_clip() {
        let mut mask = vec![true; 9];
        mask[4] = false;
        let l = Lattice::new([3, 3, 1], mask).unwrap();
        assert_eq!(l.neighbors(l.index(1, 0, 0)), vec![l.index(2, 0, 0), l.index(0, 0, 0)]);
    }

    #[test]
    fn invalid_lattices() {
        assert!(Lattice::new([0, 1, 1], vec![]).is_err());
        assert!(Lattice::new([2, 1, 1], vec![true]).is_err());
        assert!(Lattice::new([2, 1, 1], vec![false, false]).is_err());
    }

    #[test]
    fn coords_round_trip() {
        let l = Lattice::full([4, 3, 2]).unwrap();
        for v in 0..l.n_voxels() {
            let [x, y, z] = l.coords(v);
            assert_eq!(l.index(x, y, z), v);
        }
    }
}
