//! Uniform tensor-product meshes: P1 intervals for `D = 1`, Q1 quadrilaterals
//! for `D = 2`. Nodes are numbered with the first axis running fastest.

use crate::error::{M1Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<const D: usize> {
    lower: [f64; D],
    upper: [f64; D],
    cells: [usize; D],
    spacing: [f64; D],
    strides: [usize; D],
}

impl<const D: usize> Mesh<D> {
    /// Uniform mesh of the box `[lower, upper]` with `cells[k]` cells along axis `k`.
    pub fn uniform(lower: [f64; D], upper: [f64; D], cells: [usize; D]) -> Result<Self> {
        if D == 0 {
            return Err(M1Error::Config("mesh dimension must be at least 1".into()));
        }
        let mut spacing = [0.0; D];
        let mut strides = [0usize; D];
        let mut stride = 1;
        for k in 0..D {
            if !(lower[k].is_finite() && upper[k].is_finite() && upper[k] > lower[k]) {
                return Err(M1Error::Config(format!(
                    "invalid extent along axis {k}: [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if cells[k] < 2 {
                return Err(M1Error::Config(format!(
                    "need at least 2 cells along axis {k}, got {}",
                    cells[k]
                )));
            }
            spacing[k] = (upper[k] - lower[k]) / cells[k] as f64;
            strides[k] = stride;
            stride *= cells[k] + 1;
        }
        Ok(Self { lower, upper, cells, spacing, strides })
    }

    /// Same as [`Mesh::uniform`] with the resolution given as nodes per axis.
    pub fn with_nodes(lower: [f64; D], upper: [f64; D], nodes: [usize; D]) -> Result<Self> {
        let mut cells = [0; D];
        for k in 0..D {
            cells[k] = nodes[k].saturating_sub(1);
        }
        Self::uniform(lower, upper, cells)
    }

    pub fn dim(&self) -> usize {
        D
    }

    pub fn lower(&self) -> [f64; D] {
        self.lower
    }

    pub fn upper(&self) -> [f64; D] {
        self.upper
    }

    pub fn cells_per_axis(&self) -> [usize; D] {
        self.cells
    }

    pub fn nodes_per_axis(&self) -> [usize; D] {
        self.cells.map(|c| c + 1)
    }

    pub fn spacing(&self) -> [f64; D] {
        self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn n_nodes(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.iter().product()
    }

    /// Number of nodes per cell, `2^D`.
    pub fn nodes_per_cell(&self) -> usize {
        1 << D
    }

    pub fn node_index(&self, idx: [usize; D]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_multi_index(&self, node: usize) -> [usize; D] {
        let mut out = [0; D];
        let mut rest = node;
        for k in 0..D {
            let n = self.cells[k] + 1;
            out[k] = rest % n;
            rest /= n;
        }
        out
    }

    pub fn node_coords(&self, node: usize) -> [f64; D] {
        let idx = self.node_multi_index(node);
        let mut x = [0.0; D];
        for k in 0..D {
            x[k] = self.coord(k, idx[k]);
        }
        x
    }

    /// Coordinate of grid line `i` along axis `k`; the last line is pinned to
    /// the upper bound exactly.
    fn coord(&self, k: usize, i: usize) -> f64 {
        if i == self.cells[k] {
            self.upper[k]
        } else {
            self.lower[k] + i as f64 * self.spacing[k]
        }
    }

    pub fn cell_multi_index(&self, cell: usize) -> [usize; D] {
        let mut out = [0; D];
        let mut rest = cell;
        for k in 0..D {
            out[k] = rest % self.cells[k];
            rest /= self.cells[k];
        }
        out
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; D] {
        let idx = self.cell_multi_index(cell);
        let mut x = [0.0; D];
        for k in 0..D {
            x[k] = self.lower[k] + idx[k] as f64 * self.spacing[k];
        }
        x
    }

    /// Global node of local vertex `a` of `cell`; bit `k` of `a` selects the
    /// upper side along axis `k`.
    pub fn cell_node(&self, cell: usize, a: usize) -> usize {
        let mut idx = self.cell_multi_index(cell);
        for (k, i) in idx.iter_mut().enumerate() {
            *i += (a >> k) & 1;
        }
        self.node_index(idx)
    }

    pub fn cell_nodes(&self, cell: usize) -> Vec<usize> {
        (0..self.nodes_per_cell()).map(|a| self.cell_node(cell, a)).collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.node_multi_index(node);
        (0..D).any(|k| idx[k] == 0 || idx[k] == self.cells[k])
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Outward unit normals of the box faces a boundary node lies on.
    pub fn boundary_normals(&self, node: usize) -> Vec<[f64; D]> {
        let idx = self.node_multi_index(node);
        let mut out = Vec::new();
        for k in 0..D {
            if idx[k] == 0 {
                let mut n = [0.0; D];
                n[k] = -1.0;
                out.push(n);
            }
            if idx[k] == self.cells[k] {
                let mut n = [0.0; D];
                n[k] = 1.0;
                out.push(n);
            }
        }
        out
    }

    /// Nodes sharing at least one cell with `node`, excluding `node`, in
    /// ascending order.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let idx = self.node_multi_index(node);
        let mut out = Vec::with_capacity(3usize.pow(D as u32));
        for code in 0..3usize.pow(D as u32) {
            let mut c = code;
            let mut nb = [0; D];
            let mut valid = true;
            for k in 0..D {
                let off = (c % 3) as isize - 1;
                c /= 3;
                let v = idx[k] as isize + off;
                if v < 0 || v > self.cells[k] as isize {
                    valid = false;
                    break;
                }
                nb[k] = v as usize;
            }
            if valid {
                let j = self.node_index(nb);
                if j != node {
                    out.push(j);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: &[f64; D]) -> usize {
        let mut idx = [0; D];
        for k in 0..D {
            let t = ((x[k] - self.lower[k]) / self.spacing[k]).round();
            idx[k] = t.clamp(0.0, self.cells[k] as f64) as usize;
        }
        self.node_index(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mesh() {
        let m = Mesh::uniform([0.0], [1.0], [4]).unwrap();
        assert_eq!(m.n_nodes(), 5);
        let xs: Vec<f64> = (0..5).map(|i| m.node_coords(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.boundary_nodes(), vec![0, 4]);
        assert_eq!(m.neighbors(2), vec![1, 3]);
        assert_eq!(m.boundary_normals(0), vec![[-1.0]]);
    }

    #[test]
    fn large_grid_node_count() {
        let m = Mesh::uniform([-0.5, -0.5], [0.5, 0.5], [512, 512]).unwrap();
        assert_eq!(m.n_nodes(), 513 * 513);
        let m = Mesh::with_nodes([-0.5, -0.5], [0.5, 0.5], [512, 512]).unwrap();
        assert_eq!(m.n_nodes(), 512 * 512);
    }

    #[test]
    fn lattice_mesh() {
        let m = Mesh::uniform([0.0, 0.0], [7.0, 7.0], [7, 7]).unwrap();
        assert_eq!(m.n_nodes(), 64);
        assert_eq!(m.spacing(), [1.0, 1.0]);
        assert_eq!(m.node_coords(63), [7.0, 7.0]);
        assert_eq!(m.node_coords(9), [1.0, 1.0]);
        assert_eq!(m.boundary_nodes().len(), 28);
    }

    #[test]
    fn interior_stencil_sizes() {
        let m = Mesh::uniform([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        for i in 0..m.n_nodes() {
            let n = m.neighbors(i).len();
            if m.is_boundary(i) {
                assert!(n == 3 || n == 5, "node {i}: {n}");
            } else {
                assert_eq!(n, 8);
            }
        }
        let m1 = Mesh::uniform([0.0], [1.0], [6]).unwrap();
        assert_eq!(m1.neighbors(3).len(), 2);
    }

    #[test]
    fn cell_connectivity() {
        let m = Mesh::uniform([0.0, 0.0], [3.0, 2.0], [3, 2]).unwrap();
        assert_eq!(m.n_cells(), 6);
        // cell (1, 1): nodes (1,1) (2,1) (1,2) (2,2) with 4 nodes per row
        assert_eq!(m.cell_nodes(4), vec![5, 6, 9, 10]);
        assert_eq!(m.cell_origin(4), [1.0, 1.0]);
        assert_eq!(m.boundary_normals(0).len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Mesh::uniform([0.0], [1.0], [1]).is_err());
        assert!(Mesh::uniform([1.0, 0.0], [0.0, 1.0], [4, 4]).is_err());
        assert!(Mesh::with_nodes([0.0], [f64::NAN], [5]).is_err());
    }

    #[test]
    fn nearest_node_rounds() {
        let m = Mesh::uniform([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        assert_eq!(m.nearest_node(&[0.26, 0.49]), m.node_index([1, 2]));
        assert_eq!(m.nearest_node(&[-5.0, 9.0]), m.node_index([0, 4]));
    }
}
