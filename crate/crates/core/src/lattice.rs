//! The image grid as an 8-adjacency graph, plus the fixed 4-colouring that
//! lets same-colour voxels be updated simultaneously.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Row-major 8-adjacency lattice (`index = row * width + col`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGraph {
    height: usize,
    width: usize,
    /// CSR offsets into `adjacency`, length `V + 1`.
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
}

impl LatticeGraph {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return invalid(alloc::format!("lattice dimensions must be positive, got {height}x{width}"));
        }
        let n = height * width;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::with_capacity(8 * n);
        offsets.push(0);
        for r in 0..height as isize {
            for c in 0..width as isize {
                for dr in -1..=1isize {
                    for dc in -1..=1isize {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (rr, cc) = (r + dr, c + dc);
                        if rr >= 0 && cc >= 0 && (rr as usize) < height && (cc as usize) < width {
                            adjacency.push(rr as usize * width + cc as usize);
                        }
                    }
                }
                offsets.push(adjacency.len());
            }
        }
        Ok(Self { height, width, offsets, adjacency })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of voxels `V`.
    #[inline]
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    /// `w_v·`, the neighbour count.
    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.len()).map(|v| self.degree(v)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }

    #[inline]
    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v / self.width, v % self.width)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Image diagonal, the cap for distance values.
    pub fn diagonal(&self) -> f64 {
        libm::sqrt((self.height * self.height + self.width * self.width) as f64)
    }

    pub fn first_isolated(&self) -> Option<usize> {
        (0..self.len()).find(|&v| self.degree(v) == 0)
    }

    /// `φ̄_v`, the mean of `field` over the neighbours of `v`.
    pub fn neighbor_mean(&self, field: &[f64], v: usize) -> Result<f64> {
        let nb = self.neighbors(v);
        if nb.is_empty() {
            return Err(Error::DegenerateVoxel { voxel: v });
        }
        Ok(self.neighbor_sum(field, v) / nb.len() as f64)
    }

    #[inline]
    pub(crate) fn neighbor_sum(&self, field: &[f64], v: usize) -> f64 {
        self.neighbors(v).iter().map(|&k| field[k]).sum()
    }

    /// `xᵀ (D − ρW) x`.
    pub fn car_quadratic_form(&self, x: &[f64], rho: f64) -> f64 {
        debug_assert_eq!(x.len(), self.len());
        (0..self.len()).map(|v| x[v] * (self.degree(v) as f64 * x[v] - rho * self.neighbor_sum(x, v))).sum()
    }

    /// `(D − ρW) x`.
    pub fn car_precision_mul(&self, x: &[f64], rho: f64) -> Vec<f64> {
        (0..self.len()).map(|v| self.degree(v) as f64 * x[v] - rho * self.neighbor_sum(x, v)).collect()
    }
}

/// A proper colouring and its colour classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring {
    pub color: Vec<u8>,
    pub classes: Vec<Vec<usize>>,
}

impl Coloring {
    /// Closed-form colouring `2·(row mod 2) + (col mod 2)`; optimal for
    /// 8-adjacency grids with at least two rows and two columns. Empty
    /// classes (thin lattices) are dropped.
    pub fn for_lattice(graph: &LatticeGraph) -> Self {
        let n = graph.len();
        let mut color = vec![0u8; n];
        let mut classes: Vec<Vec<usize>> = vec![Vec::new(); 4];
        for (v, slot) in color.iter_mut().enumerate() {
            let (r, c) = graph.coords(v);
            let k = 2 * (r % 2) + (c % 2);
            *slot = k as u8;
            classes[k].push(v);
        }
        let mut remap = [0u8; 4];
        let mut kept = Vec::new();
        for (k, class) in classes.into_iter().enumerate() {
            if !class.is_empty() {
                remap[k] = kept.len() as u8;
                kept.push(class);
            }
        }
        color.iter_mut().for_each(|c| *c = remap[*c as usize]);
        Self { color, classes: kept }
    }

    pub fn num_colors(&self) -> usize {
        self.classes.len()
    }

    /// Count of edges whose endpoints share a colour.
    pub fn monochromatic_edges(&self, graph: &LatticeGraph) -> usize {
        (0..graph.len())
            .flat_map(|v| graph.neighbors(v).iter().map(move |&u| (v, u)))
            .filter(|&(v, u)| v < u && self.color[v] == self.color[u])
            .count()
    }
}
