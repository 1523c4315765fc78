use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on `[-r, r]^n` with `m` nodes per axis.
///
/// Nodes are ordered lexicographically with axis 0 slowest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    r: f64,
    m: usize,
}

impl Grid {
    pub fn new(n: usize, r: f64, m: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Argument("grid dimension must be >= 1".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Argument(format!("half-width must be positive, got {r}")));
        }
        if m < 5 || m.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "nodes per axis must be odd and >= 5, got {m}"
            )));
        }
        if (m as f64).powi(n as i32) > 5e7 {
            return Err(Error::Argument(format!("grid {m}^{n} is too large")));
        }
        Ok(Self { n, r, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Node spacing `2r / (m - 1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.r / (self.m - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    /// Per-axis index of `node` along `axis`.
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.m
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.n).map(|a| self.axis_index(node, a)).collect()
    }

    pub fn node(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        -self.r + index as f64 * self.spacing()
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        (0..self.n)
            .map(|a| self.coordinate(self.axis_index(node, a)))
            .collect()
    }

    /// Distance in nodes to the nearest face; 0 on the boundary.
    pub fn ring(&self, node: usize) -> usize {
        (0..self.n)
            .map(|a| {
                let i = self.axis_index(node, a);
                i.min(self.m - 1 - i)
            })
            .min()
            .unwrap_or(0)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.ring(node) == 0
    }

    /// Node shifted by `offset` along `axis`; the caller guarantees it exists.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        (node as isize + offset * self.stride(axis) as isize) as usize
    }

    /// Nodes with ring >= `min_ring`, in lexicographic order.
    pub fn nodes_from_ring(&self, min_ring: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.ring(i) >= min_ring).collect()
    }

    /// Nodes at ring >= `min_ring` whose coordinates all satisfy `|x_i| <= half_width`.
    pub fn nodes_in(&self, region: &Region) -> Vec<usize> {
        let tol = 1e-9 * self.spacing();
        (0..self.len())
            .filter(|&i| self.ring(i) >= region.min_ring)
            .filter(|&i| match region.half_width {
                Some(hw) => (0..self.n).all(|a| self.coordinate(self.axis_index(i, a)).abs() <= hw + tol),
                None => true,
            })
            .collect()
    }

    /// The node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = x
            .iter()
            .map(|&xi| {
                let t = ((xi + self.r) / self.spacing()).round();
                t.clamp(0.0, (self.m - 1) as f64) as usize
            })
            .collect();
        self.node(&idx)
    }
}

/// First-derivative stencil numerators along one axis (divide by `2h`):
/// centered inside, one-sided second order at the faces.
pub(crate) fn first_stencil(i: usize, m: usize) -> [(isize, f64); 3] {
    if i == 0 {
        [(0, -3.0), (1, 4.0), (2, -1.0)]
    } else if i == m - 1 {
        [(0, 3.0), (-1, -4.0), (-2, 1.0)]
    } else {
        [(-1, -1.0), (0, 0.0), (1, 1.0)]
    }
}

/// Second-derivative stencil numerators along one axis (divide by `h^2`).
pub(crate) fn second_stencil(i: usize, m: usize) -> Vec<(isize, f64)> {
    if i == 0 {
        vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if i == m - 1 {
        vec![(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
    } else {
        vec![(-1, 1.0), (0, -2.0), (1, 1.0)]
    }
}

/// `d/dx_axis` of a nodal field at `node`.
/// A node selection: a boundary layer to skip, optionally intersected with
/// the cube `[-half_width, half_width]^n`. A fixed `half_width` keeps the
/// measured region the same across refinements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min_ring: usize,
    pub half_width: Option<f64>,
}

impl Region {
    pub fn from_ring(min_ring: usize) -> Self {
        Self { min_ring, half_width: None }
    }

    pub fn within(mut self, half_width: f64) -> Self {
        self.half_width = Some(half_width);
        self
    }
}

pub fn diff1(grid: &Grid, field: impl Fn(usize) -> f64, node: usize, axis: usize) -> f64 {
    let i = grid.axis_index(node, axis);
    let s: f64 = first_stencil(i, grid.m())
        .iter()
        .filter(|(_, w)| *w != 0.0)
        .map(|&(o, w)| w * field(grid.shift(node, axis, o)))
        .sum();
    s / (2.0 * grid.spacing())
}

/// `d^2/dx_a dx_b` of a nodal field at `node`.
pub fn diff2(grid: &Grid, field: impl Fn(usize) -> f64, node: usize, a: usize, b: usize) -> f64 {
    let h = grid.spacing();
    if a == b {
        let i = grid.axis_index(node, a);
        let s: f64 = second_stencil(i, grid.m())
            .iter()
            .map(|&(o, w)| w * field(grid.shift(node, a, o)))
            .sum();
        return s / (h * h);
    }
    let sa = first_stencil(grid.axis_index(node, a), grid.m());
    let sb = first_stencil(grid.axis_index(node, b), grid.m());
    let mut s = 0.0;
    for &(oa, wa) in &sa {
        if wa == 0.0 {
            continue;
        }
        let na = grid.shift(node, a, oa);
        for &(ob, wb) in &sb {
            if wb != 0.0 {
                s += wa * wb * field(grid.shift(na, b, ob));
            }
        }
    }
    s / (4.0 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new(3, 1.0, 5).unwrap();
        assert_eq!(g.len(), 125);
        for node in 0..g.len() {
            assert_eq!(g.node(&g.multi_index(node)), node);
        }
        let centre = g.node(&[2, 2, 2]);
        assert_eq!(g.position(centre), vec![0.0, 0.0, 0.0]);
        assert_eq!(g.ring(centre), 2);
        assert!(g.is_boundary(0));
        assert_eq!(g.nearest(&[0.01, -0.02, 0.0]), centre);
        assert_eq!(g.shift(centre, 0, 1), g.node(&[3, 2, 2]));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(2, 1.0, 4).is_err());
        assert!(Grid::new(2, 1.0, 6).is_err());
        assert!(Grid::new(2, 0.0, 7).is_err());
    }

    #[test]
    fn stencils_are_exact_on_cubics() {
        let g = Grid::new(2, 1.0, 7).unwrap();
        let u = |node: usize| {
            let x = g.position(node);
            x[0].powi(2) * x[1] + 2.0 * x[1].powi(2) - x[0]
        };
        for node in 0..g.len() {
            let x = g.position(node);
            let ux = diff1(&g, u, node, 0);
            assert!((ux - (2.0 * x[0] * x[1] - 1.0)).abs() < 1e-12);
            let uxy = diff2(&g, u, node, 0, 1);
            assert!((uxy - 2.0 * x[0]).abs() < 1e-11);
            let uyy = diff2(&g, u, node, 1, 1);
            assert!((uyy - 4.0).abs() < 1e-10);
            let uxx = diff2(&g, u, node, 0, 0);
            assert!((uxx - 2.0 * x[1]).abs() < 1e-10);
        }
    }
}
