//! Uniform vertex-centred grids in one and two dimensions.
//!
//! Every node owns a control volume `h^n`, halved along each axis on which
//! the node sits on the boundary. Faces between neighbouring nodes carry an
//! area `h^{n-1}`, halved for faces that run along a boundary row. With
//! these weights a zero-flux boundary is exactly a mirrored ghost node.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;

/// One face between two neighbouring nodes, oriented `from -> to` along `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
    /// Face area `A_e`.
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    /// Nodes per axis: `[n]` or `[nx, ny]`.
    nodes: Vec<usize>,
    /// Length of the x axis; the spacing is shared by both axes.
    length: f64,
    #[serde(default)]
    origin: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    nodes: [usize; 2],
    h: f64,
    origin: [f64; 2],
}

impl TryFrom<GridSpec> for Grid {
    type Error = SolverError;

    fn try_from(spec: GridSpec) -> Result<Self, Self::Error> {
        let grid = match spec.nodes.as_slice() {
            [n] => Grid::line(*n, spec.length)?,
            [nx, ny] => Grid::rect([*nx, *ny], spec.length)?,
            other => {
                return Err(SolverError::InvalidGrid(format!(
                    "expected 1 or 2 node counts, got {}",
                    other.len()
                )))
            }
        };
        match spec.origin {
            None => Ok(grid),
            Some(o) if o.len() == grid.dim => {
                let mut origin = [0.0; 2];
                origin[..o.len()].copy_from_slice(&o);
                grid.with_origin(origin)
            }
            Some(o) => Err(SolverError::InvalidGrid(format!(
                "origin has {} components for a {}-d grid",
                o.len(),
                grid.dim
            ))),
        }
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            nodes: g.nodes[..g.dim].to_vec(),
            length: g.h * (g.nodes[0] - 1) as f64,
            origin: Some(g.origin[..g.dim].to_vec()),
        }
    }
}

impl Grid {
    /// `nodes` points spanning `[0, length]`.
    pub fn line(nodes: usize, length: f64) -> Result<Self, SolverError> {
        Self::build(1, [nodes, 1], length)
    }

    /// `nx × ny` points with spacing `length / (nx - 1)` on both axes.
    pub fn rect(nodes: [usize; 2], length: f64) -> Result<Self, SolverError> {
        Self::build(2, nodes, length)
    }

    fn build(dim: usize, nodes: [usize; 2], length: f64) -> Result<Self, SolverError> {
        if nodes[..dim].iter().any(|&n| n < 3) {
            return Err(SolverError::InvalidGrid(
                "need at least 3 nodes per axis".into(),
            ));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SolverError::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self {
            dim,
            nodes,
            h: length / (nodes[0] - 1) as f64,
            origin: [0.0; 2],
        })
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Result<Self, SolverError> {
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(SolverError::InvalidGrid("origin must be finite".into()));
        }
        self.origin = origin;
        if self.dim == 1 {
            self.origin[1] = 0.0;
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Upper corner of the domain.
    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + self.h * (self.nodes[0] - 1) as f64,
            self.origin[1] + self.h * (self.nodes[1] - 1) as f64,
        ]
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.nodes[0] * iy
    }

    #[inline]
    pub fn split(&self, i: usize) -> (usize, usize) {
        (i % self.nodes[0], i / self.nodes[0])
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let (ix, iy) = self.split(i);
        [
            self.origin[0] + self.h * ix as f64,
            self.origin[1] + self.h * iy as f64,
        ]
    }

    /// Euclidean distance from node `i` to `x`.
    #[inline]
    pub fn distance(&self, i: usize, x: [f64; 2]) -> f64 {
        let c = self.coords(i);
        let dx = c[0] - x[0];
        if self.dim == 1 {
            dx.abs()
        } else {
            dx.hypot(c[1] - x[1])
        }
    }

    /// Control volume of node `i`.
    pub fn cell_volume(&self, i: usize) -> f64 {
        let (ix, iy) = self.split(i);
        let mut w = self.h.powi(self.dim as i32);
        if ix == 0 || ix + 1 == self.nodes[0] {
            w *= 0.5;
        }
        if self.dim == 2 && (iy == 0 || iy + 1 == self.nodes[1]) {
            w *= 0.5;
        }
        w
    }

    pub fn cell_volumes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.cell_volume(i)).collect()
    }

    /// All faces, x-faces first, in a fixed order.
    pub fn edges(&self) -> Vec<Edge> {
        let [nx, ny] = self.nodes;
        let mut edges = Vec::new();
        let face = self.h.powi(self.dim as i32 - 1);
        for iy in 0..ny {
            let area = if self.dim == 2 && (iy == 0 || iy + 1 == ny) {
                0.5 * face
            } else {
                face
            };
            for ix in 0..nx - 1 {
                edges.push(Edge {
                    from: self.index(ix, iy),
                    to: self.index(ix + 1, iy),
                    axis: 0,
                    area,
                });
            }
        }
        if self.dim == 2 {
            for iy in 0..ny - 1 {
                for ix in 0..nx {
                    let area = if ix == 0 || ix + 1 == nx {
                        0.5 * face
                    } else {
                        face
                    };
                    edges.push(Edge {
                        from: self.index(ix, iy),
                        to: self.index(ix, iy + 1),
                        axis: 1,
                        area,
                    });
                }
            }
        }
        edges
    }

    /// Band half-width of the nodal stiffness matrix.
    pub fn bandwidth(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.nodes[0]
        }
    }

    /// Nodes within the closed ball of radius `r` around `x` (with a relative slack of 1e-9 h).
    pub fn ball(&self, x: [f64; 2], r: f64) -> Vec<usize> {
        let slack = 1e-9 * self.h;
        (0..self.len())
            .filter(|&i| self.distance(i, x) <= r + slack)
            .collect()
    }

    /// Whether the closed ball of radius `r` around `x` lies inside the domain.
    pub fn contains_ball(&self, x: [f64; 2], r: f64) -> bool {
        let up = self.upper();
        let slack = 1e-9 * self.h;
        let ok_x = x[0] - r >= self.origin[0] - slack && x[0] + r <= up[0] + slack;
        if self.dim == 1 {
            ok_x
        } else {
            ok_x && x[1] - r >= self.origin[1] - slack && x[1] + r <= up[1] + slack
        }
    }

    /// The same grid translated so that `shift` becomes the origin of coordinates.
    pub fn shifted(&self, shift: [f64; 2]) -> Grid {
        let mut g = self.clone();
        g.origin = [self.origin[0] - shift[0], self.origin[1] - shift[1]];
        if g.dim == 1 {
            g.origin[1] = 0.0;
        }
        g
    }

    /// Grid with every spacing halved over the same domain.
    pub fn refined(&self) -> Grid {
        let mut g = self.clone();
        g.nodes[0] = 2 * self.nodes[0] - 1;
        if self.dim == 2 {
            g.nodes[1] = 2 * self.nodes[1] - 1;
        }
        g.h = self.h / 2.0;
        g
    }

    /// Side(s) of the domain touched by node `i`.
    pub fn sides(&self, i: usize) -> [bool; 4] {
        let (ix, iy) = self.split(i);
        [
            ix == 0,
            ix + 1 == self.nodes[0],
            self.dim == 2 && iy == 0,
            self.dim == 2 && iy + 1 == self.nodes[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes_sum_to_domain_measure() {
        let g = Grid::line(11, 2.0).unwrap();
        let total: f64 = g.cell_volumes().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let g2 = Grid::rect([5, 7], 1.0).unwrap();
        let total: f64 = g2.cell_volumes().iter().sum();
        assert!((total - 1.0 * 1.5).abs() < 1e-14);
    }

    #[test]
    fn edge_volumes_match_domain_measure_per_axis() {
        let g = Grid::rect([5, 4], 1.0).unwrap();
        let h = g.h();
        for axis in 0..2 {
            let total: f64 = g
                .edges()
                .iter()
                .filter(|e| e.axis == axis)
                .map(|e| e.area * h)
                .sum();
            assert!((total - 0.75).abs() < 1e-14, "axis {axis}: {total}");
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(Grid::line(2, 1.0).is_err());
        assert!(Grid::rect([5, 2], 1.0).is_err());
        assert!(Grid::line(5, 0.0).is_err());
    }

    #[test]
    fn spec_round_trip() {
        let g = Grid::rect([5, 9], 1.0)
            .unwrap()
            .with_origin([0.5, -1.0])
            .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: Grid = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn ball_counts_nodes() {
        let g = Grid::line(11, 1.0).unwrap();
        assert_eq!(g.ball([0.5, 0.0], 0.2).len(), 5);
        assert!(g.contains_ball([0.5, 0.0], 0.5));
        assert!(!g.contains_ball([0.5, 0.0], 0.51));
    }
}
