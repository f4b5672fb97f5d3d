//! The lattice ħZⁿ and finite box truncations of it.
//!
//! Points of a box are enumerated lexicographically over their integer
//! coordinates `z ∈ [-R, R]ⁿ` (first coordinate most significant); the
//! lattice point is `k = ħ·z`. This ordering fixes the row/column layout of
//! every matrix produced by the crate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance on `coordinate / ħ` when testing lattice membership.
pub const LATTICE_TOL: f64 = 1e-9;

/// The lattice ħZⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    hbar: f64,
    dim: usize,
}

impl LatticeSpec {
    pub fn new(hbar: f64, dim: usize) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid("hbar", format!("must be positive and finite, got {hbar}")));
        }
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        Ok(Self { hbar, dim })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Integer coordinates of a lattice point, if it lies on the lattice.
    pub fn coords_of(&self, point: &[f64]) -> Result<Vec<i64>> {
        if point.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has {} coordinates, lattice dimension is {}",
                point.len(),
                self.dim
            )));
        }
        point
            .iter()
            .map(|&x| {
                let scaled = x / self.hbar;
                let rounded = scaled.round();
                if (scaled - rounded).abs() > LATTICE_TOL || !scaled.is_finite() {
                    Err(Error::Domain(format!("{x} is not on the lattice with spacing {}", self.hbar)))
                } else {
                    Ok(rounded as i64)
                }
            })
            .collect()
    }

    pub fn point_from_coords(&self, z: &[i64]) -> Vec<f64> {
        z.iter().map(|&c| self.hbar * c as f64).collect()
    }
}

/// A box `[-R, R]ⁿ` of integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxTruncation {
    pub radius: usize,
}

impl BoxTruncation {
    pub fn new(radius: usize) -> Self {
        Self { radius }
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Number of points `(2R+1)ⁿ`.
    pub fn size(&self, dim: usize) -> usize {
        self.side().pow(dim as u32)
    }

    pub fn contains_coords(&self, z: &[i64]) -> bool {
        let r = self.radius as i64;
        z.iter().all(|&c| (-r..=r).contains(&c))
    }

    /// Linear index of integer coordinates, `None` outside the box.
    pub fn index_of_coords(&self, z: &[i64]) -> Option<usize> {
        if !self.contains_coords(z) {
            return None;
        }
        let side = self.side();
        let r = self.radius as i64;
        Some(z.iter().fold(0usize, |acc, &c| acc * side + (c + r) as usize))
    }

    /// Integer coordinates of the `index`-th point; `index` must be in range.
    pub fn coords_of_index(&self, dim: usize, mut index: usize) -> Vec<i64> {
        let side = self.side();
        let r = self.radius as i64;
        let mut z = vec![0i64; dim];
        for slot in z.iter_mut().rev() {
            *slot = (index % side) as i64 - r;
            index /= side;
        }
        z
    }

    /// All integer coordinates of the box, in lexicographic order.
    pub fn coords(&self, dim: usize) -> Vec<Vec<i64>> {
        (0..self.size(dim)).map(|i| self.coords_of_index(dim, i)).collect()
    }
}

/// The `(2R+1)ⁿ` lattice points of the box, lexicographically ordered.
pub fn enumerate_box(spec: &LatticeSpec, bx: &BoxTruncation) -> Vec<Vec<f64>> {
    bx.coords(spec.dim()).iter().map(|z| spec.point_from_coords(z)).collect()
}

/// Matrix index of a lattice point inside the box.
pub fn index_of(spec: &LatticeSpec, bx: &BoxTruncation, point: &[f64]) -> Result<usize> {
    let z = spec.coords_of(point)?;
    bx.index_of_coords(&z)
        .ok_or_else(|| Error::Domain(format!("point {point:?} lies outside the box of radius {}", bx.radius)))
}

/// Lattice point at a matrix index.
pub fn point_of(spec: &LatticeSpec, bx: &BoxTruncation, index: usize) -> Result<Vec<f64>> {
    let size = bx.size(spec.dim());
    if index >= size {
        return Err(Error::Domain(format!("index {index} out of range for box of size {size}")));
    }
    Ok(spec.point_from_coords(&bx.coords_of_index(spec.dim(), index)))
}

/// Euclidean norm of a lattice point.
pub fn norm(point: &[f64]) -> f64 {
    point.iter().map(|x| x * x).sum::<f64>().sqrt()
}
