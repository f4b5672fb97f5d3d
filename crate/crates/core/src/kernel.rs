//! Truncated kernel matrices A(k, m) = (F σ)(k, m − k) of operators T_σ.
//!
//! Rows and columns follow the lexicographic box order of
//! [`crate::lattice`]. Truncation is plain restriction to the box.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{self, CoefficientSource};
use crate::lattice::{BoxTruncation, LatticeSpec};
use crate::symbols::Symbol;

/// Where a kernel came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub symbol: String,
    pub source: String,
}

/// Dense truncated kernel over a box of lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    spec: LatticeSpec,
    truncation: BoxTruncation,
    entries: DMatrix<Complex64>,
    provenance: Provenance,
}

impl KernelMatrix {
    pub fn from_entries(spec: LatticeSpec, truncation: BoxTruncation, entries: DMatrix<Complex64>, provenance: Provenance) -> Result<Self> {
        let size = truncation.size(spec.dim());
        if entries.nrows() != size || entries.ncols() != size {
            return Err(Error::Domain(format!(
                "matrix is {}x{}, box needs {size}x{size}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain("kernel entries must be finite".into()));
        }
        Ok(Self {
            spec,
            truncation,
            entries,
            provenance,
        })
    }

    /// Real matrix given row by row.
    pub fn from_real_rows(spec: LatticeSpec, truncation: BoxTruncation, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("rows must form a square matrix".into()));
        }
        let entries = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::from_entries(
            spec,
            truncation,
            entries,
            Provenance {
                symbol: "explicit".into(),
                source: "rows".into(),
            },
        )
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn truncation(&self) -> &BoxTruncation {
        &self.truncation
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    pub fn real_part(&self) -> DMatrix<f64> {
        self.entries.map(|z| z.re)
    }

    /// (K + Kᴴ)/2.
    pub fn hermitian_part(&self) -> KernelMatrix {
        let adj = self.entries.adjoint();
        let entries = (&self.entries + adj).map(|z| z * 0.5);
        KernelMatrix {
            spec: self.spec,
            truncation: self.truncation,
            entries,
            provenance: Provenance {
                symbol: self.provenance.symbol.clone(),
                source: format!("hermitian part of {}", self.provenance.source),
            },
        }
    }

    /// Induced ∞-norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Nonzero entries as CSV `row,col,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for i in 0..self.size() {
            for j in 0..self.size() {
                let z = self.entries[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    let _ = writeln!(out, "{i},{j},{},{}", z.re, z.im);
                }
            }
        }
        out
    }

    /// Little-endian layout: `n: i64`, `hbar: f64`, `R: i64`, then the
    /// `(2R+1)ⁿ × (2R+1)ⁿ` entries row-major as `(re, im)` pairs of f64.
    pub fn to_binary(&self) -> Vec<u8> {
        let size = self.size();
        let mut out = Vec::with_capacity(24 + 16 * size * size);
        out.extend_from_slice(&(self.spec.dim() as i64).to_le_bytes());
        out.extend_from_slice(&self.spec.hbar().to_le_bytes());
        out.extend_from_slice(&(self.truncation.radius as i64).to_le_bytes());
        for i in 0..size {
            for j in 0..size {
                let z = self.entries[(i, j)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * i..8 * i + 8)
                .map(|s| s.try_into().expect("slice of length 8"))
                .ok_or_else(|| Error::Domain("truncated kernel file".into()))
        };
        let dim = i64::from_le_bytes(word(0)?);
        let hbar = f64::from_le_bytes(word(1)?);
        let radius = i64::from_le_bytes(word(2)?);
        if dim < 1 || radius < 0 {
            return Err(Error::Domain("bad kernel header".into()));
        }
        let spec = LatticeSpec::new(hbar, dim as usize)?;
        let bx = BoxTruncation::new(radius as usize);
        let size = bx.size(spec.dim());
        if bytes.len() != 24 + 16 * size * size {
            return Err(Error::Domain(format!(
                "kernel file has {} bytes, header implies {}",
                bytes.len(),
                24 + 16 * size * size
            )));
        }
        let mut entries = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in 0..size {
                let w = 3 + 2 * (i * size + j);
                entries[(i, j)] = Complex64::new(f64::from_le_bytes(word(w)?), f64::from_le_bytes(word(w + 1)?));
            }
        }
        Self::from_entries(
            spec,
            bx,
            entries,
            Provenance {
                symbol: "binary".into(),
                source: "file".into(),
            },
        )
    }
}

/// Assemble the truncated kernel of T_σ on a box.
pub fn assemble(sym: &Symbol, spec: &LatticeSpec, bx: &BoxTruncation, source: CoefficientSource) -> KernelMatrix {
    let dim = spec.dim();
    let coords = bx.coords(dim);
    let rows: Vec<Vec<Complex64>> = coords
        .par_iter()
        .map(|zk| {
            let k = spec.point_from_coords(zk);
            let freqs: Vec<Vec<i64>> = coords.iter().map(|zm| zm.iter().zip(zk).map(|(m, k)| m - k).collect()).collect();
            fourier::coefficients_at(sym, &k, &freqs, source)
        })
        .collect();
    let size = coords.len();
    let entries = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
    let source = match source {
        CoefficientSource::Auto => "auto".to_string(),
        CoefficientSource::Quadrature(n) => format!("quadrature({n})"),
    };
    KernelMatrix {
        spec: *spec,
        truncation: *bx,
        entries,
        provenance: Provenance {
            symbol: sym.label().to_string(),
            source: format!("assembled R={} via {source}", bx.radius),
        },
    }
}

/// Matrix-vector product in box ordering.
pub fn apply(kernel: &KernelMatrix, a: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.len() != kernel.size() {
        return Err(Error::Domain(format!(
            "sequence has length {}, box has {} points",
            a.len(),
            kernel.size()
        )));
    }
    Ok(kernel
        .entries
        .row_iter()
        .map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum())
        .collect())
}

/// D + R with D the diagonal and R the zero-diagonal remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSplit {
    pub diagonal: Vec<Complex64>,
    pub residue: KernelMatrix,
}

pub fn split_diagonal(kernel: &KernelMatrix) -> DiagonalSplit {
    let diagonal: Vec<Complex64> = kernel.entries.diagonal().iter().copied().collect();
    let mut residue = kernel.clone();
    residue.entries.fill_diagonal(Complex64::new(0.0, 0.0));
    residue.provenance.source = format!("off-diagonal part of {}", kernel.provenance.source);
    DiagonalSplit { diagonal, residue }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermitianCheck {
    pub is_hermitian: bool,
    pub max_asymmetry: f64,
}

/// max |A(k, m) − conj A(m, k)| against a tolerance.
pub fn hermitian_check(kernel: &KernelMatrix, tol: f64) -> HermitianCheck {
    let n = kernel.size();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((kernel.entries[(i, j)] - kernel.entries[(j, i)].conj()).norm());
        }
    }
    HermitianCheck {
        is_hermitian: worst <= tol,
        max_asymmetry: worst,
    }
}
