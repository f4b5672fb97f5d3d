//! Toroidal Fourier coefficients
//! (F σ)(k, m) = ∫_{𝕋ⁿ} σ(k, θ) e^{−2πi m·θ/ħ} dθ
//! and sampled decay constants of the coefficient bound
//! |(F σ)(k, m)| ≤ C (1+|k|)^{μ+2Q̃δ} (1 + |m|/ħ)^{−2Q̃}.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, BoxTruncation, LatticeSpec};
use crate::symbols::Symbol;

/// Default number of uniform quadrature nodes per torus axis.
pub const DEFAULT_SAMPLES: usize = 64;

/// How coefficients are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientSource {
    /// Closed form when the symbol has one, else quadrature with the default node count.
    Auto,
    /// Always use the trapezoidal rule with this many nodes per axis.
    Quadrature(usize),
}

/// Trapezoidal rule on the uniform `N`-point grid per axis, evaluated for
/// several integer frequencies at once. Exact for trigonometric polynomials
/// whose per-axis degree stays below `N/2`.
pub fn quadrature_coefficients(sym: &Symbol, k: &[f64], freqs: &[Vec<i64>], samples: usize) -> Vec<Complex64> {
    let dim = k.len();
    let total = samples.pow(dim as u32);
    // samples of σ(k, ·) on the grid, last axis fastest
    let mut values = Vec::with_capacity(total);
    let mut node = vec![0usize; dim];
    let mut theta = vec![0.0; dim];
    for _ in 0..total {
        for (t, &j) in theta.iter_mut().zip(&node) {
            *t = j as f64 / samples as f64;
        }
        values.push(sym.eval(k, &theta));
        for axis in (0..dim).rev() {
            node[axis] += 1;
            if node[axis] < samples {
                break;
            }
            node[axis] = 0;
        }
    }
    // forward transform along each axis in turn
    let fft = FftPlanner::new().plan_fft_forward(samples);
    let mut line = vec![Complex64::new(0.0, 0.0); samples];
    for axis in 0..dim {
        let stride = samples.pow((dim - 1 - axis) as u32);
        let block = stride * samples;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    values[base + i * stride] = *v;
                }
            }
        }
    }
    let scale = 1.0 / total as f64;
    let n = samples as i64;
    freqs
        .iter()
        .map(|d| {
            let flat = d.iter().fold(0usize, |acc, &dj| acc * samples + dj.rem_euclid(n) as usize);
            values[flat] * scale
        })
        .collect()
}

/// Coefficients at integer frequencies `freqs` (each `m/ħ`).
pub fn coefficients_at(sym: &Symbol, k: &[f64], freqs: &[Vec<i64>], source: CoefficientSource) -> Vec<Complex64> {
    let samples = match source {
        CoefficientSource::Auto => {
            let closed: Option<Vec<Complex64>> = freqs.iter().map(|d| sym.closed_form_coefficient(k, d)).collect();
            if let Some(values) = closed {
                return values;
            }
            DEFAULT_SAMPLES
        }
        CoefficientSource::Quadrature(n) => n,
    };
    quadrature_coefficients(sym, k, freqs, samples)
}

/// (F σ)(k, m) for a lattice point `m`.
pub fn toroidal_coefficient(sym: &Symbol, spec: &LatticeSpec, k: &[f64], m: &[f64]) -> Result<Complex64> {
    let freq = spec.coords_of(m)?;
    Ok(coefficients_at(sym, k, &[freq], CoefficientSource::Auto)[0])
}

/// One row of a coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub k: Vec<f64>,
    pub m: Vec<f64>,
    pub value: Complex64,
}

/// Coefficients for every `k` in a box and every `|m/ħ|∞ ≤ freq_radius`,
/// ordered by `k` then `m`, both lexicographically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub dim: usize,
    pub entries: Vec<CoefficientEntry>,
}

impl CoefficientTable {
    /// CSV with columns `k_1..k_n, m_1..m_n, re, im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim)
            .map(|i| format!("k_{i}"))
            .chain((1..=self.dim).map(|i| format!("m_{i}")))
            .chain(["re".to_string(), "im".to_string()])
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for e in &self.entries {
            for x in e.k.iter().chain(&e.m) {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{},{}", e.value.re, e.value.im);
        }
        out
    }
}

pub fn coefficient_table(
    sym: &Symbol,
    spec: &LatticeSpec,
    k_box: &BoxTruncation,
    freq_radius: usize,
    source: CoefficientSource,
) -> CoefficientTable {
    let dim = spec.dim();
    let freq_box = BoxTruncation::new(freq_radius);
    let freqs = freq_box.coords(dim);
    let ks = lattice::enumerate_box(spec, k_box);
    let rows: Vec<Vec<CoefficientEntry>> = ks
        .par_iter()
        .map(|k| {
            coefficients_at(sym, k, &freqs, source)
                .into_iter()
                .zip(&freqs)
                .map(|(value, d)| CoefficientEntry {
                    k: k.clone(),
                    m: spec.point_from_coords(d),
                    value,
                })
                .collect()
        })
        .collect();
    CoefficientTable {
        dim,
        entries: rows.into_iter().flatten().collect(),
    }
}

/// Sampled supremum of the normalized coefficient bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub q_tilde: usize,
    /// max |(F σ)(k, m)| (1 + |m|/ħ)^{2Q̃} (1+|k|)^{−(μ+2Q̃δ)} over the sample.
    pub constant: f64,
    pub k_radius: usize,
    pub m_radius: usize,
    pub mu: f64,
    pub delta: f64,
    /// Exact frequency support radius of the symbol, when known.
    pub frequency_support: Option<u64>,
}

impl DecayReport {
    /// Exponent μ + 2Q̃δ of the k-factor.
    pub fn k_exponent(&self) -> f64 {
        self.mu + 2.0 * self.q_tilde as f64 * self.delta
    }
}

pub fn estimate_decay_constant(
    sym: &Symbol,
    spec: &LatticeSpec,
    q_tilde: usize,
    k_radius: usize,
    m_radius: usize,
    source: CoefficientSource,
) -> Result<DecayReport> {
    if q_tilde > sym.deriv_order_available() {
        return Err(Error::Capability(format!(
            "Q̃ = {q_tilde} exceeds the {} θ-derivatives of `{}`",
            sym.deriv_order_available(),
            sym.label()
        )));
    }
    let order = sym.order();
    let k_exp = order.mu + 2.0 * q_tilde as f64 * order.delta;
    let table = coefficient_table(sym, spec, &BoxTruncation::new(k_radius), m_radius, source);
    let hbar = spec.hbar();
    let constant = table
        .entries
        .iter()
        .map(|e| {
            let mw = (1.0 + lattice::norm(&e.m) / hbar).powi(2 * q_tilde as i32);
            let kw = (1.0 + lattice::norm(&e.k)).powf(-k_exp);
            e.value.norm() * mw * kw
        })
        .fold(0.0, f64::max);
    Ok(DecayReport {
        q_tilde,
        constant,
        k_radius,
        m_radius,
        mu: order.mu,
        delta: order.delta,
        frequency_support: sym.frequency_support(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn difference_coefficients() {
        let s = LatticeSpec::new(0.5, 1).unwrap();
        let d = difference_symbol();
        for k in [-1.0, 0.0, 2.5] {
            assert_eq!(toroidal_coefficient(&d, &s, &[k], &[0.5]).unwrap(), c(1.0));
            assert_eq!(toroidal_coefficient(&d, &s, &[k], &[0.0]).unwrap(), c(-1.0));
            assert_eq!(toroidal_coefficient(&d, &s, &[k], &[1.0]).unwrap(), c(0.0));
        }
        assert!(toroidal_coefficient(&d, &s, &[0.0], &[0.3]).is_err());
    }

    #[test]
    fn constant_orthogonality() {
        let s = LatticeSpec::new(1.0, 2).unwrap();
        let sym = constant_symbol(Complex64::new(1.5, 0.5));
        let freqs = BoxTruncation::new(2).coords(2);
        let q = quadrature_coefficients(&sym, &[1.0, 0.0], &freqs, 16);
        for (d, v) in freqs.iter().zip(q) {
            let expected = if d.iter().all(|&x| x == 0) {
                Complex64::new(1.5, 0.5)
            } else {
                c(0.0)
            };
            assert!((v - expected).norm() < 1e-14);
        }
        assert_eq!(toroidal_coefficient(&sym, &s, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), c(0.0));
    }

    #[test]
    fn schrodinger_coefficients_by_quadrature() {
        let s = LatticeSpec::new(1.0, 1).unwrap();
        let sym = schrodinger_symbol(s, polynomial_potential(1.0, 1), 0.0);
        let q = quadrature_coefficients(&sym, &[2.0], &[vec![0], vec![1], vec![-1], vec![2]], 64);
        assert!((q[0] - c(6.0)).norm() < 1e-13);
        assert!((q[1] - c(-1.0)).norm() < 1e-13);
        assert!((q[2] - c(-1.0)).norm() < 1e-13);
        assert!(q[3].norm() < 1e-13);
    }

    #[test]
    fn table_shape_and_values() {
        let s = LatticeSpec::new(1.0, 1).unwrap();
        let t = coefficient_table(&difference_symbol(), &s, &BoxTruncation::new(3), 2, CoefficientSource::Auto);
        assert_eq!(t.entries.len(), 7 * 5);
        for k in t.entries.chunks(5) {
            assert_eq!(k.iter().filter(|e| e.value.norm() > 0.0).count(), 2);
        }
        let z = coefficient_table(
            &constant_symbol(c(0.0)),
            &s,
            &BoxTruncation::new(2),
            2,
            CoefficientSource::Quadrature(64),
        );
        assert!(z.entries.iter().all(|e| e.value == c(0.0)));

        let t = coefficient_table(
            &decaying_test_symbol(3.0, 2.0, 1.0),
            &s,
            &BoxTruncation::new(0),
            1,
            CoefficientSource::Quadrature(64),
        );
        let at = |m: f64| t.entries.iter().find(|e| e.m == vec![m]).unwrap().value;
        assert!((at(1.0) - c(0.5)).norm() < 1e-14);
        assert!((at(0.0) - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn table_csv_header() {
        let s = LatticeSpec::new(1.0, 2).unwrap();
        let t = coefficient_table(&difference_symbol(), &s, &BoxTruncation::new(0), 0, CoefficientSource::Auto);
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k_1,k_2,m_1,m_2,re,im");
        assert_eq!(lines.next().unwrap(), "0,0,0,0,-1,0");
    }

    #[test]
    fn decay_constants() {
        let s = LatticeSpec::new(1.0, 1).unwrap();
        let r = estimate_decay_constant(&difference_symbol(), &s, 1, 3, 3, CoefficientSource::Auto).unwrap();
        assert!((r.constant - 4.0).abs() < 1e-14);
        let r = estimate_decay_constant(&constant_symbol(Complex64::new(0.0, -3.0)), &s, 0, 3, 3, CoefficientSource::Auto).unwrap();
        assert!((r.constant - 3.0).abs() < 1e-14);
        let r = estimate_decay_constant(&decaying_test_symbol(3.0, 2.0, 1.0), &s, 0, 4, 4, CoefficientSource::Auto).unwrap();
        assert!((r.constant - 2.0).abs() < 1e-12);
        let fd = difference_symbol().with_finite_difference_derivatives(1);
        assert!(estimate_decay_constant(&fd, &s, 2, 1, 1, CoefficientSource::Auto).is_err());
    }

    #[test]
    fn decay_constant_monotone_in_radii() {
        let s = LatticeSpec::new(1.0, 1).unwrap();
        let sym = decaying_test_symbol(1.5, 1.0, 3.0);
        let mut last = 0.0;
        for r in 0..6 {
            let rep = estimate_decay_constant(&sym, &s, 1, r, r, CoefficientSource::Auto).unwrap();
            assert!(rep.constant >= last);
            last = rep.constant;
        }
    }
}
