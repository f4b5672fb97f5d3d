//! Discrete Schrödinger operators H = −ħ⁻²Δ + V + λ on ħZⁿ: assembly,
//! spectra converged under box doubling, the sorted-potential oracle, and
//! eigenvalue growth fits.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelMatrix, Provenance};
use crate::lattice::{BoxTruncation, LatticeSpec};
use crate::spectral::{self, least_squares_line, SpectralResult, Truncation};
use crate::symbols::Potential;

/// Radii (in lattice steps along each ray) at which confinement is sampled.
const CONFINEMENT_RADII: [i64; 6] = [2, 4, 8, 16, 32, 64];
/// Largest dimension for which the nonnegativity check sweeps a full box.
const FULL_SWEEP_MAX_DIM: usize = 3;

/// A potential validated as nonnegative and confining on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    potential: Potential,
    order: f64,
}

/// Directions in {−1, 0, 1}ⁿ \ {0}.
fn rays(dim: usize) -> Vec<Vec<i64>> {
    BoxTruncation::new(1)
        .coords(dim)
        .into_iter()
        .filter(|z| z.iter().any(|&c| c != 0))
        .collect()
}

impl PotentialSpec {
    /// Checks `V ≥ 0` and `V → ∞` on samples of the lattice; the order is the
    /// leading degree of the polynomial.
    pub fn new(potential: Potential, spec: &LatticeSpec) -> Result<Self> {
        let order = potential.degree();
        if order <= 0.0 {
            return Err(invalid("potential", "order must be positive"));
        }
        let dim = spec.dim();
        let v = |z: &[i64]| potential.eval(&spec.point_from_coords(z));
        if dim <= FULL_SWEEP_MAX_DIM {
            let sweep = BoxTruncation::new(8);
            if let Some(z) = sweep.coords(dim).into_iter().find(|z| v(z) < 0.0) {
                return Err(invalid("potential", format!("negative at lattice coordinates {z:?}")));
            }
        }
        let rays = rays(dim);
        let mut previous_min = f64::NEG_INFINITY;
        for &s in &CONFINEMENT_RADII {
            let values: Vec<f64> = rays.iter().map(|u| v(&u.iter().map(|c| c * s).collect::<Vec<_>>())).collect();
            if let Some(neg) = values.iter().find(|&&x| x < 0.0) {
                return Err(invalid("potential", format!("negative value {neg} at radius {s}")));
            }
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            if min <= previous_min {
                return Err(invalid(
                    "potential",
                    format!("does not grow along every ray (min {min} at radius {s})"),
                ));
            }
            previous_min = min;
        }
        Ok(Self { potential, order })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// μ, the leading degree.
    pub fn order(&self) -> f64 {
        self.order
    }
}

/// Truncated H = −ħ⁻²Δ + V + λ: diagonal 2nħ⁻² + V(k) + λ, −ħ⁻² between
/// nearest neighbors inside the box.
pub fn build_hamiltonian(spec: &LatticeSpec, potential: &Potential, bx: &BoxTruncation, shift: f64) -> KernelMatrix {
    let dim = spec.dim();
    let h2 = spec.hbar().powi(-2);
    let coords = bx.coords(dim);
    let size = coords.len();
    let mut entries = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for (i, z) in coords.iter().enumerate() {
        let k = spec.point_from_coords(z);
        entries[(i, i)] = Complex64::new(2.0 * dim as f64 * h2 + potential.eval(&k) + shift, 0.0);
        for axis in 0..dim {
            let mut nb = z.clone();
            nb[axis] += 1;
            if let Some(j) = bx.index_of_coords(&nb) {
                entries[(i, j)] = Complex64::new(-h2, 0.0);
                entries[(j, i)] = Complex64::new(-h2, 0.0);
            }
        }
    }
    KernelMatrix::from_entries(
        *spec,
        *bx,
        entries,
        Provenance {
            symbol: format!("hamiltonian(shift={shift})"),
            source: format!("stencil R={}", bx.radius),
        },
    )
    .expect("stencil entries are finite")
}

/// The `j_max` smallest diagonal entries V(k) + 2nħ⁻² + λ over the box, ascending.
pub fn weyl_oracle(spec: &LatticeSpec, potential: &Potential, bx: &BoxTruncation, j_max: usize, shift: f64) -> Vec<f64> {
    let offset = 2.0 * spec.dim() as f64 * spec.hbar().powi(-2) + shift;
    let mut values: Vec<f64> = bx
        .coords(spec.dim())
        .iter()
        .map(|z| potential.eval(&spec.point_from_coords(z)) + offset)
        .collect();
    values.sort_by(f64::total_cmp);
    values.truncate(j_max);
    values
}

/// Settings of the box-doubling convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    /// First radius; defaults to ⌈25/ħ⌉ reduced until the box fits `max_dim`.
    pub start_radius: Option<usize>,
    /// Largest matrix dimension (2R+1)ⁿ that may be diagonalized.
    pub max_dim: usize,
    pub shift: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            start_radius: None,
            max_dim: 1001,
            shift: 0.0,
        }
    }
}

/// Outcome of [`spectrum_converged`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedSpectrum {
    /// Lowest eigenvalues at the last radius, with per-eigenvalue flags.
    pub result: SpectralResult,
    /// Radius the reported values were computed at.
    pub radius_used: usize,
    /// Radii visited, in order.
    pub radii: Vec<usize>,
}

impl ConvergedSpectrum {
    pub fn all_converged(&self) -> bool {
        self.result.converged.as_ref().is_some_and(|c| c.iter().all(|&x| x))
    }

    /// CSV `j,lambda_j,converged,R_used` with 1-based j.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,lambda_j,converged,R_used\n");
        let flags = self.result.converged.as_deref().unwrap_or(&[]);
        for (j, l) in self.result.eigenvalues.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                j + 1,
                l,
                flags.get(j).copied().unwrap_or(false),
                self.radius_used
            );
        }
        out
    }
}

fn max_radius(dim: usize, max_dim: usize) -> usize {
    let mut r = 0;
    while BoxTruncation::new(r + 1).size(dim) <= max_dim {
        r += 1;
    }
    r
}

/// Lowest `j_max` eigenvalues of H, doubling the box until successive values
/// agree to `tol·(1+|λ|)` or the dimension budget is spent.
pub fn spectrum_converged(
    spec: &LatticeSpec,
    potential: &PotentialSpec,
    j_max: usize,
    tol: f64,
    options: ConvergenceOptions,
) -> Result<ConvergedSpectrum> {
    if j_max == 0 {
        return Err(invalid("j_max", "must be at least 1"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid("tol", "must be positive"));
    }
    let dim = spec.dim();
    let r_max = max_radius(dim, options.max_dim);
    if BoxTruncation::new(0).size(dim) > options.max_dim {
        return Err(invalid("max_dim", "too small for a single lattice point"));
    }
    let mut radius = options
        .start_radius
        .unwrap_or_else(|| (25.0 / spec.hbar()).ceil() as usize)
        .max(1)
        .min(r_max);

    let mut radii = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    let mut flags = vec![false; j_max];
    let mut current;
    loop {
        let h = build_hamiltonian(spec, potential.potential(), &BoxTruncation::new(radius), options.shift);
        let (values, _) = spectral::eigh_matrix(h.entries(), false);
        radii.push(radius);
        current = values;
        if let Some(prev) = &previous {
            for (j, flag) in flags.iter_mut().enumerate() {
                *flag = match (prev.get(j), current.get(j)) {
                    (Some(a), Some(b)) => (a - b).abs() < tol * (1.0 + b.abs()),
                    _ => false,
                };
            }
        }
        if flags.iter().all(|&f| f) || radius >= r_max {
            break;
        }
        previous = Some(current.clone());
        radius = (2 * radius).min(r_max);
    }
    current.truncate(j_max);
    flags.truncate(current.len());
    Ok(ConvergedSpectrum {
        result: SpectralResult {
            eigenvalues: current,
            eigenvectors: None,
            truncation: Some(Truncation {
                radius,
                dim,
                hbar: spec.hbar(),
            }),
            residual_norm: None,
            converged: Some(flags),
        },
        radius_used: radius,
        radii,
    })
}

/// Fitted growth λ_j ≈ e^{intercept} j^{slope} over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Inclusive, 1-based.
    pub j_range: (usize, usize),
    pub slope: f64,
    pub intercept: f64,
    /// For each sampled r: does λ_j ≥ C_r j^{1/r} hold on the window, with
    /// C_r fixed at the left endpoint.
    pub r_bound_satisfied: Vec<RBoundCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBoundCheck {
    pub r: f64,
    pub constant: f64,
    pub holds: bool,
    /// slope > 1/r.
    pub slope_exceeds: bool,
}

impl GrowthFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

/// Admissible r values sampled for order μ: 1, (1+1/μ)/2 and 1/μ + 0.05,
/// keeping those in (1/μ, 1].
pub fn sampled_r_values(mu: f64) -> Vec<f64> {
    let inv = 1.0 / mu;
    let mut rs: Vec<f64> = [1.0, (1.0 + inv) / 2.0, inv + 0.05]
        .into_iter()
        .filter(|&r| r > inv && r <= 1.0)
        .collect();
    rs.dedup();
    rs
}

/// Least-squares slope of log λ_j against log j over `j_range` (1-based, inclusive).
pub fn fit_growth_exponent(eigs: &SpectralResult, j_range: (usize, usize), mu: f64) -> Result<GrowthFit> {
    let (lo, hi) = j_range;
    if lo < 1 || hi <= lo || hi > eigs.eigenvalues.len() {
        return Err(Error::Domain(format!(
            "window [{lo}, {hi}] not inside the {} computed eigenvalues",
            eigs.eigenvalues.len()
        )));
    }
    if let Some(flags) = &eigs.converged {
        if let Some(j) = (lo..=hi).find(|&j| !flags[j - 1]) {
            return Err(Error::Domain(format!("eigenvalue {j} has not converged")));
        }
    }
    let window: Vec<(f64, f64)> = (lo..=hi).map(|j| (j as f64, eigs.eigenvalues[j - 1])).collect();
    if let Some((j, l)) = window.iter().find(|(_, l)| *l <= 0.0) {
        return Err(Error::Domain(format!("eigenvalue {j} = {l} is not positive")));
    }
    let xs: Vec<f64> = window.iter().map(|(j, _)| j.ln()).collect();
    let ys: Vec<f64> = window.iter().map(|(_, l)| l.ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys).ok_or_else(|| Error::Numerical("degenerate fit window".into()))?;

    let r_bound_satisfied = sampled_r_values(mu)
        .into_iter()
        .map(|r| {
            let (j0, l0) = window[0];
            let constant = l0 / j0.powf(1.0 / r);
            let holds = window.iter().all(|(j, l)| *l >= constant * j.powf(1.0 / r) * (1.0 - 1e-12));
            RBoundCheck {
                r,
                constant,
                holds,
                slope_exceeds: slope > 1.0 / r,
            }
        })
        .collect();
    Ok(GrowthFit {
        j_range,
        slope,
        intercept,
        r_bound_satisfied,
    })
}
