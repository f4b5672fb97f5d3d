//! Hermitian eigendecomposition of kernels, the diagonal eigenvalue
//! approximation with Weyl-bound and sandwich checks, and residue norms.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::criteria::{Verdict, VerdictRecord};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelMatrix};
use crate::lattice;
use crate::symbols::SymbolOrder;

/// Tolerance of the Hermitian precondition.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Slack allowed on the Weyl and sandwich inequalities.
pub const INEQUALITY_SLACK: f64 = 1e-8;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub radius: usize,
    pub dim: usize,
    pub hbar: f64,
}

impl Truncation {
    fn of(k: &KernelMatrix) -> Self {
        Self {
            radius: k.truncation().radius,
            dim: k.spec().dim(),
            hbar: k.spec().hbar(),
        }
    }
}

/// Sorted spectrum of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column j pairs with `eigenvalues[j]`.
    pub eigenvectors: Option<DMatrix<Complex64>>,
    pub truncation: Option<Truncation>,
    /// max_j ‖K v_j − λ_j v_j‖∞, when vectors were computed.
    pub residual_norm: Option<f64>,
    /// Per-eigenvalue convergence flags, when a convergence study produced them.
    pub converged: Option<Vec<bool>>,
}

impl SpectralResult {
    /// Wrap a plain list of eigenvalues (sorted here).
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            eigenvectors: None,
            truncation: None,
            residual_norm: None,
            converged: None,
        }
    }

    /// CSV `index,eigenvalue`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (j, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{j},{l}");
        }
        out
    }

    /// ‖VᴴV − I‖ as a max-abs entry, when vectors are present.
    pub fn orthonormality_defect(&self) -> Option<f64> {
        self.eigenvectors.as_ref().map(|v| {
            let g = v.adjoint() * v;
            let n = g.nrows();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
                }
            }
            worst
        })
    }
}

fn is_real(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigenpairs of a Hermitian matrix, ascending, with the largest-magnitude
/// component of every eigenvector made real and positive.
pub fn eigh_matrix(m: &DMatrix<Complex64>, want_vectors: bool) -> (Vec<f64>, Option<DMatrix<Complex64>>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), want_vectors.then(|| DMatrix::zeros(0, 0)));
    }
    let (values, vectors) = if is_real(m) {
        let a = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        self_adjoint_eigen(&a, want_vectors, |x| x, |x| Complex64::new(x, 0.0))
    } else {
        let a = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| m[(i, j)]);
        self_adjoint_eigen(&a, want_vectors, |x: faer::c64| x.re, |x| x)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vectors = vectors.map(|v| {
        let mut out = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            let col = v.column(src);
            // first index of maximal modulus
            let mut pivot = 0;
            for i in 1..n {
                if col[i].norm() > col[pivot].norm() {
                    pivot = i;
                }
            }
            let phase = if col[pivot].norm() > 0.0 {
                col[pivot].conj() / col[pivot].norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            for i in 0..n {
                out[(i, dst)] = col[i] * phase;
            }
            out[(pivot, dst)] = Complex64::new(out[(pivot, dst)].norm(), 0.0);
        }
        out
    });
    (sorted, vectors)
}

/// Dense self-adjoint eigensolve of the lower triangle, single-threaded so
/// that results do not depend on the worker count.
fn self_adjoint_eigen<T: faer::traits::ComplexField<Real = f64>>(
    a: &faer::Mat<T>,
    want_vectors: bool,
    real: impl Fn(T) -> f64,
    entry: impl Fn(T) -> Complex64,
) -> (Vec<f64>, Option<DMatrix<Complex64>>) {
    static SEQUENTIAL: std::sync::Once = std::sync::Once::new();
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    let n = a.nrows();
    if want_vectors {
        let eig = a.self_adjoint_eigen(faer::Side::Lower).expect("self-adjoint eigensolver converges");
        let (s, u) = (eig.S(), eig.U());
        let values = (0..n).map(|j| real(s[j].clone())).collect();
        let vectors = DMatrix::from_fn(n, n, |i, j| entry(u[(i, j)].clone()));
        (values, Some(vectors))
    } else {
        let values = a
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("self-adjoint eigensolver converges");
        (values, None)
    }
}

fn residual_of(m: &DMatrix<Complex64>, values: &[f64], vectors: &DMatrix<Complex64>) -> f64 {
    let mv = m * vectors;
    let mut worst: f64 = 0.0;
    for (j, &l) in values.iter().enumerate() {
        for i in 0..m.nrows() {
            worst = worst.max((mv[(i, j)] - vectors[(i, j)] * l).norm());
        }
    }
    worst
}

/// Full spectrum of a Hermitian kernel.
pub fn eigendecompose_hermitian(k: &KernelMatrix, want_vectors: bool) -> Result<SpectralResult> {
    let check = kernel::hermitian_check(k, HERMITIAN_TOL);
    if !check.is_hermitian {
        return Err(Error::Domain(format!(
            "kernel is not Hermitian (max asymmetry {:e})",
            check.max_asymmetry
        )));
    }
    let (eigenvalues, eigenvectors) = eigh_matrix(k.entries(), want_vectors);
    let residual_norm = eigenvectors.as_ref().map(|v| residual_of(k.entries(), &eigenvalues, v));
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        truncation: Some(Truncation::of(k)),
        residual_norm,
        converged: None,
    })
}

/// Spectral norm of a matrix: via its eigenvalues when Hermitian, otherwise
/// by power iteration on MᴴM.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let hermitian = (0..n).all(|i| (i..n).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= HERMITIAN_TOL));
    if hermitian {
        let (values, _) = eigh_matrix(m, false);
        return values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
    }
    let gram = m.adjoint() * m;
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * (i as f64 + 1.0).sin(), 0.0));
    v /= Complex64::new(v.norm(), 0.0);
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = &gram * &v;
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(next, 0.0);
        let done = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate.sqrt()
}

/// ‖R‖₂ of the off-diagonal part of a kernel.
pub fn residue_norm(k: &KernelMatrix) -> f64 {
    spectral_norm(kernel::split_diagonal(k).residue.entries())
}

/// Off-diagonal spectral norm of a bare matrix.
pub fn residue_norm_matrix(m: &DMatrix<Complex64>) -> f64 {
    let mut r = m.clone();
    r.fill_diagonal(Complex64::new(0.0, 0.0));
    spectral_norm(&r)
}

/// Least-squares line `y ≈ slope·x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagApproxRecord {
    pub k: Vec<f64>,
    /// D(k), the θ-average of the symbol at k.
    pub diag_value: f64,
    /// Eigenvalue matched by sorted order.
    pub eigenvalue: f64,
    /// eigenvalue − diag_value.
    pub residual: f64,
    /// |⟨e_k, φ⟩| for the matched eigenvector.
    pub overlap: f64,
    /// overlap < 1/2, i.e. ‖φ − e_k‖ > 1 for every phase of φ.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagApproxReport {
    pub records: Vec<DiagApproxRecord>,
    /// Slope of log|Δλ| against log(1+|k|) on the outer half of the box.
    pub fitted_exponent: Option<f64>,
    pub fit_intercept: Option<f64>,
    pub residue_norm: f64,
    pub max_residual: f64,
    /// max |Δλ| ≤ ‖R‖₂ + slack.
    pub weyl_bound_holds: bool,
    pub hypothesis: VerdictRecord,
    pub flagged_pairs: usize,
}

impl DiagApproxReport {
    /// CSV `index,k_1..k_n,eigenvalue,diag,residual`.
    pub fn to_csv(&self) -> String {
        let dim = self.records.first().map_or(1, |r| r.k.len());
        let mut out = String::from("index,");
        for i in 1..=dim {
            let _ = write!(out, "k_{i},");
        }
        out.push_str("eigenvalue,diag,residual\n");
        for (j, r) in self.records.iter().enumerate() {
            let _ = write!(out, "{j},");
            for x in &r.k {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{},{},{}", r.eigenvalue, r.diag_value, r.residual);
        }
        out
    }

    /// JSON summary without the per-point records.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "fitted_exponent": self.fitted_exponent,
            "fit_intercept": self.fit_intercept,
            "residue_norm": self.residue_norm,
            "max_residual": self.max_residual,
            "weyl_bound_holds": self.weyl_bound_holds,
            "hypothesis": self.hypothesis,
            "flagged_pairs": self.flagged_pairs,
            "points": self.records.len(),
        }))
        .expect("summary serializes")
    }
}

/// Compare the spectrum of a Hermitian kernel with its diagonal, matching
/// both by sorted order.
pub fn diagonal_approximation(k: &KernelMatrix, order: &SymbolOrder) -> Result<DiagApproxReport> {
    let spectrum = eigendecompose_hermitian(k, true)?;
    let vectors = spectrum.eigenvectors.as_ref().expect("vectors requested");
    let n = k.spec().dim() as f64;
    let threshold = -(n + 2.0) * order.delta;
    let hypothesis = VerdictRecord {
        verdict: if order.mu < threshold {
            Verdict::Holds
        } else {
            Verdict::NotApplicable
        },
        inequality: "mu < -(n+2) delta".into(),
        lhs: order.mu,
        threshold,
    };

    let diag: Vec<f64> = k.entries().diagonal().iter().map(|z| z.re).collect();
    let mut by_value: Vec<usize> = (0..diag.len()).collect();
    by_value.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));

    let records: Vec<DiagApproxRecord> = by_value
        .iter()
        .zip(&spectrum.eigenvalues)
        .enumerate()
        .map(|(j, (&idx, &eigenvalue))| {
            let overlap = vectors[(idx, j)].norm();
            DiagApproxRecord {
                k: lattice::point_of(k.spec(), k.truncation(), idx).expect("index in box"),
                diag_value: diag[idx],
                eigenvalue,
                residual: eigenvalue - diag[idx],
                overlap,
                flagged: overlap < 0.5,
            }
        })
        .collect();

    let residue_norm = residue_norm(k);
    let max_residual = records.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);

    let fit = fit_outer_half(records.iter());

    Ok(DiagApproxReport {
        flagged_pairs: records.iter().filter(|r| r.flagged).count(),
        records,
        fitted_exponent: fit.map(|f| f.0),
        fit_intercept: fit.map(|f| f.1),
        residue_norm,
        max_residual,
        weyl_bound_holds: max_residual <= residue_norm + INEQUALITY_SLACK,
        hypothesis,
    })
}

/// Fit log|Δλ| against log(1+|k|) over the half of the given records with
/// the largest |k|; zero residuals are skipped.
pub fn fit_outer_half<'a, I>(records: I) -> Option<(f64, f64)>
where
    I: IntoIterator<Item = &'a DiagApproxRecord>,
{
    let mut by_radius: Vec<&DiagApproxRecord> = records.into_iter().collect();
    by_radius.sort_by(|a, b| lattice::norm(&b.k).total_cmp(&lattice::norm(&a.k)));
    let outer = &by_radius[..by_radius.len().div_ceil(2)];
    let (xs, ys): (Vec<f64>, Vec<f64>) = outer
        .iter()
        .filter(|r| r.residual != 0.0)
        .map(|r| ((1.0 + lattice::norm(&r.k)).ln(), r.residual.abs().ln()))
        .unzip();
    least_squares_line(&xs, &ys)
}

/// Relative agreement between the residual at radius R and at 2R for a
/// point to count as free of truncation effects.
pub const STABILITY_RTOL: f64 = 0.1;

/// Diagonal approximation at radius R, with the residual exponent refitted
/// on points whose residual is unchanged (to [`STABILITY_RTOL`]) when the
/// box is doubled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableDiagApprox {
    pub report: DiagApproxReport,
    /// Per record of `report`: residual agrees with the doubled box.
    pub stable: Vec<bool>,
    pub stable_exponent: Option<f64>,
    pub stable_intercept: Option<f64>,
}

/// Runs [`diagonal_approximation`] on `kernel_at(R)` and `kernel_at(2R)`,
/// which must be Hermitian kernels of the same operator on nested boxes.
pub fn stable_diagonal_approximation<F>(radius: usize, order: &SymbolOrder, kernel_at: F) -> Result<StableDiagApprox>
where
    F: Fn(usize) -> KernelMatrix,
{
    let report = diagonal_approximation(&kernel_at(radius), order)?;
    let doubled = diagonal_approximation(&kernel_at(2 * radius), order)?;
    // ±k ties keep their relative order in both boxes, so matching the n-th
    // occurrence of a point is unambiguous
    let mut lookup: std::collections::HashMap<Vec<i64>, f64> = std::collections::HashMap::new();
    for r in &doubled.records {
        let key: Vec<i64> = r.k.iter().map(|x| (x * 1e9).round() as i64).collect();
        lookup.insert(key, r.residual);
    }
    let stable: Vec<bool> = report
        .records
        .iter()
        .map(|r| {
            let key: Vec<i64> = r.k.iter().map(|x| (x * 1e9).round() as i64).collect();
            lookup
                .get(&key)
                .is_some_and(|&big| (r.residual - big).abs() <= STABILITY_RTOL * big.abs())
        })
        .collect();
    let fit = fit_outer_half(report.records.iter().zip(&stable).filter(|(_, &s)| s).map(|(r, _)| r));
    Ok(StableDiagApprox {
        stable,
        stable_exponent: fit.map(|f| f.0),
        stable_intercept: fit.map(|f| f.1),
        report,
    })
}

/// min_k̃ |λ̃ − D(k̃)| ≤ ‖Dφ − λ̃φ‖ ≤ min(max_k̃ |λ̃ − D(k̃)|, ‖R‖₂) for one eigenpair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub eigenvalue: f64,
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Sandwich chain for every eigenpair of a precomputed spectrum.
pub fn sandwich_check_with(k: &KernelMatrix, spectrum: &SpectralResult) -> Result<Vec<SandwichRecord>> {
    let vectors = spectrum
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Domain("sandwich check needs eigenvectors".into()))?;
    let diag: Vec<f64> = k.entries().diagonal().iter().map(|z| z.re).collect();
    let r_norm = residue_norm(k);
    Ok(spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let gaps: Vec<f64> = diag.iter().map(|d| (l - d).abs()).collect();
            let lower = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let max_gap = gaps.iter().copied().fold(0.0, f64::max);
            let middle = (0..diag.len())
                .map(|i| (vectors[(i, j)] * (diag[i] - l)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let upper = max_gap.min(r_norm);
            SandwichRecord {
                eigenvalue: l,
                lower,
                middle,
                upper,
                holds: lower <= middle + INEQUALITY_SLACK && middle <= upper + INEQUALITY_SLACK,
            }
        })
        .collect())
}

pub fn sandwich_check(k: &KernelMatrix) -> Result<Vec<SandwichRecord>> {
    let spectrum = eigendecompose_hermitian(k, true)?;
    sandwich_check_with(k, &spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::CoefficientSource;
    use crate::kernel::assemble;
    use crate::lattice::{BoxTruncation, LatticeSpec};
    use crate::symbols::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec1() -> LatticeSpec {
        LatticeSpec::new(1.0, 1).unwrap()
    }

    fn tridiag(n: usize, diag: f64, off: f64) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag, 0.0)
            } else if i.abs_diff(j) == 1 {
                Complex64::new(off, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn eigenpairs_accurate_on_tridiagonal_kernel() {
        let sym = decaying_test_symbol(1.116211780847351, -1.4284282002447461, 0.09948602858253272);
        let k = assemble(&sym, &spec1(), &BoxTruncation::new(15), CoefficientSource::Auto).hermitian_part();
        let sp = eigendecompose_hermitian(&k, true).unwrap();
        assert!(sp.residual_norm.unwrap() <= 1e-12 * k.inf_norm());
        assert!(sandwich_check_with(&k, &sp).unwrap().iter().all(|r| r.holds));
    }

    #[test]
    fn three_by_three() {
        let k = KernelMatrix::from_real_rows(
            spec1(),
            BoxTruncation::new(1),
            &[vec![3.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 3.0]],
        )
        .unwrap();
        let r = eigendecompose_hermitian(&k, true).unwrap();
        for (got, want) in r.eigenvalues.iter().zip([1.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(r.orthonormality_defect().unwrap() < 1e-12);
        assert!(r.residual_norm.unwrap() < 1e-12);
        // phase convention
        let v = r.eigenvectors.unwrap();
        for j in 0..3 {
            let col = v.column(j);
            let pivot = (0..3).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
            assert!(col[pivot].re > 0.0 && col[pivot].im == 0.0);
        }
    }

    #[test]
    fn zero_matrix() {
        let k = assemble(
            &constant_symbol(Complex64::new(0.0, 0.0)),
            &spec1(),
            &BoxTruncation::new(3),
            CoefficientSource::Auto,
        );
        let r = eigendecompose_hermitian(&k, false).unwrap();
        assert!(r.eigenvalues.iter().all(|&l| l == 0.0));
        assert_eq!(residue_norm(&k), 0.0);
    }

    #[test]
    fn laplacian_closed_form() {
        let n = 50;
        let (vals, _) = eigh_matrix(&tridiag(n, 2.0, -1.0), false);
        for (j, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() <= 1e-10);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let k = assemble(&difference_symbol(), &spec1(), &BoxTruncation::new(2), CoefficientSource::Auto);
        assert!(matches!(eigendecompose_hermitian(&k, false), Err(Error::Domain(_))));
        assert!(diagonal_approximation(&k, &difference_symbol().order()).is_err());
    }

    #[test]
    fn complex_hermitian_path() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let (vals, vecs) = eigh_matrix(&m, true);
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        assert!(residual_of(&m, &vals, &vecs.unwrap()) < 1e-12);
    }

    #[test]
    fn residue_norms() {
        // shift matrix: all singular values 1
        let n = 50;
        let shift = DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!((spectral_norm(&shift) - 1.0).abs() < 1e-8);
        // 1-D hopping part on 41 points
        let h = assemble(
            &schrodinger_symbol(spec1(), polynomial_potential(1.0, 1), 0.0),
            &spec1(),
            &BoxTruncation::new(20),
            CoefficientSource::Auto,
        );
        assert!((residue_norm(&h) - 2.0 * (PI / 42.0).cos()).abs() < 1e-12);
        let diagonal = assemble(
            &multiplication_symbol(1.0),
            &spec1(),
            &BoxTruncation::new(5),
            CoefficientSource::Auto,
        );
        assert_eq!(residue_norm(&diagonal), 0.0);
    }

    #[test]
    fn power_iteration_matches_svd() {
        let m = DMatrix::from_fn(12, 12, |i, j| {
            Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0)
        });
        let svd = m.clone().svd(false, false);
        let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
        assert!((spectral_norm(&m) - top).abs() < 1e-6 * top);
    }

    #[test]
    fn diagonal_kernel_has_zero_residuals() {
        let k = assemble(
            &decaying_test_symbol(2.0, 1.0, 0.0),
            &spec1(),
            &BoxTruncation::new(6),
            CoefficientSource::Auto,
        );
        let rep = diagonal_approximation(&k, &decaying_test_symbol(2.0, 1.0, 0.0).order()).unwrap();
        assert!(rep.records.iter().all(|r| r.residual == 0.0));
        assert_eq!(rep.max_residual, 0.0);
        assert!(rep.weyl_bound_holds);
        assert_eq!(rep.fitted_exponent, None);
        for s in sandwich_check(&k).unwrap() {
            assert_eq!(s.lower, 0.0);
            assert!(s.middle < 1e-15);
            assert!(s.holds);
        }
    }

    #[test]
    fn schrodinger_quartic_residuals_within_hopping_norm() {
        let spec = spec1();
        let sym = schrodinger_symbol(spec, polynomial_potential(1.0, 2), 0.0);
        let k = assemble(&sym, &spec, &BoxTruncation::new(40), CoefficientSource::Auto);
        let rep = diagonal_approximation(&k, &sym.order()).unwrap();
        assert_eq!(rep.hypothesis.verdict, Verdict::NotApplicable);
        assert!(rep.max_residual <= 4.0);
        assert!(rep.weyl_bound_holds);
        let span = rep.records.last().unwrap().diag_value - rep.records[0].diag_value;
        assert!((span - 40f64.powi(4)).abs() < 1e-6);
    }

    #[test]
    fn sandwich_for_harmonic_hamiltonian() {
        let spec = spec1();
        let k = assemble(
            &schrodinger_symbol(spec, polynomial_potential(1.0, 1), 0.0),
            &spec,
            &BoxTruncation::new(20),
            CoefficientSource::Auto,
        );
        let chain = sandwich_check(&k).unwrap();
        assert_eq!(chain.len(), 41);
        let bound = 2.0 * (PI / 42.0).cos();
        for s in chain {
            assert!(s.holds, "{s:?}");
            assert!(s.middle <= bound + 1e-8);
        }
    }

    #[test]
    fn stable_fit_recovers_decay_order() {
        let spec = spec1();
        for s in [3.0, 4.0] {
            let sym = decaying_test_symbol(s, 2.0, 1.0);
            let out = stable_diagonal_approximation(40, &sym.order(), |r| {
                assemble(&sym, &spec, &BoxTruncation::new(r), CoefficientSource::Auto).hermitian_part()
            })
            .unwrap();
            let e = out.stable_exponent.unwrap();
            assert!((e + s).abs() < 0.2, "s={s}: {e}");
            // the box edge is never stable
            let edge = out.report.records.iter().position(|r| r.k[0].abs() == 40.0).unwrap();
            assert!(!out.stable[edge]);
        }
    }

    #[test]
    fn sandwich_needs_vectors() {
        let k = assemble(
            &constant_symbol(Complex64::new(1.0, 0.0)),
            &spec1(),
            &BoxTruncation::new(1),
            CoefficientSource::Auto,
        );
        let bare = eigendecompose_hermitian(&k, false).unwrap();
        assert!(matches!(sandwich_check_with(&k, &bare), Err(Error::Domain(_))));
    }

    #[test]
    fn least_squares_exact_line() {
        let xs: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let (m, b) = least_squares_line(&xs, &ys).unwrap();
        assert!((m - 3.0).abs() < 1e-12 && (b + 2.0).abs() < 1e-12);
        assert_eq!(least_squares_line(&[1.0], &[2.0]), None);
    }

    fn hermitian_kernel(vals: &[f64], radius: usize) -> KernelMatrix {
        let n = 2 * radius + 1;
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(vals[2 * (i * n + j)], vals[2 * (i * n + j) + 1]));
        let m = (&m + m.adjoint()).map(|z| z * 0.5);
        KernelMatrix::from_entries(
            spec1(),
            BoxTruncation::new(radius),
            m,
            kernel::Provenance {
                symbol: "random".into(),
                source: "test".into(),
            },
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spectral_invariants(vals in proptest::collection::vec(-4.0f64..4.0, 2 * 81)) {
            let k = hermitian_kernel(&vals, 4);
            let r = eigendecompose_hermitian(&k, true).unwrap();
            prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.orthonormality_defect().unwrap() <= 1e-8);
            prop_assert!(r.residual_norm.unwrap() <= 1e-8 * k.inf_norm());
            let trace: f64 = k.entries().diagonal().iter().map(|z| z.re).sum();
            let sum: f64 = r.eigenvalues.iter().sum();
            prop_assert!((trace - sum).abs() <= 1e-8 * (1.0 + trace.abs()));

            let rep = diagonal_approximation(&k, &SymbolOrder::new(0.0, 1.0, 0.0).unwrap()).unwrap();
            prop_assert!(rep.weyl_bound_holds);
            for s in sandwich_check_with(&k, &r).unwrap() {
                prop_assert!(s.holds);
            }
        }
    }
}
