//! Symbols σ(k, θ) on ħZⁿ × 𝕋ⁿ and the built-in symbol families.
//!
//! Torus coordinates live in [0, 1)ⁿ and pair with integer frequencies
//! `m/ħ`, so every built-in symbol is a trigonometric polynomial of degree at
//! most one per axis. Evaluation is written directly from the defining
//! formula; closed-form Fourier coefficients are kept separately so that the
//! quadrature in [`crate::fourier`] can be checked against them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelMatrix;
use crate::lattice::{self, LatticeSpec};

/// Step of the central finite-difference fallback for θ-derivatives.
pub const FD_STEP: f64 = 1e-5;

/// `deriv_order_available` of symbols with analytic θ-derivatives.
pub const UNBOUNDED_DERIVATIVES: usize = usize::MAX;

/// Order data (μ, ρ, δ) of a symbol class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolOrder {
    pub mu: f64,
    pub rho: f64,
    pub delta: f64,
}

impl SymbolOrder {
    pub fn new(mu: f64, rho: f64, delta: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(invalid("rho", format!("must lie in [0, 1], got {rho}")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(invalid("delta", format!("must lie in [0, 1], got {delta}")));
        }
        Ok(Self { mu, rho, delta })
    }
}

/// A nonnegative polynomial potential V(k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Potential {
    /// `c·|k|^{2l}`.
    Anharmonic { coeff: f64, l: u32 },
    /// `Σ c · Π k_i^{e_i}`; each term is `(c, [e_1, .., e_n])`.
    Polynomial { terms: Vec<(f64, Vec<u32>)> },
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Polynomial { terms: Vec::new() }
    }

    pub fn eval(&self, k: &[f64]) -> f64 {
        match self {
            Potential::Anharmonic { coeff, l } => {
                let r2: f64 = k.iter().map(|x| x * x).sum();
                coeff * r2.powi(*l as i32)
            }
            Potential::Polynomial { terms } => terms
                .iter()
                .map(|(c, exps)| {
                    c * k
                        .iter()
                        .zip(exps.iter().chain(std::iter::repeat(&0)))
                        .map(|(x, &e)| x.powi(e as i32))
                        .product::<f64>()
                })
                .sum(),
        }
    }

    /// Leading total degree; `0` for the zero polynomial.
    pub fn degree(&self) -> f64 {
        match self {
            Potential::Anharmonic { coeff, l } if *coeff != 0.0 => 2.0 * *l as f64,
            Potential::Anharmonic { .. } => 0.0,
            Potential::Polynomial { terms } => terms
                .iter()
                .filter(|(c, _)| *c != 0.0)
                .map(|(_, e)| e.iter().sum::<u32>() as f64)
                .fold(0.0, f64::max),
        }
    }
}

/// The anharmonic family `V(k) = c|k|^{2l}`.
pub fn polynomial_potential(coeff: f64, l: u32) -> Potential {
    Potential::Anharmonic { coeff, l }
}

#[derive(Debug, Clone)]
pub(crate) enum SymbolKind {
    Constant(Complex64),
    Difference,
    Multiplication {
        eps: f64,
    },
    Schrodinger {
        potential: Potential,
        shift: f64,
        spec: LatticeSpec,
    },
    DecayingTest {
        s: f64,
        a: f64,
        b: f64,
    },
    FromMatrix(Arc<KernelMatrix>),
}

/// An evaluatable symbol with its order metadata.
#[derive(Debug, Clone)]
pub struct Symbol {
    kind: SymbolKind,
    order: SymbolOrder,
    deriv_order_available: usize,
    analytic_derivatives: bool,
    label: String,
}

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// σ ≡ c.
pub fn constant_symbol(c: Complex64) -> Symbol {
    Symbol::analytic(
        SymbolKind::Constant(c),
        SymbolOrder {
            mu: 0.0,
            rho: 1.0,
            delta: 0.0,
        },
        format!("constant({c})"),
    )
}

/// σ(k, θ) = e^{2πiθ₁} − 1, the forward difference `f(k+ħ) − f(k)`.
pub fn difference_symbol() -> Symbol {
    Symbol::analytic(
        SymbolKind::Difference,
        SymbolOrder {
            mu: 0.0,
            rho: 1.0,
            delta: 0.0,
        },
        "difference".into(),
    )
}

/// σ(k, θ) = |k|^ε.
pub fn multiplication_symbol(eps: f64) -> Symbol {
    Symbol::analytic(
        SymbolKind::Multiplication { eps },
        SymbolOrder {
            mu: eps,
            rho: 1.0,
            delta: 0.0,
        },
        format!("multiplication(eps={eps})"),
    )
}

/// σ(k, θ) = ħ⁻² Σ_j (2 − 2cos 2πθ_j) + V(k) + λ, the symbol of `−ħ⁻²Δ + V + λ`.
pub fn schrodinger_symbol(spec: LatticeSpec, potential: Potential, shift: f64) -> Symbol {
    let mu = potential.degree();
    let label = format!("schrodinger(hbar={}, dim={}, shift={shift})", spec.hbar(), spec.dim());
    Symbol::analytic(
        SymbolKind::Schrodinger { potential, shift, spec },
        SymbolOrder { mu, rho: 1.0, delta: 0.0 },
        label,
    )
}

/// σ(k, θ) = (1+|k|)^{−s}(a + b·cos 2πθ₁).
pub fn decaying_test_symbol(s: f64, a: f64, b: f64) -> Symbol {
    Symbol::analytic(
        SymbolKind::DecayingTest { s, a, b },
        SymbolOrder {
            mu: -s,
            rho: 1.0,
            delta: 0.0,
        },
        format!("decaying(s={s}, a={a}, b={b})"),
    )
}

/// The symbol of a finite matrix, chosen so that assembling it on the
/// matrix's own box reproduces the matrix:
/// σ(k, θ) = Σ_m K(k, m) e^{2πi (m−k)·θ/ħ}, and σ(k, ·) = 0 off the box.
pub fn symbol_from_matrix(kernel: &KernelMatrix) -> Symbol {
    let label = format!("from_matrix(R={}, dim={})", kernel.truncation().radius, kernel.spec().dim());
    Symbol::analytic(
        SymbolKind::FromMatrix(Arc::new(kernel.clone())),
        SymbolOrder {
            mu: 0.0,
            rho: 1.0,
            delta: 0.0,
        },
        label,
    )
}

impl Symbol {
    fn analytic(kind: SymbolKind, order: SymbolOrder, label: String) -> Self {
        Self {
            kind,
            order,
            deriv_order_available: UNBOUNDED_DERIVATIVES,
            analytic_derivatives: true,
            label,
        }
    }

    /// Replace the order metadata.
    pub fn with_order(mut self, order: SymbolOrder) -> Self {
        self.order = order;
        self
    }

    /// Drop the analytic θ-derivatives and serve up to `q` derivatives by
    /// central finite differences instead.
    pub fn with_finite_difference_derivatives(mut self, q: usize) -> Self {
        self.analytic_derivatives = false;
        self.deriv_order_available = q;
        self
    }

    pub fn order(&self) -> SymbolOrder {
        self.order
    }

    pub fn deriv_order_available(&self) -> usize {
        self.deriv_order_available
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// σ(k, θ).
    pub fn eval(&self, k: &[f64], theta: &[f64]) -> Complex64 {
        match &self.kind {
            SymbolKind::Constant(c) => *c,
            SymbolKind::Difference => cis(2.0 * PI * theta[0]) - 1.0,
            SymbolKind::Multiplication { eps } => Complex64::from(lattice::norm(k).powf(*eps)),
            SymbolKind::Schrodinger { potential, shift, spec } => {
                let h2 = spec.hbar().powi(-2);
                let kinetic: f64 = theta.iter().map(|t| 2.0 - 2.0 * (2.0 * PI * t).cos()).sum();
                Complex64::from(h2 * kinetic + potential.eval(k) + shift)
            }
            SymbolKind::DecayingTest { s, a, b } => {
                let w = (1.0 + lattice::norm(k)).powf(-s);
                Complex64::from(w * (a + b * (2.0 * PI * theta[0]).cos()))
            }
            SymbolKind::FromMatrix(kernel) => {
                let spec = kernel.spec();
                let Ok(row) = lattice::index_of(spec, kernel.truncation(), k) else {
                    return Complex64::new(0.0, 0.0);
                };
                let zk = kernel.truncation().coords_of_index(spec.dim(), row);
                let mut acc = Complex64::new(0.0, 0.0);
                for (col, zm) in kernel.truncation().coords(spec.dim()).iter().enumerate() {
                    let entry = kernel.entries()[(row, col)];
                    if entry == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let phase: f64 = zm.iter().zip(&zk).zip(theta).map(|((m, k), t)| (m - k) as f64 * t).sum();
                    acc += entry * cis(2.0 * PI * phase);
                }
                acc
            }
        }
    }

    /// |σ(k, θ) − σ(k, θ + e_axis)|.
    pub fn periodicity_defect(&self, k: &[f64], theta: &[f64], axis: usize) -> f64 {
        let mut shifted = theta.to_vec();
        shifted[axis] += 1.0;
        (self.eval(k, theta) - self.eval(k, &shifted)).norm()
    }

    /// Closed-form Fourier coefficient at integer frequency `freq = m/ħ`,
    /// when the family provides one.
    pub fn closed_form_coefficient(&self, k: &[f64], freq: &[i64]) -> Option<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let is_zero = freq.iter().all(|&d| d == 0);
        // frequency that is ±1 on a single axis: Some((axis, sign))
        let unit_axis = || {
            let mut nonzero = freq.iter().enumerate().filter(|(_, &d)| d != 0);
            match (nonzero.next(), nonzero.next()) {
                (Some((j, &d)), None) if d.abs() == 1 => Some((j, d)),
                _ => None,
            }
        };
        let value = match &self.kind {
            SymbolKind::Constant(c) => {
                if is_zero {
                    *c
                } else {
                    zero
                }
            }
            SymbolKind::Difference => match (is_zero, unit_axis()) {
                (true, _) => Complex64::new(-1.0, 0.0),
                (false, Some((0, 1))) => Complex64::new(1.0, 0.0),
                _ => zero,
            },
            SymbolKind::Multiplication { eps } => {
                if is_zero {
                    Complex64::from(lattice::norm(k).powf(*eps))
                } else {
                    zero
                }
            }
            SymbolKind::Schrodinger { potential, shift, spec } => {
                let h2 = spec.hbar().powi(-2);
                if is_zero {
                    Complex64::from(2.0 * spec.dim() as f64 * h2 + potential.eval(k) + shift)
                } else if unit_axis().is_some() {
                    Complex64::from(-h2)
                } else {
                    zero
                }
            }
            SymbolKind::DecayingTest { s, a, b } => {
                let w = (1.0 + lattice::norm(k)).powf(-s);
                match (is_zero, unit_axis()) {
                    (true, _) => Complex64::from(w * a),
                    (false, Some((0, _))) => Complex64::from(w * b / 2.0),
                    _ => zero,
                }
            }
            SymbolKind::FromMatrix(kernel) => {
                let spec = kernel.spec();
                let bx = kernel.truncation();
                let Ok(zk) = spec.coords_of(k) else { return Some(zero) };
                let Some(row) = bx.index_of_coords(&zk) else { return Some(zero) };
                let zm: Vec<i64> = zk.iter().zip(freq).map(|(a, d)| a + d).collect();
                match bx.index_of_coords(&zm) {
                    Some(col) => kernel.entries()[(row, col)],
                    None => zero,
                }
            }
        };
        Some(value)
    }

    /// Largest `|m/ħ|∞` at which a coefficient can be nonzero, when known exactly.
    pub fn frequency_support(&self) -> Option<u64> {
        match &self.kind {
            SymbolKind::Constant(_) | SymbolKind::Multiplication { .. } => Some(0),
            SymbolKind::Difference | SymbolKind::Schrodinger { .. } | SymbolKind::DecayingTest { .. } => Some(1),
            SymbolKind::FromMatrix(kernel) => Some(2 * kernel.truncation().radius as u64),
        }
    }

    /// D_θ^{(β)} σ(k, θ) as plain partial derivatives ∂^β/∂θ^β.
    pub fn theta_derivative(&self, k: &[f64], theta: &[f64], beta: &[usize]) -> Result<Complex64> {
        let total: usize = beta.iter().sum();
        if total > self.deriv_order_available {
            return Err(Error::Capability(format!(
                "derivative of order {total} requested, symbol `{}` provides {}",
                self.label, self.deriv_order_available
            )));
        }
        if beta.len() != theta.len() {
            return Err(Error::Domain(format!(
                "multi-index has {} entries, torus point has {}",
                beta.len(),
                theta.len()
            )));
        }
        if total == 0 {
            return Ok(self.eval(k, theta));
        }
        if !self.analytic_derivatives {
            return Ok(central_difference(|t| self.eval(k, t), theta, beta, FD_STEP));
        }
        Ok(self.analytic_derivative(k, theta, beta))
    }

    fn analytic_derivative(&self, k: &[f64], theta: &[f64], beta: &[usize]) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let twopi = 2.0 * PI;
        // single active axis, if any
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] > 0).collect();
        // d^q/dθ^q cos(2πθ) = (2π)^q cos(2πθ + qπ/2)
        let dcos = |t: f64, q: usize| twopi.powi(q as i32) * (twopi * t + q as f64 * PI / 2.0).cos();
        match &self.kind {
            SymbolKind::Constant(_) | SymbolKind::Multiplication { .. } => zero,
            SymbolKind::Difference => {
                if active == [0] {
                    Complex64::new(0.0, twopi).powu(beta[0] as u32) * cis(twopi * theta[0])
                } else {
                    zero
                }
            }
            SymbolKind::Schrodinger { spec, .. } => {
                if active.len() == 1 {
                    let j = active[0];
                    Complex64::from(-2.0 * spec.hbar().powi(-2) * dcos(theta[j], beta[j]))
                } else {
                    zero
                }
            }
            SymbolKind::DecayingTest { s, b, .. } => {
                if active == [0] {
                    let w = (1.0 + lattice::norm(k)).powf(-s);
                    Complex64::from(w * b * dcos(theta[0], beta[0]))
                } else {
                    zero
                }
            }
            SymbolKind::FromMatrix(kernel) => {
                let spec = kernel.spec();
                let bx = kernel.truncation();
                let Ok(row) = lattice::index_of(spec, bx, k) else { return zero };
                let zk = bx.coords_of_index(spec.dim(), row);
                let mut acc = zero;
                for (col, zm) in bx.coords(spec.dim()).iter().enumerate() {
                    let entry = kernel.entries()[(row, col)];
                    if entry == zero {
                        continue;
                    }
                    let mut factor = Complex64::new(1.0, 0.0);
                    let mut phase = 0.0;
                    for j in 0..zk.len() {
                        let d = (zm[j] - zk[j]) as f64;
                        factor *= Complex64::new(0.0, twopi * d).powu(beta[j] as u32);
                        phase += d * theta[j];
                    }
                    acc += entry * factor * cis(twopi * phase);
                }
                acc
            }
        }
    }
}

/// Mixed central finite difference ∂^β f at `theta` with step `h` per axis.
pub fn central_difference<F>(f: F, theta: &[f64], beta: &[usize], h: f64) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    // tensor product of 1-D central stencils: Σ_i (−1)^i C(q,i) f(θ + (q/2 − i)h) / h^q
    let stencils: Vec<Vec<(f64, f64)>> = beta
        .iter()
        .map(|&q| {
            (0..=q)
                .map(|i| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    (sign * binomial(q, i), (q as f64 / 2.0 - i as f64) * h)
                })
                .collect()
        })
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; beta.len()];
    let mut point = theta.to_vec();
    loop {
        let mut weight = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            let (w, off) = stencils[j][i];
            weight *= w;
            point[j] = theta[j] + off;
        }
        acc += f(&point) * weight;
        // odometer
        let mut j = 0;
        loop {
            if j == idx.len() {
                let total: usize = beta.iter().sum();
                return acc / h.powi(total as i32);
            }
            idx[j] += 1;
            if idx[j] < stencils[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
