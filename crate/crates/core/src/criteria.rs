//! Schur-type boundedness sums, the r-nuclearity sum, and the order-condition
//! decision engine.
//!
//! Every sum is computed per row or column in parallel and then combined by
//! pairwise summation in index order, so values do not depend on the number
//! of worker threads.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::DecayReport;
use crate::kernel::KernelMatrix;
use crate::lattice::LatticeSpec;
use crate::symbols::SymbolOrder;

/// Growth factor between radius R and 2R that counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1.5;

const CONJUGACY_TOL: f64 = 1e-12;

/// Pairwise (tree) summation in slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn row_values<F>(m: &DMatrix<Complex64>, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..m.nrows())
        .into_par_iter()
        .map(|i| {
            let abs: Vec<f64> = m.row(i).iter().map(|z| z.norm()).collect();
            f(&abs)
        })
        .collect()
}

fn col_values<F>(m: &DMatrix<Complex64>, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..m.ncols())
        .into_par_iter()
        .map(|j| {
            let abs: Vec<f64> = m.column(j).iter().map(|z| z.norm()).collect();
            f(&abs)
        })
        .collect()
}

fn power_sum(abs: &[f64], p: f64) -> f64 {
    let powered: Vec<f64> = abs.iter().map(|a| a.powf(p)).collect();
    pairwise_sum(&powered)
}

/// sup_m Σ_k |A(k, m)|^p, the ℓ¹ → ℓ^p criterion.
pub fn schur_l1_lp(kernel: &KernelMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("must satisfy 1 <= p < inf, got {p}")));
    }
    Ok(col_values(kernel.entries(), |c| power_sum(c, p)).into_iter().fold(0.0, f64::max))
}

/// sup_{k,m} |A(k, m)|, the ℓ¹ → ℓ^∞ criterion.
pub fn sup_entry(kernel: &KernelMatrix) -> f64 {
    kernel.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Σ_k (Σ_m |A(k, m)|^q)^{p/q} with q the conjugate of p.
pub fn mixed_lp_sum(kernel: &KernelMatrix, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("mixed sum needs 1 < p < inf, got {p}")));
    }
    let q = p / (p - 1.0);
    let rows = row_values(kernel.entries(), |r| power_sum(r, q).powf(p / q));
    Ok(pairwise_sum(&rows))
}

/// Σ_k (Σ_m |K(k, m)|^{p₂})^{r/p₂}.
pub fn nuclear_sum(kernel: &KernelMatrix, r: f64, p2: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(invalid("r", format!("must lie in (0, 1], got {r}")));
    }
    if !(p2 >= 1.0 && p2.is_finite()) {
        return Err(invalid("p2", format!("must satisfy 1 <= p2 < inf, got {p2}")));
    }
    let rows = row_values(kernel.entries(), |row| power_sum(row, p2).powf(r / p2));
    Ok(pairwise_sum(&rows))
}

/// Exponents for one query of the decision engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionQuery {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub p1: f64,
    pub p2: f64,
    pub n: usize,
}

impl CriterionQuery {
    /// Builds a query, deriving `q` from `1/p + 1/q = 1`.
    pub fn new(p: f64, r: f64, p1: f64, p2: f64, n: usize) -> Result<Self> {
        let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        let query = Self { p, q, r, p1, p2, n };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid("p", format!("must satisfy 1 <= p < inf, got {}", self.p)));
        }
        let conj = 1.0 / self.p + 1.0 / self.q;
        if (conj - 1.0).abs() > CONJUGACY_TOL {
            return Err(invalid("q", format!("1/p + 1/q = {conj}, expected 1")));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(invalid("r", format!("must lie in (0, 1], got {}", self.r)));
        }
        for (name, v) in [("p1", self.p1), ("p2", self.p2)] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(invalid(
                    if name == "p1" { "p1" } else { "p2" },
                    format!("must satisfy 1 <= {name} < inf, got {v}"),
                ));
            }
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    /// The sufficient condition holds at a boundary where sharpness is not known.
    HoldsSufficientOnly,
    Fails,
    NotApplicable,
}

impl Verdict {
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Holds | Verdict::HoldsSufficientOnly)
    }
}

/// A verdict together with the inequality instance that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub inequality: String,
    pub lhs: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationInfo {
    #[serde(rename = "R")]
    pub radius: usize,
    pub n: usize,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CriterionReport {
    pub sums: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, VerdictRecord>,
    #[serde(rename = "t")]
    pub decay_exponent_t: Option<f64>,
    pub truncation: Option<TruncationInfo>,
}

impl CriterionReport {
    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.verdicts.get(name).map(|v| v.verdict)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub const L1_TO_LP: &str = "l1-to-lp-bounded";
pub const L1_TO_LINF: &str = "l1-to-linf-bounded";
pub const LP_ALL: &str = "lp-bounded-all-p";
pub const COMPACT: &str = "compact";
pub const R_NUCLEAR: &str = "r-nuclear";

fn record(verdict: bool, inequality: String, lhs: f64, threshold: f64) -> VerdictRecord {
    VerdictRecord {
        verdict: if verdict { Verdict::Holds } else { Verdict::Fails },
        inequality,
        lhs,
        threshold,
    }
}

/// Decide the order conditions for boundedness, compactness and r-nuclearity.
pub fn order_conditions(order: &SymbolOrder, query: &CriterionQuery) -> CriterionReport {
    let SymbolOrder { mu, delta, .. } = *order;
    let n = query.n as f64;
    let mut verdicts = BTreeMap::new();

    let t = -n / query.p;
    verdicts.insert(L1_TO_LP.into(), record(mu < t, format!("mu < -n/p with p = {}", query.p), mu, t));
    verdicts.insert(L1_TO_LINF.into(), record(mu <= 0.0, "mu <= 0".into(), mu, 0.0));

    let t = -(n + 2.0) * delta;
    let mut lp = record(mu <= t, "mu <= -(n+2) delta".into(), mu, t);
    if lp.verdict == Verdict::Holds && mu == t && delta > 0.0 {
        lp.verdict = Verdict::HoldsSufficientOnly;
    }
    verdicts.insert(LP_ALL.into(), lp);
    verdicts.insert(COMPACT.into(), record(mu < t, "mu < -(n+2) delta".into(), mu, t));

    let t = -n / query.r - (n / query.p2 + 2.0) * delta;
    let nuclear = record(
        mu < t,
        format!("mu < -n/r - (n/p2 + 2) delta with r = {}, p2 = {}", query.r, query.p2),
        mu,
        t,
    );
    let nuclear_holds = nuclear.verdict.holds();
    verdicts.insert(R_NUCLEAR.into(), nuclear);

    let decay_exponent_t = if nuclear_holds && query.p1 == query.p2 {
        let inv_t = 1.0 / query.r - (1.0 / query.p2 - 0.5).abs();
        (inv_t > 0.0).then(|| 1.0 / inv_t)
    } else {
        None
    };

    CriterionReport {
        sums: BTreeMap::new(),
        verdicts,
        decay_exponent_t,
        truncation: None,
    }
}

/// All sum-type criteria of a kernel for one query.
pub fn kernel_sums(kernel: &KernelMatrix, query: &CriterionQuery) -> Result<BTreeMap<String, f64>> {
    let mut sums = BTreeMap::new();
    sums.insert("schur-l1-lp".to_string(), schur_l1_lp(kernel, query.p)?);
    sums.insert("sup-entry".to_string(), sup_entry(kernel));
    if query.p > 1.0 {
        sums.insert("mixed-lp".to_string(), mixed_lp_sum(kernel, query.p)?);
    }
    sums.insert("nuclear".to_string(), nuclear_sum(kernel, query.r, query.p2)?);
    Ok(sums)
}

/// Order verdicts plus the kernel's sums at its truncation.
pub fn full_report(kernel: &KernelMatrix, order: &SymbolOrder, query: &CriterionQuery) -> Result<CriterionReport> {
    let mut report = order_conditions(order, query);
    report.sums = kernel_sums(kernel, query)?;
    report.truncation = Some(TruncationInfo {
        radius: kernel.truncation().radius,
        n: kernel.spec().dim(),
        hbar: kernel.spec().hbar(),
    });
    Ok(report)
}

/// A criterion value at radius R and at 2R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingCheck {
    pub radius: usize,
    pub value: f64,
    pub doubled_value: f64,
}

impl DoublingCheck {
    pub fn increment(&self) -> f64 {
        self.doubled_value - self.value
    }

    pub fn ratio(&self) -> f64 {
        self.doubled_value / self.value
    }

    /// Operational divergence: the value grew by at least [`DIVERGENCE_RATIO`].
    pub fn diverges(&self) -> bool {
        self.doubled_value >= DIVERGENCE_RATIO * self.value
    }
}

/// Evaluate `criterion` at radius R and 2R.
pub fn doubling_check<F>(radius: usize, mut criterion: F) -> Result<DoublingCheck>
where
    F: FnMut(usize) -> Result<f64>,
{
    Ok(DoublingCheck {
        radius,
        value: criterion(radius)?,
        doubled_value: criterion(2 * radius)?,
    })
}

/// Upper bounds on kernel mass neglected by a box truncation, derived from
/// the sampled coefficient bound `|A(k, m)| ≤ C c(k) ω(m − k)` with
/// `c(k) = (1+|k|)^{μ+2Q̃δ}` and `ω(d) = (1+|d|/ħ)^{−2Q̃}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// Σ of |A| over all rows outside the box; `None` unless μ+2Q̃δ < −n
    /// (and 2Q̃ > n when the frequency support is unknown).
    pub k_tail: Option<f64>,
    /// Per-row Σ of |A| over frequencies with |m/ħ|∞ > R; `None` unless
    /// μ+2Q̃δ ≤ 0 and either the support is known or 2Q̃ > n.
    pub m_tail: Option<f64>,
}

impl TailBound {
    pub fn applicable(&self) -> bool {
        self.k_tail.is_some() && self.m_tail.is_some()
    }
}

/// Bound on Σ_{z ∈ Zⁿ, |z|∞ > R} (1 + h|z|)^e for e < −n, by shell counting
/// and integral comparison.
pub fn lattice_power_tail(e: f64, n: usize, h: f64, radius: usize) -> Option<f64> {
    let nf = n as f64;
    if e >= -nf {
        return None;
    }
    let shell = 2.0 * nf * 3f64.powi(n as i32 - 1) * h.powf(1.0 - nf);
    Some(shell * (1.0 + h * radius as f64).powf(e + nf) / (h * (-e - nf)))
}

pub fn truncation_tail_bound(spec: &LatticeSpec, decay: &DecayReport, radius: usize) -> TailBound {
    let n = spec.dim();
    let k_exp = decay.k_exponent();
    let two_q = 2.0 * decay.q_tilde as f64;
    // Σ_d ω(d) over all frequencies, and its part beyond the box
    let (omega_total, omega_tail) = match decay.frequency_support {
        Some(support) => {
            let sbox = crate::lattice::BoxTruncation::new(support as usize);
            let total: f64 = sbox
                .coords(n)
                .iter()
                .map(|z| (1.0 + z.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()).powf(-two_q))
                .sum();
            let tail = if support as usize <= radius {
                Some(0.0)
            } else {
                lattice_power_tail(-two_q, n, 1.0, radius)
            };
            (Some(total), tail)
        }
        None => (
            lattice_power_tail(-two_q, n, 1.0, 0).map(|t| 1.0 + t),
            lattice_power_tail(-two_q, n, 1.0, radius),
        ),
    };
    let k_tail = match (lattice_power_tail(k_exp, n, spec.hbar(), radius), omega_total) {
        (Some(c_tail), Some(w)) => Some(decay.constant * c_tail * w),
        _ => None,
    };
    let m_tail = match omega_tail {
        Some(0.0) => Some(0.0),
        Some(w) if k_exp <= 0.0 => Some(decay.constant * w),
        _ => None,
    };
    TailBound { k_tail, m_tail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{estimate_decay_constant, CoefficientSource};
    use crate::kernel::{assemble, Provenance};
    use crate::lattice::BoxTruncation;
    use crate::symbols::*;
    use proptest::prelude::*;

    fn spec1() -> LatticeSpec {
        LatticeSpec::new(1.0, 1).unwrap()
    }

    fn kern(sym: &Symbol, r: usize) -> KernelMatrix {
        assemble(sym, &spec1(), &BoxTruncation::new(r), CoefficientSource::Auto)
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn schur_column_sums() {
        let d = kern(&difference_symbol(), 3);
        for p in [1.0, 1.5, 2.0, 7.0] {
            assert_eq!(schur_l1_lp(&d, p).unwrap(), 2.0);
            assert_eq!(schur_l1_lp(&kern(&constant_symbol(one()), 3), p).unwrap(), 1.0);
        }
        assert_eq!(schur_l1_lp(&kern(&multiplication_symbol(1.0), 5), 1.0).unwrap(), 5.0);
        assert!(schur_l1_lp(&d, 0.5).is_err());
    }

    #[test]
    fn sup_entries() {
        assert_eq!(sup_entry(&kern(&difference_symbol(), 2)), 1.0);
        let h = kern(&schrodinger_symbol(spec1(), polynomial_potential(1.0, 1), 0.0), 2);
        assert_eq!(sup_entry(&h), 6.0);
        assert_eq!(sup_entry(&kern(&constant_symbol(Complex64::new(0.0, 0.0)), 2)), 0.0);
    }

    #[test]
    fn mixed_sums() {
        assert_eq!(mixed_lp_sum(&kern(&constant_symbol(one()), 2), 2.0).unwrap(), 5.0);
        assert!((mixed_lp_sum(&kern(&difference_symbol(), 2), 2.0).unwrap() - 9.0).abs() < 1e-14);
        assert!(matches!(mixed_lp_sum(&kern(&difference_symbol(), 2), 1.0), Err(Error::Domain(_))));
        assert!(mixed_lp_sum(&kern(&difference_symbol(), 2), f64::INFINITY).is_err());
    }

    #[test]
    fn mixed_sum_converges_for_decaying_symbol() {
        let sym = decaying_test_symbol(3.0, 2.0, 1.0);
        let at30 = mixed_lp_sum(&kern(&sym, 30), 2.0).unwrap();
        let mut prev = at30;
        for r in [35, 40, 45, 50] {
            let v = mixed_lp_sum(&kern(&sym, r), 2.0).unwrap();
            assert!(v >= prev);
            assert!(v - at30 < 1e-6);
            prev = v;
        }
    }

    #[test]
    fn nuclear_sums() {
        assert!((nuclear_sum(&kern(&constant_symbol(one()), 2), 0.5, 3.0).unwrap() - 5.0).abs() < 1e-14);
        // difference kernel: every full row contributes √2
        let a = nuclear_sum(&kern(&difference_symbol(), 10), 1.0, 2.0).unwrap();
        let b = nuclear_sum(&kern(&difference_symbol(), 20), 1.0, 2.0).unwrap();
        assert!(((b - a) / 20.0 - 2f64.sqrt()).abs() < 1e-12);
        assert!(nuclear_sum(&kern(&difference_symbol(), 1), 0.0, 2.0).is_err());
        assert!(nuclear_sum(&kern(&difference_symbol(), 1), 1.0, 0.5).is_err());
    }

    #[test]
    fn nuclear_sum_matches_series_with_exact_tail() {
        // diagonal (1+|k|)^{-2}: partial sum = π²/3 − 1 − 2 Σ_{j ≥ R+2} j^{-2}
        let sym = decaying_test_symbol(2.0, 1.0, 0.0);
        let r = 300;
        let v = nuclear_sum(&kern(&sym, r), 1.0, 2.0).unwrap();
        let tail: f64 = 2.0 * (r + 2..2_000_000).map(|j| (j as f64).powi(-2)).sum::<f64>();
        let tail = tail + 2.0 / 2_000_000.0;
        let series = std::f64::consts::PI.powi(2) / 3.0 - 1.0;
        assert!((v + tail - series).abs() < 1e-9, "{v} {tail} {series}");
    }

    #[test]
    fn order_condition_examples() {
        let q = CriterionQuery::new(2.0, 1.0, 2.0, 2.0, 1).unwrap();
        let rep = order_conditions(&SymbolOrder::new(0.0, 1.0, 0.0).unwrap(), &q);
        assert_eq!(rep.verdict(L1_TO_LINF), Some(Verdict::Holds));
        assert_eq!(rep.verdict(LP_ALL), Some(Verdict::Holds));
        assert_eq!(rep.verdict(COMPACT), Some(Verdict::Fails));

        let rep = order_conditions(&SymbolOrder::new(0.25, 1.0, 0.0).unwrap(), &q);
        assert!(rep.verdicts.values().all(|v| v.verdict == Verdict::Fails));
        assert_eq!(rep.decay_exponent_t, None);

        let rep = order_conditions(&SymbolOrder::new(-3.0, 1.0, 0.0).unwrap(), &q);
        assert_eq!(rep.verdict(R_NUCLEAR), Some(Verdict::Holds));
        assert_eq!(rep.decay_exponent_t, Some(1.0));
        assert_eq!(rep.verdicts[R_NUCLEAR].threshold, -1.0);
    }

    #[test]
    fn boundary_with_positive_delta_is_sufficient_only() {
        let q = CriterionQuery::new(2.0, 1.0, 2.0, 2.0, 1).unwrap();
        let rep = order_conditions(&SymbolOrder::new(-1.5, 1.0, 0.5).unwrap(), &q);
        assert_eq!(rep.verdict(LP_ALL), Some(Verdict::HoldsSufficientOnly));
        assert_eq!(rep.verdict(COMPACT), Some(Verdict::Fails));
    }

    #[test]
    fn decay_exponent_t_arithmetic() {
        // 1/t = 1/r − |1/p − 1/2| = 2 − 1/4
        let q = CriterionQuery::new(4.0, 0.5, 4.0, 4.0, 1).unwrap();
        let rep = order_conditions(&SymbolOrder::new(-10.0, 1.0, 0.0).unwrap(), &q);
        assert!((rep.decay_exponent_t.unwrap() - 1.0 / 1.75).abs() < 1e-15);
        let q = CriterionQuery::new(4.0, 0.5, 2.0, 4.0, 1).unwrap();
        assert_eq!(
            order_conditions(&SymbolOrder::new(-10.0, 1.0, 0.0).unwrap(), &q).decay_exponent_t,
            None
        );
    }

    #[test]
    fn query_validation() {
        assert!(CriterionQuery::new(0.5, 1.0, 1.0, 1.0, 1).is_err());
        assert!(CriterionQuery::new(2.0, 1.5, 1.0, 1.0, 1).is_err());
        assert!(CriterionQuery::new(2.0, 1.0, 1.0, 1.0, 0).is_err());
        let mut q = CriterionQuery::new(3.0, 1.0, 1.0, 1.0, 1).unwrap();
        assert!((q.q - 1.5).abs() < 1e-15);
        q.q = 2.0;
        assert!(q.validate().is_err());
        assert_eq!(CriterionQuery::new(1.0, 1.0, 1.0, 1.0, 1).unwrap().q, f64::INFINITY);
    }

    #[test]
    fn report_json_shape() {
        let q = CriterionQuery::new(2.0, 1.0, 2.0, 2.0, 1).unwrap();
        let k = kern(&decaying_test_symbol(3.0, 2.0, 1.0), 5);
        let rep = full_report(&k, &decaying_test_symbol(3.0, 2.0, 1.0).order(), &q).unwrap();
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["verdicts"]["r-nuclear"]["verdict"], "holds");
        assert_eq!(v["t"], 1.0);
        assert_eq!(v["truncation"]["R"], 5);
        assert!(v["sums"]["nuclear"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn tail_bound_dominates_explicit_complement() {
        let spec = spec1();
        let sym = decaying_test_symbol(3.0, 2.0, 1.0);
        let decay = estimate_decay_constant(&sym, &spec, 1, 20, 3, CoefficientSource::Auto).unwrap();
        let mut last = f64::INFINITY;
        for r in [2usize, 5, 10, 20, 100] {
            let b = truncation_tail_bound(&spec, &decay, r);
            let k_tail = b.k_tail.unwrap();
            assert_eq!(b.m_tail, Some(0.0));
            assert!(k_tail < last);
            last = k_tail;
            if r <= 20 {
                // rows R < |k| ≤ 20000, each carrying (a + |b|)(1+|k|)^{-3}
                let explicit: f64 = (r + 1..=20_000).map(|j| 2.0 * 3.0 * (1.0 + j as f64).powi(-3)).sum();
                assert!(explicit <= k_tail, "R={r}: {explicit} > {k_tail}");
            }
        }
        let at100 = truncation_tail_bound(&spec, &decay, 100).k_tail.unwrap();
        assert!(at100 <= 10.0 * decay.constant * 100f64.powi(-2));
    }

    #[test]
    fn tail_bound_not_applicable_cases() {
        let spec = spec1();
        let c = estimate_decay_constant(&constant_symbol(Complex64::new(2.0, 0.0)), &spec, 0, 3, 3, CoefficientSource::Auto).unwrap();
        let b = truncation_tail_bound(&spec, &c, 10);
        assert!(!b.applicable());
        assert_eq!(b.k_tail, None);

        let d = estimate_decay_constant(&difference_symbol(), &spec, 1, 3, 3, CoefficientSource::Auto).unwrap();
        for r in [1, 2, 10] {
            assert_eq!(truncation_tail_bound(&spec, &d, r).m_tail, Some(0.0));
        }
        assert_eq!(truncation_tail_bound(&spec, &d, 10).k_tail, None);
    }

    #[test]
    fn lattice_power_tail_bounds_2d_sum() {
        for h in [0.5, 1.0, 2.0] {
            let e = -3.5;
            let bound = lattice_power_tail(e, 2, h, 3).unwrap();
            let mut explicit = 0.0;
            for x in -300i64..=300 {
                for y in -300i64..=300 {
                    if x.abs().max(y.abs()) > 3 {
                        explicit += (1.0 + h * ((x * x + y * y) as f64).sqrt()).powf(e);
                    }
                }
            }
            assert!(explicit <= bound, "h={h}: {explicit} > {bound}");
        }
        assert_eq!(lattice_power_tail(-2.0, 2, 1.0, 3), None);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    fn random_kernel(vals: &[f64], radius: usize) -> KernelMatrix {
        let size = 2 * radius + 1;
        let m = DMatrix::from_fn(size, size, |i, j| {
            Complex64::new(vals[2 * (i * size + j)], vals[2 * (i * size + j) + 1])
        });
        KernelMatrix::from_entries(
            spec1(),
            BoxTruncation::new(radius),
            m,
            Provenance {
                symbol: "random".into(),
                source: "test".into(),
            },
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn mixed_two_is_frobenius_squared(vals in proptest::collection::vec(-3.0f64..3.0, 2 * 49)) {
            let k = random_kernel(&vals, 3);
            let frob: f64 = k.entries().iter().map(|z| z.norm_sqr()).sum();
            let mixed = mixed_lp_sum(&k, 2.0).unwrap();
            prop_assert!((mixed - frob).abs() <= 1e-12 * frob.max(1.0));
        }

        #[test]
        fn sums_monotone_in_radius(s in 0.5f64..4.0, a in -2.0f64..2.0, b in -2.0f64..2.0, r in 0usize..15, p in 1.1f64..4.0) {
            let sym = decaying_test_symbol(s, a, b);
            let small = kern(&sym, r);
            let big = kern(&sym, r + 3);
            prop_assert!(schur_l1_lp(&big, p).unwrap() >= schur_l1_lp(&small, p).unwrap());
            prop_assert!(sup_entry(&big) >= sup_entry(&small));
            prop_assert!(mixed_lp_sum(&big, p).unwrap() >= mixed_lp_sum(&small, p).unwrap() * (1.0 - 1e-14));
            prop_assert!(nuclear_sum(&big, 0.7, p).unwrap() >= nuclear_sum(&small, 0.7, p).unwrap() * (1.0 - 1e-14));
        }
    }
}
