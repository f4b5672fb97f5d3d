//! Task dispatch: each task turns a validated config into named output files.

use lattice_pdo::criteria::{self, CriterionQuery};
use lattice_pdo::fourier::{self, CoefficientSource};
use lattice_pdo::kernel::{self, KernelMatrix};
use lattice_pdo::schrodinger::{self, ConvergedSpectrum, ConvergenceOptions, PotentialSpec};
use lattice_pdo::spectral;
use lattice_pdo::symbols::{Symbol, SymbolOrder};
use lattice_pdo::{BoxTruncation, LatticeSpec};
use serde_json::json;
use std::fmt::Write;

use crate::config::{
    ExperimentConfig, Format, SourceConfig, SymbolConfig, Task, TruncationConfig, DEFAULT_FREQ_RADIUS, DEFAULT_MAX_DIM, DEFAULT_TOL,
};
use crate::error::RunError;

/// Files produced by a task, plus a failure to report after they are written.
#[derive(Debug, Default)]
pub struct TaskOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub failure: Option<RunError>,
}

impl TaskOutput {
    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut body = serde_json::to_string_pretty(value).expect("json value serializes");
        body.push('\n');
        self.text(name, body);
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    spec: LatticeSpec,
    symbol: Symbol,
}

impl Context<'_> {
    fn max_dim(&self) -> usize {
        self.config.params.max_dim.unwrap_or(DEFAULT_MAX_DIM)
    }

    fn max_radius(&self) -> usize {
        let mut r = 0;
        while BoxTruncation::new(r + 1).size(self.spec.dim()) <= self.max_dim() {
            r += 1;
        }
        r
    }

    /// Explicit radius, or ⌈25/ħ⌉ limited by the dimension budget.
    fn radius(&self) -> Result<usize, RunError> {
        match self.config.truncation {
            TruncationConfig::Radius { radius } => {
                if BoxTruncation::new(radius).size(self.spec.dim()) > self.max_dim() {
                    return Err(RunError::config(
                        "truncation.radius",
                        format!("box exceeds max_dim = {}", self.max_dim()),
                    ));
                }
                Ok(radius)
            }
            TruncationConfig::Auto => Ok(((25.0 / self.spec.hbar()).ceil() as usize).clamp(1, self.max_radius().max(1))),
        }
    }

    fn source(&self) -> CoefficientSource {
        match self.config.params.source {
            SourceConfig::Auto => CoefficientSource::Auto,
            SourceConfig::Quadrature => CoefficientSource::Quadrature(self.config.params.samples.unwrap_or(fourier::DEFAULT_SAMPLES)),
        }
    }

    fn kernel(&self, radius: usize) -> KernelMatrix {
        kernel::assemble(&self.symbol, &self.spec, &BoxTruncation::new(radius), self.source())
    }

    fn order(&self) -> Result<SymbolOrder, RunError> {
        match self.config.params.order {
            Some(o) => SymbolOrder::new(o.mu, o.rho, o.delta).map_err(|e| RunError::config("params.order", e.to_string())),
            None => Ok(self.symbol.order()),
        }
    }

    fn query(&self) -> Result<CriterionQuery, RunError> {
        let p = &self.config.params;
        let lp = p.p.unwrap_or(2.0);
        let p2 = p.p2.unwrap_or(lp);
        let query = CriterionQuery::new(lp, p.r.unwrap_or(1.0), p.p1.unwrap_or(p2), p2, self.spec.dim())?;
        if let Some(q) = p.q {
            let expected = query.q;
            if !((expected.is_infinite() && q.is_infinite()) || (q - expected).abs() <= 1e-12 * expected.abs()) {
                return Err(RunError::config(
                    "params.q",
                    format!("must be the conjugate exponent {expected} of p"),
                ));
            }
        }
        Ok(query)
    }

    fn potential_spec(&self) -> Result<(PotentialSpec, f64), RunError> {
        let SymbolConfig::Schrodinger { potential, shift } = &self.config.symbol else {
            return Err(RunError::config("symbol.family", "schrodinger family required"));
        };
        let pspec =
            PotentialSpec::new(potential.clone(), &self.spec).map_err(|e| RunError::config("symbol.params.potential", e.to_string()))?;
        Ok((pspec, *shift))
    }

    fn spectrum(&self, j_max: usize) -> Result<(PotentialSpec, ConvergedSpectrum), RunError> {
        let (pspec, shift) = self.potential_spec()?;
        let start_radius = match self.config.truncation {
            TruncationConfig::Radius { radius } => Some(radius),
            TruncationConfig::Auto => None,
        };
        let options = ConvergenceOptions {
            start_radius,
            max_dim: self.max_dim(),
            shift,
        };
        let tol = self.config.params.tol.unwrap_or(DEFAULT_TOL);
        let conv = schrodinger::spectrum_converged(&self.spec, &pspec, j_max, tol, options)?;
        Ok((pspec, conv))
    }
}

pub fn run_task(config: &ExperimentConfig) -> Result<TaskOutput, RunError> {
    let spec = config.lattice_spec()?;
    let symbol = config.build_symbol(&spec)?;
    let ctx = Context { config, spec, symbol };
    let mut out = TaskOutput::default();
    match config.task {
        Task::Coeffs => coeffs(&ctx, &mut out)?,
        Task::Assemble => assemble(&ctx, &mut out)?,
        Task::CheckBounds => check_bounds(&ctx, &mut out)?,
        Task::CheckNuclear => check_nuclear(&ctx, &mut out)?,
        Task::OrderReport => order_report(&ctx, &mut out)?,
        Task::DiagApprox => diag_approx(&ctx, &mut out)?,
        Task::Spectrum => spectrum(&ctx, &mut out)?,
        Task::FitGrowth => fit_growth(&ctx, &mut out)?,
    }
    Ok(out)
}

fn coeffs(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let radius = ctx.radius()?;
    let freq_radius = ctx.config.params.freq_radius.unwrap_or(DEFAULT_FREQ_RADIUS);
    let table = fourier::coefficient_table(&ctx.symbol, &ctx.spec, &BoxTruncation::new(radius), freq_radius, ctx.source());
    if ctx.config.has_format(Format::Csv) {
        out.text("coeffs.csv", table.to_csv());
    }
    if let Some(q_tilde) = ctx.config.params.q_tilde {
        let decay = fourier::estimate_decay_constant(&ctx.symbol, &ctx.spec, q_tilde, radius, freq_radius, ctx.source())?;
        let tail = criteria::truncation_tail_bound(&ctx.spec, &decay, radius);
        if ctx.config.has_format(Format::Json) {
            out.json("decay.json", &json!({ "decay": decay, "tail_bound": tail, "R": radius }));
        }
    }
    Ok(())
}

fn assemble(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let k = ctx.kernel(ctx.radius()?);
    if ctx.config.has_format(Format::Csv) {
        out.text("kernel.csv", k.to_csv());
    }
    if ctx.config.has_format(Format::Json) {
        let check = kernel::hermitian_check(&k, spectral::HERMITIAN_TOL);
        let nonzeros = k.entries().iter().filter(|z| z.norm() != 0.0).count();
        out.json(
            "kernel.json",
            &json!({
                "size": k.size(),
                "R": k.truncation().radius,
                "nonzeros": nonzeros,
                "is_real": k.is_real(),
                "hermitian": check,
                "inf_norm": k.inf_norm(),
                "provenance": k.provenance(),
            }),
        );
    }
    if ctx.config.has_format(Format::Bin) {
        out.files.push(("kernel.bin".into(), k.to_binary()));
    }
    Ok(())
}

/// A sum-type criterion evaluated on one kernel.
type Criterion<'a> = &'a dyn Fn(&KernelMatrix) -> lattice_pdo::Result<f64>;

fn doubling_rows(
    ctx: &Context,
    radius: usize,
    criteria_list: &[(&str, Criterion)],
) -> Result<Vec<(String, criteria::DoublingCheck)>, RunError> {
    let small = ctx.kernel(radius);
    let big = ctx.kernel(2 * radius);
    criteria_list
        .iter()
        .map(|(name, f)| {
            Ok((
                name.to_string(),
                criteria::DoublingCheck {
                    radius,
                    value: f(&small)?,
                    doubled_value: f(&big)?,
                },
            ))
        })
        .collect()
}

fn doubling_csv(rows: &[(String, criteria::DoublingCheck)]) -> String {
    let mut s = String::from("criterion,R,value,value_2R,increment,ratio,diverges\n");
    for (name, c) in rows {
        let _ = writeln!(
            s,
            "{name},{},{},{},{},{},{}",
            c.radius,
            c.value,
            c.doubled_value,
            c.increment(),
            c.ratio(),
            c.diverges()
        );
    }
    s
}

fn doubling_json(rows: &[(String, criteria::DoublingCheck)]) -> serde_json::Value {
    rows.iter()
        .map(|(name, c)| {
            (
                name.clone(),
                json!({ "R": c.radius, "value": c.value, "value_2R": c.doubled_value, "ratio": c.ratio(), "diverges": c.diverges() }),
            )
        })
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn check_bounds(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let radius = ctx.radius()?;
    let query = ctx.query()?;
    let order = ctx.order()?;
    let p = query.p;
    let schur = move |k: &KernelMatrix| criteria::schur_l1_lp(k, p);
    let sup = |k: &KernelMatrix| Ok(criteria::sup_entry(k));
    let mixed = move |k: &KernelMatrix| criteria::mixed_lp_sum(k, p);
    let mut list: Vec<(&str, Criterion)> = vec![("schur-l1-lp", &schur), ("sup-entry", &sup)];
    if p > 1.0 {
        list.push(("mixed-lp", &mixed));
    }
    let rows = doubling_rows(ctx, radius, &list)?;
    let verdicts = criteria::order_conditions(&order, &query);
    if ctx.config.has_format(Format::Csv) {
        out.text("bounds.csv", doubling_csv(&rows));
    }
    if ctx.config.has_format(Format::Json) {
        let kept: serde_json::Map<_, _> = [criteria::L1_TO_LP, criteria::L1_TO_LINF, criteria::LP_ALL, criteria::COMPACT]
            .iter()
            .filter_map(|name| verdicts.verdicts.get(*name).map(|v| (name.to_string(), json!(v))))
            .collect();
        out.json(
            "bounds.json",
            &json!({
                "query": query,
                "order": order,
                "doubling": doubling_json(&rows),
                "verdicts": kept,
                "truncation": { "R": radius, "n": ctx.spec.dim(), "hbar": ctx.spec.hbar() },
            }),
        );
    }
    Ok(())
}

fn check_nuclear(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let radius = ctx.radius()?;
    let query = ctx.query()?;
    let order = ctx.order()?;
    let (r, p2) = (query.r, query.p2);
    let nuclear = move |k: &KernelMatrix| criteria::nuclear_sum(k, r, p2);
    let rows = doubling_rows(ctx, radius, &[("nuclear", &nuclear)])?;
    let report = criteria::order_conditions(&order, &query);
    let tail = match ctx.config.params.q_tilde {
        Some(q_tilde) => {
            let freq_radius = ctx.config.params.freq_radius.unwrap_or(DEFAULT_FREQ_RADIUS);
            let decay = fourier::estimate_decay_constant(&ctx.symbol, &ctx.spec, q_tilde, radius, freq_radius, ctx.source())?;
            Some(json!({ "decay": decay, "tail_bound": criteria::truncation_tail_bound(&ctx.spec, &decay, radius) }))
        }
        None => None,
    };
    if ctx.config.has_format(Format::Csv) {
        out.text("nuclear.csv", doubling_csv(&rows));
    }
    if ctx.config.has_format(Format::Json) {
        out.json(
            "nuclear.json",
            &json!({
                "query": query,
                "order": order,
                "doubling": doubling_json(&rows),
                "verdict": report.verdicts.get(criteria::R_NUCLEAR),
                "t": report.decay_exponent_t,
                "tail": tail,
                "truncation": { "R": radius, "n": ctx.spec.dim(), "hbar": ctx.spec.hbar() },
            }),
        );
    }
    Ok(())
}

fn order_report(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let report = criteria::order_conditions(&ctx.order()?, &ctx.query()?);
    let mut body = report.to_json();
    body.push('\n');
    out.text("order_report.json", body);
    Ok(())
}

fn diag_approx(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let mut k = ctx.kernel(ctx.radius()?);
    if ctx.config.params.hermitian_part {
        k = k.hermitian_part();
    }
    let order = ctx.order()?;
    let spectrum = spectral::eigendecompose_hermitian(&k, true)?;
    let report = spectral::diagonal_approximation(&k, &order)?;
    let sandwich = spectral::sandwich_check_with(&k, &spectrum)?;
    if ctx.config.has_format(Format::Csv) {
        out.text("diag_approx.csv", report.to_csv());
        let mut s = String::from("index,eigenvalue,lower,middle,upper,holds\n");
        for (j, r) in sandwich.iter().enumerate() {
            let _ = writeln!(s, "{j},{},{},{},{},{}", r.eigenvalue, r.lower, r.middle, r.upper, r.holds);
        }
        out.text("sandwich.csv", s);
    }
    if ctx.config.has_format(Format::Json) {
        let summary: serde_json::Value = serde_json::from_str(&report.summary_json()).expect("summary is json");
        out.json(
            "diag_approx.json",
            &json!({
                "summary": summary,
                "sandwich_holds": sandwich.iter().all(|r| r.holds),
                "sandwich_failures": sandwich.iter().filter(|r| !r.holds).count(),
                "hermitian_part": ctx.config.params.hermitian_part,
            }),
        );
    }
    Ok(())
}

fn spectrum_outputs(ctx: &Context, out: &mut TaskOutput, pspec: &PotentialSpec, conv: &ConvergedSpectrum, shift: f64) {
    if ctx.config.has_format(Format::Csv) {
        out.text("spectrum.csv", conv.to_csv());
    }
    if ctx.config.has_format(Format::Json) {
        let oracle = schrodinger::weyl_oracle(
            &ctx.spec,
            pspec.potential(),
            &BoxTruncation::new(conv.radius_used),
            conv.result.eigenvalues.len(),
            shift,
        );
        let gap = conv
            .result
            .eigenvalues
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.json(
            "spectrum.json",
            &json!({
                "radii": conv.radii,
                "R_used": conv.radius_used,
                "all_converged": conv.all_converged(),
                "weyl_oracle_max_gap": gap,
                "weyl_oracle_bound": 4.0 * ctx.spec.dim() as f64 * ctx.spec.hbar().powi(-2),
            }),
        );
    }
}

fn growth(
    ctx: &Context,
    out: &mut TaskOutput,
    pspec: &PotentialSpec,
    conv: &ConvergedSpectrum,
    j_range: (usize, usize),
) -> Result<(), RunError> {
    let fit = schrodinger::fit_growth_exponent(&conv.result, j_range, pspec.order())?;
    if ctx.config.has_format(Format::Json) {
        let mut body = fit.to_json();
        body.push('\n');
        out.text("growth.json", body);
    }
    Ok(())
}

fn spectrum(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let j_max = ctx.config.params.j_max.expect("validated");
    let (pspec, conv) = ctx.spectrum(j_max)?;
    let shift = match &ctx.config.symbol {
        SymbolConfig::Schrodinger { shift, .. } => *shift,
        _ => 0.0,
    };
    spectrum_outputs(ctx, out, &pspec, &conv, shift);
    if let Some(range) = ctx.config.params.j_range {
        if let Err(e) = growth(ctx, out, &pspec, &conv, range) {
            out.failure = Some(e);
        }
    }
    if out.failure.is_none() && !conv.all_converged() {
        out.failure = Some(RunError::Numeric {
            reason: format!(
                "dimension budget exhausted at R = {} before all {j_max} eigenvalues converged",
                conv.radius_used
            ),
        });
    }
    Ok(())
}

fn fit_growth(ctx: &Context, out: &mut TaskOutput) -> Result<(), RunError> {
    let range = ctx.config.params.j_range.expect("validated");
    let j_max = ctx.config.params.j_max.unwrap_or(range.1);
    let (pspec, conv) = ctx.spectrum(j_max)?;
    let shift = match &ctx.config.symbol {
        SymbolConfig::Schrodinger { shift, .. } => *shift,
        _ => 0.0,
    };
    spectrum_outputs(ctx, out, &pspec, &conv, shift);
    if let Err(e) = growth(ctx, out, &pspec, &conv, range) {
        out.failure = Some(e);
    }
    Ok(())
}
