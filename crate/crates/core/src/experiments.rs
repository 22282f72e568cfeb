//! Experiment runners behind the command-line subcommands. Each writes CSV
//! files whose first line is a `#` comment with the config hash and seeds.

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ansatz::{AnalyticTrial, AnsatzMode, AnsatzSpec};
use crate::certify::{
    coefficient_of_variation, h2_report, parabolic_bound, penalty_h_half_estimator, CertifiedReport,
};
use crate::config::{ExperimentConfig, FailureDemoConfig, Init};
use crate::error::{Error, Result};
use crate::expr::{AnalyticField, Expr, Field, HarmonicMode};
use crate::geometry::{Domain, Lift};
use crate::losses::{interior_loss, sobolev_loss, LossConfig, LossVariant, Objective};
use crate::network::NetworkParams;
use crate::norms::{boundary_misfit, grad_laplacian_error, sobolev_parts, x_norm_error};
use crate::problems::{PdeProblem, ProblemKind};
use crate::quadrature::{build_rule, build_rule_with, gauss_interval, QuadratureRule, Target};
use crate::training::{fd_check, train_with, write_checkpoint, Schedule, TrainOutcome};

/// Execution options that do not change results.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for independent seeds; 0 or 1 runs them in order on the caller.
    pub parallel: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub lines: Vec<String>,
    /// A check without a dedicated error (e.g. the gradient check) failed.
    pub failed: bool,
}

fn per_seed<T, F>(seeds: &[u64], opts: RunOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if opts.parallel <= 1 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

/// CSV cell formatting: shortest round-trip digits, exponent form at extreme magnitudes.
trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        let a = self.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
            format!("{self:e}")
        } else {
            format!("{self}")
        }
    }
}

macro_rules! impl_cell_display {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

impl_cell_display!(
    usize,
    u64,
    u32,
    bool,
    &str,
    LossVariant,
    crate::certify::Provenance
);

macro_rules! row {
    ($($e:expr),* $(,)?) => {
        [$(Cell::cell(&$e)),*].join(",")
    };
}

fn provenance_line(cfg: &ExperimentConfig, extra: &str) -> String {
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let mut line = format!("# config_hash={} seeds={}", cfg.hash(), seeds.join(";"));
    if !extra.is_empty() {
        line.push(' ');
        line.push_str(extra);
    }
    line
}

fn write_csv(
    dir: &Path,
    name: &str,
    comment: &str,
    header: &str,
    rows: &[String],
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = String::with_capacity(64 * (rows.len() + 2));
    text.push_str(comment);
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

fn require_exact(problem: &PdeProblem) -> Result<AnalyticField> {
    problem.exact_field().ok_or_else(|| {
        Error::Config(format!(
            "problem {} has no manufactured solution",
            problem.id
        ))
    })
}

fn require_elliptic(problem: &PdeProblem, what: &str) -> Result<()> {
    if problem.kind == ProblemKind::Heat {
        return Err(Error::Config(format!(
            "{what} needs an elliptic problem, got {}",
            problem.id
        )));
    }
    Ok(())
}

/// Initial network ansatz for `problem`: exact-boundary (or parabolic) unless
/// `mode` says otherwise.
pub fn build_spec(
    cfg: &ExperimentConfig,
    problem: &PdeProblem,
    seed: u64,
    mode: Option<AnsatzMode>,
) -> Result<AnsatzSpec> {
    let widths = cfg.widths(problem);
    let params = match cfg.init {
        Init::Xavier => NetworkParams::xavier(&widths, seed)?,
        Init::Zeros => NetworkParams::zeros(&widths)?,
    };
    let default_mode = if problem.kind == ProblemKind::Heat {
        AnsatzMode::ParabolicExact
    } else {
        AnsatzMode::ExactBc
    };
    let mode = mode.unwrap_or(default_mode);
    let lift = match mode {
        AnsatzMode::ParabolicExact => problem.initial.clone().map_or(Lift::Zero, Lift::Expr),
        AnsatzMode::ExactBc => problem.lift.clone(),
        AnsatzMode::Unconstrained => Lift::Zero,
    };
    AnsatzSpec::new(params, problem.domain.clone(), lift, mode)
}

fn schedule_for(cfg: &ExperimentConfig, seed: u64) -> Schedule {
    Schedule {
        seed,
        ..cfg.schedule.clone()
    }
}

fn write_final_checkpoint(
    dir: &Path,
    name: &str,
    spec: &AnsatzSpec,
    out: &TrainOutcome,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = BufWriter::new(fs::File::create(&path)?);
    write_checkpoint(file, spec, &out.state)?;
    Ok(path)
}

fn history_rows(seed: u64, out: &TrainOutcome) -> Vec<String> {
    out.state
        .history
        .iter()
        .map(|(s, l)| row!(seed, *s, *l))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedRow {
    pub step: usize,
    pub loss: f64,
    pub bound: f64,
    pub h2_error: f64,
    pub h1_error: f64,
    pub l2_error: f64,
    pub report: CertifiedReport,
}

impl CertifiedRow {
    pub fn violates(&self) -> bool {
        self.report.holds() == Some(false)
    }
}

#[derive(Clone, Debug)]
pub struct CertifiedRun {
    pub seed: u64,
    pub rows: Vec<CertifiedRow>,
    pub outcome: TrainOutcome,
}

/// Trains with the interior loss and evaluates the H² certificate and true
/// errors at every checkpoint.
pub fn certified_trajectory(cfg: &ExperimentConfig, seed: u64) -> Result<CertifiedRun> {
    let problem = cfg.problem()?;
    require_elliptic(&problem, "certify-run")?;
    let exact = require_exact(&problem)?;
    let spec = build_spec(cfg, &problem, seed, None)?;
    let loss_cfg = LossConfig::new(LossVariant::Interior, &problem.domain, cfg.quad_n, None)?;
    let mut rows = Vec::new();
    let outcome = train_with(&spec, &problem, &loss_cfg, &schedule_for(cfg, seed), |c| {
        let v = spec.with_flat(c.params)?;
        let parts = sobolev_parts(&v, &exact, 2, &loss_cfg.interior)?;
        let report = h2_report(&problem, c.loss, cfg.user_constant)?.with_measured(parts.h2_norm());
        rows.push(CertifiedRow {
            step: c.step,
            loss: c.loss,
            bound: report.bound,
            h2_error: parts.h2_norm(),
            h1_error: parts.h1_norm(),
            l2_error: parts.l2_norm(),
            report,
        });
        Ok(())
    })?;
    Ok(CertifiedRun {
        seed,
        rows,
        outcome,
    })
}

pub const CERTIFIED_HEADER: &str = "seed,step,loss,bound,h2_error,h1_error,l2_error";

pub fn run_certified(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let runs = per_seed(&cfg.seeds, opts, |s| certified_trajectory(cfg, s))?;
    let problem = cfg.problem()?;
    let first = &runs[0].rows[0].report;
    let extra = format!(
        "problem={} constant={} provenance={} certified={} quadrature_headroom={}",
        problem.id, first.constant, first.provenance, first.certified, first.quadrature_headroom
    );
    let comment = provenance_line(cfg, &extra);
    let mut rows = Vec::new();
    let mut history = Vec::new();
    let mut summary = RunSummary::default();
    let mut violation = None;
    for run in &runs {
        for r in &run.rows {
            rows.push(row!(
                run.seed, r.step, r.loss, r.bound, r.h2_error, r.h1_error, r.l2_error
            ));
            if r.violates() && violation.is_none() {
                violation = Some(Error::BoundViolation {
                    step: r.step,
                    error: r.h2_error,
                    bound: r.bound,
                });
            }
        }
        history.extend(history_rows(run.seed, &run.outcome));
        let spec = build_spec(cfg, &problem, run.seed, None)?;
        summary.files.push(write_final_checkpoint(
            &cfg.out_dir,
            &format!("checkpoint_seed{}.bin", run.seed),
            &spec,
            &run.outcome,
        )?);
        let last = run.rows.last().expect("at least one checkpoint");
        summary.lines.push(format!(
            "seed {}: best loss {:.6e} at step {}, final h2 error {:.6e} <= bound {:.6e}: {}",
            run.seed,
            run.outcome.best_loss,
            run.outcome.best_step,
            last.h2_error,
            last.bound,
            if last.report.certified {
                "certified"
            } else {
                "not certified"
            }
        ));
    }
    summary.files.insert(
        0,
        write_csv(
            &cfg.out_dir,
            "certified.csv",
            &comment,
            CERTIFIED_HEADER,
            &rows,
        )?,
    );
    summary.files.push(write_csv(
        &cfg.out_dir,
        "loss_history.csv",
        &comment,
        "seed,step,loss",
        &history,
    )?);
    match violation {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Quadrature and closed-form values for the harmonic mode `r^n cos(n φ)` on
/// the unit disk under the boundary-penalty loss with `f = 0`, `g = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicFamilyRecord {
    pub n: u32,
    pub interior_residual_sq: f64,
    pub boundary_norm_sq: f64,
    pub loss_tau: f64,
    pub l2_norm_sq: f64,
    pub grad_norm_sq: f64,
    pub h1_norm: f64,
    pub h1_ratio: f64,
    pub h_half_surrogate: f64,
    pub exact: HarmonicClosedForm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicClosedForm {
    pub boundary_norm_sq: f64,
    pub loss_tau: f64,
    pub l2_norm_sq: f64,
    pub grad_norm_sq: f64,
    pub h1_norm: f64,
    pub h1_ratio: f64,
    pub h_half_surrogate: f64,
}

impl HarmonicClosedForm {
    pub fn new(n: u32, tau: f64) -> Self {
        let n_f = n as f64;
        let l2_norm_sq = PI / (2.0 * n_f + 2.0);
        let grad_norm_sq = PI * n_f;
        let loss_tau = tau * PI;
        let h1_norm = (l2_norm_sq + grad_norm_sq).sqrt();
        HarmonicClosedForm {
            boundary_norm_sq: PI,
            loss_tau,
            l2_norm_sq,
            grad_norm_sq,
            h1_norm,
            h1_ratio: h1_norm / loss_tau.sqrt(),
            h_half_surrogate: (l2_norm_sq.sqrt() * h1_norm).sqrt(),
        }
    }
}

impl HarmonicFamilyRecord {
    /// Largest relative deviation from the closed forms.
    pub fn max_relative_deviation(&self) -> f64 {
        let e = &self.exact;
        [
            (self.boundary_norm_sq, e.boundary_norm_sq),
            (self.loss_tau, e.loss_tau),
            (self.l2_norm_sq, e.l2_norm_sq),
            (self.grad_norm_sq, e.grad_norm_sq),
            (self.h1_norm, e.h1_norm),
            (self.h1_ratio, e.h1_ratio),
            (self.h_half_surrogate, e.h_half_surrogate),
        ]
        .iter()
        .map(|(q, c)| ((q - c) / c).abs())
        .fold(0.0, f64::max)
    }
}

fn zero_disk_problem() -> PdeProblem {
    PdeProblem {
        id: "harmonic".into(),
        kind: ProblemKind::Poisson,
        domain: Domain::unit_disk(),
        rhs: Expr::zero(),
        boundary: Expr::zero(),
        lift: Lift::Zero,
        initial: None,
        coefficient: None,
        exact: Some(Expr::zero()),
    }
}

/// Radial and angular node counts for mode `n`: radial exactness covers
/// `r^(2n+1)`, angular nodes number at least four per oscillation period.
pub fn harmonic_rule_sizes(n: u32, base_n: usize) -> (usize, usize) {
    let radial = base_n.max(n as usize + 2);
    (radial, 4 * radial)
}

pub fn harmonic_record(n: u32, tau: f64, base_n: usize) -> Result<HarmonicFamilyRecord> {
    let problem = zero_disk_problem();
    let (radial, angular) = harmonic_rule_sizes(n, base_n);
    let interior = build_rule_with(&problem.domain, Target::Interior, radial, angular)?;
    let boundary = build_rule_with(&problem.domain, Target::Boundary, radial, angular)?;
    let cfg = LossConfig::from_rules(LossVariant::Penalty, Some(tau), interior, Some(boundary))?;
    let trial = AnalyticTrial {
        field: HarmonicMode { n },
        mode: AnsatzMode::Unconstrained,
    };
    let breakdown = Objective::new(&problem, &cfg)?.evaluate(&trial)?;
    let parts = sobolev_parts(&trial, &AnalyticField::zero(2), 1, &cfg.interior)?;
    let h1_norm = parts.h1_norm();
    Ok(HarmonicFamilyRecord {
        n,
        interior_residual_sq: breakdown.interior,
        boundary_norm_sq: breakdown.boundary,
        loss_tau: breakdown.total,
        l2_norm_sq: parts.l2,
        grad_norm_sq: parts.grad,
        h1_norm,
        h1_ratio: h1_norm / breakdown.total.sqrt(),
        h_half_surrogate: parts.h_half_surrogate(),
        exact: HarmonicClosedForm::new(n, tau),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug)]
pub struct FailureDemo {
    pub records: Vec<HarmonicFamilyRecord>,
    pub slope: f64,
    pub slope_closed_form: f64,
}

pub fn failure_demo(demo: &FailureDemoConfig) -> Result<FailureDemo> {
    let records = demo
        .n_list
        .iter()
        .map(|&n| harmonic_record(n, demo.tau, demo.base_n))
        .collect::<Result<Vec<_>>>()?;
    let slope = log_log_slope(
        &records
            .iter()
            .map(|r| (r.n as f64, r.h1_ratio))
            .collect::<Vec<_>>(),
    );
    let slope_closed_form = log_log_slope(
        &records
            .iter()
            .map(|r| (r.n as f64, r.exact.h1_ratio))
            .collect::<Vec<_>>(),
    );
    Ok(FailureDemo {
        records,
        slope,
        slope_closed_form,
    })
}

pub const FAILURE_HEADER: &str = "n,interior_residual_sq,boundary_norm_sq,loss_tau,l2_norm_sq,grad_norm_sq,h1_norm,h1_ratio,h_half_surrogate,boundary_norm_sq_exact,loss_tau_exact,l2_norm_sq_exact,grad_norm_sq_exact,h1_norm_exact,h1_ratio_exact,h_half_surrogate_exact";

pub fn run_failure_demo(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let demo = failure_demo(&cfg.failure_demo)?;
    let comment = provenance_line(cfg, &format!("tau={}", cfg.failure_demo.tau));
    let rows: Vec<String> = demo
        .records
        .iter()
        .map(|r| {
            let e = &r.exact;
            row!(
                r.n,
                r.interior_residual_sq,
                r.boundary_norm_sq,
                r.loss_tau,
                r.l2_norm_sq,
                r.grad_norm_sq,
                r.h1_norm,
                r.h1_ratio,
                r.h_half_surrogate,
                e.boundary_norm_sq,
                e.loss_tau,
                e.l2_norm_sq,
                e.grad_norm_sq,
                e.h1_norm,
                e.h1_ratio,
                e.h_half_surrogate
            )
        })
        .collect();
    let sup = demo
        .records
        .iter()
        .map(|r| r.h_half_surrogate)
        .fold(0.0, f64::max);
    let fit = vec![
        row!("h1_ratio_slope", demo.slope),
        row!("h1_ratio_slope_exact", demo.slope_closed_form),
        row!("h_half_surrogate_max", sup),
        row!("h_half_surrogate_limit", (PI * PI / 2.0).powf(0.25)),
    ];
    let mut summary = RunSummary::default();
    summary.files.push(write_csv(
        &cfg.out_dir,
        "failure_demo.csv",
        &comment,
        FAILURE_HEADER,
        &rows,
    )?);
    summary.files.push(write_csv(
        &cfg.out_dir,
        "failure_demo_fit.csv",
        &comment,
        "quantity,value",
        &fit,
    )?);
    summary.lines.push(format!(
        "h1_ratio log-log slope {:.4} (closed form {:.4}); surrogate sup {:.4}",
        demo.slope, demo.slope_closed_form, sup
    ));
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub method: &'static str,
    pub final_loss: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub h2_error: f64,
    pub boundary_misfit: f64,
    pub report: CertifiedReport,
}

/// Trains the exact-boundary and the penalty ansatz from the same initial
/// network and evaluates both at their best parameters.
pub fn compare_bc(cfg: &ExperimentConfig, seed: u64) -> Result<[ComparisonRow; 2]> {
    let problem = cfg.problem()?;
    require_elliptic(&problem, "compare-bc")?;
    let exact = require_exact(&problem)?;
    let boundary_rule = build_rule(&problem.domain, Target::Boundary, cfg.quad_n)?;
    let g = problem.boundary_field();
    let schedule = schedule_for(cfg, seed);
    let evaluate =
        |method, spec: &AnsatzSpec, loss: f64, report: CertifiedReport, rule: &QuadratureRule| {
            let parts = sobolev_parts(spec, &exact, 2, rule)?;
            Ok::<_, Error>(ComparisonRow {
                method,
                final_loss: loss,
                l2_error: parts.l2_norm(),
                h1_error: parts.h1_norm(),
                h2_error: parts.h2_norm(),
                boundary_misfit: boundary_misfit(spec, &g, &boundary_rule)?,
                report: report.with_measured(parts.h2_norm()),
            })
        };

    let spec = build_spec(cfg, &problem, seed, Some(AnsatzMode::ExactBc))?;
    let loss_cfg = LossConfig::new(LossVariant::Interior, &problem.domain, cfg.quad_n, None)?;
    let out = train_with(&spec, &problem, &loss_cfg, &schedule, |_| Ok(()))?;
    let report = h2_report(&problem, out.best_loss, cfg.user_constant)?.with_variant("exact_bc");
    let exact_row = evaluate(
        "exact_bc",
        &out.best,
        out.best_loss,
        report,
        &loss_cfg.interior,
    )?;

    let spec = build_spec(cfg, &problem, seed, Some(AnsatzMode::Unconstrained))?;
    let loss_cfg = LossConfig::new(
        LossVariant::Penalty,
        &problem.domain,
        cfg.quad_n,
        Some(cfg.tau),
    )?;
    let out = train_with(&spec, &problem, &loss_cfg, &schedule, |_| Ok(()))?;
    let report = penalty_h_half_estimator(out.best_loss, cfg.tau)?;
    let mut penalty_row = evaluate(
        "penalty",
        &out.best,
        out.best_loss,
        report,
        &loss_cfg.interior,
    )?;
    // the estimator bounds the H^{1/2} error, not H²
    penalty_row.report.measured_error = None;
    Ok([exact_row, penalty_row])
}

pub const COMPARE_HEADER: &str =
    "seed,method,final_loss,l2_error,h1_error,h2_error,boundary_misfit,certified_bound_or_estimator,provenance,certified";

pub fn run_penalty_vs_exact(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let results = per_seed(&cfg.seeds, opts, |s| compare_bc(cfg, s))?;
    let comment = provenance_line(cfg, &format!("problem={} tau={}", cfg.problem, cfg.tau));
    let mut rows = Vec::new();
    let mut summary = RunSummary::default();
    let mut violation = None;
    for (seed, pair) in cfg.seeds.iter().zip(&results) {
        for r in pair {
            rows.push(row!(
                *seed,
                r.method,
                r.final_loss,
                r.l2_error,
                r.h1_error,
                r.h2_error,
                r.boundary_misfit,
                r.report.bound,
                r.report.provenance,
                r.report.certified
            ));
            if r.report.holds() == Some(false) && violation.is_none() {
                violation = Some(Error::BoundViolation {
                    step: cfg.schedule.steps,
                    error: r.h2_error,
                    bound: r.report.bound,
                });
            }
            summary.lines.push(format!(
                "seed {seed} {}: loss {:.4e}, h2 error {:.4e}, boundary misfit {:.2e}, {} {:.4e}",
                r.method,
                r.final_loss,
                r.h2_error,
                r.boundary_misfit,
                if r.report.certified {
                    "certified bound"
                } else {
                    "heuristic estimator"
                },
                r.report.bound
            ));
        }
    }
    summary.files.push(write_csv(
        &cfg.out_dir,
        "compare_bc.csv",
        &comment,
        COMPARE_HEADER,
        &rows,
    )?);
    match violation {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicRow {
    pub step: usize,
    pub loss: f64,
    pub x_norm_error: f64,
    /// `x_norm_error / sqrt(loss)`; NaN at zero loss.
    pub ratio: f64,
    /// Max `|v(0, x) - u0(x)|` over spatial interior and boundary nodes.
    pub initial_slice_error: f64,
    /// Max `|v(t, x)|` over time nodes and spatial boundary nodes.
    pub boundary_slice_error: f64,
    pub report: CertifiedReport,
}

#[derive(Clone, Debug)]
pub struct ParabolicRun {
    pub seed: u64,
    pub rows: Vec<ParabolicRow>,
    pub outcome: TrainOutcome,
}

fn slice_errors(v: &AnsatzSpec, problem: &PdeProblem, n: usize) -> Result<(f64, f64)> {
    let Domain::SpaceTime { t_end, spatial } = &problem.domain else {
        return Err(Error::Config(
            "parabolic run needs a space-time problem".into(),
        ));
    };
    let u0 = AnalyticField::new(
        problem.initial.clone().unwrap_or_else(Expr::zero),
        spatial.dim(),
    );
    let interior = build_rule(spatial, Target::Interior, n)?;
    let boundary = build_rule(spatial, Target::Boundary, n)?;
    let at = |t: f64, x: &[f64]| {
        let mut p = Vec::with_capacity(1 + x.len());
        p.push(t);
        p.extend_from_slice(x);
        p
    };
    let mut initial: f64 = 0.0;
    for x in interior.nodes.iter().chain(&boundary.nodes) {
        initial = initial.max((v.value(&at(0.0, x))? - u0.value(x)?).abs());
    }
    let (times, _) = gauss_interval(0.0, *t_end, n);
    let mut lateral: f64 = 0.0;
    for &t in times.iter().chain([0.0, *t_end].iter()) {
        for x in &boundary.nodes {
            lateral = lateral.max((v.value(&at(t, x))? - problem.boundary.eval(x)?).abs());
        }
    }
    Ok((initial, lateral))
}

pub fn parabolic_trajectory(cfg: &ExperimentConfig, seed: u64) -> Result<ParabolicRun> {
    let problem = cfg.problem()?;
    if problem.kind != ProblemKind::Heat {
        return Err(Error::Config(format!(
            "parabolic-run needs a heat problem, got {}",
            problem.id
        )));
    }
    let exact = require_exact(&problem)?;
    let spec = build_spec(cfg, &problem, seed, None)?;
    let loss_cfg = LossConfig::new(LossVariant::Parabolic, &problem.domain, cfg.quad_n, None)?;
    let mut rows = Vec::new();
    let outcome = train_with(&spec, &problem, &loss_cfg, &schedule_for(cfg, seed), |c| {
        let v = spec.with_flat(c.params)?;
        let x = x_norm_error(&v, &exact, &loss_cfg.interior)?.total();
        let (initial_slice_error, boundary_slice_error) = slice_errors(&v, &problem, cfg.quad_n)?;
        let ratio = if c.loss > 0.0 {
            x / c.loss.sqrt()
        } else {
            f64::NAN
        };
        rows.push(ParabolicRow {
            step: c.step,
            loss: c.loss,
            x_norm_error: x,
            ratio,
            initial_slice_error,
            boundary_slice_error,
            report: parabolic_bound(c.loss, cfg.parabolic_constant)?.with_measured(x),
        });
        Ok(())
    })?;
    Ok(ParabolicRun {
        seed,
        rows,
        outcome,
    })
}

/// Coefficient of variation of the ratio over checkpoints strictly after `step`.
pub fn ratio_variation_after(rows: &[ParabolicRow], step: usize) -> Option<f64> {
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| r.step > step && r.ratio.is_finite())
        .map(|r| r.ratio)
        .collect();
    coefficient_of_variation(&ratios)
}

pub const PARABOLIC_HEADER: &str =
    "seed,step,loss,x_norm_error,ratio,initial_slice_error,boundary_slice_error";

pub fn run_parabolic(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let runs = per_seed(&cfg.seeds, opts, |s| parabolic_trajectory(cfg, s))?;
    let problem = cfg.problem()?;
    let first = &runs[0].rows[0].report;
    let extra = format!(
        "problem={} constant={} provenance={} certified={}",
        problem.id, first.constant, first.provenance, first.certified
    );
    let comment = provenance_line(cfg, &extra);
    let mut rows = Vec::new();
    let mut history = Vec::new();
    let mut summary = RunSummary::default();
    let mut violation = None;
    for run in &runs {
        for r in &run.rows {
            rows.push(row!(
                run.seed,
                r.step,
                r.loss,
                r.x_norm_error,
                r.ratio,
                r.initial_slice_error,
                r.boundary_slice_error
            ));
            if r.report.holds() == Some(false) && violation.is_none() {
                violation = Some(Error::BoundViolation {
                    step: r.step,
                    error: r.x_norm_error,
                    bound: r.report.bound,
                });
            }
        }
        history.extend(history_rows(run.seed, &run.outcome));
        let spec = build_spec(cfg, &problem, run.seed, None)?;
        summary.files.push(write_final_checkpoint(
            &cfg.out_dir,
            &format!("checkpoint_seed{}.bin", run.seed),
            &spec,
            &run.outcome,
        )?);
        let cv = ratio_variation_after(&run.rows, 500)
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        summary.lines.push(format!(
            "seed {}: best loss {:.6e}, ratio coefficient of variation after step 500: {cv}",
            run.seed, run.outcome.best_loss
        ));
    }
    summary.files.insert(
        0,
        write_csv(
            &cfg.out_dir,
            "parabolic.csv",
            &comment,
            PARABOLIC_HEADER,
            &rows,
        )?,
    );
    summary.files.push(write_csv(
        &cfg.out_dir,
        "loss_history.csv",
        &comment,
        "seed,step,loss",
        &history,
    )?);
    match violation {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SobolevRow {
    pub run: LossVariant,
    pub step: usize,
    /// `sqrt` of the interior loss.
    pub l2_residual: f64,
    /// `sqrt` of the k = 1 Sobolev loss.
    pub h1_residual: f64,
    pub h2_error: f64,
    /// `||grad Δ(v - u*)||`.
    pub h3_error_proxy: f64,
}

/// Interior-trained and Sobolev-trained trajectories from the same initial network.
pub fn sobolev_trajectories(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<SobolevRow>> {
    let problem = cfg.problem()?;
    if problem.kind != ProblemKind::Poisson {
        return Err(Error::Config(format!(
            "sobolev-run needs a Poisson problem, got {}",
            problem.id
        )));
    }
    let exact = require_exact(&problem)?;
    let spec = build_spec(cfg, &problem, seed, None)?;
    let interior_cfg = LossConfig::new(LossVariant::Interior, &problem.domain, cfg.quad_n, None)?;
    let sobolev_cfg = LossConfig::new(LossVariant::SobolevK1, &problem.domain, cfg.quad_n, None)?;
    let mut rows = Vec::new();
    for (variant, train_cfg) in [
        (LossVariant::Interior, &interior_cfg),
        (LossVariant::SobolevK1, &sobolev_cfg),
    ] {
        train_with(&spec, &problem, train_cfg, &schedule_for(cfg, seed), |c| {
            let v = spec.with_flat(c.params)?;
            rows.push(SobolevRow {
                run: variant,
                step: c.step,
                l2_residual: interior_loss(&v, &problem, &interior_cfg)?.sqrt(),
                h1_residual: sobolev_loss(&v, &problem, &sobolev_cfg)?.sqrt(),
                h2_error: sobolev_parts(&v, &exact, 2, &interior_cfg.interior)?.h2_norm(),
                h3_error_proxy: grad_laplacian_error(&v, &exact, &interior_cfg.interior)?,
            });
            Ok(())
        })?;
    }
    Ok(rows)
}

pub const SOBOLEV_HEADER: &str = "seed,run,step,l2_residual,h1_residual,h2_error,h3_error_proxy";

pub fn run_sobolev(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let results = per_seed(&cfg.seeds, opts, |s| sobolev_trajectories(cfg, s))?;
    let comment = provenance_line(cfg, &format!("problem={}", cfg.problem));
    let mut rows = Vec::new();
    let mut summary = RunSummary::default();
    for (seed, run) in cfg.seeds.iter().zip(&results) {
        for r in run {
            rows.push(row!(
                *seed,
                r.run,
                r.step,
                r.l2_residual,
                r.h1_residual,
                r.h2_error,
                r.h3_error_proxy
            ));
        }
        for variant in [LossVariant::Interior, LossVariant::SobolevK1] {
            if let Some(last) = run.iter().filter(|r| r.run == variant).last() {
                summary.lines.push(format!(
                    "seed {seed} {variant}: h2 error {:.4e}, grad-laplacian error {:.4e}",
                    last.h2_error, last.h3_error_proxy
                ));
            }
        }
    }
    summary.files.push(write_csv(
        &cfg.out_dir,
        "sobolev.csv",
        &comment,
        SOBOLEV_HEADER,
        &rows,
    )?);
    Ok(summary)
}

pub const FD_HEADER: &str = "seed,index,analytic,numeric,abs_error,rel_error,near_zero";

/// Gradient check of the configured loss variant on the configured problem.
pub fn run_fd_check(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary> {
    let problem = cfg.problem()?;
    let variant = cfg.loss_variant()?;
    if (variant == LossVariant::Parabolic) != (problem.kind == ProblemKind::Heat) {
        return Err(Error::Config(format!(
            "{variant} loss does not apply to problem {}",
            problem.id
        )));
    }
    let mode = (variant == LossVariant::Penalty).then_some(AnsatzMode::Unconstrained);
    let tau = (variant == LossVariant::Penalty).then_some(cfg.tau);
    let reports = per_seed(&cfg.seeds, opts, |s| {
        let spec = build_spec(cfg, &problem, s, mode)?;
        let loss_cfg = LossConfig::new(variant, &problem.domain, cfg.quad_n, tau)?;
        fd_check(&spec, &problem, &loss_cfg, cfg.fd_coords, s)
    })?;
    let comment = provenance_line(cfg, &format!("problem={} loss={variant}", cfg.problem));
    let mut rows = Vec::new();
    let mut summary = RunSummary::default();
    for (seed, r) in cfg.seeds.iter().zip(&reports) {
        for e in &r.entries {
            rows.push(row!(
                *seed,
                e.index,
                e.analytic,
                e.numeric,
                e.abs_error(),
                if e.near_zero() { 0.0 } else { e.rel_error() },
                e.near_zero()
            ));
        }
        summary.failed |= !r.passed();
        summary.lines.push(format!(
            "seed {seed} {variant}: max relative {:.3e}, max absolute (near zero) {:.3e}: {}",
            r.max_relative,
            r.max_absolute,
            if r.passed() { "pass" } else { "FAIL" }
        ));
    }
    summary.files.push(write_csv(
        &cfg.out_dir,
        "fd_check.csv",
        &comment,
        FD_HEADER,
        &rows,
    )?);
    Ok(summary)
}
