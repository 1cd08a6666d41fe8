//! Execution of run configurations and comparisons.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use riccati_core::dense::{self, DenseCare};
use riccati_core::ilrsi::{ilrsi_solve_with_clock, IlrsiOptions, SolveFailure};
use riccati_core::linalg;
use riccati_core::rksm::{rksm_solve_with_clock, PoleStrategy, RksmOptions};
use riccati_core::verify::{run_suite, Suite, VerifyOptions, VerifyReport};
use riccati_core::shifts::{penzl_shifts, AdaptiveMode, ShiftOrigin, ShiftSequence};
use riccati_core::{
    CMat, CareProblem, Clock, ConvergenceHistory, IterationRecord, LowRankSolution, NoClock, SolveStatus, C64,
    DEFAULT_DENSE_THRESHOLD, DEFAULT_STABILITY_THRESHOLD,
};
use serde::Serialize;

use crate::config::{ProblemSpec, RitzKind, RunConfig, ShiftSpec, SolverKind};
use crate::error::{exit, CliError, CliResult};
use crate::mtx;
use crate::output::{self, write_atomic};

pub const DENSE_THRESHOLD_ENV: &str = "RICCATI_SI_DENSE_THRESHOLD";

/// Largest order accepted by the dense solvers.
pub fn dense_threshold() -> CliResult<usize> {
    match std::env::var(DENSE_THRESHOLD_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{DENSE_THRESHOLD_ENV}={v} is not a nonnegative integer"))),
        Err(_) => Ok(DEFAULT_DENSE_THRESHOLD),
    }
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Approximate solution in whichever form the solver produced.
pub enum Solution {
    LowRank(LowRankSolution),
    Dense(CMat),
}

impl Solution {
    /// `(W, D)` with `X ~ W D W^*`.
    pub fn factors(&self, truncation_tol: f64) -> CliResult<(CMat, CMat)> {
        match self {
            Solution::LowRank(s) => {
                let s = match &s.compressed {
                    Some(_) => s.clone(),
                    None => riccati_core::ilrsi::truncate_basis(s, truncation_tol),
                };
                let (w, r) = s.compressed.clone().expect("truncated");
                let y = s.middle_y()?;
                Ok((w, linalg::hermitian_part(&(&r * y * r.adjoint()))))
            }
            Solution::Dense(x) => {
                let eig = linalg::hermitian_part(x).symmetric_eigen();
                let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i].abs() > truncation_tol * top).collect();
                let mut w = CMat::zeros(x.nrows(), keep.len());
                let mut d = CMat::zeros(keep.len(), keep.len());
                for (c, &i) in keep.iter().enumerate() {
                    w.set_column(c, &eig.eigenvectors.column(i));
                    d[(c, c)] = C64::new(eig.eigenvalues[i], 0.0);
                }
                Ok((w, d))
            }
        }
    }
}

pub struct RunOutcome {
    pub history: ConvergenceHistory,
    pub shifts: Vec<C64>,
    pub shift_origin: Option<ShiftOrigin>,
    pub solution: Option<Solution>,
    pub fallbacks: usize,
    pub error: Option<String>,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub generalized: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        match self.history.status {
            SolveStatus::Converged => exit::CONVERGED,
            SolveStatus::MaxIter => exit::MAX_ITER,
            SolveStatus::Breakdown => exit::BREAKDOWN,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub generalized: bool,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub label: Option<String>,
    pub solver: SolverKind,
    pub problem: ProblemSummary,
    pub status: &'static str,
    pub iterations: usize,
    pub dim: usize,
    pub rank: usize,
    pub final_rel_residual: Option<f64>,
    pub tol: f64,
    pub shift_origin: Option<String>,
    pub shifts: Vec<[f64; 2]>,
    pub adaptive_fallbacks: usize,
    pub error: Option<String>,
    pub seed: u64,
}

impl RunSummary {
    pub fn new(cfg: &RunConfig, out: &RunOutcome) -> Self {
        let last = out.history.last();
        RunSummary {
            label: cfg.label.clone(),
            solver: cfg.solver,
            problem: ProblemSummary { n: out.n, p: out.p, q: out.q, generalized: out.generalized },
            status: out.history.status.as_str(),
            iterations: last.map_or(0, |r| r.iter),
            dim: last.map_or(0, |r| r.dim),
            rank: last.map_or(0, |r| r.rank),
            final_rel_residual: last.map(|r| r.rel_residual),
            tol: cfg.tol,
            shift_origin: out.shift_origin.map(|o| o.to_string()),
            shifts: output::shifts_to_pairs(&out.shifts),
            adaptive_fallbacks: out.fallbacks,
            error: out.error.clone(),
            seed: cfg.seed,
        }
    }
}

fn adaptive(kind: RitzKind) -> PoleStrategy {
    PoleStrategy::Adaptive { mode: AdaptiveMode::from(kind), region: None }
}

fn rksm_options(cfg: &RunConfig) -> RksmOptions {
    RksmOptions { tol: cfg.tol, max_iter: cfg.max_iter, truncation_tol: cfg.truncation_tol, ..Default::default() }
}

fn resolve_shifts(cfg: &RunConfig, problem: &CareProblem) -> CliResult<Option<ShiftSequence>> {
    Ok(match &cfg.shifts {
        None | Some(ShiftSpec::Adaptive(_)) => None,
        Some(ShiftSpec::Penzl(spec)) => Some(penzl_shifts(problem, &(*spec).into())?),
        Some(ShiftSpec::File(path)) => {
            let v = output::read_shifts(&cfg.resolve(path))?;
            Some(ShiftSequence::new(v, ShiftOrigin::User).map_err(|e| CliError::Config(format!("shift file: {e}")))?)
        }
        Some(ShiftSpec::RksmPoles(kind)) => {
            let o = rksm_solve_with_clock(problem, &adaptive(*kind), &rksm_options(cfg), &NoClock)?;
            let origin = match kind {
                RitzKind::Plain => ShiftOrigin::AdaptiveRitz,
                RitzKind::Stabilized => ShiftOrigin::AdaptiveStabilized,
            };
            Some(ShiftSequence::closing(o.poles, origin)?)
        }
    })
}

fn numerical_rank(x: &CMat, tol: f64) -> usize {
    let sv = linalg::singular_values(x);
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > tol * top).count()
}

fn check_dense_size(n: usize) -> CliResult<()> {
    let limit = dense_threshold()?;
    if n > limit {
        return Err(CliError::Config(format!(
            "dense solvers are limited to n <= {limit} (n = {n}); raise {DENSE_THRESHOLD_ENV} to override"
        )));
    }
    Ok(())
}

fn dense_fixed_point(
    cfg: &RunConfig,
    problem: &CareProblem,
    shifts: &ShiftSequence,
    clock: &dyn Clock,
) -> CliResult<(ConvergenceHistory, Option<CMat>, Option<String>)> {
    check_dense_size(problem.n())?;
    let care = DenseCare::from_problem(problem)?;
    let g = problem.g_norm();
    let t0 = clock.seconds();
    let mut history = ConvergenceHistory::new();
    let mut x = CMat::zeros(problem.n(), problem.n());
    for it in 1..=cfg.max_iter {
        match dense::dense_subspace_iteration(&care, &[shifts.cyclic(it - 1)], &x, 1) {
            Ok(mut v) => x = v.remove(0).x,
            Err(e) => {
                history.status = SolveStatus::Breakdown;
                return Ok((history, Some(x), Some(e.to_string())));
            }
        }
        let rel = dense::problem_residual(problem, &x).norm() / g;
        history.push(IterationRecord {
            iter: it,
            dim: it * problem.p(),
            rank: numerical_rank(&x, cfg.truncation_tol),
            rel_residual: rel,
            seconds: clock.seconds() - t0,
        });
        if rel <= cfg.tol {
            history.status = SolveStatus::Converged;
            break;
        }
    }
    Ok((history, Some(x), None))
}

fn dense_exact(cfg: &RunConfig, problem: &CareProblem, clock: &dyn Clock) -> CliResult<(ConvergenceHistory, Option<CMat>, Option<String>)> {
    check_dense_size(problem.n())?;
    let t0 = clock.seconds();
    let mut history = ConvergenceHistory::new();
    match dense::dense_care_solve(problem) {
        Ok(x) => {
            let rel = dense::problem_residual(problem, &x).norm() / problem.g_norm();
            history.push(IterationRecord {
                iter: 1,
                dim: problem.n(),
                rank: numerical_rank(&x, cfg.truncation_tol),
                rel_residual: rel,
                seconds: clock.seconds() - t0,
            });
            history.status = if rel <= cfg.tol { SolveStatus::Converged } else { SolveStatus::MaxIter };
            Ok((history, Some(x), None))
        }
        Err(e) => {
            history.status = SolveStatus::Breakdown;
            Ok((history, None, Some(e.to_string())))
        }
    }
}

/// Builds the problem and runs the configured solver. Solver breakdowns are
/// reported in the outcome; configuration and input errors are returned.
pub fn execute(cfg: &RunConfig) -> CliResult<RunOutcome> {
    let problem = cfg.problem.build(&cfg.base_dir)?;
    problem.check_stability(DEFAULT_STABILITY_THRESHOLD)?;
    let clock: Box<dyn Clock> = if cfg.timing { Box::new(WallClock(Instant::now())) } else { Box::new(NoClock) };
    let shifts = resolve_shifts(cfg, &problem)?;
    let mut out = RunOutcome {
        history: ConvergenceHistory::new(),
        shifts: shifts.as_ref().map(|s| s.as_slice().to_vec()).unwrap_or_default(),
        shift_origin: shifts.as_ref().map(|s| s.origin()),
        solution: None,
        fallbacks: 0,
        error: None,
        n: problem.n(),
        p: problem.p(),
        q: problem.q(),
        generalized: problem.e().is_some(),
    };
    let failed = |out: &mut RunOutcome, f: SolveFailure| {
        out.history = f.history;
        out.error = Some(f.error.to_string());
    };
    match cfg.solver {
        SolverKind::Ilrsi => {
            let seq = shifts.expect("validated");
            let opts = IlrsiOptions { tol: cfg.tol, max_iter: cfg.max_iter, truncation_tol: cfg.truncation_tol, residual_every: 1 };
            match ilrsi_solve_with_clock(&problem, &seq, &opts, clock.as_ref()) {
                Ok((sol, h)) => {
                    out.history = h;
                    out.solution = Some(Solution::LowRank(sol));
                }
                Err(f) => failed(&mut out, f),
            }
        }
        SolverKind::Rksm => {
            let strategy = match (&cfg.shifts, shifts) {
                (Some(ShiftSpec::Adaptive(kind)), _) => adaptive(*kind),
                (_, Some(seq)) => PoleStrategy::Precomputed(seq),
                _ => unreachable!("validated"),
            };
            out.shift_origin = Some(strategy.origin());
            match rksm_solve_with_clock(&problem, &strategy, &rksm_options(cfg), clock.as_ref()) {
                Ok(o) => {
                    out.history = o.history;
                    out.shifts = o.poles;
                    out.fallbacks = o.fallbacks;
                    out.solution = Some(Solution::LowRank(o.solution));
                }
                Err(f) => failed(&mut out, f),
            }
        }
        SolverKind::DenseFixedPoint => {
            let seq = shifts.expect("validated");
            let (h, x, err) = dense_fixed_point(cfg, &problem, &seq, clock.as_ref())?;
            out.history = h;
            out.solution = x.map(Solution::Dense);
            out.error = err;
        }
        SolverKind::DenseExact => {
            let (h, x, err) = dense_exact(cfg, &problem, clock.as_ref())?;
            out.history = h;
            out.solution = x.map(Solution::Dense);
            out.error = err;
        }
    }
    Ok(out)
}

/// Writes history, shifts, summary and optional factors of one run into `dir`.
pub fn write_outputs(cfg: &RunConfig, out: &RunOutcome, dir: &Path) -> CliResult<()> {
    let o = &cfg.output;
    write_atomic(&dir.join(&o.history), &output::history_csv(&out.history)?)?;
    write_atomic(&dir.join(&o.shifts), &output::to_json_bytes(&output::shifts_to_pairs(&out.shifts))?)?;
    write_atomic(&dir.join(&o.summary), &output::to_json_bytes(&RunSummary::new(cfg, out))?)?;
    if o.factors {
        if let Some(sol) = &out.solution {
            let (w, d) = sol.factors(cfg.truncation_tol)?;
            mtx::write_complex(&dir.join("factor_w.mtx"), &w)?;
            mtx::write_complex(&dir.join("factor_d.mtx"), &d)?;
        }
    }
    Ok(())
}

pub fn cmd_run(config: &Path, out_dir: Option<&Path>) -> CliResult<u8> {
    let cfg = RunConfig::load(config)?;
    log::info!("running {:?} from {}", cfg.solver, config.display());
    let out = execute(&cfg)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.base_dir.clone());
    write_outputs(&cfg, &out, &dir)?;
    if let Some(e) = &out.error {
        eprintln!("solver stopped: {e}");
    }
    Ok(out.exit_code())
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    /// Smallest dimension at which each series reached its tolerance.
    pub dims_reaching_tol: BTreeMap<String, Option<usize>>,
    /// Label of the series reaching tolerance at the smallest dimension, `"tie"`,
    /// or null when none did.
    pub winner: Option<String>,
    pub tied: Vec<String>,
}

fn same_problem(a: &RunConfig, b: &RunConfig) -> bool {
    match (&a.problem, &b.problem) {
        (ProblemSpec::Files { a: a1, b: b1, c: c1, e: e1 }, ProblemSpec::Files { a: a2, b: b2, c: c2, e: e2 }) => {
            a.resolve(a1) == b.resolve(a2)
                && a.resolve(b1) == b.resolve(b2)
                && a.resolve(c1) == b.resolve(c2)
                && e1.as_ref().map(|p| a.resolve(p)) == e2.as_ref().map(|p| b.resolve(p))
        }
        (x, y) => x == y,
    }
}

fn unique_labels(configs: &[(std::path::PathBuf, RunConfig)]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    configs
        .iter()
        .map(|(path, cfg)| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            let base = cfg.label(&stem);
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}_{count}")
            }
        })
        .collect()
}

pub fn merged_csv(labels: &[String], histories: &[&ConvergenceHistory]) -> CliResult<Vec<u8>> {
    let mut rows: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (k, h) in histories.iter().enumerate() {
        for r in h.records() {
            rows.entry(r.dim).or_insert_with(|| vec![None; histories.len()])[k] = Some(r.rel_residual);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    let mut header = vec!["dim".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (dim, vals) in rows {
        let mut rec = vec![dim.to_string()];
        rec.extend(vals.into_iter().map(|v| v.map(|x| format!("{x:e}")).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

pub fn verdict(labels: &[String], reached: &[Option<usize>]) -> Verdict {
    let best = reached.iter().flatten().min().copied();
    let tied: Vec<String> = match best {
        Some(b) => labels.iter().zip(reached).filter(|(_, r)| **r == Some(b)).map(|(l, _)| l.clone()).collect(),
        None => Vec::new(),
    };
    let winner = match tied.len() {
        0 => None,
        1 => Some(tied[0].clone()),
        _ => Some("tie".into()),
    };
    Verdict {
        dims_reaching_tol: labels.iter().cloned().zip(reached.iter().copied()).collect(),
        winner,
        tied: if tied.len() > 1 { tied } else { Vec::new() },
    }
}

pub fn cmd_compare(configs: &[std::path::PathBuf], out_dir: &Path) -> CliResult<u8> {
    if configs.len() < 2 {
        return Err(CliError::Config("compare needs at least two configs".into()));
    }
    let loaded: Vec<(std::path::PathBuf, RunConfig)> =
        configs.iter().map(|p| RunConfig::load(p).map(|c| (p.clone(), c))).collect::<CliResult<_>>()?;
    if let Some((p, _)) = loaded.iter().skip(1).find(|(_, c)| !same_problem(&loaded[0].1, c)) {
        return Err(CliError::Config(format!("{} uses a different problem than {}", p.display(), configs[0].display())));
    }
    let labels = unique_labels(&loaded);
    let outcomes: Vec<CliResult<RunOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = loaded.iter().map(|(_, cfg)| s.spawn(move || execute(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut runs = Vec::with_capacity(outcomes.len());
    for ((label, (_, cfg)), res) in labels.iter().zip(&loaded).zip(outcomes) {
        let out = res?;
        write_outputs(cfg, &out, &out_dir.join(label))?;
        if let Some(e) = &out.error {
            eprintln!("{label}: solver stopped: {e}");
        }
        runs.push(out);
    }
    let histories: Vec<&ConvergenceHistory> = runs.iter().map(|r| &r.history).collect();
    write_atomic(&out_dir.join("merged.csv"), &merged_csv(&labels, &histories)?)?;
    let reached: Vec<Option<usize>> = runs.iter().zip(&loaded).map(|(r, (_, c))| r.history.dim_reaching(c.tol)).collect();
    write_atomic(&out_dir.join("verdict.json"), &output::to_json_bytes(&verdict(&labels, &reached))?)?;
    Ok(exit::CONVERGED)
}

/// Prints the report as JSON and lists failing checks on stderr.
pub fn cmd_verify(suite: &str, opts: &VerifyOptions, out: Option<&Path>) -> CliResult<u8> {
    let suite: Suite = suite.parse().map_err(|e: riccati_core::Error| CliError::Config(e.to_string()))?;
    let report = run_suite(suite, opts);
    let bytes = output::to_json_bytes(&VerifyJson::from(&report))?;
    match out {
        Some(path) => write_atomic(path, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    for c in report.failures() {
        eprintln!("FAIL {} (instance {}): {:e} > {:e}", c.name, c.instance, c.value, c.threshold);
    }
    Ok(if report.passed() { exit::CONVERGED } else { exit::VERIFY_FAILED })
}

#[derive(Serialize)]
struct CheckJson<'a> {
    name: &'a str,
    instance: usize,
    value: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyJson<'a> {
    suite: &'static str,
    seed: u64,
    passed: bool,
    failures: usize,
    checks: Vec<CheckJson<'a>>,
}

impl<'a> From<&'a VerifyReport> for VerifyJson<'a> {
    fn from(r: &'a VerifyReport) -> Self {
        VerifyJson {
            suite: r.suite.as_str(),
            seed: r.seed,
            passed: r.passed(),
            failures: r.failures().count(),
            checks: r
                .checks
                .iter()
                .map(|c| CheckJson { name: &c.name, instance: c.instance, value: c.value, threshold: c.threshold, passed: c.passed })
                .collect(),
        }
    }
}

pub fn cmd_generate(config: &Path, out_dir: &Path) -> CliResult<u8> {
    let cfg = RunConfig::load(config)?;
    let problem = cfg.problem.build(&cfg.base_dir)?;
    mtx::write_problem(out_dir, &problem)?;
    Ok(exit::CONVERGED)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_cases() {
        let l = vec!["a".to_string(), "b".to_string()];
        assert_eq!(verdict(&l, &[Some(4), Some(6)]).winner.as_deref(), Some("a"));
        let t = verdict(&l, &[Some(4), Some(4)]);
        assert_eq!(t.winner.as_deref(), Some("tie"));
        assert_eq!(t.tied, l);
        assert_eq!(verdict(&l, &[None, None]).winner, None);
    }

    #[test]
    fn merged_rows_are_keyed_by_dimension() {
        let mut a = ConvergenceHistory::new();
        let mut b = ConvergenceHistory::new();
        a.push(IterationRecord { iter: 1, dim: 1, rank: 1, rel_residual: 0.5, seconds: 0.0 });
        b.push(IterationRecord { iter: 1, dim: 2, rank: 2, rel_residual: 0.25, seconds: 0.0 });
        let text = String::from_utf8(merged_csv(&["a".into(), "b".into()], &[&a, &b]).unwrap()).unwrap();
        assert_eq!(text, "dim,a,b\n1,5e-1,\n2,,2.5e-1\n");
    }
}
