//! Command execution.

use std::io::Write;
use std::path::{Path, PathBuf};

use brach_core::lattice::{build_hamiltonian, constraint_norm, Basis, WeightProfile};
use brach_core::oracles::{
    asymptotic_fit, classical_bound, direct_hop_time, three_qubit_optimal, unpenalized_time, weighted_nn_chain_3q,
};
use brach_core::propagator::transfer_fidelity;
use brach_core::qbe::crosscheck;
use brach_core::reduced::Protocol;
use brach_core::shooting::ShootingConfig;
use brach_core::trajectories::TrajectoryTiming;
use serde::Serialize;

use crate::cli::{Cli, Command, OracleKind, Suite, SweepKind};
use crate::config::{Format, OutputFlags, RunConfig, SolverFlags, STORE_ENV};
use crate::error::{exit, CliError, Result};
use crate::export::{
    protocol_csv, read_protocol, render, series_csv, sweep_csv, timings_csv, write_file, write_protocol, SeriesPoint,
    SweepRow,
};
use crate::reproduce::{
    advantage_checks, fit_checks, g_sweep_series, optimal_sweep, optimal_time_checks, three_qubit_checks,
    trajectory_checks, trajectory_timings, Check,
};
use crate::store::SolutionStore;

/// Largest lattice whose protocols also get the full-matrix cross-check.
pub const QBE_MAX_N: usize = 8;

/// Output sinks and the resolved configuration of one invocation.
pub struct Context<'a> {
    pub config: RunConfig,
    pub out: &'a mut dyn Write,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{}", line).map_err(|e| CliError::io("<stdout>", e))
    }

    fn progress(&self, line: &str) {
        if !self.quiet {
            eprintln!("{}", line);
        }
    }

    fn store(&self) -> Result<SolutionStore> {
        SolutionStore::open(self.config.store.clone().unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_STORE)))
    }

    fn shooting(&self) -> Result<ShootingConfig> {
        self.config.solver.shooting()
    }

    /// Writes `bytes` to `<out_dir>/<name>` when an output directory is set,
    /// otherwise to stdout.
    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.config.output.dir {
            Some(dir) => {
                let path = dir.join(name);
                write_file(&path, bytes)?;
                self.progress(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => self.out.write_all(bytes).map_err(|e| CliError::io("<stdout>", e)),
        }
    }
}

/// Resolves configuration and runs the command; returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let env = std::env::var(STORE_ENV).ok();
    config.resolve_store(cli.store.as_deref(), env.as_deref());
    let mut ctx = Context { config, out, quiet: cli.quiet };
    match cli.command {
        Command::Solve { lattice, solver, output, out, csv } => {
            ctx.config.apply_lattice(&lattice);
            apply(&mut ctx.config, &solver, &output);
            solve(&mut ctx, out.as_deref(), csv.as_deref())
        }
        Command::Sweep { kind: SweepKind::N { from, to, no_reuse, lattice, solver, output } } => {
            ctx.config.apply_lattice(&lattice);
            apply(&mut ctx.config, &solver, &output);
            sweep_n(&mut ctx, from, to, !no_reuse)
        }
        Command::Sweep { kind: SweepKind::G { g_min, g_max, steps, solver, output } } => {
            apply(&mut ctx.config, &solver, &output);
            sweep_g(&mut ctx, g_min, g_max, steps)
        }
        Command::Trajectories { lattice, solver, output, override_cap } => {
            ctx.config.apply_lattice(&lattice);
            apply(&mut ctx.config, &solver, &output);
            trajectories(&mut ctx, override_cap)
        }
        Command::Oracle { which } => oracle(&mut ctx, which),
        Command::Verify { protocol, qbe } => verify(&mut ctx, &protocol, qbe),
        Command::Reproduce { suite, max_n, use_store, solver, output } => {
            apply(&mut ctx.config, &solver, &output);
            reproduce(&mut ctx, suite, max_n, use_store)
        }
    }
}

fn apply(config: &mut RunConfig, solver: &SolverFlags, output: &OutputFlags) {
    config.apply_solver(solver);
    config.apply_output(output);
}

fn solve(ctx: &mut Context, out: Option<&Path>, csv: Option<&Path>) -> Result<i32> {
    let n = ctx.config.require_n()?;
    let spec = ctx.config.spec(n)?;
    let cfg = ctx.shooting()?;
    let store = ctx.store()?;
    let lib = store.library(&spec.profile_key())?;
    ctx.progress(&format!("solving N = {} ({})", n, spec.profile_key()));
    let mut r = brach_core::warmstart::warm_solve(&spec, &lib, &cfg)
        .map_err(|e| CliError::NotConverged(format!("N = {}: {}", n, e)))?;
    if n <= QBE_MAX_N {
        crosscheck(&r.protocol)?.insert_into(&mut r.protocol.diagnostics);
    }
    let record = brach_core::warmstart::SolutionRecord::from_result(&spec, &r);
    store.append(&record, cfg.fidelity_tol)?;

    let path = match out {
        Some(p) => p.to_path_buf(),
        None => ctx.config.output.dir.clone().unwrap_or_default().join(format!("protocol-n{}.json", n)),
    };
    write_protocol(&path, &r.protocol)?;
    if let Some(c) = csv {
        let mut buf = Vec::new();
        protocol_csv(&r.protocol, &mut buf)?;
        write_file(c, &buf)?;
    }
    match ctx.config.output.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&record).map_err(|source| CliError::Json { path: path.clone(), source })?;
            ctx.say(&text)?;
        }
        _ => {
            ctx.say(&format!("N = {}  J0 tau = {:.10}  iterations = {}  residual = {:.2e}", n, r.j0_tau, r.iterations, r.residual_norm))?;
            let diag: Vec<String> = r.protocol.diagnostics.iter().map(|(k, v)| format!("{} = {:.3e}", k, v)).collect();
            ctx.say(&diag.join("\n"))?;
            ctx.say(&format!("protocol written to {}", path.display()))?;
        }
    }
    Ok(exit::SUCCESS)
}

fn sweep_n(ctx: &mut Context, from: usize, to: usize, reuse: bool) -> Result<i32> {
    if from < 2 || to < from {
        return Err(CliError::Config(format!("invalid size range {}..={}", from, to)));
    }
    let template = ctx.config.spec(from)?;
    let cfg = ctx.shooting()?;
    let store = ctx.store()?;
    let sizes: Vec<usize> = (from..=to).collect();
    let points = optimal_sweep(&template, &sizes, Some(&store), reuse, &cfg)?;
    let rows: Vec<SweepRow> = points.iter().filter_map(|p| p.record.as_ref().map(SweepRow::from_record)).collect();
    let failed: Vec<String> = points.iter().filter_map(|p| p.error.as_ref().map(|e| format!("N = {}: {}", p.n, e))).collect();
    match ctx.config.output.format {
        Format::Text => {
            ctx.say("   N        J0 tau   classical    fidelity")?;
            for r in &rows {
                let f = r.diagnostics.get("fidelity").copied().unwrap_or(f64::NAN);
                ctx.say(&format!("{:>4}  {:>12.6}  {:>10.4}  {:>10.8}", r.n, r.j0_tau, r.classical_bound, f))?;
            }
        }
        fmt => {
            let bytes = render(&rows, fmt, |r, b| sweep_csv(r, b))?;
            ctx.emit(&format!("sweep.{}", ext(fmt)), &bytes)?;
        }
    }
    for f in &failed {
        ctx.progress(f);
    }
    Ok(if failed.is_empty() { exit::SUCCESS } else { exit::NOT_CONVERGED })
}

fn ext(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Text => "txt",
    }
}

fn g_grid(g_min: f64, g_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(g_min > 0.0 && g_max >= g_min) || steps == 0 {
        return Err(CliError::Config(format!("invalid g grid [{}, {}] x {}", g_min, g_max, steps)));
    }
    if steps == 1 {
        return Ok(vec![g_min]);
    }
    Ok((0..steps).map(|k| g_min + (g_max - g_min) * k as f64 / (steps - 1) as f64).collect())
}

fn sweep_g(ctx: &mut Context, g_min: f64, g_max: f64, steps: usize) -> Result<i32> {
    let gs = g_grid(g_min, g_max, steps)?;
    let cfg = ctx.shooting()?;
    let series = g_sweep_series(&gs, &cfg)?;
    write_series(ctx, "g-sweep", &series)?;
    let bad = series.iter().any(|p| p.series == "optimal" && !p.y.is_finite());
    Ok(if bad { exit::NOT_CONVERGED } else { exit::SUCCESS })
}

fn write_series(ctx: &mut Context, name: &str, series: &[SeriesPoint]) -> Result<()> {
    match ctx.config.output.format {
        Format::Text => {
            for p in series {
                ctx.say(&format!("{:<15} {:>8.4} {:>12.8}", p.series, p.x, p.y))?;
            }
            Ok(())
        }
        fmt => {
            let bytes = render(series, fmt, |r, b| series_csv(r, b))?;
            ctx.emit(&format!("{}.{}", name, ext(fmt)), &bytes)
        }
    }
}

fn trajectories(ctx: &mut Context, override_cap: bool) -> Result<i32> {
    let n = ctx.config.require_n()?;
    let weights = ctx.config.weights()?;
    let cfg = ctx.shooting()?;
    ctx.progress(&format!("timing {} trajectories", 1usize << n.saturating_sub(2)));
    let timings = trajectory_timings(n, &weights, override_cap, &cfg)?;
    write_timings(ctx, &timings)?;
    Ok(if timings.iter().all(|t| t.converged) { exit::SUCCESS } else { exit::NOT_CONVERGED })
}

fn write_timings(ctx: &mut Context, timings: &[TrajectoryTiming]) -> Result<()> {
    match ctx.config.output.format {
        Format::Text => {
            for t in timings {
                let cc = t.cross_check.map(|c| format!("  (elliptic {:.6})", c)).unwrap_or_default();
                let flag = if t.converged { "" } else { "  NOT CONVERGED" };
                ctx.say(&format!("{:<16} {:>10.4}{}{}", t.spec.label(), t.j0_tau, cc, flag))?;
            }
            let best = timings.iter().filter(|t| t.converged).map(|t| t.j0_tau).fold(f64::INFINITY, f64::min);
            if let Some(t) = timings.first() {
                ctx.say(&format!("fastest {:.4}  classical estimate {:.4}", best, classical_bound(t.spec.n())))?;
            }
            Ok(())
        }
        fmt => {
            let bytes = render(timings, fmt, |r, b| timings_csv(r, b))?;
            ctx.emit(&format!("trajectories.{}", ext(fmt)), &bytes)
        }
    }
}

#[derive(Serialize)]
struct OracleValue {
    name: &'static str,
    j0_tau: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    details: Vec<(&'static str, f64)>,
}

fn oracle(ctx: &mut Context, which: OracleKind) -> Result<i32> {
    let v = match which {
        OracleKind::ThreeQubit { g } => {
            let s = three_qubit_optimal(g)?;
            OracleValue { name: "three-qubit", j0_tau: s.tau, details: vec![("A", s.a), ("B", s.b), ("Omega", s.omega)] }
        }
        OracleKind::Elliptic { g } => {
            let s = weighted_nn_chain_3q(g)?;
            OracleValue { name: "elliptic", j0_tau: s.tau, details: vec![("omega", s.omega), ("m", s.m), ("fidelity", s.fidelity)] }
        }
        OracleKind::DirectHop { g } => OracleValue { name: "direct-hop", j0_tau: direct_hop_time(g), details: vec![] },
        OracleKind::ClassicalBound { n } => OracleValue { name: "classical-bound", j0_tau: classical_bound(n), details: vec![] },
        OracleKind::Asymptotic { n } => OracleValue { name: "asymptotic", j0_tau: asymptotic_fit(n), details: vec![] },
        OracleKind::Unpenalized => OracleValue { name: "unpenalized", j0_tau: unpenalized_time(), details: vec![] },
    };
    if ctx.config.output.format == Format::Json {
        let text = serde_json::to_string(&v).map_err(|source| CliError::Json { path: "<stdout>".into(), source })?;
        ctx.say(&text)?;
    } else {
        ctx.say(&format!("{}: J0 tau = {:.10}", v.name, v.j0_tau))?;
        for (k, x) in &v.details {
            ctx.say(&format!("  {} = {:.10}", k, x))?;
        }
    }
    Ok(exit::SUCCESS)
}

/// Independent re-check of a protocol.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub j0_tau: f64,
    pub fidelity: f64,
    pub constraint_drift: f64,
    pub chirality: f64,
    pub qbe_coupling_deviation: Option<f64>,
    pub passed: bool,
}

pub fn verify_protocol(p: &Protocol, with_qbe: bool) -> Result<VerifyReport> {
    let spec = &p.spec;
    let fidelity = transfer_fidelity(p)?;
    let target = spec.j0() * spec.j0();
    let mut constraint_drift: f64 = 0.0;
    let mut chirality: f64 = 0.0;
    for j in &p.couplings {
        constraint_drift = constraint_drift.max((constraint_norm(spec, j) / target - 1.0).abs());
        let h = build_hamiltonian(spec, j, Basis::Site)?;
        chirality = chirality.max(h.chiral_anticommutator_residual()).max(h.to_basis(Basis::Q).max_real_part());
    }
    let qbe = if with_qbe { Some(crosscheck(p)?.coupling_deviation) } else { None };
    let passed = fidelity >= 1.0 - 1e-6 && constraint_drift <= 1e-6 && chirality <= 1e-10 && qbe.is_none_or(|d| d <= 1e-6);
    Ok(VerifyReport {
        n: spec.n_sites(),
        j0_tau: p.j0_tau(),
        fidelity,
        constraint_drift,
        chirality,
        qbe_coupling_deviation: qbe,
        passed,
    })
}

fn verify(ctx: &mut Context, path: &Path, qbe: bool) -> Result<i32> {
    let p = read_protocol(path)?;
    let report = verify_protocol(&p, qbe)?;
    let text = serde_json::to_string_pretty(&report).map_err(|source| CliError::Json { path: path.into(), source })?;
    ctx.say(&text)?;
    if report.passed {
        Ok(exit::SUCCESS)
    } else {
        Err(CliError::Verification(format!("{} failed: fidelity {:.3e} short of 1", path.display(), 1.0 - report.fidelity)))
    }
}

fn reproduce(ctx: &mut Context, suite: Suite, max_n: Option<usize>, use_store: bool) -> Result<i32> {
    let cfg = ctx.shooting()?;
    let store = if use_store { Some(ctx.store()?) } else { None };
    let template = brach_core::lattice::LatticeSpec::all_to_all(2, WeightProfile::quadratic())?;
    let mut checks: Vec<Check> = Vec::new();
    let run_s1 = matches!(suite, Suite::TableS1 | Suite::All);
    let run_fits = matches!(suite, Suite::Fits | Suite::All);
    if run_s1 || run_fits {
        let default_max = if run_fits { 40 } else { 12 };
        let hi = max_n.unwrap_or(default_max).max(2);
        ctx.progress(&format!("optimal-time sweep N = 2..={}", hi));
        let sizes: Vec<usize> = (2..=hi).collect();
        let points = optimal_sweep(&template, &sizes, store.as_ref(), use_store, &cfg)?;
        if run_s1 {
            checks.extend(optimal_time_checks(&points));
            checks.extend(advantage_checks(&points, &[]));
        }
        if run_fits {
            checks.extend(fit_checks(&points));
        }
    }
    if matches!(suite, Suite::TableS2 | Suite::All) {
        for n in 3..=6 {
            ctx.progress(&format!("trajectories N = {}", n));
            let timings = trajectory_timings(n, &WeightProfile::quadratic(), false, &cfg)?;
            checks.extend(trajectory_checks(&timings));
        }
    }
    if matches!(suite, Suite::Fig2 | Suite::All) {
        checks.extend(three_qubit_checks(&[2.5, 3.0, 4.0, 8.0], &cfg)?);
    }
    match ctx.config.output.format {
        Format::Json => {
            let bytes = render(&checks, Format::Json, |_, _| Ok(()))?;
            ctx.emit("checks.json", &bytes)?;
        }
        _ => {
            for c in &checks {
                ctx.say(&c.line())?;
            }
        }
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    ctx.say(&format!("{} checks, {} failed", checks.len(), failed))?;
    Ok(if failed == 0 { exit::SUCCESS } else { exit::VERIFICATION })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn run_args(args: &[&str]) -> (Result<i32>, String) {
        let cli = Cli::try_parse_from(args).unwrap();
        let mut buf = Vec::new();
        let code = run(cli, &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn oracle_three_qubit() {
        let (code, out) = run_args(&["brach", "oracle", "three-qubit", "--g", "3"]);
        assert_eq!(code.unwrap(), 0);
        let v: f64 = out.lines().next().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
        assert!((v - 2.48365).abs() < 5e-6, "{}", out);
    }

    #[test]
    fn grid() {
        assert_eq!(g_grid(1.0, 3.0, 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(g_grid(3.0, 1.0, 3).is_err());
    }

    #[test]
    fn missing_size_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = dir.path().to_str().unwrap();
        let (code, _) = run_args(&["brach", "--store", store, "solve"]);
        assert_eq!(code.unwrap_err().exit_code(), exit::CONFIG);
    }
}
