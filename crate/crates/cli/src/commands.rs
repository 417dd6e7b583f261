use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use fbp_core::geometry::{integrate_catenoid_profile, shoot_foliation_leaf, Side, LEAF_TOL, PROFILE_TOL};
use fbp_core::gluing::{far_window, odd_upsilon, outer_fixed_point, standard_chart, verify_free_boundary, GluingConfig, Tube};
use fbp_core::kernels::{d2_root, multipliers};
use fbp_core::minimizer::{
    minimize_ball, sweep_barriers, BallRun, BarrierPair, BarrierSide, Contact, EnergyGrid, SweepReport,
};
use fbp_core::numerics::linspace;
use fbp_core::reduced_solver::{solve_f, solve_g, HeightPair, RadialOperator};
use fbp_core::field::Field;
use serde::Serialize;

use crate::artifacts::{load_manifest, read_csv_columns, Failure, Gate, Manifest, RunDir, MANIFEST_NAME};
use crate::config::RunConfig;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    CatenoidProfile,
    SimonsLeaf,
    KernelsTable,
    ReduceSolve,
    Glue,
    Verify,
    Minimize,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CatenoidProfile => "catenoid-profile",
            Command::SimonsLeaf => "simons-leaf",
            Command::KernelsTable => "kernels-table",
            Command::ReduceSolve => "reduce-solve",
            Command::Glue => "glue",
            Command::Verify => "verify",
            Command::Minimize => "minimize",
            Command::Sweep => "sweep",
        }
    }
}

/// What a command leaves behind besides its artifacts.
#[derive(Default)]
struct Outcome {
    gates: Vec<Gate>,
    summary: BTreeMap<String, f64>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: f64) {
        self.summary.insert(key.into(), v);
    }
}

fn module_failure(stage: &str, e: fbp_core::Error) -> Failure {
    let trace = match &e {
        fbp_core::Error::Divergence { factors, .. } => factors.clone(),
        _ => Vec::new(),
    };
    Failure { stage: stage.into(), reason: e.to_string(), trace }
}

/// Runs `command` and writes its artifacts and manifest under
/// `root/<output_dir or command>`. Configuration errors surface before
/// anything is written.
pub fn run(command: Command, cfg: &RunConfig, root: &Path) -> Result<(PathBuf, Manifest), CliError> {
    cfg.validate(command.name())?;
    // inputs that come from files are read before the run directory exists
    let boundary = match command {
        Command::Minimize | Command::Sweep => load_boundary(cfg)?,
        _ => None,
    };
    let glue_manifest = match command {
        Command::Verify => Some(load_glue_manifest(cfg)?),
        _ => None,
    };
    let dir = root.join(cfg.output_dir.as_deref().unwrap_or(command.name()));
    let mut out = RunDir::create(dir)?;
    let mut o = Outcome::default();
    let result = match command {
        Command::CatenoidProfile => catenoid_profile(cfg, &mut out, &mut o),
        Command::SimonsLeaf => simons_leaf(cfg, &mut out, &mut o),
        Command::KernelsTable => kernels_table(cfg, &mut out, &mut o),
        Command::ReduceSolve => reduce_solve(cfg, &mut out, &mut o),
        Command::Glue => glue(cfg, &mut out, &mut o),
        Command::Verify => verify(glue_manifest.as_ref().unwrap(), &mut out, &mut o),
        Command::Minimize => minimize(cfg, boundary.as_ref(), &mut out, &mut o).map(|_| ()),
        Command::Sweep => sweep(cfg, boundary.as_ref(), &mut out, &mut o),
    };
    let failure = match result {
        Ok(()) => None,
        Err(Step::Module(f)) => Some(f),
        Err(Step::Cli(e)) => return Err(e),
    };
    out.finish(command.name(), cfg, o.gates, o.summary, failure)
}

enum Step {
    Module(Failure),
    Cli(CliError),
}

impl From<CliError> for Step {
    fn from(e: CliError) -> Self {
        Step::Cli(e)
    }
}

trait Stage<T> {
    fn stage(self, name: &str) -> Result<T, Step>;
}

impl<T> Stage<T> for fbp_core::Result<T> {
    fn stage(self, name: &str) -> Result<T, Step> {
        self.map_err(|e| Step::Module(module_failure(name, e)))
    }
}

fn catenoid_profile(cfg: &RunConfig, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let c = &cfg.catenoid_profile;
    let p = integrate_catenoid_profile(c.n, c.eps, c.r_max, c.step).stage("catenoid profile")?;
    let col = |f: fn(&fbp_core::geometry::ProfileSample) -> f64| p.samples.iter().map(f).collect::<Vec<_>>();
    let (u, r, z, l) = (col(|s| s.u), col(|s| s.r), col(|s| s.height), col(|s| s.arc));
    out.write_csv("profile.csv", &["u", "r", "z", "l"], &[&u, &r, &z, &l])?;
    out.write_json("profile.json", &p)?;
    o.put("waist", p.waist);
    o.put("residual_max", p.residual_max);
    o.gates.push(Gate::at_most("ode_residual", p.residual_max, PROFILE_TOL));
    if c.n == 3 {
        // closed form r = r₀ cosh(z/r₀) on z ∈ [0, 3r₀]
        let err = p
            .samples
            .iter()
            .filter(|s| s.height <= 3.0 * p.waist)
            .map(|s| (s.r - p.waist * (s.height / p.waist).cosh()).abs() / p.waist)
            .fold(0.0, f64::max);
        o.put("closed_form_error", err);
        o.gates.push(Gate::at_most("closed_form_error", err, 1e-8));
    }
    Ok(())
}

fn simons_leaf(cfg: &RunConfig, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let c = &cfg.simons_leaf;
    let leaf = shoot_foliation_leaf(Side::Plus, c.x0, c.step, c.r_max).stage("leaf shooting")?;
    let col = |f: fn(&fbp_core::geometry::LeafSample) -> f64| leaf.curve.iter().map(f).collect::<Vec<_>>();
    let (s, x, y, th) = (col(|p| p.sigma), col(|p| p.x), col(|p| p.y), col(|p| p.theta));
    out.write_csv("leaf.csv", &["sigma", "x", "y", "theta"], &[&s, &x, &y, &th])?;
    #[derive(Serialize)]
    struct LeafReport<'a> {
        axis_foot: f64,
        residual_max: f64,
        decay_fit: &'a Option<fbp_core::geometry::DecayFit>,
    }
    out.write_json(
        "leaf.json",
        &LeafReport { axis_foot: leaf.axis_foot, residual_max: leaf.residual_max, decay_fit: &leaf.decay_fit },
    )?;
    o.put("residual_max", leaf.residual_max);
    o.gates.push(Gate::at_most("curvature_residual", leaf.residual_max, LEAF_TOL));
    match leaf.decay_fit {
        Some(fit) => {
            o.put("decay_exponent", fit.exponent);
            o.gates.push(Gate::at_most("decay_exponent_offset", (fit.exponent + 2.0).abs(), 0.2));
        }
        None => o.gates.push(Gate::flag("decay_fit_available", false)),
    }
    Ok(())
}

fn kernels_table(cfg: &RunConfig, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let c = &cfg.kernels_table;
    let k = linspace(0.0, c.k_max, c.points);
    let rows: Vec<_> = k.iter().map(|&k| multipliers(k, c.margin)).collect();
    let col = |f: &dyn Fn(&fbp_core::kernels::Multipliers) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let cols = [
        col(&|m| m.k),
        col(&|m| m.m1),
        col(&|m| m.m2),
        col(&|m| m.d1),
        col(&|m| m.d2),
        col(&|m| flag(m.d1_flag)),
        col(&|m| flag(m.d2_flag)),
    ];
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    out.write_csv("kernels.csv", &["k", "m1", "m2", "d1", "d2", "d1_flag", "d2_flag"], &refs)?;
    let root = d2_root();
    o.put("d2_root", root);
    let bracket = rows.windows(2).find(|w| w[0].d2.signum() != w[1].d2.signum()).map(|w| (w[0].k, w[1].k));
    match bracket {
        Some((lo, hi)) => {
            o.put("bracket_lo", lo);
            o.put("bracket_hi", hi);
            o.gates.push(Gate::flag("root_bracketed", lo <= root && root <= hi));
            o.gates.push(Gate::at_most("root_offset", (root - 1.915).abs(), 1e-3));
        }
        None => o.gates.push(Gate::flag("root_bracketed", false)),
    }
    Ok(())
}

fn tube_for(kind: fbp_core::geometry::ChartKind, n: usize, gc: &GluingConfig) -> Result<Tube, Step> {
    let chart = standard_chart(kind, n, gc.eps, gc.l_max()).stage("chart")?;
    Tube::new(chart, gc.nt, gc.l_step / gc.eps, gc.l_max(), gc.spectral.dim).stage("tube grid")
}

fn reduce_solve(cfg: &RunConfig, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let c = &cfg.reduce_solve;
    let kind = c.kind.chart_kind();
    let mut gc = GluingConfig::standard(kind, c.n, c.eps);
    gc.l_step = c.l_step;
    gc.l_extent = c.l_extent;
    if let Some(b) = c.beta0 {
        gc.beta0 = b;
    }
    gc.spectral.form = c.form;
    gc.spectral.policy = c.policy;
    let tube = tube_for(kind, c.n, &gc)?;
    let l = tube.l.clone();
    let op = RadialOperator::from_chart(&tube.chart, &l).stage("jacobi operator")?;
    // data: the odd model contributions to the boundary derivatives
    let (odd_m, odd_p) = odd_upsilon(&tube).stage("odd model terms")?;
    // windowed like the outer iteration, away from the far-end closure
    let w = far_window(&l);
    let sum: Vec<f64> = odd_m.iter().zip(&odd_p).zip(&w).map(|((a, b), w)| w * (a + b)).collect();
    let diff: Vec<f64> = odd_p.iter().zip(&odd_m).zip(&w).map(|((a, b), w)| w * (a - b)).collect();
    let fs = solve_f(&l, &sum, tube.a2(), &gc.spectral).stage("f equation")?;
    let gs = solve_g(&op, &diff, &gc.spectral, gc.beta0).stage("g equation")?;
    out.write_csv(
        "reduced.csv",
        &["l", "a2", "f0", "f", "g", "jacobi_rhs"],
        &[&l, tube.a2(), &fs.f0, &fs.f, &gs.g.eta, &gs.jacobi_rhs],
    )?;
    #[derive(Serialize)]
    struct ReduceReport<'a> {
        beta0: f64,
        f: &'a fbp_core::reduced_solver::FSolution,
        g: &'a fbp_core::reduced_solver::GSolution,
    }
    out.write_json("reduced.json", &ReduceReport { beta0: gc.beta0, f: &fs, g: &gs })?;
    let scale = fbp_core::numerics::sup_abs(&gs.jacobi_rhs).max(f64::MIN_POSITIVE);
    o.put("f0_at_origin", fs.f0[0]);
    o.put("g_sup", fbp_core::numerics::sup_abs(&gs.g.eta));
    o.put("jacobi_residual", gs.g.residual);
    o.gates.push(Gate::at_most("jacobi_relative_residual", gs.g.residual / scale, 1e-6));
    o.gates.push(Gate::flag("finite", fs.f.iter().chain(&gs.g.eta).all(|v| v.is_finite())));
    Ok(())
}

fn write_glue_fields(out: &mut RunDir, tube: &Tube, h: &HeightPair, f0: &[f64], phi: &Field) -> Result<(), CliError> {
    out.write_csv("heights.csv", &["l", "h_minus", "h_plus", "f0"], &[&h.l, &h.h_minus, &h.h_plus, f0])?;
    let (mut t, mut l, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..tube.nl() {
        for i in 0..tube.nt() {
            t.push(tube.t[i]);
            l.push(tube.l[j]);
            v.push(phi.get(i, j));
        }
    }
    out.write_csv("phi.csv", &["t", "l", "phi"], &[&t, &l, &v])
}

fn glue(cfg: &RunConfig, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let c = &cfg.glue;
    let gc = c.to_core();
    let chart = standard_chart(c.kind.chart_kind(), c.n, gc.eps, gc.l_max()).stage("chart")?;
    let run = outer_fixed_point(&chart, &gc).stage("gluing")?;
    write_glue_fields(out, &run.tube, &run.h, &run.f0, &run.phi)?;
    #[derive(Serialize)]
    struct GlueReport<'a> {
        converged: bool,
        ball_radius: f64,
        report: &'a fbp_core::gluing::ResidualReport,
        naive: &'a fbp_core::gluing::ResidualReport,
    }
    out.write_json(
        "report.json",
        &GlueReport { converged: run.converged, ball_radius: run.ball_radius, report: &run.report, naive: &run.naive },
    )?;
    let r = &run.report;
    let max_norm = r.iterations.iter().map(|it| it.norm).fold(0.0, f64::max);
    o.put("boundary_sup", r.boundary_sup);
    o.put("naive_boundary_sup", run.naive.boundary_sup);
    o.put("interior_sup", r.interior_sup);
    o.put("truncation_estimate", r.truncation_estimate);
    o.put("max_iterate_norm", max_norm);
    o.put("ball_radius", run.ball_radius);
    o.put("outer_iterations", r.iterations.len() as f64);
    o.gates.push(Gate::flag("converged", run.converged));
    o.gates.push(Gate::at_most("boundary_vs_naive", r.boundary_sup / run.naive.boundary_sup, 0.25));
    o.gates.push(Gate::at_most("interior_vs_truncation", r.interior_sup / r.truncation_estimate, 2.0));
    o.gates.push(Gate::at_most("iterate_norm_vs_radius", max_norm / run.ball_radius, 1.0));
    if let Some(t) = &r.per_term {
        o.put("odd_upsilon_sum", t.odd_upsilon_sum);
        o.put("odd_upsilon_max", t.odd_upsilon_max);
        o.gates.push(Gate::at_most("odd_cancellation", 4.0 * t.odd_upsilon_sum / t.odd_upsilon_max, 1.0));
    }
    Ok(())
}

fn load_glue_manifest(cfg: &RunConfig) -> Result<(PathBuf, Manifest), CliError> {
    let path = PathBuf::from(cfg.verify.manifest.as_ref().expect("validated"));
    let m = load_manifest(&path)?;
    if m.command != "glue" {
        return Err(CliError::Config(format!("{} is a `{}` manifest, not `glue`", path.display(), m.command)));
    }
    if m.failure.is_some() {
        return Err(CliError::Corrupt(format!("{} records a failed run", path.display())));
    }
    Ok((path, m))
}

fn verify(glue_run: &(PathBuf, Manifest), out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let (path, m) = glue_run;
    let dir = path.parent().unwrap_or(Path::new("."));
    let c = &m.config.glue;
    let gc = c.to_core();
    let tube = tube_for(c.kind.chart_kind(), c.n, &gc)?;
    let hc = read_csv_columns(&dir.join("heights.csv"), &["l", "h_minus", "h_plus"])?;
    let pc = read_csv_columns(&dir.join("phi.csv"), &["phi"])?;
    if hc[0].len() != tube.nl() || pc[0].len() != tube.nl() * tube.nt() {
        return Err(CliError::Corrupt("field sizes do not match the configured grid".into()).into());
    }
    let h = HeightPair { l: tube.l.clone(), h_minus: hc[1].clone(), h_plus: hc[2].clone() };
    let mut phi = Field::zeros(&tube.t, &tube.l);
    for j in 0..tube.nl() {
        for i in 0..tube.nt() {
            phi.set(i, j, pc[0][j * tube.nt() + i]);
        }
    }
    let report = verify_free_boundary(&tube, &h, &phi).stage("verification")?;
    out.write_json("verify.json", &report)?;
    let recorded = m.summary.get("boundary_sup").copied().unwrap_or(f64::NAN);
    let naive = m.summary.get("naive_boundary_sup").copied().unwrap_or(f64::NAN);
    o.put("boundary_sup", report.boundary_sup);
    o.put("interior_sup", report.interior_sup);
    o.put("truncation_estimate", report.truncation_estimate);
    o.gates.push(Gate::at_most(
        "matches_recorded_boundary",
        ((report.boundary_sup - recorded) / recorded).abs(),
        1e-9,
    ));
    o.gates.push(Gate::at_most("boundary_vs_naive", report.boundary_sup / naive, 0.25));
    o.gates.push(Gate::at_most("interior_vs_truncation", report.interior_sup / report.truncation_estimate, 2.0));
    Ok(())
}

/// Relative slack when comparing converged energies.
const ENERGY_SLACK: f64 = 1e-8;

/// Boundary values by grid node, read from `x,y,b` rows.
type BoundaryData = Vec<(f64, f64, f64)>;

fn load_boundary(cfg: &RunConfig) -> Result<Option<BoundaryData>, CliError> {
    let Some(path) = &cfg.minimize.boundary else { return Ok(None) };
    let cols = read_csv_columns(Path::new(path), &["x", "y", "b"])
        .map_err(|e| CliError::Config(format!("boundary data: {e}")))?;
    Ok(Some((0..cols[0].len()).map(|k| (cols[0][k], cols[1][k], cols[2][k])).collect()))
}

fn minimize(cfg: &RunConfig, boundary: Option<&BoundaryData>, out: &mut RunDir, o: &mut Outcome) -> Result<BallRun, Step> {
    let c = &cfg.minimize;
    let pair = BarrierPair::new(c.eps0, c.a).stage("barriers")?;
    let run = match boundary {
        None => minimize_ball(c.a, c.h, &pair, None, &c.to_core()),
        Some(rows) => {
            let grid = EnergyGrid::quarter_ball(c.a, c.h).stage("grid")?;
            let mut values = vec![f64::NAN; grid.len()];
            for &(x, y, b) in rows {
                let (i, j) = ((x / c.h).round() as usize, (y / c.h).round() as usize);
                if i < grid.nx && j < grid.ny {
                    values[grid.idx(i, j)] = b;
                }
            }
            if let Some(p) = (0..grid.len()).find(|&p| grid.boundary[p] && values[p].is_nan()) {
                return Err(CliError::Config(format!(
                    "boundary data missing at ({}, {})",
                    grid.x(p % grid.nx),
                    grid.y(p / grid.nx)
                ))
                .into());
            }
            let h = c.h;
            let f = move |x: f64, y: f64| values[(x / h).round() as usize + (y / h).round() as usize * grid.nx];
            minimize_ball(c.a, c.h, &pair, Some(&f), &c.to_core())
        }
    }
    .stage("minimization")?;
    let g = &run.result.grid;
    let inside: Vec<usize> = (0..g.len()).filter(|&p| g.inside[p]).collect();
    let pick = |v: &dyn Fn(usize) -> f64| inside.iter().map(|&p| v(p)).collect::<Vec<_>>();
    let (x, y, u) = (pick(&|p| g.x(p % g.nx)), pick(&|p| g.y(p / g.nx)), pick(&|p| g.u[p]));
    let mask = pick(&|p| if g.boundary[p] { 1.0 } else { 0.0 });
    out.write_csv("field.csv", &["x", "y", "u", "boundary"], &[&x, &y, &u, &mask])?;
    out.write_json("trace.json", &run.result.trace)?;
    let max_u = g.u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    o.put("energy", run.result.energy);
    o.put("initial_energy", run.result.initial_energy);
    o.put("tube_energy", run.tube_energy);
    o.put("harmonic_energy", run.harmonic_energy);
    o.put("harmonicity_residual", run.residual);
    o.put("sweeps", run.result.trace.len() as f64);
    o.put("surrogate_barriers", if run.surrogate { 1.0 } else { 0.0 });
    o.gates.push(Gate::flag("monotone_descent", run.result.trace_is_monotone()));
    o.gates.push(Gate::at_most("max_abs_u", max_u, 1.0));
    o.gates.push(Gate::at_most("harmonicity_residual", run.residual, 1e-2));
    // relative, since both descents stop at the same finite tolerance
    let j = run.result.energy;
    o.gates.push(Gate::at_most("energy_over_tube", j / run.tube_energy - 1.0, ENERGY_SLACK));
    o.gates.push(Gate::at_most("energy_over_harmonic", j / run.harmonic_energy - 1.0, ENERGY_SLACK));
    o.gates.push(Gate::at_most("boundary_error", g.boundary_error(), 0.0));
    Ok(run)
}

fn sweep(cfg: &RunConfig, boundary: Option<&BoundaryData>, out: &mut RunDir, o: &mut Outcome) -> Result<(), Step> {
    let run = minimize(cfg, boundary, out, o)?;
    let g = &run.result.grid;
    let a = cfg.minimize.a;
    let eps = cfg.sweep.eps_list();
    let mut reports: Vec<SweepReport> = Vec::new();
    for side in [BarrierSide::Upper, BarrierSide::Lower] {
        let fam = |e: f64| Ok(BarrierPair::new(e, a)?.field(g, side));
        let rep = sweep_barriers(g, side, &eps, &fam, run.surrogate, cfg.sweep.tol).stage("sweep")?;
        let key = match side {
            BarrierSide::Upper => "upper",
            BarrierSide::Lower => "lower",
        };
        let interior = matches!(rep.first_touch, Some(t) if t.contact == Contact::Interior);
        if let Some(t) = rep.first_touch {
            o.put(&format!("{key}_touch_eps"), t.eps);
        }
        o.gates.push(Gate::flag(&format!("{key}_touch_not_interior"), !interior));
        reports.push(rep);
    }
    out.write_json("sweep.json", &reports)?;
    Ok(())
}

/// Renders a manifest; the numbers come from the manifest and the JSON
/// reports it lists, nothing is recomputed.
pub fn render_report(path: &Path) -> Result<(String, bool), CliError> {
    let path = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    let m = load_manifest(&path)?;
    let mut s = String::new();
    s.push_str(&format!("{} {} ({})\n", m.tool, m.command, m.version));
    s.push_str(&format!("status: {}\n", m.status.to_uppercase()));
    if let Some(f) = &m.failure {
        s.push_str(&format!("failed stage: {}\nreason: {}\n", f.stage, f.reason));
        if !f.trace.is_empty() {
            let t: Vec<String> = f.trace.iter().map(|v| format!("{v:.4}")).collect();
            s.push_str(&format!("trace: {}\n", t.join(", ")));
        }
    }
    if !m.gates.is_empty() {
        s.push_str("gates:\n");
        for g in &m.gates {
            let mark = if g.passed { "pass" } else { "FAIL" };
            s.push_str(&format!("  [{mark}] {:<28} {:>12.4e}  (limit {:.4e})\n", g.name, g.value, g.threshold));
        }
    }
    if !m.summary.is_empty() {
        s.push_str("summary:\n");
        for (k, v) in &m.summary {
            s.push_str(&format!("  {k:<28} {v:.6e}\n"));
        }
    }
    // outer iteration trace of gluing runs
    let dir = path.parent().unwrap_or(Path::new("."));
    if m.artifacts.iter().any(|a| a.name == "report.json") {
        let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| CliError::Corrupt(e.to_string()))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Corrupt(e.to_string()))?;
        if let Some(its) = v.pointer("/report/iterations").and_then(|x| x.as_array()) {
            s.push_str("outer iterations (norm, update, factor, boundary):\n");
            for it in its {
                let num = |k: &str| it.get(k).and_then(|x| x.as_f64());
                s.push_str(&format!(
                    "  {:>3}  {:.4e}  {:.4e}  {}  {:.4e}\n",
                    it.get("iteration").and_then(|x| x.as_u64()).unwrap_or(0),
                    num("norm").unwrap_or(f64::NAN),
                    num("update").unwrap_or(f64::NAN),
                    num("factor").map_or("   -   ".to_string(), |f| format!("{f:.4}")),
                    num("boundary_sup").unwrap_or(f64::NAN),
                ));
            }
        }
    }
    Ok((s, m.passed()))
}
