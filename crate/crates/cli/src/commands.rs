use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use blowup_core::acceptance::{self, SEARCH_ITERATIONS, SERIES_TERMS};
use blowup_core::blowup::{estimate_blowup_shooting, integrate, integrate_to, BlowupError, BlowupEstimate, IntegratorConfig};
use blowup_core::burning::{
    coverage_rate_check, mc_unburned_fraction, render_field, sample_atoms, time_for_unburned_probability, unburned_probability_analytic,
    unburned_probability_convolution, write_coverage_csv, write_legend, BurnWindow, IntensityProfile,
};
use blowup_core::fmt17;
use blowup_core::lv::{
    distance_to_star, permanence_floor, seeded_initial_condition, simulate, time_average_check, write_distance_csv, LVModel,
};
use blowup_core::lyapunov::{leading_minors_exact, published_lambda, search_lambda, PUBLISHED_LAMBDA, PUBLISHED_MINORS};
use blowup_core::series::{estimate_blowup_series, taylor_coefficients, SeriesError};
use blowup_core::timechange::{cascade, cascade_window};

use crate::config::{ExperimentConfig, Manifest, SeedSpec};
use crate::Command;

/// Invalid flag combination; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub enum Outcome {
    Pass,
    /// Names of the failing checks.
    Fail(Vec<String>),
}

impl Outcome {
    fn from_failures(failures: Vec<String>) -> Self {
        if failures.is_empty() {
            Self::Pass
        } else {
            Self::Fail(failures)
        }
    }
}

struct Run<'a> {
    name: &'static str,
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    outputs: Vec<String>,
    extra: toml::Table,
}

impl<'a> Run<'a> {
    fn new(name: &'static str, cfg: &'a ExperimentConfig) -> Result<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { name, cfg, dir, outputs: Vec::new(), extra: toml::Table::new() })
    }

    fn create(&mut self, file: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(file);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.outputs.push(file.to_string());
        Ok(BufWriter::new(f))
    }

    fn note(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.extra.insert(key.to_string(), value.into());
    }

    fn finish(self, outcome: Outcome) -> Result<Outcome> {
        let manifest = Manifest {
            subcommand: self.name.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            parameters: self.cfg.clone(),
            extra: self.extra,
            outputs: self.outputs,
        };
        let path = manifest.write(&self.dir)?;
        println!("manifest: {}", path.display());
        Ok(outcome)
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn integrator(cfg: &ExperimentConfig) -> Result<IntegratorConfig> {
    let mut c = IntegratorConfig::default();
    if let Some(tol) = cfg.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(usage(format!("--tol must lie in (0, 1), got {tol}")));
        }
        c.rel_tol = tol;
        c.abs_tol = tol * 1e-2;
    }
    Ok(c)
}

fn seeds(cfg: &ExperimentConfig, default: SeedSpec) -> SeedSpec {
    cfg.seed.unwrap_or(default)
}

fn write_all<F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>>(run: &mut Run, file: &str, f: F) -> Result<()> {
    let mut w = run.create(file)?;
    f(&mut w).with_context(|| format!("writing {file}"))?;
    w.flush()?;
    Ok(())
}

pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    match command {
        Command::Integrate => integrate_cmd(cfg),
        Command::EstimateT => estimate_t(cfg),
        Command::Timechange => timechange(cfg),
        Command::LvSim => lv_sim(cfg),
        Command::LvAverage => lv_average(cfg),
        Command::LyapunovVerify => lyapunov_verify(cfg),
        Command::LyapunovSearch => lyapunov_search(cfg),
        Command::BurnProb { p } => burn_prob(cfg, p),
        Command::BurnRender => burn_render(cfg),
        Command::BurnCoverage { eps } => burn_coverage(cfg, eps),
        Command::CheckAll { only } => check_all(cfg, only),
    }
}

fn integrate_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    let ic = integrator(cfg)?;
    let traj = match cfg.t_end {
        Some(t) => integrate_to(d, &ic, t)?,
        None => integrate(d, &ic)?,
    };
    let mut run = Run::new("integrate", cfg)?;
    write_all(&mut run, &format!("trajectory_d{d}.csv"), |w| traj.write_csv(w))?;
    let last = traj.last();
    println!("d = {d}: {} steps, t = {}, y = {}", traj.jets.len() - 1, fmt17(last.t), fmt17(last.y()));
    run.note("steps", (traj.jets.len() - 1) as i64);
    run.finish(Outcome::Pass)
}

enum Estimate {
    Ok(BlowupEstimate),
    /// Fitted value from a tail that failed the monotonicity test.
    Flagged(BlowupEstimate, String),
    Unavailable(String),
}

impl Estimate {
    fn value(&self) -> Option<&BlowupEstimate> {
        match self {
            Self::Ok(e) | Self::Flagged(e, _) => Some(e),
            Self::Unavailable(_) => None,
        }
    }

    fn status(&self) -> String {
        match self {
            Self::Ok(_) => "ok".into(),
            Self::Flagged(_, why) | Self::Unavailable(why) => why.clone(),
        }
    }
}

fn shooting(d: usize, ic: &IntegratorConfig) -> Estimate {
    match estimate_blowup_shooting(d, ic) {
        Ok(e) => Estimate::Ok(e),
        Err(BlowupError::NonMonotone { estimate, .. }) => Estimate::Flagged(estimate, "non-monotone".into()),
        Err(e) => Estimate::Unavailable(e.to_string()),
    }
}

fn series(d: usize) -> Estimate {
    match taylor_coefficients(d, SERIES_TERMS).map_err(|e| e.to_string()).map(|c| estimate_blowup_series(&c)) {
        Ok(Ok(e)) => Estimate::Ok(e),
        Ok(Err(SeriesError::NonMonotoneRatio { estimate, .. })) => Estimate::Flagged(estimate, "non-monotone".into()),
        Ok(Err(e)) => Estimate::Unavailable(e.to_string()),
        Err(e) => Estimate::Unavailable(e),
    }
}

fn estimate_t(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    let ic = integrator(cfg)?;
    let estimates = [("shooting-extrapolation", shooting(d, &ic)), ("series-radius", series(d))];
    let mut run = Run::new("estimate-t", cfg)?;
    let mut w = run.create(&format!("estimate_d{d}.csv"))?;
    writeln!(w, "method,t_blowup,uncertainty,status")?;
    for (name, e) in &estimates {
        match e.value() {
            Some(v) => {
                println!("{name}: T = {} +- {:.3e} ({})", fmt17(v.t_blowup), v.uncertainty, e.status());
                writeln!(w, "{name},{},{},{}", fmt17(v.t_blowup), fmt17(v.uncertainty), e.status())?;
            }
            None => {
                println!("{name}: unavailable ({})", e.status());
                writeln!(w, "{name},,,\"{}\"", e.status().replace('"', "'"))?;
            }
        }
    }
    w.flush()?;
    drop(w);
    let mut failures = Vec::new();
    if let (Some(a), Some(b)) = (estimates[0].1.value(), estimates[1].1.value()) {
        let diff = (a.t_blowup - b.t_blowup).abs();
        let combined = a.uncertainty + b.uncertainty;
        println!("agreement: |difference| = {diff:.3e}, combined uncertainty = {combined:.3e}");
        run.note("difference", diff);
    }
    if estimates.iter().all(|(_, e)| e.value().is_none()) {
        failures.push("estimate-t: no estimator succeeded".to_string());
    }
    run.note("series_terms", SERIES_TERMS as i64);
    run.finish(Outcome::from_failures(failures))
}

/// Best available blow-up estimate: shooting for `d ≤ 10`, otherwise the series.
fn blowup_estimate(d: usize, ic: &IntegratorConfig) -> Result<BlowupEstimate> {
    let primary = if d <= 10 { shooting(d, ic) } else { series(d) };
    match primary {
        Estimate::Ok(e) => Ok(e),
        Estimate::Flagged(e, why) => {
            eprintln!("warning: blow-up estimate is {why}");
            Ok(e)
        }
        Estimate::Unavailable(why) => anyhow::bail!("no blow-up estimate: {why}"),
    }
}

fn timechange(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    let ic = integrator(cfg)?;
    let est = blowup_estimate(d, &ic)?;
    let traj = integrate(d, &ic)?;
    let (u, v, w, report) = cascade(cascade_window(&traj.jets, est.t_blowup), &est)?;
    let mut run = Run::new("timechange", cfg)?;
    write_all(&mut run, &format!("u_d{d}.csv"), |f| u.write_csv(f))?;
    write_all(&mut run, &format!("v_d{d}.csv"), |f| v.write_csv(f))?;
    write_all(&mut run, &format!("w_d{d}.csv"), |f| w.write_csv(f))?;
    let max = |x: &[f64]| x.iter().cloned().fold(0.0, f64::max);
    let lines = [
        ("t_blowup", est.t_blowup),
        ("system_u", max(&report.system_u)),
        ("system_v", max(&report.system_v)),
        ("system_w", max(&report.system_w)),
        ("chain_rule", max(&report.chain_rule)),
        ("identity_v0", report.identity_v0.max_defect),
        ("identity_psi", report.identity_psi),
        ("round_trip", report.round_trip),
        ("mean_growth", report.mean_growth),
        ("psi_ratio", report.psi_ratio),
        ("u_bound", report.u_bound),
    ];
    let mut f = run.create(&format!("timechange_d{d}.csv"))?;
    writeln!(f, "quantity,value")?;
    for (k, val) in lines {
        println!("{k:>13} = {}", fmt17(val));
        writeln!(f, "{k},{}", fmt17(val))?;
    }
    f.flush()?;
    drop(f);
    run.finish(Outcome::Pass)
}

fn lv_tol(cfg: &ExperimentConfig) -> f64 {
    cfg.tol.unwrap_or(acceptance::LV_TOL)
}

fn lv_sim(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(11)?;
    let t_end = cfg.t_end.unwrap_or(1000.0);
    let model = LVModel::new(d)?;
    let mut run = Run::new("lv-sim", cfg)?;
    for seed in seeds(cfg, SeedSpec { first: 1, last: 1 }).seeds() {
        let traj = simulate(&model, &seeded_initial_condition(d, seed), t_end, lv_tol(cfg))?;
        let dist = distance_to_star(&traj, &model);
        write_all(&mut run, &format!("lv_d{d}_seed{seed}.csv"), |f| traj.write_csv(f))?;
        write_all(&mut run, &format!("distance_d{d}_seed{seed}.csv"), |f| write_distance_csv(&dist, f))?;
        let floor = permanence_floor(&traj).map(fmt17).unwrap_or_else(|_| "n/a".into());
        println!("seed {seed}: {} samples, final distance {}, floor {floor}", traj.samples.len(), fmt17(dist.last().unwrap().1));
    }
    run.finish(Outcome::Pass)
}

fn lv_average(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(11)?;
    let t_end = cfg.t_end.unwrap_or(1e4);
    let model = LVModel::new(d)?;
    let mut run = Run::new("lv-average", cfg)?;
    let mut failures = Vec::new();
    for seed in seeds(cfg, SeedSpec { first: 1, last: 1 }).seeds() {
        let traj = simulate(&model, &seeded_initial_condition(d, seed), t_end, lv_tol(cfg))?;
        write_all(&mut run, &format!("average_d{d}_seed{seed}.csv"), |f| traj.write_average_csv(f))?;
        let r = time_average_check(&traj, &model);
        println!(
            "seed {seed}: t = {}, max|avg - w*| = {}, identity defect {} (tolerance {})",
            fmt17(r.t),
            fmt17(r.distance_to_star),
            fmt17(r.defect),
            fmt17(r.tolerance)
        );
        if !r.passes() {
            failures.push(format!("time-average identity (seed {seed})"));
        }
    }
    run.finish(Outcome::from_failures(failures))
}

fn lyapunov_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(PUBLISHED_LAMBDA.len())?;
    if d != PUBLISHED_LAMBDA.len() {
        return Err(usage(format!("published weights exist only for d = {}", PUBLISHED_LAMBDA.len())));
    }
    let minors = leading_minors_exact(&published_lambda())?;
    let mut run = Run::new("lyapunov-verify", cfg)?;
    let mut f = run.create("minors.csv")?;
    writeln!(f, "k,delta,published,match")?;
    let mut failures = Vec::new();
    for (k, (m, want)) in minors.iter().zip(PUBLISHED_MINORS).enumerate() {
        let ok = m.to_string() == want;
        println!("delta_{} = {m}", k + 1);
        writeln!(f, "{},{m},{want},{ok}", k + 1)?;
        if !ok {
            failures.push(format!("delta_{}", k + 1));
        }
    }
    f.flush()?;
    drop(f);
    run.finish(Outcome::from_failures(failures))
}

fn lyapunov_search(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dims: Vec<usize> = match cfg.d {
        Some(d) => vec![cfg.d_or(d)?],
        None => (1..=11).collect(),
    };
    let restarts = cfg.trials.unwrap_or(acceptance::SEARCH_RESTARTS);
    let seed = seeds(cfg, SeedSpec { first: acceptance::SEARCH_SEED, last: acceptance::SEARCH_SEED }).first;
    let mut run = Run::new("lyapunov-search", cfg)?;
    let mut f = run.create("search.csv")?;
    writeln!(f, "d,min_eig,feasible,exact_positive_definite,lambda")?;
    for d in dims {
        let c = search_lambda(d, restarts, SEARCH_ITERATIONS, seed);
        println!("{}", c.report());
        let lambda: Vec<String> = c.lambda.iter().map(|v| fmt17(*v)).collect();
        writeln!(f, "{d},{},{},{},{}", fmt17(c.min_eig), c.feasible, c.exact_positive_definite, lambda.join(" "))?;
    }
    f.flush()?;
    drop(f);
    run.note("iterations", SEARCH_ITERATIONS as i64);
    run.finish(Outcome::Pass)
}

fn burn_prob(cfg: &ExperimentConfig, probabilities: &[f64]) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    let ic = integrator(cfg)?;
    let trials = cfg.trials.unwrap_or(acceptance::BURN_TRIALS);
    let seed = seeds(cfg, SeedSpec { first: acceptance::BURN_SEED, last: acceptance::BURN_SEED }).first;
    let mut run = Run::new("burn-prob", cfg)?;
    let mut f = run.create(&format!("burn_prob_d{d}.csv"))?;
    writeln!(f, "p,t,analytic,convolution,mc_estimate,stderr")?;
    let mut failures = Vec::new();
    for &p in probabilities {
        let t = time_for_unburned_probability(d, p, &ic)?;
        let profile = IntensityProfile::compute(d, t, &ic)?;
        let analytic = unburned_probability_analytic(&profile, t)?;
        let conv = unburned_probability_convolution(&profile, t)?;
        let window = BurnWindow::new(d, 0.0, t)?;
        let mc = mc_unburned_fraction(&window, &profile, t, trials, seed)?;
        println!("p = {p}: t = {}, analytic {}, convolution {}, MC {} +- {}", fmt17(t), fmt17(analytic), fmt17(conv), fmt17(mc.estimate), fmt17(mc.stderr));
        writeln!(f, "{p},{},{},{},{},{}", fmt17(t), fmt17(analytic), fmt17(conv), fmt17(mc.estimate), fmt17(mc.stderr))?;
        if !mc.within(analytic, 3.0) {
            failures.push(format!("MC outside 3 standard errors at p = {p}"));
        }
    }
    f.flush()?;
    drop(f);
    run.finish(Outcome::from_failures(failures))
}

fn burn_render(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    if d > 2 {
        return Err(usage(format!("burn-render supports d in {{1, 2}}, got {d}")));
    }
    let ic = integrator(cfg)?;
    let t_max = cfg.t_end.unwrap_or(if d == 1 { 2.0 } else { 2.5 });
    let window = BurnWindow::new(d, cfg.window.unwrap_or(10.0), t_max)?;
    let resolution = cfg.resolution.unwrap_or(512);
    let profile = IntensityProfile::compute(d, t_max, &ic)?;
    let mut run = Run::new("burn-render", cfg)?;
    for seed in seeds(cfg, SeedSpec { first: 1, last: 1 }).seeds() {
        let atoms = sample_atoms(&window, &profile, seed)?;
        let raster = render_field(&window, &atoms, resolution)?;
        write_all(&mut run, &format!("burn_d{d}_seed{seed}.ppm"), |f| raster.write_ppm(f))?;
        write_all(&mut run, &format!("burn_d{d}_seed{seed}_legend.csv"), |f| write_legend(&atoms, d, f))?;
        let burned = raster.burned_fraction_per_row();
        println!("seed {seed}: {} atoms, burned fraction of last row {}", atoms.len(), fmt17(*burned.last().unwrap_or(&0.0)));
    }
    run.finish(Outcome::Pass)
}

fn burn_coverage(cfg: &ExperimentConfig, eps: &[f64]) -> Result<Outcome> {
    let d = cfg.d_or(1)?;
    let ic = integrator(cfg)?;
    let est = blowup_estimate(d, &ic)?;
    let trials = cfg.trials.unwrap_or(acceptance::BURN_TRIALS);
    let seed = seeds(cfg, SeedSpec { first: acceptance::BURN_SEED, last: acceptance::BURN_SEED }).first;
    let rows = coverage_rate_check(d, &est, eps, trials, seed, &ic)?;
    let mut run = Run::new("burn-coverage", cfg)?;
    write_all(&mut run, &format!("coverage_d{d}.csv"), |f| write_coverage_csv(&rows, f))?;
    for r in &rows {
        println!("eps = {:e}: analytic {}, MC {} +- {}", r.eps, fmt17(r.analytic_exponent), fmt17(r.mc_estimate), fmt17(r.stderr));
    }
    run.note("t_blowup", est.t_blowup);
    run.finish(Outcome::Pass)
}

fn check_all(cfg: &ExperimentConfig, only: &[u32]) -> Result<Outcome> {
    if let Some(bad) = only.iter().find(|id| acceptance::criterion(**id).is_none()) {
        return Err(usage(format!("no criterion {bad}")));
    }
    let mut run = Run::new("check-all", cfg)?;
    let mut f = run.create("acceptance.txt")?;
    let mut failures = Vec::new();
    for c in acceptance::CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let outcome = c.run();
        println!("{}", outcome.line());
        writeln!(f, "{}", outcome.line())?;
        if !outcome.passed {
            failures.push(format!("{} {}", outcome.id, outcome.name));
        }
    }
    f.flush()?;
    drop(f);
    run.finish(Outcome::from_failures(failures))
}
