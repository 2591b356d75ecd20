use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bsde::{invert_transform, StepScheme};
use crate::error::{Error, Result};
use crate::lattice::{budget_by_summation, AdaptedProcess, LatticeModel, NodeId};
use crate::measures::{density_from_eta, profile_entropy};
use crate::optimal::{
    max_principle_residuals, no_consumption_example, shoot_with, worst_case_density, FbOptions,
    ShootingOptions,
};
use crate::robust::{
    evaluate_objective, inner_closed_form, inner_dp_grid, inner_via_bsde, EtaGrid,
};
use crate::scenario::report::{real, write_file, Checks, Table};
use crate::scenario::{Mode, ScenarioConfig};

/// Files written by a run and the checks behind `result.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub checks: Checks,
    pub files: Vec<String>,
}

/// Terminal values uniform on `[0, zeta_scale]`, running utility uniform on
/// `[0, source_scale]`.
pub fn random_inner_instance(
    m: &LatticeModel,
    rng: &mut impl Rng,
    zeta_scale: f64,
    source_scale: f64,
) -> Result<(Vec<f64>, AdaptedProcess)> {
    let zeta = (0..m.leaf_count())
        .map(|_| zeta_scale * rng.gen::<f64>())
        .collect();
    let source = AdaptedProcess::integrand_from_fn(m, |_| source_scale * rng.gen::<f64>())?;
    Ok((zeta, source))
}

/// Drift shifted node-wise by up to `size` in either direction, kept inside
/// 95% of the equivalence interval.
pub fn perturb_eta(
    m: &LatticeModel,
    eta: &AdaptedProcess,
    rng: &mut impl Rng,
    size: f64,
) -> AdaptedProcess {
    let bound = 0.95 / m.sqrt_dt();
    eta.map(|_, e| (e + size * (2.0 * rng.gen::<f64>() - 1.0)).clamp(-bound, bound))
}

/// Runs the scenario and writes its CSV files into `outdir` (created if
/// missing).
pub fn run(cfg: &ScenarioConfig, outdir: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::Io {
        path: outdir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut checks = Checks::default();
    let mut tables: Vec<(&'static str, Table)> = Vec::new();
    match cfg.mode {
        Mode::Inner => inner(cfg, &mut checks, &mut tables)?,
        Mode::OracleCompare => oracle_compare(cfg, &mut checks)?,
        Mode::Entropy => entropy(cfg, &mut checks, &mut tables)?,
        Mode::MaxPrinciple => max_principle(cfg, &mut checks)?,
        Mode::Optimize => optimize(cfg, &mut checks, &mut tables)?,
        Mode::ExampleNc => example_nc(cfg, &mut checks)?,
        Mode::Convergence => convergence(cfg, &mut checks, &mut tables)?,
    }
    write_file(outdir, "result.csv", &checks.to_csv())?;
    let mut files = vec!["result.csv".to_string()];
    for (name, table) in &tables {
        write_file(outdir, name, &table.to_csv())?;
        files.push(name.to_string());
    }
    Ok(RunOutput { checks, files })
}

fn value_process_table(
    m: &LatticeModel,
    y: &AdaptedProcess,
    z: &AdaptedProcess,
    eta: &AdaptedProcess,
) -> Table {
    let mut t = Table::new(&["step", "branch", "Y", "Z", "eta_star"]);
    for (node, v) in y.iter() {
        let (zc, ec) = if node.step < m.steps() {
            (real(z.at(node)), real(eta.at(node)))
        } else {
            (String::new(), String::new())
        };
        t.push(vec![
            node.step.to_string(),
            node.index.to_string(),
            real(v),
            zc,
            ec,
        ]);
    }
    t
}

fn inner(
    cfg: &ScenarioConfig,
    checks: &mut Checks,
    tables: &mut Vec<(&'static str, Table)>,
) -> Result<()> {
    let m = cfg.model()?;
    let p = cfg.qparams()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (zeta, source) = random_inner_instance(&m, &mut rng, cfg.zeta_scale, cfg.source_scale)?;
    let closed = inner_closed_form(&m, &zeta, &source, &p)?;
    let grid = EtaGrid::uniform(&m, cfg.grid_points, cfg.grid_span)?;
    let dp = inner_dp_grid(&m, &zeta, &source, &p, &grid)?;
    let star = density_from_eta(&m, &closed.optimal_eta)?;
    let attained = evaluate_objective(&m, &zeta, &source, &p, &star)?;
    let mut margin = f64::INFINITY;
    for _ in 0..50 {
        let eta = perturb_eta(&m, &closed.optimal_eta, &mut rng, 0.05);
        let mc = density_from_eta(&m, &eta)?;
        margin = margin.min(evaluate_objective(&m, &zeta, &source, &p, &mc)? - closed.y0);
    }
    let bsde = inner_via_bsde(&m, &zeta, &source, &p, StepScheme::ImplicitEuler)?;

    checks.info("Y0", closed.y0);
    checks.at_most("attainment_residual", (attained - closed.y0).abs(), 1e-9);
    checks.at_most("grid_gap", (dp.y0 - closed.y0).abs(), 1e-4);
    checks.at_least("perturbation_margin", margin, -1e-9);
    checks.at_most("bsde_gap", (bsde.initial() - closed.y0).abs(), 5e-3);

    let z = AdaptedProcess::integrand_from_fn(&m, |node| {
        (closed.value.at(node.up()) - closed.value.at(node.down())) / (2.0 * m.sqrt_dt())
    })?;
    tables.push((
        "value_process.csv",
        value_process_table(&m, &closed.value, &z, &closed.optimal_eta),
    ));
    Ok(())
}

fn oracle_compare(cfg: &ScenarioConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.model()?;
    let p = cfg.qparams()?;
    let grid = EtaGrid::uniform(&m, cfg.grid_points, cfg.grid_span)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.instances {
        let (zeta, source) = random_inner_instance(&m, &mut rng, cfg.zeta_scale, cfg.source_scale)?;
        let closed = inner_closed_form(&m, &zeta, &source, &p)?;
        let dp = inner_dp_grid(&m, &zeta, &source, &p, &grid)?;
        checks.at_most(
            format!("instance_{i}_grid_gap"),
            (dp.y0 - closed.y0).abs(),
            1e-4,
        );
    }
    Ok(())
}

fn entropy(
    cfg: &ScenarioConfig,
    checks: &mut Checks,
    tables: &mut Vec<(&'static str, Table)>,
) -> Result<()> {
    let p = cfg.qparams()?;
    let mut t = Table::new(&["N", "value", "gap"]);
    let mut gaps = Vec::new();
    for n in [cfg.steps, 2 * cfg.steps, 4 * cfg.steps] {
        let m = cfg.model_with_steps(n)?;
        let profile = vec![cfg.eta; n];
        let e = profile_entropy(&m, &profile, &p)?;
        checks.info(format!("entropy_N{n}"), e.entropy);
        checks.info(format!("identity_gap_N{n}"), e.gap());
        t.push(vec![n.to_string(), real(e.entropy), real(e.gap())]);
        gaps.push(e.gap().abs());
    }
    for (i, w) in gaps.windows(2).enumerate() {
        if w[0] <= 1e-14 {
            checks.at_most(format!("identity_gap_refined_{i}"), w[1], 1e-14);
        } else {
            checks.at_most(format!("identity_gap_ratio_{i}"), w[1] / w[0], 0.7);
        }
    }
    let flat = profile_entropy(&cfg.model()?, &vec![0.0; cfg.steps], &p)?;
    checks.at_most("zero_drift_entropy", flat.entropy.abs(), 1e-12);
    tables.push(("convergence.csv", t));
    Ok(())
}

fn shooting_options(cfg: &ScenarioConfig) -> ShootingOptions {
    ShootingOptions {
        budget_tolerance: cfg.budget_tolerance,
        fb: FbOptions {
            tolerance: cfg.tolerance,
            max_iterations: cfg.max_iterations,
            ..FbOptions::default()
        },
        ..ShootingOptions::default()
    }
}

fn max_principle(cfg: &ScenarioConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.model()?;
    let p = cfg.qparams()?;
    let util = cfg.utility()?;
    let report = shoot_with(&m, &p, &util, cfg.x0, &shooting_options(cfg))?;
    let r = max_principle_residuals(&m, &p, &util, &report.strategy, report.v_star)?;
    let mut bumped = report.strategy.clone();
    bumped.consumption = bumped.consumption.map(|_, c| 1.1 * c);
    let off = max_principle_residuals(&m, &p, &util, &bumped, report.v_star)?;

    checks.info("v_star", report.v_star);
    checks.info("fb_iterations", report.fb_iterations as f64);
    checks.at_most("terminal_residual_max", r.terminal.max, 1e-6);
    checks.info("terminal_residual_mean", r.terminal.mean);
    checks.at_most("consumption_residual_max", r.consumption.max, 1e-6);
    checks.info("consumption_residual_mean", r.consumption.mean);
    checks.at_most(
        "adjoint_terminal_residual_max",
        r.adjoint_terminal.max,
        1e-6,
    );
    checks.at_most(
        "adjoint_consumption_residual_max",
        r.adjoint_consumption.max,
        1e-6,
    );
    checks.at_most("form_gap", r.form_gap, 1e-6);
    checks.at_most("consumption_form_gap", report.fb.consumption_form_gap, 1e-6);
    checks.at_least(
        "perturbed_consumption_residual_max",
        off.consumption.max,
        1e-2,
    );
    Ok(())
}

fn optimize(
    cfg: &ScenarioConfig,
    checks: &mut Checks,
    tables: &mut Vec<(&'static str, Table)>,
) -> Result<()> {
    let m = cfg.model()?;
    let p = cfg.qparams()?;
    let util = cfg.utility()?;
    let report = shoot_with(&m, &p, &util, cfg.x0, &shooting_options(cfg))?;
    let summed = budget_by_summation(&m, &report.strategy)?;
    let s = &report.strategy;
    let min_c = s
        .consumption
        .iter()
        .map(|(_, c)| c)
        .fold(f64::INFINITY, f64::min);
    let min_xi = s.terminal.iter().cloned().fold(f64::INFINITY, f64::min);

    checks.info("v_star", report.v_star);
    checks.info("X0", report.x0);
    checks.at_most("budget_error", (report.x0 - cfg.x0).abs(), 1e-6 * cfg.x0);
    checks.at_most(
        "budget_identity_error",
        (summed - cfg.x0).abs(),
        1e-6 * cfg.x0,
    );
    checks.info("Ybar0", report.ybar0);
    checks.info("Y0", report.y0);
    checks.at_least("min_consumption", min_c, f64::MIN_POSITIVE);
    checks.at_least("min_terminal_wealth", min_xi, f64::MIN_POSITIVE);
    if let Some(r) = &report.residuals {
        checks.at_most("max_principle_residual", r.worst(), 1e-6);
    }
    checks.info("fb_iterations", report.fb_iterations as f64);

    let plain = invert_transform(&report.fb.solution, &p)?;
    let eta = worst_case_density(&m, &report.fb.solution)?.eta;
    tables.push((
        "value_process.csv",
        value_process_table(&m, &plain.value, &plain.integrand, &eta),
    ));
    let mut strat = Table::new(&["step", "branch", "consumption", "terminal_wealth"]);
    for (node, c) in s.consumption.iter() {
        strat.push(vec![
            node.step.to_string(),
            node.index.to_string(),
            real(c),
            String::new(),
        ]);
    }
    for (i, &xi) in s.terminal.iter().enumerate() {
        let node = NodeId::new(m.steps(), i);
        strat.push(vec![
            node.step.to_string(),
            node.index.to_string(),
            String::new(),
            real(xi),
        ]);
    }
    tables.push(("strategy.csv", strat));
    Ok(())
}

fn example_nc(cfg: &ScenarioConfig, checks: &mut Checks) -> Result<()> {
    let m = cfg.model()?;
    let p = cfg.qparams()?;
    let util = cfg.utility()?;
    let r = no_consumption_example(&m, &p, &util, cfg.x0)?;
    checks.info("V", r.value);
    checks.info("y_closed_form", r.y_closed);
    checks.info("v_star", r.report.v_star);
    checks.at_most("terminal_gap", r.terminal_gap, 1e-6);
    checks.at_most("value_formula_gap", (r.value - r.value_formula).abs(), 1e-8);
    checks.at_most(
        "closed_form_value_gap",
        (r.value - r.value_closed).abs(),
        1e-8,
    );
    Ok(())
}

fn convergence(
    cfg: &ScenarioConfig,
    checks: &mut Checks,
    tables: &mut Vec<(&'static str, Table)>,
) -> Result<()> {
    let p = cfg.qparams()?;
    let util = cfg.utility()?;
    let mut t = Table::new(&["N", "value", "gap"]);
    let mut gaps = Vec::new();
    let mut n = 1;
    while n <= cfg.n_max {
        let m = cfg.model_with_steps(n)?;
        // smooth instance: utility of a lognormal-like terminal wealth, flat source
        let zeta: Vec<f64> = (0..m.leaf_count())
            .map(|i| {
                let b = m.brownian(NodeId::new(n, i));
                cfg.zeta_scale * util.h((cfg.sigma * b).exp())
            })
            .collect();
        let source = AdaptedProcess::constant_integrand(&m, cfg.source_scale)?;
        let closed = inner_closed_form(&m, &zeta, &source, &p)?;
        let bsde = inner_via_bsde(&m, &zeta, &source, &p, StepScheme::ImplicitEuler)?;
        let gap = (closed.y0 - bsde.initial()).abs();
        t.push(vec![n.to_string(), real(closed.y0), real(gap)]);
        checks.info(format!("value_N{n}"), closed.y0);
        gaps.push((n, gap));
        n *= 2;
    }
    if let Some(&(n_last, g_last)) = gaps.last() {
        checks.at_most(format!("gap_N{n_last}"), g_last, 5e-3);
    }
    for w in gaps.windows(2) {
        if w[0].1 > 1e-14 {
            checks.at_most(format!("gap_ratio_N{}", w[1].0), w[1].1 / w[0].1, 0.7);
        }
    }
    tables.push(("convergence.csv", t));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_config_str;

    fn run_text(text: &str) -> (RunOutput, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config_str(text).unwrap();
        (run(&cfg, dir.path()).unwrap(), dir)
    }

    #[test]
    fn inner_mode_attains() {
        let (out, dir) = run_text("mode = inner\ngamma = 1\nN = 4\n");
        assert_eq!(out.checks.failures(), 0, "{:?}", out.checks);
        let csv = std::fs::read_to_string(dir.path().join("result.csv")).unwrap();
        assert!(csv.lines().any(|l| l.starts_with("Y0,")));
        let vp = std::fs::read_to_string(dir.path().join("value_process.csv")).unwrap();
        assert_eq!(vp.lines().next().unwrap(), "step,branch,Y,Z,eta_star");
        assert_eq!(vp.lines().count(), 1 + 31);
    }

    #[test]
    fn oracle_compare_passes() {
        let (out, _dir) =
            run_text("mode = oracle-compare\ngamma = 2\nq = 3\nN = 3\ninstances = 4\n");
        assert_eq!(out.checks.rows().len(), 4);
        assert_eq!(out.checks.failures(), 0, "{:?}", out.checks);
    }

    #[test]
    fn entropy_mode_halves() {
        let (out, _dir) = run_text("mode = entropy\ngamma = 1\nq = 1.5\nN = 4\n");
        assert_eq!(out.checks.failures(), 0, "{:?}", out.checks);
    }

    #[test]
    fn convergence_mode_shrinks() {
        let (out, _dir) = run_text("mode = convergence\ngamma = 1\nn_max = 8\n");
        assert_eq!(out.checks.failures(), 0, "{:?}", out.checks);
    }
}
