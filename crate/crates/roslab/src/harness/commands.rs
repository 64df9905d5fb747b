//! Subcommand bodies: run suites, write artifacts and `report.json`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::report::{Check, RunReport};
use super::suites::*;
use crate::error::Result;
use crate::fluid::{fluid_solve, initial_state, FluidInitial, FluidOptions, FluidParams};
use crate::sde::{build_sde_coefficients, integrate, IntegrateOptions, NoiseForm, Observables, SdeModel};
use crate::simulator::{path_functional, simulate, EventLog};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Run `body` on the configured worker pool and write the report with its timing.
fn run(
    cfg: &ExperimentConfig,
    suite: &str,
    out: &Path,
    body: impl FnOnce(&mut RunReport) -> Result<()> + Send,
) -> Result<RunReport> {
    cfg.validate()?;
    let load = cfg.load().ok();
    let start = Instant::now();
    let mut report = RunReport::new(suite, cfg.master_seed, load);
    with_workers(cfg.workers, || body(&mut report))??;
    report.write(out, Some(start.elapsed().as_secs_f64()))?;
    Ok(report)
}

/// Event log of `system` at its seed, plus path functionals on a uniform grid.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "simulate", out, |report| {
        let system = &cfg.system;
        let log = simulate(system, system.seed)?;
        log.write_jsonl(create(out, "log.jsonl")?)?;
        let steps = 500usize;
        let grid: Vec<f64> = if system.horizon > 0.0 {
            (0..=steps).map(|i| system.horizon * i as f64 / steps as f64).collect()
        } else {
            vec![0.0]
        };
        let mut w = create(out, "paths.csv")?;
        for (n, f) in cfg.test_functions.iter().enumerate() {
            path_functional(&log, f, &grid)?.write_csv(&mut w, &f.tag(), n == 0)?;
        }
        report.push(determinism(system, cfg.golden_hash.as_deref())?);
        Ok(())
    })
}

/// Fluid path of `system` with its CSV and survival dump, and the residual check.
pub fn cmd_fluid(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "fluid", out, |report| {
        let system = &cfg.system;
        let params = FluidParams::from_config(system)?;
        let init = FluidInitial::from_config(system)?;
        let mut opts = FluidOptions::new(cfg.fluid_dt).with_functionals(cfg.test_functions.iter().copied());
        opts.snapshot_every = Some(((1.0 / cfg.fluid_dt).round() as usize).max(1));
        let st = initial_state::<f64>(&params, &init, &opts)?;
        let path = fluid_solve(&params, &st, system.horizon, &opts)?;
        path.write_csv(create(out, "fluid.csv")?)?;
        path.write_survival_dump(create(out, "survival.csv")?)?;
        if cfg.wants("fluid_residual") {
            report.push(fluid_residual_check(system, cfg.fluid_dt, &cfg.tolerances)?);
        }
        if cfg.wants("invariant") {
            report.push(invariant_check(&invariant_reference(), 10.0)?);
        }
        Ok(())
    })
}

pub fn cmd_converge(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "converge", out, |report| {
        let r = converge(cfg, true)?;
        write_converge_csv(create(out, "converge.csv")?, &r.rows)?;
        for c in r.checks {
            report.push(c);
        }
        Ok(())
    })
}

/// Renewal, conservation, determinism, martingale and QV checks.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "verify", out, |report| {
        let tol = &cfg.tolerances;
        if cfg.wants("renewal_identity") {
            report.push(renewal_identity(tol, cfg.master_seed)?);
        }
        if cfg.wants("renewal_fclt") {
            report.push(renewal_fclt(tol, cfg.master_seed)?);
        }
        if cfg.wants("conservation") {
            report.push(conservation(&cfg.system, tol.conservation_replications, cfg.master_seed)?);
        }
        if cfg.wants("determinism") {
            report.push(determinism(&cfg.system, cfg.golden_hash.as_deref())?);
        }
        if cfg.wants("martingale") {
            for c in martingale_nullity(cfg)? {
                report.push(c);
            }
        }
        if cfg.wants("qv") {
            report.push(qv_match(cfg)?);
        }
        Ok(())
    })
}

/// Advisory prelimit-versus-SDE comparison; one CSV per class.
pub fn cmd_diffusion(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "diffusion", out, |report| {
        let r = diffusion_compare(cfg, true)?;
        for (j, rows) in r.rows.iter().enumerate() {
            write_diffusion_csv(create(out, &format!("diffusion_class{j}.csv"))?, rows)?;
        }
        for c in r.checks {
            report.push(c);
        }
        Ok(())
    })
}

/// SDE coefficients along the fluid path, sample paths, and the calibration checks.
pub fn cmd_sde(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "sde", out, |report| {
        let tol = &cfg.tolerances;
        let system = &cfg.system;
        let jn = system.classes;
        let beta = cfg.betas.first().copied().unwrap_or(1.0);
        let obs = Observables::new(vec![beta; jn], tol.proxy_beta)?;
        let model = SdeModel::from_config(system)?;
        let params = &model.params;
        let init = FluidInitial::from_config(system)?;
        let opts = FluidOptions::new(cfg.fluid_dt).with_functionals(obs.required_functionals());
        let st = initial_state::<f64>(params, &init, &opts)?;
        let path = fluid_solve(params, &st, system.horizon, &opts)?;
        let stride = ((tol.sde_dt / cfg.fluid_dt).round() as usize).max(1);
        let coeffs = build_sde_coefficients(&model, &obs, &path, NoiseForm::Stated, stride)?;
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("coefficients.json"), coeffs.to_json()?)?;
        let iopts = IntegrateOptions {
            dt: stride as f64 * cfg.fluid_dt,
            horizon: system.horizon,
            paths: tol.sde_paths.min(1_000),
            seed: cfg.master_seed,
            record: (0..=system.horizon.floor() as usize).map(|t| t as f64).collect(),
        };
        integrate(&coeffs, &crate::sde::InitialCondition::Zero, &iopts)?.write_csv(create(out, "sde_samples.csv")?)?;
        if cfg.wants("sde_calibration") {
            report.push(sde_calibration(tol, cfg.master_seed)?);
        }
        if cfg.wants("d_sanity") {
            report.push(d_sanity(cfg)?);
        }
        Ok(())
    })
}

/// Integrity of a stored JSON-lines log.
pub fn cmd_verify_log(cfg: &ExperimentConfig, log: &Path, out: &Path) -> Result<RunReport> {
    run(cfg, "verify-log", out, |report| {
        let file = std::io::BufReader::new(File::open(log)?);
        let check = match EventLog::read_jsonl(file) {
            Ok(l) => log_integrity(&l),
            Err(e) => Check::new("log_integrity", "log parses", 0.0).metric("error", e.to_string()).verdict(false),
        };
        report.push(check);
        Ok(())
    })
}

pub fn cmd_renewal_check(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    run(cfg, "renewal-check", out, |report| {
        report.push(renewal_identity(&cfg.tolerances, cfg.master_seed)?);
        report.push(renewal_fclt(&cfg.tolerances, cfg.master_seed)?);
        Ok(())
    })
}
