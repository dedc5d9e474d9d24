use std::io::Write as _;
use std::path::{Path, PathBuf};

use stacked_contact::coupling::{
    couple_box, couple_contact_lower, couple_equal_rates, couple_infection_rates, couple_shared,
    search_birth_coupling_violation, OrderingReport,
};
use stacked_contact::estimate::{
    estimate_critical, final_counts, phase_scan, scan_csv, wilson_interval, BisectionSettings, Criterion,
    CriticalTarget,
};
use stacked_contact::events::generate_stream;
use stacked_contact::meanfield::{mf_integrate, MFState};
use stacked_contact::par::{map_replicates, Exec};
use stacked_contact::raster::raster;
use stacked_contact::renorm::{
    estimate_gadget_probs_mc, gadget_event_probs, gadget_report_csv, oriented_percolation_wet, EdgeRule, Extent,
};
use stacked_contact::rng::child_seed;
use stacked_contact::{BoxPartition, Configuration, State};

use crate::config::RunConfig;
use crate::{CliError, CouplingKind};

fn exec(cfg: &RunConfig) -> Exec {
    if cfg.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn header(cfg: &RunConfig, command: &str) -> Vec<String> {
    vec![format!("stackcp {command}"), cfg.echo()]
}

fn destination(out: Option<&Path>, fallback: &Option<String>) -> Option<PathBuf> {
    out.map(Path::to_path_buf).or_else(|| fallback.as_ref().map(PathBuf::from))
}

fn emit(dest: Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(&p, bytes).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let init = cfg.init_spec()?.build(&params, child_seed(cfg.seed, u64::MAX))?;
    let dest = destination(out, &cfg.raster_out);
    let (occupied, infected, rows) = match dest {
        Some(path) => {
            let r = raster(&params, &init, cfg.horizon, cfg.sample_interval, cfg.seed)?;
            emit(Some(path), &r.to_pgm())?;
            (r.final_counts.0, r.final_counts.1, r.rows)
        }
        None => {
            let (o, i) = final_counts(&params, &init, cfg.horizon, cfg.seed, Criterion::HostSurvival);
            (o, i, 0)
        }
    };
    println!(
        "simulate: horizon={} seed={} occupied={occupied} infected={infected} raster_rows={rows}",
        cfg.horizon, cfg.seed
    );
    Ok(())
}

/// Infected hosts at even vertices become healthy.
fn demote_even(cfg: &Configuration) -> Configuration {
    let mut c = cfg.clone();
    for x in (0..c.len()).step_by(2) {
        if c.get(x) == State::Infected {
            c.set(x, State::Healthy);
        }
    }
    c
}

pub fn couple(cfg: &RunConfig, which: CouplingKind, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    if which == CouplingKind::Fig4 {
        return fig4(cfg, out);
    }
    let spec = cfg.init_spec()?;
    let horizon = cfg.horizon;
    // precondition checks up front, so that a bad parameter is a config error
    let lambda2_low = cfg.lambda2_low.unwrap_or(params.lambda2() / 2.0);
    let lambda0 = cfg.lambda0.unwrap_or(0.5 * params.lambda1().min(params.lambda2()));
    let part = match which {
        CouplingKind::Box => Some(BoxPartition::new(cfg.epsilon0, &params)?),
        _ => None,
    };
    match which {
        CouplingKind::Lemma2 if !(0.0..=params.lambda2()).contains(&lambda2_low) => {
            return Err(CliError::Config(format!("lambda2_low={lambda2_low} must lie in [0, lambda2]")));
        }
        CouplingKind::Table2 if params.lambda1() > params.lambda2() => {
            return Err(CliError::Config(format!(
                "table2 needs lambda1 <= lambda2, got lambda1={} lambda2={}",
                params.lambda1(),
                params.lambda2()
            )));
        }
        CouplingKind::Table3 if !(lambda0 >= 0.0 && lambda0 < params.lambda1().min(params.lambda2())) => {
            return Err(CliError::Config(format!("lambda0={lambda0} must lie in [0, min(lambda1, lambda2))")));
        }
        _ => {}
    }
    let reports = map_replicates(exec(cfg), cfg.reps, cfg.seed, |_, s| -> Result<OrderingReport, CliError> {
        let init = spec.build(&params, child_seed(s, u64::MAX))?;
        let report = match which {
            CouplingKind::Lemma1 => {
                let stream = generate_stream(&params, horizon, s)?;
                couple_shared(&stream, demote_even(&init), init)?.2
            }
            CouplingKind::Lemma2 => couple_infection_rates(&params, lambda2_low, init.clone(), init, horizon, s)?.2,
            CouplingKind::Table2 => couple_equal_rates(&params, init, horizon, s)?.2,
            CouplingKind::Table3 => {
                let eta = init.indicator(true, State::Infected);
                couple_contact_lower(lambda0, &params, init, eta, horizon, s)?.2
            }
            CouplingKind::Box => couple_box(&params, part.as_ref().expect("partition built"), init, horizon, s)?.2,
            CouplingKind::Fig4 => unreachable!(),
        };
        Ok(report)
    });
    let mut failures = 0;
    let mut first = None;
    let mut events = 0usize;
    for (k, r) in reports.into_iter().enumerate() {
        let r = r?;
        events += r.checked_events;
        if !r.holds {
            failures += 1;
            if first.is_none() {
                first = r.first_violation.map(|v| (k, v));
            }
        }
    }
    let name = format!("{which:?}").to_lowercase();
    let line = format!(
        "couple {name}: {}/{} runs ordered, {events} events checked",
        cfg.reps - failures,
        cfg.reps
    );
    emit(destination(out, &cfg.csv_out), format!("{line}\n").as_bytes())?;
    match first {
        None => Ok(()),
        Some((k, v)) => Err(CliError::Violation(format!(
            "{name}: replicate {k} broke the ordering at t={} vertex {} ({} vs {})",
            v.time, v.vertex, v.first, v.second
        ))),
    }
}

fn fig4(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    if !(cfg.lambda1_low < params.lambda1()) {
        return Err(CliError::Config(format!(
            "fig4 needs lambda1_low < lambda1, got {} >= {}",
            cfg.lambda1_low,
            params.lambda1()
        )));
    }
    let seeds: Vec<u64> = (0..cfg.reps as u64).map(|k| child_seed(cfg.seed, k)).collect();
    let found = search_birth_coupling_violation(
        cfg.lambda1_low,
        params.lambda1(),
        &params,
        (cfg.p1, cfg.p2),
        cfg.horizon,
        &seeds,
    )?;
    match found {
        Some(w) => {
            emit(destination(out, &cfg.csv_out), w.to_log().as_bytes())?;
            eprintln!(
                "fig4: witness found (seed {}), infected-set inclusion fails at t={} vertex {}",
                w.seed.unwrap_or_default(),
                w.violation.time,
                w.violation.vertex
            );
            Ok(())
        }
        None => Err(CliError::Violation(format!("fig4: no witness among {} seeds", cfg.reps))),
    }
}

pub fn meanfield(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let s0 = MFState::new(cfg.u1, cfg.u2)?;
    let traj = mf_integrate(s0, &params, cfg.horizon, cfg.step)?;
    emit(destination(out, &cfg.csv_out), traj.to_csv(&header(cfg, "meanfield")).as_bytes())
}

pub fn gadget(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let probs = gadget_event_probs(cfg.block_time, cfg.lambda1, cfg.lambda2, cfg.delta, cfg.recoveries)?;
    let est = estimate_gadget_probs_mc(
        cfg.block_time,
        cfg.lambda1,
        cfg.lambda2,
        cfg.delta,
        cfg.reps,
        cfg.seed,
        exec(cfg),
    )?;
    emit(
        destination(out, &cfg.csv_out),
        gadget_report_csv(&probs, &est, &header(cfg, "gadget")).as_bytes(),
    )?;
    let checks = [
        ("A1", est.a1, probs.a1),
        ("A2", est.a2, probs.a2),
        ("single_race", est.single, probs.p_single),
        ("A4_time", est.a4_time, probs.a4_time),
        ("A4_race", est.a4_race, probs.a4_race),
    ];
    let bad: Vec<&str> = checks
        .iter()
        .filter(|(_, e, a)| !e.agrees_with(*a, 4.0))
        .map(|c| c.0)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("outside 4 standard errors: {}", bad.join(", "))))
    }
}

pub fn scan(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let cells = phase_scan(
        &params,
        &cfg.lambda1_grid,
        &cfg.lambda2_grid,
        cfg.delta,
        &cfg.init_spec()?,
        cfg.horizon,
        cfg.reps,
        cfg.seed,
        exec(cfg),
    )?;
    emit(destination(out, &cfg.csv_out), scan_csv(&cells, &header(cfg, "scan")).as_bytes())
}

pub fn critical(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let target = match cfg.target.as_str() {
        "basic-cp" => CriticalTarget::BasicCp,
        "stacked-lambda2" => CriticalTarget::StackedLambda2,
        other => {
            return Err(CliError::Config(format!(
                "target: expected basic-cp or stacked-lambda2, got {other:?}"
            )))
        }
    };
    let settings = BisectionSettings {
        bracket: cfg.bracket,
        tolerance: cfg.tolerance,
        reps: cfg.reps,
        horizon: cfg.horizon,
        threshold: cfg.threshold,
        base_seed: cfg.seed,
    };
    let est = estimate_critical(target, &params, settings, exec(cfg))?;
    emit(destination(out, &cfg.csv_out), est.to_csv(&header(cfg, "critical")).as_bytes())
}

pub fn percolation(cfg: &RunConfig, out: Option<&Path>) -> Result<(), CliError> {
    let rule = match cfg.rule.as_str() {
        "survival" => EdgeRule::Survival,
        "extinction" => EdgeRule::Extinction,
        other => return Err(CliError::Config(format!("rule: expected survival or extinction, got {other:?}"))),
    };
    if cfg.reps == 0 || cfg.width == 0 || cfg.levels == 0 {
        return Err(CliError::Config("reps, width and levels must be positive".into()));
    }
    let extent = Extent {
        width: cfg.width,
        levels: cfg.levels,
    };
    let runs = map_replicates(exec(cfg), cfg.reps, cfg.seed, |_, s| {
        oriented_percolation_wet(cfg.p, rule, extent, s).map(|f| {
            (
                f.reaches_level(cfg.levels - 1),
                f.wet_count() as f64 / (cfg.width * cfg.levels) as f64,
            )
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let reached = runs.iter().filter(|r| r.0).count();
    let (lo, hi) = wilson_interval(reached, cfg.reps, 1.959_963_984_540_054);
    let density = runs.iter().map(|r| r.1).sum::<f64>() / cfg.reps as f64;
    let mut text = String::new();
    for h in header(cfg, "percolation") {
        text.push_str(&format!("# {h}\n"));
    }
    text.push_str("p,rule,width,levels,reps,reach_prop,ci_low,ci_high,wet_density\n");
    text.push_str(&format!(
        "{},{},{},{},{},{},{lo},{hi},{density}\n",
        cfg.p,
        cfg.rule,
        cfg.width,
        cfg.levels,
        cfg.reps,
        reached as f64 / cfg.reps as f64
    ));
    emit(destination(out, &cfg.csv_out), text.as_bytes())
}
