//! Monte Carlo estimators: survival and persistence proportions at a finite
//! horizon, critical rates by bisection, and phase-diagram scans.
//!
//! "Survival" here always means non-extinction at the horizon of a finite
//! torus. Near a transition the finite system is metastable, so proportions
//! measured at a finite horizon are biased towards survival.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::events::{Effect, EventGenerator, Process};
use crate::lattice::{Configuration, ParamSet, State};
use crate::par::{map_indexed, map_replicates, Exec};
use crate::rng::{child_seed, rng_from_seed};

/// Which set must be non-empty at the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    HostSurvival,
    InfectionPersistence,
}

impl Criterion {
    fn count(self, p: &Process) -> usize {
        match self {
            Criterion::HostSurvival => p.occupied(),
            Criterion::InfectionPersistence => p.infected(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::HostSurvival => "host-survival",
            Criterion::InfectionPersistence => "infection-persistence",
        }
    }
}

/// Initial condition recipes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitSpec {
    AllHealthy,
    AllInfected,
    /// One infected host at vertex 0, every other vertex healthy.
    SingleInfected,
    /// Independent sites: healthy with `p1`, infected with `p2`.
    Density { p1: f64, p2: f64 },
}

impl InitSpec {
    pub fn build(&self, params: &ParamSet, seed: u64) -> Result<Configuration> {
        let g = params.geometry();
        Ok(match *self {
            InitSpec::AllHealthy => Configuration::uniform(g, State::Healthy),
            InitSpec::AllInfected => Configuration::uniform(g, State::Infected),
            InitSpec::SingleInfected => Configuration::single(g, 0, State::Infected, State::Healthy),
            InitSpec::Density { p1, p2 } => {
                if !(p1 >= 0.0 && p2 >= 0.0 && p1 + p2 <= 1.0) {
                    return Err(invalid("init", format!("densities ({p1}, {p2}) must be a sub-probability")));
                }
                Configuration::random(g, p1, p2, &mut rng_from_seed(seed))
            }
        })
    }
}

/// Proportion of runs alive at the horizon with its Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalEstimate {
    pub proportion_alive: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: usize,
    pub horizon: f64,
    pub criterion: Criterion,
}

fn z95() -> f64 {
    Normal::standard().inverse_cdf(0.975)
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

impl SurvivalEstimate {
    pub fn from_hits(hits: usize, reps: usize, horizon: f64, criterion: Criterion) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, reps, z95());
        SurvivalEstimate {
            proportion_alive: hits as f64 / reps as f64,
            ci_low,
            ci_high,
            reps,
            horizon,
            criterion,
        }
    }
}

/// Occupied and infected counts at the horizon of one run. The run stops
/// early once the set watched by `stop` is empty (it is absorbing).
pub fn final_counts(params: &ParamSet, init: &Configuration, horizon: f64, seed: u64, stop: Criterion) -> (usize, usize) {
    let mut p = Process::new(init.clone());
    if stop.count(&p) > 0 {
        for ev in EventGenerator::new(params, horizon, seed) {
            if p.apply(Effect::stacked(&ev)).is_some() && stop.count(&p) == 0 {
                break;
            }
        }
    }
    (p.occupied(), p.infected())
}

fn check_run(params: &ParamSet, init: &Configuration, horizon: f64, reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(invalid("reps", "need at least one replicate"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and >= 0"));
    }
    if init.geometry() != params.geometry() {
        return Err(Error::GeometryMismatch("initial configuration does not match the torus".into()));
    }
    Ok(())
}

/// Fraction of `reps` runs (replicate `k` uses `child_seed(base_seed, k)`)
/// whose criterion set is non-empty at `horizon`.
pub fn estimate_survival(
    params: &ParamSet,
    init: &Configuration,
    horizon: f64,
    reps: usize,
    criterion: Criterion,
    base_seed: u64,
    exec: Exec,
) -> Result<SurvivalEstimate> {
    check_run(params, init, horizon, reps)?;
    let alive = map_replicates(exec, reps, base_seed, |_, seed| {
        let (occ, inf) = final_counts(params, init, horizon, seed, criterion);
        match criterion {
            Criterion::HostSurvival => occ > 0,
            Criterion::InfectionPersistence => inf > 0,
        }
    });
    let hits = alive.iter().filter(|&&a| a).count();
    Ok(SurvivalEstimate::from_hits(hits, reps, horizon, criterion))
}

/// Which rate is bisected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticalTarget {
    /// Basic contact process: `λ1 = λ`, `λ2 = δ = 0`, all sites occupied,
    /// host survival.
    BasicCp,
    /// `λ2 = λ` with the other rates fixed, all sites infected, infection
    /// persistence.
    StackedLambda2,
}

/// Settings shared by every bisection point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectionSettings {
    pub bracket: (f64, f64),
    pub tolerance: f64,
    pub reps: usize,
    pub horizon: f64,
    pub threshold: f64,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalEstimate {
    pub bracket_low: f64,
    pub bracket_high: f64,
    pub iterations: usize,
    /// Every evaluated rate with its estimate, in evaluation order.
    pub points: Vec<(f64, SurvivalEstimate)>,
}

impl CriticalEstimate {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.bracket_low + self.bracket_high)
    }

    pub fn width(&self) -> f64 {
        self.bracket_high - self.bracket_low
    }

    /// `rate,proportion,ci_low,ci_high,reps` rows.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            let _ = writeln!(out, "# {h}");
        }
        let _ = writeln!(out, "# bracket {} {} after {} iterations", self.bracket_low, self.bracket_high, self.iterations);
        out.push_str("rate,proportion,ci_low,ci_high,reps\n");
        for (r, e) in &self.points {
            let _ = writeln!(out, "{r},{},{},{},{}", e.proportion_alive, e.ci_low, e.ci_high, e.reps);
        }
        out
    }
}

/// Bisection on the target rate. A point counts as surviving when its
/// proportion is at least `threshold`. Every point uses the same seeds.
pub fn estimate_critical(
    target: CriticalTarget,
    fixed: &ParamSet,
    settings: BisectionSettings,
    exec: Exec,
) -> Result<CriticalEstimate> {
    let (mut lo, mut hi) = settings.bracket;
    if !(lo < hi && lo >= 0.0) {
        return Err(invalid("bracket", format!("need 0 <= low < high, got ({lo}, {hi})")));
    }
    if !(settings.tolerance > 0.0) {
        return Err(invalid("tolerance", "must be positive"));
    }
    if !(0.0..=1.0).contains(&settings.threshold) {
        return Err(invalid("threshold", "must lie in [0, 1]"));
    }
    let (init, criterion) = match target {
        CriticalTarget::BasicCp => (Configuration::uniform(fixed.geometry(), State::Healthy), Criterion::HostSurvival),
        CriticalTarget::StackedLambda2 => (
            Configuration::uniform(fixed.geometry(), State::Infected),
            Criterion::InfectionPersistence,
        ),
    };
    let at = |rate: f64| -> Result<SurvivalEstimate> {
        let params = match target {
            CriticalTarget::BasicCp => fixed.with_rates(rate, 0.0, 0.0)?,
            CriticalTarget::StackedLambda2 => fixed.with_lambda2(rate)?,
        };
        estimate_survival(&params, &init, settings.horizon, settings.reps, criterion, settings.base_seed, exec)
    };
    let mut points = Vec::new();
    let low_est = at(lo)?;
    let high_est = at(hi)?;
    points.push((lo, low_est));
    points.push((hi, high_est));
    if low_est.proportion_alive >= settings.threshold || high_est.proportion_alive < settings.threshold {
        return Err(Error::BracketNotStraddling { low: lo, high: hi });
    }
    let mut iterations = 0;
    while hi - lo > settings.tolerance {
        let mid = 0.5 * (lo + hi);
        let est = at(mid)?;
        points.push((mid, est));
        if est.proportion_alive >= settings.threshold {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(CriticalEstimate {
        bracket_low: lo,
        bracket_high: hi,
        iterations,
        points,
    })
}

/// One cell of a phase scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
    pub host: SurvivalEstimate,
    pub infection: SurvivalEstimate,
}

/// Host survival and infection persistence over `λ1 × λ2`, from `init`.
/// Cell `i` (row-major in `λ1`) uses base seed `child_seed(base_seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn phase_scan(
    base: &ParamSet,
    lambda1s: &[f64],
    lambda2s: &[f64],
    delta: f64,
    init: &InitSpec,
    horizon: f64,
    reps: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<Vec<ScanCell>> {
    if lambda1s.is_empty() || lambda2s.is_empty() {
        return Err(invalid("grid", "empty rate grid"));
    }
    let mut grid = Vec::with_capacity(lambda1s.len() * lambda2s.len());
    for &l1 in lambda1s {
        for &l2 in lambda2s {
            grid.push(base.with_rates(l1, l2, delta)?);
        }
    }
    let init_cfg = init.build(base, base_seed)?;
    check_run(base, &init_cfg, horizon, reps)?;
    let cells = map_indexed(exec, grid.len() * reps, |j| {
        let (cell, k) = (j / reps, j % reps);
        let seed = child_seed(child_seed(base_seed, cell as u64), k as u64);
        final_counts(&grid[cell], &init_cfg, horizon, seed, Criterion::HostSurvival)
    });
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let runs = &cells[i * reps..(i + 1) * reps];
            let host = runs.iter().filter(|c| c.0 > 0).count();
            let inf = runs.iter().filter(|c| c.1 > 0).count();
            ScanCell {
                lambda1: p.lambda1(),
                lambda2: p.lambda2(),
                delta,
                host: SurvivalEstimate::from_hits(host, reps, horizon, Criterion::HostSurvival),
                infection: SurvivalEstimate::from_hits(inf, reps, horizon, Criterion::InfectionPersistence),
            }
        })
        .collect())
}

/// `lambda1,lambda2,delta,host_prop,infect_prop,ci_low,ci_high` rows; the
/// interval is that of `infect_prop`.
pub fn scan_csv(cells: &[ScanCell], header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("lambda1,lambda2,delta,host_prop,infect_prop,ci_low,ci_high\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.lambda1,
            c.lambda2,
            c.delta,
            c.host.proportion_alive,
            c.infection.proportion_alive,
            c.infection.ci_low,
            c.infection.ci_high
        );
    }
    out
}
