//! Block constructions: space-time boxes and site labels used to compare the
//! process with oriented site percolation, the closed-form event
//! probabilities of the survival gadget with Monte Carlo checks, and wet
//! sets of oriented site percolation under two edge rules.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{invalid, Error, Result};
use crate::events::{EventGenerator, EventKind, Trajectory};
use crate::lattice::{BoxPartition, ParamSet, State};
use crate::par::{map_replicates, Exec};
use crate::rng::rng_from_seed;

/// Regions `A = [-T, T]^d × [T, 2T]` and `B = [-2T, 2T]^d × [0, 2T]` and their
/// boundaries, translated to site `(z, n)` by `(2Tz, nT)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockGeometryExtinction {
    pub scale: f64,
    pub dim: usize,
}

pub fn extinction_blocks(scale: f64, dim: usize) -> Result<BlockGeometryExtinction> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("T", "block scale must be positive"));
    }
    if dim == 0 {
        return Err(invalid("dim", "dimension must be at least 1"));
    }
    Ok(BlockGeometryExtinction { scale, dim })
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

impl BlockGeometryExtinction {
    pub fn in_a(&self, x: &[f64], t: f64) -> bool {
        let s = self.scale;
        sup(x) <= s && (s..=2.0 * s).contains(&t)
    }

    pub fn in_b(&self, x: &[f64], t: f64) -> bool {
        let s = self.scale;
        sup(x) <= 2.0 * s && (0.0..=2.0 * s).contains(&t)
    }

    /// Bottom boundary `∂B1`.
    pub fn on_bottom(&self, x: &[f64], t: f64) -> bool {
        self.in_b(x, t) && t == 0.0
    }

    /// Peripheral boundary `∂B2`.
    pub fn on_periphery(&self, x: &[f64], t: f64) -> bool {
        self.in_b(x, t) && sup(x) == 2.0 * self.scale
    }

    /// Lower boundary `∂A`.
    pub fn on_a_boundary(&self, x: &[f64], t: f64) -> bool {
        self.in_a(x, t) && (t == self.scale || sup(x) == self.scale)
    }

    fn shift(&self, z: &[i64], n: u64, x: &[f64], t: f64) -> (Vec<f64>, f64) {
        let s = self.scale;
        let local = x.iter().zip(z).map(|(&xi, &zi)| xi - 2.0 * s * zi as f64).collect();
        (local, t - n as f64 * s)
    }

    pub fn in_a_at(&self, z: &[i64], n: u64, x: &[f64], t: f64) -> bool {
        let (lx, lt) = self.shift(z, n, x, t);
        self.in_a(&lx, lt)
    }

    pub fn in_b_at(&self, z: &[i64], n: u64, x: &[f64], t: f64) -> bool {
        let (lx, lt) = self.shift(z, n, x, t);
        self.in_b(&lx, lt)
    }

    /// `B(z, n) ∩ B(z', n') = ∅` iff `|z - z'| ∨ |n - n'| >= 3`.
    pub fn blocks_disjoint(&self, z: &[i64], n: u64, z2: &[i64], n2: u64) -> bool {
        let dz = z.iter().zip(z2).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
        dz.max(n.abs_diff(n2)) >= 3
    }
}

/// Label of a block site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockLabel {
    Infected,
    Healthy,
}

/// Extinction-rule labels: `(z, n)` is infected iff some space-time point of
/// `A(z, n)` is in state 2. `scale` must be a positive integer (it is also
/// the spatial half-width of `A`); `z` ranges over `0..ceil(M / 2T)` per
/// axis and `n` over `0..=n_max`.
pub fn label_extinction_sites(
    traj: &Trajectory,
    scale: u64,
    n_max: u64,
) -> Result<BTreeMap<(Vec<i64>, u64), BlockLabel>> {
    if scale == 0 {
        return Err(invalid("T", "block scale must be a positive integer"));
    }
    let s = scale as f64;
    let needed = (n_max as f64 + 2.0) * s;
    if needed > traj.horizon() {
        return Err(Error::HorizonTooShort {
            available: traj.horizon(),
            needed,
        });
    }
    let g = traj.geometry();
    let hist = traj.vertex_histories();
    let per_axis = g.side.div_ceil(2 * scale as usize);
    let boxes = per_axis.pow(g.dim as u32);
    let width = 2 * scale as usize + 1;
    let cells = width.pow(g.dim as u32);
    let mut out = BTreeMap::new();
    let mut z = vec![0i64; g.dim];
    let mut coords = vec![0i64; g.dim];
    for b in 0..boxes {
        let mut rest = b;
        for slot in z.iter_mut().rev() {
            *slot = (rest % per_axis) as i64;
            rest /= per_axis;
        }
        for n in 0..=n_max {
            let (from, to) = ((n + 1) as f64 * s, (n + 2) as f64 * s);
            let mut infected = false;
            for k in 0..cells {
                let mut rest = k;
                for i in (0..g.dim).rev() {
                    coords[i] = 2 * scale as i64 * z[i] - scale as i64 + (rest % width) as i64;
                    rest /= width;
                }
                if hist.visits(g.index(&coords), State::Infected, from, to) {
                    infected = true;
                    break;
                }
            }
            let label = if infected { BlockLabel::Infected } else { BlockLabel::Healthy };
            out.insert((z.clone(), n), label);
        }
    }
    Ok(out)
}

/// Survival-rule labels: `(z, n)` is infected iff vertices `2z` and `2z + 1`
/// (on the first axis) are both in state 2 at time `4nT`.
pub fn survival_site_labels(traj: &Trajectory, scale: f64, n_max: u64) -> Result<BTreeMap<(i64, u64), bool>> {
    if !(scale > 0.0) {
        return Err(invalid("T", "block time must be positive"));
    }
    let needed = 4.0 * n_max as f64 * scale;
    if needed > traj.horizon() {
        return Err(Error::HorizonTooShort {
            available: traj.horizon(),
            needed,
        });
    }
    let g = traj.geometry();
    let hist = traj.vertex_histories();
    let mut out = BTreeMap::new();
    for z in 0..(g.side / 2) as i64 {
        let (a, b) = (g.axis_vertex(2 * z), g.axis_vertex(2 * z + 1));
        for n in 0..=n_max {
            let t = 4.0 * n as f64 * scale;
            let inf = hist.state_at(a, t) == State::Infected && hist.state_at(b, t) == State::Infected;
            out.insert((z, n), inf);
        }
    }
    Ok(out)
}

/// Constants of the long-range block construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockConstants {
    /// `λ2 (1 - 1/λ1) - δ`.
    pub b: f64,
    /// `1 + δ`.
    pub b0: f64,
    /// `8 (2 B0 + 1) / b`.
    pub c: f64,
    pub t: f64,
    /// `(1 + c) T + 2 √T / ε0`.
    pub t1: f64,
    pub epsilon0: f64,
}

pub fn block_constants(params: &ParamSet, t: f64, epsilon0: f64) -> Result<BlockConstants> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("T", "block time must be positive"));
    }
    if !(epsilon0 > 0.0 && epsilon0.is_finite()) {
        return Err(invalid("epsilon0", "box scale must be positive"));
    }
    let b = params.lambda2() * (1.0 - 1.0 / params.lambda1()) - params.delta();
    if !(b > 0.0) {
        return Err(Error::NoCoexistence(b));
    }
    let b0 = 1.0 + params.delta();
    let c = 8.0 * (2.0 * b0 + 1.0) / b;
    Ok(BlockConstants {
        b,
        b0,
        c,
        t,
        t1: (1.0 + c) * t + 2.0 * t.sqrt() / epsilon0,
        epsilon0,
    })
}

/// Count thresholds of a long-range block site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongRangeThresholds {
    /// `l u*`.
    pub occupied: f64,
    /// `2 l exp(-T)`.
    pub infected: f64,
}

impl LongRangeThresholds {
    pub fn new(half: usize, host_equilibrium: f64, t: f64) -> Self {
        LongRangeThresholds {
            occupied: half as f64 * host_equilibrium,
            infected: 2.0 * half as f64 * (-t).exp(),
        }
    }

    /// Smallest integer counts meeting the thresholds.
    pub fn min_counts(&self) -> (usize, usize) {
        (self.occupied.max(0.0).ceil() as usize, self.infected.max(0.0).ceil() as usize)
    }
}

/// Long-range labels (d = 1): `(z, n)` is infected iff at some time of
/// `[2n T1, (2n+1) T1]` the box `B̂_0 + z·round(√T·L)` holds at least `l u*`
/// hosts and at least `2 l exp(-T)` infected hosts.
pub fn longrange_site_labels(
    traj: &Trajectory,
    consts: &BlockConstants,
    part: &BoxPartition,
    n_max: u64,
) -> Result<BTreeMap<(i64, u64), bool>> {
    let params = traj.params();
    if params.dim() != 1 {
        return Err(invalid("dim", "long-range labels are defined in one dimension"));
    }
    if !(consts.b > 0.0) {
        return Err(Error::NoCoexistence(consts.b));
    }
    let needed = (2 * n_max + 1) as f64 * consts.t1;
    if needed > traj.horizon() {
        return Err(Error::HorizonTooShort {
            available: traj.horizon(),
            needed,
        });
    }
    let m = params.side();
    let l = part.half();
    let shift = ((consts.t.sqrt() * params.range() as f64).round() as usize).max(1);
    let sites = m.div_ceil(shift);
    let (need_occ, need_inf) = LongRangeThresholds::new(l, params.host_equilibrium(), consts.t).min_counts();
    // membership: vertex -> sites whose box contains it
    let mut member: Vec<Vec<usize>> = vec![Vec::new(); m];
    for z in 0..sites {
        for k in 0..2 * l {
            let v = ((z * shift + m * (l / m + 1) + 1 + k - l) % m) as usize;
            member[v].push(z);
        }
    }
    let mut out = BTreeMap::new();
    let changes = traj.changes();
    for n in 0..=n_max {
        let (from, to) = ((2 * n) as f64 * consts.t1, (2 * n + 1) as f64 * consts.t1);
        let cfg = traj.state_at(from);
        let mut occ = vec![0usize; sites];
        let mut inf = vec![0usize; sites];
        for (v, zs) in member.iter().enumerate() {
            let s = cfg.get(v);
            for &z in zs {
                occ[z] += s.is_occupied() as usize;
                inf[z] += (s == State::Infected) as usize;
            }
        }
        let mut hit: Vec<bool> = (0..sites).map(|z| occ[z] >= need_occ && inf[z] >= need_inf).collect();
        let start = changes.partition_point(|c| c.time <= from);
        for c in changes[start..].iter().take_while(|c| c.time <= to) {
            for &z in &member[c.vertex] {
                occ[z] = occ[z] + c.new.is_occupied() as usize - c.old.is_occupied() as usize;
                inf[z] = inf[z] + (c.new == State::Infected) as usize - (c.old == State::Infected) as usize;
                if occ[z] >= need_occ && inf[z] >= need_inf {
                    hit[z] = true;
                }
            }
        }
        for (z, h) in hit.into_iter().enumerate() {
            out.insert((z as i64, n), h);
        }
    }
    Ok(out)
}

/// `T(ε) = -ln(1 - ε/4) / 12` and `λ1*(ε) = -ln(ε/4) / T(ε)`.
pub fn survival_gadget_params(epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    let t = -(-epsilon / 4.0).ln_1p() / 12.0;
    let lambda1_star = -(epsilon / 4.0).ln() / t;
    Ok((t, lambda1_star))
}

/// Closed-form pieces of the gadget events on three vertices `x-1, x, x+1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GadgetProbs {
    /// No death marks on the three vertices by `4T`: `exp(-12T)`.
    pub a1: f64,
    /// A birth arrow `x → x+1` by `2T`: `1 - exp(-λ1 T)`.
    pub a2: f64,
    /// An infection arrow beats a recovery mark: `λ2 / (λ2 + 2δ)`.
    pub p_single: f64,
    /// `p_single^(3n)`.
    pub a3_bound: f64,
    /// `P(Poisson(3δT) <= n)`, reported separately.
    pub a3_poisson: f64,
    /// `(1 - exp(-λ2 T))^2`.
    pub a4_time: f64,
    /// `p_single^2`.
    pub a4_race: f64,
    /// `min(a4_time, a4_race)`.
    pub a4_bound: f64,
}

pub fn gadget_event_probs(t: f64, lambda1: f64, lambda2: f64, delta: f64, n: u32) -> Result<GadgetProbs> {
    for (name, v) in [("T", t), ("lambda1", lambda1), ("lambda2", lambda2), ("delta", delta)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(name, "must be finite and non-negative"));
        }
    }
    let p_single = if lambda2 + 2.0 * delta > 0.0 {
        lambda2 / (lambda2 + 2.0 * delta)
    } else {
        0.0
    };
    let mean = 3.0 * delta * t;
    let a3_poisson = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| invalid("delta", e.to_string()))?
            .cdf(n as u64)
    } else {
        1.0
    };
    let a4_time = (-(-lambda2 * t).exp_m1()).powi(2);
    let a4_race = p_single * p_single;
    Ok(GadgetProbs {
        a1: (-12.0 * t).exp(),
        a2: -(-lambda1 * t).exp_m1(),
        p_single,
        a3_bound: p_single.powi(3 * n as i32),
        a3_poisson,
        a4_time,
        a4_race,
        a4_bound: a4_time.min(a4_race),
    })
}

/// Sample mean and standard error of an indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

impl Estimate {
    pub fn from_hits(hits: usize, reps: usize) -> Self {
        let mean = hits as f64 / reps as f64;
        Estimate {
            mean,
            stderr: (mean * (1.0 - mean) / reps as f64).sqrt(),
            reps,
        }
    }

    /// `|mean - target| <= k * stderr` (exact equality required when the
    /// standard error is zero).
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Empirical frequencies of the gadget events.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GadgetEstimates {
    pub a1: Estimate,
    pub a2: Estimate,
    /// First race `X1 < Z1` alone.
    pub single: Estimate,
    /// A3, measured given the realized recovery times.
    pub a3: Estimate,
    pub a4_time: Estimate,
    pub a4_race: Estimate,
    /// The A4 event itself: after `max(2T, T_N)` and by `4T`, an arrow
    /// `x-1 ⇢ x` followed by `x ⇢ x+1`.
    pub a4: Estimate,
}

#[derive(Default, Clone, Copy)]
struct GadgetHits {
    a1: bool,
    a2: bool,
    single: bool,
    a3: bool,
    a4_time: bool,
    a4_race: bool,
    a4: bool,
}

const LEFT: usize = 0;
const MID: usize = 1;
const RIGHT: usize = 2;

/// One replicate on the three-vertex cycle (`x-1 = 0`, `x = 1`, `x+1 = 2`,
/// neighborhood size 2, so each directed arrow has rate `λ / 2`).
fn gadget_replicate(params: &ParamSet, t: f64, seed: u64) -> GadgetHits {
    let mut h = GadgetHits {
        a1: true,
        ..Default::default()
    };
    let lambda2 = params.lambda2();
    let mut recoveries = Vec::new();
    let mut infections: Vec<(f64, usize, usize)> = Vec::new();
    // races: X1 vs Z1 from 2T, then X2 vs Z2 from the winning arrow
    let mut x1: Option<f64> = None;
    let mut z1: Option<f64> = None;
    let mut x2: Option<f64> = None;
    let mut z2: Option<f64> = None;
    let decided = |x1: Option<f64>, x2: Option<f64>| lambda2 == 0.0 || (x1.is_some() && x2.is_some());
    for ev in EventGenerator::new(params, f64::MAX, seed) {
        let now = ev.time;
        if now > 4.0 * t && decided(x1, x2) {
            break;
        }
        match ev.kind {
            EventKind::Death(_) if now <= 4.0 * t => h.a1 = false,
            EventKind::Recovery(v) => {
                if now <= 4.0 * t {
                    recoveries.push(now);
                }
                if now > 2.0 * t && v == MID && z1.is_none() && x1.is_none() {
                    z1 = Some(now);
                }
                if let Some(x) = x1 {
                    if v == RIGHT && now > x && z2.is_none() && x2.is_none() {
                        z2 = Some(now);
                    }
                }
            }
            EventKind::Birth { from: MID, to: RIGHT } if now <= 2.0 * t => h.a2 = true,
            EventKind::Infection { from, to } => {
                if now <= 4.0 * t {
                    infections.push((now, from, to));
                }
                if now > 2.0 * t && (from, to) == (LEFT, MID) && x1.is_none() {
                    x1 = Some(now);
                } else if let Some(x) = x1 {
                    if (from, to) == (MID, RIGHT) && now > x && x2.is_none() {
                        x2 = Some(now);
                    }
                }
            }
            _ => {}
        }
    }
    let two_t = 2.0 * t;
    if let Some(x) = x1 {
        h.single = z1.is_none_or(|z| x < z);
        if let Some(y) = x2 {
            h.a4_time = x - two_t < two_t && y - x < two_t;
            h.a4_race = h.single && z2.is_none_or(|z| y < z);
        }
    }
    // A3: between consecutive recovery marks, all three arrows
    h.a3 = recoveries.windows(2).all(|w| {
        let has = |a: usize, b: usize| {
            infections
                .iter()
                .any(|&(s, f, to)| s > w[0] && s < w[1] && f == a && to == b)
        };
        has(LEFT, MID) && has(MID, LEFT) && has(MID, RIGHT)
    });
    // A4: arrow x-1 ⇢ x then x ⇢ x+1 inside (max(2T, T_N), 4T]
    let start = recoveries.last().copied().unwrap_or(0.0).max(two_t);
    let first = infections
        .iter()
        .find(|&&(s, f, to)| s > start && (f, to) == (LEFT, MID))
        .map(|e| e.0);
    h.a4 = first.is_some_and(|s0| {
        infections
            .iter()
            .any(|&(s, f, to)| s > s0 && (f, to) == (MID, RIGHT))
    });
    h
}

/// Monte Carlo frequencies of the gadget events over `reps` independent
/// three-vertex streams.
pub fn estimate_gadget_probs_mc(
    t: f64,
    lambda1: f64,
    lambda2: f64,
    delta: f64,
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<GadgetEstimates> {
    if reps == 0 {
        return Err(invalid("reps", "need at least one replicate"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("T", "must be positive"));
    }
    let params = ParamSet::one_dim(lambda1, lambda2, delta, 3)?;
    let hits = map_replicates(exec, reps, seed, |_, s| gadget_replicate(&params, t, s));
    let count = |f: fn(&GadgetHits) -> bool| Estimate::from_hits(hits.iter().filter(|h| f(h)).count(), reps);
    Ok(GadgetEstimates {
        a1: count(|h| h.a1),
        a2: count(|h| h.a2),
        single: count(|h| h.single),
        a3: count(|h| h.a3),
        a4_time: count(|h| h.a4_time),
        a4_race: count(|h| h.a4_race),
        a4: count(|h| h.a4),
    })
}

/// `quantity,analytic,estimate,stderr,reps` rows. Quantities without a
/// closed form (A3 and the A4 event are only bounded) carry their bound.
pub fn gadget_report_csv(probs: &GadgetProbs, est: &GadgetEstimates, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("quantity,analytic,estimate,stderr,reps\n");
    let rows = [
        ("A1", probs.a1, est.a1),
        ("A2", probs.a2, est.a2),
        ("single_race", probs.p_single, est.single),
        ("A3_bound", probs.a3_bound * probs.a3_poisson, est.a3),
        ("A4_time", probs.a4_time, est.a4_time),
        ("A4_race", probs.a4_race, est.a4_race),
        ("A4_bound", probs.a4_bound, est.a4),
    ];
    for (name, a, e) in rows {
        let _ = writeln!(out, "{name},{a},{},{},{}", e.mean, e.stderr, e.reps);
    }
    out
}

/// Edge rule of the oriented percolation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRule {
    /// `(z, n) → (z', n + 1)` with `|z - z'| = 1`.
    Survival,
    /// `(z, n) → (z', n')` with `n <= n'` and `|z - z'| ∨ |n - n'| >= 3`.
    Extinction,
}

/// Finite window `z ∈ [0, width)`, `n ∈ [0, levels)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Extent {
    pub width: usize,
    pub levels: usize,
}

/// Open sites and the wet set they produce.
#[derive(Clone, Debug, PartialEq)]
pub struct PercolationField {
    pub extent: Extent,
    pub p: f64,
    pub rule: EdgeRule,
    uniforms: Vec<f64>,
    wet: Vec<bool>,
}

impl PercolationField {
    fn idx(&self, z: usize, n: usize) -> usize {
        n * self.extent.width + z
    }

    pub fn is_open(&self, z: usize, n: usize) -> bool {
        self.uniforms[self.idx(z, n)] < self.p
    }

    pub fn is_wet(&self, z: usize, n: usize) -> bool {
        self.wet[self.idx(z, n)]
    }

    /// Some wet site at level `n`.
    pub fn reaches_level(&self, n: usize) -> bool {
        n < self.extent.levels && (0..self.extent.width).any(|z| self.is_wet(z, n))
    }

    pub fn wet_count(&self) -> usize {
        self.wet.iter().filter(|&&w| w).count()
    }

    pub fn wet_sites(&self) -> Vec<(usize, usize)> {
        let w = self.extent.width;
        self.wet
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % w, i / w))
            .collect()
    }

    /// Same uniforms, different `p`: `open(p1) ⊆ open(p2)` when `p1 <= p2`.
    pub fn with_p(&self, p: f64) -> PercolationField {
        let mut f = PercolationField {
            p,
            wet: Vec::new(),
            ..self.clone()
        };
        f.compute_wet();
        f
    }

    fn compute_wet(&mut self) {
        let Extent { width, levels } = self.extent;
        let mut wet = vec![false; width * levels];
        if width == 0 || levels == 0 {
            self.wet = wet;
            return;
        }
        let open = |z: usize, n: usize| self.uniforms[n * width + z] < self.p;
        for z in 0..width {
            wet[z] = open(z, 0);
        }
        match self.rule {
            EdgeRule::Survival => {
                for n in 1..levels {
                    for z in 0..width {
                        let below = &wet[(n - 1) * width..n * width];
                        let from_left = z > 0 && below[z - 1];
                        let from_right = z + 1 < width && below[z + 1];
                        wet[n * width + z] = open(z, n) && (from_left || from_right);
                    }
                }
            }
            EdgeRule::Extinction => {
                // fixpoint: an open site is wet iff some wet site with
                // n <= n' lies outside its 5 x 3 exclusion window
                loop {
                    let mut changed = false;
                    let mut prefix = vec![0usize; levels + 1];
                    for n in 0..levels {
                        prefix[n + 1] = prefix[n] + wet[n * width..(n + 1) * width].iter().filter(|&&b| b).count();
                    }
                    for n in 0..levels {
                        for z in 0..width {
                            let i = n * width + z;
                            if wet[i] || !open(z, n) {
                                continue;
                            }
                            let total = prefix[n + 1];
                            let mut near = 0;
                            for m in n.saturating_sub(2)..=n {
                                for y in z.saturating_sub(2)..(z + 3).min(width) {
                                    near += wet[m * width + y] as usize;
                                }
                            }
                            if total > near {
                                wet[i] = true;
                                changed = true;
                            }
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
        }
        self.wet = wet;
    }
}

/// Open each site independently with probability `p` (site `(z, n)` is
/// open iff its uniform, drawn level by level, is below `p`) and compute the
/// sites reached from level 0 through open sites.
pub fn oriented_percolation_wet(p: f64, rule: EdgeRule, extent: Extent, seed: u64) -> Result<PercolationField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    let mut rng = rng_from_seed(seed);
    let uniforms = (0..extent.width * extent.levels).map(|_| rng.random::<f64>()).collect();
    let mut f = PercolationField {
        extent,
        p,
        rule,
        uniforms,
        wet: Vec::new(),
    };
    f.compute_wet();
    Ok(f)
}

/// Fraction of infected labels (diagnostic for comparing block labels with
/// percolation densities).
pub fn label_density<K>(labels: &BTreeMap<K, bool>) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.values().filter(|&&b| b).count() as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::simulate;
    use crate::lattice::Configuration;

    #[test]
    fn ubd_constants() {
        let p = ParamSet::one_dim(4.0, 8.0, 2.0, 10).unwrap();
        let c = block_constants(&p, 1.0, 0.1).unwrap();
        assert_eq!((c.b, c.b0, c.c), (4.0, 3.0, 14.0));
        assert!((c.t1 - 35.0).abs() < 1e-12);
        let q = ParamSet::one_dim(4.0, 2.0, 2.0, 10).unwrap();
        assert!(matches!(block_constants(&q, 1.0, 0.1), Err(Error::NoCoexistence(b)) if b == -0.5));
    }

    #[test]
    fn gadget_params_values() {
        let (t, l) = survival_gadget_params(0.4).unwrap();
        assert!((t - 8.780_042_971_485_5e-3).abs() < 1e-12, "{t}");
        assert!((l - 262.25).abs() < 0.05, "{l}");
        assert!(survival_gadget_params(0.0).is_err());
        assert!(survival_gadget_params(1.0).is_err());
        let ts: Vec<f64> = [0.5, 0.1, 0.01, 0.001].iter().map(|&e| survival_gadget_params(e).unwrap().0).collect();
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn gadget_closed_forms() {
        let g = gadget_event_probs(0.05, 50.0, 10.0, 1.0, 2).unwrap();
        assert!((g.a1 - 0.548_811_636_094_026_4).abs() < 1e-15);
        assert!((g.p_single - 10.0 / 12.0).abs() < 1e-15);
        let g = gadget_event_probs(0.05, 50.0, 10.0, 0.0, 2).unwrap();
        assert_eq!(g.p_single, 1.0);
        assert_eq!(g.a4_bound, g.a4_time);
        assert_eq!(g.a3_poisson, 1.0);
    }

    #[test]
    fn thresholds_example() {
        let th = LongRangeThresholds::new(10, 0.75, 1.0);
        assert_eq!(th.occupied, 7.5);
        assert!((th.infected - 7.357_588_823_428_847).abs() < 1e-12);
        assert_eq!(th.min_counts(), (8, 8));
    }

    #[test]
    fn block_predicates() {
        let b = extinction_blocks(1.0, 1).unwrap();
        assert!(b.in_a(&[1.0], 1.5) && !b.in_a(&[1.5], 1.5) && !b.in_a(&[0.0], 0.5));
        assert!(b.in_b(&[-2.0], 0.0) && b.on_bottom(&[0.3], 0.0) && b.on_periphery(&[2.0], 1.0));
        assert!(b.on_a_boundary(&[0.0], 1.0) && b.on_a_boundary(&[-1.0], 1.7) && !b.on_a_boundary(&[0.5], 1.7));
        assert!(b.blocks_disjoint(&[0], 0, &[3], 0));
        assert!(!b.blocks_disjoint(&[0], 0, &[1], 1));
        assert!(b.in_a_at(&[2], 3, &[4.5], 4.5));
    }

    #[test]
    fn disjointness_rule_matches_interval_overlap() {
        let b = extinction_blocks(2.0, 2).unwrap();
        let s = b.scale;
        for dz0 in -4i64..=4 {
            for dz1 in -4i64..=4 {
                for n2 in 0u64..6 {
                    let overlap_axis = |dz: i64| (2.0 * s * dz as f64).abs() <= 4.0 * s;
                    let overlap_time = (n2 as f64 * s - 0.0).abs() <= 2.0 * s;
                    let overlap = overlap_axis(dz0) && overlap_axis(dz1) && overlap_time;
                    assert_eq!(b.blocks_disjoint(&[0, 0], 0, &[dz0, dz1], n2), !overlap);
                }
            }
        }
    }

    #[test]
    fn survival_labels_at_time_zero() {
        let p = ParamSet::one_dim(2.0, 2.0, 1.0, 20).unwrap();
        let traj = simulate(&p, Configuration::uniform(p.geometry(), State::Infected), 2.0, 1).unwrap();
        let labels = survival_site_labels(&traj, 0.1, 0).unwrap();
        assert_eq!(labels.len(), 10);
        assert!(labels.values().all(|&b| b));
        assert!(survival_site_labels(&traj, 1.0, 1).is_err());
        let traj = simulate(&p, Configuration::uniform(p.geometry(), State::Healthy), 2.0, 1).unwrap();
        assert!(survival_site_labels(&traj, 0.1, 4).unwrap().values().all(|&b| !b));
    }

    #[test]
    fn percolation_extremes() {
        let e = Extent { width: 30, levels: 20 };
        for rule in [EdgeRule::Survival, EdgeRule::Extinction] {
            assert_eq!(oriented_percolation_wet(0.0, rule, e, 1).unwrap().wet_count(), 0);
        }
        assert_eq!(oriented_percolation_wet(1.0, EdgeRule::Survival, e, 1).unwrap().wet_count(), 600);
        assert!(oriented_percolation_wet(1.5, EdgeRule::Survival, e, 1).is_err());
    }

    #[test]
    fn extinction_rule_reaches_far_sites_on_one_level() {
        // only (0,0) and (5,0) open: (5,0) is wet through the same-level edge
        let e = Extent { width: 6, levels: 1 };
        let mut f = oriented_percolation_wet(0.5, EdgeRule::Extinction, e, 3).unwrap();
        f.uniforms = vec![0.1, 0.9, 0.9, 0.9, 0.9, 0.1];
        f.compute_wet();
        assert_eq!(f.wet_sites(), vec![(0, 0), (5, 0)]);
    }
}
