//! Couplings of several processes through one stream, event-by-event order
//! verification, influence graphs and invasion paths.
//!
//! Rate couplings never superpose extra Poisson processes. They generate the
//! stream at the largest rate and let a lower-rate process keep an arrow
//! only when its thinning label falls below the rate ratio.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::eventlog;
use crate::events::{
    contact_replay, generate_stream, replay_between, Change, Effect, Event, EventKind, EventStream,
    Process, Trajectory,
};
use crate::lattice::{state_precedes, BoxPartition, Configuration, ParamSet, State, Vertex};
use crate::rng::{child_seed, rng_from_seed};

/// First place where a coupled pair broke its ordering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub vertex: Vertex,
    pub first: State,
    pub second: State,
    /// Index of the event after which the violation was observed.
    pub event: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderingReport {
    pub holds: bool,
    pub first_violation: Option<Violation>,
    pub checked_events: usize,
}

/// Replay two processes from one stream and check `relation(first, second)`
/// at every vertex initially and at every changed vertex after every event.
/// Since an event changes at most one vertex per process, this is the full
/// check after every event.
pub fn replay_pair<F1, F2, R>(
    stream: &EventStream,
    init1: Configuration,
    init2: Configuration,
    first: F1,
    second: F2,
    relation: R,
) -> Result<(Trajectory, Trajectory, OrderingReport)>
where
    F1: Fn(&Event) -> Effect,
    F2: Fn(&Event) -> Effect,
    R: Fn(State, State) -> bool,
{
    let geometry = stream.params().geometry();
    if init1.geometry() != geometry || init2.geometry() != geometry {
        return Err(Error::GeometryMismatch(
            "coupled configurations must live on the stream's torus".into(),
        ));
    }
    let mut t1 = Trajectory::new(stream.params(), init1.clone(), stream.horizon());
    let mut t2 = Trajectory::new(stream.params(), init2.clone(), stream.horizon());
    let mut violation = (0..init1.len())
        .find(|&x| !relation(init1.get(x), init2.get(x)))
        .map(|x| Violation {
            time: 0.0,
            vertex: x,
            first: init1.get(x),
            second: init2.get(x),
            event: None,
        });
    let mut p1 = Process::new(init1);
    let mut p2 = Process::new(init2);
    for (i, ev) in stream.events().iter().enumerate() {
        let c1 = p1.apply(first(ev));
        let c2 = p2.apply(second(ev));
        for (vertex, old, new) in c1.into_iter() {
            t1.record(Change { time: ev.time, vertex, old, new, event: i });
        }
        for (vertex, old, new) in c2.into_iter() {
            t2.record(Change { time: ev.time, vertex, old, new, event: i });
        }
        if violation.is_none() {
            for x in c1.map(|c| c.0).into_iter().chain(c2.map(|c| c.0)) {
                let (a, b) = (p1.get(x), p2.get(x));
                if !relation(a, b) {
                    violation = Some(Violation {
                        time: ev.time,
                        vertex: x,
                        first: a,
                        second: b,
                        event: Some(i),
                    });
                    break;
                }
            }
        }
    }
    let report = OrderingReport {
        holds: violation.is_none(),
        first_violation: violation,
        checked_events: stream.len(),
    };
    Ok((t1, t2, report))
}

fn require_ordered(a: &Configuration, b: &Configuration, what: &str) -> Result<()> {
    if a.geometry() != b.geometry() {
        return Err(Error::GeometryMismatch(format!("{what}: configurations differ in shape")));
    }
    match a.first_order_violation(b) {
        None => Ok(()),
        Some(x) => Err(Error::NotOrdered(format!(
            "{what}: vertex {x} has states {} and {}",
            a.get(x),
            b.get(x)
        ))),
    }
}

fn same_occupancy(a: &Configuration, b: &Configuration) -> bool {
    a.states()
        .iter()
        .zip(b.states())
        .all(|(x, y)| x.is_occupied() == y.is_occupied())
}

fn ratio(low: f64, high: f64) -> f64 {
    if high > 0.0 {
        low / high
    } else {
        1.0
    }
}

/// Two copies of the stacked process on one stream. Checks `⪯` after every
/// event, plus equality of the occupied sets when they agree initially.
pub fn couple_shared(
    stream: &EventStream,
    init1: Configuration,
    init2: Configuration,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    require_ordered(&init1, &init2, "couple_shared")?;
    let equal_hosts = same_occupancy(&init1, &init2);
    replay_pair(stream, init1, init2, Effect::stacked, Effect::stacked, |a, b| {
        state_precedes(a, b) && (!equal_hosts || a.is_occupied() == b.is_occupied())
    })
}

/// Processes with infection rates `lambda2_low < params.lambda2()`, the low
/// one keeping an infection arrow iff its label is below the rate ratio.
pub fn couple_infection_rates(
    params: &ParamSet,
    lambda2_low: f64,
    init1: Configuration,
    init2: Configuration,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    if !(lambda2_low >= 0.0 && lambda2_low <= params.lambda2()) {
        return Err(invalid(
            "lambda2_low",
            format!("must lie in [0, {}], got {lambda2_low}", params.lambda2()),
        ));
    }
    require_ordered(&init1, &init2, "couple_infection_rates")?;
    let stream = generate_stream(params, horizon, seed)?;
    let keep = ratio(lambda2_low, params.lambda2());
    let low = move |ev: &Event| match ev.kind {
        EventKind::Infection { .. } if ev.label >= keep => Effect::Nothing,
        _ => Effect::stacked(ev),
    };
    replay_pair(&stream, init1, init2, low, Effect::stacked, state_precedes)
}

/// Table of arrow types for the equal-rates comparison. Birth arrows act as
/// birth+infection for both processes; infection arrows with label below
/// `lambda1/lambda2` are dropped; the remaining infection arrows infect in
/// the first process and act as birth+infection in the second.
pub fn equal_rates_effects(lambda1: f64, lambda2: f64) -> (impl Fn(&Event) -> Effect, impl Fn(&Event) -> Effect) {
    let cut = ratio(lambda1, lambda2);
    let first = move |ev: &Event| match ev.kind {
        EventKind::Birth { from, to } => Effect::BirthOrInfect(from, to),
        EventKind::Infection { from, to } => {
            if ev.label < cut {
                Effect::Nothing
            } else {
                Effect::Infect(from, to)
            }
        }
        _ => Effect::stacked(ev),
    };
    let second = move |ev: &Event| match ev.kind {
        EventKind::Birth { from, to } => Effect::BirthOrInfect(from, to),
        EventKind::Infection { from, to } => {
            if ev.label < cut {
                Effect::Nothing
            } else {
                Effect::BirthOrInfect(from, to)
            }
        }
        _ => Effect::stacked(ev),
    };
    (first, second)
}

/// `ξ¹` with birth `lambda1` and infection `lambda2`, against `ξ²` with
/// birth = infection = `lambda2`; checks `ξ¹(x) <= ξ²(x)` pointwise.
pub fn couple_equal_rates(
    params: &ParamSet,
    init: Configuration,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    let stream = generate_stream(params, horizon, seed)?;
    couple_equal_rates_on(&stream, init)
}

pub fn couple_equal_rates_on(
    stream: &EventStream,
    init: Configuration,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    let p = stream.params();
    if p.lambda1() > p.lambda2() {
        return Err(invalid(
            "lambda1",
            format!("equal-rates coupling needs lambda1 <= lambda2, got {} > {}", p.lambda1(), p.lambda2()),
        ));
    }
    let (first, second) = equal_rates_effects(p.lambda1(), p.lambda2());
    replay_pair(stream, init.clone(), init, first, second, |a, b| a <= b)
}

/// Infected set of the equal-rates process, replayed as a basic contact
/// process: births on every arrow the process uses, deaths on death and
/// recovery marks.
pub fn equal_rates_contact_replay(stream: &EventStream, init: &Configuration) -> Result<Trajectory> {
    let cut = ratio(stream.params().lambda1(), stream.params().lambda2());
    contact_replay(
        stream,
        init.indicator(true, State::Infected),
        |ev| match ev.kind {
            EventKind::Birth { .. } => true,
            EventKind::Infection { .. } => ev.label >= cut,
            _ => false,
        },
        |_| true,
    )
}

/// Stacked process `ξ` against a contact process `η` on `{0, 2}` with birth
/// `lambda0` and death `1 + delta`.
///
/// Birth arrows with label below `lambda0/lambda1` are type-0 arrows (birth
/// and infection for `ξ`, birth for `η`); the other birth arrows only breed
/// in `ξ`. Infection arrows with label below `lambda0/lambda2` are dropped
/// so the type-0 arrows make up the infection rate.
pub fn couple_contact_lower(
    lambda0: f64,
    params: &ParamSet,
    init_xi: Configuration,
    init_eta: Configuration,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    if !(lambda0 >= 0.0 && lambda0 < params.lambda1().min(params.lambda2())) {
        return Err(invalid(
            "lambda0",
            format!("must lie in [0, min(lambda1, lambda2)), got {lambda0}"),
        ));
    }
    if init_eta.count(State::Healthy) > 0 {
        return Err(invalid("init_eta", "contact process states must be 0 or 2"));
    }
    if init_eta.geometry() != init_xi.geometry() || !init_eta.pointwise_le(&init_xi) {
        return Err(Error::NotOrdered("couple_contact_lower: need eta(x) <= xi(x)".into()));
    }
    let stream = generate_stream(params, horizon, seed)?;
    let birth_cut = lambda0 / params.lambda1();
    let infect_cut = lambda0 / params.lambda2();
    let xi = move |ev: &Event| match ev.kind {
        EventKind::Birth { from, to } if ev.label < birth_cut => Effect::BirthOrInfect(from, to),
        EventKind::Infection { .. } if ev.label < infect_cut => Effect::Nothing,
        _ => Effect::stacked(ev),
    };
    let eta = move |ev: &Event| match ev.kind {
        EventKind::Death(x) | EventKind::Recovery(x) => Effect::Kill(x),
        EventKind::Birth { from, to } if ev.label < birth_cut => Effect::Birth(from, to),
        _ => Effect::Nothing,
    };
    let (traj_eta, traj_xi, report) = replay_pair(&stream, init_eta, init_xi, eta, xi, |a, b| a <= b)?;
    Ok((traj_xi, traj_eta, report))
}

/// Box version reading of the stream: arrows leaving the reduced
/// neighborhood cannot infect, and births there deliver healthy hosts.
pub fn box_effect<'a>(part: &'a BoxPartition) -> impl Fn(&Event) -> Effect + 'a {
    move |ev: &Event| match ev.kind {
        EventKind::Birth { from, to } if !part.in_reduced_neighborhood(from, to) => {
            Effect::HealthyBirth(from, to)
        }
        EventKind::Infection { from, to } if !part.in_reduced_neighborhood(from, to) => Effect::Nothing,
        _ => Effect::stacked(ev),
    }
}

/// `ξ` and its box version `ξ̂` from one stream and one initial
/// configuration; checks `ξ̂ ⪯ ξ` with equal occupied sets.
pub fn couple_box(
    params: &ParamSet,
    part: &BoxPartition,
    init: Configuration,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    let stream = generate_stream(params, horizon, seed)?;
    couple_box_on(&stream, part, init)
}

pub fn couple_box_on(
    stream: &EventStream,
    part: &BoxPartition,
    init: Configuration,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    let (hat, xi, report) = replay_pair(stream, init.clone(), init, box_effect(part), Effect::stacked, |a, b| {
        state_precedes(a, b) && a.is_occupied() == b.is_occupied()
    })?;
    Ok((xi, hat, report))
}

/// Naive birth-rate coupling: the stream is generated at the high birth rate
/// and the low-rate process keeps a birth arrow iff its label is below
/// `low/high`. Checks inclusion of the infected sets, low ⊆ high.
pub fn naive_birth_coupling(
    stream: &EventStream,
    init: Configuration,
    lambda1_low: f64,
) -> Result<(Trajectory, Trajectory, OrderingReport)> {
    let keep = ratio(lambda1_low, stream.params().lambda1());
    let low = move |ev: &Event| match ev.kind {
        EventKind::Birth { .. } if ev.label >= keep => Effect::Nothing,
        _ => Effect::stacked(ev),
    };
    replay_pair(stream, init.clone(), init, low, Effect::stacked, |a, b| {
        a != State::Infected || b == State::Infected
    })
}

/// Stream prefix and initial configuration exhibiting a violation.
#[derive(Clone, Debug)]
pub struct Witness {
    pub seed: Option<u64>,
    pub lambda1_low: f64,
    pub init: Configuration,
    pub stream: EventStream,
    pub violation: Violation,
}

impl Witness {
    /// The violating events in event-log format, with a header naming the
    /// violated property.
    pub fn to_log(&self) -> String {
        let p = self.stream.params();
        let end = self.violation.event.map_or(0, |i| i + 1);
        let header = vec![
            format!(
                "violated: infected-set inclusion at t={} vertex={} (low state {}, high state {})",
                eventlog::format_sig17(self.violation.time),
                self.violation.vertex,
                self.violation.first,
                self.violation.second
            ),
            format!(
                "lambda1_low={} lambda1_high={} lambda2={} delta={} range={} dim={} side={} seed={}",
                self.lambda1_low,
                p.lambda1(),
                p.lambda2(),
                p.delta(),
                p.range(),
                p.dim(),
                p.side(),
                self.seed.map_or("none".to_string(), |s| s.to_string())
            ),
            format!(
                "init={}",
                self.init.states().iter().map(|s| s.to_string()).collect::<String>()
            ),
        ];
        eventlog::format_log(&header, &self.stream.events()[..end], p.geometry())
    }
}

/// Search seeds for a realization where the naive coupling of birth rates
/// loses infected-set inclusion. `params.lambda1()` is ignored; the stream
/// uses `lambda1_high`. Replicate `k` uses `child_seed(base, seeds[k])`
/// both for its stream and for its product-measure initial configuration
/// (`init_density` = (healthy, infected) probabilities).
pub fn search_birth_coupling_violation(
    lambda1_low: f64,
    lambda1_high: f64,
    params: &ParamSet,
    init_density: (f64, f64),
    horizon: f64,
    seeds: &[u64],
) -> Result<Option<Witness>> {
    if !(lambda1_low >= 0.0 && lambda1_low <= lambda1_high) {
        return Err(invalid("lambda1_low", "must satisfy 0 <= lambda1_low <= lambda1_high"));
    }
    let high = params.with_lambda1(lambda1_high)?;
    for &seed in seeds {
        let stream = generate_stream(&high, horizon, seed)?;
        let mut rng = rng_from_seed(child_seed(seed, u64::MAX));
        let init = Configuration::random(high.geometry(), init_density.0, init_density.1, &mut rng);
        let (_, _, report) = naive_birth_coupling(&stream, init.clone(), lambda1_low)?;
        if let Some(v) = report.first_violation {
            return Ok(Some(Witness {
                seed: Some(seed),
                lambda1_low,
                init,
                stream,
                violation: v,
            }));
        }
    }
    Ok(None)
}

/// Point of space-time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimePoint {
    pub vertex: Vertex,
    pub time: f64,
}

/// `{vertex} × [from, to]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub vertex: Vertex,
    pub from: f64,
    pub to: f64,
}

/// Backward closure of `p`: all `(y, s)` joined to `p` by a path that moves
/// up along vertices without crossing death marks and jumps along birth or
/// infection arrows. Reported as vertical segments.
pub fn influence_graph(stream: &EventStream, p: SpaceTimePoint) -> Result<Vec<Segment>> {
    if p.time > stream.horizon() || p.time < 0.0 {
        return Err(invalid("point", "time outside the stream horizon"));
    }
    let mut active: HashMap<Vertex, f64> = HashMap::new();
    active.insert(p.vertex, p.time);
    let mut out = Vec::new();
    let end = stream.count_until(p.time);
    for ev in stream.events()[..end].iter().rev() {
        match ev.kind {
            EventKind::Death(y) => {
                if let Some(top) = active.remove(&y) {
                    out.push(Segment { vertex: y, from: ev.time, to: top });
                }
            }
            EventKind::Birth { from, to } | EventKind::Infection { from, to } => {
                if active.contains_key(&to) {
                    active.entry(from).or_insert(ev.time);
                }
            }
            EventKind::Recovery(_) => {}
        }
        if active.is_empty() {
            break;
        }
    }
    out.extend(active.into_iter().map(|(vertex, top)| Segment { vertex, from: 0.0, to: top }));
    out.sort_by(|a, b| a.vertex.cmp(&b.vertex).then(a.from.total_cmp(&b.from)));
    Ok(out)
}

/// Birth-arrow genealogy from time 0 to a point.
#[derive(Clone, Debug, PartialEq)]
pub struct InvasionPath {
    pub vertices: Vec<Vertex>,
    /// `t_0 < t_1 < ... < t_n`: `vertices[j]` is occupied on `[times[j], times[j+1])`.
    pub times: Vec<f64>,
}

impl InvasionPath {
    pub fn temporal_length(&self) -> f64 {
        self.times.last().unwrap_or(&0.0) - self.times.first().unwrap_or(&0.0)
    }
}

/// All invasion paths from time 0 to `p` in `traj` (replayed from `stream`
/// with the stacked rules): each segment is an occupation interval that
/// starts empty-to-occupied, joined by the birth arrows that filled the
/// next vertex.
pub fn invasion_paths(stream: &EventStream, p: SpaceTimePoint, traj: &Trajectory) -> Vec<InvasionPath> {
    let hist = traj.vertex_histories();
    if !hist.state_at(p.vertex, p.time).is_occupied() {
        return Vec::new();
    }
    // memo: (vertex, start of occupation interval) -> partial paths ending there
    let mut memo: HashMap<(Vertex, u64), Vec<Vec<(Vertex, f64)>>> = HashMap::new();
    let ancestries = ancestries(stream, &hist, p.vertex, p.time, false, &mut memo);
    ancestries
        .into_iter()
        .map(|chain| {
            let mut vertices: Vec<Vertex> = chain.iter().map(|&(v, _)| v).collect();
            let mut times: Vec<f64> = chain.iter().map(|&(_, t)| t).collect();
            vertices.shrink_to_fit();
            times.push(p.time);
            InvasionPath { vertices, times }
        })
        .collect()
}

/// Start of the occupation interval of `x` containing `t` (or `t-` when
/// `strict`), or `None` when `x` is then empty.
fn occupation_start(hist: &crate::events::VertexHistories, x: Vertex, t: f64, strict: bool) -> Option<f64> {
    let h = hist.changes(x);
    let idx = if strict {
        h.partition_point(|&(s, _)| s < t)
    } else {
        h.partition_point(|&(s, _)| s <= t)
    };
    let current = if idx == 0 { hist.initial(x) } else { h[idx - 1].1 };
    if !current.is_occupied() {
        return None;
    }
    // walk back to the last empty -> occupied transition
    let mut i = idx;
    while i > 0 {
        let prev = if i >= 2 { h[i - 2].1 } else { hist.initial(x) };
        if !prev.is_occupied() {
            return Some(h[i - 1].0);
        }
        i -= 1;
    }
    Some(0.0)
}

fn ancestries(
    stream: &EventStream,
    hist: &crate::events::VertexHistories,
    x: Vertex,
    t: f64,
    strict: bool,
    memo: &mut HashMap<(Vertex, u64), Vec<Vec<(Vertex, f64)>>>,
) -> Vec<Vec<(Vertex, f64)>> {
    let Some(start) = occupation_start(hist, x, t, strict) else {
        return Vec::new();
    };
    let key = (x, start.to_bits());
    if let Some(done) = memo.get(&key) {
        return done.clone();
    }
    let mut out = Vec::new();
    if start == 0.0 {
        out.push(vec![(x, 0.0)]);
    } else {
        for i in stream.events_at(start) {
            if let EventKind::Birth { from, to } = stream.events()[i].kind {
                if to != x || hist.state_before(x, start).is_occupied() {
                    continue;
                }
                for mut chain in ancestries(stream, hist, from, start, true, memo) {
                    chain.push((x, start));
                    out.push(chain);
                }
            }
        }
    }
    memo.insert(key, out.clone());
    out
}

/// Convenience: continue a trajectory's final state over the events in
/// `(from, to]` of the same stream.
pub fn continue_replay(stream: &EventStream, traj: &Trajectory, to: f64) -> Result<Trajectory> {
    replay_between(stream, traj.final_state().clone(), traj.horizon(), to, Effect::stacked)
}
