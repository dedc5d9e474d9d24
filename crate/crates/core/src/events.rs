//! The graphical representation: state-independent Poisson marks and arrows,
//! and the replay machinery that turns them into trajectories.
//!
//! A stream is generated by superposition. Events arrive at total rate
//! `V * (death + recovery + birth + infection)`; each arrival picks its
//! category proportionally to the four rates, a uniform vertex and, for
//! arrows, a uniform target in the neighborhood. Every event carries a
//! uniform thinning label so that one stream can drive processes with
//! different (smaller) rates.

use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Configuration, Geometry, ParamSet, State, Torus, Vertex};
use crate::rng::{rng_from_seed, SimRng};

/// What happens at an event of the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// `×` at a vertex, rate 1.
    Death(Vertex),
    /// `•` at a vertex, rate `delta`.
    Recovery(Vertex),
    /// `x → y`, rate `lambda1 / N` per ordered pair.
    Birth { from: Vertex, to: Vertex },
    /// `x ⇢ y`, rate `lambda2 / N` per ordered pair.
    Infection { from: Vertex, to: Vertex },
}

impl EventKind {
    pub fn code(&self) -> char {
        match self {
            EventKind::Death(_) => 'D',
            EventKind::Recovery(_) => 'R',
            EventKind::Birth { .. } => 'B',
            EventKind::Infection { .. } => 'I',
        }
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, EventKind::Birth { .. } | EventKind::Infection { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    /// Uniform on `[0, 1)`; only meaningful for arrows.
    pub label: f64,
}

/// Per-site and per-pair rates of the four Poisson families. Pair rates are
/// totals over a neighborhood (`lambda`, not `lambda / N`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamRates {
    pub death: f64,
    pub recovery: f64,
    pub birth: f64,
    pub infection: f64,
}

impl StreamRates {
    pub fn of(params: &ParamSet) -> Self {
        StreamRates {
            death: 1.0,
            recovery: params.delta(),
            birth: params.lambda1(),
            infection: params.lambda2(),
        }
    }

    pub fn per_vertex(&self) -> f64 {
        self.death + self.recovery + self.birth + self.infection
    }
}

/// Lazily generates the events of a stream in time order.
#[derive(Clone, Debug)]
pub struct EventGenerator {
    torus: Arc<Torus>,
    rates: StreamRates,
    total: f64,
    rng: SimRng,
    time: f64,
    horizon: f64,
}

impl EventGenerator {
    pub fn new(params: &ParamSet, horizon: f64, seed: u64) -> Self {
        Self::with_rates(params.torus(), StreamRates::of(params), horizon, seed)
    }

    pub fn with_rates(torus: &Torus, rates: StreamRates, horizon: f64, seed: u64) -> Self {
        EventGenerator {
            total: rates.per_vertex() * torus.volume() as f64,
            torus: Arc::new(torus.clone()),
            rates,
            rng: rng_from_seed(seed),
            time: 0.0,
            horizon,
        }
    }
}

impl Iterator for EventGenerator {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.total <= 0.0 {
            return None;
        }
        let u: f64 = self.rng.random();
        self.time += -(1.0 - u).ln() / self.total;
        if self.time > self.horizon {
            self.time = f64::INFINITY;
            return None;
        }
        let r = &self.rates;
        let pick = self.rng.random::<f64>() * r.per_vertex();
        let x = self.rng.random_range(0..self.torus.volume());
        let kind = if pick < r.death {
            EventKind::Death(x)
        } else if pick < r.death + r.recovery {
            EventKind::Recovery(x)
        } else {
            let k = self.rng.random_range(0..self.torus.neighborhood_size());
            let y = self.torus.neighbor(x, k);
            if pick < r.death + r.recovery + r.birth {
                EventKind::Birth { from: x, to: y }
            } else {
                EventKind::Infection { from: x, to: y }
            }
        };
        let label = self.rng.random();
        Some(Event {
            time: self.time,
            kind,
            label,
        })
    }
}

/// A materialized, immutable stream. Replaying it from different initial
/// configurations, or under different interpretations, couples processes.
#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    params: ParamSet,
    rates: StreamRates,
    horizon: f64,
    seed: Option<u64>,
    events: Vec<Event>,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(invalid("horizon", format!("horizon must be positive and finite, got {horizon}")))
    }
}

/// Generate the stream of `params` on `[0, horizon]`.
pub fn generate_stream(params: &ParamSet, horizon: f64, seed: u64) -> Result<EventStream> {
    EventStream::generate_with_rates(params, StreamRates::of(params), horizon, seed)
}

impl EventStream {
    pub fn generate_with_rates(
        params: &ParamSet,
        rates: StreamRates,
        horizon: f64,
        seed: u64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let events = EventGenerator::with_rates(params.torus(), rates, horizon, seed).collect();
        Ok(EventStream {
            params: params.clone(),
            rates,
            horizon,
            seed: Some(seed),
            events,
        })
    }

    /// A hand-written schedule. Events must be time-ordered, inside
    /// `(0, horizon]`, with arrows between neighbors.
    pub fn from_events(params: &ParamSet, horizon: f64, events: Vec<Event>) -> Result<Self> {
        check_horizon(horizon)?;
        let torus = params.torus();
        let v = torus.volume();
        let mut last = 0.0;
        for (i, ev) in events.iter().enumerate() {
            if !(ev.time > 0.0 && ev.time <= horizon && ev.time >= last) {
                return Err(invalid("events", format!("event {i} at time {} is out of order or range", ev.time)));
            }
            last = ev.time;
            let ok = match ev.kind {
                EventKind::Death(x) | EventKind::Recovery(x) => x < v,
                EventKind::Birth { from, to } | EventKind::Infection { from, to } => {
                    from < v && to < v && torus.is_neighbor(from, to)
                }
            };
            if !ok {
                return Err(invalid("events", format!("event {i} has invalid endpoints")));
            }
        }
        Ok(EventStream {
            params: params.clone(),
            rates: StreamRates::of(params),
            horizon,
            seed: None,
            events,
        })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }
    pub fn rates(&self) -> StreamRates {
        self.rates
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
    pub fn events(&self) -> &[Event] {
        &self.events
    }
    pub fn len(&self) -> usize {
        self.events.len()
    }
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Index range of events whose time is exactly `t`.
    pub fn events_at(&self, t: f64) -> std::ops::Range<usize> {
        let lo = self.events.partition_point(|e| e.time < t);
        let hi = self.events.partition_point(|e| e.time <= t);
        lo..hi
    }

    /// Number of events with time `<= t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }
}

/// How one process reacts to one event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Effect {
    Nothing,
    /// Occupied `x` becomes empty.
    Kill(Vertex),
    /// Infected `x` becomes healthy.
    Recover(Vertex),
    /// Empty `to` takes the state of occupied `from`.
    Birth(Vertex, Vertex),
    /// Empty `to` receives a healthy host when `from` is occupied.
    HealthyBirth(Vertex, Vertex),
    /// Healthy `to` becomes infected when `from` is infected.
    Infect(Vertex, Vertex),
    /// Birth and infection at once: `to` becomes `max(from, to)` when `from` is occupied.
    BirthOrInfect(Vertex, Vertex),
    /// `to` takes the state of `from` unconditionally.
    Replace(Vertex, Vertex),
}

impl Effect {
    /// The stacked-process reading of an event.
    #[inline]
    pub fn stacked(ev: &Event) -> Effect {
        match ev.kind {
            EventKind::Death(x) => Effect::Kill(x),
            EventKind::Recovery(x) => Effect::Recover(x),
            EventKind::Birth { from, to } => Effect::Birth(from, to),
            EventKind::Infection { from, to } => Effect::Infect(from, to),
        }
    }
}

/// A single state change produced by an event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Change {
    pub time: f64,
    pub vertex: Vertex,
    pub old: State,
    pub new: State,
    /// Index of the responsible event in its stream.
    pub event: usize,
}

/// Mutable lattice state with running occupied and infected counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Process {
    cfg: Configuration,
    occupied: usize,
    infected: usize,
}

impl Process {
    pub fn new(cfg: Configuration) -> Self {
        let infected = cfg.count(State::Infected);
        let occupied = cfg.occupied_count();
        Process {
            cfg,
            occupied,
            infected,
        }
    }

    #[inline]
    pub fn config(&self) -> &Configuration {
        &self.cfg
    }
    pub fn into_config(self) -> Configuration {
        self.cfg
    }
    #[inline]
    pub fn occupied(&self) -> usize {
        self.occupied
    }
    #[inline]
    pub fn infected(&self) -> usize {
        self.infected
    }
    #[inline]
    pub fn get(&self, x: Vertex) -> State {
        self.cfg.get(x)
    }

    /// Apply `effect`; returns `(vertex, old, new)` when something changed.
    #[inline]
    pub fn apply(&mut self, effect: Effect) -> Option<(Vertex, State, State)> {
        use State::*;
        let (x, new) = match effect {
            Effect::Nothing => return None,
            Effect::Kill(x) => match self.cfg.get(x) {
                Empty => return None,
                _ => (x, Empty),
            },
            Effect::Recover(x) => match self.cfg.get(x) {
                Infected => (x, Healthy),
                _ => return None,
            },
            Effect::Birth(from, to) => {
                let parent = self.cfg.get(from);
                if parent == Empty || self.cfg.get(to) != Empty {
                    return None;
                }
                (to, parent)
            }
            Effect::HealthyBirth(from, to) => {
                if self.cfg.get(from) == Empty || self.cfg.get(to) != Empty {
                    return None;
                }
                (to, Healthy)
            }
            Effect::Infect(from, to) => {
                if self.cfg.get(from) != Infected || self.cfg.get(to) != Healthy {
                    return None;
                }
                (to, Infected)
            }
            Effect::BirthOrInfect(from, to) => {
                let parent = self.cfg.get(from);
                let target = self.cfg.get(to);
                if parent == Empty || parent <= target {
                    return None;
                }
                (to, parent)
            }
            Effect::Replace(from, to) => {
                let parent = self.cfg.get(from);
                if parent == self.cfg.get(to) {
                    return None;
                }
                (to, parent)
            }
        };
        let old = self.cfg.get(x);
        self.cfg.set(x, new);
        self.occupied = self.occupied + new.is_occupied() as usize - old.is_occupied() as usize;
        self.infected = self.infected + (new == Infected) as usize - (old == Infected) as usize;
        Some((x, old, new))
    }
}

/// Apply one event, under the stacked-process rules, to a copy of `cfg`.
pub fn apply_event(cfg: &Configuration, ev: &Event) -> Configuration {
    let mut p = Process::new(cfg.clone());
    p.apply(Effect::stacked(ev));
    p.into_config()
}

const CHECKPOINT_INTERVAL: usize = 4096;

/// Initial configuration plus the list of changes; answers state queries at
/// any time by replay from the nearest checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    params: ParamSet,
    horizon: f64,
    initial: Configuration,
    changes: Vec<Change>,
    checkpoints: Vec<Configuration>,
    current: Configuration,
}

impl Trajectory {
    pub fn new(params: &ParamSet, initial: Configuration, horizon: f64) -> Self {
        Trajectory {
            params: params.clone(),
            horizon,
            current: initial.clone(),
            initial,
            changes: Vec::new(),
            checkpoints: Vec::new(),
        }
    }

    pub fn record(&mut self, change: Change) {
        debug_assert!(self.changes.last().is_none_or(|c| c.time <= change.time));
        debug_assert_eq!(self.current.get(change.vertex), change.old);
        if !self.changes.is_empty() && self.changes.len() % CHECKPOINT_INTERVAL == 0 {
            self.checkpoints.push(self.current.clone());
        }
        self.current.set(change.vertex, change.new);
        self.changes.push(change);
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn initial(&self) -> &Configuration {
        &self.initial
    }
    pub fn changes(&self) -> &[Change] {
        &self.changes
    }
    pub fn final_state(&self) -> &Configuration {
        &self.current
    }
    pub fn geometry(&self) -> Geometry {
        self.initial.geometry()
    }

    /// Configuration at time `t` (right-continuous: changes at `t` included).
    pub fn state_at(&self, t: f64) -> Configuration {
        let idx = self.changes.partition_point(|c| c.time <= t);
        self.state_after(idx)
    }

    /// Configuration just before time `t`.
    pub fn state_before(&self, t: f64) -> Configuration {
        let idx = self.changes.partition_point(|c| c.time < t);
        self.state_after(idx)
    }

    /// Configuration after the first `n` changes.
    pub fn state_after(&self, n: usize) -> Configuration {
        let n = n.min(self.changes.len());
        let k = n / CHECKPOINT_INTERVAL;
        let (mut cfg, start) = if k == 0 {
            (self.initial.clone(), 0)
        } else {
            (self.checkpoints[k - 1].clone(), k * CHECKPOINT_INTERVAL)
        };
        for c in &self.changes[start..n] {
            cfg.set(c.vertex, c.new);
        }
        cfg
    }

    /// Per-vertex change lists `(time, new state)`, for pointwise queries.
    pub fn vertex_histories(&self) -> VertexHistories {
        let mut per = vec![Vec::new(); self.initial.len()];
        for c in &self.changes {
            per[c.vertex].push((c.time, c.new));
        }
        VertexHistories {
            initial: self.initial.clone(),
            per,
        }
    }
}

/// Change history of every vertex.
#[derive(Clone, Debug)]
pub struct VertexHistories {
    initial: Configuration,
    per: Vec<Vec<(f64, State)>>,
}

impl VertexHistories {
    pub fn changes(&self, x: Vertex) -> &[(f64, State)] {
        &self.per[x]
    }

    pub fn initial(&self, x: Vertex) -> State {
        self.initial.get(x)
    }

    /// State of `x` at `t`, right-continuous.
    pub fn state_at(&self, x: Vertex, t: f64) -> State {
        let h = &self.per[x];
        match h.partition_point(|&(s, _)| s <= t) {
            0 => self.initial.get(x),
            i => h[i - 1].1,
        }
    }

    /// `lim_{s↑t} ξ_s(x)`.
    pub fn state_before(&self, x: Vertex, t: f64) -> State {
        let h = &self.per[x];
        match h.partition_point(|&(s, _)| s < t) {
            0 => self.initial.get(x),
            i => h[i - 1].1,
        }
    }

    /// Whether `x` is in `state` at some time of `[from, to]`.
    pub fn visits(&self, x: Vertex, state: State, from: f64, to: f64) -> bool {
        if self.state_at(x, from) == state {
            return true;
        }
        let h = &self.per[x];
        let lo = h.partition_point(|&(s, _)| s <= from);
        h[lo..]
            .iter()
            .take_while(|&&(s, _)| s <= to)
            .any(|&(_, v)| v == state)
    }
}

/// Replay `stream` from `init`, reading each event through `interpret`.
pub fn replay_with<F>(stream: &EventStream, init: Configuration, interpret: F) -> Result<Trajectory>
where
    F: Fn(&Event) -> Effect,
{
    replay_between(stream, init, 0.0, stream.horizon(), interpret)
}

/// Replay the events with time in `(from, to]`, starting from `init` at `from`.
pub fn replay_between<F>(
    stream: &EventStream,
    init: Configuration,
    from: f64,
    to: f64,
    interpret: F,
) -> Result<Trajectory>
where
    F: Fn(&Event) -> Effect,
{
    if init.geometry() != stream.params().geometry() {
        return Err(Error::GeometryMismatch(format!(
            "configuration is {:?}, stream is {:?}",
            init.geometry(),
            stream.params().geometry()
        )));
    }
    let mut traj = Trajectory::new(stream.params(), init.clone(), to);
    let mut proc = Process::new(init);
    let start = stream.count_until(from);
    let end = stream.count_until(to);
    for (i, ev) in stream.events()[start..end].iter().enumerate() {
        if let Some((vertex, old, new)) = proc.apply(interpret(ev)) {
            traj.record(Change {
                time: ev.time,
                vertex,
                old,
                new,
                event: start + i,
            });
        }
    }
    Ok(traj)
}

/// Replay a stream under the stacked-process rules.
pub fn replay(stream: &EventStream, init: Configuration) -> Result<Trajectory> {
    replay_with(stream, init, Effect::stacked)
}

/// Simulate the stacked process from `init` on `[0, horizon]`.
pub fn simulate(params: &ParamSet, init: Configuration, horizon: f64, seed: u64) -> Result<Trajectory> {
    if init.geometry() != params.geometry() {
        return Err(Error::GeometryMismatch(format!(
            "configuration is {:?}, parameters are {:?}",
            init.geometry(),
            params.geometry()
        )));
    }
    let stream = generate_stream(params, horizon, seed)?;
    replay(&stream, init)
}

/// Stream of the saturated (`lambda1 → ∞`) process: replacement arrows at
/// total rate 1 per vertex (stored as birth arrows), recovery marks at rate
/// `delta`, infection arrows at rate `lambda2`.
pub fn saturated_stream(
    lambda2: f64,
    delta: f64,
    torus: &Torus,
    horizon: f64,
    seed: u64,
) -> Result<EventStream> {
    let g = torus.geometry();
    let params = ParamSet::new(0.0, lambda2, delta, torus.range(), g.dim, g.side)?;
    let rates = StreamRates {
        death: 0.0,
        recovery: delta,
        birth: 1.0,
        infection: lambda2,
    };
    EventStream::generate_with_rates(&params, rates, horizon, seed)
}

/// Reading of a saturated stream: a dead host is instantly replaced by the
/// offspring of a uniform neighbor.
pub fn saturated_effect(ev: &Event) -> Effect {
    match ev.kind {
        EventKind::Death(_) => Effect::Nothing,
        EventKind::Recovery(x) => Effect::Recover(x),
        EventKind::Birth { from, to } => Effect::Replace(from, to),
        EventKind::Infection { from, to } => Effect::Infect(from, to),
    }
}

/// The `lambda1 → ∞` limit: two-state dynamics on `{1, 2}` with
/// `1 → 2` at rate `(lambda2 + 1) f_2` and `2 → 1` at rate `f_1 + delta`.
pub fn simulate_saturated(
    lambda2: f64,
    delta: f64,
    torus: &Torus,
    init: Configuration,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    if init.count(State::Empty) > 0 {
        return Err(invalid("init", "saturated process requires every vertex occupied"));
    }
    let stream = saturated_stream(lambda2, delta, torus, horizon, seed)?;
    replay_with(&stream, init, saturated_effect)
}

/// Which indicator a projection keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// `η¹`: occupied vertices, marked as state 1.
    Occupied,
    /// `η²`: infected vertices, marked as state 2.
    Infected,
}

impl Projection {
    fn member(self, s: State) -> bool {
        match self {
            Projection::Occupied => s.is_occupied(),
            Projection::Infected => s == State::Infected,
        }
    }

    fn mark(self) -> State {
        match self {
            Projection::Occupied => State::Healthy,
            Projection::Infected => State::Infected,
        }
    }
}

/// Pointwise indicator trajectory of the occupied or infected set.
pub fn project(traj: &Trajectory, mode: Projection) -> Trajectory {
    let ind = |s: State| if mode.member(s) { mode.mark() } else { State::Empty };
    let initial = traj.initial().indicator(mode == Projection::Infected, mode.mark());
    let mut out = Trajectory::new(traj.params(), initial, traj.horizon());
    for c in traj.changes() {
        let (old, new) = (ind(c.old), ind(c.new));
        if old != new {
            out.record(Change { old, new, ..*c });
        }
    }
    out
}

/// Basic contact process replay reading births from `births` and deaths
/// from `deaths`; occupied vertices carry the state of their ancestors.
pub fn contact_replay<B, D>(stream: &EventStream, init: Configuration, births: B, deaths: D) -> Result<Trajectory>
where
    B: Fn(&Event) -> bool,
    D: Fn(&Event) -> bool,
{
    replay_with(stream, init, |ev| match ev.kind {
        EventKind::Death(x) | EventKind::Recovery(x) => {
            if deaths(ev) {
                Effect::Kill(x)
            } else {
                Effect::Nothing
            }
        }
        EventKind::Birth { from, to } | EventKind::Infection { from, to } => {
            if births(ev) {
                Effect::Birth(from, to)
            } else {
                Effect::Nothing
            }
        }
    })
}
