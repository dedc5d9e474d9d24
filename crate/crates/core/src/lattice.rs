//! Torus geometry, parameters, configurations and the box partition used by
//! the long-range comparison.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Vertex of the torus, as a row-major index (first coordinate most significant).
pub type Vertex = usize;

/// State of a single vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[repr(u8)]
pub enum State {
    #[default]
    Empty = 0,
    Healthy = 1,
    Infected = 2,
}

impl State {
    pub const ALL: [State; 3] = [State::Empty, State::Healthy, State::Infected];

    pub fn from_u8(v: u8) -> Option<State> {
        match v {
            0 => Some(State::Empty),
            1 => Some(State::Healthy),
            2 => Some(State::Infected),
            _ => None,
        }
    }

    #[inline]
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn is_occupied(self) -> bool {
        self != State::Empty
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Shape of a `d`-dimensional torus of side `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub dim: usize,
    pub side: usize,
}

impl Geometry {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "dimension must be at least 1"));
        }
        if side < 2 {
            return Err(invalid("side", "torus side must be at least 2"));
        }
        side.checked_pow(dim as u32)
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| invalid("side", "torus volume does not fit in 32 bits"))?;
        Ok(Geometry { dim, side })
    }

    #[inline]
    pub fn volume(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Coordinates of `x`, first coordinate most significant.
    pub fn coords(&self, x: Vertex) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        let mut rest = x;
        for slot in c.iter_mut().rev() {
            *slot = rest % self.side;
            rest /= self.side;
        }
        c
    }

    /// Index of the vertex with the given (possibly negative or oversized)
    /// coordinates, reduced modulo the side.
    pub fn index(&self, coords: &[i64]) -> Vertex {
        debug_assert_eq!(coords.len(), self.dim);
        let m = self.side as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.side + c.rem_euclid(m) as usize)
    }

    /// Sup-norm distance on the torus.
    pub fn sup_distance(&self, x: Vertex, y: Vertex) -> usize {
        let (cx, cy) = (self.coords(x), self.coords(y));
        cx.iter()
            .zip(&cy)
            .map(|(&a, &b)| {
                let d = a.abs_diff(b);
                d.min(self.side - d)
            })
            .max()
            .unwrap_or(0)
    }

    /// Vertex on the first axis: `(x, 0, ..., 0)`.
    pub fn axis_vertex(&self, x: i64) -> Vertex {
        let mut c = vec![0i64; self.dim];
        c[0] = x;
        self.index(&c)
    }
}

/// Geometry plus interaction range: knows every vertex's neighborhood.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    geometry: Geometry,
    range: usize,
    /// Neighbor offsets in lexicographic order, flattened `dim` at a time.
    offsets: Vec<i64>,
}

impl Torus {
    pub fn new(geometry: Geometry, range: usize) -> Result<Self> {
        if range == 0 {
            return Err(invalid("range", "interaction range must be at least 1"));
        }
        if geometry.side < 2 * range + 1 {
            return Err(invalid(
                "side",
                format!(
                    "torus side {} is smaller than 2L+1 = {}",
                    geometry.side,
                    2 * range + 1
                ),
            ));
        }
        let l = range as i64;
        let width = 2 * range + 1;
        let total = width.pow(geometry.dim as u32);
        let mut offsets = Vec::with_capacity((total - 1) * geometry.dim);
        for k in 0..total {
            let mut rest = k;
            let mut off = vec![0i64; geometry.dim];
            for slot in off.iter_mut().rev() {
                *slot = (rest % width) as i64 - l;
                rest /= width;
            }
            if off.iter().any(|&o| o != 0) {
                offsets.extend_from_slice(&off);
            }
        }
        Ok(Torus {
            geometry,
            range,
            offsets,
        })
    }

    #[inline]
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    #[inline]
    pub fn range(&self) -> usize {
        self.range
    }

    #[inline]
    pub fn volume(&self) -> usize {
        self.geometry.volume()
    }

    /// Neighborhood size `(2L+1)^d - 1`.
    #[inline]
    pub fn neighborhood_size(&self) -> usize {
        self.offsets.len() / self.geometry.dim
    }

    pub fn offset(&self, k: usize) -> &[i64] {
        let d = self.geometry.dim;
        &self.offsets[k * d..(k + 1) * d]
    }

    /// The `k`-th neighbor of `x` in canonical order.
    #[inline]
    pub fn neighbor(&self, x: Vertex, k: usize) -> Vertex {
        let m = self.geometry.side;
        if self.geometry.dim == 1 {
            let off = self.offsets[k];
            return (x as i64 + off).rem_euclid(m as i64) as usize;
        }
        let d = self.geometry.dim;
        let off = &self.offsets[k * d..(k + 1) * d];
        let mut rest = x;
        let mut stride = 1usize;
        let mut out = 0usize;
        for &o in off.iter().rev() {
            let c = (rest % m) as i64;
            rest /= m;
            out += (c + o).rem_euclid(m as i64) as usize * stride;
            stride *= m;
        }
        out
    }

    /// All `y != x` within torus sup-distance `L`, in canonical order.
    pub fn neighborhood(&self, x: Vertex) -> Vec<Vertex> {
        (0..self.neighborhood_size())
            .map(|k| self.neighbor(x, k))
            .collect()
    }

    pub fn is_neighbor(&self, x: Vertex, y: Vertex) -> bool {
        x != y && self.geometry.sup_distance(x, y) <= self.range
    }

    /// Exact fraction of neighbors of `x` in state `j`.
    pub fn local_fraction(&self, cfg: &Configuration, x: Vertex, j: State) -> Ratio<usize> {
        let n = self.neighborhood_size();
        let count = (0..n)
            .filter(|&k| cfg.get(self.neighbor(x, k)) == j)
            .count();
        Ratio::new(count, n)
    }
}

/// Model parameters together with the torus they live on.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    lambda1: f64,
    lambda2: f64,
    delta: f64,
    torus: Arc<Torus>,
}

fn check_rate(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(name, format!("rate must be finite and >= 0, got {v}")))
    }
}

impl ParamSet {
    pub fn new(
        lambda1: f64,
        lambda2: f64,
        delta: f64,
        range: usize,
        dim: usize,
        side: usize,
    ) -> Result<Self> {
        let torus = Torus::new(Geometry::new(dim, side)?, range)?;
        Ok(ParamSet {
            lambda1: check_rate("lambda1", lambda1)?,
            lambda2: check_rate("lambda2", lambda2)?,
            delta: check_rate("delta", delta)?,
            torus: Arc::new(torus),
        })
    }

    /// Nearest-neighbor model on the cycle `Z/MZ`.
    pub fn one_dim(lambda1: f64, lambda2: f64, delta: f64, side: usize) -> Result<Self> {
        Self::new(lambda1, lambda2, delta, 1, 1, side)
    }

    pub fn with_rates(&self, lambda1: f64, lambda2: f64, delta: f64) -> Result<Self> {
        Ok(ParamSet {
            lambda1: check_rate("lambda1", lambda1)?,
            lambda2: check_rate("lambda2", lambda2)?,
            delta: check_rate("delta", delta)?,
            torus: Arc::clone(&self.torus),
        })
    }

    pub fn with_lambda1(&self, lambda1: f64) -> Result<Self> {
        self.with_rates(lambda1, self.lambda2, self.delta)
    }

    pub fn with_lambda2(&self, lambda2: f64) -> Result<Self> {
        self.with_rates(self.lambda1, lambda2, self.delta)
    }

    #[inline]
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    #[inline]
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }
    #[inline]
    pub fn range(&self) -> usize {
        self.torus.range
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.torus.geometry.dim
    }
    #[inline]
    pub fn side(&self) -> usize {
        self.torus.geometry.side
    }
    #[inline]
    pub fn torus(&self) -> &Torus {
        &self.torus
    }
    #[inline]
    pub fn geometry(&self) -> Geometry {
        self.torus.geometry
    }

    /// `u* = 1 - 1/lambda1`, the mean-field host density (negative when `lambda1 < 1`).
    pub fn host_equilibrium(&self) -> f64 {
        1.0 - 1.0 / self.lambda1
    }
}

/// Neighbors of `x` in canonical (lexicographic offset) order.
pub fn neighborhood(x: Vertex, params: &ParamSet) -> Vec<Vertex> {
    params.torus().neighborhood(x)
}

/// `f_j(x, cfg)`: exact fraction of the neighbors of `x` in state `j`.
pub fn local_fraction(cfg: &Configuration, x: Vertex, j: State, params: &ParamSet) -> Ratio<usize> {
    params.torus().local_fraction(cfg, x, j)
}

/// Rate at which `x` jumps to `target` in configuration `cfg`.
pub fn flip_rate(cfg: &Configuration, x: Vertex, target: State, params: &ParamSet) -> Result<f64> {
    use State::*;
    let current = cfg.get(x);
    if current == target {
        return Err(Error::UndefinedTransition {
            from: current.as_u8(),
            to: target.as_u8(),
        });
    }
    let frac = |j| {
        let r = params.torus().local_fraction(cfg, x, j);
        *r.numer() as f64 / *r.denom() as f64
    };
    Ok(match (current, target) {
        (Empty, Healthy) => params.lambda1 * frac(Healthy),
        (Empty, Infected) => params.lambda1 * frac(Infected),
        (Healthy, Infected) => params.lambda2 * frac(Infected),
        (Healthy, Empty) | (Infected, Empty) => 1.0,
        (Infected, Healthy) => params.delta,
        _ => 0.0,
    })
}

/// Total map vertex -> state on a finite torus.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    geometry: Geometry,
    states: Vec<State>,
}

impl Configuration {
    pub fn uniform(geometry: Geometry, state: State) -> Self {
        Configuration {
            geometry,
            states: vec![state; geometry.volume()],
        }
    }

    pub fn empty(geometry: Geometry) -> Self {
        Self::uniform(geometry, State::Empty)
    }

    pub fn from_states(geometry: Geometry, states: Vec<State>) -> Result<Self> {
        if states.len() != geometry.volume() {
            return Err(Error::GeometryMismatch(format!(
                "{} states for a torus of volume {}",
                states.len(),
                geometry.volume()
            )));
        }
        Ok(Configuration { geometry, states })
    }

    /// Parse a compact string such as `"0120"` (d = 1 convenience).
    pub fn from_digits(geometry: Geometry, digits: &str) -> Result<Self> {
        let states = digits
            .bytes()
            .map(|b| {
                b.checked_sub(b'0')
                    .and_then(State::from_u8)
                    .ok_or_else(|| invalid("configuration", format!("bad state digit {:?}", b as char)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(geometry, states)
    }

    /// Every vertex in `background` except `x`, which is in `state`.
    pub fn single(geometry: Geometry, x: Vertex, state: State, background: State) -> Self {
        let mut cfg = Self::uniform(geometry, background);
        cfg.set(x, state);
        cfg
    }

    /// Product measure: healthy with probability `p1`, infected with `p2`.
    pub fn random<R: Rng + ?Sized>(geometry: Geometry, p1: f64, p2: f64, rng: &mut R) -> Self {
        let states = (0..geometry.volume())
            .map(|_| {
                let u: f64 = rng.random();
                if u < p2 {
                    State::Infected
                } else if u < p1 + p2 {
                    State::Healthy
                } else {
                    State::Empty
                }
            })
            .collect();
        Configuration { geometry, states }
    }

    #[inline]
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    #[inline]
    pub fn get(&self, x: Vertex) -> State {
        self.states[x]
    }

    #[inline]
    pub fn set(&mut self, x: Vertex, s: State) {
        self.states[x] = s;
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn count(&self, s: State) -> usize {
        self.states.iter().filter(|&&v| v == s).count()
    }

    pub fn occupied_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_occupied()).count()
    }

    /// `self ⪯ other`: occupied set and infected set both included in those of `other`.
    pub fn precedes(&self, other: &Configuration) -> bool {
        self.first_order_violation(other).is_none()
    }

    pub(crate) fn first_order_violation(&self, other: &Configuration) -> Option<Vertex> {
        self.states
            .iter()
            .zip(&other.states)
            .position(|(&a, &b)| !state_precedes(a, b))
    }

    /// Pointwise `self(x) <= other(x)`.
    pub fn pointwise_le(&self, other: &Configuration) -> bool {
        self.states.iter().zip(&other.states).all(|(a, b)| a <= b)
    }

    /// Indicator configuration of the occupied (or infected) set, using
    /// `mark` for members.
    pub fn indicator(&self, infected_only: bool, mark: State) -> Configuration {
        let states = self
            .states
            .iter()
            .map(|&s| {
                let member = if infected_only {
                    s == State::Infected
                } else {
                    s.is_occupied()
                };
                if member {
                    mark
                } else {
                    State::Empty
                }
            })
            .collect();
        Configuration {
            geometry: self.geometry,
            states,
        }
    }
}

/// Single-site version of the partial order: occupied implies occupied, infected implies infected.
#[inline]
pub fn state_precedes(a: State, b: State) -> bool {
    (!a.is_occupied() || b.is_occupied()) && (a != State::Infected || b == State::Infected)
}

/// Partition of the torus into boxes `2l z + (-l, l]^d` with `l = floor(epsilon0 * L)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxPartition {
    half: usize,
    epsilon0: f64,
    range: usize,
    geometry: Geometry,
    per_axis: usize,
}

impl BoxPartition {
    pub fn new(epsilon0: f64, params: &ParamSet) -> Result<Self> {
        if !(epsilon0.is_finite() && epsilon0 > 0.0) {
            return Err(invalid("epsilon0", "box scale must be positive"));
        }
        let range = params.range();
        let scaled = epsilon0 * range as f64;
        let half = scaled.floor() as usize;
        if half == 0 {
            return Err(Error::DegenerateBoxes(scaled));
        }
        let geometry = params.geometry();
        let width = 2 * half;
        if geometry.side % width != 0 {
            return Err(Error::PartitionMismatch {
                side: geometry.side,
                width,
            });
        }
        Ok(BoxPartition {
            half,
            epsilon0,
            range,
            geometry,
            per_axis: geometry.side / width,
        })
    }

    /// The half-width `l`.
    #[inline]
    pub fn half(&self) -> usize {
        self.half
    }

    #[inline]
    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn box_count(&self) -> usize {
        self.per_axis.pow(self.geometry.dim as u32)
    }

    /// Boxes per axis, `M / 2l`.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    fn axis_box(&self, c: usize) -> usize {
        ((c + self.half - 1) / (2 * self.half)) % self.per_axis
    }

    /// Box coordinates of `x`.
    pub fn box_coords(&self, x: Vertex) -> Vec<usize> {
        self.geometry
            .coords(x)
            .into_iter()
            .map(|c| self.axis_box(c))
            .collect()
    }

    /// Row-major box index of the box containing `x`.
    pub fn box_of(&self, x: Vertex) -> usize {
        if self.geometry.dim == 1 {
            return self.axis_box(x);
        }
        self.box_coords(x)
            .into_iter()
            .fold(0, |acc, z| acc * self.per_axis + z)
    }

    pub fn box_index(&self, coords: &[i64]) -> usize {
        let k = self.per_axis as i64;
        coords
            .iter()
            .fold(0usize, |acc, &z| acc * self.per_axis + z.rem_euclid(k) as usize)
    }

    /// Vertices of box `z`, in row-major order of their offsets.
    pub fn box_vertices(&self, z: usize) -> Vec<Vertex> {
        let d = self.geometry.dim;
        let mut zc = vec![0i64; d];
        let mut rest = z % self.box_count();
        for slot in zc.iter_mut().rev() {
            *slot = (rest % self.per_axis) as i64;
            rest /= self.per_axis;
        }
        let l = self.half as i64;
        let width = 2 * self.half;
        let total = width.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut coords = vec![0i64; d];
        for k in 0..total {
            let mut rest = k;
            for i in (0..d).rev() {
                coords[i] = 2 * l * zc[i] - l + 1 + (rest % width) as i64;
                rest /= width;
            }
            out.push(self.geometry.index(&coords));
        }
        out
    }

    /// Whether `y` belongs to the reduced neighborhood of `x`: every pair of
    /// points of their two boxes is within sup-distance `L`.
    pub fn in_reduced_neighborhood(&self, x: Vertex, y: Vertex) -> bool {
        if x == y {
            return false;
        }
        let k = self.per_axis;
        let l = self.half;
        if self.geometry.dim == 1 {
            let diff = self.axis_box(x).abs_diff(self.axis_box(y));
            let diff = diff.min(k - diff);
            return 2 * l * diff + 2 * l - 1 <= self.range;
        }
        let (bx, by) = (self.box_coords(x), self.box_coords(y));
        bx.iter().zip(&by).all(|(&a, &b)| {
            let diff = a.abs_diff(b);
            let diff = diff.min(k - diff);
            2 * l * diff + 2 * l - 1 <= self.range
        })
    }

    /// `N̂_x` in the canonical neighbor order of `torus`.
    pub fn reduced_neighborhood(&self, x: Vertex, torus: &Torus) -> Vec<Vertex> {
        torus
            .neighborhood(x)
            .into_iter()
            .filter(|&y| self.in_reduced_neighborhood(x, y))
            .collect()
    }
}
