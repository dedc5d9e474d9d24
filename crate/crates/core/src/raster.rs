//! Space-time pictures of one-dimensional runs as binary graymaps (P5):
//! one row per sampled time, top row at time 0, white for empty, grey for
//! healthy and black for infected.

use crate::error::{invalid, Result};
use crate::events::{Effect, EventGenerator, Process};
use crate::lattice::{Configuration, ParamSet, State};

pub fn pixel(s: State) -> u8 {
    match s {
        State::Empty => 255,
        State::Healthy => 128,
        State::Infected => 0,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub rows: usize,
    pub pixels: Vec<u8>,
    /// Occupied and infected counts at the horizon.
    pub final_counts: (usize, usize),
}

impl Raster {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.rows).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.pixels[r * self.width..(r + 1) * self.width]
    }
}

/// Simulate on `[0, horizon]` and record the configuration at times
/// `k * interval` for `k < round(horizon / interval)` (at least one row).
pub fn raster(params: &ParamSet, init: &Configuration, horizon: f64, interval: f64, seed: u64) -> Result<Raster> {
    if params.dim() != 1 {
        return Err(invalid("dim", "rasters need a one-dimensional torus"));
    }
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(invalid("interval", "sampling interval must be positive"));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be finite and >= 0"));
    }
    let width = params.side();
    let rows = ((horizon / interval).round() as usize).max(1);
    let mut pixels = Vec::with_capacity(width * rows);
    let mut p = Process::new(init.clone());
    let emit = |p: &Process, pixels: &mut Vec<u8>| pixels.extend(p.config().states().iter().map(|&s| pixel(s)));
    let mut next = 0usize;
    for ev in EventGenerator::new(params, horizon, seed) {
        while next < rows && ev.time > next as f64 * interval {
            emit(&p, &mut pixels);
            next += 1;
        }
        p.apply(Effect::stacked(&ev));
    }
    while next < rows {
        emit(&p, &mut pixels);
        next += 1;
    }
    Ok(Raster {
        width,
        rows,
        pixels,
        final_counts: (p.occupied(), p.infected()),
    })
}
