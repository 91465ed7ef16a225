//! Event queue, cell lists and event execution.

use super::{predict_contact, ParticleState, OVERLAP_TOLERANCE};
use crate::collision::apply_collision;
use crate::error::{Error, Result};
use crate::log::{CollisionLog, Label, PairEvent, Side, WallEvent};
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Contacts landing farther than this from `ε` are a prediction fault.
const CONTACT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Pair { j: u32 },
    Wall { axis: u8, high: bool },
    Cell { axis: u8, up: bool },
}

impl Kind {
    fn key(&self) -> (u8, u32, u8, bool) {
        match *self {
            Kind::Pair { j } => (0, j, 0, false),
            Kind::Wall { axis, high } => (1, 0, axis, high),
            Kind::Cell { axis, up } => (2, 0, axis, up),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    i: u32,
    kind: Kind,
    stamp_i: u64,
    stamp_j: u64,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ka, ja, aa, ba) = self.kind.key();
        let (kb, jb, ab, bb) = other.kind.key();
        self.t
            .total_cmp(&other.t)
            .then(ka.cmp(&kb))
            .then(self.i.cmp(&other.i))
            .then(ja.cmp(&jb))
            .then(aa.cmp(&ab))
            .then(ba.cmp(&bb))
            .then(self.stamp_i.cmp(&other.stamp_i))
            .then(self.stamp_j.cmp(&other.stamp_j))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Pair,
    Wall,
    CellCrossing,
    /// The next event lies beyond the horizon; nothing was executed.
    Horizon,
}

/// Hard-sphere system with lazily advanced particle positions.
#[derive(Debug, Clone)]
pub struct Simulation {
    eps: f64,
    dim: usize,
    x: Vec<[f64; 3]>,
    v: Vec<[f64; 3]>,
    local_t: Vec<f64>,
    stamp: Vec<u64>,
    m: usize,
    cell_of: Vec<[usize; 3]>,
    cells: Vec<Vec<u32>>,
    queue: BinaryHeap<Reverse<Event>>,
    now: f64,
    log: CollisionLog,
    log_walls: bool,
    pair_events: u64,
    wall_events: u64,
    crossings: u64,
}

impl Simulation {
    /// Starts at time zero. `states[k].id` must be `k + 1`.
    pub fn new(epsilon: f64, dim: usize, states: Vec<ParticleState>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("diameter {epsilon} outside (0, 1)")));
        }
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no particles".into()));
        }
        let lo = 0.5 * epsilon - OVERLAP_TOLERANCE;
        let hi = 1.0 - 0.5 * epsilon + OVERLAP_TOLERANCE;
        let mut x = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for (k, s) in states.iter().enumerate() {
            if s.id as usize != k + 1 {
                return Err(Error::InvalidArgument(format!("state {k} carries label {}", s.id)));
            }
            if s.x[..dim].iter().any(|&c| !(lo..=hi).contains(&c)) || s.v.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!("particle {} outside the admissible box", s.id)));
            }
            let mut xs = [0.0; 3];
            let mut vs = [0.0; 3];
            xs[..dim].copy_from_slice(&s.x[..dim]);
            vs[..dim].copy_from_slice(&s.v[..dim]);
            x.push(xs);
            v.push(vs);
        }
        let per_axis = (n as f64).powf(1.0 / dim as f64).ceil() as usize;
        let m = per_axis.min((1.0 / epsilon).floor() as usize).max(1);
        let cells_total = m.pow(dim as u32);
        let mut sim = Self {
            eps: epsilon,
            dim,
            x,
            v,
            local_t: vec![0.0; n],
            stamp: vec![0; n],
            m,
            cell_of: vec![[0; 3]; n],
            cells: vec![Vec::new(); cells_total],
            queue: BinaryHeap::new(),
            now: 0.0,
            log: CollisionLog::new(n, dim),
            log_walls: true,
            pair_events: 0,
            wall_events: 0,
            crossings: 0,
        };
        for i in 0..n {
            let c: [usize; 3] = std::array::from_fn(|a| {
                if a < dim {
                    ((sim.x[i][a] * m as f64).floor() as usize).min(m - 1)
                } else {
                    0
                }
            });
            sim.cell_of[i] = c;
            let flat = sim.flat(&c);
            sim.cells[flat].push(i as u32);
        }
        for i in 0..n {
            for j in sim.neighbours(i) {
                if j > i {
                    let d2: f64 = (0..3).map(|a| (sim.x[i][a] - sim.x[j][a]).powi(2)).sum();
                    if d2.sqrt() < epsilon - OVERLAP_TOLERANCE {
                        return Err(Error::InvalidArgument(format!("particles {} and {} overlap", i + 1, j + 1)));
                    }
                }
            }
        }
        for i in 0..n {
            sim.schedule(i, None);
        }
        Ok(sim)
    }

    pub fn set_log_walls(&mut self, on: bool) {
        self.log_walls = on;
    }

    pub fn time(&self) -> f64 {
        self.now
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn pair_events(&self) -> u64 {
        self.pair_events
    }

    pub fn wall_events(&self) -> u64 {
        self.wall_events
    }

    pub fn cell_crossings(&self) -> u64 {
        self.crossings
    }

    pub fn log(&self) -> &CollisionLog {
        &self.log
    }

    pub fn into_log(self) -> CollisionLog {
        self.log
    }

    /// Cells per axis.
    pub fn cells_per_axis(&self) -> usize {
        self.m
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.v.iter().map(|v| 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])).sum()
    }

    pub fn momentum(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for v in &self.v {
            for a in 0..3 {
                p[a] += v[a];
            }
        }
        p
    }

    fn position_at(&self, i: usize, t: f64) -> [f64; 3] {
        let dt = t - self.local_t[i];
        std::array::from_fn(|a| self.x[i][a] + self.v[i][a] * dt)
    }

    /// Snapshot of all particles at the current time.
    pub fn states(&self) -> Vec<ParticleState> {
        (0..self.x.len())
            .map(|i| ParticleState { id: i as Label + 1, x: self.position_at(i, self.now), v: self.v[i] })
            .collect()
    }

    /// Smallest center distance over all pairs; quadratic, for checks.
    pub fn min_separation(&self) -> f64 {
        let pos: Vec<_> = (0..self.x.len()).map(|i| self.position_at(i, self.now)).collect();
        let mut best = f64::INFINITY;
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let d2: f64 = (0..3).map(|a| (pos[i][a] - pos[j][a]).powi(2)).sum();
                best = best.min(d2);
            }
        }
        best.sqrt()
    }

    fn flat(&self, c: &[usize; 3]) -> usize {
        c[0] + self.m * (c[1] + self.m * c[2])
    }

    fn neighbours(&self, i: usize) -> Vec<usize> {
        let c = self.cell_of[i];
        let m = self.m as isize;
        let range = |a: usize| -> std::ops::RangeInclusive<isize> {
            if a < self.dim {
                let ca = c[a] as isize;
                (ca - 1).max(0)..=(ca + 1).min(m - 1)
            } else {
                0..=0
            }
        };
        let mut out = Vec::new();
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let flat = self.flat(&[x as usize, y as usize, z as usize]);
                    out.extend(self.cells[flat].iter().map(|&j| j as usize).filter(|&j| j != i));
                }
            }
        }
        out
    }

    fn sync(&mut self, i: usize) {
        self.x[i] = self.position_at(i, self.now);
        self.local_t[i] = self.now;
    }

    fn push(&mut self, t: f64, i: usize, kind: Kind) {
        let stamp_j = match kind {
            Kind::Pair { j } => self.stamp[j as usize],
            _ => 0,
        };
        self.queue.push(Reverse(Event { t, i: i as u32, kind, stamp_i: self.stamp[i], stamp_j }));
    }

    /// Predicts the next wall, cell and pair events of `i` from the current time.
    fn schedule(&mut self, i: usize, skip: Option<usize>) {
        self.sync(i);
        let (xi, vi) = (self.x[i], self.v[i]);
        let lo = 0.5 * self.eps;
        let hi = 1.0 - 0.5 * self.eps;
        let mut wall: Option<(f64, Kind)> = None;
        let mut cell: Option<(f64, Kind)> = None;
        for a in 0..self.dim {
            let va = vi[a];
            if va == 0.0 {
                continue;
            }
            let (target, high) = if va > 0.0 { (hi, true) } else { (lo, false) };
            let dt = ((target - xi[a]) / va).max(0.0);
            if wall.is_none_or(|(best, _)| dt < best) {
                wall = Some((dt, Kind::Wall { axis: a as u8, high }));
            }
            let ca = self.cell_of[i][a];
            let boundary = if va > 0.0 && ca + 1 < self.m {
                Some((ca + 1) as f64 / self.m as f64)
            } else if va < 0.0 && ca > 0 {
                Some(ca as f64 / self.m as f64)
            } else {
                None
            };
            if let Some(b) = boundary {
                let dt = ((b - xi[a]) / va).max(0.0);
                if cell.is_none_or(|(best, _)| dt < best) {
                    cell = Some((dt, Kind::Cell { axis: a as u8, up: va > 0.0 }));
                }
            }
        }
        if let Some((dt, kind)) = wall {
            self.push(self.now + dt, i, kind);
        }
        if let Some((dt, kind)) = cell {
            self.push(self.now + dt, i, kind);
        }
        for j in self.neighbours(i) {
            if Some(j) == skip {
                continue;
            }
            let xj = self.position_at(j, self.now);
            if let Some(dt) = predict_contact(&xi, &vi, &xj, &self.v[j], self.eps) {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                self.push(self.now + dt, a, Kind::Pair { j: b as u32 });
            }
        }
    }

    fn is_valid(&self, e: &Event) -> bool {
        self.stamp[e.i as usize] == e.stamp_i
            && match e.kind {
                Kind::Pair { j } => self.stamp[j as usize] == e.stamp_j,
                _ => true,
            }
    }

    fn compact(&mut self) {
        if self.queue.len() > 64 * self.x.len() + 4096 {
            let queue = std::mem::take(&mut self.queue);
            self.queue = queue.into_iter().filter(|Reverse(e)| self.is_valid(e)).collect();
        }
    }

    /// Executes the next valid event unless it lies beyond `horizon`.
    pub fn step(&mut self, horizon: f64) -> Result<StepOutcome> {
        let event = loop {
            let Some(&Reverse(e)) = self.queue.peek() else {
                return Ok(StepOutcome::Horizon);
            };
            if !self.is_valid(&e) {
                self.queue.pop();
                continue;
            }
            if e.t > horizon {
                return Ok(StepOutcome::Horizon);
            }
            self.queue.pop();
            break e;
        };
        if event.t < self.now {
            return Err(Error::Fault { time: self.now, reason: format!("event at {} precedes current time", event.t) });
        }
        self.now = event.t;
        let i = event.i as usize;
        let outcome = match event.kind {
            Kind::Pair { j } => {
                self.execute_pair(i, j as usize)?;
                StepOutcome::Pair
            }
            Kind::Wall { axis, high } => {
                self.sync(i);
                let a = axis as usize;
                self.x[i][a] = if high { 1.0 - 0.5 * self.eps } else { 0.5 * self.eps };
                self.v[i][a] = -self.v[i][a];
                self.wall_events += 1;
                if self.log_walls {
                    let side = if high { Side::High } else { Side::Low };
                    self.log.push_wall(WallEvent { t: self.now, i: i as Label + 1, axis, side })?;
                }
                self.stamp[i] += 1;
                self.schedule(i, None);
                StepOutcome::Wall
            }
            Kind::Cell { axis, up } => {
                self.sync(i);
                let old = self.flat(&self.cell_of[i]);
                let a = axis as usize;
                if up {
                    self.cell_of[i][a] += 1;
                } else {
                    self.cell_of[i][a] -= 1;
                }
                let new = self.flat(&self.cell_of[i]);
                let slot = self.cells[old].iter().position(|&k| k as usize == i).expect("cell membership");
                self.cells[old].swap_remove(slot);
                self.cells[new].push(i as u32);
                self.crossings += 1;
                self.stamp[i] += 1;
                self.schedule(i, None);
                StepOutcome::CellCrossing
            }
        };
        self.compact();
        Ok(outcome)
    }

    fn execute_pair(&mut self, i: usize, j: usize) -> Result<()> {
        self.sync(i);
        self.sync(j);
        let dx: [f64; 3] = std::array::from_fn(|a| self.x[j][a] - self.x[i][a]);
        let dist = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
        if dist < self.eps - OVERLAP_TOLERANCE {
            return Err(Error::Fault {
                time: self.now,
                reason: format!("particles {} and {} overlap by {:e}", i + 1, j + 1, self.eps - dist),
            });
        }
        if dist > self.eps + CONTACT_SLACK {
            return Err(Error::Fault {
                time: self.now,
                reason: format!("particles {} and {} missed contact by {:e}", i + 1, j + 1, dist - self.eps),
            });
        }
        let omega: [f64; 3] = std::array::from_fn(|a| dx[a] / dist);
        let along: f64 = (0..3).map(|a| (self.v[i][a] - self.v[j][a]) * omega[a]).sum();
        if along > 0.0 {
            if dist != self.eps {
                let shift = 0.5 * (self.eps - dist);
                for a in 0..self.dim {
                    self.x[i][a] -= omega[a] * shift;
                    self.x[j][a] += omega[a] * shift;
                }
            }
            let (lo, hi) = self.v.split_at_mut(j);
            apply_collision(&mut lo[i], &mut hi[0], &omega);
            self.pair_events += 1;
            self.log.push_pair(PairEvent { t: self.now, i: i as Label + 1, j: j as Label + 1, omega: Some(omega) })?;
        }
        self.stamp[i] += 1;
        self.stamp[j] += 1;
        self.schedule(i, Some(j));
        self.schedule(j, Some(i));
        Ok(())
    }

    /// Runs to `horizon`, or stops right after the pair collision that
    /// brings the total to `max_pairs`.
    pub fn run_until(&mut self, horizon: f64, max_pairs: Option<u64>) -> Result<()> {
        if horizon < self.now {
            return Err(Error::InvalidArgument(format!("horizon {horizon} before current time {}", self.now)));
        }
        loop {
            if max_pairs.is_some_and(|cap| self.pair_events >= cap) {
                return Ok(());
            }
            if self.step(horizon)? == StepOutcome::Horizon {
                self.now = horizon;
                return Ok(());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{run, sample_initial, MdConfig};
    use super::*;

    fn particle(id: Label, x: [f64; 2], v: [f64; 2]) -> ParticleState {
        ParticleState { id, x: [x[0], x[1], 0.0], v: [v[0], v[1], 0.0] }
    }

    #[test]
    fn head_on_pair_collides_once_then_hits_walls() {
        let states = vec![particle(1, [0.25, 0.5], [1.0, 0.0]), particle(2, [0.75, 0.5], [-1.0, 0.0])];
        let mut sim = Simulation::new(0.1, 2, states).unwrap();
        sim.run_until(0.3, None).unwrap();
        let log = sim.log();
        assert_eq!(log.pairs().len(), 1);
        let e = log.pairs()[0];
        assert!((e.t - 0.2).abs() < 1e-14);
        assert_eq!((e.i, e.j), (1, 2));
        assert_eq!(e.omega.unwrap(), [1.0, 0.0, 0.0]);
        let s = sim.states();
        assert!((s[0].v[0] + 1.0).abs() < 1e-15 && (s[1].v[0] - 1.0).abs() < 1e-15);
        // walls reflect at 0.05 and 0.95, 0.4 after the contact
        sim.run_until(0.7, None).unwrap();
        assert_eq!(sim.wall_events(), 2);
        assert!((sim.log().walls()[0].t - 0.6).abs() < 1e-14);
    }

    #[test]
    fn wall_bounce_geometry() {
        let states = vec![particle(1, [0.5, 0.5], [0.0, 2.0])];
        let mut sim = Simulation::new(0.02, 2, states).unwrap();
        sim.run_until(1.0, None).unwrap();
        let walls = sim.log().walls();
        assert!((walls[0].t - 0.245).abs() < 1e-14);
        assert_eq!((walls[0].axis, walls[0].side), (1, Side::High));
        assert!((walls[1].t - 0.735).abs() < 1e-14);
        assert_eq!(walls[1].side, Side::Low);
        let s = sim.states();
        assert!((s[0].x[1] - 0.54).abs() < 1e-12);
    }

    #[test]
    fn energy_and_separation_in_dense_small_box() {
        let mut cfg = MdConfig::new(200, 0.02, 2, 11, 5.0);
        cfg.enforce_kinetic_regime = false;
        let states = sample_initial(&cfg).unwrap();
        let mut sim = Simulation::new(cfg.epsilon, 2, states).unwrap();
        let e0 = sim.kinetic_energy();
        let p0 = sim.momentum();
        let mut prev = 0.0;
        while sim.time() < cfg.t_end {
            let next = (prev + 0.25f64).min(cfg.t_end);
            sim.run_until(next, None).unwrap();
            assert!(sim.min_separation() >= cfg.epsilon - OVERLAP_TOLERANCE);
            prev = next;
        }
        assert!(sim.pair_events() > 500);
        assert!(((sim.kinetic_energy() - e0) / e0).abs() < 1e-12);
        // walls change momentum; pairs alone cannot
        let _ = p0;
        let times: Vec<f64> = sim.log().pairs().iter().map(|e| e.t).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pair_updates_conserve_momentum() {
        let mut cfg = MdConfig::new(100, 0.02, 3, 4, 2.0);
        cfg.enforce_kinetic_regime = false;
        let states = sample_initial(&cfg).unwrap();
        let mut sim = Simulation::new(cfg.epsilon, 3, states).unwrap();
        sim.set_log_walls(false);
        loop {
            let p0 = sim.momentum();
            match sim.step(cfg.t_end).unwrap() {
                StepOutcome::Pair => {
                    let p1 = sim.momentum();
                    assert!((0..3).all(|a| (p1[a] - p0[a]).abs() < 1e-13));
                }
                StepOutcome::Horizon => break,
                _ => {}
            }
        }
        assert!(sim.pair_events() > 10);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = MdConfig::new(300, 3e-3, 2, 21, 2.0);
        cfg.max_pair_events = Some(400);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.final_states, b.final_states);
        assert_eq!(a.log.pairs().len(), 400);
        assert_eq!(a.final_time, a.log.pairs()[399].t);
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let mut cfg = MdConfig::new(40, 0.03, 2, 8, 0.6);
        cfg.enforce_kinetic_regime = false;
        let initial = sample_initial(&cfg).unwrap();
        let mut forward = Simulation::new(cfg.epsilon, 2, initial.clone()).unwrap();
        forward.run_until(cfg.t_end, None).unwrap();
        assert!(forward.pair_events() >= 3);
        let reversed: Vec<_> = forward
            .states()
            .into_iter()
            .map(|mut s| {
                s.v.iter_mut().for_each(|c| *c = -*c);
                s
            })
            .collect();
        let mut back = Simulation::new(cfg.epsilon, 2, reversed).unwrap();
        back.run_until(cfg.t_end, None).unwrap();
        assert_eq!(back.pair_events(), forward.pair_events());
        for (s, s0) in back.states().iter().zip(&initial) {
            for a in 0..2 {
                assert!((s.x[a] - s0.x[a]).abs() < 1e-8);
                assert!((s.v[a] + s0.v[a]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_overlapping_input() {
        let states = vec![particle(1, [0.5, 0.5], [0.0, 0.0]), particle(2, [0.55, 0.5], [0.0, 0.0])];
        assert!(Simulation::new(0.1, 2, states).is_err());
        let bad_label = vec![particle(2, [0.5, 0.5], [0.0, 0.0])];
        assert!(Simulation::new(0.1, 2, bad_label).is_err());
    }
}
