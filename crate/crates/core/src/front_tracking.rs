//! Event-driven front tracking for the two-material Euler system, with
//! conservative resampling onto a fixed mesh.
//!
//! Fronts live in an arena-backed doubly linked list. Each node stores the
//! state to its right; the state left of the first front is kept separately.
//! Pairwise collision times and boundary exits go into a min-heap and are
//! invalidated lazily through per-slot generation counters.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::eos::{EosParams, FullState, PhaseState};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::riemann::{self, RiemannSolution, Side, WaveKind};

const NIL: u32 = u32::MAX;

/// Relative position tolerance for grouping fronts into one collision.
const CLUSTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontKind {
    Shock,
    Contact,
    MaterialInterface,
    FanMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    One,
    Contact,
    Three,
}

/// A front at the configuration's current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Front {
    pub position: f64,
    pub speed: f64,
    pub left: FullState,
    pub right: FullState,
    pub kind: FrontKind,
    pub family: Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum StepMode {
    Cfl { cfl: f64 },
    Equispaced { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtConfig {
    /// Fan resolution for phase 1 and phase 2.
    pub delta: [f64; 2],
    pub step: StepMode,
    #[serde(default = "default_min_strength")]
    pub min_strength: f64,
    #[serde(default = "default_budget")]
    pub collision_budget: u64,
}

fn default_min_strength() -> f64 {
    1e-11
}

fn default_budget() -> u64 {
    10_000_000
}

impl FtConfig {
    pub fn new(delta: [f64; 2], step: StepMode) -> Self {
        Self {
            delta,
            step,
            min_strength: default_min_strength(),
            collision_budget: default_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta[0] > 0.0 && self.delta[1] > 0.0) {
            return Err(Error::Config(format!(
                "fan resolution must be positive, got {:?}",
                self.delta
            )));
        }
        match self.step {
            StepMode::Cfl { cfl } if !(cfl > 0.0 && cfl <= 1.0) => {
                Err(Error::Config(format!("CFL number {cfl} outside (0, 1]")))
            }
            StepMode::Equispaced { steps: 0 } => Err(Error::Config("zero resampling steps".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    x0: f64,
    t0: f64,
    speed: f64,
    kind: FrontKind,
    family: Family,
    right: FullState,
    prev: u32,
    next: u32,
    gen: u32,
    alive: bool,
}

impl Node {
    fn pos(&self, t: f64) -> f64 {
        self.x0 + self.speed * (t - self.t0)
    }
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Collision { a: u32, ga: u32, b: u32, gb: u32 },
    ExitLeft { a: u32, ga: u32 },
    ExitRight { a: u32, ga: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    x: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so the max-heap pops the earliest, then leftmost, event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.x.total_cmp(&self.x))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Wave emitted by a Riemann solution: speed, kind, family, right state.
type Wave = (f64, FrontKind, Family, FullState);

/// Sorted fronts on a bounded domain with transmissive boundaries.
#[derive(Debug, Clone)]
pub struct FrontConfiguration {
    nodes: Vec<Node>,
    free: Vec<u32>,
    head: u32,
    tail: u32,
    len: usize,
    left_end: FullState,
    time: f64,
    lo: f64,
    hi: f64,
    phases: [EosParams; 2],
    collisions: u64,
    inflow: [[f64; 3]; 2],
    inflow_time: f64,
}

impl FrontConfiguration {
    /// Fronts generated from piecewise-constant data: `states[j]` holds on
    /// `[edges[j], edges[j+1]]`. A Riemann problem is solved at every edge
    /// with a state jump.
    pub fn from_pieces(
        edges: &[f64],
        states: &[FullState],
        phases: [EosParams; 2],
        ft: &FtConfig,
        time: f64,
    ) -> Result<Self> {
        assert_eq!(edges.len(), states.len() + 1);
        let mut cfg = FrontConfiguration {
            nodes: Vec::new(),
            free: Vec::new(),
            head: NIL,
            tail: NIL,
            len: 0,
            left_end: states[0],
            time,
            lo: edges[0],
            hi: edges[edges.len() - 1],
            phases,
            collisions: 0,
            inflow: [[0.0; 3]; 2],
            inflow_time: time,
        };
        let mut waves = Vec::new();
        for j in 1..states.len() {
            if states[j - 1].bit_eq(&states[j]) {
                continue;
            }
            let sol = riemann::solve(&states[j - 1], &states[j])?;
            waves.clear();
            cfg.emit(&sol, ft, &mut waves);
            let after = cfg.tail;
            cfg.insert_after(after, NIL, edges[j], time, &waves);
        }
        Ok(cfg)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn phases(&self) -> [EosParams; 2] {
        self.phases
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of wave interactions resolved so far.
    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn phase_of(&self, params: &EosParams) -> usize {
        if params.same_phase(&self.phases[1]) && !params.same_phase(&self.phases[0]) {
            1
        } else {
            0
        }
    }

    /// Time-integrated boundary inflow `int F(left) - F(right) dt` of mass,
    /// momentum and energy, split by phase.
    pub fn inflow(&self) -> [[f64; 3]; 2] {
        self.inflow
    }

    pub fn left_end(&self) -> FullState {
        self.left_end
    }

    pub fn right_end(&self) -> FullState {
        if self.tail == NIL {
            self.left_end
        } else {
            self.nodes[self.tail as usize].right
        }
    }

    pub fn fronts(&self) -> Vec<Front> {
        let mut out = Vec::with_capacity(self.len);
        let mut left = self.left_end;
        let mut id = self.head;
        while id != NIL {
            let n = &self.nodes[id as usize];
            out.push(Front {
                position: n.pos(self.time),
                speed: n.speed,
                left,
                right: n.right,
                kind: n.kind,
                family: n.family,
            });
            left = n.right;
            id = n.next;
        }
        out
    }

    /// Constant pieces `(a, b, state)` covering the domain at the current
    /// time; front positions are clamped into the domain and kept monotone.
    pub fn pieces(&self) -> Vec<(f64, f64, FullState)> {
        let mut out = Vec::with_capacity(self.len + 1);
        let mut a = self.lo;
        let mut state = self.left_end;
        let mut id = self.head;
        while id != NIL {
            let n = &self.nodes[id as usize];
            let x = n.pos(self.time).clamp(a, self.hi);
            out.push((a, x, state));
            a = x;
            state = n.right;
            id = n.next;
        }
        out.push((a, self.hi, state));
        out
    }

    /// Domain integrals of mass, momentum and energy per phase.
    pub fn totals(&self) -> [[f64; 3]; 2] {
        let mut tot = [[0.0; 3]; 2];
        for (a, b, w) in self.pieces() {
            let k = self.phase_of(&w.params);
            let u = w.conserved();
            tot[k][0] += (b - a) * u.rho;
            tot[k][1] += (b - a) * u.mom;
            tot[k][2] += (b - a) * u.ener;
        }
        tot
    }

    /// Largest `|u| + a` over all constant pieces.
    pub fn max_signal_speed(&self) -> f64 {
        let mut s = self.left_end.state.u.abs() + self.left_end.sound_speed();
        let mut id = self.head;
        while id != NIL {
            let n = &self.nodes[id as usize];
            s = s.max(n.right.state.u.abs() + n.right.sound_speed());
            id = n.next;
        }
        s
    }

    fn delta_for(&self, params: &EosParams, ft: &FtConfig) -> f64 {
        ft.delta[self.phase_of(params)]
    }

    fn emit(&self, sol: &RiemannSolution, ft: &FtConfig, out: &mut Vec<Wave>) {
        let min = ft.min_strength;
        let left_star = sol.star_left();
        let right_star = sol.star_right();
        let no_left_wave = sol.p_star == sol.left.state.p && sol.u_star == sol.left.state.u;
        let no_right_wave = sol.p_star == sol.right.state.p && sol.u_star == sol.right.state.u;

        if !no_left_wave {
            match sol.left_wave {
                WaveKind::Shock => {
                    if riemann::pressure_jump(&sol.left, &left_star) >= min {
                        out.push((sol.left_speeds.0, FrontKind::Shock, Family::One, left_star));
                    }
                }
                WaveKind::Rarefaction => {
                    let d = self.delta_for(&sol.left.params, ft);
                    fan(sol, Side::Left, &sol.left, &left_star, d, min, out);
                }
            }
        }

        if !sol.left.params.same_phase(&sol.right.params) {
            out.push((
                sol.u_star,
                FrontKind::MaterialInterface,
                Family::Contact,
                right_star,
            ));
        } else {
            let jump = (sol.rho_star_left - sol.rho_star_right).abs()
                / sol.rho_star_left.max(sol.rho_star_right);
            if jump >= min {
                out.push((sol.u_star, FrontKind::Contact, Family::Contact, right_star));
            }
        }

        if !no_right_wave {
            match sol.right_wave {
                WaveKind::Shock => {
                    if riemann::pressure_jump(&right_star, &sol.right) >= min {
                        out.push((
                            sol.right_speeds.1,
                            FrontKind::Shock,
                            Family::Three,
                            sol.right,
                        ));
                    }
                }
                WaveKind::Rarefaction => {
                    let d = self.delta_for(&sol.right.params, ft);
                    fan(sol, Side::Right, &right_star, &sol.right, d, min, out);
                }
            }
        }

        if let Some(last) = out.last_mut() {
            last.3 = sol.right;
        }
    }

    fn alloc(&mut self, node: Node) -> u32 {
        if let Some(id) = self.free.pop() {
            let gen = self.nodes[id as usize].gen.wrapping_add(1);
            self.nodes[id as usize] = Node { gen, ..node };
            id
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn release(&mut self, id: u32) {
        self.nodes[id as usize].alive = false;
        self.free.push(id);
        self.len -= 1;
    }

    /// Link new fronts starting at `(x, t)` between `prev` and `next`;
    /// returns the first and last inserted ids, or `None` if `waves` is empty.
    fn insert_after(
        &mut self,
        prev: u32,
        next: u32,
        x: f64,
        t: f64,
        waves: &[Wave],
    ) -> Option<(u32, u32)> {
        let mut first = NIL;
        let mut last = prev;
        for &(speed, kind, family, right) in waves {
            let id = self.alloc(Node {
                x0: x,
                t0: t,
                speed,
                kind,
                family,
                right,
                prev: last,
                next: NIL,
                gen: 0,
                alive: true,
            });
            if last == NIL {
                self.head = id;
            } else {
                self.nodes[last as usize].next = id;
            }
            if first == NIL {
                first = id;
            }
            last = id;
            self.len += 1;
        }
        if first == NIL {
            // nothing inserted: relink prev and next directly
            self.link(prev, next);
            return None;
        }
        self.link(last, next);
        Some((first, last))
    }

    fn link(&mut self, a: u32, b: u32) {
        if a == NIL {
            self.head = b;
        } else {
            self.nodes[a as usize].next = b;
        }
        if b == NIL {
            self.tail = a;
        } else {
            self.nodes[b as usize].prev = a;
        }
    }

    fn left_state_of(&self, id: u32) -> FullState {
        let p = self.nodes[id as usize].prev;
        if p == NIL {
            self.left_end
        } else {
            self.nodes[p as usize].right
        }
    }

    fn accumulate_inflow(&mut self, t: f64) {
        let dt = t - self.inflow_time;
        if dt > 0.0 {
            let l = self.left_end;
            let r = self.right_end();
            let (kl, kr) = (self.phase_of(&l.params), self.phase_of(&r.params));
            let (fl, fr) = (l.flux(), r.flux());
            for c in 0..3 {
                self.inflow[kl][c] += dt * fl[c];
                self.inflow[kr][c] -= dt * fr[c];
            }
        }
        self.inflow_time = t;
    }

    fn schedule_pair(&self, heap: &mut BinaryHeap<Event>, seq: &mut u64, a: u32, b: u32, t: f64) {
        if a == NIL || b == NIL {
            return;
        }
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        if na.speed <= nb.speed {
            return;
        }
        let gap = (nb.pos(t) - na.pos(t)).max(0.0);
        let tc = t + gap / (na.speed - nb.speed);
        let x = 0.5 * (na.pos(tc) + nb.pos(tc));
        *seq += 1;
        heap.push(Event {
            t: tc,
            x,
            seq: *seq,
            kind: EventKind::Collision {
                a,
                ga: na.gen,
                b,
                gb: nb.gen,
            },
        });
    }

    fn schedule_exits(&self, heap: &mut BinaryHeap<Event>, seq: &mut u64, t: f64) {
        if self.head != NIL {
            let n = &self.nodes[self.head as usize];
            if n.speed < 0.0 {
                let te = t + ((self.lo - n.pos(t)) / n.speed).max(0.0);
                *seq += 1;
                heap.push(Event {
                    t: te,
                    x: self.lo,
                    seq: *seq,
                    kind: EventKind::ExitLeft {
                        a: self.head,
                        ga: n.gen,
                    },
                });
            }
        }
        if self.tail != NIL {
            let n = &self.nodes[self.tail as usize];
            if n.speed > 0.0 {
                let te = t + ((self.hi - n.pos(t)) / n.speed).max(0.0);
                *seq += 1;
                heap.push(Event {
                    t: te,
                    x: self.hi,
                    seq: *seq,
                    kind: EventKind::ExitRight {
                        a: self.tail,
                        ga: n.gen,
                    },
                });
            }
        }
    }

    fn valid(&self, id: u32, gen: u32) -> bool {
        let n = &self.nodes[id as usize];
        n.alive && n.gen == gen
    }

    /// Resolve all interactions up to `t_out` and advance the clock.
    pub fn evolve(&mut self, t_out: f64, ft: &FtConfig) -> Result<()> {
        assert!(t_out >= self.time, "cannot evolve backwards");
        let mut heap = BinaryHeap::with_capacity(self.len + 2);
        let mut seq = 0u64;
        let t0 = self.time;
        let mut id = self.head;
        while id != NIL {
            let next = self.nodes[id as usize].next;
            self.schedule_pair(&mut heap, &mut seq, id, next, t0);
            id = next;
        }
        self.schedule_exits(&mut heap, &mut seq, t0);

        let mut waves = Vec::new();
        while let Some(ev) = heap.pop() {
            if ev.t > t_out {
                break;
            }
            match ev.kind {
                EventKind::Collision { a, ga, b, gb } => {
                    if !self.valid(a, ga) || !self.valid(b, gb) || self.nodes[a as usize].next != b
                    {
                        continue;
                    }
                    self.collisions += 1;
                    if self.collisions > ft.collision_budget {
                        return Err(Error::CollisionCascade {
                            budget: ft.collision_budget,
                            time: ev.t,
                        });
                    }
                    self.resolve_cluster(a, b, ev.t, ev.x, ft, &mut waves, &mut heap, &mut seq)?;
                }
                EventKind::ExitLeft { a, ga } => {
                    if !self.valid(a, ga) || self.nodes[a as usize].prev != NIL {
                        continue;
                    }
                    self.accumulate_inflow(ev.t);
                    self.left_end = self.nodes[a as usize].right;
                    let next = self.nodes[a as usize].next;
                    self.release(a);
                    self.link(NIL, next);
                    self.schedule_exits(&mut heap, &mut seq, ev.t);
                }
                EventKind::ExitRight { a, ga } => {
                    if !self.valid(a, ga) || self.nodes[a as usize].next != NIL {
                        continue;
                    }
                    self.accumulate_inflow(ev.t);
                    let prev = self.nodes[a as usize].prev;
                    self.release(a);
                    self.link(prev, NIL);
                    self.schedule_exits(&mut heap, &mut seq, ev.t);
                }
            }
        }
        self.accumulate_inflow(t_out);
        self.time = t_out;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve_cluster(
        &mut self,
        a: u32,
        b: u32,
        t: f64,
        x: f64,
        ft: &FtConfig,
        waves: &mut Vec<Wave>,
        heap: &mut BinaryHeap<Event>,
        seq: &mut u64,
    ) -> Result<()> {
        let tol = CLUSTER_TOL * (self.hi - self.lo).max(x.abs());
        let mut first = a;
        let mut last = b;
        loop {
            let p = self.nodes[first as usize].prev;
            if p != NIL && (self.nodes[p as usize].pos(t) - x).abs() <= tol {
                first = p;
            } else {
                break;
            }
        }
        loop {
            let n = self.nodes[last as usize].next;
            if n != NIL && (self.nodes[n as usize].pos(t) - x).abs() <= tol {
                last = n;
            } else {
                break;
            }
        }
        let prev = self.nodes[first as usize].prev;
        let next = self.nodes[last as usize].next;
        let touches_boundary = prev == NIL || next == NIL;
        if touches_boundary {
            self.accumulate_inflow(t);
        }

        let ul = self.left_state_of(first);
        let ur = self.nodes[last as usize].right;
        let mut id = first;
        loop {
            let nx = self.nodes[id as usize].next;
            self.release(id);
            if id == last {
                break;
            }
            id = nx;
        }

        waves.clear();
        if !ul.bit_eq(&ur) {
            let sol = riemann::solve(&ul, &ur)?;
            self.emit(&sol, ft, waves);
        }
        let x = x.clamp(self.lo, self.hi);
        match self.insert_after(prev, next, x, t, waves) {
            Some((f, l)) => {
                self.schedule_pair(heap, seq, prev, f, t);
                self.schedule_pair(heap, seq, l, next, t);
            }
            None => self.schedule_pair(heap, seq, prev, next, t),
        }
        if touches_boundary {
            self.schedule_exits(heap, seq, t);
        }
        Ok(())
    }

    /// Project onto `mesh` and regenerate fronts from the projected data.
    pub fn resample(
        &self,
        mesh: &Mesh,
        ft: &FtConfig,
    ) -> Result<(CellAverages, FrontConfiguration)> {
        let avg = self.project(mesh)?;
        let pieces = self.pieces();
        let mut edges = vec![self.lo];
        let mut states: Vec<FullState> = Vec::new();
        let mut push = |end: f64, w: FullState| {
            if let Some(last) = states.last() {
                if last.bit_eq(&w) {
                    *edges.last_mut().unwrap() = end;
                    return;
                }
            }
            states.push(w);
            edges.push(end);
        };
        let mut cell = 0;
        for (a, b, w) in pieces {
            if b <= a {
                continue;
            }
            let k = self.phase_of(&w.params);
            cell = cell.max(mesh.cell_of(a));
            loop {
                let (ea, eb) = (mesh.edge(cell), mesh.edge(cell + 1));
                let end = b.min(eb);
                if end > a.max(ea) {
                    push(end, avg.states[cell][k].expect("phase present in cell"));
                }
                if b <= eb || cell + 1 >= mesh.cells {
                    break;
                }
                cell += 1;
            }
        }
        *edges.last_mut().unwrap() = self.hi;
        let mut cfg = FrontConfiguration::from_pieces(&edges, &states, self.phases, ft, self.time)?;
        cfg.collisions = self.collisions;
        cfg.inflow = self.inflow;
        Ok((avg, cfg))
    }

    /// Per-cell, per-phase averages of the current solution.
    pub fn project(&self, mesh: &Mesh) -> Result<CellAverages> {
        let m = mesh.cells;
        let mut len = vec![[0.0f64; 2]; m];
        let mut int = vec![[[0.0f64; 3]; 2]; m];
        // single contributing state, kept to avoid round-off in uniform cells
        let mut unique: Vec<[Option<FullState>; 2]> = vec![[None; 2]; m];
        let mut mixed = vec![[false; 2]; m];
        let mut cell = 0;
        for (a, b, w) in self.pieces() {
            if b <= a {
                continue;
            }
            let k = self.phase_of(&w.params);
            let u = w.conserved();
            cell = cell.max(mesh.cell_of(a));
            loop {
                let (ea, eb) = (mesh.edge(cell), mesh.edge(cell + 1));
                let l = b.min(eb) - a.max(ea);
                if l > 0.0 {
                    len[cell][k] += l;
                    int[cell][k][0] += l * u.rho;
                    int[cell][k][1] += l * u.mom;
                    int[cell][k][2] += l * u.ener;
                    match unique[cell][k] {
                        None => unique[cell][k] = Some(w),
                        Some(s) if s.bit_eq(&w) => {}
                        Some(_) => mixed[cell][k] = true,
                    }
                }
                if b <= eb || cell + 1 >= m {
                    break;
                }
                cell += 1;
            }
        }
        let dx = mesh.dx();
        let mut out = CellAverages {
            alpha: vec![[0.0; 2]; m],
            states: vec![[None; 2]; m],
            integrals: vec![[[0.0; 3]; 2]; m],
        };
        for i in 0..m {
            let total = len[i][0] + len[i][1];
            for k in 0..2 {
                if len[i][k] <= 0.0 {
                    continue;
                }
                out.alpha[i][k] = len[i][k] / total;
                for c in 0..3 {
                    out.integrals[i][k][c] = int[i][k][c] / dx;
                }
                let state = if mixed[i][k] {
                    let params = unique[i][k].unwrap().params;
                    let rho = int[i][k][0] / len[i][k];
                    let u = int[i][k][1] / int[i][k][0];
                    let e = int[i][k][2] / int[i][k][0] - 0.5 * u * u;
                    let p =
                        params
                            .pressure_from_energy(rho, e)
                            .map_err(|err| Error::Positivity {
                                cell: i,
                                detail: err.to_string(),
                            })?;
                    FullState::new(PhaseState::new(rho, u, p), params)
                } else {
                    unique[i][k].unwrap()
                };
                out.states[i][k] = Some(state);
            }
            // exact saturation
            if out.alpha[i][0] > 0.0 && out.alpha[i][1] > 0.0 {
                out.alpha[i][1] = 1.0 - out.alpha[i][0];
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "time,position,speed,kind,family,rho_l,u_l,p_l,rho_r,u_r,p_r"
        )?;
        for f in self.fronts() {
            writeln!(
                w,
                "{},{},{},{:?},{:?},{},{},{},{},{},{}",
                self.time,
                f.position,
                f.speed,
                f.kind,
                f.family,
                f.left.state.rho,
                f.left.state.u,
                f.left.state.p,
                f.right.state.rho,
                f.right.state.u,
                f.right.state.p
            )?;
        }
        Ok(())
    }
}

/// Split a rarefaction from `from` to `to` (ordered left to right in space)
/// into members of equal shifted-pressure steps.
fn fan(
    sol: &RiemannSolution,
    side: Side,
    from: &FullState,
    to: &FullState,
    delta: f64,
    min: f64,
    out: &mut Vec<Wave>,
) {
    let pa = from.state.p + from.params.pi;
    let pb = to.state.p + to.params.pi;
    let strength = (pa - pb).abs() / pa.max(pb);
    if strength < min {
        return;
    }
    let n = (strength / delta).ceil().max(1.0) as usize;
    let pi = from.params.pi;
    let mut left = *from;
    for j in 1..=n {
        let right = if j == n {
            *to
        } else {
            let ph = pa + (pb - pa) * j as f64 / n as f64;
            sol.rarefaction_state(side, ph - pi)
        };
        let speed = match side {
            Side::Left => left.state.u - left.sound_speed(),
            Side::Right => left.state.u + left.sound_speed(),
        };
        out.push((
            speed,
            FrontKind::FanMember,
            if side == Side::Left {
                Family::One
            } else {
                Family::Three
            },
            right,
        ));
        left = right;
    }
}

/// Per-cell, per-phase projection of a front configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverages {
    /// Realized volume fraction of each phase.
    pub alpha: Vec<[f64; 2]>,
    /// Averaged phase state; `None` where the phase is absent.
    pub states: Vec<[Option<FullState>; 2]>,
    /// Indicator-weighted cell averages of mass, momentum and energy.
    pub integrals: Vec<[[f64; 3]; 2]>,
}

/// Next time step, clamped so that `t + dt` never passes `t_end`.
pub fn stepper(
    cfg: &FrontConfiguration,
    t: f64,
    t_end: f64,
    total: f64,
    mesh: &Mesh,
    ft: &FtConfig,
) -> f64 {
    let dt = match ft.step {
        StepMode::Equispaced { steps } => total / steps as f64,
        StepMode::Cfl { cfl } => cfl * mesh.dx() / cfg.max_signal_speed(),
    };
    let remaining = t_end - t;
    // absorb a last sliver into the current step
    if dt >= remaining || remaining - dt <= 1e-12 * total {
        remaining
    } else {
        dt
    }
}

/// Evolve piecewise-constant data with resampling after every step,
/// reporting the projection at each of `outputs` (sorted, within `[0, T]`)
/// and after every step.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    edges: &[f64],
    states: &[FullState],
    phases: [EosParams; 2],
    mesh: &Mesh,
    ft: &FtConfig,
    outputs: &[f64],
    mut on_output: impl FnMut(usize, &CellAverages, &FrontConfiguration),
    mut on_step: impl FnMut(f64, &CellAverages),
) -> Result<FrontConfiguration> {
    let t_end = outputs.last().copied().unwrap_or(0.0);
    let mut cfg = FrontConfiguration::from_pieces(edges, states, phases, ft, 0.0)?;
    let mut t = 0.0;
    for (o, &t_out) in outputs.iter().enumerate() {
        if t_out <= t {
            let avg = cfg.project(mesh)?;
            on_output(o, &avg, &cfg);
            continue;
        }
        let mut last = None;
        while t < t_out {
            let dt = stepper(&cfg, t, t_out, t_end, mesh, ft);
            let t_next = if t_out - (t + dt) <= 0.0 {
                t_out
            } else {
                t + dt
            };
            cfg.evolve(t_next, ft)?;
            let (avg, next) = cfg.resample(mesh, ft)?;
            on_step(t_next, &avg);
            cfg = next;
            t = t_next;
            last = Some(avg);
        }
        on_output(o, last.as_ref().unwrap(), &cfg);
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ig(g: f64, rho: f64, u: f64, p: f64) -> FullState {
        FullState::new(PhaseState::new(rho, u, p), EosParams::ideal_gas(g))
    }

    fn phases() -> [EosParams; 2] {
        [EosParams::ideal_gas(1.4), EosParams::ideal_gas(1.6)]
    }

    fn ft(delta: f64) -> FtConfig {
        FtConfig::new([delta, delta], StepMode::Cfl { cfl: 0.9 })
    }

    #[test]
    fn uniform_data_has_no_fronts() {
        let w = ig(1.4, 1.0, 0.3, 1.0);
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[w, w], phases(), &ft(0.05), 0.0)
                .unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn single_contact_advects() {
        let l = ig(1.4, 1.0, 0.9, 0.3);
        let r = ig(1.6, 0.125, 0.9, 0.3);
        let mut c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[l, r], phases(), &ft(0.05), 0.0)
                .unwrap();
        assert_eq!(c.len(), 1);
        let f = c.fronts()[0];
        assert_eq!(f.kind, FrontKind::MaterialInterface);
        assert_eq!(f.speed, 0.9);
        c.evolve(0.1, &ft(0.05)).unwrap();
        assert_relative_eq!(c.fronts()[0].position, 0.09, max_relative = 1e-14);
    }

    #[test]
    fn sod_fan_count() {
        let l = ig(1.4, 1.0, 0.0, 1.0);
        let r = ig(1.4, 0.125, 0.0, 0.1);
        let delta = 0.05;
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[l, r], phases(), &ft(delta), 0.0)
                .unwrap();
        let sol = riemann::solve(&l, &r).unwrap();
        let strength = (1.0 - sol.p_star) / 1.0;
        let members = (strength / delta).ceil() as usize;
        let fr = c.fronts();
        assert_eq!(
            fr.iter().filter(|f| f.kind == FrontKind::FanMember).count(),
            members
        );
        assert_eq!(fr.len(), members + 2);
        assert!(fr.windows(2).all(|w| w[0].speed <= w[1].speed));
        assert_eq!(fr.last().unwrap().right, r);
    }

    #[test]
    fn resample_without_fronts() {
        let w = ig(1.4, 1.0, 0.3, 1.0);
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 1.0], &[w], phases(), &ft(0.05), 0.0).unwrap();
        let mesh = Mesh::new(-1.0, 1.0, 8).unwrap();
        let (avg, next) = c.resample(&mesh, &ft(0.05)).unwrap();
        assert!(next.is_empty());
        assert!(avg.states.iter().all(|s| s[0] == Some(w) && s[1].is_none()));
    }

    #[test]
    fn resample_interface_keeps_phase_densities() {
        let l = ig(1.4, 1.0, 0.9, 0.3);
        let r = ig(1.6, 0.125, 0.9, 0.3);
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 0.1, 1.0], &[l, r], phases(), &ft(0.05), 0.0)
                .unwrap();
        let mesh = Mesh::new(-1.0, 1.0, 4).unwrap();
        let (avg, next) = c.resample(&mesh, &ft(0.05)).unwrap();
        assert_eq!(avg.states[2][0], Some(l));
        assert_eq!(avg.states[2][1], Some(r));
        assert_relative_eq!(avg.alpha[2][0], 0.2, max_relative = 1e-12);
        assert_eq!(next.len(), 1);
        assert_relative_eq!(next.fronts()[0].position, 0.1, max_relative = 1e-15);
    }

    #[test]
    fn resample_conserves_fan() {
        let l = ig(1.4, 1.0, 0.0, 1.0);
        let r = ig(1.4, 0.125, 0.0, 0.1);
        let f = ft(0.02);
        let mut c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[l, r], phases(), &f, 0.0).unwrap();
        c.evolve(0.2, &f).unwrap();
        let before = c.totals();
        let mesh = Mesh::new(-1.0, 1.0, 37).unwrap();
        let (_, next) = c.resample(&mesh, &f).unwrap();
        let after = next.totals();
        for j in 0..3 {
            assert!((before[0][j] - after[0][j]).abs() <= 1e-12 * before[0][j].abs().max(1.0));
        }
    }

    #[test]
    fn colliding_shocks_match_riemann_solution() {
        let b = ig(1.4, 1.0, 0.0, 1.0);
        // states joined to b by a single shock each
        let a = riemann::solve(&ig(1.4, 1.0, 1.0, 1.0), &b)
            .unwrap()
            .star_left();
        let c_ = riemann::solve(&b, &ig(1.4, 1.0, -1.0, 1.0))
            .unwrap()
            .star_right();
        let f = ft(0.05);
        let mut c = FrontConfiguration::from_pieces(
            &[-1.0, -0.1, 0.1, 1.0],
            &[a, b, c_],
            phases(),
            &f,
            0.0,
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        let speeds: Vec<f64> = c.fronts().iter().map(|f| f.speed).collect();
        let t_hit = 0.2 / (speeds[0] - speeds[1]);
        c.evolve(t_hit * 1.5, &f).unwrap();
        assert_eq!(c.collisions(), 1);
        let fr = c.fronts();
        assert_eq!(fr[0].left, a);
        assert_eq!(fr.last().unwrap().right, c_);
        let oracle = riemann::solve(&a, &c_).unwrap();
        let shocks: Vec<&Front> = fr.iter().filter(|f| f.kind == FrontKind::Shock).collect();
        assert_eq!(shocks.len(), 2);
        assert_relative_eq!(shocks[0].right.state.p, oracle.p_star, max_relative = 1e-8);
        assert_relative_eq!(shocks[0].speed, oracle.left_speeds.0, max_relative = 1e-8);
        for f in shocks {
            let (ul, ur) = (f.left.conserved(), f.right.conserved());
            let (fl, frx) = (f.left.flux(), f.right.flux());
            let jumps = [(ul.rho, ur.rho), (ul.mom, ur.mom), (ul.ener, ur.ener)];
            for (c, (ql, qr)) in jumps.iter().enumerate() {
                let lhs = fl[c] - frx[c];
                let rhs = f.speed * (ql - qr);
                assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn waves_exit_through_boundaries() {
        let l = ig(1.4, 1.0, 0.0, 1.0);
        let r = ig(1.4, 0.125, 0.0, 0.1);
        let f = ft(0.1);
        let mut c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[l, r], phases(), &f, 0.0).unwrap();
        let t0 = c.totals();
        c.evolve(3.0, &f).unwrap();
        assert!(c
            .fronts()
            .iter()
            .all(|fr| fr.position >= -1.0 && fr.position <= 1.0));
        let t1 = c.totals();
        let inflow = c.inflow();
        // transmissive exits only, so totals follow the boundary fluxes up to
        // the fan approximation error
        for j in 0..3 {
            let drift = (t1[0][j] - t0[0][j] - inflow[0][j]).abs();
            assert!(drift < 5.0 * 0.1 * 3.0, "component {j}: {drift}");
        }
    }

    #[test]
    fn stepper_cases() {
        let w = ig(1.4, 1.0, 0.9, 0.3);
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 1.0], &[w], phases(), &ft(0.1), 0.0).unwrap();
        let mesh = Mesh::new(0.0, 0.2, 100).unwrap();
        let a = (1.4f64 * 0.3).sqrt();
        let dt = stepper(&c, 0.0, 1.0, 1.0, &mesh, &ft(0.1));
        assert_relative_eq!(dt, 0.9 * 0.002 / (0.9 + a), max_relative = 1e-14);
        assert_eq!(
            stepper(&c, 1.0 - 1e-6, 1.0, 1.0, &mesh, &ft(0.1)),
            1.0 - (1.0 - 1e-6)
        );
        let eq = FtConfig::new([0.1, 0.1], StepMode::Equispaced { steps: 100 });
        assert_relative_eq!(
            stepper(&c, 0.0, 0.1, 0.1, &mesh, &eq),
            0.001,
            max_relative = 1e-15
        );
    }

    #[test]
    fn deterministic_evolution() {
        let states = [
            ig(1.4, 1.0, 0.0, 1.0),
            ig(1.6, 0.3, 0.2, 0.4),
            ig(1.4, 0.125, -0.1, 0.1),
            ig(1.6, 1.0, 0.0, 2.0),
        ];
        let edges = [-1.0, -0.3, 0.05, 0.4, 1.0];
        let f = ft(0.05);
        let run = || {
            let mut c =
                FrontConfiguration::from_pieces(&edges, &states, phases(), &f, 0.0).unwrap();
            c.evolve(0.15, &f).unwrap();
            c.fronts()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn csv_dump_has_one_row_per_front() {
        let l = ig(1.4, 1.0, 0.0, 1.0);
        let r = ig(1.4, 0.125, 0.0, 0.1);
        let c =
            FrontConfiguration::from_pieces(&[-1.0, 0.0, 1.0], &[l, r], phases(), &ft(0.2), 0.0)
                .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), c.len() + 1);
    }
}
