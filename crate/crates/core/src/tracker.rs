//! Event-driven front tracking with fractional reaction steps at x = kh.

use serde::{Deserialize, Serialize};

use crate::curves::{eigenvalue, Family};
use crate::error::{domain, FlowError, Result};
use crate::gas::{flow_angles, reaction_rate, sound, temperature, FlowState, GasModel};
use crate::reaction::{reaction_step, ReactionStepReport};
use crate::riemann::{
    accurate_solver, close_fan, fan_from_solution, simplified_solver_interaction, simplified_solver_np_crossing,
    solve_riemann, turn_to_angle, FrontFan, RiemannSolution, WaveKind,
};
use crate::wall::WallMesh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveFront {
    pub id: u64,
    pub kind: WaveKind,
    /// Generation order; ν + 1 for non-physical fronts.
    pub order: u32,
    /// Anchor point and slope of the straight trajectory.
    pub x0: f64,
    pub y0: f64,
    pub slope: f64,
}

impl WaveFront {
    pub fn y_at(&self, x: f64) -> f64 {
        self.y0 + self.slope * (x - self.x0)
    }

    /// 1, 2 (contact), 5 or 6 (non-physical).
    pub fn class(&self) -> u8 {
        self.kind.class()
    }

    pub fn is_np(&self) -> bool {
        matches!(self.kind, WaveKind::NonPhysical { .. })
    }

    pub fn is_strong(&self) -> bool {
        matches!(self.kind, WaveKind::Nonlinear { family: Family::F5, alpha } if alpha > 0.0) && self.order == 1
    }

    pub fn magnitude(&self) -> f64 {
        self.kind.magnitude()
    }

    pub fn info(&self) -> FrontInfo {
        let signed = match self.kind {
            WaveKind::Nonlinear { alpha, .. } => alpha,
            WaveKind::Contact { s } => s.iter().sum(),
            WaveKind::NonPhysical { eps } => eps,
        };
        FrontInfo {
            id: self.id,
            class: self.class(),
            strength: signed,
            magnitude: self.magnitude(),
            order: self.order,
            slope: self.slope,
            strong: self.is_strong(),
        }
    }
}

/// Inflow band starting at `y` (the first band starts on the wall, the last is open upward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflowBand {
    pub y: f64,
    pub state: FlowState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Riemann components with magnitude at or below this are not emitted.
    pub drop: f64,
    /// State mismatch (relative to the reference scale) absorbed into the top state.
    pub absorb: f64,
    /// Non-physical fronts weaker than this (relative) are absorbed.
    pub np_absorb: f64,
    /// New components at a reaction line below this are folded into the continuing front.
    pub reaction_emit: f64,
    /// At a reaction line, adjacent non-physical fronts closer than this many h are merged
    /// into the lowest of them; 0 disables merging.
    pub np_merge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { drop: 1e-13, absorb: 1e-9, np_absorb: 1e-13, reaction_emit: 1e-10, np_merge: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackerParams {
    pub nu: usize,
    pub h: f64,
    pub seed: u64,
    pub lambda_hat: Option<f64>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationState {
    pub x: f64,
    /// Ordered bottom to top; front i separates `states[i]` (below) from `states[i + 1]`.
    pub fronts: Vec<WaveFront>,
    pub states: Vec<FlowState>,
    pub mesh: WallMesh,
    pub gas: GasModel,
    pub nu: usize,
    pub h: f64,
    pub seed: u64,
    pub lambda_hat: f64,
    pub tol: Tolerances,
    /// Next station index k (station x = kh); corners below it are processed.
    pub next_station: usize,
    /// sup of inflow Z.
    pub z_bar: f64,
    /// Reference magnitude for absolute tolerances.
    pub scale: f64,
    next_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    FrontFront,
    FrontWall,
    Corner,
    ReactionLine,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::FrontFront => "front-front",
            EventKind::FrontWall => "front-wall",
            EventKind::Corner => "corner",
            EventKind::ReactionLine => "reaction-line",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s {
            "front-front" => Some(EventKind::FrontFront),
            "front-wall" => Some(EventKind::FrontWall),
            "corner" => Some(EventKind::Corner),
            "reaction-line" => Some(EventKind::ReactionLine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Event {
    /// Fronts `lower` and `lower + 1` meet.
    Pair { x: f64, lower: usize },
    /// The bottom front reaches the wall.
    Wall { x: f64 },
    Station { x: f64, k: usize },
    End { x: f64 },
}

impl Event {
    pub fn x(&self) -> f64 {
        match *self {
            Event::Pair { x, .. } | Event::Wall { x } | Event::Station { x, .. } | Event::End { x } => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontInfo {
    pub id: u64,
    pub class: u8,
    pub strength: f64,
    pub magnitude: f64,
    pub order: u32,
    pub slope: f64,
    pub strong: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub index: usize,
    pub kind: EventKind,
    pub x: f64,
    pub y: f64,
    pub incoming: Vec<FrontInfo>,
    pub outgoing: Vec<FrontInfo>,
    /// Wall turning at a corner event.
    pub omega: f64,
    pub np_total: f64,
    pub front_count: usize,
    /// Another interaction shares a front and lies within 2^{−ν−4}.
    pub triple: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionLineRecord {
    pub k: usize,
    pub x: f64,
    pub sup_z_before: f64,
    pub sup_z_after: f64,
    /// min φ(T)/u over the states on the line.
    pub min_rate_over_u: f64,
    pub min_temperature_gain: f64,
    pub near_limit: usize,
    pub fronts_before: usize,
    pub fronts_after: usize,
}

/// States on both sides of a reaction line; `ys` are the front positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactionSlice {
    pub x: f64,
    pub wall_y: f64,
    pub ys: Vec<f64>,
    pub pre: Vec<FlowState>,
    pub post: Vec<FlowState>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub events: usize,
    pub pair_events: usize,
    pub wall_events: usize,
    pub corner_events: usize,
    pub reaction_lines: usize,
    pub max_fronts: usize,
    pub triple_points: usize,
    pub near_limit_steps: usize,
    /// max over x of ν·|s| for strong fronts.
    pub c3: f64,
    /// max over x of the total non-physical strength.
    pub np_max: f64,
    pub max_tangency_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunLog {
    pub events: Vec<EventRecord>,
    pub reaction: Vec<ReactionLineRecord>,
    pub diagnostics: Diagnostics,
}

/// Hooks called while the run advances.
pub trait Observer {
    /// The front configuration of `st` is valid on [x0, x1].
    fn interval(&mut self, _st: &SimulationState, _x0: f64, _x1: f64) -> Result<()> {
        Ok(())
    }
    fn reaction_line(&mut self, _st: &SimulationState, _slice: &ReactionSlice) -> Result<()> {
        Ok(())
    }
    fn after_event(&mut self, _st: &SimulationState, _rec: &EventRecord) -> Result<()> {
        Ok(())
    }
}

/// Piecewise-constant profile along x = const, wall to far field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slice {
    pub x: f64,
    pub wall_y: f64,
    pub ys: Vec<f64>,
    pub states: Vec<FlowState>,
    pub shifted: bool,
}

impl Slice {
    pub fn tv_theta(&self) -> f64 {
        self.states.windows(2).map(|w| (w[1].angle() - w[0].angle()).abs()).sum()
    }

    /// Σ over breakpoints of Σ_k |ΔU_k|.
    pub fn tv(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| {
                let a = w[0].to_array();
                let b = w[1].to_array();
                (0..5).map(|i| (b[i] - a[i]).abs()).sum::<f64>()
            })
            .sum()
    }

    pub fn state_at(&self, y: f64) -> FlowState {
        let k = self.ys.partition_point(|&b| b <= y);
        self.states[k]
    }
}

fn ev_err(x: f64, kind: &str, e: FlowError) -> FlowError {
    match e {
        FlowError::Event { .. } => e,
        other => FlowError::Event { x, kind: kind.to_string(), source: Box::new(other) },
    }
}


/// Generation order of an outgoing wave of class `j` when `(c1, n1)` (below) meets `(c2, n2)`.
fn order_rule(j: u8, c1: u8, n1: u32, c2: u8, n2: u32, nu: u32) -> u32 {
    let o = if j != c1 && j != c2 {
        n1.max(n2) + 1
    } else if j == c1 && j == c2 {
        n1.min(n2)
    } else if j == c1 {
        n1
    } else {
        n2
    };
    o.min(nu)
}

fn interaction_pieces(nu: usize) -> impl Fn(Family, f64) -> usize {
    move |_, a: f64| ((a.abs() * nu as f64).ceil() as usize).clamp(1, nu)
}

/// Slope bound above every characteristic speed reachable from the inflow and wall angles.
pub fn default_lambda_hat(inflow: &[InflowBand], mesh: &WallMesh, gas: &GasModel) -> Result<f64> {
    let mut m = f64::NEG_INFINITY;
    let max_wall = mesh.segment_angles.iter().cloned().fold(0.0, f64::max);
    for b in inflow {
        let (_, th, ma) = flow_angles(&b.state, gas)?;
        let top = (th.max(max_wall) + ma + 0.05).min(1.5);
        m = m.max(top.tan());
    }
    Ok((m + 0.1).max(m + 0.2 * m.abs()))
}

impl SimulationState {
    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    pub fn np_total(&self) -> f64 {
        self.fronts.iter().filter(|f| f.is_np()).fold(0.0, |a, f| a + f.magnitude())
    }

    pub fn is_reacting(&self) -> bool {
        self.states.iter().any(|s| s.z > 0.0)
    }

    fn segment(&self) -> usize {
        self.next_station.saturating_sub(1).min(self.mesh.segment_angles.len() - 1)
    }

    pub fn wall_angle(&self) -> f64 {
        self.mesh.segment_angles[self.segment()]
    }

    pub fn tangency_error(&self) -> f64 {
        let th = self.wall_angle();
        let s = &self.states[0];
        (s.u * th.sin() - s.v * th.cos()).abs() / s.speed()
    }

    fn make_front(&mut self, kind: WaveKind, order: u32, x: f64, y: f64, slope: f64) -> WaveFront {
        let id = self.fresh_id();
        WaveFront { id, kind, order, x0: x, y0: y, slope }
    }

    /// Replace fronts `lo..hi` (and the states strictly between them) by `fan` anchored at (x, y).
    fn splice_fan(&mut self, lo: usize, hi: usize, fan: &FrontFan, orders: &[u32], x: f64, y: f64) -> Vec<FrontInfo> {
        let mut new = Vec::with_capacity(fan.fronts.len());
        for (f, &o) in fan.fronts.iter().zip(orders) {
            let wf = self.make_front(f.kind, o, x, y, f.slope);
            new.push(wf);
        }
        let info = new.iter().map(|f| f.info()).collect();
        self.fronts.splice(lo..hi, new);
        // states above the replaced fronts become the fan's states above its fronts
        self.states.splice(lo + 1..hi + 1, fan.states[1..].iter().copied());
        info
    }

    fn absorb_tiny_np(&self, fan: &mut FrontFan) {
        if fan.fronts.len() > 1 {
            if let Some(last) = fan.fronts.last() {
                if let WaveKind::NonPhysical { eps } = last.kind {
                    if eps <= self.tol.np_absorb * self.scale {
                        let top = *fan.top();
                        fan.fronts.pop();
                        fan.states.pop();
                        *fan.states.last_mut().expect("non-empty") = top;
                    }
                }
            }
        }
    }

    fn classes_of(fan: &FrontFan) -> Vec<u8> {
        fan.fronts.iter().map(|f| f.kind.class()).collect()
    }
}

/// Build the state at x = 0 from an inflow profile.
pub fn initialize(
    inflow: &[InflowBand],
    mesh: WallMesh,
    gas: &GasModel,
    params: &TrackerParams,
) -> Result<(SimulationState, Vec<EventRecord>)> {
    if inflow.is_empty() {
        return domain("inflow profile is empty");
    }
    if params.nu == 0 || !(params.h > 0.0) {
        return domain("need nu >= 1 and h > 0");
    }
    for (i, b) in inflow.iter().enumerate() {
        if let Err(e) = b.state.check() {
            return domain(format!("inadmissible inflow state {i}: {e}"));
        }
        let c = sound(&b.state, gas);
        if !(b.state.u > c) {
            return domain(format!("inadmissible inflow state {i}: u <= c"));
        }
        if i > 0 && !(b.y > inflow[i - 1].y) {
            return domain(format!("inflow breakpoints must increase (jump {i})"));
        }
    }
    let bottom = inflow[0].state;
    if bottom.v.abs() > 1e-10 * bottom.speed() {
        return domain("bottom inflow state is not tangent to the wall at x = 0");
    }
    let lambda_hat = match params.lambda_hat {
        Some(l) => l,
        None => default_lambda_hat(inflow, &mesh, gas)?,
    };
    let scale = inflow.iter().map(|b| b.state.speed().max(b.state.p).max(b.state.rho)).fold(0.0, f64::max);
    let mut st = SimulationState {
        x: 0.0,
        fronts: Vec::new(),
        states: vec![bottom],
        mesh,
        gas: *gas,
        nu: params.nu,
        h: params.h,
        seed: params.seed,
        lambda_hat,
        tol: params.tol,
        next_station: 0,
        z_bar: inflow.iter().map(|b| b.state.z).fold(0.0, f64::max),
        scale,
        next_id: 0,
    };
    for (k, pair) in inflow.windows(2).enumerate() {
        let (ub, ua) = (pair[0].state, pair[1].state);
        if ub == ua {
            continue;
        }
        let fan = accurate_solver(&ub, &ua, params.nu, gas)
            .map_err(|e| FlowError::Domain(format!("inadmissible inflow at jump {}: {e}", k + 1)))?;
        let n = st.fronts.len();
        let orders = vec![1; fan.fronts.len()];
        st.splice_fan(n, n, &fan, &orders, 0.0, pair[1].y);
    }
    let mut log = Vec::new();
    if let Some(rec) = corner_step(&mut st, 0)? {
        log.push(rec);
    }
    st.next_station = 1;
    for (i, r) in log.iter_mut().enumerate() {
        r.index = i;
    }
    Ok((st, log))
}

/// Earliest pending event at or after `st.x`, capped by `x_max`.
pub fn next_event(st: &SimulationState, x_max: f64) -> Event {
    let station_x = st.next_station as f64 * st.h;
    let mut best = Event::End { x: x_max };
    let mut bx = x_max;
    if station_x <= x_max {
        best = Event::Station { x: station_x, k: st.next_station };
        bx = station_x;
    }
    for i in 0..st.fronts.len().saturating_sub(1) {
        if let Some(xe) = pair_crossing(st, i) {
            if xe < bx {
                bx = xe;
                best = Event::Pair { x: xe, lower: i };
            }
        }
    }
    if let Some(xw) = wall_crossing(st) {
        if xw < bx {
            best = Event::Wall { x: xw };
        }
    }
    best
}

fn pair_crossing(st: &SimulationState, i: usize) -> Option<f64> {
    let (a, b) = (&st.fronts[i], &st.fronts[i + 1]);
    let ds = a.slope - b.slope;
    if !(ds > 0.0) {
        return None;
    }
    let d = (b.y_at(st.x) - a.y_at(st.x)).max(0.0);
    Some(st.x + d / ds)
}

fn wall_crossing(st: &SimulationState) -> Option<f64> {
    let f = st.fronts.first()?;
    if matches!(f.class(), 2 | 6) {
        return None;
    }
    let th = st.wall_angle();
    let rate = th.tan() - f.slope;
    if !(rate > 0.0) {
        return None;
    }
    let d = (f.y_at(st.x) - st.mesh.gh(st.x)).max(0.0);
    Some(st.x + d / rate)
}

/// Output of one handled event.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub records: Vec<EventRecord>,
    pub reaction: Option<(ReactionSlice, ReactionLineRecord)>,
}

fn blank_record(st: &SimulationState, kind: EventKind, y: f64) -> EventRecord {
    EventRecord {
        index: 0,
        kind,
        x: st.x,
        y,
        incoming: Vec::new(),
        outgoing: Vec::new(),
        omega: 0.0,
        np_total: 0.0,
        front_count: 0,
        triple: false,
    }
}

fn finish(st: &SimulationState, mut r: EventRecord) -> EventRecord {
    r.np_total = st.np_total();
    r.front_count = st.fronts.len();
    r
}

/// Apply the event; `st.x` must already equal the event position.
pub fn handle_event(st: &mut SimulationState, ev: Event) -> Result<Outcome> {
    let mut out = Outcome::default();
    match ev {
        Event::End { .. } => {}
        Event::Pair { x, lower } => {
            let r = pair_event(st, lower).map_err(|e| ev_err(x, "front-front", e))?;
            out.records.push(r);
        }
        Event::Wall { x } => {
            let r = wall_event(st).map_err(|e| ev_err(x, "front-wall", e))?;
            out.records.push(r);
        }
        Event::Station { x, k } => {
            if st.is_reacting() {
                let (r, slice, line) = reaction_event(st, k).map_err(|e| ev_err(x, "reaction-line", e))?;
                out.records.push(r);
                out.reaction = Some((slice, line));
            }
            if let Some(r) = corner_step(st, k).map_err(|e| ev_err(x, "corner", e))? {
                out.records.push(r);
            }
            st.next_station = k + 1;
        }
    }
    Ok(out)
}

fn pair_event(st: &mut SimulationState, i: usize) -> Result<EventRecord> {
    let x = st.x;
    let (a, b) = (st.fronts[i], st.fronts[i + 1]);
    let y = 0.5 * (a.y_at(x) + b.y_at(x));
    let mut rec = blank_record(st, EventKind::FrontFront, y);
    rec.incoming = vec![a.info(), b.info()];
    let quantum = 2f64.powi(-(st.nu as i32) - 4) * x.abs().max(1.0);
    let near = |j: usize| pair_crossing(st, j).is_some_and(|xe| (xe - x).abs() <= quantum);
    rec.triple = (i > 0 && near(i - 1)) || (i + 2 < st.fronts.len() && near(i + 1));
    let ub = st.states[i];
    let ua = st.states[i + 2];
    let nu = st.nu as u32;
    let gas = st.gas;
    let (c1, n1, c2, n2) = (a.class(), a.order, b.class(), b.order);
    let (mut fan, orders): (FrontFan, Vec<u32>) = if a.is_np() && b.is_np() {
        let mut fan = FrontFan::empty(ub);
        close_fan(&mut fan, &ua, Some(st.lambda_hat), 0.0)?;
        let n = fan.fronts.len();
        (fan, vec![nu + 1; n])
    } else if a.is_np() || b.is_np() {
        let phys = if a.is_np() { b } else { a };
        let fan = simplified_solver_np_crossing(&ub, &ua, &phys.kind, st.lambda_hat, &gas)?;
        let orders = fan.fronts.iter().map(|f| if f.kind.class() == 6 { nu + 1 } else { phys.order }).collect();
        (fan, orders)
    } else if n1.max(n2) >= nu {
        let fan = simplified_solver_interaction(&ub, &ua, &a.kind, &b.kind, st.lambda_hat, &gas)?;
        let orders = SimulationState::classes_of(&fan)
            .into_iter()
            .map(|j| if j == 6 { nu + 1 } else { order_rule(j, c1, n1, c2, n2, nu) })
            .collect();
        (fan, orders)
    } else {
        let sol = solve_riemann(&ub, &ua, &gas)?;
        let mut fan = fan_from_solution(&sol, &interaction_pieces(st.nu), st.tol.drop, &gas)?;
        close_fan(&mut fan, &ua, Some(st.lambda_hat), st.tol.absorb * st.scale)?;
        let orders = SimulationState::classes_of(&fan)
            .into_iter()
            .map(|j| if j == 6 { nu + 1 } else { order_rule(j, c1, n1, c2, n2, nu) })
            .collect();
        (fan, orders)
    };
    st.absorb_tiny_np(&mut fan);
    let orders = &orders[..fan.fronts.len()];
    rec.outgoing = st.splice_fan(i, i + 2, &fan, orders, x, y);
    Ok(finish(st, rec))
}

fn wall_event(st: &mut SimulationState) -> Result<EventRecord> {
    let x = st.x;
    let f = st.fronts[0];
    if f.class() != 1 {
        return Err(FlowError::Contract(format!("front of class {} reached the wall", f.class())));
    }
    let y = st.mesh.gh(x);
    let mut rec = blank_record(st, EventKind::FrontWall, y);
    rec.incoming = vec![f.info()];
    let ua = st.states[1];
    let (eps, below) = turn_to_angle(&ua, st.wall_angle(), &st.gas)?;
    let mut fan = FrontFan::empty(below);
    if eps != 0.0 {
        let kind = WaveKind::Nonlinear { family: Family::F5, alpha: eps };
        let slope = crate::riemann::front_slope(&kind, &below, &ua, &st.gas)?;
        fan.fronts.push(crate::riemann::FanFront { kind, slope });
        fan.states.push(ua);
    }
    let order = (f.order + 1).min(st.nu as u32);
    st.states[0] = below;
    if fan.fronts.is_empty() {
        st.fronts.remove(0);
        st.states.remove(0);
    } else {
        rec.outgoing = st.splice_fan(0, 1, &fan, &[order], x, y);
    }
    Ok(finish(st, rec))
}

/// Turn the bottom state to the angle of segment `k`, emitting order-1 5-waves from the corner.
fn corner_step(st: &mut SimulationState, k: usize) -> Result<Option<EventRecord>> {
    let seg = k.min(st.mesh.segment_angles.len() - 1);
    let target = st.mesh.segment_angles[seg];
    let omega = if k < st.mesh.turning_angles.len() { st.mesh.turning_angles[k] } else { 0.0 };
    let x = k as f64 * st.h;
    let y = st.mesh.gh(x);
    let top = st.states[0];
    if top.angle() == target {
        return Ok(None);
    }
    let (eps, below) = turn_to_angle(&top, target, &st.gas)?;
    // round-off turns of a straight wall are folded into the bottom state
    if eps.abs() <= st.tol.drop {
        st.states[0] = below;
        return Ok(None);
    }
    let strong_split = eps > 0.0 && omega <= -1.0 / st.nu as f64;
    let nu = st.nu;
    let split = move |_: Family, _: f64| if strong_split { nu } else { 1 };
    let sol = RiemannSolution { alphas: [0.0, 0.0, 0.0, 0.0, eps], states: [below, below, below, below, below, top], residual: 0.0 };
    let mut fan = fan_from_solution(&sol, &split, 0.0, &st.gas)?;
    close_fan(&mut fan, &top, None, st.tol.absorb * st.scale)?;
    let mut rec = blank_record(st, EventKind::Corner, y);
    rec.omega = omega;
    let orders = vec![1; fan.fronts.len()];
    rec.outgoing = st.splice_fan(0, 0, &fan, &orders, x, y);
    st.states[0] = below;
    Ok(Some(finish(st, rec)))
}

fn reaction_event(st: &mut SimulationState, k: usize) -> Result<(EventRecord, ReactionSlice, ReactionLineRecord)> {
    let x = st.x;
    let h = st.h;
    let gas = st.gas;
    let pre = st.states.clone();
    let mut post = Vec::with_capacity(pre.len());
    let mut reports: Vec<ReactionStepReport> = Vec::with_capacity(pre.len());
    let mut min_rate = f64::INFINITY;
    for s in &pre {
        let (p, r) = reaction_step(s, h, &gas)?;
        min_rate = min_rate.min(reaction_rate(temperature(s, &gas), &gas)? / s.u);
        if !(r.t_after >= r.t_before * (1.0 - 1e-13)) {
            return Err(FlowError::Numerical(format!("temperature decreased across reaction line ({} -> {})", r.t_before, r.t_after)));
        }
        post.push(p);
        reports.push(r);
    }
    let ys: Vec<f64> = st.fronts.iter().map(|f| f.y_at(x)).collect();
    let wall_y = st.mesh.gh(x);
    let slice = ReactionSlice { x, wall_y, ys: ys.clone(), pre: pre.clone(), post: post.clone() };
    let mut line = ReactionLineRecord {
        k,
        x,
        sup_z_before: pre.iter().map(|s| s.z).fold(0.0, f64::max),
        sup_z_after: post.iter().map(|s| s.z).fold(0.0, f64::max),
        min_rate_over_u: min_rate,
        min_temperature_gain: reports.iter().map(|r| r.t_after - r.t_before).fold(f64::INFINITY, f64::min),
        near_limit: reports.iter().filter(|r| r.near_limit()).count(),
        fronts_before: st.fronts.len(),
        fronts_after: 0,
    };
    let mut rec = blank_record(st, EventKind::ReactionLine, wall_y);
    let old = std::mem::take(&mut st.fronts);
    let nu = st.nu as u32;
    let emit = st.tol.reaction_emit;
    let absorb = (10.0 * emit).max(st.tol.absorb) * st.scale;
    let mut fronts = Vec::with_capacity(old.len());
    let mut states = vec![post[0]];
    for (i, f) in old.iter().enumerate() {
        let (b, a) = (post[i], post[i + 1]);
        let unchanged = pre[i] == b && pre[i + 1] == a;
        if unchanged {
            fronts.push(*f);
            states.push(a);
            continue;
        }
        if f.is_np() {
            let mut g = *f;
            g.kind = WaveKind::NonPhysical { eps: b.dist(&a) };
            fronts.push(g);
            states.push(a);
            continue;
        }
        let sol = solve_riemann(&b, &a, &gas)?;
        let own = f.class();
        let fan = if f.order >= nu {
            // capped: keep the own-family component, the rest goes non-physical
            let kind = match f.kind {
                WaveKind::Nonlinear { family, .. } => WaveKind::Nonlinear { family, alpha: sol.alphas[family.index() - 1] },
                _ => WaveKind::Contact { s: [sol.alphas[1], sol.alphas[2], sol.alphas[3]] },
            };
            let mut fan = simplified_solver_np_crossing(&b, &a, &kind, st.lambda_hat, &gas)?;
            if fan.np_strength() <= st.tol.np_absorb * st.scale {
                let n = fan.fronts.len();
                if fan.fronts.last().is_some_and(|f| f.kind.class() == 6) {
                    fan.fronts.truncate(n - 1);
                    fan.states.truncate(n);
                }
                let last = fan.states.len() - 1;
                fan.states[last] = a;
            }
            fan
        } else {
            let mut fan = fan_from_solution(&sol, &|_, _| 1, emit, &gas)?;
            close_fan(&mut fan, &a, Some(st.lambda_hat), absorb)?;
            fan
        };
        for (j, ff) in fan.fronts.iter().enumerate() {
            let c = ff.kind.class();
            let order = if c == 6 {
                nu + 1
            } else if c == own {
                f.order
            } else {
                (f.order + 1).min(nu)
            };
            let keep_id = c == own && !fronts.iter().any(|g: &WaveFront| g.id == f.id);
            let id = if keep_id { f.id } else { st.fresh_id() };
            let wf = WaveFront { id, kind: ff.kind, order, x0: x, y0: ys[i], slope: ff.slope };
            if !keep_id {
                rec.outgoing.push(wf.info());
            }
            fronts.push(wf);
            states.push(fan.states[j + 1]);
        }
    }
    st.fronts = fronts;
    st.states = states;
    merge_np_runs(st, x);
    // restore wall tangency lost through the change of u at fixed v
    let seg = k.saturating_sub(1).min(st.mesh.segment_angles.len() - 1);
    let target = st.mesh.segment_angles[seg];
    let top = st.states[0];
    if top.angle() != target {
        let (eps, below) = turn_to_angle(&top, target, &gas)?;
        if eps != 0.0 {
            let kind = WaveKind::Nonlinear { family: Family::F5, alpha: eps };
            let slope = crate::riemann::front_slope(&kind, &below, &top, &gas)?;
            let wf = st.make_front(kind, 2.min(nu), x, wall_y, slope);
            rec.outgoing.push(wf.info());
            st.fronts.insert(0, wf);
            st.states.insert(0, below);
        } else {
            st.states[0] = below;
        }
    }
    line.fronts_after = st.fronts.len();
    Ok((finish(st, rec), slice, line))
}

/// Collapse runs of adjacent non-physical fronts spanning at most `np_merge·h` at station `x`.
fn merge_np_runs(st: &mut SimulationState, x: f64) {
    let gap = st.tol.np_merge * st.h;
    if !(gap > 0.0) {
        return;
    }
    let mut i = 0;
    while i < st.fronts.len() {
        if !st.fronts[i].is_np() {
            i += 1;
            continue;
        }
        let y0 = st.fronts[i].y_at(x);
        let mut j = i;
        while j + 1 < st.fronts.len() && st.fronts[j + 1].is_np() && st.fronts[j + 1].y_at(x) - y0 <= gap {
            j += 1;
        }
        if j > i {
            let eps = st.states[i].dist(&st.states[j + 1]);
            st.fronts[i].kind = WaveKind::NonPhysical { eps };
            st.fronts.drain(i + 1..=j);
            st.states.drain(i + 1..=j);
        }
        i += 1;
    }
}

/// Advance to `x_max`, feeding observers and collecting the log.
pub fn run(st: &mut SimulationState, x_max: f64, observers: &mut [&mut dyn Observer]) -> Result<RunLog> {
    let mut log = RunLog::default();
    run_into(st, x_max, observers, &mut log)?;
    Ok(log)
}

/// Same as [`run`] but appends to an existing log (for staged runs).
pub fn run_into(
    st: &mut SimulationState,
    x_max: f64,
    observers: &mut [&mut dyn Observer],
    log: &mut RunLog,
) -> Result<()> {
    if !(x_max >= st.x) {
        return domain(format!("x_max = {x_max} is behind the current station {}", st.x));
    }
    let mut same_x = 0usize;
    let mut last_x = st.x;
    loop {
        let ev = next_event(st, x_max);
        let xe = ev.x().max(st.x);
        for o in observers.iter_mut() {
            o.interval(st, st.x, xe)?;
        }
        st.x = xe;
        if let Event::End { .. } = ev {
            break;
        }
        if xe == last_x {
            same_x += 1;
            if same_x > 100_000 {
                return Err(ev_err(xe, "front-front", FlowError::Numerical("event cascade does not advance in x".into())));
            }
        } else {
            same_x = 0;
            last_x = xe;
        }
        let out = handle_event(st, ev)?;
        if let Some((slice, line)) = &out.reaction {
            for o in observers.iter_mut() {
                o.reaction_line(st, slice)?;
            }
            log.diagnostics.reaction_lines += 1;
            log.diagnostics.near_limit_steps += line.near_limit;
            log.reaction.push(line.clone());
        }
        for mut r in out.records {
            r.index = log.events.len();
            let d = &mut log.diagnostics;
            d.events += 1;
            match r.kind {
                EventKind::FrontFront => d.pair_events += 1,
                EventKind::FrontWall => d.wall_events += 1,
                EventKind::Corner => d.corner_events += 1,
                EventKind::ReactionLine => {}
            }
            if r.triple {
                d.triple_points += 1;
            }
            for o in observers.iter_mut() {
                o.after_event(st, &r)?;
            }
            log.events.push(r);
        }
        let d = &mut log.diagnostics;
        d.max_fronts = d.max_fronts.max(st.fronts.len());
        d.np_max = d.np_max.max(st.np_total());
        let strong = st.fronts.iter().filter(|f| f.is_strong()).map(|f| f.magnitude()).fold(0.0, f64::max);
        d.c3 = d.c3.max(strong * st.nu as f64);
        d.max_tangency_error = d.max_tangency_error.max(st.tangency_error());
    }
    Ok(())
}

/// Profile along x = const for x in the current configuration's validity range.
pub fn sample_slice(st: &SimulationState, x: f64) -> Result<Slice> {
    if x < st.x - 1e-12 * st.x.abs().max(1.0) {
        return domain(format!("slice at x = {x} lies behind the current station {}", st.x));
    }
    let mut xs = x;
    let mut shifted = false;
    let ordered = |xx: f64| {
        let ys: Vec<f64> = st.fronts.iter().map(|f| f.y_at(xx)).collect();
        ys.windows(2).all(|w| w[0] < w[1])
    };
    if !ordered(xs) {
        xs += 2f64.powi(-(st.nu as i32) - 4);
        shifted = true;
    }
    let ys = st.fronts.iter().map(|f| f.y_at(xs)).collect();
    Ok(Slice { x: xs, wall_y: st.mesh.gh(xs), ys, states: st.states.clone(), shifted })
}

/// λ₅ of the state under every front never exceeds λ̂.
pub fn max_physical_slope(st: &SimulationState) -> f64 {
    st.states
        .iter()
        .filter_map(|s| eigenvalue(Family::F5, s, &st.gas).ok())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::phi;
    use crate::oracle::{sample_background, solve_background};
    use crate::wall::{build_mesh, Wall, DEFAULT_SLOPE_BOUNDS};

    fn gas() -> GasModel {
        GasModel::ideal(1.4)
    }

    fn u0() -> FlowState {
        FlowState::new(2.0, 0.0, 1.0 / 1.4, 1.0, 0.0)
    }

    fn params(nu: usize, h: f64) -> TrackerParams {
        TrackerParams { nu, h, seed: 7, lambda_hat: None, tol: Tolerances::default() }
    }

    fn flat(h: f64, x_max: f64) -> WallMesh {
        build_mesh(&Wall::flat(), h, x_max, DEFAULT_SLOPE_BOUNDS).unwrap()
    }

    #[test]
    fn uniform_flow_has_no_events() {
        let inflow = [InflowBand { y: 0.0, state: u0() }];
        let (mut st, init) = initialize(&inflow, flat(0.1, 2.0), &gas(), &params(8, 0.1)).unwrap();
        assert!(init.is_empty() && st.fronts.is_empty());
        let log = run(&mut st, 2.0, &mut []).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(st.states, vec![u0()]);
    }

    #[test]
    fn corner_at_origin_gives_strong_fan() {
        let om = -10f64.to_radians();
        let w = Wall { vertices: vec![[0.0, 0.0], [1.0, om.tan()]], reference_slopes: vec![] };
        let mesh = build_mesh(&w, 0.1, 1.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let nu = 8;
        let (st, init) = initialize(&[InflowBand { y: 0.0, state: u0() }], mesh, &gas(), &params(nu, 0.1)).unwrap();
        assert_eq!(init.len(), 1);
        assert_eq!(st.fronts.len(), nu);
        assert!(st.fronts.iter().all(|f| f.is_strong()));
        assert!((st.states[0].angle() - om).abs() < 1e-12);
        assert!(st.tangency_error() < 1e-10);
        for w in st.fronts.windows(2) {
            assert!(w[0].slope < w[1].slope);
        }
    }

    #[test]
    fn two_jump_profile() {
        let g = gas();
        let a = phi(Family::F1, -0.02, &u0(), &g).unwrap();
        let b = FlowState { rho: a.rho * 1.05, z: 0.1, ..a };
        let inflow = [InflowBand { y: 0.0, state: u0() }, InflowBand { y: 0.3, state: a }, InflowBand { y: 0.6, state: b }];
        let nu = 8;
        let (st, _) = initialize(&inflow, flat(0.1, 1.0), &g, &params(nu, 0.1)).unwrap();
        assert!(st.fronts.len() <= 2 * (nu + 2) + 2);
        assert_eq!(st.states.len(), st.fronts.len() + 1);
        assert_eq!(*st.states.last().unwrap(), b);
        let sub = FlowState { u: 0.5, ..u0() };
        let bad = [InflowBand { y: 0.0, state: u0() }, InflowBand { y: 0.3, state: sub }];
        let e = initialize(&bad, flat(0.1, 1.0), &g, &params(nu, 0.1)).unwrap_err();
        assert!(e.to_string().contains("inflow state 1"), "{e}");
    }

    #[test]
    fn crossing_of_two_lines() {
        let g = gas();
        let mut st = initialize(&[InflowBand { y: 0.0, state: u0() }], flat(1.0, 4.0), &g, &params(8, 1.0)).unwrap().0;
        let k = WaveKind::NonPhysical { eps: 0.0 };
        st.fronts = vec![
            WaveFront { id: 1, kind: k, order: 1, x0: 0.0, y0: 0.2, slope: 0.5 },
            WaveFront { id: 2, kind: k, order: 1, x0: 0.0, y0: 0.4, slope: 0.1 },
        ];
        st.states = vec![u0(); 3];
        assert_eq!(pair_crossing(&st, 0), Some(0.2 / 0.4));
        st.fronts[1].slope = 0.5;
        assert_eq!(pair_crossing(&st, 0), None);
        // 1-front below the others against a downward segment
        st.fronts = vec![WaveFront { id: 3, kind: WaveKind::Nonlinear { family: Family::F1, alpha: 0.01 }, order: 1, x0: 0.0, y0: 0.3, slope: -0.5 }];
        st.states = vec![u0(); 2];
        st.next_station = 1;
        let th = st.wall_angle();
        assert_eq!(th, 0.0);
        assert!((wall_crossing(&st).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn reflection_at_flat_wall() {
        let g = gas();
        let alpha = -0.01;
        let a = phi(Family::F1, alpha, &u0(), &g).unwrap();
        let inflow = [InflowBand { y: 0.0, state: u0() }, InflowBand { y: 0.2, state: a }];
        let (mut st, _) = initialize(&inflow, flat(1.0, 3.0), &g, &params(8, 1.0)).unwrap();
        assert_eq!(st.fronts.len(), 1);
        let log = run(&mut st, 0.99, &mut []).unwrap();
        let refl = log.events.iter().find(|e| e.kind == EventKind::FrontWall).unwrap();
        let eps = refl.outgoing[0].strength;
        assert_eq!(refl.outgoing[0].class, 5);
        assert_eq!(refl.outgoing[0].order, 2);
        assert!(((eps - alpha) / alpha).abs() < 0.05, "{eps}");
        assert!(st.tangency_error() < 1e-10);
    }

    #[test]
    fn inert_reaction_line_changes_nothing() {
        let g = GasModel { q_tilde: 1.0, ..gas() };
        let a = phi(Family::F1, -0.01, &u0(), &g).unwrap();
        let inflow = [InflowBand { y: 0.0, state: u0() }, InflowBand { y: 0.2, state: a }];
        let (mut st, _) = initialize(&inflow, flat(0.05, 0.2), &g, &params(8, 0.05)).unwrap();
        let before = st.states.clone();
        let log = run(&mut st, 0.12, &mut []).unwrap();
        assert!(log.reaction.is_empty());
        assert_eq!(st.states, before);
    }

    #[test]
    fn contact_through_shock_with_simplified_solver() {
        let g = gas();
        // a 5-shock below a contact carrying a Z jump: the shock is faster and overtakes
        let ub = u0();
        let um = phi(Family::F5, -0.02, &ub, &g).unwrap();
        let ua = FlowState { z: um.z + 0.2, rho: um.rho * 1.1, ..um };
        let mut st = initialize(&[InflowBand { y: 0.0, state: ub }], flat(10.0, 10.0), &g, &params(2, 10.0)).unwrap().0;
        let s5 = crate::riemann::front_slope(&WaveKind::Nonlinear { family: Family::F5, alpha: -0.02 }, &ub, &um, &g).unwrap();
        st.fronts = vec![
            WaveFront { id: 1, kind: WaveKind::Nonlinear { family: Family::F5, alpha: -0.02 }, order: 2, x0: 0.0, y0: 0.1, slope: s5 },
            WaveFront { id: 2, kind: WaveKind::Contact { s: [0.0, 0.1f64.ln_1p() * 0.0 + (1.1f64 * um.rho - um.rho), 0.2] }, order: 2, x0: 0.0, y0: 0.3, slope: um.v / um.u },
        ];
        st.states = vec![ub, um, ua];
        let ev = next_event(&st, 5.0);
        let Event::Pair { x, lower } = ev else { panic!("{ev:?}") };
        st.x = x;
        let out = handle_event(&mut st, Event::Pair { x, lower }).unwrap();
        let rec = &out.records[0];
        assert!(rec.outgoing.iter().any(|f| f.class == 6 && f.order == 3));
        // Z above everything is Z_b + α₄
        assert!((st.states.last().unwrap().z - (ub.z + 0.2)).abs() < 1e-15);
        let below_np = st.states[st.states.len() - 2];
        assert!((below_np.z - (ub.z + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn deterministic_replay() {
        let g = gas();
        let w = Wall::single_corner(0.3, -5f64.to_radians());
        let a = phi(Family::F1, -0.01, &u0(), &g).unwrap();
        let inflow = [InflowBand { y: 0.0, state: u0() }, InflowBand { y: 0.25, state: a }];
        let go = || {
            let mesh = build_mesh(&w, 0.1, 1.5, DEFAULT_SLOPE_BOUNDS).unwrap();
            let (mut st, _) = initialize(&inflow, mesh, &g, &params(8, 0.1)).unwrap();
            let log = run(&mut st, 1.5, &mut []).unwrap();
            serde_json::to_string(&log).unwrap()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn prandtl_meyer_slice_matches_oracle() {
        let g = gas();
        let w = Wall::single_corner(0.2, -10f64.to_radians());
        let nu = 16;
        let mesh = build_mesh(&w, 0.1, 2.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let fans = solve_background(&u0(), &mesh, &g).unwrap();
        let (mut st, _) = initialize(&[InflowBand { y: 0.0, state: u0() }], mesh.clone(), &g, &params(nu, 0.1)).unwrap();
        run(&mut st, 1.95, &mut []).unwrap();
        let sl = sample_slice(&st, 1.95).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let y = sl.wall_y + 2.5 * i as f64 / 199.0;
            let a = sl.state_at(y);
            let b = sample_background(&u0(), &fans, &mesh, 1.95, y, &g).unwrap();
            worst = worst.max((a.angle() - b.angle()).abs()).max(((a.p - b.p) / b.p).abs());
        }
        assert!(worst < 1.0 / nu as f64, "{worst}");
    }
}
