//! Glimm-type functional, interaction measure E, monotonicity audit and weak-form residual.

use serde::{Deserialize, Serialize};

use crate::curves::Family;
use crate::error::{domain, FlowError, Result};
use crate::gas::{sound, FlowState, GasModel};
use crate::quad::gauss_legendre;
use crate::reaction::{flux_h, flux_w, source_g};
use crate::riemann::WaveKind;
use crate::tracker::{EventKind, EventRecord, Observer, ReactionSlice, SimulationState, WaveFront};
use crate::wall::{angle_sets_from, WallMesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlimmConstants {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K_c")]
    pub k_c: f64,
    #[serde(rename = "K_b")]
    pub k_b: f64,
    #[serde(rename = "K_w")]
    pub k_w: f64,
    #[serde(rename = "K_np")]
    pub k_np: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    #[serde(rename = "script_K")]
    pub script_k: f64,
    /// Decay rate of the reaction tail; `None` uses φ(T_floor)/q*.
    #[serde(rename = "L")]
    pub l: Option<f64>,
}

impl Default for GlimmConstants {
    fn default() -> Self {
        GlimmConstants {
            k: 10.0,
            k0: 1.0,
            k1: 4.0,
            k_c: 10.0,
            k_b: 2.0,
            k_w: 2.0,
            k_np: 2.0,
            c_star: 10.0,
            script_k: 50.0,
            l: None,
        }
    }
}

impl GlimmConstants {
    /// Offending field name and message on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let named = [
            ("K", self.k),
            ("K0", self.k0),
            ("K1", self.k1),
            ("K_c", self.k_c),
            ("K_b", self.k_b),
            ("K_w", self.k_w),
            ("K_np", self.k_np),
            ("C_star", self.c_star),
            ("script_K", self.script_k),
        ];
        for (n, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err((n, format!("must be a positive number, got {v}")));
            }
        }
        if let Some(l) = self.l {
            if !(l.is_finite() && l > 0.0) {
                return Err(("L", format!("must be a positive number, got {l}")));
            }
        }
        Ok(())
    }

    pub fn decay_rate(&self, st: &SimulationState) -> f64 {
        self.l.unwrap_or_else(|| default_decay_rate(st))
    }
}

/// φ(T_floor) over the largest limit speed q* = √(q² + 2c²/(γ−1)) among the current states.
pub fn default_decay_rate(st: &SimulationState) -> f64 {
    let g = &st.gas;
    let q_star = st
        .states
        .iter()
        .map(|s| {
            let c = sound(s, g);
            (s.speed().powi(2) + 2.0 * c * c / (g.gamma - 1.0)).sqrt()
        })
        .fold(0.0, f64::max);
    g.rate_floor() / q_star
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GlimmReport {
    pub x: f64,
    /// Weak physical strengths per family 1..5.
    pub l_w_family: [f64; 5],
    pub l_np: f64,
    pub l_w: f64,
    pub q0: f64,
    /// Weighted sums for families 1..4.
    pub q_b: [f64; 4],
    pub q_b5: f64,
    pub q_bnp: f64,
    pub q_c: f64,
    pub q: f64,
    pub tv_theta: f64,
    pub theta_hat: f64,
    pub f1: f64,
    pub f0: f64,
    pub f: f64,
    pub script_f: f64,
    pub e_at_event: Option<f64>,
}

/// Calls `g(family, |strength|, is_shock)` for each weak component of a front; strong fronts yield nothing.
fn weak_components(f: &WaveFront, mut g: impl FnMut(usize, f64, bool)) {
    if f.is_strong() {
        return;
    }
    match f.kind {
        WaveKind::Nonlinear { family, alpha } => {
            let j = if family == Family::F1 { 1 } else { 5 };
            g(j, alpha.abs(), alpha < 0.0)
        }
        WaveKind::Contact { s } => {
            for (k, v) in s.iter().enumerate() {
                if *v != 0.0 {
                    g(k + 2, v.abs(), false)
                }
            }
        }
        WaveKind::NonPhysical { eps } => g(6, eps.abs(), false),
    }
}

/// Pairs (α below, β above) of weak fronts that approach each other.
pub fn classify_approaching(fronts: &[WaveFront]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..fronts.len() {
        for j in i + 1..fronts.len() {
            if fronts[i].is_strong() || fronts[j].is_strong() {
                continue;
            }
            let mut hit = false;
            weak_components(&fronts[i], |fa, _, sa| {
                weak_components(&fronts[j], |fb, _, sb| {
                    hit |= fa > fb || (fa == fb && (fa == 1 || fa == 5) && (sa || sb));
                })
            });
            if hit {
                out.push((i, j));
            }
        }
    }
    out
}

/// Magnitude of strong front `i` for the weights: its turning angle, the unit of Ω_Ra.
pub fn strong_magnitude(states: &[FlowState], i: usize) -> f64 {
    (states[i + 1].angle() - states[i].angle()).abs()
}

/// Weight of front `idx`: W(α,x,−) for physical fronts and W(ε,x,+) for non-physical ones.
pub fn weight(fronts: &[WaveFront], states: &[FlowState], idx: usize, omega_ra: f64, c: &GlimmConstants) -> f64 {
    let sum = |r: std::ops::Range<usize>| -> f64 {
        r.filter(|&i| fronts[i].is_strong()).map(|i| strong_magnitude(states, i)).sum()
    };
    if fronts[idx].is_np() {
        (c.k_np * sum(idx + 1..fronts.len())).exp()
    } else {
        (c.k_b * omega_ra + c.k_w * sum(0..idx)).exp()
    }
}

/// Σ_{kh > x} ‖Z̄‖∞ e^{−Lkh} h summed in closed form from station `k0`.
pub fn reaction_tail(z_bar: f64, l: f64, h: f64, k0: usize) -> f64 {
    if z_bar == 0.0 {
        return 0.0;
    }
    z_bar * h * (-l * k0 as f64 * h).exp() / -(-l * h).exp_m1()
}

/// Functional at the current (non-event) position of `st`.
pub fn functional(st: &SimulationState, c: &GlimmConstants, l: f64) -> GlimmReport {
    let h = st.mesh.h;
    let k0 = st.next_station;
    // a point strictly between stations k0−1 and k0
    let xs = (k0 as f64 - 0.5) * h;
    let sets = angle_sets_from(&st.mesh.turning_angles, h, xs);
    let mut r = GlimmReport { x: st.x, q_c: sets.q_c, theta_hat: sets.theta_hat, ..Default::default() };
    let strong_total: f64 =
        (0..st.fronts.len()).filter(|&i| st.fronts[i].is_strong()).map(|i| strong_magnitude(&st.states, i)).sum();
    let mut strong_below = 0.0;
    // running sums of weak magnitudes below, all and shocks only, per family 1..6
    let mut all = [0.0f64; 7];
    let mut shocks = [0.0f64; 7];
    for (i, f) in st.fronts.iter().enumerate() {
        if f.is_strong() {
            strong_below += strong_magnitude(&st.states, i);
            continue;
        }
        let wb = (c.k_b * sets.omega_ra + c.k_w * strong_below).exp();
        let wnp = (c.k_np * (strong_total - strong_below)).exp();
        let mut add = Vec::with_capacity(3);
        weak_components(f, |j, a, shock| {
            let higher: f64 = all[j + 1..].iter().sum();
            let same = if j == 1 || j == 5 {
                if shock {
                    all[j]
                } else {
                    shocks[j]
                }
            } else {
                0.0
            };
            r.q0 += a * (higher + same);
            match j {
                1..=4 => {
                    r.l_w_family[j - 1] += a;
                    r.q_b[j - 1] += wb * a;
                }
                5 => {
                    r.l_w_family[4] += a;
                    r.q_b5 += a;
                }
                _ => {
                    r.l_np += a;
                    r.q_bnp += wnp * a;
                }
            }
            add.push((j, a, shock));
        });
        for (j, a, shock) in add {
            all[j] += a;
            if shock {
                shocks[j] += a;
            }
        }
    }
    r.l_w = r.l_w_family.iter().sum::<f64>() + r.l_np;
    r.q = c.k0 * r.q0 + c.k1 * r.q_b.iter().sum::<f64>() + r.q_b5 + r.q_bnp + c.k_c * r.q_c;
    r.tv_theta = st.states.windows(2).map(|w| (w[1].angle() - w[0].angle()).abs()).sum();
    r.f1 = (r.tv_theta - r.theta_hat).abs();
    r.f0 = r.l_w + c.k * r.q;
    r.f = r.f1 + c.c_star * r.f0;
    r.script_f = r.f + c.script_k * reaction_tail(st.z_bar, l, h, k0);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ECase {
    WeakWeak,
    NonPhysical,
    Strong,
    Reflection,
    ConcaveCorner,
    ConvexCorner,
    ReactionLine,
}

/// E of one processed event.
pub fn event_interaction_measure(rec: &EventRecord) -> Result<(f64, ECase)> {
    let dump = || format!("{rec:?}");
    match rec.kind {
        EventKind::ReactionLine => Ok((0.0, ECase::ReactionLine)),
        EventKind::Corner => {
            if rec.omega > 0.0 {
                Ok((rec.omega, ECase::ConcaveCorner))
            } else {
                Ok((0.0, ECase::ConvexCorner))
            }
        }
        EventKind::FrontWall => match rec.incoming.as_slice() {
            [a] if a.class == 1 => Ok((a.magnitude, ECase::Reflection)),
            _ => Err(FlowError::Contract(format!("unclassified wall event: {}", dump()))),
        },
        EventKind::FrontFront => {
            let [a, b] = rec.incoming.as_slice() else {
                return Err(FlowError::Contract(format!("unclassified interaction: {}", dump())));
            };
            if a.strong && b.strong {
                return Err(FlowError::Contract(format!("two strong fronts met: {}", dump())));
            }
            if a.strong || b.strong {
                return Ok((a.magnitude * b.magnitude, ECase::Strong));
            }
            if a.class == 6 || b.class == 6 {
                return Ok((a.magnitude * b.magnitude, ECase::NonPhysical));
            }
            let gnl = a.class == 1 || a.class == 5;
            let approaching =
                a.class > b.class || (a.class == b.class && (a.class == 2 || (gnl && (a.strength < 0.0 || b.strength < 0.0))));
            if approaching {
                Ok((a.magnitude * b.magnitude, ECase::WeakWeak))
            } else {
                Err(FlowError::Contract(format!("non-approaching weak fronts met: {}", dump())))
            }
        }
    }
}

/// One row of the functional history; `event` is `None` for the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlimmRow {
    pub event: Option<usize>,
    pub kind: Option<EventKind>,
    pub x: f64,
    pub l_w: f64,
    pub q: f64,
    pub f1: f64,
    pub f0: f64,
    pub f: f64,
    pub script_f: f64,
    pub e: f64,
    /// Σ over breakpoints of the componentwise jump.
    pub tv: f64,
}

impl GlimmRow {
    fn from_report(r: &GlimmReport, event: Option<usize>, kind: Option<EventKind>, e: f64, tv: f64) -> Self {
        GlimmRow { event, kind, x: r.x, l_w: r.l_w, q: r.q, f1: r.f1, f0: r.f0, f: r.f, script_f: r.script_f, e, tv }
    }
}

fn state_tv(st: &SimulationState) -> f64 {
    st.states
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].to_array(), w[1].to_array());
            (0..5).map(|i| (b[i] - a[i]).abs()).sum::<f64>()
        })
        .sum()
}

/// Records the functional after every event.
#[derive(Debug, Clone)]
pub struct GlimmObserver {
    pub constants: GlimmConstants,
    pub l: f64,
    pub rows: Vec<GlimmRow>,
    /// Events whose E could not be classified (E counted as 0).
    pub unclassified: Vec<String>,
    pub initial: GlimmReport,
    pub last: GlimmReport,
}

impl GlimmObserver {
    pub fn new(st: &SimulationState, constants: GlimmConstants) -> Self {
        let l = constants.decay_rate(st);
        let r = functional(st, &constants, l);
        GlimmObserver {
            constants,
            l,
            rows: vec![GlimmRow::from_report(&r, None, None, 0.0, state_tv(st))],
            unclassified: Vec::new(),
            initial: r.clone(),
            last: r,
        }
    }

    /// Largest slice TV seen.
    pub fn c0(&self) -> f64 {
        self.rows.iter().map(|r| r.tv).fold(0.0, f64::max)
    }
}

impl Observer for GlimmObserver {
    fn after_event(&mut self, st: &SimulationState, rec: &EventRecord) -> Result<()> {
        let e = match event_interaction_measure(rec) {
            Ok((e, _)) => e,
            Err(err) => {
                self.unclassified.push(err.to_string());
                0.0
            }
        };
        let mut r = functional(st, &self.constants, self.l);
        r.e_at_event = Some(e);
        self.rows.push(GlimmRow::from_report(&r, Some(rec.index), Some(rec.kind), e, state_tv(st)));
        self.last = r;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub row: usize,
    pub event: Option<usize>,
    pub kind: String,
    pub x: f64,
    /// Functional before and after: F for interaction events, 𝓕 across reaction stations.
    pub before: f64,
    pub after: f64,
    pub e: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked_events: usize,
    pub checked_lines: usize,
    pub violations: Vec<Violation>,
    pub sum_e: f64,
    pub max_excess: f64,
}

impl AuditReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "checked_events {}\nchecked_reaction_lines {}\nviolations {}\nsum_E {:.17e}\nmax_excess {:.17e}\n",
            self.checked_events,
            self.checked_lines,
            self.violations.len(),
            self.sum_e,
            self.max_excess
        );
        for v in &self.violations {
            s.push_str(&format!(
                "VIOLATION row={} event={} kind={} x={:.17e} before={:.17e} after={:.17e} E={:.17e} excess={:.17e}\n",
                v.row,
                v.event.map_or("-".to_string(), |e| e.to_string()),
                v.kind,
                v.x,
                v.before,
                v.after,
                v.e,
                v.excess
            ));
        }
        s
    }
}

/// Relative slack: wave strengths carry the Riemann solver residual (~1e-14), which the
/// weights C*·K·K1·W amplify by a few hundred.
const AUDIT_SLACK: f64 = 1e-10;

/// F(τ+) ≤ F(τ−) − E/4 at interaction events; 𝓕 nonincreasing across reaction stations
/// (a corner at the same station is merged into the station).
pub fn audit_monotonicity(rows: &[GlimmRow]) -> AuditReport {
    let mut rep = AuditReport::default();
    let mut i = 1;
    while i < rows.len() {
        let before = &rows[i - 1];
        let row = &rows[i];
        rep.sum_e += row.e;
        let label = row.kind.map_or("initial", |k| k.label()).to_string();
        let (lhs, prior, rhs, e) = if row.kind == Some(EventKind::ReactionLine) {
            // fold a corner record at the same station into this check
            let mut last = i;
            while last + 1 < rows.len() && rows[last + 1].kind == Some(EventKind::Corner) && rows[last + 1].x == row.x {
                last += 1;
                rep.sum_e += rows[last].e;
            }
            rep.checked_lines += 1;
            let after = &rows[last];
            i = last;
            (after.script_f, before.script_f, before.script_f, 0.0)
        } else {
            rep.checked_events += 1;
            (row.f, before.f, before.f - 0.25 * row.e, row.e)
        };
        let excess = lhs - rhs;
        if excess > AUDIT_SLACK * before.f.abs().max(1.0) {
            rep.max_excess = rep.max_excess.max(excess);
            rep.violations.push(Violation {
                row: i,
                event: rows[i].event,
                kind: label,
                x: row.x,
                before: prior,
                after: lhs,
                e,
                excess,
            });
        }
        i += 1;
    }
    rep
}

/// ψ(x, y) = P((x−x_c)/r_x)·P((y−y_c)/r_y) with P(t) = (1−t²)⁴ on |t| < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: [f64; 2],
    pub radius: [f64; 2],
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - t * t).powi(4)
    }
}

/// ∫_{−1}^{t} P, clamped to [−1, 1].
fn bump_integral(t: f64) -> f64 {
    let t = t.clamp(-1.0, 1.0);
    let p = |t: f64| t - 4.0 * t.powi(3) / 3.0 + 6.0 * t.powi(5) / 5.0 - 4.0 * t.powi(7) / 7.0 + t.powi(9) / 9.0;
    p(t) - p(-1.0)
}

impl TestFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.ax(x) * self.by(y)
    }

    fn ax(&self, x: f64) -> f64 {
        bump((x - self.center[0]) / self.radius[0])
    }

    fn by(&self, y: f64) -> f64 {
        bump((y - self.center[1]) / self.radius[1])
    }

    /// ∫_{y0}^{y1} of the y factor.
    fn by_integral(&self, y0: f64, y1: f64) -> f64 {
        let r = self.radius[1];
        let c = self.center[1];
        r * (bump_integral((y1 - c) / r) - bump_integral((y0 - c) / r))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.center[0] - self.radius[0], self.center[0] + self.radius[0])
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.center[1] - self.radius[1], self.center[1] + self.radius[1])
    }
}

/// Accumulates ∬(W ψ_x + H ψ_y + G ψ) for the tracked solution, written as front and
/// reaction-line boundary terms plus the source integral over each constant region.
#[derive(Debug, Clone)]
pub struct WeakResidual {
    pub psi: TestFunction,
    /// ±1 for η = ±W.
    pub eta_sign: f64,
    acc: [f64; 5],
    covered_to: f64,
    gas: GasModel,
}

impl WeakResidual {
    /// The support must lie in x > 0 and strictly above the wall.
    pub fn new(psi: TestFunction, eta_sign: f64, mesh: &WallMesh, gas: &GasModel) -> Result<Self> {
        let (x0, x1) = psi.x_range();
        let (y0, _) = psi.y_range();
        if !(psi.radius[0] > 0.0 && psi.radius[1] > 0.0) {
            return domain("test function radii must be positive");
        }
        if x0 < 0.0 {
            return domain(format!("test function support reaches x = {x0} < 0"));
        }
        let top_wall = (0..=64).map(|i| mesh.gh(x0 + (x1 - x0) * i as f64 / 64.0)).fold(f64::NEG_INFINITY, f64::max);
        let top_wall = mesh
            .corners
            .iter()
            .filter(|c| c[0] >= x0 && c[0] <= x1)
            .map(|c| c[1])
            .fold(top_wall, f64::max);
        if y0 <= top_wall {
            return domain(format!("test function support (y >= {y0}) meets the wall (max g_h = {top_wall})"));
        }
        if eta_sign.abs() != 1.0 {
            return domain("eta sign must be +1 or -1");
        }
        Ok(WeakResidual { psi, eta_sign, acc: [0.0; 5], covered_to: 0.0, gas: *gas })
    }

    pub fn vector(&self) -> Result<[f64; 5]> {
        let (_, x1) = self.psi.x_range();
        if self.covered_to < x1 {
            return domain(format!("test function support extends to x = {x1} beyond the computed x = {}", self.covered_to));
        }
        Ok(self.acc.map(|v| self.eta_sign * v))
    }

    /// Euclidean norm of the residual vector.
    pub fn value(&self) -> Result<f64> {
        Ok(self.vector()?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

impl Observer for WeakResidual {
    fn interval(&mut self, st: &SimulationState, x0: f64, x1: f64) -> Result<()> {
        self.covered_to = self.covered_to.max(x1);
        let (sx0, sx1) = self.psi.x_range();
        let (a, b) = (x0.max(sx0), x1.min(sx1));
        if !(b > a) {
            return Ok(());
        }
        let (sy0, sy1) = self.psi.y_range();
        let panels = ((b - a) / (0.25 * self.psi.radius[0])).ceil().max(1.0) as usize;
        let g = &self.gas;
        // fronts: ∫ψ(x, y(x))·(s[W] − [H]) dx
        for (i, f) in st.fronts.iter().enumerate() {
            let (ya, yb) = (f.y_at(a), f.y_at(b));
            if ya.max(yb) <= sy0 || ya.min(yb) >= sy1 {
                continue;
            }
            let (ub, ua) = (&st.states[i], &st.states[i + 1]);
            let (wb, wa) = (flux_w(ub, g), flux_w(ua, g));
            let (hb, ha) = (flux_h(ub, g), flux_h(ua, g));
            let line = gauss_legendre(|x| self.psi.eval(x, f.y_at(x)), a, b, panels);
            for k in 0..5 {
                self.acc[k] += line * (f.slope * (wa[k] - wb[k]) - (ha[k] - hb[k]));
            }
        }
        // sources over each constant region
        if st.states.iter().any(|s| s.z > 0.0) && g.q_tilde >= 0.0 {
            let src: Vec<[f64; 5]> = st.states.iter().map(|s| source_g(s, g)).collect::<Result<_>>()?;
            let mut acc = [0.0; 5];
            for k in [3, 4] {
                acc[k] = gauss_legendre(
                    |x| {
                        let ax = self.psi.ax(x);
                        if ax == 0.0 {
                            return 0.0;
                        }
                        let mut lo = st.mesh.gh(x);
                        let mut s = 0.0;
                        for (j, gj) in src.iter().enumerate() {
                            let hi = if j < st.fronts.len() { st.fronts[j].y_at(x) } else { f64::INFINITY };
                            if gj[k] != 0.0 {
                                s += gj[k] * self.psi.by_integral(lo.max(sy0), hi.min(sy1).max(lo.max(sy0)));
                            }
                            lo = hi;
                        }
                        ax * s
                    },
                    a,
                    b,
                    panels,
                );
            }
            for k in 0..5 {
                self.acc[k] += acc[k];
            }
        }
        Ok(())
    }

    fn reaction_line(&mut self, _st: &SimulationState, slice: &ReactionSlice) -> Result<()> {
        let ax = self.psi.ax(slice.x);
        if ax == 0.0 {
            return Ok(());
        }
        let (sy0, sy1) = self.psi.y_range();
        let mut lo = slice.wall_y;
        for j in 0..slice.pre.len() {
            let hi = if j < slice.ys.len() { slice.ys[j] } else { f64::INFINITY };
            let w = self.psi.by_integral(lo.max(sy0), hi.min(sy1).max(lo.max(sy0)));
            if w != 0.0 {
                let (wm, wp) = (flux_w(&slice.pre[j], &self.gas), flux_w(&slice.post[j], &self.gas));
                for k in 0..5 {
                    self.acc[k] += ax * w * (wm[k] - wp[k]);
                }
            }
            lo = hi;
        }
        Ok(())
    }
}
