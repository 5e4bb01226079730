//! Riemann solvers: the exact five-wave solve, the ν-split accurate fan, the simplified
//! solvers that emit a non-physical front, and the wall solvers (corner, reflection).

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::curves::{self, compose_states, contact_composite, eigenvalue, phi, phi5_inverse, Family};
use crate::error::{domain, numerical, FlowError, Result};
use crate::gas::{FlowState, GasModel};
use crate::root;

/// Residual target of the Newton solve, in scaled primitive variables.
pub const RIEMANN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiemannSolution {
    pub alphas: [f64; 5],
    /// U_b, the four middle states, U_a (as reproduced by compose_phi).
    pub states: [FlowState; 6],
    pub residual: f64,
}

impl RiemannSolution {
    pub fn middle_states(&self) -> [FlowState; 4] {
        [self.states[1], self.states[2], self.states[3], self.states[4]]
    }
}

/// What a front carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WaveKind {
    /// Family 1 or 5 with its λ-shift strength.
    Nonlinear { family: Family, alpha: f64 },
    /// Composite 2-3-4 contact (σ₂, σ₃, σ₄).
    Contact { s: [f64; 3] },
    NonPhysical { eps: f64 },
}

impl WaveKind {
    /// Family class used for ordering: 1, 2 (any contact), 5, 6 (non-physical).
    pub fn class(&self) -> u8 {
        match self {
            WaveKind::Nonlinear { family: Family::F1, .. } => 1,
            WaveKind::Nonlinear { .. } => 5,
            WaveKind::Contact { .. } => 2,
            WaveKind::NonPhysical { .. } => 6,
        }
    }

    pub fn is_shock(&self) -> bool {
        matches!(self, WaveKind::Nonlinear { alpha, .. } if *alpha < 0.0)
    }

    pub fn is_rarefaction(&self) -> bool {
        matches!(self, WaveKind::Nonlinear { alpha, .. } if *alpha > 0.0)
    }

    /// Sum of absolute strengths.
    pub fn magnitude(&self) -> f64 {
        match self {
            WaveKind::Nonlinear { alpha, .. } => alpha.abs(),
            WaveKind::Contact { s } => s.iter().map(|x| x.abs()).sum(),
            WaveKind::NonPhysical { eps } => *eps,
        }
    }

    /// Apply the wave's curve map to a below state.
    pub fn apply(&self, ub: &FlowState, gas: &GasModel) -> Result<FlowState> {
        match self {
            WaveKind::Nonlinear { family, alpha } => phi(*family, *alpha, ub, gas),
            WaveKind::Contact { s } => contact_composite(s, ub, gas),
            WaveKind::NonPhysical { .. } => {
                Err(FlowError::Contract("a non-physical front has no curve map".into()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanFront {
    pub kind: WaveKind,
    pub slope: f64,
}

/// Fronts bottom-to-top; `states[i]` lies below `fronts[i]` and `states[i + 1]` above it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontFan {
    pub fronts: Vec<FanFront>,
    pub states: Vec<FlowState>,
}

impl FrontFan {
    pub fn empty(u: FlowState) -> Self {
        FrontFan { fronts: Vec::new(), states: vec![u] }
    }

    pub fn top(&self) -> &FlowState {
        self.states.last().expect("fan has at least one state")
    }

    fn push(&mut self, kind: WaveKind, above: FlowState, slope: f64) {
        self.fronts.push(FanFront { kind, slope });
        self.states.push(above);
    }

    /// Total strength carried by fronts of the given class.
    pub fn strength_sum(&self, class: u8) -> f64 {
        self.fronts.iter().filter(|f| f.kind.class() == class).map(|f| f.kind.magnitude()).sum()
    }

    pub fn np_strength(&self) -> f64 {
        self.strength_sum(6)
    }
}

/// Propagation slope of a physical front joining `ub` to `ua`.
pub fn front_slope(kind: &WaveKind, ub: &FlowState, ua: &FlowState, gas: &GasModel) -> Result<f64> {
    match kind {
        WaveKind::Nonlinear { family, alpha } if *alpha < 0.0 => {
            curves::shock_slope(*family, ub, ua, gas)
        }
        WaveKind::Nonlinear { family, .. } => eigenvalue(*family, ua, gas),
        WaveKind::Contact { .. } => Ok(ub.v / ub.u),
        WaveKind::NonPhysical { .. } => {
            Err(FlowError::Contract("non-physical slope is fixed per run".into()))
        }
    }
}

fn scales(u: &FlowState) -> [f64; 4] {
    [u.speed(), u.speed(), u.p, u.rho]
}

fn scaled_residual(alphas: &[f64; 5], ub: &FlowState, ua: &FlowState, gas: &GasModel) -> Result<Vector4<f64>> {
    let s = scales(ub);
    let out = compose_states(alphas, ub, gas)?[5];
    let a = out.to_array();
    let b = ua.to_array();
    Ok(Vector4::new(
        (a[0] - b[0]) / s[0],
        (a[1] - b[1]) / s[1],
        (a[2] - b[2]) / s[2],
        (a[3] - b[3]) / s[3],
    ))
}

const UNKNOWNS: [usize; 4] = [0, 1, 2, 4];

fn linear_guess(ub: &FlowState, ua: &FlowState, gas: &GasModel) -> Result<[f64; 5]> {
    let s = scales(ub);
    let mut m = Matrix4::zeros();
    for (col, &j) in UNKNOWNS.iter().enumerate() {
        let r = curves::curve_tangent(Family::ALL[j], ub, gas)?;
        for row in 0..4 {
            m[(row, col)] = r[row] / s[row];
        }
    }
    let d = ua.to_array();
    let b = ub.to_array();
    let rhs = Vector4::from_fn(|r, _| (d[r] - b[r]) / s[r]);
    let x = m.lu().solve(&rhs).ok_or_else(|| FlowError::Numerical("singular eigenbasis".into()))?;
    let mut out = [0.0; 5];
    for (k, &j) in UNKNOWNS.iter().enumerate() {
        out[j] = x[k];
    }
    out[3] = ua.z - ub.z;
    Ok(out)
}

fn newton(ub: &FlowState, ua: &FlowState, start: [f64; 5], gas: &GasModel) -> Result<RiemannSolution> {
    let mut x = start;
    x[3] = ua.z - ub.z;
    let mut f = scaled_residual(&x, ub, ua, gas)?;
    let mut fn_ = f.norm();
    for _ in 0..50 {
        if fn_ <= 1e-15 {
            break;
        }
        let mut jac = Matrix4::zeros();
        for (col, &j) in UNKNOWNS.iter().enumerate() {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fp = scaled_residual(&xp, ub, ua, gas)?;
            let fm = scaled_residual(&xm, ub, ua, gas)?;
            jac.set_column(col, &((fp - fm) / (2.0 * h)));
        }
        let dx = jac
            .lu()
            .solve(&(-f))
            .ok_or_else(|| FlowError::Numerical("Riemann solver divergence: singular Jacobian".into()))?;
        let mut lam = 1.0;
        let mut accepted = false;
        while lam > 1e-4 {
            let mut xn = x;
            for (k, &j) in UNKNOWNS.iter().enumerate() {
                xn[j] += lam * dx[k];
            }
            if let Ok(fnew) = scaled_residual(&xn, ub, ua, gas) {
                let nn = fnew.norm();
                if nn < fn_ || (nn <= 1e-13 && nn <= 2.0 * fn_) {
                    x = xn;
                    f = fnew;
                    accepted = nn < fn_;
                    fn_ = nn;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(fn_ <= RIEMANN_TOL) {
        return numerical(format!("Riemann solver divergence (residual {fn_:e})"));
    }
    let states = compose_states(&x, ub, gas)?;
    Ok(RiemannSolution { alphas: x, states, residual: fn_ })
}

/// Exact five-wave solution joining `ub` (below) to `ua` (above).
pub fn solve_riemann(ub: &FlowState, ua: &FlowState, gas: &GasModel) -> Result<RiemannSolution> {
    eigenvalue(Family::F1, ub, gas)?;
    eigenvalue(Family::F1, ua, gas)?;
    if ub == ua {
        return Ok(RiemannSolution { alphas: [0.0; 5], states: [*ub; 6], residual: 0.0 });
    }
    let guess = linear_guess(ub, ua, gas)?;
    if let Ok(sol) = newton(ub, ua, guess, gas) {
        return Ok(sol);
    }
    // continuation along the straight path in primitive variables
    for n in [8usize, 64] {
        let mut x = [0.0; 5];
        let mut ok = true;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let a = ub.to_array();
            let b = ua.to_array();
            let target = FlowState::from_array(std::array::from_fn(|i| a[i] + t * (b[i] - a[i])));
            match newton(ub, &target, x, gas) {
                Ok(s) => x = s.alphas,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return newton(ub, ua, x, gas);
        }
    }
    numerical("Riemann solver divergence")
}

/// Number of pieces for a rarefaction of the given family and strength.
pub type SplitRule<'a> = &'a dyn Fn(Family, f64) -> usize;

/// Turn a Riemann solution into fronts, splitting rarefactions per `split` and skipping
/// components with magnitude ≤ `drop_tol`. The top state is the composition of the kept
/// waves; see [`close_fan`] for reconciling it with the target state.
pub fn fan_from_solution(sol: &RiemannSolution, split: SplitRule, drop_tol: f64, gas: &GasModel) -> Result<FrontFan> {
    let mut fan = FrontFan::empty(sol.states[0]);
    let a = sol.alphas;
    let mut waves = Vec::with_capacity(3);
    if a[0].abs() > drop_tol {
        waves.push(WaveKind::Nonlinear { family: Family::F1, alpha: a[0] });
    }
    let s = [a[1], a[2], a[3]].map(|x| if x.abs() > drop_tol { x } else { 0.0 });
    if s.iter().any(|x| *x != 0.0) {
        waves.push(WaveKind::Contact { s });
    }
    if a[4].abs() > drop_tol {
        waves.push(WaveKind::Nonlinear { family: Family::F5, alpha: a[4] });
    }
    if waves.is_empty() {
        // keep the dominant component so that distinct states stay separated
        let k = (0..5).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
        if a[k] != 0.0 {
            waves.push(match k {
                0 => WaveKind::Nonlinear { family: Family::F1, alpha: a[0] },
                4 => WaveKind::Nonlinear { family: Family::F5, alpha: a[4] },
                _ => WaveKind::Contact { s: [a[1], a[2], a[3]] },
            });
        }
    }
    for w in waves {
        push_kind(&mut fan, w, split, gas)?;
    }
    Ok(fan)
}

fn push_kind(fan: &mut FrontFan, w: WaveKind, split: SplitRule, gas: &GasModel) -> Result<()> {
    let base = *fan.top();
    match w {
        WaveKind::Nonlinear { family, alpha } if alpha > 0.0 => {
            let n = split(family, alpha).max(1);
            for k in 1..=n {
                let below = *fan.top();
                let above = phi(family, alpha * k as f64 / n as f64, &base, gas)?;
                let kind = WaveKind::Nonlinear { family, alpha: alpha / n as f64 };
                let slope = front_slope(&kind, &below, &above, gas)?;
                fan.push(kind, above, slope);
            }
        }
        _ => {
            let above = w.apply(&base, gas)?;
            let slope = front_slope(&w, &base, &above, gas)?;
            fan.push(w, above, slope);
        }
    }
    Ok(())
}

/// Reconcile the fan's top state with `ua`: overwrite it when the mismatch is at most
/// `absorb_tol`, otherwise close with a non-physical front at `lambda_hat` (if given).
/// Returns the mismatch.
pub fn close_fan(fan: &mut FrontFan, ua: &FlowState, lambda_hat: Option<f64>, absorb_tol: f64) -> Result<f64> {
    let gap = fan.top().dist(ua);
    if gap == 0.0 {
        return Ok(0.0);
    }
    if gap <= absorb_tol && !fan.fronts.is_empty() {
        *fan.states.last_mut().expect("non-empty") = *ua;
        return Ok(gap);
    }
    match lambda_hat {
        Some(l) => push_np(fan, ua, l)?,
        None => {
            return numerical(format!("fan does not reach the target state (gap {gap:e})"));
        }
    }
    Ok(gap)
}

/// ν-split accurate fan.
pub fn accurate_solver(ub: &FlowState, ua: &FlowState, nu: usize, gas: &GasModel) -> Result<FrontFan> {
    let sol = solve_riemann(ub, ua, gas)?;
    let scale = ub.speed().max(ub.p).max(ub.rho);
    let mut fan = fan_from_solution(&sol, &|_, _| nu, 1e-12, gas)?;
    close_fan(&mut fan, ua, None, 1e-9 * scale)?;
    Ok(fan)
}

/// A contact's Z jump limited so that Z stays in [0, 1] above `ub`; other waves unchanged.
fn limit_z(w: WaveKind, ub: &FlowState) -> WaveKind {
    match w {
        WaveKind::Contact { s: [a, b, dz] } => WaveKind::Contact { s: [a, b, (ub.z + dz).clamp(0.0, 1.0) - ub.z] },
        other => other,
    }
}

fn push_np(fan: &mut FrontFan, ua: &FlowState, lambda_hat: f64) -> Result<()> {
    let eps = fan.top().dist(ua);
    let max_phys = fan.fronts.iter().map(|f| f.slope).fold(f64::NEG_INFINITY, f64::max);
    if max_phys >= lambda_hat {
        return Err(FlowError::Config {
            field: "numerics.lambda_hat".into(),
            msg: format!("λ̂ = {lambda_hat} does not exceed physical slope {max_phys}"),
        });
    }
    if eps > 0.0 {
        fan.push(WaveKind::NonPhysical { eps }, *ua, lambda_hat);
    }
    Ok(())
}

/// Simplified interaction: lower front `beta` (family j) and upper front `alpha` (family i ≤ j).
pub fn simplified_solver_interaction(
    ub: &FlowState,
    ua: &FlowState,
    beta: &WaveKind,
    alpha: &WaveKind,
    lambda_hat: f64,
    gas: &GasModel,
) -> Result<FrontFan> {
    let mut fan = FrontFan::empty(*ub);
    let merged = match (beta, alpha) {
        (
            WaveKind::Nonlinear { family: fj, alpha: b },
            WaveKind::Nonlinear { family: fi, alpha: a },
        ) if fi == fj => Some(WaveKind::Nonlinear { family: *fi, alpha: a + b }),
        (WaveKind::Contact { s: sb }, WaveKind::Contact { s: sa }) => {
            Some(WaveKind::Contact { s: [sa[0] + sb[0], sa[1] + sb[1], sa[2] + sb[2]] })
        }
        _ => None,
    };
    let waves: Vec<WaveKind> = match merged {
        Some(w) => vec![w],
        None => vec![*alpha, *beta],
    };
    for w in waves {
        let below = *fan.top();
        let w = limit_z(w, &below);
        if w.magnitude() == 0.0 {
            continue;
        }
        let above = w.apply(&below, gas)?;
        let slope = front_slope(&w, &below, &above, gas)?;
        fan.push(w, above, slope);
    }
    push_np(&mut fan, ua, lambda_hat)?;
    Ok(fan)
}

/// Non-physical front (below) crossing a physical front `alpha` (above).
pub fn simplified_solver_np_crossing(
    ub: &FlowState,
    ua: &FlowState,
    alpha: &WaveKind,
    lambda_hat: f64,
    gas: &GasModel,
) -> Result<FrontFan> {
    let mut fan = FrontFan::empty(*ub);
    let alpha = limit_z(*alpha, ub);
    if alpha.magnitude() > 0.0 {
        let above = alpha.apply(ub, gas)?;
        let slope = front_slope(&alpha, ub, &above, gas)?;
        fan.push(alpha, above, slope);
    }
    push_np(&mut fan, ua, lambda_hat)?;
    Ok(fan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerMode {
    Small,
    Strong,
}

/// State below a 5-wave whose above state is `ua`, with flow angle `theta`.
/// Returns (ε₅, U_below) with Φ₅(ε₅, U_below) = ua.
pub fn turn_to_angle(ua: &FlowState, theta: f64, gas: &GasModel) -> Result<(f64, FlowState)> {
    let th0 = ua.angle();
    if theta == th0 {
        return Ok((0.0, *ua));
    }
    let f = |e: f64| -> Result<f64> { Ok(phi5_inverse(e, ua, gas)?.angle() - theta) };
    // θ of the below state decreases with ε
    let dir = if theta < th0 { 1.0 } else { -1.0 };
    let step = dir * (theta - th0).abs().max(1e-14);
    let (a, b) = root::bracket(f, 0.0, step, dir * 50.0)?;
    let e = if a == b { a } else { root::brent(f, a.min(b), a.max(b), 1e-17)? };
    let ub = phi5_inverse(e, ua, gas)?;
    Ok((e, ub))
}

/// Solve the corner problem for a turning `omega` of the wall.
pub fn corner_solver(u_prev: &FlowState, omega: f64, mode: CornerMode, gas: &GasModel) -> Result<(f64, FlowState)> {
    if omega == 0.0 {
        return Ok((0.0, *u_prev));
    }
    if mode == CornerMode::Strong && omega > 0.0 {
        return domain("strong corner mode needs a convex corner (ω < 0)");
    }
    turn_to_angle(u_prev, u_prev.angle() + omega, gas)
        .map_err(|e| FlowError::Domain(format!("turning exceeds θ_crit or corner solve failed: {e}")))
}

/// Reflection of a 1-front of strength `alpha1` at a wall with outer normal `n`.
pub fn reflection_solver(ub: &FlowState, alpha1: f64, n: [f64; 2], gas: &GasModel) -> Result<(f64, FlowState)> {
    let ua = phi(Family::F1, alpha1, ub, gas)?;
    let theta_w = n[0].atan2(-n[1]);
    turn_to_angle(&ua, theta_w, gas)
}
