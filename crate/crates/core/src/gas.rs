//! Polytropic reacting gas: closure relations, the J invariant and the Arrhenius rate.

use serde::{Deserialize, Serialize};

use crate::error::{domain, numerical, Result};
use crate::quad;

/// Slack allowed on Z before it is treated as an error rather than round-off.
pub const Z_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasModel {
    pub gamma: f64,
    #[serde(rename = "R")]
    pub r_gas: f64,
    #[serde(default)]
    pub c_v: Option<f64>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub q_tilde: f64,
    #[serde(default)]
    pub phi_alpha: f64,
    #[serde(default, rename = "phi_E")]
    pub phi_e: f64,
    #[serde(default = "one", rename = "T_floor")]
    pub t_floor: f64,
}

fn one() -> f64 {
    1.0
}

impl GasModel {
    /// Inert gas with unit gas constant and a rate of 1.
    pub fn ideal(gamma: f64) -> Self {
        GasModel {
            gamma,
            r_gas: 1.0,
            c_v: None,
            kappa: 1.0,
            q_tilde: 0.0,
            phi_alpha: 0.0,
            phi_e: 0.0,
            t_floor: 1e-3,
        }
    }

    /// Returns the offending field name and a message on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let fin = |v: f64| v.is_finite();
        if !(fin(self.gamma) && self.gamma > 1.0) {
            return Err(("gamma", format!("must be > 1, got {}", self.gamma)));
        }
        if !(fin(self.r_gas) && self.r_gas > 0.0) {
            return Err(("R", format!("must be > 0, got {}", self.r_gas)));
        }
        if !(fin(self.kappa) && self.kappa >= 0.0) {
            return Err(("kappa", "must be >= 0".into()));
        }
        if !(fin(self.q_tilde) && self.q_tilde >= 0.0) {
            return Err(("q_tilde", "must be >= 0".into()));
        }
        if !(fin(self.phi_alpha) && self.phi_alpha >= 0.0) {
            return Err(("phi_alpha", "must be >= 0".into()));
        }
        if !fin(self.phi_e) || self.phi_e < 0.0 {
            return Err(("phi_E", "must be >= 0".into()));
        }
        if !(fin(self.t_floor) && self.t_floor > 0.0) {
            return Err(("T_floor", "must be > 0".into()));
        }
        if let Some(cv) = self.c_v {
            if !(fin(cv) && cv > 0.0) {
                return Err(("c_v", "must be > 0".into()));
            }
            let g = 1.0 + self.r_gas / cv;
            if ((g - self.gamma) / self.gamma).abs() > 1e-12 {
                return Err(("c_v", format!("gamma = 1 + R/c_v violated: 1 + R/c_v = {g}")));
            }
        }
        Ok(())
    }

    /// Rate lower bound L_* = φ(T_floor).
    pub fn rate_floor(&self) -> f64 {
        self.rate_unchecked(self.t_floor)
    }

    fn rate_unchecked(&self, t: f64) -> f64 {
        t.powf(self.phi_alpha) * (-self.phi_e / (self.r_gas * t)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowState {
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub rho: f64,
    #[serde(rename = "Z")]
    pub z: f64,
}

impl FlowState {
    pub const fn new(u: f64, v: f64, p: f64, rho: f64, z: f64) -> Self {
        FlowState { u, v, p, rho, z }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.u, self.v, self.p, self.rho, self.z]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        FlowState::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn angle(&self) -> f64 {
        self.v.atan2(self.u)
    }

    /// Basic validity: finite, p > 0, ρ > 0, Z in [0, 1] up to slack.
    pub fn check(&self) -> Result<()> {
        if !self.to_array().iter().all(|x| x.is_finite()) {
            return domain(format!("non-finite state {self:?}"));
        }
        if self.p <= 0.0 || self.rho <= 0.0 {
            return domain(format!("non-positive pressure or density in {self:?}"));
        }
        if self.z < -Z_SLACK || self.z > 1.0 + Z_SLACK {
            return domain(format!("Z = {} outside [0, 1]", self.z));
        }
        Ok(())
    }

    /// Euclidean distance in primitive variables.
    pub fn dist(&self, o: &FlowState) -> f64 {
        let a = self.to_array();
        let b = o.to_array();
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

/// Clamp Z to [0, 1] if the violation is round-off sized.
pub fn clamp_fraction(z: f64) -> Result<f64> {
    if (-Z_SLACK..=1.0 + Z_SLACK).contains(&z) {
        Ok(z.clamp(0.0, 1.0))
    } else {
        domain(format!("Z = {z} outside [0, 1]"))
    }
}

pub fn sound_speed(p: f64, rho: f64, gas: &GasModel) -> Result<f64> {
    if !(p > 0.0 && rho > 0.0) {
        return domain(format!("sound speed needs p > 0 and rho > 0 (p={p}, rho={rho})"));
    }
    Ok((gas.gamma * p / rho).sqrt())
}

pub fn sound(u: &FlowState, gas: &GasModel) -> f64 {
    (gas.gamma * u.p / u.rho).sqrt()
}

/// (q, θ, θ_ma)
pub fn flow_angles(u: &FlowState, gas: &GasModel) -> Result<(f64, f64, f64)> {
    let c = sound_speed(u.p, u.rho, gas)?;
    let q = u.speed();
    if q <= c {
        return domain("subsonic or sonic state");
    }
    let theta = (u.v / u.u).atan();
    let ma = (c / (q * q - c * c).sqrt()).atan();
    Ok((q, theta, ma))
}

pub fn mach(u: &FlowState, gas: &GasModel) -> f64 {
    u.speed() / sound(u, gas)
}

pub fn bernoulli(u: &FlowState, gas: &GasModel) -> f64 {
    let c2 = gas.gamma * u.p / u.rho;
    0.5 * (u.u * u.u + u.v * u.v) + c2 / (gas.gamma - 1.0)
}

/// p/ρ^γ
pub fn entropy(u: &FlowState, gas: &GasModel) -> f64 {
    u.p / u.rho.powf(gas.gamma)
}

pub fn temperature(u: &FlowState, gas: &GasModel) -> f64 {
    u.p / (gas.r_gas * u.rho)
}

pub fn reaction_rate(t: f64, gas: &GasModel) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("temperature must be positive, got {t}"));
    }
    Ok(gas.rate_unchecked(t))
}

/// Sonic speed on the Bernoulli level 𝓑: the reference lower limit of J.
pub fn sonic_speed_on_level(b: f64, gas: &GasModel) -> f64 {
    (2.0 * (gas.gamma - 1.0) * b / (gas.gamma + 1.0)).sqrt()
}

/// J(q, 𝓑) with lower limit at the sonic speed of the level set.
///
/// Integrand √((γ+1)μ² − 2(γ−1)𝓑) / (μ √((γ−1)(2𝓑 − μ²))). With (γ−1) outside the
/// root instead, J ± θ would not be constant along rarefaction curves.
pub fn riemann_invariant_j(q: f64, b: f64, gas: &GasModel) -> Result<f64> {
    let g = gas.gamma;
    let cs = sonic_speed_on_level(b, gas);
    let qmax = (2.0 * b).sqrt();
    if !(q >= cs && q < qmax) {
        return domain(format!("J needs {cs} <= q < {qmax}, got q = {q}"));
    }
    if q == cs {
        return Ok(0.0);
    }
    // μ = c_s cosh t removes the square-root behaviour at the sonic end
    let tmax = (q / cs).acosh();
    let k = ((g + 1.0) / (g - 1.0)).sqrt() * cs;
    let f = |t: f64| {
        let ch = t.cosh();
        let sh = t.sinh();
        k * sh * sh / (ch * (2.0 * b - cs * cs * ch * ch).sqrt())
    };
    let v = quad::integrate(f, 0.0, tmax, 1e-13)?;
    if !v.is_finite() {
        return numerical("J quadrature failed");
    }
    Ok(v)
}

/// Integrand of J in the speed variable.
pub fn j_integrand(mu: f64, b: f64, gas: &GasModel) -> f64 {
    let g = gas.gamma;
    ((g + 1.0) * mu * mu - 2.0 * (g - 1.0) * b).sqrt() / (mu * ((g - 1.0) * (2.0 * b - mu * mu)).sqrt())
}

/// Classical Prandtl–Meyer function ν(M).
pub fn prandtl_meyer(m: f64, gamma: f64) -> f64 {
    let a = ((gamma + 1.0) / (gamma - 1.0)).sqrt();
    let s = (m * m - 1.0).max(0.0).sqrt();
    a * (s / a).atan() - s.atan()
}

/// dν/dM
pub fn prandtl_meyer_deriv(m: f64, gamma: f64) -> f64 {
    let s = (m * m - 1.0).max(0.0).sqrt();
    s / (m * (1.0 + 0.5 * (gamma - 1.0) * m * m))
}

/// Maximal Prandtl–Meyer angle (M → ∞).
pub fn prandtl_meyer_max(gamma: f64) -> f64 {
    0.5 * std::f64::consts::PI * (((gamma + 1.0) / (gamma - 1.0)).sqrt() - 1.0)
}

/// Inverse of ν by safeguarded Newton on M ≥ 1.
pub fn prandtl_meyer_inverse(nu: f64, gamma: f64) -> Result<f64> {
    let numax = prandtl_meyer_max(gamma);
    if !(nu >= 0.0 && nu < numax) {
        return domain(format!("Prandtl-Meyer angle {nu} outside [0, {numax})"));
    }
    if nu == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while prandtl_meyer(hi, gamma) < nu {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return numerical("Prandtl-Meyer inversion ran away");
        }
    }
    let mut m = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = prandtl_meyer(m, gamma) - nu;
        if f > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
        let d = prandtl_meyer_deriv(m, gamma);
        let mut next = m - f / d;
        if !(next > lo && next < hi) || d <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - m).abs() <= 1e-15 * m {
            return Ok(next);
        }
        m = next;
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(m);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleRegion {
    pub u_inf: FlowState,
    pub delta0: f64,
    pub theta_crit: f64,
    pub c_star: f64,
    pub q_star: f64,
    pub scale_b: f64,
    pub scale_s: f64,
    j_inf: f64,
    b_inf: f64,
    s_inf: f64,
}

impl AdmissibleRegion {
    pub fn new(u_inf: FlowState, delta0: f64, gas: &GasModel) -> Result<Self> {
        u_inf.check()?;
        let c = sound(&u_inf, gas);
        if u_inf.u <= c {
            return domain("reference state must satisfy u > c");
        }
        if !(delta0 > 0.0) {
            return domain("delta0 must be positive");
        }
        let g = gas.gamma;
        let u2 = u_inf.u * u_inf.u;
        let c_star = ((g - 1.0) * u2 / (g + 1.0) + 2.0 * c * c / (g + 1.0)).sqrt();
        let q_star = (u2 + 2.0 * c * c / (g - 1.0)).sqrt();
        let b_inf = bernoulli(&u_inf, gas);
        let s_inf = entropy(&u_inf, gas);
        let j_inf = riemann_invariant_j(u_inf.speed(), b_inf, gas)?;
        let theta_crit = critical_angle(&u_inf, c_star, gas)?;
        Ok(AdmissibleRegion {
            u_inf,
            delta0,
            theta_crit,
            c_star,
            q_star,
            scale_b: b_inf,
            scale_s: s_inf,
            j_inf: j_inf + u_inf.angle(),
            b_inf,
            s_inf,
        })
    }

    pub fn contains(&self, u: &FlowState, gas: &GasModel) -> bool {
        let Ok((q, theta, _)) = flow_angles(u, gas) else {
            return false;
        };
        let b = bernoulli(u, gas);
        let Ok(j) = riemann_invariant_j(q, b, gas) else {
            return false;
        };
        let d = self.delta0;
        (j + theta - self.j_inf).abs() < d
            && (b - self.b_inf).abs() < d * self.scale_b
            && (entropy(u, gas) - self.s_inf).abs() < d * self.scale_s
            && u.z >= 0.0
            && u.z < d
            && theta > self.theta_crit + d
            && theta < d
    }
}

/// State on the 5-rarefaction through `base` (same 𝓑, p/ρ^γ, Z) at Mach `m`.
pub(crate) fn isentrope_state(base: &FlowState, m: f64, theta: f64, gas: &GasModel) -> FlowState {
    let g = gas.gamma;
    let b = bernoulli(base, gas);
    let s = entropy(base, gas);
    let c2 = 2.0 * (g - 1.0) * b / (2.0 + (g - 1.0) * m * m);
    let q = m * c2.sqrt();
    let rho = (c2 / (g * s)).powf(1.0 / (g - 1.0));
    let p = s * rho.powf(g);
    FlowState::new(q * theta.cos(), q * theta.sin(), p, rho, base.z)
}

/// Infimum of θ along the 5-rarefaction through U∞ with u > c_*.
fn critical_angle(u_inf: &FlowState, c_star: f64, gas: &GasModel) -> Result<f64> {
    let g = gas.gamma;
    let m0 = mach(u_inf, gas);
    let nu0 = prandtl_meyer(m0, g);
    let th0 = u_inf.angle();
    let f = |m: f64| {
        let th = th0 - (prandtl_meyer(m, g) - nu0);
        let s = isentrope_state(u_inf, m, th, gas);
        (s.u - c_star, th)
    };
    let mut lo = m0;
    let mut hi = m0;
    let mut found = false;
    for _ in 0..4000 {
        hi *= 1.01;
        if f(hi).0 <= 0.0 {
            found = true;
            break;
        }
        lo = hi;
        if hi > 1e6 {
            break;
        }
    }
    if !found {
        return Ok(th0 - (prandtl_meyer_max(g) - nu0));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid).0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(f(lo).1)
}
