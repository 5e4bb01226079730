//! Eigenstructure and elementary wave curves Φ_j of the homogeneous steady system.
//!
//! Genuinely nonlinear curves are parametrized on both branches by the change of
//! the family's own eigenvalue, α = λ_j(Φ_j(α, U)) − λ_j(U). On the rarefaction
//! branch this is exactly the normalized-eigenvector integral curve; on the shock
//! branch it gives second-order contact with it at α = 0.

use serde::{Deserialize, Serialize};

use crate::error::{domain, FlowError, Result};
use crate::gas::{
    self, bernoulli, clamp_fraction, isentrope_state, mach, prandtl_meyer, prandtl_meyer_deriv,
    sound, FlowState, GasModel,
};
use crate::root;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    F1,
    F2,
    F3,
    F4,
    F5,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::F1, Family::F2, Family::F3, Family::F4, Family::F5];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(j: usize) -> Result<Family> {
        match j {
            1 => Ok(Family::F1),
            2 => Ok(Family::F2),
            3 => Ok(Family::F3),
            4 => Ok(Family::F4),
            5 => Ok(Family::F5),
            _ => Err(FlowError::Contract(format!("no wave family {j}"))),
        }
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(self, Family::F1 | Family::F5)
    }

    /// −1 for family 1, +1 for family 5.
    fn sign(self) -> f64 {
        if self == Family::F1 {
            -1.0
        } else {
            1.0
        }
    }
}

fn require_x_supersonic(u: &FlowState, gas: &GasModel) -> Result<f64> {
    u.check()?;
    let c = sound(u, gas);
    if !(u.u > c) {
        return domain(format!("state not supersonic in x: u = {} <= c = {c}", u.u));
    }
    Ok(c)
}

pub fn eigenvalue(fam: Family, u: &FlowState, gas: &GasModel) -> Result<f64> {
    let c = require_x_supersonic(u, gas)?;
    Ok(eigenvalue_raw(fam, u, c))
}

fn eigenvalue_raw(fam: Family, u: &FlowState, c: f64) -> f64 {
    if !fam.is_nonlinear() {
        return u.v / u.u;
    }
    let q2 = u.u * u.u + u.v * u.v;
    (u.u * u.v + fam.sign() * c * (q2 - c * c).sqrt()) / (u.u * u.u - c * c)
}

/// λ_j = tan(θ ∓ θ_ma); the trigonometric form, kept for cross-checks.
pub fn eigenvalue_tan(fam: Family, u: &FlowState, gas: &GasModel) -> Result<f64> {
    let (_, th, ma) = gas::flow_angles(u, gas)?;
    Ok(match fam {
        Family::F1 => (th - ma).tan(),
        Family::F5 => (th + ma).tan(),
        _ => th.tan(),
    })
}

/// Analytic gradient of λ_j in (u, v, p, ρ, Z).
pub fn grad_eigenvalue(fam: Family, u: &FlowState, gas: &GasModel) -> Result<[f64; 5]> {
    let (q, th, ma) = gas::flow_angles(u, gas)?;
    if !fam.is_nonlinear() {
        let uu = u.u;
        return Ok([-u.v / (uu * uu), 1.0 / uu, 0.0, 0.0, 0.0]);
    }
    let sg = fam.sign();
    let c2 = gas.gamma * u.p / u.rho;
    let sec2 = 1.0 / (th + sg * ma).cos().powi(2);
    let tm = ma.tan();
    let dth = [-u.v / (q * q), u.u / (q * q)];
    let dma_uv = [-tm / q * th.cos(), -tm / q * th.sin()];
    let dma_p = gas.gamma * tm / (2.0 * u.rho * c2);
    let dma_r = -tm / (2.0 * u.rho);
    Ok([
        sec2 * (dth[0] + sg * dma_uv[0]),
        sec2 * (dth[1] + sg * dma_uv[1]),
        sec2 * sg * dma_p,
        sec2 * sg * dma_r,
        0.0,
    ])
}

/// ∇λ_j·r̃_j for j ∈ {1, 5}: (γ+1)/(2√(q²−c²))·sec³(θ ∓ θ_ma).
pub fn nonlinearity_factor(fam: Family, u: &FlowState, gas: &GasModel) -> Result<f64> {
    let (q, th, ma) = gas::flow_angles(u, gas)?;
    let c = sound(u, gas);
    let a = th + fam.sign() * ma;
    Ok((gas.gamma + 1.0) / (2.0 * (q * q - c * c).sqrt()) / a.cos().powi(3))
}

pub fn eigenvector(fam: Family, u: &FlowState, gas: &GasModel, normalized: bool) -> Result<[f64; 5]> {
    let c = require_x_supersonic(u, gas)?;
    match fam {
        Family::F1 | Family::F5 => {
            let lam = eigenvalue_raw(fam, u, c);
            let w = u.rho * (lam * u.u - u.v);
            let r = [-lam, 1.0, w, w / (c * c), 0.0];
            if !normalized {
                return Ok(r);
            }
            let k = 1.0 / nonlinearity_factor(fam, u, gas)?;
            Ok(r.map(|x| k * x))
        }
        _ if normalized => Err(FlowError::Contract(format!(
            "family {} is linearly degenerate and has no normalization",
            fam.index()
        ))),
        Family::F2 => Ok([u.u, u.v, 0.0, 0.0, 0.0]),
        Family::F3 => Ok([0.0, 0.0, 0.0, 1.0, 0.0]),
        Family::F4 => Ok([0.0, 0.0, 0.0, 0.0, 1.0]),
    }
}

/// Direction of dΦ_j/dα at α = 0 (normalized for 1, 5; raw for contacts).
pub fn curve_tangent(fam: Family, u: &FlowState, gas: &GasModel) -> Result<[f64; 5]> {
    eigenvector(fam, u, gas, fam.is_nonlinear())
}

pub fn contact_curve(fam: Family, u0: &FlowState, sigma: f64, gas: &GasModel) -> Result<FlowState> {
    let mut u = *u0;
    match fam {
        Family::F2 => {
            let e = sigma.exp();
            u.u *= e;
            u.v *= e;
        }
        Family::F3 => u.rho += sigma,
        Family::F4 => {
            let z = u.z + sigma;
            if !(-gas::Z_SLACK..=1.0 + gas::Z_SLACK).contains(&z) {
                return domain(format!("contact leaves Z in [0,1]: Z = {z}"));
            }
            u.z = clamp_fraction(z)?;
        }
        _ => return Err(FlowError::Contract("contact_curve needs family 2, 3 or 4".into())),
    }
    require_x_supersonic(&u, gas)?;
    Ok(u)
}

/// Hugoniot locus through `u0` parametrized by density; returns the state and shock slope.
/// The Lax-admissible side from a below state is ρ > ρ0 for family 1 and ρ < ρ0 for family 5.
pub fn shock_curve(fam: Family, u0: &FlowState, rho: f64, gas: &GasModel) -> Result<(FlowState, f64)> {
    if !fam.is_nonlinear() {
        return Err(FlowError::Contract("shock_curve needs family 1 or 5".into()));
    }
    u0.check()?;
    let g = gas.gamma;
    let c0 = sound(u0, gas);
    let bt = 0.5 * (g + 1.0) - 0.5 * (g - 1.0) * rho / u0.rho;
    if bt <= 0.0 {
        return domain("density ratio beyond limit (γ+1)/(γ−1)");
    }
    if !(rho > 0.0) {
        return domain("non-positive density on shock curve");
    }
    let ct2 = c0 * c0 / bt * (rho / u0.rho);
    let uu = u0.u * u0.u;
    let q2 = uu + u0.v * u0.v;
    if uu <= ct2 {
        return domain("shock speed undefined");
    }
    let s = (u0.u * u0.v + fam.sign() * ct2.sqrt() * (q2 - ct2).sqrt()) / (uu - ct2);
    let dp = c0 * c0 / bt * (rho - u0.rho);
    let p = u0.p + dp;
    let den = u0.rho * (s * u0.u - u0.v);
    let v = if dp == 0.0 { u0.v } else { u0.v + dp / den };
    let u = u0.u - s * (v - u0.v);
    let out = FlowState::new(u, v, p, rho, u0.z);
    out.check()?;
    Ok((out, s))
}

/// Point on the family's integral curve through `u0` with λ shifted by `sigma` (either sign).
fn integral_curve_point(fam: Family, u0: &FlowState, sigma: f64, gas: &GasModel) -> Result<FlowState> {
    if sigma == 0.0 {
        return Ok(*u0);
    }
    let g = gas.gamma;
    let c0 = require_x_supersonic(u0, gas)?;
    let m0 = mach(u0, gas);
    let th0 = u0.angle();
    let sg = fam.sign();
    let lam0 = eigenvalue_raw(fam, u0, c0);
    let target = (lam0 + sigma).atan();
    // θ = C − sg·ν(M), characteristic angle θ + sg·μ(M)
    let cst = th0 + sg * prandtl_meyer(m0, g);
    let theta_of = |m: f64| cst - sg * prandtl_meyer(m, g);
    let h = |m: f64| theta_of(m) + sg * (1.0 / m).asin() - target;
    let dh = |m: f64| -sg * prandtl_meyer_deriv(m, g) - sg / (m * (m * m - 1.0).sqrt());
    // h is monotone in M; bracket then polish with Newton
    let grows = (h(m0) > 0.0) == (dh(m0) < 0.0);
    let (mut lo, mut hi) = if grows { (m0, m0) } else { (1.0, m0) };
    if grows {
        let mut step = 0.1 * m0;
        loop {
            hi = lo + step;
            if h(hi) * h(m0) <= 0.0 {
                break;
            }
            lo = hi;
            step *= 2.0;
            if hi > 1e8 {
                return domain(format!("rarefaction exits admissible region at σ={sigma}"));
            }
        }
    } else {
        let hl = h(1.0 + 1e-14);
        if hl * h(m0) > 0.0 {
            return domain(format!("rarefaction exits admissible region at σ={sigma} (sonic)"));
        }
        lo = 1.0 + 1e-14;
    }
    let f = |m: f64| Ok(h(m));
    let mut m = root::brent(f, lo, hi, 1e-15 * m0)?;
    for _ in 0..3 {
        let d = dh(m);
        let step = h(m) / d;
        if !step.is_finite() {
            break;
        }
        m -= step;
    }
    let out = isentrope_state(u0, m, theta_of(m), gas);
    let c = sound(&out, gas);
    if !(out.u > c) {
        return domain(format!("rarefaction exits admissible region at σ={sigma}"));
    }
    Ok(out)
}

pub fn rarefaction_curve(fam: Family, u0: &FlowState, sigma: f64, gas: &GasModel) -> Result<FlowState> {
    if !fam.is_nonlinear() {
        return Err(FlowError::Contract("rarefaction_curve needs family 1 or 5".into()));
    }
    if sigma < 0.0 {
        return domain("rarefaction strength must be nonnegative");
    }
    integral_curve_point(fam, u0, sigma, gas)
}

/// Which side of the Hugoniot locus is Lax-admissible relative to a base state.
/// `forward`: base is the state below the front.
fn shock_side(fam: Family, forward: bool) -> f64 {
    let above_denser = fam == Family::F1;
    if above_denser == forward {
        1.0
    } else {
        -1.0
    }
}

/// Solve for the Hugoniot point of `base` on side `side` with λ_j = target.
fn hugoniot_by_lambda(
    fam: Family,
    base: &FlowState,
    target: f64,
    side: f64,
    gas: &GasModel,
) -> Result<(FlowState, f64)> {
    let g = gas.gamma;
    let lam0 = eigenvalue(fam, base, gas)?;
    let r = eigenvector(fam, base, gas, true)?;
    let dlam = target - lam0;
    let lim = if side > 0.0 { base.rho * (g + 1.0) / (g - 1.0) } else { 0.0 };
    let f = |rho: f64| -> Result<f64> {
        let (st, _) = shock_curve(fam, base, rho, gas)?;
        Ok(eigenvalue(fam, &st, gas)? - target)
    };
    let guess = (r[3] * dlam).abs().max(1e-14 * base.rho);
    let (a, b) = root::bracket(f, base.rho, side * 0.5 * guess, lim)?;
    let rho = if a == b { a } else { root::brent(f, a, b, 1e-16 * base.rho)? };
    shock_curve(fam, base, rho, gas)
}

/// Shock branch of Φ_j by λ-shift α < 0, returning the state and shock slope.
pub fn shock_by_strength(fam: Family, u0: &FlowState, alpha: f64, gas: &GasModel) -> Result<(FlowState, f64)> {
    let lam0 = eigenvalue(fam, u0, gas)?;
    hugoniot_by_lambda(fam, u0, lam0 + alpha, shock_side(fam, true), gas)
}

pub fn phi(fam: Family, alpha: f64, u0: &FlowState, gas: &GasModel) -> Result<FlowState> {
    if alpha == 0.0 {
        return Ok(*u0);
    }
    match fam {
        Family::F1 | Family::F5 => {
            if alpha > 0.0 {
                rarefaction_curve(fam, u0, alpha, gas)
            } else {
                Ok(shock_by_strength(fam, u0, alpha, gas)?.0)
            }
        }
        _ => contact_curve(fam, u0, alpha, gas),
    }
}

/// All six states U_b = U₀, U₁ = Φ₁(α₁,U₀), …, U₅.
pub fn compose_states(alphas: &[f64; 5], ub: &FlowState, gas: &GasModel) -> Result<[FlowState; 6]> {
    let mut out = [*ub; 6];
    for (j, fam) in Family::ALL.iter().enumerate() {
        out[j + 1] = phi(*fam, alphas[j], &out[j], gas)?;
    }
    Ok(out)
}

pub fn compose_phi(alphas: &[f64; 5], ub: &FlowState, gas: &GasModel) -> Result<FlowState> {
    Ok(compose_states(alphas, ub, gas)?[5])
}

/// Composite contact map Φ₄ ∘ Φ₃ ∘ Φ₂.
pub fn contact_composite(s: &[f64; 3], u0: &FlowState, gas: &GasModel) -> Result<FlowState> {
    let a = phi(Family::F2, s[0], u0, gas)?;
    let b = phi(Family::F3, s[1], &a, gas)?;
    phi(Family::F4, s[2], &b, gas)
}

/// U_b with Φ₅(ε, U_b) = U_a.
pub fn phi5_inverse(eps: f64, ua: &FlowState, gas: &GasModel) -> Result<FlowState> {
    if eps == 0.0 {
        return Ok(*ua);
    }
    if eps > 0.0 {
        integral_curve_point(Family::F5, ua, -eps, gas)
    } else {
        let lam = eigenvalue(Family::F5, ua, gas)?;
        Ok(hugoniot_by_lambda(Family::F5, ua, lam - eps, shock_side(Family::F5, false), gas)?.0)
    }
}

/// Slope of the shock joining `ub` (below) to `ua` (above) for family `fam`.
pub fn shock_slope(fam: Family, ub: &FlowState, ua: &FlowState, gas: &GasModel) -> Result<f64> {
    Ok(shock_curve(fam, ub, ua.rho, gas)?.1)
}

/// Entropy-type invariants along a rarefaction: (𝓑, p/ρ^γ, J ± θ).
pub fn rarefaction_invariants(fam: Family, u: &FlowState, gas: &GasModel) -> Result<[f64; 3]> {
    let b = bernoulli(u, gas);
    let j = gas::riemann_invariant_j(u.speed(), b, gas)?;
    let th = u.angle();
    let inv = if fam == Family::F5 { j + th } else { j - th };
    Ok([b, gas::entropy(u, gas), inv])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gas() -> GasModel {
        GasModel::ideal(1.4)
    }

    fn state(m: f64, th: f64) -> FlowState {
        // c = 1 with ρ = 1, p = 1/γ
        FlowState::new(m * th.cos(), m * th.sin(), 1.0 / 1.4, 1.0, 0.1)
    }

    fn fd_grad(fam: Family, u: &FlowState) -> [f64; 5] {
        let g = gas();
        let a = u.to_array();
        let mut out = [0.0; 5];
        for k in 0..4 {
            let h = 1e-6 * a[k].abs().max(1e-3);
            let mut p = a;
            let mut m = a;
            p[k] += h;
            m[k] -= h;
            let lp = eigenvalue(fam, &FlowState::from_array(p), &g).unwrap();
            let lm = eigenvalue(fam, &FlowState::from_array(m), &g).unwrap();
            out[k] = (lp - lm) / (2.0 * h);
        }
        out
    }

    #[test]
    fn symmetric_eigenvalues() {
        let g = gas();
        let u = state(2.0, 0.0);
        let l1 = eigenvalue(Family::F1, &u, &g).unwrap();
        let l5 = eigenvalue(Family::F5, &u, &g).unwrap();
        let ma = (0.5f64).asin();
        assert!((l1 + ma.tan()).abs() < 1e-15);
        assert!((l5 - ma.tan()).abs() < 1e-15);
        assert_eq!(eigenvalue(Family::F3, &u, &g).unwrap(), 0.0);
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let g = gas();
        for (m, th) in [(1.6, 0.1), (2.5, -0.3), (3.0, 0.05), (1.9, -0.6)] {
            let u = state(m, th);
            for fam in Family::ALL {
                let a = grad_eigenvalue(fam, &u, &g).unwrap();
                let n = fd_grad(fam, &u);
                for k in 0..5 {
                    assert!((a[k] - n[k]).abs() < 1e-6 * (1.0 + a[k].abs()), "{fam:?} {k}");
                }
            }
        }
    }

    #[test]
    fn measured_nonlinearity_constant_is_half_of_printed_form() {
        // ratio of FD ∇λ·r̃ to (γ+1)/√(q²−c²)·sec³(θ∓θ_ma) for both families
        let g = gas();
        for (m, th) in [(1.7, 0.2), (2.2, -0.4), (4.0, 0.0)] {
            let u = state(m, th);
            let (q, t, ma) = gas::flow_angles(&u, &g).unwrap();
            for fam in [Family::F1, Family::F5] {
                let r = eigenvector(fam, &u, &g, false).unwrap();
                let gr = fd_grad(fam, &u);
                let dot: f64 = (0..5).map(|k| gr[k] * r[k]).sum();
                let printed = 2.4 / (q * q - 1.0).sqrt() / (t + fam.sign() * ma).cos().powi(3);
                assert!((dot / printed - 0.5).abs() < 1e-6, "{fam:?} {}", dot / printed);
            }
        }
    }

    #[test]
    fn normalized_eigenvector_has_unit_rate() {
        let g = gas();
        let u = state(2.3, -0.2);
        for fam in [Family::F1, Family::F5] {
            let r = eigenvector(fam, &u, &g, true).unwrap();
            let gr = fd_grad(fam, &u);
            let dot: f64 = (0..5).map(|k| gr[k] * r[k]).sum();
            assert!((dot - 1.0).abs() < 1e-6);
        }
        assert!(eigenvector(Family::F2, &u, &g, true).is_err());
    }

    #[test]
    fn contact_examples() {
        let g = gas();
        let u = state(2.0, 0.1);
        assert_eq!(contact_curve(Family::F2, &u, 0.0, &g).unwrap(), u);
        let b = contact_curve(Family::F4, &u, -u.z, &g).unwrap();
        assert_eq!(b.z, 0.0);
        assert_eq!((b.u, b.v, b.p, b.rho), (u.u, u.v, u.p, u.rho));
        let c = contact_curve(Family::F2, &u, 0.07, &g).unwrap();
        assert_eq!(c.p, u.p);
        assert!((c.v / c.u - u.v / u.u).abs() < 1e-15);
        assert!(contact_curve(Family::F3, &u, -2.0, &g).is_err());
    }

    #[test]
    fn shock_limits_and_entropy() {
        let g = gas();
        let u = state(2.0, 0.05);
        let (s1, sl) = shock_curve(Family::F1, &u, u.rho * (1.0 + 1e-9), &g).unwrap();
        assert!(s1.dist(&u) < 1e-8);
        assert!((sl - eigenvalue(Family::F1, &u, &g).unwrap()).abs() < 1e-8);
        let (s1, _) = shock_curve(Family::F1, &u, u.rho * 1.3, &g).unwrap();
        assert!(gas::entropy(&s1, &g) > gas::entropy(&u, &g));
        // a 5-shock compresses the state below it
        let (s5, _) = shock_curve(Family::F5, &u, u.rho * 0.8, &g).unwrap();
        assert!(gas::entropy(&s5, &g) < gas::entropy(&u, &g));
        assert!(shock_curve(Family::F1, &u, u.rho * 6.5, &g).is_err());
    }

    #[test]
    fn lax_condition_on_admissible_sides() {
        let g = gas();
        let u = state(2.4, -0.1);
        for fam in [Family::F1, Family::F5] {
            let (ua, s) = shock_by_strength(fam, &u, -0.05, &g).unwrap();
            let lb = eigenvalue(fam, &u, &g).unwrap();
            let la = eigenvalue(fam, &ua, &g).unwrap();
            assert!(lb > s && s > la, "{fam:?}");
            assert!((la - lb + 0.05).abs() < 1e-13);
        }
    }

    #[test]
    fn pm_turn_of_ten_degrees() {
        // family 5 seen from above: turning the flow by −10° from Mach 2
        let g = gas();
        let above = state(2.0, 0.0);
        let target = -10f64.to_radians();
        let f = |e: f64| Ok(phi5_inverse(e, &above, &g)?.angle() - target);
        let e = root::brent(f, 0.0, 1.0, 1e-15).unwrap();
        let below = phi5_inverse(e, &above, &g).unwrap();
        let m2 = mach(&below, &g);
        assert!((m2 - 2.385).abs() < 1e-3, "{m2}");
    }

    #[test]
    fn inverse_roundtrip() {
        let g = gas();
        let ua = state(2.2, 0.0);
        for e in [-0.08, -1e-4, 1e-4, 0.2] {
            let ub = phi5_inverse(e, &ua, &g).unwrap();
            let back = phi(Family::F5, e, &ub, &g).unwrap();
            assert!(back.dist(&ua) < 1e-12, "{e}: {}", back.dist(&ua));
        }
    }

    #[test]
    fn one_sided_second_derivatives_agree() {
        let g = gas();
        let u = state(2.0, 0.0);
        for fam in [Family::F1, Family::F5] {
            // one-sided second-order stencil (2f0 − 5f1 + 4f2 − f3)/e²
            let e = 2e-4;
            let pts = |sg: f64| -> Vec<[f64; 5]> {
                (1..4).map(|k| phi(fam, sg * k as f64 * e, &u, &g).unwrap().to_array()).collect()
            };
            let (p, m) = (pts(1.0), pts(-1.0));
            let a = u.to_array();
            for k in 0..4 {
                let dp = (2.0 * a[k] - 5.0 * p[0][k] + 4.0 * p[1][k] - p[2][k]) / (e * e);
                let dm = (2.0 * a[k] - 5.0 * m[0][k] + 4.0 * m[1][k] - m[2][k]) / (e * e);
                let scale = dp.abs().max(dm.abs()).max(1e-2);
                assert!((dp - dm).abs() < 1e-3 * scale, "{fam:?} {k}: {dp} {dm}");
            }
        }
    }

    proptest! {
        #[test]
        fn eigenvalues_strictly_ordered(m in 1.2f64..5.0, th in -0.6f64..0.3) {
            let g = gas();
            let u = state(m, th);
            prop_assume!(u.u > 1.0);
            let l1 = eigenvalue(Family::F1, &u, &g).unwrap();
            let l2 = eigenvalue(Family::F2, &u, &g).unwrap();
            let l5 = eigenvalue(Family::F5, &u, &g).unwrap();
            prop_assert!(l1 < l2 && l2 < l5);
            for fam in Family::ALL {
                let a = eigenvalue(fam, &u, &g).unwrap();
                let b = eigenvalue_tan(fam, &u, &g).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn rarefaction_lambda_shift_is_exact(m in 1.5f64..4.0, th in -0.3f64..0.2, s in 0.0f64..0.3) {
            let g = gas();
            let u = state(m, th);
            for fam in [Family::F1, Family::F5] {
                if let Ok(out) = rarefaction_curve(fam, &u, s, &g) {
                    let d = eigenvalue(fam, &out, &g).unwrap() - eigenvalue(fam, &u, &g).unwrap();
                    prop_assert!((d - s).abs() < 1e-12);
                    prop_assert!((gas::entropy(&out, &g) / gas::entropy(&u, &g) - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
