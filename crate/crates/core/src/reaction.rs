//! Fractional reaction step across a station x = kh.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::gas::{clamp_fraction, reaction_rate, sound, temperature, FlowState, GasModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReactionStepReport {
    pub t_before: f64,
    pub t_after: f64,
    pub z_before: f64,
    pub z_after: f64,
    /// Square-root argument of the density root.
    pub discriminant: f64,
    /// Heat-release term of the discriminant over (ρu² − γp)²; above 0.5 the step is flagged.
    pub budget_ratio: f64,
}

impl ReactionStepReport {
    pub fn near_limit(&self) -> bool {
        self.budget_ratio > 0.5
    }
}

/// Conserved fluxes of the x-direction balance laws: W(U).
pub fn flux_w(u: &FlowState, gas: &GasModel) -> [f64; 5] {
    let g = gas.gamma;
    let m = u.rho * u.u;
    let h = g * u.p / ((g - 1.0) * u.rho);
    [m, m * u.u + u.p, m * u.v, m * (h + 0.5 * (u.u * u.u + u.v * u.v)), m * u.z]
}

/// Transverse fluxes H(U).
pub fn flux_h(u: &FlowState, gas: &GasModel) -> [f64; 5] {
    let g = gas.gamma;
    let m = u.rho * u.v;
    let h = g * u.p / ((g - 1.0) * u.rho);
    [m, m * u.u, m * u.v + u.p, m * (h + 0.5 * (u.u * u.u + u.v * u.v)), m * u.z]
}

/// Source G(U) = (0, 0, 0, q̃ρZφ(T), −ρZφ(T)).
pub fn source_g(u: &FlowState, gas: &GasModel) -> Result<[f64; 5]> {
    let w = u.rho * u.z * reaction_rate(temperature(u, gas), gas)?;
    Ok([0.0, 0.0, 0.0, gas.q_tilde * w, -w])
}

/// Advance U across one reaction line of length `h`.
pub fn reaction_step(um: &FlowState, h: f64, gas: &GasModel) -> Result<(FlowState, ReactionStepReport)> {
    um.check()?;
    if !(h > 0.0) {
        return domain(format!("reaction step needs h > 0, got {h}"));
    }
    let c = sound(um, gas);
    if !(um.u > c) {
        return domain("reaction step needs u > c");
    }
    let g = gas.gamma;
    let t0 = temperature(um, gas);
    let phi = reaction_rate(t0, gas)?;
    let m = um.rho * um.u;
    let pp = m * um.u + um.p;
    let base = m * um.u - g * um.p;
    let heat = 2.0 * gas.q_tilde * (g * g - 1.0) * um.rho * um.rho * um.u * um.z * phi * h;
    let d = base * base - heat;
    let report = |t_after: f64, z_after: f64| ReactionStepReport {
        t_before: t0,
        t_after,
        z_before: um.z,
        z_after,
        discriminant: d,
        budget_ratio: heat / (base * base),
    };
    if um.z == 0.0 {
        return Ok((*um, report(t0, 0.0)));
    }
    if d < 0.0 {
        return domain("reaction step too large: heat release exceeds step budget (reduce h)");
    }
    let zf = 1.0 - phi * h / um.u;
    let z_raw = um.z * zf;
    if z_raw < -1e-12 {
        return domain("rate·step exceeds u (reduce h)");
    }
    let z = clamp_fraction(z_raw)?;
    let up = if heat == 0.0 {
        FlowState { z, ..*um }
    } else {
        let inv_rho = (g * pp + d.sqrt()) / ((g + 1.0) * m * m);
        let u = m * inv_rho;
        FlowState::new(u, um.v, pp - m * u, 1.0 / inv_rho, z)
    };
    if !(up.u > sound(&up, gas)) {
        return domain("reaction drove state sonic");
    }
    let t1 = temperature(&up, gas);
    Ok((up, report(t1, z)))
}

/// Certified envelope Z0·e^{−Lx}.
pub fn decay_envelope(z0: f64, l: f64, x: f64) -> Result<f64> {
    if !(l > 0.0) || !(x >= 0.0) {
        return domain(format!("decay envelope needs L > 0 and x >= 0 (L={l}, x={x})"));
    }
    Ok(z0 * (-l * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas() -> GasModel {
        GasModel { q_tilde: 2.0, phi_alpha: 0.5, phi_e: 0.3, ..GasModel::ideal(1.4) }
    }

    fn state() -> FlowState {
        // c = 1, u = 3c
        FlowState::new(3.0, 0.1, 1.0 / 1.4, 1.0, 0.5)
    }

    #[test]
    fn generic_step_balances() {
        let g = gas();
        let um = state();
        let h = 0.01;
        let (up, rep) = reaction_step(&um, h, &g).unwrap();
        let wm = flux_w(&um, &g);
        let wp = flux_w(&up, &g);
        let src = source_g(&um, &g).unwrap();
        for i in 0..4 {
            let r = (wp[i] - wm[i] - src[i] * h) / wm[i].abs();
            assert!(r.abs() < 1e-12, "balance {i}: {r}");
        }
        // species balance: ρ₊u₊Z₊ = ρ₋u₋Z₋ − ρ₋Z₋φh
        let r = (wp[4] - wm[4] - src[4] * h) / wm[4];
        assert!(r.abs() < 1e-12);
        assert!(rep.t_after > rep.t_before);
        assert!(rep.z_after < rep.z_before);
        assert!(rep.discriminant > 0.0);
    }

    #[test]
    fn inert_and_heatless_cases() {
        let g = gas();
        let um = FlowState { z: 0.0, ..state() };
        let (up, _) = reaction_step(&um, 0.05, &g).unwrap();
        assert_eq!(up, um);
        let g0 = GasModel { q_tilde: 0.0, ..gas() };
        let um = state();
        let (up, _) = reaction_step(&um, 0.05, &g0).unwrap();
        let phi = reaction_rate(temperature(&um, &g0), &g0).unwrap();
        assert_eq!((up.u, up.v, up.p, up.rho), (um.u, um.v, um.p, um.rho));
        assert_eq!(up.z, um.z * (1.0 - phi * 0.05 / um.u));
    }

    #[test]
    fn oversize_steps_rejected() {
        let g = GasModel { q_tilde: 500.0, ..gas() };
        let e = reaction_step(&state(), 0.5, &g).unwrap_err();
        assert!(e.to_string().contains("reduce h"));
        let g = GasModel { q_tilde: 0.0, ..gas() };
        let e = reaction_step(&state(), 10.0, &g).unwrap_err();
        assert!(e.to_string().contains("rate·step exceeds u"));
    }

    #[test]
    fn richardson_against_source_ode() {
        // dW/dx = G along x, so dU/dx = (∂W/∂U)⁻¹ G; compare the one-sided difference
        // quotient extrapolated from h and h/2 with a finite-difference inverse.
        let g = gas();
        let um = state();
        let dq = |h: f64| {
            let (up, _) = reaction_step(&um, h, &g).unwrap();
            let a = up.to_array();
            let b = um.to_array();
            std::array::from_fn::<f64, 5, _>(|i| (a[i] - b[i]) / h)
        };
        let h = 1e-3;
        let d1 = dq(h);
        let d2 = dq(h / 2.0);
        let rich: [f64; 5] = std::array::from_fn(|i| 2.0 * d2[i] - d1[i]);
        // Jacobian of W by central differences, then solve J·dU = G.
        let src = source_g(&um, &g).unwrap();
        let base = um.to_array();
        let mut jac = nalgebra::Matrix5::zeros();
        for k in 0..5 {
            let e = 1e-6 * base[k].abs().max(1.0);
            let mut p = base;
            let mut m = base;
            p[k] += e;
            m[k] -= e;
            let wp = flux_w(&FlowState::from_array(p), &g);
            let wm = flux_w(&FlowState::from_array(m), &g);
            for r in 0..5 {
                jac[(r, k)] = (wp[r] - wm[r]) / (2.0 * e);
            }
        }
        let rhs = nalgebra::Vector5::from_column_slice(&src);
        let ode = jac.lu().solve(&rhs).unwrap();
        for i in 0..5 {
            assert!((rich[i] - ode[i]).abs() < 1e-5 * ode[i].abs().max(1.0), "{i}: {} vs {}", rich[i], ode[i]);
        }
    }

    #[test]
    fn envelope() {
        assert_eq!(decay_envelope(0.3, 1.0, 0.0).unwrap(), 0.3);
        assert!((decay_envelope(0.3, 2.0, 0.5).unwrap() - 0.3 * (-1f64).exp()).abs() < 1e-16);
        assert!(decay_envelope(0.3, 0.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn temperature_nondecreasing(m in 1.2f64..5.0, th in -0.3f64..0.3, z in 0.0f64..1.0, h in 1e-4f64..0.02) {
            let g = gas();
            let um = FlowState::new(m * th.cos(), m * th.sin(), 1.0 / 1.4, 1.0, z);
            if um.u > 1.05 {
                if let Ok((up, rep)) = reaction_step(&um, h, &g) {
                    proptest::prop_assert!(rep.t_after >= rep.t_before);
                    proptest::prop_assert!(up.z <= um.z);
                    proptest::prop_assert_eq!(up.v, um.v);
                    let m0 = um.rho * um.u;
                    proptest::prop_assert!(((up.rho * up.u) - m0).abs() <= 1e-14 * m0);
                }
            }
        }
    }
}
