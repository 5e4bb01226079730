//! Exact inert solution past a convex polygonal wall: centered Prandtl–Meyer fans.

use serde::Serialize;

use crate::curves::{eigenvalue, Family};
use crate::error::{domain, Result};
use crate::gas::{isentrope_state, mach, prandtl_meyer, prandtl_meyer_inverse, AdmissibleRegion, FlowState, GasModel};
use crate::riemann::{corner_solver, CornerMode};
use crate::wall::WallMesh;

const TABLE: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanSolution {
    pub corner: [f64; 2],
    pub omega: f64,
    pub u_in: FlowState,
    pub u_out: FlowState,
    pub head_slope: f64,
    pub tail_slope: f64,
    /// (θ, λ₅) along the fan, θ decreasing from θ(U_in) to θ(U_out).
    table: Vec<(f64, f64)>,
    /// θ + ν(M) on the fan.
    invariant: f64,
}

impl FanSolution {
    /// State on the fan with flow angle `theta`.
    pub fn state_at_angle(&self, theta: f64, gas: &GasModel) -> Result<FlowState> {
        let m = prandtl_meyer_inverse(self.invariant - theta, gas.gamma)?;
        Ok(isentrope_state(&self.u_in, m, theta, gas))
    }

    /// State whose λ₅ equals `slope` (clamped to the fan's head/tail).
    pub fn state_at_slope(&self, slope: f64, gas: &GasModel) -> Result<FlowState> {
        if slope >= self.head_slope {
            return Ok(self.u_in);
        }
        if slope <= self.tail_slope {
            return Ok(self.u_out);
        }
        // λ₅ decreases along the table
        let k = self.table.partition_point(|&(_, l)| l > slope);
        let (mut hi, mut lo) = (self.table[k - 1].0, self.table[k].0);
        let mut th = 0.5 * (lo + hi);
        for _ in 0..200 {
            th = 0.5 * (lo + hi);
            let l = eigenvalue(Family::F5, &self.state_at_angle(th, gas)?, gas)?;
            if (l - slope).abs() <= 1e-12 || hi - lo <= 1e-16 {
                break;
            }
            if l > slope {
                hi = th;
            } else {
                lo = th;
            }
        }
        self.state_at_angle(th, gas)
    }
}

/// Sequential strong corner solves along a convex mesh.
pub fn solve_background(u_inf: &FlowState, mesh: &WallMesh, gas: &GasModel) -> Result<Vec<FanSolution>> {
    if u_inf.v != 0.0 {
        return domain("background inflow must be horizontal (v = 0)");
    }
    let region = AdmissibleRegion::new(*u_inf, 1.0, gas)?;
    let mut fans = Vec::new();
    let mut cur = *u_inf;
    let mut total = 0.0;
    for (k, &om) in mesh.turning_angles.iter().enumerate() {
        if om > 0.0 {
            return domain(format!("background oracle needs a convex wall; ω_{k} = {om} > 0"));
        }
        if om == 0.0 {
            continue;
        }
        total += om;
        if total <= region.theta_crit {
            return domain(format!(
                "expansion exceeds admissible cone: cumulative turning {total} <= θ_crit {}",
                region.theta_crit
            ));
        }
        let (_, out) = corner_solver(&cur, om, CornerMode::Strong, gas)?;
        let head = eigenvalue(Family::F5, &cur, gas)?;
        let tail = eigenvalue(Family::F5, &out, gas)?;
        let invariant = cur.angle() + prandtl_meyer(mach(&cur, gas), gas.gamma);
        let mut fan = FanSolution {
            corner: mesh.corners[k],
            omega: om,
            u_in: cur,
            u_out: out,
            head_slope: head,
            tail_slope: tail,
            table: Vec::with_capacity(TABLE),
            invariant,
        };
        let (t0, t1) = (cur.angle(), out.angle());
        for i in 0..TABLE {
            let th = t0 + (t1 - t0) * i as f64 / (TABLE - 1) as f64;
            let s = if i == 0 {
                cur
            } else if i == TABLE - 1 {
                out
            } else {
                fan.state_at_angle(th, gas)?
            };
            fan.table.push((th, eigenvalue(Family::F5, &s, gas)?));
        }
        fans.push(fan);
        cur = out;
    }
    Ok(fans)
}

/// Oracle value at (x, y).
pub fn sample_background(
    u_inf: &FlowState,
    fans: &[FanSolution],
    mesh: &WallMesh,
    x: f64,
    y: f64,
    gas: &GasModel,
) -> Result<FlowState> {
    if y < mesh.gh(x) - 1e-12 * (1.0 + y.abs()) {
        return domain(format!("point ({x}, {y}) lies below the wall"));
    }
    let mut cur = *u_inf;
    for f in fans {
        let dx = x - f.corner[0];
        if dx <= 0.0 {
            break;
        }
        let s = (y - f.corner[1]) / dx;
        if s >= f.head_slope {
            break;
        }
        if s <= f.tail_slope {
            cur = f.u_out;
            continue;
        }
        return f.state_at_slope(s, gas);
    }
    Ok(cur)
}

/// Piecewise description of the oracle along x = const up to `y_max`:
/// the wall point, each fan's tail and head, and `per_fan` interior samples.
pub fn background_slice(
    u_inf: &FlowState,
    fans: &[FanSolution],
    mesh: &WallMesh,
    x: f64,
    y_max: f64,
    per_fan: usize,
    gas: &GasModel,
) -> Result<Vec<(f64, FlowState)>> {
    let yw = mesh.gh(x);
    let mut ys = vec![yw];
    for f in fans {
        let dx = x - f.corner[0];
        if dx <= 0.0 {
            continue;
        }
        let (yt, yh) = (f.corner[1] + f.tail_slope * dx, f.corner[1] + f.head_slope * dx);
        for i in 0..=per_fan + 1 {
            ys.push(yt + (yh - yt) * i as f64 / (per_fan + 1) as f64);
        }
    }
    ys.push(y_max);
    ys.retain(|&y| y >= yw && y <= y_max);
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys.into_iter()
        .map(|y| Ok((y, sample_background(u_inf, fans, mesh, x, y, gas)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{bernoulli, entropy, sound};
    use crate::wall::{build_mesh, Wall, DEFAULT_SLOPE_BOUNDS};

    fn gas() -> GasModel {
        GasModel::ideal(1.4)
    }

    fn inflow() -> FlowState {
        FlowState::new(2.0, 0.0, 1.0 / 1.4, 1.0, 0.0)
    }

    fn one_corner() -> WallMesh {
        build_mesh(&Wall::single_corner(0.5, -10f64.to_radians()), 0.1, 3.0, DEFAULT_SLOPE_BOUNDS).unwrap()
    }

    #[test]
    fn no_corners_is_uniform() {
        let m = build_mesh(&Wall::flat(), 0.1, 2.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let fans = solve_background(&inflow(), &m, &gas()).unwrap();
        assert!(fans.is_empty());
        assert_eq!(sample_background(&inflow(), &fans, &m, 1.0, 0.3, &gas()).unwrap(), inflow());
    }

    #[test]
    fn ten_degree_expansion() {
        let g = gas();
        let m = one_corner();
        let fans = solve_background(&inflow(), &m, &g).unwrap();
        assert_eq!(fans.len(), 1);
        let out = fans[0].u_out;
        // independent: ν(M_out) = ν(2) + 10° with the closed-form ν, bisected
        let target = prandtl_meyer(2.0, 1.4) + 10f64.to_radians();
        let (mut lo, mut hi) = (2.0, 4.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if prandtl_meyer(mid, 1.4) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((mach(&out, &g) - lo).abs() < 1e-9);
        assert!((mach(&out, &g) - 2.385).abs() < 1e-3);
        let iso = |mm: f64| (1.0 + 0.2 * mm * mm).powf(-3.5);
        let ratio = out.p / inflow().p;
        assert!((ratio - iso(lo) / iso(2.0)).abs() < 1e-9);
        assert!((ratio - 0.547).abs() < 1e-3);
        assert!(fans[0].head_slope > fans[0].tail_slope);
    }

    #[test]
    fn two_half_corners_compose() {
        let g = gas();
        let w = Wall { vertices: vec![[0.0, 0.0], [0.5, 0.0], [1.0, -0.5 * 5f64.to_radians().tan()], [2.0, -0.5 * 5f64.to_radians().tan() - 10f64.to_radians().tan()]], reference_slopes: vec![] };
        let m = build_mesh(&w, 0.5, 3.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let two = solve_background(&inflow(), &m, &g).unwrap();
        assert_eq!(two.len(), 2);
        let one = solve_background(&inflow(), &one_corner(), &g).unwrap();
        assert!(two[1].u_out.dist(&one[0].u_out) < 1e-9);
    }

    #[test]
    fn sampling_inside_fan() {
        let g = gas();
        let m = one_corner();
        let fans = solve_background(&inflow(), &m, &g).unwrap();
        let f = &fans[0];
        let x = 2.0;
        let dx = x - f.corner[0];
        let b0 = bernoulli(&inflow(), &g);
        let s0 = entropy(&inflow(), &g);
        let mut prev_th = f64::INFINITY;
        for i in 0..=20 {
            let s = f.tail_slope + (f.head_slope - f.tail_slope) * i as f64 / 20.0;
            let y = f.corner[1] + s * dx;
            let u = sample_background(&inflow(), &fans, &m, x, y, &g).unwrap();
            assert!((eigenvalue(Family::F5, &u, &g).unwrap() - s).abs() < 1e-9);
            assert!(((bernoulli(&u, &g) - b0) / b0).abs() < 1e-9);
            assert!(((entropy(&u, &g) - s0) / s0).abs() < 1e-9);
            if i > 0 {
                assert!(u.angle() >= prev_th - 1e-15);
            }
            prev_th = u.angle();
            assert!(u.u > sound(&u, &g));
        }
        let tail_y = f.corner[1] + f.tail_slope * dx;
        let u = sample_background(&inflow(), &fans, &m, x, tail_y, &g).unwrap();
        assert!(u.dist(&f.u_out) < 1e-9);
        let up = sample_background(&inflow(), &fans, &m, 0.3, 0.1, &g).unwrap();
        assert_eq!(up, inflow());
        assert!(sample_background(&inflow(), &fans, &m, 2.0, -5.0, &g).is_err());
    }

    #[test]
    fn beyond_cone_rejected() {
        let w = Wall::single_corner(0.5, -1.1);
        let m = build_mesh(&w, 0.1, 2.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let inflow = FlowState::new(1.2, 0.0, 1.0 / 1.4, 1.0, 0.0);
        let e = solve_background(&inflow, &m, &gas()).unwrap_err();
        assert!(e.to_string().contains("admissible cone") || e.to_string().contains("θ_crit"), "{e}");
    }
}
