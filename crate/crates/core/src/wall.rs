//! Bending wall y = g(x) and its mesh-h polygonal approximation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    /// Polyline samples (x, y); g ≡ 0 for x ≤ 0 and the last segment extends to +∞.
    pub vertices: Vec<[f64; 2]>,
    /// Samples (x, g*'(x)) of the convex reference wall slope; empty means g* = g.
    #[serde(default)]
    pub reference_slopes: Vec<[f64; 2]>,
}

impl Wall {
    pub fn flat() -> Self {
        Wall { vertices: vec![[0.0, 0.0], [1.0, 0.0]], reference_slopes: vec![] }
    }

    /// Straight wall until `x0`, then turned by `omega` (radians).
    pub fn single_corner(x0: f64, omega: f64) -> Self {
        Wall {
            vertices: vec![[0.0, 0.0], [x0, 0.0], [x0 + 1.0, omega.tan()]],
            reference_slopes: vec![],
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.vertices.len() < 2 {
            return Err("need at least two vertices".into());
        }
        for w in self.vertices.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(format!("vertex x must increase strictly ({} then {})", w[0][0], w[1][0]));
            }
        }
        for v in &self.vertices {
            if !v.iter().all(|x| x.is_finite()) {
                return Err("non-finite vertex".into());
            }
            if v[0] <= 0.0 && v[1] != 0.0 {
                return Err(format!("g must vanish for x <= 0 (vertex at x = {})", v[0]));
            }
        }
        if self.vertices[0][0] > 0.0 {
            return Err("first vertex must have x <= 0".into());
        }
        Ok(())
    }

    pub fn g(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let v = &self.vertices;
        let k = match v.iter().position(|p| p[0] > x) {
            Some(0) => return 0.0,
            Some(k) => k,
            None => v.len() - 1,
        };
        let (a, b) = (v[k - 1], v[k]);
        a[1] + (x - a[0]) * (b[1] - a[1]) / (b[0] - a[0])
    }

    /// Right derivative g'(x+).
    pub fn slope(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let v = &self.vertices;
        let k = v.iter().position(|p| p[0] > x).unwrap_or(v.len() - 1).max(1);
        (v[k][1] - v[k - 1][1]) / (v[k][0] - v[k - 1][0])
    }

    pub fn far_slope(&self) -> f64 {
        let n = self.vertices.len();
        let (a, b) = (self.vertices[n - 2], self.vertices[n - 1]);
        (b[1] - a[1]) / (b[0] - a[0])
    }

    fn reference_slope(&self, x: f64) -> f64 {
        if self.reference_slopes.is_empty() {
            return self.slope(x);
        }
        let r = &self.reference_slopes;
        match r.iter().position(|p| p[0] > x) {
            Some(0) => r[0][1],
            Some(k) => r[k - 1][1],
            None => r[r.len() - 1][1],
        }
    }

    /// Total variation of g'₊ − g*'₊ over the vertex and reference breakpoints.
    pub fn perturbation_tv(&self) -> f64 {
        let mut xs: Vec<f64> = self.vertices.iter().map(|v| v[0]).collect();
        xs.extend(self.reference_slopes.iter().map(|v| v[0]));
        xs.push(0.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let d = |x: f64| self.slope(x) - self.reference_slope(x);
        let mut tv = 0.0;
        let mut prev = d(xs[0] - 1.0);
        for x in xs {
            let cur = d(x);
            tv += (cur - prev).abs();
            prev = cur;
        }
        tv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallMesh {
    pub h: f64,
    /// A_k = (kh, g(kh)), k = 0..=n.
    pub corners: Vec<[f64; 2]>,
    /// θ_k on [kh, (k+1)h], k = 0..n (one fewer than corners).
    pub segment_angles: Vec<f64>,
    /// ω_k = θ_k − θ_{k−1} with θ_{−1} = 0.
    pub turning_angles: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
}

/// Admissible range of segment angles.
pub const DEFAULT_SLOPE_BOUNDS: (f64, f64) = (-1.2, 0.3);

pub fn build_mesh(wall: &Wall, h: f64, x_max: f64, bounds: (f64, f64)) -> Result<WallMesh> {
    if !(h > 0.0) {
        return domain("mesh length must be positive");
    }
    if let Err(e) = wall.validate() {
        return domain(e);
    }
    let n = (x_max / h).ceil() as usize + 2;
    let corners: Vec<[f64; 2]> = (0..=n).map(|k| [k as f64 * h, wall.g(k as f64 * h)]).collect();
    let mut segment_angles = Vec::with_capacity(n);
    let mut turning_angles = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let th = ((corners[k + 1][1] - corners[k][1]) / h).atan();
        if !(th > bounds.0 && th < bounds.1) {
            return domain(format!("wall slope outside admissible cone: θ_{k} = {th}"));
        }
        segment_angles.push(th);
        let om = th - prev;
        // round-off from re-deriving a straight segment's angle is not a corner
        turning_angles.push(if om.abs() <= 1e-13 { 0.0 } else { om });
        normals.push([th.sin(), -th.cos()]);
        prev = th;
    }
    Ok(WallMesh { h, corners, segment_angles, turning_angles, normals })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AngleSets {
    /// Σ|ω| over ω ≤ 0 with kh ≥ x.
    pub omega_ra: f64,
    /// Σ|ω| over ω ≤ 0 with kh < x.
    pub theta_hat: f64,
    /// Σ ω over ω > 0 with kh > x.
    pub q_c: f64,
    pub q_c_set: Vec<f64>,
}

impl WallMesh {
    pub fn segment_index(&self, x: f64) -> usize {
        if x <= 0.0 {
            return 0;
        }
        ((x / self.h).floor() as usize).min(self.segment_angles.len() - 1)
    }

    pub fn gh(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let k = self.segment_index(x);
        self.corners[k][1] + (x - self.corners[k][0]) * self.segment_angles[k].tan()
    }

    pub fn corner_x(&self, k: usize) -> f64 {
        self.corners[k][0]
    }

    pub fn total_turning(&self) -> f64 {
        self.turning_angles.iter().map(|w| w.abs()).sum()
    }
}

pub fn corner_angle_sets(mesh: &WallMesh, x: f64) -> AngleSets {
    angle_sets_from(&mesh.turning_angles, mesh.h, x)
}

/// Same aggregates for an explicit list of turning angles at kh.
pub fn angle_sets_from(turning: &[f64], h: f64, x: f64) -> AngleSets {
    let mut s = AngleSets::default();
    for (k, &w) in turning.iter().enumerate() {
        let kh = k as f64 * h;
        if w <= 0.0 {
            if kh >= x {
                s.omega_ra += w.abs();
            } else {
                s.theta_hat += w.abs();
            }
        } else if kh > x {
            s.q_c += w;
            s.q_c_set.push(w);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_mesh() {
        let m = build_mesh(&Wall::flat(), 0.1, 1.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        assert!(m.turning_angles.iter().all(|w| *w == 0.0));
        assert!(m.normals.iter().all(|n| *n == [0.0, -1.0]));
        let s = corner_angle_sets(&m, 0.35);
        assert_eq!(s, AngleSets::default());
    }

    #[test]
    fn single_corner_turning() {
        let w = Wall::single_corner(1.0, -5f64.to_radians());
        let m = build_mesh(&w, 0.5, 3.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        for (k, om) in m.turning_angles.iter().enumerate() {
            if k == 2 {
                assert!((om + 5f64.to_radians()).abs() < 1e-14);
            } else {
                assert!(om.abs() < 1e-14, "{k} {om}");
            }
        }
        let s = corner_angle_sets(&m, 10.0);
        assert_eq!(s.omega_ra, 0.0);
        assert!((s.theta_hat - 5f64.to_radians()).abs() < 1e-14);
    }

    #[test]
    fn positive_kink_in_qc() {
        let w = Wall {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 1f64.to_radians().tan()]],
            reference_slopes: vec![[0.0, 0.0]],
        };
        let m = build_mesh(&w, 0.25, 3.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        let s = corner_angle_sets(&m, 0.3);
        assert_eq!(s.q_c_set.len(), 1);
        assert!((s.q_c - 1f64.to_radians()).abs() < 1e-14);
        assert!((w.perturbation_tv() - 1f64.to_radians().tan()).abs() < 1e-14);
    }

    #[test]
    fn smooth_convex_turning_converges() {
        // g = −x²/4 on [0, 1], straight afterwards: total turning atan(0.5)
        let verts: Vec<[f64; 2]> = (0..=400)
            .map(|i| {
                let x = i as f64 / 400.0;
                [x, -x * x / 4.0]
            })
            .chain(std::iter::once([3.0, -0.25 - 1.0]))
            .collect();
        let w = Wall { vertices: verts, reference_slopes: vec![] };
        let want = 0.5f64.atan();
        for h in [0.1, 0.05] {
            let m = build_mesh(&w, h, 2.0, DEFAULT_SLOPE_BOUNDS).unwrap();
            assert!((m.total_turning() - want).abs() < h, "{}", m.total_turning());
        }
    }

    #[test]
    fn partition_identity() {
        let w = Wall::single_corner(0.5, -0.2);
        let m = build_mesh(&w, 0.1, 2.0, DEFAULT_SLOPE_BOUNDS).unwrap();
        for x in [0.0, 0.33, 0.5, 0.51, 1.7] {
            let s = corner_angle_sets(&m, x);
            assert!((s.omega_ra + s.theta_hat - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn steep_wall_rejected() {
        let w = Wall::single_corner(0.5, -1.4);
        assert!(build_mesh(&w, 0.1, 2.0, DEFAULT_SLOPE_BOUNDS).is_err());
    }
}
