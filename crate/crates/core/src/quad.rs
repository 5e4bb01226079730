//! Small quadrature kit: adaptive Gauss–Kronrod (7/15) and fixed Gauss–Legendre.

use crate::error::{numerical, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * hw, ((kron - gauss) * hw).abs())
}

/// Adaptive Gauss–Kronrod on [a, b] to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let span = (b - a).abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return numerical("quadrature produced a non-finite value");
        }
        let local_tol = tol * ((hi - lo).abs() / span).max(1e-3);
        if err <= local_tol || depth >= 40 {
            if depth >= 40 && err > 100.0 * local_tol {
                return numerical(format!("quadrature did not reach tolerance {tol:e}"));
            }
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    Ok(total)
}

/// Nodes and weights of 8-point Gauss–Legendre on [-1, 1].
pub const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
pub const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss–Legendre with `panels` equal panels.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let w = (b - a) / n as f64;
    let mut s = 0.0;
    for k in 0..n {
        let c = a + (k as f64 + 0.5) * w;
        for i in 0..8 {
            s += GL8_W[i] * f(c + 0.5 * w * GL8_X[i]);
        }
    }
    0.5 * w * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-13).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
        let g = gauss_legendre(|x| x.powi(15), 0.0, 1.0, 1);
        assert!((g - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_endpoint() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }
}
