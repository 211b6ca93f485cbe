//! Numerical quadrature used by the yield model.

use crate::error::{Error, Result};

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

/// Absolute tolerance used by the model integrals.
pub const ABS_TOL: f64 = 1e-12;

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate drops below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![(a, b, kronrod15(&f, a, b))];
    for _ in 0..200 {
        let total: f64 = segments.iter().map(|s| s.2 .0).sum();
        let err: f64 = segments.iter().map(|s| s.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        // bisect the worst segment
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = segments.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        segments.push((lo, mid, kronrod15(&f, lo, mid)));
        segments.push((mid, hi, kronrod15(&f, mid, hi)));
    }
    Err(Error::Quadrature(format!("[{a}, {b}] after 200 subdivisions")))
}

/// Mean of a 2π-periodic function over one period.
///
/// Uses the trapezoidal rule, which converges geometrically for smooth
/// periodic integrands; the node count doubles until successive estimates
/// agree to `max(abs_tol, rel_tol * |I|)`.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let tau = std::f64::consts::TAU;
    let mut n = 8usize;
    let mut sum: f64 = (0..n).map(|j| f(tau * j as f64 / n as f64)).sum();
    let mut prev = sum / n as f64;
    while n < (1 << 16) {
        // midpoints of the current grid
        let mid: f64 = (0..n).map(|j| f(tau * (j as f64 + 0.5) / n as f64)).sum();
        sum += mid;
        n *= 2;
        let cur = sum / n as f64;
        if (cur - prev).abs() <= abs_tol.max(rel_tol * cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Quadrature("periodic mean did not converge".into()))
}
