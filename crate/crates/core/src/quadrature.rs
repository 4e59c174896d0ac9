//! Adaptive Gauss–Kronrod integration in one and two dimensions, plus the
//! periodic trapezoid rule.

use crate::error::{Error, Result};

// 15-point Kronrod abscissae (non-negative half) and weights; the embedded
// 7-point Gauss rule uses the odd-indexed abscissae.
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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH_1D: u32 = 40;
const MAX_DEPTH_2D: u32 = 12;

/// Full 15-point node list on [-1, 1] with Kronrod weights and Gauss weights
/// (zero where the node is not a Gauss node).
pub(crate) fn rule15() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    for i in 0..7 {
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[i] = (-XGK[i], WGK[i], wg);
        out[14 - i] = (XGK[i], WGK[i], wg);
    }
    out[7] = (0.0, WGK[7], WG[3]);
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let (mut k, mut g) = (0.0, 0.0);
    for (x, wk, wg) in rule15() {
        let y = f(c + h * x);
        k += wk * y;
        g += wg * y;
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection with a 7/15 Gauss–Kronrod pair to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Estimate> {
    let mut est = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    integrate_rec(&f, a, b, tol, 0, &mut est)?;
    Ok(est)
}

fn integrate_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    est: &mut Estimate,
) -> Result<()> {
    let (value, err) = gk15(f, a, b);
    est.evaluations += 15;
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    if err <= tol {
        est.value += value;
        est.error += err;
        return Ok(());
    }
    if depth >= MAX_DEPTH_1D {
        return Err(Error::Quadrature(format!(
            "1-D subdivision limit reached on [{a}, {b}], local error {err:e} > {tol:e}"
        )));
    }
    let m = 0.5 * (a + b);
    integrate_rec(f, a, m, 0.5 * tol, depth + 1, est)?;
    integrate_rec(f, m, b, 0.5 * tol, depth + 1, est)
}

fn gk15_square<F: Fn(f64, f64) -> f64>(f: &F, cx: f64, cy: f64, h: f64) -> (f64, f64) {
    let rule = rule15();
    let (mut k, mut g) = (0.0, 0.0);
    for &(x, wkx, wgx) in &rule {
        for &(y, wky, wgy) in &rule {
            let v = f(cx + h * x, cy + h * y);
            k += wkx * wky * v;
            g += wgx * wgy * v;
        }
    }
    let area = h * h;
    (k * area, ((k - g) * area).abs())
}

/// Adaptive cubature over the square `[cx-h, cx+h] x [cy-h, cy+h]`.
///
/// Each cell is estimated with the tensor 15-point Kronrod rule and checked
/// against the tensor 7-point Gauss rule; cells whose discrepancy exceeds their
/// share of `tol` are split into four.
pub fn integrate_square<F: Fn(f64, f64) -> f64>(
    f: F,
    cx: f64,
    cy: f64,
    h: f64,
    tol: f64,
) -> Result<Estimate> {
    let mut est = Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    square_rec(&f, cx, cy, h, tol, 0, &mut est)?;
    Ok(est)
}

fn square_rec<F: Fn(f64, f64) -> f64>(
    f: &F,
    cx: f64,
    cy: f64,
    h: f64,
    tol: f64,
    depth: u32,
    est: &mut Estimate,
) -> Result<()> {
    let (value, err) = gk15_square(f, cx, cy, h);
    est.evaluations += 225;
    if !value.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite integrand in cell centred at ({cx}, {cy}) with half-width {h}"
        )));
    }
    if err <= tol {
        est.value += value;
        est.error += err;
        return Ok(());
    }
    if depth >= MAX_DEPTH_2D {
        return Err(Error::Quadrature(format!(
            "2-D subdivision limit reached at ({cx}, {cy}), half-width {h:e}, \
             local error {err:e} > {tol:e}, {} evaluations so far",
            est.evaluations
        )));
    }
    let q = 0.5 * h;
    for (dx, dy) in [(-q, -q), (q, -q), (-q, q), (q, q)] {
        square_rec(f, cx + dx, cy + dy, q, 0.25 * tol, depth + 1, est)?;
    }
    Ok(())
}

/// Mean of a 2π-periodic function over one period with `n` equispaced nodes.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let h = std::f64::consts::TAU / n as f64;
    (0..n).map(|k| f(k as f64 * h)).sum::<f64>() / n as f64
}
