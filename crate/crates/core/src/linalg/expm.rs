//! Matrix exponential by scaling and squaring with Padé approximants
//! (degrees 3, 5, 7, 9, 13 selected on the 1-norm).

use super::{check_finite, Matrix};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(x: &Matrix) -> f64 {
    x.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^X` for a square, finite matrix.
pub fn expm(x: &Matrix) -> Result<Matrix> {
    check_finite(x, "expm input")?;
    if !x.is_square() {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    let ident = Matrix::identity(n, n);
    let norm = one_norm(x);
    if norm == 0.0 {
        return Ok(ident);
    }

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(x, coeffs, &ident);
            return solve_pade(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = x * 2f64.powi(-s);
    let (u, v) = pade13(&scaled, &ident);
    let mut r = solve_pade(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Error::Numerical("matrix exponential overflowed".into()))
    }
}

fn pade_low(x: &Matrix, b: &[f64], ident: &Matrix) -> (Matrix, Matrix) {
    let x2 = x * x;
    let mut power = ident.clone();
    let mut u_inner = ident * b[1];
    let mut v = ident * b[0];
    for k in 1..b.len() / 2 {
        power = &power * &x2;
        u_inner += &power * b[2 * k + 1];
        v += &power * b[2 * k];
    }
    (x * u_inner, v)
}

fn pade13(x: &Matrix, ident: &Matrix) -> (Matrix, Matrix) {
    let b = &B13;
    let x2 = x * x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let u_hi = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9]);
    let u = x * (u_hi + &x6 * b[7] + &x4 * b[5] + &x2 * b[3] + ident * b[1]);
    let v_hi = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8]);
    let v = v_hi + &x6 * b[6] + &x4 * b[4] + &x2 * b[2] + ident * b[0];
    (u, v)
}

fn solve_pade(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let q = v - u;
    let p = v + u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("singular Padé denominator".into()))
}
