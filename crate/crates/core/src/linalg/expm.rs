//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005), up to degree 13.

use super::{ensure_finite, ensure_square, RealMatrix};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(m: &RealMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Padé pair (U, V) of low degree m in {3,5,7,9}.
fn pade_low(a: &RealMatrix, b: &[f64]) -> (RealMatrix, RealMatrix) {
    let n = a.nrows();
    let id = RealMatrix::identity(n, n);
    let a2 = a * a;
    let mut u_even = &id * b[1];
    let mut v = &id * b[0];
    let mut power = id.clone();
    let mut k = 1;
    while 2 * k < b.len() {
        power = &power * &a2;
        u_even += &power * b[2 * k + 1];
        v += &power * b[2 * k];
        k += 1;
    }
    (a * u_even, v)
}

fn pade13(a: &RealMatrix) -> (RealMatrix, RealMatrix) {
    let n = a.nrows();
    let b = &B13;
    let id = RealMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

fn pade_solve(u: &RealMatrix, v: &RealMatrix) -> Result<RealMatrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Solver("singular Pade denominator in expm".into()))
}

/// `e^M` for a square real matrix.
pub fn expm(m: &RealMatrix) -> Result<RealMatrix> {
    ensure_square(m, "expm argument")?;
    ensure_finite(m, "expm argument")?;
    let norm = one_norm(m);
    if norm == 0.0 {
        return Ok(RealMatrix::identity(m.nrows(), m.ncols()));
    }
    for (degree, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match degree {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(m, b);
            return pade_solve(&u, &v);
        }
    }
    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = m * 2f64.powi(-s);
    let (u, v) = pade13(&scaled);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}
