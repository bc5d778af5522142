//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `η` given as an exact decimal `digits / 10^scale`.
#[derive(Debug, Clone, Copy)]
pub struct Decimal {
    pub digits: i64,
    pub scale: u32,
}

impl Decimal {
    pub const fn new(digits: i64, scale: u32) -> Self {
        Decimal { digits, scale }
    }

    pub fn value(self) -> f64 {
        self.digits as f64 / 10f64.powi(self.scale as i32)
    }

    fn rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.digits), BigInt::from(10).pow(self.scale))
    }
}

/// Reduced element `i^{-|n-m|} <n|exp(iη(a+a†))|m>` from the normal-ordered expansion
/// `e^{-η²/2} √(n!m!) Σ_j (-1)^{min(n,m)-j} η^{n+m-2j} / (j!(n-j)!(m-j)!)`, with the sum in exact
/// rational arithmetic.
pub fn fc_series(eta: Decimal, m: usize, n: usize) -> f64 {
    let x = eta.rational();
    let lo = m.min(n);
    let mut sum = BigRational::zero();
    for j in 0..=lo {
        let p = (n + m - 2 * j) as i32;
        let term = pow(&x, p)
            / BigRational::from_integer(factorial(j) * factorial(n - j) * factorial(m - j));
        if (lo - j) % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let e = eta.value();
    let root = (factorial(n) * factorial(m)).to_f64().expect("finite").sqrt();
    sum.to_f64().expect("finite") * root * (-e * e / 2.0).exp()
}

fn pow(x: &BigRational, p: i32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..p {
        out *= x;
    }
    out
}

/// Degree-13 Padé approximant with scaling and squaring.
pub fn expm_pade13(a: &DMatrix<f64>) -> DMatrix<f64> {
    const B: [f64; 14] = [
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
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * B[13] + &a4 * B[11] + &a2 * B[9])
        + &a6 * B[7]
        + &a4 * B[5]
        + &a2 * B[3]
        + &id * B[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * B[12] + &a4 * B[10] + &a2 * B[8])
        + &a6 * B[6]
        + &a4 * B[4]
        + &a2 * B[2]
        + &id * B[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
