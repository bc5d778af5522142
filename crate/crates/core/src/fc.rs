//! Franck–Condon factors of the photon-recoil displacement `exp(i η (a + a†))` between
//! harmonic-oscillator eigenstates, and the dark-state conditions built on them.
//!
//! Every matrix element is evaluated as
//!
//! ```text
//! <n| e^{iη(a+a†)} |m> = i^{|n-m|} e^{-η²/2} η^{|n-m|} sqrt(k!/(k+|n-m|)!) L_k^{|n-m|}(η²),  k = min(n, m)
//! ```
//!
//! with the associated Laguerre polynomial taken from the three-term recurrence in its degree.
//! The real factor multiplying `i^{|n-m|}` is called the *reduced* element below.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levels::Level;

/// Largest degree accepted by [`laguerre_assoc`].
pub const DEFAULT_MAX_DEGREE: usize = 256;

/// Above this level the factorial ratio is evaluated in log space.
const DIRECT_LEVEL_LIMIT: usize = 150;

/// Scan step in `x = η²` used to bracket Laguerre zeros.
const ROOT_SCAN_STEP: f64 = 0.05;

/// Lamb-Dicke parameter `η`; `η²` is the recoil energy in units of the trap quantum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LambDicke(f64);

impl LambDicke {
    pub fn new(eta: f64) -> Result<Self> {
        if eta.is_finite() && eta >= 0.0 {
            Ok(LambDicke(eta))
        } else {
            Err(Error::Domain(format!(
                "Lamb-Dicke parameter must be finite and non-negative, got {eta}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `η²`, the recoil energy over `ħω`.
    pub fn recoil(self) -> f64 {
        self.0 * self.0
    }

    /// `η̂²`: the integer closest to `η²`.
    pub fn rounded_recoil(self) -> i64 {
        self.recoil().round() as i64
    }
}

impl TryFrom<f64> for LambDicke {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        LambDicke::new(v)
    }
}

impl From<LambDicke> for f64 {
    fn from(e: LambDicke) -> f64 {
        e.0
    }
}

/// One matrix element `<to_level| exp(i η_eff (a + a†)) |from_level>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcAmplitude {
    pub value: Complex64,
    pub from_level: usize,
    pub to_level: usize,
    pub eta_effective: f64,
}

impl FcAmplitude {
    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }

    pub fn probability(&self) -> f64 {
        self.value.norm_sqr()
    }
}

fn factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![1.0f64; DIRECT_LEVEL_LIMIT + 1];
        for k in 1..=DIRECT_LEVEL_LIMIT {
            t[k] = t[k - 1] * k as f64;
        }
        t
    })
}

fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let fact = factorials();
        let len = 4 * DEFAULT_MAX_DEGREE + 64;
        let mut t = Vec::with_capacity(len);
        for k in 0..len {
            if k <= DIRECT_LEVEL_LIMIT {
                t.push(fact[k].ln());
            } else {
                let prev: f64 = t[k - 1];
                t.push(prev + (k as f64).ln());
            }
        }
        t
    });
    match table.get(k) {
        Some(v) => *v,
        None => {
            // Stirling series; only reached for levels far beyond any sane truncation.
            let n = k as f64;
            n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
        }
    }
}

/// Forward degree recurrence for `L_k^α(x)`, yielding `k = 0, 1, 2, ...`.
///
/// Every evaluation path in this module goes through this iterator so that single elements
/// and batch tables agree bit for bit.
#[derive(Debug, Clone)]
struct LaguerreSeq {
    alpha: f64,
    x: f64,
    k: usize,
    prev: f64,
    curr: f64,
}

impl LaguerreSeq {
    fn new(alpha: f64, x: f64) -> Self {
        LaguerreSeq {
            alpha,
            x,
            k: 0,
            prev: 0.0,
            curr: 1.0,
        }
    }
}

impl Iterator for LaguerreSeq {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.curr;
        let k = self.k as f64;
        let next = if self.k == 0 {
            1.0 + self.alpha - self.x
        } else {
            ((2.0 * k + 1.0 + self.alpha - self.x) * self.curr - (k + self.alpha) * self.prev)
                / (k + 1.0)
        };
        self.prev = self.curr;
        self.curr = next;
        self.k += 1;
        Some(out)
    }
}

fn laguerre_unchecked(n: usize, alpha: f64, x: f64) -> f64 {
    LaguerreSeq::new(alpha, x)
        .nth(n)
        .expect("the recurrence is infinite")
}

/// Associated Laguerre polynomial `L_n^α(x)`.
///
/// Requires `α ≥ -n`: below that the factorial normalisation of the corresponding
/// Franck–Condon factor is undefined, and callers must treat the rate as zero instead.
pub fn laguerre_assoc(n: usize, alpha: i64, x: f64) -> Result<f64> {
    if alpha < -(n as i64) {
        return Err(Error::LaguerreDomain { n, alpha });
    }
    if n > DEFAULT_MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            n,
            max: DEFAULT_MAX_DEGREE,
        });
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!(
            "Laguerre argument must be finite, got {x}"
        )));
    }
    Ok(laguerre_unchecked(n, alpha as f64, x))
}

/// Reduced element `e^{-η²/2} η^α sqrt(k!/(k+α)!) · lag`.
fn reduced_from_laguerre(eta: f64, k: usize, alpha: usize, lag: f64) -> f64 {
    let x = eta * eta;
    if k + alpha <= DIRECT_LEVEL_LIMIT {
        let fact = factorials();
        let pref = eta.powi(alpha as i32) * (fact[k] / fact[k + alpha]).sqrt() * (-0.5 * x).exp();
        if pref.is_finite() && (pref != 0.0 || eta == 0.0) {
            return pref * lag;
        }
    }
    if lag == 0.0 || (eta == 0.0 && alpha > 0) {
        return 0.0;
    }
    let ln_eta = if alpha == 0 {
        0.0
    } else {
        alpha as f64 * eta.abs().ln()
    };
    let ln_mag =
        ln_eta + 0.5 * (ln_factorial(k) - ln_factorial(k + alpha)) - 0.5 * x + lag.abs().ln();
    let negative = (lag < 0.0) ^ (eta < 0.0 && alpha % 2 == 1);
    let mag = ln_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}

/// Multiplies a real number by `i^power`.
pub(crate) fn times_i_pow(r: f64, power: usize) -> Complex64 {
    match power % 4 {
        0 => Complex64::new(r, 0.0),
        1 => Complex64::new(0.0, r),
        2 => Complex64::new(-r, 0.0),
        _ => Complex64::new(0.0, -r),
    }
}

/// Real part of the element `<n|D|m>` once the phase `i^{|n-m|}` is factored out.
pub fn fc_reduced(eta_eff: f64, m: usize, n: usize) -> f64 {
    let k = m.min(n);
    let alpha = m.abs_diff(n);
    let lag = laguerre_unchecked(k, alpha as f64, eta_eff * eta_eff);
    reduced_from_laguerre(eta_eff, k, alpha, lag)
}

/// `<n| exp(i η_eff (a + a†)) |m>`.
///
/// `eta_eff` may be negative (projections of the recoil onto an axis); the sign flips the
/// element by `(-1)^{n-m}`.
pub fn fc_factor(eta_eff: f64, m: usize, n: usize) -> FcAmplitude {
    FcAmplitude {
        value: times_i_pow(fc_reduced(eta_eff, m, n), m.abs_diff(n)),
        from_level: m,
        to_level: n,
        eta_effective: eta_eff,
    }
}

/// `<n|D(η_eff)|m>` for `n = 0..=n_max`.
///
/// Each entry is bitwise identical to [`fc_factor`]. For many rows at once use [`FcMatrix`],
/// which shares one Laguerre sweep per diagonal and costs `O(n_max)` per row.
pub fn fc_row(eta_eff: f64, m: usize, n_max: usize) -> Vec<FcAmplitude> {
    (0..=n_max).map(|n| fc_factor(eta_eff, m, n)).collect()
}

/// Dense table of reduced elements `r[n][l]` for `n < rows`, `l < cols`, at one `η`.
///
/// The full complex element is `i^{|n-l|} r[n][l]`.
#[derive(Debug, Clone)]
pub struct FcMatrix {
    eta: f64,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FcMatrix {
    pub fn new(eta: f64, rows: usize, cols: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        let x = eta * eta;
        let span = rows.max(cols);
        for alpha in 0..span {
            // Entries on this diagonal: (k + alpha, k) and (k, k + alpha).
            let lower = rows.saturating_sub(alpha).min(cols);
            let upper = cols.saturating_sub(alpha).min(rows);
            let kmax = lower.max(upper);
            for (k, lag) in LaguerreSeq::new(alpha as f64, x).take(kmax).enumerate() {
                let r = reduced_from_laguerre(eta, k, alpha, lag);
                if k < lower {
                    data[(k + alpha) * cols + k] = r;
                }
                if k < upper {
                    data[k * cols + k + alpha] = r;
                }
            }
        }
        FcMatrix {
            eta,
            rows,
            cols,
            data,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn reduced(&self, n: usize, l: usize) -> f64 {
        self.data[n * self.cols + l]
    }

    #[inline]
    pub fn amplitude(&self, n: usize, l: usize) -> Complex64 {
        times_i_pow(self.reduced(n, l), n.abs_diff(l))
    }
}

/// Solved dark-state parameters for a target level.
#[derive(Debug, Clone, PartialEq)]
pub struct DarkDesign {
    pub target_level: Level,
    pub detuning_index: i64,
    /// Lamb-Dicke parameters at which the target is dark under detuning `s`.
    pub eta_roots: Vec<f64>,
    /// Interference ratio `A` (2D, `s = 0`) and the `η` it was solved at.
    pub amplitude_ratio: Option<(Complex64, f64)>,
}

impl DarkDesign {
    /// Franck–Condon dark condition of level `m` under detuning `s`.
    pub fn franck_condon(m: usize, s: i64) -> Result<Self> {
        Ok(DarkDesign {
            target_level: Level::One(m),
            detuning_index: s,
            eta_roots: dark_eta_for_level(m, s)?,
            amplitude_ratio: None,
        })
    }

    /// Interference dark state of a 2D level under an `s = 0` pulse.
    pub fn interference(eta: f64, target: (usize, usize)) -> Result<Self> {
        let a = dark_ratio_a(eta, target)?;
        Ok(DarkDesign {
            target_level: Level::Two(target.0, target.1),
            detuning_index: 0,
            eta_roots: vec![eta],
            amplitude_ratio: Some((a, eta)),
        })
    }
}

fn laguerre_zero_bound(m: usize, alpha: f64) -> f64 {
    // Upper bound on the largest zero of L_m^α.
    let b = 2.0 * m as f64 + alpha + 1.0;
    b + (b * b + 0.25 - alpha * alpha).max(0.0).sqrt() + 1.0
}

/// All positive zeros of `L_m^α(x)`, ascending.
fn laguerre_zeros(m: usize, alpha: f64) -> Vec<f64> {
    let f = |x: f64| laguerre_unchecked(m, alpha, x);
    let hi = laguerre_zero_bound(m, alpha);
    let mut step = ROOT_SCAN_STEP;
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for _ in 0..12 {
        brackets.clear();
        let steps = (hi / step).ceil() as usize;
        let mut x0 = 0.0;
        let mut f0 = f(x0);
        for i in 1..=steps {
            let x1 = i as f64 * step;
            let f1 = f(x1);
            if f1 == 0.0 {
                brackets.push((x1, x1));
            } else if f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
                brackets.push((x0, x1));
            }
            x0 = x1;
            f0 = f1;
        }
        if brackets.len() >= m {
            break;
        }
        step *= 0.5;
    }
    brackets
        .into_iter()
        .map(|(a, b)| polish_zero(&f, |x| -laguerre_unchecked(m - 1, alpha + 1.0, x), a, b))
        .collect()
}

fn polish_zero(f: &impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    if a == b {
        return a;
    }
    let mut fa = f(a);
    while b - a > 1e-6 * b.max(1.0) {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..50 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        let step = fx / df(x);
        let next = x - step;
        if !(a..=b).contains(&next) {
            break;
        }
        x = next;
        if step.abs() <= 1e-15 * x.abs() {
            break;
        }
    }
    x
}

/// All `η > 0` at which level `m` is dark under detuning `s`, i.e. `L_m^s(η²) = 0`, ascending.
///
/// There are exactly `m` such values; `m = 1` gives `sqrt(s + 1)`.
pub fn dark_eta_for_level(m: usize, s: i64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Domain(
            "the ground state has no Franck-Condon dark condition".into(),
        ));
    }
    if s < 0 {
        return Err(Error::Domain(format!(
            "dark conditions are solved for non-negative detuning indices, got s = {s}"
        )));
    }
    if m > DEFAULT_MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            n: m,
            max: DEFAULT_MAX_DEGREE,
        });
    }
    Ok(laguerre_zeros(m, s as f64)
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

/// Amplitude ratio `A = -<m_x|e^{ikx}|m_x> / <m_y|e^{iky}|m_y>` that darkens the 2D level
/// `target = (m_x, m_y)` under an `s = 0` pulse.
pub fn dark_ratio_a(eta: f64, target: (usize, usize)) -> Result<Complex64> {
    if !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be finite, got {eta}")));
    }
    let (mx, my) = target;
    let x = eta * eta;
    let lag_y = laguerre_unchecked(my, 0.0, x);
    if lag_y.abs() <= 1e-14 {
        let mut nearby = laguerre_zeros(my, 0.0)
            .into_iter()
            .map(f64::sqrt)
            .collect::<Vec<_>>();
        nearby.sort_by(|a, b| (a - eta).abs().total_cmp(&(b - eta).abs()));
        nearby.truncate(2);
        return Err(Error::SingularRatio {
            eta,
            level: my,
            nearby,
        });
    }
    let fx = fc_reduced(eta, mx, mx);
    let fy = fc_reduced(eta, my, my);
    Ok(Complex64::new(-fx / fy, 0.0))
}
