//! Rate assembly: sphere nodes folded by symmetry, per-axis emission tables and per-column
//! accumulation.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::{Pulse, RateMatrix, RateMode, TrapConfig};
use crate::error::{Error, Result};
use crate::fc::FcMatrix;
use crate::levels::{Basis, Dims};
use crate::quadrature::{axis_quadrature, AngularQuadrature};

const KEY_SCALE: f64 = (1u64 << 40) as f64;

fn quantize(u: f64) -> i64 {
    (u * KEY_SCALE).round() as i64
}

/// A group of sphere nodes sharing the same emission projections.
///
/// `w_direct` weighs the two single-channel terms, `w_cross` the interference term between the
/// x-absorption and y-absorption channels (they differ once nodes related by reflection are
/// merged).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedNode {
    pub ux: f64,
    pub uy: f64,
    pub w_direct: f64,
    pub w_cross: f64,
}

/// One column of the rate matrix: `Γ_{n←m}` for every basis level `n` (self-rate included) and
/// the flux out of the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RateColumn {
    pub rates: Vec<f64>,
    pub leak: f64,
}

impl RateColumn {
    pub fn outflow(&self, m: usize) -> f64 {
        self.rates
            .iter()
            .enumerate()
            .filter(|&(n, _)| n != m)
            .map(|(_, r)| r)
            .sum::<f64>()
            + self.leak
    }
}

#[derive(Debug, Clone, Copy)]
struct AxisKey {
    table: usize,
    /// `i` or `-i`: the element phase is `phase^{|n-l|}` for a signed projection.
    phase: Complex64,
}

#[derive(Debug)]
struct Group {
    kx: usize,
    ky: usize,
    w_direct: f64,
    w_cross: f64,
}

/// Emission tables `⟨n|e^{iηu x}|l⟩` at every distinct projection of one axis.
#[derive(Debug)]
struct AxisTables {
    tables: Vec<FcMatrix>,
    keys: Vec<AxisKey>,
    values: Vec<f64>,
}

impl AxisTables {
    #[inline]
    fn element(&self, key: usize, n: usize, l: usize) -> Complex64 {
        let k = self.keys[key];
        let r = self.tables[k.table].reduced(n, l);
        r * ipow(k.phase, n.abs_diff(l))
    }
}

#[inline]
fn ipow(phase: Complex64, k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => phase,
        2 => Complex64::new(-1.0, 0.0),
        _ => -phase,
    }
}

/// Streaming rate builder for one pulse.
pub struct RateBuilder {
    trap: TrapConfig,
    pulse: Pulse,
    mode: RateMode,
    basis: Basis,
    per_axis: usize,
    absorption: FcMatrix,
    axis: AxisTables,
    groups: Vec<Group>,
    w_sum: f64,
    w_cross_sum: f64,
    driven: Vec<OnceLock<Vec<Complex64>>>,
}

impl std::fmt::Debug for RateBuilder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateBuilder")
            .field("basis", &self.basis)
            .field("mode", &self.mode)
            .field("groups", &self.groups.len())
            .finish()
    }
}

impl RateBuilder {
    pub fn new(trap: &TrapConfig, pulse: &Pulse, mode: RateMode) -> Result<Self> {
        trap.check_regime()?;
        if !(pulse.s.is_finite() && pulse.duration.is_finite() && pulse.duration >= 0.0) {
            return Err(Error::Domain(format!(
                "pulse needs finite detuning and nonnegative duration, got s = {}, d = {}",
                pulse.s, pulse.duration
            )));
        }
        let s_int = match mode {
            RateMode::Resonant => Some(pulse.require_integer()?),
            RateMode::Full => None,
        };
        let basis = trap.basis();
        let per_axis = basis.per_axis();
        let eta = trap.eta();
        let cols = match s_int {
            Some(s) => per_axis + s.max(0) as usize,
            None => {
                per_axis + pulse.s.ceil().max(0.0) as usize + trap.eta.recoil().ceil() as usize + 10
            }
        };
        let two_d = trap.dims == Dims::Two;
        // 1D emission depends on the direction only through its x cosine.
        let weighted: Vec<(f64, f64, f64)> = if two_d {
            AngularQuadrature::new(trap.quad_theta, trap.quad_phi)?
                .nodes
                .iter()
                .map(|node| {
                    let (ux, uy) = node.projections();
                    (ux, uy, node.weight * trap.dipole.density_at(node))
                })
                .collect()
        } else {
            axis_quadrature(trap.quad_theta, trap.dipole)?
                .into_iter()
                .map(|(u, w)| (u, 0.0, w))
                .collect()
        };
        let folded = mode == RateMode::Resonant;
        let s_parity = s_int.map_or(1.0, |s| if s % 2 == 0 { 1.0 } else { -1.0 });

        let mut group_map: BTreeMap<(i64, i64), (f64, f64, f64, f64)> = BTreeMap::new();
        let mut w_sum = 0.0;
        let mut w_cross_sum = 0.0;
        for &(ux, uy, w) in &weighted {
            let (kx, ky, cross) = if folded {
                let sx = if ux < 0.0 { s_parity } else { 1.0 };
                let sy = if uy < 0.0 { s_parity } else { 1.0 };
                (ux.abs(), uy.abs(), w * sx * sy)
            } else {
                (ux, uy, w)
            };
            let e = group_map
                .entry((quantize(kx), quantize(ky)))
                .or_insert((kx, ky, 0.0, 0.0));
            e.2 += w;
            e.3 += cross;
            w_sum += w;
            w_cross_sum += cross;
        }

        let mut table_index: BTreeMap<i64, usize> = BTreeMap::new();
        let mut key_index: BTreeMap<i64, usize> = BTreeMap::new();
        let mut axis = AxisTables {
            tables: Vec::new(),
            keys: Vec::new(),
            values: Vec::new(),
        };
        let mut table_etas = Vec::new();
        let mut key_of = |u: f64, axis: &mut AxisTables| -> usize {
            let q = quantize(u);
            if let Some(&k) = key_index.get(&q) {
                return k;
            }
            let qa = q.abs();
            let table = *table_index.entry(qa).or_insert_with(|| {
                table_etas.push(eta * u.abs());
                table_etas.len() - 1
            });
            let phase = if q < 0 {
                Complex64::new(0.0, -1.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            axis.keys.push(AxisKey { table, phase });
            axis.values.push(u);
            key_index.insert(q, axis.keys.len() - 1);
            axis.keys.len() - 1
        };
        let mut groups = Vec::with_capacity(group_map.len());
        for (ux, uy, wd, wc) in group_map.into_values() {
            let kx = key_of(ux, &mut axis);
            let ky = if two_d { key_of(uy, &mut axis) } else { 0 };
            groups.push(Group {
                kx,
                ky,
                w_direct: wd,
                w_cross: wc,
            });
        }
        axis.tables = table_etas
            .par_iter()
            .map(|&e| FcMatrix::new(e, per_axis, cols))
            .collect();
        let absorption = FcMatrix::new(eta, cols, per_axis);

        Ok(RateBuilder {
            trap: trap.clone(),
            pulse: *pulse,
            mode,
            basis,
            per_axis,
            absorption,
            axis,
            groups,
            w_sum,
            w_cross_sum,
            driven: (0..per_axis).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Node groups after symmetry folding.
    pub fn nodes(&self) -> Vec<ProjectedNode> {
        self.groups
            .iter()
            .map(|g| ProjectedNode {
                ux: self.axis.values[g.kx],
                uy: if self.basis.dims == Dims::Two {
                    self.axis.values[g.ky]
                } else {
                    0.0
                },
                w_direct: g.w_direct,
                w_cross: g.w_cross,
            })
            .collect()
    }

    /// Total angular weight `∫W dΩ` seen by the quadrature.
    pub fn weight_sum(&self) -> f64 {
        self.w_sum
    }

    /// Absorption amplitudes `v_l` from level `m` of one axis, as sparse `(l, v_l)` pairs.
    ///
    /// Resonant mode drops the common phase shared by both channels.
    fn absorption_amplitudes(&self, m: usize) -> Vec<(usize, Complex64)> {
        let cols = self.absorption.rows();
        match self.mode {
            RateMode::Resonant => {
                let l = m as i64 + self.pulse.s as i64;
                if l < 0 || l as usize >= cols {
                    return Vec::new();
                }
                let r = self.absorption.reduced(l as usize, m);
                vec![(l as usize, Complex64::new(r, 0.0))]
            }
            RateMode::Full => {
                let g = self.trap.gamma_over_omega;
                (0..cols)
                    .map(|l| {
                        let det = self.pulse.s - (l as f64 - m as f64);
                        let lor = g / Complex64::new(det, g);
                        let f = self.absorption.amplitude(l, m);
                        (l, lor * f)
                    })
                    .collect()
            }
        }
    }

    fn analytic_norm(v: &[(usize, Complex64)]) -> f64 {
        v.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    fn at(v: &[(usize, Complex64)], l: usize) -> Complex64 {
        v.iter()
            .find(|&&(k, _)| k == l)
            .map_or(Complex64::new(0.0, 0.0), |&(_, a)| a)
    }

    /// Driven vectors `Σ_l X_k[n, l] v_l` for every axis key `k`, flattened `[k][n]`.
    fn compute_driven(&self, m: usize) -> Vec<Complex64> {
        let v = self.absorption_amplitudes(m);
        let n_rows = self.per_axis;
        let mut out = vec![Complex64::new(0.0, 0.0); self.axis.keys.len() * n_rows];
        for (k, chunk) in out.chunks_mut(n_rows).enumerate() {
            for (n, slot) in chunk.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(l, a) in &v {
                    acc += self.axis.element(k, n, l) * a;
                }
                *slot = acc;
            }
        }
        out
    }

    fn driven(&self, m: usize) -> &[Complex64] {
        self.driven[m].get_or_init(|| self.compute_driven(m))
    }

    /// Column `m` of the rate matrix, computed on demand.
    pub fn column(&self, m: usize) -> Result<RateColumn> {
        if m >= self.basis.len() {
            return Err(Error::LevelOutOfRange(m.to_string()));
        }
        Ok(match self.basis.dims {
            Dims::One => self.column_1d(m),
            Dims::Two => self.column_2d(m),
        })
    }

    fn column_1d(&self, m: usize) -> RateColumn {
        let n_rows = self.per_axis;
        let v = self.absorption_amplitudes(m);
        let total = self.w_sum * Self::analytic_norm(&v);
        let mut rates = vec![0.0; n_rows];
        if !v.is_empty() {
            let d = self.compute_driven(m);
            for g in &self.groups {
                let seg = &d[g.kx * n_rows..(g.kx + 1) * n_rows];
                for (r, a) in rates.iter_mut().zip(seg) {
                    *r += g.w_direct * a.norm_sqr();
                }
            }
        }
        finish(rates, total)
    }

    fn column_2d(&self, m: usize) -> RateColumn {
        let n = self.per_axis;
        let (mx, my) = (m / n, m % n);
        let a = self.pulse.amplitude_ratio;
        let vx = self.absorption_amplitudes(mx);
        let vy = self.absorption_amplitudes(my);
        let total = self.w_sum
            * (Self::analytic_norm(&vx) + a.norm_sqr() * Self::analytic_norm(&vy))
            + 2.0 * self.w_cross_sum * (a.conj() * Self::at(&vx, mx) * Self::at(&vy, my).conj()).re;
        if vx.is_empty() && vy.is_empty() {
            return finish(vec![0.0; n * n], total);
        }
        let dx = self.driven(mx);
        let dy = self.driven(my);
        let a2 = a.norm_sqr();
        let inner = 4 * self.groups.len();
        let mut u = DMatrix::<f64>::zeros(n, inner);
        let mut w = DMatrix::<f64>::zeros(inner, n);
        for (gi, g) in self.groups.iter().enumerate() {
            let c = 4 * gi;
            let ax = &dx[g.kx * n..(g.kx + 1) * n];
            let by = &dy[g.ky * n..(g.ky + 1) * n];
            for i in 0..n {
                let bx = self.axis.element(g.kx, i, mx);
                let e = ax[i] * (a * bx).conj();
                u[(i, c)] = g.w_direct * ax[i].norm_sqr();
                u[(i, c + 1)] = g.w_direct * a2 * bx.norm_sqr();
                u[(i, c + 2)] = 2.0 * g.w_cross * e.re;
                u[(i, c + 3)] = -2.0 * g.w_cross * e.im;
                let ay = self.axis.element(g.ky, i, my);
                let z = ay * by[i].conj();
                w[(c, i)] = ay.norm_sqr();
                w[(c + 1, i)] = by[i].norm_sqr();
                w[(c + 2, i)] = z.re;
                w[(c + 3, i)] = z.im;
            }
        }
        let r = u * w;
        let mut rates = vec![0.0; n * n];
        for nx in 0..n {
            for ny in 0..n {
                rates[nx * n + ny] = r[(nx, ny)];
            }
        }
        finish(rates, total)
    }

    /// Assembles the dense generator, columns in parallel.
    pub fn build(&self) -> Result<RateMatrix> {
        let states = self.basis.len();
        let needed = states * states * std::mem::size_of::<f64>();
        if needed > self.trap.memory_budget {
            return Err(Error::Resource {
                states,
                needed,
                budget: self.trap.memory_budget,
            });
        }
        let columns: Vec<RateColumn> = (0..states)
            .into_par_iter()
            .map(|m| self.column(m))
            .collect::<Result<_>>()?;
        Ok(RateMatrix::from_columns(
            self.basis,
            self.mode,
            self.trap.clone(),
            self.pulse,
            columns,
        ))
    }
}

fn finish(mut rates: Vec<f64>, total: f64) -> RateColumn {
    for r in &mut rates {
        if *r < 0.0 {
            *r = 0.0;
        }
    }
    let inside: f64 = rates.iter().sum();
    RateColumn {
        rates,
        leak: (total - inside).max(0.0),
    }
}
