//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
//! integrands, plus a nested 2-D driver.
//!
//! Semi-infinite ranges are handled by mapping `t in [0, inf)` onto
//! `u = t / (1 + t) in [0, 1)`; the Kronrod nodes never touch the endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-8,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub evaluations: usize,
}

struct Interval<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
    key: f64,
}

impl<const K: usize> PartialEq for Interval<K> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<const K: usize> Eq for Interval<K> {}
impl<const K: usize> PartialOrd for Interval<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Interval<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn kronrod<const K: usize, F: FnMut(f64) -> [f64; K]>(
    f: &mut F,
    a: f64,
    b: f64,
) -> ([f64; K], [f64; K]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kr = [0.0; K];
    let mut ga = [0.0; K];
    let fc = f(c);
    for k in 0..K {
        kr[k] = WGK[7] * fc[k];
        ga[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kr[k] += WGK[j] * s;
            if j % 2 == 1 {
                ga[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; K];
    for k in 0..K {
        kr[k] *= h;
        err[k] = (kr[k] - ga[k] * h).abs();
    }
    (kr, err)
}

fn converged<const K: usize>(value: &[f64; K], error: &[f64; K], opts: &QuadOptions) -> bool {
    (0..K).all(|k| error[k] <= opts.abs_tol.max(opts.rel_tol * value[k].abs()))
}

fn weight<const K: usize>(error: &[f64; K], value: &[f64; K], opts: &QuadOptions) -> f64 {
    (0..K)
        .map(|k| error[k] / opts.abs_tol.max(opts.rel_tol * value[k].abs()))
        .fold(0.0, f64::max)
}

/// Integrate a vector-valued `f` over the finite interval `[a, b]`.
pub fn integrate<const K: usize, F: FnMut(f64) -> [f64; K]>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Estimate<K>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: [0.0; K],
            error: [0.0; K],
            evaluations: 0,
        });
    }
    let (v0, e0) = kronrod(&mut f, a, b);
    let mut evaluations = 15;
    let mut total = v0;
    let mut total_err = e0;
    let mut heap = BinaryHeap::new();
    heap.push(Interval {
        a,
        b,
        value: v0,
        error: e0,
        key: weight(&e0, &v0, opts),
    });
    while !converged(&total, &total_err, opts) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] after {} intervals; value {:?}, error {:?}",
                heap.len(),
                total,
                total_err
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be bisected further; error {:?}",
                worst.a, worst.b, total_err
            )));
        }
        let (vl, el) = kronrod(&mut f, worst.a, mid);
        let (vr, er) = kronrod(&mut f, mid, worst.b);
        evaluations += 30;
        for k in 0..K {
            total[k] += vl[k] + vr[k] - worst.value[k];
            total_err[k] += el[k] + er[k] - worst.error[k];
        }
        for (lo, hi, v, e) in [(worst.a, mid, vl, el), (mid, worst.b, vr, er)] {
            heap.push(Interval {
                a: lo,
                b: hi,
                value: v,
                error: e,
                key: weight(&e, &v, opts),
            });
        }
    }
    // Re-sum to shed the drift of the running updates.
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for iv in heap.iter() {
        for k in 0..K {
            value[k] += iv.value[k];
            error[k] += iv.error[k];
        }
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Map `t >= 0` (possibly infinite) to `u = t / (1 + t)`.
pub fn to_unit(t: f64) -> f64 {
    if t.is_infinite() {
        1.0
    } else {
        t / (1.0 + t)
    }
}

/// Inverse of [`to_unit`] together with the Jacobian `dt/du`.
pub fn from_unit(u: f64) -> (f64, f64) {
    let w = 1.0 - u;
    (u / w, 1.0 / (w * w))
}

/// Integrate `f(t)` over `[lo, hi)` with `0 <= lo <= hi <= inf`.
pub fn integrate_halfline<const K: usize, F: FnMut(f64) -> [f64; K]>(
    mut f: F,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<Estimate<K>> {
    integrate(
        |u| {
            let (t, jac) = from_unit(u);
            let mut v = f(t);
            for x in v.iter_mut() {
                *x *= jac;
            }
            v
        },
        to_unit(lo),
        to_unit(hi),
        opts,
    )
}

/// Nested integral of `f(x, y)` over `[x_lo, x_hi) x [y_lo, y_hi)` on the
/// nonnegative quadrant, each bound possibly infinite. The inner (x) solve
/// runs on the Jacobian-weighted integrand at a tenth of the outer
/// tolerance, so its error contributes at most that much to the total.
pub fn integrate_quadrant<const K: usize, F: Fn(f64, f64) -> [f64; K]>(
    f: F,
    x: (f64, f64),
    y: (f64, f64),
    opts: &QuadOptions,
) -> Result<Estimate<K>> {
    let inner_opts = QuadOptions {
        abs_tol: opts.abs_tol * 0.1,
        rel_tol: opts.rel_tol * 0.1,
        max_intervals: opts.max_intervals,
    };
    let mut failure: Option<Error> = None;
    let mut inner_evals = 0usize;
    let outer = integrate(
        |u| {
            if failure.is_some() {
                return [0.0; K];
            }
            let (yv, jac) = from_unit(u);
            let inner = integrate_halfline(
                |xv| {
                    let mut v = f(xv, yv);
                    for c in v.iter_mut() {
                        *c *= jac;
                    }
                    v
                },
                x.0,
                x.1,
                &inner_opts,
            );
            match inner {
                Ok(est) => {
                    inner_evals += est.evaluations;
                    est.value
                }
                Err(e) => {
                    failure = Some(e);
                    [0.0; K]
                }
            }
        },
        to_unit(y.0),
        to_unit(y.1),
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut est = outer?;
    est.evaluations += inner_evals;
    Ok(est)
}
