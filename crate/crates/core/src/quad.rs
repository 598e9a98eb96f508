//! Quadrature helpers.
//!
//! `integrate` is a globally adaptive Gauss-Kronrod rule. Algebraic endpoint
//! singularities are removed by a power substitution first.
//! `GaussRule` holds fixed Gauss-Legendre nodes mapped to `[0, 1]`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{Result, VlxError};

const MAX_INTERVALS: usize = 4000;

// Kronrod 15-point abscissae and weights with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut fv = [0.0; 15];
    fv[7] = fc;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        fv[j] = f1;
        fv[14 - j] = f2;
        k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * k;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j] - mean).abs() + (fv[14 - j] - mean).abs());
    }
    let hh = h.abs();
    let asc = asc * hh;
    let mut err = ((k - g) * h).abs();
    // QUADPACK scaling of the Kronrod-Gauss difference
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    Piece { a, b, value: k * h, err }
}

/// Integrates `f` over `[a, b]` by globally adaptive Gauss-Kronrod (7/15)
/// until the estimated error is below `abs_tol + rel_tol * |I|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(VlxError::Domain(format!("quadrature limits must be finite, got [{a}, {b}]")));
    }
    let first = gk15(&f, a, b);
    let mut total = first.value;
    let mut err = first.err;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while err > abs_tol + rel_tol * total.abs() {
        if heap.len() >= MAX_INTERVALS {
            if err <= 1e3 * (abs_tol + rel_tol * total.abs()) {
                break;
            }
            return Err(VlxError::Quadrature { a, b, estimate: err });
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let l = gk15(&f, worst.a, m);
        let r = gk15(&f, m, worst.b);
        total += l.value + r.value - worst.value;
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
    }
    let mut sum = KahanSum::default();
    for p in heap.iter() {
        sum.add(p.value);
    }
    let v = sum.value();
    if !v.is_finite() {
        return Err(VlxError::Quadrature { a, b, estimate: f64::INFINITY });
    }
    Ok(v)
}

/// Integrates over `[a, b]` split at the given interior points.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total += integrate(&f, w[0], w[1], abs_tol / pieces, rel_tol)?;
        }
    }
    Ok(total)
}

/// Integrates over `[a, inf)` with the map `x = a + s / (1 - s)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        let v = f(a + s / d) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}

/// int_a^b (x - a)^(g-1) h(x) dx with the singular factor removed by the
/// substitution y = (x - a)^g.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    h: F,
    a: f64,
    b: f64,
    g: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let inv = 1.0 / g;
    let top = (b - a).powf(g);
    Ok(integrate(|y: f64| h(a + y.powf(inv)), 0.0, top, abs_tol * g, rel_tol)? * inv)
}

/// int_a^b (b - x)^(g-1) h(x) dx, mirror image of `integrate_left_singular`.
pub fn integrate_right_singular<F: Fn(f64) -> f64>(
    h: F,
    a: f64,
    b: f64,
    g: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let inv = 1.0 / g;
    let top = (b - a).powf(g);
    Ok(integrate(|y: f64| h(b - y.powf(inv)), 0.0, top, abs_tol * g, rel_tol)? * inv)
}

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
        let (nodes, weights) = rule.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).unzip();
        GaussRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + h * x);
        }
        s * h
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}
