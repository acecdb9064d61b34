// SPDX-License-Identifier: Apache-2.0

//! Numerical integration used by the noise densities and the selection
//! probability engine.

// published node tables, kept digit for digit
#![allow(clippy::excessive_precision)]

use std::collections::BinaryHeap;
use std::sync::OnceLock;

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
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

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        res_k += WGK[j] * pair;
        // odd Kronrod indices are the Gauss nodes
        if j % 2 == 1 {
            res_g += WG[j / 2] * pair;
        }
    }
    (res_k * half, ((res_k - res_g) * half).abs())
}

#[derive(PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// `breakpoints` inside the interval (kinks, support edges) split the
/// initial partition. Refinement bisects the worst segment until the summed
/// error estimate drops below `abs_tol` or `max_segments` is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    max_segments: usize,
) -> Integral {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));

    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (value, err) = kronrod15(&f, w[0], w[1]);
        total_err += err;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }

    while total_err > abs_tol && heap.len() < max_segments {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot bisect further at machine precision
            heap.push(worst);
            break;
        }
        let (lv, le) = kronrod15(&f, worst.a, mid);
        let (rv, re) = kronrod15(&f, mid, worst.b);
        total_err += le + re - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            err: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            err: re,
        });
    }

    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_error: f64 = heap.iter().map(|s| s.err).sum();
    Integral {
        value,
        abs_error,
        converged: abs_error <= abs_tol,
    }
}

/// Gauss-Hermite rule for the weight `exp(-x^2)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// `n`-point rule; nodes are roots of the physicists' Hermite polynomial,
    /// found by Newton iteration on the orthonormal recurrence.
    pub fn new(n: usize) -> Self {
        const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PIM4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    /// `E[g(Y)]` for `Y ~ N(0, 1)`.
    pub fn normal_expectation<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let scale = std::f64::consts::SQRT_2;
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(scale * x))
            .sum();
        sum / std::f64::consts::PI.sqrt()
    }
}

/// Shared 64-point rule.
pub fn gauss_hermite_64() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomials_and_kinks() {
        let r = integrate(|x| x * x, 0.0, 3.0, &[], 1e-12, 100);
        assert_abs_diff_eq!(r.value, 9.0, epsilon = 1e-12);
        let r = integrate(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-12, 100);
        assert_abs_diff_eq!(r.value, 2.5, epsilon = 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn integrates_heavy_tail_density() {
        // Cauchy density over a wide window: atan(1e4) * 2 / pi
        let r = integrate(
            |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x)),
            -1e4,
            1e4,
            &[0.0],
            1e-10,
            2000,
        );
        let exact = 2.0 * 1e4f64.atan() / std::f64::consts::PI;
        assert_abs_diff_eq!(r.value, exact, epsilon = 1e-9);
    }

    #[test]
    fn hermite_rule_matches_normal_moments() {
        let gh = gauss_hermite_64();
        assert_eq!(gh.nodes.len(), 64);
        assert_abs_diff_eq!(gh.normal_expectation(|_| 1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.normal_expectation(|y| y * y), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.normal_expectation(|y| y.powi(4)), 3.0, epsilon = 1e-10);
        // E[exp(s Y)] = exp(s^2 / 2)
        let s: f64 = 1.5;
        assert_abs_diff_eq!(
            gh.normal_expectation(|y| (s * y).exp()),
            (s * s / 2.0).exp(),
            epsilon = 1e-10
        );
    }
}
