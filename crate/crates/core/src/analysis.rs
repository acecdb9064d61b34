// SPDX-License-Identifier: Apache-2.0

//! Selection probabilities, expected errors, error bounds, variance
//! comparison and an empirical DP audit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{
    exponential_weights, pf_acceptance, Mechanism, PreparedSelection, ScoreContext, Selector,
};
use crate::noise::{CalibratedNoise, NoiseKind, PrivacyBudget};
use crate::quadrature::integrate;
use crate::rng::{derive_seed, stream};
use crate::sensitivity::{smooth_sensitivity, Database, UtilityModel};

/// Per-outcome absolute tolerance handed to the quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
const MAX_SEGMENTS: usize = 4000;
/// Largest outcome set `pf_pmf` evaluates exactly (cost is quadratic per
/// distinct utility value).
pub const PF_EXACT_LIMIT: usize = 20_000;
const PF_MONTE_CARLO_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfMethod {
    Quadrature,
    ClosedForm,
    Enumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionPmf {
    pub probabilities: Vec<f64>,
    pub method: PmfMethod,
    pub tolerance: f64,
}

impl SelectionPmf {
    fn closed_form(probabilities: Vec<f64>) -> Self {
        Self {
            probabilities,
            method: PmfMethod::ClosedForm,
            tolerance: 1e-12,
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

fn check_utilities(u: &[f64]) -> Result<()> {
    if u.is_empty() {
        return Err(Error::Precondition("outcome set is empty".into()));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("utilities must be finite".into()));
    }
    Ok(())
}

/// Distinct utility values with multiplicities, in first-seen order.
fn group(utilities: &[f64]) -> (Vec<f64>, Vec<i32>, Vec<usize>) {
    let mut values: Vec<f64> = Vec::new();
    let mut mult: Vec<i32> = Vec::new();
    let mut of = Vec::with_capacity(utilities.len());
    for &u in utilities {
        match values.iter().position(|&v| v == u) {
            Some(g) => {
                mult[g] += 1;
                of.push(g);
            }
            None => {
                values.push(u);
                mult.push(1);
                of.push(values.len() - 1);
            }
        }
    }
    (values, mult, of)
}

fn heavy_tail_breaks(kind: NoiseKind) -> &'static [f64] {
    match kind {
        NoiseKind::StudentT { .. } | NoiseKind::LaplaceLogNormal { .. } => &[
            -1000.0, -100.0, -30.0, -10.0, -3.0, -1.0, 1.0, 3.0, 10.0, 30.0, 100.0, 1000.0,
        ],
        _ => &[-10.0, -3.0, -1.0, 1.0, 3.0, 10.0],
    }
}

/// `Pr[argmax_s (u_s + N Z_s) = r]` for i.i.d. standard-shape `Z_s`:
///
/// `∫ f(z) prod_{s != r} F((u_r - u_s)/N + z) dz`
///
/// by adaptive quadrature over the noise's truncation window, then
/// renormalised. Outcomes with equal utility share one integral. The
/// `scale` field of `noise` is ignored; `n` is the full scale.
pub fn noisy_max_pmf(utilities: &[f64], noise: &CalibratedNoise, n: f64) -> Result<SelectionPmf> {
    check_utilities(utilities)?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Precondition(format!(
            "noise scale must be positive, got {n}"
        )));
    }
    if utilities.len() == 1 {
        return Ok(SelectionPmf::closed_form(vec![1.0]));
    }
    let (values, mult, of) = group(utilities);
    if values.len() == 1 {
        let p = 1.0 / utilities.len() as f64;
        return Ok(SelectionPmf::closed_form(vec![p; utilities.len()]));
    }
    let window = noise.kind.truncation();
    let per_group = match group_masses(noise, n, &values, &mult, window) {
        Ok(v) => v,
        Err(_) => {
            let wide = (window.0 * 2.0, window.1 * 2.0);
            group_masses(noise, n, &values, &mult, wide)?
        }
    };
    let (masses, errors): (Vec<f64>, Vec<f64>) = per_group.into_iter().unzip();
    let mut probabilities: Vec<f64> = of.iter().map(|&g| masses[g]).collect();
    let total: f64 = probabilities.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Quadrature { residual: 1.0 });
    }
    for p in &mut probabilities {
        *p /= total;
    }
    let err: f64 = of.iter().map(|&g| errors[g]).sum();
    Ok(SelectionPmf {
        probabilities,
        method: PmfMethod::Quadrature,
        tolerance: err + (1.0 - total).abs(),
    })
}

fn group_masses(
    noise: &CalibratedNoise,
    n: f64,
    values: &[f64],
    mult: &[i32],
    (lo, hi): (f64, f64),
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(values.len());
    for (g, &vg) in values.iter().enumerate() {
        let shifts: Vec<(f64, i32)> = values
            .iter()
            .zip(mult)
            .enumerate()
            .filter_map(|(h, (&vh, &m))| {
                let m = if h == g { m - 1 } else { m };
                (m > 0).then_some(((vg - vh) / n, m))
            })
            .collect();
        let integrand = |z: f64| {
            let f = noise.pdf(z);
            if f == 0.0 {
                return 0.0;
            }
            let mut acc = f;
            for &(d, m) in &shifts {
                acc *= noise.cdf(d + z).powi(m);
                if acc == 0.0 {
                    break;
                }
            }
            acc
        };
        let mut breaks: Vec<f64> = heavy_tail_breaks(noise.kind).to_vec();
        breaks.push(0.0);
        breaks.extend(shifts.iter().map(|&(d, _)| -d));
        let r = integrate(
            integrand,
            lo,
            hi,
            &breaks,
            QUADRATURE_TOLERANCE,
            MAX_SEGMENTS,
        );
        if !r.converged {
            return Err(Error::Quadrature {
                residual: r.abs_error,
            });
        }
        out.push((r.value, r.abs_error));
    }
    Ok(out)
}

pub fn em_pmf(utilities: &[f64], epsilon: f64, delta_u: f64) -> Result<SelectionPmf> {
    check_utilities(utilities)?;
    if !(delta_u > 0.0) {
        return Err(Error::Precondition(format!(
            "du must be positive, got {delta_u}"
        )));
    }
    Ok(SelectionPmf::closed_form(exponential_weights(
        utilities, epsilon, delta_u,
    )))
}

/// Permute-and-flip PMF.
///
/// With acceptance probabilities `p`, outcome `r` wins when it is reached
/// and accepted. The outcomes ahead of it in the random order form a
/// uniformly random subset of size `k`, `k` uniform on `0..n`, so
///
/// `Pr[r] = p_r / n * sum_k mean_{|T| = k, r not in T} prod_{s in T} (1 - p_s)`.
///
/// The subset means are normalised elementary symmetric polynomials, built
/// by a recurrence that stays in `[0, 1]`. Outcomes with equal utility share
/// one evaluation. This is the permutation sum in closed form; Monte Carlo
/// is used only above [`PF_EXACT_LIMIT`] outcomes.
pub fn pf_pmf(utilities: &[f64], epsilon: f64, delta_u: f64) -> Result<SelectionPmf> {
    check_utilities(utilities)?;
    if !(delta_u > 0.0) {
        return Err(Error::Precondition(format!(
            "du must be positive, got {delta_u}"
        )));
    }
    let p = pf_acceptance(utilities, epsilon, delta_u);
    let n = p.len();
    if n > PF_EXACT_LIMIT {
        let prepared = PreparedSelection::PermuteAndFlip { accept: p };
        let mut rng = stream(derive_seed(0x5046, n as u64), 0);
        return Ok(monte_carlo_pmf(&prepared, PF_MONTE_CARLO_TRIALS, &mut rng));
    }
    let (values, _, of) = group(utilities);
    let per_group: Vec<f64> = (0..values.len())
        .map(|g| {
            let skip = of.iter().position(|&h| h == g).expect("group is non-empty");
            // mean[k] = e_k / C(m, k) over the m outcomes seen so far
            let mut mean = vec![0.0; n];
            mean[0] = 1.0;
            let mut m = 0usize;
            for (s, &ps) in p.iter().enumerate() {
                if s == skip {
                    continue;
                }
                m += 1;
                let q = 1.0 - ps;
                let mf = m as f64;
                for k in (1..=m).rev() {
                    let kf = k as f64;
                    mean[k] = (kf / mf) * mean[k - 1] * q + ((mf - kf) / mf) * mean[k];
                }
            }
            p[skip] * mean.iter().sum::<f64>() / n as f64
        })
        .collect();
    Ok(SelectionPmf {
        probabilities: of.iter().map(|&g| per_group[g]).collect(),
        method: PmfMethod::Enumeration,
        tolerance: 1e-12,
    })
}

/// Exact PMF of a selector on a score vector.
pub fn selector_pmf(
    selector: &Selector,
    utilities: &[f64],
    ctx: &ScoreContext,
) -> Result<SelectionPmf> {
    let eps = selector.budget.epsilon;
    match selector.mechanism {
        Mechanism::Exponential => em_pmf(utilities, eps, ctx.delta_u),
        Mechanism::PermuteAndFlip => pf_pmf(utilities, eps, ctx.delta_u),
        _ => {
            let (noise, scale) = selector
                .noise_and_scale(ctx)?
                .expect("noise-adding mechanism");
            if scale == 0.0 {
                let top = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let best = utilities.iter().position(|&u| u == top).unwrap_or(0);
                let mut p = vec![0.0; utilities.len()];
                p[best] = 1.0;
                return Ok(SelectionPmf::closed_form(p));
            }
            noisy_max_pmf(utilities, &noise, scale)
        }
    }
}

/// `sum_r Pr[r] (u* - u_r)`.
pub fn expected_error(pmf: &SelectionPmf, utilities: &[f64]) -> f64 {
    let top = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    pmf.probabilities
        .iter()
        .zip(utilities)
        .map(|(p, u)| p * (top - u))
        .sum()
}

/// `|target - sum_r Pr[r] value_r|`.
pub fn absolute_expected_value_error(
    pmf: &SelectionPmf,
    outcome_values: &[f64],
    target: f64,
) -> f64 {
    let mean: f64 = pmf
        .probabilities
        .iter()
        .zip(outcome_values)
        .map(|(p, v)| p * v)
        .sum();
    (target - mean).abs()
}

/// Expected-error bound for SNM with Laplace noise: `4S(ln|R| + 1)/eps`.
pub fn snm_error_bound(s: f64, epsilon: f64, r_count: usize) -> f64 {
    4.0 * s * ((r_count as f64).ln() + 1.0) / epsilon
}

/// Expected-error bound for report-noisy-max with exponential noise:
/// `2du(ln|R| + 1)/eps`.
pub fn rnm_error_bound(delta_u: f64, epsilon: f64, r_count: usize) -> f64 {
    2.0 * delta_u * ((r_count as f64).ln() + 1.0) / epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevComparison {
    pub variance_first: f64,
    pub variance_second: f64,
    /// The distribution with the smaller variance, hence the tighter
    /// Chebyshev tail bound `Pr[|Z| >= k] <= Var/k^2`.
    pub preferred: Preference,
}

pub fn chebyshev_preference(
    a: &CalibratedNoise,
    b: &CalibratedNoise,
) -> Result<ChebyshevComparison> {
    let va = a.variance()?;
    let vb = b.variance()?;
    let preferred = if (va - vb).abs() <= 1e-12 * va.max(vb) {
        Preference::Tie
    } else if va < vb {
        Preference::First
    } else {
        Preference::Second
    };
    Ok(ChebyshevComparison {
        variance_first: va,
        variance_second: vb,
        preferred,
    })
}

/// Two-sided 99% normal quantile.
pub const WILSON_Z99: f64 = 2.575_829_303_548_901;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Mechanism under audit. `UnsafeSmoothEm` is the non-private exponential
/// mechanism scaled by smooth sensitivity, computed with `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AuditTarget {
    Private { selector: Selector },
    UnsafeSmoothEm { epsilon: f64, beta: f64 },
}

impl AuditTarget {
    pub fn label(&self) -> String {
        match self {
            AuditTarget::Private { selector } => selector.mechanism.label().to_string(),
            AuditTarget::UnsafeSmoothEm { .. } => "UNSAFE-EM-Smooth".into(),
        }
    }

    fn prepare<U: UtilityModel + ?Sized>(&self, u: &U, db: &Database) -> Result<PreparedSelection> {
        let scores = u.scores(db);
        match self {
            AuditTarget::Private { selector } => {
                let ctx = selector.context(u, db)?;
                selector.prepare(&scores, &ctx)
            }
            AuditTarget::UnsafeSmoothEm { epsilon, beta } => {
                let s = smooth_sensitivity(u, db, *beta)?;
                PreparedSelection::unsafe_smooth_em(&scores, *epsilon, &s, true)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeAudit {
    pub outcome: usize,
    pub frequency_x: f64,
    pub frequency_y: f64,
    pub interval_x: (f64, f64),
    pub interval_y: (f64, f64),
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub outcomes: Vec<OutcomeAudit>,
    pub flagged: bool,
}

impl AuditReport {
    pub fn flagged_outcomes(&self) -> Vec<usize> {
        self.outcomes
            .iter()
            .filter(|o| o.flagged)
            .map(|o| o.outcome)
            .collect()
    }
}

/// Empirical check of `Pr[A(x) = r] <= e^eps Pr[A(y) = r] + delta` in both
/// directions, with 99% Wilson intervals: an outcome is flagged only when
/// the lower bound on one side exceeds the envelope of the upper bound on
/// the other. A falsifier, not a proof.
pub fn dp_audit<U: UtilityModel + ?Sized>(
    target: &AuditTarget,
    u: &U,
    x: &Database,
    y: &Database,
    budget: PrivacyBudget,
    trials: u64,
    seed: u64,
) -> Result<AuditReport> {
    let distance = x.distance(y);
    if distance != 1 {
        return Err(Error::NotNeighbors { distance });
    }
    if trials == 0 {
        return Err(Error::Precondition("trials must be positive".into()));
    }
    let px = target.prepare(u, x)?;
    let py = target.prepare(u, y)?;
    let cx = px.counts(trials, &mut stream(seed, 0));
    let cy = py.counts(trials, &mut stream(seed, 1));
    let envelope = budget.epsilon.exp();
    let outcomes: Vec<OutcomeAudit> = cx
        .iter()
        .zip(&cy)
        .enumerate()
        .map(|(r, (&a, &b))| {
            let ix = wilson_interval(a, trials, WILSON_Z99);
            let iy = wilson_interval(b, trials, WILSON_Z99);
            let flagged =
                ix.0 > envelope * iy.1 + budget.delta || iy.0 > envelope * ix.1 + budget.delta;
            OutcomeAudit {
                outcome: r,
                frequency_x: a as f64 / trials as f64,
                frequency_y: b as f64 / trials as f64,
                interval_x: ix,
                interval_y: iy,
                flagged,
            }
        })
        .collect();
    Ok(AuditReport {
        mechanism: target.label(),
        epsilon: budget.epsilon,
        delta: budget.delta,
        trials,
        x: x.counts().to_vec(),
        y: y.counts().to_vec(),
        flagged: outcomes.iter().any(|o| o.flagged),
        outcomes,
    })
}

/// Monte Carlo PMF from `trials` draws of a prepared selection.
pub fn monte_carlo_pmf<R: Rng + ?Sized>(
    prepared: &PreparedSelection,
    trials: u64,
    rng: &mut R,
) -> SelectionPmf {
    let counts = prepared.counts(trials, rng);
    SelectionPmf {
        probabilities: counts
            .into_iter()
            .map(|c| c as f64 / trials as f64)
            .collect(),
        method: PmfMethod::MonteCarlo,
        tolerance: 3.0 / (trials as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::calibrate_laplace;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    fn lap() -> CalibratedNoise {
        CalibratedNoise::standard(NoiseKind::Laplace)
    }

    #[test]
    fn symmetric_pair_is_half() {
        for kind in [
            NoiseKind::Laplace,
            NoiseKind::StudentT { dof: 3 },
            NoiseKind::Gumbel,
            NoiseKind::Exponential,
        ] {
            let p = noisy_max_pmf(&[2.0, 2.0], &CalibratedNoise::standard(kind), 0.7).unwrap();
            assert_abs_diff_eq!(p.probabilities[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn laplace_two_outcomes_closed_form() {
        // Pr[Z1 - Z2 > -d] for Laplace differences: 1 - (2 + d) e^{-d} / 4
        let d: f64 = 1.3;
        let p = noisy_max_pmf(&[d, 0.0], &lap(), 1.0).unwrap();
        let want = 1.0 - (2.0 + d) * (-d).exp() / 4.0;
        assert_abs_diff_eq!(p.probabilities[0], want, epsilon = 1e-7);
    }

    #[test]
    fn gumbel_noisy_max_is_softmax() {
        let u = [0.3, 1.0, -0.4, 0.0];
        let p = noisy_max_pmf(&u, &CalibratedNoise::standard(NoiseKind::Gumbel), 0.5).unwrap();
        let w: Vec<f64> = u.iter().map(|x| (x / 0.5f64).exp()).collect();
        let t: f64 = w.iter().sum();
        for (a, b) in p.probabilities.iter().zip(&w) {
            assert_abs_diff_eq!(*a, b / t, epsilon = 1e-7);
        }
    }

    #[test]
    fn vanishing_noise_recovers_argmax() {
        let p = noisy_max_pmf(&[1.0, 0.0], &lap(), 1e-4).unwrap();
        assert_abs_diff_eq!(p.probabilities[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn grouping_matches_ungrouped_sum() {
        let p = noisy_max_pmf(&[1.0, 0.0, 0.0, 1.0, 0.5], &lap(), 1.0).unwrap();
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.probabilities[0], p.probabilities[3], epsilon = 1e-15);
        assert!(p.probabilities[4] > p.probabilities[1]);
    }

    #[test]
    fn em_and_pf_closed_forms() {
        let e = em_pmf(&[1.0, 0.0], 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(e.probabilities[0], 0.7310585786, epsilon = 1e-9);
        let p = pf_pmf(&[1.0, 0.0], 2.0, 1.0).unwrap();
        let q = (-1.0f64).exp();
        assert_abs_diff_eq!(p.probabilities[0], 1.0 - q / 2.0, epsilon = 1e-12);
        let big = pf_pmf(
            &(0..300).map(|i| (i % 7) as f64).collect::<Vec<_>>(),
            0.5,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(big.sum(), 1.0, epsilon = 1e-10);
        let u = pf_pmf(&[0.0; 5], 1.0, 1.0).unwrap();
        for x in u.probabilities {
            assert_abs_diff_eq!(x, 0.2, epsilon = 1e-12);
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn pf_matches_explicit_permutation_sum() {
        let u = [0.2, 1.0, 0.7, -0.5, 0.9];
        let acc = pf_acceptance(&u, 1.5, 1.0);
        let perms = permutations(u.len());
        let mut want = vec![0.0; u.len()];
        for perm in &perms {
            let mut reach = 1.0;
            for &r in perm {
                want[r] += reach * acc[r];
                reach *= 1.0 - acc[r];
            }
        }
        let got = pf_pmf(&u, 1.5, 1.0).unwrap();
        for (g, w) in got.probabilities.iter().zip(&want) {
            assert_abs_diff_eq!(*g, w / perms.len() as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn pf_equals_rnm_exponential() {
        let u = [0.0, 1.0, 0.4, 0.8];
        let pf = pf_pmf(&u, 1.0, 1.0).unwrap();
        let rnm =
            noisy_max_pmf(&u, &CalibratedNoise::standard(NoiseKind::Exponential), 2.0).unwrap();
        for (a, b) in pf.probabilities.iter().zip(&rnm.probabilities) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
        }
    }

    #[test]
    fn errors_and_bounds() {
        let pmf = SelectionPmf::closed_form(vec![0.8, 0.1, 0.1]);
        assert_abs_diff_eq!(expected_error(&pmf, &[1.0, 0.0, 0.0]), 0.2, epsilon = 1e-12);
        let uni = SelectionPmf::closed_form(vec![0.5, 0.5]);
        assert_abs_diff_eq!(absolute_expected_value_error(&uni, &[0.0, 10.0], 5.0), 0.0);
        assert_abs_diff_eq!(snm_error_bound(0.5, 0.7, 6), rnm_error_bound(1.0, 0.7, 6));
        assert_abs_diff_eq!(snm_error_bound(1.0, 1.0, 1), 4.0);
        assert_abs_diff_eq!(
            rnm_error_bound(1.0, 2.0, 8),
            8f64.ln() + 1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn chebyshev_cases() {
        let l = lap();
        let t3 = CalibratedNoise::standard(NoiseKind::StudentT { dof: 3 });
        let t5 = CalibratedNoise::standard(NoiseKind::StudentT { dof: 5 });
        let lln0 = CalibratedNoise::standard(NoiseKind::LaplaceLogNormal { sigma: 0.0 });
        assert_eq!(
            chebyshev_preference(&t3, &l).unwrap().preferred,
            Preference::Second
        );
        assert_eq!(
            chebyshev_preference(&t5, &l).unwrap().preferred,
            Preference::First
        );
        assert_eq!(
            chebyshev_preference(&lln0, &l).unwrap().preferred,
            Preference::Tie
        );
        let t2 = CalibratedNoise::standard(NoiseKind::StudentT { dof: 2 });
        assert!(chebyshev_preference(&t2, &l).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(300, 1000, WILSON_Z99);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 1000, WILSON_Z99);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let b = PrivacyBudget::new(1.0, 0.01).unwrap();
        let sel = Selector::new(Mechanism::RNM_LAP, b).unwrap();
        let ctx = ScoreContext {
            delta_u: 1.0,
            monotonic: false,
            smooth: None,
        };
        let u = [1.0, 0.0, 0.0];
        let exact = selector_pmf(&sel, &u, &ctx).unwrap();
        let mc = monte_carlo_pmf(&sel.prepare(&u, &ctx).unwrap(), 400_000, &mut seeded(21));
        for (a, b) in exact.probabilities.iter().zip(&mc.probabilities) {
            assert!((a - b).abs() < 0.004, "{a} vs {b}");
        }
    }

    #[test]
    fn snm_pmf_uses_smooth_scale() {
        let b = PrivacyBudget::new(1.0, 0.01).unwrap();
        let noise = calibrate_laplace(b).unwrap();
        let sel = Selector::new(Mechanism::SNM_LAP, b).unwrap();
        let s = crate::sensitivity::SmoothSensitivity::step(3, noise.beta);
        let ctx = ScoreContext {
            delta_u: 1.0,
            monotonic: false,
            smooth: Some(s),
        };
        let u = [1.0, 0.0];
        let got = selector_pmf(&sel, &u, &ctx).unwrap();
        let want = noisy_max_pmf(&u, &noise, 2.0 * s.value / noise.alpha).unwrap();
        assert_eq!(got.probabilities, want.probabilities);
    }
}
