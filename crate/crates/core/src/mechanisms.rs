// SPDX-License-Identifier: Apache-2.0

//! Smooth Noisy Max and the baseline selection mechanisms.
//!
//! Every mechanism reduces to sampling from a distribution over outcome
//! indices that depends on the database only through the score vector (and
//! the smooth sensitivity for SNM). [`Selector::prepare`] builds that
//! distribution once so repeated draws, as in the audit, stay cheap.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    calibrate_laplace, calibrate_lln, calibrate_student_t, CalibratedNoise, NoiseKind,
    NoiseSampler, PrivacyBudget,
};
use crate::sensitivity::{smooth_sensitivity, Database, SmoothSensitivity, UtilityModel};

/// Result of one selection. `debug_noisy_scores` is only filled by the
/// injected-noise entry point used in tests; releasing it breaks privacy.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub chosen: usize,
    pub debug_noisy_scores: Option<Vec<f64>>,
}

impl SelectionOutcome {
    fn chosen(chosen: usize) -> Self {
        Self {
            chosen,
            debug_noisy_scores: None,
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Precondition("outcome set is empty".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Precondition("scores must be finite".into()));
    }
    Ok(())
}

fn check_delta_u(delta_u: f64) -> Result<()> {
    if !(delta_u > 0.0 && delta_u.is_finite()) {
        return Err(Error::Precondition(format!(
            "global sensitivity must be positive, got {delta_u}"
        )));
    }
    Ok(())
}

/// Noise scale SNM applies to its standard-shape draws: `2S/alpha`, or
/// `S/alpha` for monotonic utilities.
pub fn snm_scale(
    noise: &CalibratedNoise,
    smooth: &SmoothSensitivity,
    monotonic: bool,
) -> Result<f64> {
    if !noise.kind.is_admissible_family() {
        return Err(Error::UnsupportedMechanism(format!(
            "{} noise is not admissible for Smooth Noisy Max",
            noise.kind.name()
        )));
    }
    if !(noise.alpha > 0.0) {
        return Err(Error::Calibration(format!(
            "alpha must be > 0, got {}",
            noise.alpha
        )));
    }
    let tol = 1e-12 * noise.beta.abs().max(smooth.beta.abs()).max(1.0);
    if (noise.beta - smooth.beta).abs() > tol {
        return Err(Error::BetaMismatch {
            sensitivity_beta: smooth.beta,
            noise_beta: noise.beta,
        });
    }
    let factor = if monotonic { 1.0 } else { 2.0 };
    Ok(factor * smooth.value / noise.alpha)
}

/// Smooth Noisy Max over a score vector.
pub fn snm_select<R: Rng + ?Sized>(
    scores: &[f64],
    monotonic: bool,
    noise: &CalibratedNoise,
    smooth: &SmoothSensitivity,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    check_scores(scores)?;
    let scale = snm_scale(noise, smooth, monotonic)?;
    let sampler = noise.sampler();
    Ok(SelectionOutcome::chosen(noisy_argmax(
        scores, scale, &sampler, rng,
    )))
}

/// SNM with caller-supplied standard-shape draws, one per outcome. Returns
/// the noisy scores for inspection.
pub fn snm_select_with_draws(
    scores: &[f64],
    monotonic: bool,
    noise: &CalibratedNoise,
    smooth: &SmoothSensitivity,
    draws: &[f64],
) -> Result<SelectionOutcome> {
    check_scores(scores)?;
    if draws.len() != scores.len() {
        return Err(Error::Precondition(format!(
            "{} draws for {} outcomes",
            draws.len(),
            scores.len()
        )));
    }
    let scale = snm_scale(noise, smooth, monotonic)?;
    let noisy: Vec<f64> = scores
        .iter()
        .zip(draws)
        .map(|(s, z)| s + scale * z)
        .collect();
    Ok(SelectionOutcome {
        chosen: argmax(&noisy),
        debug_noisy_scores: Some(noisy),
    })
}

fn noisy_argmax<R: Rng + ?Sized>(
    scores: &[f64],
    scale: f64,
    sampler: &NoiseSampler,
    rng: &mut R,
) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        let v = s + scale * sampler.sample(rng);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Normalised weights `∝ exp(eps * u / (2 du))`, max-shifted before
/// exponentiation.
pub fn exponential_weights(scores: &[f64], epsilon: f64, delta_u: f64) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores
        .iter()
        .map(|&s| (epsilon * (s - top) / (2.0 * delta_u)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn sample_categorical<R: Rng + ?Sized>(cumulative: &[f64], rng: &mut R) -> usize {
    let target = rng.random::<f64>() * cumulative[cumulative.len() - 1];
    cumulative
        .iter()
        .position(|&c| target < c)
        .unwrap_or(cumulative.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

pub fn exponential_mechanism<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    delta_u: f64,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    check_scores(scores)?;
    check_delta_u(delta_u)?;
    let cum = cumulative(&exponential_weights(scores, epsilon, delta_u));
    Ok(SelectionOutcome::chosen(sample_categorical(&cum, rng)))
}

/// Acceptance probabilities `exp(eps (u - u*) / (2 du))`, formed in log space.
pub fn pf_acceptance(scores: &[f64], epsilon: f64, delta_u: f64) -> Vec<f64> {
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|&s| {
            let log_p = epsilon * (s - top) / (2.0 * delta_u);
            log_p.min(0.0).exp()
        })
        .collect()
}

fn permute_and_flip_with<R: Rng + ?Sized>(
    accept: &[f64],
    order: &mut [usize],
    rng: &mut R,
) -> usize {
    loop {
        order.shuffle(rng);
        for &r in order.iter() {
            if rng.random::<f64>() < accept[r] {
                return r;
            }
        }
    }
}

pub fn permute_and_flip<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    delta_u: f64,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    check_scores(scores)?;
    check_delta_u(delta_u)?;
    let accept = pf_acceptance(scores, epsilon, delta_u);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    Ok(SelectionOutcome::chosen(permute_and_flip_with(
        &accept, &mut order, rng,
    )))
}

/// Report-noisy-max with Laplace, Exponential or Gumbel noise at scale
/// `2 du / eps`.
pub fn report_noisy_max<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    delta_u: f64,
    kind: NoiseKind,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    check_scores(scores)?;
    check_delta_u(delta_u)?;
    let noise = baseline_noise(kind, delta_u, epsilon)?;
    Ok(SelectionOutcome::chosen(noisy_argmax(
        scores,
        noise.scale,
        &noise.sampler(),
        rng,
    )))
}

fn baseline_noise(kind: NoiseKind, delta_u: f64, epsilon: f64) -> Result<CalibratedNoise> {
    match kind {
        NoiseKind::Laplace | NoiseKind::Exponential | NoiseKind::Gumbel => {
            Ok(CalibratedNoise::baseline(kind, delta_u, epsilon))
        }
        other => Err(Error::UnsupportedMechanism(format!(
            "report-noisy-max with {} noise",
            other.name()
        ))),
    }
}

/// Exponential mechanism with the smooth sensitivity in place of `du`.
///
/// Not differentially private. It exists to reproduce the counterexample
/// and refuses to run unless `acknowledged` is set.
pub fn em_with_smooth_sensitivity_unsafe<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    smooth: &SmoothSensitivity,
    acknowledged: bool,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    if !acknowledged {
        return Err(Error::UnsafeNotAcknowledged);
    }
    exponential_mechanism(scores, epsilon, smooth.value, rng)
}

/// Noise family for Smooth Noisy Max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "noise", rename_all = "snake_case")]
pub enum SnmNoise {
    Laplace,
    StudentT { dof: u32 },
    LaplaceLogNormal { sigma: f64 },
}

/// Noise family for report-noisy-max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RnmNoise {
    Laplace,
    Exponential,
    Gumbel,
}

impl RnmNoise {
    pub fn kind(self) -> NoiseKind {
        match self {
            RnmNoise::Laplace => NoiseKind::Laplace,
            RnmNoise::Exponential => NoiseKind::Exponential,
            RnmNoise::Gumbel => NoiseKind::Gumbel,
        }
    }
}

/// A DP selection mechanism by family. The unsafe smooth-sensitivity
/// exponential mechanism is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum Mechanism {
    Exponential,
    PermuteAndFlip,
    ReportNoisyMax { noise: RnmNoise },
    SmoothNoisyMax { noise: SnmNoise },
}

pub const DEFAULT_DOF: u32 = 3;
pub const DEFAULT_SIGMA: f64 = 1.0;

impl Mechanism {
    pub const EM: Mechanism = Mechanism::Exponential;
    pub const PF: Mechanism = Mechanism::PermuteAndFlip;
    pub const RNM_LAP: Mechanism = Mechanism::ReportNoisyMax {
        noise: RnmNoise::Laplace,
    };
    pub const RNM_EXP: Mechanism = Mechanism::ReportNoisyMax {
        noise: RnmNoise::Exponential,
    };
    pub const RNM_GUM: Mechanism = Mechanism::ReportNoisyMax {
        noise: RnmNoise::Gumbel,
    };
    pub const SNM_LAP: Mechanism = Mechanism::SmoothNoisyMax {
        noise: SnmNoise::Laplace,
    };

    pub fn snm_t(dof: u32) -> Self {
        Mechanism::SmoothNoisyMax {
            noise: SnmNoise::StudentT { dof },
        }
    }

    pub fn snm_lln(sigma: f64) -> Self {
        Mechanism::SmoothNoisyMax {
            noise: SnmNoise::LaplaceLogNormal { sigma },
        }
    }

    /// Short name, e.g. `SNM-T`. Noise parameters are not part of the name.
    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::Exponential => "EM",
            Mechanism::PermuteAndFlip => "PF",
            Mechanism::ReportNoisyMax { noise } => match noise {
                RnmNoise::Laplace => "RNM-Lap",
                RnmNoise::Exponential => "RNM-Exp",
                RnmNoise::Gumbel => "RNM-Gum",
            },
            Mechanism::SmoothNoisyMax { noise } => match noise {
                SnmNoise::Laplace => "SNM-Lap",
                SnmNoise::StudentT { .. } => "SNM-T",
                SnmNoise::LaplaceLogNormal { .. } => "SNM-LLN",
            },
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Mechanism::SmoothNoisyMax { .. })
    }

    /// Parses a short name, filling noise parameters from `dof`/`sigma`.
    pub fn parse_with(name: &str, dof: u32, sigma: f64) -> Result<Self> {
        let m = match name.trim().to_ascii_uppercase().as_str() {
            "EM" => Mechanism::EM,
            "PF" => Mechanism::PF,
            "RNM-LAP" => Mechanism::RNM_LAP,
            "RNM-EXP" => Mechanism::RNM_EXP,
            "RNM-GUM" => Mechanism::RNM_GUM,
            "SNM-LAP" => Mechanism::SNM_LAP,
            "SNM-T" => Mechanism::snm_t(dof),
            "SNM-LLN" => Mechanism::snm_lln(sigma),
            _ => return Err(Error::UnsupportedMechanism(name.to_string())),
        };
        Ok(m)
    }

    pub fn all(dof: u32, sigma: f64) -> Vec<Mechanism> {
        vec![
            Mechanism::EM,
            Mechanism::PF,
            Mechanism::RNM_LAP,
            Mechanism::RNM_EXP,
            Mechanism::RNM_GUM,
            Mechanism::SNM_LAP,
            Mechanism::snm_t(dof),
            Mechanism::snm_lln(sigma),
        ]
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::parse_with(s, DEFAULT_DOF, DEFAULT_SIGMA)
    }
}

/// A mechanism bound to a privacy budget, with its SNM noise calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selector {
    pub mechanism: Mechanism,
    pub budget: PrivacyBudget,
    pub noise: Option<CalibratedNoise>,
}

/// What a selection needs to know about the scores besides their values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreContext {
    pub delta_u: f64,
    pub monotonic: bool,
    pub smooth: Option<SmoothSensitivity>,
}

impl Selector {
    pub fn new(mechanism: Mechanism, budget: PrivacyBudget) -> Result<Self> {
        let noise = match mechanism {
            Mechanism::SmoothNoisyMax { noise } => Some(match noise {
                SnmNoise::Laplace => calibrate_laplace(budget)?,
                SnmNoise::StudentT { dof } => calibrate_student_t(budget, dof, None)?,
                SnmNoise::LaplaceLogNormal { sigma } => calibrate_lln(budget, sigma, None)?,
            }),
            _ => None,
        };
        Ok(Self {
            mechanism,
            budget,
            noise,
        })
    }

    /// SNM with an explicitly calibrated noise (e.g. overridden `(alpha, beta)`).
    pub fn with_noise(budget: PrivacyBudget, noise: CalibratedNoise) -> Result<Self> {
        let snm = match noise.kind {
            NoiseKind::Laplace => SnmNoise::Laplace,
            NoiseKind::StudentT { dof } => SnmNoise::StudentT { dof },
            NoiseKind::LaplaceLogNormal { sigma } => SnmNoise::LaplaceLogNormal { sigma },
            other => {
                return Err(Error::UnsupportedMechanism(format!(
                    "{} noise for Smooth Noisy Max",
                    other.name()
                )))
            }
        };
        Ok(Self {
            mechanism: Mechanism::SmoothNoisyMax { noise: snm },
            budget,
            noise: Some(noise),
        })
    }

    /// The smoothing exponent the sensitivity must be computed with (SNM only).
    pub fn beta(&self) -> Option<f64> {
        self.noise.map(|n| n.beta)
    }

    /// Standard-shape noise and the scale applied to it, for noise-adding
    /// mechanisms.
    pub fn noise_and_scale(&self, ctx: &ScoreContext) -> Result<Option<(CalibratedNoise, f64)>> {
        match self.mechanism {
            Mechanism::Exponential | Mechanism::PermuteAndFlip => Ok(None),
            Mechanism::ReportNoisyMax { noise } => {
                check_delta_u(ctx.delta_u)?;
                let n = baseline_noise(noise.kind(), ctx.delta_u, self.budget.epsilon)?;
                Ok(Some((CalibratedNoise::standard(n.kind), n.scale)))
            }
            Mechanism::SmoothNoisyMax { .. } => {
                let noise = self.noise.expect("calibrated in Selector::new");
                let smooth = ctx.smooth.ok_or_else(|| {
                    Error::Precondition("Smooth Noisy Max needs a smooth sensitivity".into())
                })?;
                let scale = snm_scale(&noise, &smooth, ctx.monotonic)?;
                Ok(Some((noise, scale)))
            }
        }
    }

    /// Precomputes the output distribution for one score vector.
    pub fn prepare(&self, scores: &[f64], ctx: &ScoreContext) -> Result<PreparedSelection> {
        check_scores(scores)?;
        let eps = self.budget.epsilon;
        let prepared = match self.mechanism {
            Mechanism::Exponential => {
                check_delta_u(ctx.delta_u)?;
                PreparedSelection::Categorical {
                    cumulative: cumulative(&exponential_weights(scores, eps, ctx.delta_u)),
                }
            }
            Mechanism::PermuteAndFlip => {
                check_delta_u(ctx.delta_u)?;
                PreparedSelection::PermuteAndFlip {
                    accept: pf_acceptance(scores, eps, ctx.delta_u),
                }
            }
            _ => {
                let (noise, scale) = self.noise_and_scale(ctx)?.expect("noise-adding mechanism");
                PreparedSelection::NoisyMax {
                    scores: scores.to_vec(),
                    scale,
                    sampler: noise.sampler(),
                }
            }
        };
        Ok(prepared)
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        scores: &[f64],
        ctx: &ScoreContext,
        rng: &mut R,
    ) -> Result<SelectionOutcome> {
        let prepared = self.prepare(scores, ctx)?;
        Ok(SelectionOutcome::chosen(prepared.sample(rng)))
    }

    /// Score context for `u` on `db`, computing the smooth sensitivity with
    /// this selector's beta when needed.
    pub fn context<U: UtilityModel + ?Sized>(&self, u: &U, db: &Database) -> Result<ScoreContext> {
        let smooth = match self.beta() {
            Some(beta) => Some(smooth_sensitivity(u, db, beta)?),
            None => None,
        };
        Ok(ScoreContext {
            delta_u: u.global_sensitivity(),
            monotonic: u.is_monotonic(),
            smooth,
        })
    }

    /// Runs the mechanism on `u(db, .)`.
    pub fn select_model<U: UtilityModel + ?Sized, R: Rng + ?Sized>(
        &self,
        u: &U,
        db: &Database,
        rng: &mut R,
    ) -> Result<SelectionOutcome> {
        let ctx = self.context(u, db)?;
        self.select(&u.scores(db), &ctx, rng)
    }
}

/// Output distribution of a mechanism on a fixed score vector.
#[derive(Debug, Clone)]
pub enum PreparedSelection {
    Categorical {
        cumulative: Vec<f64>,
    },
    PermuteAndFlip {
        accept: Vec<f64>,
    },
    NoisyMax {
        scores: Vec<f64>,
        scale: f64,
        sampler: NoiseSampler,
    },
}

impl PreparedSelection {
    /// The exponential mechanism with `S` in place of `du`. Not DP.
    pub fn unsafe_smooth_em(
        scores: &[f64],
        epsilon: f64,
        smooth: &SmoothSensitivity,
        acknowledged: bool,
    ) -> Result<Self> {
        if !acknowledged {
            return Err(Error::UnsafeNotAcknowledged);
        }
        check_scores(scores)?;
        check_delta_u(smooth.value)?;
        Ok(PreparedSelection::Categorical {
            cumulative: cumulative(&exponential_weights(scores, epsilon, smooth.value)),
        })
    }

    pub fn outcome_count(&self) -> usize {
        match self {
            PreparedSelection::Categorical { cumulative } => cumulative.len(),
            PreparedSelection::PermuteAndFlip { accept } => accept.len(),
            PreparedSelection::NoisyMax { scores, .. } => scores.len(),
        }
    }

    /// Histogram of `trials` draws.
    pub fn counts<R: Rng + ?Sized>(&self, trials: u64, rng: &mut R) -> Vec<u64> {
        let mut counts = vec![0u64; self.outcome_count()];
        match self {
            PreparedSelection::PermuteAndFlip { accept } => {
                let mut order: Vec<usize> = (0..accept.len()).collect();
                for _ in 0..trials {
                    counts[permute_and_flip_with(accept, &mut order, rng)] += 1;
                }
            }
            _ => {
                for _ in 0..trials {
                    counts[self.sample(rng)] += 1;
                }
            }
        }
        counts
    }
}

impl Distribution<usize> for PreparedSelection {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            PreparedSelection::Categorical { cumulative } => sample_categorical(cumulative, rng),
            PreparedSelection::PermuteAndFlip { accept } => {
                let mut order: Vec<usize> = (0..accept.len()).collect();
                permute_and_flip_with(accept, &mut order, rng)
            }
            PreparedSelection::NoisyMax {
                scores,
                scale,
                sampler,
            } => noisy_argmax(scores, *scale, sampler, rng),
        }
    }
}
