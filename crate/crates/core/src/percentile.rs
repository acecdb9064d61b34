// SPDX-License-Identifier: Apache-2.0

//! Percentile selection.
//!
//! The utility of a candidate value is 1 when it equals the `p`-th
//! percentile `x_k` of the data and 0 otherwise, so `du = 1` and SNM's
//! advantage comes from the smooth sensitivity, which decays with the number
//! of edits needed to move `x_k`.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    absolute_expected_value_error, rnm_error_bound, selector_pmf, snm_error_bound,
};
use crate::error::{Error, Result};
use crate::experiment::{Mode, ResultRow};
use crate::mechanisms::{Mechanism, ScoreContext, Selector};
use crate::noise::PrivacyBudget;
use crate::rng::{derive_seed, stream};
use crate::sensitivity::{Database, SmoothSensitivity, UtilityModel};

/// Which closed form supplies the smooth sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothRule {
    /// The published `e^{-(2j+1) beta}` (percentile), `e^{-j beta}` (leaf).
    #[default]
    Published,
    /// Minimum edit distance, equal to brute force.
    Exact,
}

impl std::str::FromStr for SmoothRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "published" => Ok(SmoothRule::Published),
            "exact" => Ok(SmoothRule::Exact),
            _ => Err(Error::Precondition(format!(
                "smooth rule must be `published` or `exact`, got `{s}`"
            ))),
        }
    }
}

pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileInstance {
    data: Vec<f64>,
    lambda: f64,
    p: u32,
    outcome_grid: Vec<f64>,
}

impl PercentileInstance {
    /// Sorts `data` and builds the default grid: every distinct data value
    /// plus 64 evenly spaced points on `[0, lambda]`.
    pub fn new(data: Vec<f64>, lambda: f64, p: u32) -> Result<Self> {
        Self::with_grid_points(data, lambda, p, DEFAULT_GRID_POINTS)
    }

    pub fn with_grid_points(
        mut data: Vec<f64>,
        lambda: f64,
        p: u32,
        points: usize,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Precondition(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if data.iter().any(|v| !(0.0..=lambda).contains(v)) {
            return Err(Error::Dataset(format!(
                "data values must lie in [0, {lambda}]"
            )));
        }
        data.sort_by(f64::total_cmp);
        let mut grid: Vec<f64> = data.clone();
        if points == 1 {
            grid.push(0.0);
        } else {
            grid.extend((0..points).map(|i| lambda * i as f64 / (points - 1) as f64));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Self::with_grid(data, lambda, p, grid)
    }

    pub fn with_grid(
        mut data: Vec<f64>,
        lambda: f64,
        p: u32,
        mut outcome_grid: Vec<f64>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Dataset("percentile data is empty".into()));
        }
        if !(1..=99).contains(&p) {
            return Err(Error::Precondition(format!("p must be in 1..=99, got {p}")));
        }
        data.sort_by(f64::total_cmp);
        outcome_grid.sort_by(f64::total_cmp);
        outcome_grid.dedup();
        let k = percentile_index(data.len(), p);
        if !outcome_grid.contains(&data[k]) {
            return Err(Error::Precondition(
                "outcome grid must contain the true percentile".into(),
            ));
        }
        Ok(Self {
            data,
            lambda,
            p,
            outcome_grid,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn outcome_grid(&self) -> &[f64] {
        &self.outcome_grid
    }

    pub fn k(&self) -> usize {
        percentile_index(self.data.len(), self.p)
    }

    pub fn target(&self) -> f64 {
        self.data[self.k()]
    }

    /// Utility vector over the outcome grid.
    pub fn utilities(&self) -> Vec<f64> {
        let t = self.target();
        self.outcome_grid
            .iter()
            .map(|&v| utility_percentile(t, v))
            .collect()
    }

    /// Counts of data strictly below, equal to and strictly above `x_k`.
    pub fn split_counts(&self) -> (usize, usize, usize) {
        split_counts(&self.data, self.target())
    }
}

/// `k = floor(p n / 100)` as a 0-based position, clamped to `n - 1`.
pub fn percentile_index(n: usize, p: u32) -> usize {
    assert!(n >= 1, "percentile of an empty dataset");
    (p as usize * n / 100).min(n - 1)
}

/// 1 when `candidate` equals the percentile value, else 0.
pub fn utility_percentile(target: f64, candidate: f64) -> f64 {
    if candidate == target {
        1.0
    } else {
        0.0
    }
}

fn split_counts(sorted: &[f64], v: f64) -> (usize, usize, usize) {
    let below = sorted.partition_point(|&x| x < v);
    let upto = sorted.partition_point(|&x| x <= v);
    (below, upto - below, sorted.len() - upto)
}

/// `j`: copies of `x_k` strictly left of `k` or strictly right of it,
/// whichever is fewer.
pub fn repetition_radius(inst: &PercentileInstance) -> usize {
    let (below, equal, _) = inst.split_counts();
    let k = inst.k();
    let left = k - below;
    let right = below + equal - 1 - k;
    left.min(right)
}

/// Published local sensitivity at distance `t`: 1 iff `t >= 2j + 1`.
pub fn percentile_local_sensitivity_at_t(j: usize, t: usize) -> f64 {
    if t > 2 * j {
        1.0
    } else {
        0.0
    }
}

/// Published smooth sensitivity `e^{-(2j+1) beta}`.
pub fn percentile_smooth_sensitivity(j: usize, beta: f64) -> SmoothSensitivity {
    if beta == 0.0 {
        log::warn!("beta = 0 gives no attenuation; smooth sensitivity equals du");
    }
    SmoothSensitivity::step(2 * j + 1, beta)
}

/// Whether the record domain has room strictly below / above a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Room {
    pub below: bool,
    pub above: bool,
}

impl Room {
    pub const BOTH: Room = Room {
        below: true,
        above: true,
    };
}

/// Fewest record edits (additions or removals) that change the `p`-th
/// percentile value, starting from `below`, `equal`, `above` records
/// relative to the current value.
pub fn percentile_edit_distance(
    below: usize,
    equal: usize,
    above: usize,
    p: u32,
    room: Room,
) -> usize {
    let n = below + equal + above;
    assert!(
        equal >= 1 && n >= 1,
        "the current percentile value must be present"
    );
    let f = |m: usize| (p as usize * m / 100).min(m - 1);
    // Down: add below, remove above or equal copies; succeeds once
    // k' < below'. Up: add above, remove below or equal copies; succeeds
    // once k' >= below' + equal'. Mixing directions never helps, and
    // removing every copy (cost `equal`) always succeeds.
    for c in 1..equal {
        for added in 0..=c {
            let removed = c - added;
            let m = n + added - removed;
            if (added == 0 || room.below) && removed <= above + equal && f(m) < below + added {
                return c;
            }
            if (added == 0 || room.above)
                && removed <= below + equal
                && f(m) >= below + equal - removed
            {
                return c;
            }
        }
    }
    equal
}

/// Exact smooth sensitivity `e^{-(m-1) beta}` where `m` is
/// [`percentile_edit_distance`].
pub fn percentile_exact_smooth_sensitivity(
    inst: &PercentileInstance,
    beta: f64,
) -> SmoothSensitivity {
    let (b, e, a) = inst.split_counts();
    let v = inst.target();
    let room = Room {
        below: v > 0.0,
        above: v < inst.lambda,
    };
    let m = percentile_edit_distance(b, e, a, inst.p, room);
    SmoothSensitivity::step(m - 1, beta)
}

pub fn percentile_smooth(
    inst: &PercentileInstance,
    beta: f64,
    rule: SmoothRule,
) -> SmoothSensitivity {
    match rule {
        SmoothRule::Published => percentile_smooth_sensitivity(repetition_radius(inst), beta),
        SmoothRule::Exact => percentile_exact_smooth_sensitivity(inst, beta),
    }
}

/// The percentile utility over a finite value universe, as a
/// [`UtilityModel`]: records and outcomes are both universe indices.
#[derive(Debug, Clone)]
pub struct PercentileModel {
    pub values: Vec<f64>,
    pub p: u32,
    pub rule: SmoothRule,
    /// Skip the closed forms so callers get brute force.
    pub analytic: bool,
}

impl PercentileModel {
    pub fn new(values: Vec<f64>, p: u32, rule: SmoothRule) -> Self {
        Self {
            values,
            p,
            rule,
            analytic: true,
        }
    }

    pub fn brute_force(values: Vec<f64>, p: u32) -> Self {
        Self {
            values,
            p,
            rule: SmoothRule::Exact,
            analytic: false,
        }
    }

    /// Universe index of the percentile record, `None` when empty.
    fn percentile_record(&self, db: &Database) -> Option<usize> {
        if db.is_empty() {
            return None;
        }
        let k = percentile_index(db.len(), self.p);
        let mut seen = 0usize;
        for (i, &c) in db.counts().iter().enumerate() {
            seen += c as usize;
            if seen > k {
                return Some(i);
            }
        }
        unreachable!("k < |db|")
    }

    fn split(&self, db: &Database, at: usize) -> (usize, usize, usize) {
        let c = db.counts();
        let below = c[..at].iter().map(|&x| x as usize).sum();
        let above = c[at + 1..].iter().map(|&x| x as usize).sum();
        (below, c[at] as usize, above)
    }

    /// Edits to change the percentile record; 0 for the empty database.
    fn edit_distance(&self, db: &Database) -> usize {
        match self.percentile_record(db) {
            None => 0,
            Some(at) => {
                let (b, e, a) = self.split(db, at);
                let room = Room {
                    below: at > 0,
                    above: at + 1 < self.values.len(),
                };
                percentile_edit_distance(b, e, a, self.p, room)
            }
        }
    }

    fn radius(&self, db: &Database) -> usize {
        let at = self.percentile_record(db).expect("non-empty");
        let (b, e, _) = self.split(db, at);
        let k = percentile_index(db.len(), self.p);
        (k - b).min(b + e - 1 - k)
    }
}

impl UtilityModel for PercentileModel {
    fn universe_size(&self) -> usize {
        self.values.len()
    }

    fn outcome_count(&self) -> usize {
        self.values.len()
    }

    fn scores(&self, db: &Database) -> Vec<f64> {
        let mut s = vec![0.0; self.values.len()];
        if let Some(i) = self.percentile_record(db) {
            s[i] = 1.0;
        }
        s
    }

    fn global_sensitivity(&self) -> f64 {
        1.0
    }

    fn local_sensitivity_at(&self, db: &Database, t: usize) -> Option<f64> {
        if !self.analytic || db.is_empty() {
            return None;
        }
        Some(match self.rule {
            SmoothRule::Published => percentile_local_sensitivity_at_t(self.radius(db), t),
            SmoothRule::Exact => {
                if t + 1 >= self.edit_distance(db) {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    fn smooth_sensitivity(&self, db: &Database, beta: f64) -> Option<SmoothSensitivity> {
        if !self.analytic {
            return None;
        }
        if db.is_empty() {
            // a single insertion sets the percentile
            return Some(SmoothSensitivity::step(0, beta));
        }
        Some(match self.rule {
            SmoothRule::Published => percentile_smooth_sensitivity(self.radius(db), beta),
            SmoothRule::Exact => SmoothSensitivity::step(self.edit_distance(db) - 1, beta),
        })
    }
}

/// Synthetic data with repetition radius `j` at the `p`-th percentile.
///
/// `2j + 1` copies of `lambda / 2` are centred on position `k`. The values
/// below spread evenly over `[0, 0.88 m]` and those above rise convexly over
/// `[1.12 m, lambda]` (`m = lambda / 2`), so the distribution is skewed and
/// the mean of a diffuse selection differs from `x_k`.
pub fn synthetic_percentile_data(n: usize, lambda: f64, p: u32, j: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Precondition("n must be positive".into()));
    }
    let k = percentile_index(n, p);
    if k < j || k + j >= n {
        return Err(Error::Precondition(format!(
            "j = {j} does not fit around position {k} of {n}"
        )));
    }
    let m = lambda / 2.0;
    let below = k - j;
    let above = n - k - j - 1;
    let lo_top = (0.88 * m).round();
    let hi_start = (1.12 * m).round();
    let mut data = Vec::with_capacity(n);
    for i in 0..below {
        let v = if below == 1 {
            0.0
        } else {
            (lo_top * i as f64 / (below - 1) as f64).floor()
        };
        data.push(v);
    }
    data.extend(std::iter::repeat_n(m, 2 * j + 1));
    for i in 0..above {
        let frac = if above == 1 {
            0.0
        } else {
            i as f64 / (above - 1) as f64
        };
        data.push(hi_start + ((lambda - hi_start) * frac.powf(1.5)).floor());
    }
    Ok(data)
}

/// The bundled instance: `n = 101`, `lambda = 100`, `p = 50`, `j = 5`.
pub fn bundled_instance() -> PercentileInstance {
    let data = synthetic_percentile_data(101, 100.0, 50, 5).expect("valid parameters");
    PercentileInstance::new(data, 100.0, 50).expect("valid instance")
}

/// Reads one real per line from a CSV; a non-numeric first line is taken
/// as a header.
pub fn load_percentile_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Dataset(format!(
                    "{}: line {}: `{field}` is not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PercentileConfig {
    pub mechanisms: Vec<Mechanism>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub mode: Mode,
    pub trials: u64,
    pub seed: u64,
    pub rule: SmoothRule,
}

/// AEE (and the matching utility-error bound) for every (mechanism, eps).
pub fn run_percentile_experiment(
    inst: &PercentileInstance,
    cfg: &PercentileConfig,
) -> Result<Vec<ResultRow>> {
    let cells: Vec<(usize, Mechanism, f64)> = cfg
        .mechanisms
        .iter()
        .enumerate()
        .flat_map(|(mi, &m)| cfg.epsilons.iter().map(move |&e| (mi, m, e)))
        .collect();
    cells
        .par_iter()
        .map(|&(mi, m, eps)| percentile_cell(inst, cfg, mi, m, eps))
        .collect()
}

fn percentile_cell(
    inst: &PercentileInstance,
    cfg: &PercentileConfig,
    mech_index: usize,
    mechanism: Mechanism,
    epsilon: f64,
) -> Result<ResultRow> {
    let start = Instant::now();
    let budget = PrivacyBudget::new(epsilon, cfg.delta)?;
    let selector = Selector::new(mechanism, budget)?;
    let smooth = selector
        .beta()
        .map(|b| percentile_smooth(inst, b, cfg.rule));
    let ctx = ScoreContext {
        delta_u: 1.0,
        monotonic: false,
        smooth,
    };
    let utilities = inst.utilities();
    let values = inst.outcome_grid();
    let aee = match cfg.mode {
        Mode::Oracle => {
            let pmf = selector_pmf(&selector, &utilities, &ctx)?;
            absolute_expected_value_error(&pmf, values, inst.target())
        }
        Mode::MonteCarlo => {
            if cfg.trials == 0 {
                return Err(Error::Precondition("trials must be positive".into()));
            }
            let prepared = selector.prepare(&utilities, &ctx)?;
            let seed = derive_seed(
                cfg.seed,
                (mech_index as u64) << 32 | epsilon.to_bits() >> 32,
            );
            let mut rng = stream(seed, epsilon.to_bits());
            let mut total = 0.0;
            for _ in 0..cfg.trials {
                total += values[rand::distr::Distribution::sample(&prepared, &mut rng)];
            }
            (inst.target() - total / cfg.trials as f64).abs()
        }
    };
    let r = values.len();
    let bound = match smooth {
        Some(s) => snm_error_bound(s.value, epsilon, r),
        None => rnm_error_bound(1.0, epsilon, r),
    };
    Ok(ResultRow {
        application: "percentile".into(),
        mechanism: mechanism.label().into(),
        epsilon,
        delta: cfg.delta,
        metric: "aee".into(),
        value: aee,
        bound: Some(bound),
        seed: cfg.seed,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Uniformly random data in `[0, lambda]` rounded to integers.
pub fn random_percentile_data<R: Rng + ?Sized>(n: usize, lambda: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| (rng.random::<f64>() * lambda).round())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::{
        all_databases, local_sensitivity_profile, smooth_sensitivity_bruteforce,
        verify_smooth_bound, ENUMERATION_LIMIT,
    };
    use approx::assert_abs_diff_eq;

    #[test]
    fn index_examples() {
        assert_eq!(percentile_index(3, 50), 1);
        assert_eq!(percentile_index(4, 50), 2);
        assert_eq!(percentile_index(10, 99), 9);
        assert_eq!(percentile_index(1, 99), 0);
    }

    #[test]
    fn radius_examples() {
        let i = PercentileInstance::new(vec![1.0, 2.0, 3.0], 10.0, 50).unwrap();
        assert_eq!(repetition_radius(&i), 0);
        assert_eq!(i.utilities().iter().sum::<f64>(), 1.0);
        let i = PercentileInstance::new(vec![5.0; 3], 10.0, 50).unwrap();
        assert_eq!(repetition_radius(&i), 1);
    }

    #[test]
    fn published_forms() {
        assert_eq!(percentile_local_sensitivity_at_t(0, 0), 0.0);
        assert_eq!(percentile_local_sensitivity_at_t(0, 1), 1.0);
        assert_eq!(percentile_local_sensitivity_at_t(1, 2), 0.0);
        assert_eq!(percentile_local_sensitivity_at_t(1, 3), 1.0);
        assert_abs_diff_eq!(
            percentile_smooth_sensitivity(0, 0.1).value,
            0.904837418,
            epsilon = 1e-9
        );
        let s = percentile_smooth_sensitivity(10, 0.5);
        assert_abs_diff_eq!(s.value, (-10.5f64).exp());
        assert_eq!(s.witness_t, 21);
    }

    #[test]
    fn five_five_five_brute_force() {
        let u = PercentileModel::brute_force((1..=9).map(f64::from).collect(), 50);
        let db = Database::from_records(9, &[4, 4, 4]);
        let p = local_sensitivity_profile(&u, &db, 3, ENUMERATION_LIMIT).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 1.0]);
        let s = smooth_sensitivity_bruteforce(&u, &db, 0.2, ENUMERATION_LIMIT).unwrap();
        assert_abs_diff_eq!(s.value, (-0.4f64).exp(), epsilon = 1e-12);
        let exact = PercentileModel::new((1..=9).map(f64::from).collect(), 50, SmoothRule::Exact);
        assert_eq!(exact.smooth_sensitivity(&db, 0.2).unwrap(), s);
    }

    #[test]
    fn exact_rule_matches_brute_force_on_small_universes() {
        for p in [10, 25, 50, 75, 90] {
            let vals: Vec<f64> = (0..3).map(f64::from).collect();
            let bf = PercentileModel::brute_force(vals.clone(), p);
            let ex = PercentileModel::new(vals, p, SmoothRule::Exact);
            for db in all_databases(3, 5) {
                for beta in [0.1, 0.7] {
                    let want =
                        smooth_sensitivity_bruteforce(&bf, &db, beta, ENUMERATION_LIMIT).unwrap();
                    let got = ex.smooth_sensitivity(&db, beta).unwrap();
                    assert_eq!(got.witness_t, want.witness_t, "p={p} db={:?}", db.counts());
                    assert_abs_diff_eq!(got.value, want.value, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn exact_rule_is_a_smooth_bound() {
        let ex = PercentileModel::new((0..4).map(f64::from).collect(), 50, SmoothRule::Exact);
        let beta = 0.3;
        let r = verify_smooth_bound(
            &ex,
            |d| ex.smooth_sensitivity(d, beta).unwrap().value,
            beta,
            5,
        );
        assert!(
            r.is_clean(),
            "{:?}",
            &r.violations[..r.violations.len().min(3)]
        );
    }

    #[test]
    fn published_rule_is_not_always_an_upper_bound() {
        // [1, 2, 3]: removing the median changes it, so LS = 1 but j = 0
        let pub_model =
            PercentileModel::new((0..3).map(f64::from).collect(), 50, SmoothRule::Published);
        let bf = PercentileModel::brute_force((0..3).map(f64::from).collect(), 50);
        let db = Database::from_records(3, &[0, 1, 2]);
        let published = pub_model.smooth_sensitivity(&db, 0.1).unwrap();
        let exact = smooth_sensitivity_bruteforce(&bf, &db, 0.1, ENUMERATION_LIMIT).unwrap();
        assert_abs_diff_eq!(exact.value, 1.0);
        assert!(published.value < exact.value);
    }

    #[test]
    fn bundled_instance_shape() {
        let inst = bundled_instance();
        assert_eq!(inst.data().len(), 101);
        assert_eq!(inst.k(), 50);
        assert_eq!(inst.target(), 50.0);
        assert_eq!(repetition_radius(&inst), 5);
        assert_eq!(inst.data()[44], 44.0);
        assert_eq!(inst.data()[56], 56.0);
        assert_eq!(inst.data()[100], 100.0);
        assert!(inst.outcome_grid().contains(&50.0));
    }

    #[test]
    fn exact_edit_distance_on_bundled_instance() {
        let inst = bundled_instance();
        let (b, e, a) = inst.split_counts();
        assert_eq!((b, e, a), (45, 11, 45));
        // one fewer than the published 2j + 1 = 11 threshold implies
        assert_eq!(percentile_edit_distance(b, e, a, 50, Room::BOTH), 11);
        let s = percentile_exact_smooth_sensitivity(&inst, 0.1);
        assert_eq!(s.witness_t, 10);
    }

    #[test]
    fn em_on_uniform_utilities_gives_grid_mean() {
        use crate::analysis::em_pmf;
        let inst = PercentileInstance::new(vec![3.0], 10.0, 50).unwrap();
        let pmf = em_pmf(&vec![0.0; inst.outcome_grid().len()], 1.0, 1.0).unwrap();
        let mean: f64 = inst.outcome_grid().iter().sum::<f64>() / inst.outcome_grid().len() as f64;
        assert_abs_diff_eq!(
            absolute_expected_value_error(&pmf, inst.outcome_grid(), 3.0),
            (3.0 - mean).abs(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn oracle_experiment_is_deterministic() {
        let inst = bundled_instance();
        let cfg = PercentileConfig {
            mechanisms: vec![Mechanism::EM, Mechanism::SNM_LAP, Mechanism::PF],
            epsilons: vec![1.0, 10.0],
            delta: 0.01,
            mode: Mode::Oracle,
            trials: 0,
            seed: 1,
            rule: SmoothRule::Published,
        };
        let a = run_percentile_experiment(&inst, &cfg).unwrap();
        let b = run_percentile_experiment(&inst, &cfg).unwrap();
        let va: Vec<f64> = a.iter().map(|r| r.value).collect();
        let vb: Vec<f64> = b.iter().map(|r| r.value).collect();
        assert_eq!(va, vb);
        // larger eps, smaller error
        assert!(a[1].value <= a[0].value + 1e-4);
    }

    #[test]
    fn csv_loader_skips_header() {
        let dir = std::env::temp_dir().join(format!("pct-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        std::fs::write(&path, "value\n3\n1.5\n2\n").unwrap();
        assert_eq!(load_percentile_csv(&path).unwrap(), vec![3.0, 1.5, 2.0]);
        std::fs::write(&path, "1\nx\n").unwrap();
        assert!(load_percentile_csv(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
