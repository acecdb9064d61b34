// SPDX-License-Identifier: Apache-2.0

//! Utility models and their sensitivities.
//!
//! Brute force works on databases drawn from a finite record universe: a
//! database is a multiset, stored as a count per universe element, and two
//! databases are neighbours when their symmetric difference has one element
//! (one record added or removed). Applications with a closed form override
//! the analytic hooks on [`UtilityModel`].

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

/// Default cap on databases visited by brute-force enumeration.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// A multiset over a finite universe `0..counts.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Database {
    counts: Vec<u32>,
}

impl Database {
    pub fn empty(universe_size: usize) -> Self {
        Self {
            counts: vec![0; universe_size],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    /// Builds a database from record indices (repeats allowed).
    pub fn from_records(universe_size: usize, records: &[usize]) -> Self {
        let mut db = Self::empty(universe_size);
        for &r in records {
            db.counts[r] += 1;
        }
        db
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn universe_size(&self) -> usize {
        self.counts.len()
    }

    /// Number of records, `|x|`.
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// Records in universe order, each repeated by its multiplicity.
    pub fn records(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect()
    }

    /// `|x ⊕ y|`.
    pub fn distance(&self, other: &Database) -> usize {
        assert_eq!(self.universe_size(), other.universe_size());
        self.counts
            .iter()
            .zip(&other.counts)
            .map(|(&a, &b)| a.abs_diff(b) as usize)
            .sum()
    }

    pub fn with_added(&self, record: usize) -> Database {
        let mut d = self.clone();
        d.counts[record] += 1;
        d
    }

    pub fn with_removed(&self, record: usize) -> Option<Database> {
        if self.counts[record] == 0 {
            return None;
        }
        let mut d = self.clone();
        d.counts[record] -= 1;
        Some(d)
    }

    /// All databases at distance exactly one.
    pub fn neighbors(&self) -> impl Iterator<Item = Database> + '_ {
        (0..self.universe_size())
            .flat_map(move |r| std::iter::once(self.with_added(r)).chain(self.with_removed(r)))
    }
}

/// Every database over `universe_size` elements with at most `max_len` records.
pub fn all_databases(universe_size: usize, max_len: usize) -> Vec<Database> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Database>) {
        if pos == cur.len() {
            out.push(Database::from_counts(cur.clone()));
            return;
        }
        for c in 0..=left {
            cur[pos] = c as u32;
            rec(pos + 1, left - c, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0; universe_size];
    rec(0, max_len, &mut cur, &mut out);
    out
}

/// `max_t e^{-t beta} LS(x, t)` together with its first maximiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothSensitivity {
    pub value: f64,
    pub beta: f64,
    pub witness_t: usize,
}

impl SmoothSensitivity {
    /// The `e^{-t beta}` value of a 0/1 local sensitivity that switches on at
    /// distance `t`.
    pub fn step(t: usize, beta: f64) -> Self {
        Self {
            value: (-(t as f64) * beta).exp(),
            beta,
            witness_t: t,
        }
    }
}

/// A utility function `u(x, r)` over a finite outcome set.
pub trait UtilityModel {
    /// Number of distinct record values.
    fn universe_size(&self) -> usize;

    fn outcome_count(&self) -> usize;

    /// `u(x, r)` for every outcome `r`, in outcome order.
    fn scores(&self, db: &Database) -> Vec<f64>;

    /// `Δu`.
    fn global_sensitivity(&self) -> f64;

    /// Adding a record never decreases any score.
    fn is_monotonic(&self) -> bool {
        false
    }

    /// Closed-form `LS(x, t)`, when the application has one.
    fn local_sensitivity_at(&self, _db: &Database, _t: usize) -> Option<f64> {
        None
    }

    /// Closed-form smooth sensitivity, when the application has one.
    fn smooth_sensitivity(&self, _db: &Database, _beta: f64) -> Option<SmoothSensitivity> {
        None
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `LS(x) = max_r max_{y ~ x} |u(x, r) - u(y, r)|`.
pub fn local_sensitivity<U: UtilityModel + ?Sized>(u: &U, db: &Database) -> f64 {
    let sx = u.scores(db);
    db.neighbors()
        .map(|y| max_abs_diff(&sx, &u.scores(&y)))
        .fold(0.0, f64::max)
}

/// Memoises scores while walking a neighbourhood.
struct Explorer<'a, U: ?Sized> {
    u: &'a U,
    scores: HashMap<Database, Vec<f64>>,
}

impl<'a, U: UtilityModel + ?Sized> Explorer<'a, U> {
    fn new(u: &'a U) -> Self {
        Self {
            u,
            scores: HashMap::new(),
        }
    }

    fn scores(&mut self, db: &Database) -> Vec<f64> {
        if let Some(s) = self.scores.get(db) {
            return s.clone();
        }
        let s = self.u.scores(db);
        self.scores.insert(db.clone(), s.clone());
        s
    }

    fn local_sensitivity(&mut self, db: &Database) -> f64 {
        let sx = self.scores(db);
        let mut best = 0.0f64;
        for y in db.neighbors().collect::<Vec<_>>() {
            let sy = self.scores(&y);
            best = best.max(max_abs_diff(&sx, &sy));
        }
        best
    }
}

/// `[LS(x, 0), ..., LS(x, max_t)]` by breadth-first search over the t-ball.
///
/// Stops early (filling the tail) once the global sensitivity is reached.
pub fn local_sensitivity_profile<U: UtilityModel + ?Sized>(
    u: &U,
    db: &Database,
    max_t: usize,
    limit: usize,
) -> Result<Vec<f64>> {
    let cap = u.global_sensitivity();
    let mut ex = Explorer::new(u);
    let mut seen: HashSet<Database> = HashSet::new();
    seen.insert(db.clone());
    let mut frontier = vec![db.clone()];
    let mut running = ex.local_sensitivity(db);
    let mut profile = vec![running];
    for _ in 1..=max_t {
        if running >= cap {
            profile.push(running);
            continue;
        }
        let mut next = Vec::new();
        for y in &frontier {
            for z in y.neighbors() {
                if seen.insert(z.clone()) {
                    if seen.len() > limit {
                        return Err(Error::EnumerationBudget { limit });
                    }
                    next.push(z);
                }
            }
        }
        for z in &next {
            running = running.max(ex.local_sensitivity(z));
        }
        frontier = next;
        profile.push(running);
    }
    Ok(profile)
}

/// `LS(x, t) = max_{d(x,y) <= t} LS(y)`, by exhaustive enumeration.
pub fn local_sensitivity_at_distance_bruteforce<U: UtilityModel + ?Sized>(
    u: &U,
    db: &Database,
    t: usize,
    limit: usize,
) -> Result<f64> {
    Ok(*local_sensitivity_profile(u, db, t, limit)?
        .last()
        .expect("profile has t + 1 entries"))
}

/// Smooth sensitivity from a local-sensitivity profile; ties go to the
/// smallest `t`.
pub fn smooth_from_profile(profile: &[f64], beta: f64) -> SmoothSensitivity {
    let mut best = SmoothSensitivity {
        value: 0.0,
        beta,
        witness_t: 0,
    };
    for (t, &ls) in profile.iter().enumerate() {
        let v = (-(t as f64) * beta).exp() * ls;
        if v > best.value {
            best.value = v;
            best.witness_t = t;
        }
    }
    best
}

/// Brute-force `max_{t = 0..|x|} e^{-t beta} LS(x, t)`.
pub fn smooth_sensitivity_bruteforce<U: UtilityModel + ?Sized>(
    u: &U,
    db: &Database,
    beta: f64,
    limit: usize,
) -> Result<SmoothSensitivity> {
    if !(beta >= 0.0) {
        return Err(Error::Precondition(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let profile = local_sensitivity_profile(u, db, db.len(), limit)?;
    Ok(smooth_from_profile(&profile, beta))
}

/// Smooth sensitivity, preferring the utility's closed form.
pub fn smooth_sensitivity<U: UtilityModel + ?Sized>(
    u: &U,
    db: &Database,
    beta: f64,
) -> Result<SmoothSensitivity> {
    if !(beta >= 0.0) {
        return Err(Error::Precondition(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    match u.smooth_sensitivity(db, beta) {
        Some(s) => Ok(s),
        None => smooth_sensitivity_bruteforce(u, db, beta, ENUMERATION_LIMIT),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SmoothBoundViolation {
    /// `S(x) < LS(x)`.
    BelowLocal {
        db: Vec<u32>,
        bound: f64,
        local: f64,
    },
    /// `S(x) > e^beta S(y)` for neighbours `x`, `y`.
    NotSmooth {
        x: Vec<u32>,
        y: Vec<u32>,
        s_x: f64,
        s_y: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothBoundReport {
    pub databases_checked: usize,
    pub violations: Vec<SmoothBoundViolation>,
}

impl SmoothBoundReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `bound` is a beta-smooth upper bound on the local
/// sensitivity of `u` for every database with at most `max_len` records.
pub fn verify_smooth_bound<U, S>(u: &U, bound: S, beta: f64, max_len: usize) -> SmoothBoundReport
where
    U: UtilityModel + ?Sized,
    S: Fn(&Database) -> f64,
{
    let universe = u.universe_size();
    let dbs = all_databases(universe, max_len);
    let mut cache: HashMap<Database, f64> = HashMap::new();
    let mut s = |d: &Database| *cache.entry(d.clone()).or_insert_with(|| bound(d));
    let growth = beta.exp();
    let mut violations = Vec::new();
    for x in &dbs {
        let sx = s(x);
        let ls = local_sensitivity(u, x);
        if sx < ls - 1e-12 {
            violations.push(SmoothBoundViolation::BelowLocal {
                db: x.counts().to_vec(),
                bound: sx,
                local: ls,
            });
        }
        for y in x.neighbors() {
            if y.len() > max_len {
                continue;
            }
            let sy = s(&y);
            if sx > growth * sy * (1.0 + 1e-12) + 1e-300 {
                violations.push(SmoothBoundViolation::NotSmooth {
                    x: x.counts().to_vec(),
                    y: y.counts().to_vec(),
                    s_x: sx,
                    s_y: sy,
                });
            }
        }
    }
    SmoothBoundReport {
        databases_checked: dbs.len(),
        violations,
    }
}

/// `u(x, r) = count of r in x`; monotone with `Δu = 1`.
#[derive(Debug, Clone, Copy)]
pub struct CountingUtility {
    pub universe_size: usize,
}

impl UtilityModel for CountingUtility {
    fn universe_size(&self) -> usize {
        self.universe_size
    }

    fn outcome_count(&self) -> usize {
        self.universe_size
    }

    fn scores(&self, db: &Database) -> Vec<f64> {
        db.counts().iter().map(|&c| f64::from(c)).collect()
    }

    fn global_sensitivity(&self) -> f64 {
        1.0
    }

    fn is_monotonic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    struct Constant;

    impl UtilityModel for Constant {
        fn universe_size(&self) -> usize {
            2
        }
        fn outcome_count(&self) -> usize {
            3
        }
        fn scores(&self, _db: &Database) -> Vec<f64> {
            vec![1.0, 2.0, 3.0]
        }
        // loose on purpose so the walk never stops early
        fn global_sensitivity(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn neighbours_are_at_distance_one() {
        let db = Database::from_counts(vec![2, 0, 1]);
        let ns: Vec<_> = db.neighbors().collect();
        assert_eq!(ns.len(), 5);
        assert!(ns.iter().all(|y| db.distance(y) == 1));
    }

    #[test]
    fn enumeration_counts() {
        // multisets of size <= 3 over 3 elements: C(6, 3)
        assert_eq!(all_databases(3, 3).len(), 20);
        assert_eq!(all_databases(1, 4).len(), 5);
    }

    #[test]
    fn records_roundtrip() {
        let db = Database::from_records(4, &[3, 1, 3]);
        assert_eq!(db.counts(), &[0, 1, 0, 2]);
        assert_eq!(db.records(), vec![1, 3, 3]);
        assert_eq!(db.len(), 3);
    }

    #[test]
    fn constant_utility_has_zero_sensitivity() {
        let db = Database::from_counts(vec![1, 1]);
        assert_eq!(local_sensitivity(&Constant, &db), 0.0);
        let s = smooth_sensitivity(&Constant, &db, 0.3).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(verify_smooth_bound(&Constant, |_| 0.0, 0.3, 3).is_clean());
    }

    #[test]
    fn counting_utility_is_flat() {
        let u = CountingUtility { universe_size: 3 };
        let db = Database::from_counts(vec![0, 2, 1]);
        let p = local_sensitivity_profile(&u, &db, 3, ENUMERATION_LIMIT).unwrap();
        assert_eq!(p, vec![1.0; 4]);
        let s = smooth_sensitivity(&u, &db, 0.5).unwrap();
        assert_abs_diff_eq!(s.value, 1.0);
        assert_eq!(s.witness_t, 0);
        assert!(verify_smooth_bound(&u, |_| 1.0, 0.5, 4).is_clean());
    }

    #[test]
    fn smooth_from_profile_prefers_first_maximiser() {
        let s = smooth_from_profile(&[0.0, 0.0, 1.0, 1.0], 0.0);
        assert_eq!(s.witness_t, 2);
        let s = smooth_from_profile(&[0.0, 1.0, 1.0], 0.1);
        assert_abs_diff_eq!(s.value, (-0.1f64).exp());
        assert_eq!(s.witness_t, 1);
    }

    #[test]
    fn bound_below_local_is_reported() {
        let u = CountingUtility { universe_size: 2 };
        let r = verify_smooth_bound(&u, |_| 0.5, 0.1, 2);
        assert_eq!(r.violations.len(), r.databases_checked);
    }

    #[test]
    fn non_smooth_bound_is_reported() {
        let u = CountingUtility { universe_size: 2 };
        let r = verify_smooth_bound(&u, |d| if d.is_empty() { 1.0 } else { 5.0 }, 0.1, 2);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, SmoothBoundViolation::NotSmooth { .. })));
    }

    #[test]
    fn negative_beta_rejected() {
        let db = Database::empty(2);
        assert!(smooth_sensitivity(&Constant, &db, -1.0).is_err());
    }

    #[test]
    fn enumeration_budget_enforced() {
        let db = Database::from_counts(vec![3, 3]);
        let e = local_sensitivity_profile(&Constant, &db, 6, 5).unwrap_err();
        assert!(matches!(e, Error::EnumerationBudget { limit: 5 }));
    }
}
