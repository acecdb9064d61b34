// SPDX-License-Identifier: Apache-2.0

//! Private decision trees: greedy ID3 with a private split selector, and
//! random forests whose leaves are labelled by a private selection.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::em_pmf;
use crate::error::{Error, Result};
use crate::experiment::ResultRow;
use crate::mechanisms::{argmax, Mechanism, ScoreContext, Selector, SnmNoise};
use crate::noise::{CalibratedNoise, NoiseKind, PrivacyBudget};
use crate::percentile::SmoothRule;
use crate::rng::{derive_seed, stream, DpRng};
use crate::sensitivity::{Database, SmoothSensitivity, UtilityModel};

pub const DEFAULT_BINS: usize = 8;

fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Discrete {
        values: Vec<String>,
    },
    Continuous {
        min: f64,
        max: f64,
        #[serde(default = "default_bins")]
        bins: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn discrete(name: &str, values: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Discrete {
                values: values.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Continuous {
                min,
                max,
                bins: DEFAULT_BINS,
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, AttributeKind::Continuous { .. })
    }

    /// Number of values, counting bins for continuous attributes.
    pub fn domain_size(&self) -> usize {
        match &self.kind {
            AttributeKind::Discrete { values } => values.len(),
            AttributeKind::Continuous { bins, .. } => *bins,
        }
    }

    /// Value index, or equal-width bin for continuous attributes.
    pub fn cell(&self, v: f64) -> usize {
        match &self.kind {
            AttributeKind::Discrete { .. } => v as usize,
            AttributeKind::Continuous { min, max, bins } => {
                let width = (max - min) / *bins as f64;
                let b = ((v - min) / width).floor();
                if b < 0.0 {
                    0
                } else {
                    (b as usize).min(bins - 1)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub labels: Vec<String>,
}

/// Attribute and class declarations; domains never come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    pub class: ClassSpec,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.class.labels.is_empty() {
            return Err(Error::Dataset("class has no labels".into()));
        }
        for a in &self.attributes {
            match &a.kind {
                AttributeKind::Discrete { values } if values.is_empty() => {
                    return Err(Error::Dataset(format!(
                        "attribute `{}` has no values",
                        a.name
                    )))
                }
                AttributeKind::Continuous { min, max, bins } if !(min < max) || *bins == 0 => {
                    return Err(Error::Dataset(format!(
                        "attribute `{}` needs min < max and at least one bin",
                        a.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
        let s: Schema = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn label_count(&self) -> usize {
        self.class.labels.len()
    }
}

/// Rows of attribute values (discrete values stored as their index) with a
/// class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub schema: Schema,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
}

impl TabularDataset {
    pub fn new(schema: Schema, rows: Vec<Vec<f64>>, labels: Vec<u32>) -> Result<Self> {
        schema.validate()?;
        if rows.len() != labels.len() {
            return Err(Error::Dataset("row and label counts differ".into()));
        }
        for (i, (row, &l)) in rows.iter().zip(&labels).enumerate() {
            if row.len() != schema.attributes.len() {
                return Err(Error::Dataset(format!("row {i} has {} fields", row.len())));
            }
            if l as usize >= schema.label_count() {
                return Err(Error::Dataset(format!("row {i} has an undeclared label")));
            }
            for (a, &v) in schema.attributes.iter().zip(row) {
                let ok = match &a.kind {
                    AttributeKind::Discrete { values } => {
                        v >= 0.0 && v.fract() == 0.0 && (v as usize) < values.len()
                    }
                    AttributeKind::Continuous { min, max, .. } => (*min..=*max).contains(&v),
                };
                if !ok {
                    return Err(Error::Dataset(format!(
                        "row {i}: value {v} outside the domain of `{}`",
                        a.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    /// Reads a CSV with a header; columns are matched to the schema by name.
    pub fn load_csv(path: &Path, schema: Schema) -> Result<Self> {
        let err = |e: csv::Error| Error::Dataset(format!("{}: {e}", path.display()));
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(err)?;
        let headers = reader.headers().map_err(err)?.clone();
        let column = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::Dataset(format!("{}: missing column `{name}`", path.display()))
            })
        };
        let attr_cols: Vec<usize> = schema
            .attributes
            .iter()
            .map(|a| column(&a.name))
            .collect::<Result<_>>()?;
        let class_col = column(&schema.class.name)?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(err)?;
            let at = |c: usize| rec.get(c).unwrap_or("");
            let mut row = Vec::with_capacity(attr_cols.len());
            for (a, &c) in schema.attributes.iter().zip(&attr_cols) {
                let field = at(c);
                let v = match &a.kind {
                    AttributeKind::Discrete { values } => {
                        values.iter().position(|x| x == field).map(|i| i as f64)
                    }
                    AttributeKind::Continuous { .. } => field.parse::<f64>().ok(),
                };
                row.push(v.ok_or_else(|| {
                    Error::Dataset(format!(
                        "{}: row {}: bad value `{field}` for `{}`",
                        path.display(),
                        line + 2,
                        a.name
                    ))
                })?);
            }
            let field = at(class_col);
            let label = schema
                .class
                .labels
                .iter()
                .position(|x| x == field)
                .ok_or_else(|| {
                    Error::Dataset(format!(
                        "{}: row {}: unknown label `{field}`",
                        path.display(),
                        line + 2
                    ))
                })?;
            rows.push(row);
            labels.push(label as u32);
        }
        Self::new(schema, rows, labels)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attribute_count(&self) -> usize {
        self.schema.attributes.len()
    }

    pub fn label_count(&self) -> usize {
        self.schema.label_count()
    }

    pub fn cell(&self, row: usize, attribute: usize) -> usize {
        self.schema.attributes[attribute].cell(self.rows[row][attribute])
    }

    /// Copy restricted to `rows`.
    pub fn subset(&self, rows: &[usize]) -> TabularDataset {
        TabularDataset {
            schema: self.schema.clone(),
            rows: rows.iter().map(|&r| self.rows[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    pub fn class_counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.label_count()];
        for &r in rows {
            c[self.labels[r] as usize] += 1;
        }
        c
    }

    /// `counts[value][class]` for one attribute over `rows`.
    pub fn contingency(&self, rows: &[usize], attribute: usize) -> Vec<Vec<u32>> {
        let size = self.schema.attributes[attribute].domain_size();
        let mut t = vec![vec![0u32; self.label_count()]; size];
        for &r in rows {
            t[self.cell(r, attribute)][self.labels[r] as usize] += 1;
        }
        t
    }
}

/// `sum_v max_c count(v, c)`.
pub fn max_op(data: &TabularDataset, rows: &[usize], attribute: usize) -> u32 {
    max_op_table(&data.contingency(rows, attribute))
}

fn max_op_table(table: &[Vec<u32>]) -> u32 {
    table
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum()
}

/// Indicator of the MaxOp argmax (lowest index on ties) over `attributes`.
pub fn utility_max_op(data: &TabularDataset, rows: &[usize], attributes: &[usize]) -> Vec<f64> {
    let ops: Vec<f64> = attributes
        .iter()
        .map(|&a| f64::from(max_op(data, rows, a)))
        .collect();
    indicator(&ops)
}

fn indicator(values: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; values.len()];
    if !values.is_empty() {
        u[argmax(values)] = 1.0;
    }
    u
}

/// Top MaxOp minus the runner-up over `attributes`; 0 with fewer than two.
pub fn maxop_gap(data: &TabularDataset, rows: &[usize], attributes: &[usize]) -> u32 {
    let ops: Vec<u32> = attributes.iter().map(|&a| max_op(data, rows, a)).collect();
    top_gap(&ops)
}

fn top_gap(values: &[u32]) -> u32 {
    if values.len() < 2 {
        log::warn!("gap needs two candidates; using 0");
        return 0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted[0] - sorted[1]
}

/// `e^{-k beta}`.
pub fn tree_smooth_sensitivity(k: u32, beta: f64) -> SmoothSensitivity {
    SmoothSensitivity::step(k as usize, beta)
}

/// `count + Laplace(1/eps)`.
pub fn noisy_count<R: Rng + ?Sized>(count: u32, epsilon: f64, rng: &mut R) -> f64 {
    let z = CalibratedNoise::standard(NoiseKind::Laplace).sample(rng);
    f64::from(count) + z / epsilon
}

/// Published leaf smooth sensitivity `e^{-j beta}`, `j` the gap between
/// the two largest counts (0 with one label).
pub fn leaf_smooth_sensitivity(counts: &[u32], beta: f64) -> SmoothSensitivity {
    tree_smooth_sensitivity(top_gap_quiet(counts), beta)
}

fn top_gap_quiet(counts: &[u32]) -> u32 {
    if counts.len() < 2 {
        return 0;
    }
    top_gap(counts)
}

/// Smooth sensitivity of the majority indicator with lowest-index ties,
/// equal to brute force: label `b` overtakes the leader `a` after
/// `gap_b` edits when `b < a` and `gap_b + 1` otherwise, and the local
/// sensitivity switches on one edit before that.
pub fn leaf_exact_smooth_sensitivity(counts: &[u32], beta: f64) -> SmoothSensitivity {
    if counts.len() < 2 {
        return SmoothSensitivity::step(0, beta);
    }
    let a = argmax(&counts.iter().map(|&c| f64::from(c)).collect::<Vec<_>>());
    let t = counts
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != a)
        .map(|(b, &c)| {
            let gap = (counts[a] - c) as usize;
            if b < a {
                gap.saturating_sub(1)
            } else {
                gap
            }
        })
        .min()
        .expect("two labels");
    SmoothSensitivity::step(t, beta)
}

pub fn leaf_smooth(counts: &[u32], beta: f64, rule: SmoothRule) -> SmoothSensitivity {
    match rule {
        SmoothRule::Published => leaf_smooth_sensitivity(counts, beta),
        SmoothRule::Exact => leaf_exact_smooth_sensitivity(counts, beta),
    }
}

/// Leaf labelling utility: records are labels, the outcome whose count is
/// the largest (lowest index on ties) scores 1.
#[derive(Debug, Clone)]
pub struct LeafModel {
    pub labels: usize,
    /// `None` leaves the smooth sensitivity to brute force.
    pub rule: Option<SmoothRule>,
}

impl UtilityModel for LeafModel {
    fn universe_size(&self) -> usize {
        self.labels
    }

    fn outcome_count(&self) -> usize {
        self.labels
    }

    fn scores(&self, db: &Database) -> Vec<f64> {
        indicator(
            &db.counts()
                .iter()
                .map(|&c| f64::from(c))
                .collect::<Vec<_>>(),
        )
    }

    fn global_sensitivity(&self) -> f64 {
        1.0
    }

    fn smooth_sensitivity(&self, db: &Database, beta: f64) -> Option<SmoothSensitivity> {
        self.rule.map(|r| leaf_smooth(db.counts(), beta, r))
    }
}

/// MaxOp split utility over a toy record universe: each record is a tuple
/// of discrete attribute values plus a label, enumerated in mixed radix with
/// the label fastest.
#[derive(Debug, Clone)]
pub struct MaxOpModel {
    pub domains: Vec<usize>,
    pub labels: usize,
    /// Use `e^{-k beta}` instead of brute force.
    pub published: bool,
}

impl MaxOpModel {
    /// `(attribute values, label)` of universe element `i`.
    pub fn decode(&self, mut i: usize) -> (Vec<usize>, usize) {
        let label = i % self.labels;
        i /= self.labels;
        let mut vals = vec![0; self.domains.len()];
        for (a, &d) in self.domains.iter().enumerate().rev() {
            vals[a] = i % d;
            i /= d;
        }
        (vals, label)
    }

    fn ops(&self, db: &Database) -> Vec<u32> {
        let mut tables: Vec<Vec<Vec<u32>>> = self
            .domains
            .iter()
            .map(|&d| vec![vec![0; self.labels]; d])
            .collect();
        for (i, &c) in db.counts().iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (vals, label) = self.decode(i);
            for (a, &v) in vals.iter().enumerate() {
                tables[a][v][label] += c;
            }
        }
        tables.iter().map(|t| max_op_table(t)).collect()
    }
}

impl UtilityModel for MaxOpModel {
    fn universe_size(&self) -> usize {
        self.domains.iter().product::<usize>() * self.labels
    }

    fn outcome_count(&self) -> usize {
        self.domains.len()
    }

    fn scores(&self, db: &Database) -> Vec<f64> {
        indicator(
            &self
                .ops(db)
                .iter()
                .map(|&c| f64::from(c))
                .collect::<Vec<_>>(),
        )
    }

    fn global_sensitivity(&self) -> f64 {
        1.0
    }

    fn smooth_sensitivity(&self, db: &Database, beta: f64) -> Option<SmoothSensitivity> {
        self.published
            .then(|| tree_smooth_sensitivity(top_gap_quiet(&self.ops(db)), beta))
    }
}

/// A released tree. Leaves keep only their label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: u32,
    },
    /// One child per value (per bin for continuous attributes).
    Branch {
        attribute: usize,
        children: Vec<TreeNode>,
    },
    /// `value < threshold` goes to `below`.
    Threshold {
        attribute: usize,
        threshold: f64,
        below: Box<TreeNode>,
        above: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, schema: &Schema, row: &[f64]) -> u32 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Branch {
                    attribute,
                    children,
                } => {
                    let a = &schema.attributes[*attribute];
                    node = &children[a.cell(row[*attribute])];
                }
                TreeNode::Threshold {
                    attribute,
                    threshold,
                    below,
                    above,
                } => {
                    node = if row[*attribute] < *threshold {
                        below
                    } else {
                        above
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Branch { children, .. } => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
            TreeNode::Threshold { below, above, .. } => 1 + below.depth().max(above.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Branch { children, .. } => children.iter().map(TreeNode::leaf_count).sum(),
            TreeNode::Threshold { below, above, .. } => below.leaf_count() + above.leaf_count(),
        }
    }

    /// Same tree with every label set to 0.
    pub fn shape(&self) -> TreeNode {
        match self {
            TreeNode::Leaf { .. } => TreeNode::Leaf { label: 0 },
            TreeNode::Branch {
                attribute,
                children,
            } => TreeNode::Branch {
                attribute: *attribute,
                children: children.iter().map(TreeNode::shape).collect(),
            },
            TreeNode::Threshold {
                attribute,
                threshold,
                below,
                above,
            } => TreeNode::Threshold {
                attribute: *attribute,
                threshold: *threshold,
                below: Box::new(below.shape()),
                above: Box::new(above.shape()),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialises")
    }
}

/// Split selection for private ID3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "split", rename_all = "snake_case")]
pub enum SplitMechanism {
    EmInfoGain,
    PfInfoGain,
    SnmMaxOp { noise: SnmNoise },
}

impl SplitMechanism {
    pub fn label(&self) -> &'static str {
        match self {
            SplitMechanism::EmInfoGain => "EM-InfoGain",
            SplitMechanism::PfInfoGain => "PF-InfoGain",
            SplitMechanism::SnmMaxOp { noise } => match noise {
                SnmNoise::Laplace => "SNM-MaxOp-Lap",
                SnmNoise::StudentT { .. } => "SNM-MaxOp-T",
                SnmNoise::LaplaceLogNormal { .. } => "SNM-MaxOp-LLN",
            },
        }
    }

    /// Accepts the split names or the mechanism names they build on
    /// (`EM`, `PF`, `SNM-Lap`, ...).
    pub fn parse_with(name: &str, dof: u32, sigma: f64) -> Result<Self> {
        let upper = name.trim().to_ascii_uppercase();
        let base = upper
            .strip_suffix("-INFOGAIN")
            .or_else(|| upper.strip_prefix("SNM-MAXOP-").map(|_| upper.as_str()))
            .unwrap_or(&upper);
        let base = base.replace("SNM-MAXOP-", "SNM-");
        match Mechanism::parse_with(&base, dof, sigma)? {
            Mechanism::Exponential => Ok(SplitMechanism::EmInfoGain),
            Mechanism::PermuteAndFlip => Ok(SplitMechanism::PfInfoGain),
            Mechanism::SmoothNoisyMax { noise } => Ok(SplitMechanism::SnmMaxOp { noise }),
            _ => Err(Error::UnsupportedMechanism(format!(
                "{name} as a split selector"
            ))),
        }
    }
}

/// Count-weighted negative conditional entropy of the class given the
/// attribute, in bits.
pub fn info_gain_score(table: &[Vec<u32>]) -> f64 {
    let mut s = 0.0;
    for row in table {
        let total: u32 = row.iter().sum();
        if total == 0 {
            continue;
        }
        for &c in row {
            if c > 0 {
                let c = f64::from(c);
                s += c * (c / f64::from(total)).log2();
            }
        }
    }
    s
}

/// Sensitivity bound of [`info_gain_score`] for a node of (noisy) size `n`.
pub fn info_gain_sensitivity(n: f64) -> f64 {
    (n.max(0.0) + 1.0).log2() + 1.0 / std::f64::consts::LN_2
}

/// Budget use of a private ID3 build, in units of `eps' = eps / (2(d+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BudgetLedger {
    pub units_available: u32,
    /// Largest spend along any root-to-leaf path (paths compose in
    /// parallel across siblings).
    pub max_path_units: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Id3Model {
    pub tree: TreeNode,
    pub ledger: BudgetLedger,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Id3Config {
    pub depth: usize,
    pub budget: PrivacyBudget,
    pub split: SplitMechanism,
}

/// Stopping ratio threshold `N_T / (t |C|) < sqrt(2)/2`.
const STOP_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn max_domain(data: &TabularDataset) -> usize {
    data.schema
        .attributes
        .iter()
        .map(Attribute::domain_size)
        .max()
        .unwrap_or(1)
}

/// Differentially private ID3. Every level spends `eps'` on a noisy node
/// size and `eps'` on either the split choice or the leaf's noisy class
/// counts, so each path spends at most `2(d+1) eps' = eps`.
pub fn build_diffp_id3(data: &TabularDataset, cfg: &Id3Config, seed: u64) -> Result<Id3Model> {
    let eps_level = cfg.budget.epsilon / (2.0 * (cfg.depth as f64 + 1.0));
    let level_budget = PrivacyBudget::new(eps_level, cfg.budget.delta)?;
    let selector = match cfg.split {
        SplitMechanism::EmInfoGain => Selector::new(Mechanism::EM, level_budget)?,
        SplitMechanism::PfInfoGain => Selector::new(Mechanism::PF, level_budget)?,
        SplitMechanism::SnmMaxOp { noise } => {
            Selector::new(Mechanism::SmoothNoisyMax { noise }, level_budget)?
        }
    };
    let mut b = Id3Builder {
        data,
        split: cfg.split,
        selector,
        eps_level,
        t: max_domain(data),
        rng: stream(seed, 0),
        max_units: 0,
    };
    let rows: Vec<usize> = (0..data.len()).collect();
    let attrs: Vec<usize> = (0..data.attribute_count()).collect();
    let tree = b.build(&rows, &attrs, cfg.depth, 0)?;
    Ok(Id3Model {
        tree,
        ledger: BudgetLedger {
            units_available: 2 * (cfg.depth as u32 + 1),
            max_path_units: b.max_units,
        },
    })
}

struct Id3Builder<'a> {
    data: &'a TabularDataset,
    split: SplitMechanism,
    selector: Selector,
    eps_level: f64,
    t: usize,
    rng: DpRng,
    max_units: u32,
}

impl Id3Builder<'_> {
    fn build(
        &mut self,
        rows: &[usize],
        attrs: &[usize],
        depth: usize,
        spent: u32,
    ) -> Result<TreeNode> {
        let labels = self.data.label_count();
        let n_noisy = noisy_count(rows.len() as u32, self.eps_level, &mut self.rng);
        let spent = spent + 1;
        let too_small = n_noisy / ((self.t * labels) as f64) < STOP_RATIO;
        if attrs.is_empty() || depth == 0 || too_small {
            let counts = self.data.class_counts(rows);
            let noisy: Vec<f64> = counts
                .iter()
                .map(|&c| noisy_count(c, self.eps_level, &mut self.rng))
                .collect();
            self.max_units = self.max_units.max(spent + 1);
            return Ok(TreeNode::Leaf {
                label: argmax(&noisy) as u32,
            });
        }
        let chosen = self.choose(rows, attrs, n_noisy)?;
        let attribute = attrs[chosen];
        let rest: Vec<usize> = attrs.iter().copied().filter(|&a| a != attribute).collect();
        let size = self.data.schema.attributes[attribute].domain_size();
        let mut parts = vec![Vec::new(); size];
        for &r in rows {
            parts[self.data.cell(r, attribute)].push(r);
        }
        let children = parts
            .iter()
            .map(|p| self.build(p, &rest, depth - 1, spent + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeNode::Branch {
            attribute,
            children,
        })
    }

    fn choose(&mut self, rows: &[usize], attrs: &[usize], n_noisy: f64) -> Result<usize> {
        let tables: Vec<Vec<Vec<u32>>> = attrs
            .iter()
            .map(|&a| self.data.contingency(rows, a))
            .collect();
        let (scores, ctx) = match self.split {
            SplitMechanism::EmInfoGain | SplitMechanism::PfInfoGain => (
                tables
                    .iter()
                    .map(|t| info_gain_score(t))
                    .collect::<Vec<_>>(),
                ScoreContext {
                    delta_u: info_gain_sensitivity(n_noisy),
                    monotonic: false,
                    smooth: None,
                },
            ),
            SplitMechanism::SnmMaxOp { .. } => {
                let ops: Vec<u32> = tables.iter().map(|t| max_op_table(t)).collect();
                let beta = self.selector.beta().expect("SNM selector");
                let gap = if ops.len() < 2 { 0 } else { top_gap(&ops) };
                (
                    indicator(&ops.iter().map(|&o| f64::from(o)).collect::<Vec<_>>()),
                    ScoreContext {
                        delta_u: 1.0,
                        monotonic: false,
                        smooth: Some(tree_smooth_sensitivity(gap, beta)),
                    },
                )
            }
        };
        Ok(self.selector.select(&scores, &ctx, &mut self.rng)?.chosen)
    }
}

/// Split criterion for the noiseless greedy tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MaxOp,
    InfoGain,
}

/// Non-private counterpart of [`build_diffp_id3`]: exact sizes, exact
/// argmax splits, exact majority leaves (lowest index on ties).
pub fn build_greedy_tree(data: &TabularDataset, depth: usize, criterion: Criterion) -> TreeNode {
    fn go(
        data: &TabularDataset,
        rows: &[usize],
        attrs: &[usize],
        depth: usize,
        t: usize,
        criterion: Criterion,
    ) -> TreeNode {
        let labels = data.label_count();
        let too_small = (rows.len() as f64) / ((t * labels) as f64) < STOP_RATIO;
        if attrs.is_empty() || depth == 0 || too_small {
            let counts: Vec<f64> = data
                .class_counts(rows)
                .iter()
                .map(|&c| f64::from(c))
                .collect();
            return TreeNode::Leaf {
                label: argmax(&counts) as u32,
            };
        }
        let scores: Vec<f64> = attrs
            .iter()
            .map(|&a| {
                let t = data.contingency(rows, a);
                match criterion {
                    Criterion::MaxOp => f64::from(max_op_table(&t)),
                    Criterion::InfoGain => info_gain_score(&t),
                }
            })
            .collect();
        let attribute = attrs[argmax(&scores)];
        let rest: Vec<usize> = attrs.iter().copied().filter(|&a| a != attribute).collect();
        let mut parts = vec![Vec::new(); data.schema.attributes[attribute].domain_size()];
        for &r in rows {
            parts[data.cell(r, attribute)].push(r);
        }
        TreeNode::Branch {
            attribute,
            children: parts
                .iter()
                .map(|p| go(data, p, &rest, depth - 1, t, criterion))
                .collect(),
        }
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    let attrs: Vec<usize> = (0..data.attribute_count()).collect();
    go(data, &rows, &attrs, depth, max_domain(data), criterion)
}

/// Per-leaf labelling for the random forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LeafLabelling {
    /// A private selection with the whole budget on each tree's chunk.
    Private {
        mechanism: Mechanism,
        rule: SmoothRule,
    },
    /// Exact majority.
    Noiseless,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub depth: usize,
    pub budget: PrivacyBudget,
    pub labelling: LeafLabelling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    /// Training-row indices per tree; disjoint and covering.
    #[serde(skip)]
    pub chunks: Vec<Vec<usize>>,
}

impl Forest {
    /// Majority vote, lowest label on ties.
    pub fn predict(&self, schema: &Schema, row: &[f64]) -> u32 {
        let mut votes = vec![0.0; schema.label_count()];
        for t in &self.trees {
            votes[t.predict(schema, row) as usize] += 1.0;
        }
        argmax(&votes) as u32
    }

    pub fn accuracy(&self, data: &TabularDataset) -> f64 {
        accuracy(data, |row| self.predict(&data.schema, row))
    }

    /// JSON of the label-free tree shapes.
    pub fn structure_json(&self) -> String {
        let shapes: Vec<TreeNode> = self.trees.iter().map(TreeNode::shape).collect();
        serde_json::to_string(&shapes).expect("trees serialise")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.trees).expect("trees serialise")
    }
}

fn accuracy(data: &TabularDataset, predict: impl Fn(&[f64]) -> u32) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let hits = data
        .rows
        .iter()
        .zip(&data.labels)
        .filter(|(row, &l)| predict(row) == l)
        .count();
    hits as f64 / data.len() as f64
}

pub fn tree_accuracy(tree: &TreeNode, data: &TabularDataset) -> f64 {
    accuracy(data, |row| tree.predict(&data.schema, row))
}

/// Label-free tree with leaf slots, built from the schema alone.
enum Skeleton {
    Leaf(usize),
    Branch(usize, Vec<Skeleton>),
    Threshold(usize, f64, Box<Skeleton>, Box<Skeleton>),
}

struct SkeletonBuilder<'a> {
    schema: &'a Schema,
    leaves: usize,
}

impl SkeletonBuilder<'_> {
    fn build<R: Rng>(
        &mut self,
        free: &[usize],
        ranges: &mut [(f64, f64)],
        depth: usize,
        rng: &mut R,
    ) -> Skeleton {
        if depth == 0 || free.is_empty() {
            self.leaves += 1;
            return Skeleton::Leaf(self.leaves - 1);
        }
        let f = free[rng.random_range(0..free.len())];
        match &self.schema.attributes[f].kind {
            AttributeKind::Continuous { .. } => {
                let (lo, hi) = ranges[f];
                let split = lo + rng.random::<f64>() * (hi - lo);
                ranges[f] = (lo, split);
                let below = self.build(free, ranges, depth - 1, rng);
                ranges[f] = (split, hi);
                let above = self.build(free, ranges, depth - 1, rng);
                ranges[f] = (lo, hi);
                Skeleton::Threshold(f, split, Box::new(below), Box::new(above))
            }
            AttributeKind::Discrete { values } => {
                let rest: Vec<usize> = free.iter().copied().filter(|&a| a != f).collect();
                let children = (0..values.len())
                    .map(|_| self.build(&rest, ranges, depth - 1, rng))
                    .collect();
                Skeleton::Branch(f, children)
            }
        }
    }
}

impl Skeleton {
    fn leaf_of(&self, schema: &Schema, row: &[f64]) -> usize {
        match self {
            Skeleton::Leaf(i) => *i,
            Skeleton::Branch(a, children) => {
                children[schema.attributes[*a].cell(row[*a])].leaf_of(schema, row)
            }
            Skeleton::Threshold(a, t, below, above) => {
                if row[*a] < *t {
                    below.leaf_of(schema, row)
                } else {
                    above.leaf_of(schema, row)
                }
            }
        }
    }

    fn label(&self, labels: &[u32]) -> TreeNode {
        match self {
            Skeleton::Leaf(i) => TreeNode::Leaf { label: labels[*i] },
            Skeleton::Branch(a, children) => TreeNode::Branch {
                attribute: *a,
                children: children.iter().map(|c| c.label(labels)).collect(),
            },
            Skeleton::Threshold(a, t, below, above) => TreeNode::Threshold {
                attribute: *a,
                threshold: *t,
                below: Box::new(below.label(labels)),
                above: Box::new(above.label(labels)),
            },
        }
    }
}

/// Random forest on `c` disjoint chunks. Tree shapes come from the schema
/// and the seed only; data enters through the leaf labels, each chosen by
/// the configured labelling with the full budget of its tree's chunk.
/// Empty leaves get a uniform label from a separate stream, so they agree
/// across labellings.
pub fn build_random_forest(data: &TabularDataset, cfg: &ForestConfig, seed: u64) -> Result<Forest> {
    if cfg.trees == 0 {
        return Err(Error::Precondition("need at least one tree".into()));
    }
    if cfg.trees > data.len() {
        return Err(Error::Precondition(format!(
            "{} trees but only {} rows",
            cfg.trees,
            data.len()
        )));
    }
    let selector = match cfg.labelling {
        LeafLabelling::Private { mechanism, .. } => {
            if matches!(mechanism, Mechanism::ReportNoisyMax { .. }) {
                return Err(Error::UnsupportedMechanism(format!(
                    "{mechanism} as a leaf labeller"
                )));
            }
            Some(Selector::new(mechanism, cfg.budget)?)
        }
        LeafLabelling::Noiseless => None,
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream(seed, 0));
    let chunks: Vec<Vec<usize>> = (0..cfg.trees)
        .map(|i| {
            let lo = i * data.len() / cfg.trees;
            let hi = (i + 1) * data.len() / cfg.trees;
            order[lo..hi].to_vec()
        })
        .collect();
    let trees = chunks
        .par_iter()
        .enumerate()
        .map(|(i, chunk)| {
            random_tree(
                data,
                chunk,
                cfg,
                selector.as_ref(),
                derive_seed(seed, i as u64 + 1),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, chunks })
}

fn random_tree(
    data: &TabularDataset,
    chunk: &[usize],
    cfg: &ForestConfig,
    selector: Option<&Selector>,
    seed: u64,
) -> Result<TreeNode> {
    let schema = &data.schema;
    let mut ranges: Vec<(f64, f64)> = schema
        .attributes
        .iter()
        .map(|a| match a.kind {
            AttributeKind::Continuous { min, max, .. } => (min, max),
            AttributeKind::Discrete { .. } => (0.0, 0.0),
        })
        .collect();
    let mut builder = SkeletonBuilder { schema, leaves: 0 };
    let free: Vec<usize> = (0..schema.attributes.len()).collect();
    let skeleton = builder.build(&free, &mut ranges, cfg.depth, &mut stream(seed, 0));
    let labels_n = schema.label_count();
    let mut counts = vec![vec![0u32; labels_n]; builder.leaves];
    for &r in chunk {
        counts[skeleton.leaf_of(schema, &data.rows[r])][data.labels[r] as usize] += 1;
    }
    let mut empty_rng = stream(seed, 1);
    let mut label_rng = stream(seed, 2);
    let labels = counts
        .iter()
        .map(|c| {
            // drawn for every leaf so the empty-leaf stream does not depend on data
            let fallback = empty_rng.random_range(0..labels_n) as u32;
            if c.iter().all(|&x| x == 0) {
                return Ok(fallback);
            }
            let as_f: Vec<f64> = c.iter().map(|&x| f64::from(x)).collect();
            match (cfg.labelling, selector) {
                (LeafLabelling::Private { rule, .. }, Some(sel)) => {
                    let ctx = ScoreContext {
                        delta_u: 1.0,
                        monotonic: false,
                        smooth: sel.beta().map(|b| leaf_smooth(c, b, rule)),
                    };
                    Ok(sel.select(&indicator(&as_f), &ctx, &mut label_rng)?.chosen as u32)
                }
                _ => Ok(argmax(&as_f) as u32),
            }
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(skeleton.label(&labels))
}

/// The smooth-sensitivity exponential mechanism on the voting example and
/// its neighbour.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub epsilon: f64,
    pub counts_x: Vec<u32>,
    pub counts_y: Vec<u32>,
    pub smooth_x: f64,
    pub smooth_y: f64,
    pub pmf_x: Vec<f64>,
    pub pmf_y: Vec<f64>,
    /// Index of the candidate whose probability jumps.
    pub outcome: usize,
    pub prob_x: f64,
    pub prob_y: f64,
    /// `e^eps * prob_x`.
    pub envelope: f64,
    pub violated: bool,
}

/// Counts `[22, 8, 17, 4, 0]` against `[22, 8, 18, 4, 0]` at `eps = 0.5`,
/// with `S = e^{-j eps}` for the majority indicator, as in the original
/// counterexample.
pub fn reproduce_smooth_em_counterexample() -> Result<CounterexampleReport> {
    let epsilon = 0.5;
    let x = vec![22u32, 8, 17, 4, 0];
    let y = vec![22u32, 8, 18, 4, 0];
    let sx = leaf_smooth_sensitivity(&x, epsilon);
    let sy = leaf_smooth_sensitivity(&y, epsilon);
    let ux = indicator(&x.iter().map(|&c| f64::from(c)).collect::<Vec<_>>());
    let uy = indicator(&y.iter().map(|&c| f64::from(c)).collect::<Vec<_>>());
    let px = em_pmf(&ux, epsilon, sx.value)?.probabilities;
    let py = em_pmf(&uy, epsilon, sy.value)?.probabilities;
    let outcome = 2;
    let envelope = epsilon.exp() * px[outcome];
    Ok(CounterexampleReport {
        epsilon,
        smooth_x: sx.value,
        smooth_y: sy.value,
        prob_x: px[outcome],
        prob_y: py[outcome],
        violated: py[outcome] > envelope,
        envelope,
        counts_x: x,
        counts_y: y,
        pmf_x: px,
        pmf_y: py,
        outcome,
    })
}

/// Seeded class-agnostic shuffle into `k` folds of row indices.
pub fn k_folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Precondition(format!(
            "need 2 <= folds <= {n}, got {k}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 0));
    Ok((0..k)
        .map(|i| order[i * n / k..(i + 1) * n / k].to_vec())
        .collect())
}

/// Seeded split into (train, test) with `train_fraction` of the rows first.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 0));
    let cut = ((n as f64) * train_fraction).round() as usize;
    let test = order.split_off(cut.min(n));
    (order, test)
}

/// Synthetic classification data. Label 1 iff `a0 >= 1`, with each label
/// flipped with probability `flip`; `a1`, `a2` and `x` carry no signal.
pub fn synthetic_tabular<R: Rng + ?Sized>(n: usize, flip: f64, rng: &mut R) -> TabularDataset {
    let schema = Schema {
        attributes: vec![
            Attribute::discrete("a0", &["0", "1", "2"]),
            Attribute::discrete("a1", &["0", "1"]),
            Attribute::discrete("a2", &["0", "1"]),
            Attribute::continuous("x", 0.0, 1.0),
        ],
        class: ClassSpec {
            name: "label".into(),
            labels: vec!["neg".into(), "pos".into()],
        },
    };
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a0 = rng.random_range(0..3u32);
        let row = vec![
            f64::from(a0),
            f64::from(rng.random_range(0..2u32)),
            f64::from(rng.random_range(0..2u32)),
            rng.random::<f64>(),
        ];
        let mut label = u32::from(a0 >= 1);
        if rng.random::<f64>() < flip {
            label = 1 - label;
        }
        rows.push(row);
        labels.push(label);
    }
    TabularDataset::new(schema, rows, labels).expect("synthetic rows fit the schema")
}

/// Configuration of the ID3 cross-validation experiment.
#[derive(Debug, Clone, Serialize)]
pub struct TreeExperimentConfig {
    pub splits: Vec<SplitMechanism>,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub depth: usize,
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
}

/// Configuration of the forest train/test experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ForestExperimentConfig {
    pub mechanisms: Vec<Mechanism>,
    pub rule: SmoothRule,
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub trees: usize,
    pub depth: usize,
    pub runs: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn accuracy_rows(
    app: &str,
    mechanism: &str,
    eps: f64,
    delta: f64,
    seed: u64,
    accs: &[f64],
    ms: f64,
) -> Vec<ResultRow> {
    let (mean, std) = mean_std(accs);
    [("accuracy_mean", mean), ("accuracy_std", std)]
        .into_iter()
        .map(|(metric, value)| ResultRow {
            application: app.into(),
            mechanism: mechanism.into(),
            epsilon: eps,
            delta,
            metric: metric.into(),
            value,
            bound: None,
            seed,
            runtime_ms: ms,
        })
        .collect()
}

/// Repeated k-fold cross-validated accuracy of private ID3. Every split
/// mechanism sees the same folds and seeds.
pub fn run_tree_experiment(
    data: &TabularDataset,
    cfg: &TreeExperimentConfig,
) -> Result<Vec<ResultRow>> {
    if cfg.runs == 0 {
        return Err(Error::Precondition("runs must be positive".into()));
    }
    let folds: Vec<Vec<Vec<usize>>> = (0..cfg.runs)
        .map(|run| k_folds(data.len(), cfg.folds, derive_seed(cfg.seed, run as u64)))
        .collect::<Result<_>>()?;
    let cells: Vec<(SplitMechanism, f64)> = cfg
        .splits
        .iter()
        .flat_map(|&s| cfg.epsilons.iter().map(move |&e| (s, e)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(split, eps)| {
            let start = std::time::Instant::now();
            let id3 = Id3Config {
                depth: cfg.depth,
                budget: PrivacyBudget::new(eps, cfg.delta)?,
                split,
            };
            let mut accs = Vec::with_capacity(cfg.runs);
            for (run, parts) in folds.iter().enumerate() {
                let mut total = 0.0;
                for (f, test) in parts.iter().enumerate() {
                    let train: Vec<usize> = parts
                        .iter()
                        .enumerate()
                        .filter(|&(g, _)| g != f)
                        .flat_map(|(_, p)| p.iter().copied())
                        .collect();
                    let seed = derive_seed(cfg.seed, ((run as u64) << 20) | f as u64);
                    let model = build_diffp_id3(&data.subset(&train), &id3, seed)?;
                    total += tree_accuracy(&model.tree, &data.subset(test));
                }
                accs.push(total / parts.len() as f64);
            }
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(accuracy_rows(
                "tree",
                split.label(),
                eps,
                cfg.delta,
                cfg.seed,
                &accs,
                ms,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.concat())
}

/// Repeated train/test accuracy of the private random forest. Splits and
/// forest seeds are shared by all mechanisms, so tree shapes coincide.
pub fn run_forest_experiment(
    data: &TabularDataset,
    cfg: &ForestExperimentConfig,
) -> Result<Vec<ResultRow>> {
    if cfg.runs == 0 {
        return Err(Error::Precondition("runs must be positive".into()));
    }
    let splits: Vec<(TabularDataset, TabularDataset)> = (0..cfg.runs)
        .map(|run| {
            let (train, test) = train_test_split(
                data.len(),
                cfg.train_fraction,
                derive_seed(cfg.seed, run as u64),
            );
            (data.subset(&train), data.subset(&test))
        })
        .collect();
    let cells: Vec<(Mechanism, f64)> = cfg
        .mechanisms
        .iter()
        .flat_map(|&m| cfg.epsilons.iter().map(move |&e| (m, e)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(mechanism, eps)| {
            let start = std::time::Instant::now();
            let fc = ForestConfig {
                trees: cfg.trees,
                depth: cfg.depth,
                budget: PrivacyBudget::new(eps, cfg.delta)?,
                labelling: LeafLabelling::Private {
                    mechanism,
                    rule: cfg.rule,
                },
            };
            let accs = splits
                .iter()
                .enumerate()
                .map(|(run, (train, test))| {
                    let forest = build_random_forest(
                        train,
                        &fc,
                        derive_seed(cfg.seed, 1 << 32 | run as u64),
                    )?;
                    Ok(forest.accuracy(test))
                })
                .collect::<Result<Vec<f64>>>()?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(accuracy_rows(
                "forest",
                mechanism.label(),
                eps,
                cfg.delta,
                cfg.seed,
                &accs,
                ms,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sensitivity::{all_databases, smooth_sensitivity_bruteforce, ENUMERATION_LIMIT};
    use approx::assert_abs_diff_eq;

    fn toy() -> TabularDataset {
        // a0 separates the labels well, a1 weakly
        let schema = Schema {
            attributes: vec![
                Attribute::discrete("a0", &["0", "1"]),
                Attribute::discrete("a1", &["0", "1"]),
            ],
            class: ClassSpec {
                name: "c".into(),
                labels: vec!["a".into(), "b".into()],
            },
        };
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (a0, a1, l, n) in [
            (0, 0, 0, 9),
            (0, 1, 0, 7),
            (0, 1, 1, 1),
            (1, 0, 1, 8),
            (1, 1, 1, 4),
            (1, 0, 0, 2),
        ] {
            for _ in 0..n {
                rows.push(vec![f64::from(a0), f64::from(a1)]);
                labels.push(l);
            }
        }
        TabularDataset::new(schema, rows, labels).unwrap()
    }

    #[test]
    fn max_op_examples() {
        let d = toy();
        let all: Vec<usize> = (0..d.len()).collect();
        // a0: value 0 -> (16, 1), value 1 -> (2, 12)
        assert_eq!(max_op(&d, &all, 0), 28);
        // a1: value 0 -> (11, 8), value 1 -> (7, 5)
        assert_eq!(max_op(&d, &all, 1), 18);
        assert_eq!(maxop_gap(&d, &all, &[0, 1]), 10);
        assert_eq!(utility_max_op(&d, &all, &[0, 1]), vec![1.0, 0.0]);
        assert_eq!(max_op(&d, &[0], 0), 1);
        assert_eq!(max_op(&d, &[], 0), 0);
        assert_eq!(max_op_table(&[vec![3, 1], vec![0, 2]]), 5);
    }

    #[test]
    fn tree_smooth_examples() {
        assert_eq!(tree_smooth_sensitivity(0, 0.3).value, 1.0);
        assert_abs_diff_eq!(
            tree_smooth_sensitivity(5, 0.5).value,
            0.0820849986,
            epsilon = 1e-9
        );
        let s = leaf_smooth_sensitivity(&[22, 17, 8, 4, 0], 0.2);
        assert_eq!(s.witness_t, 5);
        assert_eq!(leaf_smooth_sensitivity(&[3, 3], 0.2).value, 1.0);
        assert_eq!(leaf_smooth_sensitivity(&[10], 0.2).value, 1.0);
    }

    #[test]
    fn noisy_count_moments() {
        let mut rng = seeded(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| noisy_count(40, 0.5, &mut rng))
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((mean - 40.0).abs() < 3.0 * (8.0f64 / 1e5).sqrt());
        assert!((var - 8.0).abs() < 0.8);
        assert!((noisy_count(7, 1e6, &mut rng) - 7.0).abs() < 1e-4);
    }

    #[test]
    fn exact_leaf_rule_matches_brute_force() {
        for labels in 2..=3 {
            let bf = LeafModel { labels, rule: None };
            let ex = LeafModel {
                labels,
                rule: Some(SmoothRule::Exact),
            };
            for db in all_databases(labels, 6) {
                let want = smooth_sensitivity_bruteforce(&bf, &db, 0.4, ENUMERATION_LIMIT).unwrap();
                let got = ex.smooth_sensitivity(&db, 0.4).unwrap();
                assert_eq!(got.witness_t, want.witness_t, "{:?}", db.counts());
            }
        }
    }

    #[test]
    fn published_leaf_rule_misses_later_leaders() {
        // label 0 leads label 1 by one: one edit ties, and the tie goes to 0
        let bf = LeafModel {
            labels: 2,
            rule: None,
        };
        let db = Database::from_counts(vec![1, 3]);
        let want = smooth_sensitivity_bruteforce(&bf, &db, 0.4, ENUMERATION_LIMIT).unwrap();
        assert_eq!(want.witness_t, 1);
        assert_eq!(leaf_smooth_sensitivity(&[1, 3], 0.4).witness_t, 2);
    }

    #[test]
    fn counterexample_numbers() {
        let r = reproduce_smooth_em_counterexample().unwrap();
        assert!((r.prob_x - 0.04).abs() < 0.005, "{}", r.prob_x);
        assert!((r.prob_y - 0.10).abs() < 0.005, "{}", r.prob_y);
        assert!(r.violated);
    }

    #[test]
    fn id3_depth_zero_is_a_leaf() {
        let d = toy();
        let cfg = Id3Config {
            depth: 0,
            budget: PrivacyBudget::new(1.0, 0.01).unwrap(),
            split: SplitMechanism::EmInfoGain,
        };
        let m = build_diffp_id3(&d, &cfg, 3).unwrap();
        assert!(matches!(m.tree, TreeNode::Leaf { .. }));
        assert_eq!(m.ledger.units_available, 2);
        assert_eq!(m.ledger.max_path_units, 2);
    }

    #[test]
    fn id3_noiseless_recovery() {
        let d = toy();
        let greedy = build_greedy_tree(&d, 2, Criterion::MaxOp);
        for noise in [
            SnmNoise::Laplace,
            SnmNoise::StudentT { dof: 3 },
            SnmNoise::LaplaceLogNormal { sigma: 1.0 },
        ] {
            let cfg = Id3Config {
                depth: 2,
                budget: PrivacyBudget::new(1e6, 0.01).unwrap(),
                split: SplitMechanism::SnmMaxOp { noise },
            };
            let m = build_diffp_id3(&d, &cfg, 5).unwrap();
            assert_eq!(m.tree.to_json(), greedy.to_json());
            assert!(m.ledger.max_path_units <= m.ledger.units_available);
        }
    }

    #[test]
    fn split_names_parse() {
        assert_eq!(
            SplitMechanism::parse_with("EM-InfoGain", 3, 1.0).unwrap(),
            SplitMechanism::EmInfoGain
        );
        assert_eq!(
            SplitMechanism::parse_with("pf", 3, 1.0).unwrap(),
            SplitMechanism::PfInfoGain
        );
        assert_eq!(
            SplitMechanism::parse_with("SNM-MaxOp-T", 5, 1.0).unwrap(),
            SplitMechanism::SnmMaxOp {
                noise: SnmNoise::StudentT { dof: 5 }
            }
        );
        assert!(SplitMechanism::parse_with("RNM-Exp", 3, 1.0).is_err());
    }

    #[test]
    fn forest_shape_ignores_labelling() {
        let d = synthetic_tabular(400, 0.05, &mut seeded(8));
        let mk = |labelling| ForestConfig {
            trees: 4,
            depth: 4,
            budget: PrivacyBudget::new(0.5, 0.01).unwrap(),
            labelling,
        };
        let base = build_random_forest(&d, &mk(LeafLabelling::Noiseless), 11).unwrap();
        for m in [Mechanism::EM, Mechanism::PF, Mechanism::SNM_LAP] {
            let f = build_random_forest(
                &d,
                &mk(LeafLabelling::Private {
                    mechanism: m,
                    rule: SmoothRule::Published,
                }),
                11,
            )
            .unwrap();
            assert_eq!(f.structure_json(), base.structure_json());
        }
        let mut seen: Vec<usize> = base.chunks.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..d.len()).collect::<Vec<_>>());
    }

    #[test]
    fn forest_rejects_too_many_trees() {
        let d = toy();
        let cfg = ForestConfig {
            trees: d.len() + 1,
            depth: 2,
            budget: PrivacyBudget::new(1.0, 0.01).unwrap(),
            labelling: LeafLabelling::Noiseless,
        };
        assert!(build_random_forest(&d, &cfg, 1).is_err());
    }

    #[test]
    fn binning() {
        let a = Attribute::continuous("x", 0.0, 1.0);
        assert_eq!(a.cell(0.0), 0);
        assert_eq!(a.cell(0.124), 0);
        assert_eq!(a.cell(0.125), 1);
        assert_eq!(a.cell(1.0), 7);
        assert_eq!(a.domain_size(), 8);
    }

    #[test]
    fn folds_partition_rows() {
        let f = k_folds(23, 5, 4).unwrap();
        let mut all = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(f, k_folds(23, 5, 4).unwrap());
        let (tr, te) = train_test_split(10, 0.8, 1);
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn schema_and_csv_roundtrip() {
        let dir = std::env::temp_dir().join(format!("trees-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let schema = toy().schema;
        let sp = dir.join("s.json");
        std::fs::write(&sp, serde_json::to_string(&schema).unwrap()).unwrap();
        let loaded = Schema::load(&sp).unwrap();
        assert_eq!(loaded, schema);
        let dp = dir.join("d.csv");
        std::fs::write(&dp, "a1,c,a0\n1,b,0\n0,a,1\n").unwrap();
        let d = TabularDataset::load_csv(&dp, loaded.clone()).unwrap();
        assert_eq!(d.rows, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(d.labels, vec![1, 0]);
        std::fs::write(&dp, "a1,c,a0\n1,z,0\n").unwrap();
        assert!(TabularDataset::load_csv(&dp, loaded).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn experiments_emit_mean_and_std() {
        let d = synthetic_tabular(300, 0.05, &mut seeded(4));
        let tree = run_tree_experiment(
            &d,
            &TreeExperimentConfig {
                splits: vec![SplitMechanism::EmInfoGain],
                epsilons: vec![1.0],
                delta: 0.01,
                depth: 2,
                folds: 3,
                runs: 2,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(tree.len(), 2);
        assert!((0.0..=1.0).contains(&tree[0].value));
        let forest = run_forest_experiment(
            &d,
            &ForestExperimentConfig {
                mechanisms: vec![Mechanism::SNM_LAP],
                rule: SmoothRule::Published,
                epsilons: vec![1e6],
                delta: 0.01,
                trees: 4,
                depth: 4,
                runs: 2,
                train_fraction: 0.8,
                seed: 2,
            },
        )
        .unwrap();
        assert_eq!(forest[0].metric, "accuracy_mean");
        assert!(forest[0].value > 0.85, "{}", forest[0].value);
    }
}
