//! Feature frames, term specifications and the design matrices built from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::spline;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureData {
    Continuous(Vec<f64>),
    /// Level codes in `0..levels`; level 0 is the reference.
    Factor { codes: Vec<u32>, levels: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub data: FeatureData,
}

/// Named regressors for one model, before basis expansion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureFrame {
    n: usize,
    features: Vec<Feature>,
}

impl FeatureFrame {
    pub fn new(n: usize) -> Self {
        Self { n, features: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn push_continuous(&mut self, name: impl Into<String>, values: Vec<f64>) -> &mut Self {
        assert_eq!(values.len(), self.n, "feature length");
        self.features.push(Feature { name: name.into(), data: FeatureData::Continuous(values) });
        self
    }

    pub fn push_factor(&mut self, name: impl Into<String>, codes: Vec<u32>, levels: u32) -> &mut Self {
        assert_eq!(codes.len(), self.n, "feature length");
        debug_assert!(codes.iter().all(|&c| c < levels));
        self.features.push(Feature { name: name.into(), data: FeatureData::Factor { codes, levels } });
        self
    }

    pub fn get(&self, name: &str) -> Option<&Feature> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Replace a factor's codes with a constant level (counterfactual frames).
    pub fn set_factor(&mut self, name: &str, code: u32) -> Result<()> {
        let f = self
            .features
            .iter_mut()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("no feature `{name}`")))?;
        match &mut f.data {
            FeatureData::Factor { codes, levels } if code < *levels => {
                codes.iter_mut().for_each(|c| *c = code);
                Ok(())
            }
            _ => Err(Error::InvalidInput(format!("cannot set `{name}` to level {code}"))),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let features = self
            .features
            .iter()
            .map(|f| Feature {
                name: f.name.clone(),
                data: match &f.data {
                    FeatureData::Continuous(v) => FeatureData::Continuous(rows.iter().map(|&i| v[i]).collect()),
                    FeatureData::Factor { codes, levels } => FeatureData::Factor {
                        codes: rows.iter().map(|&i| codes[i]).collect(),
                        levels: *levels,
                    },
                },
            })
            .collect();
        Self { n: rows.len(), features }
    }
}

/// Basis expansion applied to one continuous feature. Factors always enter
/// as treatment-coded indicators unless dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Linear,
    Polynomial { degree: u32 },
    /// Natural cubic spline; interior knots default to the training
    /// quartiles, boundary knots to the training range.
    Spline {
        #[serde(default)]
        knots: Option<Vec<f64>>,
    },
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interactions {
    None,
    /// Every pair of main-effect groups.
    Pairwise,
    /// Every factor paired with every continuous feature (factor-specific smooths).
    FactorBy,
    /// Explicit feature pairs.
    Pairs(Vec<(String, String)>),
    /// All products over subsets of groups; saturated for all-discrete frames.
    Full,
}

/// Model formula: intercept flag, per-feature transforms and interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermSpec {
    pub intercept: bool,
    /// Transform for continuous features without an override.
    pub continuous: Transform,
    pub overrides: BTreeMap<String, Transform>,
    pub interactions: Interactions,
}

impl Default for TermSpec {
    fn default() -> Self {
        Self {
            intercept: true,
            continuous: Transform::Linear,
            overrides: BTreeMap::new(),
            interactions: Interactions::None,
        }
    }
}

impl TermSpec {
    pub fn main_effects() -> Self {
        Self::default()
    }

    pub fn intercept_only() -> Self {
        Self { continuous: Transform::Drop, ..Self::default() }.with_all_factors_dropped()
    }

    pub fn saturated() -> Self {
        Self { interactions: Interactions::Full, ..Self::default() }
    }

    pub fn additive_splines() -> Self {
        Self { continuous: Transform::Spline { knots: None }, ..Self::default() }
    }

    pub fn with_override(mut self, feature: &str, t: Transform) -> Self {
        self.overrides.insert(feature.to_string(), t);
        self
    }

    pub fn with_interactions(mut self, i: Interactions) -> Self {
        self.interactions = i;
        self
    }

    fn with_all_factors_dropped(mut self) -> Self {
        self.overrides.insert("*".into(), Transform::Drop);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for t in std::iter::once(&self.continuous).chain(self.overrides.values()) {
            match t {
                Transform::Polynomial { degree } if *degree < 1 => {
                    return Err(Error::Config("polynomial degree must be >= 1".into()))
                }
                Transform::Spline { knots: Some(k) } if k.windows(2).any(|w| w[0] >= w[1]) => {
                    return Err(Error::Config("spline knots must be strictly increasing".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn transform_for(&self, f: &Feature) -> Transform {
        if let Some(t) = self.overrides.get(&f.name) {
            return t.clone();
        }
        if let Some(Transform::Drop) = self.overrides.get("*") {
            return Transform::Drop;
        }
        match f.data {
            FeatureData::Continuous(_) => self.continuous.clone(),
            FeatureData::Factor { .. } => Transform::Linear,
        }
    }
}

/// Dense row-major `n x p` design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: Vec<f64>,
    nrows: usize,
    ncols: usize,
    names: Vec<String>,
    provenance: String,
}

impl DesignMatrix {
    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let ncols = names.len();
        if ncols == 0 {
            return Err(Error::Dimension("design needs at least one column".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Dimension(format!("row has {} entries, expected {ncols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::from_raw(data, rows.len(), names, "explicit".into())
    }

    pub fn from_raw(data: Vec<f64>, nrows: usize, names: Vec<String>, provenance: String) -> Result<Self> {
        let ncols = names.len();
        if ncols == 0 || data.len() != nrows * ncols {
            return Err(Error::Dimension(format!("{} entries for {nrows} x {ncols}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design matrix has non-finite entries".into()));
        }
        Ok(Self { data, nrows, ncols, names, provenance })
    }

    /// Column of ones.
    pub fn intercept(n: usize) -> Self {
        Self { data: vec![1.0; n], nrows: n, ncols: 1, names: vec!["(Intercept)".into()], provenance: "intercept".into() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Group {
    Linear { feature: usize },
    Polynomial { feature: usize, degree: u32 },
    Spline { feature: usize, knots: Vec<f64> },
    Factor { feature: usize, levels: u32 },
}

impl Group {
    fn feature(&self) -> usize {
        match self {
            Group::Linear { feature }
            | Group::Polynomial { feature, .. }
            | Group::Spline { feature, .. }
            | Group::Factor { feature, .. } => *feature,
        }
    }

    fn is_factor(&self) -> bool {
        matches!(self, Group::Factor { .. })
    }

    fn names(&self, fname: &str) -> Vec<String> {
        match self {
            Group::Linear { .. } => vec![fname.to_string()],
            Group::Polynomial { degree, .. } => {
                (1..=*degree).map(|d| if d == 1 { fname.to_string() } else { format!("{fname}^{d}") }).collect()
            }
            Group::Spline { knots, .. } => {
                (0..spline::basis_size(knots)).map(|j| format!("ns({fname}){}", j + 1)).collect()
            }
            Group::Factor { levels, .. } => (1..*levels).map(|l| format!("{fname}={l}")).collect(),
        }
    }

    fn eval(&self, frame: &FeatureFrame, i: usize, out: &mut Vec<f64>) {
        let data = &frame.features[self.feature()].data;
        match (self, data) {
            (Group::Linear { .. }, FeatureData::Continuous(v)) => out.push(v[i]),
            (Group::Polynomial { degree, .. }, FeatureData::Continuous(v)) => {
                let x = v[i];
                let mut p = 1.0;
                for _ in 0..*degree {
                    p *= x;
                    out.push(p);
                }
            }
            (Group::Spline { knots, .. }, FeatureData::Continuous(v)) => spline::eval(knots, v[i], out),
            (Group::Factor { levels, .. }, FeatureData::Factor { codes, .. }) => {
                for l in 1..*levels {
                    out.push(if codes[i] == l { 1.0 } else { 0.0 });
                }
            }
            _ => unreachable!("group kind matches feature kind by construction"),
        }
    }
}

/// A `TermSpec` resolved against training data: fixed knots, fixed column
/// standardisation and the list of retained columns. Builds design matrices
/// for any frame with the same feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBasis {
    intercept: bool,
    feature_names: Vec<String>,
    groups: Vec<Group>,
    products: Vec<Vec<usize>>,
    /// Per raw non-intercept column: retained?, centre, scale.
    keep: Vec<bool>,
    center: Vec<f64>,
    scale: Vec<f64>,
    names: Vec<String>,
    provenance: String,
}

impl DesignBasis {
    pub fn fit(spec: &TermSpec, frame: &FeatureFrame) -> Result<Self> {
        spec.validate()?;
        let mut groups = Vec::new();
        for (fi, f) in frame.features.iter().enumerate() {
            let t = spec.transform_for(f);
            let g = match (&f.data, t) {
                (_, Transform::Drop) => None,
                (FeatureData::Factor { levels, .. }, _) => (*levels > 1).then_some(Group::Factor { feature: fi, levels: *levels }),
                (FeatureData::Continuous(_), Transform::Linear) => Some(Group::Linear { feature: fi }),
                (FeatureData::Continuous(_), Transform::Polynomial { degree }) => {
                    Some(Group::Polynomial { feature: fi, degree })
                }
                (FeatureData::Continuous(v), Transform::Spline { knots }) => {
                    Some(match spline::resolve_knots(v, knots.as_deref()) {
                        Some(knots) => Group::Spline { feature: fi, knots },
                        None => Group::Linear { feature: fi },
                    })
                }
            };
            groups.extend(g);
        }

        let ng = groups.len();
        let products: Vec<Vec<usize>> = match &spec.interactions {
            Interactions::None => Vec::new(),
            Interactions::Pairwise => pairs(ng).collect(),
            Interactions::FactorBy => {
                pairs(ng).filter(|p| groups[p[0]].is_factor() != groups[p[1]].is_factor()).collect()
            }
            Interactions::Pairs(list) => {
                let mut out = Vec::new();
                for (a, b) in list {
                    let find = |name: &str| {
                        frame.features.iter().position(|f| f.name == name).ok_or_else(|| {
                            Error::Config(format!("interaction references unknown feature `{name}`"))
                        })
                    };
                    let (fa, fb) = (find(a)?, find(b)?);
                    let ga = groups.iter().position(|g| g.feature() == fa);
                    let gb = groups.iter().position(|g| g.feature() == fb);
                    if let (Some(ga), Some(gb)) = (ga, gb) {
                        if ga != gb {
                            out.push(vec![ga.min(gb), ga.max(gb)]);
                        }
                    }
                }
                out.sort();
                out.dedup();
                out
            }
            Interactions::Full => (2..=ng).flat_map(|k| subsets(ng, k)).collect(),
        };

        let feature_names: Vec<String> = frame.features.iter().map(|f| f.name.clone()).collect();
        let mut raw_names = Vec::new();
        for g in &groups {
            raw_names.extend(g.names(&feature_names[g.feature()]));
        }
        for p in &products {
            let mut combos: Vec<String> = vec![String::new()];
            for &gi in p {
                let gn = groups[gi].names(&feature_names[groups[gi].feature()]);
                combos = combos
                    .iter()
                    .flat_map(|c| gn.iter().map(move |n| if c.is_empty() { n.clone() } else { format!("{c}:{n}") }))
                    .collect();
            }
            raw_names.extend(combos);
        }

        let mut basis = Self {
            intercept: spec.intercept,
            feature_names,
            groups,
            products,
            keep: vec![true; raw_names.len()],
            center: vec![0.0; raw_names.len()],
            scale: vec![1.0; raw_names.len()],
            names: Vec::new(),
            provenance: format!("{spec:?}"),
        };

        // Column moments on the training frame.
        let k = raw_names.len();
        let n = frame.n.max(1) as f64;
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        let mut buf = Vec::with_capacity(k);
        for i in 0..frame.n {
            buf.clear();
            basis.raw_row(frame, i, &mut buf);
            for j in 0..k {
                sum[j] += buf[j];
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        for i in 0..frame.n {
            buf.clear();
            basis.raw_row(frame, i, &mut buf);
            for j in 0..k {
                sq[j] += (buf[j] - mean[j]).powi(2);
            }
        }
        for j in 0..k {
            let sd = (sq[j] / n).sqrt();
            let constant = sd <= 1e-10 * (1.0 + mean[j].abs());
            if basis.intercept {
                basis.keep[j] = !constant;
                basis.center[j] = mean[j];
                basis.scale[j] = if constant { 1.0 } else { sd };
            } else {
                // No centring without an intercept: it would change the model space.
                let rms = (sq[j] / n + mean[j] * mean[j]).sqrt();
                basis.keep[j] = rms > 0.0;
                basis.scale[j] = if rms > 0.0 { rms } else { 1.0 };
            }
        }
        if basis.intercept {
            basis.names.push("(Intercept)".into());
        }
        basis.names.extend(raw_names.into_iter().zip(&basis.keep).filter(|(_, &k)| k).map(|(n, _)| n));
        if basis.names.is_empty() {
            return Err(Error::Config("term spec produces an empty design".into()));
        }
        Ok(basis)
    }

    fn raw_row(&self, frame: &FeatureFrame, i: usize, out: &mut Vec<f64>) {
        let mut offsets = Vec::with_capacity(self.groups.len() + 1);
        for g in &self.groups {
            offsets.push(out.len());
            g.eval(frame, i, out);
        }
        offsets.push(out.len());
        for p in &self.products {
            let mut acc: Vec<f64> = vec![1.0];
            for &gi in p {
                let cols = &out[offsets[gi]..offsets[gi + 1]];
                acc = acc.iter().flat_map(|a| cols.iter().map(move |c| a * c)).collect();
            }
            out.extend(acc);
        }
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn build(&self, frame: &FeatureFrame) -> Result<DesignMatrix> {
        let names: Vec<&String> = frame.features.iter().map(|f| &f.name).collect();
        if names.len() != self.feature_names.len() || names.iter().zip(&self.feature_names).any(|(a, b)| *a != b) {
            return Err(Error::Dimension(format!(
                "frame features {names:?} do not match basis features {:?}",
                self.feature_names
            )));
        }
        let p = self.ncols();
        let mut data = Vec::with_capacity(frame.n * p);
        let mut buf = Vec::with_capacity(self.keep.len());
        for i in 0..frame.n {
            buf.clear();
            self.raw_row(frame, i, &mut buf);
            if self.intercept {
                data.push(1.0);
            }
            for j in 0..buf.len() {
                if self.keep[j] {
                    data.push((buf[j] - self.center[j]) / self.scale[j]);
                }
            }
        }
        DesignMatrix::from_raw(data, frame.n, self.names.clone(), self.provenance.clone())
    }
}

fn pairs(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| vec![a, b]))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
