//! Finite-state ergodic Markov environment driving the random dynamics.
//!
//! Each chain state carries an alphabet of interval branches with their
//! inverse maps and potential profiles; each chain edge carries a 0/1
//! admissibility matrix connecting the alphabets of its endpoints. A 1-state
//! chain recovers the deterministic (cookie-cutter) case.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub const FORMAT_TAG: &str = "inversemf/1";

/// Minimum cylinder diameter before the depth guard trips.
pub const DIAM_UNDERFLOW: f64 = 1e-300;

/// Potential profile on a single branch, in the normalized coordinate
/// y = (x - a)/(b - a) of the branch interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialProfile {
    Constant { value: f64 },
    Lipschitz { value: f64, slope: f64 },
}

impl PotentialProfile {
    /// Value at normalized coordinate y in [0, 1].
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            PotentialProfile::Constant { value } => value,
            PotentialProfile::Lipschitz { value, slope } => value + slope * y,
        }
    }

    /// (inf, sup) over a normalized sub-interval [ylo, yhi].
    pub fn range_on(&self, ylo: f64, yhi: f64) -> (f64, f64) {
        let (u, v) = (self.eval(ylo), self.eval(yhi));
        (u.min(v), u.max(v))
    }

    pub fn shifted(&self, delta: f64) -> Self {
        match *self {
            PotentialProfile::Constant { value } => PotentialProfile::Constant { value: value + delta },
            PotentialProfile::Lipschitz { value, slope } => {
                PotentialProfile::Lipschitz { value: value + delta, slope }
            }
        }
    }

    pub fn lipschitz_slope(&self) -> f64 {
        match *self {
            PotentialProfile::Constant { .. } => 0.0,
            PotentialProfile::Lipschitz { slope, .. } => slope.abs(),
        }
    }
}

/// Branch map kind. The map sends the branch interval [a, b] onto [0, 1].
/// `Moebius { c }` composes the affine normalization with
/// y ↦ y(1+c)/(1+cy); its inverse is y ↦ y/(1+c-cy). c = 0 is affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchMap {
    Affine,
    Moebius { c: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSpec {
    pub a: f64,
    pub b: f64,
    pub map: BranchMap,
    pub phi: PotentialProfile,
}

impl BranchSpec {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    /// Inverse branch g: [0,1] -> [a,b] evaluated at y.
    pub fn g(&self, y: f64) -> f64 {
        match self.map {
            BranchMap::Affine => self.a + (self.b - self.a) * y,
            BranchMap::Moebius { c } => {
                let z = y / (1.0 + c - c * y);
                self.a + (self.b - self.a) * z
            }
        }
    }

    /// Affine normalized coordinate u = (x - a)/(b - a) of a point in [a, b].
    /// Potential profiles and the psi formula are parameterized by u.
    pub fn u_of(&self, x: f64) -> f64 {
        (x - self.a) / (self.b - self.a)
    }

    /// Forward map value T(x) in [0, 1].
    pub fn forward(&self, x: f64) -> f64 {
        let u = self.u_of(x);
        match self.map {
            BranchMap::Affine => u,
            BranchMap::Moebius { c } => u * (1.0 + c) / (1.0 + c * u),
        }
    }

    /// psi(x) = -log |T'(x)| at affine coordinate u.
    ///
    /// T = m_c ∘ f with f the affine normalization, so
    /// psi(u) = log(b-a) + 2 log(1+cu) - log(1+c).
    pub fn psi_at_u(&self, u: f64) -> f64 {
        let base = (self.b - self.a).ln();
        match self.map {
            BranchMap::Affine => base,
            BranchMap::Moebius { c } => base + 2.0 * (1.0 + c * u).ln() - (1.0 + c).ln(),
        }
    }

    /// (inf, sup) of psi over an affine-coordinate sub-interval. psi is
    /// monotone in u for both supported kinds, so endpoint evaluation is
    /// exact.
    pub fn psi_range(&self, ulo: f64, uhi: f64) -> (f64, f64) {
        let (p, q) = (self.psi_at_u(ulo), self.psi_at_u(uhi));
        (p.min(q), p.max(q))
    }

    /// Upper bound on |g'| over [0,1]; the branch contraction bound.
    pub fn contraction_bound(&self) -> f64 {
        let len = self.b - self.a;
        match self.map {
            BranchMap::Affine => len,
            BranchMap::Moebius { c } => {
                // |g'|(y) = len * (1+c) / (1+c-cy)^2, extremal at y in {0,1}
                let d0 = (1.0 + c) / (1.0 + c).powi(2);
                let d1 = 1.0 + c;
                len * d0.max(d1)
            }
        }
    }

    /// Lipschitz constant of psi in the affine normalized coordinate.
    pub fn psi_slope_bound(&self) -> f64 {
        match self.map {
            BranchMap::Affine => 0.0,
            BranchMap::Moebius { c } => 2.0 * c.abs() / (1.0 - c.abs()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvState {
    pub id: usize,
    pub branches: Vec<BranchSpec>,
}

impl EnvState {
    pub fn alphabet_size(&self) -> usize {
        self.branches.len()
    }
}

/// 0/1 admissibility matrix attached to one chain edge (k, k').
/// `rows` has alphabet_size(k) rows of alphabet_size(k') entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Admissibility {
    pub rows: Vec<Vec<u8>>,
}

impl Admissibility {
    pub fn full(nr: usize, nc: usize) -> Self {
        Admissibility { rows: vec![vec![1; nc]; nr] }
    }

    pub fn allows(&self, r: u8, s: u8) -> bool {
        self.rows[(r - 1) as usize][(s - 1) as usize] == 1
    }
}

#[derive(Debug, Clone)]
pub struct EnvModel {
    pub states: Vec<EnvState>,
    /// Row-stochastic transition matrix of the driving chain.
    pub transition: Vec<Vec<f64>>,
    /// Admissibility per edge with positive transition probability.
    pub admissibility: BTreeMap<(usize, usize), Admissibility>,
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    states: Vec<EnvState>,
    transition: Vec<Vec<f64>>,
    admissibility: BTreeMap<String, Admissibility>,
    seed: u64,
}

impl EnvModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: FORMAT_TAG.to_string(),
            states: self.states.clone(),
            transition: self.transition.clone(),
            admissibility: self
                .admissibility
                .iter()
                .map(|((k, kp), a)| (format!("{}->{}", k, kp), a.clone()))
                .collect(),
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT_TAG {
            return Err(Error::Structural(format!(
                "unsupported format tag {:?}, expected {:?}",
                file.format, FORMAT_TAG
            )));
        }
        let mut admissibility = BTreeMap::new();
        for (key, adm) in file.admissibility {
            let (k, kp) = key
                .split_once("->")
                .ok_or_else(|| Error::Structural(format!("bad admissibility key {:?}", key)))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| Error::Structural(format!("bad admissibility key {:?}", key)))?;
            let kp: usize = kp
                .trim()
                .parse()
                .map_err(|_| Error::Structural(format!("bad admissibility key {:?}", key)))?;
            admissibility.insert((k, kp), adm);
        }
        let model = EnvModel { states: file.states, transition: file.transition, admissibility, seed: file.seed };
        model.check_structure()?;
        Ok(model)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Hex digest of the canonical JSON form; identifies the model in output
    /// metadata.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = self.to_json().unwrap_or_default();
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{:02x}", b)).collect()
    }

    // -----------------------------------------------------------------------
    // Structure and invariants

    /// Shape-level checks: fatal when violated.
    pub fn check_structure(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::Structural("model has no states".into()));
        }
        if self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            return Err(Error::Structural(format!("transition matrix is not {n}x{n}")));
        }
        for (i, state) in self.states.iter().enumerate() {
            if state.id != i {
                return Err(Error::Structural(format!("state at index {i} has id {}", state.id)));
            }
            if state.branches.is_empty() {
                return Err(Error::Structural(format!("state {i} has no branches")));
            }
        }
        for (k, row) in self.transition.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Structural(format!("transition row {k} is not stochastic")));
            }
            for (kp, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    let adm = self.admissibility.get(&(k, kp)).ok_or_else(|| {
                        Error::Structural(format!("edge {k}->{kp} has no admissibility matrix"))
                    })?;
                    let (nr, nc) = (self.states[k].alphabet_size(), self.states[kp].alphabet_size());
                    if adm.rows.len() != nr || adm.rows.iter().any(|r| r.len() != nc) {
                        return Err(Error::Structural(format!(
                            "admissibility {k}->{kp} is not {nr}x{nc}"
                        )));
                    }
                    if adm.rows.iter().flatten().any(|&e| e > 1) {
                        return Err(Error::Structural(format!(
                            "admissibility {k}->{kp} has entries outside {{0,1}}"
                        )));
                    }
                    if adm.rows.iter().any(|r| r.iter().all(|&e| e == 0)) {
                        return Err(Error::Structural(format!(
                            "admissibility {k}->{kp} has an all-zero row"
                        )));
                    }
                    for c in 0..nc {
                        if adm.rows.iter().all(|r| r[c] == 0) {
                            return Err(Error::Structural(format!(
                                "admissibility {k}->{kp} has an all-zero column"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Stationary distribution of the driving chain (requires irreducibility,
    /// which `validate` checks; returns uniform-renormalized fixed point).
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states.len();
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..20_000 {
            let mut next = vec![0.0; n];
            for k in 0..n {
                for kp in 0..n {
                    next[kp] += pi[k] * self.transition[k][kp];
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        pi
    }

    /// Mean of the per-state sup of psi over branches, weighted by the
    /// stationary distribution. Negative value = contraction in the mean
    /// (its negation estimates the contraction constant).
    pub fn mean_sup_psi(&self) -> f64 {
        let pi = self.stationary();
        self.states
            .iter()
            .zip(&pi)
            .map(|(st, &p)| {
                let sup = st
                    .branches
                    .iter()
                    .map(|b| b.psi_range(0.0, 1.0).1)
                    .fold(f64::NEG_INFINITY, f64::max);
                p * sup
            })
            .sum()
    }

    /// Mean of the per-state sup of phi over branches.
    pub fn mean_sup_phi(&self) -> f64 {
        let pi = self.stationary();
        self.states
            .iter()
            .zip(&pi)
            .map(|(st, &p)| {
                let sup = st
                    .branches
                    .iter()
                    .map(|b| b.phi.range_on(0.0, 1.0).1)
                    .fold(f64::NEG_INFINITY, f64::max);
                p * sup
            })
            .sum()
    }

    /// Applies a constant shift to every phi profile.
    pub fn shift_phi(&self, delta: f64) -> EnvModel {
        let mut out = self.clone();
        for st in &mut out.states {
            for br in &mut st.branches {
                br.phi = br.phi.shifted(delta);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Validation report

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn boolean_power_positive(mat: &[Vec<bool>], power: usize) -> bool {
    let n = mat.len();
    let mut acc = mat.to_vec();
    for _ in 1..power {
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if acc[i][j] {
                    for (kcol, cell) in next[i].iter_mut().enumerate() {
                        *cell = *cell || mat[j][kcol];
                    }
                }
            }
        }
        acc = next;
    }
    acc.iter().all(|r| r.iter().all(|&x| x))
}

/// Checks every model invariant and reports pass/fail per item.
/// Structural problems surface as `Err`; invariant failures are entries in
/// the report. Downstream pipelines refuse a model whose report failed.
pub fn validate_model(model: &EnvModel) -> Result<ValidationReport> {
    model.check_structure()?;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let n = model.states.len();

    // branch geometry per state
    let mut geom_ok = true;
    let mut geom_detail = String::new();
    for st in &model.states {
        for (i, br) in st.branches.iter().enumerate() {
            if !(br.a >= 0.0 && br.b <= 1.0 && br.b > br.a) {
                geom_ok = false;
                geom_detail = format!("state {} branch {} has bad interval [{}, {}]", st.id, i + 1, br.a, br.b);
            }
            if let BranchMap::Moebius { c } = br.map {
                if c.abs() >= 1.0 {
                    geom_ok = false;
                    geom_detail = format!("state {} branch {} has |c| >= 1", st.id, i + 1);
                }
            }
            if i + 1 < st.branches.len() && br.b > st.branches[i + 1].a + 1e-15 {
                geom_ok = false;
                geom_detail = format!("state {} branches {} and {} overlap", st.id, i + 1, i + 2);
            }
        }
    }
    checks.push(CheckResult {
        name: "branch_intervals_ordered_disjoint".into(),
        passed: geom_ok,
        detail: if geom_ok { "intervals ordered with disjoint interiors".into() } else { geom_detail },
    });

    // chain irreducible + aperiodic (primitivity via Wielandt's bound)
    let boolmat: Vec<Vec<bool>> = model
        .transition
        .iter()
        .map(|row| row.iter().map(|&p| p > 0.0).collect())
        .collect();
    let wielandt = (n - 1) * (n - 1) + 1;
    let primitive = boolean_power_positive(&boolmat, wielandt.max(1));
    checks.push(CheckResult {
        name: "chain_irreducible_aperiodic".into(),
        passed: primitive,
        detail: if primitive {
            format!("Q^{} entrywise positive", wielandt.max(1))
        } else {
            "transition matrix is not primitive".into()
        },
    });

    // at least one state with alphabet >= 2
    let has_branching = model.states.iter().any(|s| s.alphabet_size() >= 2);
    checks.push(CheckResult {
        name: "some_state_branches".into(),
        passed: has_branching,
        detail: format!(
            "max alphabet size {}",
            model.states.iter().map(|s| s.alphabet_size()).max().unwrap_or(0)
        ),
    });

    // contraction in the mean: stationary mean of sup psi < 0
    let mean_psi = model.mean_sup_psi();
    checks.push(CheckResult {
        name: "contraction_in_mean".into(),
        passed: mean_psi < 0.0,
        detail: format!("c_psi estimate = {:.6}", -mean_psi),
    });

    // potential mean-negativity: stationary mean of sup phi < 0
    let mean_phi = model.mean_sup_phi();
    checks.push(CheckResult {
        name: "potential_mean_negative".into(),
        passed: mean_phi < 0.0,
        detail: format!("c_phi estimate = {:.6}", -mean_phi),
    });

    // zero-Lebesgue surrogate: fail when every state tiles [0,1] exactly,
    // warn when only some do.
    let tiles: Vec<bool> = model
        .states
        .iter()
        .map(|st| {
            let total: f64 = st.branches.iter().map(|b| b.len()).sum();
            let contiguous = st.branches.first().map(|b| b.a.abs() < 1e-12).unwrap_or(false)
                && st.branches.last().map(|b| (b.b - 1.0).abs() < 1e-12).unwrap_or(false)
                && st.branches.windows(2).all(|w| (w[0].b - w[1].a).abs() < 1e-12);
            (total - 1.0).abs() < 1e-12 && contiguous
        })
        .collect();
    let all_tile = tiles.iter().all(|&t| t);
    let some_tile = tiles.iter().any(|&t| t);
    checks.push(CheckResult {
        name: "attractor_zero_lebesgue".into(),
        passed: !all_tile,
        detail: if all_tile {
            "branch intervals tile [0,1] in every state; attractor has full measure".into()
        } else {
            "at least one state leaves a gap".into()
        },
    });
    if some_tile && !all_tile {
        warnings.push("branch intervals tile [0,1] in some states but not all".into());
    }

    Ok(ValidationReport { checks, warnings })
}

// ---------------------------------------------------------------------------
// Environment paths

/// A finite sample of the driving chain: states visited at times
/// 0, 1, ..., horizon. Shares the model by `Arc` so downstream operations
/// can read branch data without extra plumbing.
#[derive(Debug, Clone)]
pub struct EnvPath {
    pub model: Arc<EnvModel>,
    states: Vec<usize>,
}

impl EnvPath {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state_id(&self, k: usize) -> usize {
        self.states[k]
    }

    pub fn state(&self, k: usize) -> &EnvState {
        &self.model.states[self.states[k]]
    }

    pub fn alphabet_size(&self, k: usize) -> usize {
        self.state(k).alphabet_size()
    }

    pub fn branch(&self, k: usize, letter: u8) -> &BranchSpec {
        &self.state(k).branches[(letter - 1) as usize]
    }

    /// Admissibility between positions k and k+1.
    pub fn edge(&self, k: usize) -> &Admissibility {
        let key = (self.states[k], self.states[k + 1]);
        &self.model.admissibility[&key]
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn require_horizon(&self, required: usize) -> Result<()> {
        if required > self.horizon() {
            Err(Error::HorizonTooShort { required, available: self.horizon() })
        } else {
            Ok(())
        }
    }
}

/// Samples a Markov path of `horizon + 1` states started at the stationary
/// distribution. Fully determined by `(model.seed, stream_label)`.
pub fn sample_path(model: &Arc<EnvModel>, horizon: usize, stream_label: &str) -> Result<EnvPath> {
    if horizon == 0 {
        return Err(Error::Other("horizon must be >= 1".into()));
    }
    let mut stream = Stream::new(model.seed, stream_label);
    let pi = model.stationary();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut current = stream.sample_weighted(&pi);
    states.push(current);
    for _ in 0..horizon {
        current = stream.sample_weighted(&model.transition[current]);
        states.push(current);
    }
    Ok(EnvPath { model: Arc::clone(model), states })
}

/// Drops the first `k` entries of the path (the shift by sigma^k).
pub fn shift_path(path: &EnvPath, k: usize) -> Result<EnvPath> {
    if k > path.horizon() {
        return Err(Error::Other(format!("shift {k} exceeds horizon {}", path.horizon())));
    }
    Ok(EnvPath { model: Arc::clone(&path.model), states: path.states[k..].to_vec() })
}
