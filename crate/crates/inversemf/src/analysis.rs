//! Empirical multifractal analysis of the inverse measure: L^q slope
//! estimation over grid packings, local dimensions, cylinder exponents,
//! approximation degrees, ubiquity-ball sampling, and box dimension.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::curve::{CurveKind, CurveMeta, SpectrumCurve};
use crate::env::{EnvModel, EnvPath};
use crate::error::{Error, Result};
use crate::gibbs::MeasureTable;
use crate::inverse::{designated_atom, interval_table_at, AtomList};
use crate::potential::{birkhoff_bounds, Which};
use crate::subshift::Word;

/// Safety factor between a scale and the resolutions that could corrupt it.
pub const FLOOR_SAFETY: f64 = 10.0;

// ---------------------------------------------------------------------------
// Atom index: fast ball masses and nearest-atom queries

/// Sorted view of an atom list with prefix-summed weights, per-generation
/// position arrays, and the boundary Dirac masses.
pub struct AtomIndex {
    positions: Vec<f64>,
    prefix_weights: Vec<f64>,
    /// positions (including zero-weight atoms) grouped by parent generation.
    by_generation: Vec<Vec<f64>>,
    /// atom positions keyed by parent letters, for suffix lookups.
    by_parent: HashMap<Vec<u8>, Vec<(u8, f64, f64)>>,
    pub boundary_left: f64,
    pub boundary_right: f64,
    pub residual: f64,
    pub min_positive_weight: f64,
    pub gen_depth: usize,
}

impl AtomIndex {
    pub fn build(list: &AtomList) -> AtomIndex {
        let mut order: Vec<usize> = (0..list.atoms.len()).collect();
        order.sort_by(|&a, &b| {
            list.atoms[a].position.partial_cmp(&list.atoms[b].position).unwrap()
        });
        let positions: Vec<f64> = order.iter().map(|&i| list.atoms[i].position).collect();
        let mut prefix_weights = Vec::with_capacity(positions.len());
        let mut acc = 0.0;
        for &i in &order {
            acc += list.atoms[i].weight;
            prefix_weights.push(acc);
        }
        let mut by_generation = vec![Vec::new(); list.gen_depth];
        let mut by_parent: HashMap<Vec<u8>, Vec<(u8, f64, f64)>> = HashMap::new();
        for atom in &list.atoms {
            by_generation[atom.parent.len()].push(atom.position);
            by_parent
                .entry(atom.parent.letters.clone())
                .or_default()
                .push((atom.branch, atom.position, atom.weight));
        }
        for v in &mut by_generation {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let min_positive_weight = list
            .atoms
            .iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| a.weight)
            .fold(f64::INFINITY, f64::min);
        AtomIndex {
            positions,
            prefix_weights,
            by_generation,
            by_parent,
            boundary_left: list.boundary_left,
            boundary_right: list.boundary_right,
            residual: list.residual,
            min_positive_weight,
            gen_depth: list.gen_depth,
        }
    }

    /// Total enumerated weight of atoms with position in [lo, hi].
    pub fn weight_between(&self, lo: f64, hi: f64) -> f64 {
        let i0 = self.positions.partition_point(|&p| p < lo);
        let i1 = self.positions.partition_point(|&p| p <= hi);
        if i1 == 0 || i0 >= i1 {
            return 0.0;
        }
        let upper = self.prefix_weights[i1 - 1];
        let lower = if i0 == 0 { 0.0 } else { self.prefix_weights[i0 - 1] };
        upper - lower
    }

    /// Truncated inverse-measure mass of the closed ball B(x, r), including
    /// the boundary Diracs.
    pub fn ball_mass(&self, x: f64, r: f64) -> f64 {
        let mut mass = self.weight_between(x - r, x + r);
        if x - r <= 0.0 {
            mass += self.boundary_left;
        }
        if x + r >= 1.0 {
            mass += self.boundary_right;
        }
        mass
    }

    /// Distance from x to the nearest atom position of generation <= max_gen
    /// (zero-weight atoms included: the approximation system uses all
    /// right-neighbor boundary points).
    pub fn nearest_atom_distance(&self, x: f64, max_gen: usize) -> f64 {
        let mut best = f64::INFINITY;
        for generation in self.by_generation.iter().take(max_gen + 1) {
            let i = generation.partition_point(|&p| p < x);
            if i < generation.len() {
                best = best.min((generation[i] - x).abs());
            }
            if i > 0 {
                best = best.min((x - generation[i - 1]).abs());
            }
        }
        best
    }

    /// Child-boundary atoms directly below the given parent word.
    pub fn atoms_of_parent(&self, letters: &[u8]) -> Option<&Vec<(u8, f64, f64)>> {
        self.by_parent.get(letters)
    }
}

// ---------------------------------------------------------------------------
// Depth lookup: which cylinder interval contains x at each depth

/// Per-depth CDF interval tables derived from one deep measure table, with
/// containment lookup by position.
pub struct DepthTables {
    /// per depth d (1-based): sorted hi endpoints and the records.
    tables: Vec<Vec<crate::inverse::IntervalRecord>>,
}

impl DepthTables {
    pub fn build(table: &MeasureTable) -> DepthTables {
        let tables = (1..=table.depth).map(|d| interval_table_at(table, d)).collect();
        DepthTables { tables }
    }

    pub fn max_depth(&self) -> usize {
        self.tables.len()
    }

    /// The unique record with x in [lo, hi) at depth d (1-based); x = 1 maps
    /// to the last record.
    pub fn locate(&self, depth: usize, x: f64) -> &crate::inverse::IntervalRecord {
        let records = &self.tables[depth - 1];
        let i = records.partition_point(|r| r.hi <= x);
        if i >= records.len() {
            records.last().unwrap()
        } else {
            &records[i]
        }
    }
}

// ---------------------------------------------------------------------------
// Least squares

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

// ---------------------------------------------------------------------------
// L^q estimation

/// Largest branch exponent diam-vs-mass: bounds how light a cell of width w
/// can be (mass >= w^alpha_max up to constants). Used by the negative-q
/// scale floor.
pub fn alpha_max_bound(model: &EnvModel) -> f64 {
    let mut worst: f64 = 1.0;
    for st in &model.states {
        for br in &st.branches {
            let psi_min = br.psi_range(0.0, 1.0).0;
            let phi_max = br.phi.range_on(0.0, 1.0).1;
            if phi_max < 0.0 {
                worst = worst.max(psi_min / phi_max);
            }
        }
    }
    worst
}

/// Scales from the requested list that the truncated atom list can support
/// for the exponent q. Two guards:
/// - cell width at least FLOOR_SAFETY times the residual (masses would
///   otherwise be dominated by unenumerated generations);
/// - for q < 0, the lightest enumerated atom must resolve the lightest
///   possible cell: w_min <= (2r)^alpha_max / FLOOR_SAFETY.
pub fn usable_scales(index: &AtomIndex, alpha_max: f64, scales: &[f64], q: f64) -> Vec<f64> {
    scales
        .iter()
        .cloned()
        .filter(|&r| {
            let width = 2.0 * r;
            if width < FLOOR_SAFETY * index.residual {
                return false;
            }
            if q < 0.0 {
                let lightest_cell = width.powf(alpha_max);
                if index.min_positive_weight > lightest_cell / FLOOR_SAFETY {
                    return false;
                }
            }
            true
        })
        .collect()
}

/// Packing statistic at one scale: cells of width 2r at `offsets` phase
/// shifts; cell mass sums atom weights (plus boundary Diracs); statistic is
/// the max over shifts of sum mass^q over occupied cells.
fn packing_statistic(index: &AtomIndex, r: f64, q: f64, offsets: usize) -> f64 {
    let width = 2.0 * r;
    let mut best = f64::NEG_INFINITY;
    for j in 0..offsets {
        let shift = width * j as f64 / offsets as f64;
        // BTreeMap fixes the summation order: reruns stay byte-identical
        let mut cells: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
        for (i, &p) in index.positions.iter().enumerate() {
            let w = index.prefix_weights[i] - if i == 0 { 0.0 } else { index.prefix_weights[i - 1] };
            if w <= 0.0 {
                continue;
            }
            let cell = ((p - shift) / width).floor() as i64;
            *cells.entry(cell).or_insert(0.0) += w;
        }
        if index.boundary_left > 0.0 {
            let cell = ((0.0 - shift) / width).floor() as i64;
            *cells.entry(cell).or_insert(0.0) += index.boundary_left;
        }
        if index.boundary_right > 0.0 {
            let cell = ((1.0 - shift) / width).floor() as i64;
            *cells.entry(cell).or_insert(0.0) += index.boundary_right;
        }
        let stat: f64 = cells.values().map(|&m| m.powf(q)).sum();
        best = best.max(stat);
    }
    best
}

/// Empirical L^q slope estimates: for each q, the least-squares slope of
/// log statistic against log r over the scales the truncation supports.
pub fn lq_estimate(
    list: &AtomList,
    model: &EnvModel,
    q_grid: &[f64],
    scales: &[f64],
    offsets: usize,
    meta: CurveMeta,
) -> Result<SpectrumCurve> {
    if offsets == 0 {
        return Err(Error::Other("need at least one grid offset".into()));
    }
    let index = AtomIndex::build(list);
    let alpha_max = alpha_max_bound(model);
    let values: Result<Vec<f64>> = q_grid
        .par_iter()
        .map(|&q| {
            let kept = usable_scales(&index, alpha_max, scales, q);
            if kept.len() < 2 {
                return Err(Error::ScaleBelowFloor {
                    scale: scales.iter().cloned().fold(f64::INFINITY, f64::min),
                    floor: FLOOR_SAFETY * index.residual / 2.0,
                });
            }
            let xs: Vec<f64> = kept.iter().map(|r| r.ln()).collect();
            let ys: Vec<f64> = kept
                .iter()
                .map(|&r| packing_statistic(&index, r, q, offsets).ln())
                .collect();
            Ok(ols_slope(&xs, &ys))
        })
        .collect();
    Ok(SpectrumCurve::new(CurveKind::TauEstimate, q_grid.to_vec(), values?, meta))
}

// ---------------------------------------------------------------------------
// Local dimensions

#[derive(Debug, Clone)]
pub struct LocalDimSample {
    pub x: f64,
    pub scales: Vec<f64>,
    pub masses: Vec<f64>,
    /// OLS slope over all usable scales.
    pub slope: f64,
    /// min window slope over the tail half of the scales.
    pub lower: f64,
    /// max window slope over the tail half of the scales.
    pub upper: f64,
}

/// Per-point ball masses and sliding-window slopes. Scales must be sorted
/// decreasing; windows of `window` consecutive scales give local slopes, and
/// the lower/upper estimates take min/max over the windows in the tail half.
pub fn local_dims(index: &AtomIndex, xs: &[f64], scales: &[f64], window: usize) -> Vec<LocalDimSample> {
    xs.par_iter()
        .map(|&x| {
            let masses: Vec<f64> = scales.iter().map(|&r| index.ball_mass(x, r)).collect();
            let usable: Vec<(f64, f64)> = scales
                .iter()
                .zip(&masses)
                .filter(|(_, &m)| m > 0.0)
                .map(|(&r, &m)| (r.ln(), m.ln()))
                .collect();
            let (slope, lower, upper) = if usable.len() < 2 {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
                let global = ols_slope(&xs, &ys);
                let w = window.max(2).min(xs.len());
                let mut lows = f64::INFINITY;
                let mut highs = f64::NEG_INFINITY;
                let start = xs.len() / 2;
                let from = start.saturating_sub(w - 1);
                for i in from..=(xs.len() - w) {
                    let s = ols_slope(&xs[i..i + w], &ys[i..i + w]);
                    lows = lows.min(s);
                    highs = highs.max(s);
                }
                (global, lows, highs)
            };
            LocalDimSample { x, scales: scales.to_vec(), masses, slope, lower, upper }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Cylinder exponents

#[derive(Debug, Clone, Copy)]
pub struct AlphaInfo {
    /// sup Birkhoff sum of psi over the cylinder divided by log interval
    /// length.
    pub alpha: f64,
    /// The Birkhoff-ratio surrogate sup psi-sum / sup phi-sum.
    pub surrogate: f64,
}

impl AlphaInfo {
    pub fn gap(&self) -> f64 {
        (self.alpha - self.surrogate).abs()
    }
}

/// Exponent of one cylinder: how the attractor-piece diameter scales
/// against the CDF interval length.
pub fn alpha_of(table: &MeasureTable, path: &EnvPath, word: &Word) -> Result<AlphaInfo> {
    let mass = table
        .mass_of(&word.letters)
        .or_else(|| {
            // word may be shallower than the table depth
            if word.len() <= table.depth {
                Some(
                    table
                        .words
                        .iter()
                        .zip(&table.masses)
                        .filter(|(w, _)| w.letters.starts_with(&word.letters))
                        .map(|(_, &m)| m)
                        .sum(),
                )
            } else {
                None
            }
        })
        .ok_or_else(|| Error::Other(format!("word {word} deeper than the table")))?;
    if mass <= 0.0 {
        return Err(Error::Other(format!("word {word} has zero mass")));
    }
    let psi = birkhoff_bounds(path, word, Which::Psi)?;
    let phi = birkhoff_bounds(path, word, Which::Phi)?;
    Ok(AlphaInfo { alpha: psi.sup_sum / mass.ln(), surrogate: psi.sup_sum / phi.sup_sum })
}

// ---------------------------------------------------------------------------
// Approximation degrees

#[derive(Debug, Clone)]
pub struct ApproxDegree {
    /// limsup surrogate: max over the tail window of the per-depth ratios
    /// log |x - x^{v s}| / log ell(v), v = x|_n, s over right-pair children.
    pub xi: f64,
    /// liminf surrogate: min over the tail window of
    /// log(min distance to any atom of generation <= n) / log |I^{x|_n}|.
    pub xi_hat: f64,
    pub per_depth_xi: Vec<f64>,
    pub per_depth_xi_hat: Vec<f64>,
    pub collision: bool,
}

/// Approximation degrees of a non-atom point by the atom system. Depths are
/// the prefix lengths n to evaluate; the tail window is [n_max/2, n_max].
pub fn approx_degree(
    index: &AtomIndex,
    tables: &DepthTables,
    x: f64,
    depths: &[usize],
) -> Result<ApproxDegree> {
    let mut per_xi = Vec::with_capacity(depths.len());
    let mut per_hat = Vec::with_capacity(depths.len());
    for &n in depths {
        if n < 1 || n > tables.max_depth() {
            return Err(Error::Other(format!("depth {n} outside the table range")));
        }
        let rec = tables.locate(n, x);
        let ell = rec.ell();
        // xi: nearest child-pair atom of the containing cylinder
        let xi = match index.atoms_of_parent(&rec.word.letters) {
            Some(children) => {
                let mut best = f64::INFINITY;
                for &(_, pos, _) in children {
                    best = best.min((x - pos).abs());
                }
                if best == 0.0 {
                    return Ok(ApproxDegree {
                        xi: f64::NAN,
                        xi_hat: f64::NAN,
                        per_depth_xi: per_xi,
                        per_depth_xi_hat: per_hat,
                        collision: true,
                    });
                }
                best.ln() / ell.ln()
            }
            None => f64::NAN,
        };
        per_xi.push(xi);
        // xi-hat: nearest atom among all generations <= n
        let dist = index.nearest_atom_distance(x, n.min(index.gen_depth.saturating_sub(1)));
        if dist == 0.0 {
            return Ok(ApproxDegree {
                xi: f64::NAN,
                xi_hat: f64::NAN,
                per_depth_xi: per_xi,
                per_depth_xi_hat: per_hat,
                collision: true,
            });
        }
        per_hat.push(dist.ln() / rec.length().ln());
    }
    let tail = depths.len() / 2;
    let xi = per_xi[tail..]
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let xi_hat = per_hat[tail..].iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ApproxDegree {
        xi: if xi.is_finite() { xi } else { f64::NAN },
        xi_hat,
        per_depth_xi: per_xi,
        per_depth_xi_hat: per_hat,
        collision: false,
    })
}

// ---------------------------------------------------------------------------
// Ubiquity sampling

#[derive(Debug, Clone)]
pub struct UbiquityBall {
    pub word: Word,
    pub center: f64,
    pub radius: f64,
    pub birkhoff_ratio: f64,
}

/// Balls around the designated atoms of the depth-n cylinders whose
/// Birkhoff ratio lies within eps of the target exponent d. Radius is
/// ell(v)^xi.
pub fn ubiquity_sample(
    table: &MeasureTable,
    path: &EnvPath,
    d: f64,
    xi: f64,
    eps: f64,
    depth: usize,
    lookahead_max: usize,
    tol: f64,
) -> Result<Vec<UbiquityBall>> {
    if xi < 1.0 {
        return Err(Error::Other("xi must be >= 1".into()));
    }
    let records = interval_table_at(table, depth);
    let mut balls = Vec::new();
    for rec in &records {
        let psi = birkhoff_bounds(path, &rec.word, Which::Psi)?;
        let phi = birkhoff_bounds(path, &rec.word, Which::Phi)?;
        let ratio = psi.sup_sum / phi.sup_sum;
        if (ratio - d).abs() > eps {
            continue;
        }
        let mut found = None;
        for lookahead in 1..=lookahead_max.min(table.depth - depth) {
            match designated_atom(table, path, &rec.word, lookahead, tol) {
                Ok(p) => {
                    found = Some(p);
                    break;
                }
                Err(Error::NoAtomFound { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        if let Some(picked) = found {
            balls.push(UbiquityBall {
                word: rec.word.clone(),
                center: picked.atom.position,
                radius: rec.ell().powf(xi),
                birkhoff_ratio: ratio,
            });
        }
    }
    if balls.is_empty() {
        return Err(Error::EmptySelection { d });
    }
    Ok(balls)
}

// ---------------------------------------------------------------------------
// Box dimension

/// Box-counting estimate of the attractor dimension: slope of log N(r)
/// against log(1/r), where N(r) counts r-cells meeting the depth-n cylinder
/// cover.
pub fn box_dimension(path: &EnvPath, depth: usize, scales: &[f64]) -> Result<f64> {
    let words: Vec<Word> = crate::subshift::enumerate_words(path, 0, depth)?.collect();
    let intervals: Vec<(f64, f64)> = words
        .iter()
        .map(|w| crate::geometry::cylinder_interval(path, w).map(|iv| (iv.lo, iv.hi)))
        .collect::<Result<Vec<_>>>()?;
    let max_diam = intervals.iter().map(|(lo, hi)| hi - lo).fold(0.0f64, f64::max);
    let min_scale = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if max_diam >= min_scale {
        return Err(Error::Other(format!(
            "depth {depth} cylinders (diam {max_diam:.3e}) are coarser than the smallest scale {min_scale:.3e}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in scales {
        let mut cells: std::collections::HashSet<i64> = std::collections::HashSet::new();
        for &(lo, hi) in &intervals {
            let first = (lo / r).floor() as i64;
            let last = (hi / r).floor() as i64;
            for c in first..=last {
                cells.insert(c);
            }
        }
        xs.push((1.0 / r).ln());
        ys.push((cells.len() as f64).ln());
    }
    Ok(ols_slope(&xs, &ys))
}
