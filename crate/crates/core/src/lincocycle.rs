//! Hölder linear cocycles over the skew-product: window-local generators
//! with values in GL(d, C), their iterates, exterior powers, adjoints,
//! fiber-bunching diagnostics, and strong stable/unstable holonomies.
//!
//! Every generator this crate builds depends on the base point only through
//! a finite symbol window (the bump profile uses the truncated shift metric,
//! so even it is window-local). On a strong stable pair the factors of the
//! two matrix products therefore coincide after finitely many steps and the
//! holonomy limit is exactly stationary; the Cauchy criterion below detects
//! that stationarity and surfaces genuine divergence as `NoConvergence`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{CocycleError, Result};
use crate::linalg::{
    self, compound_matrix, identity, op_norm, singular_values, try_inverse, CMat, C64,
};
use crate::skewprod::{
    dist_circle, dist_product, skew_step, CirclePoint, FiberMapFamily, FiberedPoint, SetSide,
};
use crate::symbolic::{self, BiSequence, MeasureSpec, METRIC_CUTOFF};

/// Fiber coordinates may be off by this much and still count as lying on a
/// strong stable/unstable leaf.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Hard cap on holonomy approximation steps before reporting divergence.
pub const HOLONOMY_N_MAX: usize = 10_000;

#[derive(Clone)]
enum GenKind {
    Constant {
        matrix: CMat,
    },
    DiagonalConstant {
        entries: Vec<C64>,
    },
    /// base * (id + psi(x) R) with psi a Hölder bump profile around a
    /// marked base point, vanishing outside the ball of the given radius.
    BumpPerturbed {
        base: CMat,
        perturbation: CMat,
        center: BiSequence,
        radius: f64,
        exponent: f64,
    },
    /// One matrix per (symbol window, fiber grid cell), interpolated
    /// linearly and periodically in the fiber coordinate.
    TableDriven {
        alphabet_size: usize,
        window: usize,
        t_grid: usize,
        tables: Arc<Vec<CMat>>,
    },
    Sum(Box<CocycleGenerator>, Box<CocycleGenerator>),
    ExteriorPower {
        inner: Box<CocycleGenerator>,
        l: usize,
    },
    /// Conjugate transpose of the inner generator one step back along the
    /// inner dynamics; generates the adjoint cocycle over inverse time.
    Adjoint {
        inner: Box<CocycleGenerator>,
        family: FiberMapFamily,
        inner_forward: bool,
    },
    /// Inverse of the inner generator one step back; generates the inverse
    /// cocycle over inverse time.
    InverseTime {
        inner: Box<CocycleGenerator>,
        family: FiberMapFamily,
        inner_forward: bool,
    },
    /// Stable-holonomy conjugation to the canonical-past representative:
    /// the value depends only on the future coordinates and the fiber
    /// coordinate. See `ustates::reduce_one_sided`.
    OneSidedReduced {
        inner: Box<CocycleGenerator>,
        family: FiberMapFamily,
        past_symbol: u8,
    },
}

/// A window-local map from (base point, fiber coordinate) to an invertible
/// complex matrix.
#[derive(Clone)]
pub struct CocycleGenerator {
    dim: usize,
    holder_alpha: f64,
    kind: GenKind,
}

impl std::fmt::Debug for CocycleGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            GenKind::Constant { .. } => "Constant",
            GenKind::DiagonalConstant { .. } => "DiagonalConstant",
            GenKind::BumpPerturbed { .. } => "BumpPerturbed",
            GenKind::TableDriven { .. } => "TableDriven",
            GenKind::Sum(..) => "Sum",
            GenKind::ExteriorPower { .. } => "ExteriorPower",
            GenKind::Adjoint { .. } => "Adjoint",
            GenKind::InverseTime { .. } => "InverseTime",
            GenKind::OneSidedReduced { .. } => "OneSidedReduced",
        };
        write!(f, "CocycleGenerator({name}, dim {})", self.dim)
    }
}

fn check_invertible(m: &CMat, what: &str) -> Result<()> {
    let sv = singular_values(m);
    let (max, min) = (sv[0], sv[sv.len() - 1]);
    // min.partial_cmp covers the NaN case a plain comparison would hide.
    if min.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || max / min > 1e12 {
        return Err(CocycleError::SingularValue(format!(
            "{what}: condition number exceeds 1e12"
        )));
    }
    Ok(())
}

impl CocycleGenerator {
    pub fn constant(matrix: CMat, holder_alpha: f64) -> Result<Self> {
        check_invertible(&matrix, "constant generator")?;
        Ok(CocycleGenerator {
            dim: matrix.nrows(),
            holder_alpha,
            kind: GenKind::Constant { matrix },
        })
    }

    pub fn diagonal(entries: Vec<C64>, holder_alpha: f64) -> Result<Self> {
        if entries.iter().any(|e| e.norm() == 0.0) {
            return Err(CocycleError::SingularValue(
                "diagonal generator with a zero entry".into(),
            ));
        }
        Ok(CocycleGenerator {
            dim: entries.len(),
            holder_alpha,
            kind: GenKind::DiagonalConstant { entries },
        })
    }

    /// Entries of the diagonal, when this is a (possibly constant) diagonal
    /// generator. Used by the exact spectrum path.
    pub fn diagonal_entries(&self) -> Option<Vec<C64>> {
        match &self.kind {
            GenKind::DiagonalConstant { entries } => Some(entries.clone()),
            GenKind::Constant { matrix } => {
                let d = matrix.nrows();
                let mut entries = Vec::with_capacity(d);
                for i in 0..d {
                    for j in 0..d {
                        if i != j && matrix[(i, j)].norm() > 0.0 {
                            return None;
                        }
                    }
                    entries.push(matrix[(i, i)]);
                }
                Some(entries)
            }
            _ => None,
        }
    }

    pub fn bump_perturbed(
        base: CMat,
        perturbation: CMat,
        center: BiSequence,
        radius: f64,
        holder_alpha: f64,
    ) -> Result<Self> {
        check_invertible(&base, "bump base matrix")?;
        if op_norm(&perturbation) >= 0.99 {
            return Err(CocycleError::InvalidParameter(
                "bump perturbation norm must stay below 1 so id + psi R is invertible".into(),
            ));
        }
        if radius <= 0.0 {
            return Err(CocycleError::InvalidParameter(
                "bump radius must be positive".into(),
            ));
        }
        Ok(CocycleGenerator {
            dim: base.nrows(),
            holder_alpha,
            kind: GenKind::BumpPerturbed {
                base,
                perturbation,
                center,
                radius,
                exponent: holder_alpha,
            },
        })
    }

    pub fn table_driven(
        alphabet_size: usize,
        window: usize,
        t_grid: usize,
        tables: Vec<CMat>,
        holder_alpha: f64,
    ) -> Result<Self> {
        let words = alphabet_size.pow(2 * window as u32 + 1);
        if t_grid == 0 || tables.len() != words * t_grid {
            return Err(CocycleError::InvalidParameter(format!(
                "table-driven generator needs {words} x {t_grid} tables, got {}",
                tables.len()
            )));
        }
        let dim = tables[0].nrows();
        for (i, m) in tables.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(CocycleError::InvalidParameter(
                    "table dimensions differ".into(),
                ));
            }
            check_invertible(m, &format!("table entry {i}"))?;
        }
        Ok(CocycleGenerator {
            dim,
            holder_alpha,
            kind: GenKind::TableDriven {
                alphabet_size,
                window,
                t_grid,
                tables: Arc::new(tables),
            },
        })
    }

    /// Table-driven term without the invertibility validation: meant as an
    /// additive perturbation inside `sum`, whose evaluation re-checks the
    /// combined value.
    pub fn table_driven_additive(
        alphabet_size: usize,
        window: usize,
        t_grid: usize,
        tables: Vec<CMat>,
        holder_alpha: f64,
    ) -> Result<Self> {
        let words = alphabet_size.pow(2 * window as u32 + 1);
        if t_grid == 0 || tables.len() != words * t_grid {
            return Err(CocycleError::InvalidParameter(format!(
                "table-driven generator needs {words} x {t_grid} tables, got {}",
                tables.len()
            )));
        }
        let dim = tables[0].nrows();
        Ok(CocycleGenerator {
            dim,
            holder_alpha,
            kind: GenKind::TableDriven {
                alphabet_size,
                window,
                t_grid,
                tables: Arc::new(tables),
            },
        })
    }

    /// Pointwise sum of two generators; values are re-checked for
    /// invertibility at evaluation time.
    pub fn sum(a: CocycleGenerator, b: CocycleGenerator) -> Result<Self> {
        if a.dim != b.dim {
            return Err(CocycleError::InvalidParameter(
                "summand dimensions differ".into(),
            ));
        }
        Ok(CocycleGenerator {
            dim: a.dim,
            holder_alpha: a.holder_alpha.min(b.holder_alpha),
            kind: GenKind::Sum(Box::new(a), Box::new(b)),
        })
    }

    /// Conjugates the generator by stable holonomies to the canonical-past
    /// representative; the result depends on the base point only through
    /// its future coordinates. Built by `ustates::reduce_one_sided`.
    pub fn one_sided_reduced(
        inner: CocycleGenerator,
        family: FiberMapFamily,
        past_symbol: u8,
    ) -> Self {
        CocycleGenerator {
            dim: inner.dim,
            holder_alpha: inner.holder_alpha,
            kind: GenKind::OneSidedReduced {
                inner: Box::new(inner),
                family,
                past_symbol,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn holder_alpha(&self) -> f64 {
        self.holder_alpha
    }

    /// Effective locality radius: the value at a point depends only on the
    /// symbols within this window (plus the fiber coordinate).
    pub fn window(&self) -> usize {
        match &self.kind {
            GenKind::Constant { .. } | GenKind::DiagonalConstant { .. } => 0,
            GenKind::BumpPerturbed { .. } => METRIC_CUTOFF as usize,
            GenKind::TableDriven { window, .. } => *window,
            GenKind::Sum(a, b) => a.window().max(b.window()),
            GenKind::ExteriorPower { inner, .. } => inner.window(),
            GenKind::Adjoint { inner, family, .. } | GenKind::InverseTime { inner, family, .. } => {
                inner.window() + family.window() + 1
            }
            GenKind::OneSidedReduced { inner, family, .. } => {
                inner.window() + 2 * family.window() + 2
            }
        }
    }

    /// The matrix attached to `(x, t)`. Deterministic, window-local.
    pub fn evaluate(&self, x: &BiSequence, t: CirclePoint) -> Result<CMat> {
        match &self.kind {
            GenKind::Constant { matrix } => Ok(matrix.clone()),
            GenKind::DiagonalConstant { entries } => Ok(linalg::diagonal(entries)),
            GenKind::BumpPerturbed {
                base,
                perturbation,
                center,
                radius,
                exponent,
            } => {
                let dist = symbolic::dist_sigma_capped(x, center, *radius);
                if dist >= *radius {
                    return Ok(base.clone());
                }
                let psi = (1.0 - dist / radius).powf(*exponent);
                let mut m = identity(base.nrows());
                m += perturbation * C64::new(psi, 0.0);
                Ok(base * m)
            }
            GenKind::TableDriven {
                alphabet_size,
                window,
                t_grid,
                tables,
            } => {
                let w = *window as i64;
                let mut word = 0usize;
                for k in -w..=w {
                    word = word * alphabet_size + x.coordinate(k) as usize;
                }
                let g = *t_grid;
                let scaled = t.value() * g as f64;
                let cell = (scaled.floor() as usize).min(g - 1);
                let frac = scaled - cell as f64;
                let m0 = &tables[word * g + cell];
                let m1 = &tables[word * g + (cell + 1) % g];
                let m = m0 * C64::new(1.0 - frac, 0.0) + m1 * C64::new(frac, 0.0);
                guard_interpolated(m)
            }
            GenKind::Sum(a, b) => {
                let m = a.evaluate(x, t)? + b.evaluate(x, t)?;
                guard_interpolated(m)
            }
            GenKind::ExteriorPower { inner, l } => Ok(compound_matrix(&inner.evaluate(x, t)?, *l)),
            GenKind::Adjoint {
                inner,
                family,
                inner_forward,
            } => {
                let p = FiberedPoint { base: x.clone(), t };
                let back = skew_step(family, &p, !inner_forward);
                Ok(inner.evaluate(&back.base, back.t)?.adjoint())
            }
            GenKind::InverseTime {
                inner,
                family,
                inner_forward,
            } => {
                let p = FiberedPoint { base: x.clone(), t };
                let back = skew_step(family, &p, !inner_forward);
                try_inverse(&inner.evaluate(&back.base, back.t)?)
            }
            GenKind::OneSidedReduced {
                inner,
                family,
                past_symbol,
            } => {
                // Canonical representative c of (x, t): same future, fixed
                // past, same chart fiber coordinate.
                let phi_x = canonical_past(x, *past_symbol);
                let c = FiberedPoint { base: phi_x, t };
                let a_val = inner.evaluate(&c.base, c.t)?;
                let f_c = skew_step(family, &c, true);
                let phi_fx = canonical_past(&symbolic::shift(x, 1), *past_symbol);
                let t_next =
                    crate::skewprod::base_holonomy_s(family, &f_c.base, &phi_fx, f_c.t, 1e-13)?;
                let c_next = FiberedPoint {
                    base: phi_fx,
                    t: t_next,
                };
                let inner_cocycle = Cocycle::new((**inner).clone(), family.clone());
                let h = strong_holonomy(&inner_cocycle, &f_c, &c_next, SetSide::Stable, 1e-12)?;
                Ok(h * a_val)
            }
        }
    }
}

/// The point with the same future coordinates and a constant past.
pub(crate) fn canonical_past(x: &BiSequence, symbol: u8) -> BiSequence {
    BiSequence::Spliced {
        past: Box::new(symbolic::make_fixed_point(symbol)),
        future: Box::new(x.clone()),
        offset: 0,
    }
}

/// Cheap invertibility guard for interpolated or summed values: rejects
/// matrices whose determinant vanishes relative to their scale.
fn guard_interpolated(m: CMat) -> Result<CMat> {
    let d = m.nrows();
    let scale = m.norm() / (d as f64).sqrt();
    let det = m.determinant().norm();
    if det < scale.powi(d as i32) * 1e-12 {
        return Err(CocycleError::SingularValue(
            "interpolated value numerically singular".into(),
        ));
    }
    Ok(m)
}

/// A linear cocycle: a generator together with the skew-product it flies
/// over and a time direction. The adjoint and inverse cocycles live over
/// the reversed dynamics; all iteration below is in the cocycle's own time.
#[derive(Debug, Clone)]
pub struct Cocycle {
    pub gen: CocycleGenerator,
    pub family: FiberMapFamily,
    reversed: bool,
}

impl Cocycle {
    pub fn new(gen: CocycleGenerator, family: FiberMapFamily) -> Self {
        Cocycle {
            gen,
            family,
            reversed: false,
        }
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    /// One step of the cocycle's own base dynamics.
    pub fn step(&self, p: &FiberedPoint) -> FiberedPoint {
        skew_step(&self.family, p, !self.reversed)
    }

    /// n steps of the cocycle's own base dynamics (n may be negative).
    pub fn step_n(&self, p: &FiberedPoint, n: i64) -> FiberedPoint {
        let mut q = p.clone();
        let fwd = (n > 0) != self.reversed;
        for _ in 0..n.unsigned_abs() {
            q = skew_step(&self.family, &q, fwd);
        }
        q
    }

    pub fn value(&self, p: &FiberedPoint) -> Result<CMat> {
        self.gen.evaluate(&p.base, p.t)
    }

    /// The n-step matrix: ordered product along the forward orbit for
    /// n > 0, identity at n = 0, inverse product along the backward orbit
    /// for n < 0.
    pub fn iterate(&self, p: &FiberedPoint, n: i64) -> Result<CMat> {
        let (m, log_scale) = self.iterate_scaled(p, n)?;
        Ok(m * C64::new(log_scale.exp(), 0.0))
    }

    /// Same product with scalar renormalization: returns (M, s) with the
    /// true product equal to `M * exp(s)`. Mandatory for long products;
    /// the raw and scaled paths agree in projective action.
    pub fn iterate_scaled(&self, p: &FiberedPoint, n: i64) -> Result<(CMat, f64)> {
        let d = self.dim();
        let mut m = identity(d);
        let mut log_scale = 0.0f64;
        let mut q = p.clone();
        if n >= 0 {
            for _ in 0..n {
                m = self.value(&q)? * m;
                q = self.step(&q);
                renormalize(&mut m, &mut log_scale);
            }
        } else {
            for _ in 0..(-n) {
                q = self.step_n(&q, -1);
                m = try_inverse(&self.value(&q)?)? * m;
                renormalize(&mut m, &mut log_scale);
            }
        }
        Ok((m, log_scale))
    }

    /// The adjoint cocycle over the inverse dynamics: value at p is the
    /// conjugate transpose of this cocycle's value one step back.
    pub fn adjoint(&self) -> Cocycle {
        Cocycle {
            gen: CocycleGenerator {
                dim: self.gen.dim,
                holder_alpha: self.gen.holder_alpha,
                kind: GenKind::Adjoint {
                    inner: Box::new(self.gen.clone()),
                    family: self.family.clone(),
                    inner_forward: !self.reversed,
                },
            },
            family: self.family.clone(),
            reversed: !self.reversed,
        }
    }

    /// The inverse cocycle over the inverse dynamics; its forward products
    /// are the negative-time products of this cocycle.
    pub fn inverse_cocycle(&self) -> Cocycle {
        Cocycle {
            gen: CocycleGenerator {
                dim: self.gen.dim,
                holder_alpha: self.gen.holder_alpha,
                kind: GenKind::InverseTime {
                    inner: Box::new(self.gen.clone()),
                    family: self.family.clone(),
                    inner_forward: !self.reversed,
                },
            },
            family: self.family.clone(),
            reversed: !self.reversed,
        }
    }

    /// The cocycle of l x l minors acting on the l-th exterior power.
    pub fn exterior_power(&self, l: usize) -> Result<Cocycle> {
        Ok(Cocycle {
            gen: exterior_power(&self.gen, l)?,
            family: self.family.clone(),
            reversed: self.reversed,
        })
    }
}

fn renormalize(m: &mut CMat, log_scale: &mut f64) {
    let n = m.norm();
    if !(1e-100..=1e100).contains(&n) {
        *m /= C64::new(n, 0.0);
        *log_scale += n.ln();
    }
}

/// Generator of l x l minors: dimension C(d, l), lexicographic index sets.
pub fn exterior_power(gen: &CocycleGenerator, l: usize) -> Result<CocycleGenerator> {
    let d = gen.dim();
    if l == 0 || l > d {
        return Err(CocycleError::InvalidParameter(format!(
            "exterior power {l} out of range for dimension {d}"
        )));
    }
    Ok(CocycleGenerator {
        dim: linalg::binomial(d, l),
        holder_alpha: gen.holder_alpha,
        kind: GenKind::ExteriorPower {
            inner: Box::new(gen.clone()),
            l,
        },
    })
}

/// Free-function form of `Cocycle::adjoint`.
pub fn adjoint_cocycle(gen: &CocycleGenerator, family: &FiberMapFamily) -> Cocycle {
    Cocycle::new(gen.clone(), family.clone()).adjoint()
}

/// Lower estimate of the alpha-Hölder norm: sup of the value norms plus the
/// max difference quotient over sampled pairs. The sample stream is nested
/// in the seed, so increasing `samples` never decreases the estimate.
pub fn holder_norm_estimate(
    gen: &CocycleGenerator,
    spec: &MeasureSpec,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    assert!(samples >= 2, "need at least two sample points");
    let alpha = gen.holder_alpha();
    let mut points: Vec<(FiberedPoint, CMat)> = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = symbolic::sample_point(spec, symbolic::derive_seed(seed, i as u64));
        let t =
            CirclePoint::new(spec.sample_fiber(symbolic::derive_seed(seed, 1_000_000 + i as u64)));
        let p = FiberedPoint { base: x, t };
        let m = gen.evaluate(&p.base, p.t)?;
        points.push((p, m));
    }
    let mut sup = 0.0f64;
    for (_, m) in &points {
        sup = sup.max(op_norm(m));
    }
    let mut quot = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let dist = dist_product(&points[i].0, &points[j].0);
            if dist < 1e-15 {
                continue;
            }
            let diff = op_norm(&(&points[i].1 - &points[j].1));
            quot = quot.max(diff / dist.powf(alpha));
        }
    }
    Ok(sup + quot)
}

#[derive(Debug, Clone, Serialize)]
pub struct BunchingReport {
    /// n -> max over sampled points of log(||A^n|| ||(A^n)^-1|| lambda^(n alpha)),
    /// stored as logs to survive large n.
    pub log_curve: Vec<(usize, f64)>,
    /// Log-linear regression slope on the upper half of the curve.
    pub slope: f64,
    pub passes: bool,
}

/// Fiber-bunching margin curve with lambda = 1/2. Passing means the curve
/// admits a geometric decay fit on [N/2, N] (negative log slope).
pub fn check_fiber_bunching(
    cocycle: &Cocycle,
    spec: &MeasureSpec,
    n_steps: usize,
    samples: usize,
    seed: u64,
) -> Result<BunchingReport> {
    assert!(n_steps >= 4);
    let lambda_log = 0.5f64.ln();
    let alpha = cocycle.gen.holder_alpha();
    let mut log_curve = vec![(0usize, f64::NEG_INFINITY); n_steps];
    for s in 0..samples {
        let x = symbolic::sample_point(spec, symbolic::derive_seed(seed, s as u64));
        let t = spec.sample_fiber(symbolic::derive_seed(seed, 500_000 + s as u64));
        let mut p = FiberedPoint::new(x, t);
        let mut m = identity(cocycle.dim());
        let mut log_scale = 0.0f64;
        for n in 1..=n_steps {
            m = cocycle.value(&p)? * m;
            p = cocycle.step(&p);
            renormalize(&mut m, &mut log_scale);
            let sv = singular_values(&m);
            let log_val = sv[0].ln() - sv[sv.len() - 1].ln() + n as f64 * alpha * lambda_log;
            let slot = &mut log_curve[n - 1];
            *slot = (n, slot.1.max(log_val));
        }
    }
    let lo = (n_steps / 2).max(1);
    let pts: Vec<(f64, f64)> = log_curve[lo - 1..]
        .iter()
        .map(|(n, v)| (*n as f64, *v))
        .collect();
    let slope = regression_slope(&pts);
    Ok(BunchingReport {
        log_curve,
        slope,
        passes: slope < 0.0,
    })
}

pub(crate) fn regression_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Strong holonomy between points of one strong stable (resp. unstable)
/// leaf: the limit of `A^n(q)^-1 A^n(p)` as n -> +infinity (resp.
/// -infinity), truncated by a Cauchy criterion.
///
/// Fiber bunching is the standing sufficient condition for these limits;
/// the implementation does not gate on it and instead reports
/// `NoConvergence` whenever the approximants fail to settle.
pub fn strong_holonomy(
    cocycle: &Cocycle,
    p: &FiberedPoint,
    q: &FiberedPoint,
    side: SetSide,
    tol: f64,
) -> Result<CMat> {
    match side {
        SetSide::Stable => strong_stable_holonomy(cocycle, p, q, tol),
        SetSide::Unstable => strong_stable_holonomy(&cocycle.inverse_cocycle(), p, q, tol),
    }
}

/// Strong-set membership in the cocycle's own time direction.
fn check_strong_stable_member(cocycle: &Cocycle, p: &FiberedPoint, q: &FiberedPoint) -> Result<()> {
    let absolute_stable = !cocycle.reversed;
    let base_ok = if absolute_stable {
        symbolic::in_local_stable(&p.base, &q.base)
    } else {
        symbolic::past_agree_strict(&p.base, &q.base)
    };
    if !base_ok {
        return Err(CocycleError::PreconditionViolation(
            "base points are not on the same local stable/unstable set".into(),
        ));
    }
    let image = if absolute_stable {
        crate::skewprod::base_holonomy_s(&cocycle.family, &p.base, &q.base, p.t, 1e-13)?
    } else {
        crate::skewprod::base_holonomy_u(&cocycle.family, &p.base, &q.base, p.t, 1e-13)?
    };
    if dist_circle(q.t, image) > MEMBERSHIP_TOL {
        return Err(CocycleError::PreconditionViolation(format!(
            "fiber coordinate off the strong leaf by {:.3e}",
            dist_circle(q.t, image)
        )));
    }
    Ok(())
}

fn strong_stable_holonomy(
    cocycle: &Cocycle,
    p: &FiberedPoint,
    q: &FiberedPoint,
    tol: f64,
) -> Result<CMat> {
    // Identical points: holonomy is the identity, exactly.
    if p.t == q.t
        && p.base
            .agrees_on(&q.base, -4 * METRIC_CUTOFF, 4 * METRIC_CUTOFF)
    {
        return Ok(identity(cocycle.dim()));
    }
    check_strong_stable_member(cocycle, p, q)?;

    // Telescoped limit: h_{n+1} = h_n + A^n(q)^{-1} (V_q^{-1} V_p - id)
    // A^n(p). The increment vanishes identically once the symbol windows of
    // the two orbits coincide, so the noise of the (badly conditioned) long
    // products never enters after stationarity. No Cauchy exit is allowed
    // before the windows can coincide.
    let d = cocycle.dim();
    let n_min = cocycle.gen.window() + 2;
    let mut h = identity(d);
    let mut prod_p = identity(d);
    let mut prod_q_inv = identity(d);
    let (mut log_p, mut log_q_inv) = (0.0f64, 0.0f64);
    let (mut cp, mut cq) = (p.clone(), q.clone());
    let mut last_delta = f64::INFINITY;
    for n in 1..=HOLONOMY_N_MAX {
        let vp = cocycle.value(&cp)?;
        let vq = cocycle.value(&cq)?;
        if vp != vq {
            let dev = try_inverse(&vq)? * &vp - identity(d);
            let log_mag = (prod_q_inv.norm() * dev.norm() * prod_p.norm()).ln() + log_p + log_q_inv;
            if log_mag > 230.0 {
                // The deviation is amplified beyond floating-point range:
                // the limit, if any, is not representable.
                return Err(CocycleError::NoConvergence {
                    n_max: n,
                    last_delta,
                });
            }
            let delta = &prod_q_inv * dev * &prod_p * C64::new((log_p + log_q_inv).exp(), 0.0);
            last_delta = delta.norm();
            h += delta;
        } else {
            last_delta = 0.0;
        }
        prod_p = vp * prod_p;
        prod_q_inv *= try_inverse(&vq)?;
        cp = cocycle.step(&cp);
        cq = cocycle.step(&cq);
        renormalize(&mut prod_p, &mut log_p);
        renormalize(&mut prod_q_inv, &mut log_q_inv);
        if last_delta < tol && n >= n_min {
            return Ok(h);
        }
    }
    Err(CocycleError::NoConvergence {
        n_max: HOLONOMY_N_MAX,
        last_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, diagonal, from_real, random_unitary};
    use crate::symbolic::{bracket, make_fixed_point, make_homoclinic, sample_point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn spec2() -> MeasureSpec {
        MeasureSpec::bernoulli(vec![0.5, 0.5]).unwrap()
    }

    fn rot_family(seed: u64) -> FiberMapFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        FiberMapFamily::rotation(2, 1, angles).unwrap()
    }

    fn cx(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let a = from_real(&[vec![2.0, 1.0], vec![0.0, 0.5]]);
        let gen = CocycleGenerator::constant(a.clone(), 1.0).unwrap();
        let x = sample_point(&spec2(), 1);
        let m = gen.evaluate(&x, CirclePoint::new(0.9)).unwrap();
        assert_eq!(m, a);
    }

    #[test]
    fn bump_profile_values() {
        let a = from_real(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let r = from_real(&[vec![0.0, 0.05], vec![0.05, 0.0]]);
        let (z, _) = make_homoclinic(&[1], 0).unwrap();
        let gen =
            CocycleGenerator::bump_perturbed(a.clone(), r.clone(), z.clone(), 0.05, 1.0).unwrap();

        // Far from the bump center: the base matrix.
        let p = make_fixed_point(0);
        let val = gen.evaluate(&p, CirclePoint::new(0.2)).unwrap();
        assert_eq!(val, a);

        // At the center: base * (id + R) exactly.
        let val = gen.evaluate(&z, CirclePoint::new(0.2)).unwrap();
        let expect = &a * (identity(2) + &r);
        assert!((val - expect).norm() < 1e-14);
    }

    #[test]
    fn iterate_basics() {
        let family = rot_family(2);
        let a = from_real(&[vec![1.5, 0.2], vec![0.0, 0.9]]);
        let coc = Cocycle::new(CocycleGenerator::constant(a.clone(), 1.0).unwrap(), family);
        let p = FiberedPoint::new(sample_point(&spec2(), 3), 0.1);

        let id = coc.iterate(&p, 0).unwrap();
        assert_eq!(id, identity(2));

        let a3 = coc.iterate(&p, 3).unwrap();
        assert!((a3 - &a * &a * &a).norm() < 1e-12);
    }

    fn random_table_cocycle(seed: u64, dim: usize, spread: f64) -> Cocycle {
        let family = rot_family(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5555);
        let tables: Vec<CMat> = (0..8)
            .map(|_| {
                random_unitary(dim, &mut rng) + complex_gaussian(dim, dim, &mut rng) * cx(spread)
            })
            .collect();
        let gen = CocycleGenerator::table_driven(2, 1, 1, tables, 1.0).unwrap();
        Cocycle::new(gen, family)
    }

    #[test]
    fn iterate_inverse_law() {
        // A^{-n}(p) * A^n(f^{-n} p) = id, against the brute-force product.
        let coc = random_table_cocycle(5, 2, 0.2);
        let p = FiberedPoint::new(sample_point(&spec2(), 7), 0.4);
        for n in [1i64, 5, 17] {
            let back = coc.iterate(&p, -n).unwrap();
            let fwd = coc.iterate(&coc.step_n(&p, -n), n).unwrap();
            assert!((back * fwd - identity(2)).norm() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn cocycle_law() {
        let coc = random_table_cocycle(8, 2, 0.15);
        let p = FiberedPoint::new(sample_point(&spec2(), 9), 0.8);
        for (m, n) in [(5i64, 7i64), (-4, 9), (12, -3), (-6, -8), (50, 50)] {
            let lhs = coc.iterate(&p, m + n).unwrap();
            let rhs = coc.iterate(&coc.step_n(&p, n), m).unwrap() * coc.iterate(&p, n).unwrap();
            let rel = (&lhs - &rhs).norm() / lhs.norm();
            assert!(rel < 1e-10, "m={m} n={n} rel={rel}");
        }
    }

    #[test]
    fn scaled_and_raw_agree_projectively() {
        let family = rot_family(10);
        let gen = CocycleGenerator::diagonal(vec![cx(2.0), cx(0.5)], 1.0).unwrap();
        let coc = Cocycle::new(gen, family);
        let p = FiberedPoint::new(sample_point(&spec2(), 11), 0.0);
        let raw = coc.iterate(&p, 40).unwrap();
        let (m, s) = coc.iterate_scaled(&p, 40).unwrap();
        let rebuilt = m * cx(s.exp());
        assert!((raw - &rebuilt).norm() / rebuilt.norm() < 1e-12);
    }

    #[test]
    fn holder_norm_constant_is_exact() {
        let a = from_real(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let gen = CocycleGenerator::constant(a, 1.0).unwrap();
        let est = holder_norm_estimate(&gen, &spec2(), 16, 42).unwrap();
        assert!((est - 3.0).abs() < 1e-12);
    }

    #[test]
    fn holder_norm_monotone_in_samples() {
        let a = from_real(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let r = from_real(&[vec![0.0, 0.05], vec![0.05, 0.0]]);
        let (z, _) = make_homoclinic(&[1], 0).unwrap();
        let gen = CocycleGenerator::bump_perturbed(a, r, z, 0.4, 1.0).unwrap();
        let e1 = holder_norm_estimate(&gen, &spec2(), 8, 7).unwrap();
        let e2 = holder_norm_estimate(&gen, &spec2(), 16, 7).unwrap();
        let e3 = holder_norm_estimate(&gen, &spec2(), 32, 7).unwrap();
        assert!(e2 >= e1 && e3 >= e2);
    }

    #[test]
    fn holder_norm_bump_shrinks_with_perturbation() {
        let a = from_real(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let (z, _) = make_homoclinic(&[1], 0).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001] {
            let r = from_real(&[vec![0.0, eps], vec![eps, 0.0]]);
            let gen = CocycleGenerator::bump_perturbed(a.clone(), r, z.clone(), 0.4, 1.0).unwrap();
            let est = holder_norm_estimate(&gen, &spec2(), 24, 7).unwrap();
            assert!(est <= prev);
            prev = est;
        }
        assert!((prev - 2.0).abs() < 0.05);
    }

    #[test]
    fn bunching_verdicts() {
        let family = rot_family(12);
        let spec = spec2();

        // Conformal: curve = lambda^(n alpha), passes.
        let u = random_unitary(2, &mut ChaCha8Rng::seed_from_u64(13));
        let coc = Cocycle::new(CocycleGenerator::constant(u, 1.0).unwrap(), family.clone());
        let rep = check_fiber_bunching(&coc, &spec, 20, 3, 1).unwrap();
        assert!(rep.passes);
        assert!((rep.slope - 0.5f64.ln()).abs() < 1e-9);

        // diag(2, 1/2): curve = 2^n, fails.
        let coc = Cocycle::new(
            CocycleGenerator::diagonal(vec![cx(2.0), cx(0.5)], 1.0).unwrap(),
            family.clone(),
        );
        let rep = check_fiber_bunching(&coc, &spec, 20, 3, 1).unwrap();
        assert!(!rep.passes);
        assert!((rep.slope - 2.0f64.ln()).abs() < 1e-9);

        // diag(1.2, 1/1.2): curve = (1.44/2)^n, passes.
        let coc = Cocycle::new(
            CocycleGenerator::diagonal(vec![cx(1.2), cx(1.0 / 1.2)], 1.0).unwrap(),
            family,
        );
        let rep = check_fiber_bunching(&coc, &spec, 20, 3, 1).unwrap();
        assert!(rep.passes);
        assert!((rep.slope - (1.44f64 / 2.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn exterior_power_values() {
        let gen = CocycleGenerator::diagonal(vec![cx(2.0), cx(3.0), cx(5.0)], 1.0).unwrap();
        let x = sample_point(&spec2(), 14);
        let t = CirclePoint::new(0.5);

        let top = exterior_power(&gen, 3).unwrap();
        let v = top.evaluate(&x, t).unwrap();
        assert_eq!(v.nrows(), 1);
        assert!((v[(0, 0)] - cx(30.0)).norm() < 1e-12);

        let mid = exterior_power(&gen, 2).unwrap();
        let v = mid.evaluate(&x, t).unwrap();
        let expect = diagonal(&[cx(6.0), cx(10.0), cx(15.0)]);
        assert!((v - expect).norm() < 1e-12);
    }

    #[test]
    fn exterior_power_of_iterate_is_iterate_of_power() {
        let coc = random_table_cocycle(16, 4, 0.1);
        let p = FiberedPoint::new(sample_point(&spec2(), 17), 0.25);
        for l in 1..=3usize {
            let pow = coc.exterior_power(l).unwrap();
            let lhs = pow.iterate(&p, 6).unwrap();
            let rhs = compound_matrix(&coc.iterate(&p, 6).unwrap(), l);
            assert!((&lhs - &rhs).norm() < 1e-9 * rhs.norm().max(1.0), "l = {l}");
        }
    }

    #[test]
    fn adjoint_of_constant() {
        let family = rot_family(18);
        // Hermitian constant: adjoint generator is the same matrix.
        let h = from_real(&[vec![2.0, 0.3], vec![0.3, 1.0]]);
        let coc = Cocycle::new(
            CocycleGenerator::constant(h.clone(), 1.0).unwrap(),
            family.clone(),
        );
        let adj = coc.adjoint();
        assert!(adj.is_reversed());
        let p = FiberedPoint::new(sample_point(&spec2(), 19), 0.6);
        assert!((adj.value(&p).unwrap() - &h).norm() < 1e-14);

        // General constant: adjoint generator is the conjugate transpose.
        let a = random_unitary(2, &mut ChaCha8Rng::seed_from_u64(20))
            + complex_gaussian(2, 2, &mut ChaCha8Rng::seed_from_u64(200)) * cx(0.2);
        let coc = Cocycle::new(CocycleGenerator::constant(a.clone(), 1.0).unwrap(), family);
        let adj = coc.adjoint();
        assert!((adj.value(&p).unwrap() - a.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn adjoint_iterates_match_transposed_products() {
        // (A*)^n over inverse time equals (A^n at f^{-n} p)^H.
        let coc = random_table_cocycle(21, 3, 0.15);
        let adj = coc.adjoint();
        let p = FiberedPoint::new(sample_point(&spec2(), 23), 0.35);
        for n in [1i64, 4, 9] {
            let lhs = adj.iterate(&p, n).unwrap();
            let back = coc.step_n(&p, -n);
            let rhs = coc.iterate(&back, n).unwrap().adjoint();
            assert!(
                (&lhs - &rhs).norm() < 1e-10 * rhs.norm().max(1.0),
                "n = {n}"
            );
        }
    }

    fn stable_pair_for(coc: &Cocycle, seed: u64, t: f64) -> (FiberedPoint, FiberedPoint) {
        let x = sample_point(&spec2(), seed);
        let mut ov = BTreeMap::new();
        ov.insert(0i64, x.coordinate(0));
        let cand = symbolic::sample_point_with_overrides(&spec2(), seed ^ 0xabcd, ov);
        let y = bracket(&x, &cand).unwrap();
        let t = CirclePoint::new(t);
        let ht = crate::skewprod::base_holonomy_s(&coc.family, &x, &y, t, 1e-14).unwrap();
        (FiberedPoint { base: x, t }, FiberedPoint { base: y, t: ht })
    }

    fn bump_cocycle(seed: u64) -> Cocycle {
        let family = rot_family(seed);
        let a = from_real(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let r = from_real(&[vec![0.0, 0.05], vec![0.05, 0.0]]);
        let (z, _) = make_homoclinic(&[1], 0).unwrap();
        let gen = CocycleGenerator::bump_perturbed(a, r, z, 0.05, 1.0).unwrap();
        Cocycle::new(gen, family)
    }

    #[test]
    fn holonomy_identity_cases() {
        let family = rot_family(30);
        let gen =
            CocycleGenerator::constant(from_real(&[vec![1.0, 0.3], vec![0.1, 0.8]]), 1.0).unwrap();
        let coc = Cocycle::new(gen, family);
        let (p, q) = stable_pair_for(&coc, 44, 0.3);
        // Same point: exact identity.
        let h = strong_holonomy(&coc, &p, &p, SetSide::Stable, 1e-12).unwrap();
        assert_eq!(h, identity(2));
        // Constant generator: products cancel for any valid pair.
        let h = strong_holonomy(&coc, &p, &q, SetSide::Stable, 1e-12).unwrap();
        assert!((h - identity(2)).norm() < 1e-11);
    }

    #[test]
    fn holonomy_rejects_non_members() {
        let coc = bump_cocycle(31);
        let (p, _) = stable_pair_for(&coc, 45, 0.3);
        let bad = FiberedPoint::new(make_fixed_point(1), 0.0);
        assert!(matches!(
            strong_holonomy(&coc, &p, &bad, SetSide::Stable, 1e-10),
            Err(CocycleError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn holonomy_equivariance_property() {
        // H^s_{f^j p, f^j q} = A^j(q) H^s_{p,q} A^j(p)^{-1}.
        let coc = bump_cocycle(32);
        let (p, q) = stable_pair_for(&coc, 33, 0.77);
        let tol = 1e-11;
        let h = strong_holonomy(&coc, &p, &q, SetSide::Stable, tol).unwrap();
        for j in 1..=5i64 {
            let hp = strong_holonomy(
                &coc,
                &coc.step_n(&p, j),
                &coc.step_n(&q, j),
                SetSide::Stable,
                tol,
            )
            .unwrap();
            let rhs = coc.iterate(&q, j).unwrap()
                * &h
                * try_inverse(&coc.iterate(&p, j).unwrap()).unwrap();
            assert!(
                (&hp - &rhs).norm() < 10.0 * tol * rhs.norm().max(1.0),
                "j = {j}, diff = {}",
                (&hp - &rhs).norm()
            );
        }
    }

    #[test]
    fn holonomy_composition_property() {
        let coc = bump_cocycle(34);
        let (p, q) = stable_pair_for(&coc, 35, 0.77);
        // Third point on the same leaf.
        let mut ov = BTreeMap::new();
        ov.insert(0i64, p.base.coordinate(0));
        let cand = symbolic::sample_point_with_overrides(&spec2(), 36, ov);
        let zb = bracket(&p.base, &cand).unwrap();
        let zt = crate::skewprod::base_holonomy_s(&coc.family, &p.base, &zb, p.t, 1e-14).unwrap();
        let z = FiberedPoint { base: zb, t: zt };

        let tol = 1e-11;
        let h_pq = strong_holonomy(&coc, &p, &q, SetSide::Stable, tol).unwrap();
        let h_pz = strong_holonomy(&coc, &p, &z, SetSide::Stable, tol).unwrap();
        let h_zq = strong_holonomy(&coc, &z, &q, SetSide::Stable, tol).unwrap();
        assert!((&h_zq * &h_pz - &h_pq).norm() < 10.0 * tol);
    }

    #[test]
    fn holonomy_adjoint_duality() {
        // H^{u, A*}_{p,q} = (H^{s, A}_{q,p})^H on stable pairs of the
        // forward dynamics (= unstable pairs of the inverse dynamics).
        let coc = bump_cocycle(37);
        let (p, q) = stable_pair_for(&coc, 38, 0.77);
        let adj = coc.adjoint();
        let tol = 1e-11;
        let lhs = strong_holonomy(&adj, &p, &q, SetSide::Unstable, tol).unwrap();
        let rhs = strong_holonomy(&coc, &q, &p, SetSide::Stable, tol)
            .unwrap()
            .adjoint();
        assert!(
            (&lhs - &rhs).norm() < 10.0 * tol,
            "diff = {}",
            (&lhs - &rhs).norm()
        );
    }

    #[test]
    fn holonomy_of_exterior_power() {
        let family = rot_family(39);
        let a = from_real(&[
            vec![2.0, 0.1, 0.0],
            vec![0.0, 1.1, 0.1],
            vec![0.0, 0.0, 0.4],
        ]);
        let r = from_real(&[
            vec![0.0, 0.04, 0.03],
            vec![0.04, 0.0, 0.05],
            vec![0.03, 0.05, 0.0],
        ]);
        let (z, _) = make_homoclinic(&[1], 0).unwrap();
        let gen = CocycleGenerator::bump_perturbed(a, r, z, 0.05, 1.0).unwrap();
        let coc = Cocycle::new(gen, family);
        let (p, q) = stable_pair_for(&coc, 40, 0.2);
        let tol = 1e-11;
        let h = strong_holonomy(&coc, &p, &q, SetSide::Stable, tol).unwrap();
        let pow = coc.exterior_power(2).unwrap();
        let hp = strong_holonomy(&pow, &p, &q, SetSide::Stable, tol).unwrap();
        let expect = compound_matrix(&h, 2);
        assert!((&hp - &expect).norm() < 1e-8);
    }

    #[test]
    fn holonomy_diverges_off_leaf() {
        // A fiber offset below the membership tolerance but nonzero, with a
        // strongly non-conformal t-dependent generator: the approximants
        // keep drifting and the Cauchy criterion must fail.
        let family = rot_family(41);
        let mut tables = Vec::new();
        for w in 0..2 {
            for c in 0..8 {
                let th = 0.7 * (c as f64 / 8.0) + 0.3 * w as f64;
                let rot = from_real(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]);
                tables.push(&rot * diagonal(&[cx(3.0), cx(1.0 / 3.0)]));
            }
        }
        let gen = CocycleGenerator::table_driven(2, 0, 8, tables, 1.0).unwrap();
        let coc = Cocycle::new(gen, family);
        let x = sample_point(&spec2(), 42);
        let mut ov = BTreeMap::new();
        ov.insert(0i64, x.coordinate(0));
        let cand = symbolic::sample_point_with_overrides(&spec2(), 43, ov);
        let y = bracket(&x, &cand).unwrap();
        let t = CirclePoint::new(0.2);
        let p = FiberedPoint { base: x, t };
        let q = FiberedPoint {
            base: y,
            t: CirclePoint::new(t.value() + 5e-9),
        };
        assert!(matches!(
            strong_holonomy(&coc, &p, &q, SetSide::Stable, 1e-12),
            Err(CocycleError::NoConvergence { .. })
        ));
    }

    #[test]
    fn table_driven_rejects_singular_entries() {
        let sing = from_real(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            CocycleGenerator::table_driven(2, 0, 1, vec![sing.clone(), sing], 1.0),
            Err(CocycleError::SingularValue(_))
        ));
    }
}
