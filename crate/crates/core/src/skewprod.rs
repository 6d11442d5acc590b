//! Partially hyperbolic skew-products over the shift with circle fiber.
//!
//! Fiber maps are window-local: the circle diffeomorphism attached to a base
//! point depends only on the symbols in `[-w, w]`. Against the `2^-|k|` base
//! metric this makes the family Lipschitz in the base point and, more
//! importantly, makes the stable/unstable base holonomies exactly computable:
//! the limit defining them is stationary once the windows of the two base
//! points coincide.

use serde::{Deserialize, Serialize};

use crate::error::{CocycleError, Result};
use crate::symbolic::{self, shift, BiSequence, MeasureSpec};

/// A point of the circle R/Z, kept reduced to [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(t: f64) -> Self {
        CirclePoint(t.rem_euclid(1.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Distance on R/Z.
pub fn dist_circle(a: CirclePoint, b: CirclePoint) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(1.0 - d)
}

/// A pair (base point, circle coordinate).
#[derive(Debug, Clone)]
pub struct FiberedPoint {
    pub base: BiSequence,
    pub t: CirclePoint,
}

impl FiberedPoint {
    pub fn new(base: BiSequence, t: f64) -> Self {
        FiberedPoint {
            base,
            t: CirclePoint::new(t),
        }
    }
}

/// Distance on the product: shift metric plus circle metric.
pub fn dist_product(p: &FiberedPoint, q: &FiberedPoint) -> f64 {
    symbolic::dist_sigma(&p.base, &q.base) + dist_circle(p.t, q.t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FiberKind {
    /// Rigid rotations: derivative identically one, certified neutral center.
    Rotation { angles: Vec<f64> },
    /// t -> t + angle + a sin(2 pi t) / (2 pi). Requires |2 pi a| < 1.
    PerturbedRotation { angles: Vec<f64>, amplitude: f64 },
}

/// A window-local family of orientation-preserving circle diffeomorphisms,
/// indexed by the symbol word `x_{-w..w}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberMapFamily {
    alphabet_size: usize,
    window: usize,
    kind: FiberKind,
}

const TWO_PI: f64 = std::f64::consts::TAU;

impl FiberMapFamily {
    pub fn rotation(alphabet_size: usize, window: usize, angles: Vec<f64>) -> Result<Self> {
        let expected = alphabet_size.pow(2 * window as u32 + 1);
        if angles.len() != expected {
            return Err(CocycleError::InvalidParameter(format!(
                "rotation family with window {window} over {alphabet_size} symbols needs {expected} angles, got {}",
                angles.len()
            )));
        }
        Ok(FiberMapFamily {
            alphabet_size,
            window,
            kind: FiberKind::Rotation { angles },
        })
    }

    /// Rotation family with a single angle, independent of the base point.
    pub fn constant_rotation(alphabet_size: usize, angle: f64) -> Self {
        FiberMapFamily {
            alphabet_size,
            window: 0,
            kind: FiberKind::Rotation {
                angles: vec![angle; alphabet_size],
            },
        }
    }

    pub fn perturbed_rotation(
        alphabet_size: usize,
        window: usize,
        angles: Vec<f64>,
        amplitude: f64,
    ) -> Result<Self> {
        let expected = alphabet_size.pow(2 * window as u32 + 1);
        if angles.len() != expected {
            return Err(CocycleError::InvalidParameter(format!(
                "family needs {expected} angles, got {}",
                angles.len()
            )));
        }
        if (TWO_PI * amplitude).abs() >= 1.0 {
            return Err(CocycleError::InvalidParameter(format!(
                "perturbation amplitude {amplitude} violates |2 pi a| < 1"
            )));
        }
        Ok(FiberMapFamily {
            alphabet_size,
            window,
            kind: FiberKind::PerturbedRotation { angles, amplitude },
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn kind(&self) -> &FiberKind {
        &self.kind
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self.kind, FiberKind::Rotation { .. })
    }

    /// Index of the word `x_{-w..w}` into the parameter tables.
    fn word_index(&self, x: &BiSequence) -> usize {
        let w = self.window as i64;
        let mut idx = 0usize;
        for k in -w..=w {
            idx = idx * self.alphabet_size + x.coordinate(k) as usize;
        }
        idx
    }

    fn angle(&self, x: &BiSequence) -> f64 {
        match &self.kind {
            FiberKind::Rotation { angles } | FiberKind::PerturbedRotation { angles, .. } => {
                angles[self.word_index(x)]
            }
        }
    }

    /// The fiber map attached to base point `x`, applied to `t`.
    pub fn apply(&self, x: &BiSequence, t: CirclePoint) -> CirclePoint {
        let alpha = self.angle(x);
        match &self.kind {
            FiberKind::Rotation { .. } => CirclePoint::new(t.0 + alpha),
            FiberKind::PerturbedRotation { amplitude, .. } => {
                CirclePoint::new(t.0 + alpha + amplitude * (TWO_PI * t.0).sin() / TWO_PI)
            }
        }
    }

    /// Inverse of the fiber map attached to `x`.
    pub fn apply_inverse(&self, x: &BiSequence, t: CirclePoint) -> CirclePoint {
        let alpha = self.angle(x);
        match &self.kind {
            FiberKind::Rotation { .. } => CirclePoint::new(t.0 - alpha),
            FiberKind::PerturbedRotation { amplitude, .. } => {
                // Solve s + alpha + a sin(2 pi s)/(2 pi) = t (mod 1) by
                // Newton iteration on the circle; the map is monotone with
                // derivative in (1 - |a|, 1 + |a|).
                let a = *amplitude;
                let mut s = t.0 - alpha;
                for _ in 0..64 {
                    let image = s + alpha + a * (TWO_PI * s).sin() / TWO_PI;
                    let mut err = (image - t.0).rem_euclid(1.0);
                    if err > 0.5 {
                        err -= 1.0;
                    }
                    if err.abs() < 1e-15 {
                        break;
                    }
                    let deriv = 1.0 + a * (TWO_PI * s).cos();
                    s -= err / deriv;
                }
                CirclePoint::new(s)
            }
        }
    }

    /// Derivative of the fiber map attached to `x` at `t`.
    pub fn derivative(&self, _x: &BiSequence, t: CirclePoint) -> f64 {
        match &self.kind {
            FiberKind::Rotation { .. } => 1.0,
            FiberKind::PerturbedRotation { amplitude, .. } => {
                1.0 + amplitude * (TWO_PI * t.0).cos()
            }
        }
    }
}

/// One forward (n = 1) or backward (n = -1) step of the skew-product.
pub fn skew_step(family: &FiberMapFamily, p: &FiberedPoint, forward: bool) -> FiberedPoint {
    if forward {
        FiberedPoint {
            t: family.apply(&p.base, p.t),
            base: shift(&p.base, 1),
        }
    } else {
        let prev_base = shift(&p.base, -1);
        let t = family.apply_inverse(&prev_base, p.t);
        FiberedPoint { base: prev_base, t }
    }
}

/// The n-th iterate of the skew-product applied to `p`.
pub fn skew_iterate(family: &FiberMapFamily, p: &FiberedPoint, n: i64) -> FiberedPoint {
    let mut q = p.clone();
    for _ in 0..n.unsigned_abs() {
        q = skew_step(family, &q, n > 0);
    }
    q
}

/// The fiber composition f^n at base point `x` applied to `t`: forward
/// composition for n > 0, identity at n = 0, inverse composition for n < 0.
pub fn fiber_iterate(
    family: &FiberMapFamily,
    x: &BiSequence,
    n: i64,
    t: CirclePoint,
) -> CirclePoint {
    let mut t = t;
    if n >= 0 {
        for j in 0..n {
            t = family.apply(&shift(x, j), t);
        }
    } else {
        for j in 1..=(-n) {
            t = family.apply_inverse(&shift(x, -j), t);
        }
    }
    t
}

#[derive(Debug, Clone, Serialize)]
pub struct MostlyNeutralReport {
    /// Max over sampled orbits and grid points of the fiber derivative of
    /// the n-step composition, n up to `n_max` in both time directions.
    pub bound_estimate: f64,
    pub c_config: f64,
    pub passes: bool,
}

/// Estimates the mostly-neutral bound `sup_n ||D f^n_x||` by chain rule
/// along sampled orbits. Rotation families return exactly one without
/// sampling: they are isometries.
pub fn check_mostly_neutral(
    family: &FiberMapFamily,
    spec: &MeasureSpec,
    n_max: usize,
    samples: usize,
    seed: u64,
    c_config: f64,
) -> MostlyNeutralReport {
    if family.is_rotation() {
        return MostlyNeutralReport {
            bound_estimate: 1.0,
            c_config,
            passes: 1.0 <= c_config,
        };
    }
    let grid = 16;
    let mut bound: f64 = 1.0;
    for s in 0..samples {
        let x = symbolic::sample_point(spec, symbolic::derive_seed(seed, s as u64));
        for g in 0..grid {
            let t0 = CirclePoint::new(g as f64 / grid as f64);
            // Forward chain rule.
            let mut t = t0;
            let mut log_d = 0.0f64;
            for j in 0..n_max as i64 {
                let base = shift(&x, j);
                log_d += family.derivative(&base, t).ln();
                bound = bound.max(log_d.exp());
                t = family.apply(&base, t);
            }
            // Backward chain rule.
            let mut t = t0;
            let mut log_d = 0.0f64;
            for j in 1..=n_max as i64 {
                let base = shift(&x, -j);
                let pre = family.apply_inverse(&base, t);
                log_d -= family.derivative(&base, pre).ln();
                bound = bound.max(log_d.exp());
                t = pre;
            }
        }
    }
    MostlyNeutralReport {
        bound_estimate: bound,
        c_config,
        passes: bound <= c_config,
    }
}

fn base_holonomy_limit(
    family: &FiberMapFamily,
    x: &BiSequence,
    y: &BiSequence,
    t: CirclePoint,
    tol: f64,
    stable: bool,
) -> Result<CirclePoint> {
    // Rotations compose additively, so the holonomy is t plus an exactly
    // telescoped angle sum: terms with matching windows cancel to zero
    // bit for bit, which keeps points with equal fiber coordinates equal
    // under the holonomy (downstream products rely on that exactness).
    if let FiberKind::Rotation { .. } = family.kind() {
        let w = family.window() as i64;
        let mut sum = 0.0f64;
        if stable {
            for j in 0..=w {
                sum += family.angle(&shift(x, j)) - family.angle(&shift(y, j));
            }
        } else {
            for j in 1..=w + 1 {
                sum += family.angle(&shift(y, -j)) - family.angle(&shift(x, -j));
            }
        }
        return Ok(if sum == 0.0 {
            t
        } else {
            CirclePoint::new(t.0 + sum)
        });
    }

    // Approximants (f^n_y)^{-1} (f^n_x (t)), n -> +infinity on the stable
    // side and n -> -infinity on the unstable side. For window-w families
    // they are exactly stationary once the moving windows agree, so a short
    // run past the window size suffices.
    let w = family.window() as i64;
    let n_settle = w + 2;
    let n_max = n_settle + 64;
    let mut prev: Option<CirclePoint> = None;
    let mut n = 1i64;
    while n <= n_max {
        let cur = if stable {
            let forward = fiber_iterate(family, x, n, t);
            fiber_iterate(&family.clone(), &shift(y, n), -n, forward)
        } else {
            let backward = fiber_iterate(family, x, -n, t);
            fiber_iterate(family, &shift(y, -n), n, backward)
        };
        if let Some(p) = prev {
            if dist_circle(p, cur) < tol && n >= n_settle {
                return Ok(cur);
            }
        }
        prev = Some(cur);
        n += 1;
    }
    Err(CocycleError::NoConvergence {
        n_max: n_max as usize,
        last_delta: f64::NAN,
    })
}

/// Stable base holonomy h^s from the fiber of `x` to the fiber of `y`;
/// requires `y` in the local stable set of `x` (futures agree).
pub fn base_holonomy_s(
    family: &FiberMapFamily,
    x: &BiSequence,
    y: &BiSequence,
    t: CirclePoint,
    tol: f64,
) -> Result<CirclePoint> {
    if !symbolic::in_local_stable(x, y) {
        return Err(CocycleError::PreconditionViolation(
            "base points are not on the same local stable set".into(),
        ));
    }
    base_holonomy_limit(family, x, y, t, tol, true)
}

/// Unstable base holonomy h^u from the fiber of `x` to the fiber of `y`.
///
/// Membership is checked on the strict past `k <= -1`: homoclinic points are
/// normalized with their excursion word starting at index 0, and the
/// backward limit only ever looks at strictly negative coordinates.
pub fn base_holonomy_u(
    family: &FiberMapFamily,
    x: &BiSequence,
    y: &BiSequence,
    t: CirclePoint,
    tol: f64,
) -> Result<CirclePoint> {
    if !symbolic::past_agree_strict(x, y) {
        return Err(CocycleError::PreconditionViolation(
            "base points are not on the same local unstable set".into(),
        ));
    }
    base_holonomy_limit(family, x, y, t, tol, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSide {
    Stable,
    Unstable,
}

/// Membership of `q` in the local strong-stable (resp. strong-unstable) set
/// of `p`: base membership plus the fiber coordinate matching the base
/// holonomy image within `tol`.
pub fn strong_sets_member(
    family: &FiberMapFamily,
    p: &FiberedPoint,
    q: &FiberedPoint,
    side: SetSide,
    tol: f64,
) -> bool {
    let image = match side {
        SetSide::Stable => {
            if !symbolic::in_local_stable(&p.base, &q.base) {
                return false;
            }
            base_holonomy_s(family, &p.base, &q.base, p.t, tol.min(1e-12))
        }
        SetSide::Unstable => {
            if !symbolic::past_agree_strict(&p.base, &q.base) {
                return false;
            }
            base_holonomy_u(family, &p.base, &q.base, p.t, tol.min(1e-12))
        }
    };
    match image {
        Ok(s) => dist_circle(q.t, s) < tol,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{bracket, make_fixed_point, sample_point, MeasureSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec2() -> MeasureSpec {
        MeasureSpec::bernoulli(vec![0.5, 0.5]).unwrap()
    }

    fn random_perturbed(window: usize, seed: u64) -> FiberMapFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2usize.pow(2 * window as u32 + 1);
        let angles: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        FiberMapFamily::perturbed_rotation(2, window, angles, 0.1).unwrap()
    }

    fn random_rotation(window: usize, seed: u64) -> FiberMapFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2usize.pow(2 * window as u32 + 1);
        let angles: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        FiberMapFamily::rotation(2, window, angles).unwrap()
    }

    /// A random point on the local stable set of `x`: fresh past, same future.
    fn stable_neighbor(x: &BiSequence, seed: u64) -> BiSequence {
        let mut overrides = std::collections::BTreeMap::new();
        overrides.insert(0i64, x.coordinate(0));
        let cand = symbolic::sample_point_with_overrides(&spec2(), seed, overrides);
        bracket(x, &cand).unwrap()
    }

    #[test]
    fn iterate_zero_is_identity() {
        let fam = random_perturbed(1, 1);
        let x = sample_point(&spec2(), 3);
        let t = CirclePoint::new(0.37);
        assert_eq!(fiber_iterate(&fam, &x, 0, t), t);
    }

    #[test]
    fn constant_rotation_iterates_additively() {
        let fam = FiberMapFamily::constant_rotation(2, 0.1);
        let x = sample_point(&spec2(), 5);
        let t = CirclePoint::new(0.25);
        let t5 = fiber_iterate(&fam, &x, 5, t);
        assert!(dist_circle(t5, CirclePoint::new(0.75)) < 1e-12);
    }

    #[test]
    fn perturbed_inverse_roundtrip() {
        let fam = random_perturbed(0, 2);
        let x = sample_point(&spec2(), 11);
        for g in 0..100 {
            let t = CirclePoint::new(g as f64 / 100.0);
            let fwd = fiber_iterate(&fam, &x, 3, t);
            let back = fiber_iterate(&fam, &shift(&x, 3), -3, fwd);
            assert!(dist_circle(back, t) < 1e-10, "t = {}", t.value());
        }
    }

    #[test]
    fn iterate_cocycle_law() {
        let fam = random_perturbed(1, 3);
        let x = sample_point(&spec2(), 17);
        let t = CirclePoint::new(0.61803);
        for (m, n) in [(4i64, 3i64), (-2, 5), (6, -6), (-3, -4)] {
            let lhs = fiber_iterate(&fam, &x, m + n, t);
            let step = fiber_iterate(&fam, &x, n, t);
            let rhs = fiber_iterate(&fam, &shift(&x, n), m, step);
            assert!(dist_circle(lhs, rhs) < 1e-12);
        }
    }

    #[test]
    fn mostly_neutral_rotation_exact() {
        let fam = random_rotation(1, 4);
        let rep = check_mostly_neutral(&fam, &spec2(), 100, 4, 9, 1.5);
        assert_eq!(rep.bound_estimate, 1.0);
        assert!(rep.passes);
    }

    #[test]
    fn mostly_neutral_zero_amplitude_reduces_to_rotation() {
        let fam = FiberMapFamily::perturbed_rotation(2, 0, vec![0.3, 0.7], 0.0).unwrap();
        let rep = check_mostly_neutral(&fam, &spec2(), 200, 4, 10, 1.5);
        assert!((rep.bound_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mostly_neutral_bound_monotone_in_n_max() {
        let fam = random_perturbed(0, 5);
        let spec = spec2();
        let mut prev = 0.0;
        for n_max in [10, 100, 1000] {
            let rep = check_mostly_neutral(&fam, &spec, n_max, 4, 11, 10.0);
            assert!(rep.bound_estimate >= prev);
            prev = rep.bound_estimate;
        }
        assert!(prev >= 1.0);
    }

    #[test]
    fn holonomy_identity_on_diagonal() {
        let fam = random_perturbed(1, 6);
        let x = sample_point(&spec2(), 23);
        let t = CirclePoint::new(0.11);
        let h = base_holonomy_s(&fam, &x, &x, t, 1e-12).unwrap();
        assert!(dist_circle(h, t) < 1e-12);
    }

    #[test]
    fn holonomy_window_zero_is_identity() {
        // Maps depend only on x_0, which stable pairs share at all forward
        // times: the telescoping product collapses.
        let fam = random_perturbed(0, 7);
        let x = sample_point(&spec2(), 31);
        let y = stable_neighbor(&x, 32);
        let t = CirclePoint::new(0.42);
        let h = base_holonomy_s(&fam, &x, &y, t, 1e-12).unwrap();
        assert!(dist_circle(h, t) < 1e-12);
    }

    #[test]
    fn holonomy_rotation_window_one_closed_form() {
        let fam = random_rotation(1, 8);
        let x = sample_point(&spec2(), 41);
        let y = stable_neighbor(&x, 42);
        let t = CirclePoint::new(0.256);
        let h = base_holonomy_s(&fam, &x, &y, t, 1e-14).unwrap();
        // Telescoping sum: only the j = 0 term survives for window 1.
        let expected = CirclePoint::new(t.value() + fam.angle(&x) - fam.angle(&y));
        assert!(dist_circle(h, expected) < 1e-12);
    }

    #[test]
    fn holonomy_cocycle_identities_on_one_stable_set() {
        let fam = random_perturbed(1, 9);
        let spec = spec2();
        let x = sample_point(&spec, 51);
        let y = stable_neighbor(&x, 52);
        let z = stable_neighbor(&x, 53);
        let t = CirclePoint::new(0.9);
        let hxy = base_holonomy_s(&fam, &x, &y, t, 1e-14).unwrap();
        let hyz = base_holonomy_s(&fam, &y, &z, hxy, 1e-14).unwrap();
        let hxz = base_holonomy_s(&fam, &x, &z, t, 1e-14).unwrap();
        assert!(dist_circle(hyz, hxz) < 1e-11);
    }

    #[test]
    fn holonomy_equivariance() {
        // f_y o h^s_{x,y} = h^s_{sx,sy} o f_x.
        let fam = random_perturbed(1, 10);
        let spec = spec2();
        let x = sample_point(&spec, 61);
        let y = stable_neighbor(&x, 62);
        let t = CirclePoint::new(0.33);
        let lhs = fam.apply(&y, base_holonomy_s(&fam, &x, &y, t, 1e-14).unwrap());
        let rhs =
            base_holonomy_s(&fam, &shift(&x, 1), &shift(&y, 1), fam.apply(&x, t), 1e-14).unwrap();
        assert!(dist_circle(lhs, rhs) < 1e-10);
    }

    #[test]
    fn holonomy_rejects_non_members() {
        let fam = random_perturbed(0, 11);
        let x = make_fixed_point(0);
        let y = make_fixed_point(1);
        assert!(matches!(
            base_holonomy_s(&fam, &x, &y, CirclePoint::new(0.0), 1e-12),
            Err(CocycleError::PreconditionViolation(_))
        ));
    }

    #[test]
    fn strong_set_membership() {
        let fam = random_perturbed(1, 12);
        let spec = spec2();
        let x = sample_point(&spec, 71);
        let y = stable_neighbor(&x, 72);
        let t = CirclePoint::new(0.5);
        let p = FiberedPoint { base: x.clone(), t };
        // q = p is a member.
        assert!(strong_sets_member(
            &fam,
            &p,
            &p.clone(),
            SetSide::Stable,
            1e-9
        ));
        // Fiber coordinate matching the holonomy image: member.
        let ht = base_holonomy_s(&fam, &x, &y, t, 1e-14).unwrap();
        let q = FiberedPoint {
            base: y.clone(),
            t: ht,
        };
        assert!(strong_sets_member(&fam, &p, &q, SetSide::Stable, 1e-9));
        // Same base future but fiber coordinate off by 0.3: not a member.
        let q_bad = FiberedPoint {
            base: y.clone(),
            t: CirclePoint::new(ht.value() + 0.3),
        };
        assert!(!strong_sets_member(&fam, &p, &q_bad, SetSide::Stable, 1e-9));
    }

    #[test]
    fn strong_stable_orbits_converge() {
        let fam = random_perturbed(1, 13);
        let spec = spec2();
        let x = sample_point(&spec, 81);
        let y = stable_neighbor(&x, 82);
        let t = CirclePoint::new(0.2);
        let ht = base_holonomy_s(&fam, &x, &y, t, 1e-14).unwrap();
        let mut p = FiberedPoint { base: x, t };
        let mut q = FiberedPoint { base: y, t: ht };
        let mut d_prev = dist_product(&p, &q);
        for _ in 0..40 {
            p = skew_step(&fam, &p, true);
            q = skew_step(&fam, &q, true);
        }
        let d_final = dist_product(&p, &q);
        assert!(d_final < 1e-9, "d = {d_final}, started at {d_prev}");
        d_prev = d_final.max(d_prev);
        let _ = d_prev;
    }

    #[test]
    fn rotation_holonomies_preserve_lebesgue() {
        // The base holonomy of a rotation family is itself a rigid
        // rotation, so it pushes a uniform grid to a shifted grid.
        let fam = random_rotation(1, 24);
        let x = sample_point(&spec2(), 95);
        let y = stable_neighbor(&x, 96);
        let grid = 512;
        let mut images: Vec<f64> = (0..grid)
            .map(|g| {
                base_holonomy_s(
                    &fam,
                    &x,
                    &y,
                    CirclePoint::new(g as f64 / grid as f64),
                    1e-14,
                )
                .unwrap()
                .value()
            })
            .collect();
        images.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut disc = 0.0f64;
        for (i, v) in images.iter().enumerate() {
            disc = disc.max((v - i as f64 / grid as f64).abs());
            disc = disc.max((v - (i + 1) as f64 / grid as f64).abs());
        }
        assert!(disc <= 2.0 / grid as f64, "discrepancy {disc}");
    }

    #[test]
    fn rotations_preserve_lebesgue_on_fibers() {
        // Push a uniform grid through the fiber map; the image is a shifted
        // grid, so the discrepancy stays O(1/grid).
        let fam = random_rotation(1, 14);
        let x = sample_point(&spec2(), 91);
        let grid = 1024;
        let mut images: Vec<f64> = (0..grid)
            .map(|g| {
                fam.apply(&x, CirclePoint::new(g as f64 / grid as f64))
                    .value()
            })
            .collect();
        images.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Kolmogorov-Smirnov style discrepancy against the uniform law.
        let mut disc = 0.0f64;
        for (i, v) in images.iter().enumerate() {
            disc = disc.max((v - i as f64 / grid as f64).abs());
            disc = disc.max((v - (i + 1) as f64 / grid as f64).abs());
        }
        assert!(disc <= 2.0 / grid as f64, "discrepancy {disc}");
    }

    #[test]
    fn skew_step_roundtrip() {
        let fam = random_perturbed(1, 15);
        let p = FiberedPoint::new(sample_point(&spec2(), 101), 0.77);
        let q = skew_step(&fam, &skew_step(&fam, &p, true), false);
        assert!(dist_circle(p.t, q.t) < 1e-12);
        assert!(p.base.agrees_on(&q.base, -70, 70));
    }
}
