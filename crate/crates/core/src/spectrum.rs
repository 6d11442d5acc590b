//! Lyapunov spectrum estimation and the objects built on top of it:
//! Oseledets splittings along the invariant fiber, eccentricity and most
//! expanded subspaces, the volume-ratio gap functional, and the first-return
//! induced cocycle.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CocycleError, Result};
use crate::linalg::{
    self, identity, intersect_subspaces, singular_values, svd_sorted, thin_qr, CMat, CVec,
    Subspace, C64,
};
use crate::lincocycle::{Cocycle, CocycleGenerator};
use crate::skewprod::{CirclePoint, FiberedPoint};
use crate::symbolic::{self, BiSequence, MeasureSpec, Symbol};

/// Monte Carlo estimate of the Lyapunov spectrum: pooled per-orbit QR
/// (Benettin) exponents with standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    /// Exponents in nats per iterate, descending.
    pub exponents: Vec<f64>,
    /// Standard error of each pooled exponent across orbits.
    pub stderr: Vec<f64>,
    pub n_steps: usize,
    pub n_orbits: usize,
}

impl SpectrumEstimate {
    /// One row per exponent: index, value, stderr.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,stderr\n");
        for (i, (v, s)) in self.exponents.iter().zip(&self.stderr).enumerate() {
            out.push_str(&format!("{i},{v},{s}\n"));
        }
        out
    }

    /// Pooled standard error against another estimate, per exponent.
    pub fn pooled_stderr(&self, other: &SpectrumEstimate) -> Vec<f64> {
        self.stderr
            .iter()
            .zip(&other.stderr)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .collect()
    }

    /// Number of distinct exponents at the declared resolution: consecutive
    /// values count as equal when separated by at most
    /// max(min_gap, 4 * pooled stderr of the pair).
    pub fn distinct_count(&self, min_gap: f64) -> usize {
        let mut count = 1;
        for i in 1..self.exponents.len() {
            let sep = self.exponents[i - 1] - self.exponents[i];
            let pooled = (self.stderr[i - 1].powi(2) + self.stderr[i].powi(2)).sqrt();
            if sep > min_gap.max(4.0 * pooled) {
                count += 1;
            }
        }
        count
    }
}

/// One QR-reorthonormalized orbit: returns the d per-step exponents of the
/// orbit through `start`, sorted descending.
pub fn benettin_single_orbit(
    cocycle: &Cocycle,
    start: &FiberedPoint,
    n_steps: usize,
    k_renorm: usize,
) -> Result<Vec<f64>> {
    assert!(n_steps >= 1 && k_renorm >= 1);
    let d = cocycle.dim();
    let mut frame = identity(d);
    let mut logs = vec![0.0f64; d];
    let mut p = start.clone();
    let mut since = 0usize;
    for _ in 0..n_steps {
        frame = cocycle.value(&p)? * frame;
        p = cocycle.step(&p);
        since += 1;
        if since == k_renorm {
            let (q, ld) = thin_qr(&frame);
            frame = q;
            for (acc, l) in logs.iter_mut().zip(&ld) {
                *acc += l;
            }
            since = 0;
        }
    }
    if since > 0 {
        let (_, ld) = thin_qr(&frame);
        for (acc, l) in logs.iter_mut().zip(&ld) {
            *acc += l;
        }
    }
    let mut ex: Vec<f64> = logs.iter().map(|l| l / n_steps as f64).collect();
    ex.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(ex)
}

/// Pools per-orbit exponent vectors index-wise into a `SpectrumEstimate`.
pub fn pool_orbit_exponents(per_orbit: &[Vec<f64>], n_steps: usize) -> SpectrumEstimate {
    let n_orbits = per_orbit.len();
    let d = per_orbit[0].len();
    let mut exponents = vec![0.0f64; d];
    let mut stderr = vec![0.0f64; d];
    for i in 0..d {
        let mean = per_orbit.iter().map(|v| v[i]).sum::<f64>() / n_orbits as f64;
        exponents[i] = mean;
        if n_orbits > 1 {
            let var = per_orbit.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>()
                / (n_orbits - 1) as f64;
            stderr[i] = (var / n_orbits as f64).sqrt();
        }
    }
    SpectrumEstimate {
        exponents,
        stderr,
        n_steps,
        n_orbits,
    }
}

/// Monte Carlo Lyapunov spectrum over the product measure: orbit-parallel,
/// deterministic in (seed, n_orbits) regardless of scheduling.
pub fn lyapunov_spectrum(
    cocycle: &Cocycle,
    spec: &MeasureSpec,
    n_steps: usize,
    n_orbits: usize,
    k_renorm: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    assert!(n_orbits >= 1);
    let per_orbit: Vec<Result<Vec<f64>>> = (0..n_orbits)
        .into_par_iter()
        .map(|j| {
            let x = symbolic::sample_point(spec, symbolic::derive_seed(seed, j as u64));
            let t = spec.sample_fiber(symbolic::derive_seed(seed, 0x8000_0000 + j as u64));
            benettin_single_orbit(cocycle, &FiberedPoint::new(x, t), n_steps, k_renorm)
        })
        .collect();
    let per_orbit: Vec<Vec<f64>> = per_orbit.into_iter().collect::<Result<_>>()?;
    Ok(pool_orbit_exponents(&per_orbit, n_steps))
}

/// Closed-form spectrum for (possibly constant) diagonal generators:
/// log moduli of the diagonal, descending. None for other generator kinds.
pub fn exact_diagonal_spectrum(gen: &CocycleGenerator) -> Option<Vec<f64>> {
    let entries = gen.diagonal_entries()?;
    let mut ex: Vec<f64> = entries.iter().map(|e| e.norm().ln()).collect();
    ex.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Some(ex)
}

/// The Oseledets decomposition along the fiber of a shift-fixed base point,
/// computed by intersecting the forward and backward singular flags of the
/// n-step products.
#[derive(Debug, Clone)]
pub struct OseledetsSplit {
    pub t: CirclePoint,
    /// Invariant lines, ordered by descending exponent.
    pub lines: Vec<Subspace>,
    /// Benettin exponents of the restriction, descending.
    pub exponents: Vec<f64>,
    /// Worst margin seen in the flag intersections (sin of the smallest
    /// non-null principal direction); small margins mean a failing split.
    pub intersection_margin: f64,
    /// Max angle between the one-step image of each line and the line
    /// computed directly at the image point. The honesty metric.
    pub invariance_defect: f64,
}

/// Minimum consecutive singular gap of the n-step products for the split to
/// be considered resolvable; repeated exponents produce gaps near 1.
const SPLIT_GAP_FLOOR: f64 = 10.0;

/// Pushes a generic frame n steps along the cocycle starting at `start`,
/// re-orthonormalizing on the way (one huge product would lose the
/// subdominant directions to floating point). Returns the final orthonormal
/// frame, whose nested column spans are the images of the nested generic
/// subspaces, together with the per-column log growth.
pub(crate) fn directed_flag(
    cocycle: &Cocycle,
    start: &FiberedPoint,
    n: usize,
) -> Result<(CMat, Vec<f64>)> {
    let d = cocycle.dim();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0x05EED5);
    let mut frame = linalg::random_unitary(d, &mut rng);
    let mut logs = vec![0.0f64; d];
    let mut p = start.clone();
    for step in 1..=n {
        frame = cocycle.value(&p)? * frame;
        p = cocycle.step(&p);
        if step % 5 == 0 || step == n {
            let (q, ld) = thin_qr(&frame);
            frame = q;
            for (acc, l) in logs.iter_mut().zip(&ld) {
                *acc += l;
            }
        }
    }
    Ok((frame, logs))
}

fn check_flag_gaps(name: &str, logs: &[f64], n: usize) -> Result<()> {
    for i in 0..logs.len() - 1 {
        let gap = logs[i] - logs[i + 1];
        if gap < SPLIT_GAP_FLOOR.ln() {
            return Err(CocycleError::DegenerateSplit(format!(
                "{name} products have log singular gap {gap:.3} at index {i}; exponents not resolved at n = {n}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn split_lines_at(
    cocycle: &Cocycle,
    base: &BiSequence,
    t: CirclePoint,
    n: usize,
    _tol: f64,
) -> Result<(Vec<Subspace>, f64)> {
    let d = cocycle.dim();
    let p = FiberedPoint {
        base: base.clone(),
        t,
    };

    // Forward flag: images at p of a generic frame under A^n(f^{-n} p).
    let back = cocycle.step_n(&p, -(n as i64));
    let (qf, logs_f) = directed_flag(cocycle, &back, n)?;
    // Backward flag: images at p under A^{-n}(f^{n} p), i.e. n steps of the
    // inverse cocycle from f^n(p).
    let fwd = cocycle.step_n(&p, n as i64);
    let (qb, logs_b) = directed_flag(&cocycle.inverse_cocycle(), &fwd, n)?;

    check_flag_gaps("forward", &logs_f, n)?;
    check_flag_gaps("backward", &logs_b, n)?;

    let mut lines = Vec::with_capacity(d);
    let mut worst_margin = f64::INFINITY;
    for i in 0..d {
        // E^i = (fast i+1 flag) intersected with (slow d-i flag).
        let f_i = Subspace::from_orthonormal_frame(qf.columns(0, i + 1).into_owned())?;
        let b_i = Subspace::from_orthonormal_frame(qb.columns(0, d - i).into_owned())?;
        let (line, margin) = intersect_subspaces(&f_i, &b_i, 1)?;
        if margin < 1e-8 {
            return Err(CocycleError::DegenerateSplit(format!(
                "flag intersection {i} has margin {margin:.3e}"
            )));
        }
        worst_margin = worst_margin.min(margin);
        lines.push(canonical_phase_line(line));
    }
    Ok((lines, worst_margin))
}

/// Fixes the phase of a line's frame vector: largest-modulus entry real
/// positive. Keeps downstream coordinates reproducible.
fn canonical_phase_line(line: Subspace) -> Subspace {
    let v = line.frame().column(0).into_owned();
    let arg_max = (0..v.len())
        .max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap())
        .unwrap();
    let phase = v[arg_max] / C64::new(v[arg_max].norm(), 0.0);
    let fixed = v / phase;
    Subspace::from_orthonormal_frame(CMat::from_columns(&[fixed]))
        .expect("phase rotation preserves orthonormality")
}

/// Oseledets split on the fiber of the shift-fixed point `p_hat` at `t`.
///
/// `n` controls flag resolution: the residual mixes decay like the slowest
/// exponent gap to the power n, so callers pick n with `exp(-n gap) < tol`.
pub fn oseledets_split_on_fiber(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    t: CirclePoint,
    n: usize,
    tol: f64,
) -> Result<OseledetsSplit> {
    ensure_fixed_point(p_hat)?;
    let (lines, margin) = split_lines_at(cocycle, p_hat, t, n, tol)?;
    let exponents = benettin_single_orbit(
        cocycle,
        &FiberedPoint {
            base: p_hat.clone(),
            t,
        },
        (4 * n).max(200),
        5,
    )?;

    // Invariance defect: push each line one step and compare with the split
    // computed at the image point.
    let p = FiberedPoint {
        base: p_hat.clone(),
        t,
    };
    let a = cocycle.value(&p)?;
    let image = cocycle.step(&p);
    let (lines_next, _) = split_lines_at(cocycle, p_hat, image.t, n, tol)?;
    let mut defect = 0.0f64;
    for (line, next) in lines.iter().zip(&lines_next) {
        let pushed = Subspace::from_span(&(&a * line.frame()))?;
        defect = defect.max(linalg::grass_distance(&pushed, next)?);
    }

    Ok(OseledetsSplit {
        t,
        lines,
        exponents,
        intersection_margin: margin,
        invariance_defect: defect,
    })
}

fn ensure_fixed_point(p_hat: &BiSequence) -> Result<()> {
    let shifted = symbolic::shift(p_hat, 1);
    if !p_hat.agrees_on(&shifted, -130, 130) {
        return Err(CocycleError::PreconditionViolation(
            "base point is not shift-fixed".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Eccentricity {
    /// sigma_l / sigma_{l+1} of the singular values, >= 1 by construction
    /// once clamped by invertibility.
    pub value: f64,
    /// Span of the first l right singular vectors: the most expanded
    /// l-subspace.
    pub most_expanded: Subspace,
    /// False when sigma_l = sigma_{l+1}: the most expanded subspace is then
    /// not unique.
    pub unique: bool,
}

/// l-dimensional eccentricity of an invertible matrix.
pub fn eccentricity(l_matrix: &CMat, l: usize) -> Result<Eccentricity> {
    let d = l_matrix.nrows();
    if l == 0 || l >= d {
        return Err(CocycleError::InvalidParameter(format!(
            "eccentricity index l = {l} out of range 1..{d}"
        )));
    }
    let (_, sv, v) = svd_sorted(l_matrix);
    if sv[d - 1] <= 0.0 {
        return Err(CocycleError::SingularValue(
            "eccentricity of a singular matrix".into(),
        ));
    }
    let value = sv[l - 1] / sv[l];
    let unique = sv[l - 1] - sv[l] > 1e-12 * sv[0];
    let most_expanded = Subspace::from_orthonormal_frame(v.columns(0, l).into_owned())?;
    Ok(Eccentricity {
        value,
        most_expanded,
        unique,
    })
}

/// log of the n-step volume-ratio gap functional
/// det(A^n | xi_u)^(1/d_u) / det(A^n | xi_u + eta_s)^(1/(d_u+d_s)),
/// with determinants of restrictions computed as QR volumes of image frames.
pub fn log_gap_functional(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    n: usize,
    xi_u: &Subspace,
    eta_s: &Subspace,
) -> Result<f64> {
    let d = cocycle.dim();
    let (d_u, d_s) = (xi_u.rank(), eta_s.rank());
    if d_u + d_s > d {
        return Err(CocycleError::InvalidParameter(
            "subspace ranks exceed the ambient dimension".into(),
        ));
    }
    // W = xi_u + eta_s must be a direct sum.
    let mut stacked = CMat::zeros(d, d_u + d_s);
    stacked.view_mut((0, 0), (d, d_u)).copy_from(xi_u.frame());
    stacked
        .view_mut((0, d_u), (d, d_s))
        .copy_from(eta_s.frame());
    let sv = singular_values(&stacked);
    let margin = sv[d_u + d_s - 1];
    if margin < 1e-8 {
        return Err(CocycleError::NonTransverse { margin });
    }
    let (w_frame, _) = thin_qr(&stacked);

    let log_vol_u = restricted_log_volume(cocycle, point, n, xi_u.frame())?;
    let log_vol_w = restricted_log_volume(cocycle, point, n, &w_frame)?;
    Ok(log_vol_u / d_u as f64 - log_vol_w / (d_u + d_s) as f64)
}

/// log of the volume growth of a frame under the n-step products, with
/// interleaved re-orthonormalization so contracted directions never
/// underflow. Volumes multiply step by step, so the accumulated R-diagonal
/// logs are exactly the log volume of the image of the original frame.
fn restricted_log_volume(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    n: usize,
    frame: &CMat,
) -> Result<f64> {
    let mut fr = frame.clone();
    let mut acc = 0.0f64;
    let mut p = point.clone();
    for step in 1..=n {
        fr = cocycle.value(&p)? * fr;
        p = cocycle.step(&p);
        if step % 5 == 0 || step == n {
            let (q, ld) = thin_qr(&fr);
            fr = q;
            acc += ld.iter().sum::<f64>();
        }
    }
    Ok(acc)
}

/// The raw gap functional; overflows for large n, see `log_gap_functional`.
pub fn gap_functional(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    n: usize,
    xi_u: &Subspace,
    eta_s: &Subspace,
) -> Result<f64> {
    Ok(log_gap_functional(cocycle, point, n, xi_u, eta_s)?.exp())
}

/// A return region: a cylinder (pinned symbols) and an optional fiber
/// interval [lo, hi) on the circle.
#[derive(Debug, Clone, Serialize)]
pub struct Region {
    pub cylinder: Vec<(i64, Symbol)>,
    pub fiber_interval: Option<(f64, f64)>,
}

impl Region {
    /// The 1-cylinder [0; s].
    pub fn cylinder_at_origin(s: Symbol) -> Self {
        Region {
            cylinder: vec![(0, s)],
            fiber_interval: None,
        }
    }

    pub fn everything() -> Self {
        Region {
            cylinder: Vec::new(),
            fiber_interval: None,
        }
    }

    pub fn contains(&self, p: &FiberedPoint) -> bool {
        if !self
            .cylinder
            .iter()
            .all(|(k, s)| p.base.coordinate(*k) == *s)
        {
            return false;
        }
        match self.fiber_interval {
            None => true,
            Some((lo, hi)) => {
                let t = p.t.value();
                t >= lo && t < hi
            }
        }
    }
}

/// First-return blocks and the exponent bookkeeping around them.
#[derive(Debug, Clone)]
pub struct InducedReport {
    /// Return times of the successive re-entries.
    pub return_times: Vec<usize>,
    /// The block matrices D = A^r at each entry point.
    pub blocks: Vec<CMat>,
    pub mean_return_time: f64,
    /// Top exponent per induced step (from the block products).
    pub induced_top_exponent: f64,
    /// Top exponent per base step along the same orbit span.
    pub original_top_exponent: f64,
}

/// Walks the orbit of `start`, inducing on `region`: emits one block per
/// first return together with the return-time and exponent statistics.
///
/// The induced top exponent equals the original one multiplied by the
/// empirical mean return time along this orbit (the products telescope);
/// its statistical content is that the mean return time estimates the
/// reciprocal of the region's measure.
pub fn induced_cocycle(
    cocycle: &Cocycle,
    region: &Region,
    start: &FiberedPoint,
    n_max: usize,
) -> Result<InducedReport> {
    let d = cocycle.dim();
    let mut p = start.clone();
    let mut used = 0usize;
    while !region.contains(&p) {
        p = cocycle.step(&p);
        used += 1;
        if used >= n_max {
            return Err(CocycleError::NoReturns(n_max));
        }
    }

    // Direction vector for the norm-growth exponent; fixed generic vector.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0xFEED);
    let g = linalg::complex_gaussian(d, 1, &mut rng);
    let mut v: CVec = g.column(0).into_owned();
    v /= C64::new(v.norm(), 0.0);

    let mut return_times = Vec::new();
    let mut blocks = Vec::new();
    let mut block = identity(d);
    let mut r = 0usize;
    let mut log_growth = 0.0f64;
    let mut steps_counted = 0usize;
    for _ in used..n_max {
        block = cocycle.value(&p)? * block;
        p = cocycle.step(&p);
        r += 1;
        if region.contains(&p) {
            return_times.push(r);
            // Advance the direction vector through the block.
            let w = &block * &v;
            let n = w.norm();
            log_growth += n.ln();
            steps_counted += r;
            v = w / C64::new(n, 0.0);
            blocks.push(std::mem::replace(&mut block, identity(d)));
            r = 0;
        }
    }
    if return_times.is_empty() {
        return Err(CocycleError::NoReturns(n_max));
    }
    let k = return_times.len();
    let mean_return_time = steps_counted as f64 / k as f64;
    Ok(InducedReport {
        return_times,
        blocks,
        mean_return_time,
        induced_top_exponent: log_growth / k as f64,
        original_top_exponent: log_growth / steps_counted as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, from_real, grass_distance, random_unitary, try_inverse};
    use crate::lincocycle::CocycleGenerator;
    use crate::skewprod::FiberMapFamily;
    use crate::symbolic::{make_fixed_point, sample_point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn spec2() -> MeasureSpec {
        MeasureSpec::bernoulli(vec![0.5, 0.5]).unwrap()
    }

    fn rot_family(seed: u64) -> FiberMapFamily {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angles: Vec<f64> = (0..2).map(|_| rng.gen::<f64>()).collect();
        FiberMapFamily::rotation(2, 0, angles).unwrap()
    }

    fn diag_cocycle(moduli: &[f64], seed: u64) -> Cocycle {
        let entries: Vec<C64> = moduli.iter().map(|m| cx(*m)).collect();
        Cocycle::new(
            CocycleGenerator::diagonal(entries, 1.0).unwrap(),
            rot_family(seed),
        )
    }

    #[test]
    fn diagonal_spectrum_exact_and_qr() {
        let coc = diag_cocycle(&[2.0, 1.0, 0.5], 1);
        let expect = [2.0f64.ln(), 0.0, -(2.0f64.ln())];

        let exact = exact_diagonal_spectrum(&coc.gen).unwrap();
        for (a, b) in exact.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }

        let est = lyapunov_spectrum(&coc, &spec2(), 2000, 4, 5, 99).unwrap();
        for (a, b) in est.exponents.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "estimated {a}, closed form {b}");
        }
    }

    #[test]
    fn distinct_count_resolution_rule() {
        let coc = diag_cocycle(&[2.0, 1.0, 0.5], 21);
        let est = lyapunov_spectrum(&coc, &spec2(), 500, 2, 5, 3).unwrap();
        assert_eq!(est.distinct_count(5e-3), 3);
        let coc = diag_cocycle(&[2.0, 2.0, 1.0], 22);
        let est = lyapunov_spectrum(&coc, &spec2(), 500, 2, 5, 3).unwrap();
        assert_eq!(est.distinct_count(5e-3), 2);
    }

    #[test]
    fn identity_spectrum_is_zero() {
        let coc = Cocycle::new(
            CocycleGenerator::constant(identity(3), 1.0).unwrap(),
            rot_family(2),
        );
        let est = lyapunov_spectrum(&coc, &spec2(), 500, 2, 5, 7).unwrap();
        assert!(est.exponents.iter().all(|e| e.abs() < 1e-12));
    }

    fn iid_two_matrix_cocycle(seed: u64) -> Cocycle {
        // Symbol 0: diag(2, 1/2); symbol 1: rotation by pi/4.
        let th = std::f64::consts::FRAC_PI_4;
        let tables = vec![
            from_real(&[vec![2.0, 0.0], vec![0.0, 0.5]]),
            from_real(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]),
        ];
        Cocycle::new(
            CocycleGenerator::table_driven(2, 0, 1, tables, 1.0).unwrap(),
            rot_family(seed),
        )
    }

    #[test]
    fn iid_product_matches_norm_growth_oracle() {
        // Independent oracle: average of (1/n) log ||A^n v|| over random
        // unit vectors and orbits.
        let coc = iid_two_matrix_cocycle(3);
        let spec = spec2();
        let n = 10_000usize;
        let orbits = 12usize;

        let mut oracle_samples = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for j in 0..orbits {
            let x = sample_point(&spec, symbolic::derive_seed(77, j as u64));
            let mut p = FiberedPoint::new(x, 0.3);
            let g = complex_gaussian(2, 1, &mut rng);
            let mut v: CVec = g.column(0).into_owned();
            v /= cx(v.norm());
            let mut log_growth = 0.0;
            for _ in 0..n {
                let w = coc.value(&p).unwrap() * &v;
                let nn = w.norm();
                log_growth += nn.ln();
                v = w / cx(nn);
                p = coc.step(&p);
            }
            oracle_samples.push(log_growth / n as f64);
        }
        let oracle_pool = pool_orbit_exponents(
            &oracle_samples.iter().map(|&x| vec![x]).collect::<Vec<_>>(),
            n,
        );

        let est = lyapunov_spectrum(&coc, &spec, n, orbits, 5, 77).unwrap();
        let pooled = (est.stderr[0].powi(2) + oracle_pool.stderr[0].powi(2)).sqrt();
        let diff = (est.exponents[0] - oracle_pool.exponents[0]).abs();
        assert!(
            diff <= 3.0 * pooled,
            "top exponent {} vs oracle {} (3 pooled stderr = {})",
            est.exponents[0],
            oracle_pool.exponents[0],
            3.0 * pooled
        );
    }

    #[test]
    fn spectrum_invariant_under_renorm_interval() {
        let coc = iid_two_matrix_cocycle(4);
        let spec = spec2();
        let a = lyapunov_spectrum(&coc, &spec, 4000, 6, 1, 55).unwrap();
        let b = lyapunov_spectrum(&coc, &spec, 4000, 6, 10, 55).unwrap();
        for i in 0..2 {
            let pooled = (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
            assert!((a.exponents[i] - b.exponents[i]).abs() <= 3.0 * pooled.max(1e-12));
        }
    }

    #[test]
    fn exponent_sum_matches_log_det() {
        let coc = iid_two_matrix_cocycle(5);
        let spec = spec2();
        let est = lyapunov_spectrum(&coc, &spec, 5000, 6, 5, 66).unwrap();
        let total: f64 = est.exponents.iter().sum();
        // log |det| is 0 for both matrices: the sum rule gives zero.
        assert!(
            total.abs() < 3.0 * est.stderr.iter().sum::<f64>().max(1e-10),
            "sum = {total}"
        );
    }

    #[test]
    fn top_l_sum_rule_via_exterior_power() {
        let coc = iid_two_matrix_cocycle(6);
        let spec = spec2();
        let est = lyapunov_spectrum(&coc, &spec, 5000, 6, 5, 88).unwrap();
        let pow = coc.exterior_power(2).unwrap();
        let est2 = lyapunov_spectrum(&pow, &spec, 5000, 6, 5, 88).unwrap();
        let lhs = est2.exponents[0];
        let rhs = est.exponents[0] + est.exponents[1];
        let pooled =
            (est2.stderr[0].powi(2) + est.stderr[0].powi(2) + est.stderr[1].powi(2)).sqrt();
        assert!((lhs - rhs).abs() <= 3.0 * pooled.max(1e-10));
    }

    #[test]
    fn oseledets_split_diagonal() {
        let coc = diag_cocycle(&[2.0, 1.1, 0.4], 7);
        let p = make_fixed_point(0);
        let split = oseledets_split_on_fiber(&coc, &p, CirclePoint::new(0.3), 60, 1e-9).unwrap();
        for (i, line) in split.lines.iter().enumerate() {
            let axis = Subspace::coordinate(3, &[i]);
            assert!(grass_distance(line, &axis).unwrap() < 1e-9, "line {i}");
        }
        assert!(split.invariance_defect < 1e-9);
        let expect = [2.0f64.ln(), 1.1f64.ln(), 0.4f64.ln()];
        for (a, b) in split.exponents.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn oseledets_split_conjugated() {
        // Oracle: eigendecomposition by construction, A = S diag S^{-1}.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_unitary(3, &mut rng) + complex_gaussian(3, 3, &mut rng) * cx(0.2);
        let diag = linalg::diagonal(&[cx(2.0), cx(1.1), cx(0.4)]);
        let a = &s * diag * try_inverse(&s).unwrap();
        let coc = Cocycle::new(CocycleGenerator::constant(a, 1.0).unwrap(), rot_family(9));
        let p = make_fixed_point(0);
        let split = oseledets_split_on_fiber(&coc, &p, CirclePoint::new(0.1), 80, 1e-9).unwrap();
        for i in 0..3 {
            let col = Subspace::line(&s.column(i).into_owned()).unwrap();
            assert!(
                grass_distance(&split.lines[i], &col).unwrap() < 1e-6,
                "column {i}"
            );
        }
        assert!(split.invariance_defect < 1e-6);
    }

    #[test]
    fn oseledets_split_degenerate() {
        let coc = diag_cocycle(&[2.0, 2.0, 1.0], 10);
        let p = make_fixed_point(0);
        assert!(matches!(
            oseledets_split_on_fiber(&coc, &p, CirclePoint::new(0.3), 60, 1e-9),
            Err(CocycleError::DegenerateSplit(_))
        ));
    }

    #[test]
    fn eccentricity_examples() {
        let e = eccentricity(&identity(3), 1).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert!(!e.unique);

        let m = linalg::diagonal(&[cx(4.0), cx(2.0), cx(1.0)]);
        let e = eccentricity(&m, 1).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        assert!(e.unique);
        let e1 = Subspace::coordinate(3, &[0]);
        assert!(grass_distance(&e.most_expanded, &e1).unwrap() < 1e-8);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(3, &mut rng);
        let e = eccentricity(&u, 2).unwrap();
        assert!((e.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eccentricity_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let m = complex_gaussian(4, 4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let w = random_unitary(4, &mut rng);
            for l in 1..4 {
                let a = eccentricity(&m, l).unwrap().value;
                let b = eccentricity(&(&u * &m * &w), l).unwrap().value;
                assert!((a - b).abs() < 1e-10 * a.max(1.0));
            }
        }
    }

    #[test]
    fn gap_functional_closed_form() {
        let coc = diag_cocycle(&[2.0, 1.0], 13);
        let p = FiberedPoint::new(sample_point(&spec2(), 1), 0.2);
        let xi = Subspace::coordinate(2, &[0]);
        let eta = Subspace::coordinate(2, &[1]);
        for n in [2usize, 6, 10] {
            let val = gap_functional(&coc, &p, n, &xi, &eta).unwrap();
            let expect = 2f64.powf(n as f64 / 2.0);
            assert!((val - expect).abs() < 1e-9 * expect, "n = {n}");
        }
        // Growth rate: (1/n) log gap -> (d_s/(d_u+d_s)) (lambda_u - lambda_s).
        let n = 400usize;
        let rate = log_gap_functional(&coc, &p, n, &xi, &eta).unwrap() / n as f64;
        assert!((rate - 0.5 * 2.0f64.ln()).abs() < 5e-3);
    }

    #[test]
    fn gap_functional_rejects_tangent_subspaces() {
        let coc = diag_cocycle(&[2.0, 1.0], 14);
        let p = FiberedPoint::new(sample_point(&spec2(), 2), 0.2);
        let xi = Subspace::coordinate(2, &[0]);
        assert!(matches!(
            log_gap_functional(&coc, &p, 5, &xi, &xi),
            Err(CocycleError::NonTransverse { .. })
        ));
    }

    #[test]
    fn induced_on_everything_is_the_cocycle() {
        let coc = diag_cocycle(&[2.0, 0.5], 15);
        let start = FiberedPoint::new(sample_point(&spec2(), 3), 0.6);
        let rep = induced_cocycle(&coc, &Region::everything(), &start, 50).unwrap();
        assert!(rep.return_times.iter().all(|&r| r == 1));
        assert!((rep.mean_return_time - 1.0).abs() < 1e-14);
        let expect = coc.value(&start).unwrap();
        assert!((&rep.blocks[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn induced_kac_mean_return() {
        // Kac: the mean return time to [0;0] under Bernoulli(1/2,1/2) is
        // 1/mu([0;0]) = 2.
        let coc = diag_cocycle(&[2.0, 1.0, 0.5], 16);
        let start = FiberedPoint::new(sample_point(&spec2(), 4), 0.1);
        let rep = induced_cocycle(&coc, &Region::cylinder_at_origin(0), &start, 40_000).unwrap();
        assert!(
            (rep.mean_return_time - 2.0).abs() < 0.04,
            "mean return = {}",
            rep.mean_return_time
        );
        // Exponent rescaling by the mean return time.
        assert!(
            (rep.induced_top_exponent - rep.original_top_exponent * rep.mean_return_time).abs()
                < 1e-9
        );
        // Finite-n transient from the generic direction vector: O(1/n).
        assert!((rep.original_top_exponent - 2.0f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn induced_no_returns() {
        let coc = diag_cocycle(&[2.0, 0.5], 17);
        // The fixed point at symbol 1 never enters the cylinder [0;0].
        let start = FiberedPoint::new(make_fixed_point(1), 0.0);
        assert!(matches!(
            induced_cocycle(&coc, &Region::cylinder_at_origin(0), &start, 1000),
            Err(CocycleError::NoReturns(_))
        ));
    }

    #[test]
    fn spectrum_csv_format() {
        let est = SpectrumEstimate {
            exponents: vec![0.5, -0.5],
            stderr: vec![0.01, 0.02],
            n_steps: 100,
            n_orbits: 2,
        };
        let csv = est.to_csv();
        assert!(csv.starts_with("index,value,stderr\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
