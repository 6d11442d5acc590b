//! The simplicity criterion: pinching and twisting, in non-uniform and
//! uniform variants, plus the constant-plus-bump example that realizes the
//! criterion with explicit margins and an openness probe around it.
//!
//! Pinching is checked through subset sums of the fiber-restricted
//! exponents (the exponents of each exterior power are exactly the k-fold
//! subset sums). Twisting transports the Oseledets lines around the
//! homoclinic loop through the fixed fiber, expresses the transported lines
//! in the Oseledets basis, and inspects the minors of that matrix: nonzero
//! with margin for the uniform variant, sub-exponentially decaying along
//! fiber orbits for the non-uniform one.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CocycleError, Result};
use crate::linalg::{self, identity, index_sets, minor, op_norm, CMat, CVec, C64};
use crate::lincocycle::{regression_slope, strong_holonomy, Cocycle, CocycleGenerator};
use crate::skewprod::{CirclePoint, FiberMapFamily, FiberedPoint, SetSide};
use crate::spectrum::{benettin_single_orbit, split_lines_at};
use crate::symbolic::{
    self, dist_sigma, make_fixed_point, make_homoclinic, shift, BiSequence, Symbol,
};

/// Tunable tolerances; the defaults pass the shipped examples with an order
/// of magnitude to spare.
#[derive(Debug, Clone, Serialize)]
pub struct SimplicityParams {
    /// Minimal subset-sum gap (nats) for the pinching verdict.
    pub tol_gap: f64,
    /// Minimal |minor| of the twisting matrix for the uniform verdict.
    pub tol_margin: f64,
    /// Maximal |slope| of (1/n) log |minor| for the non-uniform verdict.
    pub tol_slope: f64,
    /// Excess over 1 required of every N-step singular gap for uniform
    /// pinching.
    pub tol_dom: f64,
    /// Fiber samples for pinching and twisting.
    pub t_samples: usize,
    /// Fiber grid for uniform pinching.
    pub t_grid: usize,
    /// Steps of the N-step products in uniform pinching. Kept moderate so
    /// the singular values stay within floating-point range.
    pub uniform_n: usize,
    /// Steps for the exponent estimates of the restriction.
    pub n_pinching: usize,
    /// Flag-resolution steps for the Oseledets lines inside twisting.
    pub n_oseledets: usize,
    /// Fiber-orbit length for the sub-exponential decay diagnostics.
    pub orbit_len: usize,
    /// Truncation tolerance passed to holonomies and splits.
    pub tol: f64,
}

impl Default for SimplicityParams {
    fn default() -> Self {
        SimplicityParams {
            tol_gap: 5e-3,
            tol_margin: 1e-6,
            tol_slope: 1e-2,
            tol_dom: 1e-3,
            t_samples: 4,
            t_grid: 16,
            uniform_n: 12,
            n_pinching: 4000,
            n_oseledets: 80,
            orbit_len: 10_000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PinchingReport {
    /// Exponents of the restriction to the fixed fiber, descending, pooled
    /// over the fiber samples.
    pub exponents: Vec<f64>,
    /// Per k: the minimal pairwise gap among all k-fold subset sums.
    pub min_gap_per_k: Vec<(usize, f64)>,
    pub tol_gap: f64,
    pub passes: bool,
}

/// Estimates the exponents of the restriction to the fiber of the
/// shift-fixed point and checks that all subset sums are separated: that is
/// simplicity of every exterior power along the fiber.
pub fn check_pinching(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    t_samples: usize,
    n_steps: usize,
    tol_gap: f64,
) -> Result<PinchingReport> {
    ensure_fixed_point(p_hat)?;
    let d = cocycle.dim();
    let mut pooled = vec![0.0f64; d];
    for s in 0..t_samples {
        let t = CirclePoint::new((s as f64 + 0.35) / t_samples as f64);
        let ex = benettin_single_orbit(
            cocycle,
            &FiberedPoint {
                base: p_hat.clone(),
                t,
            },
            n_steps,
            5,
        )?;
        for (acc, e) in pooled.iter_mut().zip(&ex) {
            *acc += e / t_samples as f64;
        }
    }
    let mut min_gap_per_k = Vec::new();
    let mut passes = true;
    for k in 1..d {
        let sums: Vec<f64> = index_sets(d, k)
            .iter()
            .map(|set| set.iter().map(|&i| pooled[i]).sum())
            .collect();
        let mut min_gap = f64::INFINITY;
        for i in 0..sums.len() {
            for j in (i + 1)..sums.len() {
                min_gap = min_gap.min((sums[i] - sums[j]).abs());
            }
        }
        if min_gap <= tol_gap {
            passes = false;
        }
        min_gap_per_k.push((k, min_gap));
    }
    Ok(PinchingReport {
        exponents: pooled,
        min_gap_per_k,
        tol_gap,
        passes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformPinchingReport {
    /// (exterior power l, consecutive index i, min over the fiber grid of
    /// the N-step singular gap sigma_i / sigma_{i+1}).
    pub margins: Vec<(usize, usize, f64)>,
    pub n_steps: usize,
    pub tol_dom: f64,
    pub passes: bool,
}

/// Cone-field style domination check: every exterior power of the N-step
/// products along the fixed fiber must have all consecutive singular gaps
/// above 1 + tol_dom, uniformly over the fiber grid.
pub fn check_uniform_pinching(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    t_grid: usize,
    n_steps: usize,
    tol_dom: f64,
) -> Result<UniformPinchingReport> {
    ensure_fixed_point(p_hat)?;
    let d = cocycle.dim();
    let mut margins = Vec::new();
    let mut passes = true;
    for l in 1..=d {
        let dim_l = linalg::binomial(d, l);
        if dim_l < 2 {
            continue;
        }
        let powered = cocycle.exterior_power(l)?;
        let mut min_gaps = vec![f64::INFINITY; dim_l - 1];
        for g in 0..t_grid {
            let t = CirclePoint::new(g as f64 / t_grid as f64);
            let p = FiberedPoint {
                base: p_hat.clone(),
                t,
            };
            let m = powered.iterate(&p, n_steps as i64)?;
            let sv = linalg::singular_values(&m);
            for i in 0..dim_l - 1 {
                min_gaps[i] = min_gaps[i].min(sv[i] / sv[i + 1]);
            }
        }
        for (i, gap) in min_gaps.iter().enumerate() {
            if *gap <= 1.0 + tol_dom {
                passes = false;
            }
            margins.push((l, i, *gap));
        }
    }
    Ok(UniformPinchingReport {
        margins,
        n_steps,
        tol_dom,
        passes,
    })
}

fn ensure_fixed_point(p_hat: &BiSequence) -> Result<()> {
    let shifted = shift(p_hat, 1);
    if !p_hat.agrees_on(&shifted, -130, 130) {
        return Err(CocycleError::PreconditionViolation(
            "base point is not shift-fixed".into(),
        ));
    }
    Ok(())
}

/// Shift by n in the cocycle's own time direction.
fn own_shift(cocycle: &Cocycle, x: &BiSequence, n: i64) -> BiSequence {
    if cocycle.is_reversed() {
        shift(x, -n)
    } else {
        shift(x, n)
    }
}

fn own_base_holonomy(
    cocycle: &Cocycle,
    stable_in_own_time: bool,
    from: &BiSequence,
    to: &BiSequence,
    t: CirclePoint,
    tol: f64,
) -> Result<CirclePoint> {
    let absolute_stable = stable_in_own_time != cocycle.is_reversed();
    if absolute_stable {
        crate::skewprod::base_holonomy_s(&cocycle.family, from, to, t, tol)
    } else {
        crate::skewprod::base_holonomy_u(&cocycle.family, from, to, t, tol)
    }
}

/// The twisting matrix B(t): transports each Oseledets line of the fixed
/// fiber around the homoclinic loop (stable holonomy out to the return
/// point, inverse dynamics back along the homoclinic orbit, unstable
/// holonomy home) and solves for its coordinates in the Oseledets basis at
/// t. Rows are normalized to unit length with their largest entry made real
/// positive, which leaves the minor moduli untouched.
pub fn twisting_matrix(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    z_hat: &BiSequence,
    iota: usize,
    t: CirclePoint,
    n_oseledets: usize,
    tol: f64,
) -> Result<CMat> {
    ensure_fixed_point(p_hat)?;
    let d = cocycle.dim();
    let z_ret = own_shift(cocycle, z_hat, iota as i64);

    // Fiber transports around the loop.
    let a = own_base_holonomy(cocycle, false, p_hat, z_hat, t, tol)?;
    let c = {
        // Own-time fiber iterate along the homoclinic orbit.
        let p = FiberedPoint {
            base: z_hat.clone(),
            t: a,
        };
        cocycle.step_n(&p, iota as i64).t
    };
    let b = own_base_holonomy(cocycle, true, &z_ret, p_hat, c, tol)?;

    // Oseledets lines at the two fiber points of the fixed leaf.
    let (lines_t, _) = split_lines_at(cocycle, p_hat, t, n_oseledets, tol)?;
    let (lines_b, _) = split_lines_at(cocycle, p_hat, b, n_oseledets, tol)?;

    let frame_t = {
        let mut m = CMat::zeros(d, d);
        for (j, line) in lines_t.iter().enumerate() {
            m.set_column(j, &line.frame().column(0));
        }
        m
    };
    let lu = frame_t.clone().lu();

    let hol_s = strong_holonomy(
        cocycle,
        &FiberedPoint {
            base: p_hat.clone(),
            t: b,
        },
        &FiberedPoint {
            base: z_ret.clone(),
            t: c,
        },
        SetSide::Stable,
        tol,
    )?;
    let mid = cocycle.iterate(
        &FiberedPoint {
            base: z_ret.clone(),
            t: c,
        },
        -(iota as i64),
    )?;
    let hol_u = strong_holonomy(
        cocycle,
        &FiberedPoint {
            base: z_hat.clone(),
            t: a,
        },
        &FiberedPoint {
            base: p_hat.clone(),
            t,
        },
        SetSide::Unstable,
        tol,
    )?;
    let loop_map = &hol_u * &mid * &hol_s;

    let mut b_matrix = CMat::zeros(d, d);
    for i in 0..d {
        let v: CVec = lines_b[i].frame().column(0).into_owned();
        let transported = &loop_map * v;
        let mut beta = lu.solve(&transported).ok_or_else(|| {
            CocycleError::SingularValue("Oseledets frame numerically singular".into())
        })?;
        let norm = beta.norm();
        if norm == 0.0 {
            return Err(CocycleError::SingularValue(
                "transported line collapsed to zero".into(),
            ));
        }
        beta /= C64::new(norm, 0.0);
        // Phase convention: largest-modulus entry real positive.
        let arg_max = (0..d)
            .max_by(|&x, &y| beta[x].norm().partial_cmp(&beta[y].norm()).unwrap())
            .unwrap();
        let phase = beta[arg_max] / C64::new(beta[arg_max].norm(), 0.0);
        beta /= phase;
        for j in 0..d {
            b_matrix[(i, j)] = beta[j];
        }
    }
    Ok(b_matrix)
}

#[derive(Debug, Clone, Serialize)]
pub struct MinorDiagnostic {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Min |m_{I,J}| over samples and orbit steps.
    pub min_abs: f64,
    /// Worst regression slope of log |m_{I,J}| along the fiber orbits.
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwistingReport {
    pub minors: Vec<MinorDiagnostic>,
    pub min_minor: f64,
    pub max_abs_slope: f64,
    pub tol_margin: f64,
    pub tol_slope: f64,
    /// General position with margin: min |m_{I,J}| > tol_margin.
    pub uniform_passes: bool,
    /// Sub-exponential decay: every slope within tol_slope of zero and no
    /// vanishing minor.
    pub nonuniform_passes: bool,
}

/// Assembles the twisting verdicts from per-minor series of |m_{I,J}| along
/// the fiber orbits. Split out so synthetic decay series can be driven
/// through the same verdict path as real ones.
pub fn twisting_verdict_from_series(
    index_pairs: &[(Vec<usize>, Vec<usize>)],
    series: &[Vec<f64>],
    tol_margin: f64,
    tol_slope: f64,
) -> TwistingReport {
    let mut minors = Vec::new();
    let mut min_minor = f64::INFINITY;
    let mut max_abs_slope: f64 = 0.0;
    for ((rows, cols), vals) in index_pairs.iter().zip(series) {
        let min_abs = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let slope = if vals.len() >= 2 && min_abs > 0.0 {
            let pts: Vec<(f64, f64)> = vals
                .iter()
                .enumerate()
                .map(|(n, v)| (n as f64, v.ln()))
                .collect();
            regression_slope(&pts)
        } else {
            f64::NEG_INFINITY
        };
        min_minor = min_minor.min(min_abs);
        max_abs_slope = max_abs_slope.max(slope.abs());
        minors.push(MinorDiagnostic {
            rows: rows.clone(),
            cols: cols.clone(),
            min_abs,
            slope,
        });
    }
    TwistingReport {
        minors,
        min_minor,
        max_abs_slope,
        tol_margin,
        tol_slope,
        uniform_passes: min_minor > tol_margin,
        nonuniform_passes: min_minor > 0.0 && max_abs_slope <= tol_slope,
    }
}

/// Twisting diagnostics: computes B along fiber orbits of the fixed leaf
/// and reports every minor's margin and decay slope. `orbit_len = 1`
/// restricts to the uniform (general position) check at the samples.
#[allow(clippy::too_many_arguments)]
pub fn check_twisting(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    z_hat: &BiSequence,
    iota: usize,
    t_samples: usize,
    orbit_len: usize,
    n_oseledets: usize,
    tol: f64,
    tol_margin: f64,
    tol_slope: f64,
) -> Result<TwistingReport> {
    let d = cocycle.dim();
    let index_pairs: Vec<(Vec<usize>, Vec<usize>)> = (1..=d)
        .flat_map(|k| {
            let sets = index_sets(d, k);
            sets.iter()
                .flat_map(|rows| sets.iter().map(move |cols| (rows.clone(), cols.clone())))
                .collect::<Vec<_>>()
        })
        .collect();

    // One series per minor, concatenating the samples; slopes are taken per
    // sample run and the worst is kept.
    let runs: Vec<Result<Vec<Vec<f64>>>> = (0..t_samples)
        .into_par_iter()
        .map(|s| {
            let t0 = CirclePoint::new((s as f64 + 0.35) / t_samples as f64);
            let mut p = FiberedPoint {
                base: p_hat.clone(),
                t: t0,
            };
            let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(orbit_len); index_pairs.len()];
            for _ in 0..orbit_len.max(1) {
                let b = twisting_matrix(cocycle, p_hat, z_hat, iota, p.t, n_oseledets, tol)?;
                for (slot, (rows, cols)) in series.iter_mut().zip(&index_pairs) {
                    slot.push(minor(&b, rows, cols).norm());
                }
                p = cocycle.step(&p);
            }
            Ok(series)
        })
        .collect();

    let mut reports: Vec<TwistingReport> = Vec::new();
    for run in runs {
        let series = run?;
        reports.push(twisting_verdict_from_series(
            &index_pairs,
            &series,
            tol_margin,
            tol_slope,
        ));
    }
    // Merge the per-sample reports: worst margin, worst slope.
    let mut merged = reports.pop().expect("at least one sample");
    for rep in reports {
        merged.min_minor = merged.min_minor.min(rep.min_minor);
        merged.max_abs_slope = merged.max_abs_slope.max(rep.max_abs_slope);
        for (m, o) in merged.minors.iter_mut().zip(&rep.minors) {
            m.min_abs = m.min_abs.min(o.min_abs);
            if o.slope.abs() > m.slope.abs() {
                m.slope = o.slope;
            }
        }
        merged.uniform_passes &= rep.uniform_passes;
        merged.nonuniform_passes &= rep.nonuniform_passes;
    }
    Ok(merged)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub pinching: PinchingReport,
    pub uniform_pinching: UniformPinchingReport,
    pub twisting: TwistingReport,
    /// Pinching and twisting in the non-uniform sense.
    pub overall_passes: bool,
    /// Both uniform variants; implies the non-uniform verdict.
    pub uniform_passes: bool,
}

/// Runs the full battery against one cocycle and its homoclinic data.
pub fn simplicity_report(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    z_hat: &BiSequence,
    iota: usize,
    params: &SimplicityParams,
) -> Result<SimplicityReport> {
    let pinching = check_pinching(
        cocycle,
        p_hat,
        params.t_samples,
        params.n_pinching,
        params.tol_gap,
    )?;
    let uniform_pinching = check_uniform_pinching(
        cocycle,
        p_hat,
        params.t_grid,
        params.uniform_n,
        params.tol_dom,
    )?;
    let twisting = check_twisting(
        cocycle,
        p_hat,
        z_hat,
        iota,
        params.t_samples,
        params.orbit_len,
        params.n_oseledets,
        params.tol,
        params.tol_margin,
        params.tol_slope,
    )?;
    let overall = pinching.passes && twisting.nonuniform_passes;
    let uniform = uniform_pinching.passes && twisting.uniform_passes;
    Ok(SimplicityReport {
        pinching,
        uniform_pinching,
        twisting,
        overall_passes: overall,
        uniform_passes: uniform,
    })
}

/// Certificate of the constant-plus-bump construction: every verified
/// precondition with its margin.
#[derive(Debug, Clone, Serialize)]
pub struct BumpExampleCertificate {
    pub eigenvalue_moduli: Vec<f64>,
    /// Exponent bound of the multiplicative relation scan.
    pub relation_scan_bound: i32,
    /// Smallest |sum m_i log |tau_i|| over scanned nonzero integer vectors,
    /// together with a witness. Purely informational when positive.
    pub min_relation_residual: f64,
    pub relation_witness: Vec<i32>,
    /// True when no scanned relation vanishes at all (the strongest form of
    /// non-resonance); subset-sum-breaking relations are hard errors.
    pub strictly_nonresonant: bool,
    pub min_minor_of_id_plus_r: f64,
    pub minor_margin_required: f64,
    pub bump_radius: f64,
    /// Min distance between the bump center and its scanned shifts; the
    /// radius is capped at a third of it so shifted balls stay disjoint.
    pub min_orbit_distance: f64,
    pub orbit_scan_range: i64,
    pub return_index: usize,
}

const RELATION_SCAN_BOUND: i32 = 6;
const RELATION_TOL: f64 = 1e-9;

fn scan_relations(tau: &[C64]) -> Result<(f64, Vec<i32>, bool)> {
    let d = tau.len();
    let logs: Vec<f64> = tau.iter().map(|t| t.norm().ln()).collect();
    let args: Vec<f64> = tau.iter().map(|t| t.arg()).collect();
    let mut min_residual = f64::INFINITY;
    let mut witness = vec![0i32; d];
    let mut strictly = true;
    let mut m = vec![-RELATION_SCAN_BOUND; d];
    loop {
        if m.iter().any(|&v| v != 0) {
            let log_res: f64 = m.iter().zip(&logs).map(|(&mi, l)| mi as f64 * l).sum();
            let arg_raw: f64 = m.iter().zip(&args).map(|(&mi, a)| mi as f64 * a).sum();
            let arg_res = {
                let two_pi = std::f64::consts::TAU;
                let r = arg_raw.rem_euclid(two_pi);
                r.min(two_pi - r)
            };
            let residual = log_res.abs().max(arg_res);
            if residual < min_residual {
                min_residual = residual;
                witness = m.clone();
            }
            if residual < RELATION_TOL {
                strictly = false;
                // A balanced sign pattern with entries in {-1, 0, 1}
                // collides two subset sums of the exponents: fatal.
                let balanced = m.iter().all(|&v| v.abs() <= 1)
                    && m.iter().map(|&v| v as i64).sum::<i64>() == 0;
                if balanced && log_res.abs() < RELATION_TOL {
                    return Err(CocycleError::ResonantEigenvalues(m.clone(), residual));
                }
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == d {
                return Ok((min_residual, witness, strictly));
            }
            if m[i] < RELATION_SCAN_BOUND {
                m[i] += 1;
                break;
            }
            m[i] = -RELATION_SCAN_BOUND;
            i += 1;
        }
    }
}

/// Builds the constant-plus-bump generator A (id + psi R) around a
/// homoclinic point of the fixed point, verifying every precondition:
/// strictly separated eigenvalue moduli, no subset-sum-breaking
/// multiplicative relation (scanned to exponent 6), all minors of id + R
/// nonzero with the requested margin, and a bump radius small enough that
/// the shifted bump balls are disjoint from the center's orbit.
pub fn bump_example(
    tau: &[C64],
    r_matrix: &CMat,
    radius: f64,
    core: &[Symbol],
    fixed_symbol: Symbol,
    holder_alpha: f64,
    tol_margin: f64,
) -> Result<(
    CocycleGenerator,
    BiSequence,
    BiSequence,
    usize,
    BumpExampleCertificate,
)> {
    let d = tau.len();
    if d < 2 {
        return Err(CocycleError::InvalidParameter(
            "need at least two eigenvalues".into(),
        ));
    }
    for i in 0..d - 1 {
        if tau[i].norm() <= tau[i + 1].norm() {
            return Err(CocycleError::InvalidParameter(format!(
                "eigenvalue moduli must be strictly decreasing, got |tau_{i}| = {} <= |tau_{}| = {}",
                tau[i].norm(),
                i + 1,
                tau[i + 1].norm()
            )));
        }
    }
    let (min_relation_residual, relation_witness, strictly_nonresonant) = scan_relations(tau)?;

    // Every minor of id + R must clear the margin.
    let id_r = identity(d) + r_matrix;
    let mut min_minor = f64::INFINITY;
    for k in 1..=d {
        let sets = index_sets(d, k);
        for rows in &sets {
            for cols in &sets {
                let m = minor(&id_r, rows, cols).norm();
                if m <= tol_margin {
                    return Err(CocycleError::MinorVanishes(
                        format!("rows {rows:?} cols {cols:?}"),
                        m,
                    ));
                }
                min_minor = min_minor.min(m);
            }
        }
    }

    if core.iter().all(|&s| s == fixed_symbol) {
        return Err(CocycleError::InvalidParameter(
            "homoclinic core must contain a symbol different from the fixed one".into(),
        ));
    }
    let p_hat = make_fixed_point(fixed_symbol);
    let (z_hat, iota) = make_homoclinic(core, fixed_symbol)?;

    // Orbit-disjointness of the bump ball: scan the shifts of the center
    // and bound the tail through convergence to the fixed point.
    let scan = iota as i64 + 12;
    let mut min_orbit_distance = f64::INFINITY;
    for j in -scan..=scan {
        if j == 0 {
            continue;
        }
        min_orbit_distance = min_orbit_distance.min(dist_sigma(&shift(&z_hat, j), &z_hat));
    }
    let dist_zp = dist_sigma(&z_hat, &p_hat);
    let tail_bound = dist_zp - 4.0 * (-((scan - iota as i64) as f64)).exp2();
    min_orbit_distance = min_orbit_distance.min(tail_bound).min(dist_zp);
    if radius > min_orbit_distance / 3.0 {
        return Err(CocycleError::BumpOverlap {
            r: radius,
            min_dist: min_orbit_distance,
        });
    }

    let a = linalg::diagonal(tau);
    let gen =
        CocycleGenerator::bump_perturbed(a, r_matrix.clone(), z_hat.clone(), radius, holder_alpha)?;
    let certificate = BumpExampleCertificate {
        eigenvalue_moduli: tau.iter().map(|t| t.norm()).collect(),
        relation_scan_bound: RELATION_SCAN_BOUND,
        min_relation_residual,
        relation_witness,
        strictly_nonresonant,
        min_minor_of_id_plus_r: min_minor,
        minor_margin_required: tol_margin,
        bump_radius: radius,
        min_orbit_distance,
        orbit_scan_range: scan,
        return_index: iota,
    };
    Ok((gen, p_hat, z_hat, iota, certificate))
}

/// The shipped 3-dimensional demonstration scenario: moduli (2, 1.1, 0.4),
/// a dense perturbation with all minors of id + R at margin >= 1e-3, bump
/// radius 0.05, rotation fibers.
pub fn bump_example_d3() -> (
    Cocycle,
    BiSequence,
    BiSequence,
    usize,
    BumpExampleCertificate,
) {
    let tau = [C64::new(2.0, 0.0), C64::new(1.1, 0.0), C64::new(0.4, 0.0)];
    let r = linalg::from_real(&[
        vec![0.1, 0.1, 0.1],
        vec![0.1, -0.1, 0.1],
        vec![0.1, 0.1, -0.1],
    ]);
    let (gen, p_hat, z_hat, iota, cert) =
        bump_example(&tau, &r, 0.05, &[1], 0, 1.0, 1e-3).expect("shipped example is valid");
    let family = FiberMapFamily::rotation(2, 0, vec![0.618_033_988_75, 0.381_966_011_25]).unwrap();
    (Cocycle::new(gen, family), p_hat, z_hat, iota, cert)
}

/// The 2-dimensional variant: moduli (2, 0.5), symmetric off-diagonal
/// perturbation.
pub fn bump_example_d2() -> (
    Cocycle,
    BiSequence,
    BiSequence,
    usize,
    BumpExampleCertificate,
) {
    let tau = [C64::new(2.0, 0.0), C64::new(0.5, 0.0)];
    let r = linalg::from_real(&[vec![0.0, 0.05], vec![0.05, 0.0]]);
    let (gen, p_hat, z_hat, iota, cert) =
        bump_example(&tau, &r, 0.05, &[1], 0, 1.0, 1e-3).expect("shipped example is valid");
    let family = FiberMapFamily::rotation(2, 0, vec![0.618_033_988_75, 0.381_966_011_25]).unwrap();
    (Cocycle::new(gen, family), p_hat, z_hat, iota, cert)
}

#[derive(Debug, Clone, Serialize)]
pub struct OpennessReport {
    pub trials: usize,
    pub preserved: usize,
    pub fraction: f64,
    pub delta: f64,
}

/// Samples random table-driven perturbations with Hölder norm at most
/// delta, reruns the uniform checks, and reports the fraction of trials
/// whose uniform-simplicity verdict survives.
#[allow(clippy::too_many_arguments)]
pub fn openness_probe(
    cocycle: &Cocycle,
    p_hat: &BiSequence,
    z_hat: &BiSequence,
    iota: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    params: &SimplicityParams,
) -> Result<OpennessReport> {
    let d = cocycle.dim();
    let alphabet_size = 2usize;
    let noise_window = 1usize;
    let t_grid = 4usize;
    // Holder norm budget of the interpolated table noise: sup norm itself,
    // plus 2 * 2^w per unit base distance, plus 2 * grid per unit fiber
    // distance. Scale the entries so the total stays within delta.
    let budget = 1.0 + 2.0 * (1u64 << (noise_window + 1)) as f64 + 2.0 * t_grid as f64;
    let sup = delta / budget;

    let results: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let perturbed = if sup == 0.0 {
                cocycle.clone()
            } else {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
                    symbolic::derive_seed(seed, k as u64),
                );
                let words = alphabet_size.pow(2 * noise_window as u32 + 1);
                let tables: Vec<CMat> = (0..words * t_grid)
                    .map(|_| {
                        let g = linalg::complex_gaussian(d, d, &mut rng);
                        let n = op_norm(&g);
                        g * C64::new(sup / n, 0.0)
                    })
                    .collect();
                // The noise generator alone need not be invertible; combine
                // with the base through a sum, which re-checks its values.
                let noise = CocycleGenerator::table_driven_additive(
                    alphabet_size,
                    noise_window,
                    t_grid,
                    tables,
                    cocycle.gen.holder_alpha(),
                )?;
                Cocycle::new(
                    CocycleGenerator::sum(cocycle.gen.clone(), noise)?,
                    cocycle.family.clone(),
                )
            };
            let up = check_uniform_pinching(
                &perturbed,
                p_hat,
                params.t_grid,
                params.uniform_n,
                params.tol_dom,
            )?;
            let tw = check_twisting(
                &perturbed,
                p_hat,
                z_hat,
                iota,
                params.t_samples,
                1,
                params.n_oseledets,
                params.tol,
                params.tol_margin,
                params.tol_slope,
            )?;
            Ok(up.passes && tw.uniform_passes)
        })
        .collect();

    let mut preserved = 0usize;
    for r in results {
        if r? {
            preserved += 1;
        }
    }
    Ok(OpennessReport {
        trials,
        preserved,
        fraction: preserved as f64 / trials as f64,
        delta,
    })
}
