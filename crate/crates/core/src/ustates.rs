//! Measures on Grassmannian fibers and their dynamics: push-forwards along
//! backward orbits and the Dirac-convergence diagnostics, the invariant
//! section of most-expanded images, the complementary section from the
//! adjoint cocycle, hyperplane-mass probes, quasi-projective normalization,
//! and the one-sided (canonical past) reduction.

use serde::Serialize;

use crate::error::{CocycleError, Result};
pub use crate::linalg::grass_distance;
use crate::linalg::{
    self, singular_values, smallest_principal_angle, svd_sorted, thin_qr, CMat, Subspace, C64,
};
use crate::lincocycle::{canonical_past, Cocycle, CocycleGenerator};
use crate::skewprod::{FiberKind, FiberMapFamily, FiberedPoint};
use crate::spectrum::directed_flag;
use crate::symbolic::{self, BiSequence, Symbol};

/// A finitely supported probability measure on Grass(l, d).
#[derive(Debug, Clone)]
pub struct AtomicGrassMeasure {
    rank: usize,
    atoms: Vec<(Subspace, f64)>,
}

impl AtomicGrassMeasure {
    pub fn new(atoms: Vec<(Subspace, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(CocycleError::InvalidParameter(
                "measure needs at least one atom".into(),
            ));
        }
        let rank = atoms[0].0.rank();
        if atoms.iter().any(|(s, _)| s.rank() != rank) {
            return Err(CocycleError::RankMismatch {
                expected: rank,
                got: atoms
                    .iter()
                    .find(|(s, _)| s.rank() != rank)
                    .unwrap()
                    .0
                    .rank(),
            });
        }
        if atoms.iter().any(|(_, w)| *w <= 0.0) {
            return Err(CocycleError::InvalidParameter(
                "atom weights must be positive".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CocycleError::InvalidParameter(format!(
                "atom weights must sum to 1, got {total}"
            )));
        }
        Ok(AtomicGrassMeasure { rank, atoms })
    }

    /// Uniform measure on `n` seeded random l-subspaces of C^d.
    pub fn random_uniform(d: usize, l: usize, n: usize, seed: u64) -> Result<Self> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let atoms = (0..n)
            .map(|_| {
                let span = linalg::complex_gaussian(d, l, &mut rng);
                Subspace::from_span(&span).map(|s| (s, 1.0 / n as f64))
            })
            .collect::<Result<Vec<_>>>()?;
        AtomicGrassMeasure::new(atoms)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn atoms(&self) -> &[(Subspace, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Max pairwise distance of the support.
    pub fn support_diameter(&self) -> f64 {
        let mut diam = 0.0f64;
        for i in 0..self.atoms.len() {
            for j in (i + 1)..self.atoms.len() {
                diam = diam.max(
                    grass_distance(&self.atoms[i].0, &self.atoms[j].0)
                        .expect("uniform rank by construction"),
                );
            }
        }
        diam
    }

    /// Weighted barycenter proxy: the atom minimizing the weighted sum of
    /// distances to the others. Good enough to name the limit of a measure
    /// collapsing to a point.
    pub fn medoid(&self) -> &Subspace {
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for i in 0..self.atoms.len() {
            let cost: f64 = self
                .atoms
                .iter()
                .map(|(s, w)| w * grass_distance(&self.atoms[i].0, s).unwrap())
                .sum();
            if cost < best_cost {
                best_cost = cost;
                best = i;
            }
        }
        &self.atoms[best].0
    }
}

/// Push-forward by an invertible matrix: frames multiplied and
/// re-orthonormalized, weights untouched.
///
/// The backward-orbit experiments feed in products of enormous
/// eccentricity on purpose, so singularity is judged per atom: the push
/// fails only when some atom's image frame actually degenerates.
pub fn pushforward(m: &AtomicGrassMeasure, l_matrix: &CMat) -> Result<AtomicGrassMeasure> {
    if linalg::op_norm(l_matrix) <= 0.0 {
        return Err(CocycleError::SingularValue(
            "push-forward by the zero matrix".into(),
        ));
    }
    let atoms = m
        .atoms
        .iter()
        .map(|(s, w)| {
            Subspace::from_span(&(l_matrix * s.frame()))
                .map(|s| (s, *w))
                .map_err(|_| {
                    CocycleError::SingularValue(
                        "atom image degenerates under the push-forward".into(),
                    )
                })
        })
        .collect::<Result<Vec<_>>>()?;
    AtomicGrassMeasure::new(atoms)
}

#[derive(Debug, Clone)]
pub struct PushforwardStage {
    pub n: usize,
    pub measure: AtomicGrassMeasure,
    pub diameter: f64,
}

/// Pushes `m0` forward by A^n evaluated at the n-th backward iterate of
/// `point`, for each n in `n_list` (ascending). The products are extended
/// incrementally and renormalized by scalars, which leaves the projective
/// action untouched.
pub fn backward_pushforward_experiment(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    m0: &AtomicGrassMeasure,
    n_list: &[usize],
) -> Result<Vec<PushforwardStage>> {
    let mut sorted = n_list.to_vec();
    sorted.sort_unstable();
    let mut stages = Vec::with_capacity(sorted.len());
    let mut product = linalg::identity(cocycle.dim());
    let mut q = point.clone();
    let mut n_done = 0usize;
    for &n in &sorted {
        while n_done < n {
            q = cocycle.step_n(&q, -1);
            product *= cocycle.value(&q)?;
            let norm = product.norm();
            product /= C64::new(norm, 0.0);
            n_done += 1;
        }
        let measure = pushforward(m0, &product)?;
        let diameter = measure.support_diameter();
        stages.push(PushforwardStage {
            n,
            measure,
            diameter,
        });
    }
    Ok(stages)
}

/// The invariant section: the image under A^n(f^{-n} point) of its most
/// expanded l-subspace, computed through a re-orthonormalized directed flag
/// and gated by an eccentricity estimate. The result must stabilize in n
/// within `tol`.
pub fn section_xi(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    l: usize,
    n: usize,
    tol: f64,
) -> Result<Subspace> {
    let d = cocycle.dim();
    if l == 0 || l >= d {
        return Err(CocycleError::InvalidParameter(format!(
            "section rank {l} out of range 1..{d}"
        )));
    }
    let xi_n = directed_image_flag(cocycle, point, l, n, tol)?;
    let n_prev = n.saturating_sub((n / 10).max(5)).max(1);
    let xi_prev = directed_image_flag(cocycle, point, l, n_prev, tol)?;
    let drift = grass_distance(&xi_n, &xi_prev)?;
    if drift > tol {
        return Err(CocycleError::NoConvergence {
            n_max: n,
            last_delta: drift,
        });
    }
    Ok(xi_n)
}

/// Top-l image flag of A^n at f^{-n}(point), with the eccentricity gate
/// E(l, A^n) > 1/tol estimated from the flag growth logs.
fn directed_image_flag(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    l: usize,
    n: usize,
    tol: f64,
) -> Result<Subspace> {
    let back = cocycle.step_n(point, -(n as i64));
    let (frame, logs) = directed_flag(cocycle, &back, n)?;
    let log_gap = logs[l - 1] - logs[l];
    let required = 1.0 / tol.max(1e-300);
    if log_gap < required.ln() {
        return Err(CocycleError::InsufficientEccentricity {
            got: log_gap.exp(),
            required,
        });
    }
    Subspace::from_orthonormal_frame(frame.columns(0, l).into_owned())
}

/// The complementary pair: xi from this cocycle, xi* from the adjoint over
/// inverse time, eta the orthogonal complement of xi*. Errors with
/// `NonTransverse` when the minimal principal angle between xi and eta
/// does not exceed `tol`.
pub fn complementary_section(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    l: usize,
    n: usize,
    tol: f64,
) -> Result<(Subspace, Subspace, f64)> {
    let xi = section_xi(cocycle, point, l, n, tol.max(1e-9))?;
    let adj = cocycle.adjoint();
    let xi_star = section_xi(&adj, point, l, n, tol.max(1e-9))?;
    let eta = xi_star.orthogonal_complement();
    let min_angle = smallest_principal_angle(&xi, &eta);
    if min_angle <= tol {
        return Err(CocycleError::NonTransverse { margin: min_angle });
    }
    Ok((xi, eta, min_angle))
}

/// The i-th Oseledets line (1-indexed, fastest first) at a generic point,
/// from the invariant sections: E^1 is the top section, E^d the complement
/// of the top adjoint section, and interior lines are cut out as
/// xi_i intersected with eta_{i-1}.
pub fn invariant_line(
    cocycle: &Cocycle,
    point: &FiberedPoint,
    i: usize,
    n: usize,
    tol: f64,
) -> Result<Subspace> {
    let d = cocycle.dim();
    if i == 0 || i > d {
        return Err(CocycleError::InvalidParameter(format!(
            "line index {i} out of range 1..={d}"
        )));
    }
    if i == 1 {
        return section_xi(cocycle, point, 1, n, tol);
    }
    if i == d {
        let (_, eta, _) = complementary_section(cocycle, point, d - 1, n, tol)?;
        return Ok(eta);
    }
    let xi_i = section_xi(cocycle, point, i, n, tol)?;
    let (_, eta_prev, _) = complementary_section(cocycle, point, i - 1, n, tol)?;
    let (line, margin) = linalg::intersect_subspaces(&xi_i, &eta_prev, 1)?;
    if margin < 1e-8 {
        return Err(CocycleError::DegenerateSplit(format!(
            "line {i} intersection margin {margin:.3e}"
        )));
    }
    Ok(line)
}

/// Total weight of atoms meeting the (d-l)-subspace V nontrivially, in the
/// numerical sense: smallest singular value of the stacked frames below
/// sin(tol_angle).
pub fn hyperplane_mass(m: &AtomicGrassMeasure, v: &Subspace, tol_angle: f64) -> Result<f64> {
    let d = v.ambient_dim();
    if v.rank() + m.rank() != d {
        return Err(CocycleError::RankMismatch {
            expected: d - m.rank(),
            got: v.rank(),
        });
    }
    let threshold = tol_angle.sin();
    let mut mass = 0.0;
    for (atom, w) in &m.atoms {
        let mut stacked = CMat::zeros(d, d);
        stacked
            .view_mut((0, 0), (d, m.rank()))
            .copy_from(atom.frame());
        stacked
            .view_mut((0, m.rank()), (d, v.rank()))
            .copy_from(v.frame());
        let sv = singular_values(&stacked);
        if sv[d - 1] < threshold {
            mass += w;
        }
    }
    Ok(mass)
}

/// A possibly singular matrix normalized to unit operator norm, acting on
/// the Grassmannian off its numerical kernel.
#[derive(Debug, Clone, Serialize)]
pub struct QuasiProjective {
    #[serde(skip)]
    pub matrix: CMat,
    pub kernel_threshold: f64,
    pub kernel_dim: usize,
}

/// Normalizes L to unit operator norm and classifies its numerical kernel.
pub fn quasi_projective_normalize(l_matrix: &CMat, threshold: f64) -> Result<QuasiProjective> {
    let norm = linalg::op_norm(l_matrix);
    if norm <= 0.0 {
        return Err(CocycleError::ZeroMatrix);
    }
    let q = l_matrix / C64::new(norm, 0.0);
    let sv = singular_values(&q);
    let kernel_dim = sv.iter().filter(|s| **s < threshold).count();
    Ok(QuasiProjective {
        matrix: q,
        kernel_threshold: threshold,
        kernel_dim,
    })
}

impl QuasiProjective {
    /// The numerical kernel as a subspace, when nontrivial.
    pub fn kernel(&self) -> Option<Subspace> {
        if self.kernel_dim == 0 {
            return None;
        }
        let d = self.matrix.nrows();
        let (_, _, v) = svd_sorted(&self.matrix);
        Subspace::from_orthonormal_frame(
            v.columns(d - self.kernel_dim, self.kernel_dim).into_owned(),
        )
        .ok()
    }

    /// Image of a subspace; `KernelHit` when the subspace meets the
    /// numerical kernel (the image frame degenerates below the threshold).
    pub fn apply(&self, s: &Subspace) -> Result<Subspace> {
        let image = &self.matrix * s.frame();
        let sv = singular_values(&image);
        if sv[sv.len() - 1] < self.kernel_threshold {
            return Err(CocycleError::KernelHit);
        }
        let (q, _) = thin_qr(&image);
        Subspace::from_orthonormal_frame(q)
    }
}

/// Conjugates the cocycle by stable holonomies so that both the fiber maps
/// and the matrices depend only on the future coordinates. Returns the
/// reduced generator together with the reduced (future-only) fiber family.
///
/// Supported bases: rotation families of any window, and arbitrary families
/// of window zero (whose maps are already future-only). The reduced family
/// of a window-w rotation family depends on coordinates 0..2w and is stored
/// as a window-2w table.
pub fn reduce_one_sided(
    gen: &CocycleGenerator,
    family: &FiberMapFamily,
    alphabet_size: usize,
) -> Result<(CocycleGenerator, FiberMapFamily)> {
    let past_symbol: Symbol = 0;
    let reduced_family = reduce_family(family, alphabet_size, past_symbol)?;
    let reduced_gen = CocycleGenerator::one_sided_reduced(gen.clone(), family.clone(), past_symbol);
    Ok((reduced_gen, reduced_family))
}

fn reduce_family(
    family: &FiberMapFamily,
    alphabet_size: usize,
    past_symbol: Symbol,
) -> Result<FiberMapFamily> {
    let w = family.window();
    if w == 0 {
        // Maps already depend on x_0 only.
        return Ok(family.clone());
    }
    match family.kind() {
        FiberKind::Rotation { .. } => {
            // beta(y) = angle(phi(y)) + sum_j [angle(s^{j+1} phi(y)) -
            // angle(s^j phi(s y))]; depends on y_0..y_{2w}. Tabulate over
            // a window of 2w.
            let big_w = 2 * w;
            let words = alphabet_size.pow(2 * big_w as u32 + 1);
            if words > 1 << 20 {
                return Err(CocycleError::InvalidParameter(
                    "reduced family table too large".into(),
                ));
            }
            let mut angles = Vec::with_capacity(words);
            for word_idx in 0..words {
                // Decode the word onto coordinates -big_w..big_w; only the
                // future half matters for the reduced map.
                let mut symbols = vec![0u8; 2 * big_w + 1];
                let mut rem = word_idx;
                for slot in (0..2 * big_w + 1).rev() {
                    symbols[slot] = (rem % alphabet_size) as u8;
                    rem /= alphabet_size;
                }
                let core: Vec<Symbol> = symbols.clone();
                let y = BiSequence::Exact {
                    left_period: vec![past_symbol],
                    core,
                    right_period: vec![past_symbol],
                    anchor: -(big_w as i64),
                };
                let beta = reduced_rotation_angle(family, &y, past_symbol)?;
                angles.push(beta);
            }
            FiberMapFamily::rotation(alphabet_size, big_w, angles)
        }
        FiberKind::PerturbedRotation { .. } => Err(CocycleError::UnsupportedFamily(
            "one-sided reduction of perturbed rotations with positive window".into(),
        )),
    }
}

fn reduced_rotation_angle(
    family: &FiberMapFamily,
    y: &BiSequence,
    past_symbol: Symbol,
) -> Result<f64> {
    // The reduced map is h^s_{s phi(y), phi(s y)} o f_{phi(y)}; for
    // rotations, compose the angles by transporting 0.
    let phi_y = canonical_past(y, past_symbol);
    let phi_sy = canonical_past(&symbolic::shift(y, 1), past_symbol);
    let t0 = crate::skewprod::CirclePoint::new(0.0);
    let ft = family.apply(&phi_y, t0);
    let image =
        crate::skewprod::base_holonomy_s(family, &symbolic::shift(&phi_y, 1), &phi_sy, ft, 1e-14)?;
    Ok(image.value())
}
