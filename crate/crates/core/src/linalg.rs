//! Dense complex linear algebra helpers shared across the crate: operator
//! norms, thin QR with log-volumes, orthonormal frames for points of the
//! Grassmannian, principal angles, flag intersections, and compound
//! (exterior-power) matrices with a fixed lexicographic minor convention.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CocycleError, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn from_real(rows: &[Vec<f64>]) -> CMat {
    let d = rows.len();
    let c = rows[0].len();
    CMat::from_fn(d, c, |i, j| C64::new(rows[i][j], 0.0))
}

pub fn diagonal(entries: &[C64]) -> CMat {
    let d = entries.len();
    CMat::from_fn(
        d,
        d,
        |i, j| if i == j { entries[i] } else { C64::default() },
    )
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMat) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    m.singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Full SVD with singular values sorted descending and the factors permuted
/// to match. Returns (U, sigma, V) with M = U diag(sigma) V^H.
pub fn svd_sorted(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());

    let up = CMat::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = v_t.adjoint();
    let vp = CMat::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]);
    let sp: Vec<f64> = order.iter().map(|&k| sv[k]).collect();
    (up, sp, vp)
}

pub fn try_inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| CocycleError::SingularValue("matrix not invertible".into()))
}

/// Thin QR of a d x l matrix (l <= d): returns the orthonormal Q (d x l) and
/// the logs of the moduli of the R diagonal.
pub fn thin_qr(m: &CMat) -> (CMat, Vec<f64>) {
    let (rows, cols) = (m.nrows(), m.ncols());
    assert!(cols <= rows, "thin_qr expects a tall matrix");
    let qr = m.clone().qr();
    let q_full = qr.q();
    let r = qr.r();
    let q = q_full.columns(0, cols).into_owned();
    let log_diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm().ln()).collect();
    (q, log_diag)
}

/// Log of the l-volume of the parallelepiped spanned by the columns.
pub fn qr_log_volume(m: &CMat) -> f64 {
    thin_qr(m).1.iter().sum()
}

/// An l-dimensional subspace of C^d held as an orthonormal frame.
///
/// Equality of subspaces is testable through the canonical representative
/// (reduced column echelon form, re-orthonormalized with a fixed phase rule)
/// or metrically through `grass_distance`.
#[derive(Debug, Clone)]
pub struct Subspace {
    frame: CMat,
}

impl Subspace {
    /// Builds the span of the columns; fails if they are rank deficient.
    pub fn from_span(m: &CMat) -> Result<Self> {
        let (q, log_diag) = thin_qr(m);
        let scale = op_norm(m).max(f64::MIN_POSITIVE);
        if log_diag.iter().any(|l| *l < scale.ln() - 27.6) {
            // 27.6 ~ ln(1e12): condition-number style rank test.
            return Err(CocycleError::SingularValue(
                "spanning columns are numerically dependent".into(),
            ));
        }
        Ok(Subspace { frame: q })
    }

    pub fn from_orthonormal_frame(q: CMat) -> Result<Self> {
        let l = q.ncols();
        let gram = q.adjoint() * &q;
        if (gram - identity(l)).norm() > 1e-10 {
            return Err(CocycleError::InvalidParameter(
                "frame columns are not orthonormal".into(),
            ));
        }
        Ok(Subspace { frame: q })
    }

    /// Span of the listed standard basis vectors.
    pub fn coordinate(d: usize, axes: &[usize]) -> Self {
        let frame = CMat::from_fn(d, axes.len(), |i, j| {
            if i == axes[j] {
                C64::new(1.0, 0.0)
            } else {
                C64::default()
            }
        });
        Subspace { frame }
    }

    pub fn line(v: &CVec) -> Result<Self> {
        Subspace::from_span(&CMat::from_columns(std::slice::from_ref(v)))
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    /// A basis of the orthogonal complement.
    pub fn orthogonal_complement(&self) -> Subspace {
        let d = self.ambient_dim();
        let l = self.rank();
        // Left singular vectors l..d of the frame span the complement.
        let (u, _, _) = svd_sorted(&{
            // Pad to d columns so svd returns a full U.
            let mut m = CMat::zeros(d, d);
            m.view_mut((0, 0), (d, l)).copy_from(&self.frame);
            m
        });
        Subspace {
            frame: u.columns(l, d - l).into_owned(),
        }
    }

    /// Canonical orthonormal frame: unique per subspace up to roundoff.
    ///
    /// Computed from the reduced column echelon form (pivoting on the entry
    /// of largest modulus), then re-orthonormalized with the phases fixed
    /// against the echelon columns.
    pub fn canonical_frame(&self) -> CMat {
        let rcef = reduced_column_echelon(&self.frame);
        let (q, _) = thin_qr(&rcef);
        fix_qr_phases(&rcef, q)
    }

    /// Pluecker coordinates: the l x l minors of the frame in lexicographic
    /// order of the row index sets, normalized to unit Euclidean norm.
    pub fn plucker(&self) -> CVec {
        let d = self.ambient_dim();
        let l = self.rank();
        let sets = index_sets(d, l);
        let mut v = CVec::zeros(sets.len());
        for (i, rows) in sets.iter().enumerate() {
            v[i] = minor(&self.frame, rows, &(0..l).collect::<Vec<_>>());
        }
        let n = v.norm();
        if n > 0.0 {
            v /= C64::new(n, 0.0);
        }
        v
    }
}

fn fix_qr_phases(original: &CMat, q: CMat) -> CMat {
    // Make <q_j, original_j> real positive so the sign/phase is canonical.
    let mut q = q;
    for j in 0..q.ncols() {
        let ip: C64 = (q.column(j).adjoint() * original.column(j))[(0, 0)];
        if ip.norm() > 1e-300 {
            let phase = ip / C64::new(ip.norm(), 0.0);
            let col = q.column(j) * phase;
            q.set_column(j, &col);
        }
    }
    q
}

fn reduced_column_echelon(m: &CMat) -> CMat {
    let mut a = m.clone();
    let (d, l) = (a.nrows(), a.ncols());
    let mut col = 0usize;
    let mut row = 0usize;
    while col < l && row < d {
        // Pivot on the entry of largest modulus in row `row` among the
        // remaining columns; skip rows where every remaining column is zero.
        let pcol = (col..l)
            .max_by(|&x, &y| a[(row, x)].norm().partial_cmp(&a[(row, y)].norm()).unwrap())
            .unwrap();
        if a[(row, pcol)].norm() < 1e-12 {
            row += 1;
            continue;
        }
        a.swap_columns(col, pcol);
        let piv = a[(row, col)];
        for i in 0..d {
            a[(i, col)] /= piv;
        }
        for j in 0..l {
            if j != col {
                let f = a[(row, j)];
                for i in 0..d {
                    let v = a[(i, col)] * f;
                    a[(i, j)] -= v;
                }
            }
        }
        col += 1;
        row += 1;
    }
    a
}

/// Principal angles between equal-rank subspaces, ascending, in [0, pi/2].
///
/// Cosines come from the singular values of `A^H B`; for small angles the
/// cosine formula loses half the digits, so those angles are recomputed
/// from the sines, i.e. the singular values of `(I - A A^H) B`.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.rank() != b.rank() {
        return Err(CocycleError::RankMismatch {
            expected: a.rank(),
            got: b.rank(),
        });
    }
    let m = a.frame().adjoint() * b.frame();
    let mut cos: Vec<f64> = m
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cos.sort_by(|x, y| y.partial_cmp(x).unwrap());

    let residual = b.frame() - a.frame() * (a.frame().adjoint() * b.frame());
    let mut sin: Vec<f64> = residual
        .singular_values()
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sin.sort_by(|x, y| x.partial_cmp(y).unwrap());

    Ok(cos
        .into_iter()
        .zip(sin)
        .map(|(c, s)| if c * c > 0.5 { s.asin() } else { c.acos() })
        .collect())
}

/// Distance on the Grassmannian: Euclidean norm of the principal angle
/// vector. Ranges over [0, sqrt(l) * pi/2].
pub fn grass_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    let angles = principal_angles(a, b)?;
    Ok(angles.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Smallest principal angle between subspaces of arbitrary (possibly
/// different) ranks.
pub fn smallest_principal_angle(a: &Subspace, b: &Subspace) -> f64 {
    let m = a.frame().adjoint() * b.frame();
    let c = m
        .singular_values()
        .iter()
        .copied()
        .fold(0.0f64, f64::max)
        .clamp(0.0, 1.0);
    c.acos()
}

/// Intersection of two subspaces with expected dimension `dim`.
///
/// Returns the intersection and a degeneracy margin: the smallest singular
/// value of the stacked system *not* assigned to the intersection. A small
/// margin means the intersection dimension is numerically ambiguous.
pub fn intersect_subspaces(a: &Subspace, b: &Subspace, dim: usize) -> Result<(Subspace, f64)> {
    let d = a.ambient_dim();
    let (ra, rb) = (a.rank(), b.rank());
    assert!(dim >= 1 && dim <= ra.min(rb));
    let ncols = ra + rb;
    let mut m = CMat::zeros(d, ncols);
    m.view_mut((0, 0), (d, ra)).copy_from(a.frame());
    m.view_mut((0, ra), (d, rb)).copy_from(&(-b.frame()));
    // Null vectors of the (possibly wide) stacked system come from the
    // Hermitian eigendecomposition of the Gram matrix: singular vectors for
    // the smallest singular values.
    let gram = m.adjoint() * &m;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..ncols).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].partial_cmp(&eig.eigenvalues[y]).unwrap());
    // Margin: the first singular value kept out of the null group.
    let margin = eig.eigenvalues[order[dim]].max(0.0).sqrt();
    let mut frame = CMat::zeros(d, dim);
    for (j, idx) in order.iter().take(dim).enumerate() {
        let coeffs = eig.eigenvectors.column(*idx);
        let alpha = CVec::from_fn(ra, |i, _| coeffs[i]);
        let vec = a.frame() * alpha;
        frame.set_column(j, &vec);
    }
    let sub = Subspace::from_span(&frame).map_err(|_| {
        CocycleError::DegenerateSplit("intersection frame numerically dependent".into())
    })?;
    Ok((sub, margin))
}

/// All l-element subsets of 0..d in lexicographic order. This fixes the
/// minor indexing convention for compound matrices.
pub fn index_sets(d: usize, l: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, l: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, l, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(l);
    rec(d, l, 0, &mut cur, &mut out);
    out
}

pub fn binomial(d: usize, l: usize) -> usize {
    if l > d {
        return 0;
    }
    let l = l.min(d - l);
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 0..l {
        num *= d - i;
        den *= i + 1;
    }
    num / den
}

/// The minor det(A[rows, cols]).
pub fn minor(a: &CMat, rows: &[usize], cols: &[usize]) -> C64 {
    let l = rows.len();
    debug_assert_eq!(l, cols.len());
    let sub = CMat::from_fn(l, l, |i, j| a[(rows[i], cols[j])]);
    sub.determinant()
}

/// The l-th compound matrix: entry (I, J) = det(A[I, J]), index sets in
/// lexicographic order. Satisfies compound(AB) = compound(A) compound(B).
pub fn compound_matrix(a: &CMat, l: usize) -> CMat {
    let d = a.nrows();
    assert_eq!(d, a.ncols());
    assert!(l >= 1 && l <= d);
    let sets = index_sets(d, l);
    let n = sets.len();
    CMat::from_fn(n, n, |i, j| minor(a, &sets[i], &sets[j]))
}

pub fn complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-ish random unitary: QR of a complex Gaussian with the R diagonal
/// phases absorbed.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = complex_gaussian(d, d, rng);
    let qr = g.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        if rjj.norm() > 0.0 {
            let phase = rjj / C64::new(rjj.norm(), 0.0);
            let col = u.column(j) * phase;
            u.set_column(j, &col);
        }
    }
    u
}

/// Serializes a matrix as JSON rows of [re, im] pairs.
pub fn matrix_to_json(m: &CMat) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}

pub fn matrix_from_json(v: &serde_json::Value) -> Result<CMat> {
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(v.clone())
        .map_err(|e| CocycleError::InvalidParameter(format!("bad matrix JSON: {e}")))?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CocycleError::InvalidParameter("ragged matrix JSON".into()));
    }
    Ok(CMat::from_fn(rows.len(), rows[0].len(), |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}
