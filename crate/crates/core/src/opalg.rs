//! Dense complex operator algebra on finite tensor products of site algebras.
//!
//! Tensor factors follow lexicographic site order: the first site of a volume
//! is the most significant factor of the Kronecker layout.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are merged into one spectral atom.
pub const CLUSTER_TOL: f64 = 1e-9;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::Shape(format!("{}x{}", m.nrows(), m.ncols())));
        }
        Ok(Operator(m))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
        }
        Ok(Operator(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Operator(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator(&self.0 * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// max |A_ij - conj(A_ji)|
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect <= HERMITIAN_TOL * self.max_abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotHermitian(defect))
        }
    }

    /// True when every off-diagonal entry has modulus at most `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)].norm() <= tol))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_diagonal(0.0) {
            return (0..self.dim()).map(|i| self.0[(i, i)].norm()).fold(0.0, f64::max);
        }
        let gram = Operator(self.0.adjoint() * &self.0);
        let eig = SymmetricEigen::new(gram.0);
        eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

/// Pauli matrices and a few spin operators.
pub mod spin {
    use super::{Operator, C64};

    pub fn id2() -> Operator {
        Operator::identity(2)
    }

    pub fn sx() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn sy() -> Operator {
        let i = C64::new(0.0, 1.0);
        Operator::from_rows(&[vec![C64::new(0.0, 0.0), -i], vec![i, C64::new(0.0, 0.0)]]).unwrap()
    }

    pub fn sz() -> Operator {
        Operator::from_diagonal(&[1.0, -1.0])
    }

    /// Spin-1 z component, diag(1, 0, -1).
    pub fn spin1_z() -> Operator {
        Operator::from_diagonal(&[1.0, 0.0, -1.0])
    }

    /// Spin-1 x component.
    pub fn spin1_x() -> Operator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Operator::from_real_rows(&[&[0.0, s, 0.0], &[s, 0.0, s], &[0.0, s, 0.0]]).unwrap()
    }
}

/// Kronecker product, left factor most significant.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator(a.0.kronecker(&b.0))
}

/// Index bookkeeping for a set of tensor positions inside a larger product space.
#[derive(Clone, Debug)]
pub(crate) struct TensorLayout {
    /// For each local multi-index, its contribution to the global index.
    pub offsets: Vec<usize>,
    /// Stride of each embedded factor in the global index.
    pub strides: Vec<usize>,
    pub site_dim: usize,
}

impl TensorLayout {
    /// `positions` are factor positions (0 = most significant) inside a
    /// product of `n_factors` copies of a `site_dim` dimensional space.
    pub fn new(positions: &[usize], n_factors: usize, site_dim: usize) -> Self {
        let strides: Vec<usize> = positions
            .iter()
            .map(|&p| site_dim.pow((n_factors - 1 - p) as u32))
            .collect();
        let local_dim = site_dim.pow(positions.len() as u32);
        let mut offsets = vec![0usize; local_dim];
        for (c, off) in offsets.iter_mut().enumerate() {
            let mut rem = c;
            let mut acc = 0;
            for stride in strides.iter().rev() {
                acc += (rem % site_dim) * stride;
                rem /= site_dim;
            }
            *off = acc;
        }
        TensorLayout {
            offsets,
            strides,
            site_dim,
        }
    }

    /// Local multi-index of a global basis index.
    #[inline]
    pub fn local_index(&self, global: usize) -> usize {
        let mut r = 0;
        for &s in &self.strides {
            r = r * self.site_dim + (global / s) % self.site_dim;
        }
        r
    }
}

/// Places `op`, acting on the sites of `support` (lexicographic order), into
/// the algebra of `volume` with identities on the remaining sites.
pub fn embed<S: Ord + Debug>(
    op: &Operator,
    support: &[S],
    volume: &[S],
    site_dim: usize,
) -> Result<Operator> {
    if support.windows(2).any(|w| w[0] >= w[1]) || volume.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Shape("site lists must be strictly increasing".into()));
    }
    let expected = site_dim.pow(support.len() as u32);
    if op.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: op.dim(),
        });
    }
    let mut positions = Vec::with_capacity(support.len());
    for s in support {
        match volume.binary_search(s) {
            Ok(p) => positions.push(p),
            Err(_) => return Err(Error::NotContained(format!("{:?}", s))),
        }
    }
    let n = volume.len();
    let dim = site_dim.pow(n as u32);
    let layout = TensorLayout::new(&positions, n, site_dim);
    let mut m = DMatrix::zeros(dim, dim);
    add_embedded(&mut m, op, &layout, ONE);
    Ok(Operator(m))
}

/// target += scale * (op placed at `layout`, identity elsewhere).
pub(crate) fn add_embedded(target: &mut DMatrix<C64>, op: &Operator, layout: &TensorLayout, scale: C64) {
    let dim = target.nrows();
    for i in 0..dim {
        let r = layout.local_index(i);
        let base = i - layout.offsets[r];
        for (c, &off) in layout.offsets.iter().enumerate() {
            let v = op.0[(r, c)];
            if v != ZERO {
                target[(i, base + off)] += v * scale;
            }
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and a
/// unitary matrix whose columns are the eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    /// U diag(f(λ)) U†
    pub fn map<F: Fn(f64) -> C64>(&self, f: F) -> Operator {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let fk = f(lam);
            for v in scaled.column_mut(k).iter_mut() {
                *v *= fk;
            }
        }
        Operator(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|l| C64::new(l, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Distinct eigenvalues (merged within [`CLUSTER_TOL`]) with the indices
    /// of the eigenvectors spanning each eigenspace.
    pub fn clusters(&self) -> Vec<(f64, Vec<usize>)> {
        cluster_sorted(&self.eigenvalues, CLUSTER_TOL)
    }
}

/// Groups an ascending list into runs whose spread from the first member is
/// within `tol`; returns the run mean and member indices.
pub(crate) fn cluster_sorted(values: &[f64], tol: f64) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut start = f64::NAN;
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some((_, idx)) if (v - start).abs() <= tol => idx.push(i),
            _ => {
                start = v;
                out.push((v, vec![i]));
            }
        }
    }
    for (atom, idx) in out.iter_mut() {
        *atom = idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64;
    }
    out
}

/// Diagonalizes a Hermitian matrix. Eigenvectors are normalized so that
/// their first non-negligible component is real and positive.
pub fn herm_eig(a: &Operator) -> Result<SpectralDecomposition> {
    a.check_hermitian()?;
    let n = a.dim();
    if a.is_diagonal(0.0) {
        let diag: Vec<f64> = (0..n).map(|i| a.0[(i, i)].re).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
        let mut vecs = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            vecs[(i, k)] = ONE;
        }
        return Ok(SpectralDecomposition {
            eigenvalues: order.iter().map(|&i| diag[i]).collect(),
            eigenvectors: vecs,
        });
    }
    let eig = SymmetricEigen::new(a.0.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lead = col
            .iter()
            .find(|z| z.norm() > 1e-8 * scale)
            .copied()
            .unwrap_or(ONE);
        let phase = lead.conj() / lead.norm();
        for r in 0..n {
            vecs[(r, k)] = col[r] * phase;
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vecs,
    })
}

/// e^{sA} for Hermitian A and complex s.
pub fn mat_exp(a: &Operator, s: C64) -> Result<Operator> {
    Ok(herm_eig(a)?.map(|l| (s * l).exp()))
}

/// f(A) through the spectral theorem.
pub fn func_calc<F: Fn(f64) -> f64>(a: &Operator, f: F) -> Result<Operator> {
    let eig = herm_eig(a)?;
    for &l in &eig.eigenvalues {
        if !f(l).is_finite() {
            return Err(Error::UndefinedFunction(l));
        }
    }
    Ok(eig.map(|l| C64::new(f(l), 0.0)))
}

/// Finitely supported probability measure on the real line.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::Shape("atoms and weights must be nonempty and aligned".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("atoms must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| w < -1e-12) {
            return Err(Error::Domain("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("weights sum to {}", total)));
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.powi(k))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Weight of the atom within `tol` of `x`, zero if none.
    pub fn weight_at(&self, x: f64, tol: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| (*a - x).abs() <= tol)
            .map(|(_, w)| *w)
            .sum()
    }
}

/// Checks Hermiticity, unit trace and positivity of a density matrix.
pub fn check_density(rho: &Operator) -> Result<()> {
    rho.check_hermitian()
        .map_err(|e| Error::NotDensity(e.to_string()))?;
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::NotDensity(format!("trace {}", tr)));
    }
    let eig = herm_eig(rho)?;
    if eig.eigenvalues[0] < -1e-12 {
        return Err(Error::NotDensity(format!(
            "negative eigenvalue {:.3e}",
            eig.eigenvalues[0]
        )));
    }
    Ok(())
}

/// Distribution of the Hermitian `a` in the state `rho`: the weight of each
/// distinct eigenvalue is Tr(rho P_λ).
pub fn spectral_distribution(a: &Operator, rho: &Operator) -> Result<DiscreteMeasure> {
    if a.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: rho.dim(),
        });
    }
    check_density(rho)?;
    let eig = herm_eig(a)?;
    let n = a.dim();
    let diag: Vec<f64> = (0..n)
        .map(|k| {
            let u = eig.eigenvectors.column(k);
            (u.adjoint() * rho.matrix() * u)[(0, 0)].re
        })
        .collect();
    let (atoms, weights) = eig
        .clusters()
        .into_iter()
        .map(|(atom, idx)| (atom, idx.iter().map(|&k| diag[k]).sum::<f64>()))
        .unzip();
    Ok(DiscreteMeasure { atoms, weights })
}

/// Polar decomposition X = J |X| with J unitary, |X| = sqrt(X* X).
#[derive(Clone, Debug)]
pub struct PolarParts {
    pub unitary: Operator,
    pub abs: Operator,
}

pub fn polar(x: &Operator) -> Result<PolarParts> {
    let gram = Operator(x.0.adjoint() * &x.0);
    // X*X is Hermitian up to rounding; symmetrize before the Hermitian solver sees it.
    let gram = Operator((&gram.0 + gram.0.adjoint()) * C64::new(0.5, 0.0));
    let eig = herm_eig(&gram)?;
    let smallest = eig.eigenvalues[0].max(0.0).sqrt();
    if smallest <= 1e-12 {
        return Err(Error::Singular(smallest));
    }
    let abs = eig.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let inv_abs = eig.map(|l| C64::new(1.0 / l.sqrt(), 0.0));
    Ok(PolarParts {
        unitary: x * &inv_abs,
        abs,
    })
}

/// Norm of the functional B ↦ Tr(XB)/Tr(X) together with its extremal witness.
#[derive(Clone, Debug)]
pub struct PsiNorm {
    pub norm: f64,
    /// C = J*, a unitary attaining the norm.
    pub witness: Operator,
    /// |Tr(C X)| / |Tr X| at the witness.
    pub attained: f64,
    pub polar: PolarParts,
}

/// Tr(XB)/Tr(X).
pub fn psi_functional(x: &Operator, b: &Operator) -> C64 {
    (x * b).trace() / x.trace()
}

/// ‖Ψ_X‖ = Tr|X| / |Tr X| for invertible X with nonzero trace.
pub fn psi_norm(x: &Operator) -> Result<PsiNorm> {
    let tr = x.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::UnboundedFunctional(tr.norm()));
    }
    let polar = polar(x)?;
    let trace_abs = polar.abs.trace().re;
    let witness = polar.unitary.adjoint();
    let attained = psi_functional(x, &witness).norm();
    Ok(PsiNorm {
        norm: trace_abs / tr.norm(),
        witness,
        attained,
        polar,
    })
}
