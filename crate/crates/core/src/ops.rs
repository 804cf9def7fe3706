//! Composite Hilbert spaces and dense operators on them.
//!
//! A [`HilbertSpace`] is an ordered list of labelled tensor factors. The
//! simulator always orders factors as spins, then orbitals, then the single
//! photon mode, so basis index arithmetic is row-major over that list.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, c, C64, I, ONE, ZERO};

/// Relative max-norm tolerance for Hermitian-role operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for unit norm / unit trace of physical states.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    factors: Vec<Factor>,
}

impl HilbertSpace {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(l, d)| Factor {
                label: l.into(),
                dim: d,
            })
            .collect();
        if factors.is_empty() {
            return Err(Error::InvalidSpace("no factors".into()));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::InvalidSpace(format!("factor `{}` has dimension 0", f.label)));
            }
            if factors[..k].iter().any(|g| g.label == f.label) {
                return Err(Error::InvalidSpace(format!("duplicate label `{}`", f.label)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    pub fn factor_dim(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// Flat basis index of a product state given per-factor indices.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, f)| acc * f.dim + d)
    }

    /// Per-factor indices of a flat basis index.
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (k, f) in self.factors.iter().enumerate().rev() {
            digits[k] = index % f.dim;
            index /= f.dim;
        }
        digits
    }

    /// Subspace made of the listed factors, in this space's order.
    pub fn subspace(&self, labels: &[&str]) -> Result<HilbertSpace> {
        for l in labels {
            self.position(l)?;
        }
        let kept: Vec<(String, usize)> = self
            .factors
            .iter()
            .filter(|f| labels.contains(&f.label.as_str()))
            .map(|f| (f.label.clone(), f.dim))
            .collect();
        HilbertSpace::new(kept)
    }
}

#[derive(Debug, Clone)]
pub struct Operator {
    pub space: HilbertSpace,
    pub matrix: Array2<C64>,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: Array2<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: Array2::zeros((d, d)),
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            matrix: linalg::identity(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            space: self.space.clone(),
            matrix: linalg::dagger(&self.matrix.view()),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let d = self.hermiticity_defect();
        if d > HERMITIAN_TOL {
            Err(Error::NotHermitian(d))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    pub space: HilbertSpace,
    pub amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn new(space: HilbertSpace, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    /// Product basis state with the given per-factor indices.
    pub fn basis(space: HilbertSpace, digits: &[usize]) -> Self {
        let mut amplitudes = Array1::zeros(space.dim());
        amplitudes[space.index_of(digits)] = ONE;
        Self { space, amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < NORM_TOL
    }

    pub fn density(&self) -> DensityOperator {
        let a = &self.amplitudes;
        let n = a.len();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                m[[i, j]] = a[i] * a[j].conj();
            }
        }
        DensityOperator {
            space: self.space.clone(),
            matrix: m,
        }
    }
}

/// Density operator, or more generally any operator fed through a process map.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub space: HilbertSpace,
    pub matrix: Array2<C64>,
}

impl DensityOperator {
    pub fn new(space: HilbertSpace, matrix: Array2<C64>) -> Result<Self> {
        let op = Operator::new(space, matrix)?;
        Ok(Self {
            space: op.space,
            matrix: op.matrix,
        })
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// Hermitian with unit trace; positivity is not checked.
    pub fn is_physical(&self) -> bool {
        let herm = linalg::hermiticity_defect(&self.matrix) * linalg::max_abs(&self.matrix);
        herm < NORM_TOL && (self.trace() - ONE).norm() < NORM_TOL
    }
}

pub mod pauli {
    use super::*;

    pub fn identity() -> Array2<C64> {
        linalg::identity(2)
    }

    pub fn x() -> Array2<C64> {
        ndarray::array![[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn y() -> Array2<C64> {
        ndarray::array![[ZERO, -I], [I, ZERO]]
    }

    pub fn z() -> Array2<C64> {
        ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
    }

    /// Raising operator `|0⟩⟨1|` (index 0 is the +1 eigenstate of `z`).
    pub fn plus() -> Array2<C64> {
        ndarray::array![[ZERO, ONE], [ZERO, ZERO]]
    }

    pub fn minus() -> Array2<C64> {
        ndarray::array![[ZERO, ZERO], [ONE, ZERO]]
    }

    /// `[I, X, Y, Z]`.
    pub fn basis() -> [Array2<C64>; 4] {
        [identity(), x(), y(), z()]
    }
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at the labelled factor.
pub fn embed(op: &Array2<C64>, space: &HilbertSpace, factor_label: &str) -> Result<Operator> {
    let pos = space.position(factor_label)?;
    let fd = space.factors()[pos].dim;
    if op.nrows() != fd || op.ncols() != fd {
        return Err(Error::DimensionMismatch {
            expected: fd,
            got: op.nrows().max(op.ncols()),
        });
    }
    let left: usize = space.factors()[..pos].iter().map(|f| f.dim).product();
    let right: usize = space.factors()[pos + 1..].iter().map(|f| f.dim).product();
    let m = linalg::kron(&linalg::kron(&linalg::identity(left), op), &linalg::identity(right));
    Operator::new(space.clone(), m)
}

/// Truncated ladder operators `(a, a†)` on `n_max + 1` Fock states.
pub fn bosonic_ops(n_max: usize) -> (Array2<C64>, Array2<C64>) {
    let d = n_max + 1;
    let mut a = Array2::zeros((d, d));
    for n in 1..d {
        a[[n - 1, n]] = c((n as f64).sqrt());
    }
    let a_dag = linalg::dagger(&a.view());
    (a, a_dag)
}

/// Reduced operator on the kept factors (kept in the space's own order).
pub fn partial_trace(rho: &DensityOperator, keep_labels: &[&str]) -> Result<DensityOperator> {
    if keep_labels.is_empty() {
        return Err(Error::InvalidSpace("partial trace must keep at least one factor".into()));
    }
    let map = TraceMap::new(&rho.space, keep_labels)?;
    let dk = map.kept.dim();
    let mut out = Array2::zeros((dk, dk));
    for k1 in 0..dk {
        for k2 in 0..dk {
            let mut s = ZERO;
            for t in 0..map.traced_dim {
                s += rho.matrix[[map.full(k1, t), map.full(k2, t)]];
            }
            out[[k1, k2]] = s;
        }
    }
    DensityOperator::new(map.kept.clone(), out)
}

/// Index bookkeeping for splitting a product space into kept and traced parts.
#[derive(Debug, Clone)]
pub struct TraceMap {
    pub kept: HilbertSpace,
    pub traced_dim: usize,
    table: Vec<usize>,
}

impl TraceMap {
    pub fn new(space: &HilbertSpace, keep_labels: &[&str]) -> Result<Self> {
        let kept = space.subspace(keep_labels)?;
        let keep_mask: Vec<bool> = space
            .factors()
            .iter()
            .map(|f| keep_labels.contains(&f.label.as_str()))
            .collect();
        let traced_dims: Vec<usize> = space
            .factors()
            .iter()
            .zip(&keep_mask)
            .filter(|(_, &k)| !k)
            .map(|(f, _)| f.dim)
            .collect();
        let traced_dim: usize = traced_dims.iter().product();
        let dk = kept.dim();
        let mut table = vec![0; dk * traced_dim];
        for full in 0..space.dim() {
            let digits = space.digits_of(full);
            let (mut k, mut t) = (0usize, 0usize);
            for ((d, f), &keep) in digits.iter().zip(space.factors()).zip(&keep_mask) {
                if keep {
                    k = k * f.dim + d;
                } else {
                    t = t * f.dim + d;
                }
            }
            table[k * traced_dim + t] = full;
        }
        Ok(Self {
            kept,
            traced_dim,
            table,
        })
    }

    pub fn full(&self, kept_index: usize, traced_index: usize) -> usize {
        self.table[kept_index * self.traced_dim + traced_index]
    }

    /// `Tr_traced |a⟩⟨b|` for two full-space vectors.
    pub fn reduced_outer(&self, a: &Array1<C64>, b: &Array1<C64>) -> Array2<C64> {
        let dk = self.kept.dim();
        let mut out = Array2::zeros((dk, dk));
        for k1 in 0..dk {
            for k2 in 0..dk {
                let mut s = ZERO;
                for t in 0..self.traced_dim {
                    s += a[self.full(k1, t)] * b[self.full(k2, t)].conj();
                }
                out[[k1, k2]] = s;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending.
    pub values: Array1<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Array2<C64>,
}

pub fn hermitian_eig(op: &Operator) -> Result<Spectrum> {
    op.check_hermitian()?;
    let (values, vectors) = linalg::eigh(&op.matrix)?;
    Ok(Spectrum { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn spin_photon() -> HilbertSpace {
        HilbertSpace::new([("spin", 2), ("photon", 3)]).unwrap()
    }

    #[test]
    fn space_rejects_duplicates_and_zero_dims() {
        assert!(HilbertSpace::new([("a", 2), ("a", 2)]).is_err());
        assert!(HilbertSpace::new([("a", 0)]).is_err());
        assert_eq!(spin_photon().dim(), 6);
    }

    #[test]
    fn digits_round_trip() {
        let s = HilbertSpace::new([("a", 2), ("b", 3), ("c", 4)]).unwrap();
        for i in 0..s.dim() {
            assert_eq!(s.index_of(&s.digits_of(i)), i);
        }
    }

    #[test]
    fn embed_matches_kron() {
        let s = spin_photon();
        let e = embed(&pauli::x(), &s, "spin").unwrap();
        let expected = linalg::kron(&pauli::x(), &linalg::identity(3));
        assert_eq!(max_abs_diff(&e.matrix, &expected), 0.0);
    }

    #[test]
    fn embed_identity_is_identity() {
        let s = HilbertSpace::new([("spin1", 2), ("spin2", 2), ("photon", 4)]).unwrap();
        for l in ["spin1", "spin2"] {
            let e = embed(&pauli::identity(), &s, l).unwrap();
            assert_eq!(max_abs_diff(&e.matrix, &linalg::identity(16)), 0.0);
        }
    }

    #[test]
    fn embed_pauli_z_on_second_spin() {
        let s = HilbertSpace::new([("spin1", 2), ("spin2", 2)]).unwrap();
        let z2 = embed(&pauli::z(), &s, "spin2").unwrap();
        // |↑↓⟩ = digits (0, 1)
        let psi = StateVector::basis(s.clone(), &[0, 1]);
        let out = z2.matrix.dot(&psi.amplitudes);
        assert!((out[s.index_of(&[0, 1])] - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn embed_errors() {
        let s = spin_photon();
        assert!(matches!(embed(&pauli::x(), &s, "orb"), Err(Error::UnknownFactor(_))));
        assert!(matches!(
            embed(&pauli::x(), &s, "photon"),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bosonic_number_operator() {
        let (a, ad) = bosonic_ops(2);
        let n = ad.dot(&a);
        for k in 0..3 {
            assert!((n[[k, k]] - c(k as f64)).norm() < 1e-15);
        }
        let (a0, _) = bosonic_ops(0);
        assert_eq!(a0.dim(), (1, 1));
        assert_eq!(a0[[0, 0]], ZERO);
    }

    #[test]
    fn bosonic_commutator_truncation_artifact() {
        let n_max = 4;
        let (a, ad) = bosonic_ops(n_max);
        let comm = a.dot(&ad) - ad.dot(&a);
        let mut expected = linalg::identity(n_max + 1);
        expected[[n_max, n_max]] = c(-(n_max as f64));
        assert!(max_abs_diff(&comm, &expected) < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let s = spin_photon();
        let psi = StateVector::new(
            s.clone(),
            Array1::from(vec![
                c(0.6),
                ZERO,
                ZERO,
                C64::new(0.0, 0.8),
                ZERO,
                ZERO,
            ]),
        )
        .unwrap();
        let red = partial_trace(&psi.density(), &["spin"]).unwrap();
        let expected = ndarray::array![
            [c(0.36), C64::new(0.0, -0.48)],
            [C64::new(0.0, 0.48), c(0.64)]
        ];
        assert!(max_abs_diff(&red.matrix, &expected) < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = HilbertSpace::new([("spin1", 2), ("spin2", 2)]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(s, Array1::from(vec![c(r), ZERO, ZERO, c(r)])).unwrap();
        let red = partial_trace(&psi.density(), &["spin1"]).unwrap();
        assert!(max_abs_diff(&red.matrix, &linalg::identity(2).mapv(|z| z * 0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let s = spin_photon();
        let rho = StateVector::basis(s, &[0, 0]).density();
        assert!(matches!(partial_trace(&rho, &["orb"]), Err(Error::UnknownFactor(_))));
        assert!(partial_trace(&rho, &[]).is_err());
    }

    #[test]
    fn hermitian_eig_small_cases() {
        let s = HilbertSpace::new([("q", 2)]).unwrap();
        let sp = hermitian_eig(&Operator::new(s, pauli::z()).unwrap()).unwrap();
        assert_eq!(sp.values.to_vec(), vec![-1.0, 1.0]);

        let s3 = HilbertSpace::new([("q", 3)]).unwrap();
        let d = Array2::from_diag(&Array1::from(vec![c(3.0), c(1.0), c(2.0)]));
        let sp = hermitian_eig(&Operator::new(s3, d).unwrap()).unwrap();
        assert!((sp.values[0] - 1.0).abs() < 1e-15);
        assert!((sp.values[2] - 3.0).abs() < 1e-15);
        assert!((sp.vectors[[1, 0]].norm() - 1.0).abs() < 1e-15);
        assert!((sp.vectors[[0, 2]].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian() {
        let s = HilbertSpace::new([("q", 2)]).unwrap();
        let op = Operator::new(s, pauli::plus()).unwrap();
        assert!(matches!(hermitian_eig(&op), Err(Error::NotHermitian(_))));
    }
}
