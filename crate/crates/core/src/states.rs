//! Validated quantum states, the incoherent set, and random generators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_decompose, ComplexMatrix, HermitianSpectrum, ZERO_EIG};

/// Trace-one tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Sum-to-one tolerance for probability vectors.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let spec = spectral_decompose(&mat)?;
        let min = spec.min_eigenvalue();
        if min < -ZERO_EIG {
            return Err(Error::NegativeEigenvalue(min));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        Ok(Self { mat })
    }

    /// Normalizes a PSD matrix to unit trace without re-checking positivity.
    pub(crate) fn from_psd_unchecked(mat: ComplexMatrix) -> Self {
        let tr = mat.trace().re;
        let scaled = mat.scale(1.0 / tr);
        let herm = ComplexMatrix::from_fn(scaled.dim(), |i, j| {
            if i == j {
                Complex64::new(scaled.get(i, i).re, 0.0)
            } else {
                (scaled.get(i, j) + scaled.get(j, i).conj()) * 0.5
            }
        });
        Self { mat: herm }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    pub fn spectrum(&self) -> HermitianSpectrum {
        spectral_decompose(&self.mat).expect("density matrix is Hermitian by construction")
    }

    /// Real parts of the diagonal in the reference basis.
    pub fn diagonal(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|z| z.re).collect()
    }

    /// True iff every off-diagonal entry has modulus ≤ `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.mat.max_off_diagonal() <= tol
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::trace_product(&self.mat, &self.mat)
            .expect("same dimension")
            .re
    }

    /// U ρ U†.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        Ok(Self::from_psd_unchecked(self.mat.conjugate_by(u)?))
    }

    /// ρ ⊗ σ.
    pub fn tensor(&self, other: &Self) -> Self {
        Self::from_psd_unchecked(self.mat.kron(&other.mat))
    }

    /// Σ wᵢ ρᵢ for weights summing to one.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::BadWeights("empty ensemble".into()))?;
        let d = first.1.dim();
        let mut acc = ComplexMatrix::zeros(d);
        let mut total = 0.0;
        for (w, rho) in parts {
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::BadWeights(format!("weight {w}")));
            }
            acc = acc.add(&rho.mat.scale(*w))?;
            total += w;
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::BadWeights(format!("weights sum to {total}")));
        }
        Ok(Self::from_psd_unchecked(acc))
    }
}

/// A diagonal (incoherent) state δ = Σᵢ δᵢ|i⟩⟨i|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::BadProbabilities("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::BadProbabilities(format!("entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::BadProbabilities(format!("sum {sum}")));
        }
        Ok(Self { probs })
    }

    /// Clamps negatives to zero and rescales to unit sum.
    pub(crate) fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        let sum: f64 = probs.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::BadProbabilities(format!("sum {sum}")));
        }
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    pub fn uniform(d: usize) -> Self {
        Self {
            probs: vec![1.0 / d as f64; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// The diagonal density matrix with these entries.
    pub fn embed(&self) -> DensityMatrix {
        DensityMatrix {
            mat: ComplexMatrix::from_diagonal(&self.probs),
        }
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.probs
    }
}

/// Diagonal of ρ in the reference basis, as a probability vector.
pub fn dephase(rho: &DensityMatrix) -> ProbabilityVector {
    ProbabilityVector::normalized(rho.diagonal()).expect("unit-trace state has positive diagonal mass")
}

/// ρ_m = |Ψ⟩⟨Ψ| with |Ψ⟩ = d^{-1/2} Σⱼ e^{iφⱼ}|j⟩.
pub fn maximally_coherent(d: usize, phases: &[f64]) -> Result<DensityMatrix> {
    if d == 0 {
        return Err(Error::BadShape { dim: 0, len: 0 });
    }
    if phases.len() != d {
        return Err(Error::DimMismatch(phases.len(), d));
    }
    let amp = 1.0 / (d as f64).sqrt();
    let psi: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(amp, p)).collect();
    Ok(DensityMatrix {
        mat: ComplexMatrix::projector(&psi),
    })
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Ginibre-induced random state: G G† / Tr(G G†) with G a d×rank Gaussian.
pub fn random_density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if d == 0 || rank == 0 || rank > d {
        return Err(Error::BadRank { rank, dim: d });
    }
    let g = DMatrix::from_fn(d, rank, |_, _| complex_gaussian(rng));
    let gg = &g * g.adjoint();
    Ok(DensityMatrix::from_psd_unchecked(ComplexMatrix::from_inner(gg)))
}

pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let v: Vec<Complex64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<Complex64> = v.into_iter().map(|z| z / norm).collect();
    DensityMatrix::from_psd_unchecked(ComplexMatrix::projector(&v))
}

/// Flat-Dirichlet random point of the simplex.
pub fn random_incoherent<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ProbabilityVector {
    let draws: Vec<f64> = (0..d).map(|_| Exp1.sample(rng)).collect();
    ProbabilityVector::normalized(draws).expect("exponential draws are positive")
}

/// Haar unitary: QR of a complex Ginibre matrix with the phases of R's
/// diagonal absorbed into Q.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    ComplexMatrix::from_inner(haar_columns(g))
}

/// Orthonormalizes the columns of a Gaussian matrix with Haar-distributed
/// output (also used for rectangular isometries).
pub(crate) fn haar_columns(g: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..q.ncols() {
        let rkk = r[(k, k)];
        let phase = if rkk.norm() > 0.0 {
            rkk / rkk.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..q.nrows() {
            q[(i, k)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_defect;
    use crate::rng::RngSeed;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn validator_accepts_and_rejects() {
        assert!(DensityMatrix::new(ComplexMatrix::from_diagonal(&[0.3, 0.7])).is_ok());
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::from_diagonal(&[0.3, 0.8])),
            Err(Error::BadTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::from_diagonal(&[1.1, -0.1])),
            Err(Error::NegativeEigenvalue(_))
        ));
        let skew = ComplexMatrix::from_row_major(2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]).unwrap();
        assert!(matches!(DensityMatrix::new(skew), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn probability_vector_contract() {
        assert!(ProbabilityVector::new(vec![0.25, 0.75]).is_ok());
        assert!(ProbabilityVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
    }

    #[test]
    fn dephase_reads_the_diagonal() {
        let m = maximally_coherent(2, &[0.0, 0.0]).unwrap();
        assert_eq!(dephase(&m).as_slice(), &[0.5, 0.5]);
        let d = DensityMatrix::new(ComplexMatrix::from_diagonal(&[0.3, 0.7])).unwrap();
        assert_eq!(dephase(&d).as_slice(), &[0.3, 0.7]);

        let mut rng = RngSeed(5).stream();
        let r = random_density(4, 4, &mut rng).unwrap();
        let p = dephase(&r);
        for i in 0..4 {
            assert!((p.as_slice()[i] - r.matrix().get(i, i).re).abs() < 1e-15);
        }
    }

    #[test]
    fn maximally_coherent_entries() {
        let m = maximally_coherent(3, &[0.0; 3]).unwrap();
        for z in m.matrix().to_row_major() {
            assert!((z - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        }
        let m = maximally_coherent(4, &[0.3, -1.2, 2.0, 0.7]).unwrap();
        for z in m.matrix().to_row_major() {
            assert!((z.norm() - 0.25).abs() < 1e-15);
        }
        assert!(dephase(&m).as_slice().iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!((m.purity() - 1.0).abs() < 1e-14);
        assert!(maximally_coherent(3, &[0.0; 2]).is_err());
    }

    #[test]
    fn one_dimensional_generators() {
        let mut rng = RngSeed(1).stream();
        let r = random_density(1, 1, &mut rng).unwrap();
        assert!((r.matrix().get(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        let p = random_pure(1, &mut rng);
        assert!((p.matrix().get(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(random_incoherent(1, &mut rng).as_slice(), &[1.0]);
        let u = haar_unitary(1, &mut rng);
        assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_is_respected() {
        let mut rng = RngSeed(2).stream();
        let r = random_density(4, 2, &mut rng).unwrap();
        let small = r.spectrum().eigenvalues.iter().filter(|l| l.abs() < 1e-10).count();
        assert_eq!(small, 2);
        let p = random_density(5, 1, &mut rng).unwrap();
        assert!((p.purity() - 1.0).abs() < 1e-10);
        assert!(matches!(random_density(3, 4, &mut rng), Err(Error::BadRank { .. })));
        assert!(matches!(random_density(3, 0, &mut rng), Err(Error::BadRank { .. })));
    }

    #[test]
    fn haar_unitary_has_unit_determinant_modulus() {
        let mut rng = RngSeed(3).stream();
        let u = haar_unitary(3, &mut rng);
        assert!(unitarity_defect(&u) < 1e-10);
        let det = u.inner().determinant();
        assert!((det.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let a = ProbabilityVector::uniform(2).embed();
        assert!(DensityMatrix::mixture(&[(0.5, a.clone()), (0.4, a.clone())]).is_err());
        assert!(DensityMatrix::mixture(&[]).is_err());
        let m = DensityMatrix::mixture(&[(0.5, a.clone()), (0.5, a.clone())]).unwrap();
        assert!(m.matrix().max_abs_diff(a.matrix()) < 1e-15);
    }
}
