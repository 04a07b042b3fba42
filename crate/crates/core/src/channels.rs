//! Kraus channels, incoherent operations and sub-selective application.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::states::{complex_gaussian, haar_columns, DensityMatrix};

/// Completeness tolerance, max entrywise |Σ K†K - I|.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Outcomes with probability below this are dropped by [`KrausChannel::select`].
pub const P_MIN: f64 = 1e-12;
/// Default modulus threshold for [`KrausChannel::is_incoherent`].
pub const INCOHERENT_TOL: f64 = 1e-10;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// A trace-preserving completely positive map {K_n}, Σ K_n†K_n = I.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<ComplexMatrix>,
}

/// One retained outcome of a sub-selective measurement.
#[derive(Debug, Clone)]
pub struct SelectiveOutcome {
    pub index: usize,
    pub prob: f64,
    pub post_state: DensityMatrix,
}

/// Result of [`KrausChannel::select`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub outcomes: Vec<SelectiveOutcome>,
    /// Probability carried by outcomes below [`P_MIN`].
    pub dropped_mass: f64,
    /// `prob` of every Kraus operator in order, including dropped ones.
    pub all_probs: Vec<f64>,
}

impl Selection {
    pub fn outcome(&self, index: usize) -> Option<&SelectiveOutcome> {
        self.outcomes.iter().find(|o| o.index == index)
    }
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        let defect = ch.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::NotComplete(defect));
        }
        Ok(ch)
    }

    fn new_unchecked(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let d = kraus.first().ok_or(Error::EmptyChannel)?.dim();
        if let Some(k) = kraus.iter().find(|k| k.dim() != d) {
            return Err(Error::DimMismatch(d, k.dim()));
        }
        Ok(Self { kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            kraus: vec![ComplexMatrix::identity(d)],
        }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    /// Max entrywise |Σ K_n†K_n - I|.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.dim();
        let mut acc = DMatrix::from_element(d, d, C0);
        for k in &self.kraus {
            acc += k.inner().adjoint() * k.inner();
        }
        ComplexMatrix::from_inner(acc).max_abs_diff(&ComplexMatrix::identity(d))
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::DimMismatch(self.dim(), rho.dim()));
        }
        Ok(())
    }

    /// K ρ K† for every operator, unnormalized.
    pub fn branches(&self, rho: &DensityMatrix) -> Result<Vec<ComplexMatrix>> {
        self.check_dim(rho)?;
        let r = rho.matrix().inner();
        Ok(self
            .kraus
            .iter()
            .map(|k| ComplexMatrix::from_inner(k.inner() * r * k.inner().adjoint()))
            .collect())
    }

    /// Non-selective application Σ_n K_n ρ K_n†.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d);
        for b in self.branches(rho)? {
            acc = acc.add(&b)?;
        }
        Ok(DensityMatrix::from_psd_unchecked(acc))
    }

    /// Sub-selective application: (p_n, ρ_n) with p_n = Tr K_n ρ K_n† and
    /// ρ_n = K_n ρ K_n† / p_n.
    pub fn select(&self, rho: &DensityMatrix) -> Result<Selection> {
        let mut outcomes = Vec::with_capacity(self.kraus.len());
        let mut all_probs = Vec::with_capacity(self.kraus.len());
        let mut dropped_mass = 0.0;
        for (index, b) in self.branches(rho)?.into_iter().enumerate() {
            let prob = b.trace().re.max(0.0);
            all_probs.push(prob);
            if prob < P_MIN {
                dropped_mass += prob;
                continue;
            }
            outcomes.push(SelectiveOutcome {
                index,
                prob,
                post_state: DensityMatrix::from_psd_unchecked(b),
            });
        }
        Ok(Selection {
            outcomes,
            dropped_mass,
            all_probs,
        })
    }

    /// True iff every Kraus operator has at most one entry of modulus > `tol`
    /// per column, i.e. maps diagonal states to diagonal states.
    pub fn is_incoherent(&self, tol: f64) -> bool {
        self.kraus.iter().all(|k| {
            let d = k.dim();
            (0..d).all(|j| (0..d).filter(|&i| k.get(i, j).norm() > tol).count() <= 1)
        })
    }
}

/// Δ: K_i = |i⟩⟨i|.
pub fn dephasing_channel(d: usize) -> KrausChannel {
    let kraus = (0..d)
        .map(|i| {
            let mut diag = vec![0.0; d];
            diag[i] = 1.0;
            ComplexMatrix::from_diagonal(&diag)
        })
        .collect();
    KrausChannel { kraus }
}

/// Random incoherent operation with exactly `n_kraus` operators.
///
/// Each column j of K_n has a single entry at row f_n(j). Stacking the n
/// entries of column j gives a vector c_j ∈ ℂⁿ, and completeness is the
/// condition that c_j is a unit vector orthogonal to c_{j'} on the slots
/// where f_n(j) = f_n(j'). Columns are drawn in order as complex Gaussians
/// projected onto the complement of those earlier constraints, so
/// completeness holds to rounding error while row collisions inside one
/// operator remain possible. Without collisions the weights |c_j[n]|² are
/// flat-Dirichlet and the phases uniform.
pub fn random_incoherent_channel<R: Rng + ?Sized>(d: usize, n_kraus: usize, rng: &mut R) -> Result<KrausChannel> {
    if n_kraus == 0 {
        return Err(Error::EmptyChannel);
    }
    let mut targets: Vec<Vec<usize>> = Vec::with_capacity(d);
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(d);

    for j in 0..d {
        let mut chosen = None;
        for _ in 0..64 {
            let rows: Vec<usize> = (0..n_kraus).map(|_| rng.gen_range(0..d)).collect();
            if let Some(v) = constrained_unit_vector(&rows, &targets, &columns, rng) {
                chosen = Some((rows, v));
                break;
            }
        }
        let (rows, v) = match chosen {
            Some(c) => c,
            None => {
                // Rows unused by earlier columns always exist since j < d.
                let rows: Vec<usize> = (0..n_kraus)
                    .map(|n| {
                        let free: Vec<usize> = (0..d).filter(|&r| targets.iter().all(|t| t[n] != r)).collect();
                        free[rng.gen_range(0..free.len())]
                    })
                    .collect();
                let v = constrained_unit_vector(&rows, &targets, &columns, rng).expect("unconstrained column");
                (rows, v)
            }
        };
        debug_assert_eq!(j, targets.len());
        targets.push(rows);
        columns.push(v);
    }

    Ok(assemble(d, &targets, &columns))
}

fn constrained_unit_vector<R: Rng + ?Sized>(
    rows: &[usize],
    targets: &[Vec<usize>],
    columns: &[Vec<Complex64>],
    rng: &mut R,
) -> Option<Vec<Complex64>> {
    let basis = constraint_basis(rows, targets, columns)?;
    let x: Vec<Complex64> = (0..rows.len()).map(|_| complex_gaussian(rng)).collect();
    project_to_unit(x, &basis)
}

/// Orthonormal basis (Gram-Schmidt) of the span that column `rows` must be
/// orthogonal to; `None` when that span is already everything.
fn constraint_basis(rows: &[usize], targets: &[Vec<usize>], columns: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let n = rows.len();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for (t, c) in targets.iter().zip(columns) {
        let mut v: Vec<Complex64> = (0..n).map(|k| if t[k] == rows[k] { c[k] } else { C0 }).collect();
        if v.iter().all(|z| *z == C0) {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                project_out(&mut v, b);
            }
        }
        let norm = vec_norm(&v);
        if norm > 1e-12 {
            basis.push(v.iter().map(|z| z / norm).collect());
        }
    }
    (basis.len() < n).then_some(basis)
}

fn project_to_unit(mut x: Vec<Complex64>, basis: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    let scale = vec_norm(&x);
    for _ in 0..2 {
        for b in basis {
            project_out(&mut x, b);
        }
    }
    let norm = vec_norm(&x);
    if !(norm >= 1e-6 * scale) || norm == 0.0 {
        return None;
    }
    Some(x.iter().map(|z| z / norm).collect())
}

fn assemble(d: usize, targets: &[Vec<usize>], columns: &[Vec<Complex64>]) -> KrausChannel {
    let n_kraus = targets.first().map_or(0, Vec::len);
    let kraus = (0..n_kraus)
        .map(|n| {
            let mut m = DMatrix::from_element(d, d, C0);
            for j in 0..d {
                m[(targets[j][n], j)] = columns[j][n];
            }
            ComplexMatrix::from_inner(m)
        })
        .collect();
    KrausChannel { kraus }
}

/// Deterministic counterpart of [`random_incoherent_channel`]: column j of
/// operator n sits at row `rows[j][n]` and the stacked column vectors are
/// `raw[j]` projected and normalized in order. Returns `None` when some
/// projection vanishes.
pub(crate) fn incoherent_from_raw(d: usize, rows: &[Vec<usize>], raw: &[Vec<Complex64>]) -> Option<KrausChannel> {
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(d);
    for j in 0..d {
        let basis = constraint_basis(&rows[j], &rows[..j], &columns)?;
        columns.push(project_to_unit(raw[j].clone(), &basis)?);
    }
    Some(assemble(d, rows, &columns))
}

fn project_out(v: &mut [Complex64], unit: &[Complex64]) {
    let overlap: Complex64 = unit.iter().zip(v.iter()).map(|(b, x)| b.conj() * x).sum();
    for (x, b) in v.iter_mut().zip(unit) {
        *x -= overlap * b;
    }
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Random TPCP map: a Haar isometry ℂᵈ → ℂⁿᵈ cut into n square blocks.
pub fn random_channel<R: Rng + ?Sized>(d: usize, n_kraus: usize, rng: &mut R) -> Result<KrausChannel> {
    if n_kraus == 0 {
        return Err(Error::EmptyChannel);
    }
    let g = DMatrix::from_fn(n_kraus * d, d, |_, _| complex_gaussian(rng));
    let v = haar_columns(g);
    let kraus = (0..n_kraus)
        .map(|n| ComplexMatrix::from_inner(v.rows(n * d, d).into_owned()))
        .collect();
    Ok(KrausChannel { kraus })
}
