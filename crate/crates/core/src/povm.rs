//! Identification of a cluster state: a parity measurement picks one of four
//! families, then an unambiguous-discrimination POVM built from the reciprocal
//! basis of that family's four states either names the state or gives up.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cluster::{make_cluster_state, support, ClusterParams, ClusterStateId};
use crate::qcore::{Amplitude, QError, RandomSource, StateVector, TOLERANCE};

const DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PovmError {
    #[error("family states are linearly dependent: coefficient {coefficient} = {value} is not positive")]
    LinearlyDependent { coefficient: char, value: f64 },
    #[error("state has support in {0} families; a parity check would disturb it")]
    CrossFamily(usize),
    #[error("state lies outside the family subspace (weight {0})")]
    OutsideFamily(f64),
    #[error("expected a 4-qubit state, got {0} qubits")]
    WrongQubitCount(usize),
    #[error(transparent)]
    Quantum(#[from] QError),
}

/// One of the four parity classes `(q1⊕q2, q3⊕q4)` of the basis support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FamilyId(u8);

impl FamilyId {
    pub fn new(index: u8) -> Option<Self> {
        (1..=4).contains(&index).then_some(Self(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = FamilyId> {
        (1..=4).map(FamilyId)
    }

    /// Family of a computational basis index (particle 1 is the high bit).
    pub fn of_basis_index(i: usize) -> FamilyId {
        let p12 = ((i >> 3) ^ (i >> 2)) & 1;
        let p34 = ((i >> 1) ^ i) & 1;
        FamilyId(1 + (2 * p12 + p34) as u8)
    }

    pub fn of_state(id: ClusterStateId) -> FamilyId {
        FamilyId((id.index() - 1) / 4 + 1)
    }

    pub fn members(self) -> [ClusterStateId; 4] {
        let base = (self.0 - 1) * 4;
        [1, 2, 3, 4].map(|k| ClusterStateId::new(base + k).expect("in range"))
    }

    /// Sorted basis indices spanning this family's subspace.
    pub fn basis_indices(self) -> [usize; 4] {
        let mut s = support(self.members()[0]);
        s.sort_unstable();
        s
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

fn family_weights(state: &StateVector) -> Result<[f64; 4], PovmError> {
    if state.qubit_count() != 4 {
        return Err(PovmError::WrongQubitCount(state.qubit_count()));
    }
    let mut w = [0.0; 4];
    for (i, a) in state.amplitudes().iter().enumerate() {
        w[FamilyId::of_basis_index(i).0 as usize - 1] += a.norm_sqr();
    }
    Ok(w)
}

fn project_onto(state: &StateVector, family: FamilyId) -> Result<StateVector, PovmError> {
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if FamilyId::of_basis_index(i) == family {
                *a
            } else {
                Amplitude::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(StateVector::normalized(amps)?)
}

/// Projective parity measurement on an arbitrary 4-qubit state.
pub fn measure_family(
    state: &StateVector,
    rng: &mut RandomSource,
) -> Result<(FamilyId, StateVector), PovmError> {
    let w = family_weights(state)?;
    let family = FamilyId(rng.weighted(&w) as u8 + 1);
    Ok((family, project_onto(state, family)?))
}

/// Parity measurement for states known to live in a single family; such
/// states are left undisturbed.
pub fn identify_family(
    state: &StateVector,
    rng: &mut RandomSource,
) -> Result<(FamilyId, StateVector), PovmError> {
    let w = family_weights(state)?;
    let occupied = w.iter().filter(|&&x| x > TOLERANCE).count();
    if occupied != 1 {
        return Err(PovmError::CrossFamily(occupied));
    }
    measure_family(state, rng)
}

/// Hermitian operator on the 4-qubit space.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    matrix: DMatrix<Amplitude>,
}

impl PovmElement {
    pub fn matrix(&self) -> &DMatrix<Amplitude> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue() >= -TOLERANCE
    }

    /// `⟨ψ|E|ψ⟩`
    pub fn expectation(&self, state: &StateVector) -> f64 {
        let v = to_dvector(state);
        (v.adjoint() * &self.matrix * &v)[(0, 0)].re
    }
}

fn to_dvector(state: &StateVector) -> DVector<Amplitude> {
    DVector::from_column_slice(state.amplitudes())
}

fn hermitian_eigenvalues(m: &DMatrix<Amplitude>) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn operator_norm(m: &DMatrix<Amplitude>) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `√E` for a positive semidefinite `E`; eigenvalues in `(−tol, 0)` are
/// clamped to zero.
fn psd_sqrt(m: &DMatrix<Amplitude>) -> DMatrix<Amplitude> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig
        .eigenvalues
        .map(|x| Amplitude::new(if x > 0.0 { x.sqrt() } else { 0.0 }, 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiscriminationOutcome {
    Conclusive(ClusterStateId),
    Inconclusive,
}

/// No-error discrimination of the four states of one family.
#[derive(Debug, Clone)]
pub struct UsdPovm {
    family: FamilyId,
    params: ClusterParams,
    scale: f64,
    conclusive: Vec<(ClusterStateId, PovmElement)>,
    inconclusive: PovmElement,
    kraus: Vec<DMatrix<Amplitude>>,
}

impl UsdPovm {
    /// Reciprocal-basis construction. Each conclusive element is
    /// `λ|ũ_i⟩⟨ũ_i|` with `ũ_i` the normalized dual vector of state `i`, and `λ`
    /// is the largest scale keeping the remainder positive semidefinite.
    pub fn build(params: &ClusterParams, family: FamilyId) -> Result<Self, PovmError> {
        let (name, smallest) = params.smallest();
        if smallest <= TOLERANCE {
            return Err(PovmError::LinearlyDependent {
                coefficient: name,
                value: smallest,
            });
        }
        let members = family.members();
        let columns: Vec<DVector<Amplitude>> = members
            .iter()
            .map(|&id| to_dvector(&make_cluster_state(params, id)))
            .collect();
        let states = DMatrix::from_columns(&columns);
        let gram = states.adjoint() * &states;
        let gram_inv = gram
            .try_inverse()
            .ok_or(PovmError::LinearlyDependent {
                coefficient: name,
                value: smallest,
            })?;
        let duals = &states * gram_inv;

        let units: Vec<DVector<Amplitude>> = duals
            .column_iter()
            .map(|c| {
                let c = c.into_owned();
                let n = c.norm();
                c / Amplitude::new(n, 0.0)
            })
            .collect();
        let frame = units
            .iter()
            .fold(DMatrix::zeros(DIM, DIM), |acc, u| acc + u * u.adjoint());
        let largest = hermitian_eigenvalues(&frame)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0 / largest;

        let conclusive: Vec<(ClusterStateId, PovmElement)> = members
            .iter()
            .zip(&units)
            .map(|(&id, u)| {
                let matrix = u * u.adjoint() * Amplitude::new(scale, 0.0);
                (id, PovmElement { matrix })
            })
            .collect();
        let mut remainder = family_projector(family);
        for (_, e) in &conclusive {
            remainder -= &e.matrix;
        }
        let inconclusive = PovmElement { matrix: remainder };

        let kraus = conclusive
            .iter()
            .map(|(_, e)| psd_sqrt(&e.matrix))
            .chain(std::iter::once(psd_sqrt(&inconclusive.matrix)))
            .collect();

        Ok(Self {
            family,
            params: *params,
            scale,
            conclusive,
            inconclusive,
            kraus,
        })
    }

    pub fn family(&self) -> FamilyId {
        self.family
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    /// The shared scale `λ` of the conclusive elements.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn conclusive(&self) -> &[(ClusterStateId, PovmElement)] {
        &self.conclusive
    }

    pub fn inconclusive(&self) -> &PovmElement {
        &self.inconclusive
    }

    pub fn elements(&self) -> impl Iterator<Item = &PovmElement> {
        self.conclusive
            .iter()
            .map(|(_, e)| e)
            .chain(std::iter::once(&self.inconclusive))
    }

    /// Outcome probabilities: four conclusive elements then inconclusive.
    pub fn probabilities(&self, state: &StateVector) -> [f64; 5] {
        let mut p = [0.0; 5];
        for (slot, e) in p.iter_mut().zip(self.elements()) {
            *slot = e.expectation(state).max(0.0);
        }
        p
    }

    /// `‖P_family − Σ E‖`
    pub fn completeness_error(&self) -> f64 {
        let mut diff = family_projector(self.family);
        for e in self.elements() {
            diff -= e.matrix();
        }
        operator_norm(&diff)
    }

    /// Samples an outcome and returns the normalized post-measurement state
    /// `√E ψ / ‖√E ψ‖`.
    pub fn measure(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(DiscriminationOutcome, StateVector), PovmError> {
        if state.qubit_count() != 4 {
            return Err(PovmError::WrongQubitCount(state.qubit_count()));
        }
        let p = self.probabilities(state);
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(PovmError::OutsideFamily(total));
        }
        let k = rng.weighted(&p);
        let post = &self.kraus[k] * to_dvector(state);
        let post = StateVector::normalized(post.iter().copied().collect())?;
        let outcome = match self.conclusive.get(k) {
            Some((id, _)) => DiscriminationOutcome::Conclusive(*id),
            None => DiscriminationOutcome::Inconclusive,
        };
        Ok((outcome, post))
    }
}

fn family_projector(family: FamilyId) -> DMatrix<Amplitude> {
    let mut p = DMatrix::zeros(DIM, DIM);
    for i in family.basis_indices() {
        p[(i, i)] = Amplitude::new(1.0, 0.0);
    }
    p
}

/// Parity measurement followed by the matching family POVM.
#[derive(Debug, Clone)]
pub struct ClusterDiscriminator {
    povms: Vec<UsdPovm>,
}

impl ClusterDiscriminator {
    pub fn new(params: &ClusterParams) -> Result<Self, PovmError> {
        let povms = FamilyId::all()
            .map(|f| UsdPovm::build(params, f))
            .collect::<Result<_, _>>()?;
        Ok(Self { povms })
    }

    pub fn povm(&self, family: FamilyId) -> &UsdPovm {
        &self.povms[family.0 as usize - 1]
    }

    pub fn povms(&self) -> &[UsdPovm] {
        &self.povms
    }

    pub fn discriminate(
        &self,
        state: &StateVector,
        rng: &mut RandomSource,
    ) -> Result<(DiscriminationOutcome, StateVector), PovmError> {
        let (family, collapsed) = measure_family(state, rng)?;
        self.povm(family).measure(&collapsed, rng)
    }
}

/// Per-family diagnostics for the inspector output.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub family: u8,
    pub scale: f64,
    pub conclusive_probability: [f64; 4],
    pub inconclusive_probability: [f64; 4],
    pub min_eigenvalue: f64,
    pub completeness_error: f64,
    pub max_misidentification: f64,
}

impl FamilyReport {
    pub fn from_povm(povm: &UsdPovm) -> Self {
        let mut conclusive = [0.0; 4];
        let mut inconclusive = [0.0; 4];
        let mut worst = 0.0f64;
        for (j, id) in povm.family().members().iter().enumerate() {
            let psi = make_cluster_state(povm.params(), *id);
            let p = povm.probabilities(&psi);
            conclusive[j] = p[j];
            inconclusive[j] = p[4];
            for (i, q) in p[..4].iter().enumerate() {
                if i != j {
                    worst = worst.max(*q);
                }
            }
        }
        Self {
            family: povm.family().index(),
            scale: povm.scale(),
            conclusive_probability: conclusive,
            inconclusive_probability: inconclusive,
            min_eigenvalue: povm
                .elements()
                .map(PovmElement::min_eigenvalue)
                .fold(f64::INFINITY, f64::min),
            completeness_error: povm.completeness_error(),
            max_misidentification: worst,
        }
    }

    pub fn passes(&self) -> bool {
        self.min_eigenvalue >= -TOLERANCE
            && self.completeness_error <= TOLERANCE
            && self.max_misidentification <= TOLERANCE
    }
}
