//! Pure states of a system ⊗ environment pair.
//!
//! Amplitudes are held as an `N_s x N_e` matrix `A[(i, ν)]`, so operators that
//! factorize act as `U_s A U_eᵀ` and the environment trace is a Gram product.

use nalgebra::SVD;

use crate::error::{invalid, Result};
use crate::linalg::{complex_mul, gram_purity, real_left_mul, real_right_mul, CMatrix, CVector, C64};
use crate::spin::TopPropagator;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    amps: CMatrix,
}

impl CompositeState {
    pub fn from_amplitudes(amps: CMatrix) -> Result<Self> {
        let norm = amps.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return invalid(format!("composite state norm {norm} is not 1"));
        }
        Ok(CompositeState { amps })
    }

    /// Basis vector `|i, ν⟩`.
    pub fn basis(dims: (usize, usize), i: usize, nu: usize) -> Self {
        let mut amps = CMatrix::zeros(dims.0, dims.1);
        amps[(i, nu)] = C64::from(1.0);
        CompositeState { amps }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.amps.shape()
    }

    pub fn amplitudes(&self) -> &CMatrix {
        &self.amps
    }

    pub fn amplitude(&self, i: usize, nu: usize) -> C64 {
        self.amps[(i, nu)]
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Flattened vector with index `i·N_e + ν`, matching `kron(A_s, A_e)`.
    pub fn to_vector(&self) -> CVector {
        let (ns, ne) = self.dims();
        CVector::from_fn(ns * ne, |k, _| self.amps[(k / ne, k % ne)])
    }

    pub fn from_vector(v: &CVector, dims: (usize, usize)) -> Result<Self> {
        if v.len() != dims.0 * dims.1 {
            return invalid("vector length does not match dims");
        }
        let amps = CMatrix::from_fn(dims.0, dims.1, |i, nu| v[i * dims.1 + nu]);
        Self::from_amplitudes(amps)
    }

    /// Same state with system and environment roles exchanged.
    pub fn swapped(&self) -> Self {
        CompositeState {
            amps: self.amps.transpose(),
        }
    }

    /// `tr ρ_s²`, from the Gram matrix of the amplitude matrix.
    pub fn purity(&self) -> f64 {
        gram_purity(&self.amps)
    }

    /// `Σ σ_k⁴` over the Schmidt coefficients.
    pub fn purity_svd(&self) -> f64 {
        SVD::new(self.amps.clone(), false, false)
            .singular_values
            .iter()
            .map(|s| s.powi(4))
            .sum()
    }

    /// `⟨φ| ρ_s |φ⟩` for a system vector `φ`, without forming `ρ_s`.
    pub fn reduced_expectation(&self, phi: &CVector) -> f64 {
        (self.amps.adjoint() * phi).norm_squared()
    }

    pub(crate) fn amps_mut(&mut self) -> &mut CMatrix {
        &mut self.amps
    }
}

/// Reduced density matrix of one subsystem.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    pub matrix: CMatrix,
}

impl ReducedDensity {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return invalid("density matrix must be square");
        }
        let herm = crate::linalg::max_abs_diff(&matrix, &matrix.adjoint());
        if herm > 1e-12 {
            return invalid(format!("density matrix not Hermitian (residual {herm:e})"));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return invalid(format!("density matrix trace {tr} is not 1"));
        }
        let rho = ReducedDensity { matrix };
        if let Some(lmin) = rho.eigenvalues().iter().copied().reduce(f64::min) {
            if lmin < -1e-10 {
                return invalid(format!("density matrix has negative eigenvalue {lmin:e}"));
            }
        }
        Ok(rho)
    }

    pub fn pure(psi: &CVector) -> Self {
        ReducedDensity {
            matrix: psi * psi.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::from(0.5);
        nalgebra::SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

fn check_unit(v: &CVector, what: &str) -> Result<()> {
    let n = crate::linalg::vec_norm(v);
    if (n - 1.0).abs() > NORM_TOL {
        return invalid(format!("{what} has norm {n}, expected 1"));
    }
    Ok(())
}

/// `ψ_s ⊗ ψ_e`.
pub fn product_state(psi_s: &CVector, psi_e: &CVector) -> Result<CompositeState> {
    check_unit(psi_s, "system state")?;
    check_unit(psi_e, "environment state")?;
    Ok(CompositeState {
        amps: psi_s * psi_e.transpose(),
    })
}

/// `(U_s ⊗ U_e)|ψ⟩` as `U_s A U_eᵀ`.
pub fn apply_separable(us: &CMatrix, ue: &CMatrix, state: &CompositeState) -> Result<CompositeState> {
    let (ns, ne) = state.dims();
    if us.shape() != (ns, ns) || ue.shape() != (ne, ne) {
        return invalid(format!(
            "separable operator {:?} ⊗ {:?} does not fit state {:?}",
            us.shape(),
            ue.shape(),
            (ns, ne)
        ));
    }
    let left = complex_mul(us, &state.amps);
    Ok(CompositeState {
        amps: complex_mul(&left, &ue.transpose()),
    })
}

/// In-place `(U_s ⊗ U_e)` for two kicked-top propagators.
pub fn apply_tops(us: &TopPropagator, ue: &TopPropagator, state: &mut CompositeState) -> Result<()> {
    let (ns, ne) = state.dims();
    if us.torsion().len() != ns || ue.torsion().len() != ne {
        return invalid("kicked-top dimensions do not fit the state");
    }
    let ts = us.torsion();
    let te = ue.torsion();
    for (nu, mut col) in state.amps.column_iter_mut().enumerate() {
        for (i, z) in col.iter_mut().enumerate() {
            *z *= ts[i] * te[nu];
        }
    }
    let left = real_left_mul(us.rotation(), &state.amps);
    state.amps = real_right_mul(&left, ue.rotation_transpose());
    Ok(())
}

/// `exp(-i·strength·V_s ⊗ V_e)` for `V_s, V_e` diagonal in the computational basis.
pub fn apply_diagonal_coupling(
    phase_s: &[f64],
    phase_e: &[f64],
    strength: f64,
    state: &CompositeState,
) -> Result<CompositeState> {
    let mut out = state.clone();
    apply_diagonal_coupling_in_place(phase_s, phase_e, strength, &mut out)?;
    Ok(out)
}

pub fn apply_diagonal_coupling_in_place(
    phase_s: &[f64],
    phase_e: &[f64],
    strength: f64,
    state: &mut CompositeState,
) -> Result<()> {
    let (ns, ne) = state.dims();
    if phase_s.len() != ns || phase_e.len() != ne {
        return invalid("coupling diagonals do not fit the state");
    }
    if strength == 0.0 {
        return Ok(());
    }
    for (nu, mut col) in state.amps.column_iter_mut().enumerate() {
        let pe = phase_e[nu];
        for (i, z) in col.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -strength * phase_s[i] * pe);
        }
    }
    Ok(())
}

/// `ρ_s = tr_e |ψ⟩⟨ψ|`.
pub fn partial_trace_env(state: &CompositeState) -> ReducedDensity {
    ReducedDensity {
        matrix: complex_mul(&state.amps, &state.amps.adjoint()),
    }
}

/// `ρ_e = tr_s |ψ⟩⟨ψ|`.
pub fn partial_trace_sys(state: &CompositeState) -> ReducedDensity {
    partial_trace_env(&state.swapped())
}

/// `tr ρ²`.
pub fn purity(rho: &ReducedDensity) -> f64 {
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// `⟨a|b⟩`.
pub fn overlap(a: &CompositeState, b: &CompositeState) -> Result<C64> {
    if a.dims() != b.dims() {
        return invalid(format!("overlap of states with dims {:?} and {:?}", a.dims(), b.dims()));
    }
    Ok(a.amps.iter().zip(b.amps.iter()).map(|(x, y)| x.conj() * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_taylor, kron, max_abs_diff, I};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn unit_vec(n: usize, seed: f64) -> CVector {
        let v = CVector::from_fn(n, |k, _| {
            let x = seed * (k as f64 + 1.3);
            C64::new(x.sin(), (2.1 * x + 0.4).cos())
        });
        let n = crate::linalg::vec_norm(&v);
        v / C64::from(n)
    }

    fn e(n: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[k] = C64::from(1.0);
        v
    }

    #[test]
    fn product_of_basis_vectors() {
        let s = product_state(&e(3, 0), &e(4, 0)).unwrap();
        assert_eq!(s.amplitude(0, 0), C64::from(1.0));
        assert_eq!(s.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn product_states_are_pure() {
        let s = product_state(&unit_vec(4, 0.7), &unit_vec(5, 1.9)).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-14);
        assert!((purity(&partial_trace_env(&s)) - 1.0).abs() < 1e-13);
        assert!((purity(&partial_trace_sys(&s)) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn product_rejects_unnormalized() {
        let v = CVector::from_element(3, C64::from(1.0));
        assert!(product_state(&v, &e(2, 0)).is_err());
    }

    #[test]
    fn bell_state_is_maximally_mixed() {
        let mut amps = CMatrix::zeros(2, 2);
        amps[(0, 0)] = C64::from(FRAC_1_SQRT_2);
        amps[(1, 1)] = C64::from(FRAC_1_SQRT_2);
        let s = CompositeState::from_amplitudes(amps).unwrap();
        let rho = partial_trace_env(&s);
        assert!(max_abs_diff(&rho.matrix, &(CMatrix::identity(2, 2) * C64::from(0.5))) < 1e-15);
        assert!((purity(&rho) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn purity_examples() {
        let rho = ReducedDensity::new(CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::from(0.7),
            C64::from(0.3),
        ])))
        .unwrap();
        assert!((purity(&rho) - 0.58).abs() < 1e-15);
        let mixed = ReducedDensity::new(CMatrix::identity(4, 4) * C64::from(0.25)).unwrap();
        assert!((purity(&mixed) - 0.25).abs() < 1e-15);
        assert!((purity(&ReducedDensity::pure(&unit_vec(5, 0.2))) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn density_validation() {
        assert!(ReducedDensity::new(CMatrix::identity(2, 2)).is_err());
        let mut m = CMatrix::identity(2, 2) * C64::from(0.5);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(ReducedDensity::new(m).is_err());
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(1.2), C64::from(-0.2)]));
        assert!(ReducedDensity::new(neg).is_err());
    }

    fn random_unitary(n: usize, seed: f64) -> CMatrix {
        let a = CMatrix::from_fn(n, n, |i, j| {
            let x = seed + 0.91 * i as f64 + 0.37 * j as f64 * seed;
            C64::new(x.sin(), (1.3 * x).cos())
        });
        let h = (&a + a.adjoint()) * C64::from(0.5);
        crate::linalg::hermitian_expm(&h, -I)
    }

    #[test]
    fn separable_identity_and_factorization() {
        let a = unit_vec(3, 0.3);
        let b = unit_vec(4, 0.8);
        let s = product_state(&a, &b).unwrap();
        let same = apply_separable(&CMatrix::identity(3, 3), &CMatrix::identity(4, 4), &s).unwrap();
        assert!(max_abs_diff(same.amplitudes(), s.amplitudes()) < 1e-15);

        let us = random_unitary(3, 0.4);
        let ue = random_unitary(4, 1.1);
        let out = apply_separable(&us, &ue, &s).unwrap();
        let expect = product_state(&(&us * &a), &(&ue * &b)).unwrap();
        assert!(max_abs_diff(out.amplitudes(), expect.amplitudes()) < 1e-13);
    }

    #[test]
    fn separable_matches_kronecker() {
        let us = random_unitary(3, 0.2);
        let ue = random_unitary(3, 2.5);
        let amps = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, (i * j) as f64 - 1.0));
        let nrm = amps.norm();
        let s = CompositeState::from_amplitudes(amps / C64::from(nrm)).unwrap();
        let out = apply_separable(&us, &ue, &s).unwrap().to_vector();
        let dense = kron(&us, &ue) * s.to_vector();
        assert!((out - dense).norm() < 1e-12);
    }

    #[test]
    fn separable_dimension_mismatch() {
        let s = product_state(&e(3, 0), &e(2, 1)).unwrap();
        assert!(apply_separable(&CMatrix::identity(2, 2), &CMatrix::identity(2, 2), &s).is_err());
    }

    #[test]
    fn coupling_matches_dense_exponential() {
        let ps = [0.5, -0.2, 1.0];
        let pe = [0.3, 0.9, -0.7];
        let s = CompositeState::from_vector(&unit_vec(9, 0.6), (3, 3)).unwrap();
        let strength = 1.7;
        let out = apply_diagonal_coupling(&ps, &pe, strength, &s).unwrap();
        let vs = CMatrix::from_diagonal(&CVector::from_iterator(3, ps.iter().map(|&x| C64::from(x))));
        let ve = CMatrix::from_diagonal(&CVector::from_iterator(3, pe.iter().map(|&x| C64::from(x))));
        let gen = kron(&vs, &ve) * (-I * strength);
        let dense = expm_taylor(&gen) * s.to_vector();
        assert!((out.to_vector() - dense).norm() < 1e-12);
        assert!((out.norm() - 1.0).abs() < 1e-14);
        let zero = apply_diagonal_coupling(&ps, &pe, 0.0, &s).unwrap();
        assert_eq!(zero, s);
        assert!(apply_diagonal_coupling(&ps[..2], &pe, 1.0, &s).is_err());
    }

    #[test]
    fn partial_trace_of_product_is_projector() {
        let a = unit_vec(4, 1.4);
        let s = product_state(&a, &unit_vec(3, 0.1)).unwrap();
        let rho = partial_trace_env(&s);
        assert!(max_abs_diff(&rho.matrix, &(&a * a.adjoint())) < 1e-14);
    }

    #[test]
    fn partial_trace_is_valid_density() {
        let s = CompositeState::from_vector(&unit_vec(12, 0.77), (3, 4)).unwrap();
        let rho = ReducedDensity::new(partial_trace_env(&s).matrix).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        let rho_e = ReducedDensity::new(partial_trace_sys(&s).matrix).unwrap();
        assert_eq!(rho_e.dim(), 4);
        // both reductions of a pure state share the spectrum
        assert!((purity(&rho) - purity(&rho_e)).abs() < 1e-13);
        assert!((purity(&rho) - s.purity()).abs() < 1e-13);
        assert!((purity(&rho) - s.purity_svd()).abs() < 1e-12);
    }

    #[test]
    fn overlap_examples() {
        let a = CompositeState::from_vector(&unit_vec(6, 0.3), (2, 3)).unwrap();
        assert!((overlap(&a, &a).unwrap() - C64::from(1.0)).norm() < 1e-14);
        let b0 = CompositeState::basis((2, 3), 0, 1);
        let b1 = CompositeState::basis((2, 3), 1, 1);
        assert_eq!(overlap(&b0, &b1).unwrap(), C64::from(0.0));
        let c = CompositeState::basis((3, 2), 0, 0);
        assert!(overlap(&a, &c).is_err());
    }

    #[test]
    fn overlap_squared_matches_density_trace() {
        let a = CompositeState::from_vector(&unit_vec(6, 0.3), (2, 3)).unwrap();
        let b = CompositeState::from_vector(&unit_vec(6, 1.7), (2, 3)).unwrap();
        let va = a.to_vector();
        let vb = b.to_vector();
        let tr = ((&va * va.adjoint()) * (&vb * vb.adjoint())).trace();
        assert!((overlap(&a, &b).unwrap().norm_sqr() - tr.re).abs() < 1e-14);
    }
}
