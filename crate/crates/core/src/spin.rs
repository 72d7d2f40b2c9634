//! Angular momentum algebra, SU(2) coherent states and kicked-top propagators.
//!
//! Basis convention: index `k = 0..2J` holds `|m = J - k⟩`, so `jz` has a
//! descending diagonal.

use std::fmt;

use crate::error::{invalid, EchoError, Result};
use crate::linalg::{
    complex_mul, hermitian_expm, join, real_to_complex, split, CMatrix, CVector, RMatrix, C64, I,
};

/// A spin size `J`, stored as the integer `2J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    /// Accepts any positive integer or half-integer `J`.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-12 {
            return invalid(format!("spin size must be a positive half-integer, got {j}"));
        }
        Ok(Spin {
            twice: twice.round() as u32,
        })
    }

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return invalid("spin size must be positive");
        }
        Ok(Spin { twice })
    }

    pub fn integer(j: u32) -> Result<Self> {
        Self::from_twice(2 * j)
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `m` for basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    pub fn m_values(self) -> impl Iterator<Item = f64> {
        (0..self.dim()).map(move |k| self.m(k))
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Matrices of `J_x, J_y, J_z, J_+, J_-` in the `|m⟩` basis.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub spin: Spin,
    pub jz: RMatrix,
    pub jplus: RMatrix,
    pub jminus: RMatrix,
    pub jx: RMatrix,
    pub jy: CMatrix,
}

impl SpinOperators {
    pub fn new(j: f64) -> Result<Self> {
        Ok(Self::for_spin(Spin::new(j)?))
    }

    pub fn for_spin(spin: Spin) -> Self {
        let n = spin.dim();
        let j = spin.value();
        let jz = RMatrix::from_fn(n, n, |r, c| if r == c { spin.m(r) } else { 0.0 });
        // J+ |m⟩ = sqrt(J(J+1) - m(m+1)) |m+1⟩ and |m+1⟩ sits one index up.
        let jplus = RMatrix::from_fn(n, n, |r, c| {
            if r + 1 == c {
                let m = spin.m(c);
                (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
            } else {
                0.0
            }
        });
        let jminus = jplus.transpose();
        let jx = (&jplus + &jminus) * 0.5;
        // (J+ - J-)/(2i) = -i (J+ - J-)/2
        let jy = join(&RMatrix::zeros(n, n), &((&jminus - &jplus) * 0.5));
        SpinOperators {
            spin,
            jz,
            jplus,
            jminus,
            jx,
            jy,
        }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn jx_c(&self) -> CMatrix {
        real_to_complex(&self.jx)
    }

    pub fn jz_c(&self) -> CMatrix {
        real_to_complex(&self.jz)
    }

    /// `jx² + jy² + jz²`.
    pub fn casimir(&self) -> CMatrix {
        let jx = self.jx_c();
        let jz = self.jz_c();
        &jx * &jx + &self.jy * &self.jy + &jz * &jz
    }
}

/// Direction of a spin coherent state on the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherentSpec {
    pub theta: f64,
    pub phi: f64,
}

impl CoherentSpec {
    pub fn new(theta: f64, phi: f64) -> Self {
        CoherentSpec { theta, phi }
    }

    /// Unit vector `(sinϑ cosφ, sinϑ sinφ, cosϑ)`.
    pub fn direction(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `x^p` for integer `p ≥ 0` as (log magnitude, sign), with `0^0 = 1`.
fn log_pow(x: f64, p: u32) -> (f64, f64) {
    if p == 0 {
        return (0.0, 1.0);
    }
    let sign = if x < 0.0 && p % 2 == 1 { -1.0 } else { 1.0 };
    (p as f64 * x.abs().ln(), sign)
}

/// SU(2) coherent state `|ϑ, φ⟩` expanded in the `|m⟩` basis.
///
/// Binomial weights are evaluated in log space; `binom(400, 200)` is far
/// outside `f64` range.
pub fn coherent_state(spin: Spin, spec: CoherentSpec) -> Result<CVector> {
    if !spec.theta.is_finite() || !spec.phi.is_finite() {
        return invalid("coherent-state angles must be finite");
    }
    let n2 = spin.twice as usize;
    let lf = ln_factorials(n2);
    let (s, c) = (spec.theta / 2.0).sin_cos();
    let amps = (0..spin.dim()).map(|k| {
        // J + m = 2J - k, J - m = k
        let jpm = n2 - k;
        let ln_binom = lf[n2] - lf[jpm] - lf[k];
        let (lc, sc) = log_pow(c, jpm as u32);
        let (ls, ss) = log_pow(s, k as u32);
        let mag = (0.5 * ln_binom + lc + ls).exp() * sc * ss;
        let m = spin.m(k);
        C64::from_polar(mag, -m * spec.phi)
    });
    let v = CVector::from_iterator(spin.dim(), amps);
    let norm = crate::linalg::vec_norm(&v);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(EchoError::Numerical(format!(
            "coherent state norm {norm} deviates from 1"
        )));
    }
    Ok(v)
}

/// Parameters of one kicked top.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopParams {
    /// torsion strength
    pub alpha: f64,
    /// rotation angle about y
    pub gamma: f64,
    pub spin: Spin,
}

impl TopParams {
    pub fn new(alpha: f64, gamma: f64, spin: Spin) -> Result<Self> {
        if !alpha.is_finite() || !gamma.is_finite() {
            return invalid("top parameters must be finite");
        }
        Ok(TopParams { alpha, gamma, spin })
    }

    /// Effective Planck constant `1/J`.
    pub fn hbar_eff(&self) -> f64 {
        1.0 / self.spin.value()
    }
}

/// One step of a unitary map acting on the columns of a block of vectors.
pub trait UnitaryStep {
    fn dim(&self) -> usize;
    /// `block <- U block`
    fn apply_block(&self, block: &mut CMatrix);
    /// `block <- U† block`
    fn apply_block_inverse(&self, block: &mut CMatrix);

    fn apply(&self, v: &CVector) -> CVector {
        let mut b = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.apply_block(&mut b);
        CVector::from_column_slice(b.as_slice())
    }

    fn apply_inverse(&self, v: &CVector) -> CVector {
        let mut b = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
        self.apply_block_inverse(&mut b);
        CVector::from_column_slice(b.as_slice())
    }
}

/// An arbitrary dense unitary.
#[derive(Clone, Debug)]
pub struct DenseUnitary(pub CMatrix);

impl UnitaryStep for DenseUnitary {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply_block(&self, block: &mut CMatrix) {
        *block = complex_mul(&self.0, block);
    }

    fn apply_block_inverse(&self, block: &mut CMatrix) {
        *block = complex_mul(&self.0.adjoint(), block);
    }
}

/// Floquet propagator `exp(-iγ J_y) exp(-iα J_z²/2J)` of a kicked top.
///
/// The rotation `exp(-iγ J_y)` is real orthogonal in the `|m⟩` basis and the
/// torsion is a diagonal phase, so both are stored in factored form.
#[derive(Clone, Debug)]
pub struct TopPropagator {
    pub params: TopParams,
    rotation: RMatrix,
    rotation_t: RMatrix,
    torsion: Vec<C64>,
}

impl TopPropagator {
    pub fn new(params: TopParams) -> Result<Self> {
        let ops = SpinOperators::for_spin(params.spin);
        let rot = hermitian_expm(&ops.jy, -I * params.gamma);
        let (re, im) = split(&rot);
        let leak = im.amax();
        if leak > 1e-9 {
            return Err(EchoError::Numerical(format!(
                "rotation about y has imaginary residue {leak:e}"
            )));
        }
        let j = params.spin.value();
        let torsion = params
            .spin
            .m_values()
            .map(|m| (-I * (params.alpha * m * m / (2.0 * j))).exp())
            .collect();
        Ok(TopPropagator {
            params,
            rotation_t: re.transpose(),
            rotation: re,
            torsion,
        })
    }

    pub fn rotation(&self) -> &RMatrix {
        &self.rotation
    }

    pub fn rotation_transpose(&self) -> &RMatrix {
        &self.rotation_t
    }

    pub fn torsion(&self) -> &[C64] {
        &self.torsion
    }

    /// The full unitary as a dense matrix.
    pub fn matrix(&self) -> CMatrix {
        let mut u = real_to_complex(&self.rotation);
        for (mut col, p) in u.column_iter_mut().zip(&self.torsion) {
            col *= *p;
        }
        u
    }
}

impl UnitaryStep for TopPropagator {
    fn dim(&self) -> usize {
        self.torsion.len()
    }

    fn apply_block(&self, block: &mut CMatrix) {
        for mut col in block.column_iter_mut() {
            for (z, p) in col.iter_mut().zip(&self.torsion) {
                *z *= p;
            }
        }
        *block = crate::linalg::real_left_mul(&self.rotation, block);
    }

    fn apply_block_inverse(&self, block: &mut CMatrix) {
        *block = crate::linalg::real_left_mul(&self.rotation_t, block);
        for mut col in block.column_iter_mut() {
            for (z, p) in col.iter_mut().zip(&self.torsion) {
                *z *= p.conj();
            }
        }
    }
}

/// Single-top propagator; see [`TopPropagator`].
pub fn top_propagator(params: TopParams) -> Result<TopPropagator> {
    TopPropagator::new(params)
}

/// Two-time correlation table of a Heisenberg-picture observable.
#[derive(Clone, Debug)]
pub struct Correlations {
    /// `corr[(ξ, ζ)] = ⟨ψ0| V(ξ) V(ζ) |ψ0⟩`
    pub corr: CMatrix,
    /// `mean[ξ] = ⟨ψ0| V(ξ) |ψ0⟩`
    pub mean: CVector,
}

impl Correlations {
    pub fn tmax(&self) -> usize {
        self.mean.len()
    }
}

/// Correlations of `V(t) = U^{-t} V U^t` in the state `psi0` for `t < tmax`.
///
/// Builds the vectors `η(t) = V(t)|ψ0⟩` column by column: `V U^t ψ0` is formed
/// forward in time, then the backward propagation `U^{-t}` is applied Horner
/// style so each inverse step is one block product. The table is then the
/// Gram matrix `η(ξ)† η(ζ)`.
pub fn heisenberg_correlations<U: UnitaryStep + ?Sized>(
    u: &U,
    v: &CMatrix,
    psi0: &CVector,
    tmax: usize,
) -> Result<Correlations> {
    let n = u.dim();
    if v.nrows() != n || v.ncols() != n || psi0.len() != n {
        return invalid(format!(
            "dimension mismatch: propagator {n}, operator {}x{}, state {}",
            v.nrows(),
            v.ncols(),
            psi0.len()
        ));
    }
    let mut eta = CMatrix::zeros(n, tmax);
    let mut phi = psi0.clone();
    let v_diag = is_diagonal(v).then(|| v.diagonal());
    for t in 0..tmax {
        let col = match &v_diag {
            Some(d) => phi.component_mul(d),
            None => v * &phi,
        };
        eta.set_column(t, &col);
        if t + 1 < tmax {
            phi = u.apply(&phi);
        }
    }
    for s in (1..tmax).rev() {
        let mut block = eta.columns(s, tmax - s).into_owned();
        u.apply_block_inverse(&mut block);
        eta.columns_mut(s, tmax - s).copy_from(&block);
    }
    let corr = complex_mul(&eta.adjoint(), &eta);
    let mean = eta.adjoint() * psi0;
    Ok(Correlations {
        corr,
        mean: mean.map(|z| z.conj()),
    })
}

pub(crate) fn is_diagonal(m: &CMatrix) -> bool {
    m.iter()
        .enumerate()
        .all(|(idx, z)| idx % m.nrows() == idx / m.nrows() || *z == C64::from(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_residual};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = SpinOperators::new(0.5).unwrap();
        assert_eq!(ops.jz, RMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.5]));
        assert_eq!(ops.jx, RMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
    }

    #[test]
    fn spin_one_casimir() {
        let ops = SpinOperators::new(1.0).unwrap();
        assert_eq!(ops.jz.diagonal().as_slice(), &[1.0, 0.0, -1.0]);
        let c = ops.casimir();
        assert!(max_abs_diff(&c, &(CMatrix::identity(3, 3) * C64::from(2.0))) < 1e-12);
    }

    #[test]
    fn commutation_relations() {
        for twice in 1..=12 {
            let ops = SpinOperators::for_spin(Spin::from_twice(twice).unwrap());
            let (jx, jy, jz) = (ops.jx_c(), ops.jy.clone(), ops.jz_c());
            assert!(max_abs_diff(&commutator(&jx, &jy), &(&jz * I)) < 1e-12);
            assert!(max_abs_diff(&commutator(&jy, &jz), &(&jx * I)) < 1e-12);
            assert!(max_abs_diff(&commutator(&jz, &jx), &(&jy * I)) < 1e-12);
            let j = ops.spin.value();
            let n = ops.dim();
            let id = CMatrix::identity(n, n) * C64::from(j * (j + 1.0));
            assert!(max_abs_diff(&ops.casimir(), &id) < 1e-12);
            let d = ops.jz.diagonal();
            assert!(d.as_slice().windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn rejects_bad_spin() {
        assert!(SpinOperators::new(0.0).is_err());
        assert!(SpinOperators::new(0.3).is_err());
        assert!(SpinOperators::new(-1.0).is_err());
        assert!(Spin::new(f64::NAN).is_err());
    }

    #[test]
    fn coherent_state_poles() {
        let spin = Spin::integer(3).unwrap();
        let north = coherent_state(spin, CoherentSpec::new(0.0, 1.2)).unwrap();
        assert!((north[0] - C64::from_polar(1.0, -3.0 * 1.2)).norm() < 1e-14);
        assert!(north.iter().skip(1).all(|z| z.norm() < 1e-15));

        let phi = 0.8;
        let south = coherent_state(spin, CoherentSpec::new(PI, phi)).unwrap();
        let last = south[spin.dim() - 1];
        assert!((last - C64::from_polar(1.0, 3.0 * phi)).norm() < 1e-12);
        assert!(south.iter().take(spin.dim() - 1).all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn coherent_state_equator_spin_one() {
        let psi = coherent_state(Spin::integer(1).unwrap(), CoherentSpec::new(PI / 2.0, 0.0))
            .unwrap();
        let expected = [0.5, FRAC_1_SQRT_2, 0.5];
        for (z, e) in psi.iter().zip(expected) {
            assert!((z - C64::from(e)).norm() < 1e-14);
        }
    }

    #[test]
    fn coherent_state_large_spin_is_normalized() {
        let psi = coherent_state(
            Spin::integer(200).unwrap(),
            CoherentSpec::new(PI / 3f64.sqrt(), PI / 2f64.sqrt()),
        )
        .unwrap();
        assert!((crate::linalg::vec_norm(&psi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_points_along_direction() {
        for &(twice, theta, phi) in &[(4u32, 0.3, 2.0), (9, 1.9, 5.1), (40, PI / 3f64.sqrt(), 1.0)] {
            let spin = Spin::from_twice(twice).unwrap();
            let spec = CoherentSpec::new(theta, phi);
            let psi = coherent_state(spin, spec).unwrap();
            let ops = SpinOperators::for_spin(spin);
            let ev = |m: &CMatrix| (psi.adjoint() * m * &psi)[0];
            let n = spec.direction();
            let j = spin.value();
            for (op, ni) in [(ops.jx_c(), n[0]), (ops.jy.clone(), n[1]), (ops.jz_c(), n[2])] {
                let v = ev(&op);
                assert!(v.im.abs() < 1e-10);
                assert!((v.re - j * ni).abs() <= 1e-10 * j.max(1.0));
            }
        }
    }

    #[test]
    fn trivial_top_is_identity() {
        let p = TopParams::new(0.0, 0.0, Spin::integer(4).unwrap()).unwrap();
        let u = TopPropagator::new(p).unwrap().matrix();
        assert!(max_abs_diff(&u, &CMatrix::identity(9, 9)) < 1e-12);
    }

    #[test]
    fn quarter_rotation_has_period_four() {
        for j in 1..=6 {
            let p = TopParams::new(0.0, PI / 2.0, Spin::integer(j).unwrap()).unwrap();
            let u = TopPropagator::new(p).unwrap().matrix();
            let u4 = &u * &u * &u * &u;
            let n = u.nrows();
            assert!(max_abs_diff(&u4, &CMatrix::identity(n, n)) < 1e-10);
        }
    }

    #[test]
    fn chaotic_top_is_unitary() {
        let p = TopParams::new(30.0, PI / 2.1, Spin::integer(10).unwrap()).unwrap();
        let top = TopPropagator::new(p).unwrap();
        assert!(unitarity_residual(&top.matrix()) < 1e-10);
        let big = TopParams::new(30.0, PI / 2.1, Spin::integer(200).unwrap()).unwrap();
        assert!(unitarity_residual(&TopPropagator::new(big).unwrap().matrix()) < 1e-10);
    }

    #[test]
    fn factored_action_matches_dense() {
        let p = TopParams::new(3.0, 0.7, Spin::new(2.5).unwrap()).unwrap();
        let top = TopPropagator::new(p).unwrap();
        let psi = coherent_state(p.spin, CoherentSpec::new(1.0, 2.0)).unwrap();
        let dense = DenseUnitary(top.matrix());
        let a = top.apply(&psi);
        let b = dense.apply(&psi);
        assert!((a - &b).norm() < 1e-13);
        let back = top.apply_inverse(&b);
        assert!((back - psi).norm() < 1e-13);
    }

    fn brute_correlations(u: &CMatrix, v: &CMatrix, psi: &CVector, tmax: usize) -> Correlations {
        let n = u.nrows();
        let mut heis = Vec::new();
        let mut ut = CMatrix::identity(n, n);
        for _ in 0..tmax {
            heis.push(ut.adjoint() * v * &ut);
            ut = u * ut;
        }
        let corr = CMatrix::from_fn(tmax, tmax, |a, b| {
            (psi.adjoint() * &heis[a] * &heis[b] * psi)[0]
        });
        let mean = CVector::from_fn(tmax, |a, _| (psi.adjoint() * &heis[a] * psi)[0]);
        Correlations { corr, mean }
    }

    #[test]
    fn correlations_match_brute_force() {
        let spin = Spin::integer(3).unwrap();
        let top = TopPropagator::new(TopParams::new(5.0, 1.1, spin).unwrap()).unwrap();
        let ops = SpinOperators::for_spin(spin);
        let psi = coherent_state(spin, CoherentSpec::new(0.9, 2.2)).unwrap();
        let v = ops.jx_c() * C64::from(1.0 / 3.0);
        let fast = heisenberg_correlations(&top, &v, &psi, 12).unwrap();
        let slow = brute_correlations(&top.matrix(), &v, &psi, 12);
        assert!(max_abs_diff(&fast.corr, &slow.corr) < 1e-12);
        assert!((fast.mean - slow.mean).norm() < 1e-12);
    }

    #[test]
    fn identity_observable_correlations() {
        let spin = Spin::integer(2).unwrap();
        let top = TopPropagator::new(TopParams::new(1.0, 0.4, spin).unwrap()).unwrap();
        let psi = coherent_state(spin, CoherentSpec::new(0.4, 0.1)).unwrap();
        let c = heisenberg_correlations(&top, &CMatrix::identity(5, 5), &psi, 6).unwrap();
        assert!(c.corr.iter().all(|z| (z - C64::from(1.0)).norm() < 1e-12));
        assert!(c.mean.iter().all(|z| (z - C64::from(1.0)).norm() < 1e-12));
    }

    #[test]
    fn quarter_rotation_correlations_are_periodic() {
        let spin = Spin::integer(2).unwrap();
        let top = TopPropagator::new(TopParams::new(0.0, PI / 2.0, spin).unwrap()).unwrap();
        let psi = coherent_state(spin, CoherentSpec::new(1.0, 0.5)).unwrap();
        let v = SpinOperators::for_spin(spin).jz_c() * C64::from(0.5);
        let c = heisenberg_correlations(&top, &v, &psi, 12).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                assert!((c.corr[(a, b)] - c.corr[(a + 4, b)]).norm() < 1e-10);
                assert!((c.corr[(a, b)] - c.corr[(a, b + 4)]).norm() < 1e-10);
            }
        }
        for a in 0..12 {
            assert!(c.corr[(a, a)].im.abs() < 1e-12);
            assert!(c.corr[(a, a)].re >= c.mean[a].re.powi(2) - 1e-12);
            for b in 0..12 {
                assert!((c.corr[(a, b)] - c.corr[(b, a)].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn trivial_dynamics_give_constant_correlations() {
        let spin = Spin::integer(3).unwrap();
        let u = DenseUnitary(CMatrix::identity(7, 7));
        let psi = coherent_state(spin, CoherentSpec::new(1.3, 0.2)).unwrap();
        let v = SpinOperators::for_spin(spin).jx_c();
        let c = heisenberg_correlations(&u, &v, &psi, 5).unwrap();
        let c00 = c.corr[(0, 0)];
        assert!(c.corr.iter().all(|z| (z - c00).norm() < 1e-12));
    }

    #[test]
    fn correlation_dimension_mismatch() {
        let spin = Spin::integer(2).unwrap();
        let top = TopPropagator::new(TopParams::new(1.0, 0.4, spin).unwrap()).unwrap();
        let psi = CVector::zeros(4);
        assert!(heisenberg_correlations(&top, &CMatrix::identity(5, 5), &psi, 3).is_err());
    }
}
