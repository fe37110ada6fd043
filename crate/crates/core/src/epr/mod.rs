//! Dissipative EPR entanglement of two clocks with antiparallel mean spins.
//!
//! Each clock's transverse spin fluctuations form one bosonic mode with
//! quadratures `(X_k, P_k)`. Clock 1 points along `+x` with `X_1 = J_z1/sqrt(J)`,
//! `P_1 = J_y1/sqrt(J)`; clock 2 points along `-x`, where the canonical pair is
//! `X_2 = J_z2/sqrt(J)`, `P_2 = -J_y2/sqrt(J)`. The spin sums in the
//! entanglement condition then read `J_z1 + J_z2 = sqrt(J)(X_1 + X_2)` and
//! `J_y1 + J_y2 = sqrt(J)(P_1 - P_2)`.
//!
//! Forward scattering into two light modes is eliminated adiabatically into
//! the collective jump operators
//!
//! ```text
//! L+ = mu1 b1^dag + nu2 b2,    L- = mu2 b2^dag + nu1 b1,
//! ```
//!
//! plus independent losses `sqrt(extra_loss) b_k`. `mu` and `nu` are
//! amplitudes (units `s^{-1/2}`), so a matched pair drives the clocks into a
//! two-mode squeezed state with `tanh r = mu/nu` at a rate `(nu^2 - mu^2)/2`.

mod protocol;

pub use protocol::{
    protocol_trials, secret_time_protocol, Eavesdropper, ProtocolRound, ProtocolSettings, ProtocolSummary,
    ProtocolTranscript, RoundLimit, TrialStats,
};

use nalgebra::{Complex, Matrix2, Matrix4, SMatrix, SVector, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Error, Result};

/// Relative tolerance on the smallest eigenvalue of `Sigma + (i/2) Omega`.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-10;

/// Symplectic form with `[R_i, R_j] = i Omega_ij` for `R = (X1, P1, X2, P2)`.
pub fn symplectic_form() -> Matrix4<f64> {
    let w = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let mut o = Matrix4::zeros();
    o.fixed_view_mut::<2, 2>(0, 0).copy_from(&w);
    o.fixed_view_mut::<2, 2>(2, 2).copy_from(&w);
    o
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingRates {
    pub mu1: f64,
    pub mu2: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// Uncorrelated decay rate of each mode, 1/s.
    #[serde(default)]
    pub extra_loss: f64,
}

impl CouplingRates {
    pub fn matched(mu: f64, nu: f64, extra_loss: f64) -> Self {
        Self {
            mu1: mu,
            mu2: mu,
            nu1: nu,
            nu2: nu,
            extra_loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_nonnegative("mu1", self.mu1)?;
        require_nonnegative("mu2", self.mu2)?;
        require_nonnegative("nu1", self.nu1)?;
        require_nonnegative("nu2", self.nu2)?;
        require_nonnegative("extra_loss", self.extra_loss)
    }

    /// `mu1 = mu2` and `nu1 = nu2`.
    pub fn is_matched(&self) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        close(self.mu1, self.mu2) && close(self.nu1, self.nu2)
    }

    /// Coefficient rows `c` with `L = c . R`.
    fn jump_operators(&self) -> Vec<[Complex<f64>; 4]> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = |amp: f64| Complex::new(amp * s, 0.0);
        let ia = |amp: f64| Complex::new(0.0, amp * s);
        // b = (x + i p)/sqrt(2), b^dag = (x - i p)/sqrt(2)
        let mut ops = vec![
            [a(self.mu1), -ia(self.mu1), a(self.nu2), ia(self.nu2)],
            [a(self.nu1), ia(self.nu1), a(self.mu2), -ia(self.mu2)],
        ];
        if self.extra_loss > 0.0 {
            let g = self.extra_loss.sqrt();
            let zero = Complex::new(0.0, 0.0);
            ops.push([a(g), ia(g), zero, zero]);
            ops.push([zero, zero, a(g), ia(g)]);
        }
        ops
    }
}

/// Linear dynamics `dSigma/dt = A Sigma + Sigma A^T + D`, `dm/dt = A m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub drift: Matrix4<f64>,
    pub diffusion: Matrix4<f64>,
    /// False when the rates break `mu1 = mu2, nu1 = nu2`.
    pub matched: bool,
}

impl DriftDiffusion {
    pub fn max_real_eigenvalue(&self) -> f64 {
        self.drift
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn rhs(&self, cov: &Matrix4<f64>) -> Matrix4<f64> {
        self.drift * cov + cov * self.drift.transpose() + self.diffusion
    }
}

/// Drift and diffusion without the stability requirement.
pub fn linear_dynamics(rates: &CouplingRates) -> Result<DriftDiffusion> {
    rates.validate()?;
    // Gamma = sum_k c_k^* c_k^T
    let mut gamma_re = Matrix4::zeros();
    let mut gamma_im = Matrix4::zeros();
    for c in rates.jump_operators() {
        for i in 0..4 {
            for j in 0..4 {
                let g = c[i].conj() * c[j];
                gamma_re[(i, j)] += g.re;
                gamma_im[(i, j)] += g.im;
            }
        }
    }
    let omega = symplectic_form();
    Ok(DriftDiffusion {
        drift: omega * gamma_im,
        diffusion: omega * gamma_re * omega.transpose(),
        matched: rates.is_matched(),
    })
}

/// Drift and diffusion; fails when the drift has no decaying steady state.
pub fn drift_diffusion(rates: &CouplingRates) -> Result<DriftDiffusion> {
    let dd = linear_dynamics(rates)?;
    let max_re = dd.max_real_eigenvalue();
    if max_re >= -1e-12 * dd.drift.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::UnstableDrift {
            max_real_eigenvalue: max_re,
        });
    }
    Ok(dd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprState {
    /// Covariance of `(X1, P1, X2, P2)`.
    pub cov4: Matrix4<f64>,
    pub mean4: Vector4<f64>,
    /// Common mean spin length, `J = J_x1 = -J_x2`.
    pub j_len: f64,
}

impl EprState {
    pub fn new(j_len: f64, cov4: Matrix4<f64>, mean4: Vector4<f64>) -> Result<Self> {
        require_positive("j_len", j_len)?;
        if (cov4 - cov4.transpose()).norm() > 1e-12 * cov4.norm().max(1.0) {
            return Err(Error::Unphysical("covariance is not symmetric".into()));
        }
        let s = Self {
            cov4: symmetrize(&cov4),
            mean4,
            j_len,
        };
        if !s.is_physical(PHYSICALITY_TOLERANCE) {
            return Err(Error::Unphysical(format!(
                "uncertainty bound violated (min eigenvalue {:.3e})",
                s.physicality_margin()
            )));
        }
        Ok(s)
    }

    /// Two uncorrelated coherent spin states.
    pub fn coherent_pair(j_len: f64) -> Result<Self> {
        Self::new(j_len, Matrix4::identity() * 0.5, Vector4::zeros())
    }

    /// Ideal two-mode squeezed state with `Var(X1+X2) = Var(P1-P2) = e^{-2r}`.
    pub fn two_mode_squeezed(j_len: f64, r: f64) -> Result<Self> {
        Self::new(j_len, two_mode_squeezed_cov(r), Vector4::zeros())
    }

    /// Smallest eigenvalue of `Sigma + (i/2) Omega`; nonnegative for physical states.
    pub fn physicality_margin(&self) -> f64 {
        physicality_margin(&self.cov4)
    }

    /// `tol` is relative to the covariance norm (floored at 1).
    pub fn is_physical(&self, tol: f64) -> bool {
        self.physicality_margin() >= -tol * self.cov4.norm().max(1.0)
    }

    pub fn cov_rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.cov4[(i, j)];
            }
        }
        out
    }
}

/// `1/2 [[cosh 2r I, sinh 2r Z], [sinh 2r Z, cosh 2r I]]` with `Z = diag(-1, 1)`.
pub fn two_mode_squeezed_cov(r: f64) -> Matrix4<f64> {
    let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
    Matrix4::new(
        c, 0.0, -s, 0.0, //
        0.0, c, 0.0, s, //
        -s, 0.0, c, 0.0, //
        0.0, s, 0.0, c,
    )
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the Hermitian `Sigma + (i/2) Omega` through its real 8x8 form.
fn physicality_margin(cov: &Matrix4<f64>) -> f64 {
    let half_omega = symplectic_form() * 0.5;
    let mut big = SMatrix::<f64, 8, 8>::zeros();
    big.fixed_view_mut::<4, 4>(0, 0).copy_from(cov);
    big.fixed_view_mut::<4, 4>(4, 4).copy_from(cov);
    big.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-half_omega));
    big.fixed_view_mut::<4, 4>(4, 0).copy_from(&half_omega);
    SymmetricEigen::new(big).eigenvalues.min()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EprCriterion {
    /// `J [Var(X1+X2) + Var(P1-P2)]`.
    pub value: f64,
    /// Separable bound `2J`.
    pub bound: f64,
    pub entangled: bool,
}

pub fn epr_criterion(s: &EprState) -> Result<EprCriterion> {
    if s.j_len.is_nan() || s.j_len <= 0.0 {
        return Err(Error::ZeroSpinLength);
    }
    let c = &s.cov4;
    let var_sum_x = c[(0, 0)] + c[(2, 2)] + 2.0 * c[(0, 2)];
    let var_diff_p = c[(1, 1)] + c[(3, 3)] - 2.0 * c[(1, 3)];
    let value = s.j_len * (var_sum_x + var_diff_p);
    let bound = 2.0 * s.j_len;
    Ok(EprCriterion {
        value,
        bound,
        entangled: value < bound,
    })
}

/// Closed form `2J (nu - mu)/(nu + mu)` for matched, lossless coupling.
pub fn matched_criterion(j_len: f64, mu: f64, nu: f64) -> f64 {
    2.0 * j_len * (nu - mu) / (nu + mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    One,
    Two,
}

/// Mean of the two quadrature variances of one clock taken alone.
pub fn single_party_variance(s: &EprState, party: Party) -> f64 {
    let k = match party {
        Party::One => 0,
        Party::Two => 2,
    };
    0.5 * (s.cov4[(k, k)] + s.cov4[(k + 1, k + 1)])
}

/// Solves `A Sigma + Sigma A^T + D = 0` as a 16x16 linear system.
pub fn steady_state(rates: &CouplingRates, j_len: f64) -> Result<EprState> {
    require_positive("j_len", j_len)?;
    let dd = drift_diffusion(rates)?;
    let cov = solve_lyapunov(&dd.drift, &dd.diffusion)?;
    EprState::new(j_len, cov, Vector4::zeros())
}

pub(crate) fn solve_lyapunov(a: &Matrix4<f64>, d: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let id = Matrix4::<f64>::identity();
    // column-major vec: vec(A S) = (I (x) A) vec S, vec(S A^T) = (A (x) I) vec S
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -SVector::<f64, 16>::from_column_slice(d.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(Error::Singular("Lyapunov operator"))?;
    Ok(symmetrize(&Matrix4::from_column_slice(sol.as_slice())))
}

/// Relative Frobenius residual of the Lyapunov equation.
pub fn lyapunov_residual(rates: &CouplingRates, s: &EprState) -> Result<f64> {
    let dd = linear_dynamics(rates)?;
    Ok(dd.rhs(&s.cov4).norm() / dd.diffusion.norm().max(f64::MIN_POSITIVE))
}

const MAX_HALVINGS: u32 = 40;

/// Advances the state by `dt` with Heun's method. The step is halved
/// recursively while it would leave the stability region of the integrator
/// or produce an unphysical covariance.
pub fn evolve(s: &EprState, rates: &CouplingRates, dt: f64) -> Result<EprState> {
    require_positive("dt", dt)?;
    let dd = linear_dynamics(rates)?;
    let spectral = dd
        .drift
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    advance(s, &dd, dt, spectral, 0)
}

fn advance(s: &EprState, dd: &DriftDiffusion, dt: f64, spectral: f64, depth: u32) -> Result<EprState> {
    let split = |s: &EprState| -> Result<EprState> {
        if depth >= MAX_HALVINGS {
            return Err(Error::Unphysical(format!("step size underflow at dt = {dt:.3e}")));
        }
        let half = advance(s, dd, 0.5 * dt, spectral, depth + 1)?;
        advance(&half, dd, 0.5 * dt, spectral, depth + 1)
    };
    if dt * spectral > 1.0 {
        return split(s);
    }
    let next = heun_step(s, dd, dt);
    if next.cov4.iter().all(|v| v.is_finite()) && next.is_physical(PHYSICALITY_TOLERANCE) {
        Ok(next)
    } else {
        split(s)
    }
}

fn heun_step(s: &EprState, dd: &DriftDiffusion, dt: f64) -> EprState {
    let k1 = dd.rhs(&s.cov4);
    let k2 = dd.rhs(&(s.cov4 + k1 * dt));
    let m1 = dd.drift * s.mean4;
    let m2 = dd.drift * (s.mean4 + m1 * dt);
    EprState {
        cov4: symmetrize(&(s.cov4 + (k1 + k2) * (0.5 * dt))),
        mean4: s.mean4 + (m1 + m2) * (0.5 * dt),
        j_len: s.j_len,
    }
}

/// Evolves for `steps` steps of size `dt`.
pub fn evolve_for(s: &EprState, rates: &CouplingRates, dt: f64, steps: usize) -> Result<EprState> {
    if steps == 0 {
        return Err(invalid("steps", "at least one step is required"));
    }
    let mut cur = *s;
    for _ in 0..steps {
        cur = evolve(&cur, rates, dt)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests;
