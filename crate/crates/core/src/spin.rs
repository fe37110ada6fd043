//! Gaussian (Holstein-Primakoff) model of a collective pseudo-spin.
//!
//! A [`CollectiveSpin`] carries a mean Bloch vector of length `J` and the
//! covariance of the two canonical quadratures transverse to it. For a mean
//! spin along `+x` the quadratures are `X_A = J_z/sqrt(J)` and
//! `P_A = J_y/sqrt(J)`, and a coherent spin state has `Var(X_A) = Var(P_A) = 1/2`.
//!
//! Internally the quadratures live in a body frame `(m, e_x, e_p)` that is
//! carried along rigidly by rotations. [`CollectiveSpin::cov`] re-expresses
//! them in the canonical lab basis for the current mean direction: `e_x` is
//! the projection of the lab `z` axis transverse to the mean (lab `x` when the
//! mean is along `+-z`) and `e_p = e_x x m`. For a mean along `-x` this gives
//! `P = -J_y/sqrt(J)`, the convention used for the inverted clock of an EPR pair.
//!
//! Rotations follow the right-hand rule: a `pi/2` turn about `y` takes `+x`
//! to `-z` and `+z` to `+x`.

use nalgebra::{Matrix2, Rotation3, Unit, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, Error, Result};

/// Default bound on `max_eig(cov) / J` above which the Gaussian description
/// is flagged as unreliable.
pub const DEFAULT_HP_RATIO: f64 = 0.1;

/// Quadrature variance of a coherent spin state.
pub const CSS_VARIANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }

    /// Right-handed rotation by `angle` about this axis.
    pub fn rotation(self, angle: f64) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_unchecked(self.unit()), angle)
    }
}

/// How spontaneous emission acts on the spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceModel {
    /// Only the mean length shrinks, `J -> e^{-eta} J`; the quadrature
    /// covariance is left alone.
    #[default]
    CoherenceOnly,
    /// Extension: additionally adds `eta/2` of white noise to both quadratures.
    NoiseInjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveSpin {
    n_atoms: u64,
    pub(crate) mean_dir: Vector3<f64>,
    pub(crate) x_dir: Vector3<f64>,
    pub(crate) p_dir: Vector3<f64>,
    j_len: f64,
    /// Quadrature covariance in the body frame `(x_dir, p_dir)`.
    pub(crate) body_cov: Matrix2<f64>,
    /// Quadrature displacement in the body frame.
    pub(crate) body_mean: Vector2<f64>,
    eta_acc: f64,
}

impl CollectiveSpin {
    /// Coherent spin state of `n_atoms` atoms polarized along `+x`.
    pub fn new_css(n_atoms: u64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms", "at least one atom is required"));
        }
        Ok(Self {
            n_atoms,
            mean_dir: Vector3::x(),
            x_dir: Vector3::z(),
            p_dir: Vector3::y(),
            j_len: n_atoms as f64 / 2.0,
            body_cov: Matrix2::identity() * CSS_VARIANCE,
            body_mean: Vector2::zeros(),
            eta_acc: 0.0,
        })
    }

    /// Builds a `+x` polarized state with an explicit canonical covariance.
    pub fn with_covariance(n_atoms: u64, j_len: f64, cov: Matrix2<f64>) -> Result<Self> {
        let mut s = Self::new_css(n_atoms)?;
        require_nonnegative("j_len", j_len)?;
        if j_len > n_atoms as f64 / 2.0 {
            return Err(invalid("j_len", format!("{j_len} exceeds N/2")));
        }
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 * cov.norm().max(1.0) {
            return Err(Error::Unphysical("covariance is not symmetric".into()));
        }
        if cov[(0, 0)] <= 0.0 || cov.determinant() < 0.25 * (1.0 - 1e-9) {
            return Err(Error::Unphysical(format!(
                "covariance violates the uncertainty bound (det = {})",
                cov.determinant()
            )));
        }
        s.j_len = j_len;
        s.body_cov = cov;
        Ok(s)
    }

    pub fn n_atoms(&self) -> u64 {
        self.n_atoms
    }

    pub fn mean_dir(&self) -> Vector3<f64> {
        self.mean_dir
    }

    pub fn j_len(&self) -> f64 {
        self.j_len
    }

    pub fn eta_acc(&self) -> f64 {
        self.eta_acc
    }

    /// Mean Bloch vector `J * m`.
    pub fn mean_spin(&self) -> Vector3<f64> {
        self.mean_dir * self.j_len
    }

    /// Canonical `(e_x, e_p)` directions transverse to the current mean.
    pub fn canonical_axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        canonical_axes(&self.mean_dir)
    }

    fn to_canonical(&self) -> Matrix2<f64> {
        let (ex, ep) = self.canonical_axes();
        Matrix2::new(
            ex.dot(&self.x_dir),
            ex.dot(&self.p_dir),
            ep.dot(&self.x_dir),
            ep.dot(&self.p_dir),
        )
    }

    /// Covariance of `(X_A, P_A)` in the canonical basis.
    pub fn cov(&self) -> Matrix2<f64> {
        let q = self.to_canonical();
        let c = q * self.body_cov * q.transpose();
        // exact symmetry
        Matrix2::new(
            c[(0, 0)],
            0.5 * (c[(0, 1)] + c[(1, 0)]),
            0.5 * (c[(0, 1)] + c[(1, 0)]),
            c[(1, 1)],
        )
    }

    /// Mean of `(X_A, P_A)` in the canonical basis.
    pub fn quadrature_mean(&self) -> Vector2<f64> {
        self.to_canonical() * self.body_mean
    }

    /// Weights `q` with `J_u = J (m.u) + sqrt(J) q.(X, P)` in the body frame.
    pub(crate) fn body_weights(&self, u: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(u.dot(&self.x_dir), u.dot(&self.p_dir))
    }

    /// Mean of the spin projection on `u`.
    pub fn projection_mean(&self, u: &Vector3<f64>) -> f64 {
        self.j_len * self.mean_dir.dot(u) + self.j_len.sqrt() * self.body_weights(u).dot(&self.body_mean)
    }

    /// Variance of the spin projection on `u`.
    pub fn projection_variance(&self, u: &Vector3<f64>) -> f64 {
        let q = self.body_weights(u);
        self.j_len * (q.transpose() * self.body_cov * q)[(0, 0)]
    }

    /// Rotates the state by `angle` (plus a Gaussian error of rms
    /// `angle_error_rms`) about `axis`.
    pub fn rotate<R: Rng + ?Sized>(&self, axis: Axis, angle: f64, angle_error_rms: f64, rng: &mut R) -> Result<Self> {
        if !angle.is_finite() {
            return Err(invalid("angle", "must be finite"));
        }
        require_nonnegative("angle_error_rms", angle_error_rms)?;
        let error = if angle_error_rms > 0.0 {
            Normal::new(0.0, angle_error_rms).expect("validated rms").sample(rng)
        } else {
            0.0
        };
        Ok(self.rotated_by(&axis.rotation(angle + error)))
    }

    /// Error-free rotation.
    pub fn rotate_exact(&self, axis: Axis, angle: f64) -> Self {
        self.rotated_by(&axis.rotation(angle))
    }

    pub fn rotated_by(&self, rot: &Rotation3<f64>) -> Self {
        let mut out = self.clone();
        out.mean_dir = (rot * self.mean_dir).normalize();
        out.x_dir = rot * self.x_dir;
        out.p_dir = rot * self.p_dir;
        out
    }

    /// Spontaneous emission with parameter `eta`: `J -> e^{-eta} J`.
    pub fn apply_decoherence(&self, eta: f64) -> Result<Self> {
        self.apply_decoherence_with(eta, DecoherenceModel::CoherenceOnly)
    }

    pub fn apply_decoherence_with(&self, eta: f64, model: DecoherenceModel) -> Result<Self> {
        require_nonnegative("eta", eta)?;
        let mut out = self.clone();
        out.j_len = self.j_len * (-eta).exp();
        out.eta_acc += eta;
        if model == DecoherenceModel::NoiseInjection {
            out.body_cov += Matrix2::identity() * (eta / 2.0);
        }
        Ok(out)
    }

    /// Metrological squeezing parameter `xi = Var(X_A) N / J`.
    pub fn squeezing_parameter(&self) -> Result<f64> {
        if self.j_len <= 0.0 {
            return Err(Error::ZeroSpinLength);
        }
        Ok(self.cov()[(0, 0)] * self.n_atoms as f64 / self.j_len)
    }

    /// Smallest resolvable rotation angle, `sqrt(xi / N)`.
    pub fn min_detectable_angle(&self) -> Result<f64> {
        Ok((self.squeezing_parameter()? / self.n_atoms as f64).sqrt())
    }

    pub fn max_cov_eigenvalue(&self) -> f64 {
        max_eigenvalue_sym2(&self.body_cov)
    }

    /// Holstein-Primakoff validity: `max_eig(cov) <= ratio * J`.
    pub fn is_hp_valid(&self, ratio: f64) -> bool {
        self.max_cov_eigenvalue() <= ratio * self.j_len
    }

    pub(crate) fn replace_gaussian(&mut self, mean: Vector2<f64>, cov: Matrix2<f64>) {
        self.body_mean = mean;
        self.body_cov = cov;
    }
}

pub(crate) fn canonical_axes(mean_dir: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let m = mean_dir;
    let z = Vector3::z();
    let mut ex = z - m * z.dot(m);
    if ex.norm() < 1e-9 {
        let x = Vector3::x();
        ex = x - m * x.dot(m);
    }
    let ex = ex.normalize();
    let ep = ex.cross(m);
    (ex, ep)
}

pub(crate) fn max_eigenvalue_sym2(c: &Matrix2<f64>) -> f64 {
    let tr = c[(0, 0)] + c[(1, 1)];
    let diff = c[(0, 0)] - c[(1, 1)];
    let off = 0.5 * (c[(0, 1)] + c[(1, 0)]);
    0.5 * tr + (0.25 * diff * diff + off * off).sqrt()
}
