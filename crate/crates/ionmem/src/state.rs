//! State and geometry representations: photon polarization qubits, the
//! natural-polarization 3-vector of the atomic transitions, atomic amplitude
//! vectors over Zeeman sublevels, and the beam/detection geometry.
//!
//! Projections deliberately return unnormalized states; the squared norm is
//! the success weight of the projected branch and feeds the efficiency
//! bookkeeping downstream.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use crate::angular::{HalfInt, Manifold};
use crate::error::{Error, Result};
use crate::C64;

/// Transverse polarization qubit a_H |H> + a_V |V>.
///
/// H lies in the plane spanned by the propagation direction and the
/// quantization axis; V is perpendicular to that plane. The same convention
/// applies to the stored photon at its angle alpha and to the detected
/// photon at alpha'.
#[derive(Clone, Copy, Debug)]
pub struct PolarizationState {
    pub amp_h: C64,
    pub amp_v: C64,
}

impl PolarizationState {
    pub fn new(amp_h: C64, amp_v: C64) -> Self {
        PolarizationState { amp_h, amp_v }
    }

    /// cos(theta) |H> + e^{i phi} sin(theta) |V>.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        PolarizationState {
            amp_h: C64::new(theta.cos(), 0.0),
            amp_v: C64::from_polar(theta.sin(), phi),
        }
    }

    pub fn horizontal() -> Self {
        PolarizationState::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn vertical() -> Self {
        PolarizationState::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    /// |R> = (|H> + i|V>)/sqrt(2).
    pub fn circular_right() -> Self {
        PolarizationState::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2))
    }

    /// |L> = (|H> - i|V>)/sqrt(2).
    pub fn circular_left() -> Self {
        PolarizationState::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, -FRAC_1_SQRT_2))
    }

    /// The orthogonal state (-a_V*, a_H*) in the same (H, V) frame; this is
    /// the second output port of a two-output polarizing analyzer.
    pub fn orthogonal(&self) -> Self {
        PolarizationState::new(-self.amp_v.conj(), self.amp_h.conj())
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp_h.norm_sqr() + self.amp_v.norm_sqr()
    }

    /// <self | other>.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }
}

/// Photon amplitude vector in the natural polarization basis {|0>, |x>, |y>}
/// of the atomic transitions; |0> drives pi (dm = 0) transitions and
/// |+-1> = (|x> +- i|y>)/sqrt(2) drive sigma+- (dm = +-1).
#[derive(Clone, Copy, Debug)]
pub struct PhotonVector {
    pub amp_pi: C64,
    pub amp_x: C64,
    pub amp_y: C64,
}

impl PhotonVector {
    pub const ZERO: PhotonVector = PhotonVector {
        amp_pi: C64::new(0.0, 0.0),
        amp_x: C64::new(0.0, 0.0),
        amp_y: C64::new(0.0, 0.0),
    };

    pub fn new(amp_pi: C64, amp_x: C64, amp_y: C64) -> Self {
        PhotonVector {
            amp_pi,
            amp_x,
            amp_y,
        }
    }

    /// Build from spherical components (a_{-1}, a_0, a_{+1}).
    pub fn from_spherical(sigma_minus: C64, pi: C64, sigma_plus: C64) -> Self {
        let inv = C64::new(FRAC_1_SQRT_2, 0.0);
        PhotonVector {
            amp_pi: pi,
            amp_x: (sigma_plus + sigma_minus) * inv,
            amp_y: C64::i() * (sigma_plus - sigma_minus) * inv,
        }
    }

    /// Component along |+1> = (|x> + i|y>)/sqrt(2).
    pub fn sigma_plus(&self) -> C64 {
        (self.amp_x - C64::i() * self.amp_y) * C64::new(FRAC_1_SQRT_2, 0.0)
    }

    /// Component along |-1> = (|x> - i|y>)/sqrt(2).
    pub fn sigma_minus(&self) -> C64 {
        (self.amp_x + C64::i() * self.amp_y) * C64::new(FRAC_1_SQRT_2, 0.0)
    }

    /// Component along the natural polarization with dm = q, q in {-1, 0, +1}.
    pub fn spherical_component(&self, q: i32) -> C64 {
        match q {
            -1 => self.sigma_minus(),
            0 => self.amp_pi,
            1 => self.sigma_plus(),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp_pi.norm_sqr() + self.amp_x.norm_sqr() + self.amp_y.norm_sqr()
    }

    /// <self | other>.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amp_pi.conj() * other.amp_pi
            + self.amp_x.conj() * other.amp_x
            + self.amp_y.conj() * other.amp_y
    }

    pub fn scaled(&self, f: C64) -> Self {
        PhotonVector::new(self.amp_pi * f, self.amp_x * f, self.amp_y * f)
    }

    fn add(&self, other: &Self) -> Self {
        PhotonVector::new(
            self.amp_pi + other.amp_pi,
            self.amp_x + other.amp_x,
            self.amp_y + other.amp_y,
        )
    }
}

/// Complex amplitude vector over the Zeeman sublevels of one manifold,
/// indexed m = -j, ..., +j. May be unnormalized after a projection.
#[derive(Clone, Debug)]
pub struct AtomicState {
    manifold: Manifold,
    amps: Vec<C64>,
}

impl AtomicState {
    pub fn zero(manifold: Manifold) -> Self {
        let n = manifold.sublevel_count();
        AtomicState {
            manifold,
            amps: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// The pure sublevel state |m>.
    pub fn single(manifold: Manifold, m: HalfInt) -> Result<Self> {
        let mut s = AtomicState::zero(manifold);
        s.set_amp(m, C64::new(1.0, 0.0))?;
        Ok(s)
    }

    /// The balanced superposition (|-m> + |+m>)/sqrt(2).
    pub fn balanced_pair(manifold: Manifold, m: HalfInt) -> Result<Self> {
        let mut s = AtomicState::zero(manifold);
        s.set_amp(-m, C64::new(FRAC_1_SQRT_2, 0.0))?;
        s.set_amp(m, C64::new(FRAC_1_SQRT_2, 0.0))?;
        Ok(s)
    }

    pub fn from_amplitudes(manifold: Manifold, parts: &[(HalfInt, C64)]) -> Result<Self> {
        let mut s = AtomicState::zero(manifold);
        for &(m, a) in parts {
            s.set_amp(m, a)?;
        }
        Ok(s)
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    /// Amplitude at sublevel m; 0 for m outside the manifold.
    pub fn amp(&self, m: HalfInt) -> C64 {
        self.manifold
            .sublevel_index(m)
            .map_or(C64::new(0.0, 0.0), |i| self.amps[i])
    }

    pub fn set_amp(&mut self, m: HalfInt, a: C64) -> Result<()> {
        let i = self
            .manifold
            .sublevel_index(m)
            .ok_or(Error::NoSuchSublevel {
                manifold: self.manifold.label,
                m,
            })?;
        self.amps[i] = a;
        Ok(())
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm_sq() <= tol
    }

    /// Unit-norm copy; fails on a (numerically) zero state.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sq();
        if n <= 1e-300 {
            return Err(Error::ZeroState);
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, f: C64) -> Self {
        AtomicState {
            manifold: self.manifold,
            amps: self.amps.iter().map(|a| a * f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.manifold != other.manifold {
            return Err(Error::ManifoldMismatch {
                a: self.manifold.label,
                b: other.manifold.label,
            });
        }
        Ok(AtomicState {
            manifold: self.manifold,
            amps: self
                .amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// <self | other>; both states must share a manifold.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.manifold != other.manifold {
            return Err(Error::ManifoldMismatch {
                a: self.manifold.label,
                b: other.manifold.label,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Sublevels whose population exceeds `tol` relative to the total.
    pub fn support(&self, tol: f64) -> Vec<HalfInt> {
        let total = self.norm_sq().max(1e-300);
        self.manifold
            .sublevels()
            .zip(&self.amps)
            .filter(|(_, a)| a.norm_sqr() / total > tol)
            .map(|(m, _)| m)
            .collect()
    }
}

impl fmt::Display for AtomicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, a) in self.manifold.sublevels().zip(&self.amps) {
            if a.norm_sqr() < 1e-24 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({:+.4}{:+.4}i)|{}>", a.re, a.im, m)?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Entangled atom-photon amplitude: one photon 3-vector per atomic sublevel.
#[derive(Clone, Debug)]
pub struct JointState {
    manifold: Manifold,
    parts: Vec<PhotonVector>,
}

impl JointState {
    pub fn zero(manifold: Manifold) -> Self {
        let n = manifold.sublevel_count();
        JointState {
            manifold,
            parts: vec![PhotonVector::ZERO; n],
        }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    /// Photon amplitude vector correlated with atomic sublevel m.
    pub fn photon_part(&self, m: HalfInt) -> PhotonVector {
        self.manifold
            .sublevel_index(m)
            .map_or(PhotonVector::ZERO, |i| self.parts[i])
    }

    pub fn add_photon_part(&mut self, m: HalfInt, v: &PhotonVector) -> Result<()> {
        let i = self
            .manifold
            .sublevel_index(m)
            .ok_or(Error::NoSuchSublevel {
                manifold: self.manifold.label,
                m,
            })?;
        self.parts[i] = self.parts[i].add(v);
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.parts.iter().map(|p| p.norm_sq()).sum()
    }

    /// Contract the photon side with <herald|, leaving the (unnormalized)
    /// atomic state conditioned on that detection outcome.
    pub fn project_photon(&self, herald: &PhotonVector) -> AtomicState {
        AtomicState {
            manifold: self.manifold,
            amps: self.parts.iter().map(|p| herald.inner(p)).collect(),
        }
    }

    /// Reduced atomic density matrix (row-major n x n), tracing the photon.
    pub fn reduced_atom(&self) -> Vec<C64> {
        let n = self.parts.len();
        let mut rho = vec![C64::new(0.0, 0.0); n * n];
        for (i, pi) in self.parts.iter().enumerate() {
            for (j, pj) in self.parts.iter().enumerate() {
                rho[i * n + j] = pj.inner(pi);
            }
        }
        rho
    }

    /// Reduced photon density matrix in the (|0>, |x>, |y>) basis.
    pub fn reduced_photon(&self) -> [[C64; 3]; 3] {
        let mut rho = [[C64::new(0.0, 0.0); 3]; 3];
        for p in &self.parts {
            let comps = [p.amp_pi, p.amp_x, p.amp_y];
            for (i, ci) in comps.iter().enumerate() {
                for (j, cj) in comps.iter().enumerate() {
                    rho[i][j] += ci * cj.conj();
                }
            }
        }
        rho
    }
}

/// Beam geometry: angle of the stored photon's propagation direction to the
/// quantization axis (alpha) and of the herald detection direction (alpha').
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    alpha: f64,
    alpha_prime: f64,
}

impl Geometry {
    pub fn new(alpha: f64, alpha_prime: f64) -> Result<Self> {
        if !(0.0..=PI + 1e-12).contains(&alpha) {
            return Err(Error::AngleRange {
                name: "alpha",
                value: alpha,
            });
        }
        if !(0.0..=PI + 1e-12).contains(&alpha_prime) {
            return Err(Error::AngleRange {
                name: "alpha_prime",
                value: alpha_prime,
            });
        }
        Ok(Geometry { alpha, alpha_prime })
    }

    pub fn from_degrees(alpha_deg: f64, alpha_prime_deg: f64) -> Result<Self> {
        Geometry::new(alpha_deg.to_radians(), alpha_prime_deg.to_radians())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }

    pub fn alpha_deg(&self) -> f64 {
        self.alpha.to_degrees()
    }

    pub fn alpha_prime_deg(&self) -> f64 {
        self.alpha_prime.to_degrees()
    }
}

/// Apply P_alpha = (sin a |0> + cos a |x>)<H| + |y><V| to a polarization
/// qubit, expressing it in the natural basis of the atomic transitions.
/// P_alpha is an isometry: the output norm equals the input norm.
pub fn project_polarization(pol: &PolarizationState, alpha: f64) -> PhotonVector {
    PhotonVector::new(pol.amp_h * alpha.sin(), pol.amp_h * alpha.cos(), pol.amp_v)
}

/// The photon vector P_alpha' |det>: the effective detection vector seen from
/// inside the natural basis. Its |0> weight sin(a') and |x> weight cos(a')
/// implement the invisibility of longitudinal fields automatically.
pub fn detection_vector(det_pol: &PolarizationState, alpha_prime: f64) -> PhotonVector {
    project_polarization(det_pol, alpha_prime)
}

/// Detection amplitude <det| P_a'^dagger |photon>.
pub fn detect_project(photon: &PhotonVector, det_pol: &PolarizationState, alpha_prime: f64) -> C64 {
    detection_vector(det_pol, alpha_prime).inner(photon)
}
