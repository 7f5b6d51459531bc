//! The storage pipeline: absorption of the 854 nm photon, emission of the
//! 393 nm herald, projection onto the detection outcome, and the condensed
//! 2x2 herald-conditioned transfer matrix with efficiency and validity
//! analysis.

use crate::angular::{ca40, cgc, HalfInt, Manifold};
use crate::error::{Error, Result};
use crate::state::{
    detection_vector, project_polarization, AtomicState, Geometry, JointState, PhotonVector,
    PolarizationState,
};
use crate::C64;

/// Physical constants (SI, CODATA 2018).
pub mod constants {
    /// Bohr magneton in J/T.
    pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
    /// Reduced Planck constant in J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Planck constant in J s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
}

/// The largest squared norm any herald-conditioned final state can reach:
/// the strongest single absorption channel weight of the storage transition.
pub const MAX_STORED_NORM_SQ: f64 = 2.0 / 3.0;

/// Default validity tolerance for analytically specified schemes.
pub const DEFAULT_VALIDITY_TOL: f64 = 1e-9;

fn check_dipole_pair(lower: &Manifold, upper: &Manifold) -> Result<()> {
    if (lower.j.twice() - upper.j.twice()).abs() > 2 {
        return Err(Error::NotDipoleCoupled {
            lower: lower.label,
            upper: upper.label,
        });
    }
    Ok(())
}

/// Absorption: contract the atomic state with the photon vector through the
/// dipole channels into `upper`. The output amplitude at m_up is
/// sum_q C(m_up - q, q, m_up) psi[m_up - q] photon[q]; it is unnormalized,
/// its squared norm being the absorption probability weight.
pub fn absorb(psi: &AtomicState, photon: &PhotonVector, upper: &Manifold) -> Result<AtomicState> {
    let lower = psi.manifold();
    check_dipole_pair(lower, upper)?;
    let mut excited = AtomicState::zero(*upper);
    for m_up in upper.sublevels() {
        let mut amp = C64::new(0.0, 0.0);
        for q in -1..=1 {
            let m_lo = m_up - HalfInt::from_int(q);
            if !lower.holds(m_lo) {
                continue;
            }
            let c = cgc(
                lower.j,
                m_lo,
                HalfInt::ONE,
                HalfInt::from_int(q),
                upper.j,
                m_up,
            )?;
            amp += psi.amp(m_lo) * photon.spherical_component(q) * c;
        }
        excited.set_amp(m_up, amp)?;
    }
    Ok(excited)
}

/// Emission: spontaneous decay of the excited state into `lower`, entangling
/// the atom with the emitted photon. Norm is conserved exactly because the
/// channel weights out of each excited sublevel sum to one.
pub fn emit(psi_excited: &AtomicState, lower: &Manifold) -> Result<JointState> {
    let upper = psi_excited.manifold();
    check_dipole_pair(lower, upper)?;
    let mut joint = JointState::zero(*lower);
    for m_up in upper.sublevels() {
        let a = psi_excited.amp(m_up);
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for q in -1..=1 {
            let m_lo = m_up - HalfInt::from_int(q);
            if !lower.holds(m_lo) {
                continue;
            }
            let c = cgc(
                lower.j,
                m_lo,
                HalfInt::ONE,
                HalfInt::from_int(q),
                upper.j,
                m_up,
            )?;
            let mut spherical = [C64::new(0.0, 0.0); 3];
            spherical[(q + 1) as usize] = a * c;
            let part = PhotonVector::from_spherical(spherical[0], spherical[1], spherical[2]);
            joint.add_photon_part(m_lo, &part)?;
        }
    }
    Ok(joint)
}

/// The full storage map for one herald outcome: project the input
/// polarization at alpha, absorb into P3/2, emit into S1/2, then condition
/// on detecting the herald in `det_pol` at alpha'. The returned S1/2 state
/// is unnormalized; its squared norm is the success weight of this branch.
pub fn final_state(
    psi_d: &AtomicState,
    input_pol: &PolarizationState,
    geometry: &Geometry,
    det_pol: &PolarizationState,
) -> Result<AtomicState> {
    let photon = project_polarization(input_pol, geometry.alpha());
    let excited = absorb(psi_d, &photon, &ca40::p32())?;
    let joint = emit(&excited, &ca40::s12())?;
    let herald = detection_vector(det_pol, geometry.alpha_prime());
    Ok(joint.project_photon(&herald))
}

/// Herald-conditioned linear map from the input polarization qubit (H, V)
/// to the final S1/2 qubit (rows m = +1/2, m = -1/2).
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    entries: [[C64; 2]; 2],
    herald: PolarizationState,
    geometry: Geometry,
}

impl TransferMatrix {
    /// Row 0 is m = +1/2, row 1 is m = -1/2; column 0 is H, column 1 is V.
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row][col]
    }

    pub fn entries(&self) -> &[[C64; 2]; 2] {
        &self.entries
    }

    /// The detection outcome this matrix is conditioned on.
    pub fn herald(&self) -> &PolarizationState {
        &self.herald
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Apply to an input polarization, producing the unnormalized final state.
    pub fn apply(&self, pol: &PolarizationState) -> AtomicState {
        let plus = self.entries[0][0] * pol.amp_h + self.entries[0][1] * pol.amp_v;
        let minus = self.entries[1][0] * pol.amp_h + self.entries[1][1] * pol.amp_v;
        let mut s = AtomicState::zero(ca40::s12());
        s.set_amp(HalfInt::HALF, plus).expect("S1/2 holds +1/2");
        s.set_amp(-HalfInt::HALF, minus).expect("S1/2 holds -1/2");
        s
    }

    /// Gram matrix M^dagger M as (g_hh, g_vv, g_hv).
    pub fn gram(&self) -> (f64, f64, C64) {
        let col = |c: usize| [self.entries[0][c], self.entries[1][c]];
        let (h, v) = (col(0), col(1));
        let g_hh = h[0].norm_sqr() + h[1].norm_sqr();
        let g_vv = v[0].norm_sqr() + v[1].norm_sqr();
        let g_hv = h[0].conj() * v[0] + h[1].conj() * v[1];
        (g_hh, g_vv, g_hv)
    }

    /// Squared singular values (min, max) from the closed-form eigenvalues
    /// of the 2x2 Gram matrix.
    pub fn singular_values_sq(&self) -> (f64, f64) {
        let (g_hh, g_vv, g_hv) = self.gram();
        let half_trace = 0.5 * (g_hh + g_vv);
        let disc = (0.25 * (g_hh - g_vv).powi(2) + g_hv.norm_sqr()).sqrt();
        ((half_trace - disc).max(0.0), half_trace + disc)
    }

    /// Frobenius distance of the Gram matrix from (tr/2) times the identity;
    /// zero exactly when the map is proportional to a unitary.
    pub fn gram_deviation(&self) -> f64 {
        let (g_hh, g_vv, g_hv) = self.gram();
        let d = 0.5 * (g_hh - g_vv);
        (2.0 * d * d + 2.0 * g_hv.norm_sqr()).sqrt()
    }
}

/// Build the herald-conditioned transfer matrix by sending H and V through
/// the pipeline; every other input follows by linearity.
pub fn transfer_matrix(
    psi_d: &AtomicState,
    geometry: &Geometry,
    det_pol: &PolarizationState,
) -> Result<TransferMatrix> {
    let col_h = final_state(psi_d, &PolarizationState::horizontal(), geometry, det_pol)?;
    let col_v = final_state(psi_d, &PolarizationState::vertical(), geometry, det_pol)?;
    let plus = HalfInt::HALF;
    Ok(TransferMatrix {
        entries: [
            [col_h.amp(plus), col_v.amp(plus)],
            [col_h.amp(-plus), col_v.amp(-plus)],
        ],
        herald: *det_pol,
        geometry: *geometry,
    })
}

/// Transfer matrices for the two output ports of the detection analyzer:
/// the given basis state and its orthogonal partner.
pub fn herald_pair(
    psi_d: &AtomicState,
    geometry: &Geometry,
    det_pol: &PolarizationState,
) -> Result<[TransferMatrix; 2]> {
    Ok([
        transfer_matrix(psi_d, geometry, det_pol)?,
        transfer_matrix(psi_d, geometry, &det_pol.orthogonal())?,
    ])
}

/// Relative storage efficiency band (eps_min, eps_max): the squared singular
/// values of the transfer matrix divided by the largest possible stored
/// weight, 2/3. The two coincide exactly for valid schemes.
pub fn efficiency(m: &TransferMatrix) -> (f64, f64) {
    let (lo, hi) = m.singular_values_sq();
    (lo / MAX_STORED_NORM_SQ, hi / MAX_STORED_NORM_SQ)
}

/// Validity analysis of one herald channel: whether the efficiency is
/// input-independent and orthogonal inputs stay orthogonal, plus the
/// normalized images of the four reference inputs.
#[derive(Clone, Debug)]
pub struct MappingReport {
    pub efficiency_min: f64,
    pub efficiency_max: f64,
    pub is_valid: bool,
    pub gram_deviation: f64,
    /// Normalized images of H, V, R, L; `None` flags a zero image.
    pub mapped_h: Option<AtomicState>,
    pub mapped_v: Option<AtomicState>,
    pub mapped_r: Option<AtomicState>,
    pub mapped_l: Option<AtomicState>,
}

pub fn validity(m: &TransferMatrix, tol: f64) -> MappingReport {
    let (eff_min, eff_max) = efficiency(m);
    let gram_deviation = m.gram_deviation();
    let mapped = |pol: PolarizationState| m.apply(&pol).normalized().ok();
    MappingReport {
        efficiency_min: eff_min,
        efficiency_max: eff_max,
        is_valid: gram_deviation <= tol,
        gram_deviation,
        mapped_h: mapped(PolarizationState::horizontal()),
        mapped_v: mapped(PolarizationState::vertical()),
        mapped_r: mapped(PolarizationState::circular_right()),
        mapped_l: mapped(PolarizationState::circular_left()),
    }
}

/// Global-phase-insensitive overlap |<a|b>|^2 / (|a|^2 |b|^2).
pub fn fidelity(a: &AtomicState, b: &AtomicState) -> Result<f64> {
    let na = a.norm_sq();
    let nb = b.norm_sq();
    if na <= 1e-300 || nb <= 1e-300 {
        return Err(Error::ZeroState);
    }
    Ok(a.inner(b)?.norm_sqr() / (na * nb))
}

/// Larmor phase evolution in a magnetic field: each sublevel m picks up
/// exp(-i m g mu_B B t / hbar). Norm is preserved exactly.
pub fn zeeman_evolve(state: &AtomicState, b_field: f64, time: f64) -> AtomicState {
    let g = state.manifold().g_lande;
    let rate = g * constants::BOHR_MAGNETON * b_field / constants::HBAR;
    let mut out = state.clone();
    for m in state.manifold().sublevels() {
        let phase = C64::from_polar(1.0, -m.as_f64() * rate * time);
        out.set_amp(m, state.amp(m) * phase)
            .expect("sublevel exists in own manifold");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng as _;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn h(t: i32) -> HalfInt {
        HalfInt::new(t)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_plus() -> PhotonVector {
        PhotonVector::from_spherical(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
    }

    #[test]
    fn absorb_from_stretched_state() {
        let d52 = ca40::d52();
        let p32 = ca40::p32();
        let psi = AtomicState::single(d52, h(-5)).unwrap();
        let out = absorb(&psi, &sigma_plus(), &p32).unwrap();
        // only channel: m = -5/2 --sigma+--> m = -3/2
        let expected = cgc(h(5), h(-5), HalfInt::ONE, HalfInt::ONE, h(3), h(-3)).unwrap();
        assert_abs_diff_eq!(out.amp(h(-3)).re, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(out.norm_sq(), 2.0 / 3.0, epsilon = 1e-14);
        for m in [h(-1), h(1), h(3)] {
            assert_abs_diff_eq!(out.amp(m).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn absorb_pi_from_stretched_state_is_zero() {
        let psi = AtomicState::single(ca40::d52(), h(-5)).unwrap();
        let pi_photon = PhotonVector::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let out = absorb(&psi, &pi_photon, &ca40::p32()).unwrap();
        assert_abs_diff_eq!(out.norm_sq(), 0.0, epsilon = 1e-28);
    }

    #[test]
    fn absorb_balanced_pair_with_x_photon() {
        // (|-5/2> + |+5/2>)/sqrt(2) with |x> light: both stretched channels,
        // each weighted by cgc * 1/2; total captured weight 1/3 by direct
        // enumeration of all (m_D, q, m_P) channels.
        let psi = AtomicState::balanced_pair(ca40::d52(), h(5)).unwrap();
        let x_photon = PhotonVector::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let out = absorb(&psi, &x_photon, &ca40::p32()).unwrap();
        let c_minus = cgc(h(5), h(-5), HalfInt::ONE, HalfInt::ONE, h(3), h(-3)).unwrap();
        let c_plus = cgc(h(5), h(5), HalfInt::ONE, -HalfInt::ONE, h(3), h(3)).unwrap();
        assert_abs_diff_eq!(out.amp(h(-3)).re, c_minus / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.amp(h(3)).re, c_plus / 2.0, epsilon = 1e-14);

        // brute-force channel enumeration for the norm
        let mut expected = 0.0;
        for m_d in ca40::d52().sublevels() {
            for q in -1..=1 {
                let m_p = m_d + HalfInt::from_int(q);
                if !ca40::p32().holds(m_p) {
                    continue;
                }
                let amp = cgc(h(5), m_d, HalfInt::ONE, HalfInt::from_int(q), h(3), m_p).unwrap()
                    * psi.amp(m_d)
                    * x_photon.spherical_component(q);
                expected += amp.norm_sqr();
            }
        }
        // the two populated sublevels are distinct so no interference terms
        assert_abs_diff_eq!(out.norm_sq(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(out.norm_sq(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn absorb_rejects_uncoupled_manifolds() {
        let psi = AtomicState::single(ca40::s12(), h(-1)).unwrap();
        assert!(absorb(&psi, &sigma_plus(), &ca40::d52()).is_err());
    }

    #[test]
    fn emit_stretched_decay_single_channel() {
        let psi = AtomicState::single(ca40::p32(), h(-3)).unwrap();
        let joint = emit(&psi, &ca40::s12()).unwrap();
        assert_abs_diff_eq!(joint.norm_sq(), 1.0, epsilon = 1e-14);
        let part = joint.photon_part(h(-1));
        assert_abs_diff_eq!(
            (part.sigma_minus() - c(1.0, 0.0)).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(part.sigma_plus().norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(joint.photon_part(h(1)).norm_sq(), 0.0, epsilon = 1e-28);
    }

    #[test]
    fn emit_zero_state_is_zero() {
        let joint = emit(&AtomicState::zero(ca40::p32()), &ca40::s12()).unwrap();
        assert_eq!(joint.norm_sq(), 0.0);
    }

    #[test]
    fn emit_two_channel_weights() {
        let psi = AtomicState::single(ca40::p32(), h(1)).unwrap();
        let joint = emit(&psi, &ca40::s12()).unwrap();
        let w_pi = joint.photon_part(h(1)).norm_sq();
        let w_sigma = joint.photon_part(h(-1)).norm_sq();
        assert_abs_diff_eq!(w_pi, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w_sigma, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w_pi + w_sigma, 1.0, epsilon = 1e-14);
    }

    fn random_d52_state(rng: &mut rand_chacha::ChaCha8Rng) -> AtomicState {
        let mut s = AtomicState::zero(ca40::d52());
        for m in ca40::d52().sublevels() {
            s.set_amp(m, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .unwrap();
        }
        s.normalized().unwrap()
    }

    #[test]
    fn emission_conserves_norm_randomized() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut p = AtomicState::zero(ca40::p32());
            for m in ca40::p32().sublevels() {
                p.set_amp(m, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .unwrap();
            }
            let joint = emit(&p, &ca40::s12()).unwrap();
            assert_abs_diff_eq!(joint.norm_sq(), p.norm_sq(), epsilon = 1e-12);
        }
    }

    #[test]
    fn final_state_reference_points() {
        // balanced stretched pair, collinear geometry, input R: the ion must
        // land in |-1/2> for the H herald
        let psi = AtomicState::balanced_pair(ca40::d52(), h(5)).unwrap();
        let geom = Geometry::new(0.0, 0.0).unwrap();
        let out = final_state(
            &psi,
            &PolarizationState::circular_right(),
            &geom,
            &PolarizationState::horizontal(),
        )
        .unwrap();
        assert!(out.amp(h(1)).norm() < 1e-14);
        assert_abs_diff_eq!(out.amp(h(-1)).norm_sqr(), 1.0 / 6.0, epsilon = 1e-14);

        // single sublevel -1/2, perpendicular geometry, input H, V herald:
        // the ion lands in |+1/2>
        let psi = AtomicState::single(ca40::d52(), h(-1)).unwrap();
        let geom = Geometry::new(PI / 2.0, PI / 2.0).unwrap();
        let out = final_state(
            &psi,
            &PolarizationState::horizontal(),
            &geom,
            &PolarizationState::vertical(),
        )
        .unwrap();
        assert!(out.amp(h(-1)).norm() < 1e-14);
        assert_abs_diff_eq!(out.amp(h(1)).norm_sqr(), 1.0 / 15.0, epsilon = 1e-14);

        // no allowed channel: stretched state, collinear, sigma- input
        let psi = AtomicState::single(ca40::d52(), h(-5)).unwrap();
        let geom = Geometry::new(0.0, 0.0).unwrap();
        let out = final_state(
            &psi,
            &PolarizationState::circular_left(),
            &geom,
            &PolarizationState::horizontal(),
        )
        .unwrap();
        assert_abs_diff_eq!(out.norm_sq(), 0.0, epsilon = 1e-28);
    }

    #[test]
    fn transfer_matrix_linearity() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let geom = Geometry::from_degrees(33.0, 61.0).unwrap();
        let det = PolarizationState::from_angles(0.4, 1.1);
        for _ in 0..50 {
            let psi = random_d52_state(&mut rng);
            let m = transfer_matrix(&psi, &geom, &det).unwrap();
            let a = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let b = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let pol = PolarizationState::new(a / norm, b / norm);
            let via_matrix = m.apply(&pol);
            let direct = final_state(&psi, &pol, &geom, &det).unwrap();
            for ms in [h(-1), h(1)] {
                assert_abs_diff_eq!(
                    (via_matrix.amp(ms) - direct.amp(ms)).norm(),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn transfer_matrix_zero_initial_state() {
        let geom = Geometry::new(0.3, 0.9).unwrap();
        let m = transfer_matrix(
            &AtomicState::zero(ca40::d52()),
            &geom,
            &PolarizationState::horizontal(),
        )
        .unwrap();
        let (lo, hi) = m.singular_values_sq();
        assert_eq!((lo, hi), (0.0, 0.0));
        let (e_lo, e_hi) = efficiency(&m);
        assert_eq!((e_lo, e_hi), (0.0, 0.0));
    }

    #[test]
    fn validity_flags_polarizer() {
        // Stretched single sublevel along the axis absorbs one circular
        // component only: a polarizer, not a memory.
        let psi = AtomicState::single(ca40::d52(), h(-5)).unwrap();
        let geom = Geometry::new(0.0, 0.0).unwrap();
        let m = transfer_matrix(&psi, &geom, &PolarizationState::horizontal()).unwrap();
        let report = validity(&m, 1e-6);
        assert!(!report.is_valid);
        assert!(report.efficiency_max > report.efficiency_min + 1e-6);
    }

    #[test]
    fn gram_deviation_matches_singular_value_split() {
        // deviation = (sigma_max^2 - sigma_min^2)/sqrt(2) for 2x2 matrices
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let det = PolarizationState::from_angles(0.9, 0.3);
        for _ in 0..50 {
            let psi = random_d52_state(&mut rng);
            let geom = Geometry::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..PI)).unwrap();
            let m = transfer_matrix(&psi, &geom, &det).unwrap();
            let (lo, hi) = m.singular_values_sq();
            assert_abs_diff_eq!(
                m.gram_deviation(),
                (hi - lo) / 2.0_f64.sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn stored_weight_never_exceeds_bound() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let psi = random_d52_state(&mut rng);
            let geom = Geometry::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..PI)).unwrap();
            let input = PolarizationState::from_angles(
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..2.0 * PI),
            );
            let det = PolarizationState::from_angles(
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..2.0 * PI),
            );
            let out = final_state(&psi, &input, &geom, &det).unwrap();
            assert!(out.norm_sq() <= MAX_STORED_NORM_SQ + 1e-9);
        }
    }

    #[test]
    fn herald_completeness() {
        // Summed over the two analyzer ports, the stored weight equals the
        // photon weight inside the detected subspace, computed by brute force
        // from the reduced photon matrix.
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let psi = random_d52_state(&mut rng);
            let geom = Geometry::new(rng.gen_range(0.0..PI), rng.gen_range(0.0..PI)).unwrap();
            let input = PolarizationState::from_angles(
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..2.0 * PI),
            );
            let det = PolarizationState::from_angles(
                rng.gen_range(0.0..PI),
                rng.gen_range(0.0..2.0 * PI),
            );

            let captured: f64 = [det, det.orthogonal()]
                .iter()
                .map(|w| final_state(&psi, &input, &geom, w).unwrap().norm_sq())
                .sum();

            let photon = project_polarization(&input, geom.alpha());
            let excited = absorb(&psi, &photon, &ca40::p32()).unwrap();
            let joint = emit(&excited, &ca40::s12()).unwrap();
            let rho = joint.reduced_photon();
            let mut in_subspace = 0.0;
            for port in [
                detection_vector(&det, geom.alpha_prime()),
                detection_vector(&det.orthogonal(), geom.alpha_prime()),
            ] {
                let w = [port.amp_pi, port.amp_x, port.amp_y];
                for i in 0..3 {
                    for j in 0..3 {
                        in_subspace += (w[i].conj() * rho[i][j] * w[j]).re;
                    }
                }
            }
            assert_abs_diff_eq!(captured, in_subspace, epsilon = 1e-12);
        }
    }

    #[test]
    fn fidelity_reference_values() {
        let s12 = ca40::s12();
        let plus = AtomicState::single(s12, h(1)).unwrap();
        let minus = AtomicState::single(s12, h(-1)).unwrap();
        let both = AtomicState::from_amplitudes(
            s12,
            &[
                (h(1), c(FRAC_1_SQRT_2, 0.0)),
                (h(-1), c(FRAC_1_SQRT_2, 0.0)),
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(fidelity(&plus, &plus).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity(&plus, &minus).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity(&both, &plus).unwrap(), 0.5, epsilon = 1e-14);
        assert!(fidelity(&AtomicState::zero(s12), &plus).is_err());
    }

    #[test]
    fn zeeman_identity_cases() {
        let s = AtomicState::balanced_pair(ca40::s12(), h(1)).unwrap();
        for (b, t) in [(0.0, 1e-3), (0.4e-3, 0.0)] {
            let out = zeeman_evolve(&s, b, t);
            assert_abs_diff_eq!(fidelity(&out, &s).unwrap(), 1.0, epsilon = 1e-14);
            for m in [h(-1), h(1)] {
                assert_abs_diff_eq!((out.amp(m) - s.amp(m)).norm(), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn zeeman_qubit_period() {
        // ground-state qubit at 0.4 mT: the relative phase wraps after
        // h / (g mu_B B), about 89 ns
        let s = AtomicState::balanced_pair(ca40::s12(), h(1)).unwrap();
        let b = 0.4e-3;
        let g = ca40::s12().g_lande;
        let period = constants::PLANCK / (g * constants::BOHR_MAGNETON * b);
        assert_abs_diff_eq!(period, 8.93e-8, epsilon = 2e-10);
        let out = zeeman_evolve(&s, b, period);
        assert_abs_diff_eq!(fidelity(&out, &s).unwrap(), 1.0, epsilon = 1e-12);
        // half a period flips the qubit to the orthogonal superposition
        let half = zeeman_evolve(&s, b, period / 2.0);
        assert_abs_diff_eq!(fidelity(&half, &s).unwrap(), 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn final_state_is_linear(
            a_re in -1.0..1.0f64, a_im in -1.0..1.0f64,
            b_re in -1.0..1.0f64, b_im in -1.0..1.0f64,
            alpha in 0.0..PI, alpha_p in 0.0..PI,
        ) {
            let psi = AtomicState::single(ca40::d52(), h(-3)).unwrap();
            let geom = Geometry::new(alpha, alpha_p).unwrap();
            let det = PolarizationState::from_angles(-0.97, PI / 2.0);
            let a = c(a_re, a_im);
            let b = c(b_re, b_im);
            let combo = PolarizationState::new(a, b);
            let direct = final_state(&psi, &combo, &geom, &det).unwrap();
            let fh = final_state(&psi, &PolarizationState::horizontal(), &geom, &det).unwrap();
            let fv = final_state(&psi, &PolarizationState::vertical(), &geom, &det).unwrap();
            let sum = fh.scaled(a).add(&fv.scaled(b)).unwrap();
            for ms in [h(-1), h(1)] {
                prop_assert!((direct.amp(ms) - sum.amp(ms)).norm() < 1e-12);
            }
        }

        #[test]
        fn zeeman_preserves_norm_and_composes(
            t1 in 0.0..1e-6f64, t2 in 0.0..1e-6f64, b in 0.0..1e-2f64,
            re_p in -1.0..1.0f64, im_p in -1.0..1.0f64,
            re_m in -1.0..1.0f64, im_m in -1.0..1.0f64,
        ) {
            let raw = AtomicState::from_amplitudes(
                ca40::s12(),
                &[(h(1), c(re_p, im_p)), (h(-1), c(re_m, im_m))],
            ).unwrap();
            prop_assume!(raw.norm_sq() > 1e-6);
            let s = raw.normalized().unwrap();
            let once = zeeman_evolve(&s, b, t1 + t2);
            let twice = zeeman_evolve(&zeeman_evolve(&s, b, t1), b, t2);
            prop_assert!((once.norm_sq() - 1.0).abs() < 1e-12);
            for m in [h(-1), h(1)] {
                prop_assert!((once.amp(m) - twice.amp(m)).norm() < 1e-12);
            }
        }
    }
}
