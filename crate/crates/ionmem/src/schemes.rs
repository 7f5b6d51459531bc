//! The built-in catalog of storage schemes, declarative scheme records with
//! their declared mappings, verification against those declarations, and
//! preparation-cost accounting for the initial-state transfer pulses.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::angular::{ca40, HalfInt};
use crate::error::{Error, Result};
use crate::process::{
    fidelity, herald_pair, transfer_matrix, validity, MappingReport, TransferMatrix,
    DEFAULT_VALIDITY_TOL,
};
use crate::state::{AtomicState, Geometry, PolarizationState};
use crate::C64;

/// Version tag for the built-in catalog, reported by the CLI envelope.
pub const CATALOG_VERSION: &str = "ca40.1";

/// Scheme (d) runs on a destructive-interference condition; the catalog
/// stores the solved angles to full precision (they round to the quoted
/// 47.06 / -55.74 degrees).
const SCHEME_D_ALPHA_DEG: f64 = 47.058_597_135_120_09;
const SCHEME_D_THETA_PRIME_DEG: f64 = -55.735_350_716_219_98;

/// Which analyzer outputs herald a successful storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldAcceptance {
    /// Only the primary detection basis state.
    One,
    /// Both outputs of the analyzer.
    Both,
}

/// One of the two analyzer output ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldIndex {
    Primary,
    Secondary,
}

/// The four reference input polarizations used in declarations and reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputLabel {
    H,
    V,
    R,
    L,
}

impl InputLabel {
    pub const ALL: [InputLabel; 4] = [InputLabel::H, InputLabel::V, InputLabel::R, InputLabel::L];

    pub fn to_polarization(self) -> PolarizationState {
        match self {
            InputLabel::H => PolarizationState::horizontal(),
            InputLabel::V => PolarizationState::vertical(),
            InputLabel::R => PolarizationState::circular_right(),
            InputLabel::L => PolarizationState::circular_left(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InputLabel::H => "H",
            InputLabel::V => "V",
            InputLabel::R => "R",
            InputLabel::L => "L",
        }
    }
}

impl std::str::FromStr for InputLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H" => Ok(InputLabel::H),
            "V" => Ok(InputLabel::V),
            "R" => Ok(InputLabel::R),
            "L" => Ok(InputLabel::L),
            other => Err(Error::InvalidScheme(format!(
                "unknown input label '{other}' (expected H, V, R or L)"
            ))),
        }
    }
}

/// A declared input-to-output assignment for one herald port.
#[derive(Clone, Debug)]
pub struct DeclaredMapping {
    pub input: InputLabel,
    pub herald: HeraldIndex,
    pub expected: AtomicState,
    /// Per-mapping fidelity tolerance override (for declarations rounded to
    /// few digits); `None` falls back to the tolerance passed to `verify`.
    pub fidelity_tol: Option<f64>,
}

/// Full description of one storage scheme: prepared initial state, geometry,
/// detection basis, herald acceptance, and (optionally) declared values to
/// verify against.
#[derive(Clone, Debug)]
pub struct Scheme {
    pub name: String,
    pub psi_d: AtomicState,
    pub geometry: Geometry,
    /// Detection basis angle theta' (radians); the primary herald is
    /// cos(theta')|H> + e^{i phi'} sin(theta')|V>.
    pub theta_prime: f64,
    /// Detection basis phase phi' (radians).
    pub phi_prime: f64,
    pub accepted_heralds: HeraldAcceptance,
    pub declared_efficiency: Option<f64>,
    pub declared_mappings: Vec<DeclaredMapping>,
    /// Gram-deviation threshold below which a herald matrix counts as valid.
    pub validity_tol: f64,
}

impl Scheme {
    pub fn det_basis(&self) -> PolarizationState {
        PolarizationState::from_angles(self.theta_prime, self.phi_prime)
    }

    pub fn herald_polarization(&self, which: HeraldIndex) -> PolarizationState {
        match which {
            HeraldIndex::Primary => self.det_basis(),
            HeraldIndex::Secondary => self.det_basis().orthogonal(),
        }
    }

    /// The herald ports accepted by this scheme, in reporting order.
    pub fn accepted(&self) -> Vec<HeraldIndex> {
        match self.accepted_heralds {
            HeraldAcceptance::One => vec![HeraldIndex::Primary],
            HeraldAcceptance::Both => vec![HeraldIndex::Primary, HeraldIndex::Secondary],
        }
    }

    /// Transfer matrix conditioned on one herald port.
    pub fn matrix(&self, which: HeraldIndex) -> Result<TransferMatrix> {
        transfer_matrix(
            &self.psi_d,
            &self.geometry,
            &self.herald_polarization(which),
        )
    }

    /// Transfer matrices for all accepted heralds.
    pub fn matrices(&self) -> Result<Vec<(HeraldIndex, TransferMatrix)>> {
        match self.accepted_heralds {
            HeraldAcceptance::One => Ok(vec![(
                HeraldIndex::Primary,
                self.matrix(HeraldIndex::Primary)?,
            )]),
            HeraldAcceptance::Both => {
                let [a, b] = herald_pair(&self.psi_d, &self.geometry, &self.det_basis())?;
                Ok(vec![(HeraldIndex::Primary, a), (HeraldIndex::Secondary, b)])
            }
        }
    }

    /// Summed-herald relative efficiency (mean of the per-herald efficiency
    /// band; the band collapses for valid schemes).
    pub fn computed_efficiency(&self) -> Result<f64> {
        let mut total = 0.0;
        for (_, m) in self.matrices()? {
            let (lo, hi) = crate::process::efficiency(&m);
            total += 0.5 * (lo + hi);
        }
        Ok(total)
    }
}

/// Verification outcome for one scheme against its declarations.
#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub scheme_name: String,
    pub computed_efficiency: f64,
    pub declared_efficiency: Option<f64>,
    pub efficiency_match: bool,
    pub herald_reports: Vec<(HeraldIndex, MappingReport)>,
    /// One entry per declared mapping: (label, herald, fidelity, pass).
    pub mapping_fidelities: Vec<(InputLabel, HeraldIndex, f64, bool)>,
    pub all_pass: bool,
}

/// Recompute the scheme's transfer matrices and compare against its declared
/// efficiency (within `tol_eff`) and declared mappings (fidelity at least
/// 1 - tol, global-phase-insensitive). Every accepted herald must also be a
/// valid memory channel on its own.
pub fn verify(scheme: &Scheme, tol_eff: f64, tol_fid: f64) -> Result<VerificationReport> {
    let matrices = scheme.matrices()?;
    let herald_reports: Vec<(HeraldIndex, MappingReport)> = matrices
        .iter()
        .map(|(which, m)| (*which, validity(m, scheme.validity_tol)))
        .collect();

    let computed_efficiency: f64 = matrices
        .iter()
        .map(|(_, m)| {
            let (lo, hi) = crate::process::efficiency(m);
            0.5 * (lo + hi)
        })
        .sum();

    let efficiency_match = match scheme.declared_efficiency {
        Some(declared) => (computed_efficiency - declared).abs() <= tol_eff,
        None => true,
    };

    let mut mapping_fidelities = Vec::new();
    let mut mappings_pass = true;
    for decl in &scheme.declared_mappings {
        let m = match matrices.iter().find(|(which, _)| *which == decl.herald) {
            Some((_, m)) => m.clone(),
            None => scheme.matrix(decl.herald)?,
        };
        let out = m.apply(&decl.input.to_polarization());
        let fid = if out.is_zero(1e-300) {
            0.0
        } else {
            fidelity(&out, &decl.expected)?
        };
        let tol = decl.fidelity_tol.unwrap_or(tol_fid);
        let pass = fid >= 1.0 - tol;
        mappings_pass &= pass;
        mapping_fidelities.push((decl.input, decl.herald, fid, pass));
    }

    let heralds_valid = herald_reports.iter().all(|(_, r)| r.is_valid);
    let all_pass = efficiency_match && mappings_pass && heralds_valid;

    Ok(VerificationReport {
        scheme_name: scheme.name.clone(),
        computed_efficiency,
        declared_efficiency: scheme.declared_efficiency,
        efficiency_match,
        herald_reports,
        mapping_fidelities,
        all_pass,
    })
}

/// Number of coherent transfer pulses needed to prepare `psi_d` out of the
/// optically pumped S1/2, m = -1/2 level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreparationCost {
    pub pulses: u32,
    /// Set when the support has more than two sublevels and the count comes
    /// from greedy extension of the two-sublevel rule.
    pub approximate: bool,
}

/// Pulse count for state preparation: one quadrupole transfer pulse per
/// populated sublevel reachable with |dm| <= 2 from m = -1/2, plus one
/// radio-frequency spin flip when some target is reachable only from
/// m = +1/2.
pub fn preparation_cost(psi_d: &AtomicState) -> Result<PreparationCost> {
    let support = psi_d.support(1e-18);
    if support.is_empty() {
        return Err(Error::ZeroState);
    }
    let two = HalfInt::from_int(2);
    let mut needs_flip = false;
    for &m in &support {
        let from_minus = (m + HalfInt::HALF).abs() <= two;
        let from_plus = (m - HalfInt::HALF).abs() <= two;
        if !from_minus && !from_plus {
            return Err(Error::UnreachableSublevel { m });
        }
        needs_flip |= !from_minus;
    }
    Ok(PreparationCost {
        pulses: support.len() as u32 + u32::from(needs_flip),
        approximate: support.len() > 2,
    })
}

fn real_state(parts: &[(i32, f64)]) -> AtomicState {
    let amps: Vec<(HalfInt, C64)> = parts
        .iter()
        .map(|&(tm, re)| (HalfInt::new(tm), C64::new(re, 0.0)))
        .collect();
    AtomicState::from_amplitudes(ca40::s12(), &amps).expect("catalog states are well-formed")
}

fn mapping(
    input: InputLabel,
    herald: HeraldIndex,
    parts: &[(i32, f64)],
    fidelity_tol: Option<f64>,
) -> DeclaredMapping {
    DeclaredMapping {
        input,
        herald,
        expected: real_state(parts),
        fidelity_tol,
    }
}

/// Declared mappings shared by the three balanced-superposition schemes:
/// the two herald ports map H and V to the equal-weight superpositions with
/// opposite relative sign, and send R/L to single sublevels. `r_primary`
/// names the R target (doubled m) for the primary port; `r_flips` says
/// whether the secondary port swaps the R/L targets.
fn superposition_mappings(r_primary: i32, r_flips: bool) -> Vec<DeclaredMapping> {
    let s = FRAC_1_SQRT_2;
    let plus = [(1, s), (-1, s)];
    let minus = [(1, s), (-1, -s)];
    let single = |tm: i32| [(tm, 1.0)];
    let (r2, l2) = if r_flips {
        (-r_primary, r_primary)
    } else {
        (r_primary, -r_primary)
    };
    vec![
        mapping(InputLabel::H, HeraldIndex::Primary, &plus, None),
        mapping(InputLabel::V, HeraldIndex::Primary, &minus, None),
        mapping(
            InputLabel::R,
            HeraldIndex::Primary,
            &single(r_primary),
            None,
        ),
        mapping(
            InputLabel::L,
            HeraldIndex::Primary,
            &single(-r_primary),
            None,
        ),
        mapping(InputLabel::H, HeraldIndex::Secondary, &minus, None),
        mapping(InputLabel::V, HeraldIndex::Secondary, &plus, None),
        mapping(InputLabel::R, HeraldIndex::Secondary, &single(r2), None),
        mapping(InputLabel::L, HeraldIndex::Secondary, &single(l2), None),
    ]
}

/// The five reference schemes with their declared efficiencies and mappings.
///
/// The preparation starts from optical pumping into S1/2, m = -1/2;
/// mirror-image schemes follow by negating every m.
pub fn catalog() -> Vec<Scheme> {
    let d52 = ca40::d52();
    let two_dec = Some(5e-3);

    let scheme_a = Scheme {
        name: "a".into(),
        psi_d: AtomicState::balanced_pair(d52, HalfInt::new(5)).unwrap(),
        geometry: Geometry::from_degrees(0.0, 0.0).unwrap(),
        theta_prime: 0.0,
        phi_prime: 0.0,
        accepted_heralds: HeraldAcceptance::Both,
        declared_efficiency: Some(0.50),
        declared_mappings: superposition_mappings(-1, false),
        validity_tol: DEFAULT_VALIDITY_TOL,
    };

    let scheme_b = Scheme {
        name: "b".into(),
        psi_d: AtomicState::balanced_pair(d52, HalfInt::new(3)).unwrap(),
        geometry: Geometry::from_degrees(0.0, 90.0).unwrap(),
        theta_prime: 0.0,
        phi_prime: 0.0,
        accepted_heralds: HeraldAcceptance::Both,
        declared_efficiency: Some(0.25),
        declared_mappings: superposition_mappings(-1, true),
        validity_tol: DEFAULT_VALIDITY_TOL,
    };

    let scheme_c = Scheme {
        name: "c".into(),
        psi_d: AtomicState::balanced_pair(d52, HalfInt::new(3)).unwrap(),
        geometry: Geometry::from_degrees(0.0, 0.0).unwrap(),
        theta_prime: 0.0,
        phi_prime: 0.0,
        accepted_heralds: HeraldAcceptance::Both,
        declared_efficiency: Some(0.10),
        declared_mappings: superposition_mappings(1, false),
        validity_tol: DEFAULT_VALIDITY_TOL,
    };

    let scheme_d = Scheme {
        name: "d".into(),
        psi_d: AtomicState::single(d52, HalfInt::new(-3)).unwrap(),
        geometry: Geometry::from_degrees(SCHEME_D_ALPHA_DEG, SCHEME_D_ALPHA_DEG).unwrap(),
        theta_prime: SCHEME_D_THETA_PRIME_DEG.to_radians(),
        phi_prime: std::f64::consts::FRAC_PI_2,
        accepted_heralds: HeraldAcceptance::One,
        declared_efficiency: Some(0.1072),
        declared_mappings: vec![
            mapping(
                InputLabel::H,
                HeraldIndex::Primary,
                &[(1, 0.56), (-1, -0.83)],
                two_dec,
            ),
            mapping(
                InputLabel::V,
                HeraldIndex::Primary,
                &[(1, 0.83), (-1, 0.56)],
                two_dec,
            ),
            mapping(
                InputLabel::R,
                HeraldIndex::Primary,
                &[(1, 0.98), (-1, -0.19)],
                two_dec,
            ),
            mapping(
                InputLabel::L,
                HeraldIndex::Primary,
                &[(1, 0.19), (-1, 0.98)],
                two_dec,
            ),
        ],
        validity_tol: DEFAULT_VALIDITY_TOL,
    };

    let s = FRAC_1_SQRT_2;
    let scheme_e = Scheme {
        name: "e".into(),
        psi_d: AtomicState::single(d52, HalfInt::new(-1)).unwrap(),
        geometry: Geometry::from_degrees(90.0, 90.0).unwrap(),
        theta_prime: std::f64::consts::FRAC_PI_2,
        phi_prime: 0.0,
        accepted_heralds: HeraldAcceptance::One,
        declared_efficiency: Some(0.10),
        declared_mappings: vec![
            mapping(InputLabel::H, HeraldIndex::Primary, &[(1, 1.0)], None),
            mapping(InputLabel::V, HeraldIndex::Primary, &[(-1, 1.0)], None),
            mapping(
                InputLabel::R,
                HeraldIndex::Primary,
                &[(1, s), (-1, s)],
                None,
            ),
            mapping(
                InputLabel::L,
                HeraldIndex::Primary,
                &[(1, s), (-1, -s)],
                None,
            ),
        ],
        validity_tol: DEFAULT_VALIDITY_TOL,
    };

    vec![scheme_a, scheme_b, scheme_c, scheme_d, scheme_e]
}

/// Look up a catalog scheme by its single-letter name.
pub fn catalog_scheme(name: &str) -> Result<Scheme> {
    let wanted = name.trim().to_ascii_lowercase();
    catalog()
        .into_iter()
        .find(|s| s.name == wanted)
        .ok_or_else(|| Error::UnknownScheme(name.to_string()))
}

// ---------------------------------------------------------------------------
// Flat serialization format shared by the CLI and the search output.
// ---------------------------------------------------------------------------

/// Flat keyed record for scheme exchange; angles in degrees, amplitudes as
/// (twice_m, re, im) triples over the D5/2 (psi_d) or S1/2 (mappings)
/// sublevels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeRecord {
    pub name: String,
    pub psi_d: Vec<(i32, f64, f64)>,
    pub alpha_deg: f64,
    pub alpha_prime_deg: f64,
    pub theta_prime_deg: f64,
    pub phi_prime_deg: f64,
    /// "one" or "both".
    pub heralds: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_mappings: Option<Vec<MappingRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_tol: Option<f64>,
    /// Set by the search when it could not reach a feasible point.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub infeasible: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MappingRecord {
    /// "H", "V", "R" or "L".
    pub input: String,
    /// "primary" or "secondary".
    pub herald: String,
    pub state: Vec<(i32, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_tol: Option<f64>,
}

fn amps_to_triples(state: &AtomicState) -> Vec<(i32, f64, f64)> {
    state
        .manifold()
        .sublevels()
        .zip(state.amps())
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(m, a)| (m.twice(), a.re, a.im))
        .collect()
}

fn triples_to_state(
    manifold: crate::angular::Manifold,
    triples: &[(i32, f64, f64)],
) -> Result<AtomicState> {
    let amps: Vec<(HalfInt, C64)> = triples
        .iter()
        .map(|&(tm, re, im)| (HalfInt::new(tm), C64::new(re, im)))
        .collect();
    AtomicState::from_amplitudes(manifold, &amps).map_err(|e| Error::InvalidScheme(e.to_string()))
}

impl Scheme {
    pub fn to_record(&self) -> SchemeRecord {
        let declared_mappings = if self.declared_mappings.is_empty() {
            None
        } else {
            Some(
                self.declared_mappings
                    .iter()
                    .map(|d| MappingRecord {
                        input: d.input.as_str().to_string(),
                        herald: match d.herald {
                            HeraldIndex::Primary => "primary".into(),
                            HeraldIndex::Secondary => "secondary".into(),
                        },
                        state: amps_to_triples(&d.expected),
                        fidelity_tol: d.fidelity_tol,
                    })
                    .collect(),
            )
        };
        SchemeRecord {
            name: self.name.clone(),
            psi_d: amps_to_triples(&self.psi_d),
            alpha_deg: self.geometry.alpha_deg(),
            alpha_prime_deg: self.geometry.alpha_prime_deg(),
            theta_prime_deg: self.theta_prime.to_degrees(),
            phi_prime_deg: self.phi_prime.to_degrees(),
            heralds: match self.accepted_heralds {
                HeraldAcceptance::One => "one".into(),
                HeraldAcceptance::Both => "both".into(),
            },
            declared_efficiency: self.declared_efficiency,
            declared_mappings,
            validity_tol: if self.validity_tol == DEFAULT_VALIDITY_TOL {
                None
            } else {
                Some(self.validity_tol)
            },
            infeasible: false,
        }
    }

    pub fn from_record(record: &SchemeRecord) -> Result<Self> {
        let psi_d = triples_to_state(ca40::d52(), &record.psi_d)?;
        if psi_d.is_zero(1e-300) {
            return Err(Error::InvalidScheme("psi_d has no amplitude".into()));
        }
        let n = psi_d.norm_sq();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScheme(format!(
                "psi_d must be normalized (got squared norm {n})"
            )));
        }
        let geometry = Geometry::from_degrees(record.alpha_deg, record.alpha_prime_deg)
            .map_err(|e| Error::InvalidScheme(e.to_string()))?;
        let accepted_heralds = match record.heralds.as_str() {
            "one" => HeraldAcceptance::One,
            "both" => HeraldAcceptance::Both,
            other => {
                return Err(Error::InvalidScheme(format!(
                    "heralds field must be \"one\" or \"both\", got \"{other}\""
                )))
            }
        };
        let mut declared_mappings = Vec::new();
        for m in record.declared_mappings.iter().flatten() {
            let input: InputLabel = m.input.parse()?;
            let herald = match m.herald.as_str() {
                "primary" => HeraldIndex::Primary,
                "secondary" => HeraldIndex::Secondary,
                other => {
                    return Err(Error::InvalidScheme(format!(
                        "herald field must be \"primary\" or \"secondary\", got \"{other}\""
                    )))
                }
            };
            declared_mappings.push(DeclaredMapping {
                input,
                herald,
                expected: triples_to_state(ca40::s12(), &m.state)?,
                fidelity_tol: m.fidelity_tol,
            });
        }
        Ok(Scheme {
            name: record.name.clone(),
            psi_d,
            geometry,
            theta_prime: record.theta_prime_deg.to_radians(),
            phi_prime: record.phi_prime_deg.to_radians(),
            accepted_heralds,
            declared_efficiency: record.declared_efficiency,
            declared_mappings,
            validity_tol: record.validity_tol.unwrap_or(DEFAULT_VALIDITY_TOL),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catalog_shape_and_parameters() {
        let cat = catalog();
        assert_eq!(cat.len(), 5);
        let names: Vec<_> = cat.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d", "e"]);

        assert_eq!(cat[0].declared_efficiency, Some(0.50));
        assert_eq!(cat[1].declared_efficiency, Some(0.25));
        assert_eq!(cat[2].declared_efficiency, Some(0.10));
        assert_eq!(cat[3].declared_efficiency, Some(0.1072));
        assert_eq!(cat[4].declared_efficiency, Some(0.10));

        // quoted to two decimals
        assert_abs_diff_eq!(cat[3].geometry.alpha_deg(), 47.06, epsilon = 5e-3);
        assert_abs_diff_eq!(cat[3].theta_prime.to_degrees(), -55.74, epsilon = 5e-3);
        assert_abs_diff_eq!(cat[3].phi_prime.to_degrees(), 90.0, epsilon = 1e-12);

        // scheme (e) detects only V
        let det = cat[4].det_basis();
        assert_abs_diff_eq!(det.amp_h.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(det.amp_v.norm(), 1.0, epsilon = 1e-15);

        for s in &cat {
            assert_abs_diff_eq!(s.psi_d.norm_sq(), 1.0, epsilon = 1e-12);
        }

        // pairwise distinct parameter bundles
        for i in 0..cat.len() {
            for j in (i + 1)..cat.len() {
                let (a, b) = (&cat[i], &cat[j]);
                let same_psi = a
                    .psi_d
                    .amps()
                    .iter()
                    .zip(b.psi_d.amps())
                    .all(|(x, y)| (x - y).norm() < 1e-12);
                let same_params = a.geometry == b.geometry
                    && (a.theta_prime - b.theta_prime).abs() < 1e-12
                    && (a.phi_prime - b.phi_prime).abs() < 1e-12;
                assert!(
                    !(same_psi && same_params),
                    "schemes {} and {} coincide",
                    a.name,
                    b.name
                );
            }
        }
    }

    #[test]
    fn catalog_efficiencies_reproduce_declarations() {
        for scheme in catalog() {
            let eps = scheme.computed_efficiency().unwrap();
            let declared = scheme.declared_efficiency.unwrap();
            assert_abs_diff_eq!(eps, declared, epsilon = 1e-4);
        }
    }

    #[test]
    fn every_catalog_scheme_verifies() {
        for scheme in catalog() {
            let report = verify(&scheme, 1e-4, 1e-4).unwrap();
            assert!(
                report.all_pass,
                "scheme {} failed: eff {} vs {:?}, fidelities {:?}",
                report.scheme_name,
                report.computed_efficiency,
                report.declared_efficiency,
                report.mapping_fidelities
            );
            for (_, r) in &report.herald_reports {
                assert!(r.gram_deviation <= 1e-9);
            }
        }
    }

    #[test]
    fn tampered_detection_angle_fails_verification() {
        let mut scheme = catalog_scheme("d").unwrap();
        scheme.geometry = Geometry::from_degrees(scheme.geometry.alpha_deg(), 0.0).unwrap();
        let report = verify(&scheme, 1e-4, 1e-4).unwrap();
        assert!(!report.all_pass);
    }

    #[test]
    fn missing_declared_efficiency_is_vacuous() {
        let mut scheme = catalog_scheme("a").unwrap();
        scheme.declared_efficiency = None;
        let report = verify(&scheme, 1e-12, 1e-4).unwrap();
        assert!(report.efficiency_match);
        assert!(report.all_pass);
    }

    #[test]
    fn preparation_costs() {
        let d52 = ca40::d52();
        let single = |tm: i32| AtomicState::single(d52, HalfInt::new(tm)).unwrap();

        assert_eq!(
            preparation_cost(&single(-3)).unwrap(),
            PreparationCost {
                pulses: 1,
                approximate: false
            }
        );
        let pair3 = AtomicState::balanced_pair(d52, HalfInt::new(3)).unwrap();
        assert_eq!(
            preparation_cost(&pair3).unwrap(),
            PreparationCost {
                pulses: 2,
                approximate: false
            }
        );
        let pair5 = AtomicState::balanced_pair(d52, HalfInt::new(5)).unwrap();
        assert_eq!(
            preparation_cost(&pair5).unwrap(),
            PreparationCost {
                pulses: 3,
                approximate: false
            }
        );
        // +5/2 alone needs the spin flip before its transfer pulse
        assert_eq!(
            preparation_cost(&single(5)).unwrap(),
            PreparationCost {
                pulses: 2,
                approximate: false
            }
        );

        let expected = [3, 2, 2, 1, 1];
        for (scheme, want) in catalog().iter().zip(expected) {
            assert_eq!(preparation_cost(&scheme.psi_d).unwrap().pulses, want);
        }

        // supports beyond two sublevels use the greedy extension and say so
        let w = C64::new((1.0f64 / 3.0).sqrt(), 0.0);
        let wide = AtomicState::from_amplitudes(
            d52,
            &[
                (HalfInt::new(-5), w),
                (HalfInt::new(-1), w),
                (HalfInt::new(3), w),
            ],
        )
        .unwrap();
        assert_eq!(
            preparation_cost(&wide).unwrap(),
            PreparationCost {
                pulses: 3,
                approximate: true
            }
        );
        assert!(preparation_cost(&AtomicState::zero(d52)).is_err());
    }

    #[test]
    fn preparation_cost_ignores_global_phase() {
        let d52 = ca40::d52();
        let base = AtomicState::balanced_pair(d52, HalfInt::new(5)).unwrap();
        let rotated = base.scaled(C64::from_polar(1.0, 1.234));
        assert_eq!(
            preparation_cost(&base).unwrap(),
            preparation_cost(&rotated).unwrap()
        );
        // relabeling one superposition amplitude by phase changes nothing
        let mut phased = base.clone();
        phased
            .set_amp(
                HalfInt::new(5),
                base.amp(HalfInt::new(5)) * C64::from_polar(1.0, -0.7),
            )
            .unwrap();
        assert_eq!(
            preparation_cost(&base).unwrap(),
            preparation_cost(&phased).unwrap()
        );
    }

    #[test]
    fn record_roundtrip_preserves_scheme() {
        for scheme in catalog() {
            let json = serde_json::to_string_pretty(&scheme.to_record()).unwrap();
            let record: SchemeRecord = serde_json::from_str(&json).unwrap();
            let back = Scheme::from_record(&record).unwrap();
            assert_eq!(back.name, scheme.name);
            assert_eq!(back.accepted_heralds, scheme.accepted_heralds);
            assert_abs_diff_eq!(
                back.geometry.alpha_deg(),
                scheme.geometry.alpha_deg(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(back.theta_prime, scheme.theta_prime, epsilon = 1e-15);
            for (a, b) in back.psi_d.amps().iter().zip(scheme.psi_d.amps()) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
            }
            assert_eq!(back.declared_mappings.len(), scheme.declared_mappings.len());
            // serialization is stable byte-for-byte
            let json2 = serde_json::to_string_pretty(&back.to_record()).unwrap();
            assert_eq!(json, json2);
        }
    }

    #[test]
    fn malformed_records_are_rejected() {
        let record = SchemeRecord {
            name: "x".into(),
            psi_d: vec![(-3, 0.5, 0.0)],
            alpha_deg: 0.0,
            alpha_prime_deg: 0.0,
            theta_prime_deg: 0.0,
            phi_prime_deg: 0.0,
            heralds: "one".into(),
            declared_efficiency: None,
            declared_mappings: None,
            validity_tol: None,
            infeasible: false,
        };
        // unnormalized psi_d
        assert!(Scheme::from_record(&record).is_err());
        let mut bad_heralds = record.clone();
        bad_heralds.psi_d = vec![(-3, 1.0, 0.0)];
        bad_heralds.heralds = "every".into();
        assert!(Scheme::from_record(&bad_heralds).is_err());
        let mut bad_sublevel = record.clone();
        bad_sublevel.psi_d = vec![(-7, 1.0, 0.0)];
        assert!(Scheme::from_record(&bad_sublevel).is_err());
    }
}
