//! Numerical discovery of valid storage schemes: constrained derivative-free
//! optimization of the summed-herald efficiency over the initial state,
//! beam/detection angles and detection basis, plus parametric sensitivity
//! sweeps around a given scheme.
//!
//! Strategy: a coarse deterministic grid (2 degree steps on alpha/alpha',
//! 5 degrees on theta'/phi') seeds local Nelder-Mead refinements from the
//! best K = 5 grid points; refinement runs on the penalty objective
//! eps - w * gram_deviation with an escalating weight schedule (starting at
//! w = 1e3, which alone leaves the simplex short of typical feasibility
//! tolerances) and ends with an exact feasibility check.

use rayon::prelude::*;

use crate::angular::{ca40, HalfInt};
use crate::error::{Error, Result};
use crate::process::{efficiency, fidelity, herald_pair, transfer_matrix, TransferMatrix};
use crate::schemes::{HeraldAcceptance, HeraldIndex, InputLabel, Scheme};
use crate::state::{AtomicState, Geometry, PolarizationState};
use crate::C64;

const GRID_STEP_ALPHA_DEG: f64 = 2.0;
const GRID_STEP_DETECTION_DEG: f64 = 5.0;
const REFINE_STARTS: usize = 5;
/// Weight of the soft feasibility filter ranking grid points. The grid is
/// too coarse for any point to meet a tight feasibility tolerance exactly,
/// so candidate basins are ranked by eps - w * deviation with a weight that
/// keeps nearly-valid basins above both degenerate near-zero maps (score
/// barely below zero) and strongly polarizing points (large deviation).
const GRID_FILTER_WEIGHT: f64 = 10.0;
/// Escalation stages: (penalty weight, initial simplex step in degrees).
const PENALTY_SCHEDULE: [(f64, f64); 4] = [(1e3, 2.0), (1e5, 0.2), (1e7, 0.02), (1e9, 0.002)];
/// Objective difference below which two candidates count as tied and the
/// canonical-representative ordering decides.
const TIE_TOL: f64 = 1e-8;

/// Families of initial atomic states the search may range over.
#[derive(Clone, Debug)]
pub enum PsiDFamily {
    /// A single fixed state.
    Fixed(AtomicState),
    /// Every single sublevel |m> of D5/2.
    SingleSublevel,
    /// Every balanced pair (|-m> + |+m>)/sqrt(2), m > 0, relative phase 0
    /// (a relative phase is absorbable into the detection basis).
    BalancedPair,
}

/// Whether the detection basis is searched or held fixed.
#[derive(Clone, Copy, Debug)]
pub enum DetectionSpace {
    /// Optimize theta' and phi' over the given ranges (radians).
    Free {
        theta_prime_range: (f64, f64),
        phi_prime_range: (f64, f64),
    },
    Fixed {
        theta_prime: f64,
        phi_prime: f64,
    },
}

impl DetectionSpace {
    /// The full detection sphere: theta' in [-90, 90], phi' in [0, 180)
    /// degrees (every basis state appears once up to global phase).
    pub fn free() -> Self {
        DetectionSpace::Free {
            theta_prime_range: (-90f64.to_radians(), 90f64.to_radians()),
            phi_prime_range: (0.0, 180f64.to_radians()),
        }
    }
}

/// Herald bookkeeping during the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeraldMode {
    /// Only the primary analyzer port heralds storage.
    One,
    /// Both ports must be individually valid; their efficiencies add.
    Both,
    /// Count the secondary port whenever it happens to be valid on its own;
    /// feasibility is judged on the primary port alone.
    Auto,
}

/// The searchable parameter box.
#[derive(Clone, Debug)]
pub struct SearchSpace {
    pub psi_d_family: PsiDFamily,
    /// Radians; a zero-width range pins the angle.
    pub alpha_range: (f64, f64),
    pub alpha_prime_range: (f64, f64),
    /// Enforce alpha' = alpha (collinear collection optics).
    pub lock_alpha_equal: bool,
    pub detection: DetectionSpace,
    pub heralds: HeraldMode,
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64)| {
            if lo > hi || lo < -1e-12 || hi > std::f64::consts::PI + 1e-12 {
                Err(Error::InvalidSearchSpace(format!(
                    "{name} range [{lo:.4}, {hi:.4}] rad is not within [0, pi]"
                )))
            } else {
                Ok(())
            }
        };
        check("alpha", self.alpha_range)?;
        if !self.lock_alpha_equal {
            check("alpha_prime", self.alpha_prime_range)?;
        }
        if let PsiDFamily::Fixed(state) = &self.psi_d_family {
            if state.is_zero(1e-300) {
                return Err(Error::InvalidSearchSpace("fixed psi_d is zero".into()));
            }
        }
        Ok(())
    }

    fn psi_d_candidates(&self) -> Vec<AtomicState> {
        let d52 = ca40::d52();
        match &self.psi_d_family {
            PsiDFamily::Fixed(state) => vec![state.normalized().expect("validated nonzero")],
            PsiDFamily::SingleSublevel => d52
                .sublevels()
                .map(|m| AtomicState::single(d52, m).unwrap())
                .collect(),
            PsiDFamily::BalancedPair => [1, 3, 5]
                .iter()
                .map(|&tm| AtomicState::balanced_pair(d52, HalfInt::new(tm)).unwrap())
                .collect(),
        }
    }
}

/// One step of the incumbent trace: cumulative evaluation count, the best
/// feasible objective seen so far, and its constraint residual.
#[derive(Clone, Copy, Debug)]
pub struct TracePoint {
    pub evaluations: usize,
    pub objective: f64,
    pub residual: f64,
}

/// Search outcome: the best scheme found, its summed-herald efficiency, the
/// worst gram deviation across its accepted heralds, and the feasible
/// incumbent trace.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: Scheme,
    pub objective: f64,
    pub constraint_residual: f64,
    pub feasible: bool,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
struct Point {
    alpha: f64,
    alpha_prime: f64,
    theta_prime: f64,
    phi_prime: f64,
}

#[derive(Clone, Copy, Debug)]
struct Evaluation {
    /// Summed-herald mean efficiency.
    objective: f64,
    /// Max gram deviation over the heralds that feasibility is judged on.
    residual: f64,
    /// Gram deviation relative to the larger squared singular value; scale
    /// free, used to rank infeasible candidates (the absolute deviation of a
    /// nearly empty map is small for the wrong reason).
    rel_residual: f64,
    /// Every counted herald is a genuine memory channel: nonzero, with its
    /// two squared singular values within a factor two of each other. A map
    /// that meets the absolute deviation bound by smallness alone is not a
    /// storage scheme.
    shape_ok: bool,
    /// Whether the secondary port is counted (Auto mode decides per point).
    secondary_counted: bool,
}

fn mean_eff(m: &TransferMatrix) -> f64 {
    let (lo, hi) = efficiency(m);
    0.5 * (lo + hi)
}

/// (deviation, relative deviation, shape ok) for one herald matrix.
fn channel_quality(m: &TransferMatrix) -> (f64, f64, bool) {
    let (lo, hi) = m.singular_values_sq();
    let dev = m.gram_deviation();
    if hi <= 1e-12 {
        return (dev, f64::INFINITY, false);
    }
    (dev, dev / hi, lo >= 0.5 * hi)
}

fn evaluate(psi_d: &AtomicState, p: &Point, mode: HeraldMode, feas_tol: f64) -> Evaluation {
    let geometry = match Geometry::new(p.alpha, p.alpha_prime) {
        Ok(g) => g,
        Err(_) => {
            return Evaluation {
                objective: 0.0,
                residual: f64::INFINITY,
                rel_residual: f64::INFINITY,
                shape_ok: false,
                secondary_counted: false,
            }
        }
    };
    let det = PolarizationState::from_angles(p.theta_prime, p.phi_prime);
    match mode {
        HeraldMode::One => {
            let m = transfer_matrix(psi_d, &geometry, &det).expect("D5/2 couples to P3/2");
            let (dev, rel, shape_ok) = channel_quality(&m);
            Evaluation {
                objective: mean_eff(&m),
                residual: dev,
                rel_residual: rel,
                shape_ok,
                secondary_counted: false,
            }
        }
        HeraldMode::Both => {
            let [m1, m2] = herald_pair(psi_d, &geometry, &det).expect("D5/2 couples to P3/2");
            let (d1, r1, s1) = channel_quality(&m1);
            let (d2, r2, s2) = channel_quality(&m2);
            Evaluation {
                objective: mean_eff(&m1) + mean_eff(&m2),
                residual: d1.max(d2),
                rel_residual: r1.max(r2),
                shape_ok: s1 && s2,
                secondary_counted: true,
            }
        }
        HeraldMode::Auto => {
            let [m1, m2] = herald_pair(psi_d, &geometry, &det).expect("D5/2 couples to P3/2");
            let (d1, r1, s1) = channel_quality(&m1);
            let (d2, _, s2) = channel_quality(&m2);
            let secondary_ok = d2 <= feas_tol && s2;
            Evaluation {
                objective: mean_eff(&m1) + if secondary_ok { mean_eff(&m2) } else { 0.0 },
                residual: d1,
                rel_residual: r1,
                shape_ok: s1,
                secondary_counted: secondary_ok,
            }
        }
    }
}

/// Fold the detection angles to the canonical representative:
/// (theta', phi') and (-theta', phi' + pi) describe the same basis state, so
/// phi' is folded into [0, pi) and theta' into (-pi/2, pi/2]; degenerate
/// theta' values (0 or 90 degrees) zero out the then-meaningless phi'.
fn canonical_detection(theta: f64, phi: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let mut th = theta.rem_euclid(2.0 * PI);
    if th > PI + 1e-15 {
        th -= 2.0 * PI; // into (-pi, pi]
    }
    let mut ph = phi.rem_euclid(2.0 * PI);
    // theta out of (-pi/2, pi/2]: shift by pi (same state up to sign)
    if th > PI / 2.0 + 1e-15 {
        th -= PI;
    } else if th <= -PI / 2.0 + 1e-15 {
        th += PI;
    }
    if ph >= PI - 1e-15 {
        ph -= PI;
        th = -th;
    }
    if th <= -PI / 2.0 + 1e-15 {
        th += PI;
    }
    let eps = 1e-12;
    if th.abs() < eps {
        return (0.0, 0.0);
    }
    if (th - PI / 2.0).abs() < eps {
        return (PI / 2.0, 0.0);
    }
    if ph.abs() < eps {
        ph = 0.0;
    }
    (th, ph)
}

fn canonical_point(p: &Point) -> Point {
    let (theta_prime, phi_prime) = canonical_detection(p.theta_prime, p.phi_prime);
    Point {
        alpha: p.alpha,
        alpha_prime: p.alpha_prime,
        theta_prime,
        phi_prime,
    }
}

/// Candidate ordering: feasible first, then higher objective; ties resolved
/// toward the canonical representative (smallest |theta'|, then smallest
/// phi', then smallest alpha, alpha').
fn better(a: &(Point, Evaluation, bool), b: &(Point, Evaluation, bool)) -> bool {
    let (pa, ea, fa) = a;
    let (pb, eb, fb) = b;
    if fa != fb {
        return *fa;
    }
    if !fa {
        // both infeasible: closest to a proportional-to-unitary shape first
        // (relative residual), then more efficiency
        if (ea.rel_residual - eb.rel_residual).abs() > 1e-12 {
            return ea.rel_residual < eb.rel_residual;
        }
        return ea.objective > eb.objective;
    }
    if (ea.objective - eb.objective).abs() > TIE_TOL {
        return ea.objective > eb.objective;
    }
    let ta = pa.theta_prime.abs();
    let tb = pb.theta_prime.abs();
    if (ta - tb).abs() > 1e-9 {
        return ta < tb;
    }
    if (pa.phi_prime - pb.phi_prime).abs() > 1e-9 {
        return pa.phi_prime < pb.phi_prime;
    }
    if (pa.alpha - pb.alpha).abs() > 1e-12 {
        return pa.alpha < pb.alpha;
    }
    pa.alpha_prime < pb.alpha_prime
}

fn grid_values(range: (f64, f64), step_deg: f64) -> Vec<f64> {
    let (lo, hi) = range;
    let step = step_deg.to_radians();
    if hi - lo < 1e-15 {
        return vec![lo];
    }
    let mut values = Vec::new();
    let mut v = lo;
    while v < hi - 1e-12 {
        values.push(v);
        v += step;
    }
    values.push(hi);
    values
}

/// Free coordinates of a search point, in fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Coord {
    Alpha,
    AlphaPrime,
    ThetaPrime,
    PhiPrime,
}

struct Problem<'a> {
    psi_d: &'a AtomicState,
    space: &'a SearchSpace,
    feas_tol: f64,
    coords: Vec<(Coord, (f64, f64))>,
    base: Point,
}

impl<'a> Problem<'a> {
    fn new(psi_d: &'a AtomicState, space: &'a SearchSpace, feas_tol: f64) -> Self {
        let mut coords = Vec::new();
        if space.alpha_range.1 - space.alpha_range.0 > 1e-15 {
            coords.push((Coord::Alpha, space.alpha_range));
        }
        if !space.lock_alpha_equal && space.alpha_prime_range.1 - space.alpha_prime_range.0 > 1e-15
        {
            coords.push((Coord::AlphaPrime, space.alpha_prime_range));
        }
        let fixed_detection = match space.detection {
            DetectionSpace::Fixed {
                theta_prime,
                phi_prime,
            } => (theta_prime, phi_prime),
            DetectionSpace::Free {
                theta_prime_range,
                phi_prime_range,
            } => {
                if theta_prime_range.1 - theta_prime_range.0 > 1e-15 {
                    coords.push((Coord::ThetaPrime, theta_prime_range));
                }
                if phi_prime_range.1 - phi_prime_range.0 > 1e-15 {
                    coords.push((Coord::PhiPrime, phi_prime_range));
                }
                (theta_prime_range.0, phi_prime_range.0)
            }
        };
        let base = Point {
            alpha: space.alpha_range.0,
            alpha_prime: if space.lock_alpha_equal {
                space.alpha_range.0
            } else {
                space.alpha_prime_range.0
            },
            theta_prime: fixed_detection.0,
            phi_prime: fixed_detection.1,
        };
        Problem {
            psi_d,
            space,
            feas_tol,
            coords,
            base,
        }
    }

    fn point(&self, x: &[f64]) -> Point {
        let mut p = self.base;
        for (&v, &(coord, (lo, hi))) in x.iter().zip(&self.coords) {
            match coord {
                Coord::Alpha => {
                    p.alpha = v.clamp(lo, hi);
                    if self.space.lock_alpha_equal {
                        p.alpha_prime = p.alpha;
                    }
                }
                Coord::AlphaPrime => p.alpha_prime = v.clamp(lo, hi),
                // detection angles wander periodically during refinement
                Coord::ThetaPrime => p.theta_prime = v,
                Coord::PhiPrime => p.phi_prime = v,
            }
        }
        p
    }

    fn x_of(&self, p: &Point) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&(coord, _)| match coord {
                Coord::Alpha => p.alpha,
                Coord::AlphaPrime => p.alpha_prime,
                Coord::ThetaPrime => p.theta_prime,
                Coord::PhiPrime => p.phi_prime,
            })
            .collect()
    }

    fn penalty(&self, x: &[f64], weight: f64, evals: &mut usize) -> f64 {
        let p = self.point(x);
        let e = evaluate(self.psi_d, &p, self.space.heralds, self.feas_tol);
        *evals += 1;
        -(e.objective - weight * e.residual)
    }
}

/// Plain Nelder-Mead minimization, deterministic, standard coefficients.
fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = start.len();
    if n == 0 {
        return start.to_vec();
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = f(start);
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }

    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size: f64 = (0..n)
            .map(|i| {
                simplex
                    .iter()
                    .map(|(v, _)| (v[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() < 1e-14 && size < 1e-11 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let at = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| centroid[i] + t * (centroid[i] - worst.0[i]))
                .collect()
        };

        let reflected = at(1.0);
        let f_r = f(&reflected);
        if f_r < simplex[0].1 {
            let expanded = at(2.0);
            let f_e = f(&expanded);
            simplex[n] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (reflected, f_r);
        } else {
            let contracted = if f_r < worst.1 { at(0.5) } else { at(-0.5) };
            let f_c = f(&contracted);
            if f_c < worst.1.min(f_r) {
                simplex[n] = (contracted, f_c);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = entry
                        .0
                        .iter()
                        .zip(&best)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    let fv = f(&v);
                    *entry = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0.clone()
}

/// Maximize the summed-herald efficiency over `space` subject to every
/// accepted herald having gram deviation at most `feasibility_tol`.
///
/// Deterministic: the grid, the refinements and all tie-breaking are
/// seed-independent; the seed is echoed in the result for bookkeeping.
/// Returns the best feasible point, or the least-infeasible point with
/// `feasible = false` when the space admits none.
pub fn optimize(space: &SearchSpace, feasibility_tol: f64, seed: u64) -> Result<SearchResult> {
    space.validate()?;
    let candidates = space.psi_d_candidates();
    if candidates.is_empty() {
        return Err(Error::InvalidSearchSpace("no psi_d candidates".into()));
    }

    let mut evaluations = 0usize;
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut incumbent: Option<(AtomicState, Point, Evaluation, bool)> = None;

    for psi_d in &candidates {
        let problem = Problem::new(psi_d, space, feasibility_tol);

        // --- grid stage ---------------------------------------------------
        let alphas = grid_values(space.alpha_range, GRID_STEP_ALPHA_DEG);
        let alpha_primes = if space.lock_alpha_equal {
            vec![0.0] // placeholder, alpha' follows alpha
        } else {
            grid_values(space.alpha_prime_range, GRID_STEP_ALPHA_DEG)
        };
        let (thetas, phis) = match space.detection {
            DetectionSpace::Fixed {
                theta_prime,
                phi_prime,
            } => (vec![theta_prime], vec![phi_prime]),
            DetectionSpace::Free {
                theta_prime_range,
                phi_prime_range,
            } => (
                grid_values(theta_prime_range, GRID_STEP_DETECTION_DEG),
                grid_values(phi_prime_range, GRID_STEP_DETECTION_DEG),
            ),
        };

        let mut grid: Vec<Point> = Vec::new();
        for &alpha in &alphas {
            for &ap in &alpha_primes {
                let alpha_prime = if space.lock_alpha_equal { alpha } else { ap };
                for &theta_prime in &thetas {
                    for &phi_prime in &phis {
                        grid.push(Point {
                            alpha,
                            alpha_prime,
                            theta_prime,
                            phi_prime,
                        });
                    }
                }
            }
        }

        let evaluated: Vec<(Point, Evaluation)> = grid
            .par_iter()
            .map(|p| (*p, evaluate(psi_d, p, space.heralds, feasibility_tol)))
            .collect();
        evaluations += evaluated.len();

        // incumbent updates in deterministic grid order
        for (p, e) in &evaluated {
            record_incumbent(
                &mut incumbent,
                &mut trace,
                psi_d,
                p,
                e,
                feasibility_tol,
                evaluations,
            );
        }

        if problem.coords.is_empty() {
            continue;
        }

        // --- refinement starts: three channels, deduplicated -----------------
        // (1) grid points that are already exactly feasible, by efficiency;
        // (2) the soft feasibility-filter score;
        // (3) raw efficiency, to keep high-efficiency basins that the filter
        //     punishes too hard.
        let mut feasible_idx: Vec<usize> = (0..evaluated.len())
            .filter(|&i| {
                let e = &evaluated[i].1;
                e.residual <= feasibility_tol && e.shape_ok
            })
            .collect();
        feasible_idx.sort_by(|&i, &j| {
            evaluated[j]
                .1
                .objective
                .total_cmp(&evaluated[i].1.objective)
        });
        let mut by_filter: Vec<usize> = (0..evaluated.len()).collect();
        let score = |e: &Evaluation| e.objective - GRID_FILTER_WEIGHT * e.residual;
        by_filter.sort_by(|&i, &j| score(&evaluated[j].1).total_cmp(&score(&evaluated[i].1)));
        let mut by_objective: Vec<usize> = (0..evaluated.len()).collect();
        by_objective.sort_by(|&i, &j| {
            evaluated[j]
                .1
                .objective
                .total_cmp(&evaluated[i].1.objective)
        });

        let mut starts: Vec<usize> = Vec::new();
        for channel in [&feasible_idx, &by_filter, &by_objective] {
            for &i in channel.iter().take(REFINE_STARTS) {
                if !starts.contains(&i) {
                    starts.push(i);
                }
            }
        }

        // --- simplex refinement with escalating penalty weight -------------
        for &i in &starts {
            let mut x = problem.x_of(&evaluated[i].0);
            for &(weight, step_deg) in &PENALTY_SCHEDULE {
                let mut local_evals = 0usize;
                let mut f = |v: &[f64]| problem.penalty(v, weight, &mut local_evals);
                x = nelder_mead(&mut f, &x, step_deg.to_radians(), 400);
                evaluations += local_evals;
            }
            let p = problem.point(&x);
            let e = evaluate(psi_d, &p, space.heralds, feasibility_tol);
            evaluations += 1;
            record_incumbent(
                &mut incumbent,
                &mut trace,
                psi_d,
                &p,
                &e,
                feasibility_tol,
                evaluations,
            );
        }
    }

    let (psi_d, point, eval, feasible) =
        incumbent.ok_or_else(|| Error::InvalidSearchSpace("empty search grid".into()))?;

    let accepted = match space.heralds {
        HeraldMode::One => HeraldAcceptance::One,
        HeraldMode::Both => HeraldAcceptance::Both,
        HeraldMode::Auto => {
            if eval.secondary_counted {
                HeraldAcceptance::Both
            } else {
                HeraldAcceptance::One
            }
        }
    };
    let best = Scheme {
        name: "optimized".into(),
        psi_d,
        geometry: Geometry::new(point.alpha, point.alpha_prime)
            .expect("search points stay within [0, pi]"),
        theta_prime: point.theta_prime,
        phi_prime: point.phi_prime,
        accepted_heralds: accepted,
        declared_efficiency: None,
        declared_mappings: Vec::new(),
        validity_tol: feasibility_tol,
    };

    Ok(SearchResult {
        best,
        objective: eval.objective,
        constraint_residual: eval.residual,
        feasible,
        trace,
        evaluations,
        seed,
    })
}

#[allow(clippy::too_many_arguments)]
fn record_incumbent(
    incumbent: &mut Option<(AtomicState, Point, Evaluation, bool)>,
    trace: &mut Vec<TracePoint>,
    psi_d: &AtomicState,
    p: &Point,
    e: &Evaluation,
    feas_tol: f64,
    evaluations: usize,
) {
    let feasible = e.residual <= feas_tol && e.shape_ok;
    let candidate = (canonical_point(p), *e, feasible);
    let replace = match incumbent {
        None => true,
        Some((_, ip, ie, ifeas)) => better(&candidate, &(*ip, *ie, *ifeas)),
    };
    if !replace {
        return;
    }
    // the trace records the feasible incumbent sequence, along which the
    // objective never decreases
    let emit = match incumbent {
        Some((_, _, ie, true)) => feasible && e.objective > ie.objective + TIE_TOL,
        _ => feasible,
    };
    *incumbent = Some((psi_d.clone(), candidate.0, *e, feasible));
    if emit {
        trace.push(TracePoint {
            evaluations,
            objective: e.objective,
            residual: e.residual,
        });
    }
}

/// Parameters a sweep can vary. Angle parameters take absolute values in
/// radians; the impurity parameters mix a fixed orthogonal perturbation into
/// the input polarizations or the prepared atomic state with real amplitude
/// eta (the sweep value).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    Alpha,
    AlphaPrime,
    ThetaPrime,
    PhiPrime,
    InputImpurity,
    PsiDImpurity,
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepParameter::Alpha),
            "alpha_prime" => Ok(SweepParameter::AlphaPrime),
            "theta_prime" => Ok(SweepParameter::ThetaPrime),
            "phi_prime" => Ok(SweepParameter::PhiPrime),
            "input_impurity" => Ok(SweepParameter::InputImpurity),
            "psi_d_impurity" => Ok(SweepParameter::PsiDImpurity),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::AlphaPrime => "alpha_prime",
            SweepParameter::ThetaPrime => "theta_prime",
            SweepParameter::PhiPrime => "phi_prime",
            SweepParameter::InputImpurity => "input_impurity",
            SweepParameter::PsiDImpurity => "psi_d_impurity",
        }
    }

    pub fn is_angle(self) -> bool {
        !matches!(
            self,
            SweepParameter::InputImpurity | SweepParameter::PsiDImpurity
        )
    }
}

/// One sampled point of a sweep.
#[derive(Clone, Copy, Debug)]
pub struct SweepSample {
    /// Angle parameters in radians; impurity amplitudes dimensionless.
    pub parameter_value: f64,
    pub efficiency_min: f64,
    pub efficiency_max: f64,
    /// Worst gram deviation over the scheme's accepted heralds.
    pub gram_deviation: f64,
    /// Worst fidelity of the perturbed H/V/R/L images against the nominal
    /// scheme's images.
    pub worst_fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub samples: Vec<SweepSample>,
}

/// The fixed orthogonal perturbation used by the psi_d impurity sweep: for a
/// single populated sublevel |m>, the neighboring sublevel (|m+1>, falling
/// back to |m-1> at the manifold edge); for a superposition, the state
/// obtained by flipping the sign of the highest-m amplitude, orthogonalized
/// against the original. The first models residual transfer into a spectator
/// level, the second a phase error of the preparing pulses.
fn orthogonal_perturbation(psi: &AtomicState) -> Result<AtomicState> {
    let support = psi.support(1e-12);
    let manifold = *psi.manifold();
    match support.as_slice() {
        [] => Err(Error::ZeroState),
        [m] => {
            let up = *m + HalfInt::ONE;
            let target = if manifold.holds(up) {
                up
            } else {
                *m - HalfInt::ONE
            };
            AtomicState::single(manifold, target)
        }
        _ => {
            let top = *support.last().expect("nonempty");
            let mut flipped = psi.clone();
            flipped.set_amp(top, -psi.amp(top))?;
            let overlap = psi.inner(&flipped)?;
            let projected = flipped.add(&psi.scaled(-overlap))?;
            projected.normalized()
        }
    }
}

fn mix(nominal: &AtomicState, perturbation: &AtomicState, eta: f64) -> Result<AtomicState> {
    let kept = (1.0 - eta * eta).max(0.0).sqrt();
    nominal
        .scaled(C64::new(kept, 0.0))
        .add(&perturbation.scaled(C64::new(eta, 0.0)))
}

fn mix_polarization(nominal: &PolarizationState, eta: f64) -> PolarizationState {
    let orth = nominal.orthogonal();
    let kept = (1.0 - eta * eta).max(0.0).sqrt();
    PolarizationState::new(
        nominal.amp_h * kept + orth.amp_h * eta,
        nominal.amp_v * kept + orth.amp_v * eta,
    )
}

/// Evaluate `scheme` across `steps` equally spaced values of `parameter`
/// over `range`, holding everything else nominal. Reports the summed-herald
/// efficiency band over the reference inputs, the validity residual, and the
/// worst-case fidelity of the mapped inputs against the nominal scheme's
/// outputs.
pub fn sweep(
    scheme: &Scheme,
    parameter: SweepParameter,
    range: (f64, f64),
    steps: usize,
) -> Result<SweepResult> {
    if steps < 2 {
        return Err(Error::TooFewSteps);
    }

    let nominal_matrices = scheme.matrices()?;
    // nominal images per (herald, input); zero images are skipped in the
    // fidelity minimum (there is nothing to compare against)
    let nominal_images: Vec<Vec<Option<AtomicState>>> = nominal_matrices
        .iter()
        .map(|(_, m)| {
            InputLabel::ALL
                .iter()
                .map(|label| m.apply(&label.to_polarization()).normalized().ok())
                .collect()
        })
        .collect();

    let psi_perturbation = match parameter {
        SweepParameter::PsiDImpurity => Some(orthogonal_perturbation(&scheme.psi_d)?),
        _ => None,
    };

    let mut samples = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let value = range.0 + t * (range.1 - range.0);

        // angle sweeps and psi_d impurity rebuild the matrices; input
        // impurity keeps the nominal ones and perturbs the inputs instead
        let matrices: Vec<(HeraldIndex, TransferMatrix)> = match parameter {
            SweepParameter::InputImpurity => nominal_matrices.clone(),
            SweepParameter::PsiDImpurity => {
                let psi = mix(&scheme.psi_d, psi_perturbation.as_ref().unwrap(), value)?;
                let mut varied = scheme.clone();
                varied.psi_d = psi;
                varied.matrices()?
            }
            _ => {
                let mut varied = scheme.clone();
                match parameter {
                    SweepParameter::Alpha => {
                        varied.geometry = Geometry::new(value, scheme.geometry.alpha_prime())?;
                    }
                    SweepParameter::AlphaPrime => {
                        varied.geometry = Geometry::new(scheme.geometry.alpha(), value)?;
                    }
                    SweepParameter::ThetaPrime => varied.theta_prime = value,
                    SweepParameter::PhiPrime => varied.phi_prime = value,
                    _ => unreachable!(),
                }
                varied.matrices()?
            }
        };

        let gram_deviation = matrices
            .iter()
            .map(|(_, m)| m.gram_deviation())
            .fold(0.0, f64::max);

        let mut eff_min = f64::INFINITY;
        let mut eff_max = f64::NEG_INFINITY;
        let mut worst_fidelity = f64::INFINITY;
        for (k, label) in InputLabel::ALL.iter().enumerate() {
            let input = match parameter {
                SweepParameter::InputImpurity => mix_polarization(&label.to_polarization(), value),
                _ => label.to_polarization(),
            };
            let mut eps_total = 0.0;
            for (h, (_, m)) in matrices.iter().enumerate() {
                let out = m.apply(&input);
                eps_total += out.norm_sq() / crate::process::MAX_STORED_NORM_SQ;
                if let Some(reference) = &nominal_images[h][k] {
                    let fid = if out.is_zero(1e-300) {
                        0.0
                    } else {
                        fidelity(&out, reference)?
                    };
                    worst_fidelity = worst_fidelity.min(fid);
                }
            }
            eff_min = eff_min.min(eps_total);
            eff_max = eff_max.max(eps_total);
        }
        if !worst_fidelity.is_finite() {
            worst_fidelity = 0.0;
        }

        samples.push(SweepSample {
            parameter_value: value,
            efficiency_min: eff_min,
            efficiency_max: eff_max,
            gram_deviation,
            worst_fidelity,
        });
    }

    Ok(SweepResult { parameter, samples })
}
