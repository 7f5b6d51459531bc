//! Exact angular-momentum algebra: half-integer quantum numbers,
//! Clebsch-Gordan coefficients, Lande g-factors, and the fine-structure
//! manifolds of the Ca+ ion.
//!
//! All coupling amplitudes used by the absorption and emission operators
//! come from [`cgc`], evaluated in the Condon-Shortley phase convention.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;
use std::sync::LazyLock;

use crate::error::{Error, Result};

/// Half-integer quantum number stored as twice its value, so that j = 3/2
/// is `HalfInt::new(3)` and m = -2 is `HalfInt::from_int(-2)`. Keeping the
/// doubled integer avoids float equality hazards in selection rules.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct HalfInt {
    twice: i32,
}

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt { twice: 0 };
    pub const HALF: HalfInt = HalfInt { twice: 1 };
    pub const ONE: HalfInt = HalfInt { twice: 2 };

    /// Value from its doubled representation: `new(5)` is 5/2.
    pub const fn new(twice: i32) -> Self {
        HalfInt { twice }
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt { twice: 2 * value }
    }

    pub const fn twice(self) -> i32 {
        self.twice
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    pub const fn abs(self) -> Self {
        HalfInt {
            twice: self.twice.abs(),
        }
    }

    pub const fn is_negative(self) -> bool {
        self.twice < 0
    }

    /// True when both are integers or both are half-odd.
    pub const fn same_parity(self, other: Self) -> bool {
        (self.twice - other.twice) % 2 == 0
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt::new(self.twice + rhs.twice)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt::new(self.twice - rhs.twice)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt::new(-self.twice)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for HalfInt {
    type Err = Error;

    /// Accepts `"2"`, `"-2"`, `"3/2"`, `"-3/2"`, `"+1/2"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let err = || Error::ParseHalfInt(s.to_string());
        if let Some((num, den)) = t.split_once('/') {
            if den.trim() != "2" {
                return Err(err());
            }
            let n: i32 = num.trim().parse().map_err(|_| err())?;
            Ok(HalfInt::new(n))
        } else {
            let n: i32 = t.parse().map_err(|_| err())?;
            Ok(HalfInt::from_int(n))
        }
    }
}

/// Rejects malformed (j, m) pairs: negative j or mismatched parity. A
/// well-formed m outside [-j, +j] is not an error; it addresses a
/// nonexistent sublevel and the coupling amplitude to it is zero.
fn check_jm(name: &'static str, j: HalfInt, m: HalfInt) -> Result<()> {
    if j.is_negative() || !j.same_parity(m) {
        return Err(Error::InvalidQuantumNumbers { name, j, m });
    }
    Ok(())
}

fn triangle_ok(j1: HalfInt, j2: HalfInt, j3: HalfInt) -> bool {
    let (a, b, c) = (j1.twice(), j2.twice(), j3.twice());
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

const LN_FACTORIAL_LEN: usize = 256;

static LN_FACTORIAL: LazyLock<[f64; LN_FACTORIAL_LEN]> = LazyLock::new(|| {
    let mut table = [0.0; LN_FACTORIAL_LEN];
    for n in 1..LN_FACTORIAL_LEN {
        table[n] = table[n - 1] + (n as f64).ln();
    }
    table
});

/// ln(n!) where `t` is the doubled value; `t` must be even and nonnegative.
fn ln_fact_halved(t: i32) -> f64 {
    debug_assert!(t >= 0 && t % 2 == 0);
    LN_FACTORIAL[(t / 2) as usize]
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> in the Condon-Shortley
/// convention, from the Racah closed form with log-factorials.
///
/// Returns exactly 0 when M != m1 + m2 or when (j1, j2, J) fails the
/// triangle rule; rejects unphysical (j, m) pairs with a domain error.
pub fn cgc(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    check_jm("(j1, m1)", j1, m1)?;
    check_jm("(j2, m2)", j2, m2)?;
    check_jm("(J, M)", j, m)?;

    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j || !triangle_ok(j1, j2, j) {
        return Ok(0.0);
    }

    // All doubled quantities below are even, by the checks above.
    let (tj1, tm1) = (j1.twice(), m1.twice());
    let (tj2, tm2) = (j2.twice(), m2.twice());
    let (tj, tm) = (j.twice(), m.twice());

    // ln of the squared prefactor: (2J+1) * triangle coefficient * the six
    // (j +- m)! factors.
    let ln_pref = (f64::from(tj) + 1.0).ln()
        + ln_fact_halved(tj1 + tj2 - tj)
        + ln_fact_halved(tj1 - tj2 + tj)
        + ln_fact_halved(-tj1 + tj2 + tj)
        - ln_fact_halved(tj1 + tj2 + tj + 2)
        + ln_fact_halved(tj1 + tm1)
        + ln_fact_halved(tj1 - tm1)
        + ln_fact_halved(tj2 + tm2)
        + ln_fact_halved(tj2 - tm2)
        + ln_fact_halved(tj + tm)
        + ln_fact_halved(tj - tm);

    // Racah sum over k (doubled bounds, stepping by 2).
    let k_min = 0.max(tj2 - tj - tm1).max(tj1 + tm2 - tj);
    let k_max = (tj1 + tj2 - tj).min(tj1 - tm1).min(tj2 + tm2);

    let mut sum = 0.0;
    let mut tk = k_min;
    while tk <= k_max {
        let ln_den = ln_fact_halved(tk)
            + ln_fact_halved(tj1 + tj2 - tj - tk)
            + ln_fact_halved(tj1 - tm1 - tk)
            + ln_fact_halved(tj2 + tm2 - tk)
            + ln_fact_halved(tj - tj2 + tm1 + tk)
            + ln_fact_halved(tj - tj1 - tm2 + tk);
        let term = (0.5 * ln_pref - ln_den).exp();
        sum += if (tk / 2) % 2 == 0 { term } else { -term };
        tk += 2;
    }

    Ok(sum)
}

/// LS-coupling Lande factor g = 1 + [j(j+1) + s(s+1) - l(l+1)] / (2 j (j+1)).
///
/// Returns 0 for j = 0 (a single level has no Zeeman splitting).
pub fn lande_g(l: HalfInt, s: HalfInt, j: HalfInt) -> Result<f64> {
    if !triangle_ok(l, s, j) {
        return Err(Error::TriangleViolation {
            j1: l,
            j2: s,
            j3: j,
        });
    }
    if j == HalfInt::ZERO {
        return Ok(0.0);
    }
    let casimir = |x: HalfInt| {
        let v = x.as_f64();
        v * (v + 1.0)
    };
    Ok(1.0 + (casimir(j) + casimir(s) - casimir(l)) / (2.0 * casimir(j)))
}

/// One fine-structure level: a term label plus (l, s, j) and its Lande factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manifold {
    pub label: &'static str,
    pub l: HalfInt,
    pub s: HalfInt,
    pub j: HalfInt,
    pub g_lande: f64,
}

impl Manifold {
    pub fn new(label: &'static str, l: HalfInt, s: HalfInt, j: HalfInt) -> Result<Self> {
        let g_lande = lande_g(l, s, j)?;
        Ok(Manifold {
            label,
            l,
            s,
            j,
            g_lande,
        })
    }

    pub fn sublevel_count(&self) -> usize {
        (self.j.twice() + 1) as usize
    }

    /// Sublevels m = -j, -j+1, ..., +j in ascending order.
    pub fn sublevels(&self) -> impl Iterator<Item = HalfInt> {
        let tj = self.j.twice();
        (-tj..=tj).step_by(2).map(HalfInt::new)
    }

    /// Index of sublevel m in the ascending enumeration, if it exists.
    pub fn sublevel_index(&self, m: HalfInt) -> Option<usize> {
        let tj = self.j.twice();
        let tm = m.twice();
        if tm.abs() <= tj && (tj - tm) % 2 == 0 {
            Some(((tm + tj) / 2) as usize)
        } else {
            None
        }
    }

    pub fn holds(&self, m: HalfInt) -> bool {
        self.sublevel_index(m).is_some()
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label)
    }
}

/// The four Ca+ fine-structure manifolds relevant to the 854 nm / 393 nm
/// storage pipeline, plus the decay branching of P3/2.
pub mod ca40 {
    use super::{HalfInt, Manifold};

    /// P3/2 decay branching into S1/2.
    pub const P32_BRANCHING_S12: f64 = 0.94;
    /// P3/2 decay branching into D5/2.
    pub const P32_BRANCHING_D52: f64 = 0.06;
    /// Upper bound on the P3/2 decay branching into D3/2.
    pub const P32_BRANCHING_D32_BOUND: f64 = 0.01;

    fn build(label: &'static str, l: i32, tj: i32) -> Manifold {
        Manifold::new(label, HalfInt::from_int(l), HalfInt::HALF, HalfInt::new(tj))
            .expect("catalog manifolds are triangle-valid")
    }

    pub fn s12() -> Manifold {
        build("S1/2", 0, 1)
    }

    pub fn p32() -> Manifold {
        build("P3/2", 1, 3)
    }

    pub fn d52() -> Manifold {
        build("D5/2", 2, 5)
    }

    /// Included for completeness of the level scheme; no storage scheme uses it.
    pub fn d32() -> Manifold {
        build("D3/2", 2, 3)
    }
}

/// Electric-dipole transition amplitude C between a lower-manifold sublevel
/// and an upper-manifold sublevel: the Clebsch-Gordan coefficient
/// <j_low m_low; 1 q | j_up m_up> with q = m_up - m_low, or 0 for |q| > 1.
pub fn dipole_amplitude(
    lower: &Manifold,
    m_lower: HalfInt,
    upper: &Manifold,
    m_upper: HalfInt,
) -> Result<f64> {
    if (lower.j.twice() - upper.j.twice()).abs() > 2 {
        return Err(Error::NotDipoleCoupled {
            lower: lower.label,
            upper: upper.label,
        });
    }
    let q = m_upper - m_lower;
    if q.abs() > HalfInt::ONE {
        return Ok(0.0);
    }
    cgc(lower.j, m_lower, HalfInt::ONE, q, upper.j, m_upper)
}
