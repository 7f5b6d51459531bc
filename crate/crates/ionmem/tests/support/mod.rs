//! Independent Clebsch-Gordan oracle built on the ladder-operator recursion
//! relations, for cross-checking the closed-form implementation. Works
//! entirely in doubled quantum numbers and shares no code with the library.

use std::collections::HashMap;

/// Matrix element factor of J-: J- |j, m> = c_minus(j, m) |j, m-1>.
fn c_minus(tj: i32, tm: i32) -> f64 {
    let j = f64::from(tj) / 2.0;
    let m = f64::from(tm) / 2.0;
    ((j + m) * (j - m + 1.0)).sqrt()
}

/// All coefficients <j1 m1; j2 m2 | J M> for one (j1, j2, J) triple, keyed
/// by (2m1, 2m2). Built top-down: the M = J row follows from annihilation
/// by J+ plus normalization and the sign convention that the coefficient
/// with m1 = j1 is positive; lower M rows follow by applying J-.
pub fn recursion_cgc_table(tj1: i32, tj2: i32, tj: i32) -> HashMap<(i32, i32), f64> {
    assert!(tj >= (tj1 - tj2).abs() && tj <= tj1 + tj2 && (tj1 + tj2 + tj) % 2 == 0);
    let mut table: HashMap<(i32, i32), f64> = HashMap::new();

    // --- top row, M = J -------------------------------------------------
    // 0 = c_minus(j1, m1) x(m1 - 1) + c_minus(j2, J + 1 - m1) x(m1)
    let m1_hi = tj1.min(tj + tj2); // = tj1 by the triangle rule
    let m1_lo = (-tj1).max(tj - tj2);
    let mut row: Vec<f64> = Vec::new();
    let mut value = 1.0;
    row.push(value);
    let mut tm1 = m1_hi;
    while tm1 > m1_lo {
        let tm2 = tj + 2 - tm1; // doubled m2 of the m2 - 1 term
        value *= -c_minus(tj2, tm2) / c_minus(tj1, tm1);
        row.push(value);
        tm1 -= 2;
    }
    let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if row[0] >= 0.0 { 1.0 } else { -1.0 };
    for (k, v) in row.iter().enumerate() {
        let tm1 = m1_hi - 2 * k as i32;
        table.insert((tm1, tj - tm1), sign * v / norm);
    }

    // --- descend in M: <m1 m2|J M-1> = [c-(j1, m1+1) <m1+1, m2|J M>
    //                  + c-(j2, m2+1) <m1, m2+1|J M>] / c-(J, M) ----------
    let mut tm = tj;
    while tm > -tj {
        let mut next: Vec<((i32, i32), f64)> = Vec::new();
        let lo = (-tj1).max(tm - 2 - tj2);
        let hi = tj1.min(tm - 2 + tj2);
        let mut t1 = lo;
        while t1 <= hi {
            let t2 = tm - 2 - t1;
            let up1 = table.get(&(t1 + 2, t2)).copied().unwrap_or(0.0);
            let up2 = table.get(&(t1, t2 + 2)).copied().unwrap_or(0.0);
            let v = (c_minus(tj1, t1 + 2) * up1 + c_minus(tj2, t2 + 2) * up2) / c_minus(tj, tm);
            next.push(((t1, t2), v));
            t1 += 2;
        }
        for (key, v) in next {
            table.insert(key, v);
        }
        tm -= 2;
    }

    table
}
