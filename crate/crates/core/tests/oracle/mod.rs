//! Independent reference implementations used only by tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `erf(x)` by its Maclaurin series; accurate for `|x| <= 3`.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// `erfc(x)` for `x > 0` by the Laplace continued fraction, evaluated bottom-up.
pub fn erfc_continued_fraction(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut f = x;
    for k in (1..400).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    (-x * x).exp() / PI.sqrt() / f
}

/// Standard normal CDF from the two expansions above.
pub fn phi(z: f64) -> f64 {
    let x = z.abs() / 2f64.sqrt();
    let upper_tail = if x <= 2.5 {
        0.5 * (1.0 - erf_series(x))
    } else {
        0.5 * erfc_continued_fraction(x)
    };
    if z >= 0.0 {
        1.0 - upper_tail
    } else {
        upper_tail
    }
}

/// `(z, Phi(z))` rows of the high-precision grid shipped with the tests.
pub fn cdf_grid() -> Vec<(f64, f64)> {
    let text = include_str!("../data/normal_cdf_grid.txt");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut f = l.split('\t');
            let z = f.next().unwrap().trim().parse().unwrap();
            let p = f.next().unwrap().trim().parse().unwrap();
            (z, p)
        })
        .collect()
}

/// `1 - a·b` over `f32` unit vectors, four interleaved `f64` lanes combined
/// pairwise. Written independently of the library kernel but with the same
/// summation order so results compare bit for bit.
pub fn lane_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut l = [0.0f64; 4];
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        l[k % 4] += f64::from(*x) * f64::from(*y);
    }
    1.0 - ((l[0] + l[1]) + (l[2] + l[3]))
}

/// Every monotone corner-to-corner path cost through a `rows x cols` grid,
/// each summed left to right from 0.
pub fn all_path_costs(cell: &dyn Fn(usize, usize) -> f64, rows: usize, cols: usize) -> Vec<f64> {
    fn walk(
        cell: &dyn Fn(usize, usize) -> f64,
        r: usize,
        c: usize,
        rows: usize,
        cols: usize,
        acc: f64,
        out: &mut Vec<f64>,
    ) {
        let acc = acc + cell(r, c);
        if (r, c) == (rows - 1, cols - 1) {
            out.push(acc);
            return;
        }
        if r + 1 < rows && c + 1 < cols {
            walk(cell, r + 1, c + 1, rows, cols, acc, out);
        }
        if r + 1 < rows {
            walk(cell, r + 1, c, rows, cols, acc, out);
        }
        if c + 1 < cols {
            walk(cell, r, c + 1, rows, cols, acc, out);
        }
    }
    let mut out = Vec::new();
    walk(cell, 0, 0, rows, cols, 0.0, &mut out);
    out
}

/// Minimum-sum contiguous range by enumeration, sums accumulated left to
/// right from the range start; ties go to the earliest start, then the
/// shortest range.
pub fn brute_min_subarray(s: &[f64]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for a in 0..s.len() {
        let mut sum = 0.0;
        for (b, v) in s.iter().enumerate().skip(a) {
            sum += v;
            if sum < best.2 {
                best = (a, b, sum);
            }
        }
    }
    best
}

/// Harmonic mean of purity `100 - ned` and coverage.
pub fn m_score(ned: f64, cov: f64) -> f64 {
    let purity = 100.0 - ned;
    if purity + cov == 0.0 {
        0.0
    } else {
        2.0 * purity * cov / (purity + cov)
    }
}
