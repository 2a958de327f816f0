//! Clebsch-Gordan coefficients and Wigner 6j symbols for half-integer
//! arguments, via the Racah sums. Arguments are passed as twice their value.

use crate::error::{Error, Result};

fn factorial(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn is_valid_pair(two_j: i32, two_m: i32) -> bool {
    two_j >= 0 && two_m.abs() <= two_j && (two_j - two_m) % 2 == 0
}

fn triangle(a: i32, b: i32, c: i32) -> bool {
    c >= (a - b).abs() && c <= a + b && (a + b + c) % 2 == 0
}

/// `Delta(abc)` for doubled arguments.
fn delta(a: i32, b: i32, c: i32) -> f64 {
    (factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2)
        / factorial((a + b + c) / 2 + 1))
        .sqrt()
}

fn check_half_integers(args: &[i32]) -> Result<()> {
    if args.iter().any(|&a| a < 0) {
        return Err(Error::param("angular momentum", format!("negative value in {args:?}")));
    }
    Ok(())
}

/// `<j1 m1; j2 m2 | J M>` with doubled arguments.
pub fn clebsch_gordan(two_j1: i32, two_m1: i32, two_j2: i32, two_m2: i32, two_j: i32, two_m: i32) -> Result<f64> {
    check_half_integers(&[two_j1, two_j2, two_j])?;
    if ![(two_j1, two_m1), (two_j2, two_m2), (two_j, two_m)]
        .iter()
        .all(|&(j, m)| (j - m) % 2 == 0)
    {
        return Err(Error::param("angular momentum", "j and m must both be integer or both half-integer"));
    }
    if two_m1 + two_m2 != two_m
        || !triangle(two_j1, two_j2, two_j)
        || !is_valid_pair(two_j1, two_m1)
        || !is_valid_pair(two_j2, two_m2)
        || !is_valid_pair(two_j, two_m)
    {
        return Ok(0.0);
    }
    let (j1, j2, j) = (two_j1, two_j2, two_j);
    let (m1, m2, m) = (two_m1, two_m2, two_m);
    let pre = (f64::from(j + 1)
        * factorial((j1 + j2 - j) / 2)
        * factorial((j1 - j2 + j) / 2)
        * factorial((-j1 + j2 + j) / 2)
        / factorial((j1 + j2 + j) / 2 + 1))
        .sqrt()
        * (factorial((j + m) / 2)
            * factorial((j - m) / 2)
            * factorial((j1 - m1) / 2)
            * factorial((j1 + m1) / 2)
            * factorial((j2 - m2) / 2)
            * factorial((j2 + m2) / 2))
            .sqrt();
    let k_min = 0.max((j2 - j - m1) / 2).max((j1 - j + m2) / 2);
    let k_max = ((j1 + j2 - j) / 2).min((j1 - m1) / 2).min((j2 + m2) / 2);
    let sum: f64 = (k_min..=k_max)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / (factorial(k)
                * factorial((j1 + j2 - j) / 2 - k)
                * factorial((j1 - m1) / 2 - k)
                * factorial((j2 + m2) / 2 - k)
                * factorial((j - j2 + m1) / 2 + k)
                * factorial((j - j1 - m2) / 2 + k))
        })
        .sum();
    Ok(pre * sum)
}

/// `{j1 j2 j3; j4 j5 j6}` with doubled arguments.
pub fn wigner_6j(j1: i32, j2: i32, j3: i32, j4: i32, j5: i32, j6: i32) -> Result<f64> {
    check_half_integers(&[j1, j2, j3, j4, j5, j6])?;
    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if !triads.iter().all(|&(a, b, c)| triangle(a, b, c)) {
        return Ok(0.0);
    }
    let pre: f64 = triads.iter().map(|&(a, b, c)| delta(a, b, c)).product();
    let sums = triads.map(|(a, b, c)| (a + b + c) / 2);
    let tops = [(j1 + j2 + j4 + j5) / 2, (j2 + j3 + j5 + j6) / 2, (j3 + j1 + j6 + j4) / 2];
    let t_min = *sums.iter().max().unwrap_or(&0);
    let t_max = *tops.iter().min().unwrap_or(&0);
    let sum: f64 = (t_min..=t_max)
        .map(|t| {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            let denom: f64 = sums.iter().map(|&s| factorial(t - s)).product::<f64>()
                * tops.iter().map(|&u| factorial(u - t)).product::<f64>();
            sign * factorial(t + 1) / denom
        })
        .sum();
    Ok(pre * sum)
}
