//! Small numeric helpers shared across modules.

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * ((n - j) as f64) / ((j + 1) as f64);
    }
    acc.round()
}

/// Binomial coefficients as exact integers, for combinatorial ranking.
pub fn binomial_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * ((n - j) as u128) / ((j + 1) as u128);
    }
    acc as u64
}
