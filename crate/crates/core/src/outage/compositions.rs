//! Weak compositions: vectors of non-negative integers with a fixed sum.

use crate::error::{Error, Result};

/// Largest number of compositions [`weak_compositions`] will enumerate.
pub const COMPOSITION_LIMIT: u128 = 10_000_000;

/// Binomial coefficient as `u128`, saturating on overflow.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of weak compositions of `total` into `parts` parts.
pub fn composition_count(total: u32, parts: usize) -> u128 {
    match (total, parts) {
        (0, 0) => 1,
        (_, 0) => 0,
        _ => binomial(total as u64 + parts as u64 - 1, parts as u64 - 1),
    }
}

/// Enumerates every `ℓ ∈ ℕ^parts` with `Σℓ = total`, each exactly once, in
/// reverse lexicographic order (all mass on the first part first).
pub fn weak_compositions(total: u32, parts: usize) -> Result<WeakCompositions> {
    let count = composition_count(total, parts);
    if count > COMPOSITION_LIMIT {
        return Err(Error::ComplexityGuard {
            count,
            limit: COMPOSITION_LIMIT,
        });
    }
    let current = if count == 0 {
        None
    } else {
        let mut v = vec![0u32; parts];
        if let Some(first) = v.first_mut() {
            *first = total;
        }
        Some(v)
    };
    Ok(WeakCompositions { current })
}

#[derive(Debug, Clone)]
pub struct WeakCompositions {
    current: Option<Vec<u32>>,
}

impl Iterator for WeakCompositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let out = self.current.take()?;
        let parts = out.len();
        // Move one unit from the last non-zero part before the final slot to
        // its right neighbour, gathering everything behind it there.
        if parts >= 2 {
            if let Some(i) = (0..parts - 1).rev().find(|&i| out[i] > 0) {
                let mut v = out.clone();
                let tail: u32 = v[i + 1..].iter().sum();
                v[i] -= 1;
                for x in &mut v[i + 1..] {
                    *x = 0;
                }
                v[i + 1] = tail + 1;
                self.current = Some(v);
            }
        }
        Some(out)
    }
}
