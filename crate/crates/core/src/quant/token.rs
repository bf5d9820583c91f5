use crate::error::{Error, Result};

/// `L^digits`, or `None` on `u64` overflow.
pub fn vocab_size(levels: u32, digits: usize) -> Option<u64> {
    let mut v: u64 = 1;
    for _ in 0..digits {
        v = v.checked_mul(levels as u64)?;
    }
    Some(v)
}

/// `c = sum_g q_g * L^g`; group 0 is the least significant digit.
pub fn compose_token(indices: &[u32], levels: u32) -> Result<u64> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("levels must be >= 2, got {levels}")));
    }
    let mut c: u64 = 0;
    for (g, &q) in indices.iter().enumerate().rev() {
        if q >= levels {
            return Err(Error::InvalidArgument(format!(
                "group {g} index {q} out of range for {levels} levels"
            )));
        }
        c = c
            .checked_mul(levels as u64)
            .and_then(|c| c.checked_add(q as u64))
            .ok_or_else(|| Error::InvalidArgument("composite token overflows u64".into()))?;
    }
    Ok(c)
}

/// Inverse of [`compose_token`]: `q_g = floor(c / L^g) mod L`.
pub fn decompose_token(c: u64, levels: u32, groups: usize) -> Result<Vec<u32>> {
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("levels must be >= 2, got {levels}")));
    }
    if vocab_size(levels, groups).is_some_and(|v| c >= v) {
        return Err(Error::InvalidArgument(format!(
            "token {c} out of range for {levels}^{groups}"
        )));
    }
    let l = levels as u64;
    let mut rest = c;
    Ok((0..groups)
        .map(|_| {
            let q = (rest % l) as u32;
            rest /= l;
            q
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(compose_token(&[0, 0, 0], 8).unwrap(), 0);
        assert_eq!(compose_token(&[3, 0, 7], 8).unwrap(), 451);
        assert_eq!(compose_token(&[7, 7, 7], 8).unwrap(), 511);
        assert_eq!(decompose_token(451, 8, 3).unwrap(), vec![3, 0, 7]);
        assert_eq!(decompose_token(0, 8, 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn range_errors() {
        assert!(compose_token(&[8], 8).is_err());
        assert!(decompose_token(512, 8, 3).is_err());
    }

    #[test]
    fn exhaustive_small() {
        for l in 2..=10u32 {
            for g in 1..=6usize {
                let v = vocab_size(l, g).unwrap();
                if v > 1_000_000 {
                    continue;
                }
                for c in 0..v {
                    let q = decompose_token(c, l, g).unwrap();
                    // independent positional evaluation
                    let back: u64 = q.iter().rev().fold(0, |acc, &d| acc * l as u64 + d as u64);
                    assert_eq!(back, c);
                    if c % 97 == 0 {
                        assert_eq!(compose_token(&q, l).unwrap(), c);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn compose_decompose_inverse(l in 2u32..=16, digits in prop::collection::vec(0u32..16, 1..8)) {
            let digits: Vec<u32> = digits.into_iter().map(|d| d % l).collect();
            let c = compose_token(&digits, l).unwrap();
            prop_assert!(c < vocab_size(l, digits.len()).unwrap());
            prop_assert_eq!(decompose_token(c, l, digits.len()).unwrap(), digits);
        }
    }
}
