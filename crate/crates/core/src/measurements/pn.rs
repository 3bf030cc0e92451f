//! Maximal-length PN sequences from Fibonacci LFSRs.

use crate::error::{Error, Result};

pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 20;

/// Feedback taps of a primitive polynomial per register length. Taps are
/// stage numbers; `[5, 3]` is `x^5 + x^3 + 1`.
pub fn taps(order: u32) -> Result<&'static [u32]> {
    Ok(match order {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 6, 4, 1],
        13 => &[13, 4, 3, 1],
        14 => &[14, 5, 3, 1],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 6, 2, 1],
        20 => &[20, 17],
        _ => return Err(Error::UnsupportedOrder(order)),
    })
}

/// One period of the m-sequence of `order`, as +-1 chips (bit 1 maps to +1).
/// The register starts from all ones.
pub fn pn_sequence(order: u32) -> Result<Vec<f64>> {
    let taps = taps(order)?;
    let len = (1usize << order) - 1;
    let mut reg: u32 = (1 << order) - 1;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(if reg & 1 == 1 { 1.0 } else { -1.0 });
        let fb = taps.iter().fold(0, |acc, &t| acc ^ (reg >> (order - t))) & 1;
        reg = (reg >> 1) | (fb << (order - 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circular_autocorr(c: &[f64], lag: usize) -> f64 {
        (0..c.len()).map(|i| c[i] * c[(i + lag) % c.len()]).sum()
    }

    #[test]
    fn lengths_and_balance() {
        for order in MIN_ORDER..=MAX_ORDER {
            let c = pn_sequence(order).unwrap();
            assert_eq!(c.len(), (1 << order) - 1);
            assert_eq!(c.iter().sum::<f64>(), 1.0, "order {order}");
        }
        assert_eq!(pn_sequence(3).unwrap().len(), 7);
        assert_eq!(pn_sequence(10).unwrap().len(), 1023);
    }

    #[test]
    fn every_order_is_maximal() {
        // the register must not return to its start state before 2^n - 1 steps
        for order in MIN_ORDER..=MAX_ORDER {
            let t = taps(order).unwrap();
            let start: u32 = (1 << order) - 1;
            let mut reg = start;
            let mut period = 0usize;
            loop {
                let fb = t.iter().fold(0, |acc, &k| acc ^ (reg >> (order - k))) & 1;
                reg = (reg >> 1) | (fb << (order - 1));
                period += 1;
                if reg == start {
                    break;
                }
            }
            assert_eq!(period, (1 << order) - 1, "order {order}");
        }
    }

    #[test]
    fn two_valued_autocorrelation() {
        for order in [3, 7, 10] {
            let c = pn_sequence(order).unwrap();
            assert_eq!(circular_autocorr(&c, 0), c.len() as f64);
            for lag in 1..c.len() {
                assert_eq!(circular_autocorr(&c, lag), -1.0);
            }
        }
    }

    #[test]
    fn unsupported_orders() {
        assert!(matches!(pn_sequence(1), Err(Error::UnsupportedOrder(1))));
        assert!(pn_sequence(21).is_err());
    }
}
