//! Exact parsing of rational CLI arguments: `a/b`, decimals, and integers
//! all map to exact rationals (the coupling's exactness claims would not
//! survive a float round-trip of `q`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Pow, Zero};

pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in {s:?}"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in {s:?}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let whole = if whole.is_empty() { "0" } else { whole };
        let negative = whole.starts_with('-');
        let w: BigInt = whole.parse().map_err(|_| format!("bad decimal in {s:?}"))?;
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal fraction in {s:?}"));
        }
        let f: BigInt = frac.parse().expect("digits only");
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let magnitude = w.magnitude() * scale.magnitude() + f.magnitude();
        let num = BigInt::from_biguint(
            if negative {
                num_bigint::Sign::Minus
            } else {
                num_bigint::Sign::Plus
            },
            magnitude,
        );
        return Ok(BigRational::new(num, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("bad rational in {s:?}"))?;
    Ok(BigRational::from_integer(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_decimals_integers() {
        assert_eq!(parse_rational("1/10").unwrap(), rat(1, 10));
        assert_eq!(parse_rational("0.1").unwrap(), rat(1, 10));
        assert_eq!(parse_rational(".25").unwrap(), rat(1, 4));
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2e3").is_err());
    }
}
