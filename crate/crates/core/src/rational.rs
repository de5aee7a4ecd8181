//! Exact rational helpers: parsing command-line literals without passing
//! through binary floating point, ceilings, and conversions.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Parses `num/den`, an integer, or a decimal literal such as `0.6` or
/// `1.25e-3` into an exact rational. Decimal literals are read as decimal
/// fractions, so `0.1` is exactly 1/10.
pub fn parse_rational(input: &str) -> Result<BigRational> {
    let s = input.trim();
    if s.is_empty() {
        return Err(Error::parse("rational", input, "empty string"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::parse("rational", input, "bad numerator"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::parse("rational", input, "bad denominator"))?;
        if d.is_zero() {
            return Err(Error::parse("rational", input, "zero denominator"));
        }
        return Ok(BigRational::new(n, d));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|_| Error::parse("rational", input, "bad exponent"))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::parse("rational", input, "no digits"));
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(Error::parse("rational", input, "unexpected character"));
    }
    if exponent.unsigned_abs() > 10_000 {
        return Err(Error::parse("rational", input, "exponent out of range"));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().expect("digits checked above")
    };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Parses a strictly positive rational.
pub fn parse_positive(what: &'static str, input: &str) -> Result<BigRational> {
    let r = parse_rational(input).map_err(|e| match e {
        Error::Parse { input, reason, .. } => Error::Parse {
            what,
            input,
            reason,
        },
        other => other,
    })?;
    if !r.is_positive() {
        return Err(Error::Domain(format!(
            "{what} must be positive, got {input}"
        )));
    }
    Ok(r)
}

/// Exact ceiling of a nonnegative rational as a natural number.
pub fn ceil_nat(r: &BigRational) -> BigUint {
    let c = r.ceil().to_integer();
    c.to_biguint().unwrap_or_default()
}

/// Exact rational value of a finite binary64.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Nearest binary64 to a rational (may lose precision; never used for bounds).
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a ratio of leading bits for huge numerators/denominators.
        let n = r.numer().abs();
        let d = r.denom().clone();
        let shift = n.bits().max(d.bits()).saturating_sub(60);
        let nf = (&n >> shift).to_f64().unwrap_or(f64::INFINITY);
        let df = (&d >> shift).to_f64().unwrap_or(f64::INFINITY);
        let v = nf / df;
        if r.is_negative() {
            -v
        } else {
            v
        }
    })
}

/// Rounds a nonnegative real up to the grid `1/granularity`, exactly:
/// the result is the least `k/granularity ≥ x`.
pub fn ceil_to_grid(x: f64, granularity: u64) -> BigRational {
    let exact = from_f64(x.abs());
    let g = BigInt::from(granularity);
    let k = (exact * BigRational::from_integer(g.clone()))
        .ceil()
        .to_integer();
    BigRational::new(k, g)
}

/// Renders a rational as `num/den`, or as a bare integer when den = 1.
pub fn display(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Integer power of a rational with a natural exponent.
pub fn pow(r: &BigRational, exp: u32) -> BigRational {
    num_traits::pow(r.clone(), exp as usize)
}

/// Number of decimal digits of a natural number (0 has one digit).
pub fn decimal_digits(n: &BigUint) -> u64 {
    if n.is_zero() {
        return 1;
    }
    // bits·log10(2) brackets the digit count within one; settle exactly.
    let approx = ((n.bits() - 1) as f64 * std::f64::consts::LOG10_2).floor() as u64 + 1;
    let ten = BigUint::from(10u32);
    let lower = num_traits::pow(ten.clone(), (approx - 1) as usize);
    if n < &lower {
        approx - 1
    } else if n >= &(&lower * &ten) {
        approx + 1
    } else {
        approx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_decimals_and_exponents() {
        assert_eq!(parse_rational("3/5").unwrap(), q(3, 5));
        assert_eq!(parse_rational("0.6").unwrap(), q(3, 5));
        assert_eq!(parse_rational("8").unwrap(), q(8, 1));
        assert_eq!(parse_rational("1.25e-3").unwrap(), q(1, 800));
        assert_eq!(parse_rational("-.5").unwrap(), q(-1, 2));
        assert_eq!(parse_rational("2E2").unwrap(), q(200, 1));
        assert_eq!(parse_rational("0.1").unwrap(), q(1, 10));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_rational("").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
        assert!(matches!(
            parse_positive("epsilon", "0"),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ceilings_are_exact() {
        assert_eq!(ceil_nat(&q(2048, 9)), BigUint::from(228u32));
        assert_eq!(ceil_nat(&q(8, 1)), BigUint::from(8u32));
        assert_eq!(ceil_to_grid(0.5, 1_000_000_000_000), q(1, 2));
        let b = ceil_to_grid(std::f64::consts::SQRT_2, 1_000_000_000_000);
        assert!(to_f64(&b) >= std::f64::consts::SQRT_2);
        assert!(to_f64(&b) - std::f64::consts::SQRT_2 <= 1e-12);
    }

    #[test]
    fn digit_counts() {
        assert_eq!(decimal_digits(&BigUint::from(0u32)), 1);
        assert_eq!(decimal_digits(&BigUint::from(9u32)), 1);
        assert_eq!(decimal_digits(&BigUint::from(10u32)), 2);
        assert_eq!(decimal_digits(&BigUint::from(218452u32)), 6);
        let big = num_traits::pow(BigUint::from(10u32), 500);
        assert_eq!(decimal_digits(&big), 501);
        assert_eq!(decimal_digits(&(big - 1u32)), 500);
    }
}
