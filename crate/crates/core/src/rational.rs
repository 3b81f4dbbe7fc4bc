//! Exact multiplicities.
//!
//! Flow values live in `Ratio<i128>`; geometry stays in `f64`. The string form
//! used by every file format is always `"num/den"`.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

pub type Mult = Ratio<i128>;

pub fn mult(n: i128, d: i128) -> Mult {
    Ratio::new(n, d)
}

pub fn int(n: i128) -> Mult {
    Ratio::from_integer(n)
}

pub fn to_f64(m: &Mult) -> f64 {
    *m.numer() as f64 / *m.denom() as f64
}

/// `|m|^alpha` evaluated in floating point.
pub fn abs_pow(m: &Mult, alpha: f64) -> f64 {
    to_f64(&m.abs()).powf(alpha)
}

/// `"num/den"`, or just `"num"` for integers.
pub fn format(m: &Mult) -> String {
    if m.is_integer() {
        m.numer().to_string()
    } else {
        format!("{}/{}", m.numer(), m.denom())
    }
}

/// Parses `"num/den"`, a bare integer, or a finite decimal such as `"0.37"`.
pub fn parse(s: &str) -> Result<Mult> {
    let bad = || Error::BadRational(s.to_string());
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        if fp.is_empty() || !fp.bytes().all(|c| c.is_ascii_digit()) || fp.len() > 30 {
            return Err(bad());
        }
        let neg = ip.starts_with('-');
        let ip_abs: i128 = ip.trim_start_matches(['-', '+']).parse().or_else(|e| {
            if ip.trim_start_matches(['-', '+']).is_empty() {
                Ok(0)
            } else {
                Err(e)
            }
        }).map_err(|_| bad())?;
        let den = 10i128.checked_pow(fp.len() as u32).ok_or_else(bad)?;
        let frac: i128 = fp.parse().map_err(|_| bad())?;
        let num = ip_abs.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        let r = Ratio::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let n: i128 = t.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

/// `eta * floor(m / eta)` for `eta > 0`.
pub fn floor_to(m: &Mult, eta: &Mult) -> Mult {
    let q = m / eta;
    let fl = q.numer().div_floor(q.denom());
    eta * Ratio::from_integer(fl)
}

pub fn is_zero(m: &Mult) -> bool {
    m.is_zero()
}

pub(crate) mod serde_mult {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mult, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(m))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mult, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}
