//! SI vector types, physical constants and unit-suffixed quantity parsing.
//!
//! Every public interface of the crate works in SI base units. Human-facing
//! inputs (scenario files, CLI flags) carry explicit unit suffixes such as
//! `"622.56um"`, `"6mm_s"` or `"14.95 mT"` and are converted here.

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Physical dimension of a unit-suffixed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Speed,
    Time,
    FluxDensity,
    Magnetization,
    Modulus,
    Mass,
    Density,
    Viscosity,
    Acceleration,
    Frequency,
    Stiffness,
    Volume,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Length => &[("m", 1.0), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6), ("cm", 1e-2)],
            Dimension::Speed => &[
                ("m/s", 1.0),
                ("m_s", 1.0),
                ("mm/s", 1e-3),
                ("mm_s", 1e-3),
                ("um/s", 1e-6),
                ("um_s", 1e-6),
                ("cm/s", 1e-2),
                ("cm_s", 1e-2),
            ],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6)],
            Dimension::FluxDensity => &[("T", 1.0), ("mT", 1e-3), ("uT", 1e-6)],
            Dimension::Magnetization => &[("A/m", 1.0), ("kA/m", 1e3), ("MA/m", 1e6)],
            Dimension::Modulus => &[("Pa", 1.0), ("kPa", 1e3), ("MPa", 1e6), ("GPa", 1e9)],
            Dimension::Mass => &[("kg", 1.0), ("g", 1e-3), ("mg", 1e-6), ("ug", 1e-9)],
            Dimension::Density => &[("kg/m3", 1.0), ("kg/m^3", 1.0), ("g/cm3", 1e3)],
            Dimension::Viscosity => &[("Pa*s", 1.0), ("Pa.s", 1.0), ("mPa*s", 1e-3), ("mPa.s", 1e-3)],
            Dimension::Acceleration => &[("m/s2", 1.0), ("m/s^2", 1.0), ("mm/s2", 1e-3), ("mm/s^2", 1e-3)],
            Dimension::Frequency => &[("rad/s", 1.0), ("Hz", 2.0 * std::f64::consts::PI)],
            Dimension::Stiffness => &[("N/m", 1.0)],
            Dimension::Volume => &[("m3", 1.0), ("mm3", 1e-9), ("um3", 1e-18)],
        }
    }

    /// Canonical SI suffix used when writing resolved values back out.
    pub fn si_suffix(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Speed => "m/s",
            Dimension::Time => "s",
            Dimension::FluxDensity => "T",
            Dimension::Magnetization => "A/m",
            Dimension::Modulus => "Pa",
            Dimension::Mass => "kg",
            Dimension::Density => "kg/m3",
            Dimension::Viscosity => "Pa*s",
            Dimension::Acceleration => "m/s2",
            Dimension::Frequency => "rad/s",
            Dimension::Stiffness => "N/m",
            Dimension::Volume => "m3",
        }
    }
}

/// Parses `"<number><unit>"` (optional whitespace in between) into SI.
///
/// ```
/// use magworm::units::{parse_quantity, Dimension};
/// let d = parse_quantity("622.56um", Dimension::Length).unwrap();
/// assert!((d - 622.56e-6).abs() < 1e-18);
/// assert!(parse_quantity("15", Dimension::Length).is_err());
/// ```
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = number_prefix_len(text);
    let (number, unit) = text.split_at(split);
    let value: f64 = number
        .parse()
        .map_err(|_| Error::Unit(format!("'{text}' does not start with a number")))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(Error::Unit(format!(
            "'{text}' is missing a unit suffix (expected one of {})",
            unit_list(dim)
        )));
    }
    let factor = dim
        .units()
        .iter()
        .find(|(suffix, _)| *suffix == unit)
        .map(|(_, f)| *f)
        .ok_or_else(|| {
            Error::Unit(format!(
                "unknown unit '{unit}' in '{text}' (expected one of {})",
                unit_list(dim)
            ))
        })?;
    if !value.is_finite() {
        return Err(Error::Unit(format!("'{text}' is not finite")));
    }
    // Powers of ten shift the decimal exponent so "38mg" parses to exactly 38e-6.
    let exp = factor.log10().round();
    if 10f64.powi(exp as i32) == factor {
        let (mantissa, e0) = match number.find(['e', 'E']) {
            Some(k) => (&number[..k], number[k + 1..].parse::<i32>().unwrap_or(0)),
            None => (number, 0),
        };
        if let Ok(v) = format!("{mantissa}e{}", e0 + exp as i32).parse::<f64>() {
            return Ok(v);
        }
    }
    Ok(value * factor)
}

/// Formats an SI value with its canonical suffix; re-parses exactly.
pub fn format_si(value: f64, dim: Dimension) -> String {
    format!("{value:?} {}", dim.si_suffix())
}

fn unit_list(dim: Dimension) -> String {
    dim.units().iter().map(|(s, _)| *s).collect::<Vec<_>>().join(", ")
}

fn number_prefix_len(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut end = 0;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let ok = c.is_ascii_digit()
            || c == b'.'
            || ((c == b'+' || c == b'-') && (i == 0 || matches!(bytes[i - 1], b'e' | b'E')))
            || ((c == b'e' || c == b'E')
                && i > 0
                && bytes.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+'));
        if !ok {
            break;
        }
        i += 1;
        end = i;
    }
    end
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Mat3 {
    let c = from.dot(to);
    let v = from.cross(to);
    if c < -1.0 + 1e-12 {
        // Antiparallel: rotate by pi about any axis orthogonal to `from`.
        let axis = any_orthogonal(from);
        return Mat3::identity() * -1.0 + 2.0 * axis * axis.transpose();
    }
    let vx = skew(&v);
    Mat3::identity() + vx + vx * vx * (1.0 / (1.0 + c))
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let trial = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&trial).normalize()
}
