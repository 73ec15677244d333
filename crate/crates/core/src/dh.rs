//! Duistermaat–Heckman measures of the leaves.
//!
//! Each family pushes the Liouville measure of a leaf forward to a line, where
//! it becomes `2π` times Lebesgue measure on an interval:
//!
//! * `r3_sphere`, sphere of radius `r`: `z ∈ [−r, r]`, volume `4πr`
//! * `s3_class`, conjugacy class at angle `θ`: `y ∈ [−sin θ, sin θ]`, volume `4π sin θ`
//! * `h3_class`, sphere of radius `λ` in H³: `c ∈ [e^{−λ}, e^{λ}]`, volume `4π sinh λ`

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DhFamily {
    R3Sphere,
    S3Class,
    H3Class,
}

impl DhFamily {
    pub fn name(self) -> &'static str {
        match self {
            DhFamily::R3Sphere => "r3_sphere",
            DhFamily::S3Class => "s3_class",
            DhFamily::H3Class => "h3_class",
        }
    }

    fn check(self, p: f64) -> Result<()> {
        let ok = match self {
            DhFamily::R3Sphere | DhFamily::H3Class => p > 0.0 && p.is_finite(),
            DhFamily::S3Class => p > 0.0 && p < PI,
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!(
                "parameter {p} outside the open domain of {}",
                self.name()
            )))
        }
    }
}

impl fmt::Display for DhFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DhFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r3_sphere" | "r3" => Ok(DhFamily::R3Sphere),
            "s3_class" | "s3" => Ok(DhFamily::S3Class),
            "h3_class" | "h3" => Ok(DhFamily::H3Class),
            _ => Err(Error::Config(format!("unknown DH family '{s}'"))),
        }
    }
}

/// The DH measure of one non-degenerate leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhMeasure {
    pub family: DhFamily,
    pub parameter: f64,
    lo: f64,
    hi: f64,
}

impl DhMeasure {
    pub fn new(family: DhFamily, parameter: f64) -> Result<Self> {
        family.check(parameter)?;
        let (lo, hi) = match family {
            DhFamily::R3Sphere => (-parameter, parameter),
            DhFamily::S3Class => {
                let s = parameter.sin();
                (-s, s)
            }
            DhFamily::H3Class => ((-parameter).exp(), parameter.exp()),
        };
        Ok(DhMeasure {
            family,
            parameter,
            lo,
            hi,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn support_length(&self) -> f64 {
        match self.family {
            DhFamily::R3Sphere => 2.0 * self.parameter,
            DhFamily::S3Class => 2.0 * self.parameter.sin(),
            DhFamily::H3Class => 2.0 * self.parameter.sinh(),
        }
    }

    pub fn normalized_density(&self, point: f64) -> f64 {
        if point >= self.lo && point <= self.hi {
            1.0 / self.support_length()
        } else {
            0.0
        }
    }

    /// Total mass `2π × support length`.
    pub fn total_mass(&self) -> f64 {
        2.0 * PI * self.support_length()
    }

    /// Symplectic volume of the leaf.
    pub fn volume(&self) -> f64 {
        4.0 * PI
            * match self.family {
                DhFamily::R3Sphere => self.parameter,
                DhFamily::S3Class => self.parameter.sin(),
                DhFamily::H3Class => self.parameter.sinh(),
            }
    }

    pub fn cdf(&self, point: f64) -> f64 {
        ((point - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.lo + u * (self.hi - self.lo)
    }
}

/// A leaf is either an interval-supported DH measure or, for the degenerate
/// parameters (`r = 0`, `θ ∈ {0, π}`, `λ = 0`), a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Leaf {
    Interval(DhMeasure),
    Atom { location: f64, mass: f64 },
}

pub fn dh_leaf(family: DhFamily, parameter: f64) -> Result<Leaf> {
    let atom = match family {
        DhFamily::R3Sphere if parameter == 0.0 => Some(0.0),
        DhFamily::S3Class if parameter == 0.0 || parameter == PI => Some(0.0),
        DhFamily::H3Class if parameter == 0.0 => Some(1.0),
        _ => None,
    };
    match atom {
        Some(location) => Ok(Leaf::Atom {
            location,
            mass: 1.0,
        }),
        None => DhMeasure::new(family, parameter).map(Leaf::Interval),
    }
}

pub fn dh_support(family: DhFamily, parameter: f64) -> Result<(f64, f64)> {
    Ok(DhMeasure::new(family, parameter)?.support())
}

pub fn dh_normalized_density(family: DhFamily, parameter: f64, point: f64) -> Result<f64> {
    Ok(DhMeasure::new(family, parameter)?.normalized_density(point))
}

pub fn dh_volume(family: DhFamily, parameter: f64) -> Result<f64> {
    Ok(DhMeasure::new(family, parameter)?.volume())
}

pub fn dh_sample<R: Rng + ?Sized>(family: DhFamily, parameter: f64, rng: &mut R) -> Result<f64> {
    Ok(DhMeasure::new(family, parameter)?.sample(rng))
}
