//! Exact credit arithmetic in quarter units.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// An amount of credit stored as an integer number of quarters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quarters(pub i64);

impl Quarters {
    pub const ZERO: Quarters = Quarters(0);
    pub const HALF: Quarters = Quarters(2);
    pub const ONE: Quarters = Quarters(4);
    pub const ONE_AND_HALF: Quarters = Quarters(6);

    pub fn units(n: i64) -> Self {
        Quarters(4 * n)
    }

    pub fn halves(n: i64) -> Self {
        Quarters(2 * n)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 4.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Quarters {
    type Output = Quarters;
    fn add(self, rhs: Quarters) -> Quarters {
        Quarters(self.0 + rhs.0)
    }
}

impl Sub for Quarters {
    type Output = Quarters;
    fn sub(self, rhs: Quarters) -> Quarters {
        Quarters(self.0 - rhs.0)
    }
}

impl Neg for Quarters {
    type Output = Quarters;
    fn neg(self) -> Quarters {
        Quarters(-self.0)
    }
}

impl AddAssign for Quarters {
    fn add_assign(&mut self, rhs: Quarters) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Quarters {
    fn sub_assign(&mut self, rhs: Quarters) {
        self.0 -= rhs.0;
    }
}

impl Sum for Quarters {
    fn sum<I: Iterator<Item = Quarters>>(iter: I) -> Quarters {
        Quarters(iter.map(|q| q.0).sum())
    }
}

impl fmt::Display for Quarters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        match a % 4 {
            0 => write!(f, "{sign}{}", a / 4),
            2 => write!(f, "{sign}{}.5", a / 4),
            r => write!(f, "{sign}{}.{}", a / 4, r * 25),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display() {
        assert_eq!(Quarters::ONE_AND_HALF.to_string(), "1.5");
        assert_eq!(Quarters(1).to_string(), "0.25");
        assert_eq!(Quarters(-3).to_string(), "-0.75");
        assert_eq!(Quarters::units(3).to_string(), "3");
    }

    #[test]
    fn arithmetic() {
        let total: Quarters = [Quarters::ONE, Quarters::HALF].into_iter().sum();
        assert_eq!(total, Quarters::ONE_AND_HALF);
        assert_eq!(Quarters::ONE - Quarters::ONE_AND_HALF, -Quarters::HALF);
        assert!((-Quarters::HALF).is_negative());
    }
}
