//! Trap levels and the flattened state basis shared by the rate and dynamics code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of confined dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dims {
    One,
    Two,
}

impl Dims {
    pub fn count(self) -> usize {
        match self {
            Dims::One => 1,
            Dims::Two => 2,
        }
    }

    pub fn from_count(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dims::One),
            2 => Ok(Dims::Two),
            other => Err(Error::Domain(format!("dims must be 1 or 2, got {other}"))),
        }
    }
}

/// A trap eigenstate: `|n>` in 1D or `|n_x, n_y>` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    One(usize),
    Two(usize, usize),
}

impl Level {
    pub fn dims(self) -> Dims {
        match self {
            Level::One(_) => Dims::One,
            Level::Two(..) => Dims::Two,
        }
    }

    /// Total quantum number `n` or `n_x + n_y`.
    pub fn total(self) -> usize {
        match self {
            Level::One(n) => n,
            Level::Two(x, y) => x + y,
        }
    }

    pub fn axes(self) -> (usize, usize) {
        match self {
            Level::One(n) => (n, 0),
            Level::Two(x, y) => (x, y),
        }
    }

    /// Components as a list, for serialization as `[n]` or `[nx, ny]`.
    pub fn components(self) -> Vec<usize> {
        match self {
            Level::One(n) => vec![n],
            Level::Two(x, y) => vec![x, y],
        }
    }

    pub fn from_components(c: &[usize]) -> Result<Self> {
        match *c {
            [n] => Ok(Level::One(n)),
            [x, y] => Ok(Level::Two(x, y)),
            _ => Err(Error::Domain(format!(
                "a level has one or two components, got {}",
                c.len()
            ))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::One(n) => write!(f, "{n}"),
            Level::Two(x, y) => write!(f, "{x},{y}"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    /// Parses `"3"` or `"1,2"` (also accepts parentheses and spaces).
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts = trimmed
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Domain(format!("cannot parse trap level `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Level::from_components(&parts)
    }
}

/// Flattened basis of trap levels, truncated at `n_max` per axis.
///
/// 2D levels are flattened row-major in `(n_x, n_y)`: `index = n_x * (n_max + 1) + n_y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub dims: Dims,
    pub n_max: usize,
}

impl Basis {
    pub fn new(dims: Dims, n_max: usize) -> Self {
        Basis { dims, n_max }
    }

    pub fn per_axis(&self) -> usize {
        self.n_max + 1
    }

    pub fn len(&self) -> usize {
        match self.dims {
            Dims::One => self.per_axis(),
            Dims::Two => self.per_axis() * self.per_axis(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, level: Level) -> Result<usize> {
        let out = || Error::LevelOutOfRange(level.to_string());
        match (self.dims, level) {
            (Dims::One, Level::One(n)) if n <= self.n_max => Ok(n),
            (Dims::Two, Level::Two(x, y)) if x <= self.n_max && y <= self.n_max => {
                Ok(x * self.per_axis() + y)
            }
            (Dims::One, Level::One(_)) | (Dims::Two, Level::Two(..)) => Err(out()),
            _ => Err(Error::DimensionMismatch {
                expected: self.dims.count(),
                found: level.dims().count(),
            }),
        }
    }

    pub fn level(&self, index: usize) -> Level {
        match self.dims {
            Dims::One => Level::One(index),
            Dims::Two => Level::Two(index / self.per_axis(), index % self.per_axis()),
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        (0..self.len()).map(|i| self.level(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattening_is_row_major() {
        let b = Basis::new(Dims::Two, 3);
        assert_eq!(b.len(), 16);
        assert_eq!(b.index(Level::Two(1, 2)).unwrap(), 6);
        assert_eq!(b.level(6), Level::Two(1, 2));
        assert!(b.index(Level::Two(4, 0)).is_err());
        assert!(b.index(Level::One(0)).is_err());
    }

    #[test]
    fn parses_levels() {
        assert_eq!("3".parse::<Level>().unwrap(), Level::One(3));
        assert_eq!("(0, 1)".parse::<Level>().unwrap(), Level::Two(0, 1));
        assert!("a,b".parse::<Level>().is_err());
        assert!("1,2,3".parse::<Level>().is_err());
    }
}
