use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A binary word, written as a string of `0`/`1` characters on disk.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitWord(pub Vec<bool>);

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        BitWord(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn complement(&self) -> Self {
        BitWord(self.0.iter().map(|b| !b).collect())
    }

    /// Values at `positions`, in the order given.
    pub fn restrict(&self, positions: &[usize]) -> Self {
        BitWord(positions.iter().map(|&p| self.0[p]).collect())
    }

    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!(self.len(), other.len(), "length mismatch");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn xor(&self, other: &Self) -> Self {
        BitWord(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bad bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitWord)
    }
}

impl Serialize for BitWord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
