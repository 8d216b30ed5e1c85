//! Publication dates with explicit precision.
//!
//! Corpus metadata carries dates as `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
//! A [`PublishDate`] keeps whichever parts were present so that month-less
//! values can be excluded from monthly aggregation instead of being binned.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar date whose month and day may be unknown.
///
/// Ordering is chronological, with a less precise value sorting before any
/// more precise value in the same year (or month).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublishDate {
    year: i32,
    month: Option<u32>,
    day: Option<u32>,
}

/// A calendar month, used as the bucket key for time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid publish date {0:?}")]
pub struct InvalidDate(pub String);

impl PublishDate {
    pub fn year_only(year: i32) -> Result<Self, InvalidDate> {
        Self::checked(year, None, None)
    }

    pub fn year_month(year: i32, month: u32) -> Result<Self, InvalidDate> {
        Self::checked(year, Some(month), None)
    }

    pub fn ymd(year: i32, month: u32, day: u32) -> Result<Self, InvalidDate> {
        Self::checked(year, Some(month), Some(day))
    }

    fn checked(year: i32, month: Option<u32>, day: Option<u32>) -> Result<Self, InvalidDate> {
        let valid = match (month, day) {
            (None, None) => (0..=9999).contains(&year),
            (Some(m), None) => (0..=9999).contains(&year) && (1..=12).contains(&m),
            (Some(m), Some(d)) => (0..=9999).contains(&year) && NaiveDate::from_ymd_opt(year, m, d).is_some(),
            (None, Some(_)) => false,
        };
        if valid {
            Ok(Self { year, month, day })
        } else {
            Err(InvalidDate(format!("{year:04}-{month:?}-{day:?}")))
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> Option<u32> {
        self.month
    }

    pub fn day(&self) -> Option<u32> {
        self.day
    }

    pub fn is_month_unknown(&self) -> bool {
        self.month.is_none()
    }

    pub fn is_day_unknown(&self) -> bool {
        self.day.is_none()
    }

    /// The month bucket, when the month is known.
    pub fn year_month_key(&self) -> Option<YearMonth> {
        self.month.map(|month| YearMonth { year: self.year, month })
    }
}

impl FromStr for PublishDate {
    type Err = InvalidDate;

    /// Accepts exactly `YYYY`, `YYYY-MM` and `YYYY-MM-DD` (surrounding
    /// whitespace is trimmed).
    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        let bad = || InvalidDate(raw.to_string());
        let parts: Vec<&str> = s.split('-').collect();
        let widths: &[usize] = match parts.len() {
            1 => &[4],
            2 => &[4, 2],
            3 => &[4, 2, 2],
            _ => return Err(bad()),
        };
        for (part, width) in parts.iter().zip(widths) {
            if part.len() != *width || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
        }
        let year: i32 = parts[0].parse().map_err(|_| bad())?;
        let month = parts.get(1).map(|m| m.parse::<u32>()).transpose().map_err(|_| bad())?;
        let day = parts.get(2).map(|d| d.parse::<u32>()).transpose().map_err(|_| bad())?;
        Self::checked(year, month, day).map_err(|_| bad())
    }
}

impl fmt::Display for PublishDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        if let Some(m) = self.month {
            write!(f, "-{m:02}")?;
        }
        if let Some(d) = self.day {
            write!(f, "-{d:02}")?;
        }
        Ok(())
    }
}

impl Serialize for PublishDate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PublishDate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        debug_assert!((1..=12).contains(&month));
        Self { year, month }
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = InvalidDate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let date: PublishDate = s.parse()?;
        match (date.month, date.day) {
            (Some(month), None) => Ok(Self { year: date.year, month }),
            _ => Err(InvalidDate(s.to_string())),
        }
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
