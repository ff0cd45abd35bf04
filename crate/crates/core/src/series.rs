use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordered observations with an optional calendar index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T> {
    values: Vec<T>,
    dates: Option<Vec<NaiveDate>>,
}

impl<T: Real> TimeSeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at position {i}"
            )));
        }
        Ok(Self {
            values,
            dates: None,
        })
    }

    pub fn with_dates(values: Vec<T>, dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "dates not strictly increasing at {}",
                dates[w + 1]
            )));
        }
        let mut s = Self::new(values)?;
        s.dates = Some(dates);
        Ok(s)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn date_at(&self, index: usize) -> Option<NaiveDate> {
        self.dates.as_ref().and_then(|d| d.get(index).copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Applies `f` to every value, keeping the calendar.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Self::new(values)?;
        out.dates = self.dates.clone();
        Ok(out)
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        self.map(|v| v * c)
    }
}
