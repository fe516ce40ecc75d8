//! Radial sampling grids.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid minimum must be positive, got {0}")]
    NonPositiveMin(f64),
    #[error("grid maximum {max} must exceed minimum {min}")]
    EmptyRange { min: f64, max: f64 },
    #[error("grid needs at least 2 points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl RadialGrid {
    pub fn new(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Self, GridError> {
        if !(min > 0.0 && min.is_finite()) {
            return Err(GridError::NonPositiveMin(min));
        }
        if !(max >= min && max.is_finite()) {
            return Err(GridError::EmptyRange { min, max });
        }
        if count < 2 {
            return Err(GridError::TooFewPoints(count));
        }
        Ok(Self {
            min,
            max,
            count,
            spacing,
        })
    }

    /// Grid points; the endpoints are exactly `min` and `max`.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        let last = (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == n {
                    return self.max;
                }
                let s = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * s,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * s).exp(),
                }
            })
            .collect()
    }
}
