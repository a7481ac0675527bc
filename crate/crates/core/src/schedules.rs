//! Step-size rules.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    /// `a0`
    Constant,
    /// `a0 / (1 + decay * k)`
    InverseDecay,
    /// `a0 / (exp(c * t) * (1 + decay * k))`, shrinking with the outer DANE round `t`.
    DaneExpDecay,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "Constant",
            ScheduleKind::InverseDecay => "InverseDecay",
            ScheduleKind::DaneExpDecay => "DaneExpDecay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ScheduleKind::Constant, ScheduleKind::InverseDecay, ScheduleKind::DaneExpDecay]
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub a0: f64,
    pub decay: f64,
    pub c: f64,
}

impl Schedule {
    pub fn constant(a0: f64) -> Self {
        Schedule {
            kind: ScheduleKind::Constant,
            a0,
            decay: 0.0,
            c: 0.0,
        }
    }

    pub fn inverse_decay(a0: f64, decay: f64) -> Self {
        Schedule {
            kind: ScheduleKind::InverseDecay,
            a0,
            decay,
            c: 0.0,
        }
    }

    pub fn dane_exp_decay(a0: f64, decay: f64, c: f64) -> Self {
        Schedule {
            kind: ScheduleKind::DaneExpDecay,
            a0,
            decay,
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::config("a0", format!("must be finite and > 0, got {}", self.a0)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::config("decay", format!("must be finite and >= 0, got {}", self.decay)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::config("c", format!("must be finite and >= 0, got {}", self.c)));
        }
        Ok(())
    }

    /// Step size at inner iteration `k` (from 0) of outer round `t` (from 1).
    pub fn step_size(&self, k: u64, t: usize) -> f64 {
        debug_assert!(t >= 1, "outer rounds are numbered from 1");
        match self.kind {
            ScheduleKind::Constant => self.a0,
            ScheduleKind::InverseDecay => self.a0 / (1.0 + self.decay * k as f64),
            ScheduleKind::DaneExpDecay => self.a0 / ((self.c * t as f64).exp() * (1.0 + self.decay * k as f64)),
        }
    }
}
