use std::collections::VecDeque;

use crate::error::{domain, Error, Result};

/// Time-stamped ring of scalar samples used to look up delayed values.
///
/// The first pushed sample fixes the start of the record; queries earlier
/// than that return the initial value (the signal is held constant before
/// it starts). Once older samples have been evicted, queries into the
/// evicted span fail with [`Error::HistoryUnderflow`].
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    capacity: usize,
    samples: VecDeque<(f64, f64)>,
    start: Option<(f64, f64)>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(4);
        Self {
            capacity,
            samples: VecDeque::with_capacity(capacity),
            start: None,
        }
    }

    /// Buffer sized to cover a lookback of `delay` seconds at step `dt`.
    pub fn for_delay(delay: f64, dt: f64) -> Self {
        Self::new((delay / dt).ceil() as usize + 4)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn earliest(&self) -> Option<f64> {
        self.samples.front().map(|s| s.0)
    }

    pub fn latest(&self) -> Option<(f64, f64)> {
        self.samples.back().copied()
    }

    /// Appends a sample, evicting the oldest one when full.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.back() {
            if !(t > last) {
                return Err(domain(format!("history timestamps must increase: {t} after {last}")));
            }
        }
        if self.start.is_none() {
            self.start = Some((t, value));
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, value));
        Ok(())
    }

    /// Value at `t_query` by cubic interpolation through the four samples
    /// nearest to the query (fewer near the start of the record).
    ///
    /// Exact sample times return the stored value bit-for-bit. The buffer never
    /// extrapolates past its newest sample.
    pub fn delayed_value(&self, t_query: f64) -> Result<f64> {
        let (t_start, v_start) = self
            .start
            .ok_or_else(|| domain("history buffer is empty"))?;
        if t_query < t_start {
            return Ok(v_start);
        }
        let (t_front, _) = self.samples[0];
        if t_query < t_front {
            return Err(Error::HistoryUnderflow { t_query, earliest: t_front });
        }
        let (t_back, _) = self.samples[self.samples.len() - 1];
        if t_query > t_back {
            return Err(Error::HistoryAhead { t_query, latest: t_back });
        }

        let n = self.samples.len();
        // First index whose timestamp exceeds the query.
        let j = self.samples.partition_point(|s| s.0 <= t_query);
        let (t_prev, v_prev) = self.samples[j - 1];
        if t_prev == t_query {
            return Ok(v_prev);
        }

        let width = n.min(4);
        let first = (j as isize - 2).clamp(0, (n - width) as isize) as usize;
        let mut acc = 0.0;
        for a in first..first + width {
            let (ta, va) = self.samples[a];
            let mut weight = 1.0;
            for b in first..first + width {
                if b != a {
                    let tb = self.samples[b].0;
                    weight *= (t_query - tb) / (ta - tb);
                }
            }
            acc += weight * va;
        }
        Ok(acc)
    }
}
