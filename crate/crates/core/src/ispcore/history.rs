use alloc::vec::Vec;

/// Global-loss history at solve events, with its exponential moving average.
///
/// `lambda = 2 / (window + 1)`; the first observation passes through.
#[derive(Debug, Clone, PartialEq)]
pub struct LossHistory {
    window: usize,
    raw: Vec<f64>,
    smoothed: Vec<f64>,
}

impl LossHistory {
    pub fn new(window: usize) -> Self {
        LossHistory {
            window: window.max(1),
            raw: Vec::new(),
            smoothed: Vec::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn lambda(&self) -> f64 {
        2.0 / (self.window as f64 + 1.0)
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn smoothed(&self) -> &[f64] {
        &self.smoothed
    }

    /// Latest smoothed value, the `f(x^tau)` every candidate is compared with.
    pub fn baseline(&self) -> Option<f64> {
        self.smoothed.last().copied()
    }

    /// Smoothed value `value` would get, without recording it.
    pub fn peek(&self, value: f64) -> f64 {
        match self.baseline() {
            None => value,
            // Exact when value == prev.
            Some(prev) => prev + self.lambda() * (value - prev),
        }
    }

    /// Records `value` and returns its smoothed counterpart.
    pub fn ema_smooth(&mut self, value: f64) -> f64 {
        let s = self.peek(value);
        self.raw.push(value);
        self.smoothed.push(s);
        s
    }
}
