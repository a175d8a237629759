use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Running sums of observed BEV box sizes for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub count: usize,
    pub sum_w: f64,
    pub sum_h: f64,
}

impl SizeStats {
    pub fn push(&mut self, w: f64, h: f64) {
        self.count += 1;
        self.sum_w += w;
        self.sum_h += h;
    }

    pub fn mean(&self) -> Option<(f64, f64)> {
        (self.count > 0).then(|| (self.sum_w / self.count as f64, self.sum_h / self.count as f64))
    }
}

/// Box size used for a class on the BEV plane: the mean of observed sizes once
/// `warmup` samples exist, the configured default before that.
pub fn canonical_bev_box(
    cls: &str,
    observed: &BTreeMap<String, SizeStats>,
    defaults: &BTreeMap<String, (f64, f64)>,
    fallback: (f64, f64),
    warmup: usize,
) -> (f64, f64) {
    if let Some(stats) = observed.get(cls) {
        if stats.count >= warmup.max(1) {
            if let Some(m) = stats.mean() {
                return m;
            }
        }
    }
    defaults.get(cls).copied().unwrap_or(fallback)
}

/// Stateful wrapper accumulating observations in stream order.
#[derive(Debug, Clone)]
pub struct BevBoxSizer {
    defaults: BTreeMap<String, (f64, f64)>,
    fallback: (f64, f64),
    warmup: usize,
    observed: BTreeMap<String, SizeStats>,
}

impl BevBoxSizer {
    pub fn new(defaults: BTreeMap<String, (f64, f64)>, fallback: (f64, f64), warmup: usize) -> Self {
        Self { defaults, fallback, warmup, observed: BTreeMap::new() }
    }

    pub fn observe(&mut self, cls: &str, w: f64, h: f64) {
        if w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite() {
            self.observed.entry(cls.to_string()).or_default().push(w, h);
        }
    }

    pub fn canonical(&self, cls: &str) -> (f64, f64) {
        canonical_bev_box(cls, &self.observed, &self.defaults, self.fallback, self.warmup)
    }

    pub fn observed(&self) -> &BTreeMap<String, SizeStats> {
        &self.observed
    }
}
