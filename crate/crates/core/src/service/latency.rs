use std::collections::VecDeque;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

const WINDOW: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySnapshot {
    /// Requests measured since start, including those rolled out of the window.
    pub count: u64,
    /// Samples the quantiles below are computed from.
    pub window: usize,
    pub p50_micros: u64,
    pub p95_micros: u64,
    pub p99_micros: u64,
    pub max_micros: u64,
    pub mean_micros: f64,
}

/// Rolling window of the most recent server-side latencies.
#[derive(Debug, Default)]
pub struct LatencyWindow {
    inner: Mutex<(u64, VecDeque<u64>)>,
}

/// Nearest-rank quantile of sorted data.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl LatencyWindow {
    pub fn record(&self, micros: u64) {
        let mut g = self.inner.lock().expect("latency lock");
        g.0 += 1;
        if g.1.len() == WINDOW {
            g.1.pop_front();
        }
        g.1.push_back(micros);
    }

    pub fn snapshot(&self) -> LatencySnapshot {
        let (count, mut v) = {
            let g = self.inner.lock().expect("latency lock");
            (g.0, g.1.iter().copied().collect::<Vec<u64>>())
        };
        v.sort_unstable();
        let mean = if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<u64>() as f64 / v.len() as f64
        };
        LatencySnapshot {
            count,
            window: v.len(),
            p50_micros: nearest_rank(&v, 0.50),
            p95_micros: nearest_rank(&v, 0.95),
            p99_micros: nearest_rank(&v, 0.99),
            max_micros: v.last().copied().unwrap_or(0),
            mean_micros: mean,
        }
    }
}
