use std::ops::AddAssign;
use std::time::Duration;

/// Bytes in one reported megabyte.
pub const BYTES_PER_MB: f64 = 1024.0 * 1024.0;

/// Per-query cost accounting.
///
/// I/O is modelled, never timed: every range read adds one seek and
/// `pages × page_size` bytes. The two durations cover in-memory work only.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostCounters {
    pub disk_seeks: u64,
    pub bytes_read: u64,
    pub alg_time: Duration,
    pub fp_rem_time: Duration,
}

impl CostCounters {
    pub fn data_read_mb(&self) -> f64 {
        self.bytes_read as f64 / BYTES_PER_MB
    }

    pub fn alg_time_ms(&self) -> f64 {
        self.alg_time.as_secs_f64() * 1e3
    }

    pub fn fp_rem_time_ms(&self) -> f64 {
        self.fp_rem_time.as_secs_f64() * 1e3
    }
}

impl AddAssign for CostCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.disk_seeks += rhs.disk_seeks;
        self.bytes_read += rhs.bytes_read;
        self.alg_time += rhs.alg_time;
        self.fp_rem_time += rhs.fp_rem_time;
    }
}
