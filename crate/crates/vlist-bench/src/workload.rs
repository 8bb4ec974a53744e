//! Workload specification and validation.

use std::str::FromStr;
use std::time::Duration;

use vlist::{IndexChoice, Key};

/// Operation mix in percent; must sum to 100. Updates are requested as one
/// number on the command line and split evenly between insert and remove.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mix {
    pub insert: u32,
    pub remove: u32,
    pub contains: u32,
    pub range: u32,
}

impl Mix {
    pub fn total(&self) -> u32 {
        self.insert + self.remove + self.contains + self.range
    }
}

impl FromStr for Mix {
    type Err = String;

    /// Parses "i:r:c:q" percentages.
    fn from_str(s: &str) -> Result<Mix, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("mix '{s}' is not of the form i:r:c:q"));
        }
        let mut v = [0u32; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|_| format!("mix component '{part}' is not a number"))?;
        }
        Ok(Mix { insert: v[0], remove: v[1], contains: v[2], range: v[3] })
    }
}

/// Everything a benchmark run needs.
#[derive(Clone, Debug)]
pub struct WorkloadSpec {
    pub threads: usize,
    pub duration: Duration,
    pub key_range: Key,
    pub mix: Mix,
    pub rq_size: Key,
    pub seed: u64,
    pub index: IndexChoice,
    /// Extra threads running nothing but range queries.
    pub rq_threads: usize,
    /// Pool size override; sized from the spec when absent.
    pub pool_slots: Option<usize>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.threads == 0 {
            return Err("at least one worker thread is required".into());
        }
        if self.mix.total() != 100 {
            return Err(format!("mix percentages sum to {}, not 100", self.mix.total()));
        }
        if self.key_range < 2 {
            return Err("key range must be at least 2".into());
        }
        if self.rq_size >= self.key_range {
            return Err(format!(
                "range-query size {} must be smaller than the key range {}",
                self.rq_size, self.key_range
            ));
        }
        if self.rq_size < 1 {
            return Err("range-query size must be at least 1".into());
        }
        Ok(())
    }

    pub fn total_threads(&self) -> usize {
        self.threads + self.rq_threads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> WorkloadSpec {
        WorkloadSpec {
            threads: 2,
            duration: Duration::from_millis(100),
            key_range: 1024,
            mix: Mix { insert: 25, remove: 25, contains: 40, range: 10 },
            rq_size: 64,
            seed: 1,
            index: IndexChoice::None,
            rq_threads: 0,
            pool_slots: None,
        }
    }

    #[test]
    fn valid_spec_passes() {
        spec().validate().unwrap();
    }

    #[test]
    fn mix_parses_and_checks_sum() {
        let mix: Mix = "25:25:40:10".parse().unwrap();
        assert_eq!(mix, Mix { insert: 25, remove: 25, contains: 40, range: 10 });
        assert!("25:25:40".parse::<Mix>().is_err());
        assert!("a:b:c:d".parse::<Mix>().is_err());
        let mut s = spec();
        s.mix = "50:50:50:50".parse().unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn oversized_range_queries_are_refused() {
        let mut s = spec();
        s.rq_size = 1024;
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_threads_are_refused() {
        let mut s = spec();
        s.threads = 0;
        assert!(s.validate().is_err());
    }
}
