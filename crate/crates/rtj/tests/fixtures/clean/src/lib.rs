//! Running tallies.

pub struct Tally {
    counts: Vec<u64>,
}

impl Tally {
    pub fn with_buckets(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn record(&mut self, bucket: usize) -> bool {
        match self.counts.get_mut(bucket) {
            Some(c) => {
                *c += 1;
                true
            }
            None => false,
        }
    }

    pub fn count(&self, bucket: usize) -> u64 {
        self.counts.get(bucket).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_is_rejected() {
        let mut t = Tally::with_buckets(2);
        assert!(!t.record(5));
        assert_eq!(t.total(), 0);
    }
}
