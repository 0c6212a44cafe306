//! Accumulators and the deterministic replication fan-out.

use rayon::prelude::*;

/// Replications per task. Fixed so the floating-point merge order never
/// depends on the thread count.
pub const REPS_PER_TASK: u64 = 64;

/// Running sums for a sample mean and its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.mean();
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Mean and standard error of `|.|^p` turned into an `L_p` norm estimate
/// `mean^(1/p)` with a delta-method standard error.
pub fn lp_norm(m: &Moments, p: f64) -> (f64, f64) {
    let mean = m.mean();
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let est = mean.powf(1.0 / p);
    let se = est / (p * mean) * m.std_error();
    (est, se)
}

/// Runs `per_rep` for every replication index in `0..reps`, one accumulator
/// per fixed-size block of indices, and merges blocks in index order.
pub fn fold_replications<A, I, F, M>(reps: u64, init: I, per_rep: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let blocks = reps.div_ceil(REPS_PER_TASK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let end = ((b + 1) * REPS_PER_TASK).min(reps);
            for r in b * REPS_PER_TASK..end {
                per_rep(&mut acc, r);
            }
            acc
        })
        .collect();
    let mut total = init();
    for part in parts {
        merge(&mut total, part);
    }
    total
}

/// Maps every replication index to a value, preserving index order.
pub fn map_replications<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

/// Lower empirical quantile (type 1) of an already sorted slice.
pub fn sorted_quantile(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let idx = ((prob * n as f64).ceil() as usize).clamp(1, n);
    sorted[idx - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        assert_eq!(m.mean(), 3.5);
        assert!((m.variance() - 7.0).abs() < 1e-12);
        assert!((m.std_error() - (7.0f64 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fold_is_thread_count_independent() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    fold_replications(
                        1000,
                        Moments::default,
                        |m, r| m.push(((r as f64) * 0.37).sin()),
                        |a, b| a.merge(&b),
                    )
                })
        };
        let a = run(1);
        let b = run(7);
        assert_eq!(a.sum.to_bits(), b.sum.to_bits());
        assert_eq!(a.count, 1000);
    }

    #[test]
    fn type1_quantile() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sorted_quantile(&xs, 0.1), 1.0);
        assert_eq!(sorted_quantile(&xs, 0.5), 3.0);
        assert_eq!(sorted_quantile(&xs, 0.41), 3.0);
        assert_eq!(sorted_quantile(&xs, 1.0), 5.0);
    }
}
