//! Trial execution. With the `parallel` feature trials run on the rayon pool;
//! results are always returned in trial order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Runs `f(0..trials)` and collects the results by trial index.
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_trials_parallel(trials, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trials_sequential(trials, f)
    }
}

pub fn map_trials_sequential<T, F>(trials: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..trials).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_trials_parallel<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_trial_order() {
        let out = map_trials(1000, |t| t * t);
        assert_eq!(out, (0..1000).map(|t| t * t).collect::<Vec<_>>());
        assert_eq!(map_trials_sequential(5, |t| t + 1), vec![1, 2, 3, 4, 5]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let f = |t: u64| crate::oracle::mix64(t);
        assert_eq!(map_trials_parallel(5000, f), map_trials_sequential(5000, f));
    }
}
