use rayon::prelude::*;

use crate::error::Result;

/// Runs `f(0..count)` on the current rayon pool. Results come back in index
/// order whatever the thread count; the lowest-index error wins.
pub fn fan_out<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..count).into_par_iter().map(f).collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    #[test]
    fn order_is_stable_across_pool_sizes() {
        let work = |i: usize| Ok(i * i);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| fan_out(100, work)).unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| fan_out(100, work)).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[7], 49);
    }

    #[test]
    fn first_error_by_index() {
        let err = fan_out(50, |i| if i % 10 == 3 { Err(CliError::format("log", "x", i)) } else { Ok(i) }).unwrap_err();
        assert!(err.to_string().ends_with(": 3"), "{err}");
    }
}
