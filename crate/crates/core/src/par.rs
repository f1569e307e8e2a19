//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the work runs on a rayon pool; one job (or a
//! build without the feature) runs it on the calling thread. Results are
//! always returned in input order.

pub struct Pool {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Pool {
    /// `jobs == 0` means one worker per available core.
    pub fn new(jobs: usize) -> Pool {
        #[cfg(feature = "parallel")]
        {
            let pool = (jobs != 1)
                .then(|| {
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(jobs)
                        .build()
                        .ok()
                })
                .flatten();
            Pool { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = jobs;
            Pool {}
        }
    }

    pub fn sequential() -> Pool {
        Pool::new(1)
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            if items.len() > 1 {
                use rayon::prelude::*;
                return pool.install(|| items.par_iter().map(f).collect());
            }
        }
        items.iter().map(f).collect()
    }
}
