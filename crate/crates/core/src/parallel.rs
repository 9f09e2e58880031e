//! Worker pool sizing.

use std::sync::Once;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FLOWCAST_THREADS";

/// Parses a thread cap; zero or garbage means "no cap".
pub fn thread_cap(value: Option<&str>) -> Option<usize> {
    value.and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

/// Configures the global rayon pool from `FLOWCAST_THREADS` once per process. Has no
/// effect if the pool was already started elsewhere.
pub fn init() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        if let Some(n) = thread_cap(std::env::var(THREADS_ENV).ok().as_deref()) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_parsing() {
        assert_eq!(thread_cap(Some("4")), Some(4));
        assert_eq!(thread_cap(Some(" 2 ")), Some(2));
        assert_eq!(thread_cap(Some("0")), None);
        assert_eq!(thread_cap(Some("many")), None);
        assert_eq!(thread_cap(None), None);
    }
}
