//! Worker-count policy shared by the subset enumeration and the sweep runner.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OMP_SHARP_THREADS";

/// `OMP_SHARP_THREADS` when set to a positive integer, else the available
/// parallelism of the machine.
pub fn max_threads() -> usize {
    let machine = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(cap) if cap > 0 => cap,
        _ => machine,
    }
}
