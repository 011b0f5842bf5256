//! Heap tuning for long training runs.

/// Keeps freed heap memory mapped instead of returning it to the kernel.
///
/// Training allocates and drops many multi-megabyte matrices per epoch; with
/// glibc's default trimming each one is faulted in afresh, which can cost a
/// third of the run time in the kernel. Call once at startup. A no-op on other
/// platforms.
pub fn retain_heap() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator parameters.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
        libc::mallopt(libc::M_TOP_PAD, 64 << 20);
    }
}
