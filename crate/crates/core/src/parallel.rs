//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the inner loops of the crate
//! run on the rayon thread pool. Without it every helper degrades to a plain
//! sequential iterator. Results never depend on the schedule: every helper
//! either preserves index order or combines with an associative, commutative
//! integer reduction.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether the crate was built with rayon support.
pub const fn is_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Sets the size of the global worker pool. Must be called before any
/// parallel work is done; later calls return an error.
pub fn set_global_threads(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}

/// Runs `f` with all crate-internal parallelism confined to one thread.
pub fn sequential<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(1).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

/// `(0..len).map(f).collect()`, in index order.
pub(crate) fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// `items.iter().map(f).collect()`, in order.
pub(crate) fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Calls `f(chunk_index, chunk)` for every `chunk_len`-sized chunk of `data`.
pub(crate) fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Folds `chunk_len`-sized chunks of `data` into 256-bin integer tables and
/// sums them.
pub(crate) fn bin_counts<T, F>(data: &[T], chunk_len: usize, bin: F) -> [u64; 256]
where
    T: Sync,
    F: Fn(&T) -> u8 + Sync + Send,
{
    let count = |chunk: &[T]| {
        let mut table = [0u64; 256];
        for v in chunk {
            table[bin(v) as usize] += 1;
        }
        table
    };
    let add = |mut a: [u64; 256], b: [u64; 256]| {
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x += *y;
        }
        a
    };
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks(chunk_len).map(count).reduce(|| [0u64; 256], add)
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks(chunk_len).map(count).fold([0u64; 256], add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * 3));
    }

    #[test]
    fn bin_counts_matches_serial_count() {
        let data: Vec<u8> = (0..10_007u32).map(|i| (i * 31 % 256) as u8).collect();
        let par = bin_counts(&data, 97, |&v| v);
        let mut serial = [0u64; 256];
        for &v in &data {
            serial[v as usize] += 1;
        }
        assert_eq!(par, serial);
        assert_eq!(sequential(|| bin_counts(&data, 97, |&v| v)), serial);
    }
}
