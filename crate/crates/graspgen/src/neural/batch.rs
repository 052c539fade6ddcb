//! Deterministic parallel gradient accumulation.
//!
//! A batch is split into a fixed number of index chunks that does not depend
//! on the worker pool size. Each chunk accumulates its own loss and gradient;
//! chunks may be processed on any thread, but the final reduction always sums
//! them in chunk order. Summing f64 values in a fixed order makes the result
//! bit-identical across thread counts.

use rayon::prelude::*;

/// Per-chunk accumulator: summed loss and flat parameter gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchAccum {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl BatchAccum {
    pub fn zeros(param_count: usize) -> BatchAccum {
        BatchAccum {
            loss: 0.0,
            grad: vec![0.0; param_count],
        }
    }

    fn add(&mut self, other: &BatchAccum) {
        self.loss += other.loss;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
    }
}

/// Number of chunks a batch is split into; fixed so results do not depend on
/// how many worker threads happen to run.
pub const ACCUM_CHUNKS: usize = 32;

/// Evaluates `item(index, accum)` for every index in `0..n` and reduces the
/// per-chunk sums in chunk order. Returns summed loss and gradient (callers
/// divide by `n` for means).
pub fn parallel_accumulate<F>(n: usize, param_count: usize, item: F) -> BatchAccum
where
    F: Fn(usize, &mut BatchAccum) + Sync,
{
    if n == 0 {
        return BatchAccum::zeros(param_count);
    }
    let chunk_len = n.div_ceil(ACCUM_CHUNKS);
    let bounds: Vec<(usize, usize)> = (0..n)
        .step_by(chunk_len)
        .map(|lo| (lo, (lo + chunk_len).min(n)))
        .collect();
    let partials: Vec<BatchAccum> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = BatchAccum::zeros(param_count);
            for i in lo..hi {
                item(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = BatchAccum::zeros(param_count);
    for p in &partials {
        total.add(p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(n: usize, threads: usize) -> BatchAccum {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            parallel_accumulate(n, 4, |i, acc| {
                // Values chosen so naive reordered summation would differ in
                // the low bits: mix of huge and tiny magnitudes.
                let x = if i % 3 == 0 { 1e12 } else { 1e-7 } * ((i + 1) as f64).sin();
                acc.loss += x;
                for (k, g) in acc.grad.iter_mut().enumerate() {
                    *g += x * (k as f64 + 0.5);
                }
            })
        })
    }

    #[test]
    fn reduction_is_bit_identical_across_thread_counts() {
        let reference = run(1000, 1);
        for threads in [2, 3, 8] {
            let got = run(1000, threads);
            assert_eq!(got.loss.to_bits(), reference.loss.to_bits());
            for (a, b) in got.grad.iter().zip(&reference.grad) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn accumulates_every_index_exactly_once() {
        let acc = parallel_accumulate(257, 1, |i, acc| {
            acc.loss += 1.0;
            acc.grad[0] += i as f64;
        });
        assert_eq!(acc.loss, 257.0);
        assert_eq!(acc.grad[0], (0..257).sum::<usize>() as f64);
    }

    #[test]
    fn empty_batch_yields_zeros() {
        let acc = parallel_accumulate(0, 3, |_, _| panic!("must not be called"));
        assert_eq!(acc.loss, 0.0);
        assert_eq!(acc.grad, vec![0.0; 3]);
    }
}
