//! Batched multi-dimensional complex FFTs over row-major boxes.
//!
//! Transforms run axis by axis. The contiguous axis is handed to rustfft
//! as one batch; strided axes are transposed into a scratch buffer first so
//! every transform works on contiguous lines.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
struct PlanPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(len: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(len)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            PlanPair { forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) }
        })
        .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Unnormalized in-place transform of `data` laid out row-major with `shape`.
pub fn transform(data: &mut [Complex64], shape: [usize; 3], direction: Direction) {
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    for axis in 0..3 {
        let len = shape[axis];
        if len <= 1 {
            continue;
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let pair = plans(len);
        let fft = match direction {
            Direction::Forward => pair.forward,
            Direction::Inverse => pair.inverse,
        };
        transform_axis(data, len, inner, fft.as_ref());
    }
}

/// Lines per rayon task on the contiguous axis.
const LINES_PER_TASK: usize = 64;

fn transform_axis(data: &mut [Complex64], len: usize, inner: usize, fft: &dyn Fft<f64>) {
    if inner == 1 {
        data.par_chunks_mut(len * LINES_PER_TASK).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(chunk, &mut scratch);
        });
        return;
    }
    let block = len * inner;
    let mut tmp = vec![Complex64::default(); data.len()];
    // block [len][inner] -> [inner][len]
    tmp.par_chunks_mut(block).zip(data.par_chunks(block)).for_each(|(dst, src)| {
        for l in 0..len {
            let row = &src[l * inner..(l + 1) * inner];
            for (i, v) in row.iter().enumerate() {
                dst[i * len + l] = *v;
            }
        }
    });
    tmp.par_chunks_mut(len * LINES_PER_TASK).for_each(|chunk| {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(chunk, &mut scratch);
    });
    data.par_chunks_mut(block).zip(tmp.par_chunks(block)).for_each(|(dst, src)| {
        for i in 0..inner {
            let line = &src[i * len..(i + 1) * len];
            for (l, v) in line.iter().enumerate() {
                dst[l * inner + i] = *v;
            }
        }
    });
}
