//! Row-major 2-D FFT on top of rustfft.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn forward(width: usize, height: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            Self {
                width,
                height,
                row: p.plan_fft_forward(width),
                col: p.plan_fft_forward(height),
            }
        })
    }

    pub fn inverse(width: usize, height: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            Self {
                width,
                height,
                row: p.plan_fft_inverse(width),
                col: p.plan_fft_inverse(height),
            }
        })
    }

    /// Unnormalized in-place transform of a `height × width` row-major grid.
    pub fn process(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.width * self.height);
        self.row.process(data);
        let mut transposed = vec![Complex64::default(); data.len()];
        transpose(data, &mut transposed, self.width, self.height);
        self.col.process(&mut transposed);
        transpose(&transposed, data, self.height, self.width);
    }
}

/// `src` is `rows × cols`; `dst` becomes `cols × rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    const BLOCK: usize = 32;
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Signed frequency index of FFT bin `b` out of `n`.
pub(crate) fn signed_bin(b: usize, n: usize) -> i64 {
    if b < n.div_ceil(2) {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// FFT bin index holding signed frequency `f`.
pub(crate) fn bin_of(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}
