use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place unnormalized 2-D FFT of a row-major `height x width` buffer.
pub fn fft2(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    row_fft.process(data);

    let mut transposed = vec![Complex64::default(); data.len()];
    transpose(data, &mut transposed, width, height);
    col_fft.process(&mut transposed);
    transpose(&transposed, data, height, width);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], width: usize, height: usize) {
    const BLOCK: usize = 32;
    for r0 in (0..height).step_by(BLOCK) {
        for c0 in (0..width).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(height) {
                for c in c0..(c0 + BLOCK).min(width) {
                    dst[c * height + r] = src[r * width + c];
                }
            }
        }
    }
}

/// Moves the zero-frequency bin to index `n/2` on both axes.
pub fn fftshift<T: Copy>(data: &[T], width: usize, height: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for r in 0..height {
        let src_r = (r + height - height / 2) % height;
        for c in 0..width {
            let src_c = (c + width - width / 2) % width;
            out.push(data[src_r * width + src_c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft2(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::default();
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (w, h) = (6, 4);
        let data: Vec<Complex64> = (0..w * h)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut fast = data.clone();
        fft2(&mut fast, w, h, false);
        let slow = naive_dft2(&data, w, h);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn forward_then_inverse_recovers_input() {
        let (w, h) = (8, 8);
        let data: Vec<Complex64> = (0..w * h).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut buf = data.clone();
        fft2(&mut buf, w, h, false);
        fft2(&mut buf, w, h, true);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a / (w * h) as f64 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_centers_dc() {
        let v: Vec<usize> = (0..4).collect();
        assert_eq!(fftshift(&v, 4, 1), vec![2, 3, 0, 1]);
    }
}
