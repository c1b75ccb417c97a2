//! Binomial image pyramids and the adjoint of their downsampling, used
//! to backpropagate multi-scale losses to full resolution.

use ndarray::Array2;

/// Separable 5-tap binomial kernel (1,4,6,4,1)/16.
const KERNEL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Multi-scale image stack; level 0 is full resolution, each further
/// level is binomially smoothed and decimated by two.
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<Array2<f64>>,
}

impl Pyramid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Mirror (reflect-101) index into `[0, n)`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // one reflection suffices for |i| < n, which holds for a 5-tap kernel
    // on images of at least 2 pixels
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    i as usize
}

fn downsample_axis0(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let oh = h.div_ceil(2);
    Array2::from_shape_fn((oh, w), |(i, j)| {
        let mut acc = 0.0;
        for (k, wk) in KERNEL.iter().enumerate() {
            acc += wk * img[[reflect(2 * i as isize + k as isize - 2, h), j]];
        }
        acc
    })
}

fn downsample_axis1(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let ow = w.div_ceil(2);
    Array2::from_shape_fn((h, ow), |(i, j)| {
        let mut acc = 0.0;
        for (k, wk) in KERNEL.iter().enumerate() {
            acc += wk * img[[i, reflect(2 * j as isize + k as isize - 2, w)]];
        }
        acc
    })
}

/// One pyramid step: 5x5 binomial smoothing with stride two and mirrored
/// borders. `(H, W) -> (ceil(H/2), ceil(W/2))`.
pub fn downsample(img: &Array2<f64>) -> Array2<f64> {
    downsample_axis1(&downsample_axis0(img))
}

/// Exact adjoint of [`downsample`]: scatters a coarse-level cotangent
/// back onto the finer grid.
pub fn downsample_adjoint(cot: &Array2<f64>, fine_dim: (usize, usize)) -> Array2<f64> {
    let (h, w) = fine_dim;
    let (ch, cw) = cot.dim();
    assert_eq!((h.div_ceil(2), w.div_ceil(2)), (ch, cw), "cotangent shape mismatch");
    // adjoint of axis-1 then axis-0, applied in reverse
    let mut mid = Array2::<f64>::zeros((ch, w));
    for i in 0..ch {
        for j in 0..cw {
            let c = cot[[i, j]];
            if c != 0.0 {
                for (k, wk) in KERNEL.iter().enumerate() {
                    mid[[i, reflect(2 * j as isize + k as isize - 2, w)]] += wk * c;
                }
            }
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for i in 0..ch {
        for j in 0..w {
            let c = mid[[i, j]];
            if c != 0.0 {
                for (k, wk) in KERNEL.iter().enumerate() {
                    out[[reflect(2 * i as isize + k as isize - 2, h), j]] += wk * c;
                }
            }
        }
    }
    out
}

/// [`downsample`] with zero padding instead of mirroring. Used for
/// validity indicators: a coarse pixel keeps value 1 only when its
/// entire fine-level support is valid and inside the image.
pub fn downsample_zeropad(img: &Array2<f64>) -> Array2<f64> {
    let (h, w) = img.dim();
    let sample = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
            0.0
        } else {
            img[[i as usize, j as usize]]
        }
    };
    let mid = Array2::from_shape_fn((h.div_ceil(2), w), |(i, j)| {
        KERNEL
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * sample(2 * i as isize + k as isize - 2, j as isize))
            .sum()
    });
    let sample_mid = |i: usize, j: isize| -> f64 {
        if j < 0 || j >= w as isize {
            0.0
        } else {
            mid[[i, j as usize]]
        }
    };
    Array2::from_shape_fn((h.div_ceil(2), w.div_ceil(2)), |(i, j)| {
        KERNEL
            .iter()
            .enumerate()
            .map(|(k, wk)| wk * sample_mid(i, 2 * j as isize + k as isize - 2))
            .sum()
    })
}

/// Build an `n`-level pyramid, stopping early once a level would shrink
/// below 2x2; the returned pyramid's length records how many were built.
pub fn build_pyramid(img: &Array2<f64>, n: usize) -> Pyramid {
    assert!(n >= 1, "pyramid needs at least one level");
    let mut levels = vec![img.clone()];
    while levels.len() < n {
        let (h, w) = levels.last().unwrap().dim();
        if h.div_ceil(2) < 2 || w.div_ceil(2) < 2 {
            break;
        }
        levels.push(downsample(levels.last().unwrap()));
    }
    Pyramid { levels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_stays_constant() {
        let img = Array2::from_elem((33, 47), 0.37);
        let pyr = build_pyramid(&img, 8);
        assert!(pyr.len() >= 4);
        for level in &pyr.levels {
            for v in level.iter() {
                assert_relative_eq!(*v, 0.37, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn level_dimensions_are_ceil_halves() {
        let img = Array2::zeros((96, 288));
        let pyr = build_pyramid(&img, 8);
        assert_eq!(pyr.len(), 7); // 96x288 ... 3x5 -> next would be 2x3, but 3/2->2 ok
        let mut dims = (96usize, 288usize);
        for level in &pyr.levels {
            assert_eq!(level.dim(), dims);
            dims = (dims.0.div_ceil(2), dims.1.div_ceil(2));
        }
    }

    #[test]
    fn stops_before_shrinking_below_2x2() {
        let img = Array2::zeros((2, 2));
        let pyr = build_pyramid(&img, 8);
        assert_eq!(pyr.len(), 1);
        let img = Array2::zeros((4, 4));
        let pyr = build_pyramid(&img, 8);
        assert_eq!(pyr.len(), 2);
    }

    #[test]
    fn centered_impulse_reproduces_kernel_taps() {
        // Impulse at an even column, away from borders: the next level
        // picks up kernel taps at even offsets around it.
        let mut img = Array2::zeros((1_usize.max(8), 32));
        img[[4, 16]] = 1.0;
        let down = downsample(&img);
        // row 2 maps back to source row 4; columns 7,8,9 see taps 1/16 at
        // distance 2, 6/16 centered, 1/16 at distance 2 -- scaled by the
        // row pass 6/16 factor.
        let row_w = 6.0 / 16.0;
        assert_relative_eq!(down[[2, 8]], row_w * 6.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(down[[2, 7]], row_w * 1.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(down[[2, 9]], row_w * 1.0 / 16.0, epsilon = 1e-12);
        assert_relative_eq!(down[[1, 8]], (4.0 / 16.0) * 0.0 + 1.0 / 16.0 * 6.0 / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_matches_inner_product() {
        // <downsample(x), y> == <x, adjoint(y)> for random x, y.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (h, w) in [(9, 13), (16, 16), (5, 8)] {
            let x = Array2::from_shape_fn((h, w), |_| rng.random_range(-1.0..1.0));
            let y = Array2::from_shape_fn((h.div_ceil(2), w.div_ceil(2)), |_| {
                rng.random_range(-1.0..1.0)
            });
            let lhs = (&downsample(&x) * &y).sum();
            let rhs = (&x * &downsample_adjoint(&y, (h, w))).sum();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }
}
