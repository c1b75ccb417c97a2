//! Image buffer aliases and small pixel-grid helpers.
//!
//! All image-like data is stored row-major as `Array2<f64>` indexed
//! `[[row, col]]`, i.e. `[[v, u]]`. Pixel centers sit at integer
//! coordinates: pixel `(u, v)` samples the continuous image plane at
//! exactly `(u, v)`.

use ndarray::Array2;

/// Per-pixel depth in meters. `0.0` (or NaN) marks an invalid pixel.
pub type DepthMap = Array2<f64>;

/// Segmentation mask. Binary `{0,1}` as input, `[0,1]` when rendered.
pub type SegMask = Array2<f64>;

/// Grayscale intensity image in `[0,1]`.
pub type GrayImage = Array2<f64>;

/// True if a stored depth value is usable.
#[inline]
pub fn depth_valid(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

/// Bilinear sample of `img` at continuous coordinates `(u, v)`, plus the
/// interpolant's partial derivatives w.r.t. `u` and `v`.
///
/// Returns `None` when `(u, v)` falls outside `[0, w-1] x [0, h-1]`.
pub fn bilinear_sample(img: &Array2<f64>, u: f64, v: f64) -> Option<(f64, f64, f64)> {
    let (h, w) = img.dim();
    if w < 2 || h < 2 {
        return None;
    }
    let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
    if !(0.0..=wf).contains(&u) || !(0.0..=hf).contains(&v) {
        return None;
    }
    let i0 = (v.floor() as usize).min(h - 2);
    let j0 = (u.floor() as usize).min(w - 2);
    let fu = u - j0 as f64;
    let fv = v - i0 as f64;
    let p00 = img[[i0, j0]];
    let p01 = img[[i0, j0 + 1]];
    let p10 = img[[i0 + 1, j0]];
    let p11 = img[[i0 + 1, j0 + 1]];
    let val = (1.0 - fv) * ((1.0 - fu) * p00 + fu * p01) + fv * ((1.0 - fu) * p10 + fu * p11);
    let du = (1.0 - fv) * (p01 - p00) + fv * (p11 - p10);
    let dv = (1.0 - fu) * (p10 - p00) + fu * (p11 - p01);
    Some((val, du, dv))
}

/// Morphological erosion of a binary mask with a (2r+1)^2 square element.
pub fn erode(mask: &SegMask, r: usize) -> SegMask {
    morph(mask, r, true)
}

/// Morphological dilation of a binary mask with a (2r+1)^2 square element.
pub fn dilate(mask: &SegMask, r: usize) -> SegMask {
    morph(mask, r, false)
}

fn morph(mask: &SegMask, r: usize, min: bool) -> SegMask {
    let (h, w) = mask.dim();
    let ri = r as isize;
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut acc = mask[[i, j]];
        for di in -ri..=ri {
            for dj in -ri..=ri {
                let (ii, jj) = (i as isize + di, j as isize + dj);
                if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < w {
                    let v = mask[[ii as usize, jj as usize]];
                    acc = if min { acc.min(v) } else { acc.max(v) };
                }
            }
        }
        acc
    })
}

/// Tight bounding box `(u_min, v_min, u_max, v_max)` of pixels where
/// `mask > 0.5`, or `None` for an empty mask.
pub fn mask_bbox(mask: &SegMask) -> Option<(usize, usize, usize, usize)> {
    let (h, w) = mask.dim();
    let (mut u0, mut v0, mut u1, mut v1) = (w, h, 0usize, 0usize);
    let mut any = false;
    for i in 0..h {
        for j in 0..w {
            if mask[[i, j]] > 0.5 {
                any = true;
                u0 = u0.min(j);
                v0 = v0.min(i);
                u1 = u1.max(j);
                v1 = v1.max(i);
            }
        }
    }
    any.then_some((u0, v0, u1, v1))
}

/// True if any `mask > 0.5` pixel lies on the image border.
pub fn mask_touches_border(mask: &SegMask) -> bool {
    let (h, w) = mask.dim();
    if h == 0 || w == 0 {
        return false;
    }
    (0..w).any(|j| mask[[0, j]] > 0.5 || mask[[h - 1, j]] > 0.5)
        || (0..h).any(|i| mask[[i, 0]] > 0.5 || mask[[i, w - 1]] > 0.5)
}
