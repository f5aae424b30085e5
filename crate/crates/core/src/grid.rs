use alloc::vec::Vec;

/// Bilinear resampling of a row-major grid with pixel-center alignment and
/// edge clamping (the `align_corners = false` convention).
pub(crate) fn resample_bilinear(
    src: &[f64],
    src_width: usize,
    src_height: usize,
    dst_width: usize,
    dst_height: usize,
) -> Vec<f64> {
    debug_assert_eq!(src.len(), src_width * src_height);
    let xs = axis_taps(src_width, dst_width);
    let ys = axis_taps(src_height, dst_height);
    let mut out = Vec::with_capacity(dst_width * dst_height);
    for &(y0, y1, ty) in &ys {
        let row0 = &src[y0 * src_width..(y0 + 1) * src_width];
        let row1 = &src[y1 * src_width..(y1 + 1) * src_width];
        for &(x0, x1, tx) in &xs {
            let top = lerp(row0[x0], row0[x1], tx);
            let bottom = lerp(row1[x0], row1[x1], tx);
            out.push(lerp(top, bottom, ty));
        }
    }
    out
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact for a == b, so constant grids stay constant
    a + (b - a) * t
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_sizes_match() {
        let src = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(resample_bilinear(&src, 3, 2, 3, 2), src.to_vec());
    }

    #[test]
    fn upsample_interpolates_between_centers() {
        let out = resample_bilinear(&[0.0, 1.0], 2, 1, 4, 1);
        assert_eq!(out, [0.0, 0.25, 0.75, 1.0]);
    }
}
