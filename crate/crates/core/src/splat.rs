//! Disc splatting shared by the sparse depth map and the point renderer.

use crate::scalar::Scalar;

/// Foreshortened splat radius `clamp(round(r0 * d_ref / d), 1, r_max)` in pixels.
pub fn splat_radius<T: Scalar>(r0: T, d_ref: T, depth: T, r_max: usize) -> usize {
    let r = (r0 * d_ref / depth).round();
    let r = if r.is_finite() { r.to_f64_lossy() } else { r_max as f64 };
    (r.max(1.0) as usize).clamp(1, r_max.max(1))
}

/// Visits the pixels whose centers lie within `radius` of `(u, v)`, clipped to
/// the image. The callback receives the pixel and its center offset divided by
/// the radius, so `ox² + oy² ≤ 1`.
pub fn for_each_disc_pixel<T: Scalar>(
    u: T,
    v: T,
    radius: usize,
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, usize, T, T),
) {
    let r = T::from_usize_lossy(radius);
    let half = T::lit(0.5);
    let x_lo = (u - r - half).floor().max(T::zero());
    let y_lo = (v - r - half).floor().max(T::zero());
    let x_hi = (u + r).ceil().min(T::from_usize_lossy(width));
    let y_hi = (v + r).ceil().min(T::from_usize_lossy(height));
    if !(x_lo < x_hi && y_lo < y_hi) {
        return;
    }
    let (x_lo, x_hi) = (x_lo.to_usize().unwrap_or(0), x_hi.to_usize().unwrap_or(0));
    let (y_lo, y_hi) = (y_lo.to_usize().unwrap_or(0), y_hi.to_usize().unwrap_or(0));
    let r2 = r * r;
    for y in y_lo..y_hi {
        let dy = T::from_usize_lossy(y) + half - v;
        for x in x_lo..x_hi {
            let dx = T::from_usize_lossy(x) + half - u;
            if dx * dx + dy * dy <= r2 {
                f(x, y, dx / r, dy / r);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_rule() {
        // r0 = 4, d_ref = 3: d = 2 -> round(6) = 6; d = 3 -> 4
        assert_eq!(splat_radius(4.0f64, 3.0, 2.0, 12), 6);
        assert_eq!(splat_radius(4.0f64, 3.0, 3.0, 12), 4);
        assert_eq!(splat_radius(4.0f64, 3.0, 0.1, 12), 12);
        assert_eq!(splat_radius(4.0f64, 3.0, 100.0, 12), 1);
    }

    #[test]
    fn disc_is_clipped_and_round() {
        let mut n = 0;
        for_each_disc_pixel(0.0f64, 0.0, 3, 10, 10, |x, y, ox, oy| {
            assert!(x < 10 && y < 10);
            assert!(ox * ox + oy * oy <= 1.0 + 1e-12);
            n += 1;
        });
        // quarter disc of radius 3 around a corner: centers (i+.5, j+.5) with i,j in 0..3
        let brute = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| (i as f64 + 0.5).powi(2) + (j as f64 + 0.5).powi(2) <= 9.0)
            .count();
        assert_eq!(n, brute);
    }

    #[test]
    fn offscreen_disc_is_empty() {
        let mut n = 0;
        for_each_disc_pixel(-50.0f32, 5.0, 4, 16, 16, |_, _, _, _| n += 1);
        assert_eq!(n, 0);
    }
}
