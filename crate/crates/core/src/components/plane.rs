use std::collections::BTreeMap;

/// Height of the dominant horizontal plane: the modal `z` bin of width
/// `bin`, refined to the mean of the points within one and a half bins of
/// its center. Ties go to the lower bin. `None` for no points.
pub fn support_plane_height(zs: impl Iterator<Item = f64> + Clone, bin: f64) -> Option<f64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for z in zs.clone() {
        *counts.entry((z / bin).floor() as i64).or_default() += 1;
    }
    let mut best: Option<(i64, usize)> = None;
    for (&b, &n) in &counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((b, n));
        }
    }
    let (b, _) = best?;
    let center = (b as f64 + 0.5) * bin;
    let (sum, n) = zs
        .filter(|z| (z - center).abs() <= 1.5 * bin)
        .fold((0.0, 0usize), |(s, n), z| (s + z, n + 1));
    Some(sum / n as f64)
}

/// Direction of the principal axis of a 2D point set from its central
/// second moments, in (-pi/2, pi/2]. Isotropic sets give 0.
pub fn principal_angle(sxx: f64, syy: f64, sxy: f64) -> f64 {
    let scale = (sxx + syy).abs().max(f64::MIN_POSITIVE);
    if ((sxx - syy).abs() / scale) < 1e-9 && (sxy.abs() / scale) < 1e-9 {
        return 0.0;
    }
    let a = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if a <= -std::f64::consts::FRAC_PI_2 + 1e-15 {
        a + std::f64::consts::PI
    } else {
        a
    }
}
