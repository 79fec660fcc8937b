use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_CONTRAST_FACTORS: [f64; 3] = [0.8, 1.0, 1.2];

/// Contrast-varied copies of `image`, one per factor:
/// `mean + factor · (value − mean)` per channel.
pub fn augment_contrast(image: &Tensor, factors: &[f64]) -> Result<Vec<Tensor>> {
    if factors.is_empty() {
        return Err(Error::Argument("at least one contrast factor is required".into()));
    }
    if let Some(f) = factors.iter().find(|f| !f.is_finite()) {
        return Err(Error::Argument(format!("contrast factor {f} is not finite")));
    }
    let means = image.channel_means();
    let plane = image.width() * image.height();
    factors
        .iter()
        .map(|&f| {
            if f == 1.0 {
                return Ok(image.clone());
            }
            let data = image
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let m = means[i / plane];
                    m + f * (v - m)
                })
                .collect();
            Tensor::new(image.channels(), image.height(), image.width(), data)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_zero_and_constant_cases() {
        let img = Tensor::from_fn(2, 3, 4, |c, y, x| (c * 50 + y * 4 + x) as f64).unwrap();
        let out = augment_contrast(&img, &[1.0, 0.0, 2.0]).unwrap();
        assert_eq!(out[0], img);
        let means = img.channel_means();
        for c in 0..2 {
            assert!(out[1].channel(c).iter().all(|&v| (v - means[c]).abs() < 1e-12));
        }
        // mean preserved, spread doubled
        let m2 = out[2].channel_means();
        assert!((m2[0] - means[0]).abs() < 1e-9);
        assert!((out[2].get(0, 0, 0) - (means[0] - 2.0 * means[0])).abs() < 1e-9);

        let flat = Tensor::filled(1, 4, 4, 7.0).unwrap();
        for t in augment_contrast(&flat, &[0.3, 1.7]).unwrap() {
            assert!(t.data().iter().all(|&v| (v - 7.0).abs() < 1e-12));
        }
        assert!(augment_contrast(&flat, &[]).is_err());
    }
}
