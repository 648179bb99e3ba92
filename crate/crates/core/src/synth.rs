//! Seeded synthetic scenes and column stripe fields.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DestripeError, Result};
use crate::imagecore::ImageMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripeMode {
    /// Columns `j` with `j % period == 0`.
    Periodic { period: usize },
    /// A seeded random subset of `ceil(density * n)` columns.
    Nonperiodic { density: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripeProfile {
    /// Each striped column holds one constant offset.
    Constant,
    /// The offset is modulated by a slow cosine down the column.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripeSpec {
    pub mode: StripeMode,
    pub amplitude: f64,
    pub profile: StripeProfile,
    pub seed: u64,
}

impl StripeSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            StripeMode::Periodic { period } if period < 2 => {
                return Err(DestripeError::InvalidParameter(format!(
                    "stripe period must be at least 2, got {period}"
                )))
            }
            StripeMode::Nonperiodic { density } if !(density > 0.0 && density <= 1.0) => {
                return Err(DestripeError::InvalidParameter(format!(
                    "stripe density must lie in (0, 1], got {density}"
                )))
            }
            _ => {}
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(DestripeError::InvalidParameter(format!(
                "stripe amplitude must be nonnegative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Indices of the striped columns, ascending.
    pub fn striped_columns(&self, n: usize) -> Result<Vec<usize>> {
        self.validate()?;
        Ok(match self.mode {
            StripeMode::Periodic { period } => (0..n).step_by(period).collect(),
            StripeMode::Nonperiodic { density } => {
                let k = ((density * n as f64).ceil() as usize).min(n);
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_c01u64);
                let mut cols = sample(&mut rng, n, k).into_vec();
                cols.sort_unstable();
                cols
            }
        })
    }
}

/// Stripe field of shape `m x n`; non-striped columns are exactly zero.
pub fn generate_stripes(spec: &StripeSpec, m: usize, n: usize) -> Result<ImageMatrix> {
    let cols = spec.striped_columns(n)?;
    let mut s = ImageMatrix::zeros(m, n);
    if spec.amplitude == 0.0 {
        return Ok(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.amplitude;
    let mut col = vec![0.0; m];
    for j in cols {
        let c = dyadic(rng.gen_range(-a..=a));
        match spec.profile {
            StripeProfile::Constant => col.fill(c),
            StripeProfile::Smooth => {
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let denom = m.max(2) as f64 - 1.0;
                for (i, x) in col.iter_mut().enumerate() {
                    let t = std::f64::consts::PI * i as f64 / denom;
                    *x = dyadic(c * (0.75 + 0.25 * (t + phase).cos()));
                }
            }
        }
        s.set_column(j, &col);
    }
    Ok(s)
}

/// Rounds to a multiple of `2^-24`. Generated scenes and stripes live on this
/// grid, so `(u + s) - s == u` holds bit for bit.
fn dyadic(x: f64) -> f64 {
    const SCALE: f64 = (1u64 << 24) as f64;
    (x * SCALE).round() / SCALE
}

/// `f = u + s`, keeping the peak of `u`.
pub fn degrade(u: &ImageMatrix, s: &ImageMatrix) -> Result<ImageMatrix> {
    u.check_same_shape(s, "degrade")?;
    Ok(u.add(s).with_peak(u.peak()))
}

/// A unit-range test scene: flat rectangles and disks over a vertical ramp,
/// with low-frequency shading added everywhere. Flat regions and slow
/// shading keep it inside the model's prior, so stripe removal is well posed.
pub fn synthetic_scene(m: usize, n: usize, seed: u64) -> ImageMatrix {
    const WAVES: usize = 40;
    const SHADING: f64 = 0.05;
    const MAX_FREQ: f64 = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let denom = m.max(2) as f64 - 1.0;
    let mut u = ImageMatrix::from_fn(m, n, |i, _| 0.25 + 0.2 * i as f64 / denom);
    let (mf, nf) = (m as f64, n as f64);
    for _ in 0..6 {
        let level = rng.gen_range(0.1..0.9);
        let (h, w) = (rng.gen_range(0.1..0.45) * mf, rng.gen_range(0.1..0.45) * nf);
        let (i0, j0) = (rng.gen_range(0.0..mf - h), rng.gen_range(0.0..nf - w));
        let (i1, j1) = ((i0 + h) as usize, (j0 + w) as usize);
        for i in i0 as usize..i1.min(m) {
            u.row_mut(i)[j0 as usize..j1.min(n)].fill(level);
        }
    }
    for _ in 0..4 {
        let level = rng.gen_range(0.1..0.9);
        let r = rng.gen_range(0.05..0.2) * mf.min(nf);
        let (ci, cj) = (rng.gen_range(0.0..mf), rng.gen_range(0.0..nf));
        for i in 0..m {
            for j in 0..n {
                let (di, dj) = (i as f64 - ci, j as f64 - cj);
                if di * di + dj * dj <= r * r {
                    u.row_mut(i)[j] = level;
                }
            }
        }
    }
    let waves: Vec<(f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            (
                rng.gen_range(-MAX_FREQ..MAX_FREQ),
                rng.gen_range(-MAX_FREQ..MAX_FREQ),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let amp = SHADING / (WAVES as f64).sqrt();
    ImageMatrix::from_fn(m, n, |i, j| {
        let (x, y) = (i as f64, j as f64);
        let shade: f64 = waves.iter().map(|&(a, b, c)| (a * x + b * y + c).cos()).sum();
        dyadic((u[(i, j)] + amp * shade).clamp(0.0, 1.0))
    })
    .with_peak(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::diff_y;

    fn spec(mode: StripeMode) -> StripeSpec {
        StripeSpec {
            mode,
            amplitude: 0.2,
            profile: StripeProfile::Constant,
            seed: 7,
        }
    }

    #[test]
    fn zero_amplitude_gives_zero() {
        let s = StripeSpec {
            amplitude: 0.0,
            ..spec(StripeMode::Periodic { period: 3 })
        };
        assert_eq!(generate_stripes(&s, 5, 9).unwrap().norm(), 0.0);
    }

    #[test]
    fn periodic_columns() {
        let s = generate_stripes(&spec(StripeMode::Periodic { period: 2 }), 3, 4).unwrap();
        for j in 0..4 {
            let nonzero = s.column(j).iter().any(|&x| x != 0.0);
            assert_eq!(nonzero, j % 2 == 0, "column {j}");
        }
    }

    #[test]
    fn nonperiodic_column_count_and_determinism() {
        let sp = spec(StripeMode::Nonperiodic { density: 0.3 });
        let a = generate_stripes(&sp, 8, 20).unwrap();
        let b = generate_stripes(&sp, 8, 20).unwrap();
        assert_eq!(a, b);
        let striped = (0..20).filter(|&j| a.column(j).iter().any(|&x| x != 0.0)).count();
        assert_eq!(striped, 6);
        assert_eq!(sp.striped_columns(20).unwrap().len(), 6);
        assert_eq!(diff_y(&a).unwrap().norm(), 0.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(spec(StripeMode::Periodic { period: 1 }).validate().is_err());
        assert!(spec(StripeMode::Nonperiodic { density: 0.0 }).validate().is_err());
        assert!(spec(StripeMode::Nonperiodic { density: 1.5 }).validate().is_err());
    }

    #[test]
    fn degrade_round_trip() {
        let u = synthetic_scene(16, 12, 1);
        let s = generate_stripes(&spec(StripeMode::Periodic { period: 4 }), 16, 12).unwrap();
        let f = degrade(&u, &s).unwrap();
        assert_eq!(f.peak(), 1.0);
        assert_eq!(degrade(&ImageMatrix::zeros(16, 12), &s).unwrap(), s);
        assert_eq!(f.sub(&s).as_slice(), u.as_slice());
    }
}
