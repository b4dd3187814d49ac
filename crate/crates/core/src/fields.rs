//! Analytic test fields evaluable anywhere in the channel.

use rand::Rng;

use crate::geometry::{bump_profile, ChannelGeometry};

/// Value and gradient of a vector field, `grad[i][j] = ∂_j v_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VectorSample {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

pub trait VectorField: Sync {
    fn eval(&self, x: [f64; 2]) -> VectorSample;
}

pub trait ScalarField: Sync {
    /// Value and gradient.
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]);
}

impl ScalarField for Box<dyn ScalarField> {
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        (**self).eval(x)
    }
}

/// Adapter turning a closure into a [`VectorField`].
pub struct FnVector<F>(pub F);

impl<F: Fn([f64; 2]) -> VectorSample + Sync> VectorField for FnVector<F> {
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        (self.0)(x)
    }
}

/// Adapter turning a closure into a [`ScalarField`].
pub struct FnScalar<F>(pub F);

impl<F: Fn([f64; 2]) -> (f64, [f64; 2]) + Sync> ScalarField for FnScalar<F> {
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        (self.0)(x)
    }
}

/// One term `a·φ((x1 - c)/w)·sin(kπξ)` of a stream function, where
/// `ξ = (x2 - f1)/(f2 - f1)` is the normalized height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamMode {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    pub k: u32,
}

/// `v = (∂2ψ, -∂1ψ)` for a sum of [`StreamMode`]s.
///
/// `ψ` vanishes on both walls and is compactly supported in `x1`, so `v` is
/// exactly divergence free, tangent to the walls, has zero flux through
/// every cross-section and vanishes outside the mode supports.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamField {
    pub geom: ChannelGeometry,
    pub modes: Vec<StreamMode>,
}

impl StreamField {
    /// Between one and four random modes supported inside `[a, b]`.
    pub fn random<R: Rng>(geom: &ChannelGeometry, a: f64, b: f64, rng: &mut R) -> Self {
        let count = rng.random_range(1..=4);
        let max_half = (0.5 * (b - a)).min(2.0);
        let min_half = max_half.min(0.5);
        let modes = (0..count)
            .map(|_| {
                let half_width = if max_half > min_half { rng.random_range(min_half..max_half) } else { max_half };
                let (lo, hi) = (a + half_width, b - half_width);
                let center = if hi > lo { rng.random_range(lo..hi) } else { 0.5 * (a + b) };
                StreamMode {
                    amplitude: rng.random_range(-1.0..1.0),
                    center,
                    half_width,
                    k: rng.random_range(1..=3),
                }
            })
            .collect();
        Self { geom: geom.clone(), modes }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.amplitude *= factor;
        }
        out
    }

    /// Smallest interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.modes.iter().map(|m| m.center - m.half_width).fold(f64::INFINITY, f64::min);
        let hi = self.modes.iter().map(|m| m.center + m.half_width).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Abscissae where the field is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.modes
            .iter()
            .flat_map(|m| [m.center - m.half_width, m.center, m.center + m.half_width])
            .collect()
    }
}

impl VectorField for StreamField {
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        let w = self.geom.eval_walls(x[0]);
        let width = w.width();
        let (dw, ddw) = (w.df2 - w.df1, w.ddf2 - w.ddf1);
        let xi = (x[1] - w.f1) / width;
        let xi1 = -(w.df1 + xi * dw) / width;
        let xi2 = 1.0 / width;
        let xi12 = -dw / (width * width);
        let xi11 = -((w.ddf1 + xi1 * dw + xi * ddw) * width - (w.df1 + xi * dw) * dw) / (width * width);
        let (mut p1, mut p2, mut p11, mut p12, mut p22) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for m in &self.modes {
            let s = (x[0] - m.center) / m.half_width;
            let (b0, b1, b2) = bump_profile(s);
            if b0 == 0.0 && b1 == 0.0 && b2 == 0.0 {
                continue;
            }
            let (b, db, ddb) = (
                m.amplitude * b0,
                m.amplitude * b1 / m.half_width,
                m.amplitude * b2 / (m.half_width * m.half_width),
            );
            let kp = m.k as f64 * std::f64::consts::PI;
            let (sn, cs) = (kp * xi).sin_cos();
            let (s0, s1, s2) = (sn, kp * cs, -kp * kp * sn);
            p1 += db * s0 + b * s1 * xi1;
            p2 += b * s1 * xi2;
            p11 += ddb * s0 + 2.0 * db * s1 * xi1 + b * s2 * xi1 * xi1 + b * s1 * xi11;
            p12 += db * s1 * xi2 + b * s2 * xi1 * xi2 + b * s1 * xi12;
            p22 += b * s2 * xi2 * xi2;
        }
        VectorSample { value: [p2, -p1], grad: [[p12, p22], [-p11, -p12]] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stream_fields_are_solenoidal_and_tangent() {
        let geom = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = StreamField::random(&geom, -4.0, 4.0, &mut rng);
            for k in 0..100 {
                let x1 = -4.0 + 8.0 * k as f64 / 99.0;
                let w = geom.eval_walls(x1);
                for j in 0..20 {
                    let x2 = w.f1 + w.width() * j as f64 / 19.0;
                    let s = f.eval([x1, x2]);
                    assert!((s.grad[0][0] + s.grad[1][1]).abs() < 1e-12);
                }
                let top = f.eval([x1, w.f2]);
                let n = w.upper_normal();
                assert!((top.value[0] * n[0] + top.value[1] * n[1]).abs() < 1e-12);
                let bottom = f.eval([x1, w.f1]);
                let n = w.lower_normal();
                assert!((bottom.value[0] * n[0] + bottom.value[1] * n[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stream_gradient_matches_differences() {
        let geom = ChannelGeometry::bump(0.3, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = StreamField::random(&geom, -3.0, 3.0, &mut rng);
        let h = 1e-6;
        for k in 0..40 {
            let x1 = -2.5 + 5.0 * k as f64 / 39.0;
            let w = geom.eval_walls(x1);
            let x = [x1, w.f1 + 0.37 * w.width()];
            let s = f.eval(x);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let (vp, vm) = (f.eval(xp).value, f.eval(xm).value);
                for i in 0..2 {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - s.grad[i][j]).abs() < 1e-6, "component {i}{j} at {x:?}");
                }
            }
        }
    }
}
