//! Channel domains `{f1(x1) < x2 < f2(x1)}` with walls that are flat
//! (`f1 = -1`, `f2 = 1`) outside `[-L, L]`, plus their triangulations.

pub(crate) mod mesh;
mod slab;

pub use mesh::{build_mesh, build_slab_mesh, BoundaryTag, TruncatedMesh, DEFAULT_QUALITY_FLOOR};
pub use slab::{slab_submesh, unit_slabs, SlabSelection};

use crate::error::{Error, Result};

/// Wall profile family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// Flat walls `x2 = ±1`.
    Straight,
    /// `f2 = 1 + a φ(x1/L)`, `f1 = -f2`, with `φ` the quintic bump.
    QuinticBump { amplitude: f64 },
}

/// Wall heights and their first two derivatives at one abscissa.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallEval {
    pub f1: f64,
    pub f2: f64,
    pub df1: f64,
    pub df2: f64,
    pub ddf1: f64,
    pub ddf2: f64,
}

impl WallEval {
    pub fn width(&self) -> f64 {
        self.f2 - self.f1
    }

    /// Outward unit normal of the upper wall.
    pub fn upper_normal(&self) -> [f64; 2] {
        let s = (1.0 + self.df2 * self.df2).sqrt();
        [-self.df2 / s, 1.0 / s]
    }

    /// Outward unit normal of the lower wall.
    pub fn lower_normal(&self) -> [f64; 2] {
        let s = (1.0 + self.df1 * self.df1).sqrt();
        [self.df1 / s, -1.0 / s]
    }
}

/// A channel `Ω = {f1(x1) < x2 < f2(x1)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelGeometry {
    pub profile: Profile,
    /// Walls are flat for `|x1| >= straight_from`.
    pub straight_from: f64,
    /// Lower bound `m` on the channel width.
    pub min_width: f64,
}

/// Quintic bump `φ(s) = 1 - S(|s|)` with `S(r) = 10r³ - 15r⁴ + 6r⁵`.
///
/// Returns `(φ, φ', φ'')`; the bump is C² on the real line with
/// `φ(0) = 1` and `φ = φ' = φ'' = 0` at `|s| >= 1`.
pub fn bump_profile(s: f64) -> (f64, f64, f64) {
    let r = s.abs();
    if r >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let sign = if s < 0.0 { -1.0 } else { 1.0 };
    let value = 1.0 - r * r * r * (10.0 + r * (-15.0 + 6.0 * r));
    let om = 1.0 - r;
    let d1 = -30.0 * r * r * om * om * sign;
    let d2 = -60.0 * r * om * (1.0 - 2.0 * r);
    (value, d1, d2)
}

impl ChannelGeometry {
    /// Flat channel of width 2; `straight_from` is kept as a nominal length scale.
    pub fn straight(straight_from: f64) -> Self {
        Self {
            profile: Profile::Straight,
            straight_from,
            min_width: 2.0,
        }
    }

    /// Symmetric bump of amplitude `a` and half-width `l`, validated against `min_width`.
    pub fn bump(amplitude: f64, half_width: f64, min_width: f64) -> Result<Self> {
        let geom = Self {
            profile: Profile::QuinticBump { amplitude },
            straight_from: half_width,
            min_width,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.straight_from.is_finite() && self.straight_from >= 0.0) {
            return Err(Error::Geometry(format!(
                "straightness threshold L = {} must be finite and nonnegative",
                self.straight_from
            )));
        }
        if !(self.min_width > 0.0) {
            return Err(Error::Geometry(format!(
                "minimum width m = {} must be positive",
                self.min_width
            )));
        }
        if let Profile::QuinticBump { amplitude } = self.profile {
            if !amplitude.is_finite() {
                return Err(Error::Geometry("bump amplitude must be finite".into()));
            }
            if amplitude != 0.0 && self.straight_from <= 0.0 {
                return Err(Error::Geometry(
                    "a nonzero bump needs a positive half-width L".into(),
                ));
            }
        }
        let narrowest = self.narrowest_width();
        if narrowest < self.min_width {
            return Err(Error::Geometry(format!(
                "channel width {narrowest} falls below the minimum m = {}",
                self.min_width
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        match self.profile {
            Profile::Straight => 0.0,
            Profile::QuinticBump { amplitude } => amplitude,
        }
    }

    /// Smallest value of `f2 - f1`.
    pub fn narrowest_width(&self) -> f64 {
        2.0 * (1.0 + self.amplitude().min(0.0))
    }

    /// Largest value of `f2 - f1`.
    pub fn widest(&self) -> f64 {
        2.0 * (1.0 + self.amplitude().max(0.0))
    }

    /// Wall heights and derivatives; exactly flat outside `[-L, L]`.
    pub fn eval_walls(&self, x1: f64) -> WallEval {
        let l = self.straight_from;
        let a = self.amplitude();
        if a == 0.0 || x1.abs() >= l {
            return WallEval {
                f1: -1.0,
                f2: 1.0,
                df1: 0.0,
                df2: 0.0,
                ddf1: 0.0,
                ddf2: 0.0,
            };
        }
        let (p, dp, ddp) = bump_profile(x1 / l);
        let f2 = 1.0 + a * p;
        let df2 = a * dp / l;
        let ddf2 = a * ddp / (l * l);
        WallEval {
            f1: -f2,
            f2,
            df1: -df2,
            df2,
            ddf1: -ddf2,
            ddf2,
        }
    }

    /// Upper bound of `|f2''|` (and `|f1''|`).
    pub fn max_curvature(&self) -> f64 {
        let l = self.straight_from;
        if self.amplitude() == 0.0 || l <= 0.0 {
            return 0.0;
        }
        // max |S''| on [0, 1] is attained at r = (3 ± √3)/6
        let r = (3.0 - 3f64.sqrt()) / 6.0;
        let s2 = 60.0 * r * (1.0 - r) * (1.0 - 2.0 * r);
        self.amplitude().abs() * s2 / (l * l)
    }

    /// Abscissae where the wall profile changes analytic form.
    pub fn breakpoints(&self) -> Vec<f64> {
        if self.amplitude() == 0.0 {
            Vec::new()
        } else {
            let l = self.straight_from;
            vec![-l, 0.0, l]
        }
    }

    /// Whether `x` lies in the closure of `Ω` up to `tol`.
    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        let w = self.eval_walls(x[0]);
        x[1] >= w.f1 - tol && x[1] <= w.f2 + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_outside_support() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let w = g.eval_walls(5.0);
        assert_eq!((w.f1, w.f2, w.df1, w.df2, w.ddf1, w.ddf2), (-1.0, 1.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn peak_and_junction() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        assert!((g.eval_walls(0.0).f2 - 1.2).abs() < 1e-15);
        for x in [-3.0, 3.0] {
            let w = g.eval_walls(x);
            assert_eq!(w.df2, 0.0);
            assert_eq!(w.ddf2, 0.0);
        }
        // approaching the junction from inside
        let w = g.eval_walls(3.0 - 1e-9);
        assert!(w.df2.abs() < 1e-12 && w.ddf2.abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let h = 1e-4;
        for k in 0..=600 {
            let x = -3.0 + 6.0 * k as f64 / 600.0;
            let w = g.eval_walls(x);
            let fd = (g.eval_walls(x + h).f2 - g.eval_walls(x - h).f2) / (2.0 * h);
            assert!((w.df2 - fd).abs() <= 1e-6, "x = {x}");
            let fd2 = (g.eval_walls(x + h).df2 - g.eval_walls(x - h).df2) / (2.0 * h);
            // f''' jumps at the junctions and at the crest
            assert!((w.ddf2 - fd2).abs() <= 1e-4, "x = {x}");
        }
    }

    #[test]
    fn curvature_bound_is_sharp() {
        let g = ChannelGeometry::bump(0.2, 1.5, 1.0).unwrap();
        let bound = g.max_curvature();
        let sampled = (0..=30000)
            .map(|k| g.eval_walls(-1.5 + 3.0 * k as f64 / 30000.0).ddf2.abs())
            .fold(0.0, f64::max);
        assert!(sampled <= bound * (1.0 + 1e-12));
        assert!(sampled >= bound * (1.0 - 1e-6));
    }

    #[test]
    fn rejects_narrow_channel() {
        assert!(matches!(
            ChannelGeometry::bump(-0.7, 3.0, 1.0),
            Err(Error::Geometry(_))
        ));
    }
}
