use super::cutoff::{HopfCutoff, TransitionCutoff, TransitionKind};
use crate::error::{Error, Result};
use crate::geometry::ChannelGeometry;
use crate::quadrature::LayerRule;

/// Layer thickness `ε` and transition offset `𝔡` of the carrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffParams {
    pub epsilon: f64,
    pub dist: f64,
}

impl CutoffParams {
    pub fn validate(&self, geom: &ChannelGeometry) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "layer thickness ε = {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if !(self.epsilon < 0.5 * geom.min_width) {
            return Err(Error::InvalidParameter(format!(
                "layer thickness ε = {} must be below m/2 = {}",
                self.epsilon,
                0.5 * geom.min_width
            )));
        }
        if !(self.dist > geom.straight_from) {
            return Err(Error::InvalidParameter(format!(
                "transition offset 𝔡 = {} must exceed L = {}",
                self.dist, geom.straight_from
            )));
        }
        Ok(())
    }
}

/// Flux, cutoffs and geometry of a carrier.
#[derive(Clone, Debug, PartialEq)]
pub struct CarrierParams {
    pub flux: f64,
    pub cutoffs: CutoffParams,
    pub geom: ChannelGeometry,
    pub transition: TransitionKind,
}

impl CarrierParams {
    pub fn new(geom: ChannelGeometry, flux: f64, epsilon: f64, dist: f64) -> Self {
        Self {
            flux,
            cutoffs: CutoffParams { epsilon, dist },
            geom,
            transition: TransitionKind::Triangular,
        }
    }
}

/// `G` with gradient and Hessian.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StreamSample {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Velocity and gradient, `grad[i][j] = ∂_j g_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CarrierSample {
    pub g: [f64; 2],
    pub grad: [[f64; 2]; 2],
}

/// Which of the two defining formulas of `g` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `g = (∂2G, -∂1G)`, used for `|x1| < 𝔡`.
    Inner,
    /// The transition formula towards `(Φ/2, 0)`, used for `|x1| ≥ 𝔡`.
    Outer,
}

/// The flux carrier `g` and its stream-like function `G = Φ μ(f2(x1) - x2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CarrierField {
    pub params: CarrierParams,
    pub mu: HopfCutoff,
    pub pi: TransitionCutoff,
}

impl CarrierField {
    pub fn new(params: CarrierParams) -> Result<Self> {
        params.geom.validate()?;
        params.cutoffs.validate(&params.geom)?;
        if !params.flux.is_finite() {
            return Err(Error::InvalidParameter("flux must be finite".into()));
        }
        let mu = HopfCutoff::new(params.cutoffs.epsilon)?;
        let pi = TransitionCutoff::new(params.cutoffs.dist, params.transition)?;
        Ok(Self { params, mu, pi })
    }

    pub fn flux(&self) -> f64 {
        self.params.flux
    }

    pub fn epsilon(&self) -> f64 {
        self.params.cutoffs.epsilon
    }

    pub fn dist(&self) -> f64 {
        self.params.cutoffs.dist
    }

    pub fn geometry(&self) -> &ChannelGeometry {
        &self.params.geom
    }

    /// `|x1|` beyond which `g ≡ (Φ/2, 0)`.
    pub fn far_field_start(&self) -> f64 {
        1.75 * self.dist()
    }

    /// Far-field shear state `U = (Φ/2, 0)`.
    pub fn far_field(&self) -> [f64; 2] {
        [0.5 * self.flux(), 0.0]
    }

    fn check_domain(&self, x: [f64; 2]) -> Result<()> {
        let tol = 1e-12 * (1.0 + x[1].abs());
        if self.params.geom.contains(x, tol) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x1: x[0], x2: x[1] })
        }
    }

    /// `G`, `∇G`, `∇²G`, with the constant continuation of `μ` outside the channel.
    pub fn stream_unchecked(&self, x: [f64; 2]) -> StreamSample {
        let phi = self.flux();
        let w = self.params.geom.eval_walls(x[0]);
        let (m, dm, ddm) = self.mu.eval(w.f2 - x[1]);
        let (d2, dd2) = (w.df2, w.ddf2);
        StreamSample {
            value: phi * m,
            grad: [phi * dm * d2, -phi * dm],
            hess: [
                [phi * (ddm * d2 * d2 + dm * dd2), -phi * ddm * d2],
                [-phi * ddm * d2, phi * ddm],
            ],
        }
    }

    pub fn stream_g(&self, x: [f64; 2]) -> Result<StreamSample> {
        self.check_domain(x)?;
        Ok(self.stream_unchecked(x))
    }

    /// Evaluates one branch formula regardless of `x1`.
    pub fn eval_branch(&self, x: [f64; 2], branch: Branch) -> CarrierSample {
        let s = self.stream_unchecked(x);
        let [g1x, g2x] = s.grad;
        let [[h11, h12], [_, h22]] = s.hess;
        match branch {
            Branch::Inner => CarrierSample {
                g: [g2x, -g1x],
                grad: [[h12, h22], [-h11, -h12]],
            },
            Branch::Outer => {
                let half = 0.5 * self.flux();
                let (p, dp, ddp) = self.pi.eval(x[0]);
                let lift = s.value - half * (x[1] + 1.0);
                CarrierSample {
                    g: [g2x * (1.0 - p) + half * p, dp * lift],
                    grad: [
                        [h12 * (1.0 - p) - g2x * dp + half * dp, h22 * (1.0 - p)],
                        [ddp * lift + dp * g1x, dp * (g2x - half)],
                    ],
                }
            }
        }
    }

    /// `g` and `∇g` without the domain check (quadrature points on wall
    /// chords may lie marginally outside the channel).
    pub fn eval_unchecked(&self, x: [f64; 2]) -> CarrierSample {
        if x[0].abs() >= self.far_field_start() {
            return CarrierSample { g: self.far_field(), grad: [[0.0; 2]; 2] };
        }
        let branch = if x[0].abs() < self.dist() { Branch::Inner } else { Branch::Outer };
        self.eval_branch(x, branch)
    }

    pub fn carrier_eval(&self, x: [f64; 2]) -> Result<CarrierSample> {
        self.check_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Abscissae at which `g` changes analytic form.
    pub fn x_breakpoints(&self) -> Vec<f64> {
        let mut b = self.params.geom.breakpoints();
        b.extend(self.pi.breakpoints());
        b.push(-self.dist());
        b.push(self.dist());
        b.sort_by(|p, q| p.total_cmp(q));
        b.dedup();
        b
    }

    /// Inner quadrature graded towards the upper wall through the layer.
    pub fn layer_rule(&self, n: usize, max_panel: f64) -> LayerRule<'_> {
        LayerRule {
            geom: &self.params.geom,
            breaks: self.mu.breakpoints().to_vec(),
            grade: Some((self.mu.delta, self.mu.outer)),
            ratio: 2.0,
            n,
            max_panel,
        }
    }
}
