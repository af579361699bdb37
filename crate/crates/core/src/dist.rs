//! Prior and noise distributions used by the benchmark models.

use rand_distr::Distribution as RandDistribution;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Elementary distributions appearing in the model priors.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    InverseGamma { shape: f64, scale: f64 },
    Dirichlet { concentration: Vec<f64> },
    Exponential { rate: f64 },
    HalfCauchy { scale: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Distribution::Normal { sd, .. } => *sd > 0.0,
            Distribution::Uniform { lo, hi } => lo < hi,
            Distribution::InverseGamma { shape, scale } => *shape > 0.0 && *scale > 0.0,
            Distribution::Dirichlet { concentration } => {
                !concentration.is_empty() && concentration.iter().all(|&a| a > 0.0)
            }
            Distribution::Exponential { rate } => *rate > 0.0,
            Distribution::HalfCauchy { scale } => *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    /// Draw once. Dirichlet returns a probability vector; everything else a
    /// single-element vector.
    pub fn sample(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self {
            Distribution::Normal { mean, sd } => vec![normal(*mean, *sd, rng)],
            Distribution::Uniform { lo, hi } => vec![rng.uniform_in(*lo, *hi)],
            Distribution::InverseGamma { shape, scale } => {
                vec![inverse_gamma(*shape, *scale, rng)]
            }
            Distribution::Dirichlet { concentration } => dirichlet(concentration, rng),
            Distribution::Exponential { rate } => vec![exponential(*rate, rng)],
            Distribution::HalfCauchy { scale } => vec![half_cauchy(*scale, rng)],
        })
    }

    /// Draw a scalar; errors on the vector-valued Dirichlet.
    pub fn sample_scalar(&self, rng: &mut RngStream) -> Result<f64> {
        match self {
            Distribution::Dirichlet { .. } => Err(Error::Domain(
                "Dirichlet draws are vectors; use sample()".into(),
            )),
            _ => Ok(self.sample(rng)?[0]),
        }
    }
}

pub fn normal(mean: f64, sd: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(sd >= 0.0 && sd.is_finite());
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    mean + sd * z
}

pub fn exponential(rate: f64, rng: &mut RngStream) -> f64 {
    rand_distr::Exp::new(rate)
        .expect("validated parameters")
        .sample(rng)
}

/// Gamma with shape/scale parameterisation (mean = shape * scale).
pub fn gamma(shape: f64, scale: f64, rng: &mut RngStream) -> f64 {
    rand_distr::Gamma::new(shape, scale)
        .expect("validated parameters")
        .sample(rng)
}

/// Inverse gamma: 1/X with X ~ Gamma(shape, rate = scale). The denominator is
/// floored at the smallest normal double so extreme hyper values cannot
/// underflow it to zero (and the result to infinity).
pub fn inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> f64 {
    1.0 / gamma(shape, 1.0 / scale, rng).max(f64::MIN_POSITIVE)
}

/// Dirichlet via normalised Gamma(alpha_i, 1) draws. Gamma draws are floored
/// at the smallest positive double so tiny concentrations cannot underflow a
/// component to exactly zero.
pub fn dirichlet(concentration: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let gs: Vec<f64> = concentration
        .iter()
        .map(|&a| gamma(a, 1.0, rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = gs.iter().sum();
    gs.into_iter().map(|g| g / total).collect()
}

/// Half-Cauchy as |scale * tan(pi (u - 1/2))|.
pub fn half_cauchy(scale: f64, rng: &mut RngStream) -> f64 {
    (scale * (std::f64::consts::PI * (rng.uniform() - 0.5)).tan()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;

    #[test]
    fn uniform_support_containment() {
        let d = Distribution::Uniform {
            lo: 2.0,
            hi: 2.000001,
        };
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            let x = d.sample_scalar(&mut rng).unwrap();
            assert!((2.0..=2.000001).contains(&x));
        }
    }

    #[test]
    fn normal_mean_clt() {
        // CLT bound: mean of 1e6 N(3,1) draws within 3 sigma/sqrt(N) = 0.003;
        // the stated tolerance is 0.01.
        let d = Distribution::Normal { mean: 3.0, sd: 1.0 };
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| d.sample_scalar(&mut rng).unwrap())
            .collect();
        assert!((mean(&xs) - 3.0).abs() < 0.01);
    }

    #[test]
    fn dirichlet_simplex_membership() {
        let d = Distribution::Dirichlet {
            concentration: vec![1.0, 1.0, 1.0],
        };
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            let v = d.sample(&mut rng).unwrap();
            assert_eq!(v.len(), 3);
            assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Distribution::Normal { mean: 0.0, sd: 0.0 }
            .validate()
            .is_err());
        assert!(Distribution::Uniform { lo: 1.0, hi: 1.0 }
            .validate()
            .is_err());
        assert!(Distribution::InverseGamma {
            shape: -1.0,
            scale: 1.0
        }
        .validate()
        .is_err());
        assert!(Distribution::Dirichlet {
            concentration: vec![1.0, 0.0]
        }
        .validate()
        .is_err());
        assert!(Distribution::Exponential { rate: 0.0 }.validate().is_err());
        assert!(Distribution::HalfCauchy { scale: -2.0 }.validate().is_err());
    }

    #[test]
    fn exponential_mean() {
        let mut rng = RngStream::new(4, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| exponential(2.0, &mut rng)).collect();
        assert!((mean(&xs) - 0.5).abs() < 0.01);
    }

    #[test]
    fn inverse_gamma_mean() {
        // mean = scale / (shape - 1) for shape > 1
        let mut rng = RngStream::new(5, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| inverse_gamma(4.0, 6.0, &mut rng))
            .collect();
        assert!((mean(&xs) - 2.0).abs() < 0.02);
    }

    #[test]
    fn half_cauchy_positive_and_median() {
        // median of |C(0, s)| is s.
        let mut rng = RngStream::new(6, 0);
        let xs: Vec<f64> = (0..200_000).map(|_| half_cauchy(1.5, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 0.0));
        let med = crate::stats::empirical_quantile(&xs, 0.5).unwrap();
        assert!((med - 1.5).abs() < 0.03, "median {med}");
    }

    #[test]
    fn reproducible_given_stream() {
        let d = Distribution::Dirichlet {
            concentration: vec![0.5, 1.5, 2.5],
        };
        let a = d.sample(&mut RngStream::new(9, 77)).unwrap();
        let b = d.sample(&mut RngStream::new(9, 77)).unwrap();
        assert_eq!(a, b);
    }
}
