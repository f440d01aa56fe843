use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::rng_from_seed;
use crate::spaces::SpaceDescriptor;

/// Empirical stand-ins for the smoothness constant `G_{p*}` of the dual space
/// and the convexity constant `C_p` of the solution space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsConfig {
    pub g_pstar: f64,
    pub c_p: f64,
    pub estimation_samples: usize,
}

impl ConstantsConfig {
    /// Exact constants of a Hilbert space.
    pub fn hilbert() -> Self {
        Self {
            g_pstar: 1.0,
            c_p: 1.0,
            estimation_samples: 0,
        }
    }
}

const G_SAFETY: f64 = 1.2;
const C_SAFETY: f64 = 0.8;

/// Running max of `p*·D*(z*, w*) / ‖w* − z*‖^{p*}` and running min of
/// `p·D(z, w) / ‖w − z‖^p` over random pairs, scaled by 1.2 and 0.8.
///
/// Independent Gaussian pairs alone miss the extreme ratios, which sit near
/// sparse base points and at small separations. Sample `s` therefore uses a
/// dense or a single-spike base point (alternating) and a Gaussian difference
/// scaled by `10^{-((s/2) mod 4)}`. Pairs are drawn in a fixed order, so a
/// larger `samples` extends the same stream: `G` can only grow and `C` can
/// only shrink.
pub fn estimate_constants(
    desc: &SpaceDescriptor,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<ConstantsConfig> {
    if dim == 0 || samples == 0 {
        return Err(Error::InvalidInput(
            "dimension and sample count must be ≥ 1".into(),
        ));
    }
    let dual = desc.dual();
    let (p, ps) = (desc.p(), desc.conjugate_p());
    let mut rng = rng_from_seed(seed);

    let mut g_max = 0.0_f64;
    let mut c_min = f64::INFINITY;
    for s in 0..samples {
        let scale = 10f64.powi(-(((s / 2) % 4) as i32));
        let spiky = s % 2 == 1;
        let mut pair = || -> (Vec<f64>, Vec<f64>) {
            let mut z: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if spiky {
                let keep = rng.random_range(0..dim);
                z.iter_mut()
                    .enumerate()
                    .filter(|(j, _)| *j != keep)
                    .for_each(|(_, v)| *v *= 1e-3);
            }
            let w = z
                .iter()
                .map(|v| v + scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (z, w)
        };
        let (zs, ws) = pair();
        let (z, w) = pair();

        let d = dual.norm(&diff(&zs, &ws));
        if d > 0.0 {
            g_max = g_max.max(ps * dual.bregman(&zs, &ws) / d.powf(ps));
        }
        let d = desc.norm(&diff(&z, &w));
        if d > 0.0 {
            c_min = c_min.min(p * desc.bregman(&z, &w) / d.powf(p));
        }
    }
    if !(g_max > 0.0 && c_min.is_finite() && c_min > 0.0) {
        return Err(Error::InvalidInput("degenerate constant estimate".into()));
    }
    Ok(ConstantsConfig {
        g_pstar: G_SAFETY * g_max,
        c_p: C_SAFETY * c_min,
        estimation_samples: samples,
    })
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| y - x).collect()
}

/// Largest step with `μ^{p*−1} ≤ p* / (G_{p*} L_max^{p*})`.
pub fn theoretical_max_step(constants: &ConstantsConfig, l_max: f64, p_star: f64) -> f64 {
    (p_star / (constants.g_pstar * l_max.powf(p_star))).powf(1.0 / (p_star - 1.0))
}
