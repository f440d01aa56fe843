//! Finite-dimensional ℓ^r geometry: norms, duality maps and Bregman distances.
//!
//! A [`SpaceDescriptor`] fixes the norm exponent `r` and the power `p` of the
//! duality map `J_p`, the subdifferential of `x ↦ ‖x‖_r^p / p`. For `1 < r < ∞`
//! the space is smooth and uniformly convex, so `J_p` is single valued and has
//! the explicit form
//!
//! ```text
//! J_p(x)_j = ‖x‖_r^{p-r} |x_j|^{r-1} sign(x_j)
//! ```
//!
//! with inverse given by the duality map of the dual space `(r*, p*)`.
//!
//! All evaluations rescale by the norm before raising to powers, so large
//! conjugate exponents (`r* = 11` for `r = 1.1`) do not overflow.

use crate::error::{Error, Result};

/// Norm exponent `r` and duality power `p` of an ℓ^r space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceDescriptor {
    r: f64,
    p: f64,
}

impl SpaceDescriptor {
    pub fn new(r: f64, p: f64) -> Result<Self> {
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::Config(format!(
                "norm exponent r = {r} outside the smooth range 1 < r < ∞"
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Config(format!(
                "duality power p = {p} must satisfy p > 1"
            )));
        }
        Ok(Self { r, p })
    }

    /// Euclidean space with the identity duality map.
    pub fn hilbert() -> Self {
        Self { r: 2.0, p: 2.0 }
    }

    /// `ℓ^r` with `p = r`, where the duality map acts componentwise.
    pub fn componentwise(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn conjugate_r(&self) -> f64 {
        conjugate(self.r)
    }

    pub fn conjugate_p(&self) -> f64 {
        conjugate(self.p)
    }

    /// Descriptor of the dual space `(r*, p*)`.
    pub fn dual(&self) -> Self {
        Self {
            r: self.conjugate_r(),
            p: self.conjugate_p(),
        }
    }

    pub fn is_hilbert(&self) -> bool {
        self.r == 2.0 && self.p == 2.0
    }

    /// `‖x‖_r` without validating finiteness.
    pub fn norm(&self, x: &[f64]) -> f64 {
        norm_unchecked(x, self.r)
    }

    /// `‖x‖_r^p`.
    pub fn norm_pow(&self, x: &[f64]) -> f64 {
        powi_or_f(self.norm(x), self.p)
    }

    pub fn duality_map(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.duality_map_into(x, &mut out);
        out
    }

    /// Writes `J_p(x)` into `out`. Panics if the lengths differ.
    pub fn duality_map_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), out.len(), "duality map output length");
        let nx = self.norm(x);
        if nx == 0.0 {
            out.fill(0.0);
            return;
        }
        let scale = powi_or_f(nx, self.p - 1.0);
        let e = self.r - 1.0;
        if e == 1.0 {
            let s = scale / nx;
            for (o, &v) in out.iter_mut().zip(x) {
                *o = s * v;
            }
        } else {
            for (o, &v) in out.iter_mut().zip(x) {
                *o = if v == 0.0 {
                    0.0
                } else {
                    scale * (v.abs() / nx).powf(e) * v.signum()
                };
            }
        }
    }

    /// `J_p^{-1} = J_{p*}` of the dual space.
    pub fn inverse_duality_map(&self, xs: &[f64]) -> Vec<f64> {
        self.dual().duality_map(xs)
    }

    pub fn inverse_duality_map_into(&self, xs: &[f64], out: &mut [f64]) {
        self.dual().duality_map_into(xs, out)
    }

    /// `⟨J_p(z), w⟩` evaluated without materializing `J_p(z)`.
    fn pairing_with_dual_of(&self, z: &[f64], nz: f64, w: &[f64]) -> f64 {
        if nz == 0.0 {
            return 0.0;
        }
        let e = self.r - 1.0;
        let sum: f64 = if e == 1.0 {
            z.iter().zip(w).map(|(&a, &b)| a * b).sum::<f64>() / nz
        } else {
            z.iter()
                .zip(w)
                .filter(|(&a, _)| a != 0.0)
                .map(|(&a, &b)| (a.abs() / nz).powf(e) * a.signum() * b)
                .sum()
        };
        powi_or_f(nz, self.p - 1.0) * sum
    }

    /// Bregman distance `D(z, w) = ‖z‖^p/p* + ‖w‖^p/p − ⟨J_p(z), w⟩`.
    /// Panics if the lengths differ; see [`bregman_distance`] for the checked form.
    pub fn bregman(&self, z: &[f64], w: &[f64]) -> f64 {
        assert_eq!(z.len(), w.len(), "bregman distance operand lengths");
        let nz = self.norm(z);
        let nw = self.norm(w);
        let p = self.p;
        powi_or_f(nz, p) / self.conjugate_p() + powi_or_f(nw, p) / p
            - self.pairing_with_dual_of(z, nz, w)
    }
}

/// Hölder conjugate `t / (t − 1)`.
pub fn conjugate(t: f64) -> f64 {
    t / (t - 1.0)
}

fn powi_or_f(base: f64, e: f64) -> f64 {
    if e == 1.0 {
        base
    } else if e == 2.0 {
        base * base
    } else {
        base.powf(e)
    }
}

fn norm_unchecked(x: &[f64], r: f64) -> f64 {
    let m = x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    if r == 2.0 {
        let s: f64 = x.iter().map(|v| (v / m) * (v / m)).sum();
        m * s.sqrt()
    } else {
        let s: f64 = x
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| (v.abs() / m).powf(r))
            .sum();
        m * s.powf(1.0 / r)
    }
}

fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} contains non-finite entries"
        )))
    }
}

/// `(Σ |x_j|^r)^{1/r}`.
pub fn lr_norm(x: &[f64], r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::InvalidInput(format!(
            "norm exponent r = {r} must exceed 1"
        )));
    }
    check_finite(x, "vector")?;
    Ok(norm_unchecked(x, r))
}

pub fn duality_map(x: &[f64], desc: &SpaceDescriptor) -> Result<Vec<f64>> {
    check_finite(x, "primal vector")?;
    Ok(desc.duality_map(x))
}

pub fn inverse_duality_map(xs: &[f64], desc: &SpaceDescriptor) -> Result<Vec<f64>> {
    check_finite(xs, "dual vector")?;
    Ok(desc.inverse_duality_map(xs))
}

pub fn dual_pairing(xs: &[f64], x: &[f64]) -> Result<f64> {
    Error::check_len(xs.len(), x.len())?;
    Ok(xs.iter().zip(x).map(|(a, b)| a * b).sum())
}

pub fn bregman_distance(z: &[f64], w: &[f64], desc: &SpaceDescriptor) -> Result<f64> {
    Error::check_len(z.len(), w.len())?;
    check_finite(z, "first argument")?;
    check_finite(w, "second argument")?;
    Ok(desc.bregman(z, w))
}
