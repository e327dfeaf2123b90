//! Controlled periodic orbits and their Floquet exponents.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cocycle::{compound, gamma_cocycle, CocycleOptions, ScaledProduct};
use crate::error::{Error, Result};
use crate::system::{flow_end, fundamental_chunks, state_and_fundamental, ControlSignal, ControlSystem};

/// `(u, x)` with `u` periodic of period `τ` and `φ(τ, x, u) ≈ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub x: Vec<f64>,
    pub signal: ControlSignal,
    pub period: f64,
    pub defect: f64,
    pub tolerance: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl PeriodicOrbit {
    /// Validates closure; the default tolerance is `1e-6·diam(state_box)`.
    pub fn new(
        sys: &ControlSystem,
        x: Vec<f64>,
        signal: ControlSignal,
        tolerance: Option<f64>,
        opts: &CocycleOptions,
    ) -> Result<Self> {
        let signal = if signal.is_periodic() { signal } else { signal.into_periodic()? };
        let period = signal.duration();
        let tolerance = tolerance.unwrap_or(1e-6 * sys.state_box().diameter());
        let y = flow_end(sys, &x, &signal, period, &opts.integration)?;
        let defect = norm(&y.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !(defect <= tolerance) {
            return Err(Error::OrbitNotClosed { defect, tolerance });
        }
        Ok(Self { x, signal, period, defect, tolerance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "cocycle")]
pub enum FloquetCocycle {
    Gamma { k: usize },
    Kappa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetValue {
    pub value: f64,
    /// `(n, κ_{nτ}/(nτ))` along the doubling sequence (κ only).
    pub sequence: Vec<(u64, f64)>,
    /// Whether `κ_{2nτ} ≤ 2κ_{nτ}` held along the sequence.
    pub fekete_monotone: bool,
}

/// Number of period doublings in the κ limit, reaching `n = 2^20`.
pub const KAPPA_DOUBLINGS: usize = 20;

/// Monodromy matrix `dφ_{τ,u}(x)` of the orbit.
pub fn monodromy(sys: &ControlSystem, orbit: &PeriodicOrbit, opts: &CocycleOptions) -> Result<DMatrix<f64>> {
    let (_, chunks) = fundamental_chunks(sys, &orbit.x, &orbit.signal, orbit.period, &opts.integration, opts.chunk)?;
    let d = sys.dim();
    Ok(chunks.iter().fold(DMatrix::identity(d, d), |acc, c| c * acc))
}

/// Moduli of the Floquet multipliers, largest first.
pub fn floquet_multipliers(sys: &ControlSystem, orbit: &PeriodicOrbit, opts: &CocycleOptions) -> Result<Vec<f64>> {
    let m = monodromy(sys, orbit, opts)?;
    let mut mods: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| b.total_cmp(a));
    Ok(mods)
}

pub fn floquet_exponent_detailed(
    sys: &ControlSystem,
    orbit: &PeriodicOrbit,
    which: FloquetCocycle,
    opts: &CocycleOptions,
) -> Result<FloquetValue> {
    let y = flow_end(sys, &orbit.x, &orbit.signal, orbit.period, &opts.integration)?;
    let defect = norm(&y.iter().zip(&orbit.x).map(|(a, b)| a - b).collect::<Vec<_>>());
    if !(defect <= orbit.tolerance) {
        return Err(Error::OrbitNotClosed { defect, tolerance: orbit.tolerance });
    }
    let tau = orbit.period;
    match which {
        FloquetCocycle::Gamma { k } => {
            let g = gamma_cocycle(sys, &orbit.x, &orbit.signal, tau, k, opts)?;
            Ok(FloquetValue { value: g / tau, sequence: Vec::new(), fekete_monotone: true })
        }
        FloquetCocycle::Kappa => {
            let m = monodromy(sys, orbit, opts)?;
            let d = sys.dim();
            let mut powers: Vec<ScaledProduct> = (1..=d)
                .map(|k| {
                    let c = compound(&m, k);
                    let mut p = ScaledProduct::identity(c.nrows());
                    p.left_mul(&c);
                    p
                })
                .collect();
            let mut sequence = Vec::with_capacity(KAPPA_DOUBLINGS + 1);
            let mut prev: Option<f64> = None;
            let mut monotone = true;
            for j in 0..=KAPPA_DOUBLINGS {
                if j > 0 {
                    powers.iter_mut().for_each(|p| p.square());
                }
                let kappa = powers.iter().map(|p| p.log_norm()).fold(0.0, f64::max);
                let n = 1u64 << j;
                if let Some(p) = prev {
                    if kappa > 2.0 * p + 1e-8 * (1.0 + p.abs()) {
                        monotone = false;
                    }
                }
                prev = Some(kappa);
                sequence.push((n, kappa / (n as f64 * tau)));
            }
            if !monotone {
                log::warn!("κ doubling sequence violates subadditivity on the orbit at {:?}", orbit.x);
            }
            let value = sequence.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
            Ok(FloquetValue { value, sequence, fekete_monotone: monotone })
        }
    }
}

/// Floquet exponent of `γ` (one period) or `κ` (limit over period multiples).
pub fn floquet_exponent(
    sys: &ControlSystem,
    orbit: &PeriodicOrbit,
    which: FloquetCocycle,
    opts: &CocycleOptions,
) -> Result<f64> {
    Ok(floquet_exponent_detailed(sys, orbit, which, opts)?.value)
}

/// Equilibrium of the constant letter `value` by damped Newton from `seed`,
/// packaged as a periodic orbit of the given period.
pub fn equilibrium_orbit(
    sys: &ControlSystem,
    seed: &[f64],
    value: &[f64],
    period: f64,
    opts: &CocycleOptions,
) -> Result<PeriodicOrbit> {
    let d = sys.dim();
    let mut x = DVector::from_column_slice(seed);
    let mut f = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let residual = |x: &DVector<f64>, f: &mut Vec<f64>| {
        sys.rhs(x.as_slice(), value, f);
        norm(f)
    };
    let mut r = residual(&x, &mut f);
    let mut iters = 0;
    while r > 1e-13 * (1.0 + x.norm()) {
        iters += 1;
        if iters > 100 {
            return Err(Error::ShootingFailed { iterations: iters, defect: r });
        }
        sys.rhs_jacobian(x.as_slice(), value, &mut jac);
        let j = DMatrix::from_row_slice(d, d, &jac);
        let step = j.lu().solve(&DVector::from_column_slice(&f)).ok_or(Error::ShootingFailed {
            iterations: iters,
            defect: r,
        })?;
        let mut damp = 1.0;
        loop {
            let cand = &x - &step * damp;
            let rc = residual(&cand, &mut f);
            if rc < r || damp < 1e-6 {
                x = cand;
                r = rc;
                break;
            }
            damp *= 0.5;
        }
        if damp < 1e-6 {
            return Err(Error::ShootingFailed { iterations: iters, defect: r });
        }
    }
    let signal = ControlSignal::constant(value.to_vec(), period)?.into_periodic()?;
    PeriodicOrbit::new(sys, x.as_slice().to_vec(), signal, None, opts)
}

/// Periodic orbit through the periodic signal `signal` by single shooting:
/// Newton on `φ(τ, x, u) − x` with Jacobian `D − I`.
pub fn shoot_periodic_orbit(
    sys: &ControlSystem,
    seed: &[f64],
    signal: &ControlSignal,
    opts: &CocycleOptions,
) -> Result<PeriodicOrbit> {
    let d = sys.dim();
    let signal = if signal.is_periodic() { signal.clone() } else { signal.clone().into_periodic()? };
    let tau = signal.duration();
    let tol = 1e-6 * sys.state_box().diameter();
    let mut x = seed.to_vec();
    let mut defect = f64::INFINITY;
    for it in 0..50 {
        let (y, m) = state_and_fundamental(sys, &x, &signal, tau, &opts.integration)?;
        let g = DVector::from_iterator(d, y.iter().zip(&x).map(|(a, b)| a - b));
        defect = g.norm();
        if defect <= 1e-3 * tol {
            return PeriodicOrbit::new(sys, x, signal, Some(tol), opts);
        }
        let j = m - DMatrix::identity(d, d);
        let step = j
            .lu()
            .solve(&g)
            .ok_or(Error::ShootingFailed { iterations: it + 1, defect })?;
        let mut damp = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - damp * s).collect();
            let ok = flow_end(sys, &cand, &signal, tau, &opts.integration).map(|y| {
                norm(&y.iter().zip(&cand).map(|(a, b)| a - b).collect::<Vec<_>>())
            });
            match ok {
                Ok(dc) if dc < defect || damp < 1e-4 => {
                    x = cand;
                    break;
                }
                _ if damp < 1e-4 => return Err(Error::ShootingFailed { iterations: it + 1, defect }),
                _ => damp *= 0.5,
            }
        }
    }
    Err(Error::ShootingFailed { iterations: 50, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Bilinear2d, ControlRange, ScalarLinear, StateBox};
    use std::sync::Arc;

    fn scalar(a: f64) -> ControlSystem {
        ControlSystem::new(
            Arc::new(ScalarLinear::default()),
            vec![a],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-2.0], vec![2.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_equilibrium_exponents() {
        let sys = scalar(1.0);
        let o = CocycleOptions::default();
        for tau in [0.5, 1.0, 2.5] {
            let orbit = equilibrium_orbit(&sys, &[0.3], &[-1.0], tau, &o).unwrap();
            assert!((orbit.x[0] - 1.0).abs() < 1e-12);
            let g = floquet_exponent(&sys, &orbit, FloquetCocycle::Gamma { k: 1 }, &o).unwrap();
            let k = floquet_exponent(&sys, &orbit, FloquetCocycle::Kappa, &o).unwrap();
            assert!((g - 1.0).abs() < 1e-6);
            assert!((k - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn contraction_kappa_is_zero() {
        let sys = scalar(-1.0);
        let o = CocycleOptions::default();
        let orbit = equilibrium_orbit(&sys, &[0.0], &[0.5], 1.0, &o).unwrap();
        assert_eq!(floquet_exponent(&sys, &orbit, FloquetCocycle::Kappa, &o).unwrap(), 0.0);
    }

    #[test]
    fn open_orbit_is_rejected() {
        let sys = scalar(1.0);
        let u = ControlSignal::constant(vec![0.0], 1.0).unwrap();
        let r = PeriodicOrbit::new(&sys, vec![0.5], u, None, &CocycleOptions::default());
        assert!(matches!(r, Err(Error::OrbitNotClosed { .. })));
    }

    #[test]
    fn shooting_on_bilinear_saddle() {
        let sys = ControlSystem::new(
            Arc::new(Bilinear2d::default()),
            vec![1.0],
            ControlRange::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap(),
        )
        .unwrap();
        let o = CocycleOptions::default();
        let u = ControlSignal::from_pieces(&[0.6, 0.4], vec![vec![1.0], vec![-1.0]]).unwrap();
        let orbit = shoot_periodic_orbit(&sys, &[0.0, 0.0], &u, &o).unwrap();
        let mods = floquet_multipliers(&sys, &orbit, &o).unwrap();
        assert!(mods[0] > 1.0 && mods[1] < 1.0);
        let g = floquet_exponent(&sys, &orbit, FloquetCocycle::Gamma { k: 1 }, &o).unwrap();
        let k = floquet_exponent_detailed(&sys, &orbit, FloquetCocycle::Kappa, &o).unwrap();
        assert!(k.fekete_monotone);
        assert!((g - k.value).abs() < 1e-5, "gamma {g} kappa {}", k.value);
        assert!((g - mods[0].ln() / orbit.period).abs() < 1e-6);
    }
}
