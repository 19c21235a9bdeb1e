//! Mode concentration of powered densities on a grid.
//!
//! Raising a density to the `N`-th power and renormalizing,
//! `p_N(h) = p(h)^N / sum p^N`, moves probability mass onto the global mode
//! as `N` grows. [`mode_mass`] measures the mass in a hypercube window of
//! edge `tau` centered on the mode, so a sweep over `N` shows the
//! concentration.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("grids must be 1-D or 2-D with a positive cell count per axis")]
    BadShape,
    #[error("cell edge must be positive and finite")]
    BadCellEdge,
    #[error("density values must be finite and non-negative with at least one positive cell")]
    BadValues,
    #[error("power must be at least 1")]
    ZeroPower,
    #[error("density vanished after powering")]
    Vanished,
    #[error("global maximum is shared by {0} cells; the density has no single mode")]
    TiedMaxima(usize),
    #[error("window edge {tau} is smaller than one cell ({cell_edge})")]
    WindowTooSmall { tau: f64, cell_edge: f64 },
}

/// Piecewise-constant density over a regular grid of square cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    shape: Vec<usize>,
    lower: Vec<f64>,
    cell_edge: f64,
    /// Density value per cell, row-major over `shape`.
    values: Vec<f64>,
}

impl GridDensity {
    /// Normalizes non-negative `weights` into a density on the grid.
    pub fn new(
        shape: &[usize],
        lower: &[f64],
        cell_edge: f64,
        weights: Vec<f64>,
    ) -> Result<Self, TheoryError> {
        if !(1..=2).contains(&shape.len())
            || shape.iter().any(|&n| n == 0)
            || lower.len() != shape.len()
            || weights.len() != shape.iter().product::<usize>()
        {
            return Err(TheoryError::BadShape);
        }
        if !(cell_edge.is_finite() && cell_edge > 0.0) {
            return Err(TheoryError::BadCellEdge);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().all(|&w| w == 0.0) {
            return Err(TheoryError::BadValues);
        }
        let mut grid = GridDensity {
            shape: shape.to_vec(),
            lower: lower.to_vec(),
            cell_edge,
            values: weights,
        };
        grid.renormalize()?;
        Ok(grid)
    }

    /// Gaussian bump on `cells` cells spanning `[lo, hi]`.
    pub fn gaussian_1d(cells: usize, lo: f64, hi: f64, mean: f64, sd: f64) -> Result<Self, TheoryError> {
        Self::mixture_1d(cells, lo, hi, &[(1.0, mean, sd)])
    }

    /// Mixture of Gaussian bumps given as `(weight, mean, sd)`.
    pub fn mixture_1d(
        cells: usize,
        lo: f64,
        hi: f64,
        components: &[(f64, f64, f64)],
    ) -> Result<Self, TheoryError> {
        if cells == 0 || !(hi > lo) {
            return Err(TheoryError::BadShape);
        }
        let edge = (hi - lo) / cells as f64;
        let weights = (0..cells)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * edge;
                components
                    .iter()
                    .map(|&(w, m, s)| w * gaussian(x, m, s))
                    .sum()
            })
            .collect();
        Self::new(&[cells], &[lo], edge, weights)
    }

    /// Isotropic Gaussian on a `cells x cells` grid over `[lo, hi]^2`.
    pub fn gaussian_2d(cells: usize, lo: f64, hi: f64, mean: [f64; 2], sd: f64) -> Result<Self, TheoryError> {
        if cells == 0 || !(hi > lo) {
            return Err(TheoryError::BadShape);
        }
        let edge = (hi - lo) / cells as f64;
        let mut weights = Vec::with_capacity(cells * cells);
        for r in 0..cells {
            for c in 0..cells {
                let x = lo + (r as f64 + 0.5) * edge;
                let y = lo + (c as f64 + 0.5) * edge;
                weights.push(gaussian(x, mean[0], sd) * gaussian(y, mean[1], sd));
            }
        }
        Self::new(&[cells, cells], &[lo, lo], edge, weights)
    }

    pub fn uniform(shape: &[usize], lower: &[f64], cell_edge: f64) -> Result<Self, TheoryError> {
        let n = shape.iter().product();
        Self::new(shape, lower, cell_edge, vec![1.0; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_edge(&self) -> f64 {
        self.cell_edge
    }

    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.cell_edge, self.shape.len() as f64)
    }

    /// Probability mass of each cell.
    pub fn masses(&self) -> Vec<f64> {
        let vol = self.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    /// Integral of the density over the grid.
    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Center of cell `index` (row-major).
    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        self.cell_coords(index)
            .iter()
            .zip(&self.lower)
            .map(|(&i, lo)| lo + (i as f64 + 0.5) * self.cell_edge)
            .collect()
    }

    fn cell_coords(&self, index: usize) -> Vec<usize> {
        match self.shape.as_slice() {
            [_] => vec![index],
            [_, cols] => vec![index / cols, index % cols],
            _ => unreachable!("shape validated on construction"),
        }
    }

    /// Index of the unique largest cell.
    pub fn argmax(&self) -> Result<usize, TheoryError> {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied = self.values.iter().filter(|&&v| v == max).count();
        if tied > 1 {
            return Err(TheoryError::TiedMaxima(tied));
        }
        Ok(self.values.iter().position(|&v| v == max).expect("non-empty grid"))
    }

    fn renormalize(&mut self) -> Result<(), TheoryError> {
        let vol = self.cell_volume();
        let z: f64 = self.values.iter().map(|v| v * vol).sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(TheoryError::Vanished);
        }
        self.values.iter_mut().for_each(|v| *v /= z);
        Ok(())
    }
}

fn gaussian(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    libm::exp(-0.5 * z * z)
}

/// `p^n`, renormalized. Computed in the log domain so large powers do not
/// underflow.
pub fn power_density(p: &GridDensity, n: u32) -> Result<GridDensity, TheoryError> {
    if n == 0 {
        return Err(TheoryError::ZeroPower);
    }
    if n == 1 {
        return Ok(p.clone());
    }
    let logs: Vec<f64> = p.values.iter().map(|&v| libm::log(v)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = logs
        .iter()
        .map(|&l| libm::exp(n as f64 * (l - max)))
        .collect();
    let mut out = GridDensity {
        values,
        ..p.clone()
    };
    out.renormalize()?;
    Ok(out)
}

/// Mass within the axis-aligned window of edge `tau` centered on the mode
/// cell. A cell belongs to the window when its center lies inside it.
pub fn mode_mass(p: &GridDensity, tau: f64) -> Result<f64, TheoryError> {
    // Tolerance for cell centers sitting exactly on the window boundary.
    const SLACK: f64 = 1e-9;
    if !(tau >= p.cell_edge * (1.0 - SLACK)) {
        return Err(TheoryError::WindowTooSmall {
            tau,
            cell_edge: p.cell_edge,
        });
    }
    let mode = p.argmax()?;
    let center = p.cell_coords(mode);
    let reach = tau / 2.0 / p.cell_edge + SLACK;
    let vol = p.cell_volume();
    Ok(p.values
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            p.cell_coords(*i)
                .iter()
                .zip(&center)
                .all(|(&a, &b)| (a as f64 - b as f64).abs() <= reach)
        })
        .map(|(_, v)| v * vol)
        .sum())
}

/// `(N, mode_mass(p^N, tau))` for every `N` in `powers`.
pub fn concentration_report(
    p: &GridDensity,
    tau: f64,
    powers: &[u32],
) -> Result<Vec<(u32, f64)>, TheoryError> {
    powers
        .iter()
        .map(|&n| Ok((n, mode_mass(&power_density(p, n)?, tau)?)))
        .collect()
}

/// Built-in densities used by the demo and the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinDensity {
    /// Single Gaussian bump, sd 0.3, slightly off-center on `[-1, 1]`.
    Gaussian,
    /// Two bumps of unequal height; the taller one is the global mode.
    Bimodal,
    /// Constant density: every cell ties for the maximum.
    Uniform,
    /// Isotropic 2-D Gaussian on `[-1, 1]^2`.
    Gaussian2d,
}

impl BuiltinDensity {
    pub const ALL: [BuiltinDensity; 4] = [
        BuiltinDensity::Gaussian,
        BuiltinDensity::Bimodal,
        BuiltinDensity::Uniform,
        BuiltinDensity::Gaussian2d,
    ];

    /// Window edge used when none is given.
    pub const DEFAULT_TAU: f64 = 0.3;

    pub fn name(self) -> &'static str {
        match self {
            BuiltinDensity::Gaussian => "gaussian",
            BuiltinDensity::Bimodal => "bimodal",
            BuiltinDensity::Uniform => "uniform",
            BuiltinDensity::Gaussian2d => "gaussian2d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn build(self) -> GridDensity {
        let grid = match self {
            BuiltinDensity::Gaussian => GridDensity::gaussian_1d(201, -1.0, 1.0, 0.1, 0.3),
            BuiltinDensity::Bimodal => GridDensity::mixture_1d(
                201,
                -1.0,
                1.0,
                &[(0.6, -0.4, 0.15), (0.4, 0.45, 0.15)],
            ),
            BuiltinDensity::Uniform => GridDensity::uniform(&[200], &[-1.0], 0.01),
            BuiltinDensity::Gaussian2d => {
                GridDensity::gaussian_2d(61, -1.0, 1.0, [0.1, -0.2], 0.35)
            }
        };
        grid.expect("built-in densities are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_stays_uniform() {
        let u = BuiltinDensity::Uniform.build();
        for n in [1, 2, 7, 64] {
            let p = power_density(&u, n).unwrap();
            let first = p.values()[0];
            assert!(p.values().iter().all(|&v| (v - first).abs() < 1e-12));
            assert!((p.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cell_power() {
        // masses (0.6, 0.4) squared: (0.36, 0.16) / 0.52
        let p = GridDensity::new(&[2], &[0.0], 0.5, vec![0.6, 0.4]).unwrap();
        let q = power_density(&p, 2).unwrap();
        let m = q.masses();
        assert!((m[0] - 0.36 / 0.52).abs() < 1e-12);
        assert!((m[1] - 0.16 / 0.52).abs() < 1e-12);
        assert!((m[0] - 0.6923).abs() < 1e-4);
    }

    #[test]
    fn power_one_is_identity() {
        let p = BuiltinDensity::Bimodal.build();
        assert_eq!(power_density(&p, 1).unwrap(), p);
    }

    #[test]
    fn zero_power_rejected() {
        assert_eq!(
            power_density(&BuiltinDensity::Gaussian.build(), 0).unwrap_err(),
            TheoryError::ZeroPower
        );
    }

    #[test]
    fn whole_grid_window_holds_everything() {
        let p = BuiltinDensity::Gaussian.build();
        assert!((mode_mass(&p, 10.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirac_density() {
        let mut w = vec![0.0; 11];
        w[4] = 1.0;
        let p = GridDensity::new(&[11], &[0.0], 0.1, w).unwrap();
        for tau in [0.1, 0.3, 5.0] {
            assert!((mode_mass(&p, tau).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_and_small_windows_rejected() {
        let u = BuiltinDensity::Uniform.build();
        assert_eq!(mode_mass(&u, 0.3).unwrap_err(), TheoryError::TiedMaxima(200));
        let g = BuiltinDensity::Gaussian.build();
        assert!(matches!(
            mode_mass(&g, 0.001),
            Err(TheoryError::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn powering_keeps_the_argmax() {
        for d in [BuiltinDensity::Gaussian, BuiltinDensity::Bimodal, BuiltinDensity::Gaussian2d] {
            let p = d.build();
            for n in [2, 5, 40, 1000] {
                assert_eq!(power_density(&p, n).unwrap().argmax(), p.argmax());
            }
        }
    }

    #[test]
    fn bimodal_concentrates_on_taller_bump() {
        let p = BuiltinDensity::Bimodal.build();
        let mode = p.argmax().unwrap();
        assert!(p.cell_center(mode)[0] < 0.0);
        let report = concentration_report(&p, 0.3, &[1, 4, 16, 64, 256]).unwrap();
        assert!(report.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(report.last().unwrap().1 > 1.0 - 1e-6);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert_eq!(GridDensity::new(&[2], &[0.0], 1.0, vec![0.0, 0.0]).unwrap_err(), TheoryError::BadValues);
        assert_eq!(GridDensity::new(&[2, 2, 2], &[0.0; 3], 1.0, vec![1.0; 8]).unwrap_err(), TheoryError::BadShape);
        assert_eq!(GridDensity::new(&[2], &[0.0], -1.0, vec![1.0; 2]).unwrap_err(), TheoryError::BadCellEdge);
    }
}
