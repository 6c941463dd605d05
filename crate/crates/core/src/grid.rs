//! Periodic spatial grids shared by the hydrodynamic and SOH solvers.
//!
//! A grid with `ny = 1` is the quasi-1D mode: fields vary in x only and all
//! y-derivatives vanish identically (the periodic y-neighbor of a cell is the
//! cell itself).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub nx: usize,
    pub ny: usize,
    pub length_x: f64,
    pub length_y: f64,
}

impl SpatialGrid {
    pub fn line(nx: usize, length: f64) -> Result<Self, GridError> {
        if nx < 4 || !(length > 0.0) {
            return Err(GridError::Invalid(format!("nx = {nx}, length = {length}")));
        }
        Ok(Self { nx, ny: 1, length_x: length, length_y: length / nx as f64 })
    }

    pub fn plane(nx: usize, ny: usize, length_x: f64, length_y: f64) -> Result<Self, GridError> {
        if nx < 4 || ny < 4 || !(length_x > 0.0) || !(length_y > 0.0) {
            return Err(GridError::Invalid(format!("{nx} x {ny}")));
        }
        let hx = length_x / nx as f64;
        let hy = length_y / ny as f64;
        if ((hx - hy) / hx).abs() > 1e-12 {
            return Err(GridError::Invalid(format!(
                "cells must be square: hx = {hx}, hy = {hy}"
            )));
        }
        Ok(Self { nx, ny, length_x, length_y })
    }

    /// Cell size `h` (cells are square).
    pub fn spacing(&self) -> f64 {
        self.length_x / self.nx as f64
    }

    /// Number of spatial dimensions actually varying (1 when `ny == 1`).
    pub fn spatial_dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell volume `h^dx`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.spatial_dim() as i32)
    }

    pub fn x(&self, ix: usize) -> f64 {
        (ix as f64 + 0.5) * self.spacing()
    }

    pub fn y(&self, iy: usize) -> f64 {
        (iy as f64 + 0.5) * self.spacing()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Periodic neighbor of `idx` shifted by one cell along `dir`
    /// (0 = x, 1 = y), with `sign` in {-1, +1}.
    pub fn neighbor(&self, idx: usize, dir: usize, sign: isize) -> usize {
        let ix = idx % self.nx;
        let iy = idx / self.nx;
        match dir {
            0 => {
                let jx = if sign > 0 { (ix + 1) % self.nx } else { (ix + self.nx - 1) % self.nx };
                iy * self.nx + jx
            }
            _ => {
                let jy = if sign > 0 { (iy + 1) % self.ny } else { (iy + self.ny - 1) % self.ny };
                jy * self.nx + ix
            }
        }
    }
}
