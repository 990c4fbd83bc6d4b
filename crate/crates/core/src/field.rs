//! Uniform cell-centered grids, scalar/vector fields, bicubic sampling,
//! 4th-order gradients, and the field binary/CSV formats.

use crate::error::Error;
use crate::par;
use crate::util::Vec2;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Square grid centered at the origin with `n` cells per side (power of two)
/// and spacing `h = 2 L / n`. Nodes sit at cell centers, so the index map
/// `i -> n - 1 - i` realizes the reflection `x -> -x` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    center: Vec2,
}

impl Grid2D {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if !n.is_power_of_two() || n < 8 {
            return Err(Error::invalid(format!(
                "grid resolution {n} must be a power of two >= 8"
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::invalid("grid half width must be positive"));
        }
        Ok(Grid2D { n, half_width, center: Vec2::ZERO })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Coordinate of cell center `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(self.coord(ix), self.coord(iy))
    }

    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    /// Continuous (fractional) index of a physical coordinate.
    fn frac_index(&self, x: f64) -> f64 {
        (x + self.half_width) / self.spacing() - 0.5
    }

    /// True when the 4x4 bicubic stencil around `p` stays inside the grid.
    pub fn bicubic_interior(&self, p: Vec2) -> bool {
        let ok = |t: f64| {
            t.is_finite() && {
                let i0 = t.floor();
                i0 >= 1.0 && i0 + 2.0 <= (self.n - 1) as f64
            }
        };
        ok(self.frac_index(p.x)) && ok(self.frac_index(p.y))
    }
}

/// Cubic Lagrange weights for nodes {-1, 0, 1, 2} at offset `u` in [0, 1].
#[inline]
fn lagrange4(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

/// Stencil base index and offset; clamps to the valid range when allowed.
#[inline]
fn stencil(t: f64, n: usize, clamp: bool) -> Option<(usize, f64)> {
    let mut i0 = t.floor() as isize;
    if clamp {
        i0 = i0.clamp(1, n as isize - 3);
    } else if i0 < 1 || i0 + 2 > n as isize - 1 {
        return None;
    }
    Some((i0 as usize, t - i0 as f64))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
    even_symmetric: bool,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField { grid, values: vec![0.0; grid.n() * grid.n()], even_symmetric: false }
    }

    /// Sample `f` at every cell center (parallel over rows).
    pub fn from_fn<F: Fn(Vec2) -> f64 + Sync>(grid: Grid2D, f: F) -> Self {
        let n = grid.n();
        let mut field = ScalarField::zeros(grid);
        par::for_each_chunk_mut(&mut field.values, n, |iy, row| {
            let y = grid.coord(iy);
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(Vec2::new(grid.coord(ix), y));
            }
        });
        field
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.idx(ix, iy)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        let i = self.grid.idx(ix, iy);
        self.values[i] = v;
    }

    pub fn is_even_symmetric(&self) -> bool {
        self.even_symmetric
    }

    pub fn set_even_symmetric(&mut self, flag: bool) {
        self.even_symmetric = flag;
    }

    pub fn max_abs(&self) -> f64 {
        par::max_indexed(self.values.len(), |i| self.values[i].abs())
    }

    /// Max deviation from even symmetry, `|f(x) - f(-x)|`.
    pub fn even_defect(&self) -> f64 {
        let n = self.grid.n();
        par::max_indexed(n * n, |i| {
            let (iy, ix) = (i / n, i % n);
            (self.values[i] - self.values[self.grid.idx(n - 1 - ix, n - 1 - iy)]).abs()
        })
    }

    /// Replace the field by its even part; makes the symmetry flag exact.
    pub fn symmetrize_even(&mut self) {
        let n = self.grid.n();
        for iy in 0..n {
            for ix in 0..n {
                let i = self.grid.idx(ix, iy);
                let j = self.grid.idx(n - 1 - ix, n - 1 - iy);
                if i < j {
                    let m = 0.5 * (self.values[i] + self.values[j]);
                    self.values[i] = m;
                    self.values[j] = m;
                }
            }
        }
        self.even_symmetric = true;
    }

    /// Bicubic (4-point Lagrange per axis) interpolation; exact on cubics.
    pub fn sample(&self, p: Vec2) -> Result<f64> {
        self.sample_impl(p, false)
            .ok_or_else(|| Error::out_of_domain(format!("sample at ({}, {})", p.x, p.y)))
    }

    /// Bicubic interpolation with the stencil clamped at the boundary.
    pub fn sample_clamped(&self, p: Vec2) -> f64 {
        self.sample_impl(p, true).expect("clamped stencil is always valid")
    }

    fn sample_impl(&self, p: Vec2, clamp: bool) -> Option<f64> {
        let n = self.grid.n();
        let (ix0, ux) = stencil(self.grid.frac_index(p.x), n, clamp)?;
        let (iy0, uy) = stencil(self.grid.frac_index(p.y), n, clamp)?;
        let wx = lagrange4(ux);
        let wy = lagrange4(uy);
        let mut acc = 0.0;
        for (dy, &wyv) in wy.iter().enumerate() {
            let row = (iy0 + dy - 1) * n + ix0 - 1;
            let vals = &self.values[row..row + 4];
            acc += wyv * (wx[0] * vals[0] + wx[1] * vals[1] + wx[2] * vals[2] + wx[3] * vals[3]);
        }
        Some(acc)
    }

    /// 4th-order finite-difference gradient; one-sided near the boundary.
    pub fn gradient(&self) -> VectorField {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let mut out = VectorField::zeros(self.grid);
        let vals = &self.values;
        let (ux, uy) = out.components_mut();
        par::for_each_chunk_mut(ux, n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                *v = fd4_line(|k| vals[iy * n + k], ix, n, h);
            }
        });
        par::for_each_chunk_mut(uy, n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                *v = fd4_line(|k| vals[k * n + ix], iy, n, h);
            }
        });
        out
    }

    /// CSV of one horizontal slice (`y = coord(iy)`): rows `x,value`.
    pub fn slice_csv(&self, iy: usize) -> String {
        let n = self.grid.n();
        let mut out = String::from("x,value\n");
        for ix in 0..n {
            out.push_str(&format!("{:.12e},{:.12e}\n", self.grid.coord(ix), self.at(ix, iy)));
        }
        out
    }
}

/// 4th-order first derivative along one index line with one-sided closures.
fn fd4_line<F: Fn(usize) -> f64>(f: F, i: usize, n: usize, h: f64) -> f64 {
    let c = 1.0 / (12.0 * h);
    if i >= 2 && i + 2 < n {
        c * (-f(i + 2) + 8.0 * f(i + 1) - 8.0 * f(i - 1) + f(i - 2))
    } else if i == 0 {
        c * (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4))
    } else if i == 1 {
        c * (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4))
    } else if i == n - 2 {
        c * (3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5))
    } else {
        c * (25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4)
            + 3.0 * f(n - 5))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorField {
    grid: Grid2D,
    ux: Vec<f64>,
    uy: Vec<f64>,
    odd_symmetric: bool,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        let len = grid.n() * grid.n();
        VectorField { grid, ux: vec![0.0; len], uy: vec![0.0; len], odd_symmetric: false }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn at(&self, ix: usize, iy: usize) -> Vec2 {
        let i = self.grid.idx(ix, iy);
        Vec2::new(self.ux[i], self.uy[i])
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: Vec2) {
        let i = self.grid.idx(ix, iy);
        self.ux[i] = v.x;
        self.uy[i] = v.y;
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.ux, &self.uy)
    }

    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.ux, &mut self.uy)
    }

    pub fn is_odd_symmetric(&self) -> bool {
        self.odd_symmetric
    }

    pub fn set_odd_symmetric(&mut self, flag: bool) {
        self.odd_symmetric = flag;
    }

    pub fn max_norm(&self) -> f64 {
        par::max_indexed(self.ux.len(), |i| self.ux[i].hypot(self.uy[i]))
    }

    /// Max deviation from odd symmetry, `|u(x) + u(-x)|`.
    pub fn odd_defect(&self) -> f64 {
        let n = self.grid.n();
        par::max_indexed(n * n, |i| {
            let (iy, ix) = (i / n, i % n);
            let j = self.grid.idx(n - 1 - ix, n - 1 - iy);
            (self.ux[i] + self.ux[j]).hypot(self.uy[i] + self.uy[j])
        })
    }

    pub fn sample(&self, p: Vec2) -> Result<Vec2> {
        self.sample_impl(p, false)
            .ok_or_else(|| Error::out_of_domain(format!("sample at ({}, {})", p.x, p.y)))
    }

    pub fn sample_clamped(&self, p: Vec2) -> Vec2 {
        self.sample_impl(p, true).expect("clamped stencil is always valid")
    }

    fn sample_impl(&self, p: Vec2, clamp: bool) -> Option<Vec2> {
        let n = self.grid.n();
        let (ix0, ux_off) = stencil(self.grid.frac_index(p.x), n, clamp)?;
        let (iy0, uy_off) = stencil(self.grid.frac_index(p.y), n, clamp)?;
        let wx = lagrange4(ux_off);
        let wy = lagrange4(uy_off);
        let mut ax = 0.0;
        let mut ay = 0.0;
        for (dy, &wyv) in wy.iter().enumerate() {
            let row = (iy0 + dy - 1) * n + ix0 - 1;
            let (mut rx, mut ry) = (0.0, 0.0);
            for (dx, &wxv) in wx.iter().enumerate() {
                rx += wxv * self.ux[row + dx];
                ry += wxv * self.uy[row + dx];
            }
            ax += wyv * rx;
            ay += wyv * ry;
        }
        Some(Vec2::new(ax, ay))
    }

    /// Max of the 4th-order finite-difference divergence.
    pub fn divergence_max(&self) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        par::max_indexed(n * n, |i| {
            let (iy, ix) = (i / n, i % n);
            let dx = fd4_line(|k| self.ux[iy * n + k], ix, n, h);
            let dy = fd4_line(|k| self.uy[k * n + ix], iy, n, h);
            (dx + dy).abs()
        })
    }

    /// Max over nodes of the 4th-order velocity-gradient operator norm.
    pub fn gradient_max(&self) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        par::max_indexed(n * n, |i| {
            let (iy, ix) = (i / n, i % n);
            let a = fd4_line(|k| self.ux[iy * n + k], ix, n, h);
            let b = fd4_line(|k| self.ux[k * n + ix], iy, n, h);
            let c = fd4_line(|k| self.uy[iy * n + k], ix, n, h);
            let d = fd4_line(|k| self.uy[k * n + ix], iy, n, h);
            crate::util::Mat2::new(a, b, c, d).op_norm()
        })
    }
}

// ---------------------------------------------------------------------------
// Binary format: little-endian header (magic, version, n, half_width, center,
// component count) followed by row-major f64 planes, plus a JSON sidecar.
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"VLF1";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    half_width: f64,
    center: [f64; 2],
    components: u32,
    symmetric: bool,
}

fn write_header(w: &mut impl Write, grid: Grid2D, ncomp: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.half_width().to_le_bytes())?;
    w.write_all(&grid.center().x.to_le_bytes())?;
    w.write_all(&grid.center().y.to_le_bytes())?;
    w.write_all(&ncomp.to_le_bytes())?;
    Ok(())
}

fn write_plane(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(Grid2D, u32)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a field binary (bad magic)"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?; // version
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?; // center x (always zero today)
    r.read_exact(&mut b8)?; // center y
    r.read_exact(&mut b4)?;
    let ncomp = u32::from_le_bytes(b4);
    Ok((Grid2D::new(n, half_width)?, ncomp))
}

fn read_plane(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; len * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    std::path::PathBuf::from(p)
}

impl ScalarField {
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_header(&mut f, self.grid, 1)?;
        write_plane(&mut f, &self.values)?;
        let sidecar = Sidecar {
            n: self.grid.n(),
            half_width: self.grid.half_width(),
            center: [0.0, 0.0],
            components: 1,
            symmetric: self.even_symmetric,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let (grid, ncomp) = read_header(&mut f)?;
        if ncomp != 1 {
            return Err(Error::invalid("expected a scalar field binary"));
        }
        let values = read_plane(&mut f, grid.n() * grid.n())?;
        let symmetric = std::fs::read_to_string(sidecar_path(path))
            .ok()
            .and_then(|s| serde_json::from_str::<Sidecar>(&s).ok())
            .map(|s| s.symmetric)
            .unwrap_or(false);
        Ok(ScalarField { grid, values, even_symmetric: symmetric })
    }
}

impl VectorField {
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_header(&mut f, self.grid, 2)?;
        write_plane(&mut f, &self.ux)?;
        write_plane(&mut f, &self.uy)?;
        let sidecar = Sidecar {
            n: self.grid.n(),
            half_width: self.grid.half_width(),
            center: [0.0, 0.0],
            components: 2,
            symmetric: self.odd_symmetric,
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let (grid, ncomp) = read_header(&mut f)?;
        if ncomp != 2 {
            return Err(Error::invalid("expected a vector field binary"));
        }
        let len = grid.n() * grid.n();
        let ux = read_plane(&mut f, len)?;
        let uy = read_plane(&mut f, len)?;
        let symmetric = std::fs::read_to_string(sidecar_path(path))
            .ok()
            .and_then(|s| serde_json::from_str::<Sidecar>(&s).ok())
            .map(|s| s.symmetric)
            .unwrap_or(false);
        Ok(VectorField { grid, ux, uy, odd_symmetric: symmetric })
    }
}
