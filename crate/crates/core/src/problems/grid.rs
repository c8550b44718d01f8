use crate::blocksparse::Triplet;
use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Interior points of a Dirichlet grid on the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid3D {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Grid3D {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(CeError::InvalidParameter(format!("grid {nx}x{ny}x{nz} has an empty axis")));
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Mesh spacing per axis, `1 / (n + 1)`.
    pub fn spacing(&self) -> [f64; 3] {
        self.dims().map(|n| 1.0 / (n as f64 + 1.0))
    }

    /// Lexicographic index, x fastest.
    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.nx * (i[1] + self.ny * i[2])
    }

    #[inline]
    pub fn coords(&self, p: usize) -> [usize; 3] {
        [p % self.nx, (p / self.nx) % self.ny, p / (self.nx * self.ny)]
    }
}

/// Assembled symmetric system: both triangles in `entries`, right-hand side in `rhs`.
#[derive(Clone, Debug)]
pub struct AssembledProblem<T> {
    pub n: usize,
    pub entries: Vec<Triplet<T>>,
    pub rhs: Vec<T>,
}

/// `k(x) = diag(x₁² + ½, x₂² + ½, x₃² + ½)`
pub fn default_diffusion(x: [f64; 3]) -> [f64; 3] {
    x.map(|v| v * v + 0.5)
}

/// 7-point flux discretization of `-div(k grad u) = 1` with `u = 0` on the boundary.
pub fn assemble_diffusion_3d<T: Scalar>(grid: &Grid3D) -> AssembledProblem<T> {
    assemble_diffusion_3d_with(grid, default_diffusion)
}

/// Same as [`assemble_diffusion_3d`] with a caller-supplied diagonal tensor.
///
/// The coefficient on the face between neighbouring points is `k_d` evaluated at
/// the face midpoint. The system is multiplied through by `h²` (the smallest
/// spacing), so for cubic grids the matrix holds plain face coefficients and
/// the right-hand side is `h²`.
pub fn assemble_diffusion_3d_with<T: Scalar>(
    grid: &Grid3D,
    k: impl Fn([f64; 3]) -> [f64; 3],
) -> AssembledProblem<T> {
    let h = grid.spacing();
    let hmin = h.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = h.map(|hd| (hmin / hd) * (hmin / hd));
    let dims = grid.dims();
    let n = grid.len();
    let mut entries = Vec::with_capacity(7 * n);
    for p in 0..n {
        let c = grid.coords(p);
        let x = [0, 1, 2].map(|d| (c[d] as f64 + 1.0) * h[d]);
        let mut diag = 0.0;
        for d in 0..3 {
            for dir in [-1.0f64, 1.0] {
                let mut mid = x;
                mid[d] += 0.5 * dir * h[d];
                let coef = k(mid)[d] * scale[d];
                diag += coef;
                let neighbour = if dir < 0.0 { c[d].checked_sub(1) } else { Some(c[d] + 1) };
                if let Some(nd) = neighbour.filter(|&v| v < dims[d]) {
                    let mut q = c;
                    q[d] = nd;
                    entries.push((p, grid.index(q), T::lit(-coef)));
                }
            }
        }
        entries.push((p, p, T::lit(diag)));
    }
    entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
    AssembledProblem { n, entries, rhs: vec![T::lit(hmin * hmin); n] }
}

/// 9-point Laplacian on an `n × n` interior grid: centre 8/3, all eight neighbours -1/3.
pub fn assemble_laplace_2d_9pt<T: Scalar>(n: usize) -> AssembledProblem<T> {
    let len = n * n;
    let h = 1.0 / (n as f64 + 1.0);
    let mut entries = Vec::with_capacity(9 * len);
    let (centre, off) = (T::lit(8.0 / 3.0), T::lit(-1.0 / 3.0));
    for iy in 0..n {
        for ix in 0..n {
            let p = ix + n * iy;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (qx, qy) = (ix as i64 + dx, iy as i64 + dy);
                    if qx < 0 || qy < 0 || qx >= n as i64 || qy >= n as i64 {
                        continue;
                    }
                    let q = qx as usize + n * qy as usize;
                    entries.push((p, q, if q == p { centre } else { off }));
                }
            }
        }
    }
    AssembledProblem { n: len, entries, rhs: vec![T::lit(h * h); len] }
}
