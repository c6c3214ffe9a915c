//! Independent reference solvers used as test oracles.
//!
//! The band solver computes the far-field shift `D_∞` of the harmonic
//! X₁-periodic function `D ~ X₂ ± D_∞` on the strip (0,1)×(−L, L) perforated
//! by a single Neumann disk. It uses a cell-centred finite-volume scheme on a
//! uniform staggered grid: unknowns live at cell centres, fluxes on faces, and
//! faces cut by the disk carry their exact open fraction (aperture). The
//! bottom face carries the Dirichlet value 0 and the top face the flux 1, so
//! the difference of the two end values is `2L + 2D_∞`.
//!
//! Rows free of the disk are eliminated exactly mode by mode in X₁, and the
//! remaining rows around the disk are solved by sparse Cholesky.
//!
//! The tangential solver computes the flux-jump constant `N₂ᵗ` on the same
//! grid. It solves for the potential `Φ = X₁ + φ` with φ periodic, Neumann
//! conditions on the disk and at both band ends, and returns `2L − Q`, where Q
//! is the X₁-flux of Φ through one vertical section of the band.

use faer::prelude::*;

/// Disk hole of the periodicity cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Result of a band solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub d_infinity: f64,
    pub relative_residual: f64,
    pub cells: usize,
}

/// Length of `[a, b]` outside the disk along a vertical (`vertical = true`,
/// abscissa `c`) or horizontal (ordinate `c`) segment.
fn open_length(disk: Option<&Disk>, vertical: bool, c: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    let Some(d) = disk else { return len };
    let (off, mid) = if vertical {
        (c - d.center[0], d.center[1])
    } else {
        (c - d.center[1], d.center[0])
    };
    if off.abs() >= d.radius {
        return len;
    }
    let w = (d.radius * d.radius - off * off).sqrt();
    let blocked = ((mid + w).min(b) - (mid - w).max(a)).max(0.0);
    len - blocked
}

struct Grid {
    n1: usize,
    n2: usize,
    h: f64,
    /// Aperture of the vertical face on the left of cell (i, j), periodic.
    ax: Vec<f64>,
    /// Aperture of the horizontal face below cell (i, j), for j ≥ 1.
    ay: Vec<f64>,
    active: Vec<bool>,
}

impl Grid {
    fn new(disk: Option<&Disk>, l_band: f64, h: f64) -> Self {
        let n1 = (1.0 / h).round() as usize;
        let n2 = (2.0 * l_band / h).round() as usize;
        let h = 1.0 / n1 as f64;
        let y = |j: usize| -l_band + j as f64 * h;
        let x = |i: usize| i as f64 * h;
        let mut ax = vec![0.0; n1 * n2];
        let mut ay = vec![0.0; n1 * n2];
        for j in 0..n2 {
            for i in 0..n1 {
                ax[j * n1 + i] = open_length(disk, true, x(i), y(j), y(j + 1)) / h;
                if j > 0 {
                    ay[j * n1 + i] = open_length(disk, false, y(j), x(i), x(i + 1)) / h;
                }
            }
        }
        let mut active = vec![false; n1 * n2];
        for j in 0..n2 {
            for i in 0..n1 {
                let c = j * n1 + i;
                let right = j * n1 + (i + 1) % n1;
                let up = if j + 1 < n2 { ay[c + n1] } else { 1.0 };
                let down = if j > 0 { ay[c] } else { 1.0 };
                active[c] = ax[c] > 0.0 || ax[right] > 0.0 || up > 0.0 || down > 0.0;
            }
        }
        Grid {
            n1,
            n2,
            h,
            ax,
            ay,
            active,
        }
    }
}

/// Transfer coefficient α(k) of every Fourier mode across `rows` hole-free
/// rows: the far-side row value equals α(k) times the adjacent near row in
/// mode k. `top_neumann` selects the flux end, otherwise the Dirichlet end.
fn transfer(n1: usize, rows: usize, top_neumann: bool) -> Vec<f64> {
    (0..n1)
        .map(|k| {
            let lam = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n1 as f64).cos();
            let mut a = if top_neumann { 1.0 / (1.0 + lam) } else { 1.0 / (3.0 + lam) };
            for _ in 1..rows {
                a = 1.0 / (2.0 + lam - a);
            }
            a
        })
        .collect()
}

/// Symmetric circulant with Fourier symbol `alpha`.
fn circulant(alpha: &[f64]) -> Vec<f64> {
    let n = alpha.len();
    (0..n)
        .map(|d| {
            alpha
                .iter()
                .enumerate()
                .map(|(k, a)| a * (2.0 * std::f64::consts::PI * (k * d) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Solves the band problem and returns `D_∞`. `disk = None` is the empty cell.
///
/// The hole-free rows above and below the disk are eliminated exactly: in
/// every Fourier mode they form a tridiagonal chain whose Schur complement on
/// the adjacent row is the scalar α(k). The reduced system on the rows
/// around the disk is then factorized by sparse Cholesky. The result is the
/// discrete solution on the full grid.
pub fn band_d_infinity(disk: Option<&Disk>, l_band: f64, h: f64) -> BandResult {
    let g = Grid::new(disk, l_band, h);
    let n1 = g.n1;
    let (cy, r) = disk.map(|d| (d.center[1], d.radius)).unwrap_or((0.0, 0.0));
    let row_of = |y: f64| (((y + l_band) / g.h).floor() as i64).clamp(1, g.n2 as i64 - 2) as usize;
    let j0 = row_of(cy - r - 4.0 * g.h);
    let j1 = row_of(cy + r + 4.0 * g.h);
    let rows = j1 - j0 + 1;
    let top_c = circulant(&transfer(n1, g.n2 - 1 - j1, true));
    let bot_c = circulant(&transfer(n1, j0, false));
    let idx = |i: usize, j: usize| (j - j0) * n1 + i;
    let n = rows * n1;
    let mut trip = Vec::new();
    let mut b = vec![0.0; n];
    for j in j0..=j1 {
        for i in 0..n1 {
            let c = j * n1 + i;
            let row = idx(i, j);
            if !g.active[c] {
                trip.push(faer::sparse::Triplet::new(row, row, 1.0));
                continue;
            }
            let mut diag = 0.0;
            let l = j * n1 + (i + n1 - 1) % n1;
            let rr = j * n1 + (i + 1) % n1;
            for (a, nb) in [(g.ax[c], l), (g.ax[rr], rr)] {
                diag += a;
                trip.push(faer::sparse::Triplet::new(row, idx(nb % n1, j), -a));
            }
            if j > j0 {
                diag += g.ay[c];
                trip.push(faer::sparse::Triplet::new(row, idx(i, j - 1), -g.ay[c]));
            } else {
                diag += 1.0;
                for m in 0..n1 {
                    let d = (i + n1 - m) % n1;
                    trip.push(faer::sparse::Triplet::new(row, idx(m, j), -bot_c[d]));
                }
            }
            if j < j1 {
                diag += g.ay[c + n1];
                trip.push(faer::sparse::Triplet::new(row, idx(i, j + 1), -g.ay[c + n1]));
            } else {
                diag += 1.0;
                for m in 0..n1 {
                    let d = (i + n1 - m) % n1;
                    trip.push(faer::sparse::Triplet::new(row, idx(m, j), -top_c[d]));
                }
                b[row] += g.h;
            }
            trip.push(faer::sparse::Triplet::new(row, row, diag));
        }
    }
    let mat = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .expect("valid triplets");
    let llt = mat.sp_cholesky(faer::Side::Lower).expect("reduced band operator is SPD");
    let rhs = faer::Col::<f64>::from_fn(n, |k| b[k]);
    let x = llt.solve(&rhs);
    let ax = &mat * &x;
    let res: f64 = (0..n).map(|k| (ax[k] - b[k]).powi(2)).sum::<f64>().sqrt()
        / b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let near_top: f64 = (0..n1).map(|i| x[idx(i, j1)]).sum::<f64>() / n1 as f64;
    let top_face = near_top + (g.n2 - 1 - j1) as f64 * g.h + 0.5 * g.h;
    BandResult {
        d_infinity: 0.5 * top_face - l_band,
        relative_residual: res,
        cells: g.n1 * g.n2,
    }
}

/// Result of a tangential band solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialResult {
    pub n2_t: f64,
    pub relative_residual: f64,
    pub cells: usize,
}

/// Solves the unit-slope tangential problem on the full grid and returns
/// `N₂ᵗ = 2L − Q`. `disk = None` is the empty cell.
pub fn band_n2_tangential(disk: Option<&Disk>, l_band: f64, h: f64) -> TangentialResult {
    let g = Grid::new(disk, l_band, h);
    let (n1, n2) = (g.n1, g.n2);
    let n = n1 * n2;
    let pinned = 0;
    let mut trip = Vec::new();
    let mut b = vec![0.0; n];
    for j in 0..n2 {
        for i in 0..n1 {
            let c = j * n1 + i;
            if !g.active[c] || c == pinned {
                trip.push(faer::sparse::Triplet::new(c, c, 1.0));
                continue;
            }
            let l = j * n1 + (i + n1 - 1) % n1;
            let r = j * n1 + (i + 1) % n1;
            let mut diag = 0.0;
            let mut couple = |nb: usize, a: f64, trip: &mut Vec<_>| {
                diag += a;
                if nb != pinned {
                    trip.push(faer::sparse::Triplet::new(c, nb, -a));
                }
            };
            couple(l, g.ax[c], &mut trip);
            couple(r, g.ax[r], &mut trip);
            if j > 0 {
                couple(c - n1, g.ay[c], &mut trip);
            }
            if j + 1 < n2 {
                couple(c + n1, g.ay[c + n1], &mut trip);
            }
            trip.push(faer::sparse::Triplet::new(c, c, diag));
            b[c] = (g.ax[r] - g.ax[c]) * g.h;
        }
    }
    let mat = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .expect("valid triplets");
    let llt = mat.sp_cholesky(faer::Side::Lower).expect("pinned tangential operator is SPD");
    let rhs = faer::Col::<f64>::from_fn(n, |k| b[k]);
    let x = llt.solve(&rhs);
    let ax = &mat * &x;
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = (0..n).map(|k| (ax[k] - b[k]).powi(2)).sum::<f64>().sqrt() / norm.max(f64::MIN_POSITIVE);
    let q: f64 = (0..n2)
        .map(|j| {
            let c = j * n1;
            g.ax[c] * (x[c] - x[c + n1 - 1] + g.h)
        })
        .sum();
    TangentialResult {
        n2_t: 2.0 * l_band - q,
        relative_residual: res,
        cells: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_band_is_linear() {
        let r = band_d_infinity(None, 3.0, 1.0 / 16.0);
        assert!(r.d_infinity.abs() < 1e-11, "{:?}", r);
    }

    #[test]
    fn aperture_of_a_chord() {
        let d = Disk {
            center: [0.5, 0.0],
            radius: 0.25,
        };
        assert!((open_length(Some(&d), true, 0.5, -1.0, 1.0) - 1.5).abs() < 1e-15);
        assert!((open_length(Some(&d), false, 0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(open_length(Some(&d), true, 0.0, -1.0, 1.0), 2.0);
    }

    #[test]
    fn small_disk_matches_dipole_limit() {
        let d = Disk {
            center: [0.5, 0.0],
            radius: 0.1,
        };
        let r = band_d_infinity(Some(&d), 3.0, 1.0 / 128.0);
        let dipole = std::f64::consts::PI * 0.01;
        assert!((r.d_infinity - dipole).abs() < 0.1 * dipole, "{:?}", r);
    }

    #[test]
    fn empty_band_has_no_tangential_deficit() {
        let r = band_n2_tangential(None, 2.0, 1.0 / 16.0);
        assert!(r.n2_t.abs() < 1e-12, "{:?}", r);
    }

    #[test]
    fn small_disk_tangential_constant_is_twice_the_area() {
        let d = Disk {
            center: [0.5, 0.0],
            radius: 0.1,
        };
        let r = band_n2_tangential(Some(&d), 2.0, 1.0 / 128.0);
        let dilute = 2.0 * std::f64::consts::PI * 0.01;
        assert!((r.n2_t - dilute).abs() < 0.1 * dilute, "{:?}", r);
    }

    fn full_grid(disk: &Disk, l_band: f64, h: f64) -> f64 {
        let g = Grid::new(Some(disk), l_band, h);
        let (n1, n2) = (g.n1, g.n2);
        let n = n1 * n2;
        let mut trip = Vec::new();
        let mut b = vec![0.0; n];
        for j in 0..n2 {
            for i in 0..n1 {
                let c = j * n1 + i;
                if !g.active[c] {
                    trip.push(faer::sparse::Triplet::new(c, c, 1.0));
                    continue;
                }
                let l = j * n1 + (i + n1 - 1) % n1;
                let r = j * n1 + (i + 1) % n1;
                let mut diag = g.ax[c] + g.ax[r];
                trip.push(faer::sparse::Triplet::new(c, l, -g.ax[c]));
                trip.push(faer::sparse::Triplet::new(c, r, -g.ax[r]));
                if j > 0 {
                    diag += g.ay[c];
                    trip.push(faer::sparse::Triplet::new(c, c - n1, -g.ay[c]));
                } else {
                    diag += 2.0;
                }
                if j + 1 < n2 {
                    diag += g.ay[c + n1];
                    trip.push(faer::sparse::Triplet::new(c, c + n1, -g.ay[c + n1]));
                } else {
                    b[c] = g.h;
                }
                trip.push(faer::sparse::Triplet::new(c, c, diag));
            }
        }
        let m = faer::sparse::SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).unwrap();
        let x = m.sp_lu().unwrap().solve(&faer::Col::<f64>::from_fn(n, |k| b[k]));
        let top: f64 = (0..n1).map(|i| x[(n2 - 1) * n1 + i]).sum::<f64>() / n1 as f64 + 0.5 * g.h;
        0.5 * top - l_band
    }

    #[test]
    fn row_elimination_equals_full_grid_solve() {
        let d = Disk {
            center: [0.5, 0.1],
            radius: 0.3,
        };
        let reduced = band_d_infinity(Some(&d), 2.0, 1.0 / 32.0).d_infinity;
        let full = full_grid(&d, 2.0, 1.0 / 32.0);
        assert!((reduced - full).abs() < 1e-11, "{} vs {}", reduced, full);
    }
}
