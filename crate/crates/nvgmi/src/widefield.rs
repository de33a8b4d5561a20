//! Wide-field magneto-optical mapping: forward-simulate per-site ODMR
//! splittings from the domain chain, then invert grouped sites back into
//! field-component maps by least squares with sign disambiguation.
//!
//! Both directions use the linear-Zeeman parallel-projection model only
//! (splitting = 2 gamma_e |B . axis|), valid for fields well below the
//! zero-field splitting scale; transverse-field level mixing is ignored.
//! Treat ~3 mT as the model's validity bound.

use crate::error::{Error, Result};
use crate::gmi::{stray_field, DomainChain};
use crate::spin::NvParams;
use serde::{Deserialize, Serialize};

/// The four diamond <111> NV orientation axes (unit vectors).
pub const NV_AXES: [[f64; 3]; 4] = {
    const S: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
    [[S, S, S], [S, -S, -S], [-S, S, -S], [-S, -S, S]]
};

/// One NV site of the wide-field map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NvSite {
    /// Position in the wire frame, m.
    pub position: [f64; 3],
    /// Unit orientation axis, one of [`NV_AXES`].
    pub axis: [f64; 3],
    /// Measured (or simulated) ODMR splitting, Hz.
    pub odmr_splitting: f64,
}

/// Forward model: splitting = 2 gamma_e |B . axis| per site.
pub fn forward_map(chain: &DomainChain, sites: &mut [NvSite], params: &NvParams) -> Result<()> {
    for site in sites.iter_mut() {
        let b = stray_field(chain, site.position)?;
        let proj = b[0] * site.axis[0] + b[1] * site.axis[1] + b[2] * site.axis[2];
        site.odmr_splitting = 2.0 * params.gyro_e * proj.abs();
    }
    Ok(())
}

/// Grid the reconstruction runs on. Cells aggregate sites within `radius` of
/// the cell center (in the x-y plane of the wire frame).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    /// Site-gathering radius, m.
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldCell {
    pub x: f64,
    pub y: f64,
    /// Reconstructed field components, T. Zero for invalid cells.
    pub b: [f64; 3],
    /// |B| recomputed from the components.
    pub b_mag: f64,
    /// False when the cell's axis set was rank-deficient or empty.
    pub valid: bool,
    /// True when the sign gauge fell back to the positive-octant default.
    pub flagged_isolated: bool,
    /// Number of sites aggregated into the cell.
    pub n_sites: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMap {
    pub grid: GridSpec,
    /// Row-major cells (y outer, x inner).
    pub cells: Vec<FieldCell>,
    pub interpolation: String,
}

/// Least-squares field from one cell's sites: solve |a_i . B| = p_i over the
/// 2^(k-1) sign assignments (global sign fixed later), keeping the candidate
/// with the smallest residual. Returns the candidate and its residual RMS.
pub fn solve_cell(axes: &[[f64; 3]], projections: &[f64], cell: usize) -> Result<([f64; 3], f64)> {
    let k = axes.len();
    if k < 3 {
        return Err(Error::UnderdeterminedCell {
            cell,
            reason: format!("{k} axes; need >= 3 linearly independent"),
        });
    }
    if rank3(axes) < 3 {
        return Err(Error::UnderdeterminedCell {
            cell,
            reason: "axis set is rank-deficient".into(),
        });
    }

    let mut best: Option<([f64; 3], f64)> = None;
    // sigma_0 = +1; enumerate the rest
    for mask in 0..(1u32 << (k - 1)) {
        let signs: Vec<f64> = (0..k)
            .map(|i| {
                if i == 0 {
                    1.0
                } else if mask >> (i - 1) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        // normal equations for min || A B - s p ||
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (a, (&s, &p)) in axes.iter().zip(signs.iter().zip(projections)) {
            for r in 0..3 {
                atb[r] += a[r] * s * p;
                for c in 0..3 {
                    ata[r][c] += a[r] * a[c];
                }
            }
        }
        let Some(b) = solve3(ata, atb) else { continue };
        let mut ss = 0.0;
        for (a, (&s, &p)) in axes.iter().zip(signs.iter().zip(projections)) {
            let r = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] - s * p;
            ss += r * r;
        }
        let rms = (ss / k as f64).sqrt();
        if best.as_ref().is_none_or(|(_, br)| rms < *br) {
            best = Some((b, rms));
        }
    }
    best.ok_or(Error::UnderdeterminedCell {
        cell,
        reason: "no sign assignment produced a solvable system".into(),
    })
}

#[allow(clippy::needless_range_loop)]
fn rank3(axes: &[[f64; 3]]) -> usize {
    // Gram-matrix pivoted elimination
    let mut g = [[0.0f64; 3]; 3];
    for a in axes {
        for r in 0..3 {
            for c in 0..3 {
                g[r][c] += a[r] * a[c];
            }
        }
    }
    let mut rank = 0;
    let mut m = g;
    for col in 0..3 {
        let mut pivot = col;
        for row in (col + 1)..3 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-12 {
            continue;
        }
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c2 in 0..3 {
                    m[row][c2] -= f * m[col][c2];
                }
            }
        }
        rank += 1;
    }
    rank
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-30 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut x = [0.0f64; 3];
    for i in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][i] = b[r];
        }
        let di = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        x[i] = di * inv_det;
    }
    Some(x)
}

/// Reconstruct the field map from sites. Cells with fewer than three
/// independent axes are marked invalid, never guessed. The per-cell sign
/// gauge is resolved by a deterministic raster sweep: each cell picks the
/// sign maximizing alignment with its already-resolved neighbors; cells with
/// no resolved neighbor default to the positive octant and are flagged.
#[allow(clippy::needless_range_loop)]
pub fn reconstruct(sites: &[NvSite], grid: &GridSpec, params: &NvParams) -> Result<FieldMap> {
    if grid.nx == 0 || grid.ny == 0 || !(grid.radius > 0.0) {
        return Err(Error::invalid("grid must be non-empty with radius > 0"));
    }
    let mut cells: Vec<FieldCell> = Vec::with_capacity(grid.nx * grid.ny);

    // unsigned candidates per cell
    let mut candidates: Vec<Option<[f64; 3]>> = Vec::with_capacity(grid.nx * grid.ny);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let cx = grid.x0 + ix as f64 * grid.dx;
            let cy = grid.y0 + iy as f64 * grid.dy;
            let index = iy * grid.nx + ix;

            let mut axes = Vec::new();
            let mut projections = Vec::new();
            for s in sites {
                let ddx = s.position[0] - cx;
                let ddy = s.position[1] - cy;
                if (ddx * ddx + ddy * ddy).sqrt() <= grid.radius {
                    axes.push(s.axis);
                    projections.push(s.odmr_splitting / (2.0 * params.gyro_e));
                }
            }
            let n_sites = axes.len();
            let solved = solve_cell(&axes, &projections, index).ok();
            candidates.push(solved.as_ref().map(|(b, _)| *b));
            cells.push(FieldCell {
                x: cx,
                y: cy,
                b: [0.0; 3],
                b_mag: 0.0,
                valid: solved.is_some(),
                flagged_isolated: false,
                n_sites,
            });
        }
    }

    // deterministic raster sign resolution
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let index = iy * grid.nx + ix;
            let Some(cand) = candidates[index] else {
                continue;
            };

            // average of already-resolved neighbors (left, up-left, up, up-right)
            let mut acc = [0.0f64; 3];
            let mut found = false;
            let neighbors: [(isize, isize); 4] = [(-1, 0), (-1, -1), (0, -1), (1, -1)];
            for (ox, oy) in neighbors {
                let nxi = ix as isize + ox;
                let nyi = iy as isize + oy;
                if nxi < 0 || nyi < 0 || nxi >= grid.nx as isize || nyi >= grid.ny as isize {
                    continue;
                }
                let nidx = nyi as usize * grid.nx + nxi as usize;
                if cells[nidx].valid {
                    for r in 0..3 {
                        acc[r] += cells[nidx].b[r];
                    }
                    found = true;
                }
            }

            let dot = acc[0] * cand[0] + acc[1] * cand[1] + acc[2] * cand[2];
            let (sign, isolated) = if found && dot != 0.0 {
                (dot.signum(), false)
            } else {
                (positive_octant_sign(cand), true)
            };
            let b = [sign * cand[0], sign * cand[1], sign * cand[2]];
            let cell = &mut cells[index];
            cell.b = b;
            cell.b_mag = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
            cell.flagged_isolated = isolated;
        }
    }

    Ok(FieldMap {
        grid: grid.clone(),
        cells,
        interpolation: "none".into(),
    })
}

fn positive_octant_sign(b: [f64; 3]) -> f64 {
    let sum = b[0] + b[1] + b[2];
    if sum != 0.0 {
        sum.signum()
    } else if b[2] != 0.0 {
        b[2].signum()
    } else if b[1] != 0.0 {
        b[1].signum()
    } else if b[0] != 0.0 {
        b[0].signum()
    } else {
        1.0
    }
}

/// CSV export: one row per cell (x, y, Bx, By, Bz, |B|), invalid cells marked.
pub fn field_map_csv(map: &FieldMap) -> String {
    let mut out = String::from("x_m,y_m,bx_t,by_t,bz_t,b_mag_t,valid\n");
    for c in &map.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.x,
            c.y,
            c.b[0],
            c.b[1],
            c.b[2],
            c.b_mag,
            if c.valid { 1 } else { 0 }
        ));
    }
    out
}
