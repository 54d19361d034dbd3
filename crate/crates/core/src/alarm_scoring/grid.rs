//! Confidence rasterization and iterative peak extraction.

use crate::{Error, Position, Result};

/// Default grid cell size, meters.
pub const DEFAULT_CELL_SIZE_M: f64 = 0.05;
/// Default suppression radius around each alarm, meters.
pub const DEFAULT_ALARM_HALO_M: f64 = 0.5;

/// Confidence values on a regular easting/northing grid.
///
/// Cell `(row, col)` is centered at `origin + ((col + 0.5) * cell, (row + 0.5) * cell)`;
/// row 0 is the southernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceGrid {
    /// South-west corner of cell (0, 0).
    pub origin: Position,
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    /// Row-major values.
    pub cells: Vec<f64>,
    /// Cells holding a sample or an interpolated value.
    pub occupied: Vec<bool>,
}

impl ConfidenceGrid {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[self.index(row, col)]
    }

    pub fn center(&self, row: usize, col: usize) -> Position {
        Position::new(
            self.origin.easting + (col as f64 + 0.5) * self.cell_size,
            self.origin.northing + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn max_value(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.cells.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Spatial alarm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alarm {
    pub easting: f64,
    pub northing: f64,
    pub confidence: f64,
}

impl Alarm {
    pub fn position(&self) -> Position {
        Position::new(self.easting, self.northing)
    }
}

/// Linear fill between consecutive known entries of one line of cells.
/// `known` lists (offset, value) in increasing offset order.
fn fill_line(known: &[(usize, f64)], mut write: impl FnMut(usize, f64)) {
    for pair in known.windows(2) {
        let ((a, va), (b, vb)) = (pair[0], pair[1]);
        for k in (a + 1)..b {
            let t = (k - a) as f64 / (b - a) as f64;
            write(k, va + (vb - va) * t);
        }
    }
}

/// Maps sample confidences onto a grid.
///
/// Samples land in the cell nearest to them (the grid is aligned so the
/// south-west-most sample sits on a cell center); colliding samples keep the
/// maximum. Empty cells between two sample cells of the same row or column
/// are linearly interpolated from those neighbors; when both a row and a
/// column fill exist the larger one wins. Cells outside stay 0 and unoccupied.
pub fn rasterize(
    positions: &[Position],
    confidences: &[f64],
    cell_size: f64,
) -> Result<ConfidenceGrid> {
    if positions.is_empty() {
        return Err(Error::invalid("cannot rasterize an empty trace"));
    }
    if positions.len() != confidences.len() {
        return Err(Error::invalid(format!(
            "{} positions but {} confidences",
            positions.len(),
            confidences.len()
        )));
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    if positions
        .iter()
        .any(|p| !(p.easting.is_finite() && p.northing.is_finite()))
    {
        return Err(Error::invalid("non-finite sample position"));
    }
    if let Some(c) = confidences.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::invalid(format!(
            "confidence must be finite and >= 0, got {c}"
        )));
    }

    let min_e = positions
        .iter()
        .map(|p| p.easting)
        .fold(f64::INFINITY, f64::min);
    let max_e = positions
        .iter()
        .map(|p| p.easting)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_n = positions
        .iter()
        .map(|p| p.northing)
        .fold(f64::INFINITY, f64::min);
    let max_n = positions
        .iter()
        .map(|p| p.northing)
        .fold(f64::NEG_INFINITY, f64::max);
    let cols = ((max_e - min_e) / cell_size).round() as usize + 1;
    let rows = ((max_n - min_n) / cell_size).round() as usize + 1;

    let mut grid = ConfidenceGrid {
        origin: Position::new(min_e - 0.5 * cell_size, min_n - 0.5 * cell_size),
        cell_size,
        rows,
        cols,
        cells: vec![0.0; rows * cols],
        occupied: vec![false; rows * cols],
    };
    for (p, &c) in positions.iter().zip(confidences) {
        let col = (((p.easting - min_e) / cell_size).round() as usize).min(cols - 1);
        let row = (((p.northing - min_n) / cell_size).round() as usize).min(rows - 1);
        let i = grid.index(row, col);
        grid.cells[i] = if grid.occupied[i] {
            grid.cells[i].max(c)
        } else {
            c
        };
        grid.occupied[i] = true;
    }

    let mut filled: Vec<Option<f64>> = vec![None; rows * cols];
    let mut merge = |i: usize, v: f64| {
        filled[i] = Some(filled[i].map_or(v, |old: f64| old.max(v)));
    };
    for row in 0..rows {
        let known: Vec<(usize, f64)> = (0..cols)
            .filter(|&c| grid.occupied[grid.index(row, c)])
            .map(|c| (c, grid.get(row, c)))
            .collect();
        fill_line(&known, |c, v| merge(row * cols + c, v));
    }
    for col in 0..cols {
        let known: Vec<(usize, f64)> = (0..rows)
            .filter(|&r| grid.occupied[grid.index(r, col)])
            .map(|r| (r, grid.get(r, col)))
            .collect();
        fill_line(&known, |r, v| merge(r * cols + col, v));
    }
    for (i, v) in filled.into_iter().enumerate() {
        if let Some(v) = v {
            grid.cells[i] = v;
            grid.occupied[i] = true;
        }
    }
    Ok(grid)
}

/// Repeatedly emits an alarm at the largest remaining cell and zeroes every
/// cell whose center lies within `halo_m` of it, until the grid is all zero.
///
/// Equal maxima resolve to the first cell in row-major order.
pub fn extract_alarms(grid: &ConfidenceGrid, halo_m: f64) -> Result<Vec<Alarm>> {
    if !(halo_m > 0.0 && halo_m.is_finite()) {
        return Err(Error::invalid(format!(
            "halo must be positive, got {halo_m}"
        )));
    }
    let mut cells = grid.cells.clone();
    // Values only ever drop to zero, so the next maximum is the next
    // surviving cell in descending order.
    let mut order: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] > 0.0).collect();
    order.sort_by(|&a, &b| cells[b].total_cmp(&cells[a]).then(a.cmp(&b)));

    let reach = (halo_m / grid.cell_size).floor() as isize + 1;
    // Inclusive boundary, tolerant of `k * cell_size` rounding just past the halo.
    let halo_sq = halo_m * halo_m * (1.0 + 1e-9);
    let mut alarms = Vec::new();
    for i in order {
        if cells[i] <= 0.0 {
            continue;
        }
        let (row, col) = (i / grid.cols, i % grid.cols);
        let center = grid.center(row, col);
        alarms.push(Alarm {
            easting: center.easting,
            northing: center.northing,
            confidence: cells[i],
        });
        let r_lo = (row as isize - reach).max(0) as usize;
        let r_hi = ((row as isize + reach) as usize).min(grid.rows - 1);
        let c_lo = (col as isize - reach).max(0) as usize;
        let c_hi = ((col as isize + reach) as usize).min(grid.cols - 1);
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let de = (c as f64 - col as f64) * grid.cell_size;
                let dn = (r as f64 - row as f64) * grid.cell_size;
                if de * de + dn * dn <= halo_sq {
                    cells[r * grid.cols + c] = 0.0;
                }
            }
        }
    }
    Ok(alarms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(e: f64, n: f64) -> Position {
        Position::new(e, n)
    }

    #[test]
    fn single_sample_gives_one_cell() {
        let g = rasterize(&[p(10.0, 20.0)], &[0.7], 0.05).unwrap();
        assert_eq!((g.rows, g.cols), (1, 1));
        assert_eq!(g.cells, vec![0.7]);
        let c = g.center(0, 0);
        assert!((c.easting - 10.0).abs() < 1e-12 && (c.northing - 20.0).abs() < 1e-12);
    }

    #[test]
    fn gap_between_two_samples_is_a_linear_ramp() {
        let g = rasterize(&[p(0.0, 0.0), p(1.0, 0.0)], &[0.0, 1.0], 0.25).unwrap();
        assert_eq!((g.rows, g.cols), (1, 5));
        for (i, v) in g.cells.iter().enumerate() {
            assert!((v - i as f64 * 0.25).abs() < 1e-12);
        }
        assert!(g.occupied.iter().all(|o| *o));
    }

    #[test]
    fn collisions_keep_the_maximum() {
        let g = rasterize(
            &[p(0.0, 0.0), p(0.01, 0.0), p(1.0, 0.0)],
            &[0.2, 0.9, 0.1],
            0.1,
        )
        .unwrap();
        assert_eq!(g.get(0, 0), 0.9);
    }

    #[test]
    fn grid_max_equals_trace_max() {
        let pos: Vec<Position> = (0..50)
            .map(|i| p(i as f64 * 0.05, (i % 3) as f64 * 0.05))
            .collect();
        let conf: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let g = rasterize(&pos, &conf, 0.05).unwrap();
        assert_eq!(g.max_value(), conf.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn cells_off_the_track_stay_empty() {
        // An L-shaped track leaves the far corner unfilled.
        let pos = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0)];
        let g = rasterize(&pos, &[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!((g.rows, g.cols), (3, 3));
        assert!(!g.occupied[g.index(2, 0)]);
        assert_eq!(g.get(2, 0), 0.0);
        assert!(g.occupied[g.index(1, 2)]);
    }

    #[test]
    fn rasterize_rejects_bad_input() {
        assert!(rasterize(&[], &[], 0.05).is_err());
        assert!(rasterize(&[p(0.0, 0.0)], &[1.0], 0.0).is_err());
        assert!(rasterize(&[p(0.0, 0.0)], &[-1.0], 0.1).is_err());
        assert!(rasterize(&[p(0.0, 0.0)], &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn single_positive_cell_gives_one_alarm() {
        let pos: Vec<Position> = (0..5).map(|i| p(i as f64, 0.0)).collect();
        let mut grid = rasterize(&pos, &[0.0; 5], 1.0).unwrap();
        grid.cells[3] = 0.4;
        let alarms = extract_alarms(&grid, 0.5).unwrap();
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].easting, 3.0);
        assert_eq!(alarms[0].confidence, 0.4);
    }

    #[test]
    fn nearby_peak_is_suppressed() {
        let pos = [p(0.0, 0.0), p(0.3, 0.0)];
        let g = rasterize(&pos, &[0.9, 0.8], 0.05).unwrap();
        let alarms = extract_alarms(&g, 0.5).unwrap();
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].confidence, 0.9);
    }

    #[test]
    fn ties_resolve_in_row_major_order() {
        let pos = [p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0)];
        let g = rasterize(&pos, &[0.5, 0.5, 0.5], 1.0).unwrap();
        let alarms = extract_alarms(&g, 0.5).unwrap();
        assert_eq!(alarms[0].position(), g.center(0, 0));
        assert_eq!(alarms[1].position(), g.center(0, 1));
    }

    #[test]
    fn extract_rejects_non_positive_halo() {
        let g = rasterize(&[p(0.0, 0.0)], &[1.0], 0.1).unwrap();
        assert!(extract_alarms(&g, 0.0).is_err());
    }
}
