//! Exact grid traversal (Amanatides & Woo) for range queries on unit cells.

use crate::domain::Cell;

/// Walks the cells crossed by a ray from `origin` at world `angle` and
/// returns the distance to the first cell for which `hit` yields a value,
/// together with that value. Rays that find nothing report `max_range`.
///
/// When the ray crosses a cell corner exactly, the x neighbour is entered
/// first.
pub fn cast<H>(
    origin: (f64, f64),
    angle: f64,
    max_range: f64,
    mut hit: impl FnMut(Cell) -> Option<H>,
) -> (f64, Option<H>) {
    let (ox, oy) = origin;
    let mut cell = Cell::new(ox.floor() as i32, oy.floor() as i32);
    if let Some(h) = hit(cell) {
        return (0.0, Some(h));
    }
    let (dx, dy) = (angle.cos(), angle.sin());
    let axis = |o: f64, c: i32, d: f64| -> (i32, f64, f64) {
        if d > 0.0 {
            (1, (c as f64 + 1.0 - o) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (o - c as f64) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (step_x, mut t_x, delta_x) = axis(ox, cell.x, dx);
    let (step_y, mut t_y, delta_y) = axis(oy, cell.y, dy);
    loop {
        let t = if t_x <= t_y {
            cell.x += step_x;
            let t = t_x;
            t_x += delta_x;
            t
        } else {
            cell.y += step_y;
            let t = t_y;
            t_y += delta_y;
            t
        };
        if t > max_range {
            return (max_range, None);
        }
        if let Some(h) = hit(cell) {
            return (t, Some(h));
        }
    }
}
