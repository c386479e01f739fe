//! Cumulative coverage of the mission rectangle.

use nalgebra::Vector2;

#[derive(Debug, Clone)]
pub struct CoverageGrid {
    cell: f64,
    half_width: f64,
    half_height: f64,
    nx: usize,
    ny: usize,
    first_covered: Vec<f64>,
    covered: usize,
}

impl CoverageGrid {
    pub fn new(half_width: f64, half_height: f64, cell: f64) -> Self {
        let nx = ((2.0 * half_width / cell).ceil() as usize).max(1);
        let ny = ((2.0 * half_height / cell).ceil() as usize).max(1);
        Self {
            cell,
            half_width,
            half_height,
            nx,
            ny,
            first_covered: vec![f64::INFINITY; nx * ny],
            covered: 0,
        }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn covered(&self) -> usize {
        self.covered
    }

    pub fn fraction(&self) -> f64 {
        self.covered as f64 / self.cells() as f64
    }

    fn center(&self, ix: usize, iy: usize) -> Vector2<f64> {
        // the last column/row may be clipped by the rectangle
        let x0 = -self.half_width + ix as f64 * self.cell;
        let y0 = -self.half_height + iy as f64 * self.cell;
        let x1 = (x0 + self.cell).min(self.half_width);
        let y1 = (y0 + self.cell).min(self.half_height);
        Vector2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }

    /// First time each cell was covered (infinite when never).
    pub fn first_covered(&self) -> &[f64] {
        &self.first_covered
    }

    /// Marks every cell whose centre lies within `radius` of an active robot.
    pub fn update(&mut self, robots_xy: &[Option<Vector2<f64>>], radius: f64, t: f64) {
        let r2 = radius * radius;
        for p in robots_xy.iter().flatten() {
            let lo_x = ((p.x - radius + self.half_width) / self.cell)
                .floor()
                .max(0.0) as usize;
            let hi_x = (((p.x + radius + self.half_width) / self.cell).floor() as isize)
                .min(self.nx as isize - 1);
            let lo_y = ((p.y - radius + self.half_height) / self.cell)
                .floor()
                .max(0.0) as usize;
            let hi_y = (((p.y + radius + self.half_height) / self.cell).floor() as isize)
                .min(self.ny as isize - 1);
            if hi_x < 0 || hi_y < 0 {
                continue;
            }
            for ix in lo_x..=hi_x as usize {
                for iy in lo_y..=hi_y as usize {
                    let k = iy * self.nx + ix;
                    if self.first_covered[k].is_finite() {
                        continue;
                    }
                    if (self.center(ix, iy) - p).norm_squared() <= r2 {
                        self.first_covered[k] = t;
                        self.covered += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_changes_nothing() {
        let mut g = CoverageGrid::new(10.0, 10.0, 1.0);
        g.update(&[None, None], 3.0, 0.0);
        assert_eq!(g.covered(), 0);
    }

    #[test]
    fn monotone_and_complete() {
        let mut g = CoverageGrid::new(10.0, 5.0, 0.5);
        let mut last = 0.0;
        for k in 0..=40 {
            let x = -10.0 + k as f64 * 0.5;
            g.update(&[Some(Vector2::new(x, 0.0))], 6.0, k as f64);
            assert!(g.fraction() >= last);
            last = g.fraction();
        }
        assert_eq!(g.covered(), g.cells());
    }

    #[test]
    fn footprint_area() {
        let mut g = CoverageGrid::new(20.0, 20.0, 0.1);
        g.update(&[Some(Vector2::zeros())], 5.0, 0.0);
        let area = g.covered() as f64 * 0.01;
        assert!((area - std::f64::consts::PI * 25.0).abs() < 1.0);
    }
}
