//! Vertical separation layer: lifts one robot of each close x-y pair.

use nalgebra::Vector2;

/// Per-robot z adjustment. For every pair closer than `threshold` in the
/// x-y plane the lower-id robot is raised by `offset`.
pub fn z_safety(positions_xy: &[Option<Vector2<f64>>], threshold: f64, offset: f64) -> Vec<f64> {
    let mut adj = vec![0.0; positions_xy.len()];
    let t2 = threshold * threshold;
    for (i, pi) in positions_xy.iter().enumerate() {
        let Some(pi) = pi else { continue };
        for pj in positions_xy[i + 1..].iter().flatten() {
            if (pi - pj).norm_squared() < t2 {
                adj[i] = offset;
                break;
            }
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_apart_no_offset() {
        let ps = [Some(Vector2::new(0.0, 0.0)), Some(Vector2::new(10.0, 0.0))];
        assert_eq!(z_safety(&ps, 3.0, 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn one_pair_one_offset() {
        let ps = [
            Some(Vector2::new(0.0, 0.0)),
            Some(Vector2::new(20.0, 0.0)),
            Some(Vector2::new(1.0, 0.0)),
            None,
        ];
        assert_eq!(z_safety(&ps, 3.0, 1.0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inactive_robots_ignored() {
        let ps = [
            Some(Vector2::new(0.0, 0.0)),
            None,
            Some(Vector2::new(5.0, 0.0)),
        ];
        assert_eq!(z_safety(&ps, 3.0, 1.0), vec![0.0; 3]);
    }
}
