//! Random-waypoint targets and detection bookkeeping.

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub position: Vector2<f64>,
    pub waypoint: Vector2<f64>,
    pub speed_max: f64,
    pub detected_at: Option<f64>,
    /// Robot that made the detection.
    pub detected_by: Option<usize>,
}

fn random_point<R: Rng>(rng: &mut R, half_width: f64, half_height: f64) -> Vector2<f64> {
    Vector2::new(
        rng.random_range(-half_width..=half_width),
        rng.random_range(-half_height..=half_height),
    )
}

/// `count` targets placed uniformly in the rectangle.
pub fn spawn_targets<R: Rng>(
    rng: &mut R,
    count: usize,
    half_width: f64,
    half_height: f64,
    speed_max: f64,
) -> Vec<Target> {
    (0..count)
        .map(|_| {
            let position = random_point(rng, half_width, half_height);
            let waypoint = random_point(rng, half_width, half_height);
            Target {
                position,
                waypoint,
                speed_max,
                detected_at: None,
                detected_by: None,
            }
        })
        .collect()
}

/// Moves each target toward its waypoint at `speed_max`, drawing a new
/// waypoint on arrival. Positions stay inside the rectangle.
pub fn update_targets<R: Rng>(
    targets: &mut [Target],
    dt: f64,
    rng: &mut R,
    half_width: f64,
    half_height: f64,
) {
    for t in targets.iter_mut() {
        if t.speed_max <= 0.0 {
            continue;
        }
        let mut budget = t.speed_max * dt;
        while budget > 0.0 {
            let to = t.waypoint - t.position;
            let dist = to.norm();
            if dist <= budget {
                t.position = t.waypoint;
                budget -= dist;
                t.waypoint = random_point(rng, half_width, half_height);
                if dist == 0.0 {
                    break;
                }
            } else {
                t.position += to * (budget / dist);
                budget = 0.0;
            }
        }
        t.position.x = t.position.x.clamp(-half_width, half_width);
        t.position.y = t.position.y.clamp(-half_height, half_height);
    }
}

/// Marks undetected targets within `r_s` (x-y) of an active robot. Returns
/// the indices newly detected.
pub fn check_detection(
    targets: &mut [Target],
    robots_xy: &[Option<Vector2<f64>>],
    r_s: f64,
    t: f64,
) -> Vec<usize> {
    let r2 = r_s * r_s;
    let mut newly = Vec::new();
    for (k, target) in targets.iter_mut().enumerate() {
        if target.detected_at.is_some() {
            continue;
        }
        let hit = robots_xy
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p)))
            .find(|(_, p)| (p - target.position).norm_squared() <= r2);
        if let Some((i, _)) = hit {
            target.detected_at = Some(t);
            target.detected_by = Some(i);
            newly.push(k);
        }
    }
    newly
}
