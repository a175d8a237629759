use serde::{Deserialize, Serialize};

use super::{AnalyticsError, Result};
use crate::tracking::Track;

/// Travel direction label. Direction 1 moves toward the positive end of the
/// dominant BEV axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Direction {
    One,
    Two,
}

impl Direction {
    pub fn number(self) -> u8 {
        match self {
            Direction::One => 1,
            Direction::Two => 2,
        }
    }
}

impl From<Direction> for u8 {
    fn from(d: Direction) -> u8 {
        d.number()
    }
}

impl TryFrom<u8> for Direction {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Direction::One),
            2 => Ok(Direction::Two),
            other => Err(format!("direction must be 1 or 2, got {other}")),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Bearing in degrees `[0, 360)` measured from +x toward +y.
pub fn bearing_deg(dx: f64, dy: f64) -> f64 {
    let b = dy.atan2(dx).to_degrees();
    if b < 0.0 {
        (b + 360.0) % 360.0
    } else {
        b
    }
}

/// Direction label of a displacement vector; `None` for a zero vector.
pub fn direction_of_vector(dx: f64, dy: f64) -> Option<Direction> {
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let along = if dx.abs() >= dy.abs() { dx } else { dy };
    Some(if along > 0.0 { Direction::One } else { Direction::Two })
}

/// Direction and bearing from a track's first and last observed centers.
pub fn direction_of(track: &Track, min_displacement: f64) -> Result<(Direction, f64)> {
    let (start, end) = match (track.first_detection(), track.last_detection()) {
        (Some(a), Some(b)) => (a.center, b.center),
        _ => return Err(AnalyticsError::TooShort(track.id)),
    };
    let (dx, dy) = (end.x - start.x, end.y - start.y);
    if dx.hypot(dy) < min_displacement {
        return Err(AnalyticsError::TooShort(track.id));
    }
    let dir = direction_of_vector(dx, dy).ok_or(AnalyticsError::TooShort(track.id))?;
    Ok((dir, bearing_deg(dx, dy)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::test_support::track_through;

    #[test]
    fn axis_aligned_examples() {
        let t = track_through(1, &[(0.0, 0.0), (0.0, 100.0)]);
        let (d, b) = direction_of(&t, 10.0).unwrap();
        assert_eq!(d, Direction::One);
        assert!((b - 90.0).abs() < 1e-12);

        let t = track_through(1, &[(0.0, 100.0), (0.0, 0.0)]);
        let (d, b) = direction_of(&t, 10.0).unwrap();
        assert_eq!(d, Direction::Two);
        assert!((b - 270.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_is_too_short() {
        let t = track_through(7, &[(5.0, 5.0), (5.0, 5.0)]);
        assert_eq!(direction_of(&t, 10.0), Err(AnalyticsError::TooShort(7)));
    }

    #[test]
    fn bearing_range() {
        assert_eq!(bearing_deg(1.0, 0.0), 0.0);
        assert!((bearing_deg(-1.0, 0.0) - 180.0).abs() < 1e-12);
        assert!((bearing_deg(0.0, -1.0) - 270.0).abs() < 1e-12);
        assert!((bearing_deg(1.0, -1e-18)) < 360.0);
    }

    #[test]
    fn direction_serializes_as_number() {
        assert_eq!(serde_json::to_string(&Direction::Two).unwrap(), "2");
        let d: Direction = serde_json::from_str("1").unwrap();
        assert_eq!(d, Direction::One);
        assert!(serde_json::from_str::<Direction>("3").is_err());
    }
}
