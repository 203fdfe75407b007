use nalgebra::DMatrix;

use super::{LargeScaleGains, LineParams, NetworkGeometry, NetworkKind};
use crate::error::{Error, Result};

/// Line network with `bases` single-antenna bases spaced `spacing` apart and
/// one single-antenna user per base at perpendicular offset `offset`.
pub fn line_geometry(bases: usize, spacing: f64, offset: f64) -> Result<NetworkGeometry> {
    if bases == 0 {
        return Err(Error::InvalidInput("line network needs at least one base".into()));
    }
    if !(spacing.is_finite() && offset.is_finite() && spacing > 0.0 && offset >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "line spacing {spacing} and offset {offset} must be finite, spacing > 0"
        )));
    }
    Ok(NetworkGeometry {
        kind: NetworkKind::Line,
        base_positions: (0..bases).map(|j| [j as f64 * spacing, 0.0]).collect(),
        user_positions: (0..bases).map(|i| [i as f64 * spacing, offset]).collect(),
        base_antennas: vec![1; bases],
        user_antennas: vec![1; bases],
        boresight: Vec::new(),
        base_site: (0..bases).collect(),
        serving: (0..bases).collect(),
        line: Some(LineParams { spacing, offset }),
    })
}

/// Distance between user `user` and base `base` on the wrapped line, using the
/// shorter of the two circular index offsets.
pub fn wrap_distance(user: usize, base: usize, geometry: &NetworkGeometry) -> Result<f64> {
    let params = match (geometry.kind, geometry.line) {
        (NetworkKind::Line, Some(p)) => p,
        _ => return Err(Error::InvalidInput("wrap_distance needs a line network".into())),
    };
    let b = geometry.num_bases();
    if user >= b {
        return Err(Error::IndexOutOfRange { index: user, limit: b });
    }
    if base >= b {
        return Err(Error::IndexOutOfRange { index: base, limit: b });
    }
    let forward = (user + b - base) % b;
    let hops = forward.min(b - forward) as f64;
    Ok((params.offset.powi(2) + (params.spacing * hops).powi(2)).sqrt())
}

/// Path-loss gains `d_ij^(-eta)` on the wrapped line.
pub fn line_gains(geometry: &NetworkGeometry, exponent: f64) -> Result<LargeScaleGains> {
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(Error::InvalidInput(format!("path-loss exponent {exponent} must be > 0")));
    }
    let b = geometry.num_bases();
    let mut gains = DMatrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            gains[(i, j)] = wrap_distance(i, j, geometry)?.powf(-exponent);
        }
    }
    LargeScaleGains::new(gains)
}
