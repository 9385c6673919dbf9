//! Trajectory CSV (`t,x,y,activity_label,source_id`) and SVG rendering.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{landmark_trajectory, Activity, FloorMap, LandmarkClass, MapError, TimedActivity, TimedPosition, Trajectory};
use crate::numfmt::fmt_sig9;

pub const TRAJECTORY_HEADER: &str = "t,x,y,activity_label,source_id";

/// One CSV row. Rows without a fix (empty `x`, `y`) still carry the
/// recognised activity, e.g. while inside a lift.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub xy: Option<[f64; 2]>,
    pub activity: Activity,
    pub source_id: String,
}

pub fn parse_trajectory_csv<R: BufRead>(r: R) -> Result<Vec<TrajectorySample>, MapError> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MapError::InvalidInput(format!("line {}: {e}", n + 1)))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != TRAJECTORY_HEADER {
                return Err(MapError::InvalidInput(format!("expected header `{TRAJECTORY_HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        let bad = |m: &str| MapError::InvalidInput(format!("line {}: {m}", n + 1));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let t: f64 = cols[0].parse().map_err(|_| bad("bad t"))?;
        let xy = match (cols[1], cols[2]) {
            ("", "") => None,
            (x, y) => Some([x.parse().map_err(|_| bad("bad x"))?, y.parse().map_err(|_| bad("bad y"))?]),
        };
        let activity = Activity::parse(cols[3]).ok_or_else(|| bad("unknown activity"))?;
        if cols[4].is_empty() {
            return Err(bad("empty source_id"));
        }
        out.push(TrajectorySample {
            t,
            xy,
            activity,
            source_id: cols[4].to_string(),
        });
    }
    if !header_seen {
        return Err(MapError::InvalidInput("missing header".into()));
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(samples: &[TrajectorySample], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in samples {
        let (x, y) = s.xy.map(|p| (fmt_sig9(p[0]), fmt_sig9(p[1]))).unwrap_or_default();
        writeln!(w, "{},{},{},{},{}", fmt_sig9(s.t), x, y, s.activity.name(), s.source_id)?;
    }
    Ok(())
}

/// Groups samples by source (first-appearance order) and builds each
/// landmarked trajectory.
pub fn trajectories_from_samples(samples: &[TrajectorySample]) -> Result<Vec<Trajectory>, MapError> {
    let mut ids: Vec<&str> = Vec::new();
    for s in samples {
        if !ids.contains(&s.source_id.as_str()) {
            ids.push(&s.source_id);
        }
    }
    ids.iter()
        .map(|id| {
            let mine = samples.iter().filter(|s| s.source_id == *id);
            let positions: Vec<TimedPosition> = mine.clone().filter_map(|s| s.xy.map(|xy| TimedPosition { t: s.t, xy })).collect();
            let activities: Vec<TimedActivity> = mine.map(|s| TimedActivity { t: s.t, activity: s.activity }).collect();
            landmark_trajectory(id, &positions, &activities)
        })
        .collect()
}

fn colour(c: LandmarkClass) -> &'static str {
    match c {
        LandmarkClass::Lift => "#d62728",
        LandmarkClass::Stairs => "#2ca02c",
        LandmarkClass::Room => "#1f77b4",
        LandmarkClass::Corner => "#ff7f0e",
    }
}

/// Paths in grey, landmark edges in black, landmarks as coloured dots;
/// an optional reference map is drawn as hollow squares.
pub fn render_svg(map: &FloorMap, reference: Option<&FloorMap>) -> String {
    let mut pts: Vec<[f64; 2]> = map.landmarks.iter().map(|l| l.xy).collect();
    pts.extend(map.paths.iter().flatten().copied());
    if let Some(r) = reference {
        pts.extend(r.landmarks.iter().map(|l| l.xy));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    if pts.is_empty() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let pad = 2.0;
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    // flip y so north is up
    let tx = |p: [f64; 2]| (p[0] - x0 + pad, y1 - p[1] + pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" width="{}" height="{}">"#,
        fmt_sig9(w),
        fmt_sig9(h),
        fmt_sig9(w * 20.0),
        fmt_sig9(h * 20.0)
    );
    for path in &map.paths {
        let d: Vec<String> = path
            .iter()
            .map(|&p| {
                let (x, y) = tx(p);
                format!("{},{}", fmt_sig9(x), fmt_sig9(y))
            })
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#bbbbbb" stroke-width="0.1"/>"##, d.join(" "));
    }
    for &(a, b) in &map.edges {
        let ((xa, ya), (xb, yb)) = (tx(map.landmarks[a].xy), tx(map.landmarks[b].xy));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="0.15"/>"#,
            fmt_sig9(xa),
            fmt_sig9(ya),
            fmt_sig9(xb),
            fmt_sig9(yb)
        );
    }
    if let Some(r) = reference {
        for l in &r.landmarks {
            let (x, y) = tx(l.xy);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="1" height="1" fill="none" stroke="{}" stroke-width="0.15"/>"#,
                fmt_sig9(x - 0.5),
                fmt_sig9(y - 0.5),
                colour(l.class)
            );
        }
    }
    for l in &map.landmarks {
        let (x, y) = tx(l.xy);
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="0.5" fill="{}"/>"#, fmt_sig9(x), fmt_sig9(y), colour(l.class));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::super::{Frame, MapLandmark};
    use super::*;

    #[test]
    fn csv_round_trip() {
        let samples = vec![
            TrajectorySample {
                t: 0.0,
                xy: Some([1.5, -2.0]),
                activity: Activity::Walking,
                source_id: "u1".into(),
            },
            TrajectorySample {
                t: 1.0,
                xy: None,
                activity: Activity::Lift,
                source_id: "u1".into(),
            },
        ];
        let mut buf = Vec::new();
        write_trajectory_csv(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,x,y,activity_label,source_id\n0,1.5,-2,walking,u1\n1,,,lift,u1\n");
        assert_eq!(parse_trajectory_csv(text.as_bytes()).unwrap(), samples);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_trajectory_csv("a,b\n".as_bytes()).is_err());
        assert!(parse_trajectory_csv("t,x,y,activity_label,source_id\n0,1,2,flying,u\n".as_bytes()).is_err());
        assert!(parse_trajectory_csv("".as_bytes()).is_err());
    }

    #[test]
    fn svg_mentions_every_landmark() {
        let m = FloorMap {
            landmarks: vec![
                MapLandmark { class: LandmarkClass::Lift, xy: [0.0, 0.0] },
                MapLandmark { class: LandmarkClass::Room, xy: [4.0, 3.0] },
            ],
            edges: vec![(0, 1)],
            paths: vec![vec![[0.0, 0.0], [4.0, 3.0]]],
            frame: Frame::World,
        };
        let svg = render_svg(&m, Some(&m));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
