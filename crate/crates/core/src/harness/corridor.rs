//! Cone corridor of the double lane change and the footprint check against it.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use super::{HarnessError, Trace};

/// One longitudinal section; `bounds` is `(lower, upper)` lateral position
/// (m, left positive), `None` for an unconstrained gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorSection {
    pub length: f64,
    pub bounds: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlcCorridor {
    /// Station (global x, m) of the entry gate.
    pub start: f64,
    pub sections: Vec<CorridorSection>,
}

impl DlcCorridor {
    /// ISO 3888-1 geometry for a vehicle of width `w`, with y = 0 on the
    /// entry lane centreline. The offset lane sits 3.5 m left of the entry
    /// lane's right-hand cone line; exit lane shares that line.
    pub fn iso3888(w: f64, start: f64) -> Self {
        let w1 = 1.1 * w + 0.25;
        let w3 = w + 1.0;
        let w5 = 1.3 * w + 0.25;
        let right = -0.5 * w1;
        let lane = |length: f64, lo: f64, width: f64| CorridorSection { length, bounds: Some((lo, lo + width)) };
        let gap = |length: f64| CorridorSection { length, bounds: None };
        DlcCorridor {
            start,
            sections: vec![
                lane(15.0, right, w1),
                gap(30.0),
                lane(25.0, right + 3.5, w3),
                gap(25.0),
                lane(15.0, right, w5),
                lane(15.0, right, w5),
            ],
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.sections.iter().map(|s| s.length).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sections.is_empty() {
            return Err("corridor has no sections".into());
        }
        if !self.start.is_finite() {
            return Err("corridor start must be finite".into());
        }
        for (i, s) in self.sections.iter().enumerate() {
            if !(s.length > 0.0 && s.length.is_finite()) {
                return Err(format!("section {i}: length must be > 0"));
            }
            if let Some((lo, hi)) = s.bounds {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(format!("section {i}: lower bound must be below upper bound"));
                }
            }
        }
        if self.sections.first().and_then(|s| s.bounds).is_none()
            || self.sections.last().and_then(|s| s.bounds).is_none()
        {
            return Err("corridor must begin and end with a constrained lane".into());
        }
        for (i, w) in self.sections.windows(2).enumerate() {
            if let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (w[0].bounds, w[1].bounds) {
                if a_hi <= b_lo || b_hi <= a_lo {
                    return Err(format!("sections {i} and {} do not overlap", i + 1));
                }
            }
        }
        Ok(())
    }

    /// Lateral bounds at station `x`; `None` outside the corridor or in a gap.
    pub fn bounds_at(&self, x: f64) -> Option<(f64, f64)> {
        let mut s0 = self.start;
        for s in &self.sections {
            let s1 = s0 + s.length;
            if x >= s0 && x <= s1 && s.bounds.is_some() {
                return s.bounds;
            }
            s0 = s1;
        }
        None
    }

    /// Smooth reference line through the lane centres: constant in each
    /// lane, half-cosine blends across the gaps, extended by `before` and
    /// `after` metres, sampled every `spacing` metres.
    pub fn centerline(&self, before: f64, after: f64, spacing: f64) -> Vec<(f64, f64)> {
        let mut knots: Vec<(f64, f64, f64)> = Vec::new(); // (x0, x1, centre)
        let mut s0 = self.start;
        for s in &self.sections {
            if let Some((lo, hi)) = s.bounds {
                knots.push((s0, s0 + s.length, 0.5 * (lo + hi)));
            }
            s0 += s.length;
        }
        let centre_at = |x: f64| -> f64 {
            if x <= knots[0].1 {
                return knots[0].2;
            }
            for w in knots.windows(2) {
                let (a, b) = (w[0], w[1]);
                if x <= b.0 {
                    if x <= a.1 {
                        return a.2;
                    }
                    let u = (x - a.1) / (b.0 - a.1);
                    return a.2 + (b.2 - a.2) * 0.5 * (1.0 - (PI * u).cos());
                }
                if x <= b.1 {
                    return b.2;
                }
            }
            knots[knots.len() - 1].2
        };
        let x_first = self.start - before;
        let n = ((self.end() + after - x_first) / spacing).ceil() as usize;
        (0..=n)
            .map(|i| {
                let x = x_first + i as f64 * spacing;
                (x, centre_at(x))
            })
            .collect()
    }

    /// Text form: one section per line, `length, lower, upper` or
    /// `length, free`.
    pub fn parse(text: &str, start: f64, origin: &str) -> Result<Self, HarnessError> {
        let mut sections = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| HarnessError::Invalid(format!("{origin}:{}: {m}", idx + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
            let section = match fields.as_slice() {
                [len, "free"] => CorridorSection { length: num(len)?, bounds: None },
                [len, lo, hi] => CorridorSection { length: num(len)?, bounds: Some((num(lo)?, num(hi)?)) },
                _ => return Err(bad("expected `length, lower, upper` or `length, free`")),
            };
            sections.push(section);
        }
        let c = DlcCorridor { start, sections };
        c.validate().map_err(|m| HarnessError::Invalid(format!("{origin}: {m}")))?;
        Ok(c)
    }

    pub fn read(path: &Path, start: f64) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, start, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# length, lower, upper (m, left positive); `free` marks an unconstrained gap\n");
        for s in &self.sections {
            match s.bounds {
                Some((lo, hi)) => out.push_str(&format!("{}, {}, {}\n", s.length, lo, hi)),
                None => out.push_str(&format!("{}, free\n", s.length)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DlcResult {
    pub passed: bool,
    /// Worst lateral excursion of any footprint corner beyond a cone line (m).
    pub max_exceedance: f64,
    /// Time of the worst excursion, if any.
    pub worst_time: Option<f64>,
    /// The whole footprint passed the exit gate.
    pub completed: bool,
}

/// Checks the four footprint corners (`length` x `width` rectangle centred on
/// the trace pose) against the corridor at every row.
pub fn evaluate_dlc(trace: &Trace, corridor: &DlcCorridor, length: f64, width: f64) -> Result<DlcResult, HarnessError> {
    let (it, ix, iy, ih) = (trace.index("t")?, trace.index("x")?, trace.index("y")?, trace.index("heading")?);
    let (hl, hw) = (0.5 * length, 0.5 * width);
    let mut worst = 0.0f64;
    let mut worst_time = None;
    let mut completed = false;
    for row in trace.rows() {
        let (sin_h, cos_h) = row[ih].sin_cos();
        let corners = [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
            .map(|(a, b)| (row[ix] + a * cos_h - b * sin_h, row[iy] + a * sin_h + b * cos_h));
        for (cx, cy) in corners {
            if let Some((lo, hi)) = corridor.bounds_at(cx) {
                let excess = (lo - cy).max(cy - hi);
                if excess > worst {
                    worst = excess;
                    worst_time = Some(row[it]);
                }
            }
        }
        if corners.iter().all(|(cx, _)| *cx > corridor.end()) {
            completed = true;
        }
    }
    Ok(DlcResult { passed: worst <= 0.0 && completed, max_exceedance: worst, worst_time, completed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(y: f64, x_end: f64) -> Trace {
        let mut t = Trace::new(["t", "x", "y", "heading"]);
        let mut x = -10.0;
        let mut time = 0.0;
        while x <= x_end {
            t.push(vec![time, x, y, 0.0]);
            x += 0.5;
            time += 0.01;
        }
        t
    }

    fn wide() -> DlcCorridor {
        DlcCorridor { start: 0.0, sections: vec![CorridorSection { length: 100.0, bounds: Some((-10.0, 10.0)) }] }
    }

    #[test]
    fn straight_line_in_wide_corridor_passes() {
        let r = evaluate_dlc(&straight(0.0, 110.0), &wide(), 4.4, 1.8).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_exceedance, 0.0);
    }

    #[test]
    fn lateral_offset_exceedance_matches_geometry() {
        // corner sits at y + w/2; offset so that it pokes 1 m past the upper line
        let r = evaluate_dlc(&straight(10.0 + 1.0 - 0.9, 110.0), &wide(), 4.4, 1.8).unwrap();
        assert!(!r.passed);
        assert!((r.max_exceedance - 1.0).abs() < 1e-9, "{}", r.max_exceedance);
    }

    #[test]
    fn unfinished_run_fails() {
        let r = evaluate_dlc(&straight(0.0, 50.0), &wide(), 4.4, 1.8).unwrap();
        assert!(!r.completed && !r.passed);
    }

    #[test]
    fn missing_pose_column() {
        let t = Trace::new(["t", "x"]);
        assert!(matches!(evaluate_dlc(&t, &wide(), 1.0, 1.0), Err(HarnessError::Schema(_))));
    }

    #[test]
    fn iso_geometry() {
        let c = DlcCorridor::iso3888(1.83, 10.0);
        c.validate().unwrap();
        assert!((c.end() - 135.0).abs() < 1e-12);
        let (lo1, hi1) = c.bounds_at(20.0).unwrap();
        assert!((hi1 - lo1 - (1.1 * 1.83 + 0.25)).abs() < 1e-12);
        assert!(c.bounds_at(40.0).is_none());
        let (lo3, hi3) = c.bounds_at(70.0).unwrap();
        assert!((lo3 - lo1 - 3.5).abs() < 1e-12 && (hi3 - lo3 - 2.83).abs() < 1e-12);
        let (lo5, _) = c.bounds_at(130.0).unwrap();
        assert_eq!(lo5, lo1);
    }

    #[test]
    fn centerline_stays_in_lanes() {
        let c = DlcCorridor::iso3888(1.83, 0.0);
        for (x, y) in c.centerline(20.0, 20.0, 0.5) {
            if let Some((lo, hi)) = c.bounds_at(x) {
                assert!((y - 0.5 * (lo + hi)).abs() < 1e-9, "x {x}");
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let c = DlcCorridor::iso3888(2.0, 5.0);
        let back = DlcCorridor::parse(&c.to_text(), 5.0, "c").unwrap();
        assert_eq!(back, c);
        assert!(DlcCorridor::parse("10, free\n", 0.0, "c").is_err());
        assert!(DlcCorridor::parse("10, 1, -1\n", 0.0, "c").is_err());
    }
}
