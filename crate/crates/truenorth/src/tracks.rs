//! Feature-trajectory data model, track-file ingestion, keyframe selection
//! and trajectory smoothness metrics.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Unit, Vector3};

use crate::error::{Error, Result};
use crate::sphere::{wide_angle_bearing_at, Bearing, ErGeometry};
use crate::textio;

/// One tracked feature: a bearing per frame over a consecutive frame range.
#[derive(Debug, Clone)]
pub struct FeatureTrajectory {
    pub id: u64,
    pub start_frame: usize,
    pub points: Vec<Bearing>,
}

impl FeatureTrajectory {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.points.len() - 1
    }

    pub fn bearing_at(&self, frame: usize) -> Option<&Bearing> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|i| self.points.get(i))
    }

    /// True when the feature is tracked over the whole closed range `[a, b]`.
    pub fn alive_over(&self, a: usize, b: usize) -> bool {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        self.start_frame <= lo && self.end_frame() >= hi
    }
}

/// Pixel-to-bearing convention of the source footage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Equirect(ErGeometry),
    WideAngle { width: u32, height: u32, hfov_deg: f64 },
}

impl Projection {
    pub fn bearing_at(&self, x: f64, y: f64) -> Result<Bearing> {
        match *self {
            Projection::Equirect(g) => g.bearing_at(x, y),
            Projection::WideAngle { width, height, hfov_deg } => {
                wide_angle_bearing_at(width, height, hfov_deg, x, y)
            }
        }
    }

    pub fn er_geometry(&self) -> Option<ErGeometry> {
        match *self {
            Projection::Equirect(g) => Some(g),
            Projection::WideAngle { .. } => None,
        }
    }
}

/// All feature trajectories of a clip.
#[derive(Debug, Clone)]
pub struct TrackSet {
    pub trajectories: Vec<FeatureTrajectory>,
    pub frame_count: usize,
    pub projection: Projection,
}

impl TrackSet {
    pub fn new(
        trajectories: Vec<FeatureTrajectory>,
        frame_count: usize,
        projection: Projection,
    ) -> Result<Self> {
        for t in &trajectories {
            if t.points.is_empty() {
                return Err(Error::Validation(format!("track {} has no points", t.id)));
            }
            if t.end_frame() >= frame_count {
                return Err(Error::Validation(format!(
                    "track {} spans frames {}..={} outside clip of {} frames",
                    t.id,
                    t.start_frame,
                    t.end_frame(),
                    frame_count
                )));
            }
        }
        Ok(TrackSet { trajectories, frame_count, projection })
    }

    /// Trajectories tracked over the whole closed range `[a, b]`, with their
    /// indices into `self.trajectories`.
    pub fn alive_over(&self, a: usize, b: usize) -> Vec<usize> {
        self.trajectories
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive_over(a, b))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Ordered keyframe indices; always starts at 0 and ends at the last frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keyframes {
    indices: Vec<usize>,
}

impl Keyframes {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("keyframe list is empty"));
        }
        if indices[0] != 0 {
            return Err(Error::invalid("first keyframe must be frame 0"));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("keyframes must be strictly increasing"));
        }
        Ok(Keyframes { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Consecutive keyframe pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.windows(2).map(|w| (w[0], w[1]))
    }

    /// The keyframe nearest to `frame` (ties go to the earlier one).
    pub fn nearest(&self, frame: usize) -> usize {
        *self
            .indices
            .iter()
            .min_by_key(|&&k| (k.abs_diff(frame), k))
            .expect("keyframes are never empty")
    }
}

/// Walks frames forward and emits a new keyframe whenever the number of
/// features tracked continuously since the previous keyframe drops below
/// `survival_ratio` of the count alive at that keyframe. The first and last
/// frames are always keyframes.
pub fn select_keyframes(tracks: &TrackSet, survival_ratio: f64) -> Result<Keyframes> {
    if tracks.trajectories.is_empty() {
        return Err(Error::invalid("cannot select keyframes from an empty track set"));
    }
    if !(0.0..=1.0).contains(&survival_ratio) {
        return Err(Error::invalid(format!("survival ratio {survival_ratio} outside [0, 1]")));
    }
    let n = tracks.frame_count;
    let mut keyframes = vec![0usize];
    let mut anchor = 0usize;
    // Tracks born at or before the anchor; survivors at f are those still
    // alive, i.e. tracked continuously over [anchor, f].
    let mut base: Vec<&FeatureTrajectory> = tracks
        .trajectories
        .iter()
        .filter(|t| t.alive_over(anchor, anchor))
        .collect();
    let mut frame = 1usize;
    while frame < n {
        let survivors = base.iter().filter(|t| t.end_frame() >= frame).count();
        let threshold = survival_ratio * base.len() as f64;
        if (survivors as f64) < threshold {
            keyframes.push(frame);
            anchor = frame;
            base = tracks
                .trajectories
                .iter()
                .filter(|t| t.alive_over(anchor, anchor))
                .collect();
        }
        frame += 1;
    }
    if *keyframes.last().unwrap() != n - 1 {
        keyframes.push(n - 1);
    }
    Keyframes::new(keyframes)
}

/// Pairwise angular-separation check for features alive at each keyframe.
/// Returns one warning per keyframe that has a pair closer than `min_deg`.
pub fn separation_warnings(tracks: &TrackSet, keyframes: &Keyframes, min_deg: f64) -> Vec<String> {
    let cos_min = min_deg.to_radians().cos();
    let mut warnings = Vec::new();
    for &k in keyframes.indices() {
        let bearings: Vec<&Bearing> = tracks
            .trajectories
            .iter()
            .filter_map(|t| t.bearing_at(k))
            .collect();
        let mut close_pairs = 0usize;
        for i in 0..bearings.len() {
            for j in (i + 1)..bearings.len() {
                if bearings[i].dot(bearings[j]) > cos_min {
                    close_pairs += 1;
                }
            }
        }
        if close_pairs > 0 {
            warnings.push(format!(
                "keyframe {k}: {close_pairs} feature pair(s) closer than {min_deg} degrees"
            ));
        }
    }
    warnings
}

/// First- and second-order smoothness cost of one trajectory of 3-vectors,
/// unweighted: `Σ‖w_j − w_{j+1}‖` and `Σ‖w_{j+2} − 2w_{j+1} + w_j‖`.
pub fn trajectory_costs(points: &[Vector3<f64>]) -> (Option<f64>, Option<f64>) {
    let first = if points.len() >= 2 {
        Some(points.windows(2).map(|w| (w[0] - w[1]).norm()).sum())
    } else {
        None
    };
    let second = if points.len() >= 3 {
        Some(points.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).norm()).sum())
    } else {
        None
    };
    (first, second)
}

/// Empirical CDF of weighted per-trajectory smoothness costs, sampled at
/// 1000 evenly spaced quantiles. Each row is `(cost value, cumulative
/// fraction)`.
#[derive(Debug, Clone)]
pub struct SmoothnessCdf {
    pub first_order: Vec<(f64, f64)>,
    pub second_order: Vec<(f64, f64)>,
}

/// Pools per-trajectory first-/second-order costs (weighted by `alpha1`,
/// `alpha2`) over all trajectories and returns their empirical CDFs.
/// Trajectories shorter than 2 (respectively 3) points are skipped for the
/// order they cannot support.
pub fn smoothness_cdf(
    trajectories: &[Vec<Vector3<f64>>],
    alpha1: f64,
    alpha2: f64,
) -> SmoothnessCdf {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for t in trajectories {
        let (f, s) = trajectory_costs(t);
        if let Some(f) = f {
            first.push(alpha1 * f);
        }
        if let Some(s) = s {
            second.push(alpha2 * s);
        }
    }
    SmoothnessCdf {
        first_order: empirical_cdf(&mut first),
        second_order: empirical_cdf(&mut second),
    }
}

const CDF_QUANTILES: usize = 1000;

fn empirical_cdf(values: &mut [f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("smoothness costs are finite"));
    (1..=CDF_QUANTILES)
        .map(|k| {
            let q = k as f64 / CDF_QUANTILES as f64;
            let idx = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
            (values[idx], q)
        })
        .collect()
}

/// Pooled (summed) smoothness costs over all trajectories; the scalar
/// summary used to compare stabilization quality.
pub fn pooled_costs(trajectories: &[Vec<Vector3<f64>>]) -> (f64, f64) {
    let mut first = 0.0;
    let mut second = 0.0;
    for t in trajectories {
        let (f, s) = trajectory_costs(t);
        first += f.unwrap_or(0.0);
        second += s.unwrap_or(0.0);
    }
    (first, second)
}

// ── Track file format ──────────────────────────────────────────────────────
//
// Header: `tracks v1 projection=<er|wideangle> width=<W> height=<H>
// frames=<N> [hfov_deg=<F>]`, then one record per observation:
// `<track_id> <frame> <a> <b> [<c>]` where 2 values are pixel coordinates
// and 3 values are a raw direction vector.

pub fn parse_tracks(text: &str) -> Result<TrackSet> {
    let mut lines = textio::content_lines(text);
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::UnsupportedFormat("empty track file".into()))?;
    let (words, pairs) = textio::parse_header(header, header_no)?;
    textio::require_magic(&words, "tracks", "v1", header_no)?;

    let width: u32 = textio::parse_field(textio::required(&pairs, "width", header_no)?, "width", header_no)?;
    let height: u32 =
        textio::parse_field(textio::required(&pairs, "height", header_no)?, "height", header_no)?;
    let frames: usize =
        textio::parse_field(textio::required(&pairs, "frames", header_no)?, "frames", header_no)?;
    let projection = match textio::required(&pairs, "projection", header_no)? {
        "er" => Projection::Equirect(ErGeometry::new(width, height)?),
        "wideangle" => {
            let hfov_deg = match pairs.get("hfov_deg") {
                Some(v) => textio::parse_field(v, "hfov_deg", header_no)?,
                // Rough default horizontal FoV for wide-angle footage.
                None => 120.0,
            };
            Projection::WideAngle { width, height, hfov_deg }
        }
        other => {
            return Err(Error::UnsupportedFormat(format!("unknown projection tag '{other}'")))
        }
    };

    // Observations per track, keyed by frame; BTreeMap gives frame order.
    let mut obs: BTreeMap<u64, BTreeMap<usize, Bearing>> = BTreeMap::new();
    for (line_no, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 && toks.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 or 5 fields, got {}", toks.len()),
            });
        }
        let id: u64 = textio::parse_field(toks[0], "track id", line_no)?;
        let frame: usize = textio::parse_field(toks[1], "frame index", line_no)?;
        if frame >= frames {
            return Err(Error::Validation(format!(
                "line {line_no}: frame {frame} outside clip of {frames} frames"
            )));
        }
        let bearing = if toks.len() == 4 {
            let x: f64 = textio::parse_field(toks[2], "pixel x", line_no)?;
            let y: f64 = textio::parse_field(toks[3], "pixel y", line_no)?;
            projection.bearing_at(x, y)?
        } else {
            let x: f64 = textio::parse_field(toks[2], "direction x", line_no)?;
            let y: f64 = textio::parse_field(toks[3], "direction y", line_no)?;
            let z: f64 = textio::parse_field(toks[4], "direction z", line_no)?;
            Unit::try_new(Vector3::new(x, y, z), 1e-12).ok_or(Error::Parse {
                line: line_no,
                msg: "direction vector too short to normalize".into(),
            })?
        };
        if obs.entry(id).or_default().insert(frame, bearing).is_some() {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate observation of track {id} at frame {frame}"
            )));
        }
    }

    let mut trajectories = Vec::with_capacity(obs.len());
    for (id, frames_map) in obs {
        let start = *frames_map.keys().next().expect("non-empty by construction");
        let end = *frames_map.keys().last().unwrap();
        if frames_map.len() != end - start + 1 {
            return Err(Error::Validation(format!(
                "track {id} has gaps: {} observations over frames {start}..={end}",
                frames_map.len()
            )));
        }
        trajectories.push(FeatureTrajectory {
            id,
            start_frame: start,
            points: frames_map.into_values().collect(),
        });
    }
    TrackSet::new(trajectories, frames, projection)
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<TrackSet> {
    parse_tracks(&std::fs::read_to_string(path)?)
}

/// Serializes a track set in the track file format, emitting raw direction
/// records (three components).
pub fn format_tracks(tracks: &TrackSet) -> String {
    let mut out = String::new();
    match tracks.projection {
        Projection::Equirect(g) => {
            out.push_str(&format!(
                "tracks v1 projection=er width={} height={} frames={}\n",
                g.width, g.height, tracks.frame_count
            ));
        }
        Projection::WideAngle { width, height, hfov_deg } => {
            out.push_str(&format!(
                "tracks v1 projection=wideangle width={width} height={height} frames={} hfov_deg={hfov_deg}\n",
                tracks.frame_count
            ));
        }
    }
    for t in &tracks.trajectories {
        for (offset, b) in t.points.iter().enumerate() {
            out.push_str(&format!(
                "{} {} {:.17} {:.17} {:.17}\n",
                t.id,
                t.start_frame + offset,
                b.x,
                b.y,
                b.z
            ));
        }
    }
    out
}

pub fn save_tracks(tracks: &TrackSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_tracks(tracks))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn er_geometry() -> Projection {
        Projection::Equirect(ErGeometry::new(1920, 960).unwrap())
    }

    fn straight_track(id: u64, start: usize, end: usize) -> FeatureTrajectory {
        FeatureTrajectory {
            id,
            start_frame: start,
            points: (start..=end)
                .map(|f| {
                    Unit::new_normalize(Vector3::new(0.01 * f as f64, 0.2, 1.0))
                })
                .collect(),
        }
    }

    #[test]
    fn parse_single_track_span() {
        let text = "tracks v1 projection=er width=1920 height=960 frames=10\n\
                    7 3 100 200\n7 4 101 200\n7 5 102 200\n7 6 103 200\n7 7 104 200\n";
        let set = parse_tracks(text).unwrap();
        assert_eq!(set.trajectories.len(), 1);
        assert_eq!(set.trajectories[0].start_frame, 3);
        assert_eq!(set.trajectories[0].end_frame(), 7);
        assert_eq!(set.trajectories[0].points.len(), 5);
    }

    #[test]
    fn parse_raw_direction_normalizes() {
        let text = "tracks v1 projection=er width=1920 height=960 frames=2\n\
                    1 0 0.6 0.8 0.0\n1 1 0.6 0.8 0.0\n";
        let set = parse_tracks(text).unwrap();
        let b = set.trajectories[0].points[0];
        assert_relative_eq!(b.norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.x, 0.6, epsilon = 1e-12);
        assert_relative_eq!(b.y, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn parse_rejects_gap() {
        let text = "tracks v1 projection=er width=1920 height=960 frames=10\n\
                    1 3 100 200\n1 4 100 200\n1 6 100 200\n";
        assert!(matches!(parse_tracks(text), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "tracks v1 projection=er width=1920 height=960 frames=10\n\
                    1 0 100 200\nbogus record here\n";
        match parse_tracks(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_unknown_projection() {
        let text = "tracks v1 projection=cubemap width=1920 height=960 frames=10\n";
        assert!(matches!(parse_tracks(text), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn round_trip_through_format() {
        let set = TrackSet::new(
            vec![straight_track(3, 0, 9), straight_track(9, 2, 6)],
            10,
            er_geometry(),
        )
        .unwrap();
        let set2 = parse_tracks(&format_tracks(&set)).unwrap();
        assert_eq!(set2.trajectories.len(), 2);
        for (a, b) in set.trajectories.iter().zip(&set2.trajectories) {
            assert_eq!(a.start_frame, b.start_frame);
            for (pa, pb) in a.points.iter().zip(&b.points) {
                assert_relative_eq!(pa.into_inner(), pb.into_inner(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn keyframes_from_scripted_dropout() {
        // 100 tracks alive at frame 0; from frame 17 on only 59 of them remain.
        let mut trajectories = Vec::new();
        for id in 0..59u64 {
            trajectories.push(straight_track(id, 0, 29));
        }
        for id in 59..100u64 {
            trajectories.push(straight_track(id, 0, 16));
        }
        // Replacement features born at the dropout so later segments survive.
        for id in 100..160u64 {
            trajectories.push(straight_track(id, 17, 29));
        }
        let set = TrackSet::new(trajectories, 30, er_geometry()).unwrap();
        let kf = select_keyframes(&set, 0.6).unwrap();
        assert!(kf.indices().contains(&17), "keyframes: {:?}", kf.indices());
        assert_eq!(kf.indices().first(), Some(&0));
        assert_eq!(kf.indices().last(), Some(&29));
    }

    #[test]
    fn keyframes_full_span_tracks() {
        let set = TrackSet::new(
            (0..10).map(|id| straight_track(id, 0, 19)).collect(),
            20,
            er_geometry(),
        )
        .unwrap();
        let kf = select_keyframes(&set, 0.6).unwrap();
        assert_eq!(kf.indices(), &[0, 19]);
    }

    #[test]
    fn keyframes_single_frame_clip() {
        let set = TrackSet::new(vec![straight_track(0, 0, 0)], 1, er_geometry()).unwrap();
        let kf = select_keyframes(&set, 0.6).unwrap();
        assert_eq!(kf.indices(), &[0]);
    }

    #[test]
    fn keyframe_count_monotone_in_ratio() {
        let mut trajectories = Vec::new();
        for id in 0..50u64 {
            let end = 5 + (id as usize * 7) % 35;
            trajectories.push(straight_track(id, 0, end));
        }
        for id in 50..80u64 {
            trajectories.push(straight_track(id, 10, 39));
        }
        for id in 80..110u64 {
            trajectories.push(straight_track(id, 20, 39));
        }
        let set = TrackSet::new(trajectories, 40, er_geometry()).unwrap();
        let mut prev = 0usize;
        for ratio in [0.2, 0.4, 0.6, 0.8, 0.95] {
            let count = select_keyframes(&set, ratio).unwrap().len();
            assert!(count >= prev, "ratio {ratio} gave {count} < {prev}");
            prev = count;
        }
    }

    #[test]
    fn cdf_static_points_step_at_zero() {
        let trajectories: Vec<Vec<Vector3<f64>>> =
            (0..5).map(|_| vec![Vector3::new(0.0, 0.0, 1.0); 8]).collect();
        let cdf = smoothness_cdf(&trajectories, 1.0, 1.0);
        assert!(cdf.first_order.iter().all(|&(v, _)| v == 0.0));
        assert!(cdf.second_order.iter().all(|&(v, _)| v == 0.0));
        assert_eq!(cdf.first_order.len(), 1000);
    }

    #[test]
    fn cdf_constant_speed_great_circle() {
        // Points advancing 0.01 chord units per frame: 11 points, first-order
        // cost 0.1; second-order cost is curvature-only, of order 1e-4.
        let step = 2.0 * (0.01f64 / 2.0).asin();
        let points: Vec<Vector3<f64>> = (0..11)
            .map(|j| {
                let a = step * j as f64;
                Vector3::new(a.sin(), 0.0, a.cos())
            })
            .collect();
        let (first, second) = trajectory_costs(&points);
        assert_relative_eq!(first.unwrap(), 0.1, epsilon = 1e-6);
        assert!(second.unwrap() < 2e-3, "second-order {}", second.unwrap());
    }

    #[test]
    fn cdf_noisier_population_dominates() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut make = |scale: f64| -> Vec<Vec<Vector3<f64>>> {
            (0..200)
                .map(|_| {
                    (0..12)
                        .map(|_| {
                            Vector3::new(
                                scale * rng.random_range(-1.0..1.0),
                                scale * rng.random_range(-1.0..1.0),
                                1.0,
                            )
                            .normalize()
                        })
                        .collect()
                })
                .collect()
        };
        let calm = smoothness_cdf(&make(0.01), 1.0, 1.0);
        let noisy = smoothness_cdf(&make(0.02), 1.0, 1.0);
        // Stochastic dominance: at every quantile the noisier population's
        // cost is at least as large.
        let beats = calm
            .first_order
            .iter()
            .zip(&noisy.first_order)
            .filter(|((c, _), (n, _))| n >= c)
            .count();
        assert!(beats >= 990, "noisy CDF left of calm at {} quantiles", 1000 - beats);
    }

    #[test]
    fn cdf_invariant_under_reordering() {
        let mut trajectories: Vec<Vec<Vector3<f64>>> = (0..20)
            .map(|i| {
                (0..10)
                    .map(|j| Vector3::new(0.01 * (i + j) as f64, 0.02 * j as f64, 1.0).normalize())
                    .collect()
            })
            .collect();
        let a = smoothness_cdf(&trajectories, 2.0, 3.0);
        trajectories.reverse();
        let b = smoothness_cdf(&trajectories, 2.0, 3.0);
        assert_eq!(a.first_order, b.first_order);
        assert_eq!(a.second_order, b.second_order);
    }

    #[test]
    fn separation_warning_fires_for_close_features() {
        let close = vec![
            FeatureTrajectory {
                id: 0,
                start_frame: 0,
                points: vec![Unit::new_normalize(Vector3::new(0.0, 0.0, 1.0)); 3],
            },
            FeatureTrajectory {
                id: 1,
                start_frame: 0,
                points: vec![Unit::new_normalize(Vector3::new(0.001, 0.0, 1.0)); 3],
            },
        ];
        let set = TrackSet::new(close, 3, er_geometry()).unwrap();
        let kf = select_keyframes(&set, 0.6).unwrap();
        let warnings = separation_warnings(&set, &kf, 2.0);
        assert!(!warnings.is_empty());
    }
}
