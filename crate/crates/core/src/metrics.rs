//! Sampling, aggregation and serialisation of simulation output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkState, PieceProfile};

const TOP_GROUPS: usize = 5;

/// One observation of the swarm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub t: f64,
    pub population: u64,
    /// Size of the strictly largest group, 0 when there is none.
    pub largest_club_size: u64,
    pub top_groups: Vec<(PieceProfile, u64)>,
    /// `(n0, n1, n2)` for two-piece files: empty, piece 0 only, piece 1 only.
    pub type_counts: Option<[u64; 3]>,
}

impl MetricsSample {
    pub fn capture(t: f64, state: &NetworkState) -> Self {
        let hist = state.hist();
        let mut top_groups = hist.sorted_groups();
        top_groups.truncate(TOP_GROUPS);
        let type_counts = (state.k() == 2).then(|| {
            [
                hist.count(&PieceProfile::empty(2)),
                hist.count(&PieceProfile::from_pieces(2, [0])),
                hist.count(&PieceProfile::from_pieces(2, [1])),
            ]
        });
        Self {
            t,
            population: state.population() as u64,
            largest_club_size: hist.largest_club_size().unwrap_or(0),
            top_groups,
            type_counts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournRecord {
    pub peer_id: u64,
    pub t_arrive: f64,
    pub t_depart: f64,
}

impl SojournRecord {
    pub fn sojourn(&self) -> f64 {
        self.t_depart - self.t_arrive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub seed: u64,
    pub stream: u64,
}

/// Output of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub samples: Vec<MetricsSample>,
    pub sojourns: Vec<SojournRecord>,
    /// The population cap was hit and the run was cut short.
    pub exploded: bool,
    pub provenance: RngProvenance,
    pub events: u64,
    pub final_t: f64,
}

impl RunResult {
    pub fn population_series(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.t, s.population as f64))
            .collect()
    }
}

/// Replication-averaged time series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSeries {
    pub t: Vec<f64>,
    pub population: Vec<f64>,
    pub largest_club: Vec<f64>,
}

impl MeanSeries {
    pub fn population_points(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.population.iter().copied()).collect()
    }

    pub fn largest_club_points(&self) -> Vec<(f64, f64)> {
        self.t.iter().copied().zip(self.largest_club.iter().copied()).collect()
    }
}

/// Pointwise mean of population and largest-club series, in input order.
pub fn average_replications(results: &[RunResult]) -> Result<MeanSeries> {
    let Some(first) = results.first() else {
        return Ok(MeanSeries::default());
    };
    let grid: Vec<f64> = first.samples.iter().map(|s| s.t).collect();
    for r in results {
        if r.samples.len() != grid.len() || r.samples.iter().zip(&grid).any(|(s, t)| s.t != *t) {
            return Err(Error::MismatchedGrids);
        }
    }
    let n = results.len() as f64;
    let mut out = MeanSeries {
        t: grid,
        population: vec![0.0; first.samples.len()],
        largest_club: vec![0.0; first.samples.len()],
    };
    for r in results {
        for (i, s) in r.samples.iter().enumerate() {
            out.population[i] += s.population as f64;
            out.largest_club[i] += s.largest_club_size as f64;
        }
    }
    for v in out.population.iter_mut().chain(out.largest_club.iter_mut()) {
        *v /= n;
    }
    Ok(out)
}

/// Least-squares slope of `y` against `t` over points with `t` in `[lo, hi]`.
pub fn growth_slope(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64> {
    let window: Vec<_> = series
        .iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .collect();
    let n = window.len() as f64;
    if window.len() < 2 {
        return Err(Error::DegenerateWindow { lo, hi });
    }
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in window {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateWindow { lo, hi });
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournStats {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: usize,
    pub records: usize,
    /// Records requested but not available across all runs.
    pub shortfall: usize,
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Mean sojourn over the first `count_per_run` departures at or after
/// `warmup` in each run, with a normal 95% interval across run means.
pub fn sojourn_stats(runs: &[Vec<SojournRecord>], warmup: f64, count_per_run: usize) -> SojournStats {
    let mut pooled = Vec::new();
    let mut run_means = Vec::new();
    let mut shortfall = 0;
    for run in runs {
        let mut eligible: Vec<_> = run.iter().filter(|r| r.t_depart >= warmup).collect();
        eligible.sort_by(|a, b| a.t_depart.total_cmp(&b.t_depart).then(a.peer_id.cmp(&b.peer_id)));
        eligible.truncate(count_per_run);
        shortfall += count_per_run - eligible.len();
        if eligible.is_empty() {
            continue;
        }
        let values: Vec<f64> = eligible.iter().map(|r| r.sojourn()).collect();
        run_means.push(sorted_sum(values.clone()) / values.len() as f64);
        pooled.extend(values);
    }
    let records = pooled.len();
    let mean = if records == 0 {
        f64::NAN
    } else {
        sorted_sum(pooled) / records as f64
    };
    let half_width = if run_means.len() < 2 {
        0.0
    } else {
        let n = run_means.len() as f64;
        let m = sorted_sum(run_means.clone()) / n;
        let var = sorted_sum(run_means.iter().map(|x| (x - m) * (x - m)).collect()) / (n - 1.0);
        1.96 * (var / n).sqrt()
    };
    SojournStats {
        mean,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        runs: runs.len(),
        records,
        shortfall,
    }
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

pub const TIMESERIES_HEADER: [&str; 8] = [
    "t",
    "population",
    "largest_club",
    "group1",
    "group2",
    "group3",
    "group4",
    "group5",
];

/// Time-series CSV. Group cells hold `profile:count`, largest group first.
pub fn write_timeseries_csv(path: &Path, samples: &[MetricsSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TIMESERIES_HEADER).map_err(|e| csv_err(path, e))?;
    for s in samples {
        let mut row = vec![
            s.t.to_string(),
            s.population.to_string(),
            s.largest_club_size.to_string(),
        ];
        for i in 0..TOP_GROUPS {
            row.push(
                s.top_groups
                    .get(i)
                    .map(|(p, c)| format!("{p}:{c}"))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_timeseries_csv(path: &Path) -> Result<Vec<MetricsSample>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TIMESERIES_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{e}: {:?}", &rec[i])));
        let int = |i: usize| rec[i].parse::<u64>().map_err(|e| bad(format!("{e}: {:?}", &rec[i])));
        let mut top_groups = Vec::new();
        for i in 3..3 + TOP_GROUPS {
            if rec[i].is_empty() {
                continue;
            }
            let (p, c) = rec[i]
                .split_once(':')
                .ok_or_else(|| bad(format!("bad group cell {:?}", &rec[i])))?;
            let p: PieceProfile = p.parse().map_err(|e: Error| bad(e.to_string()))?;
            top_groups.push((p, c.parse().map_err(|_| bad(format!("bad count {c:?}")))?));
        }
        let type_counts = top_groups.first().filter(|(p, _)| p.k() == 2).map(|_| {
            let mut tc = [0; 3];
            for (p, c) in &top_groups {
                match p.to_string().as_str() {
                    "00" => tc[0] = *c,
                    "10" => tc[1] = *c,
                    "01" => tc[2] = *c,
                    _ => {}
                }
            }
            tc
        });
        out.push(MetricsSample {
            t: num(0)?,
            population: int(1)?,
            largest_club_size: int(2)?,
            top_groups,
            type_counts,
        });
    }
    Ok(out)
}

pub fn write_mean_series_csv(path: &Path, series: &MeanSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "population", "largest_club"])
        .map_err(|e| csv_err(path, e))?;
    for i in 0..series.t.len() {
        w.write_record([
            series.t[i].to_string(),
            series.population[i].to_string(),
            series.largest_club[i].to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads any CSV whose first column is time, returning `(t, column)` pairs
/// for each named column.
pub fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let bad = |reason: String| Error::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| bad(format!("missing column {c:?}")))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let t: f64 = rec[0].parse().map_err(|_| bad(format!("bad time {:?}", &rec[0])))?;
        for (o, &i) in out.iter_mut().zip(&idx) {
            let v: f64 = rec[i].parse().map_err(|_| bad(format!("bad value {:?}", &rec[i])))?;
            o.push((t, v));
        }
    }
    Ok(out)
}

pub fn write_sojourn_csv(path: &Path, records: &[SojournRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["peer_id", "t_arrive", "t_depart"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([r.peer_id.to_string(), r.t_arrive.to_string(), r.t_depart.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// A named line for [`render_svg`].
pub struct Line<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Plain SVG line chart, one polyline per series.
pub fn render_svg(title: &str, lines: &[Line<'_>]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 480.0;
    const M: f64 = 50.0;
    let all = lines.iter().flat_map(|l| l.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{M} {M} L{M} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        b = H - M,
        r = W - M
    );
    let _ = writeln!(
        s,
        r#"<text x="{M}" y="{}" font-family="sans-serif" font-size="11">{x0}</text><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{x1}</text>"#,
        H - M + 15.0,
        W - M,
        H - M + 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{y0}</text><text x="{}" y="{M}" font-family="sans-serif" font-size="11" text-anchor="end">{y1:.1}</text>"#,
        M - 4.0,
        H - M,
        M - 4.0
    );
    for (i, l) in lines.iter().enumerate() {
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            l.color,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{}">{}</text>"#,
            W - M - 150.0,
            M + 16.0 * (i as f64 + 1.0),
            l.color,
            xml_escape(l.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(svg.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Destinations for [`write_outputs`]; `None` skips that artifact.
#[derive(Clone, Debug, Default)]
pub struct OutputPaths {
    pub timeseries: Option<PathBuf>,
    pub sojourns: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl OutputPaths {
    /// Conventional file names under `dir`, prefixed with `stem`.
    pub fn in_dir(dir: &Path, stem: &str, svg: bool) -> Self {
        Self {
            timeseries: Some(dir.join(format!("{stem}.timeseries.csv"))),
            sojourns: Some(dir.join(format!("{stem}.sojourns.csv"))),
            summary: Some(dir.join(format!("{stem}.summary.json"))),
            svg: svg.then(|| dir.join(format!("{stem}.svg"))),
        }
    }
}

/// Write one replication's artifacts. `summary` is any JSON-serialisable
/// record (config echo, fits, certifier report).
pub fn write_outputs<S: Serialize>(result: &RunResult, summary: &S, paths: &OutputPaths) -> Result<()> {
    if let Some(p) = &paths.timeseries {
        write_timeseries_csv(p, &result.samples)?;
    }
    if let Some(p) = &paths.sojourns {
        write_sojourn_csv(p, &result.sojourns)?;
    }
    if let Some(p) = &paths.summary {
        write_json(p, summary)?;
    }
    if let Some(p) = &paths.svg {
        let pop = result.population_series();
        let club: Vec<_> = result
            .samples
            .iter()
            .map(|s| (s.t, s.largest_club_size as f64))
            .collect();
        let svg = render_svg(
            "population and largest club",
            &[
                Line { name: "population", color: "#1f77b4", points: &pop },
                Line { name: "largest club", color: "#2ca02c", points: &club },
            ],
        );
        write_svg(p, &svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, pop: u64) -> MetricsSample {
        MetricsSample {
            t,
            population: pop,
            largest_club_size: pop,
            top_groups: vec![],
            type_counts: None,
        }
    }

    fn run(points: &[(f64, u64)]) -> RunResult {
        RunResult {
            samples: points.iter().map(|&(t, p)| sample(t, p)).collect(),
            sojourns: vec![],
            exploded: false,
            provenance: RngProvenance { seed: 0, stream: 0 },
            events: 0,
            final_t: 0.0,
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let pts: Vec<_> = (0..50).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!((growth_slope(&pts, 0.0, 49.0).unwrap() - 2.0).abs() < 1e-12);
        let flat: Vec<_> = (0..50).map(|i| (i as f64, 7.0)).collect();
        assert!(growth_slope(&flat, 0.0, 100.0).unwrap().abs() < 1e-12);
        assert!(matches!(
            growth_slope(&pts, 10.0, 10.5),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    proptest! {
        #[test]
        fn slope_exact_on_affine(a in -100.0f64..100.0, b in -5.0f64..5.0, n in 2usize..200) {
            let pts: Vec<_> = (0..n).map(|i| { let t = i as f64 * 0.5; (t, a + b * t) }).collect();
            let s = growth_slope(&pts, 0.0, f64::INFINITY).unwrap();
            prop_assert!((s - b).abs() < 1e-9);
        }

        #[test]
        fn sojourn_stats_permutation_invariant(
            runs in proptest::collection::vec(
                proptest::collection::vec((0.0f64..100.0, 0.0f64..50.0), 0..20), 1..6),
            rot in 0usize..6,
        ) {
            let runs: Vec<Vec<SojournRecord>> = runs.iter().enumerate().map(|(ri, r)| {
                r.iter().enumerate().map(|(i, &(a, d))| SojournRecord {
                    peer_id: (ri * 100 + i) as u64, t_arrive: a, t_depart: a + d + 0.1,
                }).collect()
            }).collect();
            let mut perm = runs.clone();
            let len = perm.len();
            perm.rotate_left(rot % len);
            perm.reverse();
            let a = sojourn_stats(&runs, 20.0, 7);
            let b = sojourn_stats(&perm, 20.0, 7);
            prop_assert!(a.mean.to_bits() == b.mean.to_bits() || (a.mean.is_nan() && b.mean.is_nan()));
            prop_assert_eq!(a.ci_high.to_bits() == b.ci_high.to_bits() || a.ci_high.is_nan(), true);
        }
    }

    #[test]
    fn constant_sojourns_give_zero_width() {
        let rec = |id, a: f64| SojournRecord { peer_id: id, t_arrive: a, t_depart: a + 5.0 };
        let runs = vec![vec![rec(0, 0.0), rec(1, 1.0)], vec![rec(0, 0.0), rec(1, 1.0)]];
        let s = sojourn_stats(&runs, 0.0, 10);
        assert_eq!(s.mean, 5.0);
        assert_eq!(s.ci_high - s.ci_low, 0.0);
        assert_eq!(s.shortfall, 16);
    }

    #[test]
    fn warmup_and_first_n() {
        let runs = vec![(0..10)
            .map(|i| SojournRecord { peer_id: i, t_arrive: 0.0, t_depart: i as f64 })
            .collect::<Vec<_>>()];
        let s = sojourn_stats(&runs, 4.0, 3);
        assert_eq!(s.mean, 5.0); // departures at 4, 5, 6
    }

    #[test]
    fn averaging() {
        let a = run(&[(0.0, 0), (1.0, 1), (2.0, 2)]);
        let b = run(&[(0.0, 0), (1.0, 3), (2.0, 6)]);
        let m = average_replications(&[a.clone(), b]).unwrap();
        assert_eq!(m.population, vec![0.0, 2.0, 4.0]);
        let same = average_replications(&vec![a.clone(); 5]).unwrap();
        assert_eq!(same.population, vec![0.0, 1.0, 2.0]);
        let short = run(&[(0.0, 0)]);
        assert!(matches!(average_replications(&[a, short]), Err(Error::MismatchedGrids)));
    }

    #[test]
    fn timeseries_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let p = |s: &str| s.parse::<PieceProfile>().unwrap();
        let samples = vec![
            MetricsSample {
                t: 0.0,
                population: 500,
                largest_club_size: 500,
                top_groups: vec![(p("10"), 500)],
                type_counts: Some([0, 500, 0]),
            },
            MetricsSample {
                t: 0.1,
                population: 7,
                largest_club_size: 0,
                top_groups: vec![(p("10"), 3), (p("01"), 3), (p("00"), 1)],
                type_counts: Some([1, 3, 3]),
            },
        ];
        write_timeseries_csv(&path, &samples).unwrap();
        assert_eq!(read_timeseries_csv(&path).unwrap(), samples);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,population,largest_club,group1,group2,group3,group4,group5\n"));
    }

    #[test]
    fn svg_has_two_polylines() {
        let a = [(0.0, 1.0), (1.0, 2.0)];
        let svg = render_svg("x", &[
            Line { name: "population", color: "red", points: &a },
            Line { name: "largest club", color: "blue", points: &a },
        ]);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn io_errors_carry_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_sojourn_csv(&blocker.join("sub.csv"), &[]).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("file"));
    }
}
