use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use herdlens_core::gait::{analyze_features, extract_features, ClusterSpace, GaitAnalysis};
use herdlens_core::graze::{analyze_grazing, write_graze_csv, GrazeSummary};
use herdlens_core::interchange::{discover_videos, Activity, Social, VideoDir};
use herdlens_core::report::{
    render_scatter, render_series, write_atomic, write_report, AnalysisReport, ConfigEcho, Series,
};
use herdlens_core::rest::{analyze_resting, extract_rest_samples, RestAnalysis};
use herdlens_core::speed::{analyze_speed, write_speed_csv, SpeedSummary};

use crate::{AnalyzeArgs, Kind, Space, DEFAULT_SEED};

/// Base config (file or defaults) with command-line overrides applied.
pub fn effective_config(args: &AnalyzeArgs) -> anyhow::Result<ConfigEcho> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigEcho::with_seed(args.seed.unwrap_or(DEFAULT_SEED)),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.gait.embed.seed = seed;
        cfg.gait.cluster.seed = seed;
        cfg.graze.seed = seed;
        cfg.rest.embed.seed = seed;
        cfg.rest.cluster.seed = seed;
    }
    if let Some(n) = args.n_neighbors {
        cfg.gait.embed.n_neighbors = n;
        cfg.rest.embed.n_neighbors = n;
    }
    if let Some(d) = args.min_dist {
        cfg.gait.embed.min_dist = d;
        cfg.rest.embed.min_dist = d;
    }
    if let Some(k) = args.kmeans_k {
        cfg.gait.cluster.k = k;
        cfg.rest.cluster.k = k;
    }
    if let Some(space) = args.cluster_space {
        cfg.gait.cluster_space = match space {
            Space::Embedding => ClusterSpace::Embedding,
            Space::Pose => ClusterSpace::Pose,
        };
    }
    if let Some(s) = args.frame_stride {
        cfg.speed.frame_stride = Some(s);
    }
    if let Some(e) = args.norm_exponent {
        cfg.speed.norm_exponent = e;
    }
    Ok(cfg)
}

fn load_config(path: &Path) -> anyhow::Result<ConfigEcho> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let value = match value.get("config") {
        Some(inner) if value.get("schema_version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value).with_context(|| format!("{} is not a config echo", path.display()))
}

/// Everything an analysis writes, held in memory until all stages succeed.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, rel: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((rel.into(), bytes.into()));
    }
}

fn of_activity(videos: &[VideoDir], activity: Activity) -> Vec<VideoDir> {
    videos.iter().filter(|v| v.manifest.activity == activity).cloned().collect()
}

fn run_gait(videos: &[VideoDir], cfg: &ConfigEcho, report: &mut AnalysisReport, out: &mut Outputs) -> anyhow::Result<bool> {
    let (features, stats) = extract_features(videos, &cfg.gait)?;
    if features.is_empty() {
        report.warnings.push("gait: no usable poses in running videos, section omitted".into());
        return Ok(false);
    }
    let GaitAnalysis {
        summary,
        points,
        warnings,
    } = analyze_features(features, stats, &cfg.gait)?;
    report.warnings.extend(warnings);

    let mut csv = String::from("animal_id,video_id,frame_index,x,y,cluster\n");
    for p in &points {
        csv.push_str(&format!("{},{},{},{},{},{}\n", p.animal_id, p.video_id, p.frame_index, p.x, p.y, p.cluster));
    }
    out.add("embeddings/gait.csv", csv);

    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let clusters: Vec<usize> = points.iter().map(|p| p.cluster).collect();
    out.add("plots/gait_clusters.svg", render_scatter(&xy, &clusters, &[], "gait poses by cluster"));
    let animals: Vec<String> = summary.animals.keys().cloned().collect();
    let animal_of: Vec<usize> = points
        .iter()
        .map(|p| animals.binary_search(&p.animal_id).expect("animal listed"))
        .collect();
    out.add("plots/gait_animals.svg", render_scatter(&xy, &animal_of, &animals, "gait poses by animal"));
    report.gait = Some(summary);
    Ok(true)
}

fn run_speed(videos: &[VideoDir], cfg: &ConfigEcho, report: &mut AnalysisReport, out: &mut Outputs) -> anyhow::Result<bool> {
    let mut videos = videos.to_vec();
    if let Some(stride) = cfg.speed.frame_stride {
        for v in &mut videos {
            v.manifest.frame_stride = stride;
        }
    }
    let (summary, warnings): (SpeedSummary, _) = analyze_speed(&videos, cfg.speed.norm_exponent)?;
    report.warnings.extend(warnings);
    if summary.videos.is_empty() {
        report.warnings.push("speed: no running video has trackable masks, section omitted".into());
        return Ok(false);
    }
    let mut csv = Vec::new();
    write_speed_csv(&summary, &mut csv).context("formatting speed series")?;
    out.add("series/speed.csv", csv);
    for (id, v) in &summary.videos {
        let steps = &v.profile.steps;
        let raw = Series {
            name: "raw px/s".into(),
            points: steps.iter().map(|s| (s.t_seconds, s.raw_px_per_s)).collect(),
        };
        let norm = Series {
            name: "normalized".into(),
            points: steps.iter().map(|s| (s.t_seconds, s.normalized)).collect(),
        };
        let third = steps.len() / 3;
        let markers: Vec<f64> = if steps.len() >= 3 {
            vec![steps[third].t_seconds, steps[2 * third].t_seconds]
        } else {
            Vec::new()
        };
        let svg = render_series(&[raw, norm], &markers, &format!("speed profile {id}"), "t (s)", "speed");
        out.add(format!("plots/speed_{id}.svg"), svg);
    }
    report.speed = Some(summary);
    Ok(true)
}

fn run_graze(videos: &[VideoDir], cfg: &ConfigEcho, report: &mut AnalysisReport, out: &mut Outputs) -> anyhow::Result<()> {
    let (summary, warnings): (GrazeSummary, _) = analyze_grazing(videos, &cfg.graze)?;
    report.warnings.extend(warnings);
    let mut csv = Vec::new();
    write_graze_csv(&summary, &mut csv).context("formatting graze series")?;
    out.add("series/graze.csv", csv);
    let series: Vec<Series> = summary
        .videos
        .iter()
        .map(|(id, v)| Series {
            name: format!("{id} ({})", v.social),
            points: v.series.iter().map(|&(f, s)| (f as f64, s)).collect(),
        })
        .collect();
    out.add("plots/graze.svg", render_series(&series, &[], "grazing index per frame", "kept frame", "green score"));
    report.graze = Some(summary);
    Ok(())
}

fn run_rest(videos: &[VideoDir], cfg: &ConfigEcho, report: &mut AnalysisReport, out: &mut Outputs) -> anyhow::Result<()> {
    let samples = extract_rest_samples(videos)?;
    let RestAnalysis {
        summary,
        points,
        warnings,
    } = analyze_resting(&samples, &cfg.rest.embed, &cfg.rest.cluster)?;
    report.warnings.extend(warnings);
    let names = vec!["single".to_string(), "herd".to_string()];
    for (view, pts) in &points {
        let mut csv = String::from("video_id,frame_index,detection,group,x,y,cluster\n");
        for p in pts {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.video_id, p.frame_index, p.detection, p.group, p.x, p.y, p.cluster
            ));
        }
        out.add(format!("embeddings/rest_{view}.csv"), csv);
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.y)).collect();
        let social: Vec<usize> = pts.iter().map(|p| usize::from(p.group.social() == Social::Herd)).collect();
        out.add(
            format!("plots/rest_{view}.svg"),
            render_scatter(&xy, &social, &names, &format!("resting silhouettes, {view} view")),
        );
    }
    report.rest = Some(summary);
    Ok(())
}

pub fn run(args: &AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let cfg = effective_config(args)?;
    let videos = match discover_videos(&args.inputs) {
        Ok(v) => v,
        Err(errors) => {
            for d in &errors.0 {
                eprintln!("{d}");
            }
            bail!("{} input validation error(s)", errors.0.len());
        }
    };
    let mut report = AnalysisReport::new(cfg.clone());
    let mut out = Outputs::default();
    let wanted = |k: Kind| args.kind == k || args.kind == Kind::All;

    if wanted(Kind::Run) {
        let running = of_activity(&videos, Activity::Running);
        if running.is_empty() {
            if args.kind == Kind::Run {
                bail!("no running videos among the inputs");
            }
            report.warnings.push("run: no running videos, skipped".into());
        } else {
            let g = run_gait(&running, &cfg, &mut report, &mut out)?;
            let s = run_speed(&running, &cfg, &mut report, &mut out)?;
            if !g && !s {
                bail!("running videos carry neither poses nor masks");
            }
        }
    }
    if wanted(Kind::Graze) {
        let grazing = of_activity(&videos, Activity::Grazing);
        if grazing.is_empty() {
            if args.kind == Kind::Graze {
                bail!("no grazing videos among the inputs");
            }
            report.warnings.push("graze: no grazing videos, skipped".into());
        } else {
            run_graze(&grazing, &cfg, &mut report, &mut out)?;
        }
    }
    if wanted(Kind::Rest) {
        let resting = of_activity(&videos, Activity::Sitting);
        if resting.is_empty() {
            if args.kind == Kind::Rest {
                bail!("no resting (sitting) videos among the inputs");
            }
            report.warnings.push("rest: no resting videos, skipped".into());
        } else {
            run_rest(&resting, &cfg, &mut report, &mut out)?;
        }
    }

    for (rel, bytes) in &out.files {
        write_atomic(&args.out.join(rel), bytes)?;
    }
    let report_path = args.out.join("report.json");
    write_report(&report, &report_path)?;
    println!("{}", report_path.display());
    for (rel, _) in &out.files {
        println!("{}", args.out.join(rel).display());
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}
