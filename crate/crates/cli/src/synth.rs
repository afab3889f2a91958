use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Subcommand};
use herdlens_core::synth::{
    gen_blobs, gen_gait, gen_grazing, gen_motion, gen_resting, write_synth_video, write_truth, BlobSpec, GaitSpec,
    GrazingSpec, MotionSpec, RestingSpec, SynthVideo,
};
use walkdir::WalkDir;

use crate::DEFAULT_SEED;

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, env = "HERDLENS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Scenario {
    /// Ellipse translating at constant velocity, optionally changing depth.
    Motion {
        #[command(flatten)]
        common: Common,
        /// Horizontal displacement per kept frame, px.
        #[arg(long, allow_hyphen_values = true)]
        vx: f64,
        /// Vertical displacement per kept frame, px.
        #[arg(long, allow_hyphen_values = true)]
        vy: f64,
        #[arg(long, default_value = "motion")]
        id: String,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        frame_stride: u32,
        #[arg(long, default_value_t = 40)]
        frames: usize,
        #[arg(long, default_value_t = 60.0)]
        start_x: f64,
        #[arg(long, default_value_t = 60.0)]
        start_y: f64,
        #[arg(long, default_value_t = 20.0)]
        rx: f64,
        #[arg(long, default_value_t = 12.0)]
        ry: f64,
        /// Depth step `FRAME:SCALE`, repeatable.
        #[arg(long = "depth", value_parser = parse_depth)]
        depth: Vec<(u64, f64)>,
    },
    /// Gaussian blobs as a points CSV with labels in truth.json.
    Blobs {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        per_blob: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 5.0)]
        separation: f64,
    },
    /// Grazing videos with imagery, single and herd.
    Grazing {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        n_single: usize,
        #[arg(long, default_value_t = 3)]
        n_herd: usize,
        #[arg(long, default_value_t = 12)]
        frames: usize,
        #[arg(long, default_value_t = 0.8)]
        single_green: f64,
        #[arg(long, default_value_t = 0.4)]
        herd_green: f64,
        #[arg(long, default_value_t = 2)]
        column_jitter: usize,
    },
    /// Resting silhouettes for both views, single and herd.
    Resting {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 60)]
        single_frames: usize,
        #[arg(long, default_value_t = 12)]
        herd_frames: usize,
        #[arg(long, default_value_t = 5)]
        herd_size: usize,
        #[arg(long, default_value_t = 0.01)]
        flip_noise: f64,
    },
    /// Running poses, one template per animal.
    Gait {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        animals: usize,
        #[arg(long, default_value_t = 40)]
        frames: usize,
        #[arg(long, default_value_t = 0.02)]
        sigma: f64,
    },
    /// Every scenario with defaults, one subdirectory each.
    All {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_depth(s: &str) -> Result<(u64, f64), String> {
    let (f, v) = s.split_once(':').ok_or("expected FRAME:SCALE")?;
    let frame = f.trim().parse::<u64>().map_err(|e| format!("frame: {e}"))?;
    let scale = v.trim().parse::<f64>().map_err(|e| format!("scale: {e}"))?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err("scale must be positive".into());
    }
    Ok((frame, scale))
}

fn write_videos(root: &Path, videos: &[SynthVideo]) -> anyhow::Result<()> {
    for v in videos {
        write_synth_video(root, v).with_context(|| format!("writing {}", v.manifest.video_id))?;
    }
    Ok(())
}

fn motion(root: &Path, specs: &[MotionSpec]) -> anyhow::Result<()> {
    let mut truths = Vec::new();
    for spec in specs {
        let (video, truth) = gen_motion(spec)?;
        write_videos(root, &[video])?;
        truths.push(truth);
    }
    write_truth(root, &truths)?;
    Ok(())
}

fn blobs(root: &Path, spec: &BlobSpec) -> anyhow::Result<()> {
    let (data, labels) = gen_blobs(spec);
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let mut text = (0..data.ncols()).map(|j| format!("x{j}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for row in data.rows() {
        text.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        text.push('\n');
    }
    let path = root.join("points.csv");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    write_truth(root, &serde_json::json!({ "spec": spec, "labels": labels }))?;
    Ok(())
}

fn grazing(root: &Path, spec: &GrazingSpec) -> anyhow::Result<()> {
    let (videos, truth) = gen_grazing(spec)?;
    write_videos(root, &videos)?;
    write_truth(root, &truth)?;
    Ok(())
}

fn resting(root: &Path, spec: &RestingSpec) -> anyhow::Result<()> {
    let (videos, truth) = gen_resting(spec)?;
    write_videos(root, &videos)?;
    write_truth(root, &truth)?;
    Ok(())
}

fn gait(root: &Path, spec: &GaitSpec) -> anyhow::Result<()> {
    let (videos, truth) = gen_gait(spec)?;
    write_videos(root, &videos)?;
    write_truth(root, &truth)?;
    Ok(())
}

/// The two motion videos written by `synth all`: constant depth, and the
/// same velocity with depth doubling halfway.
pub fn default_motion_specs() -> Vec<MotionSpec> {
    vec![
        MotionSpec {
            video_id: "motion_const".into(),
            ..Default::default()
        },
        MotionSpec {
            video_id: "motion_depth".into(),
            depth_schedule: vec![(20, 2.0)],
            ..Default::default()
        },
    ]
}

fn print_tree(root: &Path) {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().to_path_buf())
        .collect();
    files.sort();
    for f in files {
        println!("{}", f.display());
    }
}

pub fn run(scenario: Scenario) -> anyhow::Result<ExitCode> {
    let root = match &scenario {
        Scenario::Motion { common, .. }
        | Scenario::Blobs { common, .. }
        | Scenario::Grazing { common, .. }
        | Scenario::Resting { common, .. }
        | Scenario::Gait { common, .. }
        | Scenario::All { common } => common.out.clone(),
    };
    match scenario {
        Scenario::Motion {
            vx,
            vy,
            id,
            fps,
            frame_stride,
            frames,
            start_x,
            start_y,
            rx,
            ry,
            depth,
            ..
        } => motion(
            &root,
            &[MotionSpec {
                video_id: id,
                fps,
                frame_stride,
                n_frames: frames,
                start: (start_x, start_y),
                velocity: (vx, vy),
                radii: (rx, ry),
                depth_schedule: depth,
                ..Default::default()
            }],
        )?,
        Scenario::Blobs {
            common,
            k,
            per_blob,
            dim,
            sigma,
            separation,
        } => blobs(
            &root,
            &BlobSpec {
                k,
                per_blob,
                dim,
                sigma,
                separation,
                seed: common.seed,
            },
        )?,
        Scenario::Grazing {
            common,
            n_single,
            n_herd,
            frames,
            single_green,
            herd_green,
            column_jitter,
        } => grazing(
            &root,
            &GrazingSpec {
                n_single,
                n_herd,
                n_frames: frames,
                single_green_fraction: single_green,
                herd_green_fraction: herd_green,
                column_jitter,
                seed: common.seed,
            },
        )?,
        Scenario::Resting {
            common,
            single_frames,
            herd_frames,
            herd_size,
            flip_noise,
        } => resting(
            &root,
            &RestingSpec {
                single_frames,
                herd_frames,
                herd_size,
                flip_noise,
                seed: common.seed,
            },
        )?,
        Scenario::Gait {
            common,
            animals,
            frames,
            sigma,
        } => gait(&root, &GaitSpec::one_template_each(animals, frames, sigma, common.seed))?,
        Scenario::All { common } => {
            let seed = common.seed;
            motion(&root.join("motion"), &default_motion_specs())?;
            blobs(&root.join("blobs"), &BlobSpec { seed, ..Default::default() })?;
            grazing(&root.join("grazing"), &GrazingSpec { seed, ..Default::default() })?;
            resting(&root.join("resting"), &RestingSpec { seed, ..Default::default() })?;
            gait(&root.join("gait"), &GaitSpec::one_template_each(10, 40, 0.02, seed))?;
        }
    }
    print_tree(&root);
    Ok(ExitCode::SUCCESS)
}
