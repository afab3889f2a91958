use std::path::PathBuf;
use std::process::ExitCode;

use herdlens_core::interchange::discover_videos;

pub fn run(paths: &[PathBuf]) -> anyhow::Result<ExitCode> {
    match discover_videos(paths) {
        Ok(videos) if videos.is_empty() => {
            eprintln!("no video directories (manifest.json) found");
            Ok(ExitCode::from(1))
        }
        Ok(videos) => {
            let frames: usize = videos.iter().map(|v| v.frames.len()).sum();
            println!("ok: {} video(s), {frames} frame record(s)", videos.len());
            Ok(ExitCode::SUCCESS)
        }
        Err(errors) => {
            for d in &errors.0 {
                eprintln!("{d}");
            }
            eprintln!("{} error(s)", errors.0.len());
            Ok(ExitCode::from(1))
        }
    }
}
