use std::path::Path;
use std::process::ExitCode;

use herdlens_core::report::read_report;

pub fn run(path: &Path) -> anyhow::Result<ExitCode> {
    let file = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let r = read_report(&file)?;
    println!("report {} (schema {})", file.display(), r.schema_version);
    println!("seed {}", r.config.seed);
    if let Some(g) = &r.gait {
        println!(
            "gait: {} features, k {} (requested {}), {} animals",
            g.n_features,
            g.k_used,
            g.k_requested,
            g.animals.len()
        );
        for (id, a) in &g.animals {
            println!(
                "  {id}: dominant cluster {} ratio {:.3}, {} clusters visited",
                a.dominant_cluster, a.dominance_ratio, a.occupied_clusters
            );
        }
    }
    if let Some(s) = &r.speed {
        println!("speed: exponent {}, {} videos", s.exponent, s.videos.len());
        for (id, v) in &s.videos {
            let p = &v.profile;
            print!("  {id}: mean raw {:.3} px/s, mean normalized {:.3}", p.mean_raw, p.mean_normalized);
            if let Some(t) = &p.terciles {
                print!(" (terciles {:.3} / {:.3} / {:.3})", t.commencement, t.midpoint, t.conclusion);
            }
            println!();
        }
    }
    if let Some(g) = &r.graze {
        println!("graze: {} videos", g.videos.len());
        for (social, s) in &g.groups {
            println!(
                "  {social}: mean {:.4} over {} videos, CI [{:.4}, {:.4}]",
                s.mean, s.n_videos, s.ci_low, s.ci_high
            );
        }
    }
    if let Some(rest) = &r.rest {
        println!("rest: {} samples", rest.n_samples);
        for (view, v) in &rest.views {
            let ratio = v.herd_single_ratio.map_or("n/a".to_string(), |x| format!("{x:.3}"));
            println!("  {view}: {} samples, herd/single dispersion {ratio}", v.n_samples);
            for (social, d) in &v.groups {
                println!("    {social}: {} samples, dispersion {:.4}", d.n_samples, d.dispersion);
            }
        }
    }
    if !r.warnings.is_empty() {
        println!("warnings:");
        for w in &r.warnings {
            println!("  {w}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
