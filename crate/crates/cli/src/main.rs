use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use plc_bench::corpus::{decode_image, discover};
use plc_bench::report::format_aggregates;
use plc_bench::{run_corpus, tradeoff_svg, write_csv, EmbedderSpec, RunConfig};
use plc_core::bundle::{pack, unpack};
use plc_core::edgemap::CannyParams;
use plc_core::encoder::{encode_image, fetch_prompt, EncodeConfig, FilePromptProvider, Strategy};
use plc_core::metrics::{cosine_similarity, ssim, SsimParams};
use plc_core::preview::{preview_reconstruct, PreviewParams};
use plc_core::raster::{save_ppm, RasterImage};
use plc_core::salient::Rect;

#[derive(Parser)]
#[command(name = "plc", version, about = "Pseudo-lossy image codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract conditioning inputs from an image and pack them into a bundle.
    Encode {
        input: PathBuf,
        /// Size in bytes of the served original; defaults to the input file size.
        #[arg(long)]
        original_size: Option<u64>,
        /// Defaults to the input's sibling `.txt`.
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        #[arg(long, default_value = "canny-color")]
        strategy: Strategy,
        /// Salient rectangle `x,y,w,h`; repeatable.
        #[arg(long = "region")]
        regions: Vec<Rect>,
        /// Grid cells per side.
        #[arg(long, default_value_t = 32)]
        grid: u32,
        #[arg(long, default_value_t = 1.4)]
        canny_sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        canny_low: f64,
        #[arg(long, default_value_t = 0.2)]
        canny_high: f64,
        /// Refuse over-long prompts instead of truncating them.
        #[arg(long)]
        strict_prompt: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Validate a bundle and optionally write the baseline preview.
    Decode {
        input: PathBuf,
        #[arg(long)]
        preview: Option<PathBuf>,
    },
    /// Compare two images.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        ssim: bool,
        /// `builtin` or `cmd:<provider command>`.
        #[arg(long)]
        embed: Option<String>,
    },
    /// Run strategies over a corpus directory.
    Bench {
        dir: PathBuf,
        /// Comma-separated strategy names, or `all`.
        #[arg(long, default_value = "all")]
        strategies: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Keep only images of at least 512×256 in either orientation.
        #[arg(long = "paper-filter")]
        resolution_filter: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "builtin")]
        embed: String,
        /// Only measure sizes; skip previews and similarity.
        #[arg(long)]
        sizes_only: bool,
    },
}

fn read_image(path: &Path) -> Result<RasterImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    if s == "all" {
        return Ok(Strategy::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse().map_err(anyhow::Error::msg)).collect()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Encode {
            input,
            original_size,
            prompt_file,
            strategy,
            regions,
            grid,
            canny_sigma,
            canny_low,
            canny_high,
            strict_prompt,
            output,
        } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let image = decode_image(&bytes).with_context(|| format!("decoding {}", input.display()))?;
            let provider = match prompt_file {
                Some(p) => FilePromptProvider::new(p),
                None => FilePromptProvider::sibling_of(&input),
            };
            let prompt = fetch_prompt(&provider, &bytes, "", strict_prompt)?;
            let mut config = EncodeConfig::new(strategy).with_regions(regions);
            config.canny = CannyParams {
                sigma: canny_sigma,
                low_ratio: canny_low,
                high_ratio: canny_high,
                ..CannyParams::default()
            };
            config.grid_w = grid;
            config.grid_h = grid;
            config.strict_prompt = strict_prompt;
            let original = original_size.unwrap_or(bytes.len() as u64);
            let (bundle, report) = encode_image(&image, original, &prompt, &config)?;
            fs::write(&output, pack(&bundle)?).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{} -> {}: {} bytes (original {}), savings {:.4}{}",
                input.display(),
                output.display(),
                report.bundle_bytes,
                report.original_bytes,
                report.savings,
                if report.below_break_even { " BELOW BREAK-EVEN" } else { "" }
            );
            for (tag, n) in &report.per_section_bytes {
                println!("  {:<10} {n}", tag.name());
            }
        }
        Command::Decode { input, preview } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let bundle = unpack(&bytes).with_context(|| format!("unpacking {}", input.display()))?;
            println!(
                "{}x{}, original {} bytes, sections {:?}",
                bundle.original_width,
                bundle.original_height,
                bundle.original_byte_size,
                bundle.tags().iter().map(|t| t.name()).collect::<Vec<_>>()
            );
            println!("prompt: {}", bundle.prompt()?);
            if let Some(out) = preview {
                let img = preview_reconstruct(&bundle, &PreviewParams::default())?;
                fs::write(&out, save_ppm(&img)).with_context(|| format!("writing {}", out.display()))?;
                info!("preview written to {}", out.display());
            }
        }
        Command::Metrics { a, b, ssim: want_ssim, embed } => {
            let (ia, ib) = (read_image(&a)?, read_image(&b)?);
            let want_ssim = want_ssim || embed.is_none();
            if want_ssim {
                println!("ssim {:.6}", ssim(&ia, &ib, &SsimParams::default())?);
            }
            if let Some(choice) = embed {
                let mut provider = EmbedderSpec::parse(&choice)?.instantiate()?;
                let (ea, eb) = (provider.embed(&ia)?, provider.embed(&ib)?);
                println!("embed_cosine {:.6}", cosine_similarity(&ea, &eb)?);
            }
        }
        Command::Bench {
            dir,
            strategies,
            csv,
            plot,
            resolution_filter,
            jobs,
            embed,
            sizes_only,
        } => {
            if jobs == 0 {
                bail!("--jobs must be at least 1");
            }
            let entries = discover(&dir, resolution_filter)?;
            let config = RunConfig {
                strategies: parse_strategies(&strategies)?,
                jobs,
                embedder: EmbedderSpec::parse(&embed)?,
                sizes_only,
                ..RunConfig::default()
            };
            let out = run_corpus(&entries, &config)?;
            for row in out.rows.iter().filter(|r| !r.is_ok()) {
                eprintln!("{} [{}]: {}", row.entry, row.strategy, row.error);
            }
            print!("{}", format_aggregates(&out.aggregates));
            println!("savings = total packed bundle bytes (including salient patches) vs. served file bytes");
            if let Some(path) = csv {
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_csv(&out.rows, file)?;
            }
            if let Some(path) = plot {
                fs::write(&path, tradeoff_svg(&out.rows)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
