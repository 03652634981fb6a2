use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use watershed_core::bench::{
    fit_records, run_benchmark, sample_pour_points, verify, write_records_csv,
};
use watershed_core::grid::CellIndex;
use watershed_core::synth::{gen_cone, gen_from_dem, gen_random_forest, slope_dem};
use watershed_core::{
    compute_mns, delineate, delineate_labels, parse_ascii_grid, read_mns, write_ascii_grid,
    write_mns, BoundaryPolygon, D8Grid, GridHeader, MnsGrid,
};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wsmarch",
    version,
    about = "Watershed delineation by boundary marching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a D8 grid and write the label file.
    Preprocess {
        /// ESRI ASCII D8 flow-direction grid.
        fdg: PathBuf,
        /// Output label file.
        out: PathBuf,
    },
    /// Trace the watershed of one pour point.
    Delineate {
        /// Label file written by `preprocess`.
        mns: PathBuf,
        /// Pour point as "X,Y" cell indices (world coordinates with --world).
        pour: String,
        #[arg(long, value_enum, default_value_t = Format::Geojson)]
        format: Format,
        /// Print read counters to standard error.
        #[arg(long)]
        count_reads: bool,
        /// Interpret the pour point as world coordinates.
        #[arg(long)]
        world: bool,
        /// Flow grid for the pour cell's direction; inferred from labels otherwise.
        #[arg(long)]
        fdg: Option<PathBuf>,
    },
    /// Check marched outlines against flood fill.
    Verify {
        fdg: PathBuf,
        /// Use this label file instead of labeling in memory.
        #[arg(long)]
        mns: Option<PathBuf>,
        /// Number of pour points to sample; every valid cell when omitted.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare read counts of marching and flood fill over sampled pour points.
    Benchmark {
        mns: PathBuf,
        fdg: PathBuf,
        #[arg(long, default_value_t = 100)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic D8 grid.
    Generate {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cone outlet "X,Y"; defaults to the middle of the bottom row.
        #[arg(long)]
        outlet: Option<String>,
        /// Share of cells that become roots (forest).
        #[arg(long, default_value_t = 0.02)]
        root_fraction: f64,
        /// Interior cell dug below its neighbours (dem-slope).
        #[arg(long)]
        pit: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        cellsize: f64,
        #[arg(long, default_value_t = 0.0)]
        xll: f64,
        #[arg(long, default_value_t = 0.0)]
        yll: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Geojson,
    Wkt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cone,
    Forest,
    DemSlope,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.is::<io::Error>()
            || matches!(
                e.downcast_ref::<watershed_core::Error>(),
                Some(watershed_core::Error::Io(_) | watershed_core::Error::Csv(_))
            )
    });
    if io {
        EXIT_IO
    } else {
        EXIT_BAD_INPUT
    }
}

fn run(cmd: Command) -> anyhow::Result<u8> {
    match cmd {
        Command::Preprocess { fdg, out } => {
            let g = load_grid(&fdg)?;
            g.validate_acyclic()?;
            let (m, stats) = compute_mns(&g)?;
            save_mns(&m, &out)?;
            println!("n_valid={}", m.n_valid());
            println!("pushes={}", stats.pushes);
            println!("pops={}", stats.pops);
            println!("cells_labeled={}", stats.cells_labeled);
        }
        Command::Delineate {
            mns,
            pour,
            format,
            count_reads,
            world,
            fdg,
        } => {
            let m = load_mns(&mns)?;
            let v = if world {
                let (x, y) = parse_pair::<f64>(&pour)?;
                m.header()
                    .cell_at_world(x, y)
                    .ok_or_else(|| anyhow!("world point {x},{y} is outside the grid"))?
            } else {
                let (x, y) = parse_pair::<usize>(&pour)?;
                CellIndex::new(x, y)
            };
            let (poly, reads) = match fdg {
                Some(path) => {
                    let g = load_grid(&path)?;
                    check_same_raster(g.header(), m.header())?;
                    delineate(&g, &m, v)?
                }
                None => delineate_labels(&m, v)?,
            };
            let ring = poly.world_ring(m.header());
            let text = match format {
                Format::Geojson => geojson(&ring, v, &poly),
                Format::Wkt => wkt(&ring),
            };
            println!("{text}");
            if count_reads {
                eprintln!("boundary_points={}", poly.len());
                eprintln!("face_reads={}", reads.face_reads);
                eprintln!("boundary_tests={}", reads.boundary_tests);
                eprintln!("accepted_moves={}", reads.accepted_moves);
                eprintln!("max_probes={}", reads.max_probes);
            }
        }
        Command::Verify {
            fdg,
            mns,
            sample,
            seed,
        } => {
            let g = load_grid(&fdg)?;
            let m = match mns {
                Some(path) => {
                    let m = load_mns(&path)?;
                    check_same_raster(g.header(), m.header())?;
                    m
                }
                None => compute_mns(&g)?.0,
            };
            let points = match sample {
                Some(n) => sample_pour_points(&g, n, seed),
                None => g.valid_cells().collect(),
            };
            let report = verify(&g, &m, &points);
            println!("checked={}", report.checked);
            println!("passed={}", report.passed);
            println!("failed={}", report.checked - report.passed);
            if let Some((v, msg)) = report.first_failure {
                eprintln!("first failure at {},{}: {msg}", v.x, v.y);
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
        Command::Benchmark {
            mns,
            fdg,
            sample,
            seed,
            out,
        } => {
            if sample == 0 {
                bail!("--sample must be at least 1");
            }
            let g = load_grid(&fdg)?;
            let m = load_mns(&mns)?;
            check_same_raster(g.header(), m.header())?;
            let points = sample_pour_points(&g, sample, seed);
            let records = run_benchmark(&g, &m, &points)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_records_csv(&records, BufWriter::new(file))?;
            println!("records={}", records.len());
            match fit_records(&records) {
                Ok(fit) => {
                    println!("c={}", fit.c);
                    println!("b={}", fit.b);
                    println!("r2={}", fit.r2);
                    println!("n_points={}", fit.n_points);
                }
                Err(e) => eprintln!("no fit: {e}"),
            }
        }
        Command::Generate {
            kind,
            cols,
            rows,
            seed,
            outlet,
            root_fraction,
            pit,
            cellsize,
            xll,
            yll,
            out,
        } => {
            let g = match kind {
                Kind::Cone => {
                    let outlet = match outlet {
                        Some(s) => {
                            let (x, y) = parse_pair::<usize>(&s)?;
                            CellIndex::new(x, y)
                        }
                        None => CellIndex::new(cols / 2, rows.saturating_sub(1)),
                    };
                    gen_cone(cols, rows, outlet)?
                }
                Kind::Forest => gen_random_forest(cols, rows, seed, root_fraction)?,
                Kind::DemSlope => {
                    let pit = pit
                        .map(|s| parse_pair::<usize>(&s).map(|(x, y)| CellIndex::new(x, y)))
                        .transpose()?;
                    let z = slope_dem(cols, rows, pit);
                    gen_from_dem(cols, rows, &z, &vec![false; cols * rows])?
                }
            };
            let header = GridHeader {
                xllcorner: xll,
                yllcorner: yll,
                cellsize,
                ..*g.header()
            };
            let g = D8Grid::new(header, g.nodata(), g.codes().to_vec())?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(file);
            write_ascii_grid(&g, &mut w)?;
            w.flush()?;
        }
    }
    Ok(0)
}

fn load_grid(path: &Path) -> anyhow::Result<D8Grid> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_ascii_grid(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_mns(path: &Path) -> anyhow::Result<MnsGrid> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_mns(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn save_mns(m: &MnsGrid, path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_mns(m, &mut w)?;
    w.flush()?;
    Ok(())
}

fn check_same_raster(a: &GridHeader, b: &GridHeader) -> anyhow::Result<()> {
    if (a.ncols, a.nrows) != (b.ncols, b.nrows) {
        bail!(
            "flow grid is {}x{} but labels are {}x{}",
            a.ncols,
            a.nrows,
            b.ncols,
            b.nrows
        );
    }
    Ok(())
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> anyhow::Result<(T, T)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| anyhow!("expected \"X,Y\", got {s:?}"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<T>()
            .map_err(|_| anyhow!("bad coordinate {t:?} in {s:?}"))
    };
    Ok((parse(a)?, parse(b)?))
}

fn wkt(ring: &[(f64, f64)]) -> String {
    let coords: Vec<String> = ring.iter().map(|(x, y)| format!("{x:.6} {y:.6}")).collect();
    format!("POLYGON(({}))", coords.join(", "))
}

fn geojson(ring: &[(f64, f64)], pour: CellIndex, poly: &BoundaryPolygon) -> String {
    let mut coords = String::new();
    for (i, (x, y)) in ring.iter().enumerate() {
        if i > 0 {
            coords.push(',');
        }
        write!(coords, "[{x:.6},{y:.6}]").unwrap();
    }
    format!(
        "{{\"type\":\"Feature\",\"properties\":{{\"pour_x\":{},\"pour_y\":{},\"area_cells\":{}}},\"geometry\":{{\"type\":\"Polygon\",\"coordinates\":[[{coords}]]}}}}",
        pour.x,
        pour.y,
        poly.signed_area()
    )
}
