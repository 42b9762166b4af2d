//! The `navground` command line.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use navground_core::grounding::{
    parse_first_dialogue, DialogueTurn, Grounder, GrounderResponse, GroundingContext, GroundingError, MissionDraft,
    MissionTime, ScriptedGrounder,
};
use navground_core::level1::{analyze_errors, OnlineMap};
use navground_core::mission::{build_mission, footprint_marks, inflate, plan_path, render_overlay, Mission, MissionError, Path as GridPath, Scheduler};
use navground_core::pipeline::{observe, Observation};
use navground_core::sensing::raster::render_ppm;
use navground_core::world::{rasterize_occupancy, Cell, OccupancyGrid, Pose, Scene};
use navground_core::ObjectId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{BackendKind, Config, ConfigFile, GrounderConfig, Overrides};
use crate::dataset::{Dataset, PreparedDataset};
use crate::error::CliError;
use crate::eval::evaluate;
use crate::remote::{CannedTransport, HttpTransport, RemoteError, RemoteGrounder, Transport};
use crate::report::{error_report_json, metrics_csv, metrics_json, metrics_table};
use crate::scene_file::read_scene;

#[derive(Debug, Parser)]
#[command(name = "navground", version, about = "Dialogue-driven object grounding and navigation on a simulated robot")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for depth noise and the perturbed grounder.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Score weights `SR,AS,AR,NS`, e.g. `0.8,0.2,0.6,0.4`.
    #[arg(long, global = true, value_name = "SR,AS,AR,NS")]
    pub weights: Option<String>,
    /// Snapshots per panoramic sweep.
    #[arg(long, global = true)]
    pub omega: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub grounder: Option<BackendKind>,
    /// Transcript replayed by the canned grounder.
    #[arg(long, global = true, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Base URL of the remote grounder.
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Print the occupancy grid with object footprints.
    #[arg(long, global = true)]
    pub show_map: bool,
    /// Most dialogue turns before a failure is reported.
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    /// Worker threads for `evaluate`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Standard deviation of depth noise, meters.
    #[arg(long, global = true, value_name = "SIGMA")]
    pub noise: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Take a panoramic sweep and write snapshots, annotated images and the online map.
    Simulate {
        scene: PathBuf,
        /// Snapshot point, counted from 0.
        #[arg(long, default_value_t = 0)]
        pose: usize,
        /// Also store per-pixel depth in snapshots.json.
        #[arg(long)]
        with_depth: bool,
    },
    /// Score a dialogue dataset and write report.json and report.csv.
    Evaluate { dataset: PathBuf },
    /// Talk to the robot: each line is one dialogue turn.
    ///
    /// With the scripted grounder a line is a `;`-separated expression, for
    /// example `action go to; type chair; attr subtype=high; left_of door`.
    /// Clauses: `type T`, `attr K=V`, `nearest_to X`, `farthest_from X`,
    /// `next_to X [GAP]`, `left_of X`, `right_of X`, `between X Y [OFFSET]`,
    /// `facing X [DEG]`, `in_image N`, `action WORDS`, `at SECONDS|immediate`.
    /// The first turn needs an action. Other grounders receive the line
    /// verbatim.
    Ground {
        scene: PathBuf,
        /// Snapshot point, counted from 0.
        #[arg(long, default_value_t = 0)]
        pose: usize,
    },
    /// Plan a grid path on the scene's occupancy map.
    Plan {
        scene: PathBuf,
        /// Goal cell `ROW,COL`.
        #[arg(long, value_parser = parse_cell)]
        goal: Cell,
        /// Start cell `ROW,COL`; defaults to the cell of the snapshot point.
        #[arg(long, value_parser = parse_cell)]
        start: Option<Cell>,
        /// Snapshot point used when no start is given, counted from 0.
        #[arg(long, default_value_t = 0)]
        pose: usize,
    },
}

fn parse_cell(s: &str) -> Result<Cell, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected ROW,COL, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a cell index"));
    Ok(Cell::new(num(r)?, num(c)?))
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdin, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.kind.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    Config::resolve(
        file,
        Overrides {
            seed: cli.seed,
            omega: cli.omega,
            noise_sigma: cli.noise,
            k_max: cli.k_max,
            jobs: cli.jobs,
            weights: cli.weights.clone(),
            out: cli.out.clone(),
            backend: cli.grounder,
            endpoint: cli.endpoint.clone(),
            transcript: cli.transcript.clone(),
        },
    )
}

pub fn execute(cli: &Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate { scene, pose, with_depth } => simulate(&config, scene, *pose, *with_depth, cli.show_map, stdout),
        Command::Evaluate { dataset } => run_evaluate(&config, dataset, stdout, stderr),
        Command::Ground { scene, pose } => ground(&config, scene, *pose, cli.show_map, stdin, stdout),
        Command::Plan { scene, goal, start, pose } => plan(&config, scene, *goal, *start, *pose, stdout),
    }
}

fn load_scene(config: &Config, path: &Path) -> Result<Scene, CliError> {
    let scene = read_scene(path).map_err(CliError::data)?;
    if config.camera.is_empty() {
        return Ok(scene);
    }
    scene.with_camera(config.camera.apply(scene.camera())).map_err(CliError::config)
}

fn snapshot_point(scene: &Scene, index: usize) -> Result<Pose, CliError> {
    scene.snapshot_points().get(index).copied().ok_or_else(|| {
        CliError::config(format!("snapshot point {index} does not exist; the scene has {}", scene.snapshot_points().len()))
    })
}

fn observe_at(config: &Config, scene: &Scene, pose: &Pose) -> Result<Observation, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    observe(scene, pose, &config.observe_config(), &mut rng).map_err(CliError::data)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize)]
struct DetectionOut<'a> {
    id: &'a str,
    label: &'a str,
    object_name: &'a str,
    bbox: [u32; 4],
    pixels: usize,
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    index: usize,
    heading_deg: f64,
    width: u32,
    height: u32,
    detections: Vec<DetectionOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<Vec<Option<f64>>>,
}

#[derive(Serialize)]
struct SnapshotsOut<'a> {
    position: [f64; 2],
    heading_deg: f64,
    omega: usize,
    snapshots: Vec<SnapshotOut<'a>>,
}

#[derive(Serialize)]
struct MapObjectOut<'a> {
    id: &'a str,
    object_name: &'a str,
    position: [f64; 2],
    cells: Vec<[usize; 2]>,
}

/// Grid rows are listed from row 0 (smallest y) upward, `#` occupied.
#[derive(Serialize)]
struct OnlineMapOut<'a> {
    resolution: f64,
    origin: [f64; 2],
    width: usize,
    height: usize,
    rows: Vec<String>,
    objects: Vec<MapObjectOut<'a>>,
}

fn grid_rows(grid: &OccupancyGrid) -> Vec<String> {
    (0..grid.height())
        .map(|r| (0..grid.width()).map(|c| if grid.is_occupied(Cell::new(r, c)) { '#' } else { '.' }).collect())
        .collect()
}

fn online_map_json(online: &OnlineMap) -> String {
    let g = online.base();
    let out = OnlineMapOut {
        resolution: g.resolution(),
        origin: [g.origin().x, g.origin().y],
        width: g.width(),
        height: g.height(),
        rows: grid_rows(g),
        objects: online
            .footprints()
            .iter()
            .map(|(id, cells)| {
                let p = online.position(id).unwrap_or_default();
                MapObjectOut {
                    id: id.as_str(),
                    object_name: online.object_name(id).unwrap_or(""),
                    position: [p.x, p.y],
                    cells: cells.iter().map(|c| [c.row, c.col]).collect(),
                }
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&out).expect("map serializes");
    s.push('\n');
    s
}

fn snapshots_json(obs: &Observation, with_depth: bool) -> String {
    let out = SnapshotsOut {
        position: [obs.pose.position.x, obs.pose.position.y],
        heading_deg: obs.pose.heading.to_degrees(),
        omega: obs.snapshots.len(),
        snapshots: obs
            .snapshots
            .iter()
            .map(|s| SnapshotOut {
                index: s.index,
                heading_deg: s.heading.to_degrees(),
                width: s.width,
                height: s.height,
                detections: obs
                    .entries
                    .iter()
                    .filter_map(|e| {
                        let d = e.detection_in(s.index)?;
                        Some(DetectionOut {
                            id: e.id.as_str(),
                            label: &d.label,
                            object_name: &d.object_name,
                            bbox: [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max],
                            pixels: d.mask.len(),
                        })
                    })
                    .collect(),
                depth: with_depth.then(|| s.depth.iter().map(|d| d.is_finite().then_some(*d)).collect()),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&out).expect("snapshots serialize");
    s.push('\n');
    s
}

fn simulate(config: &Config, scene_path: &Path, pose_index: usize, with_depth: bool, show_map: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let scene = load_scene(config, scene_path)?;
    let pose = snapshot_point(&scene, pose_index)?;
    let obs = observe_at(config, &scene, &pose)?;
    create_out(&config.out)?;
    write_file(&config.out.join("snapshots.json"), snapshots_json(&obs, with_depth).as_bytes())?;
    write_file(&config.out.join("online_map.json"), online_map_json(&obs.online).as_bytes())?;
    let tag_offset = config.observe_config().tag_offset;
    for (s, a) in obs.snapshots.iter().zip(&obs.annotated) {
        write_file(&config.out.join(format!("snapshot_{}.ppm", s.index)), &render_ppm(s, a, tag_offset))?;
    }
    writeln!(out, "{} snapshots, {} objects", obs.snapshots.len(), obs.entries.len())?;
    for e in &obs.entries {
        let images: Vec<String> = e.detections.iter().map(|d| d.snapshot_index.to_string()).collect();
        writeln!(out, "  {:<12} {:<16} images {}", e.id.as_str(), e.object_name, images.join(","))?;
    }
    if !obs.entries.is_empty() {
        let errors = analyze_errors(&obs.online, &scene).map_err(CliError::data)?;
        write_file(&config.out.join("error_report.json"), error_report_json(&errors).as_bytes())?;
        write!(out, "{errors}")?;
    }
    if show_map {
        write!(out, "{}", render_overlay(obs.online.base(), None, &footprint_marks(&obs.online)))?;
    }
    writeln!(out, "wrote {}", config.out.display())?;
    Ok(())
}

fn run_evaluate(config: &Config, path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let dataset = Dataset::load(path).map_err(CliError::data)?;
    let camera = |c: &navground_core::world::CameraModel| config.camera.apply(c);
    let camera: Option<&dyn Fn(&navground_core::world::CameraModel) -> navground_core::world::CameraModel> =
        (!config.camera.is_empty()).then_some(&camera);
    let prepared = PreparedDataset::prepare(dataset, &config.observe_config(), config.seed, camera).map_err(CliError::data)?;
    prepared.check_items().map_err(CliError::data)?;
    let eval = evaluate(&prepared, config)?;
    create_out(&config.out)?;
    write_file(&config.out.join("report.json"), metrics_json(&eval.report).as_bytes())?;
    write_file(&config.out.join("report.csv"), metrics_csv(&eval.report).as_bytes())?;
    write!(out, "{}", metrics_table(&eval.report))?;
    for id in &eval.non_monotone {
        writeln!(err, "warning: item `{id}`: candidate sets grew between steps")?;
    }
    if !eval.transport_failures.is_empty() {
        return Err(CliError::transport(format!(
            "{} item(s) aborted on transport errors: {}",
            eval.transport_failures.len(),
            eval.transport_failures.join(", ")
        )));
    }
    Ok(())
}

/// What the REPL talks to.
enum Session<'a> {
    Scripted(ScriptedGrounder<'a>),
    Http(RemoteGrounder<HttpTransport>),
    Canned(RemoteGrounder<CannedTransport>),
}

/// Outcome of one line typed at the prompt.
enum Step {
    /// Rejected before reaching the grounder; the turn does not count.
    Retry(String),
    Answer(GrounderResponse),
}

fn remote_step<T: Transport>(g: &mut RemoteGrounder<T>, line: &str) -> Result<Step, CliError> {
    match g.send_text(line) {
        Ok(r) => Ok(Step::Answer(r)),
        Err(e @ RemoteError::Transport(_)) => Err(CliError::transport(e)),
        Err(e @ RemoteError::TurnLimit { .. }) => Err(CliError::grounding(e)),
    }
}

impl Session<'_> {
    fn step(&mut self, line: &str, draft: &mut Option<MissionDraft>, ctx: &GroundingContext<'_>) -> Result<Step, CliError> {
        match self {
            Session::Scripted(g) => {
                let turn = match DialogueTurn::parse_expression(line) {
                    Ok(t) => t,
                    Err(e) => return Ok(Step::Retry(e.to_string())),
                };
                let first = if draft.is_none() {
                    match parse_first_dialogue(&turn, ctx) {
                        Ok(d) => Some(d),
                        Err(e @ GroundingError::NotFound { .. }) => {
                            let resp = GrounderResponse::from_candidates(vec![], Some(format!("I cannot find it ({e}).")));
                            return Ok(Step::Answer(resp));
                        }
                        Err(e) => return Ok(Step::Retry(e.to_string())),
                    }
                } else {
                    None
                };
                match g.ground(&turn) {
                    Ok(r) => {
                        if first.is_some() {
                            *draft = first;
                        }
                        Ok(Step::Answer(r))
                    }
                    Err(e) => Ok(Step::Retry(e.to_string())),
                }
            }
            Session::Http(g) => {
                remote_draft(draft, line);
                remote_step(g, line)
            }
            Session::Canned(g) => {
                remote_draft(draft, line);
                remote_step(g, line)
            }
        }
    }
}

/// Remote grounders get free text, so the first line is kept as the action.
fn remote_draft(draft: &mut Option<MissionDraft>, line: &str) {
    if draft.is_none() {
        *draft = Some(MissionDraft {
            time: MissionTime::Immediate,
            position_constraints: Vec::new(),
            object_type: None,
            action: line.to_string(),
            ambiguous: false,
            candidates: BTreeSet::new(),
        });
    }
}

fn ground(config: &Config, scene_path: &Path, pose_index: usize, show_map: bool, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), CliError> {
    let scene = load_scene(config, scene_path)?;
    let pose = snapshot_point(&scene, pose_index)?;
    let obs = observe_at(config, &scene, &pose)?;
    let ctx = GroundingContext::new(&scene, &obs.entries, obs.pose);
    let tag_offset = config.observe_config().tag_offset;
    let mut session = match &config.grounder {
        GrounderConfig::Scripted | GrounderConfig::Perturbed => Session::Scripted(ScriptedGrounder::new(ctx)),
        GrounderConfig::Remote { endpoint, token_env, timeout } => {
            let token = std::env::var(token_env).ok().filter(|t| !t.is_empty());
            let t = HttpTransport::new(endpoint, token, *timeout);
            Session::Http(RemoteGrounder::for_observation(t, "repl", &obs, tag_offset, config.max_turns))
        }
        GrounderConfig::Canned { transcript } => {
            let t = CannedTransport::load(transcript).map_err(CliError::config)?;
            Session::Canned(RemoteGrounder::for_observation(t, "repl", &obs, tag_offset, config.max_turns))
        }
    };
    writeln!(out, "observed {} objects from snapshot point {pose_index}", obs.entries.len())?;
    if show_map {
        write!(out, "{}", render_overlay(obs.online.base(), None, &footprint_marks(&obs.online)))?;
    }
    let mut draft: Option<MissionDraft> = None;
    let mut turns = 0;
    let mut line = String::new();
    while turns < config.k_max {
        write!(out, "D{}> ", turns + 1)?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if matches!(text, "quit" | "exit") {
            break;
        }
        let resp = match session.step(text, &mut draft, &ctx)? {
            Step::Retry(msg) => {
                writeln!(out, "! {msg}")?;
                continue;
            }
            Step::Answer(r) => r,
        };
        turns += 1;
        writeln!(out, "{}", resp.raw_text().unwrap_or(""))?;
        if let (Some(id), Some(d)) = (resp.resolved_id(), &draft) {
            return execute_mission(config, d, id, &obs, show_map, out);
        }
    }
    Err(CliError::grounding(format!("failure: no unique object after {turns} turn(s) (k_max = {})", config.k_max)))
}

fn mission_error(e: MissionError) -> CliError {
    match e {
        MissionError::OutsideGrid { .. } | MissionError::Blocked { .. } => CliError::config(e),
        _ => CliError::grounding(e),
    }
}

fn execute_mission(config: &Config, draft: &MissionDraft, id: &ObjectId, obs: &Observation, show_map: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let mission = build_mission(1, draft, id, &obs.online, &obs.pose).map_err(mission_error)?;
    let mut scheduler = Scheduler::new();
    scheduler.submit(mission);
    let now = match draft.time {
        MissionTime::Immediate => 0.0,
        MissionTime::At(t) => t,
    };
    let mission = scheduler.next_due(now).expect("the submitted mission is due");
    print_mission(&mission, out)?;
    let grid = inflate(&obs.online.fused_grid(), config.inflation_radius);
    let start = grid
        .cell_of(obs.pose.position)
        .ok_or_else(|| CliError::config("robot position lies outside the map"))?;
    let path = plan_path(&grid, start, mission.target_cell).map_err(mission_error)?;
    print_path(&path, out)?;
    if show_map {
        write!(out, "{}", render_overlay(&grid, Some(&path), &footprint_marks(&obs.online)))?;
    }
    Ok(())
}

fn print_mission(m: &Mission, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(
        out,
        "mission {}: {} {} at cell ({}, {}), time {}",
        m.id, m.action, m.target_object_id, m.target_cell.row, m.target_cell.col, m.scheduled_time
    )?;
    Ok(())
}

fn print_path(p: &GridPath, out: &mut dyn Write) -> Result<(), CliError> {
    let cells: Vec<String> = p.cells.iter().map(|c| format!("({},{})", c.row, c.col)).collect();
    writeln!(out, "path: {} cells, cost {:.3}", p.cells.len(), p.cost)?;
    writeln!(out, "{}", cells.join(" "))?;
    Ok(())
}

fn plan(config: &Config, scene_path: &Path, goal: Cell, start: Option<Cell>, pose_index: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let scene = load_scene(config, scene_path)?;
    let grid = inflate(&rasterize_occupancy(&scene), config.inflation_radius);
    let start = match start {
        Some(c) => c,
        None => {
            let pose = snapshot_point(&scene, pose_index)?;
            grid.cell_of(pose.position).ok_or_else(|| CliError::config("snapshot point lies outside the map"))?
        }
    };
    let path = plan_path(&grid, start, goal).map_err(mission_error)?;
    print_path(&path, out)?;
    write!(out, "{}", render_overlay(&grid, Some(&path), &[]))?;
    Ok(())
}
