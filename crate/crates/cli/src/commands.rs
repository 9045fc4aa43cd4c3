use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use aggvision::evalkit::{self, InstanceSet, SpOptions};
use aggvision::geomcore::{load_mesh, mesh_measures, primitives, TriMesh};
use aggvision::imgseg::{self, SegmentOptions};
use aggvision::morph2d::{self, GradationMetric};
use aggvision::pointcloud::{self, LabeledPoint, LabeledPointCloud, UNLABELED};
use aggvision::rng::stream_seed;
use aggvision::shapepairs::{self, PairConfig};
use aggvision::stockgen::{self, StockpileConfig};
use aggvision::triview::{self, TriviewOptions, ViewTriplet};
use aggvision::{morph3d, Point3};
use anyhow::{anyhow, Context};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Cli, Command, Global};

pub enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

/// Everything needed to replay a run, written as `run.json` next to its artifacts.
#[derive(Debug, Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    inputs: Vec<String>,
    seed: u64,
    threads: Option<usize>,
    params: Value,
}

#[derive(Debug, Args)]
pub struct TriviewArgs {
    #[arg(long, requires_all = ["front", "side", "ball_top", "ball_front", "ball_side"])]
    top: Option<PathBuf>,
    #[arg(long)]
    front: Option<PathBuf>,
    #[arg(long)]
    side: Option<PathBuf>,
    #[arg(long)]
    ball_top: Option<PathBuf>,
    #[arg(long)]
    ball_front: Option<PathBuf>,
    #[arg(long)]
    ball_side: Option<PathBuf>,
    /// Physical diameter of the calibration ball.
    #[arg(long)]
    ball_diameter: f64,
    /// Render the silhouettes of a mesh instead of reading masks.
    #[arg(long, conflicts_with = "top", requires = "cell")]
    mesh: Option<PathBuf>,
    /// Pixel size for mesh silhouettes.
    #[arg(long)]
    cell: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Morph2dArgs {
    mask: PathBuf,
    /// Length per pixel.
    #[arg(long, conflicts_with = "ball")]
    scale: Option<f64>,
    /// Calibration-ball mask giving the scale.
    #[arg(long, requires = "ball_diameter")]
    ball: Option<PathBuf>,
    #[arg(long)]
    ball_diameter: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Morph2dParams {
    include_border: bool,
    bins: usize,
    metric: GradationMetric,
}

impl Default for Morph2dParams {
    fn default() -> Self {
        Self {
            include_border: false,
            bins: 10,
            metric: GradationMetric::Esd,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MeshParams {
    /// Multiplies input coordinates, e.g. 0.001 for millimeter files.
    unit_scale: f64,
    views: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self {
            unit_scale: 1.0,
            views: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalSegParams {
    iou_threshold: f64,
}

impl Default for EvalSegParams {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpParams {
    threshold: f64,
    n_rays: usize,
    angular_tol_deg: f64,
}

impl Default for SpParams {
    fn default() -> Self {
        let o = SpOptions::default();
        Self {
            threshold: evalkit::DEFAULT_SP_THRESHOLD,
            n_rays: o.n_rays,
            angular_tol_deg: o.angular_tol_deg,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ClusterParams {
    radius: Option<f64>,
    min_size: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            radius: None,
            min_size: 1,
        }
    }
}

/// Synthetic rock models for `gen-pairs --synthetic`: longest side in meters.
const SYNTHETIC_ROCK_SIZE: (f64, f64) = (0.10, 0.16);
const SYNTHETIC_ROCK_SUBDIVISION: usize = 4;

fn read_config_text(g: &Global) -> Result<Option<String>> {
    match &g.config {
        None => Ok(None),
        Some(p) => fs::read_to_string(p)
            .map(Some)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display()))),
    }
}

fn load_params<T: DeserializeOwned + Default>(g: &Global) -> Result<T> {
    match read_config_text(g)? {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config: {e}"))),
    }
}

fn require_out(g: &Global, command: &str) -> Result<PathBuf> {
    match &g.out {
        Some(p) => Ok(p.clone()),
        None => usage(format!("{command} needs --out")),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

struct Ctx<'a> {
    name: &'a str,
    global: &'a Global,
    seed: u64,
}

impl Ctx<'_> {
    /// Write `run.json` into the output directory, if any.
    fn record(&self, inputs: Vec<String>, params: &impl Serialize) -> Result<()> {
        if let Some(out) = &self.global.out {
            prepare_out(out)?;
            let run = RunConfig {
                command: self.name,
                inputs,
                seed: self.seed,
                threads: self.global.threads,
                params: serde_json::to_value(params)?,
            };
            write_json(&out.join("run.json"), &run)?;
        }
        Ok(())
    }

    fn out_file(&self, name: &str) -> Option<PathBuf> {
        self.global.out.as_ref().map(|o| o.join(name))
    }
}

fn print(value: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return usage("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let name = match &cli.command {
        Command::Segment { .. } => "segment",
        Command::Triview(_) => "triview",
        Command::Morph2d(_) => "morph2d",
        Command::Morph3d { .. } => "morph3d",
        Command::GenStockpile { .. } => "gen-stockpile",
        Command::GenPairs { .. } => "gen-pairs",
        Command::EvalSeg { .. } => "eval-seg",
        Command::EvalCd { .. } => "eval-cd",
        Command::Sp { .. } => "sp",
        Command::Cluster { .. } => "cluster",
        Command::MeshStats { .. } => "mesh-stats",
    };
    let ctx = Ctx {
        name,
        global: &g,
        seed: g.seed.unwrap_or(0),
    };
    match cli.command {
        Command::Segment { image } => segment(&ctx, &image),
        Command::Triview(a) => triview_cmd(&ctx, &a),
        Command::Morph2d(a) => morph2d_cmd(&ctx, &a),
        Command::Morph3d { mesh, views } => morph3d_cmd(&ctx, &mesh, views),
        Command::GenStockpile { library } => gen_stockpile(&ctx, library.as_deref()),
        Command::GenPairs { library, synthetic } => gen_pairs(&ctx, library.as_deref(), synthetic),
        Command::EvalSeg { truth, pred, iou_threshold } => eval_seg(&ctx, &truth, &pred, iou_threshold),
        Command::EvalCd { a, b } => eval_cd(&ctx, &a, &b),
        Command::Sp { cloud, threshold } => sp(&ctx, &cloud, threshold),
        Command::Cluster { cloud, radius, min_size } => cluster(&ctx, &cloud, radius, min_size),
        Command::MeshStats { mesh } => mesh_stats(&ctx, &mesh),
    }
}

fn segment(ctx: &Ctx, image: &Path) -> Result<()> {
    let opts: SegmentOptions = load_params(ctx.global)?;
    let out = require_out(ctx.global, ctx.name)?;
    let img = image::open(image)
        .with_context(|| format!("reading {}", image.display()))?
        .to_rgb8();
    let mask = imgseg::segment(&img, &opts)?;
    ctx.record(vec![path_str(image)], &opts)?;
    imgseg::write_pgm(&mask, out.join("mask.pgm"))?;
    print(&json!({"width": mask.width, "height": mask.height, "foreground_pixels": mask.count()}))
}

/// Pixel diameter of a calibration ball from its mask.
fn ball_pixels(path: &Path, diameter: f64) -> Result<f64> {
    let mask = imgseg::read_pgm(path)?;
    Ok(diameter / morph2d::calibrate_scale(&mask, diameter)?)
}

fn triview_cmd(ctx: &Ctx, a: &TriviewArgs) -> Result<()> {
    let opts: TriviewOptions = load_params(ctx.global)?;
    let (triplet, inputs) = match (&a.mesh, &a.top) {
        (Some(mesh_path), _) => {
            let cell = a.cell.expect("clap enforces --cell with --mesh");
            let mesh = load_mesh(mesh_path, 1.0)?;
            let ([top, front, side], _) = triview::orthographic_silhouettes(&mesh, cell)?;
            let px = a.ball_diameter / cell;
            let t = ViewTriplet {
                top,
                front,
                side,
                ball_top: px,
                ball_front: px,
                ball_side: px,
                ball_diameter: a.ball_diameter,
            };
            (t, vec![path_str(mesh_path)])
        }
        (None, Some(top)) => {
            let get = |p: &Option<PathBuf>| p.clone().expect("clap enforces the full view set");
            let (front, side) = (get(&a.front), get(&a.side));
            let (bt, bf, bs) = (get(&a.ball_top), get(&a.ball_front), get(&a.ball_side));
            let t = ViewTriplet {
                top: imgseg::read_pgm(top)?,
                front: imgseg::read_pgm(&front)?,
                side: imgseg::read_pgm(&side)?,
                ball_top: ball_pixels(&bt, a.ball_diameter)?,
                ball_front: ball_pixels(&bf, a.ball_diameter)?,
                ball_side: ball_pixels(&bs, a.ball_diameter)?,
                ball_diameter: a.ball_diameter,
            };
            let inputs = [top, &front, &side, &bt, &bf, &bs].iter().map(|p| path_str(p)).collect();
            (t, inputs)
        }
        (None, None) => return usage("triview needs either --mesh or --top/--front/--side with ball masks"),
    };
    let rec = triview::reconstruct(&triplet, &opts)?;
    let value = json!({
        "report": rec.report,
        "calibrated_dims": [rec.dims.x0, rec.dims.y0, rec.dims.z0],
        "size_ratio": rec.size_ratio,
        "ball_pixels": [triplet.ball_top, triplet.ball_front, triplet.ball_side],
    });
    ctx.record(inputs, &opts)?;
    if let Some(p) = ctx.out_file("report.json") {
        write_json(&p, &value)?;
    }
    print(&value)
}

fn morph2d_cmd(ctx: &Ctx, a: &Morph2dArgs) -> Result<()> {
    let params: Morph2dParams = load_params(ctx.global)?;
    let mask = imgseg::read_pgm(&a.mask)?;
    let mut inputs = vec![path_str(&a.mask)];
    let scale = match (a.scale, &a.ball) {
        (Some(s), _) => s,
        (None, Some(ball)) => {
            inputs.push(path_str(ball));
            morph2d::calibrate_scale(&imgseg::read_pgm(ball)?, a.ball_diameter.expect("clap requires it"))?
        }
        (None, None) => mask.scale.unwrap_or(1.0),
    };
    let particles = morph2d::particles_from_mask(&mask, params.include_border);
    if particles.is_empty() {
        return Err(anyhow!("no particles in {}", a.mask.display()).into());
    }
    let mut csv = String::from("particle,esd,l_max,l_min,fer2d,circularity,area,perimeter\n");
    for (i, p) in particles.iter().enumerate() {
        let r = morph2d::analyze(p, scale)?;
        writeln!(
            csv,
            "{i},{},{},{},{},{},{},{}",
            r.esd, r.l_max, r.l_min, r.fer2d, r.circularity, r.area, r.perimeter
        )
        .expect("writing to a String");
    }
    let grad = morph2d::gradation_report(&particles, scale, params.metric, params.bins)?;
    let params_echo = json!({"params": params, "scale": scale});
    ctx.record(inputs, &params_echo)?;
    if let Some(p) = ctx.out_file("particles.csv") {
        write_text(&p, &csv)?;
        write_text(&ctx.out_file("gradation.csv").expect("out is set"), &grad.to_csv())?;
        write_json(&ctx.out_file("gradation.json").expect("out is set"), &grad)?;
    }
    print(&json!({"particles": particles.len(), "scale": scale, "metric": params.metric}))
}

fn morph3d_cmd(ctx: &Ctx, mesh_path: &Path, views: Option<usize>) -> Result<()> {
    let mut params: MeshParams = load_params(ctx.global)?;
    if let Some(v) = views {
        params.views = v;
    }
    let mesh = load_mesh(mesh_path, params.unit_scale)?;
    let report = morph3d::analyze_mesh(&mesh)?;
    let mut value = serde_json::to_value(&report)?;
    ctx.record(vec![path_str(mesh_path)], &params)?;
    if params.views > 0 {
        let stats = morph3d::multiview_2d_stats(&mesh, params.views, stream_seed(ctx.seed, "cli.morph3d"))?;
        value["multiview"] = json!({"fer2d": stats.fer2d, "circularity": stats.circularity});
        if let Some(p) = ctx.out_file("views.csv") {
            write_text(&p, &stats.to_csv())?;
        }
    }
    if let Some(p) = ctx.out_file("report.json") {
        write_json(&p, &value)?;
    }
    print(&value)
}

fn mesh_stats(ctx: &Ctx, mesh_path: &Path) -> Result<()> {
    let params: MeshParams = load_params(ctx.global)?;
    let mesh = load_mesh(mesh_path, params.unit_scale)?;
    let m = mesh_measures(&mesh);
    let bb = mesh.aabb();
    let value = json!({
        "vertices": mesh.vertex_count(),
        "faces": mesh.face_count(),
        "watertight": mesh.is_watertight(),
        "volume": m.volume,
        "surface_area": m.surface_area,
        "centroid": m.centroid.map(|c| [c.x, c.y, c.z]),
        "aabb_min": [bb.min.x, bb.min.y, bb.min.z],
        "aabb_max": [bb.max.x, bb.max.y, bb.max.z],
    });
    ctx.record(vec![path_str(mesh_path)], &params)?;
    if let Some(p) = ctx.out_file("mesh_stats.json") {
        write_json(&p, &value)?;
    }
    print(&value)
}

/// OBJ and PLY meshes of a directory in file-name order.
fn load_library(dir: &Path) -> Result<(Vec<TriMesh>, Vec<String>)> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("ply"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(anyhow!("no OBJ or PLY meshes in {}", dir.display()).into());
    }
    let meshes = paths
        .iter()
        .map(|p| load_mesh(p, 1.0).with_context(|| format!("loading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((meshes, paths.iter().map(|p| path_str(p)).collect()))
}

fn gen_stockpile(ctx: &Ctx, library: Option<&Path>) -> Result<()> {
    let out = require_out(ctx.global, ctx.name)?;
    let mut cfg = match read_config_text(ctx.global)? {
        Some(text) => StockpileConfig::from_json(&text).map_err(|e| Failure::Usage(e.to_string()))?,
        None => StockpileConfig::default(),
    };
    if let Some(s) = ctx.global.seed {
        cfg.seed = s;
    }
    let (lib, inputs) = match library {
        Some(dir) => {
            let (m, names) = load_library(dir)?;
            (Some(m), names)
        }
        None => (None, Vec::new()),
    };
    let generated = stockgen::generate(lib, &cfg)?;
    let ctx = Ctx { seed: cfg.seed, ..*ctx };
    ctx.record(inputs, &cfg)?;
    let manifest = stockgen::write_scene(&generated.scan, &generated.pile, &cfg, &out)?;
    if manifest.empty {
        eprintln!("warning: no ray hit the stockpile; the cloud is empty");
    }
    print(&json!({
        "instances": manifest.instances.len(),
        "layers": manifest.layers,
        "points": manifest.total_points,
        "visible_instances": manifest.visible_instances,
        "mean_points_per_visible": manifest.mean_points_per_visible,
    }))
}

fn gen_pairs(ctx: &Ctx, library: Option<&Path>, synthetic: Option<usize>) -> Result<()> {
    let out = require_out(ctx.global, ctx.name)?;
    let mut cfg: PairConfig = load_params(ctx.global)?;
    if let Some(s) = ctx.global.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (lib, inputs) = match (library, synthetic) {
        (Some(dir), _) => load_library(dir)?,
        (None, Some(0)) => return usage("--synthetic needs at least one model"),
        (None, Some(n)) => (
            primitives::rock_library(
                stream_seed(cfg.seed, "cli.synthetic_rocks"),
                n,
                SYNTHETIC_ROCK_SIZE,
                SYNTHETIC_ROCK_SUBDIVISION,
            ),
            vec![format!("synthetic:{n}")],
        ),
        (None, None) => return usage("gen-pairs needs --library or --synthetic"),
    };
    let ctx = Ctx { seed: cfg.seed, ..*ctx };
    ctx.record(inputs, &cfg)?;
    let manifest = shapepairs::generate_pairs(&lib, &cfg, &out)?;
    print(&json!({"models": manifest.models, "pairs": manifest.pair_count}))
}

/// Read a labeled PLY or CSV cloud; plain XYZ PLY files come back unlabeled.
fn read_cloud(path: &Path) -> Result<LabeledPointCloud> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        return Ok(pointcloud::read_labeled_csv(path).with_context(|| format!("reading {}", path.display()))?);
    }
    match pointcloud::read_labeled_ply(path) {
        Ok(c) => Ok(c),
        Err(_) => {
            let pts = pointcloud::read_xyz_ply(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(LabeledPointCloud::new(
                pts.into_iter()
                    .map(|pos| LabeledPoint {
                        pos,
                        rgb: [128; 3],
                        lidar_id: 0,
                        instance_id: UNLABELED,
                    })
                    .collect(),
            ))
        }
    }
}

fn eval_seg(ctx: &Ctx, truth_path: &Path, pred_path: &Path, iou_threshold: Option<f64>) -> Result<()> {
    let mut params: EvalSegParams = load_params(ctx.global)?;
    if let Some(t) = iou_threshold {
        params.iou_threshold = t;
    }
    let truth = read_cloud(truth_path)?;
    let pred = read_cloud(pred_path)?;
    if truth.len() != pred.len() {
        return Err(anyhow!("truth has {} points but prediction has {}", truth.len(), pred.len()).into());
    }
    let points = truth.positions();
    let t = InstanceSet::from_labels(&truth.instance_ids());
    let p = InstanceSet::from_labels(&pred.instance_ids());
    let score = evalkit::match_and_score(&p, &t, &points, params.iou_threshold)?;
    let value = json!({
        "completeness": score.completeness,
        "iou_ap": score.iou_ap,
        "truth_instances": t.len(),
        "predicted_instances": p.len(),
        "matches": score.matches.len(),
        "iou_threshold": params.iou_threshold,
    });
    ctx.record(vec![path_str(truth_path), path_str(pred_path)], &params)?;
    if let Some(path) = ctx.out_file("scores.json") {
        write_json(&path, &value)?;
        let mut csv = String::from("predicted,truth,iou\n");
        for m in &score.matches {
            writeln!(csv, "{},{},{}", m.predicted, m.truth, m.iou).expect("writing to a String");
        }
        write_text(&ctx.out_file("matches.csv").expect("out is set"), &csv)?;
    }
    print(&value)
}

fn eval_cd(ctx: &Ctx, a: &Path, b: &Path) -> Result<()> {
    let params: NoParams = load_params(ctx.global)?;
    let pa = read_cloud(a)?.positions();
    let pb = read_cloud(b)?.positions();
    let cd = evalkit::chamfer_l1(&pa, &pb)?;
    let value = json!({"chamfer_l1": cd, "points_a": pa.len(), "points_b": pb.len()});
    ctx.record(vec![path_str(a), path_str(b)], &params)?;
    if let Some(p) = ctx.out_file("chamfer.json") {
        write_json(&p, &value)?;
    }
    print(&value)
}

fn sp(ctx: &Ctx, cloud_path: &Path, threshold: Option<f64>) -> Result<()> {
    let mut params: SpParams = load_params(ctx.global)?;
    if let Some(t) = threshold {
        params.threshold = t;
    }
    let cloud = read_cloud(cloud_path)?;
    let mut groups: std::collections::BTreeMap<i32, Vec<Point3<f64>>> = Default::default();
    for p in &cloud.points {
        if p.instance_id != UNLABELED {
            groups.entry(p.instance_id).or_default().push(p.pos);
        }
    }
    if groups.is_empty() {
        // An unlabeled cloud is scored as one instance.
        groups.insert(0, cloud.positions());
    }
    let instances: Vec<(i32, Vec<Point3<f64>>)> = groups.into_iter().collect();
    let opts = SpOptions {
        n_rays: params.n_rays,
        angular_tol_deg: params.angular_tol_deg,
        seed: ctx.seed,
    };
    let records = evalkit::sp_filter(&instances, params.threshold, &opts);
    let passed = records.iter().filter(|r| r.pass).count();
    ctx.record(vec![path_str(cloud_path)], &params)?;
    if let Some(p) = ctx.out_file("sp.json") {
        write_json(&p, &json!({"threshold": params.threshold, "records": records}))?;
        let mut csv = String::from("instance_id,points,sp,pass\n");
        for r in &records {
            writeln!(csv, "{},{},{},{}", r.instance_id, r.points, r.sp, r.pass).expect("writing to a String");
        }
        write_text(&ctx.out_file("sp.csv").expect("out is set"), &csv)?;
    }
    print(&json!({"instances": records.len(), "passed": passed, "threshold": params.threshold}))
}

fn cluster(ctx: &Ctx, cloud_path: &Path, radius: Option<f64>, min_size: Option<usize>) -> Result<()> {
    let mut params: ClusterParams = load_params(ctx.global)?;
    if radius.is_some() {
        params.radius = radius;
    }
    if let Some(m) = min_size {
        params.min_size = m;
    }
    let Some(r) = params.radius else {
        return usage("cluster needs --radius or a radius in the config");
    };
    let cloud = read_cloud(cloud_path)?;
    let set = evalkit::cluster_baseline(&cloud.positions(), r, params.min_size)?;
    let mut labeled = cloud.clone();
    for p in &mut labeled.points {
        p.instance_id = UNLABELED;
    }
    for (k, g) in set.groups.iter().enumerate() {
        for &i in g {
            labeled.points[i].instance_id = k as i32;
        }
    }
    ctx.record(vec![path_str(cloud_path)], &params)?;
    if let Some(p) = ctx.out_file("clusters.ply") {
        pointcloud::write_labeled_ply(&labeled, &p)?;
    }
    let clustered: usize = set.groups.iter().map(Vec::len).sum();
    print(&json!({"instances": set.len(), "clustered_points": clustered, "points": cloud.len()}))
}
