//! Authoring aid for dialogue datasets.
//!
//! `list SCENE [OMEGA]` prints what the robot observes from each snapshot
//! point: ids, the scene objects behind them, bearings and images. Objects
//! that were missed, split or merged are flagged.
//!
//! `fill DRAFT OUT` turns a draft into a dataset. Draft items name their
//! target by scene object and give each turn as an expression, e.g.
//! `{"text": "the one left of the door", "expr": "left_of door"}`. Ids and
//! type-B candidate sets are filled in from the observation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use navground::dataset::{Dataset, DatasetDoc, PreparedDataset};
use navground::scene_file::read_scene;
use navground_core::grounding::{DialogueItem, DialogueTurn, DialogueType, MissionTime};
use navground_core::pipeline::{observe, ObserveConfig};
use navground_core::ObjectId;
use rand::SeedableRng;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraftTurn {
    text: String,
    expr: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraftItem {
    id: String,
    scene_ref: String,
    #[serde(default)]
    case: Option<String>,
    snapshot_point_index: usize,
    dialogue_type: DialogueType,
    target: String,
    turns: Vec<DraftTurn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DraftDoc {
    name: String,
    scenes: BTreeMap<String, PathBuf>,
    items: Vec<DraftItem>,
}

fn list(scene_path: &Path, omega: usize) -> Result<(), String> {
    let scene = read_scene(scene_path).map_err(|e| e.to_string())?;
    let config = ObserveConfig { omega, ..ObserveConfig::default() };
    for (p, pose) in scene.snapshot_points().iter().enumerate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let obs = observe(&scene, pose, &config, &mut rng).map_err(|e| e.to_string())?;
        println!(
            "point {p} at ({:.2}, {:.2}) heading {:.0}°: {} objects",
            pose.position.x,
            pose.position.y,
            pose.heading.to_degrees(),
            obs.entries.len()
        );
        let mut seen: BTreeMap<&str, Vec<&ObjectId>> = BTreeMap::new();
        for e in &obs.entries {
            let obj = scene.object(&e.object_name).ok_or("entry without scene object")?;
            let names: BTreeSet<&str> = e.detections.iter().map(|d| d.object_name.as_str()).collect();
            let images: Vec<String> = e
                .detections
                .iter()
                .map(|d| format!("{}:{}", d.snapshot_index, d.mask.len()))
                .collect();
            let attrs: Vec<String> = obj.attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!(
                "  {:<10} {:<16} az {:>7.1}° d {:>5.2} m  [{}]  images {}{}",
                e.id.as_str(),
                e.object_name,
                pose.azimuth_to(obj.centroid()).to_degrees(),
                obj.centroid().distance(pose.position),
                attrs.join(" "),
                images.join(" "),
                if names.len() > 1 { format!("  MERGED {names:?}") } else { String::new() }
            );
            for n in names {
                seen.entry(n).or_default().push(&e.id);
            }
        }
        for obj in scene.objects() {
            match seen.get(obj.name.as_str()).map(Vec::len) {
                None => println!("  MISSING {}", obj.name),
                Some(1) => {}
                Some(_) => println!("  SPLIT {} into {:?}", obj.name, seen[obj.name.as_str()]),
            }
        }
    }
    Ok(())
}

fn fill(draft_path: &Path, out_path: &Path) -> Result<(), String> {
    let text = fs::read_to_string(draft_path).map_err(|e| e.to_string())?;
    let draft: DraftDoc = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", draft_path.display()))?;
    let mut items = Vec::new();
    for d in &draft.items {
        let turns = d
            .turns
            .iter()
            .map(|t| {
                let mut turn = DialogueTurn::parse_expression(&t.expr).map_err(|e| format!("{}: {e}", d.id))?;
                turn.text = t.text.clone();
                if turn.time == Some(MissionTime::Immediate) {
                    turn.time = None;
                }
                Ok(turn)
            })
            .collect::<Result<Vec<_>, String>>()?;
        items.push(DialogueItem {
            id: d.id.clone(),
            scene_ref: d.scene_ref.clone(),
            case: d.case.clone(),
            snapshot_point_index: d.snapshot_point_index,
            dialogue_type: d.dialogue_type,
            turns,
            // Placeholder until the observation names the target.
            target_id: ObjectId::new(&d.target),
            step_candidates: Vec::new(),
        });
    }
    let base = draft_path.parent().unwrap_or(Path::new("."));
    let dataset = Dataset {
        name: draft.name.clone(),
        scene_paths: draft.scenes.iter().map(|(k, p)| (k.clone(), base.join(p))).collect(),
        items: items.clone(),
    };
    let prepared = PreparedDataset::prepare(dataset, &ObserveConfig::default(), 0, None).map_err(|e| e.to_string())?;
    for (item, d) in items.iter_mut().zip(&draft.items) {
        let obs = prepared.observation(item);
        let entry = obs
            .entries
            .iter()
            .find(|e| e.object_name == d.target)
            .ok_or_else(|| format!("{}: target `{}` is not observed", d.id, d.target))?;
        item.target_id = entry.id.clone();
        let steps = item.oracle_steps(&prepared.context(item)).map_err(|e| format!("{}: {e}", d.id))?;
        let sizes: Vec<usize> = steps.iter().map(BTreeSet::len).collect();
        println!("{:<12} {} target {:<8} steps {:?}", item.id, item.dialogue_type, item.target_id, sizes);
        if item.dialogue_type == DialogueType::B {
            item.step_candidates = steps;
        }
        item.check_against(&prepared.context(item)).map_err(|e| format!("{}: {e}", d.id))?;
    }
    let doc = DatasetDoc { name: draft.name, scenes: draft.scenes, items };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    json.push('\n');
    fs::write(out_path, json).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    let result = match args.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["list", scene] => list(Path::new(scene), 8),
        ["list", scene, omega] => omega.parse().map_err(|_| "OMEGA must be a number".to_string()).and_then(|w| list(Path::new(scene), w)),
        ["fill", draft, out] => fill(Path::new(draft), Path::new(out)),
        _ => Err("usage: annotate_dataset list SCENE [OMEGA] | fill DRAFT OUT".to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
