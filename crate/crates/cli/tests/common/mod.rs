//! A small workspace with known structure: 7 cuisines of 4 canonical items,
//! a gradient along one dimension, and three extra variants, one of them
//! orthogonal to its canonical.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const CUISINES: [&str; 7] = [
    "East Asian",
    "South Asian",
    "Mediterranean",
    "Latin American",
    "Middle Eastern",
    "Northern European",
    "West African",
];
pub const LEVELS: [&str; 4] = ["none", "low", "moderate", "high"];
pub const DIM: usize = 10;
pub const ORTHOGONAL_GROUP: i64 = 5;

pub fn canonical_id(c: usize, j: usize) -> i64 {
    (c * 4 + j + 1) as i64
}

pub fn canonical_name(c: usize, j: usize) -> String {
    format!("item_{c}_{j}")
}

pub fn canonical_vector(c: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; DIM];
    v[c] = 3.0;
    v[8] = j as f64;
    v[9] = 0.2 * ((c + j) % 3) as f64;
    v
}

fn row(out: &mut String, id: i64, name: &str, v: &[f64]) {
    write!(out, "{id}\t{name}").unwrap();
    for x in v {
        write!(out, "\t{x:?}").unwrap();
    }
    out.push('\n');
}

/// Writes the fixture into `dir` and returns the number of originals.
pub fn write_workspace(dir: &Path) -> usize {
    let mut tsv = String::from("id\tname");
    for d in 1..=DIM {
        write!(tsv, "\tv{d}").unwrap();
    }
    tsv.push('\n');
    let mut map = String::from("original_id,original_name,canonical_id,canonical_name\n");
    let mut labels = serde_json::Map::new();
    let mut tags = serde_json::Map::new();
    let mut coords = String::from("id,x,y,z\n");
    let mut originals = 0;
    for c in 0..7 {
        for j in 0..4 {
            let (id, name) = (canonical_id(c, j), canonical_name(c, j));
            row(&mut tsv, id, &name, &canonical_vector(c, j));
            writeln!(map, "{id},{name},{id},{name}").unwrap();
            labels.insert(name.clone(), LEVELS[j].into());
            tags.insert(name.clone(), serde_json::json!([CUISINES[c]]));
            writeln!(coords, "{id},{c},{j},{}", 0.5 * c as f64).unwrap();
            originals += 1;
        }
    }
    let mut near = canonical_vector(0, 0);
    near[9] += 0.3;
    let mut orthogonal = vec![0.0; DIM];
    orthogonal[7] = 1.0;
    let mut alt = canonical_vector(2, 1);
    alt[8] += 0.2;
    for (id, name, v, target) in [
        (101, "item_0_0_minced", near, (0, 0)),
        (102, "item_1_0_dried", orthogonal, (1, 0)),
        (103, "item_2_1_fresh", alt, (2, 1)),
    ] {
        row(&mut tsv, id, name, &v);
        let (c, j) = target;
        writeln!(map, "{id},{name},{},{}", canonical_id(c, j), canonical_name(c, j)).unwrap();
        originals += 1;
    }

    fs::create_dir_all(dir.join("labels")).unwrap();
    fs::write(dir.join("embeddings.tsv"), tsv).unwrap();
    fs::write(dir.join("map.csv"), map).unwrap();
    fs::write(dir.join("coords3d.csv"), coords).unwrap();
    let label_file = serde_json::json!({
        "dimension": "sweetness",
        "kind": "ordinal",
        "scale": LEVELS,
        "labels": labels,
    });
    fs::write(dir.join("labels/sweetness.json"), serde_json::to_string_pretty(&label_file).unwrap()).unwrap();
    let tag_file = serde_json::json!({
        "pool_spec": "every fixture canonical",
        "clusters": CUISINES,
        "tags": tags,
    });
    fs::write(dir.join("tags.json"), serde_json::to_string_pretty(&tag_file).unwrap()).unwrap();
    let sweet: Vec<i64> = (0..7).map(|c| canonical_id(c, 3)).collect();
    let savoury: Vec<i64> = (0..7).map(|c| canonical_id(c, 0)).collect();
    let manifest = serde_json::json!({
        "seed": 7,
        "embeddings": "embeddings.tsv",
        "map": "map.csv",
        "labels": {"sweetness": "labels/sweetness.json"},
        "tags": "tags.json",
        "coords3d": "coords3d.csv",
        "sweet": sweet,
        "savoury": savoury,
        "k": 3,
        "n_perm": 99,
    });
    fs::write(dir.join("workspace.json"), serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    originals
}
