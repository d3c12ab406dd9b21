use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use instflow::flowops::GrayImage;
use instflow::io::{self, LabelMap};
use instflow::GridDims;

fn instflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_instflow"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("data");
    let out = instflow(&["synth", "--seed", "3", "-o", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn synth_writes_a_runnable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    assert_eq!(io::list_frame_files(data.join("masks"), "png").unwrap().len(), 20);
    assert_eq!(io::list_frame_files(data.join("images"), "png").unwrap().len(), 20);
    assert_eq!(io::list_frame_files(data.join("flow"), "flo").unwrap().len(), 19);

    let result = dir.path().join("out.txt");
    let out = instflow(&[
        "track",
        "--masks",
        path(&data.join("masks")),
        "--flow",
        path(&data.join("flow")),
        "--md",
        "1",
        "-o",
        path(&result),
    ]);
    assert!(out.status.success());
    let out = instflow(&["eval", path(&data.join("gt/gt.txt")), path(&result)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(
        header,
        ["Rcll", "Prcn", "FAR", "GT", "MT", "PT", "ML", "FP", "FN", "IDs", "FM", "MOTA", "MOTP", "MOTAL"]
    );
    let values: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
    assert_eq!(values[11], "100.0");
    let json_start = text.find('{').unwrap();
    let json: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(json["mota"], 100.0);
    assert_eq!(json["ids"], 0);
}

#[test]
fn zero_flow_ablation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let result = dir.path().join("zero.txt");
    let out = instflow(&[
        "track",
        "--masks",
        path(&data.join("masks")),
        "--zero-flow",
        "--md",
        "0",
        "-o",
        path(&result),
    ]);
    assert!(out.status.success());
    let entries = io::read_mot(&result).unwrap();
    assert!(entries.iter().all(|e| e.conf == 1.0));
    assert!(entries.iter().map(|e| e.id).max().unwrap() > 4);
}

#[test]
fn missing_flow_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    fs::remove_file(data.join("flow/000007.flo")).unwrap();
    let out = instflow(&[
        "track",
        "--masks",
        path(&data.join("masks")),
        "--flow",
        path(&data.join("flow")),
        "-o",
        path(&dir.path().join("o.txt")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("000007.flo"));
}

#[test]
fn malformed_ground_truth_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.txt");
    let mut text: String = (1..=6).map(|f| format!("{f},1,1,1,5,5,1,-1,-1,-1\n")).collect();
    text.push_str("7,1,one,1,5,5,1,-1,-1,-1\n");
    fs::write(&gt, &text).unwrap();
    let out = instflow(&["eval", path(&gt), path(&gt)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 7"), "{err}");
}

#[test]
fn flow_command_recovers_a_shift() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    fs::create_dir_all(&images).unwrap();
    let d = GridDims::new(48, 40).unwrap();
    let tex = |x: i64, y: i64| ((x * 7919 + y * 104_729 + x * y * 31) % 251) as f32 / 255.0;
    let prev = GrayImage::from_fn(d, |p| tex(p.x as i64, p.y as i64));
    let next = GrayImage::from_fn(d, |p| tex(p.x as i64 - 3, p.y as i64 + 2));
    io::write_gray_image(&prev, images.join("000001.png")).unwrap();
    io::write_gray_image(&next, images.join("000002.png")).unwrap();
    let flows = dir.path().join("flow");
    let out = instflow(&["flow", path(&images), "-o", path(&flows)]);
    assert!(out.status.success());
    let field = io::read_flo(flows.join("000001.flo")).unwrap();
    assert!(field.valid_count() > 0);
    for i in 0..d.area() {
        let p = d.pos_of(i);
        if let Some(v) = field.get(p) {
            assert_eq!(v, [3.0, -2.0], "{p:?}");
        }
    }
}

#[test]
fn render_colours_each_track() {
    let dir = tempfile::tempdir().unwrap();
    let masks = dir.path().join("masks");
    fs::create_dir_all(&masks).unwrap();
    let d = GridDims::new(20, 10).unwrap();
    let labels: Vec<u16> = (0..d.area())
        .map(|i| {
            let p = d.pos_of(i);
            match (p.x, p.y) {
                (2..=5, 2..=5) => 1,
                (12..=15, 3..=6) => 2,
                _ => 0,
            }
        })
        .collect();
    io::write_label_map(&LabelMap::new(d, labels).unwrap(), masks.join("000001.png")).unwrap();
    let result = dir.path().join("res.txt");
    fs::write(&result, "1,7,3,3,4,4,1.0,-1,-1,-1\n1,9,13,4,4,4,1.0,-1,-1,-1\n").unwrap();
    let out_dir = dir.path().join("render");
    let out = instflow(&[
        "render",
        "--masks",
        path(&masks),
        "--result",
        path(&result),
        "-o",
        path(&out_dir),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), 1);
    let img = image::open(out_dir.join("000001.png")).unwrap().to_rgb8();
    let mut colours: Vec<[u8; 3]> = img.pixels().map(|p| p.0).filter(|c| *c != [0, 0, 0]).collect();
    colours.sort();
    colours.dedup();
    assert_eq!(colours.len(), 2);
    assert_eq!(img.get_pixel(3, 3).0, img.get_pixel(5, 5).0);
    assert_ne!(img.get_pixel(3, 3).0, img.get_pixel(13, 4).0);
}

#[test]
fn repeated_runs_match_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let run = |name: &str| {
        let result = dir.path().join(name);
        let out = instflow(&[
            "track",
            "--masks",
            path(&data.join("masks")),
            "--images",
            path(&data.join("images")),
            "-o",
            path(&result),
        ]);
        assert!(out.status.success());
        fs::read(result).unwrap()
    };
    assert_eq!(run("a.txt"), run("b.txt"));
}
