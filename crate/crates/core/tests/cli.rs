use std::path::Path;
use std::process::{Command, Output};

fn hairdigi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hairdigi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const PARAMS: &str = "dye_r=200,dye_g=80,dye_b=40,dye_concentration=0.5,melanin_concentration=0.2,melanin_ratio=0.4";

#[test]
fn render_writes_requested_size_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str, threads: &'static str| {
        vec!["render", "--params", PARAMS, "--out", out, "--res", "20x12", "--spp", "2", "--seed", "4", "--threads", threads]
    };
    for (out, t) in [("a.png", "1"), ("b.png", "1"), ("c.png", "3")] {
        let o = hairdigi(&args(out, t), d);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(d.join("a.png")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.png")).unwrap());
    assert_eq!(a, std::fs::read(d.join("c.png")).unwrap());
    let img = image::open(d.join("a.png")).unwrap();
    assert_eq!((img.width(), img.height()), (20, 12));

    let o = hairdigi(&["render", "--params", PARAMS, "--out", "h.png", "--res", "8", "--spp", "1", "--hdr", "-v"], d);
    assert_eq!(code(&o), 0);
    assert!(d.join("h.pfm").exists());
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["samples"], 64);
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.txt"), "dye_r=oops\n").unwrap();
    let o = hairdigi(&["render", "--params", "bad.txt", "--out", "x.png"], d);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
    assert_eq!(code(&hairdigi(&["render", "--params", PARAMS, "--out", "x.png", "--scene", "cube"], d)), 2);
    assert_eq!(code(&hairdigi(&["render", "--params", PARAMS, "--out", "x.png", "--res", "0x3"], d)), 2);
    assert_eq!(code(&hairdigi(&["render", "--bogus"], d)), 2);
    assert_eq!(
        code(&hairdigi(&["digitize", "--model", "none.ckpt", "--image", "x.png", "--out", "p.txt"], d)),
        2
    );
    std::fs::create_dir(d.join("empty")).unwrap();
    assert_eq!(code(&hairdigi(&["eval", "--model", "oracle", "--test", "empty", "--out", "r.json"], d)), 2);
    assert_eq!(code(&hairdigi(&["train", "--data", "empty", "--out", "m.ckpt"], d)), 2);
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = hairdigi(args, d);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        o
    };
    ok(&["dataset", "--n", "5", "--out", "ds", "--res", "16", "--spp", "1", "--seed", "3"]);
    assert_eq!(std::fs::read_dir(d.join("ds/images")).unwrap().count(), 5);
    let manifest = std::fs::read(d.join("ds/manifest.jsonl")).unwrap();
    // Rerunning over complete output changes nothing.
    ok(&["dataset", "--n", "5", "--out", "ds", "--res", "16", "--spp", "1", "--seed", "3"]);
    assert_eq!(std::fs::read(d.join("ds/manifest.jsonl")).unwrap(), manifest);

    ok(&["train", "--data", "ds", "--out", "m.ckpt", "--preset", "desk", "--epochs", "2", "--batch", "2"]);
    assert!(d.join("m.ckpt").exists());
    let csv = std::fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    ok(&["train", "--data", "ds", "--out", "m.ckpt", "--preset", "desk", "--epochs", "3", "--batch", "2", "--resume"]);
    ok(&["train", "--data", "ds", "--out", "n.ckpt", "--preset", "desk", "--epochs", "3", "--batch", "2"]);
    assert_eq!(std::fs::read(d.join("m.ckpt")).unwrap(), std::fs::read(d.join("n.ckpt")).unwrap());

    ok(&[
        "digitize", "--model", "m.ckpt", "--image", "ds/images/00000000.png", "--out", "p.txt",
        "--rerender", "portrait-straight", "--res", "16", "--spp", "1",
    ]);
    let h: hairdigi::HairParams = std::fs::read_to_string(d.join("p.txt")).unwrap().parse().unwrap();
    assert_eq!(hairdigi::HairParams::from_array(h.to_array()).unwrap(), h);
    assert!(d.join("p.png").exists());

    let o = ok(&["eval", "--model", "oracle", "--test", "ds", "--out", "r.json"]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("L1") && table.contains("MS-SSIM") && table.contains("not computed"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["l1"]["mean"], 0.0);
    assert_eq!(report["ms_ssim"]["mean"], 1.0);
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    ok(&["eval", "--model", "m.ckpt", "--test", "ds", "--out", "r2.json"]);
}
