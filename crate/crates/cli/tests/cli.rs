use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn streamcolor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamcolor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn metric(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .to_string()
}

#[test]
fn clique_and_path_generation() {
    let dir = tempfile::tempdir().unwrap();
    let k8 = dir.path().join("k8.txt");
    assert_eq!(code(&streamcolor(&["gen", "--kind", "clique", "--n", "8", "--out", path_str(&k8)])), 0);
    assert_eq!(fs::read_to_string(&k8).unwrap().lines().count(), 28);
    let path = streamcolor(&["gen", "--kind", "path", "--n", "5"]);
    assert_eq!(String::from_utf8(path.stdout).unwrap().lines().count(), 4);
}

#[test]
fn determ_on_k8_uses_eight_colors() {
    let dir = tempfile::tempdir().unwrap();
    let k8 = dir.path().join("k8.txt");
    let col = dir.path().join("col.txt");
    streamcolor(&["gen", "--kind", "clique", "--n", "8", "--out", path_str(&k8)]);
    let out = streamcolor(&["run", "determ", path_str(&k8), "--out", path_str(&col)]);
    assert_eq!(code(&out), 0);
    let m = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metric(&m, "colors_used"), "8");
    assert_eq!(metric(&m, "verified"), "true");
    assert_eq!(metric(&m, "passes"), metric(&m, "expected_passes"));
    let mut colors: Vec<u32> = fs::read_to_string(&col)
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    colors.sort_unstable();
    assert_eq!(colors, (0..8).collect::<Vec<_>>());
}

#[test]
fn generated_stream_round_trips_with_capped_degree() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let args = ["gen", "--kind", "gnp-capped", "--n", "1000", "--delta", "64", "--seed", "4"];
    assert_eq!(code(&streamcolor(&[&args[..], &["--out", path_str(&g)]].concat())), 0);
    let mut deg = vec![0usize; 1000];
    for l in fs::read_to_string(&g).unwrap().lines() {
        let f: Vec<usize> = l.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        deg[f[0]] += 1;
        deg[f[1]] += 1;
    }
    assert!(deg.iter().all(|&d| d <= 64));
    let out = streamcolor(&["run", "determ", path_str(&g), "--delta", "64"]);
    assert_eq!(code(&out), 0);
    let m = String::from_utf8(out.stdout).unwrap();
    assert!(metric(&m, "colors_used").parse::<usize>().unwrap() <= 65);
}

#[test]
fn listcolor_with_separate_list_file() {
    let dir = tempfile::tempdir().unwrap();
    let both = dir.path().join("both.txt");
    streamcolor(&["gen", "--kind", "regular-ish", "--n", "60", "--delta", "6", "--lists", "--seed", "2", "--out", path_str(&both)]);
    let text = fs::read_to_string(&both).unwrap();
    let (lists, edges): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| l.starts_with('L'));
    let (e, l) = (dir.path().join("e.txt"), dir.path().join("l.txt"));
    fs::write(&e, edges.join("\n")).unwrap();
    fs::write(&l, lists.join("\n")).unwrap();
    let out = streamcolor(&["run", "listcolor", path_str(&e), "--lists", path_str(&l)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(metric(&String::from_utf8(out.stdout).unwrap(), "verified"), "true");
}

#[test]
fn robust_replay_reports_passing_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.txt");
    let tr = dir.path().join("tr.txt");
    streamcolor(&["gen", "--kind", "adversary-replay", "--n", "128", "--delta", "16", "--query-every", "32", "--seed", "5", "--out", path_str(&t)]);
    let out = streamcolor(&["run", "robust", path_str(&t), "--beta", "0", "--delta", "16", "--transcript", path_str(&tr)]);
    assert_eq!(code(&out), 0);
    let verdicts: Vec<String> = fs::read_to_string(&tr)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with('Q'))
        .map(String::from)
        .collect();
    assert!(!verdicts.is_empty());
    assert!(verdicts.iter().all(|v| v.contains("violations=0")));
}

#[test]
fn lowrand_color_space_for_delta_five() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s.txt");
    fs::write(&s, "E 0 1\nE 1 2\nQ\n").unwrap();
    let out = streamcolor(&["run", "lowrand", path_str(&s), "--delta", "5", "--n", "10"]);
    assert_eq!(code(&out), 0);
    assert_eq!(metric(&String::from_utf8(out.stdout).unwrap(), "color_space"), "96");
}

#[test]
fn game_summaries() {
    let stop = streamcolor(&["game", "robust", "stop", "--trials", "1", "--seed", "1"]);
    assert_eq!(code(&stop), 0);
    let m = String::from_utf8(stop.stdout).unwrap();
    assert_eq!(metric(&m, "violations"), "0");
    assert!(m.contains("trial.0=pass inserts=0 queries=0"));
    let small = ["--n", "64", "--delta", "8", "--trials", "2", "--seed", "3", "--query-every", "4"];
    let a = streamcolor(&[&["game", "lowrand", "conflict-seeker"][..], &small].concat());
    let b = streamcolor(&[&["game", "lowrand", "conflict-seeker"][..], &small].concat());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "E 0 1\nE 0 x\n").unwrap();
    let out = streamcolor(&["run", "determ", path_str(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&streamcolor(&["game", "robust", "stop"])), 2);
    assert_eq!(code(&streamcolor(&["game", "robust", "nobody", "--seed", "1"])), 2);
    assert_eq!(code(&streamcolor(&["gen", "--kind", "gnp-capped", "--n", "5"])), 2);
    assert_eq!(code(&streamcolor(&["run", "determ", "/nonexistent/file"])), 1);
    let short = dir.path().join("short.txt");
    fs::write(&short, "E 0 1\nL 0 1 5\nL 1 2 5 6\n").unwrap();
    assert_eq!(code(&streamcolor(&["run", "listcolor", path_str(&short)])), 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    streamcolor(&["gen", "--kind", "regular-ish", "--n", "300", "--delta", "12", "--seed", "8", "--out", path_str(&g)]);
    let run = |tag: &str| {
        let col = dir.path().join(format!("c{tag}"));
        let met = dir.path().join(format!("m{tag}"));
        streamcolor(&["run", "determ", path_str(&g), "--out", path_str(&col), "--metrics", path_str(&met)]);
        (fs::read(col).unwrap(), fs::read(met).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}
