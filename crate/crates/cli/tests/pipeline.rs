use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_asymgauge");

const EVOCATION: &str = "\
cat\tanimal\t30
animal\tcat\t5
dog\tanimal\t25
animal\tdog\t8
cat\tdog\t20
dog\tcat\t22
cheese\tmouse\t6
mouse\tcheese\t18
kitchen\thouse\t12
house\tkitchen\t4
big\tlarge\t15
large\tbig\t16
hot\tcold\t40
cold\thot\t38
mouse\tcat\t10
cat\tmouse\t3
";

const CONCEPTNET: &str = "\
/a/1\t/r/IsA\t/c/en/cat\t/c/en/animal\t{}
/a/2\t/r/IsA\t/c/en/dog/n\t/c/en/animal\t{}
/a/3\t/r/AtLocation\t/c/en/kitchen\t/c/en/house\t{}
/a/4\t/r/Synonym\t/c/en/big\t/c/en/large\t{}
/a/5\t/r/Antonym\t/c/en/hot\t/c/en/cold\t{}
/a/6\t/r/Desires\t/c/en/mouse\t/c/en/cheese\t{}
/a/7\t/r/IsA\t/c/fr/chat\t/c/fr/animal\t{}
";

const CORPUS: &str = "\
The cat is an animal that sleeps.

A dog is an animal too, and a dog barks at the cat.

The mouse ate cheese in the kitchen of the house.

A big house has a large kitchen.

Hot tea and cold water; hot soup and cold bread.

The cat chased the mouse near the cheese.

Every animal needs water. The dog and the cat share a big house.
";

const WORDS: [&str; 12] =
    ["cat", "animal", "dog", "cheese", "mouse", "kitchen", "house", "big", "large", "hot", "cold", "water"];

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("evoc.tsv"), EVOCATION).unwrap();
        fs::write(root.join("kg.csv"), CONCEPTNET).unwrap();
        fs::write(root.join("corpus.txt"), CORPUS).unwrap();
        let mut vectors = format!("{} 3\n", WORDS.len());
        for (i, w) in WORDS.iter().enumerate() {
            let i = i as f64;
            vectors.push_str(&format!("{w} {} {} {}\n", (i * 0.7).sin(), (i * 1.3).cos(), 0.1 * i - 0.5));
        }
        fs::write(root.join("vec.txt"), vectors).unwrap();
        fs::write(
            root.join("run.cfg"),
            "# test run\n\
             out_dir = out\n\
             evocation.toy = evoc.tsv\n\
             conceptnet = kg.csv\n\
             corpus = corpus.txt\n\
             vectors.toyvec = vec.txt\n\
             seed = 3\n\
             cap = 50\n\
             scorer = mock\n\
             bin_size = 2\n",
        )
        .unwrap();
        Fixture { _dir: dir, root }
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.root.join("out").join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.root.join("run.cfg");
        let mut cmd = Command::new(BIN);
        cmd.arg(args[0]).arg("--config").arg(&cfg).args(&args[1..]).current_dir(&self.root);
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str]) {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.run(args).status.code().unwrap()
    }

    fn prepare(&self) {
        for step in ["ingest", "annotate", "index", "cond-evoc"] {
            self.ok(&[step]);
        }
    }
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

#[test]
fn full_pipeline_is_reproducible() {
    let f = Fixture::new();
    f.prepare();
    f.ok(&["cond-static"]);
    f.ok(&["cond-lm"]);
    assert!(!f.out("lm/lm.checkpoint.tsv").exists());
    f.ok(&["report"]);
    for rel in ["report/toy.tsv", "report/toy.txt", "report/toy.lar.csv", "conditionals/models/toyvec.tsv", "factors/lm.tsv"] {
        assert!(f.out(rel).exists(), "{rel} missing");
    }
    let isa = fs::read_to_string(f.out("pairs/toy/isA.tsv")).unwrap();
    assert!(isa.contains("cat\tanimal\n") && isa.contains("dog\tanimal\n"));
    assert!(f.out("pairs/toy/relatedTo.tsv").exists());

    let first = fs::read(f.out("report/toy.tsv")).unwrap();
    let text = fs::read_to_string(f.out("report/toy.txt")).unwrap();
    assert!(text.contains("isA"));
    f.ok(&["report"]);
    assert_eq!(first, fs::read(f.out("report/toy.tsv")).unwrap());
    assert!(fs::read_dir(f.out("report/bins")).unwrap().count() > 0);
}

#[test]
fn missing_upstream_artifact_exits_3() {
    let f = Fixture::new();
    let out = f.run(&["report"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("annotate"));
    f.ok(&["ingest"]);
    f.ok(&["annotate"]);
    assert_eq!(f.code(&["report"]), 3);
    assert_eq!(f.code(&["cond-lm"]), 3);
}

#[test]
fn bad_configuration_exits_2() {
    let f = Fixture::new();
    f.prepare();
    assert_eq!(f.code(&["cond-lm", "--scorer", "telepathy"]), 2);
    assert_eq!(f.code(&["report", "--gammas", "x"]), 2);
    assert_eq!(f.code(&["ingest", "--evocation.toy", "nowhere.tsv"]), 2);
    fs::write(f.root.join("run.cfg"), "out_dir out\n").unwrap();
    assert_eq!(f.code(&["ingest"]), 2);
}

#[test]
fn scorer_failure_then_resume() {
    let f = Fixture::new();
    f.prepare();
    f.ok(&["cond-lm", "--lm_name", "ref"]);

    let failing = format!("cmd:{BIN} mock-scorer --fail-after 1");
    let out = f.run(&["cond-lm", "--scorer", &failing, "--scorer_retries", "0"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let checkpoint = f.out("lm/lm.checkpoint.tsv");
    assert!(checkpoint.exists());

    assert_eq!(f.code(&["cond-lm", "--seed", "4"]), 2);

    let healthy = format!("cmd:{BIN} mock-scorer");
    f.ok(&["cond-lm", "--scorer", &healthy]);
    assert!(!checkpoint.exists());
    assert_eq!(body(&f.out("conditionals/models/lm.tsv")), body(&f.out("conditionals/models/ref.tsv")));
    assert_eq!(body(&f.out("factors/lm.tsv")), body(&f.out("factors/ref.tsv")));
}

#[test]
fn emit_and_consume_match_single_shot() {
    let f = Fixture::new();
    f.prepare();
    f.ok(&["cond-lm", "--lm_name", "ref"]);
    let tasks = f.root.join("tasks.jsonl");
    f.ok(&["cond-lm", "--emit-tasks", tasks.to_str().unwrap()]);
    assert!(!f.out("conditionals/models/lm.tsv").exists());

    let scored = Command::new(BIN)
        .arg("mock-scorer")
        .stdin(fs::File::open(&tasks).unwrap())
        .output()
        .unwrap();
    assert!(scored.status.success());
    let scores = f.root.join("scores.jsonl");
    fs::write(&scores, &scored.stdout).unwrap();

    f.ok(&["cond-lm", "--consume-scores", scores.to_str().unwrap()]);
    assert_eq!(body(&f.out("conditionals/models/lm.tsv")), body(&f.out("conditionals/models/ref.tsv")));
}

#[test]
fn static_precisions_agree() {
    let f = Fixture::new();
    f.prepare();
    let o32 = f.root.join("o32");
    let o64 = f.root.join("o64");
    for d in ["evocation", "pairs"] {
        copy_dir(&f.out(d), &o32.join(d));
        copy_dir(&f.out(d), &o64.join(d));
    }
    f.ok(&["cond-static", "--out_dir", o32.to_str().unwrap(), "--precision", "f32"]);
    f.ok(&["cond-static", "--out_dir", o64.to_str().unwrap()]);
    let read = |p: PathBuf| -> Vec<f64> {
        body(&p).lines().map(|l| l.rsplit('\t').next().unwrap().parse().unwrap()).collect()
    };
    let a = read(o32.join("conditionals/models/toyvec.tsv"));
    let b = read(o64.join("conditionals/models/toyvec.tsv"));
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-5 * y.abs().max(1e-30), "{x} vs {y}");
    }
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        if e.path().is_dir() {
            copy_dir(&e.path(), &to.join(e.file_name()));
        } else {
            fs::copy(e.path(), to.join(e.file_name())).unwrap();
        }
    }
}

#[test]
fn similarity_eval_writes_table() {
    let f = Fixture::new();
    f.prepare();
    f.ok(&["cond-static"]);
    fs::write(f.root.join("gold.tsv"), "word1\tword2\tscore\ncat\tdog\t8.0\nbig\tlarge\t9.5\nhot\tcold\t3.0\ncat\tcheese\t1.0\nzebra\tcat\t5.0\n")
        .unwrap();
    f.ok(&["simeval", "--similarity.toygold", "gold.tsv"]);
    let t = body(&f.out("simeval/similarity.tsv"));
    assert!(t.starts_with("gold\tresource\tmeasure"));
    assert!(t.contains("toygold\ttoyvec\tcosine\t"));
}
