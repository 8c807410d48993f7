//! The command pipeline run in-process: generate, train, embed, eval.

use attrseq::cli::run;

fn main() {
    let dir = std::env::temp_dir().join("attrseq-pipeline-example");
    let p = |s: &str| dir.join(s).to_string_lossy().into_owned();
    let steps: [Vec<String>; 4] = [
        vec!["generate".into(), "--out".into(), p("gen")],
        vec!["train".into(), "--data".into(), p("gen/dataset.jsonl"), "--epochs".into(), "3".into(), "--out".into(), p("train")],
        vec!["embed".into(), "--checkpoint".into(), p("train/model.ckpt"), "--data".into(), p("gen/dataset.jsonl"), "--out".into(), p("emb")],
        vec!["eval".into(), "--embeddings".into(), p("emb/embeddings.csv"), "--data".into(), p("gen/dataset.jsonl"), "--out".into(), p("eval")],
    ];
    for step in steps {
        let code = run(std::iter::once("attrseq".to_string()).chain(step.iter().cloned()).chain(["--seed".into(), "7".into()]));
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("{}", std::fs::read_to_string(dir.join("eval/summary.json")).unwrap_or_default());
}
