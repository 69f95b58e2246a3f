use cclab::corpus::load_corpus;
use cclab::curriculum::{build_prompt, init_state, PreparedTask};
use cclab::optim::AdamConfig;
use cclab::policy::{ModelConfig, PolicyParams, SampleConfig};
use cclab::runner::{run_tests, Category};
use cclab::sft::{sft_train, SftConfig};
use cclab::vocab::Vocab;
use std::collections::HashMap;

fn main() {
    let vocab = Vocab::standard();
    let corpus = load_corpus(std::path::Path::new("/tmp/tr3.jsonl")).unwrap();
    let tasks: Vec<PreparedTask> = corpus.iter().map(|t| PreparedTask::new(&vocab, t.clone())).collect();
    for (lr, embed, hidden) in [
        (2e-2, 48usize, 96usize),
        (3e-2, 48, 96),
        (2e-2, 64, 128),
        (3e-2, 32, 64),
    ] {
        let mut params = PolicyParams::init(ModelConfig { vocab: vocab.len(), embed, hidden }, 1);
        let t0 = std::time::Instant::now();
        let losses = sft_train(&mut params, &corpus, &vocab,
            &SftConfig { epochs: 3, lr, batch_size: 1, seed: 0 }, &AdamConfig::default());
        let mut per_tmpl: HashMap<String, (u64, u64)> = HashMap::new();
        let mut pass = 0u64; let mut total = 0u64;
        for (ti, task) in tasks.iter().enumerate() {
            let tmpl = task.instance.id.split('_').skip(1).collect::<Vec<_>>().join("_");
            let state = init_state(task.cond_count());
            let prompt = build_prompt(&vocab, task, &state);
            let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
            for s in 0..16 {
                let cfg = SampleConfig { temperature: 0.8, top_p: 0.9, max_new_tokens: 64, seed: (ti as u64)*1000 + s };
                let traj = params.sample(&prompt.ids, &cfg, vocab.eos);
                let comp = traj.completion();
                let code = if comp.last() == Some(&vocab.eos) { &comp[..comp.len()-1] } else { comp };
                let mut full: Vec<u32> = prefix.to_vec();
                full.extend_from_slice(code);
                let rep = run_tests(&vocab.decode_pieces(&full), &task.instance.tests, 10_000);
                let e = per_tmpl.entry(tmpl.clone()).or_insert((0,0));
                e.1 += 1; total += 1;
                if rep.category == Category::PassedAll { e.0 += 1; pass += 1; }
            }
        }
        println!("lr {lr} {embed}x{hidden}: nll {:.3} stage1@0.8 {:.3} ({:?})", losses[2], pass as f64/total as f64, t0.elapsed());
        let mut keys: Vec<_> = per_tmpl.keys().cloned().collect(); keys.sort();
        for k in keys { let (p, t) = per_tmpl[&k]; println!("   {k}: {:.2}", p as f64 / t as f64); }
    }
}
