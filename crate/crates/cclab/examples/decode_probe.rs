use cclab::checkpoint::load_params;
use cclab::corpus::load_corpus;
use cclab::curriculum::{build_prompt, init_state, PreparedTask};
use cclab::policy::SampleConfig;
use cclab::runner::run_tests;
use cclab::vocab::Vocab;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let (params, _) = load_params(std::path::Path::new(&args[1])).unwrap();
    let vocab = Vocab::standard();
    let corpus = load_corpus(std::path::Path::new("/tmp/tr2.jsonl")).unwrap();
    for inst in corpus.iter().take(4) {
        let task = PreparedTask::new(&vocab, inst.clone());
        println!("== {} x={:?}", inst.id, inst.x);
        println!("   y: {}", inst.y);
        // greedy full generation
        let mut p0 = vec![vocab.bos];
        p0.extend_from_slice(&task.x_ids);
        let traj = params.sample(&p0, &SampleConfig { temperature: 1e-6, top_p: 1.0, max_new_tokens: 64, seed: 0 }, vocab.eos);
        let comp = traj.completion();
        let code = if comp.last() == Some(&vocab.eos) { &comp[..comp.len()-1] } else { comp };
        let text = vocab.decode_pieces(code);
        let rep = run_tests(&text, &inst.tests, 10_000);
        println!("   full greedy [{}]: {}", rep.category.label(), text);
        // greedy stage-1 completion
        let state = init_state(task.cond_count());
        let prompt = build_prompt(&vocab, &task, &state);
        let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
        let traj1 = params.sample(&prompt.ids, &SampleConfig { temperature: 1e-6, top_p: 1.0, max_new_tokens: 64, seed: 0 }, vocab.eos);
        let comp1 = traj1.completion();
        let code1 = if comp1.last() == Some(&vocab.eos) { &comp1[..comp1.len()-1] } else { comp1 };
        let mut full: Vec<u32> = prefix.to_vec();
        full.extend_from_slice(code1);
        let text1 = vocab.decode_pieces(&full);
        let rep1 = run_tests(&text1, &inst.tests, 10_000);
        println!("   stage1 greedy [{}]: ...{}", rep1.category.label(), vocab.decode_pieces(code1));
    }
}
