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
    let corpus = load_corpus(std::path::Path::new("/tmp/tr3.jsonl")).unwrap();
    for inst in corpus.iter().take(6) {
        let task = PreparedTask::new(&vocab, inst.clone());
        let state = init_state(task.cond_count());
        let prompt = build_prompt(&vocab, &task, &state);
        let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
        let traj = params.sample(&prompt.ids, &SampleConfig { temperature: 1e-6, top_p: 1.0, max_new_tokens: 64, seed: 0 }, vocab.eos);
        let comp = traj.completion();
        let code = if comp.last() == Some(&vocab.eos) { &comp[..comp.len()-1] } else { comp };
        let mut full: Vec<u32> = prefix.to_vec();
        full.extend_from_slice(code);
        let text = vocab.decode_pieces(&full);
        let rep = run_tests(&text, &inst.tests, 10_000);
        let y_suffix = vocab.decode_pieces(&task.y_pieces[prompt.code_prefix_pieces..]);
        println!("== {} [{}]", inst.id, rep.category.label());
        println!("   want: ...{y_suffix}");
        println!("   got:  ...{}", vocab.decode_pieces(code));
    }
}
