use cclab::corpus::load_corpus;
use cclab::curriculum::{build_prompt, init_state, PreparedTask};
use cclab::fgo::{fgo_mask, TokenMask};
use cclab::optim::{AdamConfig, AdamState};
use cclab::policy::{ModelConfig, PolicyParams, SampleConfig};
use cclab::rl::{ppo_update, prepare_rollout, PpoConfig, Rollout};
use cclab::runner::{run_tests_detailed, Category};
use cclab::sft::{sft_train, SftConfig};
use cclab::vocab::Vocab;
use ml0::CoverageTrace;

fn main() {
    let vocab = Vocab::standard();
    let corpus = load_corpus(std::path::Path::new("/tmp/tr3.jsonl")).unwrap();
    let mut params = PolicyParams::init(ModelConfig { vocab: vocab.len(), embed: 32, hidden: 64 }, 1);
    sft_train(&mut params, &corpus, &vocab, &SftConfig { epochs: 3, lr: 0.03, batch_size: 1, seed: 0 }, &AdamConfig::default());
    let ti: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let task = PreparedTask::new(&vocab, corpus[ti].clone());
    let cfg = PpoConfig { lam: 1.0, value_coef: 0.1, epochs_per_batch: 1, ..Default::default() };
    let mut adam = AdamState::new(&params);
    let state = init_state(task.cond_count());
    let prompt = build_prompt(&vocab, &task, &state);
    let prefix = &task.y_pieces[..prompt.code_prefix_pieces];
    for update in 0..120u64 {
        let mut rollouts = Vec::new();
        let mut passes = 0;
        for j in 0..16u64 {
            let traj = params.sample(&prompt.ids, &SampleConfig {
                temperature: 0.8, top_p: 0.9, max_new_tokens: 64, seed: update * 1000 + j }, vocab.eos);
            let comp = traj.completion().to_vec();
            let has_eos = comp.last() == Some(&vocab.eos);
            let code = if has_eos { &comp[..comp.len()-1] } else { &comp[..] };
            let mut full: Vec<u32> = prefix.to_vec();
            full.extend_from_slice(code);
            let text = vocab.decode_pieces(&full);
            let (report, program) = run_tests_detailed(&text, &task.instance.tests, 10_000);
            if report.category == Category::PassedAll { passes += 1; }
            let traces: Vec<CoverageTrace> = report.per_test.iter().map(|t| t.trace.clone()).collect();
            let fm = fgo_mask(&vocab, &full, program.as_ref(), &traces);
            let mut flags: Vec<bool> = fm.flags[prefix.len()..].to_vec();
            if has_eos { flags.push(true); }
            let (lp, vals) = params.logprobs_values(&traj.ids);
            let rlp = lp.clone();
            let p = traj.prompt_len;
            let n = traj.ids.len() - p;
            let mut r = Rollout {
                task_idx: 0, ids: traj.ids.clone(), prompt_len: p,
                logprobs_old: (0..n).map(|k| lp[p-1+k]).collect(),
                ref_logprobs: (0..n).map(|k| rlp[p-1+k]).collect(),
                values: (0..n).map(|k| vals[p-1+k]).collect(),
                mask: TokenMask { flags },
                terminal_reward: report.reward, category: report.category,
                advantages: vec![], returns: vec![],
            };
            prepare_rollout(&mut r, &cfg);
            rollouts.push(r);
        }
        if update % 15 == 0 { println!("update {update}: stage1 passes {passes}/16"); }
        ppo_update(&mut params, &mut adam, &AdamConfig::default(), &mut rollouts, &cfg, 1e-3, 3e-3, vocab.pad, update);
    }
}
