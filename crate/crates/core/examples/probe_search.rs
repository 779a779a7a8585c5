use tgsim::gaits::search::{search_robot_gaits, RewardKind, SearchOptions};
use tgsim::gaits::symmetry::rest_automorphism_perms;
use tgsim::robot::{default_model, ParamSet};

fn main() {
    let t0 = std::time::Instant::now();
    let model = default_model().unwrap();
    println!("model built in {:?}", t0.elapsed());
    let perms = rest_automorphism_perms(&model);
    println!("rest automorphisms: {}", perms.len());
    let params = ParamSet::nominal(&model.desc);
    let t1 = std::time::Instant::now();
    let outcome = search_robot_gaits(&model, params, RewardKind::Forward, SearchOptions::default()).unwrap();
    println!("search took {:?}; budget spent {} exhausted={} discarded={}",
        t1.elapsed(), outcome.budget_spent, outcome.budget_exhausted, outcome.discarded);
    println!("best gait: reward {:.4} m, states:", outcome.best.reward);
    for s in &outcome.best.states { println!("  {s}"); }
    let mut top: Vec<_> = outcome.scores.iter().collect();
    top.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("top 5 candidates:");
    for (seq, r) in top.iter().take(5) {
        let s: Vec<String> = seq.iter().map(|c| c.to_string()).collect();
        println!("  {:.4}  [{}]", r, s.join(" -> "));
    }
}
