// Acceptance gate: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any criterion fails. Pass criterion names as arguments to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "droute/evaluate.hpp"
#include "droute/gradcheck.hpp"
#include "droute/policy.hpp"
#include "droute/rng.hpp"
#include "droute/solvers.hpp"
#include "droute/trainer.hpp"
#include "droute/tsplib.hpp"

using namespace droute;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t pick(Rng& rng, std::size_t count) {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(count) - 1));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Sum, nonnegativity and monotone reweighting over 10^4 random sequences.
Outcome simplex() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20261016);
  std::size_t updates = 0;
  double worst_sum = 0.0;
  std::string violation;
  for (int seq = 0; seq < 10000 && violation.empty(); ++seq) {
    const std::size_t m = 2 + pick(rng, 7);
    GroupWeights q = GroupWeights::uniform(m);
    const double step = std::pow(10.0, rng.uniform(-3.0, 1.0));
    for (int k = 0; k < 50; ++k) {
      const std::size_t g = pick(rng, m);
      // Mostly tour-like losses, with occasional huge or negative ones to
      // exercise the overflow guard and both monotone directions.
      double loss = rng.uniform(0.0, 20.0);
      if (rng.uniform() < 0.05) loss = rng.uniform(-1e4, 1e4);
      const std::vector<double> before = q.q;
      eg_update(q, g, loss, step);
      ++updates;
      const double sum = std::accumulate(q.q.begin(), q.q.end(), 0.0);
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      if (std::abs(sum - 1.0) > 1e-12) violation = fmt("sum %.17g", sum);
      for (std::size_t j = 0; j < m; ++j) {
        if (!(q.q[j] >= 0.0)) violation = fmt("negative q_%zu", j);
      }
      // Rounding allowance of a few ulps on the renormalized values.
      const double ulp = 8 * std::numeric_limits<double>::epsilon();
      for (std::size_t j = 0; j < m; ++j) {
        const double slack = ulp * std::max(before[j], q.q[j]);
        const bool up = q.q[j] >= before[j] - slack;
        const bool down = q.q[j] <= before[j] + slack;
        const bool expect_up = (j == g) == (loss > 0.0);
        if (loss != 0.0 && !(expect_up ? up : down)) {
          violation = fmt("q_%zu moved the wrong way (g %zu, loss %.6g, step %.3g, %.17g -> %.17g, q_g %.17g -> %.17g)", j, g, loss, step, before[j], q.q[j], before[g], q.q[g]);
        }
      }
      if (!violation.empty()) break;
    }
  }
  const double secs = seconds_since(t0);
  if (!violation.empty()) return {false, violation};
  return {secs < 10.0, fmt("%zu updates, max |sum-1| %.2e, %.2f s (limit 10 s)", updates, worst_sum, secs)};
}

Outcome gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  std::string where;
  for (const auto problem : {ProblemType::tsp, ProblemType::cvrp}) {
    const PolicyConfig pc = PolicyConfig::desk(problem);
    if (pc.embed_dim != 32 || pc.layers != 2) return {false, "desk dims are not C=32, L=2"};
    const PolicyParams p = PolicyParams::init(pc, 2026);
    const Instance base = generate(DistributionSpec{}, 10, 2026);
    const AnyInstance inst = problem == ProblemType::tsp ? AnyInstance(base) : AnyInstance(attach_vrp(base, 20, 2026));
    const Tour tour = rollout(p, inst, {DecodeMode::sample, 1, 2026}).tours[0];
    auto fn = [&](const std::vector<nn::Tensor>& tensors, std::vector<nn::Tensor>& grads) {
      PolicyParams q = p;
      q.tensors() = tensors;
      LogProbGrad lg = logprob_and_grad(q, inst, tour);
      grads = std::move(lg.grads);
      return lg.logprob;
    };
    nn::GradCheckOptions opts;
    opts.samples = 200;
    opts.step = 1e-5;
    opts.seed = 2026;
    const auto r = nn::check_gradients(fn, p.tensors(), 1e-5, opts);
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = fmt("%s %s[%zu] analytic %.6g numeric %.6g", problem == ProblemType::tsp ? "tsp" : "cvrp",
                  p.names()[r.worst_tensor].c_str(), r.worst_index, r.worst_analytic, r.worst_numeric);
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-5 && secs < 120.0;
  return {pass, fmt("%zu coordinates, max rel error %.3g (limit 1e-5) at %s, %.1f s", checked, worst, where.c_str(), secs)};
}

Outcome reduction() {
  DistributionSpec spec;
  spec.kind = DistributionKind::cluster;
  const std::vector<GroupSpec> groups = {{spec, 40, 10, 31, {}}};
  const GroupedDataset ds = build_group_dataset(groups);
  TrainConfig cfg;
  cfg.outer_steps = 50;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  cfg.seed = 17;
  const PolicyParams init = PolicyParams::init(cfg.policy, 17);
  std::vector<TrainLogRow> dro_rows, erm_rows;
  TrainHooks dro_hooks, erm_hooks;
  dro_hooks.on_step = [&](const TrainLogRow& r) { dro_rows.push_back(r); };
  erm_hooks.on_step = [&](const TrainLogRow& r) { erm_rows.push_back(r); };
  cfg.mode = TrainMode::dro;
  const TrainState dro = train(cfg, ds, init, dro_hooks);
  const TrainState erm = erm_train(cfg, ds, init, erm_hooks);
  if (dro_rows.size() != 50 || erm_rows.size() != 50) return {false, "expected 50 logged steps per run"};
  for (std::size_t t = 0; t < 50; ++t) {
    const auto& a = dro_rows[t];
    const auto& b = erm_rows[t];
    if (a.group != b.group || a.q != b.q || a.batch_loss != b.batch_loss || a.grad_norm != b.grad_norm) {
      return {false, fmt("trajectories diverge at step %zu", t + 1)};
    }
  }
  const bool same = dro.params == erm.params && dro.momentum == erm.momentum && dro.q.q == erm.q.q;
  return {same, same ? "50 steps, per-step losses, gradient norms and final state bit-identical"
                     : "final states differ"};
}

double brute_force_tsp(const Instance& inst) {
  std::vector<int> rest(inst.size() - 1);
  std::iota(rest.begin(), rest.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = distance(inst.coords[0], inst.coords[static_cast<std::size_t>(rest.front())]);
    for (std::size_t i = 1; i < rest.size(); ++i) {
      len += distance(inst.coords[static_cast<std::size_t>(rest[i - 1])], inst.coords[static_cast<std::size_t>(rest[i])]);
    }
    len += distance(inst.coords[static_cast<std::size_t>(rest.back())], inst.coords[0]);
    best = std::min(best, len);
  } while (std::next_permutation(rest.begin(), rest.end()));
  return best;
}

Outcome oracle() {
  Rng rng(8080);
  // Held-Karp against enumeration.
  for (std::size_t n = 5; n <= 8; ++n) {
    for (int i = 0; i < 100; ++i) {
      DistributionSpec spec;
      spec.kind = kAllDistributionKinds[pick(rng, kAllDistributionKinds.size())];
      const Instance inst = generate(spec, n, rng.next_u64());
      const Tour hk = held_karp(inst);
      if (!is_feasible(inst, hk)) return {false, fmt("held_karp infeasible at n=%zu", n)};
      const double a = tour_length(inst, hk);
      const double b = brute_force_tsp(inst);
      if (std::abs(a - b) > 1e-12 * b) return {false, fmt("held_karp %.15g vs brute force %.15g at n=%zu", a, b, n)};
    }
  }
  // 2-opt never lengthens a tour, from random and nearest-neighbour starts.
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 5 + pick(rng, 60);
    DistributionSpec spec;
    spec.kind = kAllDistributionKinds[pick(rng, kAllDistributionKinds.size())];
    const Instance inst = generate(spec, n, rng.next_u64());
    Tour start{std::vector<int>(n)};
    std::iota(start.nodes.begin(), start.nodes.end(), 0);
    for (std::size_t k = n - 1; k > 0; --k) std::swap(start.nodes[k], start.nodes[pick(rng, k + 1)]);
    for (const Tour& t : {start, nearest_neighbor(inst, static_cast<int>(pick(rng, n)))}) {
      const Tour improved = two_opt(inst, t);
      if (!is_feasible(inst, improved)) return {false, "two_opt returned an infeasible tour"};
      if (tour_length(inst, improved) > tour_length(inst, t)) return {false, fmt("two_opt lengthened a tour at n=%zu", n)};
    }
  }
  // Rollouts and references on 10^3 TSP and 10^3 CVRP instances.
  const PolicyParams tsp_p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 5);
  const PolicyParams cvrp_p = PolicyParams::init(PolicyConfig::desk(ProblemType::cvrp), 5);
  std::size_t tours = 0;
  for (int i = 0; i < 2000; ++i) {
    const bool cvrp = i >= 1000;
    const std::size_t n = 5 + pick(rng, 21);
    DistributionSpec spec;
    spec.kind = kAllDistributionKinds[pick(rng, kAllDistributionKinds.size())];
    const Instance base = generate(spec, n, rng.next_u64());
    const AnyInstance inst = cvrp ? AnyInstance(attach_vrp(base, 10 + static_cast<int>(pick(rng, 40)), rng.next_u64()))
                                  : AnyInstance(base);
    const PolicyParams& p = cvrp ? cvrp_p : tsp_p;
    std::vector<Tour> candidates;
    for (const auto mode : {DecodeMode::greedy, DecodeMode::sample}) {
      const auto batch = rollout(p, inst, {mode, default_starts(n), rng.next_u64()});
      candidates.insert(candidates.end(), batch.tours.begin(), batch.tours.end());
    }
    candidates.push_back(reference_solution(inst).tour);
    for (const Tour& t : candidates) {
      ++tours;
      if (!is_feasible(inst, t)) return {false, fmt("infeasible %s tour at n=%zu", cvrp ? "cvrp" : "tsp", n)};
    }
  }
  return {true, fmt("held_karp = enumeration on 400 instances (n=5..8); 600 two_opt runs monotone; %zu tours feasible", tours)};
}

Outcome sampling() {
  const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 7);
  const AnyInstance inst = generate(DistributionSpec{}, 5, 7);
  constexpr int kRollouts = 10000;
  std::map<std::vector<int>, int> counts;
  for (int k = 0; k < kRollouts; ++k) {
    ++counts[rollout(p, inst, {DecodeMode::sample, 1, static_cast<std::uint64_t>(k)}).tours[0].nodes];
  }
  // All 24 tours with node 0 first.
  std::vector<int> rest = {1, 2, 3, 4};
  double total = 0.0, worst_z = 0.0;
  int outside = 0;
  do {
    Tour t{{0, rest[0], rest[1], rest[2], rest[3]}};
    const double prob = std::exp(logprob(p, inst, t));
    total += prob;
    const double expected = kRollouts * prob;
    const double sigma = std::sqrt(kRollouts * prob * (1 - prob));
    const double z = std::abs(counts[t.nodes] - expected) / sigma;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++outside;
    counts.erase(t.nodes);
  } while (std::next_permutation(rest.begin(), rest.end()));
  if (!counts.empty()) return {false, "sampled a tour that does not start at node 0"};
  const bool pass = outside == 0 && std::abs(total - 1.0) <= 1e-8;
  return {pass, fmt("24 tours, sum exp(logprob) = %.12f, max |z| = %.2f (limit 3), %d outside", total, worst_z, outside)};
}

// Scaled-down version of the DRO vs ERM comparison on one uniform-heavy split.
struct DeskSettings {
  std::size_t n = 20;
  std::size_t uniform_count = 2000;
  std::size_t cluster_count = 200;
  std::size_t outer_steps = 3000;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double group_lr = 0.01;
  bool normalize_group_loss = false;
  std::size_t test_count = 100;  // held-out instances per group
};

Outcome desk_experiment() {
  const DeskSettings s;
  const auto t0 = std::chrono::steady_clock::now();
  DistributionSpec uniform_spec, cluster_spec;
  cluster_spec.kind = DistributionKind::cluster;
  const std::vector<GroupSpec> train_specs = {{uniform_spec, s.uniform_count, s.n, 11, {}},
                                              {cluster_spec, s.cluster_count, s.n, 12, {}}};
  const std::vector<GroupSpec> test_specs = {{uniform_spec, s.test_count, s.n, 901, {}},
                                             {cluster_spec, s.test_count, s.n, 902, {}}};
  const GroupedDataset train_ds = build_group_dataset(train_specs);
  const GroupedDataset test_ds = build_group_dataset(test_specs);

  // two_opt(nearest_neighbor) reference, as prescribed for this comparison.
  class TwoOptPolicy final : public RoutePolicy {
   public:
    std::vector<Tour> solve(const AnyInstance& inst) const override {
      const Instance& tsp = std::get<Instance>(inst);
      return {two_opt(tsp, nearest_neighbor(tsp))};
    }
  };
  const Metrics reference = evaluate(TwoOptPolicy{}, test_ds, {1, false});
  auto group_gaps = [&](const Metrics& m) {
    std::vector<double> sum(test_ds.group_count(), 0.0);
    for (std::size_t i = 0; i < m.results.size(); ++i) {
      sum[m.results[i].group] += m.results[i].objective / reference.results[i].objective - 1.0;
    }
    for (double& v : sum) v /= static_cast<double>(s.test_count);
    return sum;  // [uniform, cluster]
  };

  int dro_wins = 0;
  double star_improvement = 0.0;
  std::string lines;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::vector<double> worst(2), star(2);
    for (int run = 0; run < 2; ++run) {
      TrainConfig cfg;
      cfg.outer_steps = s.outer_steps;
      cfg.batch_size = s.batch_size;
      cfg.lr = s.lr;
      cfg.group_lr = s.group_lr;
      cfg.normalize_group_loss = s.normalize_group_loss;
      cfg.seed = seed;
      const PolicyParams init = PolicyParams::init(cfg.policy, 100 + seed);
      const TrainState st = run == 0 ? train(cfg, train_ds, init) : erm_train(cfg, train_ds, init);
      const std::vector<double> gaps = group_gaps(evaluate(NeuralPolicy(st.params), test_ds, {1, false}));
      worst[run] = *std::max_element(gaps.begin(), gaps.end());
      star[run] = gaps[1];
      lines += fmt("\n    seed %llu %s: uniform gap %.3f%%, cluster gap %.3f%%, worst %.3f%%",
                   static_cast<unsigned long long>(seed), run == 0 ? "DRO" : "ERM", 100 * gaps[0], 100 * gaps[1],
                   100 * worst[run]);
    }
    dro_wins += worst[0] <= worst[1];
    star_improvement += (star[1] - star[0]) / 3.0;
  }
  const bool pass = dro_wins >= 2 && star_improvement >= 0.0;
  return {pass, fmt("DRO worst-group gap <= ERM in %d/3 seed pairs (need 2), mean Gap* improvement %.3f pp (need >= 0), "
                    "%.0f s",
                    dro_wins, 100 * star_improvement, seconds_since(t0)) +
                    lines};
}

Outcome benchmark_ingestion() {
  const fs::path dir = fs::path(DROUTE_DATA_DIR) / "tsplib";
  const BenchmarkInstance eil51 = read_tsplib(dir / "eil51.tsp");
  const BenchmarkInstance berlin52 = read_tsplib(dir / "berlin52.tsp");
  if (eil51.dimension() != 51 || berlin52.dimension() != 52) return {false, "unexpected dimensions"};

  // Integer tour length against a hand-rolled nint(Euclidean) sum.
  auto by_hand = [](const BenchmarkInstance& b, const std::vector<std::size_t>& order) {
    long total = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Point& p = b.coords[order[i]];
      const Point& q = b.coords[order[(i + 1) % order.size()]];
      total += static_cast<long>(std::floor(std::hypot(p.x - q.x, p.y - q.y) + 0.5));
    }
    return total;
  };
  Rng rng(51);
  for (const BenchmarkInstance* b : {&eil51, &berlin52}) {
    for (int k = 0; k < 20; ++k) {
      std::vector<std::size_t> order(b->dimension());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[pick(rng, i + 1)]);
      if (benchmark_length(*b, order) != by_hand(*b, order)) return {false, "random tour length mismatch on " + b->name};
    }
  }
  const long eil_opt = benchmark_length(eil51, read_tour_file(dir / "eil51.opt.tour"));
  const long berlin_opt = benchmark_length(berlin52, read_tour_file(dir / "berlin52.opt.tour"));
  if (eil_opt != 426 || berlin_opt != 7542) return {false, fmt("optimal tours score %ld and %ld", eil_opt, berlin_opt)};

  // Every model tour on eil51 is at least the optimum.
  const ScaledInstance scaled = to_model_input(eil51);
  long model_best = std::numeric_limits<long>::max();
  std::size_t model_tours = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), seed);
    std::vector<Tour> tours = NeuralPolicy(p).solve(scaled.instance);
    const auto sampled = rollout(p, scaled.instance, {DecodeMode::sample, 16, seed});
    tours.insert(tours.end(), sampled.tours.begin(), sampled.tours.end());
    for (const Tour& t : tours) {
      model_best = std::min(model_best, benchmark_length(eil51, scaled, t));
      ++model_tours;
    }
  }
  if (model_best < 426) return {false, fmt("model tour of length %ld beats the optimum", model_best)};

  const Instance& tsp = std::get<Instance>(scaled.instance);
  const long heuristic = benchmark_length(eil51, scaled, two_opt(tsp, nearest_neighbor(tsp)));
  const bool pass = heuristic <= 426 * 1.08;
  return {pass, fmt("eil51/berlin52 parsed; 40 random tours and both optimal tours (426, 7542) scored exactly; "
                    "best of %zu model tours %ld >= 426; two_opt(nearest_neighbor) %ld (limit 460.08)",
                    model_tours, model_best, heuristic)};
}

Outcome resume() {
  DistributionSpec cluster;
  cluster.kind = DistributionKind::cluster;
  const std::vector<GroupSpec> groups = {{DistributionSpec{}, 30, 10, 41, {}}, {cluster, 10, 10, 42, {}}};
  const GroupedDataset ds = build_group_dataset(groups);
  TrainConfig cfg;
  cfg.outer_steps = 30;
  cfg.batch_size = 4;
  cfg.inner_steps = 2;
  cfg.lr = 1e-3;
  cfg.seed = 99;
  const PolicyParams init = PolicyParams::init(cfg.policy, 99);
  std::vector<TrainLogRow> full_rows, split_rows;
  TrainHooks full_hooks;
  full_hooks.on_step = [&](const TrainLogRow& r) { full_rows.push_back(r); };
  const TrainState full = train(cfg, ds, init, full_hooks);

  const fs::path path = fs::temp_directory_path() / "droute_acceptance_resume.ckpt";
  TrainHooks first;
  first.stop_after = 13;
  first.on_step = [&](const TrainLogRow& r) { split_rows.push_back(r); };
  save_train_state(path, train(cfg, ds, init, first));
  TrainHooks second;
  second.on_step = [&](const TrainLogRow& r) { split_rows.push_back(r); };
  const TrainState resumed = resume_training(load_train_state(path), cfg, ds, second);
  fs::remove(path);

  bool rows_equal = full_rows.size() == split_rows.size();
  for (std::size_t i = 0; rows_equal && i < full_rows.size(); ++i) {
    rows_equal = full_rows[i].group == split_rows[i].group && full_rows[i].q == split_rows[i].q &&
                 full_rows[i].batch_loss == split_rows[i].batch_loss && full_rows[i].grad_norm == split_rows[i].grad_norm;
  }
  bool history_equal = full.history.size() == resumed.history.size();
  for (std::size_t i = 0; history_equal && i < full.history.size(); ++i) {
    history_equal = full.history[i].group == resumed.history[i].group && full.history[i].loss == resumed.history[i].loss;
  }
  const bool state_equal = full.params == resumed.params && full.momentum == resumed.momentum &&
                           full.q.q == resumed.q.q && full.outer_step == resumed.outer_step &&
                           full.inner_step == resumed.inner_step;
  const bool pass = rows_equal && history_equal && state_equal;
  return {pass, fmt("stop at 13 of 30, reload from disk: log rows %s, history %s, final state %s",
                    rows_equal ? "equal" : "DIFFER", history_equal ? "equal" : "DIFFER", state_equal ? "equal" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"simplex", simplex},       {"gradient", gradient},
      {"reduction", reduction},   {"oracle", oracle},
      {"sampling", sampling},     {"desk_experiment", desk_experiment},
      {"benchmark_ingestion", benchmark_ingestion}, {"resume", resume},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
