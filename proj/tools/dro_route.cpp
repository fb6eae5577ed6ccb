// dro-route: generate datasets, train, evaluate and run reference solvers.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "droute/checkpoint.hpp"
#include "droute/dataset_io.hpp"
#include "droute/error.hpp"
#include "droute/evaluate.hpp"
#include "droute/report.hpp"
#include "droute/solvers.hpp"
#include "droute/trainer.hpp"
#include "droute/tsplib.hpp"

namespace fs = std::filesystem;
using namespace droute;

namespace {

// DROROUTE_SEED overrides every seed given on the command line or in a config.
std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("DROROUTE_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("DROROUTE_SEED is not an integer: ") + s);
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<DistributionKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<DistributionKind> kinds;
  for (const auto& n : names) {
    if (n == "all") {
      kinds.assign(kAllDistributionKinds.begin(), kAllDistributionKinds.end());
      continue;
    }
    try {
      kinds.push_back(parse_distribution_kind(n));
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  return kinds;
}

struct GenArgs {
  std::vector<std::string> dists{"uniform"};
  std::string problem = "tsp";
  std::size_t n = 20;
  std::size_t count = 100;
  std::uint64_t seed = 1;
  int capacity = 0;
  std::string out = "data/generated";
};

int run_gen(const GenArgs& a) {
  const std::uint64_t seed = env_seed().value_or(a.seed);
  const auto kinds = parse_kinds(a.dists);
  fs::create_directories(a.out);
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    GroupSpec spec;
    spec.dist.kind = kinds[k];
    spec.count = a.count;
    spec.n = a.n;
    spec.seed = mix_seed(seed, k);
    if (a.problem == "cvrp") spec.capacity = a.capacity > 0 ? a.capacity : default_capacity(a.n);
    else if (a.problem != "tsp") throw ConfigError("problem must be tsp or cvrp");
    const auto path = save_group_file(a.out, spec, generate_group(spec));
    std::cout << path.string() << "\n";
  }
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out = "run";
  std::string resume;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<std::size_t> threads;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (a.steps) cfg.outer_steps = *a.steps;
  if (a.seed) cfg.seed = *a.seed;
  if (!a.mode.empty()) cfg.mode = parse_train_mode(a.mode);
  if (a.threads) cfg.threads = *a.threads;
  if (auto s = env_seed()) cfg.seed = *s;

  const GroupedDataset data = load_dataset_dir(a.data);
  cfg.policy.problem = problem_type(data.groups.front().instances.front());
  cfg.validate();

  fs::create_directories(a.out);
  const fs::path ckpt = fs::path(a.out) / "model.ckpt";
  {
    std::ofstream c(fs::path(a.out) / "config.txt");
    write_train_config(c, cfg);
  }
  const fs::path log_path = fs::path(a.out) / "train_log.csv";
  std::ofstream log(log_path, a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw Error("cannot write " + log_path.string());
  if (a.resume.empty()) log << train_log_header(data.group_count()) << "\n";
  TrainHooks hooks;
  hooks.checkpoint_path = ckpt;
  hooks.on_step = [&](const TrainLogRow& row) { log << train_log_line(row) << "\n"; };

  TrainState state;
  if (!a.resume.empty()) {
    state = load_train_state(a.resume);
    state = resume_training(std::move(state), cfg, data, hooks);
  } else {
    state = train(cfg, data, PolicyParams::init(cfg.policy, cfg.seed), hooks);
  }
  save_train_state(ckpt, state);
  std::cerr << "trained " << state.outer_step << " outer steps; q =";
  for (const double v : state.q.q) std::cerr << " " << v;
  std::cerr << "\nsaved " << ckpt.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string format = "csv";
  std::string out;
  std::size_t threads = 1;
  std::size_t starts = 0;
  bool no_augment = false;
  bool no_reference = false;
};

std::unique_ptr<RoutePolicy> make_policy(const std::string& checkpoint, std::size_t starts, bool augment) {
  if (checkpoint.empty()) return std::make_unique<ReferencePolicy>();
  return std::make_unique<NeuralPolicy>(load_policy(checkpoint), starts, augment);
}

void print_metrics_note(const Metrics& m) { std::cerr << "gaps measured against: " << m.reference << "\n"; }

int run_eval(const EvalArgs& a) {
  const auto format = parse_report_format(a.format);
  const GroupedDataset data = load_dataset_dir(a.data);
  const auto policy = make_policy(a.checkpoint, a.starts, !a.no_augment);
  const Metrics m = evaluate(*policy, data, {a.threads, !a.no_reference});
  print_metrics_note(m);
  write_text(a.out, emit_report(m, format));
  return 0;
}

struct SolveArgs {
  std::string input;
  std::string algo = "auto";
  std::string checkpoint;
  std::size_t index = 0;
};

// One fixed solver, for `solve --algo`.
class AlgoPolicy final : public RoutePolicy {
 public:
  explicit AlgoPolicy(std::string algo) : algo_(std::move(algo)) {}
  std::vector<Tour> solve(const AnyInstance& inst) const override {
    if (algo_ == "auto") return {reference_solution(inst).tour};
    if (algo_ == "cvrpref") {
      const auto* c = std::get_if<CvrpInstance>(&inst);
      if (c == nullptr) throw ConfigError("cvrpref needs a CVRP instance");
      return {cvrp_reference(*c)};
    }
    const auto* t = std::get_if<Instance>(&inst);
    if (t == nullptr) throw ConfigError(algo_ + " needs a TSP instance");
    if (algo_ == "hk") return {held_karp(*t)};
    return {two_opt(*t, nearest_neighbor(*t))};
  }

 private:
  std::string algo_;
};

int run_solve(const SolveArgs& a) {
  std::unique_ptr<RoutePolicy> policy;
  if (a.algo == "neural") {
    if (a.checkpoint.empty()) throw ConfigError("--algo neural needs --checkpoint");
    policy = make_policy(a.checkpoint, 0, true);
  } else {
    policy = std::make_unique<AlgoPolicy>(a.algo);
  }
  const std::string ext = fs::path(a.input).extension().string();
  if (ext == ".tsp" || ext == ".vrp") {
    const BenchmarkInstance b = read_tsplib(a.input);
    const ScaledInstance s = to_model_input(b);
    long best = -1;
    Tour best_tour;
    for (const auto& t : policy->solve(s.instance)) {
      const long len = benchmark_length(b, s, t);
      if (best < 0 || len < best) {
        best = len;
        best_tour = t;
      }
    }
    std::cout << b.name << " length " << best << "\ntour";
    for (const int v : best_tour.nodes) {
      const std::size_t file_node = b.problem == ProblemType::tsp ? static_cast<std::size_t>(v)
                                    : v == 0                      ? b.depot
                                                                  : s.customers[static_cast<std::size_t>(v - 1)];
      std::cout << " " << file_node + 1;
    }
    std::cout << "\n";
    return 0;
  }
  std::ifstream in(a.input);
  if (!in) throw ParseError("cannot open " + a.input);
  const auto records = read_records(in);
  if (a.index >= records.size()) throw ConfigError("--index is past the end of the file");
  const AnyInstance& inst = records[a.index];
  double best = -1.0;
  Tour best_tour;
  for (const auto& t : policy->solve(inst)) {
    const double len = tour_length(inst, t);
    if (best < 0 || len < best) {
      best = len;
      best_tour = t;
    }
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", best);
  std::cout << "length " << buf << "\ntour";
  for (const int v : best_tour.nodes) std::cout << " " << v;
  std::cout << "\n";
  return 0;
}

struct BenchArgs {
  std::vector<std::string> files;
  std::string checkpoint;
  std::string best_known;
  std::string format = "markdown";
  std::string out;
  std::size_t threads = 1;
};

int run_bench(const BenchArgs& a) {
  const auto format = parse_report_format(a.format);
  std::map<std::string, double> known;
  if (!a.best_known.empty()) known = read_best_known(a.best_known);
  std::vector<BenchmarkInstance> benches;
  for (const auto& f : a.files) {
    if (fs::is_directory(f)) {
      std::vector<fs::path> paths;
      for (const auto& e : fs::directory_iterator(f)) {
        const auto ext = e.path().extension();
        if (ext == ".tsp" || ext == ".vrp") paths.push_back(e.path());
      }
      std::sort(paths.begin(), paths.end());
      for (const auto& p : paths) benches.push_back(read_tsplib(p));
    } else {
      benches.push_back(read_tsplib(f));
    }
  }
  if (benches.empty()) throw ConfigError("no benchmark instances given");
  for (auto& b : benches) {
    if (auto it = known.find(b.name); it != known.end()) b.best_known = it->second;
  }
  const auto policy = make_policy(a.checkpoint, 0, true);
  const Metrics m = evaluate_benchmarks(*policy, benches, {a.threads, true});
  print_metrics_note(m);
  write_text(a.out, emit_report(m, format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-robust neural routing for TSP and CVRP"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate grouped instance files");
  g->add_option("--kind,--dist", gen.dists,
                 "Distributions, comma separated (uniform, explosion, implosion, expansion, cluster, grid, all)")
      ->delimiter(',');
  g->add_option("--problem", gen.problem, "tsp or cvrp")->check(CLI::IsMember({"tsp", "cvrp"}));
  g->add_option("-n,--n", gen.n, "Customers per instance");
  g->add_option("--count", gen.count, "Instances per group");
  g->add_option("--seed", gen.seed, "Base seed");
  g->add_option("--capacity", gen.capacity, "Vehicle capacity (CVRP; default by size)");
  g->add_option("-o,--out", gen.out, "Output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a policy on a grouped dataset");
  t->add_option("-c,--config", tr.config, "key = value config file");
  t->add_option("-d,--data", tr.data, "Dataset directory")->required();
  t->add_option("-o,--out", tr.out, "Output directory (model.ckpt, train_log.csv, config.txt)");
  t->add_option("--resume", tr.resume, "Continue from a training checkpoint");
  t->add_option("--steps", tr.steps, "Outer steps");
  t->add_option("--seed", tr.seed, "Seed");
  t->add_option("--mode", tr.mode, "dro, erm or supervised");
  t->add_option("--threads", tr.threads, "Worker threads");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate on a grouped dataset");
  e->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint (omit to evaluate the reference solver)");
  e->add_option("-d,--data", ev.data, "Dataset directory")->required();
  e->add_option("--format", ev.format, "csv or markdown");
  e->add_option("-o,--out", ev.out, "Report path (default stdout)");
  e->add_option("--threads", ev.threads, "Worker threads");
  e->add_option("--starts", ev.starts, "Greedy starts per instance (0 = min(n, 8))");
  e->add_flag("--no-augment", ev.no_augment, "Skip the x8 symmetry augmentation");
  e->add_flag("--no-reference", ev.no_reference, "Skip reference solves and gaps");

  SolveArgs so;
  auto* s = app.add_subcommand("solve", "Solve one instance");
  s->add_option("--in,input", so.input, "TSPLIB/CVRPLIB file or dataset file")->required();
  s->add_option("--algo", so.algo, "auto, hk, nn2opt, cvrpref or neural")
      ->check(CLI::IsMember({"auto", "hk", "nn2opt", "cvrpref", "neural"}));
  s->add_option("--checkpoint", so.checkpoint, "Policy checkpoint for --algo neural");
  s->add_option("--index", so.index, "Record index within a dataset file");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Evaluate on TSPLIB/CVRPLIB files");
  b->add_option("files", be.files, "Files or directories")->required();
  b->add_option("--checkpoint", be.checkpoint, "Policy checkpoint (omit for the reference solver)");
  b->add_option("--best-known", be.best_known, "Best-known value table");
  b->add_option("--format", be.format, "csv or markdown");
  b->add_option("-o,--out", be.out, "Report path (default stdout)");
  b->add_option("--threads", be.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 3;  // bad invocation counts as a configuration error
  }

  try {
    if (*g) return run_gen(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*s) return run_solve(so);
    if (*b) return run_bench(be);
  } catch (const std::exception& ex) {
    std::cerr << "dro-route: " << ex.what() << "\n";
    return exit_code(ex);
  }
  return 0;
}
