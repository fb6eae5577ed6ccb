#include "droute/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <set>

#include "droute/error.hpp"
#include "parallel.hpp"

namespace droute {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string_view reference_name(ReferenceKind kind) {
  return kind == ReferenceKind::exact ? "exact" : "heuristic";
}

// Shortest candidate under `score`; ties keep the earlier candidate.
template <class Score>
std::pair<Tour, double> best_candidate(const std::vector<Tour>& tours, Score score) {
  if (tours.empty()) throw ContractError("policy returned no tour");
  std::size_t best = 0;
  double best_len = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tours.size(); ++i) {
    const double len = score(tours[i]);
    if (len < best_len) {
      best_len = len;
      best = i;
    }
  }
  return {tours[best], best_len};
}

void aggregate(Metrics& m) {
  std::vector<double> obj_sum(m.groups.size(), 0.0), gap_sum(m.groups.size(), 0.0);
  std::vector<std::size_t> gap_n(m.groups.size(), 0);
  for (const auto& r : m.results) {
    auto& g = m.groups[r.group];
    ++g.count;
    obj_sum[r.group] += r.objective;
    g.time_s += r.seconds;
    if (r.gap) {
      gap_sum[r.group] += *r.gap;
      ++gap_n[r.group];
    }
  }
  double total_obj = 0.0, total_gap = 0.0, star_obj = 0.0, star_gap = 0.0;
  std::size_t total_n = 0, star_n = 0;
  bool all_gaps = true;
  for (std::size_t i = 0; i < m.groups.size(); ++i) {
    auto& g = m.groups[i];
    if (g.count == 0) continue;
    g.mean_obj = obj_sum[i] / static_cast<double>(g.count);
    if (gap_n[i] == g.count) g.mean_gap = gap_sum[i] / static_cast<double>(g.count);
    else all_gaps = false;
    // Overall values are count-weighted means of the group means.
    const auto w = static_cast<double>(g.count);
    total_obj += w * g.mean_obj;
    total_n += g.count;
    if (g.mean_gap) total_gap += w * *g.mean_gap;
    if (g.atypical) {
      star_obj += w * g.mean_obj;
      if (g.mean_gap) star_gap += w * *g.mean_gap;
      star_n += g.count;
    }
    if (g.mean_gap && (!m.worst_group_gap || *g.mean_gap > *m.worst_group_gap)) m.worst_group_gap = g.mean_gap;
    m.time_s += g.time_s;
  }
  if (total_n > 0) m.mean_obj = total_obj / static_cast<double>(total_n);
  if (all_gaps && total_n > 0) m.mean_gap = total_gap / static_cast<double>(total_n);
  else m.worst_group_gap.reset();
  if (star_n > 0) {
    m.obj_star = star_obj / static_cast<double>(star_n);
    if (all_gaps) m.gap_star = star_gap / static_cast<double>(star_n);
  }
}

std::string combine_labels(const std::set<std::string>& labels) {
  if (labels.empty()) return "none";
  if (labels.size() == 1) return *labels.begin();
  return "mixed";
}

}  // namespace

NeuralPolicy::NeuralPolicy(PolicyParams params, std::size_t starts, bool augment)
    : params_(std::move(params)), starts_(starts), augment_(augment) {}

std::vector<Tour> NeuralPolicy::solve(const AnyInstance& inst) const {
  const std::size_t n = customer_count(inst);
  const RolloutOptions opts{DecodeMode::greedy, starts_ ? std::min(starts_, n) : default_starts(n), 0};
  std::vector<Tour> out;
  // The symmetries keep node ids, so every image's tour is a tour of inst.
  for (int k = 0; k < (augment_ ? 8 : 1); ++k) {
    RolloutBatch b = rollout(params_, k == 0 ? inst : augment(inst, k), opts);
    for (auto& t : b.tours) out.push_back(std::move(t));
  }
  return out;
}

std::vector<Tour> ReferencePolicy::solve(const AnyInstance& inst) const { return {reference_solution(inst).tour}; }

Metrics evaluate(const RoutePolicy& policy, const GroupedDataset& dataset, const EvalOptions& options) {
  dataset.validate();
  Metrics m;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    const auto& grp = dataset.groups[g];
    std::string label(to_string(grp.kind));
    for (const auto& other : m.groups) {
      if (other.label == label) label += "_" + std::to_string(grp.group_id);
    }
    GroupMetrics gm;
    gm.label = label;
    gm.atypical = grp.kind != DistributionKind::uniform;
    m.groups.push_back(gm);
    for (std::size_t i = 0; i < grp.instances.size(); ++i) jobs.emplace_back(g, i);
  }
  m.results.resize(jobs.size());
  std::vector<std::string> ref_kind(jobs.size());
  detail::parallel_for(jobs.size(), options.threads, [&](std::size_t j) {
    const auto [g, i] = jobs[j];
    const AnyInstance& inst = dataset.groups[g].instances[i];
    InstanceResult& r = m.results[j];
    r.group = g;
    r.index = i;
    const auto t0 = Clock::now();
    const auto tours = policy.solve(inst);
    std::tie(r.tour, r.objective) = best_candidate(tours, [&](const Tour& t) { return tour_length(inst, t); });
    r.seconds = seconds_since(t0);
    if (options.with_reference) {
      const Reference ref = reference_solution(inst);
      r.reference = ref.length;
      r.gap = make_gap(r.objective, ref.length).gap;
      ref_kind[j] = reference_name(ref.kind);
    }
  });
  aggregate(m);
  std::set<std::string> labels;
  for (const auto& k : ref_kind)
    if (!k.empty()) labels.insert(k);
  m.reference = combine_labels(labels);
  return m;
}

Metrics evaluate_benchmarks(const RoutePolicy& policy, std::span<const BenchmarkInstance> benches,
                            const EvalOptions& options) {
  Metrics m;
  for (const auto& b : benches) {
    GroupMetrics gm;
    gm.label = b.name;
    m.groups.push_back(gm);
  }
  m.results.resize(benches.size());
  std::vector<std::string> ref_kind(benches.size());
  detail::parallel_for(benches.size(), options.threads, [&](std::size_t j) {
    const BenchmarkInstance& b = benches[j];
    const ScaledInstance scaled = to_model_input(b);
    InstanceResult& r = m.results[j];
    r.group = j;
    const auto t0 = Clock::now();
    const auto tours = policy.solve(scaled.instance);
    std::tie(r.tour, r.objective) = best_candidate(
        tours, [&](const Tour& t) { return static_cast<double>(benchmark_length(b, scaled, t)); });
    r.seconds = seconds_since(t0);
    if (!options.with_reference) return;
    if (b.best_known) {
      r.reference = *b.best_known;
      ref_kind[j] = "best-known";
    } else {
      const Reference ref = reference_solution(scaled.instance);
      r.reference = static_cast<double>(benchmark_length(b, scaled, ref.tour));
      ref_kind[j] = reference_name(ref.kind);
    }
    r.gap = make_gap(r.objective, *r.reference).gap;
  });
  aggregate(m);
  std::set<std::string> labels;
  for (const auto& k : ref_kind)
    if (!k.empty()) labels.insert(k);
  m.reference = combine_labels(labels);
  return m;
}

}  // namespace droute
