#include "droute/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "droute/error.hpp"
#include "droute/rng.hpp"
#include "droute/solvers.hpp"
#include "parallel.hpp"

namespace droute {

using nn::Tensor;

GroupWeights GroupWeights::uniform(std::size_t m) {
  if (m == 0) throw ContractError("group weights need at least one group");
  return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

GroupWeights GroupWeights::proportional(const GroupedDataset& dataset) {
  GroupWeights w;
  const auto total = static_cast<double>(dataset.total_size());
  for (const auto& g : dataset.groups) w.q.push_back(static_cast<double>(g.instances.size()) / total);
  return w;
}

void GroupWeights::validate() const {
  double s = 0.0;
  for (const double v : q) {
    if (!(v >= 0.0)) throw ContractError("group weight is negative or NaN");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ContractError("group weights do not sum to 1");
}

std::string_view to_string(TrainMode mode) noexcept {
  switch (mode) {
    case TrainMode::dro: return "dro";
    case TrainMode::erm: return "erm";
    case TrainMode::supervised: return "supervised";
  }
  return "dro";
}

TrainMode parse_train_mode(std::string_view text) {
  if (text == "dro") return TrainMode::dro;
  if (text == "erm") return TrainMode::erm;
  if (text == "supervised") return TrainMode::supervised;
  throw ConfigError("unknown training mode: " + std::string(text));
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(group_lr > 0.0)) throw ConfigError("group_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (outer_steps < 1 || inner_steps < 1) throw ConfigError("outer_steps and inner_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  try {
    policy.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

TrainState TrainState::fresh(const PolicyParams& params, const GroupedDataset& dataset, const TrainConfig& cfg) {
  dataset.validate();
  TrainState s;
  s.params = params;
  s.q = cfg.mode == TrainMode::erm ? GroupWeights::proportional(dataset)
                                   : GroupWeights::uniform(dataset.group_count());
  s.momentum = zeros_like(params.tensors());
  s.seed = cfg.seed;
  s.group_loss_sum.assign(dataset.group_count(), 0.0);
  s.group_loss_count.assign(dataset.group_count(), 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// State (de)serialization

std::vector<NamedTensor> train_state_entries(const TrainState& state) {
  auto entries = policy_entries(state.params);
  entries.push_back({"train.q", Tensor::vector(state.q.q)});
  for (std::size_t i = 0; i < state.momentum.size(); ++i) {
    entries.push_back({"train.momentum." + state.params.names()[i], state.momentum[i]});
  }
  // Seed split into 32-bit halves so it survives the f64 payload exactly.
  entries.push_back({"train.counters", Tensor::vector({static_cast<double>(state.outer_step),
                                                       static_cast<double>(state.inner_step),
                                                       static_cast<double>(state.seed >> 32),
                                                       static_cast<double>(state.seed & 0xffffffffULL)})});
  Tensor hist({state.history.size(), 3});
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    hist.at(i, 0) = static_cast<double>(state.history[i].step);
    hist.at(i, 1) = static_cast<double>(state.history[i].group);
    hist.at(i, 2) = state.history[i].loss;
  }
  entries.push_back({"train.history", std::move(hist)});
  entries.push_back({"train.group_loss_sum", Tensor::vector(state.group_loss_sum)});
  entries.push_back({"train.group_loss_count", Tensor::vector(state.group_loss_count)});
  return entries;
}

TrainState train_state_from_entries(const std::vector<NamedTensor>& entries) {
  auto need = [&entries](std::string_view name) -> const Tensor& {
    const NamedTensor* e = find_entry(entries, name);
    if (e == nullptr) throw ParseError("checkpoint is missing " + std::string(name));
    return e->value;
  };
  TrainState s;
  s.params = policy_from_entries(entries);
  const Tensor& q = need("train.q");
  s.q.q.assign(q.data().begin(), q.data().end());
  for (std::size_t i = 0; i < s.params.tensors().size(); ++i) {
    const Tensor& m = need("train.momentum." + s.params.names()[i]);
    if (m.shape() != s.params.tensors()[i].shape()) throw ShapeError("momentum shape mismatch");
    s.momentum.push_back(m);
  }
  const Tensor& c = need("train.counters");
  if (c.size() != 4) throw ShapeError("train.counters must hold 4 values");
  s.outer_step = static_cast<std::size_t>(c[0]);
  s.inner_step = static_cast<std::size_t>(c[1]);
  s.seed = (static_cast<std::uint64_t>(c[2]) << 32) | static_cast<std::uint64_t>(c[3]);
  const Tensor& h = need("train.history");
  const std::size_t rows = h.rank() == 2 ? h.dim(0) : 0;
  for (std::size_t i = 0; i < rows; ++i) {
    s.history.push_back({static_cast<std::size_t>(h.at(i, 0)), static_cast<std::size_t>(h.at(i, 1)), h.at(i, 2)});
  }
  const Tensor& ls = need("train.group_loss_sum");
  const Tensor& lc = need("train.group_loss_count");
  s.group_loss_sum.assign(ls.data().begin(), ls.data().end());
  s.group_loss_count.assign(lc.data().begin(), lc.data().end());
  if (s.history.size() != s.outer_step) throw ParseError("history length disagrees with the step counter");
  return s;
}

void save_train_state(const std::filesystem::path& path, const TrainState& state) {
  save_checkpoint(path, train_state_entries(state));
}

TrainState load_train_state(const std::filesystem::path& path) {
  return train_state_from_entries(load_checkpoint(path));
}

// ---------------------------------------------------------------------------
// Losses and updates

double shared_baseline(const RolloutBatch& batch) {
  if (batch.size() == 0) throw ContractError("baseline of an empty batch");
  return std::accumulate(batch.lengths.begin(), batch.lengths.end(), 0.0) / static_cast<double>(batch.size());
}

ReinforceLoss reinforce_loss(const RolloutBatch& batch, double baseline) {
  if (batch.size() == 0) throw ContractError("reinforce loss of an empty batch");
  if (!std::isfinite(baseline)) throw ContractError("baseline must be finite");
  ReinforceLoss out;
  out.advantages.reserve(batch.size());
  double adv_sum = 0.0, len_sum = 0.0;
  for (const double l : batch.lengths) {
    out.advantages.push_back(l - baseline);
    adv_sum += l - baseline;
    len_sum += l;
  }
  const auto r = static_cast<double>(batch.size());
  out.loss = adv_sum / r;
  out.mean_length = len_sum / r;
  return out;
}

InstanceGradient reinforce_gradient(const PolicyParams& params, const AnyInstance& inst, std::size_t starts,
                                    std::uint64_t seed, bool use_baseline) {
  InstanceGradient out;
  RolloutOptions opts{DecodeMode::sample, starts, seed};
  rollout_with_gradient(
      params, inst, opts,
      [&out, use_baseline](const RolloutBatch& batch) {
        const ReinforceLoss rl = reinforce_loss(batch, use_baseline ? shared_baseline(batch) : 0.0);
        out.loss = rl.mean_length;
        std::vector<double> w = rl.advantages;
        for (auto& v : w) v /= static_cast<double>(batch.size());
        return w;
      },
      out.grad);
  return out;
}

InstanceGradient supervised_step(const PolicyParams& params, const AnyInstance& inst, const Tour& oracle) {
  LogProbGrad lg = logprob_and_grad(params, inst, oracle);
  InstanceGradient out;
  out.loss = -lg.logprob;
  out.grad = std::move(lg.grads);
  for (auto& g : out.grad) g *= -1.0;
  return out;
}

void sgd_step(TrainState& state, const std::vector<Tensor>& grad, double group_weight, const TrainConfig& cfg) {
  auto& params = state.params.tensors();
  if (grad.size() != params.size() || state.momentum.size() != params.size()) {
    throw ShapeError("sgd_step: gradient layout does not match parameters");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    nn::require_same_shape(grad[i], params[i], "sgd_step");
    if (!grad[i].all_finite()) {
      throw NumericalAbort("non-finite gradient in " + state.params.names()[i] + " at outer step " +
                           std::to_string(state.outer_step + 1));
    }
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    Tensor& theta = params[i];
    Tensor& v = state.momentum[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      v[k] = cfg.momentum * v[k] + group_weight * (grad[i][k] + cfg.weight_decay * theta[k]);
      theta[k] -= cfg.lr * v[k];
    }
  }
}

void eg_update(GroupWeights& q, std::size_t group, double loss, double step) {
  if (group >= q.size()) throw ContractError("eg_update: group index out of range");
  if (!std::isfinite(loss)) throw NumericalAbort("eg_update: non-finite group loss");
  const double a = step * loss;
  double rest = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i != group) rest += q.q[i];
  }
  // A vertex of the simplex is a fixed point.
  if (rest == 0.0 || q.q[group] == 0.0) return;
  // Each renormalized entry as one ratio. exp(+-a) may overflow to infinity
  // or underflow to zero; either limit still yields the exact answer, and no
  // rescaled entry passes through subnormal range.
  const double qg = q.q[group];
  const double others_denom = qg * std::exp(a) + rest;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (i != group) q.q[i] /= others_denom;
  }
  q.q[group] = qg / (qg + rest * std::exp(-a));
}

std::string train_log_header(std::size_t groups) {
  std::string h = "t,g";
  for (std::size_t i = 0; i < groups; ++i) h += ",q_" + std::to_string(i);
  return h + ",batch_loss,grad_norm,wallclock";
}

std::string train_log_line(const TrainLogRow& row) {
  std::string s = std::to_string(row.step) + "," + std::to_string(row.group);
  char buf[64];
  for (const double v : row.q) {
    std::snprintf(buf, sizeof buf, ",%.10g", v);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.3f", row.batch_loss, row.grad_norm, row.wallclock);
  return s + buf;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::size_t sample_group(Rng& rng, const GroupedDataset& ds, GroupSampling how) {
  const std::size_t m = ds.group_count();
  if (how == GroupSampling::uniform) return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(m) - 1));
  const auto total = static_cast<std::int64_t>(ds.total_size());
  std::int64_t pick = rng.uniform_int(0, total - 1);
  for (std::size_t g = 0; g < m; ++g) {
    pick -= static_cast<std::int64_t>(ds.groups[g].instances.size());
    if (pick < 0) return g;
  }
  return m - 1;
}

class OracleCache {
 public:
  const Tour& get(std::size_t group, std::size_t index, const AnyInstance& inst) {
    const auto key = std::make_pair(group, index);
    auto it = tours_.find(key);
    if (it == tours_.end()) it = tours_.emplace(key, reference_solution(inst).tour).first;
    return it->second;
  }

 private:
  std::map<std::pair<std::size_t, std::size_t>, Tour> tours_;
};

double grad_norm(const std::vector<Tensor>& grad) {
  double s = 0.0;
  for (const auto& g : grad)
    for (const double v : g.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TrainState resume_training(TrainState state, const TrainConfig& cfg, const GroupedDataset& dataset,
                           const TrainHooks& hooks) {
  cfg.validate();
  dataset.validate();
  if (state.q.size() != dataset.group_count()) throw DatasetError("group count differs from the train state");
  const auto t0 = std::chrono::steady_clock::now();
  OracleCache oracles;
  const std::size_t m = dataset.group_count();

  while (state.outer_step < cfg.outer_steps) {
    if (hooks.stop_after && state.outer_step >= *hooks.stop_after) break;
    const std::size_t t = state.outer_step + 1;
    Rng step_rng(mix_seed(state.seed, t));
    const std::size_t g = m == 1 ? 0 : sample_group(step_rng, dataset, cfg.group_sampling);
    const auto& group = dataset.groups[g].instances;
    const double q_g = state.q.q[g];

    double batch_loss = 0.0;
    double norm = 0.0;
    for (std::size_t inner = 1; inner <= cfg.inner_steps; ++inner) {
      Rng inner_rng = step_rng.split(inner);
      std::vector<std::size_t> picks(cfg.batch_size);
      for (auto& p : picks) p = static_cast<std::size_t>(inner_rng.uniform_int(0, static_cast<std::int64_t>(group.size()) - 1));
      std::vector<std::uint64_t> seeds(cfg.batch_size);
      for (auto& s : seeds) s = inner_rng.next_u64();

      // Supervised oracles are solved up front so workers only read the cache.
      std::vector<const Tour*> oracle(cfg.batch_size, nullptr);
      if (cfg.mode == TrainMode::supervised) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) oracle[b] = &oracles.get(g, picks[b], group[picks[b]]);
      }

      std::vector<InstanceGradient> parts(cfg.batch_size);
      detail::parallel_for(cfg.batch_size, cfg.threads, [&](std::size_t b) {
        const AnyInstance& inst = group[picks[b]];
        if (cfg.mode == TrainMode::supervised) {
          parts[b] = supervised_step(state.params, inst, *oracle[b]);
        } else {
          const std::size_t starts = cfg.starts ? std::min(cfg.starts, customer_count(inst))
                                                : default_starts(customer_count(inst));
          parts[b] = reinforce_gradient(state.params, inst, starts, seeds[b]);
        }
      });

      // Fixed-order reduction.
      std::vector<Tensor> grad = zeros_like(state.params.tensors());
      batch_loss = 0.0;
      for (const auto& p : parts) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += p.grad[i];
        batch_loss += p.loss;
      }
      const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
      for (auto& gt : grad) gt *= inv_b;
      batch_loss *= inv_b;
      norm = grad_norm(grad);

      try {
        sgd_step(state, grad, q_g, cfg);
      } catch (const NumericalAbort&) {
        if (hooks.checkpoint_path) save_train_state(*hooks.checkpoint_path, state);
        throw;
      }
      ++state.inner_step;
    }

    state.group_loss_sum[g] += batch_loss;
    state.group_loss_count[g] += 1.0;
    if (cfg.mode != TrainMode::erm) {
      double eg_loss = batch_loss;
      if (cfg.normalize_group_loss) eg_loss /= state.group_loss_sum[g] / state.group_loss_count[g];
      eg_update(state.q, g, eg_loss, cfg.group_lr);
      state.q.validate();
    }
    state.history.push_back({t, g, batch_loss});
    state.outer_step = t;

    if (hooks.on_step) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      hooks.on_step({t, g, state.q.q, batch_loss, norm, secs});
    }
    if (hooks.checkpoint_path && cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0) {
      save_train_state(*hooks.checkpoint_path, state);
    }
  }
  return state;
}

TrainState train(const TrainConfig& cfg, const GroupedDataset& dataset, const PolicyParams& initial,
                 const TrainHooks& hooks) {
  cfg.validate();
  return resume_training(TrainState::fresh(initial, dataset, cfg), cfg, dataset, hooks);
}

TrainState erm_train(TrainConfig cfg, const GroupedDataset& dataset, const PolicyParams& initial,
                     const TrainHooks& hooks) {
  cfg.mode = TrainMode::erm;
  return train(cfg, dataset, initial, hooks);
}

}  // namespace droute
