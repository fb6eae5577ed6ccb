#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "droute/checkpoint.hpp"
#include "droute/instance.hpp"
#include "droute/policy.hpp"

namespace droute {

// Importance weights over distribution groups; a point of the simplex.
struct GroupWeights {
  std::vector<double> q;

  static GroupWeights uniform(std::size_t m);
  // q_g proportional to group size.
  static GroupWeights proportional(const GroupedDataset& dataset);

  std::size_t size() const noexcept { return q.size(); }
  // Throws ContractError unless q >= 0 and |sum q - 1| <= 1e-12.
  void validate() const;
};

enum class TrainMode { dro, erm, supervised };
enum class GroupSampling { uniform, proportional };

std::string_view to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
  double lr = 1e-4;              // parameter step
  double momentum = 0.9;
  double group_lr = 0.01;        // exponentiated-gradient step on q
  std::size_t outer_steps = 100;
  std::size_t inner_steps = 1;   // steps per sampled group
  std::size_t batch_size = 16;
  double weight_decay = 1e-4;    // l2 coefficient folded into the gradient
  TrainMode mode = TrainMode::dro;
  std::uint64_t seed = 0;
  std::size_t starts = 0;        // rollouts per instance; 0 = min(n, 8)
  GroupSampling group_sampling = GroupSampling::uniform;
  // Divide each group loss by that group's running mean before the q update.
  bool normalize_group_loss = false;
  std::size_t checkpoint_every = 0;  // outer steps; 0 disables periodic saves
  std::size_t threads = 1;
  PolicyConfig policy;

  // Throws ConfigError.
  void validate() const;
};

// "key = value" lines, '#' comments. Keys are the TrainConfig field names;
// policy dimensions use embed_dim, kernel_size, neighbors, layers, heads,
// ff_dim. Throws ConfigError on unknown keys or bad values.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::filesystem::path& path);
void write_train_config(std::ostream& out, const TrainConfig& cfg);

struct HistoryEntry {
  std::size_t step = 0;  // outer step t
  std::size_t group = 0;
  double loss = 0.0;     // last inner batch loss of that step
};

struct TrainState {
  PolicyParams params;
  GroupWeights q;
  std::vector<nn::Tensor> momentum;
  std::size_t outer_step = 0;  // completed outer steps
  std::size_t inner_step = 0;  // completed parameter updates
  std::uint64_t seed = 0;
  std::vector<HistoryEntry> history;  // one entry per completed outer step
  std::vector<double> group_loss_sum;
  std::vector<double> group_loss_count;

  static TrainState fresh(const PolicyParams& params, const GroupedDataset& dataset, const TrainConfig& cfg);
};

std::vector<NamedTensor> train_state_entries(const TrainState& state);
TrainState train_state_from_entries(const std::vector<NamedTensor>& entries);
void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

// POMO-style shared baseline: mean length over the instance's rollouts.
double shared_baseline(const RolloutBatch& batch);

struct ReinforceLoss {
  double loss = 0.0;         // mean of (length - baseline)
  double mean_length = 0.0;  // monitored group loss
  std::vector<double> advantages;
};

// Throws ContractError on an empty batch or a non-finite baseline.
ReinforceLoss reinforce_loss(const RolloutBatch& batch, double baseline);

struct InstanceGradient {
  double loss = 0.0;  // mean tour length (RL) or cross-entropy (supervised)
  std::vector<nn::Tensor> grad;
};

// Samples `starts` rollouts, uses the shared baseline and returns
// mean_r (l_r - b) * grad log p_r.
InstanceGradient reinforce_gradient(const PolicyParams& params, const AnyInstance& inst, std::size_t starts,
                                    std::uint64_t seed, bool use_baseline = true);

// Cross-entropy of the oracle tour: loss = -log P(oracle | x).
InstanceGradient supervised_step(const PolicyParams& params, const AnyInstance& inst, const Tour& oracle);

// v <- mu v + q_g (grad + lambda theta);  theta <- theta - lr v.
// Throws NumericalAbort if grad holds NaN/Inf.
void sgd_step(TrainState& state, const std::vector<nn::Tensor>& grad, double group_weight, const TrainConfig& cfg);

// q_g <- q_g exp(step * loss), then renormalize. Each entry is evaluated as a
// single ratio, so overflow or underflow of exp(step * loss) still gives the
// limiting value. Vertices of the simplex are left unchanged.
void eg_update(GroupWeights& q, std::size_t group, double loss, double step);

struct TrainLogRow {
  std::size_t step = 0;
  std::size_t group = 0;
  std::vector<double> q;
  double batch_loss = 0.0;
  double grad_norm = 0.0;
  double wallclock = 0.0;
};

// CSV header and row for the training log.
std::string train_log_header(std::size_t groups);
std::string train_log_line(const TrainLogRow& row);

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_step;
  std::optional<std::filesystem::path> checkpoint_path;
  // Stop once this many outer steps are complete (simulated interruption).
  std::optional<std::size_t> stop_after;
};

// Runs the group-DRO loop (or ERM / supervised, per cfg.mode) from a fresh
// state initialized with `initial` until cfg.outer_steps.
TrainState train(const TrainConfig& cfg, const GroupedDataset& dataset, const PolicyParams& initial,
                 const TrainHooks& hooks = {});
// Same loop with q frozen at group-size proportions and no q updates.
TrainState erm_train(TrainConfig cfg, const GroupedDataset& dataset, const PolicyParams& initial,
                     const TrainHooks& hooks = {});
// Continues `state` until cfg.outer_steps; bit-identical to never stopping.
TrainState resume_training(TrainState state, const TrainConfig& cfg, const GroupedDataset& dataset,
                           const TrainHooks& hooks = {});

}  // namespace droute
