#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "droute/autodiff.hpp"
#include "droute/instance.hpp"
#include "droute/tensor.hpp"

namespace droute {

// Architecture of the routing policy.
struct PolicyConfig {
  ProblemType problem = ProblemType::tsp;
  std::size_t embed_dim = 32;    // C: conv kernels and model width
  std::size_t kernel_size = 5;   // conv kernel length
  std::size_t neighbors = 4;     // K nearest neighbours per conv window
  std::size_t layers = 2;        // encoder layers
  std::size_t heads = 4;
  std::size_t ff_dim = 64;
  double logit_clip = 10.0;

  // 2 for TSP (x, y), 3 for CVRP (x, y, demand / D).
  std::size_t input_dim() const noexcept { return problem == ProblemType::tsp ? 2 : 3; }
  // Throws ParameterError on inconsistent dimensions.
  void validate() const;

  static PolicyConfig desk(ProblemType problem);
  // C = 128, K = 10, kernel 11, 3 layers.
  static PolicyConfig paper(ProblemType problem);
  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

// Positions of every trainable tensor in PolicyParams::tensors.
struct ParamLayout {
  struct EncoderLayer {
    std::size_t wq, wk, wv, wo, ff1_w, ff1_b, ff2_w, ff2_b;
  };
  std::size_t conv_w, conv_b, w1, w2;
  std::vector<EncoderLayer> encoder;
  std::size_t dec_key, dec_context;

  std::vector<std::string> names;
  std::vector<nn::Shape> shapes;

  static ParamLayout build(const PolicyConfig& config);
};

// All trainable tensors of the policy, addressable by name or as one flat
// vector (tensor order, then row-major).
class PolicyParams {
 public:
  PolicyParams() = default;

  // Uniform(+-1/sqrt(fan_in)) initialization from `seed`.
  static PolicyParams init(const PolicyConfig& config, std::uint64_t seed);
  static PolicyParams zeros(const PolicyConfig& config);

  const PolicyConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  std::vector<nn::Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<nn::Tensor>& tensors() const noexcept { return tensors_; }
  const std::vector<std::string>& names() const noexcept { return layout_.names; }

  nn::Tensor& get(std::string_view name);
  const nn::Tensor& get(std::string_view name) const;

  std::size_t parameter_count() const noexcept;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
  bool all_finite() const noexcept;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.config_ == b.config_ && a.tensors_ == b.tensors_;
  }

 private:
  PolicyParams(PolicyConfig config, std::vector<nn::Tensor> tensors);

  PolicyConfig config_;
  ParamLayout layout_;
  std::vector<nn::Tensor> tensors_;
};

// Zero tensors shaped like `params`.
std::vector<nn::Tensor> zeros_like(const std::vector<nn::Tensor>& params);

// A route. TSP: a permutation of 0..n-1. CVRP: model node ids where 0 is the
// depot and customer i of the CvrpInstance is node i + 1; the sequence starts
// and ends with 0 and never repeats 0 back to back.
struct Tour {
  std::vector<int> nodes;
  friend bool operator==(const Tour&, const Tour&) = default;
};

// Throws ContractError describing the first violated tour invariant.
void validate_tour(const AnyInstance& inst, const Tour& tour);
bool is_feasible(const AnyInstance& inst, const Tour& tour) noexcept;

struct RolloutBatch {
  std::vector<Tour> tours;
  std::vector<double> logprobs;  // log P(tour | instance), excluding the fixed first move
  std::vector<double> lengths;   // Euclidean length in unit-square units

  std::size_t size() const noexcept { return tours.size(); }
};

// Row i lists the K nearest nodes to i, nearest first, ties to the lower index.
using NeighborTable = std::vector<std::vector<std::size_t>>;
NeighborTable knn(std::span<const Point> points, std::size_t k);
NeighborTable knn(const Instance& inst, std::size_t k);

// Node view seen by the network: TSP nodes are the cities; CVRP nodes are the
// depot (demand 0) followed by the customers.
struct ModelInput {
  ProblemType problem = ProblemType::tsp;
  std::vector<Point> points;
  std::vector<double> demand;  // normalized; 0 for TSP nodes and the depot
  int capacity = 0;

  static ModelInput from(const AnyInstance& inst);
  std::size_t node_count() const noexcept { return points.size(); }
  nn::Tensor features() const;  // [N, input_dim]
};

// Conv window per node: [self, nearest, ..., K-th nearest] repeated
// cyclically up to the kernel length. K is capped at N - 1.
std::vector<std::vector<std::size_t>> conv_windows(const ModelInput& input, std::size_t neighbors,
                                                   std::size_t kernel_size);

// Tape-level building blocks. `vars` holds one Var per parameter tensor.
nn::Var embed(const PolicyConfig& config, const ParamLayout& layout, std::span<const nn::Var> vars,
              const ModelInput& input, const NeighborTable& table);
nn::Var encode(const PolicyConfig& config, const ParamLayout& layout, std::span<const nn::Var> vars,
               nn::Var h);

// Value-level conveniences (no gradient).
nn::Tensor embed(const PolicyParams& params, const AnyInstance& inst);
nn::Tensor encode(const PolicyParams& params, const nn::Tensor& h);

enum class DecodeMode { greedy, sample };

struct RolloutOptions {
  DecodeMode mode = DecodeMode::greedy;
  std::size_t starts = 1;
  std::uint64_t seed = 0;
};

// min(n, 8): desk-scale multi-start count for n customers.
std::size_t default_starts(std::size_t customers) noexcept;
// Distinct first nodes, evenly spaced over the node ids (CVRP: customers).
std::vector<int> start_nodes(const AnyInstance& inst, std::size_t starts);

RolloutBatch rollout(const PolicyParams& params, const AnyInstance& inst, const RolloutOptions& options);

// Samples/decodes like rollout(), then adds the gradient of
// sum_r weights[r] * logprob_r to `grads`. `weight_fn` sees the finished
// batch (e.g. to compute advantages) and returns one weight per rollout.
using RolloutWeightFn = std::function<std::vector<double>(const RolloutBatch&)>;
RolloutBatch rollout_with_gradient(const PolicyParams& params, const AnyInstance& inst,
                                   const RolloutOptions& options, const RolloutWeightFn& weight_fn,
                                   std::vector<nn::Tensor>& grads);

// log P(tour | inst) under the decoder's masks; tour[0] (TSP) or the first
// customer (CVRP) is taken as the fixed start. Throws ContractError for an
// infeasible tour.
double logprob(const PolicyParams& params, const AnyInstance& inst, const Tour& tour);

struct LogProbGrad {
  double logprob = 0.0;
  std::vector<nn::Tensor> grads;
};
LogProbGrad logprob_and_grad(const PolicyParams& params, const AnyInstance& inst, const Tour& tour);

// Per-step view of a teacher-forced decode, for diagnostics and tests.
struct DecodeTrace {
  std::vector<std::size_t> feasible_counts;  // allowed actions at each scored step
  std::vector<double> step_prob_sums;        // sum of probabilities over allowed actions
};
DecodeTrace trace_decode(const PolicyParams& params, const AnyInstance& inst, const Tour& tour);

}  // namespace droute
