#include "droute/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "droute/error.hpp"
#include "droute/rng.hpp"
#include "droute/solvers.hpp"

namespace droute {

using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

// ---------------------------------------------------------------------------
// Configuration and parameters

void PolicyConfig::validate() const {
  if (embed_dim == 0 || kernel_size == 0 || neighbors == 0 || heads == 0 || ff_dim == 0) {
    throw ParameterError("policy dimensions must be positive");
  }
  if (embed_dim % heads != 0) throw ParameterError("embed_dim must be divisible by heads");
  if (!(logit_clip > 0.0)) throw ParameterError("logit clip must be positive");
}

PolicyConfig PolicyConfig::desk(ProblemType problem) {
  PolicyConfig c;
  c.problem = problem;
  return c;
}

PolicyConfig PolicyConfig::paper(ProblemType problem) {
  PolicyConfig c;
  c.problem = problem;
  c.embed_dim = 128;
  c.kernel_size = 11;
  c.neighbors = 10;
  c.layers = 3;
  c.heads = 8;
  c.ff_dim = 512;
  return c;
}

ParamLayout ParamLayout::build(const PolicyConfig& config) {
  config.validate();
  ParamLayout l;
  const std::size_t c = config.embed_dim;
  const std::size_t in = config.input_dim();
  auto add = [&l](std::string name, Shape shape) {
    l.names.push_back(std::move(name));
    l.shapes.push_back(std::move(shape));
    return l.names.size() - 1;
  };
  l.conv_w = add("embed.conv.weight", {c, config.kernel_size, in});
  l.conv_b = add("embed.conv.bias", {c});
  l.w1 = add("embed.w1", {in, c});
  l.w2 = add("embed.w2", {c, c});
  for (std::size_t k = 0; k < config.layers; ++k) {
    const std::string p = "enc." + std::to_string(k) + ".";
    EncoderLayer e{};
    e.wq = add(p + "wq", {c, c});
    e.wk = add(p + "wk", {c, c});
    e.wv = add(p + "wv", {c, c});
    e.wo = add(p + "wo", {c, c});
    e.ff1_w = add(p + "ff1.weight", {c, config.ff_dim});
    e.ff1_b = add(p + "ff1.bias", {config.ff_dim});
    e.ff2_w = add(p + "ff2.weight", {config.ff_dim, c});
    e.ff2_b = add(p + "ff2.bias", {c});
    l.encoder.push_back(e);
  }
  l.dec_key = add("dec.key", {c, c});
  const std::size_t context = 2 * c + (config.problem == ProblemType::cvrp ? 1 : 0);
  l.dec_context = add("dec.context", {context, c});
  return l;
}

PolicyParams::PolicyParams(PolicyConfig config, std::vector<Tensor> tensors)
    : config_(config), layout_(ParamLayout::build(config)), tensors_(std::move(tensors)) {}

PolicyParams PolicyParams::zeros(const PolicyConfig& config) {
  const ParamLayout layout = ParamLayout::build(config);
  std::vector<Tensor> tensors;
  for (const auto& s : layout.shapes) tensors.emplace_back(s, 0.0);
  return PolicyParams(config, std::move(tensors));
}

PolicyParams PolicyParams::init(const PolicyConfig& config, std::uint64_t seed) {
  PolicyParams p = zeros(config);
  const Rng root(seed);
  const auto& l = p.layout_;
  // Fan-in is the number of inputs feeding one output unit.
  auto fan_in = [&](std::size_t idx) -> std::size_t {
    if (idx == l.conv_w || idx == l.conv_b) return config.kernel_size * config.input_dim();
    const Shape& s = l.shapes[idx];
    if (s.size() == 2) return s[0];
    for (const auto& e : l.encoder) {
      if (idx == e.ff1_b) return config.embed_dim;
      if (idx == e.ff2_b) return config.ff_dim;
    }
    return s[0];
  };
  for (std::size_t i = 0; i < p.tensors_.size(); ++i) {
    Rng rng = root.split(i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(i)));
    for (auto& v : p.tensors_[i].storage()) v = rng.uniform(-bound, bound);
  }
  return p;
}

Tensor& PolicyParams::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const PolicyParams&>(*this).get(name));
}

const Tensor& PolicyParams::get(std::string_view name) const {
  for (std::size_t i = 0; i < layout_.names.size(); ++i) {
    if (layout_.names[i] == name) return tensors_[i];
  }
  throw ParameterError("no parameter named " + std::string(name));
}

std::size_t PolicyParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<double> PolicyParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& t : tensors_) flat.insert(flat.end(), t.data().begin(), t.data().end());
  return flat;
}

void PolicyParams::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ShapeError("flat parameter vector has wrong length");
  std::size_t offset = 0;
  for (auto& t : tensors_) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.data().begin());
    offset += t.size();
  }
}

bool PolicyParams::all_finite() const noexcept {
  return std::all_of(tensors_.begin(), tensors_.end(), [](const Tensor& t) { return t.all_finite(); });
}

std::vector<Tensor> zeros_like(const std::vector<Tensor>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& t : params) out.emplace_back(t.shape(), 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Tours

void validate_tour(const AnyInstance& inst, const Tour& tour) {
  const auto& nodes = tour.nodes;
  if (const auto* tsp = std::get_if<Instance>(&inst)) {
    const std::size_t n = tsp->size();
    if (nodes.size() != n) throw ContractError("TSP tour length differs from node count");
    std::vector<std::uint8_t> seen(n, 0);
    for (const int v : nodes) {
      if (v < 0 || static_cast<std::size_t>(v) >= n) throw ContractError("TSP tour node out of range");
      if (seen[static_cast<std::size_t>(v)]++) throw ContractError("TSP tour repeats a node");
    }
    return;
  }
  const auto& cvrp = std::get<CvrpInstance>(inst);
  const std::size_t n = cvrp.size();
  if (nodes.size() < 3 || nodes.front() != 0 || nodes.back() != 0) {
    throw ContractError("CVRP tour must start and end at the depot");
  }
  std::vector<std::uint8_t> seen(n + 1, 0);
  int load = 0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const int v = nodes[i];
    if (v < 0 || static_cast<std::size_t>(v) > n) throw ContractError("CVRP tour node out of range");
    if (v == 0) {
      if (nodes[i - 1] == 0) throw ContractError("CVRP tour has an empty route");
      load = 0;
      continue;
    }
    if (seen[static_cast<std::size_t>(v)]++) throw ContractError("CVRP tour visits a customer twice");
    load += cvrp.demands[static_cast<std::size_t>(v - 1)];
    if (load > cvrp.capacity) throw ContractError("CVRP route exceeds capacity");
  }
  for (std::size_t v = 1; v <= n; ++v) {
    if (!seen[v]) throw ContractError("CVRP tour misses customer " + std::to_string(v));
  }
}

bool is_feasible(const AnyInstance& inst, const Tour& tour) noexcept {
  try {
    validate_tour(inst, tour);
    return true;
  } catch (...) {
    return false;
  }
}

// ---------------------------------------------------------------------------
// Embedding

NeighborTable knn(std::span<const Point> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k >= n) throw ParameterError("knn: K must be smaller than the node count");
  NeighborTable table(n);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = points[i].x - points[j].x;
      const double dy = points[i].y - points[j].y;
      cand.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    table[i].reserve(k);
    for (std::size_t r = 0; r < k; ++r) table[i].push_back(cand[r].second);
  }
  return table;
}

NeighborTable knn(const Instance& inst, std::size_t k) { return knn(inst.coords, k); }

ModelInput ModelInput::from(const AnyInstance& inst) {
  ModelInput in;
  if (const auto* tsp = std::get_if<Instance>(&inst)) {
    in.problem = ProblemType::tsp;
    in.points = tsp->coords;
    in.demand.assign(tsp->size(), 0.0);
    return in;
  }
  const auto& cvrp = std::get<CvrpInstance>(inst);
  in.problem = ProblemType::cvrp;
  in.capacity = cvrp.capacity;
  in.points.reserve(cvrp.size() + 1);
  in.points.push_back(cvrp.depot);
  in.points.insert(in.points.end(), cvrp.base.coords.begin(), cvrp.base.coords.end());
  in.demand.reserve(cvrp.size() + 1);
  in.demand.push_back(0.0);
  in.demand.insert(in.demand.end(), cvrp.normalized_demands.begin(), cvrp.normalized_demands.end());
  return in;
}

Tensor ModelInput::features() const {
  const std::size_t dim = problem == ProblemType::tsp ? 2 : 3;
  Tensor x({points.size(), dim});
  for (std::size_t i = 0; i < points.size(); ++i) {
    x.at(i, 0) = points[i].x;
    x.at(i, 1) = points[i].y;
    if (dim == 3) x.at(i, 2) = demand[i];
  }
  return x;
}

std::vector<std::vector<std::size_t>> conv_windows(const ModelInput& input, std::size_t neighbors,
                                                   std::size_t kernel_size) {
  const std::size_t n = input.node_count();
  const std::size_t k = std::min(neighbors, n - 1);
  const NeighborTable table = knn(input.points, k);
  const std::size_t width = std::max(k + 1, kernel_size);
  std::vector<std::vector<std::size_t>> windows(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> base;
    base.reserve(k + 1);
    base.push_back(i);
    base.insert(base.end(), table[i].begin(), table[i].end());
    windows[i].resize(width);
    for (std::size_t p = 0; p < width; ++p) windows[i][p] = base[p % base.size()];
  }
  return windows;
}

namespace {

Var embed_with_windows(const PolicyConfig& config, const ParamLayout& layout, std::span<const Var> vars,
                       const ModelInput& input, const std::vector<std::vector<std::size_t>>& windows) {
  Tape& tape = *vars[0].tape();
  const std::size_t n = input.node_count();
  const std::size_t dim = config.input_dim();
  const Tensor x = input.features();
  if (x.dim(1) != dim) throw ShapeError("embed: feature dimension does not match the policy");
  const std::size_t width = windows.front().size();

  Tensor stacked({n, width, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < width; ++p)
      for (std::size_t c = 0; c < dim; ++c) stacked[(i * width + p) * dim + c] = x.at(windows[i][p], c);

  const std::size_t c = config.embed_dim;
  Var conv = nn::conv1d(tape.constant(std::move(stacked)), vars[layout.conv_w], vars[layout.conv_b]);
  const std::size_t positions = conv.shape()[1];
  Var hbar;
  if (positions == 1) {
    hbar = nn::reshape(conv, {n, c});
  } else {
    Var flat = nn::reshape(conv, {n, positions * c});
    hbar = nn::slice_cols(flat, 0, c);
    for (std::size_t p = 1; p < positions; ++p) hbar = nn::add(hbar, nn::slice_cols(flat, p * c, c));
    hbar = nn::scale(hbar, 1.0 / static_cast<double>(positions));
  }
  const Var xin = tape.constant(x);
  return nn::add(nn::matmul(xin, vars[layout.w1]), nn::matmul(hbar, vars[layout.w2]));
}

}  // namespace

Var embed(const PolicyConfig& config, const ParamLayout& layout, std::span<const Var> vars,
          const ModelInput& input, const NeighborTable& table) {
  const std::size_t n = input.node_count();
  if (table.size() != n) throw ShapeError("embed: neighbour table row count mismatch");
  const std::size_t width = std::max(table.front().size() + 1, config.kernel_size);
  std::vector<std::vector<std::size_t>> windows(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> base{i};
    base.insert(base.end(), table[i].begin(), table[i].end());
    windows[i].resize(width);
    for (std::size_t p = 0; p < width; ++p) windows[i][p] = base[p % base.size()];
  }
  return embed_with_windows(config, layout, vars, input, windows);
}

Var encode(const PolicyConfig& config, const ParamLayout& layout, std::span<const Var> vars, Var h) {
  const std::size_t n = h.shape()[0];
  const std::size_t c = config.embed_dim;
  if (h.shape().size() != 2 || h.shape()[1] != c) throw ShapeError("encode: expected [n, C] input");
  const std::size_t d = c / config.heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (const auto& e : layout.encoder) {
    const Var q = nn::matmul(h, vars[e.wq]);
    const Var k = nn::matmul(h, vars[e.wk]);
    const Var v = nn::matmul(h, vars[e.wv]);
    std::vector<Var> heads;
    heads.reserve(config.heads);
    for (std::size_t hd = 0; hd < config.heads; ++hd) {
      const Var qh = nn::slice_cols(q, hd * d, d);
      const Var kh = nn::slice_cols(k, hd * d, d);
      const Var vh = nn::slice_cols(v, hd * d, d);
      const Var attn = nn::softmax(nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt_d), 1);
      heads.push_back(nn::matmul(attn, vh));
    }
    const Var mixed = heads.size() == 1 ? heads[0] : nn::concat_cols(heads);
    h = nn::add(h, nn::matmul(mixed, vars[e.wo]));
    const Var ff = nn::tanh(nn::add_bias(nn::matmul(h, vars[e.ff1_w]), vars[e.ff1_b]));
    h = nn::add(h, nn::add_bias(nn::matmul(ff, vars[e.ff2_w]), vars[e.ff2_b]));
  }
  (void)n;
  return h;
}

namespace {

std::vector<Var> constant_vars(Tape& tape, const PolicyParams& params) {
  std::vector<Var> vars;
  vars.reserve(params.tensors().size());
  for (const auto& t : params.tensors()) vars.push_back(tape.constant(t));
  return vars;
}

std::vector<Var> variable_vars(Tape& tape, const PolicyParams& params) {
  std::vector<Var> vars;
  vars.reserve(params.tensors().size());
  for (const auto& t : params.tensors()) vars.push_back(tape.variable(t));
  return vars;
}

}  // namespace

Tensor embed(const PolicyParams& params, const AnyInstance& inst) {
  Tape tape;
  const auto vars = constant_vars(tape, params);
  const ModelInput input = ModelInput::from(inst);
  const auto& cfg = params.config();
  return embed_with_windows(cfg, params.layout(), vars, input,
                            conv_windows(input, cfg.neighbors, cfg.kernel_size))
      .value();
}

Tensor encode(const PolicyParams& params, const Tensor& h) {
  Tape tape;
  const auto vars = constant_vars(tape, params);
  return encode(params.config(), params.layout(), vars, tape.constant(h)).value();
}

// ---------------------------------------------------------------------------
// Decoding

std::size_t default_starts(std::size_t customers) noexcept { return std::min<std::size_t>(customers, 8); }

std::vector<int> start_nodes(const AnyInstance& inst, std::size_t starts) {
  const std::size_t n = customer_count(inst);
  if (starts < 1 || starts > n) throw ParameterError("starts must lie in [1, n]");
  const int offset = problem_type(inst) == ProblemType::cvrp ? 1 : 0;
  std::vector<int> out(starts);
  for (std::size_t s = 0; s < starts; ++s) out[s] = offset + static_cast<int>(s * n / starts);
  return out;
}

namespace {

// Picks the next node for a row given its log-probabilities and mask.
using Chooser = std::function<std::size_t(std::size_t row, std::span<const double> logp,
                                          std::span<const std::uint8_t> allowed)>;

struct DecodeOutput {
  std::vector<Tour> tours;
  Var logprob;  // [S]; invalid when no step was scored
};

DecodeOutput decode(Tape& tape, const PolicyParams& params, std::span<const Var> vars, const AnyInstance& inst,
                    const std::vector<int>& starts, const Chooser& choose, DecodeTrace* trace) {
  const PolicyConfig& cfg = params.config();
  const ParamLayout& layout = params.layout();
  const ModelInput input = ModelInput::from(inst);
  const std::size_t n_nodes = input.node_count();
  const std::size_t rows = starts.size();
  const bool cvrp = input.problem == ProblemType::cvrp;
  const CvrpInstance* cv = cvrp ? &std::get<CvrpInstance>(inst) : nullptr;

  const Var h = embed_with_windows(cfg, layout, vars, input,
                                   conv_windows(input, cfg.neighbors, cfg.kernel_size));
  const Var enc = encode(cfg, layout, vars, h);
  const Var keys_t = nn::transpose(nn::matmul(enc, vars[layout.dec_key]));
  const Var graph = nn::broadcast_rows(nn::mean_rows(enc), rows);
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));

  struct RowState {
    std::vector<std::uint8_t> visited;
    std::size_t current = 0;
    std::size_t left = 0;  // unvisited customers (TSP: nodes)
    int remaining = 0;
    bool done = false;
    Tour tour;
  };
  std::vector<RowState> state(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    RowState& s = state[r];
    const auto start = static_cast<std::size_t>(starts[r]);
    if (start >= n_nodes || (cvrp && start == 0)) throw ParameterError("invalid start node");
    s.visited.assign(n_nodes, 0);
    s.visited[start] = 1;
    s.current = start;
    if (cvrp) {
      s.tour.nodes = {0, static_cast<int>(start)};
      s.remaining = cv->capacity - cv->demands[start - 1];
      s.left = n_nodes - 2;
      if (s.left == 0) {
        s.tour.nodes.push_back(0);
        s.done = true;
      }
    } else {
      s.tour.nodes = {static_cast<int>(start)};
      s.left = n_nodes - 1;
      s.done = s.left == 0;
    }
  }

  Var total;
  nn::Mask mask(rows * n_nodes);
  std::vector<std::size_t> last(rows), actions(rows);
  Tensor remaining({rows, 1});
  while (std::any_of(state.begin(), state.end(), [](const RowState& s) { return !s.done; })) {
    std::fill(mask.begin(), mask.end(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      RowState& s = state[r];
      std::uint8_t* m = &mask[r * n_nodes];
      last[r] = s.current;
      if (s.done) {
        m[0] = 1;  // finished rows idle on node 0 with probability 1
        continue;
      }
      std::size_t allowed = 0;
      for (std::size_t j = cvrp ? 1 : 0; j < n_nodes; ++j) {
        if (s.visited[j]) continue;
        if (cvrp && cv->demands[j - 1] > s.remaining) continue;
        m[j] = 1;
        ++allowed;
      }
      if (cvrp && s.current != 0) {
        m[0] = 1;
        ++allowed;
      }
      if (allowed == 0) throw ContractError("decoder reached a state with no feasible action");
      if (cvrp) remaining[r] = static_cast<double>(s.remaining) / cv->capacity;
    }

    std::vector<Var> parts{graph, nn::gather_rows(enc, last)};
    if (cvrp) parts.push_back(tape.constant(remaining));
    const Var query = nn::matmul(nn::concat_cols(parts), vars[layout.dec_context]);
    const Var compat = nn::scale(nn::matmul(query, keys_t), inv_sqrt_c);
    const Var logits = nn::scale(nn::tanh(compat), cfg.logit_clip);
    const Var logp = nn::log_softmax(logits, 1, &mask);
    const Tensor& lp = logp.value();

    for (std::size_t r = 0; r < rows; ++r) {
      RowState& s = state[r];
      if (s.done) {
        actions[r] = 0;
        continue;
      }
      const std::span<const double> row_lp(&lp[r * n_nodes], n_nodes);
      const std::span<const std::uint8_t> row_mask(&mask[r * n_nodes], n_nodes);
      if (trace != nullptr) {
        std::size_t count = 0;
        double psum = 0.0;
        for (std::size_t j = 0; j < n_nodes; ++j) {
          if (row_mask[j]) {
            ++count;
            psum += std::exp(row_lp[j]);
          }
        }
        trace->feasible_counts.push_back(count);
        trace->step_prob_sums.push_back(psum);
      }
      const std::size_t a = choose(r, row_lp, row_mask);
      if (a >= n_nodes || !row_mask[a]) throw ContractError("chosen action is masked");
      actions[r] = a;
      s.tour.nodes.push_back(static_cast<int>(a));
      if (cvrp) {
        if (a == 0) {
          s.remaining = cv->capacity;
        } else {
          s.visited[a] = 1;
          s.remaining -= cv->demands[a - 1];
          --s.left;
        }
        s.current = a;
        if (s.left == 0) {
          s.tour.nodes.push_back(0);
          s.done = true;
        }
      } else {
        s.visited[a] = 1;
        s.current = a;
        s.done = --s.left == 0;
      }
    }
    const Var step = nn::pick(logp, actions);
    total = total.valid() ? nn::add(total, step) : step;
  }

  DecodeOutput out;
  out.tours.reserve(rows);
  for (auto& s : state) out.tours.push_back(std::move(s.tour));
  out.logprob = total;
  return out;
}

std::size_t greedy_choice(std::span<const double> logp, std::span<const std::uint8_t> allowed) {
  std::size_t best = logp.size();
  for (std::size_t j = 0; j < logp.size(); ++j) {
    if (allowed[j] && (best == logp.size() || logp[j] > logp[best])) best = j;
  }
  return best;
}

std::size_t sampled_choice(Rng& rng, std::span<const double> logp, std::span<const std::uint8_t> allowed) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last = logp.size();
  for (std::size_t j = 0; j < logp.size(); ++j) {
    if (!allowed[j]) continue;
    cum += std::exp(logp[j]);
    last = j;
    if (u < cum) return j;
  }
  return last;
}

Chooser make_chooser(const RolloutOptions& options, std::size_t rows, std::vector<Rng>& rngs) {
  if (options.mode == DecodeMode::greedy) {
    return [](std::size_t, std::span<const double> lp, std::span<const std::uint8_t> m) {
      return greedy_choice(lp, m);
    };
  }
  rngs.clear();
  const Rng root(options.seed);
  for (std::size_t r = 0; r < rows; ++r) rngs.push_back(root.split(r));
  return [&rngs](std::size_t row, std::span<const double> lp, std::span<const std::uint8_t> m) {
    return sampled_choice(rngs[row], lp, m);
  };
}

RolloutBatch finish_batch(const AnyInstance& inst, DecodeOutput&& out) {
  RolloutBatch batch;
  const std::size_t rows = out.tours.size();
  batch.logprobs.assign(rows, 0.0);
  if (out.logprob.valid()) {
    const Tensor& lp = out.logprob.value();
    for (std::size_t r = 0; r < rows; ++r) batch.logprobs[r] = lp[r];
  }
  batch.lengths.reserve(rows);
  for (const auto& t : out.tours) batch.lengths.push_back(tour_length(inst, t));
  batch.tours = std::move(out.tours);
  return batch;
}

// Action sequence that reproduces `tour` from its fixed start.
struct Forced {
  int start = 0;
  std::vector<std::size_t> actions;
};

Forced forced_actions(const AnyInstance& inst, const Tour& tour) {
  validate_tour(inst, tour);
  Forced f;
  if (problem_type(inst) == ProblemType::tsp) {
    f.start = tour.nodes.front();
    for (std::size_t i = 1; i < tour.nodes.size(); ++i) f.actions.push_back(static_cast<std::size_t>(tour.nodes[i]));
  } else {
    f.start = tour.nodes[1];
    for (std::size_t i = 2; i + 1 < tour.nodes.size(); ++i) {
      f.actions.push_back(static_cast<std::size_t>(tour.nodes[i]));
    }
  }
  return f;
}

Chooser forced_chooser(const Forced& f, std::size_t& cursor) {
  return [&f, &cursor](std::size_t, std::span<const double>, std::span<const std::uint8_t>) {
    if (cursor >= f.actions.size()) throw ContractError("tour ended before the decoder finished");
    return f.actions[cursor++];
  };
}

}  // namespace

RolloutBatch rollout(const PolicyParams& params, const AnyInstance& inst, const RolloutOptions& options) {
  Tape tape;
  const auto vars = constant_vars(tape, params);
  const auto starts = start_nodes(inst, options.starts);
  std::vector<Rng> rngs;
  const Chooser choose = make_chooser(options, starts.size(), rngs);
  return finish_batch(inst, decode(tape, params, vars, inst, starts, choose, nullptr));
}

RolloutBatch rollout_with_gradient(const PolicyParams& params, const AnyInstance& inst,
                                   const RolloutOptions& options, const RolloutWeightFn& weight_fn,
                                   std::vector<Tensor>& grads) {
  Tape tape;
  const auto vars = variable_vars(tape, params);
  const auto starts = start_nodes(inst, options.starts);
  std::vector<Rng> rngs;
  const Chooser choose = make_chooser(options, starts.size(), rngs);
  DecodeOutput out = decode(tape, params, vars, inst, starts, choose, nullptr);
  const Var total = out.logprob;
  RolloutBatch batch = finish_batch(inst, std::move(out));
  const std::vector<double> weights = weight_fn(batch);
  if (weights.size() != batch.size()) throw ContractError("weight_fn must return one weight per rollout");
  if (grads.size() != vars.size()) grads = zeros_like(params.tensors());
  if (!total.valid()) return batch;
  tape.backward(nn::weighted_sum(total, weights));
  for (std::size_t i = 0; i < vars.size(); ++i) grads[i] += tape.grad(vars[i].id());
  return batch;
}

double logprob(const PolicyParams& params, const AnyInstance& inst, const Tour& tour) {
  const Forced f = forced_actions(inst, tour);
  Tape tape;
  const auto vars = constant_vars(tape, params);
  std::size_t cursor = 0;
  const DecodeOutput out = decode(tape, params, vars, inst, {f.start}, forced_chooser(f, cursor), nullptr);
  return out.logprob.valid() ? out.logprob.value()[0] : 0.0;
}

LogProbGrad logprob_and_grad(const PolicyParams& params, const AnyInstance& inst, const Tour& tour) {
  const Forced f = forced_actions(inst, tour);
  Tape tape;
  const auto vars = variable_vars(tape, params);
  std::size_t cursor = 0;
  const DecodeOutput out = decode(tape, params, vars, inst, {f.start}, forced_chooser(f, cursor), nullptr);
  LogProbGrad result;
  result.grads = zeros_like(params.tensors());
  if (!out.logprob.valid()) return result;
  const Var lp = nn::sum(out.logprob);
  result.logprob = lp.value().item();
  tape.backward(lp);
  for (std::size_t i = 0; i < vars.size(); ++i) result.grads[i] += tape.grad(vars[i].id());
  return result;
}

DecodeTrace trace_decode(const PolicyParams& params, const AnyInstance& inst, const Tour& tour) {
  const Forced f = forced_actions(inst, tour);
  Tape tape;
  const auto vars = constant_vars(tape, params);
  std::size_t cursor = 0;
  DecodeTrace trace;
  decode(tape, params, vars, inst, {f.start}, forced_chooser(f, cursor), &trace);
  return trace;
}

}  // namespace droute
