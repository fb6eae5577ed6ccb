#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "droute/error.hpp"
#include "droute/trainer.hpp"

namespace droute {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + v);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": " + v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + v);
}

}  // namespace

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string v = trim(std::string_view(body).substr(eq + 1));
    auto sz = [&] { return static_cast<std::size_t>(to_u64(key, v)); };
    if (key == "lr") cfg.lr = to_double(key, v);
    else if (key == "momentum") cfg.momentum = to_double(key, v);
    else if (key == "group_lr") cfg.group_lr = to_double(key, v);
    else if (key == "outer_steps") cfg.outer_steps = sz();
    else if (key == "inner_steps") cfg.inner_steps = sz();
    else if (key == "batch_size") cfg.batch_size = sz();
    else if (key == "weight_decay") cfg.weight_decay = to_double(key, v);
    else if (key == "mode") cfg.mode = parse_train_mode(v);
    else if (key == "seed") cfg.seed = to_u64(key, v);
    else if (key == "starts") cfg.starts = sz();
    else if (key == "group_sampling") {
      if (v == "uniform") cfg.group_sampling = GroupSampling::uniform;
      else if (v == "proportional") cfg.group_sampling = GroupSampling::proportional;
      else throw ConfigError("bad group_sampling: " + v);
    } else if (key == "normalize_group_loss") cfg.normalize_group_loss = to_bool(key, v);
    else if (key == "checkpoint_every") cfg.checkpoint_every = sz();
    else if (key == "threads") cfg.threads = sz();
    else if (key == "problem") {
      if (v == "tsp") cfg.policy.problem = ProblemType::tsp;
      else if (v == "cvrp") cfg.policy.problem = ProblemType::cvrp;
      else throw ConfigError("bad problem: " + v);
    } else if (key == "embed_dim") cfg.policy.embed_dim = sz();
    else if (key == "kernel_size") cfg.policy.kernel_size = sz();
    else if (key == "neighbors") cfg.policy.neighbors = sz();
    else if (key == "layers") cfg.policy.layers = sz();
    else if (key == "heads") cfg.policy.heads = sz();
    else if (key == "ff_dim") cfg.policy.ff_dim = sz();
    else if (key == "logit_clip") cfg.policy.logit_clip = to_double(key, v);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_train_config(in);
}

void write_train_config(std::ostream& out, const TrainConfig& cfg) {
  out.precision(17);
  out << "lr = " << cfg.lr << "\n"
      << "momentum = " << cfg.momentum << "\n"
      << "group_lr = " << cfg.group_lr << "\n"
      << "outer_steps = " << cfg.outer_steps << "\n"
      << "inner_steps = " << cfg.inner_steps << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "weight_decay = " << cfg.weight_decay << "\n"
      << "mode = " << to_string(cfg.mode) << "\n"
      << "seed = " << cfg.seed << "\n"
      << "starts = " << cfg.starts << "\n"
      << "group_sampling = " << (cfg.group_sampling == GroupSampling::uniform ? "uniform" : "proportional") << "\n"
      << "normalize_group_loss = " << (cfg.normalize_group_loss ? "true" : "false") << "\n"
      << "checkpoint_every = " << cfg.checkpoint_every << "\n"
      << "threads = " << cfg.threads << "\n"
      << "problem = " << (cfg.policy.problem == ProblemType::tsp ? "tsp" : "cvrp") << "\n"
      << "embed_dim = " << cfg.policy.embed_dim << "\n"
      << "kernel_size = " << cfg.policy.kernel_size << "\n"
      << "neighbors = " << cfg.policy.neighbors << "\n"
      << "layers = " << cfg.policy.layers << "\n"
      << "heads = " << cfg.policy.heads << "\n"
      << "ff_dim = " << cfg.policy.ff_dim << "\n"
      << "logit_clip = " << cfg.policy.logit_clip << "\n";
}

}  // namespace droute
