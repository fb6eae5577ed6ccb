#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "droute/error.hpp"
#include "droute/solvers.hpp"
#include "droute/trainer.hpp"

using namespace droute;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

GroupedDataset two_groups(std::size_t n0, std::size_t n1, std::size_t count = 12) {
  std::vector<GroupSpec> specs(2);
  specs[0] = {DistributionSpec{}, count, n0, 1, std::nullopt};
  specs[1] = {DistributionSpec{DistributionKind::cluster}, count, n1, 2, std::nullopt};
  return build_group_dataset(specs);
}

GroupedDataset one_group(std::size_t n = 8) {
  std::vector<GroupSpec> specs{{DistributionSpec{}, 10, n, 4, std::nullopt}};
  return build_group_dataset(specs);
}

TrainConfig small_config(std::size_t steps) {
  TrainConfig cfg;
  cfg.policy = PolicyConfig::desk(ProblemType::tsp);
  cfg.policy.embed_dim = 16;
  cfg.policy.heads = 2;
  cfg.policy.ff_dim = 16;
  cfg.lr = 1e-3;
  cfg.outer_steps = steps;
  cfg.batch_size = 3;
  cfg.seed = 17;
  return cfg;
}

TrainState single_param_state(double theta) {
  TrainState s;
  s.params = PolicyParams::zeros(PolicyConfig::desk(ProblemType::tsp));
  s.params.tensors()[0][0] = theta;
  s.momentum = zeros_like(s.params.tensors());
  return s;
}

std::vector<Tensor> unit_grad(const TrainState& s, double g) {
  auto grad = zeros_like(s.params.tensors());
  grad[0][0] = g;
  return grad;
}

}  // namespace

TEST(GroupWeights, UniformAndProportional) {
  EXPECT_EQ(GroupWeights::uniform(4).q, std::vector<double>(4, 0.25));
  const auto p = GroupWeights::proportional(two_groups(5, 5, 12));
  EXPECT_NEAR(p.q[0], 0.5, 1e-15);
  std::vector<GroupSpec> specs(2);
  specs[0] = {DistributionSpec{}, 30, 5, 1, std::nullopt};
  specs[1] = {DistributionSpec{}, 10, 5, 2, std::nullopt};
  const auto q = GroupWeights::proportional(build_group_dataset(specs));
  EXPECT_DOUBLE_EQ(q.q[0], 0.75);
  EXPECT_NO_THROW(q.validate());
  EXPECT_THROW((GroupWeights{{0.6, 0.6}}).validate(), ContractError);
}

TEST(Reinforce, AdvantagesAndBaseline) {
  RolloutBatch b;
  b.tours.resize(2);
  b.lengths = {4.0, 6.0};
  b.logprobs = {-1.0, -2.0};
  EXPECT_DOUBLE_EQ(shared_baseline(b), 5.0);
  const ReinforceLoss l = reinforce_loss(b, 5.0);
  EXPECT_EQ(l.advantages, (std::vector<double>{-1.0, 1.0}));
  EXPECT_DOUBLE_EQ(l.loss, 0.0);
  EXPECT_DOUBLE_EQ(l.mean_length, 5.0);

  b.lengths = {3.0, 5.0};
  EXPECT_DOUBLE_EQ(shared_baseline(b), 4.0);
  EXPECT_THROW(reinforce_loss(RolloutBatch{}, 1.0), ContractError);
  EXPECT_THROW(reinforce_loss(b, std::nan("")), ContractError);
}

TEST(Reinforce, SingleStartHasZeroGradient) {
  const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 1);
  const AnyInstance inst = generate(DistributionSpec{}, 8, 3);
  const InstanceGradient g = reinforce_gradient(p, inst, 1, 5);
  for (const auto& t : g.grad) EXPECT_EQ(t, Tensor(t.shape(), 0.0));
  EXPECT_GT(g.loss, 0.0);
}

TEST(Reinforce, BaselineReducesGradientVariance) {
  const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 2);
  const AnyInstance inst = generate(DistributionSpec{}, 10, 6);
  auto variance = [&](bool use_baseline) {
    std::vector<double> sum(p.parameter_count(), 0.0), sum2(p.parameter_count(), 0.0);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto g = reinforce_gradient(p, inst, 8, s, use_baseline);
      std::size_t k = 0;
      for (const auto& t : g.grad) {
        for (const double v : t.data()) {
          sum[k] += v;
          sum2[k] += v * v;
          ++k;
        }
      }
    }
    double total = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) total += sum2[k] / 100 - (sum[k] / 100) * (sum[k] / 100);
    return total;
  };
  EXPECT_LT(variance(true), variance(false));
}

TEST(Reinforce, OneStepDescendsExpectedLength) {
  int improved = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 100 + trial);
    const AnyInstance inst = generate(DistributionSpec{}, 10, 200 + trial);
    auto expected_length = [&](const PolicyParams& params) {
      double s = 0.0;
      for (std::uint64_t k = 0; k < 40; ++k) {
        const auto b = rollout(params, inst, {DecodeMode::sample, 8, 1000 + k});
        for (const double l : b.lengths) s += l;
      }
      return s / 320.0;
    };
    TrainConfig cfg;
    cfg.lr = 0.05;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    auto grad = zeros_like(p.tensors());
    for (std::uint64_t k = 0; k < 16; ++k) {
      const auto g = reinforce_gradient(p, inst, 8, 50 + k);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g.grad[i];
    }
    for (auto& g : grad) g *= 1.0 / 16;
    TrainState s;
    s.params = p;
    s.momentum = zeros_like(p.tensors());
    sgd_step(s, grad, 1.0, cfg);
    improved += expected_length(s.params) < expected_length(p);
  }
  EXPECT_GE(improved, 16);
}

TEST(Sgd, PlainStepZeroWeightAndMomentumClosedForm) {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  TrainState s = single_param_state(1.0);
  sgd_step(s, unit_grad(s, 2.0), 1.0, cfg);
  EXPECT_DOUBLE_EQ(s.params.tensors()[0][0], 1.0 - 0.1 * 2.0);

  TrainState z = single_param_state(1.0);
  sgd_step(z, unit_grad(z, 2.0), 0.0, cfg);
  EXPECT_EQ(z.params.tensors()[0][0], 1.0);

  cfg.momentum = 0.9;
  TrainState m = single_param_state(0.0);
  const double q = 0.3, g = 2.0;
  sgd_step(m, unit_grad(m, g), q, cfg);
  sgd_step(m, unit_grad(m, g), q, cfg);
  EXPECT_NEAR(-m.params.tensors()[0][0], 0.1 * q * g * (1.0 + 1.9), 1e-15);
}

TEST(Sgd, WeightDecayAndNanAbort) {
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.5;
  TrainState s = single_param_state(2.0);
  sgd_step(s, unit_grad(s, 0.0), 1.0, cfg);
  EXPECT_DOUBLE_EQ(s.params.tensors()[0][0], 2.0 - 0.1 * 0.5 * 2.0);
  TrainState before = s;
  EXPECT_THROW(sgd_step(s, unit_grad(s, std::nan("")), 1.0, cfg), NumericalAbort);
  EXPECT_EQ(s.params, before.params);
}

TEST(EgUpdate, ExponentiatesOnlyTheSampledGroup) {
  GroupWeights q{{0.5, 0.5}};
  eg_update(q, 0, 1.0, 0.1);
  const double e = std::exp(0.1);
  // e^0.1 / (e^0.1 + 1); a commonly quoted 0.52625 does not follow from it.
  EXPECT_NEAR(q.q[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(q.q[0], 0.524979, 1e-6);
  EXPECT_NEAR(q.q[1], 0.475021, 1e-6);

  GroupWeights u{{0.2, 0.3, 0.5}};
  eg_update(u, 1, 0.0, 0.1);
  EXPECT_EQ(u.q, (std::vector<double>{0.2, 0.3, 0.5}));
}

TEST(EgUpdate, MonotoneTowardOneAndOverflowSafe) {
  GroupWeights q = GroupWeights::uniform(3);
  double prev = q.q[0];
  for (int i = 0; i < 500; ++i) {
    eg_update(q, 0, 2.0, 0.05);
    EXPECT_GE(q.q[0], prev);
    prev = q.q[0];
  }
  EXPECT_GT(q.q[0], 0.999);

  GroupWeights big = GroupWeights::uniform(2);
  eg_update(big, 1, 1e6, 1.0);
  EXPECT_EQ(big.q[1], 1.0);
  EXPECT_EQ(big.q[0], 0.0);
  EXPECT_THROW(eg_update(big, 0, std::numeric_limits<double>::infinity(), 1.0), NumericalAbort);

  GroupWeights one = GroupWeights::uniform(1);
  eg_update(one, 0, 3.7, 0.1);
  EXPECT_EQ(one.q, std::vector<double>{1.0});
}

TEST(Train, SingleGroupDroEqualsErm) {
  const auto ds = one_group();
  TrainConfig cfg = small_config(8);
  const PolicyParams init = PolicyParams::init(cfg.policy, 1);
  const TrainState dro = train(cfg, ds, init);
  const TrainState erm = erm_train(cfg, ds, init);
  EXPECT_EQ(dro.q.q, std::vector<double>{1.0});
  EXPECT_EQ(dro.params, erm.params);
  EXPECT_EQ(dro.momentum, erm.momentum);
  EXPECT_FALSE(dro.params == init);
}

TEST(Train, HarderGroupGainsWeight) {
  // Group 1 has 3x the nodes, so its tours are much longer.
  const auto ds = two_groups(5, 15, 8);
  TrainConfig cfg = small_config(30);
  cfg.group_lr = 0.05;
  const TrainState s = train(cfg, ds, PolicyParams::init(cfg.policy, 2));
  EXPECT_GT(s.q.q[1], s.q.q[0]);
  EXPECT_EQ(s.history.size(), 30u);
  EXPECT_NEAR(s.q.q[0] + s.q.q[1], 1.0, 1e-12);
}

TEST(Train, ErmKeepsProportionalWeights) {
  std::vector<GroupSpec> specs(2);
  specs[0] = {DistributionSpec{}, 9, 6, 1, std::nullopt};
  specs[1] = {DistributionSpec{DistributionKind::grid}, 3, 6, 2, std::nullopt};
  const auto ds = build_group_dataset(specs);
  TrainConfig cfg = small_config(5);
  const TrainState s = erm_train(cfg, ds, PolicyParams::init(cfg.policy, 2));
  EXPECT_EQ(s.q.q, (std::vector<double>{0.75, 0.25}));
}

TEST(Train, DeterministicAndThreadIndependent) {
  const auto ds = two_groups(6, 7);
  TrainConfig cfg = small_config(6);
  const PolicyParams init = PolicyParams::init(cfg.policy, 3);
  const TrainState a = train(cfg, ds, init);
  const TrainState b = train(cfg, ds, init);
  cfg.threads = 3;
  const TrainState c = train(cfg, ds, init);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.params, c.params);
  EXPECT_EQ(a.q.q, c.q.q);
}

TEST(Train, ResumeIsBitExact) {
  const auto ds = two_groups(6, 7);
  TrainConfig cfg = small_config(10);
  const PolicyParams init = PolicyParams::init(cfg.policy, 4);
  const TrainState full = train(cfg, ds, init);

  const fs::path path = fs::temp_directory_path() / "droute_resume_test.ckpt";
  TrainHooks hooks;
  hooks.stop_after = 4;
  save_train_state(path, train(cfg, ds, init, hooks));
  const TrainState resumed = resume_training(load_train_state(path), cfg, ds);
  fs::remove(path);

  EXPECT_EQ(resumed.params, full.params);
  EXPECT_EQ(resumed.momentum, full.momentum);
  EXPECT_EQ(resumed.q.q, full.q.q);
  EXPECT_EQ(resumed.outer_step, full.outer_step);
  ASSERT_EQ(resumed.history.size(), full.history.size());
  for (std::size_t i = 0; i < full.history.size(); ++i) {
    EXPECT_EQ(resumed.history[i].group, full.history[i].group);
    EXPECT_EQ(resumed.history[i].loss, full.history[i].loss);
  }
}

TEST(Train, PeriodicCheckpointsAndLogRows) {
  const auto ds = two_groups(5, 6);
  TrainConfig cfg = small_config(4);
  cfg.checkpoint_every = 2;
  const fs::path path = fs::temp_directory_path() / "droute_periodic.ckpt";
  fs::remove(path);
  std::vector<TrainLogRow> rows;
  TrainHooks hooks;
  hooks.checkpoint_path = path;
  hooks.on_step = [&](const TrainLogRow& r) { rows.push_back(r); };
  train(cfg, ds, PolicyParams::init(cfg.policy, 1), hooks);
  ASSERT_TRUE(fs::exists(path));
  EXPECT_EQ(load_train_state(path).outer_step, 4u);
  fs::remove(path);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].step, 4u);
  EXPECT_EQ(train_log_header(2), "t,g,q_0,q_1,batch_loss,grad_norm,wallclock");
  const std::string line = train_log_line({3, 1, {0.25, 0.75}, 2.5, 0.125, 1.5});
  EXPECT_EQ(line, "3,1,0.25,0.75,2.5,0.125,1.500");
}

TEST(Train, NanGradientAbortsWithCheckpoint) {
  const auto ds = one_group(6);
  TrainConfig cfg = small_config(3);
  cfg.mode = TrainMode::supervised;
  PolicyParams init = PolicyParams::init(cfg.policy, 1);
  init.get("dec.key")[0] = std::nan("");
  const fs::path path = fs::temp_directory_path() / "droute_nan.ckpt";
  fs::remove(path);
  TrainHooks hooks;
  hooks.checkpoint_path = path;
  EXPECT_THROW(train(cfg, ds, init, hooks), NumericalAbort);
  EXPECT_TRUE(fs::exists(path));
  fs::remove(path);
}

TEST(Supervised, RandomInitLossCountsChoices) {
  const PolicyParams p = PolicyParams::zeros(PolicyConfig::desk(ProblemType::tsp));
  const Instance inst = generate(DistributionSpec{}, 8, 2);
  const Tour oracle = held_karp(inst);
  const InstanceGradient g = supervised_step(p, inst, oracle);
  double expect = 0.0;
  for (int k = 7; k >= 2; --k) expect += std::log(static_cast<double>(k));
  EXPECT_NEAR(g.loss, expect, 1e-12);
}

TEST(Supervised, OverfittingOneInstanceLowersLossMonotonically) {
  PolicyConfig pc = PolicyConfig::desk(ProblemType::tsp);
  const Instance inst = generate(DistributionSpec{}, 8, 3);
  const Tour oracle = held_karp(inst);
  TrainState s;
  s.params = PolicyParams::init(pc, 5);
  s.momentum = zeros_like(s.params.tensors());
  TrainConfig cfg;
  cfg.lr = 0.002;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  double prev = supervised_step(s.params, inst, oracle).loss;
  for (int step = 0; step < 25; ++step) {
    const InstanceGradient g = supervised_step(s.params, inst, oracle);
    sgd_step(s, g.grad, 1.0, cfg);
    const double now = supervised_step(s.params, inst, oracle).loss;
    EXPECT_LT(now, prev) << "step " << step;
    prev = now;
  }
}

TEST(Supervised, TrainingRunsThroughTheLoop) {
  const auto ds = one_group(7);
  TrainConfig cfg = small_config(4);
  cfg.mode = TrainMode::supervised;
  const TrainState s = train(cfg, ds, PolicyParams::init(cfg.policy, 2));
  EXPECT_EQ(s.outer_step, 4u);
  for (const auto& h : s.history) EXPECT_GT(h.loss, 0.0);
}

TEST(TrainConfig, ParseWriteRoundTrip) {
  TrainConfig cfg = small_config(77);
  cfg.mode = TrainMode::erm;
  cfg.group_sampling = GroupSampling::proportional;
  cfg.normalize_group_loss = true;
  cfg.policy.problem = ProblemType::cvrp;
  std::stringstream ss;
  write_train_config(ss, cfg);
  const TrainConfig back = parse_train_config(ss);
  EXPECT_EQ(back.outer_steps, 77u);
  EXPECT_EQ(back.lr, cfg.lr);
  EXPECT_EQ(back.mode, TrainMode::erm);
  EXPECT_EQ(back.group_sampling, GroupSampling::proportional);
  EXPECT_TRUE(back.normalize_group_loss);
  EXPECT_EQ(back.policy, cfg.policy);
  EXPECT_EQ(back.seed, cfg.seed);
}

TEST(TrainConfig, RejectsBadInput) {
  std::istringstream unknown("lr = 0.1\nwarmup = 3\n");
  EXPECT_THROW(parse_train_config(unknown), ConfigError);
  std::istringstream bad_value("momentum = 1.5\n");
  EXPECT_THROW(parse_train_config(bad_value), ConfigError);
  std::istringstream no_eq("lr 0.1\n");
  EXPECT_THROW(parse_train_config(no_eq), ConfigError);
  std::istringstream comments("# comment\n\nlr = 0.25  # trailing\n");
  EXPECT_EQ(parse_train_config(comments).lr, 0.25);
  EXPECT_EQ(exit_code(ConfigError("x")), 3);
  EXPECT_EQ(exit_code(ParseError("x")), 2);
  EXPECT_EQ(exit_code(NumericalAbort("x")), 4);
}
