// Acceptance suite: exact property checks plus desk-scale reproductions on the
// point-lift task family. One PASS/FAIL line per criterion; exit code 1 when
// any selected criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "../test_util.hpp"
#include "imitlab/harness.hpp"
#include "imitlab/kernels.hpp"

using namespace imitlab;
using testing::numeric_gradient;
using testing::relative_error;

#ifndef IMITLAB_SOURCE_DIR
#define IMITLAB_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Mat random_mat(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

std::vector<int> random_hidden(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(3, 8), depth(1, 2);
  std::vector<int> h(depth(rng));
  for (auto& w : h) w = width(rng);
  return h;
}

Vec random_probs(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = u(rng);
  return p / p.sum();
}

double fd_error(const Network& net, const std::vector<double>& analytic,
                const std::function<double(const Network&)>& loss) {
  return relative_error(analytic, numeric_gradient(testing::as_function_of_params(net, loss),
                                                   net.flat_parameters(), 1e-5));
}

// ---------------------------------------------------------------------------
// 1. analytic gradients against central differences

Outcome criterion_gradients() {
  constexpr int kNets = 20;
  std::mt19937_64 rng(101);
  std::map<std::string, double> worst;
  std::uniform_int_distribution<int> dim_d(2, 6), batch_d(2, 6);
  for (int n = 0; n < kNets; ++n) {
    const int dim = dim_d(rng), batch = batch_d(rng);

    Discriminator d = make_discriminator(dim, random_hidden(rng), 1000 + n);
    const Mat e = random_mat(batch, dim, rng), a = random_mat(batch, dim, rng, 1.5);
    const Mat ce = random_mat(batch, dim, rng), ca = random_mat(batch, dim, rng);
    auto g_loss = [&](const Network& net) {
      Discriminator w{net, d.eps, {}};
      return gail_term(w, e, a);
    };
    worst["gail_term"] = std::max(worst["gail_term"], fd_error(d.net, gail_gradient(d, e, a).grad.flat(), g_loss));
    for (bool ind : {true, false}) {
      const DiscBatch b{e, a, ce, ca};
      auto t_loss = [&](const Network& net) {
        Discriminator w{net, d.eps, {}};
        const double g = gail_term(w, e, a);
        return ind ? g - gail_term(w, ce, ca) : g;
      };
      worst["trail_loss"] = std::max(worst["trail_loss"], fd_error(d.net, trail_gradient(d, b, &ind).grad.flat(), t_loss));
    }

    const int bins = 5 + n % 7;
    const Network critic = init_network([&] {
      std::vector<int> s{dim + kActionDim};
      for (int h : random_hidden(rng)) s.push_back(h);
      s.push_back(bins);
      return s;
    }(), Head::kSoftmaxLogits, 2000 + n, 1.5);
    const Mat obs = random_mat(batch, dim, rng), act = random_mat(batch, kActionDim, rng, 0.5);
    Mat target(batch, bins);
    for (int r = 0; r < batch; ++r) target.row(r) = random_probs(bins, rng).transpose();
    Gradients cg;
    critic_loss(critic, obs, act, target, &cg);
    worst["critic_loss"] = std::max(worst["critic_loss"], fd_error(critic, cg.flat(), [&](const Network& net) {
      return critic_loss(net, obs, act, target);
    }));

    const Support sup = Support::make(-10.0, 20.0, bins);
    const Network policy = make_policy(dim, random_hidden(rng), 3000 + n);
    Gradients pg;
    policy_objective(policy, critic, sup, obs, &pg);
    worst["policy_objective"] = std::max(worst["policy_objective"], fd_error(policy, pg.flat(), [&](const Network& net) {
      return policy_objective(net, critic, sup, obs);
    }));

    Gradients bg;
    bc_loss(policy, obs, act, &bg);
    worst["bc_loss"] = std::max(worst["bc_loss"], fd_error(policy, bg.flat(), [&](const Network& net) {
      return bc_loss(net, obs, act);
    }));
  }
  Outcome o;
  o.pass = true;
  for (const auto& [name, err] : worst) {
    o.pass = o.pass && err <= 1e-4;
    o.detail += name + " " + fmt("%.2e", err) + "  ";
  }
  o.detail += "(max relative error over " + std::to_string(kNets) + " nets each)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. categorical projection against a per-atom brute force

Vec brute_force_project(const Support& sup, const Vec& shifted, const Vec& probs) {
  Vec out = Vec::Zero(sup.bins);
  const double dz = (sup.v_max - sup.v_min) / (sup.bins - 1);
  for (Eigen::Index j = 0; j < shifted.size(); ++j) {
    const double x = std::min(sup.v_max, std::max(sup.v_min, shifted[j]));
    for (int i = 0; i < sup.bins; ++i) {
      const double w = 1.0 - std::abs(x - (sup.v_min + i * dz)) / dz;
      if (w > 0.0) out[i] += w * probs[j];
    }
  }
  return out;
}

Outcome criterion_projection() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Support sup = Support::make(-50.0, 150.0, 21);
  double worst = 0.0, worst_mean = 0.0;
  int unclamped = 0;
  for (int c = 0; c < 1000; ++c) {
    const double r = 80.0 * (u(rng) - 0.5), gamma = u(rng);
    const Vec p = random_probs(sup.bins, rng);
    const Vec shifted = (r + gamma * sup.atoms.array()).matrix();
    const Vec out = project(sup, shifted, p);
    worst = std::max(worst, (out - brute_force_project(sup, shifted, p)).cwiseAbs().maxCoeff());
    if (shifted.minCoeff() >= sup.v_min && shifted.maxCoeff() <= sup.v_max) {
      ++unclamped;
      worst_mean = std::max(worst_mean, std::abs(mean_value(sup, out) - shifted.dot(p)));
    }
  }
  Outcome o;
  o.pass = worst <= 1e-12 && worst_mean <= 1e-9 && unclamped > 0;
  o.detail = "max |diff| " + fmt("%.2e", worst) + ", max mean drift " + fmt("%.2e", worst_mean) + " over " +
             std::to_string(unclamped) + " unclamped of 1000 cases";
  return o;
}

// ---------------------------------------------------------------------------
// 3. trail_loss == gail_term whenever the constraint accuracy is below 1/2

Outcome criterion_identity() {
  std::mt19937_64 rng(303);
  int below = 0, mismatches = 0, above = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int dim = 3 + trial % 4, n = 4 + trial % 9;
    Discriminator d = make_discriminator(dim, {6}, 500 + trial);
    const Mat pool = random_mat(4 * n, dim, rng);
    const Vec s = scores(d, pool);
    std::vector<Eigen::Index> order(pool.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return s[x] < s[y]; });
    // Centre the output bias on the pool median so both labels occur.
    const double med = s[order[2 * n]];
    d.net.layer(d.net.num_layers() - 1).bias[0] -= std::log(med / (1.0 - med));
    // Adversarial mislabeling: expert rows from the low-score end, agent rows
    // from the high-score end, with `flip` rows swapped back.
    const int flip = trial % std::max(1, n / 2);
    std::vector<Vec> ce, ca;
    for (int i = 0; i < n; ++i) {
      const bool swap = i < flip;
      ce.push_back(pool.row(order[swap ? order.size() - 1 - i : i]).transpose());
      ca.push_back(pool.row(order[swap ? i : order.size() - 1 - i]).transpose());
    }
    const DiscBatch b{random_mat(n, dim, rng), random_mat(n, dim, rng, 1.3), stack_rows(ce), stack_rows(ca)};
    const TrailValue v = trail_loss(d, b);
    if (v.accuracy < 0.5) {
      ++below;
      if (v.value != gail_term(d, b.s_expert, b.s_agent) || v.indicator) ++mismatches;
    } else {
      ++above;
    }
  }
  Outcome o;
  o.pass = mismatches == 0 && below >= 100;
  o.detail = std::to_string(below) + " batches below 1/2 accuracy, " + std::to_string(mismatches) +
             " not bit-identical (" + std::to_string(above) + " at or above 1/2 skipped)";
  return o;
}

// ---------------------------------------------------------------------------
// 4. constant discriminator

Outcome criterion_constant() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  bool acc_exact = true;
  for (int N : {1, 2, 7, 64, 256, 1000}) {
    Discriminator d = make_discriminator(5, {8, 8}, N);
    d.net.set_flat_parameters(std::vector<double>(d.net.parameter_count(), 0.0));
    const Mat e = random_mat(N, 5, rng), a = random_mat(N, 5, rng);
    const double g = gail_term(d, e, a);
    worst = std::max(worst, std::abs(g - (-2.0 * N * std::log(2.0))));
    acc_exact = acc_exact && accuracy(d, e, a) == 0.5 && accuracy(d, a, e) == 0.5;
  }
  Outcome o;
  o.pass = worst == 0.0 && acc_exact;
  o.detail = "max |G + 2N ln 2| " + fmt("%.1e", worst) + " for N up to 1000, accuracy exactly 0.5: " +
             (acc_exact ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 5. spuriousness certificate of the early-frame sets

Outcome criterion_certificate(const ExperimentConfig& desk) {
  ExperimentConfig c = desk;
  c.task = TaskPreset::kLiftDistracted;
  const TaskEnvs envs = make_task_envs(c);
  const DemoSets demos = load_or_collect_demos(c, envs.expert);
  const auto expert = build_early_frames(demos.train, c.constraint.early_frames);
  // Agent side: early frames of uniform-random rollouts on fresh layouts.
  Rng rng(mix_seed(0, 5));
  std::vector<ConstrainingFrame> agent;
  for (int e = 0; e < c.num_demos; ++e) {
    const auto frames = random_policy_frames(envs.agent, 1, rng, 10000000 + e);
    for (int i = 0; i < c.constraint.early_frames; ++i) agent.push_back(frames[i]);
  }
  const ObservationLayout layout = observation_layout(envs.agent);
  ProbeOptions restricted;
  restricted.repeats = 10;
  restricted.split = ProbeSplit::kByEpisode;
  const double task_acc = probe_accuracy(expert, agent, {layout.task}, restricted);
  ProbeOptions full = restricted;
  full.split = ProbeSplit::kByFrame;
  full.repeats = 3;
  const double all_acc = probe_accuracy(expert, agent, layout.groups(), full);
  Outcome o;
  o.pass = task_acc <= 0.55 && all_acc >= 0.9;
  o.detail = "task group (held-out episodes) " + fmt("%.3f", task_acc) + ", all groups (shared layouts) " +
             fmt("%.3f", all_acc);
  return o;
}

// ---------------------------------------------------------------------------
// 10. actor early stopping

Outcome criterion_aes() {
  std::vector<std::string> failures;
  StoppingState fixed(StopSpec::parse("fixed:50"));
  for (int s = 1; s <= 50; ++s) {
    if (fixed.should_stop(0.5, s) != (s == 50)) failures.push_back("fixed@" + std::to_string(s));
    if (s == 50) break;
  }
  auto first_stop = [](StoppingState st, const std::vector<double>& scores) {
    st.reset();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (st.should_stop(scores[i], static_cast<int>(i) + 1)) return static_cast<int>(i) + 1;
    }
    return -1;
  };
  auto decisions = [](StoppingState st, const std::vector<double>& scores) {
    st.reset();
    std::vector<bool> d;
    for (std::size_t i = 0; i < scores.size(); ++i) d.push_back(st.should_stop(scores[i], static_cast<int>(i) + 1));
    return d;
  };
  const StoppingState adaptive(StopSpec::parse("adaptive"));
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int earliest = 1 << 30;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(200);
    double x = 0.0;
    for (auto& v : s) v = trial % 2 ? (x += u(rng)) : u(rng);
    const int st = first_stop(adaptive, s);
    if (st > 0) earliest = std::min(earliest, st);
  }
  if (earliest < 11) failures.push_back("fired at step " + std::to_string(earliest));
  for (double c : {0.0, 0.3, 1.0}) {
    if (first_stop(adaptive, std::vector<double>(200, c)) != -1) failures.push_back("constant scores stopped");
  }
  std::vector<double> seq(20, 0.1);
  seq.insert(seq.end(), 40, 0.9);
  const int traced = first_stop(adaptive, seq);
  if (traced != 30) failures.push_back("0.1/0.9 stopped at " + std::to_string(traced));
  int maps_ok = 0;
  for (int m = 0; m < 100; ++m) {
    const double a = 0.1 + 4.0 * u(rng), b = 5.0 * (u(rng) - 0.5), p = 0.3 + 2.5 * u(rng);
    std::vector<double> s(150), t(150);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::min(1.0, 0.6 * u(rng) + 0.5 * static_cast<double>(i) / 150.0);
      t[i] = a * std::pow(s[i], p) + b + std::exp(s[i]);
    }
    if (decisions(adaptive, s) == decisions(adaptive, t)) ++maps_ok;
  }
  if (maps_ok != 100) failures.push_back(std::to_string(100 - maps_ok) + " monotone maps changed decisions");
  Outcome o;
  o.pass = failures.empty();
  o.detail = "fixed(50) at 50, earliest adaptive stop " + std::to_string(earliest) + ", hand trace stop " +
             std::to_string(traced) + ", monotone maps invariant " + std::to_string(maps_ok) + "/100";
  for (const auto& f : failures) o.detail += "; " + f;
  return o;
}

// ---------------------------------------------------------------------------
// Training runs shared by the reproduction criteria.

struct RunSummary {
  double best = 0.0;        // best eval point over the run
  double final_eval = 0.0;  // final policy over `final_episodes` fresh episodes
  double gap = 0.0;         // |D(train demos) - D(holdout demos)|
  bool ok = false;
  std::string error;
};

class Runs {
 public:
  Runs(ExperimentConfig desk, std::vector<std::uint64_t> seeds, fs::path out, int final_episodes)
      : desk_(std::move(desk)), seeds_(std::move(seeds)), out_(std::move(out)), final_episodes_(final_episodes) {}

  const std::vector<std::uint64_t>& seeds() const { return seeds_; }

  // Overrides are config keys applied on top of the desk preset.
  const std::vector<RunSummary>& get(const std::string& name, const nlohmann::json& overrides) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    std::vector<RunSummary> out;
    for (auto seed : seeds_) {
      ExperimentConfig c = config_from_json(overrides, desk_);
      c.seed = seed;
      c.single_thread = true;
      RunSummary r;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const TrainResult tr = train(c, {out_ / name / ("seed" + std::to_string(seed)), nullptr});
        for (const auto& row : tr.metrics) r.best = std::max(r.best, row.eval_return_mean);
        Rng rng(mix_seed(seed, 77));
        r.final_eval = evaluate(tr.nets.policy, make_task_envs(c).eval, final_episodes_, rng).mean;
        r.gap = tr.probe.gap();
        r.ok = true;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("  run %-22s seed %llu  best %6.1f  final %6.1f  gap %.4f  (%.0f s)%s%s\n", name.c_str(),
                  static_cast<unsigned long long>(seed), r.best, r.final_eval, r.gap, secs,
                  r.ok ? "" : "  error: ", r.error.c_str());
      std::fflush(stdout);
      out.push_back(r);
    }
    return cache_[name] = out;
  }

 private:
  ExperimentConfig desk_;
  std::vector<std::uint64_t> seeds_;
  fs::path out_;
  int final_episodes_;
  std::map<std::string, std::vector<RunSummary>> cache_;
};

double mean_of(const std::vector<RunSummary>& rs, double RunSummary::*field) {
  double s = 0.0;
  for (const auto& r : rs) s += r.*field;
  return rs.empty() ? 0.0 : s / rs.size();
}

int count_if(const std::vector<RunSummary>& rs, const std::function<bool(const RunSummary&)>& f) {
  return static_cast<int>(std::count_if(rs.begin(), rs.end(), f));
}

std::string list(const std::vector<RunSummary>& rs, double RunSummary::*field, const char* f = "%.1f") {
  std::string s;
  for (const auto& r : rs) s += (s.empty() ? "" : "/") + fmt(f, r.*field);
  return s;
}

const nlohmann::json kTrailDistracted = {{"task", "lift_distracted"}, {"method", "trail"}};
const nlohmann::json kGailDistracted = {{"task", "lift_distracted"}, {"method", "gail"}};
const nlohmann::json kGailAesDistracted = {{"task", "lift_distracted"}, {"method", "gail_aes"}};
const nlohmann::json kGailAesSeeded = {{"task", "lift_distracted_seeded"}, {"method", "gail_aes"}};
const nlohmann::json kOracleDistracted = {{"task", "lift_distracted"}, {"method", "gail"}, {"reward_provider", "oracle"}};
const nlohmann::json kOracleLift = {{"task", "lift"}, {"method", "gail"}, {"reward_provider", "oracle"}};
const nlohmann::json kTrailLift = {{"task", "lift"}, {"method", "trail"}};

nlohmann::json trail_k(int k) {
  nlohmann::json j = kTrailDistracted;
  j["constraint_strategy"] = "early:" + std::to_string(k);
  return j;
}

int majority(const Runs& runs) { return static_cast<int>(runs.seeds().size() / 2 + 1); }

Outcome criterion_reproduction(Runs& runs, double expert) {
  const auto& trail = runs.get("trail_distracted", kTrailDistracted);
  const auto& gail = runs.get("gail_distracted", kGailDistracted);
  const int t_ok = count_if(trail, [&](const RunSummary& r) { return r.ok && r.best >= 0.7 * expert; });
  const int g_ok = count_if(gail, [&](const RunSummary& r) { return r.ok && r.best <= 0.3 * expert; });
  Outcome o;
  o.pass = t_ok >= majority(runs) && g_ok >= majority(runs);
  o.detail = "expert " + fmt("%.1f", expert) + "; TRAIL best " + list(trail, &RunSummary::best) + " (" +
             std::to_string(t_ok) + " >= 70%); GAIL best " + list(gail, &RunSummary::best) + " (" +
             std::to_string(g_ok) + " <= 30%)";
  return o;
}

Outcome criterion_seeded(Runs& runs) {
  const auto& plain = runs.get("gail_aes_distracted", kGailAesDistracted);
  const auto& seeded = runs.get("gail_aes_seeded", kGailAesSeeded);
  const double p = mean_of(plain, &RunSummary::final_eval), s = mean_of(seeded, &RunSummary::final_eval);
  Outcome o;
  o.pass = s >= 2.0 * p && s > 0.0;
  o.detail = "GAIL+AES final: seeded " + list(seeded, &RunSummary::final_eval) + " (mean " + fmt("%.1f", s) +
             ") vs distracted " + list(plain, &RunSummary::final_eval) + " (mean " + fmt("%.1f", p) + ")";
  return o;
}

Outcome criterion_gap(Runs& runs) {
  const auto& trail = runs.get("trail_distracted", kTrailDistracted);
  const auto& aes = runs.get("gail_aes_distracted", kGailAesDistracted);
  int ok = 0;
  for (std::size_t i = 0; i < trail.size(); ++i) {
    if (trail[i].ok && aes[i].ok && trail[i].gap < 0.5 * aes[i].gap) ++ok;
  }
  Outcome o;
  o.pass = ok >= majority(runs);
  o.detail = "D train/holdout gap: TRAIL " + list(trail, &RunSummary::gap, "%.4f") + " vs GAIL+AES " +
             list(aes, &RunSummary::gap, "%.4f") + " (" + std::to_string(ok) + " seeds below half)";
  return o;
}

Outcome criterion_oracle(Runs& runs, double expert) {
  const auto& od = runs.get("oracle_distracted", kOracleDistracted);
  const auto& ol = runs.get("oracle_lift", kOracleLift);
  const auto& tl = runs.get("trail_lift", kTrailLift);
  const double d = mean_of(od, &RunSummary::final_eval);
  const double l = mean_of(ol, &RunSummary::final_eval), t = mean_of(tl, &RunSummary::final_eval);
  Outcome o;
  o.pass = d <= 0.1 * expert && l < t;
  o.detail = "oracle final on distracted " + list(od, &RunSummary::final_eval) + " (mean " + fmt("%.1f", d) +
             ", bound " + fmt("%.1f", 0.1 * expert) + "); on lift " + fmt("%.1f", l) + " vs TRAIL " + fmt("%.1f", t);
  return o;
}

Outcome criterion_early_frames(Runs& runs, double expert) {
  Outcome o;
  o.pass = true;
  std::map<int, double> mean_best;
  for (int k : {1, 10, 20, 100}) {
    const auto& rs = k == 10 ? runs.get("trail_distracted", kTrailDistracted)
                             : runs.get("trail_k" + std::to_string(k), trail_k(k));
    const int ok = count_if(rs, [&](const RunSummary& r) { return r.ok && r.best >= 0.7 * expert; });
    mean_best[k] = mean_of(rs, &RunSummary::best);
    if (k != 100 && ok < majority(runs)) o.pass = false;
    o.detail += "k=" + std::to_string(k) + " best " + list(rs, &RunSummary::best) + "; ";
  }
  const double drop = 1.0 - mean_best[100] / mean_best[10];
  if (drop < 0.2) o.pass = false;
  o.detail += "relative drop at k=100 " + fmt("%.0f%%", 100.0 * drop);
  return o;
}

// ---------------------------------------------------------------------------
// 12. determinism of single-thread training

Outcome criterion_determinism(const ExperimentConfig& desk, const fs::path& out) {
  ExperimentConfig c = config_from_json(kTrailDistracted, desk);
  c.single_thread = true;
  c.train_steps = 1500;
  c.eval_every = 500;
  c.seed = 3;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  train(c, {out / "determinism_a", nullptr});
  train(c, {out / "determinism_b", nullptr});
  const std::string a = slurp(out / "determinism_a" / "metrics.csv");
  const std::string b = slurp(out / "determinism_b" / "metrics.csv");
  Outcome o;
  o.pass = !a.empty() && a == b;
  o.detail = std::to_string(a.size()) + " bytes, identical: " + (a == b ? "yes" : "no");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"imitlab acceptance suite"};
  std::string only, seeds_text = "0,1,2", config_path = std::string(IMITLAB_SOURCE_DIR) + "/configs/desk.json";
  std::string out_dir = (fs::temp_directory_path() / "imitlab_acceptance").string();
  long train_steps = 0;
  int final_episodes = 50;
  app.add_option("--only", only, "comma-separated criterion numbers (default: all)");
  app.add_option("--seeds", seeds_text, "seeds for the training criteria");
  app.add_option("--config", config_path, "desk-scale base config");
  app.add_option("--out", out_dir, "directory for run artifacts");
  app.add_option("--train-steps", train_steps, "override the training budget");
  app.add_option("--final-episodes", final_episodes, "episodes for the final-policy evaluation");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  for (std::size_t pos = 0; pos < only.size();) {
    const auto comma = only.find(',', pos);
    selected.insert(std::stoi(only.substr(pos, comma - pos)));
    pos = comma == std::string::npos ? only.size() : comma + 1;
  }
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  std::vector<std::uint64_t> seeds;
  for (std::size_t pos = 0; pos < seeds_text.size();) {
    const auto comma = seeds_text.find(',', pos);
    seeds.push_back(std::stoull(seeds_text.substr(pos, comma - pos)));
    pos = comma == std::string::npos ? seeds_text.size() : comma + 1;
  }

  ExperimentConfig desk;
  try {
    desk = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load %s: %s\n", config_path.c_str(), e.what());
    return 2;
  }
  if (train_steps > 0) desk.train_steps = train_steps;
  fs::create_directories(out_dir);

  ExperimentConfig expert_cfg = desk;
  expert_cfg.task = TaskPreset::kLiftDistracted;
  Rng expert_rng(mix_seed(0, 78));
  const double expert = evaluate_expert(make_task_envs(expert_cfg).eval, 50, expert_rng).mean;
  Runs runs(desk, seeds, out_dir, final_episodes);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion_gradients},
      {2, criterion_projection},
      {3, criterion_identity},
      {4, criterion_constant},
      {5, [&] { return criterion_certificate(desk); }},
      {6, [&] { return criterion_reproduction(runs, expert); }},
      {7, [&] { return criterion_seeded(runs); }},
      {8, [&] { return criterion_gap(runs); }},
      {9, [&] { return criterion_oracle(runs, expert); }},
      {10, criterion_aes},
      {11, [&] { return criterion_early_frames(runs, expert); }},
      {12, [&] { return criterion_determinism(desk, out_dir); }},
  };
  int failed = 0;
  std::vector<std::string> lines;
  for (const auto& [id, run] : criteria) {
    if (!wanted(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char head[64];
    std::snprintf(head, sizeof head, "criterion %2d: %s (%.1f s) ", id, o.pass ? "PASS" : "FAIL", secs);
    lines.push_back(head + o.detail);
    std::printf("%s\n", lines.back().c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  std::printf("%d of %zu selected criteria failed\n", failed, lines.size());
  return failed == 0 ? 0 : 1;
}
