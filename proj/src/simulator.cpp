#include "pathwager/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace pathwager {

namespace {

// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ReplicationRng::ReplicationRng(std::uint64_t seed, std::uint64_t stream)
    : engine_(mix64(mix64(seed) ^ stream)) {}

double ReplicationRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t ReplicationRng::sample(std::span<const double> probs) {
  const double u = uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = k;
    if (u < acc) return k;
  }
  // Rounding left u above the cumulative total.
  return last_positive;
}

double apply_payoff(double fortune, std::size_t out_degree, double wager, bool correct) {
  const double stake = fortune * wager;
  if (!correct) return fortune - stake;
  if (out_degree >= 2) return fortune + static_cast<double>(out_degree - 1) * stake;
  return fortune + stake;
}

StepOutcome play_step(const GameGraph& graph, const StrategyProfile& profile, NodeId node,
                      double fortune, ReplicationRng& rng) {
  StepOutcome out;
  out.wager = profile.wagers[node];
  out.guess = rng.sample(profile.guesser[node]);
  out.choice = rng.sample(profile.chooser[node]);
  out.correct = out.guess == out.choice;
  out.next_node = graph.successors(node)[out.choice];
  out.next_fortune = apply_payoff(fortune, graph.out_degree(node), out.wager, out.correct);
  return out;
}

namespace {

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  }
  return m;
}

ReplicationRecord run_terminating_replication(const SimulationConfig& cfg, std::uint64_t index) {
  ReplicationRng rng(cfg.seed, index);
  ReplicationRecord rec;
  NodeId node = cfg.start_node;
  double fortune = 1.0;
  std::size_t steps = 0;
  while (!cfg.graph.is_terminal(node) && steps < cfg.max_steps) {
    const auto step = play_step(cfg.graph, cfg.profile, node, fortune, rng);
    node = step.next_node;
    fortune = step.next_fortune;
    ++steps;
  }
  rec.steps = steps;
  rec.final_node = node;
  if (cfg.graph.is_terminal(node)) {
    rec.final_fortune = fortune * cfg.graph.terminal_value(node);
  } else {
    rec.censored = true;
    rec.final_fortune = fortune;
  }
  return rec;
}

ReplicationRecord run_recurrent_replication(const SimulationConfig& cfg,
                                            const std::vector<std::size_t>& checkpoints,
                                            double discount, std::uint64_t index) {
  ReplicationRng rng(cfg.seed, index);
  ReplicationRecord rec;
  NodeId node = cfg.start_node;
  double discounted = 1.0;
  std::size_t next_checkpoint = 0;
  for (std::size_t t = 1; t <= cfg.max_steps; ++t) {
    const auto step = play_step(cfg.graph, cfg.profile, node, discounted, rng);
    node = step.next_node;
    discounted = step.next_fortune * discount;
    if (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t) {
      rec.checkpoint_nodes.push_back(node);
      rec.checkpoint_fortunes.push_back(discounted);
      ++next_checkpoint;
    }
  }
  rec.steps = cfg.max_steps;
  rec.final_node = node;
  rec.final_fortune = discounted;
  return rec;
}

}  // namespace

SimulationResult run(const SimulationConfig& config) {
  const auto& graph = config.graph;
  const auto cls = classify(graph);
  if (!cls.is_supported()) throw SolveError("cannot simulate: " + describe(cls));
  if (config.start_node >= graph.size() || graph.is_terminal(config.start_node)) {
    throw SolveError("simulation must start at a non-terminal node");
  }
  if (config.replications == 0) throw SolveError("replications must be at least 1");
  if (config.max_steps == 0) throw SolveError("max_steps must be at least 1");
  validate_profile(graph, config.profile);
  const double discount = config.discount.value_or(1.0);
  if (!(discount > 0.0 && discount <= 1.0)) throw SolveError("discount must lie in (0, 1]");

  std::vector<std::size_t> checkpoints = config.checkpoints;
  if (checkpoints.empty()) checkpoints.push_back(config.max_steps);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.front() == 0 || checkpoints.back() > config.max_steps) {
    throw SolveError("checkpoints must lie in [1, max_steps]");
  }

  SimulationResult result;
  result.terminating = cls.is_terminating();
  result.replications.resize(config.replications);

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, config.replications));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      result.replications[r] = result.terminating
                                   ? run_terminating_replication(config, r)
                                   : run_recurrent_replication(config, checkpoints, discount, r);
    }
  };
  if (threads <= 1) {
    work(0, config.replications);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (config.replications + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(config.replications, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  const std::size_t n = graph.size();
  if (result.terminating) {
    std::vector<double> fortunes, steps;
    result.terminal_counts.assign(n, 0);
    for (const auto& rec : result.replications) {
      if (rec.censored) {
        ++result.censored;
        continue;
      }
      fortunes.push_back(rec.final_fortune);
      steps.push_back(static_cast<double>(rec.steps));
      ++result.terminal_counts[rec.final_node];
      if (result.steps_histogram.size() <= rec.steps) result.steps_histogram.resize(rec.steps + 1, 0);
      ++result.steps_histogram[rec.steps];
    }
    result.completed = fortunes.size();
    const auto fm = moments(fortunes);
    const auto sm = moments(steps);
    result.mean_fortune = fm.mean;
    result.fortune_std_error = fm.std_error;
    result.mean_steps = sm.mean;
    result.steps_std_error = sm.std_error;
    if (!fortunes.empty()) {
      const auto [lo, hi] = std::minmax_element(fortunes.begin(), fortunes.end());
      result.min_fortune = *lo;
      result.max_fortune = *hi;
    }
    const double rate = static_cast<double>(result.censored) / static_cast<double>(config.replications);
    if (rate > 0.01) {
      std::ostringstream os;
      os << "censoring rate " << rate << " exceeds 1% (" << result.censored << " of "
         << config.replications << " replications hit max_steps = " << config.max_steps << ")";
      result.warnings.push_back(os.str());
    }
    return result;
  }

  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointSummary summary;
    summary.t = checkpoints[c];
    summary.occupancy.assign(n, 0);
    summary.joint_mean.assign(n, 0.0);
    summary.joint_std_error.assign(n, 0.0);
    std::vector<double> d;
    d.reserve(result.replications.size());
    std::vector<std::vector<double>> joint(n, std::vector<double>(result.replications.size(), 0.0));
    for (std::size_t r = 0; r < result.replications.size(); ++r) {
      const auto& rec = result.replications[r];
      d.push_back(rec.checkpoint_fortunes[c]);
      ++summary.occupancy[rec.checkpoint_nodes[c]];
      joint[rec.checkpoint_nodes[c]][r] = rec.checkpoint_fortunes[c];
    }
    const auto m = moments(d);
    summary.mean = m.mean;
    summary.std_error = m.std_error;
    for (NodeId j = 0; j < n; ++j) {
      const auto jm = moments(joint[j]);
      summary.joint_mean[j] = jm.mean;
      summary.joint_std_error[j] = jm.std_error;
    }
    result.checkpoints.push_back(std::move(summary));
  }
  return result;
}

nlohmann::json simulation_to_json(const GameGraph& graph, const SimulationResult& result) {
  nlohmann::json doc;
  doc["node_index"] = graph.labels();
  doc["replications"] = result.replications.size();
  if (result.terminating) {
    doc["completed"] = result.completed;
    doc["censored"] = result.censored;
    doc["mean_fortune"] = result.mean_fortune;
    doc["fortune_std_error"] = result.fortune_std_error;
    doc["min_fortune"] = result.min_fortune;
    doc["max_fortune"] = result.max_fortune;
    doc["mean_stopping_time"] = result.mean_steps;
    doc["stopping_time_std_error"] = result.steps_std_error;
    auto freq = nlohmann::json::object();
    for (NodeId j : graph.terminals()) {
      freq[graph.label(j)] = result.completed == 0 ? 0.0
                                                   : static_cast<double>(result.terminal_counts[j]) /
                                                         static_cast<double>(result.completed);
    }
    doc["terminal_frequencies"] = std::move(freq);
    doc["stopping_time_histogram"] = result.steps_histogram;
  } else {
    auto cps = nlohmann::json::array();
    for (const auto& cp : result.checkpoints) {
      nlohmann::json entry;
      entry["t"] = cp.t;
      entry["mean_discounted_fortune"] = cp.mean;
      entry["std_error"] = cp.std_error;
      auto occ = nlohmann::json::object();
      auto joint = nlohmann::json::object();
      for (NodeId j = 0; j < graph.size(); ++j) {
        occ[graph.label(j)] = static_cast<double>(cp.occupancy[j]) /
                              static_cast<double>(result.replications.size());
        joint[graph.label(j)] = cp.joint_mean[j];
      }
      entry["occupancy"] = std::move(occ);
      entry["joint_discounted_fortune"] = std::move(joint);
      cps.push_back(std::move(entry));
    }
    doc["checkpoints"] = std::move(cps);
  }
  doc["warnings"] = result.warnings;
  return doc;
}

std::string replications_to_csv(const GameGraph& graph, const SimulationResult& result) {
  std::ostringstream os;
  os << std::setprecision(12);
  if (result.terminating) {
    os << "replication,final_fortune,stopping_time,final_node,censored\n";
    for (std::size_t r = 0; r < result.replications.size(); ++r) {
      const auto& rec = result.replications[r];
      os << r << ',' << rec.final_fortune << ',' << rec.steps << ',' << graph.label(rec.final_node)
         << ',' << (rec.censored ? 1 : 0) << '\n';
    }
    return os.str();
  }
  os << "replication,t,node,discounted_fortune\n";
  for (std::size_t r = 0; r < result.replications.size(); ++r) {
    const auto& rec = result.replications[r];
    for (std::size_t c = 0; c < rec.checkpoint_nodes.size(); ++c) {
      os << r << ',' << result.checkpoints[c].t << ',' << graph.label(rec.checkpoint_nodes[c]) << ','
         << rec.checkpoint_fortunes[c] << '\n';
    }
  }
  return os.str();
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Expected one-round multiplier when the chooser moves to successor k.
double guesser_multiplier(std::size_t n, double wager, double guess_prob) {
  if (n == 1) return 1.0 + wager;
  return guess_prob * (1.0 + static_cast<double>(n - 1) * wager) + (1.0 - guess_prob) * (1.0 - wager);
}

double times(double m, double v) { return m == 0.0 ? 0.0 : m * v; }

ExploitResult chooser_deviation(const GameGraph& graph, const GameSolution& solution,
                                const StrategyProfile& profile) {
  const std::size_t n = graph.size();
  ExploitResult out;
  out.fixed_side = Side::Guesser;
  out.best_values.assign(n, kInf);
  out.deviation_choice.assign(n, 0);
  out.deviation_wager.assign(n, 0.0);
  for (NodeId t : graph.terminals()) out.best_values[t] = graph.terminal_value(t);

  auto relax = [&](NodeId i) {
    const auto succ = graph.successors(i);
    double best = kInf;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < succ.size(); ++k) {
      const double m = guesser_multiplier(succ.size(), profile.wagers[i], profile.guesser[i][k]);
      const double cand = times(m, out.best_values[succ[k]]);
      if (cand < best) {
        best = cand;
        arg = k;
      }
    }
    return std::pair{best, arg};
  };
  // Bellman-Ford over multiplicative path weights; terminating graphs have
  // simple paths of at most n edges.
  for (std::size_t pass = 0; pass < n; ++pass) {
    for (NodeId i : graph.non_terminals()) {
      const auto [best, arg] = relax(i);
      if (best < out.best_values[i]) {
        out.best_values[i] = best;
        out.deviation_choice[i] = arg;
      }
    }
  }
  // Continued decrease means a cycle with product below one: looping drives
  // the fortune to zero.
  for (std::size_t pass = 0; pass < n; ++pass) {
    for (NodeId i : graph.non_terminals()) {
      const auto [best, arg] = relax(i);
      if (best < out.best_values[i] * (1.0 - 1e-12)) {
        out.best_values[i] = 0.0;
        out.deviation_choice[i] = arg;
      }
    }
  }
  out.gains.assign(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    out.gains[i] = solution.values[static_cast<Eigen::Index>(i)] - out.best_values[i];
  }
  return out;
}

ExploitResult guesser_deviation(const GameGraph& graph, const GameSolution& solution,
                                const StrategyProfile& profile, std::size_t grid) {
  const std::size_t n = graph.size();
  ExploitResult out;
  out.fixed_side = Side::Chooser;
  std::vector<double> value(n, 0.0);
  for (NodeId t : graph.terminals()) value[t] = graph.terminal_value(t);
  const auto non_terminals = graph.non_terminals();

  // The payoff is affine in the wager, so value iteration only needs the
  // endpoints w = 0 and w = 1; the grid pass below recovers the maximiser.
  auto endpoint_best = [&](NodeId i) {
    const auto succ = graph.successors(i);
    const auto& p = profile.chooser[i];
    if (succ.size() == 1) return 2.0 * value[succ[0]];
    double mean = 0.0;
    double best_all_in = 0.0;
    for (std::size_t k = 0; k < succ.size(); ++k) {
      mean += times(p[k], value[succ[k]]);
      best_all_in = std::max(best_all_in, static_cast<double>(succ.size()) * times(p[k], value[succ[k]]));
    }
    return std::max(mean, best_all_in);
  };
  bool unbounded = false;
  for (std::size_t sweep = 0; sweep < 1'000'000; ++sweep) {
    double change = 0.0;
    for (NodeId i : non_terminals) {
      const double next = endpoint_best(i);
      change = std::max(change, std::abs(next - value[i]) / std::max(1.0, std::abs(next)));
      value[i] = next;
    }
    if (std::any_of(value.begin(), value.end(), [](double v) { return !(v < 1e100); })) {
      unbounded = true;
      break;
    }
    if (change <= 1e-16) break;
  }

  out.best_values.assign(n, 0.0);
  out.deviation_choice.assign(n, 0);
  out.deviation_wager.assign(n, 0.0);
  for (NodeId t : graph.terminals()) out.best_values[t] = value[t];
  const std::size_t points = std::max<std::size_t>(grid, 2);
  for (NodeId i : non_terminals) {
    if (unbounded) {
      out.best_values[i] = kInf;
      continue;
    }
    const auto succ = graph.successors(i);
    const auto& p = profile.chooser[i];
    double best = -kInf;
    for (std::size_t j = 0; j < succ.size(); ++j) {
      for (std::size_t g = 0; g < points; ++g) {
        const double w = static_cast<double>(g) / static_cast<double>(points - 1);
        double expected = 0.0;
        for (std::size_t k = 0; k < succ.size(); ++k) {
          const double m = succ.size() == 1 ? 1.0 + w : (k == j ? 1.0 + static_cast<double>(succ.size() - 1) * w : 1.0 - w);
          expected += times(p[k] * m, value[succ[k]]);
        }
        if (expected > best) {
          best = expected;
          out.deviation_choice[i] = j;
          out.deviation_wager[i] = w;
        }
      }
    }
    out.best_values[i] = best;
  }
  out.gains.assign(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    out.gains[i] = out.best_values[i] - solution.values[static_cast<Eigen::Index>(i)];
  }
  return out;
}

}  // namespace

ExploitResult exploit_search(const GameGraph& graph, const GameSolution& solution,
                             const StrategyProfile& profile, Side fixed_side, std::size_t grid) {
  const auto cls = classify(graph);
  if (!cls.is_terminating()) {
    throw SolveError("exploit search needs a terminating graph (" + describe(cls) + ")");
  }
  validate_profile(graph, profile);
  auto out = fixed_side == Side::Guesser ? chooser_deviation(graph, solution, profile)
                                         : guesser_deviation(graph, solution, profile, grid);
  out.max_gain = -kInf;
  for (NodeId i : graph.non_terminals()) out.max_gain = std::max(out.max_gain, out.gains[i]);
  return out;
}

}  // namespace pathwager
