#include "pathwager/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pathwager/dot.hpp"
#include "pathwager/markov.hpp"
#include "pathwager/oracle.hpp"
#include "pathwager/strategy.hpp"
#include "pathwager/values.hpp"
#include "pathwager/verifier.hpp"

namespace pathwager::cli {

namespace {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt12(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file \"" + path + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file \"" + path + "\"");
  out << text;
}

NodeId default_start(const GameGraph& graph) {
  if (const auto root = tree_root(graph)) return *root;
  return 0;
}

NodeId resolve_node(const GameGraph& graph, const std::string& label) {
  const auto id = graph.find(label);
  if (!id) throw ValidationError("unknown node \"" + label + "\"");
  return *id;
}

struct Globals {
  std::string graph_path;
  std::string out_path;
  std::string format = "json";
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

struct Context {
  Globals& globals;
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;

  std::optional<std::uint64_t> seed() const {
    if (globals.seed_opt != nullptr && globals.seed_opt->count() > 0) return globals.seed;
    if (const char* env = std::getenv("PATHWAGER_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t pos = 0;
        const auto v = std::stoull(env, &pos);
        if (pos == std::string_view(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw ValidationError(std::string("PATHWAGER_SEED is not an unsigned integer: ") + env);
    }
    return std::nullopt;
  }

  GameGraph load_graph() {
    if (globals.graph_path.empty()) throw ValidationError("--graph is required");
    const auto text = read_file(globals.graph_path);
    manifest.input_digests[globals.graph_path] = sha256_hex(text);
    return parse_graph(text);
  }

  void emit(const std::string& text) {
    if (globals.out_path.empty()) {
      out << text;
    } else {
      write_file(globals.out_path, text);
    }
  }

  void emit_report(nlohmann::json result) {
    if (globals.format != "json") {
      throw ValidationError("--format " + globals.format + " is not available for " + manifest.subcommand);
    }
    nlohmann::json doc;
    doc["manifest"] = manifest.to_json();
    doc["result"] = std::move(result);
    emit(doc.dump(2) + "\n");
  }
};

GameSolution solve_supported(const GameGraph& graph) {
  const auto cls = classify(graph);
  if (!cls.is_supported()) throw ValidationError("unsupported graph: " + describe(cls));
  return solve(graph);
}

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("--beta must lie in [0, 1]");
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  nlohmann::json doc;
  doc["subcommand"] = subcommand;
  doc["config"] = config;
  doc["input_digests"] = input_digests;
  doc["version"] = version;
  doc["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  doc["timestamp"] = timestamp;
  return doc;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

nlohmann::json play_repl(const GameGraph& graph, const PlayOptions& options, std::istream& in, std::ostream& out) {
  const auto solution = solve_supported(graph);
  check_beta(options.beta);
  const auto profile = build_profile(solution, graph, options.beta);
  const bool terminating = solution.graph_class.is_terminating();
  const double d = solution.discount();
  ReplicationRng rng(options.seed, 0);

  NodeId node = options.start.value_or(default_start(graph));
  double fortune = 1.0;
  const bool human_chooser = options.human == Side::Chooser;

  nlohmann::json transcript;
  transcript["human"] = human_chooser ? "chooser" : "guesser";
  transcript["beta"] = options.beta;
  transcript["seed"] = options.seed;
  transcript["start"] = graph.label(node);
  transcript["rounds"] = nlohmann::json::array();

  out << std::setprecision(12);
  out << "You play the " << (human_chooser ? "chooser" : "guesser") << " against the optimal "
      << (human_chooser ? "guesser" : "chooser") << " (beta = " << options.beta << ", seed = " << options.seed
      << "). Type quit to stop.\n";

  auto read_line = [&](const std::string& prompt, std::string& line) {
    out << prompt << std::flush;
    if (!std::getline(in, line)) return false;
    const auto b = line.find_first_not_of(" \t\r");
    const auto e = line.find_last_not_of(" \t\r");
    line = b == std::string::npos ? "" : line.substr(b, e - b + 1);
    return true;
  };
  // Successor index from a node label or a 1-based position in the list.
  auto parse_successor = [&](const std::string& text) -> std::optional<std::size_t> {
    const auto succ = graph.successors(node);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      if (graph.label(succ[k]) == text) return k;
    }
    if (text.size() > 1 && text[0] == '#') {
      try {
        std::size_t pos = 0;
        const auto k = std::stoul(text.substr(1), &pos);
        if (pos == text.size() - 1 && k >= 1 && k <= succ.size()) return k - 1;
      } catch (const std::exception&) {
      }
    }
    return std::nullopt;
  };

  std::string ended = "rounds";
  std::size_t round = 0;
  while (true) {
    if (graph.is_terminal(node)) {
      fortune *= graph.terminal_value(node);
      out << "Reached terminal " << graph.label(node) << " (value " << fmt12(graph.terminal_value(node))
          << "). Final fortune " << fmt12(fortune) << "\n";
      ended = "terminal";
      break;
    }
    if (!terminating && round >= options.max_rounds) break;
    ++round;
    const auto succ = graph.successors(node);
    out << "\nRound " << round << " at node " << graph.label(node) << ", fortune " << fmt12(fortune);
    if (!terminating) out << ", discounted " << fmt12(fortune * std::pow(d, static_cast<double>(round - 1)));
    out << "\nSuccessors:";
    for (std::size_t k = 0; k < succ.size(); ++k) out << " " << graph.label(succ[k]);
    out << "\n";

    std::size_t guess = 0, choice = 0;
    double wager = 0.0;
    bool quit = false;
    std::string line;
    if (human_chooser) {
      wager = profile.wagers[node];
      guess = rng.sample(guess_distribution(profile, node));
      out << "Guesser wagers " << fmt12(wager) << " of the fortune (" << fmt12(wager * fortune)
          << ") and writes down a guess.\n";
      while (true) {
        if (!read_line("Your move (successor label or #k): ", line) || line == "quit") {
          quit = true;
          break;
        }
        if (const auto k = parse_successor(line)) {
          choice = *k;
          break;
        }
        out << "Illegal move \"" << line << "\": not a successor of " << graph.label(node) << ".\n";
      }
    } else {
      while (true) {
        if (!read_line("Your wager in [0, 1]: ", line) || line == "quit") {
          quit = true;
          break;
        }
        try {
          std::size_t pos = 0;
          const double w = std::stod(line, &pos);
          if (pos == line.size() && w >= 0.0 && w <= 1.0) {
            wager = w;
            break;
          }
        } catch (const std::exception&) {
        }
        out << "Illegal wager \"" << line << "\": enter a number between 0 and 1.\n";
      }
      while (!quit) {
        if (!read_line("Your guess (successor label or #k): ", line) || line == "quit") {
          quit = true;
          break;
        }
        if (const auto k = parse_successor(line)) {
          guess = *k;
          break;
        }
        out << "Illegal guess \"" << line << "\": not a successor of " << graph.label(node) << ".\n";
      }
      if (!quit) {
        choice = rng.sample(profile.chooser[node]);
        out << "Chooser, knowing the wager " << fmt12(wager) << ", moves to " << graph.label(succ[choice]) << ".\n";
      }
    }
    if (quit) {
      --round;
      ended = "quit";
      break;
    }
    const bool correct = guess == choice;
    const double before = fortune;
    fortune = apply_payoff(fortune, succ.size(), wager, correct);
    out << "Guess " << graph.label(succ[guess]) << ", choice " << graph.label(succ[choice]) << ": "
        << (correct ? "correct" : "wrong") << ". Fortune " << fmt12(before) << " -> " << fmt12(fortune) << "\n";
    transcript["rounds"].push_back({{"round", round},
                                    {"node", graph.label(node)},
                                    {"wager", wager},
                                    {"guess", graph.label(succ[guess])},
                                    {"choice", graph.label(succ[choice])},
                                    {"correct", correct},
                                    {"fortune", fortune}});
    node = succ[choice];
  }
  if (ended != "terminal") out << "Game stopped at node " << graph.label(node) << ", fortune " << fmt12(fortune) << "\n";
  transcript["ended"] = ended;
  transcript["final_node"] = graph.label(node);
  transcript["final_fortune"] = fortune;
  if (!terminating) {
    transcript["discounted_fortune"] = fortune * std::pow(d, static_cast<double>(round));
  }
  return transcript;
}

int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Path guessing game with wagering: solver, analytics, simulator and verifier", "pathwager"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--graph", g.graph_path, "Graph JSON file");
  app.add_option("--out", g.out_path, "Write the report here instead of stdout");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed (falls back to PATHWAGER_SEED)");
  app.add_flag_callback("--version", [&] { throw CLI::Success(); }, "Print the version");

  auto* solve_cmd = app.add_subcommand("solve", "Node values");
  bool exact = false;
  std::size_t truncate = 0;
  solve_cmd->add_flag("--exact", exact, "Rational arithmetic (trees)");
  solve_cmd->add_option("--truncate", truncate, "Also report the truncated series up to S steps");

  auto* strategy_cmd = app.add_subcommand("strategy", "Optimal strategy profile");
  double beta = 1.0;
  strategy_cmd->add_option("--beta", beta, "Guesser risk parameter in [0, 1]");

  auto* analyze_cmd = app.add_subcommand("analyze", "Markov-chain analytics of optimal play");
  std::size_t tmax = 500;
  analyze_cmd->add_option("--tmax", tmax, "Length of the stopping-time series");

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo play");
  std::size_t reps = 10000;
  std::optional<std::size_t> horizon;
  std::string start_label;
  std::string csv_path;
  std::vector<std::size_t> checkpoints;
  unsigned threads = 0;
  simulate_cmd->add_option("--beta", beta, "Guesser risk parameter in [0, 1]");
  simulate_cmd->add_option("--reps", reps, "Replications")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--horizon", horizon, "Censoring (terminating) or total (strongly connected) steps");
  simulate_cmd->add_option("--start", start_label, "Start node label");
  simulate_cmd->add_option("--csv", csv_path, "Per-replication CSV file");
  simulate_cmd->add_option("--checkpoints", checkpoints, "Checkpoint times (strongly connected)");
  simulate_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

  auto* generate_cmd = app.add_subcommand("generate", "Lying-oracle game graphs");
  std::string oracle;
  generate_cmd->add_option("--oracle", oracle, "window:N,K | patterns:FILE | window-stop:N")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Equilibrium, convergence and brute-force checks");
  std::size_t depth = 60;
  std::size_t grid = 1001;
  verify_cmd->add_option("--beta", beta, "Guesser risk parameter in [0, 1]");
  verify_cmd->add_option("--depth", depth, "Brute-force depth (0 skips it)");
  verify_cmd->add_option("--grid", grid, "Wager grid points")->check(CLI::Range(2, 1000000));

  auto* play_cmd = app.add_subcommand("play", "Interactive game against the optimal opponent");
  std::string side;
  std::size_t rounds = 50;
  std::string transcript_path;
  play_cmd->add_option("--as", side, "chooser | guesser")->required()->check(CLI::IsMember({"chooser", "guesser"}));
  play_cmd->add_option("--beta", beta, "Engine guesser risk parameter");
  play_cmd->add_option("--start", start_label, "Start node label");
  play_cmd->add_option("--rounds", rounds, "Round limit for strongly connected games");
  play_cmd->add_option("--transcript", transcript_path, "Transcript file (default: --out)");

  auto* dot_cmd = app.add_subcommand("export-dot", "Graphviz export");
  bool annotate = false;
  dot_cmd->add_flag("--annotate", annotate, "Show values, wagers and chooser probabilities");
  dot_cmd->add_option("--beta", beta, "Risk parameter for annotations");

  std::vector<std::string> argv_store{"pathwager"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success&) {
    out << "pathwager " << kVersion << "\n";
    return kOk;
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidationError;
  }

  const auto* cmd = app.get_subcommands().front();
  Context ctx{g, in, out, err, {}};
  ctx.manifest.subcommand = cmd->get_name();
  ctx.manifest.timestamp = utc_timestamp();
  auto& config = ctx.manifest.config;
  config["graph"] = g.graph_path;
  config["format"] = g.format;

  try {
    if (cmd == solve_cmd) {
      const auto graph = ctx.load_graph();
      const auto cls = classify(graph);
      if (!cls.is_supported()) throw ValidationError("unsupported graph: " + describe(cls));
      config["exact"] = exact;
      config["truncate"] = truncate;
      GameSolution solution;
      if (exact) {
        if (!cls.is_tree()) throw ValidationError("--exact needs a tree or fan (graph is " + describe(cls) + ")");
        solution = solve_tree(graph, true);
      } else {
        solution = solve(graph);
      }
      if (g.format == "csv") {
        std::ostringstream os;
        os << std::setprecision(12) << "node,value\n";
        for (NodeId i = 0; i < graph.size(); ++i) os << graph.label(i) << ',' << solution.values[static_cast<Eigen::Index>(i)] << '\n';
        ctx.emit(os.str());
        return kOk;
      }
      auto result = solution_to_json(graph, solution);
      if (truncate > 0) result["truncation"] = truncation_to_json(graph, truncated_values(graph, solution, truncate));
      ctx.emit_report(std::move(result));
      return kOk;
    }

    if (cmd == strategy_cmd) {
      check_beta(beta);
      const auto graph = ctx.load_graph();
      config["beta"] = beta;
      const auto solution = solve_supported(graph);
      const auto profile = build_profile(solution, graph, beta);
      if (g.format == "csv") {
        std::ostringstream os;
        os << std::setprecision(12) << "node,successor,chooser,guesser,wager\n";
        for (NodeId i : graph.non_terminals()) {
          const auto succ = graph.successors(i);
          for (std::size_t k = 0; k < succ.size(); ++k) {
            os << graph.label(i) << ',' << graph.label(succ[k]) << ',' << profile.chooser[i][k] << ','
               << profile.guesser[i][k] << ',' << profile.wagers[i] << '\n';
          }
        }
        ctx.emit(os.str());
        return kOk;
      }
      ctx.emit_report(profile_to_json(graph, profile));
      return kOk;
    }

    if (cmd == analyze_cmd) {
      if (tmax < 1) throw ValidationError("--tmax must be at least 1");
      const auto graph = ctx.load_graph();
      config["tmax"] = tmax;
      const auto solution = solve_supported(graph);
      const auto report = analyze(solution, graph, tmax);
      if (g.format == "csv") {
        if (!report.stopping) throw ValidationError("CSV output is the stopping-time series of a terminating graph");
        ctx.emit(stopping_distribution_csv(graph, *report.stopping));
        return kOk;
      }
      ctx.emit_report(markov_report_to_json(graph, report));
      return kOk;
    }

    if (cmd == simulate_cmd) {
      check_beta(beta);
      const auto graph = ctx.load_graph();
      const auto solution = solve_supported(graph);
      const auto seed = ctx.seed().value_or(0);
      ctx.manifest.seed = seed;
      SimulationConfig sim{graph, build_profile(solution, graph, beta)};
      sim.start_node = start_label.empty() ? default_start(graph) : resolve_node(graph, start_label);
      sim.replications = reps;
      sim.seed = seed;
      sim.threads = threads;
      const bool terminating = solution.graph_class.is_terminating();
      sim.max_steps = horizon.value_or(terminating ? 100'000 : 1000);
      if (!terminating) {
        sim.discount = solution.discount();
        sim.checkpoints = checkpoints.empty() ? std::vector<std::size_t>{sim.max_steps} : checkpoints;
      }
      config["beta"] = beta;
      config["reps"] = reps;
      config["horizon"] = sim.max_steps;
      config["start"] = graph.label(sim.start_node);
      config["checkpoints"] = sim.checkpoints;
      const auto result = run(sim);
      if (!csv_path.empty()) write_file(csv_path, replications_to_csv(graph, result));
      if (g.format == "csv") {
        ctx.emit(replications_to_csv(graph, result));
        return kOk;
      }
      auto doc = simulation_to_json(graph, result);
      doc["value_at_start"] = solution.values[static_cast<Eigen::Index>(sim.start_node)];
      if (!terminating) {
        const auto ss = steady_state_fortunes(solution, graph, &result);
        auto shape = nlohmann::json::object();
        for (NodeId i = 0; i < graph.size(); ++i) shape[graph.label(i)] = ss.shape[static_cast<Eigen::Index>(i)];
        doc["steady_state"] = {{"shape", shape},
                               {"scale_estimate", *ss.c_estimate},
                               {"scale_std_error", *ss.c_std_error},
                               {"checkpoint", *ss.checkpoint}};
      }
      ctx.emit_report(std::move(doc));
      return kOk;
    }

    if (cmd == generate_cmd) {
      const auto spec = parse_oracle_spec(oracle);
      config["oracle"] = oracle;
      if (spec.kind == OracleSpec::Kind::ForbiddenPatterns) {
        const auto path = oracle.substr(oracle.find(':') + 1);
        ctx.manifest.input_digests[path] = sha256_hex(read_file(path));
      }
      const auto graph = build_oracle_game(spec);
      auto doc = graph_to_json(graph);
      doc["manifest"] = ctx.manifest.to_json();
      ctx.emit(doc.dump(2) + "\n");
      return kOk;
    }

    if (cmd == verify_cmd) {
      check_beta(beta);
      const auto graph = ctx.load_graph();
      config["beta"] = beta;
      config["depth"] = depth;
      config["grid"] = grid;
      const auto solution = solve_supported(graph);
      const auto profile = build_profile(solution, graph, beta);
      const auto cert = certify(graph, solution, profile, grid);
      const auto audit = audit_convergence(graph, solution);
      bool pass = cert.pass() && audit.pass();
      nlohmann::json result;
      result["certificate"] = certificate_to_json(cert);
      result["convergence"] = certificate_to_json(audit);
      if (solution.graph_class.is_terminating() && depth > 0) {
        const auto bounds = brute_force_value(graph, grid, depth);
        bool contains = true;
        for (NodeId i = 0; i < graph.size(); ++i) {
          const double v = solution.values[static_cast<Eigen::Index>(i)];
          contains = contains && bounds.lower[i] <= v * (1.0 + 1e-12) && bounds.upper[i] >= v * (1.0 - 1e-12);
        }
        auto bf = bounds_to_json(graph, bounds);
        bf["contains_values"] = contains;
        result["brute_force"] = std::move(bf);
        pass = pass && contains;
      }
      result["pass"] = pass;
      ctx.emit_report(std::move(result));
      if (!pass) err << "verification failed\n";
      return pass ? kOk : kVerificationFailure;
    }

    if (cmd == play_cmd) {
      check_beta(beta);
      const auto graph = ctx.load_graph();
      PlayOptions opts;
      opts.human = side == "chooser" ? Side::Chooser : Side::Guesser;
      opts.beta = beta;
      opts.seed = ctx.seed().value_or(0);
      opts.max_rounds = rounds;
      if (!start_label.empty()) opts.start = resolve_node(graph, start_label);
      ctx.manifest.seed = opts.seed;
      config["as"] = side;
      config["beta"] = beta;
      config["rounds"] = rounds;
      config["start"] = graph.label(opts.start.value_or(default_start(graph)));
      auto transcript = play_repl(graph, opts, in, out);
      nlohmann::json doc{{"manifest", ctx.manifest.to_json()}, {"transcript", std::move(transcript)}};
      const std::string path = transcript_path.empty() ? g.out_path : transcript_path;
      if (!path.empty()) {
        write_file(path, doc.dump(2) + "\n");
        out << "Transcript saved to " << path << "\n";
      }
      return kOk;
    }

    if (cmd == dot_cmd) {
      const auto graph = ctx.load_graph();
      if (!annotate) {
        ctx.emit(to_dot(graph));
        return kOk;
      }
      check_beta(beta);
      const auto solution = solve_supported(graph);
      const auto profile = build_profile(solution, graph, beta);
      ctx.emit(to_dot(graph, &profile, &solution));
      return kOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const GraphError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const OracleError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const SolveError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }
  err << "error: unknown subcommand\n";
  return kValidationError;
}

}  // namespace pathwager::cli
