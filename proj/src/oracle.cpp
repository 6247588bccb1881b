#include "pathwager/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include "pathwager/strategy.hpp"
#include "pathwager/values.hpp"

namespace pathwager {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

OutcomeAutomaton reachable_part(const OutcomeAutomaton& a) {
  std::vector<std::size_t> remap(a.next.size(), kNone);
  std::vector<std::size_t> order{a.start};
  remap[a.start] = 0;
  for (std::size_t q = 0; q < order.size(); ++q) {
    for (const auto& t : a.next[order[q]]) {
      if (t && remap[*t] == kNone) {
        remap[*t] = order.size();
        order.push_back(*t);
      }
    }
  }
  OutcomeAutomaton out;
  out.start = 0;
  out.next.resize(order.size());
  for (std::size_t q = 0; q < order.size(); ++q) {
    for (int c = 0; c < 2; ++c) {
      if (const auto& t = a.next[order[q]][c]) out.next[q][c] = remap[*t];
    }
  }
  return out;
}

}  // namespace

OutcomeAutomaton minimize(const OutcomeAutomaton& automaton) {
  const auto a = reachable_part(automaton);
  const std::size_t n = a.next.size();
  // Initial blocks: which outcomes are available.
  std::vector<std::size_t> block(n);
  for (std::size_t q = 0; q < n; ++q) {
    block[q] = (a.next[q][0] ? 1u : 0u) | (a.next[q][1] ? 2u : 0u);
  }
  std::size_t blocks = 0;
  while (true) {
    std::map<std::array<std::size_t, 3>, std::size_t> ids;
    std::vector<std::size_t> refined(n);
    for (std::size_t q = 0; q < n; ++q) {
      const std::array<std::size_t, 3> sig{block[q], a.next[q][0] ? block[*a.next[q][0]] : kNone,
                                           a.next[q][1] ? block[*a.next[q][1]] : kNone};
      refined[q] = ids.emplace(sig, ids.size()).first->second;
    }
    block = std::move(refined);
    if (ids.size() == blocks) break;
    blocks = ids.size();
  }
  OutcomeAutomaton quotient;
  quotient.start = block[a.start];
  quotient.next.resize(blocks);
  for (std::size_t q = 0; q < n; ++q) {
    for (int c = 0; c < 2; ++c) {
      if (const auto& t = a.next[q][c]) quotient.next[block[q]][c] = block[*t];
    }
  }
  return reachable_part(quotient);
}

GameGraph automaton_to_graph(const OutcomeAutomaton& automaton) {
  const std::size_t n = automaton.next.size();
  std::vector<std::size_t> order(n, kNone);
  std::vector<std::size_t> bfs{automaton.start};
  order[automaton.start] = 0;
  for (std::size_t q = 0; q < bfs.size(); ++q) {
    for (const auto& t : automaton.next[bfs[q]]) {
      if (t && order[*t] == kNone) {
        order[*t] = bfs.size();
        bfs.push_back(*t);
      }
    }
  }
  std::vector<std::string> labels;
  for (std::size_t q = 0; q < bfs.size(); ++q) labels.push_back(std::to_string(q + 1));
  std::vector<EdgeSpec> edges;
  for (std::size_t q : bfs) {
    const auto& [truth, lie] = automaton.next[q];
    if (truth && lie && *truth == *lie) {
      throw OracleError("truth and lie transitions of a state coincide; the guesser cannot tell them apart");
    }
    if (truth) edges.push_back({order[q], order[*truth], std::string(kTruthLabel)});
    if (lie) edges.push_back({order[q], order[*lie], std::string(kLieLabel)});
  }
  return GameGraph::create(std::move(labels), std::move(edges), {});
}

GameGraph build_window_game(std::size_t n, std::size_t k) {
  if (n == 0) throw OracleError("window length n must be at least 1");
  if (k >= n) throw OracleError("lie budget k must be smaller than the window length n");
  if (n > 25) throw OracleError("window length n > 25 is not supported");
  // State: the last n-1 outcomes as a bit mask, newest in bit 0, lie = 1.
  const std::size_t bits = n - 1;
  const std::uint64_t mask = bits == 0 ? 0 : (std::uint64_t{1} << bits) - 1;
  std::map<std::uint64_t, std::size_t> id;
  std::vector<std::uint64_t> states{0};
  id[0] = 0;
  OutcomeAutomaton a;
  a.start = 0;
  for (std::size_t q = 0; q < states.size(); ++q) {
    const std::uint64_t h = states[q];
    a.next.resize(states.size());
    auto target = [&](std::uint64_t next) {
      auto [it, inserted] = id.emplace(next, states.size());
      if (inserted) states.push_back(next);
      return it->second;
    };
    const std::size_t truth = target((h << 1) & mask);
    a.next.resize(states.size());
    a.next[q][0] = truth;
    if (static_cast<std::size_t>(std::popcount(h)) + 1 <= k) {
      const std::size_t lie = target(((h << 1) | 1) & mask);
      a.next.resize(states.size());
      a.next[q][1] = lie;
    }
  }
  return automaton_to_graph(minimize(a));
}

GameGraph build_forbidden_pattern_game(const std::vector<Pattern>& patterns) {
  if (patterns.empty()) throw OracleError("at least one forbidden pattern is required");
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    if (patterns[i].empty()) throw OracleError("forbidden patterns must be non-empty");
    for (std::size_t j = 0; j < patterns.size(); ++j) {
      if (i == j) continue;
      const auto& p = patterns[i];
      const auto& q = patterns[j];
      if (q.size() <= p.size() && std::search(p.begin(), p.end(), q.begin(), q.end()) != p.end()) {
        throw OracleError("pattern set is not reduced: \"" + pattern_to_string(q) +
                          "\" occurs inside \"" + pattern_to_string(p) + "\"");
      }
    }
  }

  // Trie of the patterns, then Aho-Corasick failure links to complete the
  // transition function.
  std::vector<std::array<std::size_t, 2>> child{{kNone, kNone}};
  std::vector<bool> terminal_match{false};
  for (const auto& p : patterns) {
    std::size_t node = 0;
    for (Outcome o : p) {
      const auto c = static_cast<std::size_t>(o);
      if (child[node][c] == kNone) {
        child[node][c] = child.size();
        child.push_back({kNone, kNone});
        terminal_match.push_back(false);
      }
      node = child[node][c];
    }
    terminal_match[node] = true;
  }
  const std::size_t n = child.size();
  std::vector<std::size_t> fail(n, 0);
  std::vector<std::array<std::size_t, 2>> delta(n);
  std::vector<bool> forbidden = terminal_match;
  std::deque<std::size_t> queue;
  for (int c = 0; c < 2; ++c) {
    if (child[0][c] != kNone) {
      delta[0][c] = child[0][c];
      fail[child[0][c]] = 0;
      queue.push_back(child[0][c]);
    } else {
      delta[0][c] = 0;
    }
  }
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    if (forbidden[fail[v]]) forbidden[v] = true;
    for (int c = 0; c < 2; ++c) {
      if (child[v][c] != kNone) {
        const std::size_t w = child[v][c];
        fail[w] = delta[fail[v]][c];
        delta[v][c] = w;
        queue.push_back(w);
      } else {
        delta[v][c] = delta[fail[v]][c];
      }
    }
  }

  // Legal states are proper prefixes; transitions completing a pattern are cut.
  std::vector<bool> alive(n);
  for (std::size_t v = 0; v < n; ++v) alive[v] = !forbidden[v];
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      if (!alive[delta[v][0]] && !alive[delta[v][1]]) {
        alive[v] = false;
        changed = true;
      }
    }
  }
  if (!alive[0]) throw OracleError("the forbidden patterns rule out every infinite statement sequence");

  OutcomeAutomaton a;
  a.start = 0;
  a.next.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (!alive[v]) continue;
    for (int c = 0; c < 2; ++c) {
      if (alive[delta[v][c]]) a.next[v][c] = delta[v][c];
    }
  }
  auto graph = automaton_to_graph(minimize(a));
  const auto cls = classify(graph);
  if (!cls.is_strongly_connected()) {
    throw OracleError("forbidden-pattern game is unsupported: " + describe(cls));
  }
  return graph;
}

double stopping_probability_closed_form(std::size_t n, std::size_t i) {
  if (n < 2 || i < 1 || i > n) throw OracleError("stop probability needs n >= 2 and 1 <= i <= n");
  const double num = std::ldexp(1.0, static_cast<int>(n)) - 1.0;
  if (i == 1) {
    return num / (3.0 * (std::ldexp(1.0, static_cast<int>(n) - 1) + std::ldexp(1.0, static_cast<int>(n) - 2) - 1.0));
  }
  if (i == 2) return 0.0;
  return num / (std::ldexp(1.0, static_cast<int>(n) + 1) - std::ldexp(1.0, static_cast<int>(i) - 2) - 2.0);
}

GameGraph build_stopping_variant(std::size_t n) {
  if (n < 2) throw OracleError("stopping variant needs n >= 2");
  const auto base = build_window_game(n, 1);
  std::vector<std::string> labels = base.labels();
  const NodeId stop = labels.size();
  labels.emplace_back(kStopLabel);

  std::vector<bool> truth_only(base.size(), true);
  std::vector<EdgeSpec> edges;
  for (NodeId i = 0; i < base.size(); ++i) {
    const auto succ = base.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      edges.push_back({i, succ[k], base.edge_label(i, k)});
      if (base.edge_label(i, k) != kTruthLabel) truth_only[succ[k]] = false;
    }
  }
  // Start node, and every node that is only entered after a truth.
  for (NodeId i = 0; i < base.size(); ++i) {
    if (i == 0 || truth_only[i]) edges.push_back({i, stop, std::string(kStopLabel)});
  }
  auto graph = GameGraph::create(std::move(labels), std::move(edges), {{stop, TerminalValue{1.0, Rational(1)}}});

  const auto solution = solve_terminating(graph);
  const auto profile = build_profile(solution, graph, 1.0);
  for (NodeId i = 0; i < base.size(); ++i) {
    double p_stop = 0.0;
    const auto succ = graph.successors(i);
    for (std::size_t k = 0; k < succ.size(); ++k) {
      if (succ[k] == stop) p_stop = profile.chooser[i][k];
    }
    const double expected = stopping_probability_closed_form(n, i + 1);
    if (std::abs(p_stop - expected) > 1e-10) {
      std::ostringstream os;
      os << "stopping-variant reconstruction disagrees with the closed form at node " << i + 1
         << ": solver " << p_stop << ", closed form " << expected;
      throw OracleError(os.str());
    }
  }
  return graph;
}

GameGraph build_oracle_game(const OracleSpec& spec) {
  switch (spec.kind) {
    case OracleSpec::Kind::Window: return build_window_game(spec.n, spec.k);
    case OracleSpec::Kind::ForbiddenPatterns: return build_forbidden_pattern_game(spec.patterns);
    case OracleSpec::Kind::WindowWithStop: return build_stopping_variant(spec.n);
  }
  throw OracleError("unknown oracle kind");
}

std::string pattern_to_string(const Pattern& pattern) {
  std::string out;
  for (Outcome o : pattern) out.push_back(o == Outcome::Truth ? 'T' : 'L');
  return out;
}

std::vector<Pattern> parse_patterns(std::string_view text) {
  std::vector<Pattern> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    Pattern p;
    while (tokens >> tok) {
      std::string lower;
      for (char ch : tok) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
      if (lower == "truth") {
        p.push_back(Outcome::Truth);
      } else if (lower == "lie") {
        p.push_back(Outcome::Lie);
      } else {
        for (char ch : lower) {
          if (ch == 't') {
            p.push_back(Outcome::Truth);
          } else if (ch == 'l') {
            p.push_back(Outcome::Lie);
          } else {
            throw OracleError("unexpected token \"" + tok + "\" in pattern file (use T/L)");
          }
        }
      }
    }
    if (!p.empty()) out.push_back(std::move(p));
  }
  return out;
}

OracleSpec parse_oracle_spec(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw OracleError("oracle spec must look like kind:args");
  const std::string kind(text.substr(0, colon));
  const std::string args(text.substr(colon + 1));
  auto to_size = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      throw OracleError("bad integer \"" + s + "\" in oracle spec");
    }
    if (pos != s.size()) throw OracleError("bad integer \"" + s + "\" in oracle spec");
    return static_cast<std::size_t>(v);
  };
  OracleSpec spec;
  if (kind == "window") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw OracleError("window spec needs N,K");
    spec.kind = OracleSpec::Kind::Window;
    spec.n = to_size(args.substr(0, comma));
    spec.k = to_size(args.substr(comma + 1));
  } else if (kind == "window-stop") {
    spec.kind = OracleSpec::Kind::WindowWithStop;
    spec.n = to_size(args);
    spec.k = 1;
  } else if (kind == "patterns") {
    std::ifstream in(args);
    if (!in) throw OracleError("cannot read pattern file \"" + args + "\"");
    std::stringstream buf;
    buf << in.rdbuf();
    spec.kind = OracleSpec::Kind::ForbiddenPatterns;
    spec.patterns = parse_patterns(buf.str());
  } else {
    throw OracleError("unknown oracle kind \"" + kind + "\" (window, window-stop, patterns)");
  }
  return spec;
}

Gn1Reference gn1_reference(std::size_t n) {
  if (n < 2) throw OracleError("G_{n,1} reference needs n >= 2");
  const int ni = static_cast<int>(n);
  auto f = [&](double l) { return std::pow(l, ni - 1) * (l - 1.0) - 1.0; };
  double lo = 1.0, hi = 2.0;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  Gn1Reference ref;
  ref.n = n;
  ref.lambda = 0.5 * (lo + hi);
  const double l = ref.lambda;
  ref.r = l / 2.0;
  ref.x.resize(ni);
  ref.y.resize(ni);
  ref.mu.resize(ni);
  ref.x[0] = std::pow(l, ni - 1);
  for (int i = 1; i < ni; ++i) ref.x[i] = std::pow(l, i - 1);
  for (int i = 0; i < ni; ++i) ref.y[i] = std::pow(l, ni - 1 - i);
  ref.oracle_truth_prob = 1.0 / l;
  ref.oracle_lie_prob = std::pow(l, -ni);
  ref.bettor_wager = 1.0 / l - std::pow(l, -ni);
  const double norm = std::pow(l, ni) + static_cast<double>(n) - 1.0;
  ref.mu.setConstant(1.0 / norm);
  ref.mu[0] = std::pow(l, ni) / norm;
  return ref;
}

}  // namespace pathwager
