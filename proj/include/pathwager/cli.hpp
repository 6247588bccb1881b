#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pathwager/graph.hpp"
#include "pathwager/simulator.hpp"

namespace pathwager::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationError = 1, kVerificationFailure = 2 };

struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;  // path -> sha256 hex
  std::string version{kVersion};
  std::optional<std::uint64_t> seed;
  std::string timestamp;  // ISO 8601 UTC

  nlohmann::json to_json() const;
};

std::string sha256_hex(std::string_view data);
std::string utc_timestamp();

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on validation errors, 2 when verification fails.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

struct PlayOptions {
  Side human = Side::Chooser;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::optional<NodeId> start;
  std::size_t max_rounds = 50;  // strongly connected games only
};

/// Line-oriented game against the optimal opponent. Illegal entries are
/// re-prompted; "quit" or end of input stops the game. Returns the transcript.
nlohmann::json play_repl(const GameGraph& graph, const PlayOptions& options, std::istream& in, std::ostream& out);

}  // namespace pathwager::cli
