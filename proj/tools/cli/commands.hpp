#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "gte/mechanism.hpp"

namespace gte::cli {

// Git blob object id: SHA-1 of "blob <size>\0" + content, lowercase hex.
std::string git_blob_sha1(const std::string& content);

MechanismSpec mechanism_from_json(const nlohmann::json& j);
nlohmann::json mechanism_to_json(const MechanismSpec& spec);

// Effective settings of one command: the config file overlaid with the flags
// that were given. Keys mirror the long flag names.
struct CommandContext {
  std::string command;
  std::string target;  // reproduce: table1 | table2 | figure1
  nlohmann::json settings = nlohmann::json::object();
};

// Hash of the settings that influence results (`out` and `workers` excluded).
std::string config_hash(const nlohmann::json& settings);

int cmd_simulate(const CommandContext& ctx, std::ostream& log);
int cmd_estimate(const CommandContext& ctx, std::ostream& log);
int cmd_policy(const CommandContext& ctx, std::ostream& log);
int cmd_reproduce(const CommandContext& ctx, std::ostream& log);

// Parses argv, runs the command and maps library errors to their exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gte::cli
