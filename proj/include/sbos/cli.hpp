#ifndef SBOS_CLI_HPP
#define SBOS_CLI_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "integrate.hpp"
#include "wegner.hpp"

namespace sbos::cli {

using json = nlohmann::json;

/// Bad flags, an invalid grid or an unreadable model file. Nothing has run yet.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;  // verify, wegner, measures
  std::string suite;    // verify: bb, ff, shift, superboson, localization, measures
  std::vector<std::string> classes{"gl"};
  std::vector<int> n{2}, p{1}, q{1};
  std::string F;  // empty selects the suite default
  MCConfig mc;
  double tolerance = 0.02;                // relative bound on Monte Carlo rows
  std::optional<double> exact_tolerance;  // bound on deterministic rows; unset uses the suite default
  bool skip_invalid = false;
  std::string model_path;
  std::optional<json> model;  // used instead of model_path when set
  std::optional<cplx> E0, E1;
  std::vector<std::string> methods{"mc", "sb", "hs"};
  std::string emit = "json";
  std::string output;

  json to_json() const;
};

/// Runs one command and returns the report: {"config", "rows", "summary"}.
/// Throws UsageError before any computation if the configuration is invalid.
json run(const RunConfig& cfg);

/// JSON with sorted keys, or CSV with one line per row and the union of row keys as columns.
std::string render(const json& report, const std::string& emit);

/// 0 when every row passes, 1 when a row fails or carries an error.
int exit_status(const json& report);

/// Model file: {"sites": L, "C": [row-major L*L], "n": n, "E0": [re, im], "E1": [re, im] or re}.
std::pair<wegner::Model, wegner::Energies> parse_model(const json& j);
std::pair<wegner::Model, wegner::Energies> read_model(const std::string& path);

/// Parses argv, runs, writes the rendered report and returns the process exit code.
int main(int argc, char** argv);

}  // namespace sbos::cli

#endif
