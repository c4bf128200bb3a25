#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace radtrap::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Mode { Evolve, Spectrum, Sweep, Asymptote, Oracle };

Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericalError = 3;

/// Configuration problem; maps to exit code 2.
struct ConfigError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Defaults, then preset, then config file (or the `config` member of a
/// manifest), then `key=value` overrides, validated for `mode`. Dotted keys
/// address nested objects; values are parsed as JSON when possible and kept as
/// strings otherwise.
nlohmann::json resolve_config(Mode mode, const std::string& config_path,
                              const std::vector<std::string>& overrides,
                              const std::string& preset);

/// Preset scenarios: fig2 (evolve), fig3 and fig4 (sweep), fig5 (spectrum).
nlohmann::json preset(const std::string& name, Mode& mode);

/// Column names of every CSV table, in file order. `radiative` selects K0
/// over K for the density column.
std::vector<std::string> csv_columns(std::string_view table, bool radiative);

/// `radtrap <mode> --config <path> [--set key=value ...] --out <dir>
/// [--preset name]`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radtrap::cli
