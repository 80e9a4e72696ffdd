#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace pmseg::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kPartialFailure = 4 };

struct TrainArgs {
  std::filesystem::path corpus;
  std::string loss;
  std::string type = "generic";
  std::string source;
  std::filesystem::path out;
  bool exclude_empty = false;
  double shrink_percent = 80.0;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> settings;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::string split = "test";
  std::optional<std::filesystem::path> out;
};

// Each command reports progress on `log` and returns an ExitCode. Errors are
// caught here and mapped to their exit codes.
int gendata(const std::optional<std::filesystem::path>& spec, const std::filesystem::path& out, std::ostream& log);
int train(const TrainArgs& args, std::ostream& log);
int eval(const EvalArgs& args, std::ostream& out, std::ostream& log);
int experiment(const std::filesystem::path& plan, std::ostream& log);
int gradcheck(std::ostream& out);

}  // namespace pmseg::cli
