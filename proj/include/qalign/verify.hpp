#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qalign {

/// Deliberate faults used to show the oracles can fail.
///   "flip-length-ratio": acceptance uses |y| / |y_t| instead of |y_t| / |y|
///   "unnormalized-is":   importance weights are exp(r / beta) / n instead of self-normalized
inline constexpr const char* kMutations[] = {"flip-length-ratio", "unnormalized-is"};

struct VerifyOptions {
  std::optional<std::string> mutation;
  std::set<int> only;  // empty = all criteria
  std::uint64_t seed = 20240917;
  std::optional<std::filesystem::path> scratch_dir;  // for the end-to-end run; a temp dir by default
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::vector<std::string> details;  // measured values and their thresholds
  double seconds = 0.0;              // wall time; not part of the JSON report
};

std::vector<CriterionResult> run_verify(const VerifyOptions& options = {});

/// Machine-readable report without timings, so repeated executions are byte-identical.
nlohmann::ordered_json verify_report_json(const std::vector<CriterionResult>& results,
                                          const std::optional<std::string>& mutation);

/// One "[PASS] 1 ..." / "[FAIL] 1 ..." line per criterion.
std::string verify_report_text(const std::vector<CriterionResult>& results);

}  // namespace qalign
