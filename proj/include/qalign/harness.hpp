#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qalign/backends.hpp"
#include "qalign/core.hpp"
#include "qalign/decision.hpp"
#include "qalign/transport.hpp"
#include "qalign/tuning.hpp"

namespace qalign {

enum class Method { qalign, bon, mv, wmv };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

/// One backend section of a run config ([generator] or [reward]).
///   kind = "toy"          enumerable space file (`space`)
///   kind = "http"         live endpoint (`base_url`, `api_key_env`, `timeout_ms`, `max_retries`,
///                         `record` = write request/response pairs to <run>/fixtures.jsonl)
///   kind = "fixture"      replay of a fixture file (`fixture`)
///   kind = "exact_match"  reward only: 1 when the extracted answer equals the prompt's gold
struct BackendSpec {
  std::string kind = "toy";
  std::optional<std::filesystem::path> space;
  std::optional<std::filesystem::path> fixture;
  std::string base_url;
  std::string api_key_env;
  std::string model;
  double temperature = 1.0;
  std::int64_t param_count = 1;
  UnitKind unit = UnitKind::word;
  int timeout_ms = 60000;
  int max_retries = 3;
  bool record = false;

  nlohmann::ordered_json to_json() const;
};

struct RunConfig {
  std::string run_id;
  Method method = Method::qalign;
  std::uint64_t seed = 0;
  std::filesystem::path prompts;  // JSONL {id, question, gold?, template_id?, metadata?}
  std::optional<std::string> template_id;
  std::optional<std::filesystem::path> template_dir;
  std::vector<std::int64_t> budget_schedule;
  std::optional<double> beta;
  std::int64_t steps = 0;  // T for qalign; 0 = max(schedule) - 1
  std::int64_t max_len = 64;
  double temperature = 1.0;  // initial sampling temperature; must equal the generator's
  UtilityKind utility = UtilityKind::exact_match;
  AnswerExtractor extractor = AnswerExtractor::identity;
  std::size_t workers = 1;
  BackendSpec generator;
  BackendSpec reward;
  TuneOptions tuning;  // [tuning] section for tune-beta

  /// Reads a TOML config; relative paths are resolved against the config's directory.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Throws on missing method fields (beta for qalign/wmv), a non-increasing schedule, etc.
  void validate() const;

  /// Number of samples/states the maximal run produces: T + 1 for qalign, max(schedule) otherwise.
  std::int64_t sample_count() const;
  std::int64_t chain_steps() const;

  /// Canonical description stored in run.json; used to detect resume conflicts.
  nlohmann::ordered_json to_json() const;
};

std::vector<Prompt> load_prompts(const std::filesystem::path& path, const std::optional<std::string>& template_id);

/// Live generator/reward backends for a config. Owns transports, spaces and recorders.
class BackendSet {
 public:
  BackendSet(const RunConfig& cfg, const std::optional<std::filesystem::path>& record_dir);
  ~BackendSet();
  BackendSet(const BackendSet&) = delete;
  BackendSet& operator=(const BackendSet&) = delete;

  GenerationBackend& generator() { return *generator_; }
  RewardBackend& reward() { return *reward_; }
  /// True when responses come from a fixture file; such runs execute prompts sequentially so
  /// identical requests are answered in recorded order.
  bool replaying() const noexcept { return replaying_; }
  bool recording() const noexcept { return recorder_ != nullptr; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  GenerationBackend* generator_ = nullptr;
  RewardBackend* reward_ = nullptr;
  FixtureRecorder* recorder_ = nullptr;
  bool replaying_ = false;
};

struct RunOptions {
  std::filesystem::path runs_root = "runs";
  std::optional<std::size_t> workers;  // overrides the config
  std::optional<std::filesystem::path> config_source;  // copied into the run directory
};

/// Executes (or resumes) a run and writes:
///   <root>/<run_id>/run.json, config.toml, prompts.jsonl, [fixtures.jsonl]
///   <root>/<run_id>/<prompt_id>/chain_0.jsonl (qalign) or samples.jsonl (bon/mv/wmv)
///   <root>/<run_id>/<prompt_id>/decisions.jsonl  one {budget, flops, tokens, report} per budget
/// Returns the run directory.
std::filesystem::path cmd_run(const RunConfig& cfg, const RunOptions& options = {});

struct CurveResult {
  std::filesystem::path csv;
  std::filesystem::path svg;
  std::vector<std::string> warnings;
};

/// Error-vs-FLOPs curves of one or more runs. Error is 1 - accuracy against gold answers (from
/// `gold` when given, else each run's prompts); without gold for every prompt the curve falls
/// back to 1 - mean expected utility and a warning is returned.
CurveResult cmd_curve(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir,
                      const std::optional<std::filesystem::path>& gold = std::nullopt);

/// Pilot-chain beta tuning using the config's backends, prompts (first `pilots`) and [tuning].
TuneResult cmd_tune_beta(const RunConfig& cfg, std::size_t pilots);
nlohmann::ordered_json to_json(const TuneResult& result);

struct AnalyzeOptions {
  std::optional<std::filesystem::path> run_dir;   // rewards from samples.jsonl files
  std::optional<std::filesystem::path> rewards;   // JSONL {"id", "rewards": [...]}
  std::optional<std::filesystem::path> space;     // enumerable space for the TV curve
  double beta = 1.0;
  std::int64_t steps = 20000;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> ns{8, 16, 32, 64, 128, 256, 512, 1024};
  std::int64_t gumbel_n = 32;
  int gumbel_trials = 10000;
  std::filesystem::path out_dir = "analysis";
};

/// Writes mixture_fits.csv, gumbel.csv (n, n_d, a_n, b_n, beta_star), reward_mixture_<id>.svg,
/// gumbel_<id>.svg and, with a space, tv.csv. Returns the files written.
std::vector<std::filesystem::path> cmd_analyze(const AnalyzeOptions& options);

struct ReplayResult {
  std::filesystem::path replay_dir;
  std::vector<std::string> mismatches;  // relative paths whose bytes differ
  bool identical() const { return mismatches.empty(); }
};

/// Re-executes a finished run from its copied config, with HTTP backends replaced by the run's
/// recorded fixtures, into `out_root`, and compares every per-prompt file byte for byte.
ReplayResult cmd_replay(const std::filesystem::path& run_dir, const std::filesystem::path& out_root);

/// Byte comparison of two files; false when either is missing.
bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace qalign
