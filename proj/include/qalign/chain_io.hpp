#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qalign/core.hpp"

namespace qalign {

using ordered_json = nlohmann::ordered_json;

/// One JSONL line: {"step","state","proposal","cut_index","alpha","accepted","tokens_generated"}.
ordered_json to_json(const ChainRecord& record);
ChainRecord chain_record_from_json(const nlohmann::json& j, UnitKind unit);

/// Append-only JSONL writer. Rejects records whose step does not follow the previous one.
class ChainWriter {
 public:
  /// Opens `path` for appending. `next_step` is the step the next record must carry.
  ChainWriter(const std::filesystem::path& path, std::int64_t next_step);

  void append(const ChainRecord& record);
  std::int64_t next_step() const noexcept { return next_step_; }

 private:
  std::ofstream out_;
  std::int64_t next_step_;
};

/// Reads a chain file and checks the steps are 0, 1, 2, ... without gaps.
/// A trailing partial line (interrupted write) is ignored.
std::vector<ChainRecord> read_chain(const std::filesystem::path& path, UnitKind unit);

}  // namespace qalign
